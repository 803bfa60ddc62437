//! Legacy ASCII VTK export of mesh and fields for visualization. Fields are
//! sampled at mesh vertices (the P1 subset of the P2 nodes).

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::ace::MemberState;
use crate::fem::FeSystem;

pub fn write_vtk(
    path: &Path,
    title: &str,
    fe: &FeSystem,
    member: &MemberState,
) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mesh = &fe.mesh;
    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str(title);
    out.push('\n');
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    out.push_str(&format!("POINTS {nv} double\n"));
    for v in &mesh.vertices {
        out.push_str(&format!("{} {} 0\n", v[0], v[1]));
    }
    out.push_str(&format!("CELLS {nt} {}\n", 4 * nt));
    for t in &mesh.triangles {
        out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    out.push_str(&format!("CELL_TYPES {nt}\n"));
    for _ in 0..nt {
        out.push_str("5\n");
    }
    out.push_str(&format!("POINT_DATA {nv}\n"));
    out.push_str("SCALARS temperature double\nLOOKUP_TABLE default\n");
    for i in 0..nv {
        out.push_str(&format!("{}\n", member.t[i]));
    }
    out.push_str("SCALARS pressure double\nLOOKUP_TABLE default\n");
    for i in 0..nv {
        out.push_str(&format!("{}\n", member.p[i]));
    }
    out.push_str("VECTORS velocity double\n");
    for i in 0..nv {
        out.push_str(&format!("{} {} 0\n", member.u[2 * i], member.u[2 * i + 1]));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())
}

pub fn vtk_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.vtk"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_fe_system, ProblemKind};
    use crate::mesh::{build_structured_mesh, Labeling};

    #[test]
    fn vtk_file_is_well_formed() {
        let fe = build_fe_system(
            build_structured_mesh(2, Labeling::Cavity).unwrap(),
            ProblemKind::Cavity,
        );
        let m = MemberState::zeros(&fe);
        let dir = std::env::temp_dir().join("ace_vtk_test");
        let path = vtk_path(&dir, "smoke");
        write_vtk(&path, "smoke test", &fe, &m).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0"));
        assert!(text.contains("POINTS 9 double"));
        assert!(text.contains("CELLS 8 32"));
        assert!(text.contains("VECTORS velocity double"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
