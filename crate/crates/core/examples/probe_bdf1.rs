use ace_core::ace::{Bdf1Stepper, EnsembleState, MemberState, ProblemSpec, SimConfig};
use ace_core::fem::{assemble_static_operators, build_fe_system, ProblemKind};
use ace_core::mesh::{build_structured_mesh, Labeling};

fn main() {
    let n = 32;
    let ra = 1e4;
    let fe = build_fe_system(
        build_structured_mesh(n, Labeling::Cavity).unwrap(),
        ProblemKind::Cavity,
    );
    let ops = assemble_static_operators(&fe);
    let cfg = SimConfig {
        mesh_n: n,
        ra,
        ensemble_size: 1,
        ..Default::default()
    };
    let bdf1 = Bdf1Stepper::new(&fe, &ops, cfg);
    let mut m = MemberState::zeros(&fe);
    for (i, v) in m.u.iter_mut().enumerate() {
        if !fe.vel_is_dirichlet[i] {
            *v = 1.0;
        }
    }
    for i in 0..fe.n_p2_nodes {
        m.t[i] = 1.0;
    }
    for (&node, &val) in fe.temp_dirichlet.iter().zip(&fe.temp_dirichlet_values) {
        m.t[node] = val;
    }
    let mut state = EnsembleState {
        members: vec![m],
        time: 0.0,
        dt: 1e-3,
    };
    let problem = ProblemSpec::cavity();
    let t0 = std::time::Instant::now();
    for step in 0..5 {
        match bdf1.step(&state, &problem) {
            Ok((next, log)) => {
                println!(
                    "step {step}: coupled iters {}, temp iters {}",
                    log.velocity_iterations, log.temperature_iterations
                );
                state = next;
            }
            Err(e) => {
                println!("step {step} FAILED: {e}");
                return;
            }
        }
    }
    println!("5 steps in {:.2}s", t0.elapsed().as_secs_f64());
}
