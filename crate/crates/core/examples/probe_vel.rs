use ace_core::ace::*;
use ace_core::fem::{assemble_static_operators, build_fe_system, ProblemKind};
use ace_core::linsolve::{gmres_solve, GmresParams, Ilu0, Ilut, Jacobi};
use ace_core::mesh::{build_structured_mesh, Labeling};
use std::time::Instant;

fn main() {
    let n = 32;
    let fe = build_fe_system(
        build_structured_mesh(n, Labeling::Cavity).unwrap(),
        ProblemKind::Cavity,
    );
    let ops = assemble_static_operators(&fe);
    let cfg = SimConfig {
        mesh_n: n,
        ra: 1e3,
        ensemble_size: 1,
        gmres: GmresParams { tol: 1e-10, restart: 400, max_iter: 8000 },
        ..Default::default()
    };
    // March a few steps to get a realistic state, then extract one system.
    let mut stepper = Stepper::new(&fe, &ops, cfg);
    let problem = ProblemSpec::cavity();
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
    let mut state = EnsembleState { members: vec![m], time: 0.0, dt: 1e-3 };
    for _ in 0..5 {
        let (next, _) = stepper.ace_step(&state, &problem).unwrap();
        state = next;
    }
    let mean = state.ensemble_mean(Field::Velocity);
    let mut a = stepper.velocity_system_matrix(&mean, state.dt);
    // Dirichlet elimination like the stepper does.
    let applier = ace_core::fem::DirichletApplier::new(&ops.vector_pattern, &fe.vel_dirichlet);
    let _ = applier.eliminate(&mut a);
    // A representative rhs.
    let mut rhs = ops.m_u.mul_vec_alloc(&state.members[0].u);
    rhs.iter_mut().for_each(|v| *v *= 1.0 / state.dt);
    for &d in &fe.vel_dirichlet {
        rhs[d] = 0.0;
    }
    let x0 = vec![0.0; fe.n_vel_dofs];

    for restart in [50usize, 200, 600, 1200] {
        let params = GmresParams { tol: 1e-10, restart, max_iter: 4000 };
        let ilu = Ilu0::new(&a).unwrap();
        let t = Instant::now();
        let (_, rep) = gmres_solve(&a, &rhs, &x0, params, &ilu);
        println!(
            "ILU0  restart={restart:5}: iters={:5} conv={} res={:.2e} time={:.3}s",
            rep.iterations, rep.converged, rep.relative_residual, t.elapsed().as_secs_f64()
        );
    }
    let params = GmresParams { tol: 1e-10, restart: 600, max_iter: 4000 };
    let jac = Jacobi::new(&a).unwrap();
    let t = Instant::now();
    let (_, rep) = gmres_solve(&a, &rhs, &x0, params, &jac);
    println!(
        "Jacobi restart=600: iters={:5} conv={} res={:.2e} time={:.3}s",
        rep.iterations, rep.converged, rep.relative_residual, t.elapsed().as_secs_f64()
    );
    for (droptol, lfil) in [(1e-3, 20usize), (1e-4, 30), (1e-4, 60), (1e-5, 60), (1e-5, 120)] {
        let t = Instant::now();
        let ilut = Ilut::new(&a, droptol, lfil).unwrap();
        let setup = t.elapsed().as_secs_f64();
        let params = GmresParams { tol: 1e-10, restart: 200, max_iter: 2000 };
        let t = Instant::now();
        let (_, rep) = gmres_solve(&a, &rhs, &x0, params, &ilut);
        println!(
            "ILUT({droptol:.0e},{lfil:3}): nnz={:8} setup={setup:.3}s iters={:4} conv={} time={:.3}s",
            ilut.fill_nnz(), rep.iterations, rep.converged, t.elapsed().as_secs_f64()
        );
    }
}
