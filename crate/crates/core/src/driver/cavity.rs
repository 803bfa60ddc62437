//! Differentially heated cavity benchmark with Rayleigh-number continuation:
//! each Ra starts from the previous steady state (constant 1 for the first),
//! perturbed by a bred-vector pair, and integrates to the relative-increment
//! stopping condition.

use std::path::Path;

use super::{fmt_f, write_csv, DriverError, RawConfig, RunManifest, Scale, SolverSettings};
use crate::ace::{EnsembleState, Field, MemberState, ProblemSpec, SimConfig, Stepper};
use crate::diag::{self, Midline, Wall};
use crate::fem::{assemble_static_operators, build_fe_system, FeSystem, ProblemKind};
use crate::mesh::{build_structured_mesh, Labeling};
use crate::perturb;

#[derive(Clone, Debug)]
pub struct CavityConfig {
    pub ra_list: Vec<f64>,
    pub n: usize,
    pub dt0: f64,
    pub eps_ratio: f64,
    pub c_dagger: f64,
    pub pr: f64,
    pub steady_tol: f64,
    pub max_steps: usize,
    pub k_star: usize,
    pub reinit_dt: f64,
    pub seed: u64,
    pub write_vtk: bool,
    pub solver: SolverSettings,
}

impl CavityConfig {
    pub fn from_config(raw: &RawConfig, scale: Scale, seed: Option<u64>) -> Result<Self, DriverError> {
        let solver = SolverSettings::from_config(raw)?;
        let mut s = raw.section("cavity");
        let mut cfg = CavityConfig {
            ra_list: s.f64_list("ra_list", &[1e3, 1e4, 1e5, 1e6])?,
            n: s.usize("n", 64)?,
            dt0: s.f64("dt0", 1e-3)?,
            eps_ratio: s.f64("eps_ratio", 0.01)?,
            c_dagger: s.f64("c_dagger", 0.35)?,
            pr: s.f64("pr", 0.71)?,
            steady_tol: s.f64("steady_tol", 1e-5)?,
            max_steps: s.usize("max_steps", 200_000)?,
            k_star: s.usize("k_star", 5)?,
            reinit_dt: s.f64("reinit_dt", 1e-3)?,
            seed: s.u64("seed", 0)?,
            write_vtk: s.bool("write_vtk", true)?,
            solver,
        };
        s.finish()?;
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        if scale == Scale::Desk {
            cfg.ra_list.retain(|&ra| ra <= 1e5);
            cfg.n = cfg.n.min(32);
        }
        if cfg.ra_list.is_empty() {
            return Err(DriverError::Config("cavity ra_list is empty".into()));
        }
        Ok(cfg)
    }

    fn manifest(&self) -> RunManifest {
        RunManifest::new(
            "cavity",
            vec![
                ("ra_list".into(), format!("{:?}", self.ra_list)),
                ("n".into(), self.n.to_string()),
                ("dt0".into(), fmt_f(self.dt0)),
                ("eps_ratio".into(), fmt_f(self.eps_ratio)),
                ("c_dagger".into(), fmt_f(self.c_dagger)),
                ("pr".into(), fmt_f(self.pr)),
                ("steady_tol".into(), fmt_f(self.steady_tol)),
                ("max_steps".into(), self.max_steps.to_string()),
                ("k_star".into(), self.k_star.to_string()),
                ("reinit_dt".into(), fmt_f(self.reinit_dt)),
                ("seed".into(), self.seed.to_string()),
                ("gmres_tol".into(), fmt_f(self.solver.tol)),
                ("gmres_restart".into(), self.solver.restart.to_string()),
                ("gmres_max_iter".into(), self.solver.max_iter.to_string()),
            ],
        )
    }

    fn sim_config(&self, ra: f64) -> SimConfig {
        SimConfig {
            pr: self.pr,
            ra,
            dt0: self.dt0,
            eps_ratio: self.eps_ratio,
            c_dagger: self.c_dagger,
            t_star: f64::INFINITY,
            ensemble_size: 2,
            mesh_n: self.n,
            gmres: self.solver.gmres(),
            pressure_tol: self.solver.pressure_tol,
            steady_tol: self.steady_tol,
            seed: self.seed,
            dt_floor: 1e-10,
            max_steps: self.max_steps,
        }
    }
}

/// Outcome of one Rayleigh-number stage.
#[derive(Clone, Debug)]
pub struct CavityStageResult {
    pub ra: f64,
    pub max_u1_mid: f64,
    pub max_u2_mid: f64,
    pub nu_avg_hot: f64,
    pub nu_avg_cold: f64,
    pub steps: usize,
    pub halvings: usize,
    pub final_time: f64,
    pub final_dt: f64,
    pub steady: bool,
    /// Mean-field state at the end of the stage.
    pub mean: MemberState,
    /// Per-step norm history (time, |u|, |T|, |p|) of member 0.
    pub norm_history: Vec<(f64, f64, f64, f64)>,
    /// dt per step.
    pub dt_history: Vec<f64>,
}

/// Constant-1 bootstrap state with boundary conditions applied.
pub fn bootstrap_state(fe: &FeSystem, stepper: &Stepper) -> MemberState {
    let mut m = MemberState::zeros(fe);
    for (i, v) in m.u.iter_mut().enumerate() {
        if !fe.vel_is_dirichlet[i] {
            *v = 1.0;
        }
    }
    for v in m.t.iter_mut() {
        *v = 1.0;
    }
    for (&node, &val) in fe.temp_dirichlet.iter().zip(&fe.temp_dirichlet_values) {
        m.t[node] = val;
    }
    for v in m.p.iter_mut() {
        *v = 1.0;
    }
    stepper.recenter_pressure(&mut m.p);
    m
}

fn mean_member(state: &EnsembleState) -> MemberState {
    MemberState {
        u: state.ensemble_mean(Field::Velocity),
        t: state.ensemble_mean(Field::Temperature),
        p: state.ensemble_mean(Field::Pressure),
    }
}

/// Run one Ra stage: breed the perturbation pair from `base`, build the J=2
/// ensemble, and integrate to the stopping condition.
pub fn run_stage(
    fe: &FeSystem,
    ops: &crate::fem::SparseOperatorSet,
    cfg: &CavityConfig,
    ra: f64,
    base: &MemberState,
    stage_seed: u64,
    step_rows: &mut Vec<Vec<String>>,
) -> Result<CavityStageResult, DriverError> {
    let sim = cfg.sim_config(ra);
    let mut stepper = Stepper::new(fe, ops, sim);
    let problem = ProblemSpec::cavity();

    let pair = perturb::random_pair(stage_seed);
    let bv_plus = perturb::breed_solver(
        &mut stepper,
        &problem,
        base,
        &pair.deltas,
        cfg.k_star,
        cfg.reinit_dt,
        cfg.dt0,
    )?;
    let bv_minus = perturb::breed_solver(
        &mut stepper,
        &problem,
        base,
        &pair.negated(),
        cfg.k_star,
        cfg.reinit_dt,
        cfg.dt0,
    )?;
    let mut state =
        perturb::build_initial_conditions(&stepper, &problem, base, &bv_plus, &bv_minus, cfg.dt0);

    let mut steps = 0;
    let mut halvings = 0;
    let mut steady = false;
    let mut norm_history = Vec::new();
    let mut dt_history = Vec::new();
    while steps < cfg.max_steps {
        let (next, log) = stepper.advance_adaptive(&state, &problem)?;
        steps += 1;
        halvings += log.halvings;
        let m0 = &next.members[0];
        norm_history.push((
            next.time,
            crate::fem::eval::l2_norm_velocity(fe, &m0.u),
            crate::fem::eval::l2_norm_scalar(fe, &m0.t),
            crate::fem::eval::l2_norm_p1(fe, &m0.p),
        ));
        dt_history.push(next.dt);
        step_rows.push(vec![
            fmt_f(ra),
            steps.to_string(),
            fmt_f(log.time),
            fmt_f(log.dt),
            fmt_f(log.cfl_value),
            log.velocity_iterations.to_string(),
            log.temperature_iterations.to_string(),
            log.pressure_iterations.to_string(),
            log.halvings.to_string(),
        ]);
        let done = stepper.steady_state_check(&state, &next, cfg.steady_tol);
        state = next;
        if done {
            steady = true;
            break;
        }
    }

    let mean = mean_member(&state);
    Ok(CavityStageResult {
        ra,
        max_u1_mid: diag::slice_max(fe, &mean.u, Midline::HorizontalAtXHalf),
        max_u2_mid: diag::slice_max(fe, &mean.u, Midline::VerticalAtYHalf),
        nu_avg_hot: diag::nusselt_avg(fe, &mean.t, Wall::Hot)?,
        nu_avg_cold: diag::nusselt_avg(fe, &mean.t, Wall::Cold)?,
        steps,
        halvings,
        final_time: state.time,
        final_dt: state.dt,
        steady,
        mean,
        norm_history,
        dt_history,
    })
}

/// Full continuation protocol over the configured Ra list, emitting the
/// summary table, Nusselt profiles, the per-step log, and VTK snapshots.
pub fn run(cfg: &CavityConfig, out_dir: &Path) -> Result<Vec<CavityStageResult>, DriverError> {
    let mesh = build_structured_mesh(cfg.n, Labeling::Cavity)?;
    let fe = build_fe_system(mesh, ProblemKind::Cavity);
    let ops = assemble_static_operators(&fe);
    let manifest = cfg.manifest();

    let sim0 = cfg.sim_config(cfg.ra_list[0]);
    let stepper0 = Stepper::new(&fe, &ops, sim0);
    let mut base = bootstrap_state(&fe, &stepper0);

    let mut results = Vec::new();
    let mut step_rows = Vec::new();
    for (stage, &ra) in cfg.ra_list.iter().enumerate() {
        let stage_seed = cfg.seed.wrapping_add(stage as u64);
        let result = run_stage(&fe, &ops, cfg, ra, &base, stage_seed, &mut step_rows)?;
        if !result.steady {
            eprintln!(
                "cavity Ra={ra:.0e}: steady state not reached in {} steps (partial outputs)",
                result.steps
            );
        }

        let profile_hot = diag::nusselt_local(&fe, &result.mean.t, Wall::Hot)?;
        let profile_cold = diag::nusselt_local(&fe, &result.mean.t, Wall::Cold)?;
        for (wall, profile) in [("hot", profile_hot), ("cold", profile_cold)] {
            let rows: Vec<Vec<String>> = profile
                .iter()
                .map(|&(y, nu)| vec![fmt_f(y), fmt_f(nu)])
                .collect();
            write_csv(
                &out_dir.join(format!("nusselt_{wall}_ra{}.csv", format_ra(ra))),
                &manifest,
                &["y", "nu_local"],
                &rows,
            )?;
        }
        if cfg.write_vtk {
            crate::vtk::write_vtk(
                &out_dir.join(format!("cavity_ra{}_mean.vtk", format_ra(ra))),
                &format!("cavity mean fields, Ra={ra}"),
                &fe,
                &result.mean,
            )
            .map_err(|source| DriverError::Io {
                path: out_dir.to_path_buf(),
                source,
            })?;
        }

        base = result.mean.clone();
        results.push(result);
    }

    let summary_rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                fmt_f(r.ra),
                fmt_f(r.max_u1_mid),
                fmt_f(r.max_u2_mid),
                fmt_f(r.nu_avg_hot),
                fmt_f(r.nu_avg_cold),
                r.steps.to_string(),
                r.halvings.to_string(),
                fmt_f(r.final_time),
                fmt_f(r.final_dt),
                if r.steady { "yes" } else { "NO" }.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join("cavity_summary.csv"),
        &manifest,
        &[
            "ra",
            "max_u1_x_half",
            "max_u2_y_half",
            "nu_avg_hot",
            "nu_avg_cold",
            "steps",
            "halvings",
            "final_time",
            "final_dt",
            "steady",
        ],
        &summary_rows,
    )?;
    write_csv(
        &out_dir.join("cavity_steps.csv"),
        &manifest,
        &[
            "ra",
            "step",
            "time",
            "dt",
            "cfl_value",
            "velocity_iters",
            "temperature_iters",
            "pressure_iters",
            "halvings",
        ],
        &step_rows,
    )?;

    Ok(results)
}

pub(crate) fn format_ra(ra: f64) -> String {
    if ra >= 1.0 && ra.log10().fract().abs() < 1e-12 {
        format!("1e{}", ra.log10().round() as i64)
    } else {
        format!("{ra}")
    }
}
