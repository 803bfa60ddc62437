//! Wall-clock comparison of ACE against coupled linearly implicit BDF1 under
//! matched solver settings, J=1. Wall times go to timing.csv; the solution
//! checksums and iteration counts go to timing_check.csv, which is the
//! deterministic (bitwise reproducible) part of the output.

use std::path::Path;
use std::time::Instant;

use super::cavity::{bootstrap_state, format_ra};
use super::{fmt_f, write_csv, DriverError, RawConfig, RunManifest, Scale, SolverSettings};
use crate::ace::{Bdf1Stepper, EnsembleState, ProblemSpec, SimConfig, Stepper};
use crate::fem::{assemble_static_operators, build_fe_system, eval, ProblemKind};
use crate::mesh::{build_structured_mesh, Labeling};

#[derive(Clone, Debug)]
pub struct TimingConfig {
    pub ra_list: Vec<f64>,
    pub n: usize,
    pub steps: usize,
    pub pr: f64,
    pub eps_ratio: f64,
    pub c_dagger: f64,
    pub seed: u64,
    pub solver: SolverSettings,
}

impl TimingConfig {
    pub fn from_config(raw: &RawConfig, scale: Scale, seed: Option<u64>) -> Result<Self, DriverError> {
        let solver = SolverSettings::from_config(raw)?;
        let mut s = raw.section("timing");
        let mut cfg = TimingConfig {
            ra_list: s.f64_list("ra_list", &[1e3, 1e4, 1e5, 5e5, 1e6])?,
            n: s.usize("n", 64)?,
            steps: s.usize("steps", 50)?,
            pr: s.f64("pr", 0.71)?,
            eps_ratio: s.f64("eps_ratio", 0.01)?,
            c_dagger: s.f64("c_dagger", 0.35)?,
            seed: s.u64("seed", 0)?,
            solver,
        };
        s.finish()?;
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        if scale == Scale::Desk {
            cfg.ra_list.retain(|&ra| ra <= 1e5);
            cfg.n = cfg.n.min(32);
            cfg.steps = cfg.steps.min(25);
        }
        Ok(cfg)
    }

    /// Paper timestep rule: 1e-3 up to Ra = 1e5, 1e-4 above.
    pub fn dt_for(&self, ra: f64) -> f64 {
        if ra <= 1e5 {
            1e-3
        } else {
            1e-4
        }
    }

    fn manifest(&self) -> RunManifest {
        RunManifest::new(
            "timing",
            vec![
                ("ra_list".into(), format!("{:?}", self.ra_list)),
                ("n".into(), self.n.to_string()),
                ("steps".into(), self.steps.to_string()),
                ("pr".into(), fmt_f(self.pr)),
                ("eps_ratio".into(), fmt_f(self.eps_ratio)),
                ("c_dagger".into(), fmt_f(self.c_dagger)),
                ("seed".into(), self.seed.to_string()),
                ("gmres_tol".into(), fmt_f(self.solver.tol)),
                ("gmres_restart".into(), self.solver.restart.to_string()),
                ("gmres_max_iter".into(), self.solver.max_iter.to_string()),
            ],
        )
    }
}

#[derive(Clone, Debug)]
pub struct TimingResult {
    pub ra: f64,
    pub ace_total: f64,
    pub bdf1_total: f64,
    pub speedup: f64,
}

pub fn run(cfg: &TimingConfig, out_dir: &Path) -> Result<Vec<TimingResult>, DriverError> {
    let mesh = build_structured_mesh(cfg.n, Labeling::Cavity)?;
    let fe = build_fe_system(mesh, ProblemKind::Cavity);
    let ops = assemble_static_operators(&fe);
    let manifest = cfg.manifest();
    let problem = ProblemSpec::cavity();

    let mut results = Vec::new();
    let mut time_rows = Vec::new();
    let mut check_rows = Vec::new();

    for &ra in &cfg.ra_list {
        let dt = cfg.dt_for(ra);
        let sim = SimConfig {
            pr: cfg.pr,
            ra,
            dt0: dt,
            eps_ratio: cfg.eps_ratio,
            c_dagger: cfg.c_dagger,
            t_star: f64::INFINITY,
            ensemble_size: 1,
            mesh_n: cfg.n,
            gmres: cfg.solver.gmres(),
            pressure_tol: cfg.solver.pressure_tol,
            steady_tol: 1e-5,
            seed: cfg.seed,
            dt_floor: 1e-10,
            max_steps: cfg.steps,
        };

        // Identical initial state for both steppers.
        let mut ace = Stepper::new(&fe, &ops, sim);
        let base = bootstrap_state(&fe, &ace);
        let init = EnsembleState {
            members: vec![base.clone()],
            time: 0.0,
            dt,
        };

        let mut state = init.clone();
        let t0 = Instant::now();
        for step in 0..cfg.steps {
            let (next, log) = ace.ace_step(&state, &problem)?;
            state = next;
            check_rows.push(vec![
                fmt_f(ra),
                "ace".into(),
                step.to_string(),
                log.velocity_iterations.to_string(),
                log.temperature_iterations.to_string(),
                fmt_f(eval::l2_norm_velocity(&fe, &state.members[0].u)),
                fmt_f(eval::l2_norm_scalar(&fe, &state.members[0].t)),
            ]);
        }
        let ace_total = t0.elapsed().as_secs_f64();

        let bdf1 = Bdf1Stepper::new(&fe, &ops, sim);
        let mut state = init;
        let t1 = Instant::now();
        for step in 0..cfg.steps {
            let (next, log) = bdf1.step(&state, &problem)?;
            state = next;
            check_rows.push(vec![
                fmt_f(ra),
                "bdf1".into(),
                step.to_string(),
                log.velocity_iterations.to_string(),
                log.temperature_iterations.to_string(),
                fmt_f(eval::l2_norm_velocity(&fe, &state.members[0].u)),
                fmt_f(eval::l2_norm_scalar(&fe, &state.members[0].t)),
            ]);
        }
        let bdf1_total = t1.elapsed().as_secs_f64();

        let speedup = bdf1_total / ace_total;
        time_rows.push(vec![
            fmt_f(ra),
            format_ra(ra),
            fmt_f(dt),
            cfg.steps.to_string(),
            format!("{ace_total:.6}"),
            format!("{bdf1_total:.6}"),
            format!("{:.6}", ace_total / cfg.steps as f64),
            format!("{:.6}", bdf1_total / cfg.steps as f64),
            format!("{speedup:.3}"),
        ]);
        results.push(TimingResult {
            ra,
            ace_total,
            bdf1_total,
            speedup,
        });
    }

    write_csv(
        &out_dir.join("timing.csv"),
        &manifest,
        &[
            "ra",
            "ra_label",
            "dt",
            "steps",
            "ace_total_s",
            "bdf1_total_s",
            "ace_per_step_s",
            "bdf1_per_step_s",
            "speedup",
        ],
        &time_rows,
    )?;
    write_csv(
        &out_dir.join("timing_check.csv"),
        &manifest,
        &[
            "ra",
            "stepper",
            "step",
            "velocity_iters",
            "temperature_iters",
            "u_norm",
            "t_norm",
        ],
        &check_rows,
    )?;

    Ok(results)
}
