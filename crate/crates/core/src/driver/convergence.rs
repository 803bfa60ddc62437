//! Manufactured-solution convergence study: J=2 with the (1 +/- delta)
//! perturbed family, dt = 1/(10m), errors of the ensemble mean against the
//! unperturbed solution in the max-in-time L2 norm.

use std::path::Path;

use super::{fmt_f, write_csv, DriverError, RawConfig, RunManifest, Scale, SolverSettings};
use crate::ace::{EnsembleState, Field, MemberState, ProblemSpec, SimConfig, Stepper};
use crate::diag::convergence_rates;
use crate::fem::{assemble_static_operators, build_fe_system, eval, ProblemKind};
use crate::mesh::{build_structured_mesh, Labeling};
use crate::mms::{AmplitudeLaw, ExactSolution};

#[derive(Clone, Debug)]
pub struct ConvergenceConfig {
    pub m_list: Vec<usize>,
    pub pr: f64,
    pub ra: f64,
    pub t_star: f64,
    pub eps_ratio: f64,
    pub delta: f64,
    pub seed: u64,
    pub solver: SolverSettings,
}

impl ConvergenceConfig {
    pub fn from_config(raw: &RawConfig, scale: Scale, seed: Option<u64>) -> Result<Self, DriverError> {
        let solver = SolverSettings::from_config(raw)?;
        let mut s = raw.section("convergence");
        let mut cfg = ConvergenceConfig {
            m_list: s.usize_list("m_list", &[8, 16, 24, 32, 40])?,
            pr: s.f64("pr", 1.0)?,
            ra: s.f64("ra", 100.0)?,
            t_star: s.f64("t_star", 1.0)?,
            eps_ratio: s.f64("eps_ratio", 1.0)?,
            delta: s.f64("delta", 1e-3)?,
            seed: s.u64("seed", 0)?,
            solver,
        };
        s.finish()?;
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        if scale == Scale::Desk {
            cfg.m_list.retain(|&m| m <= 24);
        }
        if cfg.m_list.is_empty() {
            return Err(DriverError::Config("convergence m_list is empty".into()));
        }
        Ok(cfg)
    }

    fn manifest(&self) -> RunManifest {
        RunManifest::new(
            "convergence",
            vec![
                ("m_list".into(), format!("{:?}", self.m_list)),
                ("pr".into(), fmt_f(self.pr)),
                ("ra".into(), fmt_f(self.ra)),
                ("t_star".into(), fmt_f(self.t_star)),
                ("eps_ratio".into(), fmt_f(self.eps_ratio)),
                ("delta".into(), fmt_f(self.delta)),
                ("seed".into(), self.seed.to_string()),
                ("gmres_tol".into(), fmt_f(self.solver.tol)),
            ],
        )
    }
}

#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub m: usize,
    pub dt: f64,
    pub err_u: f64,
    pub err_t: f64,
    pub err_p: f64,
    pub rate_u: Option<f64>,
    pub rate_t: Option<f64>,
    pub rate_p: Option<f64>,
}

/// Run one resolution: structured mesh with m cells per side, dt = 1/(10 m),
/// fixed-dt ACE over [0, t_star]. Returns max-in-time mean-field L2 errors.
pub fn run_resolution(
    cfg: &ConvergenceConfig,
    m: usize,
) -> Result<(f64, f64, f64), DriverError> {
    let dt = 1.0 / (10.0 * m as f64);
    let mesh = build_structured_mesh(m, Labeling::AllDirichlet)?;
    let fe = build_fe_system(mesh, ProblemKind::Mms);
    let ops = assemble_static_operators(&fe);
    let sols = ExactSolution::perturbed_family(AmplitudeLaw::Cosine, cfg.delta);
    let unperturbed = ExactSolution::new(AmplitudeLaw::Cosine);
    let problem = ProblemSpec::mms(&sols, cfg.pr, cfg.ra);

    let sim = SimConfig {
        pr: cfg.pr,
        ra: cfg.ra,
        dt0: dt,
        eps_ratio: cfg.eps_ratio,
        c_dagger: 0.35,
        t_star: cfg.t_star,
        ensemble_size: 2,
        mesh_n: m,
        gmres: cfg.solver.gmres(),
        pressure_tol: cfg.solver.pressure_tol,
        steady_tol: 0.0,
        seed: cfg.seed,
        dt_floor: 1e-10,
        max_steps: usize::MAX,
    };
    let mut stepper = Stepper::new(&fe, &ops, sim);

    let members: Vec<MemberState> = sols
        .iter()
        .map(|sol| {
            let mut p = eval::interpolate_p1(&fe, &|x, y| sol.pressure(x, y, 0.0));
            stepper.recenter_pressure(&mut p);
            MemberState {
                u: eval::interpolate_velocity(&fe, &|x, y| sol.velocity(x, y, 0.0)),
                t: eval::interpolate_scalar(&fe, &|x, y| sol.temperature(x, y, 0.0)),
                p,
            }
        })
        .collect();
    let mut state = EnsembleState {
        members,
        time: 0.0,
        dt,
    };

    let n_steps = (cfg.t_star / dt).round() as usize;
    let mut err_u = 0.0f64;
    let mut err_t = 0.0f64;
    let mut err_p = 0.0f64;
    for _ in 0..n_steps {
        let (next, _) = stepper.ace_step(&state, &problem)?;
        state = next;
        let t = state.time;
        let mean_u = state.ensemble_mean(Field::Velocity);
        let mean_t = state.ensemble_mean(Field::Temperature);
        let mean_p = state.ensemble_mean(Field::Pressure);
        err_u = err_u.max(eval::l2_error_velocity(&fe, &mean_u, &|x, y| {
            unperturbed.velocity(x, y, t)
        }));
        err_t = err_t.max(eval::l2_error_scalar(&fe, &mean_t, &|x, y| {
            unperturbed.temperature(x, y, t)
        }));
        err_p = err_p.max(eval::l2_error_p1(&fe, &mean_p, &|x, y| {
            unperturbed.pressure(x, y, t)
        }));
    }
    Ok((err_u, err_t, err_p))
}

pub fn run(cfg: &ConvergenceConfig, out_dir: &Path) -> Result<Vec<ConvergenceRow>, DriverError> {
    let manifest = cfg.manifest();
    let mut dts = Vec::new();
    let mut errs_u = Vec::new();
    let mut errs_t = Vec::new();
    let mut errs_p = Vec::new();
    for &m in &cfg.m_list {
        let (eu, et, ep) = run_resolution(cfg, m)?;
        dts.push(1.0 / (10.0 * m as f64));
        errs_u.push(eu);
        errs_t.push(et);
        errs_p.push(ep);
    }
    let rates_u = convergence_rates(&dts, &errs_u);
    let rates_t = convergence_rates(&dts, &errs_t);
    let rates_p = convergence_rates(&dts, &errs_p);

    let fmt_rate = |r: &Option<f64>| r.map_or("-".to_string(), |v| format!("{v:.2}"));
    let rows: Vec<Vec<String>> = cfg
        .m_list
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            vec![
                m.to_string(),
                fmt_f(dts[i]),
                fmt_f(errs_u[i]),
                fmt_rate(&rates_u[i]),
                fmt_f(errs_t[i]),
                fmt_rate(&rates_t[i]),
                fmt_f(errs_p[i]),
                fmt_rate(&rates_p[i]),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join("convergence.csv"),
        &manifest,
        &[
            "m", "dt", "err_u", "rate_u", "err_t", "rate_t", "err_p", "rate_p",
        ],
        &rows,
    )?;

    Ok(cfg
        .m_list
        .iter()
        .enumerate()
        .map(|(i, &m)| ConvergenceRow {
            m,
            dt: dts[i],
            err_u: errs_u[i],
            err_t: errs_t[i],
            err_p: errs_p[i],
            rate_u: rates_u[i],
            rate_t: rates_t[i],
            rate_p: rates_p[i],
        })
        .collect())
}
