//! Predictability experiment: the ramped-amplitude manufactured solution with
//! bred-vector initial perturbations, tracking energy, variance, relative
//! fluctuation r(t), effective Lyapunov exponents, and delta-predictability
//! horizons per field and Rayleigh number.

use std::path::Path;

use super::cavity::format_ra;
use super::{fmt_f, write_csv, DriverError, RawConfig, RunManifest, Scale, SolverSettings};
use crate::ace::{EnsembleState, Field, MemberState, ProblemSpec, SimConfig, Stepper};
use crate::diag::{self, TimeSeries};
use crate::fem::{assemble_static_operators, build_fe_system, eval, FeSystem, ProblemKind};
use crate::mesh::{build_structured_mesh, Labeling};
use crate::mms::{AmplitudeLaw, ExactSolution};
use crate::perturb;

#[derive(Clone, Debug)]
pub struct PredictabilityConfig {
    pub ra_list: Vec<f64>,
    pub m: usize,
    pub t_star: f64,
    pub dt0: f64,
    pub pr: f64,
    pub eps_ratio: f64,
    pub c_dagger: f64,
    pub k_star: usize,
    pub reinit_dt: f64,
    pub seed: u64,
    /// Base state the bred vectors perturb: "exact" (manufactured solution at
    /// t=0) or "ones" (the cavity-style constant-1 bootstrap).
    pub control_ic: String,
    pub solver: SolverSettings,
}

impl PredictabilityConfig {
    pub fn from_config(raw: &RawConfig, scale: Scale, seed: Option<u64>) -> Result<Self, DriverError> {
        let solver = SolverSettings::from_config(raw)?;
        let mut s = raw.section("predictability");
        let mut cfg = PredictabilityConfig {
            ra_list: s.f64_list("ra_list", &[1e2, 1e3, 1e4])?,
            m: s.usize("m", 32)?,
            t_star: s.f64("t_star", 0.1)?,
            dt0: s.f64("dt0", 1e-3)?,
            pr: s.f64("pr", 1.0)?,
            eps_ratio: s.f64("eps_ratio", 1.0)?,
            c_dagger: s.f64("c_dagger", 0.35)?,
            k_star: s.usize("k_star", 5)?,
            reinit_dt: s.f64("reinit_dt", 1e-3)?,
            seed: s.u64("seed", 0)?,
            control_ic: s
                .raw_string("control_ic", "exact")?,
            solver,
        };
        s.finish()?;
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        if scale == Scale::Desk {
            cfg.m = cfg.m.min(16);
        }
        Ok(cfg)
    }

    fn manifest(&self) -> RunManifest {
        RunManifest::new(
            "predictability",
            vec![
                ("ra_list".into(), format!("{:?}", self.ra_list)),
                ("m".into(), self.m.to_string()),
                ("t_star".into(), fmt_f(self.t_star)),
                ("dt0".into(), fmt_f(self.dt0)),
                ("pr".into(), fmt_f(self.pr)),
                ("eps_ratio".into(), fmt_f(self.eps_ratio)),
                ("c_dagger".into(), fmt_f(self.c_dagger)),
                ("k_star".into(), self.k_star.to_string()),
                ("reinit_dt".into(), fmt_f(self.reinit_dt)),
                ("seed".into(), self.seed.to_string()),
                ("control_ic".into(), self.control_ic.clone()),
            ],
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct HorizonRow {
    pub ra: f64,
    /// gamma_{t*}(0) per field (u, T, p).
    pub gamma0: [f64; 3],
    /// Predictability horizon per field; None when gamma0 <= 0.
    pub t_p: [Option<f64>; 3],
    pub initial_sep: [f64; 3],
}

struct FieldNorms<'a> {
    fe: &'a FeSystem,
}

impl FieldNorms<'_> {
    fn norm(&self, field: Field, v: &[f64]) -> f64 {
        match field {
            Field::Velocity => eval::l2_norm_velocity(self.fe, v),
            Field::Temperature => eval::l2_norm_scalar(self.fe, v),
            Field::Pressure => eval::l2_norm_p1(self.fe, v),
        }
    }

    fn member_field<'m>(&self, m: &'m MemberState, field: Field) -> &'m [f64] {
        match field {
            Field::Velocity => &m.u,
            Field::Temperature => &m.t,
            Field::Pressure => &m.p,
        }
    }

    fn r_of(&self, state: &EnsembleState, field: Field) -> Result<f64, DriverError> {
        let plus = self.member_field(&state.members[0], field);
        let minus = self.member_field(&state.members[1], field);
        Ok(diag::relative_fluctuation(plus, minus, |v| {
            self.norm(field, v)
        })?)
    }

    fn variance_of(&self, state: &EnsembleState, field: Field) -> f64 {
        let members: Vec<&[f64]> = state
            .members
            .iter()
            .map(|m| self.member_field(m, field))
            .collect();
        diag::variance_of(&members, |v| self.norm(field, v))
    }

    fn separation(&self, state: &EnsembleState, field: Field) -> f64 {
        let plus = self.member_field(&state.members[0], field);
        let minus = self.member_field(&state.members[1], field);
        let d: Vec<f64> = plus.iter().zip(minus).map(|(a, b)| a - b).collect();
        self.norm(field, &d)
    }
}

const FIELDS: [Field; 3] = [Field::Velocity, Field::Temperature, Field::Pressure];

pub fn run(cfg: &PredictabilityConfig, out_dir: &Path) -> Result<Vec<HorizonRow>, DriverError> {
    let manifest = cfg.manifest();
    let mesh = build_structured_mesh(cfg.m, Labeling::AllDirichlet)?;
    let fe = build_fe_system(mesh, ProblemKind::Mms);
    let ops = assemble_static_operators(&fe);
    let norms = FieldNorms { fe: &fe };
    let sol = ExactSolution::new(AmplitudeLaw::RampedCosine);
    let sols = [sol];

    let mut horizon_rows = Vec::new();
    let mut horizons = Vec::new();
    for (stage, &ra) in cfg.ra_list.iter().enumerate() {
        let problem = ProblemSpec::mms(&sols, cfg.pr, ra);
        let sim = SimConfig {
            pr: cfg.pr,
            ra,
            dt0: cfg.dt0,
            eps_ratio: cfg.eps_ratio,
            c_dagger: cfg.c_dagger,
            t_star: cfg.t_star,
            ensemble_size: 2,
            mesh_n: cfg.m,
            gmres: cfg.solver.gmres(),
            pressure_tol: cfg.solver.pressure_tol,
            steady_tol: 0.0,
            seed: cfg.seed,
            dt_floor: 1e-10,
            max_steps: usize::MAX,
        };
        let mut stepper = Stepper::new(&fe, &ops, sim);

        // Base state the bred vectors grow on and perturb.
        let mut control = match cfg.control_ic.as_str() {
            "exact" => MemberState {
                u: eval::interpolate_velocity(&fe, &|x, y| sol.velocity(x, y, 0.0)),
                t: eval::interpolate_scalar(&fe, &|x, y| sol.temperature(x, y, 0.0)),
                p: eval::interpolate_p1(&fe, &|x, y| sol.pressure(x, y, 0.0)),
            },
            "ones" => {
                let mut m = MemberState::zeros(&fe);
                for (i, v) in m.u.iter_mut().enumerate() {
                    if !fe.vel_is_dirichlet[i] {
                        *v = 1.0;
                    }
                }
                for v in m.t.iter_mut() {
                    *v = 1.0;
                }
                for &node in &fe.temp_dirichlet {
                    let [x, y] = fe.p2_coords[node];
                    m.t[node] = sol.temperature(x, y, 0.0);
                }
                for v in m.p.iter_mut() {
                    *v = 1.0;
                }
                m
            }
            other => {
                return Err(DriverError::Config(format!(
                    "control_ic must be exact or ones, got {other:?}"
                )))
            }
        };
        stepper.recenter_pressure(&mut control.p);

        let pair = perturb::random_pair(cfg.seed.wrapping_add(stage as u64));
        let bv_plus = perturb::breed_solver(
            &mut stepper,
            &problem,
            &control,
            &pair.deltas,
            cfg.k_star,
            cfg.reinit_dt,
            cfg.dt0,
        )?;
        let bv_minus = perturb::breed_solver(
            &mut stepper,
            &problem,
            &control,
            &pair.negated(),
            cfg.k_star,
            cfg.reinit_dt,
            cfg.dt0,
        )?;
        let mut state = perturb::build_initial_conditions(
            &stepper, &problem, &control, &bv_plus, &bv_minus, cfg.dt0,
        );

        let initial_sep = [
            norms.separation(&state, Field::Velocity),
            norms.separation(&state, Field::Temperature),
            norms.separation(&state, Field::Pressure),
        ];

        let mut times = vec![0.0];
        let mut r_series: [Vec<f64>; 3] = [
            vec![norms.r_of(&state, Field::Velocity)?],
            vec![norms.r_of(&state, Field::Temperature)?],
            vec![norms.r_of(&state, Field::Pressure)?],
        ];
        let mut series_rows: Vec<Vec<String>> = Vec::new();
        let record =
            |state: &EnsembleState, norms: &FieldNorms, rows: &mut Vec<Vec<String>>| -> Result<(), DriverError> {
                let mean_u = state.ensemble_mean(Field::Velocity);
                let mean_t = state.ensemble_mean(Field::Temperature);
                let t = state.time;
                let exact_energy = {
                    // Quadrature energy of the exact solution at this time.
                    let ui = eval::interpolate_velocity(&fe, &|x, y| sol.velocity(x, y, t));
                    let ti = eval::interpolate_scalar(&fe, &|x, y| sol.temperature(x, y, t));
                    diag::energy(&fe, &ui, &ti)
                };
                let mut row = vec![
                    fmt_f(t),
                    fmt_f(diag::energy(&fe, &state.members[0].u, &state.members[0].t)),
                    fmt_f(diag::energy(&fe, &state.members[1].u, &state.members[1].t)),
                    fmt_f(diag::energy(&fe, &mean_u, &mean_t)),
                    fmt_f(exact_energy),
                ];
                for field in FIELDS {
                    row.push(fmt_f(norms.variance_of(state, field)));
                }
                for field in FIELDS {
                    row.push(fmt_f(norms.r_of(state, field)?));
                }
                rows.push(row);
                Ok(())
            };
        record(&state, &norms, &mut series_rows)?;

        while state.time < cfg.t_star - 0.5 * state.dt {
            let (next, _) = stepper.advance_adaptive(&state, &problem)?;
            state = next;
            times.push(state.time);
            for (k, field) in FIELDS.iter().enumerate() {
                r_series[k].push(norms.r_of(&state, *field)?);
            }
            record(&state, &norms, &mut series_rows)?;
        }

        // gamma_{t*}(t) = log(r(t*)/r(t)) / (2 (t* - t)) appended per field.
        let t_final = *times.last().unwrap();
        for (i, row) in series_rows.iter_mut().enumerate() {
            for r in &r_series {
                let value = if i + 1 < times.len() {
                    let tau = t_final - times[i];
                    fmt_f((r[times.len() - 1] / r[i]).ln() / (2.0 * tau))
                } else {
                    "-".to_string()
                };
                row.push(value);
            }
        }
        write_csv(
            &out_dir.join(format!("predictability_series_ra{}.csv", format_ra(ra))),
            &manifest,
            &[
                "time",
                "energy_plus",
                "energy_minus",
                "energy_mean",
                "energy_exact",
                "var_u",
                "var_t",
                "var_p",
                "r_u",
                "r_t",
                "r_p",
                "gamma_tstar_u",
                "gamma_tstar_t",
                "gamma_tstar_p",
            ],
            &series_rows,
        )?;

        // gamma_{t*}(0) by the index-lookup operator with tau = t_final.
        let mut gamma0 = [0.0; 3];
        let mut t_p = [None; 3];
        for k in 0..3 {
            let series = TimeSeries::new(times.clone(), r_series[k].clone())?;
            let g = diag::effective_lyapunov(&series, t_final)?;
            gamma0[k] = g.values[0];
            let delta = std::f64::consts::E * initial_sep[k];
            t_p[k] = diag::predictability_horizon(gamma0[k], initial_sep[k], delta);
        }

        let paper = paper_reference(ra);
        for (k, name) in ["u", "T", "p"].iter().enumerate() {
            horizon_rows.push(vec![
                fmt_f(ra),
                name.to_string(),
                fmt_f(gamma0[k]),
                t_p[k].map_or("-".into(), fmt_f),
                fmt_f(initial_sep[k]),
                paper.map_or("-".into(), |v| fmt_f(v[k])),
            ]);
        }
        horizons.push(HorizonRow {
            ra,
            gamma0,
            t_p,
            initial_sep,
        });
    }

    write_csv(
        &out_dir.join("predictability_horizons.csv"),
        &manifest,
        &["ra", "field", "gamma0", "t_p", "initial_sep", "paper_t_p"],
        &horizon_rows,
    )?;
    Ok(horizons)
}

/// Reference horizons reported in the source benchmark for comparison columns.
fn paper_reference(ra: f64) -> Option<[f64; 3]> {
    if (ra - 1e2).abs() < 1e-9 {
        Some([0.0214, 0.0224, 0.0703])
    } else if (ra - 1e3).abs() < 1e-9 {
        Some([0.0152, 0.0223, 0.0242])
    } else if (ra - 1e4).abs() < 1e-9 {
        Some([0.0096, 0.0214, 0.0134])
    } else {
        None
    }
}
