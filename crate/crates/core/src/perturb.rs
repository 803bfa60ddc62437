//! Ensemble initial conditions: the random perturbation pair and the
//! bred-vector algorithm.
//!
//! Breeding runs a control and a perturbed trajectory side by side; at every
//! reinitialization time the difference is rescaled to amplitude delta_i per
//! field and the perturbed trajectory restarts from control + bv. The signed
//! delta enters the initial seed only; rescaling preserves the grown
//! direction, so the +/- pair breeds (approximately) opposite vectors.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ace::{EnsembleState, MemberState, ProblemSpec, StepError, Stepper};
use crate::fem::{eval, FeSystem};

/// Perturbation amplitudes for (u1, u2, T, p); each in (0, 0.01).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationPair {
    pub deltas: [f64; 4],
}

impl PerturbationPair {
    pub fn negated(&self) -> [f64; 4] {
        [
            -self.deltas[0],
            -self.deltas[1],
            -self.deltas[2],
            -self.deltas[3],
        ]
    }
}

/// Four amplitudes drawn uniformly from (0, 0.01), deterministic in the seed.
pub fn random_pair(seed: u64) -> PerturbationPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deltas = [0.0; 4];
    for d in deltas.iter_mut() {
        // gen() samples [0, 1); reject exact zero to keep the interval open.
        let mut v: f64 = rng.gen();
        while v == 0.0 {
            v = rng.gen();
        }
        *d = 0.01 * v;
    }
    PerturbationPair { deltas }
}

#[derive(Debug, Error)]
pub enum BreedError {
    #[error("zero trajectory difference in field {field} at reinitialization {cycle}")]
    ZeroDifference { field: usize, cycle: usize },
    #[error(transparent)]
    Step(#[from] StepError),
}

/// State a bred vector can be grown on: a fixed set of fields with a norm and
/// the blend operation chi_p := chi + s (chi_p - chi) per field.
pub trait BreedState: Clone {
    fn num_fields(&self) -> usize;
    /// Add a constant to every free dof of one field (Step one).
    fn add_constant(&mut self, field: usize, value: f64);
    /// Norm of (self - base) restricted to one field.
    fn diff_norm(&self, base: &Self, field: usize) -> f64;
    /// self := base + scale * (self - base) on one field.
    fn rescale_diff(&mut self, base: &Self, field: usize, scale: f64);
}

/// Algorithm BV. Advances control and perturbed trajectories with `step`,
/// rescaling the difference to |delta_i| per field every `steps_per_cycle`
/// steps, for `k_star` cycles. Returns the final (control, perturbed) pair;
/// the bred vector is their per-field difference, of norm |delta_i|.
pub fn breed<S, F, E>(
    control0: &S,
    deltas: &[f64],
    k_star: usize,
    steps_per_cycle: usize,
    mut step: F,
) -> Result<(S, S), BreedError>
where
    S: BreedState,
    F: FnMut(&S) -> Result<S, E>,
    BreedError: From<E>,
{
    assert!(k_star >= 1, "at least one breeding cycle required");
    assert!(steps_per_cycle >= 1, "reinitialization interval below dt");
    assert_eq!(deltas.len(), control0.num_fields());

    let mut control = control0.clone();
    let mut perturbed = control0.clone();
    for (f, &d) in deltas.iter().enumerate() {
        perturbed.add_constant(f, d);
    }

    for cycle in 1..=k_star {
        for _ in 0..steps_per_cycle {
            control = step(&control)?;
            perturbed = step(&perturbed)?;
        }
        for (f, &d) in deltas.iter().enumerate() {
            let norm = perturbed.diff_norm(&control, f);
            if norm == 0.0 {
                return Err(BreedError::ZeroDifference { field: f, cycle });
            }
            perturbed.rescale_diff(&control, f, d / norm);
        }
    }
    Ok((control, perturbed))
}

/// Solver state exposed to the breeding algorithm: fields (u1, u2, T, p) with
/// mass-weighted L2 norms, constants added to free dofs only.
#[derive(Clone)]
pub struct SolverBreedState<'a> {
    pub fe: &'a FeSystem,
    pub member: MemberState,
    pub time: f64,
    pub dt: f64,
}

impl BreedState for SolverBreedState<'_> {
    fn num_fields(&self) -> usize {
        4
    }

    fn add_constant(&mut self, field: usize, value: f64) {
        match field {
            0 | 1 => {
                for i in 0..self.fe.n_p2_nodes {
                    let d = 2 * i + field;
                    if !self.fe.vel_is_dirichlet[d] {
                        self.member.u[d] += value;
                    }
                }
            }
            2 => {
                for i in 0..self.fe.n_p2_nodes {
                    if !self.fe.temp_is_dirichlet[i] {
                        self.member.t[i] += value;
                    }
                }
            }
            3 => {
                for v in self.member.p.iter_mut() {
                    *v += value;
                }
            }
            _ => panic!("field index out of range"),
        }
    }

    fn diff_norm(&self, base: &Self, field: usize) -> f64 {
        match field {
            0 | 1 => {
                let d: Vec<f64> = (0..self.fe.n_p2_nodes)
                    .map(|i| self.member.u[2 * i + field] - base.member.u[2 * i + field])
                    .collect();
                eval::l2_norm_scalar(self.fe, &d)
            }
            2 => {
                let d: Vec<f64> = self
                    .member
                    .t
                    .iter()
                    .zip(&base.member.t)
                    .map(|(a, b)| a - b)
                    .collect();
                eval::l2_norm_scalar(self.fe, &d)
            }
            3 => {
                let d: Vec<f64> = self
                    .member
                    .p
                    .iter()
                    .zip(&base.member.p)
                    .map(|(a, b)| a - b)
                    .collect();
                eval::l2_norm_p1(self.fe, &d)
            }
            _ => panic!("field index out of range"),
        }
    }

    fn rescale_diff(&mut self, base: &Self, field: usize, scale: f64) {
        match field {
            0 | 1 => {
                for i in 0..self.fe.n_p2_nodes {
                    let d = 2 * i + field;
                    self.member.u[d] =
                        base.member.u[d] + scale * (self.member.u[d] - base.member.u[d]);
                }
            }
            2 => {
                for (v, b) in self.member.t.iter_mut().zip(&base.member.t) {
                    *v = b + scale * (*v - b);
                }
            }
            3 => {
                for (v, b) in self.member.p.iter_mut().zip(&base.member.p) {
                    *v = b + scale * (*v - b);
                }
            }
            _ => panic!("field index out of range"),
        }
    }
}

/// Bred vector as per-field coefficient increments.
#[derive(Clone, Debug)]
pub struct BredVector {
    pub u: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
}

impl BredVector {
    fn from_pair(control: &SolverBreedState, perturbed: &SolverBreedState) -> Self {
        BredVector {
            u: perturbed
                .member
                .u
                .iter()
                .zip(&control.member.u)
                .map(|(a, b)| a - b)
                .collect(),
            t: perturbed
                .member
                .t
                .iter()
                .zip(&control.member.t)
                .map(|(a, b)| a - b)
                .collect(),
            p: perturbed
                .member
                .p
                .iter()
                .zip(&control.member.p)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Breed one vector on the solver dynamics (single-member ACE trajectories).
pub fn breed_solver(
    stepper: &mut Stepper,
    problem: &ProblemSpec,
    control_ic: &MemberState,
    deltas: &[f64; 4],
    k_star: usize,
    reinit_interval: f64,
    dt: f64,
) -> Result<BredVector, BreedError> {
    assert!(
        reinit_interval >= dt - 1e-15,
        "reinitialization interval must be at least dt"
    );
    let steps_per_cycle = (reinit_interval / dt).round() as usize;
    let fe = stepper.fe;
    let start = SolverBreedState {
        fe,
        member: control_ic.clone(),
        time: 0.0,
        dt,
    };
    let (control, perturbed) = breed(
        &start,
        deltas,
        k_star,
        steps_per_cycle.max(1),
        |s: &SolverBreedState| -> Result<SolverBreedState, StepError> {
            let state = EnsembleState {
                members: vec![s.member.clone()],
                time: s.time,
                dt: s.dt,
            };
            let (next, _) = stepper.ace_step(&state, problem)?;
            Ok(SolverBreedState {
                fe: s.fe,
                member: next.members.into_iter().next().unwrap(),
                time: next.time,
                dt: next.dt,
            })
        },
    )?;
    Ok(BredVector::from_pair(&control, &perturbed))
}

/// Assemble the J=2 ensemble from a base state and a +/- bred-vector pair:
/// members are base +/- bv per field, Dirichlet dofs are then overwritten with
/// the problem's boundary values at t=0, and pressures are re-centered.
pub fn build_initial_conditions(
    stepper: &Stepper,
    problem: &ProblemSpec,
    base: &MemberState,
    bv_plus: &BredVector,
    bv_minus: &BredVector,
    dt: f64,
) -> EnsembleState {
    let fe = stepper.fe;
    let mut members = Vec::with_capacity(2);
    for (j, bv) in [bv_plus, bv_minus].into_iter().enumerate() {
        let mut m = MemberState {
            u: base.u.iter().zip(&bv.u).map(|(a, b)| a + b).collect(),
            t: base.t.iter().zip(&bv.t).map(|(a, b)| a + b).collect(),
            p: base.p.iter().zip(&bv.p).map(|(a, b)| a + b).collect(),
        };
        for &d in &fe.vel_dirichlet {
            m.u[d] = 0.0;
        }
        for &node in &fe.temp_dirichlet {
            let [x, y] = fe.p2_coords[node];
            m.t[node] = (problem.temp_bc)(j, x, y, 0.0);
        }
        stepper.recenter_pressure(&mut m.p);
        members.push(m);
    }
    EnsembleState {
        members,
        time: 0.0,
        dt,
    }
}
