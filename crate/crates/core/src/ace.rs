//! Timesteppers: the artificial-compressibility ensemble (ACE) step with its
//! shared coefficient matrices, the fluctuation-CFL timestep controller, the
//! coupled linearly implicit BDF1 comparator, and steady-state detection.
//!
//! One ACE step solves, for every ensemble member j:
//!   velocity:    [(1/dt) M_u + N(<u>) + Pr K_u + (dt/eps) GD] u^{n+1} = rhs_j
//!   temperature: [(1/dt) M_T + N*(<u>) + K_T] T^{n+1} = rhs_j
//!   pressure:    M_p (p^{n+1} - p^n) = -(dt/eps) B u^{n+1}
//! The coefficient matrices depend only on the ensemble mean, so they (and the
//! ILU factorization) are built once per step and shared across all members.

use rayon::prelude::*;
use thiserror::Error;

use crate::fem::{
    apply_scalar_to_velocity, assemble_buoyancy, assemble_convection_scalar, assemble_load,
    assemble_load_scalar, eval, expand_scalar_to_vector, DirichletApplier, FeSystem,
    SparseOperatorSet,
};
use crate::linsolve::{
    cg_solve, gmres_solve, multi_rhs_solve, CholeskyEnvelope, GmresParams, Ilu0, SolverError,
    SparseMatrix,
};

/// All physical and numerical parameters of a run.
#[derive(Clone, Copy, Debug)]
pub struct SimConfig {
    pub pr: f64,
    pub ra: f64,
    /// Initial timestep; the controller only ever halves it.
    pub dt0: f64,
    /// eps = eps_ratio * dt, so dt/eps = 1/eps_ratio is the grad-div factor.
    pub eps_ratio: f64,
    /// Stability constant of the fluctuation CFL condition.
    pub c_dagger: f64,
    pub t_star: f64,
    pub ensemble_size: usize,
    pub mesh_n: usize,
    pub gmres: GmresParams,
    /// CG tolerance for the pressure mass solve.
    pub pressure_tol: f64,
    pub steady_tol: f64,
    pub seed: u64,
    pub dt_floor: f64,
    pub max_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            pr: 0.71,
            ra: 1e4,
            dt0: 1e-3,
            eps_ratio: 0.01,
            c_dagger: 0.35,
            t_star: f64::INFINITY,
            ensemble_size: 2,
            mesh_n: 64,
            gmres: GmresParams::default(),
            pressure_tol: 1e-10,
            steady_tol: 1e-5,
            seed: 0,
            dt_floor: 1e-10,
            max_steps: 200_000,
        }
    }
}

impl SimConfig {
    /// dt/eps under the eps = eps_ratio * dt convention.
    pub fn grad_div_coefficient(&self) -> f64 {
        1.0 / self.eps_ratio
    }

    pub fn epsilon(&self, dt: f64) -> f64 {
        self.eps_ratio * dt
    }
}

/// Coefficient vectors of one ensemble member at one time level.
#[derive(Clone, Debug)]
pub struct MemberState {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub t: Vec<f64>,
}

impl MemberState {
    pub fn zeros(fe: &FeSystem) -> Self {
        MemberState {
            u: vec![0.0; fe.n_vel_dofs],
            p: vec![0.0; fe.n_pressure_dofs],
            t: vec![0.0; fe.n_p2_nodes],
        }
    }
}

/// Which coefficient field an ensemble reduction acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Velocity,
    Temperature,
    Pressure,
}

/// The ensemble at one time level.
#[derive(Clone, Debug)]
pub struct EnsembleState {
    pub members: Vec<MemberState>,
    pub time: f64,
    pub dt: f64,
}

impl EnsembleState {
    pub fn ensemble_size(&self) -> usize {
        self.members.len()
    }

    fn field_of(m: &MemberState, field: Field) -> &[f64] {
        match field {
            Field::Velocity => &m.u,
            Field::Temperature => &m.t,
            Field::Pressure => &m.p,
        }
    }

    /// Arithmetic mean of the members' coefficient vectors.
    pub fn ensemble_mean(&self, field: Field) -> Vec<f64> {
        let j = self.members.len();
        assert!(j >= 1, "empty ensemble");
        let mut mean = Self::field_of(&self.members[0], field).to_vec();
        for m in &self.members[1..] {
            for (a, b) in mean.iter_mut().zip(Self::field_of(m, field)) {
                *a += b;
            }
        }
        let inv = 1.0 / j as f64;
        mean.iter_mut().for_each(|v| *v *= inv);
        mean
    }

    /// Member j minus the ensemble mean.
    pub fn fluctuation(&self, j: usize, field: Field) -> Vec<f64> {
        assert!(j < self.members.len(), "member index out of range");
        let mean = self.ensemble_mean(field);
        Self::field_of(&self.members[j], field)
            .iter()
            .zip(&mean)
            .map(|(a, b)| a - b)
            .collect()
    }
}

/// Per-member forcing and boundary data. Member index comes first so the
/// perturbed manufactured family can scale per member.
pub struct ProblemSpec<'a> {
    pub forcing_u: Box<dyn Fn(usize, f64, f64, f64) -> [f64; 2] + Sync + 'a>,
    pub forcing_t: Box<dyn Fn(usize, f64, f64, f64) -> f64 + Sync + 'a>,
    /// Temperature Dirichlet value at a wall node.
    pub temp_bc: Box<dyn Fn(usize, f64, f64, f64) -> f64 + Sync + 'a>,
    /// Skip load assembly entirely when the forcings vanish.
    pub zero_forcing: bool,
}

impl ProblemSpec<'static> {
    /// Cavity: no body forces, unit hot wall at x=0, zero cold wall at x=1.
    pub fn cavity() -> Self {
        ProblemSpec {
            forcing_u: Box::new(|_, _, _, _| [0.0, 0.0]),
            forcing_t: Box::new(|_, _, _, _| 0.0),
            temp_bc: Box::new(|_, x, _, _| if x <= 0.5 { 1.0 } else { 0.0 }),
            zero_forcing: true,
        }
    }

    /// Zero forcing with homogeneous temperature walls (decay tests).
    pub fn homogeneous() -> Self {
        ProblemSpec {
            forcing_u: Box::new(|_, _, _, _| [0.0, 0.0]),
            forcing_t: Box::new(|_, _, _, _| 0.0),
            temp_bc: Box::new(|_, _, _, _| 0.0),
            zero_forcing: true,
        }
    }
}

impl<'a> ProblemSpec<'a> {
    /// Manufactured problem; one exact solution per member (scales may differ).
    pub fn mms(solutions: &'a [crate::mms::ExactSolution], pr: f64, ra: f64) -> Self {
        ProblemSpec {
            forcing_u: Box::new(move |j, x, y, t| {
                solutions[j.min(solutions.len() - 1)].forcing_velocity(pr, ra, x, y, t)
            }),
            forcing_t: Box::new(move |j, x, y, t| {
                solutions[j.min(solutions.len() - 1)].forcing_temperature(x, y, t)
            }),
            temp_bc: Box::new(move |j, x, y, t| {
                solutions[j.min(solutions.len() - 1)].temperature(x, y, t)
            }),
            zero_forcing: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error("{stage} solve failed for member {member}: {iterations} iterations, residual {residual:.3e}")]
    Solver {
        stage: &'static str,
        member: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("timestep underflow: dt = {0:.3e} below the configured floor")]
    DtUnderflow(f64),
    #[error(transparent)]
    Linear(#[from] SolverError),
}

/// Per-step log record emitted as CSV by the drivers.
#[derive(Clone, Debug)]
pub struct StepLog {
    pub time: f64,
    pub dt: f64,
    pub cfl_value: f64,
    pub max_grad_fluctuation: f64,
    pub velocity_iterations: usize,
    pub temperature_iterations: usize,
    pub pressure_iterations: usize,
    pub halvings: usize,
}

/// Fluctuation CFL condition: C* dt/h * max_j ||grad u'_j||^2 <= 1.
/// Returns the pass flag and max_j ||grad u'_j||^2.
pub fn cfl_check(
    state: &EnsembleState,
    fe: &FeSystem,
    ops: &SparseOperatorSet,
    cfg: &SimConfig,
) -> (bool, f64) {
    let max_grad_sq = max_fluctuation_gradient_sq(state, ops);
    let value = cfg.c_dagger * state.dt / fe.mesh.h_max * max_grad_sq;
    (value <= 1.0, max_grad_sq)
}

fn max_fluctuation_gradient_sq(state: &EnsembleState, ops: &SparseOperatorSet) -> f64 {
    if state.members.len() <= 1 {
        return 0.0;
    }
    let mean = state.ensemble_mean(Field::Velocity);
    let mut max_g = 0.0f64;
    let mut buf = vec![0.0; mean.len()];
    for m in &state.members {
        for ((b, u), mu) in buf.iter_mut().zip(&m.u).zip(&mean) {
            *b = u - mu;
        }
        max_g = max_g.max(ops.k_u.quadratic_form(&buf));
    }
    max_g
}

/// ACE and BDF1 stepping engine: owns the Dirichlet elimination plans and the
/// cached base values of the shared matrices.
pub struct Stepper<'a> {
    pub fe: &'a FeSystem,
    pub ops: &'a SparseOperatorSet,
    pub cfg: SimConfig,
    vel_applier: DirichletApplier,
    temp_applier: DirichletApplier,
    /// (1/dt) M_u + Pr K_u + (dt/eps) GD values, valid for `base_dt`.
    base_vel: Vec<f64>,
    /// (1/dt) M_T + K_T values, valid for `base_dt`.
    base_temp: Vec<f64>,
    base_dt: f64,
    /// Exact factorizations of the constant SPD parts (Dirichlet-eliminated),
    /// shared as preconditioners by every step and member at this dt.
    vel_chol: Option<CholeskyEnvelope>,
    temp_chol: Option<CholeskyEnvelope>,
    /// M_p row sums = (phi_i, 1); their total is |Omega|.
    mp_ones: Vec<f64>,
    mp_total: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(fe: &'a FeSystem, ops: &'a SparseOperatorSet, cfg: SimConfig) -> Self {
        let vel_applier = DirichletApplier::new(&ops.vector_pattern, &fe.vel_dirichlet);
        let temp_applier = DirichletApplier::new(&ops.scalar_pattern, &fe.temp_dirichlet);
        let ones = vec![1.0; fe.n_pressure_dofs];
        let mp_ones = ops.m_p.mul_vec_alloc(&ones);
        let mp_total: f64 = mp_ones.iter().sum();
        let mut s = Stepper {
            fe,
            ops,
            cfg,
            vel_applier,
            temp_applier,
            base_vel: Vec::new(),
            base_temp: Vec::new(),
            base_dt: f64::NAN,
            vel_chol: None,
            temp_chol: None,
            mp_ones,
            mp_total,
        };
        s.rebuild_base(cfg.dt0);
        s
    }

    fn rebuild_base(&mut self, dt: f64) {
        let inv_dt = 1.0 / dt;
        let gamma = self.cfg.grad_div_coefficient();
        let pr = self.cfg.pr;
        self.base_vel = self
            .ops
            .m_u
            .values()
            .iter()
            .zip(self.ops.k_u.values())
            .zip(self.ops.grad_div.values())
            .map(|((m, k), gd)| inv_dt * m + pr * k + gamma * gd)
            .collect();
        self.base_temp = self
            .ops
            .m_t
            .values()
            .iter()
            .zip(self.ops.k_t.values())
            .map(|(m, k)| inv_dt * m + k)
            .collect();
        self.base_dt = dt;

        // Factor the constant SPD parts once per dt; the factors precondition
        // every velocity and temperature solve until the controller halves dt.
        let mut m0_vel = SparseMatrix::zeros(self.ops.vector_pattern.clone());
        m0_vel.values_mut().copy_from_slice(&self.base_vel);
        let _ = self.vel_applier.eliminate(&mut m0_vel);
        self.vel_chol = Some(
            CholeskyEnvelope::new(&m0_vel).expect("frozen velocity operator must be SPD"),
        );
        let mut m0_temp = SparseMatrix::zeros(self.ops.scalar_pattern.clone());
        m0_temp.values_mut().copy_from_slice(&self.base_temp);
        let _ = self.temp_applier.eliminate(&mut m0_temp);
        self.temp_chol = Some(
            CholeskyEnvelope::new(&m0_temp).expect("frozen temperature operator must be SPD"),
        );
    }

    fn ensure_base(&mut self, dt: f64) {
        if dt != self.base_dt {
            self.rebuild_base(dt);
        }
    }

    /// Shared velocity system matrix for a given ensemble-mean velocity,
    /// before Dirichlet elimination. Pure function of (mean, dt, config): the
    /// matrix is identical for every ensemble member.
    pub fn velocity_system_matrix(&mut self, mean_u: &[f64], dt: f64) -> SparseMatrix {
        self.ensure_base(dt);
        let n_scalar = assemble_convection_scalar(self.fe, &self.ops.scalar_pattern, mean_u);
        let mut a = expand_scalar_to_vector(self.ops, &n_scalar);
        for (v, b) in a.values_mut().iter_mut().zip(&self.base_vel) {
            *v += b;
        }
        a
    }

    /// Shared temperature system matrix, before Dirichlet elimination.
    pub fn temperature_system_matrix(&mut self, mean_u: &[f64], dt: f64) -> SparseMatrix {
        self.ensure_base(dt);
        let mut a = assemble_convection_scalar(self.fe, &self.ops.scalar_pattern, mean_u);
        for (v, b) in a.values_mut().iter_mut().zip(&self.base_temp) {
            *v += b;
        }
        a
    }

    /// Subtract the M_p-weighted mean so the pressure has zero mean.
    pub fn recenter_pressure(&self, p: &mut [f64]) {
        let mean: f64 = self.mp_ones.iter().zip(p.iter()).map(|(w, v)| w * v).sum();
        let shift = mean / self.mp_total;
        p.iter_mut().for_each(|v| *v -= shift);
    }

    /// Variational pressure update: solve M_p dp = -(dt/eps) B u_new, add to
    /// the old pressure, and re-center. A discretely divergence-free velocity
    /// leaves the pressure unchanged.
    pub fn pressure_update(&self, p_old: &[f64], u_new: &[f64]) -> Result<(Vec<f64>, usize), StepError> {
        let gamma = self.cfg.grad_div_coefficient();
        let mut rhs_p = self.ops.b_div.mul_vec_alloc(u_new);
        rhs_p.iter_mut().for_each(|v| *v *= -gamma);
        let (dp, rep) =
            cg_solve(&self.ops.m_p, &rhs_p, self.cfg.pressure_tol, 1000).map_err(StepError::Linear)?;
        let mut p_new: Vec<f64> = p_old.iter().zip(&dp).map(|(a, b)| a + b).collect();
        self.recenter_pressure(&mut p_new);
        Ok((p_new, rep.iterations))
    }

    /// Temperature Dirichlet values for member `j` at time `t`, in the order
    /// of `fe.temp_dirichlet`.
    fn temp_bc_values(&self, problem: &ProblemSpec, j: usize, t: f64) -> Vec<f64> {
        self.fe
            .temp_dirichlet
            .iter()
            .map(|&node| {
                let [x, y] = self.fe.p2_coords[node];
                (problem.temp_bc)(j, x, y, t)
            })
            .collect()
    }

    /// One ACE step at the state's current dt. The CFL check is the caller's
    /// responsibility (see [`Stepper::advance_adaptive`]).
    pub fn ace_step(
        &mut self,
        state: &EnsembleState,
        problem: &ProblemSpec,
    ) -> Result<(EnsembleState, StepLog), StepError> {
        let dt = state.dt;
        let inv_dt = 1.0 / dt;
        let t_next = state.time + dt;
        let nj = state.members.len();
        let fe = self.fe;
        let ops = self.ops;

        let mean_u = state.ensemble_mean(Field::Velocity);

        // Shared matrices: assembled once, eliminated once, factored once.
        let mut a_u = self.velocity_system_matrix(&mean_u, dt);
        let mut a_t = self.temperature_system_matrix(&mean_u, dt);
        let coupling_u = self.vel_applier.eliminate(&mut a_u);
        let coupling_t = self.temp_applier.eliminate(&mut a_t);
        let precond_u = self.vel_chol.as_ref().expect("preconditioner built");
        let precond_t = self.temp_chol.as_ref().expect("preconditioner built");

        let zero_vel_bc = vec![0.0; self.vel_applier.constrained.len()];

        // Per-member right-hand sides; member work is independent.
        let member_rhs: Vec<(Vec<f64>, Vec<f64>)> = state
            .members
            .par_iter()
            .enumerate()
            .map(|(j, m)| {
                let mut u_prime = vec![0.0; fe.n_vel_dofs];
                let mut has_fluct = false;
                for (i, (u, mu)) in m.u.iter().zip(&mean_u).enumerate() {
                    let d = u - mu;
                    u_prime[i] = d;
                    has_fluct |= d != 0.0;
                }

                // Velocity rhs: (1/dt) M_u u - N'(u') u + B^T p + Pr Ra (xi T, v) + (f, v).
                let mut rhs_u = ops.m_u.mul_vec_alloc(&m.u);
                rhs_u.iter_mut().for_each(|v| *v *= inv_dt);
                let bt_p = ops.b_div.mul_transpose_vec_alloc(&m.p);
                for (r, b) in rhs_u.iter_mut().zip(&bt_p) {
                    *r += b;
                }
                let buoy = assemble_buoyancy(fe, &ops.m_t, &m.t);
                let prra = self.cfg.pr * self.cfg.ra;
                for (r, b) in rhs_u.iter_mut().zip(&buoy) {
                    *r += prra * b;
                }

                // Temperature rhs: (1/dt) M_T T - N*'(u') T + (g, S).
                let mut rhs_t = ops.m_t.mul_vec_alloc(&m.t);
                rhs_t.iter_mut().for_each(|v| *v *= inv_dt);

                if has_fluct {
                    let n_prime = assemble_convection_scalar(fe, &ops.scalar_pattern, &u_prime);
                    let mut nu = vec![0.0; fe.n_vel_dofs];
                    apply_scalar_to_velocity(&n_prime, &m.u, &mut nu);
                    for (r, v) in rhs_u.iter_mut().zip(&nu) {
                        *r -= v;
                    }
                    let nt = n_prime.mul_vec_alloc(&m.t);
                    for (r, v) in rhs_t.iter_mut().zip(&nt) {
                        *r -= v;
                    }
                }

                if !problem.zero_forcing {
                    let load_u = assemble_load(fe, &|x, y| (problem.forcing_u)(j, x, y, t_next));
                    for (r, v) in rhs_u.iter_mut().zip(&load_u) {
                        *r += v;
                    }
                    let load_t =
                        assemble_load_scalar(fe, &|x, y| (problem.forcing_t)(j, x, y, t_next));
                    for (r, v) in rhs_t.iter_mut().zip(&load_t) {
                        *r += v;
                    }
                }

                coupling_u.apply(&self.vel_applier, &mut rhs_u, &zero_vel_bc);
                let g_t = self.temp_bc_values(problem, j, t_next);
                coupling_t.apply(&self.temp_applier, &mut rhs_t, &g_t);
                (rhs_u, rhs_t)
            })
            .collect();

        let rhs_u: Vec<Vec<f64>> = member_rhs.iter().map(|(u, _)| u.clone()).collect();
        let rhs_t: Vec<Vec<f64>> = member_rhs.iter().map(|(_, t)| t.clone()).collect();

        let sol_u = multi_rhs_solve(&a_u, &rhs_u, precond_u, self.cfg.gmres);
        let mut vel_iters = 0;
        for (j, (_, rep)) in sol_u.iter().enumerate() {
            if !rep.converged {
                return Err(StepError::Solver {
                    stage: "velocity",
                    member: j,
                    iterations: rep.iterations,
                    residual: rep.relative_residual,
                });
            }
            vel_iters = vel_iters.max(rep.iterations);
        }

        let sol_t = multi_rhs_solve(&a_t, &rhs_t, precond_t, self.cfg.gmres);
        let mut temp_iters = 0;
        for (j, (_, rep)) in sol_t.iter().enumerate() {
            if !rep.converged {
                return Err(StepError::Solver {
                    stage: "temperature",
                    member: j,
                    iterations: rep.iterations,
                    residual: rep.relative_residual,
                });
            }
            temp_iters = temp_iters.max(rep.iterations);
        }

        // Pressure update: M_p (p^{n+1} - p^n) = -(dt/eps) B u^{n+1}.
        let press: Vec<Result<(Vec<f64>, usize), StepError>> = (0..nj)
            .into_par_iter()
            .map(|j| self.pressure_update(&state.members[j].p, &sol_u[j].0))
            .collect();

        let mut members = Vec::with_capacity(nj);
        let mut press_iters = 0;
        for (j, pres) in press.into_iter().enumerate() {
            let (p_new, iters) = pres?;
            press_iters = press_iters.max(iters);
            members.push(MemberState {
                u: sol_u[j].0.clone(),
                p: p_new,
                t: sol_t[j].0.clone(),
            });
        }

        let (_, max_grad) = cfl_check(state, fe, ops, &self.cfg);
        let log = StepLog {
            time: t_next,
            dt,
            cfl_value: self.cfg.c_dagger * dt / fe.mesh.h_max * max_grad,
            max_grad_fluctuation: max_grad,
            velocity_iterations: vel_iters,
            temperature_iterations: temp_iters,
            pressure_iterations: press_iters,
            halvings: 0,
        };

        Ok((
            EnsembleState {
                members,
                time: t_next,
                dt,
            },
            log,
        ))
    }

    /// Check condition (the fluctuation CFL) on the incoming state, halving dt
    /// until it passes, then take one ACE step. dt never increases.
    pub fn advance_adaptive(
        &mut self,
        state: &EnsembleState,
        problem: &ProblemSpec,
    ) -> Result<(EnsembleState, StepLog), StepError> {
        let max_grad = max_fluctuation_gradient_sq(state, self.ops);
        let factor = self.cfg.c_dagger / self.fe.mesh.h_max * max_grad;
        let mut dt = state.dt;
        let mut halvings = 0;
        while factor * dt > 1.0 {
            dt *= 0.5;
            halvings += 1;
            if dt < self.cfg.dt_floor {
                return Err(StepError::DtUnderflow(dt));
            }
        }
        let mut pre = state.clone();
        pre.dt = dt;
        let (next, mut log) = self.ace_step(&pre, problem)?;
        log.halvings = halvings;
        Ok((next, log))
    }

    /// Relative L2 increments between consecutive states; true when both the
    /// velocity and temperature increments of every member fall below `tol`.
    pub fn steady_state_check(&self, prev: &EnsembleState, next: &EnsembleState, tol: f64) -> bool {
        let fe = self.fe;
        for (a, b) in prev.members.iter().zip(&next.members) {
            let du: Vec<f64> = b.u.iter().zip(&a.u).map(|(x, y)| x - y).collect();
            let dt_: Vec<f64> = b.t.iter().zip(&a.t).map(|(x, y)| x - y).collect();
            let un = eval::l2_norm_velocity(fe, &b.u);
            let tn = eval::l2_norm_scalar(fe, &b.t);
            if un == 0.0 || tn == 0.0 {
                eprintln!("steady_state_check: zero field norm, declaring not steady");
                return false;
            }
            if eval::l2_norm_velocity(fe, &du) / un > tol
                || eval::l2_norm_scalar(fe, &dt_) / tn > tol
            {
                return false;
            }
        }
        true
    }
}

/// Coupled linearly implicit BDF1 comparator. Each member solves the full
/// velocity-pressure saddle system with convection linearized at its own u^n,
/// then an implicit temperature step convected by u^{n+1}.
pub struct Bdf1Stepper<'a> {
    pub fe: &'a FeSystem,
    pub ops: &'a SparseOperatorSet,
    pub cfg: SimConfig,
    pattern: std::sync::Arc<crate::linsolve::Pattern>,
    applier: DirichletApplier,
    temp_applier: DirichletApplier,
    /// Where each velocity-block value slot of the coupled matrix comes from.
    vel_slot_of: Vec<usize>,
    /// Static off-diagonal blocks: -B^T in the velocity rows, +B in the
    /// pressure rows.
    static_values: Vec<f64>,
    /// Slots of the pressure-pressure mass entries (preconditioner shift).
    pp_slots: Vec<usize>,
    pp_mass: Vec<f64>,
    mp_ones: Vec<f64>,
    mp_total: f64,
}

impl<'a> Bdf1Stepper<'a> {
    pub fn new(fe: &'a FeSystem, ops: &'a SparseOperatorSet, cfg: SimConfig) -> Self {
        use crate::linsolve::Pattern;
        let n_u = fe.n_vel_dofs;
        let n_p = fe.n_pressure_dofs;
        let n = n_u + n_p;

        // Coupled pattern: velocity block, +-B blocks, and the pressure mass
        // pattern as explicit (zero-valued) storage so ILU(0) has pivots.
        let vp = &ops.vector_pattern;
        let bp = ops.b_div.pattern();
        let pp = ops.m_p.pattern();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n_u {
            rows[i].extend_from_slice(vp.row_cols(i));
        }
        for i in 0..n_p {
            rows[n_u + i].extend(bp.row_cols(i).iter().copied());
            rows[n_u + i].extend(pp.row_cols(i).iter().map(|&j| n_u + j));
        }
        for i in 0..n_p {
            for &j in bp.row_cols(i) {
                rows[j].push(n_u + i);
            }
        }
        let pattern = std::sync::Arc::new(Pattern::from_rows(n, rows));

        // Precompute value slots.
        let mut vel_slot_of = vec![0usize; vp.nnz()];
        for i in 0..n_u {
            for k in vp.row_offsets[i]..vp.row_offsets[i + 1] {
                vel_slot_of[k] = pattern.find(i, vp.col_indices[k]).unwrap();
            }
        }
        let mut static_values = vec![0.0; pattern.nnz()];
        let bvals = ops.b_div.values();
        for i in 0..n_p {
            for k in bp.row_offsets[i]..bp.row_offsets[i + 1] {
                let j = bp.col_indices[k];
                static_values[pattern.find(n_u + i, j).unwrap()] += bvals[k];
                static_values[pattern.find(j, n_u + i).unwrap()] -= bvals[k];
            }
        }
        let mut pp_slots = Vec::with_capacity(pp.nnz());
        let mut pp_mass = Vec::with_capacity(pp.nnz());
        for i in 0..n_p {
            for k in pp.row_offsets[i]..pp.row_offsets[i + 1] {
                pp_slots.push(pattern.find(n_u + i, n_u + pp.col_indices[k]).unwrap());
                pp_mass.push(ops.m_p.values()[k]);
            }
        }

        // Constrain all velocity Dirichlet dofs plus one pinned pressure dof
        // standing in for the zero-mean condition; the mean is restored after
        // the solve.
        let mut constrained = fe.vel_dirichlet.clone();
        constrained.push(n_u);
        let applier = DirichletApplier::new(&pattern, &constrained);
        let temp_applier = DirichletApplier::new(&ops.scalar_pattern, &fe.temp_dirichlet);

        let ones = vec![1.0; n_p];
        let mp_ones = ops.m_p.mul_vec_alloc(&ones);
        let mp_total: f64 = mp_ones.iter().sum();

        Bdf1Stepper {
            fe,
            ops,
            cfg,
            pattern,
            applier,
            temp_applier,
            vel_slot_of,
            static_values,
            pp_slots,
            pp_mass,
            mp_ones,
            mp_total,
        }
    }

    /// One BDF1 step for the whole ensemble (members independent).
    pub fn step(
        &self,
        state: &EnsembleState,
        problem: &ProblemSpec,
    ) -> Result<(EnsembleState, StepLog), StepError> {
        let dt = state.dt;
        let inv_dt = 1.0 / dt;
        let t_next = state.time + dt;
        let fe = self.fe;
        let ops = self.ops;
        let n_u = fe.n_vel_dofs;
        let n = n_u + fe.n_pressure_dofs;

        let results: Vec<Result<(MemberState, usize, usize), StepError>> = state
            .members
            .par_iter()
            .enumerate()
            .map(|(j, m)| {
                // Coupled matrix with convection linearized at the member's
                // own full velocity (no mean/fluctuation split).
                let n_scalar = assemble_convection_scalar(fe, &ops.scalar_pattern, &m.u);
                let mut a = SparseMatrix::zeros(self.pattern.clone());
                {
                    let vals = a.values_mut();
                    vals.copy_from_slice(&self.static_values);
                    let vp = &ops.vector_pattern;
                    let mvals = ops.m_u.values();
                    let kvals = ops.k_u.values();
                    for k in 0..vp.nnz() {
                        vals[self.vel_slot_of[k]] += inv_dt * mvals[k] + self.cfg.pr * kvals[k];
                    }
                    let nvals = n_scalar.values();
                    for (s, slots) in ops.scalar_to_vector.iter().enumerate() {
                        vals[self.vel_slot_of[slots[0]]] += nvals[s];
                        vals[self.vel_slot_of[slots[1]]] += nvals[s];
                    }
                }

                let mut rhs = vec![0.0; n];
                let mu = ops.m_u.mul_vec_alloc(&m.u);
                for (r, v) in rhs[..n_u].iter_mut().zip(&mu) {
                    *r = inv_dt * v;
                }
                let buoy = assemble_buoyancy(fe, &ops.m_t, &m.t);
                let prra = self.cfg.pr * self.cfg.ra;
                for (r, v) in rhs[..n_u].iter_mut().zip(&buoy) {
                    *r += prra * v;
                }
                if !problem.zero_forcing {
                    let load_u = assemble_load(fe, &|x, y| (problem.forcing_u)(j, x, y, t_next));
                    for (r, v) in rhs[..n_u].iter_mut().zip(&load_u) {
                        *r += v;
                    }
                }

                let coupling = self.applier.eliminate(&mut a);
                let g = vec![0.0; self.applier.constrained.len()];
                coupling.apply(&self.applier, &mut rhs, &g);

                // Preconditioner on a pressure-mass-shifted copy: the shift
                // gives ILU(0) usable pivots without touching the equations.
                let mut a_pc = a.clone();
                {
                    let vals = a_pc.values_mut();
                    let shift = dt;
                    for (slot, mv) in self.pp_slots.iter().zip(&self.pp_mass) {
                        vals[*slot] -= shift * mv;
                    }
                }
                let ilu = Ilu0::with_pivot_floor(&a_pc, 1e-12).map_err(StepError::Linear)?;
                let x0 = vec![0.0; n];
                let (x, rep) = gmres_solve(&a, &rhs, &x0, self.cfg.gmres, &ilu);
                if !rep.converged {
                    return Err(StepError::Solver {
                        stage: "bdf1 coupled",
                        member: j,
                        iterations: rep.iterations,
                        residual: rep.relative_residual,
                    });
                }
                let u_new = x[..n_u].to_vec();
                let mut p_new = x[n_u..].to_vec();
                let mean: f64 = self.mp_ones.iter().zip(&p_new).map(|(w, v)| w * v).sum();
                let shift = mean / self.mp_total;
                p_new.iter_mut().for_each(|v| *v -= shift);

                // Implicit temperature step convected by u^{n+1}.
                let n_t = assemble_convection_scalar(fe, &ops.scalar_pattern, &u_new);
                let mut a_t = n_t;
                for ((v, mv), kv) in a_t
                    .values_mut()
                    .iter_mut()
                    .zip(ops.m_t.values())
                    .zip(ops.k_t.values())
                {
                    *v += inv_dt * mv + kv;
                }
                let mut rhs_t = ops.m_t.mul_vec_alloc(&m.t);
                rhs_t.iter_mut().for_each(|v| *v *= inv_dt);
                if !problem.zero_forcing {
                    let load_t =
                        assemble_load_scalar(fe, &|x, y| (problem.forcing_t)(j, x, y, t_next));
                    for (r, v) in rhs_t.iter_mut().zip(&load_t) {
                        *r += v;
                    }
                }
                let coupling_t = self.temp_applier.eliminate(&mut a_t);
                let g_t: Vec<f64> = fe
                    .temp_dirichlet
                    .iter()
                    .map(|&node| {
                        let [x, y] = fe.p2_coords[node];
                        (problem.temp_bc)(j, x, y, t_next)
                    })
                    .collect();
                coupling_t.apply(&self.temp_applier, &mut rhs_t, &g_t);
                let ilu_t = Ilu0::new(&a_t).map_err(StepError::Linear)?;
                let x0_t = vec![0.0; fe.n_p2_nodes];
                let (t_new, rep_t) = gmres_solve(&a_t, &rhs_t, &x0_t, self.cfg.gmres, &ilu_t);
                if !rep_t.converged {
                    return Err(StepError::Solver {
                        stage: "bdf1 temperature",
                        member: j,
                        iterations: rep_t.iterations,
                        residual: rep_t.relative_residual,
                    });
                }

                Ok((
                    MemberState {
                        u: u_new,
                        p: p_new,
                        t: t_new,
                    },
                    rep.iterations,
                    rep_t.iterations,
                ))
            })
            .collect();

        let mut members = Vec::with_capacity(state.members.len());
        let mut vel_iters = 0;
        let mut temp_iters = 0;
        for r in results {
            let (m, vi, ti) = r?;
            vel_iters = vel_iters.max(vi);
            temp_iters = temp_iters.max(ti);
            members.push(m);
        }

        Ok((
            EnsembleState {
                members,
                time: t_next,
                dt,
            },
            StepLog {
                time: t_next,
                dt,
                cfl_value: 0.0,
                max_grad_fluctuation: 0.0,
                velocity_iterations: vel_iters,
                temperature_iterations: temp_iters,
                pressure_iterations: 0,
                halvings: 0,
            },
        ))
    }
}
