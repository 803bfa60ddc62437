//! Manufactured solution for the convergence and predictability studies.
//!
//! The velocity derives from the stream function psi = (A/2) x^2(x-1)^2
//! y^2(y-1)^2, so it is divergence-free by construction and vanishes on the
//! boundary together with all its factors. Temperature is the sum of the two
//! velocity components and pressure is A (2x-1)(2y-1), which has zero mean.
//!
//! Forcings are hand-derived closed-form polynomials (times A or A'); a
//! finite-difference oracle in the tests cross-checks every derivative.

/// Time amplitude A(t).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmplitudeLaw {
    /// A(t) = 10 cos t (convergence study).
    Cosine,
    /// A(t) = 10 (1 + 0.1 t) cos t (predictability study).
    RampedCosine,
}

/// The exact solution family; `scale` rescales all fields, realizing the
/// perturbed members (1 + delta) chi.
#[derive(Clone, Copy, Debug)]
pub struct ExactSolution {
    pub amplitude: AmplitudeLaw,
    pub scale: f64,
}

// Factor polynomials and derivatives:
//   q(s) = s^2 (s-1)^2,      q'  = 2 s (s-1)(2s-1) = 2 r(s),
//   q'' = 2 (6 s^2 - 6 s + 1) = 2 r'(s),
//   r(s) = s (s-1)(2s-1),    r'  = 6 s^2 - 6 s + 1,   r'' = 12 s - 6.
#[inline]
fn q(s: f64) -> f64 {
    let w = s * (s - 1.0);
    w * w
}
#[inline]
fn qd(s: f64) -> f64 {
    2.0 * s * (s - 1.0) * (2.0 * s - 1.0)
}
#[inline]
fn qdd(s: f64) -> f64 {
    2.0 * (6.0 * s * s - 6.0 * s + 1.0)
}
#[inline]
fn r(s: f64) -> f64 {
    s * (s - 1.0) * (2.0 * s - 1.0)
}
#[inline]
fn rd(s: f64) -> f64 {
    6.0 * s * s - 6.0 * s + 1.0
}
#[inline]
fn rdd(s: f64) -> f64 {
    12.0 * s - 6.0
}

impl ExactSolution {
    pub fn new(amplitude: AmplitudeLaw) -> Self {
        ExactSolution {
            amplitude,
            scale: 1.0,
        }
    }

    /// The positive/negative perturbed pair (1 + delta) chi, (1 - delta) chi.
    pub fn perturbed_family(amplitude: AmplitudeLaw, delta: f64) -> [ExactSolution; 2] {
        assert!(delta.abs() < 1.0, "perturbation must keep the scale positive");
        [
            ExactSolution {
                amplitude,
                scale: 1.0 + delta,
            },
            ExactSolution {
                amplitude,
                scale: 1.0 - delta,
            },
        ]
    }

    fn a(&self, t: f64) -> f64 {
        match self.amplitude {
            AmplitudeLaw::Cosine => 10.0 * t.cos(),
            AmplitudeLaw::RampedCosine => 10.0 * (1.0 + 0.1 * t) * t.cos(),
        }
    }

    fn a_dt(&self, t: f64) -> f64 {
        match self.amplitude {
            AmplitudeLaw::Cosine => -10.0 * t.sin(),
            AmplitudeLaw::RampedCosine => 10.0 * (0.1 * t.cos() - (1.0 + 0.1 * t) * t.sin()),
        }
    }

    pub fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let a = self.scale * self.a(t);
        [a * q(x) * r(y), -a * r(x) * q(y)]
    }

    pub fn velocity_dt(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let ad = self.scale * self.a_dt(t);
        [ad * q(x) * r(y), -ad * r(x) * q(y)]
    }

    /// grad u as [component][direction].
    pub fn velocity_grad(&self, x: f64, y: f64, t: f64) -> [[f64; 2]; 2] {
        let a = self.scale * self.a(t);
        [
            [a * qd(x) * r(y), a * q(x) * rd(y)],
            [-a * rd(x) * q(y), -a * r(x) * qd(y)],
        ]
    }

    pub fn velocity_laplacian(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let a = self.scale * self.a(t);
        [
            a * (qdd(x) * r(y) + q(x) * rdd(y)),
            -a * (rdd(x) * q(y) + r(x) * qdd(y)),
        ]
    }

    pub fn divergence(&self, x: f64, y: f64, t: f64) -> f64 {
        let g = self.velocity_grad(x, y, t);
        g[0][0] + g[1][1]
    }

    pub fn temperature(&self, x: f64, y: f64, t: f64) -> f64 {
        let u = self.velocity(x, y, t);
        u[0] + u[1]
    }

    pub fn temperature_dt(&self, x: f64, y: f64, t: f64) -> f64 {
        let u = self.velocity_dt(x, y, t);
        u[0] + u[1]
    }

    pub fn temperature_grad(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let g = self.velocity_grad(x, y, t);
        [g[0][0] + g[1][0], g[0][1] + g[1][1]]
    }

    pub fn temperature_laplacian(&self, x: f64, y: f64, t: f64) -> f64 {
        let l = self.velocity_laplacian(x, y, t);
        l[0] + l[1]
    }

    pub fn pressure(&self, x: f64, y: f64, t: f64) -> f64 {
        self.scale * self.a(t) * (2.0 * x - 1.0) * (2.0 * y - 1.0)
    }

    pub fn pressure_grad(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let a = self.scale * self.a(t);
        [2.0 * a * (2.0 * y - 1.0), 2.0 * a * (2.0 * x - 1.0)]
    }

    /// Pointwise (u, T, p).
    pub fn eval(&self, x: f64, y: f64, t: f64) -> ([f64; 2], f64, f64) {
        (
            self.velocity(x, y, t),
            self.temperature(x, y, t),
            self.pressure(x, y, t),
        )
    }

    /// Momentum forcing f = u_t + u.grad u - Pr lap u + grad p - Pr Ra xi T.
    ///
    /// For a member scaled by s every linear term scales by s while the
    /// advection term scales by s^2; both powers are applied here so the
    /// scaled fields solve their own equations exactly.
    pub fn forcing_velocity(&self, pr: f64, ra: f64, x: f64, y: f64, t: f64) -> [f64; 2] {
        let s = self.scale;
        let a = self.a(t);
        let ad = self.a_dt(t);
        let (qx, rx, qy, ry) = (q(x), r(x), q(y), r(y));
        let u1 = a * qx * ry;
        let u2 = -a * rx * qy;
        let lin1 = ad * qx * ry - pr * a * (qdd(x) * ry + qx * rdd(y))
            + 2.0 * a * (2.0 * y - 1.0);
        let lin2 = -ad * rx * qy + pr * a * (rdd(x) * qy + rx * qdd(y))
            + 2.0 * a * (2.0 * x - 1.0)
            - pr * ra * a * (qx * ry - rx * qy);
        let adv1 = u1 * (a * qd(x) * ry) + u2 * (a * qx * rd(y));
        let adv2 = u1 * (-a * rd(x) * qy) + u2 * (-a * rx * qd(y));
        [s * lin1 + s * s * adv1, s * lin2 + s * s * adv2]
    }

    /// Heat forcing g = T_t + u.grad T - lap T, with the same scale powers.
    pub fn forcing_temperature(&self, x: f64, y: f64, t: f64) -> f64 {
        let s = self.scale;
        let a = self.a(t);
        let ad = self.a_dt(t);
        let (qx, rx, qy, ry) = (q(x), r(x), q(y), r(y));
        let u1 = a * qx * ry;
        let u2 = -a * rx * qy;
        let t_lin = ad * (qx * ry - rx * qy)
            - a * (qdd(x) * ry + qx * rdd(y) - rdd(x) * qy - rx * qdd(y));
        let tx = a * (qd(x) * ry - rd(x) * qy);
        let ty = a * (qx * rd(y) - rx * qd(y));
        let adv = u1 * tx + u2 * ty;
        s * t_lin + s * s * adv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn laws() -> [AmplitudeLaw; 2] {
        [AmplitudeLaw::Cosine, AmplitudeLaw::RampedCosine]
    }

    #[test]
    fn center_point_vanishes() {
        let sol = ExactSolution::new(AmplitudeLaw::Cosine);
        for t in [0.0, 0.37, 1.2] {
            let (u, _t, p) = sol.eval(0.5, 0.5, t);
            assert_eq!(u, [0.0, 0.0]);
            assert_eq!(p, 0.0);
        }
    }

    #[test]
    fn temperature_vanishes_on_diagonal() {
        let sol = ExactSolution::new(AmplitudeLaw::RampedCosine);
        for s in [0.1, 0.33, 0.8] {
            assert!(sol.temperature(s, s, 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn quarter_point_value() {
        // Direct polynomial evaluation:
        // u1(1/4,1/4,0) = 10 * (0.0625*0.5625) * (0.25*(-0.75)*(-0.5)).
        let sol = ExactSolution::new(AmplitudeLaw::Cosine);
        let u = sol.velocity(0.25, 0.25, 0.0);
        assert!((u[0] - 0.032958984375).abs() < 1e-15, "u1 = {}", u[0]);
    }

    #[test]
    fn divergence_free_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for law in laws() {
            let sol = ExactSolution::new(law);
            for _ in 0..1000 {
                let x: f64 = rng.gen();
                let y: f64 = rng.gen();
                let t: f64 = rng.gen();
                assert!(sol.divergence(x, y, t).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        // Central differences, step 1e-6; second derivatives difference the
        // closed-form gradients so truncation stays near 1e-9.
        let h = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for law in laws() {
            let sol = ExactSolution::new(law);
            for _ in 0..50 {
                let x: f64 = rng.gen_range(0.1..0.9);
                let y: f64 = rng.gen_range(0.1..0.9);
                let t: f64 = rng.gen_range(0.0..1.0);

                let ut = sol.velocity_dt(x, y, t);
                let up = sol.velocity(x, y, t + h);
                let um = sol.velocity(x, y, t - h);
                for c in 0..2 {
                    assert!((ut[c] - (up[c] - um[c]) / (2.0 * h)).abs() < 1e-6);
                }

                let g = sol.velocity_grad(x, y, t);
                let uxp = sol.velocity(x + h, y, t);
                let uxm = sol.velocity(x - h, y, t);
                let uyp = sol.velocity(x, y + h, t);
                let uym = sol.velocity(x, y - h, t);
                for c in 0..2 {
                    assert!((g[c][0] - (uxp[c] - uxm[c]) / (2.0 * h)).abs() < 1e-6);
                    assert!((g[c][1] - (uyp[c] - uym[c]) / (2.0 * h)).abs() < 1e-6);
                }

                let lap = sol.velocity_laplacian(x, y, t);
                let gxp = sol.velocity_grad(x + h, y, t);
                let gxm = sol.velocity_grad(x - h, y, t);
                let gyp = sol.velocity_grad(x, y + h, t);
                let gym = sol.velocity_grad(x, y - h, t);
                for c in 0..2 {
                    let fd = (gxp[c][0] - gxm[c][0]) / (2.0 * h) + (gyp[c][1] - gym[c][1]) / (2.0 * h);
                    assert!((lap[c] - fd).abs() < 1e-6);
                }

                let pg = sol.pressure_grad(x, y, t);
                let pfd = [
                    (sol.pressure(x + h, y, t) - sol.pressure(x - h, y, t)) / (2.0 * h),
                    (sol.pressure(x, y + h, t) - sol.pressure(x, y - h, t)) / (2.0 * h),
                ];
                assert!((pg[0] - pfd[0]).abs() < 1e-6 && (pg[1] - pfd[1]).abs() < 1e-6);

                let tg = sol.temperature_grad(x, y, t);
                let tfd = [
                    (sol.temperature(x + h, y, t) - sol.temperature(x - h, y, t)) / (2.0 * h),
                    (sol.temperature(x, y + h, t) - sol.temperature(x, y - h, t)) / (2.0 * h),
                ];
                assert!((tg[0] - tfd[0]).abs() < 1e-6 && (tg[1] - tfd[1]).abs() < 1e-6);
            }
        }
    }

    /// Residual of the momentum and heat equations with each term rebuilt from
    /// the derivative evaluators, independently of the forcing expressions.
    fn residuals(sol: &ExactSolution, pr: f64, ra: f64, x: f64, y: f64, t: f64) -> ([f64; 2], f64) {
        let u = sol.velocity(x, y, t);
        let ut = sol.velocity_dt(x, y, t);
        let g = sol.velocity_grad(x, y, t);
        let lap = sol.velocity_laplacian(x, y, t);
        let pg = sol.pressure_grad(x, y, t);
        let temp = sol.temperature(x, y, t);
        let f = sol.forcing_velocity(pr, ra, x, y, t);
        let mom = [
            ut[0] + (u[0] * g[0][0] + u[1] * g[0][1]) - pr * lap[0] + pg[0] - f[0],
            ut[1] + (u[0] * g[1][0] + u[1] * g[1][1]) - pr * lap[1] + pg[1] - pr * ra * temp
                - f[1],
        ];
        let tt = sol.temperature_dt(x, y, t);
        let tg = sol.temperature_grad(x, y, t);
        let tlap = sol.temperature_laplacian(x, y, t);
        let gq = sol.forcing_temperature(x, y, t);
        let heat = tt + (u[0] * tg[0] + u[1] * tg[1]) - tlap - gq;
        (mom, heat)
    }

    #[test]
    fn manufactured_forcing_residual_below_1e12() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for law in laws() {
            for scale in [1.0, 1.0 + 1e-3, 1.0 - 1e-3] {
                let sol = ExactSolution {
                    amplitude: law,
                    scale,
                };
                for _ in 0..1000 {
                    let x: f64 = rng.gen();
                    let y: f64 = rng.gen();
                    let t: f64 = rng.gen();
                    let (mom, heat) = residuals(&sol, 1.0, 100.0, x, y, t);
                    assert!(mom[0].abs() <= 1e-12 && mom[1].abs() <= 1e-12, "{mom:?}");
                    assert!(heat.abs() <= 1e-12, "{heat}");
                }
            }
        }
    }

    #[test]
    fn perturbed_family_properties() {
        let delta = 1e-3;
        let [plus, minus] = ExactSolution::perturbed_family(AmplitudeLaw::Cosine, delta);
        let base = ExactSolution::new(AmplitudeLaw::Cosine);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let x: f64 = rng.gen();
            let y: f64 = rng.gen();
            let t: f64 = rng.gen();
            let up = plus.velocity(x, y, t);
            let um = minus.velocity(x, y, t);
            let u = base.velocity(x, y, t);
            for c in 0..2 {
                let mean = 0.5 * (up[c] + um[c]);
                assert!((mean - u[c]).abs() <= 1e-15 * u[c].abs().max(1.0));
                assert!((up[c] - um[c] - 2.0 * delta * u[c]).abs() <= 1e-14 * u[c].abs().max(1.0));
            }
        }
        // delta = 0 collapses both members onto the base solution.
        let [z0, z1] = ExactSolution::perturbed_family(AmplitudeLaw::Cosine, 0.0);
        assert_eq!(z0.velocity(0.3, 0.7, 0.2), base.velocity(0.3, 0.7, 0.2));
        assert_eq!(z1.pressure(0.3, 0.7, 0.2), base.pressure(0.3, 0.7, 0.2));
    }

    #[test]
    fn interpolated_velocity_discrete_divergence_shrinks() {
        use crate::fem::{assemble_static_operators, build_fe_system, eval, ProblemKind};
        use crate::mesh::{build_structured_mesh, Labeling};
        let sol = ExactSolution::new(AmplitudeLaw::Cosine);
        let mut prev = f64::INFINITY;
        for n in [4usize, 8, 16] {
            let fe = build_fe_system(
                build_structured_mesh(n, Labeling::AllDirichlet).unwrap(),
                ProblemKind::Mms,
            );
            let ops = assemble_static_operators(&fe);
            let ui = eval::interpolate_velocity(&fe, &|x, y| sol.velocity(x, y, 0.0));
            let bu = ops.b_div.mul_vec_alloc(&ui);
            let norm = crate::linsolve::dot(&bu, &bu).sqrt();
            assert!(norm < prev / 3.0, "n={n}: {norm} vs {prev}");
            prev = norm;
        }
    }

    #[test]
    fn load_rule_refinement_consistency() {
        // Degree-8 vs degree-10 rule on the manufactured momentum forcing at
        // t = 0. The forcing is polynomial of degree 13, so neither rule is
        // exact; the gap is pure quadrature truncation and shrinks like h^9.
        use crate::fem::quad::triangle_degree10;
        use crate::fem::{assemble_load_with_table, build_fe_system, BasisTable, ProblemKind};
        use crate::mesh::{build_structured_mesh, Labeling};
        let sol = ExactSolution::new(AmplitudeLaw::Cosine);
        let fe = build_fe_system(
            build_structured_mesh(16, Labeling::AllDirichlet).unwrap(),
            ProblemKind::Mms,
        );
        let f = |x: f64, y: f64| sol.forcing_velocity(1.0, 100.0, x, y, 0.0);
        let l8 = crate::fem::assemble_load(&fe, &f);
        let table10 = BasisTable::new(triangle_degree10());
        let l10 = assemble_load_with_table(&fe, &table10, &f);
        let diff: f64 = l8
            .iter()
            .zip(&l10)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 1e-10, "load rule gap {diff}");
    }
}
