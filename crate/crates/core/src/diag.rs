//! Quantities of interest: Nusselt numbers, midline velocity maxima, energy,
//! ensemble variance, relative energy fluctuation, effective Lyapunov
//! exponents, predictability horizons, and convergence rates.

use thiserror::Error;

use crate::fem::{eval, FeSystem};
use crate::mesh::BoundaryLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wall {
    Hot,
    Cold,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Midline {
    /// max over y of u1(0.5, y).
    HorizontalAtXHalf,
    /// max over x of u2(x, 0.5).
    VerticalAtYHalf,
}

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("wall not present in this mesh labeling")]
    WallMissing,
    #[error("zero denominator in relative fluctuation")]
    ZeroDenominator,
    #[error("nonpositive fluctuation value r = {0}")]
    NonpositiveR(f64),
    #[error("time series times must be strictly increasing")]
    BadTimes,
}

/// A sampled scalar time series.
#[derive(Clone, Debug, Default)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self, DiagError> {
        if times.len() != values.len() || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DiagError::BadTimes);
        }
        Ok(TimeSeries { times, values })
    }

    pub fn push(&mut self, t: f64, v: f64) {
        assert!(
            self.times.last().map_or(true, |&last| t > last),
            "times must increase"
        );
        self.times.push(t);
        self.values.push(v);
    }
}

fn wall_label(wall: Wall) -> BoundaryLabel {
    match wall {
        Wall::Hot => BoundaryLabel::HotWall,
        Wall::Cold => BoundaryLabel::ColdWall,
    }
}

/// Boundary edges on the requested wall with their owning triangles.
fn wall_edges(fe: &FeSystem, wall: Wall) -> Result<Vec<(usize, [usize; 2])>, DiagError> {
    use std::collections::HashMap;
    let label = wall_label(wall);
    let mut owner: HashMap<[usize; 2], usize> = HashMap::new();
    for (t, tri) in fe.mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let a = tri[(k + 1) % 3];
            let b = tri[(k + 2) % 3];
            let key = if a < b { [a, b] } else { [b, a] };
            owner.insert(key, t);
        }
    }
    let mut out = Vec::new();
    for be in &fe.mesh.boundary_edges {
        if be.label != label {
            continue;
        }
        let [a, b] = be.vertices;
        let key = if a < b { [a, b] } else { [b, a] };
        out.push((owner[&key], be.vertices));
    }
    if out.is_empty() {
        return Err(DiagError::WallMissing);
    }
    Ok(out)
}

fn bary_of_point(fe: &FeSystem, t: usize, x: f64, y: f64) -> [f64; 3] {
    let tri = fe.mesh.triangles[t];
    let p0 = fe.mesh.vertices[tri[0]];
    let p1 = fe.mesh.vertices[tri[1]];
    let p2 = fe.mesh.vertices[tri[2]];
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let l1 = ((x - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (y - p0[1])) / det;
    let l2 = ((p1[0] - p0[0]) * (y - p0[1]) - (x - p0[0]) * (p1[1] - p0[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Local Nusselt number profile along a vertical wall, sampled at three
/// points per boundary edge and sorted by y. The sign convention makes the
/// pure conduction profile T = 1 - x give +1 on both walls.
pub fn nusselt_local(
    fe: &FeSystem,
    t_coeffs: &[f64],
    wall: Wall,
) -> Result<Vec<(f64, f64)>, DiagError> {
    let edges = wall_edges(fe, wall)?;
    let mut samples = Vec::with_capacity(3 * edges.len());
    for (tri, [a, b]) in edges {
        let pa = fe.mesh.vertices[a];
        let pb = fe.mesh.vertices[b];
        for s in [0.0, 0.5, 1.0] {
            let x = pa[0] + s * (pb[0] - pa[0]);
            let y = pa[1] + s * (pb[1] - pa[1]);
            let l = bary_of_point(fe, tri, x, y);
            let g = eval::element_scalar_gradient(fe, t_coeffs, tri, l);
            samples.push((y, -g[0]));
        }
    }
    samples.sort_by(|p, q| p.0.total_cmp(&q.0));
    samples.dedup_by(|p, q| (p.0 - q.0).abs() < 1e-14 && (p.1 - q.1).abs() < 1e-9);
    Ok(samples)
}

/// Average Nusselt number: the line integral of the local value over the wall
/// by 3-point Gauss quadrature per boundary edge.
pub fn nusselt_avg(fe: &FeSystem, t_coeffs: &[f64], wall: Wall) -> Result<f64, DiagError> {
    let edges = wall_edges(fe, wall)?;
    let rule = crate::fem::quad::gauss_legendre_01(3);
    let mut acc = 0.0;
    for (tri, [a, b]) in edges {
        let pa = fe.mesh.vertices[a];
        let pb = fe.mesh.vertices[b];
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        for &(s, w) in &rule {
            let x = pa[0] + s * (pb[0] - pa[0]);
            let y = pa[1] + s * (pb[1] - pa[1]);
            let l = bary_of_point(fe, tri, x, y);
            let g = eval::element_scalar_gradient(fe, t_coeffs, tri, l);
            acc += w * len * -g[0];
        }
    }
    Ok(acc)
}

/// Maximum of the indicated velocity component along a midline, sampled at
/// every P2 node on the line plus 100 uniform interior points.
pub fn slice_max(fe: &FeSystem, u_coeffs: &[f64], which: Midline) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let (component, fixed_x) = match which {
        Midline::HorizontalAtXHalf => (0usize, true),
        Midline::VerticalAtYHalf => (1usize, false),
    };
    for (i, &[x, y]) in fe.p2_coords.iter().enumerate() {
        let on_line = if fixed_x {
            (x - 0.5).abs() < 1e-12
        } else {
            (y - 0.5).abs() < 1e-12
        };
        if on_line {
            best = best.max(u_coeffs[2 * i + component]);
        }
    }
    for k in 0..=100 {
        let s = k as f64 / 100.0;
        let (x, y) = if fixed_x { (0.5, s) } else { (s, 0.5) };
        let u = eval::eval_velocity(fe, u_coeffs, x, y);
        best = best.max(u[component]);
    }
    best
}

/// Energy functional ||T|| + 1/2 ||u||^2 (first term a norm, second a squared
/// norm).
pub fn energy(fe: &FeSystem, u: &[f64], t: &[f64]) -> f64 {
    let un = eval::l2_norm_velocity(fe, u);
    let tn = eval::l2_norm_scalar(fe, t);
    tn + 0.5 * un * un
}

/// Ensemble variance from per-member L2 norms: <||chi||^2> - ||<chi>||^2,
/// cross-checked against the fluctuation form <||chi'||^2>.
pub fn variance(norms_sq: &[f64], mean_norm_sq: f64, fluct_norms_sq: &[f64]) -> f64 {
    let j = norms_sq.len() as f64;
    let centered = norms_sq.iter().sum::<f64>() / j - mean_norm_sq;
    let fluct = fluct_norms_sq.iter().sum::<f64>() / j;
    let scale = norms_sq.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if (centered - fluct).abs() > 1e-10 * scale {
        eprintln!("variance identity violated: {centered} vs {fluct}");
    }
    fluct
}

/// Variance of a coefficient-vector ensemble with the given norm function.
pub fn variance_of<F>(members: &[&[f64]], norm: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let j = members.len();
    assert!(j >= 1);
    let dim = members[0].len();
    let mut mean = vec![0.0; dim];
    for m in members {
        for (a, b) in mean.iter_mut().zip(m.iter()) {
            *a += b;
        }
    }
    mean.iter_mut().for_each(|v| *v /= j as f64);
    let norms_sq: Vec<f64> = members
        .iter()
        .map(|m| {
            let n = norm(m);
            n * n
        })
        .collect();
    let mn = norm(&mean);
    let fluct_sq: Vec<f64> = members
        .iter()
        .map(|m| {
            let d: Vec<f64> = m.iter().zip(&mean).map(|(a, b)| a - b).collect();
            let n = norm(&d);
            n * n
        })
        .collect();
    variance(&norms_sq, mn * mn, &fluct_sq)
}

/// Relative energy fluctuation r = ||chi_+ - chi_-||^2 / (||chi_+|| ||chi_-||).
pub fn relative_fluctuation<F>(plus: &[f64], minus: &[f64], norm: F) -> Result<f64, DiagError>
where
    F: Fn(&[f64]) -> f64,
{
    let np = norm(plus);
    let nm = norm(minus);
    if np == 0.0 || nm == 0.0 {
        return Err(DiagError::ZeroDenominator);
    }
    let d: Vec<f64> = plus.iter().zip(minus).map(|(a, b)| a - b).collect();
    let nd = norm(&d);
    Ok(nd * nd / (np * nm))
}

/// Average effective Lyapunov exponent gamma_tau(t) = log(r(t+tau)/r(t))/(2 tau),
/// with r(t+tau) found by index lookup (tau a multiple of the sampling step).
pub fn effective_lyapunov(r: &TimeSeries, tau: f64) -> Result<TimeSeries, DiagError> {
    let n = r.times.len();
    if n < 2 {
        return Err(DiagError::BadTimes);
    }
    let dt = r.times[1] - r.times[0];
    let k = (tau / dt).round() as usize;
    if k == 0 || (tau - k as f64 * dt).abs() > 1e-9 * tau.max(dt) {
        return Err(DiagError::BadTimes);
    }
    let mut out = TimeSeries::default();
    for i in 0..n.saturating_sub(k) {
        let r0 = r.values[i];
        let r1 = r.values[i + k];
        if r0 <= 0.0 || r1 <= 0.0 {
            return Err(DiagError::NonpositiveR(r0.min(r1)));
        }
        out.push(r.times[i], (r1 / r0).ln() / (2.0 * tau));
    }
    Ok(out)
}

/// delta-predictability horizon t_p = log(delta / initial_sep) / gamma0.
/// A nonpositive exponent means the horizon is unbounded (None).
pub fn predictability_horizon(gamma0: f64, initial_sep: f64, delta: f64) -> Option<f64> {
    assert!(initial_sep > 0.0 && delta > 0.0);
    if gamma0 <= 0.0 {
        return None;
    }
    Some((delta / initial_sep).ln() / gamma0)
}

/// Convergence rates from successive (dt, error) pairs:
/// log2(e1/e2) / log2(dt1/dt2). None where a previous row or a zero error
/// leaves the rate undefined.
pub fn convergence_rates(dts: &[f64], errors: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(dts.len(), errors.len());
    let mut rates = vec![None; dts.len()];
    for i in 1..dts.len() {
        if errors[i - 1] > 0.0 && errors[i] > 0.0 {
            rates[i] = Some((errors[i - 1] / errors[i]).log2() / (dts[i - 1] / dts[i]).log2());
        }
    }
    rates
}
