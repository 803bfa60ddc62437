//! Quadrature rules on the reference triangle and the unit interval.
//!
//! System matrices use the 7-point degree-5 rule (P2 x P1 x P2 integrands
//! have degree at most 5 on affine triangles); load vectors and error norms
//! use the 16-point degree-8 rule so quadrature error stays far below
//! discretization error. Weights are normalized to sum to one, so integrals
//! scale by the physical triangle area.

/// Quadrature point in barycentric coordinates plus weight.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

fn orbit1(w: f64) -> Vec<QuadPoint> {
    vec![QuadPoint {
        bary: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        weight: w,
    }]
}

/// Three-point orbit (a, a, 1-2a) in all distinct positions.
fn orbit3(a: f64, w: f64) -> Vec<QuadPoint> {
    let c = 1.0 - 2.0 * a;
    vec![
        QuadPoint { bary: [a, a, c], weight: w },
        QuadPoint { bary: [a, c, a], weight: w },
        QuadPoint { bary: [c, a, a], weight: w },
    ]
}

/// Six-point orbit over all permutations of (a, b, 1-a-b).
fn orbit6(a: f64, b: f64, w: f64) -> Vec<QuadPoint> {
    let c = 1.0 - a - b;
    vec![
        QuadPoint { bary: [a, b, c], weight: w },
        QuadPoint { bary: [a, c, b], weight: w },
        QuadPoint { bary: [b, a, c], weight: w },
        QuadPoint { bary: [b, c, a], weight: w },
        QuadPoint { bary: [c, a, b], weight: w },
        QuadPoint { bary: [c, b, a], weight: w },
    ]
}

/// 7-point Radon rule, exact for polynomials of total degree 5.
pub fn triangle_degree5() -> Vec<QuadPoint> {
    let s15 = 15.0f64.sqrt();
    let mut pts = orbit1(9.0 / 40.0);
    pts.extend(orbit3((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0));
    pts.extend(orbit3((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0));
    pts
}

/// 16-point Dunavant rule, exact for polynomials of total degree 8.
pub fn triangle_degree8() -> Vec<QuadPoint> {
    let mut pts = orbit1(0.14431560767764612);
    pts.extend(orbit3(0.4592925882926187, 0.09509163426738318));
    pts.extend(orbit3(0.1705693077516386, 0.10321737053472824));
    pts.extend(orbit3(0.050547228317032046, 0.0324584976232096));
    pts.extend(orbit6(
        0.2631128296349868,
        0.7284923929551993,
        0.027230314174398446,
    ));
    pts
}

/// 36-point collapsed-coordinate (Duffy) rule, exact to degree 10. Used only
/// as the quadrature-refinement oracle in tests.
pub fn triangle_degree10() -> Vec<QuadPoint> {
    let gauss = gauss_legendre_01(6);
    let mut pts = Vec::with_capacity(36);
    for &(xi, wx) in &gauss {
        for &(eta, wy) in &gauss {
            // Map the unit square onto the triangle: x = xi, y = eta*(1-xi);
            // the Jacobian (1-xi) folds into the weight. Weights then sum to
            // the triangle area in (x,y), i.e. 1/2, so rescale by 2 to match
            // the sum-to-one convention.
            let x = xi;
            let y = eta * (1.0 - xi);
            pts.push(QuadPoint {
                bary: [1.0 - x - y, x, y],
                weight: 2.0 * wx * wy * (1.0 - xi),
            });
        }
    }
    pts
}

/// Gauss-Legendre nodes/weights on [0,1].
pub fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    // Nodes and weights on [-1,1] for the orders used here.
    let base: Vec<(f64, f64)> = match n {
        2 => vec![
            (-0.5773502691896257, 1.0),
            (0.5773502691896257, 1.0),
        ],
        3 => vec![
            (-0.7745966692414834, 5.0 / 9.0),
            (0.0, 8.0 / 9.0),
            (0.7745966692414834, 5.0 / 9.0),
        ],
        6 => vec![
            (-0.9324695142031521, 0.1713244923791704),
            (-0.6612093864662645, 0.3607615730481386),
            (-0.2386191860831969, 0.4679139345726910),
            (0.2386191860831969, 0.4679139345726910),
            (0.6612093864662645, 0.3607615730481386),
            (0.9324695142031521, 0.1713244923791704),
        ],
        _ => panic!("unsupported Gauss-Legendre order {n}"),
    };
    base.into_iter()
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}
