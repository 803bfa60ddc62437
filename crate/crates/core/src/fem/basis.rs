//! P1 and P2 Lagrange shape functions on the reference triangle.
//!
//! Local P2 node order: the three vertices, then the midpoints of the edges
//! opposite each vertex (edge 3 between vertices 1-2, edge 4 between 0-2,
//! edge 5 between 0-1), matching `Mesh::tri_edges`.

/// P1 values at barycentric coordinates.
pub fn p1_shape(l: [f64; 3]) -> [f64; 3] {
    l
}

/// P1 gradients with respect to reference coordinates (xi, eta).
pub const P1_GRAD_REF: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// P2 values at barycentric coordinates.
pub fn p2_shape(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[1] * l[2],
        4.0 * l[0] * l[2],
        4.0 * l[0] * l[1],
    ]
}

/// P2 gradients with respect to reference coordinates (xi, eta), where
/// lambda = (1 - xi - eta, xi, eta).
pub fn p2_grad_ref(l: [f64; 3]) -> [[f64; 2]; 6] {
    let g0 = 4.0 * l[0] - 1.0;
    let g1 = 4.0 * l[1] - 1.0;
    let g2 = 4.0 * l[2] - 1.0;
    [
        [-g0, -g0],
        [g1, 0.0],
        [0.0, g2],
        [4.0 * l[2], 4.0 * l[1]],
        [-4.0 * l[2], 4.0 * (l[0] - l[2])],
        [4.0 * (l[0] - l[1]), -4.0 * l[1]],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_partition_of_unity_and_kronecker() {
        let nodes = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
            [0.5, 0.5, 0.0],
        ];
        for (i, &l) in nodes.iter().enumerate() {
            let vals = p2_shape(l);
            for (j, &v) in vals.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-15, "N_{j} at node {i}");
            }
        }
        let vals = p2_shape([0.3, 0.2, 0.5]);
        let sum: f64 = vals.iter().sum();
        assert!((sum - 1.0).abs() < 1e-14);
    }

    #[test]
    fn p2_gradients_match_finite_differences() {
        let l_of = |xi: f64, eta: f64| [1.0 - xi - eta, xi, eta];
        let (xi, eta) = (0.27, 0.41);
        let h = 1e-6;
        let g = p2_grad_ref(l_of(xi, eta));
        let f0 = p2_shape(l_of(xi, eta));
        let fx = p2_shape(l_of(xi + h, eta));
        let fy = p2_shape(l_of(xi, eta + h));
        for k in 0..6 {
            assert!(((fx[k] - f0[k]) / h - g[k][0]).abs() < 1e-5);
            assert!(((fy[k] - f0[k]) / h - g[k][1]).abs() < 1e-5);
        }
    }
}
