//! Isoparametric shape functions and Gauss rules.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    /// Bilinear quadrilateral, nodes counter-clockwise from `(-1,-1)`.
    Q4,
    /// Biquadratic quadrilateral: Q4 corners, edge midpoints in the order
    /// bottom, right, top, left, then the centre.
    Q9,
    /// Trilinear hexahedron: the Q4 pattern at `zeta = -1`, then at `+1`.
    H8,
}

const Q4_NODES: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
const Q9_NODES: [[f64; 2]; 9] = [
    [-1.0, -1.0],
    [1.0, -1.0],
    [1.0, 1.0],
    [-1.0, 1.0],
    [0.0, -1.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [-1.0, 0.0],
    [0.0, 0.0],
];

/// Quadratic Lagrange polynomial through `-1, 0, 1` for node coordinate `a`
/// and its derivative.
fn lagrange3(a: f64, x: f64) -> (f64, f64) {
    if a < -0.5 {
        (0.5 * x * (x - 1.0), x - 0.5)
    } else if a > 0.5 {
        (0.5 * x * (x + 1.0), x + 0.5)
    } else {
        (1.0 - x * x, -2.0 * x)
    }
}

/// Gauss-Legendre points and weights on `[-1, 1]`.
pub fn gauss_1d(n: usize) -> Vec<(f64, f64)> {
    match n {
        1 => vec![(0.0, 2.0)],
        2 => {
            let g = 1.0 / 3.0_f64.sqrt();
            vec![(-g, 1.0), (g, 1.0)]
        }
        _ => {
            let g = (0.6_f64).sqrt();
            vec![(-g, 5.0 / 9.0), (0.0, 8.0 / 9.0), (g, 5.0 / 9.0)]
        }
    }
}

impl ElementKind {
    pub fn dim(self) -> usize {
        match self {
            ElementKind::Q4 | ElementKind::Q9 => 2,
            ElementKind::H8 => 3,
        }
    }

    pub fn n_nodes(self) -> usize {
        match self {
            ElementKind::Q4 => 4,
            ElementKind::Q9 => 9,
            ElementKind::H8 => 8,
        }
    }

    /// Points per direction of the tensor-product Gauss rule.
    pub fn gauss_order(self) -> usize {
        match self {
            ElementKind::Q9 => 3,
            _ => 2,
        }
    }

    /// Shape values and reference derivatives (`dn[a][k] = dN_a / dxi_k`).
    pub fn shape(self, xi: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        match self {
            ElementKind::Q4 => Q4_NODES
                .iter()
                .map(|p| {
                    let (a, b) = (1.0 + p[0] * xi[0], 1.0 + p[1] * xi[1]);
                    (0.25 * a * b, vec![0.25 * p[0] * b, 0.25 * a * p[1]])
                })
                .unzip(),
            ElementKind::Q9 => Q9_NODES
                .iter()
                .map(|p| {
                    let (lx, dx) = lagrange3(p[0], xi[0]);
                    let (ly, dy) = lagrange3(p[1], xi[1]);
                    (lx * ly, vec![dx * ly, lx * dy])
                })
                .unzip(),
            ElementKind::H8 => (0..8)
                .map(|k| {
                    let p = Q4_NODES[k % 4];
                    let pz = if k < 4 { -1.0 } else { 1.0 };
                    let (a, b, c) = (1.0 + p[0] * xi[0], 1.0 + p[1] * xi[1], 1.0 + pz * xi[2]);
                    (0.125 * a * b * c, vec![0.125 * p[0] * b * c, 0.125 * a * p[1] * c, 0.125 * a * b * pz])
                })
                .unzip(),
        }
    }

    pub fn gauss_points(self) -> Vec<(Vec<f64>, f64)> {
        let g = gauss_1d(self.gauss_order());
        let mut out = Vec::new();
        if self.dim() == 2 {
            for &(y, wy) in &g {
                for &(x, wx) in &g {
                    out.push((vec![x, y], wx * wy));
                }
            }
        } else {
            for &(z, wz) in &g {
                for &(y, wy) in &g {
                    for &(x, wx) in &g {
                        out.push((vec![x, y, z], wx * wy * wz));
                    }
                }
            }
        }
        out
    }
}

/// Shape functions of a boundary facet: 2- or 3-node lines (end, end or
/// start, mid, end) and 4-node quadrilateral faces.
pub fn facet_shape(n_nodes: usize, s: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    match n_nodes {
        2 => (vec![0.5 * (1.0 - s[0]), 0.5 * (1.0 + s[0])], vec![vec![-0.5], vec![0.5]]),
        3 => {
            let (a, da) = lagrange3(-1.0, s[0]);
            let (b, db) = lagrange3(0.0, s[0]);
            let (c, dc) = lagrange3(1.0, s[0]);
            (vec![a, b, c], vec![vec![da], vec![db], vec![dc]])
        }
        _ => ElementKind::Q4.shape(s),
    }
}

pub fn facet_gauss(n_nodes: usize) -> Vec<(Vec<f64>, f64)> {
    match n_nodes {
        2 => gauss_1d(2).into_iter().map(|(x, w)| (vec![x], w)).collect(),
        3 => gauss_1d(3).into_iter().map(|(x, w)| (vec![x], w)).collect(),
        _ => ElementKind::Q4.gauss_points(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_nodes(kind: ElementKind) -> Vec<Vec<f64>> {
        match kind {
            ElementKind::Q4 => Q4_NODES.iter().map(|p| p.to_vec()).collect(),
            ElementKind::Q9 => Q9_NODES.iter().map(|p| p.to_vec()).collect(),
            ElementKind::H8 => (0..8).map(|k| vec![Q4_NODES[k % 4][0], Q4_NODES[k % 4][1], if k < 4 { -1.0 } else { 1.0 }]).collect(),
        }
    }

    #[test]
    fn kronecker_delta_and_partition_of_unity() {
        for kind in [ElementKind::Q4, ElementKind::Q9, ElementKind::H8] {
            let nodes = reference_nodes(kind);
            for (a, p) in nodes.iter().enumerate() {
                let (n, _) = kind.shape(p);
                for (b, v) in n.iter().enumerate() {
                    assert!((v - if a == b { 1.0 } else { 0.0 }).abs() < 1e-15);
                }
            }
            let xi = [0.3, -0.7, 0.2];
            let (n, dn) = kind.shape(&xi[..kind.dim()]);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for k in 0..kind.dim() {
                assert!(dn.iter().map(|d| d[k]).sum::<f64>().abs() < 1e-14);
            }
        }
    }

    #[test]
    fn derivatives_match_differences() {
        for kind in [ElementKind::Q4, ElementKind::Q9, ElementKind::H8] {
            let xi = [0.31, -0.42, 0.17];
            let xi = &xi[..kind.dim()];
            let (_, dn) = kind.shape(xi);
            for k in 0..kind.dim() {
                let mut p = xi.to_vec();
                let mut m = xi.to_vec();
                p[k] += 1e-6;
                m[k] -= 1e-6;
                let (np, _) = kind.shape(&p);
                let (nm, _) = kind.shape(&m);
                for a in 0..kind.n_nodes() {
                    assert!(((np[a] - nm[a]) / 2e-6 - dn[a][k]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn gauss_rules_integrate_polynomials() {
        // weights sum to the reference volume; x^4 y^2 needs three points
        for kind in [ElementKind::Q4, ElementKind::Q9, ElementKind::H8] {
            let s: f64 = kind.gauss_points().iter().map(|g| g.1).sum();
            assert!((s - 2f64.powi(kind.dim() as i32)).abs() < 1e-14);
        }
        let q: f64 = ElementKind::Q9.gauss_points().iter().map(|(x, w)| w * x[0].powi(4) * x[1].powi(2)).sum();
        assert!((q - 0.4 * 2.0 / 3.0).abs() < 1e-14);
    }
}
