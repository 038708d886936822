//! Symmetric second-order tensors in 2D and 3D and their spectral
//! decomposition.
//!
//! Components are stored in Voigt order `(11, 22, 33, 12, 23, 13)`. A 2D tensor
//! only uses the in-plane entries `(11, 22, 12)`; the remaining slots stay zero.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("unsupported tensor dimension {0} (expected 2 or 3)")]
    Dimension(usize),
    #[error("rotation is not orthogonal: |QtQ - I|_inf = {0:e}")]
    NotOrthogonal(f64),
    #[error("expected {expected} principal values, got {got}")]
    Length { expected: usize, got: usize },
}

/// Gap (relative to the tensor norm) below which the closed-form eigenvector
/// construction is replaced by Jacobi sweeps. Near a double root the
/// trigonometric roots only carry about half the digits, so the margin is wide.
const JACOBI_GAP: f64 = 1e-4;
/// Gap below which eigenvalues are treated as one repeated eigenvalue and
/// their eigenspace is re-based on the canonical axes.
const CLUSTER_GAP: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymTensor {
    dim: usize,
    voigt: [f64; 6],
}

impl SymTensor {
    pub fn zero(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "SymTensor dimension must be 2 or 3");
        Self { dim, voigt: [0.0; 6] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zero(dim);
        for i in 0..dim {
            t.voigt[i] = 1.0;
        }
        t
    }

    /// 2D tensor from `(11, 22, 12)`.
    pub fn new_2d(xx: f64, yy: f64, xy: f64) -> Self {
        Self { dim: 2, voigt: [xx, yy, 0.0, xy, 0.0, 0.0] }
    }

    /// 3D tensor from `(11, 22, 33, 12, 23, 13)`.
    pub fn new_3d(c: [f64; 6]) -> Self {
        Self { dim: 3, voigt: c }
    }

    pub fn diagonal(values: &[f64]) -> Result<Self, TensorError> {
        let dim = values.len();
        if dim != 2 && dim != 3 {
            return Err(TensorError::Dimension(dim));
        }
        let mut t = Self::zero(dim);
        t.voigt[..dim].copy_from_slice(values);
        Ok(t)
    }

    /// Builds a tensor from the unique components in dimension order:
    /// `(11, 22, 12)` in 2D, `(11, 22, 33, 12, 23, 13)` in 3D.
    pub fn from_components(dim: usize, c: &[f64]) -> Result<Self, TensorError> {
        match (dim, c.len()) {
            (2, 3) => Ok(Self::new_2d(c[0], c[1], c[2])),
            (3, 6) => Ok(Self::new_3d([c[0], c[1], c[2], c[3], c[4], c[5]])),
            (2, n) => Err(TensorError::Length { expected: 3, got: n }),
            (3, n) => Err(TensorError::Length { expected: 6, got: n }),
            (d, _) => Err(TensorError::Dimension(d)),
        }
    }

    /// Symmetric part of a `d x d` matrix.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self, TensorError> {
        let d = m.nrows();
        if m.ncols() != d || (d != 2 && d != 3) {
            return Err(TensorError::Dimension(d));
        }
        let s = |i: usize, j: usize| 0.5 * (m[(i, j)] + m[(j, i)]);
        Ok(if d == 2 {
            Self::new_2d(s(0, 0), s(1, 1), s(0, 1))
        } else {
            Self::new_3d([s(0, 0), s(1, 1), s(2, 2), s(0, 1), s(1, 2), s(0, 2)])
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> Vec<f64> {
        if self.dim == 2 {
            vec![self.voigt[0], self.voigt[1], self.voigt[3]]
        } else {
            self.voigt.to_vec()
        }
    }

    pub fn n_components(&self) -> usize {
        if self.dim == 2 {
            3
        } else {
            6
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (0, 0) => self.voigt[0],
            (1, 1) => self.voigt[1],
            (2, 2) => self.voigt[2],
            (0, 1) => self.voigt[3],
            (1, 2) => self.voigt[4],
            (0, 2) => self.voigt[5],
            _ => panic!("index ({i}, {j}) out of range"),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    /// Embeds the tensor in a 3x3 matrix (2D tensors get zero out-of-plane rows).
    pub fn to_matrix3(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| if i < self.dim && j < self.dim { self.get(i, j) } else { 0.0 })
    }

    pub fn trace(&self) -> f64 {
        self.voigt[..self.dim].iter().sum()
    }

    pub fn norm(&self) -> f64 {
        let diag: f64 = self.voigt[..3].iter().map(|v| v * v).sum();
        let off: f64 = self.voigt[3..].iter().map(|v| v * v).sum();
        (diag + 2.0 * off).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.voigt.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut t = *self;
        t.voigt.iter_mut().for_each(|v| *v *= s);
        t
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut t = *self;
        for (a, b) in t.voigt.iter_mut().zip(other.voigt.iter()) {
            *a += b;
        }
        t
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }
}

/// Principal values (descending) and the orthogonal matrix whose columns are
/// the matching eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalState {
    pub values: Vec<f64>,
    pub rotation: DMatrix<f64>,
}

/// Infinitesimal strain `(H + H^T) / 2` from a displacement gradient.
pub fn small_strain(h: &DMatrix<f64>) -> Result<SymTensor, TensorError> {
    SymTensor::from_matrix(h)
}

/// Spectral decomposition with sorted values and a deterministic basis: in
/// every eigenvector the entry of largest magnitude is positive (lowest index
/// wins ties), and repeated eigenvalues get a basis Gram-Schmidt-built from
/// the canonical axes.
pub fn spectral_decompose(t: &SymTensor) -> PrincipalState {
    let d = t.dim();
    let scale = t.norm();
    let off_diagonal_zero = (0..d).all(|i| (i + 1..d).all(|j| t.get(i, j) == 0.0));
    let (mut values, mut vectors) = if scale == 0.0 {
        (vec![0.0; d], DMatrix::identity(d, d))
    } else if off_diagonal_zero {
        // exact values for already diagonal input
        ((0..d).map(|i| t.get(i, i)).collect(), DMatrix::identity(d, d))
    } else if d == 2 {
        eig_2x2(t)
    } else {
        eig_3x3(t, scale)
    };

    // descending order
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let sorted_vals: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let sorted_vecs = DMatrix::from_fn(d, d, |r, c| vectors[(r, order[c])]);
    values = sorted_vals;
    vectors = sorted_vecs;

    canonicalize_clusters(&values, &mut vectors, scale);
    for c in 0..d {
        fix_sign(&mut vectors, c);
    }
    PrincipalState { values, rotation: vectors }
}

/// `Q diag(values) Q^T`.
pub fn rotate_to_general(values: &[f64], q: &DMatrix<f64>) -> Result<SymTensor, TensorError> {
    let d = q.nrows();
    if q.ncols() != d || (d != 2 && d != 3) {
        return Err(TensorError::Dimension(d));
    }
    if values.len() != d {
        return Err(TensorError::Length { expected: d, got: values.len() });
    }
    let dev = orthogonality_defect(q);
    if dev > ORTHO_TOL {
        return Err(TensorError::NotOrthogonal(dev));
    }
    let m = DMatrix::from_fn(d, d, |i, j| (0..d).map(|k| q[(i, k)] * values[k] * q[(j, k)]).sum());
    SymTensor::from_matrix(&m)
}

/// `|Q^T Q - I|` in the induced infinity norm.
pub fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let d = q.ncols();
    let g = q.transpose() * q - DMatrix::<f64>::identity(d, d);
    (0..d).map(|i| (0..d).map(|j| g[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn eig_2x2(t: &SymTensor) -> (Vec<f64>, DMatrix<f64>) {
    let (a, c, b) = (t.get(0, 0), t.get(1, 1), t.get(0, 1));
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let l1 = mean + rad;
    let l2 = mean - rad;
    if rad == 0.0 {
        return (vec![l1, l2], DMatrix::identity(2, 2));
    }
    // two candidate vectors for l1; take the better conditioned one
    let v1 = [b, l1 - a];
    let v2 = [l1 - c, b];
    let n1 = v1[0].hypot(v1[1]);
    let n2 = v2[0].hypot(v2[1]);
    let (x, y) = if n1 >= n2 { (v1[0] / n1, v1[1] / n1) } else { (v2[0] / n2, v2[1] / n2) };
    (vec![l1, l2], DMatrix::from_row_slice(2, 2, &[x, -y, y, x]))
}

fn eig_3x3(t: &SymTensor, scale: f64) -> (Vec<f64>, DMatrix<f64>) {
    let a = t.to_matrix3();
    let mut lambdas = cardano(&a);
    for l in lambdas.iter_mut() {
        *l = newton_polish(&a, *l);
    }
    lambdas.sort_by(|x, y| y.total_cmp(x));
    let min_gap = (lambdas[0] - lambdas[1]).min(lambdas[1] - lambdas[2]);
    if min_gap < JACOBI_GAP * scale {
        return jacobi_eigen(&a);
    }
    let mut q = DMatrix::zeros(3, 3);
    for (c, &l) in lambdas.iter().enumerate() {
        let m = a - Matrix3::identity() * l;
        let r0 = m.row(0).transpose();
        let r1 = m.row(1).transpose();
        let r2 = m.row(2).transpose();
        let cands = [r0.cross(&r1), r0.cross(&r2), r1.cross(&r2)];
        let best = cands
            .iter()
            .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))
            .copied()
            .unwrap();
        let v = best / best.norm();
        for r in 0..3 {
            q[(r, c)] = v[r];
        }
    }
    // re-orthogonalize the last vector against round-off
    let v0 = q.column(0).into_owned();
    let mut v1 = q.column(1).into_owned();
    v1 -= &v0 * v0.dot(&v1);
    v1 /= v1.norm();
    let v2 = nalgebra::Vector3::new(v0[0], v0[1], v0[2]).cross(&nalgebra::Vector3::new(v1[0], v1[1], v1[2]));
    let sign = if v2.dot(&nalgebra::Vector3::new(q[(0, 2)], q[(1, 2)], q[(2, 2)])) < 0.0 { -1.0 } else { 1.0 };
    for r in 0..3 {
        q[(r, 1)] = v1[r];
        q[(r, 2)] = sign * v2[r];
    }
    (lambdas.to_vec(), q)
}

/// Trigonometric solution of the characteristic cubic.
fn cardano(a: &Matrix3<f64>) -> [f64; 3] {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let q = a.trace() / 3.0;
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q, q, q];
    }
    let b = (a - Matrix3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let l2 = 3.0 * q - l1 - l3;
    [l1, l2, l3]
}

/// One Newton step on the characteristic polynomial, kept only if it helps.
fn newton_polish(a: &Matrix3<f64>, l: f64) -> f64 {
    let c2 = -a.trace();
    let c1 = a[(0, 0)] * a[(1, 1)] + a[(1, 1)] * a[(2, 2)] + a[(0, 0)] * a[(2, 2)]
        - a[(0, 1)].powi(2)
        - a[(1, 2)].powi(2)
        - a[(0, 2)].powi(2);
    let c0 = -a.determinant();
    let p = |x: f64| ((x + c2) * x + c1) * x + c0;
    let dp = (3.0 * l + 2.0 * c2) * l + c1;
    if dp == 0.0 {
        return l;
    }
    let cand = l - p(l) / dp;
    if cand.is_finite() && p(cand).abs() < p(l).abs() {
        cand
    } else {
        l
    }
}

/// Cyclic Jacobi rotations; used when eigenvalues are too close for the
/// cross-product construction.
fn jacobi_eigen(a: &Matrix3<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let mut m = *a;
    let mut v = Matrix3::<f64>::identity();
    for _sweep in 0..50 {
        let off = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
        if off <= f64::EPSILON.powi(2) * m.norm_squared() {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            if m[(p, q)] == 0.0 {
                continue;
            }
            let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut rot = Matrix3::identity();
            rot[(p, p)] = c;
            rot[(q, q)] = c;
            rot[(p, q)] = s;
            rot[(q, p)] = -s;
            m = rot.transpose() * m * rot;
            v *= rot;
        }
    }
    let vals = vec![m[(0, 0)], m[(1, 1)], m[(2, 2)]];
    (vals, DMatrix::from_fn(3, 3, |r, c| v[(r, c)]))
}

fn canonicalize_clusters(values: &[f64], q: &mut DMatrix<f64>, scale: f64) {
    let d = values.len();
    let tol = CLUSTER_GAP * scale.max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && values[end - 1] - values[end] <= tol {
            end += 1;
        }
        if end - start > 1 {
            let cols: Vec<usize> = (start..end).collect();
            let proj = {
                let mut p = DMatrix::<f64>::zeros(d, d);
                for &c in &cols {
                    let v = q.column(c);
                    p += v * v.transpose();
                }
                p
            };
            let mut basis: Vec<nalgebra::DVector<f64>> = Vec::new();
            for axis in 0..d {
                if basis.len() == cols.len() {
                    break;
                }
                let mut w = proj.column(axis).into_owned();
                for b in &basis {
                    let dot = b.dot(&w);
                    w -= b * dot;
                }
                let n = w.norm();
                if n > 1e-6 {
                    basis.push(w / n);
                }
            }
            if basis.len() == cols.len() {
                for (b, &c) in basis.iter().zip(&cols) {
                    q.set_column(c, b);
                }
            }
        }
        start = end;
    }
}

fn fix_sign(q: &mut DMatrix<f64>, col: usize) {
    let d = q.nrows();
    let mut best = 0;
    for r in 1..d {
        if q[(r, col)].abs() > q[(best, col)].abs() {
            best = r;
        }
    }
    if q[(best, col)] < 0.0 {
        for r in 0..d {
            q[(r, col)] = -q[(r, col)];
        }
    }
}
