//! Proper orthogonal decomposition of stress snapshot matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PodError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("snapshot matrix has no columns")]
    Empty,
}

/// Singular values at or below this fraction of the largest one do not count
/// towards the rank.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodBasis {
    pub mean: Vec<f64>,
    /// Orthonormal modes, one d-vector each.
    pub modes: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
}

impl PodBasis {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// `d x m` basis matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.mode_count(), |r, c| self.modes[c][r])
    }

    /// Coefficients of the mean-deviated snapshot.
    pub fn project(&self, snapshot: &[f64]) -> Result<Vec<f64>, PodError> {
        if snapshot.len() != self.dim() {
            return Err(PodError::Dimension { expected: self.dim(), got: snapshot.len() });
        }
        Ok(self
            .modes
            .iter()
            .map(|phi| phi.iter().zip(snapshot).zip(&self.mean).map(|((p, x), m)| p * (x - m)).sum())
            .collect())
    }

    pub fn reconstruct(&self, alpha: &[f64]) -> Result<Vec<f64>, PodError> {
        if alpha.len() != self.mode_count() {
            return Err(PodError::Dimension { expected: self.mode_count(), got: alpha.len() });
        }
        let mut out = self.mean.clone();
        for (phi, a) in self.modes.iter().zip(alpha) {
            for (o, p) in out.iter_mut().zip(phi) {
                *o += a * p;
            }
        }
        Ok(out)
    }

    /// Projects every column; row `i` of the result is the target sequence of
    /// the `i`-th coefficient network.
    pub fn decouple(&self, snapshots: &DMatrix<f64>) -> Result<DMatrix<f64>, PodError> {
        if snapshots.nrows() != self.dim() {
            return Err(PodError::Dimension { expected: self.dim(), got: snapshots.nrows() });
        }
        let mut out = DMatrix::zeros(self.mode_count(), snapshots.ncols());
        for c in 0..snapshots.ncols() {
            let col: Vec<f64> = snapshots.column(c).iter().copied().collect();
            let alpha = self.project(&col)?;
            out.set_column(c, &DVector::from_vec(alpha));
        }
        Ok(out)
    }

    /// Inverse of [`PodBasis::decouple`].
    pub fn recouple(&self, coefficients: &DMatrix<f64>) -> Result<DMatrix<f64>, PodError> {
        if coefficients.nrows() != self.mode_count() {
            return Err(PodError::Dimension { expected: self.mode_count(), got: coefficients.nrows() });
        }
        let mut out = DMatrix::zeros(self.dim(), coefficients.ncols());
        for c in 0..coefficients.ncols() {
            let a: Vec<f64> = coefficients.column(c).iter().copied().collect();
            out.set_column(c, &DVector::from_vec(self.reconstruct(&a)?));
        }
        Ok(out)
    }
}

/// Mean, deviation and SVD of a `d x M` snapshot matrix.
pub fn pod_fit(snapshots: &DMatrix<f64>) -> Result<PodBasis, PodError> {
    let (d, m) = snapshots.shape();
    if m == 0 {
        return Err(PodError::Empty);
    }
    let mean: Vec<f64> = (0..d).map(|r| snapshots.row(r).sum() / m as f64).collect();
    // columns of `b` are the deviation rows, so column orthogonalization of `b`
    // yields the left singular vectors of the deviation matrix in `v`
    let mut b = DMatrix::from_fn(m, d, |r, c| snapshots[(c, r)] - mean[c]);
    let mut v = DMatrix::<f64>::identity(d, d);
    one_sided_jacobi(&mut b, &mut v);

    let mut sv: Vec<(f64, usize)> = (0..d).map(|c| (b.column(c).norm(), c)).collect();
    sv.sort_by(|x, y| y.0.total_cmp(&x.0));
    let smax = sv.first().map_or(0.0, |s| s.0);
    let mut modes = Vec::new();
    let mut singular_values = Vec::new();
    for &(s, c) in &sv {
        if smax == 0.0 || s <= RANK_TOL * smax {
            break;
        }
        let mut phi: Vec<f64> = v.column(c).iter().copied().collect();
        fix_sign(&mut phi);
        modes.push(phi);
        singular_values.push(s);
    }
    Ok(PodBasis { mean, modes, singular_values })
}

fn one_sided_jacobi(b: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    let n = b.ncols();
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = b.column(i).norm_squared();
                let beta = b.column(j).norm_squared();
                let gamma = b.column(i).dot(&b.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(b, i, j, c, s);
                rotate_columns(v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate_columns(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (x, y) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = c * x - s * y;
        m[(r, j)] = s * x + c * y;
    }
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for k in 1..v.len() {
        if v[k].abs() > v[best].abs() {
            best = k;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn pod_project(snapshot: &[f64], basis: &PodBasis) -> Result<Vec<f64>, PodError> {
    basis.project(snapshot)
}

pub fn pod_reconstruct(alpha: &[f64], basis: &PodBasis) -> Result<Vec<f64>, PodError> {
    basis.reconstruct(alpha)
}

pub fn decouple_sequences(snapshots: &DMatrix<f64>, basis: &PodBasis) -> Result<DMatrix<f64>, PodError> {
    basis.decouple(snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inf_norm(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    #[test]
    fn identical_columns_have_no_modes() {
        let o = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, -2.0, -2.0, -2.0]);
        let b = pod_fit(&o).unwrap();
        assert_eq!(b.mean, vec![1.0, -2.0]);
        assert_eq!(b.mode_count(), 0);
        assert_eq!(b.reconstruct(&[]).unwrap(), vec![1.0, -2.0]);
    }

    #[test]
    fn hand_rank_one_example() {
        let o = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]);
        let b = pod_fit(&o).unwrap();
        assert_eq!(b.mean, vec![2.0, 3.0]);
        assert_eq!(b.mode_count(), 1);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b.modes[0][0] - h).abs() < 1e-15 && (b.modes[0][1] - h).abs() < 1e-15);
        let a = b.project(&[1.0, 2.0]).unwrap();
        assert!((a[0] + 2.0_f64.sqrt()).abs() < 1e-14);
        let x = b.reconstruct(&a).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn mean_projects_to_zero_and_modes_are_unit_steps() {
        let o = DMatrix::from_row_slice(3, 4, &[1.0, 2.0, 0.5, -1.0, 0.0, 3.0, 1.0, 2.0, 4.0, -1.0, 0.3, 0.0]);
        let b = pod_fit(&o).unwrap();
        assert_eq!(b.mode_count(), 3);
        assert!(b.project(&b.mean).unwrap().iter().all(|a| a.abs() < 1e-15));
        let x: Vec<f64> = b.mean.iter().zip(&b.modes[0]).map(|(m, p)| m + 2.0 * p).collect();
        let a = b.project(&x).unwrap();
        assert!((a[0] - 2.0).abs() < 1e-14 && a[1].abs() < 1e-14 && a[2].abs() < 1e-14);
        assert_eq!(b.project(&[1.0]), Err(PodError::Dimension { expected: 3, got: 1 }));
    }

    #[test]
    fn zero_columns_rejected() {
        assert_eq!(pod_fit(&DMatrix::zeros(2, 0)), Err(PodError::Empty));
    }

    fn arb_snapshots() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..=3, 2usize..40).prop_flat_map(|(d, m)| {
            prop::collection::vec(-100.0..100.0f64, d * m).prop_map(move |v| DMatrix::from_vec(d, m, v))
        })
    }

    proptest! {
        #[test]
        fn roundtrip_and_orthonormality(o in arb_snapshots()) {
            let b = pod_fit(&o).unwrap();
            let phi = b.matrix();
            let g = phi.transpose() * &phi - DMatrix::identity(b.mode_count(), b.mode_count());
            prop_assert!(inf_norm(&g) < 1e-12);
            let back = b.recouple(&b.decouple(&o).unwrap()).unwrap();
            prop_assert!(inf_norm(&(back - &o)) <= 1e-12 * inf_norm(&o));
        }

        #[test]
        fn coefficient_rows_uncorrelated(o in arb_snapshots()) {
            let b = pod_fit(&o).unwrap();
            let a = b.decouple(&o).unwrap();
            let g = &a * a.transpose();
            let scale = g.diagonal().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            for i in 0..g.nrows() {
                for j in 0..g.ncols() {
                    if i != j {
                        prop_assert!(g[(i, j)].abs() <= 1e-8 * scale);
                    }
                }
            }
        }

        #[test]
        fn column_permutation_invariance(o in arb_snapshots(), seed in 0u64..1000) {
            let m = o.ncols();
            let perm: Vec<usize> = (0..m).map(|k| (k * 7 + seed as usize) % m).collect();
            let mut used = vec![false; m];
            let perm: Vec<usize> = perm.into_iter().filter(|&p| !std::mem::replace(&mut used[p], true)).collect();
            prop_assume!(perm.len() == m);
            let shuffled = DMatrix::from_fn(o.nrows(), m, |r, c| o[(r, perm[c])]);
            let a = pod_fit(&o).unwrap();
            let b = pod_fit(&shuffled).unwrap();
            prop_assert_eq!(a.mode_count(), b.mode_count());
            for (i, (p, q)) in a.modes.iter().zip(&b.modes).enumerate() {
                // only well separated singular values pin down a mode
                let sep = a.singular_values.iter().enumerate().filter(|(j, _)| *j != i)
                    .map(|(_, s)| (s - a.singular_values[i]).abs()).fold(f64::INFINITY, f64::min);
                if sep > 1e-6 * a.singular_values[0] {
                    let dot: f64 = p.iter().zip(q).map(|(x, y)| x * y).sum();
                    prop_assert!((dot.abs() - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
