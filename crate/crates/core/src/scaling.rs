//! Per-row affine min-max scaling to a target interval, `(-1, 1)` by default.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    /// Rows whose max equals their min; they map to the interval midpoint.
    pub degenerate: Vec<bool>,
}

impl MinMaxScaler {
    /// Fits one affine map per row of `data` (features x samples).
    pub fn fit(data: &DMatrix<f64>, limits: (f64, f64)) -> Self {
        let rows = data.nrows();
        let mut min = vec![f64::INFINITY; rows];
        let mut max = vec![f64::NEG_INFINITY; rows];
        for r in 0..rows {
            for v in data.row(r).iter() {
                min[r] = min[r].min(*v);
                max[r] = max[r].max(*v);
            }
        }
        if data.ncols() == 0 {
            min.fill(0.0);
            max.fill(0.0);
        }
        let degenerate = min.iter().zip(&max).map(|(a, b)| !(b > a)).collect();
        Self { min, max, lower: limits.0, upper: limits.1, degenerate }
    }

    pub fn fit_default(data: &DMatrix<f64>) -> Self {
        Self::fit(data, (-1.0, 1.0))
    }

    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn apply_value(&self, row: usize, x: f64) -> f64 {
        if self.degenerate[row] {
            return self.mid();
        }
        self.lower + (x - self.min[row]) * (self.upper - self.lower) / (self.max[row] - self.min[row])
    }

    pub fn invert_value(&self, row: usize, y: f64) -> f64 {
        if self.degenerate[row] {
            return self.min[row];
        }
        self.min[row] + (y - self.lower) * (self.max[row] - self.min[row]) / (self.upper - self.lower)
    }

    /// `d scaled / d raw` for a row (zero for degenerate rows).
    pub fn gain(&self, row: usize) -> f64 {
        if self.degenerate[row] {
            0.0
        } else {
            (self.upper - self.lower) / (self.max[row] - self.min[row])
        }
    }

    pub fn apply(&self, data: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(data.nrows(), data.ncols(), |r, c| self.apply_value(r, data[(r, c)]))
    }

    pub fn invert(&self, data: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(data.nrows(), data.ncols(), |r, c| self.invert_value(r, data[(r, c)]))
    }

    pub fn apply_vec(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().enumerate().map(|(r, v)| self.apply_value(r, *v)))
    }

    pub fn invert_vec(&self, y: &[f64]) -> Vec<f64> {
        y.iter().enumerate().map(|(r, v)| self.invert_value(r, *v)).collect()
    }
}

/// Function forms matching the data-generation vocabulary.
pub fn scale_fit(rows: &DMatrix<f64>, limits: (f64, f64)) -> MinMaxScaler {
    MinMaxScaler::fit(rows, limits)
}

pub fn scale_apply(scaler: &MinMaxScaler, rows: &DMatrix<f64>) -> DMatrix<f64> {
    scaler.apply(rows)
}

pub fn scale_invert(scaler: &MinMaxScaler, rows: &DMatrix<f64>) -> DMatrix<f64> {
    scaler.invert(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_midpoint() {
        let data = DMatrix::from_row_slice(1, 3, &[2.0, 5.0, 8.0]);
        let s = MinMaxScaler::fit_default(&data);
        let y = s.apply(&data);
        assert_eq!(y[(0, 0)], -1.0);
        assert_eq!(y[(0, 2)], 1.0);
        assert_eq!(y[(0, 1)], 0.0);
    }

    #[test]
    fn constant_row_maps_to_zero() {
        let data = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 0.0, 1.0, 2.0]);
        let s = MinMaxScaler::fit_default(&data);
        assert!(s.degenerate[0]);
        assert!(!s.degenerate[1]);
        assert_eq!(s.apply(&data).row(0).iter().copied().collect::<Vec<_>>(), vec![0.0; 3]);
        assert_eq!(s.invert_value(0, 0.0), 1.0);
    }

    proptest! {
        #[test]
        fn roundtrip(v in prop::collection::vec(-1e3..1e3f64, 2..40)) {
            let data = DMatrix::from_row_slice(1, v.len(), &v);
            let s = MinMaxScaler::fit_default(&data);
            let back = s.invert(&s.apply(&data));
            let scale = v.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
            for (a, b) in back.iter().zip(data.iter()) {
                if !s.degenerate[0] {
                    prop_assert!((a - b).abs() <= 1e-12 * scale);
                }
            }
        }
    }
}
