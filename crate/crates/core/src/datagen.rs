//! Strain-stress sequence generation along loading(-unloading) paths.
//!
//! A path is driven on a homogeneous unit patch, so the imposed displacement
//! of the loaded corner equals the principal strain. Every column of a
//! sequence is one pseudo-time step; the strain matrix carries the sorted
//! principal strains followed by their accumulated absolute strains.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::material::{neo_hookean_stress, ElasticParams, MaterialError, PlasticState, VonMises};
use crate::scaling::MinMaxScaler;
use crate::tensor::SymTensor;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("path {path}: {source}")]
    Material { path: usize, source: MaterialError },
    #[error("sequence dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no sequences to assemble")]
    Empty,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed dataset: {0}")]
    Malformed(String),
}

/// Radial loading path in principal-strain space, peaking at `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadingPath {
    pub dim: usize,
    pub radius: f64,
    pub phi: f64,
    /// Polar angle from the third axis; unused in 2D.
    pub theta: f64,
    pub np: usize,
    pub unload: bool,
}

impl LoadingPath {
    pub fn direction(&self) -> Vec<f64> {
        match self.dim {
            2 => vec![self.phi.cos(), self.phi.sin()],
            _ => vec![
                self.theta.sin() * self.phi.cos(),
                self.theta.sin() * self.phi.sin(),
                self.theta.cos(),
            ],
        }
    }

    /// Pseudo-time load factors in `[0, 1]`: a linear ramp to the peak and,
    /// with `unload`, a linear ramp back to zero.
    pub fn ramp(&self) -> Vec<f64> {
        let n = self.np;
        if !self.unload {
            return (0..n).map(|t| t as f64 / (n - 1) as f64).collect();
        }
        let peak = (n - 1) / 2;
        let down = n - 1 - peak;
        (0..n)
            .map(|t| if t <= peak { t as f64 / peak as f64 } else { (n - 1 - t) as f64 / down as f64 })
            .collect()
    }

    pub fn displacements(&self) -> Vec<Vec<f64>> {
        let dir = self.direction();
        self.ramp().into_iter().map(|f| dir.iter().map(|c| f * self.radius * c).collect()).collect()
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.dim != 2 && self.dim != 3 {
            return Err(DatagenError::InvalidPath(format!("dimension {}", self.dim)));
        }
        if !(self.radius >= 0.0) || self.np < 3 {
            return Err(DatagenError::InvalidPath(format!("radius {} / np {}", self.radius, self.np)));
        }
        Ok(())
    }
}

/// Uniaxial cycle `0 -> +P -> -P -> 0` with a constant strain increment and
/// `P = steps_per_leg * increment`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclicPath1d {
    pub increment: f64,
    pub steps_per_leg: usize,
}

impl CyclicPath1d {
    pub fn peak(&self) -> f64 {
        self.increment * self.steps_per_leg as f64
    }

    pub fn strains(&self) -> Vec<f64> {
        let n = self.steps_per_leg as i64;
        let mut level: i64 = 0;
        let mut out = vec![0.0];
        let legs: [(i64, i64); 3] = [(1, n), (-1, 2 * n), (1, n)];
        for (dir, count) in legs {
            for _ in 0..count {
                level += dir;
                out.push(level as f64 * self.increment);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathSpec {
    Radial(LoadingPath),
    Cyclic1d(CyclicPath1d),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequencePair {
    /// `2d x np`: sorted principal strains, then accumulated absolute strains.
    pub strain: DMatrix<f64>,
    /// `d x np`: principal stresses in the order of the strain rows.
    pub stress: DMatrix<f64>,
    pub path: PathSpec,
}

impl SequencePair {
    pub fn dim(&self) -> usize {
        self.stress.nrows()
    }

    pub fn len(&self) -> usize {
        self.stress.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.stress.ncols() == 0
    }
}

/// Paths on circles: `n_angles` angles evenly spread over `[0, 2 pi)` per radius.
pub fn gen_paths_2d(radii: &[f64], n_angles: usize, np: usize, unload: bool) -> Vec<LoadingPath> {
    radii
        .iter()
        .flat_map(|&r| {
            (0..n_angles).map(move |k| LoadingPath {
                dim: 2,
                radius: r,
                phi: 2.0 * PI * k as f64 / n_angles as f64,
                theta: 0.5 * PI,
                np,
                unload,
            })
        })
        .collect()
}

/// Paths on a sphere: azimuth over `[0, 2 pi)`, polar angle at cell centres
/// of `[0, pi]` (so a 1x1 set is the single path along the first axis).
pub fn gen_paths_3d(radius: f64, n_phi: usize, n_theta: usize, np: usize, unload: bool) -> Vec<LoadingPath> {
    let mut out = Vec::with_capacity(n_phi * n_theta);
    for i in 0..n_phi {
        for j in 0..n_theta {
            out.push(LoadingPath {
                dim: 3,
                radius,
                phi: 2.0 * PI * i as f64 / n_phi as f64,
                theta: PI * (j as f64 + 0.5) / n_theta as f64,
                np,
                unload,
            });
        }
    }
    out
}

/// Uniaxial cycles for a list of strain increments.
pub fn gen_paths_1d(increments: &[f64], steps_per_leg: usize) -> Vec<CyclicPath1d> {
    increments.iter().map(|&increment| CyclicPath1d { increment, steps_per_leg }).collect()
}

/// `count` values evenly spaced from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![start],
        _ => (0..count).map(|k| start + (end - start) * k as f64 / (count - 1) as f64).collect(),
    }
}

/// History variable: zero at the first two steps, then the running sum of
/// absolute increments lagged by one step.
pub fn accumulated_abs_strain(eps: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; eps.len()];
    for t in 2..eps.len() {
        h[t] = h[t - 1] + (eps[t - 1] - eps[t - 2]).abs();
    }
    h
}

/// Drives a radial path through the reference model.
pub fn drive_patch(path: &LoadingPath, material: &VonMises) -> Result<SequencePair, MaterialError> {
    let d = path.dim;
    let dir = path.direction();
    // the ordering of the components is fixed along a radial path
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| dir[b].total_cmp(&dir[a]));

    let disp = path.displacements();
    let np = disp.len();
    let mut strain = DMatrix::zeros(2 * d, np);
    let mut stress = DMatrix::zeros(d, np);
    let mut state = PlasticState::initial(d);
    for (t, u) in disp.iter().enumerate() {
        let out = material.return_map(u, &state)?;
        for (row, &k) in order.iter().enumerate() {
            strain[(row, t)] = u[k];
            stress[(row, t)] = out.stress[k];
        }
        state = out.state;
    }
    append_history(&mut strain, d);
    Ok(SequencePair { strain, stress, path: PathSpec::Radial(*path) })
}

/// Drives a uniaxial cycle through the rod form of the reference model.
pub fn drive_cycle_1d(path: &CyclicPath1d, material: &VonMises) -> Result<SequencePair, MaterialError> {
    let eps = path.strains();
    let np = eps.len();
    let mut strain = DMatrix::zeros(2, np);
    let mut stress = DMatrix::zeros(1, np);
    let mut state = PlasticState::initial(1);
    for (t, &e) in eps.iter().enumerate() {
        let out = material.return_map(&[e], &state)?;
        strain[(0, t)] = e;
        stress[(0, t)] = out.stress[0];
        state = out.state;
    }
    append_history(&mut strain, 1);
    Ok(SequencePair { strain, stress, path: PathSpec::Cyclic1d(*path) })
}

fn append_history(strain: &mut DMatrix<f64>, d: usize) {
    for row in 0..d {
        let eps: Vec<f64> = strain.row(row).iter().copied().collect();
        for (t, h) in accumulated_abs_strain(&eps).into_iter().enumerate() {
            strain[(d + row, t)] = h;
        }
    }
}

/// Drives every path; paths are independent so this runs data-parallel unless
/// `serial` is set. Output order always follows the input order.
pub fn drive_all(paths: &[LoadingPath], material: &VonMises, serial: bool) -> Result<Vec<SequencePair>, DatagenError> {
    let run = |(i, p): (usize, &LoadingPath)| {
        p.validate()?;
        drive_patch(p, material).map_err(|source| DatagenError::Material { path: i, source })
    };
    if serial {
        paths.iter().enumerate().map(run).collect()
    } else {
        paths.par_iter().enumerate().map(run).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub dim: usize,
    /// `2d x M`
    pub inputs: DMatrix<f64>,
    /// `d x M`
    pub outputs: DMatrix<f64>,
    pub path_ids: Vec<usize>,
    /// 1-based step within the path.
    pub steps: Vec<usize>,
    pub input_scaler: MinMaxScaler,
    pub output_scaler: MinMaxScaler,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.ncols() == 0
    }

    pub fn n_paths(&self) -> usize {
        let mut ids = self.path_ids.clone();
        ids.dedup();
        ids.len()
    }

    /// Column ranges belonging to each path, in order.
    pub fn path_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.path_ids.len() {
            if k == self.path_ids.len() || self.path_ids[k] != self.path_ids[start] {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    fn from_parts(dim: usize, inputs: DMatrix<f64>, outputs: DMatrix<f64>, path_ids: Vec<usize>, steps: Vec<usize>) -> Self {
        let input_scaler = MinMaxScaler::fit_default(&inputs);
        let output_scaler = MinMaxScaler::fit_default(&outputs);
        Self { dim, inputs, outputs, path_ids, steps, input_scaler, output_scaler }
    }
}

/// Concatenates sequences column-wise, preserving path order.
pub fn assemble_training_set(pairs: &[SequencePair]) -> Result<TrainingSet, DatagenError> {
    let first = pairs.first().ok_or(DatagenError::Empty)?;
    let d = first.dim();
    let m: usize = pairs.iter().map(|p| p.len()).sum();
    let mut inputs = DMatrix::zeros(2 * d, m);
    let mut outputs = DMatrix::zeros(d, m);
    let mut path_ids = Vec::with_capacity(m);
    let mut steps = Vec::with_capacity(m);
    let mut col = 0;
    for (id, p) in pairs.iter().enumerate() {
        if p.dim() != d || p.strain.nrows() != 2 * d {
            return Err(DatagenError::DimensionMismatch { expected: d, got: p.dim() });
        }
        let n = p.len();
        inputs.columns_mut(col, n).copy_from(&p.strain);
        outputs.columns_mut(col, n).copy_from(&p.stress);
        path_ids.extend(std::iter::repeat_n(id, n));
        steps.extend(1..=n);
        col += n;
    }
    Ok(TrainingSet::from_parts(d, inputs, outputs, path_ids, steps))
}

pub fn csv_header(d: usize) -> Vec<String> {
    let mut h = vec!["path_id".to_string(), "step".to_string()];
    h.extend((1..=d).map(|i| format!("eps_{i}")));
    h.extend((1..=d).map(|i| format!("eps_acc_{i}")));
    h.extend((1..=d).map(|i| format!("sig_{i}")));
    h
}

pub fn write_csv<W: Write>(set: &TrainingSet, w: W) -> Result<(), DatagenError> {
    let d = set.dim;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(csv_header(d))?;
    for c in 0..set.len() {
        let mut rec = vec![set.path_ids[c].to_string(), set.steps[c].to_string()];
        rec.extend((0..2 * d).map(|r| fmt_f64(set.inputs[(r, c)])));
        rec.extend((0..d).map(|r| fmt_f64(set.outputs[(r, c)])));
        wr.write_record(&rec)?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<TrainingSet, DatagenError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    let ncol = headers.len();
    if ncol < 5 || (ncol - 2) % 3 != 0 {
        return Err(DatagenError::Malformed(format!("{ncol} columns")));
    }
    let d = (ncol - 2) / 3;
    if headers.iter().collect::<Vec<_>>() != csv_header(d).iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(DatagenError::Malformed("unexpected header".into()));
    }
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut path_ids = Vec::new();
    let mut steps = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64, DatagenError> {
            rec[i].trim().parse::<f64>().map_err(|e| DatagenError::Malformed(format!("column {i}: {e}")))
        };
        path_ids.push(rec[0].parse().map_err(|e| DatagenError::Malformed(format!("path_id: {e}")))?);
        steps.push(rec[1].parse().map_err(|e| DatagenError::Malformed(format!("step: {e}")))?);
        cols.push((2..ncol).map(parse).collect::<Result<_, _>>()?);
    }
    let m = cols.len();
    let inputs = DMatrix::from_fn(2 * d, m, |r, c| cols[c][r]);
    let outputs = DMatrix::from_fn(d, m, |r, c| cols[c][2 * d + r]);
    Ok(TrainingSet::from_parts(d, inputs, outputs, path_ids, steps))
}

/// Shortest representation that round-trips exactly.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Equally spaced grid over `(J, b11, b22, b12)` for the plane-strain
/// hyperelastic surrogate. `J` is an independent axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperGridSpec {
    pub j: (f64, f64, usize),
    pub b11: (f64, f64, usize),
    pub b22: (f64, f64, usize),
    pub b12: (f64, f64, usize),
}

impl Default for HyperGridSpec {
    fn default() -> Self {
        Self { j: (0.999, 1.001, 5), b11: (0.7, 1.4, 15), b22: (0.7, 1.4, 15), b12: (-0.2, 0.2, 9) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperDataset {
    /// `4 x N`: `J, b11, b22, b12`
    pub inputs: DMatrix<f64>,
    /// `3 x N`: `sig11, sig22, sig12`
    pub outputs: DMatrix<f64>,
}

/// Neo-Hookean stresses on the grid. Points with a non positive-definite `b`
/// are skipped.
pub fn hyperelastic_grid(spec: &HyperGridSpec, params: &ElasticParams) -> Result<HyperDataset, DatagenError> {
    let mut ins = Vec::new();
    let mut outs = Vec::new();
    for j in linspace(spec.j.0, spec.j.1, spec.j.2) {
        for b11 in linspace(spec.b11.0, spec.b11.1, spec.b11.2) {
            for b22 in linspace(spec.b22.0, spec.b22.1, spec.b22.2) {
                for b12 in linspace(spec.b12.0, spec.b12.1, spec.b12.2) {
                    let b = SymTensor::new_2d(b11, b22, b12);
                    match neo_hookean_stress(&b, j, params) {
                        Ok(s) => {
                            ins.extend([j, b11, b22, b12]);
                            outs.extend(s.components());
                        }
                        Err(MaterialError::NotPositiveDefinite(_)) => {}
                        Err(source) => return Err(DatagenError::Material { path: 0, source }),
                    }
                }
            }
        }
    }
    let n = ins.len() / 4;
    if n == 0 {
        return Err(DatagenError::Empty);
    }
    Ok(HyperDataset { inputs: DMatrix::from_column_slice(4, n, &ins), outputs: DMatrix::from_column_slice(3, n, &outs) })
}

pub fn write_hyper_csv<W: Write>(data: &HyperDataset, w: W) -> Result<(), DatagenError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["J", "b11", "b22", "b12", "sig_11", "sig_22", "sig_12"])?;
    for c in 0..data.inputs.ncols() {
        let rec: Vec<String> = (0..4).map(|r| fmt_f64(data.inputs[(r, c)])).chain((0..3).map(|r| fmt_f64(data.outputs[(r, c)]))).collect();
        wr.write_record(&rec)?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_hyper_csv<R: Read>(r: R) -> Result<HyperDataset, DatagenError> {
    let mut rd = csv::Reader::from_reader(r);
    if rd.headers()?.len() != 7 {
        return Err(DatagenError::Malformed("expected 7 columns".into()));
    }
    let mut vals = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        for i in 0..7 {
            vals.push(rec[i].trim().parse::<f64>().map_err(|e| DatagenError::Malformed(e.to_string()))?);
        }
    }
    let n = vals.len() / 7;
    Ok(HyperDataset {
        inputs: DMatrix::from_fn(4, n, |r, c| vals[7 * c + r]),
        outputs: DMatrix::from_fn(3, n, |r, c| vals[7 * c + 4 + r]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::HardeningLaw;

    fn plastic_2d() -> VonMises {
        VonMises::new(
            ElasticParams::new(1.0, 0.33).unwrap(),
            HardeningLaw::Exponential { y0: 0.05, offset: 2e-5, exponent: 0.3 },
        )
        .unwrap()
    }

    fn rod() -> VonMises {
        VonMises::new(ElasticParams::new(700.0, 0.3).unwrap(), HardeningLaw::Linear { sigma_y0: 100.0, h_iso: 10.0 }).unwrap()
    }

    #[test]
    fn default_2d_path_count() {
        let paths = gen_paths_2d(&[0.1, 0.075], 61, 21, true);
        assert_eq!(paths.len(), 122);
        for p in &paths {
            let peak = p.displacements().iter().map(|u| u.iter().map(|c| c * c).sum::<f64>().sqrt()).fold(0.0, f64::max);
            assert!((peak - p.radius).abs() < 1e-12);
        }
        let single = gen_paths_2d(&[1.0], 1, 5, false);
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].phi, 0.0);
    }

    #[test]
    fn default_3d_path_count() {
        assert_eq!(gen_paths_3d(0.02, 90, 90, 5, false).len(), 8100);
        let one = gen_paths_3d(0.02, 1, 1, 5, false);
        let dir = one[0].direction();
        assert!((dir[0] - 1.0).abs() < 1e-15 && dir[1].abs() < 1e-15 && dir[2].abs() < 1e-15);
        for p in gen_paths_3d(0.02, 7, 5, 9, true) {
            let peak = p.displacements().iter().map(|u| u.iter().map(|c| c * c).sum::<f64>().sqrt()).fold(0.0, f64::max);
            assert!((peak - 0.02).abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_shapes() {
        let p = LoadingPath { dim: 2, radius: 1.0, phi: 0.0, theta: 0.0, np: 5, unload: true };
        assert_eq!(p.ramp(), vec![0.0, 0.5, 1.0, 0.5, 0.0]);
        let p = LoadingPath { unload: false, ..p };
        assert_eq!(p.ramp(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn accumulated_strain_examples() {
        assert_eq!(accumulated_abs_strain(&[0.0, 0.01, 0.02, 0.01]), vec![0.0, 0.0, 0.01, 0.02]);
        assert_eq!(accumulated_abs_strain(&[5.0, -3.0]), vec![0.0, 0.0]);
        let mono: Vec<f64> = (0..8).map(|t| 0.25 * t as f64).collect();
        let h = accumulated_abs_strain(&mono);
        for (t, &ht) in h.iter().enumerate().skip(1) {
            // one-based step t+1 carries (t+1-2) increments
            assert_eq!(ht, 0.25 * (t as f64 - 1.0).max(0.0));
        }
    }

    #[test]
    fn zero_radius_gives_zero_sequences() {
        let p = LoadingPath { dim: 2, radius: 0.0, phi: 0.3, theta: 0.0, np: 7, unload: true };
        let s = drive_patch(&p, &plastic_2d()).unwrap();
        assert_eq!(s.strain.abs().max(), 0.0);
        assert_eq!(s.stress.abs().max(), 0.0);
    }

    #[test]
    fn elastic_range_follows_elastic_law() {
        let m = plastic_2d();
        let p = LoadingPath { dim: 2, radius: 0.01, phi: 0.7, theta: 0.0, np: 11, unload: true };
        let s = drive_patch(&p, &m).unwrap();
        let (l, mu) = (m.elastic.lambda(), m.elastic.mu());
        for t in 0..s.len() {
            let (e1, e2) = (s.strain[(0, t)], s.strain[(1, t)]);
            assert!((s.stress[(0, t)] - (l * (e1 + e2) + 2.0 * mu * e1)).abs() < 1e-15);
            assert!((s.stress[(1, t)] - (l * (e1 + e2) + 2.0 * mu * e2)).abs() < 1e-15);
        }
    }

    #[test]
    fn uniaxial_cycle_peak_matches_closed_form() {
        let path = CyclicPath1d { increment: 0.02, steps_per_leg: 10 };
        let s = drive_cycle_1d(&path, &rod()).unwrap();
        assert_eq!(s.len(), 41);
        // step 11 is the tensile peak at 0.2
        let expected = (700.0 * 10.0 * 0.2 + 700.0 * 100.0) / 710.0;
        assert!((s.stress[(0, 10)] - expected).abs() < 1e-10);
        assert!((s.stress[(0, 10)] - 100.563).abs() < 1e-3);
    }

    #[test]
    fn tension_and_mirrored_compression_are_antisymmetric() {
        let m = plastic_2d();
        let p = LoadingPath { dim: 2, radius: 0.1, phi: 0.4, theta: 0.0, np: 11, unload: false };
        let q = LoadingPath { phi: 0.4 + PI, ..p };
        let a = drive_patch(&p, &m).unwrap();
        let b = drive_patch(&q, &m).unwrap();
        // sorting reverses the component order under negation
        for t in 0..a.len() {
            assert!((a.stress[(0, t)] + b.stress[(1, t)]).abs() < 1e-12);
            assert!((a.stress[(1, t)] + b.stress[(0, t)]).abs() < 1e-12);
        }
    }

    #[test]
    fn history_rows_are_non_decreasing() {
        let paths = gen_paths_2d(&[0.1], 8, 9, true);
        for s in drive_all(&paths, &plastic_2d(), true).unwrap() {
            for r in 2..4 {
                let row: Vec<f64> = s.strain.row(r).iter().copied().collect();
                assert!(row.windows(2).all(|w| w[1] >= w[0]));
            }
        }
    }

    #[test]
    fn assembly_and_csv_roundtrip() {
        let paths = gen_paths_2d(&[0.1], 2, 5, true);
        let pairs = drive_all(&paths, &plastic_2d(), true).unwrap();
        let one = assemble_training_set(&pairs[..1]).unwrap();
        assert_eq!(one.inputs, pairs[0].strain);
        let set = assemble_training_set(&pairs).unwrap();
        assert_eq!(set.len(), 10);
        assert_eq!(set.inputs.columns(0, 5), pairs[0].strain.columns(0, 5));
        assert_eq!(set.path_ranges(), vec![0..5, 5..10]);
        let mut buf = Vec::new();
        write_csv(&set, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, set);

        let p3 = drive_patch(&gen_paths_3d(0.02, 1, 1, 5, false)[0], &plastic_2d()).unwrap();
        assert!(matches!(assemble_training_set(&[pairs[0].clone(), p3]), Err(DatagenError::DimensionMismatch { .. })));
    }

    #[test]
    fn hyper_grid_matches_direct_evaluation() {
        let p = ElasticParams::new(700.0, 0.499).unwrap();
        let spec = HyperGridSpec { j: (0.999, 1.001, 3), b11: (0.8, 1.2, 3), b22: (0.8, 1.2, 3), b12: (-0.1, 0.1, 3) };
        let data = hyperelastic_grid(&spec, &p).unwrap();
        assert_eq!(data.inputs.ncols(), 81);
        for c in 0..81 {
            let b = SymTensor::new_2d(data.inputs[(1, c)], data.inputs[(2, c)], data.inputs[(3, c)]);
            let s = neo_hookean_stress(&b, data.inputs[(0, c)], &p).unwrap();
            assert_eq!(s.components(), data.outputs.column(c).iter().copied().collect::<Vec<_>>());
        }
        let mut buf = Vec::new();
        write_hyper_csv(&data, &mut buf).unwrap();
        assert_eq!(read_hyper_csv(buf.as_slice()).unwrap(), data);
    }
}
