//! Trained material models: the POD-based plasticity surrogate with its
//! per-point strain history, and the hyperelastic network.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::TrainingSet;
use crate::fnn::{nguyen_widrow_init, stalled_result, train, FnnError, FnnModel, TrainOptions, TrainReport};
use crate::lm::StopReason;
use crate::pod::{pod_fit, PodBasis, PodError};
use crate::scaling::MinMaxScaler;
use crate::tensor::{rotate_to_general, spectral_decompose, SymTensor, TensorError};

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("dimension mismatch: model is {model}D, input is {input}D")]
    Dimension { model: usize, input: usize },
    #[error("non-finite network output for input {0:?}")]
    NonFinite(Vec<f64>),
    #[error("finite-difference step must be positive, got {0}")]
    Step(f64),
    #[error("net {net}: {source}")]
    Training { net: usize, source: FnnError },
    #[error(transparent)]
    Fnn(#[from] FnnError),
    #[error(transparent)]
    Pod(#[from] PodError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Strain history of one material point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussHistory {
    pub eps_prev: Vec<f64>,
    pub eps_prev2: Vec<f64>,
    /// Accumulated absolute principal strain seen by the next evaluation.
    pub eps_acc: Vec<f64>,
    pub commits: usize,
}

impl GaussHistory {
    pub fn new(dim: usize) -> Self {
        Self { eps_prev: vec![0.0; dim], eps_prev2: vec![0.0; dim], eps_acc: vec![0.0; dim], commits: 0 }
    }

    pub fn dim(&self) -> usize {
        self.eps_acc.len()
    }

    /// Advances the history by one converged step. The increment between the
    /// two most recent strains is added, so the value used at step `t` sums
    /// increments up to step `t - 1`.
    pub fn commit(&self, principal: &[f64]) -> Self {
        let mut next = self.clone();
        next.eps_prev2 = std::mem::replace(&mut next.eps_prev, principal.to_vec());
        if self.commits > 0 {
            for i in 0..next.eps_acc.len() {
                next.eps_acc[i] += (next.eps_prev[i] - next.eps_prev2[i]).abs();
            }
        }
        next.commits += 1;
        next
    }
}

pub fn commit_history(hist: &GaussHistory, principal: &[f64]) -> GaussHistory {
    hist.commit(principal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub dataset_hash: Option<String>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodFnnSurrogate {
    pub dim: usize,
    pub basis: PodBasis,
    /// One single-output net per POD coefficient; each carries the scaler of
    /// its coefficient as `output_scaler`.
    pub nets: Vec<FnnModel>,
    /// Shared scaler over `(principal strains, accumulated strains)`.
    pub input_scaler: MinMaxScaler,
    #[serde(default)]
    pub provenance: Provenance,
}

/// Stress and its trial history from one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateResponse {
    pub stress: SymTensor,
    pub principal: Vec<f64>,
    pub trial: GaussHistory,
}

impl PodFnnSurrogate {
    pub fn mode_count(&self) -> usize {
        self.basis.mode_count()
    }

    fn coefficient_scaler(&self, i: usize) -> Option<&MinMaxScaler> {
        self.nets[i].output_scaler.as_ref()
    }

    fn scaled_input(&self, lambda: &[f64], eps_acc: &[f64]) -> Result<Vec<f64>, SurrogateError> {
        if lambda.len() != self.dim || eps_acc.len() != self.dim {
            return Err(SurrogateError::Dimension { model: self.dim, input: lambda.len() });
        }
        let raw: Vec<f64> = lambda.iter().chain(eps_acc).copied().collect();
        Ok(self.input_scaler.apply_vec(&raw).iter().copied().collect())
    }

    /// Principal stresses for sorted principal strains and accumulated strains.
    pub fn principal_stress(&self, lambda: &[f64], eps_acc: &[f64]) -> Result<Vec<f64>, SurrogateError> {
        let x = self.scaled_input(lambda, eps_acc)?;
        let mut alpha = Vec::with_capacity(self.mode_count());
        for (i, net) in self.nets.iter().enumerate() {
            let y = net.forward(&x)?[0];
            let a = self.coefficient_scaler(i).map_or(y, |s| s.invert_value(0, y));
            if !a.is_finite() {
                return Err(SurrogateError::NonFinite(lambda.iter().chain(eps_acc).copied().collect()));
            }
            alpha.push(a);
        }
        Ok(self.basis.reconstruct(&alpha)?)
    }

    /// Principal stresses and `d sigma_a / d lambda_b` with the history fixed.
    pub fn principal_stress_with_gradient(&self, lambda: &[f64], eps_acc: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>), SurrogateError> {
        let d = self.dim;
        let x = self.scaled_input(lambda, eps_acc)?;
        let m = self.mode_count();
        let mut alpha = Vec::with_capacity(m);
        let mut dalpha = DMatrix::zeros(m, d);
        for (i, net) in self.nets.iter().enumerate() {
            let (y, g) = net.forward_with_input_gradient(&x)?;
            let (a, out_gain) = match self.coefficient_scaler(i) {
                Some(s) => (s.invert_value(0, y[0]), if s.degenerate[0] { 0.0 } else { 1.0 / s.gain(0) }),
                None => (y[0], 1.0),
            };
            alpha.push(a);
            for j in 0..d {
                dalpha[(i, j)] = out_gain * g[(0, j)] * self.input_scaler.gain(j);
            }
        }
        let sigma = self.basis.reconstruct(&alpha)?;
        let grad = self.basis.matrix() * dalpha;
        Ok((sigma, grad))
    }

    /// Evaluates at sorted principal strains; the returned history has the
    /// strain committed and is what the caller keeps once the step converges.
    pub fn evaluate_principal(&self, lambda: &[f64], hist: &GaussHistory) -> Result<(Vec<f64>, GaussHistory), SurrogateError> {
        let sigma = self.principal_stress(lambda, &hist.eps_acc)?;
        Ok((sigma, hist.commit(lambda)))
    }

    pub fn stress(&self, eps: &SymTensor, hist: &GaussHistory) -> Result<SurrogateResponse, SurrogateError> {
        if eps.dim() != self.dim {
            return Err(SurrogateError::Dimension { model: self.dim, input: eps.dim() });
        }
        let p = spectral_decompose(eps);
        let (principal, trial) = self.evaluate_principal(&p.values, hist)?;
        let stress = rotate_to_general(&principal, &p.rotation)?;
        Ok(SurrogateResponse { stress, principal, trial })
    }

    /// Central differences over the Voigt strain components (engineering
    /// shear), history held fixed. Columns are `d sigma / d eps_J`.
    pub fn tangent_fd(&self, eps: &SymTensor, hist: &GaussHistory, h: f64) -> Result<DMatrix<f64>, SurrogateError> {
        if !(h > 0.0) {
            return Err(SurrogateError::Step(h));
        }
        fd_voigt_tangent(eps, h, |e| Ok(self.stress(e, hist)?.stress))
    }

    /// Default step `1e-6 max(1, |eps|_inf)`.
    pub fn tangent(&self, eps: &SymTensor, hist: &GaussHistory) -> Result<DMatrix<f64>, SurrogateError> {
        self.tangent_fd(eps, hist, 1e-6 * eps.max_abs().max(1.0))
    }

    /// Closed-form tangent of the isotropic tensor function built from the
    /// network derivative. `None` when two principal strains are too close for
    /// the spin terms to be well defined.
    pub fn tangent_analytic(&self, eps: &SymTensor, hist: &GaussHistory) -> Result<Option<DMatrix<f64>>, SurrogateError> {
        if eps.dim() != self.dim {
            return Err(SurrogateError::Dimension { model: self.dim, input: eps.dim() });
        }
        let p = spectral_decompose(eps);
        let (sigma, dsig) = self.principal_stress_with_gradient(&p.values, &hist.eps_acc)?;
        Ok(isotropic_tangent(&p.values, &p.rotation, &sigma, &dsig, 1e-8 * eps.max_abs().max(1e-12)))
    }
}

/// Unit engineering strain direction for Voigt component `c`.
fn voigt_direction(dim: usize, c: usize, h: f64) -> SymTensor {
    let n = if dim == 2 { 3 } else { 6 };
    let mut comps = vec![0.0; n];
    // shear components carry half the engineering strain
    comps[c] = if c < dim { h } else { 0.5 * h };
    SymTensor::from_components(dim, &comps).expect("valid component count")
}

pub(crate) fn fd_voigt_tangent<E>(eps: &SymTensor, h: f64, mut f: impl FnMut(&SymTensor) -> Result<SymTensor, E>) -> Result<DMatrix<f64>, E> {
    let n = eps.n_components();
    let mut t = DMatrix::zeros(n, n);
    for c in 0..n {
        let dir = voigt_direction(eps.dim(), c, h);
        let sp = f(&eps.add(&dir))?.components();
        let sm = f(&eps.sub(&dir))?.components();
        for r in 0..n {
            t[(r, c)] = (sp[r] - sm[r]) / (2.0 * h);
        }
    }
    Ok(t)
}

fn isotropic_tangent(lambda: &[f64], q: &DMatrix<f64>, sigma: &[f64], dsig: &DMatrix<f64>, gap_tol: f64) -> Option<DMatrix<f64>> {
    let d = lambda.len();
    for a in 0..d {
        for b in a + 1..d {
            if (lambda[a] - lambda[b]).abs() <= gap_tol {
                return None;
            }
        }
    }
    let n: Vec<DVector<f64>> = (0..d).map(|a| q.column(a).into_owned()).collect();
    let nv = if d == 2 { 3 } else { 6 };
    let mut t = DMatrix::zeros(nv, nv);
    for c in 0..nv {
        let de = voigt_direction(d, c, 1.0).to_matrix();
        let dl: Vec<f64> = (0..d).map(|a| n[a].dot(&(&de * &n[a]))).collect();
        let mut ds = DMatrix::zeros(d, d);
        for a in 0..d {
            let dsa: f64 = (0..d).map(|b| dsig[(a, b)] * dl[b]).sum();
            ds += &n[a] * n[a].transpose() * dsa;
        }
        for a in 0..d {
            for b in a + 1..d {
                let coef = (sigma[a] - sigma[b]) / (lambda[a] - lambda[b]) * n[a].dot(&(&de * &n[b]));
                let sym = &n[a] * n[b].transpose() + &n[b] * n[a].transpose();
                ds += sym * coef;
            }
        }
        let comps = SymTensor::from_matrix(&ds).ok()?.components();
        t.set_column(c, &DVector::from_vec(comps));
    }
    Some(t)
}

/// Trains one coefficient network per POD mode on a sequence dataset.
#[derive(Debug, Clone)]
pub struct PodFnnFit {
    pub surrogate: PodFnnSurrogate,
    pub reports: Vec<TrainReport>,
}

/// `hidden` lists hidden layer widths (e.g. `[20, 20]`). Net `i` is seeded
/// with `opts.seed + i`. With `allow_stall` a damping overflow keeps the
/// partially trained net and reports [`StopReason::Stall`].
pub fn fit_podfnn(
    set: &TrainingSet,
    hidden: &[usize],
    opts: &TrainOptions,
    allow_stall: bool,
    serial: bool,
) -> Result<PodFnnFit, SurrogateError> {
    let d = set.dim;
    let basis = pod_fit(&set.outputs)?;
    let coeffs = basis.decouple(&set.outputs)?;
    let input_scaler = MinMaxScaler::fit_default(&set.inputs);
    let x = input_scaler.apply(&set.inputs);
    let mut sizes = vec![2 * d];
    sizes.extend_from_slice(hidden);
    sizes.push(1);

    let job = |i: usize| -> Result<(FnnModel, TrainReport), SurrogateError> {
        let row = coeffs.rows(i, 1).into_owned();
        let scaler = MinMaxScaler::fit_default(&row);
        let y = scaler.apply(&row);
        let seed = opts.seed.wrapping_add(i as u64);
        let init = nguyen_widrow_init(&sizes, seed).map_err(|source| SurrogateError::Training { net: i, source })?;
        let net_opts = TrainOptions { seed, ..*opts };
        let (mut net, report) = match train(&init, &x, &y, &net_opts, |r| log::debug!("net {i} epoch {} mse {:e}", r.epoch, r.mse)) {
            Ok(out) => out,
            Err(err) => match stalled_result(&init, &err) {
                Some((net, mut report)) if allow_stall => {
                    log::warn!("net {i}: {err}");
                    report.stop = StopReason::Stall;
                    (net, report)
                }
                _ => return Err(SurrogateError::Training { net: i, source: err }),
            },
        };
        net.input_scaler = Some(input_scaler.clone());
        net.output_scaler = Some(scaler);
        Ok((net, report))
    };
    let results: Vec<_> = if serial {
        (0..basis.mode_count()).map(job).collect::<Result<_, _>>()?
    } else {
        (0..basis.mode_count()).into_par_iter().map(job).collect::<Result<_, _>>()?
    };
    let (nets, reports): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let seeds = (0..nets.len()).map(|i| opts.seed.wrapping_add(i as u64)).collect();
    Ok(PodFnnFit {
        surrogate: PodFnnSurrogate { dim: d, basis, nets, input_scaler, provenance: Provenance { dataset_hash: None, seeds } },
        reports,
    })
}

/// Network mapping `(J, b11, b22, b12)` to `(sig11, sig22, sig12)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperFnnModel {
    pub dim: usize,
    pub net: FnnModel,
    #[serde(default)]
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperResponse {
    pub stress: SymTensor,
    /// Some scaled input left `[-1.2, 1.2]`.
    pub extrapolated: bool,
}

const EXTRAPOLATION_BAND: f64 = 1.2;

impl HyperFnnModel {
    fn scaled(&self, b: &SymTensor, j: f64) -> Result<(Vec<f64>, bool), SurrogateError> {
        if b.dim() != self.dim || self.dim != 2 {
            return Err(SurrogateError::Dimension { model: self.dim, input: b.dim() });
        }
        let raw = [j, b.get(0, 0), b.get(1, 1), b.get(0, 1)];
        let x: Vec<f64> = match &self.net.input_scaler {
            Some(s) => s.apply_vec(&raw).iter().copied().collect(),
            None => raw.to_vec(),
        };
        let out = x.iter().any(|v| v.abs() > EXTRAPOLATION_BAND);
        Ok((x, out))
    }

    pub fn stress(&self, b: &SymTensor, j: f64) -> Result<HyperResponse, SurrogateError> {
        let (x, extrapolated) = self.scaled(b, j)?;
        let y = self.net.forward(&x)?;
        let s = match &self.net.output_scaler {
            Some(sc) => sc.invert_vec(&y),
            None => y,
        };
        if s.iter().any(|v| !v.is_finite()) {
            return Err(SurrogateError::NonFinite(x));
        }
        Ok(HyperResponse { stress: SymTensor::new_2d(s[0], s[1], s[2]), extrapolated })
    }

    /// `d sigma / d (J, b11, b22, b12)` as a `3 x 4` matrix.
    pub fn input_gradient(&self, b: &SymTensor, j: f64) -> Result<DMatrix<f64>, SurrogateError> {
        let (x, _) = self.scaled(b, j)?;
        let (_, g) = self.net.forward_with_input_gradient(&x)?;
        Ok(DMatrix::from_fn(3, 4, |r, c| {
            let out = self.net.output_scaler.as_ref().map_or(1.0, |s| if s.degenerate[r] { 0.0 } else { 1.0 / s.gain(r) });
            let inp = self.net.input_scaler.as_ref().map_or(1.0, |s| s.gain(c));
            out * g[(r, c)] * inp
        }))
    }
}

pub fn hyper_stress(model: &HyperFnnModel, b: &SymTensor, j: f64) -> Result<HyperResponse, SurrogateError> {
    model.stress(b, j)
}

pub fn podfnn_stress(model: &PodFnnSurrogate, eps: &SymTensor, hist: &GaussHistory) -> Result<(SymTensor, GaussHistory), SurrogateError> {
    let r = model.stress(eps, hist)?;
    Ok((r.stress, r.trial))
}

pub fn constitutive_tangent(model: &PodFnnSurrogate, eps: &SymTensor, hist: &GaussHistory) -> Result<DMatrix<f64>, SurrogateError> {
    model.tangent(eps, hist)
}

/// On-disk surrogate, tagged by kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurrogateFile {
    Podfnn(PodFnnSurrogate),
    HyperFnn(HyperFnnModel),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{accumulated_abs_strain, assemble_training_set, drive_all, gen_paths_2d};
    use crate::lm::LmOptions;
    use crate::material::{ElasticParams, HardeningLaw, VonMises};

    #[test]
    fn commit_examples() {
        let mut h = GaussHistory::new(1);
        let mut seen = Vec::new();
        for e in [0.0, 0.01, 0.02, 0.01] {
            seen.push(h.eps_acc[0]);
            h = h.commit(&[e]);
        }
        assert_eq!(seen, accumulated_abs_strain(&[0.0, 0.01, 0.02, 0.01]));
        assert!((seen[3] - 0.02).abs() < 1e-15);
        let same = h.commit(&[0.01]);
        assert_eq!(same.eps_acc, h.eps_acc);
    }

    /// Hand-built 2D surrogate: identity POD basis, nets that are linear in
    /// the principal strains.
    fn linear_surrogate() -> PodFnnSurrogate {
        let mut nets = Vec::new();
        for i in 0..2 {
            // 4-1-1: small weights keep tanh nearly linear
            let mut net = FnnModel::zeros(&[4, 1, 1]).unwrap();
            let mut w = vec![0.0; 4];
            w[i] = 0.01;
            let mut p = w;
            p.push(0.0);
            p.extend([100.0, 0.0]);
            net.set_params(&p);
            nets.push(net);
        }
        let basis = PodBasis { mean: vec![0.0, 0.0], modes: vec![vec![1.0, 0.0], vec![0.0, 1.0]], singular_values: vec![1.0, 1.0] };
        let data = DMatrix::from_row_slice(4, 2, &[-1.0, 1.0, -1.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let input_scaler = MinMaxScaler::fit_default(&data);
        PodFnnSurrogate { dim: 2, basis, nets, input_scaler, provenance: Provenance::default() }
    }

    #[test]
    fn frame_consistency_under_rotation() {
        let s = linear_surrogate();
        let h = GaussHistory::new(2);
        let eps = SymTensor::new_2d(0.3, -0.1, 0.2);
        let sig = s.stress(&eps, &h).unwrap().stress;
        let th: f64 = 0.7;
        let r = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let rot = |t: &SymTensor| SymTensor::from_matrix(&(&r * t.to_matrix() * r.transpose())).unwrap();
        let sig_r = s.stress(&rot(&eps), &h).unwrap().stress;
        assert!(sig_r.sub(&rot(&sig)).max_abs() < 1e-12);
    }

    #[test]
    fn fd_and_analytic_tangents_agree_and_are_taylor_consistent() {
        let s = linear_surrogate();
        let h = GaussHistory::new(2).commit(&[0.1, 0.0]).commit(&[0.2, -0.1]);
        let eps = SymTensor::new_2d(0.25, -0.15, 0.1);
        let fd = s.tangent(&eps, &h).unwrap();
        let an = s.tangent_analytic(&eps, &h).unwrap().unwrap();
        assert!((&fd - &an).amax() < 1e-7 * an.amax());
        let dir = [0.3, -0.5, 0.8];
        for hh in [1e-3, 1e-4] {
            let de = SymTensor::from_components(2, &[dir[0] * hh, dir[1] * hh, 0.5 * dir[2] * hh]).unwrap();
            let ds = s.stress(&eps.add(&de), &h).unwrap().stress.sub(&s.stress(&eps, &h).unwrap().stress).components();
            let pred = &fd * DVector::from_vec(dir.iter().map(|v| v * hh).collect());
            let err = ds.iter().zip(pred.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 50.0 * hh * hh * fd.amax().max(1.0), "h={hh} err={err}");
        }
        assert!(matches!(s.tangent_fd(&eps, &h, 0.0), Err(SurrogateError::Step(_))));
    }

    #[test]
    fn repeated_strains_skip_analytic_tangent() {
        let s = linear_surrogate();
        let h = GaussHistory::new(2);
        assert!(s.tangent_analytic(&SymTensor::new_2d(0.1, 0.1, 0.0), &h).unwrap().is_none());
    }

    #[test]
    fn offline_online_history_match_and_training_smoke() {
        let mat = VonMises::new(ElasticParams::new(1.0, 0.33).unwrap(), HardeningLaw::Exponential { y0: 0.05, offset: 2e-5, exponent: 0.3 }).unwrap();
        let pairs = drive_all(&gen_paths_2d(&[0.1], 6, 9, true), &mat, true).unwrap();
        let set = assemble_training_set(&pairs).unwrap();
        let opts = TrainOptions { lm: LmOptions { max_epochs: 20, ..Default::default() }, seed: 3 };
        let fit = fit_podfnn(&set, &[6], &opts, true, true).unwrap();
        assert_eq!(fit.surrogate.nets.len(), 2);
        let sur = &fit.surrogate;
        for p in &pairs {
            let mut h = GaussHistory::new(2);
            for t in 0..p.len() {
                assert_eq!(h.eps_acc, vec![p.strain[(2, t)], p.strain[(3, t)]]);
                let lambda = [p.strain[(0, t)], p.strain[(1, t)]];
                let (sig, trial) = sur.evaluate_principal(&lambda, &h).unwrap();
                assert!(sig.iter().all(|v| v.is_finite()));
                h = trial;
            }
        }
        let json = serde_json::to_string(&SurrogateFile::Podfnn(sur.clone())).unwrap();
        let back: SurrogateFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, SurrogateFile::Podfnn(sur.clone()));
    }

    #[test]
    fn hyper_gradient_matches_differences() {
        let mut net = nguyen_widrow_init(&[4, 5, 3], 2).unwrap();
        let xin = DMatrix::from_row_slice(4, 2, &[0.99, 1.01, 0.7, 1.4, 0.7, 1.4, -0.2, 0.2]);
        let yout = DMatrix::from_row_slice(3, 2, &[-10.0, 10.0, -10.0, 10.0, -5.0, 5.0]);
        net.input_scaler = Some(MinMaxScaler::fit_default(&xin));
        net.output_scaler = Some(MinMaxScaler::fit_default(&yout));
        let m = HyperFnnModel { dim: 2, net, provenance: Provenance::default() };
        let b = SymTensor::new_2d(1.1, 0.9, 0.05);
        let g = m.input_gradient(&b, 1.0).unwrap();
        let h = 1e-6;
        let fj = (m.stress(&b, 1.0 + h).unwrap().stress.components()[0] - m.stress(&b, 1.0 - h).unwrap().stress.components()[0]) / (2.0 * h);
        assert!((fj - g[(0, 0)]).abs() < 1e-5 * g.amax());
        let bp = SymTensor::new_2d(1.1, 0.9, 0.05 + h);
        let bm = SymTensor::new_2d(1.1, 0.9, 0.05 - h);
        let f12 = (m.stress(&bp, 1.0).unwrap().stress.components()[2] - m.stress(&bm, 1.0).unwrap().stress.components()[2]) / (2.0 * h);
        assert!((f12 - g[(2, 3)]).abs() < 1e-5 * g.amax());
        assert!(m.stress(&SymTensor::new_2d(3.0, 1.0, 0.0), 1.0).unwrap().extrapolated);
        assert!(!m.stress(&b, 1.0).unwrap().extrapolated);
    }
}
