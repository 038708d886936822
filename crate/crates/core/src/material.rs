//! Reference constitutive laws: compressible neo-Hookean hyperelasticity and
//! small-strain von Mises plasticity with isotropic hardening.
//!
//! The plasticity update exists in two forms sharing one plastic-multiplier
//! solve: a principal-space version (fixed principal axes, used to drive data
//! generation) and a tensor version with the consistent tangent (used by the
//! FE solver, where principal axes rotate).

use nalgebra::{DMatrix, SMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{spectral_decompose, SymTensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("invalid elastic parameters: E = {e}, nu = {nu}")]
    InvalidElastic { e: f64, nu: f64 },
    #[error("invalid hardening law: {0}")]
    InvalidHardening(String),
    #[error("negative plastic multiplier {0}")]
    NegativeGamma(f64),
    #[error("volume ratio J = {0} must be positive")]
    NonPositiveJacobian(f64),
    #[error("left Cauchy-Green tensor is not positive definite (min eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("plastic multiplier solve did not converge after {iterations} iterations (residual {residual:e})")]
    ReturnMapDiverged { iterations: usize, residual: f64 },
    #[error("principal strain length {0} unsupported (expected 1, 2 or 3)")]
    Dimension(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
}

impl ElasticParams {
    pub fn new(e: f64, nu: f64) -> Result<Self, MaterialError> {
        let p = Self { e, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        if !(self.e > 0.0) || !(self.nu > -1.0 && self.nu < 0.5) {
            return Err(MaterialError::InvalidElastic { e: self.e, nu: self.nu });
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.e * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
    }

    pub fn mu(&self) -> f64 {
        self.e / (2.0 * (1.0 + self.nu))
    }

    pub fn bulk(&self) -> f64 {
        self.lambda() + 2.0 * self.mu() / 3.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HardeningLaw {
    /// `sigma_y = sigma_y0 + h_iso * gamma`
    Linear { sigma_y0: f64, h_iso: f64 },
    /// `sigma_y = y0 + y0 * (offset + gamma)^exponent`
    Exponential { y0: f64, offset: f64, exponent: f64 },
}

impl HardeningLaw {
    pub fn validate(&self) -> Result<(), MaterialError> {
        match *self {
            HardeningLaw::Linear { sigma_y0, h_iso } => {
                if !(sigma_y0 > 0.0) || !(h_iso >= 0.0) {
                    return Err(MaterialError::InvalidHardening(format!(
                        "linear law needs sigma_y0 > 0 and h_iso >= 0 (got {sigma_y0}, {h_iso})"
                    )));
                }
            }
            HardeningLaw::Exponential { y0, offset, exponent } => {
                if !(y0 > 0.0) || !(offset >= 0.0) || !(exponent >= 0.0) {
                    return Err(MaterialError::InvalidHardening(format!(
                        "exponential law needs y0 > 0, offset >= 0, exponent >= 0 (got {y0}, {offset}, {exponent})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn initial_yield(&self) -> f64 {
        self.eval(0.0)
    }

    fn eval(&self, gamma: f64) -> f64 {
        match *self {
            HardeningLaw::Linear { sigma_y0, h_iso } => sigma_y0 + h_iso * gamma,
            HardeningLaw::Exponential { y0, offset, exponent } => y0 + y0 * (offset + gamma).powf(exponent),
        }
    }

    /// `d sigma_y / d gamma`; infinite at the origin of an offset-free
    /// exponential law with exponent < 1.
    pub fn slope(&self, gamma: f64) -> f64 {
        match *self {
            HardeningLaw::Linear { h_iso, .. } => h_iso,
            HardeningLaw::Exponential { y0, offset, exponent } => {
                if exponent == 0.0 {
                    0.0
                } else {
                    y0 * exponent * (offset + gamma).powf(exponent - 1.0)
                }
            }
        }
    }
}

pub fn yield_stress(law: &HardeningLaw, gamma: f64) -> Result<f64, MaterialError> {
    if gamma < 0.0 {
        return Err(MaterialError::NegativeGamma(gamma));
    }
    Ok(law.eval(gamma))
}

/// Internal variables of the principal-space model. `plastic_strain` holds one
/// entry in 1D and three entries otherwise (plane strain keeps the
/// out-of-plane component).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlasticState {
    pub plastic_strain: Vec<f64>,
    pub gamma: f64,
}

impl PlasticState {
    pub fn initial(dim: usize) -> Self {
        let n = if dim == 1 { 1 } else { 3 };
        Self { plastic_strain: vec![0.0; n], gamma: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMapOutcome {
    /// Principal stresses, same length and order as the input strains.
    pub stress: Vec<f64>,
    pub state: PlasticState,
    pub delta_gamma: f64,
    /// Yield function at the returned stress and updated hardening variable.
    pub yield_value: f64,
}

/// Tolerance on the yield function, relative to the initial yield stress.
pub const YIELD_TOL_REL: f64 = 1e-10;
const MAX_NEWTON: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMises {
    pub elastic: ElasticParams,
    pub hardening: HardeningLaw,
}

impl VonMises {
    pub fn new(elastic: ElasticParams, hardening: HardeningLaw) -> Result<Self, MaterialError> {
        elastic.validate()?;
        hardening.validate()?;
        Ok(Self { elastic, hardening })
    }

    pub fn yield_tol(&self) -> f64 {
        YIELD_TOL_REL * self.hardening.initial_yield()
    }

    /// Solves `q_trial - stiffness * dg - sigma_y(gamma + dg) = 0` for `dg >= 0`.
    /// Closed form for linear hardening, bracketed Newton otherwise.
    fn plastic_multiplier(&self, q_trial: f64, stiffness: f64, gamma: f64) -> Result<f64, MaterialError> {
        let law = &self.hardening;
        if let HardeningLaw::Linear { h_iso, .. } = *law {
            let f_trial = q_trial - law.eval(gamma);
            return Ok(f_trial / (stiffness + h_iso));
        }
        let g = |dg: f64| q_trial - stiffness * dg - law.eval(gamma + dg);
        let tol = 1e-3 * self.yield_tol();
        let (mut lo, mut hi) = (0.0, q_trial / stiffness);
        let mut x = 0.0;
        let mut gx = g(x);
        for _ in 0..MAX_NEWTON {
            if gx.abs() <= tol {
                return Ok(x);
            }
            if gx > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let dg = -stiffness - law.slope(gamma + x);
            let newton = x - gx / dg;
            x = if newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            gx = g(x);
            if hi - lo <= f64::EPSILON * hi.abs().max(1e-300) {
                return Ok(x);
            }
        }
        if gx.abs() <= tol {
            Ok(x)
        } else {
            Err(MaterialError::ReturnMapDiverged { iterations: MAX_NEWTON, residual: gx })
        }
    }

    /// Backward-Euler return map in principal space.
    ///
    /// One strain gives the uniaxial rod law (`f = |sigma| - sigma_y`). Two
    /// strains are plane strain (third principal strain zero). Three strains
    /// are the full 3D state.
    pub fn return_map(&self, total_principal: &[f64], state: &PlasticState) -> Result<ReturnMapOutcome, MaterialError> {
        match total_principal.len() {
            1 => self.return_map_rod(total_principal[0], state),
            2 | 3 => self.return_map_principal(total_principal, state),
            n => Err(MaterialError::Dimension(n)),
        }
    }

    fn return_map_rod(&self, strain: f64, state: &PlasticState) -> Result<ReturnMapOutcome, MaterialError> {
        let e = self.elastic.e;
        let ep = state.plastic_strain[0];
        let sigma_trial = e * (strain - ep);
        let f_trial = sigma_trial.abs() - self.hardening.eval(state.gamma);
        if f_trial <= self.yield_tol() {
            return Ok(ReturnMapOutcome {
                stress: vec![sigma_trial],
                state: state.clone(),
                delta_gamma: 0.0,
                yield_value: f_trial,
            });
        }
        let dg = self.plastic_multiplier(sigma_trial.abs(), e, state.gamma)?;
        let sign = sigma_trial.signum();
        let sigma = sigma_trial - e * dg * sign;
        let new_state = PlasticState { plastic_strain: vec![ep + dg * sign], gamma: state.gamma + dg };
        let f = sigma.abs() - self.hardening.eval(new_state.gamma);
        Ok(ReturnMapOutcome { stress: vec![sigma], state: new_state, delta_gamma: dg, yield_value: f })
    }

    fn return_map_principal(&self, total: &[f64], state: &PlasticState) -> Result<ReturnMapOutcome, MaterialError> {
        let d = total.len();
        let (lambda, mu) = (self.elastic.lambda(), self.elastic.mu());
        let mut full = [0.0; 3];
        full[..d].copy_from_slice(total);
        let ep = &state.plastic_strain;
        let ee: Vec<f64> = (0..3).map(|i| full[i] - ep[i]).collect();
        let tr: f64 = ee.iter().sum();
        let sigma_trial: Vec<f64> = ee.iter().map(|v| lambda * tr + 2.0 * mu * v).collect();
        let mean = sigma_trial.iter().sum::<f64>() / 3.0;
        let s_trial: Vec<f64> = sigma_trial.iter().map(|v| v - mean).collect();
        let s_norm = s_trial.iter().map(|v| v * v).sum::<f64>().sqrt();
        let q_trial = (1.5_f64).sqrt() * s_norm;
        let f_trial = q_trial - self.hardening.eval(state.gamma);
        if f_trial <= self.yield_tol() {
            return Ok(ReturnMapOutcome {
                stress: sigma_trial[..d].to_vec(),
                state: state.clone(),
                delta_gamma: 0.0,
                yield_value: f_trial,
            });
        }
        let dg = self.plastic_multiplier(q_trial, 3.0 * mu, state.gamma)?;
        let k = (1.5_f64).sqrt() * dg;
        let n: Vec<f64> = s_trial.iter().map(|v| v / s_norm).collect();
        let stress: Vec<f64> = (0..3).map(|i| sigma_trial[i] - 2.0 * mu * k * n[i]).collect();
        let new_ep: Vec<f64> = (0..3).map(|i| ep[i] + k * n[i]).collect();
        let gamma = state.gamma + dg;
        let smean = stress.iter().sum::<f64>() / 3.0;
        let q = (1.5_f64).sqrt() * stress.iter().map(|v| (v - smean).powi(2)).sum::<f64>().sqrt();
        Ok(ReturnMapOutcome {
            stress: stress[..d].to_vec(),
            state: PlasticState { plastic_strain: new_ep, gamma },
            delta_gamma: dg,
            yield_value: q - self.hardening.eval(gamma),
        })
    }

    /// Tensor radial return for the FE solver. `strain` is a 3D tensor or a 2D
    /// plane-strain tensor. Returns the stress (same dimension as the strain),
    /// the algorithmic tangent in Voigt form with engineering shear strains
    /// and the updated state.
    pub fn update_tensor(&self, strain: &SymTensor, state: &TensorPlasticState) -> Result<TensorResponse, MaterialError> {
        let (lambda, mu) = (self.elastic.lambda(), self.elastic.mu());
        let kappa = self.elastic.bulk();
        let eps = to_voigt3(strain);
        let ee: [f64; 6] = std::array::from_fn(|i| eps[i] - state.plastic_strain[i]);
        let tr = ee[0] + ee[1] + ee[2];
        let mut sigma_trial = [0.0; 6];
        for i in 0..3 {
            sigma_trial[i] = lambda * tr + 2.0 * mu * ee[i];
            sigma_trial[i + 3] = 2.0 * mu * ee[i + 3];
        }
        let mean = (sigma_trial[0] + sigma_trial[1] + sigma_trial[2]) / 3.0;
        let mut s_trial = sigma_trial;
        for v in s_trial.iter_mut().take(3) {
            *v -= mean;
        }
        let s_norm = tensor_norm(&s_trial);
        let q_trial = (1.5_f64).sqrt() * s_norm;
        let f_trial = q_trial - self.hardening.eval(state.gamma);

        let mut c = elastic_voigt(lambda, mu);
        if f_trial <= self.yield_tol() {
            return Ok(TensorResponse::new(strain.dim(), sigma_trial, c, state.clone(), 0.0, f_trial));
        }
        let dg = self.plastic_multiplier(q_trial, 3.0 * mu, state.gamma)?;
        let k = (1.5_f64).sqrt() * dg;
        let n: [f64; 6] = std::array::from_fn(|i| s_trial[i] / s_norm);
        let stress: [f64; 6] = std::array::from_fn(|i| sigma_trial[i] - 2.0 * mu * k * n[i]);
        let mut new_state = state.clone();
        for (ep, ni) in new_state.plastic_strain.iter_mut().zip(&n) {
            *ep += k * ni;
        }
        new_state.gamma += dg;
        let h = self.hardening.slope(new_state.gamma);
        let a = 1.0 - 3.0 * mu * dg / q_trial;
        let b = 6.0 * mu * mu * (dg / q_trial - 1.0 / (3.0 * mu + h));
        c = SMatrix::<f64, 6, 6>::zeros();
        for i in 0..6 {
            for j in 0..6 {
                let one = if i < 3 && j < 3 { 1.0 } else { 0.0 };
                let isym = if i == j {
                    if i < 3 {
                        1.0
                    } else {
                        0.5
                    }
                } else {
                    0.0
                };
                c[(i, j)] = kappa * one + 2.0 * mu * a * (isym - one / 3.0) + b * n[i] * n[j];
            }
        }
        let smean = (stress[0] + stress[1] + stress[2]) / 3.0;
        let mut s = stress;
        for v in s.iter_mut().take(3) {
            *v -= smean;
        }
        let f = (1.5_f64).sqrt() * tensor_norm(&s) - self.hardening.eval(new_state.gamma);
        Ok(TensorResponse::new(strain.dim(), stress, c, new_state, dg, f))
    }
}

/// Free function form of [`VonMises::return_map`].
pub fn vonmises_return_map(
    total_principal: &[f64],
    state: &PlasticState,
    elastic: &ElasticParams,
    law: &HardeningLaw,
) -> Result<ReturnMapOutcome, MaterialError> {
    VonMises::new(*elastic, *law)?.return_map(total_principal, state)
}

/// Plastic strain stored as a 3D tensor in Voigt order with tensor (not
/// engineering) shear components.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TensorPlasticState {
    pub plastic_strain: [f64; 6],
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct TensorResponse {
    pub stress: SymTensor,
    pub tangent: DMatrix<f64>,
    pub state: TensorPlasticState,
    pub delta_gamma: f64,
    pub yield_value: f64,
}

impl TensorResponse {
    fn new(dim: usize, stress: [f64; 6], c: SMatrix<f64, 6, 6>, state: TensorPlasticState, dg: f64, f: f64) -> Self {
        let (stress, tangent) = if dim == 2 {
            let idx = [0, 1, 3];
            (
                SymTensor::new_2d(stress[0], stress[1], stress[3]),
                DMatrix::from_fn(3, 3, |i, j| c[(idx[i], idx[j])]),
            )
        } else {
            (SymTensor::new_3d(stress), DMatrix::from_fn(6, 6, |i, j| c[(i, j)]))
        };
        Self { stress, tangent, state, delta_gamma: dg, yield_value: f }
    }
}

fn to_voigt3(t: &SymTensor) -> [f64; 6] {
    std::array::from_fn(|k| {
        let (i, j) = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)][k];
        if i < t.dim() && j < t.dim() {
            t.get(i, j)
        } else {
            0.0
        }
    })
}

fn tensor_norm(v: &[f64; 6]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + 2.0 * (v[3] * v[3] + v[4] * v[4] + v[5] * v[5])).sqrt()
}

fn elastic_voigt(lambda: f64, mu: f64) -> SMatrix<f64, 6, 6> {
    let mut c = SMatrix::<f64, 6, 6>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = lambda;
        }
        c[(i, i)] += 2.0 * mu;
        c[(i + 3, i + 3)] = mu;
    }
    c
}

/// Cauchy stress of the compressible neo-Hookean law
/// `sigma = lambda/(2J) (J^2 - 1) I + mu/J (b - I)`.
pub fn neo_hookean_stress(b: &SymTensor, j: f64, p: &ElasticParams) -> Result<SymTensor, MaterialError> {
    if !(j > 0.0) {
        return Err(MaterialError::NonPositiveJacobian(j));
    }
    let min_eig = spectral_decompose(b).values.last().copied().unwrap_or(0.0);
    if !(min_eig > 0.0) {
        return Err(MaterialError::NotPositiveDefinite(min_eig));
    }
    let (lambda, mu) = (p.lambda(), p.mu());
    let iso = 0.5 * lambda / j * (j * j - 1.0);
    let id = SymTensor::identity(b.dim());
    Ok(id.scale(iso).add(&b.sub(&id).scale(mu / j)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rod() -> VonMises {
        VonMises::new(ElasticParams::new(700.0, 0.3).unwrap(), HardeningLaw::Linear { sigma_y0: 100.0, h_iso: 10.0 }).unwrap()
    }

    fn exp2d() -> VonMises {
        VonMises::new(
            ElasticParams::new(1.0, 0.33).unwrap(),
            HardeningLaw::Exponential { y0: 0.05, offset: 2e-5, exponent: 0.3 },
        )
        .unwrap()
    }

    #[test]
    fn lame_constants() {
        let p = ElasticParams::new(700.0, 0.499).unwrap();
        assert!((p.lambda() - 700.0 * 0.499 / (1.499 * 0.002)).abs() < 1e-6);
        assert!((p.mu() - 700.0 / 2.998).abs() < 1e-12);
        assert!(ElasticParams::new(1.0, 0.5).is_err());
        assert!(ElasticParams::new(-1.0, 0.2).is_err());
    }

    #[test]
    fn yield_stress_examples() {
        let lin = HardeningLaw::Linear { sigma_y0: 100.0, h_iso: 10.0 };
        assert_eq!(yield_stress(&lin, 0.0).unwrap(), 100.0);
        let e1 = HardeningLaw::Exponential { y0: 0.05, offset: 2e-5, exponent: 0.3 };
        let expected = 0.05 * (1.0 + (2e-5_f64).powf(0.3));
        assert!((yield_stress(&e1, 0.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.0519466).abs() < 1e-7);
        let e2 = HardeningLaw::Exponential { y0: 0.3, offset: 2e-5, exponent: 0.1 };
        let expected = 0.3 + 0.3 * (0.01002_f64).powf(0.1);
        assert!((yield_stress(&e2, 0.01).unwrap() - expected).abs() < 1e-15);
        assert!(matches!(yield_stress(&lin, -1e-3), Err(MaterialError::NegativeGamma(_))));
    }

    #[test]
    fn rod_elastic_and_plastic_examples() {
        let m = rod();
        let out = m.return_map(&[0.1], &PlasticState::initial(1)).unwrap();
        assert!((out.stress[0] - 70.0).abs() < 1e-12);
        assert_eq!(out.delta_gamma, 0.0);

        let out = m.return_map(&[0.2], &PlasticState::initial(1)).unwrap();
        let ep = 40.0 / 710.0;
        assert!((out.state.plastic_strain[0] - ep).abs() < 1e-14);
        assert!((out.stress[0] - 700.0 * (0.2 - ep)).abs() < 1e-10);
        assert!((out.stress[0] - 100.563).abs() < 1e-3);
        assert!(out.yield_value.abs() <= m.yield_tol());
    }

    #[test]
    fn rod_unloads_elastically() {
        let m = rod();
        let loaded = m.return_map(&[0.2], &PlasticState::initial(1)).unwrap();
        let unloaded = m.return_map(&[0.15], &loaded.state).unwrap();
        assert_eq!(unloaded.delta_gamma, 0.0);
        assert!((loaded.stress[0] - unloaded.stress[0] - 700.0 * 0.05).abs() < 1e-10);
    }

    #[test]
    fn exponential_return_satisfies_consistency() {
        let m = exp2d();
        let out = m.return_map(&[0.1, -0.03], &PlasticState::initial(2)).unwrap();
        assert!(out.delta_gamma > 0.0);
        assert!(out.yield_value.abs() <= m.yield_tol());
        let tr: f64 = out.state.plastic_strain.iter().sum();
        assert!(tr.abs() < 1e-12);
    }

    #[test]
    fn offset_free_exponential_law_converges() {
        let m = VonMises::new(
            ElasticParams::new(1.0, 0.33).unwrap(),
            HardeningLaw::Exponential { y0: 0.05, offset: 0.0, exponent: 0.3 },
        )
        .unwrap();
        let out = m.return_map(&[0.08, -0.02, 0.01], &PlasticState::initial(3)).unwrap();
        assert!(out.delta_gamma > 0.0);
        assert!(out.yield_value.abs() <= m.yield_tol());
    }

    #[test]
    fn neo_hookean_examples() {
        let p = ElasticParams::new(700.0, 0.3).unwrap();
        let s = neo_hookean_stress(&SymTensor::identity(3), 1.0, &p).unwrap();
        assert_eq!(s.max_abs(), 0.0);
        let b = SymTensor::diagonal(&[2.0, 0.5, 1.0]).unwrap();
        let s = neo_hookean_stress(&b, 1.0, &p).unwrap();
        let mu = p.mu();
        assert!((s.get(0, 0) - mu).abs() < 1e-12);
        assert!((s.get(1, 1) + 0.5 * mu).abs() < 1e-12);
        assert!(s.get(2, 2).abs() < 1e-12);

        // plane strain, nearly incompressible
        let p = ElasticParams::new(700.0, 0.499).unwrap();
        let b = SymTensor::new_2d(1.21, 0.826446, 0.0);
        let j = (1.21_f64 * 0.826446).sqrt();
        let s = neo_hookean_stress(&b, j, &p).unwrap();
        let iso = 0.5 * p.lambda() / j * (j * j - 1.0);
        assert_eq!(s.get(0, 0), iso + p.mu() / j * (1.21 - 1.0));
        assert_eq!(s.get(1, 1), iso + p.mu() / j * (0.826446 - 1.0));

        assert!(neo_hookean_stress(&b, 0.0, &p).is_err());
        let bad = SymTensor::new_2d(1.0, -0.5, 0.0);
        assert!(matches!(neo_hookean_stress(&bad, 1.0, &p), Err(MaterialError::NotPositiveDefinite(_))));
    }

    #[test]
    fn tensor_update_matches_principal_update_on_diagonal_strain() {
        let m = exp2d();
        let eps = SymTensor::new_3d([0.09, -0.02, 0.01, 0.0, 0.0, 0.0]);
        let t = m.update_tensor(&eps, &TensorPlasticState::default()).unwrap();
        let p = m.return_map(&[0.09, -0.02, 0.01], &PlasticState::initial(3)).unwrap();
        for i in 0..3 {
            assert!((t.stress.get(i, i) - p.stress[i]).abs() < 1e-14);
        }
        assert!((t.delta_gamma - p.delta_gamma).abs() < 1e-14);
    }

    /// Finite differences of the stress update against the analytic algorithmic tangent.
    #[test]
    fn tensor_tangent_matches_finite_differences() {
        let m = exp2d();
        let state = TensorPlasticState { plastic_strain: [0.01, -0.004, -0.006, 0.002, 0.0, 0.0], gamma: 0.01 };
        for eps in [SymTensor::new_2d(0.06, -0.01, 0.03), SymTensor::new_2d(0.012, 0.0, 0.001)] {
            let base = m.update_tensor(&eps, &state).unwrap();
            let c0 = eps.components();
            let h = 1e-7;
            for j in 0..3 {
                let mut cp = c0.clone();
                let mut cm = c0.clone();
                // engineering shear: perturb gamma_12 = 2 eps_12
                let step = if j == 2 { 0.5 * h } else { h };
                cp[j] += step;
                cm[j] -= step;
                let sp = m.update_tensor(&SymTensor::from_components(2, &cp).unwrap(), &state).unwrap().stress.components();
                let sm = m.update_tensor(&SymTensor::from_components(2, &cm).unwrap(), &state).unwrap().stress.components();
                for i in 0..3 {
                    let fd = (sp[i] - sm[i]) / (2.0 * h);
                    assert!((fd - base.tangent[(i, j)]).abs() < 1e-6, "({i},{j}) fd {fd} vs {}", base.tangent[(i, j)]);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn kuhn_tucker_holds(e1 in -0.2..0.2f64, e2 in -0.2..0.2f64, e3 in -0.2..0.2f64) {
            let m = exp2d();
            let out = m.return_map(&[e1, e2, e3], &PlasticState::initial(3)).unwrap();
            prop_assert!(out.delta_gamma >= 0.0);
            prop_assert!(out.yield_value <= m.yield_tol());
            prop_assert!((out.delta_gamma * out.yield_value).abs() <= m.yield_tol());
            let tr: f64 = out.state.plastic_strain.iter().sum();
            prop_assert!(tr.abs() < 1e-12);
        }

        #[test]
        fn permuting_principal_strains_permutes_stress(e1 in -0.2..0.2f64, e2 in -0.2..0.2f64, e3 in -0.2..0.2f64) {
            let m = exp2d();
            let a = m.return_map(&[e1, e2, e3], &PlasticState::initial(3)).unwrap();
            let b = m.return_map(&[e3, e1, e2], &PlasticState::initial(3)).unwrap();
            prop_assert!((a.stress[0] - b.stress[1]).abs() < 1e-12);
            prop_assert!((a.stress[1] - b.stress[2]).abs() < 1e-12);
            prop_assert!((a.stress[2] - b.stress[0]).abs() < 1e-12);
        }
    }
}
