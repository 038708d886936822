//! Material adapters for the element loop.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::material::{neo_hookean_stress, ElasticParams, MaterialError, TensorPlasticState, VonMises};
use crate::surrogate::{GaussHistory, HyperFnnModel, PodFnnSurrogate, SurrogateError};
use crate::tensor::SymTensor;

#[derive(Debug, Error)]
pub enum ConstitutiveError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error("non-positive deformation Jacobian {0:e}")]
    Jacobian(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kinematics {
    /// Flux is the Voigt stress, tangent `d sigma / d eps` with engineering
    /// shear strains.
    SmallStrain,
    /// Flux is the first Piola-Kirchhoff stress flattened row-major, tangent
    /// `dP / dF`.
    FiniteStrain,
}

#[derive(Debug, Clone)]
pub struct PointResponse<S> {
    pub flux: DVector<f64>,
    pub tangent: Option<DMatrix<f64>>,
    pub state: S,
}

pub trait Constitutive: Sync {
    type State: Clone + Send + Sync + std::fmt::Debug;

    fn kinematics(&self) -> Kinematics;

    fn initial_state(&self, dim: usize) -> Self::State;

    /// Response to the displacement gradient `grad_u` (`dim x dim`, reference
    /// coordinates) from the last converged state.
    fn evaluate(&self, grad_u: &DMatrix<f64>, state: &Self::State, tangent: bool) -> Result<PointResponse<Self::State>, ConstitutiveError>;
}

pub fn small_strain_of(grad_u: &DMatrix<f64>) -> SymTensor {
    let d = grad_u.nrows();
    SymTensor::from_matrix(&DMatrix::from_fn(d, d, |i, j| 0.5 * (grad_u[(i, j)] + grad_u[(j, i)]))).expect("2D or 3D gradient")
}

fn voigt(t: &SymTensor) -> DVector<f64> {
    DVector::from_vec(t.components())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearElastic(pub ElasticParams);

impl Constitutive for LinearElastic {
    type State = ();

    fn kinematics(&self) -> Kinematics {
        Kinematics::SmallStrain
    }

    fn initial_state(&self, _dim: usize) {}

    fn evaluate(&self, grad_u: &DMatrix<f64>, _state: &(), tangent: bool) -> Result<PointResponse<()>, ConstitutiveError> {
        let d = grad_u.nrows();
        let (l, mu) = (self.0.lambda(), self.0.mu());
        let n = if d == 2 { 3 } else { 6 };
        let c = DMatrix::from_fn(n, n, |i, j| {
            if i < d && j < d {
                l + if i == j { 2.0 * mu } else { 0.0 }
            } else if i == j {
                mu
            } else {
                0.0
            }
        });
        let mut e = voigt(&small_strain_of(grad_u));
        for k in d..n {
            e[k] *= 2.0;
        }
        Ok(PointResponse { flux: &c * e, tangent: tangent.then_some(c), state: () })
    }
}

/// The von Mises reference model through the tensor radial return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePlasticity(pub VonMises);

impl Constitutive for ReferencePlasticity {
    type State = TensorPlasticState;

    fn kinematics(&self) -> Kinematics {
        Kinematics::SmallStrain
    }

    fn initial_state(&self, _dim: usize) -> TensorPlasticState {
        TensorPlasticState::default()
    }

    fn evaluate(&self, grad_u: &DMatrix<f64>, state: &TensorPlasticState, tangent: bool) -> Result<PointResponse<TensorPlasticState>, ConstitutiveError> {
        let r = self.0.update_tensor(&small_strain_of(grad_u), state)?;
        Ok(PointResponse { flux: voigt(&r.stress), tangent: tangent.then_some(r.tangent), state: r.state })
    }
}

/// The POD surrogate with per-point strain history.
#[derive(Debug, Clone, Copy)]
pub struct SurrogatePlasticity<'a> {
    pub model: &'a PodFnnSurrogate,
    /// Use the closed-form tangent where principal strains are distinct.
    pub analytic_tangent: bool,
}

impl Constitutive for SurrogatePlasticity<'_> {
    type State = GaussHistory;

    fn kinematics(&self) -> Kinematics {
        Kinematics::SmallStrain
    }

    /// The undeformed configuration counts as the first committed step.
    fn initial_state(&self, dim: usize) -> GaussHistory {
        GaussHistory::new(dim).commit(&vec![0.0; dim])
    }

    fn evaluate(&self, grad_u: &DMatrix<f64>, state: &GaussHistory, tangent: bool) -> Result<PointResponse<GaussHistory>, ConstitutiveError> {
        let eps = small_strain_of(grad_u);
        let r = self.model.stress(&eps, state)?;
        let t = if !tangent {
            None
        } else if self.analytic_tangent {
            match self.model.tangent_analytic(&eps, state)? {
                Some(t) => Some(t),
                None => Some(self.model.tangent(&eps, state)?),
            }
        } else {
            Some(self.model.tangent(&eps, state)?)
        };
        Ok(PointResponse { flux: voigt(&r.stress), tangent: t, state: r.trial })
    }
}

/// Central-difference `dP/dF` for a stateless finite-strain law.
fn fd_piola_tangent(
    f: &DMatrix<f64>,
    piola: impl Fn(&DMatrix<f64>) -> Result<DMatrix<f64>, ConstitutiveError>,
) -> Result<DMatrix<f64>, ConstitutiveError> {
    let d = f.nrows();
    let h = 1e-6;
    let mut t = DMatrix::zeros(d * d, d * d);
    for c in 0..d * d {
        let mut fp = f.clone();
        let mut fm = f.clone();
        fp[(c / d, c % d)] += h;
        fm[(c / d, c % d)] -= h;
        let pp = piola(&fp)?;
        let pm = piola(&fm)?;
        for r in 0..d * d {
            t[(r, c)] = (pp[(r / d, r % d)] - pm[(r / d, r % d)]) / (2.0 * h);
        }
    }
    Ok(t)
}

fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    let d = m.nrows();
    DVector::from_fn(d * d, |r, _| m[(r / d, r % d)])
}

/// `P = J sigma F^-T` from a Cauchy stress law of `(b, J)`.
fn piola_from(f: &DMatrix<f64>, cauchy: impl Fn(&SymTensor, f64) -> Result<SymTensor, ConstitutiveError>) -> Result<DMatrix<f64>, ConstitutiveError> {
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(ConstitutiveError::Jacobian(j));
    }
    let b = SymTensor::from_matrix(&(f * f.transpose())).expect("2D or 3D");
    let sigma = cauchy(&b, j)?.to_matrix();
    let finv_t = f.clone().try_inverse().ok_or(ConstitutiveError::Jacobian(j))?.transpose();
    Ok(sigma * finv_t * j)
}

/// Analytic compressible neo-Hookean law at finite strain (plane strain in 2D).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeoHookean(pub ElasticParams);

impl NeoHookean {
    fn piola(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>, ConstitutiveError> {
        piola_from(f, |b, j| Ok(neo_hookean_stress(b, j, &self.0)?))
    }
}

impl Constitutive for NeoHookean {
    type State = ();

    fn kinematics(&self) -> Kinematics {
        Kinematics::FiniteStrain
    }

    fn initial_state(&self, _dim: usize) {}

    fn evaluate(&self, grad_u: &DMatrix<f64>, _state: &(), tangent: bool) -> Result<PointResponse<()>, ConstitutiveError> {
        let d = grad_u.nrows();
        let f = grad_u + DMatrix::<f64>::identity(d, d);
        let p = self.piola(&f)?;
        let t = if tangent { Some(fd_piola_tangent(&f, |g| self.piola(g))?) } else { None };
        Ok(PointResponse { flux: flatten(&p), tangent: t, state: () })
    }
}

/// The hyperelastic network at finite strain.
#[derive(Debug, Clone, Copy)]
pub struct HyperSurrogate<'a>(pub &'a HyperFnnModel);

impl HyperSurrogate<'_> {
    fn piola(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>, ConstitutiveError> {
        piola_from(f, |b, j| Ok(self.0.stress(b, j)?.stress))
    }
}

impl Constitutive for HyperSurrogate<'_> {
    type State = ();

    fn kinematics(&self) -> Kinematics {
        Kinematics::FiniteStrain
    }

    fn initial_state(&self, _dim: usize) {}

    fn evaluate(&self, grad_u: &DMatrix<f64>, _state: &(), tangent: bool) -> Result<PointResponse<()>, ConstitutiveError> {
        let d = grad_u.nrows();
        let f = grad_u + DMatrix::<f64>::identity(d, d);
        let p = self.piola(&f)?;
        let t = if tangent { Some(fd_piola_tangent(&f, |g| self.piola(g))?) } else { None };
        Ok(PointResponse { flux: flatten(&p), tangent: t, state: () })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neo_hookean_is_stress_free_at_rest() {
        let m = NeoHookean(ElasticParams::new(700.0, 0.499).unwrap());
        let r = m.evaluate(&DMatrix::zeros(2, 2), &(), true).unwrap();
        assert!(r.flux.amax() < 1e-9);
        // small-strain limit: dP/dF at F = I is the isotropic elasticity tensor
        let t = r.tangent.unwrap();
        let (l, mu) = (m.0.lambda(), m.0.mu());
        assert!((t[(0, 0)] - (l + 2.0 * mu)).abs() < 1e-4 * l);
        assert!((t[(0, 3)] - l).abs() < 1e-4 * l);
        assert!((t[(1, 1)] - mu).abs() < 1e-3 * mu);
        assert!((t[(1, 2)] - mu).abs() < 1e-3 * mu);
    }

    #[test]
    fn inverted_deformation_rejected() {
        let m = NeoHookean(ElasticParams::new(1.0, 0.3).unwrap());
        let g = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 0.0]);
        assert!(matches!(m.evaluate(&g, &(), false), Err(ConstitutiveError::Jacobian(_))));
    }
}
