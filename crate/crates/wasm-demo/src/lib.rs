//! Browser demo: reference curves and a tiny surrogate, exported to JS as
//! JSON strings. Everything runs single-threaded.

use podfnn::datagen::{drive_cycle_1d, drive_patch, CyclicPath1d, LoadingPath};
use podfnn::fnn::TrainOptions;
use podfnn::material::{ElasticParams, HardeningLaw, VonMises};
use podfnn::pipeline::{eval_1d, Eval1dConfig, MaterialConfig, NetworkConfig};
use serde::Serialize;
use thiserror::Error;
use wasm_bindgen::prelude::*;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Material(#[from] podfnn::material::MaterialError),
    #[error(transparent)]
    Pipeline(#[from] podfnn::pipeline::PipelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniaxialCurve {
    pub strain: Vec<f64>,
    pub stress: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrincipalPath {
    /// Per step, principal strains sorted along the path direction.
    pub strain: Vec<[f64; 2]>,
    pub stress: Vec<[f64; 2]>,
    pub eps_acc: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurrogateOverlay {
    pub strain: Vec<f64>,
    pub reference: Vec<f64>,
    pub predicted: Vec<f64>,
    pub train_mse: f64,
    pub epochs: usize,
    pub nrmse: f64,
}

/// The 2D benchmark material with a user-set yield stress and exponent.
fn benchmark(y0: f64, exponent: f64) -> Result<VonMises, DemoError> {
    let elastic = ElasticParams::new(1.0, 0.33)?;
    Ok(VonMises::new(elastic, HardeningLaw::Exponential { y0, offset: 2e-5, exponent })?)
}

/// Rod cycle `0 -> +peak -> -peak -> 0` of the benchmark material.
pub fn uniaxial(y0: f64, exponent: f64, peak: f64, steps_per_leg: usize) -> Result<UniaxialCurve, DemoError> {
    if !peak.is_finite() || peak <= 0.0 || steps_per_leg == 0 {
        return Err(DemoError::Input("peak strain and steps must be positive".into()));
    }
    let path = CyclicPath1d { increment: peak / steps_per_leg as f64, steps_per_leg };
    let pair = drive_cycle_1d(&path, &benchmark(y0, exponent)?)?;
    Ok(UniaxialCurve { strain: pair.strain.row(0).iter().copied().collect(), stress: pair.stress.row(0).iter().copied().collect() })
}

/// One radial load-unload path in the principal strain plane.
pub fn principal_path(angle_deg: f64, radius: f64, np: usize) -> Result<PrincipalPath, DemoError> {
    let path = LoadingPath { dim: 2, radius, phi: angle_deg.to_radians(), theta: 0.0, np, unload: true };
    path.validate().map_err(|e| DemoError::Input(e.to_string()))?;
    let pair = drive_patch(&path, &benchmark(0.05, 0.3)?)?;
    let col = |m: &nalgebra::DMatrix<f64>, r: usize, t: usize| [m[(r, t)], m[(r + 1, t)]];
    Ok(PrincipalPath {
        strain: (0..pair.len()).map(|t| col(&pair.strain, 0, t)).collect(),
        stress: (0..pair.len()).map(|t| col(&pair.stress, 0, t)).collect(),
        eps_acc: (0..pair.len()).map(|t| col(&pair.strain, 2, t)).collect(),
    })
}

/// Trains a `2-w-w-1` surrogate on the rod cycles and replays a held-out cycle.
pub fn train_overlay(width: usize, epochs: usize, test_increment: f64) -> Result<SurrogateOverlay, DemoError> {
    if width == 0 || epochs == 0 {
        return Err(DemoError::Input("width and epochs must be positive".into()));
    }
    let mut train = TrainOptions::default();
    train.lm.max_epochs = epochs;
    let cfg = Eval1dConfig { material: MaterialConfig::rod(), test_increment, network: NetworkConfig::new(&[width, width], train), ..Default::default() };
    let report = eval_1d(&cfg, true)?;
    Ok(SurrogateOverlay {
        strain: report.test_curve.iter().map(|p| p.strain).collect(),
        reference: report.test_curve.iter().map(|p| p.reference).collect(),
        predicted: report.test_curve.iter().map(|p| p.predicted).collect(),
        train_mse: report.train.final_mse,
        epochs: report.train.history.len(),
        nrmse: report.nrmse,
    })
}

fn to_js<T: Serialize>(r: Result<T, DemoError>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = uniaxialCurve)]
pub fn uniaxial_curve(y0: f64, exponent: f64, peak: f64, steps_per_leg: usize) -> Result<String, JsError> {
    to_js(uniaxial(y0, exponent, peak, steps_per_leg))
}

#[wasm_bindgen(js_name = principalPath)]
pub fn principal_path_js(angle_deg: f64, radius: f64, np: usize) -> Result<String, JsError> {
    to_js(principal_path(angle_deg, radius, np))
}

#[wasm_bindgen(js_name = trainSurrogate)]
pub fn train_surrogate(width: usize, epochs: usize, test_increment: f64) -> Result<String, JsError> {
    to_js(train_overlay(width, epochs, test_increment))
}
