//! End-to-end experiments: configuration records and the runs behind the
//! command-line verbs.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{
    assemble_training_set, drive_all, drive_cycle_1d, gen_paths_2d, gen_paths_3d, hyperelastic_grid, linspace, sha256_hex, write_csv,
    CyclicPath1d, DatagenError, HyperDataset, HyperGridSpec, SequencePair, TrainingSet,
};
use crate::fem::{
    builtin_problem, newton_solve, BuiltinOptions, Constitutive, FemError, HyperSurrogate, LoadMeasure, NeoHookean, Problem,
    ReferencePlasticity, SolveReport, SolverOptions, SurrogatePlasticity,
};
use crate::fnn::{nguyen_widrow_init, stalled_result, train, FnnError, FnnModel, TrainOptions, TrainReport};
use crate::lm::StopReason;
use crate::material::{ElasticParams, HardeningLaw, MaterialError, VonMises};
use crate::scaling::MinMaxScaler;
use crate::surrogate::{fit_podfnn, HyperFnnModel, PodFnnFit, PodFnnSurrogate, Provenance, SurrogateError, SurrogateFile};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Fnn(#[from] FnnError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

impl PipelineError {
    /// Bad input as opposed to a numerical failure.
    pub fn is_validation(&self) -> bool {
        match self {
            PipelineError::Validation(_) => true,
            PipelineError::Material(e) => matches!(e, MaterialError::InvalidElastic { .. } | MaterialError::InvalidHardening(_)),
            PipelineError::Datagen(e) => matches!(e, DatagenError::InvalidPath(_) | DatagenError::Empty | DatagenError::DimensionMismatch { .. }),
            PipelineError::Fem(e) => matches!(e, FemError::Problem(_) | FemError::Mesh(_)),
            PipelineError::Fnn(e) => matches!(e, FnnError::Architecture(_)),
            PipelineError::Surrogate(SurrogateError::Dimension { .. }) => true,
            _ => false,
        }
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, PipelineError> {
    Err(PipelineError::Validation(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub elastic: ElasticParams,
    pub hardening: HardeningLaw,
}

impl MaterialConfig {
    /// Uniaxial rod: E = 700, sigma_y = 100, H = 10.
    pub fn rod() -> Self {
        Self { elastic: ElasticParams { e: 700.0, nu: 0.3 }, hardening: HardeningLaw::Linear { sigma_y0: 100.0, h_iso: 10.0 } }
    }

    /// The 2D benchmark material: E = 1, nu = 0.33 with exponential hardening.
    pub fn exponential() -> Self {
        Self {
            elastic: ElasticParams { e: 1.0, nu: 0.33 },
            hardening: HardeningLaw::Exponential { y0: 0.05, offset: 2e-5, exponent: 0.3 },
        }
    }

    /// The 3D benchmark material: E = 10, nu = 0.33, stiffer and flatter hardening.
    pub fn exponential_3d() -> Self {
        Self {
            elastic: ElasticParams { e: 10.0, nu: 0.33 },
            hardening: HardeningLaw::Exponential { y0: 0.3, offset: 2e-5, exponent: 0.1 },
        }
    }

    pub fn build(&self) -> Result<VonMises, PipelineError> {
        Ok(VonMises::new(self.elastic, self.hardening)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathsConfig {
    /// `n_angles` radial paths per radius in the principal-strain plane.
    Circles { radii: Vec<f64>, n_angles: usize, np: usize, unload: bool },
    Spheres { radius: f64, n_phi: usize, n_theta: usize, np: usize, unload: bool },
    /// Uniaxial `0 -> +P -> -P -> 0` cycles, one per increment.
    Cyclic1d { increments: Vec<f64>, steps_per_leg: usize },
}

impl PathsConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match self {
            PathsConfig::Circles { radii, n_angles, np, .. } => {
                if radii.is_empty() {
                    return invalid("paths.radii must not be empty");
                }
                if !radii.iter().all(|&r| positive(r)) {
                    return invalid("paths.radii must be positive");
                }
                if *n_angles == 0 {
                    return invalid("paths.n_angles must be at least 1");
                }
                if *np < 3 {
                    return invalid("paths.np must be at least 3");
                }
            }
            PathsConfig::Spheres { radius, n_phi, n_theta, np, .. } => {
                if !positive(*radius) {
                    return invalid("paths.radius must be positive");
                }
                if *n_phi == 0 || *n_theta == 0 {
                    return invalid("paths.n_phi and paths.n_theta must be at least 1");
                }
                if *np < 3 {
                    return invalid("paths.np must be at least 3");
                }
            }
            PathsConfig::Cyclic1d { increments, steps_per_leg } => {
                if increments.is_empty() || !increments.iter().all(|&d| positive(d)) {
                    return invalid("paths.increments must be a non-empty list of positive values");
                }
                if *steps_per_leg == 0 {
                    return invalid("paths.steps_per_leg must be at least 1");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub material: MaterialConfig,
    pub paths: PathsConfig,
    /// Drop the last (fully unloaded) point of every radial path. Mirror
    /// paths reach the same inputs there with different residual stresses.
    #[serde(default)]
    pub drop_unloaded_endpoint: bool,
}

impl DataConfig {
    /// 122 loading-unloading paths on circles of radius 0.1 and 0.075.
    pub fn circles_2d(np: usize) -> Self {
        Self {
            material: MaterialConfig::exponential(),
            paths: PathsConfig::Circles { radii: vec![0.1, 0.075], n_angles: 61, np, unload: true },
            drop_unloaded_endpoint: false,
        }
    }

    /// Loading-only paths on the sphere of radius 0.02.
    pub fn spheres_3d(n_phi: usize, n_theta: usize, np: usize) -> Self {
        Self {
            material: MaterialConfig::exponential_3d(),
            paths: PathsConfig::Spheres { radius: 0.02, n_phi, n_theta, np, unload: false },
            drop_unloaded_endpoint: false,
        }
    }

    /// Eleven cycles with increments from 0.02 to 0.03.
    pub fn cyclic_1d() -> Self {
        Self {
            material: MaterialConfig::rod(),
            paths: PathsConfig::Cyclic1d { increments: linspace(0.02, 0.03, 11), steps_per_leg: 10 },
            drop_unloaded_endpoint: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub dim: usize,
    pub n_paths: usize,
    pub points_per_path: usize,
    pub n_samples: usize,
    pub config: DataConfig,
    /// SHA-256 of the dataset CSV.
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub pairs: Vec<SequencePair>,
    pub set: TrainingSet,
    pub meta: DatasetMeta,
}

pub fn dataset_csv(set: &TrainingSet) -> Result<Vec<u8>, PipelineError> {
    let mut buf = Vec::new();
    write_csv(set, &mut buf)?;
    Ok(buf)
}

pub fn generate(cfg: &DataConfig, serial: bool) -> Result<Dataset, PipelineError> {
    cfg.paths.validate()?;
    if cfg.drop_unloaded_endpoint && !matches!(cfg.paths, PathsConfig::Circles { unload: true, .. } | PathsConfig::Spheres { unload: true, .. }) {
        return invalid("drop_unloaded_endpoint needs radial paths with unloading");
    }
    let material = cfg.material.build()?;
    let mut pairs: Vec<SequencePair> = match &cfg.paths {
        PathsConfig::Circles { radii, n_angles, np, unload } => drive_all(&gen_paths_2d(radii, *n_angles, *np, *unload), &material, serial)?,
        PathsConfig::Spheres { radius, n_phi, n_theta, np, unload } => {
            drive_all(&gen_paths_3d(*radius, *n_phi, *n_theta, *np, *unload), &material, serial)?
        }
        PathsConfig::Cyclic1d { increments, steps_per_leg } => increments
            .iter()
            .enumerate()
            .map(|(i, &increment)| {
                drive_cycle_1d(&CyclicPath1d { increment, steps_per_leg: *steps_per_leg }, &material)
                    .map_err(|source| DatagenError::Material { path: i, source })
            })
            .collect::<Result<_, _>>()?,
    };
    if cfg.drop_unloaded_endpoint {
        for p in &mut pairs {
            let n = p.len() - 1;
            p.strain = p.strain.columns(0, n).into_owned();
            p.stress = p.stress.columns(0, n).into_owned();
        }
    }
    let set = assemble_training_set(&pairs)?;
    let sha256 = sha256_hex(&dataset_csv(&set)?);
    let meta = DatasetMeta {
        dim: set.dim,
        n_paths: pairs.len(),
        points_per_path: pairs.iter().map(|p| p.len()).max().unwrap_or(0),
        n_samples: set.len(),
        config: cfg.clone(),
        sha256,
    };
    Ok(Dataset { pairs, set, meta })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub train: TrainOptions,
    /// Keep partially trained nets when the damping overflows.
    #[serde(default)]
    pub allow_stall: bool,
}

impl NetworkConfig {
    pub fn new(hidden: &[usize], train: TrainOptions) -> Self {
        Self { hidden: hidden.to_vec(), train, allow_stall: false }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return invalid("network.hidden must list positive layer widths");
        }
        self.train.lm.validate().map_err(PipelineError::Validation)
    }
}

pub fn train_podfnn(set: &TrainingSet, dataset_hash: Option<String>, net: &NetworkConfig, serial: bool) -> Result<PodFnnFit, PipelineError> {
    net.validate()?;
    let mut fit = fit_podfnn(set, &net.hidden, &net.train, net.allow_stall, serial)?;
    fit.surrogate.provenance.dataset_hash = dataset_hash;
    Ok(fit)
}

/// Trains one network on scaled data; a stall keeps the partial net when
/// allowed.
fn train_scaled(sizes: &[usize], x: &DMatrix<f64>, y: &DMatrix<f64>, net: &NetworkConfig, label: &str) -> Result<(FnnModel, TrainReport), PipelineError> {
    let init = nguyen_widrow_init(sizes, net.train.seed)?;
    match train(&init, x, y, &net.train, |r| log::debug!("{label} epoch {} mse {:e}", r.epoch, r.mse)) {
        Ok(out) => Ok(out),
        Err(err) => match stalled_result(&init, &err) {
            Some((model, mut report)) if net.allow_stall => {
                log::warn!("{label}: {err}");
                report.stop = StopReason::Stall;
                Ok((model, report))
            }
            _ => Err(err.into()),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperConfig {
    pub elastic: ElasticParams,
    #[serde(default)]
    pub grid: HyperGridSpec,
    pub network: NetworkConfig,
}

impl Default for HyperConfig {
    fn default() -> Self {
        let mut train = TrainOptions::default();
        train.lm.max_epochs = 1000;
        Self { elastic: ElasticParams { e: 700.0, nu: 0.499 }, grid: HyperGridSpec::default(), network: NetworkConfig::new(&[10], train) }
    }
}

pub fn hyper_dataset(cfg: &HyperConfig) -> Result<HyperDataset, PipelineError> {
    cfg.elastic.validate()?;
    for (name, axis) in [("j", cfg.grid.j), ("b11", cfg.grid.b11), ("b22", cfg.grid.b22), ("b12", cfg.grid.b12)] {
        if axis.2 == 0 || !(axis.0 <= axis.1) {
            return invalid(format!("grid.{name} must be (low, high, count) with low <= high and count >= 1"));
        }
    }
    let data = hyperelastic_grid(&cfg.grid, &cfg.elastic)?;
    if data.inputs.ncols() == 0 {
        return invalid("hyperelastic grid has no admissible points");
    }
    Ok(data)
}

/// Fits the `(J, b11, b22, b12) -> (sig11, sig22, sig12)` network.
pub fn train_hyper(data: &HyperDataset, net: &NetworkConfig) -> Result<(HyperFnnModel, TrainReport), PipelineError> {
    net.validate()?;
    let xs = MinMaxScaler::fit_default(&data.inputs);
    let ys = MinMaxScaler::fit_default(&data.outputs);
    let mut sizes = vec![4];
    sizes.extend_from_slice(&net.hidden);
    sizes.push(3);
    let (mut model, report) = train_scaled(&sizes, &xs.apply(&data.inputs), &ys.apply(&data.outputs), net, "hyper")?;
    model.input_scaler = Some(xs);
    model.output_scaler = Some(ys);
    let provenance = Provenance { dataset_hash: None, seeds: vec![net.train.seed] };
    Ok((HyperFnnModel { dim: 2, net: model, provenance }, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub monolithic_arch: Vec<usize>,
    pub pod_arch: Vec<usize>,
    pub epoch_budget: usize,
    pub monolithic: TrainReport,
    pub pod: Vec<TrainReport>,
    pub monolithic_seconds: f64,
    pub pod_seconds: f64,
    /// Mean squared principal-stress error over the training set, unscaled.
    pub monolithic_stress_mse: f64,
    pub pod_stress_mse: f64,
}

/// Trains one multi-output net and one single-output net per POD mode on the
/// same data with the same epoch budget.
pub fn compare_pod(set: &TrainingSet, net: &NetworkConfig, serial: bool) -> Result<CompareReport, PipelineError> {
    net.validate()?;
    let d = set.dim;
    let mut mono_arch = vec![2 * d];
    mono_arch.extend_from_slice(&net.hidden);
    let mut pod_arch = mono_arch.clone();
    mono_arch.push(d);
    pod_arch.push(1);

    let t0 = Instant::now();
    let x = set.input_scaler.apply(&set.inputs);
    let y = set.output_scaler.apply(&set.outputs);
    let (mono, mono_report) = train_scaled(&mono_arch, &x, &y, net, "monolithic")?;
    let monolithic_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut pod_net = net.clone();
    pod_net.allow_stall = true;
    let fit = train_podfnn(set, None, &pod_net, serial)?;
    let pod_seconds = t1.elapsed().as_secs_f64();

    let mono_pred = set.output_scaler.invert(&mono.forward_batch(&x)?);
    let n = set.len() as f64 * d as f64;
    let monolithic_stress_mse = (&mono_pred - &set.outputs).norm_squared() / n;
    let mut pod_sse = 0.0;
    for c in 0..set.len() {
        let col: Vec<f64> = set.inputs.column(c).iter().copied().collect();
        let s = fit.surrogate.principal_stress(&col[..d], &col[d..])?;
        pod_sse += s.iter().enumerate().map(|(i, v)| (v - set.outputs[(i, c)]).powi(2)).sum::<f64>();
    }
    Ok(CompareReport {
        monolithic_arch: mono_arch,
        pod_arch,
        epoch_budget: net.train.lm.max_epochs,
        monolithic: mono_report,
        pod: fit.reports,
        monolithic_seconds,
        pod_seconds,
        monolithic_stress_mse,
        pod_stress_mse: pod_sse / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Eval1dConfig {
    pub material: MaterialConfig,
    pub increments: Vec<f64>,
    pub steps_per_leg: usize,
    /// Increment of the held-out cycle.
    pub test_increment: f64,
    pub network: NetworkConfig,
}

impl Default for Eval1dConfig {
    fn default() -> Self {
        let mut train = TrainOptions::default();
        train.lm.max_epochs = 4000;
        Self {
            material: MaterialConfig::rod(),
            increments: linspace(0.02, 0.03, 11),
            steps_per_leg: 10,
            test_increment: 0.0235,
            network: NetworkConfig::new(&[20, 20], train),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eval1dPoint {
    pub step: usize,
    pub strain: f64,
    pub eps_acc: f64,
    pub reference: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eval1dReport {
    pub train: TrainReport,
    pub test_curve: Vec<Eval1dPoint>,
    /// RMSE over the held-out cycle divided by its stress range.
    pub nrmse: f64,
    pub surrogate: PodFnnSurrogate,
}

/// Stress predictions along a sequence of strain columns (`2d x np`, as in a
/// [`SequencePair`]).
pub fn predict_sequence(model: &PodFnnSurrogate, strain: &DMatrix<f64>) -> Result<DMatrix<f64>, PipelineError> {
    let d = model.dim;
    if strain.nrows() != 2 * d {
        return Err(SurrogateError::Dimension { model: d, input: strain.nrows() / 2 }.into());
    }
    let mut out = DMatrix::zeros(d, strain.ncols());
    for c in 0..strain.ncols() {
        let col: Vec<f64> = strain.column(c).iter().copied().collect();
        for (i, v) in model.principal_stress(&col[..d], &col[d..])?.into_iter().enumerate() {
            out[(i, c)] = v;
        }
    }
    Ok(out)
}

pub fn normalized_rmse(reference: &[f64], predicted: &[f64]) -> f64 {
    let n = reference.len().max(1) as f64;
    let rmse = (reference.iter().zip(predicted).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n).sqrt();
    let (lo, hi) = reference.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    rmse / (hi - lo).max(f64::MIN_POSITIVE)
}

/// Trains the uniaxial surrogate on cyclic sequences and tests it on a
/// cycle with an increment outside the training set.
pub fn eval_1d(cfg: &Eval1dConfig, serial: bool) -> Result<Eval1dReport, PipelineError> {
    if !(cfg.test_increment > 0.0) {
        return invalid("test_increment must be positive");
    }
    let data = DataConfig {
        material: cfg.material,
        paths: PathsConfig::Cyclic1d { increments: cfg.increments.clone(), steps_per_leg: cfg.steps_per_leg },
        drop_unloaded_endpoint: false,
    };
    let ds = generate(&data, serial)?;
    let fit = train_podfnn(&ds.set, Some(ds.meta.sha256.clone()), &cfg.network, serial)?;
    let material = cfg.material.build()?;
    let test = drive_cycle_1d(&CyclicPath1d { increment: cfg.test_increment, steps_per_leg: cfg.steps_per_leg }, &material)?;
    let pred = predict_sequence(&fit.surrogate, &test.strain)?;
    let test_curve: Vec<Eval1dPoint> = (0..test.len())
        .map(|t| Eval1dPoint {
            step: t + 1,
            strain: test.strain[(0, t)],
            eps_acc: test.strain[(1, t)],
            reference: test.stress[(0, t)],
            predicted: pred[(0, t)],
        })
        .collect();
    let reference: Vec<f64> = test_curve.iter().map(|p| p.reference).collect();
    let predicted: Vec<f64> = test_curve.iter().map(|p| p.predicted).collect();
    let nrmse = normalized_rmse(&reference, &predicted);
    let train = fit.reports.into_iter().next().expect("one POD mode in 1D");
    Ok(Eval1dReport { train, test_curve, nrmse, surrogate: fit.surrogate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSource {
    Builtin {
        name: String,
        #[serde(default)]
        options: BuiltinOptions,
    },
    Custom(Problem),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    /// Small-strain von Mises plasticity and the POD surrogate.
    Plasticity { material: MaterialConfig },
    /// Finite-strain neo-Hookean law and the hyperelastic network.
    Hyperelastic { elastic: ElasticParams },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Models {
    Reference,
    Surrogate,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FemConfig {
    pub problem: ProblemSource,
    pub law: LawConfig,
    pub models: Models,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Closed-form surrogate tangent where principal strains are distinct.
    #[serde(default = "yes")]
    pub analytic_tangent: bool,
}

fn yes() -> bool {
    true
}

impl FemConfig {
    pub fn builtin(name: &str, law: LawConfig, models: Models) -> Self {
        Self {
            problem: ProblemSource::Builtin { name: name.into(), options: BuiltinOptions::default() },
            law,
            models,
            solver: SolverOptions::default(),
            analytic_tangent: true,
        }
    }

    pub fn build_problem(&self) -> Result<Problem, PipelineError> {
        Ok(match &self.problem {
            ProblemSource::Builtin { name, options } => builtin_problem(name, options)?,
            ProblemSource::Custom(p) => p.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedRow {
    pub step: usize,
    pub factor: f64,
    pub reference: f64,
    pub surrogate: f64,
    /// Difference over the largest reference magnitude on the curve.
    pub rel_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `displacement` under prescribed loads, `load` under prescribed
    /// displacements.
    pub quantity: String,
    pub rows: Vec<PairedRow>,
    pub peak_step: usize,
    /// `|s - r| / |r|` at the peak step.
    pub peak_rel_diff: f64,
    /// Largest `rel_diff` after the peak, if the curve unloads.
    pub unload_max_rel_diff: Option<f64>,
    /// True when both curves cover the whole schedule.
    pub complete: bool,
}

pub fn compare_curves(problem: &Problem, reference: &SolveReport, surrogate: &SolveReport) -> Comparison {
    let by_reaction = problem.load_measure == LoadMeasure::Reaction;
    let value = |p: &crate::fem::CurvePoint| if by_reaction { p.load } else { p.displacement };
    let scale = reference.curve.iter().map(|p| value(p).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let rows: Vec<PairedRow> = reference
        .curve
        .iter()
        .zip(&surrogate.curve)
        .map(|(r, s)| PairedRow {
            step: r.step,
            factor: r.factor,
            reference: value(r),
            surrogate: value(s),
            rel_diff: (value(s) - value(r)).abs() / scale,
        })
        .collect();
    // the first step reaching the largest load factor
    let target = problem.schedule.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    let peak_step = problem.schedule.iter().position(|f| f.abs() == target).map_or(0, |i| i + 1);
    let peak_rel_diff = rows
        .iter()
        .find(|r| r.step == peak_step)
        .map_or(f64::INFINITY, |r| (r.surrogate - r.reference).abs() / r.reference.abs().max(f64::MIN_POSITIVE));
    let unloading = peak_step < problem.schedule.len();
    let unload_max_rel_diff = unloading.then(|| {
        let after: Vec<f64> = rows.iter().filter(|r| r.step > peak_step).map(|r| r.rel_diff).collect();
        if after.is_empty() { f64::INFINITY } else { after.into_iter().fold(0.0, f64::max) }
    });
    let complete = reference.curve.len() == problem.schedule.len() + 1 && surrogate.curve.len() == reference.curve.len();
    Comparison { quantity: if by_reaction { "load" } else { "displacement" }.into(), rows, peak_step, peak_rel_diff, unload_max_rel_diff, complete }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemOutcome {
    pub problem: String,
    pub reference: Option<SolveReport>,
    pub surrogate: Option<SolveReport>,
    pub comparison: Option<Comparison>,
    /// Solver failures; the matching report holds the steps completed.
    pub failures: Vec<String>,
}

fn solve_or_partial<M: Constitutive>(problem: &Problem, material: &M, opts: &SolverOptions, label: &str, failures: &mut Vec<String>) -> Result<SolveReport, PipelineError> {
    match newton_solve(problem, material, opts) {
        Ok(r) => Ok(r),
        Err(FemError::NotConverged { step, factor, bisections, report }) => {
            failures.push(format!("{label}: step {step} (load factor {factor}) did not converge after {bisections} bisections"));
            Ok(*report)
        }
        Err(e) => Err(e.into()),
    }
}

/// Runs a problem with the reference law, the surrogate or both. Newton
/// failures are recorded in the outcome rather than returned.
pub fn run_fem(cfg: &FemConfig, surrogate: Option<&SurrogateFile>) -> Result<FemOutcome, PipelineError> {
    let problem = cfg.build_problem()?;
    let dim = problem.mesh.dim;
    let want_ref = cfg.models != Models::Surrogate;
    let want_sur = cfg.models != Models::Reference;
    if want_sur && surrogate.is_none() {
        return invalid("models includes the surrogate but no surrogate was given");
    }
    let mut failures = Vec::new();
    let (reference, sur) = match cfg.law {
        LawConfig::Plasticity { material } => {
            let vm = material.build()?;
            let reference = want_ref.then(|| solve_or_partial(&problem, &ReferencePlasticity(vm), &cfg.solver, "reference", &mut failures)).transpose()?;
            let sur = match surrogate.filter(|_| want_sur) {
                Some(SurrogateFile::Podfnn(model)) => {
                    if model.dim != dim {
                        return invalid(format!("surrogate is {}D, problem is {dim}D", model.dim));
                    }
                    let law = SurrogatePlasticity { model, analytic_tangent: cfg.analytic_tangent };
                    Some(solve_or_partial(&problem, &law, &cfg.solver, "surrogate", &mut failures)?)
                }
                Some(SurrogateFile::HyperFnn(_)) => return invalid("plasticity runs need a podfnn surrogate"),
                None => None,
            };
            (reference, sur)
        }
        LawConfig::Hyperelastic { elastic } => {
            elastic.validate()?;
            let reference = want_ref.then(|| solve_or_partial(&problem, &NeoHookean(elastic), &cfg.solver, "reference", &mut failures)).transpose()?;
            let sur = match surrogate.filter(|_| want_sur) {
                Some(SurrogateFile::HyperFnn(model)) => {
                    if model.dim != dim {
                        return invalid(format!("surrogate is {}D, problem is {dim}D", model.dim));
                    }
                    Some(solve_or_partial(&problem, &HyperSurrogate(model), &cfg.solver, "surrogate", &mut failures)?)
                }
                Some(SurrogateFile::Podfnn(_)) => return invalid("hyperelastic runs need a hyper_fnn surrogate"),
                None => None,
            };
            (reference, sur)
        }
    };
    let comparison = match (&reference, &sur) {
        (Some(r), Some(s)) => Some(compare_curves(&problem, r, s)),
        _ => None,
    };
    Ok(FemOutcome { problem: problem.name.clone(), reference, surrogate: sur, comparison, failures })
}
