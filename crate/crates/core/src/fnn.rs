//! Fully connected feedforward networks with sigmoid hidden layers and an
//! affine output layer, trained with Levenberg-Marquardt.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::{lm_minimize, EpochRecord, LeastSquares, LmError, LmOptions, StopReason};
use crate::scaling::MinMaxScaler;

#[derive(Debug, Error)]
pub enum FnnError {
    #[error("invalid architecture {0:?}")]
    Architecture(Vec<usize>),
    #[error("input length mismatch: expected {expected}, got {got}")]
    Input { expected: usize, got: usize },
    #[error("batch shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Lm(#[from] LmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// `f(x) = 2 / (1 + exp(-2x)) - 1`
    Sigmoid,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            // identical to tanh, which avoids overflow in exp for large |x|
            Activation::Sigmoid => x.tanh(),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation value.
    fn slope_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub initial_mse: f64,
    pub final_mse: f64,
    pub grad_norm: f64,
    pub seed: u64,
    pub stop: Option<StopReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnnModel {
    pub layer_sizes: Vec<usize>,
    /// Row-major `size_k x size_{k-1}` per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activations: Vec<Activation>,
    #[serde(default)]
    pub input_scaler: Option<MinMaxScaler>,
    #[serde(default)]
    pub output_scaler: Option<MinMaxScaler>,
    #[serde(default)]
    pub training_meta: Option<TrainingMeta>,
}

fn check_sizes(sizes: &[usize]) -> Result<(), FnnError> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(FnnError::Architecture(sizes.to_vec()));
    }
    Ok(())
}

impl FnnModel {
    /// All-zero network with sigmoid hidden layers and a linear output.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self, FnnError> {
        check_sizes(layer_sizes)?;
        let n = layer_sizes.len() - 1;
        let weights = (0..n).map(|k| vec![0.0; layer_sizes[k + 1] * layer_sizes[k]]).collect();
        let biases = (0..n).map(|k| vec![0.0; layer_sizes[k + 1]]).collect();
        let mut activations = vec![Activation::Sigmoid; n];
        activations[n - 1] = Activation::Linear;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activations,
            input_scaler: None,
            output_scaler: None,
            training_meta: None,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        (0..self.n_layers()).map(|k| self.layer_sizes[k + 1] * (self.layer_sizes[k] + 1)).sum()
    }

    /// Per layer: weights row-major, then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for k in 0..self.n_layers() {
            p.extend_from_slice(&self.weights[k]);
            p.extend_from_slice(&self.biases[k]);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params(), "parameter vector length");
        let mut off = 0;
        for k in 0..self.n_layers() {
            let nw = self.weights[k].len();
            self.weights[k].copy_from_slice(&p[off..off + nw]);
            off += nw;
            let nb = self.biases[k].len();
            self.biases[k].copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
    }

    fn weight_matrix(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.layer_sizes[k + 1], self.layer_sizes[k], &self.weights[k])
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, FnnError> {
        if x.len() != self.n_inputs() {
            return Err(FnnError::Input { expected: self.n_inputs(), got: x.len() });
        }
        let mut a = x.to_vec();
        for k in 0..self.n_layers() {
            let (rows, cols) = (self.layer_sizes[k + 1], self.layer_sizes[k]);
            let w = &self.weights[k];
            a = (0..rows)
                .map(|i| {
                    let z = self.biases[k][i] + (0..cols).map(|j| w[i * cols + j] * a[j]).sum::<f64>();
                    self.activations[k].apply(z)
                })
                .collect();
        }
        Ok(a)
    }

    /// Forward pass with the gradient of every output with respect to the
    /// inputs (`n_out x n_in`).
    pub fn forward_with_input_gradient(&self, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>), FnnError> {
        if x.len() != self.n_inputs() {
            return Err(FnnError::Input { expected: self.n_inputs(), got: x.len() });
        }
        let mut a = DVector::from_column_slice(x);
        let mut grad = DMatrix::<f64>::identity(x.len(), x.len());
        for k in 0..self.n_layers() {
            let w = self.weight_matrix(k);
            let z = &w * &a + DVector::from_column_slice(&self.biases[k]);
            let act = self.activations[k];
            a = z.map(|v| act.apply(v));
            let slopes = a.map(|v| act.slope_from_output(v));
            grad = DMatrix::from_diagonal(&slopes) * (w * grad);
        }
        Ok((a.iter().copied().collect(), grad))
    }

    /// Column-wise forward pass of an `n_in x N` batch.
    pub fn forward_batch(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, FnnError> {
        Ok(self.layer_outputs(x)?.pop().unwrap())
    }

    /// Activations of every layer, input included.
    fn layer_outputs(&self, x: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>, FnnError> {
        if x.nrows() != self.n_inputs() {
            return Err(FnnError::Input { expected: self.n_inputs(), got: x.nrows() });
        }
        let mut outs = vec![x.clone()];
        for k in 0..self.n_layers() {
            let mut z = self.weight_matrix(k) * outs.last().unwrap();
            let act = self.activations[k];
            for mut col in z.column_iter_mut() {
                for (v, b) in col.iter_mut().zip(&self.biases[k]) {
                    *v = act.apply(*v + b);
                }
            }
            outs.push(z);
        }
        Ok(outs)
    }

    /// Residuals `output - target` stacked sample by sample, and their
    /// Jacobian with respect to [`FnnModel::params`] by backpropagation.
    pub fn jacobian(&self, x: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>), FnnError> {
        let n = x.ncols();
        if targets.ncols() != n || targets.nrows() != self.n_outputs() {
            return Err(FnnError::Shape(format!(
                "targets {}x{} for {} outputs and {} samples",
                targets.nrows(),
                targets.ncols(),
                self.n_outputs(),
                n
            )));
        }
        let outs = self.layer_outputs(x)?;
        let n_out = self.n_outputs();
        let y = outs.last().unwrap();
        let e = DVector::from_fn(n * n_out, |r, _| y[(r % n_out, r / n_out)] - targets[(r % n_out, r / n_out)]);
        let mut jac = DMatrix::zeros(n * n_out, self.n_params());
        let offsets: Vec<usize> = {
            let mut off = vec![0];
            for k in 0..self.n_layers() {
                off.push(off[k] + self.layer_sizes[k + 1] * (self.layer_sizes[k] + 1));
            }
            off
        };
        let wts: Vec<DMatrix<f64>> = (0..self.n_layers()).map(|k| self.weight_matrix(k)).collect();
        let last = self.n_layers() - 1;
        for o in 0..n_out {
            // sensitivities of output `o` with respect to each layer's pre-activation
            let mut delta = DMatrix::zeros(n_out, n);
            for s in 0..n {
                delta[(o, s)] = self.activations[last].slope_from_output(outs[last + 1][(o, s)]);
            }
            for k in (0..self.n_layers()).rev() {
                let (rows, cols) = (self.layer_sizes[k + 1], self.layer_sizes[k]);
                let a_prev = &outs[k];
                for s in 0..n {
                    let row = s * n_out + o;
                    let base = offsets[k];
                    for i in 0..rows {
                        let d = delta[(i, s)];
                        if d == 0.0 {
                            continue;
                        }
                        for j in 0..cols {
                            jac[(row, base + i * cols + j)] = d * a_prev[(j, s)];
                        }
                        jac[(row, base + rows * cols + i)] = d;
                    }
                }
                if k > 0 {
                    let mut prev = wts[k].transpose() * &delta;
                    let act = self.activations[k - 1];
                    for s in 0..n {
                        for j in 0..cols {
                            prev[(j, s)] *= act.slope_from_output(a_prev[(j, s)]);
                        }
                    }
                    delta = prev;
                }
            }
        }
        Ok((e, jac))
    }

    pub fn mse(&self, x: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<f64, FnnError> {
        let y = self.forward_batch(x)?;
        let diff = y - targets;
        Ok(diff.norm_squared() / diff.len().max(1) as f64)
    }
}

/// Nguyen-Widrow initialization: hidden rows rescaled to norm
/// `0.7 H^(1/I)`, hidden biases uniform in the same band; the linear output
/// layer draws from `[-0.5, 0.5]`.
pub fn nguyen_widrow_init(layer_sizes: &[usize], seed: u64) -> Result<FnnModel, FnnError> {
    let mut model = FnnModel::zeros(layer_sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..model.n_layers() {
        let (h, i) = (layer_sizes[k + 1], layer_sizes[k]);
        if model.activations[k] == Activation::Sigmoid {
            let beta = 0.7 * (h as f64).powf(1.0 / i as f64);
            for r in 0..h {
                let row = &mut model.weights[k][r * i..(r + 1) * i];
                loop {
                    for w in row.iter_mut() {
                        *w = rng.gen_range(-1.0..1.0);
                    }
                    let norm = row.iter().map(|w| w * w).sum::<f64>().sqrt();
                    if norm > 1e-3 {
                        row.iter_mut().for_each(|w| *w *= beta / norm);
                        break;
                    }
                }
                model.biases[k][r] = rng.gen_range(-beta..=beta);
            }
        } else {
            for w in model.weights[k].iter_mut() {
                *w = rng.gen_range(-0.5..=0.5);
            }
            for b in model.biases[k].iter_mut() {
                *b = rng.gen_range(-0.5..=0.5);
            }
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct TrainOptions {
    #[serde(flatten)]
    pub lm: LmOptions,
    pub seed: u64,
}


struct FnnProblem<'a> {
    template: FnnModel,
    x: &'a DMatrix<f64>,
    y: &'a DMatrix<f64>,
}

impl FnnProblem<'_> {
    fn with(&self, p: &[f64]) -> FnnModel {
        let mut m = self.template.clone();
        m.set_params(p);
        m
    }
}

impl LeastSquares for FnnProblem<'_> {
    fn n_params(&self) -> usize {
        self.template.n_params()
    }

    fn residuals(&self, p: &[f64]) -> DVector<f64> {
        let out = self.with(p).forward_batch(self.x).expect("shape checked before training");
        let n_out = out.nrows();
        DVector::from_iterator(out.len(), (0..out.len()).map(|r| out[(r % n_out, r / n_out)] - self.y[(r % n_out, r / n_out)]))
    }

    fn residuals_and_jacobian(&self, p: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        self.with(p).jacobian(self.x, self.y).expect("shape checked before training")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub initial_mse: f64,
    pub final_mse: f64,
    pub grad_norm: f64,
    pub stop: StopReason,
}

/// Trains on already scaled data (`n_in x N` inputs, `n_out x N` targets).
/// A stall returns the partially trained model inside the error.
pub fn train(
    model: &FnnModel,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    opts: &TrainOptions,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(FnnModel, TrainReport), FnnError> {
    if x.nrows() != model.n_inputs() || y.nrows() != model.n_outputs() || x.ncols() != y.ncols() || x.ncols() == 0 {
        return Err(FnnError::Shape(format!(
            "inputs {}x{}, targets {}x{} for layers {:?}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols(),
            model.layer_sizes
        )));
    }
    let problem = FnnProblem { template: model.clone(), x, y };
    let res = lm_minimize(&problem, &model.params(), &opts.lm, on_epoch)?;
    let mut trained = problem.with(&res.params);
    trained.training_meta = Some(TrainingMeta {
        epochs: res.history.len(),
        initial_mse: res.initial_mse,
        final_mse: res.mse,
        grad_norm: res.grad_norm,
        seed: opts.seed,
        stop: Some(res.stop),
    });
    let report = TrainReport {
        history: res.history,
        initial_mse: res.initial_mse,
        final_mse: res.mse,
        grad_norm: res.grad_norm,
        stop: res.stop,
    };
    Ok((trained, report))
}

/// Model and report recovered from a stalled run.
pub fn stalled_result(model: &FnnModel, err: &FnnError) -> Option<(FnnModel, TrainReport)> {
    if let FnnError::Lm(LmError::Stall { partial, .. }) = err {
        let mut m = model.clone();
        m.set_params(&partial.params);
        let report = TrainReport {
            history: partial.history.clone(),
            initial_mse: partial.initial_mse,
            final_mse: partial.mse,
            grad_norm: partial.grad_norm,
            stop: partial.stop,
        };
        return Some((m, report));
    }
    None
}
