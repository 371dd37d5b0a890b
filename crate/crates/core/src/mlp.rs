//! Small dense feed-forward networks trained with Adam.
//!
//! All parameters live in one flat vector. Layer `l` owns an `in x out`
//! weight block (column-major) followed by `out` biases, so a layer computes
//! `Z = A W + 1 bᵀ`.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resampling::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Mse,
    Bce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layers: Vec<LayerSpec>,
    pub loss: Loss,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl MlpSpec {
    /// ReLU hidden layers of the given widths and a single output whose
    /// activation follows from the loss.
    pub fn feed_forward(inputs: usize, hidden: &[usize], loss: Loss) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = inputs;
        for &h in hidden {
            layers.push(LayerSpec {
                inputs: prev,
                outputs: h,
                activation: Activation::Relu,
            });
            prev = h;
        }
        layers.push(LayerSpec {
            inputs: prev,
            outputs: 1,
            activation: match loss {
                Loss::Mse => Activation::None,
                Loss::Bce => Activation::Sigmoid,
            },
        });
        MlpSpec {
            layers,
            loss,
            learning_rate: 1e-3,
            epochs: 300,
            batch_size: 10,
            seed: 0,
        }
    }

    /// 100-150-200-150-100-50-1 regression network.
    pub fn tecator() -> Self {
        Self::feed_forward(100, &[150, 200, 150, 100, 50], Loss::Mse)
    }

    /// 17-34-68-68-68-34-1 classifier with a sigmoid output.
    pub fn heart() -> Self {
        Self::feed_forward(17, &[34, 68, 68, 68, 34], Loss::Bce)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let Some(last) = self.layers.last() else {
            return bad("network has no layers".into());
        };
        for (l, pair) in self.layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return bad(format!(
                    "layer {} outputs {} but layer {} expects {}",
                    l + 1,
                    pair[0].outputs,
                    l + 2,
                    pair[1].inputs
                ));
            }
        }
        if self.layers.iter().any(|l| l.inputs == 0 || l.outputs == 0) {
            return bad("layer with zero width".into());
        }
        if last.outputs != 1 {
            return bad("the last layer must have a single output".into());
        }
        match (self.loss, last.activation) {
            (Loss::Mse, Activation::None) | (Loss::Bce, Activation::Sigmoid) => {}
            (loss, act) => return bad(format!("{loss:?} loss cannot follow a {act:?} output")),
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Block {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    offset: usize,
}

impl Block {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn biases(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + self.outputs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    blocks: Vec<Block>,
    params: Vec<f64>,
    loss: Loss,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn activate(z: &DMatrix<f64>, act: Activation) -> DMatrix<f64> {
    match act {
        Activation::None => z.clone(),
        Activation::Relu => z.map(|v| v.max(0.0)),
        Activation::Sigmoid => z.map(sigmoid),
    }
}

impl Mlp {
    /// Weights and biases drawn uniformly from `±1/sqrt(fan_in)`.
    pub fn new(spec: &MlpSpec) -> Result<Self> {
        spec.validate()?;
        let mut blocks = Vec::with_capacity(spec.layers.len());
        let mut offset = 0;
        for l in &spec.layers {
            blocks.push(Block {
                inputs: l.inputs,
                outputs: l.outputs,
                activation: l.activation,
                offset,
            });
            offset += (l.inputs + 1) * l.outputs;
        }
        let mut r = rng(spec.seed);
        let mut params = vec![0.0; offset];
        for b in &blocks {
            let bound = 1.0 / (b.inputs as f64).sqrt();
            for p in &mut params[b.offset..b.biases().end] {
                *p = r.random_range(-bound..bound);
            }
        }
        Ok(Mlp {
            blocks,
            params,
            loss: spec.loss,
        })
    }

    pub fn inputs(&self) -> usize {
        self.blocks[0].inputs
    }

    pub fn loss_kind(&self) -> Loss {
        self.loss
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for a network with {}",
                params.len(),
                self.params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Weight and bias ranges of every layer within [`Self::parameters`].
    pub fn layout(&self) -> Vec<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        self.blocks.iter().map(|b| (b.weights(), b.biases())).collect()
    }

    fn weights(&self, b: &Block) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.params[b.weights()], b.inputs, b.outputs)
    }

    /// Inputs to every layer and the final pre-activation.
    fn forward_cache(&self, x: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, DMatrix<f64>) {
        let mut inputs = Vec::with_capacity(self.blocks.len());
        let mut a = x.clone();
        let mut z = DMatrix::zeros(0, 0);
        for (l, b) in self.blocks.iter().enumerate() {
            z = &a * self.weights(b);
            let bias = &self.params[b.biases()];
            for (j, mut col) in z.column_iter_mut().enumerate() {
                col.add_scalar_mut(bias[j]);
            }
            let next = if l + 1 < self.blocks.len() {
                activate(&z, b.activation)
            } else {
                DMatrix::zeros(0, 0)
            };
            inputs.push(std::mem::replace(&mut a, next));
        }
        (inputs, z)
    }

    /// Network output for every row (probabilities for a sigmoid head).
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let (_, z) = self.forward_cache(x);
        let last = self.blocks.last().expect("validated");
        activate(&z, last.activation).column(0).iter().copied().collect()
    }

    fn loss_from_logits(&self, z: &DMatrix<f64>, y: &[f64]) -> f64 {
        let n = y.len() as f64;
        match self.loss {
            Loss::Mse => z.column(0).iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n,
            Loss::Bce => {
                z.column(0)
                    .iter()
                    .zip(y)
                    .map(|(&z, &t)| z.max(0.0) - z * t + (-z.abs()).exp().ln_1p())
                    .sum::<f64>()
                    / n
            }
        }
    }

    fn check_data(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
        if x.ncols() != self.inputs() || x.nrows() != y.len() || y.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} inputs with {} targets for a network taking {}",
                x.nrows(),
                x.ncols(),
                y.len(),
                self.inputs()
            )));
        }
        Ok(())
    }

    /// Mean loss over the rows of `x`.
    pub fn loss(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
        self.check_data(x, y)?;
        let (_, z) = self.forward_cache(x);
        Ok(self.loss_from_logits(&z, y))
    }

    /// Loss and its gradient with respect to [`Self::parameters`].
    pub fn loss_and_gradient(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_data(x, y)?;
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.backward(x, y, &mut grad);
        Ok((loss, grad))
    }

    pub fn gradient(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.loss_and_gradient(x, y)?.1)
    }

    fn backward(&self, x: &DMatrix<f64>, y: &[f64], grad: &mut [f64]) -> f64 {
        let (inputs, z) = self.forward_cache(x);
        let loss = self.loss_from_logits(&z, y);
        let n = y.len() as f64;
        // both heads reduce to a residual on the logits
        let mut dz = match self.loss {
            Loss::Mse => DMatrix::from_fn(z.nrows(), 1, |i, _| 2.0 * (z[(i, 0)] - y[i]) / n),
            Loss::Bce => DMatrix::from_fn(z.nrows(), 1, |i, _| (sigmoid(z[(i, 0)]) - y[i]) / n),
        };
        for l in (0..self.blocks.len()).rev() {
            let b = &self.blocks[l];
            let a = &inputs[l];
            {
                let mut gw = DMatrixViewMut::from_slice(&mut grad[b.weights()], b.inputs, b.outputs);
                a.tr_mul_to(&dz, &mut gw);
            }
            for (j, g) in grad[b.biases()].iter_mut().enumerate() {
                *g = dz.column(j).sum();
            }
            if l > 0 {
                let mut da = &dz * self.weights(b).transpose();
                let prev = &self.blocks[l - 1];
                match prev.activation {
                    Activation::None => {}
                    Activation::Relu => {
                        // the cached input is relu(z), positive exactly where z is
                        da.zip_apply(a, |d, av| {
                            if av <= 0.0 {
                                *d = 0.0;
                            }
                        });
                    }
                    Activation::Sigmoid => da.zip_apply(a, |d, s| *d *= s * (1.0 - s)),
                }
                dz = da;
            }
        }
        loss
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(params: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; params],
            v: vec![0.0; params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *p -= self.learning_rate * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub model: Mlp,
    /// Training loss over all rows after every epoch.
    pub losses: Vec<f64>,
}

/// Minibatch training; rows are reshuffled every epoch.
pub fn mlp_train(spec: &MlpSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<TrainResult> {
    let mut model = Mlp::new(spec)?;
    model.check_data(x, y)?;
    // a separate stream from the one used for initialization
    let mut r = rng(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = Adam::new(model.params.len(), spec.learning_rate);
    let mut grad = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut losses = Vec::with_capacity(spec.epochs);
    for epoch in 0..spec.epochs {
        order.shuffle(&mut r);
        for batch in order.chunks(spec.batch_size) {
            let xb = x.select_rows(batch);
            let yb: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
            let loss = model.backward(&xb, &yb, &mut grad);
            if !loss.is_finite() {
                return Err(Error::DivergedLoss { epoch: epoch + 1 });
            }
            adam.step(&mut model.params, &grad);
        }
        let loss = model.loss(x, y)?;
        if !loss.is_finite() {
            return Err(Error::DivergedLoss { epoch: epoch + 1 });
        }
        losses.push(loss);
    }
    Ok(TrainResult { model, losses })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmsep: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

pub fn rmsep(y: &[f64], yhat: &[f64]) -> f64 {
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    (sse / y.len() as f64).sqrt()
}

/// `1 - SSE/SST`.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    let sst: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    1.0 - sse / sst
}

/// Share of rows where `p >= 0.5` agrees with a 0/1 label.
pub fn accuracy(labels: &[f64], p: &[f64]) -> f64 {
    let hits = labels.iter().zip(p).filter(|(&t, &p)| (p >= 0.5) == (t >= 0.5)).count();
    hits as f64 / labels.len() as f64
}

/// Test-set metrics. Regression predictions are shifted by `offset` first,
/// so a network trained on a centered response is scored in original units.
pub fn evaluate(model: &Mlp, x: &DMatrix<f64>, y: &[f64], offset: f64) -> Result<Metrics> {
    model.check_data(x, y)?;
    let out = model.predict(x);
    Ok(match model.loss {
        Loss::Mse => {
            let yhat: Vec<f64> = out.iter().map(|v| v + offset).collect();
            Metrics {
                rmsep: Some(rmsep(y, &yhat)),
                r2: Some(r_squared(y, &yhat)),
                accuracy: None,
            }
        }
        Loss::Bce => Metrics {
            rmsep: None,
            r2: None,
            accuracy: Some(accuracy(y, &out)),
        },
    })
}

/// Largest relative difference between the analytic gradient and central
/// differences over the parameters in `indices`. Magnitudes below `1e-6`
/// count as `1e-6` in the denominator.
pub fn gradient_check(model: &Mlp, x: &DMatrix<f64>, y: &[f64], indices: &[usize], step: f64) -> Result<f64> {
    let grad = model.gradient(x, y)?;
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for &i in indices {
        let orig = model.params[i];
        probe.params[i] = orig + step;
        let up = probe.loss(x, y)?;
        probe.params[i] = orig - step;
        let down = probe.loss(x, y)?;
        probe.params[i] = orig;
        let fd = (up - down) / (2.0 * step);
        let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}
