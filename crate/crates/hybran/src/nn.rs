//! Small dense feedforward networks: inference, full-batch training and JSON form.
//!
//! A network is a chain of layers `eta_l = act_l(W_l eta_{l-1} + b_l)`.
//! Training minimizes the mean over samples of the squared error norm with
//! Adam or plain gradient descent. Inputs and targets are standardized during
//! training and the affine rescaling is folded back into the first and last
//! layer, so a trained network maps raw states to raw states.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{CellDataset, Pair};
use crate::dynamics::stream_rng;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => tanh(z),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    fn slope_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Hyperbolic tangent as `sign(z) (1 - 2 / (exp(2|z|) + 1))`.
///
/// About 3x cheaper than `f64::tanh` and monotone by construction, which the
/// interval evaluation relies on. Absolute error stays within a few ulps of 1.
#[inline]
pub fn tanh(z: f64) -> f64 {
    let e = (2.0 * z.abs()).exp();
    (1.0 - 2.0 / (e + 1.0)).copysign(z)
}

/// Dense layer with a row-major `rows x cols` weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    act: Activation,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, act: Activation) -> Result<Self> {
        let rows = weights.len();
        if rows == 0 {
            return Err(Error::invalid("layer has no output units"));
        }
        let cols = weights[0].len();
        if cols == 0 || weights.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("layer weight matrix is empty or ragged"));
        }
        if bias.len() != rows {
            return Err(Error::invalid(format!(
                "layer bias has {} entries for {rows} rows",
                bias.len()
            )));
        }
        let weights: Vec<f64> = weights.into_iter().flatten().collect();
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::invalid("layer parameters must be finite"));
        }
        Ok(Layer {
            rows,
            cols,
            weights,
            bias,
            act,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn activation(&self) -> Activation {
        self.act
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Row `r` of the weight matrix.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }

    // Summation order here is shared with interval propagation so that
    // degenerate boxes reproduce point evaluation exactly.
    #[inline]
    pub(crate) fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.rows {
            let mut acc = 0.0;
            for (w, v) in self.row(r).iter().zip(x) {
                acc += w * v;
            }
            out.push(self.act.apply(acc + self.bias[r]));
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Layer sizes and per-layer activations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Architecture {
    pub fn new(sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::invalid(
                "architecture needs at least two sizes and one activation per layer",
            ));
        }
        if sizes.contains(&0) {
            return Err(Error::invalid("architecture has a zero-width layer"));
        }
        Ok(Architecture { sizes, activations })
    }

    /// `inputs -> hidden (tanh) -> outputs (identity)`.
    pub fn shallow(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Architecture {
            sizes: vec![inputs, hidden, outputs],
            activations: vec![Activation::Tanh, Activation::Identity],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNet", into = "RawNet")]
pub struct NeuralNet {
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct RawLayer {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    act: Activation,
}

#[derive(Serialize, Deserialize)]
struct RawNet {
    layers: Vec<RawLayer>,
}

impl TryFrom<RawNet> for NeuralNet {
    type Error = Error;

    fn try_from(raw: RawNet) -> Result<Self> {
        let layers = raw
            .layers
            .into_iter()
            .map(|l| Layer::new(l.w, l.b, l.act))
            .collect::<Result<Vec<_>>>()?;
        NeuralNet::new(layers)
    }
}

impl From<NeuralNet> for RawNet {
    fn from(net: NeuralNet) -> Self {
        RawNet {
            layers: net
                .layers
                .into_iter()
                .map(|l| RawLayer {
                    w: l.weights.chunks(l.cols).map(<[f64]>::to_vec).collect(),
                    b: l.bias,
                    act: l.act,
                })
                .collect(),
        }
    }
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(net: &NeuralNet) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|g| g.fill(0.0));
    }

    /// Flattened in the same order as [`NeuralNet::params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

impl NeuralNet {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network has no layers"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].cols != pair[0].rows {
                return Err(Error::invalid(format!(
                    "layer {} expects {} inputs but layer {i} produces {}",
                    i + 1,
                    pair[1].cols,
                    pair[0].rows
                )));
            }
        }
        Ok(NeuralNet { layers })
    }

    /// Xavier-uniform weights, zero biases.
    pub fn xavier(arch: &Architecture, rng: &mut ChaCha8Rng) -> Self {
        let layers = arch
            .sizes
            .windows(2)
            .zip(&arch.activations)
            .map(|(s, &act)| {
                let (cols, rows) = (s[0], s[1]);
                let limit = (6.0 / (cols + rows) as f64).sqrt();
                Layer {
                    rows,
                    cols,
                    weights: (0..rows * cols).map(|_| rng.gen_range(-limit..=limit)).collect(),
                    bias: vec![0.0; rows],
                    act,
                }
            })
            .collect();
        NeuralNet { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().rows
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn architecture(&self) -> Architecture {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.rows));
        Architecture {
            sizes,
            activations: self.layers.iter().map(|l| l.act).collect(),
        }
    }

    /// All parameters, layer by layer, weights (row-major) then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for l in &self.layers {
            l.eval_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Squared error `||net(input) - target||^2` and its parameter gradient.
    pub fn gradient(&self, input: &[f64], target: &[f64]) -> Result<(f64, Gradients)> {
        if target.len() != self.output_dim() {
            return Err(Error::invalid("target dimension does not match network output"));
        }
        self.forward(input)?;
        let mut grads = Gradients::zeros(self);
        let mut ws = Workspace::new(self);
        let loss = ws.accumulate(self, input, target, 1.0, &mut grads);
        Ok((loss, grads))
    }

    fn mse(&self, pairs: &[Pair]) -> f64 {
        let total: f64 = pairs
            .iter()
            .map(|p| {
                let y = self.forward(&p.input).expect("dimensions checked by caller");
                y.iter().zip(&p.target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })
            .sum();
        total / pairs.len() as f64
    }
}

/// Scratch buffers for backpropagation.
struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    back: Vec<f64>,
}

impl Workspace {
    fn new(net: &NeuralNet) -> Self {
        let mut acts = vec![Vec::with_capacity(net.input_dim())];
        acts.extend(net.layers.iter().map(|l| Vec::with_capacity(l.rows)));
        Workspace {
            acts,
            delta: Vec::new(),
            back: Vec::new(),
        }
    }

    /// Adds `scale * d/dparams ||net(x) - t||^2` into `grads`; returns the squared error.
    fn accumulate(&mut self, net: &NeuralNet, x: &[f64], t: &[f64], scale: f64, grads: &mut Gradients) -> f64 {
        self.acts[0].clear();
        self.acts[0].extend_from_slice(x);
        for (i, l) in net.layers.iter().enumerate() {
            let (done, rest) = self.acts.split_at_mut(i + 1);
            l.eval_into(&done[i], &mut rest[0]);
        }

        let out = self.acts.last().unwrap();
        let mut loss = 0.0;
        self.back.clear();
        for (y, target) in out.iter().zip(t) {
            let e = y - target;
            loss += e * e;
            self.back.push(2.0 * e * scale);
        }

        for (i, l) in net.layers.iter().enumerate().rev() {
            let y = &self.acts[i + 1];
            self.delta.clear();
            self.delta
                .extend(self.back.iter().zip(y).map(|(g, &yv)| g * l.act.slope_from_output(yv)));
            let a_prev = &self.acts[i];
            let gw = &mut grads.weights[i];
            let gb = &mut grads.bias[i];
            for (r, &d) in self.delta.iter().enumerate() {
                gb[r] += d;
                if d != 0.0 {
                    for (g, a) in gw[r * l.cols..(r + 1) * l.cols].iter_mut().zip(a_prev) {
                        *g += d * a;
                    }
                }
            }
            if i > 0 {
                self.back.clear();
                self.back.resize(l.cols, 0.0);
                for (r, &d) in self.delta.iter().enumerate() {
                    for (b, w) in self.back.iter_mut().zip(l.row(r)) {
                        *b += w * d;
                    }
                }
            }
        }
        loss
    }
}

/// Largest relative discrepancy between analytic gradients and central finite
/// differences with step `1e-5`.
pub fn gradient_check(net: &NeuralNet, input: &[f64], target: &[f64]) -> Result<f64> {
    const H: f64 = 1e-5;
    let (_, grads) = net.gradient(input, target)?;
    let analytic = grads.flat();
    let loss_at = |n: &NeuralNet| -> f64 {
        let y = n.forward(input).expect("checked above");
        y.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum()
    };
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let orig = *probe.params_mut().nth(k).unwrap();
        *probe.params_mut().nth(k).unwrap() = orig + H;
        let up = loss_at(&probe);
        *probe.params_mut().nth(k).unwrap() = orig - H;
        let down = loss_at(&probe);
        *probe.params_mut().nth(k).unwrap() = orig;
        let fd = (up - down) / (2.0 * H);
        let denom = a.abs().max(fd.abs()).max(1e-7);
        worst = worst.max((a - fd).abs() / denom);
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Batch {
    #[default]
    Full,
    Size(usize),
}

/// Defaults: 2000 epochs of Adam at a constant rate of 0.03 on shuffled
/// minibatches of 256 pairs. The wrapped angle makes the one-step map jump by
/// 2π, and smaller rates or full batches leave that edge badly blurred.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub batch: Batch,
    pub seed: u64,
    /// Learning rate at the last epoch relative to the first; the rate decays
    /// geometrically in between. `1.0` keeps it constant.
    pub final_lr_ratio: f64,
    /// Standardize inputs and targets while training (folded back afterwards).
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            learning_rate: 0.03,
            optimizer: Optimizer::default(),
            batch: Batch::Size(256),
            seed: 0,
            final_lr_ratio: 1.0,
            normalize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.final_lr_ratio.is_finite() && self.final_lr_ratio > 0.0) {
            return Err(Error::invalid("final learning-rate ratio must be positive"));
        }
        if self.batch == Batch::Size(0) {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub net: NeuralNet,
    /// Mean squared error of the returned network on the raw training pairs.
    pub final_loss: f64,
    /// Per-epoch training loss in the (possibly standardized) training space.
    pub loss_history: Vec<f64>,
    pub seconds: f64,
}

/// Per-feature `(mean, scale)`; constant features get scale 1.
fn standardizer(rows: impl Iterator<Item = Vec<f64>> + Clone, dim: usize) -> Vec<(f64, f64)> {
    let n = rows.clone().count() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows.clone() {
        for (m, v) in mean.iter_mut().zip(&r) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(&r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    mean.into_iter()
        .zip(var)
        .map(|(m, v)| {
            let sd = v.sqrt();
            (m, if sd > 1e-8 { sd } else { 1.0 })
        })
        .collect()
}

/// Rewrites a network trained on standardized data so it maps raw inputs to raw outputs.
fn fold_scaling(net: &mut NeuralNet, input: &[(f64, f64)], output: &[(f64, f64)]) {
    let first = &mut net.layers[0];
    for r in 0..first.rows {
        let mut shift = 0.0;
        for (j, &(m, s)) in input.iter().enumerate() {
            let w = &mut first.weights[r * first.cols + j];
            *w /= s;
            shift += *w * m;
        }
        first.bias[r] -= shift;
    }
    let last = net.layers.last_mut().unwrap();
    debug_assert_eq!(last.act, Activation::Identity);
    for (r, &(m, s)) in output.iter().enumerate() {
        for w in &mut last.weights[r * last.cols..(r + 1) * last.cols] {
            *w *= s;
        }
        last.bias[r] = last.bias[r] * s + m;
    }
}

/// Fits a network of shape `arch` to `dataset` by minimizing mean squared error.
pub fn train(dataset: &CellDataset, arch: &Architecture, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset { cell: dataset.cell });
    }
    let (n_in, n_out) = (arch.input_dim(), arch.output_dim());
    if dataset
        .pairs
        .iter()
        .any(|p| p.input.len() != n_in || p.target.len() != n_out)
    {
        return Err(Error::invalid(format!(
            "dataset pairs do not match architecture {n_in} -> {n_out}"
        )));
    }
    // Rescaling can only be folded through an identity output layer.
    let normalize = cfg.normalize && arch.activations.last() == Some(&Activation::Identity);

    let start = Instant::now();
    let mut rng = stream_rng(cfg.seed, 0);
    let mut net = NeuralNet::xavier(arch, &mut rng);

    let identity = |d: usize| vec![(0.0, 1.0); d];
    let (in_scale, out_scale) = if normalize {
        (
            standardizer(dataset.pairs.iter().map(|p| p.input.clone()), n_in),
            standardizer(dataset.pairs.iter().map(|p| p.target.clone()), n_out),
        )
    } else {
        (identity(n_in), identity(n_out))
    };
    let scaled = |v: &[f64], sc: &[(f64, f64)]| -> Vec<f64> {
        v.iter().zip(sc).map(|(x, (m, s))| (x - m) / s).collect()
    };
    let data: Vec<(Vec<f64>, Vec<f64>)> = dataset
        .pairs
        .iter()
        .map(|p| (scaled(&p.input, &in_scale), scaled(&p.target, &out_scale)))
        .collect();

    let batch = match cfg.batch {
        Batch::Full => data.len(),
        Batch::Size(k) => k.min(data.len()),
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = Gradients::zeros(&net);
    let mut ws = Workspace::new(&net);
    let n_params = net.param_count();
    let mut m1 = vec![0.0; n_params];
    let mut m2 = vec![0.0; n_params];
    let mut t = 0i32;
    let mut history = Vec::with_capacity(cfg.epochs);

    let decay = cfg.final_lr_ratio.powf(1.0 / (cfg.epochs.max(2) - 1) as f64);
    let mut lr = cfg.learning_rate;
    for epoch in 0..cfg.epochs {
        if epoch > 0 {
            lr *= decay;
        }
        if batch < data.len() {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            grads.clear();
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let (x, y) = &data[i];
                epoch_loss += ws.accumulate(&net, x, y, scale, &mut grads);
            }
            t += 1;
            let flat = grads.flat();
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in net.params_mut().zip(&flat) {
                        *p -= lr * g;
                    }
                }
                Optimizer::Adam { beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for (((p, g), a), b) in net.params_mut().zip(&flat).zip(&mut m1).zip(&mut m2) {
                        *a = beta1 * *a + (1.0 - beta1) * g;
                        *b = beta2 * *b + (1.0 - beta2) * g * g;
                        *p -= lr * (*a / c1) / ((*b / c2).sqrt() + eps);
                    }
                }
            }
        }
        let epoch_loss = epoch_loss / data.len() as f64;
        if !epoch_loss.is_finite() || net.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push(epoch_loss);
    }

    if normalize {
        fold_scaling(&mut net, &in_scale, &out_scale);
    }
    let final_loss = net.mse(&dataset.pairs);
    if !final_loss.is_finite() {
        return Err(Error::TrainingDiverged { epoch: cfg.epochs });
    }
    Ok(TrainReport {
        net,
        final_loss,
        loss_history: history,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug)]
pub struct TrainAllReport {
    pub reports: Vec<TrainReport>,
    /// Wall-clock of the whole batch of jobs.
    pub wall_seconds: f64,
}

impl TrainAllReport {
    /// Sum of per-cell job times, i.e. the cost of running them one after another.
    pub fn serial_seconds(&self) -> f64 {
        self.reports.iter().map(|r| r.seconds).sum()
    }
}

/// Trains one network per dataset; cell `q` uses seed `cfg.seed ^ q`, so results
/// do not depend on `parallel`.
pub fn train_all(
    datasets: &[CellDataset],
    arch: &Architecture,
    cfg: &TrainConfig,
    parallel: bool,
) -> Result<TrainAllReport> {
    let start = Instant::now();
    let job = |d: &CellDataset| {
        let cfg = TrainConfig {
            seed: cfg.seed ^ d.cell as u64,
            ..cfg.clone()
        };
        train(d, arch, &cfg).map_err(|e| Error::Cell {
            cell: d.cell,
            source: Box::new(e),
        })
    };
    let reports = if parallel {
        datasets.par_iter().map(job).collect::<Result<Vec<_>>>()?
    } else {
        datasets.iter().map(job).collect::<Result<Vec<_>>>()?
    };
    Ok(TrainAllReport {
        reports,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(w: Vec<Vec<f64>>, b: Vec<f64>, act: Activation) -> Layer {
        Layer::new(w, b, act).unwrap()
    }

    #[test]
    fn forward_examples() {
        let id = NeuralNet::new(vec![layer(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
            Activation::Identity,
        )])
        .unwrap();
        assert_eq!(id.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);

        let zero = NeuralNet::new(vec![layer(vec![vec![0.0, 0.0]], vec![0.0], Activation::Tanh)]).unwrap();
        assert_eq!(zero.forward(&[3.0, -7.0]).unwrap(), vec![0.0]);

        let one = NeuralNet::new(vec![layer(vec![vec![1.0]], vec![0.5], Activation::Tanh)]).unwrap();
        let y = one.forward(&[0.5]).unwrap()[0];
        assert!((y - 0.76159).abs() < 1e-5);
        assert!((y - 1.0f64.tanh()).abs() < 1e-15);

        assert!(one.forward(&[0.5, 1.0]).is_err());
    }

    #[test]
    fn tanh_is_accurate_and_monotone() {
        let mut prev = f64::NEG_INFINITY;
        for i in -200_000..=200_000 {
            let z = i as f64 * 1e-4;
            let y = tanh(z);
            assert!((y - z.tanh()).abs() < 1e-15, "{z}");
            assert!(y >= prev);
            prev = y;
        }
        assert_eq!(tanh(0.0), 0.0);
        assert_eq!(tanh(800.0), 1.0);
        assert_eq!(tanh(-800.0), -1.0);
    }

    #[test]
    fn construction_errors() {
        let a = layer(vec![vec![1.0, 1.0]], vec![0.0], Activation::Tanh);
        let b = layer(vec![vec![1.0, 1.0]], vec![0.0], Activation::Tanh);
        assert!(NeuralNet::new(vec![a, b]).is_err());
        assert!(Layer::new(vec![vec![1.0]], vec![0.0, 1.0], Activation::Tanh).is_err());
        assert!(Layer::new(vec![vec![f64::NAN]], vec![0.0], Activation::Tanh).is_err());
        assert!(NeuralNet::new(vec![]).is_err());
    }

    #[test]
    fn json_layout() {
        let net = NeuralNet::new(vec![layer(
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            vec![0.5, -0.5],
            Activation::Relu,
        )])
        .unwrap();
        let v = serde_json::to_value(&net).unwrap();
        assert_eq!(v["layers"][0]["w"][1][0], 3.0);
        assert_eq!(v["layers"][0]["act"], "relu");
        let bad = r#"{"layers":[{"w":[[1.0]],"b":[0.0],"act":"tanh"},{"w":[[1.0,1.0]],"b":[0.0],"act":"tanh"}]}"#;
        assert!(serde_json::from_str::<NeuralNet>(bad).is_err());
    }

    #[test]
    fn zero_net_has_zero_gradient() {
        let arch = Architecture::shallow(3, 5, 2);
        let mut net = NeuralNet::xavier(&arch, &mut stream_rng(1, 0));
        net.params_mut().for_each(|p| *p = 0.0);
        let (loss, g) = net.gradient(&[0.0; 3], &[0.0; 2]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_net_on_fixed_point_pair() {
        let id = NeuralNet::new(vec![layer(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
            Activation::Identity,
        )])
        .unwrap();
        let (loss, g) = id.gradient(&[0.3, -1.2], &[0.3, -1.2]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = stream_rng(42, 0);
        let arch = Architecture::shallow(3, 20, 2);
        let net = NeuralNet::xavier(&arch, &mut rng);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let t: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let err = gradient_check(&net, &x, &t).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn single_pair_is_interpolated() {
        let d = CellDataset::new(0, vec![Pair { input: vec![0.3, -0.7], target: vec![1.1] }]);
        let arch = Architecture::shallow(2, 1, 1);
        let cfg = TrainConfig { epochs: 5000, ..TrainConfig::default() };
        let rep = train(&d, &arch, &cfg).unwrap();
        assert!(rep.final_loss < 1e-6, "{}", rep.final_loss);
    }

    fn linear_data() -> CellDataset {
        let pairs = (0..100)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / 99.0;
                Pair { input: vec![x], target: vec![2.0 * x] }
            })
            .collect();
        CellDataset::new(0, pairs)
    }

    #[test]
    fn learns_linear_weight() {
        let arch = Architecture::new(vec![1, 1], vec![Activation::Identity]).unwrap();
        let cfg = TrainConfig { epochs: 5000, ..TrainConfig::default() };
        let rep = train(&linear_data(), &arch, &cfg).unwrap();
        let w = rep.net.layers()[0].row(0)[0];
        assert!((w - 2.0).abs() < 1e-3, "{w}");
    }

    #[test]
    fn gradient_descent_loss_is_monotone() {
        let arch = Architecture::new(vec![1, 1], vec![Activation::Identity]).unwrap();
        let cfg = TrainConfig {
            epochs: 3000,
            optimizer: Optimizer::Sgd,
            learning_rate: 1e-3,
            batch: Batch::Full,
            ..TrainConfig::default()
        };
        let rep = train(&linear_data(), &arch, &cfg).unwrap();
        assert!(rep.loss_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(rep.loss_history.last().unwrap() < rep.loss_history.first().unwrap());
    }

    #[test]
    fn empty_and_divergent_training() {
        let arch = Architecture::shallow(1, 3, 1);
        let empty = CellDataset::new(4, vec![]);
        assert!(matches!(
            train(&empty, &arch, &TrainConfig::default()),
            Err(Error::EmptyDataset { cell: 4 })
        ));

        let pairs = (0..20)
            .map(|i| Pair { input: vec![i as f64 * 1e3], target: vec![i as f64 * 1e4] })
            .collect();
        let cfg = TrainConfig {
            learning_rate: 1e3,
            optimizer: Optimizer::Sgd,
            normalize: false,
            epochs: 200,
            ..TrainConfig::default()
        };
        let arch = Architecture::new(vec![1, 1], vec![Activation::Identity]).unwrap();
        assert!(matches!(
            train(&CellDataset::new(0, pairs), &arch, &cfg),
            Err(Error::TrainingDiverged { .. })
        ));
    }

    #[test]
    fn minibatch_training_runs() {
        let arch = Architecture::new(vec![1, 1], vec![Activation::Identity]).unwrap();
        let cfg = TrainConfig {
            epochs: 300,
            batch: Batch::Size(16),
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let rep = train(&linear_data(), &arch, &cfg).unwrap();
        assert!(rep.final_loss < 1e-3);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let datasets: Vec<CellDataset> = (0..4)
            .map(|c| {
                let mut d = linear_data();
                d.cell = c;
                d
            })
            .collect();
        let arch = Architecture::shallow(1, 4, 1);
        let cfg = TrainConfig { epochs: 50, ..TrainConfig::default() };
        let a = train_all(&datasets, &arch, &cfg, false).unwrap();
        let b = train_all(&datasets, &arch, &cfg, true).unwrap();
        for (x, y) in a.reports.iter().zip(&b.reports) {
            assert_eq!(x.net, y.net);
        }
        assert_ne!(a.reports[0].net, a.reports[1].net);
    }

    #[test]
    fn train_all_tags_errors_with_the_cell() {
        let datasets = vec![linear_data(), CellDataset::new(1, vec![])];
        let arch = Architecture::shallow(1, 2, 1);
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let err = train_all(&datasets, &arch, &cfg, true).unwrap_err();
        assert!(matches!(err, Error::Cell { cell: 1, .. }));
    }
}
