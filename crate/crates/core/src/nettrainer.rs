//! Small fully connected ReLU and highway networks trained with mini-batch SGD,
//! with full-dataset activation captures at chosen epochs.
//!
//! Dense layer: `pre = x Wᵀ + b`, `post = relu(pre)`.
//! Highway layer: `H = relu(x Whᵀ + bh)`, `T = σ(x Wtᵀ + bt)`,
//! `y = T⊙H + (1−T)⊙x`; the recorded pre-activation is the H-branch input,
//! the recorded post-activation is the layer output `y`.
//!
//! Weight decay is the coupled L2 term `(wd/2)·Σθ²` on every parameter.

use std::fmt;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::{write_nact, ActivationTensor, LayerEntry, LayerKind, RunManifest};
use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

pub const HIGHWAY_GATE_BIAS: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerType {
    Dense,
    Highway,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerType,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub output_classes: usize,
}

impl ArchSpec {
    /// Parse `fc:<w1>,<w2>,...` or `hw:<depth>x<width>`.
    ///
    /// A highway stack needs its input width to equal its own width; when
    /// `input_dim` differs, a dense entry layer of that width is prepended.
    pub fn parse(text: &str, input_dim: usize, output_classes: usize) -> Result<Self> {
        let bad = |why: &str| Error::Validation(format!("architecture '{text}': {why}"));
        let (kind, rest) = text.split_once(':').ok_or_else(|| bad("expected fc:... or hw:..."))?;
        let layers = match kind {
            "fc" => rest
                .split(',')
                .map(|w| {
                    w.trim()
                        .parse::<usize>()
                        .map(|width| LayerSpec {
                            kind: LayerType::Dense,
                            width,
                        })
                        .map_err(|_| bad("widths must be positive integers"))
                })
                .collect::<Result<Vec<_>>>()?,
            "hw" => {
                let (depth, width) = rest.split_once('x').ok_or_else(|| bad("expected hw:<depth>x<width>"))?;
                let depth: usize = depth.parse().map_err(|_| bad("bad depth"))?;
                let width: usize = width.parse().map_err(|_| bad("bad width"))?;
                let mut layers = Vec::with_capacity(depth + 1);
                if input_dim != width {
                    layers.push(LayerSpec {
                        kind: LayerType::Dense,
                        width,
                    });
                }
                layers.extend((0..depth).map(|_| LayerSpec {
                    kind: LayerType::Highway,
                    width,
                }));
                layers
            }
            _ => return Err(bad("unknown family")),
        };
        let arch = Self {
            input_dim,
            layers,
            output_classes,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_classes == 0 {
            return Err(Error::Validation("input_dim and output_classes must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Validation("architecture needs at least one hidden layer".into()));
        }
        let mut incoming = self.input_dim;
        for (i, l) in self.layers.iter().enumerate() {
            if l.width == 0 {
                return Err(Error::Validation(format!("layer {} has width 0", i + 1)));
            }
            if l.kind == LayerType::Highway && l.width != incoming {
                return Err(Error::Validation(format!(
                    "highway layer {} has width {} but receives {incoming} inputs",
                    i + 1,
                    l.width
                )));
            }
            incoming = l.width;
        }
        Ok(())
    }

    /// Layer names `L1`, `L2`, ... numbered from the input.
    pub fn layer_name(index: usize) -> String {
        format!("L{}", index + 1)
    }
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .layers
            .iter()
            .map(|l| match l.kind {
                LayerType::Dense => format!("dense{}", l.width),
                LayerType::Highway => format!("highway{}", l.width),
            })
            .collect();
        write!(f, "in{}-{}-out{}", self.input_dim, parts.join("-"), self.output_classes)
    }
}

/// Affine map `x Wᵀ + b` with `W` of shape out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Affine {
    fn uniform(out: usize, inp: usize, g: &mut impl Rng) -> Self {
        let bound = (6.0 / (inp + out) as f64).sqrt();
        let w = Array2::from_shape_simple_fn((out, inp), || g.random_range(-bound..=bound));
        Self {
            w,
            b: Array1::zeros(out),
        }
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    fn for_each_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        self.w.iter_mut().for_each(&mut *f);
        self.b.iter_mut().for_each(f);
    }

    fn for_each(&self, f: &mut impl FnMut(f64)) {
        self.w.iter().for_each(|&v| f(v));
        self.b.iter().for_each(|&v| f(v));
    }

    /// Accumulate parameter gradients given upstream `d` (batch×out) and input `x`.
    fn backward(&self, d: &Array2<f64>, x: &Array2<f64>, grad: &mut Affine) -> Array2<f64> {
        grad.w += &d.t().dot(x);
        grad.b += &d.sum_axis(Axis(0));
        d.dot(&self.w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Affine),
    Highway { branch: Affine, gate: Affine },
}

/// Network parameters in real64. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub arch: ArchSpec,
    pub layers: Vec<Layer>,
    pub output: Affine,
}

/// Activations of one hidden layer over a batch.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub pre_activation: Array2<f64>,
    pub post_activation: Array2<f64>,
    gate: Option<Array2<f64>>,
    branch: Option<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub layers: Vec<LayerTrace>,
    pub logits: Array2<f64>,
}

fn relu(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|v| v.max(0.0))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Uniform ±sqrt(6/(fan_in+fan_out)) weights, zero biases, highway gate biases −1.
pub fn init_network(arch: &ArchSpec, seed: u64) -> Result<Network> {
    arch.validate()?;
    let mut g = rng::stream(seed, Stream::Init, 0);
    let mut incoming = arch.input_dim;
    let mut layers = Vec::with_capacity(arch.layers.len());
    for l in &arch.layers {
        layers.push(match l.kind {
            LayerType::Dense => Layer::Dense(Affine::uniform(l.width, incoming, &mut g)),
            LayerType::Highway => {
                let branch = Affine::uniform(l.width, incoming, &mut g);
                let mut gate = Affine::uniform(l.width, incoming, &mut g);
                gate.b.fill(HIGHWAY_GATE_BIAS);
                Layer::Highway { branch, gate }
            }
        });
        incoming = l.width;
    }
    let output = Affine::uniform(arch.output_classes, incoming, &mut g);
    Ok(Network {
        arch: arch.clone(),
        layers,
        output,
    })
}

impl Network {
    /// Same structure, all parameters zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_param_mut(|v| *v = 0.0);
        z
    }

    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for l in &mut self.layers {
            match l {
                Layer::Dense(a) => a.for_each_mut(&mut f),
                Layer::Highway { branch, gate } => {
                    branch.for_each_mut(&mut f);
                    gate.for_each_mut(&mut f);
                }
            }
        }
        self.output.for_each_mut(&mut f);
    }

    pub fn for_each_param(&self, mut f: impl FnMut(f64)) {
        for l in &self.layers {
            match l {
                Layer::Dense(a) => a.for_each(&mut f),
                Layer::Highway { branch, gate } => {
                    branch.for_each(&mut f);
                    gate.for_each(&mut f);
                }
            }
        }
        self.output.for_each(&mut f);
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.for_each_param(|p| v.push(p));
        v
    }

    pub fn set_flat_params(&mut self, values: &[f64]) {
        let mut it = values.iter();
        self.for_each_param_mut(|p| *p = *it.next().expect("parameter count"));
    }

    /// Forward pass over a batch (rows = samples).
    pub fn forward(&self, x: &Array2<f64>) -> Result<ForwardTrace> {
        if x.ncols() != self.arch.input_dim {
            return Err(Error::Shape(format!(
                "batch has {} features, network expects {}",
                x.ncols(),
                self.arch.input_dim
            )));
        }
        let mut traces: Vec<LayerTrace> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = traces.last().map(|t| &t.post_activation).unwrap_or(x);
            let trace = match layer {
                Layer::Dense(a) => {
                    let pre = a.apply(input);
                    let post = relu(&pre);
                    LayerTrace {
                        pre_activation: pre,
                        post_activation: post,
                        gate: None,
                        branch: None,
                    }
                }
                Layer::Highway { branch, gate } => {
                    let pre = branch.apply(input);
                    let h = relu(&pre);
                    let t = gate.apply(input).mapv(sigmoid);
                    let y = &t * &h + &(1.0 - &t) * input;
                    LayerTrace {
                        pre_activation: pre,
                        post_activation: y,
                        gate: Some(t),
                        branch: Some(h),
                    }
                }
            };
            if trace.post_activation.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite activation in layer {}",
                    ArchSpec::layer_name(i)
                )));
            }
            traces.push(trace);
        }
        let last = traces.last().map(|t| &t.post_activation).unwrap_or(x);
        let logits = self.output.apply(last);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite logits".into()));
        }
        Ok(ForwardTrace {
            layers: traces,
            logits,
        })
    }

    fn sum_squares(&self) -> f64 {
        let mut s = 0.0;
        self.for_each_param(|p| s += p * p);
        s
    }

    /// Mean softmax cross-entropy (nats) plus `(wd/2)·Σθ²`.
    pub fn loss(&self, x: &Array2<f64>, labels: &[usize], weight_decay: f64) -> Result<f64> {
        let trace = self.forward(x)?;
        Ok(cross_entropy(&trace.logits, labels).0 + 0.5 * weight_decay * self.sum_squares())
    }

    /// Loss and its exact gradient (same layout as `self`).
    pub fn loss_and_gradient(&self, x: &Array2<f64>, labels: &[usize], weight_decay: f64) -> Result<(f64, Network)> {
        let trace = self.forward(x)?;
        let (data_loss, mut d) = cross_entropy(&trace.logits, labels);
        let mut grad = self.zeros_like();

        let last = trace.layers.last().map(|t| &t.post_activation).unwrap_or(x);
        d = self.output.backward(&d, last, &mut grad.output);
        for i in (0..self.layers.len()).rev() {
            let input = if i == 0 { x } else { &trace.layers[i - 1].post_activation };
            let t = &trace.layers[i];
            d = match (&self.layers[i], &mut grad.layers[i]) {
                (Layer::Dense(a), Layer::Dense(ga)) => {
                    let dpre = &d * &t.pre_activation.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    a.backward(&dpre, input, ga)
                }
                (
                    Layer::Highway { branch, gate },
                    Layer::Highway {
                        branch: gbranch,
                        gate: ggate,
                    },
                ) => {
                    let tg = t.gate.as_ref().unwrap();
                    let h = t.branch.as_ref().unwrap();
                    let carry = &d * &(1.0 - tg);
                    let dh = &d * tg;
                    let dpre = &dh * &t.pre_activation.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    let dgate = &(&d * &(h - input)) * &(tg * &(1.0 - tg));
                    let through_branch = branch.backward(&dpre, input, gbranch);
                    let through_gate = gate.backward(&dgate, input, ggate);
                    carry + through_branch + through_gate
                }
                _ => unreachable!("gradient layout mirrors the network"),
            };
        }
        if weight_decay != 0.0 {
            let params = self.flat_params();
            let mut k = 0;
            grad.for_each_param_mut(|g| {
                *g += weight_decay * params[k];
                k += 1;
            });
        }
        Ok((data_loss + 0.5 * weight_decay * self.sum_squares(), grad))
    }
}

/// Mean cross-entropy and its gradient w.r.t. the logits.
fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let n = logits.nrows() as f64;
    let mut grad = Array2::zeros(logits.dim());
    let mut loss = 0.0;
    for (r, row) in logits.outer_iter().enumerate() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let z: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + z.ln();
        loss += log_z - row[labels[r]];
        for (c, &v) in row.iter().enumerate() {
            grad[[r, c]] = (v - log_z).exp() / n;
        }
        grad[[r, labels[r]]] -= 1.0 / n;
    }
    (loss / n, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: u32,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// `(epoch, factor)`: after finishing `epoch`, divide the rate by `factor`.
    pub lr_drops: Vec<(u32, f64)>,
    /// Epochs whose end-of-epoch state is captured; 0 is the initialization.
    pub capture_epochs: Vec<u32>,
    /// Classical momentum coefficient; 0 disables it.
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 0.1,
            weight_decay: 0.0,
            batch_size: 32,
            seed: 0,
            lr_drops: Vec::new(),
            capture_epochs: vec![0],
            momentum: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Validation("learning rate must be finite and ≥ 0".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Validation("weight decay must be ≥ 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("batch size must be positive".into()));
        }
        if self.lr_drops.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Validation("learning-rate drop epochs must increase".into()));
        }
        if self.lr_drops.iter().any(|&(_, f)| !(f > 0.0)) {
            return Err(Error::Validation("learning-rate drop factors must be positive".into()));
        }
        if let Some(&e) = self.capture_epochs.iter().find(|&&e| e > self.epochs) {
            return Err(Error::Validation(format!(
                "capture epoch {e} beyond {} training epochs",
                self.epochs
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Validation("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Learning rate in effect during (1-based) `epoch`.
    pub fn rate_at(&self, epoch: u32) -> f64 {
        self.lr_drops
            .iter()
            .filter(|&&(e, _)| e < epoch)
            .fold(self.learning_rate, |lr, &(_, f)| lr / f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u32,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
}

/// Dataset inputs as an N×D real64 matrix.
pub fn design_matrix(ds: &LabeledDataset) -> Array2<f64> {
    Array2::from_shape_vec((ds.len(), ds.feature_dim()), ds.inputs.values_f64()).unwrap()
}

pub fn evaluate_batch(net: &Network, x: &Array2<f64>, labels: &[usize]) -> Result<Evaluation> {
    if labels.is_empty() || x.nrows() == 0 {
        return Err(Error::Validation("cannot evaluate on an empty dataset".into()));
    }
    let trace = net.forward(x)?;
    let (mean_loss, _) = cross_entropy(&trace.logits, labels);
    let correct = trace
        .logits
        .outer_iter()
        .zip(labels)
        .filter(|(row, &y)| {
            let best = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
            best.0 == y
        })
        .count();
    Ok(Evaluation {
        accuracy: correct as f64 / labels.len() as f64,
        mean_loss,
    })
}

/// Accuracy and mean cross-entropy (nats) on a dataset.
pub fn evaluate(net: &Network, ds: &LabeledDataset) -> Result<Evaluation> {
    evaluate_batch(net, &design_matrix(ds), &ds.labels)
}

/// Mini-batch SGD. `on_capture(epoch, net)` is called for epoch 0 before any
/// update (if captured) and after each captured epoch.
pub fn train_with<F>(net: &mut Network, ds: &LabeledDataset, cfg: &TrainConfig, mut on_capture: F) -> Result<Vec<EpochStats>>
where
    F: FnMut(u32, &Network) -> Result<()>,
{
    cfg.validate()?;
    if ds.feature_dim() != net.arch.input_dim {
        return Err(Error::Shape(format!(
            "dataset has {} features, network expects {}",
            ds.feature_dim(),
            net.arch.input_dim
        )));
    }
    if let Some(&bad) = ds.labels.iter().find(|&&l| l >= net.arch.output_classes) {
        return Err(Error::Validation(format!(
            "label {bad} outside the network's {} classes",
            net.arch.output_classes
        )));
    }
    let x = design_matrix(ds);
    let n = ds.len();
    if cfg.capture_epochs.contains(&0) {
        on_capture(0, net)?;
    }
    let mut velocity = if cfg.momentum > 0.0 { Some(net.zeros_like()) } else { None };
    let mut history = Vec::with_capacity(cfg.epochs as usize);
    for epoch in 1..=cfg.epochs {
        let lr = cfg.rate_at(epoch);
        let mut g = rng::stream(cfg.seed, Stream::EpochShuffle, epoch as u64);
        let order = rng::permutation(&mut g, n);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| ds.labels[i]).collect();
            let (loss, grad) = net.loss_and_gradient(&xb, &yb, cfg.weight_decay)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "training diverged at epoch {epoch}, batch {b}: loss {loss}"
                )));
            }
            loss_sum += loss * chunk.len() as f64;
            let gflat = grad.flat_params();
            match velocity.as_mut() {
                Some(v) => {
                    let mut k = 0;
                    v.for_each_param_mut(|vi| {
                        *vi = cfg.momentum * *vi + gflat[k];
                        k += 1;
                    });
                    let vflat = v.flat_params();
                    let mut k = 0;
                    net.for_each_param_mut(|p| {
                        *p -= lr * vflat[k];
                        k += 1;
                    });
                }
                None => {
                    let mut k = 0;
                    net.for_each_param_mut(|p| {
                        *p -= lr * gflat[k];
                        k += 1;
                    });
                }
            }
        }
        let eval = evaluate_batch(net, &x, &ds.labels)?;
        history.push(EpochStats {
            epoch,
            learning_rate: lr,
            train_loss: loss_sum / n as f64,
            train_accuracy: eval.accuracy,
        });
        if cfg.capture_epochs.contains(&epoch) {
            on_capture(epoch, net)?;
        }
    }
    Ok(history)
}

/// Identifiers written into the manifest of a training run.
#[derive(Debug, Clone)]
pub struct RunMeta {
    pub run_id: String,
    pub architecture: String,
    pub dataset_id: String,
}

fn dump_path(layer: usize, which: &str) -> String {
    format!("epoch_{{epoch}}/{}_{which}.nact", ArchSpec::layer_name(layer))
}

/// Train and dump every layer's pre/post activations over the full dataset at
/// each capture epoch into `dir`, then write `manifest.json` last.
pub fn train_to_dir(
    net: &mut Network,
    ds: &LabeledDataset,
    cfg: &TrainConfig,
    dir: &Path,
    meta: &RunMeta,
) -> Result<(Vec<EpochStats>, RunManifest)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let x = design_matrix(ds);
    let history = train_with(net, ds, cfg, |epoch, net| {
        let edir = dir.join(format!("epoch_{epoch}"));
        std::fs::create_dir_all(&edir).map_err(|e| Error::io(&edir, e))?;
        let trace = net.forward(&x)?;
        for (i, t) in trace.layers.iter().enumerate() {
            let name = ArchSpec::layer_name(i);
            write_nact(&ActivationTensor::from_matrix(&t.pre_activation), edir.join(format!("{name}_pre.nact")))?;
            write_nact(&ActivationTensor::from_matrix(&t.post_activation), edir.join(format!("{name}_post.nact")))?;
        }
        Ok(())
    })?;
    let mut epochs = cfg.capture_epochs.clone();
    epochs.sort_unstable();
    epochs.dedup();
    let layers = net
        .arch
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| LayerEntry {
            name: ArchSpec::layer_name(i),
            kind: match l.kind {
                LayerType::Dense => LayerKind::Dense,
                LayerType::Highway => LayerKind::Highway,
            },
            neuron_count: l.width,
            pre_act_path: dump_path(i, "pre"),
            post_act_path: dump_path(i, "post"),
        })
        .collect();
    let manifest = RunManifest {
        run_id: meta.run_id.clone(),
        architecture: meta.architecture.clone(),
        dataset_id: meta.dataset_id.clone(),
        seed: cfg.seed,
        epochs_captured: epochs,
        layers,
        provenance: Some(serde_json::json!({
            "initializer": "uniform ±sqrt(6/(fan_in+fan_out)), zero biases",
            "highway_gate_bias": HIGHWAY_GATE_BIAS,
            "weight_decay": "coupled L2 on all parameters",
            "arch": net.arch.to_string(),
            "train": cfg,
            "history": history,
        })),
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok((history, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small_arch() -> ArchSpec {
        ArchSpec {
            input_dim: 3,
            layers: vec![
                LayerSpec { kind: LayerType::Dense, width: 4 },
                LayerSpec { kind: LayerType::Highway, width: 4 },
            ],
            output_classes: 3,
        }
    }

    #[test]
    fn parse_architectures() {
        let fc = ArchSpec::parse("fc:14,64", 20, 10).unwrap();
        assert_eq!(fc.layers.iter().map(|l| l.width).collect::<Vec<_>>(), vec![14, 64]);
        let hw = ArchSpec::parse("hw:11x28", 28, 10).unwrap();
        assert_eq!(hw.layers.len(), 11);
        assert!(hw.layers.iter().all(|l| l.kind == LayerType::Highway && l.width == 28));
        let hw_entry = ArchSpec::parse("hw:11x28", 20, 10).unwrap();
        assert_eq!(hw_entry.layers.len(), 12);
        assert_eq!(hw_entry.layers[0].kind, LayerType::Dense);
        assert!(ArchSpec::parse("cnn:3", 2, 2).is_err());
        assert!(ArchSpec::parse("fc:4,0", 2, 2).is_err());
    }

    #[test]
    fn highway_width_must_match() {
        let arch = ArchSpec {
            input_dim: 3,
            layers: vec![LayerSpec { kind: LayerType::Highway, width: 4 }],
            output_classes: 2,
        };
        assert!(arch.validate().is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let arch = small_arch();
        let a = init_network(&arch, 3).unwrap();
        assert_eq!(a, init_network(&arch, 3).unwrap());
        assert_ne!(a, init_network(&arch, 4).unwrap());
        match &a.layers[0] {
            Layer::Dense(d) => {
                assert!(d.b.iter().all(|&v| v == 0.0));
                let bound = (6.0f64 / 7.0).sqrt();
                assert!(d.w.iter().all(|v| v.abs() <= bound));
            }
            _ => panic!(),
        }
        match &a.layers[1] {
            Layer::Highway { branch, gate } => {
                assert!(branch.b.iter().all(|&v| v == 0.0));
                assert!(gate.b.iter().all(|&v| v == HIGHWAY_GATE_BIAS));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn zero_network_gives_uniform_softmax() {
        let net = init_network(&small_arch(), 0).unwrap().zeros_like();
        let x = Array2::zeros((2, 3));
        let t = net.forward(&x).unwrap();
        assert!(t.logits.iter().all(|&v| v == 0.0));
        let e = evaluate_batch(&net, &x, &[0, 1]).unwrap();
        assert!((e.mean_loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dense_layer_by_hand() {
        let arch = ArchSpec {
            input_dim: 2,
            layers: vec![LayerSpec { kind: LayerType::Dense, width: 2 }],
            output_classes: 2,
        };
        let mut net = init_network(&arch, 0).unwrap();
        net.layers[0] = Layer::Dense(Affine {
            w: array![[1.0, -2.0], [0.5, 3.0]],
            b: array![0.25, -1.0],
        });
        let t = net.forward(&array![[2.0, 1.0]]).unwrap();
        // [1*2 - 2*1 + 0.25, 0.5*2 + 3*1 - 1] = [0.25, 3.0]
        assert_eq!(t.layers[0].pre_activation, array![[0.25, 3.0]]);
        assert_eq!(t.layers[0].post_activation, array![[0.25, 3.0]]);
        let t = net.forward(&array![[-2.0, 1.0]]).unwrap();
        // [-2 - 2 + 0.25, -1 + 3 - 1] = [-3.75, 1.0]
        assert_eq!(t.layers[0].pre_activation, array![[-3.75, 1.0]]);
        assert_eq!(t.layers[0].post_activation, array![[0.0, 1.0]]);
    }

    #[test]
    fn closed_gate_is_pure_carry() {
        let arch = ArchSpec {
            input_dim: 3,
            layers: vec![LayerSpec { kind: LayerType::Highway, width: 3 }],
            output_classes: 2,
        };
        let mut net = init_network(&arch, 1).unwrap();
        if let Layer::Highway { gate, .. } = &mut net.layers[0] {
            gate.w.fill(0.0);
            gate.b.fill(-800.0);
        }
        let x = array![[0.3, -1.2, 2.0], [1.0, 0.0, -0.5]];
        let t = net.forward(&x).unwrap();
        assert_eq!(t.layers[0].post_activation, x);
    }

    #[test]
    fn rate_schedule() {
        let cfg = TrainConfig {
            learning_rate: 0.1,
            lr_drops: vec![(80, 10.0), (90, 10.0)],
            epochs: 100,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.rate_at(80), 0.1);
        assert!((cfg.rate_at(81) - 0.01).abs() < 1e-15);
        assert!((cfg.rate_at(91) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn bad_train_config() {
        let cfg = TrainConfig {
            epochs: 3,
            capture_epochs: vec![4],
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dead_parameter_decays_geometrically() {
        // a hidden unit whose outgoing weights are zero and whose input is always
        // negative receives no data gradient; its incoming weights shrink by (1 − η·wd)
        let arch = ArchSpec {
            input_dim: 1,
            layers: vec![LayerSpec { kind: LayerType::Dense, width: 1 }],
            output_classes: 2,
        };
        let mut net = init_network(&arch, 0).unwrap();
        net.layers[0] = Layer::Dense(Affine { w: array![[-0.5]], b: array![-1.0] });
        net.output.w.fill(0.0);
        let ds = LabeledDataset::new(
            ActivationTensor::from_f32(vec![4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            vec![0, 1, 0, 1],
            2,
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 0.1,
            weight_decay: 0.01,
            batch_size: 2,
            capture_epochs: vec![],
            ..TrainConfig::default()
        };
        train_with(&mut net, &ds, &cfg, |_, _| Ok(())).unwrap();
        let steps = 6;
        let factor = (1.0f64 - 0.1 * 0.01).powi(steps);
        if let Layer::Dense(a) = &net.layers[0] {
            assert!((a.w[[0, 0]] - (-0.5 * factor)).abs() < 1e-15);
            assert!((a.b[0] - -factor).abs() < 1e-15);
        }
    }
}
