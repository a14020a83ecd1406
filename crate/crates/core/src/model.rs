//! Classifier heads trained on already-diffused features.
//!
//! Two heads: a linear map and a two-layer perceptron with ReLU. Training is
//! full-batch over the train split with softmax cross-entropy, decoupled
//! weight decay on weight matrices (not biases), and best-validation
//! snapshotting (earliest epoch wins ties).
//!
//! Dropout, when enabled, is applied to the input of every layer with
//! inverted scaling, in training mode only.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::io::{read_matrix_bin, write_matrix_file};
use crate::seed::{rng, rng_indexed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    #[default]
    Linear,
    Mlp2,
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "mlp2" | "mlp" => Ok(Self::Mlp2),
            other => Err(Error::InvalidParameter(format!("unknown head kind {other:?}"))),
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeadKind::Linear => "linear",
            HeadKind::Mlp2 => "mlp2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Adam with bias correction (β₁ = 0.9, β₂ = 0.999).
    #[default]
    Adam,
    /// Plain gradient descent.
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadConfig {
    pub kind: HeadKind,
    /// Hidden width, used by `mlp2` only.
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            kind: HeadKind::Linear,
            hidden: 32,
            dropout: 0.0,
            lr: 0.2,
            weight_decay: 1e-5,
            epochs: 100,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParameter(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParameter(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.kind == HeadKind::Mlp2 && self.hidden == 0 {
            return Err(Error::InvalidParameter("mlp2 needs hidden >= 1".into()));
        }
        Ok(())
    }
}

/// `x·w + b`; `w` is `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    fn init(fan_in: usize, fan_out: usize, r: &mut ChaCha8Rng) -> Self {
        let a = 1.0 / (fan_in.max(1) as f64).sqrt();
        let w = Array2::from_shape_simple_fn((fan_in, fan_out), || r.random_range(-a..=a));
        let b = Array1::from_shape_simple_fn(fan_out, || r.random_range(-a..=a));
        Self { w, b }
    }

    fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }

    fn zeros_like(&self) -> Self {
        Self {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    /// `None` when the validation split is empty.
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedHead {
    pub kind: HeadKind,
    pub layers: Vec<Layer>,
    pub dropout: f64,
    pub log: Vec<EpochLog>,
    /// Epoch (0-based) whose parameters were kept; `None` for an untrained head.
    pub best_epoch: Option<usize>,
}

impl TrainedHead {
    /// Fresh parameters drawn from the config seed.
    pub fn init(cfg: &HeadConfig, d_in: usize, classes: usize) -> Self {
        let mut r = rng(cfg.seed, Stream::Init);
        let layers = match cfg.kind {
            HeadKind::Linear => vec![Layer::init(d_in, classes, &mut r)],
            HeadKind::Mlp2 => vec![
                Layer::init(d_in, cfg.hidden, &mut r),
                Layer::init(cfg.hidden, classes, &mut r),
            ],
        };
        Self {
            kind: cfg.kind,
            layers,
            dropout: cfg.dropout,
            log: Vec::new(),
            best_epoch: None,
        }
    }

    pub fn d_in(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().expect("at least one layer").w.ncols()
    }

    /// Scores without dropout.
    pub fn predict_scores(&self, f: ArrayView2<'_, f64>) -> Array2<f64> {
        self.run(f, None).scores
    }
}

/// Bernoulli keep-mask with keep probability `1 − p`.
pub fn dropout_mask(shape: (usize, usize), p: f64, r: &mut ChaCha8Rng) -> Array2<bool> {
    Array2::from_shape_simple_fn(shape, || !r.random_bool(p))
}

fn apply_mask(x: ArrayView2<'_, f64>, mask: &Array2<bool>, p: f64) -> Array2<f64> {
    let scale = 1.0 / (1.0 - p);
    let mut out = x.to_owned();
    out.zip_mut_with(mask, |v, &m| *v = if m { *v * scale } else { 0.0 });
    out
}

/// Everything the backward pass needs.
struct Trace {
    /// Input to each layer after dropout.
    inputs: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<bool>>>,
    /// Hidden pre-activation (mlp2 only).
    pre: Option<Array2<f64>>,
    scores: Array2<f64>,
}

impl TrainedHead {
    fn run(&self, f: ArrayView2<'_, f64>, mut dropout_rng: Option<&mut ChaCha8Rng>) -> Trace {
        let p = self.dropout;
        let mut masks = Vec::new();
        let mut inputs = Vec::new();
        let mut drop = |x: ArrayView2<'_, f64>, masks: &mut Vec<Option<Array2<bool>>>| -> Array2<f64> {
            match dropout_rng.as_deref_mut() {
                Some(r) if p > 0.0 => {
                    let m = dropout_mask(x.dim(), p, r);
                    let out = apply_mask(x, &m, p);
                    masks.push(Some(m));
                    out
                }
                _ => {
                    masks.push(None);
                    x.to_owned()
                }
            }
        };
        match self.kind {
            HeadKind::Linear => {
                let x0 = drop(f, &mut masks);
                let scores = self.layers[0].apply(x0.view());
                inputs.push(x0);
                Trace {
                    inputs,
                    masks,
                    pre: None,
                    scores,
                }
            }
            HeadKind::Mlp2 => {
                let x0 = drop(f, &mut masks);
                let pre = self.layers[0].apply(x0.view());
                let h = pre.mapv(|v| v.max(0.0));
                let x1 = drop(h.view(), &mut masks);
                let scores = self.layers[1].apply(x1.view());
                inputs.push(x0);
                inputs.push(x1);
                Trace {
                    inputs,
                    masks,
                    pre: Some(pre),
                    scores,
                }
            }
        }
    }

    /// Mean cross-entropy and its gradient for rows `f` with `labels`.
    fn loss_and_grad(&self, trace: &Trace, labels: &[usize]) -> (f64, Vec<Layer>) {
        let m = labels.len() as f64;
        let (loss, mut dz) = softmax_xent(trace.scores.view(), labels);
        dz.mapv_inplace(|v| v / m);
        let loss = loss / m;
        let mut grads: Vec<Layer> = self.layers.iter().map(Layer::zeros_like).collect();
        let last = self.layers.len() - 1;
        grads[last].w = trace.inputs[last].t().dot(&dz);
        grads[last].b = dz.sum_axis(Axis(0));
        if self.kind == HeadKind::Mlp2 {
            let mut dh = dz.dot(&self.layers[1].w.t());
            if let Some(mask) = &trace.masks[1] {
                dh = apply_mask(dh.view(), mask, self.dropout);
            }
            let pre = trace.pre.as_ref().expect("mlp2 trace has pre-activations");
            dh.zip_mut_with(pre, |g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            });
            grads[0].w = trace.inputs[0].t().dot(&dh);
            grads[0].b = dh.sum_axis(Axis(0));
        }
        (loss, grads)
    }
}

/// Summed cross-entropy and `softmax(z) − onehot(y)` per row.
fn softmax_xent(z: ArrayView2<'_, f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let mut p = z.to_owned();
    let mut loss = 0.0;
    for (mut row, &y) in p.rows_mut().into_iter().zip(labels) {
        let mx = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let zy = row[y] - mx;
        row.mapv_inplace(|v| (v - mx).exp());
        let s = row.sum();
        loss += s.ln() - zy;
        row.mapv_inplace(|v| v / s);
        row[y] -= 1.0;
    }
    (loss, p)
}

/// Class scores. With `training`, dropout masks are drawn from `seed`.
pub fn forward(head: &TrainedHead, f: &FeatureMatrix, training: bool, seed: u64) -> Result<Array2<f64>> {
    if f.d() != head.d_in() {
        return Err(Error::Shape(format!(
            "head expects {} features, got {}",
            head.d_in(),
            f.d()
        )));
    }
    if training {
        let mut r = rng(seed, Stream::Dropout);
        Ok(head.run(f.view(), Some(&mut r)).scores)
    } else {
        Ok(head.run(f.view(), None).scores)
    }
}

/// Argmax per row; ties go to the lowest class index.
pub fn predict(scores: ArrayView2<'_, f64>) -> Vec<usize> {
    scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn accuracy_on(scores: ArrayView2<'_, f64>, labels: &[usize], idx: &[usize]) -> f64 {
    let pred = predict(scores);
    let hits = idx.iter().filter(|&&i| pred[i] == labels[i]).count();
    hits as f64 / idx.len() as f64
}

pub fn evaluate(head: &TrainedHead, f: &FeatureMatrix, ds: &LabeledDataset, split: Split) -> Result<f64> {
    let idx = ds.splits.get(split);
    if idx.is_empty() {
        return Err(Error::Domain(format!("{split:?} split is empty")));
    }
    let scores = forward(head, f, false, 0)?;
    Ok(accuracy_on(scores.view(), &ds.labels, idx))
}

struct AdamState {
    m: Vec<Layer>,
    v: Vec<Layer>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn step(layers: &mut [Layer], grads: &[Layer], cfg: &HeadConfig, adam: &mut AdamState) {
    adam.t += 1;
    let (c1, c2) = (1.0 - BETA1.powi(adam.t), 1.0 - BETA2.powi(adam.t));
    for (k, (layer, g)) in layers.iter_mut().zip(grads).enumerate() {
        // decoupled decay, weights only
        if cfg.weight_decay > 0.0 {
            let shrink = 1.0 - cfg.lr * cfg.weight_decay;
            layer.w.mapv_inplace(|w| w * shrink);
        }
        match cfg.optimizer {
            Optimizer::Sgd => {
                layer.w.scaled_add(-cfg.lr, &g.w);
                layer.b.scaled_add(-cfg.lr, &g.b);
            }
            Optimizer::Adam => {
                let (m, v) = (&mut adam.m[k], &mut adam.v[k]);
                let upd = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    *p -= cfg.lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                };
                ndarray::Zip::from(&mut layer.w)
                    .and(&mut m.w)
                    .and(&mut v.w)
                    .and(&g.w)
                    .for_each(|p, m, v, &g| upd(p, m, v, g));
                ndarray::Zip::from(&mut layer.b)
                    .and(&mut m.b)
                    .and(&mut v.b)
                    .and(&g.b)
                    .for_each(|p, m, v, &g| upd(p, m, v, g));
            }
        }
    }
}

/// Trains on `f`, which must already be the diffused feature matrix.
pub fn train_head(f: &FeatureMatrix, ds: &LabeledDataset, cfg: &HeadConfig) -> Result<TrainedHead> {
    cfg.validate()?;
    if f.n() != ds.n() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} labelled nodes",
            f.n(),
            ds.n()
        )));
    }
    let train = &ds.splits.train;
    if train.is_empty() && cfg.epochs > 0 {
        return Err(Error::Domain("train split is empty".into()));
    }
    let mut head = TrainedHead::init(cfg, f.d(), ds.num_classes);
    let x_train = f.as_array().select(Axis(0), train);
    let y_train: Vec<usize> = train.iter().map(|&i| ds.labels[i]).collect();
    let val = &ds.splits.val;

    let mut adam = AdamState {
        m: head.layers.iter().map(Layer::zeros_like).collect(),
        v: head.layers.iter().map(Layer::zeros_like).collect(),
        t: 0,
    };
    let mut best: Option<(f64, usize, Vec<Layer>)> = None;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut r = rng_indexed(cfg.seed, Stream::Dropout, epoch as u64);
        let trace = head.run(x_train.view(), Some(&mut r));
        let (loss, grads) = head.loss_and_grad(&trace, &y_train);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training loss became {loss} at epoch {epoch}; lower the learning rate or check the features"
            )));
        }
        step(&mut head.layers, &grads, cfg, &mut adam);

        let val_acc = (!val.is_empty()).then(|| accuracy_on(head.predict_scores(f.view()).view(), &ds.labels, val));
        if let Some(acc) = val_acc {
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, epoch, head.layers.clone()));
            }
        }
        log.push(EpochLog { epoch, loss, val_acc });
    }
    head.log = log;
    match best {
        Some((_, epoch, layers)) => {
            head.layers = layers;
            head.best_epoch = Some(epoch);
        }
        None if cfg.epochs > 0 => head.best_epoch = Some(cfg.epochs - 1),
        None => {}
    }
    Ok(head)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub kind: HeadKind,
    pub trials: usize,
    pub tolerance: f64,
    pub max_rel_diff: f64,
    pub passed: bool,
}

const FD_STEP: f64 = 1e-5;
/// Denominator floor for the relative difference, so that gradients that are
/// zero up to rounding do not blow the ratio up.
const REL_FLOOR: f64 = 1e-4;

/// Analytic vs central-difference gradients of the cross-entropy loss on
/// small random instances, dropout off. For mlp2, instances whose hidden
/// pre-activations come within 1e-3 of the ReLU kink are redrawn.
pub fn gradient_check(cfg: &HeadConfig, trials: usize, tolerance: f64) -> GradCheckReport {
    let (n, d, classes) = (12usize, 5usize, 3usize);
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let mut r = rng_indexed(cfg.seed, Stream::Verify, trial as u64);
        let (head, x, y) = loop {
            let x = Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(&mut r));
            let y: Vec<usize> = (0..n).map(|_| r.random_range(0..classes)).collect();
            let sub = HeadConfig {
                seed: r.random(),
                hidden: cfg.hidden.clamp(1, 8),
                dropout: 0.0,
                ..*cfg
            };
            let head = TrainedHead::init(&sub, d, classes);
            let trace = head.run(x.view(), None);
            if trace.pre.as_ref().is_none_or(|p| p.iter().all(|v| v.abs() > 1e-3)) {
                break (head, x, y);
            }
        };
        worst = worst.max(max_rel_grad_diff(&head, x.view(), &y));
    }
    GradCheckReport {
        kind: cfg.kind,
        trials,
        tolerance,
        max_rel_diff: worst,
        passed: worst < tolerance,
    }
}

fn max_rel_grad_diff(head: &TrainedHead, x: ArrayView2<'_, f64>, y: &[usize]) -> f64 {
    let loss_at = |h: &TrainedHead| h.loss_and_grad(&h.run(x, None), y).0;
    let (_, grads) = head.loss_and_grad(&head.run(x, None), y);
    let mut worst = 0.0f64;
    let mut probe = head.clone();
    for (k, g) in grads.iter().enumerate() {
        for (idx, &a) in g.w.indexed_iter() {
            let orig = probe.layers[k].w[idx];
            probe.layers[k].w[idx] = orig + FD_STEP;
            let lp = loss_at(&probe);
            probe.layers[k].w[idx] = orig - FD_STEP;
            let lm = loss_at(&probe);
            probe.layers[k].w[idx] = orig;
            worst = worst.max(rel_diff(a, (lp - lm) / (2.0 * FD_STEP)));
        }
        for (idx, &a) in g.b.indexed_iter() {
            let orig = probe.layers[k].b[idx];
            probe.layers[k].b[idx] = orig + FD_STEP;
            let lp = loss_at(&probe);
            probe.layers[k].b[idx] = orig - FD_STEP;
            let lm = loss_at(&probe);
            probe.layers[k].b[idx] = orig;
            worst = worst.max(rel_diff(a, (lp - lm) / (2.0 * FD_STEP)));
        }
    }
    worst
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Analytic gradient of the mean cross-entropy over all rows of `x`, without
/// dropout. Exposed for tests.
pub fn loss_gradient(head: &TrainedHead, x: ArrayView2<'_, f64>, labels: &[usize]) -> (f64, Vec<Layer>) {
    head.loss_and_grad(&head.run(x, None), labels)
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    kind: HeadKind,
    dropout: f64,
    best_epoch: Option<usize>,
    layers: Vec<ManifestLayer>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestLayer {
    weights: String,
    bias: String,
    fan_in: usize,
    fan_out: usize,
}

/// Writes `layer{k}_w.bin`, `layer{k}_b.bin` (bias as a `1 × out` matrix),
/// `head.json` and `train_log.csv` into `dir`.
pub fn save_head(head: &TrainedHead, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut layers = Vec::new();
    for (k, layer) in head.layers.iter().enumerate() {
        let wname = format!("layer{k}_w.bin");
        let bname = format!("layer{k}_b.bin");
        write_matrix_file(&dir.join(&wname), layer.w.view())?;
        let b = layer.b.view().insert_axis(Axis(0));
        write_matrix_file(&dir.join(&bname), b)?;
        layers.push(ManifestLayer {
            weights: wname,
            bias: bname,
            fan_in: layer.w.nrows(),
            fan_out: layer.w.ncols(),
        });
    }
    let manifest = Manifest {
        kind: head.kind,
        dropout: head.dropout,
        best_epoch: head.best_epoch,
        layers,
    };
    let path = dir.join("head.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    let path = dir.join("train_log.csv");
    let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_log_csv(&head.log, BufWriter::new(f)).map_err(|e| Error::io(&path, e))
}

pub fn write_log_csv<W: Write>(log: &[EpochLog], mut w: W) -> std::io::Result<()> {
    writeln!(w, "epoch,loss,val_acc")?;
    for e in log {
        match e.val_acc {
            Some(a) => writeln!(w, "{},{:?},{:?}", e.epoch, e.loss, a)?,
            None => writeln!(w, "{},{:?},", e.epoch, e.loss)?,
        }
    }
    w.flush()
}

/// Reads parameters written by [`save_head`]. The training log is not restored.
pub fn load_head(dir: &Path) -> Result<TrainedHead> {
    let path = dir.join("head.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::input(path.display().to_string(), Some(e.line()), e.to_string()))?;
    let read = |name: &str| -> Result<Array2<f64>> {
        let p = dir.join(name);
        let f = File::open(&p).map_err(|e| Error::io(&p, e))?;
        read_matrix_bin(std::io::BufReader::new(f), &p.display().to_string())
    };
    let mut layers = Vec::new();
    for l in &manifest.layers {
        let w = read(&l.weights)?;
        let b = read(&l.bias)?;
        if w.dim() != (l.fan_in, l.fan_out) || b.dim() != (1, l.fan_out) {
            return Err(Error::input(
                path.display().to_string(),
                None,
                "layer shapes disagree with manifest",
            ));
        }
        layers.push(Layer {
            w,
            b: b.row(0).to_owned(),
        });
    }
    Ok(TrainedHead {
        kind: manifest.kind,
        layers,
        dropout: manifest.dropout,
        log: Vec::new(),
        best_epoch: manifest.best_epoch,
    })
}
