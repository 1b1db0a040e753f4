//! Losses and batch gradients shared by the trainers and the checker.

use std::collections::HashMap;

use super::model::{softmax, Dense, MlpModel};
use super::NeuralError;
use crate::features::SparseVector;

const PROB_FLOOR: f64 = 1e-12;

/// `-ln p[gold]` with the probability floored at 1e-12.
pub fn cross_entropy(probs: &[f64], gold: usize) -> f64 {
    -probs[gold].max(PROB_FLOOR).ln()
}

/// Cross-entropy against `(1-α)·onehot(gold) + α/C`.
pub fn smoothed_cross_entropy(probs: &[f64], gold: usize, alpha: f64) -> Result<f64, NeuralError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(NeuralError::InvalidAlpha(alpha));
    }
    let q = smoothed_target(probs.len(), gold, alpha);
    Ok(-q.iter().zip(probs).map(|(q, p)| q * p.max(PROB_FLOOR).ln()).sum::<f64>())
}

pub(crate) fn smoothed_target(classes: usize, gold: usize, alpha: f64) -> Vec<f64> {
    let mut q = vec![alpha / classes as f64; classes];
    q[gold] += 1.0 - alpha;
    q
}

/// Identity forward, `-λ·g` backward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReverse {
    pub lambda: f64,
}

impl GradReverse {
    pub fn forward(&self, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    pub fn backward(&self, g: &[f64]) -> Vec<f64> {
        g.iter().map(|x| -self.lambda * x).collect()
    }
}

/// Gradient rows for a row-per-feature matrix, keyed by feature index in
/// first-touch order.
#[derive(Debug, Clone)]
pub(crate) struct RowGrads {
    width: usize,
    slots: HashMap<u32, usize>,
    rows: Vec<u32>,
    data: Vec<f64>,
}

impl RowGrads {
    pub(crate) fn new(width: usize) -> Self {
        Self { width, slots: HashMap::new(), rows: Vec::new(), data: Vec::new() }
    }

    pub(crate) fn clear(&mut self) {
        self.slots.clear();
        self.rows.clear();
        self.data.clear();
    }

    pub(crate) fn row_mut(&mut self, index: u32) -> &mut [f64] {
        let width = self.width;
        let slot = *self.slots.entry(index).or_insert_with(|| {
            self.rows.push(index);
            self.data.resize(self.data.len() + width, 0.0);
            self.rows.len() - 1
        });
        &mut self.data[slot * width..(slot + 1) * width]
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = (u32, &[f64])> {
        self.rows.iter().copied().zip(self.data.chunks_exact(self.width.max(1)))
    }

    pub(crate) fn get(&self, index: u32) -> Option<&[f64]> {
        self.slots.get(&index).map(|&s| &self.data[s * self.width..(s + 1) * self.width])
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DenseGrad {
    pub(crate) w: Vec<f64>,
    pub(crate) b: Vec<f64>,
}

impl DenseGrad {
    fn for_head(head: &Dense) -> Self {
        Self { w: vec![0.0; head.w.len()], b: vec![0.0; head.b.len()] }
    }

    fn clear(&mut self) {
        self.w.fill(0.0);
        self.b.fill(0.0);
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Grads {
    pub(crate) enc: RowGrads,
    pub(crate) enc_b: Vec<f64>,
    pub(crate) task: DenseGrad,
    pub(crate) domain: Option<DenseGrad>,
}

impl Grads {
    pub(crate) fn for_model(model: &MlpModel) -> Self {
        Self {
            enc: RowGrads::new(model.hidden_dim),
            enc_b: vec![0.0; model.hidden_dim],
            task: DenseGrad::for_head(&model.task_head),
            domain: model.domain_head.as_ref().map(DenseGrad::for_head),
        }
    }

    pub(crate) fn clear(&mut self) {
        self.enc.clear();
        self.enc_b.fill(0.0);
        self.task.clear();
        if let Some(d) = &mut self.domain {
            d.clear();
        }
    }
}

/// Reconstruction head used only during denoising pretraining: one
/// logistic output per input feature, weights row-major by output.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ReconHead {
    pub(crate) hidden: usize,
    pub(crate) w: Vec<f64>,
    pub(crate) b: Vec<f64>,
}

impl ReconHead {
    pub(crate) fn new(outputs: usize, hidden: usize, rng: &mut impl rand::Rng) -> Self {
        let limit = (6.0 / (hidden + 1) as f64).sqrt();
        let w = (0..outputs * hidden).map(|_| rng.random_range(-limit..limit)).collect();
        Self { hidden, w, b: vec![0.0; outputs] }
    }

    fn logit(&self, j: u32, a: &[f64]) -> f64 {
        let j = j as usize;
        let row = &self.w[j * self.hidden..(j + 1) * self.hidden];
        self.b[j] + row.iter().zip(a).map(|(w, a)| w * a).sum::<f64>()
    }
}

/// A corrupted input and the reconstruction targets scored for it.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DenoiseExample {
    pub(crate) input: SparseVector,
    pub(crate) targets: Vec<(u32, f64)>,
}

fn head_backward(head: &Dense, grad: &mut DenseGrad, hidden: &[f64], dlogits: &[f64], dhidden: &mut [f64]) {
    let c = head.outputs;
    for (h, &a) in hidden.iter().enumerate() {
        let wrow = &head.w[h * c..(h + 1) * c];
        let grow = &mut grad.w[h * c..(h + 1) * c];
        let mut back = 0.0;
        for k in 0..c {
            grow[k] += a * dlogits[k];
            back += wrow[k] * dlogits[k];
        }
        dhidden[h] += back;
    }
    for (b, d) in grad.b.iter_mut().zip(dlogits) {
        *b += d;
    }
}

fn encoder_backward(enc: &mut RowGrads, enc_b: &mut [f64], x: &SparseVector, pre: &[f64], mask: Option<&[f64]>, dhidden: &[f64]) {
    let dz: Vec<f64> = match mask {
        None => pre.iter().zip(dhidden).map(|(&z, &d)| if z > 0.0 { d } else { 0.0 }).collect(),
        Some(m) => pre.iter().zip(dhidden).zip(m).map(|((&z, &d), &s)| if z > 0.0 { d * s } else { 0.0 }).collect(),
    };
    if dz.iter().all(|&v| v == 0.0) {
        return;
    }
    for (b, d) in enc_b.iter_mut().zip(&dz) {
        *b += d;
    }
    for (j, xj) in x.iter() {
        for (g, d) in enc.row_mut(j as u32).iter_mut().zip(&dz) {
            *g += xj * d;
        }
    }
}

/// Mean smoothed cross-entropy over `batch` under the given dropout masks.
/// Accumulates `∂loss/∂θ` into `grads` when provided.
pub(crate) fn supervised_batch(
    model: &MlpModel,
    batch: &[(&SparseVector, usize)],
    masks: &[Option<Vec<f64>>],
    alpha: f64,
    mut grads: Option<&mut Grads>,
) -> f64 {
    let n = batch.len() as f64;
    let classes = model.num_classes();
    let mut loss = 0.0;
    for (&(x, y), mask) in batch.iter().zip(masks) {
        let pre = model.pre_activation(x);
        let hidden = MlpModel::activate(&pre, mask.as_deref());
        let probs = softmax(model.task_head.logits(&hidden));
        let q = smoothed_target(classes, y, alpha);
        loss += -q.iter().zip(&probs).map(|(q, p)| q * p.max(PROB_FLOOR).ln()).sum::<f64>();
        if let Some(g) = grads.as_deref_mut() {
            let dlogits: Vec<f64> = probs.iter().zip(&q).map(|(p, q)| (p - q) / n).collect();
            let mut dhidden = vec![0.0; model.hidden_dim];
            head_backward(&model.task_head, &mut g.task, &hidden, &dlogits, &mut dhidden);
            encoder_backward(&mut g.enc, &mut g.enc_b, x, &pre, mask.as_deref(), &dhidden);
        }
    }
    loss / n
}

/// Mean domain-classification cross-entropy over `batch` (labels 0 =
/// source, 1 = target). The encoder receives the head gradient through a
/// gradient-reversal layer with strength `lambda`.
pub(crate) fn domain_batch(
    model: &MlpModel,
    batch: &[(&SparseVector, usize)],
    masks: &[Option<Vec<f64>>],
    lambda: f64,
    mut grads: Option<&mut Grads>,
) -> f64 {
    let head = model.domain_head.as_ref().expect("domain head required");
    let reverse = GradReverse { lambda };
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for (&(x, d), mask) in batch.iter().zip(masks) {
        let pre = model.pre_activation(x);
        let hidden = reverse.forward(&MlpModel::activate(&pre, mask.as_deref()));
        let probs = softmax(head.logits(&hidden));
        loss += cross_entropy(&probs, d);
        if let Some(g) = grads.as_deref_mut() {
            let mut dlogits: Vec<f64> = probs.iter().map(|p| p / n).collect();
            dlogits[d] -= 1.0 / n;
            let mut dhidden = vec![0.0; model.hidden_dim];
            let dg = g.domain.as_mut().expect("domain gradient slot");
            head_backward(head, dg, &hidden, &dlogits, &mut dhidden);
            let dhidden = reverse.backward(&dhidden);
            encoder_backward(&mut g.enc, &mut g.enc_b, x, &pre, mask.as_deref(), &dhidden);
        }
    }
    loss / n
}

fn log_sigmoid_loss(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean over examples of the mean binary cross-entropy over each example's
/// reconstruction targets.
pub(crate) fn denoise_batch(
    model: &MlpModel,
    recon: &ReconHead,
    batch: &[DenoiseExample],
    masks: &[Option<Vec<f64>>],
    mut grads: Option<(&mut Grads, &mut RowGrads)>,
) -> f64 {
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for (ex, mask) in batch.iter().zip(masks) {
        let pre = model.pre_activation(&ex.input);
        let hidden = MlpModel::activate(&pre, mask.as_deref());
        let m = ex.targets.len() as f64;
        let mut dhidden = vec![0.0; model.hidden_dim];
        let mut ex_loss = 0.0;
        for &(j, y) in &ex.targets {
            let l = recon.logit(j, &hidden);
            ex_loss += log_sigmoid_loss(l, y);
            if let Some((_, rg)) = grads.as_mut() {
                let dl = (sigmoid(l) - y) / (m * n);
                let row = rg.row_mut(j);
                for (g, a) in row.iter_mut().zip(&hidden) {
                    *g += dl * a;
                }
                row[recon.hidden] += dl;
                let wrow = &recon.w[j as usize * recon.hidden..(j as usize + 1) * recon.hidden];
                for (d, w) in dhidden.iter_mut().zip(wrow) {
                    *d += dl * w;
                }
            }
        }
        loss += ex_loss / m;
        if let Some((g, _)) = grads.as_mut() {
            encoder_backward(&mut g.enc, &mut g.enc_b, &ex.input, &pre, mask.as_deref(), &dhidden);
        }
    }
    loss / n
}
