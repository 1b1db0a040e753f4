//! Parameter updates. Both optimizers treat encoder rows sparsely: a row
//! is only updated on steps where its input feature was active, and the
//! weight decay it missed meanwhile is applied on its next touch.

use serde::{Deserialize, Serialize};

use super::grads::{Grads, ReconHead, RowGrads};
use super::model::{Dense, MlpModel};
use super::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    /// Adam with decoupled weight decay; moments of untouched encoder rows
    /// are left as they are.
    #[default]
    Adam,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First and second moments of one parameter block.
#[derive(Debug, Clone, Default)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n] }
    }
}

/// Step size of the current step: plain for SGD, bias-corrected for Adam.
#[derive(Debug, Clone, Copy)]
struct Step {
    kind: OptimizerKind,
    lr: f64,
}

impl Step {
    fn update(self, params: &mut [f64], grads: &[f64], keep: f64, state: Option<(&mut [f64], &mut [f64])>) {
        match (self.kind, state) {
            (OptimizerKind::Adam, Some((m, v))) => {
                for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    *p = *p * keep - self.lr * *m / (v.sqrt() + EPS);
                }
            }
            _ => {
                for (p, &g) in params.iter_mut().zip(grads) {
                    *p = *p * keep - self.lr * g;
                }
            }
        }
    }
}

fn slices(state: &mut Option<Moments>, range: std::ops::Range<usize>) -> Option<(&mut [f64], &mut [f64])> {
    state.as_mut().map(|s| (&mut s.m[range.clone()], &mut s.v[range]))
}

fn whole(state: &mut Option<Moments>) -> Option<(&mut [f64], &mut [f64])> {
    state.as_mut().map(|s| (s.m.as_mut_slice(), s.v.as_mut_slice()))
}

struct HeadState {
    w: Option<Moments>,
    b: Option<Moments>,
}

impl HeadState {
    fn new(head: &Dense, adam: bool) -> Self {
        Self { w: adam.then(|| Moments::new(head.w.len())), b: adam.then(|| Moments::new(head.b.len())) }
    }
}

/// Optimizer state for one training call. Biases are not decayed.
pub(crate) struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    keep: f64,
    step: u32,
    enc_last: Vec<u32>,
    enc: Option<Moments>,
    enc_b: Option<Moments>,
    task: HeadState,
    domain: Option<HeadState>,
    recon: Option<Moments>,
}

impl Optimizer {
    pub(crate) fn new(cfg: &TrainConfig, model: &MlpModel) -> Self {
        let adam = cfg.optimizer == OptimizerKind::Adam;
        let moments = |n: usize| adam.then(|| Moments::new(n));
        Self {
            kind: cfg.optimizer,
            lr: cfg.learning_rate,
            keep: 1.0 - cfg.learning_rate * cfg.weight_decay,
            step: 0,
            enc_last: vec![0; model.input_dim],
            enc: moments(model.enc_w.len()),
            enc_b: moments(model.hidden_dim),
            task: HeadState::new(&model.task_head, adam),
            domain: model.domain_head.as_ref().map(|h| HeadState::new(h, adam)),
            recon: None,
        }
    }

    fn current(&self) -> Step {
        let lr = match self.kind {
            OptimizerKind::Sgd => self.lr,
            OptimizerKind::Adam => {
                let t = self.step as i32;
                self.lr * (1.0 - BETA2.powi(t)).sqrt() / (1.0 - BETA1.powi(t))
            }
        };
        Step { kind: self.kind, lr }
    }

    fn decay(&self, row: &mut [f64], pending: u32) {
        if pending > 0 && self.keep != 1.0 {
            let f = self.keep.powi(pending as i32);
            row.iter_mut().for_each(|w| *w *= f);
        }
    }

    fn dense(step: Step, keep: f64, head: &mut Dense, state: &mut HeadState, w: &[f64], b: &[f64]) {
        step.update(&mut head.w, w, keep, whole(&mut state.w));
        step.update(&mut head.b, b, 1.0, whole(&mut state.b));
    }

    pub(crate) fn apply(&mut self, model: &mut MlpModel, g: &Grads) {
        self.step += 1;
        let step = self.current();
        let h = model.hidden_dim;
        for (j, grow) in g.enc.iter() {
            let j = j as usize;
            let range = j * h..(j + 1) * h;
            let pending = self.step - 1 - self.enc_last[j];
            self.decay(&mut model.enc_w[range.clone()], pending);
            step.update(&mut model.enc_w[range.clone()], grow, self.keep, slices(&mut self.enc, range));
            self.enc_last[j] = self.step;
        }
        step.update(&mut model.enc_b, &g.enc_b, 1.0, whole(&mut self.enc_b));
        Self::dense(step, self.keep, &mut model.task_head, &mut self.task, &g.task.w, &g.task.b);
        if let (Some(head), Some(state), Some(dg)) = (model.domain_head.as_mut(), self.domain.as_mut(), g.domain.as_ref()) {
            Self::dense(step, self.keep, head, state, &dg.w, &dg.b);
        }
    }

    /// Reconstruction rows (`hidden` weights then the bias) are updated
    /// without decay, at the step of the preceding [`Optimizer::apply`].
    pub(crate) fn apply_recon(&mut self, recon: &mut ReconHead, g: &RowGrads) {
        let step = self.current();
        let h = recon.hidden;
        if self.kind == OptimizerKind::Adam && self.recon.is_none() {
            self.recon = Some(Moments::new(recon.b.len() * (h + 1)));
        }
        for (j, grow) in g.iter() {
            let j = j as usize;
            let state = j * (h + 1)..(j + 1) * (h + 1);
            let mut row: Vec<f64> = recon.w[j * h..(j + 1) * h].to_vec();
            row.push(recon.b[j]);
            step.update(&mut row, grow, 1.0, slices(&mut self.recon, state));
            recon.w[j * h..(j + 1) * h].copy_from_slice(&row[..h]);
            recon.b[j] = row[h];
        }
    }

    /// Settles the decay owed by rows untouched since their last update.
    pub(crate) fn finish(&mut self, model: &mut MlpModel) {
        let h = model.hidden_dim;
        for j in 0..model.input_dim {
            let pending = self.step - self.enc_last[j];
            self.decay(&mut model.enc_w[j * h..(j + 1) * h], pending);
            self.enc_last[j] = self.step;
        }
    }
}
