use rand::Rng;

use super::NeuralError;
use crate::features::SparseVector;

const ENCODER_INIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Fully connected layer `inputs -> outputs`, weights row-major by input.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub(crate) inputs: usize,
    pub(crate) outputs: usize,
    pub(crate) w: Vec<f64>,
    pub(crate) b: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let w = (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect();
        Self { inputs, outputs, w, b: vec![0.0; outputs] }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, w: vec![0.0; inputs * outputs], b: vec![0.0; outputs] }
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub(crate) fn logits(&self, hidden: &[f64]) -> Vec<f64> {
        let mut out = self.b.clone();
        for (h, &a) in hidden.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &self.w[h * self.outputs..(h + 1) * self.outputs];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += a * w;
            }
        }
        out
    }

    pub(crate) fn probs(&self, hidden: &[f64]) -> Vec<f64> {
        softmax(self.logits(hidden))
    }
}

pub(crate) fn softmax(mut logits: Vec<f64>) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in &mut logits {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in &mut logits {
        *l /= sum;
    }
    logits
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub pre: Vec<f64>,
    /// Inverted-dropout scale per hidden unit (`None` when no dropout).
    pub mask: Option<Vec<f64>>,
    pub hidden: Vec<f64>,
}

/// Shared encoder, task head and optional adversarial domain head.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub(crate) input_dim: usize,
    pub(crate) hidden_dim: usize,
    pub(crate) enc_w: Vec<f64>,
    pub(crate) enc_b: Vec<f64>,
    pub(crate) task_head: Dense,
    pub(crate) domain_head: Option<Dense>,
    pub(crate) dropout_rate: f64,
}

impl MlpModel {
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        with_domain_head: bool,
        dropout_rate: f64,
        rng: &mut impl Rng,
    ) -> Self {
        assert!((0.0..1.0).contains(&dropout_rate), "dropout_rate must lie in [0,1)");
        let enc_w = (0..input_dim * hidden_dim).map(|_| rng.random_range(-ENCODER_INIT..ENCODER_INIT)).collect();
        let task_head = Dense::new(hidden_dim, num_classes, rng);
        let domain_head = with_domain_head.then(|| Dense::new(hidden_dim, 2, rng));
        Self { input_dim, hidden_dim, enc_w, enc_b: vec![0.0; hidden_dim], task_head, domain_head, dropout_rate }
    }

    /// All parameters zero.
    pub fn zeros(input_dim: usize, hidden_dim: usize, num_classes: usize, with_domain_head: bool) -> Self {
        Self {
            input_dim,
            hidden_dim,
            enc_w: vec![0.0; input_dim * hidden_dim],
            enc_b: vec![0.0; hidden_dim],
            task_head: Dense::zeros(hidden_dim, num_classes),
            domain_head: with_domain_head.then(|| Dense::zeros(hidden_dim, 2)),
            dropout_rate: 0.0,
        }
    }

    /// A model sharing this model's encoder, with freshly initialized heads.
    pub fn with_fresh_heads(&self, num_classes: usize, with_domain_head: bool, rng: &mut impl Rng) -> Self {
        Self {
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            enc_w: self.enc_w.clone(),
            enc_b: self.enc_b.clone(),
            task_head: Dense::new(self.hidden_dim, num_classes, rng),
            domain_head: with_domain_head.then(|| Dense::new(self.hidden_dim, 2, rng)),
            dropout_rate: self.dropout_rate,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn num_classes(&self) -> usize {
        self.task_head.outputs
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn set_dropout_rate(&mut self, rate: f64) {
        assert!((0.0..1.0).contains(&rate), "dropout_rate must lie in [0,1)");
        self.dropout_rate = rate;
    }

    pub fn has_domain_head(&self) -> bool {
        self.domain_head.is_some()
    }

    pub fn task_head(&self) -> &Dense {
        &self.task_head
    }

    pub fn domain_head(&self) -> Option<&Dense> {
        self.domain_head.as_ref()
    }

    pub fn encoder_weights(&self) -> (&[f64], &[f64]) {
        (&self.enc_w, &self.enc_b)
    }

    /// Dimensions agree and every parameter is finite.
    pub fn validate(&self) -> bool {
        let heads_ok = self.task_head.inputs == self.hidden_dim
            && self.task_head.w.len() == self.hidden_dim * self.task_head.outputs
            && self.task_head.b.len() == self.task_head.outputs
            && self.domain_head.as_ref().is_none_or(|d| {
                d.inputs == self.hidden_dim && d.outputs == 2 && d.w.len() == 2 * self.hidden_dim && d.b.len() == 2
            });
        heads_ok
            && self.enc_w.len() == self.input_dim * self.hidden_dim
            && self.enc_b.len() == self.hidden_dim
            && self.parameters().all(f64::is_finite)
    }

    /// Every parameter in a fixed order: encoder weights, encoder bias,
    /// task head, then domain head.
    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        let dom = self.domain_head.iter().flat_map(|d| d.w.iter().chain(&d.b));
        self.enc_w
            .iter()
            .chain(&self.enc_b)
            .chain(&self.task_head.w)
            .chain(&self.task_head.b)
            .chain(dom)
            .copied()
    }

    pub(crate) fn check_input(&self, x: &SparseVector) -> Result<(), NeuralError> {
        if x.dimension() != self.input_dim {
            return Err(NeuralError::DimensionMismatch { expected: self.input_dim, found: x.dimension() });
        }
        Ok(())
    }

    pub(crate) fn pre_activation(&self, x: &SparseVector) -> Vec<f64> {
        let h = self.hidden_dim;
        let mut z = self.enc_b.clone();
        for (j, xj) in x.iter() {
            let row = &self.enc_w[j * h..(j + 1) * h];
            for (zk, &w) in z.iter_mut().zip(row) {
                *zk += xj * w;
            }
        }
        z
    }

    /// Draws an inverted-dropout mask, or `None` when the rate is zero (no
    /// random numbers are consumed then).
    pub(crate) fn draw_mask(&self, rng: &mut impl Rng) -> Option<Vec<f64>> {
        if self.dropout_rate == 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - self.dropout_rate);
        Some((0..self.hidden_dim).map(|_| if rng.random::<f64>() < self.dropout_rate { 0.0 } else { keep }).collect())
    }

    pub(crate) fn activate(pre: &[f64], mask: Option<&[f64]>) -> Vec<f64> {
        match mask {
            None => pre.iter().map(|&z| z.max(0.0)).collect(),
            Some(m) => pre.iter().zip(m).map(|(&z, &s)| z.max(0.0) * s).collect(),
        }
    }

    /// Hidden representation with dropout disabled.
    pub fn encode(&self, x: &SparseVector) -> Vec<f64> {
        Self::activate(&self.pre_activation(x), None)
    }

    /// Task-head probabilities in eval mode.
    ///
    /// Panics if `x` has the wrong dimension.
    pub fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        assert_eq!(x.dimension(), self.input_dim, "input dimension mismatch");
        self.task_head.probs(&self.encode(x))
    }

    pub fn predict(&self, x: &SparseVector) -> usize {
        argmax(&self.predict_proba(x))
    }

    /// Domain-head probabilities `[source, target]` in eval mode.
    pub fn domain_proba(&self, x: &SparseVector) -> Option<Vec<f64>> {
        self.domain_head.as_ref().map(|d| d.probs(&self.encode(x)))
    }

    pub fn forward(&self, x: &SparseVector, mode: Mode, rng: &mut impl Rng) -> Result<(Vec<f64>, ForwardCache), NeuralError> {
        self.check_input(x)?;
        let pre = self.pre_activation(x);
        let mask = match mode {
            Mode::Train => self.draw_mask(rng),
            Mode::Eval => None,
        };
        let hidden = Self::activate(&pre, mask.as_deref());
        let probs = self.task_head.probs(&hidden);
        Ok((probs, ForwardCache { pre, mask, hidden }))
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
