//! Central-difference verification of the hand-written gradients on a toy
//! model.

use rand::Rng;

use super::grads::{denoise_batch, domain_batch, supervised_batch, DenoiseExample, Grads, ReconHead, RowGrads};
use super::model::MlpModel;
use super::train::corrupt;
use crate::features::SparseVector;
use crate::rng::{stream, StreamRng};

const STEP: f64 = 1e-5;
const KINK_MARGIN: f64 = 1e-3;
const DIM: usize = 24;
const HIDDEN: usize = 6;
const CLASSES: usize = 3;
const DROPOUT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CheckKind {
    CrossEntropy,
    Smoothed(f64),
    Denoising,
    Dann(f64),
}

impl CheckKind {
    /// Plain CE, smoothing 0.1, denoising, and adversarial with λ = 0.3.
    pub fn standard() -> [CheckKind; 4] {
        [CheckKind::CrossEntropy, CheckKind::Smoothed(0.1), CheckKind::Denoising, CheckKind::Dann(0.3)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub kind: CheckKind,
    /// Largest `|a - n| / max(|a|, |n|, 1e-8)` over all parameters.
    pub max_rel_error: f64,
    pub parameters: usize,
    pub worst: String,
}

#[derive(Clone, Copy, PartialEq)]
enum Group {
    EncW,
    EncB,
    TaskW,
    TaskB,
    DomW,
    DomB,
    ReconW,
    ReconB,
}

struct Toy {
    model: MlpModel,
    recon: ReconHead,
    labeled: Vec<(SparseVector, usize)>,
    masks: Vec<Option<Vec<f64>>>,
    domain: Vec<(SparseVector, usize)>,
    domain_masks: Vec<Option<Vec<f64>>>,
    denoise: Vec<DenoiseExample>,
    denoise_masks: Vec<Option<Vec<f64>>>,
}

fn random_input(rng: &mut StreamRng, active: usize) -> SparseVector {
    let pairs: Vec<(usize, f64)> = (0..active)
        .map(|_| {
            let v = rng.random_range(0.5..1.5);
            (rng.random_range(0..DIM), if rng.random::<bool>() { v } else { -v })
        })
        .collect();
    SparseVector::from_pairs(DIM, pairs)
}

/// Inputs and model used by [`grad_check`]. Redraws until every hidden
/// pre-activation sits at least 1e-3 from the ReLU kink, so a step of 1e-5
/// never crosses it.
fn toy(seed: u64) -> Toy {
    for attempt in 0.. {
        let mut rng = stream(seed, attempt);
        let mut model = MlpModel::new(DIM, HIDDEN, CLASSES, true, DROPOUT, &mut rng);
        for b in model.enc_b.iter_mut() {
            *b = rng.random_range(-0.2..0.2);
        }
        let recon = ReconHead::new(DIM, HIDDEN, &mut rng);
        let labeled: Vec<_> = (0..5).map(|i| (random_input(&mut rng, 4), i % CLASSES)).collect();
        let domain: Vec<_> = (0..6).map(|i| (random_input(&mut rng, 3), i % 2)).collect();
        let mut denoise = Vec::new();
        while denoise.len() < 4 {
            if let Some(ex) = corrupt(&random_input(&mut rng, 14), &mut rng) {
                denoise.push(ex);
            }
        }
        let mut mask = |n: usize| (0..n).map(|_| model.draw_mask(&mut rng)).collect::<Vec<_>>();
        let masks = mask(labeled.len());
        let domain_masks = mask(domain.len());
        let denoise_masks = mask(denoise.len());
        let inputs = labeled.iter().chain(&domain).map(|(x, _)| x).chain(denoise.iter().map(|d| &d.input));
        let clear = inputs.flat_map(|x| model.pre_activation(x)).all(|z| z.abs() > KINK_MARGIN);
        if clear {
            return Toy { model, recon, labeled, masks, domain, domain_masks, denoise, denoise_masks };
        }
    }
    unreachable!()
}

impl Toy {
    fn labeled_refs(&self) -> Vec<(&SparseVector, usize)> {
        self.labeled.iter().map(|(x, y)| (x, *y)).collect()
    }

    fn domain_refs(&self) -> Vec<(&SparseVector, usize)> {
        self.domain.iter().map(|(x, y)| (x, *y)).collect()
    }

    /// The scalar whose derivative the given group's analytic gradient
    /// should equal.
    fn objective(&self, kind: CheckKind, group: Group) -> f64 {
        let task = |alpha| supervised_batch(&self.model, &self.labeled_refs(), &self.masks, alpha, None);
        match kind {
            CheckKind::CrossEntropy => task(0.0),
            CheckKind::Smoothed(alpha) => task(alpha),
            CheckKind::Denoising => denoise_batch(&self.model, &self.recon, &self.denoise, &self.denoise_masks, None),
            CheckKind::Dann(lambda) => {
                let dom = domain_batch(&self.model, &self.domain_refs(), &self.domain_masks, lambda, None);
                match group {
                    Group::EncW | Group::EncB => task(0.0) - lambda * dom,
                    Group::TaskW | Group::TaskB => task(0.0),
                    _ => dom,
                }
            }
        }
    }

    fn analytic(&self, kind: CheckKind) -> (Grads, RowGrads) {
        let mut g = Grads::for_model(&self.model);
        let mut rg = RowGrads::new(HIDDEN + 1);
        let labeled = self.labeled_refs();
        match kind {
            CheckKind::CrossEntropy => {
                supervised_batch(&self.model, &labeled, &self.masks, 0.0, Some(&mut g));
            }
            CheckKind::Smoothed(alpha) => {
                supervised_batch(&self.model, &labeled, &self.masks, alpha, Some(&mut g));
            }
            CheckKind::Denoising => {
                denoise_batch(&self.model, &self.recon, &self.denoise, &self.denoise_masks, Some((&mut g, &mut rg)));
            }
            CheckKind::Dann(lambda) => {
                supervised_batch(&self.model, &labeled, &self.masks, 0.0, Some(&mut g));
                domain_batch(&self.model, &self.domain_refs(), &self.domain_masks, lambda, Some(&mut g));
            }
        }
        (g, rg)
    }

    fn param(&mut self, group: Group, i: usize) -> &mut f64 {
        let m = &mut self.model;
        match group {
            Group::EncW => &mut m.enc_w[i],
            Group::EncB => &mut m.enc_b[i],
            Group::TaskW => &mut m.task_head.w[i],
            Group::TaskB => &mut m.task_head.b[i],
            Group::DomW => &mut m.domain_head.as_mut().unwrap().w[i],
            Group::DomB => &mut m.domain_head.as_mut().unwrap().b[i],
            Group::ReconW => &mut self.recon.w[i],
            Group::ReconB => &mut self.recon.b[i],
        }
    }
}

fn groups(kind: CheckKind) -> Vec<(Group, &'static str, usize)> {
    let mut g = vec![(Group::EncW, "encoder.w", DIM * HIDDEN), (Group::EncB, "encoder.b", HIDDEN)];
    match kind {
        CheckKind::CrossEntropy | CheckKind::Smoothed(_) => {
            g.extend([(Group::TaskW, "task.w", HIDDEN * CLASSES), (Group::TaskB, "task.b", CLASSES)]);
        }
        CheckKind::Denoising => g.extend([(Group::ReconW, "recon.w", DIM * HIDDEN), (Group::ReconB, "recon.b", DIM)]),
        CheckKind::Dann(_) => g.extend([
            (Group::TaskW, "task.w", HIDDEN * CLASSES),
            (Group::TaskB, "task.b", CLASSES),
            (Group::DomW, "domain.w", HIDDEN * 2),
            (Group::DomB, "domain.b", 2),
        ]),
    }
    g
}

fn analytic_value(g: &Grads, rg: &RowGrads, group: Group, i: usize) -> f64 {
    let row = |r: &RowGrads, j: usize, k: usize| r.get(j as u32).map_or(0.0, |v| v[k]);
    match group {
        Group::EncW => row(&g.enc, i / HIDDEN, i % HIDDEN),
        Group::EncB => g.enc_b[i],
        Group::TaskW => g.task.w[i],
        Group::TaskB => g.task.b[i],
        Group::DomW => g.domain.as_ref().unwrap().w[i],
        Group::DomB => g.domain.as_ref().unwrap().b[i],
        Group::ReconW => row(rg, i / HIDDEN, i % HIDDEN),
        Group::ReconB => row(rg, i, HIDDEN),
    }
}

/// Compares every analytic partial derivative of `kind`'s objective with a
/// central difference (step 1e-5) under fixed dropout masks.
pub fn grad_check(kind: CheckKind, seed: u64) -> GradCheckReport {
    let mut toy = toy(seed);
    let (g, rg) = toy.analytic(kind);
    let mut report = GradCheckReport { kind, max_rel_error: 0.0, parameters: 0, worst: String::new() };
    for (group, name, len) in groups(kind) {
        for i in 0..len {
            let original = *toy.param(group, i);
            *toy.param(group, i) = original + STEP;
            let up = toy.objective(kind, group);
            *toy.param(group, i) = original - STEP;
            let down = toy.objective(kind, group);
            *toy.param(group, i) = original;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic_value(&g, &rg, group, i);
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.parameters += 1;
            if err > report.max_rel_error || report.worst.is_empty() {
                report.max_rel_error = err;
                report.worst = format!("{name}[{i}]");
            }
        }
    }
    report
}

/// Labeled toy inputs used by the checker, exposed for inspection.
pub fn toy_inputs(seed: u64) -> Vec<(SparseVector, usize)> {
    toy(seed).labeled
}
