use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::grads::{denoise_batch, domain_batch, supervised_batch, DenoiseExample, Grads, ReconHead, RowGrads};
use super::model::MlpModel;
use super::optim::Optimizer;
use super::{NeuralError, TrainConfig};
use crate::features::SparseVector;
use crate::rng::{stream, StreamRng};

/// Fraction of an input's active features hidden during denoising.
pub const MASK_FRACTION: f64 = 0.15;

const SHUFFLE_STREAM: u64 = 0;
const DROPOUT_STREAM: u64 = 1;
const DOMAIN_STREAM: u64 = 2;
const HEAD_STREAM: u64 = 3;

fn check_labeled(model: &MlpModel, data: &[(&SparseVector, usize)]) -> Result<(), NeuralError> {
    if data.is_empty() {
        return Err(NeuralError::EmptyTrainingSet);
    }
    let classes = model.num_classes();
    for &(x, y) in data {
        model.check_input(x)?;
        if y >= classes {
            return Err(NeuralError::LabelOutOfRange { label: y, classes });
        }
    }
    Ok(())
}

fn check_inputs(model: &MlpModel, data: &[&SparseVector]) -> Result<(), NeuralError> {
    data.iter().try_for_each(|x| model.check_input(x))
}

fn shuffled(n: usize, rng: &mut StreamRng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// Cycles through a set in shuffled order, reshuffling on every wrap.
struct Cycler {
    order: Vec<usize>,
    pos: usize,
}

impl Cycler {
    fn new(n: usize, rng: &mut StreamRng) -> Self {
        Self { order: shuffled(n, rng), pos: 0 }
    }

    fn next(&mut self, rng: &mut StreamRng) -> usize {
        if self.pos == self.order.len() {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

/// Minibatch SGD on mean smoothed cross-entropy. Returns the trained model
/// and the mean training loss of each epoch.
pub fn train_supervised(
    model: &MlpModel,
    data: &[(&SparseVector, usize)],
    cfg: &TrainConfig,
) -> Result<(MlpModel, Vec<f64>), NeuralError> {
    cfg.validate()?;
    check_labeled(model, data)?;
    let mut m = model.clone();
    m.dropout_rate = cfg.dropout_rate;
    let mut opt = Optimizer::new(cfg, &m);
    let mut grads = Grads::for_model(&m);
    let mut shuffle_rng = stream(cfg.rng_seed, SHUFFLE_STREAM);
    let mut dropout_rng = stream(cfg.rng_seed, DROPOUT_STREAM);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let order = shuffled(data.len(), &mut shuffle_rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| data[i]).collect();
            let masks: Vec<_> = batch.iter().map(|_| m.draw_mask(&mut dropout_rng)).collect();
            grads.clear();
            total += supervised_batch(&m, &batch, &masks, cfg.smoothing_alpha, Some(&mut grads)) * batch.len() as f64;
            opt.apply(&mut m, &grads);
        }
        trace.push(total / data.len() as f64);
    }
    opt.finish(&mut m);
    Ok((m, trace))
}

/// Adversarial training: each labeled minibatch of size `b` is paired with
/// `b` source and `b` target unlabeled inputs for the domain head, whose
/// gradient reaches the encoder reversed and scaled by `dann_lambda`.
///
/// The labeled stream and its dropout draws match [`train_supervised`], so
/// with `dann_lambda = 0` the task parameters come out identical.
pub fn train_dann(
    model: &MlpModel,
    labeled: &[(&SparseVector, usize)],
    source_unlabeled: &[&SparseVector],
    target_unlabeled: &[&SparseVector],
    cfg: &TrainConfig,
) -> Result<(MlpModel, Vec<f64>), NeuralError> {
    cfg.validate()?;
    if !model.has_domain_head() {
        return Err(NeuralError::MissingDomainHead);
    }
    check_labeled(model, labeled)?;
    if source_unlabeled.is_empty() {
        return Err(NeuralError::EmptyUnlabeled("source"));
    }
    if target_unlabeled.is_empty() {
        return Err(NeuralError::EmptyUnlabeled("target"));
    }
    check_inputs(model, source_unlabeled)?;
    check_inputs(model, target_unlabeled)?;

    let mut m = model.clone();
    m.dropout_rate = cfg.dropout_rate;
    let mut opt = Optimizer::new(cfg, &m);
    let mut grads = Grads::for_model(&m);
    let mut shuffle_rng = stream(cfg.rng_seed, SHUFFLE_STREAM);
    let mut dropout_rng = stream(cfg.rng_seed, DROPOUT_STREAM);
    let mut domain_rng = stream(cfg.rng_seed, DOMAIN_STREAM);
    let mut src = Cycler::new(source_unlabeled.len(), &mut domain_rng);
    let mut tgt = Cycler::new(target_unlabeled.len(), &mut domain_rng);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let order = shuffled(labeled.len(), &mut shuffle_rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| labeled[i]).collect();
            let masks: Vec<_> = batch.iter().map(|_| m.draw_mask(&mut dropout_rng)).collect();
            let mut dom: Vec<(&SparseVector, usize)> = Vec::with_capacity(2 * batch.len());
            for _ in 0..batch.len() {
                dom.push((source_unlabeled[src.next(&mut domain_rng)], 0));
                dom.push((target_unlabeled[tgt.next(&mut domain_rng)], 1));
            }
            let dom_masks: Vec<_> = dom.iter().map(|_| m.draw_mask(&mut domain_rng)).collect();
            grads.clear();
            total += supervised_batch(&m, &batch, &masks, cfg.smoothing_alpha, Some(&mut grads)) * batch.len() as f64;
            domain_batch(&m, &dom, &dom_masks, cfg.dann_lambda, Some(&mut grads));
            opt.apply(&mut m, &grads);
        }
        trace.push(total / labeled.len() as f64);
    }
    opt.finish(&mut m);
    Ok((m, trace))
}

/// Corrupts `x` by hiding `round(0.15·nnz)` active features and pairs each
/// hidden feature (target 1) with an equal number of inactive features
/// (target 0). `None` when nothing would be hidden.
pub(crate) fn corrupt(x: &SparseVector, rng: &mut impl Rng) -> Option<DenoiseExample> {
    let nnz = x.nnz();
    let k = (MASK_FRACTION * nnz as f64).round() as usize;
    if k == 0 {
        return None;
    }
    let hidden: Vec<u32> = index::sample(rng, nnz, k).into_iter().map(|i| x.indices()[i]).collect();
    let mut targets: Vec<(u32, f64)> = hidden.iter().map(|&j| (j, 1.0)).collect();
    let free = x.dimension() - nnz;
    let mut negatives = Vec::with_capacity(k.min(free));
    while negatives.len() < k.min(free) {
        let j = rng.random_range(0..x.dimension()) as u32;
        if x.indices().binary_search(&j).is_err() && !negatives.contains(&j) {
            negatives.push(j);
        }
    }
    targets.extend(negatives.into_iter().map(|j| (j, 0.0)));
    Some(DenoiseExample { input: x.without(&hidden), targets })
}

/// Masked-feature reconstruction pretraining of the encoder on unlabeled
/// inputs. The task and domain heads of the returned model are freshly
/// re-initialized.
pub fn pretrain_denoising(
    model: &MlpModel,
    unlabeled: &[&SparseVector],
    cfg: &TrainConfig,
) -> Result<(MlpModel, Vec<f64>), NeuralError> {
    cfg.validate()?;
    if unlabeled.is_empty() {
        return Err(NeuralError::EmptyUnlabeled("pretraining"));
    }
    check_inputs(model, unlabeled)?;
    let mut m = model.clone();
    m.dropout_rate = cfg.dropout_rate;
    let mut shuffle_rng = stream(cfg.rng_seed, SHUFFLE_STREAM);
    let mut dropout_rng = stream(cfg.rng_seed, DROPOUT_STREAM);
    let mut corrupt_rng = stream(cfg.rng_seed, DOMAIN_STREAM);
    let mut head_rng = stream(cfg.rng_seed, HEAD_STREAM);
    let mut recon = ReconHead::new(m.input_dim, m.hidden_dim, &mut head_rng);
    let mut opt = Optimizer::new(cfg, &m);
    let mut grads = Grads::for_model(&m);
    let mut recon_grads = RowGrads::new(m.hidden_dim + 1);
    let mut trace = Vec::with_capacity(cfg.pretrain_epochs);
    for _ in 0..cfg.pretrain_epochs {
        let order = shuffled(unlabeled.len(), &mut shuffle_rng);
        let examples: Vec<DenoiseExample> = order.iter().filter_map(|&i| corrupt(unlabeled[i], &mut corrupt_rng)).collect();
        let mut total = 0.0;
        for batch in examples.chunks(cfg.batch_size) {
            let masks: Vec<_> = batch.iter().map(|_| m.draw_mask(&mut dropout_rng)).collect();
            grads.clear();
            recon_grads.clear();
            total += denoise_batch(&m, &recon, batch, &masks, Some((&mut grads, &mut recon_grads))) * batch.len() as f64;
            opt.apply(&mut m, &grads);
            opt.apply_recon(&mut recon, &recon_grads);
        }
        if !examples.is_empty() {
            trace.push(total / examples.len() as f64);
        }
    }
    opt.finish(&mut m);
    let fresh = m.with_fresh_heads(m.num_classes(), m.has_domain_head(), &mut head_rng);
    Ok((fresh, trace))
}

/// Mean task-head distribution over `passes` stochastic forward passes.
/// With a zero dropout rate this is exactly the eval-mode distribution.
pub fn mc_dropout_predict(model: &MlpModel, x: &SparseVector, passes: usize, rng: &mut impl Rng) -> Result<Vec<f64>, NeuralError> {
    model.check_input(x)?;
    if passes == 0 {
        return Err(NeuralError::InvalidConfig("mc_passes must be >= 1".into()));
    }
    let pre = model.pre_activation(x);
    if model.dropout_rate == 0.0 {
        return Ok(model.task_head.probs(&MlpModel::activate(&pre, None)));
    }
    let mut mean = vec![0.0; model.num_classes()];
    for _ in 0..passes {
        let mask = model.draw_mask(rng);
        let p = model.task_head.probs(&MlpModel::activate(&pre, mask.as_deref()));
        for (acc, v) in mean.iter_mut().zip(&p) {
            *acc += v;
        }
    }
    if passes > 1 {
        mean.iter_mut().for_each(|v| *v /= passes as f64);
    }
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Mode;

    fn sparse(dim: usize, pairs: &[(usize, f64)]) -> SparseVector {
        SparseVector::from_pairs(dim, pairs.iter().copied())
    }

    /// Two classes separable on disjoint feature sets.
    fn toy_data(dim: usize, n: usize, seed: u64) -> Vec<(SparseVector, usize)> {
        let mut rng = stream(seed, 9);
        (0..n)
            .map(|i| {
                let y = i % 2;
                let base = if y == 0 { 0 } else { dim / 2 };
                let pairs: Vec<(usize, f64)> =
                    (0..4).map(|_| (base + rng.random_range(0..dim / 2), 0.25)).collect();
                (sparse(dim, &pairs), y)
            })
            .collect()
    }

    fn cfg() -> TrainConfig {
        TrainConfig { epochs: 15, batch_size: 4, hidden_dim: 8, ..TrainConfig::default() }
    }

    #[test]
    fn supervised_learns_a_separable_toy() {
        let data = toy_data(64, 40, 1);
        let refs: Vec<_> = data.iter().map(|(x, y)| (x, *y)).collect();
        let m0 = MlpModel::new(64, 8, 2, false, 0.1, &mut stream(3, 0));
        let (m, trace) = train_supervised(&m0, &refs, &cfg()).unwrap();
        assert!(trace.last().unwrap() <= trace.first().unwrap());
        let test = toy_data(64, 40, 2);
        let correct = test.iter().filter(|(x, y)| m.predict(x) == *y).count();
        assert!(correct >= 36, "accuracy {correct}/40");
        assert!(m.validate());
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_data(32, 20, 4);
        let refs: Vec<_> = data.iter().map(|(x, y)| (x, *y)).collect();
        let m0 = MlpModel::new(32, 8, 2, false, 0.1, &mut stream(3, 0));
        let a = train_supervised(&m0, &refs, &cfg()).unwrap();
        let b = train_supervised(&m0, &refs, &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_and_invalid_inputs_are_rejected() {
        let m0 = MlpModel::new(8, 4, 2, false, 0.0, &mut stream(0, 0));
        assert_eq!(train_supervised(&m0, &[], &cfg()).unwrap_err(), NeuralError::EmptyTrainingSet);
        let x = sparse(8, &[(1, 1.0)]);
        assert_eq!(
            train_supervised(&m0, &[(&x, 2)], &cfg()).unwrap_err(),
            NeuralError::LabelOutOfRange { label: 2, classes: 2 }
        );
        let bad = TrainConfig { smoothing_alpha: 1.5, ..cfg() };
        assert_eq!(train_supervised(&m0, &[(&x, 0)], &bad).unwrap_err(), NeuralError::InvalidAlpha(1.5));
        assert_eq!(train_dann(&m0, &[(&x, 0)], &[&x], &[&x], &cfg()).unwrap_err(), NeuralError::MissingDomainHead);
        let md = MlpModel::new(8, 4, 2, true, 0.0, &mut stream(0, 0));
        assert_eq!(train_dann(&md, &[(&x, 0)], &[], &[&x], &cfg()).unwrap_err(), NeuralError::EmptyUnlabeled("source"));
        assert_eq!(train_dann(&md, &[(&x, 0)], &[&x], &[], &cfg()).unwrap_err(), NeuralError::EmptyUnlabeled("target"));
    }

    #[test]
    fn dann_with_zero_lambda_matches_supervised() {
        let data = toy_data(32, 24, 5);
        let refs: Vec<_> = data.iter().map(|(x, y)| (x, *y)).collect();
        let unl = toy_data(32, 10, 6);
        let unl: Vec<_> = unl.iter().map(|(x, _)| x).collect();
        let m0 = MlpModel::new(32, 8, 2, true, 0.2, &mut stream(7, 0));
        let c = TrainConfig { dann_lambda: 0.0, dropout_rate: 0.2, ..cfg() };
        let (sup, _) = train_supervised(&m0, &refs, &c).unwrap();
        let (dann, _) = train_dann(&m0, &refs, &unl[..5], &unl[5..], &c).unwrap();
        for (x, _) in &data {
            assert_eq!(sup.predict_proba(x), dann.predict_proba(x));
        }
        assert_eq!(sup.enc_w, dann.enc_w);
        assert_eq!(sup.task_head, dann.task_head);
    }

    #[test]
    fn dann_balances_domain_batches_by_cycling() {
        let mut rng = stream(1, 1);
        let mut c = Cycler::new(3, &mut rng);
        let draws: Vec<usize> = (0..9).map(|_| c.next(&mut rng)).collect();
        for window in draws.chunks(3) {
            let mut w = window.to_vec();
            w.sort();
            assert_eq!(w, vec![0, 1, 2]);
        }
    }

    #[test]
    fn corruption_respects_the_mask_fraction() {
        let x = sparse(1000, &(0..40).map(|i| (i * 7, 1.0)).collect::<Vec<_>>());
        let ex = corrupt(&x, &mut stream(0, 0)).unwrap();
        assert_eq!(ex.input.nnz(), 34);
        let pos: Vec<_> = ex.targets.iter().filter(|t| t.1 == 1.0).collect();
        let neg: Vec<_> = ex.targets.iter().filter(|t| t.1 == 0.0).collect();
        assert_eq!((pos.len(), neg.len()), (6, 6));
        for (j, _) in pos {
            assert_eq!(x.get(*j as usize), 1.0);
            assert_eq!(ex.input.get(*j as usize), 0.0);
        }
        for (j, _) in neg {
            assert_eq!(x.get(*j as usize), 0.0);
        }
        assert!(corrupt(&sparse(1000, &[(3, 1.0)]), &mut stream(0, 0)).is_none());
    }

    #[test]
    fn pretraining_skips_inputs_too_small_to_mask() {
        let x = sparse(16, &[(3, 1.0)]);
        let m0 = MlpModel::new(16, 4, 2, false, 0.0, &mut stream(0, 0));
        let (m, trace) = pretrain_denoising(&m0, &[&x], &cfg()).unwrap();
        assert_eq!(m.enc_w, m0.enc_w);
        assert_eq!(m.enc_b, m0.enc_b);
        assert!(trace.is_empty());
    }

    #[test]
    fn pretraining_reduces_reconstruction_loss_and_resets_heads() {
        let data = toy_data(128, 60, 8);
        let refs: Vec<_> = data.iter().map(|(x, _)| x).collect();
        let m0 = MlpModel::new(128, 8, 2, true, 0.0, &mut stream(0, 0));
        let c = TrainConfig { pretrain_epochs: 10, dropout_rate: 0.0, ..cfg() };
        let (m, trace) = pretrain_denoising(&m0, &refs, &c).unwrap();
        assert_eq!(trace.len(), 10);
        assert!(trace[9] < trace[0], "{trace:?}");
        assert_ne!(m.enc_w, m0.enc_w);
        assert_ne!(m.task_head, m0.task_head);
        assert!(m.has_domain_head());
        assert_eq!(pretrain_denoising(&m0, &[], &c).unwrap_err(), NeuralError::EmptyUnlabeled("pretraining"));
    }

    #[test]
    fn mc_dropout_edge_cases() {
        let x = sparse(16, &[(1, 1.0), (5, -0.5)]);
        let m = MlpModel::new(16, 8, 3, false, 0.0, &mut stream(0, 0));
        let eval = m.forward(&x, Mode::Eval, &mut stream(0, 0)).unwrap().0;
        for t in [1, 5, 20] {
            assert_eq!(mc_dropout_predict(&m, &x, t, &mut stream(1, 1)).unwrap(), eval);
        }
        let md = MlpModel::new(16, 8, 3, false, 0.5, &mut stream(0, 0));
        let one = mc_dropout_predict(&md, &x, 1, &mut stream(2, 2)).unwrap();
        let pass = md.forward(&x, Mode::Train, &mut stream(2, 2)).unwrap().0;
        assert_eq!(one, pass);
        let avg = mc_dropout_predict(&md, &x, 20, &mut stream(3, 3)).unwrap();
        assert!((avg.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(mc_dropout_predict(&md, &x, 0, &mut stream(3, 3)).is_err());
    }
}
