//! Example-selection strategies and the registry of composed methods.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapt::DomainSimilarity;
use crate::corpus::AnnotationPool;
use crate::features::SparseVector;
use crate::neural::{mc_dropout_predict, MlpModel, NeuralError};

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("pool exhausted: {requested} requested, {remaining} remaining")]
    PoolExhausted { requested: usize, remaining: usize },
    #[error("static selection needs a precomputed ranking")]
    MissingRanking,
    #[error("uncertainty selection needs a trained model")]
    MissingModel,
    #[error("domain restriction needs a similarity result")]
    MissingSimilarity,
    #[error("no features for example `{0}`")]
    MissingFeatures(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trainer {
    Plain,
    Smoothed,
    DtPretrained,
    Dann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Random,
    LeastConfidence,
    McDropoutConfidence,
    StaticSelection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoolPolicy {
    Full,
    TapadRestricted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MethodSpec {
    pub name: &'static str,
    pub trainer: Trainer,
    pub strategy: Strategy,
    pub pool_policy: PoolPolicy,
}

impl MethodSpec {
    const fn new(name: &'static str, trainer: Trainer, strategy: Strategy, pool_policy: PoolPolicy) -> Self {
        Self { name, trainer, strategy, pool_policy }
    }

    /// Uses domain adaptation in any form.
    pub fn domain_adaptation(&self) -> bool {
        matches!(self.trainer, Trainer::DtPretrained | Trainer::Dann)
            || self.non_iterative_selection()
            || self.domain_selection()
    }

    pub fn active_learning(&self) -> bool {
        self.strategy != Strategy::Random
    }

    pub fn non_iterative_selection(&self) -> bool {
        self.strategy == Strategy::StaticSelection
    }

    pub fn domain_selection(&self) -> bool {
        self.pool_policy == PoolPolicy::TapadRestricted
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

use PoolPolicy::{Full, TapadRestricted};
use Strategy::{LeastConfidence as Lc, McDropoutConfidence as Mcd, Random, StaticSelection};

const REGISTRY: [MethodSpec; 11] = [
    MethodSpec::new("Vanilla", Trainer::Plain, Random, Full),
    MethodSpec::new("Certainty", Trainer::Plain, Lc, Full),
    MethodSpec::new("MC-Dropout", Trainer::Plain, Mcd, Full),
    MethodSpec::new("Smoothing", Trainer::Smoothed, Lc, Full),
    MethodSpec::new("DT", Trainer::DtPretrained, Random, Full),
    MethodSpec::new("DANN", Trainer::Dann, Random, Full),
    MethodSpec::new("Cert-DT", Trainer::DtPretrained, Lc, Full),
    MethodSpec::new("Cert-DANN", Trainer::Dann, Lc, Full),
    MethodSpec::new("Selection", Trainer::Plain, StaticSelection, Full),
    MethodSpec::new("TAPAD", Trainer::Plain, Random, TapadRestricted),
    MethodSpec::new("Cert-TAPAD", Trainer::Plain, Lc, TapadRestricted),
];

/// All eleven methods in canonical order.
pub fn registry() -> &'static [MethodSpec] {
    &REGISTRY
}

pub fn method(name: &str) -> Result<MethodSpec, StrategyError> {
    REGISTRY.iter().find(|m| m.name == name).copied().ok_or_else(|| StrategyError::UnknownMethod(name.to_string()))
}

/// `1 - max p`.
pub fn least_confidence(probs: &[f64]) -> f64 {
    1.0 - probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Mean least-confidence over the example's instances (a document has
/// one). MC-dropout averages `passes` stochastic passes per instance first.
pub fn example_uncertainty(
    model: &MlpModel,
    instances: &[SparseVector],
    strategy: Strategy,
    passes: usize,
    rng: &mut impl Rng,
) -> Result<f64, StrategyError> {
    if instances.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for x in instances {
        let probs = match strategy {
            Strategy::McDropoutConfidence => mc_dropout_predict(model, x, passes, rng)?,
            _ => {
                if x.dimension() != model.input_dim() {
                    return Err(NeuralError::DimensionMismatch { expected: model.input_dim(), found: x.dimension() }.into());
                }
                model.predict_proba(x)
            }
        };
        total += least_confidence(&probs);
    }
    Ok(total / instances.len() as f64)
}

/// The `l` highest scores, ties by ascending id.
pub fn top_l(mut scores: Vec<(String, f64)>, l: usize) -> Vec<String> {
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scores.into_iter().take(l).map(|s| s.0).collect()
}

/// Everything a selection step may consult.
pub struct SelectionContext<'a> {
    pub model: Option<&'a MlpModel>,
    pub features: &'a HashMap<String, Vec<SparseVector>>,
    pub static_ranking: Option<&'a [String]>,
    pub mc_passes: usize,
}

/// Picks `l` distinct, unannotated, non-excluded ids from the pool.
pub fn select_batch(
    strategy: Strategy,
    pool: &AnnotationPool,
    l: usize,
    ctx: &SelectionContext<'_>,
    rng: &mut impl Rng,
) -> Result<Vec<String>, StrategyError> {
    let remaining = pool.remaining();
    if remaining.len() < l {
        return Err(StrategyError::PoolExhausted { requested: l, remaining: remaining.len() });
    }
    match strategy {
        Strategy::Random => {
            Ok(index::sample(rng, remaining.len(), l).into_iter().map(|i| remaining[i].id.clone()).collect())
        }
        Strategy::LeastConfidence | Strategy::McDropoutConfidence => {
            let model = ctx.model.ok_or(StrategyError::MissingModel)?;
            let mut scores = Vec::with_capacity(remaining.len());
            for ex in &remaining {
                let inst = ctx.features.get(&ex.id).ok_or_else(|| StrategyError::MissingFeatures(ex.id.clone()))?;
                scores.push((ex.id.clone(), example_uncertainty(model, inst, strategy, ctx.mc_passes, rng)?));
            }
            Ok(top_l(scores, l))
        }
        Strategy::StaticSelection => {
            let ranking = ctx.static_ranking.ok_or(StrategyError::MissingRanking)?;
            let open: HashSet<&str> = remaining.iter().map(|e| e.id.as_str()).collect();
            Ok(ranking.iter().filter(|id| open.contains(id.as_str())).take(l).cloned().collect())
        }
    }
}

/// Restricts a TAPAD pool to the nearest source domain. Labels already
/// bought stay bought.
pub fn apply_pool_policy(
    spec: &MethodSpec,
    pool: &mut AnnotationPool,
    similarity: Option<&DomainSimilarity>,
) -> Result<(), StrategyError> {
    if spec.pool_policy == PoolPolicy::Full {
        return Ok(());
    }
    let nearest = &similarity.ok_or(StrategyError::MissingSimilarity)?.nearest;
    let others: Vec<String> = pool.domains().into_iter().filter(|d| d != nearest).map(str::to_string).collect();
    for d in others {
        pool.exclude_domain(d);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Example, Gold, LabeledExample, Payload, PoolEntry};
    use crate::rng::stream;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn registry_matches_the_method_table() {
        let expected: [(&str, bool, bool, bool, bool); 11] = [
            ("Vanilla", false, false, false, false),
            ("Certainty", false, true, false, false),
            ("MC-Dropout", false, true, false, false),
            ("Smoothing", false, true, false, false),
            ("DT", true, false, false, false),
            ("DANN", true, false, false, false),
            ("Cert-DT", true, true, false, false),
            ("Cert-DANN", true, true, false, false),
            ("Selection", true, true, true, false),
            ("TAPAD", true, false, false, true),
            ("Cert-TAPAD", true, true, false, true),
        ];
        assert_eq!(registry().len(), 11);
        for (spec, (name, da, al, nis, ds)) in registry().iter().zip(expected) {
            assert_eq!(spec.name, name);
            assert_eq!(
                (spec.domain_adaptation(), spec.active_learning(), spec.non_iterative_selection(), spec.domain_selection()),
                (da, al, nis, ds),
                "{name}"
            );
        }
    }

    #[test]
    fn registry_compositions() {
        let m = |n| method(n).unwrap();
        assert_eq!((m("Smoothing").trainer, m("Smoothing").strategy), (Trainer::Smoothed, Lc));
        assert_eq!((m("MC-Dropout").trainer, m("MC-Dropout").strategy), (Trainer::Plain, Mcd));
        assert_eq!((m("Cert-DT").trainer, m("Cert-DANN").trainer), (Trainer::DtPretrained, Trainer::Dann));
        assert_eq!(m("Cert-TAPAD").pool_policy, TapadRestricted);
        assert_eq!(method("BERT").unwrap_err(), StrategyError::UnknownMethod("BERT".into()));
    }

    #[test]
    fn least_confidence_hand_values() {
        assert_eq!(least_confidence(&[0.0, 1.0, 0.0]), 0.0);
        assert_eq!(least_confidence(&[0.25; 4]), 0.75);
        assert!((least_confidence(&[0.7, 0.2, 0.1]) - 0.3).abs() < 1e-15);
    }

    fn vec1(i: usize, v: f64) -> SparseVector {
        SparseVector::from_pairs(8, [(i, v)])
    }

    /// A model whose first class probability follows feature 0 and which
    /// is uniform on inputs without it.
    fn steer_model() -> MlpModel {
        let mut m = MlpModel::zeros(8, 2, 2, false);
        m.enc_w[0] = 1.0;
        m.task_head.w[0] = 5.0;
        m
    }

    #[test]
    fn token_scores_are_averaged() {
        let m = steer_model();
        let tokens = [vec1(0, 1.0), vec1(1, 1.0), vec1(0, 0.3)];
        let per: Vec<f64> = tokens.iter().map(|t| least_confidence(&m.predict_proba(t))).collect();
        let mean = per.iter().sum::<f64>() / 3.0;
        let got = example_uncertainty(&m, &tokens, Lc, 1, &mut stream(0, 0)).unwrap();
        assert!((got - mean).abs() < 1e-15);
        let one = example_uncertainty(&m, &tokens[..1], Lc, 1, &mut stream(0, 0)).unwrap();
        assert_eq!(one, per[0]);
    }

    #[test]
    fn mc_dropout_without_dropout_equals_least_confidence() {
        let m = steer_model();
        let tokens = [vec1(0, 1.0), vec1(0, 0.2)];
        let lc = example_uncertainty(&m, &tokens, Lc, 20, &mut stream(0, 0)).unwrap();
        let mcd = example_uncertainty(&m, &tokens, Mcd, 20, &mut stream(1, 0)).unwrap();
        assert_eq!(lc, mcd);
    }

    fn pool(domains: &[(&str, usize)]) -> (AnnotationPool, HashMap<String, Vec<SparseVector>>) {
        let mut entries = Vec::new();
        let mut feats = HashMap::new();
        for (d, n) in domains {
            for i in 0..*n {
                let id = format!("{d}-{i:03}");
                let ex = Example { id: id.clone(), domain: d.to_string(), payload: Payload::Document(String::new()) };
                entries.push(PoolEntry::new(LabeledExample::new(ex, Gold::Label("x".into())).unwrap()));
                feats.insert(id, vec![vec1(i % 8, (i + 1) as f64 / 10.0)]);
            }
        }
        (AnnotationPool::new(entries).unwrap(), feats)
    }

    fn ctx<'a>(
        model: Option<&'a MlpModel>,
        feats: &'a HashMap<String, Vec<SparseVector>>,
        ranking: Option<&'a [String]>,
    ) -> SelectionContext<'a> {
        SelectionContext { model, features: feats, static_ranking: ranking, mc_passes: 5 }
    }

    #[test]
    fn random_is_seeded_and_exhaustion_is_an_error() {
        let (p, f) = pool(&[("a", 10)]);
        let c = ctx(None, &f, None);
        let a = select_batch(Random, &p, 4, &c, &mut stream(3, 0)).unwrap();
        let b = select_batch(Random, &p, 4, &c, &mut stream(3, 0)).unwrap();
        assert_eq!(a, b);
        let mut all = select_batch(Random, &p, 10, &c, &mut stream(3, 0)).unwrap();
        all.sort();
        assert_eq!(all, p.remaining().iter().map(|e| e.id.clone()).collect::<Vec<_>>());
        assert_eq!(
            select_batch(Random, &p, 11, &c, &mut stream(3, 0)).unwrap_err(),
            StrategyError::PoolExhausted { requested: 11, remaining: 10 }
        );
    }

    #[test]
    fn least_confidence_picks_the_uniform_example() {
        let (p, mut f) = pool(&[("a", 5)]);
        for (i, v) in f.values_mut().enumerate() {
            *v = vec![vec1(0, 2.0 + i as f64)];
        }
        f.insert("a-003".into(), vec![vec1(5, 1.0)]);
        let m = steer_model();
        let picked = select_batch(Lc, &p, 1, &ctx(Some(&m), &f, None), &mut stream(0, 0)).unwrap();
        assert_eq!(picked, vec!["a-003".to_string()]);
        assert_eq!(select_batch(Lc, &p, 1, &ctx(None, &f, None), &mut stream(0, 0)).unwrap_err(), StrategyError::MissingModel);
    }

    #[test]
    fn untrained_model_ties_break_by_id() {
        let (p, f) = pool(&[("b", 4), ("a", 4)]);
        let m = MlpModel::zeros(8, 2, 2, false);
        let picked = select_batch(Lc, &p, 3, &ctx(Some(&m), &f, None), &mut stream(0, 0)).unwrap();
        assert_eq!(picked, vec!["a-000", "a-001", "a-002"]);
    }

    #[test]
    fn static_selection_walks_the_ranking() {
        let (mut p, f) = pool(&[("a", 3), ("b", 3)]);
        let ranking: Vec<String> = ["b-002", "a-001", "b-000", "a-000", "a-002", "b-001"].map(String::from).to_vec();
        p.annotate(&["a-001".to_string()]).unwrap();
        let got = select_batch(StaticSelection, &p, 2, &ctx(None, &f, Some(&ranking)), &mut stream(0, 0)).unwrap();
        assert_eq!(got, vec!["b-002", "b-000"]);
        assert_eq!(
            select_batch(StaticSelection, &p, 2, &ctx(None, &f, None), &mut stream(0, 0)).unwrap_err(),
            StrategyError::MissingRanking
        );
    }

    #[test]
    fn tapad_policy_keeps_only_the_nearest_domain() {
        let (mut p, _) = pool(&[("a", 3), ("b", 3), ("c", 3), ("d", 3)]);
        p.annotate(&["a-000".to_string()]).unwrap();
        let sim = DomainSimilarity {
            per_source: BTreeMap::new(),
            epsilons: BTreeMap::new(),
            nearest: "d".into(),
            task_adapted: true,
        };
        let before = p.clone();
        apply_pool_policy(&method("Vanilla").unwrap(), &mut p, Some(&sim)).unwrap();
        assert_eq!(p.remaining_count(), before.remaining_count());
        apply_pool_policy(&method("TAPAD").unwrap(), &mut p, Some(&sim)).unwrap();
        assert_eq!(p.excluded_domains().len(), 3);
        assert!(p.remaining().iter().all(|e| e.domain == "d"));
        assert_eq!(p.labeled().len(), 1);
        assert_eq!(p.labeled()[0].example.id, "a-000");
        assert_eq!(
            apply_pool_policy(&method("TAPAD").unwrap(), &mut p, None).unwrap_err(),
            StrategyError::MissingSimilarity
        );
    }

    proptest! {
        #[test]
        fn top_l_is_scale_invariant(scores in proptest::collection::vec(0.0f64..1.0, 1..30), l in 1usize..10, k in prop::sample::select(vec![0.25f64, 2.0, 8.0])) {
            let base: Vec<(String, f64)> = scores.iter().enumerate().map(|(i, &s)| (format!("{i:02}"), s)).collect();
            let scaled: Vec<(String, f64)> = base.iter().map(|(id, s)| (id.clone(), s * k)).collect();
            prop_assert_eq!(top_l(base, l), top_l(scaled, l));
        }

        #[test]
        fn selections_are_always_legal(seed in any::<u64>(), annotated in proptest::collection::vec(0usize..12, 0..6), strat in 0usize..4, exclude in any::<bool>()) {
            let (mut p, f) = pool(&[("a", 6), ("b", 6)]);
            let all: Vec<String> = p.examples().map(|e| e.id.clone()).collect();
            let mut bought: Vec<String> = annotated.iter().map(|&i| all[i].clone()).collect();
            bought.sort();
            bought.dedup();
            p.annotate(&bought).unwrap();
            if exclude {
                p.exclude_domain("b");
            }
            let strategy = [Random, Lc, Mcd, StaticSelection][strat];
            let m = MlpModel::new(8, 4, 2, false, 0.3, &mut stream(seed, 0));
            let mut ranking = all.clone();
            ranking.reverse();
            let remaining = p.remaining_count();
            let l = remaining.min(3);
            let got = select_batch(strategy, &p, l, &ctx(Some(&m), &f, Some(&ranking)), &mut stream(seed, 1)).unwrap();
            prop_assert_eq!(got.len(), l);
            let uniq: HashSet<&String> = got.iter().collect();
            prop_assert_eq!(uniq.len(), l);
            for id in &got {
                prop_assert!(!p.is_annotated(id));
                prop_assert!(!(exclude && id.starts_with("b-")));
            }
        }
    }
}
