use std::collections::{BTreeSet, HashMap};

use super::config::ResolvedConfig;
use super::metrics::{accuracy, auc, macro_f1};
use super::EngineError;
use crate::adapt::{selection_scores, tapad_select_domain, train_discriminator, DomainSimilarity, Instances, NamedSample};
use crate::corpus::{AnnotationPool, DomainCorpus, Example, Gold, GoldKey, LabeledExample, Payload, Task};
use crate::features::{tokenize, Featurizer, IdfTable, SparseVector, Weighting};
use crate::neural::{pretrain_denoising, train_dann, train_supervised, MlpModel, TrainConfig};
use crate::rng::{derive_seed, stream};
use crate::strategies::{apply_pool_policy, select_batch, MethodSpec, PoolPolicy, SelectionContext, Strategy, Trainer};

/// `(target, sources)` for every domain in turn.
pub fn leave_one_out(domains: &[String]) -> Result<Vec<(String, Vec<String>)>, EngineError> {
    if domains.len() < 2 {
        return Err(EngineError::TooFewDomains(domains.len()));
    }
    Ok(domains
        .iter()
        .map(|t| (t.clone(), domains.iter().filter(|d| *d != t).cloned().collect()))
        .collect())
}

/// Featurized view of a collection with one domain held out as target.
#[derive(Debug)]
pub struct TargetData {
    pub task: Task,
    pub target: String,
    /// Non-target domains that are not manually excluded.
    pub sources: Vec<String>,
    pub labels: Vec<String>,
    pub dimension: usize,
    pub pool: AnnotationPool,
    pub features: HashMap<String, Vec<SparseVector>>,
    pub source_unlabeled: Vec<(String, Vec<Vec<SparseVector>>)>,
    pub target_unlabeled: Vec<Vec<SparseVector>>,
    /// Test instances and gold indices (`usize::MAX` for a label never
    /// seen in the sources).
    pub test: Vec<(Vec<SparseVector>, Vec<usize>)>,
}

fn text_tokens(example: &Example) -> Vec<String> {
    match &example.payload {
        Payload::Document(text) => tokenize(text),
        Payload::TokenSequence(tokens) => tokens.clone(),
    }
}

fn gold_labels(gold: &Gold) -> Vec<&str> {
    match gold {
        Gold::Label(l) => vec![l.as_str()],
        Gold::Tags(t) => t.iter().map(String::as_str).collect(),
    }
}

impl TargetData {
    pub fn prepare(corpora: &[DomainCorpus], target: &str, cfg: &ResolvedConfig) -> Result<Self, EngineError> {
        let names: Vec<String> = corpora.iter().map(|c| c.domain.clone()).collect();
        if names.len() < 2 {
            return Err(EngineError::TooFewDomains(names.len()));
        }
        let target_corpus =
            corpora.iter().find(|c| c.domain == target).ok_or_else(|| EngineError::UnknownTarget(target.to_string()))?;
        for ex in &cfg.excluded_domains {
            if !names.contains(ex) {
                return Err(EngineError::Config(format!("excluded domain `{ex}` not in the collection")));
            }
        }
        let source_corpora: Vec<&DomainCorpus> = corpora.iter().filter(|c| c.domain != target).collect();
        let mut pool = AnnotationPool::from_sources(source_corpora.iter().copied())?;
        for ex in &cfg.excluded_domains {
            pool.exclude_domain(ex.clone());
        }
        let active: Vec<&DomainCorpus> =
            source_corpora.iter().copied().filter(|c| !cfg.excluded_domains.contains(&c.domain)).collect();
        if active.is_empty() {
            return Err(EngineError::Config(format!("target `{target}` has no usable source domain")));
        }
        if pool.remaining_count() < cfg.total_budget() {
            return Err(EngineError::BudgetExceedsPool { budget: cfg.total_budget(), pool: pool.remaining_count() });
        }
        if target_corpus.test.is_empty() {
            return Err(EngineError::Config(format!("target `{target}` has no test examples")));
        }

        let key = GoldKey::unlock();
        let labels: Vec<String> = source_corpora
            .iter()
            .flat_map(|c| c.pool.iter())
            .flat_map(|e| gold_labels(e.gold.reveal(&key)))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(String::from)
            .collect();

        let cap = cfg.unlabeled_cap;
        let source_unl: Vec<(&str, Vec<&Example>)> =
            active.iter().map(|c| (c.domain.as_str(), c.unlabeled_or_stripped_pool().into_iter().take(cap).collect())).collect();
        let target_unl: Vec<&Example> = target_corpus.unlabeled_or_stripped_pool().into_iter().take(cap).collect();

        let idf = match cfg.features.weighting {
            Weighting::TermFrequency => None,
            Weighting::TfIdf => {
                let docs: Vec<Vec<String>> = source_corpora
                    .iter()
                    .flat_map(|c| c.pool.iter().map(|e| &e.example))
                    .chain(source_unl.iter().flat_map(|(_, v)| v.iter().copied()))
                    .chain(target_unl.iter().copied())
                    .map(text_tokens)
                    .collect();
                Some(IdfTable::fit(docs.iter().map(Vec::as_slice), &cfg.features))
            }
        };
        let featurizer = Featurizer::new(cfg.features.clone(), idf)?;
        let featurize = |ex: &Example| -> Vec<SparseVector> {
            match &ex.payload {
                Payload::Document(text) => vec![featurizer.document(text)],
                Payload::TokenSequence(tokens) => featurizer.sequence(tokens),
            }
        };

        let features = pool.examples().map(|e| (e.id.clone(), featurize(e))).collect();
        let source_unlabeled =
            source_unl.iter().map(|(d, v)| (d.to_string(), v.iter().map(|e| featurize(e)).collect())).collect();
        let target_unlabeled = target_unl.iter().map(|e| featurize(e)).collect();
        let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let test = target_corpus
            .test
            .iter()
            .map(|t| {
                let gold = gold_labels(&t.gold).iter().map(|l| index.get(l).copied().unwrap_or(usize::MAX)).collect();
                (featurize(&t.example), gold)
            })
            .collect();

        Ok(Self {
            task: cfg.task,
            target: target.to_string(),
            sources: active.iter().map(|c| c.domain.clone()).collect(),
            labels,
            dimension: featurizer.dimension(),
            pool,
            features,
            source_unlabeled,
            target_unlabeled,
            test,
        })
    }

    pub fn metric_name(&self) -> &'static str {
        match self.task {
            Task::Classification => "accuracy",
            Task::Tagging => "macro_f1",
        }
    }

    fn label_index(&self, label: &str) -> usize {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).expect("pool labels are indexed")
    }

    /// Training instances of the annotated examples.
    fn instances<'a>(&'a self, labeled: &[LabeledExample]) -> Vec<(&'a SparseVector, usize)> {
        let mut out = Vec::new();
        for ex in labeled {
            let feats = &self.features[&ex.example.id];
            for (x, l) in feats.iter().zip(gold_labels(&ex.gold)) {
                out.push((x, self.label_index(l)));
            }
        }
        out
    }

    /// Accuracy per document or macro-F1 per token on the target test set.
    pub fn evaluate(&self, model: &MlpModel) -> Result<f64, EngineError> {
        let mut pred = Vec::new();
        let mut gold = Vec::new();
        for (inst, g) in &self.test {
            pred.extend(inst.iter().map(|x| model.predict(x)));
            gold.extend_from_slice(g);
        }
        match self.task {
            Task::Classification => accuracy(&pred, &gold),
            Task::Tagging => macro_f1(&pred, &gold, self.labels.len()),
        }
    }

    fn flat_source_unlabeled(&self) -> Vec<&SparseVector> {
        self.source_unlabeled.iter().flat_map(|(_, v)| v.iter().flatten()).collect()
    }

    fn flat_target_unlabeled(&self) -> Vec<&SparseVector> {
        self.target_unlabeled.iter().flatten().collect()
    }
}

/// Result of one (method, target, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub method: String,
    pub target: String,
    pub seed: u64,
    pub metric: &'static str,
    pub points: Vec<(usize, f64)>,
    pub auc: f64,
    pub similarity: Option<DomainSimilarity>,
    /// Purchased `(id, domain)` pairs in purchase order.
    pub annotations: Vec<(String, String)>,
}

/// Seed of every random stream in a run.
pub fn run_key(seed: u64, method: &str, target: &str) -> u64 {
    derive_seed(seed, &format!("{method}\u{1}{target}"))
}

fn train_model(
    trainer: Trainer,
    init: &MlpModel,
    labeled: &[(&SparseVector, usize)],
    data: &TargetData,
    cfg: &TrainConfig,
) -> Result<MlpModel, EngineError> {
    let model = match trainer {
        Trainer::Plain | Trainer::DtPretrained => {
            train_supervised(init, labeled, &TrainConfig { smoothing_alpha: 0.0, ..cfg.clone() })?.0
        }
        Trainer::Smoothed => train_supervised(init, labeled, cfg)?.0,
        Trainer::Dann => {
            let cfg = TrainConfig { smoothing_alpha: 0.0, ..cfg.clone() };
            train_dann(init, labeled, &data.flat_source_unlabeled(), &data.flat_target_unlabeled(), &cfg)?.0
        }
    };
    Ok(model)
}

/// Seed `M` random examples from the full pool, then alternate training,
/// target evaluation and selection of `L` more until the budget is spent.
pub fn run_single(data: &TargetData, cfg: &ResolvedConfig, spec: MethodSpec, seed: u64) -> Result<RunOutcome, EngineError> {
    let key = run_key(seed, spec.name, &data.target);
    let mut pool = data.pool.clone();
    let mut select_rng = stream(key, 1);
    let train_cfg = TrainConfig { rng_seed: derive_seed(key, "train"), ..cfg.train.clone() };

    let bare = SelectionContext { model: None, features: &data.features, static_ranking: None, mc_passes: train_cfg.mc_passes };
    let seed_ids = select_batch(Strategy::Random, &pool, cfg.seed_size, &bare, &mut select_rng)?;
    pool.annotate(&seed_ids)?;

    let mut init = MlpModel::new(
        data.dimension,
        train_cfg.hidden_dim,
        data.labels.len(),
        spec.trainer == Trainer::Dann,
        train_cfg.dropout_rate,
        &mut stream(key, 2),
    );
    if spec.trainer == Trainer::DtPretrained {
        let mut unlabeled = data.flat_source_unlabeled();
        unlabeled.extend(data.flat_target_unlabeled());
        let dt_cfg = TrainConfig { rng_seed: derive_seed(key, "dt"), ..train_cfg.clone() };
        init = pretrain_denoising(&init, &unlabeled, &dt_cfg)?.0;
    }

    let source_examples: Vec<Vec<Instances<'_>>> =
        data.source_unlabeled.iter().map(|(_, v)| v.iter().map(Vec::as_slice).collect()).collect();
    let target_examples: Vec<Instances<'_>> = data.target_unlabeled.iter().map(Vec::as_slice).collect();
    let target_sample = NamedSample { name: &data.target, examples: &target_examples };

    let ranking: Option<Vec<String>> = if spec.strategy == Strategy::StaticSelection {
        let pooled: Vec<Instances<'_>> = source_examples.iter().flatten().copied().collect();
        let disc_cfg = TrainConfig { rng_seed: derive_seed(key, "selection"), ..cfg.discriminator.clone() };
        let disc = train_discriminator(&pooled, &target_examples, None, data.dimension, &disc_cfg)?
            .named(data.sources.iter().cloned(), data.target.clone());
        let remaining = pool.remaining();
        let ranked = selection_scores(&disc, remaining.iter().map(|e| (e.id.as_str(), data.features[&e.id].as_slice())));
        Some(ranked.into_iter().map(|r| r.0).collect())
    } else {
        None
    };

    let mut similarity = None;
    let mut points = Vec::with_capacity(cfg.iterations + 1);
    for it in 0..=cfg.iterations {
        let labeled = pool.labeled();
        let model = train_model(spec.trainer, &init, &data.instances(&labeled), data, &train_cfg)?;
        points.push((pool.budget_spent(), data.evaluate(&model)?));
        if it == cfg.iterations {
            break;
        }
        if spec.pool_policy == PoolPolicy::TapadRestricted && similarity.is_none() {
            let sources: Vec<NamedSample<'_>> = data
                .source_unlabeled
                .iter()
                .zip(&source_examples)
                .map(|((name, _), ex)| NamedSample { name, examples: ex })
                .collect();
            let disc_cfg = TrainConfig { rng_seed: derive_seed(key, "tapad"), ..cfg.discriminator.clone() };
            similarity = Some(tapad_select_domain(&model, &sources, target_sample, &disc_cfg)?);
            apply_pool_policy(&spec, &mut pool, similarity.as_ref())?;
        }
        let ctx = SelectionContext {
            model: Some(&model),
            features: &data.features,
            static_ranking: ranking.as_deref(),
            mc_passes: train_cfg.mc_passes,
        };
        let ids = select_batch(spec.strategy, &pool, cfg.step, &ctx, &mut select_rng)?;
        pool.annotate(&ids)?;
    }
    debug_assert_eq!(pool.budget_spent(), cfg.total_budget());

    let annotations = pool
        .annotated()
        .iter()
        .map(|id| (id.clone(), pool.example(id).expect("annotated ids exist").domain.clone()))
        .collect();
    Ok(RunOutcome {
        method: spec.name.to_string(),
        target: data.target.clone(),
        seed,
        metric: data.metric_name(),
        auc: auc(&points)?,
        points,
        similarity,
        annotations,
    })
}
