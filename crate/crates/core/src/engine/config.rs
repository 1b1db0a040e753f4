use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::EngineError;
use crate::corpus::{generate, load_jsonl, validate_collection, DomainCorpus, SyntheticSpec, Task};
use crate::features::FeaturizerConfig;
use crate::neural::TrainConfig;
use crate::strategies::{method, registry, MethodSpec};

/// Where the corpora come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum CorporaSource {
    Synthetic { spec: SpecSource, seed: u64 },
    Jsonl(Vec<PathBuf>),
}

/// A built-in preset (`"sentiment"`, `"tagging"`, `"confuser"`) or a full
/// generator spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecSource {
    Preset(String),
    Custom(SyntheticSpec),
}

impl SpecSource {
    pub fn resolve(&self) -> Result<SyntheticSpec, EngineError> {
        match self {
            SpecSource::Custom(spec) => Ok(spec.clone()),
            SpecSource::Preset(name) => preset(name),
        }
    }
}

pub fn preset(name: &str) -> Result<SyntheticSpec, EngineError> {
    match name {
        "sentiment" => Ok(SyntheticSpec::sentiment_benchmark()),
        "tagging" => Ok(SyntheticSpec::tagging_benchmark()),
        "confuser" => Ok(SyntheticSpec::confuser_benchmark()),
        other => Err(EngineError::Config(format!("unknown synthetic preset `{other}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Targets {
    /// Every domain in turn.
    #[default]
    All,
    List(Vec<String>),
}

impl Serialize for Targets {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Targets::All => s.serialize_str("all"),
            Targets::List(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Targets {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Word(String),
            List(Vec<String>),
        }
        match Repr::deserialize(d)? {
            Repr::Word(w) if w == "all" => Ok(Targets::All),
            Repr::Word(w) => Err(serde::de::Error::custom(format!("targets must be \"all\" or a list, got \"{w}\""))),
            Repr::List(v) => Ok(Targets::List(v)),
        }
    }
}

/// Experiment description as written by users. Unset fields take the
/// task's defaults; `train` and `features` may override individual keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub corpora: CorporaSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(default)]
    pub targets: Targets,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub train: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub features: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discriminator_epochs: Option<usize>,
    /// Per-domain cap on unlabeled examples used for adaptation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unlabeled_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded_domains: Vec<String>,
    pub output_dir: PathBuf,
}

/// A config with every default filled in and validated.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub task: Task,
    pub methods: Vec<MethodSpec>,
    pub targets: Targets,
    pub seeds: Vec<u64>,
    pub seed_size: usize,
    pub step: usize,
    pub iterations: usize,
    pub train: TrainConfig,
    pub discriminator: TrainConfig,
    pub features: FeaturizerConfig,
    pub unlabeled_cap: usize,
    pub excluded_domains: Vec<String>,
    pub output_dir: PathBuf,
}

impl ResolvedConfig {
    /// `[M, M+L, ..., M+iterations·L]`.
    pub fn budgets(&self) -> Vec<usize> {
        (0..=self.iterations).map(|i| self.seed_size + i * self.step).collect()
    }

    pub fn total_budget(&self) -> usize {
        self.seed_size + self.iterations * self.step
    }
}

pub fn task_defaults(task: Task) -> (usize, usize, usize, TrainConfig) {
    match task {
        Task::Classification => (50, 50, 4, TrainConfig::default()),
        // Each sentence contributes a dozen token instances, so fewer passes.
        Task::Tagging => (500, 500, 4, TrainConfig { batch_size: 16, epochs: 10, ..TrainConfig::default() }),
    }
}

pub const DEFAULT_DISCRIMINATOR_EPOCHS: usize = 5;

fn overlay<T: Serialize + for<'de> Deserialize<'de>>(base: &T, patch: &Map<String, Value>, what: &str) -> Result<T, EngineError> {
    let mut value = serde_json::to_value(base).map_err(|e| EngineError::Config(e.to_string()))?;
    let obj = value.as_object_mut().expect("struct serializes to an object");
    for (k, v) in patch {
        if !obj.contains_key(k) {
            return Err(EngineError::Config(format!("unknown {what} key `{k}`")));
        }
        obj.insert(k.clone(), v.clone());
    }
    serde_json::from_value(value).map_err(|e| EngineError::Config(format!("{what}: {e}")))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        serde_json::from_str(text).map_err(|e| EngineError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EngineError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| EngineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn resolve(&self) -> Result<ResolvedConfig, EngineError> {
        let (m, l, iters, train_base) = task_defaults(self.task);
        let methods = match &self.methods {
            None => registry().to_vec(),
            Some(names) => names.iter().map(|n| method(n)).collect::<Result<Vec<_>, _>>()?,
        };
        if methods.is_empty() {
            return Err(EngineError::Config("no methods".into()));
        }
        let unique: BTreeSet<&str> = methods.iter().map(|m| m.name).collect();
        if unique.len() != methods.len() {
            return Err(EngineError::Config("duplicate method".into()));
        }
        let seeds = self.seeds.clone().unwrap_or_else(|| (0..5).collect());
        if seeds.is_empty() || seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            return Err(EngineError::Config("seeds must be non-empty and distinct".into()));
        }
        let seed_size = self.seed_size.unwrap_or(m);
        let step = self.step.unwrap_or(l);
        let iterations = self.iterations.unwrap_or(iters);
        if seed_size == 0 || step == 0 || iterations == 0 {
            return Err(EngineError::Config("seed_size, step and iterations must be >= 1".into()));
        }
        let train: TrainConfig = overlay(&train_base, &self.train, "train")?;
        train.validate().map_err(|e| EngineError::Config(e.to_string()))?;
        let discriminator = TrainConfig {
            epochs: self.discriminator_epochs.unwrap_or(DEFAULT_DISCRIMINATOR_EPOCHS),
            smoothing_alpha: 0.0,
            ..train.clone()
        };
        discriminator.validate().map_err(|e| EngineError::Config(e.to_string()))?;
        let features: FeaturizerConfig = overlay(&FeaturizerConfig::default(), &self.features, "features")?;
        features.validate().map_err(|e| EngineError::Config(e.to_string()))?;
        if let Targets::List(t) = &self.targets {
            if t.is_empty() {
                return Err(EngineError::Config("targets list is empty".into()));
            }
        }
        if self.unlabeled_cap == Some(0) {
            return Err(EngineError::Config("unlabeled_cap must be >= 1".into()));
        }
        if let CorporaSource::Synthetic { spec, .. } = &self.corpora {
            let spec = spec.resolve()?;
            if spec.task != self.task {
                return Err(EngineError::Config(format!("synthetic spec is for {:?}, config for {:?}", spec.task, self.task)));
            }
        }
        Ok(ResolvedConfig {
            task: self.task,
            methods,
            targets: self.targets.clone(),
            seeds,
            seed_size,
            step,
            iterations,
            train,
            discriminator,
            features,
            unlabeled_cap: self.unlabeled_cap.unwrap_or(usize::MAX),
            excluded_domains: self.excluded_domains.clone(),
            output_dir: self.output_dir.clone(),
        })
    }

    /// Generates or reads the corpora and checks id uniqueness.
    pub fn load_corpora(&self) -> Result<Vec<DomainCorpus>, EngineError> {
        let corpora = match &self.corpora {
            CorporaSource::Synthetic { spec, seed } => generate(&spec.resolve()?, *seed)?,
            CorporaSource::Jsonl(paths) => {
                let mut merged: Vec<DomainCorpus> = Vec::new();
                for path in paths {
                    for c in load_jsonl(path, self.task)? {
                        match merged.iter_mut().find(|m| m.domain == c.domain) {
                            Some(m) => {
                                m.pool.extend(c.pool);
                                m.unlabeled.extend(c.unlabeled);
                                m.test.extend(c.test);
                            }
                            None => merged.push(c),
                        }
                    }
                }
                merged
            }
        };
        validate_collection(&corpora)?;
        Ok(corpora)
    }
}
