//! Declarative experiment configuration. Everything that shapes a run lives
//! in one TOML file; command-line flags only locate files and override seeds.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{BaselineConfig, BaselineKind, LrSettings, TweetAggregation};
use crate::corpus::EngagementMetric;
use crate::eval::{ExperimentSetup, ModelSpec};
use crate::features::{FeatureConfig, FeatureGroup, FEATURE_GROUPS};
use crate::lexicons::{
    load_category_lexicon, load_embeddings, merge_emotion_lexicons, LexiconSet,
};
use crate::seqnet::{Activation, Optimizer, SearchSpace, TrainConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Lexicon(#[from] crate::lexicons::LexiconError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSection {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LexiconSection {
    /// One path, or two to merge (primary first).
    pub emotion: Vec<PathBuf>,
    /// Exactly four two-class lexicons, order fixed here.
    pub sentiment: Vec<PathBuf>,
    pub morality: PathBuf,
    pub embeddings: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSection {
    pub groups: Vec<String>,
    pub normalize_counts: bool,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            groups: FEATURE_GROUPS.iter().map(|g| g.as_str().to_string()).collect(),
            normalize_counts: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSection {
    pub chunk_size: usize,
    pub folds: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            chunk_size: 20,
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub hidden: usize,
    pub activation: Activation,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub class_weights: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        ModelSection {
            hidden: d.hidden,
            activation: d.activation,
            optimizer: d.optimizer,
            learning_rate: d.learning_rate,
            dropout: d.dropout_rate,
            batch_size: d.batch_size,
            epochs: d.epochs,
            patience: d.patience,
            class_weights: d.class_weights,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSection {
    pub budget: usize,
    pub epochs: usize,
    pub patience: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            budget: 10,
            epochs: 30,
            patience: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineSection {
    pub kind: String,
    pub lambda: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub min_document_frequency: usize,
    pub tweet_aggregation: TweetAggregation,
    pub topk_metric: EngagementMetric,
    pub topk_k: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        let lr = LrSettings::default();
        BaselineSection {
            kind: "majority".into(),
            lambda: lr.lambda,
            max_iterations: lr.max_iterations,
            gradient_tolerance: lr.gradient_tolerance,
            min_document_frequency: 2,
            tweet_aggregation: TweetAggregation::Majority,
            topk_metric: EngagementMetric::Replies,
            topk_k: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    pub chunk_sizes: Vec<usize>,
    pub topk_metrics: Vec<EngagementMetric>,
    pub topk_ks: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            chunk_sizes: vec![10, 20, 40],
            topk_metrics: vec![
                EngagementMetric::Replies,
                EngagementMetric::Likes,
                EngagementMetric::Retweets,
            ],
            topk_ks: vec![10, 100, 500],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub corpus: CorpusSection,
    pub lexicons: LexiconSection,
    #[serde(default)]
    pub features: FeatureSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSection>,
    #[serde(default)]
    pub baseline: BaselineSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
        // paths in the config are relative to the config file
        if let Some(dir) = path.parent() {
            let anchor = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = dir.join(&p);
                }
            };
            anchor(&mut cfg.corpus.path);
            cfg.lexicons.emotion.iter_mut().for_each(&anchor);
            cfg.lexicons.sentiment.iter_mut().for_each(&anchor);
            anchor(&mut cfg.lexicons.morality);
            anchor(&mut cfg.lexicons.embeddings);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.lexicons.emotion.is_empty() || self.lexicons.emotion.len() > 2 {
            return Err(ConfigError::Invalid(
                "lexicons.emotion takes one path, or two to merge".into(),
            ));
        }
        if self.lexicons.sentiment.len() != 4 {
            return Err(ConfigError::Invalid(format!(
                "lexicons.sentiment needs exactly 4 paths, got {}",
                self.lexicons.sentiment.len()
            )));
        }
        if self.features.groups.is_empty() {
            return Err(ConfigError::Invalid(
                "features.groups must enable at least one group".into(),
            ));
        }
        for g in &self.features.groups {
            if FeatureGroup::parse(g).is_none() {
                return Err(ConfigError::Invalid(format!("unknown feature group {g:?}")));
            }
        }
        BaselineKind::parse(&self.baseline.kind)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.experiment.chunk_size == 0 {
            return Err(ConfigError::Invalid("experiment.chunk_size must be >= 1".into()));
        }
        if self.experiment.folds < 2 {
            return Err(ConfigError::Invalid("experiment.folds must be >= 2".into()));
        }
        Ok(())
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            enabled_groups: self
                .features
                .groups
                .iter()
                .filter_map(|g| FeatureGroup::parse(g))
                .collect(),
            normalize_counts: self.features.normalize_counts,
        }
    }

    pub fn load_lexicons(&self) -> Result<LexiconSet, ConfigError> {
        let mut emotion = load_category_lexicon(&self.lexicons.emotion[0], "emotion")?;
        if let Some(secondary) = self.lexicons.emotion.get(1) {
            let sec = load_category_lexicon(secondary, "emotion_secondary")?;
            emotion = merge_emotion_lexicons(&emotion, &sec);
        }
        let sentiment = self
            .lexicons
            .sentiment
            .iter()
            .enumerate()
            .map(|(i, p)| load_category_lexicon(p, &format!("sentiment{i}")))
            .collect::<Result<Vec<_>, _>>()?;
        let morality = load_category_lexicon(&self.lexicons.morality, "morality")?;
        let embeddings = load_embeddings(&self.lexicons.embeddings)?;
        let set = LexiconSet {
            emotion,
            sentiment,
            morality,
            embeddings,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            hidden: self.model.hidden,
            activation: self.model.activation,
            optimizer: self.model.optimizer,
            learning_rate: self.model.learning_rate,
            dropout_rate: self.model.dropout,
            batch_size: self.model.batch_size,
            epochs: self.model.epochs,
            seed,
            patience: self.model.patience,
            class_weights: self.model.class_weights,
        }
    }

    pub fn model_spec(&self, seed: u64) -> ModelSpec {
        match &self.search {
            Some(search) => ModelSpec::Search {
                space: SearchSpace {
                    epochs: search.epochs,
                    patience: search.patience,
                    ..SearchSpace::default()
                },
                budget: search.budget,
            },
            None => ModelSpec::Fixed(self.train_config(seed)),
        }
    }

    pub fn experiment_setup(&self, seed: u64) -> ExperimentSetup {
        ExperimentSetup {
            feature_cfg: self.feature_config(),
            chunk_size: self.experiment.chunk_size,
            model: self.model_spec(seed),
            seed,
        }
    }

    pub fn baseline_config(&self, seed: u64) -> BaselineConfig {
        BaselineConfig {
            chunk_size: self.experiment.chunk_size,
            lr: LrSettings {
                lambda: self.baseline.lambda,
                max_iterations: self.baseline.max_iterations,
                gradient_tolerance: self.baseline.gradient_tolerance,
            },
            min_document_frequency: self.baseline.min_document_frequency,
            tweet_aggregation: self.baseline.tweet_aggregation,
            topk_metric: self.baseline.topk_metric,
            topk_k: self.baseline.topk_k,
            seed,
            seqnet: self.train_config(seed),
        }
    }
}
