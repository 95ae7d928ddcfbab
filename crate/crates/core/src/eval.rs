//! Experimental protocol: stratified account-level cross-validation, metrics,
//! the main experiment, ablations, sweeps, and a synthetic corpus generator
//! for desk-scale validation.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::BaselineError;
use crate::corpus::{Account, AccountLabel, Tweet, LABELS};
use crate::features::{featurize_tweet, FeatureConfig, FeatureGroup, FEATURE_GROUPS};
use crate::lexicons::{CategoryLexicon, EmbeddingTable, LexiconSet, MORALITY_CATEGORIES};
use crate::seqnet::{
    hyper_search, train, AccountSequences, LabeledSequence, Model, SearchSpace, SeqNetError,
    TrainConfig, TrialRecord, NUM_CLASSES,
};

pub type Confusion = [[u64; NUM_CLASSES]; NUM_CLASSES];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("confusion matrix is all zeros")]
    EmptyConfusion,
    #[error("k = {k} folds exceeds {total} accounts")]
    KTooLarge { k: usize, total: usize },
    #[error("fold {fold}: training split has a single class")]
    UntrainableFold { fold: usize },
    #[error("ablation base config must enable all feature groups")]
    IncompleteBaseConfig,
    #[error("synthetic spec invalid: {0}")]
    BadSyntheticSpec(String),
    #[error(transparent)]
    SeqNet(#[from] SeqNetError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: [ClassMetrics; NUM_CLASSES],
}

/// Accuracy, macro-F1, and per-class precision/recall/F1. The 0/0 cases are
/// all defined as 0.
pub fn metrics(confusion: &Confusion) -> Result<MetricsReport, EvalError> {
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(EvalError::EmptyConfusion);
    }
    let trace: u64 = (0..NUM_CLASSES).map(|i| confusion[i][i]).sum();
    let mut per_class = [ClassMetrics {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    }; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        let tp = confusion[c][c] as f64;
        let predicted: u64 = (0..NUM_CLASSES).map(|r| confusion[r][c]).sum();
        let actual: u64 = confusion[c].iter().sum();
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class[c] = ClassMetrics {
            precision,
            recall,
            f1,
        };
    }
    Ok(MetricsReport {
        accuracy: trace as f64 / total as f64,
        macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / NUM_CLASSES as f64,
        per_class,
    })
}

/// Macro-F1 with an all-zero matrix scoring 0; used internally where an empty
/// split is not an error.
pub fn macro_f1_from_counts(confusion: &Confusion) -> f64 {
    match metrics(confusion) {
        Ok(m) => m.macro_f1,
        Err(_) => 0.0,
    }
}

// ---------------------------------------------------------------------------
// Fold planning
// ---------------------------------------------------------------------------

/// Account-level fold assignments plus per-fold stratified validation subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: BTreeMap<String, usize>,
    /// For each fold, the training handles held out for validation.
    pub validation: Vec<BTreeSet<String>>,
    pub notes: Vec<String>,
}

impl FoldPlan {
    pub fn test_handles(&self, fold: usize) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(h, _)| h.as_str())
            .collect()
    }
}

pub const VALIDATION_FRACTION: f64 = 0.25;

/// Stratified k-fold plan: shuffle handles within class, deal round-robin
/// (class-staggered start folds keep fold sizes even), then hold out a
/// stratified 25% of each fold's training accounts for validation.
pub fn stratified_kfold(
    accounts: &[(String, AccountLabel)],
    k: usize,
    seed: u64,
) -> Result<FoldPlan, EvalError> {
    assert!(k >= 2, "k must be >= 2");
    if k > accounts.len() {
        return Err(EvalError::KTooLarge {
            k,
            total: accounts.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments: BTreeMap<String, usize> = BTreeMap::new();
    let mut notes = Vec::new();
    let mut by_class: Vec<Vec<String>> = vec![Vec::new(); NUM_CLASSES];
    for (handle, label) in accounts {
        by_class[label.index()].push(handle.clone());
    }
    for (ci, handles) in by_class.iter_mut().enumerate() {
        handles.sort();
        shuffle(handles, &mut rng);
        if !handles.is_empty() && handles.len() < k {
            notes.push(format!(
                "class {} has {} accounts (< {k} folds); it is absent from some test folds",
                LABELS[ci].as_str(),
                handles.len()
            ));
        }
        for (i, handle) in handles.iter().enumerate() {
            assignments.insert(handle.clone(), (ci + i) % k);
        }
    }

    let mut validation = Vec::with_capacity(k);
    for fold in 0..k {
        let mut held = BTreeSet::new();
        for handles in &by_class {
            let mut train: Vec<&String> = handles
                .iter()
                .filter(|h| assignments[h.as_str()] != fold)
                .collect();
            train.sort();
            shuffle(&mut train, &mut rng);
            let n = train.len();
            if n == 0 {
                continue;
            }
            let mut take = (n as f64 * VALIDATION_FRACTION + 0.5).floor() as usize;
            if take == 0 && n >= 2 {
                take = 1;
            }
            for h in train.into_iter().take(take) {
                held.insert(h.clone());
            }
        }
        validation.push(held);
    }

    Ok(FoldPlan {
        k,
        assignments,
        validation,
        notes,
    })
}

fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

// ---------------------------------------------------------------------------
// Featurized accounts
// ---------------------------------------------------------------------------

/// Per-tweet feature vectors over one account's chronologically sorted
/// timeline.
#[derive(Debug, Clone)]
pub struct FeaturizedAccount {
    pub handle: String,
    pub label: AccountLabel,
    pub tweet_features: Vec<Vec<f64>>,
}

impl FeaturizedAccount {
    /// Consecutive chunk sequences of exactly `s` tweets; returns the chunk
    /// list and the dropped-remainder size.
    pub fn chunk_sequences(&self, s: usize) -> (Vec<Vec<Vec<f64>>>, usize) {
        let n = self.tweet_features.len() / s;
        let chunks = (0..n)
            .map(|i| self.tweet_features[i * s..(i + 1) * s].to_vec())
            .collect();
        (chunks, self.tweet_features.len() - n * s)
    }
}

/// Featurize every account's timeline in chronological order.
pub fn featurize_accounts(
    accounts: &[Account],
    lexset: &LexiconSet,
    cfg: &FeatureConfig,
) -> Vec<FeaturizedAccount> {
    accounts
        .iter()
        .map(|acc| {
            let mut tweets: Vec<&Tweet> = acc.tweets.iter().collect();
            tweets.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
            FeaturizedAccount {
                handle: acc.handle.clone(),
                label: acc.label,
                tweet_features: tweets
                    .iter()
                    .map(|tw| featurize_tweet(tw, lexset, cfg).values)
                    .collect(),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub confusion: Confusion,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub test_accounts: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub chunk_size: Option<usize>,
    /// Trailing tweets dropped by chunk truncation, summed over accounts.
    pub dropped_tweets: u64,
    /// Accounts excluded from scoring because they yielded zero chunks.
    pub excluded_accounts: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub folds: Vec<FoldResult>,
    /// Unweighted mean of per-fold scores.
    pub mean_accuracy: f64,
    pub mean_macro_f1: f64,
    /// Scores of the summed (pooled) confusion matrix.
    pub pooled_accuracy: f64,
    pub pooled_macro_f1: f64,
    pub metadata: RunMetadata,
}

impl EvalReport {
    pub fn from_folds(folds: Vec<FoldResult>, metadata: RunMetadata) -> EvalReport {
        let n = folds.len().max(1) as f64;
        let mean_accuracy = folds.iter().map(|f| f.accuracy).sum::<f64>() / n;
        let mean_macro_f1 = folds.iter().map(|f| f.macro_f1).sum::<f64>() / n;
        let mut pooled: Confusion = [[0; NUM_CLASSES]; NUM_CLASSES];
        for f in &folds {
            for i in 0..NUM_CLASSES {
                for j in 0..NUM_CLASSES {
                    pooled[i][j] += f.confusion[i][j];
                }
            }
        }
        let (pooled_accuracy, pooled_macro_f1) = match metrics(&pooled) {
            Ok(m) => (m.accuracy, m.macro_f1),
            Err(_) => (0.0, 0.0),
        };
        EvalReport {
            folds,
            mean_accuracy,
            mean_macro_f1,
            pooled_accuracy,
            pooled_macro_f1,
            metadata,
        }
    }
}

pub fn fold_result(fold: usize, confusion: Confusion) -> FoldResult {
    let (accuracy, macro_f1) = match metrics(&confusion) {
        Ok(m) => (m.accuracy, m.macro_f1),
        Err(_) => (0.0, 0.0),
    };
    let test_accounts = confusion.iter().flatten().sum::<u64>() as usize;
    FoldResult {
        fold,
        confusion,
        accuracy,
        macro_f1,
        test_accounts,
    }
}

// ---------------------------------------------------------------------------
// Main experiment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ModelSpec {
    Fixed(TrainConfig),
    Search { space: SearchSpace, budget: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSetup {
    pub feature_cfg: FeatureConfig,
    pub chunk_size: usize,
    pub model: ModelSpec,
    pub seed: u64,
}

pub struct ExperimentOutcome {
    pub report: EvalReport,
    pub trial_logs: Vec<TrialRecord>,
}

/// Run the recurrent-model experiment over a fold plan: per fold, fit on
/// train-minus-validation, early-stop/select on validation, score the test
/// fold at account level.
pub fn run_experiment(
    accounts: &[Account],
    lexset: &LexiconSet,
    setup: &ExperimentSetup,
    plan: &FoldPlan,
) -> Result<ExperimentOutcome, EvalError> {
    let featurized = featurize_accounts(accounts, lexset, &setup.feature_cfg);
    let mut folds = Vec::with_capacity(plan.k);
    let mut metadata = RunMetadata {
        seed: setup.seed,
        chunk_size: Some(setup.chunk_size),
        ..RunMetadata::default()
    };
    let mut trial_logs = Vec::new();

    // chunk once per account
    let mut chunked: Vec<(usize, Vec<Vec<Vec<f64>>>)> = Vec::new();
    for (i, acc) in featurized.iter().enumerate() {
        let (chunks, dropped) = acc.chunk_sequences(setup.chunk_size);
        metadata.dropped_tweets += dropped as u64;
        if chunks.is_empty() {
            metadata.excluded_accounts.push(acc.handle.clone());
        }
        chunked.push((i, chunks));
    }
    metadata.excluded_accounts.sort();
    metadata.notes.extend(plan.notes.iter().cloned());

    for fold in 0..plan.k {
        let mut train_chunks: Vec<LabeledSequence<f64>> = Vec::new();
        let mut val_chunks: Vec<LabeledSequence<f64>> = Vec::new();
        let mut train_accounts: Vec<AccountSequences<f64>> = Vec::new();
        let mut val_accounts: Vec<AccountSequences<f64>> = Vec::new();
        let mut test_accounts: Vec<(&FeaturizedAccount, &Vec<Vec<Vec<f64>>>)> = Vec::new();

        for (i, chunks) in &chunked {
            let acc = &featurized[*i];
            if chunks.is_empty() {
                continue;
            }
            let assigned = plan.assignments[&acc.handle];
            if assigned == fold {
                test_accounts.push((acc, chunks));
            } else if plan.validation[fold].contains(&acc.handle) {
                for c in chunks {
                    val_chunks.push(LabeledSequence {
                        features: c.clone(),
                        label: acc.label,
                    });
                }
                val_accounts.push(AccountSequences {
                    handle: acc.handle.clone(),
                    label: acc.label,
                    sequences: chunks.clone(),
                });
            } else {
                for c in chunks {
                    train_chunks.push(LabeledSequence {
                        features: c.clone(),
                        label: acc.label,
                    });
                }
                train_accounts.push(AccountSequences {
                    handle: acc.handle.clone(),
                    label: acc.label,
                    sequences: chunks.clone(),
                });
            }
        }

        let distinct: BTreeSet<usize> = train_chunks.iter().map(|c| c.label.index()).collect();
        if distinct.len() < 2 {
            if train_chunks.is_empty() && test_accounts.is_empty() {
                // every account excluded (e.g. chunk size exceeds all
                // timelines): an empty fold, not an error
                folds.push(fold_result(fold, [[0; NUM_CLASSES]; NUM_CLASSES]));
                continue;
            }
            return Err(EvalError::UntrainableFold { fold });
        }

        let model = match &setup.model {
            ModelSpec::Fixed(cfg) => {
                let cfg = TrainConfig {
                    seed: setup.seed.wrapping_add(fold as u64),
                    ..cfg.clone()
                };
                let out = train(&train_chunks, &cfg, &val_chunks)?;
                Model::new(out.params, out.stats)
            }
            ModelSpec::Search { space, budget } => {
                let out = hyper_search(
                    space,
                    *budget,
                    &train_accounts,
                    &val_accounts,
                    setup.seed.wrapping_add(fold as u64),
                )?;
                trial_logs.extend(out.trials.iter().cloned());
                Model::new(out.best_outcome.params, out.best_outcome.stats)
            }
        };

        let mut confusion: Confusion = [[0; NUM_CLASSES]; NUM_CLASSES];
        for (acc, chunks) in test_accounts {
            let (pred, _) = model.predict_account_chunks(chunks)?;
            confusion[acc.label.index()][pred.index()] += 1;
        }
        folds.push(fold_result(fold, confusion));
    }

    Ok(ExperimentOutcome {
        report: EvalReport::from_folds(folds, metadata),
        trial_logs,
    })
}

// ---------------------------------------------------------------------------
// Ablations and sweeps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `None` is the all-features run.
    pub removed: Option<FeatureGroup>,
    pub mean_accuracy: f64,
    pub mean_macro_f1: f64,
}

/// One all-features run plus one run per removed feature group, in canonical
/// group order.
pub fn ablation_suite(
    accounts: &[Account],
    lexset: &LexiconSet,
    base: &ExperimentSetup,
    plan: &FoldPlan,
) -> Result<Vec<AblationRow>, EvalError> {
    if FEATURE_GROUPS
        .iter()
        .any(|&g| !base.feature_cfg.is_enabled(g))
    {
        return Err(EvalError::IncompleteBaseConfig);
    }
    let mut rows = Vec::with_capacity(1 + FEATURE_GROUPS.len());
    let full = run_experiment(accounts, lexset, base, plan)?.report;
    rows.push(AblationRow {
        removed: None,
        mean_accuracy: full.mean_accuracy,
        mean_macro_f1: full.mean_macro_f1,
    });
    for &g in &FEATURE_GROUPS {
        let setup = ExperimentSetup {
            feature_cfg: base.feature_cfg.without(g),
            ..base.clone()
        };
        let report = run_experiment(accounts, lexset, &setup, plan)?.report;
        rows.push(AblationRow {
            removed: Some(g),
            mean_accuracy: report.mean_accuracy,
            mean_macro_f1: report.mean_macro_f1,
        });
    }
    Ok(rows)
}

/// One experiment per chunk size, sharing the fold plan.
pub fn chunk_size_sweep(
    accounts: &[Account],
    lexset: &LexiconSet,
    base: &ExperimentSetup,
    sizes: &[usize],
    plan: &FoldPlan,
) -> Result<Vec<(usize, EvalReport)>, EvalError> {
    assert!(!sizes.is_empty() && sizes.iter().all(|&s| s >= 1));
    let mut out = Vec::with_capacity(sizes.len());
    for &s in sizes {
        let setup = ExperimentSetup {
            chunk_size: s,
            ..base.clone()
        };
        let report = run_experiment(accounts, lexset, &setup, plan)?.report;
        out.push((s, report));
    }
    Ok(out)
}

/// Grid of the top-k tweet-level baseline over (metric, k).
pub fn topk_sweep(
    accounts: &[Account],
    lexset: &LexiconSet,
    feature_cfg: &FeatureConfig,
    base: &crate::baselines::BaselineConfig,
    metrics_list: &[crate::corpus::EngagementMetric],
    ks: &[usize],
    plan: &FoldPlan,
) -> Result<Vec<(crate::corpus::EngagementMetric, usize, EvalReport)>, EvalError> {
    assert!(ks.iter().all(|&k| k >= 1));
    let mut out = Vec::new();
    for &metric in metrics_list {
        for &k in ks {
            let cfg = crate::baselines::BaselineConfig {
                topk_metric: metric,
                topk_k: k,
                ..base.clone()
            };
            let report = crate::baselines::run_baseline(
                crate::baselines::BaselineKind::LrTweetTopk,
                accounts,
                lexset,
                feature_cfg,
                &cfg,
                plan,
            )?;
            out.push((metric, k, report));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Synthetic corpus generation
// ---------------------------------------------------------------------------

/// Parameters of the synthetic corpus generator. Classes differ only in how
/// latent topic modes transition across consecutive tweets; per-tweet marginal
/// distributions are matched across classes by construction (each class
/// signature has an equal number of high-mode positions per period), so
/// order-agnostic models cannot separate them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub accounts_per_class: usize,
    pub tweets_per_account: usize,
    /// 0 = pure noise, 1 = deterministic signatures.
    pub strength: f64,
    /// Topic-mode vocabulary size per cluster.
    pub vocab_size: usize,
    pub embedding_dim: usize,
    /// Length of the per-class mode signature; should divide the chunk size.
    pub signature_period: usize,
    /// Feature groups that carry the class signal; the rest stay
    /// mode-independent noise.
    pub signal_groups: Vec<FeatureGroup>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            accounts_per_class: 10,
            tweets_per_account: 400,
            strength: 0.5,
            vocab_size: 12,
            embedding_dim: 16,
            signature_period: 20,
            signal_groups: FEATURE_GROUPS.to_vec(),
            seed: 0,
        }
    }
}

pub struct SyntheticCorpus {
    pub accounts: Vec<Account>,
    pub lexicons: LexiconSet,
}

const EMOTION_NAMES: [&str; 15] = [
    "joy",
    "trust",
    "fear",
    "surprise",
    "sadness",
    "disgust",
    "anger",
    "anticipation",
    "love",
    "hope",
    "calmness",
    "despair",
    "disappointment",
    "compassion",
    "pride",
];

/// Class mode signatures over one period: a half-period block of high
/// positions, phase-shifted by a quarter period per class. Every class has
/// exactly period/2 high positions, so per-tweet marginals match; the phase
/// is only visible to sequence-aware models.
fn class_template(label: AccountLabel, period: usize) -> Vec<bool> {
    let shift = label.index() * period / 4;
    (0..period)
        .map(|i| (i + period - shift) % period < period / 2)
        .collect()
}

fn build_fixture_lexicons(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> LexiconSet {
    let mut emotion = CategoryLexicon::new("emotion");
    for (ci, cat) in EMOTION_NAMES.iter().enumerate() {
        for j in 0..4 {
            emotion.insert(&format!("emo{ci}w{j}"), cat);
        }
    }
    let sentiment = (0..4)
        .map(|li| {
            let mut lex = CategoryLexicon::new(&format!("sent{li}"));
            for j in 0..4 {
                lex.insert(&format!("pos{li}w{j}"), "positive");
                lex.insert(&format!("neg{li}w{j}"), "negative");
            }
            lex
        })
        .collect();
    let mut morality = CategoryLexicon::new("morality");
    for (ci, cat) in MORALITY_CATEGORIES.iter().enumerate() {
        for j in 0..4 {
            morality.insert(&format!("mor{ci}w{j}"), cat);
        }
    }

    let d = spec.embedding_dim;
    let mut entries = std::collections::HashMap::new();
    let random_vec = |center: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..d)
            .map(|j| {
                let base = if j < d / 2 { center } else { -center };
                base + (rng.gen::<f64>() - 0.5) * 0.4
            })
            .collect()
    };
    for i in 0..spec.vocab_size {
        entries.insert(format!("topica{i}"), random_vec(1.0, rng));
        entries.insert(format!("topicb{i}"), random_vec(-1.0, rng));
        entries.insert(format!("filler{i}"), random_vec(0.0, rng));
    }
    LexiconSet {
        emotion,
        sentiment,
        morality,
        embeddings: EmbeddingTable {
            dimension: d,
            entries,
        },
    }
}

/// Seed-deterministic synthetic corpus with class-specific sequential mode
/// signatures. Reply counts are boosted on signature-consistent tweets.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus, EvalError> {
    if spec.accounts_per_class == 0 {
        return Err(EvalError::BadSyntheticSpec(
            "accounts_per_class must be positive".into(),
        ));
    }
    if spec.tweets_per_account == 0 || spec.vocab_size == 0 || spec.embedding_dim == 0 {
        return Err(EvalError::BadSyntheticSpec(
            "tweets, vocabulary, and embedding dimension must be positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.strength) {
        return Err(EvalError::BadSyntheticSpec(format!(
            "strength {} outside [0, 1]",
            spec.strength
        )));
    }
    if spec.signature_period < 4 || spec.signature_period % 4 != 0 {
        return Err(EvalError::BadSyntheticSpec(
            "signature_period must be a positive multiple of 4".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lexicons = build_fixture_lexicons(spec, &mut rng);
    let carries = |g: FeatureGroup| spec.signal_groups.contains(&g);

    let mut accounts = Vec::new();
    for &label in &LABELS {
        let template = class_template(label, spec.signature_period);
        for ai in 0..spec.accounts_per_class {
            let handle = format!("{}{:03}", label.as_str(), ai);
            let mut tweets = Vec::with_capacity(spec.tweets_per_account);
            for idx in 0..spec.tweets_per_account {
                let bit = template[idx % spec.signature_period];
                let mode = if rng.gen::<f64>() < 0.5 + spec.strength / 2.0 {
                    bit
                } else {
                    !bit
                };

                let mut words: Vec<String> = Vec::new();
                // unique fixed-width token keeps dedup-cleaning a no-op
                // without letting token length leak class identity
                words.push(format!(
                    "u{:09}",
                    accounts.len() * spec.tweets_per_account + idx
                ));
                if carries(FeatureGroup::Embeddings) {
                    let cluster = if mode { "topica" } else { "topicb" };
                    for _ in 0..3 {
                        words.push(format!("{cluster}{}", rng.gen_range(0..spec.vocab_size)));
                    }
                    for _ in 0..2 {
                        words.push(format!("filler{}", rng.gen_range(0..spec.vocab_size)));
                    }
                } else {
                    for _ in 0..5 {
                        words.push(format!("filler{}", rng.gen_range(0..spec.vocab_size)));
                    }
                }
                if carries(FeatureGroup::Emotion) {
                    let cat = if mode {
                        rng.gen_range(0..8)
                    } else {
                        rng.gen_range(8..15)
                    };
                    words.push(format!("emo{cat}w{}", rng.gen_range(0..4)));
                } else {
                    words.push(format!("emo{}w{}", rng.gen_range(0..15), rng.gen_range(0..4)));
                }
                if carries(FeatureGroup::Sentiment) {
                    let li = rng.gen_range(0..4);
                    let pol = if mode { "pos" } else { "neg" };
                    words.push(format!("{pol}{li}w{}", rng.gen_range(0..4)));
                } else {
                    let li = rng.gen_range(0..4);
                    let pol = if rng.gen::<bool>() { "pos" } else { "neg" };
                    words.push(format!("{pol}{li}w{}", rng.gen_range(0..4)));
                }
                if carries(FeatureGroup::Morality) {
                    // even categories are virtues, odd are vices
                    let cat = if mode {
                        2 * rng.gen_range(0..5)
                    } else {
                        2 * rng.gen_range(0..5) + 1
                    };
                    words.push(format!("mor{cat}w{}", rng.gen_range(0..4)));
                } else {
                    words.push(format!("mor{}w{}", rng.gen_range(0..10), rng.gen_range(0..4)));
                }
                if carries(FeatureGroup::Style) {
                    if mode {
                        let i = words.len() - 1;
                        words[i] = words[i].to_uppercase();
                        words.push("!!".into());
                    } else {
                        words.push("??".into());
                    }
                }

                let signal_bearing = mode == bit;
                let replies = if signal_bearing {
                    5 + rng.gen_range(0..20)
                } else {
                    rng.gen_range(0..5)
                };
                tweets.push(Tweet {
                    id: format!("{handle}-{idx:05}"),
                    text: words.join(" "),
                    timestamp: 1_500_000_000 + idx as i64 * 60,
                    reply_count: replies,
                    like_count: rng.gen_range(0..50),
                    retweet_count: rng.gen_range(0..50),
                });
            }
            accounts.push(Account {
                handle,
                label,
                tweets,
            });
        }
    }
    accounts.sort_by(|a, b| a.handle.cmp(&b.handle));
    Ok(SyntheticCorpus { accounts, lexicons })
}

/// Serialize a category lexicon in the `word<TAB>category` format, sorted for
/// byte stability.
pub fn write_lexicon_tsv(
    lex: &CategoryLexicon,
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    let mut rows: Vec<(usize, String)> = Vec::new();
    for (word, cats) in &lex.entries {
        for &c in cats {
            rows.push((c, word.clone()));
        }
    }
    // category-major ordering so a reload reproduces the category order
    rows.sort();
    for (c, word) in &rows {
        writeln!(out, "{word}\t{}", lex.categories[*c])?;
    }
    Ok(())
}

/// Serialize an embedding table in the `word v1 .. vd` format, sorted by word.
pub fn write_embeddings_txt(
    table: &EmbeddingTable,
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    let mut words: Vec<&String> = table.entries.keys().collect();
    words.sort();
    for word in words {
        let comps: Vec<String> = table.entries[word].iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{word} {}", comps.join(" "))?;
    }
    Ok(())
}
