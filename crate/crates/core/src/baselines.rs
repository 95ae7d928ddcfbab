//! Comparison systems: bag-of-words + logistic regression, tweet-level and
//! chunk-level feature classifiers, the single-tweet variant of the recurrent
//! model, and top-k engagement selection.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Account, AccountLabel, EngagementMetric};
use crate::features::tokenize;
use crate::linalg::{softmax, Matrix};
use crate::scalar::Scalar;
use crate::seqnet::NUM_CLASSES;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("input has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown baseline kind {0:?}")]
    UnknownKind(String),
}

/// Token -> dense column index, built from training accounts only.
#[derive(Debug, Clone)]
pub struct BowVocabulary {
    pub index: BTreeMap<String, usize>,
    pub min_document_frequency: usize,
}

impl BowVocabulary {
    /// Build from training accounts; a document is one account's aggregated
    /// tweets. Tokens below the document-frequency cutoff are dropped.
    pub fn build(accounts: &[&Account], min_document_frequency: usize) -> Self {
        let mut df: HashMap<String, usize> = HashMap::new();
        for acc in accounts {
            let mut seen: HashSet<String> = HashSet::new();
            for tw in &acc.tweets {
                for tok in tokenize(&tw.text) {
                    seen.insert(tok.text);
                }
            }
            for tok in seen {
                *df.entry(tok).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<String> = df
            .into_iter()
            .filter(|(_, c)| *c >= min_document_frequency)
            .map(|(t, _)| t)
            .collect();
        kept.sort();
        BowVocabulary {
            index: kept.into_iter().enumerate().map(|(i, t)| (t, i)).collect(),
            min_document_frequency,
        }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

/// Term counts over all of an account's tweets; out-of-vocabulary tokens are
/// ignored.
pub fn bow_vectorize(account: &Account, vocab: &BowVocabulary) -> Vec<f64> {
    let mut counts = vec![0.0; vocab.len()];
    for tw in &account.tweets {
        for tok in tokenize(&tw.text) {
            if let Some(&i) = vocab.index.get(&tok.text) {
                counts[i] += 1.0;
            }
        }
    }
    counts
}

/// Multinomial logistic regression with L2 penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel<S> {
    /// class x feature
    pub weights: Matrix<S>,
    pub bias: Vec<S>,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSettings {
    pub lambda: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for LrSettings {
    fn default() -> Self {
        LrSettings {
            lambda: 1e-4,
            max_iterations: 5000,
            gradient_tolerance: 1e-6,
        }
    }
}

fn lr_loss_and_grad<S: Scalar>(
    weights: &Matrix<S>,
    bias: &[S],
    x: &[Vec<S>],
    y: &[usize],
    lambda: S,
) -> (S, Matrix<S>, Vec<S>) {
    let n = x.len();
    let dims = weights.cols;
    let scale = S::one() / S::from_f64_lossy(n as f64);
    let mut loss = S::zero();
    let mut gw = Matrix::zeros(NUM_CLASSES, dims);
    let mut gb = vec![S::zero(); NUM_CLASSES];
    for (xi, &yi) in x.iter().zip(y) {
        let mut scores = weights.matvec(xi);
        for (s, b) in scores.iter_mut().zip(bias) {
            *s += *b;
        }
        let probs = softmax(&scores);
        loss += -(probs[yi] + S::from_f64_lossy(1e-300)).ln() * scale;
        for c in 0..NUM_CLASSES {
            let d = (probs[c] - if c == yi { S::one() } else { S::zero() }) * scale;
            gb[c] += d;
            let row = gw.row_mut(c);
            for (g, &v) in row.iter_mut().zip(xi) {
                *g += d * v;
            }
        }
    }
    // L2 penalty on weights only
    let half = S::from_f64_lossy(0.5);
    let mut penalty = S::zero();
    for (g, &w) in gw.data.iter_mut().zip(&weights.data) {
        penalty += w * w;
        *g += lambda * w;
    }
    loss += half * lambda * penalty;
    (loss, gw, gb)
}

/// Fit by full-batch gradient descent with backtracking line search, to the
/// gradient-norm tolerance or the iteration cap, whichever comes first.
pub fn lr_train<S: Scalar>(
    x: &[Vec<S>],
    y: &[AccountLabel],
    settings: &LrSettings,
) -> Result<LinearModel<S>, BaselineError> {
    assert_eq!(x.len(), y.len());
    let distinct: HashSet<usize> = y.iter().map(|l| l.index()).collect();
    if distinct.len() < 2 {
        return Err(BaselineError::SingleClass);
    }
    let dims = x[0].len();
    let y_idx: Vec<usize> = y.iter().map(|l| l.index()).collect();
    let lambda = S::from_f64_lossy(settings.lambda);

    let mut weights = Matrix::zeros(NUM_CLASSES, dims);
    let mut bias = vec![S::zero(); NUM_CLASSES];
    let mut step = 1.0f64;
    for _ in 0..settings.max_iterations {
        let (loss, gw, gb) = lr_loss_and_grad(&weights, &bias, x, &y_idx, lambda);
        let grad_sq: S = gw.data.iter().map(|&g| g * g).sum::<S>()
            + gb.iter().map(|&g| g * g).sum::<S>();
        let grad_norm = grad_sq.to_f64_lossy().sqrt();
        if grad_norm <= settings.gradient_tolerance {
            break;
        }
        // Armijo backtracking keeps the loss non-increasing
        step *= 2.0;
        loop {
            let s = S::from_f64_lossy(step);
            let mut w_new = weights.clone();
            for (w, &g) in w_new.data.iter_mut().zip(&gw.data) {
                *w = *w - s * g;
            }
            let b_new: Vec<S> = bias.iter().zip(&gb).map(|(&b, &g)| b - s * g).collect();
            let (loss_new, _, _) = lr_loss_and_grad(&w_new, &b_new, x, &y_idx, lambda);
            let armijo = loss - S::from_f64_lossy(1e-4 * step) * grad_sq;
            if loss_new <= armijo || step < 1e-16 {
                weights = w_new;
                bias = b_new;
                break;
            }
            step *= 0.5;
        }
    }
    Ok(LinearModel {
        weights,
        bias,
        lambda: settings.lambda,
    })
}

/// Softmax of the linear scores; argmax with ties to the lowest label index.
pub fn lr_predict<S: Scalar>(
    model: &LinearModel<S>,
    x: &[S],
) -> Result<(AccountLabel, [f64; NUM_CLASSES]), BaselineError> {
    if x.len() != model.weights.cols {
        return Err(BaselineError::DimensionMismatch {
            expected: model.weights.cols,
            got: x.len(),
        });
    }
    let mut scores = model.weights.matvec(x);
    for (s, b) in scores.iter_mut().zip(&model.bias) {
        *s += *b;
    }
    let probs_s = softmax(&scores);
    let mut probs = [0.0; NUM_CLASSES];
    for (p, &v) in probs.iter_mut().zip(&probs_s) {
        *p = v.to_f64_lossy();
    }
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    Ok((AccountLabel::from_index(best), probs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Majority,
    Random,
    BowLr,
    LrTweet,
    LrTweetTopk,
    FactweetTweet,
    LrChunk,
}

impl BaselineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Majority => "majority",
            BaselineKind::Random => "random",
            BaselineKind::BowLr => "bow_lr",
            BaselineKind::LrTweet => "lr_tweet",
            BaselineKind::LrTweetTopk => "lr_tweet_topk",
            BaselineKind::FactweetTweet => "factweet_tweet",
            BaselineKind::LrChunk => "lr_chunk",
        }
    }

    pub fn parse(s: &str) -> Result<Self, BaselineError> {
        match s {
            "majority" => Ok(BaselineKind::Majority),
            "random" => Ok(BaselineKind::Random),
            "bow_lr" => Ok(BaselineKind::BowLr),
            "lr_tweet" => Ok(BaselineKind::LrTweet),
            "lr_tweet_topk" => Ok(BaselineKind::LrTweetTopk),
            "factweet_tweet" => Ok(BaselineKind::FactweetTweet),
            "lr_chunk" => Ok(BaselineKind::LrChunk),
            other => Err(BaselineError::UnknownKind(other.to_string())),
        }
    }
}

/// How tweet-level classifiers turn per-tweet predictions into an account
/// label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TweetAggregation {
    Majority,
    MeanProbability,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub chunk_size: usize,
    pub lr: LrSettings,
    pub min_document_frequency: usize,
    pub tweet_aggregation: TweetAggregation,
    pub topk_metric: EngagementMetric,
    pub topk_k: usize,
    pub seed: u64,
    /// Training setup for the single-tweet recurrent variant.
    pub seqnet: crate::seqnet::TrainConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            chunk_size: 20,
            lr: LrSettings::default(),
            min_document_frequency: 2,
            tweet_aggregation: TweetAggregation::Majority,
            topk_metric: EngagementMetric::Replies,
            topk_k: 500,
            seed: 0,
            seqnet: crate::seqnet::TrainConfig::default(),
        }
    }
}

/// Aggregate per-item (tweet or chunk) predictions to an account label.
pub fn aggregate_item_predictions(
    items: &[(AccountLabel, [f64; NUM_CLASSES])],
    mode: TweetAggregation,
) -> AccountLabel {
    match mode {
        TweetAggregation::Majority => {
            let preds: Vec<crate::seqnet::ChunkPrediction> = items
                .iter()
                .map(|&(label, probabilities)| crate::seqnet::ChunkPrediction {
                    probabilities,
                    predicted: label,
                })
                .collect();
            crate::seqnet::predict_account(&preds).expect("non-empty items")
        }
        TweetAggregation::MeanProbability => {
            let mut mean = [0.0; NUM_CLASSES];
            for (_, probs) in items {
                for (m, p) in mean.iter_mut().zip(probs) {
                    *m += p;
                }
            }
            let mut best = 0;
            for (i, &m) in mean.iter().enumerate() {
                if m > mean[best] {
                    best = i;
                }
            }
            AccountLabel::from_index(best)
        }
    }
}

use crate::eval::{
    featurize_accounts, fold_result, Confusion, EvalError, EvalReport, FoldPlan, RunMetadata,
};
use crate::features::{featurize_tweet, FeatureConfig};
use crate::lexicons::LexiconSet;
use crate::seqnet::{predict_account, train, ChunkPrediction, LabeledSequence, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct FoldSplit<'a> {
    train: Vec<&'a Account>,
    validation: Vec<&'a Account>,
    test: Vec<&'a Account>,
}

fn split_fold<'a>(accounts: &'a [Account], plan: &FoldPlan, fold: usize) -> FoldSplit<'a> {
    let mut split = FoldSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for acc in accounts {
        let assigned = plan.assignments[&acc.handle];
        if assigned == fold {
            split.test.push(acc);
        } else if plan.validation[fold].contains(&acc.handle) {
            split.validation.push(acc);
        } else {
            split.train.push(acc);
        }
    }
    split
}

fn majority_label(accounts: &[&Account]) -> AccountLabel {
    let mut counts = [0usize; NUM_CLASSES];
    for acc in accounts {
        counts[acc.label.index()] += 1;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    AccountLabel::from_index(best)
}

/// Featurize one account's tweets without regard to order.
fn tweet_feature_rows(
    account: &Account,
    lexset: &LexiconSet,
    cfg: &FeatureConfig,
) -> Vec<Vec<f64>> {
    account
        .tweets
        .iter()
        .map(|tw| featurize_tweet(tw, lexset, cfg).values)
        .collect()
}

fn lr_account_by_items(
    model: &LinearModel<f64>,
    items: &[Vec<f64>],
    mode: TweetAggregation,
) -> Result<AccountLabel, BaselineError> {
    let preds: Vec<(AccountLabel, [f64; NUM_CLASSES])> = items
        .iter()
        .map(|x| lr_predict(model, x))
        .collect::<Result<_, _>>()?;
    Ok(aggregate_item_predictions(&preds, mode))
}

/// Run one baseline over a fold plan, producing the shared report format.
pub fn run_baseline(
    kind: BaselineKind,
    accounts: &[Account],
    lexset: &LexiconSet,
    feature_cfg: &FeatureConfig,
    cfg: &BaselineConfig,
    plan: &FoldPlan,
) -> Result<EvalReport, EvalError> {
    let mut metadata = RunMetadata {
        seed: cfg.seed,
        ..RunMetadata::default()
    };
    metadata.notes.push(format!("baseline: {}", kind.as_str()));

    let mut folds = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let split = split_fold(accounts, plan, fold);
        let mut confusion: Confusion = [[0; NUM_CLASSES]; NUM_CLASSES];
        match kind {
            BaselineKind::Majority => {
                // validation accounts stay in the training pool for non-neural kinds
                let mut pool = split.train.clone();
                pool.extend(split.validation.iter().copied());
                let majority = majority_label(&pool);
                for acc in &split.test {
                    confusion[acc.label.index()][majority.index()] += 1;
                }
            }
            BaselineKind::Random => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(fold as u64));
                for acc in &split.test {
                    let pred = rng.gen_range(0..NUM_CLASSES);
                    confusion[acc.label.index()][pred] += 1;
                }
            }
            BaselineKind::BowLr => {
                let mut pool = split.train.clone();
                pool.extend(split.validation.iter().copied());
                let vocab = BowVocabulary::build(&pool, cfg.min_document_frequency);
                let x: Vec<Vec<f64>> =
                    pool.iter().map(|a| bow_vectorize(a, &vocab)).collect();
                let y: Vec<AccountLabel> = pool.iter().map(|a| a.label).collect();
                let model = lr_train(&x, &y, &cfg.lr)?;
                for acc in &split.test {
                    let (pred, _) = lr_predict(&model, &bow_vectorize(acc, &vocab))?;
                    confusion[acc.label.index()][pred.index()] += 1;
                }
            }
            BaselineKind::LrTweet | BaselineKind::LrTweetTopk => {
                let restrict = |acc: &Account| -> Account {
                    if kind == BaselineKind::LrTweetTopk {
                        Account {
                            handle: acc.handle.clone(),
                            label: acc.label,
                            tweets: crate::corpus::select_top_k(
                                acc,
                                cfg.topk_metric,
                                cfg.topk_k,
                            ),
                        }
                    } else {
                        acc.clone()
                    }
                };
                let mut x = Vec::new();
                let mut y = Vec::new();
                let mut pool = split.train.clone();
                pool.extend(split.validation.iter().copied());
                for acc in &pool {
                    let acc = restrict(acc);
                    for row in tweet_feature_rows(&acc, lexset, feature_cfg) {
                        x.push(row);
                        y.push(acc.label);
                    }
                }
                let model = lr_train(&x, &y, &cfg.lr)?;
                for acc in &split.test {
                    let acc = restrict(acc);
                    let rows = tweet_feature_rows(&acc, lexset, feature_cfg);
                    let pred = lr_account_by_items(&model, &rows, cfg.tweet_aggregation)?;
                    confusion[acc.label.index()][pred.index()] += 1;
                }
            }
            BaselineKind::LrChunk => {
                let featurized = featurize_accounts(accounts, lexset, feature_cfg);
                let by_handle: HashMap<&str, usize> = featurized
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (a.handle.as_str(), i))
                    .collect();
                let concat_chunks = |acc: &Account| -> Vec<Vec<f64>> {
                    let fa = &featurized[by_handle[acc.handle.as_str()]];
                    let (chunks, _) = fa.chunk_sequences(cfg.chunk_size);
                    chunks
                        .into_iter()
                        .map(|c| c.into_iter().flatten().collect())
                        .collect()
                };
                let mut x = Vec::new();
                let mut y = Vec::new();
                let mut pool = split.train.clone();
                pool.extend(split.validation.iter().copied());
                for acc in &pool {
                    for row in concat_chunks(acc) {
                        x.push(row);
                        y.push(acc.label);
                    }
                }
                let model = lr_train(&x, &y, &cfg.lr)?;
                for acc in &split.test {
                    let rows = concat_chunks(acc);
                    if rows.is_empty() {
                        if !metadata.excluded_accounts.contains(&acc.handle) {
                            metadata.excluded_accounts.push(acc.handle.clone());
                        }
                        continue;
                    }
                    let pred = lr_account_by_items(&model, &rows, TweetAggregation::Majority)?;
                    confusion[acc.label.index()][pred.index()] += 1;
                }
            }
            BaselineKind::FactweetTweet => {
                // each tweet is its own length-1 sequence
                let singletons = |acc: &Account| -> Vec<LabeledSequence<f64>> {
                    tweet_feature_rows(acc, lexset, feature_cfg)
                        .into_iter()
                        .map(|row| LabeledSequence {
                            features: vec![row],
                            label: acc.label,
                        })
                        .collect()
                };
                let train_chunks: Vec<LabeledSequence<f64>> =
                    split.train.iter().flat_map(|a| singletons(a)).collect();
                let val_chunks: Vec<LabeledSequence<f64>> = split
                    .validation
                    .iter()
                    .flat_map(|a| singletons(a))
                    .collect();
                let tcfg = crate::seqnet::TrainConfig {
                    seed: cfg.seed.wrapping_add(fold as u64),
                    ..cfg.seqnet.clone()
                };
                let out = train(&train_chunks, &tcfg, &val_chunks)
                    .map_err(EvalError::SeqNet)?;
                let model = Model::new(out.params, out.stats);
                for acc in &split.test {
                    let preds: Vec<ChunkPrediction> = singletons(acc)
                        .iter()
                        .map(|s| model.predict_sequence(&s.features))
                        .collect::<Result<_, _>>()
                        .map_err(EvalError::SeqNet)?;
                    let pred = predict_account(&preds).map_err(EvalError::SeqNet)?;
                    confusion[acc.label.index()][pred.index()] += 1;
                }
            }
        }
        folds.push(fold_result(fold, confusion));
    }
    metadata.excluded_accounts.sort();
    if matches!(kind, BaselineKind::LrChunk) {
        metadata.chunk_size = Some(cfg.chunk_size);
    }
    Ok(EvalReport::from_folds(folds, metadata))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tweet;

    fn account(handle: &str, label: AccountLabel, texts: &[&str]) -> Account {
        Account {
            handle: handle.into(),
            label,
            tweets: texts
                .iter()
                .enumerate()
                .map(|(i, t)| Tweet {
                    id: format!("{handle}-{i}"),
                    text: t.to_string(),
                    timestamp: i as i64,
                    reply_count: 0,
                    like_count: 0,
                    retweet_count: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn bow_counts_and_oov() {
        let a = account("a", AccountLabel::Real, &["a b", "a"]);
        let b = account("b", AccountLabel::Hoax, &["a b"]);
        let vocab = BowVocabulary::build(&[&a, &b], 2);
        assert_eq!(vocab.len(), 2);
        let v = bow_vectorize(&a, &vocab);
        assert_eq!(v, vec![2.0, 1.0]);

        let oov = account("c", AccountLabel::Real, &["zzz qqq"]);
        assert_eq!(bow_vectorize(&oov, &vocab), vec![0.0, 0.0]);
    }

    #[test]
    fn bow_invariant_to_tweet_order() {
        let a = account("a", AccountLabel::Real, &["x y", "y z"]);
        let b = account("b", AccountLabel::Real, &["y z", "x y"]);
        let c = account("c", AccountLabel::Hoax, &["x y z"]);
        let vocab = BowVocabulary::build(&[&a, &c], 1);
        assert_eq!(bow_vectorize(&a, &vocab), bow_vectorize(&b, &vocab));
    }

    fn separable_1d() -> (Vec<Vec<f64>>, Vec<AccountLabel>) {
        let x = vec![vec![-1.0], vec![-0.8], vec![1.0], vec![0.9]];
        let y = vec![
            AccountLabel::Propaganda,
            AccountLabel::Propaganda,
            AccountLabel::Clickbait,
            AccountLabel::Clickbait,
        ];
        (x, y)
    }

    #[test]
    fn lr_separable_reaches_full_accuracy() {
        let (x, y) = separable_1d();
        let settings = LrSettings {
            lambda: 0.0,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
        };
        let model = lr_train(&x, &y, &settings).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (pred, _) = lr_predict(&model, xi).unwrap();
            assert_eq!(pred, *yi);
        }
    }

    #[test]
    fn lr_large_lambda_shrinks_weights_to_prior() {
        let (x, mut y) = separable_1d();
        y[3] = AccountLabel::Propaganda; // majority: P
        let settings = LrSettings {
            lambda: 1e6,
            max_iterations: 2000,
            gradient_tolerance: 1e-9,
        };
        let model = lr_train(&x, &y, &settings).unwrap();
        assert!(model.weights.data.iter().all(|w| w.abs() < 1e-4));
        let (pred, _) = lr_predict(&model, &[5.0]).unwrap();
        assert_eq!(pred, AccountLabel::Propaganda);
    }

    #[test]
    fn lr_gradient_matches_finite_differences() {
        let (x, y) = separable_1d();
        let y_idx: Vec<usize> = y.iter().map(|l| l.index()).collect();
        let mut weights = Matrix::from_rows(&[
            vec![0.3],
            vec![-0.2],
            vec![0.1],
            vec![0.05],
        ]);
        let bias = vec![0.1, -0.1, 0.0, 0.2];
        let lambda = 0.5;
        let (_, gw, gb) = lr_loss_and_grad(&weights, &bias, &x, &y_idx, lambda);
        let step = 1e-6;
        for i in 0..weights.data.len() {
            let orig = weights.data[i];
            weights.data[i] = orig + step;
            let (lp, _, _) = lr_loss_and_grad(&weights, &bias, &x, &y_idx, lambda);
            weights.data[i] = orig - step;
            let (lm, _, _) = lr_loss_and_grad(&weights, &bias, &x, &y_idx, lambda);
            weights.data[i] = orig;
            let numeric = (lp - lm) / (2.0 * step);
            assert!((numeric - gw.data[i]).abs() < 1e-6, "weight {i}");
        }
        let mut bias = bias;
        for i in 0..bias.len() {
            let orig = bias[i];
            bias[i] = orig + step;
            let (lp, _, _) = lr_loss_and_grad(&weights, &bias, &x, &y_idx, lambda);
            bias[i] = orig - step;
            let (lm, _, _) = lr_loss_and_grad(&weights, &bias, &x, &y_idx, lambda);
            bias[i] = orig;
            let numeric = (lp - lm) / (2.0 * step);
            assert!((numeric - gb[i]).abs() < 1e-6, "bias {i}");
        }
    }

    #[test]
    fn lr_converges_to_small_gradient_with_regularization() {
        // all four classes present so the regularized optimum is finite
        let x = vec![
            vec![-1.0, -1.0],
            vec![-1.0, 1.0],
            vec![1.0, -1.0],
            vec![1.0, 1.0],
        ];
        let y = vec![
            AccountLabel::Propaganda,
            AccountLabel::Clickbait,
            AccountLabel::Hoax,
            AccountLabel::Real,
        ];
        let settings = LrSettings {
            lambda: 0.1,
            max_iterations: 5000,
            gradient_tolerance: 1e-6,
        };
        let model = lr_train(&x, &y, &settings).unwrap();
        let y_idx: Vec<usize> = y.iter().map(|l| l.index()).collect();
        let (_, gw, gb) = lr_loss_and_grad(
            &model.weights,
            &model.bias,
            &x,
            &y_idx,
            0.1,
        );
        let norm: f64 = (gw.data.iter().map(|g| g * g).sum::<f64>()
            + gb.iter().map(|g| g * g).sum::<f64>())
        .sqrt();
        assert!(norm <= 1e-6, "gradient norm {norm}");
    }

    #[test]
    fn lr_loss_non_increasing() {
        let (x, y) = separable_1d();
        let y_idx: Vec<usize> = y.iter().map(|l| l.index()).collect();
        let mut losses = Vec::new();
        for cap in [1usize, 5, 20, 100] {
            let settings = LrSettings {
                lambda: 0.01,
                max_iterations: cap,
                gradient_tolerance: 0.0,
            };
            let model = lr_train(&x, &y, &settings).unwrap();
            let (loss, _, _) = lr_loss_and_grad(&model.weights, &model.bias, &x, &y_idx, 0.01);
            losses.push(loss);
        }
        for pair in losses.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn lr_single_class_is_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        let y = vec![AccountLabel::Real, AccountLabel::Real];
        assert!(matches!(
            lr_train(&x, &y, &LrSettings::default()),
            Err(BaselineError::SingleClass)
        ));
    }

    #[test]
    fn lr_predict_zero_weights_uniform_and_hand_case() {
        let model = LinearModel {
            weights: Matrix::<f64>::zeros(4, 2),
            bias: vec![0.0; 4],
            lambda: 0.0,
        };
        let (label, probs) = lr_predict(&model, &[3.0, -1.0]).unwrap();
        assert_eq!(label, AccountLabel::Propaganda); // tie -> lowest index
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        for p in probs {
            assert!((p - 0.25).abs() < 1e-12);
        }

        // hand-set weights on a 2-D point
        let model = LinearModel {
            weights: Matrix::from_rows(&[
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![-1.0, 0.0],
                vec![0.0, -1.0],
            ]),
            bias: vec![0.0; 4],
            lambda: 0.0,
        };
        let x = [2.0, 1.0];
        let scores = [2.0f64, 1.0, -2.0, -1.0];
        let z: f64 = scores.iter().map(|s| s.exp()).sum();
        let (label, probs) = lr_predict(&model, &x).unwrap();
        assert_eq!(label, AccountLabel::Propaganda);
        for (p, s) in probs.iter().zip(&scores) {
            assert!((p - s.exp() / z).abs() < 1e-12);
        }

        assert!(matches!(
            lr_predict(&model, &[1.0]),
            Err(BaselineError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lr_argmax_invariant_under_constant_score_shift() {
        let base = LinearModel {
            weights: Matrix::from_rows(&[
                vec![0.5, -0.3],
                vec![0.1, 0.9],
                vec![-0.7, 0.2],
                vec![0.3, 0.3],
            ]),
            bias: vec![0.1, -0.2, 0.3, 0.0],
            lambda: 0.0,
        };
        let mut shifted = base.clone();
        for b in shifted.bias.iter_mut() {
            *b += 7.5;
        }
        for x in [[1.0, 2.0], [-1.0, 0.5], [0.0, 0.0]] {
            let (a, _) = lr_predict(&base, &x).unwrap();
            let (b, _) = lr_predict(&shifted, &x).unwrap();
            assert_eq!(a, b);
        }
    }
}
