//! Recurrent attention classifier over chunked tweet sequences: LSTM encoder,
//! additive attention pooling, softmax head, hand-rolled backpropagation, and
//! account-level majority voting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AccountLabel, LABELS};
use crate::linalg::{axpy, dot, softmax, Matrix};
use crate::scalar::Scalar;

pub const NUM_CLASSES: usize = 4;

#[derive(Debug, Error)]
pub enum SeqNetError {
    #[error("non-finite value in input sequence")]
    NonFiniteInput,
    #[error("input has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training split contains {0} distinct class(es); need at least 2")]
    TooFewClasses(usize),
    #[error("non-finite loss at epoch {0}")]
    Diverged(usize),
    #[error("account has no chunks")]
    NoChunks,
    #[error("empty validation split")]
    EmptyValidation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Selu,
    Tanh,
}

const SELU_LAMBDA: f64 = 1.0507009873554805;
const SELU_ALPHA: f64 = 1.6732632423543772;

impl Activation {
    fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Relu => {
                if x > S::zero() {
                    x
                } else {
                    S::zero()
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Selu => {
                let lambda = S::from_f64_lossy(SELU_LAMBDA);
                let alpha = S::from_f64_lossy(SELU_ALPHA);
                if x > S::zero() {
                    lambda * x
                } else {
                    lambda * alpha * (x.exp() - S::one())
                }
            }
        }
    }

    fn derivative<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Relu => {
                if x > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                S::one() - t * t
            }
            Activation::Selu => {
                let lambda = S::from_f64_lossy(SELU_LAMBDA);
                let alpha = S::from_f64_lossy(SELU_ALPHA);
                if x > S::zero() {
                    lambda
                } else {
                    lambda * alpha * x.exp()
                }
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Selu => "selu",
            Activation::Tanh => "tanh",
        }
    }
}

/// All learnable parameters. LSTM gate rows are stacked [input, forget, cell,
/// output], each block of size `hidden`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqNetParams<S> {
    pub input_dim: usize,
    pub hidden: usize,
    pub w_x: Matrix<S>,
    pub w_h: Matrix<S>,
    pub b: Vec<S>,
    pub attn_w: Matrix<S>,
    pub attn_b: Vec<S>,
    pub attn_u: Vec<S>,
    pub head_w: Matrix<S>,
    pub head_b: Vec<S>,
    pub activation: Activation,
}

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

fn uniform_init<S: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<S> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| S::from_f64_lossy((rng.gen::<f64>() * 2.0 - 1.0) * limit))
        .collect();
    Matrix { rows, cols, data }
}

impl<S: Scalar> SeqNetParams<S> {
    /// Fan-balanced uniform initialization; forget-gate bias starts at +1.
    pub fn init(input_dim: usize, hidden: usize, activation: Activation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = vec![S::zero(); 4 * hidden];
        for v in b.iter_mut().skip(hidden).take(hidden) {
            *v = S::one();
        }
        SeqNetParams {
            input_dim,
            hidden,
            w_x: uniform_init(&mut rng, 4 * hidden, input_dim),
            w_h: uniform_init(&mut rng, 4 * hidden, hidden),
            b,
            attn_w: uniform_init(&mut rng, hidden, hidden),
            attn_b: vec![S::zero(); hidden],
            attn_u: uniform_init::<S>(&mut rng, 1, hidden).data,
            head_w: uniform_init(&mut rng, NUM_CLASSES, hidden),
            head_b: vec![S::zero(); NUM_CLASSES],
            activation,
        }
    }

    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.w_x.data);
        out.extend_from_slice(&self.w_h.data);
        out.extend_from_slice(&self.b);
        out.extend_from_slice(&self.attn_w.data);
        out.extend_from_slice(&self.attn_b);
        out.extend_from_slice(&self.attn_u);
        out.extend_from_slice(&self.head_w.data);
        out.extend_from_slice(&self.head_b);
        out
    }

    pub fn assign_flat(&mut self, flat: &[S]) {
        let mut off = 0;
        for part in [
            &mut self.w_x.data,
            &mut self.w_h.data,
            &mut self.b,
            &mut self.attn_w.data,
            &mut self.attn_b,
            &mut self.attn_u,
            &mut self.head_w.data,
            &mut self.head_b,
        ] {
            let len = part.len();
            part.copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        assert_eq!(off, flat.len());
    }
}

/// Gradients, same layout as the parameters.
#[derive(Debug, Clone)]
pub struct Gradients<S> {
    pub w_x: Matrix<S>,
    pub w_h: Matrix<S>,
    pub b: Vec<S>,
    pub attn_w: Matrix<S>,
    pub attn_b: Vec<S>,
    pub attn_u: Vec<S>,
    pub head_w: Matrix<S>,
    pub head_b: Vec<S>,
}

impl<S: Scalar> Gradients<S> {
    fn zeros(p: &SeqNetParams<S>) -> Self {
        Gradients {
            w_x: Matrix::zeros(4 * p.hidden, p.input_dim),
            w_h: Matrix::zeros(4 * p.hidden, p.hidden),
            b: vec![S::zero(); 4 * p.hidden],
            attn_w: Matrix::zeros(p.hidden, p.hidden),
            attn_b: vec![S::zero(); p.hidden],
            attn_u: vec![S::zero(); p.hidden],
            head_w: Matrix::zeros(NUM_CLASSES, p.hidden),
            head_b: vec![S::zero(); NUM_CLASSES],
        }
    }

    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.w_x.data);
        out.extend_from_slice(&self.w_h.data);
        out.extend_from_slice(&self.b);
        out.extend_from_slice(&self.attn_w.data);
        out.extend_from_slice(&self.attn_b);
        out.extend_from_slice(&self.attn_u);
        out.extend_from_slice(&self.head_w.data);
        out.extend_from_slice(&self.head_b);
        out
    }
}

/// Inverted-dropout masks for one sequence. Entries are 0 or 1/keep.
struct DropoutMasks<S> {
    input: Option<Vec<Vec<S>>>,
    attn: Option<Vec<Vec<S>>>,
}

impl<S: Scalar> DropoutMasks<S> {
    fn none() -> Self {
        DropoutMasks {
            input: None,
            attn: None,
        }
    }

    fn sample(rng: &mut ChaCha8Rng, rate: f64, t: usize, dim: usize, hidden: usize) -> Self {
        if rate <= 0.0 {
            return Self::none();
        }
        let keep = 1.0 - rate;
        let mut mask = |n: usize| -> Vec<Vec<S>> {
            (0..t)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            if rng.gen::<f64>() < keep {
                                S::from_f64_lossy(1.0 / keep)
                            } else {
                                S::zero()
                            }
                        })
                        .collect()
                })
                .collect()
        };
        DropoutMasks {
            input: Some(mask(dim)),
            attn: Some(mask(hidden)),
        }
    }
}

/// Everything the backward pass needs from one forward run.
struct ForwardCache<S> {
    /// inputs after dropout
    xs: Vec<Vec<S>>,
    gates: Vec<Vec<S>>, // 4H per step: i f g o post-nonlinearity
    cells: Vec<Vec<S>>,
    tanh_cells: Vec<Vec<S>>,
    hs: Vec<Vec<S>>,
    attn_inputs: Vec<Vec<S>>, // hidden states after attention dropout
    attn_pre: Vec<Vec<S>>,    // W_a h + b_a
    attn_act: Vec<Vec<S>>,
    alpha: Vec<S>,
    context: Vec<S>,
    probs: Vec<S>,
}

fn lstm_step<S: Scalar>(
    p: &SeqNetParams<S>,
    x: &[S],
    h_prev: &[S],
    c_prev: &[S],
) -> (Vec<S>, Vec<S>, Vec<S>) {
    let h = p.hidden;
    let mut z = p.w_x.matvec(x);
    let zh = p.w_h.matvec(h_prev);
    axpy(&mut z, &zh, S::one());
    axpy(&mut z, &p.b, S::one());
    let mut gates = vec![S::zero(); 4 * h];
    for k in 0..h {
        gates[k] = sigmoid(z[k]); // input
        gates[h + k] = sigmoid(z[h + k]); // forget
        gates[2 * h + k] = z[2 * h + k].tanh(); // cell candidate
        gates[3 * h + k] = sigmoid(z[3 * h + k]); // output
    }
    let mut c = vec![S::zero(); h];
    let mut h_new = vec![S::zero(); h];
    for k in 0..h {
        c[k] = gates[h + k] * c_prev[k] + gates[k] * gates[2 * h + k];
        h_new[k] = gates[3 * h + k] * c[k].tanh();
    }
    (gates, c, h_new)
}

fn forward_cached<S: Scalar>(
    p: &SeqNetParams<S>,
    seq: &[Vec<S>],
    masks: &DropoutMasks<S>,
) -> Result<ForwardCache<S>, SeqNetError> {
    let h = p.hidden;
    let t_len = seq.len();
    assert!(t_len >= 1, "sequence must be non-empty");
    for x in seq {
        if x.len() != p.input_dim {
            return Err(SeqNetError::DimensionMismatch {
                expected: p.input_dim,
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(SeqNetError::NonFiniteInput);
        }
    }

    let mut xs = Vec::with_capacity(t_len);
    for (t, x) in seq.iter().enumerate() {
        match &masks.input {
            Some(m) => xs.push(x.iter().zip(&m[t]).map(|(&v, &k)| v * k).collect()),
            None => xs.push(x.clone()),
        }
    }

    let mut gates = Vec::with_capacity(t_len);
    let mut cells = Vec::with_capacity(t_len);
    let mut tanh_cells = Vec::with_capacity(t_len);
    let mut hs = Vec::with_capacity(t_len);
    let mut h_prev = vec![S::zero(); h];
    let mut c_prev = vec![S::zero(); h];
    for x in &xs {
        let (g, c, h_new) = lstm_step(p, x, &h_prev, &c_prev);
        tanh_cells.push(c.iter().map(|v| v.tanh()).collect());
        gates.push(g);
        c_prev = c.clone();
        cells.push(c);
        h_prev = h_new.clone();
        hs.push(h_new);
    }

    let mut attn_inputs = Vec::with_capacity(t_len);
    for (t, hvec) in hs.iter().enumerate() {
        match &masks.attn {
            Some(m) => attn_inputs.push(hvec.iter().zip(&m[t]).map(|(&v, &k)| v * k).collect()),
            None => attn_inputs.push(hvec.clone()),
        }
    }

    let mut attn_pre = Vec::with_capacity(t_len);
    let mut attn_act = Vec::with_capacity(t_len);
    let mut scores = Vec::with_capacity(t_len);
    for a_in in &attn_inputs {
        let mut pre = p.attn_w.matvec(a_in);
        axpy(&mut pre, &p.attn_b, S::one());
        let act: Vec<S> = pre.iter().map(|&v| p.activation.apply(v)).collect();
        scores.push(dot(&p.attn_u, &act));
        attn_pre.push(pre);
        attn_act.push(act);
    }
    let alpha = softmax(&scores);
    let mut context = vec![S::zero(); h];
    for (a, hvec) in alpha.iter().zip(&hs) {
        axpy(&mut context, hvec, *a);
    }

    let mut logits = p.head_w.matvec(&context);
    axpy(&mut logits, &p.head_b, S::one());
    let probs = softmax(&logits);

    Ok(ForwardCache {
        xs,
        gates,
        cells,
        tanh_cells,
        hs,
        attn_inputs,
        attn_pre,
        attn_act,
        alpha,
        context,
        probs,
    })
}

/// Run the LSTM over a sequence and return all hidden states. Dropout applies
/// to the inputs only when `training` is set.
pub fn lstm_forward<S: Scalar>(
    params: &SeqNetParams<S>,
    seq: &[Vec<S>],
    dropout: f64,
    training: bool,
    rng_seed: u64,
) -> Result<Vec<Vec<S>>, SeqNetError> {
    let masks = if training {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        DropoutMasks::sample(&mut rng, dropout, seq.len(), params.input_dim, params.hidden)
    } else {
        DropoutMasks::none()
    };
    Ok(forward_cached(params, seq, &masks)?.hs)
}

/// Attention pooling: scores e_j = u . act(W_a h_j + b_a), weights softmax(e),
/// context the weighted mean of the states.
pub fn attention_pool<S: Scalar>(
    params: &SeqNetParams<S>,
    hs: &[Vec<S>],
) -> (Vec<S>, Vec<S>) {
    assert!(!hs.is_empty());
    let mut scores = Vec::with_capacity(hs.len());
    for hvec in hs {
        let mut pre = params.attn_w.matvec(hvec);
        axpy(&mut pre, &params.attn_b, S::one());
        let act: Vec<S> = pre.iter().map(|&v| params.activation.apply(v)).collect();
        scores.push(dot(&params.attn_u, &act));
    }
    let alpha = softmax(&scores);
    let mut context = vec![S::zero(); params.hidden];
    for (a, hvec) in alpha.iter().zip(hs) {
        axpy(&mut context, hvec, *a);
    }
    (context, alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkPrediction {
    pub probabilities: [f64; NUM_CLASSES],
    pub predicted: AccountLabel,
}

/// Inference on one standardized chunk feature sequence. Deterministic: no
/// dropout outside training.
pub fn predict_chunk<S: Scalar>(
    params: &SeqNetParams<S>,
    chunk_features: &[Vec<S>],
) -> Result<ChunkPrediction, SeqNetError> {
    let cache = forward_cached(params, chunk_features, &DropoutMasks::none())?;
    let mut probabilities = [0.0; NUM_CLASSES];
    for (p, &v) in probabilities.iter_mut().zip(&cache.probs) {
        *p = v.to_f64_lossy();
    }
    let predicted = argmax_label(&probabilities);
    Ok(ChunkPrediction {
        probabilities,
        predicted,
    })
}

fn argmax_label(probs: &[f64; NUM_CLASSES]) -> AccountLabel {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    AccountLabel::from_index(best)
}

/// One labeled chunk feature sequence.
#[derive(Debug, Clone)]
pub struct LabeledSequence<S> {
    pub features: Vec<Vec<S>>,
    pub label: AccountLabel,
}

/// Mean cross-entropy loss and exact gradients over a batch of sequences.
/// `class_weights` scales each example's loss by its class weight.
pub fn loss_and_gradients<S: Scalar>(
    params: &SeqNetParams<S>,
    batch: &[&LabeledSequence<S>],
    dropout: f64,
    training: bool,
    rng: Option<&mut ChaCha8Rng>,
    class_weights: Option<&[S; NUM_CLASSES]>,
) -> Result<(S, Gradients<S>), SeqNetError> {
    assert!(!batch.is_empty());
    let mut grads = Gradients::zeros(params);
    let mut total = S::zero();
    let scale = S::one() / S::from_f64_lossy(batch.len() as f64);
    let mut local_rng;
    let rng = match rng {
        Some(r) => r,
        None => {
            local_rng = ChaCha8Rng::seed_from_u64(0);
            &mut local_rng
        }
    };

    for seq in batch {
        let masks = if training && dropout > 0.0 {
            DropoutMasks::sample(
                rng,
                dropout,
                seq.features.len(),
                params.input_dim,
                params.hidden,
            )
        } else {
            DropoutMasks::none()
        };
        let cache = forward_cached(params, &seq.features, &masks)?;
        let y = seq.label.index();
        let weight = class_weights.map_or(S::one(), |w| w[y]) * scale;
        let eps = S::from_f64_lossy(1e-300);
        total += -(cache.probs[y] + eps).ln() * weight;
        backward(params, &cache, &masks, y, weight, &mut grads);
    }
    Ok((total, grads))
}

fn backward<S: Scalar>(
    p: &SeqNetParams<S>,
    cache: &ForwardCache<S>,
    masks: &DropoutMasks<S>,
    label: usize,
    weight: S,
    grads: &mut Gradients<S>,
) {
    let h = p.hidden;
    let t_len = cache.hs.len();

    // softmax + cross entropy
    let mut dlogits: Vec<S> = cache.probs.clone();
    dlogits[label] -= S::one();
    for v in dlogits.iter_mut() {
        *v *= weight;
    }
    grads.head_w.add_outer(&dlogits, &cache.context, S::one());
    axpy(&mut grads.head_b, &dlogits, S::one());
    let dcontext = p.head_w.matvec_t(&dlogits);

    // attention
    let mut dh: Vec<Vec<S>> = vec![vec![S::zero(); h]; t_len];
    let mut dalpha = vec![S::zero(); t_len];
    for j in 0..t_len {
        dalpha[j] = dot(&dcontext, &cache.hs[j]);
        axpy(&mut dh[j], &dcontext, cache.alpha[j]);
    }
    let weighted: S = cache
        .alpha
        .iter()
        .zip(&dalpha)
        .map(|(&a, &d)| a * d)
        .sum();
    for j in 0..t_len {
        let de = cache.alpha[j] * (dalpha[j] - weighted);
        // du and the projection path
        axpy(&mut grads.attn_u, &cache.attn_act[j], de);
        let dpre: Vec<S> = p
            .attn_u
            .iter()
            .zip(&cache.attn_pre[j])
            .map(|(&u, &pre)| de * u * p.activation.derivative(pre))
            .collect();
        grads.attn_w.add_outer(&dpre, &cache.attn_inputs[j], S::one());
        axpy(&mut grads.attn_b, &dpre, S::one());
        let dh_proj = p.attn_w.matvec_t(&dpre);
        match &masks.attn {
            Some(m) => {
                for k in 0..h {
                    dh[j][k] += dh_proj[k] * m[j][k];
                }
            }
            None => axpy(&mut dh[j], &dh_proj, S::one()),
        }
    }

    // backpropagation through time
    let mut dc_next = vec![S::zero(); h];
    let mut dh_next = vec![S::zero(); h];
    for t in (0..t_len).rev() {
        let gates = &cache.gates[t];
        let tc = &cache.tanh_cells[t];
        let mut dz = vec![S::zero(); 4 * h];
        for k in 0..h {
            let dh_total = dh[t][k] + dh_next[k];
            let i_g = gates[k];
            let f_g = gates[h + k];
            let g_g = gates[2 * h + k];
            let o_g = gates[3 * h + k];
            let dc = dh_total * o_g * (S::one() - tc[k] * tc[k]) + dc_next[k];
            let c_prev = if t == 0 { S::zero() } else { cache.cells[t - 1][k] };
            dz[k] = dc * g_g * i_g * (S::one() - i_g);
            dz[h + k] = dc * c_prev * f_g * (S::one() - f_g);
            dz[2 * h + k] = dc * i_g * (S::one() - g_g * g_g);
            dz[3 * h + k] = dh_total * tc[k] * o_g * (S::one() - o_g);
            dc_next[k] = dc * f_g;
        }
        grads.w_x.add_outer(&dz, &cache.xs[t], S::one());
        if t > 0 {
            grads.w_h.add_outer(&dz, &cache.hs[t - 1], S::one());
        }
        axpy(&mut grads.b, &dz, S::one());
        dh_next = p.w_h.matvec_t(&dz);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
    Rmsprop,
}

impl Optimizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
            Optimizer::Rmsprop => "rmsprop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub activation: Activation,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub patience: usize,
    /// Inverse-frequency class weights in the loss.
    pub class_weights: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 32,
            activation: Activation::Tanh,
            optimizer: Optimizer::Adam,
            learning_rate: 1e-2,
            dropout_rate: 0.0,
            batch_size: 8,
            epochs: 30,
            seed: 0,
            patience: 5,
            class_weights: false,
        }
    }
}

/// Per-feature z-score statistics fitted on training tweets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl Standardizer {
    pub fn fit<S: Scalar>(sequences: &[LabeledSequence<S>]) -> Standardizer {
        let dim = sequences
            .first()
            .and_then(|s| s.features.first())
            .map_or(0, |v| v.len());
        let mut mean = vec![0.0; dim];
        let mut count = 0usize;
        for seq in sequences {
            for x in &seq.features {
                for (m, v) in mean.iter_mut().zip(x) {
                    *m += v.to_f64_lossy();
                }
                count += 1;
            }
        }
        let n = count.max(1) as f64;
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for seq in sequences {
            for x in &seq.features {
                for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                    let d = v.to_f64_lossy() - m;
                    *s += d * d;
                }
            }
        }
        let std = var
            .into_iter()
            .map(|v| (v / n).sqrt().max(STD_FLOOR))
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                (v - S::from_f64_lossy(self.mean[i])) / S::from_f64_lossy(self.std[i])
            })
            .collect()
    }

    pub fn apply_sequence<S: Scalar>(&self, seq: &[Vec<S>]) -> Vec<Vec<S>> {
        seq.iter().map(|x| self.apply(x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_macro_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    pub params: SeqNetParams<S>,
    pub history: Vec<EpochStats>,
    pub stats: Standardizer,
}

struct OptimizerState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
}

fn apply_update<S: Scalar>(
    opt: Optimizer,
    lr: f64,
    flat: &mut [S],
    grad: &[S],
    state: &mut OptimizerState,
) {
    match opt {
        Optimizer::Sgd => {
            for (p, g) in flat.iter_mut().zip(grad) {
                *p = *p - S::from_f64_lossy(lr) * *g;
            }
        }
        Optimizer::Adam => {
            let (b1, b2, eps) = (0.9, 0.999, 1e-8);
            state.step += 1;
            let t = state.step as i32;
            for i in 0..flat.len() {
                let g = grad[i].to_f64_lossy();
                state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
                state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
                let m_hat = state.m[i] / (1.0 - b1.powi(t));
                let v_hat = state.v[i] / (1.0 - b2.powi(t));
                let upd = lr * m_hat / (v_hat.sqrt() + eps);
                flat[i] = flat[i] - S::from_f64_lossy(upd);
            }
        }
        Optimizer::Rmsprop => {
            let (rho, eps) = (0.9, 1e-8);
            for i in 0..flat.len() {
                let g = grad[i].to_f64_lossy();
                state.v[i] = rho * state.v[i] + (1.0 - rho) * g * g;
                let upd = lr * g / (state.v[i].sqrt() + eps);
                flat[i] = flat[i] - S::from_f64_lossy(upd);
            }
        }
    }
}

fn inverse_frequency_weights<S: Scalar>(
    sequences: &[LabeledSequence<S>],
) -> [S; NUM_CLASSES] {
    let mut counts = [0usize; NUM_CLASSES];
    for s in sequences {
        counts[s.label.index()] += 1;
    }
    let total = sequences.len() as f64;
    let mut w = [S::one(); NUM_CLASSES];
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            w[i] = S::from_f64_lossy(total / (NUM_CLASSES as f64 * c as f64));
        }
    }
    w
}

fn mean_loss<S: Scalar>(
    params: &SeqNetParams<S>,
    sequences: &[LabeledSequence<S>],
    class_weights: Option<&[S; NUM_CLASSES]>,
) -> Result<f64, SeqNetError> {
    if sequences.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for seq in sequences {
        let cache = forward_cached(params, &seq.features, &DropoutMasks::none())?;
        let y = seq.label.index();
        let w = class_weights.map_or(1.0, |w| w[y].to_f64_lossy());
        total += -(cache.probs[y].to_f64_lossy().max(1e-300)).ln() * w;
    }
    Ok(total / sequences.len() as f64)
}

fn chunk_macro_f1<S: Scalar>(
    params: &SeqNetParams<S>,
    sequences: &[LabeledSequence<S>],
) -> Result<f64, SeqNetError> {
    let mut confusion = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for seq in sequences {
        let pred = predict_chunk(params, &seq.features)?;
        confusion[seq.label.index()][pred.predicted.index()] += 1;
    }
    Ok(crate::eval::macro_f1_from_counts(&confusion))
}

/// Train on standardized-internally chunk sequences. Standardization stats
/// are fitted on the training split and applied to both splits. Early stopping
/// watches validation macro-F1 at chunk level.
pub fn train<S: Scalar>(
    chunks: &[LabeledSequence<S>],
    cfg: &TrainConfig,
    val_chunks: &[LabeledSequence<S>],
) -> Result<TrainOutcome<S>, SeqNetError> {
    let distinct = {
        let mut seen = [false; NUM_CLASSES];
        for c in chunks {
            seen[c.label.index()] = true;
        }
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(SeqNetError::TooFewClasses(distinct));
    }
    let input_dim = chunks[0].features[0].len();

    let stats = Standardizer::fit(chunks);
    let standardize = |seqs: &[LabeledSequence<S>]| -> Vec<LabeledSequence<S>> {
        seqs.iter()
            .map(|s| LabeledSequence {
                features: stats.apply_sequence(&s.features),
                label: s.label,
            })
            .collect()
    };
    let train_set = standardize(chunks);
    let val_set = standardize(val_chunks);

    let mut params = SeqNetParams::<S>::init(input_dim, cfg.hidden, cfg.activation, cfg.seed);
    let weights = cfg.class_weights.then(|| inverse_frequency_weights(&train_set));

    let n_params = params.flatten().len();
    let mut opt_state = OptimizerState {
        m: vec![0.0; n_params],
        v: vec![0.0; n_params],
        step: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut history = Vec::new();
    let mut best: Option<(f64, SeqNetParams<S>)> = None;
    let mut since_best = 0usize;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        // Fisher-Yates with our seeded rng keeps runs bit-reproducible
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for batch_idx in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<&LabeledSequence<S>> =
                batch_idx.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = loss_and_gradients(
                &params,
                &batch,
                cfg.dropout_rate,
                true,
                Some(&mut rng),
                weights.as_ref(),
            )?;
            if !loss.is_finite() {
                return Err(SeqNetError::Diverged(epoch));
            }
            let mut flat = params.flatten();
            apply_update(
                cfg.optimizer,
                cfg.learning_rate,
                &mut flat,
                &grads.flatten(),
                &mut opt_state,
            );
            params.assign_flat(&flat);
        }

        let train_loss = mean_loss(&params, &train_set, weights.as_ref())?;
        if !train_loss.is_finite() {
            return Err(SeqNetError::Diverged(epoch));
        }
        let val_loss = mean_loss(&params, &val_set, weights.as_ref())?;
        let val_f1 = if val_set.is_empty() {
            0.0
        } else {
            chunk_macro_f1(&params, &val_set)?
        };
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_macro_f1: val_f1,
        });

        if !val_set.is_empty() {
            let improved = best.as_ref().map_or(true, |(b, _)| val_f1 > *b);
            if improved {
                best = Some((val_f1, params.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best > cfg.patience {
                    break;
                }
            }
        }
    }
    if let Some((_, best_params)) = best {
        params = best_params;
    }
    Ok(TrainOutcome {
        params,
        history,
        stats,
    })
}

/// Majority vote over chunk predictions; ties go to the class with the highest
/// mean probability, then the lowest label index.
pub fn predict_account(
    predictions: &[ChunkPrediction],
) -> Result<AccountLabel, SeqNetError> {
    if predictions.is_empty() {
        return Err(SeqNetError::NoChunks);
    }
    let mut votes = [0usize; NUM_CLASSES];
    let mut mean_prob = [0.0f64; NUM_CLASSES];
    for p in predictions {
        votes[p.predicted.index()] += 1;
        for (m, &pr) in mean_prob.iter_mut().zip(&p.probabilities) {
            *m += pr;
        }
    }
    for m in &mut mean_prob {
        *m /= predictions.len() as f64;
    }
    let max_votes = *votes.iter().max().unwrap();
    let mut winner = None;
    for i in 0..NUM_CLASSES {
        if votes[i] == max_votes {
            let better = match winner {
                None => true,
                Some(w) => mean_prob[i] > mean_prob[w],
            };
            if better {
                winner = Some(i);
            }
        }
    }
    Ok(AccountLabel::from_index(winner.unwrap()))
}

/// Trained model plus everything inference needs, serializable as a
/// self-describing checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model<S> {
    pub version: u32,
    pub params: SeqNetParams<S>,
    pub stats: Standardizer,
    pub labels: Vec<String>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl<S: Scalar + Serialize + for<'de> Deserialize<'de>> Model<S> {
    pub fn new(params: SeqNetParams<S>, stats: Standardizer) -> Self {
        Model {
            version: CHECKPOINT_VERSION,
            params,
            stats,
            labels: LABELS.iter().map(|l| l.as_str().to_string()).collect(),
        }
    }

    /// Standardize and classify one raw chunk feature sequence.
    pub fn predict_sequence(&self, seq: &[Vec<S>]) -> Result<ChunkPrediction, SeqNetError> {
        predict_chunk(&self.params, &self.stats.apply_sequence(seq))
    }

    /// Majority vote over an account's chunks, returning the account label and
    /// the per-chunk predictions.
    pub fn predict_account_chunks(
        &self,
        chunks: &[Vec<Vec<S>>],
    ) -> Result<(AccountLabel, Vec<ChunkPrediction>), SeqNetError> {
        let preds: Vec<ChunkPrediction> = chunks
            .iter()
            .map(|c| self.predict_sequence(c))
            .collect::<Result<_, _>>()?;
        let label = predict_account(&preds)?;
        Ok((label, preds))
    }
}

/// One account's featurized chunk sequences, ready for training or scoring.
#[derive(Debug, Clone)]
pub struct AccountSequences<S> {
    pub handle: String,
    pub label: AccountLabel,
    pub sequences: Vec<Vec<Vec<S>>>,
}

/// The hyperparameter grid searched by `hyper_search`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub hidden: Vec<usize>,
    pub dropout_range: (f64, f64),
    pub activations: Vec<Activation>,
    pub optimizers: Vec<Optimizer>,
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub epochs: usize,
    pub patience: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            hidden: vec![16, 32, 64],
            dropout_range: (0.0, 0.9),
            activations: vec![Activation::Relu, Activation::Selu, Activation::Tanh],
            optimizers: vec![Optimizer::Sgd, Optimizer::Adam, Optimizer::Rmsprop],
            learning_rates: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            batch_sizes: vec![4, 8, 16],
            epochs: 30,
            patience: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: TrainConfig,
    pub val_macro_f1: f64,
}

#[derive(Debug)]
pub struct SearchOutcome<S> {
    pub best_config: TrainConfig,
    pub best_outcome: TrainOutcome<S>,
    pub trials: Vec<TrialRecord>,
}

fn account_macro_f1<S: Scalar + Serialize + for<'de> Deserialize<'de>>(
    model: &Model<S>,
    accounts: &[AccountSequences<S>],
) -> Result<f64, SeqNetError> {
    let mut confusion = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for acc in accounts {
        let (pred, _) = model.predict_account_chunks(&acc.sequences)?;
        confusion[acc.label.index()][pred.index()] += 1;
    }
    Ok(crate::eval::macro_f1_from_counts(&confusion))
}

/// Random search over the hyperparameter grid, selecting by account-level
/// validation macro-F1. Ties keep the earlier trial.
pub fn hyper_search<S: Scalar + Serialize + for<'de> Deserialize<'de>>(
    space: &SearchSpace,
    budget: usize,
    train_accounts: &[AccountSequences<S>],
    val_accounts: &[AccountSequences<S>],
    seed: u64,
) -> Result<SearchOutcome<S>, SeqNetError> {
    assert!(budget >= 1);
    if val_accounts.is_empty() {
        return Err(SeqNetError::EmptyValidation);
    }
    let train_chunks: Vec<LabeledSequence<S>> = train_accounts
        .iter()
        .flat_map(|a| {
            a.sequences.iter().map(|s| LabeledSequence {
                features: s.clone(),
                label: a.label,
            })
        })
        .collect();
    let val_chunks: Vec<LabeledSequence<S>> = val_accounts
        .iter()
        .flat_map(|a| {
            a.sequences.iter().map(|s| LabeledSequence {
                features: s.clone(),
                label: a.label,
            })
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::new();
    let mut best: Option<(f64, TrainConfig, TrainOutcome<S>)> = None;
    for trial in 0..budget {
        let cfg = TrainConfig {
            hidden: space.hidden[rng.gen_range(0..space.hidden.len())],
            activation: space.activations[rng.gen_range(0..space.activations.len())],
            optimizer: space.optimizers[rng.gen_range(0..space.optimizers.len())],
            learning_rate: space.learning_rates[rng.gen_range(0..space.learning_rates.len())],
            dropout_rate: rng.gen_range(space.dropout_range.0..=space.dropout_range.1),
            batch_size: space.batch_sizes[rng.gen_range(0..space.batch_sizes.len())],
            epochs: space.epochs,
            seed: rng.gen::<u64>(),
            patience: space.patience,
            class_weights: false,
        };
        let outcome = train(&train_chunks, &cfg, &val_chunks)?;
        let model = Model::new(outcome.params.clone(), outcome.stats.clone());
        let f1 = account_macro_f1(&model, val_accounts)?;
        trials.push(TrialRecord {
            trial,
            config: cfg.clone(),
            val_macro_f1: f1,
        });
        let improved = best.as_ref().map_or(true, |(b, _, _)| f1 > *b);
        if improved {
            best = Some((f1, cfg, outcome));
        }
    }
    let (_, best_config, best_outcome) = best.unwrap();
    Ok(SearchOutcome {
        best_config,
        best_outcome,
        trials,
    })
}
