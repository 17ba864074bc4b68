//! A toy locally normalized scorer with HAT factorization and finite label context.
//!
//! At frame `t` with label context `ctx` (the last `c` emitted labels):
//!
//! ```text
//! z        = tanh(W_in · window(t) + E[ctx])
//! P(ε)     = σ(w_b · z + b_b)
//! P(ℓ)     = (1 - σ(w_b · z + b_b)) · softmax(W_l · z + b_l)_ℓ
//! ```
//!
//! `window(t)` stacks frames `t - left_context ..= t + right_context`, zero
//! outside the utterance. With `right_context = 0` the scorer only sees past
//! and present frames.

mod checkpoint;
mod corpus;
pub(crate) mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use corpus::{
    generate_corpus, read_corpus, write_corpus, CorpusConfig, Features, SyntheticUtterance,
};
pub use train::{
    corpus_entropy, loss_and_grad, train, BatchStats, CorpusEntropy, CurvePoint, TrainOptions,
    DEFAULT_LAMBDA,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{arc_frame, AlignmentPath, ArcScorer, Label, LatticeKind, LatticeState, Symbol};
use crate::numerics::LogProb;

/// Half-width of the uniform parameter initialization.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Number of labels, excluding blank.
    pub vocab_size: usize,
    /// Label context size `c`.
    pub context: usize,
    pub feature_dim: usize,
    pub hidden: usize,
    /// Past frames visible to the scorer.
    pub left_context: usize,
    /// Future frames visible to the scorer; 0 is the streaming analogue.
    pub right_context: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 2,
            context: 2,
            feature_dim: 8,
            hidden: 16,
            left_context: 1,
            right_context: 1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.vocab_size > 26 {
            return Err(Error::InvalidConfig("vocab_size must be in 1..=26".into()));
        }
        if self.feature_dim == 0 || self.hidden == 0 {
            return Err(Error::InvalidConfig("feature_dim and hidden must be positive".into()));
        }
        if self.context > 4 {
            return Err(Error::InvalidConfig("context larger than 4 is not supported".into()));
        }
        Ok(())
    }

    /// `(V+1)^c` context keys, the extra symbol being start-of-sequence padding.
    pub fn num_contexts(&self) -> usize {
        (self.vocab_size + 1).pow(self.context as u32)
    }

    pub fn input_dim(&self) -> usize {
        self.feature_dim * (1 + self.left_context + self.right_context)
    }

    /// Key of the all-padding context.
    pub fn initial_context(&self) -> usize {
        self.num_contexts() - 1
    }

    /// Context key after emitting `label` in context `key`.
    #[inline]
    pub fn next_context(&self, key: usize, label: Label) -> usize {
        if self.context == 0 {
            0
        } else {
            (key * (self.vocab_size + 1) + label as usize) % self.num_contexts()
        }
    }

    /// Context key after emitting `prefix` from the start.
    pub fn context_of(&self, prefix: &[Label]) -> usize {
        prefix
            .iter()
            .fold(self.initial_context(), |k, &l| self.next_context(k, l))
    }
}

/// Parameter blocks. Also used as the gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    /// `num_contexts × hidden`
    pub context_embedding: Vec<f64>,
    /// `input_dim × hidden`
    pub projection: Vec<f64>,
    /// `hidden`
    pub blank_weight: Vec<f64>,
    /// `1`
    pub blank_bias: Vec<f64>,
    /// `hidden × vocab_size`
    pub label_weight: Vec<f64>,
    /// `vocab_size`
    pub label_bias: Vec<f64>,
}

pub const BLOCK_NAMES: [&str; 6] = [
    "context_embedding",
    "projection",
    "blank_weight",
    "blank_bias",
    "label_weight",
    "label_bias",
];

impl Params {
    pub fn zeros(cfg: &ModelConfig) -> Params {
        let (h, v) = (cfg.hidden, cfg.vocab_size);
        Params {
            context_embedding: vec![0.0; cfg.num_contexts() * h],
            projection: vec![0.0; cfg.input_dim() * h],
            blank_weight: vec![0.0; h],
            blank_bias: vec![0.0; 1],
            label_weight: vec![0.0; h * v],
            label_bias: vec![0.0; v],
        }
    }

    /// `(rows, cols)` of each block, in [`BLOCK_NAMES`] order.
    pub fn shapes(cfg: &ModelConfig) -> [(usize, usize); 6] {
        let (h, v) = (cfg.hidden, cfg.vocab_size);
        [
            (cfg.num_contexts(), h),
            (cfg.input_dim(), h),
            (1, h),
            (1, 1),
            (h, v),
            (1, v),
        ]
    }

    pub fn blocks(&self) -> [&Vec<f64>; 6] {
        [
            &self.context_embedding,
            &self.projection,
            &self.blank_weight,
            &self.blank_bias,
            &self.label_weight,
            &self.label_bias,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.context_embedding,
            &mut self.projection,
            &mut self.blank_weight,
            &mut self.blank_bias,
            &mut self.label_weight,
            &mut self.label_bias,
        ]
    }

    pub fn len(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.blocks().into_iter().flat_map(|b| b.iter())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.blocks_mut().into_iter().flat_map(|b| b.iter_mut())
    }

    /// `self += scale * other`
    pub fn axpy(&mut self, scale: f64, other: &Params) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyModel {
    pub config: ModelConfig,
    pub params: Params,
}

/// Output distribution at one `(frame, context)` and the activations
/// needed to backpropagate through it.
#[derive(Clone, Debug)]
pub struct LocalDist {
    pub frame: usize,
    pub context: usize,
    hidden: Vec<f64>,
    /// `σ(blank logit)`
    blank_prob: f64,
    label_probs: Vec<f64>,
    pub log_blank: LogProb,
    /// `log(1 - P(ε)) + log softmax`, one entry per label.
    pub log_labels: Vec<LogProb>,
}

impl LocalDist {
    pub fn log_prob(&self, symbol: Symbol) -> LogProb {
        match symbol {
            Symbol::Blank => self.log_blank,
            Symbol::Label(l) => self.log_labels[l as usize],
        }
    }
}

/// `log σ(x)` without overflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ToyModel {
    /// Zero parameters: `P(ε) = 1/2` and uniform labels everywhere.
    pub fn zeros(config: ModelConfig) -> Result<ToyModel> {
        config.validate()?;
        Ok(ToyModel {
            params: Params::zeros(&config),
            config,
        })
    }

    /// Parameters uniform in `[-INIT_SCALE, INIT_SCALE]`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<ToyModel> {
        let mut model = ToyModel::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in model.params.values_mut() {
            *v = rng.random_range(-INIT_SCALE..=INIT_SCALE);
        }
        Ok(model)
    }

    fn check_features(&self, x: &Features) -> Result<()> {
        if x.dim() != self.config.feature_dim {
            return Err(Error::DimMismatch {
                what: "feature dimension",
                expected: self.config.feature_dim,
                found: x.dim(),
            });
        }
        Ok(())
    }

    /// Stacked input window for `frame`.
    pub fn input_window(&self, x: &Features, frame: usize) -> Vec<f64> {
        let d = self.config.feature_dim;
        let mut out = vec![0.0; self.config.input_dim()];
        let lc = self.config.left_context;
        for k in 0..=lc + self.config.right_context {
            let Some(f) = (frame + k).checked_sub(lc) else {
                continue;
            };
            if f < x.num_frames() {
                out[k * d..(k + 1) * d].copy_from_slice(x.frame(f));
            }
        }
        out
    }

    /// Output distribution at `frame` given label context `context`.
    pub fn local_dist(&self, x: &Features, frame: usize, context: usize) -> LocalDist {
        let cfg = &self.config;
        let p = &self.params;
        let (h, v) = (cfg.hidden, cfg.vocab_size);
        let input = self.input_window(x, frame);

        let mut hidden = p.context_embedding[context * h..(context + 1) * h].to_vec();
        for (i, &xi) in input.iter().enumerate() {
            if xi != 0.0 {
                let row = &p.projection[i * h..(i + 1) * h];
                for (z, w) in hidden.iter_mut().zip(row) {
                    *z += xi * w;
                }
            }
        }
        hidden.iter_mut().for_each(|z| *z = z.tanh());

        let blank_logit = p.blank_bias[0]
            + hidden.iter().zip(&p.blank_weight).map(|(z, w)| z * w).sum::<f64>();
        let mut logits = p.label_bias.clone();
        for (k, &z) in hidden.iter().enumerate() {
            let row = &p.label_weight[k * v..(k + 1) * v];
            for (s, w) in logits.iter_mut().zip(row) {
                *s += z * w;
            }
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + logits.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        let log_continue = log_sigmoid(-blank_logit);
        let log_labels: Vec<f64> = logits.iter().map(|s| log_continue + s - log_norm).collect();
        let label_probs = logits.iter().map(|s| (s - log_norm).exp()).collect();

        LocalDist {
            frame,
            context,
            hidden,
            blank_prob: sigmoid(blank_logit),
            label_probs,
            log_blank: log_sigmoid(blank_logit),
            log_labels,
        }
    }

    /// Accumulates into `grad` the gradient of `Σ_s g_s · log P(s)` at `dist`,
    /// where `g_blank` is the coefficient on `log P(ε)` and `g_labels[ℓ]` on `log P(ℓ)`.
    fn backward_local(
        &self,
        x: &Features,
        dist: &LocalDist,
        g_blank: f64,
        g_labels: &[f64],
        grad: &mut Params,
    ) {
        let cfg = &self.config;
        let p = &self.params;
        let (h, v) = (cfg.hidden, cfg.vocab_size);
        let g_label_total: f64 = g_labels.iter().sum();

        // d log σ(b)/db = 1 - σ(b); d log(1 - σ(b))/db = -σ(b)
        let g_b = g_blank * (1.0 - dist.blank_prob) - g_label_total * dist.blank_prob;
        // d log softmax_ℓ / d s_k = [k = ℓ] - softmax_k
        let g_s: Vec<f64> = (0..v)
            .map(|k| g_labels[k] - dist.label_probs[k] * g_label_total)
            .collect();

        grad.blank_bias[0] += g_b;
        let mut g_pre = vec![0.0; h];
        for k in 0..h {
            let z = dist.hidden[k];
            grad.blank_weight[k] += g_b * z;
            let row = &p.label_weight[k * v..(k + 1) * v];
            let grow = &mut grad.label_weight[k * v..(k + 1) * v];
            let mut g_z = g_b * p.blank_weight[k];
            for j in 0..v {
                grow[j] += g_s[j] * z;
                g_z += g_s[j] * row[j];
            }
            g_pre[k] = g_z * (1.0 - z * z);
        }
        for (b, g) in grad.label_bias.iter_mut().zip(&g_s) {
            *b += g;
        }
        let ctx = dist.context;
        for (e, g) in grad.context_embedding[ctx * h..(ctx + 1) * h].iter_mut().zip(&g_pre) {
            *e += g;
        }
        let input = self.input_window(x, dist.frame);
        for (i, &xi) in input.iter().enumerate() {
            if xi != 0.0 {
                let row = &mut grad.projection[i * h..(i + 1) * h];
                for (w, g) in row.iter_mut().zip(&g_pre) {
                    *w += xi * g;
                }
            }
        }
    }

    /// Arc scorer for the lattice of `kind` over `(x, y)`.
    pub fn score_arcs<'a>(
        &'a self,
        x: &'a Features,
        labels: &[Label],
        kind: LatticeKind,
    ) -> Result<UtteranceScorer<'a>> {
        self.check_features(x)?;
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= self.config.vocab_size) {
            return Err(Error::InvalidConfig(format!("label {bad} outside vocabulary")));
        }
        let t_max = x.num_frames();
        let u_max = labels.len();
        let mut contexts = Vec::with_capacity(u_max + 1);
        let mut key = self.config.initial_context();
        contexts.push(key);
        for &l in labels {
            key = self.config.next_context(key, l);
            contexts.push(key);
        }
        // one distribution per (t, u) grid cell that has outgoing arcs
        let rows = match kind {
            LatticeKind::LabelDependent => 1,
            _ => t_max + 1,
        };
        let mut cells = Vec::with_capacity(rows * (u_max + 1));
        for t in 0..rows {
            for (u, &ctx) in contexts.iter().enumerate() {
                let live = match kind {
                    LatticeKind::FrameDependent => t < t_max && u <= t && u_max - u <= t_max - t,
                    LatticeKind::LabelAndFrame => t_max > 0 && (t < t_max || u < u_max),
                    LatticeKind::LabelDependent => t_max > 0 && u < u_max,
                };
                cells.push(live.then(|| {
                    let frame = arc_frame(kind, t_max, LatticeState::new(t, u));
                    self.local_dist(x, frame, ctx)
                }));
            }
        }
        Ok(UtteranceScorer {
            model: self,
            features: x,
            kind,
            num_labels: u_max,
            cells,
        })
    }

    /// Joint log-probability `log P(y, π | x)` of an alignment path.
    pub fn path_log_prob(&self, x: &Features, path: &AlignmentPath) -> Result<LogProb> {
        self.check_features(x)?;
        let mut key = self.config.initial_context();
        let mut total = 0.0;
        for step in &path.steps {
            if step.frame >= x.num_frames() {
                return Err(Error::InvalidConfig(format!(
                    "path step at frame {} beyond {} frames",
                    step.frame,
                    x.num_frames()
                )));
            }
            total += self.local_dist(x, step.frame, key).log_prob(step.symbol);
            if let Symbol::Label(l) = step.symbol {
                key = self.config.next_context(key, l);
            }
        }
        Ok(total)
    }
}

/// Arc weights for one utterance, with cached activations for backpropagation.
pub struct UtteranceScorer<'a> {
    model: &'a ToyModel,
    features: &'a Features,
    kind: LatticeKind,
    num_labels: usize,
    cells: Vec<Option<LocalDist>>,
}

impl UtteranceScorer<'_> {
    fn cell(&self, s: LatticeState) -> &LocalDist {
        let t = if self.kind == LatticeKind::LabelDependent { 0 } else { s.t };
        self.cells[t * (self.num_labels + 1) + s.u]
            .as_ref()
            .expect("arc leaves a state without a distribution")
    }

    pub fn local_dist(&self, s: LatticeState) -> &LocalDist {
        self.cell(s)
    }

    /// Backpropagates per-arc loss gradients (`∂L/∂ log ω[e]`) into `grad`.
    pub(crate) fn backward(
        &self,
        lattice: &crate::lattice::Lattice,
        arc_grads: &[f64],
        grad: &mut Params,
    ) {
        let v = self.model.config.vocab_size;
        let mut g_labels = vec![0.0; v];
        for &s in lattice.states() {
            let range = lattice.arc_range(s);
            if range.is_empty() {
                continue;
            }
            let mut g_blank = 0.0;
            g_labels.iter_mut().for_each(|g| *g = 0.0);
            for i in range {
                match lattice.arcs()[i].symbol {
                    Symbol::Blank => g_blank += arc_grads[i],
                    Symbol::Label(l) => g_labels[l as usize] += arc_grads[i],
                }
            }
            self.model
                .backward_local(self.features, self.cell(s), g_blank, &g_labels, grad);
        }
    }
}

impl ArcScorer for UtteranceScorer<'_> {
    fn score(&self, src: LatticeState, symbol: Symbol) -> LogProb {
        self.cell(src).log_prob(symbol)
    }
}

/// Renders a label as a lowercase letter.
pub fn label_char(label: Label) -> char {
    char::from(b'a' + label as u8)
}

/// Inverse of [`label_char`].
pub fn char_label(c: char) -> Option<Label> {
    c.is_ascii_lowercase().then(|| (c as u8 - b'a') as Label)
}
