//! Entropy-regularized training by full-batch gradient descent.
//!
//! Per utterance the loss is `-log P(y|x) + λ·H(π | x, y)`; the batch loss is
//! the mean. Arc-level gradients are `-γ_e + λ·∂H/∂θ_e`, pushed back through
//! the scorer one lattice state at a time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Params, SyntheticUtterance, ToyModel};
use crate::entropy::{alignment_entropy, entropy_and_grads};
use crate::error::{Error, Result};
use crate::lattice::{build_lattice, LatticeKind};

/// Regularization weight used when none is given.
pub const DEFAULT_LAMBDA: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub lambda: f64,
    pub steps: usize,
    pub step_size: f64,
    pub kind: LatticeKind,
    /// Worker threads for per-utterance work; 1 runs inline.
    pub jobs: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            lambda: DEFAULT_LAMBDA,
            steps: 1500,
            step_size: 0.1,
            kind: LatticeKind::FrameDependent,
            jobs: 1,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be finite and >= 0".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig("step_size must be finite and > 0".into()));
        }
        if self.jobs == 0 {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Batch means of the loss and its parts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BatchStats {
    pub loss: f64,
    pub neg_log_likelihood: f64,
    pub entropy: f64,
    pub normalized_entropy: f64,
    pub utterances: usize,
}

/// Statistics of the model in effect at the start of `step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub loss: f64,
    pub mean_entropy: f64,
    pub mean_normalized_entropy: f64,
}

/// Per-utterance alignment entropy under a model.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusEntropy {
    pub id: String,
    pub frames: usize,
    pub labels: usize,
    pub entropy: f64,
    pub max_entropy: f64,
    pub normalized_entropy: f64,
    pub log_likelihood: f64,
}

struct UttResult {
    nll: f64,
    entropy: f64,
    normalized_entropy: f64,
    grad: Params,
}

fn utterance_loss_grad(
    model: &ToyModel,
    utt: &SyntheticUtterance,
    lambda: f64,
    kind: LatticeKind,
) -> Result<UttResult> {
    let scorer = model.score_arcs(&utt.features, &utt.labels, kind)?;
    let lat = build_lattice(kind, utt.num_frames(), &utt.labels, &scorer)?;
    let g = entropy_and_grads(&lat)?;
    let arc_grads: Vec<f64> = g
        .d_log_likelihood
        .iter()
        .zip(&g.d_entropy)
        .map(|(p, h)| -p + lambda * h)
        .collect();
    let mut grad = Params::zeros(&model.config);
    scorer.backward(&lat, &arc_grads, &mut grad);
    let max_entropy = lat.log_num_paths();
    Ok(UttResult {
        nll: -g.log_likelihood,
        entropy: g.entropy,
        normalized_entropy: if max_entropy > 0.0 { g.entropy / max_entropy } else { 0.0 },
        grad,
    })
}

/// Runs `f` over `items` on `jobs` threads, keeping input order.
pub(crate) fn par_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    pool.install(|| items.par_iter().map(f).collect())
}

fn batch_loss_and_grad(
    model: &ToyModel,
    batch: &[SyntheticUtterance],
    lambda: f64,
    kind: LatticeKind,
    jobs: usize,
) -> Result<(f64, Params, BatchStats)> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig("lambda must be finite and >= 0".into()));
    }
    let mut grad = Params::zeros(&model.config);
    if batch.is_empty() {
        return Ok((0.0, grad, BatchStats::default()));
    }
    let results = par_map(batch, jobs, |u| utterance_loss_grad(model, u, lambda, kind))?;
    let n = batch.len() as f64;
    let mut stats = BatchStats {
        utterances: batch.len(),
        ..BatchStats::default()
    };
    // summed in input order so the result does not depend on scheduling
    for r in &results {
        stats.neg_log_likelihood += r.nll;
        stats.entropy += r.entropy;
        stats.normalized_entropy += r.normalized_entropy;
        grad.axpy(1.0, &r.grad);
    }
    grad.scale(1.0 / n);
    stats.neg_log_likelihood /= n;
    stats.entropy /= n;
    stats.normalized_entropy /= n;
    stats.loss = stats.neg_log_likelihood + lambda * stats.entropy;
    Ok((stats.loss, grad, stats))
}

/// Mean loss over `batch` and its gradient with respect to every parameter.
pub fn loss_and_grad(
    model: &ToyModel,
    batch: &[SyntheticUtterance],
    lambda: f64,
    kind: LatticeKind,
) -> Result<(f64, Params, BatchStats)> {
    batch_loss_and_grad(model, batch, lambda, kind, 1)
}

/// Plain gradient descent for `options.steps` full-batch steps. The curve
/// has a point per step plus a last one for the returned model.
pub fn train(
    model: &ToyModel,
    corpus: &[SyntheticUtterance],
    options: &TrainOptions,
) -> Result<(ToyModel, Vec<CurvePoint>)> {
    options.validate()?;
    let mut current = model.clone();
    if options.steps == 0 {
        return Ok((current, Vec::new()));
    }
    let mut curve = Vec::with_capacity(options.steps + 1);
    for step in 0..=options.steps {
        let (_, grad, stats) =
            batch_loss_and_grad(&current, corpus, options.lambda, options.kind, options.jobs)?;
        curve.push(CurvePoint {
            step,
            loss: stats.loss,
            mean_entropy: stats.entropy,
            mean_normalized_entropy: stats.normalized_entropy,
        });
        if step < options.steps {
            current.params.axpy(-options.step_size, &grad);
        }
    }
    Ok((current, curve))
}

/// Alignment entropy of every utterance, in corpus order.
pub fn corpus_entropy(
    model: &ToyModel,
    corpus: &[SyntheticUtterance],
    kind: LatticeKind,
    jobs: usize,
) -> Result<Vec<CorpusEntropy>> {
    par_map(corpus, jobs, |utt| {
        let scorer = model.score_arcs(&utt.features, &utt.labels, kind)?;
        let lat = build_lattice(kind, utt.num_frames(), &utt.labels, &scorer)?;
        let r = alignment_entropy(&lat)?;
        Ok(CorpusEntropy {
            id: utt.id.clone(),
            frames: utt.num_frames(),
            labels: utt.labels.len(),
            entropy: r.entropy,
            max_entropy: r.max_entropy,
            normalized_entropy: r.normalized_entropy,
            log_likelihood: r.log_likelihood,
        })
    })
}
