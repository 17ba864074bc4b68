//! Sum-search and max-search decoding.
//!
//! * [`max_search`] finds the single best joint `(y, π)` by Viterbi over
//!   `(frame, label context)` states, adding a label count to the state when
//!   a label cap is active or the lattice allows several labels per frame.
//! * [`sum_search`] runs a frame-synchronous beam over full label prefixes,
//!   merging every alignment of the same prefix by log-addition, then
//!   recovers the best alignment of the winning prefix with
//!   [`constrained_best_path`].
//!
//! Ties are broken deterministically: blank before labels, lower label ids
//! first, lexicographically smaller prefixes first.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{build_lattice, Label, LatticeKind, PathStep, Symbol};
use crate::model::{Features, ToyModel};
use crate::numerics::{logprob_add, LogProb, LOG_ZERO};

pub use crate::lattice::AlignmentPath;

/// Default sum-search beam.
pub const DEFAULT_BEAM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeRule {
    Max,
    Sum,
}

impl DecodeRule {
    pub fn name(self) -> &'static str {
        match self {
            DecodeRule::Max => "max",
            DecodeRule::Sum => "sum",
        }
    }
}

impl fmt::Display for DecodeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecodeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(DecodeRule::Max),
            "sum" => Ok(DecodeRule::Sum),
            _ => Err(Error::InvalidConfig(format!("unknown decode rule `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub labels: Vec<Label>,
    pub path: AlignmentPath,
    /// Joint `log P(y, π)` for max-search; merged `log P(y)` over the kept
    /// alignments for sum-search.
    pub score: LogProb,
    /// Joint `log P(y, π)` of [`path`](Self::path).
    pub path_score: LogProb,
    pub rule: DecodeRule,
    /// Beam width for sum-search.
    pub beam: Option<usize>,
}

/// Cached `[log P(ε), log P(ℓ)...]` per `(frame, context)`.
struct LocalCache<'a> {
    model: &'a ToyModel,
    x: &'a Features,
    contexts: usize,
    cells: Vec<Option<Vec<LogProb>>>,
}

impl<'a> LocalCache<'a> {
    fn new(model: &'a ToyModel, x: &'a Features) -> Self {
        let contexts = model.config.num_contexts();
        LocalCache {
            model,
            x,
            contexts,
            cells: vec![None; x.num_frames() * contexts],
        }
    }

    fn get(&mut self, frame: usize, ctx: usize) -> &[LogProb] {
        let (model, x) = (self.model, self.x);
        self.cells[frame * self.contexts + ctx].get_or_insert_with(|| {
            let d = model.local_dist(x, frame, ctx);
            std::iter::once(d.log_blank).chain(d.log_labels).collect()
        })
    }
}

fn check_input(model: &ToyModel, x: &Features, kind: LatticeKind) -> Result<()> {
    if x.dim() != model.config.feature_dim {
        return Err(Error::DimMismatch {
            what: "feature dimension",
            expected: model.config.feature_dim,
            found: x.dim(),
        });
    }
    if kind == LatticeKind::LabelDependent {
        return Err(Error::InvalidConfig(
            "decoding needs a lattice with a frame axis".into(),
        ));
    }
    Ok(())
}

fn empty_result(rule: DecodeRule, beam: Option<usize>) -> DecodeResult {
    DecodeResult {
        labels: Vec::new(),
        path: AlignmentPath::default(),
        score: 0.0,
        path_score: 0.0,
        rule,
        beam,
    }
}

#[derive(Clone, Copy, Debug)]
struct BackPtr {
    layer: usize,
    level: usize,
    ctx: usize,
    symbol: Symbol,
}

impl BackPtr {
    /// Tie order: blank, then lower labels, then lower predecessor state.
    fn tie_key(&self) -> (u32, usize, usize) {
        let rank = match self.symbol {
            Symbol::Blank => 0,
            Symbol::Label(l) => l + 1,
        };
        (rank, self.level, self.ctx)
    }
}

struct Trellis {
    levels: usize,
    contexts: usize,
    score: Vec<LogProb>,
    back: Vec<Option<BackPtr>>,
}

impl Trellis {
    fn new(layers: usize, levels: usize, contexts: usize) -> Self {
        let n = layers * levels * contexts;
        Trellis {
            levels,
            contexts,
            score: vec![LOG_ZERO; n],
            back: vec![None; n],
        }
    }

    fn idx(&self, layer: usize, level: usize, ctx: usize) -> usize {
        (layer * self.levels + level) * self.contexts + ctx
    }

    fn relax(&mut self, layer: usize, level: usize, ctx: usize, cand: LogProb, from: BackPtr) {
        let i = self.idx(layer, level, ctx);
        let take = match &self.back[i] {
            None => cand > LOG_ZERO,
            Some(cur) => {
                cand > self.score[i] || (cand == self.score[i] && from.tie_key() < cur.tie_key())
            }
        };
        if take {
            self.score[i] = cand;
            self.back[i] = Some(from);
        }
    }
}

/// Exact joint Viterbi `argmax_{y, π} log P(y, π | x)` with at most
/// `max_labels` labels (default: the number of frames).
pub fn max_search(
    model: &ToyModel,
    x: &Features,
    kind: LatticeKind,
    max_labels: Option<usize>,
) -> Result<DecodeResult> {
    check_input(model, x, kind)?;
    let t_max = x.num_frames();
    if t_max == 0 {
        return Ok(empty_result(DecodeRule::Max, None));
    }
    let cfg = &model.config;
    let cap = max_labels.unwrap_or(t_max);
    let track = kind == LatticeKind::LabelAndFrame || cap < t_max;
    let levels = if track { cap + 1 } else { 1 };
    let contexts = cfg.num_contexts();
    let mut cache = LocalCache::new(model, x);
    let mut tr = Trellis::new(t_max + 1, levels, contexts);
    let start = tr.idx(0, 0, cfg.initial_context());
    tr.score[start] = 0.0;

    for t in 0..=t_max {
        let frame = t.min(t_max - 1);
        for level in 0..levels {
            for ctx in 0..contexts {
                let here = tr.score[tr.idx(t, level, ctx)];
                if here == LOG_ZERO {
                    continue;
                }
                let can_emit = !track || level < cap;
                let (blank_layer, label_layer) = match kind {
                    LatticeKind::FrameDependent => (t + 1, t + 1),
                    _ => (t + 1, t),
                };
                if kind == LatticeKind::FrameDependent && t == t_max {
                    continue;
                }
                let lp = cache.get(frame, ctx).to_vec();
                let from = |symbol| BackPtr {
                    layer: t,
                    level,
                    ctx,
                    symbol,
                };
                if blank_layer <= t_max {
                    tr.relax(blank_layer, level, ctx, here + lp[0], from(Symbol::Blank));
                }
                if can_emit {
                    let next_level = if track { level + 1 } else { level };
                    for (l, &w) in lp[1..].iter().enumerate() {
                        let l = l as Label;
                        let next = cfg.next_context(ctx, l);
                        tr.relax(label_layer, next_level, next, here + w, from(Symbol::Label(l)));
                    }
                }
            }
        }
    }

    let mut best: Option<(LogProb, usize, usize)> = None;
    for level in 0..levels {
        for ctx in 0..contexts {
            let s = tr.score[tr.idx(t_max, level, ctx)];
            if s > LOG_ZERO && best.is_none_or(|(b, _, _)| s > b) {
                best = Some((s, level, ctx));
            }
        }
    }
    let (score, mut level, mut ctx) = best.expect("the all-blank path always exists");
    let mut layer = t_max;
    let mut rev = Vec::new();
    while let Some(bp) = tr.back[tr.idx(layer, level, ctx)] {
        rev.push(PathStep {
            frame: bp.layer.min(t_max - 1),
            symbol: bp.symbol,
        });
        (layer, level, ctx) = (bp.layer, bp.level, bp.ctx);
    }
    rev.reverse();
    let path = AlignmentPath::new(rev);
    Ok(DecodeResult {
        labels: path.labels(),
        path,
        score,
        path_score: score,
        rule: DecodeRule::Max,
        beam: None,
    })
}

#[derive(Clone, Copy, Debug)]
struct Hyp {
    score: LogProb,
    ctx: usize,
}

type Beam = BTreeMap<Vec<Label>, Hyp>;

fn merge(beam: &mut Beam, prefix: Vec<Label>, score: LogProb, ctx: usize) {
    beam.entry(prefix)
        .and_modify(|h| h.score = logprob_add(h.score, score))
        .or_insert(Hyp { score, ctx });
}

/// Best `width` entries by score; ties keep the lexicographically smaller prefix.
fn ranked(entries: impl Iterator<Item = (Vec<Label>, Hyp)>, width: usize) -> Vec<(Vec<Label>, Hyp)> {
    let mut v: Vec<_> = entries.collect();
    v.sort_by(|a, b| b.1.score.total_cmp(&a.1.score).then_with(|| a.0.cmp(&b.0)));
    v.truncate(width);
    v
}

/// Beam search for `argmax_y log Σ_π P(y, π | x)` over prefixes of at most
/// `max_labels` labels (default: the number of frames). `beam = usize::MAX`
/// keeps every prefix.
pub fn sum_search(
    model: &ToyModel,
    x: &Features,
    kind: LatticeKind,
    beam: usize,
    max_labels: Option<usize>,
) -> Result<DecodeResult> {
    check_input(model, x, kind)?;
    if beam == 0 {
        return Err(Error::InvalidConfig("beam must be at least 1".into()));
    }
    let t_max = x.num_frames();
    if t_max == 0 {
        return Ok(empty_result(DecodeRule::Sum, Some(beam)));
    }
    let cfg = &model.config;
    let cap = max_labels.unwrap_or(t_max);
    let mut cache = LocalCache::new(model, x);
    let mut hyps: Beam = BTreeMap::new();
    hyps.insert(
        Vec::new(),
        Hyp {
            score: 0.0,
            ctx: cfg.initial_context(),
        },
    );

    match kind {
        LatticeKind::FrameDependent => {
            for t in 0..t_max {
                let mut next: Beam = BTreeMap::new();
                for (prefix, h) in &hyps {
                    let lp = cache.get(t, h.ctx);
                    merge(&mut next, prefix.clone(), h.score + lp[0], h.ctx);
                    if prefix.len() < cap {
                        for (l, &w) in lp[1..].iter().enumerate() {
                            let mut p = prefix.clone();
                            p.push(l as Label);
                            merge(&mut next, p, h.score + w, cfg.next_context(h.ctx, l as Label));
                        }
                    }
                }
                hyps = ranked(next.into_iter(), beam).into_iter().collect();
            }
        }
        _ => {
            for t in 0..=t_max {
                let frame = t.min(t_max - 1);
                // grow prefixes inside the frame, one label length at a time
                let mut pool = std::mem::take(&mut hyps);
                let mut n = pool.keys().map(Vec::len).min().unwrap_or(0);
                while n <= cap && pool.keys().any(|p| p.len() >= n) {
                    let layer = ranked(
                        pool.iter().filter(|(p, _)| p.len() == n).map(|(p, h)| (p.clone(), *h)),
                        beam,
                    );
                    pool.retain(|p, _| p.len() != n);
                    for (prefix, h) in &layer {
                        if n < cap {
                            let lp = cache.get(frame, h.ctx);
                            for (l, &w) in lp[1..].iter().enumerate() {
                                let mut p = prefix.clone();
                                p.push(l as Label);
                                merge(&mut pool, p, h.score + w, cfg.next_context(h.ctx, l as Label));
                            }
                        }
                    }
                    pool.extend(layer);
                    n += 1;
                }
                let kept = ranked(pool.into_iter(), beam);
                if t == t_max {
                    hyps = kept.into_iter().collect();
                } else {
                    for (prefix, h) in kept {
                        let w = cache.get(frame, h.ctx)[0];
                        merge(&mut hyps, prefix, h.score + w, h.ctx);
                    }
                }
            }
        }
    }

    let (labels, best) = ranked(hyps.into_iter(), 1)
        .pop()
        .expect("the beam is never empty");
    let (path, path_score) = constrained_best_path(model, x, &labels, kind)?;
    Ok(DecodeResult {
        labels,
        path,
        score: best.score,
        path_score,
        rule: DecodeRule::Sum,
        beam: Some(beam),
    })
}

/// Best alignment of a fixed label sequence and its joint log-probability.
/// Ties place labels as early as possible.
pub fn constrained_best_path(
    model: &ToyModel,
    x: &Features,
    labels: &[Label],
    kind: LatticeKind,
) -> Result<(AlignmentPath, LogProb)> {
    let scorer = model.score_arcs(x, labels, kind)?;
    let lat = build_lattice(kind, x.num_frames(), labels, &scorer)?;
    Ok(lat.best_path())
}

/// One decoded utterance as written to the decode TSV.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeRecord {
    pub id: String,
    pub rule: DecodeRule,
    pub labels: Vec<Label>,
    pub frames: Vec<usize>,
    pub score: LogProb,
    pub path_score: LogProb,
}

impl DecodeRecord {
    pub fn new(id: impl Into<String>, r: &DecodeResult) -> Self {
        DecodeRecord {
            id: id.into(),
            rule: r.rule,
            labels: r.labels.clone(),
            frames: r.path.emission_frames(),
            score: r.score,
            path_score: r.path_score,
        }
    }
}

pub const DECODE_COLUMNS: [&str; 6] = ["utt_id", "rule", "labels", "frames", "score", "path_score"];

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

/// Writes `# ` header lines, the column names, then one row per record.
/// Labels and frames are space-separated lists inside their tab-separated column.
pub fn write_decode_tsv(w: &mut impl Write, header: &[String], records: &[DecodeRecord]) -> Result<()> {
    let mut out = String::new();
    for h in header {
        out.push_str(&format!("# {h}\n"));
    }
    out.push_str(&DECODE_COLUMNS.join("\t"));
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.id,
            r.rule,
            join(&r.labels),
            join(&r.frames),
            r.score,
            r.path_score
        ));
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_decode_tsv(r: impl BufRead) -> Result<Vec<DecodeRecord>> {
    let mut out = Vec::new();
    let mut seen_columns = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let ln = i + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if !seen_columns {
            if f != DECODE_COLUMNS {
                return Err(Error::parse(ln, format!("expected columns `{}`", DECODE_COLUMNS.join(" "))));
            }
            seen_columns = true;
            continue;
        }
        if f.len() != DECODE_COLUMNS.len() {
            return Err(Error::parse(ln, format!("expected {} fields", DECODE_COLUMNS.len())));
        }
        let list = |s: &str| -> Result<Vec<usize>> {
            s.split_whitespace()
                .map(|v| v.parse().map_err(|_| Error::parse(ln, format!("bad integer `{v}`"))))
                .collect()
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad score `{s}`")));
        let labels: Vec<Label> = list(f[2])?.into_iter().map(|l| l as Label).collect();
        let frames = list(f[3])?;
        if labels.len() != frames.len() {
            return Err(Error::parse(ln, "labels and frames differ in length"));
        }
        out.push(DecodeRecord {
            id: f[0].to_string(),
            rule: f[1].parse().map_err(|_| Error::parse(ln, format!("bad rule `{}`", f[1])))?,
            labels,
            frames,
            score: num(f[4])?,
            path_score: num(f[5])?,
        });
    }
    Ok(out)
}
