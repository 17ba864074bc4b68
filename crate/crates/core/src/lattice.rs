//! Recognition lattices for a fixed label sequence.
//!
//! A lattice is a DAG over states `(t, u)`: `t` frames consumed, `u` labels
//! emitted. States live on a dense `(T+1) × (U+1)` grid and lexicographic
//! `(t, u)` order is a topological order for every kind, so all sweeps are
//! plain loops over the grid.
//!
//! Frames are 0-based throughout: an arc leaving `(t, u)` in a
//! frame-dependent lattice consumes frame `t`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{LogProb, LogWeight, PathCount, Semiring, LOG_ZERO};

pub type Label = u32;

/// Default cap on the number of paths [`Lattice::enumerate_paths`] will visit.
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Blank,
    Label(Label),
}

impl Symbol {
    pub fn is_blank(self) -> bool {
        self == Symbol::Blank
    }

    pub fn label(self) -> Option<Label> {
        match self {
            Symbol::Blank => None,
            Symbol::Label(l) => Some(l),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Blank => f.write_str("~"),
            Symbol::Label(l) => write!(f, "{l}"),
        }
    }
}

impl FromStr for Symbol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "~" {
            Ok(Symbol::Blank)
        } else {
            s.parse()
                .map(Symbol::Label)
                .map_err(|_| format!("bad symbol `{s}`"))
        }
    }
}

/// Alignment topology.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    /// Every frame emits exactly one symbol: a label or blank (CTC-like,
    /// without repeat collapsing). `C(T, U)` paths.
    FrameDependent,
    /// Labels and frame advances interleave (RNN-T / HAT-like). `C(T+U, U)` paths.
    LabelAndFrame,
    /// A single chain of label arcs with no frame axis (LAS-like). One path.
    LabelDependent,
}

impl LatticeKind {
    pub const ALL: [LatticeKind; 3] = [
        LatticeKind::FrameDependent,
        LatticeKind::LabelAndFrame,
        LatticeKind::LabelDependent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::FrameDependent => "frame_dependent",
            LatticeKind::LabelAndFrame => "label_and_frame",
            LatticeKind::LabelDependent => "label_dependent",
        }
    }
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frame_dependent" | "fd" | "ctc" => Ok(LatticeKind::FrameDependent),
            "label_and_frame" | "laf" | "rnnt" | "hat" => Ok(LatticeKind::LabelAndFrame),
            "label_dependent" | "ld" | "las" => Ok(LatticeKind::LabelDependent),
            _ => Err(Error::InvalidConfig(format!("unknown lattice kind `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LatticeState {
    pub t: usize,
    pub u: usize,
}

impl LatticeState {
    pub const fn new(t: usize, u: usize) -> Self {
        LatticeState { t, u }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub src: LatticeState,
    pub dst: LatticeState,
    pub symbol: Symbol,
    pub weight: LogProb,
}

/// Supplies the log-weight of the arc leaving `src` with `symbol`.
pub trait ArcScorer {
    fn score(&self, src: LatticeState, symbol: Symbol) -> LogProb;
}

impl<F> ArcScorer for F
where
    F: Fn(LatticeState, Symbol) -> LogProb,
{
    fn score(&self, src: LatticeState, symbol: Symbol) -> LogProb {
        self(src, symbol)
    }
}

/// One step of an alignment: the frame it is attributed to and what it emits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PathStep {
    pub frame: usize,
    pub symbol: Symbol,
}

/// A monotone assignment of label emissions and blanks to frames.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct AlignmentPath {
    pub steps: Vec<PathStep>,
}

impl AlignmentPath {
    pub fn new(steps: Vec<PathStep>) -> Self {
        AlignmentPath { steps }
    }

    /// Label sequence with blanks removed.
    pub fn labels(&self) -> Vec<Label> {
        self.steps.iter().filter_map(|s| s.symbol.label()).collect()
    }

    /// Frame at which each label is emitted, parallel to [`labels`](Self::labels).
    pub fn emission_frames(&self) -> Vec<usize> {
        self.steps
            .iter()
            .filter(|s| !s.symbol.is_blank())
            .map(|s| s.frame)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Frame an arc leaving `src` is attributed to.
///
/// Label-and-frame lattices may emit labels after the last frame advance
/// (state `t = T`); those are attributed to the last frame. Label-dependent
/// lattices have no frame axis and report frame 0.
pub fn arc_frame(kind: LatticeKind, num_frames: usize, src: LatticeState) -> usize {
    match kind {
        LatticeKind::FrameDependent => src.t,
        LatticeKind::LabelAndFrame => src.t.min(num_frames.saturating_sub(1)),
        LatticeKind::LabelDependent => 0,
    }
}

/// An acyclic, trimmed recognition lattice for one `(x, y)` pair.
#[derive(Clone, Debug)]
pub struct Lattice {
    kind: LatticeKind,
    num_frames: usize,
    labels: Vec<Label>,
    /// Sorted by source cell, blank before label within a source.
    arcs: Vec<Arc>,
    /// CSR offsets into `arcs`, one entry per grid cell plus one.
    offsets: Vec<usize>,
    /// States lying on some initial-to-final path, in topological order.
    states: Vec<LatticeState>,
    final_state: LatticeState,
}

/// Builds the lattice of `kind` for `labels` over `num_frames` frames,
/// weighting every admissible arc with `scorer`.
pub fn build_lattice(
    kind: LatticeKind,
    num_frames: usize,
    labels: &[Label],
    scorer: &impl ArcScorer,
) -> Result<Lattice> {
    let (t_max, u_max) = (num_frames, labels.len());
    let mut arcs = Vec::new();
    let mut push = |src: LatticeState, dst: LatticeState, symbol: Symbol| {
        arcs.push(Arc {
            src,
            dst,
            symbol,
            weight: scorer.score(src, symbol),
        });
    };
    match kind {
        LatticeKind::FrameDependent => {
            if u_max > t_max {
                return Err(Error::InfeasiblePair {
                    frames: t_max,
                    labels: u_max,
                });
            }
            let slack = t_max - u_max;
            for t in 0..t_max {
                // reachable: u <= t and U - u <= T - t
                let lo = t.saturating_sub(slack);
                for u in lo..=t.min(u_max) {
                    let src = LatticeState::new(t, u);
                    if u + slack > t {
                        push(src, LatticeState::new(t + 1, u), Symbol::Blank);
                    }
                    if u < u_max {
                        push(
                            src,
                            LatticeState::new(t + 1, u + 1),
                            Symbol::Label(labels[u]),
                        );
                    }
                }
            }
        }
        LatticeKind::LabelAndFrame => {
            if t_max == 0 && u_max > 0 {
                return Err(Error::EmptyLattice);
            }
            for t in 0..=t_max {
                for u in 0..=u_max {
                    let src = LatticeState::new(t, u);
                    if t < t_max {
                        push(src, LatticeState::new(t + 1, u), Symbol::Blank);
                    }
                    if u < u_max {
                        push(src, LatticeState::new(t, u + 1), Symbol::Label(labels[u]));
                    }
                }
            }
        }
        LatticeKind::LabelDependent => {
            for (u, &label) in labels.iter().enumerate() {
                push(
                    LatticeState::new(0, u),
                    LatticeState::new(0, u + 1),
                    Symbol::Label(label),
                );
            }
        }
    }
    Lattice::assemble(kind, num_frames, labels.to_vec(), arcs)
}

impl Lattice {
    /// Builds a lattice from an explicit arc list, validating the arc shapes
    /// for `kind` and trimming dead states.
    pub fn from_arcs(
        kind: LatticeKind,
        num_frames: usize,
        num_labels: usize,
        arcs: Vec<Arc>,
    ) -> Result<Lattice> {
        let mut labels: Vec<Option<Label>> = vec![None; num_labels];
        for (i, arc) in arcs.iter().enumerate() {
            let (s, d) = (arc.src, arc.dst);
            let bad = |msg: &str| Error::InvalidConfig(format!("arc {i} ({s:?} -> {d:?}): {msg}"));
            let t_limit = if kind == LatticeKind::LabelDependent { 0 } else { num_frames };
            if d.t > t_limit || d.u > num_labels {
                return Err(bad("outside the state grid"));
            }
            if arc.weight.is_nan() {
                return Err(bad("NaN weight"));
            }
            let shape_ok = match (kind, arc.symbol) {
                (LatticeKind::FrameDependent, Symbol::Blank) => d.t == s.t + 1 && d.u == s.u,
                (LatticeKind::FrameDependent, Symbol::Label(_)) => d.t == s.t + 1 && d.u == s.u + 1,
                (LatticeKind::LabelAndFrame, Symbol::Blank) => d.t == s.t + 1 && d.u == s.u,
                (LatticeKind::LabelAndFrame, Symbol::Label(_))
                | (LatticeKind::LabelDependent, Symbol::Label(_)) => d.t == s.t && d.u == s.u + 1,
                (LatticeKind::LabelDependent, Symbol::Blank) => false,
            };
            if !shape_ok {
                return Err(bad("arc shape not admitted by lattice kind"));
            }
            if let Symbol::Label(l) = arc.symbol {
                match labels[s.u] {
                    Some(prev) if prev != l => {
                        return Err(bad("conflicting labels for the same position"))
                    }
                    _ => labels[s.u] = Some(l),
                }
            }
        }
        let labels = labels.into_iter().map(|l| l.unwrap_or(0)).collect();
        Lattice::assemble(kind, num_frames, labels, arcs)
    }

    fn assemble(
        kind: LatticeKind,
        num_frames: usize,
        labels: Vec<Label>,
        mut arcs: Vec<Arc>,
    ) -> Result<Lattice> {
        let num_labels = labels.len();
        let final_state = match kind {
            LatticeKind::LabelDependent => LatticeState::new(0, num_labels),
            _ => LatticeState::new(num_frames, num_labels),
        };
        let cols = num_labels + 1;
        let num_cells = (num_frames + 1) * cols;
        let cell = |s: LatticeState| s.t * cols + s.u;

        // Trim: keep arcs whose source is reachable and whose target is co-reachable.
        arcs.sort_by(|a, b| {
            (cell(a.src), a.symbol.is_blank() as u8 ^ 1).cmp(&(cell(b.src), b.symbol.is_blank() as u8 ^ 1))
        });
        let mut reach = vec![false; num_cells];
        reach[0] = true;
        for arc in &arcs {
            if reach[cell(arc.src)] {
                reach[cell(arc.dst)] = true;
            }
        }
        let mut coreach = vec![false; num_cells];
        coreach[cell(final_state)] = true;
        for arc in arcs.iter().rev() {
            if coreach[cell(arc.dst)] {
                coreach[cell(arc.src)] = true;
            }
        }
        if !reach[cell(final_state)] {
            return Err(Error::EmptyLattice);
        }
        arcs.retain(|a| reach[cell(a.src)] && coreach[cell(a.dst)]);

        let mut offsets = vec![0usize; num_cells + 1];
        for arc in &arcs {
            offsets[cell(arc.src) + 1] += 1;
        }
        for i in 0..num_cells {
            offsets[i + 1] += offsets[i];
        }
        let states = (0..num_cells)
            .filter(|&c| reach[c] && coreach[c])
            .map(|c| LatticeState::new(c / cols, c % cols))
            .collect();
        Ok(Lattice {
            kind,
            num_frames,
            labels,
            arcs,
            offsets,
            states,
            final_state,
        })
    }

    /// Drops every arc and state not on an initial-to-final path.
    pub fn trim(&self) -> Lattice {
        Lattice::assemble(self.kind, self.num_frames, self.labels.clone(), self.arcs.clone())
            .expect("a valid lattice has a path")
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn states(&self) -> &[LatticeState] {
        &self.states
    }

    pub fn initial_state(&self) -> LatticeState {
        LatticeState::new(0, 0)
    }

    pub fn final_state(&self) -> LatticeState {
        self.final_state
    }

    pub fn num_cells(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Dense grid index of a state.
    #[inline]
    pub fn cell(&self, s: LatticeState) -> usize {
        s.t * (self.labels.len() + 1) + s.u
    }

    /// Arcs leaving `s`, blank first.
    pub fn arcs_from(&self, s: LatticeState) -> &[Arc] {
        let c = self.cell(s);
        &self.arcs[self.offsets[c]..self.offsets[c + 1]]
    }

    /// Index range into [`arcs`](Self::arcs) of the arcs leaving `s`.
    pub fn arc_range(&self, s: LatticeState) -> std::ops::Range<usize> {
        let c = self.cell(s);
        self.offsets[c]..self.offsets[c + 1]
    }

    pub fn arc_frame(&self, arc: &Arc) -> usize {
        arc_frame(self.kind, self.num_frames, arc.src)
    }

    /// Same topology with arc weights replaced, in [`arcs`](Self::arcs) order.
    pub fn with_weights(&self, weights: &[LogProb]) -> Lattice {
        assert_eq!(weights.len(), self.arcs.len(), "one weight per arc");
        let mut out = self.clone();
        for (arc, &w) in out.arcs.iter_mut().zip(weights) {
            arc.weight = w;
        }
        out
    }

    /// Forward semiring sums over all prefixes: entry `cell(s)` is the sum
    /// over paths from the initial state to `s`.
    pub fn shortest_distance<S: Semiring>(&self, lift: impl Fn(&Arc) -> S) -> Vec<S> {
        let mut dist = vec![S::zero(); self.num_cells()];
        dist[0] = S::one();
        for &s in &self.states {
            let here = dist[self.cell(s)].clone();
            for arc in self.arcs_from(s) {
                let d = self.cell(arc.dst);
                dist[d] = dist[d].plus(&here.times(&lift(arc)));
            }
        }
        dist
    }

    /// Backward sums: entry `cell(s)` is the sum over paths from `s` to the final state.
    pub fn backward_distance<S: Semiring>(&self, lift: impl Fn(&Arc) -> S) -> Vec<S> {
        let mut dist = vec![S::zero(); self.num_cells()];
        dist[self.cell(self.final_state)] = S::one();
        for &s in self.states.iter().rev() {
            let c = self.cell(s);
            let mut acc = dist[c].clone();
            for arc in self.arcs_from(s) {
                acc = acc.plus(&lift(arc).times(&dist[self.cell(arc.dst)]));
            }
            dist[c] = acc;
        }
        dist
    }

    /// Exact number of initial-to-final paths.
    pub fn num_paths(&self) -> BigUint {
        let counts = self.shortest_distance(|_| PathCount::one());
        counts[self.cell(self.final_state)].0.clone()
    }

    /// `log` of [`num_paths`](Self::num_paths), computed without big integers.
    pub fn log_num_paths(&self) -> f64 {
        let d = self.shortest_distance(|_| LogWeight(0.0));
        d[self.cell(self.final_state)].0
    }

    /// `log Σ_π ω[π]` over all paths.
    pub fn log_total_weight(&self) -> LogProb {
        let d = self.shortest_distance(|a| LogWeight(a.weight));
        d[self.cell(self.final_state)].0
    }

    pub fn path_from_arcs(&self, arcs: &[&Arc]) -> AlignmentPath {
        AlignmentPath::new(
            arcs.iter()
                .map(|a| PathStep {
                    frame: self.arc_frame(a),
                    symbol: a.symbol,
                })
                .collect(),
        )
    }

    /// Every path with its total log-weight, in depth-first order (blank first).
    pub fn enumerate_paths(&self, cap: usize) -> Result<Vec<(AlignmentPath, LogProb)>> {
        if self.num_paths() > BigUint::from(cap) {
            return Err(Error::TooManyPaths { cap });
        }
        let mut out = Vec::new();
        let mut stack: Vec<&Arc> = Vec::new();
        self.enumerate_from(self.initial_state(), &mut stack, &mut out);
        Ok(out)
    }

    fn enumerate_from<'a>(
        &'a self,
        s: LatticeState,
        stack: &mut Vec<&'a Arc>,
        out: &mut Vec<(AlignmentPath, LogProb)>,
    ) {
        if s == self.final_state {
            let w = stack.iter().map(|a| a.weight).sum();
            out.push((self.path_from_arcs(stack), w));
            return;
        }
        for arc in self.arcs_from(s) {
            stack.push(arc);
            self.enumerate_from(arc.dst, stack, out);
            stack.pop();
        }
    }

    /// Highest-weight path. Ties prefer entering a state through a blank arc,
    /// which places label emissions as early as possible.
    pub fn best_path(&self) -> (AlignmentPath, LogProb) {
        let n = self.num_cells();
        let mut score = vec![LOG_ZERO; n];
        let mut back: Vec<Option<usize>> = vec![None; n];
        score[0] = 0.0;
        for &s in &self.states {
            let here = score[self.cell(s)];
            for i in self.arc_range(s) {
                let arc = &self.arcs[i];
                let d = self.cell(arc.dst);
                let cand = here + arc.weight;
                let take = match back[d] {
                    None => true,
                    Some(j) => {
                        cand > score[d]
                            || (cand == score[d]
                                && arc.symbol.is_blank()
                                && !self.arcs[j].symbol.is_blank())
                    }
                };
                if take {
                    score[d] = cand;
                    back[d] = Some(i);
                }
            }
        }
        let mut rev = Vec::new();
        let mut c = self.cell(self.final_state);
        while let Some(i) = back[c] {
            rev.push(&self.arcs[i]);
            c = self.cell(self.arcs[i].src);
        }
        rev.reverse();
        (self.path_from_arcs(&rev), score[self.cell(self.final_state)])
    }

    /// Serializes to the line format: header `kind T U`, then one
    /// `src_t src_u dst_t dst_u symbol log_weight` line per arc.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.kind, self.num_frames, self.num_labels());
        for a in &self.arcs {
            out.push_str(&format!(
                "{} {} {} {} {} {}\n",
                a.src.t, a.src.u, a.dst.t, a.dst.u, a.symbol, a.weight
            ));
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output. Blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Lattice> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or_else(|| Error::parse(0, "missing header"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 {
            return Err(Error::parse(hline, "header must be `kind T U`"));
        }
        let kind: LatticeKind = h[0].parse().map_err(|e: Error| Error::parse(hline, e.to_string()))?;
        let num_frames = parse_field(hline, h[1])?;
        let num_labels = parse_field(hline, h[2])?;
        let mut arcs = Vec::new();
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(Error::parse(ln, "arc line needs 6 fields"));
            }
            arcs.push(Arc {
                src: LatticeState::new(parse_field(ln, f[0])?, parse_field(ln, f[1])?),
                dst: LatticeState::new(parse_field(ln, f[2])?, parse_field(ln, f[3])?),
                symbol: f[4].parse().map_err(|e: String| Error::parse(ln, e))?,
                weight: parse_field(ln, f[5])?,
            });
        }
        Lattice::from_arcs(kind, num_frames, num_labels, arcs)
    }
}

fn parse_field<T: FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(line, format!("cannot parse `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(_: LatticeState, _: Symbol) -> LogProb {
        0.0
    }

    fn binom(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn frame_dependent_counts() {
        let lat = build_lattice(LatticeKind::FrameDependent, 4, &[0, 1], &uniform).unwrap();
        assert_eq!(lat.num_paths(), BigUint::from(6u32));
        let lat = build_lattice(LatticeKind::FrameDependent, 10, &[0, 1, 2], &uniform).unwrap();
        assert_eq!(lat.num_paths(), BigUint::from(120u32));
        let lat = build_lattice(LatticeKind::FrameDependent, 5, &[], &uniform).unwrap();
        assert_eq!(lat.num_paths(), BigUint::from(1u32));
    }

    #[test]
    fn label_and_frame_counts() {
        let lat = build_lattice(LatticeKind::LabelAndFrame, 2, &[0, 1], &uniform).unwrap();
        assert_eq!(lat.num_paths(), BigUint::from(6u32));
        let lat = build_lattice(LatticeKind::LabelAndFrame, 3, &[0, 1], &uniform).unwrap();
        assert_eq!(lat.num_paths(), BigUint::from(10u32));
        assert_eq!(lat.enumerate_paths(100).unwrap().len(), 10);
    }

    #[test]
    fn label_dependent_is_single_path() {
        for (t, labels) in [(0, vec![]), (7, vec![1, 2, 3]), (2, vec![0; 9])] {
            let lat = build_lattice(LatticeKind::LabelDependent, t, &labels, &uniform).unwrap();
            assert_eq!(lat.num_paths(), BigUint::from(1u32));
        }
    }

    #[test]
    fn counts_match_closed_form_and_enumeration() {
        for t in 0..=12usize {
            for u in 0..=t.min(6) {
                let labels: Vec<Label> = (0..u as u32).collect();
                let fd = build_lattice(LatticeKind::FrameDependent, t, &labels, &uniform).unwrap();
                assert_eq!(fd.num_paths(), BigUint::from(binom(t as u64, u as u64)));
                assert_eq!(fd.enumerate_paths(DEFAULT_ENUMERATION_CAP).unwrap().len() as u64, binom(t as u64, u as u64));
                if t > 0 || u == 0 {
                    let laf = build_lattice(LatticeKind::LabelAndFrame, t, &labels, &uniform).unwrap();
                    let n = binom((t + u) as u64, u as u64);
                    assert_eq!(laf.num_paths(), BigUint::from(n));
                    assert_eq!(laf.enumerate_paths(DEFAULT_ENUMERATION_CAP).unwrap().len() as u64, n);
                }
            }
        }
    }

    #[test]
    fn log_num_paths_matches_big_count() {
        let labels: Vec<Label> = (0..40).collect();
        let lat = build_lattice(LatticeKind::FrameDependent, 200, &labels, &uniform).unwrap();
        let exact: f64 = (0..40).map(|i| ((200 - i) as f64).ln() - ((i + 1) as f64).ln()).sum();
        assert!((lat.log_num_paths() - exact).abs() < 1e-9);
        assert_eq!(lat.num_paths().bits(), 1 + exact.exp().log2().floor() as u64);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            build_lattice(LatticeKind::FrameDependent, 2, &[0, 1, 2], &uniform),
            Err(Error::InfeasiblePair { frames: 2, labels: 3 })
        ));
        assert!(matches!(
            build_lattice(LatticeKind::LabelAndFrame, 0, &[0], &uniform),
            Err(Error::EmptyLattice)
        ));
        let lat = build_lattice(LatticeKind::FrameDependent, 12, &[0, 1, 2], &uniform).unwrap();
        assert!(matches!(lat.enumerate_paths(100), Err(Error::TooManyPaths { cap: 100 })));
    }

    #[test]
    fn two_frame_paths() {
        let lat = build_lattice(LatticeKind::FrameDependent, 2, &[5], &uniform).unwrap();
        let paths = lat.enumerate_paths(10).unwrap();
        let frames: Vec<Vec<usize>> = paths.iter().map(|(p, _)| p.emission_frames()).collect();
        assert_eq!(frames, vec![vec![1], vec![0]]);
        for (p, _) in &paths {
            assert_eq!(p.labels(), vec![5]);
        }
    }

    #[test]
    fn frame_dependent_arc_shapes_and_reachability() {
        let lat = build_lattice(LatticeKind::FrameDependent, 6, &[0, 1], &uniform).unwrap();
        for s in lat.states() {
            assert!(s.u <= s.t && 2 - s.u <= 6 - s.t);
        }
        for a in lat.arcs() {
            assert_eq!(a.dst.t, a.src.t + 1);
            match a.symbol {
                Symbol::Blank => assert_eq!(a.dst.u, a.src.u),
                Symbol::Label(l) => {
                    assert_eq!(a.dst.u, a.src.u + 1);
                    assert_eq!(l as usize, a.src.u);
                }
            }
        }
    }

    #[test]
    fn single_path_weight_is_sum() {
        let scorer = |s: LatticeState, _: Symbol| -0.1 * (s.u as f64 + 1.0);
        let lat = build_lattice(LatticeKind::LabelDependent, 3, &[4, 4, 2], &scorer).unwrap();
        let paths = lat.enumerate_paths(10).unwrap();
        assert_eq!(paths.len(), 1);
        assert!((paths[0].1 - -0.6).abs() < 1e-12);
    }

    #[test]
    fn best_path_prefers_early_emission_on_ties() {
        let lat = build_lattice(LatticeKind::FrameDependent, 3, &[0], &uniform).unwrap();
        let (path, score) = lat.best_path();
        assert_eq!(path.emission_frames(), vec![0]);
        assert_eq!(score, 0.0);
        let lat = build_lattice(LatticeKind::LabelAndFrame, 3, &[0, 1], &uniform).unwrap();
        assert_eq!(lat.best_path().0.emission_frames(), vec![0, 0]);
    }

    #[test]
    fn text_round_trip() {
        let scorer = |s: LatticeState, sym: Symbol| -((s.t * 7 + s.u * 3) as f64) / 11.0 - sym.is_blank() as u8 as f64;
        for kind in LatticeKind::ALL {
            let lat = build_lattice(kind, 4, &[3, 1], &scorer).unwrap();
            let text = lat.to_text();
            let back = Lattice::from_text(&text).unwrap();
            assert_eq!(back.to_text(), text);
            assert_eq!(back.arcs(), lat.arcs());
            assert_eq!(back.labels(), lat.labels());
        }
    }

    #[test]
    fn from_text_trims_dead_arcs() {
        let text = "frame_dependent 2 1\n\
                    0 0 1 0 ~ -0.5\n\
                    0 0 1 1 7 -0.5\n\
                    1 0 2 1 7 -0.25\n\
                    1 1 2 1 ~ -1\n\
                    1 0 2 0 ~ -inf\n";
        let lat = Lattice::from_text(text).unwrap();
        assert_eq!(lat.arcs().len(), 4);
        assert_eq!(lat.num_paths(), BigUint::from(2u32));
        assert_eq!(lat.trim().arcs(), lat.arcs());
    }

    #[test]
    fn from_text_rejects_bad_input() {
        assert!(Lattice::from_text("").is_err());
        assert!(Lattice::from_text("frame_dependent 2\n").is_err());
        assert!(Lattice::from_text("frame_dependent 2 1\n0 0 0 1 3 -1\n").is_err());
        assert!(matches!(
            Lattice::from_text("frame_dependent 2 1\n0 0 1 0 ~ -1\n"),
            Err(Error::EmptyLattice)
        ));
    }
}
