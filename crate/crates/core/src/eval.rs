//! Word error rate and time-alignment accuracy.
//!
//! `ACC(τ)` counts a reference word as correct when it is recognized and its
//! hypothesized span satisfies `r_s - τ ≤ h_s` and `h_e ≤ r_e + τ`.
//! Hypothesis words are paired with reference words through the WER
//! backtrace; only exact matches are paired, and every reference word counts
//! towards `N_w`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use crate::decode::{AlignmentPath, DecodeRecord};
use crate::error::{Error, Result};
use crate::lattice::Label;
use crate::model::{label_char, SyntheticUtterance};

pub const DEFAULT_FRAME_SHIFT_MS: u64 = 10;

/// `τ` grid of the fine-grained accuracy table, in ms.
pub const FINE_TAUS_MS: [u64; 6] = [0, 10, 20, 30, 40, 50];

/// `τ` grid of the coarse-grained accuracy table, in ms.
pub const COARSE_TAUS_MS: [u64; 7] = [0, 100, 200, 300, 400, 500, 600];

/// A word with its start and end time. Units are frames when built from a
/// path and milliseconds once converted or read from a file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordTiming {
    pub word: String,
    pub start: u64,
    pub end: u64,
}

impl WordTiming {
    pub fn to_ms(&self, frame_shift_ms: u64) -> WordTiming {
        WordTiming {
            word: self.word.clone(),
            start: self.start * frame_shift_ms,
            end: self.end * frame_shift_ms,
        }
    }
}

/// How a label sequence splits into words.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WordSegmentation {
    /// Label that separates words. `None` makes every label its own word.
    pub boundary: Option<Label>,
}

impl WordSegmentation {
    /// Words as runs of `(label, frame)` between boundaries. Empty runs are
    /// dropped; the flag reports whether any were found.
    fn split<'a>(&self, items: &'a [(Label, usize)]) -> (Vec<&'a [(Label, usize)]>, bool) {
        let Some(b) = self.boundary else {
            return (items.chunks(1).collect(), false);
        };
        let runs: Vec<_> = items.split(|(l, _)| *l == b).collect();
        let malformed = runs.iter().any(|r| r.is_empty()) && !items.is_empty();
        (runs.into_iter().filter(|r| !r.is_empty()).collect(), malformed)
    }

    /// Whether `labels` splits into non-empty words with no stray boundaries.
    pub fn is_well_formed(&self, labels: &[Label]) -> bool {
        let items: Vec<_> = labels.iter().map(|&l| (l, 0)).collect();
        !self.split(&items).1
    }
}

fn word_text(run: &[(Label, usize)]) -> String {
    run.iter().map(|&(l, _)| label_char(l)).collect()
}

/// Word timings in frames from labels and their emission frames: a word
/// starts at its first label's frame and ends at its last label's frame.
pub fn word_timings(labels: &[Label], frames: &[usize], seg: &WordSegmentation) -> Result<Vec<WordTiming>> {
    if labels.len() != frames.len() {
        return Err(Error::DimMismatch {
            what: "emission frames",
            expected: labels.len(),
            found: frames.len(),
        });
    }
    let items: Vec<(Label, usize)> = labels.iter().copied().zip(frames.iter().copied()).collect();
    Ok(seg
        .split(&items)
        .0
        .into_iter()
        .map(|run| WordTiming {
            word: word_text(run),
            start: run[0].1 as u64,
            end: run[run.len() - 1].1 as u64,
        })
        .collect())
}

pub fn word_timings_from_path(path: &AlignmentPath, seg: &WordSegmentation) -> Vec<WordTiming> {
    word_timings(&path.labels(), &path.emission_frames(), seg).expect("path labels and frames align")
}

/// Word timings of one utterance, in ms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UttTimings {
    pub id: String,
    pub words: Vec<WordTiming>,
}

impl UttTimings {
    pub fn from_decode(rec: &DecodeRecord, seg: &WordSegmentation, frame_shift_ms: u64) -> Result<Self> {
        let words = word_timings(&rec.labels, &rec.frames, seg)?;
        Ok(UttTimings {
            id: rec.id.clone(),
            words: words.iter().map(|w| w.to_ms(frame_shift_ms)).collect(),
        })
    }

    /// Ground-truth timings of a synthetic utterance. Each label is a word.
    pub fn from_reference(utt: &SyntheticUtterance, frame_shift_ms: u64) -> Self {
        let words = utt
            .labels
            .iter()
            .zip(&utt.spans)
            .map(|(&l, &(s, e))| {
                WordTiming {
                    word: label_char(l).to_string(),
                    start: s as u64,
                    end: e as u64,
                }
                .to_ms(frame_shift_ms)
            })
            .collect();
        UttTimings {
            id: utt.id.clone(),
            words,
        }
    }

    pub fn word_list(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.word.as_str()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EditOp {
    Match { r: usize, h: usize },
    Substitute { r: usize, h: usize },
    Insert { h: usize },
    Delete { r: usize },
}

/// Unit-cost Levenshtein alignment of `hyp` against `reference`. Among
/// equal-cost alignments the backtrace prefers match or substitution, then
/// deletion, then insertion.
pub fn edit_alignment<T: PartialEq>(reference: &[T], hyp: &[T]) -> Vec<EditOp> {
    let (n, m) = (reference.len(), hyp.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            d[i * w + j] = diag.min(d[(i - 1) * w + j] + 1).min(d[i * w + j - 1] + 1);
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hyp[j - 1];
            if d[(i - 1) * w + j - 1] + usize::from(!same) == here {
                ops.push(if same {
                    EditOp::Match { r: i - 1, h: j - 1 }
                } else {
                    EditOp::Substitute { r: i - 1, h: j - 1 }
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            ops.push(EditOp::Delete { r: i - 1 });
            i -= 1;
        } else {
            ops.push(EditOp::Insert { h: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WerReport {
    pub wer: f64,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub matches: usize,
    pub reference_words: usize,
}

impl WerReport {
    fn add(&mut self, ops: &[EditOp], reference_words: usize) {
        for op in ops {
            match op {
                EditOp::Match { .. } => self.matches += 1,
                EditOp::Substitute { .. } => self.substitutions += 1,
                EditOp::Insert { .. } => self.insertions += 1,
                EditOp::Delete { .. } => self.deletions += 1,
            }
        }
        self.reference_words += reference_words;
    }

    fn finish(mut self) -> Self {
        let errors = self.substitutions + self.insertions + self.deletions;
        self.wer = if self.reference_words == 0 {
            if errors == 0 { 0.0 } else { f64::INFINITY }
        } else {
            errors as f64 / self.reference_words as f64
        };
        self
    }
}

/// Pairs hypothesis and reference utterances by id.
fn pair_by_id<'a, H, R>(
    hyp: &'a [H],
    reference: &'a [R],
    hyp_id: impl Fn(&H) -> &str,
    ref_id: impl Fn(&R) -> &str,
) -> Result<Vec<(&'a H, &'a R)>> {
    let mut by_id: BTreeMap<&str, &H> = BTreeMap::new();
    for h in hyp {
        if by_id.insert(hyp_id(h), h).is_some() {
            return Err(Error::IdMismatch(format!("duplicate hypothesis id `{}`", hyp_id(h))));
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(reference.len());
    for r in reference {
        let id = ref_id(r);
        if !seen.insert(id) {
            return Err(Error::IdMismatch(format!("duplicate reference id `{id}`")));
        }
        let h = by_id
            .get(id)
            .ok_or_else(|| Error::IdMismatch(format!("no hypothesis for `{id}`")))?;
        out.push((*h, r));
    }
    if let Some(extra) = by_id.keys().find(|k| !seen.contains(*k)) {
        return Err(Error::IdMismatch(format!("hypothesis `{extra}` has no reference")));
    }
    Ok(out)
}

/// Corpus WER `(S + I + D) / N_ref` over utterances `(id, words)`.
pub fn wer<W: PartialEq>(hyp: &[(String, Vec<W>)], reference: &[(String, Vec<W>)]) -> Result<WerReport> {
    let mut report = WerReport::default();
    for (h, r) in pair_by_id(hyp, reference, |h| &h.0, |r| &r.0)? {
        report.add(&edit_alignment(&r.1, &h.1), r.1.len());
    }
    Ok(report.finish())
}

/// WER over word timings, comparing word text only.
pub fn wer_of_timings(hyp: &[UttTimings], reference: &[UttTimings]) -> Result<WerReport> {
    let mut report = WerReport::default();
    for (h, r) in pair_by_id(hyp, reference, |h| &h.id, |r| &r.id)? {
        report.add(&edit_alignment(&r.word_list(), &h.word_list()), r.words.len());
    }
    Ok(report.finish())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccReport {
    pub taus_ms: Vec<u64>,
    /// `ACC(τ)` for each entry of `taus_ms`.
    pub accuracy: Vec<f64>,
    /// `N_w`, every reference word.
    pub reference_words: usize,
    /// Reference words paired with an identical hypothesis word.
    pub matched_words: usize,
}

impl AccReport {
    /// Fraction of reference words that were recognized at all, `ACC(∞)`.
    pub fn matched_fraction(&self) -> f64 {
        ratio(self.matched_words, self.reference_words)
    }
}

/// `0/0` counts as perfect.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn within(r: &WordTiming, h: &WordTiming, tau: u64) -> bool {
    r.start <= h.start + tau && h.end <= r.end + tau
}

/// `ACC(τ)` for every `τ` in `taus_ms`; timings are in ms.
pub fn acc_tau(hyp: &[UttTimings], reference: &[UttTimings], taus_ms: &[u64]) -> Result<AccReport> {
    let mut hits = vec![0usize; taus_ms.len()];
    let mut reference_words = 0;
    let mut matched_words = 0;
    for (h, r) in pair_by_id(hyp, reference, |h| &h.id, |r| &r.id)? {
        reference_words += r.words.len();
        for op in edit_alignment(&r.word_list(), &h.word_list()) {
            if let EditOp::Match { r: ri, h: hi } = op {
                matched_words += 1;
                for (k, &tau) in taus_ms.iter().enumerate() {
                    hits[k] += usize::from(within(&r.words[ri], &h.words[hi], tau));
                }
            }
        }
    }
    Ok(AccReport {
        taus_ms: taus_ms.to_vec(),
        accuracy: hits.iter().map(|&k| ratio(k, reference_words)).collect(),
        reference_words,
        matched_words,
    })
}

pub const TIMING_COLUMNS: [&str; 4] = ["utt_id", "word", "start_ms", "end_ms"];

/// Writes the word-timing TSV `utt_id word start_ms end_ms`.
pub fn write_timings_tsv(w: &mut impl Write, header: &[String], utts: &[UttTimings]) -> Result<()> {
    let mut out = String::new();
    for h in header {
        out.push_str(&format!("# {h}\n"));
    }
    out.push_str(&TIMING_COLUMNS.join("\t"));
    out.push('\n');
    for u in utts {
        for wt in &u.words {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", u.id, wt.word, wt.start, wt.end));
        }
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a word-timing TSV. Rows are grouped by id in order of first
/// appearance; the column-name line is optional. Utterances with no words
/// cannot be represented and are absent.
pub fn read_timings_tsv(r: impl BufRead) -> Result<Vec<UttTimings>> {
    let mut out: Vec<UttTimings> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let ln = i + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f == TIMING_COLUMNS {
            continue;
        }
        if f.len() != 4 {
            return Err(Error::parse(ln, "expected `utt_id word start_ms end_ms`"));
        }
        let num = |s: &str| s.trim().parse::<u64>().map_err(|_| Error::parse(ln, format!("bad time `{s}`")));
        let (start, end) = (num(f[2])?, num(f[3])?);
        if start > end {
            return Err(Error::parse(ln, "start_ms exceeds end_ms"));
        }
        let k = *index.entry(f[0].to_string()).or_insert_with(|| {
            out.push(UttTimings {
                id: f[0].to_string(),
                words: Vec::new(),
            });
            out.len() - 1
        });
        out[k].words.push(WordTiming {
            word: f[1].to_string(),
            start,
            end,
        });
    }
    Ok(out)
}
