//! Synthetic utterances with known label timing.
//!
//! Each label owns a contiguous span of frames whose features are that
//! label's embedding plus Gaussian noise; frames between spans are pure
//! noise around the origin. Adjacent labels never repeat, so a scorer with
//! label context can tell a new word from one it has already emitted.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Label;

/// Row-major `frames × dim` feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    frames: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(frames: usize, dim: usize, data: Vec<f64>) -> Result<Features> {
        if data.len() != frames * dim {
            return Err(Error::DimMismatch {
                what: "feature matrix",
                expected: frames * dim,
                found: data.len(),
            });
        }
        Ok(Features { frames, dim, data })
    }

    pub fn num_frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticUtterance {
    pub id: String,
    pub features: Features,
    pub labels: Vec<Label>,
    /// Inclusive 0-based `(start, end)` frame span of each label.
    pub spans: Vec<(usize, usize)>,
}

impl SyntheticUtterance {
    pub fn num_frames(&self) -> usize {
        self.features.num_frames()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub vocab_size: usize,
    pub feature_dim: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub min_labels: usize,
    pub max_labels: usize,
    /// Standard deviation of the additive feature noise.
    pub noise: f64,
    /// Seeds the label embeddings; corpora meant to be scored by the same
    /// model must share it.
    pub embedding_seed: u64,
    pub id_prefix: String,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            vocab_size: 2,
            feature_dim: 8,
            min_frames: 20,
            max_frames: 40,
            min_labels: 3,
            max_labels: 8,
            noise: 0.2,
            embedding_seed: 0,
            id_prefix: "utt".into(),
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.vocab_size < 2 || self.vocab_size > 26 {
            return bad("corpus vocab_size must be in 2..=26");
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive");
        }
        if self.min_frames > self.max_frames || self.min_labels > self.max_labels {
            return bad("ranges must satisfy min <= max");
        }
        if self.max_labels > self.min_frames {
            return bad("max_labels must not exceed min_frames");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be a finite non-negative number");
        }
        Ok(())
    }

    /// One embedding row per label.
    pub fn embeddings(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.embedding_seed);
        (0..self.vocab_size)
            .map(|_| {
                (0..self.feature_dim)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect()
            })
            .collect()
    }
}

pub fn generate_corpus(config: &CorpusConfig, seed: u64, n: usize) -> Result<Vec<SyntheticUtterance>> {
    config.validate()?;
    let embeddings = config.embeddings();
    let noise = Normal::new(0.0, config.noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = config.vocab_size as Label;
    let d = config.feature_dim;

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let frames = rng.random_range(config.min_frames..=config.max_frames);
        let num_labels = rng.random_range(config.min_labels..=config.max_labels.min(frames));

        let mut labels: Vec<Label> = Vec::with_capacity(num_labels);
        for _ in 0..num_labels {
            let l = match labels.last() {
                None => rng.random_range(0..v),
                Some(&prev) => (prev + rng.random_range(1..v)) % v,
            };
            labels.push(l);
        }

        // buckets: gap_0, span_1, gap_1, ..., span_U, gap_U; spans hold >= 1 frame
        let mut sizes = vec![0usize; 2 * num_labels + 1];
        for s in sizes.iter_mut().skip(1).step_by(2) {
            *s = 1;
        }
        for _ in 0..frames - num_labels {
            let b = rng.random_range(0..sizes.len());
            sizes[b] += 1;
        }
        let mut owner: Vec<Option<Label>> = Vec::with_capacity(frames);
        let mut spans = Vec::with_capacity(num_labels);
        for (b, &size) in sizes.iter().enumerate() {
            let label = (b % 2 == 1).then(|| labels[b / 2]);
            if label.is_some() {
                spans.push((owner.len(), owner.len() + size - 1));
            }
            owner.extend(std::iter::repeat_n(label, size));
        }

        let mut data = Vec::with_capacity(frames * d);
        for o in &owner {
            for k in 0..d {
                let base = o.map_or(0.0, |l| embeddings[l as usize][k]);
                data.push(base + noise.sample(&mut rng));
            }
        }
        out.push(SyntheticUtterance {
            id: format!("{}{:05}", config.id_prefix, i),
            features: Features::new(frames, d, data)?,
            labels,
            spans,
        });
    }
    Ok(out)
}

/// Writes the corpus text format:
///
/// ```text
/// utt <id> <frames> <dim> <num_labels>
/// labels <l_1> ... <l_U>
/// spans <s_1>:<e_1> ... <s_U>:<e_U>
/// <frames lines of dim values>
/// ```
///
/// `header` lines are emitted first, each prefixed with `# `.
pub fn write_corpus(w: &mut impl Write, header: &[String], corpus: &[SyntheticUtterance]) -> Result<()> {
    let mut buf = String::new();
    for h in header {
        writeln!(buf, "# {h}").unwrap();
    }
    for utt in corpus {
        let f = &utt.features;
        writeln!(buf, "utt {} {} {} {}", utt.id, f.num_frames(), f.dim(), utt.labels.len()).unwrap();
        buf.push_str("labels");
        for l in &utt.labels {
            write!(buf, " {l}").unwrap();
        }
        buf.push_str("\nspans");
        for (s, e) in &utt.spans {
            write!(buf, " {s}:{e}").unwrap();
        }
        buf.push('\n');
        for t in 0..f.num_frames() {
            let row: Vec<String> = f.frame(t).iter().map(|x| x.to_string()).collect();
            buf.push_str(&row.join(" "));
            buf.push('\n');
        }
    }
    w.write_all(buf.as_bytes())?;
    Ok(())
}

/// Content lines of a text file, skipping blanks and `#` comments.
pub(crate) struct ContentLines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> ContentLines<R> {
    pub(crate) fn new(r: R) -> Self {
        ContentLines {
            inner: r.lines(),
            line_no: 0,
        }
    }

    pub(crate) fn next_line(&mut self) -> Result<Option<(usize, String)>> {
        for line in self.inner.by_ref() {
            self.line_no += 1;
            let line = line?;
            if !line.trim().is_empty() && !line.starts_with('#') {
                return Ok(Some((self.line_no, line)));
            }
        }
        Ok(None)
    }

    pub(crate) fn expect(&mut self, what: &str) -> Result<(usize, String)> {
        self.next_line()?
            .ok_or_else(|| Error::parse(self.line_no, format!("unexpected end of input, expected {what}")))
    }
}

pub fn read_corpus(r: impl BufRead) -> Result<Vec<SyntheticUtterance>> {
    let mut lines = ContentLines::new(r);
    let mut out = Vec::new();
    while let Some((ln, head)) = lines.next_line()? {
        let h: Vec<&str> = head.split_whitespace().collect();
        if h.len() != 5 || h[0] != "utt" {
            return Err(Error::parse(ln, "expected `utt <id> <frames> <dim> <num_labels>`"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(ln, format!("bad number `{s}`")));
        let (frames, dim, num_labels) = (num(h[2])?, num(h[3])?, num(h[4])?);

        let (ln, lab) = lines.expect("labels")?;
        let mut f = lab.split_whitespace();
        if f.next() != Some("labels") {
            return Err(Error::parse(ln, "expected `labels`"));
        }
        let labels = f
            .map(|s| s.parse::<Label>().map_err(|_| Error::parse(ln, format!("bad label `{s}`"))))
            .collect::<Result<Vec<_>>>()?;

        let (ln, sp) = lines.expect("spans")?;
        let mut f = sp.split_whitespace();
        if f.next() != Some("spans") {
            return Err(Error::parse(ln, "expected `spans`"));
        }
        let spans = f
            .map(|s| {
                let (a, b) = s.split_once(':').ok_or_else(|| Error::parse(ln, "span must be `start:end`"))?;
                Ok((num(a)?, num(b)?))
            })
            .collect::<Result<Vec<_>>>()?;
        if labels.len() != num_labels || spans.len() != num_labels {
            return Err(Error::parse(ln, "label/span count disagrees with header"));
        }

        let mut data = Vec::with_capacity(frames * dim);
        for _ in 0..frames {
            let (ln, row) = lines.expect("feature row")?;
            let before = data.len();
            for s in row.split_whitespace() {
                data.push(s.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad value `{s}`")))?);
            }
            if data.len() - before != dim {
                return Err(Error::parse(ln, format!("feature row must have {dim} values")));
            }
        }
        out.push(SyntheticUtterance {
            id: h[1].to_string(),
            features: Features::new(frames, dim, data)?,
            labels,
            spans,
        });
    }
    Ok(out)
}
