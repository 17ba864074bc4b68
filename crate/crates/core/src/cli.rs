//! The `align-entropy` command line.
//!
//! Every subcommand resolves its settings from, in order of precedence,
//! command-line flags, the `[<subcommand>]` table of the `--config` TOML
//! file, and built-in defaults. Outputs without an explicit path go to
//! `--out-dir`, else `$ALIGN_ENTROPY_OUT_DIR`, else the working directory.
//! Each output file starts with `# config: <json>` holding the resolved
//! settings, and is written atomically.

use std::ffi::OsString;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::decode::{
    max_search, sum_search, write_decode_tsv, DecodeRecord, DecodeRule, read_decode_tsv, DEFAULT_BEAM,
};
use crate::error::{Error, Result};
use crate::eval::{
    acc_tau, read_timings_tsv, wer_of_timings, write_timings_tsv, UttTimings, WordSegmentation,
    COARSE_TAUS_MS, DEFAULT_FRAME_SHIFT_MS, FINE_TAUS_MS,
};
use crate::io::write_atomic;
use crate::lattice::{Label, LatticeKind};
use crate::model::train::par_map;
use crate::model::{
    corpus_entropy, generate_corpus, load_checkpoint, read_corpus, train, write_checkpoint, write_corpus,
    CorpusConfig, ModelConfig, SyntheticUtterance, ToyModel, TrainOptions, DEFAULT_LAMBDA,
};

pub const OUT_DIR_ENV: &str = "ALIGN_ENTROPY_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "align-entropy", version, about = "Alignment entropy, regularized training and decoding on synthetic data")]
pub struct Cli {
    /// TOML file supplying defaults; tables are named after subcommands.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for per-utterance work.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory for outputs given without a path.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic corpus and its reference word timings.
    Gen(GenArgs),
    /// Train a model, writing a checkpoint and a training curve.
    Train(TrainArgs),
    /// Per-utterance alignment entropy under a model.
    Entropy(EntropyArgs),
    /// Decode a corpus with max-search and/or sum-search.
    Decode(DecodeArgs),
    /// WER and alignment accuracy of decoded output.
    Eval(EvalArgs),
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub num_utts: Option<usize>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub min_frames: Option<usize>,
    #[arg(long)]
    pub max_frames: Option<usize>,
    #[arg(long)]
    pub min_labels: Option<usize>,
    #[arg(long)]
    pub max_labels: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub embedding_seed: Option<u64>,
    #[arg(long)]
    pub id_prefix: Option<String>,
    #[arg(long)]
    pub frame_shift_ms: Option<u64>,
    /// Corpus file [default: <out-dir>/corpus.txt]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reference timing TSV [default: <out-dir>/reference.tsv]
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainArgs {
    /// [default: <out-dir>/corpus.txt]
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Seeds the parameter initialization.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Train once per value; output names gain a `.lambda-<value>` suffix.
    #[arg(long, value_delimiter = ',', conflicts_with = "lambda")]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub context: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Past frames visible to the model.
    #[arg(long)]
    pub left_context: Option<usize>,
    /// Future frames visible to the model; 0 emulates a streaming model.
    #[arg(long)]
    pub right_context: Option<usize>,
    /// Checkpoint [default: <out-dir>/model.ckpt]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Curve CSV [default: <out-dir>/curve.csv]
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyArgs {
    /// [default: <out-dir>/model.ckpt]
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// [default: <out-dir>/corpus.txt]
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub kind: Option<String>,
    /// [default: <out-dir>/entropy.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeArgs {
    /// [default: <out-dir>/model.ckpt]
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// [default: <out-dir>/corpus.txt]
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub kind: Option<String>,
    /// `max`, `sum` or `both`.
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long)]
    pub beam: Option<usize>,
    /// Label cap per utterance [default: number of frames]
    #[arg(long)]
    pub max_labels: Option<usize>,
    /// [default: <out-dir>/decode.tsv]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalArgs {
    /// Decode TSV [default: <out-dir>/decode.tsv]
    #[arg(long)]
    pub hyp: Option<PathBuf>,
    /// Reference timing TSV [default: <out-dir>/reference.tsv]
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub frame_shift_ms: Option<u64>,
    /// Thresholds in ms [default: 0,10,..,50,100,200,..,600]
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<u64>>,
    /// Label separating words; without it every label is a word.
    #[arg(long)]
    pub boundary: Option<Label>,
    /// Accuracy CSV [default: <out-dir>/acc.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// WER CSV [default: <out-dir>/wer.csv]
    #[arg(long)]
    pub wer_out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    jobs: Option<usize>,
    out_dir: Option<PathBuf>,
    gen: GenArgs,
    train: TrainArgs,
    entropy: EntropyArgs,
    decode: DecodeArgs,
    eval: EvalArgs,
}

/// Fills every unset field of `$cli` from `$file`.
macro_rules! fill {
    ($cli:expr, $file:expr; $($f:ident),* $(,)?) => {
        $( if $cli.$f.is_none() { $cli.$f = $file.$f.take(); } )*
    };
}

#[derive(Serialize)]
struct GenRun {
    command: &'static str,
    seed: u64,
    num_utts: usize,
    corpus: CorpusConfig,
    frame_shift_ms: u64,
    out: PathBuf,
    reference: PathBuf,
}

#[derive(Serialize)]
struct TrainRun {
    command: &'static str,
    corpus: PathBuf,
    seed: u64,
    lambdas: Vec<f64>,
    steps: usize,
    step_size: f64,
    kind: LatticeKind,
    model: ModelConfig,
    jobs: usize,
    out: PathBuf,
    curve: PathBuf,
}

#[derive(Serialize)]
struct EntropyRun {
    command: &'static str,
    model: PathBuf,
    corpus: PathBuf,
    kind: LatticeKind,
    jobs: usize,
    out: PathBuf,
}

#[derive(Serialize)]
struct DecodeRun {
    command: &'static str,
    model: PathBuf,
    corpus: PathBuf,
    kind: LatticeKind,
    rules: Vec<DecodeRule>,
    beam: usize,
    max_labels: Option<usize>,
    jobs: usize,
    out: PathBuf,
}

#[derive(Serialize)]
struct EvalRun {
    command: &'static str,
    hyp: PathBuf,
    reference: PathBuf,
    frame_shift_ms: u64,
    taus_ms: Vec<u64>,
    boundary: Option<Label>,
    out: PathBuf,
    wer_out: PathBuf,
}

fn header<T: Serialize>(run: &T) -> Vec<String> {
    vec![format!("config: {}", serde_json::to_string(run).expect("config serializes"))]
}

fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path).map(BufReader::new).map_err(|e| with_path(path, e))
}

fn load_corpus(path: &Path) -> Result<Vec<SyntheticUtterance>> {
    read_corpus(open(path)?)
}

fn load_model(path: &Path) -> Result<ToyModel> {
    load_checkpoint(path).map_err(|e| match e {
        Error::Io(io) => with_path(path, io),
        other => other,
    })
}

fn save(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| with_path(dir, e))?;
    }
    write_atomic(path, bytes).map_err(|e| match e {
        Error::Io(io) => with_path(path, io),
        other => other,
    })
}

fn parse_kind(s: Option<String>) -> Result<LatticeKind> {
    s.map_or(Ok(LatticeKind::FrameDependent), |k| k.parse())
}

/// `model.ckpt` -> `model.lambda-0.01.ckpt`
fn sweep_path(path: &Path, lambda: f64) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.lambda-{lambda}.{}", ext.to_string_lossy()),
        None => format!("{stem}.lambda-{lambda}"),
    };
    path.with_file_name(name)
}

struct Ctx {
    jobs: usize,
    out_dir: PathBuf,
}

impl Ctx {
    fn path(&self, given: Option<PathBuf>, default_name: &str) -> PathBuf {
        given.unwrap_or_else(|| self.out_dir.join(default_name))
    }
}

fn cmd_gen(ctx: &Ctx, a: GenArgs) -> Result<()> {
    let d = CorpusConfig::default();
    let corpus = CorpusConfig {
        vocab_size: a.vocab_size.unwrap_or(d.vocab_size),
        feature_dim: a.feature_dim.unwrap_or(d.feature_dim),
        min_frames: a.min_frames.unwrap_or(d.min_frames),
        max_frames: a.max_frames.unwrap_or(d.max_frames),
        min_labels: a.min_labels.unwrap_or(d.min_labels),
        max_labels: a.max_labels.unwrap_or(d.max_labels),
        noise: a.noise.unwrap_or(d.noise),
        embedding_seed: a.embedding_seed.unwrap_or(d.embedding_seed),
        id_prefix: a.id_prefix.unwrap_or(d.id_prefix),
    };
    let run = GenRun {
        command: "gen",
        seed: a.seed.unwrap_or(0),
        num_utts: a.num_utts.unwrap_or(200),
        corpus,
        frame_shift_ms: a.frame_shift_ms.unwrap_or(DEFAULT_FRAME_SHIFT_MS),
        out: ctx.path(a.out, "corpus.txt"),
        reference: ctx.path(a.reference, "reference.tsv"),
    };
    let utts = generate_corpus(&run.corpus, run.seed, run.num_utts)?;
    let hdr = header(&run);
    let mut buf = Vec::new();
    write_corpus(&mut buf, &hdr, &utts)?;
    save(&run.out, &buf)?;
    let refs: Vec<UttTimings> = utts
        .iter()
        .map(|u| UttTimings::from_reference(u, run.frame_shift_ms))
        .collect();
    let mut buf = Vec::new();
    write_timings_tsv(&mut buf, &hdr, &refs)?;
    save(&run.reference, &buf)?;
    println!("wrote {} utterances to {}", utts.len(), run.out.display());
    println!("wrote reference timings to {}", run.reference.display());
    Ok(())
}

fn cmd_train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let corpus_path = ctx.path(a.corpus, "corpus.txt");
    let corpus = load_corpus(&corpus_path)?;
    let d = ModelConfig::default();
    let feature_dim = corpus.first().map_or(d.feature_dim, |u| u.features.dim());
    let model = ModelConfig {
        vocab_size: a.vocab_size.unwrap_or(d.vocab_size),
        context: a.context.unwrap_or(d.context),
        feature_dim,
        hidden: a.hidden.unwrap_or(d.hidden),
        left_context: a.left_context.unwrap_or(d.left_context),
        right_context: a.right_context.unwrap_or(d.right_context),
    };
    let defaults = TrainOptions::default();
    let sweep = a.lambdas.is_some();
    let lambdas = a.lambdas.unwrap_or_else(|| vec![a.lambda.unwrap_or(DEFAULT_LAMBDA)]);
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("lambda sweep is empty".into()));
    }
    let run = TrainRun {
        command: "train",
        corpus: corpus_path,
        seed: a.seed.unwrap_or(0),
        lambdas,
        steps: a.steps.unwrap_or(defaults.steps),
        step_size: a.step_size.unwrap_or(defaults.step_size),
        kind: parse_kind(a.kind)?,
        model,
        jobs: ctx.jobs,
        out: ctx.path(a.out, "model.ckpt"),
        curve: ctx.path(a.curve, "curve.csv"),
    };
    if run.steps == 0 {
        return Err(Error::InvalidConfig("steps must be at least 1".into()));
    }
    let hdr = header(&run);
    let init = ToyModel::init(run.model, run.seed)?;
    for &lambda in &run.lambdas {
        let opts = TrainOptions {
            lambda,
            steps: run.steps,
            step_size: run.step_size,
            kind: run.kind,
            jobs: run.jobs,
        };
        let (trained, curve) = train(&init, &corpus, &opts)?;
        let (ckpt, curve_path) = if sweep {
            (sweep_path(&run.out, lambda), sweep_path(&run.curve, lambda))
        } else {
            (run.out.clone(), run.curve.clone())
        };
        let mut csv = String::new();
        for h in &hdr {
            csv.push_str(&format!("# {h}\n"));
        }
        csv.push_str("lambda,step,loss,mean_entropy,mean_normalized_entropy\n");
        for p in &curve {
            csv.push_str(&format!(
                "{lambda},{},{},{},{}\n",
                p.step, p.loss, p.mean_entropy, p.mean_normalized_entropy
            ));
        }
        save(&curve_path, csv.as_bytes())?;
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &hdr, &trained)?;
        save(&ckpt, &buf)?;
        if let Some(last) = curve.last() {
            println!(
                "lambda={lambda} loss={} mean_entropy={} mean_normalized_entropy={} checkpoint={}",
                last.loss,
                last.mean_entropy,
                last.mean_normalized_entropy,
                ckpt.display()
            );
        }
    }
    Ok(())
}

fn cmd_entropy(ctx: &Ctx, a: EntropyArgs) -> Result<()> {
    let run = EntropyRun {
        command: "entropy",
        model: ctx.path(a.model, "model.ckpt"),
        corpus: ctx.path(a.corpus, "corpus.txt"),
        kind: parse_kind(a.kind)?,
        jobs: ctx.jobs,
        out: ctx.path(a.out, "entropy.csv"),
    };
    let model = load_model(&run.model)?;
    let corpus = load_corpus(&run.corpus)?;
    let mut rows = corpus_entropy(&model, &corpus, run.kind, run.jobs)?;
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    let mut csv = String::new();
    for h in header(&run) {
        csv.push_str(&format!("# {h}\n"));
    }
    csv.push_str("utt_id,T,U,entropy,max_entropy,normalized_entropy\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.id, r.frames, r.labels, r.entropy, r.max_entropy, r.normalized_entropy
        ));
    }
    save(&run.out, csv.as_bytes())?;
    let n = rows.len().max(1) as f64;
    println!(
        "utterances={} mean_entropy={} mean_normalized_entropy={}",
        rows.len(),
        rows.iter().map(|r| r.entropy).sum::<f64>() / n,
        rows.iter().map(|r| r.normalized_entropy).sum::<f64>() / n
    );
    Ok(())
}

fn cmd_decode(ctx: &Ctx, a: DecodeArgs) -> Result<()> {
    let rules = match a.rule.as_deref().unwrap_or("both") {
        "both" => vec![DecodeRule::Max, DecodeRule::Sum],
        r => vec![r.parse()?],
    };
    let run = DecodeRun {
        command: "decode",
        model: ctx.path(a.model, "model.ckpt"),
        corpus: ctx.path(a.corpus, "corpus.txt"),
        kind: parse_kind(a.kind)?,
        rules,
        beam: a.beam.unwrap_or(DEFAULT_BEAM),
        max_labels: a.max_labels,
        jobs: ctx.jobs,
        out: ctx.path(a.out, "decode.tsv"),
    };
    let model = load_model(&run.model)?;
    let mut corpus = load_corpus(&run.corpus)?;
    corpus.sort_by(|a, b| a.id.cmp(&b.id));
    let per_utt = par_map(&corpus, run.jobs, |u| {
        run.rules
            .iter()
            .map(|rule| {
                let r = match rule {
                    DecodeRule::Max => max_search(&model, &u.features, run.kind, run.max_labels)?,
                    DecodeRule::Sum => sum_search(&model, &u.features, run.kind, run.beam, run.max_labels)?,
                };
                Ok(DecodeRecord::new(u.id.clone(), &r))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let records: Vec<DecodeRecord> = per_utt.into_iter().flatten().collect();
    let mut buf = Vec::new();
    write_decode_tsv(&mut buf, &header(&run), &records)?;
    save(&run.out, &buf)?;
    for rule in &run.rules {
        let ll: f64 = records.iter().filter(|r| r.rule == *rule).map(|r| r.score).sum();
        println!("rule={rule} utterances={} total_score={ll}", corpus.len());
    }
    Ok(())
}

fn default_taus() -> Vec<u64> {
    let mut t: Vec<u64> = FINE_TAUS_MS.iter().chain(&COARSE_TAUS_MS).copied().collect();
    t.sort_unstable();
    t.dedup();
    t
}

fn cmd_eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let run = EvalRun {
        command: "eval",
        hyp: ctx.path(a.hyp, "decode.tsv"),
        reference: ctx.path(a.reference, "reference.tsv"),
        frame_shift_ms: a.frame_shift_ms.unwrap_or(DEFAULT_FRAME_SHIFT_MS),
        taus_ms: a.taus.unwrap_or_else(default_taus),
        boundary: a.boundary,
        out: ctx.path(a.out, "acc.csv"),
        wer_out: ctx.path(a.wer_out, "wer.csv"),
    };
    let records = read_decode_tsv(open(&run.hyp)?)?;
    let reference = read_timings_tsv(open(&run.reference)?)?;
    let seg = WordSegmentation {
        boundary: run.boundary,
    };
    let hdr = header(&run);
    let mut acc_csv = String::new();
    let mut wer_csv = String::new();
    for h in &hdr {
        acc_csv.push_str(&format!("# {h}\n"));
        wer_csv.push_str(&format!("# {h}\n"));
    }
    acc_csv.push_str("rule,tau_ms,acc,reference_words,matched_words\n");
    wer_csv.push_str("rule,wer,substitutions,insertions,deletions,reference_words\n");
    for rule in [DecodeRule::Max, DecodeRule::Sum] {
        let hyp = records
            .iter()
            .filter(|r| r.rule == rule)
            .map(|r| UttTimings::from_decode(r, &seg, run.frame_shift_ms))
            .collect::<Result<Vec<_>>>()?;
        if hyp.is_empty() {
            continue;
        }
        let w = wer_of_timings(&hyp, &reference)?;
        wer_csv.push_str(&format!(
            "{rule},{},{},{},{},{}\n",
            w.wer, w.substitutions, w.insertions, w.deletions, w.reference_words
        ));
        let acc = acc_tau(&hyp, &reference, &run.taus_ms)?;
        for (tau, v) in acc.taus_ms.iter().zip(&acc.accuracy) {
            acc_csv.push_str(&format!(
                "{rule},{tau},{v},{},{}\n",
                acc.reference_words, acc.matched_words
            ));
        }
        println!(
            "rule={rule} wer={} acc@0={}",
            w.wer,
            acc.accuracy.first().copied().unwrap_or(f64::NAN)
        );
    }
    save(&run.out, acc_csv.as_bytes())?;
    save(&run.wer_out, wer_csv.as_bytes())?;
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let mut file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| with_path(path, e))?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {}", path.display(), e.message())))?
        }
        None => FileConfig::default(),
    };
    let out_dir = cli
        .out_dir
        .or(file.out_dir.take())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let jobs = cli.jobs.or(file.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(Error::InvalidConfig("jobs must be at least 1".into()));
    }
    let ctx = Ctx { jobs, out_dir };
    match cli.command {
        Command::Gen(mut a) => {
            let f = &mut file.gen;
            fill!(a, f; seed, num_utts, vocab_size, feature_dim, min_frames, max_frames, min_labels,
                max_labels, noise, embedding_seed, id_prefix, frame_shift_ms, out, reference);
            cmd_gen(&ctx, a)
        }
        Command::Train(mut a) => {
            let f = &mut file.train;
            if a.lambda.is_some() {
                f.lambdas = None;
            }
            if a.lambdas.is_some() {
                f.lambda = None;
            }
            fill!(a, f; corpus, seed, lambda, lambdas, steps, step_size, kind, vocab_size, context,
                hidden, left_context, right_context, out, curve);
            if a.lambda.is_some() && a.lambdas.is_some() {
                return Err(Error::InvalidConfig("set either lambda or lambdas, not both".into()));
            }
            cmd_train(&ctx, a)
        }
        Command::Entropy(mut a) => {
            let f = &mut file.entropy;
            fill!(a, f; model, corpus, kind, out);
            cmd_entropy(&ctx, a)
        }
        Command::Decode(mut a) => {
            let f = &mut file.decode;
            fill!(a, f; model, corpus, kind, rule, beam, max_labels, out);
            cmd_decode(&ctx, a)
        }
        Command::Eval(mut a) => {
            let f = &mut file.eval;
            fill!(a, f; hyp, reference, frame_shift_ms, taus, boundary, out, wer_out);
            cmd_eval(&ctx, a)
        }
    }
}

fn one_line(s: impl ToString) -> String {
    s.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
/// Failures print one `error: kind=<code> msg=<text>` line to stderr.
pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("error: kind=usage msg={}", one_line(e.render()));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: kind={} msg={}", e.code(), one_line(&e));
            ExitCode::from(1)
        }
    }
}

pub fn main() -> ExitCode {
    main_from(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_subcommand() {
        for args in [
            vec!["x", "gen", "--seed", "3", "--noise", "0.1"],
            vec!["x", "train", "--lambdas", "0,0.01,0.1", "--steps", "5"],
            vec!["x", "--jobs", "2", "entropy", "--kind", "laf"],
            vec!["x", "decode", "--rule", "sum", "--beam", "4"],
            vec!["x", "eval", "--taus", "0,10,20", "--out-dir", "o"],
        ] {
            Cli::try_parse_from(args).unwrap();
        }
        assert!(Cli::try_parse_from(["x", "train", "--lambda", "0", "--lambdas", "0,1"]).is_err());
    }

    #[test]
    fn file_config_rejects_unknown_keys() {
        assert!(toml::from_str::<FileConfig>("[train]\nlambda = 0.5\nsteps = 3\n").is_ok());
        assert!(toml::from_str::<FileConfig>("[train]\nlamda = 0.5\n").is_err());
    }

    #[test]
    fn sweep_names() {
        assert_eq!(sweep_path(Path::new("a/model.ckpt"), 0.01), PathBuf::from("a/model.lambda-0.01.ckpt"));
        assert_eq!(sweep_path(Path::new("curve"), 0.0), PathBuf::from("curve.lambda-0"));
    }

    #[test]
    fn default_tau_grid() {
        assert_eq!(default_taus(), vec![0, 10, 20, 30, 40, 50, 100, 200, 300, 400, 500, 600]);
    }
}
