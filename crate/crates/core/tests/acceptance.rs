//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line to stderr
//! (uncaptured, so it shows up in plain `cargo test` output) and then asserts.

use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use align_entropy::decode::{max_search, sum_search, DEFAULT_BEAM};
use align_entropy::entropy::{alignment_entropy, entropy_grad};
use align_entropy::eval::{acc_tau, edit_alignment, wer, word_timings, AccReport, UttTimings, WordSegmentation, WordTiming};
use align_entropy::lattice::{
    build_lattice, Label, Lattice, LatticeKind, LatticeState, Symbol, DEFAULT_ENUMERATION_CAP,
};
use align_entropy::model::{
    generate_corpus, loss_and_grad, train, CorpusConfig, CurvePoint, Features, ModelConfig, SyntheticUtterance,
    ToyModel, TrainOptions,
};
use align_entropy::numerics::log_sum_exp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n:>2} {verdict} {name}: {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn brute_force_entropy(lat: &Lattice) -> f64 {
    let paths = lat.enumerate_paths(DEFAULT_ENUMERATION_CAP).unwrap();
    let weights: Vec<f64> = paths.iter().map(|(_, w)| *w).collect();
    let log_z = log_sum_exp(&weights);
    weights
        .iter()
        .map(|w| {
            let p = (w - log_z).exp();
            if p > 0.0 {
                -p * (w - log_z)
            } else {
                0.0
            }
        })
        .sum()
}

fn random_lattice(rng: &mut ChaCha8Rng, kind: LatticeKind, t: usize, u: usize) -> Lattice {
    let labels: Vec<Label> = (0..u).map(|_| rng.random_range(0..4)).collect();
    let mut draw = || rng.random_range(-6.0..1.0);
    let weights: Vec<f64> = (0..4 * (t + 1) * (u + 1) + 4).map(|_| draw()).collect();
    let scorer = |s: LatticeState, sym: Symbol| {
        let k = sym.label().map_or(0, |_| 1);
        weights[2 * (s.t * (u + 1) + s.u) + k]
    };
    build_lattice(kind, t, &labels, &scorer).unwrap()
}

#[test]
fn c01_entropy_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut count, mut worst) = (0, 0f64);
    for i in 0..1200 {
        let kind = if i % 2 == 0 {
            LatticeKind::FrameDependent
        } else {
            LatticeKind::LabelAndFrame
        };
        let t = rng.random_range(1..=10);
        let u_max = if kind == LatticeKind::FrameDependent { t.min(5) } else { 5 };
        let u = rng.random_range(0..=u_max);
        let lat = random_lattice(&mut rng, kind, t, u);
        let h = alignment_entropy(&lat).unwrap().entropy;
        worst = worst.max((h - brute_force_entropy(&lat)).abs());
        count += 1;
    }
    let elapsed = start.elapsed();
    report(
        1,
        "entropy oracle equivalence",
        worst <= 1e-8 && elapsed < Duration::from_secs(30),
        &format!("{count} lattices, max |error| {worst:.2e}, {elapsed:.2?}"),
    );
}

fn binomial(n: usize, k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * (n + 1 - i) as f64 / i as f64)
}

#[test]
fn c02_maximum_entropy_closed_form() {
    let mut worst = 0f64;
    let mut count = 0;
    for t in 0..=12 {
        for u in 0..=t {
            let labels: Vec<Label> = (0..u as Label).map(|l| l % 3).collect();
            let lat = build_lattice(LatticeKind::FrameDependent, t, &labels, &|_: LatticeState, _: Symbol| 0.0).unwrap();
            let h = alignment_entropy(&lat).unwrap().entropy;
            worst = worst.max((h - binomial(t, u).ln()).abs());
            count += 1;
        }
    }
    report(
        2,
        "maximum entropy closed form",
        worst <= 1e-9,
        &format!("{count} (T, U) pairs, max |H - log C(T,U)| {worst:.2e}"),
    );
}

/// Forward sweep in plain probability space; `scale_by_alpha` selects the
/// corrected accumulator update `A += ω·(A_src + α_src·log ω)` over the
/// variant without the `α_src` factor.
fn recursion_entropy(lat: &Lattice, scale_by_alpha: bool) -> f64 {
    let mut arcs: Vec<_> = lat.arcs().to_vec();
    arcs.sort_by_key(|a| a.src);
    let mut alpha = std::collections::BTreeMap::new();
    let mut acc = std::collections::BTreeMap::new();
    alpha.insert(lat.initial_state(), 1.0);
    acc.insert(lat.initial_state(), 0.0);
    for arc in arcs {
        let (a_src, acc_src) = (alpha[&arc.src], acc[&arc.src]);
        let w = arc.weight.exp();
        let log_term = if scale_by_alpha { a_src * arc.weight } else { arc.weight };
        *alpha.entry(arc.dst).or_insert(0.0) += a_src * w;
        *acc.entry(arc.dst).or_insert(0.0) += w * (acc_src + log_term);
    }
    let f = lat.final_state();
    -acc[&f] / alpha[&f] + alpha[&f].ln()
}

#[test]
fn c03_corrected_recursion_regression() {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/two_path.lat")).unwrap();
    let lat = Lattice::from_text(&text).unwrap();
    let oracle = brute_force_entropy(&lat);
    let printed = recursion_entropy(&lat, false);
    let corrected = recursion_entropy(&lat, true);
    let library = alignment_entropy(&lat).unwrap().entropy;
    let pass = lat.enumerate_paths(10).unwrap().len() == 2
        && (printed - oracle).abs() > 1e-8
        && (corrected - oracle).abs() <= 1e-8
        && (library - oracle).abs() <= 1e-8;
    report(
        3,
        "corrected recursion regression",
        pass,
        &format!("oracle {oracle:.12}, without alpha factor {printed:.12}, corrected {corrected:.12}, library {library:.12}"),
    );
}

fn tiny_model_config() -> ModelConfig {
    ModelConfig {
        vocab_size: 3,
        context: 1,
        feature_dim: 3,
        hidden: 4,
        left_context: 1,
        right_context: 1,
    }
}

#[test]
fn c04_gradient_checks() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-5;
    let mut worst_entropy = 0f64;
    for i in 0..20 {
        let kind = if i % 2 == 0 {
            LatticeKind::FrameDependent
        } else {
            LatticeKind::LabelAndFrame
        };
        let t = rng.random_range(1..=6);
        let u = rng.random_range(0..=t.min(3));
        let lat = random_lattice(&mut rng, kind, t, u);
        let grad = entropy_grad(&lat).unwrap();
        let base: Vec<f64> = lat.arcs().iter().map(|a| a.weight).collect();
        for (e, g) in grad.iter().enumerate() {
            let mut w = base.clone();
            w[e] += h;
            let up = alignment_entropy(&lat.with_weights(&w)).unwrap().entropy;
            w[e] -= 2.0 * h;
            let down = alignment_entropy(&lat.with_weights(&w)).unwrap().entropy;
            worst_entropy = worst_entropy.max(((up - down) / (2.0 * h) - g).abs());
        }
    }

    let mut worst_loss = 0f64;
    for i in 0..20u64 {
        let kind = if i % 2 == 0 {
            LatticeKind::FrameDependent
        } else {
            LatticeKind::LabelAndFrame
        };
        let cfg = tiny_model_config();
        let mut model = ToyModel::init(cfg, 100 + i).unwrap();
        model.params.scale(5.0);
        let corpus_cfg = CorpusConfig {
            vocab_size: cfg.vocab_size,
            feature_dim: cfg.feature_dim,
            min_frames: 3,
            max_frames: 8,
            min_labels: 1,
            max_labels: 3,
            ..CorpusConfig::default()
        };
        let batch = generate_corpus(&corpus_cfg, 200 + i, 2).unwrap();
        let lambda = 0.5;
        let (_, grad, _) = loss_and_grad(&model, &batch, lambda, kind).unwrap();
        let analytic: Vec<f64> = grad.values().copied().collect();
        for (k, g) in analytic.iter().enumerate() {
            let mut probe = model.clone();
            *probe.params.values_mut().nth(k).unwrap() += h;
            let up = loss_and_grad(&probe, &batch, lambda, kind).unwrap().0;
            *probe.params.values_mut().nth(k).unwrap() -= 2.0 * h;
            let down = loss_and_grad(&probe, &batch, lambda, kind).unwrap().0;
            worst_loss = worst_loss.max(((up - down) / (2.0 * h) - g).abs());
        }
    }
    let elapsed = start.elapsed();
    report(
        4,
        "gradient checks",
        worst_entropy <= 1e-4 && worst_loss <= 1e-4 && elapsed < Duration::from_secs(60),
        &format!("20 lattices max |error| {worst_entropy:.2e}, 20 model batches max |error| {worst_loss:.2e}, {elapsed:.2?}"),
    );
}

// Shared setup for the training criteria.
const TRAIN_UTTS: usize = 200;
const HELDOUT_UTTS: usize = 200;
const CORPUS_SEED: u64 = 1;
const HELDOUT_SEED: u64 = 2;
const INIT_SEED: u64 = 0;
const KIND: LatticeKind = LatticeKind::FrameDependent;

fn corpus_config() -> CorpusConfig {
    CorpusConfig::default()
}

fn model_config() -> ModelConfig {
    ModelConfig::default()
}

struct Trained {
    baseline: ToyModel,
    regularized: ToyModel,
    baseline_curve: Vec<CurvePoint>,
    regularized_curve: Vec<CurvePoint>,
    heldout: Vec<SyntheticUtterance>,
    elapsed: Duration,
}

fn trained() -> &'static Trained {
    static TRAINED: OnceLock<Trained> = OnceLock::new();
    TRAINED.get_or_init(|| {
        let corpus = generate_corpus(&corpus_config(), CORPUS_SEED, TRAIN_UTTS).unwrap();
        let heldout_cfg = CorpusConfig {
            id_prefix: "heldout".into(),
            ..corpus_config()
        };
        let heldout = generate_corpus(&heldout_cfg, HELDOUT_SEED, HELDOUT_UTTS).unwrap();
        let init = ToyModel::init(model_config(), INIT_SEED).unwrap();
        let start = Instant::now();
        let run = |lambda: f64| {
            let opts = TrainOptions {
                lambda,
                kind: KIND,
                jobs: 1,
                ..TrainOptions::default()
            };
            train(&init, &corpus, &opts).unwrap()
        };
        let (baseline, baseline_curve) = run(0.0);
        let (regularized, regularized_curve) = run(0.01);
        Trained {
            baseline,
            regularized,
            baseline_curve,
            regularized_curve,
            heldout,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn c05_regularization_effect() {
    let t = trained();
    let (b0, b1) = (t.baseline_curve.first().unwrap(), t.baseline_curve.last().unwrap());
    let (r0, r1) = (t.regularized_curve.first().unwrap(), t.regularized_curve.last().unwrap());
    let ratio = r1.mean_normalized_entropy / b1.mean_normalized_entropy;
    let pass = ratio <= 0.5
        && b0.mean_normalized_entropy >= 0.95
        && r0.mean_normalized_entropy >= 0.95
        && t.elapsed < Duration::from_secs(600);
    report(
        5,
        "regularization effect",
        pass,
        &format!(
            "normalized entropy start {:.4}/{:.4}, final lambda=0 {:.5} vs lambda=0.01 {:.5}, ratio {ratio:.3} (need <= 0.5), \
             final entropy {:.4} vs {:.4} nats, training {:.1?}",
            b0.mean_normalized_entropy,
            r0.mean_normalized_entropy,
            b1.mean_normalized_entropy,
            r1.mean_normalized_entropy,
            b1.mean_entropy,
            r1.mean_entropy,
            t.elapsed
        ),
    );
}

fn agreement_rate(model: &ToyModel, utts: &[SyntheticUtterance]) -> f64 {
    let same = utts
        .iter()
        .filter(|u| {
            let m = max_search(model, &u.features, KIND, None).unwrap();
            let s = sum_search(model, &u.features, KIND, DEFAULT_BEAM, None).unwrap();
            m.labels == s.labels
        })
        .count();
    same as f64 / utts.len() as f64
}

#[test]
fn c06_decoding_agreement() {
    let t = trained();
    let regularized = agreement_rate(&t.regularized, &t.heldout);
    let baseline = agreement_rate(&t.baseline, &t.heldout);
    report(
        6,
        "decoding agreement",
        regularized >= 0.99 && baseline <= regularized,
        &format!(
            "max vs sum (beam {DEFAULT_BEAM}) identical on {:.1}% of {} held-out utterances with lambda=0.01, {:.1}% with lambda=0",
            100.0 * regularized,
            t.heldout.len(),
            100.0 * baseline
        ),
    );
}

fn all_label_sequences(vocab: Label, max_len: usize) -> Vec<Vec<Label>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for prefix in &frontier {
            for l in 0..vocab {
                let mut y: Vec<Label> = prefix.clone();
                y.push(l);
                next.push(y);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[test]
fn c07_exact_search_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = ModelConfig {
        vocab_size: 2,
        context: 1,
        feature_dim: 3,
        hidden: 4,
        left_context: 1,
        right_context: 1,
    };
    let mut mismatches = 0;
    let mut worst = 0f64;
    for i in 0..100u64 {
        let mut model = ToyModel::init(cfg, 1000 + i).unwrap();
        model.params.scale(15.0);
        let t = rng.random_range(1..=5);
        let data: Vec<f64> = (0..t * cfg.feature_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Features::new(t, cfg.feature_dim, data).unwrap();

        let mut best_joint = (f64::NEG_INFINITY, vec![]);
        let mut best_marginal = (f64::NEG_INFINITY, vec![]);
        for y in all_label_sequences(2, t) {
            let scorer = model.score_arcs(&x, &y, KIND).unwrap();
            let lat = build_lattice(KIND, t, &y, &scorer).unwrap();
            let (_, joint) = lat.best_path();
            if joint > best_joint.0 {
                best_joint = (joint, y.clone());
            }
            let marginal = lat.log_total_weight();
            if marginal > best_marginal.0 {
                best_marginal = (marginal, y);
            }
        }
        let m = max_search(&model, &x, KIND, None).unwrap();
        let s = sum_search(&model, &x, KIND, usize::MAX, None).unwrap();
        worst = worst
            .max((m.path_score - best_joint.0).abs())
            .max((s.score - best_marginal.0).abs());
        if m.labels != best_joint.1 || s.labels != best_marginal.1 {
            mismatches += 1;
        }
    }
    report(
        7,
        "exact search oracle",
        mismatches == 0 && worst <= 1e-9,
        &format!("100 instances, {mismatches} label mismatches, max |score error| {worst:.2e}"),
    );
}

fn heldout_acc(model: &ToyModel, utts: &[SyntheticUtterance], taus: &[u64]) -> AccReport {
    let seg = WordSegmentation::default();
    let hyp: Vec<UttTimings> = utts
        .iter()
        .map(|u| {
            let r = max_search(model, &u.features, KIND, None).unwrap();
            let words = word_timings(&r.labels, &r.path.emission_frames(), &seg).unwrap();
            UttTimings {
                id: u.id.clone(),
                words: words.iter().map(|w| w.to_ms(10)).collect(),
            }
        })
        .collect();
    let reference: Vec<UttTimings> = utts.iter().map(|u| UttTimings::from_reference(u, 10)).collect();
    acc_tau(&hyp, &reference, taus).unwrap()
}

#[test]
fn c08_alignment_accuracy_ordering() {
    let t = trained();
    let taus = [0, 10, 20, 30, 40, 50, 100, 200, 300, 400, 500, 600];
    let regularized = heldout_acc(&t.regularized, &t.heldout, &taus);
    let baseline = heldout_acc(&t.baseline, &t.heldout, &taus);
    let monotone = |r: &AccReport| r.accuracy.windows(2).all(|w| w[0] <= w[1]);
    report(
        8,
        "alignment accuracy ordering",
        regularized.accuracy[0] >= baseline.accuracy[0] && monotone(&regularized) && monotone(&baseline),
        &format!(
            "ACC(0) lambda=0.01 {:.4} vs lambda=0 {:.4}; ACC over tau {:?} vs {:?}",
            regularized.accuracy[0],
            baseline.accuracy[0],
            regularized.accuracy.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>(),
            baseline.accuracy.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>()
        ),
    );
}

fn words(id: &str, text: &str) -> (String, Vec<String>) {
    (id.to_string(), text.split_whitespace().map(String::from).collect())
}

fn timing(word: &str, start: u64, end: u64) -> WordTiming {
    WordTiming {
        word: word.into(),
        start,
        end,
    }
}

fn utt(words: Vec<WordTiming>) -> Vec<UttTimings> {
    vec![UttTimings { id: "u".into(), words }]
}

#[test]
fn c09_metric_fixtures() {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };

    let r = wer(&[words("u", "a b c")], &[words("u", "a b c")]).unwrap();
    check("identical corpora give WER 0", r.wer == 0.0);
    let r = wer(&[words("u", "a c")], &[words("u", "a b c")]).unwrap();
    check(
        "ref `a b c`, hyp `a c`",
        (r.substitutions, r.insertions, r.deletions) == (0, 0, 1) && r.wer == 1.0 / 3.0,
    );
    let r = wer(&[words("u", "a x y")], &[words("u", "a b")]).unwrap();
    check(
        "ref `a b`, hyp `a x y`",
        (r.substitutions, r.insertions, r.deletions) == (1, 1, 0) && r.wer == 1.0,
    );
    check("edit backtrace", edit_alignment(&["a", "b"], &["a", "x", "y"]).len() == 3);

    let seg = WordSegmentation { boundary: Some(4) };
    let t = word_timings(&[0, 1], &[3, 5], &seg).unwrap();
    check("`ab` at frames 3 and 5 spans 3..5", t == vec![timing("ab", 3, 5)]);
    check("empty path has no words", word_timings(&[], &[], &seg).unwrap().is_empty());

    let reference = utt(vec![timing("a", 100, 150)]);
    let r = acc_tau(&reference, &reference, &[0]).unwrap();
    check("hyp = ref gives ACC(0) = 1", r.accuracy == vec![1.0]);
    let early = utt(vec![timing("a", 90, 150)]);
    let r = acc_tau(&early, &reference, &[0, 10]).unwrap();
    check("one frame early: ACC(0) = 0, ACC(10) = 1", r.accuracy == vec![0.0, 1.0]);

    report(
        9,
        "metric fixtures",
        failures.is_empty(),
        &if failures.is_empty() {
            "all WER, timing and ACC fixtures reproduced exactly".to_string()
        } else {
            format!("mismatched: {}", failures.join("; "))
        },
    );
}

fn run_pipeline(dir: &Path) {
    let bin = env!("CARGO_BIN_EXE_align-entropy");
    let steps: &[&[&str]] = &[
        &["gen", "--num-utts", "12", "--seed", "5"],
        &["train", "--steps", "8", "--step-size", "0.05", "--lambdas", "0,0.01"],
        &["train", "--steps", "8", "--step-size", "0.05"],
        &["entropy"],
        &["decode", "--rule", "both"],
        &["eval"],
    ];
    for args in steps {
        let out = Command::new(bin)
            .args(*args)
            .arg("--jobs")
            .arg("2")
            .current_dir(dir)
            .env_remove("ALIGN_ENTROPY_OUT_DIR")
            .output()
            .unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn c10_pipeline_determinism() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_pipeline(a.path());
    run_pipeline(b.path());
    let mut names: Vec<String> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| std::fs::read(a.path().join(n)).ok() != std::fs::read(b.path().join(n)).ok())
        .collect();
    report(
        10,
        "pipeline determinism",
        names.len() >= 10 && differing.is_empty(),
        &format!("{} output files compared across two runs, differing: {differing:?}", names.len()),
    );
}
