//! WER and alignment accuracy of max-search timings for a model trained with
//! and without the entropy penalty.
//!
//! ```sh
//! cargo run --release --example alignment_accuracy -- [steps]
//! ```

use align_entropy::decode::{max_search, DecodeRecord};
use align_entropy::eval::{acc_tau, wer_of_timings, UttTimings, WordSegmentation, COARSE_TAUS_MS, FINE_TAUS_MS};
use align_entropy::lattice::LatticeKind;
use align_entropy::model::{generate_corpus, train, CorpusConfig, ModelConfig, ToyModel, TrainOptions};

const FRAME_SHIFT_MS: u64 = 10;

fn main() -> align_entropy::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(600);
    let corpus = generate_corpus(&CorpusConfig::default(), 1, 60)?;
    let heldout_cfg = CorpusConfig {
        id_prefix: "heldout".into(),
        ..CorpusConfig::default()
    };
    let heldout = generate_corpus(&heldout_cfg, 2, 60)?;
    let reference: Vec<UttTimings> = heldout.iter().map(|u| UttTimings::from_reference(u, FRAME_SHIFT_MS)).collect();
    let init = ToyModel::init(ModelConfig::default(), 0)?;
    let seg = WordSegmentation::default();

    println!("{:>8} {:>7} {:>8}  ACC at tau (ms)", "lambda", "WER", "");
    for lambda in [0.0, 0.01] {
        let opts = TrainOptions {
            lambda,
            steps,
            ..TrainOptions::default()
        };
        let (model, _) = train(&init, &corpus, &opts)?;
        let hyp = heldout
            .iter()
            .map(|u| {
                let r = max_search(&model, &u.features, LatticeKind::FrameDependent, None)?;
                UttTimings::from_decode(&DecodeRecord::new(u.id.clone(), &r), &seg, FRAME_SHIFT_MS)
            })
            .collect::<align_entropy::Result<Vec<_>>>()?;
        let w = wer_of_timings(&hyp, &reference)?;
        for taus in [&FINE_TAUS_MS[..], &COARSE_TAUS_MS[..]] {
            let acc = acc_tau(&hyp, &reference, taus)?;
            let cells: Vec<String> = acc
                .taus_ms
                .iter()
                .zip(&acc.accuracy)
                .map(|(t, a)| format!("{t}:{a:.3}"))
                .collect();
            println!("{lambda:>8} {:>7.4} {:>8}  {}", w.wer, "", cells.join(" "));
        }
    }
    Ok(())
}
