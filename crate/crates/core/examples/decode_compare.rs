//! Max-search against sum-search on held-out utterances, for several beams.
//!
//! ```sh
//! cargo run --release --example decode_compare -- [checkpoint]
//! ```
//!
//! Without a checkpoint a model is trained briefly first.

use std::path::Path;

use align_entropy::decode::{max_search, sum_search};
use align_entropy::lattice::LatticeKind;
use align_entropy::model::{generate_corpus, load_checkpoint, train, CorpusConfig, ModelConfig, ToyModel, TrainOptions};

fn main() -> align_entropy::Result<()> {
    let model = match std::env::args().nth(1) {
        Some(path) => load_checkpoint(Path::new(&path))?,
        None => {
            let corpus = generate_corpus(&CorpusConfig::default(), 1, 60)?;
            let opts = TrainOptions {
                steps: 400,
                ..TrainOptions::default()
            };
            train(&ToyModel::init(ModelConfig::default(), 0)?, &corpus, &opts)?.0
        }
    };
    let heldout_cfg = CorpusConfig {
        vocab_size: model.config.vocab_size,
        feature_dim: model.config.feature_dim,
        id_prefix: "heldout".into(),
        ..CorpusConfig::default()
    };
    let heldout = generate_corpus(&heldout_cfg, 2, 50)?;
    let kind = LatticeKind::FrameDependent;

    let max: Vec<_> = heldout
        .iter()
        .map(|u| max_search(&model, &u.features, kind, None))
        .collect::<align_entropy::Result<_>>()?;
    let correct = heldout.iter().zip(&max).filter(|(u, r)| u.labels == r.labels).count();
    println!("max-search: {correct}/{} label sequences exactly right", heldout.len());

    for beam in [1, 2, 4, 8] {
        let mut agree = 0;
        let mut gain = 0.0;
        for (u, m) in heldout.iter().zip(&max) {
            let s = sum_search(&model, &u.features, kind, beam, None)?;
            agree += usize::from(s.labels == m.labels);
            gain += s.score - m.score;
        }
        println!(
            "beam {beam}: sum-search agrees on {agree}/{}, mean log P(y|x) gain over max-search {:.5}",
            heldout.len(),
            gain / heldout.len() as f64
        );
    }

    let (u, m) = (&heldout[0], &max[0]);
    let s = sum_search(&model, &u.features, kind, 8, None)?;
    println!("\n{}: reference {:?} in spans {:?}", u.id, u.labels, u.spans);
    println!("  max-search {:?} at frames {:?}, joint log-prob {:.4}", m.labels, m.path.emission_frames(), m.path_score);
    println!("  sum-search {:?} at frames {:?}, log P(y|x) {:.4}", s.labels, s.path.emission_frames(), s.score);
    Ok(())
}
