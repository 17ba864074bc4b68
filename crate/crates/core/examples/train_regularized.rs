//! Trains the same initial model with and without the entropy penalty and
//! prints both entropy curves.
//!
//! ```sh
//! cargo run --release --example train_regularized -- [steps] [utterances]
//! ```

use align_entropy::model::{generate_corpus, train, CorpusConfig, ModelConfig, ToyModel, TrainOptions};

fn main() -> align_entropy::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let steps = args.first().copied().unwrap_or(600);
    let utterances = args.get(1).copied().unwrap_or(60);

    let corpus = generate_corpus(&CorpusConfig::default(), 1, utterances)?;
    let init = ToyModel::init(ModelConfig::default(), 0)?;
    let mut finals = Vec::new();
    for lambda in [0.0, 0.01] {
        let opts = TrainOptions {
            lambda,
            steps,
            ..TrainOptions::default()
        };
        let (_, curve) = train(&init, &corpus, &opts)?;
        println!("lambda = {lambda}");
        println!("{:>6} {:>10} {:>10} {:>10}", "step", "loss", "entropy", "normalized");
        let every = (steps / 10).max(1);
        for p in curve.iter().filter(|p| p.step % every == 0 || p.step == steps) {
            println!(
                "{:>6} {:>10.4} {:>10.4} {:>10.5}",
                p.step, p.loss, p.mean_entropy, p.mean_normalized_entropy
            );
        }
        finals.push(curve.last().map_or(f64::NAN, |p| p.mean_normalized_entropy));
    }
    println!(
        "final normalized entropy: {:.5} without, {:.5} with the penalty (ratio {:.3})",
        finals[0],
        finals[1],
        finals[1] / finals[0]
    );
    Ok(())
}
