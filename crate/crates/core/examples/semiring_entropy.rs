//! Alignment entropy by one forward sweep in the entropy semiring, checked
//! against the Shannon entropy of the explicitly enumerated path distribution.

use align_entropy::entropy::alignment_entropy;
use align_entropy::lattice::{build_lattice, LatticeKind, LatticeState, Symbol, DEFAULT_ENUMERATION_CAP};
use align_entropy::numerics::log_sum_exp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> align_entropy::Result<()> {
    let labels = [1, 0, 2];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise: Vec<f64> = (0..256).map(|_| rng.random_range(-3.0..0.0)).collect();
    let scorer = |s: LatticeState, sym: Symbol| {
        let k = s.t * 16 + s.u * 4 + sym.label().map_or(3, |l| l as usize);
        noise[k % noise.len()]
    };

    for kind in [LatticeKind::FrameDependent, LatticeKind::LabelAndFrame] {
        let lat = build_lattice(kind, 6, &labels, &scorer)?;
        let report = alignment_entropy(&lat)?;

        let paths = lat.enumerate_paths(DEFAULT_ENUMERATION_CAP)?;
        let log_z = log_sum_exp(&paths.iter().map(|(_, w)| *w).collect::<Vec<_>>());
        let brute: f64 = paths
            .iter()
            .map(|(_, w)| {
                let p = (w - log_z).exp();
                -p * (w - log_z)
            })
            .sum();

        println!("{kind}: {} paths", paths.len());
        println!("  semiring entropy   {:.12}", report.entropy);
        println!("  enumerated entropy {:.12}", brute);
        println!("  max entropy        {:.12}", report.max_entropy);
        println!("  normalized         {:.6}", report.normalized_entropy);
        println!("  log P(y|x)         {:.6}", report.log_likelihood);
    }

    let uniform = build_lattice(LatticeKind::FrameDependent, 6, &labels, &|_: LatticeState, _: Symbol| 0.0)?;
    let r = alignment_entropy(&uniform)?;
    println!("equal arc weights: entropy {:.12} = log C(6,3) = {:.12}", r.entropy, 20f64.ln());
    Ok(())
}
