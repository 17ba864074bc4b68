//! Gradient of the alignment entropy with respect to every arc log-weight,
//! compared with central finite differences.

use align_entropy::entropy::{alignment_entropy, entropy_grad};
use align_entropy::lattice::{build_lattice, LatticeKind, LatticeState, Symbol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> align_entropy::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let table: Vec<f64> = (0..32).map(|_| rng.random_range(-2.0..0.0)).collect();
    let scorer = |s: LatticeState, sym: Symbol| table[s.t * 8 + s.u * 2 + usize::from(!sym.is_blank())];
    let lat = build_lattice(LatticeKind::LabelAndFrame, 3, &[0, 1], &scorer)?;
    let grad = entropy_grad(&lat)?;
    let base: Vec<f64> = lat.arcs().iter().map(|a| a.weight).collect();
    let h = 1e-5;
    let entropy_at = |w: &[f64]| alignment_entropy(&lat.with_weights(w)).map(|r| r.entropy);

    println!("entropy {:.6}", entropy_at(&base)?);
    println!("{:>12} {:>8} {:>14} {:>14}", "arc", "symbol", "analytic", "numeric");
    let mut worst = 0f64;
    for (i, arc) in lat.arcs().iter().enumerate() {
        let mut w = base.clone();
        w[i] += h;
        let up = entropy_at(&w)?;
        w[i] -= 2.0 * h;
        let down = entropy_at(&w)?;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max((numeric - grad[i]).abs());
        println!(
            "({},{})->({},{}) {:>8} {:>14.8} {:>14.8}",
            arc.src.t, arc.src.u, arc.dst.t, arc.dst.u, arc.symbol.to_string(), grad[i], numeric
        );
    }
    println!("max abs difference {worst:.2e}");
    Ok(())
}
