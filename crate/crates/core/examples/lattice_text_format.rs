//! Writes a lattice in the line-oriented text format, reads it back and
//! shows that entropy and path count survive the round trip.

use align_entropy::entropy::alignment_entropy;
use align_entropy::lattice::{build_lattice, Lattice, LatticeKind, LatticeState, Symbol};

fn main() -> align_entropy::Result<()> {
    let scorer = |s: LatticeState, sym: Symbol| match sym {
        Symbol::Blank => -0.2 - 0.1 * s.t as f64,
        Symbol::Label(l) => -1.0 - 0.5 * l as f64,
    };
    let lat = build_lattice(LatticeKind::FrameDependent, 4, &[2, 1], &scorer)?;
    let text = lat.to_text();
    print!("{text}");

    let back = Lattice::from_text(&text)?;
    let (a, b) = (alignment_entropy(&lat)?, alignment_entropy(&back)?);
    println!("paths {} -> {}", lat.num_paths(), back.num_paths());
    println!("entropy {} -> {}", a.entropy, b.entropy);
    assert_eq!(a.entropy.to_bits(), b.entropy.to_bits());

    let broken = text.replacen("frame_dependent 4 2", "frame_dependent 4", 1);
    if let Err(e) = Lattice::from_text(&broken) {
        println!("damaged header: {e}");
    }
    Ok(())
}
