//! Path counts of the three lattice topologies, and the alignments of a tiny
//! frame-dependent lattice.

use align_entropy::lattice::{build_lattice, LatticeKind, LatticeState, Symbol, DEFAULT_ENUMERATION_CAP};

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

fn main() -> align_entropy::Result<()> {
    let flat = |_: LatticeState, _: Symbol| 0.0;
    println!("{:>3} {:>3} {:>16} {:>16} {:>16}", "T", "U", "frame_dependent", "label_and_frame", "label_dependent");
    for (t, u) in [(4, 2), (10, 3), (20, 5), (40, 8)] {
        let labels: Vec<u32> = (0..u as u32).collect();
        let fd = build_lattice(LatticeKind::FrameDependent, t, &labels, &flat)?;
        let laf = build_lattice(LatticeKind::LabelAndFrame, t, &labels, &flat)?;
        let ld = build_lattice(LatticeKind::LabelDependent, t, &labels, &flat)?;
        assert_eq!(fd.num_paths(), binomial(t as u64, u as u64).into());
        assert_eq!(laf.num_paths(), binomial((t + u) as u64, u as u64).into());
        println!("{t:>3} {u:>3} {:>16} {:>16} {:>16}", fd.num_paths(), laf.num_paths(), ld.num_paths());
    }

    let lat = build_lattice(LatticeKind::FrameDependent, 4, &[7, 9], &flat)?;
    println!("\nalignments of labels [7, 9] over 4 frames (~ is blank):");
    for (path, _) in lat.enumerate_paths(DEFAULT_ENUMERATION_CAP)? {
        let syms: Vec<String> = path.steps.iter().map(|s| s.symbol.to_string()).collect();
        println!("  {}   emission frames {:?}", syms.join(" "), path.emission_frames());
    }

    match build_lattice(LatticeKind::FrameDependent, 2, &[1, 2, 3], &flat) {
        Err(e) => println!("\n3 labels in 2 frames: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
