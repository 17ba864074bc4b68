//! Alignment-path entropy over a lattice.
//!
//! One forward sweep in the entropy semiring yields `(α, A)` at the final
//! state, i.e. `P(y|x)` and `Σ ω log ω`, from which
//! `H = -A/α + log α`. The per-state update is
//! `A_v = Σ_{e: u→v} ω[e]·(A_u + α_u·log ω[e])`.
//!
//! Gradients with respect to arc log-weights come from a matching backward
//! sweep: for arc `e`, let `γ_e` be its posterior and `S_e` the posterior
//! mass of paths through `e` weighted by their log-weight. Then
//! `∂H/∂θ_e = γ_e·E[log ω] - S_e`.

use crate::error::{Error, Result};
use crate::lattice::{Lattice, LatticeState};
use crate::numerics::{ew_arc, ew_times, EntropyWeight, LogProb, LOG_ZERO};

/// Per-state `(α, A)` over all prefixes ending at that state.
#[derive(Clone, Debug)]
pub struct ForwardTable {
    cells: Vec<EntropyWeight>,
    final_cell: usize,
    cols: usize,
}

impl ForwardTable {
    pub fn at(&self, s: LatticeState) -> EntropyWeight {
        self.cells[s.t * self.cols + s.u]
    }

    /// `(log P(y|x), Σ ω log ω)` over complete paths.
    pub fn final_weight(&self) -> EntropyWeight {
        self.cells[self.final_cell]
    }

    pub fn entropy(&self) -> Result<f64> {
        self.final_weight().entropy()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyReport {
    /// Entropy of `P(π | x, y)` in nats.
    pub entropy: f64,
    /// `log Σ_π ω[π]`; equals `log P(y|x)` for locally normalized weights.
    pub log_likelihood: f64,
    /// `log |Π|`, the entropy of the uniform alignment distribution.
    pub max_entropy: f64,
    /// `entropy / max_entropy`, with `0/0 = 0`.
    pub normalized_entropy: f64,
}

/// Entropy together with its gradients with respect to every arc log-weight.
#[derive(Clone, Debug)]
pub struct EntropyGradients {
    pub entropy: f64,
    pub log_likelihood: f64,
    /// `∂H/∂θ_e` in [`Lattice::arcs`] order.
    pub d_entropy: Vec<f64>,
    /// `∂ log α / ∂θ_e`, the arc posteriors.
    pub d_log_likelihood: Vec<f64>,
}

pub fn forward_entropy(lat: &Lattice) -> Result<ForwardTable> {
    let cells = lat.shortest_distance(|arc| ew_arc(arc.weight));
    let final_cell = lat.cell(lat.final_state());
    if cells[final_cell].alpha == LOG_ZERO {
        return Err(Error::EmptyLattice);
    }
    Ok(ForwardTable {
        cells,
        final_cell,
        cols: lat.num_labels() + 1,
    })
}

pub fn alignment_entropy(lat: &Lattice) -> Result<EntropyReport> {
    let table = forward_entropy(lat)?;
    let entropy = table.entropy()?;
    let max_entropy = lat.log_num_paths();
    let normalized_entropy = if max_entropy > 0.0 {
        entropy / max_entropy
    } else {
        0.0
    };
    Ok(EntropyReport {
        entropy,
        log_likelihood: table.final_weight().alpha,
        max_entropy,
        normalized_entropy,
    })
}

pub fn entropy_grad(lat: &Lattice) -> Result<Vec<f64>> {
    entropy_and_grads(lat).map(|g| g.d_entropy)
}

pub fn entropy_and_grads(lat: &Lattice) -> Result<EntropyGradients> {
    let lifted: Vec<EntropyWeight> = lat.arcs().iter().map(|a| ew_arc(a.weight)).collect();
    let fwd = lat.shortest_distance(|a| ew_arc(a.weight));
    let total = fwd[lat.cell(lat.final_state())];
    if total.alpha == LOG_ZERO {
        return Err(Error::EmptyLattice);
    }
    let bwd = lat.backward_distance(|a| ew_arc(a.weight));
    let mean_log_weight = total.mean_log_weight();

    let mut d_entropy = vec![0.0; lifted.len()];
    let mut d_log_likelihood = vec![0.0; lifted.len()];
    for (i, (arc, w)) in lat.arcs().iter().zip(&lifted).enumerate() {
        let through = ew_times(ew_times(fwd[lat.cell(arc.src)], *w), bwd[lat.cell(arc.dst)]);
        let posterior = posterior(through.alpha, total.alpha);
        let weighted = through.a.ratio_to_f64(total.alpha);
        d_log_likelihood[i] = posterior;
        d_entropy[i] = posterior * mean_log_weight - weighted;
    }
    Ok(EntropyGradients {
        entropy: total.entropy()?,
        log_likelihood: total.alpha,
        d_entropy,
        d_log_likelihood,
    })
}

fn posterior(log_mass: LogProb, log_total: LogProb) -> f64 {
    if log_mass == LOG_ZERO {
        0.0
    } else {
        (log_mass - log_total).exp()
    }
}
