//! Support neurons, support examples, and multiplier-driven pruning.
//!
//! A constraint whose multiplier stays large actively shapes the learned
//! solution; neurons and examples whose multipliers all stay small are
//! candidates for removal. The eps-insensitive residual creates a dead zone
//! in which multipliers never move off zero, so support becomes exact
//! rather than approximate.

use crate::error::{Error, Result};
use crate::lagrangian::AdjointState;
use crate::network::{Network, NeuronId};

/// Soft shrinkage of a residual: `sign(g) * max(|g| - eps, 0)`.
///
/// Returns `(value, derivative)`. The derivative is 0 inside the dead zone
/// and 1 outside; at the kink `|g| = eps` the one-sided choice is 0. With
/// `eps = 0` there is no dead zone at all: the function is the exact
/// identity with derivative 1 everywhere, including `g = 0`, so that
/// multiplier forces survive at exactly-feasible points.
pub fn eps_insensitive_residual(g: f64, eps: f64) -> (f64, f64) {
    debug_assert!(eps >= 0.0, "eps must be nonnegative");
    if eps == 0.0 {
        (g, 1.0)
    } else if g.abs() <= eps {
        (0.0, 0.0)
    } else {
        (g.signum() * (g.abs() - eps), 1.0)
    }
}

/// Support sets extracted from multiplier magnitudes at threshold `tau`.
/// Membership is strict (`score > tau`), so ties at exactly `tau` are out.
#[derive(Debug, Clone)]
pub struct SupportReport {
    pub tau: f64,
    /// Per constrained neuron: (id, max over examples of |lambda|).
    pub neuron_scores: Vec<(NeuronId, f64)>,
    /// Per example: max over neurons of |lambda|.
    pub example_scores: Vec<f64>,
    pub support_neurons: Vec<NeuronId>,
    pub support_examples: Vec<usize>,
}

pub fn support_report(net: &Network, state: &AdjointState, tau: f64) -> Result<SupportReport> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::Usage(format!("tau must be >= 0, got {tau}")));
    }
    let lam = &state.lam;
    if lam.cols() != net.num_constrained() {
        return Err(Error::Shape(format!(
            "multiplier block has {} columns, network has {} constrained neurons",
            lam.cols(),
            net.num_constrained()
        )));
    }
    let ids = net.constrained_ids();
    let mut neuron_scores = Vec::with_capacity(ids.len());
    for (col, &id) in ids.iter().enumerate() {
        let score = (0..lam.rows()).fold(0.0f64, |m, e| m.max(lam.get(e, col).abs()));
        neuron_scores.push((id, score));
    }
    let example_scores: Vec<f64> = (0..lam.rows())
        .map(|e| lam.row(e).iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    Ok(SupportReport {
        tau,
        support_neurons: neuron_scores
            .iter()
            .filter(|(_, s)| *s > tau)
            .map(|(id, _)| *id)
            .collect(),
        support_examples: example_scores
            .iter()
            .enumerate()
            .filter(|(_, s)| **s > tau)
            .map(|(e, _)| e)
            .collect(),
        neuron_scores,
        example_scores,
    })
}

/// Removes non-support hidden neurons and their incident edges. Input and
/// output neurons are never pruned. Neuron ids are preserved, so reports and
/// weights keep their meaning across the prune. Refuses (rather than
/// repairs) a prune that leaves the network structurally invalid.
pub fn prune(net: &Network, report: &SupportReport) -> Result<Network> {
    let keep = |id: NeuronId| -> bool {
        net.is_input(id) || net.is_output(id) || report.support_neurons.contains(&id)
    };
    let neurons: Vec<_> = net.neurons().iter().filter(|n| keep(n.id)).cloned().collect();
    let edges: Vec<_> = net
        .edges()
        .iter()
        .filter(|&&(s, d)| keep(s) && keep(d))
        .copied()
        .collect();
    Network::new(
        neurons,
        edges,
        net.input_ids().to_vec(),
        net.output_ids().to_vec(),
    )
    .map_err(|e| {
        Error::Structural(format!(
            "pruning would disconnect the network ({e}); refusing"
        ))
    })
}

/// Weight block for a pruned network, copied entry-by-entry from the
/// original by matching edges on (source, target) ids and biases on neuron
/// ids.
pub fn carry_weights(original: &Network, pruned: &Network, w: &[f64]) -> Result<Vec<f64>> {
    original.check_weights(w)?;
    let mut out = vec![0.0; pruned.num_weights()];
    for (new_idx, &(s, d)) in pruned.edges().iter().enumerate() {
        let old_idx = original
            .edges()
            .iter()
            .position(|&(os, od)| (os, od) == (s, d))
            .ok_or_else(|| Error::Structural(format!("edge ({s}, {d}) not in the original")))?;
        out[new_idx] = w[old_idx];
    }
    for (i, n) in pruned.neurons().iter().enumerate() {
        if let Some(new_b) = pruned.bias_widx(i) {
            let old_i = original
                .neurons()
                .iter()
                .position(|o| o.id == n.id)
                .ok_or_else(|| Error::Structural(format!("neuron {} not in the original", n.id)))?;
            let old_b = original
                .bias_widx(old_i)
                .ok_or_else(|| Error::Structural(format!("neuron {} lost its bias", n.id)))?;
            out[new_b] = w[old_b];
        }
    }
    Ok(out)
}
