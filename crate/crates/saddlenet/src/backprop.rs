//! Classical backpropagation and the closed-form adjoint solve.
//!
//! The adjoint solve computes, per example, the multipliers that make the
//! Lagrangian stationary in the neural-output block at the feasible point:
//! outputs balance the loss gradient, hidden neurons satisfy
//! `lam_i = sum_k lam_k * act'(a_k) * w_{ki}` over their children, visited
//! in reverse topological order. Substituting the solution into the weight
//! gradient of the Lagrangian reproduces the backpropagation gradient term
//! by term; [`verify_bp_equivalence`] machine-checks that identity.

use serde::Serialize;

use crate::data::Dataset;
use crate::error::Result;
use crate::grid::Grid;
use crate::lagrangian::{block_gradients, rel_diff, AdjointState, LossKind, Objective};
use crate::network::Network;

/// Relative tolerance for the gradient equivalence; both paths are exact
/// algorithms that differ only in summation order.
pub const BP_EQUIV_REL_TOL: f64 = 1e-10;

/// Work counters for the adjoint solve; the recursion must visit each
/// constrained neuron once per example and touch each child edge once.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub neuron_visits: usize,
    pub edge_visits: usize,
}

/// The saddle configuration in the output block: the exact forward pass and
/// the multipliers that zero the x-gradient there.
#[derive(Debug, Clone)]
pub struct AdjointSolution {
    pub x_feasible: Grid,
    pub lam_star: Grid,
    pub stats: SolveStats,
}

impl AdjointSolution {
    pub fn into_state(self, w: Vec<f64>) -> AdjointState {
        AdjointState {
            w,
            x: self.x_feasible,
            lam: self.lam_star,
        }
    }
}

/// Gradient of the unconstrained loss `sum_e V(forward(w, input_e),
/// target_e)` with respect to the weights, by reverse accumulation in
/// reverse topological order.
pub fn backprop_gradient(
    net: &Network,
    w: &[f64],
    data: &Dataset,
    loss: LossKind,
) -> Result<Vec<f64>> {
    let probe = AdjointState::feasible(net, w.to_vec(), data)?;
    probe.check_shapes(net, data)?;

    let n = net.neurons().len();
    let mut grad = vec![0.0; net.num_weights()];
    let mut values = vec![0.0; n];
    let mut preact = vec![0.0; n];
    let mut sens = vec![0.0; n]; // dV/dx_i with x on the feasible manifold

    for e in 0..data.num_examples() {
        for v in sens.iter_mut() {
            *v = 0.0;
        }
        for (pos, &id) in net.input_ids().iter().enumerate() {
            values[net.index_of(id)] = data.inputs.row(e)[pos];
        }
        for &i in net.topo_indices() {
            if net.constrained_col(i).is_none() {
                continue;
            }
            let a = net.preactivation(w, &values, i);
            preact[i] = a;
            values[i] = net.neuron_at(i).act.value(a);
        }
        let target = data.targets.row(e);
        for (tcol, &id) in net.output_ids().iter().enumerate() {
            let i = net.index_of(id);
            sens[i] = loss.grad_dim(values[i], target[tcol]);
        }
        for &i in net.topo_indices().iter().rev() {
            if net.constrained_col(i).is_none() {
                continue;
            }
            // children were already processed (they come later in topo order)
            let mut s = sens[i];
            for &(ci, widx) in net.children_of(i) {
                s += w[widx] * net.neuron_at(ci).act.derivative(preact[ci]) * sens[ci];
            }
            sens[i] = s;
            let delta = net.neuron_at(i).act.derivative(preact[i]) * s;
            for &(pi, widx) in net.incoming(i) {
                grad[widx] += delta * values[pi];
            }
            if let Some(b) = net.bias_widx(i) {
                grad[b] += delta;
            }
        }
    }
    Ok(grad)
}

/// Closed-form backward recursion for the multipliers at the feasible point.
pub fn solve_adjoint(
    net: &Network,
    w: &[f64],
    data: &Dataset,
    loss: LossKind,
) -> Result<AdjointSolution> {
    let x_feasible = net.forward_batch(w, &data.inputs)?;
    if data.output_dim() != net.num_outputs() {
        return Err(crate::error::Error::Shape(format!(
            "dataset target dim {} vs {} output neurons",
            data.output_dim(),
            net.num_outputs()
        )));
    }
    let mut lam_star = Grid::zeros(data.num_examples(), net.num_constrained());
    let mut stats = SolveStats::default();
    let n = net.neurons().len();
    let mut values = vec![0.0; n];
    let mut preact = vec![0.0; n];

    for e in 0..data.num_examples() {
        net.fill_values(data.inputs.row(e), x_feasible.row(e), &mut values);
        for &i in net.topo_indices() {
            if net.constrained_col(i).is_some() {
                preact[i] = net.preactivation(w, &values, i);
            }
        }
        let target = data.targets.row(e);
        for &i in net.topo_indices().iter().rev() {
            let Some(col) = net.constrained_col(i) else {
                continue;
            };
            stats.neuron_visits += 1;
            let mut lam = 0.0;
            for &(ci, widx) in net.children_of(i) {
                stats.edge_visits += 1;
                let ccol = net
                    .constrained_col(ci)
                    .expect("a neuron with a parent is never an input");
                lam += lam_star.get(e, ccol)
                    * net.neuron_at(ci).act.derivative(preact[ci])
                    * w[widx];
            }
            if let Some(tcol) = net.output_ids().iter().position(|&id| id == net.neuron_at(i).id)
            {
                lam -= loss.grad_dim(values[i], target[tcol]);
            }
            lam_star.set(e, col, lam);
        }
    }
    Ok(AdjointSolution {
        x_feasible,
        lam_star,
        stats,
    })
}

/// Elementwise comparison of the Lagrangian weight gradient at the adjoint
/// solution against classical backpropagation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EquivalenceReport {
    pub max_abs: f64,
    pub max_rel: f64,
}

impl EquivalenceReport {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.max_rel <= rel_tol
    }
}

pub fn verify_bp_equivalence(
    net: &Network,
    w: &[f64],
    data: &Dataset,
    loss: LossKind,
) -> Result<EquivalenceReport> {
    let bp = backprop_gradient(net, w, data, loss)?;
    let solution = solve_adjoint(net, w, data, loss)?;
    let state = solution.into_state(w.to_vec());
    let grads = block_gradients(net, &state, data, &Objective::plain(loss))?;
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for (a, b) in grads.d_w.iter().zip(&bp) {
        max_abs = max_abs.max((a - b).abs());
        max_rel = max_rel.max(rel_diff(*a, *b));
    }
    Ok(EquivalenceReport { max_abs, max_rel })
}
