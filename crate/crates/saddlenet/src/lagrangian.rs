//! The constrained-learning Lagrangian over the learning adjoint space and
//! its exact block gradients.
//!
//! For every non-input neuron `i` and example `e` the architecture imposes
//! the constraint `G_{i,e} = x_{i,e} - act(a_{i,e}) = 0`, where `a` is the
//! pre-activation computed from the stored outputs of `i`'s parents. The
//! Lagrangian is
//!
//! ```text
//! L(w, x, lam) = sum_e V(out_e, target_e)
//!              + sum_e sum_i lam_{i,e} * S_eps(G_{i,e})
//!              + (rho/2) * sum_e sum_i S_eps(G_{i,e})^2
//! ```
//!
//! with `S_eps` the eps-insensitive soft shrinkage (`S_0` is the identity),
//! `rho >= 0` an optional augmented penalty, and `V` the supervision loss
//! applied to the *stored* outputs of the output neurons — not to a fresh
//! forward pass. All gradients are hand-derived and validated against the
//! central finite-difference oracle in this module.

use serde::{Deserialize, Serialize};

use crate::activation::logistic;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::network::Network;
use crate::support::eps_insensitive_residual;

/// Supervision term applied per output dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `(y - t)^2`, summed over output dimensions.
    SquaredError,
    /// Binary cross-entropy of a logit: `softplus(y) - t*y`. The stored
    /// output is the logit, so the loss is defined for every real value.
    CrossEntropyWithLogistic,
}

impl LossKind {
    pub fn value_dim(self, y: f64, t: f64) -> f64 {
        match self {
            LossKind::SquaredError => {
                let d = y - t;
                d * d
            }
            // max(y,0) - t*y + ln(1 + exp(-|y|)), the overflow-safe softplus.
            LossKind::CrossEntropyWithLogistic => y.max(0.0) - t * y + (-y.abs()).exp().ln_1p(),
        }
    }

    pub fn grad_dim(self, y: f64, t: f64) -> f64 {
        match self {
            LossKind::SquaredError => 2.0 * (y - t),
            LossKind::CrossEntropyWithLogistic => logistic(y) - t,
        }
    }

    pub fn value(self, pred: &[f64], target: &[f64]) -> f64 {
        pred.iter()
            .zip(target)
            .map(|(&y, &t)| self.value_dim(y, t))
            .sum()
    }
}

/// Full description of the Lagrangian being optimized.
#[derive(Debug, Clone, Copy)]
pub struct Objective {
    pub loss: LossKind,
    /// Augmented penalty coefficient; 0 disables the quadratic term.
    pub rho: f64,
    /// Dead-zone half-width of the eps-insensitive residual; 0 recovers the
    /// plain constraint.
    pub eps: f64,
}

impl Objective {
    pub fn plain(loss: LossKind) -> Self {
        Objective {
            loss,
            rho: 0.0,
            eps: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.is_nan() || self.rho < 0.0 {
            return Err(Error::Usage(format!("rho must be >= 0, got {}", self.rho)));
        }
        if self.eps.is_nan() || self.eps < 0.0 {
            return Err(Error::Usage(format!("eps must be >= 0, got {}", self.eps)));
        }
        Ok(())
    }
}

/// A point of the learning adjoint space: weights, per-example neural
/// outputs, and per-example Lagrange multipliers. `x` and `lam` always have
/// identical shape (examples x constrained neurons).
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    pub w: Vec<f64>,
    pub x: Grid,
    pub lam: Grid,
}

impl AdjointState {
    /// Feasible start: `x` is the exact forward pass of `w`, multipliers are
    /// zero, so every constraint residual is exactly zero.
    pub fn feasible(net: &Network, w: Vec<f64>, data: &Dataset) -> Result<Self> {
        let x = net.forward_batch(&w, &data.inputs)?;
        let lam = Grid::zeros(data.num_examples(), net.num_constrained());
        Ok(AdjointState { w, x, lam })
    }

    pub fn check_shapes(&self, net: &Network, data: &Dataset) -> Result<()> {
        net.check_weights(&self.w)?;
        let (e, c) = (data.num_examples(), net.num_constrained());
        for (name, g) in [("x", &self.x), ("lam", &self.lam)] {
            if g.rows() != e || g.cols() != c {
                return Err(Error::Shape(format!(
                    "{name} block is {}x{}, expected {e}x{c}",
                    g.rows(),
                    g.cols()
                )));
            }
        }
        if data.input_dim() != net.num_inputs() {
            return Err(Error::Shape(format!(
                "dataset input dim {} vs {} input neurons",
                data.input_dim(),
                net.num_inputs()
            )));
        }
        if data.output_dim() != net.num_outputs() {
            return Err(Error::Shape(format!(
                "dataset target dim {} vs {} output neurons",
                data.output_dim(),
                net.num_outputs()
            )));
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        let ok = self.w.iter().all(|v| v.is_finite()) && self.x.is_finite() && self.lam.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::NonFinite("adjoint state".into()))
        }
    }

    pub fn flat_len(&self) -> usize {
        self.w.len() + self.x.as_slice().len() + self.lam.as_slice().len()
    }

    /// Flattening order is a format contract: w block, then x row-major by
    /// example, then lambda row-major.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.flat_len());
        v.extend_from_slice(&self.w);
        v.extend_from_slice(self.x.as_slice());
        v.extend_from_slice(self.lam.as_slice());
        v
    }

    pub fn unflatten(num_weights: usize, examples: usize, constrained: usize, v: &[f64]) -> Self {
        let nx = examples * constrained;
        assert_eq!(v.len(), num_weights + 2 * nx, "flat state length mismatch");
        AdjointState {
            w: v[..num_weights].to_vec(),
            x: Grid::from_flat(examples, constrained, v[num_weights..num_weights + nx].to_vec()),
            lam: Grid::from_flat(examples, constrained, v[num_weights + nx..].to_vec()),
        }
    }

    pub fn to_doc(&self) -> StateDoc {
        StateDoc {
            num_weights: self.w.len(),
            num_examples: self.x.rows(),
            num_constrained: self.x.cols(),
            w: self.w.clone(),
            x: self.x.as_slice().to_vec(),
            lam: self.lam.as_slice().to_vec(),
        }
    }

    pub fn from_doc(doc: StateDoc) -> Result<Self> {
        let nx = doc.num_examples * doc.num_constrained;
        if doc.w.len() != doc.num_weights || doc.x.len() != nx || doc.lam.len() != nx {
            return Err(Error::Shape(
                "state document arrays disagree with its shape header".into(),
            ));
        }
        let state = AdjointState {
            w: doc.w,
            x: Grid::from_flat(doc.num_examples, doc.num_constrained, doc.x),
            lam: Grid::from_flat(doc.num_examples, doc.num_constrained, doc.lam),
        };
        state.check_finite()?;
        Ok(state)
    }
}

/// Flat JSON serialization of an [`AdjointState`] with shape headers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDoc {
    pub num_weights: usize,
    pub num_examples: usize,
    pub num_constrained: usize,
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    pub lam: Vec<f64>,
}

/// Partials of the Lagrangian with respect to each block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGradients {
    pub d_w: Vec<f64>,
    pub d_x: Grid,
    pub d_lam: Grid,
}

impl BlockGradients {
    pub fn is_finite(&self) -> bool {
        self.d_w.iter().all(|v| v.is_finite()) && self.d_x.is_finite() && self.d_lam.is_finite()
    }
}

/// Everything one sweep over the batch can tell us about a state.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub loss: f64,
    /// Infinity norm of the raw (unshrunken) residual.
    pub res_inf: f64,
    /// Euclidean norm of the raw residual.
    pub res_2: f64,
    pub grads: BlockGradients,
}

/// Residual of every constraint of one example: `G_i = x_i - act(a_i)`,
/// with parent values taken from `x_row` (or the example input for input
/// parents). Shares the pre-activation routine with the forward pass, so a
/// feasible row gives exact zeros.
pub fn constraint_residual(
    net: &Network,
    w: &[f64],
    x_row: &[f64],
    input: &[f64],
) -> Result<Vec<f64>> {
    net.check_weights(w)?;
    if x_row.len() != net.num_constrained() {
        return Err(Error::Shape(format!(
            "x row has {} entries, network has {} constrained neurons",
            x_row.len(),
            net.num_constrained()
        )));
    }
    if input.len() != net.num_inputs() {
        return Err(Error::Shape(format!(
            "input has {} values, network has {} input neurons",
            input.len(),
            net.num_inputs()
        )));
    }
    let mut values = vec![0.0; net.neurons().len()];
    net.fill_values(input, x_row, &mut values);
    Ok(net
        .constrained_indices()
        .iter()
        .enumerate()
        .map(|(col, &i)| {
            let a = net.preactivation(w, &values, i);
            x_row[col] - net.neuron_at(i).act.value(a)
        })
        .collect())
}

/// Raw residuals for the whole batch, one row per example.
pub fn residual_grid(net: &Network, w: &[f64], x: &Grid, data: &Dataset) -> Result<Grid> {
    let mut g = Grid::zeros(x.rows(), x.cols());
    for e in 0..x.rows() {
        let row = constraint_residual(net, w, x.row(e), data.inputs.row(e))?;
        g.row_mut(e).copy_from_slice(&row);
    }
    Ok(g)
}

fn check_args(net: &Network, state: &AdjointState, data: &Dataset) -> Result<()> {
    if data.num_examples() == 0 {
        return Err(Error::Usage("empty batch".into()));
    }
    state.check_shapes(net, data)
}

/// Output-neuron bookkeeping: (constrained column, target column).
fn output_cols(net: &Network) -> Vec<(usize, usize)> {
    net.output_ids()
        .iter()
        .enumerate()
        .map(|(tcol, &id)| {
            let col = net
                .column_of_id(id)
                .expect("output neurons are never inputs");
            (col, tcol)
        })
        .collect()
}

/// Scalar value of the Lagrangian.
pub fn lagrangian_value(
    net: &Network,
    state: &AdjointState,
    data: &Dataset,
    obj: &Objective,
) -> Result<f64> {
    check_args(net, state, data)?;
    obj.validate()?;
    let outputs = output_cols(net);
    let mut values = vec![0.0; net.neurons().len()];
    let mut total = 0.0;
    for e in 0..data.num_examples() {
        let x_row = state.x.row(e);
        net.fill_values(data.inputs.row(e), x_row, &mut values);
        let mut term = 0.0;
        for (col, &i) in net.constrained_indices().iter().enumerate() {
            let a = net.preactivation(&state.w, &values, i);
            let g = x_row[col] - net.neuron_at(i).act.value(a);
            let (s, _) = eps_insensitive_residual(g, obj.eps);
            term += state.lam.get(e, col) * s + 0.5 * obj.rho * s * s;
        }
        let target = data.targets.row(e);
        for &(col, tcol) in &outputs {
            term += obj.loss.value_dim(x_row[col], target[tcol]);
        }
        total += term;
    }
    Ok(total)
}

/// Value, loss, residual norms, and all three block gradients in one sweep.
///
/// Per neuron `i` the constraint force is `mu_i = (lam_i + rho*S(G_i)) *
/// S'(G_i)`; with `rho = eps = 0` this is just `lam_i`. The partials are
///
/// ```text
/// dL/dlam_{i,e} = S(G_{i,e})
/// dL/dx_{i,e}   = mu_i - sum_{children k} mu_k * act'(a_k) * w_{ki}
///                 + dV/dx_i  (output neurons only)
/// dL/dw_{ij}    = -sum_e mu_i * act'(a_i) * p_j      (p_j = parent value)
/// ```
///
/// Every term touches only the variables of its own structural neighborhood
/// and examples are accumulated in index order, which is what the locality
/// audit and the determinism contract rely on.
pub fn evaluate(
    net: &Network,
    state: &AdjointState,
    data: &Dataset,
    obj: &Objective,
) -> Result<Evaluation> {
    check_args(net, state, data)?;
    obj.validate()?;
    let n_constrained = net.num_constrained();
    let n_examples = data.num_examples();
    let outputs = output_cols(net);

    let mut d_w = vec![0.0; net.num_weights()];
    let mut d_x = Grid::zeros(n_examples, n_constrained);
    let mut d_lam = Grid::zeros(n_examples, n_constrained);
    let mut values = vec![0.0; net.neurons().len()];
    let mut slope = vec![0.0; n_constrained]; // act'(a_i)
    let mut force = vec![0.0; n_constrained]; // mu_i
    let mut value = 0.0;
    let mut loss = 0.0;
    let mut res_inf = 0.0f64;
    let mut res_sq = 0.0;

    for e in 0..n_examples {
        let x_row = state.x.row(e);
        net.fill_values(data.inputs.row(e), x_row, &mut values);

        for (col, &i) in net.constrained_indices().iter().enumerate() {
            let a = net.preactivation(&state.w, &values, i);
            let act = net.neuron_at(i).act;
            let g = x_row[col] - act.value(a);
            let (s, s_prime) = eps_insensitive_residual(g, obj.eps);
            let lam = state.lam.get(e, col);
            slope[col] = act.derivative(a);
            force[col] = (lam + obj.rho * s) * s_prime;
            d_lam.set(e, col, s);
            value += lam * s + 0.5 * obj.rho * s * s;
            res_inf = res_inf.max(g.abs());
            res_sq += g * g;
        }

        // Direct term of each constraint on its own output.
        for (col, &mu) in force.iter().enumerate() {
            d_x.set(e, col, mu);
        }
        // Coupling through children plus the weight gradient, one pass per
        // constrained neuron k over its incoming connections.
        for (col_k, &k) in net.constrained_indices().iter().enumerate() {
            let factor = force[col_k] * slope[col_k];
            for &(pi, widx) in net.incoming(k) {
                d_w[widx] -= factor * values[pi];
                if let Some(pcol) = net.constrained_col(pi) {
                    let cur = d_x.get(e, pcol);
                    d_x.set(e, pcol, cur - factor * state.w[widx]);
                }
            }
            if let Some(b) = net.bias_widx(k) {
                d_w[b] -= factor;
            }
        }
        // Supervision on the stored outputs of the output neurons.
        let target = data.targets.row(e);
        for &(col, tcol) in &outputs {
            let v = obj.loss.value_dim(x_row[col], target[tcol]);
            value += v;
            loss += v;
            let cur = d_x.get(e, col);
            d_x.set(e, col, cur + obj.loss.grad_dim(x_row[col], target[tcol]));
        }
    }

    Ok(Evaluation {
        value,
        loss,
        res_inf,
        res_2: res_sq.sqrt(),
        grads: BlockGradients { d_w, d_x, d_lam },
    })
}

/// Exact analytic partials of [`lagrangian_value`] with respect to each
/// block. `d_lam` equals the (eps-shrunken) constraint residual by
/// construction; with `eps = 0` it is the raw residual, bit for bit.
pub fn block_gradients(
    net: &Network,
    state: &AdjointState,
    data: &Dataset,
    obj: &Objective,
) -> Result<BlockGradients> {
    Ok(evaluate(net, state, data, obj)?.grads)
}

/// Central finite differences `(f(p + h e_k) - f(p - h e_k)) / 2h`.
pub fn finite_diff_gradient<F>(mut f: F, point: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Usage(format!("h must be > 0, got {h}")));
    }
    let mut p = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for k in 0..point.len() {
        let orig = p[k];
        p[k] = orig + h;
        let fp = f(&p);
        p[k] = orig - h;
        let fm = f(&p);
        p[k] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite(format!(
                "finite differences at coordinate {k}"
            )));
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

/// `|a - b|` scaled by the larger magnitude, floored at 1 so that tiny
/// values are compared absolutely.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::network::{build_mlp, Network, Neuron};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(rng: &mut ChaCha8Rng, net: &Network, n: usize) -> Dataset {
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..net.num_inputs()).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let targets: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..net.num_outputs()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        Dataset::new(Grid::from_rows(&inputs), Grid::from_rows(&targets), "rand").unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, net: &Network, n: usize) -> AdjointState {
        AdjointState {
            w: (0..net.num_weights()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            x: Grid::from_flat(
                n,
                net.num_constrained(),
                (0..n * net.num_constrained())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            ),
            lam: Grid::from_flat(
                n,
                net.num_constrained(),
                (0..n * net.num_constrained())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            ),
        }
    }

    /// Brute-force residual: recompute each neuron's pre-activation by
    /// scanning the raw edge list, independent of the adjacency tables.
    fn residual_oracle(net: &Network, w: &[f64], x_row: &[f64], input: &[f64]) -> Vec<f64> {
        let value_of = |id: usize| -> f64 {
            if let Some(pos) = net.input_ids().iter().position(|&i| i == id) {
                input[pos]
            } else {
                x_row[net.column_of_id(id).unwrap()]
            }
        };
        net.constrained_ids()
            .iter()
            .map(|&id| {
                let mut a = 0.0;
                for (widx, &(s, d)) in net.edges().iter().enumerate() {
                    if d == id {
                        a += w[widx] * value_of(s);
                    }
                }
                let idx = net.neurons().iter().position(|n| n.id == id).unwrap();
                if let Some(b) = net.bias_widx(idx) {
                    a += w[b];
                }
                x_row[net.column_of_id(id).unwrap()] - net.neurons()[idx].act.value(a)
            })
            .collect()
    }

    #[test]
    fn feasible_state_has_exactly_zero_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = build_mlp(&[2, 3, 2], ActivationKind::Tanh, ActivationKind::Logistic).unwrap();
        let data = random_dataset(&mut rng, &net, 5);
        let w: Vec<f64> = (0..net.num_weights()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let state = AdjointState::feasible(&net, w, &data).unwrap();
        let g = residual_grid(&net, &state.w, &state.x, &data).unwrap();
        assert!(g.iter().all(|v| v == 0.0), "feasibility must be exact");
    }

    #[test]
    fn single_identity_neuron_residual() {
        // One input (id 0), one identity output (id 1), weight 1, no bias.
        let net = Network::new(
            vec![
                Neuron { id: 0, act: ActivationKind::Identity, bias: false },
                Neuron { id: 1, act: ActivationKind::Identity, bias: false },
            ],
            vec![(0, 1)],
            vec![0],
            vec![1],
        )
        .unwrap();
        let g = constraint_residual(&net, &[1.0], &[3.0], &[2.0]).unwrap();
        assert_eq!(g, vec![1.0]);
    }

    #[test]
    fn residual_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let net = build_mlp(&[3, 4, 2], ActivationKind::Logistic, ActivationKind::Tanh).unwrap();
        let data = random_dataset(&mut rng, &net, 3);
        let state = random_state(&mut rng, &net, 3);
        for e in 0..3 {
            let got =
                constraint_residual(&net, &state.w, state.x.row(e), data.inputs.row(e)).unwrap();
            let want = residual_oracle(&net, &state.w, state.x.row(e), data.inputs.row(e));
            for (g, w_) in got.iter().zip(&want) {
                assert!((g - w_).abs() <= 1e-12, "{g} vs {w_}");
            }
        }
    }

    #[test]
    fn zero_multipliers_reduce_to_the_plain_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let net = build_mlp(&[2, 3, 1], ActivationKind::Tanh, ActivationKind::Identity).unwrap();
        let data = random_dataset(&mut rng, &net, 4);
        let mut state = random_state(&mut rng, &net, 4);
        state.lam = Grid::zeros(4, net.num_constrained());
        let obj = Objective::plain(LossKind::SquaredError);
        let l = lagrangian_value(&net, &state, &data, &obj).unwrap();
        let mut plain = 0.0;
        for e in 0..4 {
            let preds = net.predictions(state.x.row(e));
            plain += LossKind::SquaredError.value(&preds, data.targets.row(e));
        }
        assert!((l - plain).abs() <= 1e-12 * plain.abs().max(1.0));
    }

    #[test]
    fn feasible_state_with_matched_targets_has_zero_lagrangian() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let net = build_mlp(&[2, 2, 1], ActivationKind::Tanh, ActivationKind::Identity).unwrap();
        let inputs = Grid::from_rows(&[vec![0.2, -0.4], vec![1.0, 0.3]]);
        let w: Vec<f64> = (0..net.num_weights()).map(|_| rng.random_range(-1.0..1.0)).collect();
        // targets = the network's own predictions
        let x = net.forward_batch(&w, &inputs).unwrap();
        let targets = Grid::from_rows(&[
            net.predictions(x.row(0)).to_vec(),
            net.predictions(x.row(1)).to_vec(),
        ]);
        let data = Dataset::new(inputs, targets, "matched").unwrap();
        let state = AdjointState::feasible(&net, w, &data).unwrap();
        // any multipliers: feasibility kills the constraint term
        let mut state = state;
        state.lam = Grid::from_flat(
            2,
            net.num_constrained(),
            (0..2 * net.num_constrained()).map(|_| rng.random_range(-2.0..2.0)).collect(),
        );
        let obj = Objective::plain(LossKind::SquaredError);
        assert_eq!(lagrangian_value(&net, &state, &data, &obj).unwrap(), 0.0);
    }

    /// Term-by-term summation oracle for the Lagrangian value.
    fn value_oracle(net: &Network, state: &AdjointState, data: &Dataset, obj: &Objective) -> f64 {
        let mut total = 0.0;
        for e in 0..data.num_examples() {
            let g = residual_oracle(net, &state.w, state.x.row(e), data.inputs.row(e));
            for (col, gi) in g.iter().enumerate() {
                let (s, _) = eps_insensitive_residual(*gi, obj.eps);
                total += state.lam.get(e, col) * s + 0.5 * obj.rho * s * s;
            }
            let preds = net.predictions(state.x.row(e));
            total += obj.loss.value(&preds, data.targets.row(e));
        }
        total
    }

    #[test]
    fn lagrangian_value_matches_brute_force_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let net = build_mlp(&[2, 3, 2], ActivationKind::Tanh, ActivationKind::Logistic).unwrap();
        let data = random_dataset(&mut rng, &net, 4);
        let state = random_state(&mut rng, &net, 4);
        for obj in [
            Objective::plain(LossKind::SquaredError),
            Objective { loss: LossKind::CrossEntropyWithLogistic, rho: 0.3, eps: 0.0 },
            Objective { loss: LossKind::SquaredError, rho: 0.5, eps: 0.1 },
        ] {
            let got = lagrangian_value(&net, &state, &data, &obj).unwrap();
            let want = value_oracle(&net, &state, &data, &obj);
            assert!(rel_diff(got, want) <= 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn d_lam_is_the_residual_bit_for_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let net = build_mlp(&[2, 4, 1], ActivationKind::Tanh, ActivationKind::Identity).unwrap();
        let data = random_dataset(&mut rng, &net, 3);
        let state = random_state(&mut rng, &net, 3);
        let obj = Objective::plain(LossKind::SquaredError);
        let grads = block_gradients(&net, &state, &data, &obj).unwrap();
        let res = residual_grid(&net, &state.w, &state.x, &data).unwrap();
        assert_eq!(grads.d_lam.as_slice(), res.as_slice());
    }

    #[test]
    fn minimum_and_feasible_means_all_blocks_vanish() {
        let net = build_mlp(&[2, 2, 1], ActivationKind::Tanh, ActivationKind::Identity).unwrap();
        let inputs = Grid::from_rows(&[vec![0.5, -0.2]]);
        let w: Vec<f64> = (0..net.num_weights()).map(|i| 0.1 * (i as f64 + 1.0)).collect();
        let x = net.forward_batch(&w, &inputs).unwrap();
        let targets = Grid::from_rows(&[net.predictions(x.row(0)).to_vec()]);
        let data = Dataset::new(inputs, targets, "min").unwrap();
        let state = AdjointState::feasible(&net, w, &data).unwrap();
        let obj = Objective::plain(LossKind::SquaredError);
        let g = block_gradients(&net, &state, &data, &obj).unwrap();
        assert!(g.d_w.iter().all(|v| *v == 0.0));
        assert!(g.d_x.iter().all(|v| v == 0.0));
        assert!(g.d_lam.iter().all(|v| v == 0.0));
    }

    fn fd_check(net: &Network, state: &AdjointState, data: &Dataset, obj: &Objective) -> f64 {
        let flat = state.flatten();
        let (nw, ne, nc) = (state.w.len(), state.x.rows(), state.x.cols());
        let f = |v: &[f64]| {
            let s = AdjointState::unflatten(nw, ne, nc, v);
            lagrangian_value(net, &s, data, obj).unwrap()
        };
        let fd = finite_diff_gradient(f, &flat, 1e-5).unwrap();
        let grads = block_gradients(net, state, data, obj).unwrap();
        let mut analytic = grads.d_w.clone();
        analytic.extend(grads.d_x.iter());
        analytic.extend(grads.d_lam.iter());
        analytic
            .iter()
            .zip(&fd)
            .map(|(a, f)| rel_diff(*a, *f))
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let net = build_mlp(&[2, 3, 1], ActivationKind::Tanh, ActivationKind::Identity).unwrap();
        let data = random_dataset(&mut rng, &net, 3);
        let state = random_state(&mut rng, &net, 3);
        for obj in [
            Objective::plain(LossKind::SquaredError),
            Objective::plain(LossKind::CrossEntropyWithLogistic),
            Objective { loss: LossKind::SquaredError, rho: 0.7, eps: 0.0 },
        ] {
            let worst = fd_check(&net, &state, &data, &obj);
            assert!(worst <= 1e-6, "worst rel diff {worst} for {obj:?}");
        }
    }

    #[test]
    fn gradients_match_finite_differences_with_eps_dead_zone() {
        // Keep every |G| - eps comfortably away from the shrinkage kink.
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        let net = build_mlp(&[2, 3, 1], ActivationKind::Tanh, ActivationKind::Identity).unwrap();
        let data = random_dataset(&mut rng, &net, 2);
        let eps = 0.05;
        let state = loop {
            let s = random_state(&mut rng, &net, 2);
            let g = residual_grid(&net, &s.w, &s.x, &data).unwrap();
            if g.iter().all(|v| (v.abs() - eps).abs() > 1e-3) {
                break s;
            }
        };
        let obj = Objective { loss: LossKind::SquaredError, rho: 0.4, eps };
        let worst = fd_check(&net, &state, &data, &obj);
        assert!(worst <= 1e-6, "worst rel diff {worst}");
    }

    #[test]
    fn multiplier_term_is_linear_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let net = build_mlp(&[2, 3, 1], ActivationKind::Logistic, ActivationKind::Identity).unwrap();
        let data = random_dataset(&mut rng, &net, 3);
        let base = random_state(&mut rng, &net, 3);
        let lam1 = random_state(&mut rng, &net, 3).lam;
        let lam2 = random_state(&mut rng, &net, 3).lam;
        let (alpha, beta) = (0.7, -1.3);
        let obj = Objective { loss: LossKind::SquaredError, rho: 0.2, eps: 0.0 };

        let with_lam = |lam: &Grid| {
            let mut s = base.clone();
            s.lam = lam.clone();
            lagrangian_value(&net, &s, &data, &obj).unwrap()
        };
        let mixed = Grid::from_flat(
            3,
            net.num_constrained(),
            lam1.iter()
                .zip(lam2.iter())
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        );
        let zero = Grid::zeros(3, net.num_constrained());
        let lhs = with_lam(&mixed);
        let rhs = alpha * with_lam(&lam1) + beta * with_lam(&lam2)
            - (alpha + beta - 1.0) * with_lam(&zero);
        assert!(rel_diff(lhs, rhs) <= 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn finite_diff_basics() {
        let g = finite_diff_gradient(|v| v[0] * v[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() <= 1e-9);
        let g = finite_diff_gradient(|_| 4.2, &[1.0, 2.0], 1e-5).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        assert!(finite_diff_gradient(|v| v[0], &[1.0], 0.0).is_err());
        assert!(finite_diff_gradient(|v| (v[0] - 1.0).ln(), &[1.0], 1e-5).is_err());
    }

    #[test]
    fn empty_batch_is_a_usage_error() {
        let net = build_mlp(&[1, 1], ActivationKind::Identity, ActivationKind::Identity).unwrap();
        let data = Dataset::new(Grid::zeros(0, 1), Grid::zeros(0, 1), "empty").unwrap();
        let state = AdjointState {
            w: vec![0.0; 2],
            x: Grid::zeros(0, 1),
            lam: Grid::zeros(0, 1),
        };
        let obj = Objective::plain(LossKind::SquaredError);
        assert!(matches!(
            lagrangian_value(&net, &state, &data, &obj),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn state_doc_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let net = build_mlp(&[2, 2, 1], ActivationKind::Tanh, ActivationKind::Identity).unwrap();
        let state = random_state(&mut rng, &net, 3);
        let json = serde_json::to_string(&state.to_doc()).unwrap();
        let doc: StateDoc = serde_json::from_str(&json).unwrap();
        let back = AdjointState::from_doc(doc).unwrap();
        assert_eq!(state, back);
    }

    proptest! {
        #[test]
        fn prop_flatten_unflatten_round_trip(
            w in proptest::collection::vec(-1e6f64..1e6, 1..8),
            rows in 1usize..4,
            cols in 1usize..4,
        ) {
            let x: Vec<f64> = (0..rows * cols).map(|i| i as f64 * 0.5 - 3.0).collect();
            let lam: Vec<f64> = (0..rows * cols).map(|i| 1.0 - i as f64).collect();
            let state = AdjointState {
                w,
                x: Grid::from_flat(rows, cols, x),
                lam: Grid::from_flat(rows, cols, lam),
            };
            let flat = state.flatten();
            let back = AdjointState::unflatten(state.w.len(), rows, cols, &flat);
            prop_assert_eq!(state, back);
        }
    }
}
