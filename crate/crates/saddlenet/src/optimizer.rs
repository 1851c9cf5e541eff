//! Saddle-point search over the learning adjoint space: simultaneous
//! gradient descent on weights and neural outputs, gradient ascent on the
//! multipliers. Every update reads only its structural neighborhood, which
//! [`locality_audit`] checks exhaustively by cross-perturbation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lagrangian::{evaluate, AdjointState, BlockGradients, Evaluation, LossKind, Objective};
use crate::network::Network;

/// Update rule for the simultaneous step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Plain gradient descent-ascent: one gradient evaluation per step.
    Gda,
    /// Extragradient: gradients for the real step are evaluated at a
    /// predicted point one step ahead, which stabilizes bilinear dynamics.
    Extragradient,
}

/// Search hyperparameters: per-block step sizes, stabilization, and the
/// stopping rule.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaddleConfig {
    /// Step size for the weight block (descent).
    pub eta_w: f64,
    /// Step size for the neural-output block (descent).
    pub eta_x: f64,
    /// Step size for the multiplier block (ascent).
    pub eta_lam: f64,
    pub max_iters: usize,
    pub method: Method,
    /// Augmented penalty coefficient; 0 gives the plain Lagrangian, which
    /// plain GDA is known to cycle on.
    pub rho: f64,
    /// Dead-zone half-width for eps-insensitive constraints; 0 disables.
    pub eps: f64,
    /// Convergence requires the raw residual infinity norm at or below this.
    pub residual_tol: f64,
    /// ... and loss improvement over the stall window at or below this.
    pub loss_tol: f64,
    pub seed: u64,
    /// Reserved contract marker: evaluation already reduces over examples in
    /// index order, so runs are bitwise reproducible either way.
    pub deterministic: bool,
}

impl Default for SaddleConfig {
    fn default() -> Self {
        SaddleConfig {
            eta_w: 0.05,
            eta_x: 0.05,
            eta_lam: 0.05,
            max_iters: 50_000,
            method: Method::Gda,
            rho: 0.1,
            eps: 0.0,
            residual_tol: 1e-3,
            loss_tol: 1e-8,
            seed: 0,
            deterministic: true,
        }
    }
}

impl SaddleConfig {
    pub fn validate(&self) -> Result<()> {
        let field = |field: &str, msg: String| Err(Error::Config {
            field: field.into(),
            msg,
        });
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let nonnegative = |v: f64| v.is_finite() && v >= 0.0;
        if !positive(self.eta_w) {
            return field("eta_w", format!("must be > 0, got {}", self.eta_w));
        }
        if !positive(self.eta_x) {
            return field("eta_x", format!("must be > 0, got {}", self.eta_x));
        }
        if !positive(self.eta_lam) {
            return field("eta_lam", format!("must be > 0, got {}", self.eta_lam));
        }
        if self.max_iters == 0 {
            return field("max_iters", "must be >= 1".into());
        }
        if !nonnegative(self.rho) {
            return field("rho", format!("must be >= 0, got {}", self.rho));
        }
        if !nonnegative(self.eps) {
            return field("eps", format!("must be >= 0, got {}", self.eps));
        }
        if !positive(self.residual_tol) {
            return field("residual_tol", format!("must be > 0, got {}", self.residual_tol));
        }
        if !positive(self.loss_tol) {
            return field("loss_tol", format!("must be > 0, got {}", self.loss_tol));
        }
        Ok(())
    }

    pub fn objective(&self, loss: LossKind) -> Objective {
        Objective {
            loss,
            rho: self.rho,
            eps: self.eps,
        }
    }
}

/// Convergence additionally requires the loss to have stalled over this many
/// iterations.
pub const STALL_WINDOW: usize = 100;

/// One record per completed iteration, describing the state the step was
/// taken from. Serialized as JSON lines by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub it: usize,
    #[serde(rename = "L")]
    pub value: f64,
    pub loss: f64,
    pub res_inf: f64,
    pub res_2: f64,
    pub gw: f64,
    pub gx: f64,
    pub gl: f64,
}

pub type TrainTrace = Vec<TraceRecord>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    IterLimit,
}

/// State metrics at the returned iterate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterMetrics {
    pub value: f64,
    pub loss: f64,
    pub res_inf: f64,
    pub res_2: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub state: AdjointState,
    pub trace: TrainTrace,
    pub termination: Termination,
    pub final_metrics: IterMetrics,
    pub iterations: usize,
}

/// Weight init: uniform(-r, r) with r = 1/sqrt(fan-in of the target neuron),
/// sampled in weight-layout order; outputs start feasible and multipliers at
/// zero, so the first ascent step is a no-op and early dynamics are
/// loss-driven.
pub fn init_state(net: &Network, data: &Dataset, seed: u64) -> Result<AdjointState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0; net.num_weights()];
    let fan_in = |i: usize| -> f64 {
        (net.incoming(i).len() + usize::from(net.bias_widx(i).is_some())) as f64
    };
    for (widx, &(_, dst)) in net.edges().iter().enumerate() {
        let r = 1.0 / fan_in(net.index_of(dst)).sqrt();
        w[widx] = rng.random_range(-r..r);
    }
    for (i, _) in net.neurons().iter().enumerate() {
        if let Some(b) = net.bias_widx(i) {
            let r = 1.0 / fan_in(i).sqrt();
            w[b] = rng.random_range(-r..r);
        }
    }
    AdjointState::feasible(net, w, data)
}

fn apply_update(state: &AdjointState, g: &BlockGradients, cfg: &SaddleConfig) -> AdjointState {
    let w = state
        .w
        .iter()
        .zip(&g.d_w)
        .map(|(w, d)| w - cfg.eta_w * d)
        .collect();
    let x = Grid::from_flat(
        state.x.rows(),
        state.x.cols(),
        state
            .x
            .as_slice()
            .iter()
            .zip(g.d_x.as_slice())
            .map(|(x, d)| x - cfg.eta_x * d)
            .collect(),
    );
    let lam = Grid::from_flat(
        state.lam.rows(),
        state.lam.cols(),
        state
            .lam
            .as_slice()
            .iter()
            .zip(g.d_lam.as_slice())
            .map(|(l, d)| l + cfg.eta_lam * d)
            .collect(),
    );
    AdjointState { w, x, lam }
}

/// Single dispatch point for both update rules; the bilinear probe below
/// runs through here too, so the two regimes are distinguished by exactly
/// the code the trainer uses.
fn step_with<G>(state: &AdjointState, cfg: &SaddleConfig, mut grads: G) -> Result<AdjointState>
where
    G: FnMut(&AdjointState) -> Result<BlockGradients>,
{
    let g = grads(state)?;
    if !g.is_finite() {
        return Err(Error::NonFinite("block gradients".into()));
    }
    match cfg.method {
        Method::Gda => Ok(apply_update(state, &g, cfg)),
        Method::Extragradient => {
            let predicted = apply_update(state, &g, cfg);
            let g2 = grads(&predicted)?;
            if !g2.is_finite() {
                return Err(Error::NonFinite("block gradients at prediction point".into()));
            }
            Ok(apply_update(state, &g2, cfg))
        }
    }
}

/// One simultaneous step: all three blocks move using gradients of the same
/// snapshot, never of a partially updated state.
pub fn gda_step(
    net: &Network,
    state: &AdjointState,
    data: &Dataset,
    loss: LossKind,
    cfg: &SaddleConfig,
) -> Result<AdjointState> {
    cfg.validate()?;
    state.check_shapes(net, data)?;
    let obj = cfg.objective(loss);
    step_with(state, cfg, |s| Ok(evaluate(net, s, data, &obj)?.grads)).map_err(|e| match e {
        Error::NonFinite(_) => Error::Diverged {
            iteration: 0,
            trace: Box::new(Vec::new()),
        },
        other => other,
    })
}

fn metrics_of(eval: &Evaluation) -> IterMetrics {
    IterMetrics {
        value: eval.value,
        loss: eval.loss,
        res_inf: eval.res_inf,
        res_2: eval.res_2,
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The full local-propagation loop. Stops when the raw residual infinity
/// norm is within `residual_tol` *and* the loss has improved by at most
/// `loss_tol` over the last [`STALL_WINDOW`] iterations, or at `max_iters`.
/// Non-finite values abort with [`Error::Diverged`] carrying the partial
/// trace.
pub fn train(
    net: &Network,
    init: AdjointState,
    data: &Dataset,
    loss: LossKind,
    cfg: &SaddleConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    init.check_shapes(net, data)?;
    let obj = cfg.objective(loss);
    let mut state = init;
    let mut trace: TrainTrace = Vec::new();
    let mut loss_history: Vec<f64> = Vec::new();
    let mut steps = 0usize;

    loop {
        let eval = evaluate(net, &state, data, &obj)?;
        let finite =
            eval.value.is_finite() && eval.loss.is_finite() && eval.grads.is_finite();
        if !finite {
            return Err(Error::Diverged {
                iteration: steps,
                trace: Box::new(trace),
            });
        }
        loss_history.push(eval.loss);

        let stalled = steps >= STALL_WINDOW
            && loss_history[steps - STALL_WINDOW] - eval.loss <= cfg.loss_tol;
        if stalled && eval.res_inf <= cfg.residual_tol {
            return Ok(TrainOutcome {
                state,
                trace,
                termination: Termination::Converged,
                final_metrics: metrics_of(&eval),
                iterations: steps,
            });
        }
        if steps == cfg.max_iters {
            return Ok(TrainOutcome {
                state,
                trace,
                termination: Termination::IterLimit,
                final_metrics: metrics_of(&eval),
                iterations: steps,
            });
        }

        // Reuse this iteration's gradients for the first phase of the step;
        // extragradient's second evaluation happens inside step_with.
        let mut first = Some(eval.grads.clone());
        let next = step_with(&state, cfg, |s| match first.take() {
            Some(g) => Ok(g),
            None => Ok(evaluate(net, s, data, &obj)?.grads),
        });
        state = match next {
            Ok(s) => s,
            Err(Error::NonFinite(_)) => {
                return Err(Error::Diverged {
                    iteration: steps,
                    trace: Box::new(trace),
                });
            }
            Err(other) => return Err(other),
        };
        steps += 1;
        trace.push(TraceRecord {
            it: steps,
            value: eval.value,
            loss: eval.loss,
            res_inf: eval.res_inf,
            res_2: eval.res_2,
            gw: norm2(&eval.grads.d_w),
            gx: eval.grads.d_x.two_norm(),
            gl: eval.grads.d_lam.two_norm(),
        });
    }
}

/// Scalar bilinear probe `L(x, lam) = lam * x`: the canonical problem on
/// which plain GDA spirals outward and extragradient contracts. Runs through
/// the same step dispatch as network training, with `d_x = lam` and
/// `d_lam = x`. Returns the trajectory including the start point.
pub fn simulate_bilinear(
    start: (f64, f64),
    eta: f64,
    steps: usize,
    method: Method,
) -> Result<Vec<(f64, f64)>> {
    let cfg = SaddleConfig {
        eta_w: eta,
        eta_x: eta,
        eta_lam: eta,
        method,
        ..SaddleConfig::default()
    };
    cfg.validate()?;
    let mut state = AdjointState {
        w: Vec::new(),
        x: Grid::from_flat(1, 1, vec![start.0]),
        lam: Grid::from_flat(1, 1, vec![start.1]),
    };
    let grads = |s: &AdjointState| {
        Ok(BlockGradients {
            d_w: Vec::new(),
            d_x: Grid::from_flat(1, 1, vec![s.lam.get(0, 0)]),
            d_lam: Grid::from_flat(1, 1, vec![s.x.get(0, 0)]),
        })
    };
    let mut path = Vec::with_capacity(steps + 1);
    path.push(start);
    for _ in 0..steps {
        state = step_with(&state, &cfg, grads)?;
        path.push((state.x.get(0, 0), state.lam.get(0, 0)));
    }
    Ok(path)
}

// ---------------------------------------------------------------------------
// Locality audit
// ---------------------------------------------------------------------------

/// A perturbable variable of the audit: adjoint-space coordinates plus the
/// dataset inputs (per-example separability covers those too).
#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    W(usize),
    X(usize, usize),
    Lam(usize, usize),
    In(usize, usize),
}

impl std::fmt::Display for Var {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Var::W(i) => write!(f, "w[{i}]"),
            Var::X(e, c) => write!(f, "x[e={e},col={c}]"),
            Var::Lam(e, c) => write!(f, "lam[e={e},col={c}]"),
            Var::In(e, p) => write!(f, "input[e={e},dim={p}]"),
        }
    }
}

/// Structural neighborhoods of the plain Lagrangian (`rho = eps = 0`):
///
/// - `d_w` into neuron `i` reads `lam_i` (all examples) and the ingredients
///   of `i`'s pre-activation: parent outputs, the example inputs feeding
///   `i`, and the sibling weights into `i` (those enter through the
///   activation slope `act'(a_i)`).
/// - `d_x` of neuron `i` reads its own multiplier, each child's multiplier,
///   incoming weights, and pre-activation parents, and the loss at `i` for
///   output neurons.
/// - `d_lam` of neuron `i` reads only neuron `i`'s own constraint.
///
/// x and lambda components are per-example; nothing of example `e` may react
/// to a variable of another example.
struct Neighborhood<'a> {
    net: &'a Network,
    /// weight index -> (target neuron index, source neuron index or bias)
    weight_target: Vec<usize>,
}

impl<'a> Neighborhood<'a> {
    fn new(net: &'a Network) -> Self {
        let mut weight_target = vec![usize::MAX; net.num_weights()];
        for (widx, &(_, d)) in net.edges().iter().enumerate() {
            weight_target[widx] = net.index_of(d);
        }
        for (i, _) in net.neurons().iter().enumerate() {
            if let Some(b) = net.bias_widx(i) {
                weight_target[b] = i;
            }
        }
        Neighborhood { net, weight_target }
    }

    fn constrained_parents(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.net
            .incoming(i)
            .iter()
            .filter_map(|&(pi, _)| self.net.constrained_col(pi))
    }

    fn input_parents(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let net = self.net;
        net.incoming(i).iter().filter_map(move |&(pi, _)| {
            let id = net.neuron_at(pi).id;
            net.input_ids().iter().position(|&x| x == id)
        })
    }

    /// May perturbing `u` legitimately change the update of `v`?
    fn affects(&self, u: Var, v: Var) -> bool {
        let net = self.net;
        match v {
            Var::W(widx) => {
                let i = self.weight_target[widx];
                let icol = net.constrained_col(i).expect("weights only enter non-inputs");
                match u {
                    Var::Lam(_, c) => c == icol,
                    Var::X(_, c) => self.constrained_parents(i).any(|p| p == c),
                    Var::In(_, p) => self.input_parents(i).any(|q| q == p),
                    Var::W(uw) => self.weight_target[uw] == i,
                }
            }
            Var::X(e, col) => {
                let i = net.constrained_indices()[col];
                let is_output = net.is_output(net.neuron_at(i).id);
                match u {
                    Var::Lam(ue, c) => {
                        ue == e
                            && (c == col
                                || net.children_of(i).iter().any(|&(k, _)| {
                                    net.constrained_col(k) == Some(c)
                                }))
                    }
                    Var::X(ue, c) => {
                        ue == e
                            && ((is_output && c == col)
                                || net.children_of(i).iter().any(|&(k, _)| {
                                    self.constrained_parents(k).any(|p| p == c)
                                }))
                    }
                    Var::W(uw) => {
                        let t = self.weight_target[uw];
                        net.children_of(i).iter().any(|&(k, _)| k == t)
                    }
                    Var::In(ue, p) => {
                        ue == e
                            && net.children_of(i).iter().any(|&(k, _)| {
                                self.input_parents(k).any(|q| q == p)
                            })
                    }
                }
            }
            Var::Lam(e, col) => {
                let i = net.constrained_indices()[col];
                match u {
                    Var::X(ue, c) => {
                        ue == e && (c == col || self.constrained_parents(i).any(|p| p == c))
                    }
                    Var::W(uw) => self.weight_target[uw] == i,
                    Var::In(ue, p) => ue == e && self.input_parents(i).any(|q| q == p),
                    Var::Lam(_, _) => false,
                }
            }
            Var::In(_, _) => unreachable!("inputs are perturbed, never audited"),
        }
    }
}

/// Exhaustive cross-perturbation audit of the plain Lagrangian's gradients.
/// Returns violation descriptions, empty when every update component is
/// bitwise invariant to perturbations outside its neighborhood.
pub fn locality_violations(
    net: &Network,
    state: &AdjointState,
    data: &Dataset,
    loss: LossKind,
    limit: usize,
) -> Result<Vec<String>> {
    state.check_shapes(net, data)?;
    let obj = Objective::plain(loss);
    let base = evaluate(net, state, data, &obj)?.grads;
    let hood = Neighborhood::new(net);
    let (ne, nc, nw) = (data.num_examples(), net.num_constrained(), net.num_weights());

    let mut perturbables = Vec::new();
    for i in 0..nw {
        perturbables.push(Var::W(i));
    }
    for e in 0..ne {
        for c in 0..nc {
            perturbables.push(Var::X(e, c));
            perturbables.push(Var::Lam(e, c));
        }
    }
    for e in 0..ne {
        for p in 0..data.input_dim() {
            perturbables.push(Var::In(e, p));
        }
    }

    const DELTA: f64 = 0.328_125; // exact binary fraction

    let mut violations = Vec::new();
    for &u in &perturbables {
        let mut s = state.clone();
        let mut d = data.clone();
        match u {
            Var::W(i) => s.w[i] += DELTA,
            Var::X(e, c) => s.x.set(e, c, s.x.get(e, c) + DELTA),
            Var::Lam(e, c) => s.lam.set(e, c, s.lam.get(e, c) + DELTA),
            Var::In(e, p) => d.inputs.set(e, p, d.inputs.get(e, p) + DELTA),
        }
        let perturbed = evaluate(net, &s, &d, &obj)?.grads;

        let mut check = |v: Var, before: f64, after: f64| {
            if !hood.affects(u, v) && before.to_bits() != after.to_bits() {
                if violations.len() < limit {
                    violations.push(format!(
                        "perturbing {u} changed d_{v}: {before} -> {after}"
                    ));
                } else {
                    violations.push(String::new());
                }
            }
        };
        for i in 0..nw {
            check(Var::W(i), base.d_w[i], perturbed.d_w[i]);
        }
        for e in 0..ne {
            for c in 0..nc {
                check(Var::X(e, c), base.d_x.get(e, c), perturbed.d_x.get(e, c));
                check(
                    Var::Lam(e, c),
                    base.d_lam.get(e, c),
                    perturbed.d_lam.get(e, c),
                );
            }
        }
    }
    violations.retain(|s| !s.is_empty());
    Ok(violations)
}

/// True iff the exhaustive audit finds no locality violation.
pub fn locality_audit(
    net: &Network,
    state: &AdjointState,
    data: &Dataset,
    loss: LossKind,
) -> Result<bool> {
    Ok(locality_violations(net, state, data, loss, 16)?.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::lagrangian::block_gradients;
    use crate::network::build_mlp;

    fn small_setup() -> (Network, Dataset, AdjointState) {
        let net = build_mlp(&[2, 3, 2], ActivationKind::Tanh, ActivationKind::Identity).unwrap();
        let inputs = Grid::from_rows(&[vec![0.3, -0.9], vec![-1.1, 0.4], vec![0.7, 0.2]]);
        let targets = Grid::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        let data = Dataset::new(inputs, targets, "small").unwrap();
        let mut state = init_state(&net, &data, 42).unwrap();
        // move off the feasible manifold so every block is active
        for v in state.x.as_mut_slice() {
            *v += 0.1;
        }
        for (k, v) in state.lam.as_mut_slice().iter_mut().enumerate() {
            *v = 0.2 - 0.03 * k as f64;
        }
        (net, data, state)
    }

    #[test]
    fn zero_gradients_leave_the_state_unchanged() {
        // feasible, matched targets, lam = 0: a genuine fixed point
        let net = build_mlp(&[1, 1], ActivationKind::Identity, ActivationKind::Identity).unwrap();
        let inputs = Grid::from_rows(&[vec![1.0]]);
        let w = vec![0.5, 0.0];
        let x = net.forward_batch(&w, &inputs).unwrap();
        let targets = Grid::from_rows(&[net.predictions(x.row(0)).to_vec()]);
        let data = Dataset::new(inputs, targets, "fp").unwrap();
        let state = AdjointState::feasible(&net, w, &data).unwrap();
        let cfg = SaddleConfig::default();
        let next = gda_step(&net, &state, &data, LossKind::SquaredError, &cfg).unwrap();
        assert_eq!(state, next);
    }

    #[test]
    fn multiplier_update_is_componentwise_ascent_on_the_residual() {
        let (net, data, state) = small_setup();
        let cfg = SaddleConfig {
            rho: 0.0,
            ..SaddleConfig::default()
        };
        let g = block_gradients(&net, &state, &data, &cfg.objective(LossKind::SquaredError))
            .unwrap();
        let next = gda_step(&net, &state, &data, LossKind::SquaredError, &cfg).unwrap();
        for e in 0..data.num_examples() {
            for c in 0..net.num_constrained() {
                let expect = state.lam.get(e, c) + cfg.eta_lam * g.d_lam.get(e, c);
                assert_eq!(next.lam.get(e, c).to_bits(), expect.to_bits());
            }
        }
    }

    #[test]
    fn bilinear_single_gda_step() {
        let path = simulate_bilinear((1.0, 1.0), 0.1, 1, Method::Gda).unwrap();
        assert_eq!(path[1], (0.9, 1.1));
    }

    #[test]
    fn bilinear_radius_grows_under_gda_and_shrinks_under_extragradient() {
        let radius = |p: &(f64, f64)| (p.0 * p.0 + p.1 * p.1).sqrt();
        let gda = simulate_bilinear((1.0, 1.0), 0.1, 1000, Method::Gda).unwrap();
        for pair in gda.windows(2) {
            assert!(
                radius(&pair[1]) > radius(&pair[0]),
                "gda radius must grow monotonically"
            );
        }
        let eg = simulate_bilinear((1.0, 1.0), 0.1, 1000, Method::Extragradient).unwrap();
        for pair in eg.windows(2) {
            assert!(
                radius(&pair[1]) < radius(&pair[0]),
                "extragradient radius must shrink monotonically"
            );
        }
    }

    #[test]
    fn step_is_simultaneous_not_gauss_seidel() {
        let (net, data, state) = small_setup();
        let cfg = SaddleConfig::default();
        let next = gda_step(&net, &state, &data, LossKind::SquaredError, &cfg).unwrap();
        // assemble the update by hand from a snapshot of the gradients
        let g = block_gradients(&net, &state, &data, &cfg.objective(LossKind::SquaredError))
            .unwrap();
        let manual = apply_update(&state, &g, &cfg);
        assert_eq!(next, manual);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let (net, data, _) = small_setup();
        let cfg = SaddleConfig {
            max_iters: 50,
            ..SaddleConfig::default()
        };
        let run = || {
            let init = init_state(&net, &data, cfg.seed).unwrap();
            train(&net, init, &data, LossKind::SquaredError, &cfg).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.state, b.state);
    }

    #[test]
    fn fixed_point_converges_at_the_stall_window() {
        let net = build_mlp(&[1, 1], ActivationKind::Identity, ActivationKind::Identity).unwrap();
        let inputs = Grid::from_rows(&[vec![1.0]]);
        let w = vec![0.5, 0.0];
        let x = net.forward_batch(&w, &inputs).unwrap();
        let targets = Grid::from_rows(&[net.predictions(x.row(0)).to_vec()]);
        let data = Dataset::new(inputs, targets, "fp").unwrap();
        let state = AdjointState::feasible(&net, w, &data).unwrap();
        let cfg = SaddleConfig::default();
        let out = train(&net, state.clone(), &data, LossKind::SquaredError, &cfg).unwrap();
        assert_eq!(out.termination, Termination::Converged);
        assert_eq!(out.iterations, STALL_WINDOW);
        assert_eq!(out.trace.len(), STALL_WINDOW);
        assert_eq!(out.state, state, "fixed point must not move");
    }

    #[test]
    fn one_iteration_budget_stops_at_the_limit() {
        let (net, data, state) = small_setup();
        let cfg = SaddleConfig {
            max_iters: 1,
            ..SaddleConfig::default()
        };
        let out = train(&net, state, &data, LossKind::SquaredError, &cfg).unwrap();
        assert_eq!(out.termination, Termination::IterLimit);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn divergence_carries_the_iteration_and_partial_trace() {
        let (net, data, state) = small_setup();
        let cfg = SaddleConfig {
            eta_w: 1e12,
            eta_x: 1e12,
            eta_lam: 1e12,
            rho: 0.0,
            ..SaddleConfig::default()
        };
        match train(&net, state, &data, LossKind::SquaredError, &cfg) {
            Err(Error::Diverged { iteration, trace }) => {
                assert!(iteration >= 1, "first evaluation is finite");
                assert_eq!(trace.len(), iteration);
                assert!(trace.iter().all(|r| r.value.is_finite()));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_names_the_field() {
        let cfg = SaddleConfig {
            eta_w: -1.0,
            ..SaddleConfig::default()
        };
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "eta_w"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn init_state_is_feasible_and_deterministic() {
        let (net, data, _) = small_setup();
        let a = init_state(&net, &data, 7).unwrap();
        let b = init_state(&net, &data, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.lam.iter().all(|v| v == 0.0));
        let g = crate::lagrangian::residual_grid(&net, &a.w, &a.x, &data).unwrap();
        assert!(g.iter().all(|v| v == 0.0));
        let c = init_state(&net, &data, 8).unwrap();
        assert_ne!(a.w, c.w);
    }

    #[test]
    fn locality_audit_is_clean_on_a_2_3_2_network() {
        let (net, data, state) = small_setup();
        let violations =
            locality_violations(&net, &state, &data, LossKind::SquaredError, 16).unwrap();
        assert!(violations.is_empty(), "{violations:#?}");
        assert!(locality_audit(&net, &state, &data, LossKind::SquaredError).unwrap());
    }

    #[test]
    fn disjoint_branches_do_not_interact() {
        use crate::network::{Network, Neuron};
        // Two independent paths: 0 -> 2 -> 4 and 1 -> 3 -> 5.
        let mk = |id, bias| Neuron {
            id,
            act: ActivationKind::Tanh,
            bias,
        };
        let net = Network::new(
            vec![
                mk(0, false),
                mk(1, false),
                mk(2, true),
                mk(3, true),
                mk(4, true),
                mk(5, true),
            ],
            vec![(0, 2), (1, 3), (2, 4), (3, 5)],
            vec![0, 1],
            vec![4, 5],
        )
        .unwrap();
        let inputs = Grid::from_rows(&[vec![0.6, -0.2]]);
        let targets = Grid::from_rows(&[vec![0.3, 0.8]]);
        let data = Dataset::new(inputs, targets, "branches").unwrap();
        let mut state = init_state(&net, &data, 9).unwrap();
        for v in state.x.as_mut_slice() {
            *v += 0.2;
        }
        let obj = Objective::plain(LossKind::SquaredError);
        let base = evaluate(&net, &state, &data, &obj).unwrap().grads;

        // perturb the multiplier of branch-B neuron 3: branch A's weight
        // gradients (edges 0->2 and 2->4, biases of 2 and 4) are unchanged
        let mut poked = state.clone();
        let col3 = net.column_of_id(3).unwrap();
        poked.lam.set(0, col3, poked.lam.get(0, col3) + 1.0);
        let after = evaluate(&net, &poked, &data, &obj).unwrap().grads;
        let branch_a_weights = [0usize, 2]; // edge indices (0,2) and (2,4)
        for widx in branch_a_weights {
            assert_eq!(base.d_w[widx].to_bits(), after.d_w[widx].to_bits());
        }
        // full audit agrees too
        assert!(locality_audit(&net, &state, &data, LossKind::SquaredError).unwrap());
    }

    #[test]
    fn extragradient_step_uses_gradients_at_the_prediction_point() {
        let (net, data, state) = small_setup();
        let cfg = SaddleConfig {
            method: Method::Extragradient,
            ..SaddleConfig::default()
        };
        let obj = cfg.objective(LossKind::SquaredError);
        let next = gda_step(&net, &state, &data, LossKind::SquaredError, &cfg).unwrap();
        // assemble the two-phase update by hand
        let g1 = evaluate(&net, &state, &data, &obj).unwrap().grads;
        let predicted = apply_update(&state, &g1, &cfg);
        let g2 = evaluate(&net, &predicted, &data, &obj).unwrap().grads;
        let manual = apply_update(&state, &g2, &cfg);
        assert_eq!(next, manual);
        // and it differs from the plain step
        let plain = apply_update(&state, &g1, &cfg);
        assert_ne!(next, plain);
    }

    #[test]
    fn augmented_training_reduces_the_residual_from_an_infeasible_start() {
        // feasible starts have residual exactly 0, so the residual-descent
        // property is exercised from a perturbed (infeasible) state
        let net = build_mlp(&[2, 4, 1], ActivationKind::Tanh, ActivationKind::Identity).unwrap();
        let data = crate::data::gen_xor();
        let cfg = SaddleConfig {
            eta_w: 0.1,
            eta_x: 0.025,
            eta_lam: 0.025,
            rho: 0.5,
            seed: 5,
            ..SaddleConfig::default()
        };
        let mut state = init_state(&net, &data, cfg.seed).unwrap();
        for (k, v) in state.x.as_mut_slice().iter_mut().enumerate() {
            *v += 0.3 + 0.02 * (k % 5) as f64;
        }
        let initial = crate::lagrangian::residual_grid(&net, &state.w, &state.x, &data)
            .unwrap()
            .two_norm();
        assert!(initial > 0.1, "start must be infeasible");
        let out = train(&net, state, &data, LossKind::SquaredError, &cfg).unwrap();
        assert!(
            out.final_metrics.res_2 <= initial,
            "residual 2-norm grew: {} -> {}",
            initial,
            out.final_metrics.res_2
        );
    }

    #[test]
    fn cross_example_perturbations_never_leak() {
        let (net, data, state) = small_setup();
        let obj = Objective::plain(LossKind::SquaredError);
        let base = evaluate(&net, &state, &data, &obj).unwrap().grads;

        // perturb one variable of example 0; every row of other examples is
        // bitwise unchanged
        let mut s = state.clone();
        s.x.set(0, 1, s.x.get(0, 1) + 0.5);
        let after = evaluate(&net, &s, &data, &obj).unwrap().grads;
        for e in 1..data.num_examples() {
            assert_eq!(base.d_x.row(e), after.d_x.row(e));
            assert_eq!(base.d_lam.row(e), after.d_lam.row(e));
        }

        // perturbing an input datum of example 0 leaves other examples'
        // residual gradients untouched
        let mut d = data.clone();
        d.inputs.set(0, 0, d.inputs.get(0, 0) + 0.5);
        let after = evaluate(&net, &state, &d, &obj).unwrap().grads;
        for e in 1..data.num_examples() {
            assert_eq!(base.d_lam.row(e), after.d_lam.row(e));
        }
    }
}
