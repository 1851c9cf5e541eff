//! Backpropagation emerges at the saddle point: solving for the multipliers
//! that make the Lagrangian stationary in the output block and substituting
//! them into its weight gradient reproduces the backprop gradient.

use saddlenet::activation::ActivationKind;
use saddlenet::backprop::{backprop_gradient, solve_adjoint, verify_bp_equivalence};
use saddlenet::cli::{run_verify_bp, VerifyBpConfig};
use saddlenet::data::Dataset;
use saddlenet::grid::Grid;
use saddlenet::lagrangian::{block_gradients, LossKind, Objective};
use saddlenet::network::build_mlp;

fn main() {
    // Closed-form warm-up: one weight, one bias, loss (w*1 + b)^2.
    let net = build_mlp(&[1, 1], ActivationKind::Identity, ActivationKind::Identity).unwrap();
    let data = Dataset::new(
        Grid::from_rows(&[vec![1.0]]),
        Grid::from_rows(&[vec![0.0]]),
        "one",
    )
    .unwrap();
    let w = vec![0.5, 0.0];
    let bp = backprop_gradient(&net, &w, &data, LossKind::SquaredError).unwrap();
    let solution = solve_adjoint(&net, &w, &data, LossKind::SquaredError).unwrap();
    println!("multipliers at the saddle: {:?}", solution.lam_star.row(0));
    let state = solution.into_state(w.clone());
    let lagr = block_gradients(&net, &state, &data, &Objective::plain(LossKind::SquaredError))
        .unwrap();
    println!("backprop gradient:    {bp:?}");
    println!("Lagrangian d_w:       {:?}", lagr.d_w);

    let report = verify_bp_equivalence(&net, &w, &data, LossKind::SquaredError).unwrap();
    println!("single net: max_abs={} max_rel={}", report.max_abs, report.max_rel);

    // The sweep the acceptance suite runs: 100 random networks.
    let report = run_verify_bp(&VerifyBpConfig { nets: 100, seed: 1 }).unwrap();
    println!(
        "100 random nets: max_abs={:.3e} max_rel={:.3e} pass={}",
        report.max_abs, report.max_rel, report.pass
    );
}
