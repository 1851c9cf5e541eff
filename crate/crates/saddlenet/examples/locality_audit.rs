//! Locality as a checkable property: every update component reads only its
//! structural neighborhood. The audit perturbs each variable in turn and
//! requires, bitwise, that nothing outside the perturbed variable's
//! neighborhood reacts.

use saddlenet::activation::ActivationKind;
use saddlenet::data::Dataset;
use saddlenet::grid::Grid;
use saddlenet::lagrangian::{evaluate, LossKind, Objective};
use saddlenet::network::build_mlp;
use saddlenet::optimizer::{init_state, locality_violations};

fn main() {
    let net = build_mlp(&[2, 3, 2], ActivationKind::Tanh, ActivationKind::Identity).unwrap();
    let inputs = Grid::from_rows(&[vec![0.3, -0.9], vec![-1.1, 0.4], vec![0.7, 0.2]]);
    let targets = Grid::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
    let data = Dataset::new(inputs, targets, "audit").unwrap();

    let mut state = init_state(&net, &data, 4242).unwrap();
    for (k, v) in state.x.as_mut_slice().iter_mut().enumerate() {
        *v += 0.11 + 0.01 * k as f64;
    }
    for (k, v) in state.lam.as_mut_slice().iter_mut().enumerate() {
        *v = 0.4 - 0.05 * k as f64;
    }

    let violations =
        locality_violations(&net, &state, &data, LossKind::SquaredError, 8).unwrap();
    println!(
        "exhaustive audit on [2,3,2] over {} weights + {} outputs + {} multipliers + {} inputs:",
        net.num_weights(),
        state.x.as_slice().len(),
        state.lam.as_slice().len(),
        data.inputs.as_slice().len(),
    );
    println!("violations: {}", violations.len());

    // Per-example separability, shown directly: perturb one multiplier of
    // example 0 and compare example 1's gradients bit for bit.
    let obj = Objective::plain(LossKind::SquaredError);
    let base = evaluate(&net, &state, &data, &obj).unwrap().grads;
    let mut poked = state.clone();
    poked.lam.set(0, 2, poked.lam.get(0, 2) + 1.0);
    let after = evaluate(&net, &poked, &data, &obj).unwrap().grads;
    let identical = base
        .d_x
        .row(1)
        .iter()
        .zip(after.d_x.row(1))
        .all(|(a, b)| a.to_bits() == b.to_bits());
    println!("example 1 untouched by example 0's multiplier: {identical}");
}
