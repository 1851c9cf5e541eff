//! Validate the hand-derived block gradients against central finite
//! differences of the Lagrangian over the flattened adjoint state.

use saddlenet::cli::{run_grad_check, GradCheckConfig};
use saddlenet::lagrangian::{
    block_gradients, finite_diff_gradient, lagrangian_value, rel_diff, AdjointState, Objective,
};
use saddlenet::sampler::{rng_for, sample_gradient_case};

fn main() {
    // One case in detail.
    let (case, state) = sample_gradient_case(&mut rng_for(42));
    let obj = Objective { loss: case.loss, rho: 0.1, eps: 0.0 };
    let grads = block_gradients(&case.net, &state, &case.data, &obj).unwrap();
    let mut analytic = grads.d_w.clone();
    analytic.extend(grads.d_x.iter());
    analytic.extend(grads.d_lam.iter());

    let (nw, ne, nc) = (state.w.len(), state.x.rows(), state.x.cols());
    let f = |v: &[f64]| {
        let s = AdjointState::unflatten(nw, ne, nc, v);
        lagrangian_value(&case.net, &s, &case.data, &obj).unwrap()
    };
    let fd = finite_diff_gradient(f, &state.flatten(), 1e-5).unwrap();
    let worst = analytic
        .iter()
        .zip(&fd)
        .map(|(a, f_)| rel_diff(*a, *f_))
        .fold(0.0f64, f64::max);
    println!(
        "one random case ({} weights, {} examples, {:?} loss): worst rel diff {worst:.3e}",
        nw, ne, case.loss
    );

    // The full suite the CLI and acceptance tests run.
    let report = run_grad_check(&GradCheckConfig::default()).unwrap();
    println!(
        "{} cases at h={}: max_rel={:.3e} (tol {}), worst coordinate {:?}",
        report.cases, report.h, report.max_rel, report.tol, report.worst
    );
}
