//! Support neurons from multiplier magnitudes: training XOR with an
//! eps-insensitive constraint leaves one hidden unit's multipliers at
//! exactly zero across every example — its constraint never shaped the
//! solution — and pruning it leaves the network's predictions unchanged
//! up to the removed unit's (zeroed) contribution.

use saddlenet::activation::ActivationKind;
use saddlenet::data::gen_xor;
use saddlenet::lagrangian::LossKind;
use saddlenet::network::build_mlp;
use saddlenet::optimizer::{init_state, train, SaddleConfig};
use saddlenet::support::{carry_weights, prune, support_report};

fn main() {
    let net = build_mlp(&[2, 4, 1], ActivationKind::Tanh, ActivationKind::Identity).unwrap();
    let data = gen_xor();
    let cfg = SaddleConfig {
        eta_w: 0.1,
        eta_x: 0.025,
        eta_lam: 0.025,
        rho: 0.5,
        eps: 0.1,
        residual_tol: 0.101,
        seed: 5,
        ..SaddleConfig::default()
    };
    let init = init_state(&net, &data, cfg.seed).unwrap();
    let outcome = train(&net, init, &data, LossKind::SquaredError, &cfg).unwrap();
    println!("{:?} after {} iterations (eps = {})", outcome.termination, outcome.iterations, cfg.eps);

    let report = support_report(&net, &outcome.state, 0.0).unwrap();
    for (id, score) in &report.neuron_scores {
        println!("  neuron {id}: max |lambda| = {score:.4}");
    }
    println!("support neurons (tau = 0): {:?}", report.support_neurons);
    println!("support examples: {:?}", report.support_examples);

    let pruned = prune(&net, &report).unwrap();
    println!(
        "pruned {} -> {} neurons, {} -> {} weights",
        net.neurons().len(),
        pruned.neurons().len(),
        net.num_weights(),
        pruned.num_weights()
    );

    // Pruning contract: the pruned net computes exactly what the original
    // computes with the dropped neurons' outgoing weights zeroed. (A
    // non-support unit still carried signal, so unmasked predictions shift;
    // its *constraint* is what never shaped the solution.)
    let w_pruned = carry_weights(&net, &pruned, &outcome.state.w).unwrap();
    let mut masked = outcome.state.w.clone();
    for (widx, &(src, _)) in net.edges().iter().enumerate() {
        if !report.support_neurons.contains(&src) && !net.is_input(src) {
            masked[widx] = 0.0;
        }
    }
    println!("input        full net   masked     pruned");
    for e in 0..4 {
        let full = net.forward(&outcome.state.w, data.inputs.row(e)).unwrap();
        let mask = net.forward(&masked, data.inputs.row(e)).unwrap();
        let small = pruned.forward(&w_pruned, data.inputs.row(e)).unwrap();
        let (yf, ym, yp) = (
            net.predictions(&full)[0],
            net.predictions(&mask)[0],
            pruned.predictions(&small)[0],
        );
        println!("{:?}   {yf:+.4}    {ym:+.4}    {yp:+.4}", data.inputs.row(e));
        assert_eq!(ym, yp, "pruned forward must equal the zero-masked original");
    }
    println!("pruned == zero-masked original: true");
}
