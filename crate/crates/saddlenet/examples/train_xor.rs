//! Train XOR without backpropagation: simultaneous descent on weights and
//! stored neural outputs, ascent on the constraint multipliers.

use saddlenet::activation::ActivationKind;
use saddlenet::data::{accuracy, gen_xor, TargetEncoding};
use saddlenet::lagrangian::LossKind;
use saddlenet::network::build_mlp;
use saddlenet::optimizer::{init_state, train, SaddleConfig};

fn main() {
    let net = build_mlp(&[2, 4, 1], ActivationKind::Tanh, ActivationKind::Identity).unwrap();
    let data = gen_xor();
    let cfg = SaddleConfig {
        eta_w: 0.1,
        eta_x: 0.025,
        eta_lam: 0.025,
        rho: 0.5,
        seed: 5,
        ..SaddleConfig::default()
    };

    let init = init_state(&net, &data, cfg.seed).unwrap();
    let outcome = train(&net, init, &data, LossKind::SquaredError, &cfg).unwrap();

    println!("{:?} after {} iterations", outcome.termination, outcome.iterations);
    println!("  it      L          loss       res_inf");
    for record in outcome.trace.iter().step_by(250) {
        println!(
            "{:>6}  {:>9.3e}  {:>9.3e}  {:>9.3e}",
            record.it, record.value, record.loss, record.res_inf
        );
    }
    let m = &outcome.final_metrics;
    println!("final: loss={:.3e} res_inf={:.3e} res_2={:.3e}", m.loss, m.res_inf, m.res_2);

    let mut preds = saddlenet::grid::Grid::zeros(4, 1);
    for e in 0..4 {
        let x = net.forward(&outcome.state.w, data.inputs.row(e)).unwrap();
        let y = net.predictions(&x)[0];
        preds.set(e, 0, y);
        println!(
            "  {:?} -> {y:+.4}  (target {})",
            data.inputs.row(e),
            data.targets.get(e, 0)
        );
    }
    let acc = accuracy(&preds, &data.targets, LossKind::SquaredError, TargetEncoding::ZeroOne);
    println!("train accuracy: {acc}");
}
