//! Two-moons classification with the saddle-point trainer. The stored
//! outputs of the output neuron are logits under the cross-entropy loss.

use saddlenet::activation::ActivationKind;
use saddlenet::data::{accuracy, gen_two_moons, TargetEncoding};
use saddlenet::grid::Grid;
use saddlenet::lagrangian::LossKind;
use saddlenet::network::build_mlp;
use saddlenet::optimizer::{init_state, train, SaddleConfig};

fn main() {
    let data = gen_two_moons(200, 0.1, 7).unwrap();
    let net = build_mlp(&[2, 8, 1], ActivationKind::Tanh, ActivationKind::Identity).unwrap();
    let loss = LossKind::CrossEntropyWithLogistic;
    let cfg = SaddleConfig {
        eta_w: 0.005,
        eta_x: 0.005,
        eta_lam: 0.005,
        rho: 1.0,
        max_iters: 20_000,
        seed: 2,
        ..SaddleConfig::default()
    };

    let init = init_state(&net, &data, cfg.seed).unwrap();
    let outcome = train(&net, init, &data, loss, &cfg).unwrap();
    println!("{:?} after {} iterations", outcome.termination, outcome.iterations);
    for record in outcome.trace.iter().step_by(2500) {
        println!(
            "it={:>6}  loss={:>9.3e}  res_inf={:>9.3e}",
            record.it, record.loss, record.res_inf
        );
    }

    let mut preds = Grid::zeros(data.num_examples(), 1);
    for e in 0..data.num_examples() {
        let x = net.forward(&outcome.state.w, data.inputs.row(e)).unwrap();
        preds.set(e, 0, net.predictions(&x)[0]);
    }
    let acc = accuracy(&preds, &data.targets, loss, TargetEncoding::ZeroOne);
    println!("train accuracy on 200 points: {acc}");
}
