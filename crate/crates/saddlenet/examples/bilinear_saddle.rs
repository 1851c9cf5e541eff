//! The scalar bilinear problem L(x, lam) = lam * x separates the two update
//! rules: plain GDA spirals away from the saddle at the origin while
//! extragradient contracts onto it.

use saddlenet::optimizer::{simulate_bilinear, Method};

fn main() {
    let radius = |p: &(f64, f64)| (p.0 * p.0 + p.1 * p.1).sqrt();
    let gda = simulate_bilinear((1.0, 1.0), 0.1, 1000, Method::Gda).unwrap();
    let eg = simulate_bilinear((1.0, 1.0), 0.1, 1000, Method::Extragradient).unwrap();

    println!("first gda step from (1, 1): {:?}", gda[1]);
    println!("step    gda radius    extragradient radius");
    for k in (0..=1000).step_by(100) {
        println!("{k:>4}    {:>10.4}    {:>10.6}", radius(&gda[k]), radius(&eg[k]));
    }
    println!(
        "gda grew monotonically: {}",
        gda.windows(2).all(|w| radius(&w[1]) > radius(&w[0]))
    );
    println!(
        "extragradient shrank monotonically: {}",
        eg.windows(2).all(|w| radius(&w[1]) < radius(&w[0]))
    );
}
