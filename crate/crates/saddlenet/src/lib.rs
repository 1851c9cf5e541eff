//! Train feedforward networks without backpropagation by searching for
//! saddle points of a constrained-learning Lagrangian — and machine-check
//! that classical backpropagation re-emerges at the saddle point.
//!
//! The feedforward equations of a network are not executed during learning;
//! they are imposed as per-neuron, per-example equality constraints on
//! free neural outputs. Training then runs simultaneous gradient descent on
//! weights and outputs and gradient ascent on the Lagrange multipliers, in
//! the joint "learning adjoint space" of all three blocks. Every update is
//! local: it reads only the variables of its own structural neighborhood.
//!
//! # Modules
//!
//! - [`network`] — DAG topologies, activations, and the feasible forward pass
//! - [`lagrangian`] — constraints, the Lagrangian, exact block gradients,
//!   and the finite-difference oracle that validates them
//! - [`backprop`] — classical backprop, the closed-form adjoint solve, and
//!   the gradient-equivalence check
//! - [`optimizer`] — descent/ascent saddle search, the extragradient
//!   variant, and the exhaustive locality audit
//! - [`support`] — support neurons/examples from multiplier magnitudes,
//!   eps-insensitive constraints, and pruning
//! - [`data`] — XOR and two-moons generators plus lossless CSV I/O
//! - [`cli`] — config-driven commands behind the `saddlenet` binary
//!
//! # Quick start
//!
//! ```
//! use saddlenet::activation::ActivationKind;
//! use saddlenet::data::gen_xor;
//! use saddlenet::lagrangian::LossKind;
//! use saddlenet::network::build_mlp;
//! use saddlenet::optimizer::{init_state, train, SaddleConfig};
//!
//! let net = build_mlp(&[2, 4, 1], ActivationKind::Tanh, ActivationKind::Identity).unwrap();
//! let data = gen_xor();
//! let cfg = SaddleConfig { max_iters: 200, ..SaddleConfig::default() };
//! let init = init_state(&net, &data, cfg.seed).unwrap();
//! let outcome = train(&net, init, &data, LossKind::SquaredError, &cfg).unwrap();
//! assert_eq!(outcome.trace.len(), outcome.iterations);
//! ```
//!
//! The `examples/` directory has one runnable program per capability; the
//! README shows the CLI equivalents.

pub mod activation;
pub mod backprop;
pub mod cli;
pub mod data;
pub mod error;
pub mod grid;
pub mod lagrangian;
pub mod network;
pub mod optimizer;
pub mod sampler;
pub mod support;

pub use error::{Error, Result};
