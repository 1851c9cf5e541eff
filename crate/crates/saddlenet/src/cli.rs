//! Config-driven commands behind the `saddlenet` binary: `train`,
//! `verify-bp`, `grad-check`, `support`, `gen-data`.
//!
//! Exit codes are a stable contract: 0 ok/converged, 1 usage or config
//! error, 2 iteration-limit stop, 3 divergence, 4 verification failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::activation::ActivationKind;
use crate::backprop::{verify_bp_equivalence, BP_EQUIV_REL_TOL};
use crate::data::{
    accuracy, gen_two_moons, gen_xor_encoded, load_csv, save_csv, Dataset, TargetEncoding,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lagrangian::{
    block_gradients, finite_diff_gradient, lagrangian_value, rel_diff, AdjointState, LossKind,
    Objective, StateDoc,
};
use crate::network::Network;
use crate::optimizer::{init_state, train, SaddleConfig, Termination, TrainTrace};
use crate::sampler::{rng_for, sample_equivalence_case, sample_gradient_case};
use crate::support::{support_report, SupportReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ITER_LIMIT: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "saddlenet",
    version,
    about = "Lagrangian saddle-point training for feedforward networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a network from a JSON run config
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check that the Lagrangian weight gradient at the adjoint solution
    /// equals backpropagation, over seeded random networks
    #[command(name = "verify-bp")]
    VerifyBp {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate analytic block gradients against central finite differences
    #[command(name = "grad-check")]
    GradCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Report support neurons and support examples from a checkpoint
    Support {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a dataset CSV (`xor` or `moons`)
    #[command(name = "gen-data")]
    GenData {
        #[arg(long)]
        generator: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Target encoding: zero-one or plus-minus-one
        #[arg(long)]
        encoding: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Dispatches a parsed command line and maps errors to exit codes.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Train { config, out, seed } => cmd_train(&config, out.as_deref(), seed),
        Command::VerifyBp { config, out, seed } => {
            cmd_verify_bp(config.as_deref(), out.as_deref(), seed)
        }
        Command::GradCheck { config, out, seed } => {
            cmd_grad_check(config.as_deref(), out.as_deref(), seed)
        }
        Command::Support {
            checkpoint,
            tau,
            out,
        } => cmd_support(&checkpoint, tau, out.as_deref()),
        Command::GenData {
            generator,
            n,
            noise,
            seed,
            encoding,
            out,
        } => cmd_gen_data(&generator, n, noise, seed, encoding.as_deref(), &out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Diverged { .. } => EXIT_DIVERGED,
                _ => EXIT_USAGE,
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub layers: Vec<usize>,
    pub activation: ActivationKind,
    pub output_activation: ActivationKind,
}

impl NetworkSpec {
    pub fn build(&self) -> Result<Network> {
        crate::network::build_mlp(&self.layers, self.activation, self.output_activation).map_err(
            |e| Error::Config {
                field: "network.layers".into(),
                msg: e.to_string(),
            },
        )
    }
}

/// Dataset source: a named generator or a CSV path.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<TargetEncoding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

impl DatasetSpec {
    pub fn build(&self) -> Result<(Dataset, TargetEncoding)> {
        let cfg_err = |field: &str, msg: &str| Error::Config {
            field: field.into(),
            msg: msg.into(),
        };
        let encoding = self.encoding.unwrap_or_default();
        match (&self.generator, &self.csv) {
            (Some(_), Some(_)) => Err(cfg_err(
                "dataset",
                "specify either a generator or a csv path, not both",
            )),
            (None, None) => Err(cfg_err("dataset", "needs a generator name or a csv path")),
            (Some(name), None) => match name.as_str() {
                "xor" => {
                    if self.n.is_some() || self.noise.is_some() || self.seed.is_some() {
                        return Err(cfg_err("dataset", "xor takes no n/noise/seed parameters"));
                    }
                    Ok((gen_xor_encoded(encoding), encoding))
                }
                "moons" => {
                    let n = self
                        .n
                        .ok_or_else(|| cfg_err("dataset.n", "required for moons"))?;
                    let noise = self.noise.unwrap_or(0.1);
                    let seed = self
                        .seed
                        .ok_or_else(|| cfg_err("dataset.seed", "required for moons"))?;
                    if encoding != TargetEncoding::ZeroOne {
                        return Err(cfg_err("dataset.encoding", "moons labels are 0/1"));
                    }
                    let data = gen_two_moons(n, noise, seed).map_err(|e| Error::Config {
                        field: "dataset.n".into(),
                        msg: e.to_string(),
                    })?;
                    Ok((data, encoding))
                }
                other => Err(cfg_err(
                    "dataset.generator",
                    &format!("unknown generator `{other}` (expected xor or moons)"),
                )),
            },
            (None, Some(path)) => {
                if self.n.is_some() || self.noise.is_some() || self.seed.is_some() {
                    return Err(cfg_err("dataset", "csv takes no n/noise/seed parameters"));
                }
                Ok((load_csv(path)?, encoding))
            }
        }
    }
}

/// The saddle search as it appears in run configs: [`SaddleConfig`] minus
/// `eps`, which lives at the top level of the run config next to `tau`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSpec {
    pub eta_w: f64,
    pub eta_x: f64,
    pub eta_lam: f64,
    pub max_iters: usize,
    pub method: crate::optimizer::Method,
    pub rho: f64,
    pub residual_tol: f64,
    pub loss_tol: f64,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        let d = SaddleConfig::default();
        OptimizerSpec {
            eta_w: d.eta_w,
            eta_x: d.eta_x,
            eta_lam: d.eta_lam,
            max_iters: d.max_iters,
            method: d.method,
            rho: d.rho,
            residual_tol: d.residual_tol,
            loss_tol: d.loss_tol,
            seed: d.seed,
            deterministic: d.deterministic,
        }
    }
}

impl OptimizerSpec {
    pub fn to_config(self, eps: f64) -> SaddleConfig {
        SaddleConfig {
            eta_w: self.eta_w,
            eta_x: self.eta_x,
            eta_lam: self.eta_lam,
            max_iters: self.max_iters,
            method: self.method,
            rho: self.rho,
            eps,
            residual_tol: self.residual_tol,
            loss_tol: self.loss_tol,
            seed: self.seed,
            deterministic: self.deterministic,
        }
    }
}

fn default_tau() -> f64 {
    1e-6
}

fn default_out_dir() -> String {
    "runs".into()
}

/// One training run, fully described. Unknown keys anywhere are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkSpec,
    pub loss: LossKind,
    #[serde(default)]
    pub optimizer: OptimizerSpec,
    pub dataset: DatasetSpec,
    /// Dead-zone half-width of the eps-insensitive residual.
    #[serde(default)]
    pub eps: f64,
    /// Support threshold used in the run summary.
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.build()?;
        let cfg = self.optimizer.to_config(self.eps);
        cfg.validate()?;
        if self.tau.is_nan() || self.tau < 0.0 {
            return Err(Error::Config {
                field: "tau".into(),
                msg: format!("must be >= 0, got {}", self.tau),
            });
        }
        Ok(())
    }

    /// Stable hash of the effective config; run directories are named
    /// `<hash>-s<seed>` for sweep hygiene.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(12);
        for byte in digest.iter().take(6) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CheckpointDoc {
    pub network: serde_json::Value,
    pub state: StateDoc,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    config_hash: String,
    seed: u64,
    termination: &'static str,
    iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    lagrangian: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    res_inf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    res_2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zero_multiplier_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    support_neurons: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    support_examples: Option<usize>,
}

fn write_trace(path: &Path, trace: &TrainTrace) -> Result<()> {
    let mut out = String::new();
    for record in trace {
        out.push_str(&serde_json::to_string(record)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn cmd_train(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<i32> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(seed) = seed {
        config.optimizer.seed = seed;
    }
    if let Some(dir) = out {
        config.out_dir = dir.to_string_lossy().into_owned();
    }
    config.validate()?;

    let net = config.network.build()?;
    let (data, encoding) = config.dataset.build()?;
    let cfg = config.optimizer.to_config(config.eps);
    let run_dir =
        PathBuf::from(&config.out_dir).join(format!("{}-s{}", config.hash(), cfg.seed));
    fs::create_dir_all(&run_dir)?;
    write_json(&run_dir.join("config.json"), &config)?;

    let init = init_state(&net, &data, cfg.seed)?;
    match train(&net, init, &data, config.loss, &cfg) {
        Ok(outcome) => {
            write_trace(&run_dir.join("trace.jsonl"), &outcome.trace)?;
            let checkpoint = CheckpointDoc {
                network: net.to_json(),
                state: outcome.state.to_doc(),
            };
            write_json(&run_dir.join("checkpoint.json"), &checkpoint)?;

            let preds = predictions_grid(&net, &outcome.state.w, &data)?;
            let acc = accuracy(&preds, &data.targets, config.loss, encoding);
            let lam = &outcome.state.lam;
            let zeros = lam.iter().filter(|v| *v == 0.0).count();
            let report = support_report(&net, &outcome.state, config.tau)?;
            let summary = RunSummary {
                config_hash: config.hash(),
                seed: cfg.seed,
                termination: match outcome.termination {
                    Termination::Converged => "converged",
                    Termination::IterLimit => "iter_limit",
                },
                iterations: outcome.iterations,
                lagrangian: Some(outcome.final_metrics.value),
                final_loss: Some(outcome.final_metrics.loss),
                accuracy: Some(acc),
                res_inf: Some(outcome.final_metrics.res_inf),
                res_2: Some(outcome.final_metrics.res_2),
                zero_multiplier_fraction: Some(
                    zeros as f64 / lam.as_slice().len().max(1) as f64,
                ),
                support_neurons: Some(report.support_neurons.len()),
                support_examples: Some(report.support_examples.len()),
            };
            write_json(&run_dir.join("summary.json"), &summary)?;
            println!("{}", serde_json::to_string(&summary)?);
            Ok(match outcome.termination {
                Termination::Converged => EXIT_OK,
                Termination::IterLimit => EXIT_ITER_LIMIT,
            })
        }
        Err(Error::Diverged { iteration, trace }) => {
            write_trace(&run_dir.join("trace.jsonl"), &trace)?;
            let summary = RunSummary {
                config_hash: config.hash(),
                seed: cfg.seed,
                termination: "diverged",
                iterations: iteration,
                lagrangian: None,
                final_loss: None,
                accuracy: None,
                res_inf: None,
                res_2: None,
                zero_multiplier_fraction: None,
                support_neurons: None,
                support_examples: None,
            };
            write_json(&run_dir.join("summary.json"), &summary)?;
            println!("{}", serde_json::to_string(&summary)?);
            Ok(EXIT_DIVERGED)
        }
        Err(other) => Err(other),
    }
}

fn predictions_grid(net: &Network, w: &[f64], data: &Dataset) -> Result<Grid> {
    let mut preds = Grid::zeros(data.num_examples(), net.num_outputs());
    for e in 0..data.num_examples() {
        let x = net.forward(w, data.inputs.row(e))?;
        preds.row_mut(e).copy_from_slice(&net.predictions(&x));
    }
    Ok(preds)
}

// ---------------------------------------------------------------------------
// verify-bp
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyBpConfig {
    pub nets: usize,
    pub seed: u64,
}

impl Default for VerifyBpConfig {
    fn default() -> Self {
        VerifyBpConfig { nets: 100, seed: 1 }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyBpReport {
    pub nets: usize,
    pub max_abs: f64,
    pub max_rel: f64,
    pub tol: f64,
    pub pass: bool,
}

fn load_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(T::default()),
    }
}

/// Runs the equivalence sweep; pinned tolerance [`BP_EQUIV_REL_TOL`].
pub fn run_verify_bp(config: &VerifyBpConfig) -> Result<VerifyBpReport> {
    if config.nets == 0 {
        return Err(Error::Config {
            field: "nets".into(),
            msg: "must be >= 1".into(),
        });
    }
    let mut rng = rng_for(config.seed);
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for _ in 0..config.nets {
        let (case, w) = sample_equivalence_case(&mut rng);
        let report = verify_bp_equivalence(&case.net, &w, &case.data, case.loss)?;
        max_abs = max_abs.max(report.max_abs);
        max_rel = max_rel.max(report.max_rel);
    }
    Ok(VerifyBpReport {
        nets: config.nets,
        max_abs,
        max_rel,
        tol: BP_EQUIV_REL_TOL,
        pass: max_rel <= BP_EQUIV_REL_TOL,
    })
}

pub fn cmd_verify_bp(config: Option<&Path>, out: Option<&Path>, seed: Option<u64>) -> Result<i32> {
    let mut cfg: VerifyBpConfig = load_or_default(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let report = run_verify_bp(&cfg)?;
    println!("{}", serde_json::to_string(&report)?);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("verify_bp.json"), &report)?;
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

// ---------------------------------------------------------------------------
// grad-check
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub cases: usize,
    pub seed: u64,
    /// Central-difference step.
    pub h: f64,
    /// Maximum allowed relative error. 0 is accepted but unachievable:
    /// finite differences never match analytic gradients exactly, so it
    /// guarantees a verification failure.
    pub tol: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            cases: 50,
            seed: 2,
            h: 1e-5,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct WorstCoordinate {
    pub case: usize,
    pub block: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub example: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    pub index: usize,
    pub analytic: f64,
    pub finite_diff: f64,
}

#[derive(Debug, Serialize)]
pub struct GradCheckReport {
    pub cases: usize,
    pub h: f64,
    pub tol: f64,
    pub max_rel: f64,
    pub worst: WorstCoordinate,
    pub pass: bool,
}

/// Checks all three block gradients of random states against central finite
/// differences; alternate cases exercise the augmented (`rho > 0`) variant.
pub fn run_grad_check(config: &GradCheckConfig) -> Result<GradCheckReport> {
    if config.cases == 0 {
        return Err(Error::Config {
            field: "cases".into(),
            msg: "must be >= 1".into(),
        });
    }
    if config.h.is_nan() || config.h <= 0.0 {
        return Err(Error::Config {
            field: "h".into(),
            msg: format!("must be > 0, got {}", config.h),
        });
    }
    if config.tol.is_nan() || config.tol < 0.0 {
        return Err(Error::Config {
            field: "tol".into(),
            msg: format!("must be >= 0, got {}", config.tol),
        });
    }

    let mut rng = rng_for(config.seed);
    let mut max_rel = 0.0f64;
    let mut worst = WorstCoordinate {
        case: 0,
        block: "w",
        example: None,
        column: None,
        index: 0,
        analytic: 0.0,
        finite_diff: 0.0,
    };
    for case_idx in 0..config.cases {
        let (case, state) = sample_gradient_case(&mut rng);
        let obj = Objective {
            loss: case.loss,
            rho: if case_idx % 2 == 0 { 0.0 } else { 0.1 },
            eps: 0.0,
        };
        let grads = block_gradients(&case.net, &state, &case.data, &obj)?;
        let mut analytic = grads.d_w.clone();
        analytic.extend(grads.d_x.iter());
        analytic.extend(grads.d_lam.iter());

        let (nw, ne, nc) = (state.w.len(), state.x.rows(), state.x.cols());
        let flat = state.flatten();
        let f = |v: &[f64]| {
            let s = AdjointState::unflatten(nw, ne, nc, v);
            lagrangian_value(&case.net, &s, &case.data, &obj)
                .expect("shapes are fixed during differencing")
        };
        let fd = finite_diff_gradient(f, &flat, config.h)?;

        for (k, (a, f_)) in analytic.iter().zip(&fd).enumerate() {
            let rel = rel_diff(*a, *f_);
            if rel > max_rel {
                max_rel = rel;
                let nx = ne * nc;
                let (block, example, column, index) = if k < nw {
                    ("w", None, None, k)
                } else if k < nw + nx {
                    let j = k - nw;
                    ("x", Some(j / nc), Some(j % nc), j)
                } else {
                    let j = k - nw - nx;
                    ("lam", Some(j / nc), Some(j % nc), j)
                };
                worst = WorstCoordinate {
                    case: case_idx,
                    block,
                    example,
                    column,
                    index,
                    analytic: *a,
                    finite_diff: *f_,
                };
            }
        }
    }
    Ok(GradCheckReport {
        cases: config.cases,
        h: config.h,
        tol: config.tol,
        max_rel,
        pass: max_rel <= config.tol,
        worst,
    })
}

pub fn cmd_grad_check(config: Option<&Path>, out: Option<&Path>, seed: Option<u64>) -> Result<i32> {
    let mut cfg: GradCheckConfig = load_or_default(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let report = run_grad_check(&cfg)?;
    println!("{}", serde_json::to_string(&report)?);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("grad_check.json"), &report)?;
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

// ---------------------------------------------------------------------------
// support
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct NeuronScoreDoc {
    id: usize,
    score: f64,
}

#[derive(Debug, Serialize)]
struct SupportReportDoc {
    tau: f64,
    neurons: Vec<NeuronScoreDoc>,
    examples: Vec<f64>,
    support_neurons: Vec<usize>,
    support_examples: Vec<usize>,
}

impl SupportReportDoc {
    fn from_report(report: &SupportReport) -> Self {
        SupportReportDoc {
            tau: report.tau,
            neurons: report
                .neuron_scores
                .iter()
                .map(|&(id, score)| NeuronScoreDoc { id, score })
                .collect(),
            examples: report.example_scores.clone(),
            support_neurons: report.support_neurons.clone(),
            support_examples: report.support_examples.clone(),
        }
    }
}

pub fn cmd_support(checkpoint: &Path, tau: f64, out: Option<&Path>) -> Result<i32> {
    let text = fs::read_to_string(checkpoint)?;
    let doc: CheckpointDoc = serde_json::from_str(&text)?;
    let net = Network::from_json(&doc.network)?;
    let state = AdjointState::from_doc(doc.state)?;
    let report = support_report(&net, &state, tau)?;
    let doc = SupportReportDoc::from_report(&report);
    println!("{}", serde_json::to_string(&doc)?);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("support.json"), &doc)?;
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

fn parse_encoding(s: &str) -> Result<TargetEncoding> {
    match s {
        "zero-one" | "zero_one" => Ok(TargetEncoding::ZeroOne),
        "plus-minus-one" | "plus_minus_one" => Ok(TargetEncoding::PlusMinusOne),
        other => Err(Error::Usage(format!(
            "unknown encoding `{other}` (expected zero-one or plus-minus-one)"
        ))),
    }
}

pub fn cmd_gen_data(
    generator: &str,
    n: Option<usize>,
    noise: Option<f64>,
    seed: Option<u64>,
    encoding: Option<&str>,
    out: &Path,
) -> Result<i32> {
    let encoding = match encoding {
        Some(s) => parse_encoding(s)?,
        None => TargetEncoding::default(),
    };
    let dataset = match generator {
        "xor" => gen_xor_encoded(encoding),
        "moons" => {
            if encoding != TargetEncoding::ZeroOne {
                return Err(Error::Usage("moons labels are 0/1".into()));
            }
            gen_two_moons(n.unwrap_or(200), noise.unwrap_or(0.1), seed.unwrap_or(7))?
        }
        other => {
            return Err(Error::Usage(format!(
                "unknown generator `{other}` (expected xor or moons)"
            )));
        }
    };
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    save_csv(&dataset, out)?;
    println!(
        "{}",
        serde_json::json!({
            "generator": generator,
            "rows": dataset.num_examples(),
            "path": out.to_string_lossy(),
        })
    );
    Ok(EXIT_OK)
}
