//! Command-line interface. Every subcommand wraps one operation in [`crate::ops`].

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fedsov_core::attacks::{near_collision_forging_game, tradeoff_curve, FinetuneOptions};
use fedsov_core::embedding::{DescentOptions, HingeConfig};
use fedsov_core::fl_sim::{FlConfig, TaskSpec};
use fedsov_core::pairing_sig::CurveId;
use fedsov_core::protocol::{Verdict, DEFAULT_TARGET_PA_LOG2};
use fedsov_core::security_boundary::{attacker_bound, solve_boundary};
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::files::RunDir;
use crate::ops::{self, AttackSpec};
use crate::with_backend;

/// Exit status for a completed verification that rejected the claim.
pub const EXIT_REJECTED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fedsov", version, about = "Federated model ownership verification")]
pub struct Cli {
    /// Seed for every random choice of the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Run directory read and written by the command.
    #[arg(long, global = true, default_value = "run")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Curve {
    Desk,
    #[value(name = "bls12-381")]
    Bls12_381,
}

impl From<Curve> for CurveId {
    fn from(c: Curve) -> Self {
        match c {
            Curve::Desk => CurveId::DeskToy,
            Curve::Bls12_381 => CurveId::Bls12_381,
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct FederationArgs {
    #[arg(long, default_value_t = 10)]
    pub clients: usize,
    #[arg(long, default_value_t = 256)]
    pub wm_bits: usize,
    #[arg(long, default_value_t = 512)]
    pub omega: usize,
    #[arg(long, default_value_t = 30)]
    pub rounds: usize,
    #[arg(long, default_value_t = 2)]
    pub local_epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 50.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = Curve::Bls12_381)]
    pub curve: Curve,
    /// Attacker success probability `2^pa_log2` used for the boundary.
    #[arg(long, default_value_t = DEFAULT_TARGET_PA_LOG2, allow_hyphen_values = true)]
    pub pa_log2: f64,
}

impl FederationArgs {
    pub fn config(&self, seed: u64) -> FlConfig {
        FlConfig {
            clients: self.clients,
            global_epochs: self.rounds,
            local_epochs: self.local_epochs,
            alpha: self.alpha,
            mu: self.mu,
            learning_rate: self.lr,
            n: self.wm_bits,
            omega: self.omega,
            seed,
            task: TaskSpec::default(),
            ..FlConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackKind {
    Finetune,
    Prune,
    Gaussian,
    Sweep,
    Ambiguity,
    Game,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Public parameters, config and embedding seed of a new federation.
    Setup(FederationArgs),
    /// Client key pairs and the concatenated public key.
    Keygen,
    /// The hash watermark of the stored public keys.
    Wmgen,
    /// Trains a federation and writes the whole run directory.
    Simulate {
        #[command(flatten)]
        fed: FederationArgs,
        /// Run the per-client watermark baseline with this many bits per client.
        #[arg(long)]
        fedipr_bits: Option<usize>,
    },
    /// Embeds the run's watermark into a model by descent on the hinge loss alone.
    Embed {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        mu: f64,
        #[arg(long, default_value_t = 500)]
        max_iterations: usize,
    },
    /// Reads the watermark off a model.
    Extract {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Security boundary `err(n)` and `r(n)`.
    Boundary {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_TARGET_PA_LOG2, allow_hyphen_values = true)]
        pa_log2: f64,
    },
    /// Removal and forgery attacks on the run's model.
    Attack {
        #[arg(long, value_enum)]
        kind: AttackKind,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 0.6)]
        rate: f64,
        #[arg(long, default_value_t = 0.5)]
        phi: f64,
        #[arg(long, default_value_t = 3)]
        trials: u64,
        /// Bits of the forged credential, or of the game digest.
        #[arg(long, default_value_t = 16)]
        bits: usize,
        #[arg(long, default_value_t = 1)]
        err: usize,
        #[arg(long, default_value_t = 100)]
        k: u64,
        #[arg(long, default_value_t = 10_000)]
        reps: u64,
        /// Where the attacked model goes; defaults to `attacked_<kind>.bin`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Ownership verification of a model for one client index.
    Verify {
        #[arg(long)]
        client: usize,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Answer the challenge from public transcripts only.
        #[arg(long)]
        adversary: bool,
    },
    /// Final metrics and offline re-verification of every transcript.
    Report,
}

/// What a command prints plus its exit status.
pub struct Outcome {
    pub rows: Vec<Value>,
    pub code: i32,
}

impl Outcome {
    fn one<T: Serialize>(v: &T) -> Result<Self> {
        Ok(Outcome { rows: vec![serde_json::to_value(v)?], code: 0 })
    }

    fn many<T: Serialize>(vs: &[T]) -> Result<Self> {
        Ok(Outcome { rows: vs.iter().map(serde_json::to_value).collect::<Result<_, _>>()?, code: 0 })
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let run = RunDir::new(&cli.out_dir);
    let seed = cli.seed;
    match &cli.command {
        Command::Setup(fed) => {
            let pp = ops::setup(&run, &fed.config(seed), fed.curve.into(), fed.pa_log2)?;
            Outcome::one(&pp)
        }
        Command::Keygen => {
            let count = with_backend!(ops::run_curve(&run)?, B => ops::keygen::<B>(&run)?);
            Outcome::one(&json!({ "clients": count, "pk_con": run.pk_con() }))
        }
        Command::Wmgen => Outcome::one(&ops::wmgen(&run)?),
        Command::Simulate { fed, fedipr_bits: None } => {
            let cfg = fed.config(seed);
            let summary = with_backend!(CurveId::from(fed.curve), B => ops::simulate::<B>(&run, &cfg, fed.pa_log2)?);
            Outcome::one(&summary)
        }
        Command::Simulate { fed, fedipr_bits: Some(bits) } => Outcome::one(&ops::simulate_baseline(&run, &fed.config(seed), *bits)?),
        Command::Embed { model, mu, max_iterations } => {
            let model = model.clone().unwrap_or_else(|| run.model());
            let hinge = HingeConfig { mu: *mu, ..HingeConfig::default() };
            let opts = DescentOptions { max_iterations: *max_iterations, ..DescentOptions::default() };
            Outcome::one(&ops::embed(&run, &model, &hinge, &opts)?)
        }
        Command::Extract { model } => Outcome::one(&ops::extract(&run, &model.clone().unwrap_or_else(|| run.model()))?),
        Command::Boundary { n, pa_log2 } => Outcome::one(&solve_boundary(*n, *pa_log2)?),
        Command::Attack { kind, epochs, lr, rate, phi, trials, bits, err, k, reps, output } => {
            let output = |name: &str| output.clone().unwrap_or_else(|| run.root().join(format!("attacked_{name}.bin")));
            match kind {
                AttackKind::Finetune => {
                    let opts = FinetuneOptions { epochs: *epochs, learning_rate: *lr, ..FinetuneOptions::default() };
                    Outcome::one(&ops::attack(&run, AttackSpec::Finetune(opts), &output("finetune"), seed)?)
                }
                AttackKind::Prune => Outcome::one(&ops::attack(&run, AttackSpec::Prune { rate: *rate }, &output("prune"), seed)?),
                AttackKind::Gaussian => Outcome::one(&ops::attack(&run, AttackSpec::Gaussian { phi: *phi }, &output("gaussian"), seed)?),
                AttackKind::Sweep => {
                    let phis: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
                    let points = ops::gaussian_sweep(&run, &phis, *trials, seed)?;
                    Outcome::many(&tradeoff_curve(&points))
                }
                AttackKind::Ambiguity => {
                    let out = with_backend!(ops::run_curve(&run)?, B => ops::ambiguity::<B>(&run, *bits, seed)?);
                    Outcome::one(&out)
                }
                AttackKind::Game => {
                    let g = near_collision_forging_game(*bits, *err, *k, *reps, &mut ChaCha20Rng::seed_from_u64(seed))?;
                    let bound = attacker_bound(*bits, *err, *k, 1)?;
                    Outcome::one(&json!({
                        "n": g.n, "err": g.err, "k": g.k, "repetitions": g.repetitions,
                        "successes": g.successes, "rate": g.rate(), "bound": bound.probability(),
                    }))
                }
            }
        }
        Command::Verify { client, model, adversary } => {
            let model = model.clone().unwrap_or_else(|| run.model());
            let (t, _) = with_backend!(ops::run_curve(&run)?, B => ops::verify::<B>(&run, &model, *client, *adversary, seed)?);
            let mut out = Outcome::one(&t)?;
            if t.verdict != Verdict::OwnerVerified {
                out.code = EXIT_REJECTED;
            }
            Ok(out)
        }
        Command::Report => {
            let r = with_backend!(ops::run_curve(&run)?, B => ops::report::<B>(&run)?);
            let code = if r.all_reverified { 0 } else { EXIT_REJECTED };
            Ok(Outcome { code, ..Outcome::one(&r)? })
        }
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Renders rows as pretty JSON (one object, or an array) or as CSV with the
/// keys of the first row as the header. Nested values become JSON cells.
pub fn render(rows: &[Value], format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let v = if rows.len() == 1 { rows[0].clone() } else { Value::Array(rows.to_vec()) };
            Ok(serde_json::to_string_pretty(&v)?)
        }
        Format::Csv => {
            let Some(Value::Object(first)) = rows.first() else {
                bail!("nothing to render as csv");
            };
            let keys: Vec<&String> = first.keys().collect();
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&keys)?;
            for row in rows {
                w.write_record(keys.iter().map(|k| csv_cell(row.get(k.as_str()).unwrap_or(&Value::Null))))?;
            }
            Ok(String::from_utf8(w.into_inner()?)?.trim_end().to_string())
        }
    }
}
