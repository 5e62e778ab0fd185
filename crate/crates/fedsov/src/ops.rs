//! Operations on a run directory. Each one reads and writes the files in
//! [`crate::files`] and is generic over the signature backend.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use fedsov_core::attacks::{
    self, ambiguity_attack_demo, AmbiguityReport, AttackReport, FinetuneOptions, SweepPoint,
};
use fedsov_core::embedding::{embed_standalone, gen_embedding_matrix, DescentOptions, HingeConfig, HostParams};
use fedsov_core::fl_sim::{
    baseline_fedipr_mode, run_federation, setup_federation, BaselineRoundMetrics, Dataset, Federation, FlConfig,
    RoundMetrics, SyntheticTask, ToyModel, WatermarkTask,
};
use fedsov_core::hash_watermark::{detection_rate, generate_watermark, hamming_distance};
use fedsov_core::pairing_sig::{CurveId, PairingBackend};
use fedsov_core::protocol::{
    HonestSigner, SessionInfo, Signer, SystemPublicParams, TranscriptReplayer, VerificationTranscript, Verifier,
};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::files::{self, ClientKeyFile, EmbeddingFile, RunDir, WatermarkFile};

/// Runs `$body` with `$b` bound to the backend named by `$curve`.
#[macro_export]
macro_rules! with_backend {
    ($curve:expr, $b:ident => $body:expr) => {
        match $curve {
            fedsov_core::pairing_sig::CurveId::DeskToy => {
                type $b = fedsov_core::pairing_sig::Desk;
                $body
            }
            fedsov_core::pairing_sig::CurveId::Bls12_381 => {
                type $b = fedsov_core::pairing_sig::Bls12;
                $body
            }
        }
    };
}

pub fn load_config(run: &RunDir) -> Result<FlConfig> {
    let cfg: FlConfig = files::read_json(&run.config())?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_params(run: &RunDir) -> Result<SystemPublicParams> {
    let pp: SystemPublicParams = files::read_json(&run.params())?;
    pp.validate()?;
    Ok(pp)
}

/// Writes `config.json`, `params.json` and `embedding.json`.
pub fn setup(run: &RunDir, cfg: &FlConfig, curve: CurveId, target_pa_log2: f64) -> Result<SystemPublicParams> {
    cfg.validate()?;
    run.create()?;
    let gamma = cfg.model_shape().gamma();
    let host = fedsov_core::protocol::HostPosition { offset: gamma.start, len: gamma.len() };
    let pp = SystemPublicParams::new(cfg.n, host, cfg.embedding_seed(), curve, target_pa_log2)?;
    files::write_json(&run.config(), cfg)?;
    files::write_json(&run.params(), &pp)?;
    files::write_json(&run.embedding(), &EmbeddingFile { omega: cfg.omega, n: cfg.n, seed: cfg.embedding_seed() })?;
    Ok(pp)
}

fn write_keys<B: PairingBackend>(run: &RunDir, fed: &Federation<B>) -> Result<()> {
    for (i, kp) in fed.keys.iter().enumerate() {
        files::write_json(&run.client_key(i), &ClientKeyFile::from_keypair(i, kp))?;
    }
    files::write_pk_con(&run.pk_con(), &fed.pk_con, B::CURVE_ID)
}

/// Client key files and `pk_con`, the same keys `simulate` generates for this config.
pub fn keygen<B: PairingBackend>(run: &RunDir) -> Result<usize> {
    let cfg = load_config(run)?;
    let fed = setup_federation::<B>(&cfg)?;
    write_keys(run, &fed)?;
    Ok(fed.keys.len())
}

/// `watermark.json` from the stored `pk_con`.
pub fn wmgen(run: &RunDir) -> Result<WatermarkFile> {
    let pp = load_params(run)?;
    let (pk_con, _) = files::read_pk_con(&run.pk_con())?;
    let wm = WatermarkFile::new(&generate_watermark(&pk_con, pp.n)?);
    files::write_json(&run.watermark(), &wm)?;
    Ok(wm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub clients: usize,
    pub rounds: usize,
    pub n: usize,
    pub main_accuracy: f64,
    pub detection_rate: f64,
    pub hinge_loss: f64,
}

/// Full federation run; writes every artifact of the run directory.
pub fn simulate<B: PairingBackend>(run: &RunDir, cfg: &FlConfig, target_pa_log2: f64) -> Result<SimulateSummary> {
    setup(run, cfg, B::CURVE_ID, target_pa_log2)?;
    let out = run_federation::<B>(cfg)?;
    write_keys(run, &out.federation)?;
    files::write_json(&run.watermark(), &WatermarkFile::new(&out.federation.mark.target))?;
    files::write_metrics(&run.metrics(), &out.metrics)?;
    files::write_model(&run.model(), out.federation.model())?;
    let last = out.final_metrics();
    Ok(SimulateSummary {
        clients: cfg.clients,
        rounds: cfg.global_epochs,
        n: cfg.n,
        main_accuracy: last.main_accuracy,
        detection_rate: last.detection_rate,
        hinge_loss: last.hinge_loss,
    })
}

/// Per-client watermarking baseline; writes `config.json`, `baseline_metrics.csv` and the model.
pub fn simulate_baseline(run: &RunDir, cfg: &FlConfig, bits: usize) -> Result<BaselineRoundMetrics> {
    run.create()?;
    files::write_json(&run.config(), cfg)?;
    let out = baseline_fedipr_mode(cfg, bits)?;
    let path = run.root().join("baseline_metrics.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["round".to_string(), "main_acc".into(), "mean_rate".into()];
    header.extend((0..cfg.clients).map(|k| format!("client_{k}")));
    w.write_record(&header)?;
    for m in &out.metrics {
        let mut row = vec![m.round.to_string(), m.main_accuracy.to_string(), m.mean_rate.to_string()];
        row.extend(m.per_client_rates.iter().map(|r| r.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    files::write_model(&run.model(), &out.sim.model)?;
    Ok(out.final_metrics().clone())
}

/// The watermark task the run's public parameters describe.
pub fn load_mark(run: &RunDir) -> Result<WatermarkTask> {
    let e: EmbeddingFile = files::read_json(&run.embedding())?;
    let wm: WatermarkFile = files::read_json(&run.watermark())?;
    ensure!(e.n == wm.n, "embedding has {} columns but the watermark {} bits", e.n, wm.n);
    Ok(WatermarkTask::new(gen_embedding_matrix(e.omega, e.n, e.seed)?, wm.watermark()?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractReport {
    pub n: usize,
    pub extracted_hex: String,
    pub expected_hex: String,
    pub distance: usize,
    pub detection_rate: f64,
}

pub fn extract(run: &RunDir, model_path: &Path) -> Result<ExtractReport> {
    let mark = load_mark(run)?;
    let model = files::read_model(model_path)?;
    let h = fedsov_core::embedding::extract_slice(model.gamma(), &mark.matrix)?;
    Ok(ExtractReport {
        n: h.len(),
        extracted_hex: hex::encode(h.packed()),
        expected_hex: hex::encode(mark.target.packed()),
        distance: hamming_distance(&mark.target, &h)?,
        detection_rate: detection_rate(&mark.target, &h)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedReport {
    pub iterations: usize,
    pub final_loss: f64,
    pub detection_rate: f64,
    pub converged: bool,
}

/// Embeds the run's watermark into the host slice of a model by plain descent.
pub fn embed(run: &RunDir, model_path: &Path, hinge: &HingeConfig, opts: &DescentOptions) -> Result<EmbedReport> {
    let mark = load_mark(run)?;
    let mut model = files::read_model(model_path)?;
    let out = embed_standalone(&HostParams::new(model.gamma().to_vec())?, &mark.matrix, &mark.target, hinge, opts)?;
    model.gamma_mut().copy_from_slice(&out.params.values);
    files::write_model(model_path, &model)?;
    Ok(EmbedReport {
        iterations: out.iterations,
        final_loss: out.final_loss,
        detection_rate: out.detection_rate,
        converged: out.converged,
    })
}

/// Task and held-out test set of the run, regenerated from its seed.
fn task_and_test(cfg: &FlConfig) -> Result<(SyntheticTask, Dataset)> {
    let fed = setup_federation::<fedsov_core::pairing_sig::Desk>(&FlConfig { clients: 1, ..*cfg })?;
    Ok((fed.sim.task, fed.sim.test))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackSpec {
    Finetune(FinetuneOptions),
    Prune { rate: f64 },
    Gaussian { phi: f64 },
}

/// Runs a removal attack on the run's model; writes the attacked model and
/// `attacks/<kind>.json`.
pub fn attack(run: &RunDir, spec: AttackSpec, output: &Path, seed: u64) -> Result<AttackReport> {
    let cfg = load_config(run)?;
    let mark = load_mark(run)?;
    let model = files::read_model(&run.model())?;
    let (task, test) = task_and_test(&cfg)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (attacked, report) = match spec {
        AttackSpec::Finetune(opts) => {
            let data = task.sample(cfg.task.samples_per_client, &mut rng);
            attacks::finetune_attack(&model, &mark, &data, &test, &opts, &mut rng)?
        }
        AttackSpec::Prune { rate } => attacks::prune_attack(&model, &mark, &test, rate)?,
        AttackSpec::Gaussian { phi } => attacks::gaussian_target_attack(&model, &mark, &test, phi, &mut rng)?,
    };
    files::write_model(output, &attacked)?;
    files::write_json(&run.attacks().join(format!("{}.json", report.attack_kind)), &report)?;
    Ok(report)
}

/// Targeted-noise sweep; writes `attacks/gaussian_sweep.csv`.
pub fn gaussian_sweep(run: &RunDir, phis: &[f64], trials: u64, seed: u64) -> Result<Vec<SweepPoint>> {
    let cfg = load_config(run)?;
    let mark = load_mark(run)?;
    let model = files::read_model(&run.model())?;
    let (_, test) = task_and_test(&cfg)?;
    let points = attacks::gaussian_sweep(&model, &mark, &test, phis, trials, &mut ChaCha20Rng::seed_from_u64(seed))?;
    fs::create_dir_all(run.attacks())?;
    let mut w = csv::Writer::from_path(run.attacks().join("gaussian_sweep.csv"))?;
    for p in &points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityOutcome {
    pub baseline: AmbiguityReport,
    /// Verdict when the forger claims the model through ownership verification.
    pub fedsov_verdict: String,
}

/// Forges a watermark credential for the run's model, then tries the same
/// claim against signature-backed verification.
pub fn ambiguity<B: PairingBackend>(run: &RunDir, bits: usize, seed: u64) -> Result<AmbiguityOutcome> {
    let cfg = load_config(run)?;
    let model = files::read_model(&run.model())?;
    let (_, test) = task_and_test(&cfg)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let baseline = ambiguity_attack_demo(&model, &test, bits, &mut rng)?;
    let t = verify::<B>(run, &run.model(), 0, true, seed)?;
    Ok(AmbiguityOutcome { baseline, fedsov_verdict: t.0.verdict.as_str().to_string() })
}

fn session_count(run: &RunDir) -> Result<u64> {
    match fs::read_dir(run.transcripts()) {
        Ok(entries) => Ok(entries.filter_map(|e| e.ok()).filter(|e| e.path().extension().is_some_and(|x| x == "jsonl")).count() as u64),
        Err(_) => Ok(0),
    }
}

/// Every transcript line stored in the run, in file-name order.
pub fn load_transcript_lines(run: &RunDir) -> Result<Vec<(PathBuf, String)>> {
    let mut paths: Vec<PathBuf> = match fs::read_dir(run.transcripts()) {
        Ok(entries) => entries.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.extension().is_some_and(|x| x == "jsonl")).collect(),
        Err(_) => Vec::new(),
    };
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = fs::read_to_string(&p)?;
        for line in text.lines().filter(|l| !l.is_empty()) {
            out.push((p.clone(), line.to_string()));
        }
    }
    Ok(out)
}

/// Runs one verification session against the model at `model_path` and
/// appends its transcript. The adversary replays earlier public transcripts
/// instead of signing.
pub fn verify<B: PairingBackend>(
    run: &RunDir,
    model_path: &Path,
    pk_index: usize,
    adversary: bool,
    seed: u64,
) -> Result<(VerificationTranscript, PathBuf)> {
    let pp = load_params(run)?;
    let (pk_con, meta) = files::read_pk_con(&run.pk_con())?;
    ensure!(meta.curve == pp.curve_id, "pk_con is on {} but the parameters name {}", meta.curve.as_str(), pp.curve_id.as_str());
    let verifier = Verifier::<B>::new(pp)?;
    let model = files::read_model(model_path)?;

    let session_no = session_count(run)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(session_no);
    let mut id = [0u8; 8];
    rng.fill_bytes(&mut id);
    let session_id = format!("{session_no:04}-{}", hex::encode(id));
    let signer_rng = ChaCha20Rng::from_seed({
        let mut k = [0u8; 32];
        rng.fill_bytes(&mut k);
        k
    });
    let mut signer: Box<dyn Signer<B>> = if adversary {
        let history = load_transcript_lines(run)?
            .iter()
            .map(|(_, l)| serde_json::from_str::<VerificationTranscript>(l))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Box::new(TranscriptReplayer::from_transcripts(&history, verifier.group.clone(), signer_rng)?)
    } else {
        let key: ClientKeyFile = files::read_json(&run.client_key(pk_index))
            .with_context(|| format!("client {pk_index} has no key file"))?;
        Box::new(HonestSigner { sk: key.secret::<B>()?, group: verifier.group.clone(), rng: signer_rng })
    };
    let session = SessionInfo {
        session_id: session_id.clone(),
        ts: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
    };
    let t = verifier.verify_ownership(model.params(), &pk_con, pk_index, signer.as_mut(), session, &mut rng)?;
    let path = run.transcripts().join(format!("{session_id}.jsonl"));
    files::append_line(&path, &serde_json::to_string(&t)?)?;
    Ok((t, path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverifyResult {
    pub path: String,
    pub session_id: String,
    pub verdict: String,
    /// The recomputed transcript serializes to exactly the stored line.
    pub identical: bool,
}

/// Re-checks every stored transcript offline from `pk_con` and the public parameters.
pub fn reverify_all<B: PairingBackend>(run: &RunDir) -> Result<Vec<ReverifyResult>> {
    let verifier = Verifier::<B>::new(load_params(run)?)?;
    let (pk_con, _) = files::read_pk_con(&run.pk_con())?;
    load_transcript_lines(run)?
        .into_iter()
        .map(|(path, line)| {
            let stored: VerificationTranscript = serde_json::from_str(&line)?;
            let again = verifier.reverify(&stored, &pk_con)?;
            Ok(ReverifyResult {
                path: path.display().to_string(),
                session_id: stored.session_id.clone(),
                verdict: again.verdict.as_str().to_string(),
                identical: serde_json::to_string(&again)? == line,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rounds: usize,
    pub final_metrics: Option<RoundMetrics>,
    pub transcripts: usize,
    pub owner_verified: usize,
    pub watermark_check_failed: usize,
    pub signature_failed: usize,
    pub all_reverified: bool,
}

pub fn report<B: PairingBackend>(run: &RunDir) -> Result<RunReport> {
    let metrics = if run.metrics().exists() { files::read_metrics(&run.metrics())? } else { Vec::new() };
    let results = if run.params().exists() { reverify_all::<B>(run)? } else { Vec::new() };
    let count = |v: &str| results.iter().filter(|r| r.verdict == v).count();
    Ok(RunReport {
        rounds: metrics.len(),
        final_metrics: metrics.last().copied(),
        transcripts: results.len(),
        owner_verified: count("owner_verified"),
        watermark_check_failed: count("watermark_check_failed"),
        signature_failed: count("signature_failed"),
        all_reverified: results.iter().all(|r| r.identical),
    })
}

/// Curve named by the run's parameters.
pub fn run_curve(run: &RunDir) -> Result<CurveId> {
    if run.params().exists() {
        return Ok(load_params(run)?.curve_id);
    }
    if run.pk_con().exists() {
        return Ok(files::read_pk_con(&run.pk_con())?.1.curve);
    }
    bail!("{} has neither params.json nor keys/pk_con.json", run.root().display())
}

/// Model helper for tests and the CLI.
pub fn model_of(run: &RunDir) -> Result<ToyModel> {
    files::read_model(&run.model())
}
