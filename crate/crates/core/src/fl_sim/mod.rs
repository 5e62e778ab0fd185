//! Deterministic federated-averaging simulator.
//!
//! `K` clients each hold an IID shard of a synthetic classification task and
//! train a shared [`ToyModel`]. Every round each client starts from the global
//! parameters, runs local SGD on its task loss plus the hinge regularizer of
//! the watermarks assigned to it, and the server replaces the global model
//! with the sample-weighted average of the returned parameters.
//!
//! In FedSOV mode all clients embed the single hash watermark of the
//! federation's public keys with one shared embedding matrix. The FedIPR-style
//! baseline gives each client its own random watermark and matrix instead.

pub mod data;
pub mod model;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub use data::{Dataset, SyntheticTask, TaskSpec};
pub use model::{ModelShape, ToyModel};

use crate::embedding::{accumulate_hinge_grad, gen_embedding_matrix, hinge_loss_slice, EmbeddingMatrix, HingeConfig};
use crate::hash_watermark::{detection_rate, generate_watermark, ConcatenatedKey, Watermark};
use crate::pairing_sig::{self, encode_pk, GroupParams, KeyPair, PairingBackend};
use crate::{embedding, Error, Result};

/// Only IID sharding is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sharding {
    #[default]
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlConfig {
    pub clients: usize,
    pub global_epochs: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied once per global epoch.
    pub lr_decay: f64,
    pub alpha: f64,
    /// Hinge margin. The desk default is far above the usual 0.1 so that the
    /// watermark survives noise the toy classifier itself tolerates.
    pub mu: f64,
    /// Watermark length in bits.
    pub n: usize,
    /// Width of the scale layer, i.e. the number of host parameters.
    pub omega: usize,
    pub seed: u64,
    pub task: TaskSpec,
    pub sharding: Sharding,
}

impl Default for FlConfig {
    fn default() -> Self {
        FlConfig {
            clients: 10,
            global_epochs: 30,
            local_epochs: 2,
            batch_size: 16,
            learning_rate: 0.01,
            lr_decay: 0.99,
            alpha: 0.5,
            mu: 50.0,
            n: 256,
            omega: 512,
            seed: 0,
            task: TaskSpec::default(),
            sharding: Sharding::Iid,
        }
    }
}

impl FlConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.clients >= 1
            && self.global_epochs >= 1
            && self.local_epochs >= 1
            && self.batch_size >= 1
            && self.n >= 1
            && self.omega >= 1;
        if !positive {
            return Err(Error::InvalidConfig(format!("counts must be positive: {self:?}")));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {}", self.learning_rate)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidConfig(format!("lr decay {}", self.lr_decay)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite() && self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha {} / mu {}", self.alpha, self.mu)));
        }
        self.task.validate()
    }

    pub fn model_shape(&self) -> ModelShape {
        ModelShape { dim: self.task.dim, width: self.omega, classes: self.task.classes }
    }

    pub fn hinge(&self) -> HingeConfig {
        HingeConfig { alpha: self.alpha, mu: self.mu }
    }

    /// Seed of the shared embedding matrix, a fixed function of `seed`.
    pub fn embedding_seed(&self) -> u64 {
        use rand_core::RngCore;
        sub_rng(self.seed, Stream::Embedding, 0, 0).next_u64()
    }

    pub fn learning_rate_at(&self, round: usize) -> f64 {
        let mut lr = self.learning_rate;
        for _ in 0..round {
            lr *= self.lr_decay;
        }
        lr
    }
}

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Stream {
    Task = 1,
    Shards = 2,
    Test = 3,
    Init = 4,
    Keys = 5,
    Embedding = 6,
    Sgd = 7,
    Baseline = 8,
}

/// Independent generator for one purpose of a seeded run.
pub(crate) fn sub_rng(seed: u64, stream: Stream, a: u64, b: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..].copy_from_slice(&b.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}

/// A watermark together with the matrix that reads it off the host slice.
#[derive(Debug, Clone, PartialEq)]
pub struct WatermarkTask {
    pub matrix: EmbeddingMatrix,
    pub target: Watermark,
}

impl WatermarkTask {
    pub fn new(matrix: EmbeddingMatrix, target: Watermark) -> Result<Self> {
        if target.len() != matrix.n() {
            return Err(Error::ShapeMismatch(format!(
                "{}-bit watermark for a matrix with {} columns",
                target.len(),
                matrix.n()
            )));
        }
        Ok(WatermarkTask { matrix, target })
    }

    pub fn detection_rate(&self, model: &ToyModel) -> Result<f64> {
        let extracted = embedding::extract_slice(model.gamma(), &self.matrix)?;
        detection_rate(&self.target, &extracted)
    }

    pub fn hinge_loss(&self, model: &ToyModel, cfg: &HingeConfig) -> Result<f64> {
        hinge_loss_slice(model.gamma(), &self.matrix, &self.target, cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub main_accuracy: f64,
    pub detection_rate: f64,
    pub hinge_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hinge: HingeConfig,
}

/// Task loss on `rows` plus the hinge terms of `tasks`; the gradient is written to `grad`.
pub fn combined_loss_grad(
    model: &ToyModel,
    data: &Dataset,
    rows: &[usize],
    tasks: &[&WatermarkTask],
    hinge: &HingeConfig,
    grad: &mut [f64],
) -> Result<f64> {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = model.task_loss_grad(data, rows, grad)?;
    if hinge.alpha > 0.0 {
        let range = model.shape().gamma();
        for t in tasks {
            loss += t.hinge_loss(model, hinge)?;
            accumulate_hinge_grad(model.gamma(), &t.matrix, &t.target, hinge, &mut grad[range.clone()])?;
        }
    }
    Ok(loss)
}

/// Local SGD on one client's shard starting from `global`.
///
/// `client` and `round` only label a divergence error.
pub fn local_train<R: rand_core::RngCore + ?Sized>(
    global: &ToyModel,
    data: &Dataset,
    tasks: &[&WatermarkTask],
    opts: &LocalOptions,
    rng: &mut R,
    client: usize,
    round: usize,
) -> Result<ToyModel> {
    let mut model = global.clone();
    let mut grad = vec![0.0; model.params().len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..opts.epochs {
        order.shuffle(rng);
        for batch in order.chunks(opts.batch_size.max(1)) {
            let loss = combined_loss_grad(&model, data, batch, tasks, &opts.hinge, &mut grad)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { round, client, loss });
            }
            for (p, g) in model.params_mut().iter_mut().zip(&grad) {
                *p -= opts.learning_rate * g;
            }
        }
    }
    if model.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::Diverged { round, client, loss: f64::NAN });
    }
    Ok(model)
}

/// Weighted mean of parameter vectors, accumulated in index order.
pub fn fedavg(updates: &[&[f64]], weights: &[f64]) -> Result<Vec<f64>> {
    let first = updates.first().ok_or(Error::Degenerate("fedavg of no updates"))?;
    if weights.len() != updates.len() {
        return Err(Error::LengthMismatch { expected: updates.len(), actual: weights.len() });
    }
    if let Some(bad) = updates.iter().find(|u| u.len() != first.len()) {
        return Err(Error::LengthMismatch { expected: first.len(), actual: bad.len() });
    }
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidConfig("fedavg weights must be positive".into()));
    }
    let total: f64 = weights.iter().sum();
    let mut out = vec![0.0; first.len()];
    for (u, w) in updates.iter().zip(weights) {
        for (o, p) in out.iter_mut().zip(u.iter()) {
            *o += w * p;
        }
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(out)
}

/// Clients, data and the global model, without any key material.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub cfg: FlConfig,
    pub task: SyntheticTask,
    pub shards: Vec<Dataset>,
    pub test: Dataset,
    pub model: ToyModel,
    pub watermarks: Vec<WatermarkTask>,
    /// Indices into `watermarks` embedded by each client.
    pub assignment: Vec<Vec<usize>>,
    pub rounds_done: usize,
}

impl Simulation {
    fn new(cfg: FlConfig) -> Result<Self> {
        cfg.validate()?;
        let task = SyntheticTask::new(cfg.task, &mut sub_rng(cfg.seed, Stream::Task, 0, 0))?;
        let shards = (0..cfg.clients)
            .map(|k| task.sample(cfg.task.samples_per_client, &mut sub_rng(cfg.seed, Stream::Shards, k as u64, 0)))
            .collect();
        let test = task.sample(cfg.task.test_samples, &mut sub_rng(cfg.seed, Stream::Test, 0, 0));
        let model = ToyModel::init(cfg.model_shape(), &mut sub_rng(cfg.seed, Stream::Init, 0, 0))?;
        Ok(Simulation {
            cfg,
            task,
            shards,
            test,
            model,
            watermarks: Vec::new(),
            assignment: vec![Vec::new(); cfg.clients],
            rounds_done: 0,
        })
    }

    /// One round of local training followed by aggregation.
    pub fn step(&mut self) -> Result<()> {
        let round = self.rounds_done;
        let opts = LocalOptions {
            epochs: self.cfg.local_epochs,
            batch_size: self.cfg.batch_size,
            learning_rate: self.cfg.learning_rate_at(round),
            hinge: self.cfg.hinge(),
        };
        let mut updates = Vec::with_capacity(self.cfg.clients);
        for (k, shard) in self.shards.iter().enumerate() {
            let tasks: Vec<&WatermarkTask> = self.assignment[k].iter().map(|&i| &self.watermarks[i]).collect();
            let mut rng = sub_rng(self.cfg.seed, Stream::Sgd, k as u64, round as u64);
            updates.push(local_train(&self.model, shard, &tasks, &opts, &mut rng, k, round)?);
        }
        let refs: Vec<&[f64]> = updates.iter().map(|m| m.params()).collect();
        let weights: Vec<f64> = self.shards.iter().map(|s| s.len() as f64).collect();
        let averaged = fedavg(&refs, &weights)?;
        self.model = ToyModel::from_params(self.cfg.model_shape(), averaged)?;
        self.rounds_done += 1;
        Ok(())
    }

    pub fn accuracy(&self) -> Result<f64> {
        self.model.accuracy(&self.test)
    }
}

#[derive(Debug, Clone)]
pub struct Federation<B: PairingBackend> {
    pub group: GroupParams<B>,
    pub keys: Vec<KeyPair<B>>,
    pub pk_con: ConcatenatedKey,
    /// The shared hash watermark and embedding matrix.
    pub mark: WatermarkTask,
    pub sim: Simulation,
}

/// Generates client keys, the global watermark and the initial model.
pub fn setup_federation<B: PairingBackend>(cfg: &FlConfig) -> Result<Federation<B>> {
    let mut sim = Simulation::new(*cfg)?;
    let group = pairing_sig::setup::<B>(Some(cfg.seed));
    let keys: Vec<KeyPair<B>> = (0..cfg.clients)
        .map(|k| pairing_sig::keygen(&group, &mut sub_rng(cfg.seed, Stream::Keys, k as u64, 0)))
        .collect();
    let encoded: Vec<Vec<u8>> = keys.iter().map(|kp| encode_pk(&kp.pk)).collect();
    let pk_con = ConcatenatedKey::from_encodings(&encoded)?;
    let watermark = generate_watermark(&pk_con, cfg.n)?;
    let matrix = gen_embedding_matrix(cfg.omega, cfg.n, cfg.embedding_seed())?;
    let mark = WatermarkTask::new(matrix, watermark)?;
    sim.watermarks.push(mark.clone());
    sim.assignment.iter_mut().for_each(|a| a.push(0));
    Ok(Federation { group, keys, pk_con, mark, sim })
}

impl<B: PairingBackend> Federation<B> {
    pub fn metrics(&self) -> Result<RoundMetrics> {
        Ok(RoundMetrics {
            round: self.sim.rounds_done,
            main_accuracy: self.sim.accuracy()?,
            detection_rate: self.mark.detection_rate(&self.sim.model)?,
            hinge_loss: self.mark.hinge_loss(&self.sim.model, &self.sim.cfg.hinge())?,
        })
    }

    /// Runs one round and reports the metrics of the new global model.
    pub fn run_round(&mut self) -> Result<RoundMetrics> {
        self.sim.step()?;
        self.metrics()
    }

    pub fn model(&self) -> &ToyModel {
        &self.sim.model
    }
}

#[derive(Debug, Clone)]
pub struct FederationRun<B: PairingBackend> {
    pub federation: Federation<B>,
    pub metrics: Vec<RoundMetrics>,
}

impl<B: PairingBackend> FederationRun<B> {
    pub fn final_metrics(&self) -> &RoundMetrics {
        self.metrics.last().expect("a run has at least one round")
    }
}

pub fn run_federation<B: PairingBackend>(cfg: &FlConfig) -> Result<FederationRun<B>> {
    let mut federation = setup_federation::<B>(cfg)?;
    let mut metrics = Vec::with_capacity(cfg.global_epochs);
    for _ in 0..cfg.global_epochs {
        metrics.push(federation.run_round()?);
    }
    Ok(FederationRun { federation, metrics })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRoundMetrics {
    pub round: usize,
    pub main_accuracy: f64,
    pub per_client_rates: Vec<f64>,
    pub mean_rate: f64,
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub sim: Simulation,
    pub metrics: Vec<BaselineRoundMetrics>,
}

impl BaselineRun {
    pub fn final_metrics(&self) -> &BaselineRoundMetrics {
        self.metrics.last().expect("a run has at least one round")
    }

    /// The watermark and matrix of client `k`.
    pub fn client_mark(&self, k: usize) -> &WatermarkTask {
        &self.sim.watermarks[k]
    }

    pub fn total_bits(&self) -> usize {
        self.sim.watermarks.iter().map(|w| w.target.len()).sum()
    }
}

/// Per-client watermarking: client `k` embeds its own random `bits`-bit
/// watermark through its own embedding matrix. `cfg.n` is ignored.
pub fn baseline_fedipr_mode(cfg: &FlConfig, bits: usize) -> Result<BaselineRun> {
    let mut sim = Simulation::new(*cfg)?;
    for k in 0..cfg.clients {
        let mut rng = sub_rng(cfg.seed, Stream::Baseline, k as u64, 0);
        let target = Watermark::random(bits, &mut rng)?;
        let matrix = gen_embedding_matrix(cfg.omega, bits, rand_core::RngCore::next_u64(&mut rng))?;
        sim.watermarks.push(WatermarkTask::new(matrix, target)?);
        sim.assignment[k].push(k);
    }
    let mut metrics = Vec::with_capacity(cfg.global_epochs);
    for _ in 0..cfg.global_epochs {
        sim.step()?;
        let per_client_rates = sim
            .watermarks
            .iter()
            .map(|w| w.detection_rate(&sim.model))
            .collect::<Result<Vec<f64>>>()?;
        let mean_rate = per_client_rates.iter().sum::<f64>() / per_client_rates.len() as f64;
        metrics.push(BaselineRoundMetrics {
            round: sim.rounds_done,
            main_accuracy: sim.accuracy()?,
            per_client_rates,
            mean_rate,
        });
    }
    Ok(BaselineRun { sim, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairing_sig::Desk;

    fn small() -> FlConfig {
        FlConfig {
            clients: 3,
            global_epochs: 3,
            omega: 64,
            n: 32,
            task: TaskSpec { samples_per_client: 48, test_samples: 200, ..TaskSpec::default() },
            seed: 5,
            ..FlConfig::default()
        }
    }

    #[test]
    fn fedavg_examples() {
        let p = [1.0, -2.0, 3.5];
        assert_eq!(fedavg(&[&p, &p, &p], &[1.0, 2.0, 3.0]).unwrap(), p.to_vec());
        let neg = [-1.0, 2.0, -3.5];
        assert_eq!(fedavg(&[&p, &neg], &[5.0, 5.0]).unwrap(), vec![0.0; 3]);
        assert!(fedavg(&[], &[]).is_err());
        assert!(fedavg(&[&p, &p[..2]], &[1.0, 1.0]).is_err());
        assert!(fedavg(&[&p], &[0.0]).is_err());
    }

    #[test]
    fn fedavg_matches_naive_mean() {
        use rand::Rng;
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let ups: Vec<Vec<f64>> = (0..3).map(|_| (0..50).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let w = [10.0, 30.0, 60.0];
        let refs: Vec<&[f64]> = ups.iter().map(|u| u.as_slice()).collect();
        let got = fedavg(&refs, &w).unwrap();
        for j in 0..50 {
            let expect = (10.0 * ups[0][j] + 30.0 * ups[1][j] + 60.0 * ups[2][j]) / 100.0;
            assert!((got[j] - expect).abs() < 1e-12);
        }
        let scaled: Vec<Vec<f64>> = ups.iter().map(|u| u.iter().map(|x| 2.5 * x).collect()).collect();
        let refs: Vec<&[f64]> = scaled.iter().map(|u| u.as_slice()).collect();
        let got2 = fedavg(&refs, &w).unwrap();
        for j in 0..50 {
            assert!((got2[j] - 2.5 * got[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn watermark_length_does_not_depend_on_client_count() {
        let a = setup_federation::<Desk>(&FlConfig { clients: 3, ..small() }).unwrap();
        let b = setup_federation::<Desk>(&FlConfig { clients: 300, ..small() }).unwrap();
        assert_eq!(a.mark.target.len(), 32);
        assert_eq!(b.mark.target.len(), 32);
        assert_eq!(b.pk_con.count(), 300);
        assert!(a.sim.assignment.iter().all(|x| x == &[0]));
    }

    #[test]
    fn setup_is_deterministic() {
        let a = setup_federation::<Desk>(&small()).unwrap();
        let b = setup_federation::<Desk>(&small()).unwrap();
        assert_eq!(a.mark, b.mark);
        assert_eq!(a.sim.model, b.sim.model);
        assert_eq!(a.pk_con, b.pk_con);
        let c = setup_federation::<Desk>(&FlConfig { seed: 6, ..small() }).unwrap();
        assert_ne!(a.mark.target, c.mark.target);
    }

    #[test]
    fn runs_are_bit_identical() {
        let a = run_federation::<Desk>(&small()).unwrap();
        let b = run_federation::<Desk>(&small()).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.federation.sim.model, b.federation.sim.model);
    }

    #[test]
    fn zero_alpha_is_plain_sgd() {
        let cfg = FlConfig { alpha: 0.0, ..small() };
        let fed = setup_federation::<Desk>(&cfg).unwrap();
        let data = &fed.sim.shards[0];
        let opts = LocalOptions { epochs: 1, batch_size: 16, learning_rate: 0.01, hinge: cfg.hinge() };
        let with = local_train(&fed.sim.model, data, &[&fed.mark], &opts, &mut ChaCha20Rng::seed_from_u64(1), 0, 0).unwrap();
        let without = local_train(&fed.sim.model, data, &[], &opts, &mut ChaCha20Rng::seed_from_u64(1), 0, 0).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let fed = setup_federation::<Desk>(&small()).unwrap();
        let opts = LocalOptions { epochs: 2, batch_size: 16, learning_rate: 0.0, hinge: small().hinge() };
        let out = local_train(&fed.sim.model, &fed.sim.shards[1], &[&fed.mark], &opts, &mut ChaCha20Rng::seed_from_u64(2), 1, 0)
            .unwrap();
        assert_eq!(out, fed.sim.model);
    }

    #[test]
    fn combined_gradient_matches_central_differences() {
        let cfg = FlConfig {
            omega: 6,
            n: 8,
            mu: 0.7,
            task: TaskSpec { dim: 4, classes: 3, samples_per_client: 10, test_samples: 10, separation: 1.0, offset: 1.0 },
            clients: 1,
            ..small()
        };
        let mut fed = setup_federation::<Desk>(&cfg).unwrap();
        for (i, p) in fed.sim.model.params_mut().iter_mut().enumerate() {
            *p += 0.013 * ((i * 29 % 13) as f64 - 6.0);
        }
        let model = &fed.sim.model;
        let rows: Vec<usize> = (0..10).collect();
        let tasks = [&fed.mark];
        let hinge = cfg.hinge();
        let mut grad = vec![0.0; model.params().len()];
        combined_loss_grad(model, &fed.sim.shards[0], &rows, &tasks, &hinge, &mut grad).unwrap();
        let proj = embedding::project(model.gamma(), &fed.mark.matrix).unwrap();
        let signs = fed.mark.target.signs();
        assert!(proj.iter().zip(&signs).all(|(p, t)| (hinge.mu - t * p).abs() > 1e-3), "point sits on a kink");
        assert!(proj.iter().zip(&signs).any(|(p, t)| hinge.mu - t * p > 0.0), "no active hinge");
        let mut scratch = vec![0.0; grad.len()];
        let h = 1e-6;
        for j in 0..grad.len() {
            let mut plus = model.clone();
            plus.params_mut()[j] += h;
            let mut minus = model.clone();
            minus.params_mut()[j] -= h;
            let lp = combined_loss_grad(&plus, &fed.sim.shards[0], &rows, &tasks, &hinge, &mut scratch).unwrap();
            let lm = combined_loss_grad(&minus, &fed.sim.shards[0], &rows, &tasks, &hinge, &mut scratch).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - grad[j]).abs() / grad[j].abs().max(1e-3) < 1e-4, "param {j}: {fd} vs {}", grad[j]);
        }
    }

    #[test]
    fn single_client_embeds_fully() {
        let cfg = FlConfig { clients: 1, omega: 256, n: 64, global_epochs: 1, local_epochs: 40, ..small() };
        let fed = setup_federation::<Desk>(&cfg).unwrap();
        let opts = LocalOptions { epochs: 40, batch_size: 16, learning_rate: 0.01, hinge: cfg.hinge() };
        let local = local_train(&fed.sim.model, &fed.sim.shards[0], &[&fed.mark], &opts, &mut ChaCha20Rng::seed_from_u64(3), 0, 0)
            .unwrap();
        assert_eq!(fed.mark.detection_rate(&local).unwrap(), 1.0);
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = small();
        let fed = setup_federation::<Desk>(&cfg).unwrap();
        let opts = LocalOptions { epochs: 3, batch_size: 4, learning_rate: 1e6, hinge: cfg.hinge() };
        let err = local_train(&fed.sim.model, &fed.sim.shards[0], &[&fed.mark], &opts, &mut ChaCha20Rng::seed_from_u64(3), 0, 7)
            .unwrap_err();
        assert!(matches!(err, Error::Diverged { round: 7, client: 0, .. }), "{err:?}");
    }

    #[test]
    fn baseline_structure() {
        let cfg = FlConfig { clients: 4, global_epochs: 1, ..small() };
        let run = baseline_fedipr_mode(&cfg, 16).unwrap();
        assert_eq!(run.total_bits(), 64);
        assert_eq!(run.final_metrics().per_client_rates.len(), 4);
        assert_ne!(run.client_mark(0).matrix, run.client_mark(1).matrix);
        assert!(baseline_fedipr_mode(&cfg, 4).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(FlConfig::default().validate().is_ok());
        assert!(FlConfig { clients: 0, ..FlConfig::default() }.validate().is_err());
        assert!(FlConfig { mu: 0.0, ..FlConfig::default() }.validate().is_err());
        assert!(FlConfig { lr_decay: 1.5, ..FlConfig::default() }.validate().is_err());
        assert!(FlConfig { alpha: 0.0, ..FlConfig::default() }.validate().is_ok());
        let c = FlConfig::default();
        assert!((c.learning_rate_at(2) - 0.01 * 0.99 * 0.99).abs() < 1e-15);
    }
}
