//! Attacks on watermark-based ownership claims.
//!
//! * Ambiguity forgery: with the host slice `w` in hand, any sign pattern
//!   `B'` can be "extracted" by choosing a matching matrix `E'`, so a
//!   watermark alone proves nothing.
//! * The near-collision game: guess digests until one lands within `2 * err`
//!   of a stolen watermark.
//! * Removal: fine-tuning without the regularizer, global magnitude pruning,
//!   and Gaussian noise aimed at the host slice.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_core::RngCore;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::embedding::{project, EmbeddingMatrix};
use crate::fl_sim::{combined_loss_grad, Dataset, ToyModel, WatermarkTask};
use crate::hash_watermark::Watermark;
use crate::{Error, Result};

/// Default margin of forged projections, far above rounding noise.
pub const DEFAULT_FORGE_MARGIN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ForgedEmbedding {
    pub e_prime: EmbeddingMatrix,
    /// Claimed bits, `true` for `+1`.
    pub target_bits: Vec<bool>,
    pub margin: f64,
}

impl ForgedEmbedding {
    /// Whether `sgn(w E')` reproduces the claimed bits.
    pub fn matches(&self, w: &[f64]) -> Result<bool> {
        let proj = project(w, &self.e_prime)?;
        Ok(proj.iter().zip(&self.target_bits).all(|(&p, &b)| (p > 0.0) == b))
    }
}

/// Column `j` of `E'` is `(margin * b'_j / |w|^2) * w`, so `(w E')_j = margin * b'_j`.
pub fn forge_embedding(w_t: &[f64], target_bits: &[bool], margin: f64) -> Result<ForgedEmbedding> {
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::InvalidConfig(format!("forging margin {margin}")));
    }
    if target_bits.is_empty() || w_t.is_empty() {
        return Err(Error::ShapeMismatch("empty forging target or host slice".into()));
    }
    let norm2: f64 = w_t.iter().map(|x| x * x).sum();
    if norm2 == 0.0 || !norm2.is_finite() {
        return Err(Error::Degenerate("cannot forge signs against a zero host slice"));
    }
    let n = target_bits.len();
    let mut entries = vec![0.0; w_t.len() * n];
    for (j, &wj) in w_t.iter().enumerate() {
        for (i, &b) in target_bits.iter().enumerate() {
            let sign = if b { 1.0 } else { -1.0 };
            entries[j * n + i] = margin * sign / norm2 * wj;
        }
    }
    Ok(ForgedEmbedding {
        e_prime: EmbeddingMatrix::from_entries(w_t.len(), n, 0, entries)?,
        target_bits: target_bits.to_vec(),
        margin,
    })
}

/// Outcome of claiming a model with a forged watermark credential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityReport {
    pub bits: usize,
    /// Detection rate of the forged credential on the untouched model.
    pub forged_rate: f64,
    pub params_unchanged: bool,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    /// All three conditions of a successful ambiguity attack hold.
    pub succeeded: bool,
}

/// Forges a fresh random `bits`-bit credential for `model` and checks it the
/// way a watermark-as-credential verifier would.
pub fn ambiguity_attack_demo<R: RngCore + ?Sized>(
    model: &ToyModel,
    test: &Dataset,
    bits: usize,
    rng: &mut R,
) -> Result<AmbiguityReport> {
    let accuracy_before = model.accuracy(test)?;
    let snapshot = model.params().to_vec();
    let claimed = Watermark::random(bits, rng)?;
    let target: Vec<bool> = claimed.iter().collect();
    let forged = forge_embedding(model.gamma(), &target, DEFAULT_FORGE_MARGIN)?;
    let extracted = crate::embedding::extract_slice(model.gamma(), &forged.e_prime)?;
    let forged_rate = crate::hash_watermark::detection_rate(&claimed, &extracted)?;
    let params_unchanged = model.params() == snapshot.as_slice();
    let accuracy_after = model.accuracy(test)?;
    Ok(AmbiguityReport {
        bits,
        forged_rate,
        params_unchanged,
        accuracy_before,
        accuracy_after,
        succeeded: forged_rate == 1.0 && params_unchanged && accuracy_after == accuracy_before,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub n: usize,
    pub err: usize,
    pub k: u64,
    pub repetitions: u64,
    pub successes: u64,
}

impl GameOutcome {
    pub fn rate(&self) -> f64 {
        if self.repetitions == 0 {
            0.0
        } else {
            self.successes as f64 / self.repetitions as f64
        }
    }
}

pub const MAX_GAME_BITS: usize = 24;

/// Public-key replacement game with one stolen watermark.
///
/// Each repetition draws a target digest and `k` independent candidates; the
/// attacker wins if some candidate lies within Hamming distance `2 * err`.
pub fn near_collision_forging_game<R: RngCore + ?Sized>(
    n: usize,
    err: usize,
    k: u64,
    repetitions: u64,
    rng: &mut R,
) -> Result<GameOutcome> {
    if n == 0 || n > MAX_GAME_BITS {
        return Err(Error::OutOfRange(format!("forging game needs 1 <= n <= {MAX_GAME_BITS}, got {n}")));
    }
    let mask = (1u32 << n) - 1;
    let radius = 2 * err;
    let mut successes = 0;
    for _ in 0..repetitions {
        let target = rng.next_u32() & mask;
        let hit = (0..k).any(|_| ((rng.next_u32() & mask) ^ target).count_ones() as usize <= radius);
        if hit {
            successes += 1;
        }
    }
    Ok(GameOutcome { n, err, k, repetitions, successes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub accuracy: f64,
    pub detection_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    pub accuracy: f64,
    pub detection_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RemovalAttackConfig {
    Finetune { epochs: usize, learning_rate: f64, batch_size: usize },
    Prune { rate: f64 },
    GaussianTarget { phi: f64 },
}

impl RemovalAttackConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RemovalAttackConfig::Finetune { learning_rate, batch_size, .. } => {
                learning_rate >= 0.0 && learning_rate.is_finite() && batch_size >= 1
            }
            RemovalAttackConfig::Prune { rate } => (0.0..1.0).contains(&rate),
            RemovalAttackConfig::GaussianTarget { phi } => phi > 0.0 && phi < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("attack parameters {self:?}")))
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RemovalAttackConfig::Finetune { .. } => "finetune",
            RemovalAttackConfig::Prune { .. } => "prune",
            RemovalAttackConfig::GaussianTarget { .. } => "gaussian_target",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack_kind: String,
    pub params: RemovalAttackConfig,
    pub before: Snapshot,
    pub after: Snapshot,
    pub trace: Vec<TracePoint>,
}

pub fn snapshot(model: &ToyModel, mark: &WatermarkTask, test: &Dataset) -> Result<Snapshot> {
    Ok(Snapshot { accuracy: model.accuracy(test)?, detection_rate: mark.detection_rate(model)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinetuneOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for FinetuneOptions {
    fn default() -> Self {
        FinetuneOptions { epochs: 50, learning_rate: 0.01, batch_size: 16 }
    }
}

/// SGD on the task loss alone over the attacker's data, one trace point per epoch.
pub fn finetune_attack<R: RngCore + ?Sized>(
    model: &ToyModel,
    mark: &WatermarkTask,
    attacker_data: &Dataset,
    test: &Dataset,
    opts: &FinetuneOptions,
    rng: &mut R,
) -> Result<(ToyModel, AttackReport)> {
    use rand::seq::SliceRandom;
    let FinetuneOptions { epochs, learning_rate, batch_size } = *opts;
    let params = RemovalAttackConfig::Finetune { epochs, learning_rate, batch_size };
    params.validate()?;
    let before = snapshot(model, mark, test)?;
    let mut attacked = model.clone();
    let mut grad = vec![0.0; attacked.params().len()];
    let mut order: Vec<usize> = (0..attacker_data.len()).collect();
    let mut trace = Vec::with_capacity(epochs);
    let no_reg = crate::embedding::HingeConfig { alpha: 0.0, mu: 1.0 };
    for epoch in 0..epochs {
        order.shuffle(rng);
        for batch in order.chunks(batch_size) {
            let loss = combined_loss_grad(&attacked, attacker_data, batch, &[], &no_reg, &mut grad)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { round: epoch, client: usize::MAX, loss });
            }
            for (p, g) in attacked.params_mut().iter_mut().zip(&grad) {
                *p -= learning_rate * g;
            }
        }
        let s = snapshot(&attacked, mark, test)?;
        trace.push(TracePoint { step: epoch + 1, accuracy: s.accuracy, detection_rate: s.detection_rate });
    }
    let after = snapshot(&attacked, mark, test)?;
    let report = AttackReport { attack_kind: params.kind().into(), params, before, after, trace };
    Ok((attacked, report))
}

/// Zeroes the `rate` fraction of parameters with the smallest magnitude,
/// across all layers. Ties are broken by position.
pub fn prune_attack(model: &ToyModel, mark: &WatermarkTask, test: &Dataset, rate: f64) -> Result<(ToyModel, AttackReport)> {
    let params = RemovalAttackConfig::Prune { rate };
    params.validate()?;
    let before = snapshot(model, mark, test)?;
    let mut attacked = model.clone();
    let count = libm::floor(rate * attacked.params().len() as f64) as usize;
    let mut order: Vec<usize> = (0..attacked.params().len()).collect();
    let p = attacked.params();
    order.sort_by(|&a, &b| p[a].abs().total_cmp(&p[b].abs()).then(a.cmp(&b)));
    for &i in &order[..count] {
        attacked.params_mut()[i] = 0.0;
    }
    let after = snapshot(&attacked, mark, test)?;
    let report = AttackReport {
        attack_kind: params.kind().into(),
        params,
        before,
        after,
        trace: vec![TracePoint { step: 1, accuracy: after.accuracy, detection_rate: after.detection_rate }],
    };
    Ok((attacked, report))
}

/// Adds `N(mean, phi * var)` noise to every entry of the host slice, where
/// `mean` and `var` are the population statistics of that slice.
pub fn gaussian_target_attack<R: RngCore + ?Sized>(
    model: &ToyModel,
    mark: &WatermarkTask,
    test: &Dataset,
    phi: f64,
    rng: &mut R,
) -> Result<(ToyModel, AttackReport)> {
    let params = RemovalAttackConfig::GaussianTarget { phi };
    params.validate()?;
    let before = snapshot(model, mark, test)?;
    let mut attacked = model.clone();
    let gamma = attacked.gamma_mut();
    let omega = gamma.len() as f64;
    let mean = gamma.iter().sum::<f64>() / omega;
    let var = gamma.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / omega;
    let noise = Normal::new(mean, libm::sqrt(phi * var)).map_err(|_| Error::Degenerate("noise distribution"))?;
    for g in gamma.iter_mut() {
        *g += noise.sample(rng);
    }
    let after = snapshot(&attacked, mark, test)?;
    let report = AttackReport {
        attack_kind: params.kind().into(),
        params,
        before,
        after,
        trace: vec![TracePoint { step: 1, accuracy: after.accuracy, detection_rate: after.detection_rate }],
    };
    Ok((attacked, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub phi: f64,
    pub trial: u64,
    pub accuracy: f64,
    pub detection_rate: f64,
    pub accuracy_drop: f64,
}

/// Runs the targeted attack for every `phi` with `trials` independent draws each.
pub fn gaussian_sweep<R: RngCore + ?Sized>(
    model: &ToyModel,
    mark: &WatermarkTask,
    test: &Dataset,
    phis: &[f64],
    trials: u64,
    rng: &mut R,
) -> Result<Vec<SweepPoint>> {
    let base = model.accuracy(test)?;
    let mut out = Vec::with_capacity(phis.len() * trials as usize);
    for &phi in phis {
        for trial in 0..trials {
            let (_, report) = gaussian_target_attack(model, mark, test, phi, rng)?;
            out.push(SweepPoint {
                phi,
                trial,
                accuracy: report.after.accuracy,
                detection_rate: report.after.detection_rate,
                accuracy_drop: base - report.after.accuracy,
            });
        }
    }
    Ok(out)
}

/// One point of the tradeoff curve: the trial means at a given `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub phi: f64,
    pub trials: u64,
    pub accuracy: f64,
    pub detection_rate: f64,
    pub accuracy_drop: f64,
}

/// Averages sweep points sharing a `phi`, in order of first appearance.
pub fn tradeoff_curve(points: &[SweepPoint]) -> Vec<CurvePoint> {
    let mut out: Vec<CurvePoint> = Vec::new();
    for p in points {
        let idx = match out.iter().position(|c| c.phi == p.phi) {
            Some(i) => i,
            None => {
                out.push(CurvePoint { phi: p.phi, trials: 0, accuracy: 0.0, detection_rate: 0.0, accuracy_drop: 0.0 });
                out.len() - 1
            }
        };
        let c = &mut out[idx];
        c.trials += 1;
        c.accuracy += p.accuracy;
        c.detection_rate += p.detection_rate;
        c.accuracy_drop += p.accuracy_drop;
    }
    for c in &mut out {
        let t = c.trials as f64;
        c.accuracy /= t;
        c.detection_rate /= t;
        c.accuracy_drop /= t;
    }
    out
}

/// Uniform draw helper for callers without `rand::Rng` in scope.
pub fn random_bits<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Vec<bool> {
    (0..len).map(|_| rng.gen_bool(0.5)).collect()
}
