//! Feature-based watermark embedding into a host parameter slice.
//!
//! Bit `i` of the watermark is read as the sign of the projection
//! `(w E)_i = sum_j w_j E_ji` of the host slice `w` onto column `i` of a
//! seeded standard-normal matrix `E`. Embedding minimizes the hinge loss
//! `alpha * sum_i max(0, mu - t_i (w E)_i)` with `t_i = +1` for a set bit and
//! `-1` otherwise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::hash_watermark::{detection_rate, Watermark};
use crate::{Error, Result};

/// Row-major `omega x n` matrix drawn from `N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    omega: usize,
    n: usize,
    seed: u64,
    entries: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from explicit entries. The seed is recorded as given.
    pub fn from_entries(omega: usize, n: usize, seed: u64, entries: Vec<f64>) -> Result<Self> {
        if omega == 0 || n == 0 || entries.len() != omega * n {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {omega} x {n} matrix",
                entries.len()
            )));
        }
        Ok(EmbeddingMatrix { omega, n, seed, entries })
    }

    pub fn omega(&self) -> usize {
        self.omega
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.omega).map(|j| self.get(j, col)).collect()
    }
}

pub fn gen_embedding_matrix(omega: usize, n: usize, seed: u64) -> Result<EmbeddingMatrix> {
    if omega == 0 || n == 0 {
        return Err(Error::ShapeMismatch(format!("empty {omega} x {n} embedding matrix")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let entries = (0..omega * n).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(EmbeddingMatrix { omega, n, seed, entries })
}

/// The watermark-hosting parameter slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostParams {
    pub values: Vec<f64>,
}

impl HostParams {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("host parameters must be finite"));
        }
        Ok(HostParams { values })
    }

    pub fn omega(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HingeConfig {
    /// Weight of the embedding loss.
    pub alpha: f64,
    /// Required margin of every projection.
    pub mu: f64,
}

impl Default for HingeConfig {
    fn default() -> Self {
        HingeConfig { alpha: 0.5, mu: 0.1 }
    }
}

impl HingeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.mu > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "hinge needs alpha > 0 and mu > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

fn check_shapes(w: &[f64], e: &EmbeddingMatrix) -> Result<()> {
    if w.len() != e.omega {
        return Err(Error::ShapeMismatch(format!(
            "host slice has {} values, embedding matrix has {} rows",
            w.len(),
            e.omega
        )));
    }
    Ok(())
}

fn check_target(target: &Watermark, e: &EmbeddingMatrix) -> Result<()> {
    if target.len() != e.n {
        return Err(Error::ShapeMismatch(format!(
            "watermark has {} bits, embedding matrix has {} columns",
            target.len(),
            e.n
        )));
    }
    Ok(())
}

/// `w E`, accumulated in ascending row order.
pub fn project(w: &[f64], e: &EmbeddingMatrix) -> Result<Vec<f64>> {
    check_shapes(w, e)?;
    let mut out = vec![0.0; e.n];
    for (j, &wj) in w.iter().enumerate() {
        let row = &e.entries[j * e.n..(j + 1) * e.n];
        for (acc, &ej) in out.iter_mut().zip(row) {
            *acc += wj * ej;
        }
    }
    Ok(out)
}

/// Sign extraction; a projection of exactly zero reads as bit 0.
pub fn extract(w: &HostParams, e: &EmbeddingMatrix) -> Result<Watermark> {
    extract_slice(&w.values, e)
}

pub fn extract_slice(w: &[f64], e: &EmbeddingMatrix) -> Result<Watermark> {
    let proj = project(w, e)?;
    let bits: Vec<bool> = proj.iter().map(|&p| p > 0.0).collect();
    Watermark::from_bits(&bits)
}

pub fn hinge_loss(w: &HostParams, e: &EmbeddingMatrix, target: &Watermark, cfg: &HingeConfig) -> Result<f64> {
    hinge_loss_slice(&w.values, e, target, cfg)
}

pub fn hinge_loss_slice(w: &[f64], e: &EmbeddingMatrix, target: &Watermark, cfg: &HingeConfig) -> Result<f64> {
    check_target(target, e)?;
    let proj = project(w, e)?;
    let total: f64 = proj
        .iter()
        .zip(target.iter())
        .map(|(&p, bit)| {
            let t = if bit { 1.0 } else { -1.0 };
            (cfg.mu - t * p).max(0.0)
        })
        .sum();
    Ok(cfg.alpha * total)
}

pub fn hinge_grad(w: &HostParams, e: &EmbeddingMatrix, target: &Watermark, cfg: &HingeConfig) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; w.omega()];
    accumulate_hinge_grad(&w.values, e, target, cfg, &mut grad)?;
    Ok(grad)
}

/// Adds `d loss / d w = -alpha * sum_{active i} t_i E_{., i}` into `grad`.
/// A hinge sitting exactly on its kink counts as inactive.
pub fn accumulate_hinge_grad(
    w: &[f64],
    e: &EmbeddingMatrix,
    target: &Watermark,
    cfg: &HingeConfig,
    grad: &mut [f64],
) -> Result<()> {
    check_target(target, e)?;
    if grad.len() != w.len() {
        return Err(Error::ShapeMismatch(format!("gradient buffer of length {}", grad.len())));
    }
    let proj = project(w, e)?;
    let coef: Vec<f64> = proj
        .iter()
        .zip(target.iter())
        .map(|(&p, bit)| {
            let t = if bit { 1.0 } else { -1.0 };
            if cfg.mu - t * p > 0.0 {
                -cfg.alpha * t
            } else {
                0.0
            }
        })
        .collect();
    if coef.iter().all(|&c| c == 0.0) {
        return Ok(());
    }
    for (j, g) in grad.iter_mut().enumerate() {
        let row = &e.entries[j * e.n..(j + 1) * e.n];
        *g += row.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentOptions {
    pub step_size: f64,
    pub max_iterations: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions { step_size: 0.05, max_iterations: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedOutcome {
    pub params: HostParams,
    pub iterations: usize,
    pub final_loss: f64,
    pub detection_rate: f64,
    /// The loss reached zero, so every projection clears the margin.
    pub converged: bool,
}

/// Plain gradient descent on the hinge loss alone.
///
/// Stops as soon as the loss is zero. Running out of iterations is reported
/// through `converged = false` together with the final loss and rate.
pub fn embed_standalone(
    w0: &HostParams,
    e: &EmbeddingMatrix,
    target: &Watermark,
    cfg: &HingeConfig,
    opt: &DescentOptions,
) -> Result<EmbedOutcome> {
    cfg.validate()?;
    check_shapes(&w0.values, e)?;
    check_target(target, e)?;
    let mut w = w0.values.clone();
    let mut grad = vec![0.0; w.len()];
    let mut iterations = 0;
    let mut loss = hinge_loss_slice(&w, e, target, cfg)?;
    while loss > 0.0 && iterations < opt.max_iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        accumulate_hinge_grad(&w, e, target, cfg, &mut grad)?;
        for (wj, gj) in w.iter_mut().zip(&grad) {
            *wj -= opt.step_size * gj;
        }
        iterations += 1;
        loss = hinge_loss_slice(&w, e, target, cfg)?;
    }
    let extracted = extract_slice(&w, e)?;
    Ok(EmbedOutcome {
        detection_rate: detection_rate(target, &extracted)?,
        params: HostParams::new(w)?,
        iterations,
        final_loss: loss,
        converged: loss == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Watermarks carry at least 8 bits, so single-bit checks repeat one
    /// column eight times.
    fn repeated(b: bool) -> Watermark {
        Watermark::from_bits(&[b; 8]).unwrap()
    }

    #[test]
    fn matrix_is_reproducible_and_standard_normal() {
        let a = gen_embedding_matrix(512, 64, 7).unwrap();
        assert_eq!(a, gen_embedding_matrix(512, 64, 7).unwrap());
        assert_ne!(a, gen_embedding_matrix(512, 64, 8).unwrap());
        let m = a.entries.len() as f64;
        let mean = a.entries.iter().sum::<f64>() / m;
        let var = a.entries.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((0.9..=1.1).contains(&var), "var {var}");
        assert_eq!(gen_embedding_matrix(1, 1, 3).unwrap().entries.len(), 1);
        assert!(gen_embedding_matrix(0, 1, 3).is_err());
    }

    #[test]
    fn zero_host_reads_all_zero_bits() {
        let e = gen_embedding_matrix(16, 8, 1).unwrap();
        let w = HostParams::new(vec![0.0; 16]).unwrap();
        assert!(extract(&w, &e).unwrap().iter().all(|b| !b));
    }

    #[test]
    fn sign_of_single_entry_columns() {
        let mut entries = vec![3.0; 8];
        entries[2] = -3.0;
        let e = EmbeddingMatrix::from_entries(1, 8, 0, entries).unwrap();
        let wm = extract(&HostParams::new(vec![2.0]).unwrap(), &e).unwrap();
        assert!(wm.bit(0));
        assert!(!wm.bit(2));
    }

    #[test]
    fn extraction_matches_naive_dot_products() {
        let e = gen_embedding_matrix(40, 64, 2).unwrap();
        let w: Vec<f64> = gen_embedding_matrix(40, 1, 3).unwrap().entries;
        let wm = extract_slice(&w, &e).unwrap();
        for col in 0..64 {
            let dot: f64 = (0..40).map(|j| w[j] * e.get(j, col)).sum();
            assert_eq!(wm.bit(col), dot > 0.0);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let e = gen_embedding_matrix(4, 8, 2).unwrap();
        let w = HostParams::new(vec![1.0; 5]).unwrap();
        assert!(matches!(extract(&w, &e), Err(Error::ShapeMismatch(_))));
        let ok = HostParams::new(vec![1.0; 4]).unwrap();
        let wrong = Watermark::zeros(16).unwrap();
        assert!(hinge_loss(&ok, &e, &wrong, &HingeConfig::default()).is_err());
        assert!(hinge_grad(&ok, &e, &wrong, &HingeConfig::default()).is_err());
        assert!(HostParams::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn hinge_loss_examples() {
        let cfg = HingeConfig::default();
        let e = EmbeddingMatrix::from_entries(1, 8, 0, vec![1.0; 8]).unwrap();
        let ones = repeated(true);
        // projections exactly at +mu
        assert_eq!(hinge_loss(&HostParams::new(vec![0.1]).unwrap(), &e, &ones, &cfg).unwrap(), 0.0);
        assert_eq!(hinge_loss(&HostParams::new(vec![1.0]).unwrap(), &e, &ones, &cfg).unwrap(), 0.0);
        // 0.5 * max(0, 0.1 - 0) per bit
        let l = hinge_loss(&HostParams::new(vec![0.0]).unwrap(), &e, &ones, &cfg).unwrap();
        assert!((l - 8.0 * 0.05).abs() < 1e-15);
    }

    #[test]
    fn gradient_inactive_and_single_hinge() {
        let cfg = HingeConfig::default();
        let e = EmbeddingMatrix::from_entries(1, 8, 0, vec![1.0; 8]).unwrap();
        let g = hinge_grad(&HostParams::new(vec![5.0]).unwrap(), &e, &repeated(true), &cfg).unwrap();
        assert_eq!(g, vec![0.0]);

        // omega = 2, only column 3 is active
        let mut entries = vec![0.0; 16];
        for col in 0..8 {
            entries[col] = if col == 3 { -1.0 } else { 1.0 };
            entries[8 + col] = if col == 3 { 0.5 } else { 2.0 };
        }
        let e = EmbeddingMatrix::from_entries(2, 8, 0, entries).unwrap();
        let w = HostParams::new(vec![1.0, 1.0]).unwrap();
        let g = hinge_grad(&w, &e, &repeated(true), &cfg).unwrap();
        // -alpha * t * E[., 3] = -0.5 * (-1, 0.5)
        assert_eq!(g, vec![0.5, -0.25]);
    }

    #[test]
    fn gradient_matches_central_differences() {
        use rand::Rng;
        let cfg = HingeConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 100 {
            let omega = rng.gen_range(1..12);
            let n = rng.gen_range(8..20);
            let e = gen_embedding_matrix(omega, n, rng.gen()).unwrap();
            let target = Watermark::random(n, &mut rng).unwrap();
            let w: Vec<f64> = (0..omega).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let proj = project(&w, &e).unwrap();
            let signs = target.signs();
            if proj.iter().zip(&signs).any(|(p, t)| (cfg.mu - t * p).abs() < 1e-3) {
                continue;
            }
            let analytic = hinge_grad(&HostParams::new(w.clone()).unwrap(), &e, &target, &cfg).unwrap();
            let h = 1e-6;
            for j in 0..omega {
                let mut plus = w.clone();
                plus[j] += h;
                let mut minus = w.clone();
                minus[j] -= h;
                let fd = (hinge_loss_slice(&plus, &e, &target, &cfg).unwrap()
                    - hinge_loss_slice(&minus, &e, &target, &cfg).unwrap())
                    / (2.0 * h);
                let denom = analytic[j].abs().max(1.0);
                assert!((fd - analytic[j]).abs() / denom < 1e-5, "fd {fd} vs {}", analytic[j]);
            }
            checked += 1;
        }
    }

    #[test]
    fn one_dimensional_descent_crosses_zero() {
        let e = EmbeddingMatrix::from_entries(1, 8, 0, vec![1.0; 8]).unwrap();
        let out = embed_standalone(
            &HostParams::new(vec![-1.0]).unwrap(),
            &e,
            &repeated(true),
            &HingeConfig::default(),
            &DescentOptions::default(),
        )
        .unwrap();
        assert!(out.params.values[0] > 0.0);
        assert_eq!(out.detection_rate, 1.0);
        assert!(out.converged);
    }

    #[test]
    fn standard_embedding_converges_quickly() {
        let e = gen_embedding_matrix(512, 64, 7).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let w0: Vec<f64> = (0..512).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 0.1 * z }).collect::<Vec<f64>>();
        let target = Watermark::random(64, &mut rng).unwrap();
        let cfg = HingeConfig::default();
        let out = embed_standalone(&HostParams::new(w0).unwrap(), &e, &target, &cfg, &DescentOptions::default())
            .unwrap();
        assert!(out.converged);
        assert_eq!(out.detection_rate, 1.0);
        assert!(out.iterations <= 500);
        let proj = project(&out.params.values, &e).unwrap();
        for (p, t) in proj.iter().zip(target.signs()) {
            assert!(t * p >= cfg.mu);
        }
        assert_eq!(extract(&out.params, &e).unwrap(), target);
    }

    #[test]
    fn overloaded_embedding_reports_shortfall() {
        let e = gen_embedding_matrix(16, 64, 9).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let target = Watermark::random(64, &mut rng).unwrap();
        let out = embed_standalone(
            &HostParams::new(vec![0.0; 16]).unwrap(),
            &e,
            &target,
            &HingeConfig::default(),
            &DescentOptions::default(),
        )
        .unwrap();
        assert!(!out.converged);
        assert!(out.detection_rate < 1.0);
        assert!(out.final_loss > 0.0);
    }

    proptest! {
        #[test]
        fn extraction_is_scale_invariant(seed in 0u64..1000, scale in 1e-3f64..1e3) {
            let e = gen_embedding_matrix(24, 16, seed).unwrap();
            let w: Vec<f64> = gen_embedding_matrix(24, 1, seed + 1).unwrap().entries;
            let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
            prop_assert_eq!(extract_slice(&w, &e).unwrap(), extract_slice(&scaled, &e).unwrap());
        }

        #[test]
        fn hinge_loss_is_midpoint_convex(seed in 0u64..1000) {
            let e = gen_embedding_matrix(10, 12, seed).unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let target = Watermark::random(12, &mut rng).unwrap();
            let a: Vec<f64> = gen_embedding_matrix(10, 1, seed + 1).unwrap().entries;
            let b: Vec<f64> = gen_embedding_matrix(10, 1, seed + 2).unwrap().entries;
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let cfg = HingeConfig::default();
            let la = hinge_loss_slice(&a, &e, &target, &cfg).unwrap();
            let lb = hinge_loss_slice(&b, &e, &target, &cfg).unwrap();
            let lm = hinge_loss_slice(&mid, &e, &target, &cfg).unwrap();
            prop_assert!(lm <= 0.5 * (la + lb) + 1e-12);
        }
    }
}
