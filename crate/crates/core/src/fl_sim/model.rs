//! Toy classifier: dense layer, channel-scale layer, ReLU, linear head.
//!
//! All parameters live in one flat vector laid out as
//! `w1 (width x dim) | b1 | gamma | beta | w2 (classes x width) | b2`.
//! The scale layer computes `z = gamma * h + beta` per channel, and `gamma`
//! is the slice that hosts the watermark.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub dim: usize,
    pub width: usize,
    pub classes: usize,
}

impl ModelShape {
    pub fn param_count(&self) -> usize {
        self.width * self.dim + 3 * self.width + self.classes * self.width + self.classes
    }

    pub fn w1(&self) -> Range<usize> {
        0..self.width * self.dim
    }

    pub fn b1(&self) -> Range<usize> {
        let s = self.width * self.dim;
        s..s + self.width
    }

    pub fn gamma(&self) -> Range<usize> {
        let s = self.b1().end;
        s..s + self.width
    }

    pub fn beta(&self) -> Range<usize> {
        let s = self.gamma().end;
        s..s + self.width
    }

    pub fn w2(&self) -> Range<usize> {
        let s = self.beta().end;
        s..s + self.classes * self.width
    }

    pub fn b2(&self) -> Range<usize> {
        let s = self.w2().end;
        s..s + self.classes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    shape: ModelShape,
    params: Vec<f64>,
}

impl ToyModel {
    /// `w1 ~ N(0, 1/dim)`, `gamma ~ N(0, 1)`, `w2 ~ N(0, 1/width)`, biases and `beta` zero.
    ///
    /// A random-sign `gamma` keeps the classifier sensitive to noise on the host
    /// slice; with `gamma = 1` the targeted attack barely moves accuracy.
    pub fn init<R: RngCore + ?Sized>(shape: ModelShape, rng: &mut R) -> Result<Self> {
        if shape.dim == 0 || shape.width == 0 || shape.classes < 2 {
            return Err(Error::InvalidConfig(format!("model shape {shape:?}")));
        }
        let mut params = vec![0.0; shape.param_count()];
        let s1 = libm::sqrt(1.0 / shape.dim as f64);
        for p in &mut params[shape.w1()] {
            let z: f64 = StandardNormal.sample(rng);
            *p = s1 * z;
        }
        for p in &mut params[shape.gamma()] {
            *p = StandardNormal.sample(rng);
        }
        let s2 = libm::sqrt(1.0 / shape.width as f64);
        for p in &mut params[shape.w2()] {
            let z: f64 = StandardNormal.sample(rng);
            *p = s2 * z;
        }
        Ok(ToyModel { shape, params })
    }

    pub fn from_params(shape: ModelShape, params: Vec<f64>) -> Result<Self> {
        if params.len() != shape.param_count() {
            return Err(Error::LengthMismatch { expected: shape.param_count(), actual: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Degenerate("model parameters must be finite"));
        }
        Ok(ToyModel { shape, params })
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    /// The watermark-hosting scale vector.
    pub fn gamma(&self) -> &[f64] {
        &self.params[self.shape.gamma()]
    }

    pub fn gamma_mut(&mut self) -> &mut [f64] {
        let r = self.shape.gamma();
        &mut self.params[r]
    }

    fn check_input(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.shape.dim {
            return Err(Error::ShapeMismatch(format!(
                "model takes {} features, dataset has {}",
                self.shape.dim,
                data.dim()
            )));
        }
        Ok(())
    }

    /// Hidden pre-scale activations `h` and post-scale `z` for one input.
    fn hidden(&self, x: &[f64], h: &mut [f64], z: &mut [f64]) {
        let s = &self.shape;
        let w1 = &self.params[s.w1()];
        let b1 = &self.params[s.b1()];
        let gamma = &self.params[s.gamma()];
        let beta = &self.params[s.beta()];
        for u in 0..s.width {
            let row = &w1[u * s.dim..(u + 1) * s.dim];
            let mut acc = b1[u];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            h[u] = acc;
            z[u] = gamma[u] * acc + beta[u];
        }
    }

    fn head(&self, z: &[f64], logits: &mut [f64]) {
        let s = &self.shape;
        let w2 = &self.params[s.w2()];
        let b2 = &self.params[s.b2()];
        for c in 0..s.classes {
            let row = &w2[c * s.width..(c + 1) * s.width];
            let mut acc = b2[c];
            for (w, zi) in row.iter().zip(z) {
                if *zi > 0.0 {
                    acc += w * zi;
                }
            }
            logits[c] = acc;
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let s = &self.shape;
        let mut h = vec![0.0; s.width];
        let mut z = vec![0.0; s.width];
        let mut logits = vec![0.0; s.classes];
        self.hidden(x, &mut h, &mut z);
        self.head(&z, &mut logits);
        logits
    }

    /// Arg-max class; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let logits = self.logits(x);
        let mut best = 0;
        for (c, &l) in logits.iter().enumerate() {
            if l > logits[best] {
                best = c;
            }
        }
        best
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        self.check_input(data)?;
        if data.is_empty() {
            return Err(Error::Degenerate("accuracy of an empty dataset"));
        }
        let hits = (0..data.len()).filter(|&i| self.predict(data.row(i)) == data.label(i)).count();
        Ok(hits as f64 / data.len() as f64)
    }

    /// Mean softmax cross-entropy over `rows`.
    pub fn task_loss(&self, data: &Dataset, rows: &[usize]) -> Result<f64> {
        let mut scratch = vec![0.0; self.params.len()];
        self.task_loss_grad(data, rows, &mut scratch)
    }

    /// Mean cross-entropy over `rows`; its gradient is added into `grad`.
    pub fn task_loss_grad(&self, data: &Dataset, rows: &[usize], grad: &mut [f64]) -> Result<f64> {
        self.check_input(data)?;
        if grad.len() != self.params.len() {
            return Err(Error::LengthMismatch { expected: self.params.len(), actual: grad.len() });
        }
        if rows.is_empty() {
            return Ok(0.0);
        }
        let s = self.shape;
        let scale = 1.0 / rows.len() as f64;
        let mut h = vec![0.0; s.width];
        let mut z = vec![0.0; s.width];
        let mut logits = vec![0.0; s.classes];
        let mut dz = vec![0.0; s.width];
        let mut total = 0.0;
        for &i in rows {
            let x = data.row(i);
            let y = data.label(i);
            self.hidden(x, &mut h, &mut z);
            self.head(&z, &mut logits);

            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logits.iter().map(|l| libm::exp(l - max)).sum();
            let lse = max + libm::log(sum);
            total += lse - logits[y];

            dz.iter_mut().for_each(|d| *d = 0.0);
            for c in 0..s.classes {
                let p = libm::exp(logits[c] - lse);
                let dl = scale * (p - if c == y { 1.0 } else { 0.0 });
                let w2_off = s.w2().start + c * s.width;
                for u in 0..s.width {
                    if z[u] > 0.0 {
                        grad[w2_off + u] += dl * z[u];
                        dz[u] += dl * self.params[w2_off + u];
                    }
                }
                grad[s.b2().start + c] += dl;
            }
            let (g0, b0, be0, w1_0) = (s.gamma().start, s.b1().start, s.beta().start, s.w1().start);
            for u in 0..s.width {
                let d = dz[u];
                if d == 0.0 {
                    continue;
                }
                grad[g0 + u] += d * h[u];
                grad[be0 + u] += d;
                let dh = d * self.params[g0 + u];
                grad[b0 + u] += dh;
                let row = &mut grad[w1_0 + u * s.dim..w1_0 + (u + 1) * s.dim];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += dh * xi;
                }
            }
        }
        Ok(total * scale)
    }
}
