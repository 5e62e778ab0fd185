//! Synthetic classification task: Gaussian clusters around random class means.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub classes: usize,
    pub dim: usize,
    pub samples_per_client: usize,
    pub test_samples: usize,
    /// Standard deviation of the class-mean coordinates around the shared
    /// center. Samples add unit noise.
    pub separation: f64,
    /// Standard deviation of the shared center coordinates.
    pub offset: f64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec { classes: 4, dim: 32, samples_per_client: 200, test_samples: 2000, separation: 0.45, offset: 2.0 }
    }
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.dim == 0 || self.samples_per_client == 0 || self.test_samples == 0 {
            return Err(Error::InvalidConfig(format!("degenerate task {self:?}")));
        }
        if !(self.separation > 0.0 && self.separation.is_finite() && self.offset >= 0.0 && self.offset.is_finite()) {
            return Err(Error::InvalidConfig(format!("separation {} / offset {}", self.separation, self.offset)));
        }
        Ok(())
    }
}

/// Row-major feature matrix with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} features for {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        Ok(Dataset { dim, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Fixed class means; every dataset of a federation is drawn around them.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    spec: TaskSpec,
    means: Vec<f64>,
}

impl SyntheticTask {
    pub fn new<R: RngCore + ?Sized>(spec: TaskSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let center: Vec<f64> = (0..spec.dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                spec.offset * z
            })
            .collect();
        let mut means = Vec::with_capacity(spec.classes * spec.dim);
        for _ in 0..spec.classes {
            for c in &center {
                let z: f64 = StandardNormal.sample(rng);
                means.push(c + spec.separation * z);
            }
        }
        Ok(SyntheticTask { spec, means })
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn mean(&self, class: usize) -> &[f64] {
        &self.means[class * self.spec.dim..(class + 1) * self.spec.dim]
    }

    /// Draws `count` samples with uniformly random labels.
    pub fn sample<R: RngCore + ?Sized>(&self, count: usize, rng: &mut R) -> Dataset {
        let dim = self.spec.dim;
        let mut features = Vec::with_capacity(count * dim);
        let mut labels = Vec::with_capacity(count);
        for _ in 0..count {
            let y = rng.gen_range(0..self.spec.classes);
            for &m in self.mean(y) {
                let noise: f64 = StandardNormal.sample(rng);
                features.push(m + noise);
            }
            labels.push(y);
        }
        Dataset { dim, features, labels }
    }
}
