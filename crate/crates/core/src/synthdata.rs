//! Seeded toy datasets with a rare upper tail in the target.
//!
//! The latent target `t` is drawn from `(1−τ)·N(0, 1) + τ·N(3, 0.5²)`, so a
//! fraction `τ` of the rows sits three bulk standard deviations above the
//! mode. Each numeric feature is a noisy function of `t`, each categorical
//! feature bins a noisy copy of `t` into three levels, and the reported target
//! is `y = 20 + 5t`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed_path;
use crate::seeds;
use crate::tabular::{ColumnData, ColumnSpec, Dataset};

pub const TAIL_MEAN: f64 = 3.0;
pub const TAIL_SD: f64 = 0.5;
pub const Y_OFFSET: f64 = 20.0;
pub const Y_SCALE: f64 = 5.0;
/// Bin edges applied to the categorical driver.
pub const LEVEL_EDGES: [f64; 2] = [-0.43, 0.43];
pub const LEVELS: [&str; 3] = ["low", "mid", "high"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    #[default]
    Linear,
    Quadratic,
    Interaction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n: usize,
    pub p_numeric: usize,
    pub p_categorical: usize,
    pub tail_fraction: f64,
    pub noise_sd: f64,
    pub nonlinearity: Nonlinearity,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n: 1000,
            p_numeric: 4,
            p_categorical: 1,
            tail_fraction: 0.05,
            noise_sd: 0.5,
            nonlinearity: Nonlinearity::Linear,
            rng_seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidArgument(format!(
                "n must be at least 10, got {}",
                self.n
            )));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "tail_fraction must lie in (0, 0.5), got {}",
                self.tail_fraction
            )));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise_sd must be positive, got {}",
                self.noise_sd
            )));
        }
        if self.p_numeric + self.p_categorical == 0 {
            return Err(Error::InvalidArgument("at least one feature is required".into()));
        }
        Ok(())
    }

    /// Fraction of rows expected above `threshold` on the latent target scale.
    pub fn expected_fraction_above(&self, threshold: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        let bulk = Normal::new(0.0, 1.0).expect("valid normal");
        let tail = Normal::new(TAIL_MEAN, TAIL_SD).expect("valid normal");
        let tau = self.tail_fraction;
        (1.0 - tau) * bulk.sf(threshold) + tau * tail.sf(threshold)
    }
}

/// Alternating, slowly decaying loadings of the numeric features on `t`.
fn loading(j: usize) -> f64 {
    let mag = 1.0 - 0.15 * (j % 5) as f64;
    if j % 2 == 0 {
        mag
    } else {
        -mag
    }
}

pub fn make_imbalanced(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = seeds::rng(seed_path!(spec.rng_seed, "synthdata"));
    let mut t = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let is_tail = rng.random::<f64>() < spec.tail_fraction;
        t.push(if is_tail { TAIL_MEAN + TAIL_SD * z } else { z });
    }

    let mut columns = Vec::new();
    let mut data = Vec::new();
    for j in 0..spec.p_numeric {
        let c = loading(j);
        let col = t
            .iter()
            .map(|&tv| {
                let e: f64 = rng.sample(StandardNormal);
                let signal = match spec.nonlinearity {
                    Nonlinearity::Linear => c * tv,
                    Nonlinearity::Quadratic => c * tv + 0.3 * (tv * tv - 1.0),
                    Nonlinearity::Interaction => {
                        let v: f64 = rng.sample(StandardNormal);
                        c * tv * (1.0 + 0.5 * v)
                    }
                };
                signal + spec.noise_sd * e
            })
            .collect();
        columns.push(ColumnSpec::numeric(format!("x{}", j + 1)));
        data.push(ColumnData::Numeric(col));
    }
    for j in 0..spec.p_categorical {
        let codes = t
            .iter()
            .map(|&tv| {
                let e: f64 = rng.sample(StandardNormal);
                let driver = tv + spec.noise_sd * e;
                LEVEL_EDGES.iter().filter(|&&edge| driver > edge).count() as u32
            })
            .collect();
        columns.push(ColumnSpec::categorical(format!("c{}", j + 1), LEVELS));
        data.push(ColumnData::Categorical(codes));
    }
    columns.push(ColumnSpec::numeric("y"));
    data.push(ColumnData::Numeric(
        t.iter().map(|tv| Y_OFFSET + Y_SCALE * tv).collect(),
    ));
    let target = columns.len() - 1;
    Dataset::new(columns, data, target)
}
