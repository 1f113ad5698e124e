//! Synthetic rows from a trained model's latent space.
//!
//! The weighted smoothed bootstrap picks seed rows with probability
//! proportional to their relevance weight, then perturbs each seed's
//! posterior mean with diagonal Gaussian noise of scale `hmult · h_j` before
//! decoding. [`GenVariant`] covers the full ablation set, from plain weighted
//! oversampling of the original rows to the disentangled pipeline.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::{scott_bandwidth, BandwidthSpec, RelevanceWeights};
use crate::error::{Error, Result};
use crate::irvae::{LossVariant, VaeModel};
use crate::seed_path;
use crate::seeds;
use crate::tabular::{apply_encode, decode, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GenVariant {
    /// Weighted resampling of the original rows.
    #[serde(rename = "OS")]
    Os,
    /// Smoothed bootstrap in a deterministic autoencoder's latent space.
    #[serde(rename = "SB+AE")]
    SbAe,
    /// Sampling from the posterior of a plain β-VAE.
    #[serde(rename = "BVAE")]
    Bvae,
    /// Smoothed bootstrap on a plain β-VAE.
    #[serde(rename = "kBVAE")]
    KBvae,
    /// Posterior sampling from a relevance-weighted β-VAE.
    #[serde(rename = "BVAEw")]
    BvaeW,
    /// Smoothed bootstrap on a relevance-weighted β-VAE.
    #[serde(rename = "kBVAEw")]
    KBvaeW,
    /// Smoothed bootstrap on the weighted, decorrelated β-VAE.
    #[serde(rename = "DSB")]
    Dsb,
}

impl GenVariant {
    pub const ALL: [GenVariant; 7] = [
        GenVariant::Os,
        GenVariant::SbAe,
        GenVariant::Bvae,
        GenVariant::KBvae,
        GenVariant::BvaeW,
        GenVariant::KBvaeW,
        GenVariant::Dsb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GenVariant::Os => "OS",
            GenVariant::SbAe => "SB+AE",
            GenVariant::Bvae => "BVAE",
            GenVariant::KBvae => "kBVAE",
            GenVariant::BvaeW => "BVAEw",
            GenVariant::KBvaeW => "kBVAEw",
            GenVariant::Dsb => "DSB",
        }
    }

    /// Loss the model must have been trained with; `None` for OS.
    pub fn required_model(self) -> Option<LossVariant> {
        match self {
            GenVariant::Os => None,
            GenVariant::SbAe => Some(LossVariant::Autoencoder),
            GenVariant::Bvae | GenVariant::KBvae => Some(LossVariant::Plain),
            GenVariant::BvaeW | GenVariant::KBvaeW => Some(LossVariant::Balanced),
            GenVariant::Dsb => Some(LossVariant::Final),
        }
    }

    fn smoothed(self) -> bool {
        matches!(
            self,
            GenVariant::SbAe | GenVariant::KBvae | GenVariant::KBvaeW | GenVariant::Dsb
        )
    }
}

impl fmt::Display for GenVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GenVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let v = match s {
            "OS" | "OVAE" => GenVariant::Os,
            "SB+AE" | "SB_AE" | "kAE" => GenVariant::SbAe,
            "BVAE" => GenVariant::Bvae,
            "kBVAE" => GenVariant::KBvae,
            "BVAEw" => GenVariant::BvaeW,
            "kBVAEw" => GenVariant::KBvaeW,
            "DSB" => GenVariant::Dsb,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown generation variant `{s}`"
                )))
            }
        };
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMode {
    /// Synthetic rows are appended to the original training rows.
    #[default]
    Append,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Number of synthetic rows; defaults to the training size.
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default = "default_hmult")]
    pub hmult: f64,
    #[serde(default)]
    pub rng_seed: u64,
    pub variant: GenVariant,
    #[serde(default)]
    pub augment_mode: AugmentMode,
}

fn default_hmult() -> f64 {
    1.0
}

impl GenConfig {
    pub fn new(variant: GenVariant) -> Self {
        GenConfig {
            m: None,
            hmult: 1.0,
            rng_seed: 0,
            variant,
            augment_mode: AugmentMode::Append,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == Some(0) {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if !(self.hmult > 0.0 && self.hmult.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "hmult must be positive, got {}",
                self.hmult
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowProvenance {
    pub seed_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBatch {
    pub rows: Dataset,
    pub provenance: Vec<RowProvenance>,
    pub variant: GenVariant,
    pub rng_seed: u64,
}

/// JSON sidecar written next to a synthetic CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceFile {
    pub variant: GenVariant,
    pub rng_seed: u64,
    pub rows: Vec<RowProvenance>,
}

impl SyntheticBatch {
    pub fn m(&self) -> usize {
        self.rows.n()
    }

    pub fn provenance_file(&self) -> ProvenanceFile {
        ProvenanceFile {
            variant: self.variant,
            rng_seed: self.rng_seed,
            rows: self.provenance.clone(),
        }
    }
}

/// `m` independent draws of row indices with probabilities
/// `weights.normalized`.
pub fn sample_seeds<R: Rng + ?Sized>(
    weights: &RelevanceWeights,
    m: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let dist = WeightedIndex::new(&weights.normalized)
        .map_err(|e| Error::InvalidArgument(format!("invalid seed weights: {e}")))?;
    Ok((0..m).map(|_| dist.sample(rng)).collect())
}

/// `z*_k = μ_{s_k} + (hmult·h) ⊙ ε_k`, with `ε_k` drawn from stream `k` of
/// `noise_seed`.
pub fn perturb_seeds(
    mu: ArrayView2<f64>,
    seeds_idx: &[usize],
    bw: &BandwidthSpec,
    noise_seed: u64,
) -> Result<Array2<f64>> {
    let q = mu.ncols();
    if bw.per_dim.len() != q {
        return Err(Error::Shape(format!(
            "bandwidth has {} dimensions, latent means have {q}",
            bw.per_dim.len()
        )));
    }
    let scale = bw.effective();
    let mut z = Array2::zeros((seeds_idx.len(), q));
    for (k, &i) in seeds_idx.iter().enumerate() {
        if i >= mu.nrows() {
            return Err(Error::InvalidArgument(format!(
                "seed index {i} out of range for {} rows",
                mu.nrows()
            )));
        }
        let mut rng = seeds::stream(noise_seed, k as u64);
        for j in 0..q {
            let e: f64 = rng.sample(StandardNormal);
            z[[k, j]] = mu[[i, j]] + scale[j] * e;
        }
    }
    Ok(z)
}

/// Seed selection followed by kernel perturbation: a draw of `m` points from
/// `Σ_i ω_i N(μ_i, diag((hmult·h)²))`.
pub fn smoothed_bootstrap(
    mu: ArrayView2<f64>,
    weights: &RelevanceWeights,
    bw: &BandwidthSpec,
    m: usize,
    rng_seed: u64,
) -> Result<Array2<f64>> {
    if weights.len() != mu.nrows() {
        return Err(Error::Shape(format!(
            "{} weights for {} latent rows",
            weights.len(),
            mu.nrows()
        )));
    }
    let mut rng = seeds::rng(seed_path!(rng_seed, "seeds"));
    let idx = sample_seeds(weights, m, &mut rng)?;
    perturb_seeds(mu, &idx, bw, seed_path!(rng_seed, "noise"))
}

/// Produce `cfg.m` synthetic rows for `cfg.variant`.
///
/// `data` is the training set the model was fitted on and `weights` its
/// relevance weights. The seed indices depend only on `cfg.rng_seed` and
/// `weights`, so variants generated with one seed share their seeds.
pub fn generate(
    model: Option<&VaeModel>,
    data: &Dataset,
    weights: &RelevanceWeights,
    cfg: &GenConfig,
) -> Result<SyntheticBatch> {
    cfg.validate()?;
    let variant = cfg.variant;
    if weights.len() != data.n() {
        return Err(Error::Shape(format!(
            "{} weights for {} training rows",
            weights.len(),
            data.n()
        )));
    }
    let m = cfg.m.unwrap_or(data.n());
    let mut rng = seeds::rng(seed_path!(cfg.rng_seed, "seeds"));
    let idx = sample_seeds(weights, m, &mut rng)?;
    let noise_seed = seed_path!(cfg.rng_seed, "noise", variant.name());
    let provenance = idx.iter().map(|&seed_index| RowProvenance { seed_index }).collect();

    let rows = match variant.required_model() {
        None => data.select(&idx),
        Some(need) => {
            let model = model.ok_or_else(|| {
                Error::Incompatible(format!("variant {variant} needs a trained model"))
            })?;
            let have = model.train_config.loss_variant;
            if have != need {
                return Err(Error::Incompatible(format!(
                    "variant {variant} needs a model trained with the {} loss, got {}",
                    need.name(),
                    have.name()
                )));
            }
            let enc = apply_encode(&model.encoding, data)?;
            let latent = model.encode_latent(enc.values.view(), enc.target.view())?;
            let (x, y) = if variant.smoothed() {
                let bw = scott_bandwidth(latent.mu.view())?.with_hmult(cfg.hmult)?;
                let z = perturb_seeds(latent.mu.view(), &idx, &bw, noise_seed)?;
                model.decode_latent(z.view())?
            } else {
                model.natural_generate(&latent, &idx, noise_seed)?
            };
            decode(&model.encoding, x.view(), y.view())?
        }
    };
    Ok(SyntheticBatch {
        rows,
        provenance,
        variant,
        rng_seed: cfg.rng_seed,
    })
}

/// Original rows followed by the synthetic rows.
pub fn build_training_set(original: &Dataset, synth: &SyntheticBatch) -> Result<Dataset> {
    if !original.same_schema(&synth.rows) {
        return Err(Error::Schema(
            "synthetic rows do not match the training schema".into(),
        ));
    }
    original.concat(&synth.rows)
}

/// Weighted mean and covariance of the rows of `mu`, the first two moments
/// of the seed distribution.
pub fn weighted_moments(mu: ArrayView2<f64>, w: &[f64]) -> (Vec<f64>, Array2<f64>) {
    let q = mu.ncols();
    let mut mean = vec![0.0; q];
    for (row, &wi) in mu.axis_iter(Axis(0)).zip(w) {
        for j in 0..q {
            mean[j] += wi * row[j];
        }
    }
    let mut cov = Array2::zeros((q, q));
    for (row, &wi) in mu.axis_iter(Axis(0)).zip(w) {
        for a in 0..q {
            for b in 0..q {
                cov[[a, b]] += wi * (row[a] - mean[a]) * (row[b] - mean[b]);
            }
        }
    }
    (mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::relevance_weights;
    use crate::density::KdeConfig;
    use ndarray::array;

    fn uniform(n: usize) -> RelevanceWeights {
        relevance_weights(&(0..n).map(|i| i as f64).collect::<Vec<_>>(), 0.0, &KdeConfig::default())
            .unwrap()
    }

    #[test]
    fn variant_names_and_aliases() {
        for v in GenVariant::ALL {
            assert_eq!(v.name().parse::<GenVariant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.name()));
        }
        assert_eq!("kAE".parse::<GenVariant>().unwrap(), GenVariant::SbAe);
        assert_eq!("OVAE".parse::<GenVariant>().unwrap(), GenVariant::Os);
        assert!("dsb".parse::<GenVariant>().is_err());
    }

    #[test]
    fn seeds_are_reproducible() {
        let w = uniform(10);
        let a = sample_seeds(&w, 50, &mut seeds::rng(1)).unwrap();
        let b = sample_seeds(&w, 50, &mut seeds::rng(1)).unwrap();
        assert_eq!(a, b);
        assert!(sample_seeds(&w, 0, &mut seeds::rng(1)).is_err());
    }

    #[test]
    fn dominant_weight_takes_all_seeds() {
        let w = RelevanceWeights {
            raw: vec![1.0, 0.0, 0.0],
            normalized: vec![1.0, 0.0, 0.0],
            alpha: 1.0,
            bandwidth: 1.0,
        };
        let idx = sample_seeds(&w, 200, &mut seeds::rng(2)).unwrap();
        assert!(idx.iter().all(|&i| i == 0));
    }

    #[test]
    fn tiny_hmult_collapses_to_seeds() {
        let mu = array![[0.0, 1.0], [2.0, -1.0], [5.0, 3.0]];
        let bw = scott_bandwidth(mu.view()).unwrap().with_hmult(1e-12).unwrap();
        let idx = [2, 0, 0, 1];
        let z = perturb_seeds(mu.view(), &idx, &bw, 7).unwrap();
        for (k, &i) in idx.iter().enumerate() {
            for j in 0..2 {
                assert!((z[[k, j]] - mu[[i, j]]).abs() < 1e-9);
            }
        }
        let bad = BandwidthSpec {
            per_dim: vec![1.0],
            hmult: 1.0,
            floored: vec![],
        };
        assert!(perturb_seeds(mu.view(), &idx, &bad, 7).is_err());
        assert!(perturb_seeds(mu.view(), &[3], &bw, 7).is_err());
    }

    #[test]
    fn weighted_moments_of_two_points() {
        let mu = array![[0.0], [2.0]];
        let (m, c) = weighted_moments(mu.view(), &[0.25, 0.75]);
        assert_eq!(m, vec![1.5]);
        assert!((c[[0, 0]] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut c = GenConfig::new(GenVariant::Dsb);
        assert!(c.validate().is_ok());
        c.hmult = 0.0;
        assert!(c.validate().is_err());
        c.hmult = 1.0;
        c.m = Some(0);
        assert!(c.validate().is_err());
        let parsed: GenConfig = serde_json::from_str(r#"{"variant":"kBVAEw"}"#).unwrap();
        assert_eq!(parsed, GenConfig::new(GenVariant::KBvaeW));
    }
}
