//! Supervised β-VAE for imbalanced regression.
//!
//! The encoder sees the encoded features together with the standardized
//! target and produces a Gaussian posterior per row; the decoder maps a
//! latent code back to both the features and the target. Three objectives
//! are available:
//!
//! * [`LossVariant::Plain`]: `βx·‖x̂−x‖² + βy·(ŷ−y)² + βKL·KL`
//! * [`LossVariant::Balanced`]: the target term of each row is scaled by its
//!   relevance weight `f(y)^-α`
//! * [`LossVariant::Final`]: balanced plus `βcorr · Σ_{a≠b} r²(z_a, z_b)`, the
//!   squared pairwise correlations of the sampled latent codes in a batch
//!
//! [`LossVariant::Autoencoder`] trains the same network as a deterministic
//! autoencoder (no sampling, no KL), used by the SB+AE ablation.

mod io;
mod loss;
mod model;
mod train;

use serde::{Deserialize, Serialize};

use crate::density::KdeConfig;
use crate::error::{Error, Result};
use crate::gradcore::Activation;

pub use io::{model_file_bytes, parse_model_file, read_model_file, write_model_file, ModelFile};
pub use loss::{
    correlation_matrix, correlation_penalty, correlation_penalty_grad, loss_gradient,
    loss_terms, Batch, LossTerms,
};
pub use model::{LatentSummary, VaeModel};
pub use train::{train, EpochTrace, TrainOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossVariant {
    /// Deterministic autoencoder: `z = μ`, no KL, no weighting.
    Autoencoder,
    Plain,
    Balanced,
    Final,
}

impl LossVariant {
    pub fn name(self) -> &'static str {
        match self {
            LossVariant::Autoencoder => "autoencoder",
            LossVariant::Plain => "plain",
            LossVariant::Balanced => "balanced",
            LossVariant::Final => "final",
        }
    }

    pub fn uses_relevance_weights(self) -> bool {
        matches!(self, LossVariant::Balanced | LossVariant::Final)
    }
}

impl std::str::FromStr for LossVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "autoencoder" | "ae" => Ok(LossVariant::Autoencoder),
            "plain" => Ok(LossVariant::Plain),
            "balanced" => Ok(LossVariant::Balanced),
            "final" => Ok(LossVariant::Final),
            _ => Err(Error::InvalidArgument(format!("unknown loss variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    /// Encoded feature count `d` (the target is appended internally).
    pub input_dim: usize,
    pub latent_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub activation: Activation,
}

impl ArchitectureSpec {
    /// Two hidden layers of 64 with tanh and `q = min(8, ⌈d/2⌉)`.
    pub fn default_for(input_dim: usize) -> Self {
        ArchitectureSpec {
            input_dim,
            latent_dim: input_dim.div_ceil(2).clamp(1, 8),
            encoder_hidden: vec![64, 64],
            decoder_hidden: vec![64, 64],
            activation: Activation::Tanh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument("input dimension must be at least 1".into()));
        }
        if self.latent_dim == 0 {
            return Err(Error::InvalidArgument("latent dimension must be at least 1".into()));
        }
        if self
            .encoder_hidden
            .iter()
            .chain(&self.decoder_hidden)
            .any(|&w| w == 0)
        {
            return Err(Error::InvalidArgument("hidden widths must be at least 1".into()));
        }
        if self.activation == Activation::Identity {
            return Err(Error::InvalidArgument(
                "hidden activation must be relu or tanh".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn encoder_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim + 1];
        s.extend(&self.encoder_hidden);
        s.push(2 * self.latent_dim);
        s
    }

    pub(crate) fn decoder_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.latent_dim];
        s.extend(&self.decoder_hidden);
        s.push(self.input_dim + 1);
        s
    }
}

/// Architecture settings that do not depend on the data. Resolved against the
/// encoded feature count with [`ArchitectureConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchitectureConfig {
    /// `None` picks `min(8, ⌈d/2⌉)`.
    pub latent_dim: Option<usize>,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        let d = ArchitectureSpec::default_for(1);
        ArchitectureConfig {
            latent_dim: None,
            encoder_hidden: d.encoder_hidden,
            decoder_hidden: d.decoder_hidden,
            activation: d.activation,
        }
    }
}

impl ArchitectureConfig {
    pub fn resolve(&self, input_dim: usize) -> ArchitectureSpec {
        let base = ArchitectureSpec::default_for(input_dim);
        ArchitectureSpec {
            input_dim,
            latent_dim: self.latent_dim.unwrap_or(base.latent_dim),
            encoder_hidden: self.encoder_hidden.clone(),
            decoder_hidden: self.decoder_hidden.clone(),
            activation: self.activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub beta_x: f64,
    pub beta_y: f64,
    pub beta_kl: f64,
    pub beta_corr: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rng_seed: u64,
    pub loss_variant: LossVariant,
    /// Target KDE used for the relevance weights.
    pub kde: KdeConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beta_x: 1.0,
            beta_y: 3.0,
            beta_kl: 1e-5,
            beta_corr: 1.0,
            alpha: 1.0,
            epochs: 500,
            batch_size: 64,
            learning_rate: 1e-3,
            rng_seed: 0,
            loss_variant: LossVariant::Final,
            kde: KdeConfig::default(),
        }
    }
}

/// Loss coefficients after applying the variant's overrides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub beta_x: f64,
    pub beta_y: f64,
    pub beta_kl: f64,
    pub beta_corr: f64,
    pub weighted: bool,
    pub sample: bool,
}

impl TrainConfig {
    pub fn with_variant(mut self, v: LossVariant) -> Self {
        self.loss_variant = v;
        self
    }

    pub fn coefficients(&self) -> Coefficients {
        let v = self.loss_variant;
        Coefficients {
            beta_x: self.beta_x,
            beta_y: self.beta_y,
            beta_kl: if v == LossVariant::Autoencoder {
                0.0
            } else {
                self.beta_kl
            },
            beta_corr: if v == LossVariant::Final {
                self.beta_corr
            } else {
                0.0
            },
            weighted: v.uses_relevance_weights(),
            sample: v != LossVariant::Autoencoder,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta_x", self.beta_x),
            ("beta_y", self.beta_y),
            ("beta_kl", self.beta_kl),
            ("beta_corr", self.beta_corr),
            ("alpha", self.alpha),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be a nonnegative real, got {v}"
                )));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        if self.loss_variant == LossVariant::Final && self.batch_size < 2 {
            return Err(Error::InvalidArgument(
                "the final loss needs batch_size >= 2 for latent correlations".into(),
            ));
        }
        Ok(())
    }
}
