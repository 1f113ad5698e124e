use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ArchitectureSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::gradcore::{Activation, Mlp, ParamLayout, ParamVector, LOGVAR_MAX, LOGVAR_MIN};
use crate::seeds;
use crate::tabular::Encoding;

/// Per-row posterior parameters of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSummary {
    /// n × q posterior means.
    pub mu: Array2<f64>,
    /// n × q posterior log-variances (clamped).
    pub logvar: Array2<f64>,
}

impl LatentSummary {
    pub fn n(&self) -> usize {
        self.mu.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub arch: ArchitectureSpec,
    /// `[x | y] → [μ | logvar]`.
    pub encoder: Mlp,
    /// `z → [x̂ | ŷ]`.
    pub decoder: Mlp,
    pub train_config: TrainConfig,
    pub encoding: Encoding,
}

impl VaeModel {
    /// Freshly initialized model.
    pub fn init(
        arch: ArchitectureSpec,
        train_config: TrainConfig,
        encoding: Encoding,
    ) -> Result<Self> {
        arch.validate()?;
        if encoding.dim() != arch.input_dim {
            return Err(Error::Shape(format!(
                "architecture expects {} encoded features, encoding has {}",
                arch.input_dim,
                encoding.dim()
            )));
        }
        let mut rng = seeds::rng(crate::seed_path!(train_config.rng_seed, "init"));
        let encoder = Mlp::new(
            &arch.encoder_sizes(),
            arch.activation,
            Activation::Identity,
            &mut rng,
        );
        let decoder = Mlp::new(
            &arch.decoder_sizes(),
            arch.activation,
            Activation::Identity,
            &mut rng,
        );
        Ok(VaeModel {
            arch,
            encoder,
            decoder,
            train_config,
            encoding,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    /// Encoder parameters followed by decoder parameters.
    pub fn params(&self) -> ParamVector {
        ParamVector::flatten(self.encoder.layers.iter().chain(&self.decoder.layers))
    }

    pub fn set_params(&mut self, params: &ParamVector) -> Result<()> {
        params.unflatten_into(
            self.encoder
                .layers
                .iter_mut()
                .chain(self.decoder.layers.iter_mut()),
        )
    }

    pub fn param_layout(&self) -> ParamLayout {
        ParamLayout::of(self.encoder.layers.iter().chain(&self.decoder.layers))
    }

    pub(crate) fn encoder_input(
        &self,
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
    ) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "model expects {} encoded features, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        if y.len() != x.nrows() {
            return Err(Error::Shape(format!(
                "{} targets for {} rows",
                y.len(),
                x.nrows()
            )));
        }
        let ycol = y.insert_axis(Axis(1));
        Ok(concatenate(Axis(1), &[x, ycol]).expect("row counts checked"))
    }

    /// Posterior means and log-variances for encoded rows `x` with
    /// standardized targets `y`. Deterministic.
    pub fn encode_latent(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<LatentSummary> {
        let input = self.encoder_input(x, y)?;
        let out = self.encoder.forward(input.view())?;
        let out = out.output();
        let q = self.latent_dim();
        Ok(LatentSummary {
            mu: out.slice(s![.., ..q]).to_owned(),
            logvar: out
                .slice(s![.., q..])
                .mapv(|v| v.clamp(LOGVAR_MIN, LOGVAR_MAX)),
        })
    }

    /// Decoder output for latent codes `z`: encoded features and the
    /// standardized target.
    pub fn decode_latent(&self, z: ArrayView2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
        if z.ncols() != self.latent_dim() {
            return Err(Error::Shape(format!(
                "model has {} latent dimensions, got {}",
                self.latent_dim(),
                z.ncols()
            )));
        }
        let d = self.input_dim();
        if z.nrows() == 0 {
            return Ok((Array2::zeros((0, d)), Array1::zeros(0)));
        }
        let cache = self.decoder.forward(z)?;
        let out = cache.output();
        Ok((out.slice(s![.., ..d]).to_owned(), out.column(d).to_owned()))
    }

    /// Natural VAE generation: for each seed row `i`, draw
    /// `z ~ N(μ_i, diag exp(logvar_i))` and decode. Row `k` of the output
    /// uses random stream `k` of `noise_seed`.
    pub fn natural_generate(
        &self,
        latent: &LatentSummary,
        seeds_idx: &[usize],
        noise_seed: u64,
    ) -> Result<(Array2<f64>, Array1<f64>)> {
        let q = self.latent_dim();
        if latent.mu.ncols() != q {
            return Err(Error::Shape(format!(
                "latent summary has {} dimensions, model has {q}",
                latent.mu.ncols()
            )));
        }
        let mut z = Array2::zeros((seeds_idx.len(), q));
        for (k, &i) in seeds_idx.iter().enumerate() {
            if i >= latent.n() {
                return Err(Error::InvalidArgument(format!(
                    "seed index {i} out of range for {} rows",
                    latent.n()
                )));
            }
            let mut rng = seeds::stream(noise_seed, k as u64);
            for j in 0..q {
                let e: f64 = rng.sample(StandardNormal);
                let sd = (0.5 * latent.logvar[[i, j]]).exp();
                z[[k, j]] = latent.mu[[i, j]] + sd * e;
            }
        }
        self.decode_latent(z.view())
    }
}
