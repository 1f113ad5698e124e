use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::loss::{loss_gradient, Batch, LossTerms};
use super::{ArchitectureSpec, TrainConfig, VaeModel};
use crate::density::{relevance_weights, RelevanceWeights};
use crate::error::{Error, Result};
use crate::gradcore::{AdamConfig, OptimizerState};
use crate::seed_path;
use crate::seeds;
use crate::tabular::EncodedMatrix;

/// Batch-size-weighted means of the loss terms over one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    #[serde(flatten)]
    pub terms: LossTerms,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: VaeModel,
    pub trace: Vec<EpochTrace>,
    /// Relevance weights of the training rows, on the standardized target.
    pub weights: RelevanceWeights,
}

/// Row ranges of one epoch: consecutive chunks of `batch_size`, with a
/// trailing chunk of fewer than 2 rows folded into the one before it.
pub(crate) fn batch_bounds(n: usize, batch_size: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..n)
        .step_by(batch_size)
        .map(|s| (s, (s + batch_size).min(n)))
        .collect();
    if out.len() > 1 {
        let (s, e) = *out.last().expect("non-empty");
        if e - s < 2 {
            out.pop();
            out.last_mut().expect("at least one batch").1 = e;
        }
    }
    out
}

/// Fit a model on an encoded training set. Initialization, shuffling and
/// reparameterization noise all derive from `cfg.rng_seed`.
pub fn train(data: &EncodedMatrix, arch: ArchitectureSpec, cfg: TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let n = data.n();
    if n < cfg.batch_size {
        return Err(Error::InvalidArgument(format!(
            "{n} training rows is fewer than batch_size {}",
            cfg.batch_size
        )));
    }
    let y = data.target.to_vec();
    let weights = relevance_weights(&y, cfg.alpha, &cfg.kde)?;
    let coef = cfg.coefficients();
    let raw_w = Array1::from(weights.raw.clone());

    let mut model = VaeModel::init(arch, cfg.clone(), data.encoding.clone())?;
    let q = model.latent_dim();
    let mut params = model.params();
    let mut opt = OptimizerState::new(
        params.len(),
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut shuffle_rng = seeds::rng(seed_path!(cfg.rng_seed, "shuffle"));
    let mut noise_rng = seeds::rng(seed_path!(cfg.rng_seed, "noise"));
    let bounds = batch_bounds(n, cfg.batch_size);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut acc = LossTerms::default();
        for (bi, &(s, e)) in bounds.iter().enumerate() {
            let rows = &order[s..e];
            let x = data.values.select(Axis(0), rows);
            let yb = data.target.select(Axis(0), rows);
            let wb = coef.weighted.then(|| raw_w.select(Axis(0), rows));
            let noise = coef.sample.then(|| {
                Array2::from_shape_simple_fn((rows.len(), q), || noise_rng.sample(StandardNormal))
            });
            let batch = Batch {
                x: x.view(),
                y: yb.view(),
                weights: wb.as_ref().map(|w| w.view()),
                noise: noise.as_ref().map(|e| e.view()),
            };
            let (terms, grad) = loss_gradient(&model, &batch).map_err(|err| match err {
                Error::NonFinite(what) => {
                    Error::NonFinite(format!("{what} at epoch {epoch}, batch {bi}"))
                }
                other => other,
            })?;
            opt.step(&mut params, &grad)?;
            model.set_params(&params)?;
            let f = rows.len() as f64 / n as f64;
            acc.recon_x += f * terms.recon_x;
            acc.recon_y += f * terms.recon_y;
            acc.kl += f * terms.kl;
            acc.corr += f * terms.corr;
            acc.total += f * terms.total;
        }
        trace.push(EpochTrace { epoch, terms: acc });
    }
    Ok(TrainOutput {
        model,
        trace,
        weights,
    })
}
