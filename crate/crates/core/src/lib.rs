//! Synthetic oversampling for imbalanced tabular regression.
//!
//! Rows with a rare target get a large relevance weight from a KDE of the
//! target. A variational autoencoder is trained on `[x | y]` with a
//! relevance-weighted target loss and a penalty on latent correlations. New
//! rows come from a smoothed bootstrap of the training rows' latent means:
//! relevance-weighted seed selection, Gaussian kernel noise, then decoding.
//!
//! The guide in `book/` walks through each stage with runnable examples.
//!
//! ```
//! use dsb::density::relevance_weights;
//! use dsb::irvae::{train, ArchitectureConfig, TrainConfig};
//! use dsb::latentgen::{generate, GenConfig, GenVariant};
//! use dsb::synthdata::{make_imbalanced, SynthSpec};
//! use dsb::tabular::fit_encode;
//!
//! let data = make_imbalanced(&SynthSpec { n: 100, ..SynthSpec::default() })?;
//! let enc = fit_encode(&data);
//! let cfg = TrainConfig { epochs: 5, batch_size: 32, ..TrainConfig::default() };
//! let model = train(&enc, ArchitectureConfig::default().resolve(enc.dim()), cfg.clone())?.model;
//! let w = relevance_weights(&enc.target.to_vec(), cfg.alpha, &cfg.kde)?;
//! let rows = generate(Some(&model), &data, &w, &GenConfig::new(GenVariant::Dsb))?;
//! assert_eq!(rows.m(), 100);
//! # Ok::<(), dsb::Error>(())
//! ```

pub mod density;
pub mod error;
pub mod evalbench;
pub mod gradcore;
pub mod irvae;
pub mod latentgen;
pub mod seeds;
pub mod synthdata;
pub mod tabular;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/density.md")]
    mod density {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/generation.md")]
    mod generation {}
    #[doc = include_str!("../../../book/src/benchmark.md")]
    mod benchmark {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
