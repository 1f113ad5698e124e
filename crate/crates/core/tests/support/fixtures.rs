//! Small seeded datasets and models shared by the tests.

use dsb::irvae::{correlation_matrix, train, ArchitectureConfig, LossVariant, TrainConfig, VaeModel};
use dsb::synthdata::{make_imbalanced, SynthSpec};
use dsb::tabular::{fit_encode, Dataset, EncodedMatrix};

pub fn dataset(n: usize, seed: u64) -> Dataset {
    make_imbalanced(&SynthSpec {
        n,
        rng_seed: seed,
        ..SynthSpec::default()
    })
    .unwrap()
}

/// A short training configuration for tests that only need a working model.
pub fn quick_config(variant: LossVariant, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 40,
        batch_size: 32,
        learning_rate: 3e-3,
        rng_seed: seed,
        loss_variant: variant,
        ..TrainConfig::default()
    }
}

pub fn small_arch() -> ArchitectureConfig {
    ArchitectureConfig {
        encoder_hidden: vec![16],
        decoder_hidden: vec![16],
        ..ArchitectureConfig::default()
    }
}

pub fn fit(ds: &Dataset, cfg: TrainConfig, arch: &ArchitectureConfig) -> (EncodedMatrix, VaeModel) {
    let enc = fit_encode(ds);
    let model = train(&enc, arch.resolve(enc.dim()), cfg).unwrap().model;
    (enc, model)
}

/// Mean absolute off-diagonal correlation of the latent means of `enc`.
pub fn latent_mean_abs_corr(model: &VaeModel, enc: &EncodedMatrix) -> f64 {
    let lat = model.encode_latent(enc.values.view(), enc.target.view()).unwrap();
    let r = correlation_matrix(lat.mu.view());
    let q = r.nrows();
    let mut total = 0.0;
    for a in 0..q {
        for b in 0..q {
            if a != b {
                total += r[[a, b]].abs();
            }
        }
    }
    total / (q * (q - 1)).max(1) as f64
}

#[derive(Debug, Clone, Copy)]
pub struct Disentanglement {
    pub with_penalty: f64,
    pub without_penalty: f64,
}

/// Train the final loss with and without the correlation penalty from one
/// seed on a 1000-row, five-feature dataset.
pub fn disentanglement(epochs: usize, seed: u64) -> Disentanglement {
    let ds = dataset(1000, seed);
    let base = TrainConfig {
        epochs,
        rng_seed: seed,
        loss_variant: LossVariant::Final,
        ..TrainConfig::default()
    };
    let arch = ArchitectureConfig::default();
    let (enc, on) = fit(&ds, base.clone(), &arch);
    let (_, off) = fit(&ds, TrainConfig { beta_corr: 0.0, ..base }, &arch);
    Disentanglement {
        with_penalty: latent_mean_abs_corr(&on, &enc),
        without_penalty: latent_mean_abs_corr(&off, &enc),
    }
}
