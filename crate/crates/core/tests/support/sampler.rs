//! Statistical checks of the latent smoothed bootstrap.

use dsb::density::{relevance_weights, scott_bandwidth, BandwidthSpec, KdeConfig, RelevanceWeights};
use dsb::latentgen::{perturb_seeds, sample_seeds, smoothed_bootstrap, weighted_moments};
use dsb::seeds;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::Check;

pub const DRAWS: usize = 100_000;
/// Largest standardized deviation accepted for a moment estimate.
pub const MAX_SIGMAS: f64 = 5.0;
/// Seed counts must not reject at `p = 0.001`, i.e. `-log10 p < 3`.
pub const CHI2_LOG_P: f64 = 3.0;

struct Setup {
    mu: Array2<f64>,
    weights: RelevanceWeights,
    bw: BandwidthSpec,
}

fn setup(rng: &mut ChaCha8Rng) -> Setup {
    let n = rng.random_range(2..=20);
    let q = rng.random_range(1..=3);
    let mu = Array2::from_shape_simple_fn((n, q), || rng.sample::<f64, _>(StandardNormal));
    let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let alpha = rng.random_range(0.0..1.0);
    let weights = relevance_weights(&y, alpha, &KdeConfig::fixed(0.5)).unwrap();
    let hmult = rng.random_range(0.3..2.0);
    let bw = scott_bandwidth(mu.view()).unwrap().with_hmult(hmult).unwrap();
    Setup { mu, weights, bw }
}

/// Sample mean and covariance of the draws against the mixture's, in units
/// of their standard errors.
fn moments_case(rng: &mut ChaCha8Rng, seed: u64) -> Check {
    let s = setup(rng);
    let q = s.mu.ncols();
    let z = smoothed_bootstrap(s.mu.view(), &s.weights, &s.bw, DRAWS, seed).unwrap();
    let (mean, mut cov) = weighted_moments(s.mu.view(), &s.weights.normalized);
    for (j, h) in s.bw.effective().iter().enumerate() {
        cov[[j, j]] += h * h;
    }
    let m = DRAWS as f64;
    let mut worst = 0.0f64;
    for a in 0..q {
        let col = z.column(a);
        let avg = col.sum() / m;
        worst = worst.max((avg - mean[a]).abs() / (cov[[a, a]] / m).sqrt());
        for b in 0..q {
            // products about the true mean; their spread gives the standard error
            let prod: Vec<f64> = z
                .rows()
                .into_iter()
                .map(|r| (r[a] - mean[a]) * (r[b] - mean[b]))
                .collect();
            let pm = prod.iter().sum::<f64>() / m;
            let pv = prod.iter().map(|p| (p - pm).powi(2)).sum::<f64>() / (m - 1.0);
            worst = worst.max((pm - cov[[a, b]]).abs() / (pv / m).sqrt());
        }
    }
    Check::new(
        format!("mixture moments (n = {}, q = {q})", s.mu.nrows()),
        worst,
        MAX_SIGMAS,
    )
}

fn seeds_case(rng: &mut ChaCha8Rng) -> Check {
    let s = setup(rng);
    let n = s.weights.len();
    let idx = sample_seeds(&s.weights, DRAWS, rng).unwrap();
    let mut counts = vec![0.0; n];
    for i in idx {
        counts[i] += 1.0;
    }
    let stat: f64 = counts
        .iter()
        .zip(&s.weights.normalized)
        .map(|(c, w)| {
            let e = w * DRAWS as f64;
            (c - e).powi(2) / e
        })
        .sum();
    let p = ChiSquared::new((n - 1) as f64).unwrap().sf(stat);
    Check::new(format!("seed frequencies (n = {n}), p = {p:.4}"), -p.log10(), CHI2_LOG_P)
}

/// With a vanishing bandwidth every draw sits on its seed; reported in units
/// of the kernel scale.
fn collapse_case(rng: &mut ChaCha8Rng, seed: u64) -> Check {
    let s = setup(rng);
    let hmult = 1e-9;
    let bw = s.bw.clone().with_hmult(hmult).unwrap();
    let mut srng = seeds::rng(seed);
    let idx = sample_seeds(&s.weights, 1000, &mut srng).unwrap();
    let z = perturb_seeds(s.mu.view(), &idx, &bw, seed).unwrap();
    let hmax = bw.effective().iter().fold(0.0f64, |a, &b| a.max(b));
    let mut worst = 0.0f64;
    for (k, &i) in idx.iter().enumerate() {
        for j in 0..s.mu.ncols() {
            worst = worst.max((z[[k, j]] - s.mu[[i, j]]).abs());
        }
    }
    Check::new("hmult collapse", worst / hmax, 10.0)
}

/// `cases` seeded instances of each check.
pub fn run(cases: usize, seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    for i in 0..cases {
        let mut rng = seeds::stream(seed, i as u64);
        let case_seed: u64 = rng.random();
        out.push(moments_case(&mut rng, case_seed));
        out.push(seeds_case(&mut rng));
        out.push(collapse_case(&mut rng, case_seed));
    }
    out
}
