//! Target-density estimation and the weights derived from it.
//!
//! The target density is a univariate Gaussian KDE,
//! `f(t) = 1/(n h) Σ φ((t - y_i)/h)`. Rows with a rare target get a large
//! relevance weight `f(y_i)^-α`; the same weights rebalance the training
//! loss (raw form) and drive seed selection (normalized form).

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Bandwidth choice for the target KDE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KdeBandwidth {
    #[default]
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct KdeConfig {
    #[serde(default)]
    pub bandwidth: KdeBandwidth,
}

impl KdeConfig {
    pub fn fixed(h: f64) -> Self {
        KdeConfig {
            bandwidth: KdeBandwidth::Fixed(h),
        }
    }

    /// Resolve the bandwidth on data `y`.
    pub fn bandwidth_for(&self, y: &[f64]) -> Result<f64> {
        match self.bandwidth {
            KdeBandwidth::Fixed(h) if h > 0.0 && h.is_finite() => Ok(h),
            KdeBandwidth::Fixed(h) => Err(Error::InvalidArgument(format!(
                "KDE bandwidth must be positive, got {h}"
            ))),
            KdeBandwidth::Silverman => silverman_bandwidth_1d(y),
        }
    }
}

/// Gaussian KDE of `y` with bandwidth `h`, evaluated at `points`.
///
/// Values far outside the data can underflow to zero.
pub fn kde_eval(y: &[f64], h: f64, points: &[f64]) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("KDE needs at least one observation".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "KDE bandwidth must be positive, got {h}"
        )));
    }
    if y.iter().chain(points).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("KDE input".into()));
    }
    let norm = INV_SQRT_2PI / (y.len() as f64 * h);
    Ok(points
        .iter()
        .map(|&t| {
            let s: f64 = y
                .iter()
                .map(|&yi| {
                    let u = (t - yi) / h;
                    (-0.5 * u * u).exp()
                })
                .sum();
            norm * s
        })
        .collect())
}

/// Quantile of sorted data with linear interpolation between order
/// statistics (`(n-1)p` positioning).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, p)
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Silverman's rule of thumb, `0.9 · min(σ, IQR/1.34) · n^(-1/5)`.
///
/// When the IQR is zero but the data are not constant, σ alone is used.
pub fn silverman_bandwidth_1d(y: &[f64]) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::InvalidArgument(
            "Silverman bandwidth needs at least 2 observations".into(),
        ));
    }
    let sd = sample_sd(y);
    if !(sd > 0.0) {
        return Err(Error::Degenerate(
            "all target values are identical; supply an explicit KDE bandwidth".into(),
        ));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (y.len() as f64).powf(-0.2))
}

/// A target KDE fixed on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDensity {
    pub data: Vec<f64>,
    pub bandwidth: f64,
}

impl TargetDensity {
    pub fn fit(y: &[f64], cfg: &KdeConfig) -> Result<Self> {
        let bandwidth = cfg.bandwidth_for(y)?;
        kde_eval(y, bandwidth, &[])?;
        Ok(TargetDensity {
            data: y.to_vec(),
            bandwidth,
        })
    }

    pub fn eval(&self, points: &[f64]) -> Vec<f64> {
        kde_eval(&self.data, self.bandwidth, points).expect("validated at fit")
    }

    /// Relevance weights `f(t)^-α` at arbitrary points, normalized over them.
    pub fn weights_at(&self, points: &[f64], alpha: f64) -> Result<RelevanceWeights> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be a nonnegative real, got {alpha}"
            )));
        }
        let density = kde_eval(&self.data, self.bandwidth, points)?;
        let raw: Vec<f64> = density
            .iter()
            .map(|&f| f.max(f64::MIN_POSITIVE).powf(-alpha))
            .collect();
        let total: f64 = raw.iter().sum();
        let normalized = raw.iter().map(|r| r / total).collect();
        Ok(RelevanceWeights {
            raw,
            normalized,
            alpha,
            bandwidth: self.bandwidth,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceWeights {
    /// `f(y_i)^-α`, used as per-row loss weights.
    pub raw: Vec<f64>,
    /// `raw / Σ raw`, used as a sampling distribution.
    pub normalized: Vec<f64>,
    pub alpha: f64,
    /// Bandwidth of the target KDE the weights came from.
    pub bandwidth: f64,
}

impl RelevanceWeights {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Weights of a row subset, renormalized.
    pub fn subset(&self, rows: &[usize]) -> RelevanceWeights {
        let raw: Vec<f64> = rows.iter().map(|&r| self.raw[r]).collect();
        let total: f64 = raw.iter().sum();
        RelevanceWeights {
            normalized: raw.iter().map(|r| r / total).collect(),
            raw,
            alpha: self.alpha,
            bandwidth: self.bandwidth,
        }
    }
}

/// Relevance weights of every observation under the KDE of `y` itself.
pub fn relevance_weights(y: &[f64], alpha: f64, kde: &KdeConfig) -> Result<RelevanceWeights> {
    TargetDensity::fit(y, kde)?.weights_at(y, alpha)
}

/// Diagonal kernel bandwidth for the latent smoothed bootstrap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSpec {
    pub per_dim: Vec<f64>,
    pub hmult: f64,
    /// Dimensions whose spread was zero and got the floor value.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub floored: Vec<usize>,
}

pub const BANDWIDTH_FLOOR: f64 = 1e-8;

impl BandwidthSpec {
    /// Kernel standard deviation along each dimension (`hmult · h_j`).
    pub fn effective(&self) -> Vec<f64> {
        self.per_dim.iter().map(|h| self.hmult * h).collect()
    }

    pub fn with_hmult(mut self, hmult: f64) -> Result<Self> {
        if !(hmult > 0.0 && hmult.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "hmult must be positive, got {hmult}"
            )));
        }
        self.hmult = hmult;
        Ok(self)
    }
}

/// Scott's rule per dimension: `h_j = σ_j · n^(-1/(q+4))`.
pub fn scott_bandwidth(mu: ArrayView2<f64>) -> Result<BandwidthSpec> {
    let (n, q) = mu.dim();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "Scott bandwidth needs at least 2 rows, got {n}"
        )));
    }
    let factor = (n as f64).powf(-1.0 / (q as f64 + 4.0));
    let mut per_dim = Vec::with_capacity(q);
    let mut floored = Vec::new();
    for j in 0..q {
        let col = mu.column(j).to_vec();
        let sd = sample_sd(&col);
        if sd > 0.0 && sd.is_finite() {
            per_dim.push(sd * factor);
        } else {
            per_dim.push(BANDWIDTH_FLOOR);
            floored.push(j);
        }
    }
    Ok(BandwidthSpec {
        per_dim,
        hmult: 1.0,
        floored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    // Independent double loop with the kernel written out in full.
    fn kde_oracle(y: &[f64], h: f64, t: f64) -> f64 {
        let mut acc = 0.0;
        for &yi in y {
            let u = (t - yi) / h;
            acc += (-(u * u) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        }
        acc / (y.len() as f64 * h)
    }

    #[test]
    fn single_point_kernel() {
        let f = kde_eval(&[0.0], 1.0, &[0.0]).unwrap();
        assert_relative_eq!(f[0], 0.398_942_280_4, epsilon = 1e-10);
    }

    #[test]
    fn two_point_value() {
        // (φ(0) + φ(2)) / (2 · 0.5), φ(2) = e^-2 / √(2π)
        let expected = 0.398_942_280_401_432_7 * (1.0 + (-2.0f64).exp());
        let f = kde_eval(&[0.0, 1.0], 0.5, &[0.0]).unwrap();
        assert_relative_eq!(f[0], expected, max_relative = 1e-14);
        assert_relative_eq!(f[0], 0.4529, epsilon = 1e-4);
    }

    #[test]
    fn integrates_to_one() {
        let y = [-1.0, 0.3, 0.4, 2.5];
        let h = 0.4;
        let step = 1e-3;
        let grid: Vec<f64> = (0..12_000).map(|i| -6.0 + i as f64 * step).collect();
        let f = kde_eval(&y, h, &grid).unwrap();
        let integral: f64 = f.iter().sum::<f64>() * step;
        assert_relative_eq!(integral, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn kde_errors() {
        assert!(kde_eval(&[], 1.0, &[0.0]).is_err());
        assert!(kde_eval(&[0.0], 0.0, &[0.0]).is_err());
        assert!(kde_eval(&[0.0], -1.0, &[0.0]).is_err());
        assert!(kde_eval(&[f64::NAN], 1.0, &[0.0]).is_err());
    }

    #[test]
    fn silverman_on_normal_sample() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let y: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let h = silverman_bandwidth_1d(&y).unwrap();
        // 0.9 · 1000^-0.2; σ and IQR/1.34 both estimate 1 to a few percent
        assert_relative_eq!(h, 0.2259, max_relative = 0.06);
    }

    #[test]
    fn silverman_degenerate() {
        let err = silverman_bandwidth_1d(&[0.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        assert!(err.to_string().contains("explicit"));
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.25), 1.75);
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
    }

    #[test]
    fn alpha_zero_is_uniform() {
        let w = relevance_weights(&[0.0, 0.1, 5.0, 7.0], 0.0, &KdeConfig::default()).unwrap();
        for v in &w.normalized {
            assert_eq!(*v, 0.25);
        }
        assert!(w.raw.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn outlier_gets_more_weight() {
        let y = [0.0, 0.0, 0.0, 0.0, 10.0];
        let w = relevance_weights(&y, 1.0, &KdeConfig::default()).unwrap();
        let h = w.bandwidth;
        // oracle: densities by direct evaluation
        let f0 = kde_oracle(&y, h, 0.0);
        let f10 = kde_oracle(&y, h, 10.0);
        assert!(f10 < f0);
        for i in 0..4 {
            assert!(w.normalized[4] > w.normalized[i]);
        }
        assert_relative_eq!(w.raw[4] / w.raw[0], f0 / f10, max_relative = 1e-12);
    }

    #[test]
    fn symmetric_pairs_get_equal_weight() {
        let y = [-3.0, -1.0, -0.5, 0.5, 1.0, 3.0];
        let w = relevance_weights(&y, 1.0, &KdeConfig::fixed(0.7)).unwrap();
        for i in 0..3 {
            assert_relative_eq!(w.normalized[i], w.normalized[5 - i], max_relative = 1e-12);
        }
    }

    #[test]
    fn scott_values() {
        // q = 1, sample σ = 1, n = 100
        let mut col: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let sd = sample_sd(&col);
        for v in &mut col {
            *v /= sd;
        }
        let mu = Array2::from_shape_vec((100, 1), col).unwrap();
        let bw = scott_bandwidth(mu.view()).unwrap();
        assert_relative_eq!(bw.per_dim[0], 0.398_107_170_553_497_3, max_relative = 1e-12);

        let doubled = &mu * 2.0;
        let bw2 = scott_bandwidth(doubled.view()).unwrap();
        assert_relative_eq!(bw2.per_dim[0], 2.0 * bw.per_dim[0], max_relative = 1e-12);
    }

    #[test]
    fn scott_floors_constant_dimension() {
        let mu = array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        let bw = scott_bandwidth(mu.view()).unwrap();
        assert_eq!(bw.per_dim[1], BANDWIDTH_FLOOR);
        assert_eq!(bw.floored, vec![1]);
        assert!(scott_bandwidth(array![[1.0]].view()).is_err());
    }

    proptest! {
        #[test]
        fn kde_matches_double_loop(
            y in proptest::collection::vec(-50.0f64..50.0, 1..200),
            pts in proptest::collection::vec(-60.0f64..60.0, 1..20),
            h in 0.05f64..10.0,
        ) {
            let f = kde_eval(&y, h, &pts).unwrap();
            for (fi, &t) in f.iter().zip(&pts) {
                let o = kde_oracle(&y, h, t);
                let scale = fi.abs().max(o.abs());
                if scale > 1e-290 {
                    prop_assert!((fi - o).abs() <= 1e-12 * scale);
                }
            }
        }

        #[test]
        fn weights_normalized_and_monotone(
            y in proptest::collection::vec(-10.0f64..10.0, 2..100),
            alpha in 0.01f64..3.0,
        ) {
            let w = relevance_weights(&y, alpha, &KdeConfig::fixed(0.5)).unwrap();
            let s: f64 = w.normalized.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(w.normalized.iter().all(|&v| v > 0.0));
            let f = kde_eval(&y, 0.5, &y).unwrap();
            for i in 0..y.len() {
                for j in 0..y.len() {
                    if f[i] < f[j] {
                        prop_assert!(w.raw[i] > w.raw[j]);
                    }
                }
            }
        }

        #[test]
        fn bandwidths_scale_linearly(
            y in proptest::collection::vec(-10.0f64..10.0, 5..60),
            c in 0.01f64..100.0,
        ) {
            prop_assume!(sample_sd(&y) > 1e-6);
            let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
            let h = silverman_bandwidth_1d(&y).unwrap();
            let hc = silverman_bandwidth_1d(&scaled).unwrap();
            prop_assert!((hc - c * h).abs() <= 1e-9 * c * h);

            let mu = Array2::from_shape_vec((y.len(), 1), y.clone()).unwrap();
            let b = scott_bandwidth(mu.view()).unwrap().per_dim[0];
            let bc = scott_bandwidth((&mu * c).view()).unwrap().per_dim[0];
            prop_assert!((bc - c * b).abs() <= 1e-9 * c * b);
        }
    }
}
