//! Library routines against slow, independently written references.

use dsb::density::{kde_eval, relevance_weights, KdeConfig};
use dsb::evalbench::{knn_predict, ridge_fit, wilcoxon_signed_rank};
use dsb::irvae::{correlation_matrix, correlation_penalty};
use dsb::seeds;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Continuous, Normal};

use super::Check;

pub const KDE_TOL: f64 = 1e-12;
pub const RIDGE_TOL: f64 = 1e-8;
pub const KNN_TOL: f64 = 1e-12;
pub const WILCOXON_TOL: f64 = 1e-12;
pub const CORR_TOL: f64 = 1e-10;

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn kde_case(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let n = rng.random_range(2..=60);
    let y: Vec<f64> = (0..n).map(|_| 3.0 * gauss(rng)).collect();
    let h = rng.random_range(0.2..2.0);
    let points: Vec<f64> = (0..20).map(|_| 3.0 * gauss(rng)).collect();
    let got = kde_eval(&y, h, &points).unwrap();
    let mut err = 0.0f64;
    for (t, g) in points.iter().zip(&got) {
        let mut s = 0.0;
        for &yi in &y {
            s += Normal::new(yi, h).unwrap().pdf(*t);
        }
        err = err.max(rel(*g, s / n as f64));
    }

    let alpha = rng.random_range(0.0..2.0);
    let w = relevance_weights(&y, alpha, &KdeConfig::fixed(h)).unwrap();
    let raw: Vec<f64> = y
        .iter()
        .map(|&t| {
            let f: f64 = y.iter().map(|&yi| Normal::new(yi, h).unwrap().pdf(t)).sum();
            (f / n as f64).powf(-alpha)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let mut werr = 0.0f64;
    for i in 0..n {
        werr = werr.max(rel(w.raw[i], raw[i])).max(rel(w.normalized[i], raw[i] / total));
    }
    vec![
        Check::new("kde vs double loop", err, KDE_TOL),
        Check::new("relevance weights vs double loop", werr, KDE_TOL),
    ]
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn ridge_case(rng: &mut ChaCha8Rng) -> Check {
    let d = rng.random_range(1..=6);
    let n = rng.random_range(d + 2..=40);
    let lambda = [0.0, 1e-2, 1.0, 25.0][rng.random_range(0..4)];
    let x = Array2::from_shape_simple_fn((n, d), || gauss(rng));
    let y = Array1::from_shape_simple_fn(n, || 5.0 + 2.0 * gauss(rng));
    let fit = ridge_fit(x.view(), y.view(), lambda).unwrap();

    // Uncentered normal equations over [1 | X], intercept unpenalized.
    let cols = d + 1;
    let at = |i: usize, j: usize| if j == 0 { 1.0 } else { x[[i, j - 1]] };
    let mut a = vec![vec![0.0; cols]; cols];
    let mut b = vec![0.0; cols];
    for j in 0..cols {
        for k in 0..cols {
            a[j][k] = (0..n).map(|i| at(i, j) * at(i, k)).sum();
        }
        if j > 0 {
            a[j][j] += lambda;
        }
        b[j] = (0..n).map(|i| at(i, j) * y[i]).sum();
    }
    let beta = solve(a, b);
    let scale = beta.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let mut err = (fit.intercept - beta[0]).abs();
    for j in 0..d {
        err = err.max((fit.coef[j] - beta[j + 1]).abs());
    }
    Check::new(format!("ridge vs normal equations (λ = {lambda})"), err / scale, RIDGE_TOL)
}

fn knn_case(rng: &mut ChaCha8Rng) -> Check {
    let d = rng.random_range(1..=4);
    let n = rng.random_range(1..=30);
    let k = rng.random_range(1..=n);
    // a coarse grid makes distance ties common
    let coarse = rng.random_bool(0.5);
    let cell = |rng: &mut ChaCha8Rng| {
        if coarse {
            rng.random_range(-2..=2) as f64
        } else {
            gauss(rng)
        }
    };
    let x = Array2::from_shape_simple_fn((n, d), || cell(rng));
    let y = Array1::from_shape_simple_fn(n, || gauss(rng));
    let q = Array2::from_shape_simple_fn((8, d), || cell(rng));
    let got = knn_predict(x.view(), y.view(), q.view(), k).unwrap();
    let mut err = 0.0f64;
    for (qi, row) in q.rows().into_iter().enumerate() {
        let mut all: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let d2 = (0..d).map(|j| (x[[i, j]] - row[j]).powi(2)).sum::<f64>();
                (d2, i)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let want = all[..k].iter().map(|&(_, i)| y[i]).sum::<f64>() / k as f64;
        err = err.max((got[qi] - want).abs() / want.abs().max(1.0));
    }
    Check::new("knn vs exhaustive sort", err, KNN_TOL)
}

fn wilcoxon_case(rng: &mut ChaCha8Rng) -> Check {
    let n = rng.random_range(1..=12);
    // integer values give ties and zero differences
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
    let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let k = d.len();
    if k == 0 || k > 10 {
        return wilcoxon_case(rng);
    }
    let ranks: Vec<f64> = d
        .iter()
        .map(|di| {
            let below = d.iter().filter(|o| o.abs() < di.abs()).count() as f64;
            let tied = d.iter().filter(|o| o.abs() == di.abs()).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect();
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total: f64 = ranks.iter().sum();
    let stat = w_plus.min(total - w_plus);
    let mut at_most = 0u64;
    for mask in 0u32..(1 << k) {
        let w: f64 = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= stat + 1e-9 {
            at_most += 1;
        }
    }
    let p = (2.0 * at_most as f64 / (1u64 << k) as f64).min(1.0);
    let got = wilcoxon_signed_rank(&a, &b).unwrap();
    let err = (got.p_value - p)
        .abs()
        .max((got.statistic - stat).abs())
        .max((got.w_plus - w_plus).abs())
        .max((got.n_used as f64 - k as f64).abs());
    Check::new(format!("wilcoxon vs enumeration (k' = {k})"), err, WILCOXON_TOL)
}

fn correlation_case(rng: &mut ChaCha8Rng) -> Check {
    let n = rng.random_range(2..=40);
    let q = rng.random_range(1..=5);
    let mix = Array2::from_shape_simple_fn((q, q), || gauss(rng));
    let mut z = Array2::from_shape_simple_fn((n, q), || gauss(rng)).dot(&mix);
    if q > 1 && rng.random_bool(0.2) {
        z.column_mut(0).fill(1.5);
    }
    let mean: Vec<f64> = (0..q).map(|j| z.column(j).sum() / n as f64).collect();
    let cov = |a: usize, b: usize| {
        (0..n).map(|i| (z[[i, a]] - mean[a]) * (z[[i, b]] - mean[b])).sum::<f64>() / n as f64
    };
    let mut want = Array2::zeros((q, q));
    let mut pen = 0.0;
    for a in 0..q {
        for b in 0..q {
            let (va, vb) = (cov(a, a), cov(b, b));
            let r = if va > 1e-20 && vb > 1e-20 {
                cov(a, b) / (va * vb).sqrt()
            } else {
                0.0
            };
            want[[a, b]] = r;
            if a != b {
                pen += r * r;
            }
        }
    }
    let got = correlation_matrix(z.view());
    let err = (&got - &want)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max((correlation_penalty(z.view()) - pen).abs());
    Check::new("correlation vs covariance", err, CORR_TOL)
}

/// `cases` seeded instances of every oracle comparison.
pub fn run(cases: usize, seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    for i in 0..cases {
        let mut rng = seeds::stream(seed, i as u64);
        out.extend(kde_case(&mut rng));
        out.push(ridge_case(&mut rng));
        out.push(knn_case(&mut rng));
        out.push(wilcoxon_case(&mut rng));
        out.push(correlation_case(&mut rng));
    }
    out
}
