use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    Ridge,
    Knn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    #[serde(default = "default_lambda")]
    pub ridge_lambda: f64,
    #[serde(default = "default_k")]
    pub knn_k: usize,
}

fn default_lambda() -> f64 {
    1e-2
}

fn default_k() -> usize {
    5
}

impl RegressorSpec {
    pub fn ridge(lambda: f64) -> Self {
        RegressorSpec {
            kind: RegressorKind::Ridge,
            ridge_lambda: lambda,
            knn_k: default_k(),
        }
    }

    pub fn knn(k: usize) -> Self {
        RegressorSpec {
            kind: RegressorKind::Knn,
            ridge_lambda: default_lambda(),
            knn_k: k,
        }
    }

    /// Ridge with `λ = 0.01` and 5-NN.
    pub fn defaults() -> Vec<Self> {
        vec![Self::ridge(default_lambda()), Self::knn(default_k())]
    }

    /// Short label used in reports, e.g. `ridge` or `knn`.
    pub fn name(&self) -> &'static str {
        match self.kind {
            RegressorKind::Ridge => "ridge",
            RegressorKind::Knn => "knn",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            RegressorKind::Ridge if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) => {
                Err(Error::InvalidArgument(format!(
                    "ridge_lambda must be nonnegative, got {}",
                    self.ridge_lambda
                )))
            }
            RegressorKind::Knn if self.knn_k == 0 => {
                Err(Error::InvalidArgument("knn_k must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub coef: Array1<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.coef.len() {
            return Err(Error::Shape(format!(
                "model has {} coefficients, query has {} columns",
                self.coef.len(),
                x.ncols()
            )));
        }
        Ok(x.dot(&self.coef) + self.intercept)
    }
}

fn check_xy(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} targets", x.nrows(), y.len())));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression input".into()));
    }
    Ok(())
}

/// Minimizer of `‖Xw + b − y‖² + λ‖w‖²` with an unpenalized intercept,
/// solved by Cholesky on the centered normal equations.
pub fn ridge_fit(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64) -> Result<RidgeModel> {
    check_xy(x, y)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge lambda must be nonnegative, got {lambda}"
        )));
    }
    let d = x.ncols();
    let x_mean = x.mean_axis(Axis(0)).expect("non-empty");
    let y_mean = y.mean().expect("non-empty");
    let xc = &x - &x_mean;
    let yc = &y - y_mean;
    let mut gram = xc.t().dot(&xc);
    for j in 0..d {
        gram[[j, j]] += lambda;
    }
    let rhs = xc.t().dot(&yc);
    let a = DMatrix::from_fn(d, d, |i, j| gram[[i, j]]);
    let b = DVector::from_iterator(d, rhs.iter().copied());
    let scale = (0..d).map(|j| gram[[j, j]]).fold(0.0f64, f64::max);
    let singular = || {
        Error::Singular(if lambda == 0.0 {
            "XᵀX is singular; use ridge_lambda > 0".into()
        } else {
            "ridge system is not positive definite".into()
        })
    };
    let chol = a.cholesky().ok_or_else(singular)?;
    // rounding lets Cholesky succeed on rank-deficient systems
    if chol.l_dirty().diagonal().iter().any(|l| l * l <= 1e-12 * scale) {
        return Err(singular());
    }
    let w = chol.solve(&b);
    let coef = Array1::from_iter(w.iter().copied());
    if coef.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("ridge solution is not finite".into()));
    }
    let intercept = y_mean - x_mean.dot(&coef);
    Ok(RidgeModel { coef, intercept })
}

/// Mean target of the `k` training rows nearest to each query row
/// (Euclidean), ties broken by lower row index.
pub fn knn_predict(
    train_x: ArrayView2<f64>,
    train_y: ArrayView1<f64>,
    query: ArrayView2<f64>,
    k: usize,
) -> Result<Array1<f64>> {
    check_xy(train_x, train_y)?;
    let n = train_x.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={n}, got {k}"
        )));
    }
    if query.ncols() != train_x.ncols() {
        return Err(Error::Shape(format!(
            "training rows have {} columns, query has {}",
            train_x.ncols(),
            query.ncols()
        )));
    }
    let mut out = Array1::zeros(query.nrows());
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (qi, q) in query.axis_iter(Axis(0)).enumerate() {
        dist.clear();
        for (i, row) in train_x.axis_iter(Axis(0)).enumerate() {
            let d2: f64 = row.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum();
            dist.push((d2, i));
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        out[qi] = dist[..k].iter().map(|&(_, i)| train_y[i]).sum::<f64>() / k as f64;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedRegressor {
    Ridge(RidgeModel),
    Knn {
        x: ndarray::Array2<f64>,
        y: Array1<f64>,
        k: usize,
    },
}

impl FittedRegressor {
    pub fn fit(spec: &RegressorSpec, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Self> {
        spec.validate()?;
        match spec.kind {
            RegressorKind::Ridge => Ok(FittedRegressor::Ridge(ridge_fit(x, y, spec.ridge_lambda)?)),
            RegressorKind::Knn => {
                check_xy(x, y)?;
                if spec.knn_k > x.nrows() {
                    return Err(Error::InvalidArgument(format!(
                        "knn_k = {} exceeds the {} training rows",
                        spec.knn_k,
                        x.nrows()
                    )));
                }
                Ok(FittedRegressor::Knn {
                    x: x.to_owned(),
                    y: y.to_owned(),
                    k: spec.knn_k,
                })
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        match self {
            FittedRegressor::Ridge(m) => m.predict(x),
            FittedRegressor::Knn { x: tx, y, k } => knn_predict(tx.view(), y.view(), x, *k),
        }
    }
}
