use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{Error, Result};

/// Bounds applied to every log-variance head output.
pub const LOGVAR_MIN: f64 = -20.0;
pub const LOGVAR_MAX: f64 = 20.0;

fn same_shape(a: ArrayView2<f64>, b: ArrayView2<f64>, what: &str) -> Result<()> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what}: {:?} vs {:?}", a.dim(), b.dim())))
    }
}

/// `z = μ + exp(logvar / 2) ⊙ ε`.
pub fn reparameterize(
    mu: ArrayView2<f64>,
    logvar: ArrayView2<f64>,
    noise: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    same_shape(mu, logvar, "mu/logvar")?;
    same_shape(mu, noise, "mu/noise")?;
    if logvar.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logvar".into()));
    }
    let mut z = Array2::zeros(mu.dim());
    Zip::from(&mut z)
        .and(mu)
        .and(logvar)
        .and(noise)
        .for_each(|z, &m, &lv, &e| *z = m + (0.5 * lv).exp() * e);
    Ok(z)
}

/// Gradients of a downstream loss with respect to `μ` and `logvar`, given
/// its gradient with respect to `z`.
pub fn reparameterize_backward(
    grad_z: ArrayView2<f64>,
    logvar: ArrayView2<f64>,
    noise: ArrayView2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let grad_mu = grad_z.to_owned();
    let mut grad_lv = Array2::zeros(grad_z.dim());
    Zip::from(&mut grad_lv)
        .and(grad_z)
        .and(logvar)
        .and(noise)
        .for_each(|g, &gz, &lv, &e| *g = gz * 0.5 * (0.5 * lv).exp() * e);
    (grad_mu, grad_lv)
}

/// KL divergence of `N(μ, diag exp(logvar))` from `N(0, I)`, summed over
/// latent dimensions and averaged over the batch.
pub fn kl_gaussian(mu: ArrayView2<f64>, logvar: ArrayView2<f64>) -> Result<f64> {
    same_shape(mu, logvar, "mu/logvar")?;
    if mu.iter().chain(logvar.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("KL input".into()));
    }
    let b = mu.nrows().max(1) as f64;
    let mut total = 0.0;
    Zip::from(mu)
        .and(logvar)
        .for_each(|&m, &lv| total += 0.5 * (lv.exp() + m * m - 1.0 - lv));
    Ok(total / b)
}

pub fn kl_gaussian_grad(mu: ArrayView2<f64>, logvar: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
    let b = mu.nrows().max(1) as f64;
    let gmu = mu.mapv(|m| m / b);
    let glv = logvar.mapv(|lv| 0.5 * (lv.exp() - 1.0) / b);
    (gmu, glv)
}
