use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::VaeModel;
use crate::error::{Error, Result};
use crate::gradcore::{
    kl_gaussian, kl_gaussian_grad, reparameterize, reparameterize_backward, ForwardCache,
    ParamVector, LOGVAR_MAX, LOGVAR_MIN,
};

/// One minibatch in encoded units.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub x: ArrayView2<'a, f64>,
    /// Standardized target.
    pub y: ArrayView1<'a, f64>,
    /// Per-row multipliers of the target term; `None` means all ones.
    pub weights: Option<ArrayView1<'a, f64>>,
    /// Standard normal draws, `b × q`; `None` means `z = μ`.
    pub noise: Option<ArrayView2<'a, f64>>,
}

impl Batch<'_> {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Unscaled loss terms and the weighted total for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub recon_x: f64,
    pub recon_y: f64,
    pub kl: f64,
    pub corr: f64,
    pub total: f64,
}

/// Pearson correlations between the columns of `z` using population
/// moments. Any pair involving a constant column has correlation 0; the
/// diagonal is 1 for non-constant columns.
pub fn correlation_matrix(z: ArrayView2<f64>) -> Array2<f64> {
    let (units, live) = unit_columns(z);
    let q = z.ncols();
    let mut r = units.t().dot(&units);
    for a in 0..q {
        for b in 0..q {
            if !live[a] || !live[b] {
                r[[a, b]] = 0.0;
            }
        }
    }
    r
}

/// `Σ_{a≠b} r_ab²` over ordered pairs of latent columns.
pub fn correlation_penalty(z: ArrayView2<f64>) -> f64 {
    let r = correlation_matrix(z);
    let mut p = 0.0;
    for ((a, b), v) in r.indexed_iter() {
        if a != b {
            p += v * v;
        }
    }
    p
}

/// Gradient of [`correlation_penalty`] with respect to `z`. Zero for constant
/// columns, where the penalty is not differentiable.
pub fn correlation_penalty_grad(z: ArrayView2<f64>) -> Array2<f64> {
    let (units, live) = unit_columns(z);
    let norms = centered_norms(z);
    let r = units.t().dot(&units);
    let q = z.ncols();
    let mut g = Array2::zeros(z.dim());
    for a in 0..q {
        if !live[a] {
            continue;
        }
        let ua = units.column(a);
        let mut acc = Array1::zeros(z.nrows());
        for b in 0..q {
            if b == a || !live[b] {
                continue;
            }
            let rab = r[[a, b]];
            Zip::from(&mut acc)
                .and(units.column(b))
                .and(ua)
                .for_each(|o, &ub, &ua| *o += rab * (ub - rab * ua));
        }
        g.column_mut(a).assign(&(acc * (4.0 / norms[a])));
    }
    g
}

fn centered_norms(z: ArrayView2<f64>) -> Vec<f64> {
    z.columns()
        .into_iter()
        .map(|c| {
            let m = c.mean().unwrap_or(0.0);
            c.iter().map(|v| (v - m).powi(2)).sum::<f64>().sqrt()
        })
        .collect()
}

fn unit_columns(z: ArrayView2<f64>) -> (Array2<f64>, Vec<bool>) {
    let mut u = Array2::zeros(z.dim());
    let mut live = vec![false; z.ncols()];
    let n = z.nrows() as f64;
    for (a, c) in z.columns().into_iter().enumerate() {
        let m = c.mean().unwrap_or(0.0);
        let norm = c.iter().map(|v| (v - m).powi(2)).sum::<f64>().sqrt();
        let scale = c.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if norm > 1e-12 * (1.0 + scale) * n.sqrt() {
            live[a] = true;
            u.column_mut(a).assign(&c.mapv(|v| (v - m) / norm));
        }
    }
    (u, live)
}

struct Forward {
    enc: ForwardCache,
    dec: ForwardCache,
    mu: Array2<f64>,
    logvar_raw: Array2<f64>,
    logvar: Array2<f64>,
    z: Array2<f64>,
    terms: LossTerms,
}

fn check_batch(model: &VaeModel, batch: &Batch) -> Result<()> {
    let b = batch.len();
    if b == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if let Some(w) = batch.weights {
        if w.len() != b {
            return Err(Error::Shape(format!("{} weights for {b} rows", w.len())));
        }
    }
    if let Some(e) = batch.noise {
        if e.dim() != (b, model.latent_dim()) {
            return Err(Error::Shape(format!(
                "noise is {:?}, expected ({b}, {})",
                e.dim(),
                model.latent_dim()
            )));
        }
    }
    let coef = model.train_config.coefficients();
    if coef.beta_corr > 0.0 && b < 2 {
        return Err(Error::InvalidArgument(
            "latent correlations need at least 2 rows per batch".into(),
        ));
    }
    Ok(())
}

fn forward(model: &VaeModel, batch: &Batch) -> Result<Forward> {
    check_batch(model, batch)?;
    let coef = model.train_config.coefficients();
    let b = batch.len() as f64;
    let q = model.latent_dim();
    let d = model.input_dim();

    let enc = model.encoder.forward(model.encoder_input(batch.x, batch.y)?.view())?;
    let head = enc.output();
    let mu = head.slice(s![.., ..q]).to_owned();
    let logvar_raw = head.slice(s![.., q..]).to_owned();
    let logvar = logvar_raw.mapv(|v| v.clamp(LOGVAR_MIN, LOGVAR_MAX));
    let z = match batch.noise {
        Some(e) => reparameterize(mu.view(), logvar.view(), e)?,
        None => mu.clone(),
    };
    let dec = model.decoder.forward(z.view())?;
    let out = dec.output();

    let recon_x = (&out.slice(s![.., ..d]) - &batch.x)
        .mapv(|v| v * v)
        .sum()
        / b;
    let mut recon_y = 0.0;
    for (i, (&yh, &y)) in out.column(d).iter().zip(batch.y).enumerate() {
        let w = batch.weights.map_or(1.0, |w| w[i]);
        recon_y += w * (yh - y).powi(2);
    }
    recon_y /= b;
    let kl = kl_gaussian(mu.view(), logvar.view())?;
    let corr = if batch.len() >= 2 {
        correlation_penalty(z.view())
    } else {
        0.0
    };
    let total = coef.beta_x * recon_x
        + coef.beta_y * recon_y
        + coef.beta_kl * kl
        + coef.beta_corr * corr;
    let terms = LossTerms {
        recon_x,
        recon_y,
        kl,
        corr,
        total,
    };
    if !total.is_finite() {
        return Err(Error::NonFinite(format!("loss {terms:?}")));
    }
    Ok(Forward {
        enc,
        dec,
        mu,
        logvar_raw,
        logvar,
        z,
        terms,
    })
}

/// Loss of `model` on `batch` under its training configuration.
pub fn loss_terms(model: &VaeModel, batch: &Batch) -> Result<LossTerms> {
    Ok(forward(model, batch)?.terms)
}

/// Loss and its gradient with respect to [`VaeModel::params`].
pub fn loss_gradient(model: &VaeModel, batch: &Batch) -> Result<(LossTerms, ParamVector)> {
    let f = forward(model, batch)?;
    let coef = model.train_config.coefficients();
    let b = batch.len() as f64;
    let d = model.input_dim();

    let out = f.dec.output();
    let mut gout = Array2::zeros(out.dim());
    Zip::from(gout.slice_mut(s![.., ..d]))
        .and(out.slice(s![.., ..d]))
        .and(batch.x)
        .for_each(|g, &xh, &x| *g = coef.beta_x * 2.0 * (xh - x) / b);
    for i in 0..batch.len() {
        let w = batch.weights.map_or(1.0, |w| w[i]);
        gout[[i, d]] = coef.beta_y * 2.0 * w * (out[[i, d]] - batch.y[i]) / b;
    }
    let (dec_grads, mut gz) = model.decoder.backward(&f.dec, gout.view())?;
    if coef.beta_corr > 0.0 {
        gz.scaled_add(coef.beta_corr, &correlation_penalty_grad(f.z.view()));
    }

    let (mut gmu, mut glv) = match batch.noise {
        Some(e) => reparameterize_backward(gz.view(), f.logvar.view(), e),
        None => (gz, Array2::zeros(f.mu.dim())),
    };
    if coef.beta_kl > 0.0 {
        let (kmu, klv) = kl_gaussian_grad(f.mu.view(), f.logvar.view());
        gmu.scaled_add(coef.beta_kl, &kmu);
        glv.scaled_add(coef.beta_kl, &klv);
    }
    Zip::from(&mut glv)
        .and(&f.logvar_raw)
        .for_each(|g, &raw| {
            if !(LOGVAR_MIN..=LOGVAR_MAX).contains(&raw) {
                *g = 0.0;
            }
        });
    let ghead = concatenate(Axis(1), &[gmu.view(), glv.view()]).expect("same row count");
    let (enc_grads, _) = model.encoder.backward(&f.enc, ghead.view())?;

    let grad = ParamVector::flatten_grads(enc_grads.iter().chain(&dec_grads));
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("loss gradient".into()));
    }
    Ok((f.terms, grad))
}
