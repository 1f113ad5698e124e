//! Central finite-difference checks of every analytic gradient.

use dsb::density::{relevance_weights, KdeConfig};
use dsb::gradcore::{
    kl_gaussian, kl_gaussian_grad, reparameterize, reparameterize_backward, Activation, Mlp,
    ParamVector,
};
use dsb::irvae::{
    correlation_penalty, correlation_penalty_grad, loss_gradient, loss_terms, ArchitectureSpec,
    Batch, LossVariant, TrainConfig, VaeModel,
};
use dsb::seeds;
use dsb::tabular::{fit_encode, ColumnData, ColumnSpec, Dataset};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Check;

pub const TOLERANCE: f64 = 1e-4;
const STEP: f64 = 1e-6;

/// `‖a − n‖ / max(‖a‖, ‖n‖, 1e-8)`: the norm-wise relative error between an
/// analytic and a numerical gradient.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(analytic).max(norm(numeric)).max(1e-8)
}

fn central<F: FnMut(&[f64]) -> f64>(x: &[f64], mut f: F) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + STEP;
            let up = f(&p);
            p[i] = orig - STEP;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

fn normal(rng: &mut ChaCha8Rng, shape: (usize, usize), scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || {
        let e: f64 = rng.sample(StandardNormal);
        scale * e
    })
}

fn dense_case(rng: &mut ChaCha8Rng) -> f64 {
    let depth = rng.random_range(1..=3);
    let mut sizes = vec![rng.random_range(1..=5)];
    for _ in 0..depth {
        sizes.push(rng.random_range(1..=5));
    }
    let hidden = if rng.random_bool(0.5) {
        Activation::Tanh
    } else {
        Activation::Relu
    };
    let output = if rng.random_bool(0.5) {
        Activation::Identity
    } else {
        Activation::Tanh
    };
    let mut net = Mlp::new(&sizes, hidden, output, rng);
    let b = rng.random_range(1..=6);
    let x = normal(rng, (b, sizes[0]), 1.0);
    let g = normal(rng, (b, *sizes.last().unwrap()), 1.0);
    let loss = |net: &Mlp, x: &Array2<f64>| -> f64 {
        (net.forward(x.view()).unwrap().output() * &g).sum()
    };
    let cache = net.forward(x.view()).unwrap();
    let (grads, gin) = net.backward(&cache, g.view()).unwrap();
    let mut analytic = ParamVector::flatten_grads(&grads).0;
    analytic.extend(gin.iter());

    let p0 = ParamVector::flatten(&net.layers);
    let mut numeric = central(&p0.0, |p| {
        ParamVector(p.to_vec()).unflatten_into(&mut net.layers).unwrap();
        loss(&net, &x)
    });
    p0.unflatten_into(&mut net.layers).unwrap();
    let x0: Vec<f64> = x.iter().copied().collect();
    numeric.extend(central(&x0, |v| {
        let xv = Array2::from_shape_vec(x.dim(), v.to_vec()).unwrap();
        loss(&net, &xv)
    }));
    relative_error(&analytic, &numeric)
}

fn reparam_case(rng: &mut ChaCha8Rng) -> f64 {
    let shape = (rng.random_range(1..=5), rng.random_range(1..=4));
    let mu = normal(rng, shape, 1.0);
    let lv = normal(rng, shape, 1.0);
    let e = normal(rng, shape, 1.0);
    let g = normal(rng, shape, 1.0);
    let (gmu, glv) = reparameterize_backward(g.view(), lv.view(), e.view());
    let mut analytic: Vec<f64> = gmu.iter().copied().collect();
    analytic.extend(glv.iter());
    let packed: Vec<f64> = mu.iter().chain(lv.iter()).copied().collect();
    let k = mu.len();
    let numeric = central(&packed, |p| {
        let m = Array2::from_shape_vec(shape, p[..k].to_vec()).unwrap();
        let l = Array2::from_shape_vec(shape, p[k..].to_vec()).unwrap();
        (reparameterize(m.view(), l.view(), e.view()).unwrap() * &g).sum()
    });
    relative_error(&analytic, &numeric)
}

fn kl_case(rng: &mut ChaCha8Rng) -> f64 {
    let shape = (rng.random_range(1..=5), rng.random_range(1..=4));
    let mu = normal(rng, shape, 1.0);
    let lv = normal(rng, shape, 1.0);
    let (gmu, glv) = kl_gaussian_grad(mu.view(), lv.view());
    let mut analytic: Vec<f64> = gmu.iter().copied().collect();
    analytic.extend(glv.iter());
    let packed: Vec<f64> = mu.iter().chain(lv.iter()).copied().collect();
    let k = mu.len();
    let numeric = central(&packed, |p| {
        let m = Array2::from_shape_vec(shape, p[..k].to_vec()).unwrap();
        let l = Array2::from_shape_vec(shape, p[k..].to_vec()).unwrap();
        kl_gaussian(m.view(), l.view()).unwrap()
    });
    relative_error(&analytic, &numeric)
}

fn corr_case(rng: &mut ChaCha8Rng) -> f64 {
    let shape = (rng.random_range(3..=8), rng.random_range(2..=4));
    let z = normal(rng, shape, 1.0);
    let analytic: Vec<f64> = correlation_penalty_grad(z.view()).iter().copied().collect();
    let z0: Vec<f64> = z.iter().copied().collect();
    let numeric = central(&z0, |p| {
        correlation_penalty(Array2::from_shape_vec(shape, p.to_vec()).unwrap().view())
    });
    relative_error(&analytic, &numeric)
}

/// Which loss terms a whole-model case switches on.
#[derive(Debug, Clone, Copy)]
enum Focus {
    ReconX,
    WeightedY,
    Kl,
    Corr,
    Total,
}

fn toy_data(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Dataset {
    let mut cols = Vec::new();
    let mut data = Vec::new();
    for j in 0..p {
        cols.push(ColumnSpec::numeric(format!("x{j}")));
        data.push(ColumnData::Numeric(
            (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        ));
    }
    cols.push(ColumnSpec::numeric("y"));
    data.push(ColumnData::Numeric(
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal).exp()).collect(),
    ));
    Dataset::new(cols, data, p).unwrap()
}

fn model_case(rng: &mut ChaCha8Rng, focus: Focus) -> f64 {
    let p = rng.random_range(1..=4);
    let b = rng.random_range(3..=7);
    let em = fit_encode(&toy_data(rng, b, p));
    let q = rng.random_range(1..=3);
    let hidden: Vec<usize> = (0..rng.random_range(1..=2))
        .map(|_| rng.random_range(2..=6))
        .collect();
    let arch = ArchitectureSpec {
        input_dim: em.dim(),
        latent_dim: if matches!(focus, Focus::Corr) { q.max(2) } else { q },
        encoder_hidden: hidden.clone(),
        decoder_hidden: hidden,
        activation: Activation::Tanh,
    };
    let mut beta = || rng.random_range(0.5..3.0);
    let (bx, by, bkl, bc) = (beta(), beta(), beta(), beta());
    let (variant, beta_x, beta_y, beta_kl, beta_corr) = match focus {
        Focus::ReconX => (LossVariant::Plain, bx, 0.0, 0.0, 0.0),
        Focus::WeightedY => (LossVariant::Balanced, 0.0, by, 0.0, 0.0),
        Focus::Kl => (LossVariant::Plain, 0.0, 0.0, bkl, 0.0),
        Focus::Corr => (LossVariant::Final, 0.0, 0.0, 0.0, bc),
        Focus::Total => (LossVariant::Final, bx, by, bkl, bc),
    };
    let cfg = TrainConfig {
        beta_x,
        beta_y,
        beta_kl,
        beta_corr,
        loss_variant: variant,
        rng_seed: rng.random(),
        ..TrainConfig::default()
    };
    let mut model = VaeModel::init(arch, cfg, em.encoding.clone()).unwrap();
    let weights = Array1::from(
        relevance_weights(&em.target.to_vec(), 1.0, &KdeConfig::default())
            .unwrap()
            .raw,
    );
    let noise = normal(rng, (b, model.latent_dim()), 1.0);
    let batch = Batch {
        x: em.values.view(),
        y: em.target.view(),
        weights: Some(weights.view()),
        noise: Some(noise.view()),
    };
    let (_, grad) = loss_gradient(&model, &batch).unwrap();
    let p0 = model.params();
    let numeric = central(&p0.0, |v| {
        model.set_params(&ParamVector(v.to_vec())).unwrap();
        loss_terms(&model, &batch).unwrap().total
    });
    relative_error(&grad.0, &numeric)
}

/// Run `per_kind` seeded cases of each of the nine gradient kinds.
pub fn run(per_kind: usize, seed: u64) -> Vec<Check> {
    let kinds: [(&str, Box<dyn Fn(&mut ChaCha8Rng) -> f64>); 9] = [
        ("dense layers", Box::new(dense_case)),
        ("reparameterization", Box::new(reparam_case)),
        ("kl", Box::new(kl_case)),
        ("correlation penalty", Box::new(corr_case)),
        ("loss: feature reconstruction", Box::new(|r| model_case(r, Focus::ReconX))),
        ("loss: weighted target", Box::new(|r| model_case(r, Focus::WeightedY))),
        ("loss: kl", Box::new(|r| model_case(r, Focus::Kl))),
        ("loss: correlation", Box::new(|r| model_case(r, Focus::Corr))),
        ("loss: total", Box::new(|r| model_case(r, Focus::Total))),
    ];
    let mut out = Vec::new();
    for (k, (name, case)) in kinds.iter().enumerate() {
        for i in 0..per_kind {
            let mut rng = seeds::stream(seed, (k * 1000 + i) as u64);
            out.push(Check::new(format!("{name} #{i}"), case(&mut rng), TOLERANCE));
        }
    }
    out
}
