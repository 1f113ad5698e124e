use std::fmt;
use std::str::FromStr;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{metrics, MetricSet};
use super::regress::{FittedRegressor, RegressorSpec};
use super::wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};
use crate::density::{quantile, scott_bandwidth, relevance_weights, RelevanceWeights, TargetDensity};
use crate::error::{Error, Result};
use crate::gradcore::encode_params_le;
use crate::irvae::{train, ArchitectureConfig, LossVariant, TrainConfig, VaeModel};
use crate::latentgen::{build_training_set, generate, GenConfig, GenVariant};
use crate::seed_path;
use crate::tabular::{apply_encode, fit_encode, kfold, Dataset, EncodedMatrix};

/// A row of the ablation table: the unaugmented training set or one
/// generation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BenchVariant {
    Baseline,
    Generated(GenVariant),
}

impl BenchVariant {
    pub const ALL: [BenchVariant; 8] = [
        BenchVariant::Baseline,
        BenchVariant::Generated(GenVariant::Os),
        BenchVariant::Generated(GenVariant::SbAe),
        BenchVariant::Generated(GenVariant::Bvae),
        BenchVariant::Generated(GenVariant::KBvae),
        BenchVariant::Generated(GenVariant::BvaeW),
        BenchVariant::Generated(GenVariant::KBvaeW),
        BenchVariant::Generated(GenVariant::Dsb),
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchVariant::Baseline => "Baseline",
            BenchVariant::Generated(g) => g.name(),
        }
    }
}

impl fmt::Display for BenchVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "Baseline" {
            Ok(BenchVariant::Baseline)
        } else {
            s.parse().map(BenchVariant::Generated)
        }
    }
}

impl TryFrom<String> for BenchVariant {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BenchVariant> for String {
    fn from(v: BenchVariant) -> String {
        v.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub folds: usize,
    pub variants: Vec<BenchVariant>,
    pub regressors: Vec<RegressorSpec>,
    /// Training-target quantile above which test rows count as rare.
    pub rare_quantile: f64,
    /// Its `rng_seed` is replaced by a per-fold, per-model derived seed.
    pub train: TrainConfig,
    pub arch: ArchitectureConfig,
    pub hmult: f64,
    /// Synthetic rows per fold; defaults to the training size.
    pub m: Option<usize>,
    pub rng_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            folds: 10,
            variants: BenchVariant::ALL.to_vec(),
            regressors: RegressorSpec::defaults(),
            rare_quantile: 0.9,
            train: TrainConfig::default(),
            arch: ArchitectureConfig::default(),
            hmult: 1.0,
            m: None,
            rng_seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidArgument(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.variants.is_empty() || self.regressors.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one variant and one regressor are required".into(),
            ));
        }
        let mut seen = self.variants.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.variants.len() {
            return Err(Error::InvalidArgument("variants are listed twice".into()));
        }
        if !(self.rare_quantile > 0.0 && self.rare_quantile < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rare_quantile must lie in (0, 1), got {}",
                self.rare_quantile
            )));
        }
        for r in &self.regressors {
            r.validate()?;
        }
        self.train.validate()?;
        GenConfig {
            m: self.m,
            hmult: self.hmult,
            ..GenConfig::new(GenVariant::Dsb)
        }
        .validate()
    }

    /// Loss variants that some requested generation variant depends on.
    pub fn required_models(&self) -> Vec<LossVariant> {
        let mut out: Vec<LossVariant> = self
            .variants
            .iter()
            .filter_map(|v| match v {
                BenchVariant::Generated(g) => g.required_model(),
                BenchVariant::Baseline => None,
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    fn model_config(&self, fold: usize, lv: LossVariant) -> TrainConfig {
        TrainConfig {
            rng_seed: seed_path!(self.rng_seed, "train", fold, lv.name()),
            ..self.train.clone().with_variant(lv)
        }
    }
}

/// Everything fitted on one fold's training rows.
#[derive(Debug, Clone)]
pub struct FoldFit {
    pub fold: usize,
    pub train: Dataset,
    pub encoded: EncodedMatrix,
    /// Relevance weights of the training rows on the standardized target.
    pub weights: RelevanceWeights,
    pub models: Vec<(LossVariant, std::result::Result<VaeModel, String>)>,
}

impl FoldFit {
    fn model(&self, lv: LossVariant) -> std::result::Result<&VaeModel, String> {
        match self.models.iter().find(|(v, _)| *v == lv) {
            Some((_, Ok(m))) => Ok(m),
            Some((_, Err(e))) => Err(format!("{} model failed: {e}", lv.name())),
            None => Err(format!("no {} model was trained", lv.name())),
        }
    }

    /// SHA-256 over the fitted encoding, relevance weights, model parameters
    /// and latent bandwidths, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.encoded.encoding).expect("encoding serializes"));
        h.update(self.weights.bandwidth.to_le_bytes());
        h.update(encode_params_le(&self.weights.raw));
        for (lv, m) in &self.models {
            h.update(lv.name().as_bytes());
            match m {
                Ok(model) => {
                    h.update(encode_params_le(&model.params()));
                    let bw = model
                        .encode_latent(self.encoded.values.view(), self.encoded.target.view())
                        .and_then(|lat| scott_bandwidth(lat.mu.view()));
                    if let Ok(bw) = bw {
                        h.update(encode_params_le(&bw.per_dim));
                    }
                }
                Err(e) => h.update(e.as_bytes()),
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn prepare(train: &Dataset, cfg: &BenchConfig) -> Result<(EncodedMatrix, RelevanceWeights)> {
    let encoded = fit_encode(train);
    let weights = relevance_weights(&encoded.target.to_vec(), cfg.train.alpha, &cfg.train.kde)?;
    Ok((encoded, weights))
}

fn train_model(
    encoded: &EncodedMatrix,
    fold: usize,
    lv: LossVariant,
    cfg: &BenchConfig,
) -> std::result::Result<VaeModel, String> {
    let arch = cfg.arch.resolve(encoded.dim());
    train(encoded, arch, cfg.model_config(fold, lv))
        .map(|o| o.model)
        .map_err(|e| e.to_string())
}

/// Fit fold `fold`'s state from its training rows alone.
pub fn fit_fold(train: &Dataset, fold: usize, cfg: &BenchConfig) -> Result<FoldFit> {
    let (encoded, weights) = prepare(train, cfg)?;
    let models = cfg
        .required_models()
        .into_iter()
        .map(|lv| (lv, train_model(&encoded, fold, lv, cfg)))
        .collect();
    Ok(FoldFit {
        fold,
        train: train.clone(),
        encoded,
        weights,
        models,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub fold: usize,
    pub variant: BenchVariant,
    pub regressor: String,
    pub n_train: usize,
    pub n_synthetic: usize,
    pub metrics: Option<MetricSet>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; `None` with fewer than two values.
    pub sd: Option<f64>,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.len() > 1).then(|| {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        });
        Some(MeanSd { mean, sd })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub variant: BenchVariant,
    pub regressor: String,
    pub n_ok: usize,
    pub rmse: Option<MeanSd>,
    pub mae: Option<MeanSd>,
    pub weighted_mse: Option<MeanSd>,
    pub r2: Option<MeanSd>,
    pub rare_region_rmse: Option<MeanSd>,
}

/// Paired test of one variant against Baseline over folds where both
/// cells succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub variant: BenchVariant,
    pub reference: BenchVariant,
    pub regressor: String,
    pub metric: String,
    /// Folds where the variant's metric is strictly below the reference's.
    pub wins: usize,
    pub n_pairs: usize,
    pub test: Option<WilcoxonResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub p: usize,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub dataset: DatasetSummary,
    pub fold_sizes: Vec<usize>,
    /// [`FoldFit::fingerprint`] per fold; `None` if the fold failed to fit.
    pub fold_fingerprints: Vec<Option<String>>,
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<Aggregate>,
    pub comparisons: Vec<Comparison>,
    pub failed_cells: usize,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    fold: usize,
    variant: &'a str,
    regressor: &'a str,
    n_train: usize,
    n_synthetic: usize,
    rmse: Option<f64>,
    mae: Option<f64>,
    weighted_mse: Option<f64>,
    r2: Option<f64>,
    rare_region_rmse: Option<f64>,
    rare_count: Option<usize>,
    error: Option<&'a str>,
}

impl BenchReport {
    pub fn cell(&self, fold: usize, variant: BenchVariant, regressor: &str) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.fold == fold && c.variant == variant && c.regressor == regressor)
    }

    pub fn aggregate(&self, variant: BenchVariant, regressor: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.variant == variant && a.regressor == regressor)
    }

    pub fn comparison(
        &self,
        variant: BenchVariant,
        regressor: &str,
        metric: &str,
    ) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.variant == variant && c.regressor == regressor && c.metric == metric)
    }

    /// One row per cell.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for c in &self.cells {
            let m = c.metrics.as_ref();
            out.serialize(CsvRow {
                fold: c.fold,
                variant: c.variant.name(),
                regressor: &c.regressor,
                n_train: c.n_train,
                n_synthetic: c.n_synthetic,
                rmse: m.map(|m| m.rmse),
                mae: m.map(|m| m.mae),
                weighted_mse: m.map(|m| m.weighted_mse),
                r2: m.and_then(|m| m.r2),
                rare_region_rmse: m.and_then(|m| m.rare_region_rmse),
                rare_count: m.map(|m| m.rare_count),
                error: c.error.as_deref(),
            })?;
        }
        out.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

struct FoldData {
    train: Dataset,
    test: Dataset,
}

fn evaluate_cell(
    fit: &FoldFit,
    test: &Dataset,
    variant: BenchVariant,
    cfg: &BenchConfig,
) -> Vec<CellResult> {
    let base = |n_train, n_synthetic, regressor: &str| CellResult {
        fold: fit.fold,
        variant,
        regressor: regressor.to_string(),
        n_train,
        n_synthetic,
        metrics: None,
        error: None,
    };
    let augmented = match variant {
        BenchVariant::Baseline => Ok(fit.train.clone()),
        BenchVariant::Generated(g) => {
            let model = match g.required_model() {
                Some(lv) => fit.model(lv).map(Some),
                None => Ok(None),
            };
            model.and_then(|model| {
                let gc = GenConfig {
                    m: cfg.m,
                    hmult: cfg.hmult,
                    rng_seed: seed_path!(cfg.rng_seed, "generate", fit.fold),
                    ..GenConfig::new(g)
                };
                generate(model, &fit.train, &fit.weights, &gc)
                    .and_then(|s| build_training_set(&fit.train, &s))
                    .map_err(|e| e.to_string())
            })
        }
    };
    let n_train = fit.train.n();
    let augmented = match augmented {
        Ok(a) => a,
        Err(e) => {
            return cfg
                .regressors
                .iter()
                .map(|r| CellResult {
                    error: Some(e.clone()),
                    ..base(n_train, 0, r.name())
                })
                .collect()
        }
    };
    let n_synthetic = augmented.n() - n_train;
    let scored = score_all(fit, test, &augmented, cfg);
    cfg.regressors
        .iter()
        .zip(scored)
        .map(|(r, res)| {
            let mut cell = base(n_train, n_synthetic, r.name());
            match res {
                Ok(m) => cell.metrics = Some(m),
                Err(e) => cell.error = Some(e.to_string()),
            }
            cell
        })
        .collect()
}

fn score_all(
    fit: &FoldFit,
    test: &Dataset,
    augmented: &Dataset,
    cfg: &BenchConfig,
) -> Vec<Result<MetricSet>> {
    let prep = || -> Result<_> {
        let enc = &fit.encoded.encoding;
        let train_x = apply_encode(enc, augmented)?.values;
        let train_y = Array1::from(augmented.target_values());
        let test_x = apply_encode(enc, test)?.values;
        let test_y = test.target_values();
        let std = &enc.target_standardization;
        let test_std: Vec<f64> = test_y.iter().map(|&v| std.apply(v)).collect();
        let density = TargetDensity::fit(&fit.encoded.target.to_vec(), &cfg.train.kde)?;
        let w = density.weights_at(&test_std, cfg.train.alpha)?.normalized;
        let threshold = quantile(&fit.train.target_values(), cfg.rare_quantile);
        Ok((train_x, train_y, test_x, test_y, w, threshold))
    };
    match prep() {
        Err(e) => {
            let msg = e.to_string();
            cfg.regressors
                .iter()
                .map(|_| Err(Error::InvalidArgument(msg.clone())))
                .collect()
        }
        Ok((tx, ty, qx, qy, w, threshold)) => cfg
            .regressors
            .iter()
            .map(|spec| {
                let model = FittedRegressor::fit(spec, tx.view(), ty.view())?;
                let pred = model.predict(qx.view())?;
                metrics(&qy, pred.as_slice().expect("contiguous"), &w, threshold)
            })
            .collect(),
    }
}

/// K-fold ablation benchmark. Work runs on the current rayon pool; results
/// do not depend on the number of threads. Per-cell failures are recorded in
/// the report; only an invalid configuration is an error.
pub fn run_benchmark(ds: &Dataset, cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let plan = kfold(ds.n(), cfg.folds, seed_path!(cfg.rng_seed, "folds"))?;
    let folds: Vec<FoldData> = (0..cfg.folds)
        .map(|f| {
            let (tr, te) = plan.split(f);
            FoldData {
                train: ds.select(&tr),
                test: ds.select(&te),
            }
        })
        .collect();

    let prepared: Vec<Result<(EncodedMatrix, RelevanceWeights)>> =
        folds.par_iter().map(|fd| prepare(&fd.train, cfg)).collect();

    let required = cfg.required_models();
    let jobs: Vec<(usize, LossVariant)> = (0..cfg.folds)
        .flat_map(|f| required.iter().map(move |&lv| (f, lv)))
        .filter(|(f, _)| prepared[*f].is_ok())
        .collect();
    let trained: Vec<std::result::Result<VaeModel, String>> = jobs
        .par_iter()
        .map(|&(f, lv)| {
            let (enc, _) = prepared[f].as_ref().expect("filtered");
            train_model(enc, f, lv, cfg)
        })
        .collect();
    let mut trained = jobs.into_iter().zip(trained);

    let mut fits: Vec<std::result::Result<FoldFit, String>> = Vec::with_capacity(cfg.folds);
    for (f, (fd, prep)) in folds.iter().zip(prepared).enumerate() {
        fits.push(match prep {
            Ok((encoded, weights)) => {
                let models = required
                    .iter()
                    .map(|_| {
                        let ((_, lv), m) = trained.next().expect("one model per job");
                        (lv, m)
                    })
                    .collect();
                Ok(FoldFit {
                    fold: f,
                    train: fd.train.clone(),
                    encoded,
                    weights,
                    models,
                })
            }
            Err(e) => Err(e.to_string()),
        });
    }

    let cell_jobs: Vec<(usize, BenchVariant)> = (0..cfg.folds)
        .flat_map(|f| cfg.variants.iter().map(move |&v| (f, v)))
        .collect();
    let cells: Vec<CellResult> = cell_jobs
        .par_iter()
        .map(|&(f, v)| match &fits[f] {
            Ok(fit) => evaluate_cell(fit, &folds[f].test, v, cfg),
            Err(e) => cfg
                .regressors
                .iter()
                .map(|r| CellResult {
                    fold: f,
                    variant: v,
                    regressor: r.name().to_string(),
                    n_train: folds[f].train.n(),
                    n_synthetic: 0,
                    metrics: None,
                    error: Some(format!("fold setup failed: {e}")),
                })
                .collect(),
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let fold_fingerprints = fits
        .par_iter()
        .map(|f| f.as_ref().ok().map(FoldFit::fingerprint))
        .collect();
    let aggregates = aggregate(&cells, cfg);
    let comparisons = compare(&cells, cfg);
    let failed_cells = cells.iter().filter(|c| c.metrics.is_none()).count();
    let target = ds.columns()[ds.target_index()].name.clone();
    Ok(BenchReport {
        config: cfg.clone(),
        dataset: DatasetSummary {
            n: ds.n(),
            p: ds.p(),
            target,
        },
        fold_sizes: plan.fold_sizes(),
        fold_fingerprints,
        cells,
        aggregates,
        comparisons,
        failed_cells,
    })
}

fn aggregate(cells: &[CellResult], cfg: &BenchConfig) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &v in &cfg.variants {
        for r in &cfg.regressors {
            let ok: Vec<&MetricSet> = cells
                .iter()
                .filter(|c| c.variant == v && c.regressor == r.name())
                .filter_map(|c| c.metrics.as_ref())
                .collect();
            let collect = |f: &dyn Fn(&MetricSet) -> Option<f64>| {
                MeanSd::of(&ok.iter().filter_map(|m| f(m)).collect::<Vec<_>>())
            };
            out.push(Aggregate {
                variant: v,
                regressor: r.name().to_string(),
                n_ok: ok.len(),
                rmse: collect(&|m| Some(m.rmse)),
                mae: collect(&|m| Some(m.mae)),
                weighted_mse: collect(&|m| Some(m.weighted_mse)),
                r2: collect(&|m| m.r2),
                rare_region_rmse: collect(&|m| m.rare_region_rmse),
            });
        }
    }
    out
}

fn compare(cells: &[CellResult], cfg: &BenchConfig) -> Vec<Comparison> {
    let reference = BenchVariant::Baseline;
    if !cfg.variants.contains(&reference) {
        return Vec::new();
    }
    let metric_of = |c: &CellResult, metric: &str| -> Option<f64> {
        let m = c.metrics.as_ref()?;
        match metric {
            "rmse" => Some(m.rmse),
            _ => m.rare_region_rmse,
        }
    };
    let mut out = Vec::new();
    for &v in cfg.variants.iter().filter(|&&v| v != reference) {
        for r in &cfg.regressors {
            for metric in ["rmse", "rare_region_rmse"] {
                let mut a = Vec::new();
                let mut b = Vec::new();
                for f in 0..cfg.folds {
                    let find = |var: BenchVariant| {
                        cells
                            .iter()
                            .find(|c| c.fold == f && c.variant == var && c.regressor == r.name())
                            .and_then(|c| metric_of(c, metric))
                    };
                    if let (Some(x), Some(y)) = (find(v), find(reference)) {
                        a.push(x);
                        b.push(y);
                    }
                }
                let wins = a.iter().zip(&b).filter(|(x, y)| x < y).count();
                out.push(Comparison {
                    variant: v,
                    reference,
                    regressor: r.name().to_string(),
                    metric: metric.to_string(),
                    wins,
                    n_pairs: a.len(),
                    test: wilcoxon_signed_rank(&a, &b).ok(),
                });
            }
        }
    }
    out
}
