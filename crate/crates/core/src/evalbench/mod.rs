//! Downstream evaluation: two fixed regressors, imbalance-aware metrics, the
//! K-fold ablation benchmark and a paired Wilcoxon signed-rank test.
//!
//! Every fitted quantity in a fold (encoding, target density, relevance
//! weights, generative models, latent bandwidths) is computed from that
//! fold's training rows only. [`FoldFit::fingerprint`] hashes this state so
//! tests can confirm that nothing leaks from the held-out rows.

mod bench;
mod metrics;
mod regress;
mod wilcoxon;

pub use bench::{
    fit_fold, run_benchmark, Aggregate, BenchConfig, BenchReport, BenchVariant, CellResult,
    Comparison, DatasetSummary, FoldFit, MeanSd,
};
pub use metrics::{metrics, MetricSet};
pub use regress::{knn_predict, ridge_fit, FittedRegressor, RegressorKind, RegressorSpec, RidgeModel};
pub use wilcoxon::{average_ranks, wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult, EXACT_MAX};
