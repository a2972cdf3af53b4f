//! Change-point detection for serially dependent time series.
//!
//! Two max-type statistics test whether a series' distribution jumps at an
//! unknown index: a rank-based one built on Wilcoxon two-sample counts, which
//! stays stable under heavy tails and outliers, and a CUSUM-of-means
//! statistic. Both are studentized by a long-run scale estimated via block
//! subsampling (fixed or adaptively chosen block length), and calibrated
//! against the sup over [0,1] of a Brownian bridge's absolute value, so the
//! tests keep their level under short-range dependence such as AR(1).
//!
//! The crate also ships the surrounding apparatus: an AR(1) generator with
//! Gaussian or scaled t(3) innovations and a single change, a simulator for
//! the bivariate limit process, and a Monte Carlo harness that reproduces
//! size tables and power curves cell by cell with per-replicate RNG streams.
//!
//! ```
//! use cpdetect::{
//!     run_single_test, ChangePointModel, InnovationKind, InnovationModel, Statistic, Variant,
//! };
//!
//! let innovations = InnovationModel::new(InnovationKind::Gaussian).unwrap();
//! let model = ChangePointModel::new(200, 0.4, innovations, 1.5, 100).unwrap();
//! let series = cpdetect::gen_ar1(&model, 7);
//! let result =
//!     run_single_test(&series, Statistic::Wilcoxon, Variant::AdaptiveNol, 9, 0.05).unwrap();
//! println!("p = {:.4} at split {}", result.p_value, result.change_point_estimate);
//! ```

mod error;
mod experiment;
mod fenwick;
mod limit;
mod series;
mod simulate;
mod ustat;
mod variance;

pub use error::Error;
pub use experiment::{
    run_power_experiment, run_single_test, run_size_experiment, write_artifact, Decision,
    ExperimentConfig, PowerCell, PowerCurve, SizeCell, SizeTable, TestResult, Variant,
    DEFAULT_POWER_REPLICATES, DEFAULT_SIZE_REPLICATES,
};
pub use limit::{
    ks_cdf, ks_quantile, simulate_limit_process, simulate_limit_process_with, sup_abs,
    wilcoxon_sigma1_true, z_covariance, CovarianceSpec, KernelProjection, LimitPath,
};
pub use series::TimeSeries;
pub use simulate::{
    gen_ar1, gen_ar1_with, replicate_rng, stream_id, ChangePointModel, InnovationKind,
    InnovationModel, AR1_BURN_IN, MATCHED_PERCENTILE,
};
pub use ustat::{
    brute_force_process, cusum_process, max_statistic, normalizer, wilcoxon_process, MaxStatistic,
    ProcessTrace, Statistic, BRUTE_FORCE_MAX_N,
};
pub use variance::{
    carlstein_block_length, edf_transform, lag1_autocorrelation, sigma1_subsampling,
    sigma2_subsampling, BlockLengthRule, SubsamplingScheme, VarianceEstimate,
};
