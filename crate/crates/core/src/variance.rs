//! Long-run variance estimation by block subsampling, used to studentize the
//! max statistics under serial dependence.
//!
//! Two estimators, one per kernel:
//!
//! * `sigma2_subsampling` targets sigma_2, the long-run standard deviation of
//!   the partial sums: sigma2^2 = (1/nb) sum_i (1/l) (B_i - (l/n) S_n)^2 over
//!   block sums B_i of length l.
//! * `sigma1_subsampling` targets sigma_1, the same scale for the series
//!   passed through its empirical distribution function: it averages
//!   sqrt(pi/2) |T_i - l Ybar| / sqrt(l) over blocks, where T_i are block
//!   sums of Y_j = F_n(X_j). The sqrt(pi/2) factor converts a mean absolute
//!   deviation into a standard deviation under normality.
//!
//! Blocks are either the floor(n/l) disjoint ones (a partial trailing block
//! is discarded) or all n-l+1 overlapping starts. Block length is fixed or
//! chosen by Carlstein's AR(1)-optimal rule from the lag-1 autocorrelation.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::series::TimeSeries;

/// How the block length is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockLengthRule {
    /// Use the given length as-is.
    Fixed(usize),
    /// Carlstein's rule applied to the estimated lag-1 autocorrelation.
    CarlsteinAdaptive,
}

/// Disjoint blocks or every start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubsamplingScheme {
    Overlapping,
    NonOverlapping,
}

/// A studentization scale plus the block-length bookkeeping behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    /// The scale itself (a standard deviation, not a variance).
    pub sigma_hat: f64,
    pub block_length_used: usize,
    /// Estimated lag-1 autocorrelation; present only in adaptive mode.
    pub rho_hat: Option<f64>,
}

/// Bound used when clamping rho_hat for block-length stability.
const RHO_CLAMP: f64 = 0.999;

/// Sample lag-1 autocorrelation sum (x_i - xbar)(x_{i+1} - xbar) / sum (x_i - xbar)^2,
/// clamped to [-0.999, 0.999].
pub fn lag1_autocorrelation(series: &TimeSeries) -> Result<f64, Error> {
    let x = series.values();
    let n = x.len();
    if n < 3 {
        return Err(Error::SeriesTooShort { got: n, min: 3 });
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|&v| (v - mean) * (v - mean)).sum();
    if denom == 0.0 {
        return Err(Error::ConstantSeries);
    }
    let numer: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    Ok((numer / denom).clamp(-RHO_CLAMP, RHO_CLAMP))
}

/// Carlstein's MSE-optimal block length for an AR(1) with coefficient rho:
/// max(ceil(n^(1/3) (2|rho| / (1 - rho^2))^(2/3)), 1), capped at floor(n/2)
/// so at least two blocks exist.
pub fn carlstein_block_length(n: usize, rho: f64) -> Result<usize, Error> {
    if n < 2 {
        return Err(Error::SeriesTooShort { got: n, min: 2 });
    }
    if !rho.is_finite() || rho.abs() >= 1.0 {
        return Err(Error::RhoOutOfRange { rho });
    }
    let strength = 2.0 * rho.abs() / (1.0 - rho * rho);
    let raw = (n as f64).powf(1.0 / 3.0) * strength.powf(2.0 / 3.0);
    let l = (raw.ceil() as usize).max(1);
    Ok(l.min(n / 2).max(1))
}

/// Resolves a rule to a concrete block length for this series.
fn resolve_block(series: &TimeSeries, rule: BlockLengthRule) -> Result<(usize, Option<f64>), Error> {
    let n = series.len();
    match rule {
        BlockLengthRule::Fixed(l) => {
            if l < 1 || l > n / 2 {
                Err(Error::BlockLengthOutOfRange { l, n, max: n / 2 })
            } else {
                Ok((l, None))
            }
        }
        BlockLengthRule::CarlsteinAdaptive => {
            let rho_hat = lag1_autocorrelation(series)?;
            Ok((carlstein_block_length(n, rho_hat)?, Some(rho_hat)))
        }
    }
}

/// Applies `f` to every block sum of length `l` under the scheme and returns
/// the mean of the results.
fn mean_over_blocks<F: FnMut(f64) -> f64>(
    x: &[f64],
    l: usize,
    scheme: SubsamplingScheme,
    mut f: F,
) -> f64 {
    let n = x.len();
    match scheme {
        SubsamplingScheme::NonOverlapping => {
            let nb = n / l;
            let mut acc = 0.0;
            for b in 0..nb {
                let sum: f64 = x[b * l..(b + 1) * l].iter().sum();
                acc += f(sum);
            }
            acc / nb as f64
        }
        SubsamplingScheme::Overlapping => {
            let starts = n - l + 1;
            let mut window: f64 = x[..l].iter().sum();
            let mut acc = f(window);
            for s in 1..starts {
                window += x[s + l - 1] - x[s - 1];
                acc += f(window);
            }
            acc / starts as f64
        }
    }
}

/// Subsampling estimator of the partial-sum scale sigma_2.
pub fn sigma2_subsampling(
    series: &TimeSeries,
    rule: BlockLengthRule,
    scheme: SubsamplingScheme,
) -> Result<VarianceEstimate, Error> {
    let (l, rho_hat) = resolve_block(series, rule)?;
    let x = series.values();
    let total: f64 = x.iter().sum();
    let target = (l as f64 / x.len() as f64) * total;
    let lf = l as f64;
    let variance = mean_over_blocks(x, l, scheme, |sum| (sum - target) * (sum - target) / lf);
    Ok(VarianceEstimate {
        sigma_hat: variance.sqrt(),
        block_length_used: l,
        rho_hat,
    })
}

/// Subsampling estimator of the rank-statistic scale sigma_1; works on the
/// EDF-transformed series, so it only sees ranks.
pub fn sigma1_subsampling(
    series: &TimeSeries,
    rule: BlockLengthRule,
    scheme: SubsamplingScheme,
) -> Result<VarianceEstimate, Error> {
    let (l, rho_hat) = resolve_block(series, rule)?;
    let y = edf_transform(series);
    let y = y.values();
    let target = l as f64 * (y.iter().sum::<f64>() / y.len() as f64);
    let scale = (std::f64::consts::PI / 2.0).sqrt() / (l as f64).sqrt();
    let sigma_hat = mean_over_blocks(y, l, scheme, |sum| scale * (sum - target).abs());
    Ok(VarianceEstimate {
        sigma_hat,
        block_length_used: l,
        rho_hat,
    })
}

/// Empirical distribution function applied to the series itself:
/// Y_j = (1/n) #{i: X_i <= X_j}, so values lie in {1/n, ..., 1}.
pub fn edf_transform(series: &TimeSeries) -> TimeSeries {
    let x = series.values();
    let n = x.len();
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite by invariant"));
    let values = x
        .iter()
        .map(|&v| sorted.partition_point(|&s| s <= v) as f64 / n as f64)
        .collect();
    TimeSeries::from_validated(values)
}
