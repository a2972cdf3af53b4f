//! The asymptotic side of the tests: the Kolmogorov-Smirnov law of
//! sup|Brownian bridge| for p-values and critical values, the closed-form
//! covariance of the limit process
//!
//!   Z(t) = (1 - t) W1(t) + t (W2(1) - W2(t)),
//!
//! a grid simulator for Z driven by a correlated two-dimensional Brownian
//! motion, and the first-order kernel projections whose long-run variances
//! parametrize everything.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Error;

/// Truncation threshold shared by the series evaluations in this module;
/// far below every Monte Carlo tolerance that consumes them.
const SERIES_EPS: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov law
// ---------------------------------------------------------------------------

/// P(sup_{0<=t<=1} |B(t)| <= x) for a standard Brownian bridge B:
/// 1 - 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 x^2), truncated below 1e-12.
pub fn ks_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut k = 1.0;
    loop {
        let term = (-2.0 * k * k * x * x).exp();
        if term < SERIES_EPS {
            break;
        }
        sum += sign * term;
        sign = -sign;
        k += 1.0;
    }
    // Truncating the alternating series leaves a residue of at most the
    // first omitted term, which doubles through 1 - 2 sum; where the true
    // value is below that resolution the residue would otherwise surface as
    // a non-monotone wiggle of order 1e-12, so collapse the band to 0.
    let value = 1.0 - 2.0 * sum;
    if value <= 2.0 * SERIES_EPS {
        0.0
    } else {
        value.min(1.0)
    }
}

/// Quantile of the same law by bisection on [0, 10] to width 1e-10.
pub fn ks_quantile(p: f64) -> Result<f64, Error> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(Error::ProbabilityOutOfRange { p });
    }
    let (mut lo, mut hi) = (0.0f64, 10.0f64);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if ks_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// limit-process covariance and simulation
// ---------------------------------------------------------------------------

/// Long-run covariance matrix [[s11, s12], [s12, s22]] of the pair of kernel
/// projections (h1(X_0), h2(X_0)); drives the limit process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSpec {
    sigma11: f64,
    sigma12: f64,
    sigma22: f64,
}

impl CovarianceSpec {
    pub fn new(sigma11: f64, sigma12: f64, sigma22: f64) -> Result<Self, Error> {
        let finite = sigma11.is_finite() && sigma12.is_finite() && sigma22.is_finite();
        if !finite || sigma11 < 0.0 || sigma22 < 0.0 {
            return Err(Error::InvalidCovarianceSpec);
        }
        let sigma12_sq = sigma12 * sigma12;
        let product = sigma11 * sigma22;
        if sigma12_sq > product {
            return Err(Error::NotPositiveSemidefinite { sigma12_sq, product });
        }
        Ok(Self {
            sigma11,
            sigma12,
            sigma22,
        })
    }

    pub fn sigma11(&self) -> f64 {
        self.sigma11
    }

    pub fn sigma12(&self) -> f64 {
        self.sigma12
    }

    pub fn sigma22(&self) -> f64 {
        self.sigma22
    }
}

/// Cov(Z(lambda), Z(mu)) in closed form:
///
///   s11 (1-l)(1-m) min(l,m)
/// + s22 l m (1 - max(l,m))
/// + s12 [m (1-l)(l - min(l,m)) + l (1-m)(m - min(l,m))].
pub fn z_covariance(lambda: f64, mu: f64, spec: &CovarianceSpec) -> Result<f64, Error> {
    for t in [lambda, mu] {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange { t });
        }
    }
    let min = lambda.min(mu);
    let max = lambda.max(mu);
    // Grouping the (lambda, mu)-symmetric factors keeps the function exactly
    // symmetric under argument swap despite floating-point non-associativity.
    let term11 = spec.sigma11 * ((1.0 - lambda) * (1.0 - mu)) * min;
    let term22 = spec.sigma22 * (lambda * mu) * (1.0 - max);
    let term12 = spec.sigma12
        * (mu * (1.0 - lambda) * (lambda - min) + lambda * (1.0 - mu) * (mu - min));
    Ok(term11 + term22 + term12)
}

/// A simulated path of Z on a uniform grid over [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct LimitPath {
    grid: Vec<f64>,
    z: Vec<f64>,
}

impl LimitPath {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn z_values(&self) -> &[f64] {
        &self.z
    }
}

/// Simulates Z on `grid_size` uniform points (endpoints included) from the
/// given seed. Increments of (W1, W2) come from the 2x2 Cholesky root of
/// dt * spec applied to independent standard normals.
pub fn simulate_limit_process(
    spec: &CovarianceSpec,
    grid_size: usize,
    seed: u64,
) -> Result<LimitPath, Error> {
    use rand::SeedableRng;
    simulate_limit_process_with(spec, grid_size, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Same, but drawing from a caller-managed generator (for replicate streams).
pub fn simulate_limit_process_with<R: Rng + ?Sized>(
    spec: &CovarianceSpec,
    grid_size: usize,
    rng: &mut R,
) -> Result<LimitPath, Error> {
    if grid_size < 2 {
        return Err(Error::GridTooSmall { got: grid_size });
    }
    let steps = grid_size - 1;
    let dt = 1.0 / steps as f64;

    // Lower-triangular root of dt * [[s11, s12], [s12, s22]]. The clamp on
    // the Schur complement only absorbs roundoff; PSD is checked upstream.
    let a = spec.sigma11 * dt;
    let b = spec.sigma12 * dt;
    let c = spec.sigma22 * dt;
    let l11 = a.sqrt();
    let (l21, l22) = if l11 > 0.0 {
        let l21 = b / l11;
        (l21, (c - l21 * l21).max(0.0).sqrt())
    } else {
        (0.0, c.sqrt())
    };

    let mut w1 = Vec::with_capacity(grid_size);
    let mut w2 = Vec::with_capacity(grid_size);
    w1.push(0.0);
    w2.push(0.0);
    let (mut u1, mut u2) = (0.0f64, 0.0f64);
    for _ in 0..steps {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        u1 += l11 * z1;
        u2 += l21 * z1 + l22 * z2;
        w1.push(u1);
        w2.push(u2);
    }

    let w2_end = w2[steps];
    let mut grid = Vec::with_capacity(grid_size);
    let mut z = Vec::with_capacity(grid_size);
    for i in 0..grid_size {
        let t = i as f64 / steps as f64;
        grid.push(t);
        z.push((1.0 - t) * w1[i] + t * (w2_end - w2[i]));
    }
    Ok(LimitPath { grid, z })
}

/// sup over the grid of |Z|.
pub fn sup_abs(path: &LimitPath) -> f64 {
    path.z.iter().fold(0.0, |m, &v| m.max(v.abs()))
}

// ---------------------------------------------------------------------------
// kernel projections and reference variances
// ---------------------------------------------------------------------------

/// First-order projections of the two kernels against a reference
/// distribution: h1(x) = E h(x, Y), h2(y) = E h(X, y).
///
/// Wilcoxon kernel 1{x < y} - 1/2 gives h1 = 1/2 - F, h2 = F - 1/2;
/// difference kernel y - x gives h1 = mean - x, h2 = x - mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelProjection {
    WilcoxonH1,
    WilcoxonH2,
    GaussH1,
    GaussH2,
}

impl KernelProjection {
    /// Evaluates the projection at `x`. `cdf` and `mean` describe the
    /// reference distribution; each kind uses the one it needs.
    pub fn evaluate<F: Fn(f64) -> f64>(self, x: f64, cdf: F, mean: f64) -> f64 {
        match self {
            KernelProjection::WilcoxonH1 => 0.5 - cdf(x),
            KernelProjection::WilcoxonH2 => cdf(x) - 0.5,
            KernelProjection::GaussH1 => mean - x,
            KernelProjection::GaussH2 => x - mean,
        }
    }
}

/// True long-run variance sigma1^2 of the rank projection for a Gaussian
/// AR(1) with coefficient rho:
///
///   sigma1^2 = 1/12 + sum_{j>=1} asin(rho^j / 2) / pi,
///
/// using Cov(Phi(Z_1), Phi(Z_2)) = asin(r/2) / (2 pi) for standard normals
/// with correlation r. Series truncated below 1e-12.
pub fn wilcoxon_sigma1_true(rho: f64) -> Result<f64, Error> {
    if !rho.is_finite() || rho.abs() >= 1.0 {
        return Err(Error::RhoOutOfRange { rho });
    }
    let mut total = 1.0 / 12.0;
    let mut p = rho;
    loop {
        let term = (p / 2.0).asin() / std::f64::consts::PI;
        if term.abs() < SERIES_EPS {
            break;
        }
        total += term;
        p *= rho;
    }
    Ok(total)
}
