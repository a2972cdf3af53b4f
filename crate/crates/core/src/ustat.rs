//! Two-sample U-statistic processes over every split point of a series.
//!
//! For a split k the inner double sum is sum_{i<=k} sum_{j>k} h(X_i, X_j)
//! with one of two kernels:
//!
//! * Wilcoxon: h(x, y) = 1{x < y} - 1/2, a rank-type count robust to
//!   heavy tails;
//! * CUSUM: h(x, y) = x - y, sensitive to mean shifts.
//!
//! `cusum_process` is O(n) through the prefix-sum identity
//! raw[k] = n*S_k - k*S_n. `wilcoxon_process` is O(n log n): it sweeps the
//! split from left to right, keeping the pair count up to date with two
//! binary indexed trees over coordinate-compressed values.
//! `brute_force_process` evaluates the double sums literally and exists only
//! as a test oracle.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::Error;
use crate::fenwick::Fenwick;
use crate::series::TimeSeries;

/// Which kernel drives the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    /// Rank-based kernel 1{x < y} - 1/2.
    #[serde(rename = "t1", alias = "wilcoxon")]
    Wilcoxon,
    /// Difference kernel x - y (classical CUSUM).
    #[serde(rename = "t2", alias = "cusum")]
    Cusum,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::Wilcoxon => write!(f, "t1"),
            Statistic::Cusum => write!(f, "t2"),
        }
    }
}

/// The process values at every split k = 1..n-1.
///
/// `raw` holds the inner double sums, `normalized` the same values divided
/// by n^(3/2). For the Wilcoxon kernel the exact pair counts
/// #{(i, j): i <= k < j, X_i < X_j} are kept alongside so tests can compare
/// in integer arithmetic; raw[k] = count[k] - k(n-k)/2.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessTrace {
    kind: Statistic,
    n: usize,
    raw: Vec<f64>,
    normalized: Vec<f64>,
    counts: Option<Vec<i64>>,
}

impl ProcessTrace {
    fn from_raw(kind: Statistic, n: usize, raw: Vec<f64>, counts: Option<Vec<i64>>) -> Self {
        debug_assert_eq!(raw.len(), n - 1);
        let scale = normalizer(n);
        let normalized = raw.iter().map(|&r| r / scale).collect();
        Self {
            kind,
            n,
            raw,
            normalized,
            counts,
        }
    }

    pub fn kind(&self) -> Statistic {
        self.kind
    }

    /// Length of the source series.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Inner double sums, indexed by k - 1 for k = 1..n-1.
    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// raw / n^(3/2), same indexing.
    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    /// Exact pair counts (Wilcoxon only).
    pub fn pair_counts(&self) -> Option<&[i64]> {
        self.counts.as_deref()
    }
}

/// The n^(3/2) scale of the max statistics.
pub fn normalizer(n: usize) -> f64 {
    let nf = n as f64;
    nf * nf.sqrt()
}

/// Max of |normalized| over all splits, plus the split attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxStatistic {
    /// max_k |raw[k]| / n^(3/2).
    pub value: f64,
    /// Smallest k attaining the max; doubles as the change-location estimate.
    pub argmax_k: usize,
}

// ---------------------------------------------------------------------------
// fast paths
// ---------------------------------------------------------------------------

/// CUSUM process via raw[k] = n*S_k - k*S_n; O(n).
pub fn cusum_process(series: &TimeSeries) -> ProcessTrace {
    let x = series.values();
    let n = x.len();
    let nf = n as f64;
    let total: f64 = x.iter().sum();

    let mut raw = Vec::with_capacity(n - 1);
    let mut prefix = 0.0;
    for (i, &v) in x.iter().take(n - 1).enumerate() {
        prefix += v;
        let k = (i + 1) as f64;
        raw.push(nf * prefix - k * total);
    }
    ProcessTrace::from_raw(Statistic::Cusum, n, raw, None)
}

/// Wilcoxon process; O(n log n) over all splits.
///
/// With c(k) = #{(i, j): i <= k < j, X_i < X_j}, moving the split past
/// X_{k+1} updates
///
///   c(k+1) = c(k) - #{i <= k: X_i < X_{k+1}} + #{j > k+1: X_{k+1} < X_j},
///
/// and both counts are prefix queries against trees holding the left and
/// right halves. Ties use the strict indicator, so tied pairs contribute 0.
pub fn wilcoxon_process(series: &TimeSeries) -> ProcessTrace {
    let x = series.values();
    let n = x.len();

    // Coordinate-compress to ranks; equal values share a rank.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite by invariant"));
    let mut rank = vec![0usize; n];
    let mut distinct = 0usize;
    for (pos, &i) in order.iter().enumerate() {
        if pos > 0 && x[i] > x[order[pos - 1]] {
            distinct += 1;
        }
        rank[i] = distinct;
    }
    distinct += 1;

    let mut left = Fenwick::new(distinct);
    let mut right = Fenwick::new(distinct);
    let mut right_total = 0i64;
    for &r in rank.iter().skip(1) {
        right.add(r, 1);
        right_total += 1;
    }
    left.add(rank[0], 1);

    let mut counts = Vec::with_capacity(n - 1);
    // c(1): first element against everything to its right.
    let mut c = right_total - right.prefix(rank[0] + 1);
    counts.push(c);
    for k in 2..n {
        let r = rank[k - 1]; // 0-based index of the element crossing the split
        right.add(r, -1);
        right_total -= 1;
        c -= left.prefix(r);
        c += right_total - right.prefix(r + 1);
        counts.push(c);
        left.add(r, 1);
    }

    ProcessTrace::from_raw(Statistic::Wilcoxon, n, raw_from_counts(&counts, n), Some(counts))
}

/// raw[k] = count - k(n-k)/2, kept exact by doing the halving last.
fn raw_from_counts(counts: &[i64], n: usize) -> Vec<f64> {
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let k = (i + 1) as i64;
            let pairs = k * (n as i64 - k);
            (2 * c - pairs) as f64 / 2.0
        })
        .collect()
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

/// Upper bound on n for `brute_force_process`; the literal double sums are
/// O(n^3) over all splits.
pub const BRUTE_FORCE_MAX_N: usize = 10_000;

/// Literal per-split evaluation of the double sum. Test oracle only.
pub fn brute_force_process(series: &TimeSeries, kind: Statistic) -> Result<ProcessTrace, Error> {
    let x = series.values();
    let n = x.len();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::BruteForceGuard {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }

    let trace = match kind {
        Statistic::Wilcoxon => {
            let mut counts = Vec::with_capacity(n - 1);
            for k in 1..n {
                let mut c = 0i64;
                for i in 0..k {
                    for j in k..n {
                        if x[i] < x[j] {
                            c += 1;
                        }
                    }
                }
                counts.push(c);
            }
            ProcessTrace::from_raw(kind, n, raw_from_counts(&counts, n), Some(counts))
        }
        Statistic::Cusum => {
            let mut raw = Vec::with_capacity(n - 1);
            for k in 1..n {
                let mut sum = 0.0;
                for i in 0..k {
                    for j in k..n {
                        sum += x[i] - x[j];
                    }
                }
                raw.push(sum);
            }
            ProcessTrace::from_raw(kind, n, raw, None)
        }
    };
    Ok(trace)
}

/// Max-type statistic of a trace: sup over splits of |normalized|, with the
/// smallest maximizing split on ties.
pub fn max_statistic(trace: &ProcessTrace) -> MaxStatistic {
    let mut value = f64::NEG_INFINITY;
    let mut argmax_k = 1;
    for (i, &z) in trace.normalized().iter().enumerate() {
        let a = z.abs();
        if a > value {
            value = a;
            argmax_k = i + 1;
        }
    }
    MaxStatistic { value, argmax_k }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn series(values: &[f64]) -> TimeSeries {
        TimeSeries::new(values.to_vec()).unwrap()
    }

    #[test]
    fn cusum_hand_example() {
        let t = cusum_process(&series(&[0.0, 0.0, 1.0, 1.0]));
        assert_eq!(t.raw(), &[-2.0, -4.0, -2.0]);
        assert_eq!(t.normalized(), &[-0.25, -0.5, -0.25]);
        assert_eq!(t.pair_counts(), None);
    }

    #[test]
    fn cusum_constant_series_is_zero() {
        let t = cusum_process(&series(&[3.5; 6]));
        assert!(t.raw().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn wilcoxon_hand_examples() {
        // Strictly increasing: every pair counts, raw[k] = k(n-k)/2.
        let t = wilcoxon_process(&series(&[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(t.pair_counts(), Some(&[3, 4, 3][..]));
        assert_eq!(t.raw(), &[1.5, 2.0, 1.5]);
        let m = max_statistic(&t);
        assert_eq!(m.value, 0.25);
        assert_eq!(m.argmax_k, 2);

        let t = wilcoxon_process(&series(&[3.0, 1.0, 2.0]));
        assert_eq!(t.raw(), &[-1.0, 0.0]);
        let m = max_statistic(&t);
        assert_abs_diff_eq!(m.value, 1.0 / 3.0f64.powf(1.5), epsilon = 1e-15);
        assert_eq!(m.argmax_k, 1);
    }

    #[test]
    fn wilcoxon_constant_series_counts_no_pairs() {
        // Strict indicator: ties contribute nothing, raw[k] = -k(n-k)/2.
        let n = 7;
        let t = wilcoxon_process(&series(&vec![2.0; n]));
        for (i, &r) in t.raw().iter().enumerate() {
            let k = (i + 1) as f64;
            assert_eq!(r, -k * (n as f64 - k) / 2.0);
        }
        assert_eq!(t.pair_counts().unwrap(), &vec![0i64; n - 1][..]);
    }

    #[test]
    fn max_statistic_prefers_smallest_split_on_ties() {
        // raw = (-1, 1): equal magnitudes, k = 1 wins.
        let t = cusum_process(&series(&[0.0, 1.0, 0.0]));
        assert_eq!(t.raw(), &[-1.0, 1.0]);
        let m = max_statistic(&t);
        assert_eq!(m.argmax_k, 1);
    }

    #[test]
    fn max_statistic_on_constant_cusum() {
        let t = cusum_process(&series(&[1.0, 1.0, 1.0]));
        let m = max_statistic(&t);
        assert_eq!(m.value, 0.0);
        assert_eq!(m.argmax_k, 1);
    }

    #[test]
    fn brute_force_matches_hand_examples() {
        let t = brute_force_process(&series(&[3.0, 1.0, 2.0]), Statistic::Wilcoxon).unwrap();
        assert_eq!(t.raw(), &[-1.0, 0.0]);
        let t = brute_force_process(&series(&[0.0, 0.0, 1.0, 1.0]), Statistic::Cusum).unwrap();
        assert_eq!(t.raw(), &[-2.0, -4.0, -2.0]);
    }

    #[test]
    fn brute_force_guards_against_large_input() {
        let s = series(&vec![0.0; BRUTE_FORCE_MAX_N + 1]);
        assert!(matches!(
            brute_force_process(&s, Statistic::Cusum),
            Err(Error::BruteForceGuard { .. })
        ));
    }

    #[test]
    fn normalized_is_raw_over_n_cubed_half() {
        let t = cusum_process(&series(&[0.4, -1.2, 3.3, 0.0, 2.5]));
        let scale = normalizer(t.n());
        for (r, z) in t.raw().iter().zip(t.normalized()) {
            assert_eq!(*z, r / scale);
        }
    }

    #[test]
    fn minimal_series_has_one_split() {
        let t = wilcoxon_process(&series(&[1.0, 2.0]));
        assert_eq!(t.raw().len(), 1);
        assert_eq!(t.raw(), &[0.5]);
    }
}
