//! Single-test driver and the Monte Carlo harness: empirical size tables and
//! power curves over a factorial grid of (rho, innovation, statistic,
//! variant[, mu]) cells, each cell fed by its own deterministic RNG stream so
//! results are reproducible bit-for-bit and independent of scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::fmt;
use std::path::Path;

use crate::error::Error;
use crate::limit::{ks_cdf, ks_quantile};
use crate::series::TimeSeries;
use crate::simulate::{
    gen_ar1_with, replicate_rng, stream_id, ChangePointModel, InnovationKind, InnovationModel,
};
use crate::ustat::{cusum_process, max_statistic, wilcoxon_process, Statistic};
use crate::variance::{
    edf_transform, sigma1_subsampling, sigma2_subsampling, BlockLengthRule, SubsamplingScheme,
};

// ---------------------------------------------------------------------------
// single test
// ---------------------------------------------------------------------------

/// Studentization variant, named as in the size-table columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Independence-theory scale, no serial-correlation adjustment.
    Unadjusted,
    /// Subsampling with a fixed block length, overlapping blocks.
    FixedOl,
    /// Subsampling with a fixed block length, disjoint blocks.
    FixedNol,
    /// Subsampling with Carlstein's adaptive block length, overlapping.
    AdaptiveOl,
    /// Subsampling with Carlstein's adaptive block length, disjoint.
    AdaptiveNol,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Unadjusted,
        Variant::FixedOl,
        Variant::FixedNol,
        Variant::AdaptiveOl,
        Variant::AdaptiveNol,
    ];

    /// The subsampling setup this variant asks for; None for unadjusted.
    pub fn studentization(self, fixed_l: usize) -> Option<(BlockLengthRule, SubsamplingScheme)> {
        match self {
            Variant::Unadjusted => None,
            Variant::FixedOl => Some((BlockLengthRule::Fixed(fixed_l), SubsamplingScheme::Overlapping)),
            Variant::FixedNol => {
                Some((BlockLengthRule::Fixed(fixed_l), SubsamplingScheme::NonOverlapping))
            }
            Variant::AdaptiveOl => {
                Some((BlockLengthRule::CarlsteinAdaptive, SubsamplingScheme::Overlapping))
            }
            Variant::AdaptiveNol => {
                Some((BlockLengthRule::CarlsteinAdaptive, SubsamplingScheme::NonOverlapping))
            }
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let token = match self {
            Variant::Unadjusted => "unadjusted",
            Variant::FixedOl => "fixed_ol",
            Variant::FixedNol => "fixed_nol",
            Variant::AdaptiveOl => "adaptive_ol",
            Variant::AdaptiveNol => "adaptive_nol",
        };
        write!(f, "{token}")
    }
}

/// Outcome of a level-alpha test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    Accept,
}

/// Everything one test run reports.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    /// The max statistic (already divided by n^(3/2)).
    pub statistic: f64,
    /// Studentization scale actually used.
    pub sigma_hat: f64,
    /// statistic / sigma_hat, compared against the sup|bridge| law.
    pub normalized: f64,
    /// 1 - ks_cdf(normalized).
    pub p_value: f64,
    /// Split attaining the max; the change-location estimate.
    pub change_point_estimate: usize,
    /// Block length used by subsampling variants; absent for unadjusted.
    pub block_length_used: Option<usize>,
    /// Estimated lag-1 autocorrelation; present only for adaptive variants.
    /// Not part of the stable JSON schema, hence skipped on serialization.
    #[serde(skip)]
    pub rho_hat: Option<f64>,
    pub decision: Decision,
}

/// Runs one test at level `alpha`. `fixed_l` is consulted only by the fixed
/// block-length variants. Rejects when the studentized statistic exceeds the
/// 1-alpha quantile of the sup|bridge| law.
pub fn run_single_test(
    series: &TimeSeries,
    statistic: Statistic,
    variant: Variant,
    fixed_l: usize,
    alpha: f64,
) -> Result<TestResult, Error> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::ProbabilityOutOfRange { p: alpha });
    }
    let trace = match statistic {
        Statistic::Wilcoxon => wilcoxon_process(series),
        Statistic::Cusum => cusum_process(series),
    };
    let max = max_statistic(&trace);

    let (sigma_hat, block_length_used, rho_hat) = match variant.studentization(fixed_l) {
        None => (unadjusted_scale(statistic, series), None, None),
        Some((rule, scheme)) => {
            let est = match statistic {
                Statistic::Wilcoxon => sigma1_subsampling(series, rule, scheme)?,
                Statistic::Cusum => sigma2_subsampling(series, rule, scheme)?,
            };
            (est.sigma_hat, Some(est.block_length_used), est.rho_hat)
        }
    };
    if sigma_hat <= 0.0 {
        return Err(Error::DegenerateVariance);
    }

    let normalized = max.value / sigma_hat;
    let p_value = 1.0 - ks_cdf(normalized);
    let critical = ks_quantile(1.0 - alpha)?;
    let decision = if normalized > critical {
        Decision::Reject
    } else {
        Decision::Accept
    };
    Ok(TestResult {
        statistic: max.value,
        sigma_hat,
        normalized,
        p_value,
        change_point_estimate: max.argmax_k,
        block_length_used,
        rho_hat,
        decision,
    })
}

/// The scale a test developed for independent data would use: for the rank
/// statistic the standard deviation of the EDF values (the tie-free closed
/// form is sqrt((n^2 - 1) / (12 n^2))), for CUSUM the sample standard
/// deviation.
fn unadjusted_scale(statistic: Statistic, series: &TimeSeries) -> f64 {
    match statistic {
        Statistic::Wilcoxon => {
            let y = edf_transform(series);
            let y = y.values();
            let n = y.len() as f64;
            let mean = y.iter().sum::<f64>() / n;
            (y.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
        }
        Statistic::Cusum => {
            let x = series.values();
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            (x.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        }
    }
}

// ---------------------------------------------------------------------------
// experiment configuration
// ---------------------------------------------------------------------------

pub const DEFAULT_SIZE_REPLICATES: usize = 4000;
pub const DEFAULT_POWER_REPLICATES: usize = 400;

/// Full description of a factorial Monte Carlo experiment. Deserializable
/// from JSON; every missing field takes the reference protocol's default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Series length.
    pub n: usize,
    /// AR coefficients to sweep.
    pub rhos: Vec<f64>,
    /// Innovation families to sweep.
    pub innovations: Vec<InnovationKind>,
    /// Statistics to sweep.
    pub statistics: Vec<Statistic>,
    /// Studentization variants to sweep.
    pub variants: Vec<Variant>,
    /// Block length for the fixed variants.
    pub fixed_l: usize,
    /// Test level.
    pub alpha: f64,
    /// Replicates per cell; None picks 4000 for size runs, 400 for power.
    pub replicates: Option<usize>,
    /// Shift heights for power runs.
    pub mu_grid: Vec<f64>,
    /// Change index for power runs; None picks n / 2.
    pub tau: Option<usize>,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 200,
            rhos: vec![0.0, 0.4, 0.8],
            innovations: vec![InnovationKind::Gaussian, InnovationKind::ScaledT { nu: 3 }],
            statistics: vec![Statistic::Wilcoxon, Statistic::Cusum],
            variants: Variant::ALL.to_vec(),
            fixed_l: 9,
            alpha: 0.05,
            replicates: None,
            mu_grid: (0..=8).map(|i| i as f64 * 0.25).collect(),
            tau: None,
            master_seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Field-by-field validation; the error message names every offender.
    pub fn validate(&self) -> Result<(), Error> {
        let mut problems = Vec::new();
        if self.n < TimeSeries::MIN_LEN {
            problems.push(format!("n: must be at least {}, got {}", TimeSeries::MIN_LEN, self.n));
        }
        if self.rhos.is_empty() {
            problems.push("rhos: must not be empty".into());
        }
        for (i, &rho) in self.rhos.iter().enumerate() {
            if !rho.is_finite() || rho.abs() >= 1.0 {
                problems.push(format!("rhos[{i}]: {rho} outside (-1, 1)"));
            }
        }
        if has_duplicates(&self.rhos.iter().map(|r| r.to_bits()).collect::<Vec<_>>()) {
            problems.push("rhos: duplicate values".into());
        }
        if self.innovations.is_empty() {
            problems.push("innovations: must not be empty".into());
        }
        for (i, &kind) in self.innovations.iter().enumerate() {
            if let Err(e) = InnovationModel::new(kind) {
                problems.push(format!("innovations[{i}]: {e}"));
            }
        }
        if has_duplicates(&self.innovations) {
            problems.push("innovations: duplicate values".into());
        }
        if self.statistics.is_empty() {
            problems.push("statistics: must not be empty".into());
        }
        if has_duplicates(&self.statistics) {
            problems.push("statistics: duplicate values".into());
        }
        if self.variants.is_empty() {
            problems.push("variants: must not be empty".into());
        }
        if has_duplicates(&self.variants) {
            problems.push("variants: duplicate values".into());
        }
        let needs_fixed = self
            .variants
            .iter()
            .any(|v| matches!(v, Variant::FixedOl | Variant::FixedNol));
        if self.fixed_l < 1 {
            problems.push(format!("fixed_l: must be at least 1, got {}", self.fixed_l));
        } else if needs_fixed && self.fixed_l > self.n / 2 {
            problems.push(format!(
                "fixed_l: {} exceeds n/2 = {} required by the fixed variants",
                self.fixed_l,
                self.n / 2
            ));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha >= 1.0 {
            problems.push(format!("alpha: {} outside (0, 1)", self.alpha));
        }
        if let Some(r) = self.replicates {
            if r < 1 {
                problems.push(format!("replicates: must be at least 1, got {r}"));
            }
        }
        if self.mu_grid.is_empty() {
            problems.push("mu_grid: must not be empty".into());
        }
        if self.mu_grid.iter().any(|m| !m.is_finite()) {
            problems.push("mu_grid: all values must be finite".into());
        } else if self.mu_grid.windows(2).any(|w| w[0] >= w[1]) {
            problems.push("mu_grid: must be strictly increasing".into());
        }
        if let Some(tau) = self.tau {
            if tau > self.n {
                problems.push(format!("tau: {tau} beyond series length {}", self.n));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    pub fn resolved_tau(&self) -> usize {
        self.tau.unwrap_or(self.n / 2)
    }

    pub fn resolved_replicates(&self, default: usize) -> usize {
        self.replicates.unwrap_or(default)
    }
}

fn has_duplicates<T: PartialEq>(items: &[T]) -> bool {
    for (i, a) in items.iter().enumerate() {
        if items[i + 1..].contains(a) {
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// result tables
// ---------------------------------------------------------------------------

/// One size-table cell: rejection fraction under H0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeCell {
    pub rho: f64,
    pub innovation: InnovationKind,
    pub statistic: Statistic,
    pub variant: Variant,
    /// Rejection fraction over the successful replicates.
    pub value: f64,
    /// Binomial standard error sqrt(value (1 - value) / replicates).
    pub se: f64,
    /// Successful replicates (the denominator of `value`).
    pub replicates: usize,
    /// Replicates that errored (degenerate variance and the like).
    pub failures: usize,
}

/// One power-curve cell: rejection fraction under a shift of height mu.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub rho: f64,
    pub innovation: InnovationKind,
    pub statistic: Statistic,
    pub variant: Variant,
    pub mu: f64,
    pub value: f64,
    pub se: f64,
    pub replicates: usize,
    pub failures: usize,
}

/// Empirical sizes for every configured cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeTable {
    pub config: ExperimentConfig,
    pub cells: Vec<SizeCell>,
}

/// Empirical power for every configured cell and shift height.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    pub config: ExperimentConfig,
    pub cells: Vec<PowerCell>,
}

// ---------------------------------------------------------------------------
// the harness
// ---------------------------------------------------------------------------

const SIZE_PHASE: u64 = 1;
const POWER_PHASE: u64 = 2;

#[derive(Clone, Copy, Default)]
struct Counts {
    rejects: usize,
    successes: usize,
    failures: usize,
}

impl Counts {
    fn value(&self) -> f64 {
        if self.successes == 0 {
            0.0
        } else {
            self.rejects as f64 / self.successes as f64
        }
    }

    fn se(&self) -> f64 {
        if self.successes == 0 {
            0.0
        } else {
            let p = self.value();
            (p * (1.0 - p) / self.successes as f64).sqrt()
        }
    }
}

/// Runs every (statistic, variant) combo on `replicates` fresh series drawn
/// from one model. All combos see the same data, mirroring how the size
/// table evaluates all tests on common replications. The stream id depends
/// only on the cell key and replicate index, never on enumeration order, so
/// adding or removing other cells cannot change these draws.
#[allow(clippy::too_many_arguments)]
fn run_group(
    config: &ExperimentConfig,
    phase: u64,
    rho: f64,
    innovation: InnovationKind,
    mu: f64,
    tau: usize,
    combos: &[(Statistic, Variant)],
    replicates: usize,
) -> Result<Vec<Counts>, Error> {
    let model = ChangePointModel::new(config.n, rho, InnovationModel::new(innovation)?, mu, tau)?;
    let innovation_tag = match innovation {
        InnovationKind::Gaussian => 0u64,
        InnovationKind::ScaledT { nu } => (1u64 << 32) | nu as u64,
    };

    let per_replicate: Vec<Vec<Option<bool>>> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let stream = stream_id(&[phase, rho.to_bits(), innovation_tag, mu.to_bits(), rep]);
            let mut rng = replicate_rng(config.master_seed, stream);
            let series = gen_ar1_with(&model, &mut rng);
            combos
                .iter()
                .map(|&(statistic, variant)| {
                    run_single_test(&series, statistic, variant, config.fixed_l, config.alpha)
                        .map(|r| r.decision == Decision::Reject)
                        .ok()
                })
                .collect()
        })
        .collect();

    let mut counts = vec![Counts::default(); combos.len()];
    for rep in &per_replicate {
        for (c, outcome) in counts.iter_mut().zip(rep) {
            match outcome {
                Some(true) => {
                    c.rejects += 1;
                    c.successes += 1;
                }
                Some(false) => c.successes += 1,
                None => c.failures += 1,
            }
        }
    }
    Ok(counts)
}

fn combos(config: &ExperimentConfig) -> Vec<(Statistic, Variant)> {
    let mut out = Vec::new();
    for &s in &config.statistics {
        for &v in &config.variants {
            out.push((s, v));
        }
    }
    out
}

/// Empirical size: every cell under H0 (mu = 0).
pub fn run_size_experiment(config: &ExperimentConfig) -> Result<SizeTable, Error> {
    config.validate()?;
    let replicates = config.resolved_replicates(DEFAULT_SIZE_REPLICATES);
    let combos = combos(config);
    let tau = config.resolved_tau();

    let mut cells = Vec::new();
    for &rho in &config.rhos {
        for &innovation in &config.innovations {
            let counts = run_group(
                config, SIZE_PHASE, rho, innovation, 0.0, tau, &combos, replicates,
            )?;
            for ((statistic, variant), c) in combos.iter().zip(counts) {
                cells.push(SizeCell {
                    rho,
                    innovation,
                    statistic: *statistic,
                    variant: *variant,
                    value: c.value(),
                    se: c.se(),
                    replicates: c.successes,
                    failures: c.failures,
                });
            }
        }
    }
    Ok(SizeTable {
        config: config.clone(),
        cells,
    })
}

/// Empirical power: every cell crossed with every shift height in mu_grid.
pub fn run_power_experiment(config: &ExperimentConfig) -> Result<PowerCurve, Error> {
    config.validate()?;
    let replicates = config.resolved_replicates(DEFAULT_POWER_REPLICATES);
    let combos = combos(config);
    let tau = config.resolved_tau();

    // Compute grouped by (rho, innovation, mu), then emit with mu as the
    // innermost table key.
    let mut cells = Vec::new();
    for &rho in &config.rhos {
        for &innovation in &config.innovations {
            let mut by_mu = Vec::with_capacity(config.mu_grid.len());
            for &mu in &config.mu_grid {
                by_mu.push(run_group(
                    config, POWER_PHASE, rho, innovation, mu, tau, &combos, replicates,
                )?);
            }
            for (combo_idx, &(statistic, variant)) in combos.iter().enumerate() {
                for (mu_idx, &mu) in config.mu_grid.iter().enumerate() {
                    let c = by_mu[mu_idx][combo_idx];
                    cells.push(PowerCell {
                        rho,
                        innovation,
                        statistic,
                        variant,
                        mu,
                        value: c.value(),
                        se: c.se(),
                        replicates: c.successes,
                        failures: c.failures,
                    });
                }
            }
        }
    }
    Ok(PowerCurve {
        config: config.clone(),
        cells,
    })
}

// ---------------------------------------------------------------------------
// emission
// ---------------------------------------------------------------------------

fn cell_value(value: f64, se: f64, replicates: usize, failures: usize) -> Value {
    json!({
        "value": value,
        "se": se,
        "replicates": replicates,
        "failures": failures,
    })
}

fn parse_cell(v: &Value, context: &str) -> Result<(f64, f64, usize, usize), Error> {
    let field = |name: &str| -> Result<&Value, Error> {
        v.get(name).ok_or_else(|| malformed(format!("{context}: missing '{name}'")))
    };
    let value = field("value")?
        .as_f64()
        .ok_or_else(|| malformed(format!("{context}: 'value' not a number")))?;
    let se = field("se")?
        .as_f64()
        .ok_or_else(|| malformed(format!("{context}: 'se' not a number")))?;
    let replicates = field("replicates")?
        .as_u64()
        .ok_or_else(|| malformed(format!("{context}: 'replicates' not an integer")))?;
    let failures = field("failures")?
        .as_u64()
        .ok_or_else(|| malformed(format!("{context}: 'failures' not an integer")))?;
    Ok((value, se, replicates as usize, failures as usize))
}

fn malformed(message: String) -> Error {
    Error::Malformed {
        path: "results json".into(),
        message,
    }
}

fn get_level<'v>(map: &'v Value, key: &str, expected_len: usize, context: &str) -> Result<&'v Value, Error> {
    let obj = map
        .as_object()
        .ok_or_else(|| malformed(format!("{context}: expected an object")))?;
    if obj.len() != expected_len {
        return Err(malformed(format!(
            "{context}: expected {expected_len} entries, found {}",
            obj.len()
        )));
    }
    obj.get(key)
        .ok_or_else(|| malformed(format!("{context}: missing key '{key}'")))
}

impl SizeTable {
    /// One row per cell; stable column order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,innovation,statistic,variant,value,se,replicates,failures\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.rho, c.innovation, c.statistic, c.variant, c.value, c.se, c.replicates, c.failures
            ));
        }
        out
    }

    /// Config echo plus results nested rho -> innovation -> statistic -> variant.
    pub fn to_json(&self) -> String {
        let mut results = Map::new();
        for c in &self.cells {
            let leaf = cell_value(c.value, c.se, c.replicates, c.failures);
            let level = results
                .entry(c.rho.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            let level = level
                .as_object_mut()
                .unwrap()
                .entry(c.innovation.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            let level = level
                .as_object_mut()
                .unwrap()
                .entry(c.statistic.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            level
                .as_object_mut()
                .unwrap()
                .insert(c.variant.to_string(), leaf);
        }
        let doc = json!({
            "config": self.config,
            "results": Value::Object(results),
        });
        serde_json::to_string_pretty(&doc).expect("table serialization cannot fail")
    }

    /// Inverse of `to_json`; enumeration order comes from the config echo.
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| malformed(format!("invalid JSON: {e}")))?;
        let config: ExperimentConfig = serde_json::from_value(
            doc.get("config")
                .ok_or_else(|| malformed("missing 'config'".into()))?
                .clone(),
        )
        .map_err(|e| malformed(format!("bad config echo: {e}")))?;
        let results = doc
            .get("results")
            .ok_or_else(|| malformed("missing 'results'".into()))?;

        let mut cells = Vec::new();
        for &rho in &config.rhos {
            let by_rho = get_level(results, &rho.to_string(), config.rhos.len(), "results")?;
            for &innovation in &config.innovations {
                let by_innov = get_level(
                    by_rho,
                    &innovation.to_string(),
                    config.innovations.len(),
                    "innovation level",
                )?;
                for &statistic in &config.statistics {
                    let by_stat = get_level(
                        by_innov,
                        &statistic.to_string(),
                        config.statistics.len(),
                        "statistic level",
                    )?;
                    for &variant in &config.variants {
                        let leaf = get_level(
                            by_stat,
                            &variant.to_string(),
                            config.variants.len(),
                            "variant level",
                        )?;
                        let (value, se, replicates, failures) =
                            parse_cell(leaf, "cell")?;
                        cells.push(SizeCell {
                            rho,
                            innovation,
                            statistic,
                            variant,
                            value,
                            se,
                            replicates,
                            failures,
                        });
                    }
                }
            }
        }
        Ok(Self { config, cells })
    }
}

impl PowerCurve {
    /// One row per cell; stable column order.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("rho,innovation,statistic,variant,mu,value,se,replicates,failures\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                c.rho,
                c.innovation,
                c.statistic,
                c.variant,
                c.mu,
                c.value,
                c.se,
                c.replicates,
                c.failures
            ));
        }
        out
    }

    /// Config echo plus results nested rho -> innovation -> statistic ->
    /// variant -> mu.
    pub fn to_json(&self) -> String {
        let mut results = Map::new();
        for c in &self.cells {
            let leaf = cell_value(c.value, c.se, c.replicates, c.failures);
            let level = results
                .entry(c.rho.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            let level = level
                .as_object_mut()
                .unwrap()
                .entry(c.innovation.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            let level = level
                .as_object_mut()
                .unwrap()
                .entry(c.statistic.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            let level = level
                .as_object_mut()
                .unwrap()
                .entry(c.variant.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            level.as_object_mut().unwrap().insert(c.mu.to_string(), leaf);
        }
        let doc = json!({
            "config": self.config,
            "results": Value::Object(results),
        });
        serde_json::to_string_pretty(&doc).expect("table serialization cannot fail")
    }

    /// Inverse of `to_json`.
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| malformed(format!("invalid JSON: {e}")))?;
        let config: ExperimentConfig = serde_json::from_value(
            doc.get("config")
                .ok_or_else(|| malformed("missing 'config'".into()))?
                .clone(),
        )
        .map_err(|e| malformed(format!("bad config echo: {e}")))?;
        let results = doc
            .get("results")
            .ok_or_else(|| malformed("missing 'results'".into()))?;

        let mut cells = Vec::new();
        for &rho in &config.rhos {
            let by_rho = get_level(results, &rho.to_string(), config.rhos.len(), "results")?;
            for &innovation in &config.innovations {
                let by_innov = get_level(
                    by_rho,
                    &innovation.to_string(),
                    config.innovations.len(),
                    "innovation level",
                )?;
                for &statistic in &config.statistics {
                    let by_stat = get_level(
                        by_innov,
                        &statistic.to_string(),
                        config.statistics.len(),
                        "statistic level",
                    )?;
                    for &variant in &config.variants {
                        let by_variant = get_level(
                            by_stat,
                            &variant.to_string(),
                            config.variants.len(),
                            "variant level",
                        )?;
                        for &mu in &config.mu_grid {
                            let leaf = get_level(
                                by_variant,
                                &mu.to_string(),
                                config.mu_grid.len(),
                                "mu level",
                            )?;
                            let (value, se, replicates, failures) = parse_cell(leaf, "cell")?;
                            cells.push(PowerCell {
                                rho,
                                innovation,
                                statistic,
                                variant,
                                mu,
                                value,
                                se,
                                replicates,
                                failures,
                            });
                        }
                    }
                }
            }
        }
        Ok(Self { config, cells })
    }
}

/// Writes a string artifact, wrapping I/O failures with the path.
pub fn write_artifact(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::gen_ar1;
    use approx::assert_abs_diff_eq;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            n: 40,
            rhos: vec![0.0],
            innovations: vec![InnovationKind::Gaussian],
            statistics: vec![Statistic::Cusum],
            variants: vec![Variant::Unadjusted],
            replicates: Some(50),
            ..ExperimentConfig::default()
        }
    }

    fn shifted_series(seed: u64) -> TimeSeries {
        let innov = InnovationModel::new(InnovationKind::Gaussian).unwrap();
        let model = ChangePointModel::new(200, 0.0, innov, 2.0, 100).unwrap();
        gen_ar1(&model, seed)
    }

    #[test]
    fn variant_tokens() {
        assert_eq!(Variant::Unadjusted.to_string(), "unadjusted");
        assert_eq!(Variant::FixedNol.to_string(), "fixed_nol");
        assert_eq!(Variant::AdaptiveOl.to_string(), "adaptive_ol");
        let parsed: Variant = serde_json::from_str("\"fixed_ol\"").unwrap();
        assert_eq!(parsed, Variant::FixedOl);
        assert_eq!(serde_json::to_string(&Variant::AdaptiveNol).unwrap(), "\"adaptive_nol\"");
    }

    #[test]
    fn statistic_tokens_accept_aliases() {
        let s: Statistic = serde_json::from_str("\"t1\"").unwrap();
        assert_eq!(s, Statistic::Wilcoxon);
        let s: Statistic = serde_json::from_str("\"wilcoxon\"").unwrap();
        assert_eq!(s, Statistic::Wilcoxon);
        let s: Statistic = serde_json::from_str("\"cusum\"").unwrap();
        assert_eq!(s, Statistic::Cusum);
        assert_eq!(serde_json::to_string(&Statistic::Cusum).unwrap(), "\"t2\"");
    }

    #[test]
    fn config_defaults_match_protocol() {
        let c = ExperimentConfig::default();
        assert_eq!(c.n, 200);
        assert_eq!(c.rhos, vec![0.0, 0.4, 0.8]);
        assert_eq!(c.fixed_l, 9);
        assert_eq!(c.alpha, 0.05);
        assert_eq!(c.mu_grid.len(), 9);
        assert_eq!(c.mu_grid[1], 0.25);
        assert_eq!(c.resolved_tau(), 100);
        assert_eq!(c.resolved_replicates(DEFAULT_SIZE_REPLICATES), 4000);
        assert_eq!(c.master_seed, 0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn empty_json_parses_to_defaults() {
        let c: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        let err = serde_json::from_str::<ExperimentConfig>("{\"replciates\": 10}").unwrap_err();
        assert!(err.to_string().contains("replciates"));
    }

    #[test]
    fn validation_lists_every_offending_field() {
        let config = ExperimentConfig {
            replicates: Some(0),
            alpha: 2.0,
            rhos: vec![0.0, 1.5],
            ..ExperimentConfig::default()
        };
        let err = config.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("replicates"), "{msg}");
        assert!(msg.contains("alpha"), "{msg}");
        assert!(msg.contains("rhos[1]"), "{msg}");
    }

    #[test]
    fn validation_catches_block_length_conflicts() {
        let config = ExperimentConfig {
            n: 12,
            fixed_l: 9,
            ..ExperimentConfig::default()
        };
        let msg = config.validate().unwrap_err().to_string();
        assert!(msg.contains("fixed_l"), "{msg}");
        // Without fixed variants the same fixed_l is irrelevant.
        let config = ExperimentConfig {
            n: 12,
            fixed_l: 9,
            variants: vec![Variant::Unadjusted, Variant::AdaptiveNol],
            tau: Some(6),
            ..ExperimentConfig::default()
        };
        assert!(config.validate().is_ok());
    }

    #[test]
    fn single_test_rejects_an_obvious_shift() {
        let result = run_single_test(
            &shifted_series(5),
            Statistic::Wilcoxon,
            Variant::AdaptiveNol,
            9,
            0.05,
        )
        .unwrap();
        assert_eq!(result.decision, Decision::Reject);
        assert!(result.p_value < 0.05);
        // The estimated location should land near the true change at 100.
        assert!((50..150).contains(&result.change_point_estimate));
        assert!(result.block_length_used.is_some());
        assert!(result.rho_hat.is_some());
    }

    #[test]
    fn single_test_degenerates_on_constant_series() {
        let constant = TimeSeries::new(vec![1.0; 200]).unwrap();
        assert!(matches!(
            run_single_test(&constant, Statistic::Cusum, Variant::Unadjusted, 9, 0.05),
            Err(Error::DegenerateVariance)
        ));
        assert!(matches!(
            run_single_test(&constant, Statistic::Wilcoxon, Variant::Unadjusted, 9, 0.05),
            Err(Error::DegenerateVariance)
        ));
        // Adaptive variants fail earlier, at rho_hat.
        assert!(matches!(
            run_single_test(&constant, Statistic::Cusum, Variant::AdaptiveNol, 9, 0.05),
            Err(Error::ConstantSeries)
        ));
    }

    #[test]
    fn single_test_validates_alpha() {
        let series = shifted_series(1);
        for alpha in [0.0, 1.0, -0.2, 1.7, f64::NAN] {
            assert!(matches!(
                run_single_test(&series, Statistic::Cusum, Variant::Unadjusted, 9, alpha),
                Err(Error::ProbabilityOutOfRange { .. })
            ));
        }
    }

    #[test]
    fn unadjusted_scales_match_closed_forms() {
        // Tie-free series: population variance of the EDF values is
        // (n^2 - 1) / (12 n^2).
        let series = shifted_series(3);
        let n = series.len() as f64;
        let r = run_single_test(&series, Statistic::Wilcoxon, Variant::Unadjusted, 9, 0.05).unwrap();
        let closed_form = ((n * n - 1.0) / (12.0 * n * n)).sqrt();
        assert_abs_diff_eq!(r.sigma_hat, closed_form, epsilon = 1e-12);
        assert!(r.block_length_used.is_none());
        assert!(r.rho_hat.is_none());

        let r = run_single_test(&series, Statistic::Cusum, Variant::Unadjusted, 9, 0.05).unwrap();
        let x = series.values();
        let mean = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert_abs_diff_eq!(r.sigma_hat, sd, epsilon = 1e-12);
    }

    #[test]
    fn decision_agrees_with_p_value() {
        // normalized > q(1 - alpha) iff p < alpha, up to quantile roundoff;
        // check across seeds and variants on continuous data.
        for seed in 0..50 {
            let innov = InnovationModel::new(InnovationKind::Gaussian).unwrap();
            let model = ChangePointModel::new(80, 0.4, innov, 0.5, 40).unwrap();
            let series = gen_ar1(&model, seed);
            for variant in [Variant::Unadjusted, Variant::FixedNol, Variant::AdaptiveOl] {
                let r = run_single_test(&series, Statistic::Wilcoxon, variant, 9, 0.05).unwrap();
                assert_eq!(r.decision == Decision::Reject, r.p_value < 0.05, "seed {seed}");
            }
        }
    }

    #[test]
    fn size_experiment_smoke() {
        let table = run_size_experiment(&tiny_config()).unwrap();
        assert_eq!(table.cells.len(), 1);
        let cell = &table.cells[0];
        assert_eq!(cell.replicates, 50);
        assert_eq!(cell.failures, 0);
        assert!((0.0..=1.0).contains(&cell.value));
        // Binomial coherence, bit-for-bit.
        let expected_se = (cell.value * (1.0 - cell.value) / cell.replicates as f64).sqrt();
        assert_eq!(cell.se, expected_se);
    }

    #[test]
    fn experiments_are_deterministic() {
        let config = tiny_config();
        let a = run_size_experiment(&config).unwrap();
        let b = run_size_experiment(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());

        let different_seed = ExperimentConfig {
            master_seed: 1,
            ..config
        };
        let c = run_size_experiment(&different_seed).unwrap();
        assert_ne!(a.cells[0].value, c.cells[0].value);
    }

    #[test]
    fn cells_do_not_depend_on_their_neighbors() {
        // Dropping a rho from the sweep must not move the remaining cells.
        let wide = ExperimentConfig {
            rhos: vec![0.0, 0.4],
            n: 40,
            innovations: vec![InnovationKind::Gaussian],
            statistics: vec![Statistic::Cusum, Statistic::Wilcoxon],
            variants: vec![Variant::Unadjusted],
            replicates: Some(30),
            ..ExperimentConfig::default()
        };
        let narrow = ExperimentConfig {
            rhos: vec![0.4],
            ..wide.clone()
        };
        let wide_table = run_size_experiment(&wide).unwrap();
        let narrow_table = run_size_experiment(&narrow).unwrap();
        let wide_cell = wide_table
            .cells
            .iter()
            .find(|c| c.rho == 0.4 && c.statistic == Statistic::Cusum)
            .unwrap();
        let narrow_cell = narrow_table
            .cells
            .iter()
            .find(|c| c.rho == 0.4 && c.statistic == Statistic::Cusum)
            .unwrap();
        assert_eq!(wide_cell.value, narrow_cell.value);
        assert_eq!(wide_cell.se, narrow_cell.se);
    }

    #[test]
    fn power_at_zero_shift_matches_size() {
        let config = ExperimentConfig {
            n: 60,
            rhos: vec![0.0],
            innovations: vec![InnovationKind::Gaussian],
            statistics: vec![Statistic::Cusum],
            variants: vec![Variant::FixedNol],
            fixed_l: 5,
            replicates: Some(200),
            mu_grid: vec![0.0, 1.0],
            ..ExperimentConfig::default()
        };
        let size = run_size_experiment(&config).unwrap();
        let power = run_power_experiment(&config).unwrap();
        let p0 = power.cells.iter().find(|c| c.mu == 0.0).unwrap();
        let s = &size.cells[0];
        let se = (s.se * s.se + p0.se * p0.se).sqrt();
        assert!(
            (p0.value - s.value).abs() <= 2.0 * se + 1e-12,
            "size {} vs power-at-zero {}",
            s.value,
            p0.value
        );
        // And the large shift should dominate the null cell.
        let p1 = power.cells.iter().find(|c| c.mu == 1.0).unwrap();
        assert!(p1.value > p0.value);
    }

    #[test]
    fn size_json_round_trips() {
        let config = ExperimentConfig {
            n: 40,
            rhos: vec![0.0, 0.4],
            innovations: vec![InnovationKind::Gaussian, InnovationKind::ScaledT { nu: 3 }],
            statistics: vec![Statistic::Wilcoxon, Statistic::Cusum],
            variants: vec![Variant::Unadjusted, Variant::AdaptiveNol],
            replicates: Some(10),
            ..ExperimentConfig::default()
        };
        let table = run_size_experiment(&config).unwrap();
        let parsed = SizeTable::from_json(&table.to_json()).unwrap();
        assert_eq!(table, parsed);
    }

    #[test]
    fn power_json_round_trips() {
        let config = ExperimentConfig {
            n: 40,
            rhos: vec![0.0],
            innovations: vec![InnovationKind::Gaussian],
            statistics: vec![Statistic::Wilcoxon],
            variants: vec![Variant::Unadjusted],
            replicates: Some(10),
            mu_grid: vec![0.0, 0.5, 1.0],
            ..ExperimentConfig::default()
        };
        let curve = run_power_experiment(&config).unwrap();
        let parsed = PowerCurve::from_json(&curve.to_json()).unwrap();
        assert_eq!(curve, parsed);
    }

    #[test]
    fn from_json_rejects_missing_cells() {
        let table = run_size_experiment(&tiny_config()).unwrap();
        let mut doc: Value = serde_json::from_str(&table.to_json()).unwrap();
        doc["results"]["0"]["gaussian"]["t2"]
            .as_object_mut()
            .unwrap()
            .remove("unadjusted");
        let err = SizeTable::from_json(&doc.to_string()).unwrap_err();
        assert!(err.to_string().contains("variant level"), "{err}");
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let table = run_size_experiment(&tiny_config()).unwrap();
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "rho,innovation,statistic,variant,value,se,replicates,failures"
        );
        assert!(lines[1].starts_with("0,gaussian,t2,unadjusted,"));
    }

    #[test]
    fn empty_table_yields_header_only_csv() {
        let table = SizeTable {
            config: ExperimentConfig::default(),
            cells: Vec::new(),
        };
        assert_eq!(
            table.to_csv(),
            "rho,innovation,statistic,variant,value,se,replicates,failures\n"
        );
        let curve = PowerCurve {
            config: ExperimentConfig::default(),
            cells: Vec::new(),
        };
        assert_eq!(
            curve.to_csv(),
            "rho,innovation,statistic,variant,mu,value,se,replicates,failures\n"
        );
    }
}
