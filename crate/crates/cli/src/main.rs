//! Command-line front end: test a recorded series from CSV, generate
//! simulated series, run the Monte Carlo experiments from a JSON config,
//! and query the limit distribution.
//!
//! Exit codes: 0 = computed, 2 = usage or input error, 3 = degenerate
//! computation (constant series, zero variance).

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};

use cpdetect::{
    gen_ar1, ks_quantile, run_power_experiment, run_single_test, run_size_experiment,
    write_artifact, ChangePointModel, Error, ExperimentConfig, InnovationKind, InnovationModel,
    Statistic, TimeSeries, Variant,
};

const EXIT_USAGE: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;

/// Change-point tests for serially dependent series.
#[derive(Parser)]
#[command(name = "cpdetect", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a single-column CSV series for a change in distribution.
    Test {
        /// CSV file with one numeric column (header auto-detected).
        input: PathBuf,
        /// Which statistic to compute.
        #[arg(long, value_enum)]
        statistic: StatisticArg,
        /// Studentization: unadjusted, fixed:<l>, or adaptive.
        #[arg(long, default_value = "adaptive")]
        variance: VarianceArg,
        /// Block scheme for subsampling variants.
        #[arg(long, value_enum, default_value = "nol")]
        overlap: OverlapArg,
        /// Test level in (0, 1).
        #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
        alpha: f64,
    },
    /// Generate an AR(1) series with an optional level shift, as CSV.
    Simulate {
        /// Series length.
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// AR(1) coefficient, |rho| <= 0.999.
        #[arg(long, default_value_t = 0.0, value_parser = parse_rho)]
        rho: f64,
        /// Innovation family: gauss or t3.
        #[arg(long, default_value = "gauss")]
        innovation: InnovationKind,
        /// Shift height added after the change index.
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        /// Change index (observations tau+1..n are shifted); default n/2.
        #[arg(long)]
        tau: Option<usize>,
        /// RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the empirical-size experiment from a JSON config.
    ExperimentSize {
        /// JSON config file (missing fields take protocol defaults).
        config: PathBuf,
        /// Directory for size_table.csv and size_table.json.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the power-curve experiment from a JSON config.
    ExperimentPower {
        /// JSON config file (missing fields take protocol defaults).
        config: PathBuf,
        /// Directory for power_curves.csv and power_curves.json.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print a quantile of the sup|Brownian bridge| law.
    LimitQuantile {
        /// Probability in (0, 1).
        #[arg(long, value_parser = parse_alpha)]
        p: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StatisticArg {
    Wilcoxon,
    Cusum,
}

impl From<StatisticArg> for Statistic {
    fn from(arg: StatisticArg) -> Self {
        match arg {
            StatisticArg::Wilcoxon => Statistic::Wilcoxon,
            StatisticArg::Cusum => Statistic::Cusum,
        }
    }
}

#[derive(Clone, Copy)]
enum VarianceArg {
    Unadjusted,
    Fixed(usize),
    Adaptive,
}

impl FromStr for VarianceArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unadjusted" => Ok(Self::Unadjusted),
            "adaptive" => Ok(Self::Adaptive),
            _ => {
                let l = s
                    .strip_prefix("fixed:")
                    .ok_or_else(|| format!("expected unadjusted, fixed:<l>, or adaptive, got '{s}'"))?;
                let l: usize = l
                    .parse()
                    .map_err(|_| format!("block length in 'fixed:<l>' must be an integer, got '{l}'"))?;
                if l == 0 {
                    return Err("block length in 'fixed:<l>' must be at least 1".into());
                }
                Ok(Self::Fixed(l))
            }
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OverlapArg {
    Ol,
    Nol,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if p.is_finite() && 0.0 < p && p < 1.0 {
        Ok(p)
    } else {
        Err(format!("{p} is outside (0, 1)"))
    }
}

fn parse_rho(s: &str) -> Result<f64, String> {
    let rho: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if rho.is_finite() && rho.abs() <= 0.999 {
        Ok(rho)
    } else {
        Err(format!("{rho} is outside [-0.999, 0.999]"))
    }
}

/// A failure carrying its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DegenerateVariance | Error::ConstantSeries => EXIT_DEGENERATE,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Test {
            input,
            statistic,
            variance,
            overlap,
            alpha,
        } => cmd_test(&input, statistic.into(), variance, overlap, alpha),
        Command::Simulate {
            n,
            rho,
            innovation,
            mu,
            tau,
            seed,
            output,
        } => cmd_simulate(n, rho, innovation, mu, tau, seed, &output),
        Command::ExperimentSize { config, output } => cmd_experiment(&config, &output, Phase::Size),
        Command::ExperimentPower { config, output } => {
            cmd_experiment(&config, &output, Phase::Power)
        }
        Command::LimitQuantile { p } => {
            println!("{:.6}", ks_quantile(p)?);
            Ok(())
        }
    }
}

/// Honors CPDETECT_THREADS (0 = automatic) before any parallel work starts.
fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("CPDETECT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        Failure::usage(format!(
            "CPDETECT_THREADS must be a nonnegative integer, got '{raw}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::usage(format!("cannot configure thread pool: {e}")))
}

fn cmd_test(
    input: &Path,
    statistic: Statistic,
    variance: VarianceArg,
    overlap: OverlapArg,
    alpha: f64,
) -> Result<(), Failure> {
    let series = read_series_csv(input)?;
    let (variant, fixed_l) = match (variance, overlap) {
        (VarianceArg::Unadjusted, _) => (Variant::Unadjusted, 1),
        (VarianceArg::Fixed(l), OverlapArg::Ol) => (Variant::FixedOl, l),
        (VarianceArg::Fixed(l), OverlapArg::Nol) => (Variant::FixedNol, l),
        (VarianceArg::Adaptive, OverlapArg::Ol) => (Variant::AdaptiveOl, 1),
        (VarianceArg::Adaptive, OverlapArg::Nol) => (Variant::AdaptiveNol, 1),
    };
    let result = run_single_test(&series, statistic, variant, fixed_l, alpha)?;
    let json = serde_json::to_string_pretty(&result)
        .map_err(|e| Failure::usage(format!("cannot serialize result: {e}")))?;
    println!("{json}");
    Ok(())
}

/// Reads a one-column CSV. The first line may be a header; it is treated as
/// one exactly when it does not parse as a number.
fn read_series_csv(path: &Path) -> Result<TimeSeries, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            return Err(Failure::usage(format!(
                "{}: line {line_no}: empty line",
                path.display()
            )));
        }
        if line.contains(',') {
            return Err(Failure::usage(format!(
                "{}: line {line_no}: expected a single column, found a comma",
                path.display()
            )));
        }
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                return Err(Failure::usage(format!(
                    "{}: line {line_no}: non-finite value {v}",
                    path.display()
                )))
            }
            Err(_) if line_no == 1 => continue, // header
            Err(_) => {
                return Err(Failure::usage(format!(
                    "{}: line {line_no}: cannot parse '{line}' as a number",
                    path.display()
                )))
            }
        }
    }
    if values.len() < 10 {
        return Err(Failure::usage(format!(
            "{}: series has {} values; need at least 10",
            path.display(),
            values.len()
        )));
    }
    Ok(TimeSeries::new(values)?)
}

fn cmd_simulate(
    n: usize,
    rho: f64,
    innovation: InnovationKind,
    mu: f64,
    tau: Option<usize>,
    seed: u64,
    output: &Path,
) -> Result<(), Failure> {
    let model = ChangePointModel::new(n, rho, InnovationModel::new(innovation)?, mu, tau.unwrap_or(n / 2))?;
    let series = gen_ar1(&model, seed);
    let mut csv = String::from("x\n");
    for v in series.values() {
        csv.push_str(&format!("{v}\n"));
    }
    write_artifact(output, &csv)?;
    Ok(())
}

enum Phase {
    Size,
    Power,
}

fn cmd_experiment(config_path: &Path, out_dir: &Path, phase: Phase) -> Result<(), Failure> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Failure::usage(format!("{}: {e}", config_path.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("{}: {e}", config_path.display())))?;
    config.validate()?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Failure::usage(format!("{}: {e}", out_dir.display())))?;

    let (csv, json, stem) = match phase {
        Phase::Size => {
            let table = run_size_experiment(&config)?;
            (table.to_csv(), table.to_json(), "size_table")
        }
        Phase::Power => {
            let curve = run_power_experiment(&config)?;
            (curve.to_csv(), curve.to_json(), "power_curves")
        }
    };
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let json_path = out_dir.join(format!("{stem}.json"));
    write_artifact(&csv_path, &csv)?;
    write_artifact(&json_path, &json)?;
    eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}
