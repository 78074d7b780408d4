//! Command-line entry point.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bounds::{envelope_tail, BoundParams};
use crate::chain::{simulate, InitSpec, ModelKind, ModelSpec};
use crate::dominating::estimate_stats;
use crate::error::{Error, Result};
use crate::experiment::{run_and_write, ExperimentConfig};
use crate::laws::Law;
use crate::verify::{fmt_f64, w1_rate_scan, write_atomic};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Overrides the seed of every subcommand when set.
pub const SEED_ENV: &str = "RNG_SEED";

#[derive(Debug, Parser)]
#[command(name = "irfconc", version, about = "Concentration bounds for contracting iterated random functions")]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one trajectory and write it as CSV.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate every bound family on a grid of thresholds.
    Bounds {
        /// BoundParams JSON.
        #[arg(long)]
        params: PathBuf,
        /// `start:stop:step`.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a dominance experiment.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Scan `√n E W1(μ_n, μ)` over chain lengths.
    Rates {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated lengths.
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        replications: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate moments and Laplace transforms of the dominating variables.
    EstimateStats {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        a: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        outer: usize,
        #[arg(long, default_value_t = 1_000)]
        inner: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Built-in model: ar1, half_binary or iid.
    #[arg(long, conflicts_with = "model_spec")]
    model: Option<String>,
    /// Model JSON file, as accepted by experiment configs.
    #[arg(long)]
    model_spec: Option<PathBuf>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Noise law of the iid model as JSON, e.g. '{"kind":"uniform","low":0,"high":1}'.
    #[arg(long)]
    law: Option<String>,
    /// Fixed starting point; the stationary law is used otherwise.
    #[arg(long)]
    x0: Option<f64>,
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec> {
        if let Some(path) = &self.model_spec {
            return parse_json(path);
        }
        let name = self.model.as_deref().ok_or_else(|| Error::Config("pass --model or --model-spec".into()))?;
        let model: ModelKind = serde_json::from_value(serde_json::Value::String(name.to_owned()))
            .map_err(|_| Error::Config(format!("unknown model `{name}`")))?;
        let law = match &self.law {
            Some(text) => Some(serde_json::from_str::<Law>(text)?),
            None => None,
        };
        Ok(ModelSpec { model, rho: self.rho, sigma: self.sigma, law, init: self.x0.map(|x| InitSpec::Fixed { x }) })
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).map_err(|e| json_error(path, e))
}

fn json_error(path: &Path, e: serde_json::Error) -> Error {
    Error::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
}

fn seed_override(seed: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(seed),
    }
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Config(format!("grid must be start:stop:step, got `{text}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    let (start, stop, step) = (v[0], v[1], v[2]);
    if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    if count > 10_000_000 {
        return Err(bad());
    }
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

fn bounds_csv(params: &BoundParams, grid: &[f64]) -> Result<String> {
    let bounds = params.tail_bounds()?;
    let mut s = String::from("x,family,bound_value,winning_family\n");
    for &x in grid {
        let (_, winner) = envelope_tail(x, &bounds);
        let winner = winner.map_or("none", |f| f.name());
        for b in &bounds {
            let v = b.value(x).map_or_else(|_| "nan".to_owned(), fmt_f64);
            let _ = writeln!(s, "{},{},{},{}", fmt_f64(x), b.family, v, winner);
        }
    }
    Ok(s)
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate { model, n, seed, out } => {
            let model = model.spec()?.build()?;
            let t = simulate(&model, n, seed_override(seed)?)?;
            let mut s = String::from("k");
            for j in 1..=t.dim {
                let _ = write!(s, ",x{j}");
            }
            s.push('\n');
            for k in 1..=t.len() {
                s.push_str(&k.to_string());
                for v in t.state(k) {
                    let _ = write!(s, ",{}", fmt_f64(*v));
                }
                s.push('\n');
            }
            write_atomic(&out, s.as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::Bounds { params, grid, out } => {
            let p: BoundParams = parse_json(&params)?;
            let csv = bounds_csv(&p, &parse_grid(&grid)?)?;
            write_atomic(&out, csv.as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::Verify { config } => {
            let text = read(&config)?;
            let cfg = ExperimentConfig::from_json(&text).map_err(|e| match e {
                Error::Json(j) => json_error(&config, j),
                other => other,
            })?;
            let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
            let outcome = run_and_write(&cfg, seed_override(cfg.seed)?, &base)?;
            let c = outcome.summary.verdict_counts;
            eprintln!(
                "verify: {} ({} pass, {} fail, {} unresolved, {} inapplicable)",
                outcome.report.global.name(),
                c.pass,
                c.fail,
                c.unresolved,
                c.inapplicable
            );
            Ok(if outcome.passed() { EXIT_OK } else { EXIT_FAIL })
        }
        Command::Rates { model, n_list, replications, seed, out } => {
            let model = model.spec()?.build()?;
            let rows = w1_rate_scan(&model, &n_list, replications, seed_override(seed)?)?;
            let mut s = String::from("n,scaled_mean,scaled_se\n");
            for r in rows {
                let _ = writeln!(s, "{},{},{}", r.n, fmt_f64(r.scaled_mean), fmt_f64(r.scaled_se));
            }
            write_atomic(&out, s.as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::EstimateStats { model, p, a, outer, inner, seed, out } => {
            let model = model.spec()?.build()?;
            let stats = estimate_stats(&model, &p, &a, outer, inner, seed_override(seed)?)?;
            let mut json = serde_json::to_string_pretty(&stats)?;
            json.push('\n');
            write_atomic(&out, json.as_bytes())?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `argv` (program name first) and runs the subcommand. Returns 0
/// on success, 1 when a dominance check fails and 2 on any configuration
/// or runtime error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_CONFIG;
        }
        builder = builder.num_threads(k);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| execute(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}
