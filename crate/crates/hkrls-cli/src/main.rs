//! Benchmark and model CLI for hierarchic kernel regression on grid
//! datasets.
//!
//! Subcommands: `synth2d`, `synth3d`, `grid-csv` run configurable
//! experiments on the built-in generators or a gridded CSV; `compare` runs
//! a shipped preset or a TOML config; `cost-table` prints the training-cost
//! model; `fit`/`predict` persist and query a hierarchic model.
//!
//! `HKLS_THREADS` caps the worker threads used for validation predictions.

mod config;
mod runner;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hkrls::datasets::GridDataset;
use hkrls::hierarchy::{fit_general, predict_general};
use hkrls::metrics::{hkrls_cost, krls_cost};
use hkrls::storage::{load_model, save_model};

use config::{
    default_method, load_config_file, load_preset, validate, DatasetKind, DatasetSpec,
    ExperimentConfig, FilterConfig, MethodProfile, MethodSpec, OutputConfig, SplitConfig,
};

/// Errors that should exit with the usage code (2) rather than the runtime
/// failure code (1).
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

#[derive(Parser)]
#[command(
    name = "hkrls",
    version,
    about = "Hierarchic kernel regression benchmarks on grid datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Csv,
    Md,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Samples per axis, comma separated (e.g. 145,150)
    #[arg(long)]
    counts: Option<String>,
    /// Axis ranges lo:hi, comma separated (e.g. 0.1:12.57,0.1:25.13)
    #[arg(long)]
    ranges: Option<String>,
    /// Training fraction per split axis
    #[arg(long, default_value_t = 0.8)]
    fraction: f64,
    /// Experiment seed (splits and online sample order)
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Ridge added to every solve (default: trace-scaled rule)
    #[arg(long)]
    jitter: Option<f64>,
    /// Hierarchic per-level kernel bandwidths (e.g. 1,0.5477)
    #[arg(long)]
    sigma_levels: Option<String>,
    /// Methods to run, comma separated (default: hkrls)
    #[arg(long, default_value = "hkrls")]
    methods: String,
    /// Axes to split, comma separated indices (default: all axes)
    #[arg(long)]
    split_axes: Option<String>,
    /// Output directory for report.csv / report.md
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table format printed to stdout
    #[arg(long, value_enum, default_value_t = TableFormat::Md)]
    format: TableFormat,
    /// Also write per-point residual files
    #[arg(long)]
    residuals: bool,
    /// Timed fit repetitions per method (fastest wins)
    #[arg(long, default_value_t = 1)]
    repeat: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Benchmark methods on the two-axis synthetic field
    Synth2d(ExperimentArgs),
    /// Benchmark methods on the three-axis synthetic field
    Synth3d {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Run the full-resolution grid instead of the reduced default
        #[arg(long)]
        full: bool,
    },
    /// Benchmark methods on a gridded CSV dataset
    GridCsv {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Dataset file in the grid CSV format
        #[arg(long)]
        path: PathBuf,
        /// Pre-filter variance (with --filter-size)
        #[arg(long)]
        filter_variance: Option<f64>,
        /// Pre-filter kernel side length
        #[arg(long)]
        filter_size: Option<usize>,
    },
    /// Run a shipped preset or a TOML experiment config
    Compare {
        /// Preset name (see --list)
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// TOML config path
        #[arg(long)]
        config: Option<PathBuf>,
        /// List available presets and exit
        #[arg(long)]
        list: bool,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Table format printed to stdout
        #[arg(long, value_enum, default_value_t = TableFormat::Md)]
        format: TableFormat,
        /// Use the config's full-resolution dataset variant
        #[arg(long)]
        full: bool,
    },
    /// Print the hierarchic vs flat training-cost model
    CostTable {
        /// Axis counts, comma separated; repeatable (e.g. --m 2,2 --m 116,120)
        #[arg(long = "m", required = true)]
        m: Vec<String>,
        /// Table format printed to stdout
        #[arg(long, value_enum, default_value_t = TableFormat::Md)]
        format: TableFormat,
    },
    /// Fit a hierarchic model on a full grid and persist it
    Fit {
        /// Dataset kind
        #[arg(long, value_enum, default_value_t = DatasetArg::Synth2d)]
        dataset: DatasetArg,
        /// Dataset file (grid-csv only)
        #[arg(long)]
        path: Option<PathBuf>,
        /// Samples per axis, comma separated
        #[arg(long)]
        counts: Option<String>,
        /// Axis ranges lo:hi, comma separated
        #[arg(long)]
        ranges: Option<String>,
        /// Hierarchic per-level kernel bandwidths
        #[arg(long)]
        sigma_levels: Option<String>,
        /// Ridge added to every solve (default: trace-scaled rule)
        #[arg(long)]
        jitter: Option<f64>,
        /// Model output path
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a persisted hierarchic model at one query point
    Predict {
        /// Model file written by `fit`
        #[arg(long)]
        model: PathBuf,
        /// Query coordinates, comma separated (one per axis)
        #[arg(long)]
        query: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DatasetArg {
    Synth2d,
    Synth3d,
    GridCsv,
}

fn parse_usize_list(text: &str, what: &str) -> anyhow::Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("invalid {what} entry '{t}'")))
        })
        .collect()
}

fn parse_f64_list(text: &str, what: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("invalid {what} entry '{t}'")))
        })
        .collect()
}

fn parse_ranges(text: &str) -> anyhow::Result<Vec<[f64; 2]>> {
    text.split(',')
        .map(|pair| {
            let mut it = pair.split(':');
            let lo = it.next().and_then(|t| t.trim().parse::<f64>().ok());
            let hi = it.next().and_then(|t| t.trim().parse::<f64>().ok());
            match (lo, hi, it.next()) {
                (Some(lo), Some(hi), None) => Ok([lo, hi]),
                _ => Err(usage(format!("invalid range '{pair}' (expected lo:hi)"))),
            }
        })
        .collect()
}

fn method_list(
    spec: &str,
    profile: MethodProfile,
    sigma_levels: Option<&str>,
) -> anyhow::Result<Vec<MethodSpec>> {
    let mut methods = Vec::new();
    for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let mut m = default_method(name, profile).map_err(|e| usage(e.to_string()))?;
        if let (MethodSpec::Hkrls { sigma_levels: sl }, Some(text)) = (&mut m, sigma_levels) {
            *sl = parse_f64_list(text, "sigma-levels")?;
        }
        methods.push(m);
    }
    if methods.is_empty() {
        return Err(usage("no methods requested"));
    }
    Ok(methods)
}

fn experiment_from_args(
    kind: DatasetKind,
    args: &ExperimentArgs,
    path: Option<PathBuf>,
    filter: Option<FilterConfig>,
) -> anyhow::Result<ExperimentConfig> {
    let profile = match kind {
        DatasetKind::Synth2d => MethodProfile::Synth2d,
        DatasetKind::Synth3d => MethodProfile::Synth3d,
        DatasetKind::GridCsv => MethodProfile::SensorGrid,
    };
    let cfg = ExperimentConfig {
        name: None,
        dataset: DatasetSpec {
            kind,
            counts: args
                .counts
                .as_deref()
                .map(|t| parse_usize_list(t, "counts"))
                .transpose()?,
            ranges: args.ranges.as_deref().map(parse_ranges).transpose()?,
            path,
            filter,
            full: full_variant(kind),
        },
        split: SplitConfig {
            fraction: args.fraction,
            seed: args.seed,
            axes: args
                .split_axes
                .as_deref()
                .map(|t| parse_usize_list(t, "split-axes"))
                .transpose()?,
        },
        jitter: args.jitter,
        repeat: args.repeat.max(1),
        output: OutputConfig {
            dir: args.out.clone(),
            residuals: args.residuals,
        },
        methods: method_list(&args.methods, profile, args.sigma_levels.as_deref())?,
    };
    validate(&cfg).map_err(|e| usage(format!("{e:#}")))?;
    Ok(cfg)
}

/// Built-in full-resolution variant for the synthetic generators.
fn full_variant(kind: DatasetKind) -> Option<config::FullSpec> {
    use std::f64::consts::PI;
    match kind {
        DatasetKind::Synth3d => Some(config::FullSpec {
            counts: vec![145, 150, 100],
            ranges: vec![[0.1, 4.0 * PI], [0.1, 8.0 * PI], [0.1, 12.0 * PI]],
        }),
        _ => None,
    }
}

fn print_reports(outcome: &runner::ExperimentOutcome, format: TableFormat) {
    match format {
        TableFormat::Md => print!("{}", runner::markdown_table(&outcome.reports)),
        TableFormat::Csv => print!("{}", runner::csv_table(&outcome.reports)),
    }
}

fn finish_experiment(outcome: runner::ExperimentOutcome, format: TableFormat) -> anyhow::Result<()> {
    print_reports(&outcome, format);
    if !outcome.failures.is_empty() {
        let names: Vec<&str> = outcome.failures.iter().map(|(n, _)| n.as_str()).collect();
        for (name, err) in &outcome.failures {
            eprintln!("method {name} failed: {err}");
        }
        bail!("{} method(s) failed: {}", names.len(), names.join(", "));
    }
    Ok(())
}

fn cmd_cost_table(specs: &[String], format: TableFormat) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for spec in specs {
        let counts: Vec<u64> = spec
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u64>()
                    .map_err(|_| usage(format!("invalid axis count '{t}'")))
            })
            .collect::<anyhow::Result<_>>()?;
        if counts.iter().any(|&m| m < 2) {
            return Err(usage(format!(
                "axis counts must be at least 2, got {spec}"
            )));
        }
        let a = hkrls_cost(&counts)?;
        let b = krls_cost(&counts)?;
        let label = counts
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("x");
        rows.push((label, a, b, a as f64 / b as f64));
    }
    match format {
        TableFormat::Md => {
            println!("| Axes | Hierarchic Cost | Flat Cost | Ratio |");
            println!("|---|---|---|---|");
            for (label, a, b, r) in rows {
                println!("| {label} | {a} | {b} | {r} |");
            }
        }
        TableFormat::Csv => {
            println!("axes,hierarchic_cost,flat_cost,ratio");
            for (label, a, b, r) in rows {
                println!("{label},{a},{b},{r}");
            }
        }
    }
    Ok(())
}

fn cmd_fit(
    dataset: DatasetArg,
    path: Option<PathBuf>,
    counts: Option<String>,
    ranges: Option<String>,
    sigma_levels: Option<String>,
    jitter: Option<f64>,
    out: PathBuf,
) -> anyhow::Result<()> {
    let kind = match dataset {
        DatasetArg::Synth2d => DatasetKind::Synth2d,
        DatasetArg::Synth3d => DatasetKind::Synth3d,
        DatasetArg::GridCsv => DatasetKind::GridCsv,
    };
    if kind == DatasetKind::GridCsv && path.is_none() {
        return Err(usage("--dataset grid-csv needs --path"));
    }
    let spec = DatasetSpec {
        kind,
        counts: counts.as_deref().map(|t| parse_usize_list(t, "counts")).transpose()?,
        ranges: ranges.as_deref().map(parse_ranges).transpose()?,
        path,
        filter: None,
        full: None,
    };
    let data: GridDataset = runner::build_dataset(&spec, false)?;
    let profile = match kind {
        DatasetKind::Synth2d => MethodProfile::Synth2d,
        DatasetKind::Synth3d => MethodProfile::Synth3d,
        DatasetKind::GridCsv => MethodProfile::SensorGrid,
    };
    let bandwidths = match sigma_levels.as_deref() {
        Some(text) => parse_f64_list(text, "sigma-levels")?,
        None => match default_method("hkrls", profile).map_err(|e| usage(e.to_string()))? {
            MethodSpec::Hkrls { sigma_levels } => sigma_levels,
            _ => unreachable!(),
        },
    };
    if bandwidths.len() != data.axes().len() {
        return Err(usage(format!(
            "--sigma-levels lists {} bandwidths but the dataset has {} axes",
            bandwidths.len(),
            data.axes().len()
        )));
    }
    let kernels = bandwidths
        .iter()
        .map(|&s| hkrls::KernelConfig::gaussian(s))
        .collect::<hkrls::Result<Vec<_>>>()?;
    let model = fit_general(&data, &kernels, jitter)?;
    save_model(&model, &out)?;
    let times: Vec<String> = model
        .level_times()
        .iter()
        .map(|t| format!("{t:.4}"))
        .collect();
    println!(
        "fitted {} axes ({} samples); level seconds [{}]; model written to {}",
        data.axes().len(),
        data.values().len(),
        times.join(", "),
        out.display()
    );
    Ok(())
}

fn cmd_predict(model_path: &PathBuf, query: &str) -> anyhow::Result<()> {
    let model = load_model(model_path)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let coords = parse_f64_list(query, "query")?;
    if coords.len() != model.axis_count() {
        return Err(usage(format!(
            "query has {} coordinates but the model expects {} (one per axis)",
            coords.len(),
            model.axis_count()
        )));
    }
    let value = predict_general(&model, &coords)?;
    println!("{value}");
    Ok(())
}

fn real_main() -> anyhow::Result<()> {
    env_logger::init();
    let cli = Cli::parse();
    match cli.command {
        Command::Synth2d(args) => {
            let cfg = experiment_from_args(DatasetKind::Synth2d, &args, None, None)?;
            let outcome = runner::run_experiment(&cfg, false)?;
            finish_experiment(outcome, args.format)
        }
        Command::Synth3d { args, full } => {
            let cfg = experiment_from_args(DatasetKind::Synth3d, &args, None, None)?;
            let outcome = runner::run_experiment(&cfg, full)?;
            finish_experiment(outcome, args.format)
        }
        Command::GridCsv {
            args,
            path,
            filter_variance,
            filter_size,
        } => {
            let filter = match (filter_variance, filter_size) {
                (Some(variance), Some(size)) => Some(FilterConfig { variance, size }),
                (None, None) => None,
                _ => {
                    return Err(usage(
                        "--filter-variance and --filter-size must be given together",
                    ))
                }
            };
            let cfg = experiment_from_args(DatasetKind::GridCsv, &args, Some(path), filter)?;
            let outcome = runner::run_experiment(&cfg, false)?;
            finish_experiment(outcome, args.format)
        }
        Command::Compare {
            preset,
            config,
            list,
            seed,
            out,
            format,
            full,
        } => {
            if list {
                for (name, _) in config::PRESETS {
                    println!("{name}");
                }
                return Ok(());
            }
            let mut cfg = match (&preset, &config) {
                (Some(name), None) => load_preset(name).map_err(|e| usage(format!("{e:#}")))?,
                (None, Some(path)) => {
                    load_config_file(path).map_err(|e| usage(format!("{e:#}")))?
                }
                _ => return Err(usage("compare needs exactly one of --preset or --config")),
            };
            if let Some(seed) = seed {
                cfg.split.seed = seed;
            }
            if let Some(out) = out {
                cfg.output.dir = Some(out);
            }
            let outcome = runner::run_experiment(&cfg, full)?;
            finish_experiment(outcome, format)
        }
        Command::CostTable { m, format } => cmd_cost_table(&m, format),
        Command::Fit {
            dataset,
            path,
            counts,
            ranges,
            sigma_levels,
            jitter,
            out,
        } => cmd_fit(dataset, path, counts, ranges, sigma_levels, jitter, out),
        Command::Predict { model, query } => cmd_predict(&model, &query),
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
