//! Experiment execution: dataset construction, splitting, per-method timed
//! fits, validation-error evaluation, and report emission.
//!
//! Methods run sequentially so their timings do not interfere; the
//! validation predictions of flat models are spread across worker threads,
//! capped by the HKLS_THREADS environment variable. Each point's
//! prediction is computed independently, so thread count never changes the
//! output.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use hkrls::baselines;
use hkrls::datasets::{
    gaussian_filter_2d, load_grid_csv, make_grid, restrict, split_axes_selective, GridDataset,
    Part, SplitSpec,
};
use hkrls::hierarchy::{fit_general, predict_grid};
use hkrls::metrics::{error_metrics, timed, BenchReport, ErrorSummary};
use hkrls::solver::{krls_predict, KrlsModel};

use crate::config::{DatasetKind, DatasetSpec, ExperimentConfig, FilterConfig, MethodSpec};

/// Worker cap for validation predictions.
pub fn worker_count() -> usize {
    std::env::var("HKLS_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Evaluate a flat model at every point, in parallel chunks.
pub fn predict_points(model: &KrlsModel, points: &[Vec<f64>]) -> anyhow::Result<Vec<f64>> {
    let mut out = vec![0.0_f64; points.len()];
    if points.is_empty() {
        return Ok(out);
    }
    let workers = worker_count().min(points.len());
    if workers <= 1 {
        for (o, p) in out.iter_mut().zip(points) {
            *o = krls_predict(model, p)?[0];
        }
        return Ok(out);
    }
    let chunk = points.len().div_ceil(workers);
    let results: Vec<hkrls::Result<()>> = std::thread::scope(|scope| {
        let handles: Vec<_> = out
            .chunks_mut(chunk)
            .zip(points.chunks(chunk))
            .map(|(out_chunk, point_chunk)| {
                scope.spawn(move || -> hkrls::Result<()> {
                    for (o, p) in out_chunk.iter_mut().zip(point_chunk) {
                        *o = krls_predict(model, p)?[0];
                    }
                    Ok(())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for r in results {
        r?;
    }
    Ok(out)
}

/// The synthetic generators, by axis count.
fn synth_value(kind: DatasetKind, p: &[f64]) -> f64 {
    match kind {
        DatasetKind::Synth2d => hkrls::datasets::synth_2d(p[0], p[1]),
        DatasetKind::Synth3d => hkrls::datasets::synth_3d(p[0], p[1], p[2]),
        DatasetKind::GridCsv => unreachable!(),
    }
}

const SYNTH2D_RANGES: [[f64; 2]; 2] = [[0.1, 4.0 * std::f64::consts::PI], [0.1, 8.0 * std::f64::consts::PI]];
const SYNTH3D_RANGES: [[f64; 2]; 3] = [
    [0.1, 4.0 * std::f64::consts::PI],
    [0.1, 8.0 * std::f64::consts::PI],
    [0.1, 12.0 * std::f64::consts::PI],
];

/// Build the experiment dataset, applying the optional pre-filter.
pub fn build_dataset(spec: &DatasetSpec, full: bool) -> anyhow::Result<GridDataset> {
    let (counts, ranges) = if full {
        let fs = spec
            .full
            .as_ref()
            .context("--full requested but the configuration has no [dataset.full] block")?;
        (Some(fs.counts.clone()), Some(fs.ranges.clone()))
    } else {
        (spec.counts.clone(), spec.ranges.clone())
    };
    let data = match spec.kind {
        DatasetKind::GridCsv => {
            let path = spec.path.as_ref().context("grid-csv dataset needs a path")?;
            let resolved = crate::config::resolve_data_path(path)
                .with_context(|| format!("dataset file {} not found", path.display()))?;
            load_grid_csv(&resolved)?
        }
        kind => {
            let defaults: Vec<[f64; 2]> = match kind {
                DatasetKind::Synth2d => SYNTH2D_RANGES.to_vec(),
                DatasetKind::Synth3d => SYNTH3D_RANGES.to_vec(),
                DatasetKind::GridCsv => unreachable!(),
            };
            let default_counts: Vec<usize> = match kind {
                DatasetKind::Synth2d => vec![145, 150],
                DatasetKind::Synth3d => vec![40, 40, 30],
                DatasetKind::GridCsv => unreachable!(),
            };
            let counts = counts.unwrap_or(default_counts);
            let ranges = ranges.unwrap_or(defaults);
            let pairs: Vec<(f64, f64)> = ranges.iter().map(|r| (r[0], r[1])).collect();
            let axes = make_grid(&pairs, &counts)?;
            GridDataset::from_fn(axes, |p| synth_value(kind, p))?
        }
    };
    match spec.filter {
        Some(FilterConfig { variance, size }) => {
            if data.axes().len() != 2 {
                bail!("the pre-filter applies to two-axis datasets only");
            }
            let filtered = gaussian_filter_2d(&data.values_matrix()?, variance, size)?;
            Ok(data.with_values_matrix(&filtered)?)
        }
        None => Ok(data),
    }
}

/// Validation cells (points + actual values) of a split, first-axis-fastest
/// over the validation indices — the same order `predict_grid` emits.
pub fn validation_cells(data: &GridDataset, split: &SplitSpec) -> (Vec<Vec<f64>>, Vec<f64>) {
    let idx_lists: Vec<&[usize]> = split
        .axes
        .iter()
        .map(|ax| ax.indices(Part::Validation))
        .collect();
    let lens: Vec<usize> = idx_lists.iter().map(|l| l.len()).collect();
    let total: usize = lens.iter().product();
    let mut coords = vec![0usize; lens.len()];
    let mut full = vec![0usize; lens.len()];
    let mut points = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        for (d, &c) in coords.iter().enumerate() {
            full[d] = idx_lists[d][c];
        }
        points.push(
            full.iter()
                .enumerate()
                .map(|(d, &i)| data.axes()[d][i])
                .collect::<Vec<f64>>(),
        );
        values.push(data.value_at(&full));
        for d in 0..coords.len() {
            coords[d] += 1;
            if coords[d] < lens[d] {
                break;
            }
            coords[d] = 0;
        }
    }
    (points, values)
}

fn validation_axes(data: &GridDataset, split: &SplitSpec) -> Vec<Vec<f64>> {
    split
        .axes
        .iter()
        .enumerate()
        .map(|(d, ax)| {
            ax.indices(Part::Validation)
                .iter()
                .map(|&i| data.axes()[d][i])
                .collect()
        })
        .collect()
}

/// Small synthetic fit of the same method family, discarded; warms the
/// allocator and code paths before the timed run.
fn warmup(method: &MethodSpec, n_axes: usize) -> anyhow::Result<()> {
    let counts = vec![5usize; n_axes.max(2)];
    let ranges: Vec<(f64, f64)> = counts.iter().map(|_| (0.0, 4.0)).collect();
    let axes = make_grid(&ranges, &counts)?;
    let data = GridDataset::from_fn(axes, |p| p.iter().sum::<f64>().sin())?;
    match method {
        MethodSpec::Hkrls { .. } => {
            let kernels = vec![hkrls::KernelConfig::gaussian(1.0)?; data.axes().len()];
            let _ = fit_general(&data, &kernels, None)?;
        }
        other => {
            // flat warmups always use two-axis samples so the space-time
            // family stays valid
            let axes = make_grid(&[(0.0, 4.0), (0.0, 4.0)], &[5, 5])?;
            let tiny = GridDataset::from_fn(axes, |p| (p[0] + p[1]).sin())?;
            let samples = tiny.flatten_samples();
            let cfg = other.baseline().expect("non-hierarchic method");
            let _ = baselines::fit(&samples, &cfg, None)?;
        }
    }
    Ok(())
}

/// Everything run_experiment produces besides the files.
pub struct ExperimentOutcome {
    pub reports: Vec<BenchReport>,
    /// (method name, error message) for methods that failed; the rest of
    /// the run continues.
    pub failures: Vec<(String, String)>,
}

struct MethodEvaluation {
    seconds: f64,
    errors: ErrorSummary,
    predicted: Vec<f64>,
}

fn run_method(
    method: &MethodSpec,
    train: &GridDataset,
    shuffled: &[(Vec<f64>, f64)],
    va_points: &[Vec<f64>],
    va_axes: &[Vec<f64>],
    actual: &[f64],
    train_max: f64,
    jitter: Option<f64>,
    repeat: usize,
) -> anyhow::Result<MethodEvaluation> {
    warmup(method, train.axes().len())?;
    match method {
        MethodSpec::Hkrls { .. } => {
            let kernels = method.hierarchic_kernels().unwrap()?;
            let mut best = f64::INFINITY;
            let mut model = None;
            for _ in 0..repeat {
                let (fitted, secs) = timed(|| fit_general(train, &kernels, jitter));
                best = best.min(secs);
                model = Some(fitted?);
            }
            let model = model.unwrap();
            let predicted = predict_grid(&model, va_axes)?;
            let errors = error_metrics(&predicted, actual, train_max)?;
            Ok(MethodEvaluation {
                seconds: best,
                errors,
                predicted,
            })
        }
        other => {
            let cfg = other.baseline().expect("non-hierarchic method");
            let mut best = f64::INFINITY;
            let mut model = None;
            for _ in 0..repeat {
                let (fitted, secs) = timed(|| baselines::fit(shuffled, &cfg, jitter));
                best = best.min(secs);
                model = Some(fitted?);
            }
            let model = model.unwrap();
            let predicted = predict_points(&model, va_points)?;
            let errors = error_metrics(&predicted, actual, train_max)?;
            Ok(MethodEvaluation {
                seconds: best,
                errors,
                predicted,
            })
        }
    }
}

/// Run every configured method: build the dataset, split it, fit each
/// method under the timer, and evaluate on the validation grid. Failures
/// are collected per method; the remaining methods still run and report.
pub fn run_experiment(cfg: &ExperimentConfig, full: bool) -> anyhow::Result<ExperimentOutcome> {
    if let Some(name) = &cfg.name {
        log::info!("running experiment '{name}'");
    }
    let data = build_dataset(&cfg.dataset, full)?;
    let n_axes = data.axes().len();
    let mask: Option<Vec<bool>> = cfg.split.axes.as_ref().map(|list| {
        let mut m = vec![false; n_axes];
        for &a in list {
            if a < n_axes {
                m[a] = true;
            }
        }
        m
    });
    if let (Some(list), Some(m)) = (cfg.split.axes.as_ref(), mask.as_ref()) {
        if list.iter().any(|&a| a >= m.len()) {
            bail!("split.axes lists an axis index beyond the dataset's {n_axes} axes");
        }
    }
    let split = split_axes_selective(
        data.axes(),
        cfg.split.fraction,
        cfg.split.seed,
        mask.as_deref(),
    )?;
    let train = restrict(&data, &split, Part::Train)?;
    let (va_points, actual) = validation_cells(&data, &split);
    let va_axes = validation_axes(&data, &split);
    let train_max = train
        .values()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));

    // canonical flatten of the training block, then the seeded shuffle
    // consumed by the online methods
    let mut shuffled = train.flatten_samples();
    baselines::shuffle_samples(&mut shuffled, cfg.split.seed);

    let train_counts: Vec<usize> = train.axes().iter().map(Vec::len).collect();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut residuals: Vec<(String, Vec<f64>)> = Vec::new();
    for method in &cfg.methods {
        match run_method(
            method,
            &train,
            &shuffled,
            &va_points,
            &va_axes,
            &actual,
            train_max,
            cfg.jitter,
            cfg.repeat,
        ) {
            Ok(eval) => {
                let echo = format!("{}; order=shuffled(seed {})", method.echo(), cfg.split.seed);
                reports.push(BenchReport::new(
                    method.name(),
                    eval.seconds,
                    eval.errors,
                    echo,
                    train_counts.clone(),
                    cfg.split.seed,
                ));
                residuals.push((method.name().to_string(), eval.predicted));
            }
            Err(e) => {
                log::error!("method {} failed: {e:#}", method.name());
                failures.push((method.name().to_string(), format!("{e:#}")));
            }
        }
    }

    if let Some(dir) = &cfg.output.dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        write_csv(&reports, &dir.join("report.csv"))?;
        write_markdown(&reports, &dir.join("report.md"))?;
        if cfg.output.residuals {
            for (name, predicted) in &residuals {
                write_residuals(
                    &va_points,
                    &actual,
                    predicted,
                    &dir.join(format!("residuals-{name}.csv")),
                )?;
            }
        }
    }
    Ok(ExperimentOutcome { reports, failures })
}

fn write_csv(reports: &[BenchReport], path: &Path) -> anyhow::Result<()> {
    let mut text = String::new();
    writeln!(text, "{}", BenchReport::csv_header())?;
    for r in reports {
        writeln!(text, "{}", r.csv_row())?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn write_markdown(reports: &[BenchReport], path: &Path) -> anyhow::Result<()> {
    std::fs::write(path, markdown_table(reports))?;
    Ok(())
}

/// Markdown comparison table, mirroring the benchmark-table column order.
pub fn markdown_table(reports: &[BenchReport]) -> String {
    let mut text = String::new();
    text.push_str(BenchReport::markdown_header());
    text.push('\n');
    for r in reports {
        text.push_str(&r.markdown_row());
        text.push('\n');
    }
    text
}

pub fn csv_table(reports: &[BenchReport]) -> String {
    let mut text = String::from(BenchReport::csv_header());
    text.push('\n');
    for r in reports {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    text
}

fn write_residuals(
    points: &[Vec<f64>],
    actual: &[f64],
    predicted: &[f64],
    path: &Path,
) -> anyhow::Result<()> {
    let mut text = String::new();
    let n_axes = points.first().map_or(0, Vec::len);
    let coords: Vec<String> = (0..n_axes).map(|d| format!("x{d}")).collect();
    writeln!(text, "{},actual,predicted,abs_error", coords.join(","))?;
    for ((p, a), pr) in points.iter().zip(actual).zip(predicted) {
        let coord_text: Vec<String> = p.iter().map(|c| format!("{c}")).collect();
        writeln!(
            text,
            "{},{},{},{}",
            coord_text.join(","),
            a,
            pr,
            (pr - a).abs()
        )?;
    }
    std::fs::write(path, text)?;
    Ok(())
}
