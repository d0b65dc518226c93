//! Experiment configuration: the TOML schema, shipped presets, and the
//! default method tables.
//!
//! All `sigma` values in configs are Gaussian bandwidths (the sigma in
//! `exp(-d^2 / (2 sigma^2))`). The shipped presets derive them from the
//! published kernel variances, so e.g. a 0.3 variance appears as the
//! bandwidth 0.5477...

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hkrls::baselines::BaselineConfig;
use hkrls::kernels::KernelConfig;
use serde::Deserialize;

pub const PRESETS: &[(&str, &str)] = &[
    ("synth2d-paper", include_str!("../presets/synth2d-paper.toml")),
    ("synth3d-paper", include_str!("../presets/synth3d-paper.toml")),
    ("table1-small", include_str!("../presets/table1-small.toml")),
    ("table2-2d-small", include_str!("../presets/table2-2d-small.toml")),
    ("intel-sample", include_str!("../presets/intel-sample.toml")),
    (
        "polyculture-sample",
        include_str!("../presets/polyculture-sample.toml"),
    ),
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub dataset: DatasetSpec,
    pub split: SplitConfig,
    /// Ridge added to every solve; absent means the default trace-scaled
    /// rule.
    pub jitter: Option<f64>,
    /// Timed fit repetitions per method; the fastest is reported.
    #[serde(default = "default_repeat")]
    pub repeat: usize,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(rename = "method", default)]
    pub methods: Vec<MethodSpec>,
}

fn default_repeat() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub counts: Option<Vec<usize>>,
    pub ranges: Option<Vec<[f64; 2]>>,
    pub path: Option<PathBuf>,
    /// Pre-filter applied to two-axis datasets before splitting.
    pub filter: Option<FilterConfig>,
    /// Alternate counts/ranges selected by --full.
    pub full: Option<FullSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Synth2d,
    Synth3d,
    GridCsv,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullSpec {
    pub counts: Vec<usize>,
    pub ranges: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub variance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Indices of the axes to split; absent splits every axis.
    pub axes: Option<Vec<usize>>,
}

fn default_fraction() -> f64 {
    0.8
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Write one residual CSV per method alongside the reports.
    #[serde(default)]
    pub residuals: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodSpec {
    Hkrls { sigma_levels: Vec<f64> },
    Krls { sigma: f64 },
    Skrls { sigma: f64, ald_delta: f64 },
    Swkrls { sigma: f64, window: usize, reg_c: f64 },
    Fbkrls {
        sigma: f64,
        budget: usize,
        lambda: f64,
        #[serde(default)]
        mu: f64,
    },
    Norma {
        sigma: f64,
        window: usize,
        eta: f64,
        lambda: f64,
    },
    Qklms {
        sigma: f64,
        mu: f64,
        epsilon_q: f64,
    },
    Nonstill { a_scale: f64, b_scale: f64 },
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Hkrls { .. } => "hkrls",
            MethodSpec::Krls { .. } => "krls",
            MethodSpec::Skrls { .. } => "skrls",
            MethodSpec::Swkrls { .. } => "swkrls",
            MethodSpec::Fbkrls { .. } => "fbkrls",
            MethodSpec::Norma { .. } => "norma",
            MethodSpec::Qklms { .. } => "qklms",
            MethodSpec::Nonstill { .. } => "nonstill",
        }
    }

    /// The flat-method config, when this spec is not the hierarchic model.
    pub fn baseline(&self) -> Option<BaselineConfig> {
        Some(match *self {
            MethodSpec::Hkrls { .. } => return None,
            MethodSpec::Krls { sigma } => BaselineConfig::FullKrls { sigma },
            MethodSpec::Skrls { sigma, ald_delta } => {
                BaselineConfig::SparseKrls { sigma, ald_delta }
            }
            MethodSpec::Swkrls {
                sigma,
                window,
                reg_c,
            } => BaselineConfig::SlidingWindowKrls {
                sigma,
                window,
                reg_c,
            },
            MethodSpec::Fbkrls {
                sigma,
                budget,
                lambda,
                mu,
            } => BaselineConfig::FixedBudgetKrls {
                sigma,
                budget,
                lambda,
                mu,
            },
            MethodSpec::Norma {
                sigma,
                window,
                eta,
                lambda,
            } => BaselineConfig::Norma {
                sigma,
                window,
                eta,
                lambda,
            },
            MethodSpec::Qklms {
                sigma,
                mu,
                epsilon_q,
            } => BaselineConfig::Qklms {
                sigma,
                mu,
                epsilon_q,
            },
            MethodSpec::Nonstill { a_scale, b_scale } => {
                BaselineConfig::NonstillKrls { a_scale, b_scale }
            }
        })
    }

    pub fn hierarchic_kernels(&self) -> Option<anyhow::Result<Vec<KernelConfig>>> {
        match self {
            MethodSpec::Hkrls { sigma_levels } => Some(
                sigma_levels
                    .iter()
                    .map(|&s| KernelConfig::gaussian(s).map_err(Into::into))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// One-line parameter echo for reports (no commas: it lands in CSV).
    pub fn echo(&self) -> String {
        match self {
            MethodSpec::Hkrls { sigma_levels } => {
                let levels: Vec<String> = sigma_levels.iter().map(|s| format!("{s:.4}")).collect();
                format!("sigma_levels=[{}]", levels.join(" "))
            }
            MethodSpec::Krls { sigma } => format!("sigma={sigma} (assumed default)"),
            MethodSpec::Skrls { sigma, ald_delta } => {
                format!("sigma={sigma} ald_delta={ald_delta}")
            }
            MethodSpec::Swkrls {
                sigma,
                window,
                reg_c,
            } => format!("sigma={sigma} window={window} reg_c={reg_c}"),
            MethodSpec::Fbkrls {
                sigma,
                budget,
                lambda,
                mu,
            } => format!("sigma={sigma} budget={budget} lambda={lambda} mu={mu}"),
            MethodSpec::Norma {
                sigma,
                window,
                eta,
                lambda,
            } => format!("sigma={sigma} window={window} eta={eta} lambda={lambda}"),
            MethodSpec::Qklms {
                sigma,
                mu,
                epsilon_q,
            } => format!("sigma={sigma} mu={mu} epsilon_q={epsilon_q}"),
            MethodSpec::Nonstill { a_scale, b_scale } => {
                format!("a_scale={a_scale} b_scale={b_scale}")
            }
        }
    }
}

/// Hyperparameter profile used when methods are requested by bare name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodProfile {
    Synth2d,
    Synth3d,
    SensorGrid,
}

/// Default spec for a method name under a profile. Bandwidths are square
/// roots of the published per-profile kernel variances.
pub fn default_method(name: &str, profile: MethodProfile) -> anyhow::Result<MethodSpec> {
    let rt = |v: f64| v.sqrt();
    let spec = match (name, profile) {
        ("hkrls", MethodProfile::Synth2d) => MethodSpec::Hkrls {
            sigma_levels: vec![1.0, rt(0.3)],
        },
        ("hkrls", MethodProfile::Synth3d) => MethodSpec::Hkrls {
            sigma_levels: vec![1.0, rt(0.3), 1.0],
        },
        ("hkrls", MethodProfile::SensorGrid) => MethodSpec::Hkrls {
            sigma_levels: vec![1.0, rt(1.5)],
        },
        ("krls", _) => MethodSpec::Krls { sigma: 1.0 },
        ("skrls", MethodProfile::Synth2d) => MethodSpec::Skrls {
            sigma: 1.0,
            ald_delta: 0.01,
        },
        ("skrls", MethodProfile::Synth3d) => MethodSpec::Skrls {
            sigma: 1.0,
            ald_delta: 0.99,
        },
        ("skrls", MethodProfile::SensorGrid) => MethodSpec::Skrls {
            sigma: rt(3.5),
            ald_delta: 0.2,
        },
        ("swkrls", MethodProfile::Synth2d) => MethodSpec::Swkrls {
            sigma: 1.0,
            window: 1000,
            reg_c: 0.01,
        },
        ("swkrls", MethodProfile::Synth3d) => MethodSpec::Swkrls {
            sigma: 1.0,
            window: 300,
            reg_c: 0.01,
        },
        ("swkrls", MethodProfile::SensorGrid) => MethodSpec::Swkrls {
            sigma: rt(3.5),
            window: 1000,
            reg_c: 0.01,
        },
        ("fbkrls", MethodProfile::Synth2d) => MethodSpec::Fbkrls {
            sigma: 1.0,
            budget: 800,
            lambda: 0.1,
            mu: 0.0,
        },
        ("fbkrls", MethodProfile::Synth3d) => MethodSpec::Fbkrls {
            sigma: rt(0.5),
            budget: 600,
            lambda: 0.01,
            mu: 0.03,
        },
        ("fbkrls", MethodProfile::SensorGrid) => MethodSpec::Fbkrls {
            sigma: rt(3.5),
            budget: 500,
            lambda: 0.01,
            mu: 0.03,
        },
        ("norma", MethodProfile::Synth2d) => MethodSpec::Norma {
            sigma: 1.0,
            window: 13_920,
            eta: 0.02,
            lambda: 1e-4,
        },
        ("norma", MethodProfile::Synth3d) => MethodSpec::Norma {
            sigma: 1.0,
            window: 10_000,
            eta: 0.005,
            lambda: 1e-7,
        },
        ("norma", MethodProfile::SensorGrid) => MethodSpec::Norma {
            sigma: rt(3.5),
            window: 4160,
            eta: 0.04,
            lambda: 1e-6,
        },
        ("qklms", MethodProfile::Synth2d) => MethodSpec::Qklms {
            sigma: 1.0,
            mu: 0.15,
            epsilon_q: 1e-6,
        },
        ("qklms", MethodProfile::Synth3d) => MethodSpec::Qklms {
            sigma: rt(0.5),
            mu: 0.03,
            epsilon_q: 5e-4,
        },
        ("qklms", MethodProfile::SensorGrid) => MethodSpec::Qklms {
            sigma: rt(3.5),
            mu: 0.15,
            epsilon_q: 1e-6,
        },
        ("nonstill", _) => MethodSpec::Nonstill {
            a_scale: 1.0,
            b_scale: 1.0,
        },
        (other, _) => bail!(
            "unknown method '{other}' (expected one of hkrls, krls, skrls, swkrls, fbkrls, norma, qklms, nonstill)"
        ),
    };
    Ok(spec)
}

/// Load a named embedded preset.
pub fn load_preset(name: &str) -> anyhow::Result<ExperimentConfig> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .with_context(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            format!("unknown preset '{name}'; available: {}", names.join(", "))
        })?;
    parse_config(text).with_context(|| format!("preset '{name}'"))
}

/// Load a config from a TOML file.
pub fn load_config_file(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("config {}", path.display()))
}

fn parse_config(text: &str) -> anyhow::Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text)?;
    validate(&cfg)?;
    Ok(cfg)
}

/// Structural validation beyond what the type system enforces.
pub fn validate(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    if cfg.methods.is_empty() {
        bail!("config lists no methods");
    }
    if !(cfg.split.fraction > 0.0 && cfg.split.fraction < 1.0) {
        bail!("split.fraction must lie in (0, 1)");
    }
    if cfg.repeat == 0 {
        bail!("repeat must be at least 1");
    }
    match cfg.dataset.kind {
        DatasetKind::GridCsv => {
            let path = cfg
                .dataset
                .path
                .as_ref()
                .context("grid-csv dataset needs a path")?;
            if resolve_data_path(path).is_none() {
                bail!("dataset file {} does not exist", path.display());
            }
        }
        DatasetKind::Synth2d | DatasetKind::Synth3d => {
            let want = if cfg.dataset.kind == DatasetKind::Synth2d { 2 } else { 3 };
            if let Some(counts) = &cfg.dataset.counts {
                if counts.len() != want {
                    bail!("dataset.counts must list {want} entries");
                }
            }
            if let Some(ranges) = &cfg.dataset.ranges {
                if ranges.len() != want {
                    bail!("dataset.ranges must list {want} entries");
                }
            }
        }
    }
    Ok(())
}

/// Resolve a dataset path: as given (absolute or cwd-relative), then
/// relative to the repository root the binary was built in. The fallback
/// keeps the shipped presets usable from any working directory.
pub fn resolve_data_path(path: &Path) -> Option<PathBuf> {
    if path.exists() {
        return Some(path.to_path_buf());
    }
    if path.is_relative() {
        let repo_root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
        let candidate = repo_root.join(path);
        if candidate.exists() {
            return Some(candidate);
        }
    }
    None
}
