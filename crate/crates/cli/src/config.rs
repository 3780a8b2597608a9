use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use ssr_telescopy::SourceParams;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Table1,
    Fig2,
    Teleport,
    Estimate,
    Optimize,
    Bound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// Joint (|g|, θ) fit from in-phase and quadrature data.
    #[default]
    Joint,
    /// θ alone at known |g| from quadrature data.
    ThetaOnly,
}

/// Settings that may come from flags or from a JSON config file.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    /// Ancilla family name, or a path to a custom-spec JSON file.
    #[arg(long)]
    pub ancilla: Option<String>,
    /// Ancilla photon number N (simplex dimension for `optimize`).
    #[arg(long)]
    pub photons: Option<usize>,
    /// Visibility modulus |g|.
    #[arg(long)]
    pub g: Option<f64>,
    /// Visibility phase θ.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Mean source photon number per time bin.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Trials per setting for `estimate`.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Monte Carlo repetitions for `estimate`.
    #[arg(long)]
    pub repetitions: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Largest N plotted by `fig2`.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Mean ancilla photon number for `bound`.
    #[arg(long)]
    pub mean_photons: Option<f64>,
    /// Two-mode squeezing parameter.
    #[arg(long)]
    pub r: Option<f64>,
    /// Coherent amplitude |α|.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub fit: Option<FitKind>,
}

impl Overrides {
    /// Fields set in `self` win over `base`.
    pub fn over(self, base: Overrides) -> Overrides {
        Overrides {
            ancilla: self.ancilla.or(base.ancilla),
            photons: self.photons.or(base.photons),
            g: self.g.or(base.g),
            theta: self.theta.or(base.theta),
            epsilon: self.epsilon.or(base.epsilon),
            samples: self.samples.or(base.samples),
            repetitions: self.repetitions.or(base.repetitions),
            seed: self.seed.or(base.seed),
            format: self.format.or(base.format),
            out: self.out.or(base.out),
            n_max: self.n_max.or(base.n_max),
            mean_photons: self.mean_photons.or(base.mean_photons),
            r: self.r.or(base.r),
            alpha: self.alpha.or(base.alpha),
            fit: self.fit.or(base.fit),
        }
    }

    pub fn from_file(path: &Path) -> Result<Overrides> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CliError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub ancilla: String,
    pub photons: usize,
    pub source: SourceParams,
    pub samples: u64,
    pub repetitions: u64,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub n_max: usize,
    pub mean_photons: Option<f64>,
    pub r: f64,
    pub alpha: f64,
    pub fit: FitKind,
}

pub const MAX_FIG2_N: usize = 30;

impl RunConfig {
    /// Apply defaults to the merged overrides and validate.
    pub fn resolve(command: CommandKind, o: Overrides) -> Result<RunConfig> {
        let default_format = match command {
            CommandKind::Table1 | CommandKind::Fig2 => Format::Csv,
            _ => Format::Json,
        };
        let cfg = RunConfig {
            command,
            ancilla: o.ancilla.unwrap_or_else(|| "klm".into()),
            photons: o.photons.unwrap_or(4),
            source: SourceParams {
                epsilon: o.epsilon.unwrap_or(1e-3),
                g_mod: o.g.unwrap_or(0.7),
                theta: o.theta.unwrap_or(0.3),
            },
            samples: o.samples.unwrap_or(100_000),
            repetitions: o.repetitions.unwrap_or(200),
            seed: o.seed.unwrap_or(0),
            format: o.format.unwrap_or(default_format),
            out: o.out,
            n_max: o.n_max.unwrap_or(MAX_FIG2_N),
            mean_photons: o.mean_photons,
            r: o.r.unwrap_or(1.0),
            alpha: o.alpha.unwrap_or(1.0),
            fit: o.fit.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        if self.format == Format::Svg && self.command != CommandKind::Fig2 {
            return Err(CliError::Validation("svg output is only available for fig2".into()));
        }
        if self.command == CommandKind::Fig2 && !(1..=MAX_FIG2_N).contains(&self.n_max) {
            return Err(CliError::Validation(format!(
                "n-max must lie in 1..={MAX_FIG2_N}, got {}",
                self.n_max
            )));
        }
        if self.photons == 0 {
            return Err(CliError::Validation("photons must be at least 1".into()));
        }
        for (name, v) in [("r", self.r), ("alpha", self.alpha)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Validation(format!("{name} must be >= 0, got {v}")));
            }
        }
        if let Some(m) = self.mean_photons {
            if !(m.is_finite() && m >= 0.0) {
                return Err(CliError::Validation(format!("mean-photons must be >= 0, got {m}")));
            }
        }
        if self.command == CommandKind::Estimate && self.repetitions < 2 {
            return Err(CliError::Validation("repetitions must be at least 2".into()));
        }
        Ok(())
    }
}
