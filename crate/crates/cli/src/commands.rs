use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use ssr_telescopy::ancilla::{self, build, closed_ratio, squeezing_for_mean};
use ssr_telescopy::bounds::{bound_max_photons, bound_mean_photons, maximize_h_simplex};
use ssr_telescopy::estimation::monte_carlo;
use ssr_telescopy::qfi::{numeric_ratio, qfi_ratio_closed};
use ssr_telescopy::teleport::{failure_probability, optimal_fi, sector_states, simulate_pipeline};
use ssr_telescopy::{
    AncillaKind, AncillaSpec, BuildParams, McMode, MonteCarloConfig, OptimizerConfig, SectorState, C64,
};

use crate::config::{CommandKind, FitKind, Format, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{csv, flatten, fmt_num, svg_plot, Series};

/// Report layout shared by the JSON commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub config: RunConfig,
    pub results: T,
}

/// Resolve `--ancilla`: a family name or a custom JSON file.
pub fn resolve_ancilla(cfg: &RunConfig) -> Result<AncillaSpec> {
    if cfg.ancilla.ends_with(".json") {
        let path = Path::new(&cfg.ancilla);
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        return Ok(ancilla::custom_from_json(&text)?);
    }
    let kind: AncillaKind = cfg.ancilla.parse()?;
    Ok(build(
        kind,
        &BuildParams {
            photons: cfg.photons,
            squeezing: cfg.r,
            alpha: cfg.alpha,
        },
    )?)
}

/// Rendered output of a command.
pub fn execute(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    match cfg.command {
        CommandKind::Table1 => table1(cfg),
        CommandKind::Fig2 => fig2(cfg),
        CommandKind::Teleport => emit(cfg, teleport(cfg)?),
        CommandKind::Estimate => emit(cfg, estimate(cfg)?),
        CommandKind::Optimize => emit(cfg, optimize(cfg)?),
        CommandKind::Bound => emit(cfg, bound(cfg)?),
    }
}

fn emit<T: Serialize>(cfg: &RunConfig, results: T) -> Result<String> {
    let report = Report {
        config: cfg.clone(),
        results,
    };
    match cfg.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report)?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let v = serde_json::to_value(&report.results)?;
            let rows: Vec<Vec<String>> = flatten(&v).into_iter().map(|(k, v)| vec![k, v]).collect();
            Ok(csv(&["key", "value"], &rows))
        }
        Format::Svg => Err(CliError::Validation("svg output is only available for fig2".into())),
    }
}

fn yes_no(b: bool) -> String {
    if b { "yes" } else { "no" }.into()
}

/// One Table I row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub kind: String,
    pub n: usize,
    pub closed_ratio: f64,
    pub numeric_ratio: f64,
    pub bound: f64,
    pub nonlocal: bool,
    pub phase_reference: bool,
}

/// Build parameters for a family at photon number (or mean photon number) N.
/// Squeezed and coherent families are set to mean total photon number N.
pub fn table_params(kind: AncillaKind, n: usize) -> BuildParams {
    let nf = n as f64;
    match kind {
        AncillaKind::Tmsv => BuildParams {
            photons: n,
            squeezing: squeezing_for_mean(nf),
            alpha: 0.0,
        },
        AncillaKind::CoherentPair => BuildParams {
            photons: n,
            squeezing: 0.0,
            alpha: (nf / 2.0).sqrt(),
        },
        AncillaKind::TmsvWithReference => BuildParams {
            photons: n,
            squeezing: squeezing_for_mean(nf / 2.0),
            alpha: (nf / 4.0).sqrt(),
        },
        _ => BuildParams::photons(n),
    }
}

fn is_continuous(kind: AncillaKind) -> bool {
    matches!(
        kind,
        AncillaKind::Tmsv | AncillaKind::CoherentPair | AncillaKind::TmsvWithReference
    )
}

/// Rows for every catalog family that exists at photon number `n`.
pub fn table1_rows(cfg: &RunConfig) -> Result<Vec<Table1Row>> {
    let n = cfg.photons;
    let mut rows = Vec::new();
    for kind in AncillaKind::ALL {
        if kind == AncillaKind::Custom {
            continue;
        }
        let bp = table_params(kind, n);
        let closed = match closed_ratio(kind, &bp) {
            Ok(v) => v,
            Err(ssr_telescopy::Error::InvalidParameter(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        let spec = build(kind, &bp)?;
        let (numeric, _) = numeric_ratio(&spec, &cfg.source)?;
        // Fixed-size families report their own photon number.
        let (n_row, bound) = if is_continuous(kind) {
            (n, bound_mean_photons(n as f64)?)
        } else {
            let top = spec.amplitudes.keys().map(|&(a, b)| a + b).max().unwrap_or(0);
            (top, bound_max_photons(top))
        };
        let flags = kind.resources(n_row);
        rows.push(Table1Row {
            kind: kind.name().into(),
            n: n_row,
            closed_ratio: closed,
            numeric_ratio: numeric,
            bound,
            nonlocal: flags.nonlocal,
            phase_reference: flags.phase_reference,
        });
    }
    Ok(rows)
}

fn table1(cfg: &RunConfig) -> Result<String> {
    let rows = table1_rows(cfg)?;
    match cfg.format {
        Format::Csv => {
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.kind.clone(),
                        r.n.to_string(),
                        fmt_num(r.closed_ratio),
                        fmt_num(r.numeric_ratio),
                        fmt_num(r.bound),
                        yes_no(r.nonlocal),
                        yes_no(r.phase_reference),
                    ]
                })
                .collect();
            Ok(csv(
                &["kind", "N", "closed_ratio", "numeric_ratio", "bound", "NL", "PR"],
                &body,
            ))
        }
        _ => emit(cfg, rows),
    }
}

/// Families drawn against N in the figure.
pub const FIG2_KINDS: [AncillaKind; 5] = [
    AncillaKind::NCopySpe,
    AncillaKind::Klm,
    AncillaKind::TriIntensity,
    AncillaKind::TriAmplitude,
    AncillaKind::OptimalKlm,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig2Row {
    pub n: usize,
    /// Ratios in the order of [`FIG2_KINDS`]; `None` where undefined.
    pub ratios: Vec<Option<f64>>,
    pub bound: f64,
}

pub fn fig2_rows(n_max: usize) -> Result<Vec<Fig2Row>> {
    (1..=n_max)
        .map(|n| {
            let ratios = FIG2_KINDS
                .iter()
                .map(|&k| match closed_ratio(k, &BuildParams::photons(n)) {
                    Ok(v) => Ok(Some(v)),
                    Err(ssr_telescopy::Error::InvalidParameter(_)) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(Fig2Row {
                n,
                ratios,
                bound: bound_max_photons(n),
            })
        })
        .collect()
}

fn fig2(cfg: &RunConfig) -> Result<String> {
    let rows = fig2_rows(cfg.n_max)?;
    let mut names: Vec<&str> = FIG2_KINDS.iter().map(|k| k.name()).collect();
    names.push("bound");
    match cfg.format {
        Format::Csv => {
            let mut header = vec!["N"];
            header.extend(&names);
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let mut row = vec![r.n.to_string()];
                    row.extend(r.ratios.iter().map(|v| v.map(fmt_num).unwrap_or_default()));
                    row.push(fmt_num(r.bound));
                    row
                })
                .collect();
            Ok(csv(&header, &body))
        }
        Format::Svg => {
            let mut series: Vec<Series> = FIG2_KINDS
                .iter()
                .enumerate()
                .map(|(i, k)| Series {
                    name: k.name().into(),
                    points: rows
                        .iter()
                        .filter_map(|r| r.ratios[i].map(|v| (r.n as f64, v)))
                        .collect(),
                })
                .collect();
            series.push(Series {
                name: "bound".into(),
                points: rows.iter().map(|r| (r.n as f64, r.bound)).collect(),
            });
            Ok(svg_plot("QFI ratio vs ancilla photon number", "N", "ratio", &series))
        }
        Format::Json => emit(cfg, rows),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorRow {
    pub n: usize,
    pub weight: f64,
    pub success: bool,
    pub rho_00: f64,
    pub rho_11: f64,
    pub coherence_re: f64,
    pub coherence_im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeleportResults {
    pub n_total: usize,
    pub qfi_ratio: f64,
    pub fi_ratio: Option<f64>,
    pub fi_ratio_gmod: Option<f64>,
    pub fi_ratio_theta: Option<f64>,
    pub failure_probability: f64,
    pub arrangements: usize,
    /// Largest deviation between simulated and closed-form sector states.
    pub pipeline_deviation: f64,
    pub sectors: Vec<SectorRow>,
}

fn diagonal(spec: &AncillaSpec) -> Result<Vec<C64>> {
    spec.diagonal().ok_or_else(|| {
        CliError::Validation(format!(
            "ancilla `{}` is not diagonal in (n, N-n); teleportation needs a diagonal ancilla",
            spec.kind
        ))
    })
}

fn teleport(cfg: &RunConfig) -> Result<TeleportResults> {
    let spec = resolve_ancilla(cfg)?;
    let f = diagonal(&spec)?;
    let p = cfg.source;
    let sim = simulate_pipeline(&f, &p)?;
    let closed = sector_states(&f, &p)?;
    let mut dev: f64 = 0.0;
    for (a, b) in sim.sectors.iter().zip(&closed) {
        dev = dev.max((a.weight() - b.weight()).abs());
        if let (SectorState::Success(x), SectorState::Success(y)) = (a, b) {
            for i in 0..2 {
                for j in 0..2 {
                    dev = dev.max((x.matrix[i][j] - y.matrix[i][j]).norm());
                }
            }
        }
    }
    let fi = optimal_fi(&f, &p)?;
    let sectors = sim
        .sectors
        .iter()
        .map(|s| match s {
            SectorState::Success(c) => SectorRow {
                n: c.sector,
                weight: c.weight,
                success: true,
                rho_00: c.matrix[0][0].re,
                rho_11: c.matrix[1][1].re,
                coherence_re: c.matrix[0][1].re,
                coherence_im: c.matrix[0][1].im,
            },
            SectorState::Failure { sector, weight } => SectorRow {
                n: *sector,
                weight: *weight,
                success: false,
                rho_00: 0.0,
                rho_11: 0.0,
                coherence_re: 0.0,
                coherence_im: 0.0,
            },
        })
        .collect();
    Ok(TeleportResults {
        n_total: sim.n_total,
        qfi_ratio: qfi_ratio_closed(&spec)?,
        fi_ratio: fi.ratio_theta.or(fi.ratio_gmod),
        fi_ratio_gmod: fi.ratio_gmod,
        fi_ratio_theta: fi.ratio_theta,
        failure_probability: failure_probability(&f),
        arrangements: sim.arrangements.len(),
        pipeline_deviation: dev,
        sectors,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResults {
    pub g_hat: f64,
    pub theta_hat: f64,
    pub covariance: [[f64; 2]; 2],
    pub crb: [[Option<f64>; 2]; 2],
    pub variance_ratio_theta: Option<f64>,
    pub variance_ratio_gmod: Option<f64>,
    pub g_bias: f64,
    pub g_standard_error: f64,
    pub wide_interval: bool,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn estimate(cfg: &RunConfig) -> Result<EstimateResults> {
    let spec = resolve_ancilla(cfg)?;
    let f = diagonal(&spec)?;
    let mc = MonteCarloConfig {
        source: cfg.source,
        trials: cfg.samples,
        repetitions: cfg.repetitions,
        seed: cfg.seed,
        mode: match cfg.fit {
            FitKind::Joint => McMode::Joint,
            FitKind::ThetaOnly => McMode::ThetaOnly,
        },
    };
    let r = monte_carlo(&f, &mc)?;
    Ok(EstimateResults {
        g_hat: r.g_hat,
        theta_hat: r.theta_hat,
        covariance: r.covariance,
        crb: r.crb.map(|row| row.map(finite)),
        variance_ratio_theta: finite(r.ratio),
        variance_ratio_gmod: r.ratio_gmod.and_then(finite),
        g_bias: r.g_bias,
        g_standard_error: r.g_standard_error,
        wide_interval: r.wide_interval,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResults {
    pub k: usize,
    pub value: f64,
    pub distribution: Vec<f64>,
    pub bound: f64,
    pub projected_gradient: f64,
    pub converged: bool,
}

fn optimize(cfg: &RunConfig) -> Result<OptimizeResults> {
    let k = cfg.photons;
    let r = maximize_h_simplex(
        k,
        &OptimizerConfig {
            seed: cfg.seed,
            ..OptimizerConfig::default()
        },
    )?;
    Ok(OptimizeResults {
        k,
        value: r.value,
        distribution: r.distribution.weights().to_vec(),
        bound: (PI / (k as f64 + 2.0)).cos(),
        projected_gradient: r.projected_gradient,
        converged: r.converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResults {
    pub photons: Option<usize>,
    pub max_photon_bound: Option<f64>,
    pub mean_photons: Option<f64>,
    pub mean_photon_bound: Option<f64>,
    pub value: f64,
}

fn bound(cfg: &RunConfig) -> Result<BoundResults> {
    if let Some(m) = cfg.mean_photons {
        let b = bound_mean_photons(m)?;
        return Ok(BoundResults {
            photons: None,
            max_photon_bound: None,
            mean_photons: Some(m),
            mean_photon_bound: Some(b),
            value: b,
        });
    }
    let b = bound_max_photons(cfg.photons);
    Ok(BoundResults {
        photons: Some(cfg.photons),
        max_photon_bound: Some(b),
        mean_photons: None,
        mean_photon_bound: None,
        value: b,
    })
}

/// Parse a JSON report back into its config and untyped results.
pub fn parse_report(text: &str) -> Result<Report<Value>> {
    Ok(serde_json::from_str(text)?)
}
