//! Monte Carlo check of the teleportation Fisher information: sample
//! outcome counts, fit `(|g|, θ)` by maximum likelihood and compare the
//! spread of the estimates with the Cramér–Rao bound.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::C64;
use crate::qfi::{Param, SourceParams};
use crate::teleport::{contrast, optimal_settings_all, sector_states, MeasurementSetting, SectorState};

/// Grid points per axis of the coarse likelihood scan.
pub const GRID_POINTS: usize = 201;
/// Simplex size at which the local refinement stops.
pub const REFINE_TOL: f64 = 1e-6;

/// One per-sector measurement plan; `None` for failure sectors.
pub type Settings = Vec<Option<MeasurementSetting>>;

/// Key of an independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngKey {
    pub seed: u64,
    pub repetition: u64,
    pub setting: u64,
}

impl RngKey {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            repetition: 0,
            setting: 0,
        }
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((self.repetition << 16) | (self.setting & 0xffff));
        rng
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorCounts {
    pub sector: usize,
    pub plus: u64,
    pub minus: u64,
}

/// Outcome counts of `trials` source time bins under one setting plan.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub sectors: Vec<SectorCounts>,
    /// Detections in uninformative sectors.
    pub failures: u64,
    /// Time bins without a source photon.
    pub no_detection: u64,
    pub trials: u64,
    pub key: RngKey,
}

impl OutcomeCounts {
    pub fn detected(&self) -> u64 {
        self.failures + self.sectors.iter().map(|s| s.plus + s.minus).sum::<u64>()
    }
}

/// Category probabilities: no detection, failure, then `(+, -)` per
/// successful sector in the order of `sectors`.
fn category_probs(
    sectors: &[SectorState],
    p: &SourceParams,
    settings: &Settings,
) -> Result<(Vec<f64>, Vec<usize>)> {
    if settings.len() != sectors.len() {
        return Err(Error::Shape(format!(
            "{} settings for {} sectors",
            settings.len(),
            sectors.len()
        )));
    }
    let mut probs = vec![1.0 - p.epsilon, 0.0];
    let mut labels = Vec::new();
    for (s, ms) in sectors.iter().zip(settings) {
        match (s, ms) {
            (SectorState::Success(cs), Some(ms)) => {
                let (x, _, _) = contrast(cs, ms, p);
                let w = p.epsilon * cs.weight / 2.0;
                probs.push(w * (1.0 + x));
                probs.push(w * (1.0 - x));
                labels.push(cs.sector);
            }
            _ => probs[1] += p.epsilon * s.weight(),
        }
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 || probs.iter().any(|&q| !(q >= -1e-15)) {
        return Err(Error::InvalidDistribution(format!(
            "outcome probabilities sum to {total}"
        )));
    }
    Ok((probs, labels))
}

/// Multinomial draw of `trials` outcomes with the default stream of `seed`.
pub fn sample_outcomes(
    f: &[C64],
    p: &SourceParams,
    settings: &Settings,
    trials: u64,
    seed: u64,
) -> Result<OutcomeCounts> {
    sample_outcomes_keyed(f, p, settings, trials, RngKey::new(seed))
}

/// Multinomial draw by conditional binomials on the stream named by `key`.
pub fn sample_outcomes_keyed(
    f: &[C64],
    p: &SourceParams,
    settings: &Settings,
    trials: u64,
    key: RngKey,
) -> Result<OutcomeCounts> {
    p.validate()?;
    let sectors = sector_states(f, p)?;
    let (probs, labels) = category_probs(&sectors, p, settings)?;
    let mut rng = key.rng();
    let mut counts = vec![0u64; probs.len()];
    let mut left = trials;
    let mut mass = 1.0;
    for (i, &q) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() {
            counts[i] = left;
            break;
        }
        let frac = if mass > 0.0 { (q.max(0.0) / mass).clamp(0.0, 1.0) } else { 1.0 };
        let k = Binomial::new(left, frac)
            .map_err(|e| Error::InvalidDistribution(e.to_string()))?
            .sample(&mut rng);
        counts[i] = k;
        left -= k;
        mass -= q;
    }
    Ok(OutcomeCounts {
        sectors: labels
            .iter()
            .enumerate()
            .map(|(j, &n)| SectorCounts {
                sector: n,
                plus: counts[2 + 2 * j],
                minus: counts[3 + 2 * j],
            })
            .collect(),
        failures: counts[1],
        no_detection: counts[0],
        trials,
        key,
    })
}

/// Data from one setting plan, with the plan it was taken under.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub settings: Settings,
    pub counts: OutcomeCounts,
}

/// Which parameters the fit adjusts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FitMode {
    Joint,
    /// θ alone at known `|g|`, searched within `center ± π/2`.
    ThetaOnly { g_mod: f64, center: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub g_mod: f64,
    pub theta: f64,
    pub log_likelihood: f64,
}

struct Likelihood<'a> {
    sectors: Vec<SectorState>,
    data: &'a [Dataset],
}

impl Likelihood<'_> {
    fn eval(&self, g_mod: f64, theta: f64) -> f64 {
        let p = SourceParams {
            epsilon: 1.0,
            g_mod,
            theta,
        };
        let mut ll = 0.0;
        for d in self.data {
            for sc in &d.counts.sectors {
                let (SectorState::Success(cs), Some(ms)) = (&self.sectors[sc.sector], &d.settings[sc.sector]) else {
                    continue;
                };
                let (x, _, _) = contrast(cs, ms, &p);
                ll += sc.plus as f64 * (1.0 + x).max(1e-300).ln()
                    + sc.minus as f64 * (1.0 - x).max(1e-300).ln();
            }
        }
        ll
    }
}

/// Maximum-likelihood `(|g|, θ)` from one or more datasets: coarse grid,
/// then Nelder–Mead refinement. θ is returned in `[0, 2π)` for joint fits.
pub fn mle_fit(data: &[Dataset], f: &[C64], mode: FitMode) -> Result<PointEstimate> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("no data to fit".into()));
    }
    // Sector states only supply |f_n|, |f_{n-1}| and their phase here.
    let sectors = sector_states(f, &SourceParams::new(1.0, 0.0, 0.0)?)?;
    for d in data {
        if d.settings.len() != sectors.len() {
            return Err(Error::Shape(format!(
                "{} settings for {} sectors",
                d.settings.len(),
                sectors.len()
            )));
        }
    }
    let like = Likelihood { sectors, data };
    let n = GRID_POINTS;
    match mode {
        FitMode::Joint => {
            let (mut best, mut at) = (f64::NEG_INFINITY, (0.0, 0.0));
            for i in 0..n {
                let g = i as f64 / n as f64;
                for j in 0..n {
                    let t = 2.0 * PI * j as f64 / n as f64;
                    let v = like.eval(g, t);
                    if v > best {
                        best = v;
                        at = (g, t);
                    }
                }
            }
            let obj = |x: &[f64]| {
                if !(0.0..=1.0).contains(&x[0]) {
                    return f64::INFINITY;
                }
                -like.eval(x[0], x[1])
            };
            let step = [0.5 / n as f64, PI / n as f64];
            let (x, v) = nelder_mead(obj, &[at.0, at.1], &step, REFINE_TOL, 5000);
            Ok(PointEstimate {
                g_mod: x[0],
                theta: x[1].rem_euclid(2.0 * PI),
                log_likelihood: -v,
            })
        }
        FitMode::ThetaOnly { g_mod, center } => {
            let lo = center - PI / 2.0;
            let (mut best, mut at) = (f64::NEG_INFINITY, center);
            for j in 0..n {
                let t = lo + PI * j as f64 / (n - 1) as f64;
                let v = like.eval(g_mod, t);
                if v > best {
                    best = v;
                    at = t;
                }
            }
            let obj = |x: &[f64]| {
                if (x[0] - center).abs() > PI / 2.0 {
                    return f64::INFINITY;
                }
                -like.eval(g_mod, x[0])
            };
            let (x, v) = nelder_mead(obj, &[at], &[PI / n as f64], REFINE_TOL, 2000);
            Ok(PointEstimate {
                g_mod,
                theta: x[0],
                log_likelihood: -v,
            })
        }
    }
}

/// Minimize `f` from `x0` with initial simplex offsets `step`; stops when
/// every vertex lies within `tol` of the best one in each coordinate.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let d = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let mut v = f(&x);
        if !v.is_finite() {
            x[i] = x0[i] - step[i];
            v = f(&x);
        }
        simplex.push((x, v));
    }
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect()
    };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread < tol {
            break;
        }
        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / d as f64;
            }
        }
        let worst = simplex[d].clone();
        let xr = lerp(&centroid, &worst.0, -1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = lerp(&centroid, &worst.0, -2.0);
            let fe = f(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = lerp(&centroid, &worst.0, -0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = lerp(&centroid, &worst.0, 0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.0 = lerp(&best, &v.0, 0.5);
                    v.1 = f(&v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Per-trial Fisher matrix in `(|g|, θ)` of one setting plan.
pub fn fisher_matrix(f: &[C64], p: &SourceParams, settings: &Settings) -> Result<Matrix2<f64>> {
    let sectors = sector_states(f, p)?;
    if settings.len() != sectors.len() {
        return Err(Error::Shape(format!(
            "{} settings for {} sectors",
            settings.len(),
            sectors.len()
        )));
    }
    let mut m = Matrix2::zeros();
    for (s, ms) in sectors.iter().zip(settings) {
        let (SectorState::Success(cs), Some(ms)) = (s, ms) else {
            continue;
        };
        let (x, dg, dt) = contrast(cs, ms, p);
        let denom = 1.0 - x * x;
        if denom <= 0.0 {
            continue;
        }
        let w = p.epsilon * cs.weight / denom;
        m += Matrix2::new(dg * dg, dg * dt, dg * dt, dt * dt) * w;
    }
    Ok(m)
}

/// In-phase (`|g|`-optimal) and quadrature (`θ`-optimal) setting plans.
pub fn two_setting_plan(f: &[C64], p: &SourceParams) -> Result<[Settings; 2]> {
    let sectors = sector_states(f, p)?;
    Ok([
        optimal_settings_all(&sectors, Param::GMod, p),
        optimal_settings_all(&sectors, Param::Theta, p),
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub source: SourceParams,
    /// Trials per setting plan and repetition.
    pub trials: u64,
    pub repetitions: u64,
    pub seed: u64,
    pub mode: McMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum McMode {
    /// Both setting plans, joint fit.
    Joint,
    /// Quadrature plan only, θ fitted at the true |g|.
    ThetaOnly,
}

/// Spread of repeated estimates against the Cramér–Rao bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub g_hat: f64,
    pub theta_hat: f64,
    /// Empirical covariance of `(|g|, θ)` estimates across repetitions.
    pub covariance: [[f64; 2]; 2],
    /// `(M F)^{-1}`; infinite entries when the Fisher matrix is singular.
    pub crb: [[f64; 2]; 2],
    /// Empirical θ variance over its bound.
    pub ratio: f64,
    /// Empirical |g| variance over its bound (joint fits only).
    pub ratio_gmod: Option<f64>,
    pub g_bias: f64,
    pub g_standard_error: f64,
    /// Set when the likelihood is flat in a fitted parameter.
    pub wide_interval: bool,
    pub repetitions: u64,
    pub estimates: Vec<PointEstimate>,
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Repeat sampling and fitting `repetitions` times in parallel.
pub fn monte_carlo(f: &[C64], cfg: &MonteCarloConfig) -> Result<EstimateReport> {
    let p = cfg.source;
    p.validate()?;
    if cfg.repetitions < 2 {
        return Err(Error::InvalidParameter("need at least two repetitions".into()));
    }
    let plans: Vec<Settings> = match cfg.mode {
        McMode::Joint => two_setting_plan(f, &p)?.to_vec(),
        McMode::ThetaOnly => vec![two_setting_plan(f, &p)?[1].clone()],
    };
    let mode = match cfg.mode {
        McMode::Joint => FitMode::Joint,
        McMode::ThetaOnly => FitMode::ThetaOnly {
            g_mod: p.g_mod,
            center: p.theta,
        },
    };
    let estimates = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let data = plans
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let key = RngKey {
                        seed: cfg.seed,
                        repetition: rep,
                        setting: k as u64,
                    };
                    Ok(Dataset {
                        settings: s.clone(),
                        counts: sample_outcomes_keyed(f, &p, s, cfg.trials, key)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            mle_fit(&data, f, mode)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut fisher = Matrix2::zeros();
    for s in &plans {
        fisher += fisher_matrix(f, &p, s)? * cfg.trials as f64;
    }
    let (crb, wide) = match cfg.mode {
        McMode::Joint => match fisher.try_inverse() {
            Some(inv) if fisher.determinant() > 1e-12 * fisher.norm_squared() => {
                ([[inv[(0, 0)], inv[(0, 1)]], [inv[(1, 0)], inv[(1, 1)]]], false)
            }
            _ => ([[f64::INFINITY; 2]; 2], true),
        },
        McMode::ThetaOnly => {
            let ft = fisher[(1, 1)];
            let v = if ft > 0.0 { 1.0 / ft } else { f64::INFINITY };
            ([[0.0, 0.0], [0.0, v]], ft <= 0.0)
        }
    };

    let r = estimates.len() as f64;
    let g_mean = estimates.iter().map(|e| e.g_mod).sum::<f64>() / r;
    let dtheta: Vec<f64> = estimates.iter().map(|e| wrap(e.theta - p.theta)).collect();
    let t_mean = dtheta.iter().sum::<f64>() / r;
    let mut cov = [[0.0; 2]; 2];
    for (e, dt) in estimates.iter().zip(&dtheta) {
        let v = [e.g_mod - g_mean, dt - t_mean];
        for i in 0..2 {
            for j in 0..2 {
                cov[i][j] += v[i] * v[j] / (r - 1.0);
            }
        }
    }
    let ratio = cov[1][1] / crb[1][1];
    let ratio_gmod = (cfg.mode == McMode::Joint).then(|| cov[0][0] / crb[0][0]);
    Ok(EstimateReport {
        g_hat: g_mean,
        theta_hat: (p.theta + t_mean).rem_euclid(2.0 * PI),
        covariance: cov,
        crb,
        ratio,
        ratio_gmod,
        g_bias: g_mean - p.g_mod,
        g_standard_error: (cov[0][0] / r).sqrt(),
        wide_interval: wide || !ratio.is_finite(),
        repetitions: cfg.repetitions,
        estimates,
    })
}
