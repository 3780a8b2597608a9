//! Upper bounds on the QFI ratio and a maximizer of the ratio functional
//! over the probability simplex.
//!
//! For a diagonal ancilla with weights `x_i = |f_i|^2` the ratio is
//! `S_k(x) = sum_{i=1}^k 2 x_i x_{i-1} / (x_i + x_{i-1})`. Harmonic means are
//! bounded by geometric means, and `sum sqrt(x_i x_{i-1})` is half the
//! largest eigenvalue of the path-graph adjacency matrix, which gives
//! `S_k <= cos(pi/(k+2))`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `cos(pi/(N+2))`: best ratio with at most N ancilla photons.
pub fn bound_max_photons(n: usize) -> f64 {
    (PI / (n as f64 + 2.0)).cos()
}

/// `cos(pi/(<N>+2))`: best ratio at mean ancilla photon number `<N>`.
pub fn bound_mean_photons(mean_n: f64) -> Result<f64> {
    if !(mean_n.is_finite() && mean_n >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mean photon number must be >= 0, got {mean_n}"
        )));
    }
    Ok((PI / (mean_n + 2.0)).cos())
}

/// Leading small-`<N>` behaviour of the mean-photon bound, `(pi/4) <N>`.
pub fn bound_mean_photons_small(mean_n: f64) -> f64 {
    PI / 4.0 * mean_n
}

/// Large-k expansion `1 - pi^2/k^2`.
pub fn asymptotic_bound(k: usize) -> Result<f64> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!(
            "asymptotic bound needs k >= 3, got {k}"
        )));
    }
    Ok(1.0 - PI * PI / (k * k) as f64)
}

/// Probability weights `x_0, ..., x_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("no weights".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Ok(Self { weights })
    }

    /// Normalize nonnegative weights.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of adjacent pairs, `k`.
    pub fn k(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn reversed(&self) -> Self {
        Self {
            weights: self.weights.iter().rev().copied().collect(),
        }
    }

    /// Amplitudes `sqrt(x_i)` (a real diagonal ancilla).
    pub fn amplitudes(&self) -> Vec<f64> {
        self.weights.iter().map(|x| x.sqrt()).collect()
    }
}

/// Ratio functional `S_k(x)`; terms with `x_i + x_{i-1} = 0` are 0.
pub fn s_k(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| {
            let s = w[0] + w[1];
            if s > 0.0 {
                2.0 * w[0] * w[1] / s
            } else {
                0.0
            }
        })
        .sum()
}

/// `sum sqrt(x_i x_{i-1})`.
pub fn sqrt_product(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[0] * w[1]).sqrt()).sum()
}

/// Gradient of `S_k`.
pub fn s_k_gradient(x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for i in 1..x.len() {
        let (a, b) = (x[i - 1], x[i]);
        let s = a + b;
        if s > 0.0 {
            g[i - 1] += 2.0 * b * b / (s * s);
            g[i] += 2.0 * a * a / (s * s);
        }
    }
    g
}

/// Hessian of `S_k` (tridiagonal, negative semidefinite).
pub fn s_k_hessian(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 1..n {
        let (a, b) = (x[i - 1], x[i]);
        let s = a + b;
        if s > 0.0 {
            let s3 = s * s * s;
            h[(i - 1, i - 1)] -= 4.0 * b * b / s3;
            h[(i, i)] -= 4.0 * a * a / s3;
            h[(i - 1, i)] += 4.0 * a * b / s3;
            h[(i, i - 1)] += 4.0 * a * b / s3;
        }
    }
    h
}

/// Largest eigenvalue `2 cos(pi/(k+2))` of the `(k+1) x (k+1)` path-graph
/// adjacency matrix, with its eigenvector squared into a distribution
/// `x_i = (2/(k+2)) sin^2((i+1) pi/(k+2))`.
pub fn tridiag_max_eig(k: usize) -> Result<(f64, Distribution)> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let d = (k + 2) as f64;
    let w = (0..=k)
        .map(|i| ((i + 1) as f64 * PI / d).sin().powi(2))
        .collect();
    Ok((2.0 * (PI / d).cos(), Distribution::normalized(w)?))
}

/// The path-graph adjacency matrix itself (test oracle input).
pub fn path_adjacency(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k + 1, k + 1, |i, j| if i.abs_diff(j) == 1 { 1.0 } else { 0.0 })
}

/// `max sum sqrt(x_i x_{i-1}) = cos(pi/(k+2))` and its maximizer.
pub fn maximize_sqrt_product(k: usize) -> Result<(f64, Distribution)> {
    let (lam, x) = tridiag_max_eig(k)?;
    Ok((lam / 2.0, x))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    ExponentiatedGradient,
    ProjectedGradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_rule: StepRule,
    pub tol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iters: 20_000,
            step_rule: StepRule::ExponentiatedGradient,
            tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexResult {
    pub value: f64,
    pub distribution: Distribution,
    /// Norm of the gradient projected onto the simplex tangent space.
    pub projected_gradient: f64,
    pub converged: bool,
    /// Index of the restart that produced the optimum.
    pub restart: usize,
}

fn projected_gradient_norm(g: &[f64]) -> f64 {
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    g.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt()
}

/// One ascent step with backtracking; returns the new point and step size.
fn ascent_step(x: &[f64], rule: StepRule, eta: f64) -> (Vec<f64>, f64) {
    let f0 = s_k(x);
    let g = s_k_gradient(x);
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    let mut eta = eta;
    for _ in 0..60 {
        let y: Vec<f64> = match rule {
            StepRule::ExponentiatedGradient => {
                let gmax = g.iter().copied().fold(f64::MIN, f64::max);
                let raw: Vec<f64> = x
                    .iter()
                    .zip(&g)
                    .map(|(xi, gi)| xi * (eta * (gi - gmax)).exp())
                    .collect();
                let t: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / t).collect()
            }
            StepRule::ProjectedGradient => {
                let raw: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + eta * (gi - mean)).collect();
                if raw.iter().any(|v| *v <= 0.0) {
                    eta *= 0.5;
                    continue;
                }
                raw
            }
        };
        if s_k(&y) >= f0 {
            return (y, eta);
        }
        eta *= 0.5;
    }
    (x.to_vec(), eta)
}

/// Damped Newton iterations on the KKT system of `max S_k` s.t. `sum x = 1`.
fn newton_polish(x: &mut Vec<f64>, tol: f64) {
    let n = x.len();
    for _ in 0..50 {
        let g = s_k_gradient(x);
        if projected_gradient_norm(&g) < tol * 1e-2 {
            return;
        }
        let h = s_k_hessian(x);
        let mut kkt = DMatrix::zeros(n + 1, n + 1);
        kkt.view_mut((0, 0), (n, n)).copy_from(&h);
        for i in 0..n {
            kkt[(i, n)] = -1.0;
            kkt[(n, i)] = 1.0;
        }
        let mean = g.iter().sum::<f64>() / n as f64;
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            rhs[i] = -(g[i] - mean);
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            return;
        };
        let f0 = s_k(x);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let y: Vec<f64> = (0..n).map(|i| x[i] + t * sol[i]).collect();
            if y.iter().all(|v| *v > 0.0) && s_k(&y) >= f0 - 1e-15 {
                let total: f64 = y.iter().sum();
                *x = y.into_iter().map(|v| v / total).collect();
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return;
        }
    }
}

fn run_restart(x0: Vec<f64>, cfg: &OptimizerConfig) -> (f64, Vec<f64>, f64) {
    let mut x = x0;
    let mut eta = 1.0;
    let mut last = s_k(&x);
    for _ in 0..cfg.max_iters {
        let (y, used) = ascent_step(&x, cfg.step_rule, eta);
        x = y;
        // Let the step grow again after a successful backtrack.
        eta = (used * 2.0).min(1e3);
        let f = s_k(&x);
        let pg = projected_gradient_norm(&s_k_gradient(&x));
        if pg < 1e-6 || (f - last).abs() < 1e-15 {
            break;
        }
        last = f;
    }
    newton_polish(&mut x, cfg.tol);
    let pg = projected_gradient_norm(&s_k_gradient(&x));
    (s_k(&x), x, pg)
}

/// Deterministic Dirichlet(1, ..., 1) start for restart `r`.
fn dirichlet_start(k: usize, seed: u64, r: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    let raw: Vec<f64> = (0..=k).map(|_| Exp1.sample(&mut rng)).collect::<Vec<f64>>();
    let t: f64 = raw.iter().sum();
    raw.into_iter().map(|v: f64| (v / t).max(1e-12)).collect()
}

/// Multi-start maximization of `S_k` over the simplex.
///
/// Restart 0 starts from the sine-profile distribution, the others from
/// seeded Dirichlet draws. Restarts run in parallel; the reduction picks
/// the best value (lowest restart index on ties), so the result does not
/// depend on scheduling.
pub fn maximize_h_simplex(k: usize, cfg: &OptimizerConfig) -> Result<SimplexResult> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if cfg.restarts == 0 || !(cfg.tol > 0.0) {
        return Err(Error::InvalidParameter(
            "optimizer needs restarts >= 1 and tol > 0".into(),
        ));
    }
    let results: Vec<(usize, f64, Vec<f64>, f64)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let x0 = if r == 0 {
                tridiag_max_eig(k).expect("k >= 1").1.weights().to_vec()
            } else {
                dirichlet_start(k, cfg.seed, r)
            };
            let (v, x, pg) = run_restart(x0, cfg);
            (r, v, x, pg)
        })
        .collect();
    let (restart, value, x, pg) = results
        .into_iter()
        .reduce(|a, b| if b.1 > a.1 { b } else { a })
        .expect("at least one restart");
    // Symmetrize: the functional is reversal-invariant and concave, so the
    // average of x and its reverse is at least as good.
    let sym: Vec<f64> = x.iter().zip(x.iter().rev()).map(|(a, b)| 0.5 * (a + b)).collect();
    let (value, x, pg) = if s_k(&sym) >= value {
        let pg = projected_gradient_norm(&s_k_gradient(&sym));
        (s_k(&sym), sym, pg)
    } else {
        (value, x, pg)
    };
    Ok(SimplexResult {
        value,
        distribution: Distribution::normalized(x)?,
        projected_gradient: pg,
        converged: pg < cfg.tol,
        restart,
    })
}

/// Scaled gap `(N+2)/sin^2(pi/(N+2)) * (cos^2(pi/(N+2)) - h_opt(N))` for the
/// sine-profile ancilla; tends to a constant near `-11 pi/12`.
pub fn optimal_klm_scaled_gap(n: usize) -> Result<f64> {
    let (_, x) = tridiag_max_eig(n)?;
    let h = s_k(x.weights());
    let a = PI / (n as f64 + 2.0);
    Ok((n as f64 + 2.0) / a.sin().powi(2) * (a.cos().powi(2) - h))
}
