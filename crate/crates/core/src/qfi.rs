//! Quantum Fisher information: closed forms, block SLD sums and
//! fidelity-based cross-checks.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ancilla::AncillaSpec;
use crate::error::{Error, Result};
use crate::fock::{
    apply_mode_unitary, haar_unitary, BipartiteFockState, OccupationVector, Site, SparseKet, C64,
    MAX_PHOTONS,
};
use crate::linalg::{hermitian_eigen, hermiticity_deviation};
use crate::ssr::{project_sectors, Sector, SparseOperator};

/// Relative eigenvalue-pair cutoff in the SLD sum.
pub const SLD_TOL: f64 = 1e-12;
/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Above this ε the first-order source model is flagged.
pub const EPSILON_WARN: f64 = 0.05;
const HERMITIAN_TOL: f64 = 1e-10;

/// Weak thermal source: flux ε, visibility modulus |g| and phase θ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub epsilon: f64,
    pub g_mod: f64,
    pub theta: f64,
}

impl SourceParams {
    pub fn new(epsilon: f64, g_mod: f64, theta: f64) -> Result<Self> {
        let p = Self {
            epsilon,
            g_mod,
            theta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(0.0..=1.0).contains(&self.g_mod) {
            return Err(Error::InvalidParameter(format!(
                "|g| must lie in [0, 1], got {}",
                self.g_mod
            )));
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter("theta must be finite".into()));
        }
        Ok(())
    }

    /// Complex visibility `|g| e^{iθ}`.
    pub fn g(&self) -> C64 {
        C64::from_polar(self.g_mod, self.theta)
    }
}

/// Estimated parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    GMod,
    Theta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QfiMethod {
    ClosedForm,
    SldBlock,
    FiniteEpsilon,
}

/// QFI values (absolute, first order in ε) and their ratio to the optimum.
///
/// `h_gmod` is `None` when |g| = 1, where the optimal |g| information
/// diverges; `gmod_limit` is then set and `ratio` uses θ alone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfiReport {
    pub h_gmod: Option<f64>,
    pub h_theta: f64,
    pub ratio: f64,
    pub ratio_gmod: Option<f64>,
    pub ratio_theta: Option<f64>,
    pub method: QfiMethod,
    pub gmod_limit: bool,
    pub epsilon_warning: bool,
}

/// `(1/2) [[1, g], [g*, 1]]` on `{|0_A 1_B>, |1_A 0_B>}`.
pub fn source_first_order(p: &SourceParams) -> DMatrix<C64> {
    let g = p.g();
    let h = C64::new(0.5, 0.0);
    DMatrix::from_row_slice(2, 2, &[h, g * 0.5, g.conj() * 0.5, h])
}

/// Analytic derivative of [`source_first_order`].
pub fn source_first_order_derivative(p: &SourceParams, param: Param) -> DMatrix<C64> {
    let z = C64::default();
    let c = match param {
        Param::GMod => C64::from_polar(0.5, p.theta),
        Param::Theta => C64::i() * p.g() * 0.5,
    };
    DMatrix::from_row_slice(2, 2, &[z, c, c.conj(), z])
}

/// `|g|` component of the optimal QFI, `ε / (1 - |g|^2)`.
pub fn optimal_qfi_gmod(p: &SourceParams) -> Result<f64> {
    if p.g_mod >= 1.0 {
        return Err(Error::Singular);
    }
    Ok(p.epsilon / (1.0 - p.g_mod * p.g_mod))
}

/// Unconstrained optimum: `H_|g| = ε/(1-|g|^2)`, `H_θ = |g|^2 ε`.
pub fn optimal_qfi(p: &SourceParams) -> QfiReport {
    let h_gmod = optimal_qfi_gmod(p).ok();
    QfiReport {
        h_gmod,
        h_theta: p.g_mod * p.g_mod * p.epsilon,
        ratio: 1.0,
        ratio_gmod: h_gmod.map(|_| 1.0),
        ratio_theta: (p.g_mod > 0.0).then_some(1.0),
        method: QfiMethod::ClosedForm,
        gmod_limit: h_gmod.is_none(),
        epsilon_warning: p.epsilon > EPSILON_WARN,
    }
}

fn ratio_report(p: &SourceParams, h_gmod: f64, h_theta: f64, method: QfiMethod) -> QfiReport {
    let opt = optimal_qfi(p);
    let ratio_gmod = opt.h_gmod.map(|o| h_gmod / o);
    let ratio_theta = (opt.h_theta > 0.0).then(|| h_theta / opt.h_theta);
    let ratio = match (ratio_gmod, ratio_theta) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => 0.0,
    };
    QfiReport {
        h_gmod: opt.h_gmod.map(|_| h_gmod),
        h_theta,
        ratio,
        ratio_gmod,
        ratio_theta,
        method,
        gmod_limit: opt.gmod_limit,
        epsilon_warning: opt.epsilon_warning,
    }
}

/// SLD quantum Fisher information from `rho` and its derivative.
///
/// `sum 2 |<i|d rho|j>|^2 / (l_i + l_j)` over eigenpairs with
/// `l_i + l_j > SLD_TOL * tr(rho)`.
pub fn sld_qfi_with_derivative(rho: &DMatrix<C64>, drho: &DMatrix<C64>) -> Result<f64> {
    if rho.shape() != drho.shape() {
        return Err(Error::Shape(format!(
            "state is {:?}, derivative is {:?}",
            rho.shape(),
            drho.shape()
        )));
    }
    let trace: f64 = rho.diagonal().iter().map(|z| z.re).sum();
    sld_sum(rho, drho, SLD_TOL * trace.abs())
}

fn sld_sum(rho: &DMatrix<C64>, drho: &DMatrix<C64>, tol: f64) -> Result<f64> {
    let dev = hermiticity_deviation(drho);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let (vals, vecs) = hermitian_eigen(rho, HERMITIAN_TOL)?;
    let d = vecs.adjoint() * drho * &vecs;
    let n = vals.len();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s = vals[i] + vals[j];
            if s > tol {
                q += 2.0 * d[(i, j)].norm_sqr() / s;
            }
        }
    }
    Ok(q)
}

/// Central difference of `family` at `mu` with one Richardson step.
pub fn richardson_derivative(
    family: &impl Fn(f64) -> DMatrix<C64>,
    mu: f64,
    step: f64,
) -> DMatrix<C64> {
    let central = |h: f64| (family(mu + h) - family(mu - h)) / C64::new(2.0 * h, 0.0);
    let coarse = central(step);
    let fine = central(step / 2.0);
    (fine * C64::new(4.0, 0.0) - coarse) / C64::new(3.0, 0.0)
}

/// SLD QFI of a parametrized family at `mu` with a finite-difference
/// derivative (step `step`, Richardson-refined).
pub fn sld_qfi(family: impl Fn(f64) -> DMatrix<C64>, mu: f64, step: f64) -> Result<f64> {
    let rho = family(mu);
    let drho = richardson_derivative(&family, mu, step);
    // Symmetrize away round-off in the difference quotient.
    let drho = (&drho + drho.adjoint()) * C64::new(0.5, 0.0);
    sld_qfi_with_derivative(&rho, &drho)
}

/// Positive square root of a positive semidefinite Hermitian matrix.
fn psd_sqrt(m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let (vals, vecs) = hermitian_eigen(m, HERMITIAN_TOL)?;
    let d = DMatrix::from_diagonal(&vals.map(|v| C64::new(v.max(0.0).sqrt(), 0.0)));
    Ok(&vecs * d * vecs.adjoint())
}

/// Uhlmann fidelity `(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(rho: &DMatrix<C64>, sigma: &DMatrix<C64>) -> Result<f64> {
    let s = psd_sqrt(rho)?;
    let m = &s * sigma * &s;
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let (vals, _) = hermitian_eigen(&m, HERMITIAN_TOL)?;
    let t: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok(t * t)
}

/// QFI from the Bures expansion `8 (1 - sqrt F(ρ_{μ-δ/2}, ρ_{μ+δ/2})) / δ^2`.
///
/// The expansion is even in `δ`; two Richardson levels over `δ, δ/2, δ/4`
/// remove the `δ^2` and `δ^4` terms, so `δ` around 0.05-0.1 keeps the
/// fidelity round-off small.
pub fn qfi_fidelity_oracle(
    family: impl Fn(f64) -> DMatrix<C64>,
    mu: f64,
    delta: f64,
) -> Result<f64> {
    let est = |d: f64| -> Result<f64> {
        let f = fidelity(&family(mu - d / 2.0), &family(mu + d / 2.0))?;
        Ok(8.0 * (1.0 - f.min(1.0).sqrt()) / (d * d))
    };
    let (a, b, c) = (est(delta)?, est(delta / 2.0)?, est(delta / 4.0)?);
    let coarse = (4.0 * b - a) / 3.0;
    let fine = (4.0 * c - b) / 3.0;
    Ok((16.0 * fine - coarse) / 15.0)
}

/// Sector-weight formula for the QFI ratio:
/// `sum_{n,m>=1} 2 w_{n,m-1} w_{n-1,m} / (w_{n,m-1} + w_{n-1,m})`.
pub fn prop1_ratio(weights: &BTreeMap<(usize, usize), f64>) -> f64 {
    let w = |n: usize, m: usize| weights.get(&(n, m)).copied().unwrap_or(0.0);
    // Candidate (n, m) are neighbours of occupied sectors.
    let mut sum = 0.0;
    let mut seen = std::collections::BTreeSet::new();
    for &(a, b) in weights.keys() {
        for (n, m) in [(a, b + 1), (a + 1, b)] {
            if n >= 1 && m >= 1 && seen.insert((n, m)) {
                let (x, y) = (w(n, m - 1), w(n - 1, m));
                if x + y > 0.0 {
                    sum += 2.0 * x * y / (x + y);
                }
            }
        }
    }
    sum
}

/// Closed-form QFI ratio of a normalized ancilla.
pub fn qfi_ratio_closed(spec: &AncillaSpec) -> Result<f64> {
    let norm = spec.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Unnormalized(norm));
    }
    Ok(prop1_ratio(&spec.weights()))
}

/// Sector blocks of the joint source-ancilla state, split by dependence
/// on `g`: `rho = (1-ε) Z + ε (A + g C + g* C^†)`.
///
/// The source occupies mode 0 at each site and the ancilla modes follow.
#[derive(Clone, Debug)]
pub struct JointBlocks {
    pub blocks: Vec<JointBlock>,
    pub trace: f64,
}

#[derive(Clone, Debug)]
pub struct JointBlock {
    pub sector: Sector,
    pub basis: Vec<BipartiteFockState>,
    pub zero: DMatrix<C64>,
    pub a: DMatrix<C64>,
    pub c: DMatrix<C64>,
}

impl JointBlock {
    /// First-order part `A + g C + g* C^†`.
    pub fn first_order(&self, g: C64) -> DMatrix<C64> {
        &self.a + &self.c * g + self.c.adjoint() * g.conj()
    }

    pub fn first_order_derivative(&self, p: &SourceParams, param: Param) -> DMatrix<C64> {
        let w = match param {
            Param::GMod => C64::from_polar(1.0, p.theta),
            Param::Theta => C64::i() * p.g(),
        };
        &self.c * w + self.c.adjoint() * w.conj()
    }

    pub fn full(&self, p: &SourceParams) -> DMatrix<C64> {
        &self.zero * C64::new(1.0 - p.epsilon, 0.0) + self.first_order(p.g()) * C64::new(p.epsilon, 0.0)
    }
}

fn source_ket(a: u8, b: u8) -> Result<SparseKet> {
    SparseKet::basis(BipartiteFockState::new(
        OccupationVector::new(vec![a]),
        OccupationVector::new(vec![b]),
    ))
}

/// Twirl (locally) the joint state of the first-order source and `ancilla`.
pub fn joint_blocks(ancilla: &SparseKet) -> Result<JointBlocks> {
    let psi01 = source_ket(0, 1)?.tensor(ancilla)?;
    let psi10 = source_ket(1, 0)?.tensor(ancilla)?;
    let vac = source_ket(0, 0)?.tensor(ancilla)?;
    let (ma, mb) = psi01.mode_counts();
    let zero = SparseOperator::projector(&vac);
    let mut a = SparseOperator::zero(ma, mb);
    a.add_scaled(&SparseOperator::projector(&psi01), C64::new(0.5, 0.0))?;
    a.add_scaled(&SparseOperator::projector(&psi10), C64::new(0.5, 0.0))?;
    let mut c = SparseOperator::outer(&psi01, &psi10)?;
    c = {
        let mut half = SparseOperator::zero(ma, mb);
        half.add_scaled(&c, C64::new(0.5, 0.0))?;
        half
    };
    let blocks = project_sectors(&[&zero, &a, &c], true)
        .into_iter()
        .map(|(sector, basis, mut m)| {
            let c = m.pop().expect("three operators");
            let a = m.pop().expect("three operators");
            let zero = m.pop().expect("three operators");
            JointBlock {
                sector,
                basis,
                zero,
                a,
                c,
            }
        })
        .collect();
    Ok(JointBlocks {
        blocks,
        trace: ancilla.norm_sqr(),
    })
}

/// End-to-end QFI of an explicit ancilla ket.
pub fn qfi_end_to_end_ket(
    ancilla: &SparseKet,
    p: &SourceParams,
    method: QfiMethod,
) -> Result<QfiReport> {
    p.validate()?;
    if method == QfiMethod::ClosedForm {
        return Err(Error::Unsupported(
            "the closed form needs sector amplitudes, not a ket".into(),
        ));
    }
    let jb = joint_blocks(ancilla)?;
    let mut h = [0.0f64; 2];
    for (k, param) in [Param::GMod, Param::Theta].into_iter().enumerate() {
        for b in &jb.blocks {
            h[k] += match method {
                QfiMethod::SldBlock => {
                    // Per unit ε; the cutoff is relative to the full trace.
                    let rho = b.first_order(p.g());
                    let d = b.first_order_derivative(p, param);
                    p.epsilon * sld_sum(&rho, &d, SLD_TOL * jb.trace)?
                }
                _ => {
                    let family = |mu: f64| {
                        let mut q = *p;
                        match param {
                            Param::GMod => q.g_mod = mu,
                            Param::Theta => q.theta = mu,
                        }
                        b.full(&q)
                    };
                    let mu = match param {
                        Param::GMod => p.g_mod,
                        Param::Theta => p.theta,
                    };
                    let rho = family(mu);
                    let d = richardson_derivative(&family, mu, FD_STEP);
                    let d = (&d + d.adjoint()) * C64::new(0.5, 0.0);
                    sld_sum(&rho, &d, SLD_TOL * jb.trace)?
                }
            };
        }
    }
    Ok(ratio_report(p, h[0], h[1], method))
}

/// End-to-end QFI ratio of a catalog or custom ancilla.
pub fn qfi_ratio_end_to_end(
    spec: &AncillaSpec,
    p: &SourceParams,
    method: QfiMethod,
) -> Result<QfiReport> {
    if method == QfiMethod::ClosedForm {
        p.validate()?;
        let h = qfi_ratio_closed(spec)?;
        let opt = optimal_qfi(p);
        return Ok(ratio_report(
            p,
            opt.h_gmod.unwrap_or(0.0) * h,
            opt.h_theta * h,
            QfiMethod::ClosedForm,
        ));
    }
    qfi_end_to_end_ket(&spec.ket()?, p, method)
}

/// Numeric QFI ratio: block SLD on the explicit Fock state when it fits
/// the photon capacity, otherwise the sector-weight sum over the truncated
/// amplitudes (used by the squeezed and coherent families).
pub fn numeric_ratio(spec: &AncillaSpec, p: &SourceParams) -> Result<(f64, QfiMethod)> {
    let max_total = spec.amplitudes.keys().map(|&(n, m)| n.max(m)).max().unwrap_or(0);
    if max_total < MAX_PHOTONS {
        match qfi_ratio_end_to_end(spec, p, QfiMethod::SldBlock) {
            Ok(r) => return Ok((r.ratio, QfiMethod::SldBlock)),
            Err(Error::Capacity { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((qfi_ratio_closed(spec)?, QfiMethod::ClosedForm))
}

/// Outcome of [`invariance_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub reference: f64,
    pub ratios: Vec<f64>,
    pub max_deviation: f64,
}

/// Rotate every sector component of `ket` by its own pair of local passive
/// unitaries `U_A x U_B`, drawn from `rng`.
pub fn rotate_sectors(ket: &SparseKet, rng: &mut ChaCha8Rng) -> Result<SparseKet> {
    let (ma, mb) = ket.mode_counts();
    let mut sectors: BTreeMap<(usize, usize), SparseKet> = BTreeMap::new();
    for (s, a) in ket.iter() {
        let part = match sectors.entry(s.local_photon_numbers()) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => e.insert(SparseKet::zero(ma, mb)?),
        };
        part.add(s.clone(), *a)?;
    }
    let mut out = SparseKet::zero(ma, mb)?;
    for part in sectors.values() {
        let mut rotated = part.clone();
        for (site, modes) in [(Site::A, ma), (Site::B, mb)] {
            if modes > 0 {
                let u = haar_unitary(modes, rng);
                let list: Vec<usize> = (0..modes).collect();
                rotated = apply_mode_unitary(&rotated, &u, site, &list)?;
            }
        }
        for (s, a) in rotated.iter() {
            out.add(s.clone(), *a)?;
        }
    }
    out.prune();
    Ok(out)
}

/// Re-evaluate the end-to-end ratio after random within-sector rotations
/// of the ancilla, one rotation per seed.
pub fn invariance_check(
    spec: &AncillaSpec,
    p: &SourceParams,
    seeds: &[u64],
) -> Result<InvarianceReport> {
    let ket = spec.ket()?;
    let reference = qfi_end_to_end_ket(&ket, p, QfiMethod::SldBlock)?.ratio;
    let mut ratios = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rotated = rotate_sectors(&ket, &mut rng)?;
        ratios.push(qfi_end_to_end_ket(&rotated, p, QfiMethod::SldBlock)?.ratio);
    }
    let max_deviation = ratios
        .iter()
        .map(|r| (r - reference).abs())
        .fold(0.0, f64::max);
    Ok(InvarianceReport {
        reference,
        ratios,
        max_deviation,
    })
}
