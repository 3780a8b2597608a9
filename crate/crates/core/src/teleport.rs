//! Linear-optical teleportation of the source photon from site A to site B.
//!
//! The ancilla `sum_k f_k |1..1 0..0>_A |0..0 1..1>_B` (k photons in A's
//! first k ancilla modes, N-k in B's last N-k) is combined with the source
//! mode at each site (mode 0). Site A applies the `(N+1)`-mode Fourier
//! transform to its source and ancilla modes and counts photons per port.
//! For n detected photons the source photon ends up either in B's mode 0
//! (it was at B all along) or in B's mode n (it was at A), and a phase
//! `2 pi sum(d)/(N+1)` on the latter restores the coherence.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    apply_mode_unitary, qft_matrix, transition_amplitude, BipartiteFockState, OccupationVector,
    Site, SparseKet, C64, MAX_PHOTONS,
};
use crate::qfi::{optimal_qfi, Param, SourceParams};

/// Largest ancilla photon number the pipeline simulates.
pub const MAX_TELEPORT_PHOTONS: usize = 7;

/// Photon counts at A's `N+1` output ports.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Arrangement {
    pub counts: Vec<u8>,
}

impl Arrangement {
    pub fn detected_total(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    /// Per-photon output ports in nondecreasing order.
    pub fn detection_list(&self) -> Vec<usize> {
        OccupationVector::new(self.counts.clone()).mode_list()
    }
}

/// Conditional phase `2 pi (sum d_i)/(N+1)` reduced to `[0, 2 pi)`.
pub fn phase_correction(d: &[usize], n_total: usize) -> f64 {
    let ports = n_total + 1;
    let s: usize = d.iter().sum::<usize>() % ports;
    2.0 * PI * s as f64 / ports as f64
}

/// Normalized 2x2 state of B's source qubit `{b_0 occupied, b_n occupied}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalState {
    pub sector: usize,
    /// Probability weight `p_n` of the sector given a source photon.
    pub weight: f64,
    /// Row-major `[[r00, r01], [r10, r11]]`.
    pub matrix: [[C64; 2]; 2],
    /// `|f_n|`, `|f_{n-1}|` and `arg(f_n f*_{n-1})`.
    pub f_n: f64,
    pub f_prev: f64,
    pub phi: f64,
}

impl ConditionalState {
    pub fn trace(&self) -> f64 {
        self.matrix[0][0].re + self.matrix[1][1].re
    }
}

/// Successful sectors carry a conditional state; `n = 0` and `n = N+1`
/// reveal which site the photon came from and carry no information.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SectorState {
    Success(ConditionalState),
    Failure { sector: usize, weight: f64 },
}

impl SectorState {
    pub fn weight(&self) -> f64 {
        match self {
            SectorState::Success(c) => c.weight,
            SectorState::Failure { weight, .. } => *weight,
        }
    }

    pub fn sector(&self) -> usize {
        match self {
            SectorState::Success(c) => c.sector,
            SectorState::Failure { sector, .. } => *sector,
        }
    }
}

fn check_diagonal(f: &[C64]) -> Result<usize> {
    if f.len() < 2 {
        return Err(Error::InvalidParameter(
            "teleportation needs an ancilla with N >= 1".into(),
        ));
    }
    let norm: f64 = f.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Unnormalized(norm));
    }
    Ok(f.len() - 1)
}

/// Sector weight `p_n` for a source photon.
pub fn sector_weight(f: &[C64], n: usize) -> f64 {
    let n_total = f.len() - 1;
    let cur = if n <= n_total { f[n].norm_sqr() } else { 0.0 };
    let prev = if n >= 1 { f[n - 1].norm_sqr() } else { 0.0 };
    (cur + prev) / 2.0
}

/// Conditional state of sector `n` from the printed closed form.
pub fn conditional_state(f: &[C64], p: &SourceParams, n: usize) -> Result<SectorState> {
    let n_total = check_diagonal(f)?;
    if n > n_total + 1 {
        return Err(Error::InvalidParameter(format!(
            "sector {n} beyond N+1 = {}",
            n_total + 1
        )));
    }
    let weight = sector_weight(f, n);
    if n == 0 || n == n_total + 1 {
        return Ok(SectorState::Failure { sector: n, weight });
    }
    let (a, b) = (f[n].norm_sqr(), f[n - 1].norm_sqr());
    let s = a + b;
    if s == 0.0 {
        return Ok(SectorState::Failure { sector: n, weight });
    }
    let coh = f[n] * f[n - 1].conj() * p.g() / s;
    Ok(SectorState::Success(ConditionalState {
        sector: n,
        weight,
        matrix: [[C64::new(a / s, 0.0), coh], [coh.conj(), C64::new(b / s, 0.0)]],
        f_n: f[n].norm(),
        f_prev: f[n - 1].norm(),
        phi: (f[n] * f[n - 1].conj()).arg(),
    }))
}

/// One detection pattern at A and what it leaves at B.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrangementOutcome {
    pub arrangement: Arrangement,
    pub detection: Vec<usize>,
    /// Amplitude for the branch where the source photon was at B.
    pub c0: C64,
    /// Amplitude for the branch where the source photon was at A.
    pub c1: C64,
    /// Same amplitudes from the permanent formula.
    pub c0_permanent: C64,
    pub c1_permanent: C64,
    pub phase: f64,
    /// Phase-corrected site-B kets (source-at-B and source-at-A branches).
    pub u: SparseKet,
    pub v: SparseKet,
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub n_total: usize,
    pub arrangements: Vec<ArrangementOutcome>,
    /// Sector states rebuilt from the arrangement-level kets.
    pub sectors: Vec<SectorState>,
}

fn ones(modes: usize, occupied: impl IntoIterator<Item = usize>) -> OccupationVector {
    OccupationVector::with_ones(modes, occupied)
}

/// The joint ket `|source> x |ancilla>` with the source photon at `site`.
fn joint_ket(f: &[C64], source_at_a: bool) -> Result<SparseKet> {
    let n_total = f.len() - 1;
    let modes = n_total + 1;
    let mut ket = SparseKet::zero(modes, modes)?;
    for (k, &fk) in f.iter().enumerate() {
        let a = (1..=k).chain(source_at_a.then_some(0));
        let b = (k + 1..=n_total).chain((!source_at_a).then_some(0));
        ket.add(BipartiteFockState::new(ones(modes, a), ones(modes, b)), fk)?;
    }
    ket.prune();
    Ok(ket)
}

/// Split `ket` by A occupation into site-B kets.
fn project_a(ket: &SparseKet) -> BTreeMap<OccupationVector, BTreeMap<OccupationVector, C64>> {
    let mut out: BTreeMap<_, BTreeMap<_, C64>> = BTreeMap::new();
    for (s, a) in ket.iter() {
        *out.entry(s.site_a.clone())
            .or_default()
            .entry(s.site_b.clone())
            .or_default() += *a;
    }
    out
}

fn b_ket(modes: usize, terms: &BTreeMap<OccupationVector, C64>, phase_on: Option<(usize, f64)>) -> Result<SparseKet> {
    let empty = OccupationVector::new(Vec::new());
    let mut ket = SparseKet::zero(0, modes)?;
    for (occ, &a) in terms {
        let mut amp = a;
        if let Some((mode, phi)) = phase_on {
            if occ.get(mode) > 0 {
                amp *= C64::from_polar(1.0, phi);
            }
        }
        ket.add(BipartiteFockState::new(empty.clone(), occ.clone()), amp)?;
    }
    ket.prune();
    Ok(ket)
}

/// Run the protocol for a diagonal ancilla and rebuild every sector state.
pub fn simulate_pipeline(f: &[C64], p: &SourceParams) -> Result<PipelineResult> {
    let n_total = check_diagonal(f)?;
    if n_total > MAX_TELEPORT_PHOTONS || n_total + 1 > MAX_PHOTONS {
        return Err(Error::Capacity {
            what: "teleported ancilla photons",
            value: n_total,
            limit: MAX_TELEPORT_PHOTONS,
        });
    }
    p.validate()?;
    let modes = n_total + 1;
    let qft = qft_matrix(modes)?;
    let all: Vec<usize> = (0..modes).collect();
    let from_b = project_a(&apply_mode_unitary(&joint_ket(f, false)?, &qft, Site::A, &all)?);
    let from_a = project_a(&apply_mode_unitary(&joint_ket(f, true)?, &qft, Site::A, &all)?);

    let mut keys: Vec<&OccupationVector> = from_b.keys().chain(from_a.keys()).collect();
    keys.sort();
    keys.dedup();

    let empty = BTreeMap::new();
    let mut arrangements = Vec::with_capacity(keys.len());
    for s in keys {
        let n = s.total();
        let detection = s.mode_list();
        let phase = phase_correction(&detection, n_total);
        let u_terms = from_b.get(s).unwrap_or(&empty);
        let v_terms = from_a.get(s).unwrap_or(&empty);
        let u = b_ket(modes, u_terms, None)?;
        let v = b_ket(modes, v_terms, (1..=n_total).contains(&n).then_some((n, phase)))?;
        // Raw (uncorrected) amplitudes divided by the ancilla coefficient.
        let c0 = if n <= n_total && f[n].norm() > 0.0 {
            u_terms.values().copied().sum::<C64>() / f[n]
        } else {
            C64::default()
        };
        let c1 = if n >= 1 && f[n - 1].norm() > 0.0 {
            v_terms.values().copied().sum::<C64>() / f[n - 1]
        } else {
            C64::default()
        };
        let c0_permanent = if n <= n_total {
            transition_amplitude(&ones(modes, 1..=n), s, &qft)?
        } else {
            C64::default()
        };
        let c1_permanent = if n >= 1 {
            transition_amplitude(&ones(modes, 0..n), s, &qft)?
        } else {
            C64::default()
        };
        arrangements.push(ArrangementOutcome {
            arrangement: Arrangement {
                counts: s.as_slice().to_vec(),
            },
            detection,
            c0,
            c1,
            c0_permanent,
            c1_permanent,
            phase,
            u,
            v,
        });
    }

    let sectors = (0..=n_total + 1)
        .map(|n| rebuild_sector(f, p, n, &arrangements))
        .collect::<Result<Vec<_>>>()?;
    Ok(PipelineResult {
        n_total,
        arrangements,
        sectors,
    })
}

/// `sum_s (1/2)(|u><u| + |v><v| + g |u><v| + g* |v><u|)` restricted to
/// the b_0 / b_n kets, then normalized.
fn rebuild_sector(
    f: &[C64],
    p: &SourceParams,
    n: usize,
    arrangements: &[ArrangementOutcome],
) -> Result<SectorState> {
    let n_total = f.len() - 1;
    let modes = n_total + 1;
    let g = p.g();
    let empty = OccupationVector::new(Vec::new());
    // b_0 plus the ancilla photons left at B; b_n...b_N when the source came from A.
    let k0 = BipartiteFockState::new(empty.clone(), ones(modes, std::iter::once(0).chain(n + 1..=n_total)));
    let k1 = BipartiteFockState::new(empty, ones(modes, n..=n_total));
    let mut m = [[C64::default(); 2]; 2];
    let mut weight = 0.0;
    for out in arrangements.iter().filter(|o| o.arrangement.detected_total() == n) {
        let x = [out.u.amplitude(&k0), out.u.amplitude(&k1)];
        let y = [out.v.amplitude(&k0), out.v.amplitude(&k1)];
        weight += 0.5 * (out.u.norm_sqr() + out.v.norm_sqr());
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] += 0.5
                    * (x[i] * x[j].conj()
                        + y[i] * y[j].conj()
                        + g * x[i] * y[j].conj()
                        + g.conj() * y[i] * x[j].conj());
            }
        }
    }
    if n == 0 || n == n_total + 1 || n > 0 && f[n].norm() + f[n - 1].norm() == 0.0 {
        return Ok(SectorState::Failure { sector: n, weight });
    }
    let tr = m[0][0].re + m[1][1].re;
    for row in m.iter_mut() {
        for z in row.iter_mut() {
            *z /= tr;
        }
    }
    Ok(SectorState::Success(ConditionalState {
        sector: n,
        weight,
        matrix: m,
        f_n: f[n].norm(),
        f_prev: f[n - 1].norm(),
        phi: (f[n] * f[n - 1].conj()).arg(),
    }))
}

/// Per-sector measurement: `|+> = cos(α/2)|b_0> + sin(α/2) e^{-iδ}|b_n>`,
/// `|-> = sin(α/2)|b_0> - cos(α/2) e^{-iδ}|b_n>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub alpha: f64,
    pub delta: f64,
}

impl MeasurementSetting {
    pub fn new(alpha: f64, delta: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&alpha) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "measurement angle alpha = {alpha} outside [0, pi]"
            )));
        }
        Ok(Self { alpha, delta })
    }

    fn vectors(&self) -> [[C64; 2]; 2] {
        let (c, s) = ((self.alpha / 2.0).cos(), (self.alpha / 2.0).sin());
        let e = C64::from_polar(1.0, -self.delta);
        [[C64::new(c, 0.0), e * s], [C64::new(s, 0.0), -e * c]]
    }
}

/// `P_± = ε p_n <±|ρ_n|±>` evaluated on the matrix.
pub fn measurement_probs(
    cs: &ConditionalState,
    ms: &MeasurementSetting,
    p: &SourceParams,
) -> (f64, f64) {
    let vecs = ms.vectors();
    let expect = |v: &[C64; 2]| -> f64 {
        let mut acc = C64::default();
        for i in 0..2 {
            for j in 0..2 {
                acc += v[i].conj() * cs.matrix[i][j] * v[j];
            }
        }
        acc.re
    };
    let w = p.epsilon * cs.weight;
    (w * expect(&vecs[0]), w * expect(&vecs[1]))
}

/// Contrast `x` with `P_± = (ε p_n/2)(1 ± x)` and its derivatives in
/// `(|g|, θ)`, from the closed form.
pub fn contrast(cs: &ConditionalState, ms: &MeasurementSetting, p: &SourceParams) -> (f64, f64, f64) {
    let s = cs.f_n * cs.f_n + cs.f_prev * cs.f_prev;
    let z = (cs.f_n * cs.f_n - cs.f_prev * cs.f_prev) / s;
    let t = 2.0 * cs.f_n * cs.f_prev / s;
    let arg = p.theta + cs.phi - ms.delta;
    let x = z * ms.alpha.cos() + t * p.g_mod * ms.alpha.sin() * arg.cos();
    let dx_g = t * ms.alpha.sin() * arg.cos();
    let dx_theta = -t * p.g_mod * ms.alpha.sin() * arg.sin();
    (x, dx_g, dx_theta)
}

/// `P_±` from the printed closed form.
pub fn measurement_probs_closed(
    cs: &ConditionalState,
    ms: &MeasurementSetting,
    p: &SourceParams,
) -> (f64, f64) {
    let (x, _, _) = contrast(cs, ms, p);
    let w = p.epsilon * cs.weight / 2.0;
    (w * (1.0 + x), w * (1.0 - x))
}

/// Locally optimal setting for `param` at the true source parameters.
pub fn optimal_settings(param: Param, cs: &ConditionalState, p: &SourceParams) -> MeasurementSetting {
    match param {
        Param::Theta => MeasurementSetting {
            alpha: PI / 2.0,
            delta: p.theta + cs.phi + PI / 2.0,
        },
        Param::GMod => {
            let num = 2.0 * cs.f_n * cs.f_prev;
            let den = (cs.f_n * cs.f_n - cs.f_prev * cs.f_prev) * p.g_mod;
            let alpha = if num == 0.0 && den == 0.0 {
                PI / 2.0
            } else {
                num.atan2(den)
            };
            MeasurementSetting {
                alpha,
                delta: p.theta + cs.phi,
            }
        }
    }
}

/// Fisher information of the per-sector measurements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiReport {
    pub f_gmod: f64,
    pub f_theta: f64,
    pub ratio_gmod: Option<f64>,
    pub ratio_theta: Option<f64>,
}

/// Closed-form conditional states for all sectors `0..=N+1`.
pub fn sector_states(f: &[C64], p: &SourceParams) -> Result<Vec<SectorState>> {
    let n_total = check_diagonal(f)?;
    (0..=n_total + 1).map(|n| conditional_state(f, p, n)).collect()
}

/// Settings chosen per successful sector.
pub fn optimal_settings_all(sectors: &[SectorState], param: Param, p: &SourceParams) -> Vec<Option<MeasurementSetting>> {
    sectors
        .iter()
        .map(|s| match s {
            SectorState::Success(cs) => Some(optimal_settings(param, cs, p)),
            SectorState::Failure { .. } => None,
        })
        .collect()
}

/// `F = sum_n ε p_n (dx)^2 / (1 - x^2)` over successful sectors; the
/// failure outcomes do not depend on the parameters.
pub fn fisher_information(
    sectors: &[SectorState],
    p: &SourceParams,
    settings: &[Option<MeasurementSetting>],
) -> Result<FiReport> {
    if settings.len() != sectors.len() {
        return Err(Error::Shape(format!(
            "{} settings for {} sectors",
            settings.len(),
            sectors.len()
        )));
    }
    let (mut fg, mut ft) = (0.0, 0.0);
    for (s, ms) in sectors.iter().zip(settings) {
        let (SectorState::Success(cs), Some(ms)) = (s, ms) else {
            continue;
        };
        let (x, dg, dt) = contrast(cs, ms, p);
        let denom = 1.0 - x * x;
        if denom <= 0.0 {
            continue;
        }
        let w = p.epsilon * cs.weight;
        fg += w * dg * dg / denom;
        ft += w * dt * dt / denom;
    }
    let opt = optimal_qfi(p);
    Ok(FiReport {
        f_gmod: fg,
        f_theta: ft,
        ratio_gmod: opt.h_gmod.map(|h| fg / h),
        ratio_theta: (opt.h_theta > 0.0).then(|| ft / opt.h_theta),
    })
}

/// Fisher information by summing `(dP)^2/P` with central differences of
/// the matrix-based probabilities; independent check of the closed form.
pub fn fisher_information_numeric(
    f: &[C64],
    p: &SourceParams,
    settings: &[Option<MeasurementSetting>],
    step: f64,
) -> Result<(f64, f64)> {
    let probs = |q: &SourceParams| -> Result<Vec<(f64, f64)>> {
        let states = sector_states(f, q)?;
        Ok(states
            .iter()
            .zip(settings)
            .map(|(s, ms)| match (s, ms) {
                (SectorState::Success(cs), Some(ms)) => measurement_probs(cs, ms, q),
                _ => (0.0, 0.0),
            })
            .collect())
    };
    let base = probs(p)?;
    let mut out = [0.0; 2];
    for (k, param) in [Param::GMod, Param::Theta].into_iter().enumerate() {
        let shift = |h: f64| {
            let mut q = *p;
            match param {
                Param::GMod => q.g_mod += h,
                Param::Theta => q.theta += h,
            }
            q
        };
        let plus = probs(&shift(step))?;
        let minus = probs(&shift(-step))?;
        for ((b, pl), mi) in base.iter().zip(&plus).zip(&minus) {
            for (p0, dp) in [(b.0, (pl.0 - mi.0) / (2.0 * step)), (b.1, (pl.1 - mi.1) / (2.0 * step))] {
                if p0 > 0.0 {
                    out[k] += dp * dp / p0;
                }
            }
        }
    }
    Ok((out[0], out[1]))
}

/// Teleportation FI ratio at the per-parameter optimal settings.
pub fn optimal_fi(f: &[C64], p: &SourceParams) -> Result<FiReport> {
    let sectors = sector_states(f, p)?;
    let g = fisher_information(&sectors, p, &optimal_settings_all(&sectors, Param::GMod, p))?;
    let t = fisher_information(&sectors, p, &optimal_settings_all(&sectors, Param::Theta, p))?;
    Ok(FiReport {
        f_gmod: g.f_gmod,
        f_theta: t.f_theta,
        ratio_gmod: g.ratio_gmod,
        ratio_theta: t.ratio_theta,
    })
}

/// Probability of the uninformative sectors `n = 0` and `n = N+1`.
pub fn failure_probability(f: &[C64]) -> f64 {
    let n_total = f.len() - 1;
    sector_weight(f, 0) + sector_weight(f, n_total + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ancilla;
    use crate::qfi::prop1_ratio;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn params(g: f64, theta: f64) -> SourceParams {
        SourceParams::new(1e-3, g, theta).unwrap()
    }

    fn uniform(n: usize) -> Vec<C64> {
        vec![C64::new(1.0 / ((n + 1) as f64).sqrt(), 0.0); n + 1]
    }

    fn diag(spec: &ancilla::AncillaSpec) -> Vec<C64> {
        spec.diagonal().unwrap()
    }

    fn close2(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2], tol: f64) -> bool {
        (0..2).all(|i| (0..2).all(|j| (a[i][j] - b[i][j]).norm() < tol))
    }

    #[test]
    fn phase_correction_examples() {
        assert_eq!(phase_correction(&[], 3), 0.0);
        assert!((phase_correction(&[1], 1) - PI).abs() < 1e-15);
        assert_eq!(phase_correction(&[1, 1, 2], 3), 0.0);
    }

    #[test]
    fn conditional_state_examples() {
        let p = params(0.6, 0.4);
        let gjc = diag(&ancilla::gjc());
        let SectorState::Success(cs) = conditional_state(&gjc, &p, 1).unwrap() else {
            panic!()
        };
        let g = p.g();
        let expected = [[C64::new(0.5, 0.0), g * 0.5], [g.conj() * 0.5, C64::new(0.5, 0.0)]];
        assert!(close2(&cs.matrix, &expected, 1e-15));
        let SectorState::Success(cs) = conditional_state(&uniform(3), &p, 2).unwrap() else {
            panic!()
        };
        assert!(close2(&cs.matrix, &expected, 1e-15));
        let SectorState::Success(cs) = conditional_state(&gjc, &params(0.0, 0.4), 1).unwrap() else {
            panic!()
        };
        assert_eq!(cs.matrix[0][1], C64::default());
        assert!(matches!(conditional_state(&gjc, &p, 0).unwrap(), SectorState::Failure { .. }));
        assert!(matches!(conditional_state(&gjc, &p, 2).unwrap(), SectorState::Failure { .. }));
    }

    #[test]
    fn gjc_pipeline_has_two_correctable_arrangements() {
        let p = params(0.7, 0.3);
        let res = simulate_pipeline(&diag(&ancilla::gjc()), &p).unwrap();
        let one: Vec<_> = res.arrangements.iter().filter(|a| a.arrangement.detected_total() == 1).collect();
        assert_eq!(one.len(), 2);
        for a in &one {
            assert!((a.c0.norm() - FRAC_1_SQRT_2).abs() < 1e-12);
            let omega = C64::from_polar(1.0, phase_correction(&a.detection, 1));
            assert!((a.c0 - a.c1 * omega).norm() < 1e-12);
        }
        // n = 0: only the source-at-B branch survives.
        let zero: Vec<_> = res.arrangements.iter().filter(|a| a.arrangement.detected_total() == 0).collect();
        assert_eq!(zero.len(), 1);
        assert!(zero[0].v.is_empty() && !zero[0].u.is_empty());
    }

    #[test]
    fn pipeline_reproduces_closed_form_sectors() {
        for (f, tol) in [
            (uniform(2), 1e-10),
            (diag(&ancilla::optimal_klm(3).unwrap()), 1e-10),
            (diag(&ancilla::tri_amplitude(4).unwrap()), 1e-10),
        ] {
            let p = params(0.55, 1.1);
            let res = simulate_pipeline(&f, &p).unwrap();
            let closed = sector_states(&f, &p).unwrap();
            let total: f64 = res.sectors.iter().map(SectorState::weight).sum();
            assert!((total - 1.0).abs() < 1e-12);
            for (sim, cl) in res.sectors.iter().zip(&closed) {
                assert!((sim.weight() - cl.weight()).abs() < tol);
                match (sim, cl) {
                    (SectorState::Success(a), SectorState::Success(b)) => {
                        assert!(close2(&a.matrix, &b.matrix, tol), "{a:?} vs {b:?}");
                        assert!((a.trace() - 1.0).abs() < 1e-10);
                    }
                    (SectorState::Failure { .. }, SectorState::Failure { .. }) => {}
                    other => panic!("sector kind mismatch: {other:?}"),
                }
            }
            for a in &res.arrangements {
                let n = a.arrangement.detected_total();
                if n < f.len() && f[n].norm() > 0.0 {
                    assert!((a.c0 - a.c0_permanent).norm() < 1e-10);
                }
                if n >= 1 && f[n - 1].norm() > 0.0 {
                    assert!((a.c1 - a.c1_permanent).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn pipeline_capacity() {
        let f = uniform(8);
        assert!(matches!(simulate_pipeline(&f, &params(0.5, 0.0)), Err(Error::Capacity { .. })));
    }

    #[test]
    fn measurement_examples() {
        let p = params(0.0, 0.3);
        let SectorState::Success(cs) = conditional_state(&uniform(2), &p, 1).unwrap() else {
            panic!()
        };
        let ms = MeasurementSetting::new(PI / 2.0, 0.9).unwrap();
        let (pp, pm) = measurement_probs(&cs, &ms, &p);
        assert!((pp - p.epsilon * cs.weight / 2.0).abs() < 1e-15);
        assert!((pm - p.epsilon * cs.weight / 2.0).abs() < 1e-15);

        let p = params(0.7, 0.3);
        let SectorState::Success(cs) = conditional_state(&diag(&ancilla::gjc()), &p, 1).unwrap() else {
            panic!()
        };
        let ms = MeasurementSetting::new(PI / 2.0, p.theta).unwrap();
        let (pp, pm) = measurement_probs(&cs, &ms, &p);
        assert!((pp - p.epsilon / 4.0 * 1.7).abs() < 1e-15);
        assert!((pm - p.epsilon / 4.0 * 0.3).abs() < 1e-15);
    }

    #[test]
    fn probabilities_sum_to_epsilon() {
        let f = diag(&ancilla::optimal_klm(4).unwrap());
        let p = params(0.6, 2.0);
        let sectors = sector_states(&f, &p).unwrap();
        let settings = optimal_settings_all(&sectors, Param::GMod, &p);
        let mut total = 0.0;
        for (s, ms) in sectors.iter().zip(&settings) {
            total += match (s, ms) {
                (SectorState::Success(cs), Some(ms)) => {
                    let (a, b) = measurement_probs(cs, ms, &p);
                    let (c, d) = measurement_probs_closed(cs, ms, &p);
                    assert!((a - c).abs() < 1e-15 && (b - d).abs() < 1e-15);
                    a + b
                }
                _ => p.epsilon * s.weight(),
            };
        }
        assert!((total - p.epsilon).abs() < 1e-15);
    }

    #[test]
    fn settings_examples() {
        let p = params(0.5, 0.2);
        let SectorState::Success(cs) = conditional_state(&uniform(3), &p, 2).unwrap() else {
            panic!()
        };
        assert!((optimal_settings(Param::Theta, &cs, &p).alpha - PI / 2.0).abs() < 1e-15);
        assert!((optimal_settings(Param::GMod, &cs, &p).alpha - PI / 2.0).abs() < 1e-15);
        let f = diag(&ancilla::optimal_klm(2).unwrap());
        let SectorState::Success(cs) = conditional_state(&f, &p, 1).unwrap() else {
            panic!()
        };
        // |f_1|^2 = 0.5, |f_0|^2 = 0.25.
        let a = optimal_settings(Param::GMod, &cs, &p).alpha;
        assert!((a.tan() - 2.0 * 0.125f64.sqrt() / (0.25 * 0.5)).abs() < 1e-9);
        let p0 = params(0.0, 0.2);
        assert!((optimal_settings(Param::GMod, &cs, &p0).alpha - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn saturation_and_fd_cross_check() {
        for spec in [ancilla::gjc(), ancilla::optimal_klm(4).unwrap(), ancilla::klm(3).unwrap()] {
            let f = diag(&spec);
            let h = prop1_ratio(&spec.weights());
            let p = params(0.45, 0.8);
            let r = optimal_fi(&f, &p).unwrap();
            assert!((r.ratio_gmod.unwrap() - h).abs() < 1e-9);
            assert!((r.ratio_theta.unwrap() - h).abs() < 1e-9);
            let sectors = sector_states(&f, &p).unwrap();
            for param in [Param::GMod, Param::Theta] {
                let settings = optimal_settings_all(&sectors, param, &p);
                let a = fisher_information(&sectors, &p, &settings).unwrap();
                let (ng, nt) = fisher_information_numeric(&f, &p, &settings, 1e-6).unwrap();
                assert!((a.f_gmod - ng).abs() < 1e-6 * a.f_gmod.max(1e-6));
                assert!((a.f_theta - nt).abs() < 1e-6 * a.f_theta.max(1e-6));
            }
        }
    }

    #[test]
    fn zero_visibility_gives_no_theta_information() {
        let p = params(0.0, 0.5);
        let f = diag(&ancilla::gjc());
        let sectors = sector_states(&f, &p).unwrap();
        let r = fisher_information(&sectors, &p, &optimal_settings_all(&sectors, Param::Theta, &p)).unwrap();
        assert_eq!(r.f_theta, 0.0);
    }

    #[test]
    fn uniform_failure_probability() {
        for n in 1..=7 {
            assert!((failure_probability(&uniform(n)) - 1.0 / (n as f64 + 1.0)).abs() < 1e-12);
        }
    }
}
