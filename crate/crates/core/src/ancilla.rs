//! Shared ancilla states and their closed-form figures of merit.
//!
//! An [`AncillaSpec`] stores the sector amplitudes `f_{n,m}` (n photons at
//! A, m at B) together with a mode layout that fixes how each sector is
//! spread over the local modes. The QFI ratio depends only on the sector
//! weights; the layout matters for the explicit Fock-space constructions.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{BipartiteFockState, OccupationVector, SparseKet, C64};
use crate::qfi::{prop1_ratio, SourceParams};

/// Tail weight left out when truncating infinite families.
pub const TAIL_WEIGHT: f64 = 1e-10;
const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AncillaKind {
    Gjc,
    #[serde(alias = "n_copy")]
    NCopySpe,
    Klm,
    TriIntensity,
    TriAmplitude,
    OptimalKlm,
    Tmsv,
    TmsvWithReference,
    CoherentPair,
    Tpe,
    Noon,
    Custom,
}

impl AncillaKind {
    pub const ALL: [AncillaKind; 12] = [
        AncillaKind::Gjc,
        AncillaKind::NCopySpe,
        AncillaKind::Klm,
        AncillaKind::TriIntensity,
        AncillaKind::TriAmplitude,
        AncillaKind::OptimalKlm,
        AncillaKind::Tmsv,
        AncillaKind::TmsvWithReference,
        AncillaKind::CoherentPair,
        AncillaKind::Tpe,
        AncillaKind::Noon,
        AncillaKind::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AncillaKind::Gjc => "gjc",
            AncillaKind::NCopySpe => "n_copy_spe",
            AncillaKind::Klm => "klm",
            AncillaKind::TriIntensity => "tri_intensity",
            AncillaKind::TriAmplitude => "tri_amplitude",
            AncillaKind::OptimalKlm => "optimal_klm",
            AncillaKind::Tmsv => "tmsv",
            AncillaKind::TmsvWithReference => "tmsv_with_reference",
            AncillaKind::CoherentPair => "coherent_pair",
            AncillaKind::Tpe => "tpe",
            AncillaKind::Noon => "noon",
            AncillaKind::Custom => "custom",
        }
    }

    /// Nonlocal (entanglement) and phase-reference resource flags.
    pub fn resources(self, photons: usize) -> ResourceFlags {
        let (nonlocal, phase_reference) = match self {
            AncillaKind::Tmsv | AncillaKind::Tpe => (true, false),
            AncillaKind::Noon => (true, photons <= 1),
            AncillaKind::CoherentPair => (false, true),
            _ => (true, true),
        };
        ResourceFlags {
            nonlocal,
            phase_reference,
        }
    }
}

impl fmt::Display for AncillaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AncillaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        if key == "n_copy" || key == "ncopy" {
            return Ok(AncillaKind::NCopySpe);
        }
        AncillaKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceFlags {
    pub nonlocal: bool,
    pub phase_reference: bool,
}

/// How sector `(n, m)` is laid out over the local modes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeLayout {
    /// One mode per site, `|n>_A |m>_B`.
    #[default]
    SingleModePair,
    /// `photon_cap` modes per site; A fills its first n modes, B its last m.
    OnePhotonPerMode,
    /// Equal superposition over which of the first n+m mode pairs carry
    /// A's photons, the remaining pairs carrying B's.
    PermutedSuperposition,
}

/// Inputs for [`build`]. `photons` is the ancilla photon number N,
/// `squeezing` the TMSV parameter r, `alpha` the coherent amplitude |α|.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildParams {
    pub photons: usize,
    pub squeezing: f64,
    pub alpha: f64,
}

impl BuildParams {
    pub fn photons(n: usize) -> Self {
        Self {
            photons: n,
            ..Self::default()
        }
    }
}

impl Default for BuildParams {
    fn default() -> Self {
        Self {
            photons: 1,
            squeezing: 1.0,
            alpha: 1.0,
        }
    }
}

/// Squeezed-light ancilla parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezedParams {
    pub r: f64,
    pub mean_n: f64,
    pub truncation: usize,
    pub alpha: Option<f64>,
}

/// Sector amplitudes plus layout metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct AncillaSpec {
    pub kind: AncillaKind,
    pub amplitudes: BTreeMap<(usize, usize), C64>,
    pub photon_cap: usize,
    pub layout: ModeLayout,
    /// Per-mode truncation used for the infinite families.
    pub truncation: Option<usize>,
}

impl AncillaSpec {
    /// Validating constructor. `photon_cap` is raised to the largest
    /// `n + m` in the support if needed.
    pub fn new(
        kind: AncillaKind,
        amplitudes: BTreeMap<(usize, usize), C64>,
        layout: ModeLayout,
    ) -> Result<Self> {
        let amplitudes: BTreeMap<_, _> = amplitudes
            .into_iter()
            .filter(|(_, a)| a.norm() > 0.0)
            .collect();
        let norm: f64 = amplitudes.values().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Unnormalized(norm));
        }
        let photon_cap = amplitudes.keys().map(|&(n, m)| n + m).max().unwrap_or(0);
        Ok(Self {
            kind,
            amplitudes,
            photon_cap,
            layout,
            truncation: None,
        })
    }

    /// Diagonal spec `sum_n f_n |n_A, (N-n)_B>` with `f = (f_0, ..., f_N)`.
    pub fn from_diagonal(kind: AncillaKind, f: &[C64], layout: ModeLayout) -> Result<Self> {
        if f.is_empty() {
            return Err(Error::InvalidParameter("empty amplitude list".into()));
        }
        let n_total = f.len() - 1;
        let amps = f.iter().enumerate().map(|(n, &a)| ((n, n_total - n), a)).collect();
        let mut spec = Self::new(kind, amps, layout)?;
        spec.photon_cap = n_total;
        Ok(spec)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn amplitude(&self, n: usize, m: usize) -> C64 {
        self.amplitudes.get(&(n, m)).copied().unwrap_or_default()
    }

    /// Sector weights `|f_{n,m}|^2`.
    pub fn weights(&self) -> BTreeMap<(usize, usize), f64> {
        self.amplitudes
            .iter()
            .map(|(&k, a)| (k, a.norm_sqr()))
            .collect()
    }

    /// `(f_0, ..., f_N)` when every sector has `n + m = N`.
    pub fn diagonal(&self) -> Option<Vec<C64>> {
        let n_total = self.photon_cap;
        if self.amplitudes.keys().any(|&(n, m)| n + m != n_total) {
            return None;
        }
        Some((0..=n_total).map(|n| self.amplitude(n, n_total - n)).collect())
    }

    pub fn mean_photons(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|(&(n, m), a)| (n + m) as f64 * a.norm_sqr())
            .sum()
    }

    pub fn modes_per_site(&self) -> usize {
        match self.layout {
            ModeLayout::SingleModePair => 1,
            _ => self.photon_cap,
        }
    }

    /// Normalized basis expansion of sector `(n, m)` under the layout.
    pub fn sector_terms(&self, n: usize, m: usize) -> Vec<(BipartiteFockState, f64)> {
        sector_terms(self.layout, self.modes_per_site(), n, m)
    }

    /// Explicit Fock-space ket of the ancilla.
    pub fn ket(&self) -> Result<SparseKet> {
        let k = self.modes_per_site();
        let mut ket = SparseKet::zero(k, k)?;
        for (&(n, m), &f) in &self.amplitudes {
            for (state, c) in self.sector_terms(n, m) {
                ket.add(state, f * c)?;
            }
        }
        ket.prune();
        Ok(ket)
    }

    /// Serialize to the custom-spec JSON schema.
    pub fn to_custom_json(&self) -> CustomSpecFile {
        CustomSpecFile {
            kind: "custom".into(),
            amplitudes: self
                .amplitudes
                .iter()
                .map(|(&(n, m), a)| CustomAmplitude {
                    n,
                    m,
                    re: a.re,
                    im: a.im,
                })
                .collect(),
            layout: self.layout,
        }
    }
}

/// Basis kets (with coefficients) that make up sector `(n, m)`.
pub fn sector_terms(
    layout: ModeLayout,
    modes: usize,
    n: usize,
    m: usize,
) -> Vec<(BipartiteFockState, f64)> {
    match layout {
        ModeLayout::SingleModePair => vec![(
            BipartiteFockState::new(
                OccupationVector::new(vec![n as u8]),
                OccupationVector::new(vec![m as u8]),
            ),
            1.0,
        )],
        ModeLayout::OnePhotonPerMode => vec![(
            BipartiteFockState::new(
                OccupationVector::with_ones(modes, 0..n),
                OccupationVector::with_ones(modes, modes - m..modes),
            ),
            1.0,
        )],
        ModeLayout::PermutedSuperposition => {
            let pairs = n + m;
            let subsets = combinations(pairs, n);
            let c = 1.0 / (subsets.len() as f64).sqrt();
            subsets
                .into_iter()
                .map(|s| {
                    let b = (0..pairs).filter(|i| !s.contains(i));
                    (
                        BipartiteFockState::new(
                            OccupationVector::with_ones(modes, s.iter().copied()),
                            OccupationVector::with_ones(modes, b),
                        ),
                        c,
                    )
                })
                .collect()
        }
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn real_diag(kind: AncillaKind, f: Vec<f64>, layout: ModeLayout) -> Result<AncillaSpec> {
    let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidParameter(format!("{kind} has no support")));
    }
    let amps: Vec<C64> = f.into_iter().map(|x| C64::new(x / norm, 0.0)).collect();
    AncillaSpec::from_diagonal(kind, &amps, layout)
}

fn need_photons(kind: AncillaKind, n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::InvalidParameter(format!(
            "{kind} needs at least {min} ancilla photon(s), got {n}"
        )));
    }
    Ok(())
}

/// Triangle profile `N/2 - |N/2 - n|`.
fn triangle(n_total: usize) -> Vec<f64> {
    let half = n_total as f64 / 2.0;
    (0..=n_total).map(|n| half - (half - n as f64).abs()).collect()
}

/// Single-mode coherent amplitudes `|α| ^k e^{-|α|²/2}/sqrt(k!)`, truncated
/// where the Poisson tail drops below `tail`.
fn coherent_amplitudes(alpha: f64, tail: f64) -> Vec<f64> {
    let mu = alpha * alpha;
    if mu == 0.0 {
        return vec![1.0];
    }
    let mut out = Vec::new();
    let mut cumulative = 0.0;
    for k in 0.. {
        let ln_p = -mu + k as f64 * mu.ln() - ln_factorial(k);
        let p = ln_p.exp();
        out.push(p.sqrt());
        cumulative += p;
        if 1.0 - cumulative < tail && k as f64 > mu {
            break;
        }
    }
    out
}

/// TMSV Schmidt coefficients `tanh^n r / cosh r` up to `λ^{T+1} < tail`.
fn tmsv_coefficients(r: f64, tail: f64) -> Vec<f64> {
    let t = r.tanh();
    let lam = t * t;
    let mut out = vec![1.0 / r.cosh()];
    let mut pow = lam;
    while pow >= tail {
        let last = *out.last().expect("nonempty");
        out.push(last * t);
        pow *= lam;
    }
    out
}

pub fn gjc() -> AncillaSpec {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    AncillaSpec::from_diagonal(AncillaKind::Gjc, &[s, s], ModeLayout::SingleModePair)
        .expect("normalized")
}

pub fn n_copy_spe(n_total: usize) -> Result<AncillaSpec> {
    need_photons(AncillaKind::NCopySpe, n_total, 1)?;
    let scale = 2f64.powi(n_total as i32);
    let f = (0..=n_total)
        .map(|n| (binomial(n_total, n) / scale).sqrt())
        .collect();
    real_diag(AncillaKind::NCopySpe, f, ModeLayout::PermutedSuperposition)
}

pub fn klm(n_total: usize) -> Result<AncillaSpec> {
    need_photons(AncillaKind::Klm, n_total, 1)?;
    real_diag(
        AncillaKind::Klm,
        vec![1.0; n_total + 1],
        ModeLayout::OnePhotonPerMode,
    )
}

pub fn tri_intensity(n_total: usize) -> Result<AncillaSpec> {
    need_photons(AncillaKind::TriIntensity, n_total, 2)?;
    let f = triangle(n_total).into_iter().map(f64::sqrt).collect();
    real_diag(AncillaKind::TriIntensity, f, ModeLayout::OnePhotonPerMode)
}

pub fn tri_amplitude(n_total: usize) -> Result<AncillaSpec> {
    need_photons(AncillaKind::TriAmplitude, n_total, 2)?;
    real_diag(
        AncillaKind::TriAmplitude,
        triangle(n_total),
        ModeLayout::OnePhotonPerMode,
    )
}

pub fn optimal_klm(n_total: usize) -> Result<AncillaSpec> {
    need_photons(AncillaKind::OptimalKlm, n_total, 1)?;
    let d = (n_total + 2) as f64;
    let f = (0..=n_total)
        .map(|n| (2.0 / d).sqrt() * ((n + 1) as f64 * PI / d).sin())
        .collect();
    real_diag(AncillaKind::OptimalKlm, f, ModeLayout::OnePhotonPerMode)
}

pub fn tpe() -> AncillaSpec {
    let mut amps = BTreeMap::new();
    amps.insert((1, 1), C64::new(1.0, 0.0));
    AncillaSpec::new(AncillaKind::Tpe, amps, ModeLayout::PermutedSuperposition).expect("normalized")
}

pub fn noon(n_total: usize) -> Result<AncillaSpec> {
    need_photons(AncillaKind::Noon, n_total, 1)?;
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut amps = BTreeMap::new();
    amps.insert((n_total, 0), s);
    amps.insert((0, n_total), s);
    AncillaSpec::new(AncillaKind::Noon, amps, ModeLayout::SingleModePair)
}

fn check_nonneg(name: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {x}")));
    }
    Ok(())
}

fn renormalized(
    kind: AncillaKind,
    weights: BTreeMap<(usize, usize), f64>,
    truncation: usize,
) -> Result<AncillaSpec> {
    let total: f64 = weights.values().sum();
    let amps = weights
        .into_iter()
        .map(|(k, w)| (k, C64::new((w / total).sqrt(), 0.0)))
        .collect();
    let mut spec = AncillaSpec::new(kind, amps, ModeLayout::SingleModePair)?;
    spec.truncation = Some(truncation);
    Ok(spec)
}

pub fn tmsv(r: f64) -> Result<AncillaSpec> {
    check_nonneg("squeezing r", r)?;
    let t = tmsv_coefficients(r, TAIL_WEIGHT);
    let truncation = t.len() - 1;
    let w = t.iter().enumerate().map(|(n, c)| ((n, n), c * c)).collect();
    renormalized(AncillaKind::Tmsv, w, truncation)
}

pub fn coherent_pair(alpha: f64) -> Result<AncillaSpec> {
    check_nonneg("|alpha|", alpha)?;
    // Half the budget per mode keeps the joint tail below TAIL_WEIGHT.
    let c = coherent_amplitudes(alpha, TAIL_WEIGHT / 2.0);
    let truncation = c.len() - 1;
    let mut w = BTreeMap::new();
    for (n, a) in c.iter().enumerate() {
        for (m, b) in c.iter().enumerate() {
            w.insert((n, m), (a * b).powi(2));
        }
    }
    renormalized(AncillaKind::CoherentPair, w, truncation)
}

/// TMSV together with the coherent reference `|α>_A |α>_B`.
///
/// The four-mode state is represented by its sector weights
/// `sum_k |t_k|^2 |c_{n-k}|^2 |c_{m-k}|^2`; within-sector structure does not
/// affect the QFI ratio, so the single-mode-pair layout is used as the
/// sector representative.
pub fn tmsv_with_reference(r: f64, alpha: f64) -> Result<AncillaSpec> {
    check_nonneg("squeezing r", r)?;
    check_nonneg("|alpha|", alpha)?;
    let t = tmsv_coefficients(r, TAIL_WEIGHT / 3.0);
    let c = coherent_amplitudes(alpha, TAIL_WEIGHT / 3.0);
    let mut w: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (k, tk) in t.iter().enumerate() {
        for (i, ci) in c.iter().enumerate() {
            for (j, cj) in c.iter().enumerate() {
                *w.entry((k + i, k + j)).or_default() += (tk * ci * cj).powi(2);
            }
        }
    }
    renormalized(AncillaKind::TmsvWithReference, w, t.len().max(c.len()) - 1)
}

/// Parse a custom spec in the documented JSON schema.
pub fn custom_from_json(json: &str) -> Result<AncillaSpec> {
    let file: CustomSpecFile =
        serde_json::from_str(json).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    file.into_spec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomAmplitude {
    pub n: usize,
    pub m: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// `{"kind":"custom","amplitudes":[{"n":..,"m":..,"re":..,"im":..}],"layout":".."}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomSpecFile {
    pub kind: String,
    pub amplitudes: Vec<CustomAmplitude>,
    #[serde(default)]
    pub layout: ModeLayout,
}

impl CustomSpecFile {
    pub fn into_spec(self) -> Result<AncillaSpec> {
        if self.kind != "custom" {
            return Err(Error::UnknownKind(self.kind));
        }
        let mut amps = BTreeMap::new();
        for a in self.amplitudes {
            *amps.entry((a.n, a.m)).or_insert_with(C64::default) += C64::new(a.re, a.im);
        }
        AncillaSpec::new(AncillaKind::Custom, amps, self.layout)
    }
}

/// Construct a catalog family.
pub fn build(kind: AncillaKind, p: &BuildParams) -> Result<AncillaSpec> {
    let n = p.photons;
    match kind {
        AncillaKind::Gjc => Ok(gjc()),
        AncillaKind::NCopySpe => n_copy_spe(n),
        AncillaKind::Klm => klm(n),
        AncillaKind::TriIntensity => tri_intensity(n),
        AncillaKind::TriAmplitude => tri_amplitude(n),
        AncillaKind::OptimalKlm => optimal_klm(n),
        AncillaKind::Tmsv => tmsv(p.squeezing),
        AncillaKind::TmsvWithReference => tmsv_with_reference(p.squeezing, p.alpha),
        AncillaKind::CoherentPair => coherent_pair(p.alpha),
        AncillaKind::Tpe => Ok(tpe()),
        AncillaKind::Noon => noon(n),
        AncillaKind::Custom => Err(Error::Unsupported(
            "custom ancillas are read from JSON, not built".into(),
        )),
    }
}

/// Table I closed-form QFI ratio. Families without a closed form (and the
/// triangular families at odd N) use the sector-weight formula.
pub fn closed_ratio(kind: AncillaKind, p: &BuildParams) -> Result<f64> {
    let n = p.photons;
    let nf = n as f64;
    match kind {
        AncillaKind::Gjc => Ok(0.5),
        AncillaKind::NCopySpe | AncillaKind::Klm => {
            need_photons(kind, n, 1)?;
            Ok(nf / (nf + 1.0))
        }
        AncillaKind::TriIntensity if n % 2 == 0 => {
            need_photons(kind, n, 2)?;
            let s: f64 = (1..=n / 2).map(|i| 1.0 / (2 * i - 1) as f64).sum();
            Ok(1.0 - 4.0 / (nf * nf) * s)
        }
        AncillaKind::TriAmplitude if n % 2 == 0 => {
            need_photons(kind, n, 2)?;
            let s: f64 = (1..=n / 2)
                .map(|i| {
                    let (a, b) = ((i * i) as f64, ((i - 1) * (i - 1)) as f64);
                    a * b / (a + b)
                })
                .sum();
            Ok(48.0 / (nf * (nf * nf + 2.0)) * s)
        }
        AncillaKind::CoherentPair => {
            check_nonneg("|alpha|", p.alpha)?;
            let r = p.alpha * p.alpha;
            if r == 0.0 {
                return Ok(0.0);
            }
            // 1 - (1 - e^{-2r})/(2r), with expm1 for small r.
            Ok(1.0 + (-2.0 * r).exp_m1() / (2.0 * r))
        }
        AncillaKind::Tmsv | AncillaKind::Tpe => Ok(0.0),
        AncillaKind::Noon => {
            need_photons(kind, n, 1)?;
            Ok(if n == 1 { 0.5 } else { 0.0 })
        }
        AncillaKind::Custom => Err(Error::Unsupported("custom ancillas have no closed form".into())),
        _ => Ok(prop1_ratio(&build(kind, p)?.weights())),
    }
}

/// Fisher information of the N-copy linear-optical scheme, N = 1..5,
/// as functions of `phi = delta - theta`. Returns `(F_|g|, F_theta)`.
pub fn ncopy_fi_closed(n_total: usize, p: &SourceParams, phi: f64) -> Result<(f64, f64)> {
    let g = p.g_mod;
    let x = g * phi.cos();
    let (c2, s2) = (phi.cos().powi(2), phi.sin().powi(2));
    // Common factor multiplying cos^2(phi) (|g|) or sin^2(phi) |g|^2 (theta).
    let k = match n_total {
        1 => 0.5 / (1.0 - x * x),
        2 => 3.0 / ((1.0 - x) * (5.0 + 4.0 * x)),
        3 => 3.0 * (9.0 + 7.0 * x) / (4.0 * (1.0 - x * x) * (10.0 + 6.0 * x)),
        4 => 10.0 * (16.0 + 9.0 * x) / ((1.0 - x) * (13.0 + 12.0 * x) * (17.0 + 8.0 * x)),
        5 => {
            5.0 * (79.0 + 106.0 * x + 31.0 * x * x)
                / ((1.0 - x * x) * (26.0 + 10.0 * x) * (20.0 + 16.0 * x))
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "closed-form N-copy Fisher information exists for N = 1..5, got {n_total}"
            )))
        }
    };
    Ok((k * c2 * p.epsilon, k * s2 * g * g * p.epsilon))
}

/// Squeezing-derived `y = 2 e^{-2r}`.
pub fn cv_y(r: f64) -> f64 {
    2.0 * (-2.0 * r).exp()
}

/// `y` for a TMSV with total mean photon number `mean_n`.
pub fn cv_y_from_mean(mean_n: f64) -> f64 {
    let s = (mean_n / 2.0).sqrt() + (mean_n / 2.0 + 1.0).sqrt();
    2.0 / (s * s)
}

/// Squeezing parameter with `2 sinh^2 r = mean_n`.
pub fn squeezing_for_mean(mean_n: f64) -> f64 {
    (mean_n / 2.0).sqrt().asinh()
}

/// CV-teleportation Fisher information `(F_|g|, F_theta)` at `y`.
pub fn cv_fi_closed_y(p: &SourceParams, y: f64) -> (f64, f64) {
    let e = p.epsilon;
    let g2 = p.g_mod * p.g_mod;
    let f_theta = 2.0 * e * e * g2 / (2.0 * y + e * (2.0 + e - e * g2 + 2.0 * y));
    let num = 2.0
        * e
        * e
        * (-e * (2.0 + e).powi(2) + e.powi(3) * g2 * g2
            - 4.0 * (1.0 + e) * (2.0 + e) * y
            - 4.0 * (2.0 + e) * y * y);
    let den = (e * (g2 - 1.0) - 2.0 * y)
        * (e * (-2.0 - e + e * g2) - 2.0 * (1.0 + e) * y)
        * (e * e * (g2 - 1.0) - 4.0 * (1.0 + y) - 2.0 * e * (2.0 + y));
    (num / den, f_theta)
}

/// CV-teleportation Fisher information at squeezing `r`.
pub fn cv_fi_closed(p: &SourceParams, r: f64) -> Result<(f64, f64)> {
    check_nonneg("squeezing r", r)?;
    Ok(cv_fi_closed_y(p, cv_y(r)))
}

pub fn squeezed_params(r: f64, alpha: Option<f64>) -> Result<SqueezedParams> {
    let spec = tmsv(r)?;
    Ok(SqueezedParams {
        r,
        mean_n: 2.0 * r.sinh().powi(2),
        truncation: spec.truncation.unwrap_or(0),
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssr::{twirl_local, Sector, SectorLabel};

    fn weights_of(spec: &AncillaSpec) -> Vec<f64> {
        spec.diagonal().unwrap().iter().map(|a| a.norm_sqr()).collect()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn optimal_klm_two_photons() {
        assert!(close(&weights_of(&optimal_klm(2).unwrap()), &[0.25, 0.5, 0.25], 1e-15));
    }

    #[test]
    fn n_copy_two_photons() {
        let s = n_copy_spe(2).unwrap();
        assert!(close(&weights_of(&s), &[0.25, 0.5, 0.25], 1e-15));
        assert_eq!(s.layout, ModeLayout::PermutedSuperposition);
    }

    #[test]
    fn tpe_lives_in_one_sector() {
        let s = tpe();
        assert_eq!(s.amplitudes.keys().copied().collect::<Vec<_>>(), vec![(1, 1)]);
        let bd = twirl_local(&s.ket().unwrap());
        assert_eq!(bd.blocks.len(), 1);
        assert_eq!(bd.blocks[0].sector, Sector::Local(SectorLabel::new(1, 1)));
        assert!((bd.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in AncillaKind::ALL {
            assert_eq!(k.name().parse::<AncillaKind>().unwrap(), k);
        }
        assert_eq!("n_copy".parse::<AncillaKind>().unwrap(), AncillaKind::NCopySpe);
        assert!(matches!("bogus".parse::<AncillaKind>(), Err(Error::UnknownKind(_))));
    }

    #[test]
    fn closed_ratios_from_the_table() {
        let p = BuildParams::photons(3);
        assert_eq!(closed_ratio(AncillaKind::Gjc, &p).unwrap(), 0.5);
        assert!((closed_ratio(AncillaKind::Klm, &p).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(closed_ratio(AncillaKind::Noon, &p).unwrap(), 0.0);
        let coh = BuildParams {
            alpha: 1.0,
            ..p
        };
        let expected = 1.0 - (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((closed_ratio(AncillaKind::CoherentPair, &coh).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.567_667_6).abs() < 1e-7);
    }

    #[test]
    fn catalog_matches_sector_formula() {
        for n in 1..=12 {
            let p = BuildParams::photons(n);
            for kind in [
                AncillaKind::Gjc,
                AncillaKind::NCopySpe,
                AncillaKind::Klm,
                AncillaKind::TriIntensity,
                AncillaKind::TriAmplitude,
                AncillaKind::OptimalKlm,
                AncillaKind::Tpe,
                AncillaKind::Noon,
            ] {
                if n < 2 && matches!(kind, AncillaKind::TriIntensity | AncillaKind::TriAmplitude) {
                    assert!(build(kind, &p).is_err());
                    continue;
                }
                let spec = build(kind, &p).unwrap();
                let numeric = prop1_ratio(&spec.weights());
                let closed = closed_ratio(kind, &p).unwrap();
                assert!((numeric - closed).abs() < 1e-9, "{kind} N={n}: {numeric} vs {closed}");
            }
        }
    }

    #[test]
    fn coherent_truncation_converges_to_closed_form() {
        for alpha2 in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let p = BuildParams {
                alpha: f64::sqrt(alpha2),
                ..BuildParams::default()
            };
            let spec = build(AncillaKind::CoherentPair, &p).unwrap();
            let numeric = prop1_ratio(&spec.weights());
            let closed = closed_ratio(AncillaKind::CoherentPair, &p).unwrap();
            assert!((numeric - closed).abs() < 1e-8, "r={alpha2}: {numeric} vs {closed}");
        }
    }

    #[test]
    fn zero_ratio_families_are_exactly_zero() {
        assert_eq!(prop1_ratio(&tmsv(1.3).unwrap().weights()), 0.0);
        assert_eq!(prop1_ratio(&tpe().weights()), 0.0);
        for n in 2..=8 {
            assert_eq!(prop1_ratio(&noon(n).unwrap().weights()), 0.0);
        }
    }

    #[test]
    fn tmsv_truncation_tail() {
        let r: f64 = 1.2;
        let spec = tmsv(r).unwrap();
        let t = spec.truncation.unwrap();
        let lam = r.tanh().powi(2);
        assert!(lam.powi(t as i32 + 1) < TAIL_WEIGHT);
        assert!(lam.powi(t as i32) >= TAIL_WEIGHT);
        let sp = squeezed_params(r, None).unwrap();
        assert!((sp.mean_n - 2.0 * r.sinh().powi(2)).abs() < 1e-15);
        // Mean photon number of the truncated state matches 2 sinh^2 r.
        assert!((spec.mean_photons() - sp.mean_n).abs() < 1e-7);
    }

    #[test]
    fn reference_makes_tmsv_useful() {
        let spec = tmsv_with_reference(1.0, 2.0).unwrap();
        let h = prop1_ratio(&spec.weights());
        assert!(h > 0.5 && h < 1.0);
    }

    #[test]
    fn layouts_produce_normalized_kets_with_right_sectors() {
        for spec in [klm(3).unwrap(), n_copy_spe(3).unwrap(), optimal_klm(4).unwrap(), gjc()] {
            let ket = spec.ket().unwrap();
            assert!((ket.norm_sqr() - 1.0).abs() < 1e-12);
            let bd = twirl_local(&ket);
            for b in &bd.blocks {
                let Sector::Local(l) = b.sector else { unreachable!() };
                assert!((b.trace() - spec.amplitude(l.n_a, l.n_b).norm_sqr()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn permuted_layout_counts_subsets() {
        let terms = sector_terms(ModeLayout::PermutedSuperposition, 4, 2, 2);
        assert_eq!(terms.len(), 6);
        for (s, c) in &terms {
            assert_eq!(s.local_photon_numbers(), (2, 2));
            assert!((c - 1.0 / 6f64.sqrt()).abs() < 1e-15);
            // Each pair carries exactly one photon.
            for i in 0..4 {
                assert_eq!(s.site_a.get(i) + s.site_b.get(i), 1);
            }
        }
    }

    #[test]
    fn custom_json_round_trip() {
        let json = r#"{"kind":"custom","amplitudes":[{"n":1,"m":0,"re":0.6,"im":0.0},{"n":0,"m":1,"re":0.0,"im":0.8}],"layout":"single_mode_pair"}"#;
        let spec = custom_from_json(json).unwrap();
        assert_eq!(spec.kind, AncillaKind::Custom);
        assert!((prop1_ratio(&spec.weights()) - 2.0 * 0.36 * 0.64).abs() < 1e-15);
        let back = serde_json::to_string(&spec.to_custom_json()).unwrap();
        assert_eq!(custom_from_json(&back).unwrap(), spec);
        let bad = r#"{"kind":"custom","amplitudes":[{"n":1,"m":0,"re":0.5}]}"#;
        assert!(matches!(custom_from_json(bad), Err(Error::Unnormalized(_))));
    }

    #[test]
    fn ncopy_printed_limits() {
        let p = SourceParams::new(1e-3, 1.0, 0.0).unwrap();
        let (_, ft) = ncopy_fi_closed(2, &p, 1e-6).unwrap();
        assert!((ft / p.epsilon - 2.0 / 3.0).abs() < 1e-3);
        let p = SourceParams::new(1e-3, 0.9, 0.0).unwrap();
        let (_, ft) = ncopy_fi_closed(2, &p, 1e-6).unwrap();
        assert!(ft.abs() < 1e-12);
        let p = SourceParams::new(1e-3, 1e-6, 0.0).unwrap();
        let (_, ft) = ncopy_fi_closed(2, &p, PI / 2.0).unwrap();
        assert!((ft / (p.g_mod * p.g_mod * p.epsilon) - 0.6).abs() < 1e-9);
        assert!(ncopy_fi_closed(6, &p, 0.0).is_err());
    }

    #[test]
    fn ncopy_point_source_scaling() {
        // At |g| = 1 and phi -> 0 the theta ratio reaches 1 - 1/(N+1).
        for n in 1..=5 {
            let p = SourceParams::new(1e-3, 1.0, 0.0).unwrap();
            let (_, ft) = ncopy_fi_closed(n, &p, 1e-5).unwrap();
            let target = n as f64 / (n as f64 + 1.0);
            assert!((ft / p.epsilon - target).abs() < 1e-6, "N={n}: {}", ft / p.epsilon);
        }
    }

    #[test]
    fn cv_limits() {
        let p = SourceParams::new(1e-6, 0.5, 0.0).unwrap();
        let (fg, ft) = cv_fi_closed_y(&p, 0.0);
        assert!((ft / (0.25 * p.epsilon) - 1.0).abs() < 1e-5);
        assert!((fg / (p.epsilon / 0.75) - 1.0).abs() < 1e-5);
        let p = SourceParams::new(1e-3, 0.5, 0.0).unwrap();
        let (fg, ft) = cv_fi_closed(&p, 0.0).unwrap();
        assert!(ft / (0.25 * p.epsilon) < 5e-3);
        assert!(fg / (p.epsilon / 0.75) < 5e-3);
    }

    #[test]
    fn cv_y_relations() {
        let n = 7.5;
        let r = squeezing_for_mean(n);
        assert!((2.0 * r.sinh().powi(2) - n).abs() < 1e-12);
        assert!((cv_y(r) - cv_y_from_mean(n)).abs() < 1e-12);
    }
}
