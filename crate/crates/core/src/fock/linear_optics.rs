//! Passive linear-optical mode transformations.
//!
//! A [`ModeUnitary`] `U` acts on creation operators as
//! `a_p^† -> sum_q U[p][q] a_q^†`.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{
    factorial, permanent, BipartiteFockState, OccupationVector, Site, SparseKet, C64,
    DROP_THRESHOLD, MAX_PHOTONS,
};
use crate::error::{Error, Result};

const UNITARITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary {
    matrix: DMatrix<C64>,
}

impl ModeUnitary {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Shape(format!(
                "mode unitary must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let dev = unitarity_deviation(&matrix);
        if dev >= UNITARITY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { matrix })
    }

    /// Diagonal phase `exp(i phi)` on a single mode.
    pub fn phase(phi: f64) -> Self {
        Self {
            matrix: DMatrix::from_element(1, 1, C64::from_polar(1.0, phi)),
        }
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::new(DMatrix::identity(d, d))
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn entry(&self, p: usize, q: usize) -> C64 {
        self.matrix[(p, q)]
    }
}

/// Unitary factor `Q` of the QR decomposition of `m`, with the phases of
/// `R`'s diagonal absorbed so that the result is unique.
///
/// Fails when `m` is (numerically) rank deficient.
pub fn unitary_from_matrix(m: DMatrix<C64>) -> Result<ModeUnitary> {
    let d = m.nrows();
    if d == 0 || m.ncols() != d {
        return Err(Error::Shape(format!("{}x{} matrix", m.nrows(), m.ncols())));
    }
    let qr = m.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        if rjj.norm() < 1e-8 {
            return Err(Error::InvalidParameter("rank-deficient matrix".into()));
        }
        let phase = rjj / rjj.norm();
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    ModeUnitary::new(q)
}

/// Haar-random `d x d` unitary (QR of a complex Ginibre matrix).
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ModeUnitary {
    loop {
        let m = DMatrix::from_fn(d, d, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im)
        });
        if let Ok(u) = unitary_from_matrix(m) {
            return u;
        }
    }
}

/// `max |(U^† U - I)_{ij}|`.
pub fn unitarity_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let prod = m.adjoint() * m;
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    dev
}

/// Discrete Fourier transform on `d` modes: `U[p][q] = exp(2 pi i p q / d) / sqrt(d)`.
pub fn qft_matrix(d: usize) -> Result<ModeUnitary> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let norm = 1.0 / (d as f64).sqrt();
    let matrix = DMatrix::from_fn(d, d, |p, q| {
        // Reduce pq mod d first so large products keep full phase accuracy.
        let k = (p * q) % d;
        C64::from_polar(norm, 2.0 * PI * k as f64 / d as f64)
    });
    Ok(ModeUnitary { matrix })
}

/// `<output| U |input>` via the permanent of the row/column-repeated submatrix.
///
/// Returns exactly zero when the photon numbers differ.
pub fn transition_amplitude(
    input: &OccupationVector,
    output: &OccupationVector,
    u: &ModeUnitary,
) -> Result<C64> {
    let d = u.dimension();
    if input.modes() != d || output.modes() != d {
        return Err(Error::Shape(format!(
            "unitary covers {d} modes, occupations have {} and {}",
            input.modes(),
            output.modes()
        )));
    }
    let n = input.total();
    if n != output.total() {
        return Ok(C64::default());
    }
    if n > MAX_PHOTONS {
        return Err(Error::Capacity {
            what: "photons",
            value: n,
            limit: MAX_PHOTONS,
        });
    }
    let rows = input.mode_list();
    let cols = output.mode_list();
    let sub = DMatrix::from_fn(n, n, |i, j| u.entry(rows[i], cols[j]));
    let per = permanent(&sub)?;
    Ok(per / (input.factorial_product() * output.factorial_product()).sqrt())
}

/// Image of `|occ>` under `u` as a map from output occupations to amplitudes.
///
/// Substitutes `a_p^† -> sum_q U[p][q] a_q^†` photon by photon and keeps
/// the resulting creation-operator monomials, then converts them back to
/// normalized Fock kets.
fn expand_occupation(occ: &[u8], u: &ModeUnitary) -> BTreeMap<Vec<u8>, C64> {
    let d = u.dimension();
    let mut monomials: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
    monomials.insert(vec![0u8; d], C64::new(1.0, 0.0));
    for (p, &count) in occ.iter().enumerate() {
        for _ in 0..count {
            let mut next: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
            for (mono, coeff) in &monomials {
                for q in 0..d {
                    let w = u.entry(p, q);
                    if w.norm() == 0.0 {
                        continue;
                    }
                    let mut m = mono.clone();
                    m[q] += 1;
                    *next.entry(m).or_default() += coeff * w;
                }
            }
            monomials = next;
        }
    }
    let in_norm: f64 = occ.iter().map(|&n| factorial(n as usize)).product::<f64>().sqrt();
    monomials
        .into_iter()
        .map(|(mono, coeff)| {
            let out_norm: f64 = mono.iter().map(|&n| factorial(n as usize)).product::<f64>().sqrt();
            (mono, coeff * (out_norm / in_norm))
        })
        .collect()
}

/// Apply `u` to the listed modes of one site; other modes are untouched.
///
/// `modes[i]` is the site-local mode that plays the role of row/column `i`
/// of `u`.
pub fn apply_mode_unitary(
    state: &SparseKet,
    u: &ModeUnitary,
    site: Site,
    modes: &[usize],
) -> Result<SparseKet> {
    let (ma, mb) = state.mode_counts();
    let site_modes = match site {
        Site::A => ma,
        Site::B => mb,
    };
    if modes.len() != u.dimension() {
        return Err(Error::Shape(format!(
            "unitary of dimension {} applied to {} modes",
            u.dimension(),
            modes.len()
        )));
    }
    let mut seen = vec![false; site_modes];
    for &m in modes {
        if m >= site_modes || seen[m] {
            return Err(Error::Shape(format!(
                "mode list {modes:?} invalid for a site with {site_modes} modes"
            )));
        }
        seen[m] = true;
    }

    let mut cache: HashMap<Vec<u8>, BTreeMap<Vec<u8>, C64>> = HashMap::new();
    let mut out = SparseKet::zero(ma, mb)?;
    for (basis, amp) in state.iter() {
        let occ = basis.site(site);
        let local: Vec<u8> = modes.iter().map(|&m| occ.as_slice()[m]).collect();
        let photons: usize = local.iter().map(|&n| n as usize).sum();
        if photons > MAX_PHOTONS {
            return Err(Error::Capacity {
                what: "photons",
                value: photons,
                limit: MAX_PHOTONS,
            });
        }
        let image = cache
            .entry(local.clone())
            .or_insert_with(|| expand_occupation(&local, u));
        for (out_local, coeff) in image.iter() {
            let a = amp * coeff;
            if a.norm() < DROP_THRESHOLD {
                continue;
            }
            let mut new_occ = occ.clone();
            for (i, &m) in modes.iter().enumerate() {
                new_occ.set(m, out_local[i]);
            }
            let new_basis = match site {
                Site::A => BipartiteFockState::new(new_occ, basis.site_b.clone()),
                Site::B => BipartiteFockState::new(basis.site_a.clone(), new_occ),
            };
            out.add(new_basis, a)?;
        }
    }
    out.prune();
    Ok(out)
}
