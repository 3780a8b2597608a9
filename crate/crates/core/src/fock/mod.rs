//! Multimode bosonic Fock states split over two sites.
//!
//! Basis kets are [`BipartiteFockState`]s ordered lexicographically on
//! (site A occupations, site B occupations). A [`SparseKet`] stores only the
//! nonzero amplitudes in that order, so iteration and block extraction are
//! deterministic.

mod linear_optics;
mod permanent;

pub use linear_optics::{
    apply_mode_unitary, haar_unitary, qft_matrix, transition_amplitude, unitarity_deviation,
    unitary_from_matrix, ModeUnitary,
};
pub use permanent::permanent;

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Largest total photon number handled by the Fock simulator.
pub const MAX_PHOTONS: usize = 12;
/// Largest number of modes at a single site.
pub const MAX_MODES_PER_SITE: usize = 12;
/// Amplitudes below this magnitude are dropped after every expansion.
pub const DROP_THRESHOLD: f64 = 1e-14;

/// Photon counts per mode, `|n_1, ..., n_K>`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct OccupationVector(Vec<u8>);

impl OccupationVector {
    pub fn new(occupations: Vec<u8>) -> Self {
        Self(occupations)
    }

    pub fn vacuum(modes: usize) -> Self {
        Self(vec![0; modes])
    }

    /// Build from `usize` counts, checking the photon capacity.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total > MAX_PHOTONS {
            return Err(Error::Capacity {
                what: "photons",
                value: total,
                limit: MAX_PHOTONS,
            });
        }
        Ok(Self(counts.iter().map(|&c| c as u8).collect()))
    }

    /// Mode list with a single photon in each listed mode.
    pub fn with_ones(modes: usize, occupied: impl IntoIterator<Item = usize>) -> Self {
        let mut occ = vec![0u8; modes];
        for m in occupied {
            occ[m] += 1;
        }
        Self(occ)
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }

    pub fn get(&self, mode: usize) -> usize {
        self.0[mode] as usize
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn set(&mut self, mode: usize, count: u8) {
        self.0[mode] = count;
    }

    /// Occupations of `self` followed by those of `other`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self(v)
    }

    /// Per-photon list of occupied modes in nondecreasing order.
    pub fn mode_list(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(m, &n)| std::iter::repeat_n(m, n as usize))
            .collect()
    }

    /// Product of factorials of the occupations.
    pub fn factorial_product(&self) -> f64 {
        self.0.iter().map(|&n| factorial(n as usize)).product()
    }
}

impl fmt::Debug for OccupationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ">")
    }
}

impl From<Vec<u8>> for OccupationVector {
    fn from(v: Vec<u8>) -> Self {
        Self(v)
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Which telescope a mode lives at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Site {
    A,
    B,
}

/// A Fock basis ket of the two-site system.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BipartiteFockState {
    pub site_a: OccupationVector,
    pub site_b: OccupationVector,
}

impl BipartiteFockState {
    pub fn new(site_a: OccupationVector, site_b: OccupationVector) -> Self {
        Self { site_a, site_b }
    }

    pub fn vacuum(modes_a: usize, modes_b: usize) -> Self {
        Self::new(
            OccupationVector::vacuum(modes_a),
            OccupationVector::vacuum(modes_b),
        )
    }

    /// `(n_A, n_B)`: total photons at each site.
    pub fn local_photon_numbers(&self) -> (usize, usize) {
        (self.site_a.total(), self.site_b.total())
    }

    pub fn total_photons(&self) -> usize {
        self.site_a.total() + self.site_b.total()
    }

    pub fn site(&self, site: Site) -> &OccupationVector {
        match site {
            Site::A => &self.site_a,
            Site::B => &self.site_b,
        }
    }

    pub fn mode_counts(&self) -> (usize, usize) {
        (self.site_a.modes(), self.site_b.modes())
    }

    /// Tensor product on disjoint modes: `self`'s modes come first at each site.
    pub fn concat(&self, other: &Self) -> Self {
        Self::new(
            self.site_a.concat(&other.site_a),
            self.site_b.concat(&other.site_b),
        )
    }
}

impl fmt::Debug for BipartiteFockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}_A{:?}_B", self.site_a, self.site_b)
    }
}

/// `(n_A, n_B)` of a basis ket.
pub fn local_photon_numbers(s: &BipartiteFockState) -> (usize, usize) {
    s.local_photon_numbers()
}

/// Sparse pure state over a fixed number of modes per site.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseKet {
    modes_a: usize,
    modes_b: usize,
    amplitudes: BTreeMap<BipartiteFockState, C64>,
    tolerance: f64,
}

impl SparseKet {
    /// The zero vector over the given modes.
    pub fn zero(modes_a: usize, modes_b: usize) -> Result<Self> {
        for (m, what) in [(modes_a, "modes at site A"), (modes_b, "modes at site B")] {
            if m > MAX_MODES_PER_SITE {
                return Err(Error::Capacity {
                    what,
                    value: m,
                    limit: MAX_MODES_PER_SITE,
                });
            }
        }
        Ok(Self {
            modes_a,
            modes_b,
            amplitudes: BTreeMap::new(),
            tolerance: DROP_THRESHOLD,
        })
    }

    pub fn vacuum(modes_a: usize, modes_b: usize) -> Result<Self> {
        Self::basis(BipartiteFockState::vacuum(modes_a, modes_b))
    }

    pub fn basis(state: BipartiteFockState) -> Result<Self> {
        let (ma, mb) = state.mode_counts();
        let mut ket = Self::zero(ma, mb)?;
        ket.add(state, C64::new(1.0, 0.0))?;
        Ok(ket)
    }

    /// Collect `(basis, amplitude)` pairs; repeated kets are summed.
    pub fn from_terms(
        modes_a: usize,
        modes_b: usize,
        terms: impl IntoIterator<Item = (BipartiteFockState, C64)>,
    ) -> Result<Self> {
        let mut ket = Self::zero(modes_a, modes_b)?;
        for (s, a) in terms {
            ket.add(s, a)?;
        }
        ket.prune();
        Ok(ket)
    }

    pub fn mode_counts(&self) -> (usize, usize) {
        (self.modes_a, self.modes_b)
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Accumulate `amp` onto `state`.
    pub fn add(&mut self, state: BipartiteFockState, amp: C64) -> Result<()> {
        if state.mode_counts() != (self.modes_a, self.modes_b) {
            return Err(Error::Shape(format!(
                "basis ket has {:?} modes, state expects {:?}",
                state.mode_counts(),
                (self.modes_a, self.modes_b)
            )));
        }
        let n = state.total_photons();
        if n > MAX_PHOTONS {
            return Err(Error::Capacity {
                what: "photons",
                value: n,
                limit: MAX_PHOTONS,
            });
        }
        *self.amplitudes.entry(state).or_default() += amp;
        Ok(())
    }

    /// Remove amplitudes below the drop threshold.
    pub fn prune(&mut self) {
        let tol = self.tolerance;
        self.amplitudes.retain(|_, a| a.norm() >= tol);
    }

    pub fn amplitude(&self, state: &BipartiteFockState) -> C64 {
        self.amplitudes.get(state).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BipartiteFockState, &C64)> {
        self.amplitudes.iter()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(mut self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::Unnormalized(0.0));
        }
        for a in self.amplitudes.values_mut() {
            *a /= n;
        }
        self.prune();
        Ok(self)
    }

    pub fn scale(mut self, c: C64) -> Self {
        for a in self.amplitudes.values_mut() {
            *a *= c;
        }
        self.prune();
        self
    }

    /// Largest total photon number in the support.
    pub fn max_photons(&self) -> usize {
        self.amplitudes
            .keys()
            .map(BipartiteFockState::total_photons)
            .max()
            .unwrap_or(0)
    }

    /// Tensor product on disjoint modes (`self`'s modes first at each site).
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut out = Self::zero(self.modes_a + other.modes_a, self.modes_b + other.modes_b)?;
        for (s, a) in &self.amplitudes {
            for (t, b) in &other.amplitudes {
                out.add(s.concat(t), a * b)?;
            }
        }
        out.prune();
        Ok(out)
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.mode_counts() != other.mode_counts() {
            return Err(Error::Shape(format!(
                "inner product of states over {:?} and {:?} modes",
                self.mode_counts(),
                other.mode_counts()
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .filter_map(|(s, a)| other.amplitudes.get(s).map(|b| a.conj() * b))
            .sum())
    }
}

/// Tensor product of two kets on disjoint modes.
pub fn tensor(a: &SparseKet, b: &SparseKet) -> Result<SparseKet> {
    a.tensor(b)
}

/// `<a|b>`.
pub fn inner(a: &SparseKet, b: &SparseKet) -> Result<C64> {
    a.inner(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn occ(v: &[u8]) -> OccupationVector {
        OccupationVector::new(v.to_vec())
    }

    #[test]
    fn tensor_of_vacua_is_vacuum() {
        let v1 = SparseKet::vacuum(1, 2).unwrap();
        let v2 = SparseKet::vacuum(2, 1).unwrap();
        let t = tensor(&v1, &v2).unwrap();
        assert_eq!(t, SparseKet::vacuum(3, 3).unwrap());
    }

    #[test]
    fn inner_of_normalized_state_is_one() {
        let s = SparseKet::from_terms(
            1,
            1,
            [
                (BipartiteFockState::new(occ(&[0]), occ(&[1])), C64::new(0.6, 0.0)),
                (BipartiteFockState::new(occ(&[1]), occ(&[0])), C64::new(0.0, 0.8)),
            ],
        )
        .unwrap();
        let ip = inner(&s, &s).unwrap();
        assert!((ip - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn inner_rejects_mode_mismatch() {
        let a = SparseKet::vacuum(1, 1).unwrap();
        let b = SparseKet::vacuum(2, 1).unwrap();
        assert!(matches!(inner(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn local_numbers_count_each_site() {
        let s = BipartiteFockState::new(occ(&[1, 1]), occ(&[0, 1]));
        assert_eq!(local_photon_numbers(&s), (2, 1));
    }

    #[test]
    fn add_rejects_wrong_mode_count_and_excess_photons() {
        let mut k = SparseKet::zero(1, 1).unwrap();
        let wrong = BipartiteFockState::new(occ(&[0, 0]), occ(&[0]));
        assert!(k.add(wrong, C64::new(1.0, 0.0)).is_err());
        let heavy = BipartiteFockState::new(occ(&[7]), occ(&[6]));
        assert!(matches!(
            k.add(heavy, C64::new(1.0, 0.0)),
            Err(Error::Capacity { .. })
        ));
        assert!(SparseKet::zero(13, 0).is_err());
    }

    #[test]
    fn basis_order_is_site_a_then_site_b() {
        let s = SparseKet::from_terms(
            1,
            1,
            [
                (BipartiteFockState::new(occ(&[1]), occ(&[0])), C64::new(1.0, 0.0)),
                (BipartiteFockState::new(occ(&[0]), occ(&[2])), C64::new(1.0, 0.0)),
                (BipartiteFockState::new(occ(&[0]), occ(&[1])), C64::new(1.0, 0.0)),
            ],
        )
        .unwrap();
        let keys: Vec<_> = s.iter().map(|(k, _)| k.clone()).collect();
        assert_eq!(keys[0], BipartiteFockState::new(occ(&[0]), occ(&[1])));
        assert_eq!(keys[1], BipartiteFockState::new(occ(&[0]), occ(&[2])));
        assert_eq!(keys[2], BipartiteFockState::new(occ(&[1]), occ(&[0])));
    }

    #[test]
    fn mode_list_expands_counts() {
        assert_eq!(occ(&[2, 1, 0]).mode_list(), vec![0, 0, 1]);
        assert_eq!(occ(&[0, 0, 3]).mode_list(), vec![2, 2, 2]);
    }
}
