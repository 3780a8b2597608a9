//! Photon-number superselection: global and local twirling.
//!
//! Twirling over the phase group(s) removes every coherence between
//! different photon-number sectors. The result is stored as a
//! [`BlockDensity`], one dense Hermitian block per populated sector.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{BipartiteFockState, SparseKet, C64};
use crate::linalg::hermiticity_deviation;

/// Blocks whose trace falls below this are discarded.
pub const BLOCK_TRACE_FLOOR: f64 = 1e-13;

/// Local photon numbers `(n_A, n_B)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SectorLabel {
    pub n_a: usize,
    pub n_b: usize,
}

impl SectorLabel {
    pub fn new(n_a: usize, n_b: usize) -> Self {
        Self { n_a, n_b }
    }

    pub fn of(state: &BipartiteFockState) -> Self {
        let (n_a, n_b) = state.local_photon_numbers();
        Self { n_a, n_b }
    }

    pub fn total(&self) -> usize {
        self.n_a + self.n_b
    }
}

/// Label of a twirled block: local `(n_A, n_B)` or global total `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sector {
    Local(SectorLabel),
    Global(usize),
}

impl Sector {
    /// Total photon number of the sector.
    pub fn total(&self) -> usize {
        match self {
            Sector::Local(l) => l.total(),
            Sector::Global(n) => *n,
        }
    }

    fn of(state: &BipartiteFockState, local: bool) -> Self {
        if local {
            Sector::Local(SectorLabel::of(state))
        } else {
            Sector::Global(state.total_photons())
        }
    }
}

/// Sparse operator `sum_{ij} c_ij |i><j|` over two-site Fock kets.
///
/// Not required to be Hermitian; mixtures and derivative operators of a
/// parametrized density are both represented this way.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    modes_a: usize,
    modes_b: usize,
    entries: BTreeMap<(BipartiteFockState, BipartiteFockState), C64>,
}

impl SparseOperator {
    pub fn zero(modes_a: usize, modes_b: usize) -> Self {
        Self {
            modes_a,
            modes_b,
            entries: BTreeMap::new(),
        }
    }

    /// `|ket><ket|`.
    pub fn projector(ket: &SparseKet) -> Self {
        Self::outer(ket, ket).expect("same ket has matching modes")
    }

    /// `|a><b|`.
    pub fn outer(a: &SparseKet, b: &SparseKet) -> Result<Self> {
        if a.mode_counts() != b.mode_counts() {
            return Err(Error::Shape(format!(
                "outer product of states over {:?} and {:?} modes",
                a.mode_counts(),
                b.mode_counts()
            )));
        }
        let (ma, mb) = a.mode_counts();
        let mut op = Self::zero(ma, mb);
        for (s, x) in a.iter() {
            for (t, y) in b.iter() {
                *op.entries.entry((s.clone(), t.clone())).or_default() += x * y.conj();
            }
        }
        Ok(op)
    }

    pub fn mode_counts(&self) -> (usize, usize) {
        (self.modes_a, self.modes_b)
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &Self, c: C64) -> Result<()> {
        if other.mode_counts() != self.mode_counts() {
            return Err(Error::Shape(format!(
                "operators over {:?} and {:?} modes",
                self.mode_counts(),
                other.mode_counts()
            )));
        }
        for (k, v) in &other.entries {
            *self.entries.entry(k.clone()).or_default() += c * v;
        }
        Ok(())
    }

    pub fn insert(&mut self, row: BipartiteFockState, col: BipartiteFockState, value: C64) {
        *self.entries.entry((row, col)).or_default() += value;
    }

    pub fn get(&self, row: &BipartiteFockState, col: &BipartiteFockState) -> C64 {
        self.entries
            .get(&(row.clone(), col.clone()))
            .copied()
            .unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(BipartiteFockState, BipartiteFockState), &C64)> {
        self.entries.iter()
    }

    pub fn trace(&self) -> C64 {
        self.entries
            .iter()
            .filter(|((r, c), _)| r == c)
            .map(|(_, v)| *v)
            .sum()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            modes_a: self.modes_a,
            modes_b: self.modes_b,
            entries: self
                .entries
                .iter()
                .map(|((r, c), v)| ((c.clone(), r.clone()), v.conj()))
                .collect(),
        }
    }
}

/// One twirled sector: basis kets and the dense block in that basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub sector: Sector,
    pub basis: Vec<BipartiteFockState>,
    pub matrix: DMatrix<C64>,
}

impl Block {
    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }
}

/// Sector-labelled block-diagonal density, sorted by sector.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDensity {
    modes_a: usize,
    modes_b: usize,
    pub blocks: Vec<Block>,
}

impl BlockDensity {
    pub fn mode_counts(&self) -> (usize, usize) {
        (self.modes_a, self.modes_b)
    }

    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(Block::trace).sum()
    }

    pub fn block(&self, sector: Sector) -> Option<&Block> {
        self.blocks.iter().find(|b| b.sector == sector)
    }

    /// Check Hermiticity (1e-12), positivity (-1e-10 floor) and the
    /// sector membership of every basis ket.
    pub fn validate(&self) -> Result<()> {
        for b in &self.blocks {
            let dev = hermiticity_deviation(&b.matrix);
            if dev > 1e-12 {
                return Err(Error::NotHermitian(dev));
            }
            let eig = b.matrix.clone().symmetric_eigenvalues();
            if let Some(min) = eig.iter().copied().reduce(f64::min) {
                if min < -1e-10 {
                    return Err(Error::InvalidParameter(format!(
                        "block {:?} has eigenvalue {min:e}",
                        b.sector
                    )));
                }
            }
            let local = matches!(b.sector, Sector::Local(_));
            if b.basis.iter().any(|s| Sector::of(s, local) != b.sector) {
                return Err(Error::Shape(format!(
                    "basis ket outside sector {:?}",
                    b.sector
                )));
            }
        }
        Ok(())
    }

    /// Reassemble the blocks into a sparse operator.
    pub fn to_operator(&self) -> SparseOperator {
        let mut op = SparseOperator::zero(self.modes_a, self.modes_b);
        for b in &self.blocks {
            for (i, r) in b.basis.iter().enumerate() {
                for (j, c) in b.basis.iter().enumerate() {
                    let v = b.matrix[(i, j)];
                    if v != C64::default() {
                        op.insert(r.clone(), c.clone(), v);
                    }
                }
            }
        }
        op
    }
}

/// Anything that can be read as a density operator.
pub trait AsOperator {
    fn as_operator(&self) -> SparseOperator;
}

impl AsOperator for SparseKet {
    fn as_operator(&self) -> SparseOperator {
        SparseOperator::projector(self)
    }
}

impl AsOperator for SparseOperator {
    fn as_operator(&self) -> SparseOperator {
        self.clone()
    }
}

impl AsOperator for BlockDensity {
    fn as_operator(&self) -> SparseOperator {
        self.to_operator()
    }
}

/// Sector-diagonal parts of several operators on a common basis.
///
/// Each sector's basis is the sorted union of kets that appear in any of
/// `ops`; the returned matrices line up index by index. Nothing is
/// dropped, so this is also suitable for derivative operators.
pub(crate) fn project_sectors(
    ops: &[&SparseOperator],
    local: bool,
) -> Vec<(Sector, Vec<BipartiteFockState>, Vec<DMatrix<C64>>)> {
    let mut bases: BTreeMap<Sector, BTreeSet<BipartiteFockState>> = BTreeMap::new();
    for op in ops {
        for ((r, c), _) in op.iter() {
            let sr = Sector::of(r, local);
            if sr == Sector::of(c, local) {
                let set = bases.entry(sr).or_default();
                set.insert(r.clone());
                set.insert(c.clone());
            }
        }
    }
    bases
        .into_iter()
        .map(|(sector, set)| {
            let basis: Vec<_> = set.into_iter().collect();
            let index: BTreeMap<&BipartiteFockState, usize> =
                basis.iter().enumerate().map(|(i, s)| (s, i)).collect();
            let d = basis.len();
            let mats = ops
                .iter()
                .map(|op| {
                    let mut m = DMatrix::zeros(d, d);
                    for ((r, c), v) in op.iter() {
                        if let (Some(&i), Some(&j)) = (index.get(r), index.get(c)) {
                            m[(i, j)] += *v;
                        }
                    }
                    m
                })
                .collect();
            (sector, basis, mats)
        })
        .collect()
}

fn twirl(state: &impl AsOperator, local: bool) -> BlockDensity {
    let op = state.as_operator();
    let (modes_a, modes_b) = op.mode_counts();
    let blocks = project_sectors(&[&op], local)
        .into_iter()
        .filter_map(|(sector, basis, mut mats)| {
            let block = Block {
                sector,
                basis,
                matrix: mats.pop().expect("one operator"),
            };
            (block.trace().abs() >= BLOCK_TRACE_FLOOR).then_some(block)
        })
        .collect();
    BlockDensity {
        modes_a,
        modes_b,
        blocks,
    }
}

/// Local SSR twirl: keep only the `(P_n^A x P_m^B) rho (P_n^A x P_m^B)` blocks.
pub fn twirl_local(state: &impl AsOperator) -> BlockDensity {
    twirl(state, true)
}

/// Global SSR twirl: keep only blocks of fixed total photon number.
pub fn twirl_global(state: &impl AsOperator) -> BlockDensity {
    twirl(state, false)
}

/// Blocks whose sector satisfies `keep`.
pub fn sector_filter(bd: &BlockDensity, keep: impl Fn(&Sector) -> bool) -> BlockDensity {
    BlockDensity {
        modes_a: bd.modes_a,
        modes_b: bd.modes_b,
        blocks: bd.blocks.iter().filter(|b| keep(&b.sector)).cloned().collect(),
    }
}
