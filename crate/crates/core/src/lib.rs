//! Quantum Fisher information of superselection-restricted telescopy with
//! photonic ancillas: Fock-space simulation, twirling, QFI evaluation,
//! ancilla catalog, optimal bounds, teleportation and estimation.

pub mod ancilla;
pub mod bounds;
pub mod error;
pub mod estimation;
pub mod fock;
pub mod linalg;
pub mod qfi;
pub mod ssr;
pub mod teleport;

pub use ancilla::{AncillaKind, AncillaSpec, BuildParams, ModeLayout, ResourceFlags};
pub use bounds::{Distribution, OptimizerConfig, SimplexResult};
pub use error::{Error, Result};
pub use estimation::{EstimateReport, McMode, MonteCarloConfig, OutcomeCounts};
pub use fock::{BipartiteFockState, OccupationVector, SparseKet, C64};
pub use qfi::{Param, QfiMethod, QfiReport, SourceParams};
pub use ssr::{BlockDensity, Sector, SectorLabel};
pub use teleport::{ConditionalState, FiReport, MeasurementSetting, SectorState};
