//! Solvers for generalized gradient flows whose dissipation splits into two
//! mechanisms. The split and alternating schemes are checked against an
//! effective reference solver and energy-dissipation audits.

// NaN-rejecting parameter checks are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod energies;
mod error;
mod ext;
pub mod models;

mod norm;
mod optim;
pub mod partitions;
pub mod potentials;
pub mod solvers;

pub use error::{Error, Result};
pub use ext::ExtReal;
pub use norm::WeightedNorm;

pub use diagnostics::{
    convergence_study, edb_audit, rate_term, remainder_term, slope_term, AuditForm, EdbReport,
    ForceSource, Reference, StudyRow, StudyTable,
};
pub use energies::{Block, DoubleWell, Energy, EnergyKind, Load, SubdiffSet};
pub use models::{make_model, ModelName, ModelPreset};
pub use partitions::{
    repetition_apply, Half, InterpolantKind, Mechanism, Partition, PartitionSpec, SampledCurve,
    SamplingGrid,
};
pub use potentials::{Decomposition, Potential, PotentialKind};
pub use solvers::{
    amm_solve, block_solve, effective_solve, prox_step, solve, split_step_solve, substep_flow,
    BlockMode, GradientSystem, SchemeKind, SchemeOutput, SolverOptions,
};

/// Dense state vector.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Library version string, echoed into every output directory.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
