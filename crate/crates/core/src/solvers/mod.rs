//! Sub-step flows, time-splitting, alternating minimizing movements, block
//! staggered schemes and the effective reference solver.

mod output;
mod prox;
mod regime;
mod schemes;
#[cfg(test)]
mod tests;

pub use output::{SchemeOutput, SolverStats, StepStats};
pub use prox::{prox_step, ProxOutcome};
pub use regime::{path_segment_at, path_state, regime_path_mean, PathSegment};
pub use schemes::{amm_solve, block_solve, effective_solve, split_step_solve, substep_flow, SubstepFlow};

use serde::{Deserialize, Serialize};

use crate::energies::{Block, Energy, EnergyKind};
use crate::error::{check_dim, Error, Result};
use crate::partitions::{Mechanism, Partition};
use crate::{Potential, Vector};

/// A state space with a driving energy and one or two dissipation potentials.
#[derive(Clone, Debug)]
pub struct GradientSystem {
    energy: Energy,
    r1: Potential,
    r2: Option<Potential>,
    block_layout: Option<(usize, usize)>,
}

impl GradientSystem {
    pub fn new(energy: Energy, r1: Potential, r2: Potential) -> Result<Self> {
        check_dim("first dissipation potential", energy.dim(), r1.dim())?;
        check_dim("second dissipation potential", energy.dim(), r2.dim())?;
        Ok(GradientSystem {
            energy,
            r1,
            r2: Some(r2),
            block_layout: None,
        })
    }

    /// A single-dissipation system, usable with `substep_flow` only.
    pub fn single(energy: Energy, r: Potential) -> Result<Self> {
        check_dim("dissipation potential", energy.dim(), r.dim())?;
        Ok(GradientSystem {
            energy,
            r1: r,
            r2: None,
            block_layout: None,
        })
    }

    /// A block system: `ry` acts on the y block, `rz` on the z block of a
    /// block-structured energy.
    pub fn block(energy: Energy, ry: Potential, rz: Potential) -> Result<Self> {
        let (ny, nz) = energy
            .block_sizes()
            .ok_or_else(|| Error::config("block systems need a block-structured energy"))?;
        check_dim("y-block potential", ny, ry.dim())?;
        check_dim("z-block potential", nz, rz.dim())?;
        let n = energy.dim();
        let r1 = Potential::block_indicator(ry, energy.block_indices(Block::Y)?, n)?;
        let r2 = Potential::block_indicator(rz, energy.block_indices(Block::Z)?, n)?;
        Ok(GradientSystem {
            energy,
            r1,
            r2: Some(r2),
            block_layout: Some((ny, nz)),
        })
    }

    pub fn energy(&self) -> &Energy {
        &self.energy
    }

    pub fn dim(&self) -> usize {
        self.energy.dim()
    }

    pub fn block_layout(&self) -> Option<(usize, usize)> {
        self.block_layout
    }

    pub fn is_single(&self) -> bool {
        self.r2.is_none()
    }

    /// The potential `R_j` of mechanism `j`.
    pub fn potential(&self, j: Mechanism) -> Result<&Potential> {
        match j {
            Mechanism::First => Ok(&self.r1),
            Mechanism::Second => self
                .r2
                .as_ref()
                .ok_or_else(|| Error::input("the system has a single dissipation potential")),
        }
    }

    /// The rescaled potential `2 R_j(v/2)` driving the sub-step flows.
    pub fn rescaled(&self, j: Mechanism) -> Result<Potential> {
        Ok(Potential::rescaled(self.potential(j)?.clone()))
    }

    /// The inf-convolution `R_eff` of both potentials.
    pub fn effective(&self) -> Result<Potential> {
        Potential::inf_convolution(self.r1.clone(), self.potential(Mechanism::Second)?.clone())
    }

    pub(crate) fn is_max_norm(&self) -> bool {
        matches!(self.energy.kind(), EnergyKind::MaxNorm)
    }
}

/// Inner discretization controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Relative gradient-norm tolerance of every prox step.
    pub tol: f64,
    /// Grid cells per semi-interval, and prox steps per sub-step flow.
    pub inner_steps: usize,
    /// Re-solve the incremental problems at every inner time (AMM schemes).
    pub with_variational: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            inner_steps: 8,
            with_variational: false,
        }
    }
}

impl SolverOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::input(format!("tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if self.inner_steps == 0 {
            return Err(Error::input("inner_steps must be at least 1"));
        }
        Ok(())
    }
}

/// Which scheme produced an output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Split,
    Amm,
    BlockSplit,
    BlockAmm,
    Effective,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Split => "split",
            SchemeKind::Amm => "amm",
            SchemeKind::BlockSplit => "block-split",
            SchemeKind::BlockAmm => "block-amm",
            SchemeKind::Effective => "effective",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "split" => Ok(SchemeKind::Split),
            "amm" => Ok(SchemeKind::Amm),
            "block-split" => Ok(SchemeKind::BlockSplit),
            "block-amm" => Ok(SchemeKind::BlockAmm),
            "effective" => Ok(SchemeKind::Effective),
            other => Err(Error::input(format!(
                "unknown scheme '{other}' (expected split, amm, effective, block-split or block-amm)"
            ))),
        }
    }

    pub fn is_block(self) -> bool {
        matches!(self, SchemeKind::BlockSplit | SchemeKind::BlockAmm)
    }

    /// Whether each semi-interval is a single incremental minimization.
    pub fn is_minimizing_movement(self) -> bool {
        matches!(self, SchemeKind::Amm | SchemeKind::BlockAmm)
    }
}

/// Staggering variant of the block schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockMode {
    Split,
    Amm,
}

/// Dispatches to the solver for `scheme`.
pub fn solve(sys: &GradientSystem, scheme: SchemeKind, p: &Partition, u0: &Vector, opts: &SolverOptions) -> Result<SchemeOutput> {
    match scheme {
        SchemeKind::Split => split_step_solve(sys, p, u0, opts),
        SchemeKind::Amm => amm_solve(sys, p, u0, opts),
        SchemeKind::BlockSplit => block_solve(sys, p, u0, BlockMode::Split, opts),
        SchemeKind::BlockAmm => block_solve(sys, p, u0, BlockMode::Amm, opts),
        SchemeKind::Effective => effective_solve(sys, p, u0, opts),
    }
}
