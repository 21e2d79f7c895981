use std::path::Path;

use serde::Serialize;

use super::{PathSegment, SchemeKind, SolverOptions};
use crate::partitions::{Half, Partition, SampledCurve, SamplingGrid};
use crate::{Vector, WeightedNorm};

/// Solver effort of one semi-interval (or one step of the effective scheme).
#[derive(Clone, Debug, Serialize)]
pub struct StepStats {
    pub step: usize,
    pub half: Option<Half>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolverStats {
    pub prox_calls: usize,
    pub total_iterations: usize,
    pub max_residual: f64,
    pub exact_segments: usize,
    pub steps: Vec<StepStats>,
    /// Power-control constant over the horizon, when available.
    pub power_constant: Option<f64>,
    /// Visited states where `|dE/dt| <= C (E)` failed.
    pub power_violations: usize,
}

impl SolverStats {
    pub(crate) fn record(&mut self, step: usize, half: Option<Half>, iterations: usize, residual: f64, calls: usize) {
        self.prox_calls += calls;
        self.total_iterations += iterations;
        self.max_residual = self.max_residual.max(residual);
        self.steps.push(StepStats {
            step,
            half,
            iterations,
            residual,
        });
    }
}

/// Everything a scheme run produces.
///
/// Cellwise curves hold one value per cell of `grid`; `u_linear` holds the
/// values at the grid times. `xi` is the discrete force on each cell.
#[derive(Clone, Debug)]
pub struct SchemeOutput {
    pub scheme: SchemeKind,
    pub options: SolverOptions,
    pub grid: SamplingGrid,
    pub u_const: SampledCurve,
    pub u_delayed: SampledCurve,
    pub u_linear: SampledCurve,
    pub xi: SampledCurve,
    /// Variational interpolant at cell midpoints.
    pub u_variational: Option<SampledCurve>,
    /// Variational interpolant at the grid times.
    pub variational_nodes: Option<Vec<Vector>>,
    /// Forces of the variational interpolant at cell midpoints.
    pub xi_variational: Option<SampledCurve>,
    /// Exact piecewise-affine trajectory, for regime-solved runs.
    pub segments: Option<Vec<PathSegment>>,
    pub stats: SolverStats,
    pub warnings: Vec<String>,
}

impl SchemeOutput {
    pub fn partition(&self) -> &Partition {
        self.grid.partition()
    }

    pub fn is_exact(&self) -> bool {
        self.segments.is_some()
    }

    /// Tolerance each incremental problem was solved to; exact runs report
    /// a roundoff-level value.
    pub fn inner_tol(&self) -> f64 {
        if self.is_exact() {
            1e-12
        } else {
            self.options.tol
        }
    }

    /// States at the partition nodes `t_0, ..., t_N`.
    pub fn node_states(&self) -> Vec<Vector> {
        (0..=self.partition().steps()).map(|k| self.u_linear.node_value(k)).collect()
    }

    pub fn state_at(&self, t: f64) -> Vector {
        match &self.segments {
            Some(segs) => super::path_state(segs, t).unwrap_or_else(|| self.u_linear.value_at(t)),
            None => self.u_linear.value_at(t),
        }
    }

    pub fn terminal_state(&self) -> Vector {
        self.u_linear.samples().last().cloned().expect("nonempty curve")
    }

    /// First time the state is within `threshold` of the origin in the max norm.
    pub fn time_to_zero(&self, threshold: f64) -> Option<f64> {
        if let Some(segs) = &self.segments {
            return segs
                .iter()
                .find(|s| s.end_state().amax() <= threshold)
                .map(|s| if s.u0.amax() <= threshold { s.t0 } else { s.t1 });
        }
        self.u_linear
            .samples()
            .iter()
            .position(|u| u.amax() <= threshold)
            .map(|i| self.u_linear.sample_time(i))
    }

    pub fn sup_node_distance(&self, reference: &SchemeOutput, norm: &WeightedNorm) -> f64 {
        let p = self.partition();
        (0..=p.steps())
            .map(|k| norm.norm(&(self.u_linear.node_value(k) - reference.state_at(p.nodes()[k]))))
            .fold(0.0, f64::max)
    }

    /// Writes the curves as CSV files and the statistics as `stats.json`.
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("trajectory.csv"), self.u_linear.to_csv_string())?;
        std::fs::write(dir.join("u_const.csv"), self.u_const.to_csv_string())?;
        std::fs::write(dir.join("u_delayed.csv"), self.u_delayed.to_csv_string())?;
        std::fs::write(dir.join("xi.csv"), self.xi.to_csv_string())?;
        if let Some(v) = &self.u_variational {
            std::fs::write(dir.join("u_variational.csv"), v.to_csv_string())?;
        }
        let doc = serde_json::json!({
            "version": crate::VERSION,
            "scheme": self.scheme,
            "steps": self.partition().steps(),
            "horizon": self.partition().horizon(),
            "options": self.options,
            "stats": self.stats,
            "warnings": self.warnings,
            "segments": self.segments,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("stats.json"), text + "\n")
    }
}
