use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{decomposition, default_audit, edb_audit, rate_term, slope_term, ForceSource};
use crate::error::{Error, Result};
use crate::partitions::Partition;
use crate::solvers::{effective_solve, solve, GradientSystem, SchemeKind, SolverOptions};
use crate::Vector;

/// What a convergence study compares against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// The effective scheme at `factor` times the finest tested step count.
    Effective { factor: usize },
    /// The exactly solved effective trajectory (max-norm energy only).
    ExactRegime,
}

impl Default for Reference {
    fn default() -> Self {
        Reference::Effective { factor: 16 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub n: usize,
    pub max_step: f64,
    /// Largest distance to the reference at the partition nodes.
    pub sup_error: f64,
    /// Empirical order from the previous row.
    pub order: Option<f64>,
    /// Full-horizon energy-dissipation residual.
    pub edb_residual: f64,
    pub edb_passed: bool,
    /// `D_rate - int R_eff(U'_ref)`.
    pub rate_gap: f64,
    /// `D_slope - int R_eff*(-xi_ref)`.
    pub slope_gap: f64,
    /// `|V_1 + V_2 - U'_ref|` in `L^1`.
    pub defect: f64,
    pub terminal_gap: f64,
    pub time_to_zero: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyTable {
    pub scheme: SchemeKind,
    pub reference: Reference,
    pub reference_steps: usize,
    pub reference_time_to_zero: Option<f64>,
    pub rows: Vec<StudyRow>,
}

/// Max-norm radius below which a state counts as the origin.
pub const ZERO_THRESHOLD: f64 = 1e-9;

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

impl StudyTable {
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "n",
            "max_step",
            "sup_error",
            "order",
            "edb_residual",
            "edb_passed",
            "rate_gap",
            "slope_gap",
            "defect",
            "terminal_gap",
            "time_to_zero",
        ])
        .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                fmt(r.max_step),
                fmt(r.sup_error),
                r.order.map(fmt).unwrap_or_default(),
                fmt(r.edb_residual),
                r.edb_passed.to_string(),
                fmt(r.rate_gap),
                fmt(r.slope_gap),
                fmt(r.defect),
                fmt(r.terminal_gap),
                r.time_to_zero.map(fmt).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii output")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable table")
    }

    /// Whether `sup_error` decreases strictly from row to row.
    pub fn errors_decrease(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].sup_error < w[0].sup_error)
    }
}

/// Runs `scheme` on uniform partitions with the step counts `n_list` and
/// compares each run with a reference trajectory. At most `jobs` runs are
/// in flight at once.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    sys: &GradientSystem,
    u0: &Vector,
    horizon: f64,
    scheme: SchemeKind,
    n_list: &[usize],
    reference: Reference,
    opts: &SolverOptions,
    jobs: usize,
) -> Result<StudyTable> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(Error::input("step counts must be positive and strictly increasing"));
    }
    if scheme == SchemeKind::Effective {
        return Err(Error::input("the effective scheme is the reference, not a study subject"));
    }
    let finest = *n_list.last().expect("nonempty");
    let ref_opts = SolverOptions {
        inner_steps: 1,
        with_variational: false,
        ..opts.clone()
    };
    let (reference_steps, ref_out) = match reference {
        Reference::Effective { factor } => {
            let n = finest * factor.max(1);
            (n, effective_solve(sys, &Partition::uniform(horizon, n)?, u0, &ref_opts)?)
        }
        Reference::ExactRegime => {
            let out = effective_solve(sys, &Partition::uniform(horizon, finest)?, u0, &ref_opts)?;
            if !out.is_exact() {
                return Err(Error::input("exact reference needs the max-norm energy with diagonal quadratic dissipations"));
            }
            (finest, out)
        }
    };
    let full = (0.0, horizon);
    let ref_rate = rate_term(&ref_out, sys, full)?.value;
    let ref_slope = slope_term(&ref_out, sys, full, ForceSource::Discrete)?.value;
    let norm = sys.energy().norm().clone();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::input(format!("thread pool: {e}")))?;
    let rows: Vec<StudyRow> = pool.install(|| {
        n_list
            .par_iter()
            .map(|&n| -> Result<StudyRow> {
                let p = Partition::uniform(horizon, n)?;
                let out = solve(sys, scheme, &p, u0, opts)?;
                let (form, source) = default_audit(&out);
                let audit = edb_audit(&out, sys, full, form);
                let rate = rate_term(&out, sys, full)?.value;
                let slope = slope_term(&out, sys, full, source)?.value;
                let dec = decomposition(&out, sys, Some(&ref_out))?;
                Ok(StudyRow {
                    n,
                    max_step: p.max_step(),
                    sup_error: out.sup_node_distance(&ref_out, &norm),
                    order: None,
                    edb_residual: audit.residual,
                    edb_passed: audit.passed,
                    rate_gap: rate - ref_rate,
                    slope_gap: slope - ref_slope,
                    defect: dec.defect,
                    terminal_gap: norm.norm(&(out.terminal_state() - ref_out.terminal_state())),
                    time_to_zero: out.time_to_zero(ZERO_THRESHOLD),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows = rows;
    for i in 1..rows.len() {
        let (e0, e1) = (rows[i - 1].sup_error, rows[i].sup_error);
        let ratio = rows[i].n as f64 / rows[i - 1].n as f64;
        rows[i].order = (e0 > 0.0 && e1 > 0.0).then(|| (e0 / e1).ln() / ratio.ln());
    }
    Ok(StudyTable {
        scheme,
        reference,
        reference_steps,
        reference_time_to_zero: ref_out.time_to_zero(ZERO_THRESHOLD),
        rows,
    })
}
