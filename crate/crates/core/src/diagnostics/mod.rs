//! Energy-dissipation audits, rate and slope functionals, the remainder
//! term, optimal decompositions and convergence studies.

mod study;
#[cfg(test)]
mod tests;

pub use study::{convergence_study, Reference, StudyRow, StudyTable, ZERO_THRESHOLD};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partitions::{repetition_apply, InterpolantKind, Mechanism, SampledCurve};
use crate::solvers::{GradientSystem, SchemeKind, SchemeOutput};
use crate::{Energy, Potential, Vector};

/// Whether an audit expects equality or a one-sided inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditForm {
    Balance,
    Inequality,
}

/// Which forces enter the slope term and power integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForceSource {
    /// The scheme's own forces, with the power taken along the delayed state.
    Discrete,
    /// Forces and power of the variational interpolant.
    Variational,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateTerm {
    /// Exact segment integral for regime-solved runs, else the grid value.
    pub value: f64,
    pub grid_value: f64,
    /// Same integral through the repetition operators, on node-aligned intervals.
    pub repetition: Option<f64>,
}

pub type SlopeTerm = RateTerm;

#[derive(Clone, Debug, Serialize)]
pub struct RemainderTerm {
    pub value: f64,
    /// `max(0, -lambda)/2 * int |U'| |U(r) - U(r - lag)| dr`, an upper bound for `value`.
    pub lambda_bound: f64,
    pub lambda: f64,
}

/// The rates `V_j = 1/2 T_j U'` and how far they are from an optimal decomposition.
#[derive(Clone, Debug)]
pub struct DecompositionReport {
    pub v1: SampledCurve,
    pub v2: SampledCurve,
    /// `|V_1 + V_2 - U'|` in `L^1`.
    pub defect: f64,
    /// `int R_1(V_1) + R_2(V_2) - R_eff(V_1 + V_2)`, nonnegative.
    pub value_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionSummary {
    pub defect: f64,
    pub value_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EdbReport {
    pub interval: (f64, f64),
    pub form: AuditForm,
    pub source: ForceSource,
    pub d_rate: f64,
    pub d_slope: f64,
    pub power_integral: f64,
    pub energy_start: f64,
    pub energy_end: f64,
    /// `energy_end + d_rate + d_slope - energy_start - power_integral`.
    pub residual: f64,
    /// Allowance from semiconvexity for discrete-force inequalities.
    pub lambda_correction: f64,
    pub quadrature_error: f64,
    pub slack_solver: f64,
    pub slack_quadrature: f64,
    pub slack: f64,
    pub passed: bool,
    pub rate_repetition_mismatch: Option<f64>,
    pub slope_repetition_mismatch: Option<f64>,
    /// Smallest Fenchel-Young excess of the active mechanism over the cells.
    pub fenchel_young_min: f64,
    pub remainder: Option<RemainderTerm>,
    pub decomposition: Option<DecompositionSummary>,
    pub anomalies: Vec<String>,
}

/// Slack multiplier for audits.
pub const SLACK_FACTOR: f64 = 10.0;

/// The potentials needed to evaluate the dissipation of one output.
struct Pots {
    effective_only: bool,
    tilde: [Potential; 2],
    plain: [Potential; 2],
    eff: Potential,
}

impl Pots {
    fn new(sys: &GradientSystem, scheme: SchemeKind) -> Result<Self> {
        Ok(Pots {
            effective_only: scheme == SchemeKind::Effective,
            tilde: [sys.rescaled(Mechanism::First)?, sys.rescaled(Mechanism::Second)?],
            plain: [
                sys.potential(Mechanism::First)?.clone(),
                sys.potential(Mechanism::Second)?.clone(),
            ],
            eff: sys.effective()?,
        })
    }

    fn active(&self, j: Option<Mechanism>) -> &Potential {
        match j {
            Some(j) if !self.effective_only => &self.tilde[j.index() - 1],
            _ => &self.eff,
        }
    }
}

fn r_val(p: &Potential, v: &Vector) -> f64 {
    p.eval_raw(v).map(|e| e.value()).unwrap_or(f64::NAN)
}

fn r_dual(p: &Potential, xi: &Vector) -> f64 {
    p.conjugate_raw(&(-xi))
}

fn check_interval(out: &SchemeOutput, (s, t): (f64, f64)) -> Result<()> {
    let horizon = out.partition().horizon();
    let eps = 1e-12 * (1.0 + horizon);
    if !(s.is_finite() && t.is_finite() && s <= t && s >= -eps && t <= horizon + eps) {
        return Err(Error::input(format!("interval [{s}, {t}] is not inside [0, {horizon}]")));
    }
    Ok(())
}

fn is_node(out: &SchemeOutput, t: f64) -> bool {
    let eps = 1e-12 * (1.0 + out.partition().horizon());
    out.partition().nodes().iter().any(|n| (n - t).abs() <= eps)
}

fn cell_mechanism(out: &SchemeOutput, c: usize) -> Mechanism {
    Mechanism::of(out.grid.cell_location(c).1)
}

/// Cellwise integral of `f(mechanism, value)` over `[s, t]`.
fn grid_integral(
    out: &SchemeOutput,
    curve: &SampledCurve,
    (s, t): (f64, f64),
    mut f: impl FnMut(Mechanism, &Vector) -> f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (c, a, b) in out.grid.pieces(s, t)? {
        total += (b - a) * f(cell_mechanism(out, c), &curve.cell_value(c));
    }
    Ok(total)
}

fn segment_integral(out: &SchemeOutput, (s, t): (f64, f64), mut f: impl FnMut(&crate::solvers::PathSegment) -> f64) -> Option<f64> {
    let segs = out.segments.as_ref()?;
    Some(
        segs.iter()
            .map(|seg| {
                let len = seg.t1.min(t) - seg.t0.max(s);
                if len > 0.0 {
                    len * f(seg)
                } else {
                    0.0
                }
            })
            .sum(),
    )
}

fn repetition_form(
    out: &SchemeOutput,
    curve: &SampledCurve,
    interval: (f64, f64),
    f: impl Fn(usize, &Vector) -> f64,
) -> Result<Option<f64>> {
    if out.scheme == SchemeKind::Effective || !is_node(out, interval.0) || !is_node(out, interval.1) {
        return Ok(None);
    }
    let p = out.partition();
    let t1 = repetition_apply(Mechanism::First, p, curve)?;
    let t2 = repetition_apply(Mechanism::Second, p, curve)?;
    let mut total = 0.0;
    for (c, a, b) in out.grid.pieces(interval.0, interval.1)? {
        total += (b - a) * (f(0, &t1.cell_value(c)) + f(1, &t2.cell_value(c)));
    }
    Ok(Some(total))
}

/// `int chi R~_1(U') + (1 - chi) R~_2(U')` over `interval` (`R_eff(U')` for
/// effective runs), with the repetition-operator form as a cross-check.
pub fn rate_term(out: &SchemeOutput, sys: &GradientSystem, interval: (f64, f64)) -> Result<RateTerm> {
    check_interval(out, interval)?;
    let pots = Pots::new(sys, out.scheme)?;
    let d = out.u_linear.derivative()?;
    let grid_value = grid_integral(out, &d, interval, |j, v| r_val(pots.active(Some(j)), v))?;
    let value = segment_integral(out, interval, |seg| r_val(pots.active(seg.mechanism), &seg.velocity)).unwrap_or(grid_value);
    let repetition = repetition_form(out, &d, interval, |j, v| r_val(&pots.plain[j], &(v * 0.5)))?;
    Ok(RateTerm {
        value,
        grid_value,
        repetition,
    })
}

fn forces(out: &SchemeOutput, source: ForceSource) -> Result<&SampledCurve> {
    match source {
        ForceSource::Discrete => Ok(&out.xi),
        ForceSource::Variational => out
            .xi_variational
            .as_ref()
            .ok_or_else(|| Error::input("output carries no variational forces")),
    }
}

/// `int chi R~_1*(-xi) + (1 - chi) R~_2*(-xi)` over `interval`, with the
/// repetition-operator form as a cross-check.
pub fn slope_term(out: &SchemeOutput, sys: &GradientSystem, interval: (f64, f64), source: ForceSource) -> Result<SlopeTerm> {
    check_interval(out, interval)?;
    let pots = Pots::new(sys, out.scheme)?;
    let xi = forces(out, source)?;
    let grid_value = grid_integral(out, xi, interval, |j, x| r_dual(pots.active(Some(j)), x))?;
    let exact = match source {
        ForceSource::Discrete => segment_integral(out, interval, |seg| r_dual(pots.active(seg.mechanism), &seg.xi)),
        ForceSource::Variational => None,
    };
    let repetition = repetition_form(out, xi, interval, |j, x| r_dual(&pots.plain[j], x))?;
    Ok(RateTerm {
        value: exact.unwrap_or(grid_value),
        grid_value,
        repetition,
    })
}

/// Length of the delay between `u_const` and `u_delayed` on cell `c`.
fn lag(out: &SchemeOutput, c: usize) -> f64 {
    let (k, half, _) = out.grid.cell_location(c);
    let p = out.partition();
    match out.scheme {
        SchemeKind::Amm | SchemeKind::BlockAmm => {
            let (a, b) = p.semi_interval(k, half);
            b - a
        }
        SchemeKind::Split | SchemeKind::BlockSplit => {
            let (a, b) = out.grid.cell_bounds(c);
            b - a
        }
        SchemeKind::Effective => p.step_size(k),
    }
}

/// The remainder `1/(2 lag) int [E(U) - E(U_delayed) - <xi, U - U_delayed>]`
/// and its semiconvexity bound.
pub fn remainder_term(out: &SchemeOutput, e: &Energy, interval: (f64, f64)) -> Result<RemainderTerm> {
    check_interval(out, interval)?;
    if out.u_delayed.kind() != InterpolantKind::DelayedConstant {
        return Err(Error::input("remainder needs the delayed piecewise-constant curve"));
    }
    let d = out.u_linear.derivative()?;
    let norm = e.norm();
    let lambda = e.lambda();
    let mut value = 0.0;
    let mut bound = 0.0;
    for (c, a, b) in out.grid.pieces(interval.0, interval.1)? {
        let r = 0.5 * (a + b);
        let u = out.u_const.cell_value(c);
        let w = out.u_delayed.cell_value(c);
        let du = &u - &w;
        let xi = out.xi.cell_value(c);
        let f = e.eval_raw(r, &u) - e.eval_raw(r, &w) - xi.dot(&du);
        value += (b - a) * f / (2.0 * lag(out, c));
        bound += (b - a) * norm.norm(&d.cell_value(c)) * norm.norm(&du);
    }
    Ok(RemainderTerm {
        value,
        lambda_bound: 0.5 * (-lambda).max(0.0) * bound,
        lambda,
    })
}

fn derivative_at(out: &SchemeOutput, d: &SampledCurve, t: f64) -> Vector {
    if let Some(segs) = &out.segments {
        if let Some(seg) = crate::solvers::path_segment_at(segs, t) {
            return seg.velocity.clone();
        }
    }
    d.value_at(t)
}

/// The rates `V_j = 1/2 T_j U'`, their defect against `reference` (or the
/// node-to-node difference quotient of the run itself) and the value gap to
/// `R_eff`. The run must not be an effective one.
pub fn decomposition(out: &SchemeOutput, sys: &GradientSystem, reference: Option<&SchemeOutput>) -> Result<DecompositionReport> {
    if out.scheme == SchemeKind::Effective {
        return Err(Error::input("effective runs have no decomposition into mechanisms"));
    }
    let pots = Pots::new(sys, out.scheme)?;
    let p = out.partition();
    let d = out.u_linear.derivative()?;
    let half = |j| -> Result<SampledCurve> {
        let t = repetition_apply(j, p, &d)?;
        SampledCurve::from_cells(out.grid.clone(), InterpolantKind::PiecewiseConstant, Vector::zeros(d.dim()), |c| {
            t.cell_value(c) * 0.5
        })
    };
    let v1 = half(Mechanism::First)?;
    let v2 = half(Mechanism::Second)?;
    let norm = sys.energy().norm();
    let ref_d = match reference {
        Some(r) => Some(r.u_linear.derivative()?),
        None => None,
    };
    let mut defect = 0.0;
    let mut value_gap = 0.0;
    for c in 0..out.grid.cells() {
        let (a, b) = out.grid.cell_bounds(c);
        let mid = 0.5 * (a + b);
        let sum = v1.cell_value(c) + v2.cell_value(c);
        let target = match (reference, &ref_d) {
            (Some(r), Some(rd)) => derivative_at(r, rd, mid),
            _ => {
                let (k, _, _) = out.grid.cell_location(c);
                (out.u_linear.node_value(k + 1) - out.u_linear.node_value(k)) / p.step_size(k)
            }
        };
        defect += (b - a) * norm.norm(&(&sum - target));
        value_gap += (b - a)
            * (r_val(&pots.plain[0], &v1.cell_value(c)) + r_val(&pots.plain[1], &v2.cell_value(c))
                - r_val(&pots.eff, &sum));
    }
    Ok(DecompositionReport {
        v1,
        v2,
        defect,
        value_gap,
    })
}

/// Natural audit form and force source for an output.
pub fn default_audit(out: &SchemeOutput) -> (AuditForm, ForceSource) {
    if out.is_exact() {
        (AuditForm::Balance, ForceSource::Discrete)
    } else if out.scheme.is_minimizing_movement() && out.xi_variational.is_some() {
        (AuditForm::Inequality, ForceSource::Variational)
    } else {
        (AuditForm::Inequality, ForceSource::Discrete)
    }
}

/// Energy-dissipation audit on `interval` with the natural force source.
pub fn edb_audit(out: &SchemeOutput, sys: &GradientSystem, interval: (f64, f64), form: AuditForm) -> EdbReport {
    let source = default_audit(out).1;
    edb_audit_with(out, sys, interval, form, source)
}

/// Energy-dissipation audit with an explicit force source. Problems are
/// reported in `anomalies`, never raised.
pub fn edb_audit_with(
    out: &SchemeOutput,
    sys: &GradientSystem,
    interval: (f64, f64),
    form: AuditForm,
    source: ForceSource,
) -> EdbReport {
    let mut report = EdbReport {
        interval,
        form,
        source,
        d_rate: f64::NAN,
        d_slope: f64::NAN,
        power_integral: f64::NAN,
        energy_start: f64::NAN,
        energy_end: f64::NAN,
        residual: f64::NAN,
        lambda_correction: 0.0,
        quadrature_error: 0.0,
        slack_solver: 0.0,
        slack_quadrature: 0.0,
        slack: 0.0,
        passed: false,
        rate_repetition_mismatch: None,
        slope_repetition_mismatch: None,
        fenchel_young_min: f64::NAN,
        remainder: None,
        decomposition: None,
        anomalies: Vec::new(),
    };
    if let Err(err) = fill_report(out, sys, &mut report) {
        report.anomalies.push(err.to_string());
        report.passed = false;
    }
    report
}

fn fill_report(out: &SchemeOutput, sys: &GradientSystem, rep: &mut EdbReport) -> Result<()> {
    let interval = rep.interval;
    let (s, t) = interval;
    check_interval(out, interval)?;
    let e = sys.energy();
    let pots = Pots::new(sys, out.scheme)?;
    let rate = rate_term(out, sys, interval)?;
    let slope = slope_term(out, sys, interval, rep.source)?;
    rep.d_rate = rate.value;
    rep.d_slope = slope.value;
    let scale = 1.0 + rate.grid_value.abs() + slope.grid_value.abs();
    rep.rate_repetition_mismatch = rate.repetition.map(|r| (r - rate.grid_value).abs());
    rep.slope_repetition_mismatch = slope.repetition.map(|r| (r - slope.grid_value).abs());
    for (name, mismatch) in [("rate", rep.rate_repetition_mismatch), ("slope", rep.slope_repetition_mismatch)] {
        if let Some(m) = mismatch {
            if m > 1e-10 * scale {
                rep.anomalies.push(format!("{name} repetition identity off by {m:.3e}"));
            }
        }
    }
    rep.energy_start = e.eval(s, &out.state_at(s))?;
    rep.energy_end = e.eval(t, &out.state_at(t))?;

    let pieces = out.grid.pieces(s, t)?;
    let mut power = 0.0;
    let mut quad = 0.0;
    match rep.source {
        ForceSource::Discrete => {
            for &(c, a, b) in &pieces {
                let w = out.u_delayed.cell_value(c);
                power += e.eval_raw(b, &w) - e.eval_raw(a, &w);
            }
            if !out.is_exact() {
                let lam = (-e.lambda()).max(0.0);
                let norm = e.norm();
                rep.lambda_correction = 0.5
                    * lam
                    * pieces
                        .iter()
                        .map(|&(c, a, b)| {
                            let du = out.u_const.cell_value(c) - out.u_delayed.cell_value(c);
                            (b - a) / lag(out, c) * norm.norm(&du).powi(2)
                        })
                        .sum::<f64>();
            }
            let aligned = pieces.iter().all(|&(c, a, b)| {
                let (ca, cb) = out.grid.cell_bounds(c);
                (a - ca).abs() <= 1e-14 && (b - cb).abs() <= 1e-14
            });
            if !aligned && !out.is_exact() {
                rep.anomalies
                    .push("interval endpoints cut through increments; the discrete inequality may not apply".into());
            }
        }
        ForceSource::Variational => {
            let var = out
                .u_variational
                .as_ref()
                .ok_or_else(|| Error::input("output carries no variational interpolant"))?;
            let xi = forces(out, ForceSource::Variational)?;
            let nodes = out.variational_nodes.as_ref();
            let times = out.grid.times();
            let mut estimable = e.is_smooth();
            for &(c, a, b) in &pieces {
                let mid = 0.5 * (a + b);
                let uc = var.cell_value(c);
                power += (b - a) * e.power_raw(mid, &uc);
                let j = cell_mechanism(out, c);
                let r = pots.active(Some(j));
                let f_mid = e.power_raw(out.grid.cell_midpoint(c), &uc) + r_dual(r, &xi.cell_value(c));
                match nodes {
                    Some(nodes) if estimable => {
                        let f_at = |i: usize| {
                            let g = e.gradient_raw(times[i], &nodes[i]).expect("smooth energy");
                            e.power_raw(times[i], &nodes[i]) + r_dual(r, &g)
                        };
                        let (ca, cb) = out.grid.cell_bounds(c);
                        let len = cb - ca;
                        let est = (len * f_mid - 0.5 * len * (f_at(c) + f_at(c + 1))).abs() / 3.0;
                        quad += est * (b - a) / len;
                    }
                    _ => estimable = false,
                }
            }
            if !estimable {
                if e.is_autonomous() && out.scheme.is_minimizing_movement() {
                    quad = envelope_quadrature_error(out, &pots, e, xi, &pieces)?;
                } else {
                    rep.anomalies.push("quadrature error estimate unavailable for this energy".into());
                }
            }
        }
    }
    rep.power_integral = power;
    rep.quadrature_error = quad;
    rep.residual = rep.energy_end + rep.d_rate + rep.d_slope - rep.energy_start - rep.power_integral;

    let calls = out.stats.prox_calls.max(out.partition().steps()) as f64;
    rep.slack_solver = SLACK_FACTOR * calls * out.inner_tol() * (1.0 + rep.energy_start.abs());
    rep.slack_quadrature = SLACK_FACTOR * quad;
    rep.slack = rep.slack_solver + rep.slack_quadrature;
    rep.passed = match rep.form {
        AuditForm::Balance => rep.residual.abs() <= rep.slack,
        AuditForm::Inequality => rep.residual - rep.lambda_correction <= rep.slack,
    };

    // Fenchel-Young excess of the active mechanism on every cell.
    let d = out.u_linear.derivative()?;
    let mut fy = f64::INFINITY;
    for &(c, _, _) in &pieces {
        let r = pots.active(Some(cell_mechanism(out, c)));
        let (v, x) = (d.cell_value(c), out.xi.cell_value(c));
        fy = fy.min(r_val(r, &v) + r_dual(r, &x) + x.dot(&v));
    }
    if let Some(segs) = &out.segments {
        for seg in segs.iter().filter(|g| g.t1 > s && g.t0 < t) {
            let r = pots.active(seg.mechanism);
            fy = fy.min(r_val(r, &seg.velocity) + r_dual(r, &seg.xi) + seg.xi.dot(&seg.velocity));
        }
    }
    rep.fenchel_young_min = fy;
    if fy < -1e-10 * scale {
        rep.anomalies.push(format!("Fenchel-Young excess {fy:.3e} is negative"));
    }

    rep.remainder = Some(remainder_term(out, e, interval)?);
    if out.scheme != SchemeKind::Effective && is_node(out, s) && is_node(out, t) && s == 0.0 && t >= out.partition().horizon() {
        let dec = decomposition(out, sys, None)?;
        if dec.value_gap < -1e-8 * scale {
            rep.anomalies
                .push(format!("rate term below the inf-convolution bound by {:.3e}", -dec.value_gap));
        }
        rep.decomposition = Some(DecompositionSummary {
            defect: dec.defect,
            value_gap: dec.value_gap,
        });
    }
    if !rep.passed {
        rep.anomalies.push(format!(
            "{:?} residual {:.3e} exceeds slack {:.3e}",
            rep.form, rep.residual, rep.slack
        ));
    }
    Ok(())
}

/// For an autonomous energy the incremental value `phi(r) = min_u (r - a) R((u - a)/(r - a)) + E(u)`
/// has `phi' = -R*(-xi(r))` along the variational interpolant, so the slope
/// integral over an increment is exactly `phi(a) - phi(b)`. The gap to the
/// midpoint sum, spread over the increment's cells, bounds the quadrature error.
fn envelope_quadrature_error(
    out: &SchemeOutput,
    pots: &Pots,
    e: &Energy,
    xi: &SampledCurve,
    pieces: &[(usize, f64, f64)],
) -> Result<f64> {
    let m = out.grid.inner();
    let mut total = 0.0;
    let mut cache: Option<(usize, f64)> = None;
    for &(c, a, b) in pieces {
        let (k, half, _) = out.grid.cell_location(c);
        let first = out.grid.cell_index(k, half, 0);
        let gap = match cache {
            Some((f, g)) if f == first => g,
            _ => {
                let r = pots.active(Some(Mechanism::of(half)));
                let (ia, ib) = out.partition().semi_interval(k, half);
                let prev = out.u_delayed.cell_value(first);
                let next = out.u_const.cell_value(first);
                let h = ib - ia;
                let exact = e.eval_raw(ib, &prev) - e.eval_raw(ib, &next) - h * r_val(r, &((&next - &prev) / h));
                let mid: f64 = (first..first + m)
                    .map(|cc| {
                        let (ca, cb) = out.grid.cell_bounds(cc);
                        (cb - ca) * r_dual(r, &xi.cell_value(cc))
                    })
                    .sum();
                let g = (mid - exact).abs();
                cache = Some((first, g));
                g
            }
        };
        let (ia, ib) = out.partition().semi_interval(k, half);
        total += gap * (b - a) / (ib - ia);
    }
    Ok(total)
}

/// Audits every consecutive node pair `[t_{k-1}, t_k]` and the full horizon.
pub fn audit_all_steps(out: &SchemeOutput, sys: &GradientSystem, form: AuditForm) -> Vec<EdbReport> {
    let nodes = out.partition().nodes();
    let mut reports: Vec<EdbReport> = nodes.windows(2).map(|w| edb_audit(out, sys, (w[0], w[1]), form)).collect();
    reports.push(edb_audit(out, sys, (0.0, out.partition().horizon()), form));
    reports
}
