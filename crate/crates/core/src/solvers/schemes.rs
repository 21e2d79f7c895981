use super::regime::{path_segment_at, path_state, regime_path, PathSegment};
use super::{prox_step, BlockMode, GradientSystem, SchemeKind, SchemeOutput, SolverOptions, SolverStats};
use crate::energies::Block;
use crate::error::{check_dim, Error, Result};
use crate::partitions::{Half, InterpolantKind, Mechanism, Partition, SampledCurve, SamplingGrid};
use crate::Vector;

/// A single-mechanism flow on one interval.
#[derive(Clone, Debug)]
pub struct SubstepFlow {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    /// Force on each inner cell.
    pub forces: Vec<Vector>,
    pub segments: Option<Vec<PathSegment>>,
    pub prox_calls: usize,
    pub iterations: usize,
    pub max_residual: f64,
    pub warnings: Vec<String>,
}

fn inner_times(s: f64, t: f64, m: usize) -> Vec<f64> {
    (0..=m)
        .map(|i| match i {
            0 => s,
            i if i == m => t,
            i => s + (t - s) * i as f64 / m as f64,
        })
        .collect()
}

/// Approximates `dR~_j(u') + dE(t, u) ∋ 0` on `interval` from `u_init`.
///
/// Uses `inner_steps` prox steps with `2 R_j(v/2)`, or the exact regime
/// solver for the max-norm energy with a diagonal quadratic dissipation.
pub fn substep_flow(
    sys: &GradientSystem,
    which: Mechanism,
    interval: (f64, f64),
    u_init: &Vector,
    opts: &SolverOptions,
) -> Result<SubstepFlow> {
    opts.validate()?;
    check_dim("initial state", sys.dim(), u_init.len())?;
    let (s, t) = interval;
    if !(s.is_finite() && t.is_finite() && s < t) {
        return Err(Error::input(format!("bad sub-step interval [{s}, {t}]")));
    }
    let times = inner_times(s, t, opts.inner_steps);
    let r = sys.rescaled(which)?;
    let mut warnings = Vec::new();
    if sys.is_max_norm() {
        if let Some(alpha) = r.as_diagonal_dual() {
            match regime_path(&alpha, u_init, s, t, Some(which)) {
                Some(segments) => {
                    let (states, forces) = sample_path(&segments, &times);
                    return Ok(SubstepFlow {
                        times,
                        states,
                        forces,
                        segments: Some(segments),
                        prox_calls: 0,
                        iterations: 0,
                        max_residual: 0.0,
                        warnings,
                    });
                }
                None => warnings.push(format!(
                    "regime solver could not classify the state at t = {s}; using prox steps"
                )),
            }
        }
    }
    let e = sys.energy();
    let mut states = vec![u_init.clone()];
    let mut forces = Vec::with_capacity(opts.inner_steps);
    let mut iterations = 0;
    let mut max_residual: f64 = 0.0;
    for w in times.windows(2) {
        let out = prox_step(e, &r, w[1], states.last().expect("nonempty"), w[1] - w[0], opts.tol)?;
        iterations += out.iterations;
        max_residual = max_residual.max(out.residual);
        states.push(out.u);
        forces.push(out.xi);
    }
    Ok(SubstepFlow {
        times,
        states,
        forces,
        segments: None,
        prox_calls: opts.inner_steps,
        iterations,
        max_residual,
        warnings,
    })
}

fn sample_path(segments: &[PathSegment], times: &[f64]) -> (Vec<Vector>, Vec<Vector>) {
    let states = times
        .iter()
        .map(|&t| path_state(segments, t).expect("nonempty path"))
        .collect();
    let forces = times
        .windows(2)
        .map(|w| {
            path_segment_at(segments, 0.5 * (w[0] + w[1]))
                .expect("nonempty path")
                .xi
                .clone()
        })
        .collect();
    (states, forces)
}

/// Zeroes the force components of the frozen block on each cell.
struct ForceMask {
    y: Vec<usize>,
    z: Vec<usize>,
}

impl ForceMask {
    fn new(sys: &GradientSystem) -> Result<Option<Self>> {
        if sys.block_layout().is_none() {
            return Ok(None);
        }
        Ok(Some(ForceMask {
            y: sys.energy().block_indices(Block::Y)?,
            z: sys.energy().block_indices(Block::Z)?,
        }))
    }

    fn apply(&self, half: Half, xi: &mut Vector) {
        let frozen = match half {
            Half::Left => &self.z,
            Half::Right => &self.y,
        };
        for &i in frozen {
            xi[i] = 0.0;
        }
    }
}

/// Cell data collected while a scheme advances.
struct Trace {
    grid: SamplingGrid,
    u0: Vector,
    nodes: Vec<Vector>,
    values: Vec<Vector>,
    delayed: Vec<Vector>,
    forces: Vec<Vector>,
    var_mid: Vec<Vector>,
    var_nodes: Vec<Vector>,
    var_forces: Vec<Vector>,
    segments: Option<Vec<PathSegment>>,
    stats: SolverStats,
    warnings: Vec<String>,
}

impl Trace {
    fn new(p: &Partition, u0: &Vector, opts: &SolverOptions) -> Result<Self> {
        Ok(Trace {
            grid: SamplingGrid::new(p.clone(), opts.inner_steps)?,
            u0: u0.clone(),
            nodes: vec![u0.clone()],
            values: Vec::new(),
            delayed: Vec::new(),
            forces: Vec::new(),
            var_mid: Vec::new(),
            var_nodes: vec![u0.clone()],
            var_forces: Vec::new(),
            segments: None,
            stats: SolverStats::default(),
            warnings: Vec::new(),
        })
    }

    fn last(&self) -> Vector {
        self.nodes.last().expect("nonempty").clone()
    }

    /// Cells of one minimizing-movement increment from `prev` to `next`
    /// spanning grid cells `first..first + count`.
    fn push_increment(&mut self, first: usize, count: usize, prev: &Vector, next: &Vector, xi: &Vector) {
        let times = self.grid.times();
        let (a, b) = (times[first], times[first + count]);
        for c in first..first + count {
            let th = (times[c + 1] - a) / (b - a);
            self.nodes.push(if c + 1 == first + count {
                next.clone()
            } else {
                prev + (next - prev) * th
            });
            self.values.push(next.clone());
            self.delayed.push(prev.clone());
            self.forces.push(xi.clone());
        }
    }

    fn finish(self, sys: &GradientSystem, scheme: SchemeKind, opts: &SolverOptions) -> Result<SchemeOutput> {
        let Trace {
            grid,
            u0,
            nodes,
            values,
            delayed,
            forces,
            var_mid,
            var_nodes,
            var_forces,
            segments,
            mut stats,
            mut warnings,
        } = self;
        let n = u0.len();
        power_check(sys, &grid, &nodes, &mut stats, &mut warnings);
        let cellwise = |kind, cells: &[Vector], init: &Vector| {
            SampledCurve::from_cells(grid.clone(), kind, init.clone(), |c| cells[c].clone())
        };
        let u_const = cellwise(InterpolantKind::PiecewiseConstant, &values, &u0)?;
        let u_delayed = cellwise(InterpolantKind::DelayedConstant, &delayed, &u0)?;
        let xi = cellwise(InterpolantKind::PiecewiseConstant, &forces, &Vector::zeros(n))?;
        let u_linear = SampledCurve::new(grid.clone(), InterpolantKind::PiecewiseLinear, nodes)?;
        let (u_variational, variational_nodes, xi_variational) = if var_mid.is_empty() {
            (None, None, None)
        } else {
            (
                Some(cellwise(InterpolantKind::Variational, &var_mid, &u0)?),
                Some(var_nodes),
                Some(cellwise(InterpolantKind::PiecewiseConstant, &var_forces, &Vector::zeros(n))?),
            )
        };
        Ok(SchemeOutput {
            scheme,
            options: opts.clone(),
            grid,
            u_const,
            u_delayed,
            u_linear,
            xi,
            u_variational,
            variational_nodes,
            xi_variational,
            segments,
            stats,
            warnings,
        })
    }
}

fn power_check(
    sys: &GradientSystem,
    grid: &SamplingGrid,
    nodes: &[Vector],
    stats: &mut SolverStats,
    warnings: &mut Vec<String>,
) {
    let e = sys.energy();
    if e.is_autonomous() {
        stats.power_constant = Some(0.0);
        return;
    }
    match e.power_constant(grid.partition().horizon()) {
        Some(c) => {
            stats.power_constant = Some(c);
            for (&t, u) in grid.times().iter().zip(nodes) {
                let (p, en) = (e.power_raw(t, u), e.eval_raw(t, u) + e.shift());
                if p.abs() > c * en + 1e-9 * (1.0 + en.abs()) {
                    stats.power_violations += 1;
                }
            }
            if stats.power_violations > 0 {
                warnings.push(format!(
                    "power control |dE/dt| <= {c:.3e} E failed at {} states",
                    stats.power_violations
                ));
            }
        }
        None => warnings.push("power-control constant unavailable for this energy shift".into()),
    }
}

fn check_run(sys: &GradientSystem, u0: &Vector, opts: &SolverOptions) -> Result<()> {
    opts.validate()?;
    check_dim("initial state", sys.dim(), u0.len())?;
    if !u0.iter().all(|x| x.is_finite()) {
        return Err(Error::input("initial state must be finite"));
    }
    Ok(())
}

fn run_split(
    sys: &GradientSystem,
    p: &Partition,
    u0: &Vector,
    opts: &SolverOptions,
    scheme: SchemeKind,
) -> Result<SchemeOutput> {
    check_run(sys, u0, opts)?;
    let mask = ForceMask::new(sys)?;
    let mut tr = Trace::new(p, u0, opts)?;
    let mut segments = Vec::new();
    let mut exact = true;
    for k in 0..p.steps() {
        for half in [Half::Left, Half::Right] {
            let prev = tr.last();
            let flow = substep_flow(sys, Mechanism::of(half), p.semi_interval(k, half), &prev, opts)?;
            tr.stats
                .record(k, Some(half), flow.iterations, flow.max_residual, flow.prox_calls);
            tr.warnings.extend(flow.warnings);
            match flow.segments {
                Some(s) => {
                    tr.stats.exact_segments += s.len();
                    segments.extend(s);
                }
                None => exact = false,
            }
            for (i, mut xi) in flow.forces.into_iter().enumerate() {
                if let Some(m) = &mask {
                    m.apply(half, &mut xi);
                }
                tr.values.push(flow.states[i + 1].clone());
                tr.delayed.push(flow.states[i].clone());
                tr.forces.push(xi);
            }
            tr.nodes.extend(flow.states.into_iter().skip(1));
        }
    }
    if exact {
        tr.segments = Some(segments);
    }
    tr.finish(sys, scheme, opts)
}

fn run_amm(
    sys: &GradientSystem,
    p: &Partition,
    u0: &Vector,
    opts: &SolverOptions,
    scheme: SchemeKind,
) -> Result<SchemeOutput> {
    check_run(sys, u0, opts)?;
    let mask = ForceMask::new(sys)?;
    let e = sys.energy();
    let m = opts.inner_steps;
    let mut tr = Trace::new(p, u0, opts)?;
    let tildes = [sys.rescaled(Mechanism::First)?, sys.rescaled(Mechanism::Second)?];
    for k in 0..p.steps() {
        for half in [Half::Left, Half::Right] {
            let r = &tildes[Mechanism::of(half).index() - 1];
            let (a, b) = p.semi_interval(k, half);
            let prev = tr.last();
            let out = prox_step(e, r, b, &prev, b - a, opts.tol)?;
            let mut calls = 1;
            let mut iterations = out.iterations;
            let mut residual = out.residual;
            let mut xi = out.xi.clone();
            if let Some(mk) = &mask {
                mk.apply(half, &mut xi);
            }
            let first = tr.grid.cell_index(k, half, 0);
            if opts.with_variational {
                let times = tr.grid.times().to_vec();
                for c in first..first + m {
                    let mid = tr.grid.cell_midpoint(c);
                    let v = prox_step(e, r, mid, &prev, mid - a, opts.tol)?;
                    let mut vx = v.xi;
                    if let Some(mk) = &mask {
                        mk.apply(half, &mut vx);
                    }
                    tr.var_mid.push(v.u);
                    tr.var_forces.push(vx);
                    iterations += v.iterations;
                    residual = residual.max(v.residual);
                    calls += 1;
                    if c + 1 < first + m {
                        let tn = times[c + 1];
                        let v = prox_step(e, r, tn, &prev, tn - a, opts.tol)?;
                        iterations += v.iterations;
                        residual = residual.max(v.residual);
                        calls += 1;
                        tr.var_nodes.push(v.u);
                    } else {
                        tr.var_nodes.push(out.u.clone());
                    }
                }
            }
            tr.stats.record(k, Some(half), iterations, residual, calls);
            tr.push_increment(first, m, &prev, &out.u, &xi);
        }
    }
    tr.finish(sys, scheme, opts)
}

/// Time-splitting: on every left semi-interval the flow of `R~_1`, on every
/// right semi-interval the flow of `R~_2`, stitched continuously.
pub fn split_step_solve(sys: &GradientSystem, p: &Partition, u0: &Vector, opts: &SolverOptions) -> Result<SchemeOutput> {
    run_split(sys, p, u0, opts, SchemeKind::Split)
}

/// Alternating minimizing movements: one prox step with `R~_1` at
/// `E(t_{k-1/2})` and one with `R~_2` at `E(t_k)` per step.
pub fn amm_solve(sys: &GradientSystem, p: &Partition, u0: &Vector, opts: &SolverOptions) -> Result<SchemeOutput> {
    run_amm(sys, p, u0, opts, SchemeKind::Amm)
}

/// Staggered schemes for block systems: the y block moves on left
/// semi-intervals, the z block on right ones.
pub fn block_solve(
    sys: &GradientSystem,
    p: &Partition,
    u0: &Vector,
    mode: BlockMode,
    opts: &SolverOptions,
) -> Result<SchemeOutput> {
    if sys.block_layout().is_none() {
        return Err(Error::input("block schemes need a block system"));
    }
    match mode {
        BlockMode::Split => run_split(sys, p, u0, opts, SchemeKind::BlockSplit),
        BlockMode::Amm => run_amm(sys, p, u0, opts, SchemeKind::BlockAmm),
    }
}

/// Minimizing movements for the effective system with `R_eff = R_1 □ R_2`;
/// the max-norm energy with diagonal quadratic dissipations is solved exactly.
pub fn effective_solve(sys: &GradientSystem, p: &Partition, u0: &Vector, opts: &SolverOptions) -> Result<SchemeOutput> {
    check_run(sys, u0, opts)?;
    let r = sys.effective()?;
    let mut tr = Trace::new(p, u0, opts)?;
    if sys.is_max_norm() {
        if let Some(alpha) = r.as_diagonal_dual() {
            match regime_path(&alpha, u0, 0.0, p.horizon(), None) {
                Some(segments) => {
                    let times = tr.grid.times().to_vec();
                    let (states, forces) = sample_path(&segments, &times);
                    tr.values = states[1..].to_vec();
                    tr.delayed = states[..states.len() - 1].to_vec();
                    tr.forces = forces;
                    tr.nodes = states;
                    tr.stats.exact_segments = segments.len();
                    tr.segments = Some(segments);
                    return tr.finish(sys, SchemeKind::Effective, opts);
                }
                None => tr
                    .warnings
                    .push("regime solver could not classify the initial state; using prox steps".into()),
            }
        }
    }
    let m = opts.inner_steps;
    for k in 0..p.steps() {
        let (a, b) = (p.nodes()[k], p.nodes()[k + 1]);
        let prev = tr.last();
        let out = prox_step(sys.energy(), &r, b, &prev, b - a, opts.tol)?;
        tr.stats.record(k, None, out.iterations, out.residual, 1);
        let first = tr.grid.cell_index(k, Half::Left, 0);
        tr.push_increment(first, 2 * m, &prev, &out.u, &out.xi);
    }
    tr.finish(sys, SchemeKind::Effective, opts)
}
