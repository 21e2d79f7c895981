//! Time partitions, semi-intervals, sampled interpolants and the repetition
//! operators.

mod curve;

pub use curve::{repetition_apply, InterpolantKind, SampledCurve};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How to build a partition of `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionSpec {
    Uniform { steps: usize },
    Nodes(Vec<f64>),
}

/// Left or right semi-interval of a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Half {
    Left,
    Right,
}

/// Which dissipation mechanism acts: the first on left semi-intervals, the
/// second on right ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    First,
    Second,
}

impl Mechanism {
    pub fn of(half: Half) -> Self {
        match half {
            Half::Left => Mechanism::First,
            Half::Right => Mechanism::Second,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Mechanism::First => 1,
            Mechanism::Second => 2,
        }
    }

    pub fn from_index(j: usize) -> Result<Self> {
        match j {
            1 => Ok(Mechanism::First),
            2 => Ok(Mechanism::Second),
            _ => Err(Error::input(format!("mechanism index must be 1 or 2, got {j}"))),
        }
    }
}

/// Nodes `0 = t_0 < t_1 < ... < t_N = T`. Steps are numbered from 0, so step
/// `k` is `(t_k, t_{k+1}]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    nodes: Vec<f64>,
}

impl Partition {
    pub fn new(horizon: f64, spec: &PartitionSpec) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::input("horizon must be positive and finite"));
        }
        match spec {
            PartitionSpec::Uniform { steps } => Self::uniform(horizon, *steps),
            PartitionSpec::Nodes(nodes) => {
                let p = Self::from_nodes(nodes.clone())?;
                if (p.horizon() - horizon).abs() > 1e-12 * horizon {
                    return Err(Error::input(format!(
                        "last node {} differs from the horizon {horizon}",
                        p.horizon()
                    )));
                }
                Ok(p)
            }
        }
    }

    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::input("horizon must be positive and finite"));
        }
        if steps == 0 {
            return Err(Error::input("a partition needs at least one step"));
        }
        let mut nodes: Vec<f64> = (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect();
        nodes[steps] = horizon;
        Ok(Partition { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::input("a partition needs at least two nodes"));
        }
        if nodes[0] != 0.0 {
            return Err(Error::input("the first node must be 0"));
        }
        if nodes.iter().any(|t| !t.is_finite()) || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::input("partition nodes must be finite and strictly increasing"));
        }
        Ok(Partition { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.nodes[self.steps()]
    }

    pub fn step_size(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    pub fn step_sizes(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `t_{k+1/2}`.
    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.nodes[k] + self.nodes[k + 1])
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.steps()).map(|k| self.midpoint(k)).collect()
    }

    /// The fineness `max_k tau_k`.
    pub fn max_step(&self) -> f64 {
        self.step_sizes().into_iter().fold(0.0, f64::max)
    }

    /// Semi-interval `(a, b]` of step `k`.
    pub fn semi_interval(&self, k: usize, half: Half) -> (f64, f64) {
        match half {
            Half::Left => (self.nodes[k], self.midpoint(k)),
            Half::Right => (self.midpoint(k), self.nodes[k + 1]),
        }
    }

    /// Step and semi-interval containing `t` in `(0, T]`.
    pub fn locate(&self, t: f64) -> Result<(usize, Half)> {
        if !(t > 0.0 && t <= self.horizon()) {
            return Err(Error::input(format!("time {t} outside (0, {}]", self.horizon())));
        }
        let k = self.nodes.partition_point(|&x| x < t) - 1;
        let half = if t <= self.midpoint(k) { Half::Left } else { Half::Right };
        Ok((k, half))
    }

    /// Characteristic function of the left semi-intervals on `(0, T)`.
    pub fn chi(&self, t: f64) -> Result<u8> {
        if !(t > 0.0 && t < self.horizon()) {
            return Err(Error::input(format!("time {t} outside (0, {})", self.horizon())));
        }
        Ok(match self.locate(t)?.1 {
            Half::Left => 1,
            Half::Right => 0,
        })
    }
}

/// Refinement of a partition by `inner` cells per semi-interval. Cell `c` is
/// `(times[c], times[c+1]]`; node `t_k` is grid point `2 k M` and the
/// midpoint of step `k` is grid point `2 k M + M`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingGrid {
    partition: Partition,
    inner: usize,
    times: Vec<f64>,
}

impl SamplingGrid {
    pub fn new(partition: Partition, inner: usize) -> Result<Self> {
        if inner == 0 {
            return Err(Error::input("inner factor must be at least 1"));
        }
        let mut times = Vec::with_capacity(2 * partition.steps() * inner + 1);
        for k in 0..partition.steps() {
            for half in [Half::Left, Half::Right] {
                let (a, b) = partition.semi_interval(k, half);
                for i in 0..inner {
                    times.push(if i == 0 { a } else { a + (b - a) * i as f64 / inner as f64 });
                }
            }
        }
        times.push(partition.horizon());
        Ok(SamplingGrid { partition, inner, times })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn inner(&self) -> usize {
        self.inner
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn cells(&self) -> usize {
        self.times.len() - 1
    }

    pub fn cell_bounds(&self, c: usize) -> (f64, f64) {
        (self.times[c], self.times[c + 1])
    }

    pub fn cell_midpoint(&self, c: usize) -> f64 {
        0.5 * (self.times[c] + self.times[c + 1])
    }

    /// Step, semi-interval and position inside the semi-interval of cell `c`.
    pub fn cell_location(&self, c: usize) -> (usize, Half, usize) {
        let per_step = 2 * self.inner;
        let k = c / per_step;
        let r = c % per_step;
        if r < self.inner {
            (k, Half::Left, r)
        } else {
            (k, Half::Right, r - self.inner)
        }
    }

    pub fn cell_index(&self, k: usize, half: Half, i: usize) -> usize {
        2 * self.inner * k
            + match half {
                Half::Left => i,
                Half::Right => self.inner + i,
            }
    }

    /// Grid index of node `t_k`.
    pub fn node_index(&self, k: usize) -> usize {
        2 * self.inner * k
    }

    /// Grid index of the midpoint of step `k`.
    pub fn midpoint_index(&self, k: usize) -> usize {
        2 * self.inner * k + self.inner
    }

    /// Cell containing `t` in `(0, T]`.
    pub fn cell_of(&self, t: f64) -> Option<usize> {
        if !(t > 0.0 && t <= self.partition.horizon()) {
            return None;
        }
        Some((self.times.partition_point(|&x| x < t) - 1).min(self.cells() - 1))
    }

    /// Pieces `(cell, a, b)` of `[s, t]` cut along the grid.
    pub fn pieces(&self, s: f64, t: f64) -> Result<Vec<(usize, f64, f64)>> {
        let horizon = self.partition.horizon();
        if s > t {
            return Err(Error::input(format!("empty interval [{s}, {t}]: s > t")));
        }
        if s < 0.0 || t > horizon * (1.0 + 1e-14) {
            return Err(Error::input(format!("interval [{s}, {t}] not inside [0, {horizon}]")));
        }
        let t = t.min(horizon);
        let mut out = Vec::new();
        if s == t {
            return Ok(out);
        }
        let first = self.times.partition_point(|&x| x <= s).saturating_sub(1);
        for c in first..self.cells() {
            let (a, b) = self.cell_bounds(c);
            if a >= t {
                break;
            }
            let lo = a.max(s);
            let hi = b.min(t);
            if hi > lo {
                out.push((c, lo, hi));
            }
        }
        Ok(out)
    }
}
