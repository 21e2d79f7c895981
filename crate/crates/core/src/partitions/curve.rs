use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Half, Mechanism, Partition, SamplingGrid};
use crate::error::{check_dim, Error, Result};
use crate::{Vector, WeightedNorm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpolantKind {
    PiecewiseConstant,
    DelayedConstant,
    PiecewiseLinear,
    Variational,
}

impl InterpolantKind {
    pub fn name(self) -> &'static str {
        match self {
            InterpolantKind::PiecewiseConstant => "piecewise-constant",
            InterpolantKind::DelayedConstant => "delayed-constant",
            InterpolantKind::PiecewiseLinear => "piecewise-linear",
            InterpolantKind::Variational => "variational",
        }
    }

    /// Whether samples are cell values rather than node values.
    pub fn is_cellwise(self) -> bool {
        !matches!(self, InterpolantKind::PiecewiseLinear)
    }
}

/// A curve on a sampling grid. For the piecewise-linear kind `samples[i]` is
/// the value at grid time `i`. For the other kinds `samples[0]` is the value
/// at time 0 and `samples[c + 1]` the value on cell `c`; variational samples
/// are taken at cell midpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledCurve {
    grid: SamplingGrid,
    kind: InterpolantKind,
    dim: usize,
    samples: Vec<Vector>,
}

impl SampledCurve {
    pub fn new(grid: SamplingGrid, kind: InterpolantKind, samples: Vec<Vector>) -> Result<Self> {
        if samples.len() != grid.cells() + 1 {
            return Err(Error::input(format!(
                "curve needs {} samples, got {}",
                grid.cells() + 1,
                samples.len()
            )));
        }
        let dim = samples[0].len();
        for s in &samples {
            check_dim("curve sample", dim, s.len())?;
        }
        Ok(SampledCurve { grid, kind, dim, samples })
    }

    pub fn constant(grid: SamplingGrid, kind: InterpolantKind, value: Vector) -> Self {
        let samples = vec![value.clone(); grid.cells() + 1];
        SampledCurve {
            dim: value.len(),
            grid,
            kind,
            samples,
        }
    }

    /// Cellwise curve from an initial value and a function of the cell index.
    pub fn from_cells(
        grid: SamplingGrid,
        kind: InterpolantKind,
        initial: Vector,
        cell: impl Fn(usize) -> Vector,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(grid.cells() + 1);
        samples.push(initial);
        samples.extend((0..grid.cells()).map(cell));
        Self::new(grid, kind, samples)
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn partition(&self) -> &Partition {
        self.grid.partition()
    }

    pub fn kind(&self) -> InterpolantKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Vector] {
        &self.samples
    }

    /// Time at which sample `i` is taken.
    pub fn sample_time(&self, i: usize) -> f64 {
        match self.kind {
            InterpolantKind::Variational if i > 0 => self.grid.cell_midpoint(i - 1),
            _ => self.grid.times()[i],
        }
    }

    /// Representative value on cell `c`: the cell value, or for the linear
    /// kind the midpoint value.
    pub fn cell_value(&self, c: usize) -> Vector {
        if self.kind.is_cellwise() {
            self.samples[c + 1].clone()
        } else {
            (&self.samples[c] + &self.samples[c + 1]) * 0.5
        }
    }

    pub fn value_at(&self, t: f64) -> Vector {
        let Some(c) = self.grid.cell_of(t) else {
            return if t <= 0.0 {
                self.samples[0].clone()
            } else {
                self.samples[self.samples.len() - 1].clone()
            };
        };
        if self.kind.is_cellwise() {
            return self.samples[c + 1].clone();
        }
        let (a, b) = self.grid.cell_bounds(c);
        let th = (t - a) / (b - a);
        &self.samples[c] + (&self.samples[c + 1] - &self.samples[c]) * th
    }

    /// Value at partition node `t_k`.
    pub fn node_value(&self, k: usize) -> Vector {
        self.samples[self.grid.node_index(k)].clone()
    }

    /// Derivative of a piecewise-linear curve, as a piecewise-constant curve.
    pub fn derivative(&self) -> Result<SampledCurve> {
        if self.kind != InterpolantKind::PiecewiseLinear {
            return Err(Error::input("derivative needs a piecewise-linear curve"));
        }
        SampledCurve::from_cells(
            self.grid.clone(),
            InterpolantKind::PiecewiseConstant,
            Vector::zeros(self.dim),
            |c| {
                let (a, b) = self.grid.cell_bounds(c);
                (&self.samples[c + 1] - &self.samples[c]) / (b - a)
            },
        )
    }

    /// Composite midpoint quadrature of `f(r, curve(r))` over `[s, t]`,
    /// splitting partial cells at `s` and `t`.
    pub fn integrate(&self, mut f: impl FnMut(f64, &Vector) -> f64, s: f64, t: f64) -> Result<f64> {
        let mut total = 0.0;
        for (c, a, b) in self.grid.pieces(s, t)? {
            let mid = 0.5 * (a + b);
            let value = if self.kind.is_cellwise() {
                self.samples[c + 1].clone()
            } else {
                self.value_at(mid)
            };
            total += (b - a) * f(mid, &value);
        }
        Ok(total)
    }

    pub fn l1_norm(&self, norm: &WeightedNorm) -> f64 {
        let horizon = self.partition().horizon();
        self.integrate(|_, v| norm.norm(v), 0.0, horizon).unwrap_or(f64::NAN)
    }

    /// `sup` distance at all grid times and cell midpoints.
    pub fn sup_distance(&self, other: &SampledCurve, norm: &WeightedNorm) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::input("curves live on different grids"));
        }
        let mut worst: f64 = 0.0;
        for &t in self.grid.times() {
            worst = worst.max(norm.norm(&(self.value_at(t) - other.value_at(t))));
        }
        for c in 0..self.grid.cells() {
            let t = self.grid.cell_midpoint(c);
            worst = worst.max(norm.norm(&(self.value_at(t) - other.value_at(t))));
        }
        Ok(worst)
    }

    /// CSV with a `# interpolant=<kind>` comment line, a header
    /// `t,v_1,...,v_n` and 17 significant digits per value.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut out = out;
        let io = |e: std::io::Error| Error::input(format!("csv write failed: {e}"));
        writeln!(out, "# interpolant={}", self.kind.name()).map_err(io)?;
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::input(format!("csv write failed: {e}"));
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("v_{i}")));
        w.write_record(&header).map_err(csv_err)?;
        for (i, s) in self.samples.iter().enumerate() {
            let mut row = vec![format!("{:.16e}", self.sample_time(i))];
            row.extend(s.iter().map(|x| format!("{x:.16e}")));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// The repetition operator for mechanism `j`: the first copies every left
/// semi-interval onto the following right one, the second copies every right
/// semi-interval onto the preceding left one.
pub fn repetition_apply(j: Mechanism, partition: &Partition, g: &SampledCurve) -> Result<SampledCurve> {
    if g.partition() != partition {
        return Err(Error::input("curve is not sampled on the given partition"));
    }
    if !g.kind.is_cellwise() {
        return Err(Error::input("repetition operators act on cellwise curves"));
    }
    let grid = g.grid();
    let mut samples = g.samples.clone();
    for k in 0..partition.steps() {
        for i in 0..grid.inner() {
            let l = grid.cell_index(k, Half::Left, i);
            let r = grid.cell_index(k, Half::Right, i);
            match j {
                Mechanism::First => samples[r + 1] = g.samples[l + 1].clone(),
                Mechanism::Second => samples[l + 1] = g.samples[r + 1].clone(),
            }
        }
    }
    Ok(SampledCurve {
        samples,
        ..g.clone()
    })
}
