//! Time-dependent driving energies with their power and Frechet
//! subdifferential.

mod load;
mod subdiff;

pub use load::Load;
pub use subdiff::SubdiffSet;

use crate::error::{check_dim, Error, Result};
use crate::optim;
use crate::{Matrix, Vector, WeightedNorm};

/// Coordinates of a block system `u = (y, z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Y,
    Z,
}

/// Double well `W(r) = depth/4 (r^2 - width^2)^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoubleWell {
    pub depth: f64,
    pub width: f64,
}

impl Default for DoubleWell {
    fn default() -> Self {
        DoubleWell { depth: 1.0, width: 1.0 }
    }
}

impl DoubleWell {
    pub fn value(&self, r: f64) -> f64 {
        let q = r * r - self.width * self.width;
        0.25 * self.depth * q * q
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.depth * r * (r * r - self.width * self.width)
    }

    pub fn second_derivative(&self, r: f64) -> f64 {
        self.depth * (3.0 * r * r - self.width * self.width)
    }

    /// `C_{W,1}` in `W'' >= -C_{W,1}`.
    pub fn semiconvexity(&self) -> f64 {
        self.depth * self.width * self.width
    }
}

#[derive(Clone, Debug)]
pub enum EnergyKind {
    /// `1/2 <A y, y> + <B y, z> + 1/2 <G z, z> - <f(t), y> - <g(t), z>`.
    QuadraticBlock {
        a: Matrix,
        b: Matrix,
        g: Matrix,
        f_load: Load,
        g_load: Load,
    },
    /// `max(|u1|, |u2|)`.
    MaxNorm,
    /// Finite differences on the `m` interior nodes of `[0, 1]` with mesh
    /// `h` and homogeneous Dirichlet data:
    /// `sum h [1/2 ((u_{i+1} - u_i)/h)^2 + W(u_i)] - h <l(t), u>`.
    AllenCahn1D { m: usize, h: f64, well: DoubleWell, load: Load },
}

#[derive(Clone, Debug)]
pub struct Energy {
    kind: EnergyKind,
    shift: f64,
    lambda: f64,
    norm: WeightedNorm,
}

impl Energy {
    pub fn quadratic_block(a: Matrix, b: Matrix, g: Matrix, f_load: Load, g_load: Load) -> Result<Self> {
        let ny = a.nrows();
        let nz = g.nrows();
        if a.ncols() != ny || g.ncols() != nz {
            return Err(Error::config("A and G must be square"));
        }
        if b.nrows() != nz || b.ncols() != ny {
            return Err(Error::config(format!("B must be {nz}x{ny}, got {}x{}", b.nrows(), b.ncols())));
        }
        if ny + nz == 0 {
            return Err(Error::config("empty state space"));
        }
        check_dim("load f", ny, f_load.dim())?;
        check_dim("load g", nz, g_load.dim())?;
        f_load.validate()?;
        g_load.validate()?;
        let h = block_hessian(&a, &b, &g);
        if (&h - h.transpose()).amax() > 1e-12 * (1.0 + h.amax()) {
            return Err(Error::config("A and G must be symmetric"));
        }
        let lmin = h.clone().symmetric_eigen().eigenvalues.min();
        let n = ny + nz;
        Ok(Energy {
            kind: EnergyKind::QuadraticBlock { a, b, g, f_load, g_load },
            shift: 0.0,
            lambda: lmin.min(0.0),
            norm: WeightedNorm::euclidean(n),
        })
    }

    pub fn max_norm() -> Self {
        Energy {
            kind: EnergyKind::MaxNorm,
            shift: 0.0,
            lambda: 0.0,
            norm: WeightedNorm::euclidean(2),
        }
    }

    pub fn allen_cahn(m: usize, h: f64, well: DoubleWell, load: Load) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("Allen-Cahn grid needs at least one node"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::config("mesh size must be positive"));
        }
        if !(well.depth > 0.0 && well.width.is_finite() && well.depth.is_finite()) {
            return Err(Error::config("double well needs a positive finite depth"));
        }
        check_dim("Allen-Cahn load", m, load.dim())?;
        load.validate()?;
        Ok(Energy {
            lambda: -well.semiconvexity(),
            norm: WeightedNorm::new(Vector::from_element(m, h))?,
            kind: EnergyKind::AllenCahn1D { m, h, well, load },
            shift: 0.0,
        })
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    /// Sets the shift to `1 + max(0, -min E_raw)` over the given states.
    pub fn calibrate_shift(&mut self, samples: &[(f64, Vector)]) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for (t, u) in samples {
            check_dim("energy argument", self.dim(), u.len())?;
            lo = lo.min(self.eval_raw(*t, u));
        }
        if !lo.is_finite() {
            lo = 0.0;
        }
        self.shift = 1.0 + (-lo).max(0.0);
        Ok(self.shift)
    }

    pub fn kind(&self) -> &EnergyKind {
        &self.kind
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// The `lambda` in the `lambda`-convexity inequality with respect to [`Energy::norm`].
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The norm in which `lambda` is measured.
    pub fn norm(&self) -> &WeightedNorm {
        &self.norm
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            EnergyKind::QuadraticBlock { a, g, .. } => a.nrows() + g.nrows(),
            EnergyKind::MaxNorm => 2,
            EnergyKind::AllenCahn1D { m, .. } => *m,
        }
    }

    /// `(n_y, n_z)` for block energies.
    pub fn block_sizes(&self) -> Option<(usize, usize)> {
        match &self.kind {
            EnergyKind::QuadraticBlock { a, g, .. } => Some((a.nrows(), g.nrows())),
            _ => None,
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self.kind, EnergyKind::MaxNorm)
    }

    pub fn is_autonomous(&self) -> bool {
        match &self.kind {
            EnergyKind::QuadraticBlock { f_load, g_load, .. } => f_load.is_autonomous() && g_load.is_autonomous(),
            EnergyKind::MaxNorm => true,
            EnergyKind::AllenCahn1D { load, .. } => load.is_autonomous(),
        }
    }

    pub fn eval(&self, t: f64, u: &Vector) -> Result<f64> {
        check_dim("energy argument", self.dim(), u.len())?;
        Ok(self.eval_raw(t, u) + self.shift)
    }

    pub(crate) fn eval_raw(&self, t: f64, u: &Vector) -> f64 {
        match &self.kind {
            EnergyKind::QuadraticBlock { a, b, g, f_load, g_load } => {
                let ny = a.nrows();
                let y = u.rows(0, ny);
                let z = u.rows(ny, g.nrows());
                let mut e = 0.5 * y.dot(&(a * y)) + z.dot(&(b * y)) + 0.5 * z.dot(&(g * z));
                if ny > 0 {
                    e -= f_load.value(t).dot(&y);
                }
                if g.nrows() > 0 {
                    e -= g_load.value(t).dot(&z);
                }
                e
            }
            EnergyKind::MaxNorm => u[0].abs().max(u[1].abs()),
            EnergyKind::AllenCahn1D { m, h, well, load } => {
                let mut e = 0.0;
                let mut prev = 0.0;
                for i in 0..=*m {
                    let cur = if i < *m { u[i] } else { 0.0 };
                    let d = (cur - prev) / h;
                    e += 0.5 * h * d * d;
                    prev = cur;
                }
                e += h * u.iter().map(|r| well.value(*r)).sum::<f64>();
                e - h * load.value(t).dot(u)
            }
        }
    }

    /// `d/dt E(t, u)`.
    pub fn power(&self, t: f64, u: &Vector) -> Result<f64> {
        check_dim("energy argument", self.dim(), u.len())?;
        Ok(self.power_raw(t, u))
    }

    pub(crate) fn power_raw(&self, t: f64, u: &Vector) -> f64 {
        match &self.kind {
            EnergyKind::QuadraticBlock { a, g, f_load, g_load, .. } => {
                let ny = a.nrows();
                let mut p = 0.0;
                if ny > 0 {
                    p -= f_load.derivative(t).dot(&u.rows(0, ny));
                }
                if g.nrows() > 0 {
                    p -= g_load.derivative(t).dot(&u.rows(ny, g.nrows()));
                }
                p
            }
            EnergyKind::MaxNorm => 0.0,
            EnergyKind::AllenCahn1D { h, load, .. } => -h * load.derivative(t).dot(u),
        }
    }

    /// Gradient of a smooth energy, `None` for the max-norm.
    pub fn gradient(&self, t: f64, u: &Vector) -> Result<Option<Vector>> {
        check_dim("energy argument", self.dim(), u.len())?;
        Ok(self.gradient_raw(t, u))
    }

    pub(crate) fn gradient_raw(&self, t: f64, u: &Vector) -> Option<Vector> {
        match &self.kind {
            EnergyKind::QuadraticBlock { a, b, g, f_load, g_load } => {
                let ny = a.nrows();
                let nz = g.nrows();
                let y = u.rows(0, ny).into_owned();
                let z = u.rows(ny, nz).into_owned();
                let mut out = Vector::zeros(ny + nz);
                if ny > 0 {
                    out.rows_mut(0, ny).copy_from(&(a * &y + b.transpose() * &z - f_load.value(t)));
                }
                if nz > 0 {
                    out.rows_mut(ny, nz).copy_from(&(b * &y + g * &z - g_load.value(t)));
                }
                Some(out)
            }
            EnergyKind::MaxNorm => None,
            EnergyKind::AllenCahn1D { m, h, well, load } => {
                let l = load.value(t);
                Some(Vector::from_iterator(
                    *m,
                    (0..*m).map(|i| {
                        let left = if i > 0 { u[i - 1] } else { 0.0 };
                        let right = if i + 1 < *m { u[i + 1] } else { 0.0 };
                        (2.0 * u[i] - left - right) / h + h * well.derivative(u[i]) - h * l[i]
                    }),
                ))
            }
        }
    }

    /// Hessian of a smooth energy.
    pub fn hessian(&self, u: &Vector) -> Option<Matrix> {
        match &self.kind {
            EnergyKind::QuadraticBlock { a, b, g, .. } => Some(block_hessian(a, b, g)),
            EnergyKind::MaxNorm => None,
            EnergyKind::AllenCahn1D { m, h, well, .. } => {
                let mut k = stiffness(*m, *h);
                for i in 0..*m {
                    k[(i, i)] += h * well.second_derivative(u[i]);
                }
                Some(k)
            }
        }
    }

    /// The Frechet subdifferential `dE(t, u)`.
    pub fn subdiff(&self, t: f64, u: &Vector) -> Result<SubdiffSet> {
        check_dim("energy argument", self.dim(), u.len())?;
        Ok(match self.gradient_raw(t, u) {
            Some(g) => SubdiffSet::Singleton(g),
            None => max_norm_subdiff(u),
        })
    }

    /// Partial subdifferential with respect to one block of a block energy.
    pub fn partial_subdiff(&self, t: f64, y: &Vector, z: &Vector, block: Block) -> Result<SubdiffSet> {
        let (ny, nz) = self
            .block_sizes()
            .ok_or_else(|| Error::input("partial subdifferential needs a block energy"))?;
        check_dim("y block", ny, y.len())?;
        check_dim("z block", nz, z.len())?;
        let EnergyKind::QuadraticBlock { a, b, g, f_load, g_load } = &self.kind else {
            unreachable!()
        };
        Ok(SubdiffSet::Singleton(match block {
            Block::Y => a * y + b.transpose() * z - f_load.value(t),
            Block::Z => b * y + g * z - g_load.value(t),
        }))
    }

    /// Coordinates of a block, in state indexing.
    pub fn block_indices(&self, block: Block) -> Result<Vec<usize>> {
        let (ny, nz) = self
            .block_sizes()
            .ok_or_else(|| Error::input("block indices need a block energy"))?;
        Ok(match block {
            Block::Y => (0..ny).collect(),
            Block::Z => (ny..ny + nz).collect(),
        })
    }

    /// A constant `C` with `|d/dt E(t,u)| <= C E(t,u)` for all `t` in
    /// `[0, horizon]` and all `u`, derived from load bounds and the current
    /// shift. `None` when the shift is too small for such a bound.
    pub fn power_constant(&self, horizon: f64) -> Option<f64> {
        match &self.kind {
            EnergyKind::MaxNorm => Some(0.0),
            EnergyKind::QuadraticBlock { a, b, g, f_load, g_load } => {
                let p = f_load.derivative_bound().norm_squared() + g_load.derivative_bound().norm_squared();
                if p == 0.0 {
                    return Some(0.0);
                }
                let mu = block_hessian(a, b, g).symmetric_eigen().eigenvalues.min();
                let f = (f_load.value_bound(horizon).norm_squared() + g_load.value_bound(horizon).norm_squared()).sqrt();
                // E >= mu/2 |u|^2 - F |u| + s and |dE/dt| <= P |u|.
                let denom = (2.0 * mu * self.shift).sqrt() - f;
                (mu > 0.0 && self.shift > 0.0 && denom > 0.0).then(|| p.sqrt() / denom)
            }
            EnergyKind::AllenCahn1D { m, h, well, load } => {
                let pd = load.derivative_bound().max();
                if pd == 0.0 {
                    return Some(0.0);
                }
                let l = load.value_bound(horizon).max();
                let s = self.shift / (*m as f64 * h);
                // Per node: P|r| <= C (W(r) - L|r| + s); the gradient part is nonnegative.
                let ratio = |r: f64| {
                    let d = well.value(r) - l * r + s;
                    if d <= 0.0 {
                        f64::INFINITY
                    } else {
                        pd * r / d
                    }
                };
                let top = 4.0 * (1.0 + well.width.abs() + (l / well.depth).cbrt() + (s / well.depth).sqrt().sqrt());
                let n = 4000;
                let mut best = (0.0, 0.0);
                for i in 0..=n {
                    let r = top * i as f64 / n as f64;
                    let v = ratio(r);
                    if !v.is_finite() {
                        return None;
                    }
                    if v > best.0 {
                        best = (v, r);
                    }
                }
                let step = top / n as f64;
                let (_, v) = optim::maximize_scalar(ratio, (best.1 - step).max(0.0), best.1 + step);
                Some(v.max(best.0) * (1.0 + 1e-9))
            }
        }
    }
}

fn block_hessian(a: &Matrix, b: &Matrix, g: &Matrix) -> Matrix {
    let ny = a.nrows();
    let nz = g.nrows();
    let mut h = Matrix::zeros(ny + nz, ny + nz);
    h.view_mut((0, 0), (ny, ny)).copy_from(a);
    h.view_mut((ny, ny), (nz, nz)).copy_from(g);
    h.view_mut((ny, 0), (nz, ny)).copy_from(b);
    h.view_mut((0, ny), (ny, nz)).copy_from(&b.transpose());
    h
}

/// `(1/h) tridiag(-1, 2, -1)`, the Dirichlet stiffness matrix on `m` interior nodes.
pub fn stiffness(m: usize, h: f64) -> Matrix {
    let mut k = Matrix::zeros(m, m);
    for i in 0..m {
        k[(i, i)] = 2.0 / h;
        if i + 1 < m {
            k[(i, i + 1)] = -1.0 / h;
            k[(i + 1, i)] = -1.0 / h;
        }
    }
    k
}

/// Subdifferential of `max(|u1|, |u2|)`. At the origin this is the `l1`
/// unit ball, the dual ball of the max-norm.
fn max_norm_subdiff(u: &Vector) -> SubdiffSet {
    let (a, b) = (u[0].abs(), u[1].abs());
    let e1 = |s: f64| Vector::from_vec(vec![s, 0.0]);
    let e2 = |s: f64| Vector::from_vec(vec![0.0, s]);
    if a == 0.0 && b == 0.0 {
        SubdiffSet::Diamond { radius: 1.0, dim: 2 }
    } else if a > b {
        SubdiffSet::Singleton(e1(u[0].signum()))
    } else if b > a {
        SubdiffSet::Singleton(e2(u[1].signum()))
    } else {
        SubdiffSet::Segment(e1(u[0].signum()), e2(u[1].signum()))
    }
}
