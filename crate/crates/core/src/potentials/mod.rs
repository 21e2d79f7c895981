//! Dissipation potentials: evaluation, Fenchel conjugates, dual rate maps,
//! inf-convolution with optimal decomposition, and growth probes.

mod decompose;
mod probes;

pub use decompose::{inf_conv_decompose, Decomposition};
pub use probes::{psi_minorant, qye_probe, PsiMinorant, PsiSampling, QyeFit};

use crate::error::{check_dim, Error, Result};
use crate::{ExtReal, Matrix, Vector};

/// Relative tolerance used when an inf-convolution has to be evaluated
/// through a numerical decomposition.
pub(crate) const DECOMPOSE_TOL: f64 = 1e-12;

/// The supported dissipation potentials.
#[derive(Clone, Debug)]
pub enum PotentialKind {
    /// `R(v) = 1/2 <V v, v>` with `V` symmetric positive definite.
    Quadratic { matrix: Matrix, inverse: Matrix },
    /// `R(v) = (1/p) sum w_i |v_i|^p`, a weighted discrete `l^p` norm to the power p.
    PowerNorm { p: f64, weights: Vector },
    /// `R*(xi) = sum a_i xi_i^2 / 2`, so `R(v) = sum v_i^2 / (2 a_i)`.
    AnisotropicDualQuadratic { dual_weights: Vector },
    /// `R(v) = sum c_i (sigma |v_i| + rho/2 v_i^2)`.
    OneHomPlusQuad { sigma: f64, rho: f64, weights: Vector },
    /// `base` on the active coordinates, indicator of zero on the rest.
    BlockIndicator { base: Box<Potential>, active: Vec<usize> },
    /// `2 R(v/2)`, whose conjugate is `2 R*`.
    Rescaled { base: Box<Potential> },
    /// `min_{v1+v2=v} R1(v1) + R2(v2)`, whose conjugate is `R1* + R2*`.
    InfConvolution { left: Box<Potential>, right: Box<Potential> },
}

/// A dissipation potential on `R^dim`.
#[derive(Clone, Debug)]
pub struct Potential {
    kind: PotentialKind,
    dim: usize,
}

fn check_weights(name: &str, w: &Vector) -> Result<()> {
    if w.is_empty() {
        return Err(Error::config(format!("{name}: empty weight vector")));
    }
    if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::config(format!("{name}: weights must be positive and finite")));
    }
    Ok(())
}

impl Potential {
    pub fn quadratic(matrix: Matrix) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::config("quadratic potential needs a nonempty square matrix"));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * (1.0 + matrix.amax()) {
            return Err(Error::config("quadratic potential matrix is not symmetric"));
        }
        let chol = matrix
            .clone()
            .cholesky()
            .ok_or_else(|| Error::config("quadratic potential matrix is singular or not positive definite"))?;
        let inverse = chol.inverse();
        Ok(Potential {
            kind: PotentialKind::Quadratic { matrix, inverse },
            dim: n,
        })
    }

    pub fn power_norm(p: f64, weights: Vector) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::config(format!("power-norm exponent must satisfy p > 1, got {p}")));
        }
        check_weights("power norm", &weights)?;
        let dim = weights.len();
        Ok(Potential {
            kind: PotentialKind::PowerNorm { p, weights },
            dim,
        })
    }

    pub fn anisotropic_dual(dual_weights: Vector) -> Result<Self> {
        check_weights("anisotropic dual quadratic", &dual_weights)?;
        let dim = dual_weights.len();
        Ok(Potential {
            kind: PotentialKind::AnisotropicDualQuadratic { dual_weights },
            dim,
        })
    }

    pub fn one_hom_plus_quad(sigma: f64, rho: f64, weights: Vector) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::config(format!("yield threshold must be finite and >= 0, got {sigma}")));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::config(format!("viscosity must be positive, got {rho}")));
        }
        check_weights("one-homogeneous plus quadratic", &weights)?;
        let dim = weights.len();
        Ok(Potential {
            kind: PotentialKind::OneHomPlusQuad { sigma, rho, weights },
            dim,
        })
    }

    /// `base` acts on the coordinates listed in `active`; all other
    /// coordinates of `R^dim` are frozen at zero rate.
    pub fn block_indicator(base: Potential, active: Vec<usize>, dim: usize) -> Result<Self> {
        if base.dim != active.len() {
            return Err(Error::config("block indicator: base dimension differs from active block size"));
        }
        let mut seen = vec![false; dim];
        for &i in &active {
            if i >= dim || seen[i] {
                return Err(Error::config("block indicator: active indices must be distinct and in range"));
            }
            seen[i] = true;
        }
        Ok(Potential {
            kind: PotentialKind::BlockIndicator {
                base: Box::new(base),
                active,
            },
            dim,
        })
    }

    pub fn rescaled(base: Potential) -> Self {
        let dim = base.dim;
        Potential {
            kind: PotentialKind::Rescaled { base: Box::new(base) },
            dim,
        }
    }

    pub fn inf_convolution(left: Potential, right: Potential) -> Result<Self> {
        if left.dim != right.dim {
            return Err(Error::config("inf-convolution members have different dimensions"));
        }
        let dim = left.dim;
        Ok(Potential {
            kind: PotentialKind::InfConvolution {
                left: Box::new(left),
                right: Box::new(right),
            },
            dim,
        })
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Short human-readable name of the kind.
    pub fn label(&self) -> String {
        match &self.kind {
            PotentialKind::Quadratic { .. } => "quadratic".into(),
            PotentialKind::PowerNorm { p, .. } => format!("power-norm(p={p})"),
            PotentialKind::AnisotropicDualQuadratic { .. } => "anisotropic-dual-quadratic".into(),
            PotentialKind::OneHomPlusQuad { .. } => "one-hom-plus-quad".into(),
            PotentialKind::BlockIndicator { base, .. } => format!("block[{}]", base.label()),
            PotentialKind::Rescaled { base } => format!("rescaled[{}]", base.label()),
            PotentialKind::InfConvolution { left, right } => {
                format!("infconv[{}, {}]", left.label(), right.label())
            }
        }
    }

    /// `R(v)` in `[0, +inf]`.
    pub fn eval(&self, v: &Vector) -> Result<ExtReal> {
        check_dim("potential argument", self.dim, v.len())?;
        self.eval_raw(v)
    }

    pub(crate) fn eval_raw(&self, v: &Vector) -> Result<ExtReal> {
        Ok(match &self.kind {
            PotentialKind::Quadratic { matrix, .. } => ExtReal::Finite(0.5 * v.dot(&(matrix * v))),
            PotentialKind::PowerNorm { p, weights } => ExtReal::Finite(
                v.iter()
                    .zip(weights.iter())
                    .map(|(x, w)| w * x.abs().powf(*p))
                    .sum::<f64>()
                    / p,
            ),
            PotentialKind::AnisotropicDualQuadratic { dual_weights } => ExtReal::Finite(
                v.iter()
                    .zip(dual_weights.iter())
                    .map(|(x, a)| x * x / (2.0 * a))
                    .sum(),
            ),
            PotentialKind::OneHomPlusQuad { sigma, rho, weights } => ExtReal::Finite(
                v.iter()
                    .zip(weights.iter())
                    .map(|(x, c)| c * (sigma * x.abs() + 0.5 * rho * x * x))
                    .sum(),
            ),
            PotentialKind::BlockIndicator { base, active } => {
                if frozen_nonzero(v, active) {
                    ExtReal::PosInf
                } else {
                    base.eval_raw(&gather(v, active))?
                }
            }
            PotentialKind::Rescaled { base } => 2.0 * base.eval_raw(&(v * 0.5))?,
            PotentialKind::InfConvolution { left, right } => {
                if !domains_compatible(left, right, v) {
                    ExtReal::PosInf
                } else {
                    ExtReal::Finite(decompose::decompose_pair(left, right, v, DECOMPOSE_TOL)?.value)
                }
            }
        })
    }

    /// `R*(xi) = sup_v <xi, v> - R(v)`.
    pub fn conjugate(&self, xi: &Vector) -> Result<f64> {
        check_dim("conjugate argument", self.dim, xi.len())?;
        Ok(self.conjugate_raw(xi))
    }

    pub(crate) fn conjugate_raw(&self, xi: &Vector) -> f64 {
        match &self.kind {
            PotentialKind::Quadratic { inverse, .. } => 0.5 * xi.dot(&(inverse * xi)),
            PotentialKind::PowerNorm { p, weights } => {
                let q = dual_exponent(*p);
                xi.iter()
                    .zip(weights.iter())
                    .map(|(x, w)| w * (x.abs() / w).powf(q))
                    .sum::<f64>()
                    / q
            }
            PotentialKind::AnisotropicDualQuadratic { dual_weights } => xi
                .iter()
                .zip(dual_weights.iter())
                .map(|(x, a)| 0.5 * a * x * x)
                .sum(),
            PotentialKind::OneHomPlusQuad { sigma, rho, weights } => xi
                .iter()
                .zip(weights.iter())
                .map(|(x, c)| {
                    let e = (x.abs() / c - sigma).max(0.0);
                    c * e * e / (2.0 * rho)
                })
                .sum(),
            PotentialKind::BlockIndicator { base, active } => base.conjugate_raw(&gather(xi, active)),
            PotentialKind::Rescaled { base } => 2.0 * base.conjugate_raw(xi),
            PotentialKind::InfConvolution { left, right } => {
                left.conjugate_raw(xi) + right.conjugate_raw(xi)
            }
        }
    }

    /// An element of `dR*(xi)`: the rate selected by the force `xi`.
    pub fn dual_rate(&self, xi: &Vector) -> Result<Vector> {
        check_dim("dual rate argument", self.dim, xi.len())?;
        Ok(self.dual_rate_raw(xi))
    }

    pub(crate) fn dual_rate_raw(&self, xi: &Vector) -> Vector {
        match &self.kind {
            PotentialKind::Quadratic { inverse, .. } => inverse * xi,
            PotentialKind::PowerNorm { p, weights } => {
                let q = dual_exponent(*p);
                Vector::from_iterator(
                    self.dim,
                    xi.iter()
                        .zip(weights.iter())
                        .map(|(x, w)| x.signum() * (x.abs() / w).powf(q - 1.0)),
                )
            }
            PotentialKind::AnisotropicDualQuadratic { dual_weights } => xi.component_mul(dual_weights),
            PotentialKind::OneHomPlusQuad { sigma, rho, weights } => Vector::from_iterator(
                self.dim,
                xi.iter()
                    .zip(weights.iter())
                    .map(|(x, c)| x.signum() * (x.abs() / c - sigma).max(0.0) / rho),
            ),
            PotentialKind::BlockIndicator { base, active } => {
                scatter(&base.dual_rate_raw(&gather(xi, active)), active, self.dim)
            }
            PotentialKind::Rescaled { base } => base.dual_rate_raw(xi) * 2.0,
            PotentialKind::InfConvolution { left, right } => {
                left.dual_rate_raw(xi) + right.dual_rate_raw(xi)
            }
        }
    }

    /// Generalized Jacobian of the dual rate map (a Clarke element for the
    /// piecewise-smooth kinds).
    pub(crate) fn dual_rate_jacobian(&self, xi: &Vector) -> Matrix {
        match &self.kind {
            PotentialKind::Quadratic { inverse, .. } => inverse.clone(),
            PotentialKind::PowerNorm { p, weights } => {
                let q = dual_exponent(*p);
                Matrix::from_diagonal(&Vector::from_iterator(
                    self.dim,
                    xi.iter().zip(weights.iter()).map(|(x, w)| {
                        let r = (x.abs() / w).max(1e-12);
                        (q - 1.0) * r.powf(q - 2.0) / w
                    }),
                ))
            }
            PotentialKind::AnisotropicDualQuadratic { dual_weights } => Matrix::from_diagonal(dual_weights),
            PotentialKind::OneHomPlusQuad { sigma, rho, weights } => Matrix::from_diagonal(
                &Vector::from_iterator(
                    self.dim,
                    xi.iter().zip(weights.iter()).map(|(x, c)| {
                        if x.abs() / c > *sigma {
                            1.0 / (rho * c)
                        } else {
                            0.0
                        }
                    }),
                ),
            ),
            PotentialKind::BlockIndicator { base, active } => {
                let jb = base.dual_rate_jacobian(&gather(xi, active));
                let mut j = Matrix::zeros(self.dim, self.dim);
                for (a, &i) in active.iter().enumerate() {
                    for (b, &k) in active.iter().enumerate() {
                        j[(i, k)] = jb[(a, b)];
                    }
                }
                j
            }
            PotentialKind::Rescaled { base } => base.dual_rate_jacobian(xi) * 2.0,
            PotentialKind::InfConvolution { left, right } => {
                left.dual_rate_jacobian(xi) + right.dual_rate_jacobian(xi)
            }
        }
    }

    /// An element of `dR(v)`, when one is available without solving an
    /// optimization problem (or, for inf-convolutions, from the optimal
    /// decomposition). `None` where `R(v) = +inf`.
    pub fn primal_gradient(&self, v: &Vector) -> Result<Option<Vector>> {
        check_dim("potential argument", self.dim, v.len())?;
        self.primal_gradient_raw(v)
    }

    pub(crate) fn primal_gradient_raw(&self, v: &Vector) -> Result<Option<Vector>> {
        Ok(match &self.kind {
            PotentialKind::Quadratic { matrix, .. } => Some(matrix * v),
            PotentialKind::PowerNorm { p, weights } => Some(Vector::from_iterator(
                self.dim,
                v.iter()
                    .zip(weights.iter())
                    .map(|(x, w)| w * x.signum() * x.abs().powf(p - 1.0)),
            )),
            PotentialKind::AnisotropicDualQuadratic { dual_weights } => Some(v.component_div(dual_weights)),
            PotentialKind::OneHomPlusQuad { sigma, rho, weights } => Some(Vector::from_iterator(
                self.dim,
                v.iter().zip(weights.iter()).map(|(x, c)| {
                    let s = if *x == 0.0 { 0.0 } else { x.signum() };
                    c * (sigma * s + rho * x)
                }),
            )),
            PotentialKind::BlockIndicator { base, active } => {
                if frozen_nonzero(v, active) {
                    None
                } else {
                    base.primal_gradient_raw(&gather(v, active))?
                        .map(|g| scatter(&g, active, self.dim))
                }
            }
            PotentialKind::Rescaled { base } => base.primal_gradient_raw(&(v * 0.5))?,
            PotentialKind::InfConvolution { left, right } => {
                if !domains_compatible(left, right, v) {
                    None
                } else {
                    Some(decompose::decompose_pair(left, right, v, DECOMPOSE_TOL)?.force)
                }
            }
        })
    }

    /// Hessian of a primal-smooth potential.
    pub(crate) fn primal_hessian(&self, v: &Vector) -> Option<Matrix> {
        match &self.kind {
            PotentialKind::Quadratic { matrix, .. } => Some(matrix.clone()),
            PotentialKind::PowerNorm { p, weights } if *p >= 2.0 => Some(Matrix::from_diagonal(
                &Vector::from_iterator(
                    self.dim,
                    v.iter()
                        .zip(weights.iter())
                        .map(|(x, w)| (p - 1.0) * w * x.abs().powf(p - 2.0)),
                ),
            )),
            PotentialKind::AnisotropicDualQuadratic { dual_weights } => {
                Some(Matrix::from_diagonal(&dual_weights.map(|a| 1.0 / a)))
            }
            PotentialKind::Rescaled { base } => base.primal_hessian(&(v * 0.5)).map(|h| h * 0.5),
            PotentialKind::InfConvolution { .. } => self.as_quadratic(),
            _ => None,
        }
    }

    /// Whether `R` is twice differentiable with a locally bounded Hessian.
    pub fn is_primal_smooth(&self) -> bool {
        match &self.kind {
            PotentialKind::Quadratic { .. } | PotentialKind::AnisotropicDualQuadratic { .. } => true,
            PotentialKind::PowerNorm { p, .. } => *p >= 2.0,
            PotentialKind::OneHomPlusQuad { .. } | PotentialKind::BlockIndicator { .. } => false,
            PotentialKind::Rescaled { base } => base.is_primal_smooth(),
            PotentialKind::InfConvolution { .. } => self.as_quadratic().is_some(),
        }
    }

    /// Whether the dual rate map is locally Lipschitz, so that semismooth
    /// Newton on the dual rate formulation is well posed.
    pub fn has_lipschitz_dual_rate(&self) -> bool {
        match &self.kind {
            PotentialKind::Quadratic { .. }
            | PotentialKind::AnisotropicDualQuadratic { .. }
            | PotentialKind::OneHomPlusQuad { .. } => true,
            PotentialKind::PowerNorm { p, .. } => *p <= 2.0,
            PotentialKind::BlockIndicator { base, .. } | PotentialKind::Rescaled { base } => {
                base.has_lipschitz_dual_rate()
            }
            PotentialKind::InfConvolution { left, right } => {
                left.has_lipschitz_dual_rate() && right.has_lipschitz_dual_rate()
            }
        }
    }

    /// The matrix `M` with `R(v) = 1/2 <M v, v>`, when `R` is a quadratic form.
    pub fn as_quadratic(&self) -> Option<Matrix> {
        match &self.kind {
            PotentialKind::Quadratic { matrix, .. } => Some(matrix.clone()),
            PotentialKind::AnisotropicDualQuadratic { dual_weights } => {
                Some(Matrix::from_diagonal(&dual_weights.map(|a| 1.0 / a)))
            }
            PotentialKind::PowerNorm { p, weights } if *p == 2.0 => Some(Matrix::from_diagonal(weights)),
            PotentialKind::Rescaled { base } => base.as_quadratic().map(|m| m * 0.5),
            PotentialKind::InfConvolution { left, right } => {
                let m1 = left.as_quadratic()?;
                let m2 = right.as_quadratic()?;
                let inv = m1.try_inverse()? + m2.try_inverse()?;
                inv.try_inverse()
            }
            _ => None,
        }
    }

    /// The dual weights `alpha` with `R*(xi) = sum alpha_i xi_i^2 / 2`, when
    /// `R` is a diagonal quadratic form.
    pub fn as_diagonal_dual(&self) -> Option<Vector> {
        match &self.kind {
            PotentialKind::AnisotropicDualQuadratic { dual_weights } => Some(dual_weights.clone()),
            PotentialKind::Quadratic { matrix, .. } => {
                let n = matrix.nrows();
                for i in 0..n {
                    for j in 0..n {
                        if i != j && matrix[(i, j)] != 0.0 {
                            return None;
                        }
                    }
                }
                Some(matrix.diagonal().map(|d| 1.0 / d))
            }
            PotentialKind::PowerNorm { p, weights } if *p == 2.0 => Some(weights.map(|w| 1.0 / w)),
            PotentialKind::Rescaled { base } => base.as_diagonal_dual().map(|a| a * 2.0),
            PotentialKind::InfConvolution { left, right } => {
                Some(left.as_diagonal_dual()? + right.as_diagonal_dual()?)
            }
            _ => None,
        }
    }

    /// For block indicators (possibly rescaled): the potential acting on the
    /// active block and the active indices.
    pub fn active_restriction(&self) -> Option<(Potential, Vec<usize>)> {
        match &self.kind {
            PotentialKind::BlockIndicator { base, active } => Some(((**base).clone(), active.clone())),
            PotentialKind::Rescaled { base } => base
                .active_restriction()
                .map(|(b, a)| (Potential::rescaled(b), a)),
            _ => None,
        }
    }

    /// The two members of an inf-convolution.
    pub fn members(&self) -> Option<(&Potential, &Potential)> {
        match &self.kind {
            PotentialKind::InfConvolution { left, right } => Some((left, right)),
            _ => None,
        }
    }

    /// `R(v) + R*(xi) - <xi, v>`, nonnegative by the Fenchel-Young inequality
    /// and zero exactly when `xi` lies in `dR(v)`.
    pub fn fenchel_young_residual(&self, v: &Vector, xi: &Vector) -> Result<f64> {
        let r = self
            .eval(v)?
            .finite()
            .ok_or_else(|| Error::input("fenchel-young residual needs a finite potential value"))?;
        Ok(r + self.conjugate(xi)? - xi.dot(v))
    }

    /// `sup_v <xi, v> - R(v)` computed numerically by accelerated gradient
    /// ascent; used to cross-check the closed forms.
    pub fn conjugate_numeric(&self, xi: &Vector, tol: f64) -> Result<f64> {
        check_dim("conjugate argument", self.dim, xi.len())?;
        if !self.is_primal_smooth() {
            return Err(Error::input("numerical conjugation needs a primal-smooth potential"));
        }
        let (_, val) = crate::optim::maximize_accelerated(
            Vector::zeros(self.dim),
            |v| xi.dot(v) - self.eval_raw(v).map(|e| e.value()).unwrap_or(f64::INFINITY),
            |v| xi - self.primal_gradient_raw(v).ok().flatten().unwrap_or_else(|| Vector::zeros(self.dim)),
            tol,
            200_000,
        )?;
        Ok(val)
    }

    /// `sup_xi <xi, v> - R*(xi)`, computed numerically from the conjugate and
    /// the dual rate map.
    pub fn biconjugate(&self, v: &Vector, tol: f64) -> Result<f64> {
        check_dim("potential argument", self.dim, v.len())?;
        let (_, val) = crate::optim::maximize_accelerated(
            Vector::zeros(self.dim),
            |xi| xi.dot(v) - self.conjugate_raw(xi),
            |xi| v - self.dual_rate_raw(xi),
            tol,
            200_000,
        )?;
        Ok(val)
    }
}

pub(crate) fn dual_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

pub(crate) fn gather(v: &Vector, idx: &[usize]) -> Vector {
    Vector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

pub(crate) fn scatter(v: &Vector, idx: &[usize], dim: usize) -> Vector {
    let mut out = Vector::zeros(dim);
    for (a, &i) in idx.iter().enumerate() {
        out[i] = v[a];
    }
    out
}

fn frozen_nonzero(v: &Vector, active: &[usize]) -> bool {
    let mut is_active = vec![false; v.len()];
    for &i in active {
        is_active[i] = true;
    }
    v.iter().zip(is_active).any(|(x, a)| !a && *x != 0.0)
}

/// Coordinates on which a potential is finite-valued (all of them unless it
/// is a block indicator).
fn free_coordinates(p: &Potential) -> Vec<bool> {
    match &p.kind {
        PotentialKind::BlockIndicator { active, .. } => {
            let mut mask = vec![false; p.dim];
            for &i in active {
                mask[i] = true;
            }
            mask
        }
        PotentialKind::Rescaled { base } => free_coordinates(base),
        PotentialKind::InfConvolution { left, right } => free_coordinates(left)
            .into_iter()
            .zip(free_coordinates(right))
            .map(|(a, b)| a || b)
            .collect(),
        _ => vec![true; p.dim],
    }
}

fn domains_compatible(left: &Potential, right: &Potential, v: &Vector) -> bool {
    let l = free_coordinates(left);
    let r = free_coordinates(right);
    v.iter().enumerate().all(|(i, x)| *x == 0.0 || l[i] || r[i])
}
