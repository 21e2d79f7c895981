use super::{free_coordinates, gather, scatter, Potential};
use crate::error::{check_dim, Error, Result};
use crate::optim;
use crate::{Matrix, Vector};

/// An optimal splitting `v = v1 + v2` for an inf-convolution.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub v1: Vector,
    pub v2: Vector,
    /// `R1(v1) + R2(v2)`.
    pub value: f64,
    /// The common force `xi` with `v1 in dR1*(xi)` and `v2 in dR2*(xi)`.
    pub force: Vector,
    /// `value - (<xi, v> - R1*(xi) - R2*(xi))`, an upper bound for the
    /// suboptimality of `value`.
    pub duality_gap: f64,
    pub iterations: usize,
}

/// Optimal decomposition of `v` for the inf-convolution `p`.
pub fn inf_conv_decompose(p: &Potential, v: &Vector, tol: f64) -> Result<Decomposition> {
    check_dim("decomposition argument", p.dim(), v.len())?;
    if !(tol > 0.0) {
        return Err(Error::input("decomposition tolerance must be positive"));
    }
    let (left, right) = p
        .members()
        .ok_or_else(|| Error::input("inf_conv_decompose needs an inf-convolution potential"))?;
    decompose_pair(left, right, v, tol)
}

fn finish(
    left: &Potential,
    right: &Potential,
    v: &Vector,
    mut v1: Vector,
    force: Vector,
    iterations: usize,
) -> Result<Decomposition> {
    // Snap coordinates that one member cannot carry.
    let free1 = free_coordinates(left);
    let free2 = free_coordinates(right);
    for i in 0..v.len() {
        if !free2[i] {
            v1[i] = v[i];
        } else if !free1[i] {
            v1[i] = 0.0;
        }
    }
    let v2 = v - &v1;
    let value = (left.eval_raw(&v1)? + right.eval_raw(&v2)?).value();
    let dual = force.dot(v) - left.conjugate_raw(&force) - right.conjugate_raw(&force);
    Ok(Decomposition {
        v1,
        v2,
        value,
        duality_gap: value - dual,
        force,
        iterations,
    })
}

pub(crate) fn decompose_pair(
    left: &Potential,
    right: &Potential,
    v: &Vector,
    tol: f64,
) -> Result<Decomposition> {
    let n = v.len();
    if v.iter().all(|x| *x == 0.0) {
        return finish(left, right, v, Vector::zeros(n), Vector::zeros(n), 0);
    }

    // Complementary blocks: the inf-convolution is separable.
    if let (Some((b1, a1)), Some((b2, a2))) = (left.active_restriction(), right.active_restriction()) {
        let mut owner = vec![0u8; n];
        for &i in &a1 {
            owner[i] |= 1;
        }
        for &i in &a2 {
            owner[i] |= 2;
        }
        if owner.iter().all(|&o| o == 1 || o == 2) {
            let p1 = gather(v, &a1);
            let p2 = gather(v, &a2);
            let g1 = b1.primal_gradient_raw(&p1)?.unwrap_or_else(|| Vector::zeros(a1.len()));
            let g2 = b2.primal_gradient_raw(&p2)?.unwrap_or_else(|| Vector::zeros(a2.len()));
            let force = scatter(&g1, &a1, n) + scatter(&g2, &a2, n);
            return finish(left, right, v, scatter(&p1, &a1, n), force, 0);
        }
    }

    // Two quadratic forms: v1 = (M1 + M2)^{-1} M2 v.
    if let (Some(m1), Some(m2)) = (left.as_quadratic(), right.as_quadratic()) {
        let sum = &m1 + &m2;
        let chol = sum
            .cholesky()
            .ok_or_else(|| Error::numerical("quadratic decomposition: singular sum", f64::NAN, 0))?;
        let v1 = chol.solve(&(&m2 * v));
        let force = &m1 * &v1;
        return finish(left, right, v, v1, force, 0);
    }

    if left.is_primal_smooth() && right.is_primal_smooth() {
        let g1 = left.primal_gradient_raw(v)?.unwrap_or_else(|| Vector::zeros(n));
        let g2 = right.primal_gradient_raw(v)?.unwrap_or_else(|| Vector::zeros(n));
        let scale = 1.0 + g1.norm() + g2.norm();
        let out = optim::minimize_newton(
            v * 0.5,
            |x| {
                left.eval_raw(x).map(|e| e.value()).unwrap_or(f64::INFINITY)
                    + right.eval_raw(&(v - x)).map(|e| e.value()).unwrap_or(f64::INFINITY)
            },
            |x| {
                let a = left.primal_gradient_raw(x).ok().flatten().unwrap_or_else(|| Vector::zeros(n));
                let b = right
                    .primal_gradient_raw(&(v - x))
                    .ok()
                    .flatten()
                    .unwrap_or_else(|| Vector::zeros(n));
                a - b
            },
            |x| {
                let a = left.primal_hessian(x).unwrap_or_else(|| Matrix::zeros(n, n));
                let b = right.primal_hessian(&(v - x)).unwrap_or_else(|| Matrix::zeros(n, n));
                a + b
            },
            tol * scale,
            200,
        )
        .map_err(|e| with_context(e, "primal decomposition"))?;
        let force = left
            .primal_gradient_raw(&out.x)?
            .unwrap_or_else(|| Vector::zeros(n));
        return finish(left, right, v, out.x, force, out.iterations);
    }

    // Dual route: maximize <xi, v> - R1*(xi) - R2*(xi). Stops on a small
    // gradient or on a small duality gap of the snapped primal candidate.
    let gtol = tol * (1.0 + v.norm());
    let out = optim::minimize_newton_until(
        Vector::zeros(n),
        |xi| left.conjugate_raw(xi) + right.conjugate_raw(xi) - xi.dot(v),
        |xi| left.dual_rate_raw(xi) + right.dual_rate_raw(xi) - v,
        |xi| {
            let j = left.dual_rate_jacobian(xi) + right.dual_rate_jacobian(xi);
            (&j + j.transpose()) * 0.5
        },
        |xi, r| {
            r <= gtol
                || finish(left, right, v, left.dual_rate_raw(xi), xi.clone(), 0)
                    .map(|d| d.value.is_finite() && d.duality_gap.abs() <= tol * (1.0 + d.value.abs()))
                    .unwrap_or(false)
        },
        500,
    )
    .map_err(|e| with_context(e, "dual decomposition"))?;
    let v1 = left.dual_rate_raw(&out.x);
    finish(left, right, v, v1, out.x, out.iterations)
}

fn with_context(e: Error, what: &str) -> Error {
    match e {
        Error::Numerical {
            message,
            residual,
            iterations,
        } => Error::Numerical {
            message: format!("{what}: {message}; optimality residual is the duality-gap estimate"),
            residual,
            iterations,
        },
        other => other,
    }
}
