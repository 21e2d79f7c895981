//! Small dense optimization routines used by the potentials and solvers.

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

#[derive(Clone, Debug)]
pub(crate) struct Outcome {
    pub x: Vector,
    pub iterations: usize,
    pub residual: f64,
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-16;

fn regularized_cholesky(h: &Matrix, mut mu: f64) -> (nalgebra::Cholesky<f64, nalgebra::Dyn>, f64) {
    let n = h.nrows();
    let scale = 1.0 + h.amax();
    loop {
        let shifted = if mu > 0.0 {
            h + Matrix::identity(n, n) * mu
        } else {
            h.clone()
        };
        if let Some(c) = shifted.cholesky() {
            return (c, mu);
        }
        mu = if mu == 0.0 { 1e-10 * scale } else { mu * 10.0 };
    }
}

/// Damped Newton with Armijo backtracking for a convex (or locally convex)
/// smooth function. Stops when the gradient norm is at most `tol`.
pub(crate) fn minimize_newton(
    x0: Vector,
    value: impl Fn(&Vector) -> f64,
    grad: impl Fn(&Vector) -> Vector,
    hess: impl Fn(&Vector) -> Matrix,
    tol: f64,
    max_iter: usize,
) -> Result<Outcome> {
    minimize_newton_until(x0, value, grad, hess, |_, r| r <= tol, max_iter)
}

/// Damped Newton with a caller-supplied stopping rule `stop(x, |grad|)`.
pub(crate) fn minimize_newton_until(
    x0: Vector,
    value: impl Fn(&Vector) -> f64,
    grad: impl Fn(&Vector) -> Vector,
    hess: impl Fn(&Vector) -> Matrix,
    stop: impl Fn(&Vector, f64) -> bool,
    max_iter: usize,
) -> Result<Outcome> {
    let mut x = x0;
    let mut g = grad(&x);
    let mut r = g.norm();
    for it in 0..max_iter {
        if stop(&x, r) {
            return Ok(Outcome {
                x,
                iterations: it,
                residual: r,
            });
        }
        let h = hess(&x);
        let f0 = value(&x);
        let mut mu = 0.0;
        let mut accepted = false;
        for _attempt in 0..8 {
            let (chol, used) = regularized_cholesky(&h, mu);
            let d = -chol.solve(&g);
            let slope = g.dot(&d);
            // Predicted decrease below the resolution of f: judge by the gradient.
            if -slope <= 1e-13 * (1.0 + f0.abs()) {
                let xn = &x + &d;
                if grad(&xn).norm() < r {
                    x = xn;
                    accepted = true;
                    break;
                }
            }
            let mut s = 1.0;
            while s >= MIN_STEP {
                let xn = &x + &d * s;
                let fnew = value(&xn);
                if fnew <= f0 + ARMIJO * s * slope {
                    x = xn;
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            if accepted {
                break;
            }
            // Roundoff floor: the full step still shrinks the gradient.
            let xn = &x + &d;
            let gn = grad(&xn);
            if gn.norm() < r {
                x = xn;
                accepted = true;
                break;
            }
            mu = if used == 0.0 { 1e-8 * (1.0 + h.amax()) } else { used * 100.0 };
        }
        if !accepted {
            return Err(Error::numerical("newton line search stalled", r, it));
        }
        g = grad(&x);
        r = g.norm();
    }
    if stop(&x, r) {
        return Ok(Outcome {
            x,
            iterations: max_iter,
            residual: r,
        });
    }
    Err(Error::numerical("newton iteration limit reached", r, max_iter))
}

/// Semismooth Newton for `F(x) = 0` with merit `|F|`, using the supplied
/// generalized Jacobian. A full step is taken when backtracking fails so that
/// piecewise-linear systems still terminate.
pub(crate) fn solve_root(
    x0: Vector,
    residual: impl Fn(&Vector) -> Vector,
    jacobian: impl Fn(&Vector) -> Matrix,
    tol: f64,
    max_iter: usize,
) -> Result<Outcome> {
    let mut x = x0;
    let mut f = residual(&x);
    let mut r = f.norm();
    let n = x.len();
    for it in 0..max_iter {
        if r <= tol {
            return Ok(Outcome {
                x,
                iterations: it,
                residual: r,
            });
        }
        let j = jacobian(&x);
        let d = match j.clone().lu().solve(&(-&f)) {
            Some(d) if d.iter().all(|v| v.is_finite()) => d,
            _ => {
                let reg = &j + Matrix::identity(n, n) * (1e-8 * (1.0 + j.amax()));
                reg.lu()
                    .solve(&(-&f))
                    .ok_or_else(|| Error::numerical("singular generalized jacobian", r, it))?
            }
        };
        let mut s = 1.0;
        let mut next = None;
        while s >= 1e-12 {
            let xn = &x + &d * s;
            let fnew = residual(&xn);
            let rn = fnew.norm();
            if rn <= (1.0 - ARMIJO * s) * r {
                next = Some((xn, fnew, rn));
                break;
            }
            s *= 0.5;
        }
        let (xn, fnew, rn) = match next {
            Some(t) => t,
            None => {
                let xn = &x + &d;
                let fnew = residual(&xn);
                let rn = fnew.norm();
                (xn, fnew, rn)
            }
        };
        x = xn;
        f = fnew;
        r = rn;
    }
    if r <= tol {
        return Ok(Outcome {
            x,
            iterations: max_iter,
            residual: r,
        });
    }
    Err(Error::numerical("semismooth newton iteration limit reached", r, max_iter))
}

/// Accelerated gradient ascent with backtracking and adaptive restart for a
/// concave function. Stops when the gradient norm is at most `tol`; on
/// failure the error carries the gradient norm at the best iterate.
pub(crate) fn maximize_accelerated(
    x0: Vector,
    value: impl Fn(&Vector) -> f64,
    grad: impl Fn(&Vector) -> Vector,
    tol: f64,
    max_iter: usize,
) -> Result<(Vector, f64)> {
    let mut x = x0.clone();
    let mut y = x0;
    let mut t = 1.0_f64;
    let mut lip = 1.0_f64;
    let mut fx = value(&x);
    let mut best = (x.clone(), fx, f64::INFINITY);
    for it in 0..max_iter {
        let gy = grad(&y);
        let gn = gy.norm();
        let gx_norm = grad(&x).norm();
        if gx_norm < best.2 {
            best = (x.clone(), fx, gx_norm);
        }
        if gx_norm <= tol {
            return Ok((x, fx));
        }
        let fy = value(&y);
        // Backtracking on the quadratic lower model of the concave function.
        let mut xn;
        loop {
            xn = &y + &gy * (1.0 / lip);
            let fxn = value(&xn);
            if fxn >= fy + gn * gn / (2.0 * lip) - 1e-15 * (1.0 + fy.abs()) {
                break;
            }
            lip *= 2.0;
            if lip > 1e30 {
                return Err(Error::numerical(
                    "accelerated ascent curvature estimate diverged",
                    best.2,
                    it,
                ));
            }
        }
        let fxn = value(&xn);
        if fxn < fx {
            // Restart momentum.
            t = 1.0;
            y = x.clone();
            lip *= 2.0;
            continue;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &xn + (&xn - &x) * ((t - 1.0) / tn);
        x = xn;
        fx = fxn;
        t = tn;
        lip = (lip * 0.9).max(1e-12);
    }
    let gx_norm = grad(&x).norm();
    if gx_norm <= tol {
        return Ok((x, fx));
    }
    Err(Error::numerical(
        "accelerated ascent iteration limit reached",
        best.2.min(gx_norm),
        max_iter,
    ))
}

/// Golden-section maximization of a concave scalar function on `[lo, hi]`.
pub(crate) fn maximize_scalar(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}
