use crate::energies::{Energy, EnergyKind};
use crate::error::{check_dim, Error, Result};
use crate::optim;
use crate::potentials::gather;
use crate::{Matrix, Potential, Vector};

/// Result of one incremental minimization.
#[derive(Clone, Debug)]
pub struct ProxOutcome {
    pub u: Vector,
    /// The Euler-Lagrange force, an element of `dE(t, u)`.
    pub xi: Vector,
    pub iterations: usize,
    pub residual: f64,
    /// Closed-form solution, no tolerance involved.
    pub exact: bool,
}

/// One minimizing-movement step:
/// `u in Argmin { h R((u - anchor)/h) + E(t, u) }`.
pub fn prox_step(e: &Energy, r: &Potential, t: f64, anchor: &Vector, h: f64, tol: f64) -> Result<ProxOutcome> {
    check_dim("prox anchor", e.dim(), anchor.len())?;
    check_dim("prox potential", e.dim(), r.dim())?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::input(format!("prox step size must be positive, got {h}")));
    }
    if !(tol > 0.0) {
        return Err(Error::input("prox tolerance must be positive"));
    }
    if matches!(e.kind(), EnergyKind::MaxNorm) {
        let alpha = r
            .as_diagonal_dual()
            .ok_or_else(|| Error::input("the max-norm energy needs a diagonal quadratic dissipation"))?;
        let (u, xi) = max_norm_prox(anchor, &alpha, h);
        return Ok(ProxOutcome {
            u,
            xi,
            iterations: 0,
            residual: 0.0,
            exact: true,
        });
    }
    let (pot, free) = match r.active_restriction() {
        Some((base, active)) => (base, Some(active)),
        None => (r.clone(), None),
    };
    let obj = Restricted {
        e,
        t,
        anchor,
        free: free.as_deref(),
    };
    let a = obj.reduce(anchor);
    let gtol = tol * (1.0 + anchor.norm());
    let out = if pot.is_primal_smooth() {
        newton_route(&obj, &pot, &a, h, gtol)
    } else if let Some((p1, p2)) = pot.members().filter(|(p1, p2)| p1.is_primal_smooth() && p2.is_primal_smooth()) {
        joint_route(&obj, p1, p2, &a, h, gtol)
    } else {
        root_route(&obj, &pot, &a, h, gtol)
    }
    .map_err(|err| match err {
        Error::Numerical {
            message,
            residual,
            iterations,
        } => Error::Numerical {
            message: format!("prox step at t = {t}: {message}"),
            residual,
            iterations,
        },
        other => other,
    })?;
    let u = obj.full(&out.x);
    let xi = e
        .gradient_raw(t, &u)
        .ok_or_else(|| Error::input("prox force needs a smooth energy"))?;
    Ok(ProxOutcome {
        u,
        xi,
        iterations: out.iterations,
        residual: out.residual,
        exact: false,
    })
}

/// The energy as a function of the free coordinates, the others pinned at the anchor.
struct Restricted<'a> {
    e: &'a Energy,
    t: f64,
    anchor: &'a Vector,
    free: Option<&'a [usize]>,
}

impl Restricted<'_> {
    fn reduce(&self, v: &Vector) -> Vector {
        match self.free {
            Some(idx) => gather(v, idx),
            None => v.clone(),
        }
    }

    fn full(&self, x: &Vector) -> Vector {
        match self.free {
            Some(idx) => {
                let mut u = self.anchor.clone();
                for (a, &i) in idx.iter().enumerate() {
                    u[i] = x[a];
                }
                u
            }
            None => x.clone(),
        }
    }

    fn value(&self, x: &Vector) -> f64 {
        self.e.eval_raw(self.t, &self.full(x))
    }

    fn grad(&self, x: &Vector) -> Vector {
        let g = self.e.gradient_raw(self.t, &self.full(x)).expect("smooth energy");
        self.reduce(&g)
    }

    fn hess(&self, x: &Vector) -> Matrix {
        let h = self.e.hessian(&self.full(x)).expect("smooth energy");
        match self.free {
            Some(idx) => Matrix::from_fn(idx.len(), idx.len(), |i, j| h[(idx[i], idx[j])]),
            None => h,
        }
    }
}

fn newton_route(obj: &Restricted, r: &Potential, a: &Vector, h: f64, gtol: f64) -> Result<optim::Outcome> {
    let n = a.len();
    optim::minimize_newton(
        a.clone(),
        |x| {
            let v = (x - a) / h;
            h * r.eval_raw(&v).map(|e| e.value()).unwrap_or(f64::INFINITY) + obj.value(x)
        },
        |x| {
            let v = (x - a) / h;
            r.primal_gradient_raw(&v).ok().flatten().unwrap_or_else(|| Vector::zeros(n)) + obj.grad(x)
        },
        |x| {
            let v = (x - a) / h;
            r.primal_hessian(&v).unwrap_or_else(|| Matrix::zeros(n, n)) / h + obj.hess(x)
        },
        gtol,
        200,
    )
}

/// Minimizes over `(u, w)` the function `h R1(w/h) + h R2((u - a - w)/h) + E(u)`.
fn joint_route(
    obj: &Restricted,
    p1: &Potential,
    p2: &Potential,
    a: &Vector,
    h: f64,
    gtol: f64,
) -> Result<optim::Outcome> {
    let n = a.len();
    let split = |z: &Vector| {
        let u = z.rows(0, n).into_owned();
        let w = z.rows(n, n).into_owned();
        let v2 = (&u - a - &w) / h;
        (u, w / h, v2)
    };
    let grad_of = |p: &Potential, v: &Vector| p.primal_gradient_raw(v).ok().flatten().unwrap_or_else(|| Vector::zeros(n));
    let mut z0 = Vector::zeros(2 * n);
    z0.rows_mut(0, n).copy_from(a);
    let out = optim::minimize_newton(
        z0,
        |z| {
            let (u, v1, v2) = split(z);
            h * (p1.eval_raw(&v1).map(|e| e.value()).unwrap_or(f64::INFINITY)
                + p2.eval_raw(&v2).map(|e| e.value()).unwrap_or(f64::INFINITY))
                + obj.value(&u)
        },
        |z| {
            let (u, v1, v2) = split(z);
            let g2 = grad_of(p2, &v2);
            let mut g = Vector::zeros(2 * n);
            g.rows_mut(0, n).copy_from(&(&g2 + obj.grad(&u)));
            g.rows_mut(n, n).copy_from(&(grad_of(p1, &v1) - &g2));
            g
        },
        |z| {
            let (u, v1, v2) = split(z);
            let h1 = p1.primal_hessian(&v1).unwrap_or_else(|| Matrix::zeros(n, n)) / h;
            let h2 = p2.primal_hessian(&v2).unwrap_or_else(|| Matrix::zeros(n, n)) / h;
            let mut m = Matrix::zeros(2 * n, 2 * n);
            m.view_mut((0, 0), (n, n)).copy_from(&(&h2 + obj.hess(&u)));
            m.view_mut((0, n), (n, n)).copy_from(&(-&h2));
            m.view_mut((n, 0), (n, n)).copy_from(&(-&h2));
            m.view_mut((n, n), (n, n)).copy_from(&(h1 + &h2));
            m
        },
        gtol,
        200,
    )?;
    Ok(optim::Outcome {
        x: out.x.rows(0, n).into_owned(),
        iterations: out.iterations,
        residual: out.residual,
    })
}

/// Semismooth Newton on `x - a - h dR*(-dE(x)) = 0`.
fn root_route(obj: &Restricted, r: &Potential, a: &Vector, h: f64, gtol: f64) -> Result<optim::Outcome> {
    let n = a.len();
    optim::solve_root(
        a.clone(),
        |x| x - a - r.dual_rate_raw(&(-obj.grad(x))) * h,
        |x| {
            let jd = r.dual_rate_jacobian(&(-obj.grad(x)));
            Matrix::identity(n, n) + jd * obj.hess(x) * h
        },
        gtol,
        200,
    )
}

/// Exact minimizer of `sum (u_i - a_i)^2 / (2 h alpha_i) + max(|u_1|, |u_2|)`
/// and the force `(a - u) / (h alpha)`.
pub(crate) fn max_norm_prox(a: &Vector, alpha: &Vector, h: f64) -> (Vector, Vector) {
    let phi = |u: &Vector| {
        (0..2).map(|i| (u[i] - a[i]).powi(2) / (2.0 * h * alpha[i])).sum::<f64>() + u[0].abs().max(u[1].abs())
    };
    let mut candidates = vec![Vector::zeros(2)];
    for i in 0..2 {
        for s in [1.0, -1.0] {
            let mut u = a.clone();
            u[i] -= h * alpha[i] * s;
            candidates.push(u);
        }
    }
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            let r = ((s1 * a[0] / alpha[0] + s2 * a[1] / alpha[1]) - h) / (1.0 / alpha[0] + 1.0 / alpha[1]);
            let r = r.max(0.0);
            candidates.push(Vector::from_vec(vec![s1 * r, s2 * r]));
        }
    }
    let mut best = candidates[0].clone();
    let mut best_val = phi(&best);
    for c in candidates.into_iter().skip(1) {
        let v = phi(&c);
        if v < best_val {
            best_val = v;
            best = c;
        }
    }
    let xi = (a - &best).component_div(&(alpha * h));
    (best, xi)
}

