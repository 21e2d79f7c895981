use serde::Serialize;

use crate::partitions::Mechanism;
use crate::Vector;

/// One affine piece `u(t) = u0 + (t - t0) velocity` of an exactly solved
/// trajectory, with the constant force `xi` selected on it.
#[derive(Clone, Debug, Serialize)]
pub struct PathSegment {
    pub t0: f64,
    pub t1: f64,
    pub u0: Vector,
    pub velocity: Vector,
    pub xi: Vector,
    /// Active mechanism; `None` for the effective dissipation.
    pub mechanism: Option<Mechanism>,
}

impl PathSegment {
    pub fn state(&self, t: f64) -> Vector {
        &self.u0 + &self.velocity * (t - self.t0)
    }

    pub fn end_state(&self) -> Vector {
        self.state(self.t1)
    }

    pub fn len(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn is_empty(&self) -> bool {
        self.t1 <= self.t0
    }
}

/// State of a piecewise-affine path at `t` (clamped to its time range).
pub fn path_state(segments: &[PathSegment], t: f64) -> Option<Vector> {
    let first = segments.first()?;
    if t <= first.t0 {
        return Some(first.u0.clone());
    }
    for s in segments {
        if t <= s.t1 {
            return Some(s.state(t));
        }
    }
    segments.last().map(|s| s.end_state())
}

/// The segment covering an interior time `t`.
pub fn path_segment_at(segments: &[PathSegment], t: f64) -> Option<&PathSegment> {
    segments
        .iter()
        .find(|s| s.t0 <= t && t < s.t1)
        .or_else(|| segments.last().filter(|s| t >= s.t1))
}

const SNAP: f64 = 1e-12;

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Exact flow of `dR*(-xi) = u'`, `xi in d|u|_inf`, for `R*(xi) = sum alpha_i xi_i^2 / 2`
/// in two dimensions, on `[t0, t1]`.
///
/// The state moves along the dominant axis until both coordinates have equal
/// modulus, then along the diagonal with the force weighted `alpha_2 : alpha_1`,
/// and rests at the origin. Returns `None` when the state cannot be classified.
pub(crate) fn regime_path(
    alpha: &Vector,
    u_init: &Vector,
    t0: f64,
    t1: f64,
    mechanism: Option<Mechanism>,
) -> Option<Vec<PathSegment>> {
    regime_path_mean(std::slice::from_ref(alpha), u_init, t0, t1, mechanism)
}

/// Like `regime_path`, but moving with the mean of the regime velocities of
/// several dual weights (the averaged limit of alternating mechanisms). The
/// recorded force is the mean force.
pub fn regime_path_mean(
    alphas: &[Vector],
    u_init: &Vector,
    t0: f64,
    t1: f64,
    mechanism: Option<Mechanism>,
) -> Option<Vec<PathSegment>> {
    if alphas.is_empty()
        || u_init.len() != 2
        || !u_init.iter().all(|x| x.is_finite())
        || !alphas
            .iter()
            .all(|a| a.len() == 2 && a.iter().all(|x| *x > 0.0 && x.is_finite()))
        || !(t0 < t1)
    {
        return None;
    }
    let count = alphas.len() as f64;
    let mean = |f: &dyn Fn(&Vector) -> f64| alphas.iter().map(f).sum::<f64>() / count;
    let scale = 1.0 + u_init.amax();
    let mut segments = Vec::new();
    let mut t = t0;
    let mut u = u_init.clone();
    let seg = |t0: f64, t1: f64, u0: &Vector, velocity: Vector, xi: Vector| PathSegment {
        t0,
        t1,
        u0: u0.clone(),
        velocity,
        xi,
        mechanism,
    };
    for _ in 0..4 {
        if t >= t1 {
            break;
        }
        let (m1, m2) = (u[0].abs(), u[1].abs());
        if m1.max(m2) <= SNAP * scale {
            u = Vector::zeros(2);
            segments.push(seg(t, t1, &u, Vector::zeros(2), Vector::zeros(2)));
            t = t1;
            break;
        }
        let s = [sign(u[0]), sign(u[1])];
        if (m1 - m2).abs() <= SNAP * scale {
            let r = 0.5 * (m1 + m2);
            u = Vector::from_vec(vec![s[0] * r, s[1] * r]);
            let speed = mean(&|a| a[0] * a[1] / (a[0] + a[1]));
            let xi = Vector::from_vec(vec![
                s[0] * mean(&|a| a[1] / (a[0] + a[1])),
                s[1] * mean(&|a| a[0] / (a[0] + a[1])),
            ]);
            let velocity = Vector::from_vec(vec![-s[0] * speed, -s[1] * speed]);
            let hit = t + r / speed;
            let end = hit.min(t1);
            segments.push(seg(t, end, &u, velocity.clone(), xi));
            u = if hit <= t1 { Vector::zeros(2) } else { &u + velocity * (end - t) };
            t = end;
        } else {
            let i = if m1 > m2 { 0 } else { 1 };
            let j = 1 - i;
            let mut xi = Vector::zeros(2);
            xi[i] = s[i];
            let mut velocity = Vector::zeros(2);
            let rate = mean(&|a| a[i]);
            velocity[i] = -rate * s[i];
            let hit = t + (u[i].abs() - u[j].abs()) / rate;
            let end = hit.min(t1);
            segments.push(seg(t, end, &u, velocity.clone(), xi));
            if hit <= t1 {
                u[i] = s[i] * u[j].abs();
            } else {
                u = &u + velocity * (end - t);
            }
            t = end;
        }
    }
    if t < t1 {
        return None;
    }
    Some(segments)
}
