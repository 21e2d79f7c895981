use serde::Serialize;

use crate::Vector;

/// A closed convex set of forces, described geometrically.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SubdiffSet {
    Singleton(Vector),
    /// All `(1 - theta) a + theta b` with `theta` in `[0, 1]`.
    Segment(Vector, Vector),
    /// Coordinate box `lower <= xi <= upper`.
    Box { lower: Vector, upper: Vector },
    /// The `l1` ball `sum |xi_i| <= radius`.
    Diamond { radius: f64, dim: usize },
}

impl SubdiffSet {
    pub fn dim(&self) -> usize {
        match self {
            SubdiffSet::Singleton(x) => x.len(),
            SubdiffSet::Segment(a, _) => a.len(),
            SubdiffSet::Box { lower, .. } => lower.len(),
            SubdiffSet::Diamond { dim, .. } => *dim,
        }
    }

    pub fn contains(&self, xi: &Vector, tol: f64) -> bool {
        if xi.len() != self.dim() {
            return false;
        }
        (xi - self.project(xi)).norm() <= tol
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, xi: &Vector) -> Vector {
        match self {
            SubdiffSet::Singleton(x) => x.clone(),
            SubdiffSet::Segment(a, b) => {
                let d = b - a;
                let len2 = d.norm_squared();
                if len2 == 0.0 {
                    return a.clone();
                }
                let th = ((xi - a).dot(&d) / len2).clamp(0.0, 1.0);
                a + d * th
            }
            SubdiffSet::Box { lower, upper } => {
                Vector::from_iterator(xi.len(), (0..xi.len()).map(|i| xi[i].clamp(lower[i], upper[i])))
            }
            SubdiffSet::Diamond { radius, .. } => project_l1_ball(xi, *radius),
        }
    }

    /// Extreme points (a single point for a singleton).
    pub fn vertices(&self) -> Vec<Vector> {
        match self {
            SubdiffSet::Singleton(x) => vec![x.clone()],
            SubdiffSet::Segment(a, b) => vec![a.clone(), b.clone()],
            SubdiffSet::Box { lower, upper } => {
                let n = lower.len();
                (0..(1usize << n))
                    .map(|mask| {
                        Vector::from_iterator(
                            n,
                            (0..n).map(|i| if mask >> i & 1 == 1 { upper[i] } else { lower[i] }),
                        )
                    })
                    .collect()
            }
            SubdiffSet::Diamond { radius, dim } => (0..*dim)
                .flat_map(|i| {
                    [1.0, -1.0].into_iter().map(move |s| {
                        let mut e = Vector::zeros(*dim);
                        e[i] = s * radius;
                        e
                    })
                })
                .collect(),
        }
    }

    /// The element of minimal Euclidean norm.
    pub fn min_norm_element(&self) -> Vector {
        self.project(&Vector::zeros(self.dim()))
    }

    pub fn is_singleton(&self) -> bool {
        match self {
            SubdiffSet::Singleton(_) => true,
            SubdiffSet::Segment(a, b) => a == b,
            SubdiffSet::Box { lower, upper } => lower == upper,
            SubdiffSet::Diamond { radius, .. } => *radius == 0.0,
        }
    }
}

fn project_l1_ball(xi: &Vector, radius: f64) -> Vector {
    if xi.iter().map(|x| x.abs()).sum::<f64>() <= radius {
        return xi.clone();
    }
    // Soft threshold at the level that lands on the sphere.
    let mut mags: Vec<f64> = xi.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut level = 0.0;
    for (k, m) in mags.iter().enumerate() {
        cum += m;
        let candidate = (cum - radius) / (k + 1) as f64;
        if candidate < *m {
            level = candidate;
        }
    }
    xi.map(|x| x.signum() * (x.abs() - level).max(0.0))
}
