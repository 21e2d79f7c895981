use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Potential;
use crate::error::{check_dim, Error, Result};
use crate::optim::maximize_scalar;
use crate::{Vector, WeightedNorm};

/// Sampled constants of the estimate `R(v) + R*(xi) >= c |v| |xi|_* - C`.
#[derive(Clone, Debug)]
pub struct QyeFit {
    pub c: f64,
    pub big_c: f64,
    /// Index of the sample minimizing `(R(v) + R*(xi) + C) / (|v| |xi|_*)`.
    pub worst: usize,
    pub samples: usize,
}

/// Fits `(c, C)` on the samples. `C` is the 1% quantile of the violation
/// `max(0, -(R(v) + R*(xi)))` at `c = 0`; `c` is then the largest value
/// compatible with every sample, i.e. the limit of the bisection on `c`.
pub fn qye_probe(p: &Potential, samples: &[(Vector, Vector)], norm: &WeightedNorm) -> Result<QyeFit> {
    if samples.is_empty() {
        return Err(Error::input("qye probe needs at least one sample"));
    }
    check_dim("qye norm", p.dim(), norm.dim())?;
    let mut sums = Vec::with_capacity(samples.len());
    let mut products = Vec::with_capacity(samples.len());
    for (v, xi) in samples {
        check_dim("qye sample rate", p.dim(), v.len())?;
        check_dim("qye sample force", p.dim(), xi.len())?;
        sums.push((p.eval(v)? + p.conjugate(xi)?.into()).value());
        products.push(norm.norm(v) * norm.dual(xi));
    }
    if products.iter().all(|m| *m == 0.0) {
        return Err(Error::input("qye probe: every sample has a zero rate or a zero force"));
    }
    let mut violations: Vec<f64> = sums.iter().map(|s| (-s).max(0.0)).collect();
    violations.sort_by(|a, b| a.total_cmp(b));
    let big_c = violations[((violations.len() - 1) as f64 * 0.01).floor() as usize];
    let mut c = f64::INFINITY;
    let mut worst = 0;
    for (i, (s, m)) in sums.iter().zip(&products).enumerate() {
        if *m > 0.0 && s.is_finite() {
            let ratio = (s + big_c) / m;
            if ratio < c {
                c = ratio;
                worst = i;
            }
        }
    }
    Ok(QyeFit {
        c,
        big_c,
        worst,
        samples: samples.len(),
    })
}

/// Sampling configuration for the convex minorant construction.
#[derive(Clone, Debug)]
pub struct PsiSampling {
    /// Radius of the sample ball (primal and dual).
    pub radius: f64,
    /// Number of random directions in addition to the coordinate axes.
    pub directions: usize,
    pub seed: u64,
}

impl Default for PsiSampling {
    fn default() -> Self {
        PsiSampling {
            radius: 10.0,
            directions: 32,
            seed: 0,
        }
    }
}

/// The piecewise-linear convex minorant `Psi(r) = max_K (K r - S_K)`.
#[derive(Clone, Debug)]
pub struct PsiMinorant {
    pub k_grid: Vec<f64>,
    pub s_k: Vec<f64>,
    /// The constants `S_K` are certified only on the ball of this radius.
    pub radius: f64,
}

impl PsiMinorant {
    pub fn eval(&self, r: f64) -> f64 {
        self.k_grid
            .iter()
            .zip(&self.s_k)
            .map(|(k, s)| k * r - s)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Builds the sampled minorant for a family of potentials, with
/// `S_K = max_j sup (K|v| - R_j(v), K|xi|_* - R_j*(xi))` over the sample ball.
/// Along each sampled direction the supremum in the radius is solved exactly
/// (the map is concave in the radius).
pub fn psi_minorant(
    potentials: &[Potential],
    k_grid: &[f64],
    sampling: &PsiSampling,
    norm: &WeightedNorm,
) -> Result<PsiMinorant> {
    if k_grid.is_empty() {
        return Err(Error::input("psi minorant needs a nonempty K grid"));
    }
    if k_grid[0] != 0.0 || k_grid.windows(2).any(|w| w[1] <= w[0]) || k_grid.iter().any(|k| *k < 0.0) {
        return Err(Error::input("K grid must be increasing, nonnegative and start at 0"));
    }
    if potentials.is_empty() {
        return Err(Error::input("psi minorant needs at least one potential"));
    }
    if !(sampling.radius > 0.0) {
        return Err(Error::input("sample radius must be positive"));
    }
    let n = norm.dim();
    for p in potentials {
        check_dim("psi potential", n, p.dim())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut raw: Vec<Vector> = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut e = Vector::zeros(n);
            e[i] = s;
            raw.push(e);
        }
    }
    for _ in 0..sampling.directions {
        let d = Vector::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..1.0)));
        if d.norm() > 1e-8 {
            raw.push(d);
        }
    }
    let primal_dirs: Vec<Vector> = raw.iter().map(|d| d / norm.norm(d)).collect();
    let dual_dirs: Vec<Vector> = raw.iter().map(|d| d / norm.dual(d)).collect();

    let mut s_k = vec![0.0_f64; k_grid.len()];
    for (ik, &k) in k_grid.iter().enumerate() {
        let mut best = 0.0_f64;
        for p in potentials {
            for d in &primal_dirs {
                let f = |r: f64| {
                    let val = p.eval_raw(&(d * r)).map(|e| e.value()).unwrap_or(f64::INFINITY);
                    k * r - val
                };
                if f(sampling.radius * 0.5).is_finite() {
                    best = best.max(maximize_scalar(f, 0.0, sampling.radius).1);
                }
            }
            for d in &dual_dirs {
                let f = |r: f64| k * r - p.conjugate_raw(&(d * r));
                best = best.max(maximize_scalar(f, 0.0, sampling.radius).1);
            }
        }
        s_k[ik] = best;
    }
    Ok(PsiMinorant {
        k_grid: k_grid.to_vec(),
        s_k,
        radius: sampling.radius,
    })
}
