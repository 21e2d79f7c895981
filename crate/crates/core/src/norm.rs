use crate::error::{check_dim, Error, Result};
use crate::Vector;

/// Weighted Euclidean norm `|v| = sqrt(sum w_i v_i^2)` with its dual
/// `|xi|_* = sqrt(sum xi_i^2 / w_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedNorm {
    weights: Vector,
}

impl WeightedNorm {
    pub fn new(weights: Vector) -> Result<Self> {
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::config("norm weights must be positive and finite"));
        }
        Ok(WeightedNorm { weights })
    }

    pub fn euclidean(dim: usize) -> Self {
        WeightedNorm {
            weights: Vector::from_element(dim, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &Vector {
        &self.weights
    }

    pub fn norm(&self, v: &Vector) -> f64 {
        debug_assert_eq!(v.len(), self.dim());
        v.iter()
            .zip(self.weights.iter())
            .map(|(x, w)| w * x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn dual(&self, xi: &Vector) -> f64 {
        debug_assert_eq!(xi.len(), self.dim());
        xi.iter()
            .zip(self.weights.iter())
            .map(|(x, w)| x * x / w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn check(&self, v: &Vector) -> Result<()> {
        check_dim("norm argument", self.dim(), v.len())
    }
}
