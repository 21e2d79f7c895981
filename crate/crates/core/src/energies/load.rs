use crate::error::{check_dim, Error, Result};
use crate::Vector;

/// A closed-form load `l(t) = constant + slope * t + amplitude * sin(omega t + phase)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Load {
    pub constant: Vector,
    pub slope: Vector,
    pub amplitude: Vector,
    pub omega: f64,
    pub phase: f64,
}

impl Load {
    pub fn zero(dim: usize) -> Self {
        Load {
            constant: Vector::zeros(dim),
            slope: Vector::zeros(dim),
            amplitude: Vector::zeros(dim),
            omega: 0.0,
            phase: 0.0,
        }
    }

    pub fn constant(value: Vector) -> Self {
        let n = value.len();
        Load {
            constant: value,
            ..Load::zero(n)
        }
    }

    pub fn linear(constant: Vector, slope: Vector) -> Result<Self> {
        check_dim("load slope", constant.len(), slope.len())?;
        let n = constant.len();
        Ok(Load {
            constant,
            slope,
            ..Load::zero(n)
        })
    }

    pub fn sinusoidal(amplitude: Vector, omega: f64, phase: f64) -> Result<Self> {
        if !omega.is_finite() || !phase.is_finite() {
            return Err(Error::config("load frequency and phase must be finite"));
        }
        let n = amplitude.len();
        Ok(Load {
            amplitude,
            omega,
            phase,
            ..Load::zero(n)
        })
    }

    pub fn dim(&self) -> usize {
        self.constant.len()
    }

    pub fn is_autonomous(&self) -> bool {
        self.slope.iter().all(|x| *x == 0.0) && (self.amplitude.iter().all(|x| *x == 0.0) || self.omega == 0.0)
    }

    pub fn value(&self, t: f64) -> Vector {
        &self.constant + &self.slope * t + &self.amplitude * (self.omega * t + self.phase).sin()
    }

    pub fn derivative(&self, t: f64) -> Vector {
        &self.slope + &self.amplitude * (self.omega * (self.omega * t + self.phase).cos())
    }

    /// Componentwise bound on `|l(t)|` over `[0, horizon]`.
    pub fn value_bound(&self, horizon: f64) -> Vector {
        Vector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| self.constant[i].abs() + self.slope[i].abs() * horizon + self.amplitude[i].abs()),
        )
    }

    /// Componentwise bound on `|l'(t)|`.
    pub fn derivative_bound(&self) -> Vector {
        Vector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| self.slope[i].abs() + self.amplitude[i].abs() * self.omega.abs()),
        )
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.dim();
        check_dim("load slope", n, self.slope.len())?;
        check_dim("load amplitude", n, self.amplitude.len())?;
        let finite = |v: &Vector| v.iter().all(|x| x.is_finite());
        if !(finite(&self.constant) && finite(&self.slope) && finite(&self.amplitude))
            || !self.omega.is_finite()
            || !self.phase.is_finite()
        {
            return Err(Error::config("load coefficients must be finite"));
        }
        Ok(())
    }
}
