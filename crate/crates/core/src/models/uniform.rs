use rand::Rng;

use super::{Metric, Model};
use crate::error::{Error, Result};

/// `X_i ~ U[theta, theta + 1]` i.i.d.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UniformLocationModel;

/// `(n, X_(1), X_(n))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformStats {
    pub n: usize,
    pub min: f64,
    pub max: f64,
}

impl UniformLocationModel {
    pub fn new() -> Self {
        Self
    }
}

impl Model for UniformLocationModel {
    type Param = f64;
    type Sample = Vec<f64>;
    type Stats = UniformStats;

    fn family(&self) -> &'static str {
        "uniform_location"
    }

    fn validate(&self, theta: &f64) -> Result<()> {
        if !theta.is_finite() {
            return Err(Error::Parameter(format!("location {theta} is not finite")));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, theta: &f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate(theta)?;
        Ok((0..n).map(|_| theta + rng.random::<f64>()).collect())
    }

    fn sample_size(&self, x: &Vec<f64>) -> usize {
        x.len()
    }

    fn stats(&self, x: &Vec<f64>) -> UniformStats {
        UniformStats {
            n: x.len(),
            min: x.iter().copied().fold(f64::INFINITY, f64::min),
            max: x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn loglik_stats(&self, theta: &f64, s: &UniformStats) -> f64 {
        if s.n == 0 || (s.min >= *theta && s.max <= theta + 1.0) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn first_forbidden(&self, theta: &f64, x: &Vec<f64>) -> Option<usize> {
        x.iter().position(|&v| v < *theta || v > theta + 1.0)
    }

    fn param_distance(&self, a: &f64, b: &f64, metric: Metric) -> Result<f64> {
        let d = (a - b).abs();
        match metric {
            Metric::Euclidean => Ok(d),
            // both densities equal one on the overlap
            Metric::Hellinger => Ok((2.0 * d.min(1.0)).sqrt()),
            Metric::Tv => Ok(d.min(1.0)),
            Metric::MaxJointBin => Err(super::unsupported_metric(metric, self.family())),
        }
    }

    fn sample_values(&self, x: &Vec<f64>) -> Vec<f64> {
        x.clone()
    }
}
