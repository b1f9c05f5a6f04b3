use rand::Rng;
use rand_distr::StandardNormal;

use super::{unsupported_metric, Metric, Model};
use crate::error::{Error, Result};
use crate::numeric::ksum;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `X_i = theta_i + N(0, 1)`, `i = 1..n`: one observation per coordinate,
/// so the sample size equals the dimension.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SparseMeansModel;

impl SparseMeansModel {
    pub fn new() -> Self {
        Self
    }

    /// `log phi(x)` for the standard normal density.
    pub fn log_phi(x: f64) -> f64 {
        -0.5 * x * x - HALF_LN_2PI
    }
}

impl Model for SparseMeansModel {
    type Param = Vec<f64>;
    type Sample = Vec<f64>;
    type Stats = Vec<f64>;

    fn family(&self) -> &'static str {
        "sparse_means"
    }

    fn validate(&self, theta: &Vec<f64>) -> Result<()> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Parameter("non-finite mean".into()));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, theta: &Vec<f64>, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate(theta)?;
        if theta.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: theta.len(),
            });
        }
        Ok(theta.iter().map(|t| t + rng.sample::<f64, _>(StandardNormal)).collect())
    }

    fn sample_size(&self, x: &Vec<f64>) -> usize {
        x.len()
    }

    fn stats(&self, x: &Vec<f64>) -> Vec<f64> {
        x.clone()
    }

    fn loglik_stats(&self, theta: &Vec<f64>, x: &Vec<f64>) -> f64 {
        if theta.len() != x.len() {
            return f64::NEG_INFINITY;
        }
        ksum(theta.iter().zip(x).map(|(t, v)| Self::log_phi(v - t)))
    }

    fn param_distance(&self, a: &Vec<f64>, b: &Vec<f64>, metric: Metric) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::Dimension {
                expected: a.len(),
                got: b.len(),
            });
        }
        let d2 = ksum(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)));
        match metric {
            Metric::Euclidean => Ok(d2.sqrt()),
            // affinity of N(a, I) and N(b, I) is exp(-|a - b|^2 / 8)
            Metric::Hellinger => Ok((2.0 * -(-d2 / 8.0).exp_m1()).sqrt()),
            Metric::Tv => Ok(statrs::function::erf::erf(d2.sqrt() / (2.0 * std::f64::consts::SQRT_2))),
            Metric::MaxJointBin => Err(unsupported_metric(metric, self.family())),
        }
    }

    fn sample_values(&self, x: &Vec<f64>) -> Vec<f64> {
        x.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglik_at_zero() {
        let m = SparseMeansModel;
        let ll = m.loglik(&vec![0.0, 0.0], &vec![0.0, 0.0]);
        assert!((ll + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn dimension_must_match() {
        let m = SparseMeansModel;
        let mut rng = crate::rng::derive_stream(0, "s", 0);
        assert!(m.sample(&vec![0.0; 3], 4, &mut rng).is_err());
    }

    #[test]
    fn tv_of_unit_shift() {
        // 2 Phi(1/2) - 1
        let tv = SparseMeansModel
            .param_distance(&vec![0.0], &vec![1.0], Metric::Tv)
            .unwrap();
        assert!((tv - 0.382_924_922_548_026).abs() < 1e-12);
    }
}
