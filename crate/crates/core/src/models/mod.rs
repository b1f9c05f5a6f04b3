//! Statistical families: law of a sample of size `n` given a parameter,
//! log-likelihoods, sampling and parameter distances.

mod binning;
mod categorical;
mod markov;
mod sparse;
mod uniform;

pub use binning::{bin_data, Binned};
pub use categorical::{for_each_sequence, CategoricalModel, FreedmanModel, DEFAULT_FREEDMAN_TRUNCATION};
pub use markov::{InitialLaw, MarkovModel, MarkovStats};
pub use sparse::SparseMeansModel;
pub use uniform::{UniformLocationModel, UniformStats};

use std::fmt::Debug;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact enumeration is refused above this many sample points.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Distance between parameters, usually through the laws they induce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    #[serde(alias = "hellinger-of-induced")]
    Hellinger,
    #[serde(alias = "tv-of-induced", alias = "total_variation")]
    Tv,
    #[serde(alias = "max-joint-bin")]
    MaxJointBin,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Hellinger => "hellinger",
            Metric::Tv => "tv",
            Metric::MaxJointBin => "max_joint_bin",
        }
    }
}

/// A dominated family `{P_theta}` observed through samples of size `n`.
///
/// `Stats` is a sufficient statistic; likelihood evaluations over many
/// parameters compute it once.
pub trait Model: Clone + Send + Sync + 'static {
    type Param: Clone + Debug + Send + Sync + 'static;
    type Sample: Clone + Debug + Send + Sync + 'static;
    type Stats: Send + Sync;

    fn family(&self) -> &'static str;

    fn validate(&self, theta: &Self::Param) -> Result<()>;

    /// Draws a sample of size `n` from `P_theta`.
    fn sample<R: Rng + ?Sized>(&self, theta: &Self::Param, n: usize, rng: &mut R) -> Result<Self::Sample>;

    fn sample_size(&self, x: &Self::Sample) -> usize;

    fn stats(&self, x: &Self::Sample) -> Self::Stats;

    /// `log p_theta(x)`; `-inf` off the support.
    fn loglik_stats(&self, theta: &Self::Param, s: &Self::Stats) -> f64;

    fn loglik(&self, theta: &Self::Param, x: &Self::Sample) -> f64 {
        self.loglik_stats(theta, &self.stats(x))
    }

    /// Index of the first observation with zero density under `theta`.
    fn first_forbidden(&self, _theta: &Self::Param, _x: &Self::Sample) -> Option<usize> {
        None
    }

    fn param_distance(&self, a: &Self::Param, b: &Self::Param, metric: Metric) -> Result<f64>;

    /// Number of points of the sample space at size `n`, when finite.
    fn sample_space_size(&self, _n: usize) -> Option<u128> {
        None
    }

    /// Visits every sample of size `n` (only for finite sample spaces of
    /// size at most [`ENUMERATION_LIMIT`]).
    fn enumerate(&self, _n: usize, _visit: &mut dyn FnMut(&Self::Sample)) -> Result<()> {
        Err(Error::Infeasible(format!(
            "{} samples cannot be enumerated",
            self.family()
        )))
    }

    /// The sample flattened to numbers, one per CSV row.
    fn sample_values(&self, x: &Self::Sample) -> Vec<f64>;
}

pub(crate) fn unsupported_metric(metric: Metric, family: &str) -> Error {
    Error::Metric {
        metric: metric.name().into(),
        family: family.into(),
    }
}

pub(crate) fn check_enumerable(size: Option<u128>) -> Result<()> {
    match size {
        Some(s) if s <= ENUMERATION_LIMIT => Ok(()),
        Some(s) => Err(Error::Enumeration {
            size: s,
            limit: ENUMERATION_LIMIT,
        }),
        None => Err(Error::Enumeration {
            size: u128::MAX,
            limit: ENUMERATION_LIMIT,
        }),
    }
}

/// `base^exp` saturating at `u128::MAX`.
pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base as u128)?;
    }
    Some(acc)
}

/// Writes `(index, value)` rows for a sample.
pub fn write_sample_csv<M: Model, W: std::io::Write>(model: &M, x: &M::Sample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "value"])?;
    for (i, v) in model.sample_values(x).iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
