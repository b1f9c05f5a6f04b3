use std::sync::Arc;

use rand::Rng;

use super::Region;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::numeric::{ksum, log_sum_exp};

/// How many atoms a domination failure reports individually.
const REPORTED_DEAD_ATOMS: usize = 16;

/// Discrete measure `sum_i w_i delta_{theta_i}` with normalised weights.
/// Priors and posteriors share this type; posteriors keep the atom list of
/// their prior.
#[derive(Debug, Clone)]
pub struct AtomicPrior<P> {
    atoms: Arc<Vec<P>>,
    weights: Vec<f64>,
}

/// Posterior of an atomic prior.
pub type AtomicPosterior<P> = AtomicPrior<P>;

impl<P: Clone + Send + Sync + 'static> AtomicPrior<P> {
    /// Normalises nonnegative `weights`; zero-weight atoms are allowed.
    pub fn new(atoms: Vec<P>, weights: Vec<f64>) -> Result<Self> {
        Self::with_shared_atoms(Arc::new(atoms), weights)
    }

    pub fn uniform(atoms: Vec<P>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0; n])
    }

    pub fn with_shared_atoms(atoms: Arc<Vec<P>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Parameter("atomic prior needs at least one atom".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::Dimension {
                expected: atoms.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Parameter("atom weights must be finite and nonnegative".into()));
        }
        let total = ksum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::Parameter("atom weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { atoms, weights })
    }

    pub fn atoms(&self) -> &[P] {
        &self.atoms
    }

    pub fn shared_atoms(&self) -> Arc<Vec<P>> {
        self.atoms.clone()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Membership of each atom in `region`.
    pub fn mask(&self, region: &Region<P>) -> Vec<bool> {
        self.atoms.iter().map(|a| region.contains(a)).collect()
    }

    /// Exact `Pi(region)`.
    pub fn mass(&self, region: &Region<P>) -> f64 {
        self.mass_of_mask(&self.mask(region))
    }

    pub fn mass_of_mask(&self, mask: &[bool]) -> f64 {
        ksum(self.weights.iter().zip(mask).filter(|(_, &m)| m).map(|(w, _)| *w))
    }

    /// `Pi(. | region)`.
    pub fn restrict(&self, region: &Region<P>) -> Result<Self> {
        self.restrict_mask(&self.mask(region), region.label())
    }

    pub fn restrict_mask(&self, mask: &[bool], label: &str) -> Result<Self> {
        let w: Vec<f64> = self
            .weights
            .iter()
            .zip(mask)
            .map(|(w, &m)| if m { *w } else { 0.0 })
            .collect();
        if w.iter().all(|&x| x == 0.0) {
            return Err(Error::EmptyRegion(label.into()));
        }
        Self::with_shared_atoms(self.atoms.clone(), w)
    }

    /// Index of a weighted random atom.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }

    /// Indices of atoms with positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    /// Index of the heaviest atom (lowest index on ties).
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = i;
            }
        }
        best
    }

    /// Writes `(atom, weight)` rows; `atom` is the atom index.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["atom", "weight"])?;
        for (i, wt) in self.weights.iter().enumerate() {
            w.write_record([i.to_string(), wt.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Unnormalised log posterior weights `log w_i + log p_{theta_i}(x)`.
pub fn log_posterior_weights<M: Model>(prior: &AtomicPrior<M::Param>, model: &M, stats: &M::Stats) -> Vec<f64> {
    prior
        .atoms()
        .iter()
        .zip(prior.weights())
        .map(|(a, &w)| {
            if w > 0.0 {
                w.ln() + model.loglik_stats(a, stats)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Bayes' rule on an atomic prior, computed by log-sum-exp.
///
/// Fails with [`Error::DominationFailure`] when every atom gives the data
/// zero likelihood.
pub fn posterior_update_atomic<M: Model>(
    prior: &AtomicPrior<M::Param>,
    model: &M,
    x: &M::Sample,
) -> Result<AtomicPosterior<M::Param>> {
    posterior_from_stats(prior, model, &model.stats(x)).map_err(|e| match e {
        Error::DominationFailure { atoms, .. } => Error::DominationFailure {
            atoms,
            first_forbidden: prior
                .support()
                .into_iter()
                .take(REPORTED_DEAD_ATOMS)
                .map(|i| (i, model.first_forbidden(&prior.atoms()[i], x)))
                .collect(),
        },
        other => other,
    })
}

/// [`posterior_update_atomic`] from precomputed sufficient statistics; the
/// failure carries no per-observation diagnostics.
pub fn posterior_from_stats<M: Model>(
    prior: &AtomicPrior<M::Param>,
    model: &M,
    stats: &M::Stats,
) -> Result<AtomicPosterior<M::Param>> {
    let lw = log_posterior_weights(prior, model, stats);
    normalise_log_weights(prior, &lw)
}

pub(crate) fn normalise_log_weights<P: Clone + Send + Sync + 'static>(
    prior: &AtomicPrior<P>,
    lw: &[f64],
) -> Result<AtomicPrior<P>> {
    let lse = log_sum_exp(lw);
    if lse == f64::NEG_INFINITY {
        return Err(Error::DominationFailure {
            atoms: prior.support().len(),
            first_forbidden: Vec::new(),
        });
    }
    let weights: Vec<f64> = lw.iter().map(|l| (l - lse).exp()).collect();
    AtomicPrior::with_shared_atoms(prior.shared_atoms(), weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::FiniteDist;
    use crate::models::{CategoricalModel, UniformLocationModel};

    fn coin_prior() -> AtomicPrior<FiniteDist> {
        let atoms = [0.2, 0.5, 0.8]
            .iter()
            .map(|&p| FiniteDist::new(vec![p, 1.0 - p]).unwrap())
            .collect();
        AtomicPrior::new(atoms, vec![0.25, 0.5, 0.25]).unwrap()
    }

    #[test]
    fn bayes_rule_by_hand() {
        let m = CategoricalModel::new(2).unwrap();
        let post = posterior_update_atomic(&coin_prior(), &m, &vec![0, 0, 1]).unwrap();
        let lik = |p: f64| p * p * (1.0 - p);
        let raw = [0.25 * lik(0.2), 0.5 * lik(0.5), 0.25 * lik(0.8)];
        let z: f64 = raw.iter().sum();
        for i in 0..3 {
            assert!((post.weights()[i] - raw[i] / z).abs() < 1e-15);
        }
    }

    #[test]
    fn domination_failure_diagnostics() {
        let m = UniformLocationModel;
        let prior = AtomicPrior::uniform(vec![0.0, 0.1]).unwrap();
        let err = posterior_update_atomic(&prior, &m, &vec![0.5, 1.5]).unwrap_err();
        match err {
            Error::DominationFailure { atoms, first_forbidden } => {
                assert_eq!(atoms, 2);
                assert_eq!(first_forbidden, vec![(0, Some(1)), (1, Some(1))]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn restriction_and_mass() {
        let p = coin_prior();
        let r = Region::predicate("heads-biased", |d: &FiniteDist| d.mass(0) > 0.4);
        assert!((p.mass(&r) - 0.75).abs() < 1e-15);
        let c = p.restrict(&r).unwrap();
        assert!((c.weights()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(p.restrict(&Region::empty()).is_err());
    }

    #[test]
    fn posterior_of_empty_sample_is_prior() {
        let m = CategoricalModel::new(2).unwrap();
        let post = posterior_update_atomic(&coin_prior(), &m, &vec![]).unwrap();
        for (a, b) in post.weights().iter().zip(coin_prior().weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
