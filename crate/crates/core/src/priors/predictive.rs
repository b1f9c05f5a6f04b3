use rand::Rng;

use super::{AtomicPrior, Region};
use crate::error::{Error, Result};
use crate::measures::FiniteDist;
use crate::models::Model;
use crate::numeric::{ksum, log_sum_exp};

/// Mixture `sum_i w_i P_{theta_i}^n` over an atomic measure: the (local)
/// prior predictive or the posterior predictive.
#[derive(Debug, Clone)]
pub struct Predictive<M: Model> {
    model: M,
    mixing: AtomicPrior<M::Param>,
    /// Indices and log weights of atoms with positive weight.
    active: Vec<(usize, f64)>,
}

impl<M: Model> Predictive<M> {
    fn new(model: &M, mixing: AtomicPrior<M::Param>) -> Self {
        let active = mixing
            .weights()
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, &w)| (i, w.ln()))
            .collect();
        Self {
            model: model.clone(),
            mixing,
            active,
        }
    }

    pub fn mixing(&self) -> &AtomicPrior<M::Param> {
        &self.mixing
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn log_density_stats(&self, s: &M::Stats) -> f64 {
        let atoms = self.mixing.atoms();
        let terms: Vec<f64> = self
            .active
            .iter()
            .map(|&(i, lw)| lw + self.model.loglik_stats(&atoms[i], s))
            .collect();
        log_sum_exp(&terms)
    }

    /// `log sum_i w_i p_{theta_i}(x)`.
    pub fn log_density(&self, x: &M::Sample) -> f64 {
        self.log_density_stats(&self.model.stats(x))
    }

    /// Draws `theta ~ mixing`, then `x ~ P_theta^n`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<M::Sample> {
        let i = self.mixing.sample_index(rng);
        self.model.sample(&self.mixing.atoms()[i], n, rng)
    }
}

impl<M: Model<Param = FiniteDist>> Predictive<M> {
    /// One-observation cell probabilities `sum_i w_i p_i(k)`.
    pub fn cell_probs(&self) -> Result<FiniteDist> {
        let atoms = self.mixing.atoms();
        let k = atoms[0].len();
        let probs = (0..k)
            .map(|c| ksum(self.active.iter().map(|&(i, lw)| lw.exp() * atoms[i].mass(c))))
            .collect();
        FiniteDist::from_weights(probs)
    }
}

/// `P_n^{Pi|B}`: the prior predictive of `Pi` conditioned on `B`.
pub fn local_prior_predictive<M: Model>(
    prior: &AtomicPrior<M::Param>,
    model: &M,
    region: &Region<M::Param>,
) -> Result<Predictive<M>> {
    let mask = prior.mask(region);
    if prior.mass_of_mask(&mask) <= 0.0 {
        return Err(Error::EmptyRegion(region.label().into()));
    }
    Ok(Predictive::new(model, prior.restrict_mask(&mask, region.label())?))
}

/// Predictive law of future data under a posterior.
pub fn posterior_predictive<M: Model>(posterior: &AtomicPrior<M::Param>, model: &M) -> Predictive<M> {
    Predictive::new(model, posterior.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::total_variation;
    use crate::models::CategoricalModel;

    fn two_atoms() -> AtomicPrior<FiniteDist> {
        AtomicPrior::uniform(vec![
            FiniteDist::new(vec![0.5, 0.5]).unwrap(),
            FiniteDist::new(vec![0.9, 0.1]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn equal_weight_mixture_is_pointwise_average() {
        let m = CategoricalModel::new(2).unwrap();
        let pred = local_prior_predictive(&two_atoms(), &m, &Region::all()).unwrap();
        let x = vec![0, 1, 0];
        let direct = 0.5 * (0.5f64.powi(3)) + 0.5 * (0.9 * 0.1 * 0.9);
        assert!((pred.log_density(&x).exp() - direct).abs() < 1e-15);
    }

    #[test]
    fn single_atom_region_gives_that_law() {
        let m = CategoricalModel::new(2).unwrap();
        let b = Region::predicate("second", |p: &FiniteDist| p.mass(0) > 0.8);
        let pred = local_prior_predictive(&two_atoms(), &m, &b).unwrap();
        assert!((pred.log_density(&vec![1, 1]) - (0.01f64).ln()).abs() < 1e-14);
        assert!(matches!(
            local_prior_predictive(&two_atoms(), &m, &Region::empty()),
            Err(Error::EmptyRegion(_))
        ));
    }

    #[test]
    fn posterior_predictive_cells_are_mixture() {
        let m = CategoricalModel::new(2).unwrap();
        let post = AtomicPrior::new(two_atoms().atoms().to_vec(), vec![0.25, 0.75]).unwrap();
        let pred = posterior_predictive(&post, &m);
        let cells = pred.cell_probs().unwrap();
        assert!((cells.mass(0) - (0.25 * 0.5 + 0.75 * 0.9)).abs() < 1e-15);
        let p0 = FiniteDist::new(vec![0.6, 0.4]).unwrap();
        let tv = total_variation(&cells, &p0).unwrap();
        assert!((tv - (0.8 - 0.6)).abs() < 1e-15);
    }
}
