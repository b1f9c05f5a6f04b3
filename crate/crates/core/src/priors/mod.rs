//! Priors, posteriors, predictive laws, parameter regions and credible sets.

mod atomic;
mod conjugate;
mod credible;
mod predictive;
mod region;
mod spike_slab;

pub use atomic::{log_posterior_weights, posterior_from_stats, posterior_update_atomic, AtomicPosterior, AtomicPrior};
pub use conjugate::{
    ln_multivariate_beta, posterior_update_dirichlet, posterior_update_product_dirichlet, sample_dirichlet_log,
    DirichletPrior, LogMassEstimate, MassEstimate, ProductDirichletPrior,
};
pub use credible::{ball_diameter, credible_set, diameter, enlarge_credible, CredibleSet, CredibleShape};
pub use predictive::{local_prior_predictive, posterior_predictive, Predictive};
pub use region::{Ball, DistFn, PredicateFn, Region, POINT_TOLERANCE};
pub use spike_slab::{
    spike_slab_posterior_exact, MassBracket, Slab, SparsityPrior, SpikeSlabPosterior, SpikeSlabPrior, SPARSE_N_MAX,
};

use rand::RngCore;

use crate::measures::{FiniteDist, TransitionMatrix};

/// A prior or posterior in one of the supported representations.
#[derive(Debug, Clone)]
pub enum PosteriorState<P> {
    Atomic(AtomicPosterior<P>),
    Dirichlet(DirichletPrior),
    ProductDirichlet(ProductDirichletPrior),
    SpikeSlab(SpikeSlabPosterior),
}

/// `Pi(B)`: exact for atomic measures, Monte Carlo otherwise.
pub trait RegionMass<P> {
    fn region_mass(&self, region: &Region<P>, samples: usize, rng: &mut dyn RngCore) -> MassEstimate;
}

impl<P: Clone + Send + Sync + 'static> RegionMass<P> for AtomicPrior<P> {
    fn region_mass(&self, region: &Region<P>, _samples: usize, _rng: &mut dyn RngCore) -> MassEstimate {
        MassEstimate {
            value: self.mass(region),
            stderr: 0.0,
            samples: 0,
        }
    }
}

impl RegionMass<FiniteDist> for DirichletPrior {
    fn region_mass(&self, region: &Region<FiniteDist>, samples: usize, rng: &mut dyn RngCore) -> MassEstimate {
        self.region_mass_mc(region, samples, rng)
    }
}

impl RegionMass<TransitionMatrix> for ProductDirichletPrior {
    fn region_mass(&self, region: &Region<TransitionMatrix>, samples: usize, rng: &mut dyn RngCore) -> MassEstimate {
        self.region_mass_mc(region, samples, rng)
    }
}

impl RegionMass<FiniteDist> for PosteriorState<FiniteDist> {
    fn region_mass(&self, region: &Region<FiniteDist>, samples: usize, rng: &mut dyn RngCore) -> MassEstimate {
        match self {
            PosteriorState::Atomic(a) => a.region_mass(region, samples, rng),
            PosteriorState::Dirichlet(d) => d.region_mass(region, samples, rng),
            _ => MassEstimate {
                value: f64::NAN,
                stderr: f64::NAN,
                samples: 0,
            },
        }
    }
}

/// Free-function form of [`RegionMass::region_mass`].
pub fn region_mass<P, T: RegionMass<P> + ?Sized>(
    measure: &T,
    region: &Region<P>,
    samples: usize,
    rng: &mut dyn RngCore,
) -> MassEstimate {
    measure.region_mass(region, samples, rng)
}
