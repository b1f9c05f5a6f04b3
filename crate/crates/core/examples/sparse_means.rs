//! Exact spike-and-slab posterior for sparse normal means: support
//! probabilities and the posterior mass of sparse but distant means.

use bayes_limits::experiments::sparse_v_radius_sq;
use bayes_limits::models::{Model, SparseMeansModel};
use bayes_limits::priors::{spike_slab_posterior_exact, Slab, SparsityPrior, SpikeSlabPrior};
use bayes_limits::rng::derive_stream;

fn main() -> bayes_limits::Result<()> {
    let (n, p_n) = (12, 2);
    let prior = SpikeSlabPrior::new(n, &SparsityPrior::Uniform, Slab::Laplace { scale: 1.0 }, 4)?;
    let model = SparseMeansModel::new();
    let mut rng = derive_stream(23, "example/sparse", 0);
    let noise = model.sample(&vec![0.0; n], n, &mut rng)?;
    for s in [2.0, 5.0, 8.0] {
        let theta0: Vec<f64> = (0..n).map(|i| if i < p_n { s } else { 0.0 }).collect();
        let x: Vec<f64> = noise.iter().zip(&theta0).map(|(e, t)| e + t).collect();
        let post = spike_slab_posterior_exact(&prior, &x)?;
        let incl = post.inclusion_probabilities();
        let v = post.v_mass(&theta0, 2 * p_n, sparse_v_radius_sq(1.0, p_n, n), 400)?;
        println!(
            "signal {s}: inclusion of the true support {:.3}, {:.3}; V-mass in [{:.4}, {:.4}]",
            incl[0], incl[1], v.lower, v.upper
        );
    }
    Ok(())
}
