//! Exact posteriors on an atomic prior next to the conjugate Dirichlet
//! update, with the posterior predictive of the next observation.

use bayes_limits::experiments::simplex_grid;
use bayes_limits::measures::FiniteDist;
use bayes_limits::models::{CategoricalModel, Model};
use bayes_limits::priors::{
    posterior_predictive, posterior_update_atomic, posterior_update_dirichlet, AtomicPrior, DirichletPrior,
};
use bayes_limits::rng::derive_stream;

fn main() -> bayes_limits::Result<()> {
    let model = CategoricalModel::new(3)?;
    let truth = FiniteDist::new(vec![0.2, 0.3, 0.5])?;
    let mut rng = derive_stream(1, "example/posterior", 0);
    let x = model.sample(&truth, 200, &mut rng)?;
    let counts = model.counts(&x);
    println!("counts {counts:?}");

    let grid = AtomicPrior::uniform(simplex_grid(3, 40, false)?)?;
    let post = posterior_update_atomic(&grid, &model, &x)?;
    let mode = &post.atoms()[post.mode()];
    println!(
        "atomic posterior mode {:?} with mass {:.4}",
        mode.probs(),
        post.weights()[post.mode()]
    );
    let next = posterior_predictive(&post, &model).cell_probs()?;
    println!("posterior predictive {:?}", next.probs());

    let dir = posterior_update_dirichlet(&DirichletPrior::symmetric(3, 1.0)?, &counts)?;
    println!("Dirichlet posterior {:?}, mean {:?}", dir.alpha(), dir.mean().probs());
    Ok(())
}
