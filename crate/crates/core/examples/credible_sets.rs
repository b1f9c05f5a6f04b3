//! Credible sets of an atomic posterior and their metric enlargements:
//! the enlargement is a confidence set whenever the posterior contracts
//! faster than the enlargement radius.

use bayes_limits::experiments::simplex_grid;
use bayes_limits::measures::FiniteDist;
use bayes_limits::models::{CategoricalModel, Metric, Model};
use bayes_limits::priors::{credible_set, enlarge_credible, posterior_update_atomic, AtomicPrior, CredibleShape};
use bayes_limits::rng::derive_stream;

fn main() -> bayes_limits::Result<()> {
    let model = CategoricalModel::new(3)?;
    let truth = FiniteDist::new(vec![0.2, 0.3, 0.5])?;
    let prior = AtomicPrior::uniform(simplex_grid(3, 50, false)?)?;
    let n = 500;
    let eps = 2.0 * ((n as f64).ln() / n as f64).sqrt();
    let reps = 50;
    let mut hits = [0usize; 2];
    for r in 0..reps {
        let mut rng = derive_stream(3, "example/credible", r);
        let x = model.sample(&truth, n, &mut rng)?;
        let post = posterior_update_atomic(&prior, &model, &x)?;
        let d = credible_set(&post, &model, 0.9, CredibleShape::MetricBall, Metric::Hellinger)?;
        let c = enlarge_credible(&d, eps, Metric::Hellinger)?;
        hits[0] += usize::from(d.region.contains(&truth));
        hits[1] += usize::from(c.contains(&truth));
    }
    println!("n = {n}, enlargement {eps:.4}");
    println!("credible set covers the truth in {} of {reps} runs", hits[0]);
    println!("enlarged set covers the truth in {} of {reps} runs", hits[1]);
    Ok(())
}
