//! Freedman-type inconsistency: atoms that forbid a symbol die once the
//! symbol appears, and the escape test has zero expectation under them.

use bayes_limits::measures::FiniteDist;
use bayes_limits::models::{FreedmanModel, Model};
use bayes_limits::priors::{posterior_update_atomic, AtomicPrior};
use bayes_limits::rng::derive_stream;
use bayes_limits::testing::{freedman_escape_expectation, freedman_escape_union_bound};

fn main() -> bayes_limits::Result<()> {
    let k = 20;
    let mut p0 = vec![0.1; 3];
    p0.extend(vec![0.7 / 17.0; 17]);
    let truth = FiniteDist::new(p0)?;
    let q = FiniteDist::uniform(k)?;
    // P_m is the truth with symbol m removed
    let mut atoms = vec![q.clone()];
    for m in 0..3 {
        let mut w = truth.probs().to_vec();
        w[m] = 0.0;
        atoms.push(FiniteDist::from_weights(w)?);
    }
    let prior = AtomicPrior::new(atoms, vec![0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0])?;
    let model = FreedmanModel::new(k)?;
    let mut rng = derive_stream(7, "example/freedman", 0);
    let x = model.sample(&truth, 100, &mut rng)?;
    for n in [5, 20, 50, 100] {
        let post = posterior_update_atomic(&prior, &model, &x[..n].to_vec())?;
        println!(
            "n = {n:>3}: Pi(Q | x) = {:.6}, P0(all forbidden seen) = {:.4} (Bonferroni lower bound {:.4})",
            post.weights()[0],
            freedman_escape_expectation(&truth, &[0, 1, 2], n)?,
            freedman_escape_union_bound(&truth, &[0, 1, 2], n)
        );
    }
    Ok(())
}
