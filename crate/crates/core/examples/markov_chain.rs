//! Ergodic Markov chains: stationary law, the frequency test with its
//! Hoeffding bound, and product-Dirichlet prior masses of a ball.

use bayes_limits::measures::{joint_two_step, stationary_distribution, TransitionMatrix};
use bayes_limits::models::{InitialLaw, MarkovModel, Metric, Model};
use bayes_limits::priors::{ProductDirichletPrior, Region};
use bayes_limits::rng::derive_stream;
use bayes_limits::testing::{hoeffding_bound, hoeffding_exceedance};

fn main() -> bayes_limits::Result<()> {
    let truth = TransitionMatrix::new(vec![vec![0.1, 0.45, 0.45], vec![0.3, 0.4, 0.3], vec![0.6, 0.2, 0.2]])?;
    let model = MarkovModel::new(3, InitialLaw::Stationary)?;
    println!("stationary law {:?}", stationary_distribution(&truth, 1e-14)?.probs());

    let joint = joint_two_step(&truth)?;
    let (n, delta, reps) = (2000, 0.05, 500);
    let exceed = (0..reps)
        .filter(|&r| {
            let mut rng = derive_stream(13, "example/markov", r);
            let path = model.sample(&truth, n, &mut rng).unwrap();
            hoeffding_exceedance(&path, &joint, delta)
        })
        .count();
    let bound = hoeffding_bound(truth.min_entry(), delta, n);
    println!("exceedance {exceed}/{reps} against N^2 bound {:.4}", 9.0 * bound);

    let prior = ProductDirichletPrior::symmetric(3, 1.0)?;
    let ball = Region::ball(&model, truth, 0.08, Metric::MaxJointBin)?;
    let mut rng = derive_stream(13, "example/markov-mass", 0);
    let (inside, outside) = prior.log_masses_binary(&ball, 2000, 50, &mut rng);
    println!(
        "log prior mass of the ball {:.3}, of its complement {:.3e}",
        inside.log_mass, outside.log_mass
    );
    Ok(())
}
