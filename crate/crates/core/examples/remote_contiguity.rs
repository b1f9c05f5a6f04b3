//! Remote-contiguity diagnostics of the truth against the local prior
//! predictive of a Hellinger ball, on shared log-ratio draws.

use bayes_limits::experiments::simplex_grid;
use bayes_limits::measures::FiniteDist;
use bayes_limits::models::{CategoricalModel, Metric};
use bayes_limits::priors::{AtomicPrior, Region};
use bayes_limits::remote_contiguity::{
    criterion_implication, draw_log_ratios, quantile_curve, tail_curve, PredictivePair, RateSpec, Threshold,
};
use bayes_limits::rng::Runtime;

fn main() -> bayes_limits::Result<()> {
    let model = CategoricalModel::new(2)?;
    let truth = FiniteDist::new(vec![0.3, 0.7])?;
    let prior = AtomicPrior::uniform(simplex_grid(2, 20, false)?)?;
    let b = Region::ball(&model, truth.clone(), 0.2, Metric::Hellinger)?;
    let grid = [20, 50, 100, 200];
    let pair = PredictivePair::new(&model, truth, &prior, &grid, |_| b.clone())?;
    let rt = Runtime::new(19, bayes_limits::cli::logical_cores());
    let draws = draw_log_ratios(&pair, "example/rc", &grid, 400, &rt)?;
    let rate = RateSpec::power(1.0);

    for delta in [0.01, 0.1, 1.0] {
        let ii = tail_curve(&draws, &rate, delta)?;
        println!(
            "(ii) delta = {delta}: {:?} -> {}",
            ii.estimates,
            ii.verdict(&Threshold::default())?
        );
    }
    let q = quantile_curve(&draws, &rate, &[0.5, 0.99])?;
    println!("quantiles of a_n dQ/dP: {:?}", q.quantiles);
    let imp = criterion_implication(&draws, &rate, 0.1, 0.02)?;
    println!(
        "(ii) passes {}, (iv) at c = delta {}, at c = 1/delta {}",
        imp.ii_passes, imp.stated_holds, imp.inverse_holds
    );
    Ok(())
}
