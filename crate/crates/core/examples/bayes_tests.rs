//! Test sequences for B against V: the barycentre test, its exact power,
//! the Hellinger-transform bound and the concentration inequality that
//! turns tests into posterior concentration.

use bayes_limits::measures::FiniteDist;
use bayes_limits::models::CategoricalModel;
use bayes_limits::priors::{AtomicPrior, Region};
use bayes_limits::testing::{
    barycentre_lr_test, bayes_test_power, concentration_check, hellinger_transform_power_bound, lecam_inequality_terms,
    PowerMethod,
};

fn coin(p: f64) -> FiniteDist {
    FiniteDist::new(vec![p, 1.0 - p]).unwrap()
}

fn main() -> bayes_limits::Result<()> {
    let model = CategoricalModel::new(2)?;
    let prior = AtomicPrior::uniform([0.1, 0.25, 0.4, 0.6, 0.75, 0.9].iter().map(|&p| coin(p)).collect())?;
    let b = Region::predicate("B", |d: &FiniteDist| d.mass(0) < 0.5);
    let v = Region::predicate("V", |d: &FiniteDist| d.mass(0) > 0.5);
    let phi = barycentre_lr_test(&prior, &b, &v, &model)?;
    println!(
        "{:>3} {:>12} {:>12} {:>12} {:>12}",
        "n", "total error", "bound", "Pi(V|x) avg", "Le Cam rhs"
    );
    for n in [2, 4, 8, 12] {
        let power = bayes_test_power(&phi, &prior, &b, &v, &model, n, PowerMethod::Exact)?;
        let bound = hellinger_transform_power_bound(&prior, &b, &v, &model, n, None)?;
        let conc = concentration_check(&prior, &b, &v, &phi, &model, n, PowerMethod::Exact)?;
        let lecam = lecam_inequality_terms(&prior, &b, &v, &phi, &model, &coin(0.3), n)?;
        println!(
            "{n:>3} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            power.total, bound.bound, conc.lhs, lecam.rhs
        );
    }
    Ok(())
}
