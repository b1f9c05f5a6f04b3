//! Markov-chain experiments: Bayes factors for joint-bin hypotheses under
//! a product-Dirichlet prior, and the Hoeffding bound for joint
//! frequencies.

use super::bayes_factor::trend_verdicts;
use super::config::{config_err, ConfigParam, ExperimentConfig, Family, PriorKind, RegionKind};
use super::report::fmt_seq;
use super::Context;
use crate::error::{Error, Result};
use crate::measures::{joint_two_step, FiniteDist, TransitionMatrix};
use crate::models::{InitialLaw, MarkovModel, Metric, Model};
use crate::numeric::mean;
use crate::priors::{posterior_update_product_dirichlet, ProductDirichletPrior};
use crate::testing::{hoeffding_bound, hoeffding_exceedance};

pub(crate) fn markov_setup(cfg: &ExperimentConfig) -> Result<(MarkovModel, TransitionMatrix)> {
    cfg.expect_family(&[Family::Markov])?;
    let truth = TransitionMatrix::from_value(cfg.truth_value()?, "model.truth")?;
    let states = cfg.model.states.unwrap_or(truth.n_states());
    if states != truth.n_states() {
        return Err(config_err("model.truth", format!("expected a {states}-state matrix")));
    }
    let initial = match &cfg.model.initial {
        Some(p) => {
            InitialLaw::Fixed(FiniteDist::new(p.clone()).map_err(|e| config_err("model.initial", e.to_string()))?)
        }
        None => InitialLaw::Stationary,
    };
    Ok((MarkovModel::new(states, initial)?, truth))
}

/// Bayes factor for `H0: max |p(k,l) - p0(k,l)| < eps` against its
/// complement. Prior and posterior masses of the hypotheses come from
/// sampled matrices; the rare side is estimated by tempered importance
/// sampling.
pub fn run_bayes_factor(ctx: &mut Context) -> Result<()> {
    const DEFAULT_SAMPLES: usize = 2000;
    const DEFAULT_MIN_HITS: usize = 50;
    let cfg = ctx.cfg.clone();
    let (model, truth) = markov_setup(&cfg)?;
    if cfg.prior.kind != PriorKind::ProductDirichlet {
        return Err(config_err(
            "prior.kind",
            "Markov Bayes factors need a product_dirichlet prior",
        ));
    }
    let conc = cfg.prior.concentration.unwrap_or(1.0);
    let prior = ProductDirichletPrior::symmetric(model.states(), conc)
        .map_err(|e| config_err("prior.concentration", e.to_string()))?;
    let (b_spec, v_spec) = (cfg.region("B")?, cfg.region("V")?);
    let complement = b_spec.kind == RegionKind::Ball
        && v_spec.kind == RegionKind::OutsideBall
        && b_spec.metric == v_spec.metric
        && b_spec.radius == v_spec.radius
        && b_spec.rate == v_spec.rate
        && b_spec.center == v_spec.center;
    if !complement || b_spec.metric != Some(Metric::MaxJointBin) {
        return Err(config_err(
            "regions.V",
            "Markov hypotheses need B a max_joint_bin ball and V the matching outside_ball",
        ));
    }
    let mut truths = vec![("h0_truth", truth.clone())];
    if let Some(alt) = &cfg.options.alternative {
        truths.push(("h1_truth", TransitionMatrix::from_value(alt, "options.alternative")?));
    }
    let samples = cfg.options.mc_samples.unwrap_or(DEFAULT_SAMPLES);
    let min_hits = cfg.options.min_hits.unwrap_or(DEFAULT_MIN_HITS);
    for (gi, &n) in cfg.n_grid.iter().enumerate() {
        let b = b_spec.build("B", &model, &truth, n)?;
        let mut rng = ctx.rt.stream("bayes-factor/prior-mass", gi as u64);
        let (pb, pv) = prior.log_masses_binary(&b, samples, min_hits, &mut rng);
        if !(pb.log_mass.is_finite() && pv.log_mass.is_finite()) {
            return Err(config_err(
                "regions.B",
                format!("prior masses of B and V must be positive (n = {n})"),
            ));
        }
        ctx.report.push_diagnostic(n, "log_prior_mass_b", pb.log_mass);
        ctx.report.push_diagnostic(n, "log_prior_mass_v", pv.log_mass);
        for (label, t) in &truths {
            let data_id = format!("bayes-factor/data/{label}/n={n}");
            let post_id = format!("bayes-factor/posterior/{label}/n={n}");
            let out: Vec<Result<[f64; 4]>> = ctx.rt.map(cfg.replications, |r| {
                let mut rng = ctx.rt.stream(&data_id, r as u64);
                let path = model.sample(t, n, &mut rng)?;
                let post = posterior_update_product_dirichlet(&prior, &model.stats(&path).count_rows())?;
                let mut rng = ctx.rt.stream(&post_id, r as u64);
                let (qb, qv) = post.log_masses_binary(&b, samples, min_hits, &mut rng);
                if qb.log_mass == f64::NEG_INFINITY && qv.log_mass == f64::NEG_INFINITY {
                    return Err(Error::Infeasible(format!(
                        "degenerate Bayes factor at n = {n}, replication {r}, {label}: no posterior draw hit either hypothesis"
                    )));
                }
                let lf = qb.log_mass - qv.log_mass - pb.log_mass + pv.log_mass;
                Ok([lf, qb.log_mass, qv.log_mass, qb.rel_stderr.max(qv.rel_stderr)])
            });
            for (r, o) in out.into_iter().enumerate() {
                let [lf, qb, qv, rel] = o?;
                ctx.report.push_replication(n, r, &format!("log_bf:{label}"), lf);
                ctx.report
                    .push_replication(n, r, &format!("log_post_b_mass:{label}"), qb);
                ctx.report
                    .push_replication(n, r, &format!("log_post_v_mass:{label}"), qv);
                ctx.report
                    .push_replication(n, r, &format!("rare_side_rel_stderr:{label}"), rel);
            }
        }
    }
    ctx.report.finalize();
    let labels: Vec<&str> = truths.iter().map(|t| t.0).collect();
    trend_verdicts(ctx, &labels);
    Ok(())
}

/// Exceedance frequencies `P(max_{k,l} p_hat(k,l) - p(k,l) >= delta)`
/// against `N^2` times the one-cell Hoeffding bound.
pub fn run_hoeffding(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.cfg.clone();
    let (model, truth) = markov_setup(&cfg)?;
    let lambda = truth
        .ergodicity_lambda()
        .ok_or_else(|| config_err("model.truth", "the bound needs a matrix with positive entries"))?;
    let joint = joint_two_step(&truth)?;
    let deltas = cfg.options.deltas.clone().unwrap_or_else(|| vec![0.05, 0.1]);
    let cells = (model.states() * model.states()) as f64;
    let mut ok = true;
    let mut details = Vec::new();
    for &n in &cfg.n_grid {
        let id = format!("test-power/paths/n={n}");
        let out: Vec<Result<Vec<bool>>> = ctx.rt.map(cfg.replications, |r| {
            let mut rng = ctx.rt.stream(&id, r as u64);
            let path = model.sample(&truth, n, &mut rng)?;
            Ok(deltas.iter().map(|&d| hoeffding_exceedance(&path, &joint, d)).collect())
        });
        let out = out.into_iter().collect::<Result<Vec<_>>>()?;
        for (j, &delta) in deltas.iter().enumerate() {
            let hits: Vec<f64> = out.iter().map(|o| if o[j] { 1.0 } else { 0.0 }).collect();
            for (r, h) in hits.iter().enumerate() {
                ctx.report.push_replication(n, r, &format!("exceed:delta={delta}"), *h);
            }
            let freq = mean(&hits);
            let se = (freq * (1.0 - freq) / hits.len() as f64).sqrt();
            let bound = hoeffding_bound(lambda, delta, n);
            ctx.report
                .push_diagnostic(n, &format!("hoeffding_bound:delta={delta}"), bound);
            ctx.report
                .push_diagnostic(n, &format!("cells_times_bound:delta={delta}"), cells * bound);
            let pass = freq <= cells * bound + 3.0 * se;
            ok &= pass;
            details.push(freq);
            details.push(cells * bound);
        }
    }
    ctx.report.finalize();
    ctx.report.verdict(
        "exceedance_within_bound",
        ok,
        format!("(frequency, N^2 bound) pairs {}", fmt_seq(&details)),
    );
    Ok(())
}
