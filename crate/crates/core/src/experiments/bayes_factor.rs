//! Bayes factors for `B` versus `V` on atomic priors.

use super::atomic::AtomicFamily;
use super::config::{config_err, ConfigParam};
use super::report::{fmt_seq, is_monotone};
use super::Context;
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::priors::{log_posterior_weights, AtomicPrior};

/// `log F_n = log Pi(B|x) - log Pi(V|x) - log Pi(B) + log Pi(V)` from
/// unnormalised log posterior weights.
pub fn log_bayes_factor(lw: &[f64], b: &[bool], v: &[bool], log_prior_b: f64, log_prior_v: f64) -> Option<f64> {
    let side = |mask: &[bool]| {
        let t: Vec<f64> = lw.iter().zip(mask).filter(|p| *p.1).map(|p| *p.0).collect();
        log_sum_exp(&t)
    };
    let (lb, lv) = (side(b), side(v));
    if lb == f64::NEG_INFINITY && lv == f64::NEG_INFINITY {
        return None;
    }
    Some(lb - lv - log_prior_b + log_prior_v)
}

pub(crate) fn trend_verdicts(ctx: &mut Context, labels: &[&str]) {
    let grid = ctx.cfg.n_grid.clone();
    for &label in labels {
        let med: Vec<f64> = grid
            .iter()
            .map(|&n| ctx.report.summary(n, &format!("log_bf:{label}"), "median"))
            .collect();
        let increasing = label == "h0_truth";
        ctx.report.verdict(
            &format!(
                "median_log_bf_{}:{label}",
                if increasing { "increasing" } else { "decreasing" }
            ),
            is_monotone(&med, increasing, true),
            fmt_seq(&med),
        );
    }
}

pub fn run_bayes_factor<M>(ctx: &mut Context, model: &M, truth: &M::Param, prior: &AtomicPrior<M::Param>) -> Result<()>
where
    M: AtomicFamily,
    M::Param: ConfigParam,
{
    let cfg = ctx.cfg.clone();
    let (b_spec, v_spec) = (cfg.region("B")?, cfg.region("V")?);
    let mut truths = vec![("h0_truth", truth.clone())];
    if let Some(alt) = &cfg.options.alternative {
        truths.push(("h1_truth", M::Param::from_value(alt, "options.alternative")?));
    }
    for &n in &cfg.n_grid {
        // regions are centred at the configured centre or the H0-side truth
        let b = b_spec.build("B", model, truth, n)?;
        let v = v_spec.build("V", model, truth, n)?;
        let (mb, mv) = (prior.mask(&b), prior.mask(&v));
        if mb.iter().zip(&mv).any(|(x, y)| *x && *y) {
            return Err(config_err("regions", "B and V must be disjoint"));
        }
        let (pb, pv) = (prior.mass_of_mask(&mb), prior.mass_of_mask(&mv));
        if pb <= 0.0 || pv <= 0.0 {
            return Err(config_err(
                "regions",
                format!("prior masses Pi(B) = {pb}, Pi(V) = {pv} must be positive"),
            ));
        }
        for (label, t) in &truths {
            let id = format!("bayes-factor/data/{label}/n={n}");
            let out: Vec<Result<f64>> = ctx.rt.map(cfg.replications, |r| {
                let mut rng = ctx.rt.stream(&id, r as u64);
                let x = model.sample(t, n, &mut rng)?;
                let lw = log_posterior_weights(prior, model, &model.stats(&x));
                log_bayes_factor(&lw, &mb, &mv, pb.ln(), pv.ln()).ok_or_else(|| {
                    Error::Infeasible(format!(
                        "degenerate Bayes factor: Pi(B|x) = Pi(V|x) = 0 at n = {n}, replication {r}, {label}"
                    ))
                })
            });
            for (r, o) in out.into_iter().enumerate() {
                ctx.report.push_replication(n, r, &format!("log_bf:{label}"), o?);
            }
        }
    }
    ctx.report.finalize();
    let labels: Vec<&str> = truths.iter().map(|t| t.0).collect();
    trend_verdicts(ctx, &labels);
    Ok(())
}
