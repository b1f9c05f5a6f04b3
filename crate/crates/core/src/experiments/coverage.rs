//! Frequentist coverage of credible sets and of their metric enlargements.

use super::atomic::AtomicFamily;
use super::config::{config_err, ConfigParam};
use super::Context;
use crate::error::{Error, Result};
use crate::models::Metric;
use crate::numeric::{mean, wilson_interval};
use crate::priors::{credible_set, enlarge_credible, posterior_from_stats, AtomicPrior, CredibleShape};

const WILSON_Z: f64 = 1.96;

/// Per replication: `theta0 in D_n`, `theta0 in C_n` and the level slack.
type Indicators = Vec<Option<(bool, bool, f64)>>;

pub fn run_coverage<M>(ctx: &mut Context, model: &M, truth: &M::Param, prior: &AtomicPrior<M::Param>) -> Result<()>
where
    M: AtomicFamily,
    M::Param: ConfigParam,
{
    let cfg = ctx.cfg.clone();
    let opts = &cfg.options;
    let metric = opts.metric.unwrap_or(Metric::Hellinger);
    let shapes = opts
        .shapes
        .clone()
        .unwrap_or_else(|| vec![CredibleShape::MetricBall, CredibleShape::UpperLevelSet]);
    let enlargement = opts
        .enlargement
        .as_ref()
        .ok_or_else(|| config_err("options.enlargement", "coverage needs an enlargement rate"))?;
    let mut min_c: f64 = 1.0;
    let mut c_dominates = true;
    for &n in &cfg.n_grid {
        let level = match (opts.level, &opts.level_rate) {
            (Some(l), _) => l,
            (None, Some(a)) => 1.0 - a.value(n)?,
            (None, None) => return Err(config_err("options.level", "coverage needs a level or a level_rate")),
        };
        let eps = enlargement.value(n)?;
        ctx.report.push_diagnostic(n, "level", level);
        ctx.report.push_diagnostic(n, "enlargement", eps);
        let id = format!("coverage/data/n={n}");
        let out: Vec<Result<Indicators>> = ctx.rt.map(cfg.replications, |r| {
            let mut rng = ctx.rt.stream(&id, r as u64);
            let x = model.sample(truth, n, &mut rng)?;
            let post = match posterior_from_stats(prior, model, &model.stats(&x)) {
                Ok(p) => p,
                Err(Error::DominationFailure { .. }) => return Ok(vec![None; shapes.len()]),
                Err(e) => return Err(e),
            };
            shapes
                .iter()
                .map(|&shape| {
                    let d = credible_set(&post, model, level, shape, metric)?;
                    let c = enlarge_credible(&d, eps, metric)?;
                    Ok(Some((d.region.contains(truth), c.contains(truth), d.slack)))
                })
                .collect()
        });
        let out = out.into_iter().collect::<Result<Vec<_>>>()?;
        for (j, shape) in shapes.iter().enumerate() {
            let tag = shape_tag(*shape);
            let (mut cd, mut cc, mut slacked) = (Vec::new(), Vec::new(), 0);
            for (r, o) in out.iter().enumerate() {
                let (d, c, s) = match o[j] {
                    Some((d, c, s)) => (f64::from(u8::from(d)), f64::from(u8::from(c)), s),
                    None => (f64::NAN, f64::NAN, f64::NAN),
                };
                c_dominates &= !(d > c);
                slacked += usize::from(s > 1e-12);
                ctx.report.push_replication(n, r, &format!("cover_d:{tag}"), d);
                ctx.report.push_replication(n, r, &format!("cover_c:{tag}"), c);
                ctx.report.push_replication(n, r, &format!("slack:{tag}"), s);
                if o[j].is_some() {
                    cd.push(d);
                    cc.push(c);
                }
            }
            let failures = out.len() - cd.len();
            ctx.report.tally("credible_slack", slacked);
            ctx.report.tally("domination_failure", failures);
            for (name, v) in [("d", &cd), ("c", &cc)] {
                let hits = v.iter().filter(|&&x| x == 1.0).count();
                let (lo, hi) = wilson_interval(hits, v.len(), WILSON_Z);
                let cov = if v.is_empty() { f64::NAN } else { mean(v) };
                ctx.report.push_diagnostic(n, &format!("coverage_{name}:{tag}"), cov);
                ctx.report
                    .push_diagnostic(n, &format!("coverage_{name}_wilson_lo:{tag}"), lo);
                ctx.report
                    .push_diagnostic(n, &format!("coverage_{name}_wilson_hi:{tag}"), hi);
            }
            let cov_c = if cc.is_empty() { f64::NAN } else { mean(&cc) };
            min_c = if cov_c.is_nan() || min_c.is_nan() {
                f64::NAN
            } else {
                min_c.min(cov_c)
            };
        }
    }
    ctx.report.finalize();
    ctx.report.verdict(
        "c_covers_at_least_d",
        c_dominates,
        "theta0 in D_n implies theta0 in C_n in every replication",
    );
    if let Some(t) = cfg.verdicts.min_coverage {
        ctx.report.verdict(
            "min_coverage",
            min_c >= t,
            format!("smallest coverage of C_n {min_c:.4} against {t}"),
        );
    }
    Ok(())
}

fn shape_tag(shape: CredibleShape) -> &'static str {
    match shape {
        CredibleShape::MetricBall => "metric_ball",
        CredibleShape::UpperLevelSet => "upper_level_set",
    }
}
