//! Dirichlet-process posteriors seen through nested partitions of the line:
//! binned counts reduce each partition to a finite Dirichlet model.

use rand_distr::{Beta as BetaDist, Distribution, Normal as NormalDist, Uniform as UniformDist};
use statrs::distribution::{Beta, ContinuousCDF, Normal, Uniform};

use super::config::{config_err, Generator, PriorKind};
use super::report::{fmt_seq, is_monotone};
use super::Context;
use crate::error::{Error, Result};
use crate::measures::{total_variation, FiniteDist};
use crate::models::bin_data;
use crate::numeric::{ksum, mean};
use crate::priors::{posterior_update_dirichlet, DirichletPrior};

const DEFAULT_SAMPLES: usize = 2000;
const DEFAULT_TV_RADIUS: f64 = 0.1;

/// Generator mass of each cell; the outer cells extend to infinity.
/// Per replication: per-partition `(TV-ball mass, mean TV)` and whether aggregation was exact.
type ReplicationRecord = (Vec<(f64, f64)>, bool);

pub fn cell_probabilities(generator: &Generator, breakpoints: &[f64]) -> Result<FiniteDist> {
    let cdf: Box<dyn Fn(f64) -> f64> = match *generator {
        Generator::Normal { mean, sd } => {
            let d = Normal::new(mean, sd).map_err(|e| config_err("model.generator", e.to_string()))?;
            Box::new(move |x| d.cdf(x))
        }
        Generator::Uniform { low, high } => {
            let d = Uniform::new(low, high).map_err(|e| config_err("model.generator", e.to_string()))?;
            Box::new(move |x| d.cdf(x))
        }
        Generator::Beta { a, b } => {
            let d = Beta::new(a, b).map_err(|e| config_err("model.generator", e.to_string()))?;
            Box::new(move |x| d.cdf(x.clamp(0.0, 1.0)))
        }
    };
    let k = breakpoints.len() - 1;
    let inner: Vec<f64> = breakpoints[1..k].iter().map(|&b| cdf(b)).collect();
    let mut cuts = vec![0.0];
    cuts.extend(inner);
    cuts.push(1.0);
    let p: Vec<f64> = cuts.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    FiniteDist::from_weights(p)
}

fn draw(generator: &Generator, n: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
    let bad = |e: String| config_err("model.generator", e);
    Ok(match *generator {
        Generator::Normal { mean, sd } => {
            let d = NormalDist::new(mean, sd).map_err(|e| bad(e.to_string()))?;
            (0..n).map(|_| d.sample(rng)).collect()
        }
        Generator::Uniform { low, high } => {
            let d = UniformDist::new(low, high).map_err(|e| bad(e.to_string()))?;
            (0..n).map(|_| d.sample(rng)).collect()
        }
        Generator::Beta { a, b } => {
            let d = BetaDist::new(a, b).map_err(|e| bad(e.to_string()))?;
            (0..n).map(|_| d.sample(rng)).collect()
        }
    })
}

/// Fine-cell index ranges of each coarse cell; `None` unless every coarse
/// breakpoint is a fine one and the endpoints agree.
fn nesting(fine: &[f64], coarse: &[f64]) -> Option<Vec<(usize, usize)>> {
    if coarse.first() != fine.first() || coarse.last() != fine.last() {
        return None;
    }
    let idx: Vec<usize> = coarse
        .iter()
        .map(|b| fine.iter().position(|f| f == b))
        .collect::<Option<_>>()?;
    Some(idx.windows(2).map(|w| (w[0], w[1])).collect())
}

fn aggregate(p: &[f64], groups: &[(usize, usize)]) -> Vec<f64> {
    groups.iter().map(|&(a, b)| ksum(p[a..b].iter().copied())).collect()
}

/// Dirichlet parameters `c mu(A_i)` of the uniform base measure on
/// `[low, high]`.
fn base_params(breakpoints: &[f64], low: f64, high: f64, c: f64) -> Result<Vec<f64>> {
    let k = breakpoints.len() - 1;
    breakpoints
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let a = if i == 0 { f64::NEG_INFINITY } else { w[0] };
            let b = if i == k - 1 { f64::INFINITY } else { w[1] };
            let len = (b.min(high) - a.max(low)).max(0.0);
            let m = c * len / (high - low);
            if m > 0.0 {
                Ok(m)
            } else {
                Err(config_err(
                    "options.partitions",
                    format!(
                        "cell [{}, {}) has base measure zero; every cell needs mu(A_i) > 0",
                        w[0], w[1]
                    ),
                ))
            }
        })
        .collect()
}

pub fn run_tailfree(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.cfg.clone();
    if cfg.prior.kind != PriorKind::DirichletProcess {
        return Err(config_err("prior.kind", "tailfree needs a dirichlet_process prior"));
    }
    let generator = cfg
        .model
        .generator
        .ok_or_else(|| config_err("model.generator", "tailfree needs a data generator"))?;
    let mut parts = cfg
        .options
        .partitions
        .clone()
        .ok_or_else(|| config_err("options.partitions", "required"))?;
    if parts.is_empty() {
        return Err(config_err("options.partitions", "need at least one partition"));
    }
    for (j, p) in parts.iter().enumerate() {
        if p.len() < 2 || p.iter().any(|b| !b.is_finite()) || p.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err(
                format!("options.partitions[{j}]"),
                "breakpoints must be finite and increasing",
            ));
        }
    }
    parts.sort_by_key(|p| p.len());
    let fine = parts.last().expect("nonempty").clone();
    let groups = parts
        .iter()
        .enumerate()
        .map(|(j, p)| {
            nesting(&fine, p).ok_or_else(|| config_err(format!("options.partitions[{j}]"), "partitions must be nested"))
        })
        .collect::<Result<Vec<_>>>()?;
    let c = cfg.prior.concentration.unwrap_or(1.0);
    if !(c > 0.0 && c.is_finite()) {
        return Err(config_err(
            "prior.concentration",
            "Dirichlet concentration must be positive",
        ));
    }
    let low = cfg.prior.low.unwrap_or(fine[0]);
    let high = cfg.prior.high.unwrap_or(*fine.last().expect("nonempty"));
    if !(low < high) {
        return Err(config_err("prior.low", "base interval needs low < high"));
    }
    let fine_alpha = base_params(&fine, low, high, c)?;
    let prior = DirichletPrior::new(fine_alpha.clone()).map_err(|e| config_err("prior", e.to_string()))?;
    let coarse_alpha = parts
        .iter()
        .map(|p| base_params(p, low, high, c))
        .collect::<Result<Vec<_>>>()?;
    let targets = parts
        .iter()
        .map(|p| cell_probabilities(&generator, p))
        .collect::<Result<Vec<_>>>()?;
    let samples = cfg.options.mc_samples.unwrap_or(DEFAULT_SAMPLES);
    let radius = cfg.options.tv_radius.unwrap_or(DEFAULT_TV_RADIUS);
    let (lo, hi) = (fine[0], *fine.last().expect("nonempty"));

    let mut coarse_dominates = true;
    let mut aggregation_exact = true;
    let mut ball_means = vec![Vec::new(); parts.len()];
    for &n in &cfg.n_grid {
        let data_id = format!("tailfree/data/n={n}");
        let post_id = format!("tailfree/posterior/n={n}");
        let out: Vec<Result<ReplicationRecord>> = ctx.rt.map(cfg.replications, |r| {
            let mut rng = ctx.rt.stream(&data_id, r as u64);
            let x: Vec<f64> = draw(&generator, n, &mut rng)?
                .into_iter()
                .map(|v| v.clamp(lo, hi))
                .collect();
            let counts = bin_data(&x, &fine)?.counts;
            let post = posterior_update_dirichlet(&prior, &counts)?;
            // the aggregated fine posterior is the coarse-partition posterior
            let mut exact = true;
            for (j, p) in parts.iter().enumerate() {
                let direct: Vec<f64> = bin_data(&x, p)?
                    .counts
                    .iter()
                    .zip(&coarse_alpha[j])
                    .map(|(&k, a)| a + k as f64)
                    .collect();
                let agg = aggregate(post.alpha(), &groups[j]);
                exact &= agg
                    .iter()
                    .zip(&direct)
                    .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
            let mut rng = ctx.rt.stream(&post_id, r as u64);
            let mut tv = vec![Vec::with_capacity(samples); parts.len()];
            for _ in 0..samples {
                let p = post.sample(&mut rng);
                for (j, g) in groups.iter().enumerate() {
                    let q = FiniteDist::from_weights(aggregate(p.probs(), g))?;
                    tv[j].push(total_variation(&q, &targets[j])?);
                }
            }
            let stats = tv
                .iter()
                .map(|t| {
                    (
                        t.iter().filter(|&&d| d < radius).count() as f64 / samples as f64,
                        mean(t),
                    )
                })
                .collect();
            Ok::<_, Error>((stats, exact))
        });
        let out = out.into_iter().collect::<Result<Vec<_>>>()?;
        for (r, (stats, exact)) in out.iter().enumerate() {
            aggregation_exact &= *exact;
            for (j, (ball, tv)) in stats.iter().enumerate() {
                ctx.report
                    .push_replication(n, r, &format!("ball_mass:partition={j}"), *ball);
                ctx.report
                    .push_replication(n, r, &format!("mean_tv:partition={j}"), *tv);
            }
            // TV contracts under aggregation, so coarser balls hold more mass
            coarse_dominates &= stats.windows(2).all(|w| w[0].0 >= w[1].0);
        }
        for (j, m) in ball_means.iter_mut().enumerate() {
            m.push(mean(&out.iter().map(|o| o.0[j].0).collect::<Vec<_>>()));
        }
    }
    ctx.report.finalize();
    for (j, m) in ball_means.iter().enumerate() {
        let last = *m.last().expect("nonempty grid");
        ctx.report.verdict(
            &format!("posterior_concentrates:partition={j}"),
            is_monotone(m, true, false) && last >= 0.5,
            format!("{} cells, mean TV-ball mass {}", parts[j].len() - 1, fmt_seq(m)),
        );
    }
    ctx.report.verdict(
        "coarse_ball_mass_at_least_fine",
        coarse_dominates,
        "in every replication the coarser partition's ball mass dominates",
    );
    ctx.report.verdict(
        "aggregation_exact",
        aggregation_exact,
        "aggregated fine posterior parameters equal the coarse posterior parameters",
    );
    Ok(())
}
