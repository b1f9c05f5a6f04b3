//! Sparse normal means under a spike-and-slab prior: exact posterior mass
//! of the region of sparse but distant parameters.

use super::config::{config_err, PriorKind, RegionKind};
use super::report::{fmt_seq, is_monotone};
use super::Context;
use crate::error::Result;
use crate::models::{Model, SparseMeansModel};
use crate::numeric::mean;
use crate::priors::{spike_slab_posterior_exact, Slab, SparsityPrior, SpikeSlabPrior};

const DEFAULT_BINS: usize = 400;

/// `M^2 p_n log(n / p_n)`, the squared radius of the excluded ball.
pub fn sparse_v_radius_sq(m: f64, p_n: usize, n: usize) -> f64 {
    m * m * p_n as f64 * (n as f64 / p_n as f64).ln()
}

/// Heavier tails rank higher.
fn tail_rank(slab: &Slab) -> u8 {
    match slab {
        Slab::Uniform { .. } => 0,
        Slab::Normal { .. } => 1,
        Slab::Laplace { .. } => 2,
        Slab::Cauchy { .. } => 3,
    }
}

pub fn run_sparse_means(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.cfg.clone();
    if cfg.prior.kind != PriorKind::SpikeSlab {
        return Err(config_err("prior.kind", "sparse means needs a spike_slab prior"));
    }
    let slab = cfg.prior.slab.ok_or_else(|| config_err("prior.slab", "required"))?;
    if slab.log_lipschitz_constant().is_none() {
        return Err(config_err(
            "prior.slab",
            "the slab must be log-Lipschitz (laplace or cauchy)",
        ));
    }
    let sparsity = cfg.prior.sparsity.clone().unwrap_or(SparsityPrior::Uniform);
    let v_spec = cfg.region("V")?;
    if v_spec.kind != RegionKind::SparseV {
        return Err(config_err("regions.V.kind", "sparse means needs a sparse_v region"));
    }
    let p_n = v_spec.p_n.ok_or_else(|| config_err("regions.V.p_n", "required"))?;
    let m = v_spec.m.ok_or_else(|| config_err("regions.V.m", "required"))?;
    let a = v_spec.a.unwrap_or(1.0);
    let signals = cfg.options.signals.clone().unwrap_or_else(|| vec![2.0, 5.0, 8.0]);
    let bins = cfg.options.bins.unwrap_or(DEFAULT_BINS);
    let mut slabs = vec![("", slab)];
    if let Some(alt) = cfg.options.alt_slab {
        slabs.push((":alt", alt));
    }
    let model = SparseMeansModel::new();
    let mut in_signal = true;
    let mut per_n = Vec::new();
    for &n in &cfg.n_grid {
        if p_n == 0 || p_n >= n {
            return Err(config_err("regions.V.p_n", format!("need 0 < p_n < n = {n}")));
        }
        let cap = cfg.prior.cap.unwrap_or(n);
        let priors = slabs
            .iter()
            .map(|(tag, s)| Ok((*tag, SpikeSlabPrior::new(n, &sparsity, *s, cap)?)))
            .collect::<Result<Vec<_>>>()?;
        let radius_sq = sparse_v_radius_sq(m, p_n, n);
        let max_support = (a * p_n as f64).floor() as usize;
        ctx.report.push_diagnostic(n, "v_radius_sq", radius_sq);
        let id = format!("sparse-means/noise/n={n}");
        let out: Vec<Result<Vec<[f64; 3]>>> = ctx.rt.map(cfg.replications, |r| {
            let mut rng = ctx.rt.stream(&id, r as u64);
            let noise = model.sample(&vec![0.0; n], n, &mut rng)?;
            let mut row = Vec::new();
            for (_, prior) in &priors {
                for &s in &signals {
                    let theta0: Vec<f64> = (0..n).map(|i| if i < p_n { s } else { 0.0 }).collect();
                    let x: Vec<f64> = noise.iter().zip(&theta0).map(|(e, t)| e + t).collect();
                    let post = spike_slab_posterior_exact(prior, &x)?;
                    let b = post.v_mass(&theta0, max_support, radius_sq, bins)?;
                    row.push([b.estimate(), b.lower, b.upper]);
                }
            }
            Ok(row)
        });
        let out = out.into_iter().collect::<Result<Vec<_>>>()?;
        for (r, row) in out.iter().enumerate() {
            for (si, (tag, _)) in slabs.iter().enumerate() {
                for (k, s) in signals.iter().enumerate() {
                    let [est, lo, hi] = row[si * signals.len() + k];
                    ctx.report
                        .push_replication(n, r, &format!("v_mass:signal={s}{tag}"), est);
                    ctx.report
                        .push_replication(n, r, &format!("v_mass_lower:signal={s}{tag}"), lo);
                    ctx.report
                        .push_replication(n, r, &format!("v_mass_upper:signal={s}{tag}"), hi);
                }
            }
        }
        let means: Vec<f64> = (0..signals.len())
            .map(|k| mean(&out.iter().map(|row| row[k][0]).collect::<Vec<_>>()))
            .collect();
        in_signal &= is_monotone(&means, false, true);
        per_n.push(means);
    }
    ctx.report.finalize();
    ctx.report.verdict(
        "v_mass_decreasing_in_signal",
        in_signal,
        format!(
            "mean V-mass per signal {}",
            per_n.iter().map(|m| fmt_seq(m)).collect::<Vec<_>>().join(" ")
        ),
    );
    for (k, s) in signals.iter().enumerate() {
        let over_n: Vec<f64> = per_n.iter().map(|m| m[k]).collect();
        ctx.report.record(
            &format!("v_mass_decreasing_in_n:signal={s}"),
            is_monotone(&over_n, false, false),
            fmt_seq(&over_n),
        );
    }
    if let (Some(alt), Some(&s)) = (cfg.options.alt_slab, signals.last()) {
        let n = *cfg.n_grid.last().expect("validated nonempty grid");
        let main = ctx.report.summary(n, &format!("v_mass:signal={s}"), "mean");
        let other = ctx.report.summary(n, &format!("v_mass:signal={s}:alt"), "mean");
        let (heavy, light) = if tail_rank(&slab) >= tail_rank(&alt) {
            (main, other)
        } else {
            (other, main)
        };
        ctx.report.record(
            "heavier_tail_smaller_v_mass",
            heavy <= light,
            format!("at signal {s}, n = {n}: primary {main:.4e}, alternative {other:.4e}"),
        );
    }
    Ok(())
}
