//! Freedman-type inconsistency: atoms that forbid a symbol die once it is
//! observed, leaving all posterior mass on the wrong law `Q`.

use super::config::{config_err, PriorKind};
use super::report::fmt_seq;
use super::{dist_setup, Context};
use crate::error::Result;
use crate::measures::total_variation;
use crate::models::{FreedmanModel, Model};
use crate::numeric::{ksum, log_sum_exp};
use crate::priors::log_posterior_weights;
use crate::testing::{freedman_escape_expectation, freedman_escape_union_bound};

/// Per grid point: `(Pi({Q}|x^n) or NaN on domination failure, tau <= n)`.
type PathRecord = (Option<usize>, Vec<(f64, bool)>);

pub fn run_freedman(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.cfg.clone();
    if cfg.prior.kind != PriorKind::Freedman {
        return Err(config_err(
            "prior.kind",
            "the freedman experiment needs a freedman prior",
        ));
    }
    let (truth, prior) = dist_setup(&cfg)?;
    let model = FreedmanModel::new(truth.len())?;
    let symbols = cfg.prior.symbols.clone().unwrap_or_default();
    let beta = prior.weights()[0];
    let q = prior.atoms()[0].clone();
    let n_max = *cfg.n_grid.last().expect("validated nonempty grid");

    let out: Vec<Result<PathRecord>> = ctx.rt.map(cfg.replications, |r| {
        let mut rng = ctx.rt.stream("freedman/data", r as u64);
        let path = model.sample(&truth, n_max, &mut rng)?;
        let tau = first_all_seen(&path, &symbols);
        let rows = cfg
            .n_grid
            .iter()
            .map(|&n| {
                let lw = log_posterior_weights(&prior, &model, &model.stats(&path[..n].to_vec()));
                let all = log_sum_exp(&lw);
                let q_mass = if all == f64::NEG_INFINITY {
                    f64::NAN
                } else {
                    (lw[0] - all).exp()
                };
                (q_mass, tau.is_some_and(|t| t <= n))
            })
            .collect();
        Ok((tau, rows))
    });
    let out = out.into_iter().collect::<Result<Vec<_>>>()?;

    let mut q_one_after_tau = true;
    let mut dead_after_tau = true;
    let mut cdf_ok = true;
    let (mut emp, mut exact) = (Vec::new(), Vec::new());
    for (gi, &n) in cfg.n_grid.iter().enumerate() {
        let mut failures = 0;
        let mut hits = 0;
        for (r, (_, rows)) in out.iter().enumerate() {
            let (q_mass, seen) = rows[gi];
            let failed = q_mass.is_nan();
            failures += usize::from(failed);
            hits += usize::from(seen);
            if seen {
                q_one_after_tau &= q_mass == 1.0;
                dead_after_tau &= failed;
            }
            ctx.report.push_replication(n, r, "q_mass", q_mass);
            ctx.report.push_replication(n, r, "tau_le_n", f64::from(u8::from(seen)));
            ctx.report.push_replication(
                n,
                r,
                "q_mass_is_one_after_tau",
                if seen {
                    f64::from(u8::from(q_mass == 1.0))
                } else {
                    f64::NAN
                },
            );
            ctx.report
                .push_replication(n, r, "domination_failure", f64::from(u8::from(failed)));
        }
        ctx.report.tally("domination_failure", failures);

        // escape test expectations: under every P_m some symbol is forbidden
        let mut terms = Vec::new();
        for (a, &w) in prior.atoms()[1..].iter().zip(&prior.weights()[1..]) {
            terms.push(w * freedman_escape_expectation(a, &symbols, n)?);
        }
        let b_mix = ksum(terms);
        let b_total = ksum(prior.weights()[1..].iter().copied());
        let b_exp = if b_total > 0.0 { b_mix / b_total } else { 0.0 };
        let p0_exp = freedman_escape_expectation(&truth, &symbols, n)?;
        ctx.report.push_diagnostic(n, "escape_expectation_b", b_exp);
        ctx.report.push_diagnostic(n, "escape_expectation_p0", p0_exp);
        ctx.report.push_diagnostic(
            n,
            "escape_union_bound",
            freedman_escape_union_bound(&truth, &symbols, n),
        );

        let freq = hits as f64 / cfg.replications as f64;
        let se = (p0_exp * (1.0 - p0_exp) / cfg.replications as f64).sqrt();
        ctx.report.push_diagnostic(n, "tau_cdf_empirical", freq);
        ctx.report.push_diagnostic(n, "tau_cdf_stderr", se);
        cdf_ok &= (freq - p0_exp).abs() <= 3.0 * se + f64::EPSILON;
        cdf_ok &= b_exp == 0.0;
        emp.push(freq);
        exact.push(p0_exp);
    }
    for (r, (tau, _)) in out.iter().enumerate() {
        ctx.report
            .push_replication(n_max, r, "tau", tau.map_or(f64::INFINITY, |t| t as f64));
    }
    ctx.report.finalize();

    let b_zero = cfg
        .n_grid
        .iter()
        .all(|&n| ctx.report.diagnostic(n, "escape_expectation_b") == Some(0.0));
    if beta > 0.0 {
        ctx.report.verdict(
            "q_mass_one_after_tau",
            q_one_after_tau,
            "Pi({Q}|x^n) = 1 exactly whenever every forbidden symbol has appeared",
        );
    } else {
        ctx.report.verdict(
            "total_domination_failure_after_tau",
            dead_after_tau,
            "with Q excluded no atom survives once every forbidden symbol has appeared",
        );
    }
    ctx.report.verdict(
        "escape_expectation_b_zero",
        b_zero,
        "local prior predictive expectation of the escape test",
    );
    ctx.report.verdict(
        "tau_cdf_matches_closed_form",
        cdf_ok,
        format!(
            "empirical {} against inclusion-exclusion {}",
            fmt_seq(&emp),
            fmt_seq(&exact)
        ),
    );
    let wrong_limit = total_variation(&q, &truth)? > 0.0;
    let concentrated = *emp.last().expect("nonempty grid") > 0.5;
    let reproduced = beta > 0.0 && wrong_limit && q_one_after_tau && concentrated && b_zero;
    ctx.report.verdict(
        "inconsistency_reproduced",
        reproduced,
        if reproduced { "reproduced" } else { "not reproduced" },
    );
    Ok(())
}

/// First sample size at which every symbol has appeared.
fn first_all_seen(path: &[usize], symbols: &[usize]) -> Option<usize> {
    let mut missing: Vec<usize> = symbols.to_vec();
    for (i, x) in path.iter().enumerate() {
        missing.retain(|s| s != x);
        if missing.is_empty() {
            return Some(i + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::FiniteDist;

    #[test]
    fn hitting_time() {
        assert_eq!(first_all_seen(&[3, 1, 3, 2, 0], &[1, 2]), Some(4));
        assert_eq!(first_all_seen(&[3, 1, 3], &[1, 2]), None);
        assert_eq!(first_all_seen(&[2], &[2]), Some(1));
    }

    #[test]
    fn single_symbol_is_geometric() {
        let p = FiniteDist::new(vec![0.5, 0.25, 0.25]).unwrap();
        for n in [1, 2, 5, 10] {
            let e = freedman_escape_expectation(&p, &[0], n).unwrap();
            assert!((e - (1.0 - 0.5f64.powi(n as i32))).abs() < 1e-15);
        }
    }
}
