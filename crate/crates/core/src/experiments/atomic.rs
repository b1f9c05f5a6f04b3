//! Drivers for families with atomic priors: consistency, rates, point
//! estimation, test equivalence and the two direct diagnostics.

use super::config::{config_err, ConfigParam, ExperimentConfig, TestKind, TestSpec};
use super::report::{fmt_seq, is_decreasing_trend, ExperimentReport};
use super::Context;
use crate::error::{Error, Result};
use crate::measures::{total_variation, FiniteDist};
use crate::models::{CategoricalModel, FreedmanModel, Model, UniformLocationModel, ENUMERATION_LIMIT};
use crate::numeric::{ksum, log_sum_exp};
use crate::priors::{log_posterior_weights, AtomicPrior, Region};
use crate::remote_contiguity::{
    criterion_implication, draw_log_ratios, quantile_curve, tail_curve, trimmed_tv_curve, uniform_tightness_check,
    PredictivePair, RateSpec, RcVerdict, Threshold, DEFAULT_EPSILON, MAX_TIGHTNESS_ATOMS,
};
use crate::testing::{
    barycentre_lr_test, bayes_test_power, covering_test, enumerate_logliks, freedman_escape_test,
    hellinger_transform_power_bound, minimax_hellinger_bound, uniform_location_test, weak_neighborhood_test,
    PowerMethod, Side, TestFunction,
};

/// Families whose experiments run on atomic priors.
pub trait AtomicFamily: Model
where
    Self::Param: ConfigParam,
{
    /// Family-specific test constructions.
    fn special_test(
        &self,
        spec: &TestSpec,
        _cfg: &ExperimentConfig,
        _truth: &Self::Param,
        _prior: &AtomicPrior<Self::Param>,
        _n: usize,
    ) -> Result<TestFunction<Self::Sample>> {
        Err(config_err(
            "options.test.kind",
            format!("test {:?} is not available for the {} family", spec.kind, self.family()),
        ))
    }
}

fn eps_of(spec: &TestSpec, n: usize) -> Result<f64> {
    let e = spec
        .eps
        .ok_or_else(|| config_err("options.test.eps", "required for this test"))?;
    let r = spec.rate.as_ref().map_or(Ok(1.0), |r| r.value(n))?;
    Ok(e * r)
}

fn dist_test<M: Model<Param = FiniteDist, Sample = Vec<usize>>>(
    model: &M,
    spec: &TestSpec,
    cfg: &ExperimentConfig,
    truth: &FiniteDist,
    prior: &AtomicPrior<FiniteDist>,
    n: usize,
) -> Result<TestFunction<Vec<usize>>> {
    match spec.kind {
        TestKind::Covering => {
            let res = spec
                .resolution
                .ok_or_else(|| config_err("options.test.resolution", "covering test needs a grid resolution"))?;
            let grid = super::config::simplex_grid(truth.len(), res, false)?;
            Ok(covering_test(truth, eps_of(spec, n)?, &grid, prior, model)?.test)
        }
        TestKind::Weak => {
            let f = spec
                .f
                .clone()
                .ok_or_else(|| config_err("options.test.f", "weak test needs f"))?;
            weak_neighborhood_test(truth, &f, eps_of(spec, n)?)
        }
        TestKind::Escape => {
            let symbols = cfg
                .prior
                .symbols
                .clone()
                .ok_or_else(|| config_err("prior.symbols", "escape test needs forbidden symbols"))?;
            freedman_escape_test(&symbols)
        }
        other => Err(config_err(
            "options.test.kind",
            format!("{other:?} is not available for {}", model.family()),
        )),
    }
}

impl AtomicFamily for CategoricalModel {
    fn special_test(
        &self,
        spec: &TestSpec,
        cfg: &ExperimentConfig,
        truth: &FiniteDist,
        prior: &AtomicPrior<FiniteDist>,
        n: usize,
    ) -> Result<TestFunction<Vec<usize>>> {
        dist_test(self, spec, cfg, truth, prior, n)
    }
}

impl AtomicFamily for FreedmanModel {
    fn special_test(
        &self,
        spec: &TestSpec,
        cfg: &ExperimentConfig,
        truth: &FiniteDist,
        prior: &AtomicPrior<FiniteDist>,
        n: usize,
    ) -> Result<TestFunction<Vec<usize>>> {
        dist_test(self, spec, cfg, truth, prior, n)
    }
}

impl AtomicFamily for UniformLocationModel {
    fn special_test(
        &self,
        spec: &TestSpec,
        _cfg: &ExperimentConfig,
        truth: &f64,
        _prior: &AtomicPrior<f64>,
        n: usize,
    ) -> Result<TestFunction<Vec<f64>>> {
        if spec.kind != TestKind::UniformLocation {
            return Err(config_err(
                "options.test.kind",
                format!("{:?} is not available for uniform_location", spec.kind),
            ));
        }
        let eps = eps_of(spec, n)?;
        match spec.side {
            Some(side) => uniform_location_test(*truth, eps, side),
            None => Ok(TestFunction::max_of(
                "uniform_location_two_sided",
                vec![
                    uniform_location_test(*truth, eps, Side::Right)?,
                    uniform_location_test(*truth, eps, Side::Left)?,
                ],
            )),
        }
    }
}

/// `phi(x) = Pi(V | x)` under the full prior.
pub fn posterior_test<M: Model>(
    model: &M,
    prior: &AtomicPrior<M::Param>,
    v: &Region<M::Param>,
) -> TestFunction<M::Sample> {
    let (model, prior) = (model.clone(), prior.clone());
    let mask = prior.mask(v);
    TestFunction::new("posterior", move |x: &M::Sample| {
        let lw = log_posterior_weights(&prior, &model, &model.stats(x));
        let all = log_sum_exp(&lw);
        if all == f64::NEG_INFINITY {
            return 0.5;
        }
        let inside: Vec<f64> = lw.iter().zip(&mask).filter(|p| *p.1).map(|p| *p.0).collect();
        (log_sum_exp(&inside) - all).exp()
    })
}

pub fn build_test<M: AtomicFamily>(
    model: &M,
    cfg: &ExperimentConfig,
    truth: &M::Param,
    prior: &AtomicPrior<M::Param>,
    b: &Region<M::Param>,
    v: &Region<M::Param>,
    n: usize,
) -> Result<TestFunction<M::Sample>>
where
    M::Param: ConfigParam,
{
    let spec = cfg.options.test.clone().unwrap_or(TestSpec {
        kind: TestKind::Barycentre,
        eps: None,
        rate: None,
        side: None,
        f: None,
        resolution: None,
    });
    match spec.kind {
        TestKind::Barycentre => barycentre_lr_test(prior, b, v, model),
        TestKind::Posterior => Ok(posterior_test(model, prior, v)),
        _ => model.special_test(&spec, cfg, truth, prior, n),
    }
}

/// Configured power method, or exact enumeration when feasible and Monte
/// Carlo otherwise.
pub fn power_method<M: Model>(model: &M, cfg: &ExperimentConfig, seed: u64, n: usize) -> PowerMethod {
    if let Some(m) = cfg.options.power {
        return m;
    }
    match model.sample_space_size(n) {
        Some(s) if s <= ENUMERATION_LIMIT => PowerMethod::Exact,
        _ => PowerMethod::MonteCarlo {
            replications: cfg.replications.max(100),
            seed,
        },
    }
}

/// `(Pi(V|x), Pi(B|x))`, or `None` when no atom survives the data.
fn posterior_masses<M: Model>(
    model: &M,
    prior: &AtomicPrior<M::Param>,
    x: &M::Sample,
    v_mask: &[bool],
    b_mask: Option<&[bool]>,
) -> Option<(f64, f64)> {
    let lw = log_posterior_weights(prior, model, &model.stats(x));
    let all = log_sum_exp(&lw);
    if all == f64::NEG_INFINITY {
        return None;
    }
    let mass = |mask: &[bool]| {
        let inside: Vec<f64> = lw.iter().zip(mask).filter(|p| *p.1).map(|p| *p.0).collect();
        (log_sum_exp(&inside) - all).exp()
    };
    Some((mass(v_mask), b_mask.map_or(f64::NAN, mass)))
}

/// Per-replication posterior masses of `V_n` (and `B_n`) under data from
/// the truth; domination failures become NaN rows plus a tally.
fn posterior_mass_rows<M: AtomicFamily>(
    ctx: &mut Context,
    model: &M,
    truth: &M::Param,
    prior: &AtomicPrior<M::Param>,
    with_b: bool,
) -> Result<()>
where
    M::Param: ConfigParam,
{
    let cfg = ctx.cfg.clone();
    let v_spec = cfg.region("V")?;
    let b_spec = if with_b { cfg.regions.get("B") } else { None };
    for &n in &cfg.n_grid {
        let v = v_spec.build("V", model, truth, n)?;
        let v_mask = prior.mask(&v);
        let b_mask = match b_spec {
            Some(s) => Some(prior.mask(&s.build("B", model, truth, n)?)),
            None => None,
        };
        let id = format!("{}/data/n={n}", cfg.experiment.name());
        let out: Vec<Result<Option<(f64, f64)>>> = ctx.rt.map(cfg.replications, |r| {
            let mut rng = ctx.rt.stream(&id, r as u64);
            let x = model.sample(truth, n, &mut rng)?;
            Ok(posterior_masses(model, prior, &x, &v_mask, b_mask.as_deref()))
        });
        let mut failures = 0;
        for (r, o) in out.into_iter().enumerate() {
            let o = o?;
            failures += usize::from(o.is_none());
            let (mv, mb) = o.unwrap_or((f64::NAN, f64::NAN));
            ctx.report.push_replication(n, r, "post_v_mass", mv);
            if b_mask.is_some() {
                ctx.report.push_replication(n, r, "post_b_mass", mb);
            }
            ctx.report
                .push_replication(n, r, "domination_failure", if o.is_none() { 1.0 } else { 0.0 });
        }
        ctx.report.tally("domination_failure", failures);
    }
    Ok(())
}

/// `(n, integrated power, its standard error, optional bound)` per grid point.
type PowerRow = (usize, f64, f64, Option<f64>);

/// Measured test power per `n` as diagnostic rows; returns the totals.
fn power_rows<M: AtomicFamily>(
    ctx: &mut Context,
    model: &M,
    truth: &M::Param,
    prior: &AtomicPrior<M::Param>,
    with_bounds: bool,
) -> Result<Vec<PowerRow>>
where
    M::Param: ConfigParam,
{
    let cfg = ctx.cfg.clone();
    let (b_spec, v_spec) = (cfg.region("B")?, cfg.region("V")?);
    let mut out = Vec::new();
    for &n in &cfg.n_grid {
        let b = b_spec.build("B", model, truth, n)?;
        let v = v_spec.build("V", model, truth, n)?;
        let test = build_test(model, &cfg, truth, prior, &b, &v, n)?;
        let method = power_method(model, &cfg, ctx.rt.seed, n);
        let p = bayes_test_power(&test, prior, &b, &v, model, n, method)?;
        let stderr = (p.stderr_one.powi(2) + p.stderr_two.powi(2)).sqrt();
        ctx.report.push_diagnostic(n, "power_type_one", p.type_one);
        ctx.report.push_diagnostic(n, "power_type_two", p.type_two);
        ctx.report.push_diagnostic(n, "power_total", p.total);
        ctx.report.push_diagnostic(n, "power_stderr", stderr);
        let mut bound = p.bound;
        if with_bounds {
            if matches!(method, PowerMethod::Exact) && test.descriptor().kind == "barycentre_lr" {
                let h = hellinger_transform_power_bound(prior, &b, &v, model, n, None)?;
                ctx.report.push_diagnostic(n, "hellinger_transform_bound", h.bound);
                ctx.report.push_diagnostic(n, "hellinger_transform_alpha", h.alpha);
                bound = Some(bound.map_or(h.bound, |x| x.min(h.bound)));
            }
            if let Some(eps) = cfg.options.epsilon {
                let mm = minimax_hellinger_bound(prior.mass(&b), prior.mass(&v), n, eps);
                ctx.report.push_diagnostic(n, "minimax_bound", mm);
            }
        }
        if let Some(bd) = bound {
            ctx.report.push_diagnostic(n, "power_bound", bd);
        }
        out.push((n, p.total, stderr, bound));
    }
    Ok(out)
}

/// Criterion (ii) curves for the local prior predictive of `B_n` at rate
/// `options.rate`, one per delta; returns the minimum over delta at each n.
fn rc_rows<M: AtomicFamily>(
    ctx: &mut Context,
    model: &M,
    truth: &M::Param,
    prior: &AtomicPrior<M::Param>,
    rate: &RateSpec,
) -> Result<Vec<f64>>
where
    M::Param: ConfigParam,
{
    let cfg = ctx.cfg.clone();
    let b_spec = cfg.region("B")?.clone();
    let mut regions = Vec::new();
    for &n in &cfg.n_grid {
        regions.push((n, b_spec.build("B", model, truth, n)?));
    }
    let pair = PredictivePair::new(model, truth.clone(), prior, &cfg.n_grid, |n| {
        regions
            .iter()
            .find(|r| r.0 == n)
            .expect("region built for every grid point")
            .1
            .clone()
    })?;
    let reps = cfg.replications.max(100);
    let d = draw_log_ratios(&pair, "rc/draws", &cfg.n_grid, reps, &ctx.rt)?;
    let deltas = cfg
        .options
        .deltas
        .clone()
        .unwrap_or_else(crate::remote_contiguity::default_delta_grid);
    let mut best = vec![f64::INFINITY; cfg.n_grid.len()];
    for &delta in &deltas {
        let c = tail_curve(&d, rate, delta)?;
        for (i, &n) in cfg.n_grid.iter().enumerate() {
            ctx.report
                .push_diagnostic(n, &format!("rc_ii:delta={delta}"), c.estimates[i]);
            ctx.report
                .push_diagnostic(n, &format!("rc_ii_stderr:delta={delta}"), c.stderrs[i]);
            best[i] = best[i].min(c.estimates[i]);
        }
        ctx.report.rc_curves.push(c);
    }
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        ctx.report.push_diagnostic(n, "rc_violations", d.violations()[i] as f64);
    }
    Ok(best)
}

fn medians(report: &ExperimentReport, grid: &[usize], stat: &str) -> Vec<f64> {
    grid.iter().map(|&n| report.summary(n, stat, "median")).collect()
}

pub fn run_consistency<M: AtomicFamily>(
    ctx: &mut Context,
    model: &M,
    truth: &M::Param,
    prior: &AtomicPrior<M::Param>,
) -> Result<()>
where
    M::Param: ConfigParam,
{
    let cfg = ctx.cfg.clone();
    posterior_mass_rows(ctx, model, truth, prior, true)?;
    let has_b = cfg.regions.contains_key("B");
    if has_b {
        match power_rows(ctx, model, truth, prior, false) {
            Ok(p) => {
                let totals: Vec<f64> = p.iter().map(|x| x.1).collect();
                ctx.report
                    .record("test_power_decreasing", is_decreasing_trend(&totals), fmt_seq(&totals));
            }
            Err(Error::EmptyRegion(r)) => {
                ctx.report
                    .record("test_power", false, format!("region {r} has prior mass 0"))
            }
            Err(e) => return Err(e),
        }
    }
    let mut rc_best = None;
    if let (true, Some(rate)) = (has_b, cfg.options.rate.clone()) {
        rc_best = Some(rc_rows(ctx, model, truth, prior, &rate)?);
    }
    let report = &mut ctx.report;
    report.finalize();
    let med = medians(report, &cfg.n_grid, "post_v_mass");
    report.verdict("median_v_mass_decreasing", is_decreasing_trend(&med), fmt_seq(&med));
    let last = *cfg.n_grid.last().expect("grid validated nonempty");
    if let Some(t) = cfg.verdicts.max_mean_v_mass {
        let m = report.summary(last, "post_v_mass", "mean");
        report.verdict(
            "mean_v_mass_below",
            m < t,
            format!("mean {m:.4e} at n = {last}, threshold {t}"),
        );
    }
    if let Some(best) = rc_best {
        let t = cfg.verdicts.max_rc_tail.unwrap_or(DEFAULT_EPSILON);
        let b = *best.last().expect("nonempty");
        let name = "rc_ii_below";
        let detail = format!("min over delta of criterion (ii) at n = {last}: {b:.4e}, threshold {t}");
        if cfg.verdicts.max_rc_tail.is_some() {
            report.verdict(name, b < t, detail);
        } else {
            report.record(name, b < t, detail);
        }
    }
    let failures = report.tallies.get("domination_failure").copied().unwrap_or(0);
    report.record(
        "no_domination_failures",
        failures == 0,
        format!("{failures} replications"),
    );
    Ok(())
}

pub fn run_rates<M: AtomicFamily>(
    ctx: &mut Context,
    model: &M,
    truth: &M::Param,
    prior: &AtomicPrior<M::Param>,
) -> Result<()>
where
    M::Param: ConfigParam,
{
    let cfg = ctx.cfg.clone();
    let b_spec = cfg.region("B")?;
    let mut masses = Vec::new();
    for &n in &cfg.n_grid {
        let b = b_spec.build("B", model, truth, n)?;
        let m = prior.mass(&b);
        if m <= 0.0 {
            return Err(config_err("regions.B", format!("prior mass of B_n is 0 at n = {n}")));
        }
        ctx.report.push_diagnostic(n, "prior_mass_b", m);
        masses.push(m);
    }
    if let (Some(a), Some(b)) = (&cfg.options.rate, &cfg.options.lower_rate) {
        let ratios: Vec<f64> = cfg
            .n_grid
            .iter()
            .map(|&n| Ok((a.log_value(n)? - b.log_value(n)?).exp()))
            .collect::<Result<_>>()?;
        if ratios.len() > 1 && !(ratios.last() < ratios.first()) {
            return Err(config_err("options.rate", "a_n / b_n must decrease over the grid"));
        }
    }
    posterior_mass_rows(ctx, model, truth, prior, false)?;
    let power = power_rows(ctx, model, truth, prior, false)?;
    let mut rc_best = None;
    if let Some(rate) = cfg.options.rate.clone() {
        rc_best = Some(rc_rows(ctx, model, truth, prior, &rate)?);
    }
    let lower: Vec<f64> = match &cfg.options.lower_rate {
        Some(b) => cfg.n_grid.iter().map(|&n| b.value(n)).collect::<Result<_>>()?,
        None => masses.clone(),
    };
    let quotient: Vec<f64> = power.iter().zip(&lower).map(|(p, b)| p.1 / b).collect();
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        ctx.report.push_diagnostic(n, "power_over_lower_rate", quotient[i]);
    }
    let report = &mut ctx.report;
    report.finalize();
    report.verdict(
        "power_over_lower_rate_decreasing",
        is_decreasing_trend(&quotient),
        fmt_seq(&quotient),
    );
    if cfg.options.lower_rate.is_some() {
        let ok = masses.iter().zip(&lower).all(|(m, b)| m >= b);
        report.verdict(
            "prior_mass_lower_bound",
            ok,
            format!("masses {} vs b_n {}", fmt_seq(&masses), fmt_seq(&lower)),
        );
    }
    let med = medians(report, &cfg.n_grid, "post_v_mass");
    report.verdict("median_v_mass_decreasing", is_decreasing_trend(&med), fmt_seq(&med));
    if let Some(best) = rc_best {
        let b = *best.last().expect("nonempty");
        report.record("rc_ii_below", b < DEFAULT_EPSILON, format!("{b:.4e}"));
    }
    Ok(())
}

pub fn run_point_estimator<M>(
    ctx: &mut Context,
    model: &M,
    truth: &FiniteDist,
    prior: &AtomicPrior<FiniteDist>,
) -> Result<()>
where
    M: AtomicFamily<Param = FiniteDist>,
{
    let cfg = ctx.cfg.clone();
    let functions = cfg.options.functions.clone().unwrap_or_default();
    for (j, f) in functions.iter().enumerate() {
        if f.len() != truth.len() || f.iter().any(|v| !v.is_finite()) {
            return Err(config_err(
                format!("options.functions[{j}]"),
                "bounded function needs one finite value per cell",
            ));
        }
    }
    for &n in &cfg.n_grid {
        let id = format!("point-estimator/data/n={n}");
        let out: Vec<Result<Option<Vec<f64>>>> = ctx.rt.map(cfg.replications, |r| {
            let mut rng = ctx.rt.stream(&id, r as u64);
            let x = model.sample(truth, n, &mut rng)?;
            let lw = log_posterior_weights(prior, model, &model.stats(&x));
            let all = log_sum_exp(&lw);
            if all == f64::NEG_INFINITY {
                return Ok(None);
            }
            let w: Vec<f64> = lw.iter().map(|l| (l - all).exp()).collect();
            let pred: Vec<f64> = (0..truth.len())
                .map(|k| ksum(prior.atoms().iter().zip(&w).map(|(a, wi)| wi * a.mass(k))))
                .collect();
            let pred = FiniteDist::from_weights(pred)?;
            let mut stats = vec![total_variation(&pred, truth)?];
            for f in &functions {
                stats.push((pred.expectation(f)? - truth.expectation(f)?).abs());
            }
            Ok(Some(stats))
        });
        for (r, o) in out.into_iter().enumerate() {
            let o = o?;
            ctx.report.tally("domination_failure", usize::from(o.is_none()));
            let vals = o.unwrap_or_else(|| vec![f64::NAN; functions.len() + 1]);
            ctx.report.push_replication(n, r, "tv_predictive", vals[0]);
            for j in 0..functions.len() {
                ctx.report
                    .push_replication(n, r, &format!("f{j}_abs_error"), vals[j + 1]);
            }
        }
    }
    let report = &mut ctx.report;
    report.finalize();
    let med = medians(report, &cfg.n_grid, "tv_predictive");
    report.verdict("median_tv_decreasing", is_decreasing_trend(&med), fmt_seq(&med));
    if let Some(t) = cfg.verdicts.max_median_tv {
        let last = *med.last().expect("nonempty");
        report.verdict("median_tv_below", last < t, format!("{last:.4e} vs {t}"));
    }
    for j in 0..functions.len() {
        let m = medians(report, &cfg.n_grid, &format!("f{j}_abs_error"));
        report.record(&format!("f{j}_error_decreasing"), is_decreasing_trend(&m), fmt_seq(&m));
    }
    Ok(())
}

/// Exact power of `phi = Pi(V|.)` next to the per-atom posterior errors
/// `P_theta Pi(V|X)` on `B` and `P_theta Pi(B|X)` on `V`.
pub fn run_test_equiv<M>(ctx: &mut Context, model: &M, truth: &M::Param, prior: &AtomicPrior<M::Param>) -> Result<()>
where
    M: AtomicFamily,
    M::Param: ConfigParam,
{
    const REPORTED_ATOMS: usize = 50;
    let cfg = ctx.cfg.clone();
    let (b_spec, v_spec) = (cfg.region("B")?, cfg.region("V")?);
    let mut power = Vec::new();
    let mut worst = Vec::new();
    for &n in &cfg.n_grid {
        let b = b_spec.build("B", model, truth, n)?;
        let v = v_spec.build("V", model, truth, n)?;
        let (mb, mv) = (prior.mask(&b), prior.mask(&v));
        if prior.mass_of_mask(&mv) <= 0.0 {
            return Err(config_err("regions.V", "prior mass of V is 0"));
        }
        if prior.mass_of_mask(&mb) <= 0.0 {
            return Err(config_err("regions.B", "prior mass of B is 0"));
        }
        if mb.iter().zip(&mv).any(|(x, y)| *x && *y) {
            return Err(config_err("regions", "B and V overlap"));
        }
        let logw: Vec<f64> = prior.weights().iter().map(|w| w.ln()).collect();
        let k = prior.len();
        let mut err = vec![Vec::new(); k];
        let mut p0_terms = Vec::new();
        enumerate_logliks(model, prior, n, &mut |x, ll| {
            let lw: Vec<f64> = ll.iter().zip(&logw).map(|(l, w)| l + w).collect();
            let all = log_sum_exp(&lw);
            let side = |mask: &[bool]| {
                let t: Vec<f64> = lw.iter().zip(mask).filter(|p| *p.1).map(|p| *p.0).collect();
                (log_sum_exp(&t) - all).exp()
            };
            let (pv, pb) = if all == f64::NEG_INFINITY {
                (0.5, 0.5)
            } else {
                (side(&mv), side(&mb))
            };
            for j in 0..k {
                if ll[j] == f64::NEG_INFINITY {
                    continue;
                }
                let e = if mb[j] {
                    pv
                } else if mv[j] {
                    pb
                } else {
                    continue;
                };
                err[j].push(ll[j].exp() * e);
            }
            p0_terms.push(model.loglik(truth, x).exp() * pv);
        })?;
        let errs: Vec<f64> = err.into_iter().map(ksum).collect();
        let w = prior.weights();
        let t1 = ksum((0..k).filter(|&j| mb[j]).map(|j| w[j] * errs[j]));
        let t2 = ksum((0..k).filter(|&j| mv[j]).map(|j| w[j] * errs[j]));
        let max_b = (0..k)
            .filter(|&j| mb[j] && w[j] > 0.0)
            .map(|j| errs[j])
            .fold(0.0, f64::max);
        let max_v = (0..k)
            .filter(|&j| mv[j] && w[j] > 0.0)
            .map(|j| errs[j])
            .fold(0.0, f64::max);
        let r = &mut ctx.report;
        r.push_diagnostic(n, "power_type_one", t1);
        r.push_diagnostic(n, "power_type_two", t2);
        r.push_diagnostic(n, "power_total", t1 + t2);
        r.push_diagnostic(n, "max_atom_error_b", max_b);
        r.push_diagnostic(n, "max_atom_error_v", max_v);
        r.push_diagnostic(n, "p0_posterior_v_mass", ksum(p0_terms));
        if k <= REPORTED_ATOMS {
            for j in (0..k).filter(|&j| (mb[j] || mv[j]) && w[j] > 0.0) {
                r.push_diagnostic(n, &format!("atom_error:{j}"), errs[j]);
            }
        }
        power.push(t1 + t2);
        worst.push(max_b.max(max_v));
    }
    let report = &mut ctx.report;
    report.finalize();
    let (pt, at) = (is_decreasing_trend(&power), is_decreasing_trend(&worst));
    report.verdict(
        "power_vs_atom_errors_agree",
        pt == at,
        format!("power {} atom errors {}", fmt_seq(&power), fmt_seq(&worst)),
    );
    report.record("power_decreasing", pt, fmt_seq(&power));
    report.record("atom_errors_decreasing", at, fmt_seq(&worst));
    let p0: Vec<f64> = cfg
        .n_grid
        .iter()
        .map(|&n| report.diagnostic(n, "p0_posterior_v_mass").unwrap_or(f64::NAN))
        .collect();
    report.record("frequentist_v_mass_decreasing", is_decreasing_trend(&p0), fmt_seq(&p0));
    Ok(())
}

pub fn run_test_power<M>(ctx: &mut Context, model: &M, truth: &M::Param, prior: &AtomicPrior<M::Param>) -> Result<()>
where
    M: AtomicFamily,
    M::Param: ConfigParam,
{
    let p = power_rows(ctx, model, truth, prior, true)?;
    let report = &mut ctx.report;
    report.finalize();
    let totals: Vec<f64> = p.iter().map(|x| x.1).collect();
    report.verdict("power_decreasing", is_decreasing_trend(&totals), fmt_seq(&totals));
    let ok = p
        .iter()
        .all(|(_, t, se, b)| b.is_none_or(|b| *t <= b + 3.0 * se + 1e-12));
    report.verdict("power_within_bound", ok, "total error at most the bound plus 3 stderr");
    Ok(())
}

/// All remote-contiguity criteria on one set of draws against the local
/// prior predictive of `B_n`.
pub fn run_rc_diagnose<M>(ctx: &mut Context, model: &M, truth: &M::Param, prior: &AtomicPrior<M::Param>) -> Result<()>
where
    M: AtomicFamily,
    M::Param: ConfigParam,
{
    let cfg = ctx.cfg.clone();
    let rate = cfg
        .options
        .rate
        .clone()
        .ok_or_else(|| config_err("options.rate", "rc-diagnose needs a rate a_n"))?;
    rate.validate(&cfg.n_grid)
        .map_err(|e| config_err("options.rate", e.to_string()))?;
    let b_spec = cfg.region("B")?.clone();
    let mut regions = Vec::new();
    for &n in &cfg.n_grid {
        regions.push((n, b_spec.build("B", model, truth, n)?));
    }
    let pair = PredictivePair::new(model, truth.clone(), prior, &cfg.n_grid, |n| {
        regions.iter().find(|r| r.0 == n).expect("built").1.clone()
    })?;
    let reps = cfg.replications.max(100);
    let d = draw_log_ratios(&pair, "rc/draws", &cfg.n_grid, reps, &ctx.rt)?;
    let eps = cfg.options.epsilon.unwrap_or(DEFAULT_EPSILON);
    let threshold = Threshold::Constant(eps);
    let deltas = cfg
        .options
        .deltas
        .clone()
        .unwrap_or_else(crate::remote_contiguity::default_delta_grid);
    let mut ii_verdicts = Vec::new();
    let mut implication_ok = true;
    for &delta in &deltas {
        let ii = tail_curve(&d, &rate, delta)?;
        ii_verdicts.push((delta, ii.verdict(&threshold)?));
        let imp = criterion_implication(&d, &rate, delta, eps)?;
        implication_ok &= imp
            .iv_at_inverse_delta
            .estimates
            .iter()
            .zip(&imp.ii.estimates)
            .all(|(a, b)| a <= b);
        ctx.report.record(
            &format!("iv_at_c=delta:delta={delta}"),
            !imp.ii_passes || imp.stated_holds,
            format!(
                "(ii) passes: {}, (iv) at c = delta within eps: {}",
                imp.ii_passes, imp.stated_holds
            ),
        );
        ctx.report.rc_curves.push(ii);
    }
    let cs = cfg.options.cs.clone().unwrap_or_else(|| vec![1.0]);
    for &c in &cs {
        ctx.report.rc_curves.push(trimmed_tv_curve(&d, &rate, c)?);
    }
    let levels = cfg
        .options
        .quantile_levels
        .clone()
        .unwrap_or_else(|| vec![0.5, 0.9, 0.99]);
    let q = quantile_curve(&d, &rate, &levels)?;
    let tight = q.tight();
    ctx.report.rc_curves.push(q);
    for curve in ctx.report.rc_curves.clone() {
        for row in curve.rows() {
            let n: usize = row[1].parse().expect("grid point");
            ctx.report.push_diagnostic(
                n,
                &format!("rc_{}:{}", row[0], row[2]),
                row[3].parse().unwrap_or(f64::NAN),
            );
        }
    }
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        ctx.report.push_diagnostic(n, "rc_violations", d.violations()[i] as f64);
    }
    let passing = ii_verdicts.iter().find(|v| v.1 == RcVerdict::ConsistentWith);
    let summary: Vec<String> = ii_verdicts.iter().map(|(d, v)| format!("delta={d}: {v}")).collect();
    ctx.report.record("criterion_ii", passing.is_some(), summary.join("; "));
    ctx.report
        .record("criterion_v_tight", tight, "quantiles finite and not doubling");
    ctx.report.verdict(
        "iv_at_c=1/delta_below_ii",
        implication_ok,
        "(iv) at c = 1/delta never exceeds (ii)",
    );
    let last_b = &regions.last().expect("nonempty").1;
    let inside = prior
        .mask(last_b)
        .iter()
        .zip(prior.weights())
        .filter(|(m, w)| **m && **w > 0.0)
        .count();
    if b_spec.rate.is_none() && inside > 0 && inside <= MAX_TIGHTNESS_ATOMS {
        let t = uniform_tightness_check(
            prior,
            last_b,
            model,
            truth,
            &rate,
            &cfg.n_grid,
            reps,
            1.0 - eps,
            &ctx.rt,
        )?;
        ctx.report
            .push_diagnostic(*cfg.n_grid.last().expect("nonempty"), "tightness_bound", t.bound);
        ctx.report
            .record("uniform_tightness", t.tight, format!("M = {:.4e}", t.bound));
        if let Some(h) = t.implication_holds {
            ctx.report.verdict(
                "tightness_implies_ii",
                h,
                "criterion (ii) at delta = 1/(2M) within 2 eps",
            );
        }
    }
    ctx.report.finalize();
    Ok(())
}
