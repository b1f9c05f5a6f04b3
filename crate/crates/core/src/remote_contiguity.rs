//! Finite-`n` diagnostics for remote contiguity of a truth sequence `Q_n`
//! with respect to reference laws `P_n` (typically local prior predictives).
//!
//! All criteria are computed from one matrix of log likelihood ratios
//! `log dP_n/dQ_n(X)`, `X ~ Q_n`, so that criteria evaluated on the same
//! configuration share their draws.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{kl_divergence, FiniteDist};
use crate::models::{CategoricalModel, Model};
use crate::numeric::{ksum, mean, median, quantile, std_err};
use crate::priors::{local_prior_predictive, AtomicPrior, Predictive, Region};
use crate::rng::{Runtime, StreamRng};

/// Shape of a rate sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    /// `exp(-c n)`.
    Exponential,
    /// `n^-k`.
    Power,
    /// `exp(-c n eps_n^2)` with constant `eps` or an `eps` table.
    ExpNEpsSq,
    /// `(ln n)^j n^-k`.
    LogPower,
    /// Explicit `(n, a_n)` pairs.
    Table,
}

/// A positive, nonincreasing rate sequence `a_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSpec {
    pub kind: RateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Positive multiplier, default 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// `(n, value)` pairs: `eps_n` for `exp_n_eps_sq`, `a_n` for `table`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(usize, f64)>>,
}

impl RateSpec {
    pub fn exponential(c: f64) -> Self {
        Self {
            kind: RateKind::Exponential,
            c: Some(c),
            k: None,
            j: None,
            eps: None,
            scale: None,
            table: None,
        }
    }

    pub fn power(k: f64) -> Self {
        Self {
            kind: RateKind::Power,
            c: None,
            k: Some(k),
            j: None,
            eps: None,
            scale: None,
            table: None,
        }
    }

    pub fn exp_n_eps_sq(c: f64, eps: f64) -> Self {
        Self {
            kind: RateKind::ExpNEpsSq,
            c: Some(c),
            k: None,
            j: None,
            eps: Some(eps),
            scale: None,
            table: None,
        }
    }

    pub fn table(values: Vec<(usize, f64)>) -> Self {
        Self {
            kind: RateKind::Table,
            c: None,
            k: None,
            j: None,
            eps: None,
            scale: None,
            table: Some(values),
        }
    }

    pub fn log_power(j: f64, k: f64) -> Self {
        Self {
            kind: RateKind::LogPower,
            c: None,
            k: Some(k),
            j: Some(j),
            eps: None,
            scale: None,
            table: None,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = Some(scale);
        self
    }

    fn need(v: Option<f64>, name: &str, kind: &str) -> Result<f64> {
        match v {
            Some(x) if x.is_finite() => Ok(x),
            _ => Err(Error::Rate(format!("`{kind}` rate needs a finite `{name}`"))),
        }
    }

    fn lookup(&self, n: usize) -> Result<f64> {
        let t = self
            .table
            .as_ref()
            .ok_or_else(|| Error::Rate("rate needs a `table`".into()))?;
        t.iter()
            .find(|(m, _)| *m == n)
            .map(|p| p.1)
            .ok_or_else(|| Error::Rate(format!("rate table has no entry for n = {n}")))
    }

    /// `log a_n`.
    pub fn log_value(&self, n: usize) -> Result<f64> {
        let nf = n as f64;
        let out = match self.kind {
            RateKind::Exponential => -Self::need(self.c, "c", "exponential")? * nf,
            RateKind::Power => -Self::need(self.k, "k", "power")? * nf.ln(),
            RateKind::ExpNEpsSq => {
                let c = Self::need(self.c, "c", "exp_n_eps_sq")?;
                let eps = match self.eps {
                    Some(e) => e,
                    None => self.lookup(n)?,
                };
                -c * nf * eps * eps
            }
            RateKind::LogPower => {
                let j = Self::need(self.j, "j", "log_power")?;
                let k = Self::need(self.k, "k", "log_power")?;
                if n < 2 {
                    return Err(Error::Rate("`log_power` rate needs n >= 2".into()));
                }
                j * nf.ln().ln() - k * nf.ln()
            }
            RateKind::Table => {
                let v = self.lookup(n)?;
                if !(v > 0.0) {
                    return Err(Error::Rate(format!("rate value {v} at n = {n} is not positive")));
                }
                v.ln()
            }
        };
        let scale = self.scale.unwrap_or(1.0);
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Rate(format!("rate scale {scale} must be positive")));
        }
        let out = out + scale.ln();
        if out.is_nan() {
            return Err(Error::Rate(format!("rate undefined at n = {n}")));
        }
        Ok(out)
    }

    pub fn value(&self, n: usize) -> Result<f64> {
        self.log_value(n).map(f64::exp)
    }

    /// Checks positivity and monotonicity on `grid`, and that the sequence
    /// decreases from the first to the last grid point.
    pub fn validate(&self, grid: &[usize]) -> Result<()> {
        let logs: Vec<f64> = grid.iter().map(|&n| self.log_value(n)).collect::<Result<_>>()?;
        if logs.contains(&f64::NEG_INFINITY) {
            return Err(Error::Rate("rate vanishes on the grid".into()));
        }
        if logs.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Rate("rate is not nonincreasing on the grid".into()));
        }
        if logs.len() >= 2 && logs[logs.len() - 1] >= logs[0] {
            return Err(Error::Rate("rate does not decrease over the grid".into()));
        }
        Ok(())
    }
}

/// Pass threshold of a criterion: a constant or a rate `sigma_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threshold {
    Constant(f64),
    Rate(RateSpec),
}

impl Threshold {
    pub fn at(&self, n: usize) -> Result<f64> {
        match self {
            Threshold::Constant(c) => Ok(*c),
            Threshold::Rate(r) => r.value(n),
        }
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Constant(DEFAULT_EPSILON)
    }
}

pub const DEFAULT_EPSILON: f64 = 0.02;

pub fn default_delta_grid() -> Vec<f64> {
    vec![1e-3, 1e-2, 1e-1, 1.0]
}

/// Draws from `Q_n` together with `log dP_n/dQ_n` at the draw.
pub trait LogRatioSampler: Sync {
    /// `log dP_n/dQ_n(X)` for `X ~ Q_n`; `-inf` where `P_n` vanishes.
    fn draw(&self, n: usize, rng: &mut StreamRng) -> Result<f64>;

    /// `log dQ_n/dP_n(X)` for `X ~ P_n`, when `P_n` can be sampled.
    fn draw_reference(&self, _n: usize, _rng: &mut StreamRng) -> Result<f64> {
        Err(Error::Infeasible("reference law cannot be sampled".into()))
    }
}

/// `Q_n = P_{theta0}^n` against the local prior predictive of a region
/// sequence `B_n`.
pub struct PredictivePair<M: Model> {
    model: M,
    truth: M::Param,
    references: BTreeMap<usize, Predictive<M>>,
}

impl<M: Model> PredictivePair<M> {
    /// `region(n)` gives `B_n`; predictives are built once per grid point.
    pub fn new(
        model: &M,
        truth: M::Param,
        prior: &AtomicPrior<M::Param>,
        n_grid: &[usize],
        region: impl Fn(usize) -> Region<M::Param>,
    ) -> Result<Self> {
        let mut references = BTreeMap::new();
        for &n in n_grid {
            references.insert(n, local_prior_predictive(prior, model, &region(n))?);
        }
        Ok(Self {
            model: model.clone(),
            truth,
            references,
        })
    }

    /// The same reference law `P_n` at every `n`.
    pub fn fixed(model: &M, truth: M::Param, reference: Predictive<M>, n_grid: &[usize]) -> Self {
        Self {
            model: model.clone(),
            truth,
            references: n_grid.iter().map(|&n| (n, reference.clone())).collect(),
        }
    }

    fn reference(&self, n: usize) -> Result<&Predictive<M>> {
        self.references
            .get(&n)
            .ok_or_else(|| Error::Parameter(format!("no reference law prepared for n = {n}")))
    }
}

impl<M: Model> LogRatioSampler for PredictivePair<M> {
    fn draw(&self, n: usize, rng: &mut StreamRng) -> Result<f64> {
        let p = self.reference(n)?;
        let x = self.model.sample(&self.truth, n, rng)?;
        let s = self.model.stats(&x);
        Ok(p.log_density_stats(&s) - self.model.loglik_stats(&self.truth, &s))
    }

    fn draw_reference(&self, n: usize, rng: &mut StreamRng) -> Result<f64> {
        let p = self.reference(n)?;
        let x = p.sample(n, rng)?;
        let s = self.model.stats(&x);
        Ok(self.model.loglik_stats(&self.truth, &s) - p.log_density_stats(&s))
    }
}

/// `R` draws of the log ratio at each grid point, `draws[i][r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRatioDraws {
    pub n_grid: Vec<usize>,
    pub draws: Vec<Vec<f64>>,
}

impl LogRatioDraws {
    pub fn replications(&self) -> usize {
        self.draws.first().map_or(0, |d| d.len())
    }

    /// Number of draws where `P_n` vanishes, per grid point.
    pub fn violations(&self) -> Vec<usize> {
        self.draws
            .iter()
            .map(|d| d.iter().filter(|l| **l == f64::NEG_INFINITY).count())
            .collect()
    }
}

fn check_grid(n_grid: &[usize], replications: usize) -> Result<()> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("n-grid must be nonempty and increasing".into()));
    }
    if replications < 100 {
        return Err(Error::Parameter(format!(
            "remote-contiguity diagnostics need at least 100 replications, got {replications}"
        )));
    }
    Ok(())
}

fn stream_index(grid_pos: usize, r: usize) -> u64 {
    ((grid_pos as u64) << 32) | r as u64
}

/// Draws `log dP_n/dQ_n` under `Q_n`; replication `r` at grid position `i`
/// uses stream `(id, i << 32 | r)`.
pub fn draw_log_ratios(
    sampler: &dyn LogRatioSampler,
    id: &str,
    n_grid: &[usize],
    replications: usize,
    rt: &Runtime,
) -> Result<LogRatioDraws> {
    check_grid(n_grid, replications)?;
    let mut draws = Vec::with_capacity(n_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        let row: Vec<Result<f64>> = rt.map(replications, |r| {
            let mut rng = rt.stream(id, stream_index(i, r));
            sampler.draw(n, &mut rng)
        });
        draws.push(row.into_iter().collect::<Result<Vec<f64>>>()?);
    }
    Ok(LogRatioDraws {
        n_grid: n_grid.to_vec(),
        draws,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// `Q_n(dP_n/dQ_n < delta a_n)`.
    Ii,
    /// `b a_n^-1 P_n(dQ_n/dP_n > b a_n^-1)`; reported raw.
    Iii,
    /// `||Q_n - Q_n ^ c a_n^-1 P_n||`.
    Iv,
    /// Quantiles of `a_n dQ_n/dP_n` under `Q_n`.
    VQuantiles,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Ii => "ii",
            Criterion::Iii => "iii",
            Criterion::Iv => "iv",
            Criterion::VQuantiles => "v-quantiles",
        })
    }
}

/// One curve over the n-grid. For the quantile criterion `estimates[i]`
/// is unused and `quantiles[i][j]` holds the `q_j`-quantile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcCurve {
    pub criterion: Criterion,
    pub n_grid: Vec<usize>,
    /// `delta` for (ii), `c` for (iv), `b` for (iii).
    pub param: f64,
    pub estimates: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub violations: Vec<usize>,
    pub replications: usize,
    pub quantile_levels: Vec<f64>,
    pub quantiles: Vec<Vec<f64>>,
}

/// Finite-`n` verdicts: refutation is exact evidence, consistency is not a
/// proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "n", rename_all = "kebab-case")]
pub enum RcVerdict {
    ConsistentWith,
    RefutedAtN(usize),
    Inconclusive,
}

impl fmt::Display for RcVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RcVerdict::ConsistentWith => f.write_str("consistent-with"),
            RcVerdict::RefutedAtN(n) => write!(f, "refuted-at-n={n}"),
            RcVerdict::Inconclusive => f.write_str("inconclusive"),
        }
    }
}

impl RcCurve {
    /// CSV rows `(criterion, n, delta_or_c, estimate, stderr, violations, replications)`.
    pub fn rows(&self) -> Vec<[String; 7]> {
        let mut out = Vec::new();
        for (i, &n) in self.n_grid.iter().enumerate() {
            if self.criterion == Criterion::VQuantiles {
                for (j, &q) in self.quantile_levels.iter().enumerate() {
                    out.push([
                        self.criterion.to_string(),
                        n.to_string(),
                        q.to_string(),
                        self.quantiles[i][j].to_string(),
                        "NaN".into(),
                        self.violations[i].to_string(),
                        self.replications.to_string(),
                    ]);
                }
            } else {
                out.push([
                    self.criterion.to_string(),
                    n.to_string(),
                    self.param.to_string(),
                    self.estimates[i].to_string(),
                    self.stderrs[i].to_string(),
                    self.violations[i].to_string(),
                    self.replications.to_string(),
                ]);
            }
        }
        out
    }

    pub fn write_csv<W: std::io::Write>(curves: &[RcCurve], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "criterion",
            "n",
            "delta_or_c",
            "estimate",
            "stderr",
            "violations",
            "replications",
        ])?;
        for c in curves {
            for row in c.rows() {
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Verdict for (ii) and (iv) at the largest grid point: consistent when
    /// the estimate is below the threshold, refuted when it exceeds it by
    /// three standard errors (or every draw is a domination violation).
    pub fn verdict(&self, threshold: &Threshold) -> Result<RcVerdict> {
        if !matches!(self.criterion, Criterion::Ii | Criterion::Iv) {
            return Ok(RcVerdict::Inconclusive);
        }
        let i = self.n_grid.len() - 1;
        let n = self.n_grid[i];
        let t = threshold.at(n)?;
        if self.violations[i] == self.replications {
            return Ok(RcVerdict::RefutedAtN(n));
        }
        let est = self.estimates[i];
        if est < t {
            Ok(RcVerdict::ConsistentWith)
        } else if est - 3.0 * self.stderrs[i] > t {
            Ok(RcVerdict::RefutedAtN(n))
        } else {
            Ok(RcVerdict::Inconclusive)
        }
    }

    /// For quantile curves: every quantile finite and no quantile more than
    /// doubling between successive grid points.
    pub fn tight(&self) -> bool {
        if self.criterion != Criterion::VQuantiles {
            return false;
        }
        let finite = self.quantiles.iter().flatten().all(|q| q.is_finite());
        let stable = self
            .quantiles
            .windows(2)
            .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| *b <= 2.0 * a.max(0.0)));
        finite && stable
    }
}

fn binomial_stderr(p: f64, r: usize) -> f64 {
    (p * (1.0 - p) / r as f64).sqrt()
}

/// Criterion (ii) from shared draws.
pub fn tail_curve(d: &LogRatioDraws, rate: &RateSpec, delta: f64) -> Result<RcCurve> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!("delta {delta} must be positive")));
    }
    let r = d.replications();
    let mut est = Vec::new();
    let mut se = Vec::new();
    for (i, &n) in d.n_grid.iter().enumerate() {
        let cut = delta.ln() + rate.log_value(n)?;
        let hits = d.draws[i].iter().filter(|&&l| l < cut).count();
        let p = hits as f64 / r as f64;
        est.push(p);
        se.push(binomial_stderr(p, r));
    }
    Ok(RcCurve {
        criterion: Criterion::Ii,
        n_grid: d.n_grid.clone(),
        param: delta,
        estimates: est,
        stderrs: se,
        violations: d.violations(),
        replications: r,
        quantile_levels: Vec::new(),
        quantiles: Vec::new(),
    })
}

/// Criterion (iv): `E_Q (1 - c a_n^-1 dP_n/dQ_n)^+` from shared draws.
pub fn trimmed_tv_curve(d: &LogRatioDraws, rate: &RateSpec, c: f64) -> Result<RcCurve> {
    if !(c > 0.0) {
        return Err(Error::Parameter(format!("c {c} must be positive")));
    }
    let r = d.replications();
    let mut est = Vec::new();
    let mut se = Vec::new();
    for (i, &n) in d.n_grid.iter().enumerate() {
        let shift = c.ln() - rate.log_value(n)?;
        let vals: Vec<f64> = d.draws[i].iter().map(|&l| (1.0 - (shift + l).exp()).max(0.0)).collect();
        est.push(mean(&vals));
        se.push(std_err(&vals));
    }
    Ok(RcCurve {
        criterion: Criterion::Iv,
        n_grid: d.n_grid.clone(),
        param: c,
        estimates: est,
        stderrs: se,
        violations: d.violations(),
        replications: r,
        quantile_levels: Vec::new(),
        quantiles: Vec::new(),
    })
}

/// Criterion (v): quantiles of `a_n dQ_n/dP_n` from shared draws.
pub fn quantile_curve(d: &LogRatioDraws, rate: &RateSpec, levels: &[f64]) -> Result<RcCurve> {
    if levels.iter().any(|q| !(0.0..=1.0).contains(q)) || levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("quantile levels must be sorted within [0, 1]".into()));
    }
    let mut quantiles = Vec::new();
    for (i, &n) in d.n_grid.iter().enumerate() {
        let la = rate.log_value(n)?;
        // a_n / exp(l); +inf where the reference density vanishes
        let vals: Vec<f64> = d.draws[i].iter().map(|&l| (la - l).exp()).collect();
        quantiles.push(levels.iter().map(|&q| quantile(&vals, q)).collect());
    }
    Ok(RcCurve {
        criterion: Criterion::VQuantiles,
        n_grid: d.n_grid.clone(),
        param: f64::NAN,
        estimates: vec![f64::NAN; d.n_grid.len()],
        stderrs: vec![f64::NAN; d.n_grid.len()],
        violations: d.violations(),
        replications: d.replications(),
        quantile_levels: levels.to_vec(),
        quantiles,
    })
}

/// Criterion (ii) curve: fraction of `Q_n` draws with
/// `log dP_n/dQ_n < log(delta a_n)`.
pub fn lr_lower_tail(
    sampler: &dyn LogRatioSampler,
    rate: &RateSpec,
    delta: f64,
    n_grid: &[usize],
    replications: usize,
    rt: &Runtime,
) -> Result<RcCurve> {
    tail_curve(
        &draw_log_ratios(sampler, "rc/draws", n_grid, replications, rt)?,
        rate,
        delta,
    )
}

/// Criterion (iv) curve on the same draws as [`lr_lower_tail`].
pub fn trimmed_tv(
    sampler: &dyn LogRatioSampler,
    rate: &RateSpec,
    c: f64,
    n_grid: &[usize],
    replications: usize,
    rt: &Runtime,
) -> Result<RcCurve> {
    trimmed_tv_curve(
        &draw_log_ratios(sampler, "rc/draws", n_grid, replications, rt)?,
        rate,
        c,
    )
}

/// Criterion (v) quantile curve on the same draws as [`lr_lower_tail`].
pub fn rescaled_lr_quantiles(
    sampler: &dyn LogRatioSampler,
    rate: &RateSpec,
    levels: &[f64],
    n_grid: &[usize],
    replications: usize,
    rt: &Runtime,
) -> Result<RcCurve> {
    quantile_curve(
        &draw_log_ratios(sampler, "rc/draws", n_grid, replications, rt)?,
        rate,
        levels,
    )
}

/// Raw criterion (iii) curve `b a_n^-1 P_n(dQ_n/dP_n > b a_n^-1)` from
/// draws of the reference law. It carries no verdict: the target value 1
/// after multiplying by `b / a_n -> inf` is numerically ill-conditioned.
pub fn reference_tail_raw(
    sampler: &dyn LogRatioSampler,
    rate: &RateSpec,
    b: f64,
    n_grid: &[usize],
    replications: usize,
    rt: &Runtime,
) -> Result<RcCurve> {
    check_grid(n_grid, replications)?;
    let mut est = Vec::new();
    let mut se = Vec::new();
    for (i, &n) in n_grid.iter().enumerate() {
        let row: Vec<Result<f64>> = rt.map(replications, |r| {
            let mut rng = rt.stream("rc/reference-draws", stream_index(i, r));
            sampler.draw_reference(n, &mut rng)
        });
        let row = row.into_iter().collect::<Result<Vec<f64>>>()?;
        let scale = b.ln() - rate.log_value(n)?;
        let hits = row.iter().filter(|&&l| l > scale).count();
        let p = hits as f64 / replications as f64;
        est.push(scale.exp() * p);
        se.push(scale.exp() * binomial_stderr(p, replications));
    }
    Ok(RcCurve {
        criterion: Criterion::Iii,
        n_grid: n_grid.to_vec(),
        param: b,
        estimates: est,
        stderrs: se,
        violations: vec![0; n_grid.len()],
        replications,
        quantile_levels: Vec::new(),
        quantiles: Vec::new(),
    })
}

/// Criterion (ii) at `(delta, eps)` against (iv) on the same draws, at the
/// stated `c = delta` and at `c = 1/delta`. On every draw with
/// `dP/dQ >= delta a_n` the (iv) integrand at `c = 1/delta` vanishes, so
/// that estimate never exceeds the (ii) estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImplicationReport {
    pub delta: f64,
    pub eps: f64,
    pub ii: RcCurve,
    pub iv_at_delta: RcCurve,
    pub iv_at_inverse_delta: RcCurve,
    /// (ii) below `eps` at every grid point.
    pub ii_passes: bool,
    /// (iv) at `c = delta` within `eps + 3 stderr` at every grid point.
    pub stated_holds: bool,
    pub inverse_holds: bool,
}

pub fn criterion_implication(d: &LogRatioDraws, rate: &RateSpec, delta: f64, eps: f64) -> Result<ImplicationReport> {
    let ii = tail_curve(d, rate, delta)?;
    let iv_at_delta = trimmed_tv_curve(d, rate, delta)?;
    let iv_at_inverse_delta = trimmed_tv_curve(d, rate, 1.0 / delta)?;
    let within = |c: &RcCurve| c.estimates.iter().zip(&c.stderrs).all(|(e, s)| *e <= eps + 3.0 * s);
    Ok(ImplicationReport {
        delta,
        eps,
        ii_passes: ii.estimates.iter().all(|e| *e < eps),
        stated_holds: within(&iv_at_delta),
        inverse_holds: within(&iv_at_inverse_delta),
        ii,
        iv_at_delta,
        iv_at_inverse_delta,
    })
}

/// Criterion (ii) tail fraction is monotone in the rate: for `a'_n >= a_n`
/// the fraction is at least as large.
pub fn rate_monotonicity_holds(d: &LogRatioDraws, small: &RateSpec, large: &RateSpec, delta: f64) -> Result<bool> {
    let a = tail_curve(d, small, delta)?;
    let b = tail_curve(d, large, delta)?;
    Ok(a.estimates.iter().zip(&b.estimates).all(|(x, y)| y >= x))
}

/// Fraction of `P0^n` paths with `log dP^n/dP0^n >= -n eps^2 / 2` for a
/// law `P` with `KL(P0, P) < eps^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlBallReport {
    pub kl: f64,
    pub eps_sq: f64,
    pub n_grid: Vec<usize>,
    pub fractions: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Medians of `log LR + n eps^2 / 2`.
    pub medians: Vec<f64>,
    /// Whether the medians increase along the grid.
    pub medians_increasing: bool,
    pub replications: usize,
}

pub fn kl_ball_lr_bound_check(
    p0: &FiniteDist,
    p: &FiniteDist,
    eps_sq: f64,
    n_grid: &[usize],
    replications: usize,
    rt: &Runtime,
) -> Result<KlBallReport> {
    let kl = kl_divergence(p0, p)?;
    if !(kl < eps_sq) {
        return Err(Error::Precondition(format!(
            "KL(P0, P) = {kl} is not below eps^2 = {eps_sq}"
        )));
    }
    check_grid(n_grid, replications)?;
    let model = CategoricalModel::new(p0.len())?;
    let log_ratio: Vec<f64> = (0..p0.len())
        .map(|k| {
            if p0.mass(k) > 0.0 {
                p.mass(k).ln() - p0.mass(k).ln()
            } else {
                0.0
            }
        })
        .collect();
    let mut fractions = Vec::new();
    let mut stderrs = Vec::new();
    let mut medians = Vec::new();
    for (i, &n) in n_grid.iter().enumerate() {
        let shifted: Vec<Result<f64>> = rt.map(replications, |r| {
            let mut rng = rt.stream("kl-ball-lr", stream_index(i, r));
            let x = model.sample(p0, n, &mut rng)?;
            let counts = model.counts(&x);
            let llr = ksum(counts.iter().zip(&log_ratio).map(|(&c, &l)| c as f64 * l));
            Ok(llr + n as f64 * eps_sq / 2.0)
        });
        let shifted = shifted.into_iter().collect::<Result<Vec<f64>>>()?;
        let frac = shifted.iter().filter(|&&s| s >= 0.0).count() as f64 / replications as f64;
        fractions.push(frac);
        stderrs.push(binomial_stderr(frac, replications));
        medians.push(median(&shifted));
    }
    Ok(KlBallReport {
        kl,
        eps_sq,
        n_grid: n_grid.to_vec(),
        medians_increasing: medians.windows(2).all(|w| w[1] > w[0]),
        fractions,
        stderrs,
        medians,
        replications,
    })
}

/// `P^{Pi|B}(x) <= Pi(C)/Pi(B) P^{Pi|C}(x)` checked on every sample point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescalingReport {
    pub factor: f64,
    pub max_violation: f64,
    /// Sample points where the inequality is an equality (relative 1e-12).
    pub tight_points: usize,
    pub points: usize,
}

pub fn subset_rescaling_check<M: Model>(
    prior: &AtomicPrior<M::Param>,
    b: &Region<M::Param>,
    c: &Region<M::Param>,
    model: &M,
    n: usize,
) -> Result<RescalingReport> {
    for (i, a) in prior.atoms().iter().enumerate() {
        if b.contains(a) && !c.contains(a) {
            return Err(Error::Precondition(format!(
                "atom {i} is in `{}` but not in `{}`",
                b.label(),
                c.label()
            )));
        }
    }
    let (mb, mc) = (prior.mass(b), prior.mass(c));
    if mb <= 0.0 {
        return Err(Error::EmptyRegion(b.label().into()));
    }
    let pb = local_prior_predictive(prior, model, b)?;
    let pc = local_prior_predictive(prior, model, c)?;
    let factor = mc / mb;
    let mut max_violation = f64::NEG_INFINITY;
    let mut tight = 0;
    let mut points = 0;
    model.enumerate(n, &mut |x| {
        let s = model.stats(x);
        let lhs = pb.log_density_stats(&s).exp();
        let rhs = factor * pc.log_density_stats(&s).exp();
        max_violation = max_violation.max(lhs - rhs);
        if (lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300) {
            tight += 1;
        }
        points += 1;
    })?;
    Ok(RescalingReport {
        factor,
        max_violation,
        tight_points: tight,
        points,
    })
}

/// Per-atom quantiles of `a_n dP_{0,n}/dP_{theta,n}` under `P_{0,n}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessReport {
    pub level: f64,
    pub n_grid: Vec<usize>,
    /// `quantiles[atom][i]`, for the positive-weight atoms of `B` in index
    /// order (`atoms`).
    pub atoms: Vec<usize>,
    pub quantiles: Vec<Vec<f64>>,
    /// Common bound `M` on all quantiles; `inf` when not tight.
    pub bound: f64,
    pub tight: bool,
    /// Criterion (ii) at `delta = 1/(2M)` on the local prior predictive of
    /// `B`; uniform tightness implies at most `2 (1 - level)`.
    pub implied_tail: Option<RcCurve>,
    pub implication_holds: Option<bool>,
}

pub const MAX_TIGHTNESS_ATOMS: usize = 1000;

#[allow(clippy::too_many_arguments)]
pub fn uniform_tightness_check<M: Model>(
    prior: &AtomicPrior<M::Param>,
    b: &Region<M::Param>,
    model: &M,
    p0: &M::Param,
    rate: &RateSpec,
    n_grid: &[usize],
    replications: usize,
    level: f64,
    rt: &Runtime,
) -> Result<TightnessReport> {
    check_grid(n_grid, replications)?;
    let atoms: Vec<usize> = (0..prior.len())
        .filter(|&i| prior.weights()[i] > 0.0 && b.contains(&prior.atoms()[i]))
        .collect();
    if atoms.is_empty() {
        return Err(Error::EmptyRegion(b.label().into()));
    }
    if atoms.len() > MAX_TIGHTNESS_ATOMS {
        return Err(Error::Infeasible(format!(
            "{} atoms in the region; at most {MAX_TIGHTNESS_ATOMS}",
            atoms.len()
        )));
    }
    let mut quantiles = vec![Vec::new(); atoms.len()];
    for (i, &n) in n_grid.iter().enumerate() {
        let la = rate.log_value(n)?;
        // one set of truth draws per grid point, shared by all atoms
        let rows: Vec<Result<Vec<f64>>> = rt.map(replications, |r| {
            let mut rng = rt.stream("rc/tightness", stream_index(i, r));
            let x = model.sample(p0, n, &mut rng)?;
            let s = model.stats(&x);
            let l0 = model.loglik_stats(p0, &s);
            Ok(atoms
                .iter()
                .map(|&a| (la + l0 - model.loglik_stats(&prior.atoms()[a], &s)).exp())
                .collect())
        });
        let rows = rows.into_iter().collect::<Result<Vec<Vec<f64>>>>()?;
        for (j, q) in quantiles.iter_mut().enumerate() {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            q.push(quantile(&col, level));
        }
    }
    let bound = quantiles.iter().flatten().copied().fold(0.0, f64::max);
    let tight = bound.is_finite();
    let (implied_tail, implication_holds) = if tight && bound > 0.0 {
        let pair = PredictivePair::new(model, p0.clone(), prior, n_grid, |_| b.clone())?;
        let curve = lr_lower_tail(&pair, rate, 1.0 / (2.0 * bound), n_grid, replications, rt)?;
        let holds = curve
            .estimates
            .iter()
            .zip(&curve.stderrs)
            .all(|(e, s)| *e <= 2.0 * (1.0 - level) + 3.0 * s);
        (Some(curve), Some(holds))
    } else {
        (None, None)
    };
    Ok(TightnessReport {
        level,
        n_grid: n_grid.to_vec(),
        atoms,
        quantiles,
        bound,
        tight,
        implied_tail,
        implication_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FreedmanModel, UniformLocationModel};

    struct Identical;

    impl LogRatioSampler for Identical {
        fn draw(&self, _n: usize, _rng: &mut StreamRng) -> Result<f64> {
            Ok(0.0)
        }
    }

    struct Disjoint;

    impl LogRatioSampler for Disjoint {
        fn draw(&self, _n: usize, _rng: &mut StreamRng) -> Result<f64> {
            Ok(f64::NEG_INFINITY)
        }
    }

    /// Continuous uniform prior on `[theta0, theta0 + 1/n]`: the ratio is
    /// `min(1, n (X_(1) - theta0))` in closed form.
    struct UniformClosedForm;

    impl LogRatioSampler for UniformClosedForm {
        fn draw(&self, n: usize, rng: &mut StreamRng) -> Result<f64> {
            let x = UniformLocationModel.sample(&0.0, n, rng)?;
            let min = x.iter().copied().fold(f64::INFINITY, f64::min);
            Ok((n as f64 * min).min(1.0).ln())
        }
    }

    fn grid() -> Vec<usize> {
        vec![10, 100, 1000]
    }

    #[test]
    fn rate_values_and_validation() {
        assert!((RateSpec::power(1.0).value(500).unwrap() - 1.0 / 500.0).abs() < 1e-18);
        assert!((RateSpec::exp_n_eps_sq(0.5, 0.1).log_value(100).unwrap() + 0.5).abs() < 1e-14);
        let t = RateSpec::table(vec![(10, 0.5), (100, 0.6)]);
        assert!(t.validate(&[10, 100]).is_err());
        assert!(RateSpec::exponential(1.0).validate(&grid()).is_ok());
        let bad = RateSpec {
            kind: RateKind::Power,
            c: Some(1.0),
            k: None,
            j: None,
            eps: None,
            scale: None,
            table: None,
        };
        assert!(matches!(bad.log_value(3), Err(Error::Rate(_))));
    }

    #[test]
    fn identical_laws() {
        let rt = Runtime::new(1, 2);
        let d = draw_log_ratios(&Identical, "id", &grid(), 100, &rt).unwrap();
        let ii = tail_curve(&d, &RateSpec::exponential(1.0), 0.5).unwrap();
        assert!(ii.estimates.iter().all(|&e| e == 0.0));
        let iv = trimmed_tv_curve(&d, &RateSpec::exponential(1.0), 1.0).unwrap();
        assert!(iv.estimates.iter().all(|&e| e == 0.0));
        let rate = RateSpec::power(1.0);
        let q = quantile_curve(&d, &rate, &[0.5, 0.9]).unwrap();
        for (i, &n) in q.n_grid.iter().enumerate() {
            assert!((q.quantiles[i][1] / rate.value(n).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(q.tight());
    }

    #[test]
    fn disjoint_laws() {
        let rt = Runtime::new(1, 1);
        let d = draw_log_ratios(&Disjoint, "dj", &grid(), 100, &rt).unwrap();
        for c in [0.01, 1.0, 100.0] {
            let iv = trimmed_tv_curve(&d, &RateSpec::power(1.0), c).unwrap();
            assert!(iv.estimates.iter().all(|&e| e == 1.0));
        }
        let ii = tail_curve(&d, &RateSpec::power(1.0), 1.0).unwrap();
        assert_eq!(ii.verdict(&Threshold::default()).unwrap(), RcVerdict::RefutedAtN(1000));
        let q = quantile_curve(&d, &RateSpec::power(1.0), &[0.99]).unwrap();
        assert!(!q.tight());
    }

    #[test]
    fn uniform_closed_form_curve_vanishes() {
        let rt = Runtime::new(2, 4);
        for rate in [RateSpec::power(1.0), RateSpec::exponential(0.01)] {
            let iv = trimmed_tv(&UniformClosedForm, &rate, 1.0, &[10, 100, 500], 2000, &rt).unwrap();
            assert!(iv.estimates.last().unwrap() < &0.02, "{iv:?}");
        }
    }

    #[test]
    fn grid_prior_matches_uniform_closed_form() {
        // fine grid on [0, 1/n] approximates the continuous prior
        let m = UniformLocationModel;
        let n_grid = [20, 50];
        let atoms: Vec<f64> = (0..=2000).map(|i| -1.0 + i as f64 * 1e-3).collect();
        let prior = AtomicPrior::uniform(atoms).unwrap();
        let pair = PredictivePair::new(&m, 0.0, &prior, &n_grid, |n| {
            Region::predicate("Bn", move |t: &f64| *t >= -1e-12 && *t <= 1.0 / n as f64 + 1e-12)
        })
        .unwrap();
        let rt = Runtime::new(3, 2);
        let rate = RateSpec::power(1.0);
        let grid_curve = trimmed_tv(&pair, &rate, 0.5, &n_grid, 4000, &rt).unwrap();
        let exact = trimmed_tv(&UniformClosedForm, &rate, 0.5, &n_grid, 4000, &rt).unwrap();
        for i in 0..2 {
            let tol = 4.0 * (grid_curve.stderrs[i] + exact.stderrs[i]) + 0.02;
            assert!((grid_curve.estimates[i] - exact.estimates[i]).abs() < tol);
        }
    }

    #[test]
    fn freedman_region_is_refuted() {
        let k = 20;
        let m = FreedmanModel::new(k).unwrap();
        let symbols = [3usize, 7, 11];
        let mut w = vec![0.7 / 17.0; k];
        for &s in &symbols {
            w[s] = 0.1;
        }
        let p0 = FiniteDist::new(w).unwrap();
        let atoms: Vec<FiniteDist> = symbols
            .iter()
            .map(|&s| {
                let mut v = p0.probs().to_vec();
                v[s] = 0.0;
                FiniteDist::from_weights(v).unwrap()
            })
            .collect();
        let prior = AtomicPrior::uniform(atoms).unwrap();
        let pair = PredictivePair::new(&m, p0, &prior, &[50, 200], |_| Region::all()).unwrap();
        let rt = Runtime::new(4, 2);
        let d = draw_log_ratios(&pair, "fr", &[50, 200], 200, &rt).unwrap();
        assert_eq!(d.violations()[1], 200);
        for rate in [RateSpec::exponential(1.0), RateSpec::power(0.5)] {
            let c = tail_curve(&d, &rate, 1.0).unwrap();
            assert_eq!(c.verdict(&Threshold::default()).unwrap(), RcVerdict::RefutedAtN(200));
        }
        let q = quantile_curve(&d, &RateSpec::power(1.0), &[0.5, 1.0]).unwrap();
        assert_eq!(q.quantiles[1][1], f64::INFINITY);
    }

    #[test]
    fn full_support_prior_consistent_with_remote_contiguity() {
        let m = CategoricalModel::new(3).unwrap();
        let p0 = FiniteDist::new(vec![0.2, 0.3, 0.5]).unwrap();
        let mut atoms = Vec::new();
        for i in 1..20 {
            for j in 1..(20 - i) {
                atoms
                    .push(FiniteDist::new(vec![i as f64 / 20.0, j as f64 / 20.0, (20 - i - j) as f64 / 20.0]).unwrap());
            }
        }
        let prior = AtomicPrior::uniform(atoms).unwrap();
        let p0c = p0.clone();
        let ball = Region::predicate("tv<0.1", move |p: &FiniteDist| {
            crate::measures::total_variation(&p0c, p).unwrap() < 0.1
        });
        let grid = [100, 400, 1600];
        let pair = PredictivePair::new(&m, p0, &prior, &grid, |_| ball.clone()).unwrap();
        let rt = Runtime::new(5, 4);
        let d = draw_log_ratios(&pair, "rc", &grid, 400, &rt).unwrap();
        assert!(d.violations().iter().all(|&v| v == 0));
        let eps = 0.1f64;
        let c = tail_curve(&d, &RateSpec::exp_n_eps_sq(0.5, eps), 1.0).unwrap();
        assert!(c.estimates.last().unwrap() < &0.02, "{c:?}");
        assert!(rate_monotonicity_holds(&d, &RateSpec::exponential(0.01), &RateSpec::power(1.0), 0.1).unwrap());
    }

    #[test]
    fn inverse_delta_implication_is_exact() {
        let rt = Runtime::new(6, 1);
        let d = draw_log_ratios(&UniformClosedForm, "imp", &[10, 100], 500, &rt).unwrap();
        for delta in [1e-3, 1e-2, 0.1, 1.0] {
            let r = criterion_implication(&d, &RateSpec::power(1.0), delta, 0.02).unwrap();
            for (iv, ii) in r.iv_at_inverse_delta.estimates.iter().zip(&r.ii.estimates) {
                assert!(iv <= ii);
            }
        }
    }

    #[test]
    fn kl_ball_fractions() {
        let rt = Runtime::new(7, 2);
        let p0 = FiniteDist::new(vec![0.5, 0.5]).unwrap();
        let same = kl_ball_lr_bound_check(&p0, &p0, 0.01, &[1, 10, 100], 200, &rt).unwrap();
        assert!(same.fractions.iter().all(|&f| f == 1.0));
        let p = FiniteDist::new(vec![0.6, 0.4]).unwrap();
        let kl = kl_divergence(&p0, &p).unwrap();
        assert!(matches!(
            kl_ball_lr_bound_check(&p0, &p, kl, &[10], 200, &rt),
            Err(Error::Precondition(_))
        ));
        let r = kl_ball_lr_bound_check(&p0, &p, 4.0 * kl, &[100, 1000, 10000], 500, &rt).unwrap();
        assert!(r.medians_increasing);
        assert!(r.fractions[2] > 0.99);
    }

    #[test]
    fn rescaling_inequality() {
        let m = CategoricalModel::new(2).unwrap();
        let coin = |p: f64| FiniteDist::new(vec![p, 1.0 - p]).unwrap();
        let prior = AtomicPrior::new(vec![coin(0.2), coin(0.7), coin(0.9)], vec![0.25, 0.25, 0.5]).unwrap();
        let c = Region::predicate("lt0.8", |p: &FiniteDist| p.mass(0) < 0.8);
        let b = Region::predicate("lt0.5", |p: &FiniteDist| p.mass(0) < 0.5);
        let same = subset_rescaling_check(&prior, &c, &c, &m, 5).unwrap();
        assert!((same.factor - 1.0).abs() < 1e-15 && same.tight_points == same.points);
        let r = subset_rescaling_check(&prior, &b, &c, &m, 5).unwrap();
        assert!((r.factor - 2.0).abs() < 1e-15);
        assert!(r.max_violation <= 1e-12);
        assert!(matches!(
            subset_rescaling_check(&prior, &c, &b, &m, 3),
            Err(Error::Precondition(_))
        ));
        let zero = AtomicPrior::new(vec![coin(0.2), coin(0.7)], vec![1.0, 0.0]).unwrap();
        let eq = subset_rescaling_check(&zero, &b, &c, &m, 4).unwrap();
        assert!((eq.factor - 1.0).abs() < 1e-15 && eq.tight_points == eq.points);
    }

    #[test]
    fn tightness_verdicts() {
        let m = CategoricalModel::new(3).unwrap();
        let rt = Runtime::new(8, 2);
        let p0 = FiniteDist::new(vec![0.2, 0.3, 0.5]).unwrap();
        let rate = RateSpec::exponential(0.1);
        let single = AtomicPrior::uniform(vec![p0.clone()]).unwrap();
        let r = uniform_tightness_check(&single, &Region::all(), &m, &p0, &rate, &[10, 50], 100, 0.9, &rt).unwrap();
        assert!(r.tight);
        assert!((r.quantiles[0][1] - rate.value(50).unwrap()).abs() < 1e-15);
        let near = AtomicPrior::uniform(vec![
            p0.clone(),
            FiniteDist::new(vec![0.25, 0.3, 0.45]).unwrap(),
            FiniteDist::new(vec![0.2, 0.35, 0.45]).unwrap(),
        ])
        .unwrap();
        let r = uniform_tightness_check(&near, &Region::all(), &m, &p0, &rate, &[20, 80, 320], 200, 0.9, &rt).unwrap();
        assert!(r.tight && r.implication_holds == Some(true), "{r:?}");
        let bad = AtomicPrior::uniform(vec![p0.clone(), FiniteDist::new(vec![0.0, 0.5, 0.5]).unwrap()]).unwrap();
        let r = uniform_tightness_check(&bad, &Region::all(), &m, &p0, &rate, &[20, 80], 100, 0.9, &rt).unwrap();
        assert!(!r.tight);
    }

    proptest::proptest! {
        #[test]
        fn tail_monotone_and_inverse_implication(
            raw in proptest::collection::vec(-30.0f64..5.0, 200),
            delta in 1e-3f64..1.0,
            k_small in 0.5f64..2.0,
            k_extra in 0.0f64..1.0,
        ) {
            let d = LogRatioDraws { n_grid: vec![10, 40], draws: vec![raw.clone(), raw.iter().map(|l| l - 1.0).collect()] };
            // n^-k is larger for smaller k
            let small = RateSpec::power(k_small + k_extra);
            let large = RateSpec::power(k_small);
            proptest::prop_assert!(rate_monotonicity_holds(&d, &small, &large, delta).unwrap());
            let r = criterion_implication(&d, &large, delta, 0.02).unwrap();
            for (iv, ii) in r.iv_at_inverse_delta.estimates.iter().zip(&r.ii.estimates) {
                proptest::prop_assert!(iv <= ii);
            }
        }
    }
}
