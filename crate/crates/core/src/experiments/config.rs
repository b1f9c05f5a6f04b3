//! Experiment configuration: a strict JSON schema plus builders that turn
//! the specs into models, priors and region sequences.

use std::collections::BTreeMap;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{kl_divergence, kl_second_moment, FiniteDist, TransitionMatrix};
use crate::models::{Metric, Model};
use crate::priors::{AtomicPrior, CredibleShape, Region, Slab, SparsityPrior};
use crate::remote_contiguity::RateSpec;
use crate::testing::{PowerMethod, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Consistency,
    Rates,
    #[serde(alias = "bayes_factor")]
    BayesFactor,
    Coverage,
    Freedman,
    #[serde(alias = "point_estimator")]
    PointEstimator,
    #[serde(alias = "sparse_means")]
    SparseMeans,
    #[serde(alias = "tailfree_binned")]
    Tailfree,
    #[serde(alias = "testconsequi", alias = "test_equiv")]
    TestEquiv,
    #[serde(alias = "rc_diagnose")]
    RcDiagnose,
    #[serde(alias = "test_power")]
    TestPower,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Consistency => "consistency",
            ExperimentKind::Rates => "rates",
            ExperimentKind::BayesFactor => "bayes-factor",
            ExperimentKind::Coverage => "coverage",
            ExperimentKind::Freedman => "freedman",
            ExperimentKind::PointEstimator => "point-estimator",
            ExperimentKind::SparseMeans => "sparse-means",
            ExperimentKind::Tailfree => "tailfree",
            ExperimentKind::TestEquiv => "test-equiv",
            ExperimentKind::RcDiagnose => "rc-diagnose",
            ExperimentKind::TestPower => "test-power",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Categorical,
    Freedman,
    UniformLocation,
    Markov,
    SparseMeans,
    /// Real-valued draws observed through partitions.
    RealLine,
}

/// A parameter value: a location, a probability vector, or a transition
/// matrix (rows are conditional laws of the next state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

/// Data law of the `real_line` family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
    Beta { a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    /// Number of cells (categorical, freedman) or coordinates (sparse means).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<ParamValue>,
    /// Fixed law of `Z_0`; the stationary law when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    /// Point mass at the truth (or `center`).
    Point,
    Atoms,
    /// Uniform weights on the barycentric grid `{k / resolution}`.
    SimplexGrid,
    /// Dirichlet density evaluated on the barycentric grid.
    DirichletGrid,
    /// Uniform weights on `{low, low + spacing, ..., high}`.
    IntervalGrid,
    /// `beta delta_Q + sum_m alpha_m delta_{P_m}`, `P_m` = truth with
    /// symbol `k(m)` removed.
    Freedman,
    ProductDirichlet,
    SpikeSlab,
    /// Dirichlet process with uniform base measure on `[low, high]`,
    /// observed through partitions.
    DirichletProcess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub kind: PriorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<ParamValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    /// Drop grid points on the simplex boundary.
    #[serde(default)]
    pub interior: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbols: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slab: Option<Slab>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<SparsityPrior>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    All,
    Empty,
    /// `{d(theta, center) < r_n}`.
    Ball,
    ClosedBall,
    /// `{d(theta, center) >= r_n}`.
    OutsideBall,
    /// `[center + low r_n, center + high r_n]` for scalar parameters.
    Interval,
    /// `{KL(P0, P) < eps_n^2}`.
    KlBall,
    /// KL ball intersected with the second-moment condition.
    Ggv,
    /// `{|S| <= a p_n, ||theta - theta0||^2 > m^2 p_n log(n / p_n)}` for
    /// sparse means.
    SparseV,
}

/// A region sequence. The scale `r_n` is `radius * rate(n)`, with missing
/// parts equal to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub kind: RegionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Number of nonzero truth coordinates `p_n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Barycentre,
    Covering,
    Hoeffding,
    UniformLocation,
    Weak,
    Escape,
    /// `phi(x) = Pi(V | x)`.
    Posterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    pub kind: TestKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

/// Experiment-specific settings; all optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<TestSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerMethod>,
    /// `a_n`: remote-contiguity rate, or credible level / rate target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateSpec>,
    /// `b_n`: prior-mass lower rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_rate: Option<RateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantile_levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    /// Credible level `1 - a_n` from a rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_rate: Option<RateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enlargement: Option<RateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shapes: Option<Vec<CredibleShape>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_hits: Option<usize>,
    /// Second truth, on the V side (Bayes factors).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signals: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt_slab: Option<Slab>,
    /// Breakpoint lists, coarse to fine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partitions: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv_radius: Option<f64>,
    /// Bounded functions on the cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functions: Option<Vec<Vec<f64>>>,
}

/// Preregistered thresholds; a verdict is only asserted when its threshold
/// is present (trend verdicts are always asserted).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_mean_v_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rc_tail: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_coverage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_median_tv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelSpec,
    pub prior: PriorSpec,
    #[serde(default)]
    pub regions: BTreeMap<String, RegionSpec>,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub options: Options,
    #[serde(default)]
    pub verdicts: VerdictSpec,
}

pub(crate) fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::config(path, message)
}

impl ExperimentConfig {
    /// Parses and validates JSON; errors name the offending key path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(
                if path == "." { String::new() } else { path },
                e.into_inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(config_err("n_grid", "must not be empty"));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("n_grid", "must be strictly increasing"));
        }
        if self.n_grid[0] == 0 {
            return Err(config_err("n_grid", "sample sizes must be positive"));
        }
        if self.replications == 0 {
            return Err(config_err("replications", "must be at least 1"));
        }
        for (name, r) in &self.regions {
            let path = format!("regions.{name}");
            if let Some(rate) = &r.rate {
                rate.validate(&self.n_grid)
                    .map_err(|e| config_err(format!("{path}.rate"), e.to_string()))?;
            }
            if matches!(
                r.kind,
                RegionKind::Ball | RegionKind::ClosedBall | RegionKind::OutsideBall
            ) && r.metric.is_none()
            {
                return Err(config_err(format!("{path}.metric"), "ball regions need a metric"));
            }
            let sparse_only = r.kind == RegionKind::SparseV;
            if sparse_only != (self.model.family == Family::SparseMeans)
                && r.kind != RegionKind::All
                && r.kind != RegionKind::Empty
            {
                return Err(config_err(
                    format!("{path}.kind"),
                    format!(
                        "region kind {:?} does not apply to the {:?} family",
                        r.kind, self.model.family
                    ),
                ));
            }
        }
        for (path, rate) in [
            ("options.rate", &self.options.rate),
            ("options.lower_rate", &self.options.lower_rate),
            ("options.level_rate", &self.options.level_rate),
            ("options.enlargement", &self.options.enlargement),
        ] {
            if let Some(r) = rate {
                for &n in &self.n_grid {
                    r.log_value(n)
                        .map_err(|e| config_err(path.to_string(), e.to_string()))?;
                }
            }
        }
        Ok(())
    }

    pub fn region(&self, name: &str) -> Result<&RegionSpec> {
        self.regions
            .get(name)
            .ok_or_else(|| config_err(format!("regions.{name}"), "required region is missing"))
    }

    pub fn truth_value(&self) -> Result<&ParamValue> {
        self.model
            .truth
            .as_ref()
            .ok_or_else(|| config_err("model.truth", "a true parameter is required"))
    }

    pub fn support(&self) -> Result<usize> {
        self.model
            .support
            .ok_or_else(|| config_err("model.support", "required for this family"))
    }

    pub fn expect_family(&self, families: &[Family]) -> Result<Family> {
        if families.contains(&self.model.family) {
            Ok(self.model.family)
        } else {
            Err(config_err(
                "model.family",
                format!(
                    "{} does not support the {:?} family",
                    self.experiment.name(),
                    self.model.family
                ),
            ))
        }
    }
}

/// Parameters that can be read from a config and used in regions.
pub trait ConfigParam: Clone + Debug + Send + Sync + 'static {
    fn from_value(v: &ParamValue, path: &str) -> Result<Self>;

    fn scalar(&self) -> Option<f64> {
        None
    }

    fn kl_region(_center: &Self, _eps_sq: f64, _ggv: bool) -> Option<Region<Self>> {
        None
    }
}

impl ConfigParam for f64 {
    fn from_value(v: &ParamValue, path: &str) -> Result<Self> {
        match v {
            ParamValue::Scalar(x) if x.is_finite() => Ok(*x),
            _ => Err(config_err(path, "expected a finite number")),
        }
    }

    fn scalar(&self) -> Option<f64> {
        Some(*self)
    }
}

impl ConfigParam for FiniteDist {
    fn from_value(v: &ParamValue, path: &str) -> Result<Self> {
        match v {
            ParamValue::Vector(p) => FiniteDist::new(p.clone()).map_err(|e| config_err(path, e.to_string())),
            _ => Err(config_err(path, "expected a probability vector")),
        }
    }

    fn kl_region(center: &Self, eps_sq: f64, ggv: bool) -> Option<Region<Self>> {
        let c = center.clone();
        Some(Region::predicate(
            if ggv { "ggv" } else { "kl-ball" },
            move |p: &FiniteDist| {
                let kl = kl_divergence(&c, p).unwrap_or(f64::INFINITY);
                kl < eps_sq && (!ggv || kl_second_moment(&c, p).unwrap_or(f64::INFINITY) < eps_sq)
            },
        ))
    }
}

impl ConfigParam for TransitionMatrix {
    fn from_value(v: &ParamValue, path: &str) -> Result<Self> {
        match v {
            ParamValue::Matrix(rows) => {
                TransitionMatrix::new(rows.clone()).map_err(|e| config_err(path, e.to_string()))
            }
            _ => Err(config_err(path, "expected a transition matrix (list of rows)")),
        }
    }
}

impl ConfigParam for Vec<f64> {
    fn from_value(v: &ParamValue, path: &str) -> Result<Self> {
        match v {
            ParamValue::Vector(x) if x.iter().all(|v| v.is_finite()) => Ok(x.clone()),
            _ => Err(config_err(path, "expected a vector of finite numbers")),
        }
    }
}

impl RegionSpec {
    /// Scale `radius * rate(n)`.
    pub fn scale(&self, n: usize) -> Result<f64> {
        let r = self.radius.unwrap_or(1.0);
        let a = match &self.rate {
            Some(rate) => rate.value(n)?,
            None => 1.0,
        };
        Ok(r * a)
    }

    /// The region at sample size `n`, centred at `center` or the truth.
    pub fn build<M>(&self, name: &str, model: &M, truth: &M::Param, n: usize) -> Result<Region<M::Param>>
    where
        M: Model,
        M::Param: ConfigParam,
    {
        let path = format!("regions.{name}");
        let center = match &self.center {
            Some(v) => M::Param::from_value(v, &format!("{path}.center"))?,
            None => truth.clone(),
        };
        let scale = self
            .scale(n)
            .map_err(|e| config_err(format!("{path}.rate"), e.to_string()))?;
        let metric = || {
            self.metric
                .ok_or_else(|| config_err(format!("{path}.metric"), "required"))
        };
        let region = match self.kind {
            RegionKind::All => Ok(Region::all()),
            RegionKind::Empty => Ok(Region::empty()),
            RegionKind::Ball => Region::ball(model, center, scale, metric()?),
            RegionKind::ClosedBall => Region::closed_ball(model, center, scale, metric()?),
            RegionKind::OutsideBall => Region::outside_ball(model, center, scale, metric()?),
            RegionKind::Interval => {
                let c = center
                    .scalar()
                    .ok_or_else(|| config_err(format!("{path}.kind"), "intervals need a scalar parameter"))?;
                let (lo, hi) = (self.low.unwrap_or(-1.0), self.high.unwrap_or(1.0));
                if lo > hi {
                    return Err(config_err(format!("{path}.low"), "low must not exceed high"));
                }
                let (a, b) = (c + lo * scale, c + hi * scale);
                let tol = 1e-9 * (1.0 + a.abs().max(b.abs()));
                Ok(Region::predicate(format!("[{a}, {b}]"), move |t: &M::Param| {
                    t.scalar().is_some_and(|x| x >= a - tol && x <= b + tol)
                }))
            }
            RegionKind::KlBall | RegionKind::Ggv => {
                let eps_sq = self.eps_sq.unwrap_or(1.0) * self.rate.as_ref().map_or(Ok(1.0), |r| r.value(n))?;
                M::Param::kl_region(&center, eps_sq, self.kind == RegionKind::Ggv)
                    .ok_or_else(|| config_err(format!("{path}.kind"), "KL regions need a categorical family"))
            }
            RegionKind::SparseV => Err(config_err(
                format!("{path}.kind"),
                "sparse_v is evaluated by the sparse-means driver",
            )),
        };
        region
            .map_err(|e| match e {
                Error::Config { .. } => e,
                other => config_err(path.clone(), other.to_string()),
            })
            .map(|r| r.with_label(name))
    }
}

/// Barycentric grid `{k / m : sum k = m}` on the `dim`-simplex, in
/// lexicographic order.
pub fn simplex_grid(dim: usize, m: usize, interior: bool) -> Result<Vec<FiniteDist>> {
    const MAX_POINTS: f64 = 2e6;
    if dim == 0 || m == 0 {
        return Err(Error::Parameter(
            "simplex grid needs dim >= 1 and resolution >= 1".into(),
        ));
    }
    let count = crate::numeric::ln_binomial(m + dim - 1, dim - 1).exp();
    if count > MAX_POINTS {
        return Err(Error::Infeasible(format!("simplex grid with about {count:.0} points")));
    }
    let mut out = Vec::new();
    let mut k = vec![0usize; dim];
    fn rec(i: usize, left: usize, m: usize, interior: bool, k: &mut Vec<usize>, out: &mut Vec<FiniteDist>) {
        let dim = k.len();
        if i == dim - 1 {
            k[i] = left;
            if !interior || k.iter().all(|&c| c > 0) {
                let p: Vec<f64> = k.iter().map(|&c| c as f64 / m as f64).collect();
                out.push(FiniteDist::from_weights(p).expect("grid point is a probability vector"));
            }
            return;
        }
        for c in 0..=left {
            k[i] = c;
            rec(i + 1, left - c, m, interior, k, out);
        }
    }
    rec(0, m, m, interior, &mut k, &mut out);
    Ok(out)
}

fn need<T: Clone>(v: &Option<T>, path: &str) -> Result<T> {
    v.clone().ok_or_else(|| config_err(path, "required for this prior"))
}

/// Atomic prior on probability vectors for the categorical families.
pub fn build_dist_prior(spec: &PriorSpec, dim: usize, truth: &FiniteDist) -> Result<AtomicPrior<FiniteDist>> {
    let res = || need(&spec.resolution, "prior.resolution");
    match spec.kind {
        PriorKind::Point => {
            let c = match &spec.center {
                Some(v) => FiniteDist::from_value(v, "prior.center")?,
                None => truth.clone(),
            };
            AtomicPrior::uniform(vec![c])
        }
        PriorKind::Atoms => {
            let atoms = need(&spec.atoms, "prior.atoms")?
                .iter()
                .enumerate()
                .map(|(i, v)| FiniteDist::from_value(v, &format!("prior.atoms[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            if atoms.iter().any(|a| a.len() != dim) {
                return Err(config_err("prior.atoms", format!("atoms must have {dim} cells")));
            }
            match &spec.weights {
                Some(w) => AtomicPrior::new(atoms, w.clone()),
                None => AtomicPrior::uniform(atoms),
            }
            .map_err(|e| config_err("prior.weights", e.to_string()))
        }
        PriorKind::SimplexGrid => AtomicPrior::uniform(simplex_grid(dim, res()?, spec.interior)?),
        PriorKind::DirichletGrid => {
            let alpha = match (&spec.alpha, spec.concentration) {
                (Some(a), _) => a.clone(),
                (None, Some(c)) => vec![c; dim],
                (None, None) => vec![1.0; dim],
            };
            if alpha.len() != dim || alpha.iter().any(|a| !(*a > 0.0)) {
                return Err(config_err("prior.alpha", format!("need {dim} positive concentrations")));
            }
            let grid = simplex_grid(dim, res()?, spec.interior)?;
            let mut atoms = Vec::new();
            let mut logw = Vec::new();
            for p in grid {
                let mut lw = 0.0;
                let mut keep = true;
                for (a, &x) in alpha.iter().zip(p.probs()) {
                    if *a == 1.0 {
                        continue;
                    }
                    if x == 0.0 {
                        // density 0 (a > 1) or unbounded (a < 1): dropped
                        keep = false;
                        break;
                    }
                    lw += (a - 1.0) * x.ln();
                }
                if keep {
                    atoms.push(p);
                    logw.push(lw);
                }
            }
            let lse = crate::numeric::log_sum_exp(&logw);
            AtomicPrior::new(atoms, logw.iter().map(|l| (l - lse).exp()).collect())
        }
        PriorKind::Freedman => {
            let q = FiniteDist::from_value(&need(&spec.q, "prior.q")?, "prior.q")?;
            let beta = need(&spec.beta, "prior.beta")?;
            let symbols = need(&spec.symbols, "prior.symbols")?;
            if !(0.0..=1.0).contains(&beta) {
                return Err(config_err("prior.beta", "must lie in [0, 1]"));
            }
            if q.len() != dim || symbols.iter().any(|&s| s >= dim) {
                return Err(config_err(
                    "prior.symbols",
                    format!("symbols and q must fit {dim} cells"),
                ));
            }
            let alphas = match &spec.alphas {
                Some(a) if a.len() == symbols.len() => a.clone(),
                Some(_) => return Err(config_err("prior.alphas", "one weight per symbol")),
                None => vec![(1.0 - beta) / symbols.len() as f64; symbols.len()],
            };
            let mut atoms = vec![q];
            for (i, &s) in symbols.iter().enumerate() {
                let mut v = truth.probs().to_vec();
                v[s] = 0.0;
                atoms.push(
                    FiniteDist::from_weights(v)
                        .map_err(|e| config_err(format!("prior.symbols[{i}]"), e.to_string()))?,
                );
            }
            let mut w = vec![beta];
            w.extend(alphas);
            AtomicPrior::new(atoms, w).map_err(|e| config_err("prior.alphas", e.to_string()))
        }
        other => Err(config_err(
            "prior.kind",
            format!("{other:?} is not an atomic prior on probability vectors"),
        )),
    }
}

/// Atomic prior on locations.
pub fn build_scalar_prior(spec: &PriorSpec, truth: f64) -> Result<AtomicPrior<f64>> {
    match spec.kind {
        PriorKind::Point => AtomicPrior::uniform(vec![match &spec.center {
            Some(v) => f64::from_value(v, "prior.center")?,
            None => truth,
        }]),
        PriorKind::Atoms => {
            let atoms = need(&spec.atoms, "prior.atoms")?
                .iter()
                .enumerate()
                .map(|(i, v)| f64::from_value(v, &format!("prior.atoms[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            match &spec.weights {
                Some(w) => AtomicPrior::new(atoms, w.clone()),
                None => AtomicPrior::uniform(atoms),
            }
            .map_err(|e| config_err("prior.weights", e.to_string()))
        }
        PriorKind::IntervalGrid => {
            let lo = need(&spec.low, "prior.low")?;
            let hi = need(&spec.high, "prior.high")?;
            let h = need(&spec.spacing, "prior.spacing")?;
            if !(h > 0.0) || !(hi > lo) {
                return Err(config_err("prior.spacing", "need spacing > 0 and high > low"));
            }
            let count = ((hi - lo) / h + 1e-9).floor() as usize + 1;
            if count > 10_000_000 {
                return Err(config_err("prior.spacing", "grid too fine"));
            }
            // integer multiples keep grid points exact where possible
            AtomicPrior::uniform((0..count).map(|i| lo + i as f64 * h).collect())
        }
        other => Err(config_err(
            "prior.kind",
            format!("{other:?} is not an atomic prior on locations"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal() -> String {
        r#"{
            "experiment": "consistency",
            "model": {"family": "categorical", "support": 3, "truth": [0.2, 0.3, 0.5]},
            "prior": {"kind": "simplex_grid", "resolution": 10},
            "regions": {"B": {"kind": "ball", "metric": "hellinger", "radius": 0.1},
                        "V": {"kind": "outside_ball", "metric": "hellinger", "radius": 0.3}},
            "n_grid": [10, 100],
            "replications": 5
        }"#
        .into()
    }

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_json(&minimal()).unwrap();
        assert_eq!(c.experiment, ExperimentKind::Consistency);
        assert_eq!(c.regions.len(), 2);
    }

    #[test]
    fn misspelled_rate_kind_names_the_path() {
        let text = minimal().replace(
            r#""radius": 0.3}"#,
            r#""radius": 0.3, "rate": {"kind": "exponentail", "c": 1.0}}"#,
        );
        match ExperimentConfig::from_json(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "regions.V.rate.kind"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_and_grid_order_rejected() {
        let typo = minimal().replace(r#""replications""#, r#""replicatoins""#);
        assert!(matches!(ExperimentConfig::from_json(&typo), Err(Error::Config { .. })));
        let bad = minimal().replace("[10, 100]", "[100, 10]");
        match ExperimentConfig::from_json(&bad) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "n_grid"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn simplex_grid_counts() {
        assert_eq!(simplex_grid(3, 50, false).unwrap().len(), 1326);
        assert_eq!(simplex_grid(3, 10, true).unwrap().len(), 36);
        assert_eq!(simplex_grid(2, 4, false).unwrap()[1].probs(), &[0.25, 0.75]);
    }

    #[test]
    fn dirichlet_grid_weights() {
        let spec = PriorSpec {
            kind: PriorKind::DirichletGrid,
            resolution: Some(4),
            alpha: Some(vec![2.0, 1.0]),
            ..serde_json::from_str(r#"{"kind": "point"}"#).unwrap()
        };
        let truth = FiniteDist::uniform(2).unwrap();
        let p = build_dist_prior(&spec, 2, &truth).unwrap();
        // Beta(2, 1) density 2x on {0, .25, .5, .75, 1}: x = 0 dropped
        assert_eq!(p.len(), 4);
        assert!((p.weights()[0] - 0.25 / 2.5).abs() < 1e-15);
    }

    #[test]
    fn interval_region_and_rates() {
        let spec: RegionSpec = serde_json::from_value(
            serde_json::json!({"kind": "interval", "low": 0.0, "high": 1.0, "rate": {"kind": "power", "k": 1.0}}),
        )
        .unwrap();
        let r = spec
            .build("B", &crate::models::UniformLocationModel, &0.0, 500)
            .unwrap();
        assert!(r.contains(&0.0) && r.contains(&0.002) && !r.contains(&0.003) && !r.contains(&-0.001));
        assert_eq!(r.label(), "B");
    }
}
