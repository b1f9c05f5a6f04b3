//! End-to-end experiment drivers. Each run draws data from the configured
//! truth on derived streams, records per-replication statistics, and
//! settles preregistered verdicts from those rows.

mod atomic;
mod bayes_factor;
pub mod config;
mod coverage;
mod freedman;
mod markov;
pub mod report;
mod sparse;
mod tailfree;

pub use atomic::{build_test, posterior_test, power_method, AtomicFamily};
pub use config::{
    simplex_grid, ConfigParam, ExperimentConfig, ExperimentKind, Family, Generator, ModelSpec, Options, ParamValue,
    PriorKind, PriorSpec, RegionKind, RegionSpec, TestKind, TestSpec, VerdictSpec,
};
pub use report::{ExperimentReport, Provenance, Row, RowKind, Verdict};
pub use sparse::sparse_v_radius_sq;
pub use tailfree::cell_probabilities;

use config::{build_dist_prior, build_scalar_prior, config_err};

use crate::error::Result;
use crate::measures::FiniteDist;
use crate::models::{CategoricalModel, FreedmanModel, UniformLocationModel};
use crate::priors::AtomicPrior;
use crate::rng::Runtime;

/// State shared by a driver: the config, the runtime and the report being
/// filled.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub rt: Runtime,
    pub report: ExperimentReport,
}

pub(crate) fn dist_setup(cfg: &ExperimentConfig) -> Result<(FiniteDist, AtomicPrior<FiniteDist>)> {
    let truth = FiniteDist::from_value(cfg.truth_value()?, "model.truth")?;
    let k = cfg.model.support.unwrap_or(truth.len());
    if k != truth.len() {
        return Err(config_err(
            "model.truth",
            format!("expected {k} cells, got {}", truth.len()),
        ));
    }
    let prior = build_dist_prior(&cfg.prior, k, &truth)?;
    Ok((truth, prior))
}

pub(crate) fn scalar_setup(cfg: &ExperimentConfig) -> Result<(f64, AtomicPrior<f64>)> {
    let truth = f64::from_value(cfg.truth_value()?, "model.truth")?;
    let prior = build_scalar_prior(&cfg.prior, truth)?;
    Ok((truth, prior))
}

/// Runs `$f(ctx, &model, &truth, &prior)` for the atomic families.
macro_rules! atomic_dispatch {
    ($ctx:expr, $f:path) => {{
        let cfg = $ctx.cfg.clone();
        match cfg.model.family {
            Family::Categorical => {
                let (t, p) = dist_setup(&cfg)?;
                $f($ctx, &CategoricalModel::new(t.len())?, &t, &p)
            }
            Family::Freedman => {
                let (t, p) = dist_setup(&cfg)?;
                $f($ctx, &FreedmanModel::new(t.len())?, &t, &p)
            }
            Family::UniformLocation => {
                let (t, p) = scalar_setup(&cfg)?;
                $f($ctx, &UniformLocationModel, &t, &p)
            }
            other => Err(config_err(
                "model.family",
                format!("{} does not support the {:?} family", cfg.experiment.name(), other),
            )),
        }
    }};
}

/// Runs the configured experiment; the seed comes from `rt`.
pub fn run(cfg: &ExperimentConfig, rt: Runtime) -> Result<ExperimentReport> {
    cfg.validate()?;
    let json = serde_json::to_string(cfg)?;
    let mut ctx = Context {
        cfg: cfg.clone(),
        rt,
        report: ExperimentReport::new(cfg.experiment.name(), &json, rt.seed),
    };
    let c = &mut ctx;
    match cfg.experiment {
        ExperimentKind::Consistency => atomic_dispatch!(c, atomic::run_consistency),
        ExperimentKind::Rates => atomic_dispatch!(c, atomic::run_rates),
        ExperimentKind::TestEquiv => atomic_dispatch!(c, atomic::run_test_equiv),
        ExperimentKind::RcDiagnose => atomic_dispatch!(c, atomic::run_rc_diagnose),
        ExperimentKind::TestPower => match cfg.model.family {
            Family::Markov => markov::run_hoeffding(c),
            _ => atomic_dispatch!(c, atomic::run_test_power),
        },
        ExperimentKind::BayesFactor => match cfg.model.family {
            Family::Markov => markov::run_bayes_factor(c),
            _ => atomic_dispatch!(c, bayes_factor::run_bayes_factor),
        },
        ExperimentKind::Coverage => atomic_dispatch!(c, coverage::run_coverage),
        ExperimentKind::PointEstimator => {
            let (t, p) = dist_setup(cfg)?;
            match cfg.expect_family(&[Family::Categorical, Family::Freedman])? {
                Family::Freedman => atomic::run_point_estimator(c, &FreedmanModel::new(t.len())?, &t, &p),
                _ => atomic::run_point_estimator(c, &CategoricalModel::new(t.len())?, &t, &p),
            }
        }
        ExperimentKind::Freedman => {
            cfg.expect_family(&[Family::Categorical, Family::Freedman])?;
            freedman::run_freedman(c)
        }
        ExperimentKind::SparseMeans => {
            cfg.expect_family(&[Family::SparseMeans])?;
            sparse::run_sparse_means(c)
        }
        ExperimentKind::Tailfree => {
            cfg.expect_family(&[Family::RealLine])?;
            tailfree::run_tailfree(c)
        }
    }?;
    ctx.report.finalize();
    Ok(ctx.report)
}
