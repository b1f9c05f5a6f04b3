//! Bayesian test sequences: construction, exact or Monte Carlo power, and
//! the inequalities that tie tests to posterior concentration.

mod constructions;

pub use constructions::{
    covering_bound, covering_test, freedman_escape_expectation, freedman_escape_test, freedman_escape_union_bound,
    hoeffding_bound, hoeffding_exceedance, hoeffding_markov_test, uniform_location_test, weak_neighborhood_bound,
    weak_neighborhood_test, CoveringTest, Side,
};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{alpha_grid, check_alpha, transform_term};
use crate::models::Model;
use crate::numeric::{ksum, log_sum_exp, mean, std_err};
use crate::priors::{local_prior_predictive, AtomicPrior, Region};
use crate::rng::derive_stream;

/// Log densities closer than this (relative) are treated as a tie.
const TIE_TOLERANCE: f64 = 1e-12;

/// Construction metadata of a test.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TestDescriptor {
    pub kind: String,
    pub params: BTreeMap<String, f64>,
}

/// A test `phi_n: X_n -> [0, 1]`.
#[derive(Clone)]
pub struct TestFunction<S> {
    descriptor: TestDescriptor,
    eval: Arc<dyn Fn(&S) -> f64 + Send + Sync>,
}

impl<S> fmt::Debug for TestFunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({:?})", self.descriptor)
    }
}

impl<S: 'static> TestFunction<S> {
    pub fn new(kind: impl Into<String>, f: impl Fn(&S) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            descriptor: TestDescriptor {
                kind: kind.into(),
                params: BTreeMap::new(),
            },
            eval: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        let c = c.clamp(0.0, 1.0);
        Self::new("constant", move |_| c).with_param("value", c)
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.descriptor.params.insert(name.into(), value);
        self
    }

    pub fn descriptor(&self) -> &TestDescriptor {
        &self.descriptor
    }

    /// `phi(x)`, clamped to `[0, 1]`.
    pub fn eval(&self, x: &S) -> f64 {
        (self.eval)(x).clamp(0.0, 1.0)
    }

    /// Pointwise maximum; the constant 0 when `tests` is empty.
    pub fn max_of(kind: impl Into<String>, tests: Vec<TestFunction<S>>) -> Self {
        Self::new(kind, move |x| tests.iter().map(|t| t.eval(x)).fold(0.0, f64::max))
    }
}

/// How a power figure was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PowerMethod {
    /// Full enumeration of the sample space.
    Exact,
    /// Draws `theta ~ Pi(.|region)`, then `x ~ P_theta^n`.
    MonteCarlo { replications: usize, seed: u64 },
}

/// Integrated errors of a test for `B` versus `V`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerReport {
    pub n: usize,
    pub test_kind: String,
    /// `int_B P_theta phi dPi`.
    pub type_one: f64,
    /// `int_V P_theta (1 - phi) dPi`.
    pub type_two: f64,
    pub total: f64,
    pub bound: Option<f64>,
    pub method: PowerMethod,
    pub stderr_one: f64,
    pub stderr_two: f64,
}

/// Positive-weight atoms of a prior split by membership in `B` and `V`.
pub(crate) struct Split {
    /// `(atom index, log weight)`.
    pub all: Vec<(usize, f64)>,
    pub b: Vec<(usize, f64)>,
    pub v: Vec<(usize, f64)>,
    pub mass_b: f64,
    pub mass_v: f64,
}

impl Split {
    pub fn new<P: Clone + Send + Sync + 'static>(prior: &AtomicPrior<P>, b: &Region<P>, v: &Region<P>) -> Result<Self> {
        let mut s = Split {
            all: Vec::new(),
            b: Vec::new(),
            v: Vec::new(),
            mass_b: 0.0,
            mass_v: 0.0,
        };
        let (mut mb, mut mv) = (Vec::new(), Vec::new());
        for (i, (a, &w)) in prior.atoms().iter().zip(prior.weights()).enumerate() {
            if w <= 0.0 {
                continue;
            }
            s.all.push((i, w.ln()));
            let (in_b, in_v) = (b.contains(a), v.contains(a));
            if in_b && in_v {
                return Err(Error::Precondition(format!(
                    "atom {i} lies in both `{}` and `{}`",
                    b.label(),
                    v.label()
                )));
            }
            if in_b {
                s.b.push((i, w.ln()));
                mb.push(w);
            }
            if in_v {
                s.v.push((i, w.ln()));
                mv.push(w);
            }
        }
        s.mass_b = ksum(mb);
        s.mass_v = ksum(mv);
        Ok(s)
    }

    pub fn require_masses(&self, b: &str, v: &str) -> Result<()> {
        if self.mass_b <= 0.0 {
            return Err(Error::EmptyRegion(b.into()));
        }
        if self.mass_v <= 0.0 {
            return Err(Error::EmptyRegion(v.into()));
        }
        Ok(())
    }
}

/// `log sum_{i in set} w_i p_i(x)` from per-atom log-likelihoods.
pub(crate) fn log_mass(set: &[(usize, f64)], loglik: &[f64]) -> f64 {
    let terms: Vec<f64> = set.iter().map(|&(i, lw)| lw + loglik[i]).collect();
    log_sum_exp(&terms)
}

/// Visits every sample of size `n` with the log-likelihood of each atom
/// (`-inf` for zero-weight atoms, which are skipped).
pub fn enumerate_logliks<M: Model>(
    model: &M,
    prior: &AtomicPrior<M::Param>,
    n: usize,
    visit: &mut dyn FnMut(&M::Sample, &[f64]),
) -> Result<()> {
    let atoms = prior.atoms();
    let weights = prior.weights();
    let mut ll = vec![f64::NEG_INFINITY; atoms.len()];
    model.enumerate(n, &mut |x| {
        let s = model.stats(x);
        for (i, a) in atoms.iter().enumerate() {
            ll[i] = if weights[i] > 0.0 {
                model.loglik_stats(a, &s)
            } else {
                f64::NEG_INFINITY
            };
        }
        visit(x, &ll);
    })
}

/// Likelihood-ratio test between the weighted local prior predictives:
/// `phi(x) = 1{Pi(V) p_V(x) > Pi(B) p_B(x)}`, with ties giving 1/2.
pub fn barycentre_lr_test<M: Model>(
    prior: &AtomicPrior<M::Param>,
    b: &Region<M::Param>,
    v: &Region<M::Param>,
    model: &M,
) -> Result<TestFunction<M::Sample>> {
    let split = Split::new(prior, b, v)?;
    split.require_masses(b.label(), v.label())?;
    let pb = local_prior_predictive(prior, model, b)?;
    let pv = local_prior_predictive(prior, model, v)?;
    let (lb, lv) = (split.mass_b.ln(), split.mass_v.ln());
    Ok(TestFunction::new("barycentre_lr", move |x: &M::Sample| {
        let s = pb.model().stats(x);
        lr_decision(lb + pb.log_density_stats(&s), lv + pv.log_density_stats(&s))
    })
    .with_param("mass_b", split.mass_b)
    .with_param("mass_v", split.mass_v))
}

/// 1 when the V side is larger, 1/2 on ties (including two zero densities).
pub(crate) fn lr_decision(log_b: f64, log_v: f64) -> f64 {
    let close = log_b.is_finite()
        && log_v.is_finite()
        && (log_b - log_v).abs() <= TIE_TOLERANCE * (1.0 + log_b.abs().max(log_v.abs()));
    if log_b == log_v || close {
        0.5
    } else if log_v > log_b {
        1.0
    } else {
        0.0
    }
}

/// Integrated type-I and type-II errors of `test` for `B` versus `V`.
pub fn bayes_test_power<M: Model>(
    test: &TestFunction<M::Sample>,
    prior: &AtomicPrior<M::Param>,
    b: &Region<M::Param>,
    v: &Region<M::Param>,
    model: &M,
    n: usize,
    method: PowerMethod,
) -> Result<PowerReport> {
    let split = Split::new(prior, b, v)?;
    split.require_masses(b.label(), v.label())?;
    let kind = test.descriptor().kind.clone();
    match method {
        PowerMethod::Exact => {
            let (mut one, mut two) = (Vec::new(), Vec::new());
            enumerate_logliks(model, prior, n, &mut |x, ll| {
                let phi = test.eval(x);
                let mb = log_mass(&split.b, ll).exp();
                let mv = log_mass(&split.v, ll).exp();
                one.push(phi * mb);
                two.push((1.0 - phi) * mv);
            })?;
            let (t1, t2) = (ksum(one), ksum(two));
            Ok(PowerReport {
                n,
                test_kind: kind,
                type_one: t1,
                type_two: t2,
                total: t1 + t2,
                bound: None,
                method,
                stderr_one: 0.0,
                stderr_two: 0.0,
            })
        }
        PowerMethod::MonteCarlo { replications, seed } => {
            if replications < 2 {
                return Err(Error::Parameter(
                    "Monte Carlo power needs at least 2 replications".into(),
                ));
            }
            let pb = local_prior_predictive(prior, model, b)?;
            let pv = local_prior_predictive(prior, model, v)?;
            let mut phis_b = Vec::with_capacity(replications);
            let mut miss_v = Vec::with_capacity(replications);
            for r in 0..replications {
                let mut rng = derive_stream(seed, "bayes-test-power/B", r as u64);
                phis_b.push(test.eval(&pb.sample(n, &mut rng)?));
                let mut rng = derive_stream(seed, "bayes-test-power/V", r as u64);
                miss_v.push(1.0 - test.eval(&pv.sample(n, &mut rng)?));
            }
            let t1 = split.mass_b * mean(&phis_b);
            let t2 = split.mass_v * mean(&miss_v);
            Ok(PowerReport {
                n,
                test_kind: kind,
                type_one: t1,
                type_two: t2,
                total: t1 + t2,
                bound: None,
                method,
                stderr_one: split.mass_b * std_err(&phis_b),
                stderr_two: split.mass_v * std_err(&miss_v),
            })
        }
    }
}

/// Values of `sum_x (Pi(B) p_B(x))^alpha (Pi(V) p_V(x))^(1 - alpha)` on an
/// alpha grid, by enumeration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HellingerBound {
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
    /// Grid minimum and its location.
    pub bound: f64,
    pub alpha: f64,
}

/// Upper bound on the total power of the barycentre test through the
/// Hellinger transform of the weighted predictives; `grid = None` uses
/// `{0, 0.01, ..., 1}`.
pub fn hellinger_transform_power_bound<M: Model>(
    prior: &AtomicPrior<M::Param>,
    b: &Region<M::Param>,
    v: &Region<M::Param>,
    model: &M,
    n: usize,
    grid: Option<&[f64]>,
) -> Result<HellingerBound> {
    let alphas = grid.map(|g| g.to_vec()).unwrap_or_else(alpha_grid);
    for &a in &alphas {
        check_alpha(a)?;
    }
    let split = Split::new(prior, b, v)?;
    split.require_masses(b.label(), v.label())?;
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); alphas.len()];
    enumerate_logliks(model, prior, n, &mut |_, ll| {
        let mb = log_mass(&split.b, ll).exp();
        let mv = log_mass(&split.v, ll).exp();
        for (t, &a) in terms.iter_mut().zip(&alphas) {
            t.push(transform_term(mb, mv, a));
        }
    })?;
    let values: Vec<f64> = terms.into_iter().map(ksum).collect();
    let (mut bound, mut alpha) = (f64::INFINITY, f64::NAN);
    for (&a, &val) in alphas.iter().zip(&values) {
        if val < bound {
            bound = val;
            alpha = a;
        }
    }
    Ok(HellingerBound {
        alphas,
        values,
        bound,
        alpha,
    })
}

/// Minimax bound `2 sqrt(Pi(B) Pi(V)) exp(-n eps^2 / 2)` for convex `B`,
/// `V` at Hellinger distance at least `eps` (with `H^2 = sum (sqrt p - sqrt q)^2`).
pub fn minimax_hellinger_bound(mass_b: f64, mass_v: f64, n: usize, eps: f64) -> f64 {
    2.0 * (mass_b * mass_v).sqrt() * (-(n as f64) * eps * eps / 2.0).exp()
}

/// Both sides of the basic test-based concentration inequality
/// `int P_theta Pi(V|X) dPi(theta|B)
///    <= int P_theta phi dPi(theta|B) + Pi(B)^-1 int_V P_theta (1 - phi) dPi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub stderr: f64,
    pub method: PowerMethod,
    /// Measured total power `a_n` and prior mass `b_n = Pi(B)`.
    pub a_n: f64,
    pub b_n: f64,
    pub quotient: f64,
}

impl ConcentrationReport {
    /// Whether the inequality holds: exactly up to `1e-12`, or within three
    /// standard errors in Monte Carlo mode.
    pub fn holds(&self) -> bool {
        match self.method {
            PowerMethod::Exact => self.slack >= -1e-12,
            PowerMethod::MonteCarlo { .. } => self.slack >= -3.0 * self.stderr,
        }
    }
}

/// Evaluates [`ConcentrationReport`]. `V` may have zero mass, in which case
/// the left side vanishes.
pub fn concentration_check<M: Model>(
    prior: &AtomicPrior<M::Param>,
    b: &Region<M::Param>,
    v: &Region<M::Param>,
    test: &TestFunction<M::Sample>,
    model: &M,
    n: usize,
    method: PowerMethod,
) -> Result<ConcentrationReport> {
    let split = Split::new(prior, b, v)?;
    if split.mass_b <= 0.0 {
        return Err(Error::EmptyRegion(b.label().into()));
    }
    let lb = split.mass_b.ln();
    match method {
        PowerMethod::Exact => {
            let (mut lhs, mut one, mut two) = (Vec::new(), Vec::new(), Vec::new());
            enumerate_logliks(model, prior, n, &mut |x, ll| {
                let l_all = log_mass(&split.all, ll);
                let l_b = log_mass(&split.b, ll);
                let l_v = log_mass(&split.v, ll);
                let phi = test.eval(x);
                if l_b > f64::NEG_INFINITY {
                    let pb = (l_b - lb).exp();
                    lhs.push((l_v - l_all).exp() * pb);
                    one.push(phi * pb);
                }
                two.push((1.0 - phi) * l_v.exp());
            })?;
            let (lhs, t1, t2) = (ksum(lhs), ksum(one), ksum(two));
            let rhs = t1 + t2 / split.mass_b;
            let a_n = t1 * split.mass_b + t2;
            Ok(ConcentrationReport {
                n,
                lhs,
                rhs,
                slack: rhs - lhs,
                stderr: 0.0,
                method,
                a_n,
                b_n: split.mass_b,
                quotient: a_n / split.mass_b,
            })
        }
        PowerMethod::MonteCarlo { replications, seed } => {
            if replications < 2 {
                return Err(Error::Parameter(
                    "Monte Carlo check needs at least 2 replications".into(),
                ));
            }
            let pb = local_prior_predictive(prior, model, b)?;
            let atoms = prior.atoms();
            let mut post_v = Vec::with_capacity(replications);
            let mut phis = Vec::with_capacity(replications);
            let mut miss = Vec::with_capacity(replications);
            let pv = if split.mass_v > 0.0 {
                Some(local_prior_predictive(prior, model, v)?)
            } else {
                None
            };
            for r in 0..replications {
                let mut rng = derive_stream(seed, "concentration/B", r as u64);
                let x = pb.sample(n, &mut rng)?;
                let s = model.stats(&x);
                let ll: Vec<f64> = atoms.iter().map(|a| model.loglik_stats(a, &s)).collect();
                post_v.push((log_mass(&split.v, &ll) - log_mass(&split.all, &ll)).exp());
                phis.push(test.eval(&x));
                if let Some(pv) = &pv {
                    let mut rng = derive_stream(seed, "concentration/V", r as u64);
                    miss.push(1.0 - test.eval(&pv.sample(n, &mut rng)?));
                }
            }
            let lhs = mean(&post_v);
            let t1 = mean(&phis);
            let t2 = if miss.is_empty() {
                0.0
            } else {
                mean(&miss) * split.mass_v / split.mass_b
            };
            let se_t2 = if miss.is_empty() {
                0.0
            } else {
                std_err(&miss) * split.mass_v / split.mass_b
            };
            // the left side and phi share draws; a conservative combined error
            let stderr = std_err(&post_v) + std_err(&phis) + se_t2;
            let rhs = t1 + t2;
            let a_n = t1 * split.mass_b + t2 * split.mass_b;
            Ok(ConcentrationReport {
                n,
                lhs,
                rhs,
                slack: rhs - lhs,
                stderr,
                method,
                a_n,
                b_n: split.mass_b,
                quotient: a_n / split.mass_b,
            })
        }
    }
}

/// Terms of Le Cam's inequality
/// `P0 Pi(V|X) <= ||P0 - P^{Pi|B}|| + int P_theta phi dPi(.|B)
///     + Pi(V)/Pi(B) int P_theta (1 - phi) dPi(.|V)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeCamReport {
    pub n: usize,
    /// `P0 Pi(V|X)`; samples where the prior predictive vanishes count with
    /// `Pi(V|x) = 1`.
    pub lhs: f64,
    /// Total variation `||P0 - P^{Pi|B}||` (half the L1 distance).
    pub tv_term: f64,
    pub type_one_term: f64,
    pub type_two_term: f64,
    pub rhs: f64,
    pub slack: f64,
}

pub fn lecam_inequality_terms<M: Model>(
    prior: &AtomicPrior<M::Param>,
    b: &Region<M::Param>,
    v: &Region<M::Param>,
    test: &TestFunction<M::Sample>,
    model: &M,
    p0: &M::Param,
    n: usize,
) -> Result<LeCamReport> {
    let split = Split::new(prior, b, v)?;
    if split.mass_b <= 0.0 {
        return Err(Error::EmptyRegion(b.label().into()));
    }
    let lb = split.mass_b.ln();
    let (mut lhs, mut tv, mut one, mut two) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    enumerate_logliks(model, prior, n, &mut |x, ll| {
        let p0x = model.loglik(p0, x).exp();
        let l_all = log_mass(&split.all, ll);
        let pbx = (log_mass(&split.b, ll) - lb).exp();
        let l_v = log_mass(&split.v, ll);
        let post_v = if l_all == f64::NEG_INFINITY {
            1.0
        } else {
            (l_v - l_all).exp()
        };
        let phi = test.eval(x);
        lhs.push(p0x * post_v);
        tv.push((p0x - pbx).abs());
        one.push(phi * pbx);
        two.push((1.0 - phi) * l_v.exp());
    })?;
    let lhs = ksum(lhs);
    let tv_term = 0.5 * ksum(tv);
    let type_one_term = ksum(one);
    // Pi(V)/Pi(B) * int P(1-phi) dPi(.|V) = Pi(B)^-1 int_V P(1-phi) dPi
    let type_two_term = ksum(two) / split.mass_b;
    let rhs = tv_term + type_one_term + type_two_term;
    Ok(LeCamReport {
        n,
        lhs,
        tv_term,
        type_one_term,
        type_two_term,
        rhs,
        slack: rhs - lhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::FiniteDist;
    use crate::models::{CategoricalModel, Metric};
    use proptest::prelude::*;

    fn coin(p: f64) -> FiniteDist {
        FiniteDist::new(vec![p, 1.0 - p]).unwrap()
    }

    fn five_atoms() -> AtomicPrior<FiniteDist> {
        AtomicPrior::new(
            [0.1, 0.3, 0.5, 0.7, 0.9].iter().map(|&p| coin(p)).collect(),
            vec![0.1, 0.2, 0.3, 0.25, 0.15],
        )
        .unwrap()
    }

    fn below(t: f64) -> Region<FiniteDist> {
        Region::predicate(format!("p<{t}"), move |d: &FiniteDist| d.mass(0) < t)
    }

    fn above(t: f64) -> Region<FiniteDist> {
        Region::predicate(format!("p>{t}"), move |d: &FiniteDist| d.mass(0) > t)
    }

    #[test]
    fn constant_tests_have_trivial_power() {
        let m = CategoricalModel::new(2).unwrap();
        let (b, v) = (below(0.4), above(0.6));
        let zero = bayes_test_power(
            &TestFunction::constant(0.0),
            &five_atoms(),
            &b,
            &v,
            &m,
            4,
            PowerMethod::Exact,
        )
        .unwrap();
        assert!(zero.type_one.abs() < 1e-15 && (zero.type_two - 0.4).abs() < 1e-12);
        let one = bayes_test_power(
            &TestFunction::constant(1.0),
            &five_atoms(),
            &b,
            &v,
            &m,
            4,
            PowerMethod::Exact,
        )
        .unwrap();
        assert!((one.type_one - 0.3).abs() < 1e-12 && one.type_two.abs() < 1e-15);
    }

    #[test]
    fn single_atoms_give_plain_lr_test() {
        let m = CategoricalModel::new(2).unwrap();
        let prior = AtomicPrior::uniform(vec![coin(0.3), coin(0.8)]).unwrap();
        let phi = barycentre_lr_test(&prior, &below(0.5), &above(0.5), &m).unwrap();
        for x in [vec![0, 0, 1], vec![1, 1, 0], vec![0, 1]] {
            let lr = m.loglik(&coin(0.8), &x) - m.loglik(&coin(0.3), &x);
            assert_eq!(phi.eval(&x), if lr > 0.0 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn identical_barycentres_tie_everywhere() {
        let m = CategoricalModel::new(2).unwrap();
        let prior = AtomicPrior::uniform(vec![coin(0.3), coin(0.3)]).unwrap();
        let first = Region::predicate("first", {
            let a = prior.shared_atoms();
            move |d: &FiniteDist| std::ptr::eq(d, &a[0])
        });
        let second = first.clone().complement();
        let phi = barycentre_lr_test(&prior, &first, &second, &m).unwrap();
        m.enumerate(3, &mut |x| assert_eq!(phi.eval(x), 0.5)).unwrap();
        let hb = hellinger_transform_power_bound(&prior, &first, &second, &m, 3, None).unwrap();
        let half = hb.alphas.iter().position(|&a| (a - 0.5).abs() < 1e-12).unwrap();
        assert!((hb.values[half] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disjoint_barycentres_have_zero_bound() {
        let m = CategoricalModel::new(2).unwrap();
        let prior = AtomicPrior::uniform(vec![coin(1.0), coin(0.0)]).unwrap();
        let hb = hellinger_transform_power_bound(&prior, &above(0.5), &below(0.5), &m, 3, Some(&[0.5])).unwrap();
        assert_eq!(hb.bound, 0.0);
    }

    #[test]
    fn two_atom_b_versus_one_atom_v_within_bound() {
        let m = CategoricalModel::new(2).unwrap();
        let prior = AtomicPrior::new(vec![coin(0.2), coin(0.35), coin(0.8)], vec![0.3, 0.3, 0.4]).unwrap();
        let (b, v) = (below(0.5), above(0.5));
        let phi = barycentre_lr_test(&prior, &b, &v, &m).unwrap();
        let rep = bayes_test_power(&phi, &prior, &b, &v, &m, 4, PowerMethod::Exact).unwrap();
        // oracle: sum over all 16 samples of min(0.3 p1 + 0.3 p2, 0.4 p3)
        let mut oracle = 0.0;
        for mask in 0..16u32 {
            let k = mask.count_ones() as i32;
            let lik = |p: f64| p.powi(k) * (1.0 - p).powi(4 - k);
            oracle += f64::min(0.3 * lik(0.2) + 0.3 * lik(0.35), 0.4 * lik(0.8));
        }
        assert!((rep.total - oracle).abs() < 1e-14);
        let hb = hellinger_transform_power_bound(&prior, &b, &v, &m, 4, None).unwrap();
        assert!(hb.values.iter().all(|&val| rep.total <= val + 1e-14));
    }

    #[test]
    fn minimax_bound_dominates_half_transform_for_separated_intervals() {
        let m = CategoricalModel::new(2).unwrap();
        let prior = AtomicPrior::new(
            vec![coin(0.1), coin(0.2), coin(0.7), coin(0.85)],
            vec![0.2, 0.3, 0.1, 0.4],
        )
        .unwrap();
        let (b, v) = (below(0.5), above(0.5));
        // hulls are [0.1, 0.2] and [0.7, 0.85]; Hellinger distance is monotone in p
        let eps = m.param_distance(&coin(0.2), &coin(0.7), Metric::Hellinger).unwrap();
        for n in [1, 4, 8, 12] {
            let hb = hellinger_transform_power_bound(&prior, &b, &v, &m, n, Some(&[0.5])).unwrap();
            assert!(hb.values[0] <= minimax_hellinger_bound(0.5, 0.5, n, eps) + 1e-14);
        }
    }

    #[test]
    fn barycentre_test_is_optimal_among_deterministic_tests() {
        let m = CategoricalModel::new(2).unwrap();
        let prior = five_atoms();
        let (b, v) = (below(0.4), above(0.6));
        for n in 1..=3 {
            let phi = barycentre_lr_test(&prior, &b, &v, &m).unwrap();
            let best = bayes_test_power(&phi, &prior, &b, &v, &m, n, PowerMethod::Exact)
                .unwrap()
                .total;
            let mut samples = Vec::new();
            m.enumerate(n, &mut |x| samples.push(x.clone())).unwrap();
            for mask in 0u64..(1 << samples.len()) {
                let table = samples.clone();
                let t = TestFunction::new("table", move |x: &Vec<usize>| {
                    let i = table.iter().position(|s| s == x).unwrap();
                    ((mask >> i) & 1) as f64
                });
                let tot = bayes_test_power(&t, &prior, &b, &v, &m, n, PowerMethod::Exact)
                    .unwrap()
                    .total;
                assert!(best <= tot + 1e-14);
            }
        }
    }

    #[test]
    fn concentration_trivial_cases() {
        let m = CategoricalModel::new(2).unwrap();
        let (b, v) = (below(0.4), above(0.6));
        let r = concentration_check(
            &five_atoms(),
            &b,
            &v,
            &TestFunction::constant(1.0),
            &m,
            5,
            PowerMethod::Exact,
        )
        .unwrap();
        assert!(r.rhs >= 1.0 - 1e-12 && r.lhs <= 1.0);
        let r = concentration_check(
            &five_atoms(),
            &b,
            &Region::empty(),
            &TestFunction::constant(0.3),
            &m,
            5,
            PowerMethod::Exact,
        )
        .unwrap();
        assert_eq!(r.lhs, 0.0);
    }

    #[test]
    fn concentration_exact_and_monte_carlo_agree() {
        let m = CategoricalModel::new(2).unwrap();
        let (b, v) = (below(0.4), above(0.6));
        let phi = barycentre_lr_test(&five_atoms(), &b, &v, &m).unwrap();
        let ex = concentration_check(&five_atoms(), &b, &v, &phi, &m, 6, PowerMethod::Exact).unwrap();
        assert!(ex.holds());
        let mc = concentration_check(
            &five_atoms(),
            &b,
            &v,
            &phi,
            &m,
            6,
            PowerMethod::MonteCarlo {
                replications: 20_000,
                seed: 3,
            },
        )
        .unwrap();
        assert!((mc.lhs - ex.lhs).abs() < 4.0 * mc.stderr, "{mc:?} {ex:?}");
        assert!((mc.rhs - ex.rhs).abs() < 4.0 * mc.stderr);
    }

    #[test]
    fn lecam_holds_near_and_far() {
        let m = CategoricalModel::new(2).unwrap();
        let prior = five_atoms();
        let (b, v) = (below(0.4), above(0.6));
        let phi = barycentre_lr_test(&prior, &b, &v, &m).unwrap();
        for (p0, n) in [(coin(0.3), 6), (coin(0.95), 8)] {
            let r = lecam_inequality_terms(&prior, &b, &v, &phi, &m, &p0, n).unwrap();
            assert!(r.slack >= -1e-12, "{r:?}");
        }
        let far = lecam_inequality_terms(&prior, &b, &v, &phi, &m, &coin(0.99), 10).unwrap();
        assert!(far.tv_term > 0.8);
        let empty = lecam_inequality_terms(&prior, &b, &Region::empty(), &phi, &m, &coin(0.5), 4).unwrap();
        assert_eq!(empty.lhs, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn exact_slack_nonnegative(
            cut in 0.15f64..0.85,
            gap in 0.0f64..0.3,
            table in proptest::collection::vec(0.0f64..1.0, 32),
            n in 1usize..=5,
        ) {
            let m = CategoricalModel::new(2).unwrap();
            let (b, v) = (below(cut), above(cut + gap));
            let split = Split::new(&five_atoms(), &b, &v).unwrap();
            prop_assume!(split.mass_b > 0.0);
            let phi = TestFunction::new("random", move |x: &Vec<usize>| {
                let idx = x.iter().fold(0usize, |acc, &s| acc * 2 + s) % 32;
                table[idx]
            });
            let r = concentration_check(&five_atoms(), &b, &v, &phi, &m, n, PowerMethod::Exact).unwrap();
            prop_assert!(r.slack >= -1e-12);
        }

        #[test]
        fn bound_dominates_barycentre_power(lo in 0.2f64..0.5, hi in 0.5f64..0.8, n in 1usize..=6) {
            let m = CategoricalModel::new(2).unwrap();
            let (b, v) = (below(lo), above(hi));
            let phi = barycentre_lr_test(&five_atoms(), &b, &v, &m);
            prop_assume!(phi.is_ok());
            let rep = bayes_test_power(&phi.unwrap(), &five_atoms(), &b, &v, &m, n, PowerMethod::Exact).unwrap();
            let hb = hellinger_transform_power_bound(&five_atoms(), &b, &v, &m, n, None).unwrap();
            prop_assert!(hb.values.iter().all(|&val| rep.total <= val + 1e-13));
        }

        #[test]
        fn monotone_refinement(table in proptest::collection::vec(0.0f64..1.0, 16), n in 1usize..=4) {
            let m = CategoricalModel::new(2).unwrap();
            let phi = TestFunction::new("random", move |x: &Vec<usize>| {
                table[x.iter().fold(0usize, |acc, &s| acc * 2 + s) % 16]
            });
            let small = bayes_test_power(&phi, &five_atoms(), &below(0.2), &above(0.8), &m, n, PowerMethod::Exact).unwrap();
            let big = bayes_test_power(&phi, &five_atoms(), &below(0.4), &above(0.6), &m, n, PowerMethod::Exact).unwrap();
            prop_assert!(big.type_two >= small.type_two - 1e-15);
            prop_assert!(small.type_one <= big.type_one + 1e-15);
        }
    }
}
