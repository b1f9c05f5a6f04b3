//! Finite probability vectors, transition matrices and the divergences
//! between them.
//!
//! Conventions: `H^2(p, q) = sum (sqrt p - sqrt q)^2` (so `H <= sqrt 2`),
//! total variation is `sup_A |P(A) - Q(A)| = L1 / 2`, and `KL(p0, p)` is
//! `+inf` exactly when `p0` charges a cell that `p` does not.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ksum, CompensatedSum};

/// Tolerance on the total mass accepted by [`FiniteDist::new`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Default tolerance of [`stationary_distribution`].
pub const STATIONARY_TOL: f64 = 1e-12;

/// Above this many states the stationary law is found by iteration.
pub const DIRECT_SOLVE_MAX_STATES: usize = 64;

/// Probability vector on `{0, ..., N-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FiniteDist {
    probs: Vec<f64>,
}

impl FiniteDist {
    /// Validates and renormalises `probs`; the mass must already be within
    /// [`MASS_TOLERANCE`] of one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let total = check_weights(&probs)?;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self::normalised(probs, total))
    }

    /// Normalises arbitrary nonnegative weights with positive total.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total = check_weights(&weights)?;
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Ok(Self::normalised(weights, total))
    }

    fn normalised(mut probs: Vec<f64>, total: f64) -> Self {
        if total != 1.0 {
            probs.iter_mut().for_each(|p| *p /= total);
        }
        Self { probs }
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
        })
    }

    /// Dirac mass at `k`.
    pub fn point(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::InvalidDistribution(format!("point {k} outside 0..{n}")));
        }
        let mut probs = vec![0.0; n];
        probs[k] = 1.0;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn mass(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    /// Mass of a set of cells (duplicates counted once).
    pub fn mass_of(&self, cells: &[usize]) -> f64 {
        let mut seen = vec![false; self.len()];
        ksum(cells.iter().filter_map(|&k| {
            if k < seen.len() && !seen[k] {
                seen[k] = true;
                Some(self.probs[k])
            } else {
                None
            }
        }))
    }

    /// `sum_k p_k f_k`.
    pub fn expectation(&self, f: &[f64]) -> Result<f64> {
        same_len(self.len(), f.len())?;
        Ok(ksum(self.probs.iter().zip(f).map(|(p, v)| p * v)))
    }

    /// Indices with positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.probs[k] > 0.0).collect()
    }

    pub fn total(&self) -> f64 {
        ksum(self.probs.iter().copied())
    }
}

impl TryFrom<Vec<f64>> for FiniteDist {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        FiniteDist::new(v)
    }
}

impl From<FiniteDist> for Vec<f64> {
    fn from(d: FiniteDist) -> Self {
        d.probs
    }
}

fn check_weights(w: &[f64]) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::InvalidDistribution("empty support".into()));
    }
    if let Some(bad) = w.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "entry {bad} is not a nonnegative number"
        )));
    }
    Ok(ksum(w.iter().copied()))
}

fn same_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// Row-stochastic matrix; row `l` is the law of the next state given the
/// current state `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix {
    rows: Vec<FiniteDist>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidDistribution("transition matrix has no states".into()));
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(l, r)| {
                same_len(n, r.len())?;
                FiniteDist::new(r).map_err(|e| Error::InvalidDistribution(format!("row {l}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    pub fn from_rows(rows: Vec<FiniteDist>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidDistribution("transition matrix has no states".into()));
        }
        for r in &rows {
            same_len(n, r.len())?;
        }
        Ok(Self { rows })
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, from: usize) -> &FiniteDist {
        &self.rows[from]
    }

    pub fn rows(&self) -> &[FiniteDist] {
        &self.rows
    }

    /// `p(to | from)`.
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.rows[from].mass(to)
    }

    pub fn min_entry(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.probs().iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// The uniform minorisation constant `lambda = min p(k|l)` when positive.
    pub fn ergodicity_lambda(&self) -> Option<f64> {
        let m = self.min_entry();
        (m > 0.0).then_some(m)
    }

    /// `row * T`.
    pub fn step(&self, dist: &[f64]) -> Vec<f64> {
        let n = self.n_states();
        (0..n)
            .map(|k| ksum((0..n).map(|l| dist[l] * self.transition(l, k))))
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = Error;
    fn try_from(v: Vec<Vec<f64>>) -> Result<Self> {
        TransitionMatrix::new(v)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(t: TransitionMatrix) -> Self {
        t.rows.into_iter().map(Vec::from).collect()
    }
}

/// Hellinger distance `sqrt(sum (sqrt p - sqrt q)^2)`.
pub fn hellinger(p: &FiniteDist, q: &FiniteDist) -> Result<f64> {
    same_len(p.len(), q.len())?;
    let h2 = ksum(p.probs.iter().zip(&q.probs).map(|(a, b)| {
        let d = a.sqrt() - b.sqrt();
        d * d
    }));
    Ok(h2.max(0.0).sqrt())
}

/// Total variation `sum |p - q| / 2`.
pub fn total_variation(p: &FiniteDist, q: &FiniteDist) -> Result<f64> {
    same_len(p.len(), q.len())?;
    Ok(0.5 * ksum(p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs())))
}

/// `KL(p0, p) = sum p0 log(p0 / p)`.
pub fn kl_divergence(p0: &FiniteDist, p: &FiniteDist) -> Result<f64> {
    same_len(p0.len(), p.len())?;
    let mut acc = CompensatedSum::new();
    for (&a, &b) in p0.probs.iter().zip(&p.probs) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc.add(a * (a / b).ln());
    }
    Ok(acc.value().max(0.0))
}

/// Second KL moment `sum p0 log^2(p0 / p)`.
pub fn kl_second_moment(p0: &FiniteDist, p: &FiniteDist) -> Result<f64> {
    same_len(p0.len(), p.len())?;
    let mut acc = CompensatedSum::new();
    for (&a, &b) in p0.probs.iter().zip(&p.probs) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        let l = (a / b).ln();
        acc.add(a * l * l);
    }
    Ok(acc.value())
}

/// Hellinger transform `sum p^alpha q^(1-alpha)` with `0^0 = 0`, so the
/// endpoints are `Q(p > 0)` at `alpha = 0` and `P(q > 0)` at `alpha = 1`.
pub fn hellinger_transform(p: &FiniteDist, q: &FiniteDist, alpha: f64) -> Result<f64> {
    same_len(p.len(), q.len())?;
    check_alpha(alpha)?;
    Ok(ksum(
        p.probs.iter().zip(&q.probs).map(|(&a, &b)| transform_term(a, b, alpha)),
    ))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha = {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// One term `a^alpha b^(1-alpha)` of a Hellinger transform.
pub(crate) fn transform_term(a: f64, b: f64, alpha: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else if alpha == 0.0 {
        b
    } else if alpha == 1.0 {
        a
    } else {
        (alpha * a.ln() + (1.0 - alpha) * b.ln()).exp()
    }
}

/// The grid `{0, 0.01, ..., 1}`.
pub fn alpha_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Minimiser and minimum of the Hellinger transform over `grid`.
pub fn hellinger_transform_min(p: &FiniteDist, q: &FiniteDist, grid: &[f64]) -> Result<(f64, f64)> {
    let mut best = (f64::NAN, f64::INFINITY);
    for &a in grid {
        let v = hellinger_transform(p, q, a)?;
        if v < best.1 {
            best = (a, v);
        }
    }
    if best.0.is_nan() {
        return Err(Error::Domain("empty alpha grid".into()));
    }
    Ok(best)
}

/// Stationary law of an irreducible chain.
///
/// Up to [`DIRECT_SOLVE_MAX_STATES`] states this solves
/// `(T^t - I) pi = 0, sum pi = 1` directly; larger chains use power
/// iteration on the lazy chain with Aitken extrapolation.
pub fn stationary_distribution(t: &TransitionMatrix, tol: f64) -> Result<FiniteDist> {
    let pi = if t.n_states() <= DIRECT_SOLVE_MAX_STATES {
        stationary_direct(t)?
    } else {
        stationary_iterative(t, tol)?
    };
    let resid = stationary_residual(t, &pi);
    if !(resid <= tol.max(1e-14)) {
        return Err(Error::Ergodicity(format!(
            "stationary residual {resid:e} exceeds tolerance {tol:e}"
        )));
    }
    FiniteDist::from_weights(pi)
}

/// `|| pi T - pi ||_1`.
pub fn stationary_residual(t: &TransitionMatrix, pi: &[f64]) -> f64 {
    let next = t.step(pi);
    ksum(next.iter().zip(pi).map(|(a, b)| (a - b).abs()))
}

fn stationary_direct(t: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = t.n_states();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        for l in 0..n {
            a[(k, l)] = t.transition(l, k) - if k == l { 1.0 } else { 0.0 };
        }
    }
    for l in 0..n {
        a[(n - 1, l)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = a.full_piv_lu();
    let u = lu.u();
    let scale = (0..n).map(|i| u[(i, i)].abs()).fold(0.0, f64::max);
    let smallest = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(smallest > 1e-12 * scale.max(1.0) * n as f64) {
        return Err(Error::Ergodicity(
            "stationary system is rank deficient (chain is reducible)".into(),
        ));
    }
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Ergodicity("stationary system is singular".into()))?;
    finish_stationary(sol.iter().copied().collect())
}

fn finish_stationary(mut pi: Vec<f64>) -> Result<Vec<f64>> {
    if let Some(bad) = pi.iter().find(|&&p| p < -1e-10 || !p.is_finite()) {
        return Err(Error::Ergodicity(format!("stationary solve produced entry {bad}")));
    }
    pi.iter_mut().for_each(|p| *p = p.max(0.0));
    let total = ksum(pi.iter().copied());
    pi.iter_mut().for_each(|p| *p /= total);
    Ok(pi)
}

fn stationary_iterative(t: &TransitionMatrix, tol: f64) -> Result<Vec<f64>> {
    const MAX_ITER: usize = 1_000_000;
    let n = t.n_states();
    let lazy = |x: &[f64]| -> Vec<f64> {
        let y = t.step(x);
        x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect()
    };
    let mut x = vec![1.0 / n as f64; n];
    for it in 0..MAX_ITER {
        let x1 = lazy(&x);
        let x2 = lazy(&x1);
        if stationary_residual(t, &x2) <= tol {
            return finish_stationary(x2);
        }
        // Aitken extrapolation, kept only when it stays a probability vector
        // and improves the residual.
        let acc: Vec<f64> = (0..n)
            .map(|i| {
                let d1 = x1[i] - x[i];
                let d2 = x2[i] - x1[i];
                let den = d2 - d1;
                if den.abs() > 1e-300 {
                    x2[i] - d2 * d2 / den
                } else {
                    x2[i]
                }
            })
            .collect();
        let total = ksum(acc.iter().copied());
        let ok = total > 0.0 && acc.iter().all(|&p| p >= 0.0 && p.is_finite());
        x = if ok && it % 3 == 2 {
            let acc: Vec<f64> = acc.iter().map(|p| p / total).collect();
            if stationary_residual(t, &acc) < stationary_residual(t, &x2) {
                acc
            } else {
                x2
            }
        } else {
            x2
        };
    }
    Err(Error::Ergodicity(format!(
        "power iteration did not converge in {MAX_ITER} steps"
    )))
}

/// Joint law of `(Z_i, Z_{i-1})` under stationarity: `out[k][l] = p(k|l) pi(l)`.
pub fn joint_two_step(t: &TransitionMatrix) -> Result<Vec<Vec<f64>>> {
    let pi = stationary_distribution(t, STATIONARY_TOL)?;
    let n = t.n_states();
    Ok((0..n)
        .map(|k| (0..n).map(|l| t.transition(l, k) * pi.mass(l)).collect())
        .collect())
}

/// `max_{k,l} |p(k,l) - q(k,l)|` between two joint matrices.
pub fn max_joint_bin_distance(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<f64> {
    same_len(p.len(), q.len())?;
    let mut m: f64 = 0.0;
    for (a, b) in p.iter().zip(q) {
        same_len(a.len(), b.len())?;
        for (x, y) in a.iter().zip(b) {
            m = m.max((x - y).abs());
        }
    }
    Ok(m)
}
