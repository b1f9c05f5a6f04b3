use serde::{Deserialize, Serialize};

use super::{barycentre_lr_test, TestFunction};
use crate::error::{Error, Result};
use crate::measures::{hellinger, FiniteDist};
use crate::models::{Metric, Model};
use crate::numeric::ksum;
use crate::priors::{AtomicPrior, Region};

/// Test against the far region `{H(P0, P) >= 4 eps}`, built as the maximum
/// of barycentre tests of the ball `{H(P0, P) < eps}` against `eps`-balls
/// that cover the far region.
#[derive(Debug, Clone)]
pub struct CoveringTest {
    pub test: TestFunction<Vec<usize>>,
    pub b: Region<FiniteDist>,
    pub v: Region<FiniteDist>,
    /// Grid index of each used ball centre and the prior mass it captured.
    pub balls: Vec<(usize, f64)>,
    pub mass_b: f64,
}

/// `sum_i 2 sqrt(Pi(V_i) / Pi(B)) exp(-2 n eps^2)`.
pub fn covering_bound(ball_masses: &[f64], mass_b: f64, n: usize, eps: f64) -> f64 {
    let factor = 2.0 * (-2.0 * n as f64 * eps * eps).exp();
    ksum(ball_masses.iter().map(|m| factor * (m / mass_b).sqrt()))
}

impl CoveringTest {
    pub fn bound(&self, n: usize, eps: f64) -> f64 {
        covering_bound(&self.balls.iter().map(|b| b.1).collect::<Vec<_>>(), self.mass_b, n, eps)
    }
}

/// Builds the covering test. Only grid points inside the far region serve
/// as centres; every far prior atom must lie within `eps` of one of them,
/// otherwise [`Error::Cover`] is returned. Each atom joins the first ball
/// (by grid index) containing it.
pub fn covering_test<M: Model<Param = FiniteDist, Sample = Vec<usize>>>(
    p0: &FiniteDist,
    eps: f64,
    grid: &[FiniteDist],
    prior: &AtomicPrior<FiniteDist>,
    model: &M,
) -> Result<CoveringTest> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("cover radius {eps} must be positive")));
    }
    let far = |p: &FiniteDist| hellinger(p0, p).map(|h| h >= 4.0 * eps).unwrap_or(false);
    let centres: Vec<usize> = (0..grid.len()).filter(|&i| far(&grid[i])).collect();
    let atoms = prior.atoms();
    let mut assignment = vec![None; atoms.len()];
    for (a, atom) in atoms.iter().enumerate() {
        if prior.weights()[a] <= 0.0 || !far(atom) {
            continue;
        }
        let mut ball = None;
        for &c in &centres {
            if hellinger(&grid[c], atom)? < eps {
                ball = Some(c);
                break;
            }
        }
        match ball {
            Some(c) => assignment[a] = Some(c),
            None => {
                return Err(Error::Cover(format!(
                    "prior atom {a} is at Hellinger distance >= {eps} from every far grid point"
                )))
            }
        }
    }
    let p0c = p0.clone();
    let b = Region::predicate(format!("hellinger-ball(eps={eps})"), move |p: &FiniteDist| {
        hellinger(&p0c, p).map(|h| h < eps).unwrap_or(false)
    });
    let p0c = p0.clone();
    let v = Region::predicate(format!("hellinger-far(4eps={})", 4.0 * eps), move |p: &FiniteDist| {
        hellinger(&p0c, p).map(|h| h >= 4.0 * eps).unwrap_or(false)
    });
    let mass_b = prior.mass(&b);
    let mut balls = Vec::new();
    let mut tests = Vec::new();
    for &c in &centres {
        let members: Vec<bool> = assignment.iter().map(|a| *a == Some(c)).collect();
        let mass = prior.mass_of_mask(&members);
        if mass <= 0.0 {
            continue;
        }
        let member_atoms: Vec<FiniteDist> = (0..atoms.len())
            .filter(|&i| members[i])
            .map(|i| atoms[i].clone())
            .collect();
        let vi = Region::points(model, member_atoms, Metric::Hellinger).with_label(format!("cover-ball({c})"));
        tests.push(barycentre_lr_test(prior, &b, &vi, model)?);
        balls.push((c, mass));
    }
    let test = TestFunction::max_of("covering", tests)
        .with_param("eps", eps)
        .with_param("balls", balls.len() as f64);
    Ok(CoveringTest {
        test,
        b,
        v,
        balls,
        mass_b,
    })
}

/// Empirical two-step frequencies `p_hat(k, l) = n^-1 #{i: Z_i = k, Z_{i-1} = l}`.
fn joint_frequencies(path: &[usize], states: usize) -> Vec<Vec<f64>> {
    let n = path.len().saturating_sub(1);
    let mut out = vec![vec![0.0; states]; states];
    if n == 0 {
        return out;
    }
    for w in path.windows(2) {
        out[w[1]][w[0]] += 1.0;
    }
    out.iter_mut().flatten().for_each(|v| *v /= n as f64);
    out
}

/// `phi(Z) = max_{k, l, +/-} 1{+/-(p_hat(k, l) - p0(k, l)) >= eps}` for a
/// joint-bin matrix `p0_joint[k][l]`. `delta_n` is recorded for the
/// companion bound.
pub fn hoeffding_markov_test(p0_joint: Vec<Vec<f64>>, eps: f64, delta_n: f64) -> Result<TestFunction<Vec<usize>>> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("threshold {eps} must be positive")));
    }
    let states = p0_joint.len();
    if states == 0 || p0_joint.iter().any(|r| r.len() != states) {
        return Err(Error::Parameter("joint-bin matrix must be square".into()));
    }
    Ok(TestFunction::new("hoeffding_markov", move |path: &Vec<usize>| {
        if path.len() < 2 {
            return 0.0;
        }
        let phat = joint_frequencies(path, states);
        let hit = (0..states).any(|k| (0..states).any(|l| (phat[k][l] - p0_joint[k][l]).abs() >= eps));
        if hit {
            1.0
        } else {
            0.0
        }
    })
    .with_param("eps", eps)
    .with_param("delta_n", delta_n))
}

/// `exp(-lambda^2 (n delta - 2/lambda)^2 / (2n))`, or 1 when
/// `n delta <= 2 / lambda`.
pub fn hoeffding_bound(lambda: f64, delta: f64, n: usize) -> f64 {
    let nd = n as f64 * delta;
    if n == 0 || nd <= 2.0 / lambda {
        return 1.0;
    }
    (-(lambda * lambda) * (nd - 2.0 / lambda).powi(2) / (2.0 * n as f64)).exp()
}

/// Whether some cell has `p_hat(k, l) - p(k, l) >= delta`.
pub fn hoeffding_exceedance(path: &[usize], p_joint: &[Vec<f64>], delta: f64) -> bool {
    let states = p_joint.len();
    let phat = joint_frequencies(path, states);
    (0..states).any(|k| (0..states).any(|l| phat[k][l] - p_joint[k][l] >= delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Alternatives to the right: `1{X_(1) > theta0 + eps}`.
    Right,
    /// Alternatives to the left: `1{X_(n) < theta0 + 1 - eps}`.
    Left,
}

/// Test for the location of `U[theta, theta + 1]` data.
pub fn uniform_location_test(theta0: f64, eps: f64, side: Side) -> Result<TestFunction<Vec<f64>>> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("separation {eps} must be positive")));
    }
    let f = move |x: &Vec<f64>| -> f64 {
        if x.is_empty() {
            return 0.0;
        }
        let hit = match side {
            Side::Right => x.iter().copied().fold(f64::INFINITY, f64::min) > theta0 + eps,
            Side::Left => x.iter().copied().fold(f64::NEG_INFINITY, f64::max) < theta0 + 1.0 - eps,
        };
        if hit {
            1.0
        } else {
            0.0
        }
    };
    Ok(TestFunction::new("uniform_location", f)
        .with_param("theta0", theta0)
        .with_param("eps", eps))
}

/// `phi = 1{|n^-1 sum f(X_i) - P0 f| >= 3 eps / 2}` for `0 <= f <= 1`.
pub fn weak_neighborhood_test(p0: &FiniteDist, f: &[f64], eps: f64) -> Result<TestFunction<Vec<usize>>> {
    if f.len() != p0.len() {
        return Err(Error::Dimension {
            expected: p0.len(),
            got: f.len(),
        });
    }
    if f.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain("test function must take values in [0, 1]".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("radius {eps} must be positive")));
    }
    let target = p0.expectation(f)?;
    let f = f.to_vec();
    Ok(TestFunction::new("weak_neighborhood", move |x: &Vec<usize>| {
        if x.is_empty() {
            return 0.0;
        }
        let m = ksum(x.iter().map(|&k| f[k])) / x.len() as f64;
        if (m - target).abs() >= 1.5 * eps {
            1.0
        } else {
            0.0
        }
    })
    .with_param("eps", eps)
    .with_param("p0_f", target))
}

/// Hoeffding bounds `(type I, type II) = (2 e^{-n eps^2 / 2}, e^{-n eps^2 / 2})`
/// for laws with `|Pf - P0 f| < eps` and `|Pf - P0 f| >= 2 eps` respectively.
pub fn weak_neighborhood_bound(n: usize, eps: f64) -> (f64, f64) {
    let e = (-(n as f64) * eps * eps / 2.0).exp();
    (2.0 * e, e)
}

/// `phi_n = prod_m 1{some X_i equals k(m)}`.
pub fn freedman_escape_test(symbols: &[usize]) -> Result<TestFunction<Vec<usize>>> {
    if symbols.is_empty() {
        return Err(Error::Parameter("escape test needs at least one symbol".into()));
    }
    let symbols = symbols.to_vec();
    let test = TestFunction::new("freedman_escape", move |x: &Vec<usize>| {
        if symbols.iter().all(|s| x.contains(s)) {
            1.0
        } else {
            0.0
        }
    });
    Ok(test)
}

/// `P^n(every symbol appears) = sum_{S} (-1)^{|S|} (1 - P(S))^n` over
/// subsets `S` of the symbols; exactly 0 when some symbol has mass zero.
pub fn freedman_escape_expectation(p: &FiniteDist, symbols: &[usize], n: usize) -> Result<f64> {
    if symbols.iter().any(|&s| s >= p.len()) {
        return Err(Error::Parameter("escape symbol outside the support".into()));
    }
    if symbols.len() > 20 {
        return Err(Error::Infeasible(
            "inclusion-exclusion over more than 20 symbols".into(),
        ));
    }
    if symbols.iter().any(|&s| p.mass(s) == 0.0) || n < symbols.len() {
        return Ok(0.0);
    }
    let m = symbols.len();
    let mut terms = Vec::with_capacity(1 << m);
    for mask in 0u32..(1 << m) {
        let excluded = ksum((0..m).filter(|j| mask & (1 << j) != 0).map(|j| p.mass(symbols[j])));
        let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(sign * (1.0 - excluded).max(0.0).powi(n as i32));
    }
    Ok(ksum(terms).clamp(0.0, 1.0))
}

/// Union lower bound `1 - sum_m (1 - P(k(m)))^n` on the escape probability.
pub fn freedman_escape_union_bound(p: &FiniteDist, symbols: &[usize], n: usize) -> f64 {
    1.0 - ksum(symbols.iter().map(|&s| (1.0 - p.mass(s)).powi(n as i32)))
}
