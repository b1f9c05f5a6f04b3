use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::{AtomicPrior, Ball, Region};
use crate::error::{Error, Result};
use crate::measures::{FiniteDist, TransitionMatrix};
use crate::numeric::{ksum, ln_gamma, log1m_exp, log_sum_exp};

/// Monte Carlo estimate of a probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl MassEstimate {
    pub fn from_hits(hits: usize, samples: usize) -> Self {
        let p = hits as f64 / samples as f64;
        Self {
            value: p,
            stderr: (p * (1.0 - p) / samples as f64).sqrt(),
            samples,
        }
    }
}

/// Log-scale mass estimate, possibly from importance sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMassEstimate {
    pub log_mass: f64,
    /// Standard error of the mass relative to the estimate.
    pub rel_stderr: f64,
    pub hits: usize,
    pub samples: usize,
    /// Concentration scaling of the proposal; 1 is plain Monte Carlo.
    pub temperature: f64,
}

fn check_concentration(alpha: &[f64]) -> Result<()> {
    if alpha.is_empty() {
        return Err(Error::Parameter("empty concentration vector".into()));
    }
    if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::Parameter("Dirichlet concentrations must be positive".into()));
    }
    Ok(())
}

/// `ln B(alpha) = sum ln Gamma(alpha_k) - ln Gamma(sum alpha_k)`.
pub fn ln_multivariate_beta(alpha: &[f64]) -> f64 {
    ksum(alpha.iter().map(|&a| ln_gamma(a))) - ln_gamma(ksum(alpha.iter().copied()))
}

/// Log-probabilities of a Dirichlet draw, computed in log space so tiny
/// concentrations do not underflow to an all-zero vector.
pub fn sample_dirichlet_log<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            if a >= 1.0 {
                Gamma::new(a, 1.0).expect("positive shape").sample(rng).ln()
            } else {
                // G(a) = G(a + 1) U^(1/a)
                let g = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng).ln();
                let u: f64 = rng.random::<f64>();
                g + u.max(f64::MIN_POSITIVE).ln() / a
            }
        })
        .collect();
    let lse = log_sum_exp(&logs);
    logs.iter().map(|l| l - lse).collect()
}

fn probs_from_logs(logs: &[f64]) -> FiniteDist {
    FiniteDist::from_weights(logs.iter().map(|l| l.exp()).collect()).expect("normalised in log space")
}

/// Dirichlet prior on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletPrior {
    alpha: Vec<f64>,
}

impl DirichletPrior {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        check_concentration(&alpha)?;
        Ok(Self { alpha })
    }

    pub fn symmetric(dim: usize, a: f64) -> Result<Self> {
        Self::new(vec![a; dim])
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn mean(&self) -> FiniteDist {
        FiniteDist::from_weights(self.alpha.clone()).expect("positive concentrations")
    }

    pub fn log_density(&self, p: &FiniteDist) -> f64 {
        if p.len() != self.dim() {
            return f64::NEG_INFINITY;
        }
        let mut terms = vec![-ln_multivariate_beta(&self.alpha)];
        for (&a, &q) in self.alpha.iter().zip(p.probs()) {
            if a != 1.0 {
                terms.push((a - 1.0) * q.ln());
            }
        }
        ksum(terms)
    }

    /// Log probability of a particular sequence with cell counts `counts`
    /// under the Dirichlet mixture of i.i.d. laws.
    pub fn log_marginal(&self, counts: &[usize]) -> Result<f64> {
        if counts.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: counts.len(),
            });
        }
        let post: Vec<f64> = self.alpha.iter().zip(counts).map(|(a, &c)| a + c as f64).collect();
        Ok(ln_multivariate_beta(&post) - ln_multivariate_beta(&self.alpha))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FiniteDist {
        probs_from_logs(&sample_dirichlet_log(&self.alpha, rng))
    }

    /// Equal-weight atomisation from `atoms` independent draws.
    pub fn atomize<R: Rng + ?Sized>(&self, atoms: usize, rng: &mut R) -> Result<AtomicPrior<FiniteDist>> {
        AtomicPrior::uniform((0..atoms).map(|_| self.sample(rng)).collect())
    }

    /// Monte Carlo `Pi(region)` with binomial standard error.
    pub fn region_mass_mc<R: Rng + ?Sized>(
        &self,
        region: &Region<FiniteDist>,
        samples: usize,
        rng: &mut R,
    ) -> MassEstimate {
        let hits = (0..samples).filter(|_| region.contains(&self.sample(rng))).count();
        MassEstimate::from_hits(hits, samples)
    }
}

/// Conjugate update `alpha + counts`.
pub fn posterior_update_dirichlet(prior: &DirichletPrior, counts: &[usize]) -> Result<DirichletPrior> {
    if counts.len() != prior.dim() {
        return Err(Error::Dimension {
            expected: prior.dim(),
            got: counts.len(),
        });
    }
    DirichletPrior::new(prior.alpha.iter().zip(counts).map(|(a, &c)| a + c as f64).collect())
}

/// Independent Dirichlet rows of a transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDirichletPrior {
    rows: Vec<Vec<f64>>,
}

impl ProductDirichletPrior {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Parameter("no rows".into()));
        }
        for r in &rows {
            if r.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: r.len(),
                });
            }
            check_concentration(r)?;
        }
        Ok(Self { rows })
    }

    pub fn symmetric(states: usize, a: f64) -> Result<Self> {
        Self::new(vec![vec![a; states]; states])
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn states(&self) -> usize {
        self.rows.len()
    }

    pub fn mean(&self) -> TransitionMatrix {
        TransitionMatrix::from_rows(
            self.rows
                .iter()
                .map(|r| FiniteDist::from_weights(r.clone()).expect("positive"))
                .collect(),
        )
        .expect("square")
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TransitionMatrix {
        TransitionMatrix::from_rows(
            self.rows
                .iter()
                .map(|r| probs_from_logs(&sample_dirichlet_log(r, rng)))
                .collect(),
        )
        .expect("square")
    }

    pub fn region_mass_mc<R: Rng + ?Sized>(
        &self,
        region: &Region<TransitionMatrix>,
        samples: usize,
        rng: &mut R,
    ) -> MassEstimate {
        let hits = (0..samples).filter(|_| region.contains(&self.sample(rng))).count();
        MassEstimate::from_hits(hits, samples)
    }

    /// Log masses of `region` and its complement. Plain Monte Carlo is used
    /// when both sides get at least `min_hits` of `samples` draws; the rare
    /// side is otherwise estimated by importance sampling: from a proposal
    /// anchored on the boundary of a ball that excludes the mean, else from
    /// tempered proposals with concentrations scaled by `4, 16, ...` when the
    /// rare side contains the mean and by `1/4, 1/16, ...` otherwise.
    pub fn log_masses_binary<R: Rng + ?Sized>(
        &self,
        region: &Region<TransitionMatrix>,
        samples: usize,
        min_hits: usize,
        rng: &mut R,
    ) -> (LogMassEstimate, LogMassEstimate) {
        let hits = (0..samples).filter(|_| region.contains(&self.sample(rng))).count();
        let plain = |h: usize| {
            let p = h as f64 / samples as f64;
            LogMassEstimate {
                log_mass: p.ln(),
                rel_stderr: if h > 0 {
                    ((1.0 - p) / (p * samples as f64)).sqrt()
                } else {
                    f64::INFINITY
                },
                hits: h,
                samples,
                temperature: 1.0,
            }
        };
        let miss = samples - hits;
        if hits >= min_hits && miss >= min_hits {
            return (plain(hits), plain(miss));
        }
        let rare_inside = hits < min_hits;
        let rare = self.tempered_log_mass(region, rare_inside, samples, min_hits, rng);
        let common = LogMassEstimate {
            log_mass: log1m_exp(rare.log_mass.min(0.0)),
            rel_stderr: rare.rel_stderr * rare.log_mass.exp(),
            hits: if rare_inside { miss } else { hits },
            samples,
            temperature: 1.0,
        };
        if rare_inside {
            (rare, common)
        } else {
            (common, rare)
        }
    }

    /// Importance-sampling estimate of the mass of the `inside` side of
    /// `region` from the product-Dirichlet proposal with rows `proposal`.
    fn is_log_mass<R: Rng + ?Sized>(
        &self,
        proposal: &[Vec<f64>],
        region: &Region<TransitionMatrix>,
        inside: bool,
        samples: usize,
        temperature: f64,
        rng: &mut R,
    ) -> LogMassEstimate {
        let norm: f64 = ksum(
            self.rows
                .iter()
                .zip(proposal)
                .map(|(a, b)| ln_multivariate_beta(b) - ln_multivariate_beta(a)),
        );
        let mut lw = Vec::new();
        for _ in 0..samples {
            let logs: Vec<Vec<f64>> = proposal.iter().map(|b| sample_dirichlet_log(b, rng)).collect();
            let m = TransitionMatrix::from_rows(logs.iter().map(|l| probs_from_logs(l)).collect()).expect("square");
            if region.contains(&m) == inside {
                let mut terms = vec![norm];
                for ((a, b), l) in self.rows.iter().zip(proposal).zip(&logs) {
                    terms.extend(a.iter().zip(b).zip(l).map(|((a, b), lp)| (a - b) * lp));
                }
                lw.push(ksum(terms));
            }
        }
        let log_mass = log_sum_exp(&lw) - (samples as f64).ln();
        // relative standard error of the weighted indicator mean
        let log_sq = log_sum_exp(&lw.iter().map(|l| 2.0 * l).collect::<Vec<_>>());
        let m2_over_m1sq = (log_sq - (samples as f64).ln() - 2.0 * log_mass).exp();
        let rel = ((m2_over_m1sq - 1.0).max(0.0) / samples as f64).sqrt();
        LogMassEstimate {
            log_mass,
            rel_stderr: if lw.is_empty() { f64::INFINITY } else { rel },
            hits: lw.len(),
            samples,
            temperature,
        }
    }

    /// Proposal centred at the first point of the segment from the mean to
    /// the ball centre that lies in the ball, with row concentrations
    /// divided by `4, 16, ...` until enough draws land inside.
    fn anchored_log_mass<R: Rng + ?Sized>(
        &self,
        ball: &Ball<TransitionMatrix>,
        region: &Region<TransitionMatrix>,
        samples: usize,
        min_hits: usize,
        rng: &mut R,
    ) -> Option<LogMassEstimate> {
        let mean = self.mean();
        let mix = |s: f64| -> TransitionMatrix {
            let rows = (0..self.states())
                .map(|i| {
                    let w = mean
                        .row(i)
                        .probs()
                        .iter()
                        .zip(ball.center.row(i).probs())
                        .map(|(a, b)| (1.0 - s) * a + s * b)
                        .collect();
                    FiniteDist::from_weights(w).expect("convex combination")
                })
                .collect();
            TransitionMatrix::from_rows(rows).expect("square")
        };
        if !ball.contains(&ball.center) {
            return None;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if ball.contains(&mix(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let anchor = mix(hi);
        let mut shrink = 1.0;
        let mut last = None;
        while shrink >= 1e-6 {
            let proposal: Vec<Vec<f64>> = self
                .rows
                .iter()
                .zip(anchor.rows())
                .map(|(a, c)| {
                    let k = ksum(a.iter().copied()) * shrink;
                    c.probs().iter().map(|p| (k * p).max(1e-3)).collect()
                })
                .collect();
            let est = self.is_log_mass(&proposal, region, true, samples, shrink, rng);
            let done = est.hits >= min_hits;
            last = Some(est);
            if done {
                break;
            }
            shrink *= 0.25;
        }
        last
    }

    fn tempered_log_mass<R: Rng + ?Sized>(
        &self,
        region: &Region<TransitionMatrix>,
        inside: bool,
        samples: usize,
        min_hits: usize,
        rng: &mut R,
    ) -> LogMassEstimate {
        if let Some(ball) = region.as_ball().filter(|b| inside && !b.contains(&self.mean())) {
            if let Some(est) = self.anchored_log_mass(ball, region, samples, min_hits, rng) {
                if est.hits >= min_hits {
                    return est;
                }
            }
        }
        const MIN_TEMPERATURE: f64 = 1e-9;
        const MAX_TEMPERATURE: f64 = 1e9;
        // concentrate on the mean when the rare side holds it, spread out otherwise
        let step = if region.contains(&self.mean()) == inside {
            4.0
        } else {
            0.25
        };
        let mut t = step;
        let mut last = LogMassEstimate {
            log_mass: f64::NEG_INFINITY,
            rel_stderr: f64::INFINITY,
            hits: 0,
            samples,
            temperature: 1.0,
        };
        while (MIN_TEMPERATURE..=MAX_TEMPERATURE).contains(&t) {
            let proposal: Vec<Vec<f64>> = self.rows.iter().map(|r| r.iter().map(|a| a * t).collect()).collect();
            last = self.is_log_mass(&proposal, region, inside, samples, t, rng);
            if last.hits >= min_hits {
                break;
            }
            t *= step;
        }
        last
    }
}

/// Conjugate row-wise update with transition counts `counts[from][to]`.
pub fn posterior_update_product_dirichlet(
    prior: &ProductDirichletPrior,
    counts: &[Vec<f64>],
) -> Result<ProductDirichletPrior> {
    if counts.len() != prior.states() {
        return Err(Error::Dimension {
            expected: prior.states(),
            got: counts.len(),
        });
    }
    ProductDirichletPrior::new(
        prior
            .rows
            .iter()
            .zip(counts)
            .map(|(r, c)| r.iter().zip(c).map(|(a, b)| a + b).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn conjugate_update_adds_counts() {
        let p = DirichletPrior::symmetric(3, 1.0).unwrap();
        let q = posterior_update_dirichlet(&p, &[3, 0, 7]).unwrap();
        assert_eq!(q.alpha(), &[4.0, 1.0, 8.0]);
        assert!((q.mean().mass(2) - 8.0 / 13.0).abs() < 1e-15);
    }

    #[test]
    fn sample_mean_matches() {
        let p = DirichletPrior::new(vec![2.0, 3.0, 5.0]).unwrap();
        let mut rng = derive_stream(1, "dir", 0);
        let n = 20_000;
        let mut acc = [0.0; 3];
        for _ in 0..n {
            let s = p.sample(&mut rng);
            for k in 0..3 {
                acc[k] += s.mass(k);
            }
        }
        for k in 0..3 {
            // sd of each coordinate is below 0.16
            assert!((acc[k] / n as f64 - p.mean().mass(k)).abs() < 5.0 * 0.16 / (n as f64).sqrt());
        }
    }

    #[test]
    fn tiny_concentrations_stay_normalised() {
        let mut rng = derive_stream(2, "tiny", 0);
        for _ in 0..100 {
            let l = sample_dirichlet_log(&[1e-4, 1e-4, 1e-4], &mut rng);
            assert!((log_sum_exp(&l)).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_of_uniform_prior() {
        // Beta(1,1): P(sequence with k heads of n) = 1 / ((n+1) C(n,k))
        let p = DirichletPrior::symmetric(2, 1.0).unwrap();
        let lm = p.log_marginal(&[2, 1]).unwrap();
        assert!((lm - (1.0f64 / 12.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn uniform_density_on_simplex() {
        let p = DirichletPrior::symmetric(3, 1.0).unwrap();
        let d = p.log_density(&FiniteDist::new(vec![0.2, 0.3, 0.5]).unwrap());
        assert!((d - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn importance_sampling_agrees_with_plain_mc() {
        // a moderately rare event: first row puts more than 0.93 on state 0
        let prior = ProductDirichletPrior::new(vec![vec![4.0, 4.0], vec![1.0, 1.0]]).unwrap();
        let region = Region::predicate("r", |t: &TransitionMatrix| t.transition(0, 0) > 0.93);
        // Beta(4,4) tail: P(X > x) = P(Bin(7, x) <= 3)
        let p = 0.93f64;
        let q = 1.0 - p;
        let exact: f64 = (0..=3)
            .map(|j| {
                let c = [1.0, 7.0, 21.0, 35.0, 35.0, 21.0, 7.0, 1.0][j];
                c * p.powi(j as i32) * q.powi(7 - j as i32)
            })
            .sum();
        let mut rng = derive_stream(3, "is", 0);
        let (inside, outside) = prior.log_masses_binary(&region, 4000, 200, &mut rng);
        assert!(inside.temperature < 1.0);
        assert!(
            (inside.log_mass.exp() / exact - 1.0).abs() < 0.15,
            "{} vs {exact}",
            inside.log_mass.exp()
        );
        assert!((outside.log_mass.exp() - (1.0 - exact)).abs() < 1e-4);
    }
}
