use rand::Rng;

use super::{check_enumerable, checked_pow, for_each_sequence, Metric, Model};
use crate::error::{Error, Result};
use crate::measures::{
    hellinger, joint_two_step, max_joint_bin_distance, stationary_distribution, total_variation, FiniteDist,
    TransitionMatrix, STATIONARY_TOL,
};
use crate::numeric::ksum;

/// Law of `Z_0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    Fixed(FiniteDist),
    /// The stationary law of the parameter; requires an ergodic matrix.
    Stationary,
}

/// Homogeneous chain `Z_0, ..., Z_n`; a sample of size `n` has `n + 1`
/// states.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    states: usize,
    initial: InitialLaw,
    condition_on_initial: bool,
}

/// Initial state and transition counts `counts[from * N + to]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovStats {
    pub initial: Option<usize>,
    pub counts: Vec<usize>,
    pub states: usize,
}

impl MarkovStats {
    pub fn count(&self, from: usize, to: usize) -> usize {
        self.counts[from * self.states + to]
    }

    /// Transition counts as rows `[from][to]`.
    pub fn count_rows(&self) -> Vec<Vec<f64>> {
        (0..self.states)
            .map(|l| (0..self.states).map(|k| self.count(l, k) as f64).collect())
            .collect()
    }
}

impl MarkovModel {
    pub fn new(states: usize, initial: InitialLaw) -> Result<Self> {
        if states < 2 {
            return Err(Error::Parameter(format!("{states} states; need at least 2")));
        }
        if let InitialLaw::Fixed(d) = &initial {
            if d.len() != states {
                return Err(Error::Dimension {
                    expected: states,
                    got: d.len(),
                });
            }
        }
        Ok(Self {
            states,
            initial,
            condition_on_initial: false,
        })
    }

    /// Drops the initial-state term from the likelihood.
    pub fn conditioned_on_initial(mut self) -> Self {
        self.condition_on_initial = true;
        self
    }

    pub fn states(&self) -> usize {
        self.states
    }

    fn initial_law(&self, theta: &TransitionMatrix) -> Result<FiniteDist> {
        match &self.initial {
            InitialLaw::Fixed(d) => Ok(d.clone()),
            InitialLaw::Stationary => stationary_distribution(theta, STATIONARY_TOL)
                .map_err(|e| Error::Parameter(format!("stationary initial law requested: {e}"))),
        }
    }

    /// Empirical joint frequencies `p_hat(k, l) = #{i: Z_i = k, Z_{i-1} = l} / n`.
    pub fn empirical_joint(&self, path: &[usize]) -> Vec<Vec<f64>> {
        let n = path.len().saturating_sub(1);
        let mut out = vec![vec![0.0; self.states]; self.states];
        if n == 0 {
            return out;
        }
        for w in path.windows(2) {
            out[w[1]][w[0]] += 1.0;
        }
        out.iter_mut().flatten().for_each(|v| *v /= n as f64);
        out
    }
}

impl Model for MarkovModel {
    type Param = TransitionMatrix;
    type Sample = Vec<usize>;
    type Stats = MarkovStats;

    fn family(&self) -> &'static str {
        "markov"
    }

    fn validate(&self, theta: &TransitionMatrix) -> Result<()> {
        if theta.n_states() != self.states {
            return Err(Error::Dimension {
                expected: self.states,
                got: theta.n_states(),
            });
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, theta: &TransitionMatrix, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        self.validate(theta)?;
        let init = self.initial_law(theta)?;
        let cdfs: Vec<Vec<f64>> = theta
            .rows()
            .iter()
            .map(|r| {
                r.probs()
                    .iter()
                    .scan(0.0, |acc, &w| {
                        *acc += w;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        let draw = |cdf: &[f64], probs: &[f64], rng: &mut R| -> usize {
            let u = rng.random::<f64>() * cdf[cdf.len() - 1];
            let k = cdf.partition_point(|&c| c <= u);
            if k < cdf.len() && probs[k] > 0.0 {
                k
            } else {
                probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
            }
        };
        let init_cdf: Vec<f64> = init
            .probs()
            .iter()
            .scan(0.0, |acc, &w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        let mut path = Vec::with_capacity(n + 1);
        let mut z = draw(&init_cdf, init.probs(), rng);
        path.push(z);
        for _ in 0..n {
            z = draw(&cdfs[z], theta.row(z).probs(), rng);
            path.push(z);
        }
        Ok(path)
    }

    fn sample_size(&self, x: &Vec<usize>) -> usize {
        x.len().saturating_sub(1)
    }

    fn stats(&self, x: &Vec<usize>) -> MarkovStats {
        let mut counts = vec![0; self.states * self.states];
        for w in x.windows(2) {
            counts[w[0] * self.states + w[1]] += 1;
        }
        MarkovStats {
            initial: x.first().copied(),
            counts,
            states: self.states,
        }
    }

    fn loglik_stats(&self, theta: &TransitionMatrix, s: &MarkovStats) -> f64 {
        let mut terms = Vec::new();
        if !self.condition_on_initial {
            if let Some(z0) = s.initial {
                match self.initial_law(theta) {
                    Ok(d) if d.mass(z0) > 0.0 => terms.push(d.mass(z0).ln()),
                    _ => return f64::NEG_INFINITY,
                }
            }
        }
        for from in 0..self.states {
            for to in 0..self.states {
                let c = s.count(from, to);
                if c == 0 {
                    continue;
                }
                let p = theta.transition(from, to);
                if p <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                terms.push(c as f64 * p.ln());
            }
        }
        ksum(terms)
    }

    fn first_forbidden(&self, theta: &TransitionMatrix, x: &Vec<usize>) -> Option<usize> {
        if !self.condition_on_initial {
            if let (Some(&z0), Ok(d)) = (x.first(), self.initial_law(theta)) {
                if d.mass(z0) <= 0.0 {
                    return Some(0);
                }
            }
        }
        x.windows(2)
            .position(|w| theta.transition(w[0], w[1]) <= 0.0)
            .map(|i| i + 1)
    }

    fn param_distance(&self, a: &TransitionMatrix, b: &TransitionMatrix, metric: Metric) -> Result<f64> {
        self.validate(a)?;
        self.validate(b)?;
        match metric {
            Metric::Euclidean => {
                let mut acc = Vec::new();
                for l in 0..self.states {
                    for k in 0..self.states {
                        let d = a.transition(l, k) - b.transition(l, k);
                        acc.push(d * d);
                    }
                }
                Ok(ksum(acc).sqrt())
            }
            Metric::MaxJointBin => max_joint_bin_distance(&joint_two_step(a)?, &joint_two_step(b)?),
            Metric::Hellinger | Metric::Tv => {
                let flat = |t: &TransitionMatrix| -> Result<FiniteDist> {
                    FiniteDist::from_weights(joint_two_step(t)?.into_iter().flatten().collect())
                };
                let (pa, pb) = (flat(a)?, flat(b)?);
                if metric == Metric::Hellinger {
                    hellinger(&pa, &pb)
                } else {
                    total_variation(&pa, &pb)
                }
            }
        }
    }

    fn sample_space_size(&self, n: usize) -> Option<u128> {
        checked_pow(self.states, n + 1)
    }

    fn enumerate(&self, n: usize, visit: &mut dyn FnMut(&Vec<usize>)) -> Result<()> {
        check_enumerable(self.sample_space_size(n))?;
        for_each_sequence(self.states, n + 1, visit);
        Ok(())
    }

    fn sample_values(&self, x: &Vec<usize>) -> Vec<f64> {
        x.iter().map(|&k| k as f64).collect()
    }
}
