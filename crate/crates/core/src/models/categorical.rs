use rand::Rng;

use super::{check_enumerable, checked_pow, unsupported_metric, Metric, Model};
use crate::error::{Error, Result};
use crate::measures::{hellinger, total_variation, FiniteDist};
use crate::numeric::ksum;

/// Default truncation of the countable sample space in the Freedman family.
pub const DEFAULT_FREEDMAN_TRUNCATION: usize = 50;

/// I.i.d. draws from a probability vector on `{0, ..., N-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalModel {
    support: usize,
}

impl CategoricalModel {
    pub fn new(support: usize) -> Result<Self> {
        if support < 2 {
            return Err(Error::Parameter(format!("support size {support} < 2")));
        }
        Ok(Self { support })
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn counts(&self, x: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.support];
        for &k in x {
            c[k] += 1;
        }
        c
    }
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(p: &FiniteDist, n: usize, rng: &mut R) -> Vec<usize> {
    let cdf: Vec<f64> = p
        .probs()
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let last = p.support().last().copied().unwrap_or(0);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
            let k = cdf.partition_point(|&c| c <= u);
            // guards against landing on a zero-mass cell through rounding
            if k < cdf.len() && p.mass(k) > 0.0 {
                k
            } else {
                last
            }
        })
        .collect()
}

pub(crate) fn categorical_loglik(p: &FiniteDist, counts: &[usize]) -> f64 {
    let mut terms = Vec::with_capacity(counts.len());
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let pk = p.mass(k);
        if pk <= 0.0 {
            return f64::NEG_INFINITY;
        }
        terms.push(c as f64 * pk.ln());
    }
    ksum(terms)
}

fn categorical_distance(a: &FiniteDist, b: &FiniteDist, metric: Metric, family: &str) -> Result<f64> {
    match metric {
        Metric::Euclidean => {
            if a.len() != b.len() {
                return Err(Error::Dimension {
                    expected: a.len(),
                    got: b.len(),
                });
            }
            Ok(ksum(a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y) * (x - y))).sqrt())
        }
        Metric::Hellinger => hellinger(a, b),
        Metric::Tv => total_variation(a, b),
        Metric::MaxJointBin => Err(unsupported_metric(metric, family)),
    }
}

/// Calls `visit` on every sequence in `{0..k}^n`, lexicographically.
pub fn for_each_sequence(k: usize, n: usize, visit: &mut dyn FnMut(&Vec<usize>)) {
    let mut x = vec![0usize; n];
    loop {
        visit(&x);
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            x[i] += 1;
            if x[i] < k {
                break;
            }
            x[i] = 0;
        }
    }
}

impl Model for CategoricalModel {
    type Param = FiniteDist;
    type Sample = Vec<usize>;
    type Stats = Vec<usize>;

    fn family(&self) -> &'static str {
        "categorical"
    }

    fn validate(&self, theta: &FiniteDist) -> Result<()> {
        if theta.len() != self.support {
            return Err(Error::Dimension {
                expected: self.support,
                got: theta.len(),
            });
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, theta: &FiniteDist, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        self.validate(theta)?;
        Ok(sample_categorical(theta, n, rng))
    }

    fn sample_size(&self, x: &Vec<usize>) -> usize {
        x.len()
    }

    fn stats(&self, x: &Vec<usize>) -> Vec<usize> {
        self.counts(x)
    }

    fn loglik_stats(&self, theta: &FiniteDist, s: &Vec<usize>) -> f64 {
        categorical_loglik(theta, s)
    }

    fn first_forbidden(&self, theta: &FiniteDist, x: &Vec<usize>) -> Option<usize> {
        x.iter().position(|&k| theta.mass(k) <= 0.0)
    }

    fn param_distance(&self, a: &FiniteDist, b: &FiniteDist, metric: Metric) -> Result<f64> {
        categorical_distance(a, b, metric, self.family())
    }

    fn sample_space_size(&self, n: usize) -> Option<u128> {
        checked_pow(self.support, n)
    }

    fn enumerate(&self, n: usize, visit: &mut dyn FnMut(&Vec<usize>)) -> Result<()> {
        check_enumerable(self.sample_space_size(n))?;
        for_each_sequence(self.support, n, visit);
        Ok(())
    }

    fn sample_values(&self, x: &Vec<usize>) -> Vec<f64> {
        x.iter().map(|&k| k as f64).collect()
    }
}

/// Laws on a countable space truncated to `{0, ..., K-1}`; as a model it
/// is categorical, the family name marks the forbidden-symbol setting.
#[derive(Debug, Clone, PartialEq)]
pub struct FreedmanModel {
    inner: CategoricalModel,
}

impl FreedmanModel {
    pub fn new(truncation: usize) -> Result<Self> {
        Ok(Self {
            inner: CategoricalModel::new(truncation)?,
        })
    }

    pub fn truncation(&self) -> usize {
        self.inner.support
    }
}

impl Default for FreedmanModel {
    fn default() -> Self {
        Self::new(DEFAULT_FREEDMAN_TRUNCATION).expect("default truncation is valid")
    }
}

impl Model for FreedmanModel {
    type Param = FiniteDist;
    type Sample = Vec<usize>;
    type Stats = Vec<usize>;

    fn family(&self) -> &'static str {
        "freedman"
    }

    fn validate(&self, theta: &FiniteDist) -> Result<()> {
        self.inner.validate(theta)
    }

    fn sample<R: Rng + ?Sized>(&self, theta: &FiniteDist, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        self.inner.sample(theta, n, rng)
    }

    fn sample_size(&self, x: &Vec<usize>) -> usize {
        x.len()
    }

    fn stats(&self, x: &Vec<usize>) -> Vec<usize> {
        self.inner.counts(x)
    }

    fn loglik_stats(&self, theta: &FiniteDist, s: &Vec<usize>) -> f64 {
        categorical_loglik(theta, s)
    }

    fn first_forbidden(&self, theta: &FiniteDist, x: &Vec<usize>) -> Option<usize> {
        self.inner.first_forbidden(theta, x)
    }

    fn param_distance(&self, a: &FiniteDist, b: &FiniteDist, metric: Metric) -> Result<f64> {
        categorical_distance(a, b, metric, self.family())
    }

    fn sample_space_size(&self, n: usize) -> Option<u128> {
        self.inner.sample_space_size(n)
    }

    fn enumerate(&self, n: usize, visit: &mut dyn FnMut(&Vec<usize>)) -> Result<()> {
        self.inner.enumerate(n, visit)
    }

    fn sample_values(&self, x: &Vec<usize>) -> Vec<f64> {
        self.inner.sample_values(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn loglik_of_counts() {
        let m = CategoricalModel::new(2).unwrap();
        let p = FiniteDist::new(vec![0.3, 0.7]).unwrap();
        let ll = m.loglik(&p, &vec![0, 1, 1]);
        assert!((ll - (0.3f64.ln() + 2.0 * 0.7f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn zero_mass_cell_kills_likelihood() {
        let m = CategoricalModel::new(3).unwrap();
        let p = FiniteDist::new(vec![0.5, 0.5, 0.0]).unwrap();
        assert_eq!(m.loglik(&p, &vec![0, 2]), f64::NEG_INFINITY);
        assert_eq!(m.first_forbidden(&p, &vec![0, 1, 2, 2]), Some(2));
    }

    #[test]
    fn point_mass_sampling() {
        let m = CategoricalModel::new(2).unwrap();
        let p = FiniteDist::new(vec![1.0, 0.0]).unwrap();
        let mut rng = derive_stream(1, "t", 0);
        assert!(m.sample(&p, 1000, &mut rng).unwrap().iter().all(|&k| k == 0));
    }

    #[test]
    fn enumeration_probabilities_sum_to_one() {
        let m = CategoricalModel::new(3).unwrap();
        let p = FiniteDist::new(vec![0.2, 0.3, 0.5]).unwrap();
        let mut total = Vec::new();
        let mut count = 0;
        m.enumerate(4, &mut |x| {
            total.push(m.loglik(&p, x).exp());
            count += 1;
        })
        .unwrap();
        assert_eq!(count, 81);
        assert!((ksum(total) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn enumeration_limit() {
        let m = CategoricalModel::new(2).unwrap();
        assert!(matches!(m.enumerate(30, &mut |_| {}), Err(Error::Enumeration { .. })));
    }

    #[test]
    fn empirical_frequencies() {
        let m = CategoricalModel::new(3).unwrap();
        let p = FiniteDist::new(vec![0.2, 0.3, 0.5]).unwrap();
        let mut rng = derive_stream(3, "freq", 0);
        let x = m.sample(&p, 100_000, &mut rng).unwrap();
        let c = m.counts(&x);
        for k in 0..3 {
            let f = c[k] as f64 / 1e5;
            // 5 standard errors
            assert!((f - p.mass(k)).abs() < 5.0 * (p.mass(k) * (1.0 - p.mass(k)) / 1e5).sqrt());
        }
    }
}
