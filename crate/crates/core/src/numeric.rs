//! Small numerical kernels shared by the rest of the crate.

use crate::error::{Error, Result};

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn ksum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// `log(sum(exp(v)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + ksum(values.iter().map(|v| (v - max).exp())).ln()
}

/// `log(exp(a) + exp(b))`.
pub fn log_add(a: f64, b: f64) -> f64 {
    log_sum_exp(&[a, b])
}

/// `log(1 - exp(x))` for `x <= 0`.
pub fn log1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    ksum((1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()))
}

pub fn ln_factorial(n: usize) -> f64 {
    statrs::function::gamma::ln_gamma(n as f64 + 1.0)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    ksum(values.iter().copied()) / values.len() as f64
}

/// Sample standard deviation (denominator `n - 1`).
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    (ksum(values.iter().map(|v| (v - m) * (v - m))) / (n - 1) as f64).sqrt()
}

/// Standard error of the mean.
pub fn std_err(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    std_dev(values) / (values.len() as f64).sqrt()
}

/// Linear-interpolation quantile (R type 7) of finite or infinite values.
/// NaNs are ignored.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN filtered"));
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi || v[lo] == v[hi] {
        return v[lo];
    }
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Result of a numerical integral.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Integrates `f` over `[a, b]`, splitting at `breakpoints` and into pieces
/// no longer than `max_piece`. Fails when the summed error estimate exceeds
/// `abs_tol + rel_tol * |value|`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    max_piece: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::Domain(format!("bad integration range [{a}, {b}]")));
    }
    let mut cuts: Vec<f64> = vec![a, b];
    cuts.extend(breakpoints.iter().copied().filter(|&p| p > a && p < b));
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    cuts.dedup();
    let mut pieces = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let k = ((hi - lo) / max_piece).ceil().max(1.0) as usize;
        for j in 0..k {
            pieces.push((
                lo + (hi - lo) * j as f64 / k as f64,
                lo + (hi - lo) * (j + 1) as f64 / k as f64,
            ));
        }
    }
    let per_piece = abs_tol / pieces.len() as f64;
    let mut value = CompensatedSum::new();
    let mut error = 0.0;
    for &(lo, hi) in &pieces {
        let out = quadrature::double_exponential::integrate(&f, lo, hi, per_piece);
        value.add(out.integral);
        error += out.error_estimate;
    }
    let value = value.value();
    if !(error <= abs_tol + rel_tol * value.abs()) {
        return Err(Error::Accuracy(format!(
            "quadrature error estimate {error:e} on [{a}, {b}] exceeds tolerance"
        )));
    }
    Ok(Integral { value, error })
}
