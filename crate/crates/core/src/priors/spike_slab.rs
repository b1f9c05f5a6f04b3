//! Spike-and-slab prior for sparse normal means, with the posterior over
//! supports computed by exact enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::SparseMeansModel;
use crate::numeric::{integrate, ksum, ln_binomial, log_sum_exp};

/// Largest dimension handled by exact enumeration.
pub const SPARSE_N_MAX: usize = 14;

/// Half-width of the window around an observation outside which the normal
/// kernel is negligible (`phi(12) ~ 1e-32`).
const KERNEL_WINDOW: f64 = 12.0;

const QUAD_REL_TOL: f64 = 1e-12;

/// Slab density `g` for the nonzero coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Slab {
    Laplace {
        scale: f64,
    },
    Cauchy {
        scale: f64,
    },
    Normal {
        sd: f64,
    },
    /// Uniform on `[-half_width, half_width]`: a sharply truncated slab.
    Uniform {
        half_width: f64,
    },
}

impl Slab {
    fn scale(&self) -> f64 {
        match *self {
            Slab::Laplace { scale } | Slab::Cauchy { scale } => scale,
            Slab::Normal { sd } => sd,
            Slab::Uniform { half_width } => half_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.scale();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Parameter(format!("slab scale {s} must be positive")));
        }
        Ok(())
    }

    pub fn log_density(&self, t: f64) -> f64 {
        match *self {
            Slab::Laplace { scale } => -(t.abs() / scale) - (2.0 * scale).ln(),
            Slab::Cauchy { scale } => -(std::f64::consts::PI * scale).ln() - (t * t / (scale * scale)).ln_1p(),
            Slab::Normal { sd } => SparseMeansModel::log_phi(t / sd) - sd.ln(),
            Slab::Uniform { half_width } => {
                if t.abs() <= half_width {
                    -(2.0 * half_width).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Constant `c` with `|log g(s) - log g(t)| <= c (1 + |s - t|)`, when
    /// one exists.
    pub fn log_lipschitz_constant(&self) -> Option<f64> {
        match *self {
            Slab::Laplace { scale } | Slab::Cauchy { scale } => Some(1.0 / scale),
            Slab::Normal { .. } | Slab::Uniform { .. } => None,
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            Slab::Uniform { half_width } => (-half_width, half_width),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match *self {
            Slab::Laplace { .. } => vec![0.0],
            Slab::Uniform { half_width } => vec![-half_width, half_width],
            _ => Vec::new(),
        }
    }
}

/// Prior `pi_n` on the support size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SparsityPrior {
    /// Uniform on `{0, ..., cap}`.
    Uniform,
    /// `pi(p) ~ exp(-rate * p)` on `{0, ..., cap}`.
    Geometric { rate: f64 },
    /// Explicit weights for `p = 0, 1, ...`.
    Weights { weights: Vec<f64> },
}

/// Spike-and-slab prior: draw `p ~ pi_n`, a uniform support of size `p`,
/// then i.i.d. slab values on it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSlabPrior {
    dim: usize,
    cap: usize,
    log_sparsity: Vec<f64>,
    slab: Slab,
    lipschitz: Option<f64>,
}

impl SpikeSlabPrior {
    /// `cap` bounds the support size, so the prior lives on
    /// `sum_{p <= cap} C(n, p)` supports.
    pub fn new(dim: usize, sparsity: &SparsityPrior, slab: Slab, cap: usize) -> Result<Self> {
        slab.validate()?;
        if dim == 0 || dim > SPARSE_N_MAX {
            return Err(Error::Infeasible(format!(
                "exact sparse-means enumeration needs 1 <= n <= {SPARSE_N_MAX}, got {dim}"
            )));
        }
        let cap = cap.min(dim);
        let raw: Vec<f64> = match sparsity {
            SparsityPrior::Uniform => vec![1.0; cap + 1],
            SparsityPrior::Geometric { rate } => (0..=cap).map(|p| (-rate * p as f64).exp()).collect(),
            SparsityPrior::Weights { weights } => {
                if weights.len() < cap + 1 {
                    return Err(Error::Parameter(format!(
                        "sparsity weights cover {} sizes, need {}",
                        weights.len(),
                        cap + 1
                    )));
                }
                weights[..=cap].to_vec()
            }
        };
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) || ksum(raw.iter().copied()) <= 0.0 {
            return Err(Error::Parameter(
                "sparsity weights must be nonnegative with positive sum".into(),
            ));
        }
        let total = ksum(raw.iter().copied());
        let log_sparsity = raw.iter().map(|w| (w / total).ln()).collect();
        let prior = Self {
            dim,
            cap,
            log_sparsity,
            slab,
            lipschitz: slab.log_lipschitz_constant(),
        };
        if let Some(c) = prior.lipschitz {
            prior.check_lipschitz(c)?;
        }
        Ok(prior)
    }

    /// Replaces the stored log-Lipschitz constant after spot-checking it.
    pub fn with_lipschitz(mut self, c: f64) -> Result<Self> {
        self.check_lipschitz(c)?;
        self.lipschitz = Some(c);
        Ok(self)
    }

    fn check_lipschitz(&self, c: f64) -> Result<()> {
        let grid: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.5).collect();
        for &s in &grid {
            for &t in &grid {
                let lhs = (self.slab.log_density(s) - self.slab.log_density(t)).abs();
                if !(lhs <= c * (1.0 + (s - t).abs()) + 1e-12) {
                    return Err(Error::Parameter(format!(
                        "slab violates the log-Lipschitz bound with c = {c} at ({s}, {t})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn slab(&self) -> Slab {
        self.slab
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn log_sparsity(&self, p: usize) -> f64 {
        self.log_sparsity.get(p).copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// `m(x) = int g(t) phi(x - t) dt` and its quadrature error estimate.
    pub fn marginal(&self, x: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.slab.support();
        let a = (x - KERNEL_WINDOW).max(lo);
        let b = (x + KERNEL_WINDOW).min(hi);
        if a >= b {
            return Ok((0.0, 0.0));
        }
        let slab = self.slab;
        let f = move |t: f64| (slab.log_density(t) + SparseMeansModel::log_phi(x - t)).exp();
        let mut cuts = slab.kinks();
        cuts.push(x);
        // a first pass fixes the absolute tolerance relative to the value
        let rough = integrate(f, a, b, &cuts, 2.0, 0.0, 1e-6).or_else(|_| integrate(f, a, b, &cuts, 0.5, 0.0, 1e-6))?;
        let out = integrate(f, a, b, &cuts, 1.0, QUAD_REL_TOL * rough.value, QUAD_REL_TOL)?;
        Ok((out.value, out.error))
    }
}

/// Posterior over supports `S` with `|S| <= cap`; given `S` the nonzero
/// coordinates are independent with densities `g(t) phi(x_i - t) / m(x_i)`.
#[derive(Debug, Clone)]
pub struct SpikeSlabPosterior {
    prior: SpikeSlabPrior,
    x: Vec<f64>,
    log_m: Vec<f64>,
    /// Posterior weight per bitmask; zero for supports beyond the cap.
    weights: Vec<f64>,
    quad_rel_error: f64,
}

/// Visits every support of size at most `cap` in `{0..n}` (as bitmasks).
fn for_each_support(n: usize, cap: usize, visit: &mut dyn FnMut(u32)) {
    fn rec(start: usize, n: usize, left: usize, mask: u32, visit: &mut dyn FnMut(u32)) {
        visit(mask);
        if left == 0 {
            return;
        }
        for j in start..n {
            rec(j + 1, n, left - 1, mask | (1 << j), visit);
        }
    }
    rec(0, n, cap, 0, visit);
}

/// Exact posterior of the spike-and-slab prior given `x`.
pub fn spike_slab_posterior_exact(prior: &SpikeSlabPrior, x: &[f64]) -> Result<SpikeSlabPosterior> {
    let n = prior.dim;
    if x.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("observations must be finite".into()));
    }
    let mut log_m = Vec::with_capacity(n);
    let mut rel_err: f64 = 0.0;
    for &xi in x {
        let (m, e) = prior.marginal(xi)?;
        rel_err = rel_err.max(if m > 0.0 { e / m } else { 0.0 });
        log_m.push(m.ln());
    }
    let log_phi: Vec<f64> = x.iter().map(|&v| SparseMeansModel::log_phi(v)).collect();
    let base = ksum(log_phi.iter().copied());
    let mut masks = Vec::new();
    let mut lw = Vec::new();
    for_each_support(n, prior.cap, &mut |mask| {
        let p = mask.count_ones() as usize;
        let mut terms = vec![prior.log_sparsity(p) - ln_binomial(n, p), base];
        for i in 0..n {
            if mask & (1 << i) != 0 {
                terms.push(log_m[i] - log_phi[i]);
            }
        }
        masks.push(mask);
        lw.push(ksum(terms));
    });
    let lse = log_sum_exp(&lw);
    if !lse.is_finite() {
        return Err(Error::DominationFailure {
            atoms: masks.len(),
            first_forbidden: Vec::new(),
        });
    }
    let mut weights = vec![0.0; 1 << n];
    for (mask, l) in masks.iter().zip(&lw) {
        weights[*mask as usize] = (l - lse).exp();
    }
    Ok(SpikeSlabPosterior {
        prior: prior.clone(),
        x: x.to_vec(),
        log_m,
        weights,
        quad_rel_error: rel_err,
    })
}

/// Two-sided bound on a posterior probability together with its midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBracket {
    pub lower: f64,
    pub upper: f64,
}

impl MassBracket {
    pub fn estimate(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

impl SpikeSlabPosterior {
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Posterior probability of support `mask`.
    pub fn support_mass(&self, mask: u32) -> f64 {
        self.weights.get(mask as usize).copied().unwrap_or(0.0)
    }

    /// All `(mask, weight)` pairs of enumerated supports.
    pub fn support_weights(&self) -> Vec<(u32, f64)> {
        let mut out = Vec::new();
        for_each_support(self.prior.dim, self.prior.cap, &mut |m| {
            out.push((m, self.weights[m as usize]))
        });
        out
    }

    pub fn log_marginals(&self) -> &[f64] {
        &self.log_m
    }

    /// Largest relative quadrature error over the slab marginals.
    pub fn quadrature_rel_error(&self) -> f64 {
        self.quad_rel_error
    }

    /// Posterior inclusion probability of each coordinate.
    pub fn inclusion_probabilities(&self) -> Vec<f64> {
        let n = self.prior.dim;
        let mut acc = vec![Vec::new(); n];
        for (mask, w) in self.support_weights() {
            for (i, a) in acc.iter_mut().enumerate() {
                if mask & (1 << i) != 0 {
                    a.push(w);
                }
            }
        }
        acc.into_iter().map(ksum).collect()
    }

    /// CDF of the conditional law of coordinate `i` at the sorted points
    /// `ts`.
    fn conditional_cdf(&self, i: usize, ts: &[f64]) -> Result<Vec<f64>> {
        let slab = self.prior.slab;
        let xi = self.x[i];
        let log_m = self.log_m[i];
        let f = move |t: f64| (slab.log_density(t) + SparseMeansModel::log_phi(xi - t) - log_m).exp();
        let (lo, hi) = slab.support();
        let a = (xi - KERNEL_WINDOW).max(lo);
        let b = (xi + KERNEL_WINDOW).min(hi);
        let kinks = slab.kinks();
        let mut out = Vec::with_capacity(ts.len());
        let mut acc = 0.0;
        let mut prev = a;
        for &t in ts {
            let t = t.clamp(a, b);
            if t > prev {
                let mut cuts = kinks.clone();
                cuts.push(xi);
                acc += integrate(f, prev, t, &cuts, 1.0, 1e-13, 1e-10)?.value;
                prev = t;
            }
            out.push(acc.min(1.0));
        }
        Ok(out)
    }

    /// Posterior probability of
    /// `V = {theta: |supp theta| <= max_support, |theta - theta0|^2 > radius_sq}`.
    ///
    /// The conditional laws of the squared deviations are binned into
    /// `bins` cells of width `radius_sq / bins` and convolved along the
    /// support tree; the bracket is exact up to quadrature error.
    pub fn v_mass(&self, theta0: &[f64], max_support: usize, radius_sq: f64, bins: usize) -> Result<MassBracket> {
        let n = self.prior.dim;
        if theta0.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: theta0.len(),
            });
        }
        if !(radius_sq > 0.0) || bins == 0 {
            return Err(Error::Parameter("radius and bin count must be positive".into()));
        }
        let h = radius_sq / bins as f64;
        // hist[i][j] = P(D_i in [j h, (j+1) h)) for j = 0..=bins
        let mut hist = Vec::with_capacity(n);
        for i in 0..n {
            let mut ts = Vec::with_capacity(2 * bins + 4);
            for j in (0..=bins + 1).rev() {
                ts.push(theta0[i] - (j as f64 * h).sqrt());
            }
            for j in 1..=bins + 1 {
                ts.push(theta0[i] + (j as f64 * h).sqrt());
            }
            let cdf = self.conditional_cdf(i, &ts)?;
            // F_D(j h) = Q(theta0 + sqrt(jh)) - Q(theta0 - sqrt(jh))
            let fd = |j: usize| -> f64 {
                let lo = cdf[bins + 1 - j];
                let hi = if j == 0 { cdf[bins + 1] } else { cdf[bins + 1 + j] };
                (hi - lo).max(0.0)
            };
            hist.push((0..=bins).map(|j| (fd(j + 1) - fd(j)).max(0.0)).collect::<Vec<f64>>());
        }
        let off_sq: Vec<f64> = theta0.iter().map(|t| t * t).collect();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut delta = vec![0.0; bins + 1];
        delta[0] = 1.0;
        let total_off = ksum(off_sq.iter().copied());
        self.v_mass_rec(
            0,
            0u32,
            &delta,
            total_off,
            &hist,
            &off_sq,
            max_support,
            radius_sq,
            h,
            &mut lower,
            &mut upper,
        );
        Ok(MassBracket {
            lower: ksum(lower).clamp(0.0, 1.0),
            upper: ksum(upper).clamp(0.0, 1.0),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn v_mass_rec(
        &self,
        start: usize,
        mask: u32,
        conv: &[f64],
        off: f64,
        hist: &[Vec<f64>],
        off_sq: &[f64],
        max_support: usize,
        radius_sq: f64,
        h: f64,
        lower: &mut Vec<f64>,
        upper: &mut Vec<f64>,
    ) {
        let k = mask.count_ones() as usize;
        let w = self.weights[mask as usize];
        if k <= max_support && w > 0.0 {
            // off-support coordinates sit at zero and contribute theta0_i^2
            let rest = radius_sq - off;
            if rest <= 0.0 {
                lower.push(w);
                upper.push(w);
            } else {
                let jmax = (rest / h).floor() as i64;
                let le = |limit: i64| -> f64 {
                    if limit < 0 {
                        0.0
                    } else {
                        ksum(conv.iter().take((limit as usize + 1).min(conv.len())).copied())
                    }
                };
                // sum of D_i lies in [J h, (J + k) h)
                let p_le_hi = le(jmax);
                let p_le_lo = le(jmax - k as i64);
                lower.push(w * (1.0 - p_le_hi).max(0.0));
                upper.push(w * (1.0 - p_le_lo).max(0.0));
            }
        }
        if k >= self.prior.cap {
            return;
        }
        let len = conv.len();
        for j in start..self.prior.dim {
            let mut next = vec![0.0; len];
            for (a, &ca) in conv.iter().enumerate() {
                if ca == 0.0 {
                    continue;
                }
                for (b, &hb) in hist[j].iter().take(len - a).enumerate() {
                    next[a + b] += ca * hb;
                }
            }
            self.v_mass_rec(
                j + 1,
                mask | (1 << j),
                &next,
                off - off_sq[j],
                hist,
                off_sq,
                max_support,
                radius_sq,
                h,
                lower,
                upper,
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_marginal_closed_form(x: f64, b: f64) -> f64 {
        use libm::erfc;
        let s2 = std::f64::consts::SQRT_2;
        (1.0 / (4.0 * b))
            * (1.0 / (2.0 * b * b)).exp()
            * ((-x / b).exp() * erfc((1.0 / b - x) / s2) + (x / b).exp() * erfc((1.0 / b + x) / s2))
    }

    #[test]
    fn laplace_marginal_matches_closed_form() {
        let prior = SpikeSlabPrior::new(4, &SparsityPrior::Uniform, Slab::Laplace { scale: 1.0 }, 2).unwrap();
        for x in [-3.0, 0.0, 0.7, 5.0, 8.0] {
            let (m, _) = prior.marginal(x).unwrap();
            let exact = laplace_marginal_closed_form(x, 1.0);
            assert!((m / exact - 1.0).abs() < 1e-11, "x = {x}: {m} vs {exact}");
        }
    }

    #[test]
    fn slab_lipschitz_classification() {
        assert!(
            SpikeSlabPrior::new(3, &SparsityPrior::Uniform, Slab::Cauchy { scale: 2.0 }, 1)
                .unwrap()
                .lipschitz()
                .is_some()
        );
        let p = SpikeSlabPrior::new(3, &SparsityPrior::Uniform, Slab::Uniform { half_width: 3.0 }, 1).unwrap();
        assert!(p.lipschitz().is_none());
        let q = SpikeSlabPrior::new(3, &SparsityPrior::Uniform, Slab::Laplace { scale: 1.0 }, 1).unwrap();
        assert!(q.with_lipschitz(0.5).is_err());
    }

    #[test]
    fn dimension_cap() {
        assert!(matches!(
            SpikeSlabPrior::new(15, &SparsityPrior::Uniform, Slab::Laplace { scale: 1.0 }, 2),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn weights_normalised_and_capped() {
        let prior = SpikeSlabPrior::new(6, &SparsityPrior::Uniform, Slab::Laplace { scale: 1.0 }, 2).unwrap();
        let post = spike_slab_posterior_exact(&prior, &[4.0, 0.1, -0.3, 0.2, -5.0, 0.0]).unwrap();
        let w = post.support_weights();
        assert_eq!(w.len(), 1 + 6 + 15);
        assert!((ksum(w.iter().map(|x| x.1)) - 1.0).abs() < 1e-12);
        let best = w.iter().cloned().fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        assert_eq!(best.0, 0b010001);
    }

    #[test]
    fn single_coordinate_v_mass_matches_direct_quadrature() {
        // n = 1, support {0}: V mass = P(S = {0}) P(|theta - t0|^2 > r) + P(S = {}) 1{t0^2 > r}
        let prior = SpikeSlabPrior::new(1, &SparsityPrior::Uniform, Slab::Laplace { scale: 1.0 }, 1).unwrap();
        let post = spike_slab_posterior_exact(&prior, &[2.5]).unwrap();
        let (t0, r) = (3.0, 1.0);
        let br = post.v_mass(&[t0], 1, r, 400).unwrap();
        let m = post.log_marginals()[0].exp();
        let dens =
            |t: f64| (Slab::Laplace { scale: 1.0 }.log_density(t) + SparseMeansModel::log_phi(2.5 - t)).exp() / m;
        let inside = integrate(dens, t0 - 1.0, t0 + 1.0, &[], 0.5, 1e-14, 0.0).unwrap().value;
        let expected = post.support_mass(1) * (1.0 - inside) + post.support_mass(0) * 1.0;
        assert!(
            br.lower <= expected + 1e-9 && expected <= br.upper + 1e-9,
            "{br:?} vs {expected}"
        );
        assert!(br.half_width() < 5e-3);
    }
}
