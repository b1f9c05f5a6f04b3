use serde::{Deserialize, Serialize};

use super::{AtomicPrior, Region};
use crate::error::{Error, Result};
use crate::models::{Metric, Model};
use crate::numeric::ksum;

/// Masses within this distance of the requested level count as attaining it.
const LEVEL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CredibleShape {
    /// Smallest closed ball around the posterior mode reaching the level.
    MetricBall,
    /// Fewest heaviest atoms reaching the level.
    UpperLevelSet,
}

/// Credible region of an atomic posterior.
#[derive(Debug, Clone)]
pub struct CredibleSet<P> {
    pub region: Region<P>,
    /// Indices of member atoms.
    pub atoms: Vec<usize>,
    /// Posterior mass of the region.
    pub attained: f64,
    pub level: f64,
    /// `attained - level`; positive when atom granularity forces overshoot.
    pub slack: f64,
}

impl<P> CredibleSet<P> {
    /// Whether the level could not be hit exactly.
    pub fn has_slack(&self) -> bool {
        self.slack > LEVEL_TOLERANCE
    }
}

/// Credible set of `posterior` with mass at least `level`.
pub fn credible_set<M: Model>(
    posterior: &AtomicPrior<M::Param>,
    model: &M,
    level: f64,
    shape: CredibleShape,
    metric: Metric,
) -> Result<CredibleSet<M::Param>> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::Parameter(format!("credible level {level} outside (0, 1]")));
    }
    let w = posterior.weights();
    let atoms = posterior.atoms();
    let target = level - LEVEL_TOLERANCE;
    match shape {
        CredibleShape::UpperLevelSet => {
            let mut order: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
            order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
            let mut chosen = Vec::new();
            let mut acc = Vec::new();
            for i in order {
                chosen.push(i);
                acc.push(w[i]);
                if ksum(acc.iter().copied()) >= target {
                    break;
                }
            }
            chosen.sort_unstable();
            let attained = ksum(chosen.iter().map(|&i| w[i]));
            let region = Region::points(model, chosen.iter().map(|&i| atoms[i].clone()).collect(), metric)
                .with_label(format!("credible-upper-level({level})"));
            Ok(CredibleSet {
                region,
                atoms: chosen,
                attained,
                level,
                slack: attained - level,
            })
        }
        CredibleShape::MetricBall => {
            let centre = posterior.mode();
            let mut dist = Vec::with_capacity(w.len());
            for (i, a) in atoms.iter().enumerate() {
                dist.push((model.param_distance(&atoms[centre], a, metric)?, i));
            }
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut radius = 0.0;
            let mut acc = Vec::new();
            for &(d, i) in &dist {
                if w[i] == 0.0 {
                    continue;
                }
                acc.push(w[i]);
                radius = d;
                if ksum(acc.iter().copied()) >= target {
                    break;
                }
            }
            let region = Region::closed_ball(model, atoms[centre].clone(), radius, metric)?;
            let chosen: Vec<usize> = (0..w.len()).filter(|&i| region.contains(&atoms[i])).collect();
            let attained = ksum(chosen.iter().map(|&i| w[i]));
            Ok(CredibleSet {
                region: region.with_label(format!("credible-ball({level})")),
                atoms: chosen,
                attained,
                level,
                slack: attained - level,
            })
        }
    }
}

/// `{theta: d(theta, D) < eps}`: the minimal confidence set associated with
/// a credible set `D`.
pub fn enlarge_credible<P: Clone + Send + Sync + 'static>(
    set: &CredibleSet<P>,
    eps: f64,
    metric: Metric,
) -> Result<Region<P>> {
    let own = set
        .region
        .as_ball()
        .map(|b| b.metric)
        .or_else(|| set.region.as_points().map(|p| p.2));
    if own != Some(metric) {
        return Err(Error::Config {
            path: "metric".into(),
            message: format!("credible set is not described in the {} metric", metric.name()),
        });
    }
    if eps == 0.0 {
        return Ok(set.region.clone());
    }
    set.region.enlarge(eps)
}

/// Largest pairwise distance among `points`.
pub fn diameter<M: Model>(model: &M, points: &[M::Param], metric: Metric) -> Result<f64> {
    let mut best: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(model.param_distance(a, b, metric)?);
        }
    }
    Ok(best)
}

/// `2 r` for a ball-shaped region; the diameter bound of its descriptor.
pub fn ball_diameter<P: Clone + Send + Sync + 'static>(region: &Region<P>) -> Option<f64> {
    region.as_ball().map(|b| 2.0 * b.radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::FiniteDist;
    use crate::models::{CategoricalModel, UniformLocationModel};

    fn grid_posterior() -> AtomicPrior<FiniteDist> {
        let atoms: Vec<FiniteDist> = (1..20)
            .map(|i| FiniteDist::new(vec![i as f64 / 20.0, 1.0 - i as f64 / 20.0]).unwrap())
            .collect();
        let w: Vec<f64> = (1..20).map(|i| (-(i as f64 - 7.3).powi(2) / 6.0).exp()).collect();
        AtomicPrior::new(atoms, w).unwrap()
    }

    #[test]
    fn upper_level_set_is_minimal() {
        let m = CategoricalModel::new(2).unwrap();
        let post = grid_posterior();
        let d = credible_set(&post, &m, 0.9, CredibleShape::UpperLevelSet, Metric::Hellinger).unwrap();
        assert!(d.attained >= 0.9 - 1e-12);
        assert!((post.mass(&d.region) - d.attained).abs() < 1e-12);
        // exhaustive check over all subsets of the 19 atoms
        let w = post.weights();
        let mut best = usize::MAX;
        for mask in 0u32..(1 << 19) {
            let mass = ksum((0..19).filter(|i| mask & (1 << i) != 0).map(|i| w[i]));
            if mass >= 0.9 - 1e-12 {
                best = best.min(mask.count_ones() as usize);
            }
        }
        assert_eq!(d.atoms.len(), best);
    }

    #[test]
    fn level_one_is_support_and_tiny_level_is_mode() {
        let m = CategoricalModel::new(2).unwrap();
        let post = grid_posterior();
        let full = credible_set(&post, &m, 1.0, CredibleShape::UpperLevelSet, Metric::Hellinger).unwrap();
        assert_eq!(full.atoms, post.support());
        let one = credible_set(&post, &m, 1e-6, CredibleShape::UpperLevelSet, Metric::Hellinger).unwrap();
        assert_eq!(one.atoms, vec![post.mode()]);
        assert!(one.has_slack());
    }

    #[test]
    fn ball_enlargement_and_diameter() {
        let m = UniformLocationModel;
        let atoms: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let w: Vec<f64> = (0..11).map(|i| if i == 5 { 4.0 } else { 1.0 }).collect();
        let post = AtomicPrior::new(atoms, w).unwrap();
        let d = credible_set(&post, &m, 0.4, CredibleShape::MetricBall, Metric::Euclidean).unwrap();
        assert!((d.region.as_ball().unwrap().radius - 0.1).abs() < 1e-12);
        let c = enlarge_credible(&d, 0.25, Metric::Euclidean).unwrap();
        assert!((ball_diameter(&c).unwrap() - ball_diameter(&d.region).unwrap() - 0.5).abs() < 1e-12);
        assert!(enlarge_credible(&d, 0.1, Metric::Tv).is_err());
        let same = enlarge_credible(&d, 0.0, Metric::Euclidean).unwrap();
        assert!(post.atoms().iter().all(|a| same.contains(a) == d.region.contains(a)));
    }
}
