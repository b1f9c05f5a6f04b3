use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::{kl_divergence, kl_second_moment, FiniteDist};
use crate::models::{Metric, Model};

pub type DistFn<P> = Arc<dyn Fn(&P, &P) -> f64 + Send + Sync>;
pub type PredicateFn<P> = Arc<dyn Fn(&P) -> bool + Send + Sync>;

/// Points at or below this distance are treated as equal.
pub const POINT_TOLERANCE: f64 = 1e-9;

/// Metric ball around a centre.
#[derive(Clone)]
pub struct Ball<P> {
    pub center: P,
    pub radius: f64,
    pub metric: Metric,
    /// `d <= r` when closed, `d < r` otherwise.
    pub closed: bool,
    dist: DistFn<P>,
}

impl<P> Ball<P> {
    pub fn contains(&self, theta: &P) -> bool {
        let d = (self.dist)(&self.center, theta);
        if self.closed {
            d <= self.radius
        } else {
            d < self.radius
        }
    }
}

#[derive(Clone)]
enum Kind<P> {
    All,
    Empty,
    Predicate(PredicateFn<P>),
    Ball(Ball<P>),
    /// Finite set; with `eps > 0` its open `eps`-enlargement.
    Points {
        points: Vec<P>,
        eps: f64,
        metric: Metric,
        dist: DistFn<P>,
    },
    Not(Box<Region<P>>),
    And(Vec<Region<P>>),
    Or(Vec<Region<P>>),
}

/// Measurable subset of a parameter space, given by membership.
#[derive(Clone)]
pub struct Region<P> {
    label: String,
    kind: Kind<P>,
}

impl<P> fmt::Debug for Region<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Region({})", self.label)
    }
}

fn dist_fn<M: Model>(model: &M, metric: Metric) -> DistFn<M::Param> {
    let m = model.clone();
    Arc::new(move |a, b| m.param_distance(a, b, metric).unwrap_or(f64::NAN))
}

impl<P: Clone + Send + Sync + 'static> Region<P> {
    pub fn all() -> Self {
        Self {
            label: "all".into(),
            kind: Kind::All,
        }
    }

    pub fn empty() -> Self {
        Self {
            label: "empty".into(),
            kind: Kind::Empty,
        }
    }

    pub fn predicate(label: impl Into<String>, f: impl Fn(&P) -> bool + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            kind: Kind::Predicate(Arc::new(f)),
        }
    }

    /// Open ball `{theta: d(center, theta) < radius}`.
    pub fn ball<M: Model<Param = P>>(model: &M, center: P, radius: f64, metric: Metric) -> Result<Self> {
        Self::make_ball(model, center, radius, metric, false)
    }

    /// Closed ball `{theta: d(center, theta) <= radius}`.
    pub fn closed_ball<M: Model<Param = P>>(model: &M, center: P, radius: f64, metric: Metric) -> Result<Self> {
        Self::make_ball(model, center, radius, metric, true)
    }

    fn make_ball<M: Model<Param = P>>(model: &M, center: P, radius: f64, metric: Metric, closed: bool) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::Parameter(format!("ball radius {radius} is negative")));
        }
        // fail early on metrics the family does not support
        model.param_distance(&center, &center, metric)?;
        Ok(Self {
            label: format!("{}-ball(r={radius})", metric.name()),
            kind: Kind::Ball(Ball {
                center,
                radius,
                metric,
                closed,
                dist: dist_fn(model, metric),
            }),
        })
    }

    /// `{theta: d(center, theta) >= radius}`.
    pub fn outside_ball<M: Model<Param = P>>(model: &M, center: P, radius: f64, metric: Metric) -> Result<Self> {
        let b = Self::ball(model, center, radius, metric)?;
        let label = format!("{}-ball-complement(r={radius})", metric.name());
        Ok(b.complement().with_label(label))
    }

    /// The finite set `points`, compared under `metric`.
    pub fn points<M: Model<Param = P>>(model: &M, points: Vec<P>, metric: Metric) -> Self {
        Self {
            label: format!("{} points", points.len()),
            kind: Kind::Points {
                points,
                eps: 0.0,
                metric,
                dist: dist_fn(model, metric),
            },
        }
    }

    pub fn complement(self) -> Self {
        Self {
            label: format!("not({})", self.label),
            kind: Kind::Not(Box::new(self)),
        }
    }

    pub fn and(self, other: Region<P>) -> Self {
        Self {
            label: format!("({}) and ({})", self.label, other.label),
            kind: Kind::And(vec![self, other]),
        }
    }

    pub fn or(self, other: Region<P>) -> Self {
        Self {
            label: format!("({}) or ({})", self.label, other.label),
            kind: Kind::Or(vec![self, other]),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn contains(&self, theta: &P) -> bool {
        match &self.kind {
            Kind::All => true,
            Kind::Empty => false,
            Kind::Predicate(f) => f(theta),
            Kind::Ball(b) => b.contains(theta),
            Kind::Points { points, eps, dist, .. } => {
                if *eps > 0.0 {
                    points.iter().any(|p| dist(p, theta) < *eps)
                } else {
                    points.iter().any(|p| dist(p, theta) <= POINT_TOLERANCE)
                }
            }
            Kind::Not(r) => !r.contains(theta),
            Kind::And(rs) => rs.iter().all(|r| r.contains(theta)),
            Kind::Or(rs) => rs.iter().any(|r| r.contains(theta)),
        }
    }

    /// The ball descriptor when the region is a ball.
    pub fn as_ball(&self) -> Option<&Ball<P>> {
        match &self.kind {
            Kind::Ball(b) => Some(b),
            _ => None,
        }
    }

    /// Finite point set and enlargement radius when the region is one.
    pub fn as_points(&self) -> Option<(&[P], f64, Metric)> {
        match &self.kind {
            Kind::Points {
                points, eps, metric, ..
            } => Some((points, *eps, *metric)),
            _ => None,
        }
    }

    /// The `eps`-enlargement: balls grow radius `r -> r + eps`, point sets
    /// become `{theta: min_d d(theta, d) < eps}`.
    pub fn enlarge(&self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::Parameter(format!("enlargement radius {eps} is negative")));
        }
        let label = format!("{}+{eps}", self.label);
        match &self.kind {
            Kind::Ball(b) => {
                let mut b = b.clone();
                b.radius += eps;
                Ok(Self {
                    label,
                    kind: Kind::Ball(b),
                })
            }
            Kind::Points {
                points,
                eps: e0,
                metric,
                dist,
            } => Ok(Self {
                label,
                kind: Kind::Points {
                    points: points.clone(),
                    eps: if *e0 > 0.0 { e0 + eps } else { eps },
                    metric: *metric,
                    dist: dist.clone(),
                },
            }),
            Kind::Empty => Ok(Self::empty()),
            _ => Err(Error::Parameter(format!(
                "region `{}` has no metric description to enlarge",
                self.label
            ))),
        }
    }
}

impl Region<FiniteDist> {
    /// `{p: KL(p0, p) < eps_sq}`.
    pub fn kl_ball(p0: FiniteDist, eps_sq: f64) -> Self {
        Region::predicate(format!("kl-ball(eps^2={eps_sq})"), move |p: &FiniteDist| {
            kl_divergence(&p0, p).map(|k| k < eps_sq).unwrap_or(false)
        })
    }

    /// `{p: KL(p0, p) < eps_sq, P0 log^2(p0/p) < eps_sq}`; a subset of
    /// [`Region::kl_ball`].
    pub fn ggv(p0: FiniteDist, eps_sq: f64) -> Self {
        Region::predicate(format!("ggv(eps^2={eps_sq})"), move |p: &FiniteDist| {
            let k = kl_divergence(&p0, p).unwrap_or(f64::INFINITY);
            let v = kl_second_moment(&p0, p).unwrap_or(f64::INFINITY);
            k < eps_sq && v < eps_sq
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::UniformLocationModel;

    #[test]
    fn ball_membership_and_complement() {
        let m = UniformLocationModel;
        let b = Region::ball(&m, 0.0, 0.1, Metric::Euclidean).unwrap();
        assert!(b.contains(&0.05));
        assert!(!b.contains(&0.1));
        let c = Region::closed_ball(&m, 0.0, 0.1, Metric::Euclidean).unwrap();
        assert!(c.contains(&0.1));
        let v = Region::outside_ball(&m, 0.0, 0.1, Metric::Euclidean).unwrap();
        assert!(v.contains(&0.1) && !v.contains(&0.0));
    }

    #[test]
    fn unsupported_metric_is_rejected() {
        let m = UniformLocationModel;
        assert!(matches!(
            Region::ball(&m, 0.0, 0.1, Metric::MaxJointBin),
            Err(Error::Metric { .. })
        ));
    }

    #[test]
    fn enlargement_of_points_and_balls() {
        let m = UniformLocationModel;
        let d = Region::points(&m, vec![-0.01, 0.01], Metric::Euclidean);
        let c = d.enlarge(0.05).unwrap();
        assert!(c.contains(&0.0599) && !c.contains(&0.0601));
        assert!(c.contains(&-0.0599) && !c.contains(&-0.0601));
        let b = Region::ball(&m, 0.0, 0.1, Metric::Euclidean)
            .unwrap()
            .enlarge(0.05)
            .unwrap();
        assert!((b.as_ball().unwrap().radius - 0.15).abs() < 1e-15);
        let p = Region::<f64>::predicate("x", |_| true);
        assert!(p.enlarge(0.1).is_err());
    }

    #[test]
    fn ggv_inside_kl_ball() {
        let p0 = FiniteDist::new(vec![0.2, 0.3, 0.5]).unwrap();
        let ggv = Region::ggv(p0.clone(), 0.05);
        let kl = Region::kl_ball(p0, 0.05);
        for i in 1..20 {
            for j in 1..(20 - i) {
                let p = FiniteDist::new(vec![i as f64 / 20.0, j as f64 / 20.0, (20 - i - j) as f64 / 20.0]).unwrap();
                if ggv.contains(&p) {
                    assert!(kl.contains(&p));
                }
            }
        }
    }
}
