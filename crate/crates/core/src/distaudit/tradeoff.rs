//! Empirical trade-off curves and their conversion to privacy profiles.

use serde::{Deserialize, Serialize};

use super::DistAuditError;
use crate::accountant::PrivacyProfile;

/// Fewest samples per side accepted by the estimator.
pub const MIN_SAMPLES: usize = 100;

/// Points `(alpha, beta)`: type I error under `P`, type II error under `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub points: Vec<(f64, f64)>,
    pub convexified: bool,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

impl TradeoffCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        Self { points, convexified: false }
    }

    /// Lower convex envelope of the points together with the trivial tests `(0, 1)` and `(1, 0)`.
    pub fn convexify(&self) -> Self {
        let mut pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .map(|&(a, b)| (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0)))
            .chain([(0.0, 1.0), (1.0, 0.0)])
            .collect();
        pts.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        pts.dedup_by(|later, kept| later.0 == kept.0);
        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for p in pts {
            while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        Self { points: hull, convexified: true }
    }

    /// Piecewise-linear interpolation of the curve at `alpha`.
    pub fn eval(&self, alpha: f64) -> f64 {
        let pts = &self.points;
        match pts.iter().position(|p| p.0 >= alpha) {
            None => pts.last().map_or(0.0, |p| p.1),
            Some(0) => pts[0].1,
            Some(i) => {
                let (a0, b0) = pts[i - 1];
                let (a1, b1) = pts[i];
                b0 + (b1 - b0) * (alpha - a0) / (a1 - a0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// A threshold is kept only if at least this fraction of the pooled
    /// samples falls on each side of it.
    pub min_tail_fraction: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { min_tail_fraction: 0.02 }
    }
}

/// ROC of the rule "score above threshold means `Q`", swept over all
/// midpoints of the pooled sorted scores, plus the reversed rule, convexified.
pub fn estimate_tradeoff_scores(sp: &[f64], sq: &[f64], cfg: &EstimatorConfig) -> Result<TradeoffCurve, DistAuditError> {
    if sp.len() < MIN_SAMPLES || sq.len() < MIN_SAMPLES {
        return Err(DistAuditError::InsufficientData { got: sp.len().min(sq.len()), need: MIN_SAMPLES });
    }
    if let Some(x) = sp.iter().chain(sq).find(|x| x.is_nan()) {
        return Err(DistAuditError::Scoring(format!("score {x}")));
    }
    let mut pooled: Vec<(f64, bool)> = sp.iter().map(|&x| (x, false)).chain(sq.iter().map(|&x| (x, true))).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = pooled.len();
    let min_tail = ((cfg.min_tail_fraction * total as f64).ceil() as usize).max(1);
    let (np, nq) = (sp.len() as f64, sq.len() as f64);
    let mut p_below = 0usize;
    let mut q_below = 0usize;
    let mut points = Vec::new();
    for i in 0..total {
        if pooled[i].1 {
            q_below += 1;
        } else {
            p_below += 1;
        }
        let below = i + 1;
        let at_boundary = below < total && pooled[i].0 < pooled[below].0;
        if at_boundary && below >= min_tail && total - below >= min_tail {
            let alpha = (np - p_below as f64) / np;
            let beta = q_below as f64 / nq;
            points.push((alpha, beta));
            points.push((1.0 - alpha, 1.0 - beta));
        }
    }
    Ok(TradeoffCurve::new(points).convexify())
}

/// `delta(eps) = 1 - min over vertices of (e^eps * alpha + beta)`, clamped to `[0, 1]`.
pub fn tradeoff_to_profile(curve: &TradeoffCurve, eps_grid: &[f64]) -> PrivacyProfile {
    let hull = if curve.convexified { curve.clone() } else { curve.convexify() };
    let v = &hull.points;
    let mut order: Vec<usize> = (0..eps_grid.len()).collect();
    order.sort_by(|&a, &b| eps_grid[a].total_cmp(&eps_grid[b]));
    let mut deltas = vec![0.0; eps_grid.len()];
    let value = |k: usize, y: f64| y * v[k].0 + v[k].1;
    // The minimising vertex moves towards smaller alpha as eps grows.
    let mut k = v.len() - 1;
    let mut first = true;
    for i in order {
        let y = eps_grid[i].exp();
        if first {
            k = (0..v.len()).min_by(|&a, &b| value(a, y).total_cmp(&value(b, y))).expect("hull has vertices");
            first = false;
        }
        while k > 0 && value(k - 1, y) <= value(k, y) {
            k -= 1;
        }
        deltas[i] = (1.0 - value(k, y)).clamp(0.0, 1.0);
    }
    PrivacyProfile { points: eps_grid.iter().copied().zip(deltas).collect() }
}
