//! Upper concave envelope of rate-memory points.

use serde::Serialize;

/// Piecewise-linear rate-memory frontier over `M/D`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frontier {
    /// `(M/D, R)` hull vertices, increasing in both coordinates.
    pub vertices: Vec<(f64, f64)>,
    /// Start of the slope-1 extension: caching a further fraction `δ` of every
    /// file at every user adds `δ` to the rate.
    pub ray_from: Option<(f64, f64)>,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Upper envelope of `points` by monotone chain. Collinear middle points are
/// dropped, as is everything after the highest-rate vertex (extra memory can
/// always be left unused). With `extend`, a slope-1 ray continues from the
/// last vertex.
pub fn build_frontier(points: &[(f64, f64)], extend: bool) -> Frontier {
    let mut pts: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    pts.dedup_by(|b, a| a.0 == b.0);

    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) >= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    if let Some(best) = hull
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
    {
        hull.truncate(best + 1);
    }
    let ray_from = if extend { hull.last().copied() } else { None };
    Frontier { vertices: hull, ray_from }
}

impl Frontier {
    /// Best rate at normalized cache size `m_over_d`, `None` left of the
    /// first vertex or right of the last one without an extension.
    pub fn rate_at(&self, m_over_d: f64) -> Option<f64> {
        let first = self.vertices.first()?;
        if m_over_d < first.0 {
            return None;
        }
        for w in self.vertices.windows(2) {
            let (a, b) = (w[0], w[1]);
            if m_over_d <= b.0 {
                return Some(a.1 + (b.1 - a.1) * (m_over_d - a.0) / (b.0 - a.0));
            }
        }
        let last = *self.vertices.last()?;
        if m_over_d == last.0 {
            return Some(last.1);
        }
        self.ray_from.map(|(x, r)| r + (m_over_d - x))
    }

    /// Vertices followed by the ray evaluated at `x_end` (when it lies to the
    /// right of the last vertex).
    pub fn polyline(&self, x_end: f64) -> Vec<(f64, f64)> {
        let mut out = self.vertices.clone();
        if let Some((x, r)) = self.ray_from {
            if x_end > x {
                out.push((x_end, r + (x_end - x)));
            }
        }
        out
    }
}
