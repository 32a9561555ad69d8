//! Rate pairs and convex rate-region polygons.

use serde::Serialize;

/// Collinearity and duplicate tolerance for hull construction.
pub const HULL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub r1: f64,
    pub r2: f64,
}

impl RatePoint {
    pub const fn new(r1: f64, r2: f64) -> Self {
        Self { r1, r2 }
    }

    pub fn sum(&self) -> f64 {
        self.r1 + self.r2
    }

    fn close(&self, o: &RatePoint) -> bool {
        (self.r1 - o.r1).abs() <= HULL_EPS && (self.r2 - o.r2).abs() <= HULL_EPS
    }
}

fn cross(o: RatePoint, a: RatePoint, b: RatePoint) -> f64 {
    (a.r1 - o.r1) * (b.r2 - o.r2) - (a.r2 - o.r2) * (b.r1 - o.r1)
}

/// Convex polygon listed counterclockwise. The last vertex connects back to
/// the first; it is not repeated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionPolygon {
    pub vertices: Vec<RatePoint>,
}

impl RegionPolygon {
    /// Keeps the given order but drops consecutive duplicates, including the
    /// wrap-around pair.
    pub fn from_ordered(points: &[RatePoint]) -> Self {
        let mut v: Vec<RatePoint> = Vec::with_capacity(points.len());
        for p in points {
            if v.last().is_none_or(|q| !q.close(p)) {
                v.push(*p);
            }
        }
        while v.len() > 1 && v[0].close(v.last().expect("non-empty")) {
            v.pop();
        }
        Self { vertices: v }
    }

    /// Monotone-chain convex hull, counterclockwise from the lowest-leftmost point.
    pub fn convex_hull(points: &[RatePoint]) -> Self {
        let mut pts: Vec<RatePoint> = points.to_vec();
        pts.sort_by(|a, b| a.r1.total_cmp(&b.r1).then(a.r2.total_cmp(&b.r2)));
        pts.dedup_by(|a, b| a.close(b));
        if pts.len() < 3 {
            return Self { vertices: pts };
        }
        let mut hull: Vec<RatePoint> = Vec::with_capacity(2 * pts.len());
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &RatePoint>> =
                if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
            for &p in iter {
                while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= HULL_EPS {
                    hull.pop();
                }
                hull.push(p);
            }
            hull.pop();
        }
        Self { vertices: hull }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut s = 0.0;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            s += a.r1 * b.r2 - b.r1 * a.r2;
        }
        0.5 * s
    }

    /// Every consecutive edge pair turns left (or goes straight within `eps`).
    pub fn is_convex(&self, eps: f64) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return true;
        }
        (0..n).all(|i| {
            let (a, b, c) = (self.vertices[i], self.vertices[(i + 1) % n], self.vertices[(i + 2) % n]);
            cross(a, b, c) >= -eps
        })
    }

    /// Point inside or on the boundary, with slack `eps` on each edge test.
    /// Degenerate polygons (segments, points) are handled as such.
    pub fn contains(&self, p: RatePoint, eps: f64) -> bool {
        let n = self.vertices.len();
        match n {
            0 => false,
            1 => (self.vertices[0].r1 - p.r1).abs() <= eps && (self.vertices[0].r2 - p.r2).abs() <= eps,
            2 => {
                let (a, b) = (self.vertices[0], self.vertices[1]);
                let len = ((b.r1 - a.r1).powi(2) + (b.r2 - a.r2).powi(2)).sqrt();
                let t = ((p.r1 - a.r1) * (b.r1 - a.r1) + (p.r2 - a.r2) * (b.r2 - a.r2)) / (len * len);
                cross(a, b, p).abs() <= eps * len && (-eps..=1.0 + eps).contains(&t)
            }
            _ => (0..n).all(|i| {
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                let len = ((b.r1 - a.r1).powi(2) + (b.r2 - a.r2).powi(2)).sqrt();
                cross(a, b, p) >= -eps * len
            }),
        }
    }

    /// All of `other`'s vertices lie in `self`.
    pub fn contains_polygon(&self, other: &RegionPolygon, eps: f64) -> bool {
        other.vertices.iter().all(|&p| self.contains(p, eps))
    }

    pub fn max_sum_rate(&self) -> f64 {
        self.vertices.iter().map(RatePoint::sum).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(a: f64, b: f64) -> RatePoint {
        RatePoint::new(a, b)
    }

    #[test]
    fn hull_of_square_with_interior_and_collinear_points() {
        let pts = [p(0.0, 0.0), p(1.0, 0.0), p(0.5, 0.0), p(1.0, 1.0), p(0.0, 1.0), p(0.5, 0.5), p(1.0, 1.0)];
        let h = RegionPolygon::convex_hull(&pts);
        assert_eq!(h.vertices, vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]);
        assert!((h.area() - 1.0).abs() < 1e-15);
        assert!(h.is_convex(0.0));
    }

    #[test]
    fn ordered_dedup_wraps() {
        let r = RegionPolygon::from_ordered(&[p(0.0, 0.0), p(2.0, 0.0), p(2.0, 0.0), p(2.0, 0.0), p(0.0, 0.0)]);
        assert_eq!(r.vertices, vec![p(0.0, 0.0), p(2.0, 0.0)]);
        assert!(r.contains(p(1.0, 0.0), 1e-12));
        assert!(!r.contains(p(1.0, 0.1), 1e-12));
    }

    #[test]
    fn containment() {
        let sq = RegionPolygon::convex_hull(&[p(0.0, 0.0), p(2.0, 0.0), p(2.0, 2.0), p(0.0, 2.0)]);
        assert!(sq.contains(p(1.0, 1.0), 0.0));
        assert!(sq.contains(p(2.0, 1.0), 0.0));
        assert!(!sq.contains(p(2.1, 1.0), 1e-12));
        let small = RegionPolygon::from_ordered(&[p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]);
        assert!(sq.contains_polygon(&small, 0.0));
        assert!(!small.contains_polygon(&sq, 1e-9));
    }

    proptest! {
        #[test]
        fn hull_is_convex_and_contains_inputs(pts in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0), 3..60)) {
            let pts: Vec<RatePoint> = pts.into_iter().map(|(a, b)| p(a, b)).collect();
            let h = RegionPolygon::convex_hull(&pts);
            prop_assert!(h.is_convex(1e-9));
            for q in &pts {
                prop_assert!(h.contains(*q, 1e-9));
            }
        }
    }
}
