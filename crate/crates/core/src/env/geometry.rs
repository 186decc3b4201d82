//! Planar geometry for circle-versus-polygon contact.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Elastic reflection of `v` about the unit contact normal `n`: `v - 2 (v.n) n`.
pub fn reflect(v: Vec2, n: Vec2) -> Vec2 {
    v - n * (2.0 * v.dot(n))
}

/// Closest point to `p` on the segment `a`-`b`.
pub fn closest_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    a + ab * t
}

/// Closed simple polygon with a cached bounding box.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vec2>,
    lo: Vec2,
    hi: Vec2,
}

impl Polygon {
    /// `None` for fewer than three vertices.
    pub fn new(vertices: Vec<Vec2>) -> Option<Self> {
        if vertices.len() < 3 {
            return None;
        }
        let mut lo = vertices[0];
        let mut hi = vertices[0];
        for v in &vertices[1..] {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        Some(Polygon { vertices, lo, hi })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// True when `p` lies within `margin` of the bounding box.
    pub fn near_bounds(&self, p: Vec2, margin: f64) -> bool {
        p.x >= self.lo.x - margin
            && p.x <= self.hi.x + margin
            && p.y >= self.lo.y - margin
            && p.y <= self.hi.y + margin
    }

    /// Even-odd rule; handles non-convex polygons.
    pub fn contains(&self, p: Vec2) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Closest boundary point to `p` and its squared distance.
    pub fn closest_boundary_point(&self, p: Vec2) -> (Vec2, f64) {
        let mut best = (self.vertices[0], f64::INFINITY);
        for (a, b) in self.edges() {
            let c = closest_on_segment(p, a, b);
            let d = (p - c).norm_sq();
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    }

    /// Signed clearance from `p` to the boundary: negative inside.
    pub fn clearance(&self, p: Vec2) -> f64 {
        let d = self.closest_boundary_point(p).1.sqrt();
        if self.contains(p) {
            -d
        } else {
            d
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Polygon {
        Polygon::new(vec![
            Vec2::new(0.4, 0.4),
            Vec2::new(0.6, 0.4),
            Vec2::new(0.6, 0.6),
            Vec2::new(0.4, 0.6),
        ])
        .unwrap()
    }

    #[test]
    fn containment_and_clearance() {
        let sq = square();
        assert!(sq.contains(Vec2::new(0.5, 0.5)));
        assert!(!sq.contains(Vec2::new(0.7, 0.5)));
        assert!((sq.clearance(Vec2::new(0.7, 0.5)) - 0.1).abs() < 1e-12);
        assert!((sq.clearance(Vec2::new(0.5, 0.45)) + 0.05).abs() < 1e-12);
    }

    #[test]
    fn non_convex_containment() {
        // U shape opening upward
        let u = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.3, 0.0),
            Vec2::new(0.3, 0.3),
            Vec2::new(0.2, 0.3),
            Vec2::new(0.2, 0.1),
            Vec2::new(0.1, 0.1),
            Vec2::new(0.1, 0.3),
            Vec2::new(0.0, 0.3),
        ])
        .unwrap();
        assert!(u.contains(Vec2::new(0.05, 0.2)));
        assert!(!u.contains(Vec2::new(0.15, 0.2)));
        assert!(u.contains(Vec2::new(0.15, 0.05)));
    }

    #[test]
    fn corner_closest_point_is_vertex() {
        let (c, _) = square().closest_boundary_point(Vec2::new(0.7, 0.7));
        assert_eq!(c, Vec2::new(0.6, 0.6));
    }

    #[test]
    fn degenerate_polygon_rejected() {
        assert!(Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)]).is_none());
    }
}
