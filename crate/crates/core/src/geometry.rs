//! Planar geometry on the tabletop.
//!
//! The frame is centered on the table, `+x` to the right and `+y` away from
//! the viewer ("top"/"behind"). All lengths are meters.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Axis-aligned box, closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    /// Panics if `min` exceeds `max` on either axis.
    pub fn new(min: Vec2, max: Vec2) -> Self {
        assert!(
            min.x <= max.x && min.y <= max.y,
            "AABB min {min:?} exceeds max {max:?}"
        );
        Self { min, max }
    }

    pub fn from_extents(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Self::new(Vec2::new(xmin, ymin), Vec2::new(xmax, ymax))
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    /// True when the interiors intersect; touching edges do not count.
    pub fn overlaps(&self, other: &Aabb) -> bool {
        self.min.x < other.max.x
            && other.min.x < self.max.x
            && self.min.y < other.max.y
            && other.min.y < self.max.y
    }

    /// Point where the ray from the center along `dir` leaves the box.
    pub fn boundary_point(&self, dir: Vec2) -> Vec2 {
        let c = self.center();
        let hx = 0.5 * self.width();
        let hy = 0.5 * self.height();
        let tx = if dir.x.abs() > 0.0 { hx / dir.x.abs() } else { f64::INFINITY };
        let ty = if dir.y.abs() > 0.0 { hy / dir.y.abs() } else { f64::INFINITY };
        let t = tx.min(ty);
        if t.is_finite() {
            c + dir * t
        } else {
            c
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.min.x, self.min.y, self.max.x, self.max.y]
    }
}

/// Euclidean distance from `p` to the closest point of `b`; zero inside or on `b`.
pub fn aabb_distance(p: Vec2, b: &Aabb) -> f64 {
    let dx = (b.min.x - p.x).max(0.0).max(p.x - b.max.x);
    let dy = (b.min.y - p.y).max(0.0).max(p.y - b.max.y);
    dx.hypot(dy)
}

/// Table extent in meters, centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub width: f64,
    pub height: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            width: 1.0,
            height: 0.6,
        }
    }
}

impl Workspace {
    pub fn new(width: f64, height: f64) -> Self {
        assert!(width > 0.0 && height > 0.0, "workspace extent must be positive");
        Self { width, height }
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_extents(
            -0.5 * self.width,
            -0.5 * self.height,
            0.5 * self.width,
            0.5 * self.height,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_box() -> Aabb {
        Aabb::from_extents(-1.0, -1.0, 1.0, 1.0)
    }

    #[test]
    fn distance_examples() {
        let b = unit_box();
        assert_eq!(aabb_distance(Vec2::new(0.0, 0.0), &b), 0.0);
        assert_eq!(aabb_distance(Vec2::new(2.0, 0.0), &b), 1.0);
        // corner: sqrt(1^2 + 1^2)
        let d = aabb_distance(Vec2::new(2.0, 2.0), &b);
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn boundary_point_along_axes_and_diagonal() {
        let b = Aabb::from_extents(0.1, 0.1, 0.2, 0.2);
        let p = b.boundary_point(Vec2::new(-1.0, 0.0));
        assert!((p.x - 0.1).abs() < 1e-12 && (p.y - 0.15).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q = b.boundary_point(Vec2::new(s, s));
        assert!((q.x - 0.2).abs() < 1e-12 && (q.y - 0.2).abs() < 1e-12);
    }

    #[test]
    #[should_panic]
    fn inverted_box_panics() {
        Aabb::from_extents(1.0, 0.0, 0.0, 1.0);
    }

    proptest! {
        #[test]
        fn distance_zero_iff_inside(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let b = unit_box();
            let p = Vec2::new(x, y);
            prop_assert_eq!(aabb_distance(p, &b) == 0.0, b.contains(p));
        }

        #[test]
        fn distance_is_lipschitz(x in -3.0f64..3.0, y in -3.0f64..3.0,
                                 dx in -0.01f64..0.01, dy in -0.01f64..0.01) {
            // continuity: |d(p) - d(q)| <= |p - q|
            let b = unit_box();
            let p = Vec2::new(x, y);
            let q = Vec2::new(x + dx, y + dy);
            let diff = (aabb_distance(p, &b) - aabb_distance(q, &b)).abs();
            prop_assert!(diff <= (p - q).norm() + 1e-12);
        }
    }
}
