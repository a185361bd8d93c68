//! Signed distance between oriented rectangles and the two-phase collision
//! test used when filling payoff matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::Trajectory;
use crate::track::{CarPose, Vec2};

/// Rectangular car footprint in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
}

impl Default for Footprint {
    /// 12 cm × 5 cm miniature race car.
    fn default() -> Self {
        Footprint {
            length: 0.12,
            width: 0.05,
        }
    }
}

impl Footprint {
    pub fn at(&self, pose: &CarPose) -> OrientedBox {
        OrientedBox::new(pose.position(), pose.phi, self.length, self.width)
    }

    pub fn circumradius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
    axis_x: Vec2,
    axis_y: Vec2,
}

impl OrientedBox {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        debug_assert!(length > 0.0 && width > 0.0);
        let (s, c) = heading.sin_cos();
        OrientedBox {
            center,
            heading,
            length,
            width,
            axis_x: Vec2::new(c, s),
            axis_y: Vec2::new(-s, c),
        }
    }

    pub fn circumradius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Vec2; 4] {
        let hx = self.axis_x * (0.5 * self.length);
        let hy = self.axis_y * (0.5 * self.width);
        [
            self.center + hx + hy,
            self.center - hx + hy,
            self.center - hx - hy,
            self.center + hx - hy,
        ]
    }

    fn half_extent_along(&self, axis: Vec2) -> f64 {
        0.5 * self.length * axis.dot(&self.axis_x).abs() + 0.5 * self.width * axis.dot(&self.axis_y).abs()
    }
}

/// Smallest projected overlap across the four face normals. Positive means
/// every axis overlaps (the boxes intersect with that penetration depth).
fn min_axis_overlap(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let d = b.center - a.center;
    [a.axis_x, a.axis_y, b.axis_x, b.axis_y]
        .iter()
        .map(|&u| a.half_extent_along(u) + b.half_extent_along(u) - d.dot(&u).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Signed distance: separation distance for disjoint boxes, minus the
/// penetration depth for overlapping ones. Touching boxes give zero.
pub fn signed_distance(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let overlap = min_axis_overlap(a, b);
    if overlap > 0.0 {
        -overlap
    } else {
        polygon_distance(&a.corners(), &b.corners())
    }
}

/// Broad phase on circumscribed circles, then separating axes.
pub fn pair_collides(a: &OrientedBox, b: &OrientedBox) -> bool {
    let reach = a.circumradius() + b.circumradius();
    if (b.center - a.center).norm_squared() > reach * reach {
        return false;
    }
    min_axis_overlap(a, b) > 0.0
}

/// True when the broad phase alone rules out a collision.
pub fn broad_phase_clear(a: &OrientedBox, b: &OrientedBox) -> bool {
    let reach = a.circumradius() + b.circumradius();
    (b.center - a.center).norm_squared() > reach * reach
}

/// Per-step signed distances for `k = 1..N`. The initial poses are given and
/// not checked.
pub fn trajectory_pair_min_distance(
    t1: &Trajectory,
    t2: &Trajectory,
    footprint: &Footprint,
) -> Result<Vec<f64>> {
    if t1.horizon() != t2.horizon() {
        return Err(Error::HorizonMismatch(t1.horizon(), t2.horizon()));
    }
    Ok((1..=t1.horizon())
        .map(|k| signed_distance(&footprint.at(&t1.states[k]), &footprint.at(&t2.states[k])))
        .collect())
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

fn polygon_distance(pa: &[Vec2; 4], pb: &[Vec2; 4]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..4 {
        let (a0, a1) = (pa[i], pa[(i + 1) % 4]);
        for j in 0..4 {
            let (b0, b1) = (pb[j], pb[(j + 1) % 4]);
            best = best
                .min(point_segment_distance(a0, b0, b1))
                .min(point_segment_distance(b0, a0, a1));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn unit(x: f64, y: f64) -> OrientedBox {
        OrientedBox::new(Vec2::new(x, y), 0.0, 1.0, 1.0)
    }

    #[test]
    fn gap_between_squares() {
        assert!((signed_distance(&unit(0.0, 0.0), &unit(3.0, 0.0)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_squares() {
        assert!((signed_distance(&unit(0.0, 0.0), &unit(0.0, 0.0)) + 1.0).abs() < 1e-12);
        assert!(pair_collides(&unit(0.0, 0.0), &unit(0.0, 0.0)));
    }

    #[test]
    fn touching_is_not_a_collision() {
        let a = unit(0.0, 0.0);
        let b = unit(1.0, 0.0);
        assert_eq!(signed_distance(&a, &b), 0.0);
        assert!(!pair_collides(&a, &b));
    }

    #[test]
    fn corner_to_corner_distance_is_euclidean() {
        let a = unit(0.0, 0.0);
        let b = unit(2.0, 2.0);
        assert!((signed_distance(&a, &b) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rotated_diamond_against_square() {
        // diamond corner at x = 2 - sqrt(0.5); square face at x = 0.5
        let d = OrientedBox::new(Vec2::new(2.0, 0.0), FRAC_PI_4, 1.0, 1.0);
        let expected = 2.0 - 0.5f64.sqrt() - 0.5;
        assert!((signed_distance(&unit(0.0, 0.0), &d) - expected).abs() < 1e-12);
    }

    #[test]
    fn far_cars_clear_in_broad_phase() {
        let fp = Footprint::default();
        let a = fp.at(&CarPose::new(0.0, 0.0, 0.3, 0));
        let b = fp.at(&CarPose::new(10.0, 0.0, -1.0, 0));
        assert!(broad_phase_clear(&a, &b));
        assert!(!pair_collides(&a, &b));
    }
}
