//! Closed race track: centerline projection, lap counting, progress and
//! track membership.

use std::f64::consts::PI;
use std::io::Read;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// Index of a motion primitive. Kept as an integer; it is only ever compared
/// and looked up, so it embeds in the reals without loss.
pub type ModeId = usize;

/// Planar pose of a car together with its active mode and lap counter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarPose {
    pub x: f64,
    pub y: f64,
    /// Heading in radians.
    pub phi: f64,
    pub mode: ModeId,
    pub laps: u32,
}

impl CarPose {
    pub fn new(x: f64, y: f64, phi: f64, mode: ModeId) -> Self {
        CarPose {
            x,
            y,
            phi,
            mode,
            laps: 0,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    start: Vec2,
    dir: Vec2,
    len: f64,
    /// Cumulative arclength at `start`.
    s0: f64,
}

impl Segment {
    /// Distance along the segment of the foot point, and squared distance.
    fn foot(&self, p: Vec2) -> (f64, f64) {
        let t = (p - self.start).dot(&self.dir).clamp(0.0, self.len);
        (t, (p - (self.start + self.dir * t)).norm_squared())
    }

    fn dist2(&self, p: Vec2) -> f64 {
        self.foot(p).1
    }
}

/// Result of a lap-counter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LapUpdate {
    pub laps: u32,
    /// The car crossed the start line backwards. The counter is left
    /// unchanged in that case; callers log the event.
    pub reverse_crossing: bool,
}

/// Closed piecewise-affine centerline with a constant half width.
///
/// Immutable after construction; every query is a pure function.
#[derive(Debug, Clone)]
pub struct TrackModel {
    centerline: Vec<Vec2>,
    halfwidth: f64,
    segments: Vec<Segment>,
    total_length: f64,
    grid: SegmentGrid,
}

/// Uniform grid over the track surroundings. Each cell lists every segment
/// that can be nearest to some point of the cell, in arclength order, so a
/// projection only scans a handful of candidates.
#[derive(Debug, Clone)]
struct SegmentGrid {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    candidates: Vec<Vec<u32>>,
}

impl SegmentGrid {
    const CELLS_PER_AXIS: f64 = 128.0;

    fn build(segments: &[Segment], lo: Vec2, hi: Vec2) -> Self {
        let extent = (hi - lo).max();
        let cell = (extent / Self::CELLS_PER_AXIS).max(1e-6);
        let nx = ((hi.x - lo.x) / cell).ceil() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).ceil() as usize + 1;
        let reach = cell * std::f64::consts::FRAC_1_SQRT_2;
        let mut candidates = Vec::with_capacity(nx * ny);
        let mut d = vec![0.0; segments.len()];
        for iy in 0..ny {
            for ix in 0..nx {
                let c = lo + Vec2::new((ix as f64 + 0.5) * cell, (iy as f64 + 0.5) * cell);
                for (k, seg) in segments.iter().enumerate() {
                    d[k] = seg.dist2(c).sqrt();
                }
                let best = d.iter().copied().fold(f64::INFINITY, f64::min);
                let bound = best + 2.0 * reach + 1e-9;
                candidates.push((0..segments.len()).filter(|&k| d[k] <= bound).map(|k| k as u32).collect());
            }
        }
        SegmentGrid {
            origin: lo,
            cell,
            nx,
            ny,
            candidates,
        }
    }

    fn cell_of(&self, p: Vec2) -> Option<&[u32]> {
        let r = (p - self.origin) / self.cell;
        if !(r.x >= 0.0 && r.y >= 0.0) {
            return None;
        }
        let (ix, iy) = (r.x as usize, r.y as usize);
        (ix < self.nx && iy < self.ny).then(|| self.candidates[iy * self.nx + ix].as_slice())
    }
}

impl TrackModel {
    /// Builds a track from an ordered list of centerline points. The
    /// polyline is closed implicitly; a repeated first point at the end is
    /// dropped.
    pub fn new(points: Vec<Vec2>, halfwidth: f64) -> Result<Self> {
        if !(halfwidth >= 0.0) || !halfwidth.is_finite() {
            return Err(Error::InvalidTrack(format!(
                "halfwidth must be finite and non-negative, got {halfwidth}"
            )));
        }
        let mut points = points;
        if points.len() >= 2 && (points[0] - points[points.len() - 1]).norm() == 0.0 {
            points.pop();
        }
        if points.len() < 3 {
            return Err(Error::InvalidTrack(format!(
                "a closed centerline needs at least 3 distinct points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidTrack("non-finite centerline point".into()));
        }

        let n = points.len();
        let mut segments = Vec::with_capacity(n);
        let mut s = 0.0;
        for k in 0..n {
            let a = points[k];
            let b = points[(k + 1) % n];
            let d = b - a;
            let len = d.norm();
            if !(len > 0.0) {
                return Err(Error::InvalidTrack(format!(
                    "segment {k} has zero length"
                )));
            }
            segments.push(Segment {
                start: a,
                dir: d / len,
                len,
                s0: s,
            });
            s += len;
        }

        let (mut lo, mut hi) = (points[0], points[0]);
        for p in &points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let margin = Vec2::repeat(halfwidth + 0.5);
        let grid = SegmentGrid::build(&segments, lo - margin, hi + margin);
        let track = TrackModel {
            centerline: points,
            halfwidth,
            segments,
            total_length: s,
            grid,
        };
        track.check_simple()?;
        Ok(track)
    }

    /// Rejects centerlines where two non-adjacent segments properly cross.
    fn check_simple(&self) -> Result<()> {
        let n = self.segments.len();
        for a in 0..n {
            for b in (a + 2)..n {
                if a == 0 && b == n - 1 {
                    continue;
                }
                let (p, q) = (&self.segments[a], &self.segments[b]);
                if segments_cross(p.start, p.start + p.dir * p.len, q.start, q.start + q.dir * q.len)
                {
                    return Err(Error::InvalidTrack(format!(
                        "centerline self-intersects between segments {a} and {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads a centerline CSV with a required `x,y` header.
    pub fn from_csv_reader<R: Read>(reader: R, halfwidth: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "x" || &headers[1] != "y" {
            return Err(Error::parse(1, "expected header `x,y`"));
        }
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != 2 {
                return Err(Error::parse(line, format!("expected 2 fields, got {}", rec.len())));
            }
            let parse = |k: usize| -> Result<f64> {
                rec[k]
                    .parse::<f64>()
                    .map_err(|e| Error::parse(line, format!("field {}: {e}", k + 1)))
            };
            points.push(Vec2::new(parse(0)?, parse(1)?));
        }
        TrackModel::new(points, halfwidth)
    }

    pub fn centerline(&self) -> &[Vec2] {
        &self.centerline
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    /// Returns `(arclength, squared distance)` of the nearest centerline point.
    fn nearest(&self, p: Vec2) -> (f64, f64) {
        let mut best_s = 0.0;
        let mut best_d2 = f64::INFINITY;
        // candidates are visited in arclength order, so strict `<` keeps the
        // smaller arclength on ties
        let mut visit = |seg: &Segment| {
            let (t, d2) = seg.foot(p);
            if d2 < best_d2 {
                best_d2 = d2;
                best_s = seg.s0 + t;
            }
        };
        match self.grid.cell_of(p) {
            Some(cands) => cands.iter().for_each(|&k| visit(&self.segments[k as usize])),
            None => self.segments.iter().for_each(visit),
        }
        if best_s >= self.total_length {
            best_s -= self.total_length;
        }
        (best_s, best_d2)
    }

    /// Brute-force nearest point over every segment.
    #[cfg(test)]
    fn nearest_exhaustive(&self, p: Vec2) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        for seg in &self.segments {
            let (t, d2) = seg.foot(p);
            if d2 < best.1 {
                best = (seg.s0 + t, d2);
            }
        }
        if best.0 >= self.total_length {
            best.0 -= self.total_length;
        }
        best
    }

    /// Arclength in `[0, L)` of the centerline point closest to `p`.
    pub fn project(&self, p: Vec2) -> f64 {
        self.nearest(p).0
    }

    pub fn distance_to_centerline(&self, p: Vec2) -> f64 {
        self.nearest(p).1.sqrt()
    }

    /// Centerline point at arclength `s` (wrapped into `[0, L)`).
    pub fn point_at(&self, s: f64) -> Vec2 {
        let seg = self.segment_at(s);
        let s = s.rem_euclid(self.total_length);
        seg.start + seg.dir * (s - seg.s0).clamp(0.0, seg.len)
    }

    /// Heading of the centerline tangent at arclength `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        let seg = self.segment_at(s);
        seg.dir.y.atan2(seg.dir.x)
    }

    /// Unit left normal of the centerline at arclength `s`.
    pub fn normal_at(&self, s: f64) -> Vec2 {
        let seg = self.segment_at(s);
        Vec2::new(-seg.dir.y, seg.dir.x)
    }

    fn segment_at(&self, s: f64) -> &Segment {
        let s = s.rem_euclid(self.total_length);
        let idx = self
            .segments
            .partition_point(|seg| seg.s0 <= s)
            .saturating_sub(1);
        &self.segments[idx]
    }

    /// Lap-counter update from `prev` to the position `next`.
    ///
    /// The counter increments when the projected arclength wraps from the end
    /// of the lap back past zero. A single step must cover less than half a
    /// lap; larger displacements are rejected.
    pub fn update_lap_counter(&self, prev: &CarPose, next: Vec2) -> Result<LapUpdate> {
        let half = 0.5 * self.total_length;
        let jump = (next - prev.position()).norm();
        if jump > half {
            return Err(Error::StepTooLarge {
                jump,
                half_lap: half,
            });
        }
        let before = self.project(prev.position());
        let after = self.project(next);
        Ok(self.lap_rule(before, after, prev.laps))
    }

    /// Lap rule on projected arclengths.
    pub fn lap_rule(&self, before: f64, after: f64, laps: u32) -> LapUpdate {
        let half = 0.5 * self.total_length;
        let drop = before - after;
        if drop > half {
            LapUpdate {
                laps: laps + 1,
                reverse_crossing: false,
            }
        } else {
            LapUpdate {
                laps,
                reverse_crossing: -drop > half,
            }
        }
    }

    /// Cumulative progress `p̄ + c·L`.
    pub fn progress(&self, pose: &CarPose) -> f64 {
        self.project(pose.position()) + pose.laps as f64 * self.total_length
    }

    /// Point membership in the closed track set.
    pub fn in_track(&self, pose: &CarPose) -> bool {
        self.contains_point(pose.position())
    }

    pub fn contains_point(&self, p: Vec2) -> bool {
        self.nearest(p).1 <= self.halfwidth * self.halfwidth
    }

    /// Axis-aligned bounding box of the track surface: `(min, max)`.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.centerline {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let pad = Vec2::new(self.halfwidth, self.halfwidth);
        (lo - pad, hi + pad)
    }

    /// Pose on the centerline at arclength `s`, tangent heading, `laps = 0`.
    pub fn pose_at(&self, s: f64, lateral: f64, mode: ModeId) -> CarPose {
        let p = self.point_at(s) + self.normal_at(s) * lateral;
        CarPose::new(p.x, p.y, self.heading_at(s), mode)
    }

    /// Miniature track analog of roughly 18 m built from straights and arcs:
    /// a long straight, a hairpin, an S-bend and a wide return loop.
    /// The polyline has 488 pieces.
    pub fn miniature(halfwidth: f64) -> Self {
        let mut t = Turtle::new();
        t.straight(5.0);
        t.arc(0.8, PI, 149);
        t.straight(1.5);
        t.arc(0.5, -PI / 2.0, 46);
        t.arc(0.5, PI / 2.0, 46);
        t.straight(3.0);
        t.arc(1.3, PI, 243);
        t.straight(0.5);
        TrackModel::new(t.finish(), halfwidth).expect("miniature track is valid")
    }

    /// Stadium-shaped track: two straights joined by half circles, driven
    /// counter-clockwise starting at the beginning of the lower straight.
    pub fn stadium(straight: f64, radius: f64, halfwidth: f64, arc_pieces: usize) -> Result<Self> {
        if !(straight > 0.0 && radius > 0.0) || arc_pieces == 0 {
            return Err(Error::InvalidTrack("stadium needs positive straight, radius and pieces".into()));
        }
        let mut t = Turtle::new();
        t.straight(straight);
        t.arc(radius, PI, arc_pieces);
        t.straight(straight);
        t.arc(radius, PI, arc_pieces);
        TrackModel::new(t.finish(), halfwidth)
    }
}

/// Builds closed polylines from straights and arcs.
struct Turtle {
    pos: Vec2,
    heading: f64,
    points: Vec<Vec2>,
}

impl Turtle {
    fn new() -> Self {
        Turtle {
            pos: Vec2::zeros(),
            heading: 0.0,
            points: vec![Vec2::zeros()],
        }
    }

    fn straight(&mut self, len: f64) {
        self.pos += Vec2::new(self.heading.cos(), self.heading.sin()) * len;
        self.points.push(self.pos);
    }

    /// Positive `angle` turns left.
    fn arc(&mut self, radius: f64, angle: f64, pieces: usize) {
        let side = angle.signum();
        let normal = Vec2::new(-self.heading.sin(), self.heading.cos()) * side;
        let center = self.pos + normal * radius;
        let start = self.pos - center;
        for k in 1..=pieces {
            let a = angle * k as f64 / pieces as f64;
            let (s, c) = a.sin_cos();
            let r = Vec2::new(c * start.x - s * start.y, s * start.x + c * start.y);
            self.points.push(center + r);
        }
        self.heading += angle;
        self.pos = *self.points.last().unwrap();
    }

    fn finish(mut self) -> Vec<Vec2> {
        // the last point coincides with the origin up to rounding
        if (self.points[self.points.len() - 1] - self.points[0]).norm() < 1e-9 {
            self.points.pop();
        }
        self.points
    }
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn segments_cross(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let d1 = cross(a1 - a0, b0 - a0);
    let d2 = cross(a1 - a0, b1 - a0);
    let d3 = cross(b1 - b0, a0 - b0);
    let d4 = cross(b1 - b0, a1 - b0);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect() -> TrackModel {
        TrackModel::new(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(2.0, 0.0),
                Vec2::new(2.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
            0.2,
        )
        .unwrap()
    }

    #[test]
    fn perpendicular_foot() {
        assert!((rect().project(Vec2::new(0.5, 0.1)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn vertex_projection() {
        let t = TrackModel::new(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.3, 0.0),
                Vec2::new(1.3, 1.0),
                Vec2::new(0.0, 1.0),
            ],
            0.1,
        )
        .unwrap();
        assert!((t.project(Vec2::new(1.3, 0.0)) - 1.3).abs() < 1e-12);
        assert_eq!(t.project(Vec2::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn tie_takes_smaller_arclength() {
        // (1.0, 0.5) is 0.5 from the bottom edge (s=1.0) and from the top
        // edge (s=2+1+1=4.0); the side edges are 1.0 away.
        let s = rect().project(Vec2::new(1.0, 0.5));
        assert_eq!(s, 1.0);
    }

    #[test]
    fn lap_counter_rules() {
        let t = TrackModel::stadium(5.0, 1.0, 0.3, 200).unwrap();
        let l = t.total_length();
        assert_eq!(t.lap_rule(l - 0.1, 0.1, 0).laps, 1);
        assert_eq!(t.lap_rule(5.0, 5.4, 2).laps, 2);
        let rev = t.lap_rule(0.1, l - 0.1, 1);
        assert_eq!(rev.laps, 1);
        assert!(rev.reverse_crossing);
        // a small backward step is not a crossing
        assert_eq!(t.lap_rule(5.0, 4.99, 1).laps, 1);
    }

    #[test]
    fn step_too_large_rejected() {
        let t = rect();
        let prev = CarPose::new(0.0, 0.0, 0.0, 0);
        let err = t.update_lap_counter(&prev, Vec2::new(50.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn progress_formula() {
        let t = TrackModel::miniature(0.2);
        let mut pose = t.pose_at(0.3, 0.0, 0);
        pose.laps = 2;
        let expected = 0.3 + 2.0 * t.total_length();
        assert!((t.progress(&pose) - expected).abs() < 1e-9);
        let origin = t.pose_at(0.0, 0.0, 0);
        assert_eq!(t.progress(&origin), 0.0);
    }

    #[test]
    fn membership_boundary_is_closed() {
        let t = rect();
        assert!(t.in_track(&CarPose::new(1.0, 0.0, 0.0, 0)));
        assert!(t.in_track(&CarPose::new(1.0, -0.2, 0.0, 0)));
        assert!(!t.in_track(&CarPose::new(1.0, -0.2 - 1e-9, 0.0, 0)));
    }

    #[test]
    fn grid_lookup_matches_exhaustive_scan() {
        let t = TrackModel::miniature(0.2);
        let (lo, hi) = t.bounding_box();
        let mut k = 0u64;
        for iy in 0..60 {
            for ix in 0..60 {
                k += 1;
                let jitter = (k.wrapping_mul(2654435761) % 1000) as f64 * 1e-5;
                let p = Vec2::new(
                    lo.x - 1.0 + (hi.x - lo.x + 2.0) * (ix as f64 + jitter) / 60.0,
                    lo.y - 1.0 + (hi.y - lo.y + 2.0) * (iy as f64 + jitter) / 60.0,
                );
                assert_eq!(t.nearest(p), t.nearest_exhaustive(p), "at {p:?}");
            }
        }
    }

    #[test]
    fn miniature_geometry() {
        let t = TrackModel::miniature(0.2);
        assert_eq!(t.num_segments(), 488);
        assert!((t.total_length() - 18.17).abs() < 0.05, "L = {}", t.total_length());
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(TrackModel::new(vec![Vec2::zeros(), Vec2::new(1.0, 0.0)], 0.1).is_err());
        let dup = vec![
            Vec2::zeros(),
            Vec2::zeros(),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
        ];
        assert!(TrackModel::new(dup, 0.1).is_err());
        let bowtie = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(TrackModel::new(bowtie, 0.1).is_err());
        assert!(TrackModel::new(rect().centerline().to_vec(), -1.0).is_err());
    }

    #[test]
    fn csv_round() {
        let csv = "x,y\n0,0\n2,0\n2,1\n0,1\n0,0\n";
        let t = TrackModel::from_csv_reader(csv.as_bytes(), 0.2).unwrap();
        assert_eq!(t.num_segments(), 4);
        assert!((t.total_length() - 6.0).abs() < 1e-12);

        let bad = "x,y\n0,0\n2,zero\n";
        match TrackModel::from_csv_reader(bad.as_bytes(), 0.2) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
