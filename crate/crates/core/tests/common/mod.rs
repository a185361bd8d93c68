//! Independent oracles shared by the integration suites. Nothing here calls
//! the solver or the separating-axis code it checks.
#![allow(dead_code)]

use std::f64::consts::PI;

use ndarray::Array2;
use racegame::collision::OrientedBox;
use racegame::solver::StrategyPair;
use racegame::track::Vec2;

/// Pure Nash equilibria straight from the definition: no unilateral
/// deviation of either player pays strictly more.
pub fn brute_nash(a: &Array2<f64>, b: &Array2<f64>) -> Vec<StrategyPair> {
    let (n, m) = a.dim();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..m {
            let p1_stays = (0..n).all(|k| a[(k, j)] <= a[(i, j)]);
            let p2_stays = (0..m).all(|l| b[(i, l)] <= b[(i, j)]);
            if p1_stays && p2_stays {
                out.push(StrategyPair::new(i, j));
            }
        }
    }
    out
}

/// Stackelberg pairs straight from the definition, with the follower's
/// ties resolved against the leader.
pub fn brute_stackelberg(a: &Array2<f64>, b: &Array2<f64>) -> (Vec<StrategyPair>, f64) {
    let (n, m) = a.dim();
    let reply = |i: usize| -> Vec<usize> {
        (0..m).filter(|&j| (0..m).all(|l| b[(i, l)] <= b[(i, j)])).collect()
    };
    let worst = |i: usize| reply(i).iter().map(|&j| a[(i, j)]).fold(f64::INFINITY, f64::min);
    let value = (0..n).map(worst).fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    for i in 0..n {
        if worst(i) == value {
            out.extend(reply(i).into_iter().map(|j| StrategyPair::new(i, j)));
        }
    }
    (out, value)
}

pub fn sorted(mut v: Vec<StrategyPair>) -> Vec<StrategyPair> {
    v.sort();
    v
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Proper crossing of two segments (shared endpoints and touching do not count).
fn segments_cross(p: Vec2, q: Vec2, r: Vec2, s: Vec2) -> bool {
    let d1 = cross(q - p, r - p);
    let d2 = cross(q - p, s - p);
    let d3 = cross(s - r, p - r);
    let d4 = cross(s - r, q - r);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Strictly inside a counter-clockwise convex polygon.
fn strictly_inside(p: Vec2, poly: &[Vec2; 4]) -> bool {
    (0..4).all(|k| cross(poly[(k + 1) % 4] - poly[k], p - poly[k]) > 0.0)
}

/// Interior overlap of two rectangles from edge crossings and containment.
pub fn rectangles_overlap(a: &OrientedBox, b: &OrientedBox) -> bool {
    let (ca, cb) = (a.corners(), b.corners());
    if ca.iter().any(|&p| strictly_inside(p, &cb)) || cb.iter().any(|&p| strictly_inside(p, &ca)) {
        return true;
    }
    if strictly_inside(a.center, &cb) || strictly_inside(b.center, &ca) {
        return true;
    }
    (0..4).any(|k| (0..4).any(|l| segments_cross(ca[k], ca[(k + 1) % 4], cb[l], cb[(l + 1) % 4])))
}

/// Gap between the two shapes along `u`: positive when a translation-free
/// separating line with normal `u` exists.
fn gap_along(a: &[Vec2; 4], b: &[Vec2; 4], u: Vec2) -> f64 {
    let (amin, amax) = extent(a, u);
    let (bmin, bmax) = extent(b, u);
    (bmin - amax).max(amin - bmax)
}

fn extent(p: &[Vec2; 4], u: Vec2) -> (f64, f64) {
    p.iter()
        .map(|c| c.dot(&u))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Signed distance by searching all translation directions: the largest gap
/// over directions is the separation of disjoint convex shapes and minus the
/// smallest escaping translation of overlapping ones. Dense sampling of the
/// half circle followed by golden-section refinement around the best sample.
pub fn translation_search_sd(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let (ca, cb) = (a.corners(), b.corners());
    let g = |t: f64| gap_along(&ca, &cb, Vec2::new(t.cos(), t.sin()));
    const SAMPLES: usize = 3600;
    let step = PI / SAMPLES as f64;
    let best = (0..SAMPLES)
        .map(|k| k as f64 * step)
        .max_by(|x, y| g(*x).total_cmp(&g(*y)))
        .unwrap();
    let (mut lo, mut hi) = (best - step, best + step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let m1 = hi - r * (hi - lo);
        let m2 = lo + r * (hi - lo);
        if g(m1) < g(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    g(best).max(g(0.5 * (lo + hi)))
}
