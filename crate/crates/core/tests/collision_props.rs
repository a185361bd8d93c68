mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use racegame::collision::{broad_phase_clear, pair_collides, signed_distance, OrientedBox};
use racegame::track::Vec2;

use common::rectangles_overlap;

fn boxes() -> impl Strategy<Value = OrientedBox> {
    (-0.3f64..0.3, -0.3f64..0.3, -PI..PI, 0.02f64..0.3, 0.02f64..0.3)
        .prop_map(|(x, y, phi, l, w)| OrientedBox::new(Vec2::new(x, y), phi, l, w))
}

fn moved(b: &OrientedBox, theta: f64, shift: Vec2) -> OrientedBox {
    let (s, c) = theta.sin_cos();
    let p = b.center;
    let center = Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y) + shift;
    OrientedBox::new(center, b.heading + theta, b.length, b.width)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn signed_distance_is_symmetric(a in boxes(), b in boxes()) {
        prop_assert!((signed_distance(&a, &b) - signed_distance(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn signed_distance_is_rigid_invariant(
        a in boxes(),
        b in boxes(),
        theta in -PI..PI,
        dx in -10.0f64..10.0,
        dy in -10.0f64..10.0,
    ) {
        let shift = Vec2::new(dx, dy);
        let d = signed_distance(&a, &b);
        let dm = signed_distance(&moved(&a, theta, shift), &moved(&b, theta, shift));
        prop_assert!((d - dm).abs() < 1e-9, "{d} vs {dm}");
    }

    #[test]
    fn collision_iff_negative_distance(a in boxes(), b in boxes()) {
        prop_assert_eq!(pair_collides(&a, &b), signed_distance(&a, &b) < 0.0);
    }
}

#[test]
fn broad_phase_never_clears_an_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut cleared = 0;
    for _ in 0..100_000 {
        let mut draw = || {
            OrientedBox::new(
                Vec2::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)),
                rng.gen_range(-PI..PI),
                rng.gen_range(0.02..0.3),
                rng.gen_range(0.02..0.3),
            )
        };
        let (a, b) = (draw(), draw());
        if broad_phase_clear(&a, &b) {
            cleared += 1;
            assert!(!rectangles_overlap(&a, &b), "{a:?} {b:?}");
            assert!(signed_distance(&a, &b) > 0.0);
        }
    }
    assert!(cleared > 10_000, "broad phase exercised on {cleared} pairs only");
}
