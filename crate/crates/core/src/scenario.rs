//! Seeded random game instances: short trajectory sets for two nearby cars
//! on a random stadium track, and purely combinatorial pair tables.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::collision::Footprint;
use crate::game::{classify_pairs, GameInputs, GameKind, GameParams, PairStatus, SlackTable};
use crate::motion::{enumerate_trajectories, Player, PrimitiveLibrary, Trajectory};
use crate::track::TrackModel;

/// One game instance with everything needed to build all payoff variants.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub track: TrackModel,
    pub inputs: GameInputs,
    pub slack: SlackTable,
    pub params: GameParams,
    pub t1: Vec<Trajectory>,
    pub t2: Vec<Trajectory>,
}

#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub min_trajectories: usize,
    pub max_trajectories: usize,
    pub horizon: usize,
    /// Upper bound of the centerline gap between the two cars.
    pub max_gap_m: f64,
    pub max_w: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            min_trajectories: 3,
            max_trajectories: 8,
            horizon: 3,
            max_gap_m: 0.25,
            max_w: 0.3,
        }
    }
}

/// Random geometric scenario. P1 starts ahead of (or level with) P2; both
/// cars pick a random subset of their enumerated trajectories.
pub fn random_geometric(seed: u64, spec: &ScenarioSpec, library: &PrimitiveLibrary) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let track = TrackModel::stadium(
        rng.gen_range(2.0..4.0),
        rng.gen_range(0.6..1.2),
        rng.gen_range(0.12..0.3),
        48,
    )
    .expect("stadium parameters are valid");
    let hw = track.halfwidth();
    let s2 = rng.gen_range(0.5..0.5 * track.total_length());
    let s1 = s2 + rng.gen_range(0.0..spec.max_gap_m);
    let speed_mode = |rng: &mut ChaCha8Rng| {
        let speed = library.primitives()[rng.gen_range(0..library.len())].speed;
        library.closest_mode(speed, 0.0)
    };
    let m1 = speed_mode(&mut rng);
    let m2 = speed_mode(&mut rng);
    let mut start1 = track.pose_at(s1, rng.gen_range(-0.6..0.6) * hw, m1);
    let mut start2 = track.pose_at(s2, rng.gen_range(-0.6..0.6) * hw, m2);
    // lateral offsets on a bend can reorder the projected positions
    if track.progress(&start1) < track.progress(&start2) {
        std::mem::swap(&mut start1, &mut start2);
    }

    let pick = |start, owner, rng: &mut ChaCha8Rng| {
        let all = enumerate_trajectories(&start, library, spec.horizon, &track, None, owner);
        let want = rng.gen_range(spec.min_trajectories..=spec.max_trajectories).min(all.len());
        let mut idx = sample(rng, all.len(), want).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|k| all[k].clone()).collect::<Vec<_>>()
    };
    let t1 = pick(start1, Player::P1, &mut rng);
    let t2 = pick(start2, Player::P2, &mut rng);
    let w = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..spec.max_w) };
    let classification =
        classify_pairs(&t1, &t2, &track, &Footprint::default(), true).expect("trajectories share a horizon");
    Scenario {
        seed,
        track,
        inputs: classification.inputs,
        slack: classification.slack,
        params: GameParams::new(GameKind::Blocking).with_w(w),
        t1,
        t2,
    }
}

/// Random pair table with coarsely quantized progress, so that equal
/// progress values and payoff ties are frequent.
pub fn random_combinatorial(seed: u64, n: usize, m: usize) -> (GameInputs, GameParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let off1: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.2)).collect();
    let off2: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.2)).collect();
    let collision_rate = rng.gen_range(0.0..0.7);
    let status = Array2::from_shape_fn((n, m), |(i, j)| PairStatus {
        p1_off_track: off1[i],
        p2_off_track: off2[j],
        collision: rng.gen_bool(collision_rate),
    });
    let level = |rng: &mut ChaCha8Rng| 1.0 + 0.05 * rng.gen_range(0..6) as f64;
    let progress1 = (0..n).map(|_| level(&mut rng)).collect();
    let progress2 = (0..m).map(|_| level(&mut rng)).collect();
    let w = 0.05 * rng.gen_range(0..6) as f64;
    (
        GameInputs {
            status,
            progress1,
            progress2,
        },
        GameParams::new(GameKind::Blocking).with_w(w),
    )
}
