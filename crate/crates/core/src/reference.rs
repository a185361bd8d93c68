//! Small hand-built games with known equilibria. Indices are zero-based:
//! trajectory `k` of a player is row (or column) `k`.

use ndarray::{array, Array2};

use crate::game::{GameInputs, PairStatus};

const KAPPA: f64 = -10.0;
const LAMBDA: f64 = -1.0;

fn status_table(n: usize, m: usize, off1: &[usize], off2: &[usize], collisions: &[(usize, usize)]) -> Array2<PairStatus> {
    Array2::from_shape_fn((n, m), |(i, j)| PairStatus {
        p1_off_track: off1.contains(&i),
        p2_off_track: off2.contains(&j),
        collision: collisions.contains(&(i, j)),
    })
}

/// Three trajectories per car. The third of each leaves the track and the
/// two middle trajectories collide.
pub fn three_by_three_inputs() -> GameInputs {
    GameInputs {
        status: status_table(3, 3, &[2], &[2], &[(1, 1)]),
        progress1: vec![0.83, 0.88, 0.9],
        progress2: vec![0.81, 0.86, 0.9],
    }
}

/// Four trajectories per car; the fourth of each leaves the track.
pub fn four_by_four_inputs() -> GameInputs {
    GameInputs {
        status: status_table(4, 4, &[3], &[3], &[(0, 1), (1, 1), (1, 2), (2, 2)]),
        progress1: vec![0.83, 0.85, 0.88, 0.7],
        progress2: vec![0.81, 0.9, 0.86, 0.75],
    }
}

pub fn sequential_matrices() -> (Array2<f64>, Array2<f64>) {
    let a = array![[0.83, 0.83, 0.83], [0.88, 0.88, 0.88], [KAPPA, KAPPA, KAPPA]];
    (a, follower_three_by_three())
}

pub fn cooperative_matrices() -> (Array2<f64>, Array2<f64>) {
    let a = array![[0.83, 0.83, 0.83], [0.88, LAMBDA, 0.88], [KAPPA, KAPPA, KAPPA]];
    (a, follower_three_by_three())
}

fn follower_three_by_three() -> Array2<f64> {
    array![[0.81, 0.86, KAPPA], [0.81, LAMBDA, KAPPA], [0.81, 0.86, KAPPA]]
}

/// Blocking game with reward 0.5.
pub fn blocking_matrices() -> (Array2<f64>, Array2<f64>) {
    blocking_matrices_with(0.5)
}

/// Blocking game on the four-by-four inputs as a function of the reward.
pub fn blocking_matrices_with(w: f64) -> (Array2<f64>, Array2<f64>) {
    let a = array![
        [0.83 + w, LAMBDA, 0.83, 0.83 + w],
        [0.85 + w, LAMBDA, LAMBDA, 0.85 + w],
        [0.88 + w, 0.88, LAMBDA, 0.88 + w],
        [KAPPA, KAPPA, KAPPA, KAPPA]
    ];
    let b = array![
        [0.81, LAMBDA, 0.86 + w, KAPPA],
        [0.81, LAMBDA, LAMBDA, KAPPA],
        [0.81, 0.9 + w, LAMBDA, KAPPA],
        [0.81 + w, 0.9 + w, 0.86 + w, KAPPA]
    ];
    (a, b)
}

/// A game with one feasible and one infeasible Nash equilibrium.
pub fn infeasible_nash_matrices() -> (Array2<f64>, Array2<f64>) {
    let a = array![[0.84, LAMBDA, LAMBDA], [0.87, 0.87, LAMBDA], [KAPPA, KAPPA, KAPPA]];
    let b = array![[KAPPA, LAMBDA, LAMBDA], [KAPPA, 0.89, LAMBDA], [KAPPA, 0.81, 0.81]];
    (a, b)
}

/// Constraint status matching [`infeasible_nash_matrices`].
pub fn infeasible_nash_status() -> Array2<PairStatus> {
    status_table(3, 3, &[2], &[0], &[(0, 1), (0, 2), (1, 2)])
}
