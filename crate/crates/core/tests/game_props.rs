use ndarray::Array2;
use proptest::prelude::*;
use racegame::game::{build_payoffs, read_matrices_csv, write_matrices_csv, GameInputs, GameKind, GameParams, PairStatus};
use racegame::solver::solve_report;

fn inputs() -> impl Strategy<Value = GameInputs> {
    (1usize..7, 1usize..7).prop_flat_map(|(n, m)| {
        (
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(any::<bool>(), m),
            proptest::collection::vec(0u8..3, n * m),
            proptest::collection::vec(0u8..8, n),
            proptest::collection::vec(0u8..8, m),
        )
            .prop_map(move |(off1, off2, col, p1, p2)| {
                // progress on a coarse lattice so that ties occur
                // off-track depends on one trajectory only
                let status = Array2::from_shape_fn((n, m), |(i, j)| PairStatus {
                    p1_off_track: off1[i],
                    p2_off_track: off2[j],
                    collision: col[i * m + j] == 0,
                });
                let level = |k: &u8| 0.5 + 0.25 * *k as f64;
                GameInputs::new(status, p1.iter().map(level).collect(), p2.iter().map(level).collect()).unwrap()
            })
    })
}

fn params(kind: GameKind, w: f64) -> GameParams {
    GameParams::new(kind).with_w(w)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    /// On pairs where both cars stay on the track, one player gets lambda
    /// exactly when the other does.
    fn cooperative_lambda_is_symmetric_on_track(inp in inputs()) {
        let pm = build_payoffs(&inp, &params(GameKind::Cooperative, 0.0)).unwrap();
        for ((i, j), st) in inp.status.indexed_iter() {
            if !st.p1_off_track && !st.p2_off_track {
                prop_assert_eq!(pm.a[(i, j)] == -1.0, pm.b[(i, j)] == -1.0);
                prop_assert_eq!(pm.a[(i, j)] == -1.0, st.collision);
            }
        }
    }

    #[test]
    fn sequential_leader_ignores_the_follower(inp in inputs()) {
        let seq = build_payoffs(&inp, &params(GameKind::Sequential, 0.0)).unwrap();
        let coop = build_payoffs(&inp, &params(GameKind::Cooperative, 0.0)).unwrap();
        let (n, m) = inp.dim();
        for i in 0..n {
            for j in 0..m {
                prop_assert_eq!(seq.a[(i, j)], seq.a[(i, 0)]);
            }
        }
        prop_assert_eq!(seq.b, coop.b);
    }

    #[test]
    fn feasible_entries_are_progress(inp in inputs(), w in 0.0f64..1.0) {
        for kind in [GameKind::Sequential, GameKind::Cooperative, GameKind::Blocking] {
            let pm = build_payoffs(&inp, &params(kind, w)).unwrap();
            for ((i, j), st) in inp.status.indexed_iter() {
                let (p1, p2) = (inp.progress1[i], inp.progress2[j]);
                if st.p1_off_track {
                    prop_assert_eq!(pm.a[(i, j)], -10.0);
                }
                if st.p2_off_track {
                    prop_assert_eq!(pm.b[(i, j)], -10.0);
                }
                if !st.is_feasible() {
                    continue;
                }
                let (bonus1, bonus2) = match kind {
                    GameKind::Blocking if p1 >= p2 => (w, 0.0),
                    GameKind::Blocking => (0.0, w),
                    _ => (0.0, 0.0),
                };
                prop_assert_eq!(pm.a[(i, j)], p1 + bonus1);
                prop_assert_eq!(pm.b[(i, j)], p2 + bonus2);
            }
        }
    }

    #[test]
    fn blocking_reward_goes_to_exactly_one_player(inp in inputs(), w in 0.01f64..1.0) {
        let blk = build_payoffs(&inp, &params(GameKind::Blocking, w)).unwrap();
        let coop = build_payoffs(&inp, &params(GameKind::Cooperative, 0.0)).unwrap();
        for ((i, j), st) in inp.status.indexed_iter() {
            if st.is_feasible() {
                let da = blk.a[(i, j)] - coop.a[(i, j)];
                let db = blk.b[(i, j)] - coop.b[(i, j)];
                let near = |x: f64, y: f64| (x - y).abs() < 1e-12;
                prop_assert!((near(da, w) && db == 0.0) || (da == 0.0 && near(db, w)), "{da} {db}");
            }
        }
    }

    #[test]
    fn matrix_csv_round_trip_preserves_the_solution(inp in inputs(), w in 0.0f64..1.0) {
        let pm = build_payoffs(&inp, &params(GameKind::Blocking, w)).unwrap();
        let mut buf = Vec::new();
        write_matrices_csv(&pm.a, &pm.b, Some(&pm.status), &mut buf).unwrap();
        let back = read_matrices_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(&back.a, &pm.a);
        prop_assert_eq!(&back.b, &pm.b);
        prop_assert_eq!(back.status.as_ref(), Some(&pm.status));
        prop_assert_eq!(
            solve_report(&back.a, &back.b, back.status.as_ref()),
            solve_report(&pm.a, &pm.b, Some(&pm.status))
        );
    }
}
