mod common;

use ndarray::Array2;
use proptest::prelude::*;
use racegame::game::{build_payoffs, GameInputs, GameKind};
use racegame::scenario::random_combinatorial;
use racegame::solver::{
    nash_pure, rules_of_the_road, sequential_maximization, stackelberg, stackelberg_with, verify_theorems,
    CountingSource,
};

use common::{brute_nash, brute_stackelberg, sorted};

/// Small integer payoffs so that ties are common.
fn bimatrix() -> impl Strategy<Value = (Array2<f64>, Array2<f64>)> {
    (1usize..6, 1usize..6).prop_flat_map(|(n, m)| {
        (
            proptest::collection::vec(-2i8..3, n * m),
            proptest::collection::vec(-2i8..3, n * m),
        )
            .prop_map(move |(a, b)| {
                let to = |v: Vec<i8>| Array2::from_shape_vec((n, m), v.into_iter().map(f64::from).collect()).unwrap();
                (to(a), to(b))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn solver_sets_match_enumeration((a, b) in bimatrix()) {
        let (st, value) = brute_stackelberg(&a, &b);
        let out = stackelberg_with(&a, &b);
        prop_assert_eq!(sorted(out.pairs), sorted(st));
        prop_assert_eq!(out.value, value);
        prop_assert_eq!(sorted(nash_pure(&a, &b)), sorted(brute_nash(&a, &b)));
    }

    #[test]
    fn equilibria_survive_positive_affine_maps((a, b) in bimatrix(), s in 0.1f64..5.0, c in -10.0f64..10.0) {
        let a2 = a.mapv(|v| s * v + c);
        let b2 = b.mapv(|v| 2.0 * v - c);
        prop_assert_eq!(stackelberg(&a2, &b2), stackelberg(&a, &b));
        let nash = nash_pure(&a, &b);
        prop_assert_eq!(&nash_pure(&a2, &b2), &nash);
        prop_assert_eq!(rules_of_the_road(&nash, &a2), rules_of_the_road(&nash, &a));
    }

    #[test]
    fn equilibria_survive_a_common_progress_shift(seed in 0u64..10_000, eighths in 0u32..40) {
        let (n, m) = (2 + (seed % 5) as usize, 2 + (seed / 5 % 5) as usize);
        let (drawn, mut params) = random_combinatorial(seed, n, m);
        // move the 0.05 lattice onto eighths so that every sum below is exact
        let dyadic = |v: f64| (v / 0.05).round() / 8.0;
        params.w = dyadic(params.w);
        let lift = |ps: &[f64], by: f64| ps.iter().map(|&p| 1.0 + dyadic(p - 1.0) + by).collect::<Vec<_>>();
        let shift = f64::from(eighths) / 8.0;
        let inputs = GameInputs::new(drawn.status.clone(), lift(&drawn.progress1, 0.0), lift(&drawn.progress2, 0.0)).unwrap();
        let shifted =
            GameInputs::new(drawn.status.clone(), lift(&drawn.progress1, shift), lift(&drawn.progress2, shift)).unwrap();
        for kind in [GameKind::Sequential, GameKind::Cooperative, GameKind::Blocking] {
            let g = build_payoffs(&inputs, &params.with_kind(kind)).unwrap();
            let h = build_payoffs(&shifted, &params.with_kind(kind)).unwrap();
            prop_assert_eq!(stackelberg(&g.a, &g.b), stackelberg(&h.a, &h.b));
            prop_assert_eq!(nash_pure(&g.a, &g.b), nash_pure(&h.a, &h.b));
        }
    }

    #[test]
    /// Leader and follower levels are separated; ties within a player remain.
    fn theorem_clauses_hold_on_combinatorial_tables(seed in 0u64..1_000_000, n in 1usize..7, m in 1usize..7) {
        let (drawn, params) = random_combinatorial(seed, n, m);
        let inputs = GameInputs::new(
            drawn.status.clone(),
            drawn.progress1.clone(),
            drawn.progress2.iter().map(|p| p + 1e-9).collect(),
        )
        .unwrap();
        let report = verify_theorems(&inputs, &params).unwrap();
        let bad: Vec<_> = report.violations().iter().map(|c| (c.name, c.witness.clone())).collect();
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }

    #[test]
    fn sequential_reads_only_optimal_rows(rows in proptest::collection::vec(0i8..3, 1..8), m in 1usize..8) {
        let n = rows.len();
        let a_rows: Vec<f64> = rows.iter().map(|&v| f64::from(v)).collect();
        let b = Array2::from_shape_fn((n, m), |(i, j)| ((i * 7 + j * 3) % 4) as f64);
        let counted = CountingSource::new(&b);
        let pairs = sequential_maximization(&a_rows, &counted);
        let optimal = a_rows.iter().filter(|&&v| v == 2.0f64.min(a_rows.iter().copied().fold(f64::MIN, f64::max))).count();
        prop_assert_eq!(counted.reads(), (optimal * m) as u64);
        let a = Array2::from_shape_fn((n, m), |(i, _)| a_rows[i]);
        prop_assert_eq!(sorted(pairs), sorted(brute_stackelberg(&a, &b).0));
    }
}

/// The blocking clauses take a leader level with the follower as overtaken,
/// while the blocking payoff gives the leader the reward on a tie. This table
/// ties the leader and follower at the cooperative Stackelberg pair (1,2):
/// the clause fails as drawn and holds once the levels are separated.
#[test]
fn blocking_clause_breaks_only_at_exact_ties() {
    let (inputs, params) = random_combinatorial(415_716, 4, 5);
    let names = |inp: &GameInputs| -> Vec<&'static str> {
        verify_theorems(inp, &params).unwrap().violations().iter().map(|c| c.name).collect()
    };
    assert_eq!(names(&inputs), ["2a.no_blocking_pair"]);
    for eps in [1e-9, -1e-9] {
        let moved = GameInputs::new(
            inputs.status.clone(),
            inputs.progress1.clone(),
            inputs.progress2.iter().map(|p| p + eps).collect(),
        )
        .unwrap();
        assert!(names(&moved).is_empty(), "eps {eps}");
    }
}
