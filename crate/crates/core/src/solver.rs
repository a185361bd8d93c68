//! Exact pure-strategy equilibria of bimatrix games.
//!
//! Payoffs are compared with exact equality: entries are constructed from
//! progress values and sentinels, never measured.

use std::cell::Cell;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::{
    build_payoffs, check_assumption_feasible_pair, check_assumption_seq, sequential_rows, GameInputs, GameKind,
    GameParams, PairStatus,
};

/// Zero-based strategy indices of P1 (row) and P2 (column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StrategyPair {
    pub i: usize,
    pub j: usize,
}

impl StrategyPair {
    pub fn new(i: usize, j: usize) -> Self {
        StrategyPair { i, j }
    }
}

impl fmt::Display for StrategyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

/// Read access to one payoff matrix, possibly computed on demand.
pub trait PayoffSource {
    fn dim(&self) -> (usize, usize);
    fn get(&self, i: usize, j: usize) -> f64;
}

impl PayoffSource for Array2<f64> {
    fn dim(&self) -> (usize, usize) {
        Array2::dim(self)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self[(i, j)]
    }
}

/// Payoffs produced by a closure, so entries that are never read are never
/// computed.
pub struct LazySource<F> {
    dim: (usize, usize),
    f: F,
}

impl<F: Fn(usize, usize) -> f64> LazySource<F> {
    pub fn new(n: usize, m: usize, f: F) -> Self {
        LazySource { dim: (n, m), f }
    }
}

impl<F: Fn(usize, usize) -> f64> PayoffSource for LazySource<F> {
    fn dim(&self) -> (usize, usize) {
        self.dim
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        (self.f)(i, j)
    }
}

/// Counts every read of the wrapped source.
pub struct CountingSource<'a, S: ?Sized> {
    inner: &'a S,
    reads: Cell<u64>,
}

impl<'a, S: PayoffSource + ?Sized> CountingSource<'a, S> {
    pub fn new(inner: &'a S) -> Self {
        CountingSource {
            inner,
            reads: Cell::new(0),
        }
    }

    pub fn reads(&self) -> u64 {
        self.reads.get()
    }
}

impl<S: PayoffSource + ?Sized> PayoffSource for CountingSource<'_, S> {
    fn dim(&self) -> (usize, usize) {
        self.inner.dim()
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.reads.set(self.reads.get() + 1);
        self.inner.get(i, j)
    }
}

/// Follower best replies `R(i)` to row `i`.
pub fn best_replies<B: PayoffSource + ?Sized>(b: &B, i: usize) -> Vec<usize> {
    let m = b.dim().1;
    let row: Vec<f64> = (0..m).map(|j| b.get(i, j)).collect();
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..m).filter(|&j| row[j] == best).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StackelbergOutcome {
    /// All optimal pairs in lexicographic order.
    pub pairs: Vec<StrategyPair>,
    /// Leader's pessimistic value: the min over follower ties, maximized.
    pub value: f64,
}

/// Leader maximizes the worst payoff over the follower's best replies.
pub fn stackelberg_with<A, B>(a: &A, b: &B) -> StackelbergOutcome
where
    A: PayoffSource + ?Sized,
    B: PayoffSource + ?Sized,
{
    let n = a.dim().0;
    let mut replies = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let r = best_replies(b, i);
        let v = r.iter().map(|&j| a.get(i, j)).fold(f64::INFINITY, f64::min);
        replies.push(r);
        values.push(v);
    }
    let value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pairs = (0..n)
        .filter(|&i| values[i] == value)
        .flat_map(|i| replies[i].iter().map(move |&j| StrategyPair::new(i, j)))
        .collect();
    StackelbergOutcome { pairs, value }
}

pub fn stackelberg(a: &Array2<f64>, b: &Array2<f64>) -> Vec<StrategyPair> {
    stackelberg_with(a, b).pairs
}

/// All pure Nash equilibria, via column maxima of A and row maxima of B.
pub fn nash_pure(a: &Array2<f64>, b: &Array2<f64>) -> Vec<StrategyPair> {
    let (n, m) = a.dim();
    let col_max: Vec<f64> = (0..m)
        .map(|j| a.column(j).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let row_max: Vec<f64> = (0..n)
        .map(|i| b.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if a[(i, j)] == col_max[j] && b[(i, j)] == row_max[i] {
                out.push(StrategyPair::new(i, j));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Betterness {
    Better,
    Worse,
    Equal,
    Incomparable,
}

/// Compares `p` against `q` by both players' payoffs.
pub fn better(p: StrategyPair, q: StrategyPair, a: &Array2<f64>, b: &Array2<f64>) -> Betterness {
    let (ap, bp) = (a[(p.i, p.j)], b[(p.i, p.j)]);
    let (aq, bq) = (a[(q.i, q.j)], b[(q.i, q.j)]);
    if ap == aq && bp == bq {
        Betterness::Equal
    } else if ap >= aq && bp >= bq {
        Betterness::Better
    } else if ap <= aq && bp <= bq {
        Betterness::Worse
    } else {
        Betterness::Incomparable
    }
}

/// Nash equilibria with the largest leader payoff, in lexicographic order.
pub fn rules_of_the_road(nash: &[StrategyPair], a: &Array2<f64>) -> Vec<StrategyPair> {
    let best = nash.iter().map(|p| a[(p.i, p.j)]).fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<_> = nash.iter().copied().filter(|p| a[(p.i, p.j)] == best).collect();
    out.sort();
    out
}

/// Deterministic pick among equally ranked pairs.
pub fn select_lexicographic(pairs: &[StrategyPair]) -> Option<StrategyPair> {
    pairs.iter().min().copied()
}

/// Leader maximizes its row payoff; the follower best-responds to the chosen
/// rows only. Follower payoffs of other rows are never read.
pub fn sequential_maximization<B: PayoffSource + ?Sized>(a_rows: &[f64], b: &B) -> Vec<StrategyPair> {
    let best = a_rows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..a_rows.len())
        .filter(|&i| a_rows[i] == best)
        .flat_map(|i| best_replies(b, i).into_iter().map(move |j| StrategyPair::new(i, j)))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BlockingAnalysis {
    /// Every pair satisfying all four blocking conditions.
    pub pairs: Vec<StrategyPair>,
    /// Blocking pairs with the largest leader progress.
    pub best: Vec<StrategyPair>,
}

impl BlockingAnalysis {
    pub fn best_pair(&self) -> Option<StrategyPair> {
        select_lexicographic(&self.best)
    }
}

/// Blocking pairs relative to a cooperative Stackelberg pair `cg`: the leader
/// is overtaken at `cg`, but a feasible pair keeps it ahead while every
/// follower trajectory with more progress is worth at most `lambda` to the
/// follower in the cooperative game.
pub fn find_blocking_pairs(inputs: &GameInputs, cg: StrategyPair, b_coop: &Array2<f64>, lambda: f64) -> BlockingAnalysis {
    let (p1, p2) = (&inputs.progress1, &inputs.progress2);
    if !(p1[cg.i] < p2[cg.j]) {
        return BlockingAnalysis::default();
    }
    let (n, m) = inputs.dim();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if p1[i] > p2[j]
                && inputs.status[(i, j)].is_feasible()
                && (0..m).all(|jc| !(p2[jc] > p2[j]) || b_coop[(i, jc)] <= lambda)
            {
                pairs.push(StrategyPair::new(i, j));
            }
        }
    }
    let top = pairs.iter().map(|p| p1[p.i]).fold(f64::NEG_INFINITY, f64::max);
    let best = pairs.iter().copied().filter(|p| p1[p.i] == top).collect();
    BlockingAnalysis { pairs, best }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clause {
    pub name: &'static str,
    pub holds: bool,
    /// True when the clause was checked against at least one instance
    /// rather than holding trivially.
    pub exercised: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub assumption_feasible_pair: bool,
    pub assumption_seq: bool,
    pub clauses: Vec<Clause>,
}

impl TheoremReport {
    pub fn violations(&self) -> Vec<&Clause> {
        self.clauses.iter().filter(|c| !c.holds).collect()
    }
}

#[derive(Default)]
struct ClauseBuilder {
    clauses: Vec<Clause>,
}

impl ClauseBuilder {
    fn push(&mut self, name: &'static str, exercised: bool, failure: Option<String>) {
        self.clauses.push(Clause {
            name,
            holds: failure.is_none(),
            exercised,
            witness: failure,
        });
    }
}

fn missing(pairs: &[StrategyPair], set: &[StrategyPair]) -> Option<String> {
    let out: Vec<String> = pairs.iter().filter(|p| !set.contains(p)).map(|p| p.to_string()).collect();
    (!out.is_empty()).then(|| format!("not in set: {}", out.join(" ")))
}

fn same_set(x: &[StrategyPair], y: &[StrategyPair]) -> Option<String> {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort();
    ys.sort();
    (xs != ys).then(|| format!("{xs:?} != {ys:?}"))
}

/// Checks every equilibrium relation between the sequential, cooperative and
/// blocking games built from `inputs`, with `params.w` as blocking reward.
/// Clauses whose assumption fails are omitted.
pub fn verify_theorems(inputs: &GameInputs, params: &GameParams) -> Result<TheoremReport> {
    let seq = build_payoffs(inputs, &params.with_kind(GameKind::Sequential))?;
    let coop = build_payoffs(inputs, &params.with_kind(GameKind::Cooperative))?;
    let blk = build_payoffs(inputs, &params.with_kind(GameKind::Blocking))?;
    let feasible = |p: &StrategyPair| inputs.status[(p.i, p.j)].is_feasible();

    let assumption_a = check_assumption_feasible_pair(&inputs.status);
    let assumption_b = check_assumption_seq(&seq.a, &seq.b, params);
    let mut cb = ClauseBuilder::default();

    let st = stackelberg(&coop.a, &coop.b);
    let nash = nash_pure(&coop.a, &coop.b);

    if assumption_a {
        let bad: Vec<_> = st.iter().filter(|p| !feasible(p)).collect();
        cb.push(
            "1a.stackelberg_feasible",
            !st.is_empty(),
            (!bad.is_empty()).then(|| format!("infeasible Stackelberg {bad:?}")),
        );
        let (good, poor): (Vec<_>, Vec<_>) = nash.iter().copied().partition(|p| feasible(p));
        cb.push("1a.feasible_nash_exists", true, good.is_empty().then(|| "no feasible Nash".into()));
        let mut fail = None;
        for f in &good {
            for g in &poor {
                if better(*f, *g, &coop.a, &coop.b) != Betterness::Better {
                    fail = Some(format!("{f} not better than {g}"));
                }
            }
        }
        cb.push("1a.feasible_nash_better", !good.is_empty() && !poor.is_empty(), fail);
    }

    if assumption_b {
        let pi_s = sequential_maximization(&sequential_rows(&seq.a), &seq.b);
        let ror = rules_of_the_road(&nash, &coop.a);
        cb.push("1b.sequential_nonempty", true, pi_s.is_empty().then(|| "empty".into()));
        cb.push("1b.sequential_eq_stackelberg", true, same_set(&pi_s, &st));
        cb.push("1b.stackelberg_eq_ror", true, same_set(&st, &ror));
        cb.push("1b.ror_subset_nash", true, missing(&ror, &nash));
    }

    if assumption_a {
        let blk_st = stackelberg(&blk.a, &blk.b);
        let blk_nash = nash_pure(&blk.a, &blk.b);
        let (p1, p2) = (&inputs.progress1, &inputs.progress2);
        let mut ahead = (false, None);
        let mut unblocked = (false, None);
        let mut switch = (false, None);
        let mut below = (false, None);
        let mut coop_nash_blocking = (false, None);
        for &cg in &st {
            let blocking = find_blocking_pairs(inputs, cg, &coop.b, params.lambda);
            if p1[cg.i] > p2[cg.j] {
                ahead.0 = true;
                ahead.1 = ahead.1.or(missing(&[cg], &blk_st));
            } else if blocking.pairs.is_empty() {
                unblocked.0 = true;
                unblocked.1 = unblocked.1.or(missing(&[cg], &blk_st));
            } else {
                let ib = blocking.best[0].i;
                if p1[cg.i] <= p1[ib] + params.w {
                    switch.0 = true;
                    switch.1 = switch.1.or(missing(&blocking.best, &blk_st));
                } else {
                    below.0 = true;
                    below.1 = below.1.or(missing(&[cg], &blk_st));
                }
            }
            let coop_nash_blocks: Vec<_> = blocking.pairs.iter().copied().filter(|p| nash.contains(p)).collect();
            if !coop_nash_blocks.is_empty() {
                coop_nash_blocking.0 = true;
                coop_nash_blocking.1 = coop_nash_blocking.1.or(missing(&coop_nash_blocks, &blk_nash));
            }
        }
        cb.push("2a.leader_ahead", ahead.0, ahead.1);
        cb.push("2a.no_blocking_pair", unblocked.0, unblocked.1);
        cb.push("2a.blocking_switch", switch.0, switch.1);
        cb.push("2a.below_switch", below.0, below.1);
        cb.push("2b.cooperative_stackelberg_is_blocking_nash", !st.is_empty(), missing(&st, &blk_nash));
        cb.push("2b.blocking_nash_carries_over", coop_nash_blocking.0, coop_nash_blocking.1);
    }

    Ok(TheoremReport {
        assumption_feasible_pair: assumption_a,
        assumption_seq: assumption_b,
        clauses: cb.clauses,
    })
}

/// One listed pair with its payoffs and, when known, its constraint status.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub pair: StrategyPair,
    pub a: f64,
    pub b: f64,
    pub feasible: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashComparison {
    pub p: StrategyPair,
    pub q: StrategyPair,
    pub verdict: Betterness,
}

/// Every equilibrium set of one bimatrix game.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub n: usize,
    pub m: usize,
    pub stackelberg: Vec<PairReport>,
    /// Leader's pessimistic Stackelberg value.
    pub stackelberg_value: f64,
    /// Pair the leader announces, with the payoffs it actually realizes.
    pub stackelberg_announced: Option<PairReport>,
    pub nash: Vec<PairReport>,
    pub nash_ror: Vec<PairReport>,
    pub ror_selected: Option<StrategyPair>,
    /// Present when A is row-constant.
    pub sequential: Option<Vec<PairReport>>,
    pub nash_betterness: Vec<NashComparison>,
}

/// Solves one game for every concept.
pub fn solve_report(a: &Array2<f64>, b: &Array2<f64>, status: Option<&Array2<PairStatus>>) -> EquilibriumReport {
    let (n, m) = a.dim();
    let describe = |p: StrategyPair| PairReport {
        pair: p,
        a: a[(p.i, p.j)],
        b: b[(p.i, p.j)],
        feasible: status.map(|s| s[(p.i, p.j)].is_feasible()),
    };
    let st = stackelberg_with(a, b);
    let nash = nash_pure(a, b);
    let ror = rules_of_the_road(&nash, a);
    let row_constant = a.rows().into_iter().all(|r| r.iter().all(|&v| v == r[0]));
    let sequential = row_constant.then(|| {
        sequential_maximization(&sequential_rows(a), b)
            .into_iter()
            .map(describe)
            .collect()
    });
    let mut nash_betterness = Vec::new();
    for (k, &p) in nash.iter().enumerate() {
        for &q in &nash[k + 1..] {
            nash_betterness.push(NashComparison {
                p,
                q,
                verdict: better(p, q, a, b),
            });
        }
    }
    EquilibriumReport {
        n,
        m,
        stackelberg_announced: select_lexicographic(&st.pairs).map(describe),
        stackelberg: st.pairs.iter().copied().map(describe).collect(),
        stackelberg_value: st.value,
        ror_selected: select_lexicographic(&ror),
        nash: nash.into_iter().map(describe).collect(),
        nash_ror: ror.into_iter().map(describe).collect(),
        sequential,
        nash_betterness,
    }
}
