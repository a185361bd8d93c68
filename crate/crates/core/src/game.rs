//! Payoff matrices of the sequential, cooperative and blocking racing games,
//! their soft-constrained variants, and the feasibility assumptions.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::collision::{pair_collides, signed_distance, Footprint, OrientedBox};
use crate::error::{Error, Result};
use crate::motion::{Player, Trajectory};
use crate::track::{TrackModel, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameKind {
    /// Only the follower is penalized for collisions.
    Sequential,
    /// Both players are penalized for collisions.
    Cooperative,
    /// Cooperative payoffs plus a reward `w` for being ahead at the horizon.
    Blocking,
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GameKind::Sequential => "sequential",
            GameKind::Cooperative => "cooperative",
            GameKind::Blocking => "blocking",
        })
    }
}

impl FromStr for GameKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(GameKind::Sequential),
            "cooperative" => Ok(GameKind::Cooperative),
            "blocking" => Ok(GameKind::Blocking),
            other => Err(Error::Config(format!("unknown game kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    /// Payoff for leaving the track.
    pub kappa: f64,
    /// Payoff for a collision.
    pub lambda: f64,
    /// Blocking reward.
    pub w: f64,
    /// Soft-constraint weight on the slack of colliding pairs.
    pub sigma: f64,
    pub kind: GameKind,
}

impl GameParams {
    pub fn new(kind: GameKind) -> Self {
        GameParams {
            kappa: -10.0,
            lambda: -1.0,
            w: if kind == GameKind::Blocking { 100.0 } else { 0.0 },
            sigma: 0.0,
            kind,
        }
    }

    pub fn with_w(mut self, w: f64) -> Self {
        self.w = w;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_kind(mut self, kind: GameKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa <= self.lambda && self.lambda < 0.0) {
            return Err(Error::InvalidParams(format!(
                "need kappa <= lambda < 0, got kappa={} lambda={}",
                self.kappa, self.lambda
            )));
        }
        if !(self.w >= 0.0) {
            return Err(Error::InvalidParams(format!("w must be >= 0, got {}", self.w)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidParams(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Constraint status of one trajectory pair. Every fact is kept so that the
/// per-player payoff case order can be applied independently.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairStatus {
    pub p1_off_track: bool,
    pub p2_off_track: bool,
    pub collision: bool,
}

impl PairStatus {
    pub const FEASIBLE: PairStatus = PairStatus {
        p1_off_track: false,
        p2_off_track: false,
        collision: false,
    };

    pub fn is_feasible(&self) -> bool {
        !self.p1_off_track && !self.p2_off_track && !self.collision
    }
}

impl fmt::Display for PairStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_feasible() {
            return f.write_str("feasible");
        }
        let mut parts = Vec::new();
        if self.p1_off_track {
            parts.push("p1_off_track");
        }
        if self.p2_off_track {
            parts.push("p2_off_track");
        }
        if self.collision {
            parts.push("collision");
        }
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for PairStatus {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut st = PairStatus::FEASIBLE;
        if s == "feasible" {
            return Ok(st);
        }
        for part in s.split('+') {
            match part {
                "p1_off_track" => st.p1_off_track = true,
                "p2_off_track" => st.p2_off_track = true,
                "collision" => st.collision = true,
                other => return Err(format!("unknown status `{other}`")),
            }
        }
        Ok(st)
    }
}

/// Everything the payoff rules need: per-pair constraint status and the
/// terminal progress of each trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInputs {
    pub status: Array2<PairStatus>,
    pub progress1: Vec<f64>,
    pub progress2: Vec<f64>,
}

impl GameInputs {
    pub fn new(status: Array2<PairStatus>, progress1: Vec<f64>, progress2: Vec<f64>) -> Result<Self> {
        let (n, m) = status.dim();
        if progress1.len() != n || progress2.len() != m {
            return Err(Error::Dimension(format!(
                "status is {n}x{m} but progress vectors have {} and {} entries",
                progress1.len(),
                progress2.len()
            )));
        }
        Ok(GameInputs {
            status,
            progress1,
            progress2,
        })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.status.dim()
    }

    pub fn min_progress(&self) -> f64 {
        self.progress1
            .iter()
            .chain(&self.progress2)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sum of penetration depths per pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackTable(pub Array2<f64>);

impl SlackTable {
    pub fn zeros(n: usize, m: usize) -> Self {
        SlackTable(Array2::zeros((n, m)))
    }

    /// Slack of one pair from its per-step signed distances.
    pub fn slack_of(distances: &[f64]) -> f64 {
        distances.iter().map(|d| (-d).max(0.0)).sum()
    }

    /// Smallest strictly positive slack, if any pair collides.
    pub fn min_positive(&self) -> Option<f64> {
        self.0
            .iter()
            .copied()
            .filter(|&s| s > 0.0)
            .min_by(f64::total_cmp)
    }
}

/// Paired payoff matrices with the inputs they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrices {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub status: Array2<PairStatus>,
    pub progress1: Vec<f64>,
    pub progress2: Vec<f64>,
}

impl PayoffMatrices {
    pub fn dim(&self) -> (usize, usize) {
        self.a.dim()
    }
}

/// Per-trajectory track status and terminal progress, plus a pair table.
#[derive(Debug, Clone)]
pub struct Classification {
    pub inputs: GameInputs,
    pub slack: SlackTable,
    /// Number of pairwise box checks performed (broad phase included).
    pub box_checks: u64,
}

/// Any state `k = 1..N` outside the track.
pub fn leaves_track(traj: &Trajectory, track: &TrackModel) -> bool {
    traj.states[1..].iter().any(|s| !track.in_track(s))
}

pub fn terminal_progress(traj: &Trajectory, track: &TrackModel) -> f64 {
    track.progress(traj.terminal())
}

/// Per-trajectory data needed to classify pairs one at a time.
#[derive(Debug)]
pub struct PairGeometry {
    pub off1: Vec<bool>,
    pub off2: Vec<bool>,
    pub progress1: Vec<f64>,
    pub progress2: Vec<f64>,
    boxes1: Vec<Vec<OrientedBox>>,
    boxes2: Vec<Vec<OrientedBox>>,
    /// Disc around the start covering every footprint of a trajectory.
    reach1: Vec<(Vec2, f64)>,
    reach2: Vec<(Vec2, f64)>,
    checks: AtomicU64,
}

/// Outcome of checking one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCheck {
    pub collision: bool,
    /// Sum of per-step penetration depths; zero unless computed exactly.
    pub slack: f64,
    /// Largest per-step penetration depth; zero unless computed exactly.
    pub penetration: f64,
}

impl PairGeometry {
    pub fn new(t1: &[Trajectory], t2: &[Trajectory], track: &TrackModel, footprint: &Footprint) -> Result<Self> {
        let horizon = t1.first().or(t2.first()).map(|t| t.horizon()).unwrap_or(0);
        if let Some(t) = t1.iter().chain(t2).find(|t| t.horizon() != horizon) {
            return Err(Error::HorizonMismatch(horizon, t.horizon()));
        }
        let boxes = |ts: &[Trajectory]| -> Vec<Vec<OrientedBox>> {
            ts.iter().map(|t| t.states[1..].iter().map(|s| footprint.at(s)).collect()).collect()
        };
        let reach = |ts: &[Trajectory]| -> Vec<(Vec2, f64)> {
            ts.iter()
                .map(|t| {
                    let c = t.states[0].position();
                    let r = t.states[1..].iter().map(|s| (s.position() - c).norm()).fold(0.0, f64::max);
                    (c, r + footprint.circumradius())
                })
                .collect()
        };
        Ok(PairGeometry {
            off1: t1.iter().map(|t| leaves_track(t, track)).collect(),
            off2: t2.iter().map(|t| leaves_track(t, track)).collect(),
            progress1: t1.iter().map(|t| terminal_progress(t, track)).collect(),
            progress2: t2.iter().map(|t| terminal_progress(t, track)).collect(),
            boxes1: boxes(t1),
            boxes2: boxes(t2),
            reach1: reach(t1),
            reach2: reach(t2),
            checks: AtomicU64::new(0),
        })
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.boxes1.len(), self.boxes2.len())
    }

    /// Box checks performed so far, broad phase included. Pairs whose
    /// reach discs are disjoint cost none.
    pub fn box_checks(&self) -> u64 {
        self.checks.load(Ordering::Relaxed)
    }

    /// Collision test of pair `(i, j)` at steps `1..=N`. With `exact` every
    /// step's signed distance is computed so slack and penetration are
    /// filled; otherwise the test stops at the first colliding step.
    pub fn check(&self, i: usize, j: usize, exact: bool) -> PairCheck {
        let clear = PairCheck {
            collision: false,
            slack: 0.0,
            penetration: 0.0,
        };
        let ((c1, r1), (c2, r2)) = (self.reach1[i], self.reach2[j]);
        if (c1 - c2).norm() > r1 + r2 {
            return clear;
        }
        let steps = self.boxes1[i].iter().zip(&self.boxes2[j]);
        if exact {
            let d: Vec<f64> = steps.map(|(a, b)| signed_distance(a, b)).collect();
            self.checks.fetch_add(d.len() as u64, Ordering::Relaxed);
            let slack = SlackTable::slack_of(&d);
            PairCheck {
                collision: slack > 0.0,
                slack,
                penetration: d.iter().map(|&x| -x).fold(0.0, f64::max),
            }
        } else {
            for (a, b) in steps {
                self.checks.fetch_add(1, Ordering::Relaxed);
                if pair_collides(a, b) {
                    return PairCheck {
                        collision: true,
                        ..clear
                    };
                }
            }
            clear
        }
    }

    pub fn status(&self, i: usize, j: usize, collision: bool) -> PairStatus {
        PairStatus {
            p1_off_track: self.off1[i],
            p2_off_track: self.off2[j],
            collision,
        }
    }
}

/// Classifies every pair of `t1 × t2`. Off-track status is evaluated per
/// player; collisions are evaluated for every pair regardless, so each
/// player's payoff can apply its own case order.
///
/// With `with_slack` the signed distance is computed at every step so the
/// slack table is filled; otherwise the two-phase boolean test is used.
pub fn classify_pairs(
    t1: &[Trajectory],
    t2: &[Trajectory],
    track: &TrackModel,
    footprint: &Footprint,
    with_slack: bool,
) -> Result<Classification> {
    let geometry = PairGeometry::new(t1, t2, track, footprint)?;
    let (n, m) = geometry.dim();
    let mut status = Array2::from_elem((n, m), PairStatus::FEASIBLE);
    let mut slack = SlackTable::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let c = geometry.check(i, j, with_slack);
            slack.0[(i, j)] = c.slack;
            status[(i, j)] = geometry.status(i, j, c.collision);
        }
    }
    let box_checks = geometry.box_checks();
    Ok(Classification {
        inputs: GameInputs {
            status,
            progress1: geometry.progress1,
            progress2: geometry.progress2,
        },
        slack,
        box_checks,
    })
}

/// Leader payoff of one pair when the collision case is ignored.
pub fn leader_progress_payoff(kind: GameKind, w: f64, p1: f64, p2: f64) -> f64 {
    if kind == GameKind::Blocking && p1 >= p2 {
        p1 + w
    } else {
        p1
    }
}

/// Follower payoff of one pair when the collision case is ignored.
pub fn follower_progress_payoff(kind: GameKind, w: f64, p1: f64, p2: f64) -> f64 {
    if kind == GameKind::Blocking && p1 < p2 {
        p2 + w
    } else {
        p2
    }
}

/// Leader entry with the hard case order: own off-track, collision, progress.
pub fn leader_entry(params: &GameParams, st: PairStatus, p1: f64, p2: f64) -> f64 {
    if st.p1_off_track {
        params.kappa
    } else if st.collision && params.kind != GameKind::Sequential {
        params.lambda
    } else {
        leader_progress_payoff(params.kind, params.w, p1, p2)
    }
}

/// Follower entry with the hard case order: own off-track, collision, progress.
pub fn follower_entry(params: &GameParams, st: PairStatus, p1: f64, p2: f64) -> f64 {
    if st.p2_off_track {
        params.kappa
    } else if st.collision {
        params.lambda
    } else {
        follower_progress_payoff(params.kind, params.w, p1, p2)
    }
}

fn check_domination(inputs: &GameInputs, params: &GameParams) -> Result<()> {
    params.validate()?;
    let min_progress = inputs.min_progress();
    if min_progress.is_finite() && !(params.kappa < min_progress && params.lambda < min_progress) {
        return Err(Error::Domination {
            kappa: params.kappa,
            lambda: params.lambda,
            min_progress,
        });
    }
    Ok(())
}

/// Hard-constrained payoff matrices for `params.kind`.
pub fn build_payoffs(inputs: &GameInputs, params: &GameParams) -> Result<PayoffMatrices> {
    check_domination(inputs, params)?;
    let dim = inputs.dim();
    let a = Array2::from_shape_fn(dim, |(i, j)| {
        leader_entry(params, inputs.status[(i, j)], inputs.progress1[i], inputs.progress2[j])
    });
    let b = Array2::from_shape_fn(dim, |(i, j)| {
        follower_entry(params, inputs.status[(i, j)], inputs.progress1[i], inputs.progress2[j])
    });
    Ok(PayoffMatrices {
        a,
        b,
        status: inputs.status.clone(),
        progress1: inputs.progress1.clone(),
        progress2: inputs.progress2.clone(),
    })
}

/// Soft-constrained matrices: a colliding pair pays the collision-free payoff
/// minus `sigma · slack` to each player; leaving the track stays at `kappa`.
pub fn build_soft_payoffs(inputs: &GameInputs, slack: &SlackTable, params: &GameParams) -> Result<PayoffMatrices> {
    check_domination(inputs, params)?;
    if slack.0.dim() != inputs.dim() {
        return Err(Error::Dimension("slack table does not match the pair table".into()));
    }
    let dim = inputs.dim();
    let a = Array2::from_shape_fn(dim, |(i, j)| {
        let st = inputs.status[(i, j)];
        let (p1, p2) = (inputs.progress1[i], inputs.progress2[j]);
        if st.p1_off_track {
            params.kappa
        } else {
            let base = leader_progress_payoff(params.kind, params.w, p1, p2);
            if st.collision && params.kind != GameKind::Sequential {
                base - params.sigma * slack.0[(i, j)]
            } else {
                base
            }
        }
    });
    let b = Array2::from_shape_fn(dim, |(i, j)| {
        let st = inputs.status[(i, j)];
        let (p1, p2) = (inputs.progress1[i], inputs.progress2[j]);
        if st.p2_off_track {
            params.kappa
        } else {
            let base = follower_progress_payoff(params.kind, params.w, p1, p2);
            if st.collision {
                base - params.sigma * slack.0[(i, j)]
            } else {
                base
            }
        }
    });
    Ok(PayoffMatrices {
        a,
        b,
        status: inputs.status.clone(),
        progress1: inputs.progress1.clone(),
        progress2: inputs.progress2.clone(),
    })
}

/// Smallest soft-constraint weight above which a colliding pair can never
/// out-pay a collision-free one: the spread of collision-free payoffs
/// divided by the smallest positive slack. `None` when nothing collides.
pub fn soft_exactness_bound(inputs: &GameInputs, slack: &SlackTable, params: &GameParams) -> Option<f64> {
    let min_slack = slack.min_positive()?;
    let (n, m) = inputs.dim();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..m {
            let (p1, p2) = (inputs.progress1[i], inputs.progress2[j]);
            for v in [
                leader_progress_payoff(params.kind, params.w, p1, p2),
                follower_progress_payoff(params.kind, params.w, p1, p2),
            ] {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    Some((hi - lo) / min_slack)
}

/// At least one pair is feasible.
pub fn check_assumption_feasible_pair(status: &Array2<PairStatus>) -> bool {
    status.iter().any(PairStatus::is_feasible)
}

/// Rows of `a` attaining the row-constant maximum of the sequential game.
pub fn leader_optimal_rows(a_rows: &[f64]) -> Vec<usize> {
    let best = a_rows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..a_rows.len()).filter(|&i| a_rows[i] == best).collect()
}

/// Leader row payoffs of a sequential-game matrix (its first column).
pub fn sequential_rows(a_seq: &Array2<f64>) -> Vec<f64> {
    a_seq.column(0).to_vec()
}

/// The leader's best sequential row beats `kappa`, and a single follower
/// reply is worth more than `lambda` against every leader-optimal row.
pub fn check_assumption_seq(a_seq: &Array2<f64>, b: &Array2<f64>, params: &GameParams) -> bool {
    let (n, m) = a_seq.dim();
    if n == 0 || m == 0 {
        return false;
    }
    let rows = sequential_rows(a_seq);
    let best = rows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(best > params.kappa) {
        return false;
    }
    let optimal = leader_optimal_rows(&rows);
    let reply = (0..m)
        .map(|j| optimal.iter().map(|&i| b[(i, j)]).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    reply > params.lambda
}

/// The car ahead at the start leads; ties go to P1.
pub fn determine_leader(p1_progress: f64, p2_progress: f64) -> Player {
    if p1_progress >= p2_progress {
        Player::P1
    } else {
        Player::P2
    }
}

/// A, B and (optionally) the status table as read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub status: Option<Array2<PairStatus>>,
}

/// Long-form CSV: `i,j,a,b,status`, zero-based indices, one row per pair.
pub fn write_matrices_csv<W: Write>(
    a: &Array2<f64>,
    b: &Array2<f64>,
    status: Option<&Array2<PairStatus>>,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["i", "j", "a", "b", "status"])?;
    let (n, m) = a.dim();
    for i in 0..n {
        for j in 0..m {
            let st = status.map(|s| s[(i, j)].to_string()).unwrap_or_default();
            w.write_record([
                i.to_string(),
                j.to_string(),
                format!("{:?}", a[(i, j)]),
                format!("{:?}", b[(i, j)]),
                st,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrices_csv<R: Read>(reader: R) -> Result<MatrixFile> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let with_status = match headers.iter().collect::<Vec<_>>().as_slice() {
        ["i", "j", "a", "b"] => false,
        ["i", "j", "a", "b", "status"] => true,
        _ => return Err(Error::parse(1, "expected header `i,j,a,b[,status]`")),
    };
    let mut cells = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let want = if with_status { 5 } else { 4 };
        if rec.len() != want {
            return Err(Error::parse(line, format!("expected {want} fields, got {}", rec.len())));
        }
        let idx = |k: usize, name: &str| -> Result<usize> {
            rec[k].parse().map_err(|e| Error::parse(line, format!("{name}: {e}")))
        };
        let num = |k: usize, name: &str| -> Result<f64> {
            let v: f64 = rec[k].parse().map_err(|e| Error::parse(line, format!("{name}: {e}")))?;
            if v.is_nan() {
                return Err(Error::parse(line, format!("{name}: NaN payoff")));
            }
            Ok(v)
        };
        let st = if with_status && !rec[4].is_empty() {
            Some(rec[4].parse::<PairStatus>().map_err(|e| Error::parse(line, e))?)
        } else {
            None
        };
        cells.push((line, idx(0, "i")?, idx(1, "j")?, num(2, "a")?, num(3, "b")?, st));
    }
    if cells.is_empty() {
        return Err(Error::parse(1, "no matrix entries"));
    }
    let n = cells.iter().map(|c| c.1).max().unwrap() + 1;
    let m = cells.iter().map(|c| c.2).max().unwrap() + 1;
    let mut a = Array2::from_elem((n, m), f64::NAN);
    let mut b = Array2::from_elem((n, m), f64::NAN);
    let mut status = Array2::from_elem((n, m), None);
    for (line, i, j, av, bv, st) in cells {
        if !a[(i, j)].is_nan() {
            return Err(Error::parse(line, format!("duplicate entry ({i},{j})")));
        }
        a[(i, j)] = av;
        b[(i, j)] = bv;
        status[(i, j)] = st;
    }
    if let Some(((i, j), _)) = a.indexed_iter().find(|(_, v)| v.is_nan()) {
        return Err(Error::parse(0, format!("missing entry ({i},{j}) in a {n}x{m} game")));
    }
    let status = if status.iter().all(Option::is_some) {
        Some(status.mapv(Option::unwrap))
    } else if status.iter().all(Option::is_none) {
        None
    } else {
        return Err(Error::parse(0, "status column must be filled for all entries or none"));
    };
    Ok(MatrixFile { a, b, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    #[test]
    fn sequential_example_matrices() {
        let inputs = reference::three_by_three_inputs();
        let m = build_payoffs(&inputs, &GameParams::new(GameKind::Sequential)).unwrap();
        let (a, b) = reference::sequential_matrices();
        assert_eq!(m.a, a);
        assert_eq!(m.b, b);
    }

    #[test]
    fn cooperative_example_matrices() {
        let inputs = reference::three_by_three_inputs();
        let m = build_payoffs(&inputs, &GameParams::new(GameKind::Cooperative)).unwrap();
        let (a, b) = reference::cooperative_matrices();
        assert_eq!(m.a, a);
        assert_eq!(m.b, b);
        let seq = build_payoffs(&inputs, &GameParams::new(GameKind::Sequential)).unwrap();
        let diff: Vec<_> = m.a.indexed_iter().filter(|(ij, v)| seq.a[*ij] != **v).map(|(ij, _)| ij).collect();
        assert_eq!(diff, vec![(1, 1)]);
    }

    #[test]
    fn blocking_example_matrices() {
        let inputs = reference::four_by_four_inputs();
        let m = build_payoffs(&inputs, &GameParams::new(GameKind::Blocking).with_w(0.5)).unwrap();
        let (a, b) = reference::blocking_matrices();
        assert_eq!(m.a, a);
        assert_eq!(m.b, b);
    }

    #[test]
    fn zero_w_blocking_is_cooperative() {
        for inputs in [reference::three_by_three_inputs(), reference::four_by_four_inputs()] {
            let blk = build_payoffs(&inputs, &GameParams::new(GameKind::Blocking).with_w(0.0)).unwrap();
            let coop = build_payoffs(&inputs, &GameParams::new(GameKind::Cooperative)).unwrap();
            assert_eq!(blk, coop);
        }
    }

    #[test]
    fn off_track_precedes_collision_per_player() {
        let mut status = Array2::from_elem((1, 1), PairStatus::FEASIBLE);
        status[(0, 0)] = PairStatus {
            p1_off_track: true,
            p2_off_track: false,
            collision: true,
        };
        let inputs = GameInputs::new(status, vec![1.0], vec![2.0]).unwrap();
        let m = build_payoffs(&inputs, &GameParams::new(GameKind::Cooperative)).unwrap();
        assert_eq!(m.a[(0, 0)], -10.0);
        assert_eq!(m.b[(0, 0)], -1.0);
    }

    #[test]
    fn domination_violation() {
        let inputs = GameInputs::new(Array2::from_elem((1, 1), PairStatus::FEASIBLE), vec![-2.0], vec![1.0]).unwrap();
        assert!(matches!(
            build_payoffs(&inputs, &GameParams::new(GameKind::Cooperative)),
            Err(Error::Domination { .. })
        ));
    }

    #[test]
    fn invalid_params() {
        let mut p = GameParams::new(GameKind::Cooperative);
        p.lambda = -20.0;
        assert!(p.validate().is_err());
        let p = GameParams::new(GameKind::Blocking).with_w(-1.0);
        assert!(p.validate().is_err());
        let p = GameParams::new(GameKind::Blocking).with_sigma(-1.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn slack_sum() {
        let s = SlackTable::slack_of(&[-0.01, 0.02, -0.005]);
        assert!((s - 0.015).abs() < 1e-15);
    }

    #[test]
    fn soft_without_collisions_is_hard() {
        let inputs = reference::four_by_four_inputs();
        let mut no_collision = inputs.clone();
        no_collision.status.iter_mut().for_each(|s| s.collision = false);
        let params = GameParams::new(GameKind::Cooperative).with_sigma(3.0);
        let soft = build_soft_payoffs(&no_collision, &SlackTable::zeros(4, 4), &params).unwrap();
        let hard = build_payoffs(&no_collision, &params).unwrap();
        assert_eq!(soft, hard);
    }

    #[test]
    fn assumptions_on_reference() {
        let inputs = reference::three_by_three_inputs();
        assert!(check_assumption_feasible_pair(&inputs.status));
        let params = GameParams::new(GameKind::Sequential);
        let seq = build_payoffs(&inputs, &params).unwrap();
        assert!(check_assumption_seq(&seq.a, &seq.b, &params));
    }

    #[test]
    fn assumption_failures() {
        let all_collide = Array2::from_elem(
            (2, 2),
            PairStatus {
                collision: true,
                ..PairStatus::FEASIBLE
            },
        );
        assert!(!check_assumption_feasible_pair(&all_collide));
        let mut single = all_collide.clone();
        single[(1, 0)] = PairStatus::FEASIBLE;
        assert!(check_assumption_feasible_pair(&single));

        let params = GameParams::new(GameKind::Sequential);
        // leader's unique best row forces collisions on every reply
        let mut st = Array2::from_elem((2, 2), PairStatus::FEASIBLE);
        st[(1, 0)].collision = true;
        st[(1, 1)].collision = true;
        let inputs = GameInputs::new(st, vec![0.5, 0.9], vec![0.4, 0.6]).unwrap();
        let seq = build_payoffs(&inputs, &params).unwrap();
        assert!(!check_assumption_seq(&seq.a, &seq.b, &params));

        // no on-track leader row
        let st = Array2::from_elem(
            (2, 1),
            PairStatus {
                p1_off_track: true,
                ..PairStatus::FEASIBLE
            },
        );
        let inputs = GameInputs::new(st, vec![0.5, 0.9], vec![0.4]).unwrap();
        let seq = build_payoffs(&inputs, &params).unwrap();
        assert!(!check_assumption_seq(&seq.a, &seq.b, &params));
    }

    #[test]
    fn leader_rule() {
        assert_eq!(determine_leader(5.0, 4.9), Player::P1);
        assert_eq!(determine_leader(4.9, 5.0), Player::P2);
        assert_eq!(determine_leader(5.0, 5.0), Player::P1);
    }

    #[test]
    fn status_text_round_trip() {
        for st in [
            PairStatus::FEASIBLE,
            PairStatus { p1_off_track: true, p2_off_track: false, collision: true },
            PairStatus { p1_off_track: true, p2_off_track: true, collision: false },
        ] {
            assert_eq!(st.to_string().parse::<PairStatus>().unwrap(), st);
        }
        assert!("crash".parse::<PairStatus>().is_err());
    }

    #[test]
    fn matrix_csv_round_trip_and_errors() {
        let inputs = reference::four_by_four_inputs();
        let m = build_payoffs(&inputs, &GameParams::new(GameKind::Blocking).with_w(0.5)).unwrap();
        let mut buf = Vec::new();
        write_matrices_csv(&m.a, &m.b, Some(&m.status), &mut buf).unwrap();
        let back = read_matrices_csv(buf.as_slice()).unwrap();
        assert_eq!(back.a, m.a);
        assert_eq!(back.b, m.b);
        assert_eq!(back.status.unwrap(), m.status);

        let missing = "i,j,a,b\n0,0,1,1\n1,1,1,1\n";
        assert!(read_matrices_csv(missing.as_bytes()).is_err());
        let bad = "i,j,a,b\n0,0,1,1\n0,1,x,1\n";
        match read_matrices_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
