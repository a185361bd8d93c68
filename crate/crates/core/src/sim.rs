//! Receding-horizon races: at every step both cars enumerate trajectories,
//! the configured game is built and solved, and the first primitive of the
//! selected pair is executed. Races run in parallel over seeds.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{signed_distance, Footprint};
use crate::error::{Error, Result};
use crate::game::{
    build_payoffs, build_soft_payoffs, determine_leader, follower_entry, follower_progress_payoff, GameInputs,
    GameKind, GameParams, PairGeometry, PairStatus, SlackTable,
};
use crate::motion::{enumerate_trajectories, Player, PrimitiveLibrary, Pruner, Trajectory};
use crate::solver::{
    nash_pure, rules_of_the_road, select_lexicographic, sequential_maximization, stackelberg_with, LazySource,
    StrategyPair,
};
use crate::track::{CarPose, ModeId, TrackModel};

/// How the executed pair is selected from the game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concept {
    /// Leader-announced Stackelberg pair, smallest indices among ties.
    Stackelberg,
    /// Pure Nash equilibria filtered by the largest leader payoff.
    NashRor,
    /// Leader maximizes alone, follower best-responds. Sequential game only.
    Sequential,
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Concept::Stackelberg => "stackelberg",
            Concept::NashRor => "nash_ror",
            Concept::Sequential => "sequential",
        })
    }
}

impl FromStr for Concept {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stackelberg" => Ok(Concept::Stackelberg),
            "nash_ror" | "nash" => Ok(Concept::NashRor),
            "sequential" => Ok(Concept::Sequential),
            other => Err(Error::Config(format!(
                "unknown concept `{other}` (expected stackelberg, nash_ror or sequential)"
            ))),
        }
    }
}

/// One car's planner: its primitive library and optional pruner.
#[derive(Clone, Copy)]
pub struct CarSetup<'a> {
    pub library: &'a PrimitiveLibrary,
    pub pruner: Option<&'a dyn Pruner>,
}

impl CarSetup<'_> {
    fn admits(&self, pose: &CarPose, track: &TrackModel) -> bool {
        match self.pruner {
            Some(p) => p.admits(pose),
            None => track.in_track(pose),
        }
    }
}

#[derive(Clone)]
pub struct RaceConfig<'a> {
    pub track: &'a TrackModel,
    /// Car 0 and car 1. Roles (leader, follower) are reassigned every step.
    pub cars: [CarSetup<'a>; 2],
    pub footprint: Footprint,
    pub horizon: usize,
    pub params: GameParams,
    pub concept: Concept,
    /// Replace the collision case by the slack penalty `sigma · S`.
    pub soft: bool,
    pub duration_steps: usize,
    pub seed: u64,
    /// Bumper-to-bumper gap range of the initial placement.
    pub gap_m: (f64, f64),
    pub initial_speed_mps: f64,
    /// Initial headings are rounded to multiples of `2π / bins`.
    pub heading_bins: Option<usize>,
    /// Penetration beyond which an executed step counts as a collision.
    pub collision_threshold_m: f64,
    /// Steps a new leader must persist before an overtake is counted.
    pub hold_steps: usize,
    /// Uniform position noise added after every executed step; 0 disables.
    pub perturbation_m: f64,
    /// Sub-samples per executed step for the minimum-distance measurement.
    pub substeps: usize,
}

impl<'a> RaceConfig<'a> {
    pub fn new(track: &'a TrackModel, cars: [CarSetup<'a>; 2]) -> Self {
        RaceConfig {
            track,
            cars,
            footprint: Footprint::default(),
            horizon: 3,
            params: GameParams::new(GameKind::Cooperative),
            concept: Concept::Stackelberg,
            soft: false,
            duration_steps: 250,
            seed: 0,
            gap_m: (0.0, 0.2),
            initial_speed_mps: 0.5,
            heading_bins: None,
            collision_threshold_m: 0.01,
            hold_steps: 5,
            perturbation_m: 0.0,
            substeps: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        let (lo, hi) = self.gap_m;
        if !(lo >= 0.0 && hi >= lo) {
            return bad("gap range must satisfy 0 <= min <= max");
        }
        if hi + self.footprint.length >= self.track.total_length() {
            return bad("gap range does not fit on the track");
        }
        if !(self.initial_speed_mps >= 0.0) || !(self.collision_threshold_m >= 0.0) || !(self.perturbation_m >= 0.0)
        {
            return bad("speeds, thresholds and perturbations must be non-negative");
        }
        if self.substeps == 0 || self.hold_steps == 0 {
            return bad("substeps and hold steps must be positive");
        }
        if self.heading_bins == Some(0) {
            return bad("heading bins must be positive");
        }
        if self.concept == Concept::Sequential && self.params.kind != GameKind::Sequential {
            return bad("the sequential concept requires the sequential game");
        }
        if self.cars.iter().any(|c| c.library.is_empty()) {
            return bad("both cars need a non-empty library");
        }
        Ok(())
    }
}

/// Everything that happened in one executed step. Car-indexed arrays refer
/// to car 0 and car 1; `pair` uses the game labels (leader row, follower
/// column).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    /// Car playing P1 in this step's game.
    pub leader: usize,
    pub trajectories: [usize; 2],
    pub pair: Option<StrategyPair>,
    /// Executed modes.
    pub modes: [ModeId; 2],
    /// The emergency fallback replaced the game's choice.
    pub emergency: bool,
    /// The selected pair satisfied the constraints of the planning game.
    pub planned_feasible: bool,
    /// Poses after the step.
    pub poses: [CarPose; 2],
    pub progress_m: [f64; 2],
    /// Smallest signed distance between the cars during the step.
    pub min_distance_m: f64,
    pub off_track: [bool; 2],
    pub reverse_crossing: [bool; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaceLog {
    pub seed: u64,
    pub concept: Concept,
    pub kind: GameKind,
    pub initial: [CarPose; 2],
    pub initial_progress_m: [f64; 2],
    pub records: Vec<StepRecord>,
}

impl RaceLog {
    pub fn initial_leader(&self) -> usize {
        leader_of(self.initial_progress_m)
    }

    /// Leader after the last step, or the initial leader of an empty log.
    pub fn final_leader(&self) -> usize {
        self.records.last().map_or(self.initial_leader(), |r| leader_of(r.progress_m))
    }

    pub fn final_progress_m(&self) -> [f64; 2] {
        self.records.last().map_or(self.initial_progress_m, |r| r.progress_m)
    }

    /// CSV with one row per step and the header
    /// `step,leader,x0,y0,phi0,mode0,x1,y1,phi1,mode1,i,j,progress0_m,progress1_m,min_distance_m,emergency,off_track0,off_track1,reverse_crossing0,reverse_crossing1`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "step",
            "leader",
            "x0",
            "y0",
            "phi0",
            "mode0",
            "x1",
            "y1",
            "phi1",
            "mode1",
            "i",
            "j",
            "progress0_m",
            "progress1_m",
            "min_distance_m",
            "emergency",
            "off_track0",
            "off_track1",
            "reverse_crossing0",
            "reverse_crossing1",
        ])?;
        for r in &self.records {
            let [a, b] = r.poses;
            let (i, j) = r.pair.map_or((String::new(), String::new()), |p| (p.i.to_string(), p.j.to_string()));
            w.write_record([
                r.step.to_string(),
                r.leader.to_string(),
                a.x.to_string(),
                a.y.to_string(),
                a.phi.to_string(),
                a.mode.to_string(),
                b.x.to_string(),
                b.y.to_string(),
                b.phi.to_string(),
                b.mode.to_string(),
                i,
                j,
                r.progress_m[0].to_string(),
                r.progress_m[1].to_string(),
                r.min_distance_m.to_string(),
                r.emergency.to_string(),
                r.off_track[0].to_string(),
                r.off_track[1].to_string(),
                r.reverse_crossing[0].to_string(),
                r.reverse_crossing[1].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn leader_of(progress: [f64; 2]) -> usize {
    match determine_leader(progress[0], progress[1]) {
        Player::P1 => 0,
        Player::P2 => 1,
    }
}

/// Wall-clock cost of the planning stages. Never part of a log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TimingStats {
    pub steps: u64,
    pub generation_total_s: f64,
    pub generation_max_s: f64,
    pub collision_total_s: f64,
    pub collision_max_s: f64,
    pub box_checks: u64,
}

impl TimingStats {
    fn record(&mut self, generation: Duration, collision: Duration, box_checks: u64) {
        let (g, c) = (generation.as_secs_f64(), collision.as_secs_f64());
        self.steps += 1;
        self.generation_total_s += g;
        self.generation_max_s = self.generation_max_s.max(g);
        self.collision_total_s += c;
        self.collision_max_s = self.collision_max_s.max(c);
        self.box_checks += box_checks;
    }

    pub fn merge(&mut self, other: &TimingStats) {
        self.steps += other.steps;
        self.generation_total_s += other.generation_total_s;
        self.generation_max_s = self.generation_max_s.max(other.generation_max_s);
        self.collision_total_s += other.collision_total_s;
        self.collision_max_s = self.collision_max_s.max(other.collision_max_s);
        self.box_checks += other.box_checks;
    }

    pub fn mean_generation_s(&self) -> f64 {
        self.generation_total_s / self.steps.max(1) as f64
    }

    pub fn mean_collision_s(&self) -> f64 {
        self.collision_total_s / self.steps.max(1) as f64
    }
}

/// Result of one `step_race` call.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub pair: Option<StrategyPair>,
    pub next: [CarPose; 2],
    pub record: StepRecord,
    pub box_checks: u64,
    pub generation: Duration,
    pub collision: Duration,
}

/// The mode a car brakes with: pruner-admitted successors first, then
/// in-track ones, then any; among those the slowest, then the straightest.
pub fn emergency_mode(setup: &CarSetup<'_>, track: &TrackModel, pose: &CarPose) -> ModeId {
    let lib = setup.library;
    *lib.successors(pose.mode)
        .iter()
        .min_by(|&&a, &&b| {
            let rank = |q: ModeId| {
                let next = lib.step(pose, q, track);
                if setup.admits(&next, track) {
                    0
                } else if track.in_track(&next) {
                    1
                } else {
                    2
                }
            };
            let (pa, pb) = (lib.primitive(a), lib.primitive(b));
            rank(a)
                .cmp(&rank(b))
                .then(pa.speed.total_cmp(&pb.speed))
                .then(pa.yaw_rate.abs().total_cmp(&pb.yaw_rate.abs()))
                .then(a.cmp(&b))
        })
        .expect("every mode has a successor")
}

/// Index of the in-track trajectory with the most progress, lowest index
/// among ties.
fn best_alone(geometry: &PairGeometry, leader: bool) -> Option<usize> {
    let (off, progress) = if leader {
        (&geometry.off1, &geometry.progress1)
    } else {
        (&geometry.off2, &geometry.progress2)
    };
    (0..off.len())
        .filter(|&k| !off[k])
        .fold(None, |best: Option<usize>, k| match best {
            Some(b) if progress[b] >= progress[k] => Some(b),
            _ => Some(k),
        })
}

/// Solves the configured game; returns the selected pair if any.
fn select_pair(config: &RaceConfig<'_>, geometry: &PairGeometry) -> Result<Option<StrategyPair>> {
    let (n, m) = geometry.dim();
    if n == 0 || m == 0 {
        return Ok(None);
    }
    let params = &config.params;
    if config.concept == Concept::Sequential {
        let rows: Vec<f64> = (0..n)
            .map(|i| if geometry.off1[i] { params.kappa } else { geometry.progress1[i] })
            .collect();
        let b = LazySource::new(n, m, |i, j| {
            let (p1, p2) = (geometry.progress1[i], geometry.progress2[j]);
            if geometry.off2[j] {
                return params.kappa;
            }
            let c = geometry.check(i, j, config.soft);
            if config.soft {
                follower_progress_payoff(params.kind, params.w, p1, p2) - params.sigma * c.slack
            } else {
                follower_entry(params, geometry.status(i, j, c.collision), p1, p2)
            }
        });
        return Ok(select_lexicographic(&sequential_maximization(&rows, &b)));
    }

    let mut inputs = GameInputs {
        status: ndarray::Array2::from_elem((n, m), PairStatus::FEASIBLE),
        progress1: geometry.progress1.clone(),
        progress2: geometry.progress2.clone(),
    };
    let mut slack = SlackTable::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let c = geometry.check(i, j, config.soft);
            inputs.status[(i, j)] = geometry.status(i, j, c.collision);
            slack.0[(i, j)] = c.slack;
        }
    }
    let payoffs = if config.soft {
        build_soft_payoffs(&inputs, &slack, params)?
    } else {
        build_payoffs(&inputs, params)?
    };
    Ok(match config.concept {
        Concept::Stackelberg => select_lexicographic(&stackelberg_with(&payoffs.a, &payoffs.b).pairs),
        _ => select_lexicographic(&rules_of_the_road(&nash_pure(&payoffs.a, &payoffs.b), &payoffs.a)),
    })
}

/// Smallest signed distance between the cars while both drive their next
/// primitive, sampled at `substeps` points including the endpoint.
fn executed_distance(config: &RaceConfig<'_>, from: &[CarPose; 2], modes: [ModeId; 2], to: &[CarPose; 2]) -> f64 {
    let fp = &config.footprint;
    let mut d = signed_distance(&fp.at(&to[0]), &fp.at(&to[1]));
    for k in 1..config.substeps {
        let f = k as f64 / config.substeps as f64;
        let a = config.cars[0].library.primitive(modes[0]).advance(&from[0], f);
        let b = config.cars[1].library.primitive(modes[1]).advance(&from[1], f);
        d = d.min(signed_distance(&fp.at(&a), &fp.at(&b)));
    }
    d
}

/// One receding-horizon step from `state` (car-indexed). The car ahead
/// plays P1. `rng` is only drawn from when pose perturbation is enabled.
pub fn step_race(state: &[CarPose; 2], config: &RaceConfig<'_>, step: usize, rng: &mut ChaCha8Rng) -> Result<StepOutcome> {
    let track = config.track;
    let leader = leader_of([track.progress(&state[0]), track.progress(&state[1])]);
    let follower = 1 - leader;
    let (lead, follow) = (&config.cars[leader], &config.cars[follower]);

    let started = Instant::now();
    let t1: Vec<Trajectory> =
        enumerate_trajectories(&state[leader], lead.library, config.horizon, track, lead.pruner, Player::P1);
    let t2: Vec<Trajectory> =
        enumerate_trajectories(&state[follower], follow.library, config.horizon, track, follow.pruner, Player::P2);
    let generation = started.elapsed();

    let started = Instant::now();
    let geometry = PairGeometry::new(&t1, &t2, track, &config.footprint)?;
    let pair = select_pair(config, &geometry)?;
    let collision = started.elapsed();
    let box_checks = geometry.box_checks();

    let planned_feasible = pair.is_some_and(|p| {
        let c = geometry.check(p.i, p.j, true);
        let on_track = !geometry.off1[p.i] && !geometry.off2[p.j];
        on_track
            && if config.soft {
                c.penetration <= config.collision_threshold_m
            } else {
                !c.collision
            }
    });

    let mut modes = [0; 2];
    let emergency = !planned_feasible;
    if let (Some(p), false) = (pair, emergency) {
        modes[leader] = t1[p.i].modes[0];
        modes[follower] = t2[p.j].modes[0];
    } else {
        modes[follower] = emergency_mode(follow, track, &state[follower]);
        modes[leader] = match best_alone(&geometry, true) {
            Some(i) => t1[i].modes[0],
            None => emergency_mode(lead, track, &state[leader]),
        };
    }

    let mut next = [state[0], state[1]];
    let mut reverse_crossing = [false; 2];
    for car in 0..2 {
        let mut pose = config.cars[car].library.primitive(modes[car]).advance(&state[car], 1.0);
        pose.mode = modes[car];
        if config.perturbation_m > 0.0 {
            let p = config.perturbation_m;
            pose.x += rng.gen_range(-p..=p);
            pose.y += rng.gen_range(-p..=p);
        }
        let lap = track.lap_rule(track.project(state[car].position()), track.project(pose.position()), state[car].laps);
        pose.laps = lap.laps;
        next[car] = pose;
        reverse_crossing[car] = lap.reverse_crossing;
    }
    let record = StepRecord {
        step,
        leader,
        trajectories: if leader == 0 { [t1.len(), t2.len()] } else { [t2.len(), t1.len()] },
        pair,
        modes,
        emergency,
        planned_feasible,
        poses: next,
        progress_m: [track.progress(&next[0]), track.progress(&next[1])],
        min_distance_m: executed_distance(config, state, modes, &next),
        off_track: [!track.in_track(&next[0]), !track.in_track(&next[1])],
        reverse_crossing,
    };
    Ok(StepOutcome {
        pair: if emergency { None } else { pair },
        next,
        record,
        box_checks,
        generation,
        collision,
    })
}

fn snap_heading(phi: f64, bins: Option<usize>) -> f64 {
    match bins {
        Some(b) => {
            let w = std::f64::consts::TAU / b as f64;
            (phi / w).round() * w
        }
        None => phi,
    }
}

/// Initial poses on the centerline: a random car ahead by the sampled gap,
/// both at the initial speed on a straight mode. Placements rejected by
/// either car's pruner are resampled.
pub fn initial_poses(config: &RaceConfig<'_>, rng: &mut ChaCha8Rng) -> Result<[CarPose; 2]> {
    let track = config.track;
    let (lo, hi) = config.gap_m;
    for _ in 0..1000 {
        let spacing = rng.gen_range(lo..=hi) + config.footprint.length;
        let s_back = rng.gen_range(0.0..track.total_length() - spacing);
        let ahead = rng.gen_range(0..2usize);
        let mut poses = [CarPose::new(0.0, 0.0, 0.0, 0); 2];
        for car in 0..2 {
            let lib = config.cars[car].library;
            let mode = lib.closest_mode(config.initial_speed_mps, 0.0);
            let s = if car == ahead { s_back + spacing } else { s_back };
            let mut pose = track.pose_at(s, 0.0, mode);
            pose.phi = snap_heading(pose.phi, config.heading_bins);
            poses[car] = pose;
        }
        if (0..2).all(|car| config.cars[car].admits(&poses[car], track)) {
            return Ok(poses);
        }
    }
    Err(Error::Config("no admissible initial placement found in 1000 draws".into()))
}

/// One seeded race.
pub fn run_race(config: &RaceConfig<'_>) -> Result<RaceLog> {
    Ok(run_race_timed(config)?.0)
}

/// One seeded race plus the wall-clock cost of its planning steps.
pub fn run_race_timed(config: &RaceConfig<'_>) -> Result<(RaceLog, TimingStats)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial = initial_poses(config, &mut rng)?;
    let track = config.track;
    let mut log = RaceLog {
        seed: config.seed,
        concept: config.concept,
        kind: config.params.kind,
        initial,
        initial_progress_m: [track.progress(&initial[0]), track.progress(&initial[1])],
        records: Vec::with_capacity(config.duration_steps),
    };
    let mut timing = TimingStats::default();
    let mut state = initial;
    for step in 0..config.duration_steps {
        let out = step_race(&state, config, step, &mut rng)?;
        timing.record(out.generation, out.collision, out.box_checks);
        state = out.next;
        log.records.push(out.record);
    }
    Ok((log, timing))
}

/// A confirmed change of the leading car.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Overtake {
    /// Step at which the new leader first went ahead.
    pub step: usize,
    /// The car that went ahead.
    pub car: usize,
}

/// Leader changes that persist for at least `hold` consecutive entries of
/// `leaders`, starting from `initial`.
pub fn detect_overtakes_in(initial: usize, leaders: &[usize], hold: usize) -> Vec<Overtake> {
    let mut events = Vec::new();
    let mut confirmed = initial;
    let mut run_start = None;
    for (k, &l) in leaders.iter().enumerate() {
        if l == confirmed {
            run_start = None;
            continue;
        }
        let start = *run_start.get_or_insert(k);
        if k + 1 - start >= hold {
            events.push(Overtake { step: start, car: l });
            confirmed = l;
            run_start = None;
        }
    }
    events
}

pub fn detect_overtakes(log: &RaceLog, hold: usize) -> Vec<Overtake> {
    let leaders: Vec<usize> = log.records.iter().map(|r| leader_of(r.progress_m)).collect();
    detect_overtakes_in(log.initial_leader(), &leaders, hold)
}

/// Per-race outcome row of a batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaceSummary {
    pub seed: u64,
    pub steps: usize,
    pub overtakes: [usize; 2],
    pub colliding_steps: usize,
    pub emergency_steps: usize,
    pub off_track_steps: usize,
    pub initial_leader: usize,
    pub final_leader: usize,
    /// Progress gained over the race by each car.
    pub progress_m: [f64; 2],
    /// Car with more progress at the end; `None` on an exact tie.
    pub winner: Option<usize>,
}

impl RaceSummary {
    pub fn from_log(log: &RaceLog, threshold_m: f64, hold: usize) -> Self {
        let mut overtakes = [0; 2];
        for e in detect_overtakes(log, hold) {
            overtakes[e.car] += 1;
        }
        let fin = log.final_progress_m();
        RaceSummary {
            seed: log.seed,
            steps: log.records.len(),
            overtakes,
            colliding_steps: log.records.iter().filter(|r| r.min_distance_m < -threshold_m).count(),
            emergency_steps: log.records.iter().filter(|r| r.emergency).count(),
            off_track_steps: log.records.iter().filter(|r| r.off_track.contains(&true)).count(),
            initial_leader: log.initial_leader(),
            final_leader: log.final_leader(),
            progress_m: [fin[0] - log.initial_progress_m[0], fin[1] - log.initial_progress_m[1]],
            winner: if fin[0] > fin[1] {
                Some(0)
            } else if fin[1] > fin[0] {
                Some(1)
            } else {
                None
            },
        }
    }

    pub fn total_overtakes(&self) -> usize {
        self.overtakes[0] + self.overtakes[1]
    }
}

/// Aggregate metrics of a batch of races.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaceMetrics {
    pub races: usize,
    pub steps: usize,
    pub overtakes: usize,
    pub overtakes_per_car: [usize; 2],
    pub runs_with_overtakes: usize,
    pub colliding_steps: usize,
    /// Colliding steps over all steps.
    pub collision_probability: f64,
    pub emergency_steps: usize,
    /// Progress gained per car and race.
    pub mean_progress_m: f64,
    pub mean_progress_per_car_m: [f64; 2],
    pub stay_ahead_runs: usize,
    pub wins: [usize; 2],
}

impl RaceMetrics {
    pub fn aggregate(races: &[RaceSummary]) -> Self {
        let n = races.len();
        let steps: usize = races.iter().map(|r| r.steps).sum();
        let colliding: usize = races.iter().map(|r| r.colliding_steps).sum();
        let per_car = |c: usize| races.iter().map(|r| r.progress_m[c]).sum::<f64>() / n.max(1) as f64;
        let per_car_progress = [per_car(0), per_car(1)];
        RaceMetrics {
            races: n,
            steps,
            overtakes: races.iter().map(RaceSummary::total_overtakes).sum(),
            overtakes_per_car: [
                races.iter().map(|r| r.overtakes[0]).sum(),
                races.iter().map(|r| r.overtakes[1]).sum(),
            ],
            runs_with_overtakes: races.iter().filter(|r| r.total_overtakes() > 0).count(),
            colliding_steps: colliding,
            collision_probability: if steps == 0 { 0.0 } else { colliding as f64 / steps as f64 },
            emergency_steps: races.iter().map(|r| r.emergency_steps).sum(),
            mean_progress_m: 0.5 * (per_car_progress[0] + per_car_progress[1]),
            mean_progress_per_car_m: per_car_progress,
            stay_ahead_runs: races.iter().filter(|r| r.initial_leader == r.final_leader).count(),
            wins: [
                races.iter().filter(|r| r.winner == Some(0)).count(),
                races.iter().filter(|r| r.winner == Some(1)).count(),
            ],
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub metrics: RaceMetrics,
    /// In seed order.
    pub races: Vec<RaceSummary>,
    pub timing: TimingStats,
}

/// Runs one race per seed in parallel, reducing in seed order.
pub fn batch(base: &RaceConfig<'_>, seeds: &[u64]) -> Result<BatchResult> {
    if seeds.is_empty() {
        return Err(Error::Config("a batch needs at least one seed".into()));
    }
    base.validate()?;
    let runs: Vec<(RaceSummary, TimingStats)> = seeds
        .par_iter()
        .map(|&seed| {
            let config = RaceConfig { seed, ..base.clone() };
            let (log, timing) = run_race_timed(&config)?;
            Ok((RaceSummary::from_log(&log, base.collision_threshold_m, base.hold_steps), timing))
        })
        .collect::<Result<_>>()?;
    let mut timing = TimingStats::default();
    for (_, t) in &runs {
        timing.merge(t);
    }
    let races: Vec<RaceSummary> = runs.into_iter().map(|(r, _)| r).collect();
    Ok(BatchResult {
        metrics: RaceMetrics::aggregate(&races),
        races,
        timing,
    })
}

/// Per-race table of a batch as CSV.
pub fn write_summaries_csv<W: Write>(races: &[RaceSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "seed",
        "steps",
        "overtakes0",
        "overtakes1",
        "colliding_steps",
        "emergency_steps",
        "off_track_steps",
        "initial_leader",
        "final_leader",
        "progress0_m",
        "progress1_m",
        "winner",
    ])?;
    for r in races {
        w.write_record([
            r.seed.to_string(),
            r.steps.to_string(),
            r.overtakes[0].to_string(),
            r.overtakes[1].to_string(),
            r.colliding_steps.to_string(),
            r.emergency_steps.to_string(),
            r.off_track_steps.to_string(),
            r.initial_leader.to_string(),
            r.final_leader.to_string(),
            r.progress_m[0].to_string(),
            r.progress_m[1].to_string(),
            r.winner.map_or(String::new(), |c| c.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
