//! Constant-velocity motion primitives, the concatenation automaton and
//! horizon-N trajectory enumeration.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::track::{CarPose, ModeId, TrackModel};

const GRID_EPS: f64 = 1e-9;

/// Heading resolution matched by the desk library: every desk primitive turns
/// the car by a whole number of `2π / DESK_HEADING_BINS` steps.
pub const DESK_HEADING_BINS: usize = 40;
const DESK_DURATION: f64 = 0.16;

/// Which side of the bimatrix game a trajectory belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    P1,
    P2,
}

/// A segment driven at constant speed and yaw rate for a fixed duration:
/// a straight when the yaw rate is zero, a circular arc otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionPrimitive {
    pub id: ModeId,
    /// m/s, planar speed magnitude.
    pub speed: f64,
    /// rad/s.
    pub yaw_rate: f64,
    /// s.
    pub duration: f64,
}

impl MotionPrimitive {
    /// Pose after driving `fraction` of this primitive from `pose`. The mode
    /// and lap counter of the input are kept.
    pub fn advance(&self, pose: &CarPose, fraction: f64) -> CarPose {
        let t = self.duration * fraction;
        let (x, y, phi) = (pose.x, pose.y, pose.phi);
        let (nx, ny, nphi) = if self.yaw_rate.abs() < 1e-12 {
            let d = self.speed * t;
            (x + d * phi.cos(), y + d * phi.sin(), phi)
        } else {
            let r = self.speed / self.yaw_rate;
            let phi1 = phi + self.yaw_rate * t;
            (
                x + r * (phi1.sin() - phi.sin()),
                y - r * (phi1.cos() - phi.cos()),
                phi1,
            )
        };
        CarPose {
            x: nx,
            y: ny,
            phi: wrap_angle(nphi),
            mode: pose.mode,
            laps: pose.laps,
        }
    }

    pub fn step_length(&self) -> f64 {
        self.speed * self.duration
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    a - 2.0 * PI * ((a - PI) / (2.0 * PI)).ceil()
}

/// Library of primitives plus the automaton `U(q)` of admissible successors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveLibrary {
    primitives: Vec<MotionPrimitive>,
    successors: Vec<Vec<ModeId>>,
    duration: f64,
}

impl PrimitiveLibrary {
    /// Builds a library from explicit primitives and successor lists. Ids must
    /// be `0..n`; successor lists are sorted and deduplicated.
    pub fn new(mut primitives: Vec<MotionPrimitive>, successors: Vec<Vec<ModeId>>) -> Result<Self> {
        if primitives.is_empty() {
            return Err(Error::InvalidLibrary("no primitives".into()));
        }
        if primitives.len() != successors.len() {
            return Err(Error::InvalidLibrary(format!(
                "{} primitives but {} successor lists",
                primitives.len(),
                successors.len()
            )));
        }
        let mut order: Vec<usize> = (0..primitives.len()).collect();
        order.sort_by_key(|&k| primitives[k].id);
        let mut succ_sorted = vec![Vec::new(); primitives.len()];
        for (pos, &k) in order.iter().enumerate() {
            if primitives[k].id != pos {
                return Err(Error::InvalidLibrary(format!(
                    "ids must be 0..{} without gaps; found {}",
                    primitives.len(),
                    primitives[k].id
                )));
            }
            succ_sorted[pos] = successors[k].clone();
        }
        primitives.sort_by_key(|p| p.id);

        let duration = primitives[0].duration;
        for p in &primitives {
            if !(p.speed >= 0.0) || !p.speed.is_finite() || !p.yaw_rate.is_finite() {
                return Err(Error::InvalidLibrary(format!("primitive {} has invalid velocity", p.id)));
            }
            if !(p.duration > 0.0) {
                return Err(Error::InvalidLibrary(format!("primitive {} has non-positive duration", p.id)));
            }
            if (p.duration - duration).abs() > 1e-12 {
                return Err(Error::InvalidLibrary("primitives must share one duration".into()));
            }
        }
        for (q, list) in succ_sorted.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            if list.is_empty() {
                return Err(Error::InvalidLibrary(format!("mode {q} has no successor")));
            }
            if let Some(&bad) = list.iter().find(|&&s| s >= primitives.len()) {
                return Err(Error::InvalidLibrary(format!("mode {q} lists unknown successor {bad}")));
            }
        }
        Ok(PrimitiveLibrary {
            primitives,
            successors: succ_sorted,
            duration,
        })
    }

    /// One primitive per `(speed, yaw_rate)` grid pair, ids assigned
    /// speed-major. Mode `q` may follow `p` iff the speed change is within
    /// `accel_limit·duration` and the yaw-rate change within
    /// `yaw_accel_limit·duration`.
    pub fn generate(
        speeds: &[f64],
        yaw_rates: &[f64],
        accel_limit: f64,
        yaw_accel_limit: f64,
        duration: f64,
    ) -> Result<Self> {
        if speeds.is_empty() {
            return Err(Error::EmptyGrid("speed grid"));
        }
        if yaw_rates.is_empty() {
            return Err(Error::EmptyGrid("yaw-rate grid"));
        }
        if !(accel_limit > 0.0 && yaw_accel_limit > 0.0 && duration > 0.0) {
            return Err(Error::InvalidLibrary("limits and duration must be positive".into()));
        }
        let mut primitives = Vec::with_capacity(speeds.len() * yaw_rates.len());
        for &speed in speeds {
            for &yaw_rate in yaw_rates {
                primitives.push(MotionPrimitive {
                    id: primitives.len(),
                    speed,
                    yaw_rate,
                    duration,
                });
            }
        }
        let dv = accel_limit * duration + GRID_EPS;
        let dw = yaw_accel_limit * duration + GRID_EPS;
        let successors = primitives
            .iter()
            .map(|p| {
                primitives
                    .iter()
                    .filter(|q| (q.speed - p.speed).abs() <= dv && (q.yaw_rate - p.yaw_rate).abs() <= dw)
                    .map(|q| q.id)
                    .collect()
            })
            .collect();
        PrimitiveLibrary::new(primitives, successors)
    }

    /// Desk-scale library: speeds 0.5..=`max_speed` in 0.5 m/s steps, yaw
    /// rates `k·ω₀` for `k = -4..=4` with `ω₀ = 2π / (DESK_HEADING_BINS · T)`
    /// (about 0.98 rad/s), one grid step of change per primitive, `T = 0.16 s`.
    pub fn desk(max_speed: f64) -> Self {
        let speeds: Vec<f64> = (1..)
            .map(|k| 0.5 * k as f64)
            .take_while(|&v| v <= max_speed + GRID_EPS)
            .collect();
        let quantum = Self::desk_yaw_quantum();
        let yaw_rates: Vec<f64> = (-4..=4).map(|k| k as f64 * quantum).collect();
        PrimitiveLibrary::generate(&speeds, &yaw_rates, 0.5 / DESK_DURATION, quantum / DESK_DURATION, DESK_DURATION)
            .expect("desk library parameters are valid")
    }

    pub fn desk_yaw_quantum() -> f64 {
        std::f64::consts::TAU / (DESK_HEADING_BINS as f64 * DESK_DURATION)
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn primitives(&self) -> &[MotionPrimitive] {
        &self.primitives
    }

    pub fn primitive(&self, id: ModeId) -> &MotionPrimitive {
        &self.primitives[id]
    }

    pub fn successors(&self, id: ModeId) -> &[ModeId] {
        &self.successors[id]
    }

    pub fn max_speed(&self) -> f64 {
        self.primitives.iter().map(|p| p.speed).fold(0.0, f64::max)
    }

    pub fn mean_branching(&self) -> f64 {
        let total: usize = self.successors.iter().map(Vec::len).sum();
        total as f64 / self.len() as f64
    }

    /// Mode whose velocity is closest to `(speed, yaw_rate)`; lowest id wins ties.
    pub fn closest_mode(&self, speed: f64, yaw_rate: f64) -> ModeId {
        self.primitives
            .iter()
            .min_by(|a, b| {
                let da = (a.speed - speed).powi(2) + (a.yaw_rate - yaw_rate).powi(2);
                let db = (b.speed - speed).powi(2) + (b.yaw_rate - yaw_rate).powi(2);
                da.total_cmp(&db)
            })
            .map(|p| p.id)
            .unwrap()
    }

    /// Applies mode `next` to `pose`, including the lap-counter update.
    pub fn step(&self, pose: &CarPose, next: ModeId, track: &TrackModel) -> CarPose {
        let prim = &self.primitives[next];
        let mut out = prim.advance(pose, 1.0);
        out.mode = next;
        let before = track.project(pose.position());
        let after = track.project(out.position());
        out.laps = track.lap_rule(before, after, pose.laps).laps;
        out
    }

    /// Writes the library as CSV: `id,speed_mps,yaw_rate_radps,duration_s,successors`
    /// with successor ids separated by spaces.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "speed_mps", "yaw_rate_radps", "duration_s", "successors"])?;
        for p in &self.primitives {
            let succ: Vec<String> = self.successors[p.id].iter().map(|s| s.to_string()).collect();
            w.write_record([
                p.id.to_string(),
                format!("{:?}", p.speed),
                format!("{:?}", p.yaw_rate),
                format!("{:?}", p.duration),
                succ.join(" "),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["id", "speed_mps", "yaw_rate_radps", "duration_s", "successors"];
        if headers.iter().ne(expected.iter().copied()) {
            return Err(Error::parse(1, format!("expected header `{}`", expected.join(","))));
        }
        let mut primitives = Vec::new();
        let mut successors = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != 5 {
                return Err(Error::parse(line, format!("expected 5 fields, got {}", rec.len())));
            }
            let num = |k: usize| -> Result<f64> {
                rec[k]
                    .parse::<f64>()
                    .map_err(|e| Error::parse(line, format!("{}: {e}", expected[k])))
            };
            let id = rec[0]
                .parse::<usize>()
                .map_err(|e| Error::parse(line, format!("id: {e}")))?;
            primitives.push(MotionPrimitive {
                id,
                speed: num(1)?,
                yaw_rate: num(2)?,
                duration: num(3)?,
            });
            let succ = rec[4]
                .split_whitespace()
                .map(|s| s.parse::<usize>().map_err(|e| Error::parse(line, format!("successors: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            successors.push(succ);
        }
        PrimitiveLibrary::new(primitives, successors)
    }
}

/// Decides whether a pose is worth expanding during enumeration.
pub trait Pruner: Sync {
    fn admits(&self, pose: &CarPose) -> bool;
}

/// A rolled-out sequence of `N` primitives and the `N+1` poses it visits.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<CarPose>,
    pub modes: Vec<ModeId>,
    pub owner: Player,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.modes.len()
    }

    pub fn terminal(&self) -> &CarPose {
        self.states.last().unwrap()
    }

    /// Pose at step `k` (1-based) after `fraction` of that step. Fraction 1
    /// is the stored endpoint.
    pub fn pose_within(&self, library: &PrimitiveLibrary, k: usize, fraction: f64) -> CarPose {
        if fraction >= 1.0 {
            return self.states[k];
        }
        library.primitive(self.modes[k - 1]).advance(&self.states[k - 1], fraction)
    }
}

/// All automaton-admissible mode sequences of length `horizon` from `start`,
/// rolled out on `track`, in lexicographic mode order. With a pruner, a
/// branch is cut as soon as one of its states is rejected.
pub fn enumerate_trajectories(
    start: &CarPose,
    library: &PrimitiveLibrary,
    horizon: usize,
    track: &TrackModel,
    pruner: Option<&dyn Pruner>,
    owner: Player,
) -> Vec<Trajectory> {
    assert!(horizon >= 1, "horizon must be at least 1");
    assert!(start.mode < library.len(), "start mode not in library");
    let mut out = Vec::new();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut modes = Vec::with_capacity(horizon);
    states.push(*start);
    expand(library, horizon, track, pruner, owner, &mut states, &mut modes, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn expand(
    library: &PrimitiveLibrary,
    horizon: usize,
    track: &TrackModel,
    pruner: Option<&dyn Pruner>,
    owner: Player,
    states: &mut Vec<CarPose>,
    modes: &mut Vec<ModeId>,
    out: &mut Vec<Trajectory>,
) {
    if modes.len() == horizon {
        out.push(Trajectory {
            states: states.clone(),
            modes: modes.clone(),
            owner,
        });
        return;
    }
    let current = *states.last().unwrap();
    for &next in library.successors(current.mode) {
        let pose = library.step(&current, next, track);
        if let Some(p) = pruner {
            if !p.admits(&pose) {
                continue;
            }
        }
        states.push(pose);
        modes.push(next);
        expand(library, horizon, track, pruner, owner, states, modes, out);
        states.pop();
        modes.pop();
    }
}

/// Number of leaves of the unpruned enumeration tree.
pub fn count_sequences(library: &PrimitiveLibrary, start_mode: ModeId, horizon: usize) -> u128 {
    let mut counts = vec![1u128; library.len()];
    for _ in 0..horizon {
        counts = (0..library.len())
            .map(|q| library.successors(q).iter().map(|&s| counts[s]).sum())
            .collect();
    }
    counts[start_mode]
}
