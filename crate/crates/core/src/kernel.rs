//! Grid approximation of the per-car viability kernel of the track
//! constraints over `(X, Y, heading, mode)`, and pruners built on it.
//!
//! A state is a grid cell: an `X × Y` square, a heading bin and a mode. The
//! image of a state under a successor mode is the cell square translated by
//! the primitive's displacement at the bin-center heading, so every
//! transition is a fixed block of at most 2×2 cells that depends only on the
//! heading bin and the successor mode. A state survives a sweep when some
//! successor maps its whole square onto member states and the face
//! neighbours of that block (within the inflation radius) lie inside the
//! constraint set.
//!
//! For libraries whose heading changes are whole bins, a car that starts on
//! a bin-center heading in a member cell can therefore stay in member cells
//! indefinitely.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::motion::{PrimitiveLibrary, Pruner, DESK_HEADING_BINS};
use crate::track::{CarPose, ModeId, TrackModel, Vec2};

const NOT_INSIDE: u32 = u32::MAX;
const FORMAT_TAG: &str = "racegame-kernel 1";

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub cell_m: f64,
    pub headings: usize,
    /// Face-neighbour radius that must be inside the set around every image.
    pub inflation: usize,
    pub max_iterations: usize,
    /// Extra border around the track bounding box.
    pub margin_m: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            cell_m: 0.02,
            headings: DESK_HEADING_BINS,
            inflation: 1,
            max_iterations: 1000,
            margin_m: 0.5,
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if !(self.cell_m > 0.0) || self.headings == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidParams(
                "grid needs a positive cell size, heading count and iteration cap".into(),
            ));
        }
        Ok(())
    }
}

/// The constraint set on the `X × Y` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRegion {
    pub origin: Vec2,
    pub cell_m: f64,
    pub nx: usize,
    pub ny: usize,
    /// X wraps around, modelling an unbounded straight corridor.
    pub periodic_x: bool,
    /// Row-major (`iy * nx + ix`) cells lying entirely inside the constraint.
    pub inside: Vec<bool>,
}

impl KernelRegion {
    /// Cells whose whole square lies within the track.
    pub fn from_track(track: &TrackModel, spec: &GridSpec) -> Self {
        let (mut lo, mut hi) = (track.centerline()[0], track.centerline()[0]);
        for p in track.centerline() {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        // the grid depends on the centerline only, unless the track is wider
        // than the margin
        let pad = Vec2::repeat(spec.margin_m.max(track.halfwidth() + spec.cell_m));
        let origin = lo - pad;
        let nx = ((hi.x - lo.x + 2.0 * pad.x) / spec.cell_m).ceil() as usize;
        let ny = ((hi.y - lo.y + 2.0 * pad.y) / spec.cell_m).ceil() as usize;
        let reach = spec.cell_m * std::f64::consts::FRAC_1_SQRT_2;
        let inside = (0..nx * ny)
            .map(|k| {
                let c = origin + Vec2::new((k % nx) as f64 + 0.5, (k / nx) as f64 + 0.5) * spec.cell_m;
                track.distance_to_centerline(c) + reach <= track.halfwidth()
            })
            .collect();
        KernelRegion {
            origin,
            cell_m: spec.cell_m,
            nx,
            ny,
            periodic_x: false,
            inside,
        }
    }

    /// Corridor `|y| <= halfwidth` along X, wrapping after `length_m`.
    pub fn corridor(length_m: f64, halfwidth: f64, spec: &GridSpec) -> Self {
        let nx = (length_m / spec.cell_m).round().max(1.0) as usize;
        let ny = ((2.0 * halfwidth + 2.0 * spec.margin_m) / spec.cell_m).ceil() as usize;
        let origin = Vec2::new(0.0, -0.5 * ny as f64 * spec.cell_m);
        let inside = (0..nx * ny)
            .map(|k| {
                let y = origin.y + ((k / nx) as f64 + 0.5) * spec.cell_m;
                y.abs() + 0.5 * spec.cell_m <= halfwidth
            })
            .collect();
        KernelRegion {
            origin,
            cell_m: spec.cell_m,
            nx,
            ny,
            periodic_x: true,
            inside,
        }
    }
}

/// Image block of a cell: x offsets `x0..=x1`, y offsets `y0..=y1`, heading bin.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Offset {
    x0: i32,
    x1: i32,
    y0: i32,
    y1: i32,
    heading: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridKernel {
    region: KernelRegion,
    headings: usize,
    modes: usize,
    inflation: usize,
    /// Dense `X × Y` map to compact in-region cell indices.
    xy_index: Vec<u32>,
    /// Compact cell index to `(ix, iy)`.
    xy_cells: Vec<(u32, u32)>,
    /// Layout `(cell * modes + mode) * headings + heading`.
    member: Vec<bool>,
    iterations: usize,
    converged: bool,
}

impl GridKernel {
    pub fn compute(region: KernelRegion, library: &PrimitiveLibrary, spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        let mut kernel = GridKernel::full(region, library.len(), spec.headings, spec.inflation);
        let offsets = kernel.offsets(library);
        let predecessors = kernel.predecessor_table(library, &offsets);
        // the first sweep checks every state; later sweeps only those with a
        // successor removed by the previous sweep, which is the same sequence
        let (next, mut removed) = kernel.sweep(library, &offsets);
        kernel.member = next;
        kernel.iterations = 1;
        while !removed.is_empty() {
            if kernel.iterations == spec.max_iterations {
                return Err(Error::NoConvergence(spec.max_iterations));
            }
            let dirty = kernel.dirty_states(&removed, &predecessors);
            removed = dirty
                .par_iter()
                .copied()
                .filter(|&s| !kernel.viable(library, &offsets, &kernel.member, s))
                .collect();
            for &s in &removed {
                kernel.member[s] = false;
            }
            kernel.iterations += 1;
        }
        kernel.converged = true;
        Ok(kernel)
    }

    /// For every `(successor mode, landing heading)`, the `(mode, heading)`
    /// pairs that reach it, each with its image block.
    fn predecessor_table(&self, library: &PrimitiveLibrary, offsets: &[Offset]) -> Vec<Vec<(usize, usize, Offset)>> {
        let mut table = vec![Vec::new(); self.modes * self.headings];
        for q in 0..self.modes {
            for &s in library.successors(q) {
                for h in 0..self.headings {
                    let off = offsets[h * self.modes + s];
                    table[s * self.headings + off.heading].push((q, h, off));
                }
            }
        }
        table
    }

    /// Member states whose image under some successor covers a removed state.
    fn dirty_states(&self, removed: &[usize], predecessors: &[Vec<(usize, usize, Offset)>]) -> Vec<usize> {
        let mut dirty: Vec<usize> = removed
            .par_iter()
            .flat_map_iter(|&r| {
                let cell = r / (self.modes * self.headings);
                let (ix, iy) = self.xy_cells[cell];
                predecessors[r % (self.modes * self.headings)].iter().flat_map(move |&(q, h, off)| {
                    (off.x0..=off.x1).flat_map(move |dx| {
                        (off.y0..=off.y1).filter_map(move |dy| {
                            self.shifted(ix, iy, -dx, -dy).map(|c| self.state(c, q, h))
                        })
                    })
                })
            })
            .filter(|&s| self.member[s])
            .collect();
        dirty.par_sort_unstable();
        dirty.dedup();
        dirty
    }

    fn viable(&self, library: &PrimitiveLibrary, offsets: &[Offset], member: &[bool], state: usize) -> bool {
        let h = state % self.headings;
        let q = (state / self.headings) % self.modes;
        let (ix, iy) = self.xy_cells[state / (self.headings * self.modes)];
        library
            .successors(q)
            .iter()
            .any(|&s| self.lands_safely(member, ix, iy, offsets[h * self.modes + s], s))
    }

    fn full(region: KernelRegion, modes: usize, headings: usize, inflation: usize) -> Self {
        let mut xy_index = vec![NOT_INSIDE; region.nx * region.ny];
        let mut xy_cells = Vec::new();
        for (k, &inside) in region.inside.iter().enumerate() {
            if inside {
                xy_index[k] = xy_cells.len() as u32;
                xy_cells.push(((k % region.nx) as u32, (k / region.nx) as u32));
            }
        }
        let member = vec![true; xy_cells.len() * modes * headings];
        GridKernel {
            region,
            headings,
            modes,
            inflation,
            xy_index,
            xy_cells,
            member,
            iterations: 0,
            converged: false,
        }
    }

    fn heading_width(&self) -> f64 {
        TAU / self.headings as f64
    }

    fn heading_bin(&self, phi: f64) -> usize {
        ((phi / self.heading_width()).round() as i64).rem_euclid(self.headings as i64) as usize
    }

    /// Offsets indexed by `heading * modes + successor`.
    fn offsets(&self, library: &PrimitiveLibrary) -> Vec<Offset> {
        let cell = self.region.cell_m;
        let mut out = Vec::with_capacity(self.headings * self.modes);
        for h in 0..self.headings {
            let phi = h as f64 * self.heading_width();
            for p in library.primitives() {
                let end = p.advance(&CarPose::new(0.0, 0.0, phi, p.id), 1.0);
                let (u, v) = (snap(end.x / cell), snap(end.y / cell));
                out.push(Offset {
                    x0: u.floor() as i32,
                    x1: u.ceil() as i32,
                    y0: v.floor() as i32,
                    y1: v.ceil() as i32,
                    heading: self.heading_bin(end.phi),
                });
            }
        }
        out
    }

    /// Compact index of the cell at `(ix + dx, iy + dy)`, if inside.
    fn shifted(&self, ix: u32, iy: u32, dx: i32, dy: i32) -> Option<usize> {
        let (nx, ny) = (self.region.nx as i64, self.region.ny as i64);
        let mut x = ix as i64 + dx as i64;
        let y = iy as i64 + dy as i64;
        if self.region.periodic_x {
            x = x.rem_euclid(nx);
        }
        if x < 0 || y < 0 || x >= nx || y >= ny {
            return None;
        }
        match self.xy_index[(y * nx + x) as usize] {
            NOT_INSIDE => None,
            k => Some(k as usize),
        }
    }

    fn state(&self, cell: usize, mode: usize, heading: usize) -> usize {
        (cell * self.modes + mode) * self.headings + heading
    }

    /// Every cell of the image block is a member and the inflation
    /// neighbourhood of the block lies inside the constraint set.
    fn lands_safely(&self, member: &[bool], ix: u32, iy: u32, off: Offset, mode: usize) -> bool {
        for dx in off.x0..=off.x1 {
            for dy in off.y0..=off.y1 {
                match self.shifted(ix, iy, dx, dy) {
                    Some(c) if member[self.state(c, mode, off.heading)] => {}
                    _ => return false,
                }
            }
        }
        let k = self.inflation as i32;
        for dx in off.x0 - k..=off.x1 + k {
            for dy in off.y0 - k..=off.y1 + k {
                // distance from the block in face steps
                let gap = (off.x0 - dx).max(dx - off.x1).max(0) + (off.y0 - dy).max(dy - off.y1).max(0);
                if gap > 0 && gap <= k && self.shifted(ix, iy, dx, dy).is_none() {
                    return false;
                }
            }
        }
        true
    }

    /// One double-buffered elimination sweep over all states; returns the new
    /// membership and the removed states in ascending order.
    fn sweep(&self, library: &PrimitiveLibrary, offsets: &[Offset]) -> (Vec<bool>, Vec<usize>) {
        let block = self.modes * self.headings;
        let mut next = self.member.clone();
        let removed: Vec<usize> = next
            .par_chunks_mut(block)
            .enumerate()
            .flat_map_iter(|(cell, out)| {
                let mut removed = Vec::new();
                for (slot, m) in out.iter_mut().enumerate() {
                    let s = cell * block + slot;
                    if *m && !self.viable(library, offsets, &self.member, s) {
                        *m = false;
                        removed.push(s);
                    }
                }
                removed
            })
            .collect();
        (next, removed)
    }

    /// States a further sweep would remove. Zero on a converged kernel.
    pub fn resweep_removals(&self, library: &PrimitiveLibrary) -> usize {
        self.sweep(library, &self.offsets(library)).1.len()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn headings(&self) -> usize {
        self.headings
    }

    pub fn region(&self) -> &KernelRegion {
        &self.region
    }

    pub fn member_count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn state_count(&self) -> usize {
        self.member.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_count() == 0
    }

    /// Grid state of a pose, if it lies on an in-region cell.
    fn locate(&self, pose: &CarPose) -> Option<usize> {
        let r = (pose.position() - self.region.origin) / self.region.cell_m;
        let mut ix = r.x.floor() as i64;
        let iy = r.y.floor() as i64;
        if self.region.periodic_x {
            ix = ix.rem_euclid(self.region.nx as i64);
        }
        if ix < 0 || iy < 0 || ix >= self.region.nx as i64 || iy >= self.region.ny as i64 || pose.mode >= self.modes {
            return None;
        }
        match self.xy_index[iy as usize * self.region.nx + ix as usize] {
            NOT_INSIDE => None,
            c => Some(self.state(c as usize, pose.mode, self.heading_bin(pose.phi))),
        }
    }

    /// Membership of the pose's cell; poses off the grid are not viable.
    pub fn prune(&self, pose: &CarPose) -> bool {
        self.locate(pose).is_some_and(|s| self.member[s])
    }

    /// Center pose of every member state, in storage order.
    pub fn member_poses(&self) -> impl Iterator<Item = CarPose> + '_ {
        self.member.iter().enumerate().filter(|(_, &m)| m).map(move |(s, _)| self.center_pose(s))
    }

    fn center_pose(&self, state: usize) -> CarPose {
        let h = state % self.headings;
        let q = (state / self.headings) % self.modes;
        let (ix, iy) = self.xy_cells[state / (self.headings * self.modes)];
        let c = self.region.origin + Vec2::new(ix as f64 + 0.5, iy as f64 + 0.5) * self.region.cell_m;
        CarPose::new(c.x, c.y, h as f64 * self.heading_width(), q)
    }

    /// Text format: a header of `key value` lines followed by run lengths of
    /// the in-region cell mask and of the membership array, each starting
    /// with a run of `false`.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        let r = &self.region;
        writeln!(w, "{FORMAT_TAG}")?;
        writeln!(w, "origin_m {:?} {:?}", r.origin.x, r.origin.y)?;
        writeln!(w, "cell_m {:?}", r.cell_m)?;
        writeln!(w, "cells {} {}", r.nx, r.ny)?;
        writeln!(w, "periodic_x {}", r.periodic_x)?;
        writeln!(w, "headings {}", self.headings)?;
        writeln!(w, "modes {}", self.modes)?;
        writeln!(w, "inflation {}", self.inflation)?;
        writeln!(w, "iterations {}", self.iterations)?;
        writeln!(w, "converged {}", self.converged)?;
        writeln!(w, "inside {}", rle(&r.inside))?;
        writeln!(w, "member {}", rle(&self.member))?;
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let mut next = |key: &str| -> Result<(u64, Vec<String>)> {
            let (k, line) = lines.next().ok_or_else(|| Error::parse(0, format!("missing `{key}`")))?;
            let line = line?;
            let lineno = k as u64 + 1;
            let mut parts = line.split_whitespace();
            if key == FORMAT_TAG {
                return if line.trim() == FORMAT_TAG {
                    Ok((lineno, Vec::new()))
                } else {
                    Err(Error::parse(lineno, "not a kernel file"))
                };
            }
            if parts.next() != Some(key) {
                return Err(Error::parse(lineno, format!("expected `{key}`")));
            }
            Ok((lineno, parts.map(str::to_string).collect()))
        };
        fn num<T: std::str::FromStr>(line: u64, s: Option<&String>) -> Result<T> {
            s.and_then(|v| v.parse().ok()).ok_or_else(|| Error::parse(line, "bad or missing number"))
        }
        next(FORMAT_TAG)?;
        let (l, v) = next("origin_m")?;
        let origin = Vec2::new(num(l, v.first())?, num(l, v.get(1))?);
        let (l, v) = next("cell_m")?;
        let cell_m: f64 = num(l, v.first())?;
        let (l, v) = next("cells")?;
        let (nx, ny): (usize, usize) = (num(l, v.first())?, num(l, v.get(1))?);
        let (l, v) = next("periodic_x")?;
        let periodic_x: bool = num(l, v.first())?;
        let (l, v) = next("headings")?;
        let headings: usize = num(l, v.first())?;
        let (l, v) = next("modes")?;
        let modes: usize = num(l, v.first())?;
        let (l, v) = next("inflation")?;
        let inflation: usize = num(l, v.first())?;
        let (l, v) = next("iterations")?;
        let iterations: usize = num(l, v.first())?;
        let (l, v) = next("converged")?;
        let converged: bool = num(l, v.first())?;
        let (l, v) = next("inside")?;
        let inside = unrle(l, &v, nx * ny)?;
        let region = KernelRegion {
            origin,
            cell_m,
            nx,
            ny,
            periodic_x,
            inside,
        };
        let mut kernel = GridKernel::full(region, modes, headings, inflation);
        let (l, v) = next("member")?;
        kernel.member = unrle(l, &v, kernel.member.len())?;
        kernel.iterations = iterations;
        kernel.converged = converged;
        Ok(kernel)
    }
}

impl Pruner for GridKernel {
    fn admits(&self, pose: &CarPose) -> bool {
        self.prune(pose)
    }
}

/// Rounds values within rounding noise of an integer, so that exactly
/// aligned displacements cover a single cell.
fn snap(u: f64) -> f64 {
    let r = u.round();
    if (u - r).abs() < 1e-9 {
        r
    } else {
        u
    }
}

fn rle(bits: &[bool]) -> String {
    let mut out = String::new();
    let mut current = false;
    let mut run = 0usize;
    for &b in bits {
        if b != current {
            write!(out, "{run} ").unwrap();
            current = b;
            run = 0;
        }
        run += 1;
    }
    write!(out, "{run}").unwrap();
    out
}

fn unrle(line: u64, runs: &[String], len: usize) -> Result<Vec<bool>> {
    let mut out = Vec::with_capacity(len);
    let mut value = false;
    for r in runs {
        let n: usize = r.parse().map_err(|_| Error::parse(line, format!("bad run length `{r}`")))?;
        out.extend(std::iter::repeat_n(value, n));
        value = !value;
    }
    if out.len() != len {
        return Err(Error::parse(line, format!("run lengths cover {} cells, expected {len}", out.len())));
    }
    Ok(out)
}

/// Some mode sequence of length `depth` keeps every endpoint in the track.
pub fn nstep_feasible_prune(track: &TrackModel, library: &PrimitiveLibrary, pose: &CarPose, depth: usize) -> bool {
    if depth == 0 {
        return true;
    }
    library.successors(pose.mode).iter().any(|&q| {
        let next = library.step(pose, q, track);
        track.in_track(&next) && nstep_feasible_prune(track, library, &next, depth - 1)
    })
}

/// Pruner accepting in-track poses with an in-track continuation of fixed
/// depth.
pub struct NStepPruner<'a> {
    pub track: &'a TrackModel,
    pub library: &'a PrimitiveLibrary,
    pub depth: usize,
}

impl Pruner for NStepPruner<'_> {
    fn admits(&self, pose: &CarPose) -> bool {
        self.track.in_track(pose) && nstep_feasible_prune(self.track, self.library, pose, self.depth)
    }
}

/// Follows the kernel from `start`: at every step the successor with the
/// largest progress among those landing on a member cell; if none does, the
/// slowest successor. Returns the visited poses including `start`.
pub fn greedy_rollout(
    kernel: &GridKernel,
    library: &PrimitiveLibrary,
    track: &TrackModel,
    start: CarPose,
    steps: usize,
) -> Vec<CarPose> {
    let mut out = vec![start];
    let mut pose = start;
    for _ in 0..steps {
        let options: Vec<(ModeId, CarPose)> =
            library.successors(pose.mode).iter().map(|&q| (q, library.step(&pose, q, track))).collect();
        let admitted = options
            .iter()
            .filter(|(_, p)| kernel.prune(p))
            .max_by(|a, b| track.progress(&a.1).total_cmp(&track.progress(&b.1)));
        pose = match admitted {
            Some(&(_, p)) => p,
            None => {
                options
                    .iter()
                    .min_by(|a, b| library.primitive(a.0).speed.total_cmp(&library.primitive(b.0).speed))
                    .unwrap()
                    .1
            }
        };
        out.push(pose);
    }
    out
}
