//! Run configuration: a TOML file whose keys carry their units, overridden
//! by command-line flags, validated before any work starts.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use racegame::game::{GameKind, GameParams};
use racegame::kernel::{GridKernel, GridSpec, KernelRegion};
use racegame::motion::{PrimitiveLibrary, Pruner};
use racegame::sim::Concept;
use racegame::track::TrackModel;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub track: TrackConfig,
    pub game: GameConfig,
    pub race: RaceSection,
    pub kernel: KernelConfig,
    pub cars: Vec<CarConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            track: TrackConfig::default(),
            game: GameConfig::default(),
            race: RaceSection::default(),
            kernel: KernelConfig::default(),
            cars: vec![
                CarConfig {
                    name: "aggressive".into(),
                    max_speed_mps: 3.5,
                    pruner: PrunerKind::Kernel,
                    kernel_file: None,
                    nstep_depth: 2,
                },
                CarConfig {
                    name: "cautious".into(),
                    max_speed_mps: 3.0,
                    pruner: PrunerKind::Kernel,
                    kernel_file: None,
                    nstep_depth: 2,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackKind {
    Miniature,
    Stadium,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackConfig {
    pub kind: TrackKind,
    pub halfwidth_m: f64,
    pub straight_m: f64,
    pub radius_m: f64,
    pub arc_pieces: usize,
    /// `x,y` rows in meters; required for `kind = "csv"`.
    pub centerline_csv: Option<PathBuf>,
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig {
            kind: TrackKind::Miniature,
            halfwidth_m: 0.2,
            straight_m: 3.0,
            radius_m: 1.0,
            arc_pieces: 48,
            centerline_csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameConfig {
    pub kind: GameKind,
    pub concept: Concept,
    pub kappa: f64,
    pub lambda: f64,
    /// Blocking reward; defaults per game kind when absent.
    pub w: Option<f64>,
    pub sigma: f64,
    pub soft: bool,
}

impl Default for GameConfig {
    fn default() -> Self {
        let p = GameParams::new(GameKind::Cooperative);
        GameConfig {
            kind: GameKind::Cooperative,
            concept: Concept::Stackelberg,
            kappa: p.kappa,
            lambda: p.lambda,
            w: None,
            sigma: p.sigma,
            soft: false,
        }
    }
}

impl GameConfig {
    pub fn params(&self) -> GameParams {
        let mut p = GameParams::new(self.kind);
        p.kappa = self.kappa;
        p.lambda = self.lambda;
        if let Some(w) = self.w {
            p.w = w;
        }
        p.sigma = self.sigma;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RaceSection {
    pub horizon: usize,
    pub duration_steps: usize,
    pub gap_min_m: f64,
    pub gap_max_m: f64,
    pub initial_speed_mps: f64,
    pub collision_threshold_m: f64,
    pub hold_steps: usize,
    pub perturbation_m: f64,
    pub substeps: usize,
}

impl Default for RaceSection {
    fn default() -> Self {
        RaceSection {
            horizon: 3,
            duration_steps: 250,
            gap_min_m: 0.0,
            gap_max_m: 0.2,
            initial_speed_mps: 0.5,
            collision_threshold_m: 0.01,
            hold_steps: 5,
            perturbation_m: 0.0,
            substeps: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub cell_m: f64,
    pub headings: usize,
    pub inflation: usize,
    pub max_iterations: usize,
    pub margin_m: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        KernelConfig {
            cell_m: g.cell_m,
            headings: g.headings,
            inflation: g.inflation,
            max_iterations: g.max_iterations,
            margin_m: g.margin_m,
        }
    }
}

impl KernelConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            cell_m: self.cell_m,
            headings: self.headings,
            inflation: self.inflation,
            max_iterations: self.max_iterations,
            margin_m: self.margin_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrunerKind {
    Kernel,
    Nstep,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarConfig {
    pub name: String,
    pub max_speed_mps: f64,
    pub pruner: PrunerKind,
    /// Precomputed kernel; computed on the fly when absent.
    #[serde(default)]
    pub kernel_file: Option<PathBuf>,
    #[serde(default = "default_depth")]
    pub nstep_depth: usize,
}

fn default_depth() -> usize {
    2
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            let at = line.map_or(String::new(), |l| format!(": line {l}"));
            CliError::Validation(format!("{}{at}: {}", path.display(), e.message()))
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if self.cars.len() != 2 {
            return bad(format!("exactly two cars are required, found {}", self.cars.len()));
        }
        for car in &self.cars {
            if !(car.max_speed_mps >= 0.5) {
                return bad(format!("car `{}`: max_speed_mps must be at least 0.5", car.name));
            }
        }
        if !(self.track.halfwidth_m >= 0.0) {
            return bad("track.halfwidth_m must be non-negative".into());
        }
        if self.track.kind == TrackKind::Csv && self.track.centerline_csv.is_none() {
            return bad("track.centerline_csv is required for kind = \"csv\"".into());
        }
        self.game.params().validate().map_err(CliError::from)?;
        Ok(())
    }

    pub fn build_track(&self) -> Result<TrackModel, CliError> {
        let t = &self.track;
        Ok(match t.kind {
            TrackKind::Miniature => TrackModel::miniature(t.halfwidth_m),
            TrackKind::Stadium => TrackModel::stadium(t.straight_m, t.radius_m, t.halfwidth_m, t.arc_pieces)?,
            TrackKind::Csv => {
                let path = t.centerline_csv.as_ref().expect("validated");
                let file = File::open(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
                TrackModel::from_csv_reader(file, t.halfwidth_m).map_err(|e| e.with_path(path))?
            }
        })
    }
}

/// A car's library and, if configured, its kernel.
pub struct CarAssets {
    pub library: PrimitiveLibrary,
    pub kernel: Option<GridKernel>,
    pub nstep_depth: Option<usize>,
}

impl CarAssets {
    pub fn build(car: &CarConfig, track: &TrackModel, kernel: &KernelConfig) -> Result<Self, CliError> {
        let library = PrimitiveLibrary::desk(car.max_speed_mps);
        let kernel = match (car.pruner, &car.kernel_file) {
            (PrunerKind::Kernel, Some(path)) => {
                let file = File::open(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
                let k = GridKernel::load(BufReader::new(file)).map_err(|e| e.with_path(path))?;
                if k.modes() != library.len() {
                    return Err(CliError::Validation(format!(
                        "{}: kernel has {} modes, car `{}` has {}",
                        path.display(),
                        k.modes(),
                        car.name,
                        library.len()
                    )));
                }
                Some(k)
            }
            (PrunerKind::Kernel, None) => {
                let spec = kernel.spec();
                Some(GridKernel::compute(KernelRegion::from_track(track, &spec), &library, &spec)?)
            }
            _ => None,
        };
        Ok(CarAssets {
            library,
            kernel,
            nstep_depth: (car.pruner == PrunerKind::Nstep).then_some(car.nstep_depth),
        })
    }

    pub fn pruner<'a>(&'a self, track: &'a TrackModel) -> Option<Box<dyn Pruner + 'a>> {
        if let Some(k) = &self.kernel {
            return Some(Box::new(KernelRef(k)));
        }
        self.nstep_depth.map(|depth| {
            Box::new(racegame::kernel::NStepPruner {
                track,
                library: &self.library,
                depth,
            }) as Box<dyn Pruner + 'a>
        })
    }
}

struct KernelRef<'a>(&'a GridKernel);

impl Pruner for KernelRef<'_> {
    fn admits(&self, pose: &racegame::track::CarPose) -> bool {
        self.0.admits(pose)
    }
}
