//! Scenario files and the plan / optimize / bench / simulate workflows.
//!
//! A scenario is one JSON document. Every physical quantity carries its
//! unit in the field name (`x_m`, `v_x_max_mps`, `dt_ref_s`, ...). Relative
//! paths inside it (PGM maps) resolve against the scenario file's
//! directory.
//!
//! Each workflow returns a [`RunReport`] plus the artifacts it wrote. The
//! report is a pure function of the scenario and seed; wall-clock
//! measurements go to a separate `timing.json`.

mod bench;
mod output;
mod pipeline;
mod sim;

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costmap::{load_pgm, Costmap, CostmapError, InflationParams, OccupancyGrid};
use crate::planner::PlannerSettings;
use crate::primitives::State;
use crate::teb::{OmniLimits, TebConfig, TebWeights};
use crate::Vec2;

pub use bench::{bench_csv, cmd_bench, effort_wins, run_bench, sample_pairs, BenchRow};
pub use output::{path_metrics, render_svg, trajectory_csv, write_atomic, PathMetrics, RunReport, SimSummary, SvgLayers, TebSummary};
pub use pipeline::{cmd_optimize, cmd_plan, run_optimize, run_plan, Composite, OptimizeRun, PlanRun};
pub use sim::{cmd_simulate, run_simulation, world_at, PlanLog, SimOptions, SimRun, TraceRow};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Map(#[from] CostmapError),
}

/// Process exit code for each run status.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const NO_PATH: i32 = 2;
    pub const SOLVER_ABORT: i32 = 3;
    pub const COLLISION: i32 = 4;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    NoPath,
    SolverAbort,
    Collision,
    /// The simulation horizon elapsed before the goal was reached.
    Timeout,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => exit_code::OK,
            RunStatus::NoPath | RunStatus::Timeout => exit_code::NO_PATH,
            RunStatus::SolverAbort => exit_code::SOLVER_ABORT,
            RunStatus::Collision => exit_code::COLLISION,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Rect { min_m: [f64; 2], max_m: [f64; 2] },
    Disc { center_m: [f64; 2], radius_m: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSource {
    /// Gray image; row 0 is the grid row at the origin.
    Pgm {
        path: PathBuf,
        resolution_m: f64,
        #[serde(default)]
        origin_m: [f64; 2],
        /// Occupancy probability above which a pixel is an obstacle;
        /// darker pixels are more likely occupied.
        #[serde(default = "default_occupied_threshold")]
        occupied_threshold: f64,
    },
    /// Free rectangle with optional obstacle shapes.
    Empty {
        width_m: f64,
        height_m: f64,
        resolution_m: f64,
        #[serde(default)]
        origin_m: [f64; 2],
        #[serde(default)]
        obstacles: Vec<Shape>,
    },
    /// Seeded random polygon obstacles on a square map.
    Polygons { size_m: f64, resolution_m: f64, obstacles: usize, seed: u64 },
}

fn default_occupied_threshold() -> f64 {
    0.65
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub x_m: f64,
    pub y_m: f64,
    /// Heading to hold here; the motion direction is used when absent.
    #[serde(default)]
    pub theta_rad: Option<f64>,
    #[serde(default)]
    pub vx_mps: f64,
    #[serde(default)]
    pub vy_mps: f64,
    /// Time to stay at rest after arriving.
    #[serde(default)]
    pub dwell_s: f64,
    /// Via points only: attract the band instead of stopping here.
    #[serde(default)]
    pub pass_through: bool,
}

impl Waypoint {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x_m, self.y_m)
    }

    pub fn state(&self) -> State {
        State::new(self.x_m, self.y_m, self.vx_mps, self.vy_mps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulePoint {
    pub t_s: f64,
    pub x_m: f64,
    pub y_m: f64,
}

/// Disc moving along a piecewise-linear schedule; it rests at the first
/// point before the schedule starts and at the last point after it ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicObstacle {
    pub radius_m: f64,
    pub schedule: Vec<SchedulePoint>,
}

impl DynamicObstacle {
    pub fn position_at(&self, t: f64) -> Vec2 {
        let s = &self.schedule;
        let first = &s[0];
        if t <= first.t_s {
            return Vec2::new(first.x_m, first.y_m);
        }
        for w in s.windows(2) {
            if t <= w[1].t_s {
                let f = (t - w[0].t_s) / (w[1].t_s - w[0].t_s);
                return Vec2::new(w[0].x_m + f * (w[1].x_m - w[0].x_m), w[0].y_m + f * (w[1].y_m - w[0].y_m));
            }
        }
        let last = s.last().expect("validated non-empty schedule");
        Vec2::new(last.x_m, last.y_m)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TebSettings {
    pub weights: TebWeights,
    pub config: TebConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    pub trials: usize,
    pub seed: u64,
    /// Required obstacle distance of sampled endpoints.
    pub min_clearance_m: f64,
    /// Required distance between a sampled start and goal.
    pub min_separation_m: f64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self { trials: 4, seed: 1, min_clearance_m: 0.6, min_separation_m: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub replan_hz: f64,
    pub horizon_s: f64,
    pub goal_tolerance_m: f64,
    /// Rate of rows in the simulation trace.
    pub trace_hz: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { replan_hz: 2.0, horizon_s: 120.0, goal_tolerance_m: 0.1, trace_hz: 20.0 }
    }
}

fn default_planner() -> String {
    "kinodynamic_astar".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub map: MapSource,
    #[serde(default)]
    pub inflation: InflationParams,
    pub start: Waypoint,
    pub goal: Waypoint,
    #[serde(default)]
    pub via_points: Vec<Waypoint>,
    /// Registry name of the front-end planner.
    #[serde(default = "default_planner")]
    pub planner: String,
    #[serde(default)]
    pub planner_settings: PlannerSettings,
    #[serde(default)]
    pub omni_limits: OmniLimits,
    #[serde(default)]
    pub teb: TebSettings,
    #[serde(default)]
    pub dynamic_obstacles: Vec<DynamicObstacle>,
    #[serde(default)]
    pub bench: BenchSettings,
    #[serde(default)]
    pub simulation: SimSettings,
    /// Directory that relative map paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, ScenarioError> {
        let mut sc: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
        sc.base_dir = base_dir.to_path_buf();
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Read { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let cfg = |m: String| Err(ScenarioError::Config(m));
        self.inflation.validate()?;
        self.planner_settings.search.validate().or_else(|m| cfg(format!("search: {m}")))?;
        self.omni_limits.validate().or_else(|m| cfg(format!("omni_limits: {m}")))?;
        self.teb.weights.validate().or_else(|m| cfg(format!("teb.weights: {m}")))?;
        self.teb.config.validate().or_else(|m| cfg(format!("teb.config: {m}")))?;
        let finite = |w: &Waypoint| {
            [w.x_m, w.y_m, w.vx_mps, w.vy_mps, w.dwell_s, w.theta_rad.unwrap_or(0.0)].iter().all(|v| v.is_finite())
                && w.dwell_s >= 0.0
        };
        if !finite(&self.start) || !finite(&self.goal) || !self.via_points.iter().all(finite) {
            return cfg("waypoints must be finite with non-negative dwell".into());
        }
        for (k, o) in self.dynamic_obstacles.iter().enumerate() {
            let increasing = o.schedule.windows(2).all(|w| w[1].t_s > w[0].t_s);
            if o.schedule.is_empty() || !increasing || !(o.radius_m > 0.0) {
                return cfg(format!("dynamic obstacle {k}: need a positive radius and a time-ordered schedule"));
            }
        }
        let s = &self.simulation;
        if !(s.replan_hz > 0.0 && s.horizon_s > 0.0 && s.goal_tolerance_m > 0.0 && s.trace_hz > 0.0) {
            return cfg("simulation rates, horizon and tolerance must be positive".into());
        }
        Ok(())
    }

    /// Static occupancy grid described by `map`.
    pub fn load_grid(&self) -> Result<OccupancyGrid, ScenarioError> {
        match &self.map {
            MapSource::Pgm { path, resolution_m, origin_m, occupied_threshold } => {
                if !(0.0..=1.0).contains(occupied_threshold) {
                    return Err(ScenarioError::Config("occupied_threshold must lie in [0, 1]".into()));
                }
                let full = self.base_dir.join(path);
                let bytes = fs::read(&full).map_err(|source| ScenarioError::Read { path: full.clone(), source })?;
                let gray = ((1.0 - occupied_threshold) * 255.0).floor() as u8;
                Ok(load_pgm(&bytes, gray, *resolution_m)?.with_origin(Vec2::new(origin_m[0], origin_m[1])))
            }
            MapSource::Empty { width_m, height_m, resolution_m, origin_m, obstacles } => {
                let (w, h) = ((width_m / resolution_m).round() as usize, (height_m / resolution_m).round() as usize);
                let mut g = OccupancyGrid::new(w, h, *resolution_m, Vec2::new(origin_m[0], origin_m[1]))?;
                for s in obstacles {
                    match s {
                        Shape::Rect { min_m, max_m } => {
                            g.fill_rect(Vec2::new(min_m[0], min_m[1]), Vec2::new(max_m[0], max_m[1]))
                        }
                        Shape::Disc { center_m, radius_m } => {
                            g.stamp_disc(Vec2::new(center_m[0], center_m[1]), *radius_m)
                        }
                    }
                }
                Ok(g)
            }
            MapSource::Polygons { size_m, resolution_m, obstacles, seed } => {
                if !(*size_m > 2.0 && *resolution_m > 0.0) {
                    return Err(ScenarioError::Config("polygon map needs size_m > 2 and resolution_m > 0".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(crate::synth::polygon_map(&mut rng, *size_m, *resolution_m, *obstacles))
            }
        }
    }

    pub fn costmap(&self) -> Result<Costmap, ScenarioError> {
        Ok(Costmap::new(self.load_grid()?, self.inflation)?)
    }

    /// Via points the band is attracted to without stopping.
    pub fn attractors(&self) -> Vec<Vec2> {
        self.via_points.iter().filter(|v| v.pass_through).map(Waypoint::position).collect()
    }

    /// Start, every stopping via point and the goal, in order.
    pub fn stops(&self) -> Vec<Waypoint> {
        let mut out = vec![self.start.clone()];
        out.extend(self.via_points.iter().filter(|v| !v.pass_through).map(|v| Waypoint {
            vx_mps: 0.0,
            vy_mps: 0.0,
            ..v.clone()
        }));
        out.push(self.goal.clone());
        out
    }
}
