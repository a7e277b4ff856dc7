//! Front-end planning per leg, TEB refinement and the `plan` / `optimize`
//! commands.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::output::{
    band_csv, commands_csv, path_metrics, path_polyline, render_svg, trajectory_csv, write_atomic, write_json, RunReport,
    SvgLayers, TebSummary,
};
use super::{RunStatus, Scenario, ScenarioError, Waypoint};
use crate::costmap::Costmap;
use crate::geometry::rotate;
use crate::planner::{PathSample, PlanError, PlannerRegistry, TimedPath};
use crate::teb::{
    extract_commands, initialize_band, limit_excess, optimize, Band, Command, OptimizeReport, TebError, TebProblem, Twist,
};
use crate::Vec2;

/// Speed above which a path's velocity defines its heading.
const HEADING_SPEED: f64 = 0.05;

/// Standing still at one position.
#[derive(Debug, Clone)]
struct Hold {
    pos: Vec2,
    duration: f64,
}

impl TimedPath for Hold {
    fn duration(&self) -> f64 {
        self.duration
    }
    fn sample(&self, _: f64) -> PathSample {
        PathSample { pos: self.pos, vel: Vec2::zeros(), acc: Vec2::zeros() }
    }
    fn effort(&self) -> f64 {
        0.0
    }
    fn soft_cost(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Paths played one after another.
#[derive(Debug, Default, Clone)]
pub struct Composite {
    parts: Vec<Arc<dyn TimedPath>>,
    starts: Vec<f64>,
    total: f64,
}

impl Composite {
    pub fn push(&mut self, part: Arc<dyn TimedPath>) {
        self.starts.push(self.total);
        self.total += part.duration();
        self.parts.push(part);
    }

    pub fn parts(&self) -> &[Arc<dyn TimedPath>] {
        &self.parts
    }
}

impl TimedPath for Composite {
    fn duration(&self) -> f64 {
        self.total
    }

    fn sample(&self, t: f64) -> PathSample {
        if self.parts.is_empty() {
            return PathSample { pos: Vec2::zeros(), vel: Vec2::zeros(), acc: Vec2::zeros() };
        }
        let t = t.clamp(0.0, self.total);
        let k = self.starts.partition_point(|&s| s <= t).saturating_sub(1);
        self.parts[k].sample(t - self.starts[k])
    }

    fn effort(&self) -> f64 {
        self.parts.iter().map(|p| p.effort()).sum()
    }

    fn soft_cost(&self) -> Option<f64> {
        self.parts.iter().map(|p| p.soft_cost()).sum()
    }
}

/// Direction of travel near the start (`from_end = false`) or the end of a
/// path, if it ever moves faster than a crawl.
pub fn motion_heading(path: &dyn TimedPath, from_end: bool) -> Option<f64> {
    let total = path.duration();
    let steps = (total / 0.02).ceil() as usize;
    (0..=steps)
        .map(|k| {
            let t = (k as f64 * 0.02).min(total);
            if from_end {
                total - t
            } else {
                t
            }
        })
        .map(|t| path.sample(t).vel)
        .find(|v| v.norm() > HEADING_SPEED)
        .map(|v| v.y.atan2(v.x))
}

pub struct LegPlan {
    pub from: Waypoint,
    pub to: Waypoint,
    pub path: Arc<dyn TimedPath>,
    pub expansions: usize,
}

pub struct PlanRun {
    pub status: RunStatus,
    pub message: Option<String>,
    pub legs: Vec<LegPlan>,
    /// Every leg followed by its dwell, when all legs succeeded.
    pub path: Option<Composite>,
    pub expansions: usize,
    pub planning_ms: f64,
}

/// Plans every leg between consecutive stops with the scenario's planner.
pub fn run_plan(sc: &Scenario, cm: &Costmap) -> Result<PlanRun, ScenarioError> {
    let registry = PlannerRegistry::with_builtins();
    let planner =
        registry.create(&sc.planner, &sc.planner_settings).map_err(|e| ScenarioError::Config(e.to_string()))?;
    let stops = sc.stops();
    let clock = Instant::now();
    let mut legs = Vec::new();
    let mut expansions = 0;
    for (k, w) in stops.windows(2).enumerate() {
        match planner.plan(&w[0].state(), &w[1].state(), cm) {
            Ok(out) => {
                expansions += out.expansions;
                legs.push(LegPlan {
                    from: w[0].clone(),
                    to: w[1].clone(),
                    path: Arc::from(out.path),
                    expansions: out.expansions,
                });
            }
            Err(PlanError::InvalidConfig(m)) => return Err(ScenarioError::Config(m)),
            Err(e) => {
                if let PlanError::NoPath { expansions: n, .. } = e {
                    expansions += n;
                }
                return Ok(PlanRun {
                    status: RunStatus::NoPath,
                    message: Some(format!("no_path on leg {k}: {e}")),
                    legs,
                    path: None,
                    expansions,
                    planning_ms: clock.elapsed().as_secs_f64() * 1e3,
                });
            }
        }
    }
    let mut path = Composite::default();
    for leg in &legs {
        path.push(leg.path.clone());
        if leg.to.dwell_s > 0.0 {
            let end = leg.path.sample(leg.path.duration()).pos;
            path.push(Arc::new(Hold { pos: end, duration: leg.to.dwell_s }));
        }
    }
    Ok(PlanRun {
        status: RunStatus::Ok,
        message: None,
        legs,
        path: Some(path),
        expansions,
        planning_ms: clock.elapsed().as_secs_f64() * 1e3,
    })
}

pub struct LegBand {
    pub initial: Band,
    pub report: OptimizeReport,
    pub commands: Vec<Command>,
    pub start_heading: f64,
    pub goal_heading: f64,
}

pub struct OptimizeRun {
    pub plan: PlanRun,
    pub status: RunStatus,
    pub message: Option<String>,
    pub legs: Vec<LegBand>,
    /// Commands of every leg, with zero-velocity commands for dwells.
    pub commands: Vec<Command>,
    pub pre_teb_duration: Option<f64>,
    pub post_teb_duration: Option<f64>,
    pub teb_ms: f64,
}

/// Body-frame velocity of a world-frame velocity seen from `heading`.
pub fn body_twist(world_vel: Vec2, heading: f64, omega: f64) -> Twist {
    let v = rotate(world_vel, -heading);
    Twist { v_x: v.x, v_y: v.y, omega }
}

/// Refines one front-end path into a band between the given headings.
pub fn refine_path(
    sc: &Scenario,
    cm: &Costmap,
    path: &dyn TimedPath,
    start_heading: f64,
    goal_heading: f64,
    start_twist: Twist,
    goal_twist: Twist,
) -> Result<(Band, OptimizeReport), TebError> {
    let cfg = &sc.teb.config;
    let band = initialize_band(path, cfg.dt_ref, start_heading, goal_heading);
    let problem = TebProblem::new(cm, sc.omni_limits, sc.teb.weights)
        .with_via_points(sc.attractors())
        .with_boundary_velocities(Some(start_twist), Some(goal_twist));
    let report = optimize(&problem, &band, cfg)?;
    Ok((band, report))
}

/// Plans every leg, then refines each into a band and body-frame commands.
pub fn run_optimize(sc: &Scenario, cm: &Costmap) -> Result<OptimizeRun, ScenarioError> {
    let plan = run_plan(sc, cm)?;
    let mut run = OptimizeRun {
        status: plan.status,
        message: plan.message.clone(),
        legs: Vec::new(),
        commands: Vec::new(),
        pre_teb_duration: plan.path.as_ref().map(|p| p.duration()),
        post_teb_duration: None,
        teb_ms: 0.0,
        plan,
    };
    if run.status != RunStatus::Ok {
        return Ok(run);
    }
    let clock = Instant::now();
    let mut heading: Option<f64> = None;
    let mut total = 0.0;
    for (k, leg) in run.plan.legs.iter().enumerate() {
        let path = &*leg.path;
        let hs = leg.from.theta_rad.or(heading).or_else(|| motion_heading(path, false)).unwrap_or(0.0);
        let hg = leg.to.theta_rad.or_else(|| motion_heading(path, true)).unwrap_or(hs);
        heading = Some(hg);
        let st = body_twist(leg.from.state().vel, hs, 0.0);
        let gt = body_twist(leg.to.state().vel, hg, 0.0);
        match refine_path(sc, cm, path, hs, hg, st, gt) {
            Ok((initial, report)) => {
                let commands = extract_commands(&report.band);
                total += report.band.total_time();
                run.commands.extend_from_slice(&commands);
                if leg.to.dwell_s > 0.0 {
                    total += leg.to.dwell_s;
                    run.commands.push(Command { v_x: 0.0, v_y: 0.0, omega: 0.0, duration: leg.to.dwell_s });
                }
                run.legs.push(LegBand { initial, report, commands, start_heading: hs, goal_heading: hg });
            }
            Err(e) => {
                run.status = RunStatus::SolverAbort;
                run.message = Some(format!("solver abort on leg {k}: {e}"));
                run.teb_ms = clock.elapsed().as_secs_f64() * 1e3;
                return Ok(run);
            }
        }
    }
    run.post_teb_duration = Some(total);
    run.teb_ms = clock.elapsed().as_secs_f64() * 1e3;
    Ok(run)
}

#[derive(Serialize)]
struct Timing {
    planning_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    teb_ms: Option<f64>,
}

fn prepare_out_dir(out: &Path) -> Result<(), ScenarioError> {
    fs::create_dir_all(out).map_err(|source| ScenarioError::Write { path: out.to_path_buf(), source })
}

fn plan_report(command: &str, sc: &Scenario, cm: &Costmap, plan: &PlanRun) -> RunReport {
    let mut r = RunReport::new(command, &sc.name, &sc.planner, plan.status);
    r.message = plan.message.clone();
    r.legs = plan.legs.len();
    r.expansions = plan.expansions;
    if let Some(path) = &plan.path {
        let m = path_metrics(path, cm);
        r.total_duration_s = Some(path.duration());
        r.effort = Some(path.effort());
        r.soft_cost = path.soft_cost();
        r.min_clearance_m = Some(m.min_clearance);
        r.path_length_m = Some(m.path_length);
        r.lethal_samples = Some(m.lethal_samples);
    }
    r
}

fn base_layers(sc: &Scenario) -> SvgLayers {
    let mut layers = SvgLayers::default();
    layers.markers.push((sc.start.position(), 0.12, "#2e7d32"));
    layers.markers.push((sc.goal.position(), 0.12, "#c62828"));
    for v in &sc.via_points {
        layers.markers.push((v.position(), 0.08, "#6a1b9a"));
    }
    layers
}

/// Front-end only: writes `report.json`, `timing.json`, `trajectory.csv`
/// and `plan.svg` into `out`.
pub fn cmd_plan(sc: &Scenario, out: &Path) -> Result<RunReport, ScenarioError> {
    prepare_out_dir(out)?;
    let cm = sc.costmap()?;
    let plan = run_plan(sc, &cm)?;
    let mut report = plan_report("plan", sc, &cm, &plan);
    let mut layers = base_layers(sc);
    if let Some(path) = &plan.path {
        let (csv, rows) = trajectory_csv(path);
        report.trajectory_samples = rows;
        write_atomic(&out.join("trajectory.csv"), csv.as_bytes())?;
        layers.paths.push((path_polyline(path), "#1565c0"));
    }
    write_atomic(&out.join("plan.svg"), render_svg(&cm, &layers).as_bytes())?;
    write_json(&out.join("report.json"), &report)?;
    write_json(&out.join("timing.json"), &Timing { planning_ms: plan.planning_ms, teb_ms: None })?;
    Ok(report)
}

/// Front-end plus TEB: additionally writes `commands.csv` and one
/// `band_<leg>.csv` per leg.
pub fn cmd_optimize(sc: &Scenario, out: &Path) -> Result<RunReport, ScenarioError> {
    prepare_out_dir(out)?;
    let cm = sc.costmap()?;
    let run = run_optimize(sc, &cm)?;
    let mut report = plan_report("optimize", sc, &cm, &run.plan);
    report.status = run.status;
    report.message = run.message.clone();
    report.pre_teb_duration_s = run.pre_teb_duration;
    report.post_teb_duration_s = run.post_teb_duration;
    report.total_duration_s = run.post_teb_duration.or(report.total_duration_s);
    let mut layers = base_layers(sc);
    if let Some(path) = &run.plan.path {
        let (csv, rows) = trajectory_csv(path);
        report.trajectory_samples = rows;
        write_atomic(&out.join("trajectory.csv"), csv.as_bytes())?;
        layers.paths.push((path_polyline(path), "#1565c0"));
    }
    for (k, leg) in run.legs.iter().enumerate() {
        let band = &leg.report.band;
        report.teb.push(TebSummary {
            poses: band.len(),
            outer_iterations: leg.report.outer_iterations,
            accepted_steps: leg.report.accepted_steps,
            converged: leg.report.converged,
            max_limit_excess: limit_excess(band, &sc.omni_limits),
            min_clearance_m: band
                .poses
                .iter()
                .map(|p| cm.distance_at(p.position()).distance - sc.inflation.inscribed_radius)
                .fold(f64::INFINITY, f64::min),
        });
        write_atomic(&out.join(format!("band_{k}.csv")), band_csv(band).as_bytes())?;
        layers.bands.push((band.clone(), "#ef6c00"));
    }
    if run.status == RunStatus::Ok {
        report.commands = Some(run.commands.len());
        write_atomic(&out.join("commands.csv"), commands_csv(&run.commands).as_bytes())?;
    }
    write_atomic(&out.join("plan.svg"), render_svg(&cm, &layers).as_bytes())?;
    write_json(&out.join("report.json"), &report)?;
    write_json(&out.join("timing.json"), &Timing { planning_ms: run.plan.planning_ms, teb_ms: Some(run.teb_ms) })?;
    Ok(report)
}
