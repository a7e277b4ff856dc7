//! Receding-horizon simulation among moving disc obstacles.
//!
//! The simulated robot tracks the latest band exactly: during interval `i`
//! it moves along the straight chord from pose `i` to pose `i + 1` while
//! its heading turns at a constant rate. At every replanning instant the
//! moving obstacles are rasterized into a copy of the static map, the
//! costmap is rebuilt and the full front-end plus TEB pipeline runs again
//! from the robot's current position, velocity and heading. Obstacles are
//! seen as static snapshots; the planner never predicts their motion.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::output::{render_svg, write_atomic, write_json, RunReport, SimSummary, SvgLayers};
use super::pipeline::{body_twist, refine_path};
use super::{RunStatus, Scenario, ScenarioError};
use crate::costmap::{Costmap, OccupancyGrid};
use crate::geometry::{rotate, wrap_angle};
use crate::planner::{PlanError, PlannerRegistry};
use crate::primitives::State;
use crate::teb::{extract_commands, Band, Command, Pose};
use crate::Vec2;

/// Length of one integration step, seconds.
const SIM_STEP: f64 = 0.01;

/// Speed below which the robot counts as stopped.
const REST_SPEED: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub replan_hz: f64,
    pub horizon_s: f64,
}

impl SimOptions {
    pub fn from_scenario(sc: &Scenario) -> Self {
        Self { replan_hz: sc.simulation.replan_hz, horizon_s: sc.simulation.horizon_s }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
    pub event: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanLog {
    pub t: f64,
    pub ok: bool,
    pub start: State,
    pub heading: f64,
    pub band_time: Option<f64>,
    pub message: Option<String>,
}

pub struct SimRun {
    pub status: RunStatus,
    pub message: Option<String>,
    pub trace: Vec<TraceRow>,
    pub plans: Vec<PlanLog>,
    pub summary: SimSummary,
    /// Bands produced by successful replans, in order.
    pub bands: Vec<Band>,
}

/// What the robot is doing right now.
#[derive(Clone, Debug)]
enum Motion {
    /// Executing `cmds[0]`, which began at `origin`, for `elapsed` seconds.
    Track { cmds: Vec<Command>, origin: Pose, elapsed: f64 },
    /// Braking in a straight line from `origin` with initial world
    /// velocity `vel` at `decel`.
    Brake { origin: Pose, vel: Vec2, decel: f64, elapsed: f64 },
    Idle,
}

struct Robot {
    pose: Pose,
    vel: Vec2,
    omega: f64,
    motion: Motion,
}

impl Robot {
    fn state(&self) -> State {
        State { pos: self.pose.position(), vel: self.vel }
    }

    fn is_idle(&self) -> bool {
        matches!(self.motion, Motion::Idle)
    }

    /// Advances by `dt`, crossing command boundaries as needed.
    fn advance(&mut self, mut dt: f64) {
        while dt > 0.0 {
            match &mut self.motion {
                Motion::Idle => {
                    self.vel = Vec2::zeros();
                    self.omega = 0.0;
                    return;
                }
                Motion::Track { cmds, origin, elapsed } => {
                    let c = cmds[0];
                    let h = dt.min(c.duration - *elapsed);
                    *elapsed += h;
                    dt -= h;
                    let world = rotate(Vec2::new(c.v_x, c.v_y), origin.theta);
                    let p = origin.position() + world * *elapsed;
                    self.pose = Pose::new(p.x, p.y, origin.theta + c.omega * *elapsed);
                    self.vel = world;
                    self.omega = c.omega;
                    if *elapsed >= c.duration - 1e-12 {
                        let end = self.pose;
                        cmds.remove(0);
                        if cmds.is_empty() {
                            self.motion = Motion::Idle;
                            self.vel = Vec2::zeros();
                            self.omega = 0.0;
                        } else {
                            *origin = end;
                            *elapsed = 0.0;
                        }
                    }
                }
                Motion::Brake { origin, vel, decel, elapsed } => {
                    let speed = vel.norm();
                    let stop = speed / *decel;
                    let h = dt.min(stop - *elapsed);
                    *elapsed += h;
                    dt -= h;
                    let dir = if speed > 0.0 { *vel / speed } else { Vec2::zeros() };
                    let s = speed * *elapsed - 0.5 * *decel * *elapsed * *elapsed;
                    let p = origin.position() + dir * s;
                    self.pose = Pose::new(p.x, p.y, origin.theta);
                    self.vel = dir * (speed - *decel * *elapsed).max(0.0);
                    self.omega = 0.0;
                    if *elapsed >= stop - 1e-12 {
                        self.motion = Motion::Idle;
                        self.vel = Vec2::zeros();
                    }
                }
            }
        }
    }
}

/// Static map plus every moving disc at time `t`.
pub fn world_at(sc: &Scenario, static_grid: &OccupancyGrid, t: f64) -> OccupancyGrid {
    let mut g = static_grid.clone();
    for o in &sc.dynamic_obstacles {
        g.stamp_disc(o.position_at(t), o.radius_m);
    }
    g
}

/// Whether the robot footprint at `p` touches a static lethal cell or a
/// moving disc at time `t`.
fn in_contact(sc: &Scenario, static_cm: &Costmap, p: Vec2, t: f64) -> bool {
    let l1 = sc.inflation.inscribed_radius;
    static_cm.is_lethal(p) || sc.dynamic_obstacles.iter().any(|o| (o.position_at(t) - p).norm() < o.radius_m + l1)
}

/// Runs the replanning loop until the goal is reached, the robot touches
/// an obstacle, or the horizon elapses.
pub fn run_simulation(sc: &Scenario, opts: &SimOptions) -> Result<SimRun, ScenarioError> {
    if !(opts.replan_hz > 0.0 && opts.horizon_s > 0.0) {
        return Err(ScenarioError::Config("replan rate and horizon must be positive".into()));
    }
    let static_grid = sc.load_grid()?;
    let static_cm = Costmap::new(static_grid.clone(), sc.inflation)?;
    let registry = PlannerRegistry::with_builtins();
    let planner =
        registry.create(&sc.planner, &sc.planner_settings).map_err(|e| ScenarioError::Config(e.to_string()))?;
    let goal = sc.goal.state();
    let goal_heading = sc.goal.theta_rad;
    let period = 1.0 / opts.replan_hz;
    let trace_dt = 1.0 / sc.simulation.trace_hz;
    let tol = sc.simulation.goal_tolerance_m;

    let start = sc.start.state();
    let mut robot = Robot {
        pose: Pose::new(start.pos.x, start.pos.y, sc.start.theta_rad.unwrap_or(0.0)),
        vel: start.vel,
        omega: 0.0,
        motion: Motion::Idle,
    };
    let mut trace = Vec::new();
    let mut plans = Vec::new();
    let mut bands = Vec::new();
    let mut max_start_error: f64 = 0.0;
    let mut last_plan_ok = false;
    let mut last_plan_world: Option<Vec<Vec2>> = None;
    let mut t = 0.0;
    let mut next_trace = 0.0;
    let mut status = None;
    let mut message = None;
    let mut collision = None;
    let row = |robot: &Robot, t: f64, event: &'static str| TraceRow {
        t,
        x: robot.pose.x,
        y: robot.pose.y,
        theta: robot.pose.theta,
        vx: robot.vel.x,
        vy: robot.vel.y,
        omega: robot.omega,
        event,
    };

    'outer: while status.is_none() {
        if in_contact(sc, &static_cm, robot.pose.position(), t) {
            trace.push(row(&robot, t, "collision"));
            collision = Some((t, robot.pose.position()));
            status = Some(RunStatus::Collision);
            break;
        }
        if (robot.pose.position() - goal.pos).norm() <= tol && robot.vel.norm() <= REST_SPEED && robot.is_idle() {
            trace.push(row(&robot, t, "goal"));
            status = Some(RunStatus::Ok);
            break;
        }
        if t >= opts.horizon_s - 1e-9 {
            if last_plan_ok {
                status = Some(RunStatus::Timeout);
                message = Some(format!("goal not reached within {:.1} s", opts.horizon_s));
            } else {
                status = Some(RunStatus::NoPath);
                message = plans.last().and_then(|p: &PlanLog| p.message.clone());
            }
            break;
        }

        let snapshot: Vec<Vec2> = sc.dynamic_obstacles.iter().map(|o| o.position_at(t)).collect();
        let world_changed = last_plan_world.as_ref() != Some(&snapshot);
        // A failed search from the same state in the same world fails again.
        let retry_pointless = !last_plan_ok && plans.last().is_some_and(|p: &PlanLog| p.start == robot.state());
        if world_changed || (!last_plan_ok && !retry_pointless) {
            let cm = Costmap::new(world_at(sc, &static_grid, t), sc.inflation)?;
            let state = robot.state();
            let heading = robot.pose.theta;
            let outcome = planner.plan(&state, &goal, &cm);
            let log = match outcome {
                Ok(out) => {
                    let first = out.path.sample(0.0);
                    max_start_error =
                        max_start_error.max((first.pos - state.pos).amax()).max((first.vel - state.vel).amax());
                    let hg = goal_heading
                        .or_else(|| super::pipeline::motion_heading(&*out.path, true))
                        .unwrap_or(heading);
                    let st = body_twist(state.vel, heading, robot.omega);
                    let gt = body_twist(goal.vel, hg, 0.0);
                    match refine_path(sc, &cm, &*out.path, heading, hg, st, gt) {
                        Ok((_, report)) => {
                            let cmds = extract_commands(&report.band);
                            let band_time = report.band.total_time();
                            bands.push(report.band);
                            robot.motion = Motion::Track { cmds, origin: robot.pose, elapsed: 0.0 };
                            PlanLog { t, ok: true, start: state, heading, band_time: Some(band_time), message: None }
                        }
                        Err(e) => PlanLog { t, ok: false, start: state, heading, band_time: None, message: Some(e.to_string()) },
                    }
                }
                Err(PlanError::InvalidConfig(m)) => return Err(ScenarioError::Config(m)),
                Err(e) => PlanLog { t, ok: false, start: state, heading, band_time: None, message: Some(e.to_string()) },
            };
            last_plan_ok = log.ok;
            last_plan_world = Some(snapshot);
            if !log.ok {
                let speed = robot.vel.norm();
                robot.motion = if speed > 0.0 {
                    Motion::Brake { origin: robot.pose, vel: robot.vel, decel: sc.omni_limits.a_x_max, elapsed: 0.0 }
                } else {
                    Motion::Idle
                };
            }
            trace.push(row(&robot, t, if log.ok { "replan" } else { "replan_failed" }));
            plans.push(log);
        }

        let end = (t + period).min(opts.horizon_s);
        while t < end - 1e-12 {
            let h = SIM_STEP.min(end - t);
            robot.advance(h);
            t += h;
            if t >= next_trace - 1e-12 {
                trace.push(row(&robot, t, ""));
                next_trace += trace_dt;
            }
            if in_contact(sc, &static_cm, robot.pose.position(), t) {
                trace.push(row(&robot, t, "collision"));
                collision = Some((t, robot.pose.position()));
                status = Some(RunStatus::Collision);
                break 'outer;
            }
            if robot.is_idle() && (robot.pose.position() - goal.pos).norm() <= tol {
                trace.push(row(&robot, t, "goal"));
                status = Some(RunStatus::Ok);
                break 'outer;
            }
        }
    }
    let status = status.expect("loop exits with a status");
    if let Some((tc, p)) = collision {
        message = Some(format!("collision at t = {tc:.2} s, ({:.3}, {:.3})", p.x, p.y));
    }
    let failed = plans.iter().filter(|p| !p.ok).count();
    let summary = SimSummary {
        replans: plans.len(),
        failed_replans: failed,
        elapsed_s: t,
        goal_reached: status == RunStatus::Ok,
        max_replan_start_error: max_start_error,
        collision_time_s: collision.map(|c| c.0),
        collision_position_m: collision.map(|c| [c.1.x, c.1.y]),
    };
    Ok(SimRun { status, message, trace, plans, summary, bands })
}

fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("t,x,y,theta,vx,vy,omega,event\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            r.t,
            r.x,
            r.y,
            wrap_angle(r.theta),
            r.vx,
            r.vy,
            r.omega,
            r.event
        );
    }
    s
}

fn plans_csv(plans: &[PlanLog]) -> String {
    let mut s = String::from("t,ok,x,y,vx,vy,theta,band_time_s,message\n");
    for p in plans {
        let _ = writeln!(
            s,
            "{:.3},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            p.t,
            p.ok,
            p.start.pos.x,
            p.start.pos.y,
            p.start.vel.x,
            p.start.vel.y,
            p.heading,
            p.band_time.map(|v| format!("{v:.4}")).unwrap_or_default(),
            p.message.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    s
}

#[derive(Serialize)]
struct SimTiming {
    wall_ms: f64,
}

/// Writes `sim_trace.csv`, `sim_plans.csv`, `plan.svg`, `report.json` and
/// `timing.json`.
pub fn cmd_simulate(sc: &Scenario, out: &Path, opts: &SimOptions) -> Result<RunReport, ScenarioError> {
    std::fs::create_dir_all(out).map_err(|source| ScenarioError::Write { path: out.to_path_buf(), source })?;
    let clock = std::time::Instant::now();
    let run = run_simulation(sc, opts)?;
    let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
    write_atomic(&out.join("sim_trace.csv"), trace_csv(&run.trace).as_bytes())?;
    write_atomic(&out.join("sim_plans.csv"), plans_csv(&run.plans).as_bytes())?;
    let mut report = RunReport::new("simulate", &sc.name, &sc.planner, run.status);
    report.message = run.message.clone();
    report.total_duration_s = Some(run.summary.elapsed_s);
    report.trajectory_samples = run.trace.len();
    report.path_length_m = Some(run.trace.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum());
    report.simulation = Some(run.summary.clone());
    let static_cm = sc.costmap()?;
    let mut layers = SvgLayers::default();
    layers.paths.push((run.trace.iter().map(|r| Vec2::new(r.x, r.y)).collect(), "#1565c0"));
    layers.markers.push((sc.start.position(), 0.12, "#2e7d32"));
    layers.markers.push((sc.goal.position(), 0.12, "#c62828"));
    for o in &sc.dynamic_obstacles {
        for p in &o.schedule {
            layers.markers.push((Vec2::new(p.x_m, p.y_m), o.radius_m, "#90a4ae"));
        }
    }
    write_atomic(&out.join("plan.svg"), render_svg(&static_cm, &layers).as_bytes())?;
    write_json(&out.join("report.json"), &report)?;
    write_json(&out.join("timing.json"), &SimTiming { wall_ms })?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn robot(motion: Motion, vel: Vec2) -> Robot {
        Robot { pose: Pose::new(1.0, 2.0, 0.5), vel, omega: 0.0, motion }
    }

    #[test]
    fn tracking_reaches_every_band_pose() {
        let band = Band::new(
            vec![Pose::new(1.0, 2.0, 0.5), Pose::new(1.3, 2.1, 0.7), Pose::new(1.5, 2.5, 0.4)],
            vec![0.4, 0.3],
        )
        .unwrap();
        let cmds = extract_commands(&band);
        let mut r = robot(Motion::Track { cmds, origin: band.poses[0], elapsed: 0.0 }, Vec2::zeros());
        r.advance(0.4);
        assert!((r.pose.position() - band.poses[1].position()).norm() < 1e-12);
        r.advance(0.13);
        r.advance(0.5);
        let end = band.poses[2];
        assert!((r.pose.position() - end.position()).norm() < 1e-12);
        assert!(wrap_angle(r.pose.theta - end.theta).abs() < 1e-12);
        assert!(r.is_idle() && r.vel == Vec2::zeros());
    }

    #[test]
    fn braking_stops_after_the_expected_distance() {
        let v = Vec2::new(0.6, -0.8);
        let start = Pose::new(1.0, 2.0, 0.5);
        let mut r = robot(Motion::Brake { origin: start, vel: v, decel: 0.5, elapsed: 0.0 }, v);
        r.advance(1.0);
        assert!((r.vel.norm() - 0.5).abs() < 1e-12);
        r.advance(5.0);
        assert!(r.is_idle());
        let travelled = (r.pose.position() - start.position()).norm();
        assert!((travelled - 1.0).abs() < 1e-12, "{travelled}");
        assert_eq!(r.pose.theta, start.theta);
    }
}
