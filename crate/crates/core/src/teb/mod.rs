//! Timed-elastic-band refinement under an omnidirectional body model.
//!
//! A band is a sequence of planar poses with a positive time interval
//! between each consecutive pair. Velocities and accelerations follow from
//! finite differences expressed in the body frame of the earlier pose, so
//! forward, lateral and turning limits can differ. [`optimize`] deforms
//! the band by damped least squares on a weighted set of residuals (time,
//! obstacle clearance, via-point attraction, kinematic limits and heading
//! change).

mod dual;
mod optimizer;
mod residuals;
mod solver;

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::geometry::{rotate, wrap_angle};
use crate::planner::TimedPath;
use crate::Vec2;

pub use optimizer::{optimize, OptimizeReport, TebConfig};
pub use residuals::{num_vars, read_vars, write_vars, BlockKind, Residual, TebProblem};

/// Smallest admissible time interval, seconds.
pub const MIN_DT: f64 = 1e-3;

/// Speed below which the motion direction is too noisy to set a heading.
const HEADING_SPEED: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Heading in `(-pi, pi]`.
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Band {
    pub poses: Vec<Pose>,
    /// `dts[i]` separates `poses[i]` and `poses[i + 1]`.
    pub dts: Vec<f64>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TebError {
    #[error("band needs at least two poses and one interval per pair")]
    Malformed,
    #[error("non-finite residual in {block} block at index {index}")]
    NonFinite { block: &'static str, index: usize },
    #[error("band csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

impl Band {
    pub fn new(poses: Vec<Pose>, dts: Vec<f64>) -> Result<Self, TebError> {
        if poses.len() < 2 || dts.len() + 1 != poses.len() {
            return Err(TebError::Malformed);
        }
        Ok(Self { poses, dts })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        self.dts.iter().sum()
    }

    pub fn path_length(&self) -> f64 {
        self.poses.windows(2).map(|w| (w[1].position() - w[0].position()).norm()).sum()
    }

    /// Rigid motion of the band: rotation by `angle` about the origin
    /// followed by `offset`.
    pub fn transformed(&self, angle: f64, offset: Vec2) -> Band {
        let poses = self
            .poses
            .iter()
            .map(|p| {
                let q = rotate(p.position(), angle) + offset;
                Pose::new(q.x, q.y, p.theta + angle)
            })
            .collect();
        Band { poses, dts: self.dts.clone() }
    }

    /// Rows of `x,y,theta,dt`; the last row carries `dt = 0`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,theta,dt")?;
        for (i, p) in self.poses.iter().enumerate() {
            let dt = self.dts.get(i).copied().unwrap_or(0.0);
            writeln!(out, "{},{},{},{}", p.x, p.y, p.theta, dt)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Band, TebError> {
        let mut poses = Vec::new();
        let mut dts = Vec::new();
        for (k, line) in input.lines().enumerate() {
            let line_no = k + 1;
            let err = |reason: String| TebError::Csv { line: line_no, reason };
            let line = line.map_err(|e| err(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || (k == 0 && line.starts_with('x')) {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| err(e.to_string()))?;
            if fields.len() != 4 {
                return Err(err(format!("expected 4 fields, got {}", fields.len())));
            }
            poses.push(Pose::new(fields[0], fields[1], fields[2]));
            dts.push(fields[3]);
        }
        dts.pop();
        if dts.iter().any(|&d| !(d > 0.0)) {
            return Err(TebError::Csv { line: 0, reason: "time intervals must be positive".into() });
        }
        Band::new(poses, dts)
    }
}

/// Velocity in the body frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    pub v_x: f64,
    pub v_y: f64,
    pub omega: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OmniLimits {
    #[serde(rename = "v_x_max_mps")]
    pub v_x_max: f64,
    /// Largest backward speed.
    #[serde(rename = "v_x_min_mps")]
    pub v_x_min: f64,
    #[serde(rename = "v_y_max_mps")]
    pub v_y_max: f64,
    #[serde(rename = "omega_max_radps")]
    pub omega_max: f64,
    #[serde(rename = "a_x_max_mps2")]
    pub a_x_max: f64,
    #[serde(rename = "a_y_max_mps2")]
    pub a_y_max: f64,
    #[serde(rename = "alpha_max_radps2")]
    pub alpha_max: f64,
}

impl Default for OmniLimits {
    fn default() -> Self {
        Self { v_x_max: 0.75, v_x_min: 0.10, v_y_max: 0.20, omega_max: 0.70, a_x_max: 1.00, a_y_max: 0.17, alpha_max: 0.52 }
    }
}

impl OmniLimits {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.v_x_max,
            self.v_x_min,
            self.v_y_max,
            self.omega_max,
            self.a_x_max,
            self.a_y_max,
            self.alpha_max,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err("all omnidirectional limits must be positive".into())
        }
    }

    /// Largest amount by which `v` exceeds the velocity limits (0 if within).
    pub fn velocity_excess(&self, v: &Twist) -> f64 {
        [
            v.v_x - self.v_x_max,
            -self.v_x_min - v.v_x,
            v.v_y.abs() - self.v_y_max,
            v.omega.abs() - self.omega_max,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn acceleration_excess(&self, a: &Twist) -> f64 {
        [a.v_x.abs() - self.a_x_max, a.v_y.abs() - self.a_y_max, a.omega.abs() - self.alpha_max]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TebWeights {
    pub gamma_time: f64,
    pub gamma_obstacle: f64,
    pub gamma_viapoint: f64,
    /// Body-x velocity limit penalty.
    pub gamma_vel_x: f64,
    /// Body-y velocity limit penalty.
    pub gamma_vel_y: f64,
    pub gamma_vel_theta: f64,
    pub gamma_acc: f64,
    pub gamma_yaw: f64,
    #[serde(rename = "obstacle_min_dist_m")]
    pub obstacle_min_dist: f64,
    pub penalty_epsilon: f64,
}

impl Default for TebWeights {
    fn default() -> Self {
        Self {
            gamma_time: 0.1,
            gamma_obstacle: 50.0,
            gamma_viapoint: 10.0,
            gamma_vel_x: 1.0,
            gamma_vel_y: 4.0,
            gamma_vel_theta: 1.0,
            gamma_acc: 1.0,
            gamma_yaw: 0.1,
            obstacle_min_dist: 0.4,
            penalty_epsilon: 0.05,
        }
    }
}

impl TebWeights {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.gamma_time,
            self.gamma_obstacle,
            self.gamma_viapoint,
            self.gamma_vel_x,
            self.gamma_vel_y,
            self.gamma_vel_theta,
            self.gamma_acc,
            self.gamma_yaw,
            self.obstacle_min_dist,
            self.penalty_epsilon,
        ];
        if all.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err("TEB weights must be finite and non-negative".into())
        }
    }
}

/// Samples a front-end path into a band with intervals close to `dt_ref`.
///
/// The path duration is split into `max(1, round(T / dt_ref))` equal
/// intervals; a zero-duration path gives two coincident poses one `dt_ref`
/// apart. Interior headings follow the sampled velocity direction while
/// the speed exceeds 5 cm/s and are carried forward otherwise.
pub fn initialize_band(path: &dyn TimedPath, dt_ref: f64, start_heading: f64, goal_heading: f64) -> Band {
    let total = path.duration();
    let n = ((total / dt_ref).round() as usize).max(1);
    let dt = if total > 0.0 { total / n as f64 } else { dt_ref };
    let mut poses = Vec::with_capacity(n + 1);
    let mut heading = wrap_angle(start_heading);
    for k in 0..=n {
        let t = if k == n { total } else { k as f64 * total / n as f64 };
        let s = path.sample(t);
        if k == 0 {
            heading = wrap_angle(start_heading);
        } else if k == n {
            heading = wrap_angle(goal_heading);
        } else if s.vel.norm() > HEADING_SPEED {
            heading = s.vel.y.atan2(s.vel.x);
        }
        poses.push(Pose::new(s.pos.x, s.pos.y, heading));
    }
    Band { poses, dts: vec![dt; n] }
}

/// Displacement from pose `i` to pose `i + 1` in the body frame of pose
/// `i`, and the wrapped heading change.
pub fn body_frame_deltas(band: &Band, i: usize) -> (f64, f64, f64) {
    let (a, b) = (band.poses[i], band.poses[i + 1]);
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let (s, c) = a.theta.sin_cos();
    (dx * c + dy * s, -dx * s + dy * c, wrap_angle(b.theta - a.theta))
}

/// Body-frame velocity over interval `i`.
pub fn interval_velocity(band: &Band, i: usize) -> Twist {
    let (dx, dy, dth) = body_frame_deltas(band, i);
    let dt = band.dts[i];
    Twist { v_x: dx / dt, v_y: dy / dt, omega: dth / dt }
}

/// Finite-difference acceleration between intervals `i` and `i + 1`,
/// using their mean duration.
pub fn interval_acceleration(band: &Band, i: usize) -> Twist {
    let (v0, v1) = (interval_velocity(band, i), interval_velocity(band, i + 1));
    let dt = 0.5 * (band.dts[i] + band.dts[i + 1]);
    Twist { v_x: (v1.v_x - v0.v_x) / dt, v_y: (v1.v_y - v0.v_y) / dt, omega: (v1.omega - v0.omega) / dt }
}

/// Velocities of every interval and, where defined, the acceleration that
/// follows it.
pub fn band_kinematics(band: &Band) -> (Vec<Twist>, Vec<Twist>) {
    let v = (0..band.dts.len()).map(|i| interval_velocity(band, i)).collect();
    let a = (0..band.dts.len().saturating_sub(1)).map(|i| interval_acceleration(band, i)).collect();
    (v, a)
}

/// Largest limit excess over all interval velocities and accelerations.
pub fn limit_excess(band: &Band, lim: &OmniLimits) -> f64 {
    let (v, a) = band_kinematics(band);
    let ve = v.iter().map(|t| lim.velocity_excess(t)).fold(0.0, f64::max);
    a.iter().map(|t| lim.acceleration_excess(t)).fold(ve, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub v_x: f64,
    pub v_y: f64,
    pub omega: f64,
    pub duration: f64,
}

pub fn extract_commands(band: &Band) -> Vec<Command> {
    (0..band.dts.len())
        .map(|i| {
            let v = interval_velocity(band, i);
            Command { v_x: v.v_x, v_y: v.v_y, omega: v.omega, duration: band.dts[i] }
        })
        .collect()
}

/// Pose reached by holding `cmd` from `pose`: the body-frame translation
/// is applied along the starting heading, then the heading advances.
pub fn apply_command(pose: &Pose, cmd: &Command, dt: f64) -> Pose {
    let d = rotate(Vec2::new(cmd.v_x, cmd.v_y), pose.theta) * dt;
    Pose::new(pose.x + d.x, pose.y + d.y, pose.theta + cmd.omega * dt)
}

pub fn commands_csv(cmds: &[Command]) -> String {
    let mut s = String::from("v_x,v_y,omega,dt\n");
    for c in cmds {
        let _ = writeln!(s, "{:.6},{:.6},{:.6},{:.6}", c.v_x, c.v_y, c.omega, c.duration);
    }
    s
}
