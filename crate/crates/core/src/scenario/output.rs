//! Reports, CSV tables, SVG plots and atomic file output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{RunStatus, ScenarioError};
use crate::costmap::Costmap;
use crate::planner::{sample_uniform, TimedPath};
use crate::teb::{Band, Command};
use crate::Vec2;

/// Rate of rows in `trajectory.csv`.
pub const TRAJECTORY_HZ: f64 = 50.0;

/// Writes `bytes` to a temporary file next to `path`, then renames it
/// into place so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ScenarioError> {
    let err = |source: std::io::Error| ScenarioError::Write { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ScenarioError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Summary of one TEB refinement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TebSummary {
    pub poses: usize,
    pub outer_iterations: usize,
    pub accepted_steps: usize,
    pub converged: bool,
    /// Largest amount by which any velocity or acceleration exceeds its limit.
    pub max_limit_excess: f64,
    pub min_clearance_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimSummary {
    pub replans: usize,
    pub failed_replans: usize,
    pub elapsed_s: f64,
    pub goal_reached: bool,
    /// Largest gap between a plan's first state and the robot state it
    /// was planned from.
    pub max_replan_start_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collision_time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collision_position_m: Option<[f64; 2]>,
}

/// Deterministic run summary written as `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub scenario: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub planner: String,
    pub legs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_duration_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effort: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub soft_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_clearance_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_length_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lethal_samples: Option<usize>,
    pub expansions: usize,
    pub trajectory_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pre_teb_duration_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub post_teb_duration_s: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub teb: Vec<TebSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub commands: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimSummary>,
}

impl RunReport {
    pub fn new(command: &str, scenario: &str, planner: &str, status: RunStatus) -> Self {
        Self {
            command: command.into(),
            scenario: scenario.into(),
            status,
            message: None,
            planner: planner.into(),
            legs: 0,
            total_duration_s: None,
            effort: None,
            soft_cost: None,
            min_clearance_m: None,
            path_length_m: None,
            lethal_samples: None,
            expansions: 0,
            trajectory_samples: 0,
            pre_teb_duration_s: None,
            post_teb_duration_s: None,
            teb: Vec::new(),
            commands: None,
            simulation: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

/// Geometric quality of a timed path against a costmap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathMetrics {
    pub path_length: f64,
    /// Smallest cell obstacle distance minus the inscribed radius.
    pub min_clearance: f64,
    /// Samples in lethal or off-map cells.
    pub lethal_samples: usize,
}

/// Samples `path` no more than half a cell apart.
pub fn path_metrics(path: &dyn TimedPath, cm: &Costmap) -> PathMetrics {
    let coarse = sample_uniform(path, 1.0 / TRAJECTORY_HZ);
    let peak = coarse.iter().map(|(_, s)| s.vel.norm()).fold(0.0, f64::max);
    let spacing = 0.5 * cm.resolution();
    let total = path.duration();
    let n = if total > 0.0 { ((total * 1.1 * peak.max(1e-3)) / spacing).ceil().clamp(1.0, 2e6) as usize } else { 0 };
    let l1 = cm.params().inscribed_radius;
    let mut length = 0.0;
    let mut clearance = f64::INFINITY;
    let mut lethal = 0;
    let mut prev: Option<Vec2> = None;
    for k in 0..=n {
        let t = if n == 0 { 0.0 } else { total * k as f64 / n as f64 };
        let p = path.sample(t).pos;
        if let Some(q) = prev {
            length += (p - q).norm();
        }
        prev = Some(p);
        match cm.grid().world_to_cell(p) {
            Some((ix, iy)) => {
                clearance = clearance.min(cm.cell_distance(ix, iy) - l1);
                if cm.is_cell_lethal(ix, iy) {
                    lethal += 1;
                }
            }
            None => {
                lethal += 1;
                clearance = clearance.min(0.0);
            }
        }
    }
    PathMetrics { path_length: length, min_clearance: clearance, lethal_samples: lethal }
}

/// Header plus one row per 50 Hz sample: `t,x,y,vx,vy,ax,ay`.
pub fn trajectory_csv(path: &dyn TimedPath) -> (String, usize) {
    let rows = sample_uniform(path, 1.0 / TRAJECTORY_HZ);
    let mut s = String::from("t,x,y,vx,vy,ax,ay\n");
    for (t, p) in &rows {
        let _ = writeln!(s, "{:.4},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}", t, p.pos.x, p.pos.y, p.vel.x, p.vel.y, p.acc.x, p.acc.y);
    }
    (s, rows.len())
}

pub fn band_csv(band: &Band) -> String {
    let mut buf = Vec::new();
    band.write_csv(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii csv")
}

pub fn commands_csv(cmds: &[Command]) -> String {
    crate::teb::commands_csv(cmds)
}

/// Vector overlays drawn on top of the costmap raster.
#[derive(Clone, Debug, Default)]
pub struct SvgLayers {
    /// Polylines with a stroke color.
    pub paths: Vec<(Vec<Vec2>, &'static str)>,
    /// Bands are drawn as polylines with a heading tick per pose.
    pub bands: Vec<(Band, &'static str)>,
    /// Filled markers with a radius in meters.
    pub markers: Vec<(Vec2, f64, &'static str)>,
}

/// Pixels per meter in the SVG output.
const SVG_SCALE: f64 = 40.0;

/// Map raster (obstacles black, inflation band shaded) with overlays.
/// The y axis points up as in the world frame.
pub fn render_svg(cm: &Costmap, layers: &SvgLayers) -> String {
    let g = cm.grid();
    let (w_m, h_m) = g.extent();
    let o = g.origin();
    let r = g.resolution();
    let px = |p: Vec2| ((p.x - o.x) * SVG_SCALE, (h_m - (p.y - o.y)) * SVG_SCALE);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.1} {:.1}">"#,
        w_m * SVG_SCALE,
        h_m * SVG_SCALE,
        w_m * SVG_SCALE,
        h_m * SVG_SCALE
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let cell = r * SVG_SCALE;
    for (class, fill) in [(1u8, "#f3d9b1"), (2u8, "#9e9e9e"), (3u8, "#000000")] {
        let _ = writeln!(s, r#"<g fill="{fill}">"#);
        for iy in 0..g.height() {
            let mut ix = 0;
            while ix < g.width() {
                let classify = |ix: usize| {
                    if g.is_occupied(ix, iy) {
                        3
                    } else if cm.is_cell_lethal(ix, iy) {
                        2
                    } else if cm.cell_cost(ix, iy) > 0.0 {
                        1
                    } else {
                        0
                    }
                };
                if classify(ix) != class {
                    ix += 1;
                    continue;
                }
                let run_start = ix;
                while ix < g.width() && classify(ix) == class {
                    ix += 1;
                }
                let y = (g.height() - 1 - iy) as f64 * cell;
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                    run_start as f64 * cell,
                    y,
                    (ix - run_start) as f64 * cell,
                    cell
                );
            }
        }
        let _ = writeln!(s, "</g>");
    }
    let polyline = |s: &mut String, pts: &[Vec2], color: &str, width: f64| {
        let coords: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = px(*p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
            coords.join(" ")
        );
    };
    for (pts, color) in &layers.paths {
        polyline(&mut s, pts, color, 2.0);
    }
    for (band, color) in &layers.bands {
        let pts: Vec<Vec2> = band.poses.iter().map(|p| p.position()).collect();
        polyline(&mut s, &pts, color, 1.5);
        for p in &band.poses {
            let tip = p.position() + Vec2::new(p.theta.cos(), p.theta.sin()) * 0.15;
            polyline(&mut s, &[p.position(), tip], color, 1.0);
        }
    }
    for (c, radius, color) in &layers.markers {
        let (x, y) = px(*c);
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="{color}"/>"#, radius * SVG_SCALE);
    }
    s.push_str("</svg>\n");
    s
}

/// Positions of a timed path at 10 Hz for plotting.
pub fn path_polyline(path: &dyn TimedPath) -> Vec<Vec2> {
    sample_uniform(path, 0.1).into_iter().map(|(_, s)| s.pos).collect()
}
