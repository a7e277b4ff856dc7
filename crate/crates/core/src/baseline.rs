//! Grid A* baseline with a trapezoidal time law.
//!
//! The geometric planner searches the 8-connected costmap grid. Its path
//! carries no velocity information, so [`time_parameterize`] merges
//! collinear waypoints and runs a trapezoidal speed profile along each
//! straight run, stopping at sharp corners.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::costmap::Costmap;
use crate::planner::{GlobalPlanner, PathSample, PlanError, PlanOutcome, TimedPath};
use crate::primitives::{KinoLimits, State};
use crate::Vec2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Multiplier on `cost / C_max` added to each unit step length.
    pub soft_weight: f64,
    /// Turns sharper than this force a full stop at the corner.
    pub corner_stop_deg: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { soft_weight: 1.0, corner_stop_deg: 30.0 }
    }
}

pub type Cell = (usize, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    /// Cell centers in world coordinates.
    pub polyline: Vec<Vec2>,
    /// Accumulated edge cost.
    pub cost: f64,
}

const NEIGHBORS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Neighbours reachable from `(ix, iy)` with their edge costs. Diagonal
/// moves are refused when either adjacent orthogonal cell is lethal.
pub fn grid_successors(cm: &Costmap, cell: Cell, soft_weight: f64) -> Vec<(Cell, f64)> {
    let (ix, iy) = (cell.0 as i64, cell.1 as i64);
    let r = cm.resolution();
    let c_max = cm.params().c_max;
    let mut out = Vec::with_capacity(8);
    for (dx, dy) in NEIGHBORS {
        let (nx, ny) = (ix + dx, iy + dy);
        if cm.is_cell_lethal_signed(nx, ny) {
            continue;
        }
        if dx != 0 && dy != 0 && (cm.is_cell_lethal_signed(ix + dx, iy) || cm.is_cell_lethal_signed(ix, iy + dy)) {
            continue;
        }
        let step = if dx != 0 && dy != 0 { r * std::f64::consts::SQRT_2 } else { r };
        let (ux, uy) = (nx as usize, ny as usize);
        let mult = 1.0 + soft_weight * cm.cell_cost(ux, uy) / c_max;
        out.push(((ux, uy), step * mult));
    }
    out
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    f: f64,
    h: f64,
    seq: u64,
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then_with(|| o.h.total_cmp(&self.h)).then_with(|| o.seq.cmp(&self.seq))
    }
}

/// 8-connected A* between the cells containing `start` and `goal`.
pub fn grid_plan(start: Vec2, goal: Vec2, cm: &Costmap, soft_weight: f64) -> Result<GridPath, PlanError> {
    let g = cm.grid();
    let s = g
        .world_to_cell(start)
        .filter(|&(x, y)| !cm.is_cell_lethal(x, y))
        .ok_or_else(|| PlanError::InvalidStart(format!("({:.3}, {:.3}) is lethal or off-map", start.x, start.y)))?;
    let e = g
        .world_to_cell(goal)
        .filter(|&(x, y)| !cm.is_cell_lethal(x, y))
        .ok_or_else(|| PlanError::InvalidGoal(format!("({:.3}, {:.3}) is lethal or off-map", goal.x, goal.y)))?;
    let w = g.width();
    let n = w * g.height();
    let goal_c = g.cell_center(e.0, e.1);
    let h = |c: Cell| (g.cell_center(c.0, c.1) - goal_c).norm();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut open = BinaryHeap::new();
    let si = g.index(s.0, s.1);
    dist[si] = 0.0;
    let mut seq = 0u64;
    open.push(Entry { f: h(s), h: h(s), seq, idx: si });
    let mut expansions = 0usize;
    while let Some(Entry { idx, .. }) = open.pop() {
        if done[idx] {
            continue;
        }
        done[idx] = true;
        let cell = (idx % w, idx / w);
        if cell == e {
            let mut cells = vec![cell];
            let mut cur = idx;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                cells.push((cur % w, cur / w));
            }
            cells.reverse();
            let polyline = cells.iter().map(|&(x, y)| g.cell_center(x, y)).collect();
            return Ok(GridPath { cells, polyline, cost: dist[idx] });
        }
        expansions += 1;
        for (nc, step) in grid_successors(cm, cell, soft_weight) {
            let ni = g.index(nc.0, nc.1);
            let nd = dist[idx] + step;
            if !done[ni] && nd < dist[ni] {
                dist[ni] = nd;
                parent[ni] = idx;
                seq += 1;
                let hn = h(nc);
                open.push(Entry { f: nd + hn, h: hn, seq, idx: ni });
            }
        }
    }
    Err(PlanError::NoPath { expansions, closest: None })
}

/// Drops interior waypoints that continue in the same direction.
pub fn merge_collinear(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = Vec::with_capacity(points.len());
    for &p in points {
        if pts.last().is_some_and(|q| (p - q).norm() < 1e-12) {
            continue;
        }
        if pts.len() >= 2 {
            let a = pts[pts.len() - 2];
            let b = pts[pts.len() - 1];
            let (d1, d2) = (b - a, p - b);
            let cross = d1.x * d2.y - d1.y * d2.x;
            if cross.abs() <= 1e-9 * d1.norm() * d2.norm() && d1.dot(&d2) > 0.0 {
                pts.pop();
            }
        }
        pts.push(p);
    }
    pts
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileSegment {
    pub from: Vec2,
    pub dir: Vec2,
    pub length: f64,
    pub v_start: f64,
    pub v_peak: f64,
    pub v_end: f64,
    pub t_acc: f64,
    pub t_cruise: f64,
    pub t_dec: f64,
    pub accel: f64,
}

impl ProfileSegment {
    pub fn duration(&self) -> f64 {
        self.t_acc + self.t_cruise + self.t_dec
    }

    /// Arc length, speed and signed tangential acceleration at local time `t`.
    fn kinematics(&self, t: f64) -> (f64, f64, f64) {
        let a = self.accel;
        let t = t.clamp(0.0, self.duration());
        let d_acc = self.v_start * self.t_acc + 0.5 * a * self.t_acc * self.t_acc;
        if t < self.t_acc {
            return (self.v_start * t + 0.5 * a * t * t, self.v_start + a * t, a);
        }
        let tc = t - self.t_acc;
        if tc < self.t_cruise {
            return (d_acc + self.v_peak * tc, self.v_peak, 0.0);
        }
        let td = (tc - self.t_cruise).min(self.t_dec);
        let s = d_acc + self.v_peak * self.t_cruise + self.v_peak * td - 0.5 * a * td * td;
        let decel = if self.t_dec > 0.0 { -a } else { 0.0 };
        (s.min(self.length), self.v_peak - a * td, decel)
    }
}

/// Piecewise trapezoidal time law along a polyline.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedProfile {
    pub waypoints: Vec<Vec2>,
    pub segments: Vec<ProfileSegment>,
    starts: Vec<f64>,
    pub total_duration: f64,
    pub effort: f64,
}

fn turn_angle(a: Vec2, b: Vec2) -> f64 {
    let c = (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0);
    c.acos()
}

/// Trapezoidal profile with acceleration `lim.u_max` and cruise speed
/// `lim.v_max`. Corner speeds are zero above `corner_stop_deg`, otherwise
/// `v_max cos(turn)`; forward and backward passes keep every segment's
/// boundary speeds reachable.
pub fn time_parameterize(polyline: &[Vec2], lim: &KinoLimits, corner_stop_deg: f64) -> TimedProfile {
    let wps = merge_collinear(polyline);
    let (a, v_max) = (lim.u_max, lim.v_max);
    let m = wps.len().saturating_sub(1);
    if m == 0 {
        return TimedProfile { waypoints: wps, segments: vec![], starts: vec![], total_duration: 0.0, effort: 0.0 };
    }
    let lengths: Vec<f64> = (0..m).map(|k| (wps[k + 1] - wps[k]).norm()).collect();
    let mut vert = vec![0.0; m + 1];
    for k in 1..m {
        let ang = turn_angle(wps[k] - wps[k - 1], wps[k + 1] - wps[k]);
        vert[k] = if ang > corner_stop_deg.to_radians() { 0.0 } else { v_max * ang.cos() };
    }
    for k in 0..m {
        vert[k + 1] = f64::min(vert[k + 1], (vert[k] * vert[k] + 2.0 * a * lengths[k]).sqrt());
    }
    for k in (0..m).rev() {
        vert[k] = f64::min(vert[k], (vert[k + 1] * vert[k + 1] + 2.0 * a * lengths[k]).sqrt());
    }
    let mut segments = Vec::with_capacity(m);
    let mut starts = Vec::with_capacity(m);
    let (mut t, mut effort) = (0.0, 0.0);
    for k in 0..m {
        let (v0, v1, len) = (vert[k], vert[k + 1], lengths[k]);
        let vp = f64::min(v_max, ((2.0 * a * len + v0 * v0 + v1 * v1) / 2.0).sqrt()).max(v0).max(v1);
        let t_acc = (vp - v0) / a;
        let t_dec = (vp - v1) / a;
        let d_acc = (vp * vp - v0 * v0) / (2.0 * a);
        let d_dec = (vp * vp - v1 * v1) / (2.0 * a);
        let t_cruise = if vp > 0.0 { ((len - d_acc - d_dec) / vp).max(0.0) } else { 0.0 };
        let seg = ProfileSegment {
            from: wps[k],
            dir: (wps[k + 1] - wps[k]) / len,
            length: len,
            v_start: v0,
            v_peak: vp,
            v_end: v1,
            t_acc,
            t_cruise,
            t_dec,
            accel: a,
        };
        starts.push(t);
        t += seg.duration();
        effort += a * a * (t_acc + t_dec);
        segments.push(seg);
    }
    TimedProfile { waypoints: wps, segments, starts, total_duration: t, effort }
}

impl TimedPath for TimedProfile {
    fn duration(&self) -> f64 {
        self.total_duration
    }

    fn sample(&self, t: f64) -> PathSample {
        let Some(first) = self.waypoints.first() else {
            return PathSample { pos: Vec2::zeros(), vel: Vec2::zeros(), acc: Vec2::zeros() };
        };
        if self.segments.is_empty() {
            return PathSample { pos: *first, vel: Vec2::zeros(), acc: Vec2::zeros() };
        }
        let t = t.clamp(0.0, self.total_duration);
        let k = self.starts.partition_point(|&s| s <= t).saturating_sub(1);
        let seg = &self.segments[k];
        let (s, v, acc) = seg.kinematics(t - self.starts[k]);
        PathSample { pos: seg.from + seg.dir * s, vel: seg.dir * v, acc: seg.dir * acc }
    }

    fn effort(&self) -> f64 {
        self.effort
    }
}

pub struct GridAstarPlanner {
    config: BaselineConfig,
    limits: KinoLimits,
}

impl GridAstarPlanner {
    pub const NAME: &'static str = "grid_astar";

    pub fn new(config: BaselineConfig, limits: KinoLimits) -> Self {
        Self { config, limits }
    }
}

impl GlobalPlanner for GridAstarPlanner {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    /// Plans from rest at `start` to rest at `goal`; velocities are ignored.
    fn plan(&self, start: &State, goal: &State, cm: &Costmap) -> Result<PlanOutcome, PlanError> {
        let path = grid_plan(start.pos, goal.pos, cm, self.config.soft_weight)?;
        let mut pts = path.polyline.clone();
        pts[0] = start.pos;
        *pts.last_mut().expect("non-empty path") = goal.pos;
        let profile = time_parameterize(&pts, &self.limits, self.config.corner_stop_deg);
        Ok(PlanOutcome { path: Box::new(profile), expansions: path.cells.len() })
    }
}
