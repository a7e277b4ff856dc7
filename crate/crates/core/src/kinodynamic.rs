//! Kinodynamic A* over constant-acceleration motion primitives.
//!
//! Nodes are double-integrator states. Each expansion applies every input
//! of the control lattice for one primitive duration, keeps the children
//! that respect the velocity box and the lethal costmap cells, and orders
//! the open list by `g + h + rho_c * c`, where `g` is the accumulated
//! effort-plus-time cost, `c` the accumulated soft collision cost and `h`
//! the obstacle-free heuristic. Near-duplicate states are merged on a
//! discretised position/velocity key.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::costmap::Costmap;
use crate::heuristic::{Heuristic, SpeedBoundedLqmt};
use crate::lqmt::{connection_for_duration, optimal_duration, BoundaryPair, OptimalConnection};
use crate::planner::{GlobalPlanner, PathSample, PlanError, PlanOutcome, TimedPath};
use crate::primitives::{
    collision_free, control_lattice, dynamic_feasible, path_collision_free, primitive_cost, sample_intervals,
    soft_cost, soft_cost_along, soft_cost_samples, ControlInput, KinoLimits, MotionPrimitive, State, BOUND_TOL,
};
use crate::Vec2;

/// Slack on the pruning dominance test.
const DOMINANCE_TOL: f64 = 1e-9;
const SLACK: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Weight of duration against control effort.
    pub rho: f64,
    /// Weight of the soft collision cost.
    pub rho_c: f64,
    #[serde(rename = "tau_s")]
    pub tau: f64,
    /// Lattice samples per half-axis.
    pub mu: u32,
    pub limits: KinoLimits,
    /// Position bin size for duplicate pruning; the costmap resolution when unset.
    #[serde(rename = "prune_pos_res_m")]
    pub prune_pos_res: Option<f64>,
    /// Velocity bin size for duplicate pruning; `v_max / 5` when unset.
    #[serde(rename = "prune_vel_res_mps")]
    pub prune_vel_res: Option<f64>,
    #[serde(rename = "goal_pos_tol_m")]
    pub goal_pos_tol: f64,
    #[serde(rename = "goal_vel_tol_mps")]
    pub goal_vel_tol: f64,
    pub max_expansions: usize,
    pub try_goal_connection: bool,
    /// Multiples of the heuristic's optimal duration tried, in order, when
    /// connecting a popped node straight to the goal.
    pub goal_connection_scales: Vec<f64>,
    /// A queued goal connection is accepted once its cost is within this
    /// fraction above the cheapest open entry; zero waits until it is the
    /// cheapest.
    pub connection_slack: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            rho_c: 1.0,
            tau: 0.5,
            mu: 2,
            limits: KinoLimits::default(),
            prune_pos_res: None,
            prune_vel_res: None,
            goal_pos_tol: 0.3,
            goal_vel_tol: 0.2,
            max_expansions: 200_000,
            try_goal_connection: true,
            goal_connection_scales: vec![1.0, 1.25, 1.5, 2.0],
            connection_slack: SLACK,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("rho", self.rho),
            ("tau_s", self.tau),
            ("u_max_mps2", self.limits.u_max),
            ("v_max_mps", self.limits.v_max),
            ("goal_pos_tol_m", self.goal_pos_tol),
            ("goal_vel_tol_mps", self.goal_vel_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [("rho_c", self.rho_c), ("connection_slack", self.connection_slack)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        for (name, v) in [("prune_pos_res_m", self.prune_pos_res), ("prune_vel_res_mps", self.prune_vel_res)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if self.mu == 0 {
            return Err("mu must be at least 1".into());
        }
        if self.max_expansions == 0 {
            return Err("max_expansions must be at least 1".into());
        }
        if self.goal_connection_scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err("goal_connection_scales must be positive".into());
        }
        Ok(())
    }

    pub fn pos_res(&self, cm: &Costmap) -> f64 {
        self.prune_pos_res.unwrap_or_else(|| cm.resolution())
    }

    pub fn vel_res(&self) -> f64 {
        self.prune_vel_res.unwrap_or(self.limits.v_max / 5.0)
    }
}

/// Discretised state used for duplicate detection.
pub type PruneKey = [i64; 4];

pub fn prune_key(s: &State, pos_res: f64, vel_res: f64) -> PruneKey {
    [
        (s.pos.x / pos_res).floor() as i64,
        (s.pos.y / pos_res).floor() as i64,
        (s.vel.x / vel_res).floor() as i64,
        (s.vel.y / vel_res).floor() as i64,
    ]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Segment {
    Primitive(MotionPrimitive),
    /// Closed-form cubic connection to the goal.
    Connection(OptimalConnection),
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match self {
            Segment::Primitive(m) => m.duration,
            Segment::Connection(c) => c.duration,
        }
    }

    pub fn start_state(&self) -> State {
        match self {
            Segment::Primitive(m) => m.start,
            Segment::Connection(c) => c.start,
        }
    }

    pub fn state_at(&self, t: f64) -> State {
        match self {
            Segment::Primitive(m) => m.state_at(t),
            Segment::Connection(c) => c.state_at(t),
        }
    }

    pub fn accel_at(&self, t: f64) -> Vec2 {
        match self {
            Segment::Primitive(m) => m.input.0,
            Segment::Connection(c) => c.accel_at(t),
        }
    }

    pub fn end_state(&self) -> State {
        self.state_at(self.duration())
    }

    pub fn effort(&self) -> f64 {
        match self {
            Segment::Primitive(m) => m.input.0.norm_squared() * m.duration,
            Segment::Connection(c) => c.control_cost,
        }
    }

    fn soft_cost(&self, cm: &Costmap, lim: &KinoLimits) -> f64 {
        match self {
            Segment::Primitive(m) => soft_cost(m, cm, lim),
            Segment::Connection(c) => connection_soft_cost(c, cm, lim),
        }
    }
}

/// Front-end output: state-continuous segments from start to goal.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
    /// Start time of each segment.
    starts: Vec<f64>,
    pub start: State,
    pub total_duration: f64,
    /// Integrated squared acceleration.
    pub effort: f64,
    pub soft_cost: f64,
    /// `effort + rho * duration + rho_c * soft_cost`.
    pub cost: f64,
}

impl Trajectory {
    fn new(start: State, segments: Vec<Segment>, rho: f64, rho_c: f64, cm: &Costmap, lim: &KinoLimits) -> Self {
        let mut starts = Vec::with_capacity(segments.len());
        let mut t = 0.0;
        let mut effort = 0.0;
        let mut soft = 0.0;
        for s in &segments {
            starts.push(t);
            t += s.duration();
            effort += s.effort();
            soft += s.soft_cost(cm, lim);
        }
        Self {
            segments,
            starts,
            start,
            total_duration: t,
            effort,
            soft_cost: soft,
            cost: effort + rho * t + rho_c * soft,
        }
    }

    pub fn end_state(&self) -> State {
        self.segments.last().map_or(self.start, Segment::end_state)
    }

    pub fn has_connection(&self) -> bool {
        matches!(self.segments.last(), Some(Segment::Connection(_)))
    }

    fn locate(&self, t: f64) -> Option<(usize, f64)> {
        if self.segments.is_empty() {
            return None;
        }
        let t = t.clamp(0.0, self.total_duration);
        let k = self.starts.partition_point(|&s| s <= t).saturating_sub(1);
        let local = (t - self.starts[k]).min(self.segments[k].duration());
        Some((k, local))
    }

    pub fn state_at(&self, t: f64) -> State {
        match self.locate(t) {
            Some((k, local)) => self.segments[k].state_at(local),
            None => self.start,
        }
    }

    /// Largest position or velocity mismatch between consecutive segments.
    pub fn junction_residual(&self) -> f64 {
        self.segments
            .windows(2)
            .map(|w| {
                let a = w[0].end_state();
                let b = w[1].start_state();
                (a.pos - b.pos).amax().max((a.vel - b.vel).amax())
            })
            .fold(0.0, f64::max)
    }
}

impl TimedPath for Trajectory {
    fn duration(&self) -> f64 {
        self.total_duration
    }

    fn sample(&self, t: f64) -> PathSample {
        match self.locate(t) {
            Some((k, local)) => {
                let s = self.segments[k].state_at(local);
                PathSample { pos: s.pos, vel: s.vel, acc: self.segments[k].accel_at(local) }
            }
            None => PathSample { pos: self.start.pos, vel: self.start.vel, acc: Vec2::zeros() },
        }
    }

    fn effort(&self) -> f64 {
        self.effort
    }

    fn cost(&self) -> Option<f64> {
        Some(self.cost)
    }

    fn soft_cost(&self) -> Option<f64> {
        Some(self.soft_cost)
    }
}

fn connection_soft_cost(c: &OptimalConnection, cm: &Costmap, lim: &KinoLimits) -> f64 {
    let n = soft_cost_samples(c.duration, lim.v_max, cm.resolution());
    soft_cost_along(|t| c.state_at(t), c.duration, n, cm)
}

/// Per-axis velocity and input bounds plus the hard collision check.
pub fn connection_feasible(c: &OptimalConnection, cm: &Costmap, lim: &KinoLimits) -> bool {
    let v = c.peak_axis_speed();
    let a = c.peak_axis_accel();
    if v.amax() > lim.v_max + BOUND_TOL || a.amax() > lim.u_max + BOUND_TOL {
        return false;
    }
    let n = sample_intervals(c.duration, lim.v_max.max(v.norm()), cm.resolution());
    path_collision_free(|t| c.state_at(t).pos, c.duration, n, cm)
}

#[derive(Clone, Debug)]
struct Node {
    state: State,
    g: f64,
    soft: f64,
    parent: Option<(usize, ControlInput)>,
}

#[derive(Clone, Copy, Debug)]
struct OpenEntry {
    f: f64,
    h: f64,
    seq: u64,
    node: usize,
    /// Index of a goal connection leaving `node`; such entries finish the
    /// search when popped.
    tail: Option<usize>,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // Reversed so the max-heap pops the smallest (f, h, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub trajectory: Trajectory,
    pub expansions: usize,
}

pub struct KinodynamicAstar {
    config: SearchConfig,
    heuristic: Box<dyn Heuristic>,
}

impl KinodynamicAstar {
    pub const NAME: &'static str = "kinodynamic_astar";

    pub fn new(config: SearchConfig, heuristic: Box<dyn Heuristic>) -> Self {
        Self { config, heuristic }
    }

    /// Uses the speed-bounded closed-form heuristic.
    pub fn with_config(config: SearchConfig) -> Self {
        let h = SpeedBoundedLqmt { rho: config.rho, v_max: config.limits.v_max };
        Self::new(config, Box::new(h))
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    fn within_tolerance(&self, s: &State, goal: &State) -> bool {
        (s.pos - goal.pos).norm() <= self.config.goal_pos_tol && (s.vel - goal.vel).norm() <= self.config.goal_vel_tol
    }

    fn try_connect(&self, from: &State, goal: &State, cm: &Costmap) -> Option<OptimalConnection> {
        let bp = BoundaryPair::new(*from, *goal);
        let base = optimal_duration(&bp, self.config.rho);
        if base.degenerate {
            return None;
        }
        self.config.goal_connection_scales.iter().find_map(|&k| {
            let c = connection_for_duration(&bp, base.duration * k, self.config.rho);
            connection_feasible(&c, cm, &self.config.limits).then_some(c)
        })
    }

    fn check_endpoints(&self, start: &State, goal: &State, cm: &Costmap) -> Result<(), PlanError> {
        self.config.validate().map_err(PlanError::InvalidConfig)?;
        let v_max = self.config.limits.v_max + BOUND_TOL;
        if !start.is_finite() {
            return Err(PlanError::InvalidStart("non-finite state".into()));
        }
        if cm.is_lethal(start.pos) {
            return Err(PlanError::InvalidStart(format!("({:.3}, {:.3}) is lethal", start.pos.x, start.pos.y)));
        }
        if start.vel.amax() > v_max {
            return Err(PlanError::InvalidStart("velocity exceeds v_max".into()));
        }
        if !goal.is_finite() {
            return Err(PlanError::InvalidGoal("non-finite state".into()));
        }
        if cm.is_lethal(goal.pos) {
            return Err(PlanError::InvalidGoal(format!("({:.3}, {:.3}) is lethal", goal.pos.x, goal.pos.y)));
        }
        if goal.vel.amax() > v_max {
            return Err(PlanError::InvalidGoal("velocity exceeds v_max".into()));
        }
        Ok(())
    }

    pub fn search(&self, start: &State, goal: &State, cm: &Costmap) -> Result<SearchResult, PlanError> {
        self.check_endpoints(start, goal, cm)?;
        let cfg = &self.config;
        let lim = &cfg.limits;
        let (pos_res, vel_res) = (cfg.pos_res(cm), cfg.vel_res());
        let lattice = control_lattice(lim.u_max, cfg.mu);

        let mut nodes = vec![Node { state: *start, g: 0.0, soft: 0.0, parent: None }];
        let mut open = BinaryHeap::new();
        let mut seq = 0u64;
        let h0 = self.heuristic.estimate(start, goal);
        open.push(OpenEntry { f: h0, h: h0, seq, node: 0, tail: None });
        let mut closed: HashMap<PruneKey, f64> = HashMap::new();
        let mut best_open: HashMap<PruneKey, f64> = HashMap::new();
        best_open.insert(prune_key(start, pos_res, vel_res), 0.0);
        let mut expansions = 0usize;
        let mut closest: Option<(f64, State)> = None;
        let mut tails: Vec<OptimalConnection> = Vec::new();
        let mut best_tail = f64::INFINITY;
        let mut best_tail_at: Option<(usize, usize)> = None;

        while let Some(entry) = open.pop() {
            if let Some(k) = entry.tail {
                return Ok(self.finish(&nodes, entry.node, Some(tails[k]), cm, expansions));
            }
            if let Some((node, k)) = best_tail_at {
                if best_tail <= (1.0 + cfg.connection_slack) * entry.f {
                    return Ok(self.finish(&nodes, node, Some(tails[k]), cm, expansions));
                }
            }
            let node = nodes[entry.node].clone();
            let value = node.g + cfg.rho_c * node.soft;
            let key = prune_key(&node.state, pos_res, vel_res);
            if closed.get(&key).is_some_and(|&v| v <= value + DOMINANCE_TOL) {
                continue;
            }
            closed.insert(key, value);

            if node.state == *goal {
                return Ok(self.finish(&nodes, entry.node, None, cm, expansions));
            }
            // A connection is queued at its full cost, soft cost included,
            // so cheaper partial paths are still expanded before it wins.
            if cfg.try_goal_connection && entry.f < best_tail {
                if let Some(c) = self.try_connect(&node.state, goal, cm) {
                    let soft = if cfg.rho_c > 0.0 { connection_soft_cost(&c, cm, lim) } else { 0.0 };
                    let f = value + c.total_cost + cfg.rho_c * soft;
                    if f < best_tail {
                        best_tail = f;
                        best_tail_at = Some((entry.node, tails.len()));
                        tails.push(c);
                        seq += 1;
                        open.push(OpenEntry { f, h: 0.0, seq, node: entry.node, tail: Some(tails.len() - 1) });
                    }
                }
            }
            if self.within_tolerance(&node.state, goal) {
                return Ok(self.finish(&nodes, entry.node, None, cm, expansions));
            }
            if closest.is_none_or(|(h, _)| entry.h < h) {
                closest = Some((entry.h, node.state));
            }
            if expansions >= cfg.max_expansions {
                break;
            }
            expansions += 1;

            for u in &lattice {
                let mp = MotionPrimitive::new(node.state, *u, cfg.tau);
                if !dynamic_feasible(&mp, lim) || !collision_free(&mp, cm, lim) {
                    continue;
                }
                let child = mp.end_state();
                let g = node.g + primitive_cost(u, cfg.tau, cfg.rho);
                let soft = if cfg.rho_c > 0.0 { node.soft + soft_cost(&mp, cm, lim) } else { 0.0 };
                let child_value = g + cfg.rho_c * soft;
                let child_key = prune_key(&child, pos_res, vel_res);
                if closed.get(&child_key).is_some_and(|&v| v <= child_value + DOMINANCE_TOL) {
                    continue;
                }
                if best_open.get(&child_key).is_some_and(|&v| v <= child_value + DOMINANCE_TOL) {
                    continue;
                }
                best_open.insert(child_key, child_value);
                let h = self.heuristic.estimate(&child, goal);
                nodes.push(Node { state: child, g, soft, parent: Some((entry.node, *u)) });
                seq += 1;
                open.push(OpenEntry { f: child_value + h, h, seq, node: nodes.len() - 1, tail: None });
            }
        }
        Err(PlanError::NoPath { expansions, closest: closest.map(|(_, s)| s) })
    }

    fn finish(
        &self,
        nodes: &[Node],
        last: usize,
        tail: Option<OptimalConnection>,
        cm: &Costmap,
        expansions: usize,
    ) -> SearchResult {
        SearchResult { trajectory: self.reconstruct(nodes, last, tail, cm), expansions }
    }

    fn reconstruct(&self, nodes: &[Node], last: usize, tail: Option<OptimalConnection>, cm: &Costmap) -> Trajectory {
        let mut segments = Vec::new();
        let mut cur = last;
        while let Some((parent, u)) = nodes[cur].parent {
            segments.push(Segment::Primitive(MotionPrimitive::new(nodes[parent].state, u, self.config.tau)));
            cur = parent;
        }
        segments.reverse();
        segments.extend(tail.map(Segment::Connection));
        Trajectory::new(nodes[cur].state, segments, self.config.rho, self.config.rho_c, cm, &self.config.limits)
    }
}

impl GlobalPlanner for KinodynamicAstar {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn plan(&self, start: &State, goal: &State, cm: &Costmap) -> Result<PlanOutcome, PlanError> {
        let r = self.search(start, goal, cm)?;
        Ok(PlanOutcome { path: Box::new(r.trajectory), expansions: r.expansions })
    }
}
