//! Common planner interface and the name-keyed planner registry.
//!
//! Every global planner turns a start/goal pair on a [`Costmap`] into a
//! time-parameterised path. The kinodynamic search and the grid A*
//! baseline are registered as `"kinodynamic_astar"` and `"grid_astar"`;
//! callers pick one at runtime from configuration.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::baseline::{BaselineConfig, GridAstarPlanner};
use crate::costmap::Costmap;
use crate::heuristic::{HeuristicParams, HeuristicRegistry};
use crate::kinodynamic::{KinodynamicAstar, SearchConfig};
use crate::primitives::State;
use crate::Vec2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSample {
    pub pos: Vec2,
    pub vel: Vec2,
    pub acc: Vec2,
}

/// A path with a time law.
pub trait TimedPath: Send + Sync + fmt::Debug {
    fn duration(&self) -> f64;

    /// Position, velocity and acceleration at `t`, clamped to `[0, T]`.
    fn sample(&self, t: f64) -> PathSample;

    /// Integrated squared acceleration.
    fn effort(&self) -> f64;

    /// Planner-specific objective, when the planner optimises one.
    fn cost(&self) -> Option<f64> {
        None
    }

    /// Soft collision cost accumulated along the path, when tracked.
    fn soft_cost(&self) -> Option<f64> {
        None
    }
}

/// Samples at `0, dt, 2 dt, ...` plus the final instant.
pub fn sample_uniform(path: &dyn TimedPath, dt: f64) -> Vec<(f64, PathSample)> {
    let total = path.duration();
    let n = (total / dt).floor() as usize;
    let mut out: Vec<(f64, PathSample)> = (0..=n).map(|k| k as f64 * dt).map(|t| (t, path.sample(t))).collect();
    if total - n as f64 * dt > 1e-9 {
        out.push((total, path.sample(total)));
    }
    out
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid start: {0}")]
    InvalidStart(String),
    #[error("invalid goal: {0}")]
    InvalidGoal(String),
    #[error("no path found after {expansions} expansions")]
    NoPath {
        expansions: usize,
        /// Expanded state with the smallest heuristic, if any.
        closest: Option<State>,
    },
    #[error("internal planner error: {0}")]
    Internal(String),
}

#[derive(Debug)]
pub struct PlanOutcome {
    pub path: Box<dyn TimedPath>,
    pub expansions: usize,
}

pub trait GlobalPlanner: Send + Sync {
    fn name(&self) -> &'static str;
    fn plan(&self, start: &State, goal: &State, cm: &Costmap) -> Result<PlanOutcome, PlanError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSettings {
    pub search: SearchConfig,
    pub heuristic: String,
    pub baseline: BaselineConfig,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self { search: SearchConfig::default(), heuristic: "lqmt_bounded".into(), baseline: BaselineConfig::default() }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("unknown planner `{name}` (available: {available})")]
    UnknownPlanner { name: String, available: String },
    #[error("unknown heuristic `{name}` (available: {available})")]
    UnknownHeuristic { name: String, available: String },
}

pub type PlannerFactory = fn(&PlannerSettings, &HeuristicRegistry) -> Result<Box<dyn GlobalPlanner>, RegistryError>;

pub struct PlannerRegistry {
    factories: BTreeMap<String, PlannerFactory>,
    heuristics: HeuristicRegistry,
}

impl Default for PlannerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

fn kinodynamic_factory(s: &PlannerSettings, h: &HeuristicRegistry) -> Result<Box<dyn GlobalPlanner>, RegistryError> {
    let params = HeuristicParams { rho: s.search.rho, v_max: s.search.limits.v_max };
    let heuristic = h.create(&s.heuristic, &params).ok_or_else(|| RegistryError::UnknownHeuristic {
        name: s.heuristic.clone(),
        available: h.names().join(", "),
    })?;
    Ok(Box::new(KinodynamicAstar::new(s.search.clone(), heuristic)))
}

fn grid_factory(s: &PlannerSettings, _: &HeuristicRegistry) -> Result<Box<dyn GlobalPlanner>, RegistryError> {
    Ok(Box::new(GridAstarPlanner::new(s.baseline.clone(), s.search.limits)))
}

impl PlannerRegistry {
    pub fn empty(heuristics: HeuristicRegistry) -> Self {
        Self { factories: BTreeMap::new(), heuristics }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty(HeuristicRegistry::with_builtins());
        r.register(KinodynamicAstar::NAME, kinodynamic_factory);
        r.register(GridAstarPlanner::NAME, grid_factory);
        r
    }

    pub fn register(&mut self, name: &str, factory: PlannerFactory) {
        self.factories.insert(name.to_owned(), factory);
    }

    pub fn heuristics(&self) -> &HeuristicRegistry {
        &self.heuristics
    }

    pub fn heuristics_mut(&mut self) -> &mut HeuristicRegistry {
        &mut self.heuristics
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn create(&self, name: &str, settings: &PlannerSettings) -> Result<Box<dyn GlobalPlanner>, RegistryError> {
        let factory = self.factories.get(name).ok_or_else(|| RegistryError::UnknownPlanner {
            name: name.to_owned(),
            available: self.names().join(", "),
        })?;
        factory(settings, &self.heuristics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::{InflationParams, OccupancyGrid};

    #[derive(Debug)]
    struct Still(State);

    impl TimedPath for Still {
        fn duration(&self) -> f64 {
            0.0
        }
        fn sample(&self, _: f64) -> PathSample {
            PathSample { pos: self.0.pos, vel: Vec2::zeros(), acc: Vec2::zeros() }
        }
        fn effort(&self) -> f64 {
            0.0
        }
    }

    struct Stay;

    impl GlobalPlanner for Stay {
        fn name(&self) -> &'static str {
            "stay"
        }
        fn plan(&self, start: &State, _: &State, _: &Costmap) -> Result<PlanOutcome, PlanError> {
            Ok(PlanOutcome { path: Box::new(Still(*start)), expansions: 0 })
        }
    }

    #[test]
    fn builtins_and_custom_registration() {
        let mut reg = PlannerRegistry::with_builtins();
        assert_eq!(reg.names(), vec!["grid_astar", "kinodynamic_astar"]);
        let s = PlannerSettings::default();
        assert_eq!(reg.create("kinodynamic_astar", &s).unwrap().name(), "kinodynamic_astar");
        assert_eq!(reg.create("grid_astar", &s).unwrap().name(), "grid_astar");
        assert!(matches!(reg.create("rrt", &s), Err(RegistryError::UnknownPlanner { .. })));
        let bad = PlannerSettings { heuristic: "manhattan".into(), ..PlannerSettings::default() };
        assert!(matches!(reg.create("kinodynamic_astar", &bad), Err(RegistryError::UnknownHeuristic { .. })));

        reg.register("stay", |_, _| Ok(Box::new(Stay)));
        let p = reg.create("stay", &s).unwrap();
        let cm = Costmap::new(OccupancyGrid::new(4, 4, 1.0, Vec2::zeros()).unwrap(), InflationParams::default()).unwrap();
        let out = p.plan(&State::new(1.0, 1.0, 0.0, 0.0), &State::new(2.0, 2.0, 0.0, 0.0), &cm).unwrap();
        assert_eq!(out.path.duration(), 0.0);
    }

    #[test]
    fn uniform_sampling_includes_end() {
        #[derive(Debug)]
        struct Line;
        impl TimedPath for Line {
            fn duration(&self) -> f64 {
                1.05
            }
            fn sample(&self, t: f64) -> PathSample {
                PathSample { pos: Vec2::new(t, 0.0), vel: Vec2::new(1.0, 0.0), acc: Vec2::zeros() }
            }
            fn effort(&self) -> f64 {
                0.0
            }
        }
        let s = sample_uniform(&Line, 0.5);
        let ts: Vec<f64> = s.iter().map(|(t, _)| *t).collect();
        assert_eq!(ts, vec![0.0, 0.5, 1.0, 1.05]);
    }
}
