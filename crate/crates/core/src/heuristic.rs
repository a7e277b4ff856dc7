//! Cost-to-go estimates for the kinodynamic search, selectable by name.

use std::collections::BTreeMap;

use crate::lqmt::{bounded_heuristic, heuristic_value, BoundaryPair};
use crate::primitives::State;

pub trait Heuristic: Send + Sync {
    fn name(&self) -> &'static str;
    fn estimate(&self, from: &State, to: &State) -> f64;
}

/// Minimum of `J*(T) + rho T` over the duration. With `include_time`
/// unset only `J*(T_h)` is returned, which is smaller and still admissible.
#[derive(Clone, Copy, Debug)]
pub struct LqmtHeuristic {
    pub rho: f64,
    pub include_time: bool,
}

impl Heuristic for LqmtHeuristic {
    fn name(&self) -> &'static str {
        if self.include_time {
            "lqmt"
        } else {
            "lqmt_effort"
        }
    }

    fn estimate(&self, from: &State, to: &State) -> f64 {
        heuristic_value(&BoundaryPair::new(*from, *to), self.rho, self.include_time)
    }
}

/// [`LqmtHeuristic`] with the duration restricted to at least the time
/// needed to cover the larger axis displacement at the per-axis speed
/// bound. Still a lower bound on any trajectory that respects that bound.
#[derive(Clone, Copy, Debug)]
pub struct SpeedBoundedLqmt {
    pub rho: f64,
    pub v_max: f64,
}

impl Heuristic for SpeedBoundedLqmt {
    fn name(&self) -> &'static str {
        "lqmt_bounded"
    }

    fn estimate(&self, from: &State, to: &State) -> f64 {
        let t_min = (to.pos - from.pos).amax() / self.v_max;
        bounded_heuristic(&BoundaryPair::new(*from, *to), self.rho, t_min)
    }
}

/// Uniform-cost search.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroHeuristic;

impl Heuristic for ZeroHeuristic {
    fn name(&self) -> &'static str {
        "zero"
    }

    fn estimate(&self, _: &State, _: &State) -> f64 {
        0.0
    }
}

/// Quantities a heuristic may depend on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeuristicParams {
    pub rho: f64,
    /// Per-axis velocity bound of the searched trajectories.
    pub v_max: f64,
}

pub type HeuristicFactory = fn(&HeuristicParams) -> Box<dyn Heuristic>;

#[derive(Clone)]
pub struct HeuristicRegistry {
    factories: BTreeMap<String, HeuristicFactory>,
}

impl Default for HeuristicRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl HeuristicRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("lqmt", |p| Box::new(LqmtHeuristic { rho: p.rho, include_time: true }));
        r.register("lqmt_effort", |p| Box::new(LqmtHeuristic { rho: p.rho, include_time: false }));
        r.register("lqmt_bounded", |p| Box::new(SpeedBoundedLqmt { rho: p.rho, v_max: p.v_max }));
        r.register("zero", |_| Box::new(ZeroHeuristic));
        r
    }

    pub fn register(&mut self, name: &str, factory: HeuristicFactory) {
        self.factories.insert(name.to_owned(), factory);
    }

    pub fn create(&self, name: &str, params: &HeuristicParams) -> Option<Box<dyn Heuristic>> {
        self.factories.get(name).map(|f| f(params))
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve_by_name() {
        let reg = HeuristicRegistry::with_builtins();
        let p = HeuristicParams { rho: 1.0, v_max: 0.25 };
        assert_eq!(reg.names(), vec!["lqmt", "lqmt_bounded", "lqmt_effort", "zero"]);
        for name in reg.names() {
            assert_eq!(reg.create(name, &p).unwrap().name(), name);
        }
        assert!(reg.create("euclid", &p).is_none());
        let a = State::new(0.0, 0.0, 0.0, 0.0);
        let b = State::new(1.0, 0.0, 0.0, 0.0);
        let full = reg.create("lqmt", &p).unwrap().estimate(&a, &b);
        let effort = reg.create("lqmt_effort", &p).unwrap().estimate(&a, &b);
        let bounded = reg.create("lqmt_bounded", &p).unwrap().estimate(&a, &b);
        assert!((full - 8.0 / 6f64.sqrt()).abs() < 1e-9);
        assert!(effort < full);
        // at least 4 s at 0.25 m/s: 12/64 + 4
        assert!((bounded - (12.0 / 64.0 + 4.0)).abs() < 1e-9);
        assert_eq!(reg.create("zero", &p).unwrap().estimate(&a, &b), 0.0);
    }
}
