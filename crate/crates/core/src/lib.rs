//! Kinodynamic navigation planning for omnidirectional ground robots.
//!
//! The crate is organised as a two-stage pipeline:
//!
//! * a front-end [`kinodynamic`] A* search over double-integrator
//!   [`primitives`], guided by the closed-form minimum-time relaxation in
//!   [`lqmt`] and steered away from obstacles by the inflation costs of a
//!   [`costmap`];
//! * a back-end timed-elastic-band refinement ([`teb`]) under an
//!   omnidirectional body model with asymmetric forward/lateral limits.
//!
//! Planners are interchangeable behind [`planner::GlobalPlanner`] and are
//! looked up by name in a [`planner::PlannerRegistry`]; the grid A*
//! [`baseline`] is registered next to the kinodynamic search so the two can
//! be compared by [`scenario`] runs.

pub mod baseline;
pub mod costmap;
pub mod geometry;
pub mod heuristic;
pub mod kinodynamic;
pub mod lqmt;
pub mod planner;
pub mod primitives;
pub mod scenario;
pub mod synth;
pub mod teb;

pub use costmap::{Costmap, InflationParams, OccupancyGrid};
pub use geometry::Vec2;
pub use kinodynamic::{KinodynamicAstar, SearchConfig, Trajectory};
pub use planner::{GlobalPlanner, PlanError, PlannerRegistry, TimedPath};
pub use primitives::{ControlInput, KinoLimits, MotionPrimitive, State};
