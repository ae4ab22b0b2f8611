//! Probabilistic cell decomposition path planning in the unit cube, with
//! replayable traces and audits of the planner's completeness arguments.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod collision;
pub mod decomposition;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod planner;
pub mod rng;
pub mod svg;
pub mod trace;

pub use collision::{Obstacle, Scene};
pub use error::{Error, Result};
pub use geometry::{Aabb, Configuration, Polyline};
pub use planner::{plan, plan_untraced, PlanResult, PlanStatus, PlannerConfig};
