//! Closed-loop simulation of human-machine adaptive shared control for an
//! automated vehicle whose automation degrades during a driving task.
//!
//! The loop, run at a single fixed rate, is:
//!
//! 1. the automation MPC computes its desired control `u_a,des`,
//! 2. a fault layer turns it into the degraded output `u_a,f`,
//! 3. the ego trajectory under `u_a,f` is predicted with a CTRA model,
//! 4. lateral risk (potential field over a triangulated safe corridor) and
//!    longitudinal risk (dynamic potential field over neighbours) are
//!    evaluated,
//! 5. a Mamdani fuzzy system maps the risks to the automation authority
//!    bound `alpha_a`, which caps the automation's actual output,
//! 6. a model driver (decision MPC plus first-order neuromuscular lag)
//!    supplies the compensation, and the plant receives
//!    `u = u_a,act + u_h,act`.
//!
//! Modules map one-to-one onto those stages; [`sim`] wires them together.

// Negated comparisons such as `!(x > 0.0)` deliberately also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod authority;
pub mod controllers;
pub mod dynamics;
pub mod faults;
pub mod geometry;
pub mod parallel;
pub mod prediction;
pub mod risk;
pub mod road;
pub mod safe_area;
pub mod sim;

pub use authority::{allocate, fis_alpha, AllocationParams, Branch, FuzzySets, RuleBase};
pub use controllers::{
    automation_mpc, driver_lag_step, driver_mpc, DriverParams, MpcConfig, MpcController, MpcSolution, Reference,
};
pub use dynamics::{ActuatorBounds, ControlVector, VehicleParams, VehicleState};
pub use faults::{inject, FaultChannel, FaultProfile};
pub use geometry::Point;
pub use prediction::{ctra_predict, predict_neighbor, seed_from_degraded_control, CtraState};
pub use risk::{ApfParams, DpfParams, RiskReport, TaskWeights};
pub use road::RoadModel;
pub use safe_area::{find_corridor, triangulate, Obstacle, SafeArea, Triangulation};
pub use sim::{run, Mode, ScenarioConfig, Summary, TraceRecord};
