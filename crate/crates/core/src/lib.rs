//! Coupled navigation and printing control for a mobile additive
//! manufacturing robot.
//!
//! - [`world`]: planar geometry, the factory map and scenario files
//! - [`gcode`]: G-code parsing, timing, layers and critical print windows
//! - [`qp`]: dense ADMM QP solver
//! - [`mpc`]: receding-horizon tracking with obstacle, zone and speed
//!   constraints
//! - [`behavior`]: reactive Cruise/Slow/Turn/Side detour logic
//! - [`coupling`]: speed policy and extrusion pause/resume around bumps
//! - [`sim`]: plant, sensors, deposition model and the episode loop
//! - [`runner`]: the command-line subcommands as library calls

// Validation is written as `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Indexed loops read closer to the matrix algebra they implement.
#![allow(clippy::needless_range_loop)]

pub mod behavior;
pub mod config;
pub mod coupling;
pub mod error;
pub mod gcode;
pub mod mpc;
pub mod qp;
pub mod runner;
pub mod sim;
pub mod world;

pub use error::{Error, Result};
