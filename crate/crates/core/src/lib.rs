//! Quasi-static simulator and air-mass control workbench for a 16-channel
//! soft pneumatic hand.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuators;
pub mod config;
pub mod control;
pub mod error;
pub mod experiments;
pub mod hand;
pub mod interface;
pub mod par;
pub mod pneumatics;
pub mod sim;

pub use error::{Error, Result};
