//! Simulation and analysis toolkit for tactile-guided micro-drone landings on
//! hand-held pads.
//!
//! The optical feedback chain runs drone LED → recessed photo-transistor →
//! vibration amplitude ([`photometry`], [`tactor_array`]). [`flightworld`]
//! drives vertically descending drones over pads steered by synthetic
//! operators ([`policies`]) or a live human ([`session`]). Trials are logged
//! as line-delimited JSON ([`trial_log`]) and reduced by [`kinemetrics`],
//! [`landing_metrics`] and [`inference`]; [`harness`] ties it together into
//! batch sweeps and table-shaped reports.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod condition;
pub mod error;
pub mod flightworld;
pub mod geometry;
pub mod harness;
pub mod inference;
pub mod kinemetrics;
pub mod landing_metrics;
pub mod photometry;
pub mod policies;
pub mod session;
pub mod tactor_array;
pub mod trial_log;

pub use condition::{ConditionSpec, Feedback, SpeedClass};
pub use error::{Error, Result};
