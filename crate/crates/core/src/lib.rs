//! Simulator and numerics for leader-follower consensus of nonlinear agents driven by a
//! neural-variable-structure adaptive controller, with packet-level denial-of-service attacks
//! on the controller links and a hold-input fallback.

// `!(x > 0.0)` style checks are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod controller;
pub mod dos;
pub mod config;
pub mod engine;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod observer;
pub mod parallel;
pub mod plant;
pub mod riccati;
pub mod svg;
pub mod topology;
pub mod trace;

pub use error::{Error, Result, Violation};
