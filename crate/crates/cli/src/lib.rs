//! Experiment driver and acceptance suite for the capax solvers.
//!
//! The library half exists so integration tests can call the config
//! parser, the experiment runner, and the verifier directly; the `capax`
//! binary is a thin argument layer over the same entry points.

pub mod config;
pub mod experiments;
pub mod recipes;
pub mod verify;

mod design;
