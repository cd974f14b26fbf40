//! Core of the lapaware training simulator.
//!
//! Everything here is deterministic: given a scene and a sequence of control
//! deltas, a [`sim::Simulation`] produces the same contacts, interaction
//! tuples, feedback and log bytes on every run.

// `!(x > 0.0)` is how NaN gets rejected along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contact;
pub mod feedback;
pub mod geometry;
pub mod instrument;
pub mod interaction;
pub mod perception;
pub mod scenarios;
pub mod scene;
pub mod session;
pub mod sim;
pub mod tasks;
