//! Patch-foraging simulation, normative leave-time solvers and analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agents;
pub mod analysis;
pub mod batch;
pub mod env;
pub mod episode_log;
pub mod optimal;
pub mod stats;
