//! Planar two-patch foraging world.
//!
//! The world is a square centered on the origin with two circular patches on
//! the x axis. A patch pays `n0 * exp(-lambda * n)` on every step the agent
//! stands in it, where `n` counts harvested steps since the patch was last
//! refreshed; entering one patch refreshes the other.

mod config;
mod episode;
mod lidar;
mod world;

use thiserror::Error;

pub use config::{MotionConfig, SensorConfig, WorldConfig};
pub use episode::{run_episode, total_reward, Percept, Policy, StepRecord};
pub use lidar::{
    lidar_scan, ray_azimuths, ray_boundary_distance, ray_disc_distance, ObjectKind, Observation,
    RayReading,
};
pub use world::{
    initial_observation, normalize_angle, patch_color, patch_containing, patch_reward, reset, step,
    Action, StepOutcome, WorldState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid world configuration: {0}")]
    Config(String),
    #[error("episode complete after {steps} steps")]
    EpisodeComplete { steps: u32 },
}
