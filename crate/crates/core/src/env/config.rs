use serde::{Deserialize, Serialize};

use super::EnvError;

/// Ray fan mounted on the agent, expressed relative to its heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub rays: usize,
    /// Degrees, counter-clockwise positive.
    pub azimuth_min: f64,
    pub azimuth_max: f64,
    /// Meters. Distances are reported normalized by this value.
    pub max_range: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            rays: 8,
            azimuth_min: -45.0,
            azimuth_max: 45.0,
            max_range: 128.0,
        }
    }
}

/// First-order planar kinematics.
///
/// Each step the velocity is low-passed: `v <- inertia * v + gain * command`,
/// with `gain = max_speed * (1 - inertia)` so that a sustained unit command
/// settles exactly at `max_speed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    /// Meters per step.
    pub max_speed: f64,
    /// Radians per step at full rotate command.
    pub max_turn: f64,
    /// Velocity retention coefficient in [0, 1).
    pub inertia: f64,
}

impl MotionConfig {
    pub fn gain(&self) -> f64 {
        self.max_speed * (1.0 - self.inertia)
    }
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            max_speed: 0.075,
            max_turn: 0.2,
            inertia: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Side of the square world in meters; the world spans `[-size/2, size/2]` on both axes.
    pub world_size: f64,
    pub patch_radius: f64,
    /// Center-to-center separation of the two patches along the x axis.
    pub patch_distance: f64,
    /// Reward paid by a fresh patch.
    pub n0: f64,
    /// Per-step exponential decay of the patch reward.
    pub lambda: f64,
    pub episode_steps: u32,
    pub sensor: SensorConfig,
    pub motion: MotionConfig,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            world_size: 32.0,
            patch_radius: 2.0,
            patch_distance: 8.0,
            n0: 1.0 / 30.0,
            lambda: 0.01,
            episode_steps: 3600,
            sensor: SensorConfig::default(),
            motion: MotionConfig::default(),
        }
    }
}

impl WorldConfig {
    pub fn with_distance(mut self, patch_distance: f64) -> Self {
        self.patch_distance = patch_distance;
        self
    }

    pub fn half_size(&self) -> f64 {
        self.world_size / 2.0
    }

    /// Patch centers, symmetric about the world center on the x axis.
    pub fn patch_centers(&self) -> [[f64; 2]; 2] {
        let h = self.patch_distance / 2.0;
        [[-h, 0.0], [h, 0.0]]
    }

    pub fn patch_center(&self, patch: usize) -> [f64; 2] {
        self.patch_centers()[patch]
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let fail = |msg: &str| Err(EnvError::Config(msg.to_string()));
        let finite = [
            self.world_size,
            self.patch_radius,
            self.patch_distance,
            self.n0,
            self.lambda,
            self.sensor.azimuth_min,
            self.sensor.azimuth_max,
            self.sensor.max_range,
            self.motion.max_speed,
            self.motion.max_turn,
            self.motion.inertia,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return fail("all numeric fields must be finite");
        }
        if self.world_size <= 0.0 {
            return fail("world_size > 0");
        }
        if self.patch_radius <= 0.0 {
            return fail("patch_radius > 0");
        }
        let extent = self.patch_distance / 2.0 + self.patch_radius;
        if extent <= 0.0 || extent > self.half_size() {
            return fail(
                "patch outside bounds: require 0 < patch_distance/2 + patch_radius <= world_size/2",
            );
        }
        if self.patch_distance <= 2.0 * self.patch_radius {
            return fail("patches overlap: require patch_distance > 2 * patch_radius");
        }
        if self.n0 <= 0.0 {
            return fail("n0 > 0");
        }
        if self.lambda <= 0.0 {
            return fail("lambda > 0");
        }
        if self.episode_steps < 1 {
            return fail("episode_steps >= 1");
        }
        if self.sensor.rays < 1 {
            return fail("sensor.rays >= 1");
        }
        if self.sensor.azimuth_min >= self.sensor.azimuth_max {
            return fail("sensor.azimuth_min < sensor.azimuth_max");
        }
        if self.sensor.max_range <= 0.0 {
            return fail("sensor.max_range > 0");
        }
        if self.motion.max_speed <= 0.0 || self.motion.max_turn < 0.0 {
            return fail("motion.max_speed > 0 and motion.max_turn >= 0");
        }
        if !(0.0..1.0).contains(&self.motion.inertia) {
            return fail("motion.inertia in [0, 1)");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let cfg: WorldConfig =
            serde_json::from_str(text).map_err(|e| EnvError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
