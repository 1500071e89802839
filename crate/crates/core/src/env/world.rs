use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::lidar::{lidar_scan, Observation};
use super::{EnvError, WorldConfig};

/// Reward paid by a patch that has been harvested `n` times since its last refresh.
pub fn patch_reward(n: u32, n0: f64, lambda: f64) -> f64 {
    n0 * (-lambda * f64::from(n)).exp()
}

/// Surface color of a patch: all three channels equal `patch_reward(n) / n0`,
/// fading from white to black as the patch depletes.
pub fn patch_color(n: u32, n0: f64, lambda: f64) -> [f64; 3] {
    let level = patch_reward(n, n0, lambda) / n0;
    [level; 3]
}

/// Five-dimensional continuous action, every component in [-1, 1].
///
/// Components: forward/back, strafe (positive = left), rotate (positive =
/// counter-clockwise), pitch and jump. The last two are accepted and ignored
/// by the planar world.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 5]", into = "[f64; 5]")]
pub struct Action([f64; 5]);

impl Action {
    pub const DIM: usize = 5;

    pub fn new(components: [f64; 5]) -> Self {
        let mut c = components;
        for v in &mut c {
            *v = if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        }
        Action(c)
    }

    pub fn idle() -> Self {
        Action([0.0; 5])
    }

    pub fn forward(&self) -> f64 {
        self.0[0]
    }
    pub fn strafe(&self) -> f64 {
        self.0[1]
    }
    pub fn rotate(&self) -> f64 {
        self.0[2]
    }
    pub fn components(&self) -> [f64; 5] {
        self.0
    }
}

impl From<[f64; 5]> for Action {
    fn from(c: [f64; 5]) -> Self {
        Action::new(c)
    }
}

impl From<Action> for [f64; 5] {
    fn from(a: Action) -> Self {
        a.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub step: u32,
    pub position: [f64; 2],
    /// Radians, normalized to (-pi, pi].
    pub heading: f64,
    pub velocity: [f64; 2],
    /// Harvest counter per patch since its last refresh.
    pub depletion: [u32; 2],
    pub inside: Option<usize>,
    pub score: f64,
    pub seed: u64,
}

/// Result of advancing the world by one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: WorldState,
    pub reward: f64,
    pub observation: Observation,
}

pub fn normalize_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Patch whose closed disc contains `position`, if any.
pub fn patch_containing(position: [f64; 2], config: &WorldConfig) -> Option<usize> {
    config.patch_centers().iter().position(|c| {
        let dx = position[0] - c[0];
        let dy = position[1] - c[1];
        (dx * dx + dy * dy).sqrt() <= config.patch_radius
    })
}

/// Start of an episode: world center, facing perpendicular to the patch axis
/// (+y), both patches fresh. The world itself is deterministic; the seed is
/// carried for logging.
pub fn reset(config: &WorldConfig, seed: u64) -> Result<WorldState, EnvError> {
    config.validate()?;
    Ok(WorldState {
        step: 0,
        position: [0.0, 0.0],
        heading: PI / 2.0,
        velocity: [0.0, 0.0],
        depletion: [0, 0],
        inside: None,
        score: 0.0,
        seed,
    })
}

/// Initial observation, before any action has been taken.
pub fn initial_observation(state: &WorldState, config: &WorldConfig) -> Observation {
    lidar_scan(state, config, 0.0, Action::idle())
}

/// Advance one step: move, test membership, pay, then update counters.
pub fn step(
    state: &WorldState,
    action: &Action,
    config: &WorldConfig,
) -> Result<StepOutcome, EnvError> {
    if state.step >= config.episode_steps {
        return Err(EnvError::EpisodeComplete {
            steps: config.episode_steps,
        });
    }
    let motion = &config.motion;
    let mut next = state.clone();

    let (s, c) = state.heading.sin_cos();
    let fwd = [c, s];
    let left = [-s, c];
    let gain = motion.gain();
    let mut v = [
        motion.inertia * state.velocity[0]
            + gain * (action.forward() * fwd[0] + action.strafe() * left[0]),
        motion.inertia * state.velocity[1]
            + gain * (action.forward() * fwd[1] + action.strafe() * left[1]),
    ];
    let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if speed > motion.max_speed {
        let k = motion.max_speed / speed;
        v = [v[0] * k, v[1] * k];
    }
    next.heading = normalize_angle(state.heading + action.rotate() * motion.max_turn);

    let half = config.half_size();
    for axis in 0..2 {
        let p = state.position[axis] + v[axis];
        if p.abs() > half {
            next.position[axis] = p.clamp(-half, half);
            v[axis] = 0.0;
        } else {
            next.position[axis] = p;
        }
    }
    next.velocity = v;

    next.inside = patch_containing(next.position, config);
    let reward = match next.inside {
        Some(p) => {
            let r = patch_reward(next.depletion[p], config.n0, config.lambda);
            next.depletion[p] += 1;
            next.depletion[1 - p] = 0;
            r
        }
        None => 0.0,
    };
    next.score += reward;
    next.step += 1;

    let observation = lidar_scan(&next, config, reward, *action);
    Ok(StepOutcome {
        state: next,
        reward,
        observation,
    })
}
