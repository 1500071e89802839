//! Foraging agents: a shared navigation and parking controller with
//! pluggable stay/leave rules.
//!
//! Every agent alternates between two modes. In `Travel` it steers toward
//! the target patch; entering it switches to `Forage`, where the agent parks
//! just inside the patch edge that faces the other patch and evaluates its
//! leave rule once per step. A leave decision retargets the other patch, and
//! because the parking spot is within one step of the edge, the agent is out
//! of the patch on the very next step.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{
    normalize_angle, patch_containing, reset, step, Action, Percept, Policy, WorldConfig,
    WorldState,
};
use crate::optimal::{discounted_mvt_leave_step, OptimalError, PatchSchedule, DEFAULT_MAX_STEPS};

/// Depth inside the patch edge at which foraging agents park.
pub const PARK_DEPTH: f64 = 0.005;

/// Length of the exposed internal state vector.
pub const STATE_DIM: usize = 6;

/// Names of the exposed state coordinates, in order.
pub const STATE_NAMES: [&str; STATE_DIM] = [
    "dv",
    "rate_estimate",
    "last_reward",
    "forage",
    "visit_steps",
    "visit_reward",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    /// Leave once the offered reward drops below a fixed `theta`.
    Threshold,
    /// Leave once the offered reward drops below the running rate estimate.
    MvtLearner,
    /// Noisy leaky integration of the rate gap up to a threshold.
    Accumulator,
    /// Leave at the discounted-MVT step computed for the environment.
    Planner,
    /// Uniform random actions.
    Random,
    /// All-zero actions.
    Idle,
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AgentKind::Threshold => "threshold",
            AgentKind::MvtLearner => "mvt_learner",
            AgentKind::Accumulator => "accumulator",
            AgentKind::Planner => "planner",
            AgentKind::Random => "random",
            AgentKind::Idle => "idle",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentParams {
    pub kind: AgentKind,
    pub theta: f64,
    pub ema_alpha: f64,
    pub accum_gain: f64,
    /// Fraction of `dv` lost per step.
    pub accum_leak: f64,
    pub accum_noise_sd: f64,
    pub accum_threshold: f64,
    pub gamma: f64,
    pub horizon: u32,
    /// Travel steps assumed by the planner; probed from the world when absent.
    pub planner_tau: Option<u32>,
    pub seed: u64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            kind: AgentKind::MvtLearner,
            theta: 0.012,
            ema_alpha: 1.0 / 500.0,
            accum_gain: 400.0,
            accum_leak: 0.2,
            accum_noise_sd: 1.0,
            accum_threshold: 1.0,
            gamma: 1.0,
            horizon: 5000,
            planner_tau: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("invalid agent parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Solver(#[from] OptimalError),
}

impl AgentParams {
    pub fn of_kind(kind: AgentKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    /// Stable label used to group episodes by agent.
    pub fn id(&self) -> String {
        match self.kind {
            AgentKind::Threshold => format!("threshold-theta{}-s{}", self.theta, self.seed),
            AgentKind::Planner => format!("planner-g{}-s{}", self.gamma, self.seed),
            k => format!("{k}-s{}", self.seed),
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Params(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.ema_alpha > 0.0 && self.ema_alpha <= 1.0) {
            return bad("ema_alpha must lie in (0, 1]");
        }
        if !(self.accum_noise_sd >= 0.0) {
            return bad("accum_noise_sd must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.accum_leak) {
            return bad("accum_leak must lie in [0, 1]");
        }
        if !self.theta.is_finite()
            || !self.accum_gain.is_finite()
            || !self.accum_threshold.is_finite()
        {
            return bad("theta, accum_gain and accum_threshold must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Forage,
    Travel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Stay,
    Leave,
}

/// Proportional holonomic steering toward `target`.
///
/// Translation is commanded along the bearing in the body frame, so the
/// agent moves at full speed even while it is still turning.
pub fn navigate(position: [f64; 2], heading: f64, target: [f64; 2], max_turn: f64) -> Action {
    let bearing = (target[1] - position[1]).atan2(target[0] - position[0]);
    let err = normalize_angle(bearing - heading);
    let rotate = if max_turn > 0.0 {
        (err / max_turn).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Action::new([err.cos(), err.sin(), rotate, 0.0, 0.0])
}

pub fn threshold_decide(current_patch_reward: f64, theta: f64) -> Decision {
    if current_patch_reward < theta {
        Decision::Leave
    } else {
        Decision::Stay
    }
}

pub fn ema_update(rate: f64, reward: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * rate + alpha * reward
}

/// One step of the leaky accumulator without noise.
pub fn accumulator_drift(
    dv: f64,
    current_patch_reward: f64,
    rate: f64,
    gain: f64,
    leak: f64,
) -> f64 {
    (1.0 - leak) * dv + gain * (rate - current_patch_reward)
}

/// Action that brings the agent to rest at `target`. Far away it asks for
/// one fifth of the remaining distance per step, which is exactly what
/// coasting under the default inertia delivers, so the approach cannot
/// overshoot; close in it lands in a single step.
fn park(state: &WorldState, target: [f64; 2], face: [f64; 2], config: &WorldConfig) -> Action {
    let m = &config.motion;
    let gain = m.gain();
    let d = [target[0] - state.position[0], target[1] - state.position[1]];
    let solve = |want: [f64; 2]| {
        [
            (want[0] - m.inertia * state.velocity[0]) / gain,
            (want[1] - m.inertia * state.velocity[1]) / gain,
        ]
    };
    let mut u = solve(d);
    if u[0].hypot(u[1]) > 1.0 {
        let k = (1.0 - m.inertia).max(0.05);
        let mut want = [d[0] * k, d[1] * k];
        let speed = want[0].hypot(want[1]);
        if speed > m.max_speed {
            want = [want[0] * m.max_speed / speed, want[1] * m.max_speed / speed];
        }
        u = solve(want);
        let norm = u[0].hypot(u[1]);
        if norm > 1.0 {
            u = [u[0] / norm, u[1] / norm];
        }
    }
    let (s, c) = state.heading.sin_cos();
    let fwd = u[0] * c + u[1] * s;
    let left = -u[0] * s + u[1] * c;
    let bearing = (face[1] - state.position[1]).atan2(face[0] - state.position[0]);
    let err = normalize_angle(bearing - state.heading);
    let rotate = if m.max_turn > 0.0 {
        (err / m.max_turn).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Action::new([fwd, left, rotate, 0.0, 0.0])
}

/// Spot just inside `patch`'s edge on the side facing the other patch.
pub fn park_point(config: &WorldConfig, patch: usize) -> [f64; 2] {
    let here = config.patch_center(patch);
    let there = config.patch_center(1 - patch);
    let (dx, dy) = (there[0] - here[0], there[1] - here[1]);
    let len = dx.hypot(dy);
    let reach = (config.patch_radius - PARK_DEPTH).max(0.0);
    [here[0] + dx / len * reach, here[1] + dy / len * reach]
}

/// Out-of-patch steps needed to go from rest at one patch's parking spot to
/// entering the other patch.
pub fn probe_travel_steps(config: &WorldConfig) -> Result<u32, AgentError> {
    let mut state = reset(config, 0).map_err(|e| AgentError::Params(e.to_string()))?;
    state.position = park_point(config, 0);
    let target = config.patch_center(1);
    state.heading = (target[1] - state.position[1]).atan2(target[0] - state.position[0]);
    state.inside = patch_containing(state.position, config);
    let mut travel = 0;
    loop {
        let action = navigate(
            state.position,
            state.heading,
            target,
            config.motion.max_turn,
        );
        state = match step(&state, &action, config) {
            Ok(out) => out.state,
            Err(_) => return Err(AgentError::Params("travel probe ran out of episode".into())),
        };
        match state.inside {
            Some(1) => return Ok(travel),
            None => travel += 1,
            Some(_) => {}
        }
    }
}

/// Closed-loop foraging agent.
#[derive(Debug, Clone)]
pub struct Agent {
    params: AgentParams,
    config: WorldConfig,
    schedule: PatchSchedule,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    planner_leave: Option<u32>,
    pub mode: Mode,
    pub target: usize,
    pub dv: f64,
    pub rate: f64,
    pub last_reward: f64,
    pub visit_steps: u32,
    pub visit_reward: f64,
    leaves: u32,
}

impl Agent {
    pub fn new(
        params: &AgentParams,
        config: &WorldConfig,
        episode_seed: u64,
    ) -> Result<Self, AgentError> {
        params.validate()?;
        let schedule = PatchSchedule::new(config.n0, config.lambda);
        let planner_leave = if params.kind == AgentKind::Planner {
            let tau = match params.planner_tau {
                Some(t) => t,
                None => probe_travel_steps(config)?,
            };
            let sol = discounted_mvt_leave_step(
                tau,
                params.gamma,
                params.horizon,
                &schedule,
                DEFAULT_MAX_STEPS,
            )?;
            log::debug!(
                "planner tau={tau} gamma={} leave_step={}",
                params.gamma,
                sol.leave_step
            );
            Some(sol.leave_step)
        } else {
            None
        };
        let noise = if params.accum_noise_sd > 0.0 {
            Some(
                Normal::new(0.0, params.accum_noise_sd)
                    .map_err(|e| AgentError::Params(e.to_string()))?,
            )
        } else {
            None
        };
        let mix = params.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ episode_seed;
        Ok(Self {
            params: params.clone(),
            config: *config,
            schedule,
            rng: ChaCha8Rng::seed_from_u64(mix),
            noise,
            planner_leave,
            mode: Mode::Travel,
            target: 0,
            dv: 0.0,
            rate: 0.0,
            last_reward: 0.0,
            visit_steps: 0,
            visit_reward: 0.0,
            leaves: 0,
        })
    }

    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    /// In-patch step at which the planner leaves.
    pub fn planner_leave_step(&self) -> Option<u32> {
        self.planner_leave
    }

    /// Number of leave decisions taken so far.
    pub fn leave_count(&self) -> u32 {
        self.leaves
    }

    fn decide(&mut self, offered: f64) -> Decision {
        let p = &self.params;
        match p.kind {
            AgentKind::Threshold => threshold_decide(offered, p.theta),
            AgentKind::MvtLearner => threshold_decide(offered, self.rate),
            AgentKind::Planner => {
                if self.visit_steps >= self.planner_leave.unwrap_or(u32::MAX) {
                    Decision::Leave
                } else {
                    Decision::Stay
                }
            }
            AgentKind::Accumulator => {
                let mut next =
                    accumulator_drift(self.dv, offered, self.rate, p.accum_gain, p.accum_leak);
                if let Some(noise) = &self.noise {
                    next += noise.sample(&mut self.rng);
                }
                if next >= p.accum_threshold {
                    self.dv = p.accum_threshold;
                    Decision::Leave
                } else {
                    self.dv = next;
                    Decision::Stay
                }
            }
            AgentKind::Random | AgentKind::Idle => Decision::Stay,
        }
    }
}

impl Policy for Agent {
    fn act(&mut self, percept: &Percept<'_>) -> Action {
        let state = percept.state;
        match self.params.kind {
            AgentKind::Idle => return Action::idle(),
            AgentKind::Random => {
                let mut c = [0.0; 5];
                for v in &mut c {
                    *v = self.rng.random_range(-1.0..=1.0);
                }
                return Action::new(c);
            }
            _ => {}
        }
        if self.mode == Mode::Forage {
            // offered reward of the next step, read off the patch color
            if let Some((_, level)) = percept.observation.enclosing_patch() {
                if self.decide(level * self.schedule.n0) == Decision::Leave {
                    self.mode = Mode::Travel;
                    self.target = 1 - self.target;
                    self.leaves += 1;
                }
            }
        }
        match self.mode {
            Mode::Travel => navigate(
                state.position,
                state.heading,
                self.config.patch_center(self.target),
                self.config.motion.max_turn,
            ),
            Mode::Forage => park(
                state,
                park_point(&self.config, self.target),
                self.config.patch_center(1 - self.target),
                &self.config,
            ),
        }
    }

    fn observe(&mut self, reward: f64, percept: &Percept<'_>) {
        self.rate = ema_update(self.rate, reward, self.params.ema_alpha);
        self.last_reward = reward;
        if self.mode == Mode::Travel && percept.state.inside == Some(self.target) {
            self.mode = Mode::Forage;
            self.dv = 0.0;
            self.visit_steps = 0;
            self.visit_reward = 0.0;
        }
        if self.mode == Mode::Forage && percept.state.inside.is_some() {
            self.visit_steps += 1;
            self.visit_reward += reward;
        }
    }

    fn state_vector(&self) -> Option<Vec<f64>> {
        match self.params.kind {
            AgentKind::Random | AgentKind::Idle => None,
            _ => Some(vec![
                self.dv,
                self.rate,
                self.last_reward,
                if self.mode == Mode::Forage { 1.0 } else { 0.0 },
                f64::from(self.visit_steps),
                self.visit_reward,
            ]),
        }
    }
}
