use serde::{Deserialize, Serialize};

use super::lidar::Observation;
use super::world::{initial_observation, reset, step, Action, WorldState};
use super::{EnvError, WorldConfig};

/// One logged step. Field names are the on-disk JSONL schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub step: u32,
    pub pos: [f64; 2],
    pub heading: f64,
    pub action: Action,
    pub reward: f64,
    pub inside: Option<usize>,
    pub depletion: [u32; 2],
    pub agent_state: Option<Vec<f64>>,
}

/// What a policy gets to see each step: the sensor reading plus its own pose.
#[derive(Debug, Clone, Copy)]
pub struct Percept<'a> {
    pub observation: &'a Observation,
    pub state: &'a WorldState,
}

/// Closed-loop controller driven by [`run_episode`].
///
/// Per step the loop calls `act`, advances the world, then hands the outcome
/// to `observe`. The internal state logged for a step is read after
/// `observe`, so it reflects everything up to and including that step.
pub trait Policy {
    fn act(&mut self, percept: &Percept<'_>) -> Action;

    fn observe(&mut self, _reward: f64, _percept: &Percept<'_>) {}

    fn state_vector(&self) -> Option<Vec<f64>> {
        None
    }
}

pub fn run_episode<P: Policy + ?Sized>(
    config: &WorldConfig,
    policy: &mut P,
    seed: u64,
) -> Result<Vec<StepRecord>, EnvError> {
    let mut state = reset(config, seed)?;
    let mut observation = initial_observation(&state, config);
    let mut records = Vec::with_capacity(config.episode_steps as usize);
    for _ in 0..config.episode_steps {
        let action = policy.act(&Percept {
            observation: &observation,
            state: &state,
        });
        let out = step(&state, &action, config)?;
        state = out.state;
        observation = out.observation;
        policy.observe(
            out.reward,
            &Percept {
                observation: &observation,
                state: &state,
            },
        );
        records.push(StepRecord {
            step: state.step - 1,
            pos: state.position,
            heading: state.heading,
            action,
            reward: out.reward,
            inside: state.inside,
            depletion: state.depletion,
            agent_state: policy.state_vector(),
        });
    }
    Ok(records)
}

/// Final score of a logged episode.
pub fn total_reward(records: &[StepRecord]) -> f64 {
    records.iter().map(|r| r.reward).sum()
}
