//! Batches of independent episodes across patch distances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentError, AgentParams};
use crate::env::{run_episode, EnvError, WorldConfig};
use crate::episode_log::{EpisodeHeader, EpisodeLog};

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub distances: Vec<f64>,
    pub episodes_per_distance: u32,
    pub base_seed: u64,
    /// Draw each episode's distance uniformly from `mixed_range` instead.
    pub mixed_distances: bool,
    pub mixed_range: [f64; 2],
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            distances: vec![6.0, 8.0, 10.0, 12.0],
            episodes_per_distance: 50,
            base_seed: 0,
            mixed_distances: false,
            mixed_range: [5.0, 12.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub world: WorldConfig,
    pub agent: AgentParams,
    pub evaluation: EvaluationConfig,
    pub out_dir: Option<String>,
}

/// One planned episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSpec {
    pub index: u32,
    pub distance: f64,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, BatchError> {
        serde_json::from_str(text).map_err(|e| BatchError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), BatchError> {
        let ev = &self.evaluation;
        if ev.episodes_per_distance < 1 {
            return Err(BatchError::Config(
                "episodes_per_distance must be >= 1".into(),
            ));
        }
        if ev.distances.is_empty() {
            return Err(BatchError::Config("distances must not be empty".into()));
        }
        let mut probe: Vec<f64> = ev.distances.clone();
        if ev.mixed_distances {
            if !(ev.mixed_range[0] <= ev.mixed_range[1]) {
                return Err(BatchError::Config("mixed_range must be ordered".into()));
            }
            probe = ev.mixed_range.to_vec();
        }
        for d in probe {
            self.world.with_distance(d).validate()?;
        }
        self.agent.validate()?;
        Ok(())
    }

    /// Episodes in run order; episode `i` uses seed `base_seed + i`.
    pub fn episodes(&self) -> Vec<EpisodeSpec> {
        let ev = &self.evaluation;
        let total = ev.episodes_per_distance as usize * ev.distances.len();
        let mut rng = ChaCha8Rng::seed_from_u64(ev.base_seed);
        (0..total)
            .map(|i| {
                let distance = if ev.mixed_distances {
                    rng.random_range(ev.mixed_range[0]..=ev.mixed_range[1])
                } else {
                    ev.distances[i / ev.episodes_per_distance as usize]
                };
                EpisodeSpec {
                    index: i as u32,
                    distance,
                    seed: ev.base_seed.wrapping_add(i as u64),
                }
            })
            .collect()
    }
}

pub fn run_one(run: &RunConfig, spec: &EpisodeSpec) -> Result<EpisodeLog, BatchError> {
    let config: WorldConfig = run.world.with_distance(spec.distance);
    let mut agent = Agent::new(&run.agent, &config, spec.seed)?;
    let records = run_episode(&config, &mut agent, spec.seed)?;
    Ok(EpisodeLog {
        header: EpisodeHeader {
            config,
            seed: spec.seed,
            episode: spec.index,
            agent: Some(run.agent.clone()),
        },
        records,
    })
}

/// Runs every episode of `run` on up to `workers` threads (all cores when
/// `None`). Output order matches [`RunConfig::episodes`].
pub fn simulate_batch(
    run: &RunConfig,
    workers: Option<usize>,
) -> Result<Vec<EpisodeLog>, BatchError> {
    run.validate()?;
    let specs = run.episodes();
    let go = || {
        specs
            .par_iter()
            .map(|s| run_one(run, s))
            .collect::<Result<Vec<_>, _>>()
    };
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| BatchError::Pool(e.to_string()))?
            .install(go),
        None => go(),
    }
}
