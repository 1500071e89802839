use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use forage_core::batch::{simulate_batch, RunConfig};
use forage_core::stats;
use serde::Serialize;

use crate::manifest::{entries, sha256_hex, write_json, FileEntry};
use crate::SimulateArgs;

#[derive(Serialize)]
struct EpisodeEntry {
    file: String,
    episode: u32,
    seed: u64,
    distance: f64,
    score: f64,
}

#[derive(Serialize)]
struct ScoreSummary {
    distance: f64,
    episodes: usize,
    mean: f64,
    sd: f64,
}

#[derive(Serialize)]
struct SimulateManifest {
    config_sha256: String,
    config: RunConfig,
    agent_id: String,
    episodes: Vec<EpisodeEntry>,
    scores: Vec<ScoreSummary>,
    files: Vec<FileEntry>,
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.evaluation.base_seed = seed;
    }
    if let Some(n) = args.episodes {
        config.evaluation.episodes_per_distance = n;
    }
    if let Some(out) = &args.out {
        config.out_dir = Some(out.display().to_string());
    }
    let Some(out_dir) = config.out_dir.clone().map(PathBuf::from) else {
        bail!("no output directory: pass --out or set out_dir in the config");
    };
    config.validate()?;

    let logs = simulate_batch(&config, args.workers)?;
    let log_dir = out_dir.join("logs");
    fs::create_dir_all(&log_dir).with_context(|| format!("creating {}", log_dir.display()))?;

    let mut files = Vec::new();
    let mut episodes = Vec::new();
    let mut by_distance: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for log in &logs {
        let name = format!("logs/episode_{:05}.jsonl", log.header.episode);
        log.save(&out_dir.join(&name))?;
        let score = log.score();
        by_distance.entry(log.distance().to_bits()).or_default().push(score);
        episodes.push(EpisodeEntry {
            file: name.clone(),
            episode: log.header.episode,
            seed: log.header.seed,
            distance: log.distance(),
            score,
        });
        files.push(name);
    }
    let mut scores: Vec<ScoreSummary> = by_distance
        .into_iter()
        .map(|(d, v)| ScoreSummary {
            distance: f64::from_bits(d),
            episodes: v.len(),
            mean: stats::mean(&v),
            sd: if v.len() > 1 { stats::variance(&v).sqrt() } else { 0.0 },
        })
        .collect();
    scores.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    for s in &scores {
        println!("distance {:>6.2}  episodes {:>4}  mean score {:.4}", s.distance, s.episodes, s.mean);
    }

    // where the run was written is not part of its identity
    config.out_dir = None;
    let canonical = serde_json::to_vec(&config)?;
    let manifest = SimulateManifest {
        config_sha256: sha256_hex(&canonical),
        agent_id: config.agent.id(),
        config,
        episodes,
        scores,
        files: entries(&out_dir, &files)?,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    log::info!("wrote {} logs to {}", logs.len(), log_dir.display());
    Ok(())
}
