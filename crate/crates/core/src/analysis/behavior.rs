use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::encounters::{extract_encounters, group_by_distance, PatchEncounter};
use super::AnalysisError;
use crate::episode_log::EpisodeLog;
use crate::optimal::{discounted_mvt_leave_step, mvt_leave_step, PatchSchedule, DEFAULT_MAX_STEPS};
use crate::stats::{
    bonferroni, linear_regression, mean, t_test_one_sample, RegressionResult, TTestResult,
};

/// Mean out-of-patch steps between consecutive encounters, per distance.
pub fn estimate_travel_steps(logs: &[EpisodeLog]) -> Result<Vec<(f64, f64)>, AnalysisError> {
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for log in logs {
        let enc = extract_encounters(std::slice::from_ref(log), 0);
        for w in enc.windows(2) {
            let outside = log.records[w[0].exit_step as usize..w[1].entry_step as usize]
                .iter()
                .filter(|r| r.inside.is_none())
                .count();
            samples.push((log.distance(), outside as f64));
        }
    }
    if samples.is_empty() {
        return Err(AnalysisError::Empty("no completed travel segments".into()));
    }
    Ok(group_by_distance(samples.iter(), |s| s.0)
        .into_iter()
        .map(|(d, v)| (d, v.iter().map(|s| s.1).sum::<f64>() / v.len() as f64))
        .collect())
}

fn distinct_agents<'a>(names: impl Iterator<Item = &'a str>) -> usize {
    let mut v: Vec<&str> = names.collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// Mean of `value` per unit and distance, where a unit is an agent when
/// several agents are present and an episode otherwise.
fn unit_means<T>(
    items: &[T],
    agent: impl Fn(&T) -> &str,
    episode: impl Fn(&T) -> u64,
    distance: impl Fn(&T) -> f64,
    value: impl Fn(&T) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let by_agent = distinct_agents(items.iter().map(&agent)) > 1;
    let mut cells: BTreeMap<(String, u64, u64), (f64, usize)> = BTreeMap::new();
    for it in items {
        let unit = if by_agent {
            (agent(it).to_string(), 0)
        } else {
            (String::new(), episode(it))
        };
        let cell = cells
            .entry((unit.0, unit.1, distance(it).to_bits()))
            .or_insert((0.0, 0));
        cell.0 += value(it);
        cell.1 += 1;
    }
    cells
        .into_iter()
        .map(|((_, _, d), (sum, n))| (f64::from_bits(d), sum / n as f64))
        .unzip()
}

/// Regression of leave step on patch distance over agent (or episode)
/// means. Truncated encounters are ignored.
pub fn leaving_time_regression(
    encounters: &[PatchEncounter],
) -> Result<RegressionResult, AnalysisError> {
    let done: Vec<&PatchEncounter> = encounters.iter().filter(|e| !e.truncated).collect();
    if done.is_empty() {
        return Err(AnalysisError::Empty("no completed encounters".into()));
    }
    let (x, y) = unit_means(
        &done,
        |e| e.agent.as_str(),
        |e| e.episode,
        |e| e.patch_distance,
        |e| f64::from(e.leave_step),
    );
    Ok(linear_regression(&x, &y)?)
}

/// Regression of episode score on patch distance over agent (or episode)
/// means.
pub fn score_regression(logs: &[EpisodeLog]) -> Result<RegressionResult, AnalysisError> {
    if logs.is_empty() {
        return Err(AnalysisError::Empty("no logs".into()));
    }
    let ids: Vec<String> = logs.iter().map(|l| l.header.agent_id()).collect();
    let items: Vec<(usize, &EpisodeLog)> = logs.iter().enumerate().collect();
    let (x, y) = unit_means(
        &items,
        |(i, _)| ids[*i].as_str(),
        |(_, l)| l.header.seed,
        |(_, l)| l.distance(),
        |(_, l)| l.score(),
    );
    Ok(linear_regression(&x, &y)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum GapSolver {
    Mvt,
    Discounted { gamma: f64, horizon: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceGap {
    pub distance: f64,
    pub travel_steps: f64,
    pub solver_tau: u32,
    pub solver_leave_step: u32,
    pub observed_mean: f64,
    pub gap: f64,
    pub n: usize,
    pub test: Option<TTestResult>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityGapReport {
    pub solver: GapSolver,
    /// "agent" or "episode": what one sample of the pooled test is.
    pub unit: String,
    pub per_distance: Vec<DistanceGap>,
    pub alpha_per_distance: f64,
    pub unit_gaps: Vec<(String, f64)>,
    pub mean_gap: f64,
    pub test: Option<TTestResult>,
}

/// Observed minus normative leave step, per distance and pooled.
///
/// The solver runs at each distance with the observed mean travel time
/// rounded to whole steps. Per-distance tests use agent means when several
/// agents are present and individual encounters otherwise; they are judged
/// at a Bonferroni-corrected 0.05.
pub fn optimality_gap(
    encounters: &[PatchEncounter],
    travel: &[(f64, f64)],
    solver: GapSolver,
    schedule: &PatchSchedule,
) -> Result<OptimalityGapReport, AnalysisError> {
    let done: Vec<&PatchEncounter> = encounters.iter().filter(|e| !e.truncated).collect();
    if done.is_empty() {
        return Err(AnalysisError::Empty("no completed encounters".into()));
    }
    let by_agent = distinct_agents(done.iter().map(|e| e.agent.as_str())) > 1;
    let groups = group_by_distance(done.iter().copied(), |e| e.patch_distance);
    let alpha = bonferroni(0.05, groups.len());
    let mut per_distance = Vec::new();
    let mut solved: Vec<(f64, u32)> = Vec::new();
    for (d, encs) in &groups {
        let tau_bar = travel
            .iter()
            .find(|(td, _)| td == d)
            .map(|t| t.1)
            .ok_or_else(|| {
                AnalysisError::Dependency(format!("no travel estimate for distance {d}"))
            })?;
        let tau = tau_bar.round().max(0.0) as u32;
        let target = match solver {
            GapSolver::Mvt => mvt_leave_step(tau, schedule, DEFAULT_MAX_STEPS).leave_step,
            GapSolver::Discounted { gamma, horizon } => {
                discounted_mvt_leave_step(tau, gamma, horizon, schedule, DEFAULT_MAX_STEPS)?
                    .leave_step
            }
        };
        solved.push((*d, target));
        let samples: Vec<f64> = if by_agent {
            let mut m: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for e in encs {
                m.entry(e.agent.as_str())
                    .or_default()
                    .push(f64::from(e.leave_step));
            }
            m.values().map(|v| mean(v) - f64::from(target)).collect()
        } else {
            encs.iter()
                .map(|e| f64::from(e.leave_step) - f64::from(target))
                .collect()
        };
        let observed_mean = mean(
            &encs
                .iter()
                .map(|e| f64::from(e.leave_step))
                .collect::<Vec<_>>(),
        );
        let test = t_test_one_sample(&samples, 0.0).ok();
        per_distance.push(DistanceGap {
            distance: *d,
            travel_steps: tau_bar,
            solver_tau: tau,
            solver_leave_step: target,
            observed_mean,
            gap: observed_mean - f64::from(target),
            n: encs.len(),
            significant: test.is_some_and(|t| t.p < alpha),
            test,
        });
    }

    // pooled: per unit, mean over its distances of (mean leave - target)
    let mut cells: BTreeMap<String, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for e in &done {
        let unit = if by_agent {
            e.agent.clone()
        } else {
            format!("episode-{}", e.episode)
        };
        cells
            .entry(unit)
            .or_default()
            .entry(e.patch_distance.to_bits())
            .or_default()
            .push(f64::from(e.leave_step));
    }
    let unit_gaps: Vec<(String, f64)> = cells
        .into_iter()
        .map(|(unit, dists)| {
            let gaps: Vec<f64> = dists
                .iter()
                .map(|(d, v)| {
                    let target = solved
                        .iter()
                        .find(|s| s.0.to_bits() == *d)
                        .map_or(0, |s| s.1);
                    mean(v) - f64::from(target)
                })
                .collect();
            (unit, mean(&gaps))
        })
        .collect();
    let values: Vec<f64> = unit_gaps.iter().map(|u| u.1).collect();
    Ok(OptimalityGapReport {
        solver,
        unit: if by_agent { "agent" } else { "episode" }.into(),
        per_distance,
        alpha_per_distance: alpha,
        mean_gap: mean(&values),
        test: t_test_one_sample(&values, 0.0).ok(),
        unit_gaps,
    })
}

/// Regression of mean optimality gap on discount factor, one point per agent.
pub fn gap_vs_discount_regression(
    points: &[(f64, f64)],
) -> Result<RegressionResult, AnalysisError> {
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    Ok(linear_regression(&x, &y)?)
}
