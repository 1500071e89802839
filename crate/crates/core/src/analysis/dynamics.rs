use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::encounters::{group_by_distance, PatchEncounter};
use super::AnalysisError;
use crate::stats::{
    anova_oneway, bonferroni, linear_regression, mean, pca, percentile, t_test_welch, AnovaResult,
    PcaResult, RegressionResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quartile {
    Earliest,
    Early,
    Late,
    Latest,
}

impl Quartile {
    pub const ALL: [Quartile; 4] = [
        Quartile::Earliest,
        Quartile::Early,
        Quartile::Late,
        Quartile::Latest,
    ];

    /// 1 for `Earliest` up to 4 for `Latest`.
    pub fn index(self) -> usize {
        self as usize + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Quartile::Earliest => "earliest",
            Quartile::Early => "early",
            Quartile::Late => "late",
            Quartile::Latest => "latest",
        }
    }
}

/// Leave-step quartile of every completed encounter, assigned within each
/// distance. Values equal to a boundary go to the lower quartile.
/// Truncated encounters get `None`.
pub fn quartile_split(
    encounters: &[PatchEncounter],
) -> Result<Vec<Option<Quartile>>, AnalysisError> {
    let mut labels = vec![None; encounters.len()];
    let indexed: Vec<(usize, &PatchEncounter)> = encounters
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.truncated)
        .collect();
    for (d, group) in group_by_distance(indexed.iter(), |(_, e)| e.patch_distance) {
        if group.len() < 4 {
            return Err(AnalysisError::TooFew(format!(
                "{} completed encounters at distance {d}, need 4",
                group.len()
            )));
        }
        let leaves: Vec<f64> = group.iter().map(|(_, e)| f64::from(e.leave_step)).collect();
        let cuts = [0.25, 0.5, 0.75].map(|q| percentile(&leaves, q));
        for (i, e) in group {
            let l = f64::from(e.leave_step);
            labels[*i] = Some(if l <= cuts[0] {
                Quartile::Earliest
            } else if l <= cuts[1] {
                Quartile::Early
            } else if l <= cuts[2] {
                Quartile::Late
            } else {
                Quartile::Latest
            });
        }
    }
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    Entry,
    Exit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlidingRegression {
    pub alignment: Alignment,
    pub state_index: usize,
    pub window: usize,
    pub margin: usize,
    pub threshold: f64,
    /// How encounters from different distances are combined.
    pub convention: String,
    pub offsets: Vec<i64>,
    pub results: Vec<Option<RegressionResult>>,
    pub significant: Vec<bool>,
}

impl SlidingRegression {
    pub fn significant_offsets(&self) -> Vec<i64> {
        self.offsets
            .iter()
            .zip(&self.significant)
            .filter(|(_, s)| **s)
            .map(|(o, _)| *o)
            .collect()
    }
}

/// Median leave step per (distance, quartile).
fn quartile_medians(
    encounters: &[PatchEncounter],
    labels: &[Option<Quartile>],
) -> BTreeMap<(u64, Quartile), f64> {
    let mut groups: BTreeMap<(u64, Quartile), Vec<f64>> = BTreeMap::new();
    for (e, q) in encounters.iter().zip(labels) {
        if let Some(q) = q {
            groups
                .entry((e.patch_distance.to_bits(), *q))
                .or_default()
                .push(f64::from(e.leave_step));
        }
    }
    groups
        .into_iter()
        .map(|(k, v)| (k, percentile(&v, 0.5)))
        .collect()
}

/// First difference of coordinate `k` at an entry-aligned offset, honoring
/// the in-patch cutoff.
fn entry_slope(e: &PatchEncounter, t: i64, k: usize, cutoff: f64) -> Option<f64> {
    if t >= 0 && (t >= i64::from(e.leave_step) || t as f64 >= cutoff) {
        return None;
    }
    let cur = e.at_entry(t)?.get(k)?;
    let prev = e.at_entry(t - 1)?.get(k)?;
    Some(cur - prev)
}

fn exit_slope(e: &PatchEncounter, t: i64, k: usize) -> Option<f64> {
    if t - 1 < -i64::from(e.leave_step) {
        return None;
    }
    let cur = e.at_exit(t)?.get(k)?;
    let prev = e.at_exit(t - 1)?.get(k)?;
    Some(cur - prev)
}

/// Per-step regression of the state slope on quartile index (1-4).
///
/// Entry alignment covers offsets `-margin..window` around the entry step;
/// an encounter contributes in-patch offsets only below both its own leave
/// step and the median leave step of its quartile at its distance. Exit
/// alignment covers `-window..margin` around the first step outside.
/// Encounters from all distances are pooled. Significance uses a Bonferroni
/// threshold of 0.05 over `window + margin` tests.
pub fn sliding_slope_regression(
    encounters: &[PatchEncounter],
    labels: &[Option<Quartile>],
    alignment: Alignment,
    window: usize,
    margin: usize,
    state_index: usize,
) -> Result<SlidingRegression, AnalysisError> {
    if labels.len() != encounters.len() {
        return Err(AnalysisError::Dependency(
            "one quartile label per encounter required".into(),
        ));
    }
    if labels.iter().all(Option::is_none) {
        return Err(AnalysisError::Dependency("no quartile labels".into()));
    }
    let medians = quartile_medians(encounters, labels);
    let offsets: Vec<i64> = match alignment {
        Alignment::Entry => (-(margin as i64)..window as i64).collect(),
        Alignment::Exit => (-(window as i64)..margin as i64).collect(),
    };
    let threshold = bonferroni(0.05, window + margin);
    let mut results = Vec::with_capacity(offsets.len());
    for &t in &offsets {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (e, q) in encounters.iter().zip(labels) {
            let Some(q) = q else { continue };
            let slope = match alignment {
                Alignment::Entry => {
                    let cutoff = medians[&(e.patch_distance.to_bits(), *q)];
                    entry_slope(e, t, state_index, cutoff)
                }
                Alignment::Exit => exit_slope(e, t, state_index),
            };
            if let Some(s) = slope {
                xs.push(q.index() as f64);
                ys.push(s);
            }
        }
        results.push(linear_regression(&xs, &ys).ok());
    }
    let skipped = results.iter().filter(|r| r.is_none()).count();
    if skipped > 0 {
        log::info!(
            "sliding regression: {skipped} of {} offsets lack data",
            offsets.len()
        );
    }
    let significant = results
        .iter()
        .map(|r| r.is_some_and(|r| r.p < threshold))
        .collect();
    Ok(SlidingRegression {
        alignment,
        state_index,
        window,
        margin,
        threshold,
        convention: "pooled across distances".into(),
        offsets,
        results,
        significant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub alignment: Alignment,
    pub quartile: Quartile,
    pub offset: i64,
    pub mean: f64,
    pub n: usize,
}

/// Mean of state coordinate `k` per quartile and aligned offset. Entry
/// traces stop at each encounter's leave step and its quartile median, as
/// in the sliding regression; exit traces reach back at most to entry.
pub fn quartile_traces(
    encounters: &[PatchEncounter],
    labels: &[Option<Quartile>],
    alignment: Alignment,
    window: usize,
    margin: usize,
    k: usize,
) -> Vec<TracePoint> {
    let medians = quartile_medians(encounters, labels);
    let offsets: Vec<i64> = match alignment {
        Alignment::Entry => (-(margin as i64)..window as i64).collect(),
        Alignment::Exit => (-(window as i64)..margin as i64).collect(),
    };
    let mut out = Vec::new();
    for q in Quartile::ALL {
        for &t in &offsets {
            let v: Vec<f64> = encounters
                .iter()
                .zip(labels)
                .filter(|(_, l)| **l == Some(q))
                .filter_map(|(e, _)| match alignment {
                    Alignment::Entry => {
                        let cutoff = medians[&(e.patch_distance.to_bits(), q)];
                        if t >= 0 && (t >= i64::from(e.leave_step) || t as f64 >= cutoff) {
                            return None;
                        }
                        e.at_entry(t)?.get(k).copied()
                    }
                    Alignment::Exit => {
                        if t < -i64::from(e.leave_step) {
                            return None;
                        }
                        e.at_exit(t)?.get(k).copied()
                    }
                })
                .collect();
            if !v.is_empty() {
                out.push(TracePoint {
                    alignment,
                    quartile: q,
                    offset: t,
                    mean: mean(&v),
                    n: v.len(),
                });
            }
        }
    }
    out
}

/// Longest run of consecutive significant offsets, as inclusive bounds.
pub fn longest_significant_run(s: &SlidingRegression) -> Option<(i64, i64)> {
    let mut best: Option<(i64, i64)> = None;
    let mut start: Option<i64> = None;
    for (&t, &sig) in s.offsets.iter().zip(&s.significant) {
        if sig {
            let a = *start.get_or_insert(t);
            let longer = best.is_none_or(|(b0, b1)| t - a > b1 - b0);
            if longer {
                best = Some((a, t));
            }
        } else {
            start = None;
        }
    }
    best
}

/// Mean entry-aligned slope of one encounter over `offsets`.
fn mean_slope(e: &PatchEncounter, offsets: &[i64], k: usize, cutoff: f64) -> Option<f64> {
    let v: Vec<f64> = offsets
        .iter()
        .filter_map(|&t| entry_slope(e, t, k, cutoff))
        .collect();
    (!v.is_empty()).then(|| mean(&v))
}

/// Mean entry-aligned slope over `offsets` for each quartile, Earliest
/// first, using the same inclusion rule as the sliding regression.
pub fn quartile_mean_slopes(
    encounters: &[PatchEncounter],
    labels: &[Option<Quartile>],
    offsets: &[i64],
    state_index: usize,
) -> [Option<f64>; 4] {
    let medians = quartile_medians(encounters, labels);
    let mut per: [Vec<f64>; 4] = Default::default();
    for (e, q) in encounters.iter().zip(labels) {
        let Some(q) = q else { continue };
        let cutoff = medians[&(e.patch_distance.to_bits(), *q)];
        if let Some(m) = mean_slope(e, offsets, state_index, cutoff) {
            per[q.index() - 1].push(m);
        }
    }
    per.map(|v| (!v.is_empty()).then(|| mean(&v)))
}

/// Regression of each encounter's mean slope over a significant window on
/// patch distance.
pub fn slope_vs_distance_regression(
    encounters: &[PatchEncounter],
    offsets: &[i64],
    state_index: usize,
) -> Result<RegressionResult, AnalysisError> {
    if offsets.is_empty() {
        return Err(AnalysisError::Dependency("empty significant window".into()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = encounters
        .iter()
        .filter(|e| !e.truncated)
        .filter_map(|e| {
            mean_slope(e, offsets, state_index, f64::INFINITY).map(|m| (e.patch_distance, m))
        })
        .unzip();
    Ok(linear_regression(&x, &y)?)
}

/// Regression of (exit activity - entry activity) on patch distance.
pub fn activity_range_regression(
    encounters: &[PatchEncounter],
    state_index: usize,
) -> Result<RegressionResult, AnalysisError> {
    let (x, y): (Vec<f64>, Vec<f64>) = encounters
        .iter()
        .filter(|e| !e.truncated)
        .filter_map(|e| {
            let a = e.entry_state()?.get(state_index)?;
            let b = e.exit_state()?.get(state_index)?;
            Some((e.patch_distance, b - a))
        })
        .unzip();
    if x.is_empty() {
        return Err(AnalysisError::Empty("no state traces".into()));
    }
    Ok(linear_regression(&x, &y)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseRow {
    pub a: Quartile,
    pub b: Quartile,
    pub mean_difference: f64,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitAnova {
    pub anova: AnovaResult,
    pub alpha: f64,
    pub pairwise: Vec<PairwiseRow>,
}

/// One-way ANOVA of exit-step activity across quartiles, with
/// Bonferroni-corrected Welch tests for every pair of quartiles.
pub fn exit_activity_anova(
    encounters: &[PatchEncounter],
    labels: &[Option<Quartile>],
    state_index: usize,
) -> Result<ExitAnova, AnalysisError> {
    let mut groups: [Vec<f64>; 4] = Default::default();
    for (e, q) in encounters.iter().zip(labels) {
        if let (Some(q), Some(s)) = (q, e.exit_state()) {
            if let Some(v) = s.get(state_index) {
                groups[q.index() - 1].push(*v);
            }
        }
    }
    let anova = anova_oneway(&groups)?;
    let alpha = bonferroni(0.05, 6);
    let mut pairwise = Vec::new();
    for i in 0..4 {
        for j in i + 1..4 {
            if let Ok(t) = t_test_welch(&groups[i], &groups[j]) {
                pairwise.push(PairwiseRow {
                    a: Quartile::ALL[i],
                    b: Quartile::ALL[j],
                    mean_difference: t.mean,
                    t: t.t,
                    p: t.p,
                    significant: t.p < alpha,
                });
            }
        }
    }
    Ok(ExitAnova {
        anova,
        alpha,
        pairwise,
    })
}

/// PCA of the stacked in-patch state vectors of all completed encounters.
pub fn state_pca(encounters: &[PatchEncounter]) -> Result<PcaResult, AnalysisError> {
    let rows: Vec<Vec<f64>> = encounters
        .iter()
        .filter(|e| !e.truncated)
        .flat_map(|e| e.state_trace.iter().cloned())
        .collect();
    if rows.is_empty() {
        return Err(AnalysisError::Empty("no state traces".into()));
    }
    Ok(pca(&rows)?)
}

/// Copies of the encounters with every state replaced by its first `k`
/// principal-component scores.
pub fn project_encounters(
    encounters: &[PatchEncounter],
    p: &PcaResult,
    k: usize,
) -> Vec<PatchEncounter> {
    let proj = |trace: &[Vec<f64>]| trace.iter().map(|s| p.project(s, k)).collect();
    encounters
        .iter()
        .map(|e| PatchEncounter {
            state_trace: proj(&e.state_trace),
            pre_trace: proj(&e.pre_trace),
            post_trace: proj(&e.post_trace),
            ..e.clone()
        })
        .collect()
}
