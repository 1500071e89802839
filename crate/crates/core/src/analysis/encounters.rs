use serde::{Deserialize, Serialize};

use crate::episode_log::EpisodeLog;

/// Steps of context kept before entry and after exit.
pub const DEFAULT_MARGIN: usize = 10;

/// One visit from the first entry into a freshly refreshed patch to the
/// first exit from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchEncounter {
    pub agent: String,
    /// Seed of the episode the encounter came from.
    pub episode: u64,
    pub patch: usize,
    pub patch_distance: f64,
    /// Step index of the first in-patch record.
    pub entry_step: u32,
    /// Step index of the first record back outside.
    pub exit_step: u32,
    pub leave_step: u32,
    pub rewards: Vec<f64>,
    /// Agent state on each in-patch step.
    pub state_trace: Vec<Vec<f64>>,
    /// Up to `margin + 1` states before entry, oldest first.
    pub pre_trace: Vec<Vec<f64>>,
    /// Up to `margin` states from the exit step on.
    pub post_trace: Vec<Vec<f64>>,
    pub truncated: bool,
}

impl PatchEncounter {
    /// Entry-aligned state at `offset` (0 is the entry step, negative is
    /// before entry).
    pub fn at_entry(&self, offset: i64) -> Option<&[f64]> {
        if offset >= 0 {
            self.state_trace.get(offset as usize).map(Vec::as_slice)
        } else {
            let back = (-offset) as usize;
            let n = self.pre_trace.len();
            (back <= n).then(|| self.pre_trace[n - back].as_slice())
        }
    }

    /// Exit-aligned state at `offset` (0 is the first step outside, -1 the
    /// last step inside).
    pub fn at_exit(&self, offset: i64) -> Option<&[f64]> {
        if offset >= 0 {
            self.post_trace.get(offset as usize).map(Vec::as_slice)
        } else {
            let back = (-offset) as usize;
            let n = self.state_trace.len();
            if back <= n {
                Some(self.state_trace[n - back].as_slice())
            } else {
                let k = back - n;
                let m = self.pre_trace.len();
                (k <= m).then(|| self.pre_trace[m - k].as_slice())
            }
        }
    }

    pub fn entry_state(&self) -> Option<&[f64]> {
        self.state_trace.first().map(Vec::as_slice)
    }

    /// State on the exit step, the first record back outside, where the
    /// leave decision is logged.
    pub fn exit_state(&self) -> Option<&[f64]> {
        self.post_trace.first().map(Vec::as_slice)
    }
}

/// Encounters of every log, in log order. Re-entries into a patch that has
/// not been refreshed are not encounters. Visits still in progress when the
/// episode ends are returned with `truncated` set.
pub fn extract_encounters(logs: &[EpisodeLog], margin: usize) -> Vec<PatchEncounter> {
    let mut out = Vec::new();
    for log in logs {
        let recs = &log.records;
        let agent = log.header.agent_id();
        let state = |i: usize| recs[i].agent_state.clone().unwrap_or_default();
        let mut i = 0;
        while i < recs.len() {
            let Some(p) = recs[i].inside else {
                i += 1;
                continue;
            };
            let entered = i == 0 || recs[i - 1].inside != Some(p);
            let fresh = recs[i].depletion[p] == 1;
            if !(entered && fresh) {
                i += 1;
                continue;
            }
            let start = i;
            while i < recs.len() && recs[i].inside == Some(p) {
                i += 1;
            }
            let truncated = i == recs.len();
            out.push(PatchEncounter {
                agent: agent.clone(),
                episode: log.header.seed,
                patch: p,
                patch_distance: log.distance(),
                entry_step: recs[start].step,
                exit_step: if truncated {
                    recs[i - 1].step + 1
                } else {
                    recs[i].step
                },
                leave_step: (i - start) as u32,
                rewards: recs[start..i].iter().map(|r| r.reward).collect(),
                state_trace: (start..i).map(state).collect(),
                pre_trace: (start.saturating_sub(margin + 1)..start)
                    .map(state)
                    .collect(),
                post_trace: (i..(i + margin).min(recs.len())).map(state).collect(),
                truncated,
            });
        }
    }
    out
}

/// Groups items by exact patch distance, ascending.
pub fn group_by_distance<'a, T>(
    items: impl IntoIterator<Item = &'a T>,
    distance: impl Fn(&T) -> f64,
) -> Vec<(f64, Vec<&'a T>)>
where
    T: 'a,
{
    let mut groups: Vec<(f64, Vec<&T>)> = Vec::new();
    for item in items {
        let d = distance(item);
        match groups.iter_mut().find(|(g, _)| *g == d) {
            Some((_, v)) => v.push(item),
            None => groups.push((d, vec![item])),
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    groups
}
