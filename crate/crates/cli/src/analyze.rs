use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use forage_core::analysis::{
    activity_range_regression, estimate_travel_steps, exit_activity_anova, extract_encounters,
    gap_vs_discount_regression, leaving_time_regression, longest_significant_run, optimality_gap,
    quartile_mean_slopes, quartile_split, quartile_traces, score_regression,
    sliding_slope_regression, slope_vs_distance_regression, state_pca, Alignment, AnalysisError,
    GapSolver, OptimalityGapReport, PatchEncounter, Quartile, SlidingRegression,
};
use forage_core::episode_log::EpisodeLog;
use forage_core::optimal::{PatchSchedule, DEFAULT_HORIZON};
use forage_core::stats::RegressionResult;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::manifest::{entries, sha256_hex, write_json, FileEntry};
use crate::AnalyzeArgs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Analysis {
    Encounters,
    Travel,
    LeavingTimes,
    Scores,
    Gaps,
    Sliding,
    QuartileTraces,
    Range,
    SlopeDistance,
    ExitAnova,
    Pca,
}

impl Analysis {
    fn key(self) -> &'static str {
        match self {
            Self::Encounters => "encounters",
            Self::Travel => "travel",
            Self::LeavingTimes => "leaving_times",
            Self::Scores => "scores",
            Self::Gaps => "gaps",
            Self::Sliding => "sliding",
            Self::QuartileTraces => "quartile_traces",
            Self::Range => "range",
            Self::SlopeDistance => "slope_distance",
            Self::ExitAnova => "exit_anova",
            Self::Pca => "pca",
        }
    }
}

#[derive(Serialize)]
struct AnalyzeManifest {
    logs_glob: String,
    inputs: Vec<FileEntry>,
    analyses: Vec<&'static str>,
    outputs: Vec<FileEntry>,
}

/// Everything the analyses share, computed on demand.
struct Session<'a> {
    args: &'a AnalyzeArgs,
    logs: Vec<EpisodeLog>,
    encounters: Vec<PatchEncounter>,
    labels: Option<Result<Vec<Option<Quartile>>, AnalysisError>>,
    entry_sliding: Option<SlidingRegression>,
    out: PathBuf,
    written: Vec<String>,
    summary: BTreeMap<String, Value>,
    regressions: Vec<(String, RegressionResult)>,
}

pub fn run(args: &AnalyzeArgs) -> Result<()> {
    let mut paths: Vec<PathBuf> = glob::glob(&args.logs)
        .with_context(|| format!("bad glob {}", args.logs))?
        .collect::<Result<_, _>>()?;
    paths.sort();
    if paths.is_empty() {
        bail!("no logs matched {}", args.logs);
    }
    let logs: Vec<EpisodeLog> = paths
        .par_iter()
        .map(|p| EpisodeLog::load(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<_>>()?;
    log::info!("loaded {} logs", logs.len());

    let mut selected: Vec<Analysis> = if args.all {
        Analysis::value_variants().to_vec()
    } else {
        args.analyses.clone()
    };
    if selected.is_empty() {
        bail!("no analyses selected: list some or pass --all");
    }
    selected.sort();
    selected.dedup();

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let encounters = extract_encounters(&logs, args.margin);
    let mut cx = Session {
        args,
        logs,
        encounters,
        labels: None,
        entry_sliding: None,
        out: args.out.clone(),
        written: Vec::new(),
        summary: BTreeMap::new(),
        regressions: Vec::new(),
    };
    cx.summary.insert(
        "inputs".into(),
        json!({
            "logs": cx.logs.len(),
            "encounters": cx.encounters.len(),
            "completed_encounters": cx.encounters.iter().filter(|e| !e.truncated).count(),
            "state_index": args.state_index,
            "range_index": args.range_index,
            "window": args.window,
            "margin": args.margin,
        }),
    );

    let mut skipped = BTreeMap::new();
    for a in &selected {
        if let Err(e) = cx.dispatch(*a) {
            if args.all {
                eprintln!("skipping {}: {e:#}", a.key());
                skipped.insert(a.key().to_string(), format!("{e:#}"));
            } else {
                return Err(e.context(format!("analysis {}", a.key())));
            }
        }
    }
    if !skipped.is_empty() {
        cx.summary.insert("skipped".into(), json!(skipped));
    }
    if !cx.regressions.is_empty() {
        let mut w = cx.csv("regressions.csv")?;
        w.write_record(["analysis", "slope", "intercept", "slope_se", "t", "p", "n"])?;
        for (name, r) in &cx.regressions {
            w.write_record([
                name.clone(),
                num(r.slope),
                num(r.intercept),
                num(r.slope_se),
                num(r.t),
                num(r.p),
                r.n.to_string(),
            ])?;
        }
        w.flush()?;
    }
    write_json(&cx.out.join("summary.json"), &cx.summary)?;
    cx.written.push("summary.json".into());

    let inputs = paths
        .iter()
        .map(|p| {
            let data = fs::read(p)?;
            Ok(FileEntry {
                path: p.display().to_string(),
                sha256: sha256_hex(&data),
                bytes: data.len() as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = AnalyzeManifest {
        logs_glob: args.logs.clone(),
        inputs,
        analyses: selected.iter().map(|a| a.key()).collect(),
        outputs: entries(&cx.out, &cx.written)?,
    };
    write_json(&cx.out.join("manifest.json"), &manifest)?;
    println!(
        "analyzed {} logs ({} encounters) into {}",
        cx.logs.len(),
        cx.encounters.len(),
        cx.out.display()
    );
    Ok(())
}

fn reg_json(r: &RegressionResult) -> Value {
    serde_json::to_value(r).expect("regression serializes")
}

/// Shortest round-trip form, switching to exponent notation at extremes.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

impl Session<'_> {
    fn csv(&mut self, name: &str) -> Result<csv::Writer<fs::File>> {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        csv::Writer::from_path(self.out.join(name)).with_context(|| format!("creating {name}"))
    }

    fn labels(&mut self) -> Result<Vec<Option<Quartile>>> {
        let enc = &self.encounters;
        self.labels
            .get_or_insert_with(|| quartile_split(enc))
            .clone()
            .map_err(|e| anyhow!(e))
    }

    fn dispatch(&mut self, a: Analysis) -> Result<()> {
        match a {
            Analysis::Encounters => self.encounters_table(),
            Analysis::Travel => self.travel().map(|_| ()),
            Analysis::LeavingTimes => self.leaving_times(),
            Analysis::Scores => self.scores(),
            Analysis::Gaps => self.gaps(),
            Analysis::Sliding => self.sliding(),
            Analysis::QuartileTraces => self.traces(),
            Analysis::Range => self.range(),
            Analysis::SlopeDistance => self.slope_distance(),
            Analysis::ExitAnova => self.exit_anova(),
            Analysis::Pca => self.pca(),
        }
    }

    fn encounters_table(&mut self) -> Result<()> {
        let mut w = self.csv("encounters.csv")?;
        w.write_record([
            "agent", "episode", "patch", "distance", "entry_step", "exit_step", "leave_step",
            "reward", "truncated",
        ])?;
        for e in &self.encounters {
            w.write_record([
                e.agent.clone(),
                e.episode.to_string(),
                e.patch.to_string(),
                num(e.patch_distance),
                e.entry_step.to_string(),
                e.exit_step.to_string(),
                e.leave_step.to_string(),
                num(e.rewards.iter().sum::<f64>()),
                e.truncated.to_string(),
            ])?;
        }
        w.flush()?;
        let done = self.encounters.iter().filter(|e| !e.truncated).count();
        self.summary.insert(
            "encounters".into(),
            json!({"total": self.encounters.len(), "completed": done}),
        );
        Ok(())
    }

    fn travel(&mut self) -> Result<Vec<(f64, f64)>> {
        let travel = estimate_travel_steps(&self.logs)?;
        let mut w = self.csv("travel.csv")?;
        w.write_record(["distance", "travel_steps"])?;
        for (d, t) in &travel {
            w.write_record([num(*d), num(*t)])?;
        }
        w.flush()?;
        self.summary.insert(
            "travel".into(),
            json!(travel.iter().map(|(d, t)| json!({"distance": d, "travel_steps": t})).collect::<Vec<_>>()),
        );
        Ok(travel)
    }

    fn leaving_times(&mut self) -> Result<()> {
        let mut cells: BTreeMap<(String, u64), (f64, usize)> = BTreeMap::new();
        for e in self.encounters.iter().filter(|e| !e.truncated) {
            let c = cells
                .entry((e.agent.clone(), e.patch_distance.to_bits()))
                .or_insert((0.0, 0));
            c.0 += f64::from(e.leave_step);
            c.1 += 1;
        }
        let mut w = self.csv("leaving_times.csv")?;
        w.write_record(["agent", "distance", "mean_leave_step", "n"])?;
        for ((agent, d), (sum, n)) in &cells {
            w.write_record([
                agent.clone(),
                num(f64::from_bits(*d)),
                num(sum / *n as f64),
                n.to_string(),
            ])?;
        }
        w.flush()?;
        let r = leaving_time_regression(&self.encounters)?;
        self.summary.insert("leaving_times".into(), reg_json(&r));
        self.regressions.push(("leaving_times".into(), r));
        Ok(())
    }

    fn scores(&mut self) -> Result<()> {
        let mut w = self.csv("scores.csv")?;
        w.write_record(["agent", "episode", "distance", "score"])?;
        for l in &self.logs {
            w.write_record([
                l.header.agent_id(),
                l.header.seed.to_string(),
                num(l.distance()),
                num(l.score()),
            ])?;
        }
        w.flush()?;
        let r = score_regression(&self.logs)?;
        self.summary.insert("scores".into(), reg_json(&r));
        self.regressions.push(("scores".into(), r));
        Ok(())
    }

    /// Discount factor and horizon for the discounted gap: the flag, else the
    /// one shared by every agent in the logs.
    fn discount(&self) -> Result<(f64, u32)> {
        let agents: Vec<_> = self.logs.iter().map(|l| l.header.agent.as_ref()).collect();
        let horizon = agents
            .iter()
            .flatten()
            .map(|a| a.horizon)
            .max()
            .unwrap_or(DEFAULT_HORIZON);
        if let Some(g) = self.args.gamma {
            if !(g > 0.0 && g <= 1.0) {
                bail!("--gamma must lie in (0, 1]");
            }
            return Ok((g, horizon));
        }
        let mut gammas: Vec<f64> = agents.iter().flatten().map(|a| a.gamma).collect();
        gammas.sort_by(f64::total_cmp);
        gammas.dedup();
        match (gammas.as_slice(), agents.iter().any(Option::is_none)) {
            ([g], false) => Ok((*g, horizon)),
            _ => Err(AnalysisError::Dependency(
                "discounted gap needs --gamma (logs carry no single agent gamma)".into(),
            )
            .into()),
        }
    }

    fn gaps(&mut self) -> Result<()> {
        let travel = estimate_travel_steps(&self.logs).map_err(|e| {
            AnalysisError::Dependency(format!("optimality gaps need travel times: {e}"))
        })?;
        let (gamma, horizon) = self.discount()?;
        let schedule = PatchSchedule::default();
        let mvt = optimality_gap(&self.encounters, &travel, GapSolver::Mvt, &schedule)?;
        let disc = optimality_gap(
            &self.encounters,
            &travel,
            GapSolver::Discounted { gamma, horizon },
            &schedule,
        )?;
        let mut w = self.csv("gaps.csv")?;
        w.write_record([
            "solver", "gamma", "distance", "travel_steps", "solver_tau", "solver_leave_step",
            "observed_mean", "gap", "n", "t", "p", "significant",
        ])?;
        for (name, g, rep) in [("mvt", 1.0, &mvt), ("discounted", gamma, &disc)] {
            for d in &rep.per_distance {
                w.write_record([
                    name.to_string(),
                    num(g),
                    num(d.distance),
                    num(d.travel_steps),
                    d.solver_tau.to_string(),
                    d.solver_leave_step.to_string(),
                    num(d.observed_mean),
                    num(d.gap),
                    d.n.to_string(),
                    opt(d.test.map(|t| t.t)),
                    opt(d.test.map(|t| t.p)),
                    d.significant.to_string(),
                ])?;
            }
        }
        w.flush()?;

        let mut entry = json!({
            "solver_inputs": {
                "gamma": gamma,
                "horizon": horizon,
                "travel_steps": travel.iter().map(|(d, t)| json!({"distance": d, "travel_steps": t})).collect::<Vec<_>>(),
            },
            "mvt": gap_json(&mvt),
            "discounted": gap_json(&disc),
        });
        if let Some(r) = self.gap_vs_gamma(&mvt) {
            entry["gap_vs_gamma"] = reg_json(&r);
            self.regressions.push(("gap_vs_gamma".into(), r));
        }
        self.summary.insert("gaps".into(), entry);
        Ok(())
    }

    /// Per-agent MVT gap against the agent's own discount factor, when the
    /// logs hold several agents with different factors.
    fn gap_vs_gamma(&self, mvt: &OptimalityGapReport) -> Option<RegressionResult> {
        let gamma_of: BTreeMap<String, f64> = self
            .logs
            .iter()
            .filter_map(|l| Some((l.header.agent_id(), l.header.agent.as_ref()?.gamma)))
            .collect();
        let pts: Vec<(f64, f64)> = mvt
            .unit_gaps
            .iter()
            .filter_map(|(id, g)| Some((*gamma_of.get(id)?, *g)))
            .collect();
        let mut distinct: Vec<f64> = pts.iter().map(|p| p.0).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if mvt.unit != "agent" || distinct.len() < 2 {
            return None;
        }
        gap_vs_discount_regression(&pts).ok()
    }

    fn sliding(&mut self) -> Result<()> {
        let labels = self.labels()?;
        let (win, mar, k) = (self.args.window, self.args.margin, self.args.state_index);
        let mut entry = json!({});
        for (al, name) in [(Alignment::Entry, "entry"), (Alignment::Exit, "exit")] {
            let s = sliding_slope_regression(&self.encounters, &labels, al, win, mar, k)?;
            let mut w = self.csv(&format!("sliding_{name}.csv"))?;
            w.write_record(["offset", "slope", "intercept", "slope_se", "t", "p", "n", "significant"])?;
            for ((t, r), sig) in s.offsets.iter().zip(&s.results).zip(&s.significant) {
                w.write_record([
                    t.to_string(),
                    opt(r.map(|r| r.slope)),
                    opt(r.map(|r| r.intercept)),
                    opt(r.map(|r| r.slope_se)),
                    opt(r.map(|r| r.t)),
                    opt(r.map(|r| r.p)),
                    r.map_or_else(|| "0".into(), |r| r.n.to_string()),
                    sig.to_string(),
                ])?;
            }
            w.flush()?;
            let run = longest_significant_run(&s);
            entry[name] = json!({
                "threshold": s.threshold,
                "convention": s.convention,
                "significant_offsets": s.significant_offsets(),
                "longest_run": run.map(|(a, b)| json!({"from": a, "to": b, "length": b - a + 1})),
            });
            if al == Alignment::Entry {
                if let Some((a, b)) = run {
                    let offsets: Vec<i64> = (a..=b).collect();
                    let m = quartile_mean_slopes(&self.encounters, &labels, &offsets, k);
                    entry[name]["quartile_mean_slopes"] = json!(Quartile::ALL
                        .iter()
                        .zip(m)
                        .map(|(q, v)| json!({"quartile": q.name(), "mean_slope": v}))
                        .collect::<Vec<_>>());
                }
                self.entry_sliding = Some(s);
            }
        }
        self.summary.insert("sliding".into(), entry);
        Ok(())
    }

    fn traces(&mut self) -> Result<()> {
        let labels = self.labels()?;
        let (win, mar, k) = (self.args.window, self.args.margin, self.args.state_index);
        let mut w = self.csv("quartile_traces.csv")?;
        w.write_record(["alignment", "quartile", "offset", "mean", "n"])?;
        let mut points = 0;
        for (al, name) in [(Alignment::Entry, "entry"), (Alignment::Exit, "exit")] {
            for p in quartile_traces(&self.encounters, &labels, al, win, mar, k) {
                w.write_record([
                    name.to_string(),
                    p.quartile.name().to_string(),
                    p.offset.to_string(),
                    num(p.mean),
                    p.n.to_string(),
                ])?;
                points += 1;
            }
        }
        w.flush()?;
        let mut counts = [0usize; 4];
        for q in labels.iter().flatten() {
            counts[q.index() - 1] += 1;
        }
        self.summary.insert(
            "quartile_traces".into(),
            json!({
                "points": points,
                "quartile_sizes": Quartile::ALL.iter().zip(counts)
                    .map(|(q, n)| json!({"quartile": q.name(), "n": n})).collect::<Vec<_>>(),
            }),
        );
        Ok(())
    }

    fn range(&mut self) -> Result<()> {
        let k = self.args.range_index;
        let mut w = self.csv("range.csv")?;
        w.write_record(["agent", "episode", "patch", "distance", "entry_value", "exit_value", "range"])?;
        for e in self.encounters.iter().filter(|e| !e.truncated) {
            let (Some(a), Some(b)) = (
                e.entry_state().and_then(|s| s.get(k)),
                e.exit_state().and_then(|s| s.get(k)),
            ) else {
                continue;
            };
            w.write_record([
                e.agent.clone(),
                e.episode.to_string(),
                e.patch.to_string(),
                num(e.patch_distance),
                num(*a),
                num(*b),
                num(b - a),
            ])?;
        }
        w.flush()?;
        let r = activity_range_regression(&self.encounters, k)?;
        self.summary.insert("range".into(), reg_json(&r));
        self.regressions.push(("range".into(), r));
        Ok(())
    }

    fn slope_distance(&mut self) -> Result<()> {
        if self.entry_sliding.is_none() {
            let labels = self.labels()?;
            let s = sliding_slope_regression(
                &self.encounters,
                &labels,
                Alignment::Entry,
                self.args.window,
                self.args.margin,
                self.args.state_index,
            )?;
            self.entry_sliding = Some(s);
        }
        let s = self.entry_sliding.as_ref().expect("set above");
        let offsets = s.significant_offsets();
        let r = slope_vs_distance_regression(&self.encounters, &offsets, self.args.state_index)?;
        let mut w = self.csv("slope_distance.csv")?;
        w.write_record(["window_offsets", "slope", "slope_se", "p", "n"])?;
        let window = offsets.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
        w.write_record([window, num(r.slope), num(r.slope_se), num(r.p), r.n.to_string()])?;
        w.flush()?;
        self.summary.insert(
            "slope_distance".into(),
            json!({"window_offsets": offsets, "regression": reg_json(&r)}),
        );
        self.regressions.push(("slope_distance".into(), r));
        Ok(())
    }

    fn exit_anova(&mut self) -> Result<()> {
        let labels = self.labels()?;
        let res = exit_activity_anova(&self.encounters, &labels, self.args.state_index)?;
        let mut w = self.csv("exit_anova.csv")?;
        w.write_record(["a", "b", "mean_difference", "t", "p", "significant"])?;
        for row in &res.pairwise {
            w.write_record([
                row.a.name().to_string(),
                row.b.name().to_string(),
                num(row.mean_difference),
                num(row.t),
                num(row.p),
                row.significant.to_string(),
            ])?;
        }
        w.flush()?;
        self.summary
            .insert("exit_anova".into(), serde_json::to_value(&res)?);
        Ok(())
    }

    fn pca(&mut self) -> Result<()> {
        let p = state_pca(&self.encounters)?;
        let dim = p.mean.len();
        let mut w = self.csv("pca.csv")?;
        let mut header = vec![
            "component".to_string(),
            "explained_variance".into(),
            "explained_variance_ratio".into(),
        ];
        header.extend((0..dim).map(|j| format!("loading_{j}")));
        w.write_record(&header)?;
        for (i, c) in p.components.iter().enumerate() {
            let mut row = vec![
                (i + 1).to_string(),
                num(p.explained_variance[i]),
                num(p.explained_variance_ratio[i]),
            ];
            row.extend(c.iter().map(|v| num(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        self.summary.insert("pca".into(), serde_json::to_value(&p)?);
        Ok(())
    }
}

fn gap_json(r: &OptimalityGapReport) -> Value {
    serde_json::to_value(r).expect("gap report serializes")
}
