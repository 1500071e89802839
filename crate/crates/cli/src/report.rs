use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use forage_core::optimal::{
    average_rate, discounted_mvt_leave_step, PatchSchedule, DEFAULT_HORIZON, DEFAULT_MAX_STEPS,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::manifest::{entries, write_json, FileEntry};
use crate::svg::{Band, Chart, Mark, Series, PALETTE};
use crate::ReportArgs;

#[derive(Deserialize)]
struct ScoreRow {
    distance: f64,
    score: f64,
}

#[derive(Deserialize)]
struct LeaveRow {
    agent: String,
    distance: f64,
    mean_leave_step: f64,
}

#[derive(Deserialize)]
struct GapRow {
    solver: String,
    gamma: f64,
    distance: f64,
    solver_leave_step: f64,
}

#[derive(Deserialize)]
struct TravelRow {
    distance: f64,
    travel_steps: f64,
}

#[derive(Deserialize)]
struct TraceRow {
    alignment: String,
    quartile: String,
    offset: f64,
    mean: f64,
}

#[derive(Deserialize)]
struct SlidingRow {
    offset: f64,
    significant: bool,
}

#[derive(Serialize)]
struct ReportManifest {
    figures: Vec<FileEntry>,
    skipped: Vec<String>,
}

/// Rows of `name`, or `None` with a notice when the file is absent.
fn table<T: DeserializeOwned>(dir: &Path, name: &str, missing: &mut Vec<String>) -> Result<Option<Vec<T>>> {
    let path = dir.join(name);
    if !path.exists() {
        eprintln!("notice: {name} not found, skipping its figures");
        missing.push(name.to_string());
        return Ok(None);
    }
    let mut r = csv::Reader::from_path(&path).with_context(|| format!("opening {}", path.display()))?;
    let rows = r
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(rows))
}

fn color(i: usize) -> String {
    PALETTE[i % PALETTE.len()].to_string()
}

fn by_distance_mean(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut m: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for (d, v) in points {
        let c = m.entry(d.to_bits()).or_insert((0.0, 0));
        c.0 += v;
        c.1 += 1;
    }
    let mut out: Vec<(f64, f64)> = m
        .into_iter()
        .map(|(d, (s, n))| (f64::from_bits(d), s / n as f64))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn gamma_from_summary(dir: &Path) -> Option<(f64, u32)> {
    let text = fs::read_to_string(dir.join("summary.json")).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    let inputs = &v["gaps"]["solver_inputs"];
    let g = inputs["gamma"].as_f64()?;
    let h = inputs["horizon"].as_u64().unwrap_or(u64::from(DEFAULT_HORIZON));
    Some((g, u32::try_from(h).ok()?))
}

pub fn run(args: &ReportArgs) -> Result<()> {
    let dir = &args.dir;
    let out = args.out.clone().unwrap_or_else(|| dir.clone());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut missing = Vec::new();
    let mut charts: Vec<(String, Chart)> = Vec::new();

    if let Some(rows) = table::<ScoreRow>(dir, "scores.csv", &mut missing)? {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.distance, r.score)).collect();
        charts.push((
            "scores.svg".into(),
            Chart {
                title: "Episode score by patch distance".into(),
                x_label: "patch distance (m)".into(),
                y_label: "score".into(),
                series: vec![
                    Series { label: "episodes".into(), color: color(0), mark: Mark::Points, points: pts.clone() },
                    Series { label: "mean".into(), color: color(3), mark: Mark::Line, points: by_distance_mean(&pts) },
                ],
                bands: vec![],
            },
        ));
    }

    let leaves = table::<LeaveRow>(dir, "leaving_times.csv", &mut missing)?;
    let gaps = table::<GapRow>(dir, "gaps.csv", &mut missing)?;
    if leaves.is_some() || gaps.is_some() {
        let mut series = Vec::new();
        if let Some(rows) = &leaves {
            let mut agents: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
            for r in rows {
                agents.entry(&r.agent).or_default().push((r.distance, r.mean_leave_step));
            }
            let many = agents.len() > 1;
            let all: Vec<(f64, f64)> = agents.values().flatten().copied().collect();
            series.push(Series {
                label: if many { "agent means".into() } else { "observed".into() },
                color: color(0),
                mark: if many { Mark::Points } else { Mark::Line },
                points: if many { all.clone() } else { by_distance_mean(&all) },
            });
            if many {
                series.push(Series { label: "mean".into(), color: color(0), mark: Mark::Line, points: by_distance_mean(&all) });
            }
        }
        if let Some(rows) = &gaps {
            let mut solvers: BTreeMap<(String, u64), Vec<(f64, f64)>> = BTreeMap::new();
            for r in rows {
                solvers
                    .entry((r.solver.clone(), r.gamma.to_bits()))
                    .or_default()
                    .push((r.distance, r.solver_leave_step));
            }
            for (i, ((name, g), mut pts)) in solvers.into_iter().enumerate() {
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                let label = if name == "mvt" {
                    "MVT".to_string()
                } else {
                    format!("discounted MVT g={}", f64::from_bits(g))
                };
                series.push(Series { label, color: color(1 + i), mark: Mark::Dashed, points: pts });
            }
        }
        charts.push((
            "leave_steps.svg".into(),
            Chart {
                title: "Patch leave step by distance".into(),
                x_label: "patch distance (m)".into(),
                y_label: "leave step".into(),
                series,
                bands: vec![],
            },
        ));
    }

    if let Some(rows) = table::<TravelRow>(dir, "travel.csv", &mut missing)? {
        let schedule = PatchSchedule::default();
        let taus: Vec<(f64, u32)> = rows
            .iter()
            .map(|r| (r.distance, r.travel_steps.round().max(0.0) as u32))
            .collect();
        let rate = taus
            .iter()
            .enumerate()
            .map(|(i, (d, tau))| Series {
                label: format!("{d} m (tau {tau})"),
                color: color(i),
                mark: Mark::Line,
                points: (1..=400).map(|t| (f64::from(t), average_rate(t, *tau, &schedule))).collect(),
            })
            .collect();
        charts.push((
            "rate_curves.svg".into(),
            Chart {
                title: "Average reward rate by residence".into(),
                x_label: "steps in patch".into(),
                y_label: "reward per step".into(),
                series: rate,
                bands: vec![],
            },
        ));
        match gamma_from_summary(dir) {
            Some((gamma, horizon)) => {
                let mut series = Vec::new();
                for (i, (d, tau)) in taus.iter().enumerate() {
                    match discounted_mvt_leave_step(*tau, gamma, horizon, &schedule, DEFAULT_MAX_STEPS) {
                        Ok(sol) => series.push(Series {
                            label: format!("{d} m (tau {tau})"),
                            color: color(i),
                            mark: Mark::Line,
                            points: sol
                                .indifference_curve
                                .iter()
                                .filter_map(|(p, m)| Some((f64::from(*p), f64::from((*m)?))))
                                .filter(|(p, _)| *p <= 400.0)
                                .collect(),
                        }),
                        Err(e) => eprintln!("notice: indifference curve at {d} m skipped: {e}"),
                    }
                }
                series.push(Series {
                    label: "identity".into(),
                    color: "#888888".into(),
                    mark: Mark::Dashed,
                    points: vec![(1.0, 1.0), (400.0, 400.0)],
                });
                charts.push((
                    "indifference_curves.svg".into(),
                    Chart {
                        title: format!("Stay/leave indifference, gamma {gamma}"),
                        x_label: "alternating residence P".into(),
                        y_label: "indifference step".into(),
                        series,
                        bands: vec![],
                    },
                ));
            }
            None => eprintln!("notice: no solver inputs in summary.json, skipping indifference curves"),
        }
    }

    if let Some(rows) = table::<TraceRow>(dir, "quartile_traces.csv", &mut missing)? {
        for align in ["entry", "exit"] {
            let mut quartiles: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
            for r in rows.iter().filter(|r| r.alignment == align) {
                match quartiles.iter_mut().find(|(q, _)| *q == r.quartile) {
                    Some((_, v)) => v.push((r.offset, r.mean)),
                    None => quartiles.push((r.quartile.clone(), vec![(r.offset, r.mean)])),
                }
            }
            if quartiles.is_empty() {
                continue;
            }
            let sig_name = format!("sliding_{align}.csv");
            let bands = match table::<SlidingRow>(dir, &sig_name, &mut missing)? {
                Some(s) => s
                    .iter()
                    .filter(|r| r.significant)
                    .map(|r| Band { from: r.offset - 0.5, to: r.offset + 0.5, color: "#111111".into() })
                    .collect(),
                None => vec![],
            };
            charts.push((
                format!("quartile_traces_{align}.svg"),
                Chart {
                    title: format!("State by leave-time quartile, {align} aligned"),
                    x_label: format!("steps from {align}"),
                    y_label: "mean state".into(),
                    series: quartiles
                        .into_iter()
                        .enumerate()
                        .map(|(i, (q, pts))| Series { label: q, color: color(i), mark: Mark::Line, points: pts })
                        .collect(),
                    bands,
                },
            ));
        }
    }

    let mut names = Vec::new();
    for (name, chart) in &charts {
        fs::write(out.join(name), chart.render()).with_context(|| format!("writing {name}"))?;
        names.push(name.clone());
    }
    let manifest = ReportManifest {
        figures: entries(&out, &names)?,
        skipped: missing,
    };
    write_json(&out.join("report_manifest.json"), &manifest)?;
    println!("wrote {} figures to {}", names.len(), out.display());
    Ok(())
}
