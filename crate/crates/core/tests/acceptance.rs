//! Acceptance criteria 1-9. Each criterion prints one PASS/FAIL line with its
//! measurements and wall time; the test fails if any criterion fails.

use std::time::{Duration, Instant};

use forage_core::agents::{AgentKind, AgentParams};
use forage_core::analysis::{
    activity_range_regression, estimate_travel_steps, exit_activity_anova, extract_encounters,
    leaving_time_regression, longest_significant_run, optimality_gap, quartile_mean_slopes,
    quartile_split, score_regression, sliding_slope_regression, Alignment, GapSolver,
    PatchEncounter, DEFAULT_MARGIN,
};
use forage_core::batch::{run_one, simulate_batch, EvaluationConfig, RunConfig};
use forage_core::env::{patch_reward, reset, step, Action, WorldConfig};
use forage_core::episode_log::EpisodeLog;
use forage_core::optimal::{
    average_rate, discounted_mvt_leave_step, discounted_return_alternating, mvt_leave_step,
    PatchSchedule, DEFAULT_HORIZON, DEFAULT_MAX_STEPS,
};
use forage_core::stats::{
    anova_oneway, bonferroni, f_upper_p, linear_regression, pca, pearson, t_test_welch,
    t_two_sided_p,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

// pinned tolerances
const STEP_TOL: f64 = 2.0;
const ORACLE_REL: f64 = 1e-10;
const IDENTITY_TOL: f64 = 1e-10;
const TABLE_TOL: f64 = 1e-3;
const PCA_TOL: f64 = 1e-9;
const ALPHA: f64 = 0.05;

type Check = Result<String, String>;

fn need(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn simulate(kind: AgentKind, tweak: impl FnOnce(&mut AgentParams), episodes: u32) -> Vec<EpisodeLog> {
    let mut agent = AgentParams::of_kind(kind);
    tweak(&mut agent);
    let run = RunConfig {
        world: WorldConfig::default(),
        agent,
        evaluation: EvaluationConfig {
            episodes_per_distance: episodes,
            ..EvaluationConfig::default()
        },
        out_dir: None,
    };
    simulate_batch(&run, None).expect("batch runs")
}

fn c1_mvt_exact() -> Check {
    let s = PatchSchedule::default();
    for tau in (0..=120).step_by(10) {
        let sol = mvt_leave_step(tau, &s, DEFAULT_MAX_STEPS);
        // brute-force table; cumulative sum built by hand
        let mut g = 0.0;
        let mut best = (0u32, f64::NEG_INFINITY);
        for t in 1..=DEFAULT_MAX_STEPS {
            g += s.n0 * (-s.lambda * f64::from(t - 1)).exp();
            let rate = g / f64::from(t + tau);
            if rate > best.1 * (1.0 + 1e-13) {
                best = (t, rate);
            }
        }
        need(
            sol.leave_step == best.0,
            format!("tau {tau}: solver {} vs table {}", sol.leave_step, best.0),
        )?;
    }
    let t58 = mvt_leave_step(58, &s, DEFAULT_MAX_STEPS).leave_step;
    Ok(format!("13 tau values exact, T*(58)={t58}"))
}

fn c2_discounted() -> Check {
    let s = PatchSchedule::default();
    let t_star = mvt_leave_step(58, &s, DEFAULT_MAX_STEPS).leave_step;
    let solve = |g: f64, h: u32| {
        discounted_mvt_leave_step(58, g, h, &s, DEFAULT_MAX_STEPS)
            .map(|x| x.leave_step)
            .map_err(|e| e.to_string())
    };
    let p1 = solve(1.0, DEFAULT_HORIZON)?;
    need(
        (f64::from(p1) - f64::from(t_star)).abs() <= STEP_TOL,
        format!("P*(1)={p1} vs T*={t_star}"),
    )?;
    let gammas = [0.99, 0.995, 0.998, 0.999];
    let mut ps = Vec::new();
    for g in gammas {
        let p = solve(g, DEFAULT_HORIZON)?;
        need(p >= t_star, format!("P*({g})={p} below T*={t_star}"))?;
        let p2 = solve(g, 2 * DEFAULT_HORIZON)?;
        need(
            (i64::from(p) - i64::from(p2)).abs() <= 1,
            format!("horizon doubling at {g}: {p} -> {p2}"),
        )?;
        ps.push(p);
    }
    need(
        ps.windows(2).all(|w| w[0] >= w[1]),
        format!("P* not non-increasing in gamma: {ps:?}"),
    )?;
    Ok(format!("T*={t_star} P*(1)={p1} P*({gammas:?})={ps:?}"))
}

/// Term-by-term discounted sum over an explicitly laid out reward stream.
fn stream_return(m: u32, p: u32, tau: u32, gamma: f64, h: u32, s: &PatchSchedule, leave: bool) -> f64 {
    let mut total = 0.0;
    let mut t = 0u32;
    let mut push = |r: f64, t: &mut u32| {
        if *t < h {
            total += r * (f64::from(*t) * gamma.ln()).exp();
        }
        *t += 1;
    };
    if !leave {
        push(s.n0 * (-s.lambda * f64::from(m)).exp(), &mut t);
    }
    while t < h {
        for _ in 0..tau {
            push(0.0, &mut t);
        }
        for n in 0..p {
            push(s.n0 * (-s.lambda * f64::from(n)).exp(), &mut t);
        }
    }
    total
}

fn c3_return_oracle() -> Check {
    let s = PatchSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let m = rng.random_range(0..300);
        let p = rng.random_range(1..300);
        let tau = rng.random_range(0..150);
        let gamma = rng.random_range(0.9..1.0);
        let h = rng.random_range(1..3000);
        let leave = i % 2 == 0;
        let got = discounted_return_alternating(m, p, tau, gamma, h, &s, leave);
        let want = stream_return(m, p, tau, gamma, h, &s, leave);
        let rel = if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
        worst = worst.max(rel);
        need(
            rel <= ORACLE_REL,
            format!("m={m} P={p} tau={tau} gamma={gamma} h={h}: {got} vs {want}"),
        )?;
    }
    Ok(format!("100 tuples, worst relative error {worst:.2e}"))
}

fn c4_closure() -> Check {
    let s = PatchSchedule::default();
    let mut notes = Vec::new();
    let undiscounted = simulate(AgentKind::Planner, |a| a.gamma = 1.0, 50);
    need(undiscounted.len() == 200, "expected 200 episodes")?;
    let enc = extract_encounters(&undiscounted, DEFAULT_MARGIN);
    let travel = estimate_travel_steps(&undiscounted).map_err(|e| e.to_string())?;
    let rep = optimality_gap(&enc, &travel, GapSolver::Mvt, &s).map_err(|e| e.to_string())?;
    for d in &rep.per_distance {
        need(
            d.gap.abs() <= STEP_TOL,
            format!("gamma 1 vs MVT at {} m: gap {}", d.distance, d.gap),
        )?;
    }
    notes.push(format!(
        "g=1 vs MVT {:?}",
        rep.per_distance.iter().map(|d| d.gap).collect::<Vec<_>>()
    ));

    let discounted = simulate(AgentKind::Planner, |a| a.gamma = 0.995, 50);
    let enc = extract_encounters(&discounted, DEFAULT_MARGIN);
    let travel = estimate_travel_steps(&discounted).map_err(|e| e.to_string())?;
    let vs_mvt = optimality_gap(&enc, &travel, GapSolver::Mvt, &s).map_err(|e| e.to_string())?;
    for d in &vs_mvt.per_distance {
        need(d.gap > 0.0, format!("gamma .995 vs MVT at {} m: gap {}", d.distance, d.gap))?;
    }
    let solver = GapSolver::Discounted { gamma: 0.995, horizon: DEFAULT_HORIZON };
    let vs_own = optimality_gap(&enc, &travel, solver, &s).map_err(|e| e.to_string())?;
    for d in &vs_own.per_distance {
        need(
            d.gap.abs() <= STEP_TOL,
            format!("gamma .995 vs own solver at {} m: gap {}", d.distance, d.gap),
        )?;
    }
    notes.push(format!(
        "g=.995 vs MVT {:?} vs own {:?}",
        vs_mvt.per_distance.iter().map(|d| d.gap).collect::<Vec<_>>(),
        vs_own.per_distance.iter().map(|d| d.gap).collect::<Vec<_>>()
    ));
    Ok(notes.join("; "))
}

fn c5_adaptation() -> Check {
    let logs = simulate(AgentKind::MvtLearner, |_| {}, 50);
    let enc = extract_encounters(&logs, DEFAULT_MARGIN);
    let leave = leaving_time_regression(&enc).map_err(|e| e.to_string())?;
    need(
        leave.slope > 0.0 && leave.p < ALPHA,
        format!("leave b={} p={}", leave.slope, leave.p),
    )?;
    let score = score_regression(&logs).map_err(|e| e.to_string())?;
    need(
        score.slope < 0.0 && score.p < ALPHA,
        format!("score b={} p={}", score.slope, score.p),
    )?;
    let control = simulate(AgentKind::Threshold, |_| {}, 50);
    let cenc = extract_encounters(&control, DEFAULT_MARGIN);
    let ctl = leaving_time_regression(&cenc).map_err(|e| e.to_string())?;
    need(ctl.p >= ALPHA, format!("threshold leave b={} p={}", ctl.slope, ctl.p))?;
    Ok(format!(
        "leave b={:.3}±{:.3} p={:.1e}; score b={:.3}±{:.3} p={:.1e}; threshold b={:.3} p={:.3}",
        leave.slope, leave.slope_se, leave.p, score.slope, score.slope_se, score.p, ctl.slope, ctl.p
    ))
}

/// Encounters whose state slope is `-effect * quartile` on entry offsets
/// `from..=to` and zero elsewhere, plus unit Gaussian noise.
fn planted_encounters(effect: f64, from: i64, to: i64, seed: u64) -> Vec<PatchEncounter> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let per_distance = 400u32;
    let mut out = Vec::new();
    for (di, distance) in [6.0, 10.0].into_iter().enumerate() {
        for i in 0..per_distance {
            let leave = 60 + i;
            // the quartile this leave step will be assigned
            let q = 1 + (4 * i / per_distance) as i64;
            let margin = DEFAULT_MARGIN as i64;
            let mut value = 0.0;
            let mut trace = Vec::new();
            for t in -(margin + 1)..i64::from(leave) {
                let planted = if (from..=to).contains(&t) { -effect * q as f64 } else { 0.0 };
                value += planted + noise.sample(&mut rng);
                trace.push(vec![value]);
            }
            let pre = trace[..DEFAULT_MARGIN + 1].to_vec();
            let state = trace[DEFAULT_MARGIN + 1..].to_vec();
            out.push(PatchEncounter {
                agent: "planted".into(),
                episode: (di as u64) * 1000 + u64::from(i),
                patch: 0,
                patch_distance: distance,
                entry_step: 100,
                exit_step: 100 + leave,
                leave_step: leave,
                rewards: vec![0.0; leave as usize],
                state_trace: state,
                pre_trace: pre,
                post_trace: vec![vec![value]; DEFAULT_MARGIN],
                truncated: false,
            });
        }
    }
    out
}

fn c6_recovery() -> Check {
    let (from, to) = (5, 23);
    let enc = planted_encounters(0.25, from, to, 6);
    let labels = quartile_split(&enc).map_err(|e| e.to_string())?;
    let s = sliding_slope_regression(&enc, &labels, Alignment::Entry, 40, DEFAULT_MARGIN, 0)
        .map_err(|e| e.to_string())?;
    need((s.threshold - 0.001).abs() < 1e-15, format!("threshold {}", s.threshold))?;
    let inside_run = {
        let mut best = 0;
        let mut cur = 0;
        for (&t, &sig) in s.offsets.iter().zip(&s.significant) {
            if sig && (from..=to).contains(&t) {
                cur += 1;
                best = best.max(cur);
            } else {
                cur = 0;
            }
        }
        best
    };
    let outside = s
        .offsets
        .iter()
        .zip(&s.significant)
        .filter(|(t, sig)| **sig && !(from..=to).contains(*t))
        .count();
    need(inside_run >= 15, format!("run inside window {inside_run}"))?;
    need(outside <= 1, format!("{outside} significant steps outside window"))?;

    let logs = simulate(AgentKind::Accumulator, |a| a.accum_noise_sd = 0.0, 10);
    let enc = extract_encounters(&logs, DEFAULT_MARGIN);
    let labels = quartile_split(&enc).map_err(|e| e.to_string())?;
    let anova = exit_activity_anova(&enc, &labels, 0).map_err(|e| e.to_string())?;
    need(anova.anova.p > ALPHA, format!("noiseless exit ANOVA p={}", anova.anova.p))?;
    Ok(format!(
        "planted run {inside_run} steps, {outside} outside; noiseless exit ANOVA F={:.3} p={:.3}",
        anova.anova.f, anova.anova.p
    ))
}

fn c7_mechanism() -> Check {
    let logs = simulate(AgentKind::Accumulator, |_| {}, 100);
    let enc = extract_encounters(&logs, DEFAULT_MARGIN);
    for d in [6.0, 8.0, 10.0, 12.0] {
        let n = enc.iter().filter(|e| !e.truncated && e.patch_distance == d).count();
        need(n >= 1000, format!("{n} encounters at {d} m"))?;
    }
    let labels = quartile_split(&enc).map_err(|e| e.to_string())?;
    let s = sliding_slope_regression(&enc, &labels, Alignment::Entry, 40, DEFAULT_MARGIN, 0)
        .map_err(|e| e.to_string())?;
    let (a, b) = longest_significant_run(&s).ok_or("no significant entry window")?;
    let window: Vec<i64> = (a..=b).collect();
    let m = quartile_mean_slopes(&enc, &labels, &window, 0);
    let m: Vec<f64> = m.iter().map(|v| v.ok_or("empty quartile")).collect::<Result<_, _>>()?;
    need(
        m.windows(2).all(|w| w[0] > w[1]),
        format!("quartile mean slopes not decreasing: {m:?}"),
    )?;
    // coordinate 1 is the adaptive rate estimate
    let r = activity_range_regression(&enc, 1).map_err(|e| e.to_string())?;
    need(r.slope > 0.0 && r.p < ALPHA, format!("range b={} p={}", r.slope, r.p))?;
    Ok(format!(
        "window {a}..{b}, quartile slopes {:?}; range b={:.2e} p={:.1e}",
        m.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
        r.slope,
        r.p
    ))
}

fn c8_stats() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let x: Vec<f64> = (0..40).map(|i| f64::from(i) * 0.25).collect();
    let y: Vec<f64> = x.iter().map(|v| 0.3 * v + noise.sample(&mut rng)).collect();
    let reg = linear_regression(&x, &y).map_err(|e| e.to_string())?;
    let cor = pearson(&x, &y).map_err(|e| e.to_string())?;
    need(
        (reg.p - cor.p).abs() <= IDENTITY_TOL,
        format!("regression p {} vs pearson p {}", reg.p, cor.p),
    )?;

    let a: Vec<f64> = (0..15).map(|_| noise.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..15).map(|_| 0.8 + noise.sample(&mut rng)).collect();
    let f = anova_oneway(&[a.clone(), b.clone()]).map_err(|e| e.to_string())?.f;
    let t = t_test_welch(&a, &b).map_err(|e| e.to_string())?.t;
    need(
        (f - t * t).abs() <= 1e-9 * f.max(1.0),
        format!("F {f} vs t^2 {}", t * t),
    )?;

    let t_table = [
        (2.228, 10.0, 0.05),
        (2.845, 20.0, 0.01),
        (2.042, 30.0, 0.05),
        (2.015, 5.0, 0.10),
        (3.460, 60.0, 0.001),
    ];
    for (t, df, p) in t_table {
        let got = t_two_sided_p(t, df);
        need((got - p).abs() <= TABLE_TOL, format!("t({t}, {df}) p {got} vs {p}"))?;
    }
    let f_table = [
        (4.10, 2.0, 10.0, 0.05),
        (4.94, 3.0, 20.0, 0.01),
        (4.17, 1.0, 30.0, 0.05),
        (2.61, 4.0, 40.0, 0.05),
        (3.34, 5.0, 60.0, 0.01),
    ];
    for (f, d1, d2, p) in f_table {
        let got = f_upper_p(f, d1, d2);
        need((got - p).abs() <= TABLE_TOL, format!("F({f}, {d1}, {d2}) p {got} vs {p}"))?;
    }

    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let z: Vec<f64> = (0..4).map(|_| noise.sample(&mut rng)).collect();
            vec![z[0], 2.0 * z[0] + z[1], z[2] - z[1], 0.5 * z[3] + z[0]]
        })
        .collect();
    let p = pca(&rows).map_err(|e| e.to_string())?;
    let mut worst_orth: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let dot: f64 = p.components[i].iter().zip(&p.components[j]).map(|(a, b)| a * b).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            worst_orth = worst_orth.max((dot - want).abs());
        }
    }
    need(worst_orth <= PCA_TOL, format!("orthonormality error {worst_orth}"))?;
    let mut worst_rec: f64 = 0.0;
    for row in &rows {
        let scores = p.project(row, 4);
        for (k, v) in row.iter().enumerate() {
            let back = p.mean[k]
                + (0..4).map(|c| scores[c] * p.components[c][k]).sum::<f64>();
            worst_rec = worst_rec.max((back - v).abs());
        }
    }
    need(worst_rec <= PCA_TOL, format!("reconstruction error {worst_rec}"))?;
    Ok(format!(
        "|p_reg-p_r|={:.1e}, |F-t^2|={:.1e}, PCA orth {worst_orth:.1e} recon {worst_rec:.1e}",
        (reg.p - cor.p).abs(),
        (f - t * t).abs()
    ))
}

fn c9_environment() -> Check {
    let config = WorldConfig::default();
    let ratio = (-0.01f64).exp();
    for n in 0..500 {
        let r0 = patch_reward(n, config.n0, config.lambda);
        let r1 = patch_reward(n + 1, config.n0, config.lambda);
        need(
            ((r1 / r0) - ratio).abs() <= 1e-12,
            format!("ratio at n={n}: {}", r1 / r0),
        )?;
    }

    // refresh fixtures: place the agent by hand and hold still
    let centers = config.patch_centers();
    let mut state = reset(&config, 0).map_err(|e| e.to_string())?;
    let visit = |state: &mut forage_core::env::WorldState, at: [f64; 2], steps: u32| -> Result<Vec<f64>, String> {
        state.position = at;
        state.velocity = [0.0, 0.0];
        let mut rewards = Vec::new();
        for _ in 0..steps {
            let out = step(state, &Action::idle(), &config).map_err(|e| e.to_string())?;
            rewards.push(out.reward);
            *state = out.state;
        }
        Ok(rewards)
    };
    let r = |n: u32| patch_reward(n, config.n0, config.lambda);
    let first = visit(&mut state, centers[0], 5)?;
    need(first == (0..5).map(r).collect::<Vec<_>>(), "fresh patch pays r(0..5)")?;
    let away = visit(&mut state, [0.0, 0.0], 7)?;
    need(away.iter().all(|v| *v == 0.0) && state.depletion == [5, 0], "travel pays nothing, counters kept")?;
    let again = visit(&mut state, centers[0], 3)?;
    need(again == (5..8).map(r).collect::<Vec<_>>(), "same-patch re-entry resumes depletion")?;
    let other = visit(&mut state, centers[1], 2)?;
    need(
        other == vec![r(0), r(1)] && state.depletion == [0, 2],
        format!("opposite patch refreshes: {:?}", state.depletion),
    )?;
    let back = visit(&mut state, centers[0], 1)?;
    need(back == vec![r(0)], "refreshed patch pays n0 again")?;

    // score conservation and bit-identical logs
    let run = RunConfig {
        agent: AgentParams::of_kind(AgentKind::Accumulator),
        ..RunConfig::default()
    };
    let spec = run.episodes()[3];
    let a = run_one(&run, &spec).map_err(|e| e.to_string())?;
    let b = run_one(&run, &spec).map_err(|e| e.to_string())?;
    let (mut ba, mut bb) = (Vec::new(), Vec::new());
    a.write_to(&mut ba).map_err(|e| e.to_string())?;
    b.write_to(&mut bb).map_err(|e| e.to_string())?;
    need(ba == bb, "repeated seed gives different log bytes")?;
    let mut rebuilt = 0.0;
    for rec in &a.records {
        if let Some(p) = rec.inside {
            rebuilt += r(rec.depletion[p] - 1);
        }
    }
    need(
        (rebuilt - a.score()).abs() <= 1e-12 * a.score().max(1.0),
        format!("score {} vs rebuilt {rebuilt}", a.score()),
    )?;
    let encounter_reward: f64 = extract_encounters(std::slice::from_ref(&a), DEFAULT_MARGIN)
        .iter()
        .flat_map(|e| e.rewards.iter())
        .sum();
    need(encounter_reward <= a.score() + 1e-12, "encounters pay more than the episode")?;

    let bonf = bonferroni(0.05, 50);
    need(bonf == 0.001, format!("bonferroni(0.05, 50) = {bonf}"))?;
    let rate = average_rate(91, 58, &PatchSchedule::default());
    Ok(format!(
        "ratio e^-0.01, refresh fixtures, {} byte log reproduced, score {:.4}, R(91;58)={rate:.6}",
        ba.len(),
        a.score()
    ))
}

fn main() {
    type Criterion = (u32, &'static str, Duration, fn() -> Check);
    let criteria: [Criterion; 9] = [
        (1, "MVT solver exactness", Duration::from_secs(1), c1_mvt_exact),
        (2, "discounted-MVT consistency", Duration::from_secs(30), c2_discounted),
        (3, "discounted-return oracle", Duration::from_secs(10), c3_return_oracle),
        (4, "closed-loop optimality closure", Duration::from_secs(300), c4_closure),
        (5, "behavioral adaptation", Duration::from_secs(600), c5_adaptation),
        (6, "dynamics pipeline recovery", Duration::from_secs(120), c6_recovery),
        (7, "accumulator mechanism", Duration::from_secs(600), c7_mechanism),
        (8, "statistics kernel", Duration::from_secs(10), c8_stats),
        (9, "environment contract", Duration::from_secs(10), c9_environment),
    ];
    let mut failed = Vec::new();
    for (id, name, budget, f) in criteria {
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let outcome = match result {
            Ok(detail) if took <= budget => Ok(detail),
            Ok(detail) => Err(format!("{detail}; over budget {budget:?}")),
            Err(e) => Err(e),
        };
        match outcome {
            Ok(detail) => println!("PASS {id} {name} [{:.2}s] {detail}", took.as_secs_f64()),
            Err(e) => {
                println!("FAIL {id} {name} [{:.2}s] {e}", took.as_secs_f64());
                failed.push(id);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
