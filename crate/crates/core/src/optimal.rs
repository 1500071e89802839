//! Patch-leaving solvers: the marginal value theorem (MVT) on the discrete
//! reward schedule, and its temporally discounted counterpart obtained from
//! simulated stay/leave decisions.
//!
//! Everything works in whole steps. Rewards are `n0 * exp(-lambda * n)` for
//! the `n`-th harvested step of a fresh patch; travel steps pay nothing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::patch_reward;

/// Horizon of the simulated stay/leave reward streams.
pub const DEFAULT_HORIZON: u32 = 5000;
/// Longest patch residence considered by the sweeps (one episode).
pub const DEFAULT_MAX_STEPS: u32 = 3600;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no stay/leave fixed point in P = 1..={p_max} (tau = {tau}, gamma = {gamma})")]
    NoFixedPoint { tau: u32, gamma: f64, p_max: u32 },
}

/// Exponentially depleting patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchSchedule {
    pub n0: f64,
    pub lambda: f64,
}

impl Default for PatchSchedule {
    fn default() -> Self {
        Self {
            n0: 1.0 / 30.0,
            lambda: 0.01,
        }
    }
}

impl PatchSchedule {
    pub fn new(n0: f64, lambda: f64) -> Self {
        Self { n0, lambda }
    }

    pub fn reward(&self, n: u32) -> f64 {
        patch_reward(n, self.n0, self.lambda)
    }

    /// Total reward of the first `t` steps in a fresh patch.
    pub fn cumulative(&self, t: u32) -> f64 {
        cumulative_patch_reward(t, self.n0, self.lambda)
    }
}

/// `sum_{n<t} n0 * exp(-lambda n)` in closed form.
pub fn cumulative_patch_reward(t: u32, n0: f64, lambda: f64) -> f64 {
    if t == 0 {
        return 0.0;
    }
    if lambda == 0.0 {
        return n0 * f64::from(t);
    }
    // expm1 keeps the small-lambda ratio accurate
    n0 * (-(-lambda * f64::from(t)).exp_m1()) / (-(-lambda).exp_m1())
}

/// Long-run reward per step of alternating `t` patch steps with `tau` travel
/// steps. Requires `t + tau > 0`.
pub fn average_rate(t: u32, tau: u32, schedule: &PatchSchedule) -> f64 {
    debug_assert!(t + tau > 0);
    schedule.cumulative(t) / f64::from(t + tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvtSolution {
    pub travel_steps: u32,
    pub leave_step: u32,
    pub average_rate: f64,
    /// `(T, R(T))` for every scanned `T`.
    pub rate_curve: Vec<(u32, f64)>,
}

/// Patch residence maximizing the long-run rate, by exhaustive scan over
/// `1..=t_max`. Ties go to the smallest `T`.
pub fn mvt_leave_step(tau: u32, schedule: &PatchSchedule, t_max: u32) -> MvtSolution {
    let t_max = t_max.max(1);
    let rate_curve: Vec<(u32, f64)> = (1..=t_max)
        .map(|t| (t, average_rate(t, tau, schedule)))
        .collect();
    let (leave_step, rate) =
        rate_curve
            .iter()
            .copied()
            .fold((0, f64::NEG_INFINITY), |best, (t, r)| {
                if r > best.1 {
                    (t, r)
                } else {
                    best
                }
            });
    MvtSolution {
        travel_steps: tau,
        leave_step,
        average_rate: rate,
        rate_curve,
    }
}

/// Leave step implied by an observed environment rate: the first harvest
/// index whose reward falls strictly below `rho`.
pub fn empirical_mvt_leave_step(rho: f64, schedule: &PatchSchedule) -> Result<u32, OptimalError> {
    if !(rho > 0.0) {
        return Err(OptimalError::Domain(format!(
            "rate must be positive, got {rho}"
        )));
    }
    if rho > schedule.n0 {
        return Err(OptimalError::Domain(format!(
            "rate {rho} exceeds fresh patch reward {}",
            schedule.n0
        )));
    }
    let guess = ((schedule.n0 / rho).ln() / schedule.lambda)
        .floor()
        .max(0.0);
    let mut n = if guess.is_finite() && guess < f64::from(u32::MAX) {
        guess as u32
    } else {
        0
    };
    n = n.saturating_sub(2);
    while n > 0 && schedule.reward(n - 1) < rho {
        n -= 1;
    }
    while schedule.reward(n) >= rho {
        n += 1;
    }
    Ok(n)
}

/// Reward at position `t` of the stream that starts with `tau` travel steps and
/// then alternates `patch_steps` fresh-patch steps with `tau` travel steps.
fn leave_stream_reward(t: u32, patch_steps: u32, tau: u32, rewards: &[f64]) -> f64 {
    if t < tau {
        return 0.0;
    }
    let phase = (t - tau) % (patch_steps + tau);
    if phase < patch_steps {
        rewards[phase as usize]
    } else {
        0.0
    }
}

/// Discounted return of a stay-or-leave choice made at depletion `m`.
///
/// Leaving starts `tau` travel steps followed by repeating cycles of
/// `patch_steps` fresh-patch steps and `tau` travel steps. Staying pays
/// `r(m)` once and then leaves. Both streams are truncated at `horizon` steps
/// and summed as `sum_t gamma^t reward_t`.
#[allow(clippy::too_many_arguments)]
pub fn discounted_return_alternating(
    m: u32,
    patch_steps: u32,
    tau: u32,
    gamma: f64,
    horizon: u32,
    schedule: &PatchSchedule,
    leave_now: bool,
) -> f64 {
    let rewards: Vec<f64> = (0..patch_steps).map(|n| schedule.reward(n)).collect();
    let mut total = 0.0;
    let mut discount = 1.0;
    let (offset, first) = if leave_now {
        (0, None)
    } else {
        (1, Some(schedule.reward(m)))
    };
    if let Some(r) = first {
        if horizon > 0 {
            total += r;
            discount *= gamma;
        }
    }
    for t in 0..horizon.saturating_sub(offset) {
        total += discount * leave_stream_reward(t, patch_steps, tau, &rewards);
        discount *= gamma;
    }
    total
}

/// Reward level at which staying one more step and leaving are worth the
/// same, for future residence `patch_steps`.
///
/// For `gamma < 1` this is `V_leave(H) - gamma * V_leave(H - 1)`, so that
/// staying at depletion `m` wins exactly when `r(m)` exceeds it. With
/// `gamma = 1` a finite-horizon comparison only sees the single reward that
/// falls off the end of the horizon, so the undiscounted limit of the same
/// quantity is used instead: the cycle's average rate `G(P) / (P + tau)`.
pub fn leave_value_margin(
    patch_steps: u32,
    tau: u32,
    gamma: f64,
    horizon: u32,
    schedule: &PatchSchedule,
) -> f64 {
    if gamma >= 1.0 {
        return average_rate(patch_steps, tau, schedule);
    }
    if horizon == 0 {
        return 0.0;
    }
    let rewards: Vec<f64> = (0..patch_steps).map(|n| schedule.reward(n)).collect();
    let mut full = 0.0;
    let mut shorter = 0.0;
    let mut discount = 1.0;
    for t in 0..horizon {
        let term = discount * leave_stream_reward(t, patch_steps, tau, &rewards);
        full += term;
        if t + 1 < horizon {
            shorter += term;
        }
        discount *= gamma;
    }
    full - gamma * shorter
}

/// Smallest depletion `m` at which leaving is at least as good as staying
/// one more step, or `None` when staying always wins (every representable
/// reward beats the margin).
pub fn indifference_step(
    patch_steps: u32,
    tau: u32,
    gamma: f64,
    horizon: u32,
    schedule: &PatchSchedule,
) -> Option<u32> {
    let margin = leave_value_margin(patch_steps, tau, gamma, horizon, schedule);
    first_step_at_or_below(margin, schedule)
}

/// Smallest `m` with `0 < r(m) <= level`.
fn first_step_at_or_below(level: f64, schedule: &PatchSchedule) -> Option<u32> {
    if !(level > 0.0) {
        return None;
    }
    if schedule.reward(0) <= level {
        return Some(0);
    }
    // r is strictly decreasing, so a monotone search from an analytic guess
    // gives the same answer as scanning up from zero
    let guess = ((schedule.n0 / level).ln() / schedule.lambda).floor();
    let mut m = if guess.is_finite() && guess < 4.0e9 {
        guess as u32
    } else {
        return None;
    };
    m = m.saturating_sub(2);
    while m > 0 && schedule.reward(m - 1) <= level {
        m -= 1;
    }
    while schedule.reward(m) > level {
        m += 1;
    }
    if schedule.reward(m) > 0.0 {
        Some(m)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountedMvtSolution {
    pub gamma: f64,
    pub travel_steps: u32,
    pub horizon: u32,
    pub leave_step: u32,
    /// `(P, m*(P))` for every swept `P`; `None` means "never leave".
    pub indifference_curve: Vec<(u32, Option<u32>)>,
}

/// Discounted MVT leave step: the `P` at which the indifference step `m*(P)`
/// meets the unity line `m* = P`.
///
/// The sweep finds the first sign change of `m*(P) - P` from positive to
/// non-positive and interpolates linearly between the bracketing integers,
/// rounding to the nearest step.
pub fn discounted_mvt_leave_step(
    tau: u32,
    gamma: f64,
    horizon: u32,
    schedule: &PatchSchedule,
    p_max: u32,
) -> Result<DiscountedMvtSolution, OptimalError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(OptimalError::Domain(format!(
            "gamma must lie in (0, 1], got {gamma}"
        )));
    }
    let p_max = p_max.max(1);
    let curve: Vec<(u32, Option<u32>)> = (1..=p_max)
        .map(|p| (p, indifference_step(p, tau, gamma, horizon, schedule)))
        .collect();
    // "never leave" behaves as +infinity
    let gap = |m: Option<u32>, p: u32| m.map_or(f64::INFINITY, |m| f64::from(m) - f64::from(p));

    let mut leave_step = None;
    if gap(curve[0].1, 1) <= 0.0 {
        leave_step = Some(1);
    } else {
        for w in curve.windows(2) {
            let (p0, f0) = (w[0].0, gap(w[0].1, w[0].0));
            let (p1, f1) = (w[1].0, gap(w[1].1, w[1].0));
            if f0 > 0.0 && f1 <= 0.0 {
                let x = if f0.is_finite() {
                    f64::from(p0) + f0 / (f0 - f1) * f64::from(p1 - p0)
                } else {
                    f64::from(p1)
                };
                leave_step = Some(x.round() as u32);
                break;
            }
        }
    }
    match leave_step {
        Some(leave_step) => Ok(DiscountedMvtSolution {
            gamma,
            travel_steps: tau,
            horizon,
            leave_step,
            indifference_curve: curve,
        }),
        None => Err(OptimalError::NoFixedPoint { tau, gamma, p_max }),
    }
}
