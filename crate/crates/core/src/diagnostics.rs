//! Per-round instrumentation of the regret analysis.
//!
//! Everything here is a pure function of the run's state and the oracle:
//! concentration events for `μ̂` and `μ̃`, saturated arms, the process
//! `X_t = regret′(t) − (3g_t/p)s_{a(t)}(t) − 2g_t/(p t²)` and its running sum
//! `Y_t`, the `Σ s` cap, the eigenvalue relation behind it, and the explicit
//! high-probability envelope on `R(T)`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{oracle, ContextSet, LinearEnvironment, OracleView};
use crate::error::{check_dim, LabError, Result};
use crate::linalg::{anti_concentration_constant, dot, SymMatrix};
use crate::policy::{log_floor, v_schedule, Choice, PosteriorState, SamplerConfig};

/// `ℓ_t`, `v_t`, `g_t` and `p` at one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConstants {
    pub ell: f64,
    pub v: f64,
    /// `min{√(4d ln t), √(4 ln(Nt))}`; the second branch only for finite `N`.
    pub dev_factor: f64,
    pub g: f64,
    pub p: f64,
}

pub fn analysis_constants(cfg: &SamplerConfig, t: u64, arms: Option<usize>) -> AnalysisConstants {
    let t = t.max(1);
    let tf = t as f64;
    let d = cfg.dim as f64;
    let ell = cfg
        .overrides
        .ell
        .unwrap_or_else(|| cfg.r * (d * log_floor(tf.powi(3) / cfg.delta)).sqrt() + 1.0);
    let v = v_schedule(cfg, t);
    let by_dim = (4.0 * d * log_floor(tf)).sqrt();
    let dev_factor = match arms {
        Some(n) => by_dim.min((4.0 * log_floor(n as f64 * tf)).sqrt()),
        None => by_dim,
    };
    let g = cfg.overrides.g.unwrap_or(dev_factor * v + ell);
    let p = cfg.overrides.p.unwrap_or_else(anti_concentration_constant);
    AnalysisConstants {
        ell,
        v,
        dev_factor,
        g,
        p,
    }
}

/// Gap-based and realized regret of one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretStep {
    pub gap: f64,
    pub realized: f64,
    /// Reward attributed to the optimal arm this round.
    pub optimal_reward: f64,
}

/// Regret of playing `chosen`. `observed` is the reward actually drawn for
/// `chosen`. One counterfactual noise draw is taken from `counterfactual`
/// every round (keeping that stream aligned with the round index); it is used
/// for the optimal arm's reward unless the optimal arm was the one played.
pub fn regret_step<R: Rng + ?Sized>(
    contexts: &ContextSet,
    chosen: &Choice,
    env: &LinearEnvironment,
    observed: f64,
    counterfactual: &mut R,
) -> Result<RegretStep> {
    let mu = env.mu_star();
    let eta = env.noise().sample(counterfactual);
    let (gap, best_mean, played_optimal) = match (oracle(contexts, mu)?, chosen, contexts) {
        (OracleView::Finite { best, gaps }, Choice::Arm(i), ContextSet::FiniteSlate(s)) => {
            let gi = *gaps
                .get(*i)
                .ok_or_else(|| LabError::Data(format!("arm {i} not in slate")))?;
            (gi, dot(&s[best], mu), gi == 0.0)
        }
        (OracleView::Ball { best, optimum }, Choice::Point(b), ContextSet::UnitBall { .. }) => {
            (OracleView::ball_gap(optimum, b, mu), optimum, *b == best)
        }
        _ => return Err(LabError::Data("choice does not match the context set".into())),
    };
    let optimal_reward = if played_optimal { observed } else { best_mean + eta };
    Ok(RegretStep {
        gap,
        realized: optimal_reward - observed,
        optimal_reward,
    })
}

/// Outcome of an event check with per-arm slack (`≥ 0` where the inequality holds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCheck {
    pub holds: bool,
    pub margins: Vec<f64>,
}

impl EventCheck {
    fn from_margins(margins: Vec<f64>) -> Self {
        EventCheck {
            holds: margins.iter().all(|m| *m >= 0.0),
            margins,
        }
    }
}

/// `‖x‖_B = √(xᵀ B x)`.
fn design_norm(design: &SymMatrix, x: &[f64]) -> Result<f64> {
    Ok(design.quad_form(x)?.max(0.0).sqrt())
}

/// `E^μ(t)`: `|b_iᵀμ̂ − b_iᵀμ| ≤ ℓ_t s_i` for every arm.
///
/// On the unit ball the supremum over all contexts of `|bᵀ(μ̂−μ)| / s(b)` is
/// `‖μ̂ − μ‖_B`, so the event reduces to `‖μ̂ − μ‖_B ≤ ℓ_t`.
pub fn check_event_mu(
    state: &PosteriorState,
    contexts: &ContextSet,
    mu_star: &[f64],
    ell: f64,
) -> Result<EventCheck> {
    check_dim(state.dim(), mu_star.len())?;
    let err: Vec<f64> = state.mu_hat().iter().zip(mu_star).map(|(a, b)| a - b).collect();
    match contexts {
        ContextSet::FiniteSlate(slate) => {
            let mut margins = Vec::with_capacity(slate.len());
            for b in slate {
                margins.push(ell * state.width(b)? - dot(b, &err).abs());
            }
            Ok(EventCheck::from_margins(margins))
        }
        ContextSet::UnitBall { .. } => Ok(EventCheck::from_margins(vec![
            ell - design_norm(state.design(), &err)?,
        ])),
    }
}

/// `E^θ(t)`: `|θ_i − b_iᵀμ̂| ≤ dev_factor · v_t · s_i` for every arm, with
/// `θ_i = b_iᵀμ̃` from the round's own sample.
pub fn check_event_theta(
    contexts: &ContextSet,
    mu_tilde: &[f64],
    state: &PosteriorState,
    constants: &AnalysisConstants,
) -> Result<EventCheck> {
    check_dim(state.dim(), mu_tilde.len())?;
    let radius = constants.dev_factor * constants.v;
    let dev: Vec<f64> = mu_tilde.iter().zip(state.mu_hat()).map(|(a, b)| a - b).collect();
    match contexts {
        ContextSet::FiniteSlate(slate) => {
            let mut margins = Vec::with_capacity(slate.len());
            for b in slate {
                margins.push(radius * state.width(b)? - dot(b, &dev).abs());
            }
            Ok(EventCheck::from_margins(margins))
        }
        ContextSet::UnitBall { .. } => Ok(EventCheck::from_margins(vec![
            radius - design_norm(state.design(), &dev)?,
        ])),
    }
}

/// `C(t) = {i : Δ_i > g_t s_i}`.
pub fn saturated_set(gaps: &[f64], widths: &[f64], g: f64) -> Vec<usize> {
    gaps.iter()
        .zip(widths)
        .enumerate()
        .filter(|(_, (gap, w))| **gap > g * **w)
        .map(|(i, _)| i)
        .collect()
}

/// One increment of the super-martingale and its running sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleStep {
    /// `regret(t) · 1{E^μ(t)}`.
    pub regret_prime: f64,
    pub x: f64,
    pub y: f64,
    /// `6 g_t / p`, the a-priori bound on `|X_t|`.
    pub cap: f64,
}

pub fn martingale_step(
    gap_regret: f64,
    e_mu: bool,
    s_chosen: f64,
    constants: &AnalysisConstants,
    t: u64,
    y_prev: f64,
) -> MartingaleStep {
    let AnalysisConstants { g, p, .. } = *constants;
    let tf = t as f64;
    let regret_prime = if e_mu { gap_regret } else { 0.0 };
    let x = regret_prime - (3.0 * g / p) * s_chosen - 2.0 * g / (p * tf * tf);
    MartingaleStep {
        regret_prime,
        x,
        y: y_prev + x,
        cap: 6.0 * g / p,
    }
}

/// `10 Σ_j (λ'_j − λ_j)/λ_j` for spectra sorted the same way.
pub fn eigen_growth(before: &[f64], after: &[f64]) -> f64 {
    10.0 * before
        .iter()
        .zip(after)
        .map(|(l, lp)| (lp - l) / l)
        .sum::<f64>()
}

/// `5 √(d T ln T)`.
pub fn s_sum_cap(dim: usize, horizon: u64) -> f64 {
    let tf = horizon as f64;
    5.0 * (dim as f64 * tf * log_floor(tf)).sqrt()
}

/// Explicit envelope
/// `(3g_T/p)·5√(dT ln T) + (2g_T/p)·π²/6 + (6g_T/p)·√(2T ln(2/δ))`.
pub fn theorem_bound(cfg: &SamplerConfig, horizon: u64, arms: Option<usize>) -> f64 {
    let c = analysis_constants(cfg, horizon, arms);
    let ratio = c.g / c.p;
    let tf = horizon as f64;
    3.0 * ratio * s_sum_cap(cfg.dim, horizon)
        + 2.0 * ratio * PI * PI / 6.0
        + 6.0 * ratio * (2.0 * tf * log_floor(2.0 / cfg.delta)).sqrt()
}

/// Per-round record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub t: u64,
    /// Played arm index; `None` on the unit ball.
    pub arm: Option<usize>,
    pub opt_arm: Option<usize>,
    pub gap_regret: f64,
    pub realized_regret: f64,
    pub cum_regret: f64,
    pub s_chosen: f64,
    pub e_mu: bool,
    pub e_theta: bool,
    /// Whether the played arm was in `C(t)`.
    pub saturated_played: bool,
    pub x_t: f64,
    pub y_t: f64,
    /// `g_t`; `NaN` when loaded from CSV.
    pub g_t: f64,
    /// `6g_t/p`; `NaN` when loaded from CSV.
    pub x_cap: f64,
    /// `10 Σ (λ_{j,t+1} − λ_{j,t})/λ_{j,t} − s²_{a(t)}(t)`.
    pub eigen_slack: Option<f64>,
    /// Whether `a*(t) ∈ C(t)` (must never happen).
    pub optimal_saturated: bool,
    /// `θ_i(t)`, kept every `thin` rounds.
    pub scores: Option<Vec<f64>>,
    /// `s_i(t)`, kept every `thin` rounds.
    pub widths: Option<Vec<f64>>,
    /// `C(t)`, kept every `thin` rounds.
    pub saturated: Option<Vec<usize>>,
}

/// Regret and `Σ s` summary of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub s_sum: f64,
    pub s_sum_cap: f64,
    pub theorem_envelope: f64,
    pub cumulative_regret: f64,
}

/// `Σ_t s_{a(t)}(t)` against its cap. Requires `T ≥ 1`.
pub fn s_sum_bound_check(trace: &[StepTrace], dim: usize) -> (f64, f64) {
    let s_sum: f64 = trace.iter().map(|r| r.s_chosen).sum();
    (s_sum, s_sum_cap(dim, trace.len() as u64))
}

/// Hard invariants of a single run. Returns human-readable violations.
///
/// `telescoping_tol` is relative to `Σ|X_w|`; pass `0.0` for in-memory traces,
/// where `Y_t` must equal the running sum bit for bit. Checks that need `g_t`
/// (the `|X_t|` cap) or the spectra are skipped for rows loaded from CSV,
/// where those fields are absent.
pub fn check_invariants(trace: &[StepTrace], dim: usize, telescoping_tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    let mut y = 0.0;
    let mut x_abs = 0.0;
    let mut cum = 0.0;
    for (k, r) in trace.iter().enumerate() {
        let t = k as u64 + 1;
        if r.t != t {
            out.push(format!("row {k}: round index {} != {t}", r.t));
        }
        if !(r.gap_regret >= 0.0) {
            out.push(format!("t={t}: negative gap regret {}", r.gap_regret));
        }
        if r.arm.is_some() && r.arm == r.opt_arm && r.gap_regret != 0.0 {
            out.push(format!("t={t}: optimal arm played with non-zero regret"));
        }
        y += r.x_t;
        x_abs += r.x_t.abs();
        if (y - r.y_t).abs() > telescoping_tol * x_abs {
            out.push(format!("t={t}: Y_t = {} but Σ X = {y}", r.y_t));
        }
        cum += r.gap_regret;
        if (cum - r.cum_regret).abs() > 1e-9 * cum.max(1.0) {
            out.push(format!("t={t}: cum_regret {} != prefix sum {cum}", r.cum_regret));
        }
        if !r.x_cap.is_nan() && !(r.x_t.abs() <= r.x_cap) {
            out.push(format!("t={t}: |X_t| = {} > 6g/p = {}", r.x_t.abs(), r.x_cap));
        }
        if r.optimal_saturated {
            out.push(format!("t={t}: optimal arm is saturated"));
        }
        if let Some(slack) = r.eigen_slack {
            if !(slack >= 0.0) {
                out.push(format!("t={t}: eigenvalue growth relation violated by {slack:e}"));
            }
        }
    }
    if !trace.is_empty() && trace.iter().all(|r| !r.x_cap.is_nan()) {
        let (s_sum, cap) = s_sum_bound_check(trace, dim);
        if !(s_sum <= cap) {
            out.push(format!("Σ s = {s_sum} exceeds 5√(dT ln T) = {cap}"));
        }
    }
    out
}

/// One line of an audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub round: Option<u64>,
    pub observed: f64,
    pub bound: f64,
    pub std_error: f64,
    /// Number of samples behind `observed`.
    pub samples: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub replications: usize,
    pub delta: f64,
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Rounds at which an audit samples its per-round statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditPlan {
    pub delta: f64,
    pub p: f64,
    pub event_rounds: Vec<u64>,
    pub drift_rounds: Vec<u64>,
}

pub const MIN_AUDIT_REPLICATIONS: usize = 200;
const SIGMAS: f64 = 3.0;

fn binomial_se(q: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (q * (1.0 - q) / n as f64).sqrt()
    }
}

/// Monte-Carlo audit of the event probabilities, the unsaturated-play floor
/// and the martingale drift over replicated traces.
pub fn event_probability_audit(traces: &[Vec<StepTrace>], plan: &AuditPlan) -> Result<AuditReport> {
    let n = traces.len();
    if n < MIN_AUDIT_REPLICATIONS {
        return Err(LabError::Config(format!(
            "audit needs at least {MIN_AUDIT_REPLICATIONS} replications, got {n}"
        )));
    }
    let horizon = traces.iter().map(Vec::len).min().unwrap_or(0) as u64;
    let mut checks = Vec::new();

    let ever_failed = traces.iter().filter(|tr| tr.iter().any(|r| !r.e_mu)).count();
    let q = ever_failed as f64 / n as f64;
    let bound = (plan.delta * PI * PI / 6.0).min(1.0);
    let se = binomial_se(q, n);
    checks.push(AuditCheck {
        name: "e_mu_ever_fails".into(),
        round: None,
        observed: q,
        bound,
        std_error: se,
        samples: n,
        passed: q <= bound + SIGMAS * se,
    });

    let at = |tr: &Vec<StepTrace>, t: u64| tr.get(t as usize - 1).cloned();
    for &t in plan.event_rounds.iter().filter(|&&t| t >= 1 && t <= horizon) {
        let tf = t as f64;
        let rows: Vec<StepTrace> = traces.iter().filter_map(|tr| at(tr, t)).collect();
        let fails = rows.iter().filter(|r| !r.e_theta).count();
        let q = fails as f64 / rows.len() as f64;
        let se = binomial_se(q, rows.len());
        let bound = 1.0 / (tf * tf);
        checks.push(AuditCheck {
            name: "e_theta_fails".into(),
            round: Some(t),
            observed: q,
            bound,
            std_error: se,
            samples: rows.len(),
            passed: q <= bound + SIGMAS * se,
        });

        let cond: Vec<&StepTrace> = rows.iter().filter(|r| r.e_mu).collect();
        let unsat = cond.iter().filter(|r| !r.saturated_played).count();
        let q = if cond.is_empty() { 1.0 } else { unsat as f64 / cond.len() as f64 };
        let se = binomial_se(q, cond.len());
        let floor = plan.p - 1.0 / (tf * tf);
        checks.push(AuditCheck {
            name: "unsaturated_play_given_e_mu".into(),
            round: Some(t),
            observed: q,
            bound: floor,
            std_error: se,
            samples: cond.len(),
            passed: q >= floor - SIGMAS * se,
        });
    }

    for &t in plan.drift_rounds.iter().filter(|&&t| t >= 1 && t <= horizon) {
        let xs: Vec<f64> = traces.iter().filter_map(|tr| at(tr, t)).map(|r| r.x_t).collect();
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0)).sqrt();
        let se = sd / m.sqrt();
        checks.push(AuditCheck {
            name: "martingale_mean_drift".into(),
            round: Some(t),
            observed: mean,
            bound: 0.0,
            std_error: se,
            samples: xs.len(),
            passed: mean <= SIGMAS * se,
        });
    }

    Ok(AuditReport {
        replications: n,
        delta: plan.delta,
        checks,
    })
}
