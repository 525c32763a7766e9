//! Seeded experiment execution: the round loop, replication and scaling
//! studies.
//!
//! Parallelism is across replications only. Each replication owns its
//! streams (see [`crate::rng`]), so worker count and batch composition never
//! change a result.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::{ExperimentConfig, VModeSetting};
use crate::diagnostics::{
    analysis_constants, check_event_mu, check_event_theta, check_invariants, eigen_growth,
    event_probability_audit, martingale_step, regret_step, s_sum_bound_check, saturated_set,
    theorem_bound, AuditPlan, AuditReport, BoundReport, StepTrace,
};
use crate::environment::{
    draw_reward, generate_contexts, oracle, random_parameter, AdversaryView, ContextSet,
    LinearEnvironment, OracleView, PlayedRound,
};
use crate::error::Result;
use crate::linalg::eigen_spectrum;
use crate::policy::{init_state, Choice};
use crate::rng::RunStreams;

/// Outcome of one replication.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub config_digest: String,
    pub seed: u64,
    pub replication: u64,
    pub mu_star: Vec<f64>,
    pub trace: Vec<StepTrace>,
    pub bounds: BoundReport,
    /// Hard-invariant violations; empty for a healthy run.
    pub invariant_violations: Vec<String>,
    #[serde(skip)]
    pub wall_clock: Duration,
}

/// Runs replication 0.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    run_replication(cfg, 0)
}

/// Runs one replication with streams split from `(cfg.seed, replication)`.
pub fn run_replication(cfg: &ExperimentConfig, replication: u64) -> Result<RunResult> {
    run_replication_with_digest(cfg, replication, cfg.digest())
}

fn run_replication_with_digest(
    cfg: &ExperimentConfig,
    replication: u64,
    config_digest: String,
) -> Result<RunResult> {
    cfg.validate()?;
    let started = Instant::now();
    let sampler = cfg.sampler()?;
    let adversary = cfg.adversary_kind()?;
    let arms = adversary.arms();
    let mut streams = RunStreams::new(cfg.seed, replication);
    let mu_star = match cfg.fixed_mu_star()? {
        Some(mu) => mu,
        None => random_parameter(cfg.dim, cfg.instance.mu_norm, &mut streams.instance),
    };
    let env = LinearEnvironment::new(mu_star, cfg.noise, cfg.assert_unit_gaps)?;

    let mut state = init_state(cfg.dim)?;
    let mut spectrum = eigen_spectrum(state.design())?;
    let mut history: Vec<PlayedRound> = Vec::with_capacity(cfg.horizon as usize);
    let mut trace: Vec<StepTrace> = Vec::with_capacity(cfg.horizon as usize);
    let (mut y, mut cum) = (0.0, 0.0);

    for t in 1..=cfg.horizon {
        let view = AdversaryView {
            round: t,
            history: &history,
            design: state.design(),
        };
        let contexts = generate_contexts(&adversary, view, &mut streams.contexts)?;
        let consts = analysis_constants(&sampler, t, arms);
        let decision = cfg.policy.decide(
            &sampler,
            &state,
            &contexts,
            &mut streams.sampling,
            &mut streams.policy,
        )?;

        let played: Vec<f64> = match (&decision.choice, &contexts) {
            (Choice::Arm(i), ContextSet::FiniteSlate(s)) => s[*i].clone(),
            (Choice::Point(b), _) => b.clone(),
            _ => unreachable!("policies return indices for slates"),
        };
        let reward = draw_reward(&played, &env, &mut streams.noise);
        let regret = regret_step(
            &contexts,
            &decision.choice,
            &env,
            reward,
            &mut streams.counterfactual,
        )?;

        let e_mu = check_event_mu(&state, &contexts, env.mu_star(), consts.ell)?;
        let e_theta = check_event_theta(&contexts, &decision.mu_tilde, &state, &consts)?;
        let s_chosen = state.width(&played)?;

        let (arm, opt_arm, saturated_played, optimal_saturated, scores, widths, saturated) =
            match (oracle(&contexts, env.mu_star())?, &contexts, &decision.choice) {
                (OracleView::Finite { best, gaps }, ContextSet::FiniteSlate(slate), Choice::Arm(i)) => {
                    env.check_gaps(&gaps)?;
                    let widths = slate
                        .iter()
                        .map(|b| state.width(b))
                        .collect::<Result<Vec<_>>>()?;
                    let sat = saturated_set(&gaps, &widths, consts.g);
                    let scores = slate
                        .iter()
                        .map(|b| crate::linalg::dot(b, &decision.mu_tilde))
                        .collect();
                    (
                        Some(*i),
                        Some(best),
                        sat.contains(i),
                        sat.contains(&best),
                        Some(scores),
                        Some(widths),
                        Some(sat),
                    )
                }
                (OracleView::Ball { best, .. }, _, _) => {
                    env.check_gaps(&[regret.gap])?;
                    let s_best = state.width(&best)?;
                    (None, None, regret.gap > consts.g * s_chosen, 0.0 > consts.g * s_best, None, None, None)
                }
                _ => unreachable!("oracle matches the context set"),
            };

        cum += regret.gap;
        let mart = martingale_step(regret.gap, e_mu.holds, s_chosen, &consts, t, y);
        y = mart.y;

        state.update(&played, reward)?;
        let next_spectrum = eigen_spectrum(state.design())?;
        let eigen_slack = eigen_growth(&spectrum, &next_spectrum) - s_chosen * s_chosen;
        spectrum = next_spectrum;
        history.push(PlayedRound {
            context: played,
            reward,
        });

        let keep = (t - 1) % cfg.output.thin == 0;
        trace.push(StepTrace {
            t,
            arm,
            opt_arm,
            gap_regret: regret.gap,
            realized_regret: regret.realized,
            cum_regret: cum,
            s_chosen,
            e_mu: e_mu.holds,
            e_theta: e_theta.holds,
            saturated_played,
            x_t: mart.x,
            y_t: mart.y,
            g_t: consts.g,
            x_cap: mart.cap,
            eigen_slack: Some(eigen_slack),
            optimal_saturated,
            scores: if keep { scores } else { None },
            widths: if keep { widths } else { None },
            saturated: if keep { saturated } else { None },
        });
    }

    let (s_sum, s_sum_cap) = s_sum_bound_check(&trace, cfg.dim);
    let bounds = BoundReport {
        s_sum,
        s_sum_cap,
        theorem_envelope: theorem_bound(&sampler, cfg.horizon, arms),
        cumulative_regret: cum,
    };
    let invariant_violations = check_invariants(&trace, cfg.dim, 0.0);
    Ok(RunResult {
        config_digest,
        seed: cfg.seed,
        replication,
        mu_star: env.mu_star().to_vec(),
        trace,
        bounds,
        invariant_violations,
        wall_clock: started.elapsed(),
    })
}

/// Runs replications `0..k` in parallel; results are in replication order.
pub fn replicate(cfg: &ExperimentConfig, k: usize) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    let digest = cfg.digest();
    (0..k as u64)
        .into_par_iter()
        .map(|r| run_replication_with_digest(cfg, r, digest.clone()))
        .collect()
}

/// Audit plan built from the manifest's `[audit]` table.
pub fn audit_plan(cfg: &ExperimentConfig) -> Result<AuditPlan> {
    let sampler = cfg.sampler()?;
    let p = analysis_constants(&sampler, 1, None).p;
    Ok(AuditPlan {
        delta: cfg.delta,
        p,
        event_rounds: cfg.audit.event_rounds.clone(),
        drift_rounds: cfg.audit.drift_rounds.clone(),
    })
}

/// Runs the event-probability audit over replicated results.
pub fn audit_results(cfg: &ExperimentConfig, results: &[RunResult]) -> Result<AuditReport> {
    let traces: Vec<Vec<StepTrace>> = results.iter().map(|r| r.trace.clone()).collect();
    event_probability_audit(&traces, &audit_plan(cfg)?)
}

/// Mean cumulative regret and spread at one `(d, T)` grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCell {
    pub dim: usize,
    pub horizon: u64,
    pub replications: usize,
    pub mean_regret: f64,
    pub median_regret: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub theorem_bound: f64,
    /// Fraction of replications with `R(T)` at or below the envelope.
    pub within_bound: f64,
}

/// Log-log least-squares fit `R(t) ≈ c t^β` with a 95% interval on `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub dim: usize,
    pub beta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub intercept: f64,
    /// Rounds used in the fit.
    pub rounds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub cells: Vec<ScalingCell>,
    pub fits: Vec<ExponentFit>,
    /// Hard-invariant violations from every underlying run, tagged with
    /// `(d, T, replication)`.
    #[serde(default)]
    pub invariant_violations: Vec<String>,
}

impl ScalingReport {
    pub fn cell(&self, dim: usize, horizon: u64) -> Option<&ScalingCell> {
        self.cells
            .iter()
            .find(|c| c.dim == dim && c.horizon == horizon)
    }

    pub fn fit(&self, dim: usize) -> Option<&ExponentFit> {
        self.fits.iter().find(|f| f.dim == dim)
    }
}

/// Checkpoints used for the exponent fit, log-spaced over the upper half of
/// the horizon.
const FIT_POINTS: usize = 32;

fn fit_rounds(horizon: u64) -> Vec<u64> {
    let lo = (horizon / 2).max(1) as f64;
    let hi = horizon as f64;
    let mut out: Vec<u64> = (0..FIT_POINTS)
        .map(|k| {
            let frac = k as f64 / (FIT_POINTS - 1) as f64;
            (lo * (hi / lo).powf(frac)).round() as u64
        })
        .collect();
    out.dedup();
    out
}

/// Ordinary least squares of `ln y` on `ln x`, with a Student-t interval.
pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let half_width = if n > 2 {
        let rss: f64 = pts
            .iter()
            .map(|p| (p.1 - intercept - beta * p.0).powi(2))
            .sum();
        let se = (rss / (nf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::INFINITY);
        t * se
    } else {
        f64::INFINITY
    };
    Some((beta, intercept, half_width))
}

struct RunSummary {
    /// Cumulative regret at each requested round.
    at: Vec<f64>,
    violations: Vec<String>,
}

fn summarize(res: &RunResult, rounds: &[u64]) -> RunSummary {
    let tag = format!("d={} T={} rep={}", res.mu_star.len(), res.trace.len(), res.replication);
    RunSummary {
        at: rounds
            .iter()
            .map(|&t| res.trace[t as usize - 1].cum_regret)
            .collect(),
        violations: res
            .invariant_violations
            .iter()
            .map(|v| format!("{tag}: {v}"))
            .collect(),
    }
}

fn moments(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    (mean, median, sd, sd / n.sqrt())
}

/// Runs `k` replications per `(d, T)` cell and fits the growth exponent of
/// mean regret for each `d`.
///
/// Under the anytime schedule a run's first `T` rounds do not depend on the
/// final horizon, so each `(d, replication)` is run once to the largest `T`
/// and every smaller cell reads its prefix.
pub fn scaling_study(
    base: &ExperimentConfig,
    dims: &[usize],
    horizons: &[u64],
    k: usize,
) -> Result<ScalingReport> {
    if dims.is_empty() || horizons.is_empty() || k < 1 {
        return Err(crate::error::LabError::Config(
            "scaling study needs non-empty grids and k >= 1".into(),
        ));
    }
    let mut horizons = horizons.to_vec();
    horizons.sort_unstable();
    horizons.dedup();
    let t_max = *horizons.last().expect("non-empty");

    let mut cells = Vec::new();
    let mut fits = Vec::new();
    let mut invariant_violations = Vec::new();
    for &dim in dims {
        let mut cfg = base.clone();
        cfg.dim = dim;
        cfg.output.thin = u64::MAX;
        if let Some(mu) = &cfg.instance.mu_star {
            if mu.len() != dim {
                cfg.instance.mu_star = None;
            }
        }
        let fit_at = fit_rounds(t_max);
        let mut probe: Vec<u64> = horizons.clone();
        probe.extend(&fit_at);

        // runs[h][r]: cumulative regret at probe rounds for horizon cell h.
        let per_horizon: Vec<Vec<RunSummary>> = match cfg.v_mode {
            VModeSetting::Anytime => {
                let mut c = cfg.clone();
                c.horizon = t_max;
                c.validate()?;
                let digest = c.digest();
                let runs = (0..k as u64)
                    .into_par_iter()
                    .map(|r| {
                        run_replication_with_digest(&c, r, digest.clone())
                            .map(|res| summarize(&res, &probe))
                    })
                    .collect::<Result<Vec<_>>>()?;
                vec![runs]
            }
            VModeSetting::FixedHorizon => horizons
                .iter()
                .map(|&h| {
                    let mut c = cfg.clone();
                    c.horizon = h;
                    c.validate()?;
                    let digest = c.digest();
                    let rounds: Vec<u64> = probe.iter().map(|&t| t.min(h)).collect();
                    (0..k as u64)
                        .into_par_iter()
                        .map(|r| {
                            run_replication_with_digest(&c, r, digest.clone())
                                .map(|res| summarize(&res, &rounds))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?,
        };

        let sampler = cfg.sampler()?;
        let arms = cfg.adversary_kind()?.arms();
        for (h_idx, &h) in horizons.iter().enumerate() {
            let runs = if per_horizon.len() == 1 {
                &per_horizon[0]
            } else {
                &per_horizon[h_idx]
            };
            let values: Vec<f64> = runs.iter().map(|s| s.at[h_idx]).collect();
            let (mean, median, sd, se) = moments(&values);
            let mut sampler_h = sampler;
            if let crate::policy::VMode::FixedHorizon { .. } = sampler_h.v_mode {
                sampler_h.v_mode = crate::policy::VMode::FixedHorizon { horizon: h };
            }
            let bound = theorem_bound(&sampler_h, h, arms);
            let within = values.iter().filter(|v| **v <= bound).count() as f64 / values.len() as f64;
            cells.push(ScalingCell {
                dim,
                horizon: h,
                replications: k,
                mean_regret: mean,
                median_regret: median,
                std_dev: sd,
                std_error: se,
                theorem_bound: bound,
                within_bound: within,
            });
        }

        invariant_violations.extend(
            per_horizon
                .iter()
                .flatten()
                .flat_map(|s| s.violations.iter().cloned()),
        );
        let longest = per_horizon.last().expect("non-empty");
        let offset = horizons.len();
        let means: Vec<f64> = (0..fit_at.len())
            .map(|j| longest.iter().map(|s| s.at[offset + j]).sum::<f64>() / k as f64)
            .collect();
        let xs: Vec<f64> = fit_at.iter().map(|&t| t as f64).collect();
        if let Some((beta, intercept, hw)) = fit_exponent(&xs, &means) {
            fits.push(ExponentFit {
                dim,
                beta,
                ci_low: beta - hw,
                ci_high: beta + hw,
                intercept,
                rounds: fit_at,
            });
        }
    }
    Ok(ScalingReport {
        cells,
        fits,
        invariant_violations,
    })
}
