//! Thompson Sampling with a Gaussian posterior over the linear parameter,
//! plus the LinUCB / greedy / uniform baselines.
//!
//! The posterior after `t − 1` rounds is `N(μ̂(t), v² B(t)⁻¹)` with
//! `B(t) = I + Σ b bᵀ` and `μ̂(t) = B(t)⁻¹ Σ b r`. [`PosteriorState`] keeps
//! `B`, `B⁻¹` and the Cholesky factor of `B` in sync with O(d²) work per round.

use std::f64::consts::E;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, LabError, Result};
use crate::linalg::{
    self, cholesky, dot, mahalanobis_width, norm, sample_mvn, CholeskyFactor, SymMatrix,
};

/// Full refactorization cadence for the maintained inverse and factor.
pub const REFRESH_INTERVAL: u64 = 512;
/// Per-round drift probe threshold on one column of `B·B⁻¹ − I`.
pub const DRIFT_TOLERANCE: f64 = 1e-9;

/// `ln(max(x, e))`, so every logarithm in a schedule is at least 1.
pub fn log_floor(x: f64) -> f64 {
    x.max(E).ln()
}

/// How the posterior scale `v` evolves over rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum VMode {
    /// `v_t = R √(9 d ln(t/δ))`, no horizon needed.
    Anytime,
    /// `v = R √(9 d ln(T/δ))` for every round.
    FixedHorizon { horizon: u64 },
}

/// Optional replacements for the default analysis constants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    pub v: Option<f64>,
    pub ell: Option<f64>,
    pub g: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Sub-Gaussian scale `R` assumed by the sampler.
    pub r: f64,
    pub delta: f64,
    pub dim: usize,
    pub v_mode: VMode,
    #[serde(default)]
    pub overrides: ConstantOverrides,
}

impl SamplerConfig {
    pub fn new(r: f64, delta: f64, dim: usize, v_mode: VMode) -> Result<Self> {
        let cfg = SamplerConfig {
            r,
            delta,
            dim,
            v_mode,
            overrides: ConstantOverrides::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(LabError::Config(format!("R must be >= 0, got {}", self.r)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(LabError::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.dim < 1 {
            return Err(LabError::Config("dimension must be >= 1".into()));
        }
        if let VMode::FixedHorizon { horizon } = self.v_mode {
            if horizon < 1 {
                return Err(LabError::Config("fixed horizon must be >= 1".into()));
            }
        }
        let o = &self.overrides;
        for (name, v) in [("v", o.v), ("ell", o.ell), ("g", o.g)] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(LabError::Config(format!("override {name} must be >= 0")));
                }
            }
        }
        if let Some(p) = o.p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(LabError::Config("override p must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// Posterior scale for round `t`.
pub fn v_schedule(cfg: &SamplerConfig, t: u64) -> f64 {
    if let Some(v) = cfg.overrides.v {
        return v;
    }
    let clock = match cfg.v_mode {
        VMode::Anytime => t.max(1),
        VMode::FixedHorizon { horizon } => horizon,
    };
    cfg.r * (9.0 * cfg.dim as f64 * log_floor(clock as f64 / cfg.delta)).sqrt()
}

/// The arms offered in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ArmSet {
    /// `N` explicit context vectors.
    FiniteSlate(Vec<Vec<f64>>),
    /// Every vector in the closed unit ball of the given dimension.
    UnitBall { dim: usize },
}

impl ArmSet {
    /// Validates a slate: non-empty, consistent dimension. Norms above one are
    /// allowed but logged.
    pub fn finite(slate: Vec<Vec<f64>>) -> Result<Self> {
        let first = slate
            .first()
            .ok_or_else(|| LabError::Config("slate must contain at least one arm".into()))?;
        let d = first.len();
        if d == 0 {
            return Err(LabError::Config("context dimension must be >= 1".into()));
        }
        for b in &slate {
            check_dim(d, b.len())?;
            if b.iter().any(|x| !x.is_finite()) {
                return Err(LabError::Data("context has a non-finite entry".into()));
            }
            warn_if_long(b);
        }
        Ok(ArmSet::FiniteSlate(slate))
    }

    pub fn dim(&self) -> usize {
        match self {
            ArmSet::FiniteSlate(s) => s[0].len(),
            ArmSet::UnitBall { dim } => *dim,
        }
    }

    /// Number of arms, `None` for the continuous ball.
    pub fn len(&self) -> Option<usize> {
        match self {
            ArmSet::FiniteSlate(s) => Some(s.len()),
            ArmSet::UnitBall { .. } => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }
}

fn warn_if_long(b: &[f64]) {
    let n = norm(b);
    if n > 1.0 + 1e-12 {
        warn!("context norm {n:.6} exceeds 1; proceeding");
    }
}

/// Sufficient statistics of the Gaussian posterior.
#[derive(Debug, Clone)]
pub struct PosteriorState {
    design: SymMatrix,
    design_inv: SymMatrix,
    chol: CholeskyFactor,
    f: Vec<f64>,
    mu_hat: Vec<f64>,
    t: u64,
    since_refresh: u64,
}

/// Prior state at `t = 1`: `B = I`, `f = 0`, `μ̂ = 0`.
pub fn init_state(dim: usize) -> Result<PosteriorState> {
    if dim < 1 {
        return Err(LabError::Config("dimension must be >= 1".into()));
    }
    Ok(PosteriorState {
        design: SymMatrix::identity(dim),
        design_inv: SymMatrix::identity(dim),
        chol: CholeskyFactor::identity(dim),
        f: vec![0.0; dim],
        mu_hat: vec![0.0; dim],
        t: 1,
        since_refresh: 0,
    })
}

impl PosteriorState {
    pub fn dim(&self) -> usize {
        self.f.len()
    }

    /// Current round index (1 + number of updates applied).
    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn design(&self) -> &SymMatrix {
        &self.design
    }

    pub fn design_inv(&self) -> &SymMatrix {
        &self.design_inv
    }

    pub fn cholesky(&self) -> &CholeskyFactor {
        &self.chol
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn mu_hat(&self) -> &[f64] {
        &self.mu_hat
    }

    /// `s(b) = √(bᵀ B⁻¹ b)`.
    pub fn width(&self, b: &[f64]) -> Result<f64> {
        mahalanobis_width(b, &self.design_inv)
    }

    /// Incorporates the reward `r` observed for context `b`.
    pub fn update(&mut self, b: &[f64], r: f64) -> Result<()> {
        check_dim(self.dim(), b.len())?;
        if !r.is_finite() {
            return Err(LabError::Data(format!("reward must be finite, got {r}")));
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(LabError::Data("context has a non-finite entry".into()));
        }
        warn_if_long(b);

        self.design.add_outer(b)?;
        linalg::sherman_morrison_in_place(&mut self.design_inv, b)?;
        self.chol.rank_one_update(b)?;
        for (fi, bi) in self.f.iter_mut().zip(b) {
            *fi += bi * r;
        }
        self.t += 1;
        self.since_refresh += 1;

        let probe = (self.t as usize) % self.dim();
        if self.since_refresh >= REFRESH_INTERVAL
            || self.design.inverse_column_residual(&self.design_inv, probe) > DRIFT_TOLERANCE
        {
            self.refresh()?;
        }
        self.mu_hat = self.design_inv.mul_vec(&self.f)?;
        Ok(())
    }

    /// Rebuilds the factor and inverse from `B`.
    pub fn refresh(&mut self) -> Result<()> {
        self.chol = cholesky(&self.design)?;
        self.design_inv = self.chol.inverse();
        self.mu_hat = self.design_inv.mul_vec(&self.f)?;
        self.since_refresh = 0;
        Ok(())
    }
}

/// Returns the updated state; see [`PosteriorState::update`].
pub fn posterior_update(state: &PosteriorState, b: &[f64], r: f64) -> Result<PosteriorState> {
    let mut next = state.clone();
    next.update(b, r)?;
    Ok(next)
}

/// Draws `μ̃ ~ N(μ̂, v² B⁻¹)`.
pub fn sample_parameter<R: Rng + ?Sized>(
    state: &PosteriorState,
    v: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    sample_mvn(&state.mu_hat, v, &state.chol, rng)
}

/// Index of the largest score, lowest index on ties.
pub fn argmax(scores: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        match best {
            Some((_, b)) if !(s > b) => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

/// `argmax_i b_iᵀ μ̃`.
pub fn select_arm(slate: &[Vec<f64>], mu_tilde: &[f64]) -> usize {
    argmax(slate.iter().map(|b| dot(b, mu_tilde))).expect("slate is non-empty")
}

/// Maximizer of `bᵀ μ̃` over the unit ball: `μ̃/‖μ̃‖`, or `e₁` when `μ̃ = 0`.
pub fn select_continuous(dim: usize, mu_tilde: &[f64]) -> Result<Vec<f64>> {
    check_dim(dim, mu_tilde.len())?;
    let n = norm(mu_tilde);
    if n == 0.0 {
        let mut e1 = vec![0.0; dim];
        e1[0] = 1.0;
        return Ok(e1);
    }
    Ok(mu_tilde.iter().map(|x| x / n).collect())
}

/// `argmax_i b_iᵀ μ̂ + α s_i`.
pub fn lin_ucb_select(state: &PosteriorState, slate: &[Vec<f64>], alpha: f64) -> Result<usize> {
    let mut scores = Vec::with_capacity(slate.len());
    for b in slate {
        scores.push(dot(b, &state.mu_hat) + alpha * state.width(b)?);
    }
    argmax(scores).ok_or_else(|| LabError::Config("slate must be non-empty".into()))
}

pub fn uniform_select<R: Rng + ?Sized>(n: usize, rng: &mut R) -> usize {
    rng.gen_range(0..n)
}

/// Decision rule driving a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Policy {
    Thompson,
    #[serde(rename = "linucb")]
    LinUcb { alpha: f64 },
    /// Plays `argmax bᵀμ̂`; identical to LinUCB with `alpha = 0`.
    Greedy,
    Uniform,
}

/// What was played in a round.
#[derive(Debug, Clone, PartialEq)]
pub enum Choice {
    Arm(usize),
    Point(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct Decision {
    pub choice: Choice,
    /// Parameter whose scores `θ_i = b_iᵀμ̃` drove the choice; `μ̂` for the
    /// non-sampling baselines.
    pub mu_tilde: Vec<f64>,
    pub v: f64,
}

impl Policy {
    pub fn validate(&self) -> Result<()> {
        if let Policy::LinUcb { alpha } = self {
            if !(*alpha >= 0.0) || !alpha.is_finite() {
                return Err(LabError::Config(format!("alpha must be >= 0, got {alpha}")));
            }
        }
        Ok(())
    }

    pub fn supports_unit_ball(&self) -> bool {
        matches!(self, Policy::Thompson | Policy::Greedy)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Thompson => "thompson",
            Policy::LinUcb { .. } => "linucb",
            Policy::Greedy => "greedy",
            Policy::Uniform => "uniform",
        }
    }

    /// Runs one decision. `sampling` feeds the posterior draw, `tie_break`
    /// the uniform baseline.
    pub fn decide<R: Rng + ?Sized>(
        &self,
        cfg: &SamplerConfig,
        state: &PosteriorState,
        arms: &ArmSet,
        sampling: &mut R,
        tie_break: &mut R,
    ) -> Result<Decision> {
        check_dim(state.dim(), arms.dim())?;
        let v = v_schedule(cfg, state.round());
        let (mu_tilde, v) = match self {
            Policy::Thompson => (sample_parameter(state, v, sampling)?, v),
            _ => (state.mu_hat.clone(), 0.0),
        };
        let choice = match (self, arms) {
            (Policy::Thompson | Policy::Greedy, ArmSet::FiniteSlate(s)) => {
                Choice::Arm(select_arm(s, &mu_tilde))
            }
            (Policy::Thompson | Policy::Greedy, ArmSet::UnitBall { dim }) => {
                Choice::Point(select_continuous(*dim, &mu_tilde)?)
            }
            (Policy::LinUcb { alpha }, ArmSet::FiniteSlate(s)) => {
                Choice::Arm(lin_ucb_select(state, s, *alpha)?)
            }
            (Policy::Uniform, ArmSet::FiniteSlate(s)) => Choice::Arm(uniform_select(s.len(), tie_break)),
            (p, ArmSet::UnitBall { .. }) => {
                return Err(LabError::Config(format!(
                    "policy {} does not support the unit-ball arm set",
                    p.name()
                )))
            }
        };
        Ok(Decision { choice, mu_tilde, v })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;
    use rand::Rng;

    fn cfg(r: f64, d: usize, delta: f64, mode: VMode) -> SamplerConfig {
        SamplerConfig::new(r, delta, d, mode).unwrap()
    }

    #[test]
    fn init_state_is_prior() {
        let s = init_state(3).unwrap();
        assert_eq!(s.design(), &SymMatrix::identity(3));
        assert_eq!(s.mu_hat(), &[0.0; 3]);
        assert_eq!(s.round(), 1);
        let s1 = init_state(1).unwrap();
        assert_eq!(s1.design().get(0, 0), 1.0);
        assert_eq!(s1.mu_hat(), &[0.0]);
        let b = [0.3, -0.4, 0.5];
        assert!((s.width(&b).unwrap() - norm(&b)).abs() < 1e-15);
        assert!(matches!(init_state(0), Err(LabError::Config(_))));
    }

    #[test]
    fn v_schedule_examples() {
        let any = cfg(1.0, 2, 0.1, VMode::Anytime);
        assert!((v_schedule(&any, 10) - 9.104_562_776_310_878).abs() < 1e-12);
        assert_eq!(v_schedule(&cfg(0.0, 2, 0.1, VMode::Anytime), 10), 0.0);
        let fixed = cfg(1.0, 2, 0.1, VMode::FixedHorizon { horizon: 10 });
        for t in [1, 5, 10, 1000] {
            assert!((v_schedule(&fixed, t) - 9.104_562_776_310_878).abs() < 1e-12);
        }
        // log floor: t/δ ≤ e clamps to ln e = 1
        let tight = cfg(1.0, 1, 0.5, VMode::Anytime);
        assert_eq!(v_schedule(&tight, 1), 3.0);
        let mut prev = 0.0;
        for t in 1..200 {
            let v = v_schedule(&any, t);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::new(1.0, 0.0, 2, VMode::Anytime).is_err());
        assert!(SamplerConfig::new(1.0, 1.0, 2, VMode::Anytime).is_err());
        assert!(SamplerConfig::new(-1.0, 0.5, 2, VMode::Anytime).is_err());
        assert!(SamplerConfig::new(1.0, 0.5, 0, VMode::Anytime).is_err());
    }

    #[test]
    fn sample_parameter_zero_scale_is_mean() {
        let mut s = init_state(2).unwrap();
        s.update(&[0.6, 0.8], 0.7).unwrap();
        let mut rng = stream(3, 0, Purpose::Sampling);
        assert_eq!(sample_parameter(&s, 0.0, &mut rng).unwrap(), s.mu_hat());
    }

    #[test]
    fn sample_parameter_marginals_follow_posterior() {
        // After b = (1, 0): B⁻¹ = diag(1/2, 1), so marginal variances v²/2 and v².
        let mut s = init_state(2).unwrap();
        s.update(&[1.0, 0.0], 0.0).unwrap();
        let v = 1.5;
        let mut rng = stream(5, 0, Purpose::Sampling);
        let n = 100_000;
        let (mut a, mut b) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_parameter(&s, v, &mut rng).unwrap();
            a += x[0] * x[0];
            b += x[1] * x[1];
        }
        assert!((a / n as f64 - v * v / 2.0).abs() < 0.05 * v * v / 2.0);
        assert!((b / n as f64 - v * v).abs() < 0.05 * v * v);

        let fresh = init_state(3).unwrap();
        let mut c = vec![0.0; 9];
        for _ in 0..n {
            let x = sample_parameter(&fresh, 1.0, &mut rng).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    c[i * 3 + j] += x[i] * x[j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((c[i * 3 + j] / n as f64 - want).abs() < 0.05);
            }
        }
    }

    #[test]
    fn select_arm_examples() {
        let e = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(select_arm(&e, &[1.0, 0.0]), 0);
        assert_eq!(select_arm(&e, &[0.0, 0.0]), 0);
        let s3 = vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0]];
        assert_eq!(select_arm(&s3, &[0.3, 0.9]), 2);
    }

    #[test]
    fn select_continuous_examples() {
        let b = select_continuous(2, &[3.0, 4.0]).unwrap();
        assert!((b[0] - 0.6).abs() < 1e-15 && (b[1] - 0.8).abs() < 1e-15);
        assert!((dot(&b, &[3.0, 4.0]) - 5.0).abs() < 1e-12);
        assert_eq!(select_continuous(2, &[0.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(select_continuous(2, &[-1.0, 0.0]).unwrap(), vec![-1.0, 0.0]);
    }

    #[test]
    fn posterior_update_examples() {
        let s = init_state(2).unwrap();
        let s = posterior_update(&s, &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(s.design().rows(), vec![vec![2.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(s.f(), &[1.0, 0.0]);
        assert!((s.mu_hat()[0] - 0.5).abs() < 1e-15 && s.mu_hat()[1] == 0.0);
        assert_eq!(s.round(), 2);

        let z = posterior_update(&s, &[0.0, 0.0], 42.0).unwrap();
        assert_eq!(z.design(), s.design());
        assert_eq!(z.f(), s.f());
        assert_eq!(z.mu_hat(), s.mu_hat());
        assert_eq!(z.round(), 3);

        assert!(matches!(
            posterior_update(&s, &[1.0, 0.0], f64::NAN),
            Err(LabError::Data(_))
        ));
        assert!(posterior_update(&s, &[1.0], 0.0).is_err());
    }

    #[test]
    fn long_contexts_are_accepted() {
        let mut s = init_state(2).unwrap();
        s.update(&[2.0, 0.0], 1.0).unwrap();
        assert_eq!(s.design().get(0, 0), 5.0);
    }

    #[test]
    fn lin_ucb_examples() {
        let e = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let mut s = init_state(2).unwrap();
        s.update(&[1.0, 0.0], 1.0).unwrap();
        // scores (0.5 + √0.5, 1.0)
        assert_eq!(lin_ucb_select(&s, &e, 1.0).unwrap(), 0);
        // greedy on μ̂ = (0.5, 0)
        assert_eq!(lin_ucb_select(&s, &e, 0.0).unwrap(), 0);
        let fresh = init_state(2).unwrap();
        let slate = vec![vec![0.1, 0.1], vec![0.0, 0.9], vec![0.5, 0.0]];
        assert_eq!(lin_ucb_select(&fresh, &slate, 1.0).unwrap(), 1);
    }

    #[test]
    fn uniform_select_examples() {
        let mut rng = stream(1, 0, Purpose::Policy);
        assert_eq!(uniform_select(1, &mut rng), 0);
        let a: Vec<usize> = {
            let mut r = stream(2, 0, Purpose::Policy);
            (0..20).map(|_| uniform_select(7, &mut r)).collect()
        };
        let b: Vec<usize> = {
            let mut r = stream(2, 0, Purpose::Policy);
            (0..20).map(|_| uniform_select(7, &mut r)).collect()
        };
        assert_eq!(a, b);
        let mut counts = [0usize; 4];
        for _ in 0..100_000 {
            counts[uniform_select(4, &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e5 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn contraction_on_repeated_context() {
        let b = [0.6, 0.0, 0.8];
        let mut s = init_state(3).unwrap();
        let mut prev = f64::INFINITY;
        for n in 0..50u32 {
            let w = s.width(&b).unwrap();
            let want = 1.0 / (1.0 + n as f64);
            assert!((w * w - want).abs() < 1e-12);
            assert!(w < prev);
            prev = w;
            s.update(&b, 0.3).unwrap();
        }
    }

    #[test]
    fn refresh_cadence_keeps_inverse_tight() {
        let mut s = init_state(4).unwrap();
        let mut rng = stream(8, 0, Purpose::Contexts);
        for _ in 0..2000 {
            let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
            s.update(&b, rng.gen_range(-1.0..1.0)).unwrap();
        }
        assert!(s.design().inverse_residual(s.design_inv()).unwrap() <= 1e-6);
    }

    #[test]
    fn zero_scale_thompson_equals_greedy() {
        let mut s = init_state(2).unwrap();
        s.update(&[0.2, 0.9], 0.4).unwrap();
        s.update(&[0.8, -0.1], 0.7).unwrap();
        let slate = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.7, 0.7]];
        let mut c = cfg(1.0, 2, 0.1, VMode::Anytime);
        c.overrides.v = Some(0.0);
        let mut a = stream(1, 0, Purpose::Sampling);
        let mut b = stream(1, 0, Purpose::Policy);
        let d = Policy::Thompson
            .decide(&c, &s, &ArmSet::FiniteSlate(slate.clone()), &mut a, &mut b)
            .unwrap();
        assert_eq!(d.choice, Choice::Arm(lin_ucb_select(&s, &slate, 0.0).unwrap()));
    }

    #[test]
    fn ball_rejects_index_baselines() {
        let s = init_state(2).unwrap();
        let c = cfg(1.0, 2, 0.1, VMode::Anytime);
        let mut a = stream(1, 0, Purpose::Sampling);
        let mut b = stream(1, 0, Purpose::Policy);
        let r = Policy::LinUcb { alpha: 1.0 }.decide(&c, &s, &ArmSet::UnitBall { dim: 2 }, &mut a, &mut b);
        assert!(matches!(r, Err(LabError::Config(_))));
    }

    proptest! {
        #[test]
        fn argmax_is_scale_invariant(
            slate in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..8),
            mu in prop::collection::vec(-2.0f64..2.0, 3),
            c in 0.01f64..100.0,
        ) {
            let scaled: Vec<f64> = mu.iter().map(|x| x * c).collect();
            let a = select_arm(&slate, &mu);
            let b = select_arm(&slate, &scaled);
            // Rounding can only matter between numerically tied scores.
            if a != b {
                prop_assert!((dot(&slate[a], &mu) - dot(&slate[b], &mu)).abs() < 1e-12);
            }
        }
    }
}
