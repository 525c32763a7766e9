//! Linear-payoff environments: context adversaries, sub-Gaussian reward noise
//! and the omniscient oracle used for regret accounting.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, LabError, Result};
use crate::linalg::{dot, norm, symmetric_eigen, SymMatrix};
pub use crate::policy::ArmSet as ContextSet;

/// Slack on the unit-norm constraint for emitted contexts.
pub const NORM_SLACK: f64 = 1e-12;

/// Reward noise `η`. Every variant is `R`-sub-Gaussian with `R = scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseKind {
    None,
    /// Uniform on `[−scale, scale]`.
    BoundedUniform { scale: f64 },
    /// Normal with standard deviation `scale`.
    Gaussian { scale: f64 },
    /// `±scale` with equal probability.
    Rademacher { scale: f64 },
}

impl NoiseKind {
    pub fn scale(&self) -> f64 {
        match *self {
            NoiseKind::None => 0.0,
            NoiseKind::BoundedUniform { scale }
            | NoiseKind::Gaussian { scale }
            | NoiseKind::Rademacher { scale } => scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.scale();
        if !(s >= 0.0) || !s.is_finite() {
            return Err(LabError::Config(format!("noise scale must be >= 0, got {s}")));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseKind::None => 0.0,
            NoiseKind::BoundedUniform { scale } => {
                if scale == 0.0 {
                    0.0
                } else {
                    rng.gen_range(-scale..=scale)
                }
            }
            NoiseKind::Gaussian { scale } => scale * rng.sample::<f64, _>(StandardNormal),
            NoiseKind::Rademacher { scale } => {
                if rng.gen::<bool>() {
                    scale
                } else {
                    -scale
                }
            }
        }
    }
}

/// Hidden parameter plus reward noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearEnvironment {
    mu_star: Vec<f64>,
    noise: NoiseKind,
    assert_unit_gaps: bool,
}

impl LinearEnvironment {
    pub fn new(mu_star: Vec<f64>, noise: NoiseKind, assert_unit_gaps: bool) -> Result<Self> {
        if mu_star.is_empty() {
            return Err(LabError::Config("mu_star must have dimension >= 1".into()));
        }
        if mu_star.iter().any(|x| !x.is_finite()) {
            return Err(LabError::Config("mu_star has a non-finite entry".into()));
        }
        let n = norm(&mu_star);
        if n > 1.0 + NORM_SLACK {
            return Err(LabError::Config(format!("‖mu_star‖ = {n} exceeds 1")));
        }
        noise.validate()?;
        Ok(LinearEnvironment {
            mu_star,
            noise,
            assert_unit_gaps,
        })
    }

    pub fn mu_star(&self) -> &[f64] {
        &self.mu_star
    }

    pub fn noise(&self) -> NoiseKind {
        self.noise
    }

    pub fn dim(&self) -> usize {
        self.mu_star.len()
    }

    /// Checks `0 ≤ Δ ≤ 2`, and `Δ ≤ 1` when the environment opts into unit gaps.
    pub fn check_gaps(&self, gaps: &[f64]) -> Result<()> {
        let cap = if self.assert_unit_gaps { 1.0 } else { 2.0 };
        for (i, &g) in gaps.iter().enumerate() {
            if !(g >= -NORM_SLACK && g <= cap + NORM_SLACK) {
                return Err(LabError::Data(format!(
                    "gap {g} of arm {i} outside [0, {cap}]"
                )));
            }
        }
        Ok(())
    }
}

/// `bᵀμ + η`.
pub fn draw_reward<R: Rng + ?Sized>(b: &[f64], env: &LinearEnvironment, rng: &mut R) -> f64 {
    dot(b, &env.mu_star) + env.noise.sample(rng)
}

/// Strategies that look at the history before emitting contexts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptiveStrategy {
    /// Contexts chase the least-explored eigendirections of `B(t)`.
    OrthogonalDrift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AdversaryKind {
    /// The same slate every round.
    FixedSlate { contexts: Vec<Vec<f64>> },
    /// `arms` independent uniform directions on the unit sphere per round.
    SphereIid { arms: usize, dim: usize },
    /// The standard basis rotated in the first coordinate plane by the golden
    /// angle each round.
    RotatingBasis { dim: usize },
    HistoryAdaptive {
        strategy: AdaptiveStrategy,
        arms: usize,
        dim: usize,
    },
    /// The whole unit ball is available every round.
    UnitBall { dim: usize },
}

/// One completed round as seen by the adversary.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayedRound {
    pub context: Vec<f64>,
    pub reward: f64,
}

/// What an adversary may look at when choosing the round-`t` contexts: the
/// history `H_{t−1}` and the design matrix it induces. Current-round noise is
/// never part of the view.
#[derive(Debug, Clone, Copy)]
pub struct AdversaryView<'a> {
    pub round: u64,
    pub history: &'a [PlayedRound],
    pub design: &'a SymMatrix,
}

impl AdversaryKind {
    pub fn dim(&self) -> usize {
        match self {
            AdversaryKind::FixedSlate { contexts } => contexts.first().map_or(0, Vec::len),
            AdversaryKind::SphereIid { dim, .. }
            | AdversaryKind::RotatingBasis { dim }
            | AdversaryKind::HistoryAdaptive { dim, .. }
            | AdversaryKind::UnitBall { dim } => *dim,
        }
    }

    /// Number of arms per round, `None` for the unit ball.
    pub fn arms(&self) -> Option<usize> {
        match self {
            AdversaryKind::FixedSlate { contexts } => Some(contexts.len()),
            AdversaryKind::SphereIid { arms, .. } | AdversaryKind::HistoryAdaptive { arms, .. } => {
                Some(*arms)
            }
            AdversaryKind::RotatingBasis { dim } => Some(*dim),
            AdversaryKind::UnitBall { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() < 1 {
            return Err(LabError::Config("adversary dimension must be >= 1".into()));
        }
        if self.arms() == Some(0) {
            return Err(LabError::Config("adversary must offer at least one arm".into()));
        }
        if let AdversaryKind::FixedSlate { contexts } = self {
            let d = self.dim();
            for b in contexts {
                check_dim(d, b.len())?;
                let n = norm(b);
                if !(n <= 1.0 + NORM_SLACK) {
                    return Err(LabError::Config(format!(
                        "fixed-slate context has norm {n} > 1"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn sphere_point<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&g);
        if n > 1e-300 {
            return g.into_iter().map(|x| x / n).collect();
        }
    }
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Golden angle, so successive rotations never repeat.
const ROTATION_STEP: f64 = PI * (3.0 - 2.236_067_977_499_79);
/// Weight of the isotropic jitter mixed into drift contexts.
const DRIFT_JITTER: f64 = 0.25;

/// Contexts for round `view.round`.
pub fn generate_contexts<R: Rng + ?Sized>(
    adv: &AdversaryKind,
    view: AdversaryView<'_>,
    rng: &mut R,
) -> Result<ContextSet> {
    if view.history.len() as u64 + 1 != view.round {
        return Err(LabError::Data(format!(
            "adversary at round {} saw {} history rows",
            view.round,
            view.history.len()
        )));
    }
    let set = match adv {
        AdversaryKind::FixedSlate { contexts } => ContextSet::FiniteSlate(contexts.clone()),
        AdversaryKind::SphereIid { arms, dim } => {
            ContextSet::FiniteSlate((0..*arms).map(|_| sphere_point(*dim, rng)).collect())
        }
        AdversaryKind::RotatingBasis { dim } => {
            let angle = ROTATION_STEP * view.round as f64;
            let (s, c) = angle.sin_cos();
            let slate = (0..*dim)
                .map(|i| {
                    let mut e = vec![0.0; *dim];
                    e[i] = 1.0;
                    if *dim >= 2 && i < 2 {
                        let (x, y) = (e[0], e[1]);
                        e[0] = c * x - s * y;
                        e[1] = s * x + c * y;
                    }
                    e
                })
                .collect();
            ContextSet::FiniteSlate(slate)
        }
        AdversaryKind::HistoryAdaptive {
            strategy: AdaptiveStrategy::OrthogonalDrift,
            arms,
            dim,
        } => {
            if view.history.is_empty() {
                ContextSet::FiniteSlate((0..*arms).map(|_| sphere_point(*dim, rng)).collect())
            } else {
                check_dim(*dim, view.design.dim())?;
                let eig = symmetric_eigen(view.design)?;
                let weakest = eig.vectors.last().expect("dimension >= 1");
                let slate = (0..*arms)
                    .map(|_| {
                        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                        let jitter = sphere_point(*dim, rng);
                        normalized(
                            weakest
                                .iter()
                                .zip(&jitter)
                                .map(|(u, g)| sign * u + DRIFT_JITTER * g)
                                .collect(),
                        )
                    })
                    .collect();
                ContextSet::FiniteSlate(slate)
            }
        }
        AdversaryKind::UnitBall { dim } => ContextSet::UnitBall { dim: *dim },
    };
    if let ContextSet::FiniteSlate(slate) = &set {
        for b in slate {
            let n = norm(b);
            if !(n <= 1.0 + NORM_SLACK) {
                return Err(LabError::Numerical(format!(
                    "adversary emitted a context with norm {n}"
                )));
            }
        }
    }
    Ok(set)
}

/// Best response and per-arm gaps under the true parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleView {
    Finite { best: usize, gaps: Vec<f64> },
    /// Unit ball: `b* = μ/‖μ‖` (or `e₁` when `μ = 0`), optimum `‖μ‖`.
    Ball { best: Vec<f64>, optimum: f64 },
}

impl OracleView {
    /// `Δ(b) = b*ᵀμ − bᵀμ` for a point of the ball.
    pub fn ball_gap(optimum: f64, b: &[f64], mu_star: &[f64]) -> f64 {
        (optimum - dot(b, mu_star)).max(0.0)
    }
}

pub fn oracle(contexts: &ContextSet, mu_star: &[f64]) -> Result<OracleView> {
    check_dim(mu_star.len(), contexts.dim())?;
    match contexts {
        ContextSet::FiniteSlate(slate) => {
            let scores: Vec<f64> = slate.iter().map(|b| dot(b, mu_star)).collect();
            let best = crate::policy::argmax(scores.iter().copied())
                .ok_or_else(|| LabError::Config("empty slate".into()))?;
            let top = scores[best];
            Ok(OracleView::Finite {
                best,
                gaps: scores.iter().map(|s| top - s).collect(),
            })
        }
        ContextSet::UnitBall { dim } => {
            let n = norm(mu_star);
            Ok(OracleView::Ball {
                best: crate::policy::select_continuous(*dim, mu_star)?,
                optimum: n,
            })
        }
    }
}

/// Fixed two-arm slate `{e₁, e₂}` where `e₁` (played first under the
/// lowest-index tie rule) pays `0.5` and `e₂` pays `0.8`. A learner that
/// trusts its mean estimate never leaves `e₁`.
pub fn greedy_trap(dim: usize) -> Result<(AdversaryKind, Vec<f64>)> {
    if dim < 2 {
        return Err(LabError::Config("greedy-trap needs dimension >= 2".into()));
    }
    let mut e1 = vec![0.0; dim];
    e1[0] = 1.0;
    let mut e2 = vec![0.0; dim];
    e2[1] = 1.0;
    let mut mu = vec![0.0; dim];
    mu[0] = GREEDY_TRAP_MEANS.0;
    mu[1] = GREEDY_TRAP_MEANS.1;
    Ok((AdversaryKind::FixedSlate { contexts: vec![e1, e2] }, mu))
}

pub const GREEDY_TRAP_MEANS: (f64, f64) = (0.5, 0.8);

/// A uniform direction on the sphere scaled to `radius`; used to draw `μ`.
pub fn random_parameter<R: Rng + ?Sized>(dim: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    sphere_point(dim, rng).into_iter().map(|x| x * radius).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn view<'a>(round: u64, history: &'a [PlayedRound], design: &'a SymMatrix) -> AdversaryView<'a> {
        AdversaryView { round, history, design }
    }

    #[test]
    fn fixed_slate_every_round() {
        let slate = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let adv = AdversaryKind::FixedSlate { contexts: slate.clone() };
        let mut rng = stream(1, 0, Purpose::Contexts);
        let b = SymMatrix::identity(2);
        let mut hist = Vec::new();
        for t in 1..5u64 {
            let set = generate_contexts(&adv, view(t, &hist, &b), &mut rng).unwrap();
            assert_eq!(set, ContextSet::FiniteSlate(slate.clone()));
            hist.push(PlayedRound { context: slate[0].clone(), reward: 0.0 });
        }
    }

    #[test]
    fn sphere_draws_are_unit() {
        let adv = AdversaryKind::SphereIid { arms: 3, dim: 2 };
        let mut rng = stream(2, 0, Purpose::Contexts);
        let b = SymMatrix::identity(2);
        match generate_contexts(&adv, view(1, &[], &b), &mut rng).unwrap() {
            ContextSet::FiniteSlate(s) => {
                assert_eq!(s.len(), 3);
                for c in s {
                    assert!((norm(&c) - 1.0).abs() < 1e-12);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn orthogonal_drift_falls_back_then_chases_weak_direction() {
        let adv = AdversaryKind::HistoryAdaptive {
            strategy: AdaptiveStrategy::OrthogonalDrift,
            arms: 4,
            dim: 3,
        };
        let sphere = AdversaryKind::SphereIid { arms: 4, dim: 3 };
        let b = SymMatrix::identity(3);
        let a = generate_contexts(&adv, view(1, &[], &b), &mut stream(3, 0, Purpose::Contexts)).unwrap();
        let s = generate_contexts(&sphere, view(1, &[], &b), &mut stream(3, 0, Purpose::Contexts)).unwrap();
        assert_eq!(a, s);

        // B heavily explored along e₁, e₂: contexts should lean into e₃.
        let mut design = SymMatrix::identity(3);
        let mut hist = Vec::new();
        for _ in 0..20 {
            design.add_outer(&[1.0, 0.0, 0.0]).unwrap();
            design.add_outer(&[0.0, 1.0, 0.0]).unwrap();
        }
        for _ in 0..40 {
            hist.push(PlayedRound { context: vec![1.0, 0.0, 0.0], reward: 0.0 });
        }
        let set = generate_contexts(&adv, view(41, &hist, &design), &mut stream(3, 0, Purpose::Contexts)).unwrap();
        let ContextSet::FiniteSlate(slate) = set else { unreachable!() };
        for c in &slate {
            assert!((norm(c) - 1.0).abs() < 1e-12);
            assert!(c[2].abs() > 0.6, "{c:?}");
        }
        let again = generate_contexts(&adv, view(41, &hist, &design), &mut stream(3, 0, Purpose::Contexts)).unwrap();
        assert_eq!(again, ContextSet::FiniteSlate(slate));
    }

    #[test]
    fn history_length_must_match_round() {
        let adv = AdversaryKind::SphereIid { arms: 2, dim: 2 };
        let b = SymMatrix::identity(2);
        assert!(generate_contexts(&adv, view(3, &[], &b), &mut stream(1, 0, Purpose::Contexts)).is_err());
    }

    #[test]
    fn rotating_basis_stays_orthonormal() {
        let adv = AdversaryKind::RotatingBasis { dim: 3 };
        let b = SymMatrix::identity(3);
        let mut hist = Vec::new();
        for t in 1..20u64 {
            let set = generate_contexts(&adv, view(t, &hist, &b), &mut stream(1, 0, Purpose::Contexts)).unwrap();
            let ContextSet::FiniteSlate(s) = set else { unreachable!() };
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(&s[i], &s[j]) - want).abs() < 1e-12);
                }
            }
            hist.push(PlayedRound { context: s[0].clone(), reward: 0.0 });
        }
    }

    #[test]
    fn long_fixed_slate_is_rejected() {
        let adv = AdversaryKind::FixedSlate { contexts: vec![vec![1.0, 1.0]] };
        assert!(adv.validate().is_err());
    }

    #[test]
    fn draw_reward_examples() {
        let env = LinearEnvironment::new(vec![1.0, 0.0], NoiseKind::None, false).unwrap();
        let mut rng = stream(1, 0, Purpose::Noise);
        assert_eq!(draw_reward(&[0.5, 0.5], &env, &mut rng), 0.5);
        assert_eq!(draw_reward(&[0.0, 1.0], &env, &mut rng), 0.0);

        let env = LinearEnvironment::new(vec![0.6, 0.0], NoiseKind::Gaussian { scale: 0.3 }, false).unwrap();
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| draw_reward(&[0.5, 0.5], &env, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - 0.3).abs() <= 3.0 * 0.3 / (n as f64).sqrt());
        assert!((sd - 0.3).abs() <= 0.02 * 0.3);
    }

    #[test]
    fn environment_rejects_long_parameter() {
        assert!(LinearEnvironment::new(vec![1.0, 1.0], NoiseKind::None, false).is_err());
        assert!(LinearEnvironment::new(vec![0.5], NoiseKind::Gaussian { scale: -1.0 }, false).is_err());
    }

    #[test]
    fn oracle_examples() {
        let e = ContextSet::FiniteSlate(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(
            oracle(&e, &[1.0, 0.0]).unwrap(),
            OracleView::Finite { best: 0, gaps: vec![0.0, 1.0] }
        );
        let same = ContextSet::FiniteSlate(vec![vec![0.3, 0.4]; 3]);
        assert_eq!(
            oracle(&same, &[0.2, 0.9]).unwrap(),
            OracleView::Finite { best: 0, gaps: vec![0.0; 3] }
        );
        let s3 = ContextSet::FiniteSlate(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]]);
        let OracleView::Finite { best, gaps } = oracle(&s3, &[0.6, 0.8]).unwrap() else { unreachable!() };
        assert_eq!(best, 2);
        for (g, w) in gaps.iter().zip([0.4, 0.2, 0.0]) {
            assert!((g - w).abs() < 1e-15);
        }
        let OracleView::Ball { best, optimum } = oracle(&ContextSet::UnitBall { dim: 2 }, &[0.3, 0.4]).unwrap() else { unreachable!() };
        assert!((optimum - 0.5).abs() < 1e-15);
        assert!((best[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn unit_gap_flag() {
        let strict = LinearEnvironment::new(vec![1.0, 0.0], NoiseKind::None, true).unwrap();
        assert!(strict.check_gaps(&[0.0, 1.5]).is_err());
        let loose = LinearEnvironment::new(vec![1.0, 0.0], NoiseKind::None, false).unwrap();
        assert!(loose.check_gaps(&[0.0, 1.5]).is_ok());
        assert!(loose.check_gaps(&[0.0, 2.5]).is_err());
    }

    #[test]
    fn noise_is_centered_and_sub_gaussian() {
        let kinds = [
            NoiseKind::None,
            NoiseKind::BoundedUniform { scale: 0.7 },
            NoiseKind::Gaussian { scale: 0.7 },
            NoiseKind::Rademacher { scale: 0.7 },
        ];
        let n = 100_000;
        for (k, kind) in kinds.iter().enumerate() {
            let mut rng = stream(40 + k as u64, 0, Purpose::Noise);
            let draws: Vec<f64> = (0..n).map(|_| kind.sample(&mut rng)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            assert!(mean.abs() <= 4.0 * sd / (n as f64).sqrt() + 1e-15, "{kind:?}");
            let r = kind.scale();
            for lambda in [-1.0, -0.5, 0.5, 1.0] {
                let e: Vec<f64> = draws.iter().map(|x| (lambda * x).exp()).collect();
                let m = e.iter().sum::<f64>() / n as f64;
                let se = (e.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                    / (n as f64).sqrt();
                let cap = (lambda * lambda * r * r / 2.0).exp();
                assert!(m <= cap * (1.0 + 3.0 * se), "{kind:?} λ={lambda}: {m} > {cap}");
            }
        }
    }

    #[test]
    fn greedy_trap_shape() {
        let (adv, mu) = greedy_trap(2).unwrap();
        adv.validate().unwrap();
        assert!(norm(&mu) <= 1.0);
        let set = ContextSet::FiniteSlate(match &adv {
            AdversaryKind::FixedSlate { contexts } => contexts.clone(),
            _ => unreachable!(),
        });
        let OracleView::Finite { best, .. } = oracle(&set, &mu).unwrap() else { unreachable!() };
        assert_eq!(best, 1);
        assert!(greedy_trap(1).is_err());
    }
}
