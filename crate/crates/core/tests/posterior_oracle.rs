//! Incremental posterior and numerical kernels checked against independent
//! oracles: nalgebra for dense linear algebra, libm for `erfc`, statrs for
//! the chi-square law.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use tslab::linalg::{
    anti_concentration_floor, cholesky, gaussian_tail_sandwich, norm, sample_mvn, SymMatrix,
};
use tslab::policy::{init_state, PosteriorState};

fn ball_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = norm(&x);
    let r: f64 = rng.gen_range(0.0..1.0);
    if n == 0.0 {
        x
    } else {
        x.iter().map(|v| v * r / n).collect()
    }
}

struct Batch {
    design: DMatrix<f64>,
    inverse: DMatrix<f64>,
    mu_hat: DVector<f64>,
}

fn batch(dim: usize, history: &[(Vec<f64>, f64)]) -> Batch {
    let mut design = DMatrix::<f64>::identity(dim, dim);
    let mut f = DVector::<f64>::zeros(dim);
    for (b, r) in history {
        let b = DVector::from_column_slice(b);
        design += &b * b.transpose();
        f += &b * *r;
    }
    let inverse = design.clone().cholesky().expect("B is positive definite").inverse();
    let mu_hat = &inverse * &f;
    Batch { design, inverse, mu_hat }
}

fn dense(m: &SymMatrix) -> DMatrix<f64> {
    let d = m.dim();
    DMatrix::from_fn(d, d, |i, j| m.get(i, j))
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn max_rel_error(state: &PosteriorState, oracle: &Batch) -> f64 {
    let mu = DVector::from_column_slice(state.mu_hat());
    let mu_err = (&mu - &oracle.mu_hat).norm() / oracle.mu_hat.norm().max(1e-12);
    rel(&dense(state.design()), &oracle.design)
        .max(rel(&dense(state.design_inv()), &oracle.inverse))
        .max(mu_err)
}

#[test]
fn incremental_state_matches_batch_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for seq in 0..20 {
        let dim = 1 + seq % 10;
        let mu: Vec<f64> = ball_point(&mut rng, dim);
        let mut state = init_state(dim).unwrap();
        let mut history = Vec::new();
        for t in 1..=600 {
            let b = ball_point(&mut rng, dim);
            let r = tslab::linalg::dot(&b, &mu) + rng.gen_range(-0.5..0.5);
            state.update(&b, r).unwrap();
            history.push((b, r));
            if t % 200 == 0 {
                let err = max_rel_error(&state, &batch(dim, &history));
                assert!(err < 1e-8, "seq {seq}, t={t}: relative error {err:e}");
            }
        }
    }
}

#[test]
fn inverse_drift_stays_small_over_long_runs() {
    let dim = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut state = init_state(dim).unwrap();
    for _ in 0..10_000 {
        let b = ball_point(&mut rng, dim);
        state.update(&b, rng.gen_range(-1.0..1.0)).unwrap();
    }
    let residual = state.design().inverse_residual(state.design_inv()).unwrap();
    assert!(residual <= 1e-9, "‖B·B⁻¹ − I‖ = {residual:e}");
    let recon = state.cholesky().reconstruct();
    let scale = state.design().max_abs();
    assert!(recon.frobenius_diff(state.design()).unwrap() <= 1e-10 * scale);
}

#[test]
fn posterior_draws_follow_the_precision() {
    // (x − m)ᵀ B (x − m) / v² is χ²_d when x ~ N(m, v² B⁻¹).
    let dim = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let rows = vec![
        vec![3.0, 0.4, -0.2, 0.1],
        vec![0.4, 2.0, 0.3, 0.0],
        vec![-0.2, 0.3, 1.5, -0.4],
        vec![0.1, 0.0, -0.4, 1.2],
    ];
    let b = SymMatrix::from_rows(&rows).unwrap();
    let factor = cholesky(&b).unwrap();
    let mean = vec![0.3, -0.1, 0.2, 0.5];
    let v = 0.7;

    let chi = ChiSquared::new(dim as f64).unwrap();
    let bins = 10usize;
    let n = 20_000usize;
    let mut counts = vec![0usize; bins];
    for _ in 0..n {
        let x = sample_mvn(&mean, v, &factor, &mut rng).unwrap();
        let diff: Vec<f64> = x.iter().zip(&mean).map(|(a, m)| a - m).collect();
        let q = b.quad_form(&diff).unwrap() / (v * v);
        let u = chi.cdf(q);
        counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let expected = n as f64 / bins as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "goodness-of-fit statistic {stat} >= {critical}");
}

#[test]
fn tail_sandwich_brackets_erfc_on_fine_grid() {
    for k in 0..=500 {
        let z = k as f64 * 0.01;
        let tail = libm::erfc(z / std::f64::consts::SQRT_2);
        let pair = gaussian_tail_sandwich(z).unwrap();
        assert!(pair.contains(tail), "z={z}: {tail} not in [{}, {}]", pair.lower, pair.upper);
    }
}

proptest! {
    #[test]
    fn floor_under_one_sided_tail(z in 0.0f64..=1.0) {
        let one_sided = 0.5 * libm::erfc(z / std::f64::consts::SQRT_2);
        prop_assert!(anti_concentration_floor(z).unwrap() <= one_sided);
    }

    #[test]
    fn single_update_matches_batch(
        dim in 1usize..8,
        seed in any::<u64>(),
        steps in 1usize..40,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = init_state(dim).unwrap();
        let mut history = Vec::new();
        for _ in 0..steps {
            let b = ball_point(&mut rng, dim);
            let r = rng.gen_range(-2.0..2.0);
            state.update(&b, r).unwrap();
            history.push((b, r));
        }
        prop_assert!(max_rel_error(&state, &batch(dim, &history)) < 1e-10);
    }
}
