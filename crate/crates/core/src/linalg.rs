//! Small-dimension dense linear algebra for design matrices.
//!
//! Everything here works on row-major `d×d` storage with `d` in the tens at
//! most: rank-one updates of `B = I + Σ b bᵀ`, Sherman-Morrison maintenance of
//! `B⁻¹`, Cholesky factors (with rank-one updates), Gaussian sampling with
//! precision `B`, a Jacobi eigen-solver, and the Gaussian tail-bound toolkit.

use std::f64::consts::{E, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, LabError, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dense symmetric matrix, stored in full row-major layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        SymMatrix { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    /// Builds a matrix from rows, rejecting ragged or asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(LabError::Config("matrix must have at least one row".into()));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            check_dim(dim, row.len())?;
            data.extend_from_slice(row);
        }
        let m = SymMatrix { dim, data };
        let scale = m.max_abs().max(1.0);
        for i in 0..dim {
            for j in 0..i {
                if (m.get(i, j) - m.get(j, i)).abs() > 1e-10 * scale {
                    return Err(LabError::Data(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        Ok((0..self.dim).map(|i| dot(self.row(i), x)).collect())
    }

    /// `xᵀ M x`.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok((0..self.dim)
            .map(|i| x[i] * dot(self.row(i), x))
            .sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_diff(&self, other: &SymMatrix) -> Result<f64> {
        check_dim(self.dim, other.dim)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// In-place `M ← M + x xᵀ`.
    pub fn add_outer(&mut self, x: &[f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                self.data[i * d + j] += x[i] * x[j];
            }
        }
        Ok(())
    }

    /// Max-norm of `self · other − I`; used to detect drift of a maintained inverse.
    pub fn inverse_residual(&self, inverse: &SymMatrix) -> Result<f64> {
        check_dim(self.dim, inverse.dim)?;
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let v: f64 = (0..d).map(|k| self.get(i, k) * inverse.get(k, j)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        Ok(worst)
    }

    /// Residual of `(self · inverse)[:, col] − e_col`, O(d²).
    pub fn inverse_column_residual(&self, inverse: &SymMatrix, col: usize) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            let v: f64 = (0..d).map(|k| self.get(i, k) * inverse.get(k, col)).sum();
            let target = if i == col { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
        worst
    }
}

/// Returns `B + x xᵀ`.
pub fn rank_one_update(b: &SymMatrix, x: &[f64]) -> Result<SymMatrix> {
    let mut out = b.clone();
    out.add_outer(x)?;
    Ok(out)
}

/// Returns `(B + x xᵀ)⁻¹` given `B⁻¹`.
pub fn sherman_morrison_inverse(b_inv: &SymMatrix, x: &[f64]) -> Result<SymMatrix> {
    let mut out = b_inv.clone();
    sherman_morrison_in_place(&mut out, x)?;
    Ok(out)
}

/// In-place form of [`sherman_morrison_inverse`]. The result is written
/// symmetrically so no asymmetry accumulates across updates.
pub fn sherman_morrison_in_place(b_inv: &mut SymMatrix, x: &[f64]) -> Result<()> {
    let u = b_inv.mul_vec(x)?;
    let denom = 1.0 + dot(x, &u);
    let d = b_inv.dim;
    for i in 0..d {
        for j in i..d {
            let v = b_inv.data[i * d + j] - u[i] * u[j] / denom;
            b_inv.data[i * d + j] = v;
            b_inv.data[j * d + i] = v;
        }
    }
    Ok(())
}

/// Lower-triangular `L` with `L Lᵀ = B`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    lower: Vec<f64>,
}

/// Factors a positive-definite matrix. A non-positive pivot is reported as
/// numerical degeneracy.
pub fn cholesky(b: &SymMatrix) -> Result<CholeskyFactor> {
    let d = b.dim;
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let mut diag = b.get(j, j);
        for k in 0..j {
            diag -= l[j * d + k] * l[j * d + k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(LabError::Numerical(format!(
                "cholesky pivot {j} is non-positive ({diag:e})"
            )));
        }
        let ljj = diag.sqrt();
        l[j * d + j] = ljj;
        for i in (j + 1)..d {
            let mut v = b.get(i, j);
            for k in 0..j {
                v -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = v / ljj;
        }
    }
    Ok(CholeskyFactor { dim: d, lower: l })
}

impl CholeskyFactor {
    pub fn identity(dim: usize) -> Self {
        CholeskyFactor {
            dim,
            lower: SymMatrix::identity(dim).data,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let d = self.dim;
        let mut out = SymMatrix::zeros(d);
        for i in 0..d {
            for j in 0..=i {
                let v: f64 = (0..=j).map(|k| self.get(i, k) * self.get(j, k)).sum();
                out.data[i * d + j] = v;
                out.data[j * d + i] = v;
            }
        }
        out
    }

    /// Solves `L y = rhs`.
    pub fn solve_lower(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, rhs.len())?;
        let d = self.dim;
        let mut y = rhs.to_vec();
        for i in 0..d {
            let mut v = y[i];
            for k in 0..i {
                v -= self.get(i, k) * y[k];
            }
            y[i] = v / self.get(i, i);
        }
        Ok(y)
    }

    /// Solves `Lᵀ y = rhs`.
    pub fn solve_upper(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, rhs.len())?;
        let d = self.dim;
        let mut y = rhs.to_vec();
        for i in (0..d).rev() {
            let mut v = y[i];
            for k in (i + 1)..d {
                v -= self.get(k, i) * y[k];
            }
            y[i] = v / self.get(i, i);
        }
        Ok(y)
    }

    /// Solves `B x = rhs` with `B = L Lᵀ`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let y = self.solve_lower(rhs)?;
        self.solve_upper(&y)
    }

    /// `B⁻¹` via triangular solves against the identity columns.
    pub fn inverse(&self) -> SymMatrix {
        let d = self.dim;
        let mut out = SymMatrix::zeros(d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e).expect("dimension matches");
            for i in 0..d {
                out.data[i * d + j] = col[i];
            }
        }
        for i in 0..d {
            for j in 0..i {
                let v = 0.5 * (out.data[i * d + j] + out.data[j * d + i]);
                out.data[i * d + j] = v;
                out.data[j * d + i] = v;
            }
        }
        out
    }

    /// In-place update so that the factor represents `L Lᵀ + x xᵀ`.
    pub fn rank_one_update(&mut self, x: &[f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        let d = self.dim;
        let mut w = x.to_vec();
        for k in 0..d {
            let lkk = self.lower[k * d + k];
            let r = lkk.hypot(w[k]);
            let c = r / lkk;
            let s = w[k] / lkk;
            self.lower[k * d + k] = r;
            for i in (k + 1)..d {
                let lik = (self.lower[i * d + k] + s * w[i]) / c;
                self.lower[i * d + k] = lik;
                w[i] = c * w[i] - s * lik;
            }
        }
        Ok(())
    }
}

/// Draws from `N(mean, scale² · B⁻¹)` where `precision_factor` is the
/// Cholesky factor of `B`: the draw is `mean + scale · L⁻ᵀ z`.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &[f64],
    scale: f64,
    precision_factor: &CholeskyFactor,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_dim(precision_factor.dim, mean.len())?;
    let z: Vec<f64> = (0..mean.len()).map(|_| rng.sample(StandardNormal)).collect();
    let y = precision_factor.solve_upper(&z)?;
    Ok(mean.iter().zip(&y).map(|(m, v)| m + scale * v).collect())
}

/// `√(bᵀ B⁻¹ b)`, the confidence width of a context under the current design.
pub fn mahalanobis_width(b: &[f64], b_inv: &SymMatrix) -> Result<f64> {
    Ok(b_inv.quad_form(b)?.max(0.0).sqrt())
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigen-solver.
const JACOBI_TOL: f64 = 1e-15;

pub fn symmetric_eigen(m: &SymMatrix) -> Result<SymmetricEigen> {
    let d = m.dim;
    let mut a = m.data.clone();
    let mut v = SymMatrix::identity(d).data;
    let total = m.frobenius();
    let mut converged = d < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..d)
            .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j] * a[i * d + j])
            .sum();
        if off.sqrt() <= JACOBI_TOL * total || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                // Below rounding level of both diagonal entries: drop it.
                let (app, aqq) = (a[p * d + p].abs(), a[q * d + q].abs());
                if app + apq.abs() * 1e2 == app && aqq + apq.abs() * 1e2 == aqq {
                    a[p * d + q] = 0.0;
                    a[q * d + p] = 0.0;
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
                a[p * d + q] = 0.0;
                a[q * d + p] = 0.0;
            }
        }
    }
    if !converged || a.iter().any(|x| !x.is_finite()) {
        return Err(LabError::Numerical(
            "jacobi eigen-solver did not converge".into(),
        ));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[j * d + j].total_cmp(&a[i * d + i]));
    Ok(SymmetricEigen {
        values: order.iter().map(|&k| a[k * d + k]).collect(),
        vectors: order
            .iter()
            .map(|&k| (0..d).map(|i| v[i * d + k]).collect())
            .collect(),
    })
}

/// Eigenvalues in descending order.
pub fn eigen_spectrum(m: &SymMatrix) -> Result<Vec<f64>> {
    Ok(symmetric_eigen(m)?.values)
}

/// A probability interval `lower ≤ upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBoundPair {
    pub lower: f64,
    pub upper: f64,
}

impl TailBoundPair {
    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }
}

/// Sandwich for the two-sided Gaussian tail `Pr(|Z − m| > zσ)` from the
/// Abramowitz–Stegun bounds on `erfc(z/√2)`.
pub fn gaussian_tail_sandwich(z: f64) -> Result<TailBoundPair> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(LabError::Domain(format!("tail bound needs z >= 0, got {z}")));
    }
    let x = z / 2f64.sqrt();
    let lead = (2.0 / PI.sqrt()) * (-z * z / 2.0).exp();
    let lower = lead / (x + (x * x + 2.0).sqrt());
    let upper = if z == 0.0 {
        1.0
    } else {
        (lead / (x + (x * x + 4.0 / PI).sqrt())).min(1.0)
    };
    Ok(TailBoundPair { lower, upper })
}

/// The simplified pair `e^{−z²/2}/(2√π z)`, `e^{−z²/2}/(√π z)` for `z ≥ 1`.
///
/// Kept for comparison only: the upper end undershoots the true two-sided
/// tail for moderate `z` (already at `z = 2`).
pub fn gaussian_tail_simplified(z: f64) -> Result<TailBoundPair> {
    if !(z >= 1.0) || !z.is_finite() {
        return Err(LabError::Domain(format!(
            "simplified tail bound needs z >= 1, got {z}"
        )));
    }
    let base = (-z * z / 2.0).exp() / (PI.sqrt() * z);
    Ok(TailBoundPair {
        lower: base / 2.0,
        upper: base,
    })
}

/// Lower bound `e^{−z²}/(4√π)` on the one-sided tail `Pr(Z − m > zσ)`, valid on `[0, 1]`.
pub fn anti_concentration_floor(z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(LabError::Domain(format!(
            "anti-concentration floor needs z in [0, 1], got {z}"
        )));
    }
    Ok((-z * z).exp() / (4.0 * PI.sqrt()))
}

/// `1/(4e√π)`: the floor at `z = 1`.
pub fn anti_concentration_constant() -> f64 {
    1.0 / (4.0 * E * PI.sqrt())
}
