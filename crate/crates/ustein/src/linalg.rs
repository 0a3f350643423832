//! Small dense symmetric matrix machinery: cyclic Jacobi eigendecomposition,
//! positive-definite square roots, the similarity root `sqrt(C Σ⁻¹)`,
//! operator/Frobenius norms, trace, and PD inverse.
//!
//! Everything here targets `d ≤ ~10`; simplicity and guaranteed convergence
//! on symmetric input beat asymptotics at that size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative symmetry slack accepted by symmetric-only operations.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Jacobi sweeps stop once the off-diagonal norm falls below this times
/// the largest absolute entry.
pub const JACOBI_TOL: f64 = 1e-14;

/// Dense `d×d` real matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct MatrixD {
    dim: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for MatrixD {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        MatrixD::from_rows(&rows)
    }
}

impl From<MatrixD> for Vec<Vec<f64>> {
    fn from(m: MatrixD) -> Self {
        (0..m.dim)
            .map(|i| m.data[i * m.dim..(i + 1) * m.dim].to_vec())
            .collect()
    }
}

impl MatrixD {
    pub fn zeros(dim: usize) -> Self {
        MatrixD { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::config(format!(
                    "matrix row length {} != dimension {}",
                    row.len(),
                    dim
                )));
            }
            data.extend_from_slice(row);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("matrix entry"));
        }
        Ok(MatrixD { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> MatrixD {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &MatrixD) -> MatrixD {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for k in 0..self.dim {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..self.dim {
                    out.set(i, j, out.get(i, j) + a * rhs.get(k, j));
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.dim, x.len(), "dimension mismatch");
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn add(&self, rhs: &MatrixD) -> MatrixD {
        assert_eq!(self.dim, rhs.dim);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, rhs: &MatrixD) -> MatrixD {
        assert_eq!(self.dim, rhs.dim);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> MatrixD {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    /// `(A + Aᵀ)/2`.
    pub fn symmetrized(&self) -> MatrixD {
        let mut out = self.clone();
        for i in 0..self.dim {
            for j in 0..i {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.max_abs().max(1.0);
        for i in 0..self.dim {
            for j in 0..i {
                if (self.get(i, j) - self.get(j, i)).abs() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

fn require_symmetric(a: &MatrixD, what: &str) -> Result<()> {
    if !a.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::numerical(format!("{what}: matrix not symmetric")));
    }
    Ok(())
}

/// Eigendecomposition `A = Q diag(λ) Qᵀ` of a symmetric matrix by cyclic
/// Jacobi sweeps. Eigenvalues are returned in descending order with the
/// matching eigenvector columns.
pub fn jacobi_eigen(a: &MatrixD) -> Result<(MatrixD, Vec<f64>)> {
    require_symmetric(a, "jacobi_eigen")?;
    let d = a.dim();
    let mut m = a.symmetrized();
    let mut q = MatrixD::identity(d);
    let scale = m.max_abs();
    if scale == 0.0 {
        return Ok((q, vec![0.0; d]));
    }

    let off_norm = |m: &MatrixD| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..i {
                s += 2.0 * m.get(i, j) * m.get(i, j);
            }
        }
        s.sqrt()
    };

    const MAX_SWEEPS: usize = 100;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_norm(&m) < JACOBI_TOL * scale {
            converged = true;
            break;
        }
        for p in 0..d {
            for r in (p + 1)..d {
                let apq = m.get(p, r);
                if apq == 0.0 {
                    continue;
                }
                // Stable rotation computation (Golub & Van Loan style).
                let theta = (m.get(r, r) - m.get(p, p)) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m.get(k, p);
                    let mkr = m.get(k, r);
                    m.set(k, p, c * mkp - s * mkr);
                    m.set(k, r, s * mkp + c * mkr);
                }
                for k in 0..d {
                    let mpk = m.get(p, k);
                    let mrk = m.get(r, k);
                    m.set(p, k, c * mpk - s * mrk);
                    m.set(r, k, s * mpk + c * mrk);
                }
                for k in 0..d {
                    let qkp = q.get(k, p);
                    let qkr = q.get(k, r);
                    q.set(k, p, c * qkp - s * qkr);
                    q.set(k, r, s * qkp + c * qkr);
                }
            }
        }
    }
    if !converged && off_norm(&m) >= JACOBI_TOL * scale {
        return Err(Error::numerical("jacobi_eigen: no convergence"));
    }

    // Sort eigenpairs descending; stable order keeps output deterministic.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap());
    let lambda: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut q_sorted = MatrixD::zeros(d);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..d {
            q_sorted.set(k, col, q.get(k, src));
        }
    }
    Ok((q_sorted, lambda))
}

/// Applies `g` to the eigenvalues of a symmetric matrix and reassembles.
fn eigen_map(a: &MatrixD, what: &str, g: impl Fn(f64) -> Result<f64>) -> Result<MatrixD> {
    let (q, lambda) = jacobi_eigen(a)?;
    let d = a.dim();
    let mut mapped = Vec::with_capacity(d);
    for &l in &lambda {
        mapped.push(g(l).map_err(|e| Error::numerical(format!("{what}: {e}")))?);
    }
    // Q diag(g(λ)) Qᵀ
    let mut out = MatrixD::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += q.get(i, k) * mapped[k] * q.get(j, k);
            }
            out.set(i, j, s);
        }
    }
    Ok(out.symmetrized())
}

fn check_pd(lambda: &[f64], what: &str) -> Result<()> {
    let max = lambda.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if lambda.iter().any(|&l| l <= 0.0 || l <= 1e-14 * max) {
        return Err(Error::numerical(format!(
            "{what}: matrix not positive definite (min eigenvalue {:.3e})",
            lambda.iter().cloned().fold(f64::INFINITY, f64::min)
        )));
    }
    Ok(())
}

/// Principal square root of a symmetric positive definite matrix.
pub fn sqrt_pd(a: &MatrixD) -> Result<MatrixD> {
    let (_, lambda) = jacobi_eigen(a)?;
    check_pd(&lambda, "sqrt_pd")?;
    eigen_map(a, "sqrt_pd", |l| Ok(l.sqrt()))
}

/// Inverse of a symmetric positive definite matrix via eigen reconstruction.
pub fn inverse_pd(a: &MatrixD) -> Result<MatrixD> {
    let (_, lambda) = jacobi_eigen(a)?;
    check_pd(&lambda, "inverse_pd")?;
    eigen_map(a, "inverse_pd", |l| Ok(1.0 / l))
}

/// The principal root `R` of the (generally non-symmetric) product `C Σ⁻¹`,
/// computed by Σ-similarity: `R = Σ^{1/2} sqrt(Σ^{-1/2} C Σ^{-1/2}) Σ^{-1/2}`.
/// `R` has positive spectrum and satisfies `R·R = C Σ⁻¹`; the product is
/// verified to `1e-8 · maxabs` before returning.
pub fn sqrt_similarity(c: &MatrixD, sigma: &MatrixD) -> Result<MatrixD> {
    require_symmetric(c, "sqrt_similarity(C)")?;
    require_symmetric(sigma, "sqrt_similarity(Σ)")?;
    let sigma_half = sqrt_pd(sigma)?;
    let sigma_half_inv = inverse_pd(&sigma_half)?;
    let middle = sigma_half_inv.matmul(c).matmul(&sigma_half_inv).symmetrized();
    let middle_root = sqrt_pd(&middle)?;
    let r = sigma_half.matmul(&middle_root).matmul(&sigma_half_inv);

    let product = c.matmul(&inverse_pd(sigma)?);
    let err = r.matmul(&r).sub(&product).max_abs();
    let scale = product.max_abs().max(1.0);
    if err > 1e-8 * scale {
        return Err(Error::numerical(format!(
            "sqrt_similarity: verification failed (|R·R − CΣ⁻¹| = {err:.3e})"
        )));
    }
    Ok(r)
}

/// Operator (spectral) norm: largest singular value, via `AᵀA`.
pub fn operator_norm(a: &MatrixD) -> f64 {
    let ata = a.transpose().matmul(a).symmetrized();
    let (_, lambda) = jacobi_eigen(&ata).expect("AᵀA is symmetric");
    lambda.iter().fold(0.0_f64, |m, v| m.max(v.max(0.0))).sqrt()
}

pub fn frobenius_norm(a: &MatrixD) -> f64 {
    a.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn trace(a: &MatrixD) -> f64 {
    (0..a.dim()).map(|i| a.get(i, i)).sum()
}
