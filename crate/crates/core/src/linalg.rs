//! Small dense complex linear algebra: eigendecomposition via complex Schur
//! form and the matrix exponential built on it.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Eigenvector condition number above which exponentials are computed by
/// scaling and squaring instead of diagonalization.
pub const MAX_EIGENVECTOR_CONDITION: f64 = 1e8;

/// `M = V diag(λ) V⁻¹`.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: DVector<Complex64>,
    pub vectors: CMatrix,
    pub inverse: CMatrix,
    /// `‖V‖₁ ‖V⁻¹‖₁`
    pub condition: f64,
}

fn schur(m: &CMatrix) -> Option<(CMatrix, CMatrix)> {
    Schur::try_new(m.clone(), f64::EPSILON, 10_000 * m.nrows().max(1)).map(|s| s.unpack())
}

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    match schur(m) {
        Some((_, t)) => (0..t.nrows()).map(|i| t[(i, i)]).collect(),
        None => Vec::new(),
    }
}

pub fn one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Full eigendecomposition; `None` when the Schur iteration fails or the
/// eigenvector matrix is singular.
pub fn eigen_decompose(m: &CMatrix) -> Option<EigenDecomposition> {
    let n = m.nrows();
    let (q, t) = schur(m)?;
    let tiny = f64::EPSILON * one_norm(m).max(f64::MIN_POSITIVE);

    // eigenvectors of the triangular factor by back substitution
    let mut x = CMatrix::zeros(n, n);
    for i in 0..n {
        let lambda = t[(i, i)];
        x[(i, i)] = Complex64::new(1.0, 0.0);
        for r in (0..i).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in r + 1..=i {
                acc += t[(r, c)] * x[(c, i)];
            }
            let mut denom = t[(r, r)] - lambda;
            if denom.norm() < tiny {
                denom = Complex64::new(tiny, 0.0);
            }
            x[(r, i)] = -acc / denom;
        }
    }
    let mut vectors = q * x;
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= Complex64::new(norm, 0.0);
        }
    }
    let inverse = vectors.clone().try_inverse()?;
    let condition = one_norm(&vectors) * one_norm(&inverse);
    if !condition.is_finite() {
        return None;
    }
    let values = DVector::from_iterator(n, (0..n).map(|i| t[(i, i)]));
    Some(EigenDecomposition { values, vectors, inverse, condition })
}

/// Evaluates `exp(M τ)` for many `τ` from one factorization.
#[derive(Clone, Debug)]
pub enum Propagator {
    Diagonal(EigenDecomposition),
    /// Fallback for defective or ill-conditioned generators.
    ScalingSquaring(CMatrix),
}

impl Propagator {
    pub fn new(generator: &CMatrix) -> Self {
        match eigen_decompose(generator) {
            Some(eig) if eig.condition <= MAX_EIGENVECTOR_CONDITION => Propagator::Diagonal(eig),
            _ => Propagator::ScalingSquaring(generator.clone()),
        }
    }

    pub fn is_diagonalized(&self) -> bool {
        matches!(self, Propagator::Diagonal(_))
    }

    pub fn at(&self, tau: f64) -> CMatrix {
        match self {
            Propagator::Diagonal(eig) => {
                let mut scaled = eig.vectors.clone();
                for (j, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= (eig.values[j] * tau).exp();
                }
                scaled * &eig.inverse
            }
            Propagator::ScalingSquaring(m) => (m * Complex64::new(tau, 0.0)).exp(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Independent Taylor series with scaling and squaring.
    fn taylor_exp(m: &CMatrix) -> CMatrix {
        let n = m.nrows();
        let norm = one_norm(m);
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let a = m / c(2f64.powi(squarings as i32), 0.0);
        let mut term = CMatrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..40 {
            term = &term * &a / c(k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn eigenvalues_of_rotation_generator() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-2.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]);
        let mut ev = eigenvalues(&m);
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] - c(0.0, -2.0)).norm() < 1e-14);
        assert!((ev[1] - c(0.0, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn diagonalized_exponential_matches_taylor() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.1, 0.2),
                c(-1.0, 0.0),
                c(0.3, -0.4),
                c(0.5, 0.0),
                c(-0.2, 0.1),
                c(0.0, 1.0),
                c(0.7, 0.3),
                c(0.2, 0.0),
                c(0.0, -0.6),
            ],
        );
        let p = Propagator::new(&m);
        assert!(p.is_diagonalized());
        for tau in [0.0, 0.3, 1.7] {
            let diff = p.at(tau) - taylor_exp(&(&m * c(tau, 0.0)));
            assert!(one_norm(&diff) < 1e-12, "tau = {tau}: {}", one_norm(&diff));
        }
    }

    #[test]
    fn defective_generator_falls_back() {
        // Jordan block: exp(Jτ) = [[e^τ, τ e^τ], [0, e^τ]]
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let p = Propagator::new(&m);
        assert!(!p.is_diagonalized());
        let e = p.at(2.0);
        let want = 2f64.exp();
        assert!((e[(0, 0)].re - want).abs() < 1e-12 * want);
        assert!((e[(0, 1)].re - 2.0 * want).abs() < 1e-12 * want);
        assert!(e[(1, 0)].norm() < 1e-14);
    }
}
