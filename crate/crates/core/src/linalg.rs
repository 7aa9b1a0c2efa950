//! Dense symmetric linear algebra used by the policies.
//!
//! Matrix storage and products come from `nalgebra`. The symmetric
//! eigensolver is a cyclic Jacobi iteration so that eigenvector ordering and
//! signs are fully deterministic across platforms.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Tolerance for symmetry checks on user-supplied matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues above `-PSD_REL_TOL * lambda_max` are accepted as nonnegative.
pub const PSD_REL_TOL: f64 = 1e-10;

const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigendecomposition `A = V diag(values) V^T` of a symmetric matrix.
///
/// `values` is sorted in nonincreasing order. Equal values keep the order in
/// which the Jacobi iteration produced them (the original diagonal index).
/// Each eigenvector has its largest-magnitude component made positive.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymmetricEigen {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Iterates until the largest off-diagonal magnitude falls below
/// `1e-12 * ||A||_F`, for at most 100 sweeps.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "symmetric eigendecomposition",
            expected: "square matrix".into(),
            found: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    let mut work = symmetrize(a);
    let mut vectors = DMatrix::<f64>::identity(n, n);
    let threshold = JACOBI_REL_TOL * work.norm();

    let mut converged = false;
    for _ in 0..=JACOBI_MAX_SWEEPS {
        if max_off_diagonal(&work) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = work[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (work[(q, q)] - work[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate(&mut work, &mut vectors, p, q, c, s);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // sort_by is stable: equal eigenvalues keep their diagonal order
    order.sort_by(|&i, &j| work[(j, j)].total_cmp(&work[(i, i)]));

    let values = DVector::from_iterator(n, order.iter().map(|&i| work[(i, i)]));
    let mut sorted = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = vectors.column(src).into_owned();
        fix_sign(&mut col);
        sorted.set_column(dst, &col);
    }
    Ok(SymmetricEigen {
        values,
        vectors: sorted,
    })
}

// A <- J^T A J, V <- V J for the plane rotation J acting on (p, q).
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn max_off_diagonal(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut max = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                max = max.max(a[(i, j)].abs());
            }
        }
    }
    max
}

/// Flips `v` so that its largest-magnitude component (first one on ties) is positive.
pub fn fix_sign(v: &mut DVector<f64>) {
    let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    if let Some(lead) = v.iter().find(|x| x.abs() >= max - 1e-12) {
        if *lead < 0.0 {
            v.neg_mut();
        }
    }
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).amax()
}

pub fn require_square(what: &'static str, a: &DMatrix<f64>, n: usize) -> Result<()> {
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            what,
            expected: format!("{n}x{n}"),
            found: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    Ok(())
}

pub fn require_symmetric(name: &'static str, a: &DMatrix<f64>) -> Result<()> {
    let asymmetry = max_asymmetry(a);
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { name, asymmetry });
    }
    Ok(())
}

/// Checks strict positive definiteness (every eigenvalue > 0).
pub fn require_positive_definite(name: &'static str, a: &DMatrix<f64>) -> Result<()> {
    require_symmetric(name, a)?;
    let eig = symmetric_eigen(a)?;
    let min = eig.min();
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite {
            name,
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// Checks positive semidefiniteness up to `PSD_REL_TOL`.
pub fn require_positive_semidefinite(name: &'static str, a: &DMatrix<f64>) -> Result<()> {
    require_symmetric(name, a)?;
    let eig = symmetric_eigen(a)?;
    let min = eig.min();
    if min < -PSD_REL_TOL * eig.max().max(0.0) {
        return Err(Error::NotPositiveSemidefinite {
            name,
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// `log det A` for a symmetric positive definite matrix via Cholesky.
pub fn log_det_spd(a: &DMatrix<f64>) -> Result<f64> {
    let chol = a.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite {
        name: "covariance",
        min_eigenvalue: symmetric_eigen(a).map(|e| e.min()).unwrap_or(f64::NAN),
    })?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Ratio of extreme eigenvalues of a symmetric matrix; infinite when the
/// smallest eigenvalue is not positive.
pub fn condition_number(a: &DMatrix<f64>) -> Result<f64> {
    let eig = symmetric_eigen(a)?;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(hi / lo)
    }
}

/// A factor `F` with `F F^T = A` for a positive semidefinite `A`.
/// Slightly negative eigenvalues are clamped to zero.
pub fn psd_factor(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = symmetric_eigen(a)?;
    let roots = eig.values.map(|v| v.max(0.0).sqrt());
    Ok(&eig.vectors * DMatrix::from_diagonal(&roots))
}

/// Haar-distributed random orthonormal matrix (QR of a Gaussian matrix with
/// the diagonal of R made positive).
pub fn random_orthonormal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `max |Q^T Q - I|`.
pub fn orthonormality_defect(q: &DMatrix<f64>) -> f64 {
    let n = q.ncols();
    (q.transpose() * q - DMatrix::<f64>::identity(n, n)).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        &g * g.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=7 {
            let a = random_spd(n, &mut rng);
            let eig = symmetric_eigen(&a).unwrap();
            assert!((eig.reconstruct() - &a).amax() < 1e-10 * a.norm());
            assert!(orthonormality_defect(&eig.vectors) < 1e-12);
            for w in eig.values.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn jacobi_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 2.0, 2.0, 3.0]);
        let eig = symmetric_eigen(&a).unwrap();
        assert!((eig.values[0] - 5.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((eig.vectors[(0, 0)] - s).abs() < 1e-14);
        assert!((eig.vectors[(1, 0)] - s).abs() < 1e-14);
    }

    #[test]
    fn identity_keeps_standard_basis() {
        let a = DMatrix::<f64>::identity(4, 4) * 2.5;
        let eig = symmetric_eigen(&a).unwrap();
        assert_eq!(eig.vectors, DMatrix::identity(4, 4));
    }

    #[test]
    fn sign_convention() {
        let mut v = DVector::from_vec(vec![0.1, -0.9, 0.3]);
        fix_sign(&mut v);
        assert!(v[1] > 0.0);
        let mut w = DVector::from_vec(vec![-0.5, 0.5]);
        fix_sign(&mut w);
        assert_eq!(w[0], 0.5);
    }

    #[test]
    fn log_det_matches_eigen_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(5, &mut rng);
        let eig = symmetric_eigen(&a).unwrap();
        let expected: f64 = eig.values.iter().map(|v| v.ln()).sum();
        assert!((log_det_spd(&a).unwrap() - expected).abs() < 1e-11);
    }

    #[test]
    fn rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            require_positive_definite("A", &a),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(log_det_spd(&a).is_err());
        assert!(require_positive_semidefinite("A", &DMatrix::zeros(3, 3)).is_ok());
    }

    #[test]
    fn random_rotation_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = random_orthonormal(5, &mut rng);
        assert!(orthonormality_defect(&q) < 1e-12);
    }
}
