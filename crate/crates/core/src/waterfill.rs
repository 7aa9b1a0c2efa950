//! Relaxed optimal policy under an average unit-norm constraint.
//!
//! With `Lambda_i = m lambda_i / sigma^2`, the relaxed problem reduces to
//! maximizing `prod (1 + Lambda_i p_i)` subject to `sum p_i <= 1`, which is a
//! water-filling problem: `p_i = (mu - 1/Lambda_i)^+` with water level
//! `mu = (1 + sum_{i<=r} 1/Lambda_i) / r` over the `r` active channels.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{orthonormality_defect, symmetrize};

/// Relative tolerance for deciding `lambda_r > lambda_{r+1}`.
pub const CASE_TIE_REL_TOL: f64 = 1e-10;

const ORTHONORMAL_TOL: f64 = 1e-10;

fn require_nonincreasing(values: &[f64], what: &str) -> Result<()> {
    for w in values.windows(2) {
        if w[1] > w[0] * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::Domain(format!("{what} must be nonincreasing")));
        }
    }
    Ok(())
}

/// `Lambda_i = m lambda_i / sigma^2` for the `q = min(m, N)` largest strictly
/// positive eigenvalues.
pub fn effective_eigenvalues(lambdas: &[f64], m: usize, sigma2: f64) -> Result<Vec<f64>> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("sigma^2 must be positive, got {sigma2}")));
    }
    if m == 0 {
        return Err(Error::Domain("horizon m must be positive".into()));
    }
    if lambdas.iter().any(|&l| l < 0.0 || !l.is_finite()) {
        return Err(Error::Domain("eigenvalues must be finite and nonnegative".into()));
    }
    require_nonincreasing(lambdas, "eigenvalues")?;
    let positive: Vec<f64> = lambdas.iter().copied().filter(|&l| l > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::Degenerate("all eigenvalues are zero".into()));
    }
    let q = m.min(positive.len());
    Ok(positive[..q]
        .iter()
        .map(|&l| m as f64 * l / sigma2)
        .collect())
}

fn require_effective(effective: &[f64]) -> Result<()> {
    if effective.is_empty() {
        return Err(Error::Domain("no effective eigenvalues".into()));
    }
    if effective.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::Domain("effective eigenvalues must be positive".into()));
    }
    require_nonincreasing(effective, "effective eigenvalues")
}

/// Whether `1/Lambda_k < (1 + sum_{j<=k} 1/Lambda_j) / k` (1-based `k`).
pub fn lemma1_inequality(effective: &[f64], k: usize) -> bool {
    let inv_sum: f64 = effective[..k].iter().map(|l| 1.0 / l).sum();
    1.0 / effective[k - 1] < (1.0 + inv_sum) / k as f64
}

/// The number `r` of active channels: the inequality of
/// [`lemma1_inequality`] holds for every `k <= r` and fails for `k > r`.
pub fn find_r(effective: &[f64]) -> Result<usize> {
    require_effective(effective)?;
    let r = (1..=effective.len())
        .take_while(|&k| lemma1_inequality(effective, k))
        .count();
    // k = 1 always holds in exact arithmetic
    Ok(r.max(1))
}

/// True when the inequality holds exactly on `1..=r` and fails on `r+1..=q`.
pub fn lemma1_dichotomy(effective: &[f64], r: usize) -> bool {
    (1..=effective.len()).all(|k| lemma1_inequality(effective, k) == (k <= r))
}

/// `mu = (1 + sum_{i<=r} 1/Lambda_i) / r`.
pub fn water_level(effective: &[f64], r: usize) -> f64 {
    (1.0 + effective[..r].iter().map(|l| 1.0 / l).sum::<f64>()) / r as f64
}

/// `p_i = (mu - 1/Lambda_i)^+`.
pub fn allocations(effective: &[f64], mu: f64) -> Vec<f64> {
    effective.iter().map(|l| (mu - 1.0 / l).max(0.0)).collect()
}

/// Optimal relaxed net gain
/// `(1/2) log prod_{i<=r} (Lambda_i / r + (1/r) sum_{j<=r} Lambda_i / Lambda_j)`.
pub fn relaxed_optimal_value(effective: &[f64]) -> Result<f64> {
    let r = find_r(effective)?;
    let rf = r as f64;
    let active = &effective[..r];
    Ok(0.5
        * active
            .iter()
            .map(|li| (li / rf + active.iter().map(|lj| li / lj).sum::<f64>() / rf).ln())
            .sum::<f64>())
}

/// `M_k = ((1 + sum_{j<=k} 1/Lambda_j) / k)^k prod_{i<=k} Lambda_i` for
/// `k = 1..q`; strictly increasing up to `k = r`.
pub fn lemma2_sequence(effective: &[f64]) -> Vec<f64> {
    (1..=effective.len())
        .map(|k| {
            let level = water_level(effective, k);
            let log_m = k as f64 * level.ln() + effective[..k].iter().map(|l| l.ln()).sum::<f64>();
            log_m.exp()
        })
        .collect()
}

/// `(1/2) log prod (1 + Lambda_i p_i)`.
pub fn allocation_gain(effective: &[f64], p: &[f64]) -> f64 {
    0.5 * effective
        .iter()
        .zip(p)
        .map(|(l, p)| (l * p).ln_1p())
        .sum::<f64>()
}

/// Closed-form solution of the relaxed problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaterFillSolution {
    /// `Lambda_1 >= ... >= Lambda_q > 0`
    pub effective: Vec<f64>,
    pub r: usize,
    pub mu: f64,
    pub p: Vec<f64>,
    /// `H_R` in nats.
    pub relaxed_gain: f64,
    pub q: usize,
    /// Horizon `m` the effective eigenvalues were scaled with.
    pub horizon: usize,
}

impl WaterFillSolution {
    /// Solves the relaxed problem for eigenvalues `lambdas` of `D_0`
    /// (nonincreasing), horizon `m` and total noise variance `sigma2`.
    pub fn solve(lambdas: &[f64], m: usize, sigma2: f64) -> Result<Self> {
        let effective = effective_eigenvalues(lambdas, m, sigma2)?;
        let r = find_r(&effective)?;
        let mu = water_level(&effective, r);
        let p = allocations(&effective, mu);
        let relaxed_gain = relaxed_optimal_value(&effective)?;
        Ok(Self {
            q: effective.len(),
            effective,
            r,
            mu,
            p,
            relaxed_gain,
            horizon: m,
        })
    }
}

/// Which family of optimal matrices a solution falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OptimalCase {
    /// `lambda_r > lambda_{r+1}` or `r = N`: `G0 U1`.
    Distinct,
    /// `lambda_i = lambda_r` exactly for `r - alpha < i <= r + beta`:
    /// `blockdiag(I, U2, I) G0 U1`.
    Tied { alpha: usize, beta: usize },
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= CASE_TIE_REL_TOL * a.abs().max(b.abs())
}

/// Determines the optimal-matrix case for `solution` given the full spectrum
/// `lambda_1..lambda_K` of `D_0`.
pub fn optimal_case(solution: &WaterFillSolution, lambdas_full: &[f64]) -> Result<OptimalCase> {
    let r = solution.r;
    if r > lambdas_full.len() {
        return Err(Error::CaseSelection(format!(
            "r = {r} exceeds the spectrum length {}",
            lambdas_full.len()
        )));
    }
    let lr = lambdas_full[r - 1];
    if r == lambdas_full.len() || !tied(lr, lambdas_full[r]) {
        return Ok(OptimalCase::Distinct);
    }
    let n = lambdas_full.iter().filter(|&&l| l > 0.0).count();
    if !(r == solution.q && r == solution.horizon && r < n) {
        return Err(Error::CaseSelection(format!(
            "tied eigenvalue at r = {r} requires r = q = m < N (q = {}, m = {}, N = {n})",
            solution.q, solution.horizon
        )));
    }
    let alpha = lambdas_full[..r].iter().rev().take_while(|&&l| tied(l, lr)).count();
    let beta = lambdas_full[r..].iter().take_while(|&&l| tied(l, lr)).count();
    Ok(OptimalCase::Tied { alpha, beta })
}

/// Builds an optimal K x m matrix `G~` for the relaxed problem.
///
/// `u1` is any m x m orthonormal matrix. `u2` is only admissible in the tied
/// case, where it is an (alpha + beta) square orthonormal matrix; it defaults
/// to the identity.
pub fn construct_gtilde(
    solution: &WaterFillSolution,
    lambdas_full: &[f64],
    u1: &DMatrix<f64>,
    u2: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    let m = solution.horizon;
    let k = lambdas_full.len();
    if u1.shape() != (m, m) {
        return Err(Error::DimensionMismatch {
            what: "U1",
            expected: format!("{m}x{m}"),
            found: format!("{}x{}", u1.nrows(), u1.ncols()),
        });
    }
    if orthonormality_defect(u1) > ORTHONORMAL_TOL {
        return Err(Error::Domain("U1 is not orthonormal".into()));
    }

    let mut g0 = DMatrix::<f64>::zeros(k, m);
    for i in 0..solution.r {
        g0[(i, i)] = solution.p[i].sqrt();
    }

    let case = optimal_case(solution, lambdas_full)?;
    let left = match (case, u2) {
        (OptimalCase::Distinct, Some(_)) => {
            return Err(Error::CaseSelection(
                "U2 rotation given but lambda_r > lambda_{r+1}".into(),
            ))
        }
        (OptimalCase::Distinct, None) => None,
        (OptimalCase::Tied { alpha, beta }, u2) => {
            let size = alpha + beta;
            let mut block = DMatrix::<f64>::identity(k, k);
            if let Some(u2) = u2 {
                if u2.shape() != (size, size) {
                    return Err(Error::DimensionMismatch {
                        what: "U2",
                        expected: format!("{size}x{size}"),
                        found: format!("{}x{}", u2.nrows(), u2.ncols()),
                    });
                }
                if orthonormality_defect(u2) > ORTHONORMAL_TOL {
                    return Err(Error::Domain("U2 is not orthonormal".into()));
                }
                let start = solution.r - alpha;
                block.view_mut((start, start), (size, size)).copy_from(u2);
            }
            Some(block)
        }
    };

    let g = match left {
        Some(block) => block * g0 * u1,
        None => g0 * u1,
    };
    Ok(g)
}

/// Relaxed objective `(1/2) log det(I_m + G~^T diag(Lambda~) G~)`, where
/// `effective_full` holds `m lambda_i / sigma^2` for all K eigenvalues.
pub fn relaxed_objective(gtilde: &DMatrix<f64>, effective_full: &[f64]) -> f64 {
    let m = gtilde.ncols();
    let weights = DMatrix::from_diagonal(&DVector::from_row_slice(effective_full));
    let inner = symmetrize(&(DMatrix::identity(m, m) + gtilde.transpose() * weights * gtilde));
    let chol = inner.cholesky().expect("I + G^T Lambda G is positive definite");
    chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Maps the columns of `G~` back to compressors `a_1..a_m`.
///
/// `g_k = (sqrt(m) / sigma) g~_k`, `c_k = V g_k`, and `a_k` is the unique
/// multiple of `c_k` with `c_k = a_k / sqrt(|a_k|^2 sigma_n^2 + sigma_w^2)`.
/// Zero columns map to zero compressors.
pub fn recover_compressors(
    gtilde: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    m: usize,
    sigma_n2: f64,
    sigma_w2: f64,
) -> Result<Vec<DVector<f64>>> {
    if gtilde.ncols() != m || gtilde.nrows() != basis.nrows() || !basis.is_square() {
        return Err(Error::DimensionMismatch {
            what: "G~ / V",
            expected: format!("{0}x{m} and {0}x{0}", basis.nrows()),
            found: format!(
                "{}x{} and {}x{}",
                gtilde.nrows(),
                gtilde.ncols(),
                basis.nrows(),
                basis.ncols()
            ),
        });
    }
    let sigma = (sigma_n2 + sigma_w2).sqrt();
    let scale = (m as f64).sqrt() / sigma;
    (0..m)
        .map(|k| {
            let c = basis * gtilde.column(k) * scale;
            let c2 = c.norm_squared();
            if c2 == 0.0 {
                return Ok(c);
            }
            let value = c2 * sigma_n2;
            if value >= 1.0 {
                return Err(Error::InfeasibleRecovery { column: k, value });
            }
            Ok(c * (sigma_w2 / (1.0 - value)).sqrt())
        })
        .collect()
}

/// Inverse of [`recover_compressors`]: `c_k = a_k / sqrt(|a_k|^2 sigma_n^2 + sigma_w^2)`,
/// `g_k = V^T c_k`, `g~_k = sigma g_k / sqrt(m)`.
pub fn compressors_to_gtilde(
    compressors: &[DVector<f64>],
    basis: &DMatrix<f64>,
    sigma_n2: f64,
    sigma_w2: f64,
) -> DMatrix<f64> {
    let m = compressors.len();
    let sigma = (sigma_n2 + sigma_w2).sqrt();
    let scale = sigma / (m as f64).sqrt();
    let mut g = DMatrix::<f64>::zeros(basis.nrows(), m);
    for (k, a) in compressors.iter().enumerate() {
        let c = a / (a.norm_squared() * sigma_n2 + sigma_w2).sqrt();
        g.set_column(k, &(basis.transpose() * c * scale));
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_eigenvalue_examples() {
        assert_eq!(effective_eigenvalues(&[5.0, 1.0], 2, 1.0).unwrap(), vec![10.0, 2.0]);
        assert_eq!(effective_eigenvalues(&[1.0], 1, 1.0).unwrap(), vec![1.0]);
        assert_eq!(effective_eigenvalues(&[3.0, 2.0, 0.0, 0.0], 4, 2.0).unwrap(), vec![6.0, 4.0]);
        assert_eq!(effective_eigenvalues(&[3.0, 2.0, 1.0], 2, 1.0).unwrap(), vec![6.0, 4.0]);
        assert!(matches!(
            effective_eigenvalues(&[0.0, 0.0], 2, 1.0),
            Err(Error::Degenerate(_))
        ));
        assert!(effective_eigenvalues(&[1.0, 2.0], 2, 1.0).is_err());
        assert!(effective_eigenvalues(&[1.0], 1, 0.0).is_err());
    }

    #[test]
    fn find_r_examples() {
        assert_eq!(find_r(&[10.0, 2.0]).unwrap(), 2);
        assert_eq!(find_r(&[7.0]).unwrap(), 1);
        assert_eq!(find_r(&[100.0, 0.001]).unwrap(), 1);
        assert!(lemma1_dichotomy(&[100.0, 0.001], 1));
        assert!(find_r(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn water_level_and_allocations() {
        assert!((water_level(&[10.0, 2.0], 2) - 0.8).abs() < 1e-15);
        assert!((water_level(&[4.0], 1) - 1.25).abs() < 1e-15);
        assert!((water_level(&[3.0; 3], 3) - (1.0 / 3.0 + 1.0 / 3.0)).abs() < 1e-15);

        let p = allocations(&[10.0, 2.0], 0.8);
        assert!((p[0] - 0.7).abs() < 1e-15 && (p[1] - 0.3).abs() < 1e-15);
        assert_eq!(allocations(&[4.0], 1.25), vec![1.0]);
        let p = allocations(&[5.0; 4], water_level(&[5.0; 4], 4));
        assert!(p.iter().all(|x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn relaxed_value_examples() {
        let h = relaxed_optimal_value(&[10.0, 2.0]).unwrap();
        assert!((h - 0.5 * 12.8_f64.ln()).abs() < 1e-14);
        assert!((relaxed_optimal_value(&[3.0]).unwrap() - 0.5 * 4.0_f64.ln()).abs() < 1e-15);
        let s = WaterFillSolution::solve(&[5.0, 1.0], 2, 1.0).unwrap();
        assert!((allocation_gain(&s.effective, &s.p) - s.relaxed_gain).abs() < 1e-14);
        assert!((s.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gtilde_identity_rotation() {
        let s = WaterFillSolution::solve(&[5.0, 1.0], 2, 1.0).unwrap();
        let g = construct_gtilde(&s, &[5.0, 1.0], &DMatrix::identity(2, 2), None).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.7_f64.sqrt(), 0.0, 0.0, 0.3_f64.sqrt()]);
        assert!((g.clone() - expected).amax() < 1e-15);
        assert!(((g.transpose() * &g).trace() - 1.0).abs() < 1e-12);
        assert!((relaxed_objective(&g, &[10.0, 2.0]) - s.relaxed_gain).abs() < 1e-12);
    }

    #[test]
    fn distinct_case_rejects_u2() {
        let s = WaterFillSolution::solve(&[5.0, 1.0], 2, 1.0).unwrap();
        let err = construct_gtilde(&s, &[5.0, 1.0], &DMatrix::identity(2, 2), Some(&DMatrix::identity(2, 2)));
        assert!(matches!(err, Err(Error::CaseSelection(_))));
    }

    #[test]
    fn tied_case_accepts_u2() {
        // lambda = (4, 1, 1), m = 2: r = q = m = 2 < N = 3 with lambda_2 = lambda_3
        let lambdas = [4.0, 1.0, 1.0];
        let s = WaterFillSolution::solve(&lambdas, 2, 1.0).unwrap();
        assert_eq!(s.r, 2);
        assert_eq!(
            optimal_case(&s, &lambdas).unwrap(),
            OptimalCase::Tied { alpha: 1, beta: 1 }
        );
        let (c, sn) = (0.6, 0.8);
        let u2 = DMatrix::from_row_slice(2, 2, &[c, -sn, sn, c]);
        let g = construct_gtilde(&s, &lambdas, &DMatrix::identity(2, 2), Some(&u2)).unwrap();
        let full: Vec<f64> = lambdas.iter().map(|l| 2.0 * l).collect();
        assert!((relaxed_objective(&g, &full) - s.relaxed_gain).abs() < 1e-12);
        assert!(((g.transpose() * &g).trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovery_without_channel_noise_scales_by_sigma_w() {
        let basis = DMatrix::identity(2, 2);
        let g = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        let sigma_w2: f64 = 4.0;
        let a = recover_compressors(&g, &basis, 2, 0.0, sigma_w2).unwrap();
        let c = &basis * g.column(0) * (2.0_f64.sqrt() / sigma_w2.sqrt());
        assert!((&a[0] - c * sigma_w2.sqrt()).amax() < 1e-15);
    }

    #[test]
    fn infeasible_recovery() {
        // all energy in one of two columns: |c|^2 sigma_n^2 = 2 sigma_n^2 / sigma^2 > 1
        let basis = DMatrix::identity(1, 1);
        let g = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let err = recover_compressors(&g, &basis, 2, 0.9, 0.05).unwrap_err();
        assert!(matches!(err, Error::InfeasibleRecovery { column: 0, .. }));
    }

    #[test]
    fn zero_columns_recover_to_zero() {
        let s = WaterFillSolution::solve(&[100.0, 0.001], 2, 1.0).unwrap();
        assert_eq!(s.r, 1);
        let g = construct_gtilde(&s, &[100.0, 0.001], &DMatrix::identity(2, 2), None).unwrap();
        let a = recover_compressors(&g, &DMatrix::identity(2, 2), 2, 0.0, 1.0).unwrap();
        assert_eq!(a[1], DVector::zeros(2));
    }
}
