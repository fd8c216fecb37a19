//! Singular values via one-sided Jacobi orthogonalization.
//!
//! One-sided Jacobi computes singular values with high relative accuracy,
//! which the rank tests rely on: a Gram-matrix route would square the
//! condition number and could not resolve the 1e-9 relative rank threshold
//! in double precision.  Complex inputs go through the real 2n-embedding,
//! which exactly duplicates every singular value.

use super::{check_finite, complex_embedding, Mat};
use crate::error::Error;
use crate::Result;

/// All singular values of a real matrix, sorted descending.
pub fn singular_values(m: &Mat) -> Result<Vec<f64>> {
    check_finite(m, "singular_values")?;
    let (r, c) = m.dim();
    if r == 0 || c == 0 {
        return Ok(Vec::new());
    }
    // Work on a tall copy: one-sided Jacobi orthogonalizes columns.
    let mut a = if r >= c { m.clone() } else { m.t().to_owned() };
    let (rows, cols) = a.dim();

    const MAX_SWEEPS: usize = 64;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for k in 0..rows {
                    let ai = a[[k, i]];
                    let aj = a[[k, j]];
                    alpha += ai * ai;
                    beta += aj * aj;
                    gamma += ai * aj;
                }
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Rotation zeroing the (i,j) inner product.
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let ai = a[[k, i]];
                    let aj = a[[k, j]];
                    a[[k, i]] = c * ai - s * aj;
                    a[[k, j]] = s * ai + c * aj;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            algorithm: "one-sided jacobi SVD",
            iterations: MAX_SWEEPS,
        });
    }

    let mut sigma: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|k| a[[k, j]] * a[[k, j]]).sum::<f64>().sqrt())
        .collect();
    sigma.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(sigma)
}

/// Largest singular value of a real matrix.
pub fn sv_max(m: &Mat) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// All singular values of a complex matrix given by its real and imaginary
/// parts, sorted descending.
///
/// The real embedding carries each singular value with multiplicity two;
/// the duplicates are collapsed pairwise after sorting.
pub fn singular_values_complex(re: &Mat, im: &Mat) -> Result<Vec<f64>> {
    let embedded = complex_embedding(re, im)?;
    let doubled = singular_values(&embedded)?;
    // Entries come in equal adjacent pairs: average each pair.
    let mut out = Vec::with_capacity(doubled.len() / 2);
    let mut k = 0;
    while k + 1 < doubled.len() {
        out.push(0.5 * (doubled[k] + doubled[k + 1]));
        k += 2;
    }
    Ok(out)
}

/// Largest singular value of a complex matrix given by parts.
pub fn sv_max_complex(re: &Mat, im: &Mat) -> Result<f64> {
    Ok(singular_values_complex(re, im)?
        .first()
        .copied()
        .unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::spectral_radius;
    use ndarray::{array, Array2};

    #[test]
    fn identity_has_unit_singular_values() {
        let sv = singular_values(&Array2::eye(4)).unwrap();
        assert_eq!(sv, vec![1.0; 4]);
        assert_eq!(sv_max(&Array2::eye(4)).unwrap(), 1.0);
    }

    #[test]
    fn diagonal_singular_values() {
        let m = array![[3.0, 0.0], [0.0, 4.0]];
        assert_eq!(sv_max(&m).unwrap(), 4.0);
    }

    #[test]
    fn golden_ratio_case() {
        // [[1,1],[0,1]] has σ_max² = (3+√5)/2, i.e. σ_max = golden ratio.
        let m = array![[1.0, 1.0], [0.0, 1.0]];
        let phi = 0.5 * (1.0 + 5.0_f64.sqrt());
        let got = sv_max(&m).unwrap();
        assert!((got - phi).abs() < 1e-12, "got {got}");
        assert!((got - 1.618034).abs() < 5e-7);
    }

    #[test]
    fn squares_match_gram_spectral_radius() {
        let m = array![
            [0.3, -1.2, 0.7],
            [2.0, 0.1, -0.4],
            [-0.6, 0.9, 1.5],
            [0.2, 0.0, -1.0]
        ];
        let smax = sv_max(&m).unwrap();
        let gram = m.t().dot(&m);
        let rho = spectral_radius(&gram).unwrap();
        assert!((smax * smax - rho).abs() <= 1e-9 * rho.max(1.0));
    }

    #[test]
    fn wide_matrix_handled_by_transpose() {
        let m = array![[0.0, 2.0, 0.0], [1.0, 0.0, 0.0]];
        let sv = singular_values(&m).unwrap();
        assert_eq!(sv.len(), 2);
        assert!((sv[0] - 2.0).abs() < 1e-14);
        assert!((sv[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rank_deficiency_gives_zero_singular_value() {
        let m = array![[1.0, 2.0], [2.0, 4.0]];
        let sv = singular_values(&m).unwrap();
        assert!(sv[1] <= 1e-12 * sv[0]);
    }

    #[test]
    fn complex_identity_embedding() {
        // i·I has singular values 1.
        let re = Array2::zeros((2, 2));
        let im = Array2::eye(2);
        let sv = singular_values_complex(&re, &im).unwrap();
        assert_eq!(sv.len(), 2);
        assert!((sv[0] - 1.0).abs() < 1e-13);
        assert!((sv[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn complex_rectangular_matches_hand_value() {
        // M = [[1+i], [1-i]]: MᴴM = 4 → σ = 2.
        let re = array![[1.0], [1.0]];
        let im = array![[1.0], [-1.0]];
        let sv = singular_values_complex(&re, &im).unwrap();
        assert_eq!(sv.len(), 1);
        assert!((sv[0] - 2.0).abs() < 1e-13);
    }
}
