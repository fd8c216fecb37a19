//! Dense real/complex matrix numerics used by every other module.
//!
//! The dimensions handled by this crate are tiny (a few dozen at most), so
//! every algorithm favors robustness and auditability over asymptotic
//! speed: cyclic Jacobi for symmetric eigenproblems, Householder reduction
//! followed by Francis double-shift QR for general eigenvalues, one-sided
//! Jacobi for singular values, and partially pivoted LU with an explicit
//! condition estimate for linear solves.  Complex-valued matrices are
//! handled through the real 2n-embedding `[[Re, -Im], [Im, Re]]`.

mod general;
mod solve;
mod svd;
mod symmetric;

use ndarray::Array2;
pub use num_complex::Complex64;

use crate::error::Error;
use crate::tolerances::Tolerances;
use crate::Result;

pub use general::{eig_general, hessenberg, solve_hessenberg_shifted};
pub use solve::{determinant, solve_linear, solve_linear_with, LuFactors};
pub use svd::{singular_values, singular_values_complex, sv_max, sv_max_complex};
pub use symmetric::{eig_sym, eig_sym_with, SymmetricEigen};

/// Dense real matrix in row-major semantics.
pub type Mat = Array2<f64>;

/// The eigenvalues of a square matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Eigenvalues; real and sorted ascending when the source was
    /// symmetric, otherwise in the order produced by the QR iteration.
    pub eigenvalues: Vec<Complex64>,
    /// Whether the source matrix was real symmetric (all imaginary parts
    /// are exactly zero in that case).
    pub real_symmetric_source: bool,
}

impl Spectrum {
    /// Largest eigenvalue magnitude.
    pub fn radius(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Real parts, in stored order.
    pub fn real_parts(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.re).collect()
    }

    /// Number of eigenvalues.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Whether the spectrum is empty (0×0 source).
    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Largest eigenvalue magnitude of a square matrix.
pub fn spectral_radius(m: &Mat) -> Result<f64> {
    Ok(eig_general(m)?.radius())
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == 0.0 {
                continue;
            }
            for p in 0..br {
                for q in 0..bc {
                    out[[i * br + p, j * bc + q]] = aij * b[[p, q]];
                }
            }
        }
    }
    out
}

/// Real 2n-embedding `[[Re, -Im], [Im, Re]]` of a complex matrix given by
/// its real and imaginary parts.
pub fn complex_embedding(re: &Mat, im: &Mat) -> Result<Mat> {
    if re.dim() != im.dim() {
        return Err(Error::dims(
            "complex_embedding",
            format!("{:?}", re.dim()),
            format!("{:?}", im.dim()),
        ));
    }
    let (r, c) = re.dim();
    let mut out = Array2::zeros((2 * r, 2 * c));
    for i in 0..r {
        for j in 0..c {
            out[[i, j]] = re[[i, j]];
            out[[i, j + c]] = -im[[i, j]];
            out[[i + r, j]] = im[[i, j]];
            out[[i + r, j + c]] = re[[i, j]];
        }
    }
    Ok(out)
}

/// Maximum absolute entry, used as a scale for tolerance comparisons.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm_1(m: &Mat) -> f64 {
    let (r, c) = m.dim();
    (0..c)
        .map(|j| (0..r).map(|i| m[[i, j]].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn norm_fro(m: &Mat) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Errors unless every entry of `m` is finite.
pub fn check_finite(m: &Mat, context: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
        })
    }
}

/// Errors unless `m` is square; returns its order.
pub fn check_square(m: &Mat) -> Result<usize> {
    let (r, c) = m.dim();
    if r == c {
        Ok(r)
    } else {
        Err(Error::NonSquare { rows: r, cols: c })
    }
}

/// Symmetrizes `m` by averaging with its transpose, rejecting inputs whose
/// deviation from symmetry exceeds `tol.symmetry` relative to the largest
/// entry.
pub fn symmetrize(m: &Mat, tol: &Tolerances) -> Result<Mat> {
    let n = check_square(m)?;
    check_finite(m, "symmetrize")?;
    let scale = max_abs(m).max(1.0);
    let mut deviation = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            deviation = deviation.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    if deviation > tol.symmetry * scale {
        return Err(Error::NotSymmetric {
            deviation,
            tolerance: tol.symmetry * scale,
        });
    }
    let mut out = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[[i, j]] + m[[j, i]]);
            out[[i, j]] = avg;
            out[[j, i]] = avg;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn kron_identity_times_scalar_block() {
        let i2 = Array2::eye(2);
        let b = array![[5.0]];
        let k = kron(&i2, &b);
        assert_eq!(k, array![[5.0, 0.0], [0.0, 5.0]]);
    }

    #[test]
    fn kron_identity_factor_gives_block_diagonal() {
        let i2 = Array2::eye(2);
        let b = array![[1.0, 2.0], [3.0, 4.0]];
        let k = kron(&i2, &b);
        assert_eq!(k.dim(), (4, 4));
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(k[[i, j]], b[[i, j]]);
                assert_eq!(k[[i + 2, j + 2]], b[[i, j]]);
                assert_eq!(k[[i, j + 2]], 0.0);
                assert_eq!(k[[i + 2, j]], 0.0);
            }
        }
    }

    #[test]
    fn kron_permutation_times_scalar() {
        let p = array![[0.0, 1.0], [1.0, 0.0]];
        let b = array![[2.0]];
        assert_eq!(kron(&p, &b), array![[0.0, 2.0], [2.0, 0.0]]);
    }

    #[test]
    fn kron_mixed_product_identity() {
        // (A ⊗ B)(C ⊗ D) = (AC) ⊗ (BD)
        let a = array![[1.0, 2.0], [0.5, -1.0]];
        let b = array![[0.0, 1.0], [1.0, 1.0]];
        let c = array![[2.0, -1.0], [1.0, 3.0]];
        let d = array![[1.0, 0.5], [-0.5, 2.0]];
        let lhs = kron(&a, &b).dot(&kron(&c, &d));
        let rhs = kron(&a.dot(&c), &b.dot(&d));
        let diff = &lhs - &rhs;
        assert!(max_abs(&diff) < 1e-12);
    }

    #[test]
    fn symmetrize_rejects_asymmetric() {
        let m = array![[1.0, 2.0], [1.0, 1.0]];
        let tol = Tolerances::standard();
        assert!(matches!(
            symmetrize(&m, &tol),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn embedding_shape_and_layout() {
        let re = array![[1.0, 2.0]];
        let im = array![[3.0, 4.0]];
        let e = complex_embedding(&re, &im).unwrap();
        assert_eq!(e, array![[1.0, 2.0, -3.0, -4.0], [3.0, 4.0, 1.0, 2.0]]);
    }
}
