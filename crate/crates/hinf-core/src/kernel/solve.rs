//! Linear solves via LU factorization with partial pivoting.
//!
//! Every solve carries an explicit 1-norm condition estimate; systems with
//! estimates above the configured bound are rejected rather than silently
//! returning garbage, because downstream consumers (gain computation,
//! level tests) must be able to trust the result.

use ndarray::Array2;

use super::{check_finite, check_square, norm_1, Mat};
use crate::error::Error;
use crate::tolerances::Tolerances;
use crate::Result;

/// LU factorization `PA = LU` of a square matrix.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
    norm_a: f64,
}

impl LuFactors {
    /// Factorizes `a`, failing on exactly singular pivots.
    pub fn factor(a: &Mat) -> Result<Self> {
        let n = check_square(a)?;
        check_finite(a, "lu factor")?;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            // Partial pivoting on column k.
            let mut pivot_row = k;
            let mut pivot_val = lu[[k, k]].abs();
            for i in (k + 1)..n {
                let v = lu[[i, k]].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = i;
                }
            }
            if pivot_val == 0.0 {
                return Err(Error::IllConditioned {
                    condition: f64::INFINITY,
                });
            }
            if pivot_row != k {
                for j in 0..n {
                    let tmp = lu[[k, j]];
                    lu[[k, j]] = lu[[pivot_row, j]];
                    lu[[pivot_row, j]] = tmp;
                }
                perm.swap(k, pivot_row);
                sign = -sign;
            }
            let pivot = lu[[k, k]];
            for i in (k + 1)..n {
                let factor = lu[[i, k]] / pivot;
                lu[[i, k]] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        let v = lu[[k, j]];
                        lu[[i, j]] -= factor * v;
                    }
                }
            }
        }
        Ok(LuFactors {
            lu,
            perm,
            sign,
            norm_a: norm_1(a),
        })
    }

    fn order(&self) -> usize {
        self.lu.nrows()
    }

    /// Solves `AX = B` for a matrix of right-hand sides.
    pub fn solve(&self, b: &Mat) -> Result<Mat> {
        let n = self.order();
        if b.nrows() != n {
            return Err(Error::dims(
                "solve rhs",
                format!("{} rows", n),
                format!("{} rows", b.nrows()),
            ));
        }
        check_finite(b, "lu solve rhs")?;
        let m = b.ncols();
        let mut x = Array2::zeros((n, m));
        for j in 0..m {
            for i in 0..n {
                x[[i, j]] = b[[self.perm[i], j]];
            }
        }
        // Forward substitution with unit lower factor.
        for k in 0..n {
            for i in (k + 1)..n {
                let factor = self.lu[[i, k]];
                if factor != 0.0 {
                    for j in 0..m {
                        let v = x[[k, j]];
                        x[[i, j]] -= factor * v;
                    }
                }
            }
        }
        // Back substitution.
        for i in (0..n).rev() {
            let pivot = self.lu[[i, i]];
            for j in 0..m {
                let mut acc = x[[i, j]];
                for k in (i + 1)..n {
                    acc -= self.lu[[i, k]] * x[[k, j]];
                }
                x[[i, j]] = acc / pivot;
            }
        }
        Ok(x)
    }

    /// Exact 1-norm condition number `‖A‖₁ ‖A⁻¹‖₁`, computed from the full
    /// inverse (cheap at the dimensions this crate handles).
    pub fn condition(&self) -> Result<f64> {
        let n = self.order();
        if n == 0 {
            return Ok(1.0);
        }
        let inv = self.solve(&Array2::eye(n))?;
        if !inv.iter().all(|v| v.is_finite()) {
            return Ok(f64::INFINITY);
        }
        Ok(self.norm_a * norm_1(&inv))
    }

    /// Determinant from the pivot product.
    pub fn det(&self) -> f64 {
        let n = self.order();
        let mut d = self.sign;
        for i in 0..n {
            d *= self.lu[[i, i]];
        }
        d
    }
}

/// Solves `AX = B` with the standard condition bound.
pub fn solve_linear(a: &Mat, b: &Mat) -> Result<Mat> {
    solve_linear_with(a, b, &Tolerances::standard())
}

/// Solves `AX = B`, rejecting systems whose 1-norm condition estimate
/// exceeds `tol.max_condition`.
pub fn solve_linear_with(a: &Mat, b: &Mat, tol: &Tolerances) -> Result<Mat> {
    let lu = LuFactors::factor(a)?;
    let condition = lu.condition()?;
    if !condition.is_finite() || condition > tol.max_condition {
        return Err(Error::IllConditioned { condition });
    }
    lu.solve(b)
}

/// Determinant of a square matrix.
pub fn determinant(a: &Mat) -> Result<f64> {
    let n = check_square(a)?;
    check_finite(a, "determinant")?;
    if n == 0 {
        return Ok(1.0);
    }
    match LuFactors::factor(a) {
        Ok(lu) => Ok(lu.det()),
        // An exactly zero pivot means a zero determinant.
        Err(Error::IllConditioned { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::max_abs;
    use ndarray::array;

    #[test]
    fn identity_returns_rhs() {
        let b = array![[1.0, 2.0], [3.0, 4.0]];
        let x = solve_linear(&Array2::eye(2), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_solve() {
        let a = array![[2.0, 0.0], [0.0, 4.0]];
        let b = array![[2.0], [4.0]];
        let x = solve_linear(&a, &b).unwrap();
        assert!((x[[0, 0]] - 1.0).abs() < 1e-15);
        assert!((x[[1, 0]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_two_by_two() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let b = array![[3.0], [3.0]];
        let x = solve_linear(&a, &b).unwrap();
        assert!((x[[0, 0]] - 1.0).abs() < 1e-14);
        assert!((x[[1, 0]] - 1.0).abs() < 1e-14);
        // Substitute back: ‖AX − B‖ ≤ 1e-9·‖A‖·‖X‖.
        let res = &a.dot(&x) - &b;
        assert!(max_abs(&res) <= 1e-9 * norm_1(&a) * norm_1(&x));
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        let b = array![[1.0], [1.0]];
        assert!(matches!(
            solve_linear(&a, &b),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn ill_conditioned_rejected_with_estimate() {
        let a = array![[1.0, 1.0], [1.0, 1.0 + 1e-14]];
        let b = array![[1.0], [1.0]];
        match solve_linear(&a, &b) {
            Err(Error::IllConditioned { condition }) => assert!(condition > 1e12),
            other => panic!("expected ill-conditioned, got {other:?}"),
        }
    }

    #[test]
    fn determinant_of_permuted_diagonal() {
        let a = array![[0.0, 2.0], [3.0, 0.0]];
        assert!((determinant(&a).unwrap() + 6.0).abs() < 1e-14);
        let singular = array![[1.0, 2.0], [2.0, 4.0]];
        assert_eq!(determinant(&singular).unwrap(), 0.0);
    }

    #[test]
    fn condition_of_identity_is_one() {
        let lu = LuFactors::factor(&Array2::eye(3)).unwrap();
        assert!((lu.condition().unwrap() - 1.0).abs() < 1e-14);
    }
}
