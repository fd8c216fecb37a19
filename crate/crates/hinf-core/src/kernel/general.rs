//! General (nonsymmetric) eigenvalues: Householder reduction to upper
//! Hessenberg form followed by Francis double-shift QR iteration.
//!
//! The QR iteration follows the classic EISPACK/Handbook `hqr` scheme
//! (Martin–Peters–Wilkinson) with the usual exceptional shifts, but stops
//! with an explicit error instead of looping forever when a subdiagonal
//! entry refuses to deflate.  The Hessenberg form is also exposed directly
//! because the H∞ frequency sweep factors `(e^{jθ}I − A)` once per system
//! and then solves one small Hessenberg system per grid point.

use ndarray::Array2;
use num_complex::Complex64;

use super::{check_finite, check_square, Mat, Spectrum};
use crate::error::Error;
use crate::Result;

/// Reduces `a` to upper Hessenberg form, returning `(H, Q)` with
/// `H = QᵀAQ` and `Q` orthogonal.
pub fn hessenberg(a: &Mat) -> Result<(Mat, Mat)> {
    let n = check_square(a)?;
    check_finite(a, "hessenberg")?;
    let mut h = a.clone();
    let mut q: Mat = Array2::eye(n);
    if n <= 2 {
        return Ok((h, q));
    }

    // Householder vectors, kept to accumulate Q afterwards.
    let mut ort = vec![0.0_f64; n];
    let mut stored: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut gammas = vec![0.0_f64; n];

    for m in 1..(n - 1) {
        let scale: f64 = (m..n).map(|i| h[[i, m - 1]].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hsum = 0.0;
        for i in (m..n).rev() {
            ort[i] = h[[i, m - 1]] / scale;
            hsum += ort[i] * ort[i];
        }
        let mut g = hsum.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hsum -= ort[m] * g;
        ort[m] -= g;

        // Apply the similarity transform (I − uuᵀ/h) H (I − uuᵀ/h).
        for j in m..n {
            let mut f = 0.0;
            for i in (m..n).rev() {
                f += ort[i] * h[[i, j]];
            }
            f /= hsum;
            for i in m..n {
                h[[i, j]] -= f * ort[i];
            }
        }
        for i in 0..n {
            let mut f = 0.0;
            for j in (m..n).rev() {
                f += ort[j] * h[[i, j]];
            }
            f /= hsum;
            for j in m..n {
                h[[i, j]] -= f * ort[j];
            }
        }
        h[[m, m - 1]] = scale * g;
        stored[m] = ort[m..n].to_vec();
        gammas[m] = hsum;
    }

    // Accumulate Q from the stored Householder vectors (back to front).
    for m in (1..(n - 1)).rev() {
        if stored[m].is_empty() || gammas[m] == 0.0 {
            continue;
        }
        let u = &stored[m];
        for j in 0..n {
            let mut f = 0.0;
            for (off, ui) in u.iter().enumerate() {
                f += ui * q[[m + off, j]];
            }
            f /= gammas[m];
            for (off, ui) in u.iter().enumerate() {
                q[[m + off, j]] -= f * ui;
            }
        }
    }

    // Clear the sub-Hessenberg part, which still holds reduction leftovers.
    for i in 2..n {
        for j in 0..(i - 1) {
            h[[i, j]] = 0.0;
        }
    }
    Ok((h, q))
}

/// Eigenvalues of a general square real matrix.
///
/// Signals [`Error::NoConvergence`] if the QR iteration fails to deflate;
/// it never returns partially converged values.
pub fn eig_general(m: &Mat) -> Result<Spectrum> {
    let n = check_square(m)?;
    check_finite(m, "eig_general")?;
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
            real_symmetric_source: false,
        });
    }
    if n == 1 {
        return Ok(Spectrum {
            eigenvalues: vec![Complex64::new(m[[0, 0]], 0.0)],
            real_symmetric_source: false,
        });
    }
    let (h, _) = hessenberg(m)?;
    let eigenvalues = hqr_eigenvalues(h)?;
    Ok(Spectrum {
        eigenvalues,
        real_symmetric_source: false,
    })
}

/// Francis double-shift QR on an upper Hessenberg matrix, eigenvalues only.
fn hqr_eigenvalues(mut h: Mat) -> Result<Vec<Complex64>> {
    let nn = h.nrows() as isize;
    let mut d = vec![0.0_f64; nn as usize];
    let mut e = vec![0.0_f64; nn as usize];

    let get = |h: &Mat, i: isize, j: isize| h[[i as usize, j as usize]];
    let low: isize = 0;
    let eps = f64::EPSILON;
    let mut exshift = 0.0_f64;
    let (mut p, mut q, mut r) = (0.0_f64, 0.0_f64, 0.0_f64);

    let mut norm = 0.0_f64;
    for i in 0..nn {
        for j in (i - 1).max(0)..nn {
            norm += get(&h, i, j).abs();
        }
    }
    if norm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); nn as usize]);
    }

    let mut n = nn - 1;
    let mut iter = 0usize;
    const MAX_ITER_PER_EIGENVALUE: usize = 80;
    while n >= low {
        // Look for a single small subdiagonal element.
        let mut l = n;
        while l > low {
            let mut s = get(&h, l - 1, l - 1).abs() + get(&h, l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if get(&h, l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One real root found.
            let val = get(&h, n, n) + exshift;
            h[[n as usize, n as usize]] = val;
            d[n as usize] = val;
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // A 2×2 block deflated: two roots, real or a complex pair.
            let w = get(&h, n, n - 1) * get(&h, n - 1, n);
            p = (get(&h, n - 1, n - 1) - get(&h, n, n)) / 2.0;
            q = p * p + w;
            let z = q.abs().sqrt();
            let x = get(&h, n, n) + exshift;
            h[[n as usize, n as usize]] = x;
            h[[(n - 1) as usize, (n - 1) as usize]] = get(&h, n - 1, n - 1) + exshift;
            if q >= 0.0 {
                let z = if p >= 0.0 { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = if z != 0.0 {
                    x - w / z
                } else {
                    d[(n - 1) as usize]
                };
                e[(n - 1) as usize] = 0.0;
                e[n as usize] = 0.0;
            } else {
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // No convergence yet: form a shift.
            let mut x = get(&h, n, n);
            let mut y = 0.0;
            let mut w = 0.0;
            if l < n {
                y = get(&h, n - 1, n - 1);
                w = get(&h, n, n - 1) * get(&h, n - 1, n);
            }

            // Wilkinson's original ad hoc shift.
            if iter == 10 || iter == 40 {
                exshift += x;
                for i in low..(n + 1) {
                    let v = get(&h, i, i) - x;
                    h[[i as usize, i as usize]] = v;
                }
                let s = get(&h, n, n - 1).abs() + get(&h, n - 1, n - 2).abs();
                y = 0.75 * s;
                x = y;
                w = -0.4375 * s * s;
            }

            // The alternative exceptional shift.
            if iter == 30 || iter == 60 {
                let mut s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..(n + 1) {
                        let v = get(&h, i, i) - s;
                        h[[i as usize, i as usize]] = v;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            if iter > MAX_ITER_PER_EIGENVALUE {
                return Err(Error::NoConvergence {
                    algorithm: "francis double-shift QR",
                    iterations: MAX_ITER_PER_EIGENVALUE,
                });
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = n - 2;
            while m >= l {
                let z = get(&h, m, m);
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / get(&h, m + 1, m) + get(&h, m, m + 1);
                q = get(&h, m + 1, m + 1) - z - rr - ss;
                r = get(&h, m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if get(&h, m, m - 1).abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (get(&h, m - 1, m - 1).abs() + z.abs() + get(&h, m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..(n + 1) {
                h[[i as usize, (i - 2) as usize]] = 0.0;
                if i > m + 2 {
                    h[[i as usize, (i - 3) as usize]] = 0.0;
                }
            }

            // Double QR step on rows l..n, columns m..n.
            for k in m..n {
                let notlast = k != n - 1;
                let mut bulge_scale = 1.0;
                if k != m {
                    p = get(&h, k, k - 1);
                    q = get(&h, k + 1, k - 1);
                    r = if notlast { get(&h, k + 2, k - 1) } else { 0.0 };
                    bulge_scale = p.abs() + q.abs() + r.abs();
                    if bulge_scale == 0.0 {
                        continue;
                    }
                    p /= bulge_scale;
                    q /= bulge_scale;
                    r /= bulge_scale;
                }
                let mut s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != m {
                    h[[k as usize, (k - 1) as usize]] = -s * bulge_scale;
                } else if l != m {
                    let v = -get(&h, k, k - 1);
                    h[[k as usize, (k - 1) as usize]] = v;
                }
                p += s;
                let x = p / s;
                let y = q / s;
                let z = r / s;
                q /= p;
                r /= p;

                // Row modification.
                for j in k..nn {
                    let mut pp = get(&h, k, j) + q * get(&h, k + 1, j);
                    if notlast {
                        pp += r * get(&h, k + 2, j);
                        let v = get(&h, k + 2, j) - pp * z;
                        h[[(k + 2) as usize, j as usize]] = v;
                    }
                    let v0 = get(&h, k, j) - pp * x;
                    h[[k as usize, j as usize]] = v0;
                    let v1 = get(&h, k + 1, j) - pp * y;
                    h[[(k + 1) as usize, j as usize]] = v1;
                }

                // Column modification.
                for i in 0..(n.min(k + 3) + 1) {
                    let mut pp = x * get(&h, i, k) + y * get(&h, i, k + 1);
                    if notlast {
                        pp += z * get(&h, i, k + 2);
                        let v = get(&h, i, k + 2) - pp * r;
                        h[[i as usize, (k + 2) as usize]] = v;
                    }
                    let v0 = get(&h, i, k) - pp;
                    h[[i as usize, k as usize]] = v0;
                    let v1 = get(&h, i, k + 1) - pp * q;
                    h[[i as usize, (k + 1) as usize]] = v1;
                }
            }
        }
    }

    Ok(d.into_iter()
        .zip(e)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}

/// Solves `(zI − H) X = B` for upper Hessenberg `H` and complex `z` by
/// Gaussian elimination with partial pivoting confined to adjacent rows.
///
/// Cost is `O(n²·m)` for an `n×n` system with `m` right-hand sides, which
/// makes dense frequency sweeps cheap after a single Hessenberg reduction.
pub fn solve_hessenberg_shifted(
    h: &Mat,
    z: Complex64,
    rhs: &Array2<Complex64>,
) -> Result<Array2<Complex64>> {
    let n = check_square(h)?;
    if rhs.nrows() != n {
        return Err(Error::dims(
            "solve_hessenberg_shifted rhs",
            format!("{} rows", n),
            format!("{} rows", rhs.nrows()),
        ));
    }
    let m = rhs.ncols();
    let mut a = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let v = -h[[i, j]];
            a[[i, j]] = Complex64::new(v, 0.0);
        }
        a[[i, i]] += z;
    }
    let mut x = rhs.clone();

    let scale: f64 = a.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    for k in 0..n.saturating_sub(1) {
        // Pivot between rows k and k+1 (the only nonzero candidates).
        if a[[k + 1, k]].norm() > a[[k, k]].norm() {
            for j in k..n {
                let tmp = a[[k, j]];
                a[[k, j]] = a[[k + 1, j]];
                a[[k + 1, j]] = tmp;
            }
            for j in 0..m {
                let tmp = x[[k, j]];
                x[[k, j]] = x[[k + 1, j]];
                x[[k + 1, j]] = tmp;
            }
        }
        let pivot = a[[k, k]];
        if pivot.norm() <= 1e-300 * scale {
            return Err(Error::IllConditioned {
                condition: f64::INFINITY,
            });
        }
        let factor = a[[k + 1, k]] / pivot;
        if factor.norm() != 0.0 {
            for j in k..n {
                let v = a[[k, j]];
                a[[k + 1, j]] -= factor * v;
            }
            for j in 0..m {
                let v = x[[k, j]];
                x[[k + 1, j]] -= factor * v;
            }
        }
    }

    // Back substitution.
    for col in 0..m {
        for i in (0..n).rev() {
            let mut acc = x[[i, col]];
            for j in (i + 1)..n {
                acc -= a[[i, j]] * x[[j, col]];
            }
            let pivot = a[[i, i]];
            if pivot.norm() <= 1e-300 * scale {
                return Err(Error::IllConditioned {
                    condition: f64::INFINITY,
                });
            }
            x[[i, col]] = acc / pivot;
        }
    }
    Ok(x)
}
