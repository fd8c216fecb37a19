//! Randomized stress tests for the numeric kernel: eigenvalue sums match
//! traces, eigenvalue products match determinants, characteristic
//! polynomial residuals stay small, and singular values square to the
//! Gram spectrum, over seeded random matrices of varied size.

use hinf_tracking::kernel::{
    complex_embedding, determinant, eig_general, eig_sym, kron, max_abs, singular_values,
    solve_linear, spectral_radius, sv_max, Mat,
};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Mat {
    let m = random_matrix(rng, n, n, scale);
    0.5 * (&m + &m.t())
}

#[test]
fn general_eigenvalues_match_trace_and_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..200 {
        let n = 1 + (trial % 8);
        let m = random_matrix(&mut rng, n, n, 2.0);
        let spec = eig_general(&m).expect("eig_general should converge");
        assert_eq!(spec.len(), n);

        let trace: f64 = (0..n).map(|i| m[[i, i]]).sum();
        let eig_sum: Complex64 = spec.eigenvalues.iter().sum();
        let scale = max_abs(&m).max(1.0);
        assert!(
            (eig_sum.re - trace).abs() <= 1e-8 * scale * n as f64,
            "trace mismatch: {} vs {} (trial {trial})",
            eig_sum.re,
            trace
        );
        assert!(eig_sum.im.abs() <= 1e-8 * scale * n as f64);

        let det = determinant(&m).unwrap();
        let eig_prod: Complex64 = spec.eigenvalues.iter().product();
        let det_scale = scale.powi(n as i32).max(1.0);
        assert!(
            (eig_prod.re - det).abs() <= 1e-7 * det_scale,
            "determinant mismatch: {} vs {det} (trial {trial})",
            eig_prod.re
        );
        assert!(eig_prod.im.abs() <= 1e-7 * det_scale);
    }
}

#[test]
fn general_eigenvalues_satisfy_characteristic_polynomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..100 {
        let n = 2 + (trial % 6);
        let m = random_matrix(&mut rng, n, n, 1.5);
        let spec = eig_general(&m).unwrap();
        let scale = max_abs(&m).max(1.0);
        for lam in &spec.eigenvalues {
            let mut re = -&m;
            let mut im = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                re[[i, i]] += lam.re;
                im[[i, i]] = lam.im;
            }
            let embedded = complex_embedding(&re, &im).unwrap();
            let det = determinant(&embedded).unwrap().abs().sqrt();
            assert!(
                det <= 1e-7 * scale.powi(n as i32),
                "characteristic residual {det} for λ = {lam} (n = {n}, trial {trial})"
            );
        }
    }
}

#[test]
fn symmetric_eigenvalues_are_real_and_match_general_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..100 {
        let n = 1 + (trial % 7);
        let m = random_symmetric(&mut rng, n, 3.0);
        let sym = eig_sym(&m).unwrap();
        let mut gen: Vec<f64> = eig_general(&m)
            .unwrap()
            .eigenvalues
            .iter()
            .map(|z| {
                assert!(z.im.abs() <= 1e-7 * max_abs(&m).max(1.0));
                z.re
            })
            .collect();
        gen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (s, g) in sym.values.iter().zip(gen.iter()) {
            assert!(
                (s - g).abs() <= 1e-7 * max_abs(&m).max(1.0),
                "solver disagreement {s} vs {g}"
            );
        }
    }
}

#[test]
fn singular_values_square_to_gram_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for trial in 0..100 {
        let rows = 1 + (trial % 6);
        let cols = 1 + ((trial / 2) % 6);
        let m = random_matrix(&mut rng, rows, cols, 2.0);
        let smax = sv_max(&m).unwrap();
        let gram = m.t().dot(&m);
        let rho = spectral_radius(&gram).unwrap();
        assert!(
            (smax * smax - rho).abs() <= 1e-9 * rho.max(1.0),
            "σ² = {} vs ρ(MᵀM) = {rho}",
            smax * smax
        );
        // Sum of squared singular values equals the squared Frobenius norm.
        let sv = singular_values(&m).unwrap();
        let frob2: f64 = m.iter().map(|v| v * v).sum();
        let sv2: f64 = sv.iter().map(|s| s * s).sum();
        assert!((frob2 - sv2).abs() <= 1e-9 * frob2.max(1.0));
    }
}

#[test]
fn solve_linear_residuals_are_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for trial in 0..100 {
        let n = 1 + (trial % 8);
        // Diagonally dominated matrices stay well-conditioned.
        let mut a = random_matrix(&mut rng, n, n, 1.0);
        for i in 0..n {
            a[[i, i]] += 4.0;
        }
        let b = random_matrix(&mut rng, n, 3, 2.0);
        let x = solve_linear(&a, &b).unwrap();
        let res = &a.dot(&x) - &b;
        let norm_a = hinf_tracking::kernel::norm_1(&a);
        let norm_x = hinf_tracking::kernel::norm_1(&x).max(1e-300);
        assert!(max_abs(&res) <= 1e-9 * norm_a * norm_x);
    }
}

#[test]
fn kron_mixed_product_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..50 {
        let a = random_matrix(&mut rng, 2, 3, 1.0);
        let b = random_matrix(&mut rng, 3, 2, 1.0);
        let c = random_matrix(&mut rng, 3, 2, 1.0);
        let d = random_matrix(&mut rng, 2, 4, 1.0);
        let lhs = kron(&a, &b).dot(&kron(&c, &d));
        let rhs = kron(&a.dot(&c), &b.dot(&d));
        assert!(max_abs(&(&lhs - &rhs)) <= 1e-12);
    }
}

#[test]
fn defective_and_repeated_eigenvalues_are_handled() {
    // Jordan-type blocks, repeated roots, and nilpotent matrices.
    let jordan = ndarray::array![[2.0, 1.0, 0.0], [0.0, 2.0, 1.0], [0.0, 0.0, 2.0]];
    let spec = eig_general(&jordan).unwrap();
    for z in &spec.eigenvalues {
        assert!((z - Complex64::new(2.0, 0.0)).norm() < 1e-5);
    }

    let nilpotent = ndarray::array![[0.0, 1.0], [0.0, 0.0]];
    let spec = eig_general(&nilpotent).unwrap();
    for z in &spec.eigenvalues {
        assert!(z.norm() < 1e-7);
    }

    let permutation = ndarray::array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
    let spec = eig_general(&permutation).unwrap();
    // Cube roots of unity, all on the unit circle.
    for z in &spec.eigenvalues {
        assert!((z.norm() - 1.0).abs() < 1e-10);
    }
}
