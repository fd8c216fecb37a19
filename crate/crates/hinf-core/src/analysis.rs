//! Schur stability, discrete-time H∞ norms, detectability, and the
//! decoupled/coupled verification reports.
//!
//! The H∞ norm is computed in two phases.  Phase 1 sweeps a dense
//! frequency grid on `[0, π]` — the state matrix is reduced to Hessenberg
//! form once, so each grid point costs one shifted Hessenberg solve —
//! producing an attained lower bound and a peak locator.  Phase 2
//! certifies by bisection: a candidate level `γ` is attained as a
//! singular value of the transfer matrix at some frequency if and only if
//! the associated `2n`-dimensional symplectic-type pencil has a
//! generalized eigenvalue on the unit circle, which is decided via a
//! shift-and-invert eigenvalue computation.
//!
//! Systems whose recorded output runs one step ahead of the input (see
//! [`StateSpace::output_advance`]) have a transfer matrix carrying an
//! extra factor `z`; since `|z| = 1` on the unit circle the norm is
//! unaffected, and the flag is deliberately ignored here.

use ndarray::{s, Array2};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::Error;
use crate::kernel::{
    check_square, eig_general, hessenberg, max_abs, norm_fro, singular_values_complex,
    solve_hessenberg_shifted, spectral_radius, sv_max_complex, LuFactors, Mat,
};
use crate::plant::{
    coupled_error_system, decoupled_systems, AugmentedSystem, ProtocolGain, StateSpace,
};
use crate::tolerances::Tolerances;
use crate::topology::{follower_spectrum, FollowerSpectrum, StochasticDecomposition};
use crate::Result;

/// Condition-number ceiling for an acceptable shift in the level test;
/// shifts producing a worse-conditioned factor are discarded.
const LEVEL_SHIFT_MAX_CONDITION: f64 = 1e10;

/// Real shifts tried (in order) by the shift-and-invert level test.  A
/// shift fails only when it lands near a generalized eigenvalue of the
/// pencil, so a short list of spread-out values suffices.
const LEVEL_SHIFTS: [f64; 16] = [
    0.5, -0.5, 2.0, -2.0, 0.25, -0.25, 4.0, -4.0, 0.75, -0.75, 1.5, -1.5, 0.1, -0.1, 10.0, -10.0,
];

/// Eigenvalue magnitudes at or above this radius are treated as
/// not-stable by the detectability test.  The slack below 1 absorbs the
/// `O(√eps)` perturbation that defective unit-circle eigenvalues suffer
/// in floating point; testing a few extra near-circle modes is harmless.
const PBH_UNSTABLE_RADIUS: f64 = 1.0 - 1e-6;

/// Relative agreement required between the coupled norm and the maximum
/// decoupled norm in [`verify_coupled`]'s consistency cross-check.
const CROSS_CHECK_RELATIVE: f64 = 1e-6;

/// Options for [`hinf_norm`].
#[derive(Debug, Clone, Copy)]
pub struct HinfOptions {
    /// Relative bisection tolerance: iteration stops once
    /// `upper − lower ≤ tol·max(1, lower)`.
    pub tol: f64,
    /// Number of frequency samples on `[0, π]`, endpoints included.
    pub grid_points: usize,
    /// Numerical thresholds (stability margin, unit-circle width, …).
    pub tolerances: Tolerances,
}

impl Default for HinfOptions {
    fn default() -> Self {
        let tolerances = Tolerances::standard();
        HinfOptions {
            tol: tolerances.hinf_bisection,
            grid_points: tolerances.hinf_grid_points,
            tolerances,
        }
    }
}

impl HinfOptions {
    /// Default options with a custom bisection tolerance.
    pub fn with_tol(tol: f64) -> Self {
        HinfOptions {
            tol,
            ..HinfOptions::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "hinf tol",
                reason: format!("must be a positive finite number, got {}", self.tol),
            });
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidParameter {
                name: "hinf grid_points",
                reason: format!("need at least 2 samples, got {}", self.grid_points),
            });
        }
        Ok(())
    }
}

/// Which phase produced the reported norm value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    /// The grid peak was certified as already within tolerance.
    Grid,
    /// Bisection refined the bracket; the value is its midpoint.
    Bisection,
}

/// A computed H∞ norm with its certificate interval.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HinfResult {
    /// The norm estimate, guaranteed inside `certified_bounds`.
    pub norm: f64,
    /// Frequency (radians in `[0, π]`) of the largest sampled gain.
    pub peak_frequency: f64,
    /// Phase that produced `norm`.
    pub method: NormMethod,
    /// `(lower, upper)` with `upper − lower ≤ tol·max(1, lower)`; the
    /// lower bound is an attained gain, the upper bound is certified by
    /// the pencil level test.
    pub certified_bounds: (f64, f64),
}

/// Schur stability check: `true` iff the spectral radius is below
/// `1 − margin`.  Also returns the computed radius.
pub fn is_schur(m: &Mat, margin: f64) -> Result<(bool, f64)> {
    let radius = spectral_radius(m)?;
    Ok((radius < 1.0 - margin, radius))
}

/// Largest singular value of the transfer matrix `C(zI − A)⁻¹B` at
/// `z = e^{jθ}`.
pub fn frequency_gain(ss: &StateSpace, theta: f64) -> Result<f64> {
    let (h, q) = hessenberg(&ss.a_d)?;
    let sweep = SweepContext::new(ss, h, q);
    sweep.gain_at(theta)
}

struct SweepContext {
    h: Mat,
    c_rot: Mat,
    b_rot: Array2<Complex64>,
}

impl SweepContext {
    fn new(ss: &StateSpace, h: Mat, q: Mat) -> Self {
        let c_rot = ss.c_d.dot(&q);
        let b_rot = q.t().dot(&ss.b_d).mapv(|v| Complex64::new(v, 0.0));
        SweepContext { h, c_rot, b_rot }
    }

    fn gain_at(&self, theta: f64) -> Result<f64> {
        let z = Complex64::from_polar(1.0, theta);
        let x = solve_hessenberg_shifted(&self.h, z, &self.b_rot).map_err(|e| match e {
            Error::IllConditioned { condition } => Error::ResolventBreakdown {
                frequency: theta,
                condition,
            },
            other => other,
        })?;
        let g_re = self.c_rot.dot(&x.mapv(|c| c.re));
        let g_im = self.c_rot.dot(&x.mapv(|c| c.im));
        sv_max_complex(&g_re, &g_im)
    }
}

/// Discrete-time H∞ norm of a stable state-space system.
///
/// Errors with [`Error::UnstableSystem`] when the state matrix is not
/// Schur stable (the norm is undefined for internally unstable systems
/// in this setting).
pub fn hinf_norm(ss: &StateSpace, opts: &HinfOptions) -> Result<HinfResult> {
    opts.validate()?;
    let (stable, radius) = is_schur(&ss.a_d, opts.tolerances.schur_margin)?;
    if !stable {
        return Err(Error::UnstableSystem { radius });
    }

    // A vanishing input or output map gives norm zero with no analysis.
    if max_abs(&ss.b_d) == 0.0 || max_abs(&ss.c_d) == 0.0 {
        return Ok(HinfResult {
            norm: 0.0,
            peak_frequency: 0.0,
            method: NormMethod::Grid,
            certified_bounds: (0.0, 0.0),
        });
    }

    // Phase 1: dense grid sweep for an attained lower bound.
    let (h, q) = hessenberg(&ss.a_d)?;
    let sweep = SweepContext::new(ss, h, q);
    let mut lo = 0.0_f64;
    let mut peak_frequency = 0.0_f64;
    let last = opts.grid_points - 1;
    for k in 0..opts.grid_points {
        let theta = std::f64::consts::PI * k as f64 / last as f64;
        let gain = sweep.gain_at(theta)?;
        if gain > lo {
            lo = gain;
            peak_frequency = theta;
        }
    }

    // Phase 2: certify by bisection on the pencil level test.  The level
    // test answers "is γ attained as a singular value at some frequency";
    // since every sampled gain is ≤ lo < γ for each probed γ, a sup
    // exceeding γ would force a crossing by continuity, so "no crossing"
    // certifies γ as an upper bound.
    let level = LevelTest::new(ss, &opts.tolerances)?;
    let gap = |lower: f64| opts.tol * lower.max(1.0);

    let probe = lo + gap(lo);
    if !level.crossing(probe)? {
        return Ok(HinfResult {
            norm: lo,
            peak_frequency,
            method: NormMethod::Grid,
            certified_bounds: (lo, probe),
        });
    }
    let mut lo = probe;
    let mut hi = 2.0 * lo + 1.0;
    let mut expansions = 0usize;
    while level.crossing(hi)? {
        lo = hi;
        hi = 2.0 * hi + 1.0;
        expansions += 1;
        if expansions > 64 {
            return Err(Error::NoConvergence {
                algorithm: "hinf upper-bound bracketing",
                iterations: expansions,
            });
        }
    }
    let mut rounds = 0usize;
    while hi - lo > gap(lo) {
        let mid = 0.5 * (lo + hi);
        if level.crossing(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        rounds += 1;
        if rounds > 256 {
            return Err(Error::NoConvergence {
                algorithm: "hinf bisection",
                iterations: rounds,
            });
        }
    }
    Ok(HinfResult {
        norm: 0.5 * (lo + hi),
        peak_frequency,
        method: NormMethod::Bisection,
        certified_bounds: (lo, hi),
    })
}

/// The unit-circle level test on the symplectic-type pencil.
///
/// `γ` is attained as a singular value of `C(e^{jθ}I − A)⁻¹B` at some
/// `θ` iff the pencil `M − zL` with
/// `M = [[A, 0], [−αCᵀC, I]]`, `L = [[I, −BBᵀ/(αγ²)], [0, Aᵀ]]`
/// has a generalized eigenvalue `z` on the unit circle.  The balancing
/// scalar `α > 0` leaves the generalized eigenvalues unchanged (it is a
/// block-diagonal equivalence transform) while keeping both off-diagonal
/// blocks of comparable magnitude even for small `γ`.
struct LevelTest {
    a: Mat,
    bbt: Mat,
    ctc: Mat,
    /// `‖B‖_F / ‖C‖_F`, the γ-independent part of the balancing scalar.
    balance: f64,
    unit_circle: f64,
}

impl LevelTest {
    fn new(ss: &StateSpace, tol: &Tolerances) -> Result<Self> {
        let n = check_square(&ss.a_d)?;
        let bbt = ss.b_d.dot(&ss.b_d.t());
        let ctc = ss.c_d.t().dot(&ss.c_d);
        debug_assert_eq!(bbt.nrows(), n);
        debug_assert_eq!(ctc.nrows(), n);
        let nb = norm_fro(&ss.b_d);
        let nc = norm_fro(&ss.c_d);
        Ok(LevelTest {
            a: ss.a_d.clone(),
            bbt,
            ctc,
            balance: nb / nc,
            unit_circle: tol.unit_circle,
        })
    }

    /// True iff `gamma` is attained as a singular value of the transfer
    /// matrix at some frequency on the unit circle.
    fn crossing(&self, gamma: f64) -> Result<bool> {
        let n = self.a.nrows();
        let alpha = self.balance / gamma;
        let mut m = Array2::zeros((2 * n, 2 * n));
        m.slice_mut(s![..n, ..n]).assign(&self.a);
        m.slice_mut(s![n.., ..n]).assign(&(-alpha * &self.ctc));
        m.slice_mut(s![n.., n..]).assign(&Array2::eye(n));
        let mut l = Array2::zeros((2 * n, 2 * n));
        l.slice_mut(s![..n, ..n]).assign(&Array2::eye(n));
        l.slice_mut(s![..n, n..])
            .assign(&(-(1.0 / (alpha * gamma * gamma)) * &self.bbt));
        l.slice_mut(s![n.., n..]).assign(&self.a.t());

        let mut best_condition = f64::INFINITY;
        for &sigma in &LEVEL_SHIFTS {
            let shifted = &m - &(sigma * &l);
            let lu = match LuFactors::factor(&shifted) {
                Ok(lu) => lu,
                Err(_) => continue,
            };
            let condition = lu.condition()?;
            if !condition.is_finite() || condition > LEVEL_SHIFT_MAX_CONDITION {
                best_condition = best_condition.min(condition);
                continue;
            }
            // Generalized eigenvalues z of (M, L) relate to eigenvalues ν
            // of (M − σL)⁻¹L by z = σ + 1/ν; ν → 0 corresponds to an
            // eigenvalue at infinity, far from the unit circle.
            let t = lu.solve(&l)?;
            let spectrum = eig_general(&t)?;
            for nu in &spectrum.eigenvalues {
                if nu.norm() < 1e-300 {
                    continue;
                }
                let z = sigma + (Complex64::new(1.0, 0.0) / nu);
                if (z.norm() - 1.0).abs() <= self.unit_circle {
                    return Ok(true);
                }
            }
            return Ok(false);
        }
        Err(Error::LevelTestBreakdown { best_condition })
    }
}

/// Result of checking one system: stability plus (when stable) its norm.
#[derive(Debug, Clone, Serialize)]
pub struct SystemCheck {
    /// Human-readable identifier ("coupled", "decoupled[2] …", …).
    pub label: String,
    /// Whether the state matrix is Schur stable.
    pub schur: bool,
    /// Computed spectral radius.
    pub spectral_radius: f64,
    /// H∞ norm; absent when the system is unstable.
    pub hinf: Option<HinfResult>,
}

/// Consistency comparison between the coupled norm and the maximum
/// decoupled norm (they agree in exact arithmetic).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormCrossCheck {
    pub coupled: f64,
    pub max_decoupled: f64,
    /// `|coupled − max_decoupled| ≤ 1e-6·(1 + coupled)`.
    pub consistent: bool,
}

/// Outcome of a stability-and-attenuation verification.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    /// The attenuation level the norms are compared against.
    pub gamma: f64,
    /// Per-system results.
    pub systems: Vec<SystemCheck>,
    /// All systems Schur stable and all norms `< gamma` (and, when a
    /// cross-check ran, the two norm computations consistent).
    pub pass: bool,
    /// `gamma − max norm`; absent when any system is unstable.
    pub margin: Option<f64>,
    /// Present only for coupled verifications.
    pub cross_check: Option<NormCrossCheck>,
}

impl VerificationReport {
    /// Largest computed norm, if every system had one.
    pub fn max_norm(&self) -> Option<f64> {
        if self.systems.iter().any(|s| s.hinf.is_none()) {
            return None;
        }
        self.systems
            .iter()
            .filter_map(|s| s.hinf.as_ref().map(|h| h.norm))
            .max_by(f64::total_cmp)
    }
}

impl std::fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "verification at gamma = {:.6}", self.gamma)?;
        for sys in &self.systems {
            match &sys.hinf {
                Some(h) => writeln!(
                    f,
                    "  {}: schur {} (radius {:.9}), norm {:.9} at theta {:.6}",
                    sys.label, sys.schur, sys.spectral_radius, h.norm, h.peak_frequency
                )?,
                None => writeln!(
                    f,
                    "  {}: schur {} (radius {:.9}), norm not computed",
                    sys.label, sys.schur, sys.spectral_radius
                )?,
            }
        }
        if let Some(c) = &self.cross_check {
            writeln!(
                f,
                "  cross-check: coupled {:.9} vs max decoupled {:.9} ({})",
                c.coupled,
                c.max_decoupled,
                if c.consistent {
                    "consistent"
                } else {
                    "INCONSISTENT"
                }
            )?;
        }
        match self.margin {
            Some(m) => writeln!(f, "  margin: {m:.9}")?,
            None => writeln!(f, "  margin: undefined (unstable system present)")?,
        }
        write!(f, "  overall: {}", if self.pass { "pass" } else { "FAIL" })
    }
}

fn check_system(label: String, sys: &StateSpace, opts: &HinfOptions) -> Result<SystemCheck> {
    let (schur, radius) = is_schur(&sys.a_d, opts.tolerances.schur_margin)?;
    let hinf = if schur {
        Some(hinf_norm(sys, opts)?)
    } else {
        None
    };
    Ok(SystemCheck {
        label,
        schur,
        spectral_radius: radius,
        hinf,
    })
}

fn assemble_report(
    gamma: f64,
    systems: Vec<SystemCheck>,
    cross_check: Option<NormCrossCheck>,
) -> VerificationReport {
    let all_schur = !systems.is_empty() && systems.iter().all(|s| s.schur);
    let max_norm = systems
        .iter()
        .filter_map(|s| s.hinf.as_ref().map(|h| h.norm))
        .max_by(f64::total_cmp);
    let margin = if all_schur {
        max_norm.map(|m| gamma - m)
    } else {
        None
    };
    let norms_ok = all_schur && max_norm.is_some_and(|m| m < gamma);
    let consistent = cross_check.map_or(true, |c| c.consistent);
    VerificationReport {
        gamma,
        systems,
        pass: norms_ok && consistent,
        margin,
        cross_check,
    }
}

/// Checks that every per-eigenvalue decoupled error system is Schur
/// stable with H∞ norm below `gamma`.  Unstable systems are reported as
/// failures (their norms are undefined and skipped), not errors.
pub fn verify_decoupled(
    aug: &AugmentedSystem,
    gain: &ProtocolGain,
    spectrum: &FollowerSpectrum,
    gamma: f64,
    opts: &HinfOptions,
) -> Result<VerificationReport> {
    let systems = decoupled_systems(aug, gain, spectrum);
    let mut checks = Vec::with_capacity(systems.len());
    for (i, sys) in systems.iter().enumerate() {
        let label = format!("decoupled[{i}] (lambda {:+.6})", spectrum.lambda[i]);
        checks.push(check_system(label, sys, opts)?);
    }
    Ok(assemble_report(gamma, checks, None))
}

/// Checks the full coupled error system: Schur stability (equivalent to
/// consensus of the unforced network) and H∞ norm below `gamma`.  When
/// the system is stable, the coupled norm is cross-checked against the
/// maximum decoupled norm, which must agree within `1e-6` relative.
pub fn verify_coupled(
    aug: &AugmentedSystem,
    gain: &ProtocolGain,
    dec: &StochasticDecomposition,
    gamma: f64,
    opts: &HinfOptions,
) -> Result<VerificationReport> {
    // Tighten the norm tolerance so the cross-check compares values whose
    // own computation error is well below the agreement threshold.
    let tight = HinfOptions {
        tol: opts.tol.min(1e-8),
        ..*opts
    };
    let coupled = coupled_error_system(aug, gain, dec);
    let check = check_system("coupled".to_string(), &coupled, &tight)?;
    let cross_check = match &check.hinf {
        Some(h) => {
            let spectrum = follower_spectrum(dec)?;
            let dec_report = verify_decoupled(aug, gain, &spectrum, gamma, &tight)?;
            let max_decoupled = dec_report.max_norm().unwrap_or(f64::NAN);
            let consistent =
                (h.norm - max_decoupled).abs() <= CROSS_CHECK_RELATIVE * (1.0 + h.norm);
            Some(NormCrossCheck {
                coupled: h.norm,
                max_decoupled,
                consistent,
            })
        }
        None => None,
    };
    Ok(assemble_report(gamma, vec![check], cross_check))
}

/// PBH detectability: for every eigenvalue `λ` of `a_hat` with magnitude
/// at or outside the unit circle, the stacked matrix `[λI − Â; C̃]` must
/// have full column rank (smallest singular value at least
/// `rank_relative` times the largest).
pub fn pbh_detectable(a_hat: &Mat, c_tilde: &Mat, tol: &Tolerances) -> Result<bool> {
    let n = check_square(a_hat)?;
    if c_tilde.ncols() != n {
        return Err(Error::dims(
            "pbh c_tilde",
            format!("{n} columns"),
            format!("{} columns", c_tilde.ncols()),
        ));
    }
    let my = c_tilde.nrows();
    let spectrum = eig_general(a_hat)?;
    for lambda in &spectrum.eigenvalues {
        if lambda.norm() < PBH_UNSTABLE_RADIUS {
            continue;
        }
        let mut re = Array2::zeros((n + my, n));
        let mut im = Array2::zeros((n + my, n));
        for i in 0..n {
            for j in 0..n {
                re[[i, j]] = -a_hat[[i, j]];
            }
            re[[i, i]] += lambda.re;
            im[[i, i]] = lambda.im;
        }
        re.slice_mut(s![n.., ..]).assign(c_tilde);
        let sv = singular_values_complex(&re, &im)?;
        let smax = sv.first().copied().unwrap_or(0.0);
        let smin = sv.last().copied().unwrap_or(0.0);
        if smin < tol.rank_relative * smax {
            return Ok(false);
        }
    }
    Ok(true)
}
