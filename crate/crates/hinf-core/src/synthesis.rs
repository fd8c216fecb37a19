//! Gain synthesis: assemble the two matrix inequalities whose joint
//! feasibility certifies the tracking design, search for a feasible
//! point `(P, V, ε)`, and extract the protocol gain `F = P⁻¹V`.
//!
//! Feasibility is posed as nonsmooth minimization of
//! `φ(P, V, ε) = max(λ_max(M₁₂), −λ_min(M₁₃), −λ_min(P), −ε)` where
//! `M₁₂ < 0` and `M₁₃ > 0` are the two inequalities; `φ ≤ −μ` certifies
//! every condition with margin `μ`.  Both inequalities are affine in the
//! variables, so a subgradient of each branch follows from the extremal
//! eigenvector mapped through the affine operator, and Polyak-style steps
//! with adaptive targets descend on `φ`.  Random restarts (seeded, hence
//! deterministic) guard against bad starting points.
//!
//! Feasible sets of these inequalities can be extremely anisotropic: for
//! weakly observed, marginally stable leader modes every feasible `P`
//! carries diagonal entries orders of magnitude apart, and an isotropic
//! subgradient iteration started at `P = I` crawls along that valley.
//! The search therefore interleaves descent chunks with an automatic
//! change of state coordinates (`x → Tx` with `T` diagonal), which acts
//! on the inequalities as an exact congruence — feasibility is preserved
//! both ways — while renormalizing the current `P` iterate to unit
//! diagonal.  Success is always declared on the objective evaluated in
//! the *original* coordinates, and a returned certificate is
//! independently re-checkable via [`certify`]; exhaustion of the budget
//! means "no feasible point found", never a proof of infeasibility.

use ndarray::{s, Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{verify_coupled, verify_decoupled, HinfOptions, VerificationReport};
use crate::error::Error;
use crate::kernel::{eig_sym, max_abs, norm_fro, solve_linear, symmetrize, Mat};
use crate::plant::{AugmentedSystem, ProtocolGain};
use crate::tolerances::Tolerances;
use crate::topology::{follower_spectrum, StochasticDecomposition};
use crate::Result;

/// Decision variables of the feasibility problem.
#[derive(Debug, Clone)]
pub struct LmiVariables {
    /// Symmetric `nm₀ × nm₀` Lyapunov-type variable.
    pub p: Mat,
    /// `nm₀ × m_y` variable from which the gain is extracted.
    pub v: Mat,
    /// Positive scalar multiplier on the sensing-uncertainty term.
    pub epsilon: f64,
}

impl LmiVariables {
    /// Validates shapes, symmetry of `p`, and positivity of `epsilon`.
    pub fn new(p: Mat, v: Mat, epsilon: f64) -> Result<Self> {
        let p = symmetrize(&p, &Tolerances::standard())?;
        if v.nrows() != p.nrows() {
            return Err(Error::dims(
                "variables.v",
                format!("{} rows", p.nrows()),
                format!("{} rows", v.nrows()),
            ));
        }
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must be positive and finite, got {epsilon}"),
            });
        }
        Ok(LmiVariables { p, v, epsilon })
    }
}

/// Whether `ε` is optimized or held fixed during the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonMode {
    /// `ε` is a decision variable.
    Free,
    /// `ε` is pinned to the given positive value.
    Fixed(f64),
}

/// Search budget and determinism controls for [`solve_feasibility`].
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Subgradient iterations per restart.
    pub max_iterations: usize,
    /// Feasibility margin `μ`: success requires `φ ≤ −μ`.
    pub margin: f64,
    /// Number of randomized restarts after the deterministic start.
    pub restarts: usize,
    /// Seed for the restart perturbations.
    pub seed: u64,
    /// Treatment of `ε`.
    pub epsilon: EpsilonMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 40_000,
            margin: 1e-6,
            restarts: 4,
            seed: 7,
            epsilon: EpsilonMode::Free,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !self.margin.is_finite() || self.margin <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "solver margin",
                reason: format!("must be positive and finite, got {}", self.margin),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "solver max_iterations",
                reason: "must be at least 1".to_string(),
            });
        }
        if let EpsilonMode::Fixed(e) = self.epsilon {
            if !e.is_finite() || e <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "epsilon",
                    reason: format!("fixed value must be positive and finite, got {e}"),
                });
            }
        }
        Ok(())
    }
}

/// Recomputed definiteness margins of a certificate; a valid certificate
/// has all three strictly positive.
#[derive(Debug, Clone, Copy)]
pub struct CertificateMargins {
    /// `−λ_max` of the first inequality (must be negative definite).
    pub feasibility: f64,
    /// `λ_min` of the second inequality (must be positive definite).
    pub output: f64,
    /// `λ_min(P)`.
    pub p_positivity: f64,
}

impl CertificateMargins {
    /// All three margins strictly positive.
    pub fn valid(&self) -> bool {
        self.feasibility > 0.0 && self.output > 0.0 && self.p_positivity > 0.0
    }

    /// Smallest of the three margins.
    pub fn min(&self) -> f64 {
        self.feasibility.min(self.output).min(self.p_positivity)
    }
}

/// A successful synthesis: variables, extracted gain, and the context
/// (`γ`, `λ₀`) the inequalities were assembled with.
#[derive(Debug, Clone)]
pub struct SynthesisCertificate {
    pub variables: LmiVariables,
    pub f: ProtocolGain,
    pub gamma: f64,
    pub lambda0: f64,
    pub margins: CertificateMargins,
}

/// Outcome of re-checking a certificate from scratch.
#[derive(Debug, Clone)]
pub struct CertificationReport {
    /// Margins recomputed from the certificate's own variables at its
    /// recorded `γ` and `λ₀`.
    pub margins: CertificateMargins,
    /// The `ε` recorded in the certificate.
    pub epsilon: f64,
    /// Per-eigenvalue verification of the gain at the requested level.
    pub decoupled: VerificationReport,
    /// Full-network verification of the gain at the requested level.
    pub coupled: VerificationReport,
    /// Margins valid, `ε > 0`, and both verifications passed.
    pub pass: bool,
}

fn check_lmi_context(aug: &AugmentedSystem, vars: &LmiVariables, gamma: f64) -> Result<()> {
    let dim = aug.dim();
    if vars.p.nrows() != dim {
        return Err(Error::dims(
            "variables.p",
            format!("{dim}x{dim}"),
            format!("{}x{}", vars.p.nrows(), vars.p.ncols()),
        ));
    }
    if vars.v.ncols() != aug.sensing.output_dim() {
        return Err(Error::dims(
            "variables.v",
            format!("{} columns", aug.sensing.output_dim()),
            format!("{} columns", vars.v.ncols()),
        ));
    }
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be positive and finite, got {gamma}"),
        });
    }
    Ok(())
}

/// The four problem matrices the inequalities are built from, detached
/// from [`AugmentedSystem`] so the solver can operate on coordinate-
/// rescaled copies.
#[derive(Clone)]
struct LmiData {
    a_hat: Mat,
    c_tilde: Mat,
    b_hat_omega: Mat,
    c: Mat,
}

impl LmiData {
    fn from_aug(aug: &AugmentedSystem) -> Self {
        LmiData {
            a_hat: aug.leader.a_hat().clone(),
            c_tilde: aug.c_tilde().clone(),
            b_hat_omega: aug.b_hat_omega().clone(),
            c: aug.c.clone(),
        }
    }

    /// The data seen after the state substitution `x = T x'` with
    /// `T = diag(t)`: `Â' = T⁻¹ÂT`, `C̃' = C̃T`, `B̂_ω' = T⁻¹B̂_ω`,
    /// `C' = CT`.  Both inequalities transform by congruence, so
    /// feasibility (though not the margins) is preserved exactly.
    fn rescaled(&self, t: &Array1<f64>) -> Self {
        let n = t.len();
        let mut a_hat = self.a_hat.clone();
        for i in 0..n {
            for j in 0..n {
                a_hat[[i, j]] *= t[j] / t[i];
            }
        }
        let mut c_tilde = self.c_tilde.clone();
        for (j, col) in c_tilde.columns_mut().into_iter().enumerate() {
            for x in col {
                *x *= t[j];
            }
        }
        let mut b_hat_omega = self.b_hat_omega.clone();
        for (i, row) in b_hat_omega.rows_mut().into_iter().enumerate() {
            for x in row {
                *x /= t[i];
            }
        }
        let mut c = self.c.clone();
        for (j, col) in c.columns_mut().into_iter().enumerate() {
            for x in col {
                *x *= t[j];
            }
        }
        LmiData {
            a_hat,
            c_tilde,
            b_hat_omega,
            c,
        }
    }
}

fn assemble12_raw(data: &LmiData, p: &Mat, v: &Mat, epsilon: f64, gamma: f64, lambda0: f64) -> Mat {
    let d = data.a_hat.nrows();
    let mw = data.b_hat_omega.ncols();
    let my = data.c_tilde.nrows();
    let total = 2 * d + mw + my;

    let pa_vc = p.dot(&data.a_hat) - v.dot(&data.c_tilde);
    let pbw = p.dot(&data.b_hat_omega);
    let ctc = data.c.t().dot(&data.c);
    let ct_ct = data.c_tilde.t().dot(&data.c_tilde);
    let diag2 = -p + &((1.0 / (gamma * gamma)) * &ctc) + &(epsilon * lambda0 * lambda0 * &ct_ct);

    let mut m = Array2::zeros((total, total));
    let (r1, r2, r3) = (d, 2 * d, 2 * d + mw);
    m.slice_mut(s![..r1, ..r1]).assign(&(-p));
    m.slice_mut(s![..r1, r1..r2]).assign(&pa_vc);
    m.slice_mut(s![r1..r2, ..r1]).assign(&pa_vc.t());
    m.slice_mut(s![..r1, r2..r3]).assign(&pbw);
    m.slice_mut(s![r2..r3, ..r1]).assign(&pbw.t());
    m.slice_mut(s![..r1, r3..]).assign(v);
    m.slice_mut(s![r3.., ..r1]).assign(&v.t());
    m.slice_mut(s![r1..r2, r1..r2]).assign(&diag2);
    for i in 0..mw {
        m[[r2 + i, r2 + i]] = -1.0;
    }
    for i in 0..my {
        m[[r3 + i, r3 + i]] = -epsilon;
    }
    m
}

fn assemble13_raw(data: &LmiData, p: &Mat, gamma: f64) -> Mat {
    let d = p.nrows();
    let p_rows = data.c.nrows();
    let total = p_rows + d;
    let mut m = Array2::zeros((total, total));
    for i in 0..p_rows {
        m[[i, i]] = 1.0;
    }
    m.slice_mut(s![..p_rows, p_rows..]).assign(&data.c);
    m.slice_mut(s![p_rows.., ..p_rows]).assign(&data.c.t());
    m.slice_mut(s![p_rows.., p_rows..])
        .assign(&(gamma * gamma * p));
    m
}

/// Assembles the stability/attenuation inequality (required negative
/// definite), a symmetric matrix of dimension `2nm₀ + m_ω + m_y` with
/// block rows `[−P, PÂ−VC̃, PB̂_ω, V]`,
/// `[⋆, −P + γ⁻²CᵀC + ελ₀²C̃ᵀC̃, O, O]`, `[⋆, ⋆, −I, O]`, `[⋆, ⋆, ⋆, −εI]`.
pub fn assemble_lmi12(
    vars: &LmiVariables,
    gamma: f64,
    lambda0: f64,
    aug: &AugmentedSystem,
) -> Result<Mat> {
    check_lmi_context(aug, vars, gamma)?;
    if !lambda0.is_finite() || lambda0 < 0.0 {
        return Err(Error::InvalidParameter {
            name: "lambda0",
            reason: format!("must be nonnegative and finite, got {lambda0}"),
        });
    }
    Ok(assemble12_raw(
        &LmiData::from_aug(aug),
        &vars.p,
        &vars.v,
        vars.epsilon,
        gamma,
        lambda0,
    ))
}

/// Assembles the output-weighting inequality (required positive
/// definite): `[I, C; Cᵀ, γ²P]` of dimension `nm₁ + nm₀`.
pub fn assemble_lmi13(vars: &LmiVariables, gamma: f64, aug: &AugmentedSystem) -> Result<Mat> {
    check_lmi_context(aug, vars, gamma)?;
    Ok(assemble13_raw(&LmiData::from_aug(aug), &vars.p, gamma))
}

/// Internal mutable search state: `P` kept exactly symmetric, `V`, `ε`.
#[derive(Clone)]
struct SearchPoint {
    p: Mat,
    v: Mat,
    epsilon: f64,
}

impl SearchPoint {
    fn magnitude(&self) -> f64 {
        norm_fro(&self.p) + norm_fro(&self.v) + self.epsilon.abs()
    }

    /// Undoes the state rescaling `T = diag(t)`: a point for the
    /// transformed data maps to `P → P ⊘ ttᵀ`, `V → diag(t)⁻¹V` for the
    /// original data (elementwise quotients).
    fn into_original(mut self, t: &Array1<f64>) -> SearchPoint {
        for ((i, j), x) in self.p.indexed_iter_mut() {
            *x /= t[i] * t[j];
        }
        for (i, row) in self.v.rows_mut().into_iter().enumerate() {
            for x in row {
                *x /= t[i];
            }
        }
        self
    }
}

/// Subgradient of the active branch, in the Frobenius geometry over
/// `(P, V, ε)`; all `P`-components are symmetric by construction.
struct Subgradient {
    p: Mat,
    v: Mat,
    epsilon: f64,
}

impl Subgradient {
    fn norm_sq(&self, free_epsilon: bool) -> f64 {
        let mut s = norm_fro(&self.p).powi(2) + norm_fro(&self.v).powi(2);
        if free_epsilon {
            s += self.epsilon * self.epsilon;
        }
        s
    }
}

/// Evaluates `φ` alone (no subgradient) — used for post-step accounting
/// and for the original-coordinate success check.
fn objective_value(point: &SearchPoint, gamma: f64, lambda0: f64, data: &LmiData) -> Result<f64> {
    let m12 = assemble12_raw(data, &point.p, &point.v, point.epsilon, gamma, lambda0);
    let m13 = assemble13_raw(data, &point.p, gamma);
    let e12 = eig_sym(&m12)?;
    let e13 = eig_sym(&m13)?;
    let ep = eig_sym(&point.p)?;
    Ok(e12.max().max(-e13.min()).max(-ep.min()).max(-point.epsilon))
}

/// Evaluates `φ` and a subgradient of its active branch.
fn objective(
    point: &SearchPoint,
    gamma: f64,
    lambda0: f64,
    data: &LmiData,
) -> Result<(f64, Subgradient)> {
    let d = data.a_hat.nrows();
    let mw = data.b_hat_omega.ncols();
    let m12 = assemble12_raw(data, &point.p, &point.v, point.epsilon, gamma, lambda0);
    let m13 = assemble13_raw(data, &point.p, gamma);
    let e12 = eig_sym(&m12)?;
    let e13 = eig_sym(&m13)?;
    let ep = eig_sym(&point.p)?;

    let branches = [e12.max(), -e13.min(), -ep.min(), -point.epsilon];
    let (active, phi) = branches
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("four branches");

    let zeros = || Subgradient {
        p: Array2::zeros(point.p.dim()),
        v: Array2::zeros(point.v.dim()),
        epsilon: 0.0,
    };
    let grad = match active {
        0 => {
            // u partitioned along the four block rows of the inequality.
            let u = e12.vectors.column(e12.values.len() - 1);
            let u1 = u.slice(s![..d]).to_owned();
            let u2 = u.slice(s![d..2 * d]).to_owned();
            let u3 = u.slice(s![2 * d..2 * d + mw]).to_owned();
            let u4 = u.slice(s![2 * d + mw..]).to_owned();
            // w = Âu₂ + B̂_ωu₃ collects every right-multiplication of P.
            let w = data.a_hat.dot(&u2) + data.b_hat_omega.dot(&u3);
            let gp = outer(&w, &u1) + outer(&u1, &w) - outer(&u1, &u1) - outer(&u2, &u2);
            let cu2 = data.c_tilde.dot(&u2);
            let gv = 2.0 * outer(&u1, &(&u4 - &cu2));
            let cu2_sq = cu2.iter().map(|x| x * x).sum::<f64>();
            let u4_sq = u4.iter().map(|x| x * x).sum::<f64>();
            Subgradient {
                p: gp,
                v: gv,
                epsilon: lambda0 * lambda0 * cu2_sq - u4_sq,
            }
        }
        1 => {
            let v = e13.vectors.column(0);
            let v2 = v.slice(s![data.c.nrows()..]).to_owned();
            Subgradient {
                p: -gamma * gamma * outer(&v2, &v2),
                ..zeros()
            }
        }
        2 => {
            let q = ep.vectors.column(0).to_owned();
            Subgradient {
                p: -outer(&q, &q),
                ..zeros()
            }
        }
        _ => Subgradient {
            epsilon: -1.0,
            ..zeros()
        },
    };
    Ok((phi, grad))
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Mat {
    let (n, m) = (a.len(), b.len());
    let mut out = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            out[[i, j]] = a[i] * b[j];
        }
    }
    out
}

/// Iterations per descent chunk; coordinates are rescaled between chunks.
const CHUNK_ITERATIONS: usize = 600;
/// Consecutive no-improvement chunks after which a restart is abandoned.
const STALL_LIMIT: usize = 3;
/// Starting `ε` values cycled through by the randomized restarts when
/// `ε` is free: the sweet spot of the uncertainty trade-off varies by
/// problem, and a multiplicative ladder covers it better than one scale.
const EPSILON_LADDER: [f64; 5] = [1.0, 0.3, 0.1, 0.03, 3.0];

/// One bounded subgradient descent run from `point`; returns the best
/// point and objective found, stopping early once `φ ≤ −margin`.
///
/// Polyak-style steps aim at the moving target `φ_best − δ`, with `δ`
/// doubled (up to `delta0`) after a successful step and halved after 20
/// consecutive misses.  The large reset `delta0` matters: early
/// overshooting steps are what carry the iterate along badly scaled
/// feasible valleys, and the chunk caller locks that travel in by
/// rescaling coordinates afterwards.
#[allow(clippy::too_many_arguments)]
fn descend_chunk(
    mut point: SearchPoint,
    gamma: f64,
    lambda0: f64,
    data: &LmiData,
    free_eps: bool,
    iterations: usize,
    margin: f64,
    delta0: f64,
) -> Result<(SearchPoint, f64, usize)> {
    let mut best = point.clone();
    let mut phi_best = f64::INFINITY;
    let mut delta = delta0;
    let mut misses = 0usize;
    // Target the previous step aimed at, pending adjudication by the
    // objective value computed at the top of the next iteration.
    let mut pending_target: Option<f64> = None;

    for iter in 0..iterations {
        let (phi, grad) = objective(&point, gamma, lambda0, data)?;
        if let Some(target) = pending_target.take() {
            if phi <= target {
                delta = (2.0 * delta).min(delta0);
                misses = 0;
            } else {
                misses += 1;
                if misses >= 20 {
                    delta = (delta / 2.0).max(1e-14);
                    misses = 0;
                }
            }
        }
        if phi < phi_best {
            phi_best = phi;
            best.p.assign(&point.p);
            best.v.assign(&point.v);
            best.epsilon = point.epsilon;
        }
        if phi_best <= -margin {
            return Ok((best, phi_best, iter + 1));
        }
        let g_sq = grad.norm_sq(free_eps);
        if g_sq < 1e-300 {
            // Flat subgradient: no direction left to try from here.
            return Ok((best, phi_best, iter + 1));
        }
        let target = phi_best - delta;
        // Polyak step toward the target level, with the displacement
        // capped so a wildly infeasible problem cannot launch the iterate
        // toward overflow within a few steps.
        let cap = 1e3 * (1.0 + point.magnitude()) / g_sq.sqrt();
        let step = ((phi - target) / g_sq).min(cap);
        point.p = &point.p - &(step * &grad.p);
        point.v = &point.v - &(step * &grad.v);
        if free_eps {
            // Multiplicative trust region: `ε` moves along its
            // subgradient but at most halves or doubles per step, so one
            // overshooting step cannot crash it to a useless scale.
            let moved = point.epsilon - step * grad.epsilon;
            point.epsilon = moved
                .clamp(0.5 * point.epsilon, 2.0 * point.epsilon)
                .max(1e-9);
        }
        if !point.epsilon.is_finite()
            || !max_abs(&point.p).is_finite()
            || !max_abs(&point.v).is_finite()
        {
            // Numerical escape: rewind to the best point and calm down.
            point = best.clone();
            delta /= 4.0;
            pending_target = None;
            continue;
        }
        pending_target = Some(target);
    }
    Ok((best, phi_best, iterations))
}

fn initial_point(
    aug: &AugmentedSystem,
    opts: &SolverOptions,
    restart: usize,
    rng: &mut ChaCha8Rng,
) -> SearchPoint {
    let d = aug.dim();
    let my = aug.sensing.output_dim();
    let fixed = match opts.epsilon {
        EpsilonMode::Fixed(e) => Some(e),
        EpsilonMode::Free => None,
    };
    if restart == 0 {
        return SearchPoint {
            p: Array2::eye(d),
            v: Array2::zeros((d, my)),
            epsilon: fixed.unwrap_or(1.0),
        };
    }
    // Randomized restarts: P = s·I + 0.2·WWᵀ stays symmetric and is
    // overwhelmingly positive definite; V gets small perturbations and a
    // free ε cycles through the ladder with a random nudge.
    let scale: f64 = rng.random_range(0.2..3.0);
    let mut w: Mat = Array2::zeros((d, d));
    for v in w.iter_mut() {
        *v = rng.random_range(-0.5..0.5);
    }
    let p = scale * Array2::<f64>::eye(d) + 0.2 * w.dot(&w.t());
    let mut v: Mat = Array2::zeros((d, my));
    for entry in v.iter_mut() {
        *entry = rng.random_range(-0.3..0.3);
    }
    let epsilon = fixed.unwrap_or_else(|| {
        EPSILON_LADDER[restart % EPSILON_LADDER.len()] * rng.random_range(-0.3..0.3f64).exp()
    });
    SearchPoint { p, v, epsilon }
}

/// Nudges a stalled iterate off its current kink; magnitudes are relative
/// so badly scaled coordinates receive proportionate kicks.
fn jitter(point: &mut SearchPoint, free_eps: bool, rng: &mut ChaCha8Rng) {
    for x in point.p.iter_mut() {
        *x += rng.random_range(-0.02..0.02) * (1.0 + x.abs());
    }
    point.p = 0.5 * (&point.p + &point.p.t());
    for x in point.v.iter_mut() {
        *x += rng.random_range(-0.02..0.02) * (1.0 + x.abs());
    }
    if free_eps {
        point.epsilon = (point.epsilon * rng.random_range(-0.1..0.1f64).exp()).max(1e-9);
    }
}

/// Searches for `(P, V, ε)` making both inequalities hold with margin
/// `opts.margin`, and extracts the gain on success.
///
/// The search is deterministic for a fixed seed: one canonical start
/// (`P = I, V = 0, ε = 1`) followed by `opts.restarts` seeded random
/// restarts, first success wins.  Each restart interleaves descent
/// chunks with a diagonal rescaling of the state coordinates that
/// renormalizes the current `P` iterate to unit diagonal (an exact
/// congruence of both inequalities), and success is declared on the
/// objective mapped back to the original coordinates.  Failure returns
/// [`Error::Infeasible`] carrying the best objective reached — evidence
/// of an unsuccessful search, not an infeasibility proof.
pub fn solve_feasibility(
    aug: &AugmentedSystem,
    gamma: f64,
    lambda0: f64,
    opts: &SolverOptions,
) -> Result<SynthesisCertificate> {
    opts.validate()?;
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be positive and finite, got {gamma}"),
        });
    }
    if !lambda0.is_finite() || lambda0 < 0.0 {
        return Err(Error::InvalidParameter {
            name: "lambda0",
            reason: format!("must be nonnegative and finite, got {lambda0}"),
        });
    }
    let base = LmiData::from_aug(aug);
    let dim = aug.dim();
    let free_eps = matches!(opts.epsilon, EpsilonMode::Free);
    let chunk = CHUNK_ITERATIONS.min(opts.max_iterations);
    let rounds = opts.max_iterations.div_ceil(chunk);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best_phi = f64::INFINITY;
    let mut total_iterations = 0usize;
    let restarts = opts.restarts + 1;

    for restart in 0..restarts {
        let mut point = initial_point(aug, opts, restart, &mut rng);
        let mut t: Array1<f64> = Array1::ones(dim);
        let mut data = base.clone();
        let mut stalls = 0usize;
        let mut phi_prev = f64::INFINITY;

        for _ in 0..rounds {
            let phi_start = objective_value(&point, gamma, lambda0, &data)?;
            let delta0 = phi_start.abs().max(1.0);
            let (chunk_best, phi_chunk, used) = descend_chunk(
                point,
                gamma,
                lambda0,
                &data,
                free_eps,
                chunk,
                opts.margin,
                delta0,
            )?;
            total_iterations += used;
            point = chunk_best;

            // Success is judged in the original coordinates, where the
            // certificate's margins will be recomputed.
            let original = point.clone().into_original(&t);
            let phi_original = objective_value(&original, gamma, lambda0, &base)?;
            best_phi = best_phi.min(phi_original);
            if phi_original <= -opts.margin {
                let vars = LmiVariables::new(original.p, original.v, original.epsilon)?;
                let f = compute_gain(&vars, aug)?;
                let margins = recompute_margins(&vars, gamma, lambda0, aug)?;
                return Ok(SynthesisCertificate {
                    variables: vars,
                    f,
                    gamma,
                    lambda0,
                    margins,
                });
            }

            if phi_prev - phi_chunk < 1e-12 {
                stalls += 1;
                if stalls >= STALL_LIMIT {
                    break;
                }
                jitter(&mut point, free_eps, &mut rng);
            } else {
                stalls = 0;
            }
            phi_prev = phi_chunk;

            // Renormalize the P iterate to unit diagonal; the accumulated
            // scale is folded into the data so feasibility is unchanged.
            let mut d_scale: Array1<f64> = Array1::ones(dim);
            let mut worth_it = false;
            for i in 0..dim {
                let pii = point.p[[i, i]].max(1e-12);
                let di = (1.0 / pii.sqrt()).clamp(1e-3, 1e3);
                d_scale[i] = di;
                if di.ln().abs() > 0.02 {
                    worth_it = true;
                }
            }
            if worth_it {
                for ((i, j), x) in point.p.indexed_iter_mut() {
                    *x *= d_scale[i] * d_scale[j];
                }
                for (i, row) in point.v.rows_mut().into_iter().enumerate() {
                    for x in row {
                        *x *= d_scale[i];
                    }
                }
                for i in 0..dim {
                    t[i] *= d_scale[i];
                }
                data = base.rescaled(&t);
            }
        }
    }
    Err(Error::Infeasible {
        best_objective: best_phi,
        iterations: total_iterations,
        restarts,
    })
}

/// Extracts the protocol gain by solving `PF = V`; requires `P ≻ 0`.
pub fn compute_gain(vars: &LmiVariables, aug: &AugmentedSystem) -> Result<ProtocolGain> {
    let min_eig = eig_sym(&vars.p)?.min();
    if min_eig <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min_eig,
        });
    }
    let f = solve_linear(&vars.p, &vars.v)?;
    ProtocolGain::new(f, aug.leader.block_count(), aug.leader.block_size())
}

fn recompute_margins(
    vars: &LmiVariables,
    gamma: f64,
    lambda0: f64,
    aug: &AugmentedSystem,
) -> Result<CertificateMargins> {
    let m12 = assemble_lmi12(vars, gamma, lambda0, aug)?;
    let m13 = assemble_lmi13(vars, gamma, aug)?;
    Ok(CertificateMargins {
        feasibility: -eig_sym(&m12)?.max(),
        output: eig_sym(&m13)?.min(),
        p_positivity: eig_sym(&vars.p)?.min(),
    })
}

/// Re-checks a certificate from scratch: margins are recomputed from the
/// stored variables at the certificate's own `(γ, λ₀)`, then the gain is
/// run through both the decoupled and the coupled verification at the
/// requested level `gamma`.
pub fn certify(
    cert: &SynthesisCertificate,
    aug: &AugmentedSystem,
    dec: &StochasticDecomposition,
    gamma: f64,
    hinf: &HinfOptions,
) -> Result<CertificationReport> {
    let margins = recompute_margins(&cert.variables, cert.gamma, cert.lambda0, aug)?;
    let spectrum = follower_spectrum(dec)?;
    let decoupled = verify_decoupled(aug, &cert.f, &spectrum, gamma, hinf)?;
    let coupled = verify_coupled(aug, &cert.f, dec, gamma, hinf)?;
    let pass = margins.valid() && cert.variables.epsilon > 0.0 && decoupled.pass && coupled.pass;
    Ok(CertificationReport {
        margins,
        epsilon: cert.variables.epsilon,
        decoupled,
        coupled,
        pass,
    })
}
