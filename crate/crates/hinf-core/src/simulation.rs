//! Time-domain simulation of the closed-loop network.
//!
//! The simulator runs the exact agent-level recursion — leader
//! `Θ(k+1) = Â Θ(k)`, relative information `ε_i(k)` from neighbor states,
//! protocol `u_i` / estimator update from [`crate::plant::protocol_step`],
//! and follower dynamics `x_i(k+1) = A x_i(k) + u_i(k) + B_ω ω_i(k)` —
//! rather than the compact error form, so that the recorded series are the
//! physically meaningful ones (a test pins the equivalence of the two).
//!
//! Recorded per step: the leader state, each follower's stacked state
//! `ζ_i = (z_i¹,…,z_i^{n−1}, x_i)`, the tracking errors `ρ_i = ζ_i − Θ`
//! (computed exactly as that difference), the performance outputs
//! `e_i(k) = C ρ_i(k)`, the relative information, controls, disturbances,
//! the aggregate tracking error `E(k) = Σ_i ‖ρ_i(k)‖²`, and the running
//! energy sums `Σ_{j≤k} ‖e(j)‖²` and `Σ_{j≤k} ‖ω(j)‖²`.  All series have
//! `horizon + 1` entries (steps `0..=horizon`); controls and relative
//! information at step `horizon` are evaluated but not applied.
//!
//! Energies are accumulated in squared form (no square roots), matching
//! the attenuation inequality `Σ‖e‖² ≤ γ² Σ‖ω‖²` that
//! [`energy_curves`] exposes; the bound is meaningful under zero initial
//! conditions, which the caller is responsible for when comparing curves.

use std::fmt::Write as _;
use std::io::{self, Write};

use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::kernel::Mat;
use crate::plant::{protocol_step, relative_information, AugmentedSystem, ProtocolGain};
use crate::topology::{Adjacency, StochasticDecomposition};
use crate::Result;

/// Disturbance model driving the follower inputs.
///
/// Follower agents are indexed `2..=N` (agent 1 is the leader), matching
/// the labeling used in reports and CSV headers.
#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceKind {
    /// `ω_i(k) ≡ 0` for every follower.
    None,
    /// `ω_i(k) = amplitude · sin(i·(k−1))` for `0 ≤ k ≤ window_end` and
    /// zero afterwards, replicated across all disturbance channels; `i`
    /// is the follower's agent index.
    WindowedSine { amplitude: f64, window_end: usize },
    /// Tabulated values: `rows[f]` holds one row per step for follower
    /// position `f` (agent index `f + 2`), each row of width `m_ω`.
    /// Steps beyond the table are an error.
    Table(Vec<Mat>),
}

impl DisturbanceKind {
    /// The disturbance of the follower with agent index `i` (`≥ 2`) at
    /// step `k`, as a vector of width `m_omega`.
    pub fn sample(&self, i: usize, k: usize, m_omega: usize) -> Result<Array1<f64>> {
        match self {
            DisturbanceKind::None => Ok(Array1::zeros(m_omega)),
            DisturbanceKind::WindowedSine {
                amplitude,
                window_end,
            } => {
                let value = if k <= *window_end {
                    amplitude * (i as f64 * (k as f64 - 1.0)).sin()
                } else {
                    0.0
                };
                Ok(Array1::from_elem(m_omega, value))
            }
            DisturbanceKind::Table(rows) => {
                let f = i.checked_sub(2).ok_or_else(|| Error::DisturbanceTable {
                    reason: format!("agent index {i} is not a follower"),
                })?;
                let table = rows.get(f).ok_or_else(|| Error::DisturbanceTable {
                    reason: format!("no table for follower agent {i} ({} provided)", rows.len()),
                })?;
                if table.ncols() != m_omega {
                    return Err(Error::DisturbanceTable {
                        reason: format!(
                            "table for agent {i} has {} columns, disturbance dimension is {m_omega}",
                            table.ncols()
                        ),
                    });
                }
                if k >= table.nrows() {
                    return Err(Error::DisturbanceTable {
                        reason: format!(
                            "step {k} beyond table for agent {i} ({} rows)",
                            table.nrows()
                        ),
                    });
                }
                Ok(table.row(k).to_owned())
            }
        }
    }
}

/// Initial conditions for the leader, followers, and estimators.
#[derive(Debug, Clone)]
pub enum InitialConditions {
    /// Everything starts at zero (the setting for attenuation checks).
    Zero,
    /// `Θ(0)` and each `x_i(0)` drawn uniformly from `(−scale, scale)`
    /// with the config seed; estimator states start at zero.  The leader
    /// is drawn first, then followers in order, so a seed pins the run.
    Seeded { scale: f64 },
    /// Explicit `Θ(0)`, follower states, and estimator states (stacked
    /// `n−1` blocks of size `m0` each, empty when `n = 1`).
    Explicit {
        theta: Array1<f64>,
        x: Vec<Array1<f64>>,
        z: Vec<Array1<f64>>,
    },
}

/// Simulation settings.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Number of steps to advance; series get `horizon + 1` entries.
    pub horizon: usize,
    pub initials: InitialConditions,
    pub disturbance: DisturbanceKind,
    /// Seed used by [`InitialConditions::Seeded`].
    pub seed: u64,
}

impl SimConfig {
    /// A zero-initial-condition run with the given disturbance.
    pub fn zero_state(horizon: usize, disturbance: DisturbanceKind) -> Self {
        SimConfig {
            horizon,
            initials: InitialConditions::Zero,
            disturbance,
            seed: 0,
        }
    }
}

/// Everything recorded by [`simulate`].  Per-follower collections are
/// indexed by follower position (agent index minus two); matrix series
/// hold one row per step, `horizon + 1` rows in total.
#[derive(Debug, Clone)]
pub struct Trajectories {
    /// Leader states `Θ(k)`, width `n·m0`.
    pub theta: Mat,
    /// Stacked follower states `ζ_i(k) = (z_i¹,…,z_i^{n−1}, x_i)`.
    pub zeta: Vec<Mat>,
    /// Tracking errors `ρ_i(k) = ζ_i(k) − Θ(k)`.
    pub rho: Vec<Mat>,
    /// Performance outputs `e_i(k) = C ρ_i(k)`, stacked across followers.
    pub e: Mat,
    /// Relative information `ε_i(k)` sensed by each follower.
    pub epsilon: Vec<Mat>,
    /// Protocol controls `u_i(k)`.
    pub u: Vec<Mat>,
    /// Applied disturbances `ω_i(k)`.
    pub omega: Vec<Mat>,
    /// Aggregate tracking error `E(k) = Σ_i ‖ρ_i(k)‖²`.
    pub tracking: Array1<f64>,
    /// Running sum `Σ_{j≤k} ‖e(j)‖²` (all followers).
    pub cumulative_output_energy: Array1<f64>,
    /// Running sum `Σ_{j≤k} ‖ω(j)‖²` (all followers, unscaled by `γ²`).
    pub cumulative_disturbance_energy: Array1<f64>,
}

impl Trajectories {
    /// Number of recorded steps (`horizon + 1`).
    pub fn len(&self) -> usize {
        self.theta.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.nrows() == 0
    }

    /// Number of followers.
    pub fn follower_count(&self) -> usize {
        self.zeta.len()
    }
}

/// Runs the closed-loop recursion for `config.horizon` steps.
///
/// Fails with [`Error::NonFiniteState`] if any state stops being finite
/// (the typical symptom of simulating an unstable loop), and propagates
/// disturbance-table and dimension errors.
pub fn simulate(
    adj: &Adjacency,
    dec: &StochasticDecomposition,
    aug: &AugmentedSystem,
    gain: &ProtocolGain,
    config: &SimConfig,
) -> Result<Trajectories> {
    if config.horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: "must be at least 1".into(),
        });
    }
    let nf = adj.follower_count();
    if dec.d_breve.nrows() != nf {
        return Err(Error::dims(
            "stochastic decomposition",
            format!("{nf} followers"),
            format!("{}", dec.d_breve.nrows()),
        ));
    }
    let n = aug.leader.block_count();
    let m0 = aug.leader.block_size();
    let dim = aug.dim();
    let my = aug.sensing.output_dim();
    let mw = aug.follower.disturbance_dim();
    let m1 = aug.performance_dim();
    if gain.matrix().dim() != (dim, my) {
        return Err(Error::dims(
            "gain",
            format!("{dim}x{my}"),
            format!("{}x{}", gain.matrix().nrows(), gain.matrix().ncols()),
        ));
    }

    let (mut theta, mut x, mut z) = initial_state(config, nf, n, m0)?;

    let steps = config.horizon + 1;
    let mut out = Trajectories {
        theta: Array2::zeros((steps, dim)),
        zeta: vec![Array2::zeros((steps, dim)); nf],
        rho: vec![Array2::zeros((steps, dim)); nf],
        e: Array2::zeros((steps, nf * m1)),
        epsilon: vec![Array2::zeros((steps, my)); nf],
        u: vec![Array2::zeros((steps, m0)); nf],
        omega: vec![Array2::zeros((steps, mw)); nf],
        tracking: Array1::zeros(steps),
        cumulative_output_energy: Array1::zeros(steps),
        cumulative_disturbance_energy: Array1::zeros(steps),
    };

    let mut energy_e = 0.0;
    let mut energy_w = 0.0;
    for k in 0..steps {
        out.theta.row_mut(k).assign(&theta);
        let mut e_sq = 0.0;
        let mut w_sq = 0.0;
        let mut tracking = 0.0;
        for f in 0..nf {
            let mut zeta = Array1::zeros(dim);
            zeta.slice_mut(s![..dim - m0]).assign(&z[f]);
            zeta.slice_mut(s![dim - m0..]).assign(&x[f]);
            let rho = &zeta - &theta;
            let e_f = aug.c.dot(&rho);
            tracking += rho.iter().map(|v| v * v).sum::<f64>();
            e_sq += e_f.iter().map(|v| v * v).sum::<f64>();
            out.zeta[f].row_mut(k).assign(&zeta);
            out.rho[f].row_mut(k).assign(&rho);
            out.e.slice_mut(s![k, f * m1..(f + 1) * m1]).assign(&e_f);
        }
        out.tracking[k] = tracking;

        let theta_n = theta.slice(s![dim - m0..]).to_owned();
        let eps = relative_information(adj, dec, &aug.sensing, &x, &theta_n)?;
        let mut x_next = Vec::with_capacity(nf);
        let mut z_next = Vec::with_capacity(nf);
        for f in 0..nf {
            let omega = config.disturbance.sample(f + 2, k, mw)?;
            w_sq += omega.iter().map(|v| v * v).sum::<f64>();
            let (u_f, z_plus) = protocol_step(aug, gain, &x[f], &z[f], &eps[f])?;
            out.epsilon[f].row_mut(k).assign(&eps[f]);
            out.omega[f].row_mut(k).assign(&omega);
            out.u[f].row_mut(k).assign(&u_f);
            if k + 1 < steps {
                let x_plus = aug.follower.a.dot(&x[f]) + &u_f + aug.follower.b_omega.dot(&omega);
                if !x_plus.iter().all(|v| v.is_finite()) || !z_plus.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFiniteState { step: k + 1 });
                }
                x_next.push(x_plus);
                z_next.push(z_plus);
            }
        }
        energy_e += e_sq;
        energy_w += w_sq;
        out.cumulative_output_energy[k] = energy_e;
        out.cumulative_disturbance_energy[k] = energy_w;
        if k + 1 < steps {
            x = x_next;
            z = z_next;
            theta = aug.leader.a_hat().dot(&theta);
            if !theta.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteState { step: k + 1 });
            }
        }
    }
    Ok(out)
}

/// Starting point of a run: leader state, follower states, estimator
/// states (one entry per follower).
type StartingState = (Array1<f64>, Vec<Array1<f64>>, Vec<Array1<f64>>);

fn initial_state(config: &SimConfig, nf: usize, n: usize, m0: usize) -> Result<StartingState> {
    let dim = n * m0;
    let z_dim = (n - 1) * m0;
    match &config.initials {
        InitialConditions::Zero => Ok((
            Array1::zeros(dim),
            vec![Array1::zeros(m0); nf],
            vec![Array1::zeros(z_dim); nf],
        )),
        InitialConditions::Seeded { scale } => {
            if !scale.is_finite() || *scale <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "initial scale",
                    reason: format!("must be positive and finite, got {scale}"),
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut draw = |len: usize| -> Array1<f64> {
                Array1::from_iter((0..len).map(|_| rng.random_range(-*scale..*scale)))
            };
            let theta = draw(dim);
            let x = (0..nf).map(|_| draw(m0)).collect();
            Ok((theta, x, vec![Array1::zeros(z_dim); nf]))
        }
        InitialConditions::Explicit { theta, x, z } => {
            if theta.len() != dim {
                return Err(Error::dims(
                    "initial theta",
                    format!("{dim}"),
                    format!("{}", theta.len()),
                ));
            }
            if x.len() != nf || z.len() != nf {
                return Err(Error::dims(
                    "initial follower states",
                    format!("{nf} of each"),
                    format!("{} x, {} z", x.len(), z.len()),
                ));
            }
            for (f, xi) in x.iter().enumerate() {
                if xi.len() != m0 {
                    return Err(Error::dims(
                        format!("initial x[{f}]"),
                        format!("{m0}"),
                        format!("{}", xi.len()),
                    ));
                }
            }
            for (f, zi) in z.iter().enumerate() {
                if zi.len() != z_dim {
                    return Err(Error::dims(
                        format!("initial z[{f}]"),
                        format!("{z_dim}"),
                        format!("{}", zi.len()),
                    ));
                }
            }
            Ok((theta.clone(), x.clone(), z.clone()))
        }
    }
}

/// The aggregate tracking error series `E(k) = Σ_i ‖ζ_i(k) − Θ(k)‖²`,
/// recomputed from the recorded states (equals `traj.tracking`).
pub fn tracking_error(traj: &Trajectories) -> Array1<f64> {
    let mut out = Array1::zeros(traj.len());
    for k in 0..traj.len() {
        let theta = traj.theta.row(k);
        out[k] = traj
            .zeta
            .iter()
            .map(|zeta| {
                zeta.row(k)
                    .iter()
                    .zip(theta.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum();
    }
    out
}

/// The attenuation comparison: cumulative output energy `Σ_{j≤k} ‖e(j)‖²`
/// against the scaled disturbance budget `γ² Σ_{j≤k} ‖ω(j)‖²`.  Under zero
/// initial conditions a verified loop keeps the first curve below the
/// second at every step.
pub fn energy_curves(traj: &Trajectories, gamma: f64) -> Result<(Array1<f64>, Array1<f64>)> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be positive and finite, got {gamma}"),
        });
    }
    Ok((
        traj.cumulative_output_energy.clone(),
        gamma * gamma * &traj.cumulative_disturbance_energy,
    ))
}

/// Formats a float with 17 significant digits (scientific notation), which
/// round-trips `f64` exactly.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the recorded series as CSV: `k`, leader state, each follower's
/// stacked state, the performance outputs, `E`, and the two cumulative
/// energy columns (`energy_w` already scaled by `γ²`).  Numbers carry 17
/// significant digits so the file round-trips exactly.
pub fn write_csv<W: Write>(traj: &Trajectories, gamma: f64, mut w: W) -> io::Result<()> {
    let nf = traj.follower_count();
    let dim = traj.theta.ncols();
    let m1 = traj.e.ncols().checked_div(nf).unwrap_or(0);
    let mut header = String::from("k");
    for j in 1..=dim {
        let _ = write!(header, ",theta_{j}");
    }
    for f in 0..nf {
        for j in 1..=dim {
            let _ = write!(header, ",zeta_{}_{j}", f + 2);
        }
    }
    for f in 0..nf {
        for j in 1..=m1 {
            let _ = write!(header, ",e_{}_{j}", f + 2);
        }
    }
    header.push_str(",E,energy_e,energy_w");
    writeln!(w, "{header}")?;

    let g2 = gamma * gamma;
    for k in 0..traj.len() {
        let mut line = format!("{k}");
        for v in traj.theta.row(k) {
            let _ = write!(line, ",{}", fmt17(*v));
        }
        for zeta in &traj.zeta {
            for v in zeta.row(k) {
                let _ = write!(line, ",{}", fmt17(*v));
            }
        }
        for v in traj.e.row(k) {
            let _ = write!(line, ",{}", fmt17(*v));
        }
        let _ = write!(
            line,
            ",{},{},{}",
            fmt17(traj.tracking[k]),
            fmt17(traj.cumulative_output_energy[k]),
            fmt17(g2 * traj.cumulative_disturbance_energy[k])
        );
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// A minimal SVG line plot of one or more series over the step index.
/// Presentation-only: a fixed canvas, auto-scaled axes with tick labels,
/// and one colored polyline per series.
pub fn write_line_plot<W: Write>(
    title: &str,
    series: &[(&str, &Array1<f64>)],
    mut w: W,
) -> io::Result<()> {
    const WIDTH: f64 = 720.0;
    const HEIGHT: f64 = 420.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 45.0;
    const COLORS: [&str; 6] = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    ];

    let max_len = series.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, s) in series {
        for &v in s.iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-300 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let x_of = |k: usize| {
        let frac = if max_len > 1 {
            k as f64 / (max_len - 1) as f64
        } else {
            0.0
        };
        LEFT + frac * (WIDTH - LEFT - RIGHT)
    };
    let y_of = |v: f64| {
        let frac = (v - lo) / (hi - lo);
        HEIGHT - BOTTOM - frac * (HEIGHT - TOP - BOTTOM)
    };

    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )?;
    writeln!(w, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>")?;
    writeln!(
        w,
        "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        xml_escape(title)
    )?;
    writeln!(
        w,
        "<line x1=\"{LEFT}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        HEIGHT - BOTTOM,
        WIDTH - RIGHT,
        HEIGHT - BOTTOM
    )?;
    writeln!(
        w,
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{:.1}\" stroke=\"black\"/>",
        HEIGHT - BOTTOM
    )?;
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let y = y_of(v);
        writeln!(
            w,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{LEFT}\" y2=\"{y:.1}\" stroke=\"black\"/>",
            LEFT - 5.0
        )?;
        writeln!(
            w,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{v:.3e}</text>",
            LEFT - 8.0,
            y + 4.0
        )?;
        let k = (max_len.saturating_sub(1)) * t / 4;
        let x = x_of(k);
        writeln!(
            w,
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
            HEIGHT - BOTTOM,
            HEIGHT - BOTTOM + 5.0
        )?;
        writeln!(
            w,
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{k}</text>",
            HEIGHT - BOTTOM + 18.0
        )?;
    }
    for (idx, (name, s)) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let mut points = String::new();
        for (k, &v) in s.iter().enumerate() {
            if v.is_finite() {
                let _ = write!(points, "{:.2},{:.2} ", x_of(k), y_of(v));
            }
        }
        writeln!(
            w,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            points.trim_end()
        )?;
        let ly = TOP + 16.0 * idx as f64;
        writeln!(
            w,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"3\"/>",
            LEFT + 10.0,
            LEFT + 34.0
        )?;
        writeln!(
            w,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            LEFT + 40.0,
            ly + 4.0,
            xml_escape(name)
        )?;
    }
    writeln!(w, "</svg>")
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
