//! The on-disk project description and machine-readable artifacts.
//!
//! A project file is a nested key-value tree with numeric arrays; matrices
//! are written row-by-row.  The primary syntax is TOML; a JSON object with
//! the same shape is accepted for machine generation (a file whose first
//! non-whitespace byte is `{` is parsed as JSON).  Loading validates every
//! cross-dimension constraint and reports violations by field path.
//!
//! Gains and synthesis certificates are written as JSON with shortest
//! round-trip float formatting, so every recorded number — margins in
//! particular — survives a write/read cycle bit-for-bit.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::kernel::Mat;
use crate::plant::{
    build_augmented, AugmentedSystem, FollowerModel, LeaderModel, ProtocolGain, SensingModel,
};
use crate::simulation::{DisturbanceKind, InitialConditions, SimConfig};
use crate::synthesis::{
    CertificateMargins, EpsilonMode, LmiVariables, SolverOptions, SynthesisCertificate,
};
use crate::topology::{build_stochastic, Adjacency, StochasticDecomposition};
use crate::Result;

/// Complete project description: network, models, performance level,
/// solver budget, and simulation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub topology: TopologySection,
    pub leader: LeaderSection,
    pub follower: FollowerSection,
    pub sensing: SensingSection,
    pub performance: PerformanceSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    /// Optional externally supplied gain for comparison runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSection>,
}

/// Communication graph: agent 1 (row/column 0) is the leader.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    /// Positive offset added to the row-sum bound when scaling weights.
    pub h: f64,
    /// `N × N` weight matrix, row-by-row; entry `(i, j)` weights the edge
    /// from agent `j + 1` into agent `i + 1`.
    pub adjacency: Vec<Vec<f64>>,
}

/// The leader: `block_count` blocks of size `block_size` with state
/// matrix `a_hat`; only the last block is sensed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderSection {
    pub block_count: usize,
    pub block_size: usize,
    pub a_hat: Vec<Vec<f64>>,
}

/// Follower dynamics `x⁺ = a x + u + b_omega ω`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FollowerSection {
    pub a: Vec<Vec<f64>>,
    pub b_omega: Vec<Vec<f64>>,
}

/// The exchange matrix through which relative outputs are sensed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSection {
    pub e: Vec<Vec<f64>>,
}

/// Performance output `e = c ρ` and the attenuation level `γ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerformanceSection {
    pub c: Vec<Vec<f64>>,
    pub gamma: f64,
}

/// `ε` handling in the feasibility search: a positive number pins it, the
/// string `"free"` leaves it to the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonSetting {
    Fixed(f64),
    Named(FreeKeyword),
}

/// The only accepted keyword for a non-numeric `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreeKeyword {
    Free,
}

impl EpsilonSetting {
    pub fn resolve(&self) -> Result<EpsilonMode> {
        match self {
            EpsilonSetting::Named(FreeKeyword::Free) => Ok(EpsilonMode::Free),
            EpsilonSetting::Fixed(v) if v.is_finite() && *v > 0.0 => Ok(EpsilonMode::Fixed(*v)),
            EpsilonSetting::Fixed(v) => Err(Error::ConfigField {
                field: "solver.epsilon".into(),
                reason: format!("must be positive and finite or \"free\", got {v}"),
            }),
        }
    }
}

/// Feasibility-search budget; defaults match [`SolverOptions::default`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub epsilon: EpsilonSetting,
    pub margin: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let defaults = SolverOptions::default();
        SolverSection {
            epsilon: EpsilonSetting::Named(FreeKeyword::Free),
            margin: defaults.margin,
            max_iterations: defaults.max_iterations,
            restarts: defaults.restarts,
            seed: defaults.seed,
        }
    }
}

/// Disturbance selection for simulation runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceSection {
    /// `"none"` or `"sine"` (the windowed per-agent sinusoid).
    pub kind: String,
    pub amplitude: f64,
    pub window_end: usize,
}

impl Default for DisturbanceSection {
    fn default() -> Self {
        DisturbanceSection {
            kind: "sine".into(),
            amplitude: 25.0,
            window_end: 200,
        }
    }
}

impl DisturbanceSection {
    pub fn resolve(&self) -> Result<DisturbanceKind> {
        match self.kind.as_str() {
            "none" => Ok(DisturbanceKind::None),
            "sine" => {
                if !self.amplitude.is_finite() {
                    return Err(Error::ConfigField {
                        field: "simulation.disturbance.amplitude".into(),
                        reason: format!("must be finite, got {}", self.amplitude),
                    });
                }
                Ok(DisturbanceKind::WindowedSine {
                    amplitude: self.amplitude,
                    window_end: self.window_end,
                })
            }
            other => Err(Error::ConfigField {
                field: "simulation.disturbance.kind".into(),
                reason: format!("expected \"none\" or \"sine\", got \"{other}\""),
            }),
        }
    }
}

/// Simulation settings.  When none of `theta0`, `x0`, `z0` are given,
/// the leader and follower states are drawn uniformly from
/// `(−initial_scale, initial_scale)` using `seed`, and estimators start
/// at zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub horizon: usize,
    pub seed: u64,
    pub initial_scale: f64,
    /// Explicit leader initial state (length `block_count·block_size`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    /// Explicit follower initial states, one row per follower.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<Vec<f64>>>,
    /// Explicit estimator initial states, one row per follower
    /// (length `(block_count−1)·block_size`); zero when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z0: Option<Vec<Vec<f64>>>,
    pub disturbance: DisturbanceSection,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            horizon: 400,
            seed: 7,
            initial_scale: 1.0,
            theta0: None,
            x0: None,
            z0: None,
            disturbance: DisturbanceSection::default(),
        }
    }
}

/// An externally supplied gain, row-by-row (`block_count·block_size`
/// rows, sensed-output-dimension columns).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    pub gain: Vec<Vec<f64>>,
}

fn rows_to_mat(rows: &[Vec<f64>], field: &str) -> Result<Mat> {
    if rows.is_empty() {
        return Err(Error::ConfigField {
            field: field.into(),
            reason: "matrix must have at least one row".into(),
        });
    }
    let cols = rows[0].len();
    if cols == 0 {
        return Err(Error::ConfigField {
            field: field.into(),
            reason: "matrix rows must be non-empty".into(),
        });
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::ConfigField {
            field: field.into(),
            reason: format!(
                "row {} has {} entries, expected {cols} (rows must be rectangular)",
                i + 1,
                row.len()
            ),
        });
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if let Some(bad) = flat.iter().find(|v| !v.is_finite()) {
        return Err(Error::ConfigField {
            field: field.into(),
            reason: format!("all entries must be finite, found {bad}"),
        });
    }
    Array2::from_shape_vec((rows.len(), cols), flat).map_err(|e| Error::ConfigField {
        field: field.into(),
        reason: e.to_string(),
    })
}

fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn field_err(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::ConfigField {
        field: field.into(),
        reason: e.to_string(),
    }
}

impl ProjectConfig {
    /// Parses TOML (or JSON, when the text starts with `{`) and validates
    /// every cross-dimension constraint.
    pub fn parse(text: &str) -> Result<Self> {
        let config: ProjectConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::ConfigParse {
                reason: e.to_string(),
            })?
        } else {
            toml::from_str(text).map_err(|e| Error::ConfigParse {
                reason: e.to_string(),
            })?
        };
        config.validate()?;
        Ok(config)
    }

    /// Reads and parses a project file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Runs every constructor the sections feed, so any violated
    /// constraint surfaces with its field path.
    pub fn validate(&self) -> Result<()> {
        let adj = self.adjacency()?;
        self.decomposition(&adj)?;
        let aug = self.augmented()?;
        self.gamma()?;
        self.solver_options()?;
        self.sim_config(&adj, &aug)?;
        if self.reference.is_some() {
            self.reference_gain(&aug)?;
        }
        Ok(())
    }

    pub fn adjacency(&self) -> Result<Adjacency> {
        let weights = rows_to_mat(&self.topology.adjacency, "topology.adjacency")?;
        Adjacency::new(weights).map_err(field_err("topology.adjacency"))
    }

    pub fn decomposition(&self, adj: &Adjacency) -> Result<StochasticDecomposition> {
        if !self.topology.h.is_finite() || self.topology.h <= 0.0 {
            return Err(Error::ConfigField {
                field: "topology.h".into(),
                reason: format!("must be positive and finite, got {}", self.topology.h),
            });
        }
        build_stochastic(adj, self.topology.h).map_err(field_err("topology"))
    }

    pub fn augmented(&self) -> Result<AugmentedSystem> {
        let a_hat = rows_to_mat(&self.leader.a_hat, "leader.a_hat")?;
        let leader = LeaderModel::new(self.leader.block_count, self.leader.block_size, a_hat)
            .map_err(field_err("leader"))?;
        let a = rows_to_mat(&self.follower.a, "follower.a")?;
        let b_omega = rows_to_mat(&self.follower.b_omega, "follower.b_omega")?;
        let follower = FollowerModel::new(a, b_omega).map_err(field_err("follower"))?;
        let e = rows_to_mat(&self.sensing.e, "sensing.e")?;
        let sensing = SensingModel::new(e).map_err(field_err("sensing.e"))?;
        let c = rows_to_mat(&self.performance.c, "performance.c")?;
        build_augmented(leader, follower, sensing, c).map_err(field_err("performance.c"))
    }

    pub fn gamma(&self) -> Result<f64> {
        let gamma = self.performance.gamma;
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::ConfigField {
                field: "performance.gamma".into(),
                reason: format!("must be positive and finite, got {gamma}"),
            });
        }
        Ok(gamma)
    }

    pub fn solver_options(&self) -> Result<SolverOptions> {
        let section = &self.solver;
        if !section.margin.is_finite() || section.margin <= 0.0 {
            return Err(Error::ConfigField {
                field: "solver.margin".into(),
                reason: format!("must be positive and finite, got {}", section.margin),
            });
        }
        if section.max_iterations == 0 {
            return Err(Error::ConfigField {
                field: "solver.max_iterations".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(SolverOptions {
            max_iterations: section.max_iterations,
            margin: section.margin,
            restarts: section.restarts,
            seed: section.seed,
            epsilon: section.epsilon.resolve()?,
        })
    }

    /// Builds the simulation settings, resolving initial conditions
    /// against the network and model dimensions.
    pub fn sim_config(&self, adj: &Adjacency, aug: &AugmentedSystem) -> Result<SimConfig> {
        let section = &self.simulation;
        if section.horizon == 0 {
            return Err(Error::ConfigField {
                field: "simulation.horizon".into(),
                reason: "must be at least 1".into(),
            });
        }
        let nf = adj.follower_count();
        let n = aug.leader.block_count();
        let m0 = aug.leader.block_size();
        let initials = match (&section.theta0, &section.x0, &section.z0) {
            (None, None, None) => {
                if !section.initial_scale.is_finite() || section.initial_scale <= 0.0 {
                    return Err(Error::ConfigField {
                        field: "simulation.initial_scale".into(),
                        reason: format!(
                            "must be positive and finite, got {}",
                            section.initial_scale
                        ),
                    });
                }
                InitialConditions::Seeded {
                    scale: section.initial_scale,
                }
            }
            (Some(theta0), Some(x0), z0) => {
                if theta0.len() != n * m0 {
                    return Err(Error::ConfigField {
                        field: "simulation.theta0".into(),
                        reason: format!("expected {} entries, got {}", n * m0, theta0.len()),
                    });
                }
                if x0.len() != nf || x0.iter().any(|r| r.len() != m0) {
                    return Err(Error::ConfigField {
                        field: "simulation.x0".into(),
                        reason: format!("expected {nf} rows of {m0} entries"),
                    });
                }
                let z = match z0 {
                    Some(z0) => {
                        if z0.len() != nf || z0.iter().any(|r| r.len() != (n - 1) * m0) {
                            return Err(Error::ConfigField {
                                field: "simulation.z0".into(),
                                reason: format!("expected {nf} rows of {} entries", (n - 1) * m0),
                            });
                        }
                        z0.iter().map(|r| Array1::from_vec(r.clone())).collect()
                    }
                    None => vec![Array1::zeros((n - 1) * m0); nf],
                };
                InitialConditions::Explicit {
                    theta: Array1::from_vec(theta0.clone()),
                    x: x0.iter().map(|r| Array1::from_vec(r.clone())).collect(),
                    z,
                }
            }
            _ => {
                return Err(Error::ConfigField {
                    field: "simulation.theta0".into(),
                    reason: "explicit initial conditions need both theta0 and x0 \
                             (z0 optional, defaults to zero)"
                        .into(),
                });
            }
        };
        Ok(SimConfig {
            horizon: section.horizon,
            initials,
            disturbance: section.disturbance.resolve()?,
            seed: section.seed,
        })
    }

    /// The externally supplied comparison gain, when present.
    pub fn reference_gain(&self, aug: &AugmentedSystem) -> Result<Option<ProtocolGain>> {
        let Some(reference) = &self.reference else {
            return Ok(None);
        };
        let rows = rows_to_mat(&reference.gain, "reference.gain")?;
        if rows.ncols() != aug.sensing.output_dim() {
            return Err(Error::ConfigField {
                field: "reference.gain".into(),
                reason: format!(
                    "expected {} columns (sensed-output dimension), got {}",
                    aug.sensing.output_dim(),
                    rows.ncols()
                ),
            });
        }
        ProtocolGain::new(rows, aug.leader.block_count(), aug.leader.block_size())
            .map(Some)
            .map_err(field_err("reference.gain"))
    }
}

/// Serialized protocol gain: self-describing and diff-friendly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainFile {
    pub block_count: usize,
    pub block_size: usize,
    /// `block_count·block_size` rows, sensed-output-dimension columns.
    pub rows: Vec<Vec<f64>>,
}

impl GainFile {
    pub fn from_gain(gain: &ProtocolGain) -> Self {
        GainFile {
            block_count: gain.block_count(),
            block_size: gain.block_size(),
            rows: mat_to_rows(gain.matrix()),
        }
    }

    pub fn into_gain(&self) -> Result<ProtocolGain> {
        let rows = rows_to_mat(&self.rows, "gain.rows")?;
        ProtocolGain::new(rows, self.block_count, self.block_size).map_err(field_err("gain.rows"))
    }
}

/// Margins as serialized inside [`CertificateFile`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginsFile {
    pub feasibility: f64,
    pub output: f64,
    pub p_positivity: f64,
}

/// A synthesis certificate on disk: decision variables, extracted gain,
/// the context it was assembled with, and the recorded margins.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub gamma: f64,
    pub lambda0: f64,
    pub epsilon: f64,
    pub p: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub gain: GainFile,
    pub margins: MarginsFile,
}

impl CertificateFile {
    pub fn from_certificate(cert: &SynthesisCertificate) -> Self {
        CertificateFile {
            gamma: cert.gamma,
            lambda0: cert.lambda0,
            epsilon: cert.variables.epsilon,
            p: mat_to_rows(&cert.variables.p),
            v: mat_to_rows(&cert.variables.v),
            gain: GainFile::from_gain(&cert.f),
            margins: MarginsFile {
                feasibility: cert.margins.feasibility,
                output: cert.margins.output,
                p_positivity: cert.margins.p_positivity,
            },
        }
    }

    pub fn into_certificate(&self) -> Result<SynthesisCertificate> {
        let p = rows_to_mat(&self.p, "certificate.p")?;
        let v = rows_to_mat(&self.v, "certificate.v")?;
        let variables = LmiVariables::new(p, v, self.epsilon).map_err(field_err("certificate"))?;
        Ok(SynthesisCertificate {
            variables,
            f: self.gain.into_gain()?,
            gamma: self.gamma,
            lambda0: self.lambda0,
            margins: CertificateMargins {
                feasibility: self.margins.feasibility,
                output: self.margins.output,
                p_positivity: self.margins.p_positivity,
            },
        })
    }
}

/// Writes a machine-readable artifact as pretty-printed JSON.  Floats use
/// shortest round-trip formatting, so re-reading reproduces them exactly.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::ConfigParse {
        reason: e.to_string(),
    })?;
    writeln!(w)?;
    Ok(())
}

/// Reads a JSON artifact written by [`write_json`].
pub fn read_json<T: for<'de> Deserialize<'de>, R: Read>(mut r: R) -> Result<T> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    serde_json::from_str(&text).map_err(|e| Error::ConfigParse {
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const EXAMPLE_TOML: &str = r#"
[topology]
h = 0.2
adjacency = [
  [0.0, 0.0, 0.0, 0.0, 0.0],
  [1.2, 0.0, 2.0, 0.0, 0.0],
  [0.0, 2.0, 0.0, 0.0, 0.0],
  [1.5, 0.0, 0.0, 0.0, 1.9],
  [0.0, 0.0, 0.0, 1.9, 0.0],
]

[leader]
block_count = 3
block_size = 1
a_hat = [
  [1.0, 0.0, 0.0],
  [1.0, 1.0, 0.0],
  [1.0, 1.0, 0.5],
]

[follower]
a = [[0.2]]
b_omega = [[1.5]]

[sensing]
e = [[1.0]]

[performance]
c = [
  [0.15, 0.0, 0.0],
  [0.0, 0.15, 0.0],
  [0.0, 0.0, 0.15],
]
gamma = 1.0

[solver]
epsilon = 0.25

[simulation]
horizon = 400
seed = 7

[reference]
gain = [[0.0003], [0.0551], [0.4660]]
"#;

    #[test]
    fn toml_example_parses_and_validates() {
        let config = ProjectConfig::parse(EXAMPLE_TOML).unwrap();
        let adj = config.adjacency().unwrap();
        assert_eq!(adj.agent_count(), 5);
        let dec = config.decomposition(&adj).unwrap();
        assert!((dec.kappa - 3.6).abs() < 1e-12);
        let aug = config.augmented().unwrap();
        assert_eq!(aug.dim(), 3);
        assert_eq!(config.gamma().unwrap(), 1.0);
        let options = config.solver_options().unwrap();
        assert_eq!(options.epsilon, EpsilonMode::Fixed(0.25));
        assert_eq!(options.max_iterations, 40_000);
        let sim = config.sim_config(&adj, &aug).unwrap();
        assert_eq!(sim.horizon, 400);
        assert!(matches!(sim.initials, InitialConditions::Seeded { .. }));
        assert_eq!(
            sim.disturbance,
            DisturbanceKind::WindowedSine {
                amplitude: 25.0,
                window_end: 200
            }
        );
        let gain = config.reference_gain(&aug).unwrap().unwrap();
        assert_eq!(gain.matrix(), &array![[0.0003], [0.0551], [0.4660]]);
    }

    #[test]
    fn json_object_is_accepted() {
        let config = ProjectConfig::parse(EXAMPLE_TOML).unwrap();
        let json = serde_json::to_string_pretty(&config).unwrap();
        assert!(json.trim_start().starts_with('{'));
        let reparsed = ProjectConfig::parse(&json).unwrap();
        assert_eq!(reparsed.topology.h, config.topology.h);
        assert_eq!(reparsed.leader.a_hat, config.leader.a_hat);
        assert_eq!(reparsed.solver.epsilon, config.solver.epsilon);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{EXAMPLE_TOML}\n[extra]\nx = 1\n");
        match ProjectConfig::parse(&text) {
            Err(Error::ConfigParse { reason }) => assert!(reason.contains("extra"), "{reason}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_violations_name_the_field() {
        let text = EXAMPLE_TOML.replace("b_omega = [[1.5]]", "b_omega = [[1.5], [2.0]]");
        match ProjectConfig::parse(&text) {
            Err(Error::ConfigField { field, .. }) => assert_eq!(field, "follower"),
            other => panic!("expected field error, got {other:?}"),
        }
        let text = EXAMPLE_TOML.replace("gamma = 1.0", "gamma = -2.0");
        match ProjectConfig::parse(&text) {
            Err(Error::ConfigField { field, .. }) => assert_eq!(field, "performance.gamma"),
            other => panic!("expected field error, got {other:?}"),
        }
        let text = EXAMPLE_TOML.replace("h = 0.2", "h = 0.0");
        match ProjectConfig::parse(&text) {
            Err(Error::ConfigField { field, .. }) => assert_eq!(field, "topology.h"),
            other => panic!("expected field error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_matrix_rejected() {
        let text =
            EXAMPLE_TOML.replace("a_hat = [\n  [1.0, 0.0, 0.0],", "a_hat = [\n  [1.0, 0.0],");
        match ProjectConfig::parse(&text) {
            Err(Error::ConfigField { field, reason }) => {
                assert_eq!(field, "leader.a_hat");
                assert!(reason.contains("rectangular"), "{reason}");
            }
            other => panic!("expected field error, got {other:?}"),
        }
    }

    #[test]
    fn epsilon_keyword_and_errors() {
        let text = EXAMPLE_TOML.replace("epsilon = 0.25", "epsilon = \"free\"");
        let config = ProjectConfig::parse(&text).unwrap();
        assert_eq!(config.solver_options().unwrap().epsilon, EpsilonMode::Free);
        let text = EXAMPLE_TOML.replace("epsilon = 0.25", "epsilon = \"sometimes\"");
        assert!(matches!(
            ProjectConfig::parse(&text),
            Err(Error::ConfigParse { .. })
        ));
        let text = EXAMPLE_TOML.replace("epsilon = 0.25", "epsilon = -0.25");
        match ProjectConfig::parse(&text) {
            Err(Error::ConfigField { field, .. }) => assert_eq!(field, "solver.epsilon"),
            other => panic!("expected field error, got {other:?}"),
        }
    }

    #[test]
    fn explicit_initials_resolve_and_check_dimensions() {
        let text = EXAMPLE_TOML.replace(
            "horizon = 400",
            "horizon = 400\ntheta0 = [0.1, 0.2, 0.3]\nx0 = [[0.1], [0.2], [0.3], [0.4]]",
        );
        let config = ProjectConfig::parse(&text).unwrap();
        let adj = config.adjacency().unwrap();
        let aug = config.augmented().unwrap();
        let sim = config.sim_config(&adj, &aug).unwrap();
        match sim.initials {
            InitialConditions::Explicit { theta, x, z } => {
                assert_eq!(theta, array![0.1, 0.2, 0.3]);
                assert_eq!(x.len(), 4);
                assert!(z.iter().all(|zi| zi.iter().all(|v| *v == 0.0)));
            }
            other => panic!("expected explicit initials, got {other:?}"),
        }
        let text = EXAMPLE_TOML.replace(
            "horizon = 400",
            "horizon = 400\ntheta0 = [0.1, 0.2]\nx0 = [[0.1], [0.2], [0.3], [0.4]]",
        );
        match ProjectConfig::parse(&text) {
            Err(Error::ConfigField { field, .. }) => assert_eq!(field, "simulation.theta0"),
            other => panic!("expected field error, got {other:?}"),
        }
    }

    #[test]
    fn disturbance_kinds() {
        let text = EXAMPLE_TOML.replace(
            "[reference]",
            "[simulation.disturbance]\nkind = \"none\"\n\n[reference]",
        );
        let config = ProjectConfig::parse(&text).unwrap();
        assert_eq!(
            config.simulation.disturbance.resolve().unwrap(),
            DisturbanceKind::None
        );
        let text = EXAMPLE_TOML.replace(
            "[reference]",
            "[simulation.disturbance]\nkind = \"square\"\n\n[reference]",
        );
        match ProjectConfig::parse(&text) {
            Err(Error::ConfigField { field, .. }) => {
                assert_eq!(field, "simulation.disturbance.kind");
            }
            other => panic!("expected field error, got {other:?}"),
        }
    }

    #[test]
    fn gain_file_round_trips_exactly() {
        let gain = ProtocolGain::new(array![[0.0003], [0.0551], [0.4660]], 3, 1).unwrap();
        let mut buf = Vec::new();
        write_json(&GainFile::from_gain(&gain), &mut buf).unwrap();
        let file: GainFile = read_json(buf.as_slice()).unwrap();
        let reloaded = file.into_gain().unwrap();
        assert_eq!(reloaded.matrix(), gain.matrix());
        assert_eq!(reloaded.block_size(), 1);
        assert_eq!(reloaded.block_count(), 3);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn certificate_round_trips_exactly() {
        let p = array![
            [5.46e5, -1.2e3, 1.12],
            [-1.2e3, 6.43, -0.643],
            [1.12, -0.643, 0.325]
        ];
        let v = array![[-0.8698], [0.2105], [0.1083]];
        let cert = SynthesisCertificate {
            variables: LmiVariables::new(p, v, 0.25).unwrap(),
            f: ProtocolGain::new(array![[0.0003], [0.0551], [0.4660]], 3, 1).unwrap(),
            gamma: 1.0,
            lambda0: 0.857_794_806_050_586_22,
            margins: CertificateMargins {
                feasibility: 9.351_018_878_985_385e-3,
                output: 0.977_5,
                p_positivity: 0.122_882_5,
            },
        };
        let mut buf = Vec::new();
        write_json(&CertificateFile::from_certificate(&cert), &mut buf).unwrap();
        let file: CertificateFile = read_json(buf.as_slice()).unwrap();
        let reloaded = file.into_certificate().unwrap();
        assert_eq!(reloaded.margins.feasibility, cert.margins.feasibility);
        assert_eq!(reloaded.margins.output, cert.margins.output);
        assert_eq!(reloaded.margins.p_positivity, cert.margins.p_positivity);
        assert_eq!(reloaded.variables.p, cert.variables.p);
        assert_eq!(reloaded.variables.epsilon, 0.25);
        assert_eq!(reloaded.lambda0, cert.lambda0);
    }

    #[test]
    fn missing_section_is_a_parse_error() {
        let text = EXAMPLE_TOML.replace("[sensing]\ne = [[1.0]]", "");
        match ProjectConfig::parse(&text) {
            Err(Error::ConfigParse { reason }) => assert!(reason.contains("sensing"), "{reason}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
