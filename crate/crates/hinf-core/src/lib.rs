//! Design and verification toolkit for distributed H∞ leader-following
//! tracking in discrete-time multi-agent networks with a high-dimensional
//! leader.
//!
//! A network of `N` agents is considered: agent 1 is a leader whose state
//! `Θ(k) ∈ R^{n·m0}` evolves autonomously as `Θ(k+1) = Â Θ(k)`, and agents
//! `2..N` are followers with low-dimensional dynamics
//! `x_i(k+1) = A x_i(k) + u_i(k) + B_ω ω_i(k)` that must track the leader's
//! last state block while attenuating disturbances in the H∞ sense.  Each
//! follower runs a distributed estimator for the unmeasured leader blocks,
//! driven by neighbor-relative output information weighted by a
//! row-stochastic matrix built from the communication graph.
//!
//! The crate is organized as a pipeline:
//!
//! * [`kernel`] — dense matrix numerics (eigenvalues, singular values,
//!   linear solves) used by every other module,
//! * [`topology`] — communication-graph validation and the scaled
//!   row-stochastic decomposition with its follower-block spectrum,
//! * [`plant`] — leader/follower/protocol models and the assembly of the
//!   decoupled and coupled error-dynamics state-space systems,
//! * [`analysis`] — Schur stability, discrete-time H∞ norms, PBH
//!   detectability, and the decoupled/coupled verification reports,
//! * [`synthesis`] — LMI assembly and a subgradient feasibility solver
//!   producing the protocol gain `F = P⁻¹V` with a checkable certificate,
//! * [`simulation`] — time-domain simulation of the closed-loop network
//!   with CSV and SVG output,
//! * [`config`] — the on-disk project description (TOML, with a JSON
//!   subset accepted) and serialization of gains and certificates.

pub mod analysis;
pub mod config;
pub mod error;
pub mod kernel;
pub mod plant;
pub mod simulation;
pub mod synthesis;
pub mod tolerances;
pub mod topology;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;
