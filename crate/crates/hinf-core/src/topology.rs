//! Communication topology: weighted adjacency validation, the
//! leader-rooted spanning-tree test, and the scaled row-stochastic
//! decomposition whose follower block drives the spectral decoupling.
//!
//! Conventions: agents are indexed `0..N` with agent `0` the leader.  The
//! weight `a[i][j] ≥ 0` is attached to the directed edge `j → i` (agent
//! `i` listens to agent `j`), so a row of the adjacency matrix lists the
//! in-neighbors of that agent.  The leader listens to nobody (row 0 is
//! zero) and follower-to-follower links must be symmetric.
//!
//! Given a positive design parameter `h`, the decomposition scales the
//! graph into a row-stochastic matrix
//!
//! ```text
//!       ┌ 1    0  ┐                    κ  = κ₀ + h,
//!   D = │         │   with            κ₀ = max over followers of the
//!       └ d̆    D̆  ┘                        full in-weight row sum,
//! ```
//!
//! where `D̆[i][i] = (h + δᵢ)/κ` with `δᵢ` the slack between `κ₀` and the
//! follower's own row sum, `D̆[i][j] = a[i][j]/κ` off the diagonal, and
//! `d̆[i] = a[i][leader]/κ`.  Every row of `D` sums to one by construction,
//! and under the stated assumptions all eigenvalues of `D̆` lie strictly
//! inside the unit disk.

use ndarray::{Array1, Array2};

use crate::error::Error;
use crate::kernel::{check_finite, eig_sym, Mat};
use crate::Result;

/// Weighted adjacency matrix of the communication graph.
///
/// `weights[[i, j]]` is the weight on the edge `j → i`; agent `0` is the
/// leader.
#[derive(Debug, Clone)]
pub struct Adjacency {
    weights: Mat,
}

/// A single violation of the structural assumptions on the graph.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A diagonal entry is nonzero (self-loops are not allowed).
    SelfLoop { agent: usize, value: f64 },
    /// The leader row has a nonzero entry (the leader has no neighbors).
    LeaderHasNeighbor { source: usize, value: f64 },
    /// A negative weight.
    NegativeWeight { row: usize, col: usize, value: f64 },
    /// A follower-to-follower pair is asymmetric.
    AsymmetricPair {
        row: usize,
        col: usize,
        forward: f64,
        backward: f64,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::SelfLoop { agent, value } => {
                write!(f, "agent {agent} has a self-loop of weight {value}")
            }
            Violation::LeaderHasNeighbor { source, value } => write!(
                f,
                "leader row must be zero but a[0][{source}] = {value}"
            ),
            Violation::NegativeWeight { row, col, value } => {
                write!(f, "negative weight a[{row}][{col}] = {value}")
            }
            Violation::AsymmetricPair {
                row,
                col,
                forward,
                backward,
            } => write!(
                f,
                "follower weights must be symmetric but a[{row}][{col}] = {forward} while a[{col}][{row}] = {backward}"
            ),
        }
    }
}

/// Result of validating an adjacency matrix; an empty violation list
/// means the graph satisfies all structural assumptions.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Adjacency {
    /// Wraps a square nonneg weight matrix; structural checks are done by
    /// [`Adjacency::validate`], which reports violations as data.
    pub fn new(weights: Mat) -> Result<Self> {
        let (r, c) = weights.dim();
        if r != c {
            return Err(Error::NonSquare { rows: r, cols: c });
        }
        if r < 2 {
            return Err(Error::InvalidParameter {
                name: "adjacency",
                reason: format!("need at least a leader and one follower, got {r} agent(s)"),
            });
        }
        check_finite(&weights, "adjacency")?;
        Ok(Adjacency { weights })
    }

    /// Total number of agents including the leader.
    pub fn agent_count(&self) -> usize {
        self.weights.nrows()
    }

    /// Number of followers.
    pub fn follower_count(&self) -> usize {
        self.agent_count() - 1
    }

    /// The raw weight matrix.
    pub fn weights(&self) -> &Mat {
        &self.weights
    }

    /// Weight of the edge `j → i`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[[i, j]]
    }

    /// Checks the structural assumptions: zero diagonal, zero leader row,
    /// nonnegative weights, and symmetric follower-to-follower links
    /// (within 1e-12).  Violations are data, not failures.
    pub fn validate(&self) -> ValidationReport {
        let n = self.agent_count();
        let a = &self.weights;
        let mut violations = Vec::new();
        for i in 0..n {
            if a[[i, i]] != 0.0 {
                violations.push(Violation::SelfLoop {
                    agent: i,
                    value: a[[i, i]],
                });
            }
        }
        for j in 0..n {
            if a[[0, j]] != 0.0 && j != 0 {
                violations.push(Violation::LeaderHasNeighbor {
                    source: j,
                    value: a[[0, j]],
                });
            }
        }
        for i in 0..n {
            for j in 0..n {
                if a[[i, j]] < 0.0 {
                    violations.push(Violation::NegativeWeight {
                        row: i,
                        col: j,
                        value: a[[i, j]],
                    });
                }
            }
        }
        for i in 1..n {
            for j in (i + 1)..n {
                if (a[[i, j]] - a[[j, i]]).abs() > 1e-12 {
                    violations.push(Violation::AsymmetricPair {
                        row: i,
                        col: j,
                        forward: a[[i, j]],
                        backward: a[[j, i]],
                    });
                }
            }
        }
        ValidationReport { violations }
    }

    /// True iff every follower is reachable from the leader in the
    /// directed graph with an edge `j → i` whenever `a[i][j] > 0`
    /// (breadth-first reachability from agent 0).
    pub fn has_leader_spanning_tree(&self) -> bool {
        let n = self.agent_count();
        let mut reached = vec![false; n];
        reached[0] = true;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(j) = queue.pop_front() {
            for (i, seen) in reached.iter_mut().enumerate() {
                if !*seen && self.weights[[i, j]] > 0.0 {
                    *seen = true;
                    queue.push_back(i);
                }
            }
        }
        reached.into_iter().all(|r| r)
    }
}

/// The scaled row-stochastic decomposition of a validated graph.
#[derive(Debug, Clone)]
pub struct StochasticDecomposition {
    /// Design parameter (strictly positive).
    pub h: f64,
    /// Largest follower row sum of the adjacency matrix (leader column
    /// included).
    pub kappa0: f64,
    /// Scaling constant `κ = κ₀ + h`.
    pub kappa: f64,
    /// Per-follower slack `δᵢ = κ₀ − Σⱼ a[follower i][j]`.
    pub delta: Vec<f64>,
    /// The full `N×N` row-stochastic matrix.
    pub d: Mat,
    /// The `(N−1)×(N−1)` follower block.
    pub d_breve: Mat,
    /// The `(N−1)` leader column of the follower rows.
    pub d_leader: Array1<f64>,
}

/// Builds the scaled row-stochastic decomposition for design parameter
/// `h > 0`.
///
/// An all-zero adjacency is allowed (`κ₀ = 0`): the follower block then
/// degenerates to `(h/κ)·I = I`, which simply means no information flows.
pub fn build_stochastic(adj: &Adjacency, h: f64) -> Result<StochasticDecomposition> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: format!("must be a positive finite scalar, got {h}"),
        });
    }
    let n = adj.agent_count();
    let nf = adj.follower_count();
    let a = adj.weights();

    let row_sums: Vec<f64> = (1..n).map(|i| (0..n).map(|s| a[[i, s]]).sum()).collect();
    let kappa0 = row_sums.iter().copied().fold(0.0, f64::max);
    let kappa = kappa0 + h;
    let delta: Vec<f64> = row_sums.iter().map(|&s| kappa0 - s).collect();

    let mut d_breve = Array2::zeros((nf, nf));
    for fi in 0..nf {
        for fj in 0..nf {
            d_breve[[fi, fj]] = if fi == fj {
                (h + delta[fi]) / kappa
            } else {
                a[[fi + 1, fj + 1]] / kappa
            };
        }
    }
    let d_leader = Array1::from_shape_fn(nf, |fi| a[[fi + 1, 0]] / kappa);

    let mut d = Array2::zeros((n, n));
    d[[0, 0]] = 1.0;
    for fi in 0..nf {
        d[[fi + 1, 0]] = d_leader[fi];
        for fj in 0..nf {
            d[[fi + 1, fj + 1]] = d_breve[[fi, fj]];
        }
    }

    Ok(StochasticDecomposition {
        h,
        kappa0,
        kappa,
        delta,
        d,
        d_breve,
        d_leader,
    })
}

/// Eigenvalues of the follower block, which are real because the block is
/// symmetric whenever the follower links are.
#[derive(Debug, Clone)]
pub struct FollowerSpectrum {
    /// Eigenvalues of the follower block, sorted ascending.
    pub lambda: Vec<f64>,
    /// Largest eigenvalue magnitude.
    pub lambda0: f64,
}

/// Computes the follower-block spectrum of a decomposition.
///
/// Errors if the follower block is not symmetric (asymmetric follower
/// links violate the standing assumptions).
pub fn follower_spectrum(dec: &StochasticDecomposition) -> Result<FollowerSpectrum> {
    let eig = eig_sym(&dec.d_breve)?;
    let lambda0 = eig.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(FollowerSpectrum {
        lambda: eig.values,
        lambda0,
    })
}

/// The worked network used throughout the test suite: five agents, a
/// leader and four followers, with the weights shown.
#[cfg(test)]
pub(crate) fn five_agent_example() -> Adjacency {
    use ndarray::array;
    Adjacency::new(array![
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [1.2, 0.0, 2.0, 0.0, 0.0],
        [0.0, 2.0, 0.0, 0.0, 0.0],
        [1.5, 0.0, 0.0, 0.0, 1.9],
        [0.0, 0.0, 0.0, 1.9, 0.0]
    ])
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::eig_general;
    use ndarray::array;

    #[test]
    fn five_agent_network_is_valid() {
        let adj = five_agent_example();
        assert!(adj.validate().is_valid());
        assert!(adj.has_leader_spanning_tree());
    }

    #[test]
    fn asymmetric_pair_is_reported() {
        let adj =
            Adjacency::new(array![[0.0, 0.0, 0.0], [0.0, 0.0, 2.0], [0.0, 1.0, 0.0]]).unwrap();
        let report = adj.validate();
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(
            report.violations[0],
            Violation::AsymmetricPair { row: 1, col: 2, .. }
        ));
    }

    #[test]
    fn self_loop_is_reported() {
        let adj = Adjacency::new(array![[0.0, 0.0], [0.0, 1.0]]).unwrap();
        let report = adj.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::SelfLoop { agent: 1, .. })));
    }

    #[test]
    fn isolated_follower_fails_spanning_tree() {
        let adj =
            Adjacency::new(array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        assert!(!adj.has_leader_spanning_tree());
    }

    #[test]
    fn chain_passes_spanning_tree() {
        let adj =
            Adjacency::new(array![[0.0, 0.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        assert!(adj.has_leader_spanning_tree());
    }

    #[test]
    fn five_agent_decomposition_matches_hand_arithmetic() {
        let adj = five_agent_example();
        let dec = build_stochastic(&adj, 0.20).unwrap();
        assert!((dec.kappa0 - 3.4).abs() < 1e-15);
        assert!((dec.kappa - 3.6).abs() < 1e-15);
        let expected_delta = [0.2, 1.4, 0.0, 1.5];
        for (got, want) in dec.delta.iter().zip(expected_delta.iter()) {
            assert!((got - want).abs() < 1e-12);
        }
        let expected = array![
            [1.0 / 9.0, 5.0 / 9.0, 0.0, 0.0],
            [5.0 / 9.0, 4.0 / 9.0, 0.0, 0.0],
            [0.0, 0.0, 1.0 / 18.0, 19.0 / 36.0],
            [0.0, 0.0, 19.0 / 36.0, 17.0 / 36.0]
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (dec.d_breve[[i, j]] - expected[[i, j]]).abs() < 1e-12,
                    "entry ({i},{j})"
                );
            }
        }
        let expected_leader = [1.0 / 3.0, 0.0, 5.0 / 12.0, 0.0];
        for (got, want) in dec.d_leader.iter().zip(expected_leader.iter()) {
            assert!((got - want).abs() < 1e-12);
        }
        // Every row of D sums to one.
        for i in 0..5 {
            let s: f64 = (0..5).map(|j| dec.d[[i, j]]).sum();
            assert!((s - 1.0).abs() < 1e-12, "row {i} sums to {s}");
        }
    }

    #[test]
    fn single_follower_decomposition() {
        let adj = Adjacency::new(array![[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let dec = build_stochastic(&adj, 1.0).unwrap();
        assert!((dec.kappa - 2.0).abs() < 1e-15);
        assert!((dec.d_breve[[0, 0]] - 0.5).abs() < 1e-15);
        assert!((dec.d_leader[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_leader_only_followers() {
        let adj =
            Adjacency::new(array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        let dec = build_stochastic(&adj, 1.0).unwrap();
        let expected = array![[0.5, 0.0], [0.0, 0.5]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((dec.d_breve[[i, j]] - expected[[i, j]]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn all_zero_adjacency_gives_identity_follower_block() {
        let adj = Adjacency::new(Array2::zeros((3, 3))).unwrap();
        let dec = build_stochastic(&adj, 0.7).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dec.d_breve[[i, j]] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn h_must_be_positive() {
        let adj = five_agent_example();
        assert!(matches!(
            build_stochastic(&adj, 0.0),
            Err(Error::InvalidParameter { name: "h", .. })
        ));
        assert!(matches!(
            build_stochastic(&adj, -1.0),
            Err(Error::InvalidParameter { name: "h", .. })
        ));
    }

    #[test]
    fn five_agent_spectrum_matches_quadratic_roots() {
        let adj = five_agent_example();
        let dec = build_stochastic(&adj, 0.20).unwrap();
        let spec = follower_spectrum(&dec).unwrap();
        // The block-diagonal follower matrix splits into two 2×2 blocks
        // with closed-form eigenvalues (5 ± √109)/18 and (19 ± √1669)/72.
        let s109 = 109.0_f64.sqrt();
        let s1669 = 1669.0_f64.sqrt();
        let mut expected = [
            (5.0 - s109) / 18.0,
            (5.0 + s109) / 18.0,
            (19.0 - s1669) / 72.0,
            (19.0 + s1669) / 72.0,
        ];
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in spec.lambda.iter().zip(expected.iter()) {
            assert!((got - want).abs() < 1e-9, "got {got}, want {want}");
        }
        assert!((spec.lambda0 - (5.0 + s109) / 18.0).abs() < 1e-12);
        // Six-decimal presentation: {−0.303519, −0.302239, 0.831297, 0.857795}.
        let printed = [-0.303519, -0.302239, 0.831297, 0.857795];
        for (got, want) in spec.lambda.iter().zip(printed.iter()) {
            assert!((got - want).abs() < 5e-7);
        }
    }

    #[test]
    fn trivial_spectra() {
        let half_identity = StochasticDecomposition {
            h: 1.0,
            kappa0: 1.0,
            kappa: 2.0,
            delta: vec![0.0, 0.0],
            d: Array2::eye(3),
            d_breve: 0.5 * Array2::eye(2),
            d_leader: Array1::zeros(2),
        };
        let spec = follower_spectrum(&half_identity).unwrap();
        assert_eq!(spec.lambda, vec![0.5, 0.5]);
        assert_eq!(spec.lambda0, 0.5);

        let exchange = StochasticDecomposition {
            d_breve: array![[0.0, 0.5], [0.5, 0.0]],
            ..half_identity
        };
        let spec = follower_spectrum(&exchange).unwrap();
        assert!((spec.lambda[0] + 0.5).abs() < 1e-15);
        assert!((spec.lambda[1] - 0.5).abs() < 1e-15);
        assert!((spec.lambda0 - 0.5).abs() < 1e-15);
        assert_eq!(
            spec.lambda0,
            spec.lambda.iter().map(|v| v.abs()).fold(0.0, f64::max)
        );
    }

    #[test]
    fn asymmetric_follower_block_rejected() {
        let adj = five_agent_example();
        let mut dec = build_stochastic(&adj, 0.2).unwrap();
        dec.d_breve[[0, 1]] += 1.0;
        assert!(matches!(
            follower_spectrum(&dec),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn row_stochastic_matrix_has_simple_unit_eigenvalue() {
        // Random valid graphs with a leader-rooted spanning tree: exactly
        // one eigenvalue of D within 1e-9 of 1, all others strictly inside
        // the unit disk.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = rng.random_range(2..6usize);
            let mut w = Array2::<f64>::zeros((n, n));
            // Random symmetric follower links.
            for i in 1..n {
                for j in (i + 1)..n {
                    if rng.random_range(0.0..1.0) < 0.6 {
                        let v = rng.random_range(0.1..3.0);
                        w[[i, j]] = v;
                        w[[j, i]] = v;
                    }
                }
            }
            // Random leader links; force one to exist.
            for i in 1..n {
                if rng.random_range(0.0..1.0) < 0.5 {
                    w[[i, 0]] = rng.random_range(0.1..3.0);
                }
            }
            w[[1, 0]] = w[[1, 0]].max(1.0);
            let adj = Adjacency::new(w).unwrap();
            if !adj.has_leader_spanning_tree() {
                continue;
            }
            let dec = build_stochastic(&adj, rng.random_range(0.05..1.0)).unwrap();
            // Entries of D lie in [0, 1]; rows sum to 1.
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    assert!(dec.d[[i, j]] >= 0.0 && dec.d[[i, j]] <= 1.0);
                    s += dec.d[[i, j]];
                }
                assert!((s - 1.0).abs() < 1e-12);
            }
            let eigs = eig_general(&dec.d).unwrap();
            let near_one = eigs
                .eigenvalues
                .iter()
                .filter(|z| (*z - num_complex::Complex64::new(1.0, 0.0)).norm() < 1e-9)
                .count();
            assert_eq!(near_one, 1, "unit eigenvalue must be simple");
            let inside = eigs
                .eigenvalues
                .iter()
                .filter(|z| z.norm() < 1.0 - 1e-9)
                .count();
            assert_eq!(inside, n - 1, "all other eigenvalues strictly inside");
            // Follower-block magnitudes strictly below one.
            let spec = follower_spectrum(&dec).unwrap();
            assert!(spec.lambda0 < 1.0 - 1e-9);
        }
    }

    #[test]
    fn decomposition_is_scale_invariant() {
        let adj = five_agent_example();
        let dec1 = build_stochastic(&adj, 0.2).unwrap();
        let scaled = Adjacency::new(adj.weights() * 3.5).unwrap();
        let dec2 = build_stochastic(&scaled, 0.2 * 3.5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((dec1.d[[i, j]] - dec2.d[[i, j]]).abs() < 1e-12);
            }
        }
    }
}
