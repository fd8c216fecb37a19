//! Property-based tests of the library's structural invariants: the
//! row-stochastic decomposition, the spectral decoupling of the coupled
//! loop, the scalar H∞ closed form, disturbance linearity, and exact
//! serialization round-trips.

use std::sync::OnceLock;

use hinf_tracking::analysis::{hinf_norm, HinfOptions};
use hinf_tracking::config::{read_json, write_json, GainFile, ProjectConfig};
use hinf_tracking::kernel::{spectral_radius, Mat};
use hinf_tracking::plant::{
    build_augmented, coupled_error_system, AugmentedSystem, FollowerModel, LeaderModel,
    ProtocolGain, SensingModel, StateSpace,
};
use hinf_tracking::simulation::{simulate, DisturbanceKind, SimConfig};
use hinf_tracking::topology::{
    build_stochastic, follower_spectrum, Adjacency, StochasticDecomposition,
};
use ndarray::{array, Array2};
use proptest::prelude::*;

/// Weights below this are dropped, so generated graphs have real holes.
fn sparsify(v: f64) -> f64 {
    if v < 1.0 {
        0.0
    } else {
        v
    }
}

/// A structurally valid random graph: zero diagonal, zero leader row,
/// symmetric follower-to-follower weights, nonnegative entries.
fn graph_strategy() -> impl Strategy<Value = (Mat, f64)> {
    (1usize..=5).prop_flat_map(|nf| {
        let pair_count = nf * nf.saturating_sub(1) / 2;
        (
            prop::collection::vec(0.0f64..3.0, pair_count),
            prop::collection::vec(0.0f64..3.0, nf),
            0.01f64..2.0,
        )
            .prop_map(move |(pairs, leader_col, h)| {
                let n = nf + 1;
                let mut w = Array2::zeros((n, n));
                let mut next = pairs.into_iter();
                for i in 1..n {
                    w[[i, 0]] = sparsify(leader_col[i - 1]);
                    for j in (i + 1)..n {
                        let v = sparsify(next.next().expect("enough follower pairs"));
                        w[[i, j]] = v;
                        w[[j, i]] = v;
                    }
                }
                (w, h)
            })
    })
}

fn decomposition(w: Mat, h: f64) -> (Adjacency, StochasticDecomposition) {
    let adj = Adjacency::new(w).expect("generated adjacency is square");
    let dec = build_stochastic(&adj, h).expect("decomposition of a valid graph");
    (adj, dec)
}

/// Worked example shared by the simulation properties.
struct Example {
    config: ProjectConfig,
    adj: Adjacency,
    dec: StochasticDecomposition,
    aug: AugmentedSystem,
    gain: ProtocolGain,
}

fn example() -> &'static Example {
    static CELL: OnceLock<Example> = OnceLock::new();
    CELL.get_or_init(|| {
        let config = ProjectConfig::parse(include_str!("../../../configs/demo.toml"))
            .expect("example config parses");
        let adj = config.adjacency().expect("example adjacency");
        let dec = config.decomposition(&adj).expect("example decomposition");
        let aug = config.augmented().expect("example plant");
        let gain = config
            .reference_gain(&aug)
            .expect("reference gain parses")
            .expect("example carries a reference gain");
        Example {
            config,
            adj,
            dec,
            aug,
            gain,
        }
    })
}

proptest! {
    /// Every decomposition of a valid graph is row stochastic with a
    /// symmetric follower block whose spectrum lies in [−1, 1].
    #[test]
    fn decomposition_is_row_stochastic((w, h) in graph_strategy()) {
        let (adj, dec) = decomposition(w, h);
        let n = adj.agent_count();

        prop_assert!((dec.kappa - (dec.kappa0 + h)).abs() <= 1e-12);
        for i in 0..n {
            let sum: f64 = dec.d.row(i).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12, "row {i} sums to {sum}");
            for j in 0..n {
                prop_assert!(dec.d[[i, j] ] >= 0.0, "D[{i}][{j}] negative");
            }
        }
        // Leader row: self-loop only.
        prop_assert_eq!(dec.d[[0, 0]], 1.0);
        for j in 1..n {
            prop_assert_eq!(dec.d[[0, j]], 0.0);
        }
        // Blocks are consistent views of the same matrix.
        for i in 0..n - 1 {
            prop_assert_eq!(dec.d_leader[i], dec.d[[i + 1, 0]]);
            for j in 0..n - 1 {
                prop_assert_eq!(dec.d_breve[[i, j]], dec.d[[i + 1, j + 1]]);
                prop_assert!((dec.d_breve[[i, j]] - dec.d_breve[[j, i]]).abs() <= 1e-15);
            }
        }

        let spectrum = follower_spectrum(&dec).expect("symmetric follower block");
        let mut previous = f64::NEG_INFINITY;
        let mut max_abs: f64 = 0.0;
        for &lam in &spectrum.lambda {
            prop_assert!(lam >= previous, "eigenvalues not ascending");
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&lam), "eigenvalue {lam}");
            previous = lam;
            max_abs = max_abs.max(lam.abs());
        }
        prop_assert!((spectrum.lambda0 - max_abs).abs() <= 1e-15);
    }

    /// On a scalar plant the coupled loop's spectral radius has the
    /// closed form max_i |1 − (1−λ_i)·f|; the Kronecker assembly and the
    /// eigenvalue path must reproduce it.
    #[test]
    fn coupled_radius_matches_the_scalar_closed_form(
        (w, h) in graph_strategy(),
        f in -2.0f64..2.0,
    ) {
        let (_, dec) = decomposition(w, h);
        let leader = LeaderModel::new(1, 1, array![[1.0]]).unwrap();
        let follower = FollowerModel::new(array![[0.3]], array![[1.0]]).unwrap();
        let sensing = SensingModel::new(array![[1.0]]).unwrap();
        let aug = build_augmented(leader, follower, sensing, array![[1.0]]).unwrap();
        let gain = ProtocolGain::new(array![[f]], 1, 1).unwrap();

        let coupled = coupled_error_system(&aug, &gain, &dec);
        let radius = spectral_radius(&coupled.a_d).expect("radius");

        let spectrum = follower_spectrum(&dec).expect("spectrum");
        let expected = spectrum
            .lambda
            .iter()
            .map(|lam| (1.0 - (1.0 - lam) * f).abs())
            .fold(0.0, f64::max);
        prop_assert!(
            (radius - expected).abs() <= 1e-9 * (1.0 + expected),
            "radius {radius} vs closed form {expected}"
        );
    }

    /// Scalar H∞ norm closed form: ‖cb/(z − a)‖_∞ = |cb|/(1 − |a|).
    #[test]
    fn scalar_norm_matches_the_closed_form(
        a in -0.9f64..0.9,
        b in 0.05f64..3.0,
        c in 0.05f64..3.0,
        flip_b in proptest::bool::ANY,
        flip_c in proptest::bool::ANY,
    ) {
        let b = if flip_b { -b } else { b };
        let c = if flip_c { -c } else { c };
        let ss = StateSpace::new(
            Array2::from_elem((1, 1), a),
            Array2::from_elem((1, 1), b),
            Array2::from_elem((1, 1), c),
        )
        .unwrap();
        let expected = (b * c).abs() / (1.0 - a.abs());
        let result = hinf_norm(&ss, &HinfOptions::default()).expect("stable scalar system");
        prop_assert!(
            (result.norm - expected).abs() <= 1e-6 * expected.max(1.0),
            "norm {} vs closed form {expected}",
            result.norm
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// From rest, the tracking output is linear in the disturbance
    /// amplitude.
    #[test]
    fn response_from_rest_scales_with_the_amplitude(
        amplitude in 0.5f64..40.0,
        factor in 0.1f64..5.0,
    ) {
        let ex = example();
        let run = |amp: f64| {
            let sim = SimConfig::zero_state(
                40,
                DisturbanceKind::WindowedSine { amplitude: amp, window_end: 20 },
            );
            simulate(&ex.adj, &ex.dec, &ex.aug, &ex.gain, &sim).expect("simulation runs")
        };
        let base = run(amplitude);
        let scaled = run(amplitude * factor);

        let mut magnitude: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for (e1, e2) in base.e.iter().zip(scaled.e.iter()) {
            worst = worst.max((e2 - factor * e1).abs());
            magnitude = magnitude.max(e2.abs());
        }
        prop_assert!(
            worst <= 1e-9 * (1.0 + magnitude),
            "linearity violated by {worst} at magnitude {magnitude}"
        );
    }

    /// Gain files survive a JSON round-trip bit for bit, including awkward
    /// magnitudes near the extremes of the double range.
    #[test]
    fn gain_files_round_trip_bitwise(
        rows in 1usize..=6,
        cols in 1usize..=3,
        bits in prop::collection::vec(proptest::num::u64::ANY, 18),
    ) {
        let mut values = bits
            .into_iter()
            .map(f64::from_bits)
            .map(|v| if v.is_finite() { v } else { 1.0 });
        let f = Array2::from_shape_fn((rows, cols), |_| values.next().unwrap());
        let gain = ProtocolGain::new(f, rows, 1).unwrap();

        let mut buffer = Vec::new();
        write_json(&GainFile::from_gain(&gain), &mut buffer).expect("serialize");
        let parsed: GainFile = read_json(buffer.as_slice()).expect("parse");
        let restored = parsed.into_gain().expect("valid gain");

        prop_assert_eq!(restored.matrix().dim(), gain.matrix().dim());
        for (x, y) in gain.matrix().iter().zip(restored.matrix().iter()) {
            prop_assert_eq!(x.to_bits(), y.to_bits(), "{} != {}", x, y);
        }
    }
}

/// The example configuration itself satisfies the generated-graph
/// invariants (anchor so a strategy bug cannot silently weaken the suite).
#[test]
fn the_example_graph_is_in_the_strategy_envelope() {
    let ex = example();
    assert!(ex.adj.validate().is_valid());
    assert!(ex.adj.has_leader_spanning_tree());
    let spectrum = follower_spectrum(&ex.dec).unwrap();
    assert_eq!(spectrum.lambda.len(), 4);
    assert!(spectrum.lambda0 < 1.0);
    assert!(ex.config.gamma().unwrap() > 0.0);
}
