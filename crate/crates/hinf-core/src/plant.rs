//! Agent models and closed-loop error dynamics.
//!
//! The leader's state `Θ ∈ R^{n·m0}` is partitioned into `n` blocks of
//! size `m0` and evolves as `Θ(k+1) = Â Θ(k)`; only its last block is an
//! output (`Ĉ = (O,…,O, I)`).  Followers have m0-dimensional dynamics
//! `x_i(k+1) = A x_i(k) + u_i(k) + B_ω ω_i(k)` and sense neighbor-relative
//! information through the exchange matrix `E`.  Each follower runs an
//! estimator `z_i = (z_i¹,…,z_i^{n−1})` for the leader's unmeasured
//! blocks; stacking `ζ_i = (z_i¹,…,z_i^{n−1}, x_i)` gives the closed-loop
//! recursion `ζ_i(k+1) = Â ζ_i(k) − F ε_i(k) + B̂_ω ω_i(k)` so the
//! tracking error `ρ_i = ζ_i − Θ` obeys the coupled dynamics analyzed in
//! [`crate::analysis`].

use ndarray::{s, Array1, Array2};

use crate::error::Error;
use crate::kernel::{check_finite, kron, Mat};
use crate::topology::{Adjacency, FollowerSpectrum, StochasticDecomposition};
use crate::Result;

/// The leader: `n` blocks of size `m0`, state matrix `Â`, and the implied
/// output matrix `Ĉ = (O,…,O, I_{m0})` selecting the last block.
#[derive(Debug, Clone)]
pub struct LeaderModel {
    block_count: usize,
    block_size: usize,
    a_hat: Mat,
}

impl LeaderModel {
    pub fn new(block_count: usize, block_size: usize, a_hat: Mat) -> Result<Self> {
        if block_count == 0 || block_size == 0 {
            return Err(Error::InvalidParameter {
                name: "leader blocks",
                reason: format!(
                    "block count and block size must be positive, got {block_count} and {block_size}"
                ),
            });
        }
        let dim = block_count * block_size;
        if a_hat.dim() != (dim, dim) {
            return Err(Error::dims(
                "leader.a_hat",
                format!("{dim}x{dim}"),
                format!("{}x{}", a_hat.nrows(), a_hat.ncols()),
            ));
        }
        check_finite(&a_hat, "leader.a_hat")?;
        Ok(LeaderModel {
            block_count,
            block_size,
            a_hat,
        })
    }

    /// Number of state blocks `n`.
    pub fn block_count(&self) -> usize {
        self.block_count
    }

    /// Size `m0` of each block.
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Full state dimension `n·m0`.
    pub fn dim(&self) -> usize {
        self.block_count * self.block_size
    }

    /// The state matrix `Â`.
    pub fn a_hat(&self) -> &Mat {
        &self.a_hat
    }

    /// The `(s, j)` block of `Â` (zero-based block indices).
    pub fn block(&self, s: usize, j: usize) -> Mat {
        let m = self.block_size;
        self.a_hat
            .slice(s![s * m..(s + 1) * m, j * m..(j + 1) * m])
            .to_owned()
    }

    /// The output matrix `Ĉ = (O,…,O, I_{m0})`.
    pub fn c_hat(&self) -> Mat {
        let m = self.block_size;
        let mut c = Array2::zeros((m, self.dim()));
        for i in 0..m {
            c[[i, self.dim() - m + i]] = 1.0;
        }
        c
    }
}

/// Follower dynamics `x⁺ = A x + u + B_ω ω`.
#[derive(Debug, Clone)]
pub struct FollowerModel {
    pub a: Mat,
    pub b_omega: Mat,
}

impl FollowerModel {
    pub fn new(a: Mat, b_omega: Mat) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(Error::NonSquare { rows: r, cols: c });
        }
        if b_omega.nrows() != r {
            return Err(Error::dims(
                "follower.b_omega",
                format!("{r} rows"),
                format!("{} rows", b_omega.nrows()),
            ));
        }
        check_finite(&a, "follower.a")?;
        check_finite(&b_omega, "follower.b_omega")?;
        Ok(FollowerModel { a, b_omega })
    }

    /// Follower state dimension (must equal the leader block size).
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Disturbance dimension `m_ω`.
    pub fn disturbance_dim(&self) -> usize {
        self.b_omega.ncols()
    }
}

/// The exchange matrix `E` through which relative outputs are sensed;
/// `m_y ≤ m0` models partial information.
#[derive(Debug, Clone)]
pub struct SensingModel {
    pub e: Mat,
}

impl SensingModel {
    pub fn new(e: Mat) -> Result<Self> {
        let (my, m0) = e.dim();
        if my == 0 || my > m0 {
            return Err(Error::dims(
                "sensing.e",
                format!("at most {m0} rows (and at least 1)"),
                format!("{my} rows"),
            ));
        }
        check_finite(&e, "sensing.e")?;
        Ok(SensingModel { e })
    }

    pub fn output_dim(&self) -> usize {
        self.e.nrows()
    }
}

/// Leader, follower, and sensing models together with the derived
/// matrices used by analysis and synthesis:
/// `C̃ = (O,…,O,E)`, `B̂_ω = (O,…,O,B_ωᵀ)ᵀ`, and `Ǎ = Â_nn − A`.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    pub leader: LeaderModel,
    pub follower: FollowerModel,
    pub sensing: SensingModel,
    /// Performance output matrix applied to each tracking error `ρ_i`.
    pub c: Mat,
    c_tilde: Mat,
    b_hat_omega: Mat,
    a_check: Mat,
}

impl AugmentedSystem {
    /// `C̃ = (O,…,O,E)`: the sensing matrix lifted to the leader state.
    pub fn c_tilde(&self) -> &Mat {
        &self.c_tilde
    }

    /// `B̂_ω = (O,…,O,B_ωᵀ)ᵀ`: the disturbance matrix lifted to ζ.
    pub fn b_hat_omega(&self) -> &Mat {
        &self.b_hat_omega
    }

    /// `Ǎ = Â_nn − A`: the controller's model-mismatch correction.
    pub fn a_check(&self) -> &Mat {
        &self.a_check
    }

    /// Leader state dimension `n·m0`.
    pub fn dim(&self) -> usize {
        self.leader.dim()
    }

    /// Performance output dimension.
    pub fn performance_dim(&self) -> usize {
        self.c.nrows()
    }
}

/// Assembles the augmented system, checking every cross-model dimension.
pub fn build_augmented(
    leader: LeaderModel,
    follower: FollowerModel,
    sensing: SensingModel,
    c: Mat,
) -> Result<AugmentedSystem> {
    let m0 = leader.block_size();
    if follower.state_dim() != m0 {
        return Err(Error::dims(
            "follower.a",
            format!("{m0}x{m0} (leader block size)"),
            format!("{0}x{0}", follower.state_dim()),
        ));
    }
    if sensing.e.ncols() != m0 {
        return Err(Error::dims(
            "sensing.e",
            format!("{m0} columns (leader block size)"),
            format!("{} columns", sensing.e.ncols()),
        ));
    }
    if c.ncols() != leader.dim() {
        return Err(Error::dims(
            "performance.c",
            format!("{} columns (leader dimension)", leader.dim()),
            format!("{} columns", c.ncols()),
        ));
    }
    check_finite(&c, "performance.c")?;

    let n = leader.block_count();
    let dim = leader.dim();
    let my = sensing.output_dim();
    let momega = follower.disturbance_dim();

    let mut c_tilde = Array2::zeros((my, dim));
    c_tilde.slice_mut(s![.., (n - 1) * m0..]).assign(&sensing.e);

    let mut b_hat_omega = Array2::zeros((dim, momega));
    b_hat_omega
        .slice_mut(s![(n - 1) * m0.., ..])
        .assign(&follower.b_omega);

    let a_check = &leader.block(n - 1, n - 1) - &follower.a;

    Ok(AugmentedSystem {
        leader,
        follower,
        sensing,
        c,
        c_tilde,
        b_hat_omega,
        a_check,
    })
}

/// The stacked protocol gain `F = (F₁ᵀ,…,Fₙᵀ)ᵀ` with blocks `Fₛ: m0×m_y`.
#[derive(Debug, Clone)]
pub struct ProtocolGain {
    f: Mat,
    block_size: usize,
}

impl ProtocolGain {
    /// Wraps a gain for a leader with `block_count` blocks of size
    /// `block_size` and sensed-output dimension matching `f`'s columns.
    pub fn new(f: Mat, block_count: usize, block_size: usize) -> Result<Self> {
        if f.nrows() != block_count * block_size {
            return Err(Error::dims(
                "gain.f",
                format!("{} rows", block_count * block_size),
                format!("{} rows", f.nrows()),
            ));
        }
        check_finite(&f, "gain.f")?;
        Ok(ProtocolGain { f, block_size })
    }

    /// The full stacked gain.
    pub fn matrix(&self) -> &Mat {
        &self.f
    }

    /// Sensed-output dimension `m_y`.
    pub fn output_dim(&self) -> usize {
        self.f.ncols()
    }

    /// Size `m0` of each block.
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Number of blocks `n`.
    pub fn block_count(&self) -> usize {
        self.f.nrows() / self.block_size
    }

    /// The block `Fₛ` (zero-based `s`).
    pub fn block(&self, s: usize) -> Mat {
        let m = self.block_size;
        self.f.slice(s![s * m..(s + 1) * m, ..]).to_owned()
    }
}

/// A discrete-time state-space triple `x⁺ = A_d x + B_d w`, `y = C_d x`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub a_d: Mat,
    pub b_d: Mat,
    pub c_d: Mat,
    /// When true, the modeled output series is read one step ahead of the
    /// input (`y(k+1) = C_d x(k+1)` paired with the input `w(k)`), so the
    /// transfer matrix carries an extra factor `z` relative to the
    /// standard form.  On the unit circle `|z| = 1`, so norm computations
    /// ignore the flag; the simulator keeps the time indexing exact.
    pub output_advance: bool,
}

impl StateSpace {
    pub fn new(a_d: Mat, b_d: Mat, c_d: Mat) -> Result<Self> {
        let n = a_d.nrows();
        if a_d.ncols() != n {
            return Err(Error::NonSquare {
                rows: a_d.nrows(),
                cols: a_d.ncols(),
            });
        }
        if b_d.nrows() != n {
            return Err(Error::dims(
                "state_space.b_d",
                format!("{n} rows"),
                format!("{} rows", b_d.nrows()),
            ));
        }
        if c_d.ncols() != n {
            return Err(Error::dims(
                "state_space.c_d",
                format!("{n} columns"),
                format!("{} columns", c_d.ncols()),
            ));
        }
        Ok(StateSpace {
            a_d,
            b_d,
            c_d,
            output_advance: false,
        })
    }

    pub fn with_output_advance(mut self) -> Self {
        self.output_advance = true;
        self
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.a_d.nrows()
    }
}

/// One protocol evaluation for a single follower: returns the control
/// `u_i` and the next estimator state, given the current follower state
/// `x_i`, estimator state `z_i` (stacked `n−1` blocks of size `m0`, empty
/// when `n = 1`), and relative information `ε_i`.
///
/// The control is `u_i = Ǎ x_i + Σ_j Â_{nj} z_i^j − F_n ε_i`; the
/// estimator update is `z_i^{s,+} = Â_{sn} x_i + Σ_j Â_{sj} z_i^j − F_s ε_i`.
pub fn protocol_step(
    aug: &AugmentedSystem,
    gain: &ProtocolGain,
    x_i: &Array1<f64>,
    z_i: &Array1<f64>,
    eps_i: &Array1<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = aug.leader.block_count();
    let m0 = aug.leader.block_size();
    let my = aug.sensing.output_dim();
    if x_i.len() != m0 {
        return Err(Error::dims(
            "x_i",
            format!("{m0}"),
            format!("{}", x_i.len()),
        ));
    }
    if z_i.len() != (n - 1) * m0 {
        return Err(Error::dims(
            "z_i",
            format!("{}", (n - 1) * m0),
            format!("{}", z_i.len()),
        ));
    }
    if eps_i.len() != my {
        return Err(Error::dims(
            "eps_i",
            format!("{my}"),
            format!("{}", eps_i.len()),
        ));
    }

    let z_block = |j: usize| z_i.slice(s![j * m0..(j + 1) * m0]);

    // u_i = Ǎ x_i + Σ_{j<n−1} Â_{n−1,j} z_i^j − F_{n−1} ε_i
    let mut u = aug.a_check().dot(x_i);
    for j in 0..(n - 1) {
        u = u + aug.leader.block(n - 1, j).dot(&z_block(j));
    }
    u = u - gain.block(n - 1).dot(eps_i);

    // z_i^{s,+} = Â_{s,n−1} x_i + Σ_{j<n−1} Â_{s,j} z_i^j − F_s ε_i
    let mut z_next = Array1::zeros((n - 1) * m0);
    for sidx in 0..(n - 1) {
        let mut block = aug.leader.block(sidx, n - 1).dot(x_i);
        for j in 0..(n - 1) {
            block = block + aug.leader.block(sidx, j).dot(&z_block(j));
        }
        block = block - gain.block(sidx).dot(eps_i);
        z_next
            .slice_mut(s![sidx * m0..(sidx + 1) * m0])
            .assign(&block);
    }
    Ok((u, z_next))
}

/// Neighbor-relative information for every follower:
/// `ε_i = (1/κ)[Σ_{j followers} a_ij E(x_i − x_j) + a_i,leader E(x_i − θ_n)]`,
/// where `θ_n` is the leader's last state block.
pub fn relative_information(
    adj: &Adjacency,
    dec: &StochasticDecomposition,
    sensing: &SensingModel,
    x: &[Array1<f64>],
    theta_n: &Array1<f64>,
) -> Result<Vec<Array1<f64>>> {
    let nf = adj.follower_count();
    if x.len() != nf {
        return Err(Error::dims(
            "follower states",
            format!("{nf}"),
            format!("{}", x.len()),
        ));
    }
    let m0 = sensing.e.ncols();
    for (idx, xi) in x.iter().enumerate() {
        if xi.len() != m0 {
            return Err(Error::dims(
                format!("x[{idx}]"),
                format!("{m0}"),
                format!("{}", xi.len()),
            ));
        }
    }
    if theta_n.len() != m0 {
        return Err(Error::dims(
            "theta_n",
            format!("{m0}"),
            format!("{}", theta_n.len()),
        ));
    }

    let mut out = Vec::with_capacity(nf);
    for fi in 0..nf {
        let i = fi + 1;
        let mut acc = Array1::zeros(sensing.output_dim());
        for fj in 0..nf {
            let j = fj + 1;
            let w = adj.weight(i, j);
            if w != 0.0 {
                let diff = &x[fi] - &x[fj];
                acc = acc + w * sensing.e.dot(&diff);
            }
        }
        let w_leader = adj.weight(i, 0);
        if w_leader != 0.0 {
            let diff = &x[fi] - theta_n;
            acc = acc + w_leader * sensing.e.dot(&diff);
        }
        out.push(acc / dec.kappa);
    }
    Ok(out)
}

/// The `N−1` per-eigenvalue error systems
/// `(Â − (1−λᵢ)FC̃, B̂_ω, C)` whose simultaneous stability and norm bounds
/// are equivalent to the coupled network property.
pub fn decoupled_systems(
    aug: &AugmentedSystem,
    gain: &ProtocolGain,
    spectrum: &FollowerSpectrum,
) -> Vec<StateSpace> {
    let fc = gain.matrix().dot(aug.c_tilde());
    spectrum
        .lambda
        .iter()
        .map(|&lam| {
            let a_d = &aug.leader.a_hat().view() - &((1.0 - lam) * &fc);
            StateSpace {
                a_d: a_d.to_owned(),
                b_d: aug.b_hat_omega().clone(),
                c_d: aug.c.clone(),
                output_advance: true,
            }
        })
        .collect()
}

/// The stacked error dynamics of all followers:
/// `ρ⁺ = [I⊗Â − (I−D̆)⊗(FC̃)] ρ + (I⊗B̂_ω) ω`, `e = (I⊗C) ρ`.
pub fn coupled_error_system(
    aug: &AugmentedSystem,
    gain: &ProtocolGain,
    dec: &StochasticDecomposition,
) -> StateSpace {
    let nf = dec.d_breve.nrows();
    let eye = Array2::eye(nf);
    let coupling = &eye - &dec.d_breve;
    let fc = gain.matrix().dot(aug.c_tilde());
    let a_d = kron(&eye, aug.leader.a_hat()) - kron(&coupling, &fc);
    let b_d = kron(&eye, aug.b_hat_omega());
    let c_d = kron(&eye, &aug.c);
    StateSpace {
        a_d,
        b_d,
        c_d,
        output_advance: true,
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use ndarray::array;

    /// Leader with three scalar blocks, lower-triangular state matrix.
    pub fn three_block_leader() -> LeaderModel {
        LeaderModel::new(
            3,
            1,
            array![[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 0.5]],
        )
        .unwrap()
    }

    /// The augmented system used by the worked five-agent example:
    /// scalar followers with `A = 0.2`, `B_ω = 1.5`, full sensing `E = 1`,
    /// and performance output `C = 0.15·I₃`.
    pub fn example_augmented() -> AugmentedSystem {
        let leader = three_block_leader();
        let follower = FollowerModel::new(array![[0.2]], array![[1.5]]).unwrap();
        let sensing = SensingModel::new(array![[1.0]]).unwrap();
        let c = 0.15 * Array2::eye(3);
        build_augmented(leader, follower, sensing, c).unwrap()
    }

    /// The printed reference gain for the worked example.
    pub fn reference_gain() -> ProtocolGain {
        ProtocolGain::new(array![[0.0003], [0.0551], [0.4660]], 3, 1).unwrap()
    }
}
