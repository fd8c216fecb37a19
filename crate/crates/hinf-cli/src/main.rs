//! Command-line interface to the tracking toolkit: validate a project
//! file, inspect the induced row-stochastic spectrum, synthesize a
//! protocol gain, verify gains, simulate the closed loop, and run the
//! whole pipeline as a one-command demo.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 validation
//! failure, 3 infeasible synthesis, 4 verification failure, 5 numerical
//! failure.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::Array1;

use hinf_tracking::analysis::{
    is_schur, pbh_detectable, verify_coupled, verify_decoupled, HinfOptions, VerificationReport,
};
use hinf_tracking::config::{read_json, write_json, CertificateFile, GainFile, ProjectConfig};
use hinf_tracking::kernel::Mat;
use hinf_tracking::plant::{coupled_error_system, AugmentedSystem, ProtocolGain};
use hinf_tracking::simulation::{
    energy_curves, simulate, write_csv, write_line_plot, DisturbanceKind, InitialConditions,
    SimConfig, Trajectories,
};
use hinf_tracking::synthesis::{
    certify, solve_feasibility, EpsilonMode, SolverOptions, SynthesisCertificate,
};
use hinf_tracking::tolerances::Tolerances;
use hinf_tracking::topology::{
    follower_spectrum, Adjacency, FollowerSpectrum, StochasticDecomposition,
};
use hinf_tracking::Error;

const DEMO_CONFIG: &str = include_str!("../../../configs/demo.toml");

/// Free-run horizon used by the demo's zero-disturbance simulation: long
/// enough for the tracking error to fall below the 1e-6 report threshold.
const DEMO_FREE_HORIZON: usize = 2600;
const DEMO_TRACKING_THRESHOLD: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "hinf-tracking",
    version,
    about = "Design and verification toolkit for distributed leader-following tracking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check graph structure, leader spanning tree, and detectability.
    Validate(ConfigArgs),
    /// Print the row-stochastic decomposition and its follower spectrum.
    Spectrum {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also write a machine-readable spectrum.json to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for a protocol gain with a feasibility certificate.
    Synthesize(SynthesizeArgs),
    /// Verify a gain file against the project (decoupled and coupled).
    Verify(VerifyArgs),
    /// Simulate the closed loop and write CSV plus plots.
    Simulate(SimulateArgs),
    /// Run the full pipeline on the built-in worked example.
    Demo(DemoArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Project file (TOML, or JSON starting with `{`).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory for certificate.json and gain.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Attenuation level (defaults to performance.gamma).
    #[arg(long)]
    gamma: Option<f64>,
    /// Override solver.epsilon: a positive number or "free".
    #[arg(long)]
    eps: Option<String>,
    /// Override solver.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Bisect for the smallest feasible gamma (tolerance 1e-3).
    #[arg(long)]
    bisect_gamma: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Gain file: gain.json or certificate.json from `synthesize`.
    #[arg(long)]
    gain: PathBuf,
    /// Attenuation level (defaults to performance.gamma).
    #[arg(long)]
    gamma: Option<f64>,
    /// Also write verify.json to this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Gain file (defaults to the config's [reference] gain).
    #[arg(long)]
    gain: Option<PathBuf>,
    /// Output directory for the CSV and plots.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override simulation.horizon.
    #[arg(long)]
    horizon: Option<usize>,
    /// "none", "sine", or a path to a disturbance table (CSV).
    #[arg(long)]
    disturbance: Option<String>,
    /// Override simulation.seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DemoArgs {
    /// Output directory for all demo artifacts.
    #[arg(long, default_value = "demo-out")]
    out: PathBuf,
    /// Run the pipeline on a different project file.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// A command failure carrying its process exit code.
struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::ConfigRead(_)
        | Error::ConfigParse { .. }
        | Error::ConfigField { .. }
        | Error::DimensionMismatch { .. }
        | Error::NonSquare { .. }
        | Error::InvalidParameter { .. }
        | Error::DisturbanceTable { .. } => 1,
        Error::Infeasible { .. } => 3,
        _ => 5,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        fail(exit_code_for(&e), e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        fail(1, e.to_string())
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(f) = run(cli) {
        eprintln!("error: {}", f.message);
        std::process::exit(f.code);
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate(args) => cmd_validate(&args.config),
        Command::Spectrum { config, out } => cmd_spectrum(&config.config, out.as_deref()),
        Command::Synthesize(args) => cmd_synthesize(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Demo(args) => cmd_demo(&args),
    }
}

/// Everything a subcommand needs, built from a parsed project file.
struct Project {
    config: ProjectConfig,
    adj: Adjacency,
    aug: AugmentedSystem,
    gamma: f64,
}

/// The derived network quantities; only available once the graph passes
/// structural validation (the decomposition's spectral guarantees assume
/// symmetric follower weights).
struct Network {
    dec: StochasticDecomposition,
    spectrum: FollowerSpectrum,
}

impl Project {
    fn network(&self) -> Result<Network, Failure> {
        if !self.adj.validate().is_valid() {
            return Err(fail(
                2,
                "graph fails structural validation; run the validate subcommand for details",
            ));
        }
        let dec = self.config.decomposition(&self.adj)?;
        let spectrum = follower_spectrum(&dec)?;
        Ok(Network { dec, spectrum })
    }
}

fn load_project_text(text: &str) -> Result<Project, Failure> {
    let config = ProjectConfig::parse(text)?;
    let adj = config.adjacency()?;
    let aug = config.augmented()?;
    let gamma = config.gamma()?;
    Ok(Project {
        config,
        adj,
        aug,
        gamma,
    })
}

fn load_project(path: &Path) -> Result<Project, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| fail(1, format!("cannot read {}: {e}", path.display())))?;
    load_project_text(&text)
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let project = load_project(path)?;
    let pass = run_validation(&project)?;
    if pass {
        Ok(())
    } else {
        Err(fail(2, "validation failed"))
    }
}

/// Prints the validation report and returns whether everything passed.
fn run_validation(project: &Project) -> Result<bool, Failure> {
    let report = project.adj.validate();
    println!(
        "agents: {} (leader + {} followers)",
        project.adj.agent_count(),
        project.adj.follower_count()
    );
    if report.is_valid() {
        println!("graph structure: pass");
    } else {
        println!("graph structure: FAIL");
        for v in &report.violations {
            println!("  - {v}");
        }
    }
    let tree = project.adj.has_leader_spanning_tree();
    println!(
        "leader spanning tree: {}",
        if tree {
            "pass"
        } else {
            "FAIL (some follower is unreachable from the leader)"
        }
    );
    let detectable = pbh_detectable(
        project.aug.leader.a_hat(),
        project.aug.c_tilde(),
        &Tolerances::standard(),
    )
    .map_err(Failure::from)?;
    println!(
        "detectability of the lifted sensing pair: {}",
        if detectable { "pass" } else { "FAIL" }
    );
    let pass = report.is_valid() && tree && detectable;
    println!("overall: {}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn cmd_spectrum(path: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let project = load_project(path)?;
    let network = project.network()?;
    print_spectrum(&network);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let file = fs::File::create(dir.join("spectrum.json"))?;
        write_json(&spectrum_json(&network), BufWriter::new(file))?;
        println!("wrote {}", dir.join("spectrum.json").display());
    }
    Ok(())
}

fn print_spectrum(network: &Network) {
    let dec = &network.dec;
    println!("kappa0 = {:.16e}", dec.kappa0);
    println!("kappa  = {:.16e}  (kappa0 + h, h = {})", dec.kappa, dec.h);
    println!(
        "delta  = [{}]",
        dec.delta
            .iter()
            .map(|d| format!("{d:.16e}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("row-stochastic matrix (leader row first):");
    for row in dec.d.rows() {
        println!(
            "  [{}]",
            row.iter()
                .map(|v| format!("{v:.16e}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    println!("follower-block eigenvalues (ascending):");
    for lam in &network.spectrum.lambda {
        println!("  {lam:.16e}");
    }
    println!("lambda0 = {:.16e}", network.spectrum.lambda0);
}

fn spectrum_json(network: &Network) -> serde_json::Value {
    serde_json::json!({
        "h": network.dec.h,
        "kappa0": network.dec.kappa0,
        "kappa": network.dec.kappa,
        "delta": network.dec.delta,
        "d": rows_of(&network.dec.d),
        "d_breve": rows_of(&network.dec.d_breve),
        "d_leader": network.dec.d_leader.to_vec(),
        "lambda": network.spectrum.lambda,
        "lambda0": network.spectrum.lambda0,
    })
}

fn parse_epsilon_flag(text: &str) -> Result<EpsilonMode, Failure> {
    if text == "free" {
        return Ok(EpsilonMode::Free);
    }
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(EpsilonMode::Fixed(v)),
        _ => Err(fail(
            1,
            format!("--eps must be a positive number or \"free\", got \"{text}\""),
        )),
    }
}

fn cmd_synthesize(args: &SynthesizeArgs) -> Result<(), Failure> {
    let project = load_project(&args.config.config)?;
    let network = project.network()?;
    let mut options = project.config.solver_options()?;
    if let Some(eps) = &args.eps {
        options.epsilon = parse_epsilon_flag(eps)?;
    }
    if let Some(seed) = args.seed {
        options.seed = seed;
    }
    let gamma = match args.gamma {
        Some(g) if g.is_finite() && g > 0.0 => g,
        Some(g) => return Err(fail(1, format!("--gamma must be positive, got {g}"))),
        None => project.gamma,
    };

    let (cert, achieved_gamma) = if args.bisect_gamma {
        bisect_gamma(&project, &network, &options, gamma)?
    } else {
        let cert = solve_feasibility(&project.aug, gamma, network.spectrum.lambda0, &options)?;
        (cert, gamma)
    };

    println!("synthesis succeeded at gamma = {achieved_gamma:.6}");
    println!("epsilon = {:.16e}", cert.variables.epsilon);
    println!(
        "margins: feasibility {:.6e}, output {:.6e}, p_positivity {:.6e}",
        cert.margins.feasibility, cert.margins.output, cert.margins.p_positivity
    );
    println!("gain rows:");
    for row in cert.f.matrix().rows() {
        println!(
            "  [{}]",
            row.iter()
                .map(|v| format!("{v:.16e}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }

    let report = certify(
        &cert,
        &project.aug,
        &network.dec,
        achieved_gamma,
        &HinfOptions::default(),
    )?;
    println!("{}", report.decoupled);
    println!("{}", report.coupled);
    if !report.pass {
        return Err(fail(4, "synthesized certificate failed re-verification"));
    }

    fs::create_dir_all(&args.out)?;
    let cert_path = args.out.join("certificate.json");
    let gain_path = args.out.join("gain.json");
    write_json(
        &CertificateFile::from_certificate(&cert),
        BufWriter::new(fs::File::create(&cert_path)?),
    )?;
    write_json(
        &GainFile::from_gain(&cert.f),
        BufWriter::new(fs::File::create(&gain_path)?),
    )?;
    println!("wrote {}", cert_path.display());
    println!("wrote {}", gain_path.display());
    Ok(())
}

/// Smallest feasible gamma by bisection to absolute tolerance 1e-3; every
/// probe and the evolving bracket are logged.
fn bisect_gamma(
    project: &Project,
    network: &Network,
    options: &SolverOptions,
    gamma_start: f64,
) -> Result<(SynthesisCertificate, f64), Failure> {
    const TOL: f64 = 1e-3;
    let probe = |gamma: f64| -> Result<Option<SynthesisCertificate>, Failure> {
        match solve_feasibility(&project.aug, gamma, network.spectrum.lambda0, options) {
            Ok(cert) => Ok(Some(cert)),
            Err(Error::Infeasible { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    };
    let log = |gamma: f64, feasible: bool, lo: f64, hi: f64| {
        println!(
            "bisect: gamma {gamma:.6} -> {}, bracket [{lo:.6}, {hi:.6}]",
            if feasible { "feasible" } else { "infeasible" }
        );
    };

    // Establish a bracket: `hi` feasible (with certificate), `lo` infeasible.
    let mut hi = gamma_start;
    let mut best = probe(hi)?;
    let mut lo;
    if best.is_some() {
        lo = hi / 2.0;
        log(hi, true, lo, hi);
        while lo > TOL {
            match probe(lo)? {
                Some(cert) => {
                    best = Some(cert);
                    hi = lo;
                    lo /= 2.0;
                    log(hi, true, lo, hi);
                }
                None => {
                    log(lo, false, lo, hi);
                    break;
                }
            }
        }
        lo = lo.max(0.0);
    } else {
        lo = hi;
        log(hi, false, lo, hi);
        loop {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(fail(3, "no feasible gamma found up to 1e6"));
            }
            match probe(hi)? {
                Some(cert) => {
                    best = Some(cert);
                    log(hi, true, lo, hi);
                    break;
                }
                None => {
                    lo = hi;
                    log(hi, false, lo, hi);
                }
            }
        }
    }

    while hi - lo > TOL {
        let mid = 0.5 * (lo + hi);
        match probe(mid)? {
            Some(cert) => {
                best = Some(cert);
                hi = mid;
                log(mid, true, lo, hi);
            }
            None => {
                lo = mid;
                log(mid, false, lo, hi);
            }
        }
    }
    println!(
        "bisect: smallest feasible gamma = {hi:.6} (bracket width {:.2e})",
        hi - lo
    );
    Ok((best.expect("bracket established with a certificate"), hi))
}

/// Reads a gain from either a gain.json or a certificate.json.
fn load_gain(path: &Path, aug: &AugmentedSystem) -> Result<ProtocolGain, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| fail(1, format!("cannot read {}: {e}", path.display())))?;
    let gain = if let Ok(file) = read_json::<GainFile, _>(text.as_bytes()) {
        file.into_gain()?
    } else if let Ok(file) = read_json::<CertificateFile, _>(text.as_bytes()) {
        file.gain.into_gain()?
    } else {
        return Err(fail(
            1,
            format!(
                "{} is neither a gain file nor a certificate file",
                path.display()
            ),
        ));
    };
    let (rows, cols) = gain.matrix().dim();
    if rows != aug.dim() || cols != aug.sensing.output_dim() {
        return Err(fail(
            1,
            format!(
                "gain dimensions {rows}x{cols} do not match the project \
                 ({}x{} expected)",
                aug.dim(),
                aug.sensing.output_dim()
            ),
        ));
    }
    Ok(gain)
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let project = load_project(&args.config.config)?;
    let network = project.network()?;
    let gain = load_gain(&args.gain, &project.aug)?;
    let gamma = match args.gamma {
        Some(g) if g.is_finite() && g > 0.0 => g,
        Some(g) => return Err(fail(1, format!("--gamma must be positive, got {g}"))),
        None => project.gamma,
    };
    let (decoupled, coupled) = verify_both(&project, &network, &gain, gamma)?;
    println!("{decoupled}");
    println!("{coupled}");
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let value = serde_json::json!({
            "gamma": gamma,
            "decoupled": decoupled,
            "coupled": coupled,
            "pass": decoupled.pass && coupled.pass,
        });
        let path = dir.join("verify.json");
        write_json(&value, BufWriter::new(fs::File::create(&path)?))?;
        println!("wrote {}", path.display());
    }
    if decoupled.pass && coupled.pass {
        Ok(())
    } else {
        Err(fail(4, "verification failed"))
    }
}

fn verify_both(
    project: &Project,
    network: &Network,
    gain: &ProtocolGain,
    gamma: f64,
) -> Result<(VerificationReport, VerificationReport), Failure> {
    let opts = HinfOptions::default();
    let decoupled = verify_decoupled(&project.aug, gain, &network.spectrum, gamma, &opts)?;
    let coupled = verify_coupled(&project.aug, gain, &network.dec, gamma, &opts)?;
    Ok((decoupled, coupled))
}

/// Parses the `--disturbance` flag: a keyword or a table file.  The table
/// format is CSV with one row per step and `(N−1)·m_ω` columns, follower-
/// major (all channels of agent 2, then agent 3, …); `#` starts a comment.
fn parse_disturbance(text: &str, project: &Project) -> Result<DisturbanceKind, Failure> {
    match text {
        "none" => Ok(DisturbanceKind::None),
        "sine" => Ok(project.config.simulation.disturbance.resolve()?),
        path => read_disturbance_table(
            Path::new(path),
            project.adj.follower_count(),
            project.aug.follower.disturbance_dim(),
        ),
    }
}

fn read_disturbance_table(
    path: &Path,
    nf: usize,
    m_omega: usize,
) -> Result<DisturbanceKind, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| fail(1, format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse()).collect();
        let values =
            values.map_err(|e| fail(1, format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        if values.len() != nf * m_omega {
            return Err(fail(
                1,
                format!(
                    "{}:{}: expected {} values ({} followers x {} channels), got {}",
                    path.display(),
                    lineno + 1,
                    nf * m_omega,
                    nf,
                    m_omega,
                    values.len()
                ),
            ));
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(fail(
            1,
            format!("{}: empty disturbance table", path.display()),
        ));
    }
    let steps = rows.len();
    let tables = (0..nf)
        .map(|f| Mat::from_shape_fn((steps, m_omega), |(k, j)| rows[k][f * m_omega + j]))
        .collect();
    Ok(DisturbanceKind::Table(tables))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let project = load_project(&args.config.config)?;
    let network = project.network()?;
    let gain = match &args.gain {
        Some(path) => load_gain(path, &project.aug)?,
        None => project
            .config
            .reference_gain(&project.aug)?
            .ok_or_else(|| {
                fail(
                    1,
                    "no gain: pass --gain or add a [reference] section to the config",
                )
            })?,
    };
    let mut sim = project.config.sim_config(&project.adj, &project.aug)?;
    if let Some(horizon) = args.horizon {
        if horizon == 0 {
            return Err(fail(1, "--horizon must be at least 1"));
        }
        sim.horizon = horizon;
    }
    if let Some(seed) = args.seed {
        sim.seed = seed;
    }
    if let Some(disturbance) = &args.disturbance {
        sim.disturbance = parse_disturbance(disturbance, &project)?;
    }

    warn_if_unverified(&project, &network, &gain)?;
    let traj = simulate(&project.adj, &network.dec, &project.aug, &gain, &sim)?;
    fs::create_dir_all(&args.out)?;
    write_run_outputs(&args.out, "trajectories", &traj, project.gamma)?;
    println!(
        "simulated {} steps; final tracking error {:.6e}",
        sim.horizon,
        traj.tracking[traj.len() - 1]
    );
    Ok(())
}

/// Cheap stability warning before simulating an arbitrary gain.
fn warn_if_unverified(
    project: &Project,
    network: &Network,
    gain: &ProtocolGain,
) -> Result<(), Failure> {
    let coupled = coupled_error_system(&project.aug, gain, &network.dec);
    let (schur, radius) =
        is_schur(&coupled.a_d, Tolerances::standard().schur_margin).map_err(Failure::from)?;
    if !schur {
        eprintln!(
            "warning: gain is not verified (coupled spectral radius {radius:.6} >= 1); \
             simulating anyway"
        );
    }
    Ok(())
}

/// Writes the CSV and the three standard plots for one simulation run.
fn write_run_outputs(
    dir: &Path,
    stem: &str,
    traj: &Trajectories,
    gamma: f64,
) -> Result<Vec<PathBuf>, Failure> {
    let mut written = Vec::new();
    let csv_path = dir.join(format!("{stem}.csv"));
    write_csv(traj, gamma, BufWriter::new(fs::File::create(&csv_path)?))?;
    written.push(csv_path);

    let tracking_path = dir.join(format!("{stem}_tracking.svg"));
    write_line_plot(
        "aggregate tracking error E(k)",
        &[("E(k)", &traj.tracking)],
        BufWriter::new(fs::File::create(&tracking_path)?),
    )?;
    written.push(tracking_path);

    let (e_curve, w_curve) = energy_curves(traj, gamma)?;
    let energy_path = dir.join(format!("{stem}_energy.svg"));
    write_line_plot(
        "cumulative energies",
        &[
            ("output energy", &e_curve),
            ("scaled disturbance budget", &w_curve),
        ],
        BufWriter::new(fs::File::create(&energy_path)?),
    )?;
    written.push(energy_path);

    // Sensed leader component against the matching follower components.
    let dim = traj.theta.ncols();
    let leader_series = traj.theta.column(dim - 1).to_owned();
    let mut series: Vec<(String, Array1<f64>)> = vec![("leader".into(), leader_series)];
    for (f, zeta) in traj.zeta.iter().enumerate() {
        series.push((format!("agent {}", f + 2), zeta.column(dim - 1).to_owned()));
    }
    let labeled: Vec<(&str, &Array1<f64>)> = series
        .iter()
        .map(|(name, data)| (name.as_str(), data))
        .collect();
    let states_path = dir.join(format!("{stem}_states.svg"));
    write_line_plot(
        "sensed leader component vs follower states",
        &labeled,
        BufWriter::new(fs::File::create(&states_path)?),
    )?;
    written.push(states_path);

    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(written)
}

fn cmd_demo(args: &DemoArgs) -> Result<(), Failure> {
    let project = match &args.config {
        Some(path) => load_project(path)?,
        None => load_project_text(DEMO_CONFIG)?,
    };
    fs::create_dir_all(&args.out)?;

    println!("== stage 1: validate ==");
    if !run_validation(&project)? {
        return Err(fail(2, "demo stage 1 (validate) failed"));
    }
    let network = project.network()?;

    println!("\n== stage 2: spectrum ==");
    print_spectrum(&network);
    write_json(
        &spectrum_json(&network),
        BufWriter::new(fs::File::create(args.out.join("spectrum.json"))?),
    )?;

    println!("\n== stage 3: synthesize ==");
    let options = project.config.solver_options()?;
    let cert = solve_feasibility(
        &project.aug,
        project.gamma,
        network.spectrum.lambda0,
        &options,
    )
    .map_err(|e| match e {
        Error::Infeasible { .. } => fail(3, format!("demo stage 3 (synthesize) failed: {e}")),
        other => other.into(),
    })?;
    println!("epsilon = {:.16e}", cert.variables.epsilon);
    println!(
        "margins: feasibility {:.6e}, output {:.6e}, p_positivity {:.6e}",
        cert.margins.feasibility, cert.margins.output, cert.margins.p_positivity
    );
    write_json(
        &CertificateFile::from_certificate(&cert),
        BufWriter::new(fs::File::create(args.out.join("certificate.json"))?),
    )?;
    write_json(
        &GainFile::from_gain(&cert.f),
        BufWriter::new(fs::File::create(args.out.join("gain.json"))?),
    )?;

    println!("\n== stage 4: verify (synthesized and reference gains) ==");
    let (dec_synth, coup_synth) = verify_both(&project, &network, &cert.f, project.gamma)?;
    println!("synthesized gain:");
    println!("{dec_synth}");
    println!("{coup_synth}");
    let reference = project
        .config
        .reference_gain(&project.aug)?
        .ok_or_else(|| fail(1, "demo config must carry a [reference] gain"))?;
    let (dec_ref, coup_ref) = verify_both(&project, &network, &reference, project.gamma)?;
    println!("reference gain:");
    println!("{dec_ref}");
    println!("{coup_ref}");
    write_json(
        &serde_json::json!({
            "gamma": project.gamma,
            "synthesized": { "decoupled": dec_synth, "coupled": coup_synth },
            "reference": { "decoupled": dec_ref, "coupled": coup_ref },
        }),
        BufWriter::new(fs::File::create(args.out.join("verify.json"))?),
    )?;
    if !(dec_synth.pass && coup_synth.pass && dec_ref.pass && coup_ref.pass) {
        return Err(fail(4, "demo stage 4 (verify) failed"));
    }

    println!("\n== stage 5: simulate (disturbance driven, zero initial state) ==");
    let driven_config = SimConfig {
        horizon: project.config.simulation.horizon,
        initials: InitialConditions::Zero,
        disturbance: project.config.simulation.disturbance.resolve()?,
        seed: project.config.simulation.seed,
    };
    let driven = simulate(
        &project.adj,
        &network.dec,
        &project.aug,
        &cert.f,
        &driven_config,
    )?;
    write_run_outputs(&args.out, "trajectories_driven", &driven, project.gamma)?;
    let (e_curve, w_curve) = energy_curves(&driven, project.gamma)?;
    let worst = (0..driven.len())
        .map(|k| e_curve[k] - w_curve[k])
        .fold(f64::NEG_INFINITY, f64::max);
    let energy_ok = worst <= 0.0;
    println!(
        "energy inequality at every prefix: {} (worst slack {:.6e})",
        if energy_ok { "pass" } else { "FAIL" },
        worst
    );

    println!("\n== stage 6: simulate (no disturbance, seeded initial state) ==");
    let free_config = SimConfig {
        horizon: DEMO_FREE_HORIZON,
        initials: InitialConditions::Seeded {
            scale: project.config.simulation.initial_scale,
        },
        disturbance: DisturbanceKind::None,
        seed: project.config.simulation.seed,
    };
    let free = simulate(
        &project.adj,
        &network.dec,
        &project.aug,
        &cert.f,
        &free_config,
    )?;
    write_run_outputs(&args.out, "trajectories_free", &free, project.gamma)?;
    let crossing = (0..free.len()).find(|&k| free.tracking[k] < DEMO_TRACKING_THRESHOLD);
    match crossing {
        Some(k) => println!("tracking error fell below {DEMO_TRACKING_THRESHOLD:.0e} at step {k}"),
        None => println!(
            "tracking error did not fall below {DEMO_TRACKING_THRESHOLD:.0e} within {} steps",
            DEMO_FREE_HORIZON
        ),
    }

    if !energy_ok || crossing.is_none() {
        return Err(fail(4, "demo stage 5/6 checks failed"));
    }
    println!("\ndemo: PASS");
    Ok(())
}
