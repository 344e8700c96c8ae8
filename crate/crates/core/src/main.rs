use std::fs::File;
use std::io::{self, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use agemec::bridge::{serve_connect, serve_stream, serve_tcp, BridgeError};
use agemec::fql::{
    inner_steps_bound, run_fql_with, ControlledErrorInner, ExactInner, FqlError, FqlTrace, OuterConfig, SpeedyInner,
    StopRule,
};
use agemec::harness::{
    build_session, convergence_report, rows_for_session, run_experiment, sweep, write_sweep_csv, ExperimentSpec,
    HarnessError, ResultsTable, SweepAxis, SweepSpec,
};
use agemec::mdp::{dinkelbach_exact, enumerate_oracle, parse_mdp, write_mdp, FractionalMdp, MdpError};

#[derive(Parser)]
#[command(name = "agemec", version, about = "AoI-minimal edge offloading toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write per-device, per-episode results.
    Run(RunArgs),
    /// Repeat an experiment across values of one configuration axis.
    Sweep(SweepArgs),
    /// Run Fractional Q-Learning on a fractional MDP.
    Fql(FqlArgs),
    /// Solve a small fractional MDP exactly.
    Oracle(OracleArgs),
    /// Serve a simulation to learning clients over the bridge protocol.
    Serve(ServeArgs),
    /// Check the linear convergence of an FQL trace.
    Report(ReportArgs),
}

#[derive(Args)]
struct SpecArgs {
    /// Experiment file (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reference scale: 20 devices instead of the 4-device desk default.
    #[arg(long)]
    full_scale: bool,
    /// Override the seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Per-seed rows; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mean and standard deviation across seeds.
    #[arg(long)]
    aggregate: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// edge_capacity, drop_coefficient, task_density, device_capacity or num_devices.
    #[arg(long)]
    axis: Option<String>,
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// Policies to compare, each on every device.
    #[arg(long, value_delimiter = ',')]
    policies: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MdpSource {
    /// MDP in the `fmdp` text format.
    #[arg(long, conflicts_with = "random")]
    mdp: Option<PathBuf>,
    /// Seed for a random instance.
    #[arg(long)]
    random: Option<u64>,
    #[arg(long, default_value_t = 5)]
    states: usize,
    #[arg(long, default_value_t = 3)]
    actions: usize,
    #[arg(long, default_value_t = 0.9)]
    discount: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum InnerKind {
    Sampled,
    Exact,
    Controlled,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Bound,
    Residual,
}

#[derive(Args)]
struct FqlArgs {
    #[command(flatten)]
    source: MdpSource,
    #[arg(long, value_enum, default_value = "sampled")]
    inner: InnerKind,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    /// Failure probability in the step bound.
    #[arg(long, default_value_t = 0.1)]
    zeta: f64,
    /// Inner sweeps per episode; the step bound when omitted.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum, default_value = "bound")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.0)]
    gamma1: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Injected error as a fraction of `α |Q|` (controlled inner only).
    #[arg(long, default_value_t = 0.9)]
    fraction: f64,
    /// Trace CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    source: MdpSource,
    /// Also write the instance in `fmdp` format.
    #[arg(long)]
    emit: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, conflicts_with_all = ["connect", "stdio"])]
    listen: Option<String>,
    /// Dial a listening client instead.
    #[arg(long, conflicts_with = "stdio")]
    connect: Option<String>,
    /// Speak the protocol on stdin/stdout.
    #[arg(long)]
    stdio: bool,
    /// Per-episode statistics after the session ends.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Trace CSV written by `agemec fql`.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, conflicts_with = "mdp")]
    gamma_star: Option<f64>,
    /// Compute γ* exactly from this MDP.
    #[arg(long)]
    mdp: Option<PathBuf>,
    /// Check the tail-mean ratio against this rate.
    #[arg(long)]
    alpha: Option<f64>,
}

enum Failure {
    Config(String),
    Runtime(String),
    Check(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<BridgeError> for Failure {
    fn from(e: BridgeError) -> Self {
        HarnessError::from(e).into()
    }
}

impl From<FqlError> for Failure {
    fn from(e: FqlError) -> Self {
        match e {
            FqlError::Argument(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<MdpError> for Failure {
    fn from(e: MdpError) -> Self {
        match e {
            MdpError::NoConvergence { .. } | MdpError::Singular => Failure::Runtime(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Fql(a) => fql(a),
        Command::Oracle(a) => oracle(a),
        Command::Serve(a) => serve(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Check(m)) => {
            eprintln!("check failed: {m}");
            ExitCode::from(3)
        }
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_spec(args: &SpecArgs) -> Result<ExperimentSpec, Failure> {
    let mut spec = match &args.config {
        Some(p) => ExperimentSpec::from_file(p)?,
        None => ExperimentSpec::default(),
    };
    if args.full_scale {
        spec.sim.num_devices = 20;
    }
    if !args.seeds.is_empty() {
        spec.seeds = args.seeds.clone();
    }
    Ok(spec)
}

fn summarize(table: &ResultsTable) {
    for (seed, score) in table.seed_scores() {
        eprintln!("seed {seed}: average AoI {score:.4} s");
    }
    eprintln!("drop rate {:.4}", table.drop_rate());
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let spec = load_spec(&a.spec)?;
    let table = run_experiment(&spec)?;
    table.write_rows(output(&a.out)?)?;
    if let Some(p) = &a.aggregate {
        table.write_aggregate(output(&Some(p.clone()))?)?;
    }
    summarize(&table);
    Ok(())
}

fn sweep_cmd(a: SweepArgs) -> Result<(), Failure> {
    let mut spec = load_spec(&a.spec)?;
    if let Some(axis) = &a.axis {
        spec.sweep = Some(SweepSpec {
            axis: SweepAxis::parse(axis)?,
            values: a.values.clone(),
            policies: a.policies.clone(),
        });
    } else if !a.values.is_empty() || !a.policies.is_empty() {
        return Err(Failure::Config("--values and --policies need --axis".into()));
    }
    let rows = sweep(&spec)?;
    write_sweep_csv(output(&a.out)?, &rows)?;
    Ok(())
}

fn load_mdp(source: &MdpSource) -> Result<FractionalMdp, Failure> {
    match (&source.mdp, source.random) {
        (Some(path), _) => read_mdp(path),
        (None, Some(seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(FractionalMdp::random(
                &mut rng,
                source.states,
                source.actions,
                source.discount,
                (0.0, 1.0),
                (0.2, 1.0),
            )?)
        }
        (None, None) => Err(Failure::Config("give --mdp <file> or --random <seed>".into())),
    }
}

fn read_mdp(path: &Path) -> Result<FractionalMdp, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(parse_mdp(&text)?)
}

fn fql(a: FqlArgs) -> Result<(), Failure> {
    let mdp = load_mdp(&a.source)?;
    let outer = OuterConfig {
        episodes: a.episodes,
        tolerance: 1e-3,
    };
    let trace = match a.inner {
        InnerKind::Sampled => {
            let z = mdp.num_states() * mdp.num_actions();
            let budget = match a.steps {
                Some(s) => s,
                None => inner_steps_bound(z, a.episodes, a.zeta, a.alpha)?,
            };
            let stop = match a.mode {
                ModeArg::Bound => StopRule::bound_steps(a.alpha, budget),
                ModeArg::Residual => StopRule::residual(a.alpha, budget),
            };
            stop.validate()?;
            eprintln!("inner budget {budget} sweeps per episode");
            run_fql_with(
                &mut SpeedyInner {
                    model: &mdp,
                    stop,
                    seed: a.seed,
                },
                a.gamma1,
                outer,
            )?
        }
        InnerKind::Exact => run_fql_with(&mut ExactInner { mdp: &mdp, tol: 1e-12 }, a.gamma1, outer)?,
        InnerKind::Controlled => run_fql_with(
            &mut ControlledErrorInner {
                mdp: &mdp,
                alpha: a.alpha,
                fraction: a.fraction,
            },
            a.gamma1,
            outer,
        )?,
    };
    trace.write_csv(output(&a.out)?)?;
    eprintln!("gamma_final {} converged {}", trace.gamma_final, trace.converged);
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<(), Failure> {
    let mdp = load_mdp(&a.source)?;
    if let Some(p) = &a.emit {
        std::fs::write(p, write_mdp(&mdp))?;
    }
    let exact = enumerate_oracle(&mdp)?;
    let dinkelbach = dinkelbach_exact(&mdp, 1e-10, 100)?;
    let mut out = io::stdout().lock();
    writeln!(out, "gamma_star {}", exact.gamma_star)?;
    writeln!(out, "policy {:?}", exact.policy)?;
    writeln!(out, "dinkelbach {:?}", dinkelbach.iterates)?;
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), Failure> {
    let spec = load_spec(&a.spec)?;
    spec.validate_local()?;
    let seed = spec.seeds[0];
    let has_bridge = spec.policies.iter().any(|p| p.trim() == "bridge");
    let mut session = build_session(&spec, seed, !has_bridge)?;
    match (&a.listen, &a.connect, a.stdio) {
        (Some(addr), _, _) => {
            let listener = TcpListener::bind(addr).map_err(|e| Failure::Config(format!("cannot listen on {addr}: {e}")))?;
            eprintln!("listening on {}", listener.local_addr()?);
            serve_tcp(&mut session, listener)?;
        }
        (None, Some(addr), _) => serve_connect(&mut session, addr)?,
        (None, None, true) => {
            let stdin = io::stdin();
            serve_stream(&mut session, BufReader::new(stdin.lock()), io::stdout().lock())?;
        }
        (None, None, false) => return Err(Failure::Config("give --listen, --connect or --stdio".into())),
    }
    if let Some(p) = &a.out {
        let rows = rows_for_session(&spec, seed, &session);
        let mut w = csv::Writer::from_writer(File::create(p)?);
        for r in rows {
            w.serialize(r).map_err(|e| Failure::Runtime(e.to_string()))?;
        }
        w.flush()?;
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), Failure> {
    let file = File::open(&a.trace).map_err(|e| Failure::Config(format!("{}: {e}", a.trace.display())))?;
    let trace = FqlTrace::read_csv(file)?;
    let gamma_star = match (&a.mdp, a.gamma_star) {
        (Some(p), _) => Some(enumerate_oracle(&read_mdp(p)?)?.gamma_star),
        (None, g) => g,
    };
    let report = convergence_report(&trace, gamma_star, a.alpha);
    let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
    writeln!(io::stdout().lock(), "{json}")?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Check(report.reasons.join("; ")))
    }
}
