//! `ifind`: kinematics queries, sweep planning, scenario runs, reports and the TCP service.
//!
//! Exit status is 0 on success, 1 when the request was understood but could not
//! be carried out (IK or planning failed, a limit was violated), and 2 for usage
//! and input errors (bad flags, unreadable or unparsable files).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ifind_sim::dual::{plan_dual_sweep, rig_preset_source, DualError, PlanOptions};
use ifind_sim::kinematics::{
    forward_kinematics, load_chain, pose_error, solve_ik, ChainSource, IkOptions, KinematicsError, Pose,
};
use ifind_sim::session::{load_session, standard_views, EventKind, SessionError, SessionLog, SessionReport};
use ifind_sim::sim::{
    LogSink, Pacing, Robot, Scenario, ServeConfig, SimError, SimService, StreamItem, SweepSpec, TcpServer,
    MAX_INDENTATION, PHANTOM_MESH,
};
use ifind_sim::surface::{load_mesh, phantom};

#[derive(Parser, Debug)]
#[command(name = "ifind", version, about = "iFIND robot simulator")]
struct Cli {
    /// Output style: human-readable text or one JSON record per line.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Records,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Probe pose(s) for a joint vector.
    Fk(FkArgs),
    /// Joint vector placing a single arm's probe at a pose.
    Ik(IkArgs),
    /// Plan a two-arm sweep and write the joint trajectory.
    Plan(PlanArgs),
    /// Run a scenario and write its session log.
    Run(RunArgs),
    /// Summarise a session log.
    Report(ReportArgs),
    /// Run the simulation in real time behind the TCP protocol.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct FkArgs {
    /// Chain or rig preset, or a chain config file.
    #[arg(long)]
    preset: String,
    /// Comma-separated joint values; defaults to home.
    #[arg(long, allow_hyphen_values = true)]
    q: Option<Vector>,
}

#[derive(Args, Debug)]
struct IkArgs {
    /// Chain preset or chain config file.
    #[arg(long)]
    preset: String,
    /// Target as x,y,z,qw,qx,qy,qz (m, unit quaternion).
    #[arg(long, allow_hyphen_values = true)]
    pose: Vector,
    /// Starting joint vector; defaults to home.
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<Vector>,
}

#[derive(Args, Debug)]
struct PlanArgs {
    /// Sweep file with `[left]` and `[right]` paths.
    #[arg(long)]
    paths: PathBuf,
    /// `phantom` or an OFF mesh.
    #[arg(long, default_value = PHANTOM_MESH)]
    mesh: String,
    /// Dual-arm rig preset.
    #[arg(long, default_value = "ifind-v3")]
    preset: String,
    /// Minimum capsule clearance between the arms, m.
    #[arg(long, default_value_t = 0.02)]
    margin: f64,
    /// Depth each waypoint is pressed into the surface, m.
    #[arg(long, default_value_t = 0.0)]
    indentation: f64,
    /// Trajectory output, one waypoint per line.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Bundled scenario name or scenario file.
    #[arg(long)]
    scenario: String,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Session log path; without it the log goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    log: PathBuf,
}

#[derive(Args, Debug)]
struct ServeArgs {
    /// Serve config file (`[setup]` plus host and port).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Robot preset on the bundled phantom, when no config is given.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    host: Option<String>,
    /// 0 picks a free port.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the session log here.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Stop after this many ticks instead of running until killed.
    #[arg(long)]
    max_ticks: Option<u64>,
}

enum Failure {
    /// Exit 2.
    Usage(String),
    /// Exit 1.
    Domain(String),
}

type Outcome = Result<(), Failure>;

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn domain(e: impl ToString) -> Failure {
    Failure::Domain(e.to_string())
}

/// A comma-separated list of finite numbers.
#[derive(Clone, Debug)]
struct Vector(Vec<f64>);

impl FromStr for Vector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|v| match v.trim().parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(format!("`{v}` is not a finite number")),
            })
            .collect::<Result<_, _>>()
            .map(Vector)
    }
}

fn joined(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn kinematics_failure(e: KinematicsError) -> Failure {
    match e {
        KinematicsError::LimitViolation { .. } | KinematicsError::NotConverged { .. } => domain(e),
        _ => usage(e),
    }
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::Kinematics(k) => kinematics_failure(k),
        SimError::Session(SessionError::TickRegression { .. }) => domain(e),
        _ => usage(e),
    }
}

fn load_robot(name: &str) -> Result<Robot, Failure> {
    if rig_preset_source(name).is_some() {
        return Robot::preset(name).map_err(usage);
    }
    load_chain(&ChainSource::parse(name)).map(Robot::Single).map_err(usage)
}

fn fk(args: FkArgs, format: Format, out: &mut impl Write) -> Outcome {
    let robot = load_robot(&args.preset)?;
    let q = args.q.map_or_else(|| robot.home().0, |v| v.0);
    robot.check(&q).map_err(kinematics_failure)?;
    let names: &[&str] = if robot.arms() == 2 { &["left", "right"] } else { &["tip"] };
    for (name, tip) in names.iter().zip(robot.tips(&q)) {
        let a = Pose::from_isometry(&tip).to_array();
        let line = match format {
            Format::Records => json!({"arm": name, "position": &a[..3], "quaternion": &a[3..]}).to_string(),
            Format::Text => format!(
                "{name}: position [{:.6}, {:.6}, {:.6}] m  quaternion [{:.6}, {:.6}, {:.6}, {:.6}]",
                a[0], a[1], a[2], a[3], a[4], a[5], a[6]
            ),
        };
        writeln!(out, "{line}").map_err(domain)?;
    }
    Ok(())
}

fn ik(args: IkArgs, format: Format, out: &mut impl Write) -> Outcome {
    let chain = match load_robot(&args.preset)? {
        Robot::Single(c) => c,
        Robot::Dual(_) => return Err(usage(format!("{} is a two-arm rig; ik takes a single arm", args.preset))),
    };
    let target = Pose::from_slice(&args.pose.0)
        .ok_or_else(|| usage("--pose needs x,y,z,qw,qx,qy,qz with a non-zero quaternion"))?;
    let seed = args.seed.map_or_else(|| chain.home().0, |v| v.0);
    let q = solve_ik(&chain, &target, &seed, &IkOptions::default()).map_err(kinematics_failure)?;
    let line = match format {
        Format::Text => joined(&q),
        Format::Records => {
            let reached = forward_kinematics(&chain, &q).map_err(kinematics_failure)?;
            let e = pose_error(&reached.to_isometry(), &target.to_isometry());
            json!({
                "joints": q.0,
                "position_residual": e.fixed_rows::<3>(0).norm(),
                "orientation_residual": e.fixed_rows::<3>(3).norm(),
            })
            .to_string()
        }
    };
    writeln!(out, "{line}").map_err(domain)
}

fn plan(args: PlanArgs, format: Format, out: &mut impl Write) -> Outcome {
    let text = std::fs::read_to_string(&args.paths).map_err(|e| usage(format!("{}: {e}", args.paths.display())))?;
    let spec = SweepSpec::from_toml_str(&text).map_err(usage)?;
    let mesh = if args.mesh == PHANTOM_MESH {
        phantom()
    } else {
        load_mesh(&args.mesh).map_err(usage)?
    };
    let rig = match load_robot(&args.preset)? {
        Robot::Dual(r) => r,
        Robot::Single(_) => return Err(usage(format!("{} is a single arm; plan needs a two-arm rig", args.preset))),
    };
    if !(0.0..=MAX_INDENTATION).contains(&args.indentation) {
        return Err(usage(format!("indentation {} is outside [0, {MAX_INDENTATION}] m", args.indentation)));
    }
    let def = spec.resolve(2, &mesh, &standard_views(&mesh)).map_err(usage)?;
    let paths = def.at_indentation(args.indentation);
    let trajectory = match plan_dual_sweep(&rig, &paths[0], &paths[1], &rig.home(), &PlanOptions::with_margin(args.margin)) {
        Ok(t) => t,
        Err(e @ DualError::PlanFailed { .. }) => return Err(domain(e)),
        Err(e @ DualError::InvalidArgument(_)) => return Err(usage(e)),
        Err(e) => return Err(domain(e)),
    };
    let file = File::create(&args.out).map_err(|e| domain(format!("{}: {e}", args.out.display())))?;
    let mut w = BufWriter::new(file);
    trajectory.write_ndjson(&mut w).and_then(|_| w.flush()).map_err(domain)?;

    let min = trajectory.min_clearance();
    match format {
        Format::Records => {
            for p in &trajectory.points {
                writeln!(out, "{}", json!({"waypoint": p.tick, "min_clearance": p.min_clearance})).map_err(domain)?;
            }
            writeln!(
                out,
                "{}",
                json!({"sweep": def.id, "waypoints": trajectory.len(), "min_clearance": min, "margin": args.margin})
            )
            .map_err(domain)?;
        }
        Format::Text => {
            writeln!(out, "sweep {}: {} waypoints -> {}", def.id, trajectory.len(), args.out.display()).map_err(domain)?;
            for p in &trajectory.points {
                writeln!(out, "  waypoint {:>3}  clearance {:.4} m", p.tick, p.min_clearance).map_err(domain)?;
            }
            writeln!(out, "min clearance {:.4} m (margin {} m)", min, args.margin).map_err(domain)?;
        }
    }
    Ok(())
}

fn run(args: RunArgs, format: Format, out: &mut impl Write) -> Outcome {
    let path = Path::new(&args.scenario);
    let (mut scenario, base) = if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        (Scenario::from_toml_str(&text).map_err(usage)?, path.parent())
    } else {
        (Scenario::bundled(&args.scenario).map_err(usage)?, None)
    };
    if let Some(seed) = args.seed {
        scenario.setup.seed = seed;
    }
    let log = scenario.run(base).map_err(sim_failure)?;
    let Some(dest) = args.out else {
        return log.write_ndjson(out).map_err(domain);
    };
    log.save(&dest).map_err(domain)?;
    let grades = log.of_kind(EventKind::Grade).count();
    let safety = log.of_kind(EventKind::Safety).count();
    let line = match format {
        Format::Records => json!({
            "scenario": scenario.name,
            "seed": scenario.setup.seed,
            "ticks": scenario.ticks,
            "events": log.len(),
            "grades": grades,
            "safety_events": safety,
            "log": dest.display().to_string(),
        })
        .to_string(),
        Format::Text => format!(
            "{}: {} ticks, {} events, {} grades, {} safety events -> {}",
            scenario.name,
            scenario.ticks,
            log.len(),
            grades,
            safety,
            dest.display()
        ),
    };
    writeln!(out, "{line}").map_err(domain)
}

fn report(args: ReportArgs, format: Format, out: &mut impl Write) -> Outcome {
    let log: SessionLog = load_session(&args.log).map_err(usage)?;
    let report = SessionReport::from_log(&log).map_err(|e| match e {
        SessionError::Parse { .. } | SessionError::InvalidAnswer { .. } => usage(e),
        other => domain(other),
    })?;
    match format {
        Format::Text => write!(out, "{}", report.render()).map_err(domain),
        Format::Records => writeln!(out, "{}", serde_json::to_string(&report).map_err(domain)?).map_err(domain),
    }
}

fn serve(args: ServeArgs, out: &mut impl Write) -> Outcome {
    let (mut config, base) = match &args.config {
        Some(path) => (ServeConfig::load(path).map_err(usage)?, path.parent()),
        None => (ServeConfig::for_preset(args.preset.as_deref().unwrap_or("ifind-v2")), None),
    };
    if let Some(host) = args.host {
        config.host = host;
    }
    if let Some(port) = args.port {
        config.port = port;
    }
    if let Some(seed) = args.seed {
        config.setup.seed = seed;
    }
    let state = config.setup.build(base).map_err(sim_failure)?;
    let sink = args.log.map_or(LogSink::Discard, LogSink::File);
    let service = SimService::start(state, Pacing::RealTime, sink).map_err(sim_failure)?;
    let server = TcpServer::bind((config.host.as_str(), config.port), service.handle())
        .map_err(|e| domain(format!("{}:{}: {e}", config.host, config.port)))?;
    let addr = server.local_addr().map_err(domain)?;
    writeln!(out, "listening on {addr}").and_then(|_| out.flush()).map_err(domain)?;

    let Some(limit) = args.max_ticks else {
        return server.run().map_err(domain);
    };
    let frames = service.subscribe(1024);
    let listener = server.spawn().map_err(domain)?;
    while let Ok(item) = frames.recv() {
        if matches!(item, StreamItem::Frame(f) if f.tick >= limit) {
            break;
        }
    }
    listener.stop();
    service.shutdown().map_err(sim_failure)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Cmd::Fk(a) => fk(a, cli.format, &mut out),
        Cmd::Ik(a) => ik(a, cli.format, &mut out),
        Cmd::Plan(a) => plan(a, cli.format, &mut out),
        Cmd::Run(a) => run(a, cli.format, &mut out),
        Cmd::Report(a) => report(a, cli.format, &mut out),
        Cmd::Serve(a) => serve(a, &mut out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(m)) => {
            eprintln!("ifind: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("ifind: {m}");
            ExitCode::from(2)
        }
    }
}
