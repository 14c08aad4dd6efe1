use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use protsim::analytics::{
    build_agents, build_dataset, conventional_specs, load_environment, serve_stream, serve_tcp, substation_devices,
    underreach_map, write_class_counts, write_dataset_csv, AnalyticsError, DatasetConfig, Granularity, RunManifest,
    UnderreachConfig,
};
use protsim::episode::{run_batch, write_records_jsonl, write_summary_csv, Environment, Summary};
use protsim::netmodel::{
    build_topology, ground_path_exists, parse_dss_file, to_canonical, topology_to_dot, validate, DotStyle, Network,
    Severity,
};
use protsim::powerflow::{solve_powerflow, write_solution_csv, PowerFlowOptions};
use protsim::relays::{AgentSpec, ConventionalConfig};
use protsim::scenario::{generate_profiles, ScenarioSample};
use protsim::shortcircuit::{
    fault_study, valid_fault_types, write_fault_study_csv, FaultKind, FaultLocation, FaultOptions, FaultSpec,
};

#[derive(Parser)]
#[command(name = "protsim", version, about = "Distribution-feeder protection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of random episodes and write records, summary and report.
    Run(RunArgs),
    /// Map buses where simulated faults go undetected.
    Underreach(UnderreachArgs),
    /// Export an automatically labeled training dataset.
    Dataset(DatasetArgs),
    /// Serve the environment over newline-delimited JSON.
    Serve(ServeArgs),
    /// Parse, validate and report on a network file.
    Validate { network: PathBuf },
    /// Print the directed feeder graph as DOT.
    Dot { network: PathBuf },
    /// Print the canonical DSS form of a network.
    Canonical { network: PathBuf },
    /// Solve the base-case power flow and print node voltages as CSV.
    Powerflow { network: PathBuf },
    /// Solve every valid fault type at one bus and print a CSV table.
    FaultStudy {
        network: PathBuf,
        #[arg(long)]
        bus: String,
        #[arg(long, default_value_t = 0.0)]
        zf: f64,
        /// Restrict to one fault type (slg, ll, llg, 3p, 3pg).
        #[arg(long)]
        kind: Option<FaultKind>,
    },
    /// Write a synthetic hourly profile CSV.
    GenProfiles {
        #[arg(long, default_value_t = 8760)]
        hours: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "2023-01-01T00:00:00")]
        start: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run manifest; flags override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Agent settings file, or one of `oracle`, `hold`, `conventional`.
    #[arg(long)]
    agents: Option<String>,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    fault_prob: Option<f64>,
    /// Fault impedance range in ohm, `lo,hi`.
    #[arg(long, value_parser = parse_range)]
    zf_range: Option<[f64; 2]>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct UnderreachArgs {
    #[command(flatten)]
    common: Common,
    /// Fault impedance (ohm).
    #[arg(long, default_value_t = 0.0)]
    zf: f64,
    /// Scenarios sampled per bus.
    #[arg(long, default_value_t = 3)]
    scenarios: u64,
    /// Fault types to simulate; all valid types when omitted.
    #[arg(long, value_delimiter = ',')]
    kinds: Vec<FaultKind>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Step,
    Episode,
}

#[derive(Args)]
struct DatasetArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "step")]
    granularity: GranularityArg,
    /// Observation channels used as features.
    #[arg(long, value_delimiter = ',', default_value = "v1_pu,i1_a")]
    channels: Vec<String>,
    /// Steps per episode (per-step granularity).
    #[arg(long, default_value_t = 60)]
    steps: usize,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, conflicts_with = "stdio")]
    port: Option<u16>,
    #[arg(long)]
    stdio: bool,
}

fn parse_range(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok([lo, hi])
}

type Result<T> = std::result::Result<T, AnalyticsError>;

fn input(msg: impl std::fmt::Display) -> AnalyticsError {
    AnalyticsError::Input(msg.to_string())
}

fn runtime(msg: impl std::fmt::Display) -> AnalyticsError {
    AnalyticsError::Runtime(msg.to_string())
}

#[derive(Clone, Copy, PartialEq)]
enum Policy {
    Oracle,
    Hold,
    Conventional,
}

struct Setup {
    manifest: RunManifest,
    policy: Option<Policy>,
}

impl Common {
    fn setup(&self) -> Result<Setup> {
        let mut m = match (&self.manifest, &self.network) {
            (Some(p), _) => RunManifest::load(p)?,
            (None, Some(n)) => {
                let seed = self.seed.ok_or_else(|| input("--seed is required without a manifest"))?;
                RunManifest::new(n, seed)
            }
            (None, None) => return Err(input("either --manifest or --network is required")),
        };
        if let Some(n) = &self.network {
            m.network = n.clone();
        }
        if let Some(p) = &self.profiles {
            m.profiles = Some(p.clone());
        }
        let mut policy = None;
        if let Some(a) = &self.agents {
            policy = match a.as_str() {
                "oracle" if !Path::new(a).exists() => Some(Policy::Oracle),
                "hold" if !Path::new(a).exists() => Some(Policy::Hold),
                "conventional" if !Path::new(a).exists() => Some(Policy::Conventional),
                _ => None,
            };
            m.agents = if policy.is_some() { None } else { Some(PathBuf::from(a)) };
        }
        if let Some(n) = self.episodes {
            m.episodes = n;
        }
        if let Some(s) = self.seed {
            m.seed = s;
        }
        if let Some(w) = self.workers {
            m.workers = w;
        }
        if let Some(o) = &self.out {
            m.out = o.clone();
        }
        if let Some(p) = self.fault_prob {
            m.faults.fault_probability = p;
        }
        if let Some(r) = self.zf_range {
            m.faults.impedance_range = r;
        }
        Ok(Setup { manifest: m, policy })
    }
}

impl Setup {
    fn environment(&self) -> Result<Environment> {
        load_environment(&self.manifest)
    }

    fn agents(&self, env: &Environment) -> Result<(String, Vec<AgentSpec>)> {
        let devices = env.network().device_ids();
        let (name, specs, warnings) = match self.policy {
            Some(Policy::Oracle) => ("oracle".into(), devices.into_iter().map(|device| AgentSpec::Oracle { device }).collect(), vec![]),
            Some(Policy::Hold) => ("hold".into(), devices.into_iter().map(|device| AgentSpec::Hold { device }).collect(), vec![]),
            Some(Policy::Conventional) => {
                let (s, w) = conventional_specs(env, &ConventionalConfig::default())?;
                ("conventional".into(), s, w)
            }
            None => {
                let name = match &self.manifest.agents {
                    Some(p) => p.file_stem().map_or("agents".into(), |s| s.to_string_lossy().into_owned()),
                    None => "conventional".into(),
                };
                let (s, w) = build_agents(&self.manifest, env)?;
                (name, s, w)
            }
        };
        for w in warnings {
            log::warn!("{w:?}");
        }
        Ok((name, specs))
    }

    fn out_dir(&self) -> Result<&Path> {
        let out = self.manifest.out.as_path();
        fs::create_dir_all(out).map_err(|e| input(format!("{}: {e}", out.display())))?;
        Ok(out)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<Network> {
    let out = parse_dss_file(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    Ok(out.network)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let setup = args.common.setup()?;
    let env = setup.environment()?;
    let (name, specs) = setup.agents(&env)?;
    let m = &setup.manifest;
    log::info!("running {} episodes of {} with {} workers", m.episodes, env.network().name, m.workers);
    let batch = run_batch(&env, &specs, m.episodes, m.workers);
    let out = setup.out_dir()?;
    let io = |e: io::Error| runtime(e);
    let mut f = create(&out.join("records.jsonl"))?;
    write_records_jsonl(&batch.records, &mut f).and_then(|_| f.flush()).map_err(io)?;
    let rows = vec![(name, batch.summary)];
    write_summary_csv(&rows, create(&out.join("summary.csv"))?).map_err(runtime)?;
    let report = Summary::report(&rows);
    fs::write(out.join("report.txt"), &report).map_err(io)?;
    print!("{report}");
    Ok(())
}

fn cmd_underreach(args: UnderreachArgs) -> Result<()> {
    let setup = args.common.setup()?;
    let env = setup.environment()?;
    let (_, specs) = setup.agents(&env)?;
    let cfg = UnderreachConfig {
        impedance_ohm: args.zf,
        kinds: if args.kinds.is_empty() { FaultKind::ALL.to_vec() } else { args.kinds },
        scenarios: args.scenarios,
        seed: setup.manifest.seed,
        workers: setup.manifest.workers,
        ..Default::default()
    };
    log::info!("substation devices: {:?}", substation_devices(env.topology()));
    let map = underreach_map(&env, &specs, &cfg)?;
    let out = setup.out_dir()?;
    map.write_csv(create(&out.join("underreach.csv"))?).map_err(runtime)?;
    fs::write(out.join("underreach.dot"), map.to_dot(env.topology())).map_err(runtime)?;
    print!("{}", map.report());
    Ok(())
}

fn cmd_dataset(args: DatasetArgs) -> Result<()> {
    let setup = args.common.setup()?;
    let env = setup.environment()?;
    let m = &setup.manifest;
    let cfg = DatasetConfig {
        episodes: args.common.episodes.unwrap_or(500),
        granularity: match args.granularity {
            GranularityArg::Step => Granularity::Step,
            GranularityArg::Episode => Granularity::Episode,
        },
        channels: args.channels,
        steps: args.steps,
        workers: m.workers,
        ..Default::default()
    };
    let ds = build_dataset(&env, &env.network().device_ids(), &cfg)?;
    let out = setup.out_dir()?;
    write_dataset_csv(&ds, create(&out.join("dataset.csv"))?).map_err(runtime)?;
    write_class_counts(&ds, create(&out.join("dataset_counts.json"))?).map_err(runtime)?;
    let counts: Vec<String> = ds.class_counts().iter().map(|(k, v)| format!("{k:?}={v}")).collect();
    println!("{} rows; {}", ds.rows.len(), counts.join(", "));
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<()> {
    let setup = args.common.setup()?;
    let env = setup.environment()?;
    match (args.port, args.stdio) {
        (Some(port), _) => {
            let listener = TcpListener::bind(("127.0.0.1", port)).map_err(|e| input(format!("port {port}: {e}")))?;
            log::info!("listening on {:?}", listener.local_addr());
            serve_tcp(&env, listener, None)
        }
        (None, true) => serve_stream(&env, io::stdin().lock(), io::stdout().lock()),
        (None, false) => Err(input("one of --port or --stdio is required")),
    }
}

fn cmd_validate(path: &Path) -> Result<bool> {
    let parsed = match parse_dss_file(path) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return Ok(false);
        }
    };
    for w in &parsed.warnings {
        println!("warning: {w}");
    }
    let net = &parsed.network;
    let diags = validate(net);
    for d in &diags {
        println!("{d}");
    }
    let mut ok = !diags.iter().any(|d| d.severity == Severity::Error);
    match build_topology(net) {
        Ok(t) => println!("buses: {}, lines: {}, devices: {}, reachable: {}", net.buses.len(), net.lines.len(), net.devices.len(), t.order.len()),
        Err(e) => {
            println!("error: topology: {e}");
            ok = false;
        }
    }
    if ground_path_exists(net) {
        println!("ground path: yes");
    } else {
        println!("ground path: no; SLG faults disabled");
    }
    Ok(ok)
}

fn cmd_fault_study(path: &Path, bus: &str, zf: f64, kind: Option<FaultKind>) -> Result<()> {
    let net = load_network(path)?;
    if net.bus(bus).is_none() {
        return Err(input(format!("unknown bus '{bus}'")));
    }
    let faults: Vec<FaultSpec> = valid_fault_types(&net, bus)
        .into_iter()
        .filter(|t| kind.is_none_or(|k| t.kind() == k))
        .map(|fault_type| FaultSpec {
            fault_type,
            location: FaultLocation::Bus { bus: bus.to_string() },
            impedance_ohm: zf,
            onset_step: 1,
        })
        .collect();
    if faults.is_empty() {
        return Err(input(format!("no valid fault type at bus '{bus}'")));
    }
    let rows = fault_study(&net, &ScenarioSample::nominal(&net), &faults, &FaultOptions::default()).map_err(runtime)?;
    write_fault_study_csv(&net, &rows, io::stdout().lock()).map_err(runtime)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(a) => cmd_run(a)?,
        Command::Underreach(a) => cmd_underreach(a)?,
        Command::Dataset(a) => cmd_dataset(a)?,
        Command::Serve(a) => cmd_serve(a)?,
        Command::Validate { network } => return cmd_validate(&network),
        Command::Dot { network } => {
            let net = load_network(&network)?;
            let topo = build_topology(&net).map_err(input)?;
            print!("{}", topology_to_dot(&topo, &DotStyle { title: Some(net.name.clone()), ..Default::default() }));
        }
        Command::Canonical { network } => print!("{}", to_canonical(&load_network(&network)?)),
        Command::Powerflow { network } => {
            let net = load_network(&network)?;
            let sol = solve_powerflow(&net, &ScenarioSample::nominal(&net), &PowerFlowOptions::default()).map_err(runtime)?;
            write_solution_csv(&net, &sol, io::stdout().lock()).map_err(runtime)?;
        }
        Command::FaultStudy { network, bus, zf, kind } => cmd_fault_study(&network, &bus, zf, kind)?,
        Command::GenProfiles { hours, seed, start, out } => {
            let start = chrono::NaiveDateTime::parse_from_str(&start, "%Y-%m-%dT%H:%M:%S").map_err(|e| input(format!("--start: {e}")))?;
            generate_profiles(hours, seed, start).write_csv(create(&out)?).map_err(runtime)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
