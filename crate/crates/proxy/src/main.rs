use std::io::Write;
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use greenproxy_core::cache::StatsSnapshot;
use greenproxy_core::carbon::{
    ingest_route_file, offset_requirement, route_carbon, EmissionLedger, RegionIntensityTable,
    TrafficSnapshot,
};
use greenproxy_core::cost::{instance_cost, rec_cost, sla_min_instances, total_cost};
use greenproxy_core::missrate::{fit_miss_rate, FitVariant, MissRateModel};
use greenproxy_core::units::EnergyAmount;
use greenproxy_core::optimizer::{solve_optimal_instances, OptimizerResult};
use greenproxy_core::workload::{
    miss_rate_curve, observations_from_curve, write_observations_csv, SimReport,
};
use serde::Serialize;

use greenproxy::config::{AppConfig, CacheSettings, ConfigError, ProxyConfig};
use greenproxy::mock::{spawn_mock, MockConfig};
use greenproxy::session::spawn_proxy;

#[derive(Parser)]
#[command(
    name = "greenproxy",
    version,
    about = "Caching IMAP proxy with cost and offset planning tools"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Pick the cheapest fleet size that still meets the service target.
    Optimize(OptimizeArgs),
    /// Replay a synthetic mail workload against cache tiers of several sizes.
    Simulate(SimulateArgs),
    /// Price the certificates owed for measured or assumed traffic.
    Estimate(EstimateArgs),
    /// Run the caching proxy in front of an IMAP upstream.
    Proxy(ProxyArgs),
    /// Summarize the snapshot files a proxy run wrote.
    Report(ReportArgs),
    /// Serve a small fixture IMAP backend, for demos and tests.
    MockUpstream(MockArgs),
}

#[derive(Args)]
struct OptimizeArgs {
    /// Deployment config (JSON); supplies the pricing parameters.
    #[arg(long)]
    config: PathBuf,
    /// CSV of measured (instances, miss_rate) points to fit a model to.
    #[arg(long, conflicts_with_all = ["model", "instances"])]
    observations: Option<PathBuf>,
    /// Miss-rate model as JSON, e.g. {"exponential":{"m0":0.9,"k":0.35}}.
    #[arg(long, conflicts_with = "instances")]
    model: Option<PathBuf>,
    /// Evaluate the cost at a fixed fleet size instead of optimizing.
    #[arg(long, requires = "fixed_miss_rate")]
    instances: Option<u32>,
    /// Miss rate to assume in --instances mode.
    #[arg(long, requires = "instances")]
    fixed_miss_rate: Option<f64>,
    /// Model family fitted to --observations.
    #[arg(long, value_enum, default_value_t = VariantArg::Exponential)]
    variant: VariantArg,
    /// Write the result as JSON here, in addition to the stdout summary.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Exponential,
    PowerLaw,
    Empirical,
}

impl From<VariantArg> for FitVariant {
    fn from(v: VariantArg) -> FitVariant {
        match v {
            VariantArg::Exponential => FitVariant::Exponential,
            VariantArg::PowerLaw => FitVariant::PowerLaw,
            VariantArg::Empirical => FitVariant::Empirical,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Deployment config (JSON); its workload section seeds the trace.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Total cache capacities to sweep. Decimal suffixes KB/MB/GB.
    #[arg(long, value_delimiter = ',', value_parser = parse_size,
          default_value = "4MB,8MB,16MB")]
    capacities: Vec<u64>,
    /// Per-shard capacity; every swept capacity must be a multiple.
    /// Defaults to the smallest capacity.
    #[arg(long, value_parser = parse_size)]
    shard_bytes: Option<u64>,
    /// Override the workload seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Write per-capacity reports as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write (instances, miss_rate) observations as CSV here.
    #[arg(long)]
    observations_out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Deployment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Traffic snapshot JSON written by a proxy run.
    #[arg(long, conflicts_with = "assumptions")]
    ledger: Option<PathBuf>,
    /// No measurements: assume every request misses (uncached baseline).
    #[arg(long)]
    assumptions: bool,
    /// Fleet size whose green surplus offsets the bill.
    #[arg(long, default_value_t = 1)]
    instances: u32,
    /// Override the config's ignore_link_energy switch.
    #[arg(long)]
    ignore_link_energy: Option<bool>,
    /// Traceroute CSV (hop_index,ip,region) to attribute link carbon.
    #[arg(long, requires = "regions")]
    route: Option<PathBuf>,
    /// Region carbon-intensity table (JSON, kg per MWh).
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Energy carried along the route, kWh. Defaults to the ledger's
    /// link energy.
    #[arg(long)]
    route_energy_kwh: Option<f64>,
    /// Write the result as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProxyArgs {
    /// Deployment config (JSON) with a `proxy` section.
    #[arg(long)]
    config: PathBuf,
    /// Override the listen address from the config.
    #[arg(long)]
    listen: Option<String>,
    /// Override the upstream address from the config.
    #[arg(long)]
    upstream: Option<String>,
    /// Stop after this many seconds (default: run until killed).
    #[arg(long)]
    duration_secs: Option<u64>,
    /// Directory for ledger.json, stats.json and emission.json snapshots.
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
    /// Also write snapshots every this many seconds.
    #[arg(long)]
    interval_secs: Option<u64>,
    /// Fleet size used when pricing the emission snapshot.
    #[arg(long, default_value_t = 1)]
    instances: u32,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding the snapshot files a proxy run wrote.
    #[arg(long)]
    dir: PathBuf,
}

#[derive(Args)]
struct MockArgs {
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: String,
    /// Stop after this many seconds (default: run until killed).
    #[arg(long)]
    duration_secs: Option<u64>,
    /// Delay injected before each FETCH response.
    #[arg(long, default_value_t = 0)]
    latency_ms: u64,
    /// Fault injection: advertise full FETCH literals but send half.
    #[arg(long)]
    truncate_fetch: bool,
    /// Messages in alice's INBOX.
    #[arg(long, default_value_t = 20)]
    messages: u32,
}

fn parse_size(text: &str) -> Result<u64, String> {
    let trimmed = text.trim();
    let upper = trimmed.to_ascii_uppercase();
    let (digits, factor) = if let Some(d) = upper.strip_suffix("GB") {
        (d, 1_000_000_000u64)
    } else if let Some(d) = upper.strip_suffix("MB") {
        (d, 1_000_000)
    } else if let Some(d) = upper.strip_suffix("KB") {
        (d, 1_000)
    } else {
        (upper.as_str(), 1)
    };
    let value: u64 = digits
        .trim()
        .parse()
        .map_err(|_| format!("`{trimmed}` is not a byte size (try 4MB, 512KB, 4096)"))?;
    value
        .checked_mul(factor)
        .ok_or_else(|| format!("`{trimmed}` overflows a byte count"))
}

enum AppError {
    /// Bad input: config files, observation files, flag combinations.
    Config(String),
    /// The work itself failed: IO, sockets, solver errors.
    Runtime(String),
}

impl From<ConfigError> for AppError {
    fn from(err: ConfigError) -> Self {
        AppError::Config(err.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(err: std::io::Error) -> Self {
        AppError::Runtime(err.to_string())
    }
}

fn runtime(err: impl std::fmt::Display) -> AppError {
    AppError::Runtime(err.to_string())
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(()) => 0,
        Err(AppError::Config(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(AppError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            3
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        CliCommand::Optimize(args) => cmd_optimize(args),
        CliCommand::Simulate(args) => cmd_simulate(args),
        CliCommand::Estimate(args) => cmd_estimate(args),
        CliCommand::Proxy(args) => cmd_proxy(args),
        CliCommand::Report(args) => cmd_report(args),
        CliCommand::MockUpstream(args) => cmd_mock(args),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct CostBreakdown {
    rec_cost_usd: f64,
    instance_cost_usd: f64,
    total_cost_usd: f64,
}

fn breakdown(config: &AppConfig, instances: u32, miss_rate: f64) -> Result<CostBreakdown, AppError> {
    Ok(CostBreakdown {
        rec_cost_usd: rec_cost(&config.cost, instances, miss_rate).map_err(runtime)?.usd(),
        instance_cost_usd: instance_cost(&config.cost, instances).map_err(runtime)?.usd(),
        total_cost_usd: total_cost(&config.cost, instances, miss_rate).map_err(runtime)?.usd(),
    })
}

fn print_breakdown(costs: &CostBreakdown) {
    println!("rec_cost_usd: {:.2}", costs.rec_cost_usd);
    println!("instance_cost_usd: {:.2}", costs.instance_cost_usd);
    println!("total_cost_usd: {:.2}", costs.total_cost_usd);
}

#[derive(Serialize)]
struct EvalOutput {
    instances: u32,
    miss_rate: f64,
    #[serde(flatten)]
    costs: CostBreakdown,
}

#[derive(Serialize)]
struct OptimizeOutput {
    model: MissRateModel,
    sla_min_instances: u32,
    result: OptimizerResult,
    miss_rate_at_n_star: f64,
    #[serde(flatten)]
    costs: CostBreakdown,
}

fn read_observations(path: &Path) -> Result<Vec<(f64, f64)>, AppError> {
    let file = std::fs::File::open(path)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| AppError::Config(e.to_string()))?;
        if record.len() < 2 {
            return Err(AppError::Config(format!(
                "{}: each row needs instances and miss_rate",
                path.display()
            )));
        }
        let n: f64 = record[0]
            .trim()
            .parse()
            .map_err(|_| AppError::Config(format!("bad instance count `{}`", &record[0])))?;
        let miss: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| AppError::Config(format!("bad miss rate `{}`", &record[1])))?;
        points.push((n, miss));
    }
    Ok(points)
}

fn cmd_optimize(args: OptimizeArgs) -> Result<(), AppError> {
    let config = AppConfig::from_json_file(&args.config)?;

    if let (Some(instances), Some(miss_rate)) = (args.instances, args.fixed_miss_rate) {
        let costs = breakdown(&config, instances, miss_rate)?;
        println!("instances: {instances}");
        println!("miss_rate: {miss_rate}");
        print_breakdown(&costs);
        let output = EvalOutput { instances, miss_rate, costs };
        if let Some(out) = &args.out {
            write_json(out, &output)?;
        }
        return Ok(());
    }

    let model = if let Some(path) = &args.observations {
        let points = read_observations(path)?;
        fit_miss_rate(&points, args.variant.into())
            .map_err(|e| AppError::Config(format!("fit failed: {e}")))?
    } else if let Some(path) = &args.model {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| AppError::Config(format!("bad model: {e}")))?
    } else {
        return Err(AppError::Config(
            "pick one input: --observations, --model, or --instances with --fixed-miss-rate"
                .into(),
        ));
    };

    let sla_floor = sla_min_instances(&config.cost).map_err(runtime)?;
    let result = solve_optimal_instances(&config.cost, &model).map_err(runtime)?;
    let miss_at_star = model.evaluate(result.n_star as f64).map_err(runtime)?;
    let costs = breakdown(&config, result.n_star, miss_at_star)?;

    println!("model: {}", serde_json::to_string(&model).map_err(runtime)?);
    println!("sla_min_instances: {sla_floor}");
    println!(
        "n_star: {} ({})",
        result.n_star,
        match result.binding_constraint {
            greenproxy_core::optimizer::BindingConstraint::CostMinimum => "cost minimum",
            greenproxy_core::optimizer::BindingConstraint::SlaBound => "sla bound",
        }
    );
    if result.bracket_exhausted {
        println!("note: cost was still falling at the search ceiling");
    }
    println!("miss_rate_at_n_star: {miss_at_star:.6}");
    print_breakdown(&costs);

    let output = OptimizeOutput {
        model,
        sla_min_instances: sla_floor,
        result,
        miss_rate_at_n_star: miss_at_star,
        costs,
    };
    if let Some(out) = &args.out {
        write_json(out, &output)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateOutput {
    seed: u64,
    shard_bytes: u64,
    reports: Vec<SimReport>,
    observations: Vec<(f64, f64)>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), AppError> {
    let mut spec = match &args.config {
        Some(path) => AppConfig::from_json_file(path)?.workload,
        None => Default::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }

    let reports = miss_rate_curve(&spec, &args.capacities, args.shard_bytes)
        .map_err(|e| AppError::Config(e.to_string()))?;
    let observations = observations_from_curve(&reports);
    let shard_bytes =
        args.shard_bytes.unwrap_or_else(|| args.capacities.iter().copied().min().unwrap_or(0));

    println!("seed: {}", spec.seed);
    for report in &reports {
        println!(
            "capacity {} bytes ({} nodes): miss_rate {:.4}, steady_state {:.4}, \
             hits {}, misses {} ({} cold)",
            report.capacity_bytes,
            report.nodes,
            report.miss_rate,
            report.steady_state_miss_rate,
            report.hits,
            report.misses,
            report.cold_misses,
        );
    }

    if let Some(path) = &args.observations_out {
        let file = std::fs::File::create(path)?;
        write_observations_csv(file, &observations).map_err(runtime)?;
    }
    if let Some(path) = &args.out {
        write_json(
            path,
            &SimulateOutput { seed: spec.seed, shard_bytes, reports, observations },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RouteSummary {
    hops: usize,
    hops_with_known_region: usize,
    energy_kwh: f64,
    carbon_kg: f64,
}

#[derive(Serialize)]
struct EstimateOutput {
    traffic: TrafficSnapshot,
    ledger: EmissionLedger,
    route: Option<RouteSummary>,
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), AppError> {
    let config = AppConfig::from_json_file(&args.config)?;

    let traffic: TrafficSnapshot = if let Some(path) = &args.ledger {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| AppError::Config(format!("bad traffic snapshot: {e}")))?
    } else if args.assumptions {
        // Nothing measured yet: every request goes upstream.
        let requests = config.cost.total_requests().round().max(0.0) as u64;
        TrafficSnapshot { misses: requests, ..Default::default() }
    } else {
        return Err(AppError::Config("pass --ledger <file> or --assumptions".into()));
    };

    let ignore_link = args.ignore_link_energy.unwrap_or(config.ignore_link_energy);
    let ledger = offset_requirement(
        &traffic,
        &config.profile,
        &config.intensity,
        &config.cost,
        args.instances,
        ignore_link,
    )
    .map_err(runtime)?;

    println!("link_energy_kwh: {:.6}", ledger.link_energy_kwh);
    println!("server_energy_kwh: {:.6}", ledger.server_energy_kwh);
    println!("total_carbon_kg: {:.6}", ledger.total_carbon_kg);
    println!("rec_cost_usd: {:.2}", ledger.rec_cost_usd);

    let route = match &args.route {
        None => None,
        Some(route_path) => {
            let regions_path = args.regions.as_ref().expect("clap enforces --regions");
            let table = RegionIntensityTable::from_json_file(regions_path)
                .map_err(|e| AppError::Config(e.to_string()))?;
            let hops = ingest_route_file(route_path, &table)
                .map_err(|e| AppError::Config(e.to_string()))?;
            let energy_kwh = args.route_energy_kwh.unwrap_or(ledger.link_energy_kwh);
            let energy = EnergyAmount::from_kwh(energy_kwh).map_err(runtime)?;
            let carbon_kg = route_carbon(&hops, energy);
            println!(
                "route: {} hops ({} with known region), {:.6} kWh -> {:.3} kg",
                hops.len(),
                hops.iter().filter(|h| h.region_known).count(),
                energy_kwh,
                carbon_kg,
            );
            Some(RouteSummary {
                hops: hops.len(),
                hops_with_known_region: hops.iter().filter(|h| h.region_known).count(),
                energy_kwh,
                carbon_kg,
            })
        }
    };

    if let Some(out) = &args.out {
        write_json(out, &EstimateOutput { traffic, ledger, route })?;
    }
    Ok(())
}

fn effective_proxy_config(args: &ProxyArgs, config: &AppConfig) -> Result<ProxyConfig, AppError> {
    let mut proxy = match &config.proxy {
        Some(p) => p.clone(),
        None => {
            // Allow a pure-CLI setup when both endpoints are given.
            let upstream = args.upstream.clone().ok_or_else(|| {
                AppError::Config(
                    "config has no proxy section; pass --listen and --upstream".into(),
                )
            })?;
            ProxyConfig {
                listen_addr: "127.0.0.1:0".into(),
                upstream_addr: upstream,
                cache: CacheSettings {
                    nodes: vec![greenproxy_core::cache::NodeConfig {
                        node_id: "node0".into(),
                        capacity_bytes: 64_000_000,
                    }],
                    virtual_points: greenproxy_core::cache::DEFAULT_VIRTUAL_POINTS,
                    hash: Default::default(),
                },
            }
        }
    };
    if let Some(listen) = &args.listen {
        proxy.listen_addr = listen.clone();
    }
    if let Some(upstream) = &args.upstream {
        proxy.upstream_addr = upstream.clone();
    }
    Ok(proxy)
}

fn write_snapshots(
    dir: &Path,
    shared: &greenproxy::session::ProxyShared,
    config: &AppConfig,
    instances: u32,
) -> Result<(), AppError> {
    std::fs::create_dir_all(dir)?;
    let traffic = shared.ledger.snapshot();
    write_json(&dir.join("ledger.json"), &traffic)?;
    write_json(&dir.join("stats.json"), &shared.tier.stats())?;
    let emission = offset_requirement(
        &traffic,
        &config.profile,
        &config.intensity,
        &config.cost,
        instances,
        config.ignore_link_energy,
    )
    .map_err(runtime)?;
    write_json(&dir.join("emission.json"), &emission)?;
    Ok(())
}

fn cmd_proxy(args: ProxyArgs) -> Result<(), AppError> {
    let config = AppConfig::from_json_file(&args.config)?;
    let proxy_config = effective_proxy_config(&args, &config)?;

    // Fail fast on an unreachable upstream instead of greeting clients
    // with per-session BYEs.
    TcpStream::connect(&proxy_config.upstream_addr).map_err(|e| {
        AppError::Runtime(format!(
            "upstream {} is unreachable: {e}",
            proxy_config.upstream_addr
        ))
    })?;

    let handle = spawn_proxy(&proxy_config).map_err(runtime)?;
    println!(
        "proxy listening on {} -> upstream {}",
        handle.addr(),
        proxy_config.upstream_addr
    );
    std::io::stdout().flush()?;

    let started = Instant::now();
    let mut last_snapshot = Instant::now();
    loop {
        std::thread::sleep(Duration::from_millis(200));
        if let (Some(interval), Some(dir)) = (args.interval_secs, &args.snapshot_dir) {
            if last_snapshot.elapsed() >= Duration::from_secs(interval) {
                write_snapshots(dir, handle.shared(), &config, args.instances)?;
                last_snapshot = Instant::now();
            }
        }
        if let Some(limit) = args.duration_secs {
            if started.elapsed() >= Duration::from_secs(limit) {
                break;
            }
        }
    }

    if let Some(dir) = &args.snapshot_dir {
        write_snapshots(dir, handle.shared(), &config, args.instances)?;
    }
    let traffic = handle.shared().ledger.snapshot();
    let served = traffic.hits + traffic.misses;
    println!(
        "served {} cacheable fetches, hit share {:.1}%",
        served,
        if served == 0 { 0.0 } else { 100.0 * traffic.hits as f64 / served as f64 }
    );
    handle.shutdown();
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), AppError> {
    let read = |name: &str| -> Result<Option<String>, AppError> {
        let path = args.dir.join(name);
        match std::fs::read_to_string(&path) {
            Ok(text) => Ok(Some(text)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(AppError::Config(format!("cannot read {}: {e}", path.display()))),
        }
    };

    let Some(ledger_text) = read("ledger.json")? else {
        return Err(AppError::Config(format!(
            "{} has no ledger.json; was the proxy run with --snapshot-dir?",
            args.dir.display()
        )));
    };
    let traffic: TrafficSnapshot = serde_json::from_str(&ledger_text)
        .map_err(|e| AppError::Config(format!("bad ledger.json: {e}")))?;

    let served = traffic.hits + traffic.misses;
    let hit_share = if served == 0 { 0.0 } else { traffic.hits as f64 / served as f64 };
    println!("cacheable fetches: {served}");
    println!("cache hits: {} ({:.1}%)", traffic.hits, 100.0 * hit_share);
    println!("payload bytes to clients: {}", traffic.client_bytes());
    println!("  served from cache: {}", traffic.hit_bytes);
    println!("  fetched upstream:  {}", traffic.miss_bytes);
    println!(
        "upstream: {} commands, {} bytes sent, {} bytes received",
        traffic.requests_to_upstream, traffic.bytes_to_upstream, traffic.bytes_from_upstream
    );

    if let Some(stats_text) = read("stats.json")? {
        let stats: StatsSnapshot = serde_json::from_str(&stats_text)
            .map_err(|e| AppError::Config(format!("bad stats.json: {e}")))?;
        println!(
            "cache tier: {} hits / {} misses, {} evictions",
            stats.hits, stats.misses, stats.evictions
        );
    }
    if let Some(emission_text) = read("emission.json")? {
        let emission: EmissionLedger = serde_json::from_str(&emission_text)
            .map_err(|e| AppError::Config(format!("bad emission.json: {e}")))?;
        println!(
            "offset: {:.6} kWh server + {:.6} kWh link -> {:.6} kg, {:.2} USD in certificates",
            emission.server_energy_kwh,
            emission.link_energy_kwh,
            emission.total_carbon_kg,
            emission.rec_cost_usd
        );
    }
    Ok(())
}

fn cmd_mock(args: MockArgs) -> Result<(), AppError> {
    let mut config = MockConfig::fixture(args.messages);
    config.latency = Duration::from_millis(args.latency_ms);
    config.truncate_fetch_payload = args.truncate_fetch;
    let mock = spawn_mock(config, &args.listen).map_err(runtime)?;
    println!("mock upstream listening on {}", mock.addr());
    std::io::stdout().flush()?;

    match args.duration_secs {
        Some(limit) => std::thread::sleep(Duration::from_secs(limit)),
        None => loop {
            std::thread::sleep(Duration::from_secs(3600));
        },
    }
    mock.shutdown();
    Ok(())
}
