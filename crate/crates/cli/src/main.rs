//! congest-ftp: build and verify fault-tolerant distance preservers and
//! +2 additive spanners in a simulated CONGEST network.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use congest_ftp_cli::experiment::{
    run_experiment, spread_sources, write_csv, write_json_lines, ExperimentError, ExperimentSpec,
};
use congest_ftp_cli::ConfigFile;
use congest_ftp_core::centralized::{dual_ftmbfs_centralized, ftmbfs_centralized, CentralConfig};
use congest_ftp_core::dual::{build_dual_ftmbfs, DualConfig, DualError};
use congest_ftp_core::ftmbfs::{build_ftmbfs, BuildError, FtmbfsConfig};
use congest_ftp_core::gen;
use congest_ftp_core::graph::{read_edge_list, write_edge_list, EdgeId, Graph, VertexId};
use congest_ftp_core::oracle::{verify_additive, verify_preserver, VerificationReport};
use congest_ftp_core::preserver::PreserverSubgraph;
use congest_ftp_core::sim::{NetworkConfig, SimError, SimTrace};
use congest_ftp_core::spanner::{
    ft_additive_spanner_dual, ft_additive_spanner_single, SpannerConfig, SpannerError,
};

const EXIT_OK: u8 = 0;
const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;

#[derive(Parser)]
#[command(name = "congest-ftp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distributed single-failure FT-MBFS.
    Ftmbfs(BuildArgs),
    /// Distributed dual-failure FT-MBFS.
    DualFtmbfs(DualArgs),
    /// +2 additive spanner, single fault.
    Spanner1(SpannerArgs),
    /// +2 additive spanner, two faults.
    Spanner2(SpannerArgs),
    /// Centralized reference constructions.
    Centralized(CentralizedArgs),
    /// Verify a subgraph against the brute-force oracle.
    Verify(VerifyArgs),
    /// Run an experiment sweep from a JSON spec.
    Experiment(ExperimentArgs),
    /// Generate a graph and write it as an edge list.
    Generate(GenerateArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Input edge list ("u v" per line, '#' comments).
    #[arg(long)]
    graph: PathBuf,
    /// Comma-separated source list, e.g. "0,4,9".
    #[arg(long, value_delimiter = ',')]
    sources: Option<Vec<VertexId>>,
    /// Evenly spread this many sources instead of listing them.
    #[arg(long)]
    num_sources: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Phase length constant c_l (phase = c_l * ceil(log2 n) rounds).
    #[arg(long)]
    phase_constant: Option<u32>,
    /// Multiplier in every sampling probability (c * ln n / sigma).
    #[arg(long)]
    ln_const: Option<f64>,
    /// Verify the output against the exhaustive oracle.
    #[arg(long)]
    verify: bool,
    /// Write the canonical JSON report here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the output subgraph as an edge list.
    #[arg(long)]
    out_edges: Option<PathBuf>,
    /// Write the provenance sidecar (edge -> rule) as JSON.
    #[arg(long)]
    out_sidecar: Option<PathBuf>,
    /// key=value config file; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct BuildArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Clone)]
struct DualArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    sigma1_override: Option<usize>,
    #[arg(long)]
    sigma2_override: Option<usize>,
}

#[derive(Args, Clone)]
struct SpannerArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Replace the degree threshold so small dense graphs exercise the
    /// stretch logic.
    #[arg(long)]
    threshold_override: Option<f64>,
}

#[derive(Args, Clone)]
struct CentralizedArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of simultaneous faults the structure must survive.
    #[arg(long, default_value_t = 1)]
    faults: u8,
}

#[derive(Args, Clone)]
struct VerifyArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Candidate subgraph as an edge list.
    #[arg(long)]
    subgraph: PathBuf,
    #[arg(long, value_delimiter = ',')]
    sources: Option<Vec<VertexId>>,
    #[arg(long)]
    num_sources: Option<usize>,
    #[arg(long, default_value_t = 1)]
    faults: u8,
    /// Check the +beta additive guarantee over all pairs instead of exact
    /// source-wise preservation.
    #[arg(long)]
    additive: Option<usize>,
    /// Allow f=2 verification beyond the n <= 40 default cap.
    #[arg(long)]
    allow_large: bool,
    /// Violations shown in the human summary (the JSON always holds all).
    #[arg(long, default_value_t = 20)]
    truncate: usize,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// JSON experiment spec.
    #[arg(long)]
    spec: PathBuf,
    /// CSV output path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON-lines output path (canonical machine format).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct GenerateArgs {
    /// path | cycle | grid | erdos-renyi | lollipop | random-geometric
    #[arg(long)]
    family: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    detour_len: Option<usize>,
    #[arg(long)]
    drop: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Resample until connected (random families only).
    #[arg(long)]
    connected: bool,
    /// Keep only the largest component instead of resampling.
    #[arg(long)]
    largest_component: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    VerifyFailed,
    Timeout(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::VerifyFailed => EXIT_VERIFY_FAILED,
            CliError::Timeout(_) => EXIT_TIMEOUT,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::VerifyFailed => write!(f, "verification failed"),
            CliError::Timeout(m) => write!(f, "{m}"),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn from_build_err(e: BuildError) -> CliError {
    match e {
        BuildError::Sim(SimError::Timeout { .. }) => CliError::Timeout(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

fn from_dual_err(e: DualError) -> CliError {
    match e {
        DualError::Sim(SimError::Timeout { .. })
        | DualError::Build(BuildError::Sim(SimError::Timeout { .. })) => {
            CliError::Timeout(e.to_string())
        }
        other => CliError::Usage(other.to_string()),
    }
}

fn from_spanner_err(e: SpannerError) -> CliError {
    match e {
        SpannerError::Build(BuildError::Sim(SimError::Timeout { .. })) => {
            CliError::Timeout(e.to_string())
        }
        SpannerError::Dual(DualError::Sim(SimError::Timeout { .. })) => {
            CliError::Timeout(e.to_string())
        }
        other => CliError::Usage(other.to_string()),
    }
}

/// Flag > config file > default.
struct Settings {
    phase_constant: u32,
    ln_const: f64,
    seed: u64,
}

fn settings(common: &CommonArgs) -> Result<Settings, CliError> {
    let file = match &common.config {
        Some(p) => ConfigFile::load(p).map_err(usage)?,
        None => ConfigFile::default(),
    };
    Ok(Settings {
        phase_constant: common
            .phase_constant
            .or_else(|| file.get_u32("phase-constant"))
            .unwrap_or(4),
        ln_const: common.ln_const.or_else(|| file.get_f64("ln-const")).unwrap_or(10.0),
        seed: if common.seed != 1 { common.seed } else { file.get_u64("seed").unwrap_or(common.seed) },
    })
}

fn load_graph(path: &PathBuf) -> Result<(Graph, Vec<String>), CliError> {
    read_edge_list(path).map_err(usage)
}

fn pick_sources(
    g: &Graph,
    sources: &Option<Vec<VertexId>>,
    num: &Option<usize>,
) -> Result<Vec<VertexId>, CliError> {
    match (sources, num) {
        (Some(list), _) if !list.is_empty() => {
            for &s in list {
                if s >= g.n() {
                    return Err(usage(format!("source {s} out of range (n = {})", g.n())));
                }
            }
            Ok(list.clone())
        }
        (_, Some(k)) if *k > 0 => Ok(spread_sources(g.n(), *k)),
        _ => Err(usage("provide --sources or --num-sources")),
    }
}

#[derive(Serialize)]
struct TraceSummary {
    label: String,
    rounds: u64,
    messages: u64,
    units: u64,
    max_edge_phase_msgs: u64,
    slipped: u64,
}

impl From<&SimTrace> for TraceSummary {
    fn from(t: &SimTrace) -> Self {
        TraceSummary {
            label: t.label.clone(),
            rounds: t.rounds_used,
            messages: t.messages_sent,
            units: t.units_sent,
            max_edge_phase_msgs: t.max_edge_phase_msgs,
            slipped: t.slipped_messages,
        }
    }
}

#[derive(Serialize)]
struct BuildReport {
    command: String,
    n: usize,
    m: usize,
    sources: Vec<VertexId>,
    seed: u64,
    params: serde_json::Value,
    edges_out: usize,
    rounds_total: u64,
    stages: Vec<TraceSummary>,
    verify_pass: Option<bool>,
    verification: Option<VerificationReport>,
    wall_time_ms: f64,
}

fn emit_report(report: &BuildReport, json: &Option<PathBuf>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).map_err(usage)?;
    match json {
        Some(path) => {
            let mut f = File::create(path).map_err(usage)?;
            writeln!(f, "{text}").map_err(usage)?;
            println!(
                "{}: {} edges, {} rounds{}",
                report.command,
                report.edges_out,
                report.rounds_total,
                match report.verify_pass {
                    Some(true) => ", verification PASS".to_string(),
                    Some(false) => ", verification FAIL".to_string(),
                    None => String::new(),
                }
            );
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn write_subgraph(
    h: &PreserverSubgraph,
    labels: &[String],
    out_edges: &Option<PathBuf>,
    out_sidecar: &Option<PathBuf>,
) -> Result<(), CliError> {
    if let Some(path) = out_edges {
        let mut f = File::create(path).map_err(usage)?;
        h.write_edge_list(Some(labels), &mut f).map_err(usage)?;
    }
    if let Some(path) = out_sidecar {
        let f = File::create(path).map_err(usage)?;
        serde_json::to_writer_pretty(f, &h.sidecar(Some(labels))).map_err(usage)?;
    }
    Ok(())
}

fn finish_build(
    command: &str,
    g: &Graph,
    labels: &[String],
    sources: Vec<VertexId>,
    seed: u64,
    params: serde_json::Value,
    h: &PreserverSubgraph,
    rounds_total: u64,
    traces: &[SimTrace],
    f: u8,
    additive: Option<usize>,
    common: &CommonArgs,
    start: Instant,
) -> Result<(), CliError> {
    let (verify_pass, verification) = if common.verify {
        let edges: BTreeSet<EdgeId> = h.edges().collect();
        let rep = match additive {
            Some(beta) => verify_additive(g, &edges, f, beta).map_err(usage)?,
            None => verify_preserver(g, &edges, &sources, f).map_err(usage)?,
        };
        (Some(rep.pass), Some(rep))
    } else {
        (None, None)
    };
    let report = BuildReport {
        command: command.to_string(),
        n: g.n(),
        m: g.m(),
        sources,
        seed,
        params,
        edges_out: h.len(),
        rounds_total,
        stages: traces.iter().map(TraceSummary::from).collect(),
        verify_pass,
        verification,
        wall_time_ms: start.elapsed().as_secs_f64() * 1000.0,
    };
    write_subgraph(h, labels, &common.out_edges, &common.out_sidecar)?;
    emit_report(&report, &common.json)?;
    if report.verify_pass == Some(false) {
        return Err(CliError::VerifyFailed);
    }
    Ok(())
}

fn cmd_ftmbfs(args: &BuildArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let s = settings(&args.common)?;
    let (g, labels) = load_graph(&args.common.graph)?;
    let sources = pick_sources(&g, &args.common.sources, &args.common.num_sources)?;
    let cfg = FtmbfsConfig {
        ln_const: s.ln_const,
        network: NetworkConfig { phase_constant: s.phase_constant, ..NetworkConfig::default() },
    };
    let out = build_ftmbfs(&g, &sources, &cfg, s.seed).map_err(from_build_err)?;
    finish_build(
        "ftmbfs",
        &g,
        &labels,
        out.sources.clone(),
        s.seed,
        serde_json::to_value(out.params).map_err(usage)?,
        &out.preserver,
        out.rounds_total,
        &out.traces,
        1,
        None,
        &args.common,
        start,
    )
}

fn cmd_dual(args: &DualArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let s = settings(&args.common)?;
    let (g, labels) = load_graph(&args.common.graph)?;
    let sources = pick_sources(&g, &args.common.sources, &args.common.num_sources)?;
    let cfg = DualConfig {
        ln_const: s.ln_const,
        network: NetworkConfig { phase_constant: s.phase_constant, ..NetworkConfig::default() },
        sigma1_override: args.sigma1_override,
        sigma2_override: args.sigma2_override,
    };
    let out = build_dual_ftmbfs(&g, &sources, &cfg, s.seed).map_err(from_dual_err)?;
    finish_build(
        "dual-ftmbfs",
        &g,
        &labels,
        out.sources.clone(),
        s.seed,
        serde_json::to_value(out.params).map_err(usage)?,
        &out.preserver,
        out.rounds_total,
        &out.traces,
        2,
        None,
        &args.common,
        start,
    )
}

fn cmd_spanner(args: &SpannerArgs, dual: bool) -> Result<(), CliError> {
    let start = Instant::now();
    let s = settings(&args.common)?;
    let (g, labels) = load_graph(&args.common.graph)?;
    let cfg = SpannerConfig {
        ln_const: s.ln_const,
        network: NetworkConfig { phase_constant: s.phase_constant, ..NetworkConfig::default() },
        threshold_override: args.threshold_override,
    };
    let out = if dual {
        ft_additive_spanner_dual(&g, &cfg, s.seed).map_err(from_spanner_err)?
    } else {
        ft_additive_spanner_single(&g, &cfg, s.seed).map_err(from_spanner_err)?
    };
    let f = if dual { 2 } else { 1 };
    finish_build(
        if dual { "spanner2" } else { "spanner1" },
        &g,
        &labels,
        out.sources.clone(),
        s.seed,
        serde_json::to_value(&out.params).map_err(usage)?,
        &out.preserver,
        out.rounds_total,
        &out.traces,
        f,
        Some(2),
        &args.common,
        start,
    )
}

fn cmd_centralized(args: &CentralizedArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let s = settings(&args.common)?;
    let (g, labels) = load_graph(&args.common.graph)?;
    let sources = pick_sources(&g, &args.common.sources, &args.common.num_sources)?;
    let cfg = CentralConfig { ln_const: s.ln_const };
    let h = match args.faults {
        1 => ftmbfs_centralized(&g, &sources, s.seed, &cfg).map_err(usage)?,
        2 => dual_ftmbfs_centralized(&g, &sources, s.seed, &cfg).map_err(usage)?,
        other => return Err(usage(format!("--faults must be 1 or 2, got {other}"))),
    };
    finish_build(
        "centralized",
        &g,
        &labels,
        sources.clone(),
        s.seed,
        serde_json::json!({ "faults": args.faults, "ln_const": s.ln_const }),
        &h,
        0,
        &[],
        args.faults,
        None,
        &args.common,
        start,
    )
}

#[derive(Serialize)]
struct VerifyReportDoc {
    command: String,
    n: usize,
    m: usize,
    subgraph_edges: usize,
    sources: Vec<VertexId>,
    faults: u8,
    additive: Option<usize>,
    report: VerificationReport,
    wall_time_ms: f64,
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let (g, labels) = load_graph(&args.graph)?;
    if args.faults == 2 && g.n() > 40 && !args.allow_large {
        return Err(usage(format!(
            "f=2 verification is capped at n <= 40 by default (n = {}); pass --allow-large",
            g.n()
        )));
    }
    if args.faults > 2 {
        return Err(usage("--faults must be 1 or 2"));
    }
    // the subgraph file may touch fewer vertices, so its labels resolve
    // against the host graph's label table rather than a fresh ID space
    let sub_text = std::fs::read_to_string(&args.subgraph).map_err(usage)?;
    let sub_edges =
        congest_ftp_core::graph::parse_edge_list_in(&sub_text, &labels).map_err(usage)?;
    let mut edges: BTreeSet<EdgeId> = BTreeSet::new();
    for (u, v) in sub_edges {
        edges.insert(EdgeId::new(u, v));
    }
    let sources = match (&args.sources, &args.num_sources) {
        (Some(list), _) if !list.is_empty() => list.clone(),
        (_, Some(k)) if *k > 0 => spread_sources(g.n(), *k),
        _ if args.additive.is_some() => Vec::new(),
        _ => return Err(usage("provide --sources or --num-sources")),
    };
    let report = match args.additive {
        Some(beta) => verify_additive(&g, &edges, args.faults, beta).map_err(usage)?,
        None => verify_preserver(&g, &edges, &sources, args.faults).map_err(usage)?,
    };
    eprintln!("{}", report.summary(args.truncate));
    let doc = VerifyReportDoc {
        command: "verify".into(),
        n: g.n(),
        m: g.m(),
        subgraph_edges: edges.len(),
        sources,
        faults: args.faults,
        additive: args.additive,
        report,
        wall_time_ms: start.elapsed().as_secs_f64() * 1000.0,
    };
    let text = serde_json::to_string_pretty(&doc).map_err(usage)?;
    match &args.json {
        Some(path) => {
            let mut f = File::create(path).map_err(usage)?;
            writeln!(f, "{text}").map_err(usage)?;
        }
        None => println!("{text}"),
    }
    if !doc.report.pass {
        return Err(CliError::VerifyFailed);
    }
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.spec).map_err(usage)?;
    let spec: ExperimentSpec = serde_json::from_str(&text).map_err(usage)?;
    let records = run_experiment(&spec).map_err(|e| match e {
        ExperimentError::VerificationFailed { .. } => CliError::VerifyFailed,
        ExperimentError::Timeout { .. } => CliError::Timeout(e.to_string()),
        other => usage(other),
    })?;
    if let Some(path) = &args.csv {
        let mut f = File::create(path).map_err(usage)?;
        write_csv(&records, &mut f).map_err(usage)?;
    }
    match &args.json {
        Some(path) => {
            let mut f = File::create(path).map_err(usage)?;
            write_json_lines(&records, &mut f).map_err(usage)?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            write_json_lines(&records, &mut out).map_err(usage)?;
        }
    }
    if records.iter().any(|r| r.verify_pass == Some(false)) {
        return Err(CliError::VerifyFailed);
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let need_n = || args.n.ok_or_else(|| usage("--n required for this family"));
    let g = match args.family.as_str() {
        "path" => gen::path(need_n()?),
        "cycle" => gen::cycle(need_n()?),
        "grid" => {
            let rows = args.rows.ok_or_else(|| usage("--rows required for grid"))?;
            let cols = args.cols.ok_or_else(|| usage("--cols required for grid"))?;
            gen::grid(rows, cols)
        }
        "erdos-renyi" => {
            let n = need_n()?;
            let p = args.p.ok_or_else(|| usage("--p required for erdos-renyi"))?;
            if args.connected {
                gen::connected(|salt| gen::erdos_renyi(n, p, args.seed.wrapping_add(salt)), 200)
                    .map_err(usage)?
            } else {
                gen::erdos_renyi(n, p, args.seed)
            }
        }
        "random-geometric" => {
            let n = need_n()?;
            let r = args.r.ok_or_else(|| usage("--r required for random-geometric"))?;
            if args.connected {
                gen::connected(
                    |salt| gen::random_geometric(n, r, args.seed.wrapping_add(salt)),
                    200,
                )
                .map_err(usage)?
            } else {
                gen::random_geometric(n, r, args.seed)
            }
        }
        "lollipop" => {
            let detour = args.detour_len.ok_or_else(|| usage("--detour-len required"))?;
            let drop = args.drop.unwrap_or(1);
            gen::lollipop(detour, drop, args.seed).graph
        }
        other => return Err(usage(format!("unknown family {other:?}"))),
    };
    let g = if args.largest_component { gen::largest_component(&g) } else { g };
    match &args.out {
        Some(path) => {
            let mut f = File::create(path).map_err(usage)?;
            write_edge_list(&g, None, &mut f).map_err(usage)?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            write_edge_list(&g, None, &mut out).map_err(usage)?;
        }
    }
    eprintln!("n={} m={} connected={}", g.n(), g.m(), g.is_connected());
    Ok(())
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("CONGEST_FTP_THREADS") {
        if let Ok(t) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ftmbfs(args) => cmd_ftmbfs(args),
        Command::DualFtmbfs(args) => cmd_dual(args),
        Command::Spanner1(args) => cmd_spanner(args, false),
        Command::Spanner2(args) => cmd_spanner(args, true),
        Command::Centralized(args) => cmd_centralized(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Generate(args) => cmd_generate(args),
    };
    match result {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
