//! `infillkit`: analyze MIDI windows, run scripted infill jobs, serve the
//! session API.

mod error;
mod job;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use infillkit::analysis::MetaSummary;
use infillkit::infill::remote::RemoteGenerator;
use infillkit::report::{records, write_jsonl};
use infillkit::{
    analyze_window, assign_roles, infill, parse_midi, serialize_midi, slice_window,
    ControlLevels, GeneratorPort, RegionSpec, Score, TrackRole,
};
use infillkit_service::messages::{AnalysisMsg, BarOutcomeMsg, BarTensionMsg, GeneratorKind};
use infillkit_service::{HttpServer, HttpTransport, ServiceConfig, SessionService};
use serde::Serialize;

use error::{CliError, ExitCode};
use job::{JobFlags, JobSpec};

#[derive(Parser)]
#[command(name = "infillkit", version, about = "Controllable bar infilling for multi-track MIDI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a JSON-lines report of a window's metrics, key and tension.
    Analyze(AnalyzeArgs),
    /// Regenerate a region and write the merged file.
    Infill(InfillArgs),
    /// Run the session service over HTTP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Roles in track order, e.g. `m,b,h`.
    #[arg(long)]
    roles: Option<String>,
    /// First bar of the window, from 1.
    #[arg(long, default_value_t = 1)]
    start_bar: usize,
    /// Report path; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Baseline,
    Remote,
}

#[derive(Args)]
struct InfillArgs {
    /// TOML job file; flags override its fields.
    #[arg(long)]
    job: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    roles: Option<String>,
    #[arg(long)]
    start_bar: Option<usize>,
    /// `TRACK:BARS`, e.g. `melody:5`, `all:3`, `0:1-8`. Repeatable.
    #[arg(long)]
    region: Vec<String>,
    /// `TRACK:D,P,O`. Repeatable.
    #[arg(long)]
    levels: Vec<String>,
    /// Levels per window bar, `_` to keep, or `@file`.
    #[arg(long)]
    tension: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    generator: Option<Generator>,
    /// Base URL of a model server for `--generator remote`.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report of targets and achieved levels.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Service config; its generator and remote sections apply.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: String,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Infill(a) => cmd_infill(a),
        Command::Serve(a) => cmd_serve(a),
    };
    match outcome {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("infillkit: {e}");
            std::process::ExitCode::from(e.code as u8)
        }
    }
}

/// Read and label a file. Without roles every track is empty.
fn load(path: &Path, roles: Option<&[TrackRole]>) -> Result<Score, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let score = parse_midi(&bytes)?;
    let roles = match roles {
        Some(r) => r.to_vec(),
        None => vec![TrackRole::Empty; score.tracks.len()],
    };
    Ok(assign_roles(&score, &roles)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig, CliError> {
    Ok(match path {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    })
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let roles = a.roles.as_deref().map(job::parse_roles).transpose()?;
    let score = load(&a.input, roles.as_deref())?;
    let window = slice_window(&score, a.start_bar)?;
    let analysis = analyze_window(&window);
    let lines = records(&MetaSummary::of(&score)?, &score.roles(), &analysis);
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &lines).expect("writing to memory");
    match &a.report {
        Some(path) => write_file(path, &buf),
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| CliError::new(ExitCode::Io, format!("stdout: {e}"))),
    }
}

#[derive(Serialize)]
struct CellReport {
    track: usize,
    bar: usize,
    target: ControlLevels,
    achieved: ControlLevels,
    delta: ControlLevels,
}

#[derive(Serialize)]
struct InfillReport {
    input: String,
    origin_bar: usize,
    seed: u64,
    generator: GeneratorKind,
    key: String,
    cells: Vec<CellReport>,
    bars: Vec<BarOutcomeMsg>,
    analysis: AnalysisMsg,
}

fn cmd_infill(a: InfillArgs) -> Result<(), CliError> {
    let flags = JobFlags {
        input: a.input,
        roles: a.roles,
        start_bar: a.start_bar,
        region: a.region,
        levels: a.levels,
        tension: a.tension,
        seed: a.seed,
        generator: a.generator.map(|g| match g {
            Generator::Baseline => GeneratorKind::Baseline,
            Generator::Remote => GeneratorKind::Remote,
        }),
        endpoint: a.endpoint,
        out: a.out,
        report: a.report,
    };
    let spec = JobSpec::build(flags, a.job.as_deref())?;
    let config = load_config(a.config.as_deref())?;

    let score = load(&spec.input, spec.roles.as_deref())?;
    let window = slice_window(&score, spec.start_bar)?;
    let request = spec.request(&score.roles(), window.length)?;
    let region = RegionSpec::new(request.region_cells())?;
    let target = request
        .control_target(window.tracks.len(), window.length)
        .map_err(CliError::request)?;

    let baseline = config.generator.baseline();
    let remote;
    let generator: &dyn GeneratorPort = match spec.generator {
        GeneratorKind::Baseline => &baseline,
        GeneratorKind::Remote => {
            let endpoint = spec
                .endpoint
                .clone()
                .or_else(|| config.remote.as_ref().map(|r| r.endpoint.clone()))
                .ok_or_else(|| CliError::usage("--generator remote needs --endpoint"))?;
            let timeout = config.remote.as_ref().map_or(10_000, |r| r.timeout_ms);
            remote = RemoteGenerator::new(HttpTransport::new(&endpoint), Duration::from_millis(timeout));
            &remote
        }
    };
    let result = infill(&window, &region, &target, spec.seed, generator)?;
    let merged = score.merge_window(&result.window);
    write_file(&spec.out, &serialize_midi(&merged))?;

    if let Some(path) = &spec.report {
        let report = InfillReport {
            input: spec.input.display().to_string(),
            origin_bar: spec.start_bar,
            seed: spec.seed,
            generator: spec.generator,
            key: result.key.to_string(),
            cells: result
                .achieved
                .iter()
                .map(|(c, achieved)| CellReport {
                    track: c.track,
                    bar: c.bar,
                    target: result.targets.cells[c],
                    achieved: *achieved,
                    delta: result.deltas[c],
                })
                .collect(),
            bars: result
                .tension
                .iter()
                .map(|(b, t)| BarOutcomeMsg {
                    bar: *b,
                    target: result.targets.tension[b],
                    achieved: BarTensionMsg::new(*b, t),
                })
                .collect(),
            analysis: AnalysisMsg::new(MetaSummary::of(&merged)?, &result.window, &result.analysis),
        };
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(path, text.as_bytes())?;
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<(), CliError> {
    let config = load_config(a.config.as_deref())?;
    let service = Arc::new(SessionService::new(config));
    let server = HttpServer::start(&a.bind, service)
        .map_err(|e| CliError::new(ExitCode::Serve, e.to_string()))?;
    println!("listening on {}", server.url());
    let _ = std::io::stdout().flush();
    server.wait();
    Ok(())
}
