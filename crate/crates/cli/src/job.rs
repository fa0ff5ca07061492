//! Infill jobs from flags and an optional TOML job file. Flags win.
//!
//! Grammar shared by both sources:
//!
//! * roles: `m,b,h` or full names, in track order (`e` for empty),
//! * region: `TRACK:BARS`, where TRACK is a role, a 0-based track index or
//!   `all`, and BARS is a comma list of `N`, `barN` or `N-M` (1-based
//!   window bars); several regions may be joined with `;`,
//! * levels: `TRACK:D,P,O` for density, polyphony and occupation,
//! * tension: comma or whitespace separated levels per window bar, `_` to
//!   keep a bar, or `@path` to read them from a file.

use std::path::{Path, PathBuf};

use infillkit::wire::BarLevelMsg;
use infillkit::TrackRole;
use infillkit_service::messages::{CellRef, GeneratorKind, InfillRequestMsg, TrackLevelsMsg};
use serde::Deserialize;

use crate::error::{CliError, ExitCode};

#[derive(Debug, Clone, PartialEq)]
pub struct JobSpec {
    pub input: PathBuf,
    pub roles: Option<Vec<TrackRole>>,
    pub start_bar: usize,
    pub region: Vec<String>,
    pub levels: Vec<String>,
    pub tension: Option<String>,
    pub seed: u64,
    pub generator: GeneratorKind,
    pub endpoint: Option<String>,
    pub out: PathBuf,
    pub report: Option<PathBuf>,
    /// Directory `@file` tension paths are relative to.
    pub base_dir: PathBuf,
}

/// Flag values before merging; `None` and empty lists mean "not given".
#[derive(Debug, Clone, Default)]
pub struct JobFlags {
    pub input: Option<PathBuf>,
    pub roles: Option<String>,
    pub start_bar: Option<usize>,
    pub region: Vec<String>,
    pub levels: Vec<String>,
    pub tension: Option<String>,
    pub seed: Option<u64>,
    pub generator: Option<GeneratorKind>,
    pub endpoint: Option<String>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Item {
    Int(i64),
    Text(String),
}

impl Item {
    fn text(&self) -> String {
        match self {
            Item::Int(n) => n.to_string(),
            Item::Text(s) => s.clone(),
        }
    }
}

/// A string or a list of strings and numbers.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Field {
    Text(String),
    List(Vec<Item>),
}

impl Field {
    fn items(&self) -> Vec<String> {
        match self {
            Field::Text(s) => vec![s.clone()],
            Field::List(v) => v.iter().map(Item::text).collect(),
        }
    }

    fn joined(&self) -> String {
        self.items().join(",")
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobFile {
    input: Option<PathBuf>,
    roles: Option<Field>,
    start_bar: Option<usize>,
    region: Option<Field>,
    levels: Option<Field>,
    tension: Option<Field>,
    seed: Option<u64>,
    generator: Option<GeneratorKind>,
    endpoint: Option<String>,
    out: Option<PathBuf>,
    report: Option<PathBuf>,
}

impl JobSpec {
    /// Merge `flags` over the job file at `job`, if any. Paths from the file
    /// are relative to its directory.
    pub fn build(flags: JobFlags, job: Option<&Path>) -> Result<JobSpec, CliError> {
        let (file, dir) = match job {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let file: JobFile = toml::from_str(&text).map_err(|e| {
                    CliError::usage(format!("{}: {}", path.display(), e.message()))
                })?;
                let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (file, dir)
            }
            None => (JobFile::default(), PathBuf::new()),
        };
        let rel = |p: PathBuf| if p.is_absolute() { p } else { dir.join(p) };
        let input = flags
            .input
            .or_else(|| file.input.map(rel))
            .ok_or_else(|| CliError::usage("no input file (--input)"))?;
        let out = flags
            .out
            .or_else(|| file.out.map(rel))
            .ok_or_else(|| CliError::usage("no output file (--out)"))?;
        let roles = match flags.roles.or_else(|| file.roles.as_ref().map(Field::joined)) {
            Some(text) => Some(parse_roles(&text)?),
            None => None,
        };
        let (tension, base_dir) = match flags.tension {
            Some(t) => (Some(t), PathBuf::new()),
            None => (file.tension.as_ref().map(Field::joined), dir.clone()),
        };
        let pick = |flag: Vec<String>, from_file: Option<Field>| {
            if flag.is_empty() {
                from_file.map(|f| f.items()).unwrap_or_default()
            } else {
                flag
            }
        };
        Ok(JobSpec {
            input,
            roles,
            start_bar: flags.start_bar.or(file.start_bar).unwrap_or(1),
            region: pick(flags.region, file.region),
            levels: pick(flags.levels, file.levels),
            tension,
            seed: flags.seed.or(file.seed).unwrap_or(0),
            generator: flags.generator.or(file.generator).unwrap_or_default(),
            endpoint: flags.endpoint.or(file.endpoint),
            out,
            report: flags.report.or_else(|| file.report.map(rel)),
            base_dir,
        })
    }

    /// The equivalent protocol request for a window of `bars` bars over
    /// tracks with `roles`.
    pub fn request(&self, roles: &[TrackRole], bars: usize) -> Result<InfillRequestMsg, CliError> {
        let mut cells = Vec::new();
        for spec in split_specs(&self.region) {
            cells.extend(parse_region(&spec, roles)?);
        }
        if cells.is_empty() {
            return Err(CliError::request("no region given (--region)"));
        }
        let mut levels = Vec::new();
        for spec in split_specs(&self.levels) {
            levels.extend(parse_levels(&spec, roles)?);
        }
        let tension = match &self.tension {
            Some(t) => parse_tension(t, &self.base_dir, bars)?,
            None => Vec::new(),
        };
        Ok(InfillRequestMsg {
            cells,
            levels,
            tension,
            seed: self.seed,
            generator: self.generator,
        })
    }
}

fn split_specs(items: &[String]) -> Vec<String> {
    items
        .iter()
        .flat_map(|s| s.split(';'))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

pub fn parse_roles(text: &str) -> Result<Vec<TrackRole>, CliError> {
    text.split(',')
        .map(|r| r.parse::<TrackRole>().map_err(|e| CliError::new(ExitCode::Role, e)))
        .collect()
}

fn parse_tracks(text: &str, roles: &[TrackRole]) -> Result<Vec<usize>, CliError> {
    let text = text.trim();
    if text.eq_ignore_ascii_case("all") {
        return Ok((0..roles.len()).collect());
    }
    if let Ok(index) = text.parse::<usize>() {
        if index >= roles.len() {
            return Err(CliError::request(format!("track {index} does not exist ({} tracks)", roles.len())));
        }
        return Ok(vec![index]);
    }
    let role: TrackRole = text.parse().map_err(|e: String| CliError::new(ExitCode::Role, e))?;
    match roles.iter().position(|r| *r == role) {
        Some(i) => Ok(vec![i]),
        None => Err(CliError::new(ExitCode::Role, format!("no track has the role {role}"))),
    }
}

fn parse_bar(text: &str) -> Result<usize, CliError> {
    let t = text.trim();
    let digits = t.strip_prefix("bar").unwrap_or(t);
    match digits.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n - 1),
        _ => Err(CliError::request(format!("bad bar `{t}` (bars count from 1)"))),
    }
}

fn parse_bars(text: &str) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for part in text.split(',') {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (parse_bar(a)?, parse_bar(b)?);
                if a > b {
                    return Err(CliError::request(format!("empty bar range `{part}`")));
                }
                out.extend(a..=b);
            }
            None => out.push(parse_bar(part)?),
        }
    }
    Ok(out)
}

fn split_spec<'a>(spec: &'a str, what: &str) -> Result<(&'a str, &'a str), CliError> {
    spec.split_once(':')
        .ok_or_else(|| CliError::usage(format!("{what} `{spec}` is not TRACK:VALUE")))
}

pub fn parse_region(spec: &str, roles: &[TrackRole]) -> Result<Vec<CellRef>, CliError> {
    let (tracks, bars) = split_spec(spec, "region")?;
    let tracks = parse_tracks(tracks, roles)?;
    let bars = parse_bars(bars)?;
    Ok(tracks
        .iter()
        .flat_map(|&track| bars.iter().map(move |&bar| CellRef { track, bar }))
        .collect())
}

pub fn parse_levels(spec: &str, roles: &[TrackRole]) -> Result<Vec<TrackLevelsMsg>, CliError> {
    let (tracks, values) = split_spec(spec, "levels")?;
    let v: Vec<u8> = values
        .split(',')
        .map(|x| x.trim().parse::<u8>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::request(format!("levels `{values}` are not numbers")))?;
    let [density, polyphony, occupation] = v[..] else {
        return Err(CliError::request(format!(
            "levels `{values}` need density,polyphony,occupation"
        )));
    };
    Ok(parse_tracks(tracks, roles)?
        .into_iter()
        .map(|track| TrackLevelsMsg {
            track,
            density,
            polyphony,
            occupation,
        })
        .collect())
}

/// Levels per window bar from a list or `@file`. `#` starts a comment.
pub fn parse_tension(spec: &str, base: &Path, bars: usize) -> Result<Vec<BarLevelMsg>, CliError> {
    let spec = spec.trim();
    let text = match spec.strip_prefix('@') {
        Some(path) => {
            let path = base.join(path);
            std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?
        }
        None => spec.to_string(),
    };
    let entries: Vec<&str> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|s| !s.is_empty())
        .collect();
    if entries.len() > bars {
        return Err(CliError::request(format!(
            "{} tension levels for a {bars}-bar window",
            entries.len()
        )));
    }
    let mut out = Vec::new();
    for (bar, e) in entries.iter().enumerate() {
        if *e == "_" {
            continue;
        }
        let level = e
            .parse::<u8>()
            .map_err(|_| CliError::request(format!("bad tension level `{e}`")))?;
        out.push(BarLevelMsg { bar, level });
    }
    Ok(out)
}
