//! Command-line front end with the `dataset`, `search`, `repair`, `stats`
//! and `replay` subcommands.
//!
//! Exit codes are a stable contract: 0 success, 2 bad configuration or
//! usage, 3 infeasible request, 4 record not found. Any other I/O failure
//! exits with 1.
//!
//! Primary outputs are byte-identical for identical flags and seeds. The
//! only exception is the `created_unix` stamp in manifests, which honours
//! `SOURCE_DATE_EPOCH` when set.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{GroupSummary, StatsReport};
use crate::config::{Config, ConfigError, Profile};
use crate::perception::{generate_dataset, label_lines, ExternalPerception, Perception, SyntheticPerception};
use crate::repair::{assemble, params_hash, refit, replay, reexecute, ModelDocument, RepairError, ReplayConfig};
use crate::scene::SceneError;
use crate::search::{run_search, sha256_hex, Archive, ArchiveError, SearchError, SearchSetup, Strategy, TestRecord};
use crate::simulator::FailureSet;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NOT_FOUND: i32 = 4;

/// Environment variable holding the number of parallel search runs.
pub const WORKERS_ENV: &str = "ARMTEST_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::NotFound(_) => EXIT_NOT_FOUND,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Infeasible(e.to_string()),
        }
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::SamplingInfeasible { .. } => CliError::Infeasible(e.to_string()),
            _ => CliError::Usage(format!("archive does not match the configured workspace: {e}")),
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Debug, Parser)]
#[command(name = "armtest", version, about = "Search-based testing of a vision-guided pick-and-place arm")]
pub struct Cli {
    /// TOML run configuration; defaults to the built-in profile.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in profile used when no config file is given.
    #[arg(long, global = true, conflicts_with = "config")]
    pub profile: Option<Profile>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Generate labelled scenes with an 80/20 train/validation split.
    Dataset(DatasetArgs),
    /// Run GA or random search and write one archive per run.
    Search(SearchArgs),
    /// Refit the detector on failing scenes and replay them.
    Repair(RepairArgs),
    /// Tallies, sparseness and significance tests over archive groups.
    Stats(StatsArgs),
    /// Re-execute one archived test and print its controller trace.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long, default_value_t = 1200, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    /// Defaults to the configured dataset seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct PerceptionArgs {
    /// Synthetic detector parameters (model document) instead of the configured ones.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["external_cmd", "external_addr"])]
    pub model: Option<PathBuf>,
    /// External detector spoken to over standard I/O.
    #[arg(long, value_name = "CMD", conflicts_with = "external_addr")]
    pub external_cmd: Option<String>,
    /// External detector spoken to over TCP.
    #[arg(long, value_name = "HOST:PORT")]
    pub external_addr: Option<String>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub runs: u32,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub population: Option<usize>,
    /// Master seed; run seeds derive from it.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub perception: PerceptionArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RepairArgs {
    #[arg(long = "archive", required = true, num_args = 1..)]
    pub archives: Vec<PathBuf>,
    /// Operating model document.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// `NAME=PATH[,PATH...]`, one archive per run; repeat for each group.
    #[arg(long = "group", required = true)]
    pub groups: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write tallies.csv, comparisons.csv and stats.json here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long)]
    pub id: String,
    /// Episode seed; defaults to the archived one.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub perception: PerceptionArgs,
    /// Write the re-executed record as JSON.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

/// Sidecar of a search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub profile: Profile,
    pub strategy: Strategy,
    pub run_id: u32,
    pub master_seed: u64,
    pub run_seed: u64,
    pub config: Config,
    /// `synthetic`, `external-cmd: ...` or `external-addr: ...`.
    pub perception: String,
    /// Hash of the synthetic parameters; absent for external detectors.
    pub perception_hash: Option<String>,
    pub archive_path: String,
    pub archive_sha256: String,
    pub records: usize,
    /// SHA-256 of the manifest with this field and `created_unix` blanked.
    pub manifest_hash: String,
    pub created_unix: u64,
}

impl RunManifest {
    pub fn compute_hash(&self) -> String {
        let mut m = self.clone();
        m.manifest_hash.clear();
        m.created_unix = 0;
        sha256_hex(serde_json::to_string(&m).expect("manifest serializes").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Sidecar of a `dataset`, `repair` or `stats` invocation. The JSON outputs
/// it lists carry its hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub command: String,
    pub profile: Profile,
    pub config: Config,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<String>,
    pub manifest_hash: String,
    pub created_unix: u64,
}

impl ReportManifest {
    fn new(command: &str, config: &Config, seed: Option<u64>, inputs: Vec<FileDigest>, outputs: &[&str]) -> Self {
        let mut m = Self {
            command: command.into(),
            profile: config.profile,
            config: config.clone(),
            seed,
            inputs,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            manifest_hash: String::new(),
            created_unix: 0,
        };
        m.manifest_hash = sha256_hex(serde_json::to_string(&m).expect("manifest serializes").as_bytes());
        m.created_unix = created_unix();
        m
    }
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    manifest_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

fn created_unix() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to standard error.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let config = match (&cli.config, cli.profile) {
        (Some(path), _) => Config::load(path)?,
        (None, p) => Config::for_profile(p.unwrap_or_default()),
    };
    match cli.command {
        Cmd::Dataset(a) => cmd_dataset(&config, &a, out),
        Cmd::Search(a) => cmd_search(config, &a, out),
        Cmd::Repair(a) => cmd_repair(&config, &a, out),
        Cmd::Stats(a) => cmd_stats(&config, &a, out),
        Cmd::Replay(a) => cmd_replay(&config, &a, out),
    }
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(io_err("writing to stdout"))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(io_err(format!("writing {}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn digest(path: &Path, bytes: &[u8]) -> FileDigest {
    FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(bytes),
    }
}

fn load_archive(path: &Path) -> Result<(Archive, FileDigest), CliError> {
    let bytes = read_input(path)?;
    let archive = Archive::read_jsonl(BufReader::new(bytes.as_slice())).map_err(|e| match e {
        ArchiveError::Io(e) => CliError::Usage(format!("cannot read {}: {e}", path.display())),
        e => CliError::Usage(format!("{}: {e}", path.display())),
    })?;
    Ok((archive, digest(path, &bytes)))
}

fn load_model(path: &Path) -> Result<ModelDocument, CliError> {
    let bytes = read_input(path)?;
    let doc: ModelDocument = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Usage(format!("malformed model document {}: {e}", path.display())))?;
    doc.params
        .check()
        .map_err(|e| CliError::Usage(format!("invalid model {}: {e}", path.display())))?;
    Ok(doc)
}

fn cmd_dataset(config: &Config, a: &DatasetArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = a.seed.unwrap_or(config.repair.dataset_seed);
    let dataset = generate_dataset(&config.dataset_ranges, &config.workspace, a.count as usize, seed)?;
    let (scenes, labels) = (a.out.join("scenes"), a.out.join("labels"));
    create_dir(&scenes)?;
    create_dir(&labels)?;
    for s in &dataset.samples {
        let stem = format!("{:06}", s.index);
        write_json(&scenes.join(format!("{stem}.json")), s)?;
        let body = label_lines(&s.annotations, &config.workspace.camera_fov);
        write_file(&labels.join(format!("{stem}.txt")), body.as_bytes())?;
    }
    let split = dataset.split();
    let listing = |idx: &[usize]| idx.iter().map(|i| format!("{i:06}\n")).collect::<String>();
    write_file(&a.out.join("train.txt"), listing(&split.train).as_bytes())?;
    write_file(&a.out.join("val.txt"), listing(&split.validation).as_bytes())?;
    let manifest = ReportManifest::new(
        "dataset",
        config,
        Some(seed),
        Vec::new(),
        &["scenes/", "labels/", "train.txt", "val.txt"],
    );
    write_json(&a.out.join("dataset.manifest.json"), &manifest)?;
    say(
        out,
        format_args!(
            "{} scenes: {} train / {} validation -> {}",
            dataset.samples.len(),
            split.train.len(),
            split.validation.len(),
            a.out.display()
        ),
    )
}

enum PerceptionSource {
    Synthetic(Box<ModelDocument>),
    Command(String),
    Address(String),
}

impl PerceptionSource {
    fn from_args(a: &PerceptionArgs, config: &Config) -> Result<Self, CliError> {
        Ok(match (&a.model, &a.external_cmd, &a.external_addr) {
            (Some(path), _, _) => PerceptionSource::Synthetic(Box::new(load_model(path)?)),
            (_, Some(cmd), _) => PerceptionSource::Command(cmd.clone()),
            (_, _, Some(addr)) => PerceptionSource::Address(addr.clone()),
            _ => PerceptionSource::Synthetic(Box::new(ModelDocument::operating(config.perception.clone()))),
        })
    }

    fn describe(&self) -> String {
        match self {
            PerceptionSource::Synthetic(_) => "synthetic".into(),
            PerceptionSource::Command(c) => format!("external-cmd: {c}"),
            PerceptionSource::Address(a) => format!("external-addr: {a}"),
        }
    }

    fn hash(&self) -> Option<String> {
        match self {
            PerceptionSource::Synthetic(doc) => Some(params_hash(&doc.params)),
            _ => None,
        }
    }

    fn open(&self) -> Result<Box<dyn Perception + Send>, CliError> {
        Ok(match self {
            PerceptionSource::Synthetic(doc) => Box::new(SyntheticPerception::new(doc.params.clone())),
            PerceptionSource::Command(cmd) => {
                let mut parts = cmd.split_whitespace();
                let program = parts
                    .next()
                    .ok_or_else(|| CliError::Usage("empty --external-cmd".into()))?;
                let mut command = Command::new(program);
                command.args(parts);
                Box::new(
                    ExternalPerception::spawn(command)
                        .map_err(|e| CliError::Usage(format!("cannot start {cmd:?}: {e}")))?,
                )
            }
            PerceptionSource::Address(addr) => Box::new(
                ExternalPerception::connect(addr.as_str())
                    .map_err(|e| CliError::Usage(format!("cannot connect to {addr}: {e}")))?,
            ),
        })
    }
}

fn workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1)
}

fn cmd_search(mut config: Config, a: &SearchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    config.search.strategy = a.strategy;
    if let Some(b) = a.budget {
        config.search.eval_budget = b;
    }
    if let Some(p) = a.population {
        config.search.population_size = p;
    }
    if let Some(s) = a.seed {
        config.search.seed = s;
    }
    config.check()?;
    let source = PerceptionSource::from_args(&a.perception, &config)?;
    let setup = SearchSetup {
        ranges: &config.ranges,
        workspace: &config.workspace,
        thresholds: &config.thresholds,
    };
    let n_runs = a.runs as usize;
    // External detectors are stateful peers, so their runs stay sequential.
    let n_workers = match source {
        PerceptionSource::Synthetic(_) => workers().min(n_runs),
        _ => 1,
    };
    let results: Mutex<Vec<Option<Result<Archive, CliError>>>> = Mutex::new((0..n_runs).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..n_workers {
            s.spawn(|| loop {
                let run = next.fetch_add(1, Ordering::Relaxed);
                if run >= n_runs {
                    break;
                }
                let r = source
                    .open()
                    .and_then(|mut p| Ok(run_search(&config.search, setup, &mut *p, run as u32)?));
                results.lock().expect("results lock")[run] = Some(r);
            });
        }
    });

    create_dir(&a.out)?;
    if let PerceptionSource::Synthetic(doc) = &source {
        if a.perception.model.is_none() {
            write_json(&a.out.join("model-operating.json"), doc)?;
        }
    }
    for (run, r) in results.into_inner().expect("results lock").into_iter().enumerate() {
        let archive = r.expect("every run finished")?;
        let stem = format!("{}-run{run}", a.strategy);
        let mut bytes = Vec::new();
        archive.write_jsonl(&mut bytes).expect("in-memory write");
        let archive_path = format!("{stem}.jsonl");
        write_file(&a.out.join(&archive_path), &bytes)?;
        let mut manifest = RunManifest {
            profile: config.profile,
            strategy: a.strategy,
            run_id: run as u32,
            master_seed: config.search.seed,
            run_seed: config.search.run_seed(run as u32),
            config: config.clone(),
            perception: source.describe(),
            perception_hash: source.hash(),
            archive_path: archive_path.clone(),
            archive_sha256: sha256_hex(&bytes),
            records: archive.len(),
            manifest_hash: String::new(),
            created_unix: 0,
        };
        manifest.manifest_hash = manifest.compute_hash();
        manifest.created_unix = created_unix();
        write_json(&a.out.join(format!("{stem}.manifest.json")), &manifest)?;
        say(
            out,
            format_args!(
                "{archive_path}: {} records, {} failed, {} near-failed",
                archive.len(),
                archive.failed().count(),
                archive.near_failed().count()
            ),
        )?;
    }
    Ok(())
}

fn cmd_repair(config: &Config, a: &RepairArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let m_o = load_model(&a.model)?;
    let mut archives = Vec::new();
    let mut inputs = vec![digest(&a.model, &read_input(&a.model)?)];
    for path in &a.archives {
        let (archive, d) = load_archive(path)?;
        archives.push(archive);
        inputs.push(d);
    }
    let merged = Archive::merge(&archives);
    let rc = &config.repair;
    let validation = generate_dataset(
        &config.dataset_ranges,
        &config.workspace,
        rc.validation_scenes * 5,
        rc.dataset_seed,
    )?
    .validation()
    .cloned()
    .collect();
    let dataset = match assemble(&merged, &config.workspace, validation) {
        Ok(d) => d,
        Err(RepairError::NothingToRepair) => {
            return say(out, format_args!("nothing to repair: no failed or near-failed records"));
        }
        Err(RepairError::Scene(e)) => return Err(e.into()),
        Err(e) => return Err(CliError::Infeasible(e.to_string())),
    };
    let outcome = refit(&m_o.params, &dataset, rc.learning_rate).map_err(|e| CliError::Infeasible(e.to_string()))?;
    let m_f = ModelDocument::repaired(&m_o, &outcome, dataset.record_ids());
    let report = replay(
        merged.failed(),
        &m_f.params,
        &config.workspace,
        &config.thresholds,
        &ReplayConfig {
            reruns: rc.reruns,
            fail_quorum: rc.rerun_fail_quorum,
            base_seed: rc.dataset_seed,
        },
    )?;

    create_dir(&a.out)?;
    let manifest = ReportManifest::new(
        "repair",
        config,
        None,
        inputs,
        &["model-repaired.json", "repair-report.json"],
    );
    write_json(&a.out.join("model-repaired.json"), &Stamped {
        manifest_hash: &manifest.manifest_hash,
        body: &m_f,
    })?;
    write_json(&a.out.join("repair-report.json"), &Stamped {
        manifest_hash: &manifest.manifest_hash,
        body: &report,
    })?;
    write_json(&a.out.join("repair.manifest.json"), &manifest)?;
    let v = &outcome.validation;
    say(
        out,
        format_args!(
            "trained on {} records ({} held out); validation error {:.4} -> {:.4}",
            dataset.train().count(),
            dataset.validation().count(),
            v.composite_before,
            v.composite_after
        ),
    )?;
    say(
        out,
        format_args!(
            "rot_err_slope {:.5} -> {:.5}, lum_err_gain {:.3e} -> {:.3e}, prox_err_gain {:.5} -> {:.5}",
            m_o.params.rot_err_slope,
            m_f.params.rot_err_slope,
            m_o.params.lum_err_gain,
            m_f.params.lum_err_gain,
            m_o.params.prox_err_gain,
            m_f.params.prox_err_gain
        ),
    )?;
    say(
        out,
        format_args!(
            "replayed {}: repaired {}, not repaired {} (soft {}/{}, hard {}/{})",
            report.n_replayed,
            report.n_repaired,
            report.n_non_repaired,
            report.soft.repaired,
            report.soft.replayed,
            report.hard.repaired,
            report.hard.replayed
        ),
    )
}

fn cmd_stats(config: &Config, a: &StatsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut groups = Vec::new();
    let mut inputs = Vec::new();
    for group in &a.groups {
        let (name, paths) = group
            .split_once('=')
            .filter(|(n, p)| !n.is_empty() && !p.is_empty())
            .ok_or_else(|| CliError::Usage(format!("expected NAME=PATH[,PATH...], got {group:?}")))?;
        let mut archives = Vec::new();
        for p in paths.split(',') {
            let (archive, d) = load_archive(Path::new(p))?;
            archives.push(archive);
            inputs.push(d);
        }
        groups.push(GroupSummary::build(name, &archives, &config.ranges, config.search.scaling));
    }
    let report = StatsReport::build(groups, a.iterations, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    match &a.out {
        None => {
            say(out, format_args!("{}", report.tally_csv()))?;
            if !report.comparisons.is_empty() {
                say(out, format_args!("{}", report.comparison_csv()))?;
            }
            Ok(())
        }
        Some(dir) => {
            create_dir(dir)?;
            let mut outputs = vec!["tallies.csv", "stats.json"];
            if !report.comparisons.is_empty() {
                outputs.push("comparisons.csv");
            }
            let manifest = ReportManifest::new("stats", config, Some(a.seed), inputs, &outputs);
            write_file(&dir.join("tallies.csv"), report.tally_csv().as_bytes())?;
            if !report.comparisons.is_empty() {
                write_file(&dir.join("comparisons.csv"), report.comparison_csv().as_bytes())?;
            }
            write_json(&dir.join("stats.json"), &Stamped {
                manifest_hash: &manifest.manifest_hash,
                body: &report,
            })?;
            write_json(&dir.join("stats.manifest.json"), &manifest)?;
            say(
                out,
                format_args!(
                    "{} groups, {} comparisons -> {}",
                    report.groups.len(),
                    report.comparisons.len(),
                    dir.display()
                ),
            )
        }
    }
}

fn modes(set: &FailureSet) -> String {
    if set.is_empty() {
        return "-".into();
    }
    set.iter().map(|m| format!("{m:?}")).collect::<Vec<_>>().join(",")
}

fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn cmd_replay(config: &Config, a: &ReplayArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (archive, _) = load_archive(&a.archive)?;
    let record = archive
        .get(&a.id)
        .ok_or_else(|| CliError::NotFound(format!("no record {:?} in {}", a.id, a.archive.display())))?;
    let seed = a.seed.unwrap_or(record.seed());
    let source = PerceptionSource::from_args(&a.perception, config)?;
    let episode = match &source {
        PerceptionSource::Synthetic(doc) => {
            reexecute(record, &doc.params, &config.workspace, &config.thresholds, seed)?
        }
        _ => {
            let scene = crate::scene::decode(&record.chromosome, &config.workspace)?;
            let mut p = source.open()?;
            crate::simulator::run_episode(&scene, &mut *p, &config.workspace, &config.thresholds, seed)
        }
    };
    say(
        out,
        format_args!(
            "record {} seed {seed:#018x}: archived {} [{}]",
            record.id,
            label(&record.outcome()),
            modes(record.failure_modes())
        ),
    )?;
    for c in &episode.cycles {
        say(out, format_args!("{c}"))?;
    }
    let same = episode.outcome == record.outcome() && episode.failure_modes == *record.failure_modes();
    say(
        out,
        format_args!(
            "outcome {}, kind {}, modes [{}]: {}",
            label(&episode.outcome),
            label(&episode.failure_kind),
            modes(&episode.failure_modes),
            if same { "matches archive" } else { "differs from archive" }
        ),
    )?;
    if let Some(path) = &a.json {
        let rec = TestRecord {
            episode,
            ..record.clone()
        };
        write_json(path, &rec)?;
    }
    Ok(())
}
