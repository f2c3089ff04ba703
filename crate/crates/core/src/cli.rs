//! Command-line front end.
//!
//! Every command reads JSON configs, writes CSV tables and JSON reports into
//! `--out`, and drops a `manifest.json` with the tool version and a SHA-256
//! of the resolved configuration.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{response_metrics, AnalysisOptions, Band, ResponseMetrics};
use crate::control::{
    eigen_modes, log_gain_grid, root_locus, FeedbackLoop, LocusAnnotations, LoopConfig,
};
use crate::dynamics::{validate_structure, PlantConfig, STATE_NAMES};
use crate::presets;
use crate::simulator::{simulate, Scenario, SimulationResult};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "dualspin", version, about = "Dual-spin satellite attitude model, loop design and simulation")]
pub struct Cli {
    /// JSON config for the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Built-in plant, loop or scenario name.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Scenario family reproducing the given figure number.
    #[arg(long = "paper-figure", global = true)]
    pub paper_figure: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print plant matrices, structural diagnostics and eigenmodes.
    Model(ModelArgs),
    /// Sweep a loop gain and write the locus CSV with annotations.
    Rootlocus(LocusArgs),
    /// Run scenarios and write result CSVs.
    Simulate(SimulateArgs),
    /// Compute response metrics from result CSVs.
    Analyze(AnalyzeArgs),
    /// Write the orbit schedule CSV.
    Schedule(ScheduleArgs),
    /// Built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum PresetsAction {
    List,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct LocusArgs {
    /// Smallest |K| of the log grid (default: |K_design| / 1000).
    #[arg(long)]
    pub k_min: Option<f64>,
    /// Largest |K| of the log grid (default: 10 |K_design|).
    #[arg(long)]
    pub k_max: Option<f64>,
    #[arg(long, default_value_t = 400)]
    pub per_decade: usize,
    /// Explicit comma-separated gain list; overrides the log grid.
    #[arg(long, allow_hyphen_values = true, value_name = "K1,K2,...")]
    pub gains: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Run only member `n` of a scenario family.
    #[arg(long)]
    pub member: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Result CSV files produced by `simulate`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Columns to analyse (default: every `*_deg` column).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long, default_value_t = presets::ORBIT_PERIOD)]
    pub duration: f64,
    #[arg(long, default_value_t = 10.0)]
    pub dt: f64,
}

/// Root-locus config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusConfig {
    pub plant: PlantConfig,
    #[serde(rename = "loop")]
    pub feedback: LoopConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<f64>>,
}

/// Analysis config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    #[serde(default)]
    pub options: AnalysisOptions,
    /// Per-column overrides of `options`.
    #[serde(default)]
    pub per_column: BTreeMap<String, AnalysisOptions>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub inputs: Vec<String>,
    pub out_dir: String,
    pub config_sha256: String,
    pub outputs: Vec<String>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Six significant digits, trailing zeros dropped.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{v:.5e}");
        let (mant, exp) = s.split_once('e').expect("exponent");
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{exp}")
    }
}

struct Context<'a> {
    cli: &'a Cli,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl<'a> Context<'a> {
    fn new(cli: &'a Cli) -> Self {
        let inputs = cli.config.iter().map(|p| p.display().to_string()).collect();
        Self {
            cli,
            inputs,
            outputs: Vec::new(),
        }
    }

    fn out_dir(&self) -> PathBuf {
        self.cli.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn create(&mut self, name: &str) -> Result<fs::File> {
        let dir = self.out_dir();
        fs::create_dir_all(&dir)?;
        self.outputs.push(name.to_string());
        Ok(fs::File::create(dir.join(name))?)
    }

    fn write_manifest<T: Serialize>(&mut self, command: &str, config: &T) -> Result<()> {
        let manifest = RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs.clone(),
            out_dir: self.out_dir().display().to_string(),
            config_sha256: sha256_hex(serde_json::to_string(config)?.as_bytes()),
            outputs: self.outputs.clone(),
        };
        let mut f = self.create("manifest.json")?;
        serde_json::to_writer_pretty(&mut f, &manifest)?;
        writeln!(f)?;
        Ok(())
    }
}

/// Run a parsed command line, writing human-readable output to `stdout`.
pub fn run<W: Write>(cli: &Cli, stdout: &mut W) -> Result<()> {
    match &cli.command {
        Command::Model(args) => cmd_model(cli, args, stdout),
        Command::Rootlocus(args) => cmd_rootlocus(cli, args, stdout),
        Command::Simulate(args) => cmd_simulate(cli, args, stdout),
        Command::Analyze(args) => cmd_analyze(cli, args, stdout),
        Command::Schedule(args) => cmd_schedule(cli, args, stdout),
        Command::Presets {
            action: PresetsAction::List,
        } => cmd_presets_list(stdout),
    }
}

fn plant_source(cli: &Cli) -> Result<PlantConfig> {
    match (&cli.config, &cli.preset) {
        (Some(path), None) => read_json(path),
        (None, Some(name)) => presets::plant_config(name),
        _ => Err(Error::Input("model needs exactly one of --config or --preset".into())),
    }
}

#[derive(Serialize)]
struct ModelReport {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    diagnostics: Vec<String>,
    modes: Vec<ModeRow>,
}

#[derive(Serialize)]
struct ModeRow {
    re: f64,
    im: f64,
    natural_frequency: f64,
    damping_ratio: f64,
}

fn cmd_model<W: Write>(cli: &Cli, args: &ModelArgs, out: &mut W) -> Result<()> {
    let config = plant_source(cli)?;
    let plant = config.resolve()?;
    let diagnostics: Vec<String> = validate_structure(&plant).iter().map(ToString::to_string).collect();
    let a_dyn = nalgebra::DMatrix::from_iterator(6, 6, plant.a.iter().copied());
    let modes = eigen_modes(&a_dyn)?;
    let report = ModelReport {
        a: plant.a_rows(),
        b: plant.b_rows(),
        diagnostics,
        modes: modes
            .iter()
            .map(|m| ModeRow {
                re: m.eigenvalue.re,
                im: m.eigenvalue.im,
                natural_frequency: m.natural_frequency,
                damping_ratio: m.damping_ratio,
            })
            .collect(),
    };
    match args.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &report)?;
            writeln!(out)?;
        }
        Format::Text => {
            let table = |out: &mut W, title: &str, rows: &[Vec<f64>]| -> Result<()> {
                writeln!(out, "{title} =")?;
                for row in rows {
                    let cells: Vec<String> = row.iter().map(|v| format!("{:>12}", format_sig6(*v))).collect();
                    writeln!(out, "  [{}]", cells.join(" "))?;
                }
                Ok(())
            };
            table(out, "A", &report.a)?;
            table(out, "B", &report.b)?;
            writeln!(out, "states: {}", STATE_NAMES.join(", "))?;
            if report.diagnostics.is_empty() {
                writeln!(out, "structure: ok")?;
            } else {
                writeln!(out, "structure:")?;
                for d in &report.diagnostics {
                    writeln!(out, "  {d}")?;
                }
            }
            writeln!(out, "modes:")?;
            writeln!(out, "  {:>14} {:>14} {:>12} {:>12}", "re", "im", "wn", "zeta")?;
            for m in &report.modes {
                writeln!(
                    out,
                    "  {:>14} {:>14} {:>12} {:>12}",
                    format_sig6(m.re),
                    format_sig6(m.im),
                    format_sig6(m.natural_frequency),
                    format_sig6(m.damping_ratio)
                )?;
            }
        }
    }
    Ok(())
}

/// Plant a loop preset was designed on.
fn design_plant_for(loop_name: &str) -> Result<PlantConfig> {
    match loop_name {
        presets::LONGITUDINAL => presets::plant_config(presets::LONGITUDINAL),
        presets::LATERAL | presets::DIRECTIONAL => presets::plant_config(presets::LATERAL),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Default sweep: log grid around the design gain, the design gain itself
/// included exactly.
pub fn default_gain_grid(design: &FeedbackLoop, k_min: Option<f64>, k_max: Option<f64>, per_decade: usize) -> Vec<f64> {
    let k = design.compensator.gain();
    let mag = if k == 0.0 { 1.0 } else { k.abs() };
    let sign = if k < 0.0 { -1.0 } else { 1.0 };
    let mut grid = log_gain_grid(sign, k_min.unwrap_or(mag * 1e-3), k_max.unwrap_or(mag * 10.0), per_decade, true);
    if k != 0.0 && !grid.contains(&k) {
        grid.push(k);
    }
    grid.sort_by(|a, b| (a.abs()).total_cmp(&b.abs()));
    grid.dedup();
    grid
}

/// Comma-separated gains; an empty string is an empty list.
pub fn parse_gain_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| Error::Input(format!("--gains: `{s}`: {e}"))))
        .collect()
}

fn cmd_rootlocus<W: Write>(cli: &Cli, args: &LocusArgs, out: &mut W) -> Result<()> {
    let config = match (&cli.config, &cli.preset) {
        (Some(path), None) => read_json::<LocusConfig>(path)?,
        (None, Some(name)) => LocusConfig {
            plant: design_plant_for(name)?,
            feedback: LoopConfig::Preset { preset: name.clone() },
            gains: None,
        },
        _ => return Err(Error::Input("rootlocus needs exactly one of --config or --preset".into())),
    };
    let plant = config.plant.resolve()?;
    let design = config.feedback.resolve()?;
    let from_flag = args.gains.as_deref().map(parse_gain_list).transpose()?;
    let gains = match (from_flag, &config.gains) {
        (Some(g), _) => g,
        (None, Some(g)) => g.clone(),
        (None, None) => default_gain_grid(&design, args.k_min, args.k_max, args.per_decade),
    };
    let mut ctx = Context::new(cli);
    let mut resolved = config.clone();
    resolved.gains = Some(gains.clone());
    let locus = root_locus(&plant, &design, &gains)?;
    {
        let mut f = ctx.create("locus.csv")?;
        locus.write_csv(&mut f)?;
    }
    let annotations = LocusAnnotations {
        critical_gains: locus.find_critical_gains()?,
        breakaway: locus.find_breakaway()?,
    };
    {
        let mut f = ctx.create("locus_annotations.json")?;
        serde_json::to_writer_pretty(&mut f, &annotations)?;
        writeln!(f)?;
    }
    ctx.write_manifest("rootlocus", &resolved)?;
    writeln!(
        out,
        "{} gains, {} branches, {} critical gains, {} coalescence points",
        gains.len(),
        locus.branch_count(),
        annotations.critical_gains.len(),
        annotations.breakaway.len()
    )?;
    Ok(())
}

/// File-system friendly scenario name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn scenarios_for(cli: &Cli, member: Option<usize>) -> Result<Vec<Scenario>> {
    let all = match (&cli.config, &cli.preset, cli.paper_figure) {
        (Some(path), None, None) => vec![read_json::<Scenario>(path)?],
        (None, Some(name), None) => presets::scenario_preset(name)?.members,
        (None, None, Some(n)) => presets::figure(n)?.members,
        _ => {
            return Err(Error::Input(
                "simulate needs exactly one of --config, --preset or --paper-figure".into(),
            ))
        }
    };
    match member {
        None => Ok(all),
        Some(i) => {
            let count = all.len();
            all.into_iter()
                .nth(i)
                .map(|s| vec![s])
                .ok_or_else(|| Error::Input(format!("member {i} out of range (0..{count})")))
        }
    }
}

fn cmd_simulate<W: Write>(cli: &Cli, args: &SimulateArgs, out: &mut W) -> Result<()> {
    let scenarios = scenarios_for(cli, args.member)?;
    let mut ctx = Context::new(cli);
    let mut failure = None;
    for sc in &scenarios {
        let stem = file_stem(&sc.name);
        let (result, err) = match simulate(sc) {
            Ok(r) => (r, None),
            Err(Error::Divergence { t, partial }) => {
                let dim = partial.dim;
                (
                    *partial,
                    Some(Error::Divergence {
                        t,
                        partial: Box::new(SimulationResult::empty(dim)),
                    }),
                )
            }
            Err(e) => return Err(e),
        };
        let mut f = ctx.create(&format!("{stem}.csv"))?;
        result.write_csv(&mut f)?;
        f.flush()?;
        writeln!(out, "{}: {} samples -> {stem}.csv", sc.name, result.len())?;
        if let Some(e) = err {
            failure = Some(e);
            break;
        }
    }
    ctx.write_manifest("simulate", &scenarios)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Column-oriented view of a result CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl ResultTable {
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header: Vec<String> = match lines.next() {
            Some(line) => line?.split(',').map(|s| s.trim().to_string()).collect(),
            None => return Err(Error::Input("empty CSV".into())),
        };
        if header.first().map(String::as_str) != Some("t") {
            return Err(Error::Input("first column must be `t`".into()));
        }
        let mut columns = vec![Vec::new(); header.len()];
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.len() {
                return Err(Error::Input(format!(
                    "row {} has {} fields, header has {}",
                    n + 2,
                    cells.len(),
                    header.len()
                )));
            }
            for (j, cell) in cells.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    Error::Input(format!("row {}, column `{}`: not a number: {cell}", n + 2, header[j]))
                })?;
                columns[j].push(v);
            }
        }
        Ok(Self { header, columns })
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|j| self.columns[j].as_slice())
            .ok_or_else(|| Error::Input(format!("column `{name}` not found")))
    }
}

/// Metrics for the selected columns of one result table.
pub fn analyze_table(table: &ResultTable, config: &AnalyzeConfig) -> Result<BTreeMap<String, ResponseMetrics>> {
    let names: Vec<String> = match &config.columns {
        Some(c) => c.clone(),
        None => table.header.iter().filter(|h| h.ends_with("_deg")).cloned().collect(),
    };
    let t = table.column("t")?;
    let mut out = BTreeMap::new();
    for name in names {
        let y = table.column(&name)?;
        let opts = config.per_column.get(&name).unwrap_or(&config.options);
        out.insert(name.clone(), response_metrics(t, y, opts)?);
    }
    Ok(out)
}

fn cmd_analyze<W: Write>(cli: &Cli, args: &AnalyzeArgs, out: &mut W) -> Result<()> {
    let mut config: AnalyzeConfig = match &cli.config {
        Some(path) => read_json(path)?,
        None => AnalyzeConfig::default(),
    };
    if let Some(cols) = &args.columns {
        config.columns = Some(cols.clone());
    }
    let (Band::FractionOfPeak(f) | Band::Absolute(f)) = config.options.band;
    if !(f > 0.0) {
        return Err(Error::InvalidParameter {
            name: "band",
            reason: format!("must be positive, got {f}"),
        });
    }
    let mut ctx = Context::new(cli);
    ctx.inputs.extend(args.inputs.iter().map(|p| p.display().to_string()));
    let mut hashes = Vec::new();
    for path in &args.inputs {
        let bytes = fs::read(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        hashes.push(sha256_hex(&bytes));
        let table = ResultTable::read(BufReader::new(bytes.as_slice()))
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        let metrics = analyze_table(&table, &config)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("result");
        let mut f = ctx.create(&format!("{stem}.metrics.json"))?;
        serde_json::to_writer_pretty(&mut f, &metrics)?;
        writeln!(f)?;
        writeln!(out, "{}:", path.display())?;
        for (name, m) in &metrics {
            writeln!(
                out,
                "  {name}: peak {} settle {} budget {}",
                format_sig6(m.peak_deg),
                m.settling_time_s.map_or("never".to_string(), format_sig6),
                if m.budget.pass { "pass" } else { "fail" }
            )?;
        }
    }
    ctx.write_manifest("analyze", &(&config, &hashes))?;
    Ok(())
}

fn cmd_schedule<W: Write>(cli: &Cli, args: &ScheduleArgs, out: &mut W) -> Result<()> {
    let orbit: crate::orbit::OrbitConfig = match &cli.config {
        Some(path) => read_json(path)?,
        None => crate::orbit::OrbitConfig::with_period(presets::ORBIT_PERIOD, 0.2, 30.0),
    };
    let elements = orbit.elements()?;
    let mut ctx = Context::new(cli);
    {
        let mut f = ctx.create("schedule.csv")?;
        crate::orbit::write_schedule_csv(&mut f, &elements, args.duration, args.dt)?;
    }
    ctx.write_manifest("schedule", &(&orbit, args.duration, args.dt))?;
    writeln!(out, "schedule.csv written")?;
    Ok(())
}

fn cmd_presets_list<W: Write>(out: &mut W) -> Result<()> {
    writeln!(out, "plants:")?;
    for name in presets::PLANT_PRESETS {
        writeln!(out, "  {name}")?;
    }
    writeln!(out, "loops:")?;
    for name in presets::LOOP_PRESETS {
        let fl = presets::loop_preset(name)?;
        writeln!(out, "  {name}: {} <- {}", fl.sensed.name(), fl.compensator)?;
    }
    writeln!(out, "scenarios:")?;
    for p in presets::preset_scenarios() {
        writeln!(out, "  {p}")?;
    }
    Ok(())
}
