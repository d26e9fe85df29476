//! Command-line front end.
//!
//! Exit codes: 0 ok, 1 model validation failure, 2 bad input, 3 I/O
//! failure, 4 calibration found no passing tuple.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::calibrate::{calibrate, Grid};
use crate::engine::EngineConfig;
use crate::environment::{build_condition, ObservationMode, NUM_CONDITIONS};
use crate::error::Error;
use crate::model::{GenerativeModel, ModelFile};
use crate::scenario::{build_model, ScenarioParams};
use crate::sim::run_trial;
use crate::trace::{render_table, summarize, summary_csv, TraceFormat, TrialTrace};

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_BAD_INPUT: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_CALIBRATION: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "normact", version, about = "Active inference lane-yield simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run scripted conditions and write traces and summaries.
    Run(RunArgs),
    /// Grid-search the free scenario parameters against the behavior table.
    Calibrate(CalibrateArgs),
    /// Load a model JSON file and report every violation.
    Validate { file: PathBuf },
    /// Scenario utilities.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCommand {
    /// Print the built scenario model as JSON.
    Dump {
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatChoice {
    Json,
    Csv,
    Both,
}

impl FormatChoice {
    fn formats(self) -> Vec<TraceFormat> {
        match self {
            FormatChoice::Json => vec![TraceFormat::Json],
            FormatChoice::Csv => vec![TraceFormat::Csv],
            FormatChoice::Both => vec![TraceFormat::Json, TraceFormat::Csv],
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// `all` or a comma-separated list of ids in 1..=7.
    #[arg(long, default_value = "all")]
    pub conditions: String,
    /// Sample observations with this seed. Without it, observations are
    /// the most likely outcomes.
    #[arg(long, conflicts_with = "deterministic")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long, env = "NORMACT_OUT", default_value = "normact-out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatChoice,
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(long = "engine", value_name = "KEY=VALUE")]
    pub engine: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Replace one grid axis, e.g. `pref_honk_on=-4,-2`. An empty list
    /// empties the grid.
    #[arg(long = "grid", value_name = "KEY=V1,V2,...")]
    pub grid: Vec<String>,
    /// Fixed overrides for parameters outside the grid.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(long = "engine", value_name = "KEY=VALUE")]
    pub engine: Vec<String>,
    /// Directory for `sweep.csv` and `params.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => EXIT_IO,
            Error::Validation(_) => EXIT_VALIDATION,
            _ => EXIT_BAD_INPUT,
        };
        Failure::new(code, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn split_pair(raw: &str) -> CliResult<(&str, &str)> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Failure::new(EXIT_BAD_INPUT, format!("expected KEY=VALUE, got {raw:?}")))
}

fn scenario_params(overrides: &[String]) -> CliResult<ScenarioParams> {
    let mut params = ScenarioParams::default();
    for raw in overrides {
        let (k, v) = split_pair(raw)?;
        params.set(k, v)?;
    }
    params.validate()?;
    Ok(params)
}

fn engine_config(overrides: &[String]) -> CliResult<EngineConfig> {
    let mut config = EngineConfig::default();
    for raw in overrides {
        let (k, v) = split_pair(raw)?;
        config.set(k, v)?;
    }
    Ok(config)
}

pub fn parse_conditions(raw: &str) -> CliResult<Vec<u8>> {
    if raw.trim() == "all" {
        return Ok((1..=NUM_CONDITIONS).collect());
    }
    let mut ids = Vec::new();
    for part in raw.split(',') {
        let id: u8 = part
            .trim()
            .parse()
            .map_err(|_| Failure::new(EXIT_BAD_INPUT, format!("bad condition id {part:?}")))?;
        if !(1..=NUM_CONDITIONS).contains(&id) {
            return Err(Failure::new(
                EXIT_BAD_INPUT,
                format!("condition {id} does not exist (expected 1..={NUM_CONDITIONS})"),
            ));
        }
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    if ids.is_empty() {
        return Err(Failure::new(EXIT_BAD_INPUT, "no conditions requested"));
    }
    ids.sort_unstable();
    Ok(ids)
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

fn cmd_run(args: &RunArgs) -> CliResult<()> {
    let ids = parse_conditions(&args.conditions)?;
    let params = scenario_params(&args.params)?;
    let config = engine_config(&args.engine)?;
    let model = build_model(&params)?;
    let mode_for = |id: u8| match args.seed {
        Some(seed) if !args.deterministic => ObservationMode::Sampled { seed, stream: u64::from(id) },
        _ => ObservationMode::Deterministic,
    };

    let results: Vec<crate::Result<TrialTrace>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ids
            .iter()
            .map(|&id| {
                let (model, params, config) = (&model, &params, &config);
                scope.spawn(move || {
                    let script = build_condition(id)?;
                    run_trial(model, params, config, &script, mode_for(id))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("condition worker panicked"))
            .collect()
    });
    let traces = results.into_iter().collect::<crate::Result<Vec<_>>>()?;

    std::fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    for trace in &traces {
        for format in args.format.formats() {
            trace.write(&args.out, format).map_err(|e| io_failure(&args.out, e))?;
        }
    }
    let rows: Vec<_> = traces.iter().map(summarize).collect();
    let csv_path = args.out.join("summary.csv");
    std::fs::write(&csv_path, summary_csv(&rows)).map_err(|e| io_failure(&csv_path, e))?;
    let json_path = args.out.join("summary.json");
    let json = serde_json::to_string_pretty(&rows).map_err(|e| io_failure(&json_path, e))?;
    std::fs::write(&json_path, json + "\n").map_err(|e| io_failure(&json_path, e))?;

    print!("{}", render_table(&traces));
    println!("wrote {} trace(s) to {}", traces.len(), args.out.display());
    Ok(())
}

fn cmd_calibrate(args: &CalibrateArgs) -> CliResult<()> {
    let base = scenario_params(&args.params)?;
    let config = engine_config(&args.engine)?;
    let mut grid = Grid::default();
    for raw in &args.grid {
        let (key, list) = split_pair(raw)?;
        let values = list
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Failure::new(EXIT_BAD_INPUT, format!("grid {key}: cannot parse {v:?}")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        grid.restrict(key, &values)?;
    }
    let report = calibrate(&grid, &base, &config).map_err(|e| Failure::new(EXIT_CALIBRATION, e.to_string()))?;

    for o in &report.outcomes {
        let [pn, pe, ph, sw] = o.tuple;
        let verdict = if o.passed { "pass".to_string() } else { format!("fail ({})", o.failures.join(" ")) };
        println!("pn={pn:<4} pe={pe:<4} ph={ph:<4} sw={sw:<5} {verdict}");
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        let sweep = dir.join("sweep.csv");
        std::fs::write(&sweep, report.sweep_csv()).map_err(|e| io_failure(&sweep, e))?;
        if let Some(selected) = &report.selected {
            let path = dir.join("params.json");
            let json = serde_json::to_string_pretty(selected).map_err(|e| io_failure(&path, e))?;
            std::fs::write(&path, json + "\n").map_err(|e| io_failure(&path, e))?;
        }
    }
    match &report.selected {
        Some(p) => {
            println!(
                "selected: pref_target_normal={} pref_target_emergency={} pref_honk_on={} context_switch_prob={}",
                p.pref_target_normal, p.pref_target_emergency, p.pref_honk_on, p.context_switch_prob
            );
            Ok(())
        }
        None => Err(Failure::new(EXIT_CALIBRATION, "no tuple satisfies the behavior table")),
    }
}

fn cmd_validate(file: &Path) -> CliResult<()> {
    let parsed = ModelFile::load(file).map_err(|e| Failure::new(EXIT_BAD_INPUT, format!("{}: {e}", file.display())))?;
    let report = match parsed.into_parts() {
        Ok(parts) => parts.validate(),
        Err(report) => report,
    };
    if report.is_ok() {
        println!("{}: ok", file.display());
        Ok(())
    } else {
        Err(Failure::new(EXIT_VALIDATION, format!("{}:\n{report}", file.display())))
    }
}

fn cmd_dump(params: &[String], out: Option<&Path>) -> CliResult<()> {
    let params = scenario_params(params)?;
    let model: GenerativeModel = build_model(&params)?;
    let json = model.to_file().to_json()? + "\n";
    match out {
        Some(path) => std::fs::write(path, json).map_err(|e| io_failure(path, e)),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Validate { file } => cmd_validate(file),
        Command::Scenario {
            command: ScenarioCommand::Dump { params, out },
        } => cmd_dump(params, out.as_deref()),
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_BAD_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn condition_lists() {
        assert_eq!(parse_conditions("all").unwrap(), vec![1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(parse_conditions("3, 1,3").unwrap(), vec![1, 3]);
        assert_eq!(parse_conditions("9").unwrap_err().code, EXIT_BAD_INPUT);
        assert_eq!(parse_conditions("0").unwrap_err().code, EXIT_BAD_INPUT);
        assert!(parse_conditions("two").is_err());
    }

    #[test]
    fn overrides_are_validated() {
        assert!(scenario_params(&["pref_honk_on=0".into()]).is_ok());
        assert!(scenario_params(&["siren_reliability=1".into()]).is_err());
        assert!(scenario_params(&["pref_honk_on".into()]).is_err());
        assert!(engine_config(&["beta_prior=-1".into()]).is_err());
    }
}
