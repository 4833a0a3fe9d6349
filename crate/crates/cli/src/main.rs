mod commands;
mod config;
mod table;

use clap::{Args, Parser, Subcommand, ValueEnum};
use commands::{Axis, CliError, Context};
use config::{ConfigError, ScenarioConfig};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use table::ResultTable;

#[derive(Parser, Debug)]
#[command(name = "fiberqed", version, about = "Guided light scattering off atoms near an optical nanofiber")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Io {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave out the timestamp line so repeated runs are byte-identical.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AxisArg {
    #[value(name = "N")]
    N,
    #[value(name = "lambda")]
    Lambda,
    #[value(name = "delta")]
    Delta,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Guided-mode field profile across the radial grid.
    Mode(Io),
    /// Decay rates, light shifts and optical depths.
    Rates(Io),
    /// Single-atom reflection and transmission amplitudes.
    Single(Io),
    /// Array response along N, the lattice period or the detuning.
    Scan {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum, default_value = "N")]
        axis: AxisArg,
    },
    /// Band-gap summary and infinite-array sweep.
    Bandgap(Io),
    /// Built-in numerical checks.
    Selfcheck {
        /// Optional CSV summary of the checks.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn error_json(kind: &str, field: Option<&str>, message: &str) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert("error".into(), kind.into());
    if let Some(f) = field {
        obj.insert("field".into(), f.into());
    }
    obj.insert("message".into(), message.into());
    serde_json::Value::Object(obj).to_string()
}

fn report(e: &CliError) -> ExitCode {
    let line = match e {
        CliError::Config(c) => error_json("config", Some(&c.field), &c.message),
        CliError::Compute(c) => error_json("compute", None, &c.to_string()),
        CliError::Io(c) => error_json("io", None, &c.to_string()),
    };
    eprintln!("{line}");
    match e {
        CliError::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn load(path: &Path) -> Result<Context, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(ConfigError::new("--config", format!("{}: {e}", path.display()))))?;
    Context::new(ScenarioConfig::from_json(&text)?)
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(table: &ResultTable, io: &Io) -> Result<(), CliError> {
    let stamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let stamp = if io.no_timestamp { None } else { Some(stamp.as_str()) };
    table.write(sink(io.out.as_deref())?, stamp)?;
    if let Some(p) = &io.out {
        log::info!("wrote {} rows to {}", table.rows.len(), p.display());
    }
    Ok(())
}

fn run_table(io: &Io, f: impl FnOnce(&Context) -> Result<ResultTable, CliError>) -> Result<(), CliError> {
    let ctx = load(&io.config)?;
    let table = f(&ctx)?;
    emit(&table, io)
}

fn selfcheck(out: Option<&Path>) -> Result<bool, CliError> {
    let outcomes = commands::cmd_selfcheck()?;
    for o in &outcomes {
        println!("{o}");
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed} of {} checks passed", outcomes.len());
    if let Some(p) = out {
        let mut w = csv::Writer::from_writer(File::create(p)?);
        w.write_record(["id", "name", "passed", "elapsed_s", "detail"]).map_err(io::Error::from)?;
        for o in &outcomes {
            w.write_record([
                o.id.to_string(),
                o.name.to_string(),
                o.passed.to_string(),
                format!("{:.3}", o.elapsed.as_secs_f64()),
                o.detail.clone(),
            ])
            .map_err(io::Error::from)?;
        }
        w.flush()?;
    }
    Ok(passed == outcomes.len())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Mode(io) => run_table(io, commands::cmd_mode),
        Command::Rates(io) => run_table(io, commands::cmd_rates),
        Command::Single(io) => run_table(io, commands::cmd_single),
        Command::Bandgap(io) => run_table(io, commands::cmd_bandgap),
        Command::Scan { io, axis } => {
            let axis = match axis {
                AxisArg::N => Axis::N,
                AxisArg::Lambda => Axis::Lambda,
                AxisArg::Delta => Axis::Delta,
            };
            run_table(io, |ctx| commands::cmd_scan(ctx, axis))
        }
        Command::Selfcheck { out } => match selfcheck(out.as_deref()) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
