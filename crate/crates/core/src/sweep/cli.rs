//! `whichpath` command line.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime error,
//! 3 failed `oracle-check`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use super::config::{parse_config, Format, SweepSpec};
use super::presets::{preset, PRESETS};
use super::run::run_sweep;
use super::table::{write_table, Column, ResultTable, Row};
use crate::oracle::{self, GRID_REFINEMENTS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "whichpath", version, about = "Which-path information in a driven two-level emitter: parameter sweeps and checks")]
pub struct Cli {
    /// Worker threads; affects speed only.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format; defaults to the config, then the file extension, then csv.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Master seed for Monte Carlo columns.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Record the wall-clock time in the metadata (breaks byte-identical reruns).
    #[arg(long)]
    pub stamp: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the sweep described by a configuration file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a named figure preset.
    Preset {
        name: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare the collision model with the closed forms on the 5 x 5 grid.
    OracleCheck {
        /// Use steps 4e-3, 2e-3, 1e-3 instead of 1e-3, 5e-4, 2.5e-4.
        #[arg(long)]
        quick: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Parse a configuration and print it with defaults filled in.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    /// List presets, or print one preset's configuration.
    ListPresets {
        #[arg(long)]
        show: Option<String>,
    },
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

fn resolve_format(args: &OutputArgs, spec_format: Option<Format>, path: Option<&Path>) -> Format {
    args.format
        .or(spec_format)
        .or_else(|| match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("json") => Some(Format::Json),
            _ => None,
        })
        .unwrap_or_default()
}

fn stamp(table: &mut ResultTable) {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    table.metadata.push(("timestamp".into(), format!("unix:{secs}")));
}

fn emit(mut table: ResultTable, args: &OutputArgs, spec: Option<&SweepSpec>) -> i32 {
    if args.stamp {
        stamp(&mut table);
    }
    let path = args.out.clone().or_else(|| spec.and_then(|s| s.path.clone()));
    let format = resolve_format(args, spec.and_then(|s| s.format), path.as_deref());
    match write_table(&table, format, path.as_deref()) {
        Ok(()) => {
            if let Some(p) = &path {
                log::info!("wrote {} rows to {}", table.rows.len(), p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: cannot write output: {e}");
            EXIT_RUNTIME
        }
    }
}

fn run_spec(spec: SweepSpec, args: &OutputArgs) -> i32 {
    let spec = match args.seed {
        Some(seed) => spec.with_seed(seed),
        None => spec,
    };
    for w in &spec.warnings {
        log::debug!("config warning: {w}");
    }
    let table = run_sweep(&spec);
    let failed = table.rows.iter().filter(|r| r.status.starts_with("error")).count();
    if failed > 0 {
        log::warn!("{failed} of {} rows failed", table.rows.len());
    }
    emit(table, args, Some(&spec))
}

fn load_config(path: &Path) -> Result<SweepSpec, i32> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_CONFIG
    })?;
    parse_config(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_CONFIG
    })
}

/// Tolerances of the oracle comparison.
pub const ORACLE_ABS_TOL: f64 = 1e-2;
pub const ORACLE_EXTRAPOLATION_TOL: f64 = 1e-6;

fn oracle_check(quick: bool, args: &OutputArgs) -> i32 {
    let refinements: Vec<f64> = if quick {
        vec![4e-3, 2e-3, 1e-3]
    } else {
        GRID_REFINEMENTS.to_vec()
    };
    let results = match oracle::oracle_grid(&refinements) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let mut failures = 0;
    let mut rows = Vec::new();
    for c in &results {
        let extrapolation_tol = if quick { f64::INFINITY } else { ORACLE_EXTRAPOLATION_TOL };
        let pass = c.passes(ORACLE_ABS_TOL, extrapolation_tol);
        if !pass {
            failures += 1;
            eprintln!(
                "FAIL gamma_dt={} phi_r={:.6} {}: closed={:.10} oracle={:.10} extrapolated={:.10} order={:?}",
                c.gamma_dt,
                c.phi_r,
                c.observable.name(),
                c.closed_form,
                c.oracle,
                c.report.extrapolated,
                c.report.order
            );
        }
        rows.push(Row {
            values: vec![
                Some(c.gamma_dt),
                Some(c.phi_r),
                Some(c.closed_form),
                Some(c.oracle),
                Some(c.abs_error),
                Some(c.report.extrapolated),
                Some(c.extrapolation_error),
                c.report.order,
            ],
            status: format!("{}:{}", c.observable.name(), if pass { "pass" } else { "fail" }),
        });
    }
    eprintln!(
        "oracle-check: {} comparisons, {} failed (steps {:?})",
        results.len(),
        failures,
        refinements
    );
    if args.out.is_some() {
        let table = ResultTable {
            metadata: vec![
                ("tool".into(), "whichpath".into()),
                ("version".into(), env!("CARGO_PKG_VERSION").into()),
                ("check".into(), "oracle".into()),
            ],
            config: String::new(),
            columns: vec![
                Column::new("gamma_dt", "1", "input"),
                Column::new("phi_r", "rad", "input"),
                Column::new("closed_form", "1", "formula"),
                Column::new("oracle", "1", "oracle"),
                Column::new("abs_error", "1", "oracle"),
                Column::new("extrapolated", "1", "oracle"),
                Column::new("extrapolation_error", "1", "oracle"),
                Column::new("order", "1", "oracle"),
            ],
            rows,
        };
        let code = emit(table, args, None);
        if code != EXIT_OK {
            return code;
        }
    }
    if failures == 0 {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

fn list_presets(show: Option<&str>) -> i32 {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match show {
        Some(name) => match preset(name) {
            Some(p) => {
                let _ = out.write_all(p.config.as_bytes());
                EXIT_OK
            }
            None => {
                eprintln!("error: unknown preset `{name}`");
                EXIT_CONFIG
            }
        },
        None => {
            for p in PRESETS.iter() {
                let _ = writeln!(out, "{:<12} ~{:>3} s  {}", p.name, p.budget_s, p.summary);
            }
            EXIT_OK
        }
    }
}

fn dispatch(cli: Cli) -> i32 {
    match cli.command {
        Command::Sweep { config, output } => match load_config(&config) {
            Ok(spec) => run_spec(spec, &output),
            Err(code) => code,
        },
        Command::Preset { name, output } => match preset(&name) {
            Some(p) => run_spec(p.spec(), &output),
            None => {
                eprintln!("error: unknown preset `{name}` (see list-presets)");
                EXIT_CONFIG
            }
        },
        Command::OracleCheck { quick, output } => oracle_check(quick, &output),
        Command::ValidateConfig { config } => match load_config(&config) {
            Ok(spec) => {
                for w in &spec.warnings {
                    eprintln!("warning: {w}");
                }
                print!("{}", spec.resolved_toml());
                EXIT_OK
            }
            Err(code) => code,
        },
        Command::ListPresets { show } => list_presets(show.as_deref()),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    match cli.threads {
        Some(0) => {
            eprintln!("error: --threads must be >= 1");
            EXIT_CONFIG
        }
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli)),
            Err(e) => {
                eprintln!("error: cannot start worker pool: {e}");
                EXIT_RUNTIME
            }
        },
        None => dispatch(cli),
    }
}
