//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical or validation failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    evaluate, fit_collapse, fit_quantum_memory, sweep, SweepGrid, SweepRecord, DEFAULT_FIT_WINDOW,
};
use crate::classical::build_epsilon_machine;
use crate::error::Error;
use crate::model::{shift_transfer_matrix, CouplingSpec, MAX_RANGE};
use crate::oracle::{
    boltzmann_enumerate, compare_with_machine, Boundary, DEVIATION_FLOOR, MAX_CHAIN_LEN,
};
use crate::output::{self, Format, ValidationRow};
use crate::quantum::GramDump;

/// Environment variable read for the default worker count.
pub const THREADS_ENV: &str = "DYSON_MEMORY_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

const DEFAULT_FIT_TEMPS: &str = "50,60,80,100,150,200,300";

#[derive(Debug, Parser)]
#[command(name = "dyson-memory", version, about = "Classical vs quantum simulator memory of power-law Ising chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate c_mu, c_q and the advantage over a parameter grid.
    Sweep(SweepArgs),
    /// Fit a power law to the collapsed classical memory or to c_q.
    Fit(FitArgs),
    /// Compare the generator with exact enumeration of short rings.
    Validate(ValidateArgs),
    /// Print one generator (states, transitions, stationary distribution) as JSON.
    DumpMachine(PointArgs),
    /// Print the Gram matrix and its spectrum as JSON.
    DumpQmachine(PointArgs),
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Interaction ranges: list and/or inclusive ranges, e.g. `1..6` or `1,3,5`.
    #[arg(long = "N", default_value = "1..6")]
    ranges: String,
    /// Temperatures, e.g. `1..50`, `0.5,1,2` or `1..2:0.25`.
    #[arg(long = "T", default_value = "1..50")]
    temperatures: String,
    #[arg(long = "delta", default_value = "2")]
    deltas: String,
    #[arg(long = "B", default_value = "0")]
    fields: String,
    #[arg(long = "J0", default_value_t = 1.0)]
    j0: f64,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Output file; stdout when omitted.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    /// Worker threads (default: $DYSON_MEMORY_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// Largest accepted row-stochasticity residual.
    #[arg(long, default_value_t = 1e-10)]
    stoch_tol: f64,
    /// Largest accepted Gram PSD residual.
    #[arg(long, default_value_t = 1e-10)]
    psd_tol: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitQuantity {
    /// (N − c_mu) / (N − 1), pooled over N ≥ 2.
    Collapse,
    /// c_q, pooled over the given N.
    Cq,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long = "N", default_value = "2..6")]
    ranges: String,
    #[arg(long = "T", default_value = DEFAULT_FIT_TEMPS)]
    temperatures: String,
    #[arg(long = "delta", default_value = "2")]
    deltas: String,
    #[arg(long = "B", default_value = "0")]
    fields: String,
    #[arg(long = "J0", default_value_t = 1.0)]
    j0: f64,
    #[arg(long, value_enum, default_value_t = FitQuantity::Collapse)]
    quantity: FitQuantity,
    #[arg(long, default_value_t = DEFAULT_FIT_WINDOW.0)]
    window_min: f64,
    #[arg(long, default_value_t = DEFAULT_FIT_WINDOW.1)]
    window_max: f64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long = "N", default_value = "2")]
    ranges: String,
    #[arg(long = "T", default_value = "2")]
    temperatures: String,
    #[arg(long = "delta", default_value = "2")]
    deltas: String,
    #[arg(long = "B", default_value = "0")]
    fields: String,
    #[arg(long = "J0", default_value_t = 1.0)]
    j0: f64,
    /// Chain lengths to enumerate.
    #[arg(long = "L", default_value = "8,12,16")]
    lengths: String,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Ring)]
    boundary: BoundaryArg,
    /// Deviation allowed at the longest chain.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Ring,
    Open,
}

#[derive(Debug, Args)]
struct PointArgs {
    #[arg(long = "N")]
    range: usize,
    #[arg(long = "T")]
    temperature: f64,
    #[arg(long = "delta", default_value_t = 2.0)]
    delta: f64,
    #[arg(long = "B", default_value_t = 0.0)]
    field: f64,
    #[arg(long = "J0", default_value_t = 1.0)]
    j0: f64,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub grid: SweepGrid,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Sweep { stoch_tol: f64, psd_tol: f64 },
    Fit { quantity: FitQuantity, window: (f64, f64) },
    Validate { lengths: Vec<usize>, boundary: Boundary, tol: f64 },
    DumpMachine,
    DumpQmachine,
}

#[derive(Debug)]
pub enum CliError {
    /// Help or version output requested; not an error.
    Display(String),
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Display(s) | CliError::Usage(s) => f.write_str(s),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Display(_) => EXIT_OK,
            CliError::Usage(_) => EXIT_USAGE,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        let text = e.render().to_string();
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Display(text),
            _ => CliError::Usage(text),
        }
    })?;
    let env_threads = || -> Result<Option<usize>, CliError> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .map(Some)
                .map_err(|_| usage(format!("{THREADS_ENV}={v} is not a thread count"))),
            Err(_) => Ok(None),
        }
    };
    let threads = |flag: Option<usize>| -> Result<Option<usize>, CliError> {
        match flag {
            Some(0) => Err(usage("--threads: must be at least 1")),
            Some(n) => Ok(Some(n)),
            None => env_threads(),
        }
    };
    let format = |f: FormatArg| match f {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };

    let config = match cli.command {
        Command::Sweep(a) => {
            check_tol("--stoch-tol", a.stoch_tol)?;
            check_tol("--psd-tol", a.psd_tol)?;
            RunConfig {
                task: Task::Sweep {
                    stoch_tol: a.stoch_tol,
                    psd_tol: a.psd_tol,
                },
                grid: grid_from(&a.grid.ranges, &a.grid.temperatures, &a.grid.deltas, &a.grid.fields, a.grid.j0)?,
                format: format(a.out.format),
                output: a.out.output,
                threads: threads(a.out.threads)?,
            }
        }
        Command::Fit(a) => {
            if !(a.window_min > 0.0 && a.window_min <= a.window_max) {
                return Err(usage(format!(
                    "--window-min/--window-max: [{}, {}] is not a positive nonempty window",
                    a.window_min, a.window_max
                )));
            }
            let grid = grid_from(&a.ranges, &a.temperatures, &a.deltas, &a.fields, a.j0)?;
            if a.quantity == FitQuantity::Collapse && grid.ranges.contains(&1) {
                return Err(usage("--N: the collapse transform needs N >= 2"));
            }
            RunConfig {
                task: Task::Fit {
                    quantity: a.quantity,
                    window: (a.window_min, a.window_max),
                },
                grid,
                format: format(a.out.format),
                output: a.out.output,
                threads: threads(a.out.threads)?,
            }
        }
        Command::Validate(a) => {
            check_tol("--tol", a.tol)?;
            let lengths = parse_usize_list("--L", &a.lengths)?;
            if let Some(&l) = lengths.iter().find(|&&l| l == 0 || l > MAX_CHAIN_LEN) {
                return Err(usage(format!("--L: chain length {l} outside [1, {MAX_CHAIN_LEN}]")));
            }
            RunConfig {
                task: Task::Validate {
                    lengths,
                    boundary: match a.boundary {
                        BoundaryArg::Ring => Boundary::Ring,
                        BoundaryArg::Open => Boundary::Open,
                    },
                    tol: a.tol,
                },
                grid: grid_from(&a.ranges, &a.temperatures, &a.deltas, &a.fields, a.j0)?,
                format: format(a.out.format),
                output: a.out.output,
                threads: threads(a.out.threads)?,
            }
        }
        Command::DumpMachine(p) => point_config(p, Task::DumpMachine)?,
        Command::DumpQmachine(p) => point_config(p, Task::DumpQmachine)?,
    };
    Ok(config)
}

fn point_config(p: PointArgs, task: Task) -> Result<RunConfig, CliError> {
    let grid = SweepGrid {
        ranges: vec![p.range],
        temperatures: vec![p.temperature],
        deltas: vec![p.delta],
        fields: vec![p.field],
        j0: p.j0,
    };
    validate_grid(&grid)?;
    Ok(RunConfig {
        task,
        grid,
        format: Format::Json,
        output: p.output,
        threads: None,
    })
}

fn check_tol(flag: &str, tol: f64) -> Result<(), CliError> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(usage(format!("{flag}: tolerance {tol} must be positive and finite")))
    }
}

fn grid_from(ranges: &str, temps: &str, deltas: &str, fields: &str, j0: f64) -> Result<SweepGrid, CliError> {
    let grid = SweepGrid {
        ranges: parse_usize_list("--N", ranges)?,
        temperatures: parse_f64_list("--T", temps)?,
        deltas: parse_f64_list("--delta", deltas)?,
        fields: parse_f64_list("--B", fields)?,
        j0,
    };
    validate_grid(&grid)?;
    Ok(grid)
}

/// Flag-level checks with messages naming the offending flag, then the
/// full per-point validation.
fn validate_grid(grid: &SweepGrid) -> Result<(), CliError> {
    if let Some(&n) = grid.ranges.iter().find(|&&n| n == 0 || n > MAX_RANGE) {
        return Err(usage(format!("--N: interaction range {n} outside [1, {MAX_RANGE}]")));
    }
    if let Some(&d) = grid.deltas.iter().find(|&&d| !(d > 1.0)) {
        return Err(usage(format!(
            "--delta: {d} rejected; delta <= 1 is the nonextensive regime where the chain energy is not extensive (use delta > 1)"
        )));
    }
    if let Some(&t) = grid.temperatures.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(usage(format!("--T: temperature {t} out of range; T must be > 0 and finite")));
    }
    if !(grid.j0.is_finite() && grid.j0 >= 0.0) {
        return Err(usage(format!("--J0: {} must be finite and >= 0", grid.j0)));
    }
    if let Some(&b) = grid.fields.iter().find(|b| !b.is_finite()) {
        return Err(usage(format!("--B: {b} must be finite")));
    }
    grid.points().map(|_| ()).map_err(|e| usage(e.to_string()))
}

fn parse_usize_list(flag: &str, spec: &str) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || usage(format!("{flag}: cannot parse `{item}` (expected `a`, `a..b` or a comma list)"));
        if let Some((a, b)) = item.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(item.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(usage(format!("{flag}: empty list")));
    }
    Ok(out)
}

fn parse_f64_list(flag: &str, spec: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || {
            usage(format!(
                "{flag}: cannot parse `{item}` (expected `x`, `a..b`, `a..b:step` or a comma list)"
            ))
        };
        if let Some((a, rest)) = item.split_once("..") {
            let (b, step) = match rest.split_once(':') {
                Some((b, s)) => (b, s.trim().parse::<f64>().map_err(|_| bad())?),
                None => (rest, 1.0),
            };
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            if !(step > 0.0 && a <= b && a.is_finite() && b.is_finite()) {
                return Err(bad());
            }
            let count = ((b - a) / step + 1e-9).floor() as usize;
            out.extend((0..=count).map(|k| a + k as f64 * step));
        } else {
            out.push(item.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(usage(format!("{flag}: empty list")));
    }
    Ok(out)
}

/// Runs a configuration; returns the process exit code.
pub fn run(config: &RunConfig) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_FAILURE;
        }
    };
    match pool.install(|| execute(config)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Domain(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn execute(config: &RunConfig) -> crate::Result<i32> {
    let out = config.output.as_deref();
    match &config.task {
        Task::Sweep { stoch_tol, psd_tol } => {
            let records = sweep(&config.grid)?;
            write_records(&records, config.format, out)?;
            let bad = records.iter().filter(|r| {
                r.diagnostics.failure.is_some()
                    || r.diagnostics.stoch_residual > *stoch_tol
                    || r.diagnostics.psd_residual > *psd_tol
            });
            let count = bad.count();
            if count > 0 {
                eprintln!("{count} grid point(s) failed or exceeded tolerance");
                return Ok(EXIT_FAILURE);
            }
            Ok(EXIT_OK)
        }
        Task::Fit { quantity, window } => {
            let records = sweep(&config.grid)?;
            if let Some(r) = records.iter().find(|r| r.diagnostics.failure.is_some()) {
                return Err(Error::Numerical(format!(
                    "point N={} T={} failed: {}",
                    r.range,
                    r.temperature,
                    r.diagnostics.failure.as_deref().unwrap_or_default()
                )));
            }
            let fit = match quantity {
                FitQuantity::Collapse => fit_collapse(&records, *window)?,
                FitQuantity::Cq => fit_quantum_memory(&records, *window)?,
            };
            let text = match config.format {
                Format::Json => output::fit_to_json(&fit)?,
                Format::Csv => output::fit_to_csv(&fit),
            };
            output::emit(&text, out)?;
            Ok(EXIT_OK)
        }
        Task::Validate { lengths, boundary, tol } => {
            let (rows, ok) = validate(&config.grid, lengths, *boundary, *tol)?;
            let text = match config.format {
                Format::Json => output::validation_to_json(&rows)?,
                Format::Csv => output::validation_to_csv(&rows),
            };
            output::emit(&text, out)?;
            Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
        }
        Task::DumpMachine | Task::DumpQmachine => {
            let spec = single_point(&config.grid)?;
            let ev = evaluate(&spec)?;
            let text = if config.task == Task::DumpMachine {
                output::to_json(&ev.machine.describe())?
            } else {
                output::to_json(&GramDump::new(spec.range(), &ev.gram)?)?
            };
            output::emit(&text, out)?;
            Ok(EXIT_OK)
        }
    }
}

fn single_point(grid: &SweepGrid) -> crate::Result<CouplingSpec> {
    let pts = grid.points()?;
    match pts.as_slice() {
        [p] => Ok(*p),
        _ => Err(Error::Domain("dump commands take a single parameter point".into())),
    }
}

fn write_records(records: &[SweepRecord], format: Format, out: Option<&Path>) -> crate::Result<()> {
    let text = match format {
        Format::Csv => output::records_to_csv(records),
        Format::Json => output::records_to_json(records)?,
    };
    output::emit(&text, out)
}

/// Oracle comparison on every grid point and chain length. A point passes
/// when its deviation at the longest chain is within `tol` and the deviation
/// does not grow with chain length.
pub fn validate(
    grid: &SweepGrid,
    lengths: &[usize],
    boundary: Boundary,
    tol: f64,
) -> crate::Result<(Vec<ValidationRow>, bool)> {
    let mut lengths = lengths.to_vec();
    lengths.sort_unstable();
    lengths.dedup();
    let mut rows = Vec::new();
    let mut all_ok = true;
    for spec in grid.points()? {
        let machine = build_epsilon_machine(&shift_transfer_matrix(&spec)?)?;
        let mut comps = Vec::with_capacity(lengths.len());
        for &l in &lengths {
            let dist = boltzmann_enumerate(&spec, l, boundary)?;
            comps.push(compare_with_machine(&machine, &dist)?);
        }
        let trend_ok = comps
            .windows(2)
            .all(|w| w[1].max_deviation().max(DEVIATION_FLOOR) <= w[0].max_deviation().max(DEVIATION_FLOOR));
        let last_ok = comps.last().is_some_and(|c| c.max_deviation() <= tol);
        all_ok &= trend_ok && last_ok;
        for c in comps {
            rows.push(ValidationRow {
                range: spec.range(),
                delta: spec.delta(),
                field: spec.field(),
                temperature: spec.temperature(),
                within_tolerance: c.max_deviation() <= tol,
                comparison: c,
            });
        }
    }
    Ok((rows, all_ok))
}
