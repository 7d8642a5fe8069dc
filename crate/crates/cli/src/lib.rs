//! Argument parsing and dispatch for the `qw5` command.
//!
//! ```text
//! qw5 <evolve|spectrum|limit|timeavg|decay|verdict|search> [flags]
//! ```
//!
//! Output goes to `--out` or to stdout. Exit status is 0 on success, 2 for a
//! usage error, and 1 for a failed computation.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use qw5::io::{
    write_bands_csv_to, write_bands_json_to, write_decay_csv_to, write_decay_json_to,
    write_grid_csv_to, write_grid_json_to, write_heatmap_pgm_to, write_report_json_to,
    write_search_json_to,
};
use qw5::localization::{min_limit_mass_search_seeded, DEFAULT_SEED, SEARCH_RADIUS};
use qw5::{
    band_surface, decay_probe, evolve, initial_state, limiting_distribution, localization_decision,
    probability_grid, time_averaged_probability, ProbabilityGrid, QuadratureGrid, Spinor,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Default quadrature points per axis.
pub const DEFAULT_KGRID: usize = 256;

/// Default random samples for `search`.
pub const DEFAULT_SAMPLES: usize = 200;

/// Default probe times for `decay`.
pub const DEFAULT_TIMES: [usize; 4] = [0, 25, 100, 400];

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Probability grid after `--steps` steps of direct evolution.
    Evolve,
    /// Band table on a `--kgrid` × `--kgrid` momentum grid.
    Spectrum,
    /// Limiting distribution from the flat band.
    Limit,
    /// Average of the probability over the first `--steps` times.
    Timeavg,
    /// Magnitude of the dispersive bands at `--site` for each of `--times`.
    Decay,
    /// Localization report at the origin with horizon `--steps`.
    Verdict,
    /// Initial state of smallest limiting mass among random samples.
    Search,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Pgm,
}

#[derive(Parser, Debug)]
#[command(
    name = "qw5",
    version,
    about = "Two-dimensional five-state Grover walk"
)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Number of steps, or the averaging horizon for timeavg and verdict.
    #[arg(long)]
    steps: Option<usize>,
    /// Quadrature points per momentum axis.
    #[arg(long, default_value_t = DEFAULT_KGRID)]
    kgrid: usize,
    /// Half-width of the output square.
    #[arg(long)]
    radius: Option<usize>,
    /// Initial amplitudes as `re1,im1,...,re5,im5`.
    #[arg(long, allow_hyphen_values = true)]
    init: Option<String>,
    /// Lattice site as `n1,n2`.
    #[arg(long, allow_hyphen_values = true)]
    site: Option<String>,
    /// Comma-separated ascending times.
    #[arg(long)]
    times: Option<String>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Random initial states tried by search.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
}

/// Validated invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub steps: usize,
    pub kgrid: usize,
    pub radius: usize,
    pub init: Spinor,
    pub site: (i64, i64),
    pub times: Vec<usize>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub samples: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum UsageError {
    /// Help or version text requested; not a failure.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> UsageError {
    UsageError::Invalid(msg.into())
}

/// Parses the full argument vector, program name included.
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            UsageError::Info(e.to_string())
        }
        _ => {
            let text = e.to_string();
            invalid(
                text.lines()
                    .next()
                    .unwrap_or("invalid arguments")
                    .trim_start_matches("error: "),
            )
        }
    })?;
    let command = args.command;

    if args.kgrid < 2 {
        return Err(invalid(format!(
            "--kgrid must be at least 2, got {}",
            args.kgrid
        )));
    }
    let needs_steps = matches!(
        command,
        Command::Evolve | Command::Timeavg | Command::Verdict
    );
    let steps = match (args.steps, needs_steps) {
        (Some(s), _) => s,
        (None, true) => {
            return Err(invalid(
                format!("{command:?} requires --steps").to_lowercase(),
            ))
        }
        (None, false) => 0,
    };
    if steps == 0 && matches!(command, Command::Timeavg | Command::Verdict) {
        return Err(invalid("--steps must be at least 1 for an average"));
    }
    if command == Command::Search && args.samples == 0 {
        return Err(invalid("--samples must be at least 1"));
    }

    let init = match &args.init {
        Some(text) => parse_init(text)?,
        None => Spinor::from_reals([1.0, 0.0, 0.0, 0.0, 0.0]),
    };
    let site = match &args.site {
        Some(text) => parse_site(text)?,
        None => (0, 0),
    };
    let times = match &args.times {
        Some(text) => parse_times(text)?,
        None => DEFAULT_TIMES.to_vec(),
    };

    let allowed: &[Format] = match command {
        Command::Evolve | Command::Limit | Command::Timeavg => {
            &[Format::Csv, Format::Json, Format::Pgm]
        }
        Command::Spectrum | Command::Decay => &[Format::Csv, Format::Json],
        Command::Verdict | Command::Search => &[Format::Json],
    };
    let format = args.format.unwrap_or(allowed[0]);
    if !allowed.contains(&format) {
        return Err(invalid(format!(
            "--format {} is not available for {}",
            format_name(format),
            command_name(command)
        )));
    }

    let radius = args.radius.unwrap_or(match command {
        Command::Limit | Command::Search => SEARCH_RADIUS,
        _ => steps,
    });

    Ok(RunConfig {
        command,
        steps,
        kgrid: args.kgrid,
        radius,
        init,
        site,
        times,
        out: args.out,
        format,
        seed: args.seed,
        samples: args.samples,
    })
}

fn command_name(c: Command) -> String {
    c.to_possible_value()
        .map_or_else(String::new, |v| v.get_name().to_owned())
}

fn format_name(f: Format) -> String {
    f.to_possible_value()
        .map_or_else(String::new, |v| v.get_name().to_owned())
}

fn parse_list<T: std::str::FromStr>(text: &str, flag: &str) -> Result<Vec<T>, UsageError> {
    text.split(',')
        .map(|field| {
            field
                .trim()
                .parse()
                .map_err(|_| invalid(format!("{flag}: cannot parse {field:?}")))
        })
        .collect()
}

fn parse_init(text: &str) -> Result<Spinor, UsageError> {
    let reals: Vec<f64> = parse_list(text, "--init")?;
    if reals.len() != 10 {
        return Err(invalid(format!(
            "--init needs 10 numbers, got {}",
            reals.len()
        )));
    }
    if reals.iter().any(|x| !x.is_finite()) {
        return Err(invalid("--init amplitudes must be finite"));
    }
    let spinor = Spinor::new(std::array::from_fn(|l| {
        Complex64::new(reals[2 * l], reals[2 * l + 1])
    }));
    let norm_sqr = spinor.norm_sqr();
    if (norm_sqr - 1.0).abs() > 1e-9 {
        return Err(invalid(format!(
            "--init squared norm is {norm_sqr}, expected 1"
        )));
    }
    Ok(spinor)
}

fn parse_site(text: &str) -> Result<(i64, i64), UsageError> {
    match parse_list::<i64>(text, "--site")?[..] {
        [n1, n2] => Ok((n1, n2)),
        _ => Err(invalid("--site needs two integers n1,n2")),
    }
}

fn parse_times(text: &str) -> Result<Vec<usize>, UsageError> {
    let times: Vec<usize> = parse_list(text, "--times")?;
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("--times must be strictly ascending"));
    }
    Ok(times)
}

/// Runs the command, writing to `--out` or stdout.
pub fn run(config: &RunConfig) -> qw5::Result<()> {
    match &config.out {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            execute(config, &mut out)?;
            out.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = BufWriter::new(stdout.lock());
            execute(config, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Runs the command and writes its output to `out`.
pub fn execute<W: Write>(config: &RunConfig, out: W) -> qw5::Result<()> {
    let grid = || QuadratureGrid::new(config.kgrid);
    match config.command {
        Command::Evolve => {
            let state = evolve(initial_state(config.init)?, config.steps);
            let p = probability_grid(&state).resized(config.radius);
            write_grid(&p, config.format, out)
        }
        Command::Spectrum => {
            let rows = band_surface(config.kgrid)?;
            match config.format {
                Format::Json => write_bands_json_to(&rows, out),
                _ => write_bands_csv_to(&rows, out),
            }
        }
        Command::Limit => {
            let p = limiting_distribution(config.init, &grid()?, config.radius)?;
            write_grid(&p, config.format, out)
        }
        Command::Timeavg => {
            let p = time_averaged_probability(config.init, config.steps, config.radius)?;
            write_grid(&p, config.format, out)
        }
        Command::Decay => {
            let series = decay_probe(config.init, config.site, &config.times, &grid()?)?;
            match config.format {
                Format::Json => write_decay_json_to(&series, out),
                _ => write_decay_csv_to(&series, out),
            }
        }
        Command::Verdict => {
            let report = localization_decision(config.init, &grid()?, config.steps)?;
            write_report_json_to(&report, out)
        }
        Command::Search => {
            let (spinor, mass) =
                min_limit_mass_search_seeded(config.samples, &grid()?, config.seed)?;
            write_search_json_to(&spinor, mass, out)
        }
    }
}

fn write_grid<W: Write>(grid: &ProbabilityGrid, format: Format, out: W) -> qw5::Result<()> {
    match format {
        Format::Csv => write_grid_csv_to(grid, out),
        Format::Json => write_grid_json_to(grid, out),
        Format::Pgm => write_heatmap_pgm_to(grid, out),
    }
}

/// Parses, runs, and reports; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match parse_args(argv) {
        Ok(c) => c,
        Err(UsageError::Info(text)) => {
            print!("{text}");
            return EXIT_OK;
        }
        Err(e) => {
            eprintln!("qw5: {e}");
            return EXIT_USAGE;
        }
    };
    match run(&config) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("qw5: {e}");
            EXIT_COMPUTATION
        }
    }
}
