use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use segrowth::inference::select_segments;
use segrowth::oracle::GeneratorSpec;
use segrowth::{
    fit_interaction_log, generate, infer, load_csv, log_transform, multistart_fit, AnnualSeries, ComparisonReport,
    CsvOptions, Error, FitConfig, InputDigest, LogSeries, Report, SegmentedModel, SeparateFit, ZeroPolicy,
    DEFAULT_DELTA_R2,
};

const EXIT_DATA: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Segmented exponential growth fits for annual count series.
#[derive(Debug, Parser)]
#[command(name = "segrowth", version)]
struct Cli {
    /// Worker threads for the multistart search [env: SEGROWTH_THREADS]
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one series.
    Fit(FitArgs),
    /// Joint interaction fit of two series plus both separate fits.
    Compare(CompareArgs),
    /// Write a synthetic series as CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
    Tsv,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Range<T>(T, T);

impl<T: FromStr> FromStr for Range<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<T>().map_err(|_| format!("not a number: {v:?}"));
        Ok(Range(parse(lo)?, parse(hi)?))
    }
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Number of segments.
    #[arg(long)]
    segments: Option<usize>,
    /// Estimate the intercept b0 (default for one segment).
    #[arg(long, conflicts_with = "no_intercept")]
    intercept: bool,
    /// Fix b0 at zero (default for several segments).
    #[arg(long)]
    no_intercept: bool,
    /// Breakpoint search interval.
    #[arg(long, value_name = "LO:HI")]
    bounds: Option<Range<f64>>,
    /// Minimum observations per segment.
    #[arg(long, value_name = "K", default_value_t = 3)]
    min_points: usize,
    /// Grid nodes per breakpoint for the multistart.
    #[arg(long, value_name = "G", default_value_t = 8)]
    grid: usize,
    /// Skip the whole-year profile sweep after the grid starts.
    #[arg(long)]
    no_refine: bool,
    /// Gauss-Newton iteration cap per start.
    #[arg(long, value_name = "N", default_value_t = 200)]
    max_iterations: usize,
    /// Reference year of the time axis.
    #[arg(long, value_name = "Y")]
    offset_year: Option<f64>,
    /// Write PREFIX.json, PREFIX.txt, PREFIX.tsv and PREFIX.svg.
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Fail instead of dropping years with a zero count.
    #[arg(long)]
    strict_zeros: bool,
}

impl ModelArgs {
    fn config(&self, n_segments: usize) -> FitConfig<f64> {
        let intercept = if self.intercept {
            true
        } else if self.no_intercept {
            false
        } else {
            n_segments == 1
        };
        let mut cfg = FitConfig::new(n_segments).with_intercept(intercept);
        cfg.min_points_per_segment = self.min_points;
        cfg.grid_points_per_breakpoint = self.grid;
        cfg.max_iterations = self.max_iterations;
        cfg.profile_refine = !self.no_refine;
        if let Some(Range(lo, hi)) = self.bounds {
            cfg = cfg.with_bounds(lo, hi);
        }
        if let Some(y) = self.offset_year {
            cfg = cfg.with_origin(y);
        }
        cfg
    }

    fn zero_policy(&self) -> ZeroPolicy {
        if self.strict_zeros {
            ZeroPolicy::Error
        } else {
            ZeroPolicy::DropWithWarning
        }
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("count").required(true).args(["segments", "select"])))]
struct FitArgs {
    /// CSV with `year,count` rows.
    file: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Choose the number of segments by the gain in R2.
    #[arg(long, conflicts_with = "segments")]
    select: bool,
    /// Largest segment count considered by --select.
    #[arg(long, value_name = "N", default_value_t = 6)]
    max_segments: usize,
    /// Minimum R2 gain that justifies another segment.
    #[arg(long, value_name = "X", default_value_t = DEFAULT_DELTA_R2)]
    delta_r2: f64,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Series coded D = 0.
    first: PathBuf,
    /// Series coded D = 1.
    second: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["model", "slopes"])))]
struct SimulateArgs {
    /// JSON model: {intercept, slopes, breakpoints, domain, origin}.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Comma-separated slopes (instead of --model).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "domain")]
    slopes: Option<Vec<f64>>,
    /// Comma-separated breakpoints for --slopes.
    #[arg(long, value_delimiter = ',', default_value = "")]
    breakpoints: Vec<String>,
    /// Intercept b0 for --slopes (omit to fix it at zero).
    #[arg(long, allow_hyphen_values = true)]
    b0: Option<f64>,
    /// Model domain for --slopes.
    #[arg(long, value_name = "LO:HI")]
    domain: Option<Range<f64>>,
    /// Time origin for --slopes.
    #[arg(long, value_name = "Y", default_value_t = 0.0)]
    origin: f64,
    /// Noise standard deviation in log space.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inclusive year range (default: whole years inside the model domain).
    #[arg(long, value_name = "LO:HI")]
    years: Option<Range<i32>>,
    /// Output file (default stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Failure with its exit status.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => Self::usage(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let threads = match cli.threads {
        Some(n) => Some(n),
        None => match std::env::var("SEGROWTH_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Failure::usage(format!("SEGROWTH_THREADS is not a count: {v:?}")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    }
}

fn read_series(path: &Path, policy: ZeroPolicy) -> Result<(AnnualSeries, LogSeries), Failure> {
    if !path.is_file() {
        return Err(Failure::usage(format!("no such file: {}", path.display())));
    }
    let file = File::open(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let label = path
        .file_stem()
        .map_or_else(|| "series".to_owned(), |s| s.to_string_lossy().into_owned());
    let options = CsvOptions {
        label,
        ..CsvOptions::default()
    };
    let series = load_csv(file, &options).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let log = log_transform(&series, policy)?;
    if !log.dropped_years().is_empty() {
        eprintln!(
            "warning: {}: dropped zero-count years {:?}",
            path.display(),
            log.dropped_years()
        );
    }
    Ok((series, log))
}

struct Rendered {
    json: String,
    text: String,
    tsv: String,
    svg: String,
}

fn emit(rendered: &Rendered, args: &ModelArgs) -> Result<(), Failure> {
    if let Some(prefix) = &args.out {
        for (ext, body) in [
            ("json", &rendered.json),
            ("txt", &rendered.text),
            ("tsv", &rendered.tsv),
            ("svg", &rendered.svg),
        ] {
            let mut path = prefix.clone().into_os_string();
            path.push(".");
            path.push(ext);
            fs::write(&path, body).map_err(|e| Failure::data(format!("{}: {e}", Path::new(&path).display())))?;
        }
    }
    let body = match args.format {
        Format::Json => &rendered.json,
        Format::Text => &rendered.text,
        Format::Tsv => &rendered.tsv,
        Format::Svg => &rendered.svg,
    };
    let mut stdout = io::stdout().lock();
    stdout
        .write_all(body.as_bytes())
        .and_then(|_| stdout.flush())
        .map_err(|e| Failure::data(format!("stdout: {e}")))
}

fn cmd_fit(args: &FitArgs) -> Result<u8, Failure> {
    let (series, log) = read_series(&args.file, args.model.zero_policy())?;
    let (config, fit, selection) = if args.select {
        let config = args.model.config(1).with_intercept(args.model.intercept);
        let (fit, trace) = select_segments(&log, args.max_segments, args.delta_r2, &config)?;
        (config.with_segments(trace.chosen), fit, Some(trace))
    } else {
        let config = args.model.config(args.model.segments.unwrap_or(1));
        let fit = multistart_fit(&log, &config)?;
        (config, fit, None)
    };
    let inference = infer(&fit, &log);
    let input = InputDigest::new(args.file.display().to_string(), &series, &log);
    let report = Report::new(input, &series, config, &fit, inference, selection);
    emit(
        &Rendered {
            json: report.to_json(),
            text: report.to_text(),
            tsv: report.to_tsv(),
            svg: report.to_svg(),
        },
        &args.model,
    )?;
    if fit.converged {
        Ok(0)
    } else {
        eprintln!("warning: fit did not converge ({:?})", fit.termination);
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn cmd_compare(args: &CompareArgs) -> Result<u8, Failure> {
    let policy = args.model.zero_policy();
    let (s0, l0) = read_series(&args.first, policy)?;
    let (s1, l1) = read_series(&args.second, policy)?;
    let config = args.model.config(args.model.segments.unwrap_or(1));
    let joint = fit_interaction_log(&l0, &l1, &config)?;
    let separate = |log: &LogSeries| -> Result<SeparateFit<f64>, Failure> {
        let fit = multistart_fit(log, &config)?;
        Ok(SeparateFit::new(&fit, infer(&fit, log)))
    };
    let report = ComparisonReport::new(
        (
            InputDigest::new(args.first.display().to_string(), &s0, &l0),
            InputDigest::new(args.second.display().to_string(), &s1, &l1),
        ),
        (&s0, &s1),
        config.clone(),
        joint,
        (separate(&l0)?, separate(&l1)?),
    );
    emit(
        &Rendered {
            json: report.to_json(),
            text: report.to_text(),
            tsv: report.to_tsv(),
            svg: report.to_svg(),
        },
        &args.model,
    )?;
    if report.converged() {
        Ok(0)
    } else {
        eprintln!("warning: at least one fit did not converge");
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn simulation_model(args: &SimulateArgs) -> Result<SegmentedModel, Failure> {
    if let Some(path) = &args.model {
        if !path.is_file() {
            return Err(Failure::usage(format!("no such file: {}", path.display())));
        }
        let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        let model: SegmentedModel =
            serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        model.validate()?;
        return Ok(model);
    }
    let slopes = args.slopes.clone().unwrap_or_default();
    let breakpoints = args
        .breakpoints
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Failure::usage(format!("not a breakpoint: {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let Range(lo, hi) = args.domain.ok_or_else(|| Failure::usage("--slopes needs --domain"))?;
    let model =
        SegmentedModel::new(args.b0, slopes, breakpoints, (lo, hi)).map_err(|e| Failure::usage(e.to_string()))?;
    Ok(model.with_origin(args.origin))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8, Failure> {
    let model = simulation_model(args)?;
    let years = match args.years {
        Some(Range(lo, hi)) => (lo, hi),
        None => {
            let (lo, hi) = model.domain();
            (lo.ceil() as i32, hi.floor() as i32)
        }
    };
    let spec = GeneratorSpec::new(model, years, args.sigma, args.seed);
    let series = generate(&spec).map_err(|e| Failure::usage(e.to_string()))?;
    let csv = series.to_csv();
    match &args.out {
        Some(path) => fs::write(path, csv).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(csv.as_bytes())
                .map_err(|e| Failure::data(format!("stdout: {e}")))?;
        }
    }
    Ok(0)
}
