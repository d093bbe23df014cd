//! Batch command-line surface over the library: central closed-form
//! tables, 2x2 noncentral quadrature, Monte Carlo estimators, parameter
//! canonicalization, and series-extrapolation jobs.
//!
//! Every subcommand emits one machine-readable table (CSV by default,
//! JSON with `--format json`) to standard output or to `--out PATH`.
//! Floating-point cells are printed with 17 significant digits, so parsing
//! an emitted file recovers every value exactly.  Given a full flag set —
//! including `--seed` and `--workers` — the output bytes are reproducible;
//! worker count never changes results, only wall time.
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical non-convergence,
//! 4 I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wishart_euler::central::{
    approximation_error_asymptotic, expected_euler_central, tail_asymptotic_leading, CentralSpec,
    DeltaExponentMode,
};
use wishart_euler::linalg::{canonicalize, Matrix, WishartParams};
use wishart_euler::mc::{
    estimate_eigen_tails, estimate_expected_euler, lemma1_ratio_curve, McConfig, RatioFlag,
    ThresholdScale,
};
use wishart_euler::nc2::{
    expected_euler_2x2, expected_euler_2x2_rational, Params2x2, QuadratureSpec,
};
use wishart_euler::ode::{fit_extrapolation, parse_job, parse_ode, rational_to_f64};
use wishart_euler::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_IO: u8 = 4;

/// A model evaluation whose truncation indicator exceeds this fraction of
/// the value is reported as divergent on stderr.
const DIVERGENCE_WARN_RATIO: f64 = 1e-3;

#[derive(Parser)]
#[command(
    name = "wishart-euler",
    version,
    about = "Tail probabilities of the largest eigenvalue of a real Wishart matrix, \
             via expected Euler characteristics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write the table to this file instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Output format for the table.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads for the parallel paths (default: machine
    /// parallelism).  Results never depend on this, only wall time.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Seed for the Monte Carlo sampler.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Central closed form: table of x, value, asymptote, delta_asymptote.
    Central {
        /// Smaller matrix dimension (at least 2).
        #[arg(long)]
        m: u32,
        /// Larger matrix dimension (at least m).
        #[arg(long)]
        n: u32,
        /// Common inverse scale of the covariance.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// Exponent convention for the delta_asymptote column.
        #[arg(long, value_enum, default_value_t = DeltaMode::Symmetric)]
        delta_exponent: DeltaMode,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// 2x2 noncentral quadrature: table of x, value, achieved_tol.
    ///
    /// If any row fails to reach --tol the full table is still written and
    /// the exit code is 3.
    Nc2 {
        /// First inverse scale.
        #[arg(long)]
        s1: f64,
        /// Second inverse scale.
        #[arg(long)]
        s2: f64,
        /// Canonical mean entry (1,1), nonnegative.
        #[arg(long, allow_hyphen_values = true)]
        m11: f64,
        /// Canonical mean entry (2,1).
        #[arg(long, allow_hyphen_values = true)]
        m21: f64,
        /// Canonical mean entry (2,2), nonnegative.
        #[arg(long, allow_hyphen_values = true)]
        m22: f64,
        /// Absolute tolerance for each row.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Use the tangent half-angle (rational-node) quadrature variant.
        #[arg(long)]
        rational_angles: bool,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Monte Carlo estimators with standard-error columns.
    Mc {
        #[command(flatten)]
        source: ParamSource,
        /// What to estimate per threshold: individual tail probabilities,
        /// the alternating Euler-characteristic sum, or the second-to-first
        /// tail ratio.
        #[arg(long, value_enum, default_value_t = McMode::Tails)]
        mode: McMode,
        /// Number of Monte Carlo samples.
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        /// Samples per deterministic counter-stream chunk.
        #[arg(long, default_value_t = 16_384)]
        chunk_size: u64,
        /// Threshold scale: singular values (sigma >= x) or eigenvalues
        /// (lambda >= x).
        #[arg(long, value_enum, default_value_t = ScaleArg::Sigma)]
        scale: ScaleArg,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Reduce a covariance and mean to canonical parameters (scales plus
    /// lower-triangular mean); writes the parameter file format regardless
    /// of --format.
    Canon {
        /// Covariance matrix: flattened row-major comma list (square
        /// inferred) or a file path.
        #[arg(long, value_name = "LIST|PATH", allow_hyphen_values = true)]
        sigma: String,
        /// Mean matrix: flattened row-major comma list (needs --rows and
        /// --cols) or a file path.
        #[arg(long, value_name = "LIST|PATH", allow_hyphen_values = true)]
        mean: String,
        /// Row count for an inline --mean list.
        #[arg(long, value_name = "R")]
        rows: Option<usize>,
        /// Column count for an inline --mean list.
        #[arg(long, value_name = "C")]
        cols: Option<usize>,
    },
    /// Fit a series-extrapolation job and evaluate it on the job's grid:
    /// table of x, value, last_term_indicator.
    ///
    /// Rows whose truncation indicator is not negligible are listed in a
    /// warning on stderr; the table itself always carries the indicator.
    Hgm {
        /// Equation file (JSON: rank, coeffs, var).
        #[arg(long, value_name = "PATH")]
        ode: PathBuf,
        /// Job file (JSON: centers, n_terms, ref_points, ref_values,
        /// precision_bits, eval_grid).
        #[arg(long, value_name = "PATH")]
        job: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeltaMode {
    /// Exponent 2(2m - 5).
    Literal,
    /// Exponent 2(m + n - 5), symmetric in the dimensions.
    Symmetric,
}

impl From<DeltaMode> for DeltaExponentMode {
    fn from(m: DeltaMode) -> Self {
        match m {
            DeltaMode::Literal => DeltaExponentMode::Literal,
            DeltaMode::Symmetric => DeltaExponentMode::Symmetric,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum McMode {
    Tails,
    Euler,
    Ratio,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    /// Thresholds on singular values, sigma_i >= x.
    Sigma,
    /// Thresholds on eigenvalues, lambda_i >= x.
    Eigen,
}

impl From<ScaleArg> for ThresholdScale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Sigma => ThresholdScale::SingularValue,
            ScaleArg::Eigen => ThresholdScale::Eigenvalue,
        }
    }
}

/// Threshold grid: an explicit list or an inclusive arithmetic range,
/// exactly one of the two.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct GridArgs {
    /// Comma-separated thresholds.
    #[arg(long, value_name = "A,B,C", allow_hyphen_values = true)]
    x: Option<String>,
    /// Inclusive arithmetic range start:stop:step.
    #[arg(long, value_name = "START:STOP:STEP")]
    x_range: Option<String>,
}

impl GridArgs {
    fn points(&self) -> Result<Vec<f64>, CliError> {
        if let Some(list) = &self.x {
            let xs = parse_f64_list(list)?;
            if xs.is_empty() {
                return Err(usage("--x needs at least one threshold"));
            }
            return Ok(xs);
        }
        let range = self.x_range.as_ref().expect("clap enforces one grid flag");
        let parts: Vec<&str> = range.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(usage(format!(
                "--x-range wants START:STOP:STEP, got {range:?}"
            )));
        };
        let start = parse_f64(start)?;
        let stop = parse_f64(stop)?;
        let step = parse_f64(step)?;
        if step <= 0.0 {
            return Err(usage(format!(
                "--x-range step must be positive, got {step}"
            )));
        }
        if stop < start {
            return Err(usage(format!(
                "--x-range stop {stop} lies before start {start}"
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=count).map(|k| start + k as f64 * step).collect())
    }
}

/// Wishart parameters for `mc`: a parameter file, or inline scales plus a
/// canonical mean.
#[derive(Args)]
struct ParamSource {
    /// Parameter file (JSON with fields m, n, scales, mean).
    #[arg(long, value_name = "PATH", conflicts_with_all = ["scales", "mean", "rows", "cols"])]
    params: Option<PathBuf>,
    /// Comma-separated inverse scales s_1,...,s_m.
    #[arg(long, value_name = "S1,S2,...", requires = "mean")]
    scales: Option<String>,
    /// Canonical mean matrix: flattened row-major comma list (needs --rows
    /// and --cols) or a file path.
    #[arg(
        long,
        value_name = "LIST|PATH",
        requires = "scales",
        allow_hyphen_values = true
    )]
    mean: Option<String>,
    /// Row count for an inline --mean list.
    #[arg(long, value_name = "R")]
    rows: Option<usize>,
    /// Column count for an inline --mean list.
    #[arg(long, value_name = "C")]
    cols: Option<usize>,
}

impl ParamSource {
    fn load(&self) -> Result<WishartParams, CliError> {
        if let Some(path) = &self.params {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, &e))?;
            return parse_param_file(&text);
        }
        let (Some(scales), Some(mean)) = (&self.scales, &self.mean) else {
            return Err(usage(
                "mc needs a parameter source: --params FILE, or --scales with --mean",
            ));
        };
        let scales = parse_f64_list(scales)?;
        let mean = load_matrix(mean, self.rows, self.cols, "mean")?;
        Ok(WishartParams::new(scales, mean)?)
    }
}

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn io_error(path: &Path, e: &std::io::Error) -> CliError {
    CliError {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::QuadratureNotConverged { .. }
            | Error::NoConvergence { .. }
            | Error::SingularSystem { .. }
            | Error::MemoryBudget { .. } => EXIT_NUMERIC,
            _ => EXIT_USAGE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

/// One output cell; floats are printed with 17 significant digits.
enum Cell {
    Num(f64),
    Int(u64),
    Text(&'static str),
}

/// Drops the sign of a negative zero so equal values format identically.
fn unsigned_zero(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| (*c).to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn render_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => format!("{:.16e}", unsigned_zero(*v)),
                    Cell::Int(n) => n.to_string(),
                    Cell::Text(s) => (*s).to_string(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn render_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| match c {
                        Cell::Num(v) => serde_json::Number::from_f64(unsigned_zero(*v))
                            .map(serde_json::Value::Number)
                            .unwrap_or_else(|| serde_json::Value::String(format!("{v}"))),
                        Cell::Int(n) => serde_json::Value::from(*n),
                        Cell::Text(s) => serde_json::Value::String((*s).to_string()),
                    })
                    .collect()
            })
            .collect();
        let v = serde_json::json!({ "columns": self.columns, "rows": rows });
        let mut text = serde_json::to_string_pretty(&v).expect("table serializes");
        text.push('\n');
        text
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(usage("--workers must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("setting up {n} workers failed: {e}")))?;
    }
    match &cli.command {
        Command::Central {
            m,
            n,
            s,
            delta_exponent,
            grid,
        } => {
            let spec = CentralSpec::new(*m, *n, *s)?;
            let mode = DeltaExponentMode::from(*delta_exponent);
            let mut table = Table::new(&["x", "value", "asymptote", "delta_asymptote"]);
            for x in grid.points()? {
                table.push(vec![
                    Cell::Num(x),
                    Cell::Num(expected_euler_central(&spec, x)?),
                    Cell::Num(tail_asymptotic_leading(&spec, x)?),
                    Cell::Num(approximation_error_asymptotic(&spec, x, mode)?),
                ]);
            }
            write_output(&table.render(cli.format), &cli.out)
        }
        Command::Nc2 {
            s1,
            s2,
            m11,
            m21,
            m22,
            tol,
            rational_angles,
            grid,
        } => {
            let p = Params2x2::new(*s1, *s2, *m11, *m21, *m22)?;
            let q = QuadratureSpec {
                tol: *tol,
                ..QuadratureSpec::default()
            };
            let mut table = Table::new(&["x", "value", "achieved_tol"]);
            let mut failure: Option<String> = None;
            for x in grid.points()? {
                let result = if *rational_angles {
                    expected_euler_2x2_rational(&p, x, &q)
                } else {
                    expected_euler_2x2(&p, x, &q)
                };
                match result {
                    Ok(r) => table.push(vec![
                        Cell::Num(x),
                        Cell::Num(r.value),
                        Cell::Num(r.achieved),
                    ]),
                    Err(Error::QuadratureNotConverged {
                        value,
                        achieved,
                        requested,
                    }) => {
                        table.push(vec![Cell::Num(x), Cell::Num(value), Cell::Num(achieved)]);
                        failure.get_or_insert(format!(
                            "x = {x}: achieved {achieved:e} > requested {requested:e}"
                        ));
                    }
                    Err(other) => return Err(other.into()),
                }
            }
            write_output(&table.render(cli.format), &cli.out)?;
            match failure {
                Some(detail) => Err(CliError {
                    code: EXIT_NUMERIC,
                    message: format!("quadrature did not reach tolerance ({detail})"),
                }),
                None => Ok(()),
            }
        }
        Command::Mc {
            source,
            mode,
            samples,
            chunk_size,
            scale,
            grid,
        } => {
            let params = source.load()?;
            let cfg = McConfig {
                n_samples: *samples,
                seed: cli.seed,
                chunk_size: *chunk_size,
            };
            let scale = ThresholdScale::from(*scale);
            let xs = grid.points()?;
            let table = match mode {
                McMode::Tails => {
                    let m = params.m();
                    let mut columns = vec!["x".to_string()];
                    for i in 1..=m {
                        columns.push(format!("p{i}"));
                        columns.push(format!("stderr{i}"));
                    }
                    let mut table = Table {
                        columns,
                        rows: Vec::new(),
                    };
                    for (x, row) in xs
                        .iter()
                        .zip(estimate_eigen_tails(&params, &xs, scale, &cfg)?)
                    {
                        let mut cells = vec![Cell::Num(*x)];
                        for est in row {
                            cells.push(Cell::Num(est.value));
                            cells.push(Cell::Num(est.stderr));
                        }
                        table.push(cells);
                    }
                    table
                }
                McMode::Euler => {
                    let mut table = Table::new(&["x", "value", "stderr"]);
                    for (x, est) in xs
                        .iter()
                        .zip(estimate_expected_euler(&params, &xs, scale, &cfg)?)
                    {
                        table.push(vec![
                            Cell::Num(*x),
                            Cell::Num(est.value),
                            Cell::Num(est.stderr),
                        ]);
                    }
                    table
                }
                McMode::Ratio => {
                    let mut table =
                        Table::new(&["x", "ratio", "stderr", "numer_count", "denom_count", "flag"]);
                    for est in lemma1_ratio_curve(&params, &xs, scale, &cfg)? {
                        table.push(vec![
                            Cell::Num(est.x),
                            Cell::Num(est.ratio),
                            Cell::Num(est.stderr),
                            Cell::Int(est.numer_count),
                            Cell::Int(est.denom_count),
                            Cell::Text(match est.flag {
                                RatioFlag::Ok => "ok",
                                RatioFlag::FewTailSamples => "few_tail_samples",
                                RatioFlag::EmptyDenominator => "empty_denominator",
                            }),
                        ]);
                    }
                    table
                }
            };
            write_output(&table.render(cli.format), &cli.out)
        }
        Command::Canon {
            sigma,
            mean,
            rows,
            cols,
        } => {
            let sigma = load_matrix(sigma, None, None, "sigma")?;
            let mean = load_matrix(mean, *rows, *cols, "mean")?;
            let params = canonicalize(&sigma, &mean)?;
            write_output(&render_param_file(&params), &cli.out)
        }
        Command::Hgm { ode, job } => {
            let ode_text = fs::read_to_string(ode).map_err(|e| io_error(ode, &e))?;
            let job_text = fs::read_to_string(job).map_err(|e| io_error(job, &e))?;
            let equation = parse_ode(&ode_text)?;
            let job = parse_job(&job_text)?;
            let model = fit_extrapolation(
                &equation,
                &job.centers,
                job.n_terms,
                &job.ref_points,
                &job.ref_values,
                job.precision_bits,
            )?;
            let mut table = Table::new(&["x", "value", "last_term_indicator"]);
            let mut divergent = Vec::new();
            for point in job.eval_grid.points()? {
                let x = rational_to_f64(&point);
                let ev = model.evaluate(&point);
                let value = ev.value_f64();
                if ev.last_term > DIVERGENCE_WARN_RATIO * value.abs().max(1.0) {
                    divergent.push(x);
                }
                table.push(vec![
                    Cell::Num(x),
                    Cell::Num(value),
                    Cell::Num(ev.last_term),
                ]);
            }
            write_output(&table.render(cli.format), &cli.out)?;
            if !divergent.is_empty() {
                let list: Vec<String> = divergent.iter().map(|x| format!("{x}")).collect();
                eprintln!(
                    "warning: series truncation is not negligible at x = {}; treat these \
                     rows as divergent",
                    list.join(", ")
                );
            }
            Ok(())
        }
    }
}

fn write_output(text: &str, out: &Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_error(path, &e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, CliError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| usage(format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(usage(format!("number must be finite, got {s:?}")));
    }
    Ok(v)
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(parse_f64)
        .collect()
}

/// Reads a matrix from an inline flattened comma list or a file path.
///
/// Inline lists need `--rows`/`--cols` unless the entry count is a perfect
/// square, in which case a square shape is inferred.  Files may hold a JSON
/// array of arrays or plain text rows of comma/whitespace-separated
/// numbers.
fn load_matrix(
    arg: &str,
    rows: Option<usize>,
    cols: Option<usize>,
    what: &str,
) -> Result<Matrix, CliError> {
    if arg.contains(',') {
        let data = parse_f64_list(arg)?;
        let (r, c) = match (rows, cols) {
            (Some(r), Some(c)) => (r, c),
            (None, None) => {
                let k = (data.len() as f64).sqrt().round() as usize;
                if k * k != data.len() {
                    return Err(usage(format!(
                        "inline {what} with {} entries is not square; pass --rows and --cols",
                        data.len()
                    )));
                }
                (k, k)
            }
            _ => return Err(usage("--rows and --cols must be given together")),
        };
        return Ok(Matrix::new(r, c, data)?);
    }
    let path = Path::new(arg);
    let text = fs::read_to_string(path).map_err(|e| io_error(path, &e))?;
    let trimmed = text.trim_start();
    let rows: Vec<Vec<f64>> = if trimmed.starts_with('[') {
        serde_json::from_str(&text)
            .map_err(|e| usage(format!("{what} file is not a JSON array of arrays: {e}")))?
    } else {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|line| {
                line.split([',', ' ', '\t'])
                    .filter(|p| !p.trim().is_empty())
                    .map(parse_f64)
                    .collect()
            })
            .collect::<Result<_, _>>()?
    };
    Ok(Matrix::from_rows(rows)?)
}

/// Parses the parameter file format: JSON with fields m, n, scales, mean.
fn parse_param_file(text: &str) -> Result<WishartParams, CliError> {
    let v: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| usage(format!("parameter file is not valid JSON: {e}")))?;
    let obj = v
        .as_object()
        .ok_or_else(|| usage("parameter file must be a JSON object"))?;
    let dim = |field: &str| -> Result<usize, CliError> {
        obj.get(field)
            .and_then(serde_json::Value::as_u64)
            .map(|d| d as usize)
            .ok_or_else(|| usage(format!("parameter file needs a positive integer `{field}`")))
    };
    let m = dim("m")?;
    let n = dim("n")?;
    let scales: Vec<f64> = obj
        .get("scales")
        .and_then(serde_json::Value::as_array)
        .ok_or_else(|| usage("parameter file needs a `scales` array"))?
        .iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| usage(format!("scales entry is not a number: {v}")))
        })
        .collect::<Result<_, _>>()?;
    let mean: Vec<Vec<f64>> = obj
        .get("mean")
        .and_then(serde_json::Value::as_array)
        .ok_or_else(|| usage("parameter file needs a `mean` array of arrays"))?
        .iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(|| usage("mean rows must be arrays"))?
                .iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| usage(format!("mean entry is not a number: {v}")))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    if scales.len() != m {
        return Err(usage(format!(
            "parameter file declares m = {m} but scales has {} entries",
            scales.len()
        )));
    }
    if mean.len() != m || mean.iter().any(|r| r.len() != n) {
        return Err(usage(format!(
            "parameter file declares {m}x{n} but mean is {}x{}",
            mean.len(),
            mean.first().map_or(0, Vec::len)
        )));
    }
    Ok(WishartParams::new(scales, Matrix::from_rows(mean)?)?)
}

/// Renders the parameter file format with full-precision numbers.
fn render_param_file(p: &WishartParams) -> String {
    let scales: Vec<String> = p
        .scales()
        .iter()
        .map(|s| format!("{:.16e}", unsigned_zero(*s)))
        .collect();
    let mean_rows: Vec<String> = (0..p.m())
        .map(|i| {
            let row: Vec<String> = (0..p.n())
                .map(|j| format!("{:.16e}", unsigned_zero(p.mean().get(i, j))))
                .collect();
            format!("    [{}]", row.join(", "))
        })
        .collect();
    format!(
        "{{\n  \"m\": {},\n  \"n\": {},\n  \"scales\": [{}],\n  \"mean\": [\n{}\n  ]\n}}\n",
        p.m(),
        p.n(),
        scales.join(", "),
        mean_rows.join(",\n")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_list_and_range_agree() {
        let list = GridArgs {
            x: Some("1,2,3".into()),
            x_range: None,
        };
        let range = GridArgs {
            x: None,
            x_range: Some("1:3:1".into()),
        };
        assert_eq!(list.points().unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(range.points().unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn grid_range_includes_inexact_stop() {
        let range = GridArgs {
            x: None,
            x_range: Some("0:0.3:0.1".into()),
        };
        let points = range.points().unwrap();
        assert_eq!(points.len(), 4);
        assert!((points[3] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_bad_ranges() {
        for bad in ["1:2", "1:2:0", "2:1:1", "a:b:c", "1:2:-1"] {
            let args = GridArgs {
                x: None,
                x_range: Some(bad.into()),
            };
            assert!(args.points().is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn csv_cells_round_trip_doubles() {
        let mut table = Table::new(&["x", "value"]);
        let v = 0.123_456_789_012_345_68;
        table.push(vec![Cell::Num(1.0 / 3.0), Cell::Num(v)]);
        let text = table.render_csv();
        let line = text.lines().nth(1).unwrap();
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells[0], 1.0 / 3.0);
        assert_eq!(cells[1], v);
    }

    #[test]
    fn inline_square_matrix_is_inferred() {
        let m = load_matrix("1,0,0,1", None, None, "sigma").unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.get(1, 1), 1.0);
        assert!(load_matrix("1,2,3", None, None, "sigma").is_err());
    }

    #[test]
    fn parameter_file_round_trips() {
        let params = WishartParams::new(
            vec![2.0, 1.0],
            Matrix::from_rows(vec![vec![1.0, 0.0], vec![-1.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let text = render_param_file(&params);
        let back = parse_param_file(&text).unwrap();
        assert_eq!(back.scales(), params.scales());
        assert_eq!(back.mean().data(), params.mean().data());
    }
}
