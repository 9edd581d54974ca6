//! Argument parsing and the four commands.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use statman_core::curvature::DEFAULT_ALPHAS;
use statman_core::{
    alpha_scan, run_diagnostics, sample_points, verify_constant_curvature_characterization,
    verify_trace_free_characterization, ConnectionKind, DiagnosticsConfig,
};

use crate::error::CliError;
use crate::eval::{evaluate, parse_point, render, Quantity};
use crate::manifest::{load, Loaded};
use crate::report::{render_alpha_scan, render_check, render_theorems, ReportDocument};

#[derive(Debug, Parser)]
#[command(name = "statman", version, about = "Diagnostics for statistical manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the structure, run the identity suite and every classifier.
    Check(RunArgs),
    /// Print one tensor at a point.
    Eval(EvalArgs),
    /// Conjugate symmetry and constant-curvature fits over a grid of α.
    AlphaScan(ScanArgs),
    /// Compare the equivalent characterizations of constant curvature.
    VerifyTheorems(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConnArg {
    Nabla,
    #[value(name = "nabla_star", alias = "nabla-star")]
    NablaStar,
    #[value(name = "levi_civita", alias = "levi-civita")]
    LeviCivita,
}

impl From<ConnArg> for ConnectionKind {
    fn from(c: ConnArg) -> Self {
        match c {
            ConnArg::Nabla => ConnectionKind::Nabla,
            ConnArg::NablaStar => ConnectionKind::NablaStar,
            ConnArg::LeviCivita => ConnectionKind::LeviCivita,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Manifold file (JSON).
    pub file: PathBuf,
    /// Number of sample points.
    #[arg(long, default_value_t = statman_core::diagnostics::DEFAULT_POINTS)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Defaults to the file's tolerance for the chart's jets.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also write the JSON report to this path.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Connection for the constant-curvature and projective checks.
    #[arg(long, value_enum, default_value = "nabla")]
    pub conn: ConnArg,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated α values.
    #[arg(long, allow_hyphen_values = true)]
    pub alphas: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub file: PathBuf,
    /// Comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    #[arg(long)]
    pub quantity: String,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "nabla")]
    pub conn: ConnArg,
}

/// What a command produced: its exit code, text for stdout and the report.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub text: String,
    pub report: ReportDocument,
}

/// Parses arguments, runs the command and prints its output. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    let json_path = match &cli.command {
        Command::Check(a) | Command::VerifyTheorems(a) => a.json.clone(),
        Command::AlphaScan(a) => a.run.json.clone(),
        Command::Eval(a) => a.json.clone(),
    };
    match execute(&cli.command) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(outcome.text.as_bytes());
            if let Some(path) = json_path {
                if let Err(e) = write_json(&path, &outcome.report) {
                    eprintln!("error: {e}");
                    return e.exit_code();
                }
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Caps the global rayon pool at `STATMAN_THREADS` when set.
fn configure_threads() -> Result<(), CliError> {
    let Some(raw) = std::env::var_os("STATMAN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .to_str()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("STATMAN_THREADS must be a positive integer, got {raw:?}")))?;
    // Fails only if a pool already exists, in which case it is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn write_json(path: &Path, report: &ReportDocument) -> Result<(), CliError> {
    std::fs::write(path, report.to_json()).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Check(a) => check(a),
        Command::Eval(a) => eval(a),
        Command::AlphaScan(a) => scan(a),
        Command::VerifyTheorems(a) => theorems(a),
    }
}

fn tolerance(a: &RunArgs, loaded: &Loaded) -> Result<f64, CliError> {
    match a.tol {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(CliError::Usage(format!("--tol must be positive, got {t}"))),
        Some(t) => Ok(t),
        None => Ok(loaded.default_tol()),
    }
}

fn prepare(a: &RunArgs) -> Result<(Loaded, f64), CliError> {
    if a.points == 0 {
        return Err(CliError::Usage("--points must be at least 1".into()));
    }
    let loaded = load(&a.file)?;
    let tol = tolerance(a, &loaded)?;
    Ok((loaded, tol))
}

fn document(command: &str, loaded: &Loaded, a: &RunArgs, tol: f64) -> ReportDocument {
    let mut doc = ReportDocument::new(command, loaded);
    doc.seed = Some(a.seed);
    doc.points = Some(a.points);
    doc.tol = Some(tol);
    doc
}

fn check(a: &RunArgs) -> Result<Outcome, CliError> {
    let (loaded, tol) = prepare(a)?;
    let config = DiagnosticsConfig {
        points: a.points,
        seed: a.seed,
        tol,
        connection: a.conn.into(),
        alphas: DEFAULT_ALPHAS.to_vec(),
    };
    let report = run_diagnostics(&loaded.chart, &config)?;
    let code = if !report.consistency_errors.is_empty() {
        3
    } else if report.passed() {
        0
    } else {
        1
    };
    let mut doc = document("check", &loaded, a, tol);
    doc.diagnostics = Some(report);
    Ok(Outcome {
        code,
        text: render_check(&doc),
        report: doc,
    })
}

fn theorems(a: &RunArgs) -> Result<Outcome, CliError> {
    let (loaded, tol) = prepare(a)?;
    let points = sample_points(loaded.chart.domain(), a.points, a.seed)?;
    let list = vec![
        verify_constant_curvature_characterization(&loaded.chart, &points, tol)?,
        verify_trace_free_characterization(&loaded.chart, &points, tol)?,
    ];
    let code = if list.iter().all(|t| !t.hypothesis_met || t.agree == Some(true)) {
        0
    } else {
        1
    };
    let mut doc = document("verify-theorems", &loaded, a, tol);
    doc.theorems = Some(list);
    Ok(Outcome {
        code,
        text: render_theorems(&doc),
        report: doc,
    })
}

fn parse_alphas(src: Option<&str>) -> Result<Vec<f64>, CliError> {
    let Some(src) = src else {
        return Ok(DEFAULT_ALPHAS.to_vec());
    };
    let values = src
        .split(',')
        .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| CliError::Usage(format!("cannot parse alphas '{src}'")))?;
    if values.is_empty() {
        return Err(CliError::Usage("--alphas needs at least one value".into()));
    }
    Ok(values)
}

fn scan(a: &ScanArgs) -> Result<Outcome, CliError> {
    let alphas = parse_alphas(a.alphas.as_deref())?;
    let (loaded, tol) = prepare(&a.run)?;
    let points = sample_points(loaded.chart.domain(), a.run.points, a.run.seed)?;
    let result = alpha_scan(&loaded.chart, &alphas, &points, tol)?;
    let mut doc = document("alpha-scan", &loaded, &a.run, tol);
    doc.alpha_scan = Some(result);
    Ok(Outcome {
        code: 0,
        text: render_alpha_scan(&doc),
        report: doc,
    })
}

fn eval(a: &EvalArgs) -> Result<Outcome, CliError> {
    let quantity: Quantity = a.quantity.parse()?;
    let loaded = load(&a.file)?;
    let point = parse_point(&a.point, loaded.chart.dim())?;
    let dump = evaluate(&loaded.chart, &point, quantity, a.conn.into())?;
    let text = render(&dump, loaded.chart.coords());
    let mut doc = ReportDocument::new("eval", &loaded);
    doc.tensor = Some(dump);
    Ok(Outcome {
        code: 0,
        text,
        report: doc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_lists() {
        assert_eq!(parse_alphas(Some("-1, 0,1")).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(parse_alphas(None).unwrap(), DEFAULT_ALPHAS.to_vec());
        assert!(parse_alphas(Some("1,,2")).is_err());
        assert!(parse_alphas(Some("nan")).is_err());
    }

    #[test]
    fn clap_accepts_negative_values() {
        let cli = Cli::try_parse_from(["statman", "eval", "f.json", "--point", "-0.5,1", "--quantity", "g"]).unwrap();
        match cli.command {
            Command::Eval(a) => assert_eq!(a.point, "-0.5,1"),
            other => panic!("{other:?}"),
        }
        let cli = Cli::try_parse_from(["statman", "alpha-scan", "f.json", "--alphas", "-1,0,1"]).unwrap();
        match cli.command {
            Command::AlphaScan(a) => assert_eq!(a.alphas.as_deref(), Some("-1,0,1")),
            other => panic!("{other:?}"),
        }
    }
}
