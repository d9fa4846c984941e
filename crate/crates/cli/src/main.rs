use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use meroconn::rational::{parse_constant, GaussianRational};
use meroconn::scenario::{
    bundled, check_expectations, parse_spec, run_analysis, AnalysisOptions, AnalysisReport, Command, DistinguishedRequest, GeodesicRequest,
    MonodromySystem, Scenario, Tolerances,
};
use meroconn::Error;
use num_complex::Complex64;

const EXIT_MISMATCH: u8 = 4;

#[derive(Parser)]
#[command(name = "meroconn", version, about = "Analyse meromorphic affine connections on a chart of C^n")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// Seed for every randomized sampling step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Comma-separated `name=value` tolerance overrides.
    #[arg(long, global = true, value_name = "LIST")]
    tol_overrides: Option<String>,

    /// Directory for report.json, summary.txt and traces/*.csv.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Compare verdicts with the scenario's [expect] section.
    #[arg(long, global = true)]
    check: bool,

    /// Override a scenario parameter, `name=value`.
    #[arg(long = "param", global = true, value_name = "NAME=VALUE")]
    params: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Args)]
struct Target {
    /// A `.conn` file or the name of a bundled scenario.
    scenario: String,
}

#[derive(Subcommand)]
enum Verb {
    /// Run every stage.
    Analyze(Target),
    Torsion(Target),
    Curvature(Target),
    /// Integrate a geodesic from the basepoint.
    Geodesic {
        #[command(flatten)]
        target: Target,
        /// Initial velocity, comma-separated constants.
        #[arg(long)]
        velocity: String,
        /// Final complex time.
        #[arg(long, default_value = "1")]
        t_end: String,
    },
    /// Integrate a distinguished curve from the identity frame at the basepoint.
    Distinguished {
        #[command(flatten)]
        target: Target,
        /// Direction in the frame, comma-separated constants.
        #[arg(long)]
        direction: String,
        #[arg(long, default_value_t = 2.0)]
        s_end: f64,
    },
    /// Spiral witnesses, strong spiral tests and the A01 classification.
    Spiral(Target),
    /// Killing subspace and its extension across the divisor.
    Killing(Target),
    /// Local monodromy around each divisor component.
    Monodromy {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_enum, default_value_t = SystemArg::Connection)]
        system: SystemArg,
    },
    /// Full analysis written to the output directory in every format.
    Report(Target),
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Connection,
    Killing,
}

struct Exit {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        Exit {
            code: e.exit_code() as u8,
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for Exit {
    fn from(error: anyhow::Error) -> Self {
        let code = error.downcast_ref::<Error>().map_or(1, |e| e.exit_code() as u8);
        Exit { code, error }
    }
}

fn load(name: &str, params: &[String]) -> Result<Scenario, Exit> {
    let text = if Path::new(name).is_file() {
        fs::read_to_string(name).with_context(|| format!("reading {name}"))?
    } else if let Some(t) = bundled(name) {
        t.to_string()
    } else {
        return Err(Error::Validation(format!("`{name}` is neither a file nor a bundled scenario")).into());
    };
    let mut spec = parse_spec(&text)?;
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("--param `{p}` is not name=value")))?;
        spec = spec.with_param(k.trim(), v.trim());
    }
    Ok(spec.build()?)
}

fn constants(text: &str, n: usize, what: &str) -> Result<Vec<GaussianRational>, Error> {
    let params = BTreeMap::new();
    let out = text
        .split(',')
        .map(|s| parse_constant(s.trim(), &params).map_err(|e| Error::Validation(format!("{what}: {}", e.message))))
        .collect::<Result<Vec<_>, _>>()?;
    if out.len() != n {
        return Err(Error::Validation(format!("{what}: expected {n} components, got {}", out.len())));
    }
    Ok(out)
}

/// Like [`constants`], but also accepts decimal literals.
fn numbers(text: &str, n: usize, what: &str) -> Result<Vec<Complex64>, Error> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map(|x| Complex64::new(x, 0.0)).ok())
        .collect::<Option<Vec<_>>>()
        .filter(|v| v.len() == n)
        .map_or_else(|| Ok(constants(text, n, what)?.iter().map(GaussianRational::to_c64).collect()), Ok)
}

fn write_outputs(dir: &Path, report: &AnalysisReport) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("report.json"), report.to_json()).context("writing report.json")?;
    fs::write(dir.join("summary.txt"), report.to_text()).context("writing summary.txt")?;
    if !report.traces.is_empty() {
        let traces = dir.join("traces");
        fs::create_dir_all(&traces).context("creating traces directory")?;
        for t in &report.traces {
            fs::write(traces.join(&t.name), &t.csv).with_context(|| format!("writing {}", t.name))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Exit> {
    let mut tolerances = Tolerances::default();
    if let Some(o) = &cli.tol_overrides {
        tolerances = tolerances.with_overrides(o)?;
    }
    let opts = AnalysisOptions {
        seed: cli.seed,
        tolerances,
    };
    let (name, command, out) = match &cli.verb {
        Verb::Analyze(t) => (&t.scenario, Some(Command::Analyze), cli.out.clone()),
        Verb::Torsion(t) => (&t.scenario, Some(Command::Torsion), cli.out.clone()),
        Verb::Curvature(t) => (&t.scenario, Some(Command::Curvature), cli.out.clone()),
        Verb::Geodesic { target, .. } => (&target.scenario, None, cli.out.clone()),
        Verb::Distinguished { target, .. } => (&target.scenario, None, cli.out.clone()),
        Verb::Spiral(t) => (&t.scenario, Some(Command::Spiral), cli.out.clone()),
        Verb::Killing(t) => (&t.scenario, Some(Command::Killing), cli.out.clone()),
        Verb::Monodromy { target, system } => (
            &target.scenario,
            Some(Command::Monodromy(match system {
                SystemArg::Connection => MonodromySystem::Connection,
                SystemArg::Killing => MonodromySystem::Killing,
            })),
            cli.out.clone(),
        ),
        Verb::Report(t) => (
            &t.scenario,
            Some(Command::Analyze),
            Some(cli.out.clone().unwrap_or_else(|| PathBuf::from("report"))),
        ),
    };
    let scenario = load(name, &cli.params)?;
    let n = scenario.nvars();
    let command = match (&cli.verb, command) {
        (_, Some(c)) => c,
        (Verb::Geodesic { velocity, t_end, .. }, None) => Command::Geodesic(GeodesicRequest {
            velocity: numbers(velocity, n, "--velocity")?,
            t_end: numbers(t_end, 1, "--t-end")?[0],
        }),
        (Verb::Distinguished { direction, s_end, .. }, None) => Command::Distinguished(DistinguishedRequest {
            direction: constants(direction, n, "--direction")?,
            s_end: *s_end,
        }),
        _ => unreachable!("every other verb names its command"),
    };

    let report = run_analysis(&scenario, &command, &opts);
    if let Some(dir) = &out {
        write_outputs(dir, &report)?;
    }
    match cli.format {
        Format::Json => print!("{}", report.to_json()),
        Format::Text => print!("{}", report.to_text()),
        Format::Csv => {
            if report.traces.is_empty() {
                eprintln!("no traces produced by `{}`", report.command);
            }
            for t in &report.traces {
                print!("{}", t.csv);
            }
        }
    }
    for f in &report.failures {
        eprintln!("error in {}: {}", f.stage, f.message);
    }

    let mut code = report.failure_code() as u8;
    if cli.check {
        let outcome = check_expectations(&scenario.spec, &report);
        for (key, expected, actual) in &outcome.mismatched {
            eprintln!("mismatch {key}: expected {expected}, got {actual}");
        }
        eprintln!(
            "check: {} matched, {} mismatched, {} not computed by this command",
            outcome.matched.len(),
            outcome.mismatched.len(),
            outcome.skipped.len()
        );
        if !outcome.passed() {
            code = EXIT_MISMATCH;
        }
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Exit { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
