mod eval;
mod job;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use conlap::harness::{run_suite, Suite, VerifyOptions};
use conlap::orthogonal::dimensions;
use serde::Serialize;

const VALIDATION: u8 = 2;
const VERIFICATION: u8 = 3;

/// Laplace-Beltrami operator on constraint manifolds.
#[derive(Parser)]
#[command(name = "conlap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the Laplacian at every point of a job file (JSON lines).
    Eval {
        #[arg(long)]
        job: PathBuf,
    },
    /// Run a verification suite and emit a JSON report.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
        /// Inclusive dimension range `A..B`, or a single `n`.
        #[arg(long, default_value = "2..4", value_parser = parse_range)]
        n: (usize, usize),
        /// Random draws per dimension.
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        /// Replace every check tolerance.
        #[arg(long, env = "CONLAP_TOL")]
        tol: Option<f64>,
        /// Geodesic-oracle step.
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print ambient dimension, constraint count and manifold dimension.
    Describe {
        #[arg(value_enum)]
        manifold: ManifoldArg,
        n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    LemmasSphere,
    LemmasOn,
    TheoremEquivalence,
    Eigenfunctions,
    Oracle,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::LemmasSphere => Suite::LemmasSphere,
            SuiteArg::LemmasOn => Suite::LemmasOn,
            SuiteArg::TheoremEquivalence => Suite::TheoremEquivalence,
            SuiteArg::Eigenfunctions => Suite::Eigenfunctions,
            SuiteArg::Oracle => Suite::Oracle,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ManifoldArg {
    Sphere,
    Orthogonal,
}

#[derive(Serialize)]
struct Description {
    manifold: ManifoldArg,
    n: usize,
    m: usize,
    k: usize,
    dim: usize,
    frame_shape: [usize; 2],
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.strip_prefix('=').unwrap_or(b)),
        None => (s, s),
    };
    let a: usize = a.trim().parse().map_err(|_| format!("bad range start in '{s}'"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad range end in '{s}'"))?;
    if a < 2 || b < a || b > 16 {
        return Err(format!("range '{s}' must satisfy 2 ≤ A ≤ B ≤ 16"));
    }
    Ok((a, b))
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("conlap: {msg}");
    ExitCode::from(code)
}

fn emit(out: Option<&Path>, text: &str) -> std::io::Result<()> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n")),
        None => writeln!(std::io::stdout().lock(), "{text}"),
    }
}

fn cmd_eval(path: &Path) -> ExitCode {
    let spec: job::JobSpec = match job::read_json(path) {
        Ok(s) => s,
        Err(e) => return fail(VALIDATION, e),
    };
    let base = path.parent().unwrap_or(Path::new("."));
    let prepared = match eval::prepare(spec, base) {
        Ok(p) => p,
        Err(e) => return fail(VALIDATION, e),
    };
    let (lines, code) = eval::run(&prepared);
    let mut stdout = std::io::stdout().lock();
    for line in lines {
        if let Err(e) = writeln!(stdout, "{line}") {
            return fail(1, e);
        }
    }
    ExitCode::from(code)
}

fn cmd_verify(suite: Suite, n: (usize, usize), seeds: usize, tol: Option<f64>, h: f64, out: Option<&Path>) -> ExitCode {
    if seeds == 0 {
        return fail(VALIDATION, "--seeds must be at least 1");
    }
    if !(1e-6..=1e-1).contains(&h) {
        return fail(VALIDATION, format!("--h {h} outside [1e-6, 1e-1]"));
    }
    if tol.is_some_and(|t| !(t.is_finite() && t >= 0.0)) {
        return fail(VALIDATION, "--tol must be a non-negative number");
    }
    let opts = VerifyOptions { n_min: n.0, n_max: n.1, seeds, tol_override: tol, h, ..Default::default() };
    let report = run_suite(suite, &opts);
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Err(e) = emit(out, &text) {
        return fail(1, e);
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(VERIFICATION)
    }
}

fn cmd_describe(manifold: ManifoldArg, n: usize) -> ExitCode {
    let (m, k) = match manifold {
        ManifoldArg::Sphere if n >= 2 => (n, 1),
        ManifoldArg::Orthogonal if n >= 2 => {
            let (m, k, _) = dimensions(n);
            (m, k)
        }
        _ => return fail(VALIDATION, "n must be at least 2"),
    };
    let d = Description { manifold, n, m, k, dim: m - k, frame_shape: [m, m - k] };
    println!("{}", serde_json::to_string(&d).expect("description serializes"));
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Eval { job } => cmd_eval(&job),
        Command::Verify { suite, n, seeds, tol, h, out } => cmd_verify(suite.into(), n, seeds, tol, h, out.as_deref()),
        Command::Describe { manifold, n } => cmd_describe(manifold, n),
    }
}
