use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qep_core::problem::Parameters;
use qep_core::report::{run, CheckKind, Command, MethodChoice, Request, Target};
use qep_core::solver::Theorem;

#[derive(Debug, Parser)]
#[command(
    name = "qep",
    version,
    about = "Grid-based quasiequilibrium solver and set-valued map checker"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Solve the quasiequilibrium problem by localization and/or the G-map.
    Solve(Common),
    /// Check the hypotheses of an existence theorem.
    Check(Common),
    /// Run one property checker or proposition oracle on a map.
    Analyze(Common),
    /// Fixed-point set of the constraint map and its boundary.
    Fixset(Common),
    /// Build an approximate continuous selection of the constraint map.
    Selection(Common),
    /// Fixed point of the constraint map through a continuous selection.
    Fixpoint(Common),
    /// List builtin problems.
    ListProblems(Output),
}

#[derive(Debug, Args)]
struct Common {
    /// Builtin name or path to a JSON problem descriptor.
    #[arg(long)]
    problem: String,
    /// Grid step h.
    #[arg(long = "grid-h")]
    grid_h: Option<f64>,
    /// Equilibrium tolerance.
    #[arg(long = "tol-eq")]
    tol_eq: Option<f64>,
    /// Fixed-point tolerance.
    #[arg(long = "tol-fix")]
    tol_fix: Option<f64>,
    /// Checker and selection radius; must exceed h.
    #[arg(long)]
    eps: Option<f64>,
    /// Solver used by `solve`.
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    method: MethodArg,
    /// Hypothesis set used by `check`: 3.1, 3.2, 3.3 or 3.4.
    #[arg(long, default_value = "3.1", value_parser = parse_theorem)]
    theorem: Theorem,
    /// Checker run by `analyze`.
    #[arg(long, value_enum, default_value_t = CheckArg::Lsc)]
    check: CheckArg,
    /// Map inspected by `analyze`.
    #[arg(long, value_enum, default_value_t = TargetArg::Constraint)]
    target: TargetArg,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct Output {
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Localization,
    Gmap,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CheckArg {
    Lsc,
    Sections,
    Graph,
    Values,
    Convex,
    Prop31,
    Prop32,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TargetArg {
    Constraint,
    Secondary,
    Intersection,
    F,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn parse_theorem(s: &str) -> Result<Theorem, String> {
    Theorem::parse(s)
        .ok_or_else(|| format!("unknown theorem '{s}' (expected 3.1, 3.2, 3.3 or 3.4)"))
}

fn request(command: Command, c: &Common) -> Request {
    let mut req = Request::new(command, Some(&c.problem));
    req.overrides = Parameters {
        h: c.grid_h,
        tol_fix: c.tol_fix,
        tol_eq: c.tol_eq,
        eps: c.eps,
    };
    req.method = match c.method {
        MethodArg::Localization => MethodChoice::Localization,
        MethodArg::Gmap => MethodChoice::Gmap,
        MethodArg::Both => MethodChoice::Both,
    };
    req.theorem = c.theorem;
    req.check = match c.check {
        CheckArg::Lsc => CheckKind::Lsc,
        CheckArg::Sections => CheckKind::Sections,
        CheckArg::Graph => CheckKind::Graph,
        CheckArg::Values => CheckKind::Values,
        CheckArg::Convex => CheckKind::Convex,
        CheckArg::Prop31 => CheckKind::Prop31,
        CheckArg::Prop32 => CheckKind::Prop32,
    };
    req.target = match c.target {
        TargetArg::Constraint => Target::Constraint,
        TargetArg::Secondary => Target::Secondary,
        TargetArg::Intersection => Target::Intersection,
        TargetArg::F => Target::F,
    };
    req
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> Result<u8> {
    let (req, output) = match &cli.command {
        Sub::Solve(c) => (request(Command::Solve, c), &c.output),
        Sub::Check(c) => (request(Command::Check, c), &c.output),
        Sub::Analyze(c) => (request(Command::Analyze, c), &c.output),
        Sub::Fixset(c) => (request(Command::Fixset, c), &c.output),
        Sub::Selection(c) => (request(Command::Selection, c), &c.output),
        Sub::Fixpoint(c) => (request(Command::Fixpoint, c), &c.output),
        Sub::ListProblems(o) => (Request::new(Command::ListProblems, None), o),
    };
    let report = run(&req);
    let mut text = match output.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &output.out {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    if let Some(e) = &report.error {
        eprintln!("{}: {e}", report.status.label());
    }
    Ok(report.exit_code() as u8)
}
