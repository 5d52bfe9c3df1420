//! Subcommand dispatch and the report emitted by the `qep` binary.
//!
//! [`run`] never panics on bad input: load and validation errors, solver
//! failures and resolution errors all land in [`Report::status`] and
//! [`Report::error`].

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    check_convex_values, check_lsc, check_open_graph, check_open_lower_sections, check_open_values,
    prop31_oracle, prop32_oracle, CheckReport, Grids, OracleReport, Space,
};
use crate::geometry::{make_grid, Grid, NodeSet, Point};
use crate::problem::{
    load_problem, Parameters, Problem, ProblemDescriptor, ResolvedParameters, BUILTINS,
};
use crate::selection::{
    setvalued_fixed_point, ContinuousSelection, FixedPointResult, SelectionError,
};
use crate::setmap::{f_of, SetValuedMap};
use crate::solver::{
    check_theorem, compute_fix, solve_ep, solve_qep_gmap, solve_qep_localization, HypothesisReport,
    NoSolution, QepProblem, QepSolution, SolverError, Theorem,
};

pub const TOOL: &str = "qep";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const FIXPOINT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Check,
    Analyze,
    Fixset,
    Selection,
    Fixpoint,
    ListProblems,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Localization,
    Gmap,
    #[default]
    Both,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    #[default]
    Lsc,
    Sections,
    Graph,
    Values,
    Convex,
    Prop31,
    Prop32,
}

/// Which map `analyze` inspects.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[default]
    Constraint,
    Secondary,
    Intersection,
    F,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub command: Command,
    pub problem: Option<String>,
    pub overrides: Parameters,
    pub method: MethodChoice,
    pub theorem: Theorem,
    pub check: CheckKind,
    pub target: Target,
}

impl Request {
    pub fn new(command: Command, problem: Option<&str>) -> Self {
        Request {
            command,
            problem: problem.map(str::to_string),
            overrides: Parameters::default(),
            method: MethodChoice::default(),
            theorem: Theorem::T31,
            check: CheckKind::default(),
            target: Target::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Ok,
    ValidationError,
    NoSolutionAtResolution,
    Error,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Ok => "OK",
            Status::ValidationError => "VALIDATION_ERROR",
            Status::NoSolutionAtResolution => "NO_SOLUTION_AT_RESOLUTION",
            Status::Error => "ERROR",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Error => 1,
            Status::ValidationError => 2,
            Status::NoSolutionAtResolution => 3,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixSummary {
    pub tol_fix: f64,
    pub nodes: usize,
    pub mask: Vec<Point>,
    pub interior: Vec<Point>,
    pub boundary: Vec<Point>,
    pub closed: bool,
    pub closedness_witnesses: Vec<Point>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpSummary {
    pub tol_eq: f64,
    pub solutions: Vec<Point>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodOutcome {
    Solutions(Vec<QepSolution>),
    NoSolution(Box<NoSolution>),
    Error(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolvePayload {
    pub fix: FixSummary,
    pub ep: EpSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub localization: Option<MethodOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gmap: Option<MethodOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods_agree: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelectionPayload {
    pub nodes: Vec<Point>,
    pub selection: ContinuousSelection,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixpointPayload {
    pub eps: f64,
    pub tol: f64,
    pub result: FixedPointResult,
    pub anchors: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemEntry {
    pub name: String,
    pub dim: usize,
    pub qep: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Solve(SolvePayload),
    Check(HypothesisReport),
    Analyze(CheckReport),
    Oracle(OracleReport),
    Fixset(FixSummary),
    Selection(SelectionPayload),
    Fixpoint(FixpointPayload),
    Problems(Vec<ProblemEntry>),
}

#[derive(Clone, Debug, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub request: Request,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameters: Option<ResolvedParameters>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<Payload>,
    pub timings: Timings,
}

struct Failure {
    status: Status,
    message: String,
    payload: Option<Payload>,
}

fn validation(message: impl ToString) -> Failure {
    Failure {
        status: Status::ValidationError,
        message: message.to_string(),
        payload: None,
    }
}

fn failure(message: impl ToString) -> Failure {
    Failure {
        status: Status::Error,
        message: message.to_string(),
        payload: None,
    }
}

fn points(grid: &Grid, set: impl IntoIterator<Item = usize>) -> Vec<Point> {
    set.into_iter().map(|i| grid.node(i).clone()).collect()
}

fn require_qep(p: &Problem) -> Result<QepProblem, Failure> {
    p.qep().ok_or_else(|| {
        validation(format!(
            "{} is not a quasiequilibrium problem (domain differs from C)",
            p.name()
        ))
    })
}

fn grid_on(body: &crate::geometry::ConvexBody, h: f64) -> Result<Grid, Failure> {
    make_grid(body, h).map_err(validation)
}

fn fix_summary(q: &QepProblem, grid: &Grid, tol_fix: f64) -> Result<FixSummary, Failure> {
    let fix = compute_fix(&q.k, grid, tol_fix).map_err(solver_failure)?;
    Ok(FixSummary {
        tol_fix,
        nodes: grid.len(),
        mask: points(grid, fix.mask.iter()),
        interior: points(grid, fix.interior().iter()),
        boundary: points(grid, fix.boundary().iter()),
        closed: fix.closed,
        closedness_witnesses: points(grid, fix.closedness_witnesses.iter().copied()),
    })
}

fn solver_failure(e: SolverError) -> Failure {
    match e {
        SolverError::Invalid(_) | SolverError::Diagonal { .. } => validation(e),
        other => failure(other),
    }
}

fn outcome(r: Result<Vec<QepSolution>, SolverError>) -> MethodOutcome {
    match r {
        Ok(s) => MethodOutcome::Solutions(s),
        Err(SolverError::NoSolution(ns)) => MethodOutcome::NoSolution(ns),
        Err(e) => MethodOutcome::Error(e.to_string()),
    }
}

fn run_solve(
    p: &Problem,
    r: &ResolvedParameters,
    method: MethodChoice,
) -> Result<Payload, Failure> {
    let q = require_qep(p)?;
    let grid = grid_on(&p.body, r.h)?;
    let params = r.solver();
    let fix = fix_summary(&q, &grid, r.tol_fix)?;
    let ep = solve_ep(&q.f, &q.body, &grid, r.tol_eq).map_err(solver_failure)?;
    let ep = EpSummary {
        tol_eq: r.tol_eq,
        solutions: points(&grid, ep.solutions.iter().copied()),
    };
    let loc = matches!(method, MethodChoice::Localization | MethodChoice::Both)
        .then(|| outcome(solve_qep_localization(&q, &grid, &params)));
    let gm = matches!(method, MethodChoice::Gmap | MethodChoice::Both)
        .then(|| outcome(solve_qep_gmap(&q, &grid, &params)));
    let agree = match (&loc, &gm) {
        (Some(MethodOutcome::Solutions(a)), Some(MethodOutcome::Solutions(b))) => Some(a == b),
        (Some(MethodOutcome::NoSolution(_)), Some(MethodOutcome::NoSolution(_))) => Some(true),
        (Some(_), Some(_)) => Some(false),
        _ => None,
    };
    let payload = SolvePayload {
        fix,
        ep,
        localization: loc,
        gmap: gm,
        methods_agree: agree,
    };
    let failure_of = |o: &MethodOutcome| match o {
        MethodOutcome::Solutions(_) => None,
        MethodOutcome::NoSolution(ns) => Some((
            Status::NoSolutionAtResolution,
            SolverError::NoSolution(ns.clone()).to_string(),
        )),
        MethodOutcome::Error(e) => Some((Status::Error, e.clone())),
    };
    let worst = [&payload.localization, &payload.gmap]
        .into_iter()
        .flatten()
        .filter_map(failure_of)
        .max_by_key(|(status, _)| *status == Status::Error);
    if let Some((status, message)) = worst {
        return Err(Failure {
            status,
            message,
            payload: Some(Payload::Solve(payload)),
        });
    }
    Ok(Payload::Solve(payload))
}

fn analysis_target(p: &Problem, target: Target) -> Result<SetValuedMap, Failure> {
    match target {
        Target::Constraint => Ok(p.constraint.clone()),
        Target::Secondary => p
            .secondary
            .clone()
            .ok_or_else(|| validation("problem has no secondary_map")),
        Target::Intersection => {
            let s = p
                .secondary
                .as_ref()
                .ok_or_else(|| validation("problem has no secondary_map"))?;
            p.constraint.intersect(s).map_err(validation)
        }
        Target::F => {
            require_qep(p)?;
            f_of(&p.f, &p.body, 0.0).map_err(validation)
        }
    }
}

fn run_analyze(
    p: &Problem,
    r: &ResolvedParameters,
    check: CheckKind,
    target: Target,
) -> Result<Payload, Failure> {
    let dom = grid_on(&p.domain, r.h)?;
    let cod = grid_on(&p.body, r.h)?;
    let grids = Grids {
        domain: &dom,
        codomain: &cod,
    };
    let all = NodeSet::full(dom.len());
    if let CheckKind::Prop31 | CheckKind::Prop32 = check {
        let s = p
            .secondary
            .as_ref()
            .ok_or_else(|| validation("oracles need a secondary_map"))?;
        let rep = if check == CheckKind::Prop31 {
            prop31_oracle(&p.constraint, s, grids, r.eps)
        } else {
            prop32_oracle(&p.constraint, s, grids, r.eps)
        };
        return rep.map(Payload::Oracle).map_err(validation);
    }
    let map = analysis_target(p, target)?;
    let rep = match check {
        CheckKind::Lsc => check_lsc(&map, grids, &all, r.eps),
        CheckKind::Sections => check_open_lower_sections(&map, grids, &all),
        CheckKind::Graph => check_open_graph(&map, grids, &all, r.eps),
        CheckKind::Values => check_open_values(&map, grids, &all, Space::InC),
        CheckKind::Convex => check_convex_values(&map, grids, &all),
        CheckKind::Prop31 | CheckKind::Prop32 => unreachable!("handled above"),
    };
    rep.map(Payload::Analyze).map_err(validation)
}

fn selection_failure(e: SelectionError) -> Failure {
    match e {
        SelectionError::Eps(_) | SelectionError::NotSelfMap => validation(e),
        other => failure(other),
    }
}

fn run_selection(p: &Problem, r: &ResolvedParameters) -> Result<Payload, Failure> {
    let dom = grid_on(&p.domain, r.h)?;
    let cod = grid_on(&p.body, r.h)?;
    let sel = crate::selection::michael_selection(
        &p.constraint,
        Grids {
            domain: &dom,
            codomain: &cod,
        },
        r.eps,
    )
    .map_err(selection_failure)?;
    Ok(Payload::Selection(SelectionPayload {
        nodes: dom.nodes().to_vec(),
        selection: sel,
    }))
}

fn run_fixpoint(p: &Problem, r: &ResolvedParameters) -> Result<Payload, Failure> {
    if !p.is_qep() {
        return Err(validation("fixpoint needs a self-map of C"));
    }
    let grid = grid_on(&p.body, r.h)?;
    let (result, sel) = setvalued_fixed_point(&p.constraint, &grid, r.eps, FIXPOINT_TOL)
        .map_err(selection_failure)?;
    Ok(Payload::Fixpoint(FixpointPayload {
        eps: r.eps,
        tol: FIXPOINT_TOL,
        result,
        anchors: sel.anchors.len(),
    }))
}

fn list_problems() -> Payload {
    Payload::Problems(
        BUILTINS
            .iter()
            .map(|n| {
                let p = load_problem(n).expect("builtins compile");
                ProblemEntry {
                    name: n.to_string(),
                    dim: p.descriptor.dim,
                    qep: p.is_qep(),
                }
            })
            .collect(),
    )
}

/// Runs one subcommand; the report is deterministic apart from `timings`.
pub fn run(req: &Request) -> Report {
    let start = Instant::now();
    let mut report = Report {
        tool: TOOL,
        version: VERSION,
        request: req.clone(),
        status: Status::Ok,
        error: None,
        problem: None,
        parameters: None,
        payload: None,
        timings: Timings { total_seconds: 0.0 },
    };
    let result = (|| -> Result<Payload, Failure> {
        if req.command == Command::ListProblems {
            return Ok(list_problems());
        }
        let name = req
            .problem
            .as_deref()
            .ok_or_else(|| validation("--problem is required"))?;
        let p = load_problem(name).map_err(validation)?;
        let r = p.parameters(&req.overrides);
        report.problem = Some(p.descriptor.clone());
        report.parameters = Some(r);
        if !(r.h > 0.0 && r.h.is_finite()) || r.eps < 0.0 || r.tol_fix < 0.0 || r.tol_eq < 0.0 {
            return Err(validation(
                "grid step must be positive and tolerances nonnegative",
            ));
        }
        match req.command {
            Command::Solve => run_solve(&p, &r, req.method),
            Command::Check => {
                let q = require_qep(&p)?;
                let grid = grid_on(&p.body, r.h)?;
                check_theorem(&q, &grid, req.theorem, &r.solver())
                    .map(Payload::Check)
                    .map_err(solver_failure)
            }
            Command::Analyze => run_analyze(&p, &r, req.check, req.target),
            Command::Fixset => {
                let q = require_qep(&p)?;
                let grid = grid_on(&p.body, r.h)?;
                fix_summary(&q, &grid, r.tol_fix).map(Payload::Fixset)
            }
            Command::Selection => run_selection(&p, &r),
            Command::Fixpoint => run_fixpoint(&p, &r),
            Command::ListProblems => unreachable!("handled above"),
        }
    })();
    match result {
        Ok(payload) => report.payload = Some(payload),
        Err(f) => {
            report.status = f.status;
            report.error = Some(f.message);
            report.payload = f.payload;
        }
    }
    report.timings.total_seconds = start.elapsed().as_secs_f64();
    report
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// The report with the timing field zeroed, for byte comparison.
    pub fn without_timings(&self) -> Report {
        let mut r = self.clone();
        r.timings.total_seconds = 0.0;
        r
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let cmd = serde_json::to_value(self.request.command).expect("command serializes");
        let _ = write!(
            s,
            "{} {} {}",
            self.tool,
            self.version,
            cmd.as_str().unwrap_or_default()
        );
        if let Some(p) = &self.problem {
            let _ = write!(s, " {}", p.name);
        }
        s.push('\n');
        let _ = writeln!(s, "status: {}", self.status.label());
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error: {e}");
        }
        if let Some(r) = &self.parameters {
            let _ = writeln!(
                s,
                "h = {}, tol_fix = {}, tol_eq = {:e}, eps = {}",
                r.h, r.tol_fix, r.tol_eq, r.eps
            );
        }
        let pts = |v: &[Point]| {
            v.iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        match &self.payload {
            None => {}
            Some(Payload::Solve(sp)) => {
                let _ = writeln!(
                    s,
                    "fix K: {} of {} nodes, boundary {}",
                    sp.fix.mask.len(),
                    sp.fix.nodes,
                    pts(&sp.fix.boundary)
                );
                let _ = writeln!(s, "ep solutions: {}", pts(&sp.ep.solutions));
                for (name, o) in [("localization", &sp.localization), ("gmap", &sp.gmap)] {
                    match o {
                        Some(MethodOutcome::Solutions(v)) => {
                            let _ = writeln!(s, "{name}: {} solution(s)", v.len());
                            for q in v {
                                let _ = writeln!(
                                    s,
                                    "  {} {:?} feasibility {:e} equilibrium {:e}",
                                    q.point, q.location, q.feasibility, q.equilibrium
                                );
                            }
                        }
                        Some(MethodOutcome::NoSolution(ns)) => {
                            let _ = writeln!(
                                s,
                                "{name}: no solution; {}",
                                ns.first_failure.clone().unwrap_or_default()
                            );
                        }
                        Some(MethodOutcome::Error(e)) => {
                            let _ = writeln!(s, "{name}: error: {e}");
                        }
                        None => {}
                    }
                }
                if let Some(a) = sp.methods_agree {
                    let _ = writeln!(s, "methods agree: {a}");
                }
            }
            Some(Payload::Check(h)) => {
                let _ = writeln!(s, "theorem {}", h.theorem.label());
                for c in &h.conditions {
                    let _ = writeln!(
                        s,
                        "  {:<11} {:?} {} [{}] {}",
                        c.id,
                        c.status,
                        c.statement,
                        c.region,
                        pts(&c.witnesses)
                    );
                }
            }
            Some(Payload::Analyze(c)) => write_check(&mut s, c),
            Some(Payload::Oracle(o)) => {
                let _ = writeln!(s, "{}: {:?}", o.oracle, o.verdict);
                if let Some(r) = &o.reason {
                    let _ = writeln!(s, "  {r}");
                }
                for c in o.preconditions.iter().chain(&o.intersection) {
                    write_check(&mut s, c);
                }
            }
            Some(Payload::Fixset(f)) => {
                let _ = writeln!(
                    s,
                    "mask ({} of {} nodes): {}",
                    f.mask.len(),
                    f.nodes,
                    pts(&f.mask)
                );
                let _ = writeln!(s, "boundary: {}", pts(&f.boundary));
                let _ = writeln!(s, "closed: {}", f.closed);
            }
            Some(Payload::Selection(sp)) => {
                let sel = &sp.selection;
                let _ = writeln!(
                    s,
                    "{} anchors at step {} ({} rejected), max containment {:e}, lipschitz estimate {}",
                    sel.anchors.len(),
                    sel.anchor_step,
                    sel.rejected.len(),
                    sel.max_containment(),
                    sel.lipschitz_estimate
                );
                for a in &sel.anchors {
                    let _ = writeln!(s, "  {} -> {}", a.x, a.y);
                }
            }
            Some(Payload::Fixpoint(fp)) => {
                let _ = writeln!(
                    s,
                    "x* = {} residual {:e} ({:?}, {} iterations)",
                    fp.result.point, fp.result.residual, fp.result.method, fp.result.iterations
                );
            }
            Some(Payload::Problems(v)) => {
                for e in v {
                    let _ = writeln!(
                        s,
                        "{:<24} dim {} {}",
                        e.name,
                        e.dim,
                        if e.qep { "qep" } else { "fixture" }
                    );
                }
            }
        }
        s
    }
}

fn write_check(s: &mut String, c: &CheckReport) {
    let verdict = serde_json::to_value(c.verdict).expect("verdict serializes");
    let _ = writeln!(
        s,
        "{}: {} ({} checked, {} violation(s))",
        c.checker,
        verdict.as_str().unwrap_or_default(),
        c.checked,
        c.total_violations
    );
    for v in c.violations.iter().take(5) {
        let _ = writeln!(
            s,
            "  x = {} y = {} other = {} magnitude {}",
            v.x, v.y, v.other, v.magnitude
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_both_on_reflect() {
        let r = run(&Request::new(Command::Solve, Some("example-3.1-k-reflect")));
        assert_eq!(r.status, Status::Ok, "{:?}", r.error);
        let Some(Payload::Solve(sp)) = &r.payload else {
            panic!()
        };
        assert_eq!(sp.methods_agree, Some(true));
        let Some(MethodOutcome::Solutions(v)) = &sp.localization else {
            panic!()
        };
        assert_eq!(
            v.iter().map(|s| s.point.0[0]).collect::<Vec<_>>(),
            vec![0.5]
        );
    }

    #[test]
    fn fixset_on_moving_box() {
        let r = run(&Request::new(Command::Fixset, Some("qep-movingbox")));
        let Some(Payload::Fixset(f)) = &r.payload else {
            panic!("{:?}", r.error)
        };
        let xs: Vec<f64> = f.mask.iter().map(|p| p.0[0]).collect();
        assert_eq!(xs.first(), Some(&0.0));
        assert!((xs.last().unwrap() - 0.5).abs() <= 0.01 + 1e-12);
    }

    #[test]
    fn status_codes() {
        let r = run(&Request::new(Command::Solve, Some("nope")));
        assert_eq!(r.exit_code(), 2);
        let r = run(&Request::new(Command::Solve, Some("example-3.3")));
        assert_eq!(r.exit_code(), 2);
        let r = run(&Request::new(Command::Solve, None));
        assert_eq!(r.exit_code(), 2);
        assert_eq!(
            run(&Request::new(Command::ListProblems, None)).exit_code(),
            0
        );
    }

    #[test]
    fn deterministic_modulo_timing() {
        let mut req = Request::new(Command::Analyze, Some("example-2.1-map2"));
        req.check = CheckKind::Lsc;
        let a = run(&req).without_timings().to_json();
        let b = run(&req).without_timings().to_json();
        assert_eq!(a, b);
        assert!(a.contains("\"verdict\": \"FAIL\""));
    }

    #[test]
    fn text_rendering_mentions_status() {
        let r = run(&Request::new(
            Command::Check,
            Some("example-3.1-k-identity"),
        ));
        let t = r.to_text();
        assert!(t.contains("status: OK"), "{t}");
        assert!(t.contains("ii "), "{t}");
    }
}
