//! Fixed-point sets of constraint maps, equilibrium and quasiequilibrium
//! solvers on grids, and hypothesis reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    check_convex_values, check_lsc, check_open_lower_sections, check_open_values, probe_depth,
    CheckError, CheckReport, Grids, Space, Verdict,
};
use crate::bifunction::{check_diagonal, Bifunction, DiagonalMode, EvalError};
use crate::geometry::{
    affine_hull_of_points, classify_mask, make_grid, ConvexBody, GeometryError, Grid, NodeSet,
    Point, Region, RegionClassification,
};
use crate::setmap::{f_hat_of, f_of, MapError, SetValuedMap};

/// Residual below which a probe counts as an exact fixed point in the
/// closedness test.
const EXACT_FIX_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("fix K is empty on the grid (tol_fix = {tol_fix})")]
    EmptyFix { tol_fix: f64 },
    #[error("f(x,x) != 0 at {count} node(s), first at x = {first}")]
    Diagonal { count: usize, first: Point },
    #[error("no verified solution at this resolution{}", .0.first_failure.as_ref().map(|c| format!("; first failing condition: {c}")).unwrap_or_default())]
    NoSolution(Box<NoSolution>),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoSolution {
    pub method: Method,
    pub first_failure: Option<String>,
    pub hypotheses: Option<HypothesisReport>,
}

/// A quasiequilibrium problem: body `C`, bifunction `f` and constraint map `K`.
#[derive(Clone, Debug)]
pub struct QepProblem {
    pub body: ConvexBody,
    pub f: Bifunction,
    pub k: SetValuedMap,
}

impl QepProblem {
    pub fn new(body: ConvexBody, f: Bifunction, k: SetValuedMap) -> Result<Self, SolverError> {
        if k.domain() != &body || k.codomain() != &body {
            return Err(SolverError::Invalid(
                "constraint map must be a self-map of C".into(),
            ));
        }
        if f.dim != body.dim() {
            return Err(SolverError::Invalid(format!(
                "bifunction dimension {} differs from body dimension {}",
                f.dim,
                body.dim()
            )));
        }
        Ok(QepProblem { body, f, k })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub tol_fix: f64,
    pub tol_eq: f64,
    pub eps: f64,
}

impl SolverParams {
    /// `tol_fix = h`, `eps = 3h`, and `tol_eq = 1e-9` for exactly evaluable
    /// bifunctions (`1e-6` otherwise).
    pub fn defaults(f: &Bifunction, h: f64) -> Self {
        SolverParams {
            tol_fix: h,
            tol_eq: default_tol_eq(f),
            eps: 3.0 * h,
        }
    }
}

pub fn default_tol_eq(f: &Bifunction) -> f64 {
    if f.is_exact() {
        1e-9
    } else {
        1e-6
    }
}

#[derive(Clone, Debug)]
pub struct FixData {
    pub tol_fix: f64,
    pub mask: NodeSet,
    pub classification: RegionClassification,
    /// `dist(x, K(x))` per node.
    pub residuals: Vec<f64>,
    pub closed: bool,
    /// Complement nodes where fixed points accumulate.
    pub closedness_witnesses: Vec<usize>,
}

impl FixData {
    pub fn interior(&self) -> NodeSet {
        self.classification.interior()
    }

    pub fn boundary(&self) -> NodeSet {
        self.classification.boundary()
    }
}

/// Nodes with `dist(x, K(x)) <= tol_fix`, classified relative to `C`.
pub fn compute_fix(k: &SetValuedMap, grid: &Grid, tol_fix: f64) -> Result<FixData, SolverError> {
    if !(tol_fix >= 0.0) {
        return Err(SolverError::Invalid(format!(
            "tol_fix must be nonnegative, got {tol_fix}"
        )));
    }
    let residuals: Vec<f64> = grid
        .nodes()
        .par_iter()
        .map(|x| k.distance(x, x, grid))
        .collect::<Result<_, _>>()?;
    let mask = NodeSet::from_mask(residuals.iter().map(|r| *r <= tol_fix).collect());
    if mask.is_empty() {
        return Err(SolverError::EmptyFix { tol_fix });
    }
    let classification = classify_mask(&mask, grid);
    let depth = probe_depth(grid.step());
    let mut closedness_witnesses = Vec::new();
    for z in 0..grid.len() {
        if mask.contains(z) {
            continue;
        }
        let xz = grid.node(z);
        for &w in grid.neighbors(z) {
            if !mask.contains(w) {
                continue;
            }
            let mut all_fixed = true;
            for j in 1..=depth {
                let p = xz.lerp(grid.node(w), 0.5f64.powi(j as i32));
                if k.distance(&p, &p, grid)? > EXACT_FIX_TOL {
                    all_fixed = false;
                    break;
                }
            }
            if all_fixed {
                closedness_witnesses.push(z);
                break;
            }
        }
    }
    Ok(FixData {
        tol_fix,
        closed: closedness_witnesses.is_empty(),
        mask,
        classification,
        residuals,
        closedness_witnesses,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpReport {
    pub tol_eq: f64,
    /// `min_y f(x, y)` over grid nodes, per node.
    #[serde(with = "crate::floats::vec")]
    pub residuals: Vec<f64>,
    pub solutions: Vec<usize>,
}

fn require_diagonal(f: &Bifunction, grid: &Grid) -> Result<(), SolverError> {
    let d = check_diagonal(f, grid, DiagonalMode::Full, None).expect("full mode needs no mask");
    if let Some(v) = d.violations.first() {
        return Err(SolverError::Diagonal {
            count: d.violations.len(),
            first: v.x.clone(),
        });
    }
    Ok(())
}

/// Grid nodes `x` with `min_y f(x,y) >= -tol_eq`.
pub fn solve_ep(
    f: &Bifunction,
    body: &ConvexBody,
    grid: &Grid,
    tol_eq: f64,
) -> Result<EpReport, SolverError> {
    if grid.body() != body {
        return Err(SolverError::Invalid(
            "grid was built on a different body".into(),
        ));
    }
    require_diagonal(f, grid)?;
    let residuals: Vec<f64> = grid
        .nodes()
        .par_iter()
        .map(|x| {
            let mut best = f64::INFINITY;
            for y in grid.nodes() {
                best = best.min(f.eval(x, y)?);
            }
            Ok(best)
        })
        .collect::<Result<_, EvalError>>()?;
    let solutions = (0..grid.len())
        .filter(|&i| residuals[i] >= -tol_eq)
        .collect();
    Ok(EpReport {
        tol_eq,
        residuals,
        solutions,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Location {
    InteriorEp,
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QepSolution {
    pub node: usize,
    pub point: Point,
    /// `dist(x, K(x))`.
    #[serde(with = "crate::floats")]
    pub feasibility: f64,
    /// `min f(x, y)` over the sample of `K(x)`.
    #[serde(with = "crate::floats")]
    pub equilibrium: f64,
    pub location: Location,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Localization,
    Gmap,
}

/// `min f(x, y)` over the sampled value `K(x)`, `+∞` for an empty sample.
pub fn equilibrium_residual(p: &QepProblem, x: &Point, grid: &Grid) -> Result<f64, SolverError> {
    let mut best = f64::INFINITY;
    for y in p.k.sample(x, grid)?.points(grid) {
        best = best.min(p.f.eval(x, &y)?);
    }
    Ok(best)
}

/// Fix-set boundary used by both methods: all of `fix K` when its interior
/// is empty.
fn effective_regions(fix: &FixData) -> (NodeSet, NodeSet) {
    let interior = fix.interior();
    if interior.is_empty() {
        (interior, fix.mask.clone())
    } else {
        (interior, fix.boundary())
    }
}

fn verify(
    p: &QepProblem,
    grid: &Grid,
    fix: &FixData,
    params: &SolverParams,
    candidates: &[(usize, Location)],
) -> Result<Vec<QepSolution>, SolverError> {
    let checked: Vec<Option<QepSolution>> = candidates
        .par_iter()
        .map(|&(i, location)| {
            let x = grid.node(i);
            let feasibility = fix.residuals[i];
            if feasibility > params.tol_fix {
                return Ok(None);
            }
            let equilibrium = equilibrium_residual(p, x, grid)?;
            if equilibrium < -params.tol_eq {
                return Ok(None);
            }
            Ok(Some(QepSolution {
                node: i,
                point: x.clone(),
                feasibility,
                equilibrium,
                location,
            }))
        })
        .collect::<Result<_, SolverError>>()?;
    let mut out: Vec<QepSolution> = checked.into_iter().flatten().collect();
    out.sort_by_key(|s| s.node);
    Ok(out)
}

fn no_solution(p: &QepProblem, grid: &Grid, params: &SolverParams, method: Method) -> SolverError {
    let hypotheses = check_theorem(p, grid, Theorem::T31, params).ok();
    let first_failure = hypotheses.as_ref().and_then(|h| h.first_failure());
    SolverError::NoSolution(Box::new(NoSolution {
        method,
        first_failure,
        hypotheses,
    }))
}

/// Candidates are the fix-set boundary plus interior fix nodes solving the
/// equilibrium problem on `C`; each is re-verified against `K(x)`.
pub fn solve_qep_localization(
    p: &QepProblem,
    grid: &Grid,
    params: &SolverParams,
) -> Result<Vec<QepSolution>, SolverError> {
    let fix = compute_fix(&p.k, grid, params.tol_fix)?;
    let ep = solve_ep(&p.f, &p.body, grid, params.tol_eq)?;
    let (interior, boundary) = effective_regions(&fix);
    let ep_set = NodeSet::from_indices(grid.len(), ep.solutions.iter().copied());
    let mut candidates: Vec<(usize, Location)> = interior
        .intersection(&ep_set)
        .iter()
        .map(|i| (i, Location::InteriorEp))
        .collect();
    candidates.extend(boundary.iter().map(|i| (i, Location::Boundary)));
    candidates.sort_by_key(|c| c.0);
    let sols = verify(p, grid, &fix, params, &candidates)?;
    if sols.is_empty() {
        return Err(no_solution(p, grid, params, Method::Localization));
    }
    Ok(sols)
}

/// Whether `G(x)` has a sampled point: `F(x)` on the interior of `fix K`,
/// `F(x) ∩ K(x)` on its boundary, `K(x)` elsewhere. `F` uses the margin
/// `tol_eq`.
fn g_nonempty(
    p: &QepProblem,
    grid: &Grid,
    x: &Point,
    region: Region,
    tol_eq: f64,
) -> Result<bool, SolverError> {
    let below = |y: &Point| -> Result<bool, SolverError> { Ok(p.f.eval(x, y)? < -tol_eq) };
    match region {
        Region::Interior => {
            for y in grid.nodes() {
                if below(y)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Region::Boundary => {
            for y in p.k.sample(x, grid)?.points(grid) {
                if below(&y)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Region::Outside => Ok(!p.k.sample(x, grid)?.is_empty()),
    }
}

/// Nodes where the sampled `G(x)` is empty, re-verified.
pub fn solve_qep_gmap(
    p: &QepProblem,
    grid: &Grid,
    params: &SolverParams,
) -> Result<Vec<QepSolution>, SolverError> {
    let fix = compute_fix(&p.k, grid, params.tol_fix)?;
    require_diagonal(&p.f, grid)?;
    let (interior, boundary) = effective_regions(&fix);
    let region_of = |i: usize| {
        if interior.contains(i) {
            Region::Interior
        } else if boundary.contains(i) {
            Region::Boundary
        } else {
            Region::Outside
        }
    };
    let empties: Vec<Option<(usize, Location)>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let region = region_of(i);
            if g_nonempty(p, grid, grid.node(i), region, params.tol_eq)? {
                return Ok(None);
            }
            let location = match region {
                Region::Boundary => Location::Boundary,
                _ => Location::InteriorEp,
            };
            Ok(Some((i, location)))
        })
        .collect::<Result<_, SolverError>>()?;
    let candidates: Vec<(usize, Location)> = empties.into_iter().flatten().collect();
    let sols = verify(p, grid, &fix, params, &candidates)?;
    if sols.is_empty() {
        return Err(no_solution(p, grid, params, Method::Gmap));
    }
    Ok(sols)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    #[serde(rename = "3.1")]
    T31,
    #[serde(rename = "3.2")]
    T32,
    #[serde(rename = "3.3")]
    T33,
    #[serde(rename = "3.4")]
    T34,
}

impl Theorem {
    pub fn parse(s: &str) -> Option<Theorem> {
        Some(match s {
            "3.1" => Theorem::T31,
            "3.2" => Theorem::T32,
            "3.3" => Theorem::T33,
            "3.4" => Theorem::T34,
            _ => return None,
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            Theorem::T31 => "3.1",
            Theorem::T32 => "3.2",
            Theorem::T33 => "3.3",
            Theorem::T34 => "3.4",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConditionStatus {
    PassAtResolution,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionResult {
    /// `K.lsc`, `K.nonempty`, `K.convex`, `fix.closed`, `C.polytope`, or the
    /// roman numeral of a numbered condition.
    pub id: String,
    pub statement: String,
    pub region: String,
    pub status: ConditionStatus,
    pub witnesses: Vec<Point>,
    pub report: Option<CheckReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub theorem: Theorem,
    pub conditions: Vec<ConditionResult>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.conditions
            .iter()
            .all(|c| c.status == ConditionStatus::PassAtResolution)
    }

    pub fn condition(&self, id: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.id == id)
    }

    pub fn first_failure(&self) -> Option<String> {
        self.conditions
            .iter()
            .find(|c| c.status != ConditionStatus::PassAtResolution)
            .map(|c| format!("{} ({}): {:?}", c.id, c.statement, c.status))
    }
}

fn from_check(id: &str, statement: &str, region: &str, r: CheckReport) -> ConditionResult {
    let mut witnesses: Vec<Point> = Vec::new();
    for v in &r.violations {
        if !witnesses.contains(&v.x) {
            witnesses.push(v.x.clone());
        }
    }
    ConditionResult {
        id: id.into(),
        statement: statement.into(),
        region: region.into(),
        status: match r.verdict {
            Verdict::PassAtResolution => ConditionStatus::PassAtResolution,
            Verdict::Fail => ConditionStatus::Fail,
        },
        witnesses,
        report: Some(r),
    }
}

fn plain(
    id: &str,
    statement: &str,
    region: &str,
    status: ConditionStatus,
    witnesses: Vec<Point>,
) -> ConditionResult {
    ConditionResult {
        id: id.into(),
        statement: statement.into(),
        region: region.into(),
        status,
        witnesses,
        report: None,
    }
}

fn fix_region(fix: &FixData) -> (NodeSet, NodeSet) {
    (fix.mask.clone(), effective_regions(fix).1)
}

/// Runs the common conditions on `K` and `fix K`, then the numbered
/// conditions of the chosen theorem on their regions.
pub fn check_theorem(
    p: &QepProblem,
    grid: &Grid,
    which: Theorem,
    params: &SolverParams,
) -> Result<HypothesisReport, SolverError> {
    let gr = Grids::same(grid);
    let all = NodeSet::full(grid.len());
    let eps = params.eps;
    let mut out = Vec::new();

    out.push(from_check(
        "K.lsc",
        "K is lower semicontinuous",
        "C",
        check_lsc(&p.k, gr, &all, eps)?,
    ));
    let mut empty_at = Vec::new();
    for x in grid.nodes() {
        if p.k.sample(x, grid)?.is_empty() {
            empty_at.push(x.clone());
        }
    }
    out.push(plain(
        "K.nonempty",
        "K has nonempty values",
        "C",
        if empty_at.is_empty() {
            ConditionStatus::PassAtResolution
        } else {
            ConditionStatus::Fail
        },
        empty_at,
    ));
    out.push(from_check(
        "K.convex",
        "K has convex values",
        "C",
        check_convex_values(&p.k, gr, &all)?,
    ));

    let fix = match compute_fix(&p.k, grid, params.tol_fix) {
        Ok(f) => f,
        Err(SolverError::EmptyFix { .. }) => {
            out.push(plain(
                "fix.closed",
                "fix K is closed",
                "C",
                ConditionStatus::NotApplicable,
                vec![],
            ));
            return Ok(HypothesisReport {
                theorem: which,
                conditions: out,
            });
        }
        Err(e) => return Err(e),
    };
    out.push(plain(
        "fix.closed",
        "fix K is closed",
        "C",
        if fix.closed {
            ConditionStatus::PassAtResolution
        } else {
            ConditionStatus::Fail
        },
        fix.closedness_witnesses
            .iter()
            .map(|&i| grid.node(i).clone())
            .collect(),
    ));

    let (on_fix, on_bd) = fix_region(&fix);
    let big_f = f_of(&p.f, &p.body, 0.0)?;
    match which {
        Theorem::T31 => {
            out.push(from_check(
                "i",
                "F is convex-valued on fix K",
                "fix K",
                check_convex_values(&big_f, gr, &on_fix)?,
            ));
            out.push(from_check(
                "ii",
                "F is lower semicontinuous on fix K",
                "fix K",
                check_lsc(&big_f, gr, &on_fix, eps)?,
            ));
            let fk = big_f.intersect(&p.k)?;
            out.push(from_check(
                "iii",
                "F ∩ K is lower semicontinuous on the boundary of fix K",
                "boundary of fix K",
                check_lsc(&fk, gr, &on_bd, eps)?,
            ));
        }
        Theorem::T32 => {
            let Some(a) = p.f.extension_body(&p.body) else {
                for (id, st) in [
                    ("i", "F̂ is convex-valued on fix K"),
                    ("ii", "F̂ has open lower sections on fix K"),
                    ("iii", "F̂(x) is open in aff C on the boundary of fix K"),
                ] {
                    out.push(plain(
                        id,
                        st,
                        "fix K",
                        ConditionStatus::NotApplicable,
                        vec![],
                    ));
                }
                return Ok(HypothesisReport {
                    theorem: which,
                    conditions: out,
                });
            };
            let a_grid = make_grid(&a, grid.step())?;
            let ext = Grids {
                domain: grid,
                codomain: &a_grid,
            };
            let f_hat = f_hat_of(&p.f, &p.body, 0.0)?;
            out.push(from_check(
                "i",
                "F̂ is convex-valued on fix K",
                "fix K",
                check_convex_values(&f_hat, ext, &on_fix)?,
            ));
            out.push(from_check(
                "ii",
                "F̂ has open lower sections on fix K",
                "fix K",
                check_open_lower_sections(&f_hat, ext, &on_fix)?,
            ));
            out.push(from_check(
                "iii",
                "F̂(x) is open in aff C on the boundary of fix K",
                "boundary of fix K",
                check_open_values(&f_hat, ext, &on_bd, Space::InAffC)?,
            ));
        }
        Theorem::T33 => {
            out.push(plain(
                "C.polytope",
                "C is a polytope",
                "C",
                if p.body.is_polytope() {
                    ConditionStatus::PassAtResolution
                } else {
                    ConditionStatus::NotApplicable
                },
                vec![],
            ));
            out.push(from_check(
                "i",
                "F is convex-valued on fix K",
                "fix K",
                check_convex_values(&big_f, gr, &on_fix)?,
            ));
            out.push(from_check(
                "ii",
                "F has open lower sections on fix K",
                "fix K",
                check_open_lower_sections(&big_f, gr, &on_fix)?,
            ));
            out.push(from_check(
                "iii",
                "F(x) is open in C on the boundary of fix K",
                "boundary of fix K",
                check_open_values(&big_f, gr, &on_bd, Space::InC)?,
            ));
        }
        Theorem::T34 => {
            out.push(from_check(
                "i",
                "F is convex-valued on fix K",
                "fix K",
                check_convex_values(&big_f, gr, &on_fix)?,
            ));
            out.push(from_check(
                "ii",
                "F is lower semicontinuous on fix K",
                "fix K",
                check_lsc(&big_f, gr, &on_fix, eps)?,
            ));
            let hull_c = p.body.affine_hull();
            let mut bad = Vec::new();
            for i in on_bd.iter() {
                let x = grid.node(i);
                let pts = p.k.sample(x, grid)?.points(grid);
                let same = affine_hull_of_points(&pts)
                    .is_some_and(|a| a.dim() == hull_c.dim() && a.same_as(&hull_c, 1e-9));
                if !same {
                    bad.push(x.clone());
                }
            }
            out.push(plain(
                "iii",
                "aff K(x) = aff C on the boundary of fix K",
                "boundary of fix K",
                if bad.is_empty() {
                    ConditionStatus::PassAtResolution
                } else {
                    ConditionStatus::Fail
                },
                bad,
            ));
            out.push(from_check(
                "iv",
                "F(x) is open in C on the boundary of fix K",
                "boundary of fix K",
                check_open_values(&big_f, gr, &on_bd, Space::InC)?,
            ));
        }
    }
    Ok(HypothesisReport {
        theorem: which,
        conditions: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifunction::parse;
    use crate::setmap::MapKind;

    fn unit() -> ConvexBody {
        ConvexBody::interval(0.0, 1.0)
    }

    fn moving_box(f: &str) -> QepProblem {
        let c = unit();
        let k = SetValuedMap::on(
            &c,
            MapKind::Box {
                lo: vec![parse("0").unwrap()],
                hi: vec![parse("(x1 + 1) / 3").unwrap()],
            },
        )
        .unwrap();
        QepProblem::new(c, Bifunction::parse(f, 1).unwrap(), k).unwrap()
    }

    fn xs(grid: &Grid, nodes: &NodeSet) -> Vec<f64> {
        nodes.iter().map(|i| grid.node(i).0[0]).collect()
    }

    #[test]
    fn fix_of_constant_and_reflection() {
        let c = unit();
        let g = make_grid(&c, 0.1).unwrap();
        let fix = compute_fix(&SetValuedMap::whole(&c), &g, 0.1).unwrap();
        assert_eq!(fix.mask.len(), g.len());
        assert!(fix.boundary().is_empty());
        let k = SetValuedMap::on(&c, MapKind::Singleton(vec![parse("1 - x1").unwrap()])).unwrap();
        let fix = compute_fix(&k, &g, 0.0).unwrap();
        assert_eq!(xs(&g, &fix.mask), vec![0.5]);
        assert!(fix.closed);
    }

    #[test]
    fn fix_of_moving_box() {
        let p = moving_box("y1 - x1");
        let g = make_grid(&p.body, 0.1).unwrap();
        let fix = compute_fix(&p.k, &g, 0.0).unwrap();
        assert_eq!(xs(&g, &fix.mask), vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(xs(&g, &fix.boundary()), vec![0.5]);
    }

    #[test]
    fn ep_scans() {
        let c = unit();
        let g = make_grid(&c, 0.1).unwrap();
        let lin = Bifunction::parse("y1 - x1", 1).unwrap();
        assert_eq!(solve_ep(&lin, &c, &g, 1e-9).unwrap().solutions, vec![0]);
        let q = Bifunction::parse("(y1-0.3)^2 - (x1-0.3)^2", 1).unwrap();
        let s = solve_ep(&q, &c, &g, 1e-9).unwrap().solutions;
        assert_eq!(s.len(), 1);
        assert!((g.node(s[0]).0[0] - 0.3).abs() < 1e-12);
        let bad = Bifunction::parse("1", 1).unwrap();
        assert!(matches!(
            solve_ep(&bad, &c, &g, 1e-9),
            Err(SolverError::Diagonal { .. })
        ));
    }

    #[test]
    fn moving_box_methods() {
        let h = 0.01;
        for (f, expect, loc) in [
            ("y1 - x1", 0.0, Location::InteriorEp),
            ("x1 - y1", 0.5, Location::Boundary),
        ] {
            let p = moving_box(f);
            let g = make_grid(&p.body, h).unwrap();
            let params = SolverParams::defaults(&p.f, h);
            let a = solve_qep_localization(&p, &g, &params).unwrap();
            let b = solve_qep_gmap(&p, &g, &params).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), 1);
            assert!(
                (a[0].point.0[0] - expect).abs() <= h + 1e-9,
                "{f}: {:?}",
                a[0].point
            );
            assert_eq!(a[0].location, loc);
        }
    }

    #[test]
    fn no_solution_carries_hypotheses() {
        let c = unit();
        let k = SetValuedMap::whole(&c);
        let f = Bifunction::parse("cond(x1 < 0.5, x1 - y1, y1 - x1)", 1).unwrap();
        let p = QepProblem::new(c.clone(), f, k).unwrap();
        let g = make_grid(&c, 0.1).unwrap();
        let params = SolverParams::defaults(&p.f, 0.1);
        for out in [
            solve_qep_localization(&p, &g, &params),
            solve_qep_gmap(&p, &g, &params),
        ] {
            let Err(SolverError::NoSolution(ns)) = out else {
                panic!("expected NoSolution, got {out:?}");
            };
            let hyp = ns.hypotheses.expect("hypotheses attached");
            assert!(!hyp.all_pass());
            assert!(ns.first_failure.unwrap().starts_with("ii"));
        }
    }

    #[test]
    fn reflection_hypotheses_hold() {
        let c = unit();
        let k = SetValuedMap::on(&c, MapKind::Singleton(vec![parse("1 - x1").unwrap()])).unwrap();
        let f = Bifunction::parse("cond(x1 == 0, cond(y1 > 0, -1, 0), 0)", 1).unwrap();
        let p = QepProblem::new(c.clone(), f, k).unwrap();
        let g = make_grid(&c, 0.05).unwrap();
        let params = SolverParams::defaults(&p.f, 0.05);
        let r = check_theorem(&p, &g, Theorem::T31, &params).unwrap();
        assert!(r.all_pass(), "{:?}", r.first_failure());
        let s = solve_qep_localization(&p, &g, &params).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].point.0[0] - 0.5).abs() < 1e-12);
    }
}
