//! Finite-resolution falsifiers for continuity and openness of set-valued maps.
//!
//! A checker walks the domain nodes of a region, looks at the value sample
//! at each node and searches for a witness against the property. Every
//! candidate witness is confirmed along dyadic probes `x + 2^-k (x' - x)`,
//! `k = 0..K`, between a node and its lattice neighbor: a failure has to
//! persist as the probe approaches the node, so a jump that only shows up
//! across a full grid cell is not reported. `PassAtResolution` means no
//! witness was found.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{affine_hull_of_points, Grid, NodeSet, Point};
use crate::setmap::{MapError, SetValuedMap};

/// Probes stop before they get closer than this to the base point, so that
/// closed-form memberships with tolerance `1e-9` do not blur the test.
const PROBE_FLOOR: f64 = 1e-8;
const MAX_PROBE_DEPTH: usize = 24;

/// Maximum number of witnesses stored in a report.
pub const MAX_WITNESSES: usize = 256;

/// Value samples larger than this are thinned before the pairwise
/// convexity test.
const CONVEX_SAMPLE_CAP: usize = 240;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("resolution: eps = {eps} must exceed the grid step {h}")]
    Resolution { eps: f64, h: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    Lsc,
    OpenSections,
    OpenGraph,
    OpenValues,
    ConvexValues,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    PassAtResolution,
    Fail,
}

/// A witness `(x, y, other)`; `other` is the neighbor `x'` for the
/// graph-type checks and a second value point `y'` for the value checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub x: Point,
    pub y: Point,
    pub other: Point,
    /// The measured quantity: `dist(y, Φ(x'))` for lsc, the largest
    /// clearance rate along the probes for open graph, `|other - x|` or
    /// `|other - y|` for the remaining checks.
    #[serde(with = "crate::floats")]
    pub magnitude: f64,
}

impl Violation {
    fn key_cmp(&self, other: &Violation) -> Ordering {
        self.x
            .lex_cmp(&other.x)
            .then_with(|| self.y.lex_cmp(&other.y))
            .then_with(|| self.other.lex_cmp(&other.other))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub h_domain: f64,
    pub h_codomain: f64,
    pub eps: Option<f64>,
    pub probe_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checker: String,
    pub resolution: Resolution,
    /// Number of `(x, y)` pairs examined.
    pub checked: usize,
    pub total_violations: usize,
    /// The first [`MAX_WITNESSES`] witnesses in lexicographic order.
    pub violations: Vec<Violation>,
    pub verdict: Verdict,
}

impl CheckReport {
    fn build(checker: &str, resolution: Resolution, checked: usize, mut v: Vec<Violation>) -> Self {
        v.sort_by(|a, b| a.key_cmp(b));
        let total = v.len();
        v.truncate(MAX_WITNESSES);
        CheckReport {
            checker: checker.to_string(),
            resolution,
            checked,
            total_violations: total,
            verdict: if total == 0 {
                Verdict::PassAtResolution
            } else {
                Verdict::Fail
            },
            violations: v,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::PassAtResolution
    }
}

/// Domain and codomain grids of a map; the same grid twice for self-maps.
#[derive(Clone, Copy, Debug)]
pub struct Grids<'a> {
    pub domain: &'a Grid,
    pub codomain: &'a Grid,
}

impl<'a> Grids<'a> {
    pub fn same(grid: &'a Grid) -> Self {
        Grids {
            domain: grid,
            codomain: grid,
        }
    }

    fn resolution(&self, eps: Option<f64>) -> Resolution {
        Resolution {
            h_domain: self.domain.step(),
            h_codomain: self.codomain.step(),
            eps,
            probe_depth: probe_depth(self.domain.step().min(self.codomain.step())),
        }
    }
}

/// Number of halvings before a probe comes within [`PROBE_FLOOR`] of its base.
pub fn probe_depth(h: f64) -> usize {
    ((h / PROBE_FLOOR).log2().floor().max(1.0) as usize).min(MAX_PROBE_DEPTH)
}

fn probe(base: &Point, toward: &Point, k: usize) -> Point {
    base.lerp(toward, 0.5f64.powi(k as i32))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Space {
    InC,
    InAffC,
}

fn sweep<F>(region: &NodeSet, per_node: F) -> Result<(usize, Vec<Violation>), CheckError>
where
    F: Fn(usize) -> Result<(usize, Vec<Violation>), CheckError> + Sync,
{
    let parts: Vec<(usize, Vec<Violation>)> = region
        .indices()
        .into_par_iter()
        .map(&per_node)
        .collect::<Result<_, _>>()?;
    let checked = parts.iter().map(|p| p.0).sum();
    Ok((checked, parts.into_iter().flat_map(|p| p.1).collect()))
}

fn require_eps(eps: f64, grids: &Grids) -> Result<(), CheckError> {
    let h = grids.codomain.step();
    if !(eps > h) {
        return Err(CheckError::Resolution { eps, h });
    }
    Ok(())
}

/// Lower semicontinuity at the nodes of `region`: a witness is a member `y`
/// of `Φ(x)` and a neighbor `x'` with `dist(y, Φ(x_k)) > eps` at every probe.
pub fn check_lsc(
    map: &SetValuedMap,
    grids: Grids,
    region: &NodeSet,
    eps: f64,
) -> Result<CheckReport, CheckError> {
    require_eps(eps, &grids)?;
    let res = grids.resolution(Some(eps));
    let depth = res.probe_depth;
    let (checked, v) = sweep(region, |i| {
        let x = grids.domain.node(i);
        let ys = map.sample(x, grids.codomain)?.points(grids.codomain);
        let mut out = Vec::new();
        for y in &ys {
            for &j in grids.domain.neighbors(i) {
                let xn = grids.domain.node(j);
                let mut persistent = true;
                for k in 0..=depth {
                    if map.within(&probe(x, xn, k), y, eps, grids.codomain)? {
                        persistent = false;
                        break;
                    }
                }
                if persistent {
                    out.push(Violation {
                        kind: ViolationKind::Lsc,
                        x: x.clone(),
                        y: y.clone(),
                        other: xn.clone(),
                        magnitude: map.distance(xn, y, grids.codomain)?,
                    });
                }
            }
        }
        Ok((ys.len(), out))
    })?;
    Ok(CheckReport::build("lsc", res, checked, v))
}

/// Open lower sections: a witness is a member `y` of `Φ(x)` and a neighbor
/// `x'` such that `y` leaves `Φ` at `x'` and at every probe between them.
pub fn check_open_lower_sections(
    map: &SetValuedMap,
    grids: Grids,
    region: &NodeSet,
) -> Result<CheckReport, CheckError> {
    let res = grids.resolution(None);
    let depth = res.probe_depth;
    let (checked, v) = sweep(region, |i| {
        let x = grids.domain.node(i);
        let ys = map.sample(x, grids.codomain)?.points(grids.codomain);
        let mut out = Vec::new();
        for y in &ys {
            if !map.robust_membership(x, y)? {
                continue;
            }
            for &j in grids.domain.neighbors(i) {
                let xn = grids.domain.node(j);
                if map.membership(xn, y)? {
                    continue;
                }
                let mut persistent = true;
                for k in 1..=depth {
                    if map.membership(&probe(x, xn, k), y)? {
                        persistent = false;
                        break;
                    }
                }
                if persistent {
                    out.push(Violation {
                        kind: ViolationKind::OpenSections,
                        x: x.clone(),
                        y: y.clone(),
                        other: xn.clone(),
                        magnitude: x.dist(xn),
                    });
                }
            }
        }
        Ok((ys.len(), out))
    })?;
    Ok(CheckReport::build("open_lower_sections", res, checked, v))
}

/// Open graph: a witness is `(x, y)` in the graph and a neighbor `x'` such
/// that the clearance of `y` in `Φ(x_k)` stays below `eps * 2^-k` at every
/// probe, i.e. the complement of the value closes in on `y` as `x_k -> x`.
pub fn check_open_graph(
    map: &SetValuedMap,
    grids: Grids,
    region: &NodeSet,
    eps: f64,
) -> Result<CheckReport, CheckError> {
    require_eps(eps, &grids)?;
    let res = grids.resolution(Some(eps));
    let depth = res.probe_depth;
    let (checked, v) = sweep(region, |i| {
        let x = grids.domain.node(i);
        let ys = map.sample(x, grids.codomain)?.points(grids.codomain);
        let mut out = Vec::new();
        for y in &ys {
            for &j in grids.domain.neighbors(i) {
                let xn = grids.domain.node(j);
                let mut rate: f64 = 0.0;
                let mut persistent = true;
                for k in 0..=depth {
                    let t = 0.5f64.powi(k as i32);
                    let c = map.clearance(&probe(x, xn, k), y, grids.codomain, eps * t)?;
                    if c >= eps * t {
                        persistent = false;
                        break;
                    }
                    rate = rate.max(c / t);
                }
                if persistent {
                    out.push(Violation {
                        kind: ViolationKind::OpenGraph,
                        x: x.clone(),
                        y: y.clone(),
                        other: xn.clone(),
                        magnitude: rate,
                    });
                }
            }
        }
        Ok((ys.len(), out))
    })?;
    Ok(CheckReport::build("open_graph", res, checked, v))
}

/// Lattice directions around `y` in codomain coordinates.
fn codomain_sites(grid: &Grid, y: &Point, space: Space) -> Vec<Point> {
    let h = grid.step();
    let mut out = Vec::new();
    for b in &grid.frame().basis {
        for s in [-h, h] {
            let site = y.add(&b.scale(s));
            if space == Space::InAffC || grid.body().contains(&site) {
                out.push(site);
            }
        }
    }
    out
}

/// Open values: a witness is a member `y` of `Φ(x)` and an adjacent site
/// `y'` (inside `C`, or anywhere in `aff C`) outside the value such that every
/// probe from `y` toward `y'` is outside the value as well.
pub fn check_open_values(
    map: &SetValuedMap,
    grids: Grids,
    region: &NodeSet,
    space: Space,
) -> Result<CheckReport, CheckError> {
    let res = grids.resolution(None);
    let depth = probe_depth(grids.codomain.step());
    let (checked, v) = sweep(region, |i| {
        let x = grids.domain.node(i);
        let ys = map.sample(x, grids.codomain)?.points(grids.codomain);
        let mut out = Vec::new();
        for y in &ys {
            if !map.robust_membership(x, y)? {
                continue;
            }
            for site in codomain_sites(grids.codomain, y, space) {
                if map.membership(x, &site)? {
                    continue;
                }
                let mut persistent = true;
                for k in 1..=depth {
                    if map.membership(x, &probe(y, &site, k))? {
                        persistent = false;
                        break;
                    }
                }
                if persistent {
                    out.push(Violation {
                        kind: ViolationKind::OpenValues,
                        x: x.clone(),
                        y: y.clone(),
                        magnitude: y.dist(&site),
                        other: site,
                    });
                }
            }
        }
        Ok((ys.len(), out))
    })?;
    let name = match space {
        Space::InC => "open_values_in_c",
        Space::InAffC => "open_values_in_aff_c",
    };
    Ok(CheckReport::build(name, res, checked, v))
}

/// Convex values: a witness is a pair `y, y'` in `Φ(x)` whose midpoint lies
/// in the codomain but not in the value.
pub fn check_convex_values(
    map: &SetValuedMap,
    grids: Grids,
    region: &NodeSet,
) -> Result<CheckReport, CheckError> {
    let res = grids.resolution(None);
    let (checked, v) = sweep(region, |i| {
        let x = grids.domain.node(i);
        let mut pts = map.sample(x, grids.codomain)?.points(grids.codomain);
        if pts.len() > CONVEX_SAMPLE_CAP {
            let stride = pts.len().div_ceil(CONVEX_SAMPLE_CAP);
            pts = pts.into_iter().step_by(stride).collect();
        }
        let mut out = Vec::new();
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                let m = pts[a].midpoint(&pts[b]);
                if map.codomain().contains(&m) && !map.membership(x, &m)? {
                    out.push(Violation {
                        kind: ViolationKind::ConvexValues,
                        x: x.clone(),
                        y: pts[a].clone(),
                        other: pts[b].clone(),
                        magnitude: pts[a].dist(&pts[b]),
                    });
                }
            }
        }
        Ok((pts.len(), out))
    })?;
    Ok(CheckReport::build("convex_values", res, checked, v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OracleVerdict {
    Consistent,
    CounterexampleAtResolution,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub oracle: String,
    pub verdict: OracleVerdict,
    /// Why the oracle does not apply, when it does not.
    pub reason: Option<String>,
    pub preconditions: Vec<CheckReport>,
    /// `check_lsc` on the intersection, when the preconditions hold.
    pub intersection: Option<CheckReport>,
}

fn conclude(
    oracle: &str,
    preconditions: Vec<CheckReport>,
    phi1: &SetValuedMap,
    phi2: &SetValuedMap,
    grids: Grids,
    eps: f64,
) -> Result<OracleReport, CheckError> {
    if let Some(bad) = preconditions.iter().find(|r| !r.passed()) {
        return Ok(OracleReport {
            oracle: oracle.into(),
            verdict: OracleVerdict::NotApplicable,
            reason: Some(format!("precondition {} failed", bad.checker)),
            preconditions,
            intersection: None,
        });
    }
    let both = phi1.intersect(phi2)?;
    let all = NodeSet::full(grids.domain.len());
    let lsc = check_lsc(&both, grids, &all, eps)?;
    Ok(OracleReport {
        oracle: oracle.into(),
        verdict: if lsc.passed() {
            OracleVerdict::Consistent
        } else {
            OracleVerdict::CounterexampleAtResolution
        },
        reason: None,
        preconditions,
        intersection: Some(lsc),
    })
}

/// Open graph of `Φ1` and lsc of `Φ2` imply lsc of `Φ1 ∩ Φ2`; checks the
/// premises and then the conclusion.
pub fn prop31_oracle(
    phi1: &SetValuedMap,
    phi2: &SetValuedMap,
    grids: Grids,
    eps: f64,
) -> Result<OracleReport, CheckError> {
    let all = NodeSet::full(grids.domain.len());
    let mut pre = vec![check_open_graph(phi1, grids, &all, eps)?];
    if pre[0].passed() {
        pre.push(check_lsc(phi2, grids, &all, eps)?);
    }
    conclude("prop31", pre, phi1, phi2, grids, eps)
}

/// Whether the sampled value has the full affine hull of the codomain.
fn full_hull(sample: &[Point], grid: &Grid) -> bool {
    match affine_hull_of_points(sample) {
        Some(a) => a.dim() == grid.frame().dim(),
        None => false,
    }
}

/// Member nodes of a value whose lattice sites in every direction (within
/// the affine hull) are members too.
fn relative_interior_nodes(
    map: &SetValuedMap,
    x: &Point,
    grid: &Grid,
) -> Result<Vec<usize>, CheckError> {
    let s = map.sample(x, grid)?;
    let member = NodeSet::from_indices(grid.len(), s.nodes.iter().copied());
    let mut out = Vec::new();
    for &i in &s.nodes {
        let sites = grid.lattice_neighbors(i);
        if sites
            .iter()
            .all(|(_, j)| j.is_some_and(|j| member.contains(j)))
        {
            out.push(i);
        }
    }
    Ok(out)
}

/// Lsc and convex values of both maps, full affine hull of `Φ2(x)` and
/// `Φ1(x) ∩ ri Φ2(x) ≠ ∅` whenever the intersection is nonempty imply lsc of
/// `Φ1 ∩ Φ2`. The affine-hull premise is tested first.
pub fn prop32_oracle(
    phi1: &SetValuedMap,
    phi2: &SetValuedMap,
    grids: Grids,
    eps: f64,
) -> Result<OracleReport, CheckError> {
    let not_applicable = |reason: String, pre: Vec<CheckReport>| OracleReport {
        oracle: "prop32".into(),
        verdict: OracleVerdict::NotApplicable,
        reason: Some(reason),
        preconditions: pre,
        intersection: None,
    };
    for x in grids.domain.nodes() {
        let pts = phi2.sample(x, grids.codomain)?.points(grids.codomain);
        if !full_hull(&pts, grids.codomain) {
            return Ok(not_applicable(
                format!("aff Φ2(x) differs from aff C at x = {x}"),
                Vec::new(),
            ));
        }
    }
    let all = NodeSet::full(grids.domain.len());
    let mut pre = Vec::new();
    for map in [phi1, phi2] {
        pre.push(check_lsc(map, grids, &all, eps)?);
        pre.push(check_convex_values(map, grids, &all)?);
    }
    if pre.iter().any(|r| !r.passed()) {
        return conclude("prop32", pre, phi1, phi2, grids, eps);
    }
    let both = phi1.intersect(phi2)?;
    for x in grids.domain.nodes() {
        if both.sample(x, grids.codomain)?.is_empty() {
            continue;
        }
        let ri = relative_interior_nodes(phi2, x, grids.codomain)?;
        let mut meets = false;
        for i in ri {
            if phi1.membership(x, grids.codomain.node(i))? {
                meets = true;
                break;
            }
        }
        if !meets {
            return Ok(not_applicable(
                format!("Φ1(x) misses ri Φ2(x) at x = {x}"),
                pre,
            ));
        }
    }
    conclude("prop32", pre, phi1, phi2, grids, eps)
}
