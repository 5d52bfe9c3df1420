//! Approximate continuous selections, Brouwer fixed points and their
//! composition into fixed points of set-valued maps.
//!
//! A selection is built from anchors `(x_i, y_i)` with `y_i ∈ Φ(x_i)`. Each
//! anchor owns the set `U_i = {x : dist(y_i, Φ(x)) < ε}` and the evaluator
//! is `Σ λ_i(x) y_i` with weights proportional to the distance from `x` to
//! the grid nodes outside `U_i`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{check_convex_values, probe_depth, CheckError, CheckReport, Grids};
use crate::geometry::{make_grid, ConvexBody, GeometryError, Grid, NodeSet, Point};
use crate::setmap::{MapError, SetValuedMap};

pub const DAMPING: f64 = 0.5;
pub const MAX_REFINEMENTS: usize = 3;
const MAX_ITERATIONS: usize = 2_000;
const MAX_FALLBACK_EVALS: usize = 200_000;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("eps must be positive, got {0}")]
    Eps(f64),
    #[error("Φ({0}) has no sampled point")]
    EmptyValue(Point),
    #[error("Φ is not convex-valued at this resolution ({} violation(s))", .0.total_violations)]
    NotConvex(Box<CheckReport>),
    #[error(
        "NOT_LSC_AT_RESOLUTION: node {uncovered} is not covered after {refinements} refinement(s); anchor sets fail to be open at {}",
        join_points(.witnesses)
    )]
    NotLscAtResolution {
        uncovered: Point,
        refinements: usize,
        witnesses: Vec<Point>,
    },
    #[error("BUDGET: best residual {residual:e} at {point} exceeds tol {tol:e}")]
    Budget {
        point: Point,
        residual: f64,
        tol: f64,
    },
    #[error("fixed point {point} of the selection is {residual:e} from Φ(x), above {bound:e}")]
    Resolution {
        point: Point,
        residual: f64,
        bound: f64,
    },
    #[error("Φ must map the body into itself")]
    NotSelfMap,
}

fn join_points(v: &[Point]) -> String {
    v.iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Clone, Debug, Serialize)]
pub struct Anchor {
    pub x: Point,
    pub y: Point,
}

/// An anchor dropped because its set `U_i` is not open at `at`.
#[derive(Clone, Debug, Serialize)]
pub struct RejectedAnchor {
    pub x: Point,
    pub y: Point,
    pub at: Point,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuousSelection {
    pub eps: f64,
    pub anchor_step: f64,
    pub refinements: usize,
    pub anchors: Vec<Anchor>,
    pub rejected: Vec<RejectedAnchor>,
    /// `dist(φ(x), Φ(x))` per domain node.
    #[serde(serialize_with = "crate::floats::vec::serialize")]
    pub containment: Vec<f64>,
    /// Largest difference quotient of `φ` between adjacent domain nodes.
    #[serde(serialize_with = "crate::floats::serialize")]
    pub lipschitz_estimate: f64,
    #[serde(skip)]
    outside: Vec<Vec<Point>>,
    #[serde(skip)]
    full_weight: f64,
}

impl ContinuousSelection {
    pub fn max_containment(&self) -> f64 {
        self.containment.iter().copied().fold(0.0, f64::max)
    }

    fn raw_weight(&self, i: usize, x: &Point) -> f64 {
        let out = &self.outside[i];
        if out.is_empty() {
            return self.full_weight;
        }
        out.iter().map(|z| z.dist(x)).fold(f64::INFINITY, f64::min)
    }

    /// Partition-of-unity weights `λ_i(x)`, one per anchor.
    pub fn weights(&self, x: &Point) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.anchors.len())
            .map(|i| self.raw_weight(i, x))
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    pub fn eval(&self, x: &Point) -> Point {
        let lambda = self.weights(x);
        let mut out = Point::zeros(self.anchors[0].y.dim());
        for (a, l) in self.anchors.iter().zip(lambda) {
            if l > 0.0 {
                for (o, v) in out.0.iter_mut().zip(&a.y.0) {
                    *o += l * v;
                }
            }
        }
        out
    }
}

fn anchor_nets(grid: &Grid) -> Vec<(f64, Vec<Point>)> {
    let h = grid.step();
    let coarse = grid
        .subsample(2)
        .into_iter()
        .map(|i| grid.node(i).clone())
        .collect();
    vec![
        (2.0 * h, coarse),
        (h, grid.nodes().to_vec()),
        (h / 2.0, grid.refined_points(2)),
        (h / 4.0, grid.refined_points(4)),
    ]
}

struct Candidate {
    anchor: Anchor,
    cover: NodeSet,
    not_open_at: Option<Point>,
}

fn build_candidate(
    map: &SetValuedMap,
    grids: Grids,
    x: &Point,
    eps: f64,
) -> Result<Candidate, SelectionError> {
    let dom = grids.domain;
    let pts = map.sample(x, grids.codomain)?.points(grids.codomain);
    let y = pts
        .into_iter()
        .min_by(|a, b| a.lex_cmp(b))
        .ok_or_else(|| SelectionError::EmptyValue(x.clone()))?;
    let inside =
        |p: &Point| -> Result<bool, MapError> { Ok(map.distance(p, &y, grids.codomain)? < eps) };
    let mut mask = Vec::with_capacity(dom.len());
    for z in dom.nodes() {
        mask.push(inside(z)?);
    }
    let cover = NodeSet::from_mask(mask);
    let depth = probe_depth(dom.step());
    let mut not_open_at = None;
    'nodes: for i in cover.iter() {
        for &j in dom.neighbors(i) {
            if cover.contains(j) {
                continue;
            }
            let mut escapes = true;
            for k in 1..=depth {
                let p = dom.node(i).lerp(dom.node(j), 0.5f64.powi(k as i32));
                if inside(&p)? {
                    escapes = false;
                    break;
                }
            }
            if escapes {
                not_open_at = Some(dom.node(i).clone());
                break 'nodes;
            }
        }
    }
    Ok(Candidate {
        anchor: Anchor { x: x.clone(), y },
        cover,
        not_open_at,
    })
}

/// Builds the selection on the domain grid, halving the anchor spacing from
/// `2h` down to `h/4` until the accepted anchor sets cover every node.
pub fn michael_selection(
    map: &SetValuedMap,
    grids: Grids,
    eps: f64,
) -> Result<ContinuousSelection, SelectionError> {
    if !(eps > 0.0) {
        return Err(SelectionError::Eps(eps));
    }
    let dom = grids.domain;
    for x in dom.nodes() {
        if map.sample(x, grids.codomain)?.is_empty() {
            return Err(SelectionError::EmptyValue(x.clone()));
        }
    }
    let convex = check_convex_values(map, grids, &NodeSet::full(dom.len()))?;
    if !convex.passed() {
        return Err(SelectionError::NotConvex(Box::new(convex)));
    }

    let mut last_uncovered = None;
    let mut last_witnesses = Vec::new();
    for (level, (step, net)) in anchor_nets(dom).into_iter().enumerate() {
        let candidates: Vec<Candidate> = net
            .par_iter()
            .map(|x| build_candidate(map, grids, x, eps))
            .collect::<Result<_, _>>()?;
        let mut covered = NodeSet::empty(dom.len());
        let mut anchors = Vec::new();
        let mut covers = Vec::new();
        let mut rejected = Vec::new();
        for c in candidates {
            match c.not_open_at {
                Some(at) => rejected.push(RejectedAnchor {
                    x: c.anchor.x,
                    y: c.anchor.y,
                    at,
                }),
                None => {
                    covered = covered.union(&c.cover);
                    anchors.push(c.anchor);
                    covers.push(c.cover);
                }
            }
        }
        if covered.len() < dom.len() {
            let first = (0..dom.len())
                .find(|&i| !covered.contains(i))
                .expect("some node uncovered");
            last_uncovered = Some(dom.node(first).clone());
            let mut w: Vec<Point> = rejected.iter().map(|r| r.at.clone()).collect();
            w.sort_by(|a, b| a.lex_cmp(b));
            w.dedup();
            last_witnesses = w;
            if level == MAX_REFINEMENTS {
                break;
            }
            continue;
        }
        let outside: Vec<Vec<Point>> = covers
            .iter()
            .map(|c| {
                (0..dom.len())
                    .filter(|&i| !c.contains(i))
                    .map(|i| dom.node(i).clone())
                    .collect()
            })
            .collect();
        let mut sel = ContinuousSelection {
            eps,
            anchor_step: step,
            refinements: level,
            anchors,
            rejected,
            containment: Vec::new(),
            lipschitz_estimate: 0.0,
            outside,
            full_weight: dom.body().diameter() + dom.step(),
        };
        let values: Vec<Point> = dom.nodes().par_iter().map(|x| sel.eval(x)).collect();
        sel.containment = dom
            .nodes()
            .par_iter()
            .zip(values.par_iter())
            .map(|(x, v)| map.distance(x, v, grids.codomain))
            .collect::<Result<_, _>>()?;
        let mut lip: f64 = 0.0;
        for i in 0..dom.len() {
            for &j in dom.neighbors(i) {
                lip = lip.max(values[i].dist(&values[j]) / dom.node(i).dist(dom.node(j)));
            }
        }
        sel.lipschitz_estimate = lip;
        return Ok(sel);
    }
    Err(SelectionError::NotLscAtResolution {
        uncovered: last_uncovered.expect("cover failed"),
        refinements: MAX_REFINEMENTS,
        witnesses: last_witnesses,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointMethod {
    DampedIteration,
    Bisection,
    PatternSearch,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointResult {
    pub point: Point,
    /// `‖φ(x) − x‖` for single-valued maps, `dist(x, Φ(x))` for set-valued.
    #[serde(serialize_with = "crate::floats::serialize")]
    pub residual: f64,
    pub iterations: usize,
    pub method: FixedPointMethod,
}

fn by_residual(a: &(f64, Point), b: &(f64, Point)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.lex_cmp(&b.1))
}

fn damped_run<F>(phi: &F, body: &ConvexBody, start: &Point, tol: f64) -> (f64, Point, usize)
where
    F: Fn(&Point) -> Point + Sync,
{
    let mut x = body.project(start);
    let mut best = (f64::INFINITY, x.clone());
    for it in 0..MAX_ITERATIONS {
        let fx = body.project(&phi(&x));
        let r = fx.dist(&x);
        if r < best.0 {
            best = (r, x.clone());
        }
        if r <= tol {
            let image_r = body.project(&phi(&fx)).dist(&fx);
            return if image_r < r {
                (image_r, fx, it + 1)
            } else {
                (r, x, it + 1)
            };
        }
        x = body.project(&x.lerp(&fx, DAMPING));
    }
    (best.0, best.1, MAX_ITERATIONS)
}

fn bisection<F>(phi: &F, body: &ConvexBody, tol: f64) -> Option<(f64, Point, usize)>
where
    F: Fn(&Point) -> Point + Sync,
{
    let hull = body.affine_hull();
    if hull.dim() != 1 {
        return None;
    }
    let e = &hull.basis[0];
    let (lo, hi) = {
        let (a, b) = body.bounding_box();
        let ends = [Point(a), Point(b)];
        let ts: Vec<f64> = ends
            .iter()
            .map(|p| hull.coords_of(&body.project(p))[0])
            .collect();
        let mut lo = ts[0].min(ts[1]);
        let mut hi = ts[0].max(ts[1]);
        while body.contains(&hull.point_at(&[lo - body.diameter()])) {
            lo -= body.diameter();
        }
        while body.contains(&hull.point_at(&[hi + body.diameter()])) {
            hi += body.diameter();
        }
        (
            body.project(&hull.point_at(&[lo])),
            body.project(&hull.point_at(&[hi])),
        )
    };
    let g = |t: f64| -> (f64, Point, f64) {
        let p = body.project(&hull.point_at(&[t]));
        let fp = body.project(&phi(&p));
        (fp.sub(&p).dot(e), p.clone(), fp.dist(&p))
    };
    let mut a = hull.coords_of(&lo)[0];
    let mut b = hull.coords_of(&hi)[0];
    let mut best = (f64::INFINITY, lo.clone());
    let mut evals = 0;
    while evals < MAX_FALLBACK_EVALS {
        let m = 0.5 * (a + b);
        let (gm, p, r) = g(m);
        evals += 1;
        if r < best.0 {
            best = (r, p);
        }
        if r <= tol || b - a <= f64::EPSILON * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if gm > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some((best.0, best.1, evals))
}

fn pattern_search<F>(phi: &F, body: &ConvexBody, start: &Point, tol: f64) -> (f64, Point, usize)
where
    F: Fn(&Point) -> Point + Sync,
{
    let resid = |p: &Point| body.project(&phi(p)).dist(p);
    let mut x = body.project(start);
    let mut r = resid(&x);
    let mut s = body.diameter() / 16.0;
    let mut evals = 1;
    let n = x.dim();
    while r > tol && s > 1e-15 && evals < MAX_FALLBACK_EVALS {
        let mut moved = false;
        for j in 0..n {
            for sign in [1.0, -1.0] {
                let mut q = x.clone();
                q.0[j] += sign * s;
                let q = body.project(&q);
                let rq = resid(&q);
                evals += 1;
                if rq < r {
                    x = q;
                    r = rq;
                    moved = true;
                }
            }
        }
        if !moved {
            s *= 0.5;
        }
    }
    (r, x, evals)
}

/// Damped projected iteration from the centroid and a coarse grid of starts,
/// then bisection (one-dimensional bodies) or pattern search from the best
/// start. Runs are compared by residual, ties broken lexicographically.
pub fn brouwer_fixed_point<F>(
    phi: F,
    body: &ConvexBody,
    tol: f64,
) -> Result<FixedPointResult, SelectionError>
where
    F: Fn(&Point) -> Point + Sync,
{
    let mut starts = vec![body.centroid()];
    let d = body.diameter();
    if d > 0.0 {
        starts.extend(make_grid(body, d / 8.0)?.nodes().iter().cloned());
    }
    let runs: Vec<(f64, Point, usize)> = starts
        .par_iter()
        .map(|s| damped_run(&phi, body, s, tol))
        .collect();
    let iterations: usize = runs.iter().map(|r| r.2).sum();
    let best = runs
        .iter()
        .map(|r| (r.0, r.1.clone()))
        .min_by(by_residual)
        .expect("at least one start");
    if best.0 <= tol {
        return Ok(FixedPointResult {
            point: best.1,
            residual: best.0,
            iterations,
            method: FixedPointMethod::DampedIteration,
        });
    }
    let (r, p, evals, method) = match bisection(&phi, body, tol) {
        Some((r, p, e)) => (r, p, e, FixedPointMethod::Bisection),
        None => {
            let (r, p, e) = pattern_search(&phi, body, &best.1, tol);
            (r, p, e, FixedPointMethod::PatternSearch)
        }
    };
    let (r, p) = if by_residual(&(r, p.clone()), &best) == Ordering::Less {
        (r, p)
    } else {
        best
    };
    if r <= tol {
        Ok(FixedPointResult {
            point: p,
            residual: r,
            iterations: iterations + evals,
            method,
        })
    } else {
        Err(SelectionError::Budget {
            point: p,
            residual: r,
            tol,
        })
    }
}

/// Fixed point of the selection, reported with its distance to `Φ(x)`.
pub fn setvalued_fixed_point(
    map: &SetValuedMap,
    grid: &Grid,
    eps: f64,
    tol: f64,
) -> Result<(FixedPointResult, ContinuousSelection), SelectionError> {
    if map.domain() != map.codomain() || grid.body() != map.domain() {
        return Err(SelectionError::NotSelfMap);
    }
    let sel = michael_selection(map, Grids::same(grid), eps)?;
    let fp = brouwer_fixed_point(|x| sel.eval(x), map.domain(), tol)?;
    let residual = map.distance(&fp.point, &fp.point, grid)?;
    if residual > eps + tol {
        return Err(SelectionError::Resolution {
            point: fp.point,
            residual,
            bound: eps + tol,
        });
    }
    Ok((
        FixedPointResult {
            point: fp.point,
            residual,
            iterations: fp.iterations,
            method: fp.method,
        },
        sel,
    ))
}
