//! Convex compact bodies, affine hulls, Euclidean projection and lattice grids.
//!
//! Grids are laid out in the coordinates of the body's affine hull, so a
//! segment embedded in the plane gets a one-dimensional lattice. Full
//! dimensional bodies use the standard basis anchored at the lower corner of
//! their bounding box, which keeps nodes on round decimal coordinates.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for body membership.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Default upper bound on the number of lattice sites scanned by [`make_grid`].
pub const DEFAULT_NODE_BUDGET: usize = 4_000_000;

const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("grid step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("grid would scan {requested} lattice sites, budget is {budget}")]
    Budget { requested: u128, budget: usize },
    #[error("invalid body: {0}")]
    InvalidBody(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
}

/// A point of n-dimensional space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(n: usize) -> Self {
        Point(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dist(&self, other: &Point) -> f64 {
        dist(&self.0, &other.0)
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|a| a * s).collect())
    }

    pub fn dot(&self, other: &Point) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self + t * (other - self)`.
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + t * (b - a))
                .collect(),
        )
    }

    pub fn midpoint(&self, other: &Point) -> Point {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Lexicographic total order on coordinates.
    pub fn lex_cmp(&self, other: &Point) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Rounds to the nearest multiple of 1e-12 so lattice coordinates such as
/// `3 * 0.1` land on the double closest to the decimal value.
fn snap(v: f64) -> f64 {
    if v.abs() < 1e3 {
        let s = (v * 1e12).round() / 1e12;
        if s == 0.0 {
            0.0
        } else {
            s
        }
    } else {
        v
    }
}

/// An affine subspace `origin + span(basis)` with an orthonormal basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineSubspace {
    pub origin: Point,
    pub basis: Vec<Point>,
}

impl AffineSubspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.origin.dim()
    }

    /// Coordinates of `p - origin` in the basis.
    pub fn coords_of(&self, p: &Point) -> Vec<f64> {
        let d = p.sub(&self.origin);
        self.basis.iter().map(|b| b.dot(&d)).collect()
    }

    pub fn point_at(&self, coords: &[f64]) -> Point {
        let mut p = self.origin.clone();
        for (b, c) in self.basis.iter().zip(coords) {
            for (pi, bi) in p.0.iter_mut().zip(&b.0) {
                *pi += c * bi;
            }
        }
        p
    }

    /// Orthogonal projection onto the subspace.
    pub fn project(&self, p: &Point) -> Point {
        self.point_at(&self.coords_of(p))
    }

    pub fn distance(&self, p: &Point) -> f64 {
        p.dist(&self.project(p))
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        self.distance(p) <= tol
    }

    /// True when both subspaces are the same affine set.
    pub fn same_as(&self, other: &AffineSubspace, tol: f64) -> bool {
        self.dim() == other.dim()
            && self.contains(&other.origin, tol)
            && other
                .basis
                .iter()
                .all(|b| self.contains(&self.origin.add(b), tol))
    }
}

/// Affine hull of a finite point set, by Gram-Schmidt on differences to the
/// first point. `None` for an empty set.
pub fn affine_hull_of_points(points: &[Point]) -> Option<AffineSubspace> {
    let origin = points.first()?.clone();
    let n = origin.dim();
    let mut basis: Vec<Point> = Vec::new();
    let scale = points
        .iter()
        .map(|p| p.dist(&origin))
        .fold(0.0_f64, f64::max)
        .max(1.0);
    for p in points.iter().skip(1) {
        if basis.len() == n {
            break;
        }
        let mut v = p.sub(&origin);
        for _ in 0..2 {
            for b in &basis {
                let c = v.dot(b);
                v = v.sub(&b.scale(c));
            }
        }
        let norm = v.norm();
        if norm > RANK_TOL * scale {
            basis.push(v.scale(1.0 / norm));
        }
    }
    Some(AffineSubspace { origin, basis })
}

/// A nonempty convex compact subset of n-dimensional space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ConvexBody {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Polytope { vertices: Vec<Vec<f64>> },
    Interval { a: f64, b: f64 },
}

impl ConvexBody {
    pub fn interval(a: f64, b: f64) -> Self {
        ConvexBody::Interval { a, b }
    }

    pub fn unit_ball(n: usize) -> Self {
        ConvexBody::Ball {
            center: vec![0.0; n],
            radius: 1.0,
        }
    }

    /// Checks the structural invariants (nonempty, finite, consistent
    /// dimensions).
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidBody(m.to_string()));
        match self {
            ConvexBody::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return bad("box bounds must be nonempty and of equal length");
                }
                if lo.iter().chain(hi).any(|v| !v.is_finite()) {
                    return bad("box bounds must be finite");
                }
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return bad("box requires lo <= hi in every coordinate");
                }
            }
            ConvexBody::Ball { center, radius } => {
                if center.is_empty() || center.iter().any(|v| !v.is_finite()) {
                    return bad("ball center must be nonempty and finite");
                }
                if !(radius.is_finite() && *radius >= 0.0) {
                    return bad("ball radius must be finite and nonnegative");
                }
            }
            ConvexBody::Polytope { vertices } => {
                let Some(first) = vertices.first() else {
                    return bad("polytope needs at least one vertex");
                };
                if first.is_empty() || vertices.iter().any(|v| v.len() != first.len()) {
                    return bad("polytope vertices must share a nonzero dimension");
                }
                if vertices.iter().flatten().any(|v| !v.is_finite()) {
                    return bad("polytope vertices must be finite");
                }
            }
            ConvexBody::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && a <= b) {
                    return bad("interval requires finite a <= b");
                }
            }
        }
        Ok(())
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Box { lo, .. } => lo.len(),
            ConvexBody::Ball { center, .. } => center.len(),
            ConvexBody::Polytope { vertices } => vertices[0].len(),
            ConvexBody::Interval { .. } => 1,
        }
    }

    /// Boxes, intervals and vertex lists are convex hulls of finite sets.
    pub fn is_polytope(&self) -> bool {
        !matches!(self, ConvexBody::Ball { radius, .. } if *radius > 0.0)
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ConvexBody::Box { lo, hi } => (lo.clone(), hi.clone()),
            ConvexBody::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            ConvexBody::Polytope { vertices } => {
                let n = vertices[0].len();
                let mut lo = vec![f64::INFINITY; n];
                let mut hi = vec![f64::NEG_INFINITY; n];
                for v in vertices {
                    for i in 0..n {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                (lo, hi)
            }
            ConvexBody::Interval { a, b } => (vec![*a], vec![*b]),
        }
    }

    /// Vertex average for polytopes, center otherwise.
    pub fn centroid(&self) -> Point {
        match self {
            ConvexBody::Box { lo, hi } => {
                Point(lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect())
            }
            ConvexBody::Ball { center, .. } => Point(center.clone()),
            ConvexBody::Polytope { vertices } => {
                let n = vertices[0].len();
                let mut c = vec![0.0; n];
                for v in vertices {
                    for i in 0..n {
                        c[i] += v[i];
                    }
                }
                let k = vertices.len() as f64;
                Point(c.into_iter().map(|x| x / k).collect())
            }
            ConvexBody::Interval { a, b } => Point(vec![0.5 * (a + b)]),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            ConvexBody::Ball { radius, .. } => 2.0 * radius,
            ConvexBody::Polytope { vertices } => {
                let mut d: f64 = 0.0;
                for a in vertices {
                    for b in vertices {
                        d = d.max(dist(a, b));
                    }
                }
                d
            }
            _ => {
                let (lo, hi) = self.bounding_box();
                dist(&lo, &hi)
            }
        }
    }

    /// The body scaled by `factor` about its centroid.
    pub fn scaled(&self, factor: f64) -> ConvexBody {
        let c = self.centroid();
        let map = |p: &[f64]| -> Vec<f64> {
            p.iter()
                .zip(&c.0)
                .map(|(x, ci)| ci + factor * (x - ci))
                .collect()
        };
        match self {
            ConvexBody::Box { lo, hi } => ConvexBody::Box {
                lo: map(lo),
                hi: map(hi),
            },
            ConvexBody::Ball { center, radius } => ConvexBody::Ball {
                center: center.clone(),
                radius: radius * factor,
            },
            ConvexBody::Polytope { vertices } => ConvexBody::Polytope {
                vertices: vertices.iter().map(|v| map(v)).collect(),
            },
            ConvexBody::Interval { a, b } => {
                let m = c.0[0];
                ConvexBody::Interval {
                    a: m + factor * (a - m),
                    b: m + factor * (b - m),
                }
            }
        }
    }

    /// Range of `<p - origin, dir>` over the body.
    fn support_range(&self, origin: &Point, dir: &Point) -> (f64, f64) {
        match self {
            ConvexBody::Box { lo, hi } => {
                let mut min = 0.0;
                let mut max = 0.0;
                for i in 0..lo.len() {
                    let a = (lo[i] - origin.0[i]) * dir.0[i];
                    let b = (hi[i] - origin.0[i]) * dir.0[i];
                    min += a.min(b);
                    max += a.max(b);
                }
                (min, max)
            }
            ConvexBody::Ball { center, radius } => {
                let c = dot(&Point(center.clone()).sub(origin).0, &dir.0);
                let r = radius * dir.norm();
                (c - r, c + r)
            }
            ConvexBody::Polytope { vertices } => vertices
                .iter()
                .map(|v| dot(&Point(v.clone()).sub(origin).0, &dir.0))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    (lo.min(s), hi.max(s))
                }),
            ConvexBody::Interval { a, b } => {
                let s1 = (a - origin.0[0]) * dir.0[0];
                let s2 = (b - origin.0[0]) * dir.0[0];
                (s1.min(s2), s1.max(s2))
            }
        }
    }

    /// Smallest affine set containing the body.
    pub fn affine_hull(&self) -> AffineSubspace {
        let n = self.dim();
        let unit = |i: usize| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            Point(v)
        };
        match self {
            ConvexBody::Box { lo, hi } => AffineSubspace {
                origin: Point(lo.clone()),
                basis: (0..n).filter(|&i| hi[i] > lo[i]).map(unit).collect(),
            },
            ConvexBody::Ball { center, radius } => AffineSubspace {
                origin: Point(center.clone()),
                basis: if *radius > 0.0 {
                    (0..n).map(unit).collect()
                } else {
                    Vec::new()
                },
            },
            ConvexBody::Polytope { vertices } => {
                let pts: Vec<Point> = vertices.iter().map(|v| Point(v.clone())).collect();
                affine_hull_of_points(&pts).expect("polytope has a vertex")
            }
            ConvexBody::Interval { a, b } => AffineSubspace {
                origin: Point(vec![*a]),
                basis: if b > a { vec![unit(0)] } else { Vec::new() },
            },
        }
    }

    /// Euclidean projection onto the body.
    pub fn project(&self, p: &Point) -> Point {
        match self {
            ConvexBody::Box { lo, hi } => Point(
                p.0.iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(x, (l, h))| x.clamp(*l, *h))
                    .collect(),
            ),
            ConvexBody::Interval { a, b } => Point(vec![p.0[0].clamp(*a, *b)]),
            ConvexBody::Ball { center, radius } => {
                let c = Point(center.clone());
                let d = p.sub(&c);
                let norm = d.norm();
                if norm <= *radius {
                    p.clone()
                } else {
                    c.add(&d.scale(radius / norm))
                }
            }
            ConvexBody::Polytope { vertices } => project_onto_hull(vertices, p),
        }
    }

    pub fn distance(&self, p: &Point) -> f64 {
        match self {
            ConvexBody::Box { lo, hi } => {
                p.0.iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(x, (l, h))| {
                        let d = (l - x).max(x - h).max(0.0);
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt()
            }
            ConvexBody::Interval { a, b } => (a - p.0[0]).max(p.0[0] - b).max(0.0),
            ConvexBody::Ball { center, radius } => (dist(&p.0, center) - radius).max(0.0),
            ConvexBody::Polytope { .. } => p.dist(&self.project(p)),
        }
    }

    /// Membership with the absolute tolerance [`MEMBERSHIP_TOL`].
    pub fn contains(&self, p: &Point) -> bool {
        p.dim() == self.dim() && self.distance(p) <= MEMBERSHIP_TOL
    }

    /// Membership in the relative interior (interior within the affine hull).
    pub fn contains_relint(&self, p: &Point) -> bool {
        if p.dim() != self.dim() {
            return false;
        }
        match self {
            ConvexBody::Box { lo, hi } => p.0.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| {
                if h > l {
                    x > l && x < h
                } else {
                    (x - l).abs() <= MEMBERSHIP_TOL
                }
            }),
            ConvexBody::Interval { a, b } => {
                let x = p.0[0];
                if b > a {
                    x > *a && x < *b
                } else {
                    (x - a).abs() <= MEMBERSHIP_TOL
                }
            }
            ConvexBody::Ball { center, radius } => {
                if *radius > 0.0 {
                    dist(&p.0, center) < *radius
                } else {
                    dist(&p.0, center) <= MEMBERSHIP_TOL
                }
            }
            ConvexBody::Polytope { vertices } => {
                if !self.contains(p) {
                    return false;
                }
                // p is relatively interior iff the segment from every vertex
                // through p can be extended beyond p inside the body.
                let delta = 1e-6;
                vertices.iter().all(|v| {
                    let v = Point(v.clone());
                    if v.dist(p) <= MEMBERSHIP_TOL {
                        return vertices.len() == 1;
                    }
                    let q = p.add(&p.sub(&v).scale(delta));
                    self.distance(&q) <= 1e-12
                })
            }
        }
    }
}

/// Projection onto the convex hull of `vertices` by enumerating affinely
/// independent vertex subsets: the projection lies in the relative interior of
/// some simplex face, where it coincides with the projection onto that face's
/// affine hull.
fn project_onto_hull(vertices: &[Vec<f64>], p: &Point) -> Point {
    let k = vertices.len();
    if k == 1 {
        return Point(vertices[0].clone());
    }
    let pts: Vec<Point> = vertices.iter().map(|v| Point(v.clone())).collect();
    let hull_dim = affine_hull_of_points(&pts).map(|a| a.dim()).unwrap_or(0);
    let mut best: Option<(f64, Point)> = None;
    let mut subset: Vec<usize> = Vec::with_capacity(hull_dim + 1);
    for size in 1..=(hull_dim + 1).min(k) {
        subset.clear();
        subset.extend(0..size);
        loop {
            if let Some(q) = project_onto_simplex_face(&pts, &subset, p) {
                let d = p.dist(&q);
                if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                    best = Some((d, q));
                }
            }
            if !next_combination(&mut subset, k) {
                break;
            }
        }
    }
    match best {
        Some((d, _)) if d <= 1e-12 => p.clone(),
        Some((_, q)) => q,
        None => pts[0].clone(),
    }
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Projection of `p` onto the affine hull of the chosen vertices when it has
/// nonnegative barycentric coordinates; `None` otherwise or when the vertices
/// are affinely dependent.
fn project_onto_simplex_face(pts: &[Point], subset: &[usize], p: &Point) -> Option<Point> {
    let v0 = &pts[subset[0]];
    if subset.len() == 1 {
        return Some(v0.clone());
    }
    let n = v0.dim();
    let m = subset.len() - 1;
    let d = DMatrix::from_fn(n, m, |r, c| pts[subset[c + 1]].0[r] - v0.0[r]);
    let rhs = DVector::from_iterator(n, p.0.iter().zip(&v0.0).map(|(a, b)| a - b));
    let gram = d.transpose() * &d;
    let scale = gram
        .diagonal()
        .iter()
        .fold(0.0_f64, |a, b| a.max(*b))
        .max(1e-300);
    // reject near-singular faces (affinely dependent vertices)
    if gram.determinant().abs() <= 1e-12 * scale.powi(m as i32) {
        return None;
    }
    let mu = gram.lu().solve(&(d.transpose() * rhs))?;
    let sum: f64 = mu.iter().sum();
    let tol = 1e-12;
    if mu.iter().any(|&l| l < -tol) || 1.0 - sum < -tol {
        return None;
    }
    let q = d * mu;
    Some(Point(
        v0.0.iter().zip(q.iter()).map(|(a, b)| a + b).collect(),
    ))
}

/// A set of grid nodes, stored as a membership mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSet {
    mask: Vec<bool>,
}

impl NodeSet {
    pub fn empty(n: usize) -> Self {
        NodeSet {
            mask: vec![false; n],
        }
    }

    pub fn full(n: usize) -> Self {
        NodeSet {
            mask: vec![true; n],
        }
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        NodeSet { mask }
    }

    pub fn from_indices(n: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for i in indices {
            s.mask[i] = true;
        }
        s
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask.get(i).copied().unwrap_or(false)
    }

    pub fn insert(&mut self, i: usize) {
        self.mask[i] = true;
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|b| *b)
    }

    /// Size of the underlying grid.
    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
    }

    pub fn indices(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        NodeSet {
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    pub fn intersection(&self, other: &NodeSet) -> NodeSet {
        NodeSet {
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    pub fn difference(&self, other: &NodeSet) -> NodeSet {
        NodeSet {
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a && !*b)
                .collect(),
        }
    }
}

/// A regular lattice of nodes inside a convex body.
#[derive(Clone, Debug)]
pub struct Grid {
    body: ConvexBody,
    h: f64,
    frame: AffineSubspace,
    nodes: Vec<Point>,
    indices: Vec<Vec<i64>>,
    neighbors: Vec<Vec<usize>>,
    lookup: HashMap<Vec<i64>, usize>,
}

/// Builds the lattice grid of step `h` on `body` using the default node budget.
pub fn make_grid(body: &ConvexBody, h: f64) -> Result<Grid, GeometryError> {
    Grid::with_budget(body, h, DEFAULT_NODE_BUDGET)
}

impl Grid {
    pub fn with_budget(body: &ConvexBody, h: f64, budget: usize) -> Result<Grid, GeometryError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(GeometryError::InvalidStep(h));
        }
        body.validate()?;
        let hull = body.affine_hull();
        let n = body.dim();
        let frame = if hull.dim() == n {
            let (lo, _) = body.bounding_box();
            AffineSubspace {
                origin: Point(lo),
                basis: (0..n)
                    .map(|i| {
                        let mut e = vec![0.0; n];
                        e[i] = 1.0;
                        Point(e)
                    })
                    .collect(),
            }
        } else {
            hull
        };
        let m = frame.dim();
        let mut ranges = Vec::with_capacity(m);
        let mut total: u128 = 1;
        for b in &frame.basis {
            let (lo, hi) = body.support_range(&frame.origin, b);
            let kmin = (lo / h - 1e-9).floor() as i64;
            let kmax = (hi / h + 1e-9).ceil() as i64;
            total = total.saturating_mul((kmax - kmin + 1).max(0) as u128);
            ranges.push((kmin, kmax));
        }
        if total > budget as u128 {
            return Err(GeometryError::Budget {
                requested: total,
                budget,
            });
        }

        let mut nodes = Vec::new();
        let mut indices = Vec::new();
        let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            let p = lattice_position(&frame, h, &idx);
            if body.contains(&p) {
                nodes.push(p);
                indices.push(idx.clone());
            }
            // odometer, last coordinate fastest
            let mut j = m;
            let mut advanced = false;
            while j > 0 {
                j -= 1;
                if idx[j] < ranges[j].1 {
                    idx[j] += 1;
                    for (k, r) in ranges.iter().enumerate().skip(j + 1) {
                        idx[k] = r.0;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
        if nodes.is_empty() {
            // body thinner than one lattice cell: fall back to its centroid
            let c = body.project(&body.centroid());
            let coords = frame.coords_of(&c);
            nodes.push(c);
            indices.push(coords.iter().map(|v| (v / h).round() as i64).collect());
        }

        let lookup: HashMap<Vec<i64>, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();
        let neighbors = indices
            .iter()
            .map(|k| {
                let mut out = Vec::with_capacity(2 * m);
                let mut probe = k.clone();
                for j in 0..m {
                    for delta in [-1, 1] {
                        probe[j] = k[j] + delta;
                        if let Some(&i) = lookup.get(&probe) {
                            out.push(i);
                        }
                    }
                    probe[j] = k[j];
                }
                out
            })
            .collect();

        Ok(Grid {
            body: body.clone(),
            h,
            frame,
            nodes,
            indices,
            neighbors,
            lookup,
        })
    }

    pub fn body(&self) -> &ConvexBody {
        &self.body
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// Dimension of the lattice (the affine dimension of the body).
    pub fn lattice_dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn frame(&self) -> &AffineSubspace {
        &self.frame
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Point {
        &self.nodes[i]
    }

    pub fn lattice_index(&self, i: usize) -> &[i64] {
        &self.indices[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn node_at(&self, index: &[i64]) -> Option<usize> {
        self.lookup.get(index).copied()
    }

    /// Position of an arbitrary lattice site, inside the body or not.
    pub fn lattice_point(&self, index: &[i64]) -> Point {
        lattice_position(&self.frame, self.h, index)
    }

    /// All `2m` lattice sites adjacent to node `i`, with the node index when
    /// the site belongs to the grid.
    pub fn lattice_neighbors(&self, i: usize) -> Vec<(Point, Option<usize>)> {
        let k = &self.indices[i];
        let mut out = Vec::with_capacity(2 * k.len());
        let mut probe = k.clone();
        for j in 0..k.len() {
            for delta in [-1, 1] {
                probe[j] = k[j] + delta;
                out.push((self.lattice_point(&probe), self.node_at(&probe)));
            }
            probe[j] = k[j];
        }
        out
    }

    /// Index of the node nearest to `p` (ties broken by node order).
    pub fn nearest(&self, p: &Point) -> usize {
        let coords = self.frame.coords_of(p);
        let guess: Vec<i64> = coords.iter().map(|c| (c / self.h).round() as i64).collect();
        if let Some(i) = self.node_at(&guess) {
            let d = self.nodes[i].dist(p);
            if d <= 0.5 * self.h * (self.lattice_dim().max(1) as f64).sqrt() + 1e-12 {
                return i;
            }
        }
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (i, q) in self.nodes.iter().enumerate() {
            let d = q.dist(p);
            if d < bd {
                bd = d;
                best = i;
            }
        }
        best
    }

    /// Nodes within Euclidean distance `r` of `p`, in node order. Falls back
    /// to a full scan when the search box would exceed the node count.
    pub fn nodes_within(&self, p: &Point, r: f64) -> Vec<usize> {
        let m = self.lattice_dim();
        let reach = r / self.h;
        let full = || {
            (0..self.len())
                .filter(|&i| self.nodes[i].dist(p) <= r)
                .collect::<Vec<_>>()
        };
        if !reach.is_finite() || m == 0 {
            return full();
        }
        let span = 2.0 * reach.ceil() + 3.0;
        if span.powi(m as i32) >= self.len() as f64 {
            return full();
        }
        let center = self.frame.coords_of(p);
        let lo: Vec<i64> = center
            .iter()
            .map(|c| (c / self.h - reach).floor() as i64 - 1)
            .collect();
        let hi: Vec<i64> = center
            .iter()
            .map(|c| (c / self.h + reach).ceil() as i64 + 1)
            .collect();
        let mut out = Vec::new();
        let mut idx = lo.clone();
        loop {
            if let Some(i) = self.node_at(&idx) {
                if self.nodes[i].dist(p) <= r {
                    out.push(i);
                }
            }
            let mut j = m;
            let mut advanced = false;
            while j > 0 {
                j -= 1;
                if idx[j] < hi[j] {
                    idx[j] += 1;
                    idx[j + 1..m].copy_from_slice(&lo[j + 1..m]);
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
        out.sort_unstable();
        out
    }

    /// Nodes with all lattice indices divisible by `stride`.
    pub fn subsample(&self, stride: i64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.indices[i].iter().all(|k| k.rem_euclid(stride) == 0))
            .collect()
    }

    /// Points of the refined lattice with step `h / divisor` inside the body.
    pub fn refined_points(&self, divisor: i64) -> Vec<Point> {
        let m = self.lattice_dim();
        if m == 0 {
            return self.nodes.clone();
        }
        let fine = self.h / divisor as f64;
        let mut ranges = Vec::with_capacity(m);
        for b in &self.frame.basis {
            let (lo, hi) = self.body.support_range(&self.frame.origin, b);
            ranges.push((
                (lo / fine - 1e-9).floor() as i64,
                (hi / fine + 1e-9).ceil() as i64,
            ));
        }
        let mut out = Vec::new();
        let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            let p = lattice_position(&self.frame, fine, &idx);
            if self.body.contains(&p) {
                out.push(p);
            }
            let mut j = m;
            let mut advanced = false;
            while j > 0 {
                j -= 1;
                if idx[j] < ranges[j].1 {
                    idx[j] += 1;
                    for (k, r) in ranges.iter().enumerate().skip(j + 1) {
                        idx[k] = r.0;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
        out
    }
}

fn lattice_position(frame: &AffineSubspace, h: f64, index: &[i64]) -> Point {
    let mut p = frame.origin.clone();
    for (b, &k) in frame.basis.iter().zip(index) {
        let s = k as f64 * h;
        for (pi, bi) in p.0.iter_mut().zip(&b.0) {
            *pi += s * bi;
        }
    }
    Point(p.0.into_iter().map(snap).collect())
}

/// Location of a node relative to a region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interior,
    Boundary,
    Outside,
}

/// Relative interior / boundary / complement of a node set within a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionClassification {
    pub labels: Vec<Region>,
}

impl RegionClassification {
    fn collect(&self, which: Region) -> NodeSet {
        NodeSet::from_mask(self.labels.iter().map(|l| *l == which).collect())
    }

    pub fn interior(&self) -> NodeSet {
        self.collect(Region::Interior)
    }

    pub fn boundary(&self) -> NodeSet {
        self.collect(Region::Boundary)
    }

    pub fn outside(&self) -> NodeSet {
        self.collect(Region::Outside)
    }

    /// Interior plus boundary.
    pub fn region(&self) -> NodeSet {
        NodeSet::from_mask(self.labels.iter().map(|l| *l != Region::Outside).collect())
    }
}

/// Classifies grid nodes against a predicate: a member node is `Boundary` when
/// some adjacent node is not a member, `Interior` otherwise.
pub fn classify_relative<F>(member: F, grid: &Grid) -> RegionClassification
where
    F: Fn(&Point) -> bool,
{
    let mask: Vec<bool> = grid.nodes().iter().map(&member).collect();
    classify_mask(&NodeSet::from_mask(mask), grid)
}

/// [`classify_relative`] for a precomputed node set.
pub fn classify_mask(set: &NodeSet, grid: &Grid) -> RegionClassification {
    classify_within(set, &NodeSet::full(grid.len()), grid)
}

/// Classification relative to `universe`: only neighbors inside `universe`
/// are consulted, so the boundary is taken in the relative topology of the
/// universe. Nodes outside the universe are labelled `Outside`.
pub fn classify_within(set: &NodeSet, universe: &NodeSet, grid: &Grid) -> RegionClassification {
    let labels = (0..grid.len())
        .map(|i| {
            if !set.contains(i) || !universe.contains(i) {
                Region::Outside
            } else if grid
                .neighbors(i)
                .iter()
                .any(|&j| universe.contains(j) && !set.contains(j))
            {
                Region::Boundary
            } else {
                Region::Interior
            }
        })
        .collect();
    RegionClassification { labels }
}
