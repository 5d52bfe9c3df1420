//! Set-valued maps `Φ: D ⇉ E` between convex bodies.
//!
//! Every value is intersected with the codomain body. Closed-form variants
//! (constant bodies, boxes, balls, singletons) answer distance queries by
//! projection; sublevel sets fall back to the nearest member grid node.

use thiserror::Error;

use crate::bifunction::{Bifunction, Condition, EvalError, Expr};
use crate::geometry::{ConvexBody, Grid, Point, MEMBERSHIP_TOL};

/// Two points closer than this are the same sample point.
const SAMPLE_DEDUP_TOL: f64 = 1e-12;

/// Extra margin for [`SetValuedMap::robust_membership`]: sublevel values and
/// exclusion distances within this of zero count as on the boundary.
pub const ROUNDING_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug)]
pub enum MapKind {
    /// The fixed body intersected with the codomain.
    Constant(ConvexBody),
    /// Per-coordinate bounds `lo_i(x) <= y_i <= hi_i(x)`.
    Box {
        lo: Vec<Expr>,
        hi: Vec<Expr>,
    },
    Ball {
        center: Vec<Expr>,
        radius: Expr,
    },
    Singleton(Vec<Expr>),
    /// `{y : f(x,y) < -margin}`; with `open` set, `y` must lie in the relative
    /// interior of the codomain and `f̂` is evaluated instead of `f`.
    Sublevel {
        f: Bifunction,
        margin: f64,
        open: bool,
    },
    /// Base value minus the zero set of `exclusion(x, y)`.
    Punctured {
        base: Box<MapKind>,
        exclusion: Expr,
    },
    Intersection(Vec<MapKind>),
    /// The first case whose condition holds at `x`; empty if none does.
    Piecewise(Vec<(Condition, MapKind)>),
}

/// Grid nodes (by index) and off-grid exact points of a value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValueSample {
    pub nodes: Vec<usize>,
    pub exact: Vec<Point>,
}

impl ValueSample {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.exact.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len() + self.exact.len()
    }

    /// Node positions followed by exact points.
    pub fn points(&self, grid: &Grid) -> Vec<Point> {
        self.nodes
            .iter()
            .map(|&i| grid.node(i).clone())
            .chain(self.exact.iter().cloned())
            .collect()
    }
}

fn eval_all(exprs: &[Expr], x: &Point) -> Result<Vec<f64>, EvalError> {
    exprs.iter().map(|e| e.eval(x.coords(), &[])).collect()
}

fn uses_y(e: &Expr) -> bool {
    e.max_index().1 > 0
}

impl MapKind {
    fn validate(&self, n_dom: usize, n_cod: usize) -> Result<(), MapError> {
        let x_only = |exprs: &[Expr], what: &str| -> Result<(), MapError> {
            for e in exprs {
                let (xi, _) = e.max_index();
                if uses_y(e) {
                    return Err(MapError::Invalid(format!(
                        "{what} expression `{e}` may only use x"
                    )));
                }
                if xi > n_dom {
                    return Err(MapError::Invalid(format!(
                        "{what} expression `{e}` uses x{xi} but the domain has dimension {n_dom}"
                    )));
                }
            }
            Ok(())
        };
        let arity = |k: usize, what: &str| -> Result<(), MapError> {
            if k != n_cod {
                return Err(MapError::Invalid(format!(
                    "{what} has {k} coordinates, codomain dimension is {n_cod}"
                )));
            }
            Ok(())
        };
        match self {
            MapKind::Constant(body) => {
                body.validate()
                    .map_err(|e| MapError::Invalid(e.to_string()))?;
                arity(body.dim(), "constant body")
            }
            MapKind::Box { lo, hi } => {
                arity(lo.len(), "box lower bound")?;
                arity(hi.len(), "box upper bound")?;
                x_only(lo, "box")?;
                x_only(hi, "box")
            }
            MapKind::Ball { center, radius } => {
                arity(center.len(), "ball center")?;
                x_only(center, "ball")?;
                x_only(std::slice::from_ref(radius), "ball")
            }
            MapKind::Singleton(coords) => {
                arity(coords.len(), "singleton")?;
                x_only(coords, "singleton")
            }
            MapKind::Sublevel { f, margin, .. } => {
                if !(*margin >= 0.0) {
                    return Err(MapError::Invalid(format!(
                        "margin must be nonnegative, got {margin}"
                    )));
                }
                if f.dim != n_dom || f.dim != n_cod {
                    return Err(MapError::Invalid(format!(
                        "bifunction dimension {} does not match {n_dom} -> {n_cod}",
                        f.dim
                    )));
                }
                Ok(())
            }
            MapKind::Punctured { base, exclusion } => {
                let (xi, yi) = exclusion.max_index();
                if xi > n_dom || yi > n_cod {
                    return Err(MapError::Invalid(format!(
                        "exclusion `{exclusion}` exceeds the map dimensions"
                    )));
                }
                base.validate(n_dom, n_cod)
            }
            MapKind::Intersection(parts) => {
                if parts.is_empty() {
                    return Err(MapError::Invalid("empty intersection".into()));
                }
                parts.iter().try_for_each(|p| p.validate(n_dom, n_cod))
            }
            MapKind::Piecewise(cases) => {
                if cases.is_empty() {
                    return Err(MapError::Invalid("piecewise map without cases".into()));
                }
                for (cond, map) in cases {
                    let (xi, yi) = cond.max_index();
                    if yi > 0 || xi > n_dom {
                        return Err(MapError::Invalid(format!(
                            "piecewise condition `{cond}` may only use x1..x{n_dom}"
                        )));
                    }
                    map.validate(n_dom, n_cod)?;
                }
                Ok(())
            }
        }
    }

    fn active<'a>(
        cases: &'a [(Condition, MapKind)],
        x: &Point,
    ) -> Result<Option<&'a MapKind>, EvalError> {
        for (cond, map) in cases {
            if cond.eval(x.coords(), &[])? {
                return Ok(Some(map));
            }
        }
        Ok(None)
    }

    fn singleton_point(&self, x: &Point) -> Result<Option<Point>, EvalError> {
        match self {
            MapKind::Singleton(coords) => Ok(Some(Point::new(eval_all(coords, x)?))),
            MapKind::Piecewise(cases) => match MapKind::active(cases, x)? {
                Some(m) => m.singleton_point(x),
                None => Ok(None),
            },
            _ => Ok(None),
        }
    }

    fn contains(&self, cod: &ConvexBody, x: &Point, y: &Point) -> Result<bool, EvalError> {
        self.contains_with(cod, x, y, 0.0)
    }

    fn contains_with(
        &self,
        cod: &ConvexBody,
        x: &Point,
        y: &Point,
        floor: f64,
    ) -> Result<bool, EvalError> {
        Ok(match self {
            MapKind::Constant(body) => cod.contains(y) && body.contains(y),
            MapKind::Box { lo, hi } => {
                let lo = eval_all(lo, x)?;
                let hi = eval_all(hi, x)?;
                cod.contains(y)
                    && y.coords()
                        .iter()
                        .zip(lo.iter().zip(&hi))
                        .all(|(v, (l, h))| *v >= l - MEMBERSHIP_TOL && *v <= h + MEMBERSHIP_TOL)
            }
            MapKind::Ball { center, radius } => {
                let c = Point::new(eval_all(center, x)?);
                let r = radius.eval(x.coords(), &[])?;
                r >= 0.0 && cod.contains(y) && y.dist(&c) <= r + MEMBERSHIP_TOL
            }
            MapKind::Singleton(coords) => {
                let s = Point::new(eval_all(coords, x)?);
                cod.contains(&s) && y.dist(&s) <= MEMBERSHIP_TOL
            }
            MapKind::Sublevel { f, margin, open } => {
                let inside = if *open {
                    cod.contains_relint(y)
                } else {
                    cod.contains(y)
                };
                inside && {
                    let v = if *open {
                        f.eval_extended(x, y)?
                    } else {
                        f.eval(x, y)?
                    };
                    v < -margin - floor
                }
            }
            MapKind::Punctured { base, exclusion } => {
                base.contains_with(cod, x, y, floor)?
                    && exclusion.eval(x.coords(), y.coords())? > floor
            }
            MapKind::Intersection(parts) => {
                for p in parts {
                    if !p.contains_with(cod, x, y, floor)? {
                        return Ok(false);
                    }
                }
                true
            }
            MapKind::Piecewise(cases) => match MapKind::active(cases, x)? {
                Some(m) => m.contains_with(cod, x, y, floor)?,
                None => false,
            },
        })
    }

    /// Closed-form distance when available, `None` when a grid scan is needed.
    fn closed_distance(
        &self,
        cod: &ConvexBody,
        x: &Point,
        y: &Point,
    ) -> Result<Option<f64>, EvalError> {
        let projected = |q: Point| -> Option<f64> {
            if cod.contains(&q) {
                Some(y.dist(&q))
            } else {
                None
            }
        };
        Ok(match self {
            MapKind::Constant(body) => {
                if body == cod {
                    Some(cod.distance(y))
                } else {
                    projected(body.project(y))
                }
            }
            MapKind::Box { lo, hi } => {
                let lo = eval_all(lo, x)?;
                let hi = eval_all(hi, x)?;
                if lo.iter().zip(&hi).any(|(l, h)| l > &(h + MEMBERSHIP_TOL)) {
                    return Ok(Some(f64::INFINITY));
                }
                let q = Point::new(
                    y.coords()
                        .iter()
                        .zip(lo.iter().zip(&hi))
                        .map(|(v, (l, h))| v.clamp(*l, l.max(*h)))
                        .collect(),
                );
                projected(q)
            }
            MapKind::Ball { center, radius } => {
                let c = Point::new(eval_all(center, x)?);
                let r = radius.eval(x.coords(), &[])?;
                if r < 0.0 {
                    return Ok(Some(f64::INFINITY));
                }
                let d = y.dist(&c);
                let q = if d <= r { y.clone() } else { c.lerp(y, r / d) };
                projected(q)
            }
            MapKind::Singleton(coords) => {
                let s = Point::new(eval_all(coords, x)?);
                Some(if cod.contains(&s) {
                    y.dist(&s)
                } else {
                    f64::INFINITY
                })
            }
            MapKind::Sublevel { .. } => None,
            MapKind::Punctured { base, .. } => {
                if let Some(s) = base.singleton_point(x)? {
                    if !self.contains(cod, x, &s)? {
                        return Ok(Some(f64::INFINITY));
                    }
                }
                base.closed_distance(cod, x, y)?
            }
            MapKind::Intersection(parts) => {
                let mut single = None;
                for p in parts {
                    if let Some(s) = p.singleton_point(x)? {
                        single = Some(s);
                        break;
                    }
                }
                match single {
                    Some(s) => Some(if self.contains(cod, x, &s)? {
                        y.dist(&s)
                    } else {
                        f64::INFINITY
                    }),
                    None => None,
                }
            }
            MapKind::Piecewise(cases) => match MapKind::active(cases, x)? {
                Some(m) => m.closed_distance(cod, x, y)?,
                None => Some(f64::INFINITY),
            },
        })
    }

    /// Closed-form lower bound on the distance from a member `y` to the part
    /// of the codomain outside the value; `None` when a grid scan is needed.
    fn closed_clearance(
        &self,
        cod: &ConvexBody,
        x: &Point,
        y: &Point,
    ) -> Result<Option<f64>, EvalError> {
        Ok(match self {
            MapKind::Constant(body) if body == cod => Some(f64::INFINITY),
            MapKind::Constant(_) | MapKind::Sublevel { .. } => None,
            MapKind::Box { lo, hi } => {
                let lo = eval_all(lo, x)?;
                let hi = eval_all(hi, x)?;
                let push = 1e-7;
                let mut best = f64::INFINITY;
                for i in 0..y.dim() {
                    for (bound, sign) in [(lo[i], -1.0), (hi[i], 1.0)] {
                        let mut q = y.clone();
                        q.0[i] = bound + sign * push;
                        if cod.contains(&q) {
                            best = best.min((y.0[i] - bound).abs());
                        }
                    }
                }
                Some(best)
            }
            MapKind::Ball { center, radius } => {
                let c = Point::new(eval_all(center, x)?);
                let r = radius.eval(x.coords(), &[])?;
                let d = y.dist(&c);
                let dir = if d > 0.0 {
                    y.sub(&c).scale(1.0 / d)
                } else {
                    y.sub(&c)
                };
                if d > 0.0 && cod.contains(&c.add(&dir.scale(r + 1e-7))) {
                    Some((r - d).max(0.0))
                } else {
                    None
                }
            }
            MapKind::Singleton(_) => Some(0.0),
            MapKind::Punctured { base, exclusion } => {
                let e = exclusion.eval(x.coords(), y.coords())?.max(0.0);
                base.closed_clearance(cod, x, y)?.map(|b| b.min(e))
            }
            MapKind::Intersection(_) => None,
            MapKind::Piecewise(cases) => match MapKind::active(cases, x)? {
                Some(m) => m.closed_clearance(cod, x, y)?,
                None => Some(0.0),
            },
        })
    }

    /// Exclusion distance contributions along the structure (used as an
    /// upper bound on clearance when no closed form is available).
    fn exclusion_bound(&self, x: &Point, y: &Point) -> Result<f64, EvalError> {
        Ok(match self {
            MapKind::Punctured { base, exclusion } => exclusion
                .eval(x.coords(), y.coords())?
                .max(0.0)
                .min(base.exclusion_bound(x, y)?),
            MapKind::Intersection(parts) => {
                let mut b = f64::INFINITY;
                for p in parts {
                    b = b.min(p.exclusion_bound(x, y)?);
                }
                b
            }
            MapKind::Piecewise(cases) => match MapKind::active(cases, x)? {
                Some(m) => m.exclusion_bound(x, y)?,
                None => 0.0,
            },
            _ => f64::INFINITY,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SetValuedMap {
    domain: ConvexBody,
    codomain: ConvexBody,
    kind: MapKind,
}

impl SetValuedMap {
    pub fn new(domain: ConvexBody, codomain: ConvexBody, kind: MapKind) -> Result<Self, MapError> {
        kind.validate(domain.dim(), codomain.dim())?;
        Ok(SetValuedMap {
            domain,
            codomain,
            kind,
        })
    }

    /// A self-map `C ⇉ C`.
    pub fn on(body: &ConvexBody, kind: MapKind) -> Result<Self, MapError> {
        SetValuedMap::new(body.clone(), body.clone(), kind)
    }

    /// The constant map with value `C`.
    pub fn whole(body: &ConvexBody) -> Self {
        SetValuedMap {
            domain: body.clone(),
            codomain: body.clone(),
            kind: MapKind::Constant(body.clone()),
        }
    }

    pub fn domain(&self) -> &ConvexBody {
        &self.domain
    }

    pub fn codomain(&self) -> &ConvexBody {
        &self.codomain
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn is_sublevel(&self) -> bool {
        matches!(self.kind, MapKind::Sublevel { .. })
    }

    pub fn membership(&self, x: &Point, y: &Point) -> Result<bool, MapError> {
        Ok(self.kind.contains(&self.codomain, x, y)?)
    }

    /// Membership that also rejects points whose sublevel value or exclusion
    /// distance is within [`ROUNDING_FLOOR`] of zero.
    pub fn robust_membership(&self, x: &Point, y: &Point) -> Result<bool, MapError> {
        Ok(self
            .kind
            .contains_with(&self.codomain, x, y, ROUNDING_FLOOR)?)
    }

    /// `dist(y, Φ(x))`, `+∞` for an empty value.
    pub fn distance(&self, x: &Point, y: &Point, grid: &Grid) -> Result<f64, MapError> {
        if self.membership(x, y)? {
            return Ok(0.0);
        }
        if let Some(d) = self.kind.closed_distance(&self.codomain, x, y)? {
            return Ok(d);
        }
        let mut best = f64::INFINITY;
        for (i, q) in grid.nodes().iter().enumerate() {
            let d = q.dist(y);
            if d < best && self.membership(x, grid.node(i))? {
                best = d;
            }
        }
        Ok(best)
    }

    /// Whether `dist(y, Φ(x)) <= r`, scanning only nodes near `y`.
    pub fn within(&self, x: &Point, y: &Point, r: f64, grid: &Grid) -> Result<bool, MapError> {
        if self.membership(x, y)? {
            return Ok(true);
        }
        if let Some(d) = self.kind.closed_distance(&self.codomain, x, y)? {
            return Ok(d <= r);
        }
        for i in grid.nodes_within(y, r) {
            if self.membership(x, grid.node(i))? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Distance from `y` to the codomain points outside `Φ(x)` (0 when `y` is
    /// not a member), searched up to radius `cap`; returns `+∞` beyond it.
    pub fn clearance(&self, x: &Point, y: &Point, grid: &Grid, cap: f64) -> Result<f64, MapError> {
        if !self.membership(x, y)? {
            return Ok(0.0);
        }
        let bound = self.kind.exclusion_bound(x, y)?;
        if let Some(c) = self.kind.closed_clearance(&self.codomain, x, y)? {
            return Ok(c.min(bound));
        }
        let mut best = bound;
        for i in grid.nodes_within(y, cap) {
            let q = grid.node(i);
            let d = q.dist(y);
            if d < best && !self.membership(x, q)? {
                best = d;
            }
        }
        Ok(if best <= cap { best } else { f64::INFINITY })
    }

    /// Member grid nodes plus exact singleton points, in node order.
    pub fn sample(&self, x: &Point, grid: &Grid) -> Result<ValueSample, MapError> {
        let mut nodes = Vec::new();
        for (i, y) in grid.nodes().iter().enumerate() {
            if self.membership(x, y)? {
                nodes.push(i);
            }
        }
        let mut exact = Vec::new();
        for s in self.exact_points(x)? {
            let dup = nodes
                .iter()
                .any(|&i| grid.node(i).dist(&s) <= SAMPLE_DEDUP_TOL)
                || exact.iter().any(|e: &Point| e.dist(&s) <= SAMPLE_DEDUP_TOL);
            if !dup && self.membership(x, &s)? {
                exact.push(s);
            }
        }
        Ok(ValueSample { nodes, exact })
    }

    fn exact_points(&self, x: &Point) -> Result<Vec<Point>, EvalError> {
        fn walk(k: &MapKind, x: &Point, out: &mut Vec<Point>) -> Result<(), EvalError> {
            match k {
                MapKind::Singleton(_) => {
                    if let Some(s) = k.singleton_point(x)? {
                        out.push(s);
                    }
                }
                MapKind::Punctured { base, .. } => walk(base, x, out)?,
                MapKind::Intersection(parts) => {
                    for p in parts {
                        walk(p, x, out)?;
                    }
                }
                MapKind::Piecewise(cases) => {
                    if let Some(m) = MapKind::active(cases, x)? {
                        walk(m, x, out)?;
                    }
                }
                _ => {}
            }
            Ok(())
        }
        let mut out = Vec::new();
        walk(&self.kind, x, &mut out)?;
        Ok(out)
    }

    /// Membership is the conjunction of both maps.
    pub fn intersect(&self, other: &SetValuedMap) -> Result<SetValuedMap, MapError> {
        if self.domain != other.domain || self.codomain != other.codomain {
            return Err(MapError::Invalid(
                "intersection needs maps with the same domain and codomain".into(),
            ));
        }
        let mut parts = Vec::new();
        for k in [&self.kind, &other.kind] {
            match k {
                MapKind::Intersection(ps) => parts.extend(ps.iter().cloned()),
                other => parts.push(other.clone()),
            }
        }
        Ok(SetValuedMap {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            kind: MapKind::Intersection(parts),
        })
    }

    /// Checks that every domain grid node selects some piecewise case.
    pub fn check_cases(&self, domain_grid: &Grid) -> Result<(), MapError> {
        fn walk(k: &MapKind, x: &Point) -> Result<(), MapError> {
            match k {
                MapKind::Piecewise(cases) => match MapKind::active(cases, x)? {
                    Some(m) => walk(m, x),
                    None => Err(MapError::Invalid(format!(
                        "no piecewise case applies at x = {x}"
                    ))),
                },
                MapKind::Punctured { base, .. } => walk(base, x),
                MapKind::Intersection(parts) => parts.iter().try_for_each(|p| walk(p, x)),
                _ => Ok(()),
            }
        }
        domain_grid
            .nodes()
            .iter()
            .try_for_each(|x| walk(&self.kind, x))
    }
}

/// `F(x) = {y ∈ C : f(x,y) < -margin}`.
pub fn f_of(f: &Bifunction, body: &ConvexBody, margin: f64) -> Result<SetValuedMap, MapError> {
    SetValuedMap::on(
        body,
        MapKind::Sublevel {
            f: f.clone(),
            margin,
            open: false,
        },
    )
}

/// `F̂(x) = {y ∈ A : f̂(x,y) < -margin}` on `C`, with `A` the open enlarged body.
pub fn f_hat_of(f: &Bifunction, body: &ConvexBody, margin: f64) -> Result<SetValuedMap, MapError> {
    let a = f
        .extension_body(body)
        .ok_or_else(|| MapError::Invalid("bifunction has no extension".into()))?;
    SetValuedMap::new(
        body.clone(),
        a,
        MapKind::Sublevel {
            f: f.clone(),
            margin,
            open: true,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifunction::{parse, parse_condition};
    use crate::geometry::make_grid;

    fn e(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn c(s: &str) -> Condition {
        parse_condition(s).unwrap()
    }

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec())
    }

    fn map1() -> SetValuedMap {
        let c03 = ConvexBody::interval(0.0, 3.0);
        let one = MapKind::Singleton(vec![e("1")]);
        let two = MapKind::Singleton(vec![e("2")]);
        let open12 = MapKind::Punctured {
            base: Box::new(MapKind::Box {
                lo: vec![e("1")],
                hi: vec![e("2")],
            }),
            exclusion: e("min(abs(y1 - 1), abs(y1 - 2))"),
        };
        SetValuedMap::on(
            &c03,
            MapKind::Piecewise(vec![
                (c("x1 <= 1"), one),
                (c("x1 < 2"), open12),
                (c("true"), two),
            ]),
        )
        .unwrap()
    }

    fn map2() -> SetValuedMap {
        let c03 = ConvexBody::interval(0.0, 3.0);
        SetValuedMap::on(
            &c03,
            MapKind::Piecewise(vec![
                (c("x1 < 1"), MapKind::Singleton(vec![e("1")])),
                (
                    c("x1 <= 2"),
                    MapKind::Box {
                        lo: vec![e("1")],
                        hi: vec![e("2")],
                    },
                ),
                (c("true"), MapKind::Singleton(vec![e("2")])),
            ]),
        )
        .unwrap()
    }

    fn unit_disc_minus_circle_point() -> SetValuedMap {
        let ball = ConvexBody::unit_ball(2);
        SetValuedMap::new(
            ConvexBody::interval(0.0, 1.0),
            ball.clone(),
            MapKind::Piecewise(vec![
                (
                    c("x1 > 0"),
                    MapKind::Punctured {
                        base: Box::new(MapKind::Constant(ball.clone())),
                        exclusion: e("sqrt((y1 - cos(x1))^2 + (y2 - sin(x1))^2)"),
                    },
                ),
                (c("true"), MapKind::Constant(ball)),
            ]),
        )
        .unwrap()
    }

    #[test]
    fn membership_of_piecewise_maps() {
        let m = map1();
        assert!(m.membership(&p(&[1.5]), &p(&[1.7])).unwrap());
        assert!(m.membership(&p(&[0.5]), &p(&[1.0])).unwrap());
        assert!(!m.membership(&p(&[1.5]), &p(&[2.0])).unwrap());
        assert!(!m.membership(&p(&[1.5]), &p(&[1.0])).unwrap());
        let m2 = map2();
        assert!(m2.membership(&p(&[1.0]), &p(&[2.0])).unwrap());
        assert!(!m2.membership(&p(&[0.95]), &p(&[2.0])).unwrap());
        let m3 = unit_disc_minus_circle_point();
        let x = 0.5f64;
        assert!(!m3.membership(&p(&[x]), &p(&[x.cos(), x.sin()])).unwrap());
        assert!(m3.membership(&p(&[0.0]), &p(&[1.0, 0.0])).unwrap());
    }

    #[test]
    fn distances() {
        let c01 = ConvexBody::interval(0.0, 1.0);
        let grid = make_grid(&c01, 0.05).unwrap();
        let k = SetValuedMap::on(&c01, MapKind::Singleton(vec![e("1 - x1")])).unwrap();
        assert!((k.distance(&p(&[0.2]), &p(&[0.5]), &grid).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(k.distance(&p(&[0.2]), &p(&[0.8]), &grid).unwrap(), 0.0);
        let f = Bifunction::parse("cond(x1 = 0, cond(y1 > 0, -1, 0), 0)", 1).unwrap();
        let big_f = f_of(&f, &c01, 0.0).unwrap();
        assert_eq!(
            big_f.distance(&p(&[0.5]), &p(&[0.3]), &grid).unwrap(),
            f64::INFINITY
        );
        assert_eq!(big_f.distance(&p(&[0.0]), &p(&[0.0]), &grid).unwrap(), 0.05);
        let m = map1();
        let g03 = make_grid(m.domain(), 0.05).unwrap();
        assert_eq!(m.distance(&p(&[1.5]), &p(&[2.0]), &g03).unwrap(), 0.0);
        assert!((m.distance(&p(&[2.5]), &p(&[1.5]), &g03).unwrap() - 0.5).abs() < 1e-12);
        assert!(m.within(&p(&[1.5]), &p(&[2.5]), 0.5 + 1e-9, &g03).unwrap());
        assert!(!m.within(&p(&[0.5]), &p(&[2.5]), 1.0, &g03).unwrap());
    }

    #[test]
    fn sampling() {
        let m2 = map2();
        let g = make_grid(m2.domain(), 0.1).unwrap();
        let s = m2.sample(&p(&[1.5]), &g).unwrap();
        let ys: Vec<f64> = s.points(&g).iter().map(|q| q.0[0]).collect();
        assert_eq!(ys.len(), 11);
        assert_eq!(ys[0], 1.0);
        assert_eq!(*ys.last().unwrap(), 2.0);
        let whole = SetValuedMap::whole(m2.domain());
        assert_eq!(whole.sample(&p(&[0.0]), &g).unwrap().nodes.len(), g.len());
        let c01 = ConvexBody::interval(0.0, 1.0);
        let g01 = make_grid(&c01, 0.1).unwrap();
        let lin = Bifunction::parse("y1 - x1", 1).unwrap();
        let s = f_of(&lin, &c01, 0.0)
            .unwrap()
            .sample(&p(&[0.5]), &g01)
            .unwrap();
        assert_eq!(s.nodes.len(), 5);
        let s = f_of(&lin, &c01, 0.0)
            .unwrap()
            .sample(&p(&[0.0]), &g01)
            .unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn intersection_with_moving_point() {
        let phi1 = unit_disc_minus_circle_point();
        let phi2 = SetValuedMap::new(
            phi1.domain().clone(),
            phi1.codomain().clone(),
            MapKind::Singleton(vec![e("cos(x1)"), e("sin(x1)")]),
        )
        .unwrap();
        let both = phi1.intersect(&phi2).unwrap();
        let g = make_grid(both.codomain(), 0.1).unwrap();
        let s0 = both.sample(&p(&[0.0]), &g).unwrap();
        assert_eq!(s0.points(&g), vec![p(&[1.0, 0.0])]);
        assert!(both.sample(&p(&[0.3]), &g).unwrap().is_empty());
        assert_eq!(
            both.distance(&p(&[0.3]), &p(&[1.0, 0.0]), &g).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn clearance_sees_exclusions() {
        let m = unit_disc_minus_circle_point();
        let g = make_grid(m.codomain(), 0.05).unwrap();
        let y = p(&[1.0, 0.0]);
        assert_eq!(m.clearance(&p(&[0.0]), &y, &g, 1.0).unwrap(), f64::INFINITY);
        let cl = m.clearance(&p(&[0.01]), &y, &g, 1.0).unwrap();
        assert!((cl - 0.01).abs() < 1e-4, "{cl}");
    }

    #[test]
    fn invalid_maps() {
        let c01 = ConvexBody::interval(0.0, 1.0);
        assert!(SetValuedMap::on(&c01, MapKind::Singleton(vec![e("y1")])).is_err());
        assert!(SetValuedMap::on(&c01, MapKind::Singleton(vec![e("x1"), e("0")])).is_err());
        let gappy = SetValuedMap::on(
            &c01,
            MapKind::Piecewise(vec![(c("x1 < 0.5"), MapKind::Constant(c01.clone()))]),
        )
        .unwrap();
        let g = make_grid(&c01, 0.1).unwrap();
        assert!(gappy.check_cases(&g).is_err());
    }
}
