#![allow(dead_code)]

use qep_core::bifunction::{parse, Bifunction};
use qep_core::geometry::{ConvexBody, Grid, NodeSet, Point};
use qep_core::setmap::{MapKind, SetValuedMap};
use qep_core::solver::{QepProblem, QepSolution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_box(n: usize) -> ConvexBody {
    if n == 1 {
        ConvexBody::interval(0.0, 1.0)
    } else {
        ConvexBody::Box {
            lo: vec![0.0; n],
            hi: vec![1.0; n],
        }
    }
}

/// `f(x, y) = g(y) - g(x)` with `g(t) = a |t - c|^2` on the unit box.
pub struct KyFanInstance {
    pub problem: QepProblem,
    pub a: f64,
    pub center: Vec<f64>,
    pub h: f64,
}

impl KyFanInstance {
    pub fn g(&self, p: &Point) -> f64 {
        self.a
            * p.0
                .iter()
                .zip(&self.center)
                .map(|(t, c)| (t - c).powi(2))
                .sum::<f64>()
    }
}

pub fn kyfan_instance(seed: u64) -> KyFanInstance {
    let mut r = rng(seed);
    let n = if seed.is_multiple_of(2) { 1 } else { 2 };
    let h = if n == 1 { 0.01 } else { 0.05 };
    let a: f64 = r.gen_range(0.5..2.0);
    let center: Vec<f64> = (0..n).map(|_| r.gen_range(0.05..0.95)).collect();
    let sq = |v: &str| -> String {
        center
            .iter()
            .enumerate()
            .map(|(i, c)| format!("({v}{} - {c:?})^2", i + 1))
            .collect::<Vec<_>>()
            .join(" + ")
    };
    let text = format!("{a:?} * (({}) - ({}))", sq("y"), sq("x"));
    let body = unit_box(n);
    let f = Bifunction::parse(&text, n).unwrap();
    let problem = QepProblem::new(body.clone(), f, SetValuedMap::whole(&body)).unwrap();
    KyFanInstance {
        problem,
        a,
        center,
        h,
    }
}

fn affine_expr(r: &mut ChaCha8Rng, lo: f64, hi: f64, slope: f64) -> String {
    let c: f64 = r.gen_range(lo..hi);
    let s1: f64 = r.gen_range(-slope..slope);
    let s2: f64 = r.gen_range(-slope..slope);
    format!("{c:?} + {s1:?} * (x1 - 0.5) + {s2:?} * (x2 - 0.5)")
}

/// An open-graph strict sublevel ball and an lsc box around a common moving
/// center on `[0,1]^2`.
pub fn prop31_pair(seed: u64) -> (SetValuedMap, SetValuedMap) {
    let mut r = rng(seed);
    let body = unit_box(2);
    let a1 = affine_expr(&mut r, 0.3, 0.7, 0.3);
    let a2 = affine_expr(&mut r, 0.3, 0.7, 0.3);
    let rad: f64 = r.gen_range(0.25..0.4);
    let w: f64 = r.gen_range(0.2..0.3);
    let text = format!("(y1 - ({a1}))^2 + (y2 - ({a2}))^2 - {:?}", rad * rad);
    let phi1 = SetValuedMap::on(
        &body,
        MapKind::Sublevel {
            f: Bifunction::parse(&text, 2).unwrap(),
            margin: 0.0,
            open: false,
        },
    )
    .unwrap();
    let bound = |s: &str, a: &str| parse(&format!("{a} {s} {w:?}")).unwrap();
    let phi2 = SetValuedMap::on(
        &body,
        MapKind::Box {
            lo: vec![bound("-", &a1), bound("-", &a2)],
            hi: vec![bound("+", &a1), bound("+", &a2)],
        },
    )
    .unwrap();
    (phi1, phi2)
}

/// A box and a full-dimensional ball around a common moving center on
/// `[0,1]^2`.
pub fn prop32_pair(seed: u64) -> (SetValuedMap, SetValuedMap) {
    let mut r = rng(seed);
    let body = unit_box(2);
    let c1 = affine_expr(&mut r, 0.4, 0.6, 0.1);
    let c2 = affine_expr(&mut r, 0.4, 0.6, 0.1);
    let rad: f64 = r.gen_range(0.25..0.35);
    let w: f64 = r.gen_range(0.1..0.3);
    let bound = |s: &str, a: &str| parse(&format!("{a} {s} {w:?}")).unwrap();
    let phi1 = SetValuedMap::on(
        &body,
        MapKind::Box {
            lo: vec![bound("-", &c1), bound("-", &c2)],
            hi: vec![bound("+", &c1), bound("+", &c2)],
        },
    )
    .unwrap();
    let phi2 = SetValuedMap::on(
        &body,
        MapKind::Ball {
            center: vec![parse(&c1).unwrap(), parse(&c2).unwrap()],
            radius: parse(&format!("{rad:?}")).unwrap(),
        },
    )
    .unwrap();
    (phi1, phi2)
}

/// Fix mask and its boundary recomputed from raw neighbor relations; the
/// whole mask counts as boundary when no node is interior.
pub fn fix_boundary_oracle(
    k: &SetValuedMap,
    grid: &Grid,
    tol_fix: f64,
) -> (NodeSet, NodeSet, NodeSet) {
    let mask = NodeSet::from_mask(
        grid.nodes()
            .iter()
            .map(|x| k.distance(x, x, grid).unwrap() <= tol_fix)
            .collect(),
    );
    let interior = NodeSet::from_indices(
        grid.len(),
        mask.iter()
            .filter(|&i| grid.neighbors(i).iter().all(|&j| mask.contains(j))),
    );
    let boundary = if interior.is_empty() {
        mask.clone()
    } else {
        mask.difference(&interior)
    };
    (mask, interior, boundary)
}

pub fn nodes_of(sols: &[QepSolution]) -> Vec<usize> {
    sols.iter().map(|s| s.node).collect()
}

/// Hausdorff distance between a finite set on the line and `[a, b]`.
pub fn hausdorff_to_interval(points: &[f64], a: f64, b: f64) -> f64 {
    let mut d: f64 = points
        .iter()
        .map(|&p| (a - p).max(p - b).max(0.0))
        .fold(0.0, f64::max);
    let steps = 10_000;
    for k in 0..=steps {
        let t = a + (b - a) * k as f64 / steps as f64;
        let near = points
            .iter()
            .map(|p| (p - t).abs())
            .fold(f64::INFINITY, f64::min);
        d = d.max(near);
    }
    d
}

/// `dist(x, Φ(x))` for the first map of the 1-D fixture on `[0,3]`.
pub fn map1_self_distance(x: f64) -> f64 {
    if x <= 1.0 {
        1.0 - x
    } else if x < 2.0 {
        0.0
    } else {
        x - 2.0
    }
}
