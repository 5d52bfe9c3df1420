mod common;

use qep_core::analysis::{
    check_convex_values, check_lsc, check_open_graph, check_open_lower_sections, probe_depth,
    prop31_oracle, prop32_oracle, CheckReport, Grids, OracleVerdict, Verdict, ViolationKind,
};
use qep_core::geometry::{make_grid, Grid, NodeSet, Point};
use qep_core::problem::{load_problem, Problem};
use qep_core::setmap::SetValuedMap;

fn grids_for(p: &Problem, h: f64) -> (Grid, Grid) {
    (
        make_grid(&p.domain, h).unwrap(),
        make_grid(&p.body, h).unwrap(),
    )
}

fn probe(x: &Point, xn: &Point, k: usize) -> Point {
    x.lerp(xn, 0.5f64.powi(k as i32))
}

fn is_neighbor(grid: &Grid, x: &Point, other: &Point) -> bool {
    let i = grid.nearest(x);
    grid.node(i).dist(x) < 1e-12
        && grid
            .neighbors(i)
            .iter()
            .any(|&j| grid.node(j).dist(other) < 1e-12)
}

/// Re-derives every stored witness from the map alone.
fn assert_sound(map: &SetValuedMap, dom: &Grid, cod: &Grid, rep: &CheckReport, eps: f64) {
    assert_eq!(rep.verdict, Verdict::Fail);
    assert!(!rep.violations.is_empty());
    assert!(rep.total_violations >= rep.violations.len());
    let depth = probe_depth(dom.step().min(cod.step()));
    for v in &rep.violations {
        assert!(is_neighbor(dom, &v.x, &v.other), "{:?}", v);
        assert!(
            map.robust_membership(&v.x, &v.y).unwrap(),
            "witness value not a member: {:?}",
            v
        );
        match v.kind {
            ViolationKind::Lsc => {
                for k in 0..=depth {
                    let d = map.distance(&probe(&v.x, &v.other, k), &v.y, cod).unwrap();
                    assert!(d > eps, "probe {k} is within eps: {d}");
                }
                assert_eq!(v.magnitude, map.distance(&v.other, &v.y, cod).unwrap());
            }
            ViolationKind::OpenSections => {
                assert!(!map.membership(&v.other, &v.y).unwrap());
                for k in 1..=depth {
                    assert!(!map.membership(&probe(&v.x, &v.other, k), &v.y).unwrap());
                }
            }
            ViolationKind::OpenGraph => {
                for k in 0..=depth {
                    let cap = eps * 0.5f64.powi(k as i32);
                    let c = map
                        .clearance(&probe(&v.x, &v.other, k), &v.y, cod, cap)
                        .unwrap();
                    assert!(c < cap, "probe {k} clears {c} >= {cap}");
                }
            }
            other => panic!("unexpected witness kind {other:?}"),
        }
    }
    let mut sorted = rep.violations.clone();
    sorted.sort_by(|a, b| {
        a.x.lex_cmp(&b.x)
            .then(a.y.lex_cmp(&b.y))
            .then(a.other.lex_cmp(&b.other))
    });
    assert_eq!(sorted, rep.violations);
}

#[derive(Clone, Copy, Debug)]
enum Check {
    Lsc,
    Sections,
    Graph,
}

fn run(map: &SetValuedMap, dom: &Grid, cod: &Grid, check: Check, eps: f64) -> CheckReport {
    let g = Grids {
        domain: dom,
        codomain: cod,
    };
    let all = NodeSet::full(dom.len());
    match check {
        Check::Lsc => check_lsc(map, g, &all, eps),
        Check::Sections => check_open_lower_sections(map, g, &all),
        Check::Graph => check_open_graph(map, g, &all, eps),
    }
    .unwrap()
}

fn target(name: &str, intersect: bool) -> (Problem, SetValuedMap) {
    let p = load_problem(name).unwrap();
    let map = if intersect {
        p.constraint
            .intersect(p.secondary.as_ref().unwrap())
            .unwrap()
    } else {
        p.constraint.clone()
    };
    (p, map)
}

const CASES: &[(&str, bool, Check, bool)] = &[
    ("example-2.1-map1", false, Check::Lsc, true),
    ("example-2.1-map2", false, Check::Lsc, false),
    ("example-3.2", false, Check::Lsc, true),
    ("example-3.2", false, Check::Sections, false),
    ("example-3.2", false, Check::Graph, false),
    ("example-3.3", false, Check::Sections, true),
    ("example-3.3", false, Check::Graph, false),
    ("example-3.4", true, Check::Lsc, false),
];

#[test]
fn fail_witnesses_are_sound() {
    let h = 0.05;
    let eps = 3.0 * h;
    for &(name, intersect, check, pass) in CASES {
        if pass {
            continue;
        }
        let (p, map) = target(name, intersect);
        let (dom, cod) = grids_for(&p, h);
        let rep = run(&map, &dom, &cod, check, eps);
        assert_sound(&map, &dom, &cod, &rep, eps);
    }
}

#[test]
fn verdicts_are_stable_under_refinement() {
    for &(name, intersect, check, pass) in CASES {
        let (p, map) = target(name, intersect);
        for h in [0.1, 0.05, 0.025] {
            let (dom, cod) = grids_for(&p, h);
            let rep = run(&map, &dom, &cod, check, 3.0 * h);
            assert_eq!(rep.passed(), pass, "{name} {check:?} at h = {h}");
        }
    }
}

#[test]
fn map2_witnesses_stay_near_jumps() {
    let (p, map) = target("example-2.1-map2", false);
    for h in [0.1, 0.05, 0.025] {
        let (dom, cod) = grids_for(&p, h);
        let rep = run(&map, &dom, &cod, Check::Lsc, 3.0 * h);
        let near = |c: f64| {
            rep.violations
                .iter()
                .filter(|v| (v.x.0[0] - c).abs() <= h + 1e-12)
                .count()
        };
        assert!(near(1.0) > 0 && near(2.0) > 0, "h = {h}");
        assert_eq!(near(1.0) + near(2.0), rep.violations.len(), "h = {h}");
    }
}

#[test]
fn intersection_witnesses_sit_at_origin() {
    let (p, map) = target("example-3.4", true);
    for h in [0.1, 0.05, 0.025] {
        let (dom, cod) = grids_for(&p, h);
        let rep = run(&map, &dom, &cod, Check::Lsc, 3.0 * h);
        assert!(rep.violations.iter().all(|v| v.x.0[0] == 0.0), "h = {h}");
    }
}

#[test]
fn eps_must_exceed_step() {
    let (p, map) = target("example-2.1-map1", false);
    let (dom, cod) = grids_for(&p, 0.1);
    let g = Grids {
        domain: &dom,
        codomain: &cod,
    };
    assert!(check_lsc(&map, g, &NodeSet::full(dom.len()), 0.1).is_err());
    assert!(check_open_graph(&map, g, &NodeSet::full(dom.len()), 0.05).is_err());
}

#[test]
fn builtin_values_are_convex() {
    for name in ["example-2.1-map1", "example-2.1-map2", "example-3.4"] {
        let p = load_problem(name).unwrap();
        let (dom, cod) = grids_for(&p, 0.1);
        let g = Grids {
            domain: &dom,
            codomain: &cod,
        };
        let rep = check_convex_values(&p.constraint, g, &NodeSet::full(dom.len())).unwrap();
        assert!(rep.passed(), "{name}: {:?}", rep.violations.first());
    }
}

#[test]
fn random_oracle_pairs_are_consistent() {
    let body = common::unit_box(2);
    let g = make_grid(&body, 0.1).unwrap();
    for seed in 0..4 {
        let (a, b) = common::prop31_pair(1000 + seed);
        let r = prop31_oracle(&a, &b, Grids::same(&g), 0.3).unwrap();
        assert_eq!(
            r.verdict,
            OracleVerdict::Consistent,
            "prop31 seed {seed}: {:?}",
            r.reason
        );
        let (a, b) = common::prop32_pair(1100 + seed);
        let r = prop32_oracle(&a, &b, Grids::same(&g), 0.3).unwrap();
        assert_eq!(
            r.verdict,
            OracleVerdict::Consistent,
            "prop32 seed {seed}: {:?}",
            r.reason
        );
    }
}

#[test]
fn oracle_reports_counterexample_on_origin_gap() {
    let p = load_problem("example-3.4").unwrap();
    let (dom, cod) = grids_for(&p, 0.05);
    let g = Grids {
        domain: &dom,
        codomain: &cod,
    };
    let s = p.secondary.as_ref().unwrap();
    let r = prop31_oracle(&p.constraint, s, g, 0.15).unwrap();
    assert_ne!(r.verdict, OracleVerdict::Consistent);
}
