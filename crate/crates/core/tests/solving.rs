mod common;

use common::*;
use qep_core::bifunction::{parse, Bifunction};
use qep_core::geometry::{make_grid, ConvexBody, Grid, NodeSet};
use qep_core::problem::{load_problem, BUILTINS};
use qep_core::setmap::{MapKind, SetValuedMap};
use qep_core::solver::{
    check_theorem, compute_fix, solve_ep, solve_qep_gmap, solve_qep_localization, ConditionStatus,
    Location, QepProblem, QepSolution, SolverError, SolverParams, Theorem,
};

fn solve_both(q: &QepProblem, g: &Grid, params: &SolverParams) -> Vec<QepSolution> {
    let a = solve_qep_localization(q, g, params).unwrap();
    let b = solve_qep_gmap(q, g, params).unwrap();
    assert_eq!(nodes_of(&a), nodes_of(&b));
    a
}

fn builtin_setup(name: &str) -> (QepProblem, Grid, SolverParams) {
    let p = load_problem(name).unwrap();
    let r = p.parameters(&Default::default());
    let g = make_grid(&p.body, r.h).unwrap();
    (p.qep().unwrap(), g, r.solver())
}

/// Solution checks recomputed from `f` and the sampled constraint values.
fn assert_verified(q: &QepProblem, g: &Grid, params: &SolverParams, sols: &[QepSolution]) {
    for s in sols {
        let x = g.node(s.node);
        assert_eq!(&s.point, x);
        assert!(q.k.distance(x, x, g).unwrap() <= params.tol_fix);
        let worst =
            q.k.sample(x, g)
                .unwrap()
                .points(g)
                .iter()
                .map(|y| q.f.eval(x, y).unwrap())
                .fold(f64::INFINITY, f64::min);
        assert!(worst >= -params.tol_eq, "x = {x}: f(x, y) = {worst}");
        assert_eq!(worst, s.equilibrium);
    }
}

#[test]
fn moving_box_solutions() {
    for (name, expect, loc) in [
        ("qep-movingbox-interior", 0.0, Location::InteriorEp),
        ("qep-movingbox-boundary", 0.5, Location::Boundary),
    ] {
        let (q, g, params) = builtin_setup(name);
        let sols = solve_both(&q, &g, &params);
        assert_eq!(sols.len(), 1, "{name}");
        assert!(
            (sols[0].point.0[0] - expect).abs() <= g.step() + 1e-9,
            "{name}: {}",
            sols[0].point
        );
        assert_eq!(sols[0].location, loc);
        assert_verified(&q, &g, &params, &sols);
    }
}

#[test]
fn reflection_has_the_midpoint() {
    let (q, g, params) = builtin_setup("example-3.1-k-reflect");
    let sols = solve_both(&q, &g, &params);
    assert_eq!(sols.len(), 1);
    assert!((sols[0].point.0[0] - 0.5).abs() < 1e-12);
    assert_verified(&q, &g, &params, &sols);
}

#[test]
fn identity_constraint_misses_the_origin() {
    let (q, g, params) = builtin_setup("example-3.1-k-identity");
    let sols = solve_both(&q, &g, &params);
    let xs: Vec<f64> = sols.iter().map(|s| s.point.0[0]).collect();
    assert!(!xs.contains(&0.0));
    assert_eq!(xs.len(), g.len() - 1);
    assert!(xs.iter().all(|&x| x > 0.0 && x <= 1.0));
    assert_verified(&q, &g, &params, &sols);
}

#[test]
fn linear_kyfan_solution_is_the_left_end() {
    let (q, g, params) = builtin_setup("kyfan-linear");
    let ep = solve_ep(&q.f, &q.body, &g, params.tol_eq).unwrap();
    let sols = solve_both(&q, &g, &params);
    assert_eq!(nodes_of(&sols), ep.solutions);
    assert_eq!(g.node(ep.solutions[0]).0[0], 0.0);
}

#[test]
fn random_kyfan_solutions_match_the_minimizer() {
    for seed in 0..6 {
        let inst = kyfan_instance(300 + seed);
        let g = make_grid(&inst.problem.body, inst.h).unwrap();
        let params = SolverParams::defaults(&inst.problem.f, inst.h);
        let sols = solve_both(&inst.problem, &g, &params);
        let best = g
            .nodes()
            .iter()
            .map(|x| inst.g(x))
            .fold(f64::INFINITY, f64::min);
        assert!(!sols.is_empty(), "seed {seed}");
        for s in &sols {
            assert!(
                inst.g(&s.point) - best <= params.tol_eq,
                "seed {seed}: {}",
                s.point
            );
        }
        assert_verified(&inst.problem, &g, &params, &sols);
    }
}

#[test]
fn hypotheses_imply_a_solution() {
    for name in BUILTINS {
        let p = load_problem(name).unwrap();
        let Some(q) = p.qep() else { continue };
        let r = p.parameters(&Default::default());
        let g = make_grid(&p.body, r.h).unwrap();
        let rep = check_theorem(&q, &g, Theorem::T31, &r.solver()).unwrap();
        if rep.all_pass() {
            let sols = solve_qep_localization(&q, &g, &r.solver()).unwrap();
            assert!(!sols.is_empty(), "{name}");
        }
    }
    for seed in 0..4 {
        let inst = kyfan_instance(400 + seed);
        let g = make_grid(&inst.problem.body, inst.h).unwrap();
        let params = SolverParams::defaults(&inst.problem.f, inst.h);
        let rep = check_theorem(&inst.problem, &g, Theorem::T31, &params).unwrap();
        assert!(rep.all_pass(), "seed {seed}: {:?}", rep.first_failure());
        assert!(!solve_qep_localization(&inst.problem, &g, &params)
            .unwrap()
            .is_empty());
    }
}

#[test]
fn whole_body_constraint_makes_boundary_condition_vacuous() {
    let inst = kyfan_instance(401);
    let g = make_grid(&inst.problem.body, inst.h).unwrap();
    let params = SolverParams::defaults(&inst.problem.f, inst.h);
    let rep = check_theorem(&inst.problem, &g, Theorem::T31, &params).unwrap();
    let iii = rep.condition("iii").unwrap();
    assert_eq!(iii.status, ConditionStatus::PassAtResolution);
    assert_eq!(iii.report.as_ref().unwrap().checked, 0);
    assert!(iii.witnesses.is_empty());
}

#[test]
fn fix_regions_match_neighbor_oracle() {
    for name in BUILTINS {
        let p = load_problem(name).unwrap();
        let Some(q) = p.qep() else { continue };
        let r = p.parameters(&Default::default());
        let g = make_grid(&p.body, r.h).unwrap();
        let fix = compute_fix(&q.k, &g, r.tol_fix).unwrap();
        let (mask, interior, _) = fix_boundary_oracle(&q.k, &g, r.tol_fix);
        assert_eq!(fix.mask, mask, "{name}");
        assert_eq!(fix.interior(), interior, "{name}");
        assert_eq!(fix.boundary(), mask.difference(&interior), "{name}");
        assert!(fix.closed, "{name}");
    }
}

#[test]
fn fixless_constraint_is_reported() {
    let c = ConvexBody::interval(0.0, 1.0);
    let k = SetValuedMap::on(
        &c,
        MapKind::Singleton(vec![parse("cond(x1 < 0.5, 1, 0)").unwrap()]),
    )
    .unwrap();
    let q = QepProblem::new(c.clone(), Bifunction::parse("y1 - x1", 1).unwrap(), k).unwrap();
    let g = make_grid(&c, 0.05).unwrap();
    let params = SolverParams::defaults(&q.f, 0.05);
    assert!(matches!(
        compute_fix(&q.k, &g, params.tol_fix),
        Err(SolverError::EmptyFix { .. })
    ));
    assert!(matches!(
        solve_qep_localization(&q, &g, &params),
        Err(SolverError::EmptyFix { .. })
    ));
    assert!(matches!(
        solve_qep_gmap(&q, &g, &params),
        Err(SolverError::EmptyFix { .. })
    ));
}

#[test]
fn nonzero_diagonal_is_rejected() {
    let c = ConvexBody::interval(0.0, 1.0);
    let q = QepProblem::new(
        c.clone(),
        Bifunction::parse("y1 - x1 + 0.1", 1).unwrap(),
        SetValuedMap::whole(&c),
    )
    .unwrap();
    let g = make_grid(&c, 0.1).unwrap();
    let params = SolverParams::defaults(&q.f, 0.1);
    assert!(matches!(
        solve_qep_localization(&q, &g, &params),
        Err(SolverError::Diagonal { .. })
    ));
    assert!(matches!(
        solve_qep_gmap(&q, &g, &params),
        Err(SolverError::Diagonal { .. })
    ));
}

#[test]
fn non_self_map_is_rejected() {
    let c = ConvexBody::interval(0.0, 1.0);
    let k = SetValuedMap::whole(&ConvexBody::interval(0.0, 2.0));
    assert!(QepProblem::new(c, Bifunction::parse("y1 - x1", 1).unwrap(), k).is_err());
}

#[test]
fn theorem_reports_cover_every_condition() {
    let (q, g, params) = builtin_setup("qep-movingbox-boundary");
    for (which, ids) in [
        (Theorem::T31, vec!["i", "ii", "iii"]),
        (Theorem::T32, vec!["i", "ii", "iii"]),
        (Theorem::T33, vec!["C.polytope", "i", "ii", "iii"]),
        (Theorem::T34, vec!["i", "ii", "iii", "iv"]),
    ] {
        let rep = check_theorem(&q, &g, which, &params).unwrap();
        for id in ["K.lsc", "K.nonempty", "K.convex", "fix.closed"]
            .iter()
            .chain(&ids)
        {
            assert!(rep.condition(id).is_some(), "{which:?} lacks {id}");
        }
    }
}

#[test]
fn boundary_nodes_are_in_the_mask() {
    let (q, g, params) = builtin_setup("qep-movingbox-boundary");
    let fix = compute_fix(&q.k, &g, params.tol_fix).unwrap();
    let bd: NodeSet = fix.boundary();
    assert!(bd.difference(&fix.mask).is_empty());
    assert!(!bd.is_empty());
}
