mod common;

use common::planted::{planted, program, suite};
use qrelent::conic::{export_sdpa, import_sdpa, InteriorPoint, DEFAULT_TOL};

#[test]
fn planted_suite_recovers_the_planted_optimum() {
    for (i, p) in suite().iter().enumerate() {
        let (prog, vars) = program(p);
        let sol = prog.solve(&InteriorPoint::default(), DEFAULT_TOL).unwrap();
        assert!(sol.is_optimal(), "instance {i}: {:?}", sol.status);
        let err = vars
            .iter()
            .zip(&p.y)
            .map(|(v, y)| (sol.x[v.index()] - y).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "instance {i}: |y − y*| = {err:e}");
        assert!((sol.objective - p.objective).abs() <= 1e-6 * (1.0 + p.objective.abs()));
    }
}

#[test]
fn planted_instance_survives_sdpa_round_trip() {
    let p = planted(5, 2, 3, 42);
    let (prog, _) = program(&p);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("planted.dat-s");
    export_sdpa(&prog, &path).unwrap();
    let back = import_sdpa(&path).unwrap();
    assert_eq!(back.canonical(), prog.standard_form().unwrap().canonical());
}
