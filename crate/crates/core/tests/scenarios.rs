use t2calc::scenario::{builtin, catalog, coverage_gaps, run_scenario, RunOptions, Scenario, SuiteSelection};

fn quick(name: &str, points: usize) -> t2calc::VerificationReport {
    let sc = builtin(name).unwrap();
    run_scenario(&sc, &RunOptions { points: Some(points), ..Default::default() }).unwrap()
}

#[test]
fn every_builtin_passes() {
    for (name, _) in catalog() {
        let r = quick(name, 8);
        let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect();
        assert!(failed.is_empty(), "{name}: {failed:?}");
        assert!(r.summary.total > 0, "{name}");
    }
}

#[test]
fn builtins_cover_all_anchors() {
    let reports: Vec<_> = catalog()
        .into_iter()
        .map(|(name, _)| {
            let sc = builtin(name).unwrap();
            run_scenario(&sc, &RunOptions { points: Some(4), suite: Some(SuiteSelection::All), ..Default::default() }).unwrap()
        })
        .collect();
    assert_eq!(coverage_gaps(&reports), Vec::<&str>::new());
}

#[test]
fn builtins_round_trip_through_json() {
    for (name, _) in catalog() {
        let sc = builtin(name).unwrap();
        assert_eq!(Scenario::from_json_str(&sc.to_json()).unwrap(), sc, "{name}");
    }
}

#[test]
fn seeds_change_points_not_verdicts() {
    let a = run_scenario(&builtin("catz-n1").unwrap(), &RunOptions { points: Some(5), seed: Some(1), ..Default::default() }).unwrap();
    let b = run_scenario(&builtin("catz-n1").unwrap(), &RunOptions { points: Some(5), seed: Some(2), ..Default::default() }).unwrap();
    assert!(a.all_passed() && b.all_passed());
    assert_eq!(a.checks.len(), b.checks.len());
    assert_ne!(a.to_json(), b.to_json());
}

#[test]
fn finsler_object_on_wrong_chart_is_rejected() {
    let mut sc = builtin("identities-n1").unwrap();
    let two = builtin("finsler-n2").unwrap();
    sc.objects.finsler = two.objects.finsler;
    assert!(sc.check_objects().is_err());
}

#[test]
fn decomposition_regressions() {
    let r = quick("decompose-n1", 10);
    for id in ["thm1.given.eq18", "thm1.given.torsion", "thm1.given.spray"] {
        assert!(r.checks.iter().any(|c| c.id == id && c.passed), "{id}");
    }
    let r = quick("linear-prop4-n1", 10);
    let c = r.checks.iter().find(|c| c.id == "prop4.coincide_iff_no_torsion").unwrap();
    assert!(c.passed && !c.note.as_deref().unwrap().contains("= 0.000e0"));
}
