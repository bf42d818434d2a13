use cmcgraph::verify::{
    builtin_suite, check_contact_angle, render_table, run_case, run_items, run_suite, CheckKind, SuiteItem,
    VerificationCase,
};

const USER_CASE: &str = r#"{
    "name": "user-ellipse",
    "metric": {"name": "perturbed-flat", "amplitude": 0.03},
    "domain": {"shape": "ellipse", "a": 1.0, "b": 0.7, "h": 0.08},
    "phi": {"kind": "cosine", "mean": -0.2, "amplitude": 0.1, "mode": 3},
    "eps_schedule": [0.1, 0.01, 0.001],
    "checks": ["lambda-uniqueness", "compatibility", "shift-identity", "hypotheses"],
    "seed": 3
}"#;

#[test]
fn user_case_file_runs() {
    let case: VerificationCase = serde_json::from_str(USER_CASE).unwrap();
    let out = run_case(&case);
    assert!(out.passed, "{out:#?}");
    assert_eq!(out.checks.len(), 4);
    let json = serde_json::to_string(&out).unwrap();
    assert!(json.contains("\"lambda-uniqueness\""));
}

#[test]
fn unknown_fields_are_rejected() {
    let bad = USER_CASE.replace("\"seed\": 3", "\"seed\": 3, \"sede\": 4");
    assert!(serde_json::from_str::<VerificationCase>(&bad).is_err());
}

#[test]
fn missing_expectation_is_a_case_error() {
    let mut case: VerificationCase = serde_json::from_str(USER_CASE).unwrap();
    case.checks.push(CheckKind::ExpectedLambda);
    let out = run_case(&case);
    assert!(!out.passed);
    assert!(out.error.as_deref().unwrap().contains("expected_lambda"));
}

#[test]
fn negative_controls_are_flagged() {
    let out = run_suite("negative-controls", None).unwrap();
    assert!(out.passed, "{}", render_table(&out));
    for o in &out.outcomes {
        let flagged = o.checks.iter().any(|c| c.measured.get("violation_flagged") == Some(&1.0));
        assert!(flagged, "{} not flagged", o.case);
    }
}

#[test]
fn hypothesis_check_fails_when_violation_is_unexpected() {
    let items = builtin_suite("negative-controls").unwrap();
    let SuiteItem::Case(case) = &items[0] else { panic!("first item is a case") };
    let mut case = (**case).clone();
    case.expect_hypothesis_violation = false;
    assert!(!run_case(&case).passed);
}

#[test]
fn contact_angle_on_cap() {
    let items = builtin_suite("flat").unwrap();
    let cap = items
        .iter()
        .find_map(|i| match i {
            SuiteItem::Case(c) if c.name == "flat-cap" => Some((**c).clone()),
            _ => None,
        })
        .unwrap();
    let out = check_contact_angle(&cap);
    let c = out.check("contact-angle").unwrap();
    assert!(c.passed);
    assert!(c.measured["expected_error"] < 1e-3);
}

#[test]
fn suites_round_trip_through_json() {
    let items = builtin_suite("all").unwrap();
    let text = serde_json::to_string(&items).unwrap();
    let back: Vec<SuiteItem> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, items);
    assert!(builtin_suite("nope").is_err());
    let ricci_only: Vec<SuiteItem> = back.into_iter().filter(|i| matches!(i, SuiteItem::Ricci { .. })).collect();
    let out = run_items("ricci", &ricci_only);
    assert!(out.passed);
    assert_eq!(out.outcomes.len(), 4);
}
