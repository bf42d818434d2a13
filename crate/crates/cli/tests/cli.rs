use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmcgraph")).args(args).current_dir(root()).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn validate(schema: &str, doc: &Value) {
    let schema: Value = read_json(&root().join("schemas").join(schema));
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

const CAP: &str = r#"{"domain": {"shape": "disk", "radius": 1.0, "h": 0.1},
    "phi": {"kind": "constant", "value": -0.5773502691896258}}"#;

#[test]
fn mesh_reports_boundary_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("disk");
    let o = run(&["mesh", "-c", &write_config(dir.path(), "c.json", CAP), "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    let summary = read_json(&out.join("mesh.json"));
    validate("mesh-summary.schema.json", &summary);
    assert!((summary["kappa1"].as_f64().unwrap() - 1.0).abs() < 0.01);
    assert!(out.join("mesh.txt").exists());

    let ellipse = r#"{"domain": {"shape": "ellipse", "a": 2.0, "b": 1.0, "h": 0.05}}"#;
    let out = dir.path().join("ellipse");
    let o = run(&["mesh", "-c", &write_config(dir.path(), "e.json", ellipse), "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    let k = read_json(&out.join("mesh.json"))["kappa1"].as_f64().unwrap();
    assert!((k - 0.25).abs() < 0.0125, "{k}");
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_h = write_config(dir.path(), "h.json", r#"{"domain": {"shape": "disk", "radius": 1.0, "h": 0.0}}"#);
    let o = run(&["mesh", "-c", &bad_h, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("domain.h"));

    let unknown =
        write_config(dir.path(), "u.json", r#"{"domain": {"shape": "disk", "radius": 1.0, "h": 0.1}, "phy": 1}"#);
    let o = run(&["continuation", "-c", &unknown, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("phy"));

    let o = run(&["solve", "-c", "does-not-exist.json", "--eps", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_shift_and_zero_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", CAP);
    let solve = |ups: &str, name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["solve", "-c", &cfg, "--eps", "1e-3", "--upsilon", ups, "-o", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let v = read_json(&out.join("solve.json"));
        validate("solve-report.schema.json", &v);
        (v, out)
    };
    let (a, out) = solve("0", "a", &["--vtk", "--dump-jacobian"]);
    assert!(out.join("solve.vtk").exists() && out.join("jacobian.txt").exists());
    assert!((a["lambda_mean"].as_f64().unwrap() - 1.0).abs() < 1e-2);
    let (b, _) = solve("0.5", "b", &[]);
    for (x, y) in floats(&a["u"]).iter().zip(floats(&b["u"])) {
        assert!((x - y - 500.0).abs() < 1e-9, "{x} {y}");
    }
    assert!(b["final_residual"].as_f64().unwrap() <= 1e-10);

    let (noisy, _) = solve("0", "noise", &["--init-noise", "1.0", "--seed", "11"]);
    for (x, y) in floats(&a["u"]).iter().zip(floats(&noisy["u"])) {
        assert!((x - y).abs() <= 1e-8);
    }

    let zero = write_config(dir.path(), "z.json", r#"{"domain": {"shape": "disk", "radius": 1.0, "h": 0.1}}"#);
    let out = dir.path().join("z");
    assert!(run(&["solve", "-c", &zero, "--eps", "0.1", "-o", out.to_str().unwrap()]).status.success());
    let z = read_json(&out.join("solve.json"));
    assert!(floats(&z["lambda_field"]).iter().all(|v| *v == 0.0));
}

#[test]
fn continuation_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", CAP);
    let out = dir.path().join("cap");
    let o = run(&["continuation", "-c", &cfg, "-o", out.to_str().unwrap(), "--dump-fields", "--vtk"]);
    assert!(o.status.success());
    let v = read_json(&out.join("continuation.json"));
    validate("continuation-report.schema.json", &v);
    let r = &v["report"];
    assert!((r["lambda_final"].as_f64().unwrap() - 1.0).abs() < 1e-2);
    let spreads: Vec<f64> =
        r["records"].as_array().unwrap().iter().map(|x| x["lambda_spread"].as_f64().unwrap()).collect();
    assert!(spreads.windows(2).all(|w| w[1] < w[0]));
    assert!(v["u_final"].is_array() && out.join("continuation.vtk").exists());

    let zero = write_config(dir.path(), "z.json", r#"{"domain": {"shape": "disk", "radius": 1.0, "h": 0.1}}"#);
    let out = dir.path().join("zero");
    assert!(run(&["continuation", "-c", &zero, "-o", out.to_str().unwrap()]).status.success());
    assert_eq!(read_json(&out.join("continuation.json"))["report"]["lambda_final"].as_f64(), Some(0.0));

    let hyper = write_config(
        dir.path(),
        "h.json",
        r#"{"metric": {"name": "hyperbolic"}, "domain": {"shape": "disk", "radius": 0.5, "h": 0.05},
            "phi": {"kind": "constant", "value": -0.4}, "eps_schedule": [0.1, 0.01]}"#,
    );
    let out = dir.path().join("hyper");
    let o = run(&["continuation", "-c", &hyper, "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    let warnings = read_json(&out.join("continuation.json"))["report"]["warnings"].clone();
    assert!(warnings.as_array().unwrap().iter().any(|w| w.as_str().unwrap().contains("Ricci")));
}

#[test]
fn newton_failure_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"domain": {"shape": "disk", "radius": 1.0, "h": 0.1},
            "phi": {"kind": "constant", "value": -0.5773502691896258}, "newton": {"max_iter": 1}}"#,
    );
    let out = dir.path().join("o");
    let o = run(&["continuation", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("residual history"));
    let partial = read_json(&out.join("continuation.json"));
    assert_eq!(partial["report"]["complete"], Value::Bool(false));
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", CAP);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["continuation", "-c", &cfg, "-o", a.to_str().unwrap(), "--workers", "1"]).status.success());
    assert!(run(&["continuation", "-c", &cfg, "-o", b.to_str().unwrap(), "--workers", "3"]).status.success());
    assert_eq!(
        std::fs::read(a.join("continuation.json")).unwrap(),
        std::fs::read(b.join("continuation.json")).unwrap()
    );
}

#[test]
fn verify_suites_and_case_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = run(&["verify", "--suite", "negative-controls", "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    let v = read_json(&out.join("verify.json"));
    validate("verify-report.schema.json", &v);
    assert!(String::from_utf8_lossy(&o.stdout).contains("suite negative-controls: PASSED"));

    let case = r#"{"name": "wrong-lambda",
        "metric": {"name": "euclidean"},
        "domain": {"shape": "disk", "radius": 1.0, "h": 0.1},
        "phi": {"kind": "constant", "value": -0.5773502691896258},
        "eps_schedule": [0.1, 0.01],
        "expected_lambda": {"value": 1.5, "tolerance": 0.01},
        "checks": ["expected-lambda", "contact-angle"]}"#;
    let o = run(&["verify", "--case", &write_config(dir.path(), "case.json", case), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let v = read_json(&out.join("verify.json"));
    validate("verify-report.schema.json", &v);
    assert_eq!(v["outcomes"][0]["checks"][1]["passed"], Value::Bool(true));

    assert_eq!(run(&["verify", "--suite", "nope", "-o", out.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn shipped_configs_match_schema() {
    for entry in std::fs::read_dir(root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        validate("run-config.schema.json", &read_json(&path));
    }
}
