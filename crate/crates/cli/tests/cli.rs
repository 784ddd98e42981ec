use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lightray_cli::envelope::ResultEnvelope;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lightray"));
    c.env_remove("LIGHTRAY_THREADS");
    c
}

fn scene(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenes")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn envelope(out: &Output) -> ResultEnvelope {
    serde_json::from_slice(&out.stdout).expect("json envelope on stdout")
}

fn write_scene(dir: &tempfile::TempDir, body: &str) -> PathBuf {
    let p = dir.path().join("scene.json");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn contact_defaults_match_the_exact_form() {
    let out = run(&["contact"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let env = envelope(&out);
    assert_eq!(env.command, "contact");
    assert!(env.all_passed());
    assert!(env.checks.iter().all(|c| c.residual < 1e-8));
}

#[test]
fn past_timelike_curve_is_nonnegative() {
    let p = scene("past_timelike_isotopy.json");
    let out = run(&["isotopy", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let env = envelope(&out);
    assert_eq!(env.classifications[0].class, "NonNegative");
    assert_eq!(env.classifications[0].verdict, "causal-past");
}

#[test]
fn example_mu_recovery_passes() {
    let p = scene("example_mu_recover.json");
    let out = run(&["recover", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let env = envelope(&out);
    assert!(env.all_passed());
    assert_eq!(env.classifications[0].class, "Mixed");
}

#[test]
fn bundled_scenes_all_pass() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let stem = path.file_stem().unwrap().to_str().unwrap().to_string();
        let command = stem.rsplit('_').next().unwrap();
        let out = run(&[command, "--config", path.to_str().unwrap()]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{stem}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        seen += 1;
    }
    assert!(seen >= 5);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let p = scene("wiggly_spacelike_isotopy.json");
    let a = run(&["isotopy", "--config", p.to_str().unwrap()]);
    let b = run(&["isotopy", "--config", p.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn thread_count_from_environment() {
    let a = bin()
        .args(["recover"])
        .env("LIGHTRAY_THREADS", "2")
        .output()
        .unwrap();
    let b = run(&["recover"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let zero = bin().args(["ray"]).env("LIGHTRAY_THREADS", "0").output().unwrap();
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn envelope_round_trips_through_serde() {
    let out = run(&["cotton"]);
    let env = envelope(&out);
    let text = serde_json::to_string(&env).unwrap();
    let back: ResultEnvelope = serde_json::from_str(&text).unwrap();
    assert_eq!(env, back);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["command", "config_digest", "payload", "classifications", "checks"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(env.config_digest.len(), 64);
}

#[test]
fn digest_tracks_the_configuration() {
    let a = envelope(&run(&["ray"]));
    let b = envelope(&run(&["ray", "--tol", "1e-9"]));
    let c = envelope(&run(&["ray", "--seed", "7"]));
    assert_ne!(a.config_digest, b.config_digest);
    assert_ne!(a.config_digest, c.config_digest);
    assert_eq!(a.config_digest, envelope(&run(&["ray"])).config_digest);
}

#[test]
fn csv_profile_has_header_and_rows() {
    let out = run(&["isotopy", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,sample_index,value"));
    let rows: Vec<_> = lines.collect();
    assert!(!rows.is_empty());
    for r in rows.iter().take(50) {
        let f: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f.len(), 3);
    }
}

#[test]
fn csv_without_profile_is_a_usage_error() {
    let out = run(&["ray", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scene(&dir, r#"{"bogus": 1}"#);
    assert_eq!(run(&["ray", "--config", p.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(
        run(&["ray", "--config", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["ray", "--tol", "-1"]).status.code(), Some(2));
    let p = write_scene(&dir, r#"{"metric": {"catalog": {"name": "anti-de-sitter"}}}"#);
    assert_eq!(run(&["ray", "--config", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn failed_expectation_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scene(
        &dir,
        r#"{"metric": {"catalog": {"name": "minkowski-3"}},
            "isotopy": {"curve": "past_timelike", "expect": "NonPositive"}}"#,
    );
    let out = run(&["isotopy", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let env = envelope(&out);
    assert!(!env.all_passed());
}

#[test]
fn output_path_from_flag_and_scene() {
    let dir = tempfile::tempdir().unwrap();
    let flag = dir.path().join("flag.json");
    let out = run(&["chart", "--out", flag.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let env: ResultEnvelope =
        serde_json::from_str(&std::fs::read_to_string(&flag).unwrap()).unwrap();
    assert_eq!(env.command, "chart");

    let target = dir.path().join("scene_out.json");
    let body = format!(
        r#"{{"metric": {{"catalog": {{"name": "minkowski-3"}}}}, "output": {{"path": {:?}}}}}"#,
        target.to_str().unwrap()
    );
    let p = write_scene(&dir, &body);
    let out = run(&["ray", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(target.exists());
}

#[test]
fn table_metric_agrees_with_catalog() {
    let p = scene("table_sphere_jacobi.json");
    let table = envelope(&run(&["jacobi", "--config", p.to_str().unwrap()]));
    assert!(table.all_passed());
    let text = std::fs::read_to_string(&p).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["metric"] = serde_json::json!({"catalog": {"name": "einstein-static"}});
    let dir = tempfile::tempdir().unwrap();
    let q = write_scene(&dir, &v.to_string());
    let catalog = envelope(&run(&["jacobi", "--config", q.to_str().unwrap()]));
    let j = |e: &ResultEnvelope, i: usize| -> Vec<f64> {
        serde_json::from_value(e.payload["stations"][i]["j"].clone()).unwrap()
    };
    for i in 0..3 {
        for (a, b) in j(&table, i).iter().zip(j(&catalog, i)) {
            assert!((a - b).abs() < 1e-8, "station {i}: {a} vs {b}");
        }
    }
    // J = sin(t) ∂χ on the unit sphere.
    assert!((j(&table, 1)[1] - 1.0).abs() < 1e-8);
    assert!(j(&table, 2)[1].abs() < 1e-8);
}
