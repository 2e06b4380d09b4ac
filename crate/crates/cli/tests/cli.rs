use std::process::{Command, Output};

use gaussblab::stability::ConstantsRecord;

fn gaussblab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaussblab"))
        .args(args)
        .env_remove("GAUSSBLAB_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const POLYGON: &str = r#"{"type":"polytope","normals":[[1,0],[0,1],[1,1]],"offsets":[1,1.5,2]}"#;
const CUBE: &str = r#"{"type":"box","half_widths":[1,0.5,2]}"#;

#[test]
fn same_seed_gives_identical_bytes() {
    let args = ["measure", "--body", CUBE, "--engine", "monte-carlo", "--seed", "7", "--samples", "20000"];
    let a = gaussblab(&args);
    let b = gaussblab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = gaussblab(&["measure", "--body", CUBE, "--engine", "monte-carlo", "--seed", "8", "--samples", "20000"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn seed_from_environment() {
    let flag = gaussblab(&["moments", "--body", CUBE, "--engine", "monte-carlo", "--seed", "3", "--samples", "5000"]);
    let env = Command::new(env!("CARGO_BIN_EXE_gaussblab"))
        .args(["moments", "--body", CUBE, "--engine", "monte-carlo", "--samples", "5000"])
        .env("GAUSSBLAB_SEED", "3")
        .output()
        .unwrap();
    assert_eq!(flag.stdout, env.stdout);
}

#[test]
fn partition_count_not_thread_count_decides_output() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_gaussblab"))
            .args(["deficit", "--body", CUBE, "--a", "0.5", "--b", "2", "--engine", "monte-carlo"])
            .args(["--samples", "40000", "--partition-count", "4"])
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn calibrated_constants_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let o = gaussblab(&["calibrate", "--output", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let c: ConstantsRecord = serde_json::from_str(&text).unwrap();
    c.validate().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_value(&c).unwrap(), parsed);

    let shipped = concat!(env!("CARGO_MANIFEST_DIR"), "/../../constants/calibrated.json");
    let shipped: ConstantsRecord = serde_json::from_str(&std::fs::read_to_string(shipped).unwrap()).unwrap();
    assert_eq!(shipped, c);
}

#[test]
fn schema_errors_name_the_field() {
    let o = gaussblab(&["measure", "--body", r#"{"type":"box","half_widths":[1,-2]}"#]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("half_widths must be positive"));

    let o = gaussblab(&["measure", "--body", r#"{"type":"polytope","normals":[[1,0]],"offsets":[0]}"#]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("offsets must be positive"));

    let o = gaussblab(&["measure", "--body", r#"{"type":"box","half_widths":[1],"extra":1}"#]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("extra"));
}

#[test]
fn strip_sharpness_csv() {
    let o = gaussblab(&["strip-sharpness", "--a", "0.5", "--b", "2", "--r-grid", "1:2:0.5", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers, ["epsilon", "implied_c", "r"]);
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r[2]).collect::<Vec<_>>(), [1.0, 1.5, 2.0]);
    assert!((rows[2][0] - 0.155255).abs() < 1e-4);
}

#[test]
fn json_reports_parse() {
    let o = gaussblab(&["measure", "--body", POLYGON]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let g = v["value"].as_f64().unwrap();
    assert!(g > 0.0 && g < 1.0);
    assert_eq!(v["std_error"].as_f64(), Some(0.0));
}

#[test]
fn dichotomy_with_calibrated_constants_is_not_violated() {
    let constants = concat!(env!("CARGO_MANIFEST_DIR"), "/../../constants/calibrated.json");
    let o = gaussblab(&["dichotomy", "--body", r#"{"type":"ball","radius":1}"#, "--constants", constants]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_ne!(v["verdict"]["branch"]["branch"], "violated");
}

#[test]
fn mgm_on_a_box_converges() {
    let o = gaussblab(&["mgm", "--body", r#"{"type":"box","half_widths":[1,2]}"#]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["converged"], true);
}

#[test]
fn verify_all_runs_a_subset() {
    let o = gaussblab(&["verify-all", "--only", "5,6"]);
    assert!(o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("[PASS] 05") && err.contains("[PASS] 06"), "{err}");
}
