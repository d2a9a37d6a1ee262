use std::path::Path;
use std::process::{Command, Output};

use ballwalk_cli::config::RunConfig;
use ballwalk_cli::output::{Cell, Table};
use serde_json::Value;

const TILTED: &str = r#"schema_version = 1
dx = 0.004
h_list = [0.15, 0.1]
[potential]
dimension = 1
form = "builtin"
name = "double_well_tilted"
params = [0.3]
[box]
lower = [-2.0]
upper = [2.0]
"#;

const SINGLE: &str = r#"schema_version = 1
dx = 0.004
h = 0.1
[potential]
dimension = 1
form = "polynomial"
monomials = [{ exponents = [2], coefficient = 0.5 }]
[box]
lower = [-2.0]
upper = [2.0]
"#;

fn run(dir: &Path, args: &[&str], config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ballwalk"));
    cmd.current_dir(dir);
    if let Some(text) = config {
        std::fs::write(dir.join("run.toml"), text).unwrap();
    }
    cmd.args(args).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn landscape_of_tilted_double_well() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["landscape", "run.toml", "--output-dir", "o"], Some(TILTED));
    assert_eq!(out.status.code(), Some(0));
    let r = json(&dir.path().join("o/landscape.json"));
    assert_eq!(r["n0"], 2);
    assert_eq!(r["n1"], 1);
    let finite: Vec<f64> = r["pairs"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|p| p["arrhenius"].as_f64())
        .collect();
    assert_eq!(finite.len(), 1);
    assert!((finite[0] - 0.7171355).abs() < 1e-6);
    assert_eq!(r["hypotheses_ok"], true);
}

#[test]
fn single_well_has_no_barrier() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["landscape", "run.toml", "--output-dir", "o"], Some(SINGLE));
    assert_eq!(out.status.code(), Some(0));
    let r = json(&dir.path().join("o/landscape.json"));
    assert_eq!((r["n0"].as_u64(), r["n1"].as_u64()), (Some(1), Some(0)));
}

#[test]
fn malformed_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["landscape", "run.toml", "--output-dir", "o"], Some("schema_version = [1"));
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let out = run(dir.path(), &["landscape", "missing.toml"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn degenerate_minimum_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let quartic = SINGLE.replace("exponents = [2], coefficient = 0.5", "exponents = [4], coefficient = 1.0");
    let out = run(dir.path(), &["landscape", "run.toml", "--output-dir", "o"], Some(&quartic));
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn predict_reports_simple_eigenvalue_for_global_well() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["predict", "run.toml", "--output-dir", "o"], Some(TILTED));
    assert_eq!(out.status.code(), Some(0));
    let r = json(&dir.path().join("o/predict.json"));
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for row in rows.iter().filter(|x| x["k"] == 1) {
        assert_eq!(row["walk"]["value"], 0.0);
        assert_eq!(row["walk"]["flag"], "simple_eigenvalue");
    }
    let k2 = rows.iter().find(|x| x["k"] == 2).unwrap();
    let ratio = k2["witten"]["value"].as_f64().unwrap() / k2["walk"]["value"].as_f64().unwrap();
    assert!((ratio - 6.0).abs() < 1e-12);
}

#[test]
fn outputs_stay_in_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["sweep", "run.toml", "--output-dir", "o"], Some(TILTED));
    assert_eq!(out.status.code(), Some(0));
    let mut top: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    top.sort();
    assert_eq!(top, ["o", "run.toml"]);
    let mut files: Vec<String> = std::fs::read_dir(dir.path().join("o"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(files, ["sweep.csv", "sweep.json", "sweep.meta.json"]);
    let csv = std::fs::read_to_string(dir.path().join("o/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "h,dx,k,measured_gap,predicted_gap,ratio,witten_gap,witten_ratio"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn selfcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let started = std::time::Instant::now();
    let out = run(dir.path(), &["selfcheck", "--output-dir", "o"], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(started.elapsed().as_secs() < 60);
    assert_eq!(json(&dir.path().join("o/selfcheck.json"))["passed"], true);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}

#[test]
fn config_validation() {
    let ok = RunConfig::parse(TILTED).unwrap();
    assert_eq!(ok.h_values(), [0.15, 0.1]);
    assert_eq!(ok.landscape_options().dx, 0.004);
    for (from, to) in [
        ("h_list = [0.15, 0.1]", "h_list = [0.1, 0.15]"),
        ("h_list = [0.15, 0.1]", "h_list = [0.15, 0.02]"),
        ("h_list = [0.15, 0.1]", "h = 0.1\nh_list = [0.15]"),
        ("h_list = [0.15, 0.1]", ""),
        ("schema_version = 1", "schema_version = 2"),
        ("dx = 0.004", "dx = -0.004"),
        ("name = \"double_well_tilted\"", "name = \"nope\""),
        ("upper = [2.0]", "upper = [2.0, 1.0]"),
        ("[box]", "[solver]\ntol = 0.0\n[box]"),
        ("[box]", "[walk]\nn_steps = 0\nn_chains = 1\nstart = \"stationary\"\n[box]"),
        ("[box]", "unknown = 1\n[box]"),
    ] {
        let text = TILTED.replace(from, to);
        assert!(RunConfig::parse(&text).is_err(), "accepted: {to}");
    }
    let walk = TILTED.replace("[box]", "[walk]\nn_steps = 10\nn_chains = 2\nstart = { well = 2 }\n[box]");
    let cfg = RunConfig::parse(&walk).unwrap().walk_config().unwrap().unwrap();
    assert_eq!(cfg.h, 0.1);
}

#[test]
fn csv_cells_round_trip() {
    let mut t = Table::new(&["a", "b", "c"]);
    let x = 0.1 + 0.2;
    t.row(&[Cell::from(x), Cell::from(None::<f64>), Cell::from(7u64)]);
    let text = String::from_utf8(t.to_bytes()).unwrap();
    let cell = text.lines().nth(1).unwrap().split(',').next().unwrap();
    assert_eq!(cell.parse::<f64>().unwrap(), x);
    assert!(text.ends_with(",,7\n"));
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn h_list_accepted_iff_decreasing_and_resolved(hs in proptest::collection::vec(0.01f64..0.3, 1..6)) {
            let list: Vec<String> = hs.iter().map(|h| format!("{h:?}")).collect();
            let text = TILTED.replace("h_list = [0.15, 0.1]", &format!("h_list = [{}]", list.join(", ")));
            let expect = hs.windows(2).all(|w| w[1] < w[0]) && hs.iter().all(|&h| h >= 8.0 * 0.004);
            prop_assert_eq!(RunConfig::parse(&text).is_ok(), expect);
        }

        #[test]
        fn config_round_trips_through_toml(tol in 1e-14f64..1e-6, cutoff in 0usize..5000) {
            let mut cfg = RunConfig::parse(TILTED).unwrap();
            cfg.solver.tol = tol;
            cfg.solver.dense_cutoff = cutoff;
            let text = toml::to_string(&cfg).unwrap();
            prop_assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
        }
    }
}
