use std::path::Path;
use std::process::{Command, Output};

use geoshap::explanation::ExplanationDocument;
use geoshap::ExplanationSet;

const BIN: &str = env!("CARGO_BIN_EXE_geoshap");

fn geoshap(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .env("GEOSHAP_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = geoshap(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn simulate(dir: &Path) {
    ok(dir, &["simulate", "--process", "svc", "--n", "150", "--seed", "7", "--out", "d.csv"]);
}

const EXPLAIN: &[&str] = &[
    "explain", "--data", "d.csv", "--model", "gbt", "--trees", "40", "--background", "20", "--seed", "1",
    "--out", "e.json",
];

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let first = (read(dir.path(), "d.csv"), read(dir.path(), "d.truth.csv"));
    simulate(dir.path());
    assert_eq!(first, (read(dir.path(), "d.csv"), read(dir.path(), "d.truth.csv")));
    assert!(first.0.lines().nth(1).unwrap().starts_with("id,u,v,x1,x2,y"));
    assert_eq!(first.0.lines().count(), 152);
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "d.manifest.json")).unwrap();
    assert_eq!(manifest["seeds"]["seed"], 7);
}

#[test]
fn explain_pipeline_round_trips_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d);
    ok(d, EXPLAIN);
    let first = read(d, "e.json");
    ok(d, EXPLAIN);
    assert_eq!(first, read(d, "e.json"), "rerun changed the explanation file");

    let doc: ExplanationDocument = serde_json::from_str(&first).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&read(d, "e.manifest.json")).unwrap();
    assert_eq!(doc.manifest_hash.as_deref(), manifest["manifest_hash"].as_str());
    assert!(manifest["results"]["cv_r2"].as_f64().unwrap() > 0.5);
    let ex = ExplanationSet::from_document(&doc).unwrap();
    assert_eq!(ex.rows.len(), 150);
    assert!(ex.max_efficiency_gap() <= 1e-8);

    ok(d, &["importance", "--explanations", "e.json", "--out", "imp.csv"]);
    let imp = read(d, "imp.csv");
    assert!(imp.starts_with("# manifest_hash="));
    assert_eq!(imp.lines().nth(1), Some("feature,primary_part,geo_part,total"));
    assert_eq!(imp.lines().count(), 2 + 3);

    ok(d, &["pdp", "--explanations", "e.json", "--feature", "x2", "--out", "pdp.csv"]);
    let pdp = read(d, "pdp.csv");
    let xs: Vec<f64> = pdp.lines().skip(2).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(xs.len(), 150);
    assert!(xs.windows(2).all(|w| w[0] <= w[1]));

    ok(d, &["svc", "--explanations", "e.json", "--feature", "x1", "--out", "s.geojson"]);
    let gj: serde_json::Value = serde_json::from_str(&read(d, "s.geojson")).unwrap();
    assert_eq!(gj["type"], "FeatureCollection");
    let features = gj["features"].as_array().unwrap();
    assert_eq!(features.len(), 150);
    for f in features {
        assert_eq!(f["type"], "Feature");
        assert_eq!(f["geometry"]["type"], "Point");
        assert_eq!(f["geometry"]["coordinates"].as_array().unwrap().len(), 2);
        assert!(f["properties"]["beta"].is_f64());
        assert!(f["properties"]["intercept"].is_f64());
        assert_eq!(f["properties"]["masked"], false);
    }
}

#[test]
fn bootstrap_masks_svc_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--n", "120", "--seed", "3", "--null-features", "1", "--out", "d.csv"]);
    let common = ["--data", "d.csv", "--model", "linear", "--background", "20", "--seed", "2"];
    let mut args = vec!["explain"];
    args.extend(common);
    args.extend(["--out", "e.json"]);
    ok(d, &args);
    let mut args = vec!["bootstrap"];
    args.extend(common);
    args.extend(["--replicates", "20", "--svc-feature", "x3", "--bandwidth", "60", "--out", "b.json"]);
    ok(d, &args);
    let summary: serde_json::Value = serde_json::from_str(&read(d, "b.json")).unwrap();
    assert_eq!(summary["replicates"], 20);
    assert!(summary["manifest_hash"].is_string());
    ok(d, &["svc", "--explanations", "e.json", "--feature", "x3", "--bootstrap", "b.json", "--out", "s.geojson"]);
    let gj: serde_json::Value = serde_json::from_str(&read(d, "s.geojson")).unwrap();
    assert_eq!(gj["bandwidth"], 60.0);
    for f in gj["features"].as_array().unwrap() {
        let p = &f["properties"];
        let (lo, hi) = (p["ci_lower"].as_f64().unwrap(), p["ci_upper"].as_f64().unwrap());
        assert_eq!(p["masked"].as_bool().unwrap(), lo <= 0.0 && hi >= 0.0);
        assert!(p["beta"].is_f64());
    }
}

#[test]
fn default_replicate_count_is_500() {
    use clap::Parser;
    let cli = geoshap::cli::Cli::try_parse_from(["geoshap", "bootstrap", "--data", "d.csv", "--out", "b.json"]).unwrap();
    match cli.command {
        geoshap::cli::Command::Bootstrap(b) => assert_eq!(b.replicates, 500),
        _ => unreachable!(),
    }
}

#[test]
fn errors_map_to_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d);
    let missing_coord = geoshap(d, &["explain", "--data", "d.csv", "--coords", "lon,lat", "--out", "e.json"]);
    assert_eq!(missing_coord.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing_coord.stderr).contains("`lon`"));
    let missing_file = geoshap(d, &["explain", "--data", "nope.csv", "--out", "e.json"]);
    assert_eq!(missing_file.status.code(), Some(7));
    let bad_budget = geoshap(d, &["explain", "--data", "d.csv", "--budget", "3", "--model", "linear", "--out", "e.json"]);
    assert_eq!(bad_budget.status.code(), Some(2));
    let no_reps = geoshap(d, &["bootstrap", "--data", "d.csv", "--replicates", "0", "--model", "linear", "--out", "b.json"]);
    assert_eq!(no_reps.status.code(), Some(2));
    assert!(!d.join("e.json").exists());
}

#[test]
fn missing_cells_drop_rows_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d);
    let text = read(d, "d.csv");
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // blank out x1 in the row with id 5
    let row = lines.iter_mut().find(|l| l.starts_with("5,")).unwrap();
    let mut cells: Vec<&str> = row.split(',').collect();
    cells[3] = "";
    *row = cells.join(",");
    std::fs::write(d.join("gap.csv"), lines.join("\n")).unwrap();
    let out = geoshap(d, &["explain", "--data", "gap.csv", "--model", "linear", "--background", "10", "--out", "e.json"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("5"));
    let doc: ExplanationDocument = serde_json::from_str(&read(d, "e.json")).unwrap();
    assert_eq!(doc.rows.len(), 149);
    assert!(doc.rows.iter().all(|r| r.row_id != "5"));
}

#[test]
fn explain_through_the_bridge() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d);
    ok(d, &["explain", "--data", "d.csv", "--model", "linear", "--background", "15", "--out", "local.json", "--save-model", "m.json"]);
    let cmd = format!("'{BIN}' serve --model m.json");
    ok(d, &["explain", "--data", "d.csv", "--model-cmd", &cmd, "--background", "15", "--out", "remote.json"]);
    let a: ExplanationDocument = serde_json::from_str(&read(d, "local.json")).unwrap();
    let b: ExplanationDocument = serde_json::from_str(&read(d, "remote.json")).unwrap();
    let (a, b) = (ExplanationSet::from_document(&a).unwrap(), ExplanationSet::from_document(&b).unwrap());
    for (r, s) in a.rows.iter().zip(&b.rows) {
        assert!(r.attribution.max_abs_diff(&s.attribution) <= 1e-6);
    }

    // a server built for a different column count is refused before any predict
    ok(d, &["simulate", "--n", "150", "--seed", "1", "--null-features", "2", "--out", "wide.csv"]);
    let out = geoshap(d, &["explain", "--data", "wide.csv", "--model-cmd", &cmd, "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("column mismatch"));
}
