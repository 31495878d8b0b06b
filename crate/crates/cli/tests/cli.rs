use std::fs;
use std::process::{Command, Output};

use zetamix::mixing::MixingDensityKind;
use zetamix::quadrature::QuadratureSpec;

fn zetamix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zetamix"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn values(csv: &str) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

#[test]
fn zeta_mass_at_zero() {
    let out = zetamix(&["eval", "--kind", "zeta-pmf", "--s", "2", "--x", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "point,value\n0,0.60792710185402665\n");
}

#[test]
fn printed_values_round_trip_to_the_library() {
    let out = zetamix(&["eval", "--kind", "mixing-r1", "--s", "2.5", "--p", "0.5,0.9"]);
    assert_eq!(out.status.code(), Some(0));
    let spec = QuadratureSpec::default();
    let kind = MixingDensityKind::R1Closed { s: 2.5 };
    let expected = [kind.evaluate(0.5, &spec).unwrap(), kind.evaluate(0.9, &spec).unwrap()];
    assert_eq!(values(&stdout(&out)), expected);
}

#[test]
fn json_rows() {
    let out = zetamix(&["eval", "--kind", "yule-pmf", "--b", "1", "--x", "0,1", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["kind"], "yule-pmf");
    assert_eq!(v["rows"][0]["point"], 0);
    assert!((v["rows"][0]["value"].as_f64().unwrap() - 0.5).abs() < 1e-13);
    assert!((v["rows"][1]["value"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-13);
}

#[test]
fn bad_shape_exits_2() {
    let out = zetamix(&["eval", "--kind", "zeta-pmf", "--s", "0.9", "--x", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("s > 1"), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
}

#[test]
fn missing_parameter_names_the_flag() {
    let out = zetamix(&["eval", "--kind", "mixing-quasi", "--s", "2", "--p", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--r"), "{}", stderr(&out));
}

#[test]
fn no_points_exits_2() {
    let out = zetamix(&["eval", "--kind", "zeta-pmf", "--s", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn starved_quadrature_exits_3() {
    let out = zetamix(&["eval", "--kind", "nb-mixture", "--r", "0.5", "--s", "2", "--x", "3", "--max-subdivisions", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn default_grid_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = zetamix(&["verify", "--output", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    assert!(v["checks"].as_array().unwrap().len() > 100);
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.toml");
    fs::write(&config, "grid.r = abc\n").unwrap();
    let out = zetamix(&["verify", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let missing = zetamix(&["verify", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn quasi_density_dips_below_zero() {
    let out = zetamix(&[
        "tabulate", "--kind", "mixing-quasi", "--r", "0.5", "--s", "2", "--from", "0.001", "--to", "0.999", "--points", "200",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = values(&stdout(&out));
    assert_eq!(v.len(), 200);
    assert!(v.iter().any(|&y| y < 0.0));
    assert!(v.iter().any(|&y| y > 0.0));
}

#[test]
fn log_grid_of_lambda_density_is_positive() {
    let out = zetamix(&["tabulate", "--kind", "lambda-mixing", "--s", "2", "--from", "0.01", "--to", "100", "--points", "9", "--log"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let first: Vec<_> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0], "0.01");
    let v = values(&text);
    assert_eq!(v.len(), 9);
    assert!(v.iter().all(|&y| y > 0.0));
    assert!(v.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn count_grid_uses_every_integer() {
    let out = zetamix(&["tabulate", "--kind", "zeta-pmf", "--s", "3", "--from", "0", "--to", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let points: Vec<String> = stdout(&out).lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert_eq!(points, ["0", "1", "2", "3", "4"]);
}

#[test]
fn empty_grid_exits_2() {
    let zero = zetamix(&["tabulate", "--kind", "mixing-r1", "--s", "2", "--from", "0.1", "--to", "0.9", "--points", "0"]);
    assert_eq!(zero.status.code(), Some(2));
    let reversed = zetamix(&["tabulate", "--kind", "mixing-r1", "--s", "2", "--from", "0.9", "--to", "0.1"]);
    assert_eq!(reversed.status.code(), Some(2));
}

#[test]
fn sampling_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for path in [&a, &b] {
        let out = zetamix(&["sample", "--chain", "geometric", "--s", "2", "--n", "5000", "--seed", "11", "--output", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let other = zetamix(&["sample", "--chain", "geometric", "--s", "2", "--n", "5000", "--seed", "11", "--stream", "1"]);
    assert_ne!(fs::read(&a).unwrap(), other.stdout);
}

#[test]
fn poisson_chain_fits_zeta() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.txt");
    let table = dir.path().join("fit.csv");
    let out = zetamix(&[
        "sample", "--chain", "poisson", "--s", "2", "--n", "100000", "--seed", "7",
        "--output", counts.to_str().unwrap(), "--fit-table", table.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&counts).unwrap().lines().count(), 100_000);
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("counts.txt.fit.json")).unwrap()).unwrap();
    assert!(fit["tv_distance"].as_f64().unwrap() < 0.015, "{fit}");
    assert_eq!(fit["n"], 100_000);
    let header = fs::read_to_string(&table).unwrap();
    assert!(header.starts_with("x,count,expected,abs_err\n0,"));
}

#[test]
fn sampler_rejects_bad_input() {
    let flat = zetamix(&["sample", "--chain", "geometric", "--s", "1.0", "--n", "10", "--seed", "1"]);
    assert_eq!(flat.status.code(), Some(2));
    let unseeded = zetamix(&["sample", "--chain", "direct", "--s", "2", "--n", "10"]);
    assert_eq!(unseeded.status.code(), Some(2));
    let empty = zetamix(&["sample", "--chain", "direct", "--s", "2", "--n", "0", "--seed", "1"]);
    assert_eq!(empty.status.code(), Some(2));
}

#[test]
fn heavy_tail_samples_without_a_fit() {
    let out = zetamix(&["sample", "--chain", "direct", "--s", "1.05", "--n", "20", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 20);
    assert!(stderr(&out).contains("fit skipped"));
}

#[test]
fn near_boundary_grid_reports_failing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("hard.cfg");
    fs::write(
        &config,
        "grid.s = 1.01\ngrid.r = 0.25\ngrid.x = 0..3\nquadrature.abs_tol = 1e-14\nquadrature.rel_tol = 1e-13\n",
    )
    .unwrap();
    let out = zetamix(&["verify", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["converged"] == false && c["passed"] == false && c["note"].is_string()));
}

#[test]
fn report_follows_the_published_schema() {
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../../../schemas/verification_report.schema.json")).unwrap();
    let out = zetamix(&["verify", "--config", "/dev/null"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let keys = |v: &serde_json::Value| -> Vec<String> { v.as_object().unwrap().keys().cloned().collect() };
    let required = |v: &serde_json::Value| -> Vec<String> {
        v["required"].as_array().unwrap().iter().map(|k| k.as_str().unwrap().to_string()).collect()
    };
    let mut top = keys(&report);
    top.sort();
    let mut expected_top = required(&schema);
    expected_top.sort();
    assert_eq!(top, expected_top);

    let check_schema = &schema["$defs"]["check"];
    let allowed = keys(&check_schema["properties"]);
    let identities: Vec<&str> =
        schema["$defs"]["identity"]["enum"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for c in report["checks"].as_array().unwrap() {
        for k in required(check_schema) {
            assert!(c.get(&k).is_some(), "missing {k} in {c}");
        }
        for k in keys(c) {
            assert!(allowed.contains(&k), "unexpected {k}");
        }
        assert!(identities.contains(&c["identity"].as_str().unwrap()));
    }
}

#[test]
fn report_as_csv() {
    let out = zetamix(&["verify", "--config", "/dev/null", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "identity,params,x,value,expected,abs_err,rel_err,abs_threshold,rel_threshold,passed,converged,evals"
    );
    assert!(lines.all(|l| l.split(',').count() == 12 && l.contains(",true,true,")));
}

#[test]
fn direct_sampler_output_is_byte_identical() {
    let args = ["sample", "--chain", "direct", "--s", "2", "--n", "1000", "--seed", "42"];
    let a = zetamix(&args);
    let b = zetamix(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
    assert_eq!(stdout(&a).lines().count(), 1000);
}
