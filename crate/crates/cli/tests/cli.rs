use std::fs;
use std::process::Command;

use ssr_telescopy_cli::{execute, parse_report, CommandKind, Format, Overrides, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssr-telescopy"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&run_ok(args)).unwrap()
}

fn cfg(command: CommandKind, o: Overrides) -> RunConfig {
    RunConfig::resolve(command, o).unwrap()
}

#[test]
fn table1_default_rows() {
    let text = run_ok(&["table1"]);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "kind,N,closed_ratio,numeric_ratio,bound,NL,PR");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let row = |k: &str| rows.iter().find(|r| r[0] == k).unwrap().clone();

    let klm = row("klm");
    assert_eq!(&klm[..3], &["klm", "4", "0.8"]);
    assert!((klm[3].parse::<f64>().unwrap() - 0.8).abs() < 1e-9);
    assert!((klm[4].parse::<f64>().unwrap() - 0.86603).abs() < 1e-5);
    assert_eq!(&klm[5..], &["yes", "yes"]);

    assert_eq!(row("gjc")[2], "0.5");
    assert_eq!(row("tpe")[2], "0");
    assert_eq!(row("tpe")[3], "0");
    assert_eq!(row("tmsv")[3], "0");
    assert_eq!(&row("tpe")[5..], &["yes", "no"]);
    for r in &rows {
        let closed: f64 = r[2].parse().unwrap();
        let numeric: f64 = r[3].parse().unwrap();
        assert!((closed - numeric).abs() < 1e-6, "{r:?}");
        assert!(closed <= r[4].parse::<f64>().unwrap() + 1e-9, "{r:?}");
    }
    assert!(!text.contains('\r'));
}

#[test]
fn fig2_ordering_and_bound() {
    let text = run_ok(&["fig2", "--n-max", "30"]);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (klm, opt, bound) = (col("klm"), col("optimal_klm"), col("bound"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 30);
    for r in &rows {
        let n: usize = r[0].parse().unwrap();
        let b: f64 = r[bound].parse().unwrap();
        for cell in &r[1..bound] {
            if !cell.is_empty() {
                assert!(cell.parse::<f64>().unwrap() <= b + 1e-12);
            }
        }
        let (k, o): (f64, f64) = (r[klm].parse().unwrap(), r[opt].parse().unwrap());
        if n == 2 {
            assert!((k - 2.0 / 3.0).abs() < 1e-12 && (o - 2.0 / 3.0).abs() < 1e-12);
        }
        if n >= 3 {
            assert!(o > k);
        }
    }
}

#[test]
fn fig2_svg_is_self_contained() {
    let svg = run_ok(&["fig2", "--n-max", "10", "--format", "svg"]);
    assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("stroke-width=\"1.5\"").count(), 6);
}

#[test]
fn optimize_two_photons() {
    let v = json(&["optimize", "--photons", "2"]);
    let value = v["results"]["value"].as_f64().unwrap();
    assert!((value - (12.0 - 8.0 * 2f64.sqrt())).abs() < 1e-6);
    assert!((value - 0.68629).abs() < 1e-5);
}

#[test]
fn bound_mean_photons() {
    let v = json(&["bound", "--mean-photons", "3"]);
    assert!((v["results"]["value"].as_f64().unwrap() - 0.80902).abs() < 1e-5);
    let v = json(&["bound", "--photons", "4"]);
    assert!((v["results"]["max_photon_bound"].as_f64().unwrap() - 0.8660254037844387).abs() < 1e-15);
}

#[test]
fn teleport_klm_saturates() {
    let v = json(&[
        "teleport", "--ancilla", "klm", "--photons", "3", "--g", "0.7", "--theta", "0.3", "--epsilon", "1e-3",
    ]);
    let r = &v["results"];
    assert!((r["fi_ratio"].as_f64().unwrap() - 0.75).abs() < 1e-6);
    assert!((r["fi_ratio_gmod"].as_f64().unwrap() - 0.75).abs() < 1e-6);
    assert!((r["failure_probability"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!(r["pipeline_deviation"].as_f64().unwrap() < 1e-10);
}

#[test]
fn estimate_small_run() {
    let v = json(&[
        "estimate", "--ancilla", "gjc", "--samples", "20000", "--repetitions", "20", "--epsilon", "1e-2", "--seed", "5",
    ]);
    let r = &v["results"];
    assert!((r["g_hat"].as_f64().unwrap() - 0.7).abs() < 0.1);
    assert!(!r["wide_interval"].as_bool().unwrap());
}

#[test]
fn json_reports_round_trip() {
    for (command, o) in [
        (
            CommandKind::Teleport,
            Overrides {
                ancilla: Some("optimal_klm".into()),
                photons: Some(3),
                ..Overrides::default()
            },
        ),
        (
            CommandKind::Bound,
            Overrides {
                mean_photons: Some(2.5),
                ..Overrides::default()
            },
        ),
        (
            CommandKind::Table1,
            Overrides {
                photons: Some(2),
                format: Some(Format::Json),
                ..Overrides::default()
            },
        ),
    ] {
        let c = cfg(command, o);
        let text = execute(&c).unwrap();
        let report = parse_report(&text).unwrap();
        assert_eq!(report.config, c);
        let original: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_value(&report).unwrap(), original);
    }
}

#[test]
fn identical_config_gives_identical_bytes() {
    let o = Overrides {
        ancilla: Some("gjc".into()),
        samples: Some(5000),
        repetitions: Some(8),
        seed: Some(11),
        ..Overrides::default()
    };
    let c = cfg(CommandKind::Estimate, o);
    assert_eq!(execute(&c).unwrap(), execute(&c).unwrap());
    let a = run_ok(&["table1", "--photons", "3"]);
    let b = run_ok(&["table1", "--photons", "3"]);
    assert_eq!(a, b);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    fs::write(&path, r#"{"ancilla": "klm", "photons": 2, "g": 0.4}"#).unwrap();
    let p = path.to_str().unwrap();
    let v = json(&["teleport", "--config", p, "--photons", "5"]);
    assert_eq!(v["config"]["photons"], 5);
    assert_eq!(v["config"]["source"]["g_mod"], 0.4);
    assert!((v["results"]["fi_ratio"].as_f64().unwrap() - 5.0 / 6.0).abs() < 1e-9);
}

#[test]
fn output_file_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t1.csv");
    run_ok(&["table1", "--photons", "2", "--out", out.to_str().unwrap()]);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("kind,N,"));
}

#[test]
fn custom_ancilla_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("anc.json");
    let spec = ssr_telescopy::ancilla::klm(2).unwrap().to_custom_json();
    fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
    let v = json(&["teleport", "--ancilla", path.to_str().unwrap()]);
    assert!((v["results"]["fi_ratio"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-9);
}

fn run_err(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn validation_errors_exit_with_two() {
    let (code, msg) = run_err(&["teleport", "--ancilla", "squeezed_cat"]);
    assert_eq!(code, 2);
    assert!(msg.contains("squeezed_cat"));

    let (code, msg) = run_err(&["teleport", "--ancilla", "klm", "--photons", "8"]);
    assert_eq!(code, 2);
    assert!(msg.contains("limit 7"), "{msg}");

    let (code, _) = run_err(&["fig2", "--n-max", "31"]);
    assert_eq!(code, 2);
    let (code, _) = run_err(&["teleport", "--g", "1.5"]);
    assert_eq!(code, 2);
    let (code, _) = run_err(&["bound", "--format", "svg"]);
    assert_eq!(code, 2);
    let (code, _) = run_err(&["teleport", "--ancilla", "tmsv"]);
    assert_eq!(code, 2);
}

#[test]
fn missing_config_file_names_the_path() {
    let (code, msg) = run_err(&["bound", "--config", "/nonexistent/run.json"]);
    assert_eq!(code, 1);
    assert!(msg.contains("/nonexistent/run.json"));
}

#[test]
fn malformed_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"photon": 3}"#).unwrap();
    let (code, _) = run_err(&["bound", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn thread_cap_env() {
    let out = bin()
        .args(["bound", "--photons", "3"])
        .env("SSR_TELESCOPY_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin()
        .args(["bound", "--photons", "3"])
        .env("SSR_TELESCOPY_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
