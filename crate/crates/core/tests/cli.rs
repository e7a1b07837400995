use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_eprlab");

const CONFIG: &str = r#"{
  "params": {"hbar": 1.0, "mass": 1.0, "sigma0": 1.0, "slit_y": 3.0, "slit_x": 5.0, "k_x": 20.0, "k_y": 0.0, "screen_x": 200.0},
  "layout": "TwoDoubleSlit",
  "exchange": "Bosonic"
}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).env("EPRLAB_THREADS", "2").args(args).output().unwrap()
}

fn setup() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("cfg.json"), CONFIG).unwrap();
    d
}

fn error_kind(o: &Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).expect("error JSON on stderr");
    v["error"].as_str().unwrap().to_string()
}

#[test]
fn trajectories_csv_blocks() {
    let d = setup();
    let o = run(d.path(), &["bohm", "trajectories", "--config", "cfg.json", "--count", "4", "--seed", "7", "--t-final", "1", "--out", "traj.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(d.path().join("traj.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,y1,y2,x1,x2,flag"));
    let starts = lines.filter(|l| l.starts_with("0.0000000000000000e0,")).count();
    assert_eq!(starts, 4);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let d = setup();
    let args = ["bohm", "pattern", "--config", "cfg.json", "--count", "64", "--seed", "3", "--t-final", "2", "--bins", "20", "--y-min", "-20", "--y-max", "20", "--out"];
    let a = run(d.path(), &[&args[..], &["a.csv"]].concat());
    let b = run(d.path(), &[&args[..], &["b.csv"]].concat());
    assert!(a.status.success() && b.status.success());
    let (x, y) = (std::fs::read(d.path().join("a.csv")).unwrap(), std::fs::read(d.path().join("b.csv")).unwrap());
    assert_eq!(x, y);
    let head = String::from_utf8_lossy(&x);
    assert!(head.starts_with("bin_lo,bin_hi,count_full,count_selected,sqm_density\n"));
    assert_eq!(head.lines().count(), 21);
}

#[test]
fn roundtrip_report_n4() {
    let d = setup();
    let o = run(d.path(), &["dense", "roundtrip", "--n", "4", "--all", "--out", "report.json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(d.path().join("report.json")).unwrap()).unwrap();
    let entries = v.as_array().unwrap();
    assert_eq!(entries.len(), 64);
    for e in entries {
        assert_eq!(e["message_in"], e["message_out"]);
        assert_eq!(e["N"], 4);
        assert!(e["label"]["k"].is_u64() && e["label"]["sign"].is_string() && e["label"]["j"].is_u64());
        assert_eq!(e["outcome"].as_array().unwrap().len(), 2);
        assert!(e["renamed"].is_string());
    }
}

#[test]
fn teleport_run_with_state_file() {
    let d = setup();
    let amps = eprlab::teleport::random_state(16, 12);
    let mut s = String::from("re,im\n");
    for z in amps.iter() {
        s.push_str(&format!("{},{}\n", eprlab::numkit::fmt17(z.re), eprlab::numkit::fmt17(z.im)));
    }
    std::fs::write(d.path().join("state.csv"), s).unwrap();
    let o = run(d.path(), &["teleport", "run", "--n", "2", "--m", "2", "--seed", "1", "--state", "state.csv", "--out", "tp.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(d.path().join("tp.json")).unwrap()).unwrap();
    assert!((v["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(v["n"], 2);
    assert_eq!(v["m"], 2);
    assert_eq!(v["seed"], 1);
    assert!(v["outcome_momentum"]["q"].is_u64() && v["outcome_momentum"]["r"].is_u64());
    assert!(v["outcome_position"]["k"].is_u64());

    let o = run(d.path(), &["teleport", "run", "--n", "4", "--seed", "1", "--state", "state.csv", "--out", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "dimension");
    assert!(!d.path().join("bad.json").exists());
}

#[test]
fn dense_tables_written() {
    let d = setup();
    let o = run(d.path(), &["dense", "tables", "--out-dir", "tabs"]);
    assert!(o.status.success());
    for name in ["table1", "table2", "tableAN2", "tableBN2", "table7", "table8"] {
        assert!(d.path().join("tabs").join(format!("{name}.csv")).exists(), "{name}");
    }
    let t2 = std::fs::read_to_string(d.path().join("tabs/table2.csv")).unwrap();
    assert_eq!(t2.lines().nth(1), Some("1,\"(1-,1)\",\"|1,-1>\",01"));
}

#[test]
fn hadamard_gen_and_check() {
    let d = setup();
    assert!(run(d.path(), &["hadamard", "gen", "--order", "8", "--out", "h8.txt"]).status.success());
    let o = run(d.path(), &["hadamard", "check", "--file", "h8.txt"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["is_hadamard"], true);
    std::fs::write(d.path().join("bad.txt"), "2\n+1 +1\n+1 +1\n").unwrap();
    let o = run(d.path(), &["hadamard", "check", "--file", "bad.txt"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(d.path(), &["dense", "roundtrip", "--n", "4", "--all", "--hadamard", "h8.txt", "--out", "r.json"]);
    assert!(o.status.success());
    let o = run(d.path(), &["dense", "roundtrip", "--n", "2", "--all", "--hadamard", "h8.txt", "--out", "r2.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "order_mismatch");
}

#[test]
fn exit_codes() {
    let d = setup();
    std::fs::write(d.path().join("neg.json"), CONFIG.replace("\"sigma0\": 1.0", "\"sigma0\": -1.0")).unwrap();
    let o = run(d.path(), &["bohm", "trajectories", "--config", "neg.json", "--out", "t.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "config");
    assert!(!d.path().join("t.csv").exists());

    let o = run(d.path(), &["bohm", "probability", "--config", "cfg.json", "--y-m", "1", "--y-n", "-1", "--delta", "1", "--extent", "4"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_kind(&o), "coverage");

    let o = run(d.path(), &["dense", "bell", "--n", "2", "--k", "3", "--sign", "+", "--j", "1", "--out", "b.csv"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(d.path(), &["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "usage");
}

#[test]
fn probability_and_rates_on_stdout() {
    let d = setup();
    let o = run(d.path(), &["bohm", "probability", "--config", "cfg.json", "--t-final", "2", "--y-m", "1", "--y-n", "1", "--delta", "2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["p12"].as_f64().unwrap() > 0.0);
    let o = run(d.path(), &["dense", "rates", "--n", "1024"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["ratio_x_over_p"].as_f64().unwrap() / 22.0 - 1.0).abs() < 0.01);
}

#[test]
fn coincidence_and_bell_files() {
    let d = setup();
    let o = run(d.path(), &["bohm", "coincidence", "--k-y", "30", "--k-sigma0", "1", "--points", "11", "--out", "c.csv"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(d.path().join("c.csv")).unwrap().lines().count(), 12);
    let o = run(d.path(), &["dense", "bell", "--n", "2", "--k", "1", "--sign", "-", "--j", "1", "--out", "b.csv", "--operator", "o.csv"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(d.path().join("b.csv")).unwrap().lines().count(), 17);
    assert_eq!(std::fs::read_to_string(d.path().join("o.csv")).unwrap().lines().count(), 17);
}
