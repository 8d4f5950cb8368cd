use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BENCH: &str = r#"{"type":"type1","F":[[0,0],[1,0]],"G":[[0,0],[-1,0]]}"#;
const TYPE2_ENTIRE: &str =
    r#"{"type":"type2","F":[[0,0],[1,0]],"G":[[0,0]],"N":1,"a":[0,0],"a0":[1.4142135623730951,0]}"#;

fn run(dir: &Path, config: &str) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_holofact"))
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .env("HOLOFACT_THREADS", "1")
        .output()
        .unwrap()
}

fn result(dir: &Path, name: &str) -> Value {
    let text = fs::read_to_string(dir.join("out").join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn radius_on_benchmark_writes_csv_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &format!(r#"{{"command":"radius","params":{{"spec":{BENCH},"box":[1,1]}}}}"#));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("out/radius.csv")).unwrap();
    let head = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let col = |name: &str| -> f64 { row[head.iter().position(|h| h == name).unwrap()].parse().unwrap() };
    assert!((col("banach") - 0.1353).abs() < 1e-4);
    assert!((col("picard") - 0.1353).abs() < 1e-4);
    assert!((col("cauchy") - 0.0654).abs() < 1e-4);
    assert!((col("empirical") - 0.693).abs() < 1e-3);
    assert!(row[head.iter().position(|h| h == "config_hash").unwrap()].starts_with("sha256:"));
}

#[test]
fn root_factorization_of_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let f = r#"{"kind":"int_exp_poly","p":[[0,0],[1,0]],"c":[1,0]}"#;
    let out = run(dir.path(), &format!(r#"{{"command":"factor","params":{{"f":{f},"mode":"eq15","N":1}}}}"#));
    assert_eq!(out.status.code(), Some(0));
    let doc = result(dir.path(), "factor");
    assert!(doc["result"]["residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(doc["result"]["chain"]["factors"].as_array().unwrap().len(), 4);
}

#[test]
fn entire_type_two_atlas_has_one_chart() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &format!(r#"{{"command":"atlas","params":{{"spec":{TYPE2_ENTIRE}}}}}"#));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = result(dir.path(), "atlas");
    let atlas = &doc["result"]["atlas"];
    assert_eq!(atlas["schema"], "atlas-v1");
    assert_eq!(atlas["charts"].as_array().unwrap().len(), 1);
    assert!(atlas["charts"][0]["radius"].is_null());
    assert!(atlas["singular"].as_array().unwrap().is_empty());
}

#[test]
fn schema_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &format!(r#"{{"command":"solve","params":{{"spec":{BENCH},"ordre":64}}}}"#));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.ordre"));
    let out = run(dir.path(), "{not json");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_with_one_and_leave_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), r#"{"command":"ng","params":{"K":0}}"#);
    assert_eq!(out.status.code(), Some(1));
    let doc = result(dir.path(), "ng");
    assert_eq!(doc["error"]["code"], "InvalidLength");
    assert!(doc["header"]["config_hash"].as_str().unwrap().starts_with("sha256:"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let configs = [
        format!(r#"{{"command":"atlas","params":{{"spec":{BENCH},"budget":{{"max_generation":2}}}}}}"#),
        r#"{"command":"ng","params":{"K":12,"eval":[[1,0]]}}"#.to_string(),
    ];
    for cfg in configs {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert_eq!(run(a.path(), &cfg).status.code(), Some(0));
        assert_eq!(run(b.path(), &cfg).status.code(), Some(0));
        for entry in fs::read_dir(a.path().join("out")).unwrap() {
            let p = entry.unwrap().path();
            let other = b.path().join("out").join(p.file_name().unwrap());
            assert_eq!(fs::read(&p).unwrap(), fs::read(other).unwrap(), "{}", p.display());
        }
    }
}

#[test]
fn other_commands_succeed() {
    let em1 = r#"{"kind":"int_exp_poly","p":[[0,0],[1,0]]}"#;
    let exp = r#"{"kind":"scaled_exp","lambda":[1,0]}"#;
    let calabi = r#"{"kind":"int_exp_poly","p":[[0,0],[0,0],[-1,0]]}"#;
    let cases = [
        ("solve", format!(r#"{{"spec":{BENCH},"order":32}}"#)),
        ("asym", format!(r#"{{"f":{calabi},"iterate":1,"probe":[[0.5,0]]}}"#)),
        ("maxmod", format!(r#"{{"f":{exp},"g":{exp},"radii":[1,2,3]}}"#)),
        ("maxmod", format!(r#"{{"f":{em1},"g":{em1},"radii":[2],"rho":[0.5]}}"#)),
        ("recursion", format!(r#"{{"f":{{"kind":"chain","factors":[{exp},{em1}]}},"n_max":3}}"#)),
        ("factor", format!(r#"{{"f":{exp},"mode":"picard"}}"#)),
    ];
    for (command, params) in cases {
        let dir = tempfile::tempdir().unwrap();
        let out = run(dir.path(), &format!(r#"{{"command":"{command}","params":{params}}}"#));
        assert_eq!(out.status.code(), Some(0), "{command}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(result(dir.path(), command)["result"].is_object());
    }
}

#[test]
fn schema_command_prints_json() {
    let out = Command::new(env!("CARGO_BIN_EXE_holofact")).args(["schema", "ng"]).output().unwrap();
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["properties"]["command"]["const"], "ng");
}
