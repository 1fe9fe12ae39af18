use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hawkesnet"));
    c.env_remove("HAWKESNET_THREADS");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const DGP: &str = "schema_version = 1\n[dgp]\nT = 4.0\n";

fn simulate(dir: &Path, out: &str, seed: &str) -> Output {
    std::fs::write(dir.join("dgp.toml"), DGP).unwrap();
    run(&["simulate", "--config", "dgp.toml", "--seed", seed, "--out", out], dir)
}

#[test]
fn simulate_is_reproducible_and_manifested() {
    let d = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = simulate(d.path(), out, "11");
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let (a, b) = (json(&d.path().join("a/manifest.json")), json(&d.path().join("b/manifest.json")));
    assert_eq!(a["outputs"], b["outputs"]);
    assert_eq!(a["config_hash"], b["config_hash"]);
    assert_eq!(a["seed"], 11);
    assert!(a["info"]["branching_factor"].as_f64().unwrap() < 1.0);
    assert_eq!(a["info"]["event_counts"].as_array().unwrap().len(), 10);
    for (name, digest) in a["outputs"].as_object().unwrap() {
        let bytes = std::fs::read(d.path().join("a").join(name)).unwrap();
        assert_eq!(hawkesnet::manifest::sha256_hex(&bytes), digest.as_str().unwrap());
    }
    let c = simulate(d.path(), "c", "12");
    assert_eq!(code(&c), 0);
    assert_ne!(json(&d.path().join("c/manifest.json"))["outputs"], a["outputs"]);
}

#[test]
fn fit_and_cv_write_reports() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(d.path(), "sim", "5")), 0);
    let data = ["--events", "sim/events.csv", "--covariates", "sim/covariates.csv", "--t-end", "4"];
    let mut args = vec!["fit", "--stages", "12", "--omega", "theory", "--out", "fit"];
    args.extend(data);
    let o = run(&args, d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&d.path().join("fit/fit.json"));
    assert_eq!(report["stages"], "12");
    assert!(report["debias"].is_object());
    assert!(report["stage3"].is_null());
    let m = json(&d.path().join("fit/manifest.json"));
    assert_eq!(m["inputs"].as_object().unwrap().len(), 2);

    let mut args = vec!["cv", "--out", "cv"];
    args.extend(data);
    std::fs::write(d.path().join("cv.toml"), "schema_version = 1\n[fit.cv]\niterations = 2\n[fit.stage1]\nrestarts = 2\n").unwrap();
    args.extend(["--config", "cv.toml"]);
    let o = run(&args, d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&d.path().join("cv/cv.json"))["rounds"].as_array().unwrap().len(), 2);
}

#[test]
fn explicit_omega_must_match_node_count() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(d.path(), "sim", "5")), 0);
    let o = run(
        &["fit", "--events", "sim/events.csv", "--covariates", "sim/covariates.csv", "--t-end", "4", "--omega", "0.1,0.2"],
        d.path(),
    );
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let o = run(
        &["fit", "--events", "sim/events.csv", "--covariates", "sim/covariates.csv", "--t-end", "4", "--omega", "lots"],
        d.path(),
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn unstable_parameter_file_is_rejected_before_simulating() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(d.path(), "sim", "5")), 0);
    let mut params = json(&d.path().join("sim/truth.json"))["params"].clone();
    std::fs::write(d.path().join("ok.json"), params.to_string()).unwrap();
    let o = run(&["simulate", "--config", "dgp.toml", "--params", "ok.json", "--out", "ok"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for row in params["c"].as_array_mut().unwrap() {
        for v in row.as_array_mut().unwrap() {
            *v = Value::from(v.as_f64().unwrap() * 2.5);
        }
    }
    std::fs::write(d.path().join("bad.json"), params.to_string()).unwrap();
    let o = run(&["simulate", "--config", "dgp.toml", "--params", "bad.json", "--out", "bad"], d.path());
    assert_eq!(code(&o), 1);
    assert!(!d.path().join("bad").exists());
}

#[test]
fn validation_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["simulate", "--bogus"], d.path())), 1);
    assert_eq!(code(&run(&["nosuch"], d.path())), 1);
    std::fs::write(d.path().join("bad.toml"), "schema_version = 1\n[dgp]\nn = 4\nshock_count = -1\n").unwrap();
    let o = run(&["simulate", "--config", "bad.toml"], d.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    std::fs::write(d.path().join("typo.toml"), "schema_version = 1\n[dgp]\nnodes = 4\n").unwrap();
    assert_eq!(code(&run(&["simulate", "--config", "typo.toml"], d.path())), 1);
    std::fs::write(d.path().join("neg.toml"), "schema_version = 1\n[dgp]\nT = -1.0\n").unwrap();
    assert_eq!(code(&run(&["simulate", "--config", "neg.toml"], d.path())), 1);
    let o = bin().args(["simulate"]).env("HAWKESNET_THREADS", "0").current_dir(d.path()).output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn help_documents_every_flag() {
    let d = tempfile::tempdir().unwrap();
    for sub in ["simulate", "fit", "cv", "bench", "report"] {
        let o = run(&[sub, "--help"], d.path());
        assert_eq!(code(&o), 0);
        let text = String::from_utf8_lossy(&o.stdout);
        for flag in ["--config", "--seed", "--threads", "--out"] {
            assert!(text.contains(flag), "{sub} help lacks {flag}");
        }
    }
    let fit = String::from_utf8_lossy(&run(&["fit", "--help"], d.path()).stdout).into_owned();
    for flag in ["--events", "--covariates", "--t-end", "--stages", "--omega"] {
        assert!(fit.contains(flag));
    }
    assert!(String::from_utf8_lossy(&run(&["--help"], d.path()).stdout).contains("HAWKESNET_THREADS"));
}

#[test]
fn bench_then_report_reproduces_tables() {
    let d = tempfile::tempdir().unwrap();
    let cfg = "schema_version = 1\n[study]\nreplications = 3\n[study.dgp]\nT = 4.0\n[study.omega]\nmode = \"theory\"\n[study.stage1]\nrestarts = 2\n";
    std::fs::write(d.path().join("s.toml"), cfg).unwrap();
    let o = run(&["bench", "--config", "s.toml", "--reps", "2", "--threads", "1", "--out", "bench"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let printed = String::from_utf8_lossy(&o.stdout).into_owned();
    for caption in ["Table 1", "Table 2", "Table 3", "Table 4"] {
        assert!(printed.contains(caption));
    }
    assert_eq!(std::fs::read_dir(d.path().join("bench/raw")).unwrap().count(), 2);
    let o = run(&["report", "--study", "bench", "--out", "rep"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for t in hawkesnet::experiments::TABLES {
        let name = format!("{t}.csv");
        assert_eq!(
            std::fs::read(d.path().join("bench/tables").join(&name)).unwrap(),
            std::fs::read(d.path().join("rep/tables").join(&name)).unwrap(),
            "{name}"
        );
    }
    assert_eq!(code(&run(&["report", "--study", "bench", "--out", "bench"], d.path())), 1);
    std::fs::write(d.path().join("bench/raw/rep_0.json"), "{}").unwrap();
    assert_eq!(code(&run(&["report", "--study", "bench", "--out", "rep2"], d.path())), 1);
}
