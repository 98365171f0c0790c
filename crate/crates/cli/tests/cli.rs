use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

struct Run {
    code: i32,
    stdout: Vec<u8>,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.stdout)
            .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&self.stdout)))
    }

    fn text(&self) -> String {
        String::from_utf8(self.stdout.clone()).unwrap()
    }
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rectbound"));
    cmd.args(args).env_remove("RECTBOUND_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run { code: out.status.code().expect("exit code"), stdout: out.stdout, stderr: String::from_utf8_lossy(&out.stderr).into_owned() }
}

fn run(args: &[&str]) -> Run {
    run_env(args, &[])
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn assert_valid(doc: &Value) {
    let name = doc["schema"].as_str().expect("schema field").trim_start_matches("rectbound/");
    let path = schema_dir().join(format!("{name}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}");
}

/// One invocation per command, each kept fast.
const COMMANDS: &[&[&str]] = &[
    &["bound", "rec", "--family", "EQ", "--n", "2", "--z", "1", "--eps", "0"],
    &["bound", "rec", "--family", "AND", "--z", "1", "--eps", "0.1"],
    &["bound", "srec-entropy", "--family", "AND", "--z", "1", "--eps", "0.1", "--delta", "0.05"],
    &["bound", "srec-lp", "--family", "AND", "--n", "1", "--z", "1", "--eps", "0.1"],
    &["verify", "--suite", "probofg", "--family", "AND", "--n", "1", "--eps", "0.3"],
    &["verify", "--suite", "pinsker", "--trials", "200", "--seed", "3"],
    &["sampler", "run", "--family", "AND", "--n", "1", "--eps", "0.3", "--reduced-delta", "3", "--trials", "20000", "--seed", "1"],
    &["sampler", "run", "--family", "EQ", "--eps", "0.3", "--trials", "2000"],
    &["sampler", "verify", "--family", "XOR", "--eps", "0.3", "--reduced-delta", "2"],
    &["decay", "--family", "AND", "--n", "1", "--t", "8", "--trials", "5000", "--seed", "1", "--format", "json"],
    &["family", "list"],
    &["family", "dump", "--family", "IP", "--n", "2"],
];

#[test]
fn srec_lp_reports_primal_dual_and_gap() {
    let r = run(&["bound", "srec-lp", "--family", "AND", "--n", "1", "--z", "1", "--eps", "0.1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    let res = &v["result"];
    let (p, d) = (res["primal"].as_f64().unwrap(), res["dual"].as_f64().unwrap());
    assert!((p - d).abs() <= 1e-6);
    assert!(res["gap"].as_f64().unwrap().abs() <= 1e-6);
    assert_eq!(v["config"]["eps"], 0.1);
    assert_eq!(v["config"]["z"], 1);
}

#[test]
fn missing_eps_is_a_validation_error() {
    let r = run(&["bound", "srec-lp", "--family", "AND", "--n", "1", "--z", "1"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("--eps"), "{}", r.stderr);
}

#[test]
fn rec_of_equality_is_four() {
    let r = run(&["bound", "rec", "--family", "EQ", "--n", "2", "--z", "1", "--eps", "0"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["result"]["value"], 4.0);
}

#[test]
fn verify_all_passes() {
    let r = run(&["verify", "--suite", "all", "--seed", "7"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["result"]["pass"], true);
    let suites: Vec<&str> = v["result"]["suites"].as_array().unwrap().iter().map(|s| s["suite"].as_str().unwrap()).collect();
    for s in [
        "pinsker",
        "substate",
        "ratiovs1",
        "eqv",
        "dgeqsrec",
        "distclose",
        "probofg",
        "singlemessagecloseness",
        "probnonabort-reduced",
        "zeroprotocolimpliesrec",
        "goodcoordinate",
    ] {
        assert!(suites.contains(&s), "{s} missing from {suites:?}");
    }
    assert!(r.stderr.contains("PASS"));
}

#[test]
fn probofg_on_and_has_four_passing_items() {
    let r = run(&["verify", "--suite", "probofg", "--family", "AND", "--n", "1", "--eps", "0.3"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let items = r.json()["result"]["suites"][0]["items"].as_array().unwrap().clone();
    assert_eq!(items.len(), 4);
    assert!(items.iter().all(|i| i["pass"] == true));
}

#[test]
fn unknown_suite_is_a_validation_error() {
    let r = run(&["verify", "--suite", "nosuch"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("nosuch"));
}

#[test]
fn sampler_run_reports_checks() {
    let r = run(&[
        "sampler",
        "run",
        "--family",
        "AND",
        "--n",
        "1",
        "--eps",
        "0.3",
        "--reduced-delta",
        "3",
        "--trials",
        "100000",
        "--seed",
        "1",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    let report = &v["result"]["report"];
    assert_eq!(report["counts"]["trials"], 100000);
    assert_eq!(report["config"]["delta"], 3.0);
    assert_eq!(report["config"]["reduced"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 3);
    assert_eq!(v["result"]["pass"], true);
}

#[test]
fn decay_prints_a_csv_curve() {
    let r = run(&["decay", "--family", "AND", "--n", "1", "--t", "8", "--trials", "50000", "--seed", "1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let text = r.text();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,successes,trials,estimate,std_error");
    assert_eq!(lines.len(), 9);
    let est: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(est.windows(2).all(|w| w[1] <= w[0]), "{est:?}");
}

#[test]
fn zero_trials_is_a_validation_error() {
    assert_eq!(run(&["decay", "--family", "AND", "--t", "4", "--trials", "0"]).code, 2);
    assert_eq!(run(&["sampler", "run", "--family", "AND", "--eps", "0.3", "--trials", "0"]).code, 2);
    assert_eq!(run(&["verify", "--suite", "pinsker", "--trials", "0"]).code, 2);
}

#[test]
fn parameter_validation() {
    // eps outside (0, 1/3) for the sampler
    assert_eq!(run(&["sampler", "run", "--family", "AND", "--eps", "0.4", "--trials", "10"]).code, 2);
    assert_eq!(run(&["bound", "rec", "--family", "NOPE", "--z", "1", "--eps", "0.1"]).code, 2);
    assert_eq!(run(&["bound", "rec", "--z", "1", "--eps", "0.1"]).code, 2);
    assert_eq!(run(&["bound", "srec-entropy", "--family", "AND", "--z", "1", "--eps", "0.1"]).code, 2);
    assert_eq!(run(&["decay", "--family", "AND", "--t", "0"]).code, 2);
    assert_eq!(run(&["bound", "rec", "--family", "AND", "--z", "1", "--eps", "x"]).code, 2);
    assert_eq!(run(&["frobnicate"]).code, 2);
    assert_eq!(run(&["--help"]).code, 0);
}

#[test]
fn every_command_validates_against_its_schema() {
    for args in COMMANDS {
        let r = run(args);
        assert_eq!(r.code, 0, "{args:?}: {}", r.stderr);
        assert_valid(&r.json());
    }
}

#[test]
fn failed_checks_still_produce_valid_output() {
    // Full-scale parameters: no trial reaches H, so the histogram checks
    // fail. `sampler run` is a report and still exits 0.
    let r = run(&["sampler", "run", "--family", "AND", "--eps", "0.3", "--trials", "200"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["result"]["pass"], false);
    assert_valid(&v);
}

#[test]
fn reruns_are_byte_identical() {
    for args in COMMANDS {
        let (a, b) = (run(args), run(args));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
    let csv = ["verify", "--suite", "distclose", "--trials", "300", "--seed", "5", "--format", "csv"];
    assert_eq!(run(&csv).stdout, run(&csv).stdout);
}

#[test]
fn thread_cap_does_not_change_output() {
    let args = ["sampler", "run", "--family", "EQ", "--eps", "0.3", "--reduced-delta", "2", "--trials", "30000", "--seed", "4"];
    let free = run(&args);
    let one = run_env(&args, &[("RECTBOUND_THREADS", "1")]);
    assert_eq!(one.code, 0, "{}", one.stderr);
    assert_eq!(free.stdout, one.stdout);
    assert_eq!(run_env(&args, &[("RECTBOUND_THREADS", "0")]).code, 2);
    assert_eq!(run_env(&args, &[("RECTBOUND_THREADS", "many")]).code, 2);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"family": "XOR", "n": 1, "z": 0, "eps": 0.2}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let r = run(&["--config", c, "bound", "rec", "--eps", "0.1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["config"]["family"], "XOR");
    assert_eq!(v["config"]["z"], 0);
    assert_eq!(v["config"]["eps"], 0.1);

    // The echoed config reproduces the run.
    let echoed = dir.path().join("echo.json");
    std::fs::write(&echoed, serde_json::to_string(&v["config"]).unwrap()).unwrap();
    let again = run(&["--config", echoed.to_str().unwrap(), "bound", "rec"]);
    assert_eq!(again.stdout, r.stdout);

    std::fs::write(&cfg, r#"{"family": "XOR", "z": 0, "eps": 0.2, "colour": 1}"#).unwrap();
    assert_eq!(run(&["--config", c, "bound", "rec"]).code, 2);
    std::fs::write(&cfg, r#"{"command": "decay", "family": "XOR", "z": 0, "eps": 0.2}"#).unwrap();
    assert_eq!(run(&["--config", c, "bound", "rec"]).code, 2);
    assert_eq!(run(&["--config", dir.path().join("absent.json").to_str().unwrap(), "family", "list"]).code, 2);
}

#[test]
fn csv_to_file_writes_a_config_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let r = run(&["decay", "--family", "AND", "--t", "3", "--trials", "100", "--output", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,successes,trials,estimate,std_error\r\n"));
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("curve.csv.config.json")).unwrap()).unwrap();
    assert_eq!(side["config"]["trials"], 100);
    assert!(side.get("result").is_none());
    assert_valid(&side);
}

#[test]
fn dumped_family_reloads_as_a_problem() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("ip.json");
    let dump = run(&["family", "dump", "--family", "IP", "--n", "2"]);
    std::fs::write(&file, serde_json::to_string(&dump.json()["result"]).unwrap()).unwrap();
    let from_file = run(&["bound", "rec", "--problem", file.to_str().unwrap(), "--z", "1", "--eps", "0.2"]).json();
    let from_family = run(&["bound", "rec", "--family", "IP", "--n", "2", "--z", "1", "--eps", "0.2"]).json();
    assert_eq!(from_file["result"], from_family["result"]);
    assert_eq!(run(&["bound", "rec", "--family", "IP", "--problem", file.to_str().unwrap(), "--z", "1", "--eps", "0.2"]).code, 2);
}

#[test]
fn csv_fields_are_quoted() {
    let r = run(&["verify", "--suite", "pinsker", "--trials", "50", "--format", "csv"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let text = r.text();
    assert!(text.starts_with("suite,instance,name,lhs,rhs,trials,failures,margin,pass\r\n"));
    let mut rd = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    for rec in rd.records() {
        assert_eq!(rec.unwrap().len(), 9);
    }
}

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)).unwrap()
}

#[test]
fn sampler_run_matches_regression_file() {
    let r = run(&[
        "sampler",
        "run",
        "--family",
        "AND",
        "--n",
        "1",
        "--eps",
        "0.3",
        "--reduced-delta",
        "3",
        "--trials",
        "100000",
        "--seed",
        "1",
    ]);
    assert_eq!(r.stdout, fixture("sampler_run_and_delta3_seed1.json"));
}

#[test]
fn decay_matches_regression_file() {
    let r = run(&["decay", "--family", "AND", "--n", "1", "--t", "8", "--trials", "50000", "--seed", "1"]);
    assert_eq!(r.stdout, fixture("decay_and_t8_seed1.csv"));
}
