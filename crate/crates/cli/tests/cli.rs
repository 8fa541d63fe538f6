use std::path::Path;
use std::process::{Command, Output};

use dpal_core::data::random_attribute_table;
use dpal_core::io::{DatabaseDocument, QueryDocument};
use dpal_core::mechanisms::{gaussian_noise_release, noiseless};
use dpal_core::queries::{random_sign_query, MarginalQuery, Query};
use serde_json::Value;

fn dpal(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpal"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env_remove("DPAL_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn bare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpal")).args(args).output().expect("binary runs")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn lp_decode_attack_reports_success() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpal(&["attack", "lp-decode", "--d", "32", "--k", "128", "--alpha", "1", "--gamma", "0.01", "--seed", "7"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("attack-lp-decode.json"));
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["report"]["result"]["success"], true);
    assert_eq!(doc["seed"], 7);
    assert!(doc["report"]["result"].get("elapsed_ms").is_none());
    assert!(dir.path().join("attack-lp-decode.csv").exists());
}

#[test]
fn missing_flag_is_usage_error() {
    let out = bare(&["attack", "lp-decode", "--d", "32"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(bare(&["no-such-experiment"]).status.code(), Some(2));
}

#[test]
fn fixed_seed_reports_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["chi-square-tail", "--seed", "5", "--trials", "2000"];
    assert_eq!(dpal(&args, a.path()).status.code(), Some(0));
    assert_eq!(dpal(&args, b.path()).status.code(), Some(0));
    for f in ["chi-square-tail.json", "chi-square-tail.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let t = tempfile::tempdir().unwrap();
    let mut timed = args.to_vec();
    timed.push("--timings");
    assert_eq!(dpal(&timed, t.path()).status.code(), Some(0));
    assert!(read_json(&t.path().join("chi-square-tail.json"))["timings"]["elapsed_ms"].is_f64());
}

#[test]
fn report_embeds_seed_hash_and_versions() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dpal(&["hadamard-sigma", "--seed", "3", "--trials", "3"], dir.path()).status.code(), Some(0));
    let doc = read_json(&dir.path().join("hadamard-sigma.json"));
    assert_eq!(doc["seed"], 3);
    assert_eq!(doc["config"]["trials"], 3);
    assert_eq!(doc["config"]["experiment"], "hadamard-sigma");
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(doc["versions"]["dpal-core"], env!("CARGO_PKG_VERSION"));
    let csv = std::fs::read_to_string(dir.path().join("hadamard-sigma.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("d_prime,trial,ratio"));
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
}

#[test]
fn config_hash_tracks_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    dpal(&["chi-square-tail", "--trials", "100"], a.path());
    dpal(&["chi-square-tail", "--trials", "101"], b.path());
    let ha = read_json(&a.path().join("chi-square-tail.json"))["config_hash"].clone();
    let hb = read_json(&b.path().join("chi-square-tail.json"))["config_hash"].clone();
    assert_ne!(ha, hb);
}

#[test]
fn run_reads_discriminated_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"experiment":"blatant-small-universe","algorithm":"all_coordinates","trials":5}"#);
    let out = dpal(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("blatant-small-universe.json"));
    assert_eq!(doc["report"]["k"], 23);
    assert_eq!(doc["report"]["successes"], 5);
}

#[test]
fn malformed_or_mismatched_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"experiment":"chi-square-tail","k":"many"}"#);
    assert_eq!(dpal(&["run", "--config", &bad], dir.path()).status.code(), Some(3));
    let unknown = write(dir.path(), "u.json", r#"{"experiment":"warp-drive"}"#);
    assert_eq!(dpal(&["run", "--config", &unknown], dir.path()).status.code(), Some(3));
    let other = write(dir.path(), "o.json", r#"{"experiment":"rademacher-tail"}"#);
    let out = dpal(&["chi-square-tail", "--config", &other], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rademacher-tail"));
}

#[test]
fn set_overrides_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpal(&["lp-decode-sweep", "--trials", "2", "--set", "wild_mode=adaptive", "--set", "section_samples=100"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("lp-decode-sweep.json"));
    assert_eq!(doc["config"]["wild_mode"], "adaptive");
    assert_eq!(doc["config"]["section_samples"], 100);
    assert_eq!(dpal(&["lp-decode-sweep", "--set", "nonsense"], dir.path()).status.code(), Some(3));
}

#[test]
fn failing_assertion_exits_one() {
    // Equal weights at d = 20 cannot reach the 9/10 deviation probability.
    let dir = tempfile::tempdir().unwrap();
    let out = dpal(&["rademacher-tail", "--trials", "20000"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(read_json(&dir.path().join("rademacher-tail.json"))["pass"], false);
}

#[test]
fn resource_guard_fails_fast() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpal(&["attack", "lp-decode", "--d", "100000", "--k", "100000", "--alpha", "1", "--gamma", "0"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tableau"));
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dpal"))
        .args(["chi-square-tail", "--trials", "10"])
        .env("DPAL_OUTPUT_DIR", dir.path())
        .env("DPAL_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("chi-square-tail.json").exists());
}

fn counting_fixture(dir: &Path, noisy: bool) -> (String, String) {
    let q = random_sign_query(8, 40, 3);
    let x = dpal_core::data::HistogramDatabase::new(vec![3, 0, 1, 4, 2, 0, 5, 1]);
    let answers = q.evaluate(&x);
    let rel = if noisy { gaussian_noise_release(&answers, 10.0 * x.size() as f64, 9).unwrap() } else { noiseless(&answers) };
    let qp = write(dir, "q.json", &serde_json::to_string(&QueryDocument::from_counting(&q)).unwrap());
    let rp = write(dir, "r.json", &serde_json::to_string(&rel).unwrap());
    (qp, rp)
}

#[test]
fn validate_noiseless_release_is_blatant() {
    let dir = tempfile::tempdir().unwrap();
    let (q, r) = counting_fixture(dir.path(), false);
    let out = dpal(&["validate-release", "--query", &q, "--release", &r], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "blatantly non-private");
    let doc = read_json(&dir.path().join("validate-release.json"));
    assert_eq!(doc["report"]["verdict"], "blatantly non-private");
    assert_eq!(doc["report"]["hit_fraction"], 1.0);
}

#[test]
fn validate_heavy_noise_release_finds_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (q, r) = counting_fixture(dir.path(), true);
    let out = dpal(&["validate-release", "--query", &q, "--release", &r, "--alpha", "1", "--gamma", "0.1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "no reconstruction at configured thresholds");
}

#[test]
fn validate_truncated_release_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let (q, r) = counting_fixture(dir.path(), false);
    let text = std::fs::read_to_string(&r).unwrap();
    let cut = write(dir.path(), "cut.json", &text[..text.len() / 2]);
    let out = dpal(&["validate-release", "--query", &q, "--release", &cut], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&format!("at byte {}", text.len() / 2)), "{err}");
    assert!(err.contains("truncated"), "{err}");
}

#[test]
fn validate_schema_violation_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let q = write(dir.path(), "q.json", r#"{"kind":"counting","matrix":{"rows":1,"cols":1,"entries":[1.0]},"extra":1}"#);
    let r = write(dir.path(), "r.json", r#"{"answers":[1.0],"mechanism":"noiseless","seed":0}"#);
    let out = dpal(&["validate-release", "--query", &q, "--release", &r], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn validate_marginal_release_with_known_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = random_attribute_table(3, 4, 1).with_hidden_column(3).unwrap();
    let m = MarginalQuery::new(4, 2).unwrap();
    let answers: Vec<f64> = m.evaluate_table(&table).unwrap().into_iter().map(|v| v as f64).collect();
    let q = write(dir.path(), "q.json", r#"{"kind":"marginal","d_prime":4,"ell":2}"#);
    let r = write(dir.path(), "r.json", &serde_json::to_string(&noiseless(&answers)).unwrap());
    let k = write(dir.path(), "k.json", &serde_json::to_string(&DatabaseDocument::from_table(&table)).unwrap());
    let out = dpal(&["validate-release", "--query", &q, "--release", &r, "--known", &k], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "blatantly non-private");
    let doc = read_json(&dir.path().join("validate-release.json"));
    assert_eq!(doc["report"]["query_kind"], "marginal");
    let missing = dpal(&["validate-release", "--query", &q, "--release", &r], dir.path());
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn list_prints_every_experiment() {
    let out = bare(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
}

#[test]
fn reports_carry_schema_required_fields() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/v1");
    let schema = read_json(&root.join("report.schema.json"));
    let dir = tempfile::tempdir().unwrap();
    dpal(&["chi-square-tail", "--trials", "10"], dir.path());
    let doc = read_json(&dir.path().join("chi-square-tail.json"));
    for key in schema["required"].as_array().unwrap() {
        assert!(doc.get(key.as_str().unwrap()).is_some(), "{key}");
    }
    let allowed = schema["properties"].as_object().unwrap();
    assert!(doc.as_object().unwrap().keys().all(|k| allowed.contains_key(k)));
    for entry in std::fs::read_dir(&root).unwrap() {
        let v = read_json(&entry.unwrap().path());
        assert!(v["$schema"].as_str().unwrap().contains("2020-12"));
    }
}
