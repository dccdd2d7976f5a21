use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hsic-select"));
    c.env_remove("HSIC_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn hsic-select")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(out: &str, key: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .unwrap_or_else(|| panic!("no `{key}` line in\n{out}"))
        .to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes `y` plus the given feature columns.
fn write_csv(dir: &TempDir, name: &str, y: &[f64], cols: &[Vec<f64>]) -> PathBuf {
    let mut s = String::new();
    for j in 0..cols.len() {
        write!(s, "f{j},").unwrap();
    }
    s.push_str("y\n");
    for (i, v) in y.iter().enumerate() {
        for c in cols {
            write!(s, "{},", c[i]).unwrap();
        }
        writeln!(s, "{v}").unwrap();
    }
    let path = dir.path().join(name);
    std::fs::write(&path, s).unwrap();
    path
}

// small deterministic noise without pulling in an RNG crate
fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}

fn signs(n: usize) -> Vec<f64> {
    noise(99, n).iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect()
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    let raw: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&raw).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}");
}

#[test]
fn hsic_permutation_p_value_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let y = signs(60);
    let f0: Vec<f64> = y.iter().zip(noise(1, 60)).map(|(a, b)| a + 2.0 * b).collect();
    let data = write_csv(&dir, "d.csv", &y, &[f0, noise(2, 60)]);
    let args = ["hsic", "--data", p(&data), "--perms", "199", "--seed", "5"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout(&a), stdout(&b));
    let pv: f64 = field(&stdout(&a), "p_value").parse().unwrap();
    assert!(pv > 0.0 && pv <= 1.0);
}

#[test]
fn hsic_seed_from_environment() {
    let dir = TempDir::new().unwrap();
    let y = signs(40);
    let data = write_csv(&dir, "d.csv", &y, &[noise(3, 40), noise(4, 40)]);
    let base = ["hsic", "--data", p(&data), "--perms", "99"];
    let flag = run(&[&base[..], &["--seed", "17"]].concat());
    let env = bin().args(base).env("HSIC_SEED", "17").output().unwrap();
    assert!(env.status.success());
    assert_eq!(stdout(&flag), stdout(&env));
}

#[test]
fn hsic_constant_labels_give_zero() {
    let dir = TempDir::new().unwrap();
    let data = write_csv(&dir, "c.csv", &[1.0; 30], &[noise(5, 30), noise(6, 30)]);
    let o = run(&["hsic", "--data", p(&data), "--perms", "99"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let h: f64 = field(&stdout(&o), "hsic").parse().unwrap();
    assert!(h.abs() < 1e-12, "hsic {h}");
}

#[test]
fn hsic_feature_equal_to_label_has_smallest_p_value() {
    let dir = TempDir::new().unwrap();
    let y = signs(100);
    let data = write_csv(&dir, "e.csv", &y, &[y.clone()]);
    let o = run(&["hsic", "--data", p(&data), "--perms", "199", "--seed", "1"]);
    assert!(o.status.success());
    let pv: f64 = field(&stdout(&o), "p_value").parse().unwrap();
    assert!((pv - 0.005).abs() < 1e-12, "p {pv}");
}

#[test]
fn asymptotic_test_runs() {
    let dir = TempDir::new().unwrap();
    let y = signs(80);
    let data = write_csv(&dir, "a.csv", &y, &[y.clone(), noise(7, 80)]);
    let o = run(&["hsic", "--data", p(&data), "--test", "asymptotic"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pv: f64 = field(&stdout(&o), "p_value").parse().unwrap();
    assert!(pv < 0.01, "p {pv}");
}

#[test]
fn select_ranks_the_informative_feature_first() {
    let dir = TempDir::new().unwrap();
    let m = 80;
    let y = signs(m);
    let f0: Vec<f64> = y.iter().zip(noise(8, m)).map(|(a, b)| a + 0.3 * b).collect();
    let cols = vec![f0, noise(9, m), noise(10, m), noise(11, m)];
    let data = write_csv(&dir, "s.csv", &y, &cols);
    for method in ["bahsic", "fohsic"] {
        let o = run(&["select", "--data", p(&data), "--method", method, "--num-features", "4"]);
        assert!(o.status.success());
        let out = stdout(&o);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "1\tf0", "{method}");
    }
}

#[test]
fn select_json_is_byte_identical_and_valid() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("x.csv");
    let o = run(&["synth", "--dataset", "xor", "--samples", "60", "--seed", "2", "--out", p(&data)]);
    assert!(o.status.success());
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = run(&["select", "--data", p(&data), "--num-features", "2", "--out", p(out)]);
        assert!(o.status.success());
    }
    let (ra, rb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ra, rb);
    let doc: Value = serde_json::from_slice(&ra).unwrap();
    let validator = schema("ranking.schema.json");
    assert_valid(&validator, &doc);
    let mut broken = doc.clone();
    broken.as_object_mut().unwrap().remove("rounds");
    assert!(!validator.is_valid(&broken));
    assert_eq!(doc["ranking"].as_array().unwrap().len(), 22);
    assert_eq!(doc["selected"].as_array().unwrap().len(), 2);
}

#[test]
fn synth_is_deterministic_and_well_formed() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&["synth", "--dataset", "xor", "--samples", "400", "--seed", "3", "--out", p(out)]);
        assert!(o.status.success());
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.as_bytes(), std::fs::read(&b).unwrap().as_slice());
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 23);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 400);
    assert!(rows.iter().all(|r| r.split(',').count() == 23));
}

#[test]
fn synth_regression_reloads_as_real_labels() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("r.csv");
    let o = run(&["synth", "--dataset", "regression", "--samples", "50", "--out", p(&data)]);
    assert!(o.status.success());
    let o = run(&["hsic", "--data", p(&data), "--perms", "19"]);
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), "label_kernel"), "regression-rbf");
}

#[test]
fn synth_rejects_bad_sample_counts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bad.csv");
    let o = run(&["synth", "--dataset", "xor", "--samples", "7", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_json_validates_and_table_is_printed() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("b.json");
    let csv = dir.path().join("b.csv");
    let o = run(&[
        "bench", "--dataset", "multiclass", "--sizes", "40", "--runs", "2", "--methods",
        "pearson,mi", "--seed", "4", "--out", p(&json), "--csv", p(&csv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_valid(&schema("benchmark.schema.json"), &doc);
    assert_eq!(doc["cells"].as_array().unwrap().len(), 2);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table, stdout(&o));
    assert!(table.starts_with("method,size,status,median_rank\n"));
}

#[test]
fn bench_unknown_method_is_a_usage_error() {
    let o = run(&["bench", "--dataset", "xor", "--sizes", "40", "--methods", "relief"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn too_few_samples_exit_with_shape_code() {
    let dir = TempDir::new().unwrap();
    let data = write_csv(&dir, "t.csv", &[1.0, -1.0, 1.0], &[vec![0.1, 0.2, 0.3]]);
    let o = run(&["hsic", "--data", p(&data)]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["select", "--data", p(&data)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn missing_file_is_a_usage_error() {
    let o = run(&["hsic", "--data", "/nonexistent/file.csv"]);
    assert_eq!(o.status.code(), Some(2));
}
