use std::path::PathBuf;
use std::process::{Command, Output};

use vulnprice_cli::table::Table;

fn vulnprice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vulnprice")).args(args).output().expect("spawn vulnprice")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

fn table(out: &Output) -> Table {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    Table::read(out.stdout.as_slice()).unwrap()
}

#[test]
fn price_output_is_deterministic() {
    let args = ["price", "--instrument", "bond", "--engines", "series,mc", "--T", "1,2", "--paths", "2000", "--seed", "11"];
    let a = vulnprice(&args);
    let b = vulnprice(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let t = table(&a);
    assert_eq!(t.meta("seed"), Some("11"));
    assert_eq!(t.rows.len(), 6);
}

#[test]
fn run_file_drives_bond_table() {
    let t = table(&vulnprice(&["price", "--config", &fixture("table2.toml")]));
    assert_eq!(t.rows.len(), 33);
    for col in ["series", "ode", "expm"] {
        assert!(t.column(col).is_some(), "missing {col}");
    }
    for r in 0..t.rows.len() {
        let (o, e) = (t.f64_at(r, "ode").unwrap(), t.f64_at(r, "expm").unwrap());
        assert!((o - e).abs() < 1e-6);
    }
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bond.csv");
    let out = vulnprice(&["price", "--T", "1", "-o", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let t = Table::read(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 3);
}

#[test]
fn expm_rejects_time_varying_generator() {
    let out = vulnprice(&["price", "--model", &fixture("sinusoidal.toml"), "--engines", "expm", "--T", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("expm requires constant generator"));
}

#[test]
fn bad_model_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "short_rates = [0.01]\n").unwrap();
    let out = vulnprice(&["price", "--model", path.to_str().unwrap(), "--T", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_engine_is_a_config_error() {
    let out = vulnprice(&["price", "--engines", "lattice", "--T", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn converge_reports_slope() {
    let out = vulnprice(&["converge", "--T", "1", "--terms", "2"]);
    let t = table(&out);
    assert_eq!(t.rows.len(), 5);
    let slope: f64 = t.meta("slope").unwrap().parse().unwrap();
    assert!((slope + 1.0).abs() < 0.2, "slope {slope}");
}

#[test]
fn validate_passes_on_bundled_model() {
    let out = vulnprice(&["validate", "--horizon", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}
