use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nutslab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nutslab"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("NUTSLAB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_constants_passes_and_writes_headers() {
    let dir = tempfile::tempdir().unwrap();
    let o = nutslab(dir.path(), &["verify-constants", "--seed", "1"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
    let csv = fs::read_to_string(dir.path().join("constants_eps0.01_seed1.csv")).unwrap();
    assert!(csv.starts_with("# nutslab "));
    assert!(csv.lines().next().unwrap().contains("seed=1"));
}

#[test]
fn time_law_sums_to_one_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let o = nutslab(dir.path(), &["time-law", "--variant", "bps", "--kstar", "3", "--seed", "4"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("PASS pmf sums to one: sum = 1"));
    let csv = fs::read_to_string(dir.path().join("time_law_bps_k3_seed4.csv")).unwrap();
    // Header comment, column names, then T = -7..=7.
    assert_eq!(csv.lines().count(), 2 + 15);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["sample", "--seed", "9", "--dim", "3", "--n-steps", "40", "--n-chains", "3"];
    assert!(nutslab(a.path(), &args).status.success());
    assert!(nutslab(b.path(), &args).status.success());
    let name = "sample_nuts-mul_d3_h0.2_seed9";
    for ext in ["csv", "json"] {
        let f = format!("{name}.{ext}");
        assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "command = \"time-law\"\nseed = 2\n[kernel]\nkstar = 2\n[experiment]\nvariant = \"mul\"\n")
        .unwrap();
    let o = nutslab(dir.path(), &["--config", cfg.to_str().unwrap(), "--kstar", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("time_law_mul_k4_seed2.csv").exists());
}

#[test]
fn config_errors_exit_with_two_and_are_all_listed() {
    let dir = tempfile::tempdir().unwrap();
    let o = nutslab(dir.path(), &["sample", "--seed", "1", "--h", "-1", "--max-depth", "40"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("kernel.h") && err.contains("kernel.max_depth"), "{err}");

    let o = nutslab(dir.path(), &["sample"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn failed_assertions_exit_with_one_and_record_failures() {
    let dir = tempfile::tempdir().unwrap();
    // A censored mixing run: the iteration cap is far too small to reach the threshold.
    let o = nutslab(
        dir.path(),
        &[
            "mixing",
            "--seed",
            "1",
            "--dims",
            "16",
            "--n-chains",
            "200",
            "--max-iterations",
            "1",
            "--threshold",
            "0.001",
        ],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let f = fs::read_to_string(dir.path().join("failures.json")).unwrap();
    assert!(f.contains("no censored runs"));
}
