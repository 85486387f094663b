use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dke(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dke")).args(args).output().expect("spawn dke")
}

fn preset(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(format!("{name}.toml"));
    p.display().to_string()
}

/// The `code=` field of the single error line, checking its shape.
fn error_code(out: &Output) -> String {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().next().unwrap_or_default();
    assert!(line.starts_with("dke-error code="), "stderr: {stderr}");
    let rest = &line["dke-error code=".len()..];
    let (code, message) = rest.split_once(" message=").expect("message field");
    assert!(!code.is_empty() && !code.contains(' '));
    assert!(!message.is_empty());
    code.to_string()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn verify_basis_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("vb");
    let out = dke(&["verify-basis", "--cells", "4", "--nmax", "3", "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("orthonormality"));
    assert_eq!(fs::read_to_string(out_dir.join("verify_basis.txt")).unwrap(), stdout);
}

#[test]
fn verify_basis_failures() {
    let out = dke(&["verify-basis", "--cells", "4", "--nmax", "2", "--corrupt-prefactor"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_code(&out), "check_failed");

    let out = dke(&["verify-basis", "--cells", "3", "--nmax", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "invalid_grid");

    let out = dke(&["verify-basis", "--cells", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "usage");
}

#[test]
fn usage_errors() {
    for args in
        [&["frobnicate"][..], &[][..], &["simulate"][..], &["limit-study", "--config", "x.toml", "--levels", "two"][..]]
    {
        let out = dke(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(error_code(&out), "usage");
    }
    assert_eq!(dke(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_writes_outputs_to_override() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = dke(&["simulate", "--config", &preset("uniform_drift"), "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["snapshots.csv", "diagnostics.csv", "run_meta.txt"] {
        assert!(out_dir.join(file).is_file(), "{file}");
    }
    let meta = fs::read_to_string(out_dir.join("run_meta.txt")).unwrap();
    assert!(meta.lines().all(|l| l.contains(" = ")));
}

#[test]
fn simulate_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = dke(&["simulate", "--config", d.join("absent.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_code(&out), "io");

    let bad =
        write(d, "bad.toml", "[grid]\nd = -1.0\nnum_cells = 3\nn_max = 2\n\n[initial]\nkind = \"uniform\"\nn0 = 0.5\n");
    let out = dke(&["simulate", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "config_invalid");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2") && stderr.contains("line 3"), "{stderr}");

    let fast = write(
        d,
        "fast.toml",
        "[grid]\nd = 1.0\nnum_cells = 4\nn_max = 2\n\n[initial]\nkind = \"uniform\"\nn0 = 0.5\n\n[integrator]\ndt = 0.5\n",
    );
    let out = dke(&["simulate", "--config", &fast, "--output-dir", d.join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_code(&out), "dt_bound");

    let blowup = write(
        d,
        "blowup.toml",
        "[grid]\nd = 1.0\nnum_cells = 4\nn_max = 1\n\n[initial]\nkind = \"gaussian_rk\"\ncenter_m = 0.0\ncenter_n = 1.0\n\
         sigma_r = 0.3\nsigma_k = 0.0\namplitude = 1.0\n\n[integrator]\ndt = 0.07\nt_end = 1.0\nscheme = \"euler\"\n",
    );
    let out = dke(&["simulate", "--config", &blowup, "--output-dir", d.join("p").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_code(&out), "positivity");
}

#[test]
fn limit_study_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset("limit_study_base");
    let out = dke(&["limit-study", "--config", &cfg, "--levels", "3", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("limit_study.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout), csv);
    assert_eq!(csv.lines().count(), 4);

    let out = dke(&["limit-study", "--config", &cfg, "--levels", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "invalid_argument");
}
