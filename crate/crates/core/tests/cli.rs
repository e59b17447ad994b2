//! End-to-end runs of the `symtrace` binary.

use std::path::Path;
use std::process::Command;

const HARMONIC: &str = r#"
h = [0.2, 0.1]
energy = 1.0
delta_e = 0.5
[model]
name = "harmonic"
[grid]
half_width = 4.0
n = 600
order = 8
[windows]
plateau = 0.1
t_c = 1.6707963267948966
tau = 0.6
[orbits]
t_window = [0.5, 2.5]
seed_count = 4
[weyl]
interval = [0.0, 1.0]
mc_samples = 100000
"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn symtrace(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_symtrace")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) {
    let out = symtrace(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn full_pipeline_writes_hashed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), HARMONIC);
    let out = dir.path().join("out");
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    for cmd in ["spectrum", "orbits", "compare", "weyl"] {
        run_ok(&[cmd, "--config", c, "--out", o]);
    }
    let header = |name: &str| std::fs::read_to_string(out.join(name)).unwrap().lines().next().unwrap().to_string();
    let h = header("spectrum.csv");
    assert!(h.starts_with("# config_hash: "));
    assert_eq!(header("compare.csv"), h);
    assert_eq!(header("weyl.csv"), h);
    let compare = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(compare.lines().nth(1).unwrap().starts_with("h,E,chi,g_quantum,g_quantum_im,g_semi_re"));
    for m in ["spectrum", "orbits", "compare", "weyl"] {
        assert!(out.join(format!("manifest_{m}.json")).exists());
    }
}

#[test]
fn reruns_are_bit_identical_across_execution_modes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), HARMONIC);
    let c = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["orbits", "--config", c, "--out", a.to_str().unwrap(), "--threads", "3"]);
    run_ok(&["orbits", "--config", c, "--out", b.to_str().unwrap(), "--sequential"]);
    let read = |d: &Path| std::fs::read_to_string(d.join("orbits.json")).unwrap();
    assert!(read(&a) == read(&b));
}

#[test]
fn seed_override_changes_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), HARMONIC);
    let c = cfg.to_str().unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    run_ok(&["spectrum", "--config", c, "--out", o]);
    // the spectrum on disk now belongs to a different configuration
    let r = symtrace(&["compare", "--config", c, "--out", o, "--seed", "9"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("hash mismatch"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), HARMONIC);
    let c = cfg.to_str().unwrap();
    let o = dir.path().join("out");
    let o = o.to_str().unwrap();
    assert_eq!(symtrace(&["spectrum"]).status.code(), Some(2));
    assert_eq!(symtrace(&["spectrum", "--config", c, "--override", "h=[0.1, 0.2]"]).status.code(), Some(2));
    assert_eq!(symtrace(&["bogus"]).status.code(), Some(2));
    // the box cannot hold {V ≤ E + δE}
    let r = symtrace(&["spectrum", "--config", c, "--out", o, "--override", "grid.half_width=1.0"]);
    assert_eq!(r.status.code(), Some(3));
    // f̂ supported around 0 is the Weyl regime, not the orbit sum
    let r = symtrace(&["compare", "--config", c, "--out", o, "--override", "windows.t_c=0.0"]);
    assert_eq!(r.status.code(), Some(4), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            symtrace::harness::RunConfig::load(&path, &[]).unwrap();
            n += 1;
        }
    }
    assert!(n >= 3);
}
