use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qdyn_cli::output::Series;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn qdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdyn")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn rabi_run_writes_analytic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rabi.csv");
    let o = qdyn(&["run", path(&configs().join("rabi.toml")), "--output", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("time,re_rho_0_0,im_rho_0_0,re_rho_0_1,"));
    let s = Series::read_csv(&out).unwrap();
    assert_eq!(s.times.len(), 101);
    for (r, &t) in s.times.iter().enumerate() {
        assert!((s.element(r, 0, 0).0 - t.cos().powi(2)).abs() < 1e-8);
    }
}

#[test]
fn plot_flag_writes_svg_next_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = qdyn(&["run", path(&configs().join("rabi.toml")), "--output", path(&out), "--plot"]);
    assert!(o.status.success());
    let svg = std::fs::read_to_string(dir.path().join("r.svg")).unwrap();
    assert!(svg.contains("<polyline"));
}

#[test]
fn missing_dt_is_a_line_numbered_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let src = std::fs::read_to_string(configs().join("rabi.toml")).unwrap().replace("dt = 0.125\n", "");
    std::fs::write(&cfg, src).unwrap();
    let o = qdyn(&["run", path(&cfg)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line ") && err.contains("`dt`"), "{err}");
}

#[test]
fn oversized_memory_is_refused_up_front() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("big.toml");
    let src = std::fs::read_to_string(configs().join("quapi_ohmic.toml")).unwrap().replace("L = 6", "L = 40");
    std::fs::write(&cfg, src).unwrap();
    let o = qdyn(&["run", path(&cfg), "--output", path(&dir.path().join("x.csv"))]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget"));
}

#[test]
fn identical_runs_compare_to_zero() {
    let cfg = configs().join("rabi.toml");
    let o = qdyn(&["compare", path(&cfg), path(&cfg), "--tol", "0"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("overall max_abs 0.0000000000000000e0"));
}

#[test]
fn redfield_visibly_deviates_from_quapi() {
    let o = qdyn(&[
        "compare",
        path(&configs().join("brme_ohmic.toml")),
        path(&configs().join("quapi_ohmic.toml")),
        "--tol",
        "5e-3",
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn mismatched_grids_are_rejected() {
    let o = qdyn(&[
        "compare",
        path(&configs().join("rabi.toml")),
        path(&configs().join("quapi_ohmic.toml")),
        "--tol",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mismatch"));
}

#[test]
fn every_example_config_validates() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            qdyn_cli::config::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 10);
}

#[test]
fn heom_and_quapi_agree_through_compare() {
    let o = qdyn(&[
        "compare",
        path(&configs().join("spin_boson_heom.toml")),
        path(&configs().join("spin_boson_quapi.toml")),
        "--tol",
        "5e-3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}
