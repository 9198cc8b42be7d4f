use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use heralded_qe::config::demo_config;
use heralded_qe::io::{Report, COUNTS_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heralded-qe"))
}

fn replica(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/replica").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(report: &Report, key: &str) -> f64 {
    report
        .get(key)
        .unwrap_or_else(|| panic!("missing {key}"))
        .parse()
        .unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn xi_curve_rows() {
    let o = run(&["xi-curve", "--shape", "gaussian", "--ratios", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,value"));
    let (x, v) = lines.next().unwrap().split_once(',').unwrap();
    assert_eq!(x, "7");
    assert!((v.parse::<f64>().unwrap() - 0.98995).abs() < 1e-5);

    let o = run(&["xi-curve", "--shape", "supergaussian6", "--ratios", "0.5,1,2.3,5"]);
    assert!(o.status.success());
    let values: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
        .collect();
    assert_eq!(values.len(), 4);
    assert!(values.windows(2).all(|w| w[1] > w[0]));
    assert!((values[2] - 0.99).abs() <= 0.005);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["xi-curve", "--shape", "gaussian", "--ratios"],
        vec!["xi-curve", "--shape", "gaussian"],
        vec!["xi-curve", "--shape", "lorentzian", "--ratios", "1"],
        vec!["xi-curve", "--shape", "gaussian", "--ratios=-1"],
        vec!["calibrate"],
        vec!["no-such-command"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (path, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let o = run(&["simulate", "--seed", seed, "--gates", "2000000", "--out", path_str(path)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (a, b, c) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), std::fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(String::from_utf8(a).unwrap().starts_with(&COUNTS_HEADER.join(",")));
}

#[test]
fn blind_detectors_give_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = demo_config();
    for d in [&mut cfg.signal_detector, &mut cfg.idler_detector] {
        d.quantum_efficiency = 0.0;
        d.dark_count_prob = 0.0;
    }
    let config = dir.path().join("blind.toml");
    std::fs::write(&config, cfg.to_toml().unwrap()).unwrap();
    let out = dir.path().join("counts.csv");
    let o = run(&["simulate", "--config", path_str(&config), "--gates", "1000000", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let records = heralded_qe::io::read_counts(&out).unwrap();
    assert_eq!(records.len(), cfg.run.powers_mw.len());
    for r in records {
        assert_eq!((r.singles_signal, r.singles_idler, r.coincidences_raw), (0, 0, 0));
    }
}

#[test]
fn demo_simulation_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("counts.csv");
    let raman = dir.path().join("raman.csv");
    let o = run(&["simulate", "--out", path_str(&out), "--raman", path_str(&raman), "--verify"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!stderr(&o).contains("FAIL"));
    assert!(raman.exists());
}

#[test]
fn schema_errors_exit_3_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad_header = dir.path().join("header.csv");
    std::fs::write(&bad_header, "power_mw,gates\n0.1,100\n").unwrap();
    let bad_value = dir.path().join("value.csv");
    std::fs::write(
        &bad_value,
        format!("{}\n0.1,1000000,10,10,1,\n0.2,1000000,ten,10,1,\n", COUNTS_HEADER.join(",")),
    )
    .unwrap();
    let out = dir.path().join("report.txt");
    for (file, line) in [(&bad_header, "line 1"), (&bad_value, "line 3")] {
        let o = run(&["calibrate", "--counts", path_str(file), "--out", path_str(&out)]);
        assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
        assert!(stderr(&o).contains(line), "{}", stderr(&o));
    }
    // nothing is written when the input is rejected
    assert!(!out.exists());

    let o = run(&["simulate", "--config", "/nonexistent/run.toml", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn degenerate_fit_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let raman = dir.path().join("raman.csv");
    let rows: String = [0.1, 0.2, 0.3].iter().map(|p| format!("{p},1000000,0,0,0,\n")).collect();
    std::fs::write(&raman, format!("{}\n{rows}", COUNTS_HEADER.join(","))).unwrap();
    let o = run(&["raman-fit", "--raman", path_str(&raman), "--eta-ti", "0.1"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn replica_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.txt");
    let budget = dir.path().join("budget.csv");
    let plots = dir.path().join("plots");
    let o = run(&[
        "calibrate",
        "--config",
        path_str(&replica("config.toml")),
        "--counts",
        path_str(&replica("counts.csv")),
        "--raman",
        path_str(&replica("raman.csv")),
        "--scan",
        path_str(&replica("scan.csv")),
        "--out",
        path_str(&out),
        "--budget",
        path_str(&budget),
        "--emit-plot-data",
        path_str(&plots),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = Report::parse(&std::fs::read_to_string(&out).unwrap());
    let eta = value(&report, "eta_ut");
    let std = value(&report, "eta_ut_std");
    assert!((eta - 0.117).abs() < 0.005, "eta = {eta}");
    assert!((std - 0.016).abs() < 0.002, "std = {std}");
    assert_eq!(report.get("xi_source"), Some("scan"));
    assert!((value(&report, "xi_s") - 0.493).abs() < 0.002);
    for key in ["c_c_per_pulse", "r_if_per_pulse", "s1_prime", "pair_rate", "zeta", "multipair_bound"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }

    let table = std::fs::read_to_string(&budget).unwrap();
    assert!(table.starts_with("configuration,term,relative_dev"));
    assert!(table.contains("operating_point,eta_ut,"));

    for name in [
        "xi_curve_gaussian",
        "xi_curve_supergaussian6",
        "idler_singles",
        "coincidence_vs_heralding",
        "scan",
        "scan_fit",
        "coincidence_slope",
        "zeta_vs_ratio",
        "eta_vs_ratio",
    ] {
        let text = std::fs::read_to_string(plots.join(format!("{name}.csv"))).unwrap();
        assert!(text.starts_with("x,value\n"), "{name}");
        assert!(text.lines().count() > 1, "{name}");
    }
}

#[test]
fn unit_collection_efficiency_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = demo_config();
    cfg.source.xi_s = Some(1.0);
    for d in [&mut cfg.signal_detector, &mut cfg.idler_detector] {
        d.dead_time_us = 0.0;
        d.afterpulse_prob = 0.0;
    }
    cfg.run.gates_per_point = 500_000_000;
    let config = dir.path().join("cw.toml");
    std::fs::write(&config, cfg.to_toml().unwrap()).unwrap();
    let counts = dir.path().join("counts.csv");
    let raman = dir.path().join("raman.csv");
    let o = run(&[
        "simulate",
        "--config",
        path_str(&config),
        "--out",
        path_str(&counts),
        "--raman",
        path_str(&raman),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&[
        "calibrate",
        "--config",
        path_str(&config),
        "--counts",
        path_str(&counts),
        "--raman",
        path_str(&raman),
        "--xi",
        "1.0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = Report::parse(&stdout(&o));
    assert_eq!(value(&report, "xi_s"), 1.0);
    let eta = value(&report, "eta_ut");
    let se = value(&report, "eta_ut_stat_std");
    let truth = cfg.signal_detector.quantum_efficiency;
    assert!((eta - truth).abs() < 3.0 * se, "{eta} vs {truth} (se {se})");
}

#[test]
fn stage_commands() {
    let o = run(&[
        "scan-fit",
        "--scan",
        path_str(&replica("scan.csv")),
        "--config",
        path_str(&replica("config.toml")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = Report::parse(&stdout(&o));
    assert!((value(&r, "xi_s") - 0.493).abs() < 0.002);
    assert!((value(&r, "sigma0_prime_nm") - 0.73).abs() < 1e-6);

    let o = run(&[
        "scan-fit",
        "--scan",
        path_str(&replica("scan.csv")),
        "--filter-center-nm",
        "1550.7",
        "--filter-fwhm-nm",
        "0.6",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((value(&Report::parse(&stdout(&o)), "xi_s") - 0.493).abs() < 0.002);

    let o = run(&[
        "raman-fit",
        "--raman",
        path_str(&replica("raman_narrow.csv")),
        "--config",
        path_str(&replica("config.toml")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s1 = value(&Report::parse(&stdout(&o)), "s1_prime");
    assert!((s1 - 11.93).abs() < 0.54, "s1' = {s1}");

    let dir = tempfile::tempdir().unwrap();
    let budget = dir.path().join("budget.csv");
    let o = run(&["uncertainty", "--budget", path_str(&budget)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = Report::parse(&stdout(&o));
    let rel = value(&r, "single.rel_eta_ut");
    assert!((rel - 0.135).abs() < 0.01, "{rel}");
    assert!((value(&r, "single.rel_r_if") - 0.12).abs() < 0.005);
    assert!(budget.exists());

    let o = run(&[
        "uncertainty",
        "--p-ave-mw",
        "0.3",
        "--r-if",
        "1e-3",
        "--rel-xi-s",
        "0.015",
        "--raman-ratios",
        "1.24,1.17,1.41,1.54,1.31",
        "--mc-draws",
        "20000",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = Report::parse(&stdout(&o));
    let mean = value(&r, "mean_rel_eta_ut");
    assert!((mean - 0.04).abs() < 0.005, "{mean}");
    assert!(r.get("raman_ratio_1.24.mc_rel_eta_ut").is_some());
}
