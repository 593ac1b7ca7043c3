use std::fs;
use std::process::Command;

use qtherm::experiments::{run, Experiment, Grid, Params, Probe};
use qtherm::parallel;

fn qtherm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qtherm")).args(args).output().expect("spawn qtherm")
}

#[test]
fn steady_qsnr_outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = qtherm(&["steady_qsnr", "--quiet", "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv_a = fs::read(a.path().join("steady_qsnr.csv")).unwrap();
    let csv_b = fs::read(b.path().join("steady_qsnr.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    assert!(a.path().join("steady_qsnr.gp").exists());

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("steady_qsnr.summary.json")).unwrap()).unwrap();
    for key in ["version", "params", "results", "optima", "violations", "workers", "wall_time_s"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(json["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn csv_values_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = qtherm(&["qfi_point", "--quiet", "--out", dir.path().to_str().unwrap(), "--param", "t=12.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = Params { t: 12.5, ..Params::defaults(Experiment::QfiPoint) };
    let direct = run(Experiment::QfiPoint, &p).unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join("qfi_point.csv")).unwrap();
    let row = rdr.records().next().unwrap().unwrap();
    for (field, want) in row.iter().zip(&direct.rows[0]) {
        let got: f64 = field.parse().unwrap();
        assert!(got == *want || (got.is_nan() && want.is_nan()));
    }
}

#[test]
fn config_file_and_flags_layer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[theta_scan]\ntemperature = 0.5\nkappa = 0.7\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = qtherm(&[
        "theta_scan",
        "--quiet",
        "--config",
        cfg.to_str().unwrap(),
        "--param",
        "kappa=0.9",
        "--param",
        "t_max=5",
        "--param",
        "n_points=11",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("theta_scan.summary.json")).unwrap()).unwrap();
    assert_eq!(json["params"]["temperature"].as_f64(), Some(0.5));
    assert_eq!(json["params"]["kappa"].as_f64(), Some(0.9));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(qtherm(&["theta_scan", "--out", d, "--param", "temperature=-1"]).status.code(), Some(4));
    assert_eq!(qtherm(&["theta_scan", "--out", d, "--param", "bogus=1"]).status.code(), Some(4));
    assert_eq!(qtherm(&["validate", "kappa_sweep"]).status.code(), Some(0));
    assert_eq!(qtherm(&["selftest", "--quiet"]).status.code(), Some(0));
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[theta_scan\n").unwrap();
    assert_eq!(qtherm(&["theta_scan", "--config", cfg.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn parallel_and_serial_sweeps_agree_bitwise() {
    let p = Params::defaults(Experiment::KappaSweep);
    let grid = Grid::Uniform { t_max: 200.0, n_points: 201 };
    let work = |&kappa: &f64| {
        let probe = Probe::for_model(p.ancilla_model(kappa, p.theta).unwrap());
        probe.records(&grid).unwrap().iter().map(|r| (r.qfi, r.cfi)).collect::<Vec<_>>()
    };
    let kappas = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
    let par = parallel::map(&kappas, work);
    let ser = parallel::map_serial(&kappas, work);
    for (a, b) in par.iter().zip(&ser) {
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.0.to_bits(), y.0.to_bits());
            assert_eq!(x.1.to_bits(), y.1.to_bits());
        }
    }
}
