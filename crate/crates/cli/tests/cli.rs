use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use shubin_lab::config::{ErrorKind, ExperimentConfig};
use shubin_lab::runner::{run, MANIFEST};

const SPECTRUM: &str = "kind = spectrum\n[operator]\nk = 1\nm = 1\nn = 64\n";

const SWEEP: &str = "kind = constant_sweep
seed = 3
[operator]
k = 2
m = 2
n = 128
[region]
name = omega_zero
[grid]
lambda = reliable log 24
";

const CONTROL: &str = "kind = control
seed = 4
[operator]
k = 2
m = 2
n = 96
[region]
name = omega_zero
[control]
horizon = 0.5
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shubin-lab"))
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_text(text).unwrap()
}

fn csv_column(path: &Path, col: usize) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn harmonic_spectrum_is_odd_integers() {
    let dir = tempfile::tempdir().unwrap();
    run(&config(SPECTRUM), dir.path()).unwrap();
    let lambdas = csv_column(&dir.path().join("spectrum.csv"), 1);
    assert_eq!(lambdas.len(), 32);
    for (n, l) in lambdas.iter().enumerate() {
        assert!((l - (2 * n + 1) as f64).abs() < 1e-9, "lambda_{n} = {l}");
    }
}

#[test]
fn sweep_constants_are_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&config(SWEEP), dir.path()).unwrap();
    let c = csv_column(&dir.path().join("constants.csv"), 1);
    assert!(c.len() >= 8);
    assert!(c.windows(2).all(|w| w[1] >= w[0]), "{c:?}");
    assert!(out.verdicts.contains_key("exponent_bound"));
}

#[test]
fn reruns_are_bitwise_identical() {
    for text in [SWEEP, CONTROL] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let first = run(&config(text), a.path()).unwrap();
        let second = run(&config(text), b.path()).unwrap();
        assert_eq!(first.manifest["files"], second.manifest["files"]);
        for name in &first.files {
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
        }
    }
}

#[test]
fn seed_changes_the_initial_state() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&config(CONTROL), a.path()).unwrap();
    let mut other = config(CONTROL);
    other.seed = 5;
    run(&other, b.path()).unwrap();
    assert_ne!(
        fs::read(a.path().join("trajectory.csv")).unwrap(),
        fs::read(b.path().join("trajectory.csv")).unwrap()
    );
}

#[test]
fn manifest_lists_every_artefact() {
    let dir = tempfile::tempdir().unwrap();
    run(&config(CONTROL), dir.path()).unwrap();
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
    for key in ["config", "version", "seed", "reliability_index", "wall_time_s", "verdicts", "files"] {
        assert!(manifest.get(key).is_some(), "missing {key}");
    }
    let files = manifest["files"].as_object().unwrap();
    let mut on_disk: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != MANIFEST)
        .collect();
    on_disk.sort();
    assert_eq!(files.keys().cloned().collect::<Vec<_>>(), on_disk);
    for (name, entry) in files {
        let bytes = fs::read(dir.path().join(name)).unwrap();
        assert_eq!(entry["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(entry["sha256"].as_str().unwrap().len(), 64);
    }
    let schedule: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("schedule.json")).unwrap()).unwrap();
    assert!(schedule["phases"].as_array().is_some_and(|p| !p.is_empty()));
    assert_eq!(manifest["verdicts"]["null_control"], "PASS");
}

#[test]
fn validation_reports_named_fields() {
    let cases = [
        ("kind = spectrum\n[operator]\nk = 0\nm = 1\n", "operator.k", ErrorKind::Range),
        ("kind = thickness\n[region]\nname = omega_delta\ndelta = 1.5\n", "region.delta", ErrorKind::Range),
        ("[operator]\nk = 1\nm = 1\n", "kind", ErrorKind::Missing),
        ("kind = spectrum\n[operator]\nk = 1\nm = 1\nn = 4\n", "operator.n", ErrorKind::Range),
        ("kind = constant_sweep\n[operator]\nk = 1\nm = 1\n[region]\nname = cone\ntheta = 0.5\n", "region.name", ErrorKind::Range),
        ("kind = spectrum\n[operator]\nk = 1\nm = 1\ncolour = red\n", "operator.colour", ErrorKind::UnknownKey),
    ];
    for (text, field, kind) in cases {
        let errors = ExperimentConfig::from_text(text).unwrap_err();
        assert!(
            errors.iter().any(|e| e.field == field && e.kind == kind),
            "{field}: {errors:?}"
        );
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    };
    let good = write("good.cfg", SPECTRUM);
    let bad = write("bad.cfg", "kind = spectrum\n[operator]\nk = 0\nm = 1\n");
    // control set far outside the quadrature window of an 8-mode basis
    let numerical = write(
        "num.cfg",
        "kind = control\n[operator]\nk = 1\nm = 1\nn = 8\n[region]\nname = interval\na = 40\nb = 41\n[control]\nhorizon = 1\nmethod = hum\nn_c = 4\n",
    );

    let status = |args: &[&std::ffi::OsStr]| bin().args(args).output().unwrap();
    let out = dir.path().join("out");
    let ok = status(&["run".as_ref(), good.as_os_str(), "--out".as_ref(), out.as_os_str()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(out.join(MANIFEST).exists());

    let usage = status(&["validate".as_ref(), bad.as_os_str()]);
    assert_eq!(usage.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&usage.stderr).contains("operator.k"));

    let valid = status(&["validate".as_ref(), good.as_os_str()]);
    assert_eq!(valid.status.code(), Some(0));

    let missing = status(&["run".as_ref(), dir.path().join("nope.cfg").as_os_str()]);
    assert_eq!(missing.status.code(), Some(2));

    let num = status(&["run".as_ref(), numerical.as_os_str(), "--out".as_ref(), dir.path().join("n").as_os_str()]);
    assert_eq!(num.status.code(), Some(3), "{}", String::from_utf8_lossy(&num.stderr));
    assert!(String::from_utf8_lossy(&num.stderr).contains("control-synth"));

    let list = status(&["list-experiments".as_ref()]);
    assert_eq!(list.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&list.stdout).lines().count(), 7);
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    fs::write(&cfg, SPECTRUM).unwrap();
    let out = bin()
        .args(["run".as_ref(), cfg.as_os_str(), "--out".as_ref(), dir.path().join("o").as_os_str()])
        .env("SHUBIN_LAB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let zero = bin()
        .args(["run".as_ref(), cfg.as_os_str(), "--threads".as_ref(), "0".as_ref()])
        .output()
        .unwrap();
    assert_eq!(zero.status.code(), Some(2));
}
