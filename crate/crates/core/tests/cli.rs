use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_matterwave"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env_remove("MATTERWAVE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn quantity(s: &Value, name: &str) -> f64 {
    s["quantities"][name]["si"]
        .as_f64()
        .unwrap_or_else(|| panic!("{name} missing"))
}

/// Parses an envelope dump into `(xi, psi_re, psi_im)`.
fn read_dump(path: &Path) -> Vec<(f64, f64, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("xi,re_psi,im_psi,abs2"));
    lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(v.len(), 4);
            assert!((v[1] * v[1] + v[2] * v[2] - v[3]).abs() <= 1e-12 * v[3].max(1e-300));
            (v[0], v[1], v[2])
        })
        .collect()
}

fn moments(d: &[(f64, f64, f64)]) -> (f64, f64) {
    let dx = d[1].0 - d[0].0;
    let p: Vec<f64> = d.iter().map(|(_, r, i)| r * r + i * i).collect();
    let m0: f64 = p.iter().sum::<f64>() * dx;
    let mean = d.iter().zip(&p).map(|((x, _, _), w)| x * w).sum::<f64>() * dx / m0;
    let var = d
        .iter()
        .zip(&p)
        .map(|((x, _, _), w)| (x - mean).powi(2) * w)
        .sum::<f64>()
        * dx
        / m0;
    (mean, var)
}

#[test]
fn check_accepts_shipped_scenarios() {
    for entry in std::fs::read_dir(scenario("")).unwrap() {
        let path = entry.unwrap().path();
        let out = run(&["check", path.to_str().unwrap()]);
        assert!(
            out.status.success(),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = write_config(tmp.path(), "");
    let out = run(&["check", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing required field: particle"));

    let base = std::fs::read_to_string(scenario("electron_lens.toml")).unwrap();
    let conflict = write_config(
        tmp.path(),
        &base.replace("\nn = 10\n", "\nn = 10\nv_p = \"0.2 c\"\n"),
    );
    let out = run(&["check", conflict.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("conflict"));

    let out = run(&["run", tmp.path().join("nope.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));

    // tau = 10 on this grid puts a phase step above pi between k samples.
    let coarse = write_config(
        tmp.path(),
        r#"
[particle]
units = "natural"
charge = -1
c_light = 100
[carrier]
k0 = 1
[grid]
n_points = 1024
xi_span = 64
[input]
kind = "gaussian"
sigma = 1
[experiment]
kind = "disperse"
tau = 10
"#,
    );
    let out_dir = tmp.path().join("coarse");
    let out = run(&[
        "run",
        coarse.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // Output directory below a regular file cannot be created.
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = run(&[
        "run",
        scenario("electron_lens.toml").to_str().unwrap(),
        "--out-dir",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn lens_summary_reports_f_number() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        scenario("electron_lens.toml").to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert!(out.status.success());
    let s = summary(tmp.path());
    let f = quantity(&s, "lens.f_number");
    assert_eq!(format!("{f:.2}"), "5.11");
    assert_eq!(s["experiment"], "lens");
    let v = s["provenance"]["carrier.v_group"]["si"].as_f64().unwrap();
    assert!((v - 0.1 * 299_792_458.0).abs() < 1e-3);
}

#[test]
fn zero_dispersion_dump_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("disperse_gaussian.toml"))
        .unwrap()
        .replace("distance = \"1 cm\"", "tau = 0");
    let cfg = write_config(tmp.path(), &text);
    let dir = tmp.path().join("out");
    assert!(run(&[
        "run",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap()
    ])
    .status
    .success());
    let a = std::fs::read(dir.join("input.csv")).unwrap();
    let b = std::fs::read(dir.join("output.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn image_summary_is_recomputable_from_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        scenario("electron_image_m2.toml").to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let s = summary(tmp.path());
    let fid = quantity(&s, "image.fidelity");
    assert!(fid >= 0.999);

    let input = read_dump(&tmp.path().join("input.csv"));
    let output = read_dump(&tmp.path().join("output.csv"));
    let ideal = read_dump(&tmp.path().join("ideal.csv"));
    let dx = input[1].0 - input[0].0;
    let (mut re, mut im, mut na, mut nb) = (0.0, 0.0, 0.0, 0.0);
    for (o, i) in output.iter().zip(&ideal) {
        // conj(o) * i
        re += o.1 * i.1 + o.2 * i.2;
        im += o.1 * i.2 - o.2 * i.1;
        na += o.1 * o.1 + o.2 * o.2;
        nb += i.1 * i.1 + i.2 * i.2;
    }
    let recomputed = ((re * re + im * im) * dx * dx / (na * dx * nb * dx)).min(1.0);
    assert!((recomputed - fid).abs() < 1e-9, "{recomputed} vs {fid}");

    let (_, var_in) = moments(&input);
    let (_, var_out) = moments(&output);
    let mag = (var_out / var_in).sqrt();
    assert!((mag - quantity(&s, "image.estimated_magnitude")).abs() < 1e-9);
    assert!((quantity(&s, "output.rms_width") - var_out.sqrt()).abs() < 1e-9 * var_out.sqrt());
    assert!((quantity(&s, "image.estimated_magnification") + 2.0).abs() < 0.04);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let out = run(&[
            "run",
            scenario("natural_resolution.toml").to_str().unwrap(),
            "--out-dir",
            d.to_str().unwrap(),
            "--quiet",
        ]);
        assert!(out.status.success());
    }
    for f in ["summary.json", "input.csv", "probe.csv", "image.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn format_flag_limits_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        scenario("electron_lens.toml").to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    assert!(tmp.path().join("summary.json").exists());
    assert!(!tmp.path().join("input.csv").exists());
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "sweep",
        scenario("electron_lens.toml").to_str().unwrap(),
        "--param",
        "lens.e0",
        "--values",
        "1e5 V/m,2e5 V/m",
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let f1 = quantity(
        &summary(&tmp.path().join("lens.e0=1e5_V_m")),
        "lens.f_number",
    );
    let f2 = quantity(
        &summary(&tmp.path().join("lens.e0=2e5_V_m")),
        "lens.f_number",
    );
    assert!((f1 / f2 - 2.0).abs() < 1e-12);
}

#[test]
fn env_var_overrides_config_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "run",
            scenario("electron_lens.toml").to_str().unwrap(),
            "--quiet",
        ])
        .env("MATTERWAVE_OUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("summary.json").exists());
}
