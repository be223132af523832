//! End-to-end runs of the `ghostsnr` binary.

use std::path::Path;
use std::process::{Command, Output};

use ghostsnr::protocols::{snr, ProtocolKind};
use ghostsnr::{ExperimentParams, SourceKind};

fn ghostsnr(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghostsnr"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run ghostsnr")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn table(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn sweep_rows_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&ghostsnr(
        &[
            "sweep",
            "--axis",
            "resolution",
            "--values",
            "4,16",
            "--protocols",
            "Cov,Var",
            "--sources",
            "thermal",
        ],
        dir.path(),
    ));
    assert!(out.starts_with("# tool=ghostsnr "));
    let rows = table(&out);
    let header = &rows[0];
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    assert_eq!(rows.len(), 5);
    for row in &rows[1..] {
        let r: u64 = row[col("resolution_cells")].parse().unwrap();
        let kind: ProtocolKind = row[col("protocol")].parse().unwrap();
        let p = ExperimentParams::new(SourceKind::Thermal, 1.0, 1, 1.0, r, 1000).unwrap();
        let want = snr(kind, &p).unwrap().snr_per_sqrt_frame;
        let got: f64 = row[col("analytic_snr_per_sqrt_frame")].parse().unwrap();
        assert_eq!(got, want);
        assert!(row[col("mc_snr_per_sqrt_frame")].is_empty());
    }
}

#[test]
fn config_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "seed = 3\nmode = \"mc\"\nreplicas = 2\n[experiment]\nmu = 0.5\nmodes_per_pixel = 2\neta = 0.9\nframes = 300\n\
         [sweep]\naxis = \"resolution\"\nvalues = [3]\n",
    )
    .unwrap();
    let out = stdout(&ghostsnr(
        &["sweep", "--config", "c.toml", "--seed", "8", "--frames", "200"],
        dir.path(),
    ));
    assert!(out.contains("# seed=8"));
    let rows = table(&out);
    assert_eq!(rows.len(), 5);
    let frames = rows[0].iter().position(|h| h == "frames").unwrap();
    let mc = rows[0].iter().position(|h| h == "mc_replicas").unwrap();
    assert!(rows[1..].iter().all(|r| r[frames] == "200" && r[mc] == "2"));
}

#[test]
fn figure_presets() {
    let dir = tempfile::tempdir().unwrap();
    let rows = table(&stdout(&ghostsnr(&["figure", "fig2"], dir.path())));
    // 57 illumination values x 4 protocols x 2 sources
    assert_eq!(rows.len(), 1 + 57 * 8);
    let rows = table(&stdout(&ghostsnr(&["figure", "fig4", "--out", "f.csv"], dir.path())));
    assert!(rows.is_empty());
    assert!(std::fs::read_to_string(dir.path().join("f.csv"))
        .unwrap()
        .contains("M=1000"));
}

#[test]
fn simulate_then_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "[experiment]\nmu = 1.0\nmodes_per_pixel = 2\neta = 0.8\n[mask]\nwidth = 6\nheight = 6\nx0 = 0\ny0 = 0\nblock_width = 3\nblock_height = 3\n",
    )
    .unwrap();
    let o = ghostsnr(
        &[
            "simulate", "--config", "c.toml", "--frames", "500", "--seed", "5", "--out", "s.bin", "--csv", "s.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 500 * 36);

    let out = stdout(&ghostsnr(
        &["reconstruct", "s.bin", "--images", "img.csv", "--normalize", "blocked"],
        dir.path(),
    ));
    assert!(out.contains("# normalized=true"));
    let rows = table(&out);
    assert_eq!(rows.len(), 5);
    let snr_col = rows[0].iter().position(|h| h == "snr").unwrap();
    for row in &rows[1..] {
        assert!(row[snr_col].parse::<f64>().unwrap() > 1.0, "{row:?}");
    }
    let images = std::fs::read_to_string(dir.path().join("img.csv")).unwrap();
    assert_eq!(images.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4 * 36);
}

#[test]
fn simulate_needs_an_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = ghostsnr(&["simulate", "--frames", "10"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--out"));
}

#[test]
fn bad_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!ghostsnr(&["sweep", "--values", "2,1"], dir.path()).status.success());
    std::fs::write(dir.path().join("x.bin"), b"not a stack").unwrap();
    assert!(!ghostsnr(&["reconstruct", "x.bin"], dir.path()).status.success());
}

#[test]
fn validate_reports_json_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = ghostsnr(&["validate", "--suite", "table1", "--suite", "asymptotics"], dir.path());
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["suites"].as_array().unwrap().len(), 2);

    // the asymptotic exponents do not hold at moderate illumination
    let o = ghostsnr(
        &["validate", "--suite", "asymptotics", "--window", "1e-3,1e-2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], false);
    assert!(report["suites"][0]["checks"][0]["deviation"].is_number());
}
