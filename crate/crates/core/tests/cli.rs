use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dbsim::output::{parse_pgm, render};
use tempfile::TempDir;

/// 40³ phantom, fixed input amplitude, one-cell grid.
const SMALL: &str = r#"
[volume]
dims = 40

[input]
amplitude_na = 0.1665

[vta]
amplitudes_ma = [0.0, 1.0, 2.0, 3.0, 4.0]

[sweep]
amplitudes_ma = [3.0]
pulse_widths_us = [90.0]
series = [0]
"#;

struct Run {
    dir: TempDir,
}

impl Run {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.toml"), config).unwrap();
        Self { dir }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn dbsim(&self, args: &[&str]) -> Output {
        let cfg = self.dir.path().join("run.toml");
        let out = self.out();
        Command::new(env!("CARGO_BIN_EXE_dbsim"))
            .args(["--config", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()])
            .args(args)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) {
        let o = self.dbsim(args);
        assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.out().join(name)).unwrap()
    }
}

fn data_lines(csv: &str) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(csv.as_bytes());
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn bytes(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn missing_volume_file_is_an_input_error() {
    let run = Run::new("[volume]\npath = \"nowhere.dbv\"\n");
    let o = run.dbsim(&["solve-field"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("file not found"));
}

#[test]
fn bad_config_and_flags_are_input_errors() {
    let run = Run::new("[stimulus]\namplitude = 3.0\n");
    assert_eq!(run.dbsim(&["solve-field"]).status.code(), Some(2));
    let run = Run::new(SMALL);
    assert_eq!(run.dbsim(&["--jobs", "0", "calibrate"]).status.code(), Some(2));
    assert_eq!(run.dbsim(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn solver_failure_is_a_numerical_error() {
    let run = Run::new("[volume]\ndims = 40\n[solver]\nmax_iterations = 3\n");
    let o = run.dbsim(&["solve-field"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("did not converge"));
}

#[test]
fn solve_reports_residual_and_is_byte_reproducible() {
    let run = Run::new(SMALL);
    run.ok(&["solve-field"]);
    let rows = data_lines(&run.read("solve.csv"));
    // stimulus program plus C3-,C4-; C3+,C4- reuses the reversed solution
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let residual: f64 = r[2].parse().unwrap();
        assert!(residual <= 1e-8, "{residual}");
    }
    let field = run.out().join("field-C3m_C4p.dbf");
    let first = bytes(&field);
    let volume = bytes(&run.out().join("volume.dbv"));
    run.ok(&["solve-field"]);
    assert_eq!(bytes(&field), first);
    assert_eq!(bytes(&run.out().join("volume.dbv")), volume);
    let prov: serde_json::Value = serde_json::from_str(&run.read("provenance-solve-field.json")).unwrap();
    assert_eq!(prov["solves"].as_array().unwrap().len(), 2);
}

#[test]
fn vta_needs_a_solved_field() {
    let run = Run::new(SMALL);
    let o = run.dbsim(&["vta"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("solve-field"));
}

#[test]
fn vta_rows_per_amplitude_and_tract() {
    let run = Run::new(SMALL);
    run.ok(&["solve-field"]);
    run.ok(&["vta", "--threshold", "150", "--amplitudes", "0,1,2,3,4"]);
    let csv = run.read("vta.csv");
    assert!(csv.starts_with("# dbsim-vta v1 config_hash="));
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 5 * 4);
    let mut last = -1.0;
    for r in rows.iter().step_by(4) {
        let v: f64 = r[2].parse().unwrap();
        assert!(v >= last);
        last = v;
    }
    assert_eq!(rows[0][2], "0");
    assert!(last > 0.0);
    for r in &rows {
        let o: f64 = r[4].parse().unwrap();
        assert!((0.0..=1.0).contains(&o));
    }
    assert!(run.out().join("vta.svg").exists());
}

#[test]
fn one_cell_sweep_and_render_roundtrip() {
    let run = Run::new(SMALL);
    run.ok(&["solve-field"]);
    run.ok(&["--jobs", "1", "sweep"]);
    let csv = run.read("scores-pulse-width.csv");
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][4], "15");
    let pgm = run.out().join("scores-pulse-width.pgm");
    let (w, h, px) = parse_pgm(&bytes(&pgm)).unwrap();
    assert_eq!((w, h), (16, 16));
    let fired: usize = rows[0][3].parse().unwrap();
    assert_eq!(px[0], (255.0 * (1.0 - fired as f64 / 15.0)).round() as u8);

    // re-rendering from the CSV alone reproduces every image
    let images: Vec<(PathBuf, Vec<u8>)> = ["scores-pulse-width.pgm", "rasters-pulse-width.svg", "rasters-series.svg"]
        .iter()
        .map(|n| (run.out().join(n), bytes(&run.out().join(n))))
        .collect();
    for (p, _) in &images {
        std::fs::remove_file(p).unwrap();
    }
    let csvs: Vec<String> = images.iter().map(|(p, _)| p.with_extension("csv").to_str().unwrap().to_string()).collect();
    let mut args = vec!["render"];
    args.extend(csvs.iter().map(String::as_str));
    run.ok(&args);
    for (p, b) in &images {
        assert_eq!(&bytes(p), b, "{}", p.display());
        assert_eq!(&render(&std::fs::read_to_string(p.with_extension("csv")).unwrap()).unwrap().unwrap(), b);
    }
}

#[test]
fn polarity_panel_has_twelve_labelled_rasters_and_reruns_identically() {
    let run = Run::new(SMALL);
    run.ok(&["solve-field"]);
    run.ok(&["polarity"]);
    let csv = run.read("polarity.csv");
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 12 * 15);
    let header = csv.lines().nth(1).unwrap();
    assert!(header.starts_with("raster,fiber,direction,program,"));
    let mut rasters: Vec<(&str, &str, &str)> =
        rows.iter().map(|r| (r[1].as_str(), r[2].as_str(), r[3].as_str())).collect();
    rasters.dedup();
    assert_eq!(rasters.len(), 12);
    for chunk in rows.chunks(15) {
        let idx: Vec<usize> = chunk.iter().map(|r| r[8].parse().unwrap()).collect();
        assert_eq!(idx, (0..15).collect::<Vec<_>>());
    }
    let svg = bytes(&run.out().join("polarity.svg"));
    run.ok(&["polarity"]);
    assert_eq!(run.read("polarity.csv"), csv);
    assert_eq!(bytes(&run.out().join("polarity.svg")), svg);
}

#[test]
fn seed_flag_and_config_hash_reach_every_artifact() {
    let run = Run::new(SMALL);
    run.ok(&["--seed", "42", "calibrate"]);
    let csv = run.read("calibration.csv");
    assert!(csv.lines().next().unwrap().ends_with("seed=42"));
    let prov: serde_json::Value = serde_json::from_str(&run.read("provenance-calibrate.json")).unwrap();
    assert!(csv.contains(prov["config_hash"].as_str().unwrap()));
    let rows = data_lines(&csv);
    let threshold: f64 = rows[0][0].parse().unwrap();
    assert!((0.1..0.3).contains(&threshold), "{threshold}");
}
