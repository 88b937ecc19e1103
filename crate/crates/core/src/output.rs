//! Result files. Every CSV starts with a provenance comment
//!
//! ```text
//! # dbsim-scores v1 config_hash=<sha256> seed=<n>
//! ```
//!
//! and every image is rendered from the CSV text alone, so re-rendering a
//! CSV reproduces the image byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cable::Calibration;
use crate::error::{Error, Result};
use crate::scenario::{FiringRaster, ScoreTable};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Scores,
    Rasters,
    Vta,
    Series,
    Calibration,
    Solve,
}

impl Kind {
    pub fn tag(self) -> &'static str {
        match self {
            Kind::Scores => "dbsim-scores",
            Kind::Rasters => "dbsim-rasters",
            Kind::Vta => "dbsim-vta",
            Kind::Series => "dbsim-series",
            Kind::Calibration => "dbsim-calibration",
            Kind::Solve => "dbsim-solve",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        [Kind::Scores, Kind::Rasters, Kind::Vta, Kind::Series, Kind::Calibration, Kind::Solve]
            .into_iter()
            .find(|k| k.tag() == tag)
    }

    /// Image extension produced by [`render`], if any.
    pub fn image_extension(self) -> Option<&'static str> {
        match self {
            Kind::Scores => Some("pgm"),
            Kind::Rasters | Kind::Vta => Some("svg"),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub kind: Kind,
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(kind: Kind, config_hash: &str, seed: u64) -> Self {
        Self { kind, version: SCHEMA_VERSION, config_hash: config_hash.to_string(), seed }
    }

    pub fn line(&self) -> String {
        format!("# {} v{} config_hash={} seed={}\n", self.kind.tag(), self.version, self.config_hash, self.seed)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let first = text.lines().next().unwrap_or("");
        let bad = || Error::Format(format!("missing or malformed provenance line `{first}`"));
        let rest = first.strip_prefix("# ").ok_or_else(bad)?;
        let mut parts = rest.split_whitespace();
        let kind = parts.next().and_then(Kind::from_tag).ok_or_else(bad)?;
        let version = parts.next().and_then(|v| v.strip_prefix('v')).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        if version != SCHEMA_VERSION {
            return Err(Error::Format(format!("{} schema v{version} is not supported", kind.tag())));
        }
        let config_hash = parts.next().and_then(|h| h.strip_prefix("config_hash=")).ok_or_else(bad)?.to_string();
        let seed = parts.next().and_then(|s| s.strip_prefix("seed=")).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        Ok(Self { kind, version, config_hash, seed })
    }
}

fn to_csv<T: Serialize>(prov: &Provenance, rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(prov.line() + &String::from_utf8(body).expect("csv is utf-8"))
}

fn from_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn fixed(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub axis: String,
    pub axis_value: f64,
    pub amplitude_ma: f64,
    pub fired: usize,
    pub total: usize,
    pub score: String,
}

pub fn scores_csv(prov: &Provenance, table: &ScoreTable) -> Result<String> {
    let mut rows = Vec::new();
    for (i, &v) in table.axis.values().iter().enumerate() {
        for (j, &a) in table.amplitudes_ma.iter().enumerate() {
            let s = table.get(i, j);
            rows.push(ScoreRow {
                axis: table.axis.name().into(),
                axis_value: v,
                amplitude_ma: a,
                fired: s.fired,
                total: s.total,
                score: fixed(s.value()),
            });
        }
    }
    to_csv(prov, &rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterRow {
    pub raster: String,
    pub fiber: String,
    pub direction: String,
    pub program: String,
    pub amplitude_ma: f64,
    pub pulse_width_us: f64,
    pub frequency_hz: f64,
    pub n_pulses: usize,
    pub shift_index: usize,
    pub shift_ms: String,
    pub fired: u8,
}

/// Rasters with their labels, one row per phase shift.
pub fn rasters_csv(prov: &Provenance, rasters: &[(String, &FiringRaster)], n_pulses: usize) -> Result<String> {
    let mut rows = Vec::new();
    for (label, r) in rasters {
        for (k, (&t, &f)) in r.shifts_ms.iter().zip(&r.outcomes).enumerate() {
            rows.push(RasterRow {
                raster: label.clone(),
                fiber: r.fiber_id.clone(),
                direction: format!("{:?}", r.direction).to_lowercase(),
                program: r.program.to_string(),
                amplitude_ma: r.amplitude_ma,
                pulse_width_us: r.pulse_width_us,
                frequency_hz: r.frequency_hz,
                n_pulses,
                shift_index: k,
                shift_ms: fixed(t),
                fired: f as u8,
            });
        }
    }
    to_csv(prov, &rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub fiber: String,
    pub fired: usize,
    pub total: usize,
    pub score: String,
}

pub fn series_csv(prov: &Provenance, rasters: &[FiringRaster]) -> Result<String> {
    let rows: Vec<SeriesRow> = rasters
        .iter()
        .map(|r| {
            let s = r.score();
            SeriesRow { fiber: r.fiber_id.clone(), fired: s.fired, total: s.total, score: fixed(s.value()) }
        })
        .collect();
    to_csv(prov, &rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VtaRow {
    pub amplitude_ma: f64,
    pub threshold_v_per_m: f64,
    pub volume_mm3: String,
    pub tract: String,
    /// Empty when no tract is configured.
    pub overlap: String,
}

impl VtaRow {
    pub fn new(amplitude_ma: f64, threshold: f64, volume_mm3: f64, tract: &str, overlap: Option<f64>) -> Self {
        Self {
            amplitude_ma,
            threshold_v_per_m: threshold,
            volume_mm3: fixed(volume_mm3),
            tract: tract.to_string(),
            overlap: overlap.map(fixed).unwrap_or_default(),
        }
    }
}

pub fn vta_csv(prov: &Provenance, rows: &[VtaRow]) -> Result<String> {
    to_csv(prov, rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub threshold_na: f64,
    pub bracket_lo_na: f64,
    pub bracket_hi_na: f64,
    pub target_fraction: f64,
    pub amplitude_na: f64,
    pub evaluations: usize,
}

pub fn calibration_csv(prov: &Provenance, cal: &Calibration, target_fraction: f64) -> Result<String> {
    to_csv(
        prov,
        &[CalibrationRow {
            threshold_na: cal.threshold_na,
            bracket_lo_na: cal.bracket_na.0,
            bracket_hi_na: cal.bracket_na.1,
            target_fraction,
            amplitude_na: cal.input.amplitude_na,
            evaluations: cal.evaluations,
        }],
    )
}

/// Calibrated amplitude recorded in a calibration CSV.
pub fn read_calibration(text: &str) -> Result<CalibrationRow> {
    from_csv::<CalibrationRow>(text)?.into_iter().next().ok_or_else(|| Error::Format("empty calibration file".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRow {
    pub program: String,
    pub iterations: usize,
    pub relative_residual: String,
    pub file: String,
}

pub fn solve_csv(prov: &Provenance, rows: &[SolveRow]) -> Result<String> {
    to_csv(prov, rows)
}

pub fn read_solve_report(text: &str) -> Result<Vec<SolveRow>> {
    from_csv(text)
}

/// Pixels per heatmap cell.
pub const HEATMAP_CELL_PX: usize = 16;

/// Plain (P2) graymap with one block per cell: rows are axis values in file
/// order, columns amplitudes; score 0 is white and 1 black.
pub fn render_heatmap(csv_text: &str) -> Result<Vec<u8>> {
    let prov = Provenance::parse(csv_text)?;
    let rows: Vec<ScoreRow> = from_csv(csv_text)?;
    let mut axis_values: Vec<f64> = Vec::new();
    let mut amps: Vec<f64> = Vec::new();
    for r in &rows {
        if !axis_values.contains(&r.axis_value) {
            axis_values.push(r.axis_value);
        }
        if !amps.contains(&r.amplitude_ma) {
            amps.push(r.amplitude_ma);
        }
    }
    let cell = HEATMAP_CELL_PX;
    let (w, h) = (amps.len() * cell, axis_values.len() * cell);
    let mut gray = vec![255u8; w * h];
    for r in &rows {
        let i = axis_values.iter().position(|&v| v == r.axis_value).expect("seen");
        let j = amps.iter().position(|&a| a == r.amplitude_ma).expect("seen");
        let score = if r.total == 0 { 0.0 } else { r.fired as f64 / r.total as f64 };
        let level = (255.0 * (1.0 - score)).round() as u8;
        for y in i * cell..(i + 1) * cell {
            gray[y * w + j * cell..y * w + (j + 1) * cell].fill(level);
        }
    }
    let axis = rows.first().map(|r| r.axis.as_str()).unwrap_or("");
    let mut out = format!("P2\n# dbsim heatmap config_hash={} seed={}\n", prov.config_hash, prov.seed);
    let _ = writeln!(out, "# rows {axis} {:?}", axis_values);
    let _ = writeln!(out, "# columns amplitude_ma {:?}", amps);
    let _ = write!(out, "{w} {h}\n255\n");
    for y in 0..h {
        let line: Vec<String> = gray[y * w..(y + 1) * w].iter().map(u8::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out.into_bytes())
}

/// Read back a plain graymap: `(width, height, pixels)`.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Format("graymap is not text".into()))?;
    let mut tokens = text.lines().filter(|l| !l.starts_with('#')).flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(Error::Format("not a plain graymap".into()));
    }
    let mut num = || -> Result<usize> {
        tokens.next().and_then(|t| t.parse().ok()).ok_or_else(|| Error::Format("truncated graymap".into()))
    };
    let (w, h, _max) = (num()?, num()?, num()?);
    let px = (0..w * h).map(|_| num().map(|v| v as u8)).collect::<Result<Vec<_>>>()?;
    Ok((w, h, px))
}

fn svg_header(out: &mut String, w: f64, h: f64, prov: &Provenance, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, "<!-- dbsim config_hash={} seed={} -->", prov.config_hash, prov.seed);
    let _ = writeln!(out, r#"<rect width="{w:.0}" height="{h:.0}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="8" y="16" font-size="13">{}</text>"#, xml_escape(title));
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Binary rasters, one row each, on a time axis covering the pulse train;
/// dashed lines mark the pulse onsets.
pub fn render_rasters(csv_text: &str) -> Result<Vec<u8>> {
    let prov = Provenance::parse(csv_text)?;
    let rows: Vec<RasterRow> = from_csv(csv_text)?;
    let mut labels: Vec<String> = Vec::new();
    for r in &rows {
        if !labels.contains(&r.raster) {
            labels.push(r.raster.clone());
        }
    }
    let (label_w, row_h, px_per_ms, top) = (220.0, 18.0, 24.0, 40.0);
    // (period, pulses, cells) of each raster; frequency grids mix periods.
    let shapes: Vec<(f64, usize, usize)> = labels
        .iter()
        .map(|l| {
            let first = rows.iter().find(|r| &r.raster == l).expect("label from rows");
            (1e3 / first.frequency_hz, first.n_pulses, rows.iter().filter(|r| &r.raster == l).count())
        })
        .collect();
    let span = shapes.iter().map(|&(t, n, _)| t * n.max(1) as f64).fold(0.0, f64::max);
    let shared = shapes.windows(2).all(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1);
    let w = label_w + span * px_per_ms + 20.0;
    let h = top + row_h * labels.len() as f64 + 30.0;
    let mut out = String::new();
    svg_header(&mut out, w, h, &prov, "firing raster (black = fired)");
    let onset_line = |out: &mut String, x: f64, y1: f64, y2: f64| {
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{y1:.2}" x2="{x:.2}" y2="{y2:.2}" stroke="#c00" stroke-dasharray="4 3"/>"##
        );
    };
    for (i, label) in labels.iter().enumerate() {
        let y = top + row_h * i as f64;
        let (period, n_pulses, n_shifts) = shapes[i];
        let cell_w = period / n_shifts as f64 * px_per_ms;
        let _ = writeln!(out, r#"<text x="8" y="{:.2}">{}</text>"#, y + row_h * 0.7, xml_escape(label));
        for r in rows.iter().filter(|r| &r.raster == label) {
            let t: f64 = r.shift_ms.parse().map_err(|_| Error::Format(format!("bad shift `{}`", r.shift_ms)))?;
            let fill = if r.fired == 1 { "black" } else { "white" };
            let _ = writeln!(
                out,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}" stroke="#999" stroke-width="0.5"/>"##,
                label_w + t * px_per_ms,
                y + 2.0,
                cell_w,
                row_h - 4.0
            );
        }
        if !shared {
            for k in 0..n_pulses {
                onset_line(&mut out, label_w + k as f64 * period * px_per_ms, y, y + row_h);
            }
        }
    }
    let bottom = top + row_h * labels.len() as f64;
    if let (true, Some(&(period, n_pulses, _))) = (shared, shapes.first()) {
        for k in 0..n_pulses {
            onset_line(&mut out, label_w + k as f64 * period * px_per_ms, top - 6.0, bottom + 4.0);
        }
    }
    let _ = writeln!(out, r#"<text x="{label_w:.2}" y="{:.2}">0 ms</text>"#, bottom + 20.0);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{} ms</text>"#,
        label_w + span * px_per_ms,
        bottom + 20.0,
        fixed(span)
    );
    out.push_str("</svg>\n");
    Ok(out.into_bytes())
}

/// VTA volume and per-tract overlap against amplitude.
pub fn render_vta(csv_text: &str) -> Result<Vec<u8>> {
    let prov = Provenance::parse(csv_text)?;
    let rows: Vec<VtaRow> = from_csv(csv_text)?;
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Format(format!("bad number `{s}`"))) };
    let mut volume: Vec<(f64, f64)> = Vec::new();
    let mut tracts: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in &rows {
        if !volume.iter().any(|&(a, _)| a == r.amplitude_ma) {
            volume.push((r.amplitude_ma, num(&r.volume_mm3)?));
        }
        if !r.overlap.is_empty() {
            let v = num(&r.overlap)?;
            match tracts.iter_mut().find(|(n, _)| n == &r.tract) {
                Some((_, pts)) => pts.push((r.amplitude_ma, v)),
                None => tracts.push((r.tract.clone(), vec![(r.amplitude_ma, v)])),
            }
        }
    }
    let a_max = volume.iter().map(|p| p.0).fold(0.0, f64::max).max(1e-9);
    let v_max = volume.iter().map(|p| p.1).fold(0.0, f64::max).max(1e-9);
    let (pw, ph, left, top) = (320.0, 220.0, 60.0, 40.0);
    let mut out = String::new();
    svg_header(&mut out, 2.0 * (pw + left) + 20.0, ph + top + 50.0, &prov, "VTA volume and tract overlap");
    let panel = |out: &mut String, x0: f64, y_label: &str, y_max: f64, series: &[(String, Vec<(f64, f64)>)]| {
        let _ = writeln!(
            out,
            r#"<rect x="{x0:.2}" y="{top:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">amplitude (mA), max {}</text>"#,
            x0 + pw / 2.0,
            top + ph + 30.0,
            fixed(a_max)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{} (max {})</text>"#,
            x0,
            top - 6.0,
            xml_escape(y_label),
            fixed(y_max)
        );
        let shades = ["black", "#555", "#999", "#bbb"];
        for (i, (name, pts)) in series.iter().enumerate() {
            let coords: Vec<String> = pts
                .iter()
                .map(|&(a, v)| format!("{:.2},{:.2}", x0 + a / a_max * pw, top + ph - v / y_max * ph))
                .collect();
            let color = shades[i % shades.len()];
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                coords.join(" ")
            );
            if !name.is_empty() {
                let _ = writeln!(
                    out,
                    r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
                    x0 + 6.0,
                    top + 14.0 + 13.0 * i as f64,
                    xml_escape(name)
                );
            }
        }
    };
    panel(&mut out, left, "volume (mm³)", v_max, &[(String::new(), volume.clone())]);
    panel(&mut out, 2.0 * left + pw, "overlap fraction", 1.0, &tracts);
    out.push_str("</svg>\n");
    Ok(out.into_bytes())
}

/// Render the image belonging to a CSV, dispatching on its provenance.
pub fn render(csv_text: &str) -> Result<Option<Vec<u8>>> {
    match Provenance::parse(csv_text)?.kind {
        Kind::Scores => render_heatmap(csv_text).map(Some),
        Kind::Rasters => render_rasters(csv_text).map(Some),
        Kind::Vta => render_vta(csv_text).map(Some),
        _ => Ok(None),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Render `csv_path` next to itself; returns the image path if the kind has
/// an image.
pub fn render_file(csv_path: &Path) -> Result<Option<PathBuf>> {
    let text =
        std::fs::read_to_string(csv_path).map_err(|e| Error::io(format!("reading {}", csv_path.display()), e))?;
    let prov = Provenance::parse(&text)?;
    let (Some(ext), Some(bytes)) = (prov.kind.image_extension(), render(&text)?) else {
        return Ok(None);
    };
    let out = csv_path.with_extension(ext);
    std::fs::write(&out, bytes).map_err(|e| Error::io(format!("writing {}", out.display()), e))?;
    Ok(Some(out))
}

/// Write a CSV and, where the kind has one, its rendered image.
pub fn write_csv_and_image(path: &Path, text: &str) -> Result<Option<PathBuf>> {
    write_text(path, text)?;
    render_file(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::TrafficDirection;
    use crate::scenario::{FiringScore, SweepAxis};

    fn prov(kind: Kind) -> Provenance {
        Provenance::new(kind, "abc123", 7)
    }

    #[test]
    fn provenance_roundtrip() {
        let p = prov(Kind::Scores);
        assert_eq!(Provenance::parse(&p.line()).unwrap(), p);
        assert!(Provenance::parse("time,mv\n").is_err());
        assert!(Provenance::parse("# dbsim-scores v2 config_hash=x seed=1\n").is_err());
    }

    fn table(scores: &[(usize, usize)]) -> ScoreTable {
        ScoreTable {
            axis: SweepAxis::PulseWidthUs(vec![60.0, 90.0]),
            amplitudes_ma: vec![0.0, 1.0, 2.0],
            scores: scores.iter().map(|&(fired, total)| FiringScore { fired, total }).collect(),
        }
    }

    #[test]
    fn heatmap_maps_score_to_gray_monotonically() {
        let t = table(&[(0, 15), (5, 15), (15, 15), (0, 15), (10, 15), (15, 15)]);
        let csv = scores_csv(&prov(Kind::Scores), &t).unwrap();
        let (w, h, px) = parse_pgm(&render_heatmap(&csv).unwrap()).unwrap();
        assert_eq!((w, h), (3 * HEATMAP_CELL_PX, 2 * HEATMAP_CELL_PX));
        let at = |i: usize, j: usize| px[(i * HEATMAP_CELL_PX) * w + j * HEATMAP_CELL_PX];
        assert_eq!(at(0, 0), 255);
        assert_eq!(at(0, 2), 0);
        assert!(at(0, 1) > at(1, 1) && at(1, 1) > at(1, 2));
    }

    #[test]
    fn single_cell_grid() {
        let t = ScoreTable {
            axis: SweepAxis::FrequencyHz(vec![140.0]),
            amplitudes_ma: vec![3.0],
            scores: vec![FiringScore { fired: 6, total: 15 }],
        };
        let csv = scores_csv(&prov(Kind::Scores), &t).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().ends_with(",6,15,0.4"));
        let (w, h, _) = parse_pgm(&render_heatmap(&csv).unwrap()).unwrap();
        assert_eq!((w, h), (HEATMAP_CELL_PX, HEATMAP_CELL_PX));
    }

    #[test]
    fn raster_svg_has_cells_and_onset_markers() {
        let r = FiringRaster {
            fiber_id: "f".into(),
            direction: TrafficDirection::Forward,
            program: "C3-,C4+".parse().unwrap(),
            amplitude_ma: 3.0,
            pulse_width_us: 90.0,
            frequency_hz: 140.0,
            seed: 1,
            shifts_ms: (0..15).map(|k| k as f64 * 1e3 / 140.0 / 15.0).collect(),
            outcomes: (0..15).map(|k| k % 3 == 0).collect(),
        };
        let csv = rasters_csv(&prov(Kind::Rasters), &[("a".into(), &r)], 4).unwrap();
        let svg = String::from_utf8(render_rasters(&csv).unwrap()).unwrap();
        assert_eq!(svg.matches("<rect x=").count(), 15);
        assert_eq!(svg.matches("fill=\"black\" stroke").count(), 5);
        assert_eq!(svg.matches("stroke-dasharray").count(), 4);
        assert_eq!(render_rasters(&csv).unwrap(), svg.into_bytes());
    }

    #[test]
    fn vta_svg_renders_and_number_format_is_stable() {
        let rows = vec![VtaRow::new(0.0, 150.0, 0.0, "a", Some(0.0)), VtaRow::new(1.0, 150.0, 12.5, "a", Some(0.25))];
        let csv = vta_csv(&prov(Kind::Vta), &rows).unwrap();
        assert!(csv.contains("1.0,150.0,12.5,a,0.25"));
        let svg = String::from_utf8(render_vta(&csv).unwrap()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(fixed(-0.0), "0");
        assert_eq!(fixed(8.0 / 15.0), "0.533333");
    }
}
