//! Fiber polylines: arc-length resampling, tract files and synthetic tracts.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lead::LeadModel;
use crate::volume::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum TrafficDirection {
    /// Traffic enters at the first stored point.
    #[default]
    Forward,
    /// Traffic enters at the last stored point.
    Flipped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiberPath {
    pub id: String,
    pub points: Vec<Vec3>,
    pub direction: TrafficDirection,
}

impl FiberPath {
    pub fn new(id: impl Into<String>, points: Vec<Vec3>) -> Self {
        Self { id: id.into(), points, direction: TrafficDirection::Forward }
    }

    pub fn flipped(&self) -> Self {
        let direction = match self.direction {
            TrafficDirection::Forward => TrafficDirection::Flipped,
            TrafficDirection::Flipped => TrafficDirection::Forward,
        };
        Self { direction, ..self.clone() }
    }

    /// Points in the order traffic travels; compartment 0 is the first.
    pub fn traffic_points(&self) -> Vec<Vec3> {
        match self.direction {
            TrafficDirection::Forward => self.points.clone(),
            TrafficDirection::Flipped => self.points.iter().rev().copied().collect(),
        }
    }

    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    pub fn translated(&self, offset: Vec3) -> Self {
        Self { points: self.points.iter().map(|p| p + offset).collect(), ..self.clone() }
    }

    /// Shortest distance from any stored point to `p`.
    pub fn min_distance_to(&self, p: &Vec3) -> f64 {
        self.points.iter().map(|q| (q - p).norm()).fold(f64::INFINITY, f64::min)
    }
}

/// `n` points at equal arc-length spacing along `path`, endpoints included.
pub fn resample_fiber(path: &FiberPath, n: usize) -> Result<FiberPath> {
    if n < 2 {
        return Err(Error::Geometry(format!("cannot resample to {n} points")));
    }
    let pts = &path.points;
    if pts.len() < 2 {
        return Err(Error::Geometry(format!("fiber `{}` has fewer than two points", path.id)));
    }
    let seg: Vec<f64> = pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let total: f64 = seg.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Geometry(format!("fiber `{}` has zero length", path.id)));
    }

    let mut out = Vec::with_capacity(n);
    out.push(pts[0]);
    let mut walked = 0.0;
    let mut s = 0;
    for i in 1..n - 1 {
        let target = total * i as f64 / (n - 1) as f64;
        while s + 1 < seg.len() && walked + seg[s] < target {
            walked += seg[s];
            s += 1;
        }
        let t = if seg[s] > 0.0 { ((target - walked) / seg[s]).clamp(0.0, 1.0) } else { 0.0 };
        out.push(pts[s] + t * (pts[s + 1] - pts[s]));
    }
    out.push(pts[pts.len() - 1]);
    Ok(FiberPath { id: path.id.clone(), points: out, direction: path.direction })
}

/// Parse a tract file: one `x y z` triple (mm) per line, fibers separated by
/// blank lines, `#` starts a comment line.
pub fn parse_tracts(text: &str) -> Result<Vec<FiberPath>> {
    let mut fibers = Vec::new();
    let mut current: Vec<Vec3> = Vec::new();
    let flush = |current: &mut Vec<Vec3>, fibers: &mut Vec<FiberPath>| {
        if !current.is_empty() {
            let id = format!("fiber{}", fibers.len());
            fibers.push(FiberPath::new(id, std::mem::take(current)));
        }
    };
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            flush(&mut current, &mut fibers);
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("tract line {}: {e}", lineno + 1)))?;
        if vals.len() != 3 {
            return Err(Error::Format(format!("tract line {}: expected 3 values, got {}", lineno + 1, vals.len())));
        }
        current.push(Vec3::new(vals[0], vals[1], vals[2]));
    }
    flush(&mut current, &mut fibers);
    Ok(fibers)
}

pub fn format_tracts(fibers: &[FiberPath]) -> String {
    let mut s = String::new();
    for (i, f) in fibers.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        for p in &f.points {
            let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
        }
    }
    s
}

pub fn read_tracts(path: &Path) -> Result<Vec<FiberPath>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_tracts(&text)
}

pub fn write_tracts(path: &Path, fibers: &[FiberPath]) -> Result<()> {
    std::fs::write(path, format_tracts(fibers)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Straight and arc fibers placed relative to a lead contact.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTract {
    /// Contact the fiber passes (0-based).
    pub contact: usize,
    /// Closest distance between fiber and lead surface, mm.
    pub distance_mm: f64,
    /// Azimuth of the closest point around the lead, degrees.
    pub azimuth_deg: f64,
    /// Angle between the fiber and the lead's transverse plane, degrees.
    pub tilt_deg: f64,
    pub length_mm: f64,
    /// Arc-length fraction (from the traffic entry) at the closest point.
    pub closest_fraction: f64,
    /// Curvature radius in mm; `None` is straight.
    pub bend_radius_mm: Option<f64>,
    pub n_points: usize,
}

impl Default for SyntheticTract {
    fn default() -> Self {
        Self {
            contact: 3,
            distance_mm: 1.0,
            azimuth_deg: 0.0,
            tilt_deg: 0.0,
            length_mm: 8.0,
            closest_fraction: 0.5,
            bend_radius_mm: None,
            n_points: 81,
        }
    }
}

impl SyntheticTract {
    pub fn build(&self, lead: &LeadModel, id: impl Into<String>) -> FiberPath {
        let (e1, e2) = lead.transverse_frame();
        let az = self.azimuth_deg.to_radians();
        let radial = az.cos() * e1 + az.sin() * e2;
        let closest = lead.contact_center(self.contact) + (lead.radius_mm() + self.distance_mm) * radial;
        // fiber tangent: perpendicular to the radial direction, tilted out of
        // the transverse plane toward the lead axis
        let across = lead.axis.cross(&radial);
        let tilt = self.tilt_deg.to_radians();
        let tangent = (tilt.cos() * across + tilt.sin() * lead.axis).normalize();

        let n = self.n_points.max(2);
        let points = (0..n)
            .map(|i| {
                let s = self.length_mm * (i as f64 / (n - 1) as f64 - self.closest_fraction);
                match self.bend_radius_mm {
                    None => closest + s * tangent,
                    // bend away from the lead so the closest point stays closest
                    Some(r) => {
                        let phi = s / r;
                        closest + r * phi.sin() * tangent + r * (1.0 - phi.cos()) * radial
                    }
                }
            })
            .collect();
        FiberPath::new(id, points)
    }
}
