//! Quantities derived from a unit field solution: electric-field norm, static
//! VTA, tract overlap, and extracellular potential time series along fibers.

use crate::conductor::FieldSolution;
use crate::error::{Error, Result};
use crate::fiber::FiberPath;
use crate::stimulus::StimulusWaveform;
use crate::volume::{Grid, TissueVolume, Vec3};

/// |∇u| in V/m for `amplitude_ma` of program current. Central differences in
/// the interior, one-sided differences on the outer faces.
pub fn efield_norm(solution: &FieldSolution, amplitude_ma: f64) -> Vec<f64> {
    let grid = &solution.grid;
    let u = &solution.potential;
    let [nx, ny, nz] = grid.dims;
    let dims = [nx, ny, nz];
    let strides = [1, nx, nx * ny];
    let h = grid.spacing_mm.map(|v| v * 1e-3);
    (0..grid.len())
        .map(|idx| {
            let c = grid.coords(idx);
            let mut sq = 0.0;
            for a in 0..3 {
                if dims[a] < 2 {
                    continue;
                }
                let d = if c[a] == 0 {
                    (u[idx + strides[a]] - u[idx]) / h[a]
                } else if c[a] + 1 == dims[a] {
                    (u[idx] - u[idx - strides[a]]) / h[a]
                } else {
                    (u[idx + strides[a]] - u[idx - strides[a]]) / (2.0 * h[a])
                };
                sq += d * d;
            }
            sq.sqrt() * amplitude_ma.abs()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct VtaResult {
    pub mask: Vec<bool>,
    pub volume_mm3: f64,
    pub threshold_v_per_m: f64,
}

impl VtaResult {
    pub fn voxel_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

pub const DEFAULT_VTA_THRESHOLD: f64 = 150.0;

/// Voxels whose field norm reaches `threshold`, excluding the lead itself.
pub fn static_vta(norm: &[f64], volume: &TissueVolume, threshold_v_per_m: f64) -> Result<VtaResult> {
    if !(threshold_v_per_m > 0.0) {
        return Err(Error::Config(format!("VTA threshold must be positive, got {threshold_v_per_m}")));
    }
    if norm.len() != volume.grid().len() {
        return Err(Error::Volume("field norm and volume differ in size".into()));
    }
    let mask: Vec<bool> =
        norm.iter().zip(volume.labels()).map(|(&e, l)| e >= threshold_v_per_m && !l.is_lead()).collect();
    let count = mask.iter().filter(|&&m| m).count();
    Ok(VtaResult { mask, volume_mm3: count as f64 * volume.grid().voxel_volume_mm3(), threshold_v_per_m })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverlapReport {
    /// Fraction of each fiber's points inside the VTA, in input order.
    pub per_fiber: Vec<f64>,
    pub aggregate: f64,
}

/// Fraction of fiber sample points that fall in VTA voxels. Points outside
/// the grid count as non-overlapping.
pub fn tract_overlap(vta: &VtaResult, grid: &Grid, fibers: &[FiberPath]) -> OverlapReport {
    let per_fiber: Vec<f64> = fibers
        .iter()
        .map(|f| {
            if f.points.is_empty() {
                return 0.0;
            }
            let mut outside = 0;
            let inside = f
                .points
                .iter()
                .filter(|p| match grid.locate(p) {
                    Some(idx) => vta.mask[idx],
                    None => {
                        outside += 1;
                        false
                    }
                })
                .count();
            if outside > 0 {
                log::warn!("fiber `{}`: {outside} point(s) outside the grid counted as non-overlapping", f.id);
            }
            inside as f64 / f.points.len() as f64
        })
        .collect();
    let aggregate = if per_fiber.is_empty() { 0.0 } else { per_fiber.iter().sum::<f64>() / per_fiber.len() as f64 };
    OverlapReport { per_fiber, aggregate }
}

/// Trilinear interpolation between voxel centers. Between the outermost
/// centers and the grid faces the nearest center value is held.
pub fn interpolate(grid: &Grid, values: &[f64], p: &Vec3) -> Result<f64> {
    if !grid.contains(p) {
        return Err(Error::Sampling(format!("point {:?} lies outside the grid", p.as_slice())));
    }
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let f = (p[a] - grid.origin_mm[a]) / grid.spacing_mm[a] - 0.5;
        let max = (grid.dims[a] - 1) as f64;
        let f = f.clamp(0.0, max);
        let i = (f.floor() as usize).min(grid.dims[a].saturating_sub(2));
        base[a] = i;
        frac[a] = if grid.dims[a] > 1 { f - i as f64 } else { 0.0 };
    }
    let mut acc = 0.0;
    for dz in 0..2 {
        for dy in 0..2 {
            for dx in 0..2 {
                let d = [dx, dy, dz];
                let mut w = 1.0;
                let mut c = [0usize; 3];
                for a in 0..3 {
                    let step = d[a].min(grid.dims[a] - 1);
                    c[a] = base[a] + step;
                    w *= if d[a] == 1 { frac[a] } else { 1.0 - frac[a] };
                }
                if w != 0.0 {
                    acc += w * values[grid.index(c[0], c[1], c[2])];
                }
            }
        }
    }
    Ok(acc)
}

/// Extracellular potential in volts, row-major `time × point`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSeries {
    pub dt_s: f64,
    pub n_points: usize,
    pub volts: Vec<f64>,
}

impl PotentialSeries {
    pub fn n_samples(&self) -> usize {
        self.volts.len().checked_div(self.n_points).unwrap_or(0)
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.volts[t * self.n_points..(t + 1) * self.n_points]
    }

    pub fn column(&self, point: usize) -> Vec<f64> {
        (0..self.n_samples()).map(|t| self.volts[t * self.n_points + point]).collect()
    }
}

pub const DEFAULT_SAMPLE_DT_S: f64 = 5e-6;

/// Potential at `points` for each sample `t = j·dt`, `j < round(duration/dt)`,
/// by scaling the interpolated unit potential with the program current.
pub fn sample_potential_series(
    solution: &FieldSolution,
    points: &[Vec3],
    waveform: &StimulusWaveform,
    dt_s: f64,
    duration_s: f64,
) -> Result<PotentialSeries> {
    if !(dt_s > 0.0) || !(duration_s >= 0.0) {
        return Err(Error::Sampling("dt must be positive and duration non-negative".into()));
    }
    if waveform.program.reversed() == solution.program && solution.program.is_bipolar() {
        return Err(Error::Sampling(format!(
            "field solved for `{}` but waveform drives `{}`; use FieldSolution::reversed",
            solution.program, waveform.program
        )));
    }
    if waveform.program != solution.program {
        return Err(Error::Sampling(format!(
            "field solved for `{}` but waveform drives `{}`",
            solution.program, waveform.program
        )));
    }
    let unit: Vec<f64> =
        points.iter().map(|p| interpolate(&solution.grid, &solution.potential, p)).collect::<Result<_>>()?;
    let n = (duration_s / dt_s).round() as usize;
    let current = waveform.sampled_program_current(dt_s, n);
    let mut volts = Vec::with_capacity(n * points.len());
    for i in current {
        volts.extend(unit.iter().map(|u| u * i));
    }
    Ok(PotentialSeries { dt_s, n_points: points.len(), volts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimulus::ContactProgram;
    use crate::volume::{Label, SigmaTable};

    fn linear_solution(n: usize) -> FieldSolution {
        let grid = Grid::centered_cube(n, 0.5).unwrap();
        let potential = (0..grid.len()).map(|i| 2.0 * grid.center(i).x + 0.5 * grid.center(i).z).collect();
        FieldSolution { grid, potential, residual: 0.0, iterations: 0, program: "C1-".parse().unwrap() }
    }

    #[test]
    fn constant_potential_has_zero_norm() {
        let mut s = linear_solution(6);
        s.potential.iter_mut().for_each(|v| *v = 1.25);
        assert!(efield_norm(&s, 3.0).iter().all(|&e| e == 0.0));
    }

    #[test]
    fn linear_potential_has_exact_gradient_and_scales_with_amplitude() {
        let s = linear_solution(6);
        // 2 V/mm and 0.5 V/mm → |E| = sqrt(4.25) kV/m per mA
        let one = efield_norm(&s, 1.0);
        let two = efield_norm(&s, 2.0);
        for (a, b) in one.iter().zip(&two) {
            assert!((a - 4.25f64.sqrt() * 1e3).abs() < 1e-9);
            assert_eq!(*b, 2.0 * a);
        }
    }

    #[test]
    fn trilinear_reproduces_linear_fields() {
        let s = linear_solution(8);
        for p in [Vec3::new(0.1, -0.3, 0.77), Vec3::new(-1.6, 1.9, -0.01)] {
            let v = interpolate(&s.grid, &s.potential, &p).unwrap();
            assert!((v - (2.0 * p.x + 0.5 * p.z)).abs() < 1e-12);
        }
        assert!(matches!(interpolate(&s.grid, &s.potential, &Vec3::new(5.0, 0.0, 0.0)), Err(Error::Sampling(_))));
    }

    #[test]
    fn vta_threshold_above_max_is_empty() {
        let s = linear_solution(6);
        let vol = TissueVolume::filled(s.grid.clone(), Label::Gray, SigmaTable::default()).unwrap();
        let norm = efield_norm(&s, 1.0);
        let max = norm.iter().cloned().fold(0.0, f64::max);
        let vta = static_vta(&norm, &vol, max * 1.01).unwrap();
        assert_eq!(vta.volume_mm3, 0.0);
        let all = static_vta(&norm, &vol, 1.0).unwrap();
        assert_eq!(all.voxel_count(), s.grid.len());
        assert_eq!(all.volume_mm3, s.grid.len() as f64 * 0.125);
        assert!(static_vta(&norm, &vol, 0.0).is_err());
    }

    #[test]
    fn overlap_empty_and_saturated_masks() {
        let grid = Grid::centered_cube(10, 0.5).unwrap();
        let fiber = FiberPath::new("f", vec![Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)]);
        let outside = FiberPath::new("o", vec![Vec3::new(-1.0, 0.0, 0.0), Vec3::new(10.0, 0.0, 0.0)]);
        let empty = VtaResult { mask: vec![false; grid.len()], volume_mm3: 0.0, threshold_v_per_m: 150.0 };
        let full = VtaResult { mask: vec![true; grid.len()], volume_mm3: 1.0, threshold_v_per_m: 150.0 };
        assert_eq!(tract_overlap(&empty, &grid, std::slice::from_ref(&fiber)).per_fiber, vec![0.0]);
        let r = tract_overlap(&full, &grid, &[fiber, outside]);
        assert_eq!(r.per_fiber, vec![1.0, 0.5]);
        assert_eq!(r.aggregate, 0.75);
    }

    #[test]
    fn series_scales_unit_potential_by_cathodic_current() {
        let s = linear_solution(8);
        let pts = [Vec3::new(0.25, 0.25, 0.25), Vec3::new(-1.0, 0.0, 0.5)];
        let w = StimulusWaveform::new(3.0, 90.0, 140.0, "C1-".parse().unwrap());
        let series = sample_potential_series(&s, &pts, &w, 5e-6, 30e-3).unwrap();
        assert_eq!(series.n_samples(), 6000);
        let unit: Vec<f64> = pts.iter().map(|p| interpolate(&s.grid, &s.potential, p).unwrap()).collect();
        for t in [0, 10, 17] {
            for (k, u) in unit.iter().enumerate() {
                assert_eq!(series.row(t)[k], -3.0 * u);
            }
        }
        assert!(series.row(18).iter().all(|&v| v == 0.0));
        assert!(series.row(1000).iter().all(|&v| v == 0.0));

        let mut zero = w.clone();
        zero.amplitude_ma = 0.0;
        let z = sample_potential_series(&s, &pts, &zero, 5e-6, 30e-3).unwrap();
        assert!(z.volts.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn series_rejects_mismatched_program_and_outside_points() {
        let s = linear_solution(8);
        let w = StimulusWaveform::new(3.0, 90.0, 140.0, "C2-".parse::<ContactProgram>().unwrap());
        assert!(sample_potential_series(&s, &[Vec3::zeros()], &w, 5e-6, 1e-3).is_err());
        let w = StimulusWaveform::new(3.0, 90.0, 140.0, "C1-".parse::<ContactProgram>().unwrap());
        assert!(sample_potential_series(&s, &[Vec3::new(0.0, 0.0, 9.0)], &w, 5e-6, 1e-3).is_err());
    }
}
