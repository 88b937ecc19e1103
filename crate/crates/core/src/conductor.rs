//! Finite-volume discretization of the static current-conservation equation
//! `∇·(σ∇u) = 0` on a voxel grid, with contacts as equipotential bodies.
//!
//! Each voxel is a control volume; face conductances use the harmonic mean of
//! the two voxel conductivities. All voxels of one contact share a single
//! potential unknown (the infinite-conductivity limit of the metal), which
//! carries the injected contact current. Floating contacts are the same kind
//! of node with zero net injection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CsrBuilder, CsrMatrix};
use crate::stimulus::ContactProgram;
use crate::volume::{Grid, Label, TissueVolume, Vec3};

/// Treatment of the six outer faces of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OuterBoundary {
    /// Potential pinned to 0 V on the grid faces.
    Grounded,
    /// Far-field condition `∂u/∂n = -u (r̂·n)/r` measured from the active
    /// contacts, exact for a monopole in an unbounded medium.
    #[default]
    Asymptotic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative residual ‖b − Ax‖/‖b‖ at which iteration stops.
    pub tolerance: f64,
    /// Defaults to `10 · N^(1/3) · 100` for `N` voxels.
    pub max_iterations: Option<usize>,
    pub boundary: OuterBoundary,
    /// Reference point of the asymptotic boundary; defaults to the centroid
    /// of the active contact voxels.
    pub far_field_center_mm: Option<Vec3>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: None, boundary: OuterBoundary::default(), far_field_center_mm: None }
    }
}

/// Potential for 1 mA of program current (volts per mA), one value per voxel.
/// Contact voxels hold the potential of their contact.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSolution {
    pub grid: Grid,
    pub potential: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub program: ContactProgram,
}

impl FieldSolution {
    /// Field of the same program with every role exchanged.
    pub fn reversed(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            potential: self.potential.iter().map(|v| -v).collect(),
            residual: self.residual,
            iterations: self.iterations,
            program: self.program.reversed(),
        }
    }

    /// Potential scaled to `current_ma` of program current.
    pub fn scaled(&self, current_ma: f64) -> Vec<f64> {
        self.potential.iter().map(|v| v * current_ma).collect()
    }
}

/// Assembled conductance system of a rasterized volume.
#[derive(Debug)]
pub struct ConductorSystem {
    matrix: CsrMatrix,
    /// Unknown index of every voxel.
    unknown: Vec<usize>,
    /// Unknown index of each contact present in the volume.
    contact_nodes: BTreeMap<u8, usize>,
    grid: Grid,
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

impl ConductorSystem {
    /// Assemble the conductance matrix in siemens, with outer-face
    /// conductances referenced to `far_field_center` for the asymptotic case.
    pub fn assemble(volume: &TissueVolume, boundary: OuterBoundary, far_field_center: Vec3) -> Self {
        let grid = volume.grid().clone();
        let n_vox = grid.len();
        let contacts = volume.contacts();

        let mut unknown = vec![usize::MAX; n_vox];
        let mut next = 0;
        for (idx, slot) in unknown.iter_mut().enumerate() {
            if !matches!(volume.label(idx), Label::Contact(_)) {
                *slot = next;
                next += 1;
            }
        }
        let mut contact_nodes = BTreeMap::new();
        for &k in &contacts {
            contact_nodes.insert(k, next);
            next += 1;
        }
        for (idx, slot) in unknown.iter_mut().enumerate() {
            if let Label::Contact(k) = volume.label(idx) {
                *slot = contact_nodes[&k];
            }
        }

        // conductance of a face = σ_face · area / distance, with mm → m
        let h = grid.spacing_mm.map(|v| v * 1e-3);
        let face_g = [h[1] * h[2] / h[0], h[0] * h[2] / h[1], h[0] * h[1] / h[2]];
        let face_area = [h[1] * h[2], h[0] * h[2], h[0] * h[1]];
        let [nx, ny, nz] = grid.dims;
        let strides = [1, nx, nx * ny];
        let dims = [nx, ny, nz];
        let center_m = far_field_center * 1e-3;

        let boundary_g = |idx: usize, axis: usize, upper: bool, sigma: f64| -> f64 {
            match boundary {
                OuterBoundary::Grounded => sigma * 2.0 * face_g[axis],
                OuterBoundary::Asymptotic => {
                    let mut face = grid.center(idx) * 1e-3;
                    let half = 0.5 * h[axis];
                    face[axis] += if upper { half } else { -half };
                    let rvec = face - center_m;
                    let r = rvec.norm();
                    let normal = if upper { 1.0 } else { -1.0 };
                    let cos = (rvec[axis] * normal / r).max(1e-3);
                    sigma * face_area[axis] / (half + r / cos)
                }
            }
        };

        let mut builder = CsrBuilder::with_capacity(next, 7 * n_vox);
        let mut contact_rows: BTreeMap<usize, BTreeMap<usize, f64>> =
            contact_nodes.values().map(|&u| (u, BTreeMap::new())).collect();
        let mut row = Vec::with_capacity(8);

        for idx in 0..n_vox {
            let me = unknown[idx];
            let sigma = volume.conductivity(idx);
            let c = grid.coords(idx);
            let is_contact = matches!(volume.label(idx), Label::Contact(_));
            row.clear();
            let mut diag = 0.0;
            for axis in 0..3 {
                for upper in [false, true] {
                    let at_edge = if upper { c[axis] + 1 == dims[axis] } else { c[axis] == 0 };
                    if at_edge {
                        diag += boundary_g(idx, axis, upper, sigma);
                        continue;
                    }
                    let nb = if upper { idx + strides[axis] } else { idx - strides[axis] };
                    let other = unknown[nb];
                    if other == me {
                        continue;
                    }
                    let g = harmonic(sigma, volume.conductivity(nb)) * face_g[axis];
                    diag += g;
                    row.push((other, -g));
                }
            }
            if is_contact {
                let acc = contact_rows.get_mut(&me).expect("contact node");
                *acc.entry(me).or_insert(0.0) += diag;
                for &(col, v) in &row {
                    *acc.entry(col).or_insert(0.0) += v;
                }
            } else {
                row.push((me, diag));
                builder.push_row(row.iter().copied());
            }
        }
        for (_, entries) in contact_rows {
            builder.push_row(entries);
        }

        Self { matrix: builder.build(), unknown, contact_nodes, grid }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn n_unknowns(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn contact_node(&self, k: u8) -> Option<usize> {
        self.contact_nodes.get(&k).copied()
    }

    /// Right-hand side in amperes for 1 mA of program current.
    pub fn program_rhs(&self, program: &ContactProgram) -> Result<Vec<f64>> {
        program.validate()?;
        let mut b = vec![0.0; self.n_unknowns()];
        for (k, unit) in program.unit_currents() {
            let node = self.contact_node(k).ok_or_else(|| {
                Error::Program(format!("contact C{} of program `{program}` is not in the volume", k as usize + 1))
            })?;
            b[node] += unit * 1e-3;
        }
        Ok(b)
    }

    /// Solve and expand back to one potential per voxel.
    pub fn solve(&self, rhs: &[f64], tolerance: f64, max_iterations: usize) -> Result<(Vec<f64>, f64, usize)> {
        let mut x = vec![0.0; self.n_unknowns()];
        let out = linalg::pcg(&self.matrix, rhs, &mut x, tolerance, max_iterations);
        let residual = self.relative_residual(&x, rhs);
        if !out.converged || !residual.is_finite() {
            return Err(Error::Solver { iterations: out.iterations, residual });
        }
        let per_voxel = self.unknown.iter().map(|&u| x[u]).collect();
        Ok((per_voxel, residual, out.iterations))
    }

    pub fn relative_residual(&self, x: &[f64], rhs: &[f64]) -> f64 {
        let ax = self.matrix.mul_vec(x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        linalg::norm(&r) / linalg::norm(rhs)
    }

    /// Relative residual of a per-voxel potential against `rhs`.
    pub fn voxel_residual(&self, potential: &[f64], rhs: &[f64]) -> f64 {
        let mut x = vec![0.0; self.n_unknowns()];
        for (idx, &u) in self.unknown.iter().enumerate() {
            x[u] = potential[idx];
        }
        self.relative_residual(&x, rhs)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

pub fn default_max_iterations(grid: &Grid) -> usize {
    let n = grid.len() as f64;
    (10.0 * n.cbrt() * 100.0).ceil() as usize
}

/// Centroid of the voxels of the active contacts of `program`.
pub fn active_centroid(volume: &TissueVolume, program: &ContactProgram) -> Option<Vec3> {
    let active: Vec<u8> = program.unit_currents().into_iter().map(|(k, _)| k).collect();
    let grid = volume.grid();
    let mut sum = Vec3::zeros();
    let mut n = 0usize;
    for (idx, &l) in volume.labels().iter().enumerate() {
        if let Label::Contact(k) = l {
            if active.contains(&k) {
                sum += grid.center(idx);
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Potential of 1 mA of program current through `program` on a rasterized volume.
pub fn solve_unit_field(
    volume: &TissueVolume,
    program: &ContactProgram,
    options: &SolverOptions,
) -> Result<FieldSolution> {
    program.validate()?;
    let center = match options.far_field_center_mm {
        Some(c) => c,
        None => active_centroid(volume, program)
            .ok_or_else(|| Error::Program(format!("no voxels for the active contacts of `{program}`")))?,
    };
    let system = ConductorSystem::assemble(volume, options.boundary, center);
    let rhs = system.program_rhs(program)?;
    let max_it = options.max_iterations.unwrap_or_else(|| default_max_iterations(volume.grid()));
    let (potential, residual, iterations) = system.solve(&rhs, options.tolerance, max_it)?;
    log::debug!("solved `{program}`: {iterations} iterations, residual {residual:.2e}");
    Ok(FieldSolution { grid: volume.grid().clone(), potential, residual, iterations, program: program.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::SigmaTable;

    fn point_volume(n: usize, h: f64) -> TissueVolume {
        let grid = Grid::centered_cube(n, h).unwrap();
        let mut vol = TissueVolume::filled(grid, Label::Background, SigmaTable::homogeneous(0.1)).unwrap();
        let mid = vol.grid().index(n / 2, n / 2, n / 2);
        vol.set_label(mid, Label::Contact(0));
        vol
    }

    #[test]
    fn assembled_matrix_is_symmetric_with_lumped_contact() {
        let mut vol = point_volume(8, 0.5);
        // two-voxel contact
        let g = vol.grid().clone();
        vol.set_label(g.index(4, 4, 5), Label::Contact(0));
        vol.set_label(g.index(1, 1, 1), Label::Contact(1));
        let sys = ConductorSystem::assemble(&vol, OuterBoundary::Grounded, Vec3::zeros());
        assert_eq!(sys.n_unknowns(), g.len() - 3 + 2);
        assert!(sys.matrix().is_symmetric(1e-14));
    }

    #[test]
    fn grounded_rows_are_diagonally_dominant_at_faces() {
        let vol = point_volume(6, 0.5);
        let sys = ConductorSystem::assemble(&vol, OuterBoundary::Grounded, Vec3::zeros());
        let m = sys.matrix();
        for i in 0..m.nrows() {
            let s: f64 = m.row(i).map(|(_, v)| v).sum();
            assert!(s >= -1e-15, "row {i} sums to {s}");
        }
    }

    #[test]
    fn missing_contact_is_a_program_error() {
        let vol = point_volume(8, 0.5);
        let p: ContactProgram = "C3-".parse().unwrap();
        assert!(matches!(solve_unit_field(&vol, &p, &SolverOptions::default()), Err(Error::Program(_))));
        let anode_only: ContactProgram = "C1+".parse().unwrap();
        assert!(matches!(solve_unit_field(&vol, &anode_only, &SolverOptions::default()), Err(Error::Program(_))));
    }

    #[test]
    fn linearity_and_reversal() {
        let vol = point_volume(20, 0.5);
        let sol = solve_unit_field(&vol, &"C1-".parse().unwrap(), &SolverOptions::default()).unwrap();
        assert!(sol.residual <= 1e-8);
        assert!(sol.potential.iter().all(|v| v.is_finite()));
        let sys =
            ConductorSystem::assemble(&vol, OuterBoundary::Asymptotic, vol.grid().center(vol.grid().index(10, 10, 10)));
        let rhs3: Vec<f64> = sys.program_rhs(&sol.program).unwrap().iter().map(|b| 3.0 * b).collect();
        let (u3, _, _) = sys.solve(&rhs3, 1e-8, 10_000).unwrap();
        for (a, b) in u3.iter().zip(&sol.potential) {
            assert!((a - 3.0 * b).abs() <= 1e-9 * a.abs().max(1e-12));
        }
        let neg: Vec<f64> = rhs3.iter().map(|b| -b).collect();
        let (un, _, _) = sys.solve(&neg, 1e-8, 10_000).unwrap();
        assert!(un.iter().zip(&u3).all(|(a, b)| *a == -*b));
    }

    #[test]
    fn iteration_cap_reports_solver_error() {
        let vol = point_volume(20, 0.5);
        let opts = SolverOptions { max_iterations: Some(2), ..Default::default() };
        match solve_unit_field(&vol, &"C1-".parse().unwrap(), &opts) {
            Err(Error::Solver { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-8);
            }
            other => panic!("expected solver error, got {other:?}"),
        }
    }

    #[test]
    fn default_iteration_cap() {
        let g = Grid::centered_cube(100, 0.5).unwrap();
        assert_eq!(default_max_iterations(&g), 100_000);
    }
}
