//! Synthetic volumes: point source, homogeneous lead and CSF-slab phantoms.

use crate::error::Result;
use crate::lead::{rasterize_lead, LeadModel};
use crate::volume::{Grid, Label, SigmaTable, TissueVolume, Vec3};

pub const PHANTOM_DIM: usize = 100;
pub const PHANTOM_SPACING_MM: f64 = 0.5;

/// 50 mm cube of 0.5 mm voxels centred on the origin.
pub fn phantom_grid() -> Grid {
    Grid::centered_cube(PHANTOM_DIM, PHANTOM_SPACING_MM).expect("valid phantom grid")
}

/// Four-ring lead along +z with its tip 5 mm below the origin; the third
/// contact is centred 0.75 mm above the origin.
pub fn phantom_lead() -> LeadModel {
    LeadModel::ring_lead(Vec3::new(0.25, 0.25, -5.0), Vec3::z(), 4)
}

/// Homogeneous medium with a small equipotential source: the 2×2×2 voxels
/// around the centre of an even-sized cube, or the central voxel of an odd
/// one. Returns the volume and the source position.
pub fn point_source_volume(n: usize, spacing_mm: f64, sigma: f64) -> Result<(TissueVolume, Vec3)> {
    let grid = Grid::centered_cube(n, spacing_mm)?;
    let mut vol = TissueVolume::filled(grid, Label::Background, SigmaTable::homogeneous(sigma))?;
    let lo = if n.is_multiple_of(2) { n / 2 - 1 } else { n / 2 };
    let mut pos = Vec3::zeros();
    let mut count = 0.0;
    for i in lo..=n / 2 {
        for j in lo..=n / 2 {
            for k in lo..=n / 2 {
                let idx = vol.grid().index(i, j, k);
                vol.set_label(idx, Label::Contact(0));
                pos += vol.grid().center(idx);
                count += 1.0;
            }
        }
    }
    Ok((vol, pos / count))
}

/// Lead in a homogeneous medium of conductivity `sigma`.
pub fn homogeneous_lead_volume(grid: Grid, lead: &LeadModel, sigma: f64) -> Result<TissueVolume> {
    let vol = TissueVolume::filled(grid, Label::Background, SigmaTable::homogeneous(sigma))?;
    rasterize_lead(&vol, lead)
}

/// Layout of the heterogeneous phantom, mm in grid coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SlabLayout {
    /// Voxels with `x` in this range are CSF.
    pub csf_x_mm: (f64, f64),
    /// Voxels with `x` below this are gray matter; the rest is white matter.
    pub gray_below_x_mm: f64,
}

impl Default for SlabLayout {
    fn default() -> Self {
        Self { csf_x_mm: (4.0, 6.0), gray_below_x_mm: -4.0 }
    }
}

/// White matter around the lead, a CSF slab on one side and gray matter on
/// the other, with the default conductivity table.
pub fn csf_slab_volume(grid: Grid, lead: &LeadModel, layout: &SlabLayout) -> Result<TissueVolume> {
    let labels = (0..grid.len())
        .map(|i| {
            let x = grid.center(i).x;
            if x >= layout.csf_x_mm.0 && x < layout.csf_x_mm.1 {
                Label::Csf
            } else if x < layout.gray_below_x_mm {
                Label::Gray
            } else {
                Label::White
            }
        })
        .collect();
    let vol = TissueVolume::new(grid, labels, SigmaTable::default())?;
    rasterize_lead(&vol, lead)
}
