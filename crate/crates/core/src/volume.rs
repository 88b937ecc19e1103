//! Voxelized tissue volumes and their conductivity tables.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Regular voxel grid. `origin_mm` is the outer corner of voxel `(0, 0, 0)`,
/// so voxel centers sit at `origin + (index + 0.5) * spacing`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing_mm: [f64; 3], origin_mm: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Volume(format!("grid dimensions must be positive, got {dims:?}")));
        }
        if spacing_mm.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::Volume(format!("voxel spacing must be positive, got {spacing_mm:?}")));
        }
        Ok(Self { dims, spacing_mm, origin_mm })
    }

    /// Cube of `n³` voxels of edge `spacing` centered on the origin.
    pub fn centered_cube(n: usize, spacing_mm: f64) -> Result<Self> {
        let half = 0.5 * n as f64 * spacing_mm;
        Self::new([n; 3], [spacing_mm; 3], [-half; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    pub fn center(&self, idx: usize) -> Vec3 {
        let c = self.coords(idx);
        self.center_of(c)
    }

    pub fn center_of(&self, c: [usize; 3]) -> Vec3 {
        Vec3::new(
            self.origin_mm[0] + (c[0] as f64 + 0.5) * self.spacing_mm[0],
            self.origin_mm[1] + (c[1] as f64 + 0.5) * self.spacing_mm[1],
            self.origin_mm[2] + (c[2] as f64 + 0.5) * self.spacing_mm[2],
        )
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing_mm.iter().product()
    }

    pub fn min_corner(&self) -> Vec3 {
        Vec3::from(self.origin_mm)
    }

    pub fn max_corner(&self) -> Vec3 {
        Vec3::new(
            self.origin_mm[0] + self.dims[0] as f64 * self.spacing_mm[0],
            self.origin_mm[1] + self.dims[1] as f64 * self.spacing_mm[1],
            self.origin_mm[2] + self.dims[2] as f64 * self.spacing_mm[2],
        )
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let lo = self.min_corner();
        let hi = self.max_corner();
        (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a])
    }

    /// Voxel containing `p`, or `None` outside the grid.
    pub fn locate(&self, p: &Vec3) -> Option<usize> {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let f = (p[a] - self.origin_mm[a]) / self.spacing_mm[a];
            if !(f >= 0.0) || f > self.dims[a] as f64 {
                return None;
            }
            c[a] = (f.floor() as usize).min(self.dims[a] - 1);
        }
        Some(self.index(c[0], c[1], c[2]))
    }
}

/// Tissue class, independent of which contact a metal voxel belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tissue {
    Background,
    Gray,
    White,
    Csf,
    Encapsulation,
    LeadInsulator,
    LeadContact,
}

impl Tissue {
    pub const ALL: [Tissue; 7] = [
        Tissue::Background,
        Tissue::Gray,
        Tissue::White,
        Tissue::Csf,
        Tissue::Encapsulation,
        Tissue::LeadInsulator,
        Tissue::LeadContact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tissue::Background => "background",
            Tissue::Gray => "gray",
            Tissue::White => "white",
            Tissue::Csf => "csf",
            Tissue::Encapsulation => "encapsulation",
            Tissue::LeadInsulator => "lead-insulator",
            Tissue::LeadContact => "lead-contact",
        }
    }
}

/// Per-voxel label. Contacts carry their 0-based index on the lead.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Background,
    Gray,
    White,
    Csf,
    Encapsulation,
    LeadInsulator,
    Contact(u8),
}

const CONTACT_CODE_BASE: u8 = 16;

impl Label {
    pub fn tissue(self) -> Tissue {
        match self {
            Label::Background => Tissue::Background,
            Label::Gray => Tissue::Gray,
            Label::White => Tissue::White,
            Label::Csf => Tissue::Csf,
            Label::Encapsulation => Tissue::Encapsulation,
            Label::LeadInsulator => Tissue::LeadInsulator,
            Label::Contact(_) => Tissue::LeadContact,
        }
    }

    /// Insulator or metal: voxels inside the lead body.
    pub fn is_lead(self) -> bool {
        matches!(self, Label::LeadInsulator | Label::Contact(_))
    }

    pub fn code(self) -> u8 {
        match self {
            Label::Background => 0,
            Label::Gray => 1,
            Label::White => 2,
            Label::Csf => 3,
            Label::Encapsulation => 4,
            Label::LeadInsulator => 5,
            Label::Contact(k) => CONTACT_CODE_BASE + k,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Label::Background,
            1 => Label::Gray,
            2 => Label::White,
            3 => Label::Csf,
            4 => Label::Encapsulation,
            5 => Label::LeadInsulator,
            c if c >= CONTACT_CODE_BASE => Label::Contact(c - CONTACT_CODE_BASE),
            _ => return None,
        })
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Contact(k) => write!(f, "lead-contact-{}", *k as usize + 1),
            other => f.write_str(other.tissue().name()),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(num) = s.strip_prefix("lead-contact-") {
            let k: u8 = num
                .parse()
                .ok()
                .filter(|&k: &u8| (1..=(255 - CONTACT_CODE_BASE)).contains(&k))
                .ok_or_else(|| Error::Format(format!("bad contact label `{s}`")))?;
            return Ok(Label::Contact(k - 1));
        }
        Tissue::ALL
            .iter()
            .find(|t| t.name() == s && **t != Tissue::LeadContact)
            .map(|t| match t {
                Tissue::Background => Label::Background,
                Tissue::Gray => Label::Gray,
                Tissue::White => Label::White,
                Tissue::Csf => Label::Csf,
                Tissue::Encapsulation => Label::Encapsulation,
                _ => Label::LeadInsulator,
            })
            .ok_or_else(|| Error::Format(format!("unknown tissue label `{s}`")))
    }
}

/// Conductivity per tissue class, S/m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SigmaTable(pub BTreeMap<Tissue, f64>);

impl Default for SigmaTable {
    fn default() -> Self {
        Self(BTreeMap::from([
            (Tissue::Background, 0.1),
            (Tissue::Gray, 0.09),
            (Tissue::White, 0.06),
            (Tissue::Csf, 2.0),
            (Tissue::Encapsulation, 0.18),
            (Tissue::LeadInsulator, 1e-6),
            (Tissue::LeadContact, 1e6),
        ]))
    }
}

impl SigmaTable {
    /// Every class at `sigma`, except the lead and its encapsulation.
    pub fn homogeneous(sigma: f64) -> Self {
        let mut t = Self::default();
        for tissue in [Tissue::Background, Tissue::Gray, Tissue::White, Tissue::Csf] {
            t.0.insert(tissue, sigma);
        }
        t
    }

    pub fn get(&self, tissue: Tissue) -> Option<f64> {
        self.0.get(&tissue).copied()
    }

    pub fn set(&mut self, tissue: Tissue, sigma: f64) {
        self.0.insert(tissue, sigma);
    }
}

/// Labelled voxel grid plus the conductivity assigned to each label.
#[derive(Clone, Debug, PartialEq)]
pub struct TissueVolume {
    grid: Grid,
    labels: Vec<Label>,
    sigma: SigmaTable,
}

impl TissueVolume {
    pub fn new(grid: Grid, labels: Vec<Label>, sigma: SigmaTable) -> Result<Self> {
        if labels.len() != grid.len() {
            return Err(Error::Volume(format!("{} labels for a grid of {} voxels", labels.len(), grid.len())));
        }
        let vol = Self { grid, labels, sigma };
        vol.check_sigma()?;
        Ok(vol)
    }

    pub fn filled(grid: Grid, label: Label, sigma: SigmaTable) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![label; n], sigma)
    }

    fn check_sigma(&self) -> Result<()> {
        for (tissue, &s) in &self.sigma.0 {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Volume(format!(
                    "conductivity of {} must be strictly positive, got {s}",
                    tissue.name()
                )));
            }
        }
        let mut seen = [false; Tissue::ALL.len()];
        for l in &self.labels {
            seen[l.tissue() as usize] = true;
        }
        for t in Tissue::ALL {
            if seen[t as usize] && self.sigma.get(t).is_none() {
                return Err(Error::Volume(format!("no conductivity for label `{}`", t.name())));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn sigma_table(&self) -> &SigmaTable {
        &self.sigma
    }

    pub fn with_sigma(mut self, sigma: SigmaTable) -> Result<Self> {
        self.sigma = sigma;
        self.check_sigma()?;
        Ok(self)
    }

    pub fn label(&self, idx: usize) -> Label {
        self.labels[idx]
    }

    pub fn set_label(&mut self, idx: usize, label: Label) {
        self.labels[idx] = label;
    }

    /// Conductivity of voxel `idx` in S/m.
    pub fn conductivity(&self, idx: usize) -> f64 {
        // check_sigma guarantees an entry for every label in use
        self.sigma.get(self.labels[idx].tissue()).unwrap_or(f64::NAN)
    }

    pub fn count(&self, pred: impl Fn(Label) -> bool) -> usize {
        self.labels.iter().filter(|&&l| pred(l)).count()
    }

    /// Contact indices present in the volume, ascending.
    pub fn contacts(&self) -> Vec<u8> {
        let mut present = [false; 256];
        for l in &self.labels {
            if let Label::Contact(k) = l {
                present[*k as usize] = true;
            }
        }
        (0..=255u8).filter(|&k| present[k as usize]).collect()
    }

    /// Voxel indices labelled as contact `k`.
    pub fn contact_voxels(&self, k: u8) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| l == Label::Contact(k)).map(|(i, _)| i).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_index_roundtrip_and_locate() {
        let g = Grid::new([4, 5, 6], [0.5, 1.0, 2.0], [-1.0, 0.0, 3.0]).unwrap();
        for idx in [0, 7, 33, g.len() - 1] {
            let c = g.coords(idx);
            assert_eq!(g.index(c[0], c[1], c[2]), idx);
            assert_eq!(g.locate(&g.center(idx)), Some(idx));
        }
        assert_eq!(g.locate(&Vec3::new(-1.01, 0.5, 4.0)), None);
        // the far faces belong to the last voxel
        assert_eq!(g.locate(&g.max_corner()), Some(g.len() - 1));
    }

    #[test]
    fn centered_cube_is_symmetric() {
        let g = Grid::centered_cube(100, 0.5).unwrap();
        assert_eq!(g.origin_mm, [-25.0; 3]);
        assert_eq!(g.max_corner(), Vec3::new(25.0, 25.0, 25.0));
        assert_eq!(g.center(0), Vec3::new(-24.75, -24.75, -24.75));
    }

    #[test]
    fn label_names_roundtrip() {
        for l in [
            Label::Background,
            Label::Gray,
            Label::White,
            Label::Csf,
            Label::Encapsulation,
            Label::LeadInsulator,
            Label::Contact(0),
            Label::Contact(3),
        ] {
            assert_eq!(l.to_string().parse::<Label>().unwrap(), l);
            assert_eq!(Label::from_code(l.code()), Some(l));
        }
        assert!("grey".parse::<Label>().is_err());
        assert!("lead-contact".parse::<Label>().is_err());
    }

    #[test]
    fn rejects_nonpositive_conductivity_and_missing_entries() {
        let g = Grid::centered_cube(2, 1.0).unwrap();
        let mut bad = SigmaTable::default();
        bad.set(Tissue::Gray, 0.0);
        assert!(TissueVolume::filled(g.clone(), Label::Gray, bad).is_err());

        let mut missing = SigmaTable::default();
        missing.0.remove(&Tissue::Csf);
        assert!(TissueVolume::filled(g.clone(), Label::Csf, missing.clone()).is_err());
        assert!(TissueVolume::filled(g, Label::Gray, missing).is_ok());
    }

    #[test]
    fn encapsulation_default_conductivity() {
        assert_eq!(SigmaTable::default().get(Tissue::Encapsulation), Some(0.18));
    }
}
