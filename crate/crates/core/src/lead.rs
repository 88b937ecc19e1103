//! DBS lead geometry and its rasterization into a tissue volume.

use crate::error::{Error, Result};
use crate::volume::{Label, TissueVolume, Vec3};

/// One contact on the lead. Offsets are measured from the tip along the axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactGeometry {
    pub offset_mm: f64,
    pub height_mm: f64,
    /// Angular extent `(start, end)` in degrees for segmented contacts;
    /// `None` is a full ring.
    pub angular_span_deg: Option<(f64, f64)>,
}

impl ContactGeometry {
    pub fn ring(offset_mm: f64, height_mm: f64) -> Self {
        Self { offset_mm, height_mm, angular_span_deg: None }
    }

    pub fn is_ring(&self) -> bool {
        self.angular_span_deg.is_none()
    }

    fn covers_angle(&self, deg: f64) -> bool {
        match self.angular_span_deg {
            None => true,
            Some((start, end)) => {
                let span = (end - start).rem_euclid(360.0);
                (deg - start).rem_euclid(360.0) <= span
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeadModel {
    pub tip_mm: Vec3,
    /// Unit vector from the tip toward the shaft.
    pub axis: Vec3,
    pub body_diameter_mm: f64,
    pub contacts: Vec<ContactGeometry>,
    pub pitch_mm: f64,
    pub encapsulation_mm: f64,
}

impl LeadModel {
    pub const DEFAULT_DIAMETER_MM: f64 = 1.27;
    pub const DEFAULT_PITCH_MM: f64 = 0.5;
    pub const DEFAULT_ENCAPSULATION_MM: f64 = 0.5;
    pub const DEFAULT_CONTACT_HEIGHT_MM: f64 = 1.5;
    pub const DEFAULT_TIP_OFFSET_MM: f64 = 1.0;

    /// Lead with `n` equally spaced ring contacts of the default height.
    pub fn ring_lead(tip_mm: Vec3, axis: Vec3, n: usize) -> Self {
        let step = Self::DEFAULT_CONTACT_HEIGHT_MM + Self::DEFAULT_PITCH_MM;
        let contacts = (0..n)
            .map(|k| {
                ContactGeometry::ring(Self::DEFAULT_TIP_OFFSET_MM + k as f64 * step, Self::DEFAULT_CONTACT_HEIGHT_MM)
            })
            .collect();
        Self {
            tip_mm,
            axis: axis.normalize(),
            body_diameter_mm: Self::DEFAULT_DIAMETER_MM,
            contacts,
            pitch_mm: Self::DEFAULT_PITCH_MM,
            encapsulation_mm: Self::DEFAULT_ENCAPSULATION_MM,
        }
    }

    pub fn radius_mm(&self) -> f64 {
        0.5 * self.body_diameter_mm
    }

    /// Axial coordinate from the tip and radial distance from the axis.
    pub fn cylindrical(&self, p: &Vec3) -> (f64, f64) {
        let v = p - self.tip_mm;
        let s = v.dot(&self.axis);
        let radial = (v - s * self.axis).norm();
        (s, radial)
    }

    pub fn contact_center(&self, k: usize) -> Vec3 {
        let c = &self.contacts[k];
        self.tip_mm + (c.offset_mm + 0.5 * c.height_mm) * self.axis
    }

    /// Distance from `p` to the lead surface (negative inside the body).
    pub fn distance_to_surface(&self, p: &Vec3) -> f64 {
        let (s, radial) = self.cylindrical(p);
        if s >= 0.0 {
            radial - self.radius_mm()
        } else if radial <= self.radius_mm() {
            -s
        } else {
            (s * s + (radial - self.radius_mm()).powi(2)).sqrt()
        }
    }

    /// Orthonormal pair perpendicular to the axis; angle 0 lies along the first.
    pub fn transverse_frame(&self) -> (Vec3, Vec3) {
        let seed = if self.axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let e1 = (seed - seed.dot(&self.axis) * self.axis).normalize();
        let e2 = self.axis.cross(&e1);
        (e1, e2)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Geometry("lead axis must be a unit vector".into()));
        }
        if !(self.body_diameter_mm > 0.0) || !(self.encapsulation_mm > 0.0) {
            return Err(Error::Geometry("lead diameter and encapsulation thickness must be positive".into()));
        }
        if self.contacts.is_empty() {
            return Err(Error::Geometry("lead has no contacts".into()));
        }
        for (k, c) in self.contacts.iter().enumerate() {
            if !(c.height_mm > 0.0) || c.offset_mm < 0.0 {
                return Err(Error::Geometry(format!("contact C{} has invalid extent", k + 1)));
            }
        }
        // segmented contacts of one row share an axial band
        for pair in self.contacts.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let same_row = !a.is_ring()
                && !b.is_ring()
                && (a.offset_mm - b.offset_mm).abs() < 1e-9
                && (a.height_mm - b.height_mm).abs() < 1e-9;
            if same_row {
                continue;
            }
            let gap = b.offset_mm - (a.offset_mm + a.height_mm);
            if gap <= 0.0 {
                return Err(Error::Geometry("contacts overlap axially".into()));
            }
            if (gap - self.pitch_mm).abs() > 1e-9 {
                return Err(Error::Geometry(format!("contact gap {gap} mm does not match pitch {} mm", self.pitch_mm)));
            }
        }
        Ok(())
    }
}

/// Burn the lead body, its contacts and the encapsulation shell into `volume`.
///
/// The shaft continues from the tip to the grid boundary. Labels outside the
/// lead and shell are left untouched.
pub fn rasterize_lead(volume: &TissueVolume, lead: &LeadModel) -> Result<TissueVolume> {
    lead.validate()?;
    let grid = volume.grid();
    let shell = lead.encapsulation_mm;
    let max_h = grid.spacing_mm.iter().cloned().fold(0.0, f64::max);
    if max_h > shell {
        return Err(Error::Resolution(format!("voxel spacing {max_h} mm exceeds encapsulation thickness {shell} mm")));
    }

    // tip cap and active region, each with its shell, must lie in the grid
    let reach = lead.radius_mm() + shell;
    let top = lead.contacts.iter().map(|c| c.offset_mm + c.height_mm).fold(0.0, f64::max) + shell;
    let (e1, e2) = lead.transverse_frame();
    for s in [-shell, top] {
        let c = lead.tip_mm + s * lead.axis;
        for p in [c, c + reach * e1, c - reach * e1, c + reach * e2, c - reach * e2] {
            if !grid.contains(&p) {
                return Err(Error::Geometry(format!(
                    "lead with encapsulation does not fit in the grid (point {:.2?} outside)",
                    p.as_slice()
                )));
            }
        }
    }

    let mut out = volume.clone();
    let r = lead.radius_mm();
    for idx in 0..grid.len() {
        let p = grid.center(idx);
        let (s, radial) = lead.cylindrical(&p);
        if s < -shell || radial > r + shell {
            continue;
        }
        if s >= 0.0 && radial <= r {
            let mut label = Label::LeadInsulator;
            let v = p - lead.tip_mm - s * lead.axis;
            let angle = v.dot(&e2).atan2(v.dot(&e1)).to_degrees().rem_euclid(360.0);
            for (k, c) in lead.contacts.iter().enumerate() {
                if s >= c.offset_mm && s <= c.offset_mm + c.height_mm && c.covers_angle(angle) {
                    label = Label::Contact(k as u8);
                    break;
                }
            }
            out.set_label(idx, label);
        } else if lead.distance_to_surface(&p) <= shell {
            out.set_label(idx, Label::Encapsulation);
        }
    }

    for k in 0..lead.contacts.len() {
        if out.count(|l| l == Label::Contact(k as u8)) == 0 {
            return Err(Error::Resolution(format!("contact C{} covers no voxel center", k + 1)));
        }
    }
    if out.count(|l| l == Label::Encapsulation) == 0 {
        return Err(Error::Resolution("encapsulation shell covers no voxel center".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Grid, SigmaTable, Tissue};

    fn cube() -> TissueVolume {
        TissueVolume::filled(Grid::centered_cube(100, 0.5).unwrap(), Label::Gray, SigmaTable::default()).unwrap()
    }

    fn lead() -> LeadModel {
        LeadModel::ring_lead(Vec3::new(0.25, 0.25, -5.0), Vec3::z(), 4)
    }

    #[test]
    fn lead_on_axis_produces_contacts_and_shell() {
        let vol = rasterize_lead(&cube(), &lead()).unwrap();
        assert!(vol.count(|l| l == Label::Encapsulation) > 0);
        for k in 0..4 {
            assert!(!vol.contact_voxels(k).is_empty(), "contact {k}");
        }
        assert!(vol.count(|l| l == Label::LeadInsulator) > 0);
        assert_eq!(vol.sigma_table().get(Tissue::Encapsulation), Some(0.18));
        // far tissue untouched
        let far = vol.grid().locate(&Vec3::new(10.0, 10.0, 10.0)).unwrap();
        assert_eq!(vol.label(far), Label::Gray);
    }

    #[test]
    fn contacts_are_separated_by_insulator() {
        let l = lead();
        let vol = rasterize_lead(&cube(), &l).unwrap();
        // midway through each gap the axis voxel is insulator
        for k in 0..3 {
            let c = &l.contacts[k];
            let s = c.offset_mm + c.height_mm + 0.5 * l.pitch_mm;
            let idx = vol.grid().locate(&(l.tip_mm + s * l.axis)).unwrap();
            assert_eq!(vol.label(idx), Label::LeadInsulator);
        }
    }

    #[test]
    fn lead_outside_grid_is_a_geometry_error() {
        let mut l = lead();
        l.tip_mm = Vec3::new(80.0, 0.0, 0.0);
        assert!(matches!(rasterize_lead(&cube(), &l), Err(Error::Geometry(_))));
    }

    #[test]
    fn coarse_grid_is_a_resolution_error() {
        let vol =
            TissueVolume::filled(Grid::centered_cube(50, 1.0).unwrap(), Label::Gray, SigmaTable::default()).unwrap();
        assert!(matches!(rasterize_lead(&vol, &lead()), Err(Error::Resolution(_))));
    }

    #[test]
    fn overlapping_contacts_rejected() {
        let mut l = lead();
        l.contacts[1].offset_mm = 2.0;
        assert!(l.validate().is_err());
        let mut l = lead();
        l.pitch_mm = 0.75;
        assert!(l.validate().is_err());
    }

    #[test]
    fn segmented_contact_covers_partial_ring() {
        let mut l = LeadModel::ring_lead(Vec3::new(0.25, 0.25, -5.0), Vec3::z(), 2);
        l.contacts[1].angular_span_deg = Some((0.0, 120.0));
        let seg = rasterize_lead(&cube(), &l).unwrap();
        let ring = rasterize_lead(&cube(), &LeadModel::ring_lead(l.tip_mm, l.axis, 2)).unwrap();
        let n_seg = seg.contact_voxels(1).len();
        let n_ring = ring.contact_voxels(1).len();
        assert!(n_seg > 0 && n_seg < n_ring, "{n_seg} vs {n_ring}");
    }
}
