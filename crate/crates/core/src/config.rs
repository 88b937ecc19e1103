//! TOML run configuration. Every section is optional; the defaults describe
//! the shipped synthetic near-fiber scenario on the 100³ phantom.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cable::{AxonalInput, CableConfig, DEFAULT_DT_MS};
use crate::conductor::{OuterBoundary, SolverOptions};
use crate::error::{Error, Result};
use crate::fiber::{read_tracts, FiberPath, SyntheticTract};
use crate::format::read_volume;
use crate::lead::{rasterize_lead, ContactGeometry, LeadModel};
use crate::phantom::{csf_slab_volume, homogeneous_lead_volume, point_source_volume, SlabLayout};
use crate::scenario::{SweepSetup, DEFAULT_N_SHIFTS, DEFAULT_TAIL_MS};
use crate::stimulus::{ContactProgram, PulseShape, StimulusWaveform};
use crate::volume::{Grid, SigmaTable, Tissue, TissueVolume, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub volume: VolumeConfig,
    /// Overrides of the default conductivity table, S/m.
    pub sigma: BTreeMap<Tissue, f64>,
    pub lead: LeadConfig,
    pub solver: SolverConfig,
    pub stimulus: StimulusConfig,
    pub cable: CableConfig,
    pub input: InputConfig,
    pub tracts: TractsConfig,
    pub vta: VtaConfig,
    pub sweep: SweepConfig,
    pub polarity: PolarityConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    #[default]
    Homogeneous,
    CsfSlab,
    PointSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeConfig {
    /// Labelled volume file; when absent a phantom is generated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub phantom: PhantomKind,
    pub dims: usize,
    pub spacing_mm: f64,
    /// Conductivity of the homogeneous and point-source phantoms.
    pub background_sigma: f64,
    pub csf_x_mm: [f64; 2],
    pub gray_below_x_mm: f64,
}

impl Default for VolumeConfig {
    fn default() -> Self {
        let slab = SlabLayout::default();
        Self {
            path: None,
            phantom: PhantomKind::Homogeneous,
            dims: crate::phantom::PHANTOM_DIM,
            spacing_mm: crate::phantom::PHANTOM_SPACING_MM,
            background_sigma: 0.1,
            csf_x_mm: [slab.csf_x_mm.0, slab.csf_x_mm.1],
            gray_below_x_mm: slab.gray_below_x_mm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeadConfig {
    pub enabled: bool,
    pub tip_mm: [f64; 3],
    pub axis: [f64; 3],
    pub n_contacts: usize,
    pub diameter_mm: f64,
    pub contact_height_mm: f64,
    pub pitch_mm: f64,
    pub tip_offset_mm: f64,
    pub encapsulation_mm: f64,
}

impl Default for LeadConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            tip_mm: [0.25, 0.25, -5.0],
            axis: [0.0, 0.0, 1.0],
            n_contacts: 4,
            diameter_mm: LeadModel::DEFAULT_DIAMETER_MM,
            contact_height_mm: LeadModel::DEFAULT_CONTACT_HEIGHT_MM,
            pitch_mm: LeadModel::DEFAULT_PITCH_MM,
            tip_offset_mm: LeadModel::DEFAULT_TIP_OFFSET_MM,
            encapsulation_mm: LeadModel::DEFAULT_ENCAPSULATION_MM,
        }
    }
}

impl LeadConfig {
    pub fn model(&self) -> LeadModel {
        let step = self.contact_height_mm + self.pitch_mm;
        LeadModel {
            tip_mm: Vec3::from(self.tip_mm),
            axis: Vec3::from(self.axis).normalize(),
            body_diameter_mm: self.diameter_mm,
            contacts: (0..self.n_contacts)
                .map(|k| ContactGeometry::ring(self.tip_offset_mm + k as f64 * step, self.contact_height_mm))
                .collect(),
            pitch_mm: self.pitch_mm,
            encapsulation_mm: self.encapsulation_mm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    pub boundary: OuterBoundary,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self { tolerance: o.tolerance, max_iterations: o.max_iterations, boundary: o.boundary }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StimulusConfig {
    pub program: String,
    pub amplitude_ma: f64,
    pub pulse_width_us: f64,
    pub frequency_hz: f64,
    pub n_pulses: usize,
    pub onset_ms: f64,
    pub shape: PulseShape,
}

impl Default for StimulusConfig {
    fn default() -> Self {
        Self {
            program: "C3-,C4+".into(),
            amplitude_ma: 3.0,
            pulse_width_us: 90.0,
            frequency_hz: 140.0,
            n_pulses: StimulusWaveform::DEFAULT_N_PULSES,
            onset_ms: 0.0,
            shape: PulseShape::RectangularMonophasic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub compartment: usize,
    pub duration_ms: f64,
    /// Fixed input amplitude; when absent it is calibrated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude_na: Option<f64>,
    pub target_fraction: f64,
    /// Simulated time per calibration run, long enough for slow
    /// near-threshold spikes to reach the detection compartment.
    pub calibration_window_ms: f64,
}

impl Default for InputConfig {
    fn default() -> Self {
        let d = AxonalInput::default();
        Self {
            compartment: d.compartment,
            duration_ms: d.duration_ms,
            amplitude_na: None,
            target_fraction: crate::cable::DEFAULT_TARGET_FRACTION,
            calibration_window_ms: 40.0,
        }
    }
}

impl InputConfig {
    /// Input template with the given amplitude and the calibration onset.
    pub fn template(&self, amplitude_na: f64) -> AxonalInput {
        AxonalInput { compartment: self.compartment, amplitude_na, duration_ms: self.duration_ms, ..Default::default() }
    }
}

/// A named [`SyntheticTract`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticTractConfig {
    pub name: String,
    pub contact: usize,
    pub distance_mm: f64,
    pub azimuth_deg: f64,
    pub tilt_deg: f64,
    pub length_mm: f64,
    pub closest_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bend_radius_mm: Option<f64>,
}

impl Default for SyntheticTractConfig {
    fn default() -> Self {
        let t = SyntheticTract::default();
        Self {
            name: "tract".into(),
            contact: t.contact,
            distance_mm: t.distance_mm,
            azimuth_deg: t.azimuth_deg,
            tilt_deg: t.tilt_deg,
            length_mm: t.length_mm,
            closest_fraction: t.closest_fraction,
            bend_radius_mm: t.bend_radius_mm,
        }
    }
}

impl SyntheticTractConfig {
    pub fn tract(&self) -> SyntheticTract {
        SyntheticTract {
            contact: self.contact,
            distance_mm: self.distance_mm,
            azimuth_deg: self.azimuth_deg,
            tilt_deg: self.tilt_deg,
            length_mm: self.length_mm,
            closest_fraction: self.closest_fraction,
            bend_radius_mm: self.bend_radius_mm,
            ..SyntheticTract::default()
        }
    }
}

/// Fibers passing the uppermost contact at 1, 2 and 3 mm, and one oblique
/// fiber at the third contact.
pub fn default_synthetic_tracts() -> Vec<SyntheticTractConfig> {
    let near = |d: f64| SyntheticTractConfig {
        name: format!("near-{d}mm"),
        contact: 3,
        distance_mm: d,
        closest_fraction: 0.3,
        ..Default::default()
    };
    vec![
        near(1.0),
        near(2.0),
        near(3.0),
        SyntheticTractConfig {
            name: "oblique".into(),
            contact: 2,
            distance_mm: 1.0,
            azimuth_deg: 120.0,
            tilt_deg: 35.0,
            closest_fraction: 0.4,
            ..Default::default()
        },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TractsConfig {
    /// Tract file; its fibers come first, named `fiber0`, `fiber1`, ...
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub synthetic: Vec<SyntheticTractConfig>,
}

impl Default for TractsConfig {
    fn default() -> Self {
        Self { path: None, synthetic: default_synthetic_tracts() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VtaConfig {
    pub threshold_v_per_m: f64,
    pub amplitudes_ma: Vec<f64>,
}

impl Default for VtaConfig {
    fn default() -> Self {
        Self {
            threshold_v_per_m: crate::field::DEFAULT_VTA_THRESHOLD,
            amplitudes_ma: (0..=10).map(|k| k as f64 * 0.5).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Tract index of the grid sweeps.
    pub fiber: usize,
    pub amplitudes_ma: Vec<f64>,
    /// Rows of the pulse-width grid; empty skips it.
    pub pulse_widths_us: Vec<f64>,
    /// Rows of the frequency grid; empty skips it.
    pub frequencies_hz: Vec<f64>,
    /// Tract indices scored at the stimulus settings, e.g. a distance series.
    pub series: Vec<usize>,
    pub n_shifts: usize,
    pub tail_ms: f64,
    pub blanking_ms: f64,
    pub dt_ms: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            fiber: 0,
            amplitudes_ma: (0..=10).map(|k| k as f64 * 0.5).collect(),
            pulse_widths_us: vec![30.0, 60.0, 90.0, 120.0],
            frequencies_hz: Vec::new(),
            series: vec![0, 1, 2],
            n_shifts: DEFAULT_N_SHIFTS,
            tail_ms: DEFAULT_TAIL_MS,
            blanking_ms: 0.0,
            dt_ms: DEFAULT_DT_MS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolarityConfig {
    pub programs: Vec<String>,
    /// Two tract indices.
    pub tracts: Vec<usize>,
}

impl Default for PolarityConfig {
    fn default() -> Self {
        Self { programs: vec!["C3-,C4+".into(), "C3+,C4-".into(), "C3-,C4-".into()], tracts: vec![0, 3] }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            let ctx = if e.kind() == std::io::ErrorKind::NotFound {
                format!("file not found: {}", path.display())
            } else {
                format!("reading {}", path.display())
            };
            Error::io(ctx, e)
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        resolve(&mut cfg.volume.path);
        resolve(&mut cfg.tracts.path);
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.program()?;
        for p in &self.polarity.programs {
            p.parse::<ContactProgram>()?;
        }
        self.cable.validate()?;
        self.waveform()?.validate()?;
        if !(self.solver.tolerance > 0.0) {
            return Err(Error::Config("solver tolerance must be positive".into()));
        }
        if !(self.vta.threshold_v_per_m > 0.0) {
            return Err(Error::Config("VTA threshold must be positive".into()));
        }
        if self.sweep.n_shifts == 0 {
            return Err(Error::Config("sweep needs at least one phase shift".into()));
        }
        for &a in self.vta.amplitudes_ma.iter().chain(&self.sweep.amplitudes_ma) {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("amplitude {a} mA is not a non-negative number")));
            }
        }
        Ok(())
    }

    /// Check that referenced files exist.
    pub fn check_files(&self) -> Result<()> {
        for p in [&self.volume.path, &self.tracts.path].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::io(
                    format!("file not found: {}", p.display()),
                    std::io::Error::from(std::io::ErrorKind::NotFound),
                ));
            }
        }
        Ok(())
    }

    /// SHA-256 of the configuration, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let text = toml::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn program(&self) -> Result<ContactProgram> {
        self.stimulus.program.parse()
    }

    pub fn polarity_programs(&self) -> Result<Vec<ContactProgram>> {
        self.polarity.programs.iter().map(|p| p.parse()).collect()
    }

    pub fn sigma_table(&self) -> SigmaTable {
        let mut t = SigmaTable::default();
        for (&tissue, &s) in &self.sigma {
            t.set(tissue, s);
        }
        t
    }

    pub fn lead_model(&self) -> Option<LeadModel> {
        self.lead.enabled.then(|| self.lead.model())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
            boundary: self.solver.boundary,
            far_field_center_mm: None,
        }
    }

    pub fn waveform(&self) -> Result<StimulusWaveform> {
        let s = &self.stimulus;
        Ok(StimulusWaveform {
            amplitude_ma: s.amplitude_ma,
            pulse_width_us: s.pulse_width_us,
            frequency_hz: s.frequency_hz,
            n_pulses: s.n_pulses,
            onset_ms: s.onset_ms,
            shape: s.shape,
            program: self.program()?,
        })
    }

    /// Load or generate the labelled volume, with the lead rasterized in.
    pub fn build_volume(&self) -> Result<TissueVolume> {
        let sigma = self.sigma_table();
        let v = &self.volume;
        let base = match &v.path {
            Some(p) => read_volume(p, sigma)?,
            None => {
                let grid = Grid::centered_cube(v.dims, v.spacing_mm)?;
                match v.phantom {
                    PhantomKind::PointSource => {
                        return Ok(point_source_volume(v.dims, v.spacing_mm, v.background_sigma)?.0)
                    }
                    PhantomKind::Homogeneous => match self.lead_model() {
                        Some(lead) => return homogeneous_lead_volume(grid, &lead, v.background_sigma),
                        None => TissueVolume::filled(
                            grid,
                            crate::volume::Label::Background,
                            SigmaTable::homogeneous(v.background_sigma),
                        )?,
                    },
                    PhantomKind::CsfSlab => {
                        let layout =
                            SlabLayout { csf_x_mm: (v.csf_x_mm[0], v.csf_x_mm[1]), gray_below_x_mm: v.gray_below_x_mm };
                        let lead = self
                            .lead_model()
                            .ok_or_else(|| Error::Config("the CSF-slab phantom needs a lead".into()))?;
                        return csf_slab_volume(grid, &lead, &layout);
                    }
                }
            }
        };
        match self.lead_model() {
            Some(lead) if base.contacts().is_empty() => rasterize_lead(&base, &lead),
            _ => Ok(base),
        }
    }

    /// Tract-file fibers followed by the synthetic ones, with their names.
    pub fn tracts(&self) -> Result<Vec<FiberPath>> {
        let mut out = match &self.tracts.path {
            Some(p) => read_tracts(p)?,
            None => Vec::new(),
        };
        if !self.tracts.synthetic.is_empty() {
            let lead = self.lead_model().ok_or_else(|| Error::Config("synthetic tracts need a lead".into()))?;
            for t in &self.tracts.synthetic {
                if t.contact >= lead.contacts.len() {
                    return Err(Error::Config(format!(
                        "tract `{}` refers to missing contact {}",
                        t.name,
                        t.contact + 1
                    )));
                }
                out.push(t.tract().build(&lead, t.name.clone()));
            }
        }
        Ok(out)
    }

    pub fn tract(&self, tracts: &[FiberPath], index: usize) -> Result<FiberPath> {
        tracts
            .get(index)
            .cloned()
            .ok_or_else(|| Error::Config(format!("tract index {index} out of range ({} tracts)", tracts.len())))
    }

    pub fn sweep_setup(&self, input_amplitude_na: f64) -> SweepSetup {
        SweepSetup {
            cable: self.cable.clone(),
            input: self.input.template(input_amplitude_na),
            n_shifts: self.sweep.n_shifts,
            tail_ms: self.sweep.tail_ms,
            dt_ms: self.sweep.dt_ms,
            blanking_ms: self.sweep.blanking_ms,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::from_toml("[stimulus]\namplitude = 3\n"), Err(Error::Config(_))));
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = RunConfig::from_toml(
            "seed = 9\n[stimulus]\nprogram = \"C2-\"\namplitude_ma = 1.5\n[sigma]\nwhite = 0.07\n[cable]\ngating = \"stochastic\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.program().unwrap(), ContactProgram::unipolar(1));
        assert_eq!(cfg.sigma_table().get(Tissue::White), Some(0.07));
        assert_eq!(cfg.cable.gating, crate::cable::GatingMode::Stochastic);
        assert_eq!(cfg.waveform().unwrap().amplitude_ma, 1.5);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("[stimulus]\nprogram = \"C3+\"\n").is_err());
        assert!(RunConfig::from_toml("[stimulus]\npulse_width_us = 10000\n").is_err());
        assert!(RunConfig::from_toml("[vta]\namplitudes_ma = [-1.0]\n").is_err());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::default();
        let b = RunConfig { output_dir: Some("elsewhere".into()), ..a.clone() };
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn default_tracts_are_at_requested_distances() {
        let cfg = RunConfig::default();
        let lead = cfg.lead_model().unwrap();
        let tracts = cfg.tracts().unwrap();
        assert_eq!(tracts.len(), 4);
        for (t, d) in tracts.iter().zip([1.0, 2.0, 3.0]) {
            let m = t.points.iter().map(|p| lead.distance_to_surface(p)).fold(f64::INFINITY, f64::min);
            assert!((m - d).abs() < 1e-6);
        }
    }
}
