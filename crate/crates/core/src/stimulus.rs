//! Contact programs and pulse-train current waveforms.
//!
//! Sign convention: current is the current delivered into tissue through a
//! contact, so a cathode carries negative current during the cathodic phase.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContactRole {
    Cathode,
    Anode,
    Floating,
}

/// Role of each contact (0-based index, displayed 1-based as `C1`, `C2`, ...).
/// Contacts that are not listed float.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ContactProgram {
    roles: BTreeMap<u8, ContactRole>,
}

impl ContactProgram {
    pub fn new(roles: impl IntoIterator<Item = (u8, ContactRole)>) -> Self {
        Self { roles: roles.into_iter().collect() }
    }

    pub fn unipolar(cathode: u8) -> Self {
        Self::new([(cathode, ContactRole::Cathode)])
    }

    pub fn bipolar(cathode: u8, anode: u8) -> Self {
        Self::new([(cathode, ContactRole::Cathode), (anode, ContactRole::Anode)])
    }

    pub fn role(&self, contact: u8) -> ContactRole {
        self.roles.get(&contact).copied().unwrap_or(ContactRole::Floating)
    }

    pub fn roles(&self) -> impl Iterator<Item = (u8, ContactRole)> + '_ {
        self.roles.iter().map(|(&k, &r)| (k, r))
    }

    pub fn cathodes(&self) -> Vec<u8> {
        self.with_role(ContactRole::Cathode)
    }

    pub fn anodes(&self) -> Vec<u8> {
        self.with_role(ContactRole::Anode)
    }

    fn with_role(&self, role: ContactRole) -> Vec<u8> {
        self.roles.iter().filter(|(_, &r)| r == role).map(|(&k, _)| k).collect()
    }

    pub fn is_bipolar(&self) -> bool {
        !self.anodes().is_empty()
    }

    /// Same contacts with cathodes and anodes exchanged.
    pub fn reversed(&self) -> Self {
        Self::new(self.roles.iter().map(|(&k, &r)| {
            let flipped = match r {
                ContactRole::Cathode => ContactRole::Anode,
                ContactRole::Anode => ContactRole::Cathode,
                ContactRole::Floating => ContactRole::Floating,
            };
            (k, flipped)
        }))
    }

    pub fn validate(&self) -> Result<()> {
        if self.cathodes().is_empty() {
            return Err(Error::Program(format!("program `{self}` has no cathode")));
        }
        Ok(())
    }

    /// Current through each active contact per 1 mA of program current.
    ///
    /// The program current is split evenly over the cathodes; anodes return
    /// it evenly, so bipolar programs sum to zero. Unipolar programs return
    /// through the outer boundary.
    pub fn unit_currents(&self) -> Vec<(u8, f64)> {
        let cathodes = self.cathodes();
        let anodes = self.anodes();
        let mut out: Vec<(u8, f64)> = cathodes.iter().map(|&k| (k, 1.0 / cathodes.len() as f64)).collect();
        out.extend(anodes.iter().map(|&k| (k, -1.0 / anodes.len() as f64)));
        out
    }

    /// File-name friendly tag, e.g. `C3m_C4p`.
    pub fn slug(&self) -> String {
        self.roles
            .iter()
            .filter(|(_, &r)| r != ContactRole::Floating)
            .map(|(&k, &r)| format!("C{}{}", k as usize + 1, if r == ContactRole::Cathode { 'm' } else { 'p' }))
            .collect::<Vec<_>>()
            .join("_")
    }
}

impl fmt::Display for ContactProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .roles
            .iter()
            .filter(|(_, &r)| r != ContactRole::Floating)
            .map(|(&k, &r)| format!("C{}{}", k as usize + 1, if r == ContactRole::Cathode { '-' } else { '+' }))
            .collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for ContactProgram {
    type Err = Error;

    /// Parses `"C3-,C4+"` style programs.
    fn from_str(s: &str) -> Result<Self> {
        let mut roles = BTreeMap::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let bad = || Error::Program(format!("cannot parse contact `{tok}` (expected e.g. C3-)"));
            let body = tok.strip_prefix(['C', 'c']).ok_or_else(bad)?;
            let (num, sign) = body.split_at(body.len().checked_sub(1).ok_or_else(bad)?);
            let role = match sign {
                "-" => ContactRole::Cathode,
                "+" => ContactRole::Anode,
                _ => return Err(bad()),
            };
            let k: u8 = num.parse().ok().filter(|&k| k >= 1).ok_or_else(bad)?;
            if roles.insert(k - 1, role).is_some() {
                return Err(Error::Program(format!("contact C{k} listed twice")));
            }
        }
        Ok(Self { roles })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PulseShape {
    #[default]
    RectangularMonophasic,
    ChargeBalancedBiphasic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StimulusWaveform {
    pub amplitude_ma: f64,
    pub pulse_width_us: f64,
    pub frequency_hz: f64,
    pub n_pulses: usize,
    pub onset_ms: f64,
    pub shape: PulseShape,
    pub program: ContactProgram,
}

impl StimulusWaveform {
    pub const DEFAULT_N_PULSES: usize = 4;

    pub fn new(amplitude_ma: f64, pulse_width_us: f64, frequency_hz: f64, program: ContactProgram) -> Self {
        Self {
            amplitude_ma,
            pulse_width_us,
            frequency_hz,
            n_pulses: Self::DEFAULT_N_PULSES,
            onset_ms: 0.0,
            shape: PulseShape::RectangularMonophasic,
            program,
        }
    }

    pub fn period_ms(&self) -> f64 {
        1e3 / self.frequency_hz
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.frequency_hz
    }

    /// Time from the first pulse onset to the end of the last period.
    pub fn train_duration_ms(&self) -> f64 {
        self.n_pulses as f64 * self.period_ms()
    }

    pub fn pulse_onsets_ms(&self) -> Vec<f64> {
        (0..self.n_pulses).map(|k| self.onset_ms + k as f64 * self.period_ms()).collect()
    }

    /// Signed current of the cathodes taken together, in mA; this is the
    /// factor that scales a unit-current field solution.
    pub fn program_current_ma(&self, t_s: f64) -> f64 {
        let pw = self.pulse_width_us * 1e-6;
        let rel = t_s - self.onset_ms * 1e-3;
        if rel < 0.0 {
            return 0.0;
        }
        let period = self.period_s();
        let k = (rel / period).floor();
        if k >= self.n_pulses as f64 {
            return 0.0;
        }
        let phase = rel - k * period;
        if phase < pw {
            -self.amplitude_ma
        } else if self.shape == PulseShape::ChargeBalancedBiphasic && phase < 2.0 * pw {
            self.amplitude_ma
        } else {
            0.0
        }
    }

    /// Current through every active contact at time `t_s`.
    pub fn current_at(&self, t_s: f64) -> BTreeMap<u8, f64> {
        let i = self.program_current_ma(t_s);
        self.program.unit_currents().into_iter().map(|(k, u)| (k, u * i + 0.0)).collect()
    }

    /// Program current sampled at `t = j·dt` for `j < n`, with pulse edges
    /// snapped to the nearest sample.
    pub fn sampled_program_current(&self, dt_s: f64, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        let width = ((self.pulse_width_us * 1e-6 / dt_s).round() as usize).max(1);
        let phases: &[f64] = match self.shape {
            PulseShape::RectangularMonophasic => &[-1.0],
            PulseShape::ChargeBalancedBiphasic => &[-1.0, 1.0],
        };
        for onset in self.pulse_onsets_ms() {
            let start = (onset * 1e-3 / dt_s).round() as usize;
            for (p, sign) in phases.iter().enumerate() {
                let a = start + p * width;
                for v in out.iter_mut().skip(a).take(width) {
                    *v = sign * self.amplitude_ma;
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let mut diags = Vec::new();
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            diags.push(Diagnostic::new("frequency_hz", "must be positive"));
        }
        if !(self.pulse_width_us > 0.0) {
            diags.push(Diagnostic::new("pulse_width_us", "must be positive"));
        }
        if !(self.amplitude_ma >= 0.0 && self.amplitude_ma.is_finite()) {
            diags.push(Diagnostic::new("amplitude_ma", "must be non-negative"));
        }
        if self.n_pulses == 0 {
            diags.push(Diagnostic::new("n_pulses", "at least one pulse is required"));
        }
        if !(self.onset_ms >= 0.0) {
            diags.push(Diagnostic::new("onset_ms", "must be non-negative"));
        }
        if self.frequency_hz > 0.0 {
            let period_us = 1e6 / self.frequency_hz;
            let occupied = match self.shape {
                PulseShape::RectangularMonophasic => self.pulse_width_us,
                PulseShape::ChargeBalancedBiphasic => 2.0 * self.pulse_width_us,
            };
            if occupied >= period_us {
                diags.push(Diagnostic::new(
                    "pulse_width_us",
                    format!("pulse occupies {occupied} us, not shorter than the period {period_us:.3} us"),
                ));
            }
        }
        if self.program.cathodes().is_empty() {
            diags.push(Diagnostic::new("program", "no cathode"));
        }
        if self.program.is_bipolar() {
            let net: f64 = self.program.unit_currents().iter().map(|(_, u)| u).sum();
            if net.abs() > 1e-12 {
                diags.push(Diagnostic::new("program", format!("bipolar currents sum to {net}")));
            }
        }
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::Waveform(diags))
        }
    }
}
