//! Multi-compartment Hodgkin–Huxley cable driven by an extracellular
//! potential and an intracellular axonal input.
//!
//! Units inside the cable are mV, ms, μA, mS, μF and cm² for membrane
//! areas; the extracellular drive is given in volts and the injected input
//! in nA.

pub mod kinetics;
pub mod stochastic;

use std::io::Write;
use std::ops::ControlFlow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PotentialSeries;
use kinetics::{advance_gate, temperature_factor, Rates};
use stochastic::ChannelPopulation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GatingMode {
    #[default]
    Deterministic,
    Stochastic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CableConfig {
    pub length_mm: f64,
    pub n_comp: usize,
    pub diameter_um: f64,
    pub axial_resistivity_ohm_cm: f64,
    pub membrane_capacitance_uf_cm2: f64,
    pub g_na_ms_cm2: f64,
    pub g_k_ms_cm2: f64,
    pub g_leak_ms_cm2: f64,
    pub e_na_mv: f64,
    pub e_k_mv: f64,
    pub e_leak_mv: f64,
    pub temperature_c: f64,
    pub gating: GatingMode,
    /// Channels per μm² of membrane (stochastic mode).
    pub na_channel_density_um2: f64,
    pub k_channel_density_um2: f64,
    /// Multiplies both channel counts; the maximal conductances are kept.
    pub channel_count_scale: f64,
}

impl Default for CableConfig {
    fn default() -> Self {
        Self {
            length_mm: 8.0,
            n_comp: 40,
            diameter_um: 2.0,
            axial_resistivity_ohm_cm: 100.0,
            membrane_capacitance_uf_cm2: 1.0,
            g_na_ms_cm2: 120.0,
            g_k_ms_cm2: 36.0,
            g_leak_ms_cm2: 0.3,
            e_na_mv: 50.0,
            e_k_mv: -77.0,
            e_leak_mv: -54.387,
            temperature_c: kinetics::REFERENCE_TEMPERATURE_C,
            gating: GatingMode::Deterministic,
            na_channel_density_um2: 60.0,
            k_channel_density_um2: 18.0,
            channel_count_scale: 1.0,
        }
    }
}

impl CableConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("cable: {m}")));
        if self.n_comp < 3 {
            return bad(format!("n_comp must be at least 3, got {}", self.n_comp));
        }
        for (name, v) in [
            ("length_mm", self.length_mm),
            ("diameter_um", self.diameter_um),
            ("axial_resistivity_ohm_cm", self.axial_resistivity_ohm_cm),
            ("membrane_capacitance_uf_cm2", self.membrane_capacitance_uf_cm2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in
            [("g_na_ms_cm2", self.g_na_ms_cm2), ("g_k_ms_cm2", self.g_k_ms_cm2), ("g_leak_ms_cm2", self.g_leak_ms_cm2)]
        {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.gating == GatingMode::Stochastic
            && !(self.channel_count_scale > 0.0
                && self.na_channel_density_um2 >= 0.0
                && self.k_channel_density_um2 >= 0.0)
        {
            return bad("channel densities must be non-negative and the count scale positive".into());
        }
        Ok(())
    }

    pub fn compartment_length_um(&self) -> f64 {
        self.length_mm * 1e3 / self.n_comp as f64
    }

    /// Lateral membrane area of one compartment, cm².
    pub fn compartment_area_cm2(&self) -> f64 {
        std::f64::consts::PI * self.diameter_um * 1e-4 * self.compartment_length_um() * 1e-4
    }

    /// Conductance between neighbouring compartments, mS.
    pub fn axial_conductance_ms(&self) -> f64 {
        let d = self.diameter_um * 1e-4;
        let l = self.compartment_length_um() * 1e-4;
        std::f64::consts::PI * d * d / 4.0 / (self.axial_resistivity_ohm_cm * l) * 1e3
    }

    /// Channels per compartment `(Na, K)` in stochastic mode.
    pub fn channel_counts(&self) -> (u32, u32) {
        let area_um2 = self.compartment_area_cm2() * 1e8;
        let count = |density: f64| (density * area_um2 * self.channel_count_scale).round() as u32;
        (count(self.na_channel_density_um2), count(self.k_channel_density_um2))
    }

    /// Detection compartment: three quarters of the way along the traffic.
    pub fn detection_compartment(&self) -> usize {
        (3 * self.n_comp) / 4
    }
}

/// Rectangular intracellular current pulse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxonalInput {
    pub compartment: usize,
    pub amplitude_na: f64,
    pub duration_ms: f64,
    pub onset_ms: f64,
}

impl Default for AxonalInput {
    fn default() -> Self {
        Self { compartment: 0, amplitude_na: 0.0, duration_ms: 1.0, onset_ms: 1.0 }
    }
}

impl AxonalInput {
    pub fn with_amplitude(&self, amplitude_na: f64) -> Self {
        Self { amplitude_na, ..self.clone() }
    }

    pub fn with_onset(&self, onset_ms: f64) -> Self {
        Self { onset_ms, ..self.clone() }
    }

    fn validate(&self, n_comp: usize) -> Result<()> {
        if self.compartment >= n_comp {
            return Err(Error::Config(format!("input compartment {} outside 0..{n_comp}", self.compartment)));
        }
        if !(self.duration_ms > 0.0) {
            return Err(Error::Config(format!("input duration must be positive, got {}", self.duration_ms)));
        }
        if !self.amplitude_na.is_finite() || !self.onset_ms.is_finite() {
            return Err(Error::Config("input amplitude and onset must be finite".into()));
        }
        Ok(())
    }

    fn active(&self, t_ms: f64) -> bool {
        t_ms >= self.onset_ms && t_ms < self.onset_ms + self.duration_ms
    }
}

/// Extracellular potential along the cable, volts, held constant over each
/// sample interval and zero after the last sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtracellularDrive {
    pub dt_ms: f64,
    pub n_comp: usize,
    /// Time-major, `n_samples × n_comp`.
    pub volts: Vec<f64>,
}

impl ExtracellularDrive {
    pub fn new(dt_ms: f64, n_comp: usize, volts: Vec<f64>) -> Result<Self> {
        if !(dt_ms > 0.0) || n_comp == 0 || !volts.len().is_multiple_of(n_comp) {
            return Err(Error::Config(format!(
                "drive of {} values does not split into {n_comp} columns with dt {dt_ms} ms",
                volts.len()
            )));
        }
        if volts.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("drive contains non-finite values".into()));
        }
        Ok(Self { dt_ms, n_comp, volts })
    }

    pub fn from_series(series: &PotentialSeries) -> Result<Self> {
        Self::new(series.dt_s * 1e3, series.n_points, series.volts.clone())
    }

    pub fn n_samples(&self) -> usize {
        self.volts.len() / self.n_comp
    }

    pub fn span_ms(&self) -> f64 {
        self.n_samples() as f64 * self.dt_ms
    }

    /// End of the last sample with any non-zero potential.
    pub fn active_until_ms(&self) -> f64 {
        let last = self.volts.chunks(self.n_comp).rposition(|r| r.iter().any(|&v| v != 0.0));
        last.map_or(0.0, |t| (t + 1) as f64 * self.dt_ms)
    }

    pub fn row(&self, t: usize) -> Option<&[f64]> {
        (t < self.n_samples()).then(|| &self.volts[t * self.n_comp..(t + 1) * self.n_comp])
    }

    /// Same drive with the compartment order reversed.
    pub fn mirrored(&self) -> Self {
        let volts = self.volts.chunks(self.n_comp).flat_map(|r| r.iter().rev().copied()).collect();
        Self { volts, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gating {
    Deterministic { m: Vec<f64>, h: Vec<f64>, n: Vec<f64> },
    Stochastic(Vec<ChannelPopulation>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CableState {
    pub v_mv: Vec<f64>,
    pub gating: Gating,
    pub t_ms: f64,
}

/// Membrane potentials, time-major `n_samples × n_comp`, mV.
#[derive(Clone, Debug, PartialEq)]
pub struct MembraneTrace {
    pub dt_ms: f64,
    pub n_comp: usize,
    pub mv: Vec<f64>,
}

impl MembraneTrace {
    pub fn n_samples(&self) -> usize {
        self.mv.len() / self.n_comp
    }

    pub fn time_ms(&self, sample: usize) -> f64 {
        sample as f64 * self.dt_ms
    }

    pub fn at(&self, sample: usize, comp: usize) -> f64 {
        self.mv[sample * self.n_comp + comp]
    }

    pub fn column(&self, comp: usize) -> Vec<f64> {
        self.mv.iter().skip(comp).step_by(self.n_comp).copied().collect()
    }

    pub fn max(&self) -> f64 {
        self.mv.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Long-format CSV: `time_ms,compartment,mv`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_ms", "compartment", "mv"])?;
        for s in 0..self.n_samples() {
            for c in 0..self.n_comp {
                w.write_record([format!("{:.4}", self.time_ms(s)), c.to_string(), format!("{:.6}", self.at(s, c))])?;
            }
        }
        w.flush().map_err(|e| Error::io("writing trace", e))
    }
}

/// Upward threshold crossing at one compartment.
#[derive(Clone, Debug, PartialEq)]
pub struct FiringCriterion {
    pub compartment: usize,
    pub threshold_mv: f64,
    /// Crossings at or before this time are ignored.
    pub after_ms: f64,
    /// Crossings inside any `[start, end]` window are ignored.
    pub blanking_ms: Vec<(f64, f64)>,
}

impl FiringCriterion {
    pub fn for_cable(config: &CableConfig) -> Self {
        Self { compartment: config.detection_compartment(), threshold_mv: 0.0, after_ms: 0.0, blanking_ms: Vec::new() }
    }

    pub fn after(mut self, t_ms: f64) -> Self {
        self.after_ms = t_ms;
        self
    }

    /// Blank `width_ms` after each of `onsets_ms`.
    pub fn blanking(mut self, onsets_ms: &[f64], width_ms: f64) -> Self {
        if width_ms > 0.0 {
            self.blanking_ms = onsets_ms.iter().map(|&t| (t, t + width_ms)).collect();
        }
        self
    }

    fn counts(&self, t_ms: f64) -> bool {
        t_ms > self.after_ms && !self.blanking_ms.iter().any(|&(a, b)| t_ms >= a && t_ms <= b)
    }
}

struct CrossingDetector<'a> {
    criterion: &'a FiringCriterion,
    prev: Option<(f64, f64)>,
}

impl<'a> CrossingDetector<'a> {
    fn new(criterion: &'a FiringCriterion) -> Self {
        Self { criterion, prev: None }
    }

    fn feed(&mut self, t_ms: f64, v: f64) -> Option<f64> {
        let thr = self.criterion.threshold_mv;
        let hit = match self.prev {
            Some((t0, v0)) if v0 < thr && v >= thr => {
                let tc = t0 + (t_ms - t0) * (thr - v0) / (v - v0);
                self.criterion.counts(tc).then_some(tc)
            }
            _ => None,
        };
        self.prev = Some((t_ms, v));
        hit
    }
}

/// Time of the first counted upward crossing, linearly interpolated.
pub fn first_crossing(trace: &MembraneTrace, criterion: &FiringCriterion) -> Option<f64> {
    let mut det = CrossingDetector::new(criterion);
    (0..trace.n_samples()).find_map(|s| det.feed(trace.time_ms(s), trace.at(s, criterion.compartment)))
}

pub fn detect_firing(trace: &MembraneTrace, criterion: &FiringCriterion) -> bool {
    first_crossing(trace, criterion).is_some()
}

/// A cable with its derived per-compartment constants.
#[derive(Clone, Debug)]
pub struct Cable {
    config: CableConfig,
    cm_uf: f64,
    g_axial: f64,
    g_na: f64,
    g_k: f64,
    g_leak: f64,
    phi: f64,
    channels: (u32, u32),
    v_rest: f64,
}

impl Cable {
    pub fn new(config: &CableConfig) -> Result<Self> {
        config.validate()?;
        let area = config.compartment_area_cm2();
        let mut cable = Self {
            config: config.clone(),
            cm_uf: config.membrane_capacitance_uf_cm2 * area,
            g_axial: config.axial_conductance_ms(),
            g_na: config.g_na_ms_cm2 * area,
            g_k: config.g_k_ms_cm2 * area,
            g_leak: config.g_leak_ms_cm2 * area,
            phi: temperature_factor(config.temperature_c),
            channels: config.channel_counts(),
            v_rest: 0.0,
        };
        cable.v_rest = cable.find_rest()?;
        Ok(cable)
    }

    pub fn config(&self) -> &CableConfig {
        &self.config
    }

    pub fn n_comp(&self) -> usize {
        self.config.n_comp
    }

    pub fn resting_potential_mv(&self) -> f64 {
        self.v_rest
    }

    pub fn axial_conductance_ms(&self) -> f64 {
        self.g_axial
    }

    /// Steady-state ionic current (μA) of one compartment at clamped `v`.
    fn steady_current(&self, v: f64) -> f64 {
        let r = Rates::at(v, 1.0);
        let (m, h, n) = (r.m_inf(), r.h_inf(), r.n_inf());
        self.g_na * m.powi(3) * h * (v - self.config.e_na_mv)
            + self.g_k * n.powi(4) * (v - self.config.e_k_mv)
            + self.g_leak * (v - self.config.e_leak_mv)
    }

    fn find_rest(&self) -> Result<f64> {
        // bracket the zero of the steady-state I-V curve nearest the leak
        // reversal by bisection
        let (mut lo, mut hi) = (-100.0, -40.0);
        if self.steady_current(lo) > 0.0 || self.steady_current(hi) < 0.0 {
            return Err(Error::Config("cable parameters have no resting potential in [-100, -40] mV".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.steady_current(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn rest_state(&self, rng: &mut ChaCha8Rng) -> CableState {
        let n = self.n_comp();
        let r = Rates::at(self.v_rest, self.phi);
        let gating = match self.config.gating {
            GatingMode::Deterministic => {
                Gating::Deterministic { m: vec![r.m_inf(); n], h: vec![r.h_inf(); n], n: vec![r.n_inf(); n] }
            }
            GatingMode::Stochastic => Gating::Stochastic(
                (0..n).map(|_| ChannelPopulation::steady_state(&r, self.channels.0, self.channels.1, rng)).collect(),
            ),
        };
        CableState { v_mv: vec![self.v_rest; n], gating, t_ms: 0.0 }
    }

    /// Advance `state` by `dt_ms` with extracellular potentials `ue_volts`
    /// and injected currents `injected_na`, one value per compartment.
    pub fn step(
        &self,
        state: &mut CableState,
        ue_volts: &[f64],
        injected_na: &[f64],
        dt_ms: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let n = self.n_comp();
        assert_eq!(ue_volts.len(), n, "drive row length");
        assert_eq!(injected_na.len(), n, "injection length");
        let mut scratch = Scratch::new(n);
        let ue_mv: Vec<f64> = ue_volts.iter().map(|v| v * 1e3).collect();
        let inj_ua: Vec<f64> = injected_na.iter().map(|i| i * 1e-3).collect();
        self.step_inner(state, &ue_mv, &inj_ua, dt_ms, state.t_ms + dt_ms, rng, &mut scratch)
    }

    #[allow(clippy::too_many_arguments)]
    fn step_inner(
        &self,
        state: &mut CableState,
        ue_mv: &[f64],
        inj_ua: &[f64],
        dt: f64,
        t_end: f64,
        rng: &mut ChaCha8Rng,
        s: &mut Scratch,
    ) -> Result<()> {
        let n = self.n_comp();
        let c = &self.config;
        let v = &mut state.v_mv;

        // conductances from the gates advanced at the old potential
        match &mut state.gating {
            Gating::Deterministic { m, h, n: ng } => {
                for i in 0..n {
                    let r = Rates::at(v[i], self.phi);
                    m[i] = advance_gate(m[i], r.alpha_m, r.beta_m, dt);
                    h[i] = advance_gate(h[i], r.alpha_h, r.beta_h, dt);
                    ng[i] = advance_gate(ng[i], r.alpha_n, r.beta_n, dt);
                    s.g_na[i] = self.g_na * m[i].powi(3) * h[i];
                    s.g_k[i] = self.g_k * ng[i].powi(4);
                }
            }
            Gating::Stochastic(pops) => {
                let (nna, nk) = self.channels;
                let per_na = if nna > 0 { self.g_na / nna as f64 } else { 0.0 };
                let per_k = if nk > 0 { self.g_k / nk as f64 } else { 0.0 };
                for i in 0..n {
                    let r = Rates::at(v[i], self.phi);
                    pops[i].step(&r, dt, rng);
                    s.g_na[i] = per_na * pops[i].open_na() as f64;
                    s.g_k[i] = per_k * pops[i].open_k() as f64;
                }
            }
        }

        let ga = self.g_axial;
        let cdt = self.cm_uf / dt;
        for i in 0..n {
            let (lap, neighbours) = if i == 0 {
                (ue_mv[1] - ue_mv[0], 1.0)
            } else if i == n - 1 {
                (ue_mv[n - 2] - ue_mv[n - 1], 1.0)
            } else {
                ((ue_mv[i - 1] - ue_mv[i]) + (ue_mv[i + 1] - ue_mv[i]), 2.0)
            };
            s.diag[i] = cdt + s.g_na[i] + s.g_k[i] + self.g_leak + ga * neighbours;
            s.rhs[i] = cdt * v[i]
                + s.g_na[i] * c.e_na_mv
                + s.g_k[i] * c.e_k_mv
                + self.g_leak * c.e_leak_mv
                + inj_ua[i]
                + ga * lap;
        }
        solve_mirror_tridiagonal(&s.diag, -ga, &mut s.rhs, &mut s.d2, v);

        state.t_ms = t_end;
        if let Some(k) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::BlowUp { compartment: k, time_ms: t_end });
        }
        Ok(())
    }

    /// Run from rest for `duration_ms`, calling `observe(step, t_ms, v)` at
    /// t = 0 and after every step until it breaks.
    pub fn run<F>(
        &self,
        drive: Option<&ExtracellularDrive>,
        input: &AxonalInput,
        duration_ms: f64,
        dt_ms: f64,
        seed: u64,
        mut observe: F,
    ) -> Result<()>
    where
        F: FnMut(usize, f64, &[f64]) -> ControlFlow<()>,
    {
        let n = self.n_comp();
        input.validate(n)?;
        if !(dt_ms > 0.0 && duration_ms > 0.0) {
            return Err(Error::Config(format!("dt ({dt_ms} ms) and duration ({duration_ms} ms) must be positive")));
        }
        if let Some(d) = drive {
            if d.n_comp != n {
                return Err(Error::Config(format!("drive has {} columns for a {n}-compartment cable", d.n_comp)));
            }
            if dt_ms > d.dt_ms * (1.0 + 1e-9) {
                return Err(Error::Config(format!("dt {dt_ms} ms exceeds the drive interval {} ms", d.dt_ms)));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = self.rest_state(&mut rng);
        let mut scratch = Scratch::new(n);
        let zeros = vec![0.0; n];
        let mut ue_mv = vec![0.0; n];
        let mut current_row = usize::MAX;
        let mut inj = vec![0.0; n];

        if observe(0, 0.0, &state.v_mv).is_break() {
            return Ok(());
        }
        let steps = (duration_ms / dt_ms).round() as usize;
        for k in 0..steps {
            let t_mid = (k as f64 + 0.5) * dt_ms;
            let t_end = (k + 1) as f64 * dt_ms;
            if let Some(d) = drive {
                let row = (t_mid / d.dt_ms).floor() as usize;
                if row != current_row {
                    current_row = row;
                    let src = d.row(row).unwrap_or(&zeros);
                    for (u, x) in ue_mv.iter_mut().zip(src) {
                        *u = x * 1e3;
                    }
                }
            }
            inj[input.compartment] = if input.active(t_mid) { input.amplitude_na * 1e-3 } else { 0.0 };
            self.step_inner(&mut state, &ue_mv, &inj, dt_ms, t_end, &mut rng, &mut scratch)?;
            if observe(k + 1, t_end, &state.v_mv).is_break() {
                break;
            }
        }
        Ok(())
    }

    /// Full trace recorded every `record_dt_ms` (rounded to whole steps).
    pub fn trace(
        &self,
        drive: Option<&ExtracellularDrive>,
        input: &AxonalInput,
        duration_ms: f64,
        dt_ms: f64,
        record_dt_ms: f64,
        seed: u64,
    ) -> Result<MembraneTrace> {
        let stride = ((record_dt_ms / dt_ms).round() as usize).max(1);
        let mut mv = Vec::new();
        self.run(drive, input, duration_ms, dt_ms, seed, |k, _, v| {
            if k % stride == 0 {
                mv.extend_from_slice(v);
            }
            ControlFlow::Continue(())
        })?;
        Ok(MembraneTrace { dt_ms: stride as f64 * dt_ms, n_comp: self.n_comp(), mv })
    }

    /// First counted crossing time, stopping the run as soon as it happens.
    ///
    /// In deterministic mode the run also stops once drive and input are
    /// over and every compartment is back within [`QUIESCENT_MV`] of rest,
    /// since no spike can start from there.
    pub fn firing_time(
        &self,
        drive: Option<&ExtracellularDrive>,
        input: &AxonalInput,
        duration_ms: f64,
        dt_ms: f64,
        seed: u64,
        criterion: &FiringCriterion,
    ) -> Result<Option<f64>> {
        if criterion.compartment >= self.n_comp() {
            return Err(Error::Config(format!("detection compartment {} outside the cable", criterion.compartment)));
        }
        let stimuli_end = drive.map_or(0.0, |d| d.active_until_ms()).max(input.onset_ms + input.duration_ms);
        let can_settle = self.config.gating == GatingMode::Deterministic;
        let rest = self.v_rest;
        let mut det = CrossingDetector::new(criterion);
        let mut hit = None;
        self.run(drive, input, duration_ms, dt_ms, seed, |k, t, v| {
            if let Some(tc) = det.feed(t, v[criterion.compartment]) {
                hit = Some(tc);
                return ControlFlow::Break(());
            }
            if can_settle && t > stimuli_end && k % 100 == 0 && v.iter().all(|x| (x - rest).abs() < QUIESCENT_MV) {
                return ControlFlow::Break(());
            }
            ControlFlow::Continue(())
        })?;
        Ok(hit)
    }
}

/// Distance from rest below which a deterministic cable counts as settled.
pub const QUIESCENT_MV: f64 = 0.5;
pub const DEFAULT_DT_MS: f64 = 1e-3;
pub const DEFAULT_RECORD_DT_MS: f64 = 5e-3;

/// Simulate from rest and record every 5 μs.
pub fn simulate(
    config: &CableConfig,
    drive: Option<&ExtracellularDrive>,
    input: &AxonalInput,
    duration_ms: f64,
    dt_ms: f64,
    seed: u64,
) -> Result<MembraneTrace> {
    Cable::new(config)?.trace(drive, input, duration_ms, dt_ms, DEFAULT_RECORD_DT_MS, seed)
}

struct Scratch {
    g_na: Vec<f64>,
    g_k: Vec<f64>,
    diag: Vec<f64>,
    rhs: Vec<f64>,
    d2: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self { g_na: vec![0.0; n], g_k: vec![0.0; n], diag: vec![0.0; n], rhs: vec![0.0; n], d2: vec![0.0; n] }
    }
}

/// Solve a symmetric tridiagonal system with constant off-diagonal `off`,
/// eliminating from both ends toward the middle so that reflecting the
/// system reflects the solution bit for bit.
fn solve_mirror_tridiagonal(diag: &[f64], off: f64, rhs: &mut [f64], d2: &mut [f64], x: &mut [f64]) {
    let n = diag.len();
    let (top, bottom) = if n % 2 == 1 { (n / 2, n / 2) } else { (n / 2 - 1, n / 2) };
    // eliminate rows 0..top from above and rows bottom+1.. from below;
    // for odd n the middle row is handled separately
    let upper_end = if n % 2 == 1 { top } else { top + 1 };
    d2[0] = diag[0];
    for i in 1..upper_end {
        let w = off / d2[i - 1];
        d2[i] = diag[i] - w * off;
        rhs[i] -= w * rhs[i - 1];
    }
    d2[n - 1] = diag[n - 1];
    let lower_start = if n % 2 == 1 { bottom + 1 } else { bottom };
    for i in (lower_start..n - 1).rev() {
        let w = off / d2[i + 1];
        d2[i] = diag[i] - w * off;
        rhs[i] -= w * rhs[i + 1];
    }

    if n % 2 == 1 {
        let k = top;
        let wa = off / d2[k - 1];
        let wb = off / d2[k + 1];
        let denom = diag[k] - (wa * off + wb * off);
        x[k] = (rhs[k] - (wa * rhs[k - 1] + wb * rhs[k + 1])) / denom;
    } else {
        let (p, q) = (top, bottom);
        let det = d2[p] * d2[q] - off * off;
        x[p] = (rhs[p] * d2[q] - off * rhs[q]) / det;
        x[q] = (d2[p] * rhs[q] - off * rhs[p]) / det;
    }
    for i in (0..top).rev() {
        x[i] = (rhs[i] - off * x[i + 1]) / d2[i];
    }
    for i in bottom + 1..n {
        x[i] = (rhs[i] - off * x[i - 1]) / d2[i];
    }
}

/// Result of an input-threshold search.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    /// Smallest amplitude found to fire, nA.
    pub threshold_na: f64,
    /// Final bracket `(no fire, fire)`.
    pub bracket_na: (f64, f64),
    pub evaluations: usize,
    /// Input scaled to `target_fraction × threshold`.
    pub input: AxonalInput,
}

pub const MAX_INPUT_NA: f64 = 1e4;
pub const DEFAULT_TARGET_FRACTION: f64 = 0.9;

/// Bisect the input amplitude (no drive) until the bracket is tighter than
/// `rel_tol` of its upper end. Works in either gating mode; a stochastic
/// cable uses the same `seed` for every evaluation.
pub fn input_threshold(
    config: &CableConfig,
    template: &AxonalInput,
    duration_ms: f64,
    seed: u64,
    rel_tol: f64,
) -> Result<Calibration> {
    input_threshold_near(config, template, duration_ms, seed, rel_tol, None)
}

/// As [`input_threshold`], starting from a guessed bracket `(lo, hi)` that is
/// widened until `lo` does not fire and `hi` does.
pub fn input_threshold_near(
    config: &CableConfig,
    template: &AxonalInput,
    duration_ms: f64,
    seed: u64,
    rel_tol: f64,
    guess: Option<(f64, f64)>,
) -> Result<Calibration> {
    let cable = Cable::new(config)?;
    let criterion = FiringCriterion::for_cable(config).after(template.onset_ms);
    let mut evaluations = 0;
    let mut fires = |amp: f64| -> Result<bool> {
        evaluations += 1;
        Ok(cable
            .firing_time(None, &template.with_amplitude(amp), duration_ms, DEFAULT_DT_MS, seed, &criterion)?
            .is_some())
    };

    let (mut lo, mut hi) = guess.unwrap_or((0.0, 0.01));
    while lo > 0.0 && fires(lo)? {
        hi = lo;
        lo = if lo < 1e-3 { 0.0 } else { lo / 2.0 };
    }
    if lo == 0.0 && fires(0.0)? {
        return Err(Error::Calibration("the cable fires without any input".into()));
    }
    while !fires(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_INPUT_NA {
            return Err(Error::Calibration(format!("no firing up to {MAX_INPUT_NA} nA")));
        }
    }
    while (hi - lo) / hi >= rel_tol {
        let mid = 0.5 * (lo + hi);
        if fires(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Calibration { threshold_na: hi, bracket_na: (lo, hi), evaluations, input: template.with_amplitude(hi) })
}

/// Threshold within 1 %, then scale the input to `target_fraction` of it.
pub fn calibrate_input(
    config: &CableConfig,
    template: &AxonalInput,
    duration_ms: f64,
    target_fraction: f64,
    seed: u64,
) -> Result<Calibration> {
    if config.gating != GatingMode::Deterministic {
        return Err(Error::Config("input calibration requires deterministic gating".into()));
    }
    if !(target_fraction > 0.0) {
        return Err(Error::Config(format!("target fraction must be positive, got {target_fraction}")));
    }
    let mut cal = input_threshold(config, template, duration_ms, seed, 0.01)?;
    cal.input = template.with_amplitude(target_fraction * cal.threshold_na);
    Ok(cal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(amp: f64) -> AxonalInput {
        AxonalInput { amplitude_na: amp, ..Default::default() }
    }

    #[test]
    fn derived_constants() {
        let c = CableConfig::default();
        assert!((c.compartment_length_um() - 200.0).abs() < 1e-12);
        // pi d^2 / (4 Ra L) = pi (2e-4)^2 / (4 * 100 * 0.02) S
        let ga = std::f64::consts::PI * 4e-8 / 8.0;
        assert!((c.axial_conductance_ms() * 1e-3 - ga).abs() / ga < 1e-12);
        let (na, k) = c.channel_counts();
        assert_eq!(na, (60.0 * std::f64::consts::PI * 2.0 * 200.0f64).round() as u32);
        assert_eq!(k, (18.0 * std::f64::consts::PI * 2.0 * 200.0f64).round() as u32);
        assert_eq!(c.detection_compartment(), 30);
    }

    #[test]
    fn config_validation() {
        assert!(CableConfig { n_comp: 2, ..Default::default() }.validate().is_err());
        assert!(CableConfig { g_k_ms_cm2: -1.0, ..Default::default() }.validate().is_err());
        assert!(CableConfig::default().validate().is_ok());
    }

    #[test]
    fn rest_is_an_equilibrium() {
        let cable = Cable::new(&CableConfig::default()).unwrap();
        let rest = cable.resting_potential_mv();
        assert!((rest + 65.0).abs() < 0.5, "rest {rest}");
        let trace = cable.trace(None, &input(0.0), 50.0, DEFAULT_DT_MS, 0.1, 0).unwrap();
        assert!(trace.mv.iter().all(|v| (v - rest).abs() < 1.0));
        assert!(trace.mv.iter().all(|v| (v - rest).abs() < 1e-6));
    }

    #[test]
    fn uniform_drive_has_no_effect() {
        let cfg = CableConfig::default();
        let cable = Cable::new(&cfg).unwrap();
        let drive = ExtracellularDrive::new(0.005, 40, vec![-2.5; 40 * 400]).unwrap();
        let a = cable.trace(Some(&drive), &input(0.0), 2.0, DEFAULT_DT_MS, 0.005, 0).unwrap();
        let b = cable.trace(None, &input(0.0), 2.0, DEFAULT_DT_MS, 0.005, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tridiagonal_solver_matches_dense() {
        for n in [3usize, 4, 7, 40] {
            let diag: Vec<f64> = (0..n).map(|i| 3.0 + (i as f64 * 0.37).sin()).collect();
            let off = -0.9;
            let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
            let mut rhs: Vec<f64> = (0..n)
                .map(|i| {
                    let mut s = diag[i] * xs[i];
                    if i > 0 {
                        s += off * xs[i - 1];
                    }
                    if i + 1 < n {
                        s += off * xs[i + 1];
                    }
                    s
                })
                .collect();
            let mut d2 = vec![0.0; n];
            let mut x = vec![0.0; n];
            solve_mirror_tridiagonal(&diag, off, &mut rhs, &mut d2, &mut x);
            for i in 0..n {
                assert!((x[i] - xs[i]).abs() < 1e-12, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn suprathreshold_input_propagates() {
        let cfg = CableConfig::default();
        let trace = simulate(&cfg, None, &input(5.0), 20.0, DEFAULT_DT_MS, 0).unwrap();
        let crit0 = FiringCriterion { compartment: 0, ..FiringCriterion::for_cable(&cfg) };
        let crit39 = FiringCriterion { compartment: 39, ..FiringCriterion::for_cable(&cfg) };
        let t0 = first_crossing(&trace, &crit0).expect("spike at the input site");
        let t39 = first_crossing(&trace, &crit39).expect("spike at the far end");
        assert!(t39 > t0 && t39.is_finite());
        assert!(detect_firing(&trace, &FiringCriterion::for_cable(&cfg)));
        let above = FiringCriterion { threshold_mv: trace.max() + 1.0, ..FiringCriterion::for_cable(&cfg) };
        assert!(!detect_firing(&trace, &above));
    }

    #[test]
    fn blanking_and_onset_gate_detection() {
        let cfg = CableConfig::default();
        let trace = simulate(&cfg, None, &input(5.0), 20.0, DEFAULT_DT_MS, 0).unwrap();
        let crit = FiringCriterion::for_cable(&cfg);
        let t = first_crossing(&trace, &crit).unwrap();
        assert!(!detect_firing(&trace, &crit.clone().after(t + 0.5)));
        assert!(!detect_firing(&trace, &crit.clone().blanking(&[t - 0.1], 0.5)));
    }
}
