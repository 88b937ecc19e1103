//! Phase-shift sweeps of a solitary axonal input against a DBS pulse train,
//! firing scores, parameter grids and the polarity/direction study.

use std::borrow::Cow;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cable::{AxonalInput, Cable, CableConfig, ExtracellularDrive, FiringCriterion, DEFAULT_DT_MS};
use crate::conductor::FieldSolution;
use crate::error::{Error, Result};
use crate::fiber::{resample_fiber, FiberPath, TrafficDirection};
use crate::field::{sample_potential_series, DEFAULT_SAMPLE_DT_S};
use crate::stimulus::{ContactProgram, StimulusWaveform};

pub const DEFAULT_N_SHIFTS: usize = 15;
pub const DEFAULT_TAIL_MS: f64 = 10.0;

/// Phase shifts `Θ_k = k·T/n` for `k < n`, covering `[0, T)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSweep {
    pub period_ms: f64,
    pub n_shifts: usize,
}

impl PhaseSweep {
    pub fn new(frequency_hz: f64, n_shifts: usize) -> Self {
        Self { period_ms: 1e3 / frequency_hz, n_shifts }
    }

    pub fn shifts_ms(&self) -> Vec<f64> {
        (0..self.n_shifts).map(|k| k as f64 * self.period_ms / self.n_shifts as f64).collect()
    }
}

/// Fraction of phase shifts that fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiringScore {
    pub fired: usize,
    pub total: usize,
}

impl FiringScore {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.fired as f64 / self.total as f64
        }
    }
}

/// Fire/no-fire outcome per phase shift, with the settings that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct FiringRaster {
    pub fiber_id: String,
    pub direction: TrafficDirection,
    pub program: ContactProgram,
    pub amplitude_ma: f64,
    pub pulse_width_us: f64,
    pub frequency_hz: f64,
    pub seed: u64,
    pub shifts_ms: Vec<f64>,
    pub outcomes: Vec<bool>,
}

impl FiringRaster {
    pub fn score(&self) -> FiringScore {
        firing_score(&self.outcomes)
    }
}

pub fn firing_score(outcomes: &[bool]) -> FiringScore {
    FiringScore { fired: outcomes.iter().filter(|&&b| b).count(), total: outcomes.len() }
}

/// Settings shared by every cell of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSetup {
    pub cable: CableConfig,
    /// Input template; its onset is replaced by `DBS onset + Θ`.
    pub input: AxonalInput,
    pub n_shifts: usize,
    pub tail_ms: f64,
    pub dt_ms: f64,
    /// Crossings within this long after each pulse onset are ignored.
    pub blanking_ms: f64,
}

impl SweepSetup {
    pub fn new(cable: CableConfig, input: AxonalInput) -> Self {
        Self {
            cable,
            input,
            n_shifts: DEFAULT_N_SHIFTS,
            tail_ms: DEFAULT_TAIL_MS,
            dt_ms: DEFAULT_DT_MS,
            blanking_ms: 0.0,
        }
    }

    /// Pulse train plus tail, measured from t = 0.
    pub fn window_ms(&self, waveform: &StimulusWaveform) -> f64 {
        waveform.onset_ms + waveform.train_duration_ms() + self.tail_ms
    }
}

/// Seed of phase shift `shift` in cell `cell`, independent of run order.
pub fn derive_seed(master: u64, cell: u64, shift: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(cell);
    rng.set_word_pos(2 * shift as u128);
    rng.next_u64()
}

/// `field` itself when it was solved for `program`, its negation when it was
/// solved for the reversed program.
pub fn field_for<'a>(field: &'a FieldSolution, program: &ContactProgram) -> Result<Cow<'a, FieldSolution>> {
    if &field.program == program {
        Ok(Cow::Borrowed(field))
    } else if field.program.reversed() == *program {
        Ok(Cow::Owned(field.reversed()))
    } else {
        Err(Error::Config(format!("no field for program `{program}` (have `{}`)", field.program)))
    }
}

/// First field of `fields` that serves `program` directly or reversed.
pub fn pick_field<'a>(fields: &'a [FieldSolution], program: &ContactProgram) -> Result<Cow<'a, FieldSolution>> {
    fields
        .iter()
        .find_map(|f| field_for(f, program).ok())
        .ok_or_else(|| Error::Config(format!("no field solution for program `{program}`")))
}

/// Extracellular drive along the fiber in traffic order.
pub fn fiber_drive(
    fiber: &FiberPath,
    field: &FieldSolution,
    waveform: &StimulusWaveform,
    setup: &SweepSetup,
) -> Result<ExtracellularDrive> {
    let n = setup.cable.n_comp;
    let resampled = if fiber.points.len() == n { Cow::Borrowed(fiber) } else { Cow::Owned(resample_fiber(fiber, n)?) };
    let field = field_for(field, &waveform.program)?;
    let series = sample_potential_series(
        &field,
        &resampled.traffic_points(),
        waveform,
        DEFAULT_SAMPLE_DT_S,
        setup.window_ms(waveform) * 1e-3,
    )?;
    ExtracellularDrive::from_series(&series)
}

/// Simulate one input per phase shift against the pulse train.
pub fn run_phase_sweep(
    fiber: &FiberPath,
    field: &FieldSolution,
    waveform: &StimulusWaveform,
    setup: &SweepSetup,
    seed: u64,
    cell: u64,
) -> Result<FiringRaster> {
    waveform.validate()?;
    let cable = Cable::new(&setup.cable)?;
    let drive = fiber_drive(fiber, field, waveform, setup)?;
    let shifts = PhaseSweep::new(waveform.frequency_hz, setup.n_shifts).shifts_ms();
    let window = setup.window_ms(waveform);
    let onsets = waveform.pulse_onsets_ms();
    let outcomes = shifts
        .par_iter()
        .enumerate()
        .map(|(k, &theta)| {
            let input = setup.input.with_onset(waveform.onset_ms + theta);
            let criterion =
                FiringCriterion::for_cable(&setup.cable).after(input.onset_ms).blanking(&onsets, setup.blanking_ms);
            let s = derive_seed(seed, cell, k as u64);
            Ok(cable.firing_time(Some(&drive), &input, window, setup.dt_ms, s, &criterion)?.is_some())
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(FiringRaster {
        fiber_id: fiber.id.clone(),
        direction: fiber.direction,
        program: waveform.program.clone(),
        amplitude_ma: waveform.amplitude_ma,
        pulse_width_us: waveform.pulse_width_us,
        frequency_hz: waveform.frequency_hz,
        seed,
        shifts_ms: shifts,
        outcomes,
    })
}

/// Second axis of a score grid; the first is always amplitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    PulseWidthUs(Vec<f64>),
    FrequencyHz(Vec<f64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::PulseWidthUs(_) => "pulse_width_us",
            SweepAxis::FrequencyHz(_) => "frequency_hz",
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            SweepAxis::PulseWidthUs(v) | SweepAxis::FrequencyHz(v) => v,
        }
    }

    fn apply(&self, base: &StimulusWaveform, value: f64) -> StimulusWaveform {
        let mut w = base.clone();
        match self {
            SweepAxis::PulseWidthUs(_) => w.pulse_width_us = value,
            SweepAxis::FrequencyHz(_) => w.frequency_hz = value,
        }
        w
    }
}

/// Scores over `axis × amplitude`, row-major with one row per axis value.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub axis: SweepAxis,
    pub amplitudes_ma: Vec<f64>,
    pub scores: Vec<FiringScore>,
}

impl ScoreTable {
    pub fn get(&self, axis_index: usize, amp_index: usize) -> FiringScore {
        self.scores[axis_index * self.amplitudes_ma.len() + amp_index]
    }

    pub fn row(&self, axis_index: usize) -> &[FiringScore] {
        let n = self.amplitudes_ma.len();
        &self.scores[axis_index * n..(axis_index + 1) * n]
    }

    /// Table of row-major rasters from [`grid_rasters`].
    pub fn from_rasters(axis: &SweepAxis, amplitudes_ma: &[f64], rasters: &[FiringRaster]) -> Self {
        Self {
            axis: axis.clone(),
            amplitudes_ma: amplitudes_ma.to_vec(),
            scores: rasters.iter().map(FiringRaster::score).collect(),
        }
    }

    /// Smallest swept amplitude with a positive score, per axis value.
    pub fn threshold_amplitudes(&self) -> Vec<Option<f64>> {
        (0..self.axis.values().len()).map(|i| threshold_amplitude(&self.amplitudes_ma, self.row(i))).collect()
    }
}

pub fn threshold_amplitude(amplitudes_ma: &[f64], scores: &[FiringScore]) -> Option<f64> {
    amplitudes_ma.iter().zip(scores).find(|(_, s)| s.fired > 0).map(|(&a, _)| a)
}

/// One phase sweep per `(axis value, amplitude)` cell, row-major. Errors
/// name the failing cell.
pub fn grid_rasters(
    fiber: &FiberPath,
    field: &FieldSolution,
    base: &StimulusWaveform,
    amplitudes_ma: &[f64],
    axis: &SweepAxis,
    setup: &SweepSetup,
    seed: u64,
) -> Result<Vec<FiringRaster>> {
    if amplitudes_ma.is_empty() || axis.values().is_empty() {
        return Err(Error::Config("grid sweep axes must be non-empty".into()));
    }
    let n_amp = amplitudes_ma.len();
    let cells: Vec<(usize, usize)> = (0..axis.values().len()).flat_map(|i| (0..n_amp).map(move |j| (i, j))).collect();
    cells
        .par_iter()
        .map(|&(i, j)| {
            let mut w = axis.apply(base, axis.values()[i]);
            w.amplitude_ma = amplitudes_ma[j];
            let cell = (i * n_amp + j) as u64;
            run_phase_sweep(fiber, field, &w, setup, seed, cell).map_err(|e| {
                e.in_cell(format!(
                    "cell ({}, {}) {} = {}, amplitude {} mA",
                    i,
                    j,
                    axis.name(),
                    axis.values()[i],
                    amplitudes_ma[j]
                ))
            })
        })
        .collect()
}

/// Scores of [`grid_rasters`].
pub fn grid_sweep(
    fiber: &FiberPath,
    field: &FieldSolution,
    base: &StimulusWaveform,
    amplitudes_ma: &[f64],
    axis: &SweepAxis,
    setup: &SweepSetup,
    seed: u64,
) -> Result<ScoreTable> {
    let rasters = grid_rasters(fiber, field, base, amplitudes_ma, axis, setup, seed)?;
    Ok(ScoreTable::from_rasters(axis, amplitudes_ma, &rasters))
}

/// Scan `amplitudes_ma` in order and stop at the first positive score.
/// Seeds match the corresponding cells of a one-row [`grid_sweep`].
pub fn first_firing_amplitude(
    fiber: &FiberPath,
    field: &FieldSolution,
    base: &StimulusWaveform,
    amplitudes_ma: &[f64],
    setup: &SweepSetup,
    seed: u64,
) -> Result<Option<f64>> {
    for (j, &a) in amplitudes_ma.iter().enumerate() {
        let w = StimulusWaveform { amplitude_ma: a, ..base.clone() };
        if run_phase_sweep(fiber, field, &w, setup, seed, j as u64)?.score().fired > 0 {
            return Ok(Some(a));
        }
    }
    Ok(None)
}

/// One raster per fiber, e.g. fibers at increasing distance from the lead.
pub fn fiber_series(
    fibers: &[FiberPath],
    field: &FieldSolution,
    waveform: &StimulusWaveform,
    setup: &SweepSetup,
    seed: u64,
) -> Result<Vec<FiringRaster>> {
    fibers.par_iter().enumerate().map(|(i, f)| run_phase_sweep(f, field, waveform, setup, seed, i as u64)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PanelEntry {
    pub tract: String,
    pub program: ContactProgram,
    pub direction: TrafficDirection,
    pub raster: FiringRaster,
}

/// Rasters for every `program × tract × direction`, in that nesting order.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarityPanel {
    pub entries: Vec<PanelEntry>,
}

impl PolarityPanel {
    pub fn find(&self, tract: &str, program: &ContactProgram, direction: TrafficDirection) -> Option<&FiringRaster> {
        self.entries
            .iter()
            .find(|e| e.tract == tract && &e.program == program && e.direction == direction)
            .map(|e| &e.raster)
    }
}

/// Both traffic directions of every tract under every program. `fields`
/// must cover each program directly or reversed.
pub fn polarity_study(
    tracts: &[(String, FiberPath)],
    fields: &[FieldSolution],
    programs: &[ContactProgram],
    base: &StimulusWaveform,
    setup: &SweepSetup,
    seed: u64,
) -> Result<PolarityPanel> {
    let program_fields = programs.iter().map(|p| pick_field(fields, p)).collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for p in 0..programs.len() {
        for (name, fiber) in tracts {
            for direction in [TrafficDirection::Forward, TrafficDirection::Flipped] {
                let f = if fiber.direction == direction { fiber.clone() } else { fiber.flipped() };
                jobs.push((p, name.clone(), direction, f));
            }
        }
    }
    let entries = jobs
        .par_iter()
        .enumerate()
        .map(|(cell, (p, tract, direction, fiber))| {
            let program = &programs[*p];
            let w = StimulusWaveform { program: program.clone(), ..base.clone() };
            let raster = run_phase_sweep(fiber, &program_fields[*p], &w, setup, seed, cell as u64)?;
            Ok(PanelEntry { tract: tract.clone(), program: program.clone(), direction: *direction, raster })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PolarityPanel { entries })
}
