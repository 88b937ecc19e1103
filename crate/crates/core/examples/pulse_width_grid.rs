//! Amplitude × pulse-width score grid for the near fiber, written as CSV and
//! a graymap heatmap.

use dbsim::cable::{calibrate_input, AxonalInput, CableConfig};
use dbsim::conductor::{solve_unit_field, SolverOptions};
use dbsim::fiber::SyntheticTract;
use dbsim::output::{scores_csv, write_csv_and_image, Kind, Provenance};
use dbsim::phantom::{homogeneous_lead_volume, phantom_grid, phantom_lead};
use dbsim::scenario::{grid_sweep, SweepAxis, SweepSetup};
use dbsim::stimulus::StimulusWaveform;

fn main() -> dbsim::Result<()> {
    let lead = phantom_lead();
    let volume = homogeneous_lead_volume(phantom_grid(), &lead, 0.1)?;
    let program = "C3-,C4+".parse()?;
    let field = solve_unit_field(&volume, &program, &SolverOptions::default())?;
    let cable = CableConfig::default();
    let cal = calibrate_input(&cable, &AxonalInput::default(), 40.0, 0.9, 0)?;
    let setup = SweepSetup::new(cable, cal.input);
    let fiber = SyntheticTract { distance_mm: 1.0, closest_fraction: 0.3, ..Default::default() }.build(&lead, "near");

    let amps: Vec<f64> = (0..=5).map(|k| k as f64).collect();
    let axis = SweepAxis::PulseWidthUs(vec![30.0, 60.0, 90.0, 120.0]);
    let base = StimulusWaveform::new(0.0, 90.0, 140.0, program);
    let table = grid_sweep(&fiber, &field, &base, &amps, &axis, &setup, 0)?;

    for (i, pw) in axis.values().iter().enumerate() {
        let row: Vec<String> = table.row(i).iter().map(|s| format!("{:>2}", s.fired)).collect();
        println!("{pw:>5} us  {}", row.join(" "));
    }
    println!("thresholds (mA): {:?}", table.threshold_amplitudes());
    let csv = scores_csv(&Provenance::new(Kind::Scores, "example", 0), &table)?;
    let img = write_csv_and_image(std::path::Path::new("pulse_width_grid.csv"), &csv)?;
    println!("wrote pulse_width_grid.csv and {}", img.expect("scores render").display());
    Ok(())
}
