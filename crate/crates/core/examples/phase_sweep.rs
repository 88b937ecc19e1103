//! One phase sweep: the input is delayed by 15 evenly spaced shifts within a
//! DBS period and each run is scored for firing at the far end.

use dbsim::cable::{calibrate_input, AxonalInput, CableConfig};
use dbsim::conductor::{solve_unit_field, SolverOptions};
use dbsim::fiber::SyntheticTract;
use dbsim::phantom::{homogeneous_lead_volume, phantom_grid, phantom_lead};
use dbsim::scenario::{run_phase_sweep, SweepSetup};
use dbsim::stimulus::StimulusWaveform;

fn main() -> dbsim::Result<()> {
    let lead = phantom_lead();
    let volume = homogeneous_lead_volume(phantom_grid(), &lead, 0.1)?;
    let program = "C3-,C4+".parse()?;
    let field = solve_unit_field(&volume, &program, &SolverOptions::default())?;

    let cable = CableConfig::default();
    let cal = calibrate_input(&cable, &AxonalInput::default(), 40.0, 0.9, 0)?;
    println!("input threshold {:.4} nA, using {:.4} nA", cal.threshold_na, cal.input.amplitude_na);
    let setup = SweepSetup::new(cable, cal.input);
    let fiber = SyntheticTract { distance_mm: 1.0, closest_fraction: 0.3, ..Default::default() }.build(&lead, "near");

    for amp in [0.0, 2.0, 3.0, 5.0] {
        let w = StimulusWaveform::new(amp, 90.0, 140.0, program.clone());
        let r = run_phase_sweep(&fiber, &field, &w, &setup, 0, 0)?;
        let cells: String = r.outcomes.iter().map(|&f| if f { '#' } else { '.' }).collect();
        let s = r.score();
        println!("{amp:>4.1} mA  {cells}  {}/{} = {:.3}", s.fired, s.total, s.value());
    }
    Ok(())
}
