//! Firing scores of fibers at 1, 2 and 3 mm from the active contact at
//! 3 mA, 90 us, 140 Hz.

use dbsim::cable::{calibrate_input, AxonalInput, CableConfig};
use dbsim::conductor::{solve_unit_field, SolverOptions};
use dbsim::fiber::SyntheticTract;
use dbsim::phantom::{homogeneous_lead_volume, phantom_grid, phantom_lead};
use dbsim::scenario::{fiber_series, SweepSetup};
use dbsim::stimulus::StimulusWaveform;

fn main() -> dbsim::Result<()> {
    let lead = phantom_lead();
    let volume = homogeneous_lead_volume(phantom_grid(), &lead, 0.1)?;
    let program = "C3-,C4+".parse()?;
    let field = solve_unit_field(&volume, &program, &SolverOptions::default())?;
    let cable = CableConfig::default();
    let cal = calibrate_input(&cable, &AxonalInput::default(), 40.0, 0.9, 0)?;
    let setup = SweepSetup::new(cable, cal.input);

    let fibers: Vec<_> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&d| {
            SyntheticTract { distance_mm: d, closest_fraction: 0.3, ..Default::default() }
                .build(&lead, format!("{d} mm"))
        })
        .collect();
    let w = StimulusWaveform::new(3.0, 90.0, 140.0, program);
    for r in fiber_series(&fibers, &field, &w, &setup, 0)? {
        let cells: String = r.outcomes.iter().map(|&f| if f { '#' } else { '.' }).collect();
        println!("{:>5}  {cells}  score {:.3}", r.fiber_id, r.score().value());
    }
    Ok(())
}
