//! Rasters for C3-,C4+, its reversal and C3-,C4- on two tracts in both
//! traffic directions, rendered to `polarity.svg`.

use dbsim::cable::{calibrate_input, AxonalInput, CableConfig};
use dbsim::conductor::{solve_unit_field, SolverOptions};
use dbsim::fiber::SyntheticTract;
use dbsim::output::{rasters_csv, write_csv_and_image, Kind, Provenance};
use dbsim::phantom::{homogeneous_lead_volume, phantom_grid, phantom_lead};
use dbsim::scenario::{polarity_study, SweepSetup};
use dbsim::stimulus::{ContactProgram, StimulusWaveform};

fn main() -> dbsim::Result<()> {
    let lead = phantom_lead();
    let volume = homogeneous_lead_volume(phantom_grid(), &lead, 0.1)?;
    let bipolar: ContactProgram = "C3-,C4+".parse()?;
    let both: ContactProgram = "C3-,C4-".parse()?;
    // the reversed program reuses the bipolar solution negated
    let opts = SolverOptions::default();
    let fields = vec![solve_unit_field(&volume, &bipolar, &opts)?, solve_unit_field(&volume, &both, &opts)?];

    let cable = CableConfig::default();
    let cal = calibrate_input(&cable, &AxonalInput::default(), 40.0, 0.9, 0)?;
    let setup = SweepSetup::new(cable, cal.input);
    let tracts = vec![
        (
            "near".to_string(),
            SyntheticTract { distance_mm: 1.0, closest_fraction: 0.3, ..Default::default() }.build(&lead, "near"),
        ),
        (
            "oblique".to_string(),
            SyntheticTract {
                contact: 2,
                azimuth_deg: 120.0,
                tilt_deg: 35.0,
                closest_fraction: 0.4,
                ..Default::default()
            }
            .build(&lead, "oblique"),
        ),
    ];
    let programs = vec![bipolar.clone(), bipolar.reversed(), both];
    let base = StimulusWaveform::new(3.0, 90.0, 140.0, bipolar);
    let panel = polarity_study(&tracts, &fields, &programs, &base, &setup, 0)?;

    let mut labelled = Vec::new();
    for e in &panel.entries {
        let cells: String = e.raster.outcomes.iter().map(|&f| if f { '#' } else { '.' }).collect();
        let label = format!("{} {} {:?}", e.tract, e.program, e.direction);
        println!("{label:<28} {cells}");
        labelled.push((label, &e.raster));
    }
    let csv = rasters_csv(&Provenance::new(Kind::Rasters, "example", 0), &labelled, base.n_pulses)?;
    write_csv_and_image(std::path::Path::new("polarity.csv"), &csv)?;
    println!("wrote polarity.csv and polarity.svg");
    Ok(())
}
