//! A suprathreshold input at compartment 0 travels to the far end. Writes
//! the full membrane trace to `cable_trace.csv`.

use dbsim::cable::{first_crossing, simulate, AxonalInput, CableConfig, FiringCriterion, DEFAULT_DT_MS};

fn main() -> dbsim::Result<()> {
    let config = CableConfig::default();
    let input = AxonalInput { amplitude_na: 0.5, ..Default::default() };
    let trace = simulate(&config, None, &input, 35.0, DEFAULT_DT_MS, 0)?;

    for comp in [0, 10, 20, 30, 39] {
        let c = FiringCriterion { compartment: comp, ..FiringCriterion::for_cable(&config) };
        match first_crossing(&trace, &c) {
            Some(t) => println!("compartment {comp:>2}: 0 mV crossing at {t:.3} ms"),
            None => println!("compartment {comp:>2}: no spike"),
        }
    }
    let file = std::fs::File::create("cable_trace.csv").map_err(|e| dbsim::Error::io("cable_trace.csv", e))?;
    trace.write_csv(std::io::BufWriter::new(file))?;
    println!("peak {:.1} mV; trace written to cable_trace.csv", trace.max());
    Ok(())
}
