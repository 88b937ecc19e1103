//! Program parsing and the sampled cathode current of a 4-pulse train.

use dbsim::stimulus::{ContactProgram, PulseShape, StimulusWaveform};

fn main() -> dbsim::Result<()> {
    for text in ["C3-,C4+", "C1-", "C2-,C3-,C4+"] {
        let p: ContactProgram = text.parse()?;
        println!("{text:<12} reversed {:<12} unit currents {:?}", p.reversed().to_string(), p.unit_currents());
    }
    if let Err(e) = "C3+,C4+".parse::<ContactProgram>() {
        println!("rejected: {e}");
    }

    let mut w = StimulusWaveform::new(3.0, 90.0, 140.0, "C3-,C4+".parse()?);
    println!("period {:.4} ms, train {:.4} ms, onsets {:?}", w.period_ms(), w.train_duration_ms(), w.pulse_onsets_ms());
    for shape in [PulseShape::RectangularMonophasic, PulseShape::ChargeBalancedBiphasic] {
        w.shape = shape;
        w.validate()?;
        let dt = 5e-6;
        let i = w.sampled_program_current(dt, 60);
        let charge: f64 = i.iter().sum::<f64>() * dt * 1e3;
        let shown: Vec<String> = i.iter().step_by(3).map(|x| format!("{x:+.0}")).collect();
        println!("{shape:?}: net charge of first 300 us {charge:+.4} uC\n  {}", shown.join(" "));
    }
    Ok(())
}
