//! Markov channel gating: the same seed gives the same trace, and the input
//! threshold approaches the deterministic one as channel counts grow.

use dbsim::cable::{input_threshold, simulate, AxonalInput, CableConfig, GatingMode, DEFAULT_DT_MS};

fn main() -> dbsim::Result<()> {
    let det = CableConfig::default();
    let input = AxonalInput::default();
    let t_det = input_threshold(&det, &input, 40.0, 0, 0.01)?.threshold_na;
    println!("deterministic threshold {t_det:.4} nA");

    for scale in [1.0, 10.0] {
        let cfg = CableConfig { gating: GatingMode::Stochastic, channel_count_scale: scale, ..det.clone() };
        let (n_na, n_k) = cfg.channel_counts();
        let a = simulate(&cfg, None, &input.with_amplitude(0.3), 20.0, DEFAULT_DT_MS, 7)?;
        let b = simulate(&cfg, None, &input.with_amplitude(0.3), 20.0, DEFAULT_DT_MS, 7)?;
        let t = input_threshold(&cfg, &input, 40.0, 0, 0.02)?.threshold_na;
        println!(
            "x{scale}: {n_na} Na / {n_k} K channels per compartment, rerun identical {}, threshold {t:.4} nA ({:+.1} %)",
            a == b,
            (t / t_det - 1.0) * 100.0
        );
    }
    Ok(())
}
