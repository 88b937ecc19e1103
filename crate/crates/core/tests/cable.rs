use dbsim::cable::kinetics::{advance_gate, temperature_factor, Rates};
use dbsim::cable::stochastic::ChannelPopulation;
use dbsim::cable::{
    first_crossing, simulate, AxonalInput, Cable, CableConfig, ExtracellularDrive, FiringCriterion, Gating, GatingMode,
    DEFAULT_DT_MS,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn input(amp: f64) -> AxonalInput {
    AxonalInput { amplitude_na: amp, ..Default::default() }
}

/// Cathodic-looking bump centred off the middle so that the drive has no
/// mirror symmetry of its own.
fn lopsided_drive(n: usize, dt_ms: f64, steps: usize) -> ExtracellularDrive {
    let mut volts = Vec::with_capacity(n * steps);
    for k in 0..steps {
        let on = (k as f64 * dt_ms) % 7.0 < 0.09;
        for i in 0..n {
            let x = i as f64 - 12.0;
            volts.push(if on { -0.02 / (1.0 + 0.05 * x * x) } else { 0.0 });
        }
    }
    ExtracellularDrive::new(dt_ms, n, volts).unwrap()
}

#[test]
fn rest_holds_for_fifty_ms() {
    let cfg = CableConfig::default();
    let trace = simulate(&cfg, None, &input(0.0), 50.0, DEFAULT_DT_MS, 0).unwrap();
    let rest = Cable::new(&cfg).unwrap().resting_potential_mv();
    assert!((-70.0..-60.0).contains(&rest), "rest {rest}");
    let worst = trace.mv.iter().map(|v| (v - rest).abs()).fold(0.0, f64::max);
    assert!(worst < 1.0, "drift {worst} mV");
}

#[test]
fn mirrored_drive_and_input_mirror_the_trace_exactly() {
    let cfg = CableConfig::default();
    let n = cfg.n_comp;
    let drive = lopsided_drive(n, 0.005, 4000);
    let fwd = simulate(&cfg, Some(&drive), &input(0.3), 20.0, DEFAULT_DT_MS, 0).unwrap();
    let back_input = AxonalInput { compartment: n - 1, ..input(0.3) };
    let back = simulate(&cfg, Some(&drive.mirrored()), &back_input, 20.0, DEFAULT_DT_MS, 0).unwrap();
    assert_eq!(fwd.n_samples(), back.n_samples());
    for s in 0..fwd.n_samples() {
        for i in 0..n {
            assert_eq!(fwd.at(s, i).to_bits(), back.at(s, n - 1 - i).to_bits(), "sample {s}, compartment {i}");
        }
    }
}

#[test]
fn halving_dt_moves_spike_time_by_less_than_a_tenth_ms() {
    let cfg = CableConfig::default();
    let c = FiringCriterion::for_cable(&cfg);
    let drive = lopsided_drive(cfg.n_comp, 0.005, 5000);
    for d in [None, Some(&drive)] {
        let coarse = simulate(&cfg, d, &input(0.3), 25.0, 1e-3, 0).unwrap();
        let fine = simulate(&cfg, d, &input(0.3), 25.0, 5e-4, 0).unwrap();
        let (a, b) = (first_crossing(&coarse, &c).unwrap(), first_crossing(&fine, &c).unwrap());
        assert!(a > 1.0 && (a - b).abs() < 0.1, "{a} vs {b}");
    }
}

#[test]
fn gates_stay_in_unit_interval_through_a_spike() {
    let cfg = CableConfig::default();
    let cable = Cable::new(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut state = cable.rest_state(&mut rng);
    let ue = vec![0.0; cfg.n_comp];
    let mut inj = vec![0.0; cfg.n_comp];
    let mut peak: f64 = -100.0;
    for k in 0..20_000 {
        inj[0] = if (1000..2000).contains(&k) { 2.0 } else { 0.0 };
        cable.step(&mut state, &ue, &inj, 1e-3, &mut rng).unwrap();
        peak = peak.max(state.v_mv[20]);
        let Gating::Deterministic { m, h, n } = &state.gating else { panic!("deterministic") };
        assert!(m.iter().chain(h).chain(n).all(|x| (0.0..=1.0).contains(x)));
    }
    assert!(peak > 0.0);
}

#[test]
fn stochastic_runs_repeat_per_seed() {
    let cfg = CableConfig { gating: GatingMode::Stochastic, ..Default::default() };
    let a = simulate(&cfg, None, &input(0.3), 10.0, DEFAULT_DT_MS, 11).unwrap();
    let b = simulate(&cfg, None, &input(0.3), 10.0, DEFAULT_DT_MS, 11).unwrap();
    let c = simulate(&cfg, None, &input(0.3), 10.0, DEFAULT_DT_MS, 12).unwrap();
    assert!(a.mv.iter().zip(&b.mv).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_ne!(a, c);
}

#[test]
fn latency_grows_along_the_cable() {
    let cfg = CableConfig::default();
    let trace = simulate(&cfg, None, &input(0.5), 30.0, DEFAULT_DT_MS, 0).unwrap();
    let times: Vec<f64> = [5, 15, 25, 35]
        .iter()
        .map(|&i| {
            first_crossing(&trace, &FiringCriterion { compartment: i, ..FiringCriterion::for_cable(&cfg) }).unwrap()
        })
        .collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]), "{times:?}");
    // roughly constant speed along the uniform cable
    let steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(steps.iter().all(|s| (s - steps[0]).abs() < 0.1 * steps[0]), "{steps:?}");
}

proptest! {
    #[test]
    fn exponential_euler_gate_stays_bounded(v in -150.0..100.0f64, x in 0.0..=1.0f64, dt in 1e-4..1.0f64, t in 0.0..40.0f64) {
        let r = Rates::at(v, temperature_factor(t));
        for (a, b) in [(r.alpha_m, r.beta_m), (r.alpha_h, r.beta_h), (r.alpha_n, r.beta_n)] {
            let y = advance_gate(x, a, b, dt);
            prop_assert!((0.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn channel_counts_are_conserved(v in -90.0..40.0f64, seed in any::<u64>(), dt in 1e-3..0.05f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = Rates::at(-65.0, 1.0);
        let mut p = ChannelPopulation::steady_state(&r, 500, 150, &mut rng);
        let r2 = Rates::at(v, 1.0);
        for _ in 0..20 {
            p.step(&r2, dt, &mut rng);
        }
        prop_assert_eq!(p.total_na(), 500);
        prop_assert_eq!(p.total_k(), 150);
        prop_assert!(p.open_na() <= 500 && p.open_k() <= 150);
    }
}
