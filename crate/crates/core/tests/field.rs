use dbsim::conductor::{solve_unit_field, ConductorSystem, OuterBoundary, SolverOptions};
use dbsim::field::{efield_norm, static_vta};
use dbsim::phantom::{homogeneous_lead_volume, phantom_lead, point_source_volume};
use dbsim::stimulus::ContactProgram;
use dbsim::volume::{Grid, Vec3};

fn small_lead_volume() -> dbsim::volume::TissueVolume {
    homogeneous_lead_volume(Grid::centered_cube(40, 0.5).unwrap(), &phantom_lead(), 0.1).unwrap()
}

#[test]
fn bipolar_is_cathode_minus_anode_in_residual() {
    let vol = small_lead_volume();
    let center = Vec3::new(0.25, 0.25, 0.0);
    let opts = SolverOptions { far_field_center_mm: Some(center), ..Default::default() };
    let p = |s: &str| s.parse::<ContactProgram>().unwrap();
    let bip = solve_unit_field(&vol, &p("C3-,C4+"), &opts).unwrap();
    let cat = solve_unit_field(&vol, &p("C3-"), &opts).unwrap();
    let ano = solve_unit_field(&vol, &p("C4-"), &opts).unwrap();

    let sys = ConductorSystem::assemble(&vol, OuterBoundary::Asymptotic, center);
    let rhs = sys.program_rhs(&p("C3-,C4+")).unwrap();
    let diff: Vec<f64> = cat.potential.iter().zip(&ano.potential).map(|(c, a)| c - a).collect();
    assert!(sys.voxel_residual(&diff, &rhs) <= 2.0 * opts.tolerance);
    assert!(sys.voxel_residual(&bip.potential, &rhs) <= opts.tolerance);
}

#[test]
fn amplitude_scaling_and_reversal() {
    let vol = small_lead_volume();
    let f = solve_unit_field(&vol, &"C3-,C4+".parse().unwrap(), &SolverOptions::default()).unwrap();
    let one = f.scaled(1.0);
    for (a, b) in f.scaled(3.0).iter().zip(&one) {
        assert!((a - 3.0 * b).abs() <= 1e-6 * (3.0 * b).abs().max(1e-12));
    }
    let r = f.reversed();
    assert_eq!(r.program.to_string(), "C3+,C4-");
    assert!(r.potential.iter().zip(&f.potential).all(|(x, y)| *x == -*y));
    assert_eq!(efield_norm(&r, 2.0), efield_norm(&f, 2.0));
}

#[test]
fn vta_grows_with_amplitude() {
    let vol = small_lead_volume();
    let f = solve_unit_field(&vol, &"C3-,C4+".parse().unwrap(), &SolverOptions::default()).unwrap();
    let vols: Vec<f64> =
        (0..=8).map(|k| static_vta(&efield_norm(&f, 0.5 * k as f64), &vol, 150.0).unwrap().volume_mm3).collect();
    assert_eq!(vols[0], 0.0);
    assert!(vols.windows(2).all(|w| w[1] >= w[0]), "{vols:?}");
    assert!(vols[8] > vols[1]);
}

#[test]
fn coarse_point_source_tracks_inverse_distance() {
    // Smaller cousin of the 100³ oracle: 60³ at 0.5 mm, radii 2-8 mm.
    let sigma = 0.1;
    let (vol, src) = point_source_volume(60, 0.5, sigma).unwrap();
    let f = solve_unit_field(&vol, &ContactProgram::unipolar(0), &SolverOptions::default()).unwrap();
    for r in [2.0, 4.0, 8.0] {
        let u = dbsim::field::interpolate(&f.grid, &f.potential, &(src + Vec3::new(r, 0.0, 0.0))).unwrap();
        let exact = 1e-3 / (4.0 * std::f64::consts::PI * sigma * r * 1e-3);
        assert!((u - exact).abs() / exact < 0.03, "r = {r}: {u} vs {exact}");
    }
}
