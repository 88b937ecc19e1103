//! Compare a point-like 1 mA source in a homogeneous 0.1 S/m medium with
//! the analytic potential I/(4πσr).

use std::time::Instant;

use dbsim::conductor::{solve_unit_field, SolverOptions};
use dbsim::field::interpolate;
use dbsim::phantom::{point_source_volume, PHANTOM_DIM, PHANTOM_SPACING_MM};
use dbsim::stimulus::ContactProgram;
use dbsim::volume::Vec3;

fn main() -> dbsim::Result<()> {
    let sigma = 0.1;
    let (volume, src) = point_source_volume(PHANTOM_DIM, PHANTOM_SPACING_MM, sigma)?;
    let start = Instant::now();
    let sol = solve_unit_field(&volume, &ContactProgram::unipolar(0), &SolverOptions::default())?;
    println!(
        "{}^3 voxels: {} iterations, residual {:.2e}, {:.1} s",
        PHANTOM_DIM,
        sol.iterations,
        sol.residual,
        start.elapsed().as_secs_f64()
    );

    let dirs = [Vec3::x(), Vec3::new(1.0, 1.0, 0.0).normalize(), Vec3::new(1.0, 1.0, 1.0).normalize(), -Vec3::z()];
    println!("{:>6} {:>10} {:>10} {:>8}", "r_mm", "u_V", "exact_V", "err_%");
    let mut worst: f64 = 0.0;
    for dir in dirs {
        for r in [2.0, 3.0, 5.0, 8.0, 12.0, 15.0] {
            let u = interpolate(&sol.grid, &sol.potential, &(src + r * dir))?;
            let exact = 1e-3 / (4.0 * std::f64::consts::PI * sigma * r * 1e-3);
            let err = (u - exact) / exact * 100.0;
            worst = worst.max(err.abs());
            println!("{r:>6.1} {u:>10.5} {exact:>10.5} {err:>8.3}");
        }
    }
    println!("worst relative error {worst:.3} %");
    Ok(())
}
