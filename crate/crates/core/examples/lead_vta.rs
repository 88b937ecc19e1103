//! Four-ring lead in a homogeneous cube: unit field for C3-,C4+, then the
//! static VTA and its overlap with a fiber passing contact 4.

use dbsim::conductor::{solve_unit_field, SolverOptions};
use dbsim::fiber::SyntheticTract;
use dbsim::field::{efield_norm, static_vta, tract_overlap, DEFAULT_VTA_THRESHOLD};
use dbsim::phantom::{homogeneous_lead_volume, phantom_grid, phantom_lead};

fn main() -> dbsim::Result<()> {
    let lead = phantom_lead();
    let volume = homogeneous_lead_volume(phantom_grid(), &lead, 0.1)?;
    println!("contacts in volume: {:?}", volume.contacts());

    let field = solve_unit_field(&volume, &"C3-,C4+".parse()?, &SolverOptions::default())?;
    println!("solved in {} iterations, relative residual {:.2e}", field.iterations, field.residual);

    let fibers: Vec<_> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&d| {
            SyntheticTract { distance_mm: d, closest_fraction: 0.3, ..Default::default() }
                .build(&lead, format!("{d} mm"))
        })
        .collect();
    println!("{:>5} {:>9}  overlap at 1/2/3 mm", "mA", "VTA_mm3");
    for k in 0..=5 {
        let amp = k as f64;
        let vta = static_vta(&efield_norm(&field, amp), &volume, DEFAULT_VTA_THRESHOLD)?;
        let ov = tract_overlap(&vta, volume.grid(), &fibers);
        let cols: Vec<String> = ov.per_fiber.iter().map(|o| format!("{o:.3}")).collect();
        println!("{amp:>5.1} {:>9.2}  {}", vta.volume_mm3, cols.join(" "));
    }
    Ok(())
}
