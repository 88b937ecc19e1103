//! Static VTA of the same bipolar setting in the homogeneous phantom and in
//! white matter next to a CSF slab.

use dbsim::conductor::{solve_unit_field, SolverOptions};
use dbsim::field::{efield_norm, static_vta, DEFAULT_VTA_THRESHOLD};
use dbsim::phantom::{csf_slab_volume, homogeneous_lead_volume, phantom_grid, phantom_lead, SlabLayout};
use dbsim::stimulus::ContactProgram;

fn main() -> dbsim::Result<()> {
    let lead = phantom_lead();
    let program: ContactProgram = "C3-,C4+".parse()?;
    let hom = homogeneous_lead_volume(phantom_grid(), &lead, 0.1)?;
    let het = csf_slab_volume(phantom_grid(), &lead, &SlabLayout::default())?;
    let opts = SolverOptions::default();
    let f_hom = solve_unit_field(&hom, &program, &opts)?;
    let f_het = solve_unit_field(&het, &program, &opts)?;

    println!("{:>6} {:>12} {:>12} {:>7}", "mA", "hom_mm3", "csf_mm3", "ratio");
    for k in 0..=10 {
        let a = 0.5 * k as f64;
        let v_hom = static_vta(&efield_norm(&f_hom, a), &hom, DEFAULT_VTA_THRESHOLD)?.volume_mm3;
        let v_het = static_vta(&efield_norm(&f_het, a), &het, DEFAULT_VTA_THRESHOLD)?.volume_mm3;
        let ratio = if v_hom > 0.0 { format!("{:.2}", v_het / v_hom) } else { "-".into() };
        println!("{a:>6.1} {v_hom:>12.3} {v_het:>12.3} {ratio:>7}");
    }
    Ok(())
}
