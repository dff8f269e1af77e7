//! Jointly choosing the modulation and the post-selection region.

use fadecv::postselect::{default_sigma_grid, optimize_modulation, optimize_ps_and_modulation};
use fadecv::presets::free_space_link;

fn main() -> fadecv::Result<()> {
    let d = free_space_link(1_000_000, 2015)?;
    let grid = default_sigma_grid();
    for chi in [0.0, 0.02, 0.04, 0.06] {
        let plain = optimize_modulation(&d, chi, &grid)?;
        let ps = optimize_ps_and_modulation(&d, chi, &grid)?;
        println!(
            "chi {chi:<5} no PS: sigma {:>8.3} K {:.4} | PS: sigma {:>8.3} eta_min {:.4} P {:.3} K_w {:.4}",
            plain.modulation, plain.k_weighted, ps.modulation, ps.eta_min, ps.success_probability, ps.k_weighted
        );
    }
    Ok(())
}
