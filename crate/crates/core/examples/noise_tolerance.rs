//! Largest excess noise that still allows a key, with and without selection.

use fadecv::postselect::{log_space, noise_threshold};
use fadecv::presets::free_space_link;
use fadecv::BeamGeometry;

fn main() -> fadecv::Result<()> {
    let grid = log_space(1e-2, 1e3, 40);
    let link = free_space_link(500_000, 2015)?;
    println!(
        "link: chi_max {:.5} without PS, {:.5} with PS",
        noise_threshold(&link, &grid, false, 1e-5)?,
        noise_threshold(&link, &grid, true, 1e-5)?
    );
    for sigma_b in [0.3, 0.6, 0.9] {
        let d = BeamGeometry::new(1.0, 1.5, sigma_b)?.sample_distribution(200_000, 100, 5)?;
        println!(
            "sigma_b {sigma_b}: {:.5} / {:.5}",
            noise_threshold(&d, &grid, false, 1e-5)?,
            noise_threshold(&d, &grid, true, 1e-5)?
        );
    }
    Ok(())
}
