//! Transmittance statistics of a wandering beam on a circular aperture.
//!
//! Sweeps the wandering strength and the spot size and prints the moments
//! that enter the key rate.

use fadecv::{BeamGeometry, TransmittanceScale};

fn main() -> fadecv::Result<()> {
    let a = 1.0;
    println!("W     sigma_b  T0      cut     <sqrt eta>^2  Var(sqrt eta)");
    for w in [0.5, 1.0, 1.5, 2.0] {
        for sigma_b in [0.2, 0.6, 1.0] {
            let g = BeamGeometry::new(a, w, sigma_b)?;
            let d = g.sample_distribution(200_000, 200, 11)?;
            let m = d.moments();
            println!(
                "{w:<5} {sigma_b:<8} {:.4}  {:.4}  {:.4}        {:.3e}",
                g.max_transmittance(),
                g.transmission_cut(TransmittanceScale::Amplitude),
                m.mean_sqrt_sq(),
                m.var_sqrt
            );
        }
    }

    let g = BeamGeometry::new(a, 1.5, 0.6)?;
    println!("\nprofile for W = 1.5");
    for r in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0] {
        println!("  offset {r:<4} T^2 = {:.5}", g.transmittance_at_offset(r)?);
    }
    Ok(())
}
