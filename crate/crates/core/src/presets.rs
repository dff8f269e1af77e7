//! Ready-made channels.

use crate::beam::{BeamGeometry, TransmittanceScale};
use crate::channel::{TransmittanceDistribution, DEFAULT_EMPIRICAL_BINS};
use crate::error::Result;

/// Aperture radius of the free-space link model.
pub const LINK_APERTURE: f64 = 1.0;
/// Beam spot radius, `W/a = 1.5`.
pub const LINK_SPOT: f64 = 1.5;
/// Beam-wandering standard deviation.
pub const LINK_WANDER: f64 = 0.6;
/// Fixed attenuation in series with the wandering.
pub const LINK_FIXED_LOSS: f64 = 0.75;

/// Beam-wandering model of a short free-space link: `a = 1`, `W = 1.5`,
/// `σ_b = 0.6`, then a fixed transmittance of 0.75. The wandering part is
/// binned into 100 bins (`Δη = 0.01`) before the fixed loss is applied.
pub fn free_space_link(n_samples: usize, seed: u64) -> Result<TransmittanceDistribution> {
    let geometry = BeamGeometry::new(LINK_APERTURE, LINK_SPOT, LINK_WANDER)?;
    geometry
        .sample_distribution_scaled(TransmittanceScale::Amplitude, n_samples, DEFAULT_EMPIRICAL_BINS, seed)?
        .compose_fixed_loss(LINK_FIXED_LOSS)
}
