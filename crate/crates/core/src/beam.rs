//! Transmittance statistics of a wandering Gaussian beam on a circular aperture.
//!
//! The beam has intensity profile `(2/πW²) exp(−2r²/W²)` and its center is
//! displaced from the aperture center by a 2D isotropic Gaussian offset with
//! per-axis standard deviation `σ_b`. For each offset `d` the fraction of power
//! collected by an aperture of radius `a` is
//!
//! ```text
//! T²(d) = ∫₀ᵃ (4r/W²) exp(−2(r² + d²)/W²) I₀(4rd/W²) dr,
//! ```
//!
//! maximal for a centered beam, `T²(0) = 1 − exp(−2a²/W²)`.
//!
//! The channel transmittance `η` assigned to an offset is chosen with
//! [`TransmittanceScale`]. The default, [`TransmittanceScale::Amplitude`],
//! uses the transmission coefficient `T = √T²(d)`, so the resulting
//! distribution is cut at `T₀ = √(1 − exp(−2a²/W²))`. With this convention a
//! geometry of `a = 1`, `W = 1.5`, `σ_b = 0.6` followed by a fixed
//! transmittance of `0.75` reproduces the mean transmittance and noise
//! tolerance of a measured short free-space link.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Histogram, Provenance, TransmittanceDistribution};
use crate::error::{domain, Error, Result};
use crate::quad::{bessel_i0_scaled, integrate};

/// Default number of Monte Carlo offsets used to estimate a distribution.
pub const DEFAULT_SAMPLES: usize = 1_000_000;

const OVERLAP_TOLERANCE: f64 = 1e-8;
const CHUNK: usize = 1 << 14;

/// How the collected power fraction `T²` maps to the channel transmittance `η`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransmittanceScale {
    /// `η = T`.
    #[default]
    Amplitude,
    /// `η = T²`.
    Intensity,
}

impl TransmittanceScale {
    fn apply(self, intensity: f64) -> f64 {
        match self {
            TransmittanceScale::Amplitude => intensity.sqrt(),
            TransmittanceScale::Intensity => intensity,
        }
    }
}

impl FromStr for TransmittanceScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amplitude" => Ok(Self::Amplitude),
            "intensity" => Ok(Self::Intensity),
            other => Err(domain(format!("unknown transmittance scale {other:?}"))),
        }
    }
}

/// Aperture radius `a`, beam-spot radius `W` and beam-center wander `σ_b`,
/// all in the same (dimensionless) length unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    pub aperture_radius: f64,
    pub spot_radius: f64,
    pub wander_std: f64,
}

impl BeamGeometry {
    pub fn new(aperture_radius: f64, spot_radius: f64, wander_std: f64) -> Result<Self> {
        if !(aperture_radius > 0.0) || !(spot_radius > 0.0) || !(wander_std >= 0.0) {
            return Err(domain(format!(
                "invalid beam geometry: a = {aperture_radius}, W = {spot_radius}, sigma_b = {wander_std}"
            )));
        }
        if !(aperture_radius.is_finite() && spot_radius.is_finite() && wander_std.is_finite()) {
            return Err(domain("beam geometry must be finite"));
        }
        Ok(Self {
            aperture_radius,
            spot_radius,
            wander_std,
        })
    }

    /// `1 − exp(−2a²/W²)`: power fraction collected from a centered beam.
    pub fn max_transmittance(&self) -> f64 {
        let ratio = self.aperture_radius / self.spot_radius;
        -(-2.0 * ratio * ratio).exp_m1()
    }

    /// Upper end of the sampled distribution in the given convention.
    pub fn transmission_cut(&self, scale: TransmittanceScale) -> f64 {
        scale.apply(self.max_transmittance())
    }

    /// Power fraction collected by the aperture when the beam center sits at
    /// distance `offset` from the aperture center.
    pub fn transmittance_at_offset(&self, offset: f64) -> Result<f64> {
        if !(offset >= 0.0) {
            return Err(domain(format!("offset must be >= 0, got {offset}")));
        }
        let a = self.aperture_radius;
        let w2 = self.spot_radius * self.spot_radius;
        let max = self.max_transmittance();
        if offset == 0.0 {
            return Ok(max);
        }
        if offset > a {
            // Integrand is bounded by (4a/W²) exp(−2(d−a)²/W²).
            let gap = offset - a;
            let bound = 4.0 * a * a / w2 * (-2.0 * gap * gap / w2).exp();
            if bound < 1e-14 {
                return Ok(0.0);
            }
        }
        let value = integrate(
            |r| {
                let dr = r - offset;
                4.0 * r / w2 * (-2.0 * dr * dr / w2).exp() * bessel_i0_scaled(4.0 * r * offset / w2)
            },
            0.0,
            a,
            OVERLAP_TOLERANCE,
        )?;
        Ok(value.clamp(0.0, max))
    }

    /// Transmittance `η` for a given offset in the chosen convention.
    pub fn transmittance(&self, offset: f64, scale: TransmittanceScale) -> Result<f64> {
        Ok(scale.apply(self.transmittance_at_offset(offset)?))
    }

    /// Draws `n_samples` transmittances. Offsets are generated in fixed-size
    /// chunks, each with its own ChaCha stream derived from `seed`, so the
    /// result does not depend on the number of worker threads.
    pub fn sample_transmittances(
        &self,
        scale: TransmittanceScale,
        n_samples: usize,
        seed: u64,
    ) -> Result<Vec<f64>> {
        let n_chunks = n_samples.div_ceil(CHUNK);
        let chunks: Vec<Vec<f64>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let len = CHUNK.min(n_samples - c * CHUNK);
                let mut rng = chunk_rng(seed, c);
                (0..len)
                    .map(|_| self.transmittance(self.draw_offset(&mut rng), scale))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        Ok(chunks.concat())
    }

    /// Histogram of `n_samples` transmittances over `n_bins` uniform bins.
    pub fn sample_histogram(
        &self,
        scale: TransmittanceScale,
        n_samples: usize,
        n_bins: usize,
        seed: u64,
    ) -> Result<Histogram> {
        if n_samples == 0 {
            return Err(domain("sample count must be positive"));
        }
        let empty = Histogram::new(n_bins)?;
        let n_chunks = n_samples.div_ceil(CHUNK);
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let len = CHUNK.min(n_samples - c * CHUNK);
                let mut rng = chunk_rng(seed, c);
                let mut hist = empty.clone();
                for _ in 0..len {
                    let eta = self.transmittance(self.draw_offset(&mut rng), scale)?;
                    hist.add(eta.clamp(0.0, 1.0)).expect("clamped into [0, 1]");
                }
                Ok(hist)
            })
            .try_reduce(
                || empty.clone(),
                |mut a, b| {
                    a.merge(&b);
                    Ok(a)
                },
            )
    }

    /// Binned transmittance distribution in the default (amplitude) convention.
    pub fn sample_distribution(
        &self,
        n_samples: usize,
        n_bins: usize,
        seed: u64,
    ) -> Result<TransmittanceDistribution> {
        self.sample_distribution_scaled(TransmittanceScale::default(), n_samples, n_bins, seed)
    }

    pub fn sample_distribution_scaled(
        &self,
        scale: TransmittanceScale,
        n_samples: usize,
        n_bins: usize,
        seed: u64,
    ) -> Result<TransmittanceDistribution> {
        self.sample_histogram(scale, n_samples, n_bins, seed)?
            .into_distribution(Provenance::Model)
    }

    fn draw_offset(&self, rng: &mut ChaCha8Rng) -> f64 {
        let x: f64 = StandardNormal.sample(rng);
        let y: f64 = StandardNormal.sample(rng);
        self.wander_std * x.hypot(y)
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn max_transmittance_values() {
        let g = BeamGeometry::new(1.0, 1e-3, 0.0).unwrap();
        assert_abs_diff_eq!(g.max_transmittance(), 1.0, epsilon = 1e-15);
        let g = BeamGeometry::new(1.0, 2.0, 0.0).unwrap();
        assert_abs_diff_eq!(g.max_transmittance(), 1.0 - (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.max_transmittance(), 0.39347, epsilon = 1e-5);
        let g = BeamGeometry::new(1.0, 1.5, 0.0).unwrap();
        assert_abs_diff_eq!(g.max_transmittance(), 0.5889, epsilon = 1e-4);
        assert_abs_diff_eq!(
            g.transmission_cut(TransmittanceScale::Amplitude),
            g.max_transmittance().sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(BeamGeometry::new(0.0, 1.0, 0.1).is_err());
        assert!(BeamGeometry::new(1.0, -1.0, 0.1).is_err());
        assert!(BeamGeometry::new(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn centered_overlap_matches_closed_form() {
        for w in [0.5, 1.0, 1.5, 2.0, 4.0] {
            let g = BeamGeometry::new(1.0, w, 0.0).unwrap();
            let tiny = g.transmittance_at_offset(1e-9).unwrap();
            assert_abs_diff_eq!(tiny, g.max_transmittance(), epsilon = 1e-8);
            assert_eq!(g.transmittance_at_offset(0.0).unwrap(), g.max_transmittance());
        }
    }

    #[test]
    fn far_offset_collects_nothing() {
        let g = BeamGeometry::new(1.0, 1.5, 0.0).unwrap();
        assert_eq!(g.transmittance_at_offset(50.0).unwrap(), 0.0);
        assert!(g.transmittance_at_offset(6.0).unwrap() < 1e-8);
        assert!(g.transmittance_at_offset(-1.0).is_err());
    }

    #[test]
    fn overlap_decreases_with_offset() {
        let g = BeamGeometry::new(1.0, 1.5, 0.0).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let t = g.transmittance_at_offset(k as f64 * 0.025).unwrap();
            assert!(t <= prev + 1e-12, "not monotone at step {k}");
            prev = t;
        }
    }

    #[test]
    fn zero_wander_gives_single_bin_at_cut() {
        let g = BeamGeometry::new(1.0, 2.0, 0.0).unwrap();
        for scale in [TransmittanceScale::Amplitude, TransmittanceScale::Intensity] {
            let d = g.sample_distribution_scaled(scale, 1000, 1000, 3).unwrap();
            assert_eq!(d.len(), 1);
            assert!((d.bins()[0].eta - g.transmission_cut(scale)).abs() <= 0.5 * d.delta_eta());
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let g = BeamGeometry::new(1.0, 1.5, 0.6).unwrap();
        let a = g.sample_distribution(40_000, 100, 11).unwrap();
        let b = g.sample_distribution(40_000, 100, 11).unwrap();
        let c = g.sample_distribution(40_000, 100, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn histogram_matches_raw_samples() {
        let g = BeamGeometry::new(1.0, 1.5, 0.6).unwrap();
        let scale = TransmittanceScale::Amplitude;
        let raw = g.sample_transmittances(scale, 20_000, 5).unwrap();
        let from_raw = TransmittanceDistribution::from_samples(&raw, 100).unwrap();
        let direct = g.sample_distribution_scaled(scale, 20_000, 100, 5).unwrap();
        assert_eq!(from_raw.bins(), direct.bins());
    }

    #[test]
    fn scale_parsing() {
        assert_eq!("amplitude".parse::<TransmittanceScale>().unwrap(), TransmittanceScale::Amplitude);
        assert_eq!("intensity".parse::<TransmittanceScale>().unwrap(), TransmittanceScale::Intensity);
        assert!("power".parse::<TransmittanceScale>().is_err());
    }
}
