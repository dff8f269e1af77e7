//! Entanglement and secret-key-rate analysis of two-mode Gaussian states sent
//! through fading channels.
//!
//! A fading channel is a discrete distribution of transmittance values
//! `{(η_i, p_i)}`. Sending one half of a two-mode squeezed vacuum through it
//! produces a mixed Gaussian state whose covariance matrix depends on the
//! channel only through `⟨√η⟩` and `⟨η⟩`. The crate covers:
//!
//! - [`gaussian`]: covariance-matrix algebra, symplectic spectra, purity,
//!   log-negativity, von Neumann entropy and homodyne conditioning.
//! - [`channel`]: transmittance distributions, their moments, state evolution
//!   and restriction to post-selection regions.
//! - [`beam`]: transmittance statistics of a wandering Gaussian beam on a
//!   circular aperture.
//! - [`security`]: mutual information, Holevo bound, collective-attack key
//!   rate and the fading-variance thresholds.
//! - [`postselect`]: optimization of the post-selection region and modulation.
//! - [`montecarlo`]: finite-ensemble simulation of the entanglement-based
//!   protocol, including imperfect channel estimation.
//! - [`sweep`] and [`cli`]: parameter sweeps, CSV output and the command-line
//!   front end.
//!
//! All quadrature variances are in shot-noise units (vacuum variance 1) and
//! all information quantities are in bits per measurement.

#![forbid(unsafe_code)]

// `!(x > 0.0)` guards are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beam;
pub mod channel;
pub mod cli;
pub mod error;
pub mod gaussian;
pub mod montecarlo;
pub mod postselect;
pub mod presets;
mod quad;
pub mod security;
pub mod sweep;

pub use beam::{BeamGeometry, TransmittanceScale};
pub use channel::{ChannelMoments, Provenance, SubChannel, TransmittanceDistribution};
pub use error::{Error, Result};
pub use gaussian::{CovarianceMatrix, SymplecticForm};
pub use montecarlo::{SampleCovariance, SimConfig, SimulationRun};
pub use postselect::PsOptimum;
pub use security::{KeyRateReport, ProtocolParams};
