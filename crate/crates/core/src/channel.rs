//! Fading channels as discrete transmittance distributions.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gaussian::CovarianceMatrix;

/// Bin count used for model-generated distributions.
pub const DEFAULT_MODEL_BINS: usize = 1000;
/// Bin count used for measured transmittance samples (`Δη = 0.01`).
pub const DEFAULT_EMPIRICAL_BINS: usize = 100;

const NORMALIZATION_TOLERANCE: f64 = 1e-9;
const FILE_NORMALIZATION_TOLERANCE: f64 = 1e-6;
const EDGE_EPS: f64 = 1e-12;

/// One sub-channel: transmittance `eta` occurring with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubChannel {
    pub eta: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Model,
    #[default]
    Empirical,
}

/// Moments of a transmittance distribution that fix the evolved state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMoments {
    /// `⟨√η⟩`
    pub mean_sqrt: f64,
    /// `⟨η⟩`
    pub mean: f64,
    /// `Var(√η) = ⟨η⟩ − ⟨√η⟩²`
    pub var_sqrt: f64,
}

impl ChannelMoments {
    /// Validates `0 ≤ ⟨√η⟩² ≤ ⟨η⟩ ≤ 1`.
    pub fn new(mean_sqrt: f64, mean: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mean_sqrt) || !(0.0..=1.0 + EDGE_EPS).contains(&mean) {
            return Err(domain(format!(
                "moments out of range: <sqrt eta> = {mean_sqrt}, <eta> = {mean}"
            )));
        }
        let var = mean - mean_sqrt * mean_sqrt;
        if var < -1e-12 {
            return Err(Error::Unphysical(format!(
                "moments violate Jensen's inequality: <sqrt eta>^2 = {} > <eta> = {mean}",
                mean_sqrt * mean_sqrt
            )));
        }
        Ok(Self {
            mean_sqrt,
            mean: mean.min(1.0),
            var_sqrt: var.max(0.0),
        })
    }

    /// Moments with the given `⟨√η⟩` and `Var(√η)`.
    pub fn from_mean_sqrt_and_variance(mean_sqrt: f64, var_sqrt: f64) -> Result<Self> {
        if !(var_sqrt >= 0.0) {
            return Err(domain(format!("fading variance must be >= 0, got {var_sqrt}")));
        }
        Self::new(mean_sqrt, mean_sqrt * mean_sqrt + var_sqrt)
    }

    /// A non-fading channel of transmittance `eta`.
    pub fn fixed(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(domain(format!("transmittance must lie in [0, 1], got {eta}")));
        }
        Ok(Self {
            mean_sqrt: eta.sqrt(),
            mean: eta,
            var_sqrt: 0.0,
        })
    }

    /// `⟨√η⟩²`, the transmittance of the equivalent non-fading channel.
    pub fn mean_sqrt_sq(&self) -> f64 {
        self.mean_sqrt * self.mean_sqrt
    }

    /// Excess noise `Var(√η)(V − 1)` that fading adds to mode B.
    pub fn fading_noise(&self, v: f64) -> f64 {
        self.var_sqrt * (v - 1.0)
    }

    /// Covariance matrix of a two-mode squeezed vacuum of variance `v` after
    /// the channel on mode B, with excess noise `chi` at the output.
    pub fn evolve_tmsv(&self, v: f64, chi: f64) -> Result<CovarianceMatrix> {
        if !(v >= 1.0) {
            return Err(domain(format!("state variance must be >= 1, got {v}")));
        }
        if !(chi >= 0.0) {
            return Err(domain(format!("excess noise must be >= 0, got {chi}")));
        }
        let b = v * self.mean + 1.0 - self.mean + chi;
        let c = self.mean_sqrt * (v * v - 1.0).sqrt();
        Ok(CovarianceMatrix::standard_form(v, b, c))
    }

    /// Equiprobable two-point distribution `√η ∈ {⟨√η⟩ ± √Var}` with these moments.
    pub fn two_point_realization(&self) -> Result<TransmittanceDistribution> {
        let spread = self.var_sqrt.sqrt();
        let lo = self.mean_sqrt - spread;
        let hi = self.mean_sqrt + spread;
        if lo < -EDGE_EPS || hi > 1.0 + EDGE_EPS {
            return Err(domain(format!(
                "moments <sqrt eta> = {}, Var = {} have no two-point realization on [0, 1]",
                self.mean_sqrt, self.var_sqrt
            )));
        }
        if spread == 0.0 {
            return TransmittanceDistribution::fixed(self.mean_sqrt * self.mean_sqrt);
        }
        let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
        TransmittanceDistribution::new(
            vec![
                SubChannel { eta: lo * lo, p: 0.5 },
                SubChannel { eta: hi * hi, p: 0.5 },
            ],
            hi * hi - lo * lo,
            Provenance::Model,
        )
    }
}

/// Purity of the evolved two-mode squeezed vacuum expressed through the channel moments.
pub fn purity_closed_form(m: &ChannelMoments, v: f64) -> f64 {
    let s = m.mean_sqrt_sq();
    1.0 / (m.var_sqrt * v * (v - 1.0) + v * (1.0 - s) + s)
}

/// Discrete transmittance distribution `{(η_i, p_i)}` with bin width `Δη`.
///
/// Bins are sorted by strictly increasing `η`, carry positive probability and
/// sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmittanceDistribution {
    bins: Vec<SubChannel>,
    delta_eta: f64,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct DistributionFile {
    delta_eta: f64,
    bins: Vec<SubChannel>,
}

impl TransmittanceDistribution {
    pub fn new(bins: Vec<SubChannel>, delta_eta: f64, provenance: Provenance) -> Result<Self> {
        let total: f64 = bins.iter().map(|b| b.p).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(domain(format!("probabilities sum to {total}, expected 1")));
        }
        Self::validated(bins, delta_eta, provenance)
    }

    /// Builds a distribution from unnormalized non-negative weights.
    pub fn from_weights(bins: Vec<SubChannel>, delta_eta: f64, provenance: Provenance) -> Result<Self> {
        let total: f64 = bins.iter().map(|b| b.p).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(domain(format!("weights sum to {total}")));
        }
        let bins = bins
            .into_iter()
            .map(|b| SubChannel { eta: b.eta, p: b.p / total })
            .collect();
        Self::validated(bins, delta_eta, provenance)
    }

    /// A non-fading channel.
    pub fn fixed(eta: f64) -> Result<Self> {
        Self::new(
            vec![SubChannel { eta, p: 1.0 }],
            1.0 / DEFAULT_MODEL_BINS as f64,
            Provenance::Model,
        )
    }

    fn validated(bins: Vec<SubChannel>, delta_eta: f64, provenance: Provenance) -> Result<Self> {
        if !(delta_eta > 0.0) || !delta_eta.is_finite() {
            return Err(domain(format!("bin width must be > 0, got {delta_eta}")));
        }
        for (i, b) in bins.iter().enumerate() {
            if !(0.0..=1.0).contains(&b.eta) {
                return Err(domain(format!("bin {i}: transmittance {} outside [0, 1]", b.eta)));
            }
            if !(b.p >= 0.0) || !b.p.is_finite() {
                return Err(domain(format!("bin {i}: invalid probability {}", b.p)));
            }
        }
        if bins.windows(2).any(|w| w[1].eta <= w[0].eta) {
            return Err(domain("transmittance values must be strictly increasing"));
        }
        let bins: Vec<SubChannel> = bins.into_iter().filter(|b| b.p > 0.0).collect();
        if bins.is_empty() {
            return Err(domain("distribution has no sub-channel with positive probability"));
        }
        Ok(Self {
            bins,
            delta_eta,
            provenance,
        })
    }

    /// Uniform histogram of `samples` over `[0, 1]` with `n_bins` bins,
    /// represented by bin centers. Empty bins are dropped.
    pub fn from_samples(samples: &[f64], n_bins: usize) -> Result<Self> {
        let mut hist = Histogram::new(n_bins)?;
        for (index, &value) in samples.iter().enumerate() {
            hist.add(value)
                .map_err(|_| Error::SampleOutOfRange { index, value })?;
        }
        hist.into_distribution(Provenance::Empirical)
    }

    pub fn bins(&self) -> &[SubChannel] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn delta_eta(&self) -> f64 {
        self.delta_eta
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Largest transmittance with non-zero probability.
    pub fn max_eta(&self) -> f64 {
        self.bins[self.bins.len() - 1].eta
    }

    pub fn min_eta(&self) -> f64 {
        self.bins[0].eta
    }

    /// Lower edge of bin `i`, clamped at zero.
    pub fn lower_edge(&self, i: usize) -> f64 {
        (self.bins[i].eta - 0.5 * self.delta_eta).max(0.0)
    }

    pub fn moments(&self) -> ChannelMoments {
        let (mut mean_sqrt, mut mean) = (0.0, 0.0);
        for b in &self.bins {
            mean_sqrt += b.p * b.eta.sqrt();
            mean += b.p * b.eta;
        }
        let var_sqrt = (mean - mean_sqrt * mean_sqrt).max(0.0);
        ChannelMoments {
            mean_sqrt,
            mean,
            var_sqrt,
        }
    }

    pub fn evolve_tmsv(&self, v: f64, chi: f64) -> Result<CovarianceMatrix> {
        self.moments().evolve_tmsv(v, chi)
    }

    /// The evolved state assembled explicitly as `Σ p_i γ_i`, where `γ_i` is the
    /// two-mode squeezed vacuum after a fixed loss channel `η_i` on mode B.
    pub fn convex_mixture(&self, v: f64, chi: f64) -> Result<CovarianceMatrix> {
        let input = CovarianceMatrix::tmsv(v)?;
        let mut acc = nalgebra::DMatrix::zeros(4, 4);
        for b in &self.bins {
            let gi = input.apply_loss_channel(1, b.eta, chi)?;
            acc += gi.entries() * b.p;
        }
        CovarianceMatrix::new(acc)
    }

    /// Keeps the sub-channels with `η_i ∈ [eta_min, eta_max]` and renormalizes.
    /// Returns the restricted distribution and the selected probability mass.
    pub fn restrict(&self, eta_min: f64, eta_max: f64) -> Result<(Self, f64)> {
        if eta_min > eta_max {
            return Err(domain(format!("eta_min {eta_min} exceeds eta_max {eta_max}")));
        }
        let kept: Vec<SubChannel> = self
            .bins
            .iter()
            .filter(|b| b.eta >= eta_min - EDGE_EPS && b.eta <= eta_max + EDGE_EPS)
            .copied()
            .collect();
        let success: f64 = kept.iter().map(|b| b.p).sum();
        if kept.is_empty() || success <= 0.0 {
            return Err(Error::EmptySelection { eta_min, eta_max });
        }
        let restricted = Self::from_weights(kept, self.delta_eta, self.provenance)?;
        Ok((restricted, success))
    }

    /// `restrict(eta_min, 1)`.
    pub fn restrict_from(&self, eta_min: f64) -> Result<(Self, f64)> {
        self.restrict(eta_min, 1.0)
    }

    /// Series composition with a fixed attenuation `t`: every `η_i → t·η_i`.
    pub fn compose_fixed_loss(&self, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(domain(format!("fixed transmittance must lie in [0, 1], got {t}")));
        }
        let mut bins: Vec<SubChannel> = Vec::with_capacity(self.bins.len());
        for b in &self.bins {
            let eta = t * b.eta;
            match bins.last_mut() {
                Some(last) if last.eta == eta => last.p += b.p,
                _ => bins.push(SubChannel { eta, p: b.p }),
            }
        }
        let delta = if t > 0.0 { t * self.delta_eta } else { self.delta_eta };
        Self::from_weights(bins, delta, self.provenance)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DistributionFile {
            delta_eta: self.delta_eta,
            bins: self.bins.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parses the distribution JSON format. Probabilities are renormalized; a
    /// warning is logged if their sum is off by more than `1e-6`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: DistributionFile = serde_json::from_str(text)?;
        let total: f64 = file.bins.iter().map(|b| b.p).sum();
        if (total - 1.0).abs() > FILE_NORMALIZATION_TOLERANCE {
            log::warn!("distribution probabilities sum to {total}; renormalizing");
        }
        Self::from_weights(file.bins, file.delta_eta, Provenance::Empirical)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

/// Parses a samples file: one transmittance per line, blank lines and `#`
/// comments ignored.
pub fn parse_samples(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let value: f64 = line.parse().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("not a number: {line:?}"),
        })?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("transmittance {value} outside [0, 1]"),
            });
        }
        out.push(value);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no samples found".into(),
        });
    }
    Ok(out)
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_samples(&std::fs::read_to_string(path)?)
}

/// Formats samples in the samples-file format.
pub fn format_samples(samples: &[f64]) -> String {
    let mut out = String::with_capacity(samples.len() * 20);
    for s in samples {
        let _ = writeln!(out, "{s}");
    }
    out
}

/// Counts of values in `n` uniform bins over `[0, 1]`. Mergeable by addition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    counts: Vec<u64>,
}

impl Histogram {
    pub fn new(n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(domain("bin count must be positive"));
        }
        Ok(Self {
            counts: vec![0; n_bins],
        })
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Adds one value; `Err(value)` if it lies outside `[0, 1]`.
    pub fn add(&mut self, value: f64) -> std::result::Result<(), f64> {
        if !(0.0..=1.0).contains(&value) {
            return Err(value);
        }
        let n = self.counts.len();
        let k = ((value * n as f64) as usize).min(n - 1);
        self.counts[k] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &Histogram) {
        assert_eq!(self.counts.len(), other.counts.len(), "histogram bin counts differ");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn into_distribution(self, provenance: Provenance) -> Result<TransmittanceDistribution> {
        let n = self.counts.len() as f64;
        let total = self.total();
        if total == 0 {
            return Err(domain("histogram is empty"));
        }
        let bins = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| SubChannel {
                eta: (k as f64 + 0.5) / n,
                p: c as f64 / total as f64,
            })
            .collect();
        TransmittanceDistribution::from_weights(bins, 1.0 / n, provenance)
    }
}
