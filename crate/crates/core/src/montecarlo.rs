//! Finite-ensemble simulation of the entanglement-based protocol.
//!
//! Each data point is a pair of orthogonally squeezed vacua mixed on a
//! balanced beamsplitter. Mode B then passes a loss channel whose
//! transmittance is drawn from the fading distribution, picks up Gaussian
//! excess noise, and the point is kept when its estimated transmittance lies in
//! the post-selection region. The covariance matrix estimated from the kept
//! points feeds the key-rate computation.
//!
//! Points are generated in fixed-size chunks with independent ChaCha streams
//! and per-bin compensated moment sums, merged in chunk order, so a run is
//! bit-identical for any number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{ChannelMoments, SubChannel, TransmittanceDistribution};
use crate::error::{domain, Error, Result};
use crate::gaussian::{CovarianceMatrix, PHYSICAL_TOLERANCE};
use crate::security::{key_rate_from_covariance, KeyRateReport};

const CHUNK: usize = 1 << 14;
const EDGE_EPS: f64 = 1e-12;
// Upper-triangle index pairs of the 4×4 covariance.
const PAIRS: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

/// Parameters of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// `V = cosh 2r`
    pub state_variance: f64,
    pub distribution: TransmittanceDistribution,
    pub excess_noise: f64,
    pub n_points: usize,
    pub eta_min: f64,
    /// Standard deviation of the actual transmittance around the estimate.
    pub estimation_error: f64,
    pub seed: u64,
}

impl SimConfig {
    /// Configuration with no post-selection and perfect estimation.
    pub fn new(
        state_variance: f64,
        distribution: TransmittanceDistribution,
        excess_noise: f64,
        n_points: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            state_variance,
            distribution,
            excess_noise,
            n_points,
            eta_min: 0.0,
            estimation_error: 0.0,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_eta_min(mut self, eta_min: f64) -> Self {
        self.eta_min = eta_min;
        self
    }

    pub fn with_estimation_error(mut self, sigma_eta: f64) -> Self {
        self.estimation_error = sigma_eta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Squeezing parameter `r` with `cosh 2r = V`.
    pub fn squeezing(&self) -> f64 {
        0.5 * self.state_variance.acosh()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.state_variance >= 1.0) || !self.state_variance.is_finite() {
            return Err(domain(format!("state variance must be >= 1, got {}", self.state_variance)));
        }
        if !(self.excess_noise >= 0.0) || !self.excess_noise.is_finite() {
            return Err(domain(format!("excess noise must be >= 0, got {}", self.excess_noise)));
        }
        if self.n_points == 0 {
            return Err(domain("ensemble size must be >= 1"));
        }
        if !(self.estimation_error >= 0.0) || !self.estimation_error.is_finite() {
            return Err(domain(format!(
                "estimation error must be >= 0, got {}",
                self.estimation_error
            )));
        }
        if !self.eta_min.is_finite() {
            return Err(domain("eta_min must be finite"));
        }
        Ok(())
    }

    fn record(&self, eta_min: f64) -> ConfigRecord {
        ConfigRecord {
            state_variance: self.state_variance,
            squeezing: self.squeezing(),
            excess_noise: self.excess_noise,
            n_points: self.n_points,
            eta_min,
            sigma_eta: self.estimation_error,
            seed: self.seed,
            delta_eta: self.distribution.delta_eta(),
            channel_moments: self.distribution.moments(),
            bins: self.distribution.bins().to_vec(),
        }
    }
}

/// Serialized form of a [`SimConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub state_variance: f64,
    pub squeezing: f64,
    pub excess_noise: f64,
    pub n_points: usize,
    pub eta_min: f64,
    pub sigma_eta: f64,
    pub seed: u64,
    pub delta_eta: f64,
    pub channel_moments: ChannelMoments,
    pub bins: Vec<SubChannel>,
}

/// Covariance matrix estimated from the retained points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCovariance {
    /// `⟨r_i r_j⟩ − ⟨r_i⟩⟨r_j⟩`, serialized row-major.
    #[serde(serialize_with = "ser_matrix", deserialize_with = "de_matrix")]
    pub covariance: CovarianceMatrix,
    #[serde(rename = "retained_count")]
    pub retained: u64,
    pub physical: bool,
    pub min_symplectic_eigenvalue: f64,
    pub means: [f64; 4],
}

fn ser_matrix<S: Serializer>(m: &CovarianceMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    m.to_row_major().serialize(s)
}

fn de_matrix<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CovarianceMatrix, D::Error> {
    let values = Vec::<f64>::deserialize(d)?;
    CovarianceMatrix::from_row_major(2, &values).map_err(serde::de::Error::custom)
}

/// Result of a simulation run; serializes to the run JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    pub config: ConfigRecord,
    #[serde(flatten)]
    pub sample: SampleCovariance,
    /// Absent when the sample matrix is unphysical.
    pub key_rate_report: Option<KeyRateReport>,
}

impl SimulationRun {
    /// Success-weighted key rate, zero when unphysical or insecure.
    pub fn k_weighted(&self) -> f64 {
        self.key_rate_report.map_or(0.0, |r| r.k_weighted)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(&mut self, other: &Neumaier) {
        self.add(other.sum);
        self.add(other.comp);
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    first: [Neumaier; 4],
    second: [Neumaier; 10],
}

impl Moments {
    fn add(&mut self, r: &[f64; 4]) {
        self.count += 1;
        for (acc, &x) in self.first.iter_mut().zip(r) {
            acc.add(x);
        }
        for (acc, &(i, j)) in self.second.iter_mut().zip(&PAIRS) {
            acc.add(r[i] * r[j]);
        }
    }

    fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            a.merge(b);
        }
        for (a, b) in self.second.iter_mut().zip(&other.second) {
            a.merge(b);
        }
    }

    fn covariance(&self) -> Result<SampleCovariance> {
        if self.count == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let n = self.count as f64;
        let means: [f64; 4] = std::array::from_fn(|i| self.first[i].value() / n);
        let mut entries = nalgebra::DMatrix::zeros(4, 4);
        for (acc, &(i, j)) in self.second.iter().zip(&PAIRS) {
            let c = acc.value() / n - means[i] * means[j];
            entries[(i, j)] = c;
            entries[(j, i)] = c;
        }
        let covariance = CovarianceMatrix::new(entries)?;
        let min_symplectic_eigenvalue = covariance.min_symplectic_eigenvalue()?;
        Ok(SampleCovariance {
            physical: covariance.is_physical_within(PHYSICAL_TOLERANCE),
            covariance,
            retained: self.count,
            min_symplectic_eigenvalue,
            means,
        })
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Per-bin moment sums over the whole ensemble, indexed by the bin of the
/// estimated transmittance.
fn accumulate(cfg: &SimConfig) -> Result<Vec<Moments>> {
    cfg.validate()?;
    let bins = cfg.distribution.bins();
    let mut cumulative = Vec::with_capacity(bins.len());
    let mut acc = 0.0;
    for b in bins {
        acc += b.p;
        cumulative.push(acc);
    }
    let r = cfg.squeezing();
    let (squeezed, anti) = ((-r).exp(), r.exp());
    let noise = cfg.excess_noise.sqrt();
    let sigma_eta = cfg.estimation_error;
    let half = std::f64::consts::FRAC_1_SQRT_2;

    let n_chunks = cfg.n_points.div_ceil(CHUNK);
    let partial: Vec<Vec<Moments>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(cfg.n_points - c * CHUNK);
            let mut rng = chunk_rng(cfg.seed, c);
            let mut out = vec![Moments::default(); bins.len()];
            for _ in 0..len {
                let m1 = [squeezed * normal(&mut rng), anti * normal(&mut rng)];
                let m2 = [anti * normal(&mut rng), squeezed * normal(&mut rng)];
                let u: f64 = rng.random::<f64>() * acc;
                let k = cumulative.partition_point(|&cp| cp <= u).min(bins.len() - 1);
                let eta_est = bins[k].eta;
                let eta = if sigma_eta > 0.0 {
                    (eta_est + sigma_eta * normal(&mut rng)).clamp(0.0, 1.0)
                } else {
                    eta_est
                };
                let (t, l) = (eta.sqrt(), (1.0 - eta).sqrt());
                let mut point = [0.0; 4];
                for q in 0..2 {
                    point[q] = half * (m1[q] + m2[q]);
                    let b = half * (m2[q] - m1[q]);
                    let mut out_b = t * b + l * normal(&mut rng);
                    if noise > 0.0 {
                        out_b += noise * normal(&mut rng);
                    }
                    point[2 + q] = out_b;
                }
                out[k].add(&point);
            }
            out
        })
        .collect();

    let mut total = vec![Moments::default(); bins.len()];
    for chunk in &partial {
        for (t, m) in total.iter_mut().zip(chunk) {
            t.merge(m);
        }
    }
    Ok(total)
}

fn run_from(cfg: &SimConfig, merged: &Moments, eta_min: f64) -> Result<SimulationRun> {
    let sample = merged.covariance()?;
    let key_rate_report = if sample.physical {
        let success = sample.retained as f64 / cfg.n_points as f64;
        Some(key_rate_from_covariance(&sample.covariance)?.with_success(success))
    } else {
        None
    };
    Ok(SimulationRun {
        config: cfg.record(eta_min),
        sample,
        key_rate_report,
    })
}

/// Simulates the ensemble, keeps points whose estimated transmittance is at
/// least `cfg.eta_min`, and evaluates the key rate of the sample matrix.
pub fn simulate(cfg: &SimConfig) -> Result<SimulationRun> {
    let per_bin = accumulate(cfg)?;
    let mut merged = Moments::default();
    for (b, m) in cfg.distribution.bins().iter().zip(&per_bin) {
        if b.eta >= cfg.eta_min - EDGE_EPS {
            merged.merge(m);
        }
    }
    run_from(cfg, &merged, cfg.eta_min)
}

/// Simulates with the actual transmittance scattered around the estimate and
/// chooses the post-selection edge that maximizes the success-weighted key
/// rate of the sample matrices. `cfg.eta_min` is ignored.
///
/// Draws outside `[0, 1]` are clamped. With `estimation_error = 0` this is the
/// optimally post-selected version of [`simulate`].
pub fn simulate_imperfect_estimation(cfg: &SimConfig) -> Result<SimulationRun> {
    let per_bin = accumulate(cfg)?;
    let d = &cfg.distribution;
    let mut suffix = Moments::default();
    let mut best: Option<SimulationRun> = None;
    for i in (0..d.len()).rev() {
        suffix.merge(&per_bin[i]);
        if suffix.count == 0 {
            continue;
        }
        let run = run_from(cfg, &suffix, d.lower_edge(i))?;
        // Descending scan, so `>=` keeps the smallest edge on ties.
        if best.as_ref().is_none_or(|b| run.k_weighted() >= b.k_weighted()) {
            best = Some(run);
        }
    }
    best.ok_or(Error::EmptyEnsemble)
}

/// `repeats` runs of [`simulate`] with seeds `seed, seed + 1, …`.
pub fn simulate_repeats(cfg: &SimConfig, repeats: usize) -> Result<Vec<SimulationRun>> {
    (0..repeats as u64)
        .map(|k| simulate(&cfg.clone().with_seed(cfg.seed.wrapping_add(k))))
        .collect()
}
