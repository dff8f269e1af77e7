//! Security of the Gaussian coherent-state protocol over fading channels.
//!
//! Bob homodynes the x quadrature, Alice heterodynes, reconciliation is reverse
//! and perfect, and all excess noise is attributed to the eavesdropper, who
//! holds the purification of the shared state. The collective-attack key rate
//! is `K = I_AB − χ_BE`.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelMoments, TransmittanceDistribution};
use crate::error::{domain, Error, Result};
use crate::gaussian::{entropy_of_symplectic_eigenvalue, CovarianceMatrix, PHYSICAL_TOLERANCE};

/// Bisection stops once the bracket on `Var(√η)` is narrower than this.
pub const VARIANCE_TOLERANCE: f64 = 1e-8;
/// A key rate counts as positive only above this many bits.
pub const KEY_SIGN_TOLERANCE: f64 = 1e-10;

/// Modulation variance `σ = V − 1` and output excess noise `χ`, both in SNU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    modulation: f64,
    excess_noise: f64,
}

impl ProtocolParams {
    pub fn new(modulation: f64, excess_noise: f64) -> Result<Self> {
        if !(modulation >= 0.0) || !modulation.is_finite() {
            return Err(domain(format!("modulation must be >= 0, got {modulation}")));
        }
        if !(excess_noise >= 0.0) || !excess_noise.is_finite() {
            return Err(domain(format!("excess noise must be >= 0, got {excess_noise}")));
        }
        Ok(Self {
            modulation,
            excess_noise,
        })
    }

    /// Parameters for an entangled source of variance `v`.
    pub fn from_state_variance(v: f64, excess_noise: f64) -> Result<Self> {
        Self::new(v - 1.0, excess_noise)
    }

    /// `σ`
    pub fn modulation(&self) -> f64 {
        self.modulation
    }

    /// `V = σ + 1`
    pub fn state_variance(&self) -> f64 {
        self.modulation + 1.0
    }

    /// `χ`
    pub fn excess_noise(&self) -> f64 {
        self.excess_noise
    }
}

/// Information quantities (bits per measurement) for one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub i_ab: f64,
    pub chi_be: f64,
    /// `I_AB − χ_BE`; negative when the channel is insecure.
    pub k: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Symplectic eigenvalue of mode A conditioned on Bob's measurement.
    pub lambda3: f64,
    pub moments: Option<ChannelMoments>,
    pub ps_success: f64,
    /// `ps_success · max(K, 0)`
    pub k_weighted: f64,
}

impl KeyRateReport {
    fn new(i_ab: f64, holevo: Holevo, moments: Option<ChannelMoments>) -> Self {
        let k = i_ab - holevo.chi_be;
        Self {
            i_ab,
            chi_be: holevo.chi_be,
            k,
            lambda1: holevo.lambdas[0],
            lambda2: holevo.lambdas[1],
            lambda3: holevo.lambdas[2],
            moments,
            ps_success: 1.0,
            k_weighted: k.max(0.0),
        }
    }

    /// Re-weights the report by a post-selection success probability.
    pub fn with_success(mut self, probability: f64) -> Self {
        self.ps_success = probability;
        self.k_weighted = probability * self.k.max(0.0);
        self
    }

    pub fn is_secure(&self) -> bool {
        self.k > KEY_SIGN_TOLERANCE
    }
}

#[derive(Debug, Clone, Copy)]
struct Holevo {
    chi_be: f64,
    lambdas: [f64; 3],
}

fn holevo_of(gamma: &CovarianceMatrix) -> Result<Holevo> {
    let spectrum = gamma.symplectic_eigenvalues()?;
    if spectrum.len() != 2 {
        return Err(Error::Structural("Holevo bound needs a two-mode state".into()));
    }
    let cond = gamma.conditional_homodyne_x()?;
    let lambda3 = cond.symplectic_eigenvalues()?[0];
    let lambdas = [spectrum[0], spectrum[1], lambda3];
    if let Some(bad) = lambdas.iter().find(|&&l| !(l >= 1.0 - PHYSICAL_TOLERANCE)) {
        return Err(Error::Unphysical(format!("symplectic eigenvalue {bad} < 1")));
    }
    let chi_be = entropy_of_symplectic_eigenvalue(lambdas[0])?
        + entropy_of_symplectic_eigenvalue(lambdas[1])?
        - entropy_of_symplectic_eigenvalue(lambdas[2])?;
    Ok(Holevo {
        chi_be: chi_be.max(0.0),
        lambdas,
    })
}

/// Mutual information between Alice's heterodyne and Bob's x-homodyne
/// outcomes, written through the channel moments.
pub fn mutual_information(m: &ChannelMoments, p: &ProtocolParams) -> Result<f64> {
    let sigma = p.modulation();
    let ratio = m.mean_sqrt_sq() * sigma / (1.0 + m.mean * sigma + p.excess_noise());
    let arg = 1.0 - ratio;
    if !(arg > 0.0) {
        return Err(Error::Unphysical(format!(
            "mutual information argument {arg} is not positive"
        )));
    }
    Ok(0.5 * (1.0 / arg).log2())
}

/// Mutual information from an arbitrary two-mode covariance matrix, through
/// Bob's x variance conditioned on both of Alice's heterodyne outcomes.
pub fn mutual_information_from_covariance(gamma: &CovarianceMatrix) -> Result<f64> {
    if gamma.n_modes() != 2 {
        return Err(Error::Structural("mutual information needs a two-mode state".into()));
    }
    let vb = gamma.get(2, 2);
    let het = gamma.block(0, 0) + nalgebra::Matrix2::identity();
    let c = nalgebra::Vector2::new(gamma.get(0, 2), gamma.get(1, 2));
    let inv = het
        .try_inverse()
        .ok_or_else(|| Error::Unphysical("singular heterodyne covariance".into()))?;
    let conditional = vb - (c.transpose() * inv * c)[(0, 0)];
    if !(conditional > 0.0) || !(vb > 0.0) {
        return Err(Error::Unphysical(format!(
            "conditional variance {conditional} is not positive"
        )));
    }
    Ok(0.5 * (vb / conditional).log2())
}

/// Holevo bound `χ_BE` on Eve's information about Bob's outcomes.
pub fn holevo_bound(m: &ChannelMoments, p: &ProtocolParams) -> Result<f64> {
    let gamma = m.evolve_tmsv(p.state_variance(), p.excess_noise())?;
    Ok(holevo_of(&gamma)?.chi_be)
}

/// Key rate for channel moments, with `I_AB` in closed form and `χ_BE` from
/// the evolved covariance matrix.
pub fn key_rate_from_moments(m: &ChannelMoments, p: &ProtocolParams) -> Result<KeyRateReport> {
    let i_ab = mutual_information(m, p)?;
    let gamma = m.evolve_tmsv(p.state_variance(), p.excess_noise())?;
    Ok(KeyRateReport::new(i_ab, holevo_of(&gamma)?, Some(*m)))
}

/// Collective-attack key rate over a fading channel.
pub fn key_rate_collective(d: &TransmittanceDistribution, p: &ProtocolParams) -> Result<KeyRateReport> {
    key_rate_from_moments(&d.moments(), p)
}

/// Key rate computed directly from a two-mode covariance matrix.
pub fn key_rate_from_covariance(gamma: &CovarianceMatrix) -> Result<KeyRateReport> {
    if !gamma.is_physical() {
        return Err(Error::Unphysical(
            "covariance matrix violates the uncertainty principle".into(),
        ));
    }
    let i_ab = mutual_information_from_covariance(gamma)?;
    Ok(KeyRateReport::new(i_ab, holevo_of(gamma)?, None))
}

/// Largest `Var(√η)` that keeps the log-negativity positive.
pub fn max_fading_variance_entanglement(mean_sqrt_sq: f64, v: f64, chi: f64) -> Result<f64> {
    check_mean_sqrt_sq(mean_sqrt_sq)?;
    if !(v > 1.0) {
        return Err(domain(format!(
            "state variance must exceed 1, got {v}; entanglement survives any fading at V = 1"
        )));
    }
    if !(chi >= 0.0) {
        return Err(domain(format!("excess noise must be >= 0, got {chi}")));
    }
    let s = mean_sqrt_sq;
    let root = (4.0 * (1.0 + s) * (1.0 + s) + chi * chi).sqrt();
    Ok((2.0 * (s - 1.0) - chi + root) / (2.0 * (v - 1.0)))
}

/// Largest `Var(√η)` that keeps the individual-attack key rate positive.
pub fn max_fading_variance_individual(mean_sqrt_sq: f64, sigma: f64, chi: f64) -> Result<f64> {
    check_mean_sqrt_sq(mean_sqrt_sq)?;
    if !(sigma > 0.0) {
        return Err(domain(format!("modulation must be > 0, got {sigma}")));
    }
    if !(chi >= 0.0) {
        return Err(domain(format!("excess noise must be >= 0, got {chi}")));
    }
    let s = mean_sqrt_sq;
    let root = (s * s * sigma * sigma + 4.0 * (sigma + 1.0) * (sigma + 1.0)).sqrt();
    Ok((s * sigma - 2.0 * (sigma + 1.0) * (chi + 1.0) + root) / (2.0 * sigma * (sigma + 1.0)))
}

/// Result of the collective-attack fading-variance threshold search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveThreshold {
    pub var_max: f64,
    /// The key rate is already non-positive without fading.
    pub insecure_at_zero_fading: bool,
}

/// Largest `Var(√η)` with a positive collective-attack key rate at fixed
/// `⟨√η⟩²`, found by bisection over `[0, min(1/4, 1 − ⟨√η⟩²)]`.
pub fn max_fading_variance_collective(
    mean_sqrt_sq: f64,
    sigma: f64,
    chi: f64,
) -> Result<CollectiveThreshold> {
    check_mean_sqrt_sq(mean_sqrt_sq)?;
    if !(sigma > 0.0) {
        return Err(domain(format!("modulation must be > 0, got {sigma}")));
    }
    let params = ProtocolParams::new(sigma, chi)?;
    let mean_sqrt = mean_sqrt_sq.sqrt();
    let secure = |var: f64| -> Result<bool> {
        let m = ChannelMoments::from_mean_sqrt_and_variance(mean_sqrt, var)?;
        Ok(key_rate_from_moments(&m, &params)?.is_secure())
    };
    if !secure(0.0)? {
        return Ok(CollectiveThreshold {
            var_max: 0.0,
            insecure_at_zero_fading: true,
        });
    }
    let mut lo = 0.0;
    let mut hi = 0.25f64.min(1.0 - mean_sqrt_sq);
    if secure(hi)? {
        return Ok(CollectiveThreshold {
            var_max: hi,
            insecure_at_zero_fading: false,
        });
    }
    while hi - lo > VARIANCE_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if secure(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CollectiveThreshold {
        var_max: lo,
        insecure_at_zero_fading: false,
    })
}

fn check_mean_sqrt_sq(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(domain(format!("<sqrt eta>^2 must lie in [0, 1], got {s}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Provenance, SubChannel};
    use approx::assert_abs_diff_eq;

    fn params(sigma: f64, chi: f64) -> ProtocolParams {
        ProtocolParams::new(sigma, chi).unwrap()
    }

    #[test]
    fn mutual_information_cases() {
        let m = ChannelMoments::fixed(0.4).unwrap();
        assert_eq!(mutual_information(&m, &params(0.0, 0.0)).unwrap(), 0.0);
        let ideal = ChannelMoments::fixed(1.0).unwrap();
        assert_abs_diff_eq!(mutual_information(&ideal, &params(3.0, 0.0)).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mutual_information_matches_conditional_variance() {
        let m = ChannelMoments::from_mean_sqrt_and_variance(0.492f64.sqrt(), 3e-3).unwrap();
        let p = params(100.0, 0.0);
        let closed = mutual_information(&m, &p).unwrap();
        let gamma = m.evolve_tmsv(p.state_variance(), 0.0).unwrap();
        let from_matrix = mutual_information_from_covariance(&gamma).unwrap();
        assert_abs_diff_eq!(closed, from_matrix, epsilon = 1e-12);
    }

    #[test]
    fn lossless_channel_leaks_nothing() {
        let d = TransmittanceDistribution::fixed(1.0).unwrap();
        let r = key_rate_collective(&d, &params(3.0, 0.0)).unwrap();
        assert_abs_diff_eq!(r.chi_be, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.k, 1.0, epsilon = 1e-9);
        for l in [r.lambda1, r.lambda2, r.lambda3] {
            assert_abs_diff_eq!(l, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn blocked_channel_carries_nothing() {
        let d = TransmittanceDistribution::fixed(0.0).unwrap();
        let r = key_rate_collective(&d, &params(9.0, 0.0)).unwrap();
        assert_abs_diff_eq!(r.i_ab, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.chi_be, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn holevo_dual_path_on_two_level_channel() {
        let d = TransmittanceDistribution::new(
            vec![SubChannel { eta: 0.4, p: 0.5 }, SubChannel { eta: 0.6, p: 0.5 }],
            0.01,
            Provenance::Model,
        )
        .unwrap();
        let p = params(10.0, 0.0);
        let closed = holevo_bound(&d.moments(), &p).unwrap();
        let mixture = d.convex_mixture(p.state_variance(), 0.0).unwrap();
        let assembled = key_rate_from_covariance(&mixture).unwrap().chi_be;
        assert_abs_diff_eq!(closed, assembled, epsilon = 1e-9);
    }

    #[test]
    fn entanglement_threshold_reduces_without_noise() {
        assert_abs_diff_eq!(max_fading_variance_entanglement(0.5, 3.0, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        for s in [0.1, 0.37, 0.9] {
            for v in [1.5, 10.0, 80.0] {
                let got = max_fading_variance_entanglement(s, v, 0.0).unwrap();
                assert_abs_diff_eq!(got, 2.0 * s / (v - 1.0), epsilon = 1e-12);
            }
        }
        assert!(max_fading_variance_entanglement(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn individual_threshold_cases() {
        let got = max_fading_variance_individual(1.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(got, (17f64.sqrt() - 3.0) / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(got, 0.2808, epsilon = 1e-4);
        let mut prev = f64::INFINITY;
        for chi in [0.0, 0.01, 0.05, 0.1] {
            let v = max_fading_variance_individual(0.6, 5.0, chi).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let big = max_fading_variance_individual(0.5, 1e6, 0.0).unwrap();
        assert!(big.abs() < 1e-5);
        assert!(max_fading_variance_individual(0.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn collective_threshold_insecure_flag() {
        let t = max_fading_variance_collective(0.1, 100.0, 0.5).unwrap();
        assert!(t.insecure_at_zero_fading);
        assert_eq!(t.var_max, 0.0);
    }

    #[test]
    fn report_weighting() {
        let d = TransmittanceDistribution::fixed(0.5).unwrap();
        let r = key_rate_collective(&d, &params(4.0, 0.0)).unwrap().with_success(0.25);
        assert_abs_diff_eq!(r.k_weighted, 0.25 * r.k, epsilon = 1e-15);
        assert!(r.k > 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(ProtocolParams::new(-1.0, 0.0).is_err());
        assert!(ProtocolParams::new(1.0, -0.1).is_err());
        let p = ProtocolParams::from_state_variance(11.0, 0.0).unwrap();
        assert_eq!(p.modulation(), 10.0);
    }
}
