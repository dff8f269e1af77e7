//! Post-selection of the upper transmittance tail `[η_min, 1]`.
//!
//! On a binned distribution the weighted key is piecewise constant in `η_min`,
//! so scanning the lower bin edges is an exact optimization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelMoments, TransmittanceDistribution};
use crate::error::{domain, Error, Result};
use crate::security::{key_rate_from_moments, KeyRateReport, ProtocolParams, KEY_SIGN_TOLERANCE};

/// Optimal post-selection region, and modulation when it was optimized too.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsOptimum {
    /// Lower edge of the first retained bin.
    pub eta_min: f64,
    /// Transmittance of the first retained bin.
    pub first_subchannel_eta: f64,
    /// `σ`
    pub modulation: f64,
    pub k_weighted: f64,
    pub success_probability: f64,
    pub report: KeyRateReport,
}

/// One row of an `η_min` scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsSweepRow {
    pub eta_min: f64,
    pub success_probability: f64,
    #[serde(rename = "I_AB")]
    pub i_ab: f64,
    #[serde(rename = "chi_BE")]
    pub chi_be: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "K_weighted")]
    pub k_weighted: f64,
}

/// A candidate region: starts at bin `index`.
#[derive(Debug, Clone, Copy)]
struct Region {
    eta_min: f64,
    first_eta: f64,
    success: f64,
    moments: ChannelMoments,
}

/// Moments of every upper-tail region, summed in the same order as
/// `restrict_from` followed by `moments`, so both paths agree bit for bit.
fn regions(d: &TransmittanceDistribution) -> Result<Vec<Region>> {
    let bins = d.bins();
    (0..bins.len())
        .map(|i| {
            let tail = &bins[i..];
            let success: f64 = tail.iter().map(|b| b.p).sum();
            let (mut mean_sqrt, mut mean) = (0.0, 0.0);
            for b in tail {
                let p = b.p / success;
                mean_sqrt += p * b.eta.sqrt();
                mean += p * b.eta;
            }
            Ok(Region {
                eta_min: d.lower_edge(i),
                first_eta: tail[0].eta,
                success,
                moments: ChannelMoments::new(mean_sqrt.min(1.0), mean)?,
            })
        })
        .collect()
}

/// `P(η ≥ η_min) · max(0, K)` of the restricted channel; an empty region gives 0.
pub fn weighted_key(d: &TransmittanceDistribution, eta_min: f64, p: &ProtocolParams) -> Result<f64> {
    match d.restrict_from(eta_min) {
        Ok((restricted, success)) => {
            Ok(key_rate_from_moments(&restricted.moments(), p)?.with_success(success).k_weighted)
        }
        Err(Error::EmptySelection { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Key-rate quantities for every bin-edge choice of `η_min`, ascending.
pub fn ps_sweep(d: &TransmittanceDistribution, p: &ProtocolParams) -> Result<Vec<PsSweepRow>> {
    regions(d)?
        .par_iter()
        .map(|r| {
            let rep = key_rate_from_moments(&r.moments, p)?.with_success(r.success);
            Ok(PsSweepRow {
                eta_min: r.eta_min,
                success_probability: r.success,
                i_ab: rep.i_ab,
                chi_be: rep.chi_be,
                k: rep.k,
                k_weighted: rep.k_weighted,
            })
        })
        .collect()
}

fn best_region(rs: &[Region], p: &ProtocolParams) -> Result<PsOptimum> {
    let reports: Vec<KeyRateReport> = rs
        .par_iter()
        .map(|r| Ok(key_rate_from_moments(&r.moments, p)?.with_success(r.success)))
        .collect::<Result<_>>()?;
    // Ascending scan with a strict comparison keeps the smallest η_min on ties.
    let mut best = 0;
    for (i, rep) in reports.iter().enumerate() {
        if rep.k_weighted > reports[best].k_weighted {
            best = i;
        }
    }
    if reports[best].k_weighted <= 0.0 {
        return Ok(PsOptimum {
            eta_min: 0.0,
            first_subchannel_eta: rs[0].first_eta,
            modulation: p.modulation(),
            k_weighted: 0.0,
            success_probability: 1.0,
            report: reports[0],
        });
    }
    Ok(PsOptimum {
        eta_min: rs[best].eta_min,
        first_subchannel_eta: rs[best].first_eta,
        modulation: p.modulation(),
        k_weighted: reports[best].k_weighted,
        success_probability: rs[best].success,
        report: reports[best],
    })
}

/// Region `[η_min, 1]` maximizing the success-weighted key rate.
pub fn optimize_ps(d: &TransmittanceDistribution, p: &ProtocolParams) -> Result<PsOptimum> {
    best_region(&regions(d)?, p)
}

fn check_grid(sigma_grid: &[f64]) -> Result<()> {
    if sigma_grid.is_empty() {
        return Err(domain("modulation grid is empty"));
    }
    if let Some(s) = sigma_grid.iter().find(|&&s| !(s > 0.0) || !s.is_finite()) {
        return Err(domain(format!("modulation grid values must be > 0, got {s}")));
    }
    Ok(())
}

/// Joint scan over `σ_grid` and the region start. Ties keep the earlier grid point.
pub fn optimize_ps_and_modulation(
    d: &TransmittanceDistribution,
    chi: f64,
    sigma_grid: &[f64],
) -> Result<PsOptimum> {
    check_grid(sigma_grid)?;
    let rs = regions(d)?;
    let mut best: Option<PsOptimum> = None;
    for &sigma in sigma_grid {
        let opt = best_region(&rs, &ProtocolParams::new(sigma, chi)?)?;
        if best.is_none_or(|b| opt.k_weighted > b.k_weighted) {
            best = Some(opt);
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// Best modulation on `σ_grid` without post-selection.
pub fn optimize_modulation(
    d: &TransmittanceDistribution,
    chi: f64,
    sigma_grid: &[f64],
) -> Result<PsOptimum> {
    check_grid(sigma_grid)?;
    let m = d.moments();
    let reports: Vec<KeyRateReport> = sigma_grid
        .par_iter()
        .map(|&s| key_rate_from_moments(&m, &ProtocolParams::new(s, chi)?))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, rep) in reports.iter().enumerate() {
        if rep.k_weighted > reports[best].k_weighted {
            best = i;
        }
    }
    Ok(PsOptimum {
        eta_min: 0.0,
        first_subchannel_eta: d.min_eta(),
        modulation: sigma_grid[best],
        k_weighted: reports[best].k_weighted,
        success_probability: 1.0,
        report: reports[best],
    })
}

/// Largest excess noise for which the (optionally post-selected) key rate,
/// optimized over `σ_grid`, stays positive. Bisection to `tolerance`.
pub fn noise_threshold(
    d: &TransmittanceDistribution,
    sigma_grid: &[f64],
    with_ps: bool,
    tolerance: f64,
) -> Result<f64> {
    if !(tolerance > 0.0) {
        return Err(domain(format!("tolerance must be > 0, got {tolerance}")));
    }
    let secure = |chi: f64| -> Result<bool> {
        let opt = if with_ps {
            optimize_ps_and_modulation(d, chi, sigma_grid)?
        } else {
            optimize_modulation(d, chi, sigma_grid)?
        };
        Ok(opt.report.k > KEY_SIGN_TOLERANCE && opt.k_weighted > 0.0)
    };
    if !secure(0.0)? {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while secure(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Numeric("noise threshold did not bracket".into()));
        }
    }
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if secure(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let last = count - 1;
    (0..count)
        .map(|i| match i {
            0 => lo,
            i if i == last => hi,
            i => (a + (b - a) * i as f64 / last as f64).exp(),
        })
        .collect()
}

/// 60 log-spaced modulations over `[10⁻², 10³]`.
pub fn default_sigma_grid() -> Vec<f64> {
    log_space(1e-2, 1e3, 60)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Provenance, SubChannel};
    use approx::assert_abs_diff_eq;

    fn spread_channel() -> TransmittanceDistribution {
        let bins = (1..=50)
            .map(|i| {
                let eta = 0.02 * i as f64 - 0.01;
                SubChannel { eta, p: (-(eta - 0.5).powi(2) / 0.02).exp() }
            })
            .collect();
        TransmittanceDistribution::from_weights(bins, 0.02, Provenance::Model).unwrap()
    }

    #[test]
    fn weighted_key_limits() {
        let d = spread_channel();
        let p = ProtocolParams::new(5.0, 0.0).unwrap();
        let k = key_rate_from_moments(&d.moments(), &p).unwrap().k;
        assert_abs_diff_eq!(weighted_key(&d, 0.0, &p).unwrap(), k.max(0.0), epsilon = 1e-12);
        assert_eq!(weighted_key(&d, 1.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn sweep_matches_direct_restriction() {
        let d = spread_channel();
        let p = ProtocolParams::new(50.0, 0.01).unwrap();
        let rows = ps_sweep(&d, &p).unwrap();
        assert_eq!(rows.len(), d.len());
        for (i, row) in rows.iter().enumerate().step_by(7) {
            assert_abs_diff_eq!(row.eta_min, d.lower_edge(i), epsilon = 1e-15);
            let direct = weighted_key(&d, row.eta_min, &p).unwrap();
            assert_abs_diff_eq!(row.k_weighted, direct, epsilon = 1e-9);
        }
    }

    #[test]
    fn fixed_channel_selects_its_bin() {
        let d = TransmittanceDistribution::fixed(0.3).unwrap();
        let opt = optimize_ps(&d, &ProtocolParams::new(2.0, 0.0).unwrap()).unwrap();
        assert_eq!(opt.first_subchannel_eta, 0.3);
        assert_abs_diff_eq!(opt.eta_min, d.lower_edge(0), epsilon = 0.0);
        assert_eq!(opt.success_probability, 1.0);
    }

    #[test]
    fn all_insecure_returns_zero_region() {
        let d = spread_channel();
        let opt = optimize_ps(&d, &ProtocolParams::new(10.0, 5.0).unwrap()).unwrap();
        assert_eq!(opt.k_weighted, 0.0);
        assert_eq!(opt.eta_min, 0.0);
    }

    #[test]
    fn optimum_beats_every_row() {
        let d = spread_channel();
        let p = ProtocolParams::new(100.0, 0.0).unwrap();
        let opt = optimize_ps(&d, &p).unwrap();
        for row in ps_sweep(&d, &p).unwrap() {
            assert!(opt.k_weighted >= row.k_weighted);
        }
    }

    #[test]
    fn joint_optimum_dominates_fixed_modulation() {
        let d = spread_channel();
        let grid = default_sigma_grid();
        let joint = optimize_ps_and_modulation(&d, 0.01, &grid).unwrap();
        for &s in grid.iter().step_by(11) {
            let single = optimize_ps(&d, &ProtocolParams::new(s, 0.01).unwrap()).unwrap();
            assert!(joint.k_weighted >= single.k_weighted);
        }
        assert!(optimize_ps_and_modulation(&d, 0.0, &[]).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = default_sigma_grid();
        assert_eq!(g.len(), 60);
        assert_eq!(g[0], 1e-2);
        assert_eq!(g[59], 1e3);
    }
}
