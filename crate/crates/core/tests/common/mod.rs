//! Property checks shared by the proptest suite and the acceptance run.

#![allow(dead_code)]

use fadecv::gaussian::beamsplitter;
use fadecv::montecarlo::simulate;
use fadecv::postselect::{optimize_ps, weighted_key};
use fadecv::security::{key_rate_collective, key_rate_from_covariance};
use fadecv::{CovarianceMatrix, ProtocolParams, Provenance, SimConfig, SubChannel, TransmittanceDistribution};

pub type Check = Result<(), String>;

/// A mixed two-mode state: a squeezed pair with independent loss and noise
/// on each arm.
pub fn lossy_pair(v: f64, eta_a: f64, chi_a: f64, eta_b: f64, chi_b: f64) -> CovarianceMatrix {
    CovarianceMatrix::tmsv(v)
        .unwrap()
        .apply_loss_channel(0, eta_a, chi_a)
        .unwrap()
        .apply_loss_channel(1, eta_b, chi_b)
        .unwrap()
}

/// Distribution on up to `weights.len()` evenly spaced bins of width 1/n.
pub fn binned(weights: &[f64]) -> TransmittanceDistribution {
    let n = weights.len();
    let bins = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| SubChannel {
            eta: (i as f64 + 0.5) / n as f64,
            p: w,
        })
        .collect();
    TransmittanceDistribution::from_weights(bins, 1.0 / n as f64, Provenance::Model).unwrap()
}

pub fn spectrum_invariance(gamma: &CovarianceMatrix, t1: f64, t2: f64) -> Check {
    let before = gamma.symplectic_eigenvalues().map_err(|e| e.to_string())?;
    let s = beamsplitter(2, 0, 1, t1).unwrap() * beamsplitter(2, 1, 0, t2).unwrap();
    let after = gamma
        .transform(&s)
        .and_then(|g| g.symplectic_eigenvalues())
        .map_err(|e| e.to_string())?;
    for (a, b) in before.iter().zip(&after) {
        if (a - b).abs() > 1e-9 * a.max(1.0) {
            return Err(format!("spectrum changed: {before:?} -> {after:?}"));
        }
    }
    Ok(())
}

pub fn physicality_preserved(gamma: &CovarianceMatrix, mode: usize, eta: f64, chi: f64) -> Check {
    if !gamma.is_physical() {
        return Err("input not physical".into());
    }
    let out = gamma.apply_loss_channel(mode, eta, chi).map_err(|e| e.to_string())?;
    if !out.is_physical() {
        return Err(format!(
            "loss channel produced min eigenvalue {}",
            out.min_symplectic_eigenvalue().unwrap()
        ));
    }
    Ok(())
}

pub fn jensen(d: &TransmittanceDistribution) -> Check {
    let m = d.moments();
    // Independent recomputation straight from the bins.
    let (mut e1, mut e2) = (0.0, 0.0);
    for b in d.bins() {
        e1 += b.p * b.eta.sqrt();
        e2 += b.p * b.eta;
    }
    if e1 * e1 > e2 + 1e-12 {
        return Err(format!("<sqrt eta>^2 = {} > <eta> = {e2}", e1 * e1));
    }
    if m.var_sqrt < 0.0 || (m.var_sqrt - (e2 - e1 * e1).max(0.0)).abs() > 1e-12 {
        return Err(format!("variance {} disagrees with {}", m.var_sqrt, e2 - e1 * e1));
    }
    Ok(())
}

pub fn ps_never_hurts(d: &TransmittanceDistribution, sigma: f64, chi: f64) -> Check {
    let p = ProtocolParams::new(sigma, chi).unwrap();
    let opt = optimize_ps(d, &p).map_err(|e| e.to_string())?;
    let none = weighted_key(d, 0.0, &p).map_err(|e| e.to_string())?;
    if opt.k_weighted < none {
        return Err(format!("optimized {} below unselected {none}", opt.k_weighted));
    }
    Ok(())
}

pub fn dual_path(d: &TransmittanceDistribution, v: f64, chi: f64) -> Check {
    let p = ProtocolParams::from_state_variance(v, chi).unwrap();
    let closed = key_rate_collective(d, &p).map_err(|e| e.to_string())?;
    let mixture = d.convex_mixture(v, chi).map_err(|e| e.to_string())?;
    let assembled = key_rate_from_covariance(&mixture).map_err(|e| e.to_string())?;
    if (closed.k - assembled.k).abs() > 1e-9 {
        return Err(format!("closed form {} vs mixture {}", closed.k, assembled.k));
    }
    Ok(())
}

pub fn seed_determinism(d: &TransmittanceDistribution, seed: u64) -> Check {
    let cfg = SimConfig::new(5.0, d.clone(), 0.01, 3_000, seed).unwrap();
    let a = simulate(&cfg).map_err(|e| e.to_string())?;
    let b = simulate(&cfg).map_err(|e| e.to_string())?;
    if a.to_json().unwrap() != b.to_json().unwrap() {
        return Err(format!("seed {seed} gave different runs"));
    }
    Ok(())
}
