//! Key rates estimated from a finite number of simulated signals.
//!
//! The spread across seeds shrinks roughly as `1/√n`.

use fadecv::montecarlo::simulate_repeats;
use fadecv::postselect::weighted_key;
use fadecv::presets::free_space_link;
use fadecv::{ProtocolParams, SimConfig};

fn main() -> fadecv::Result<()> {
    let d = free_space_link(1_000_000, 2015)?;
    let (v, chi, eta_min) = (100.0, 0.01, 0.5);
    let exact = weighted_key(&d, eta_min, &ProtocolParams::from_state_variance(v, chi)?)?;
    println!("asymptotic weighted key {exact:.4}");
    for n in [1_000, 10_000, 100_000] {
        let cfg = SimConfig::new(v, d.clone(), chi, n, 1)?.with_eta_min(eta_min);
        let runs = simulate_repeats(&cfg, 10)?;
        let k: Vec<f64> = runs.iter().map(|r| r.k_weighted()).collect();
        let mean = k.iter().sum::<f64>() / k.len() as f64;
        let sd = (k.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k.len() - 1) as f64).sqrt();
        let physical = runs.iter().filter(|r| r.sample.physical).count();
        println!("n = {n:<7} mean {mean:.4}  sd {sd:.4}  physical {physical}/10");
    }
    Ok(())
}
