//! Post-selection when each transmittance is only known up to a Gaussian error.

use fadecv::montecarlo::simulate_imperfect_estimation;
use fadecv::presets::free_space_link;
use fadecv::SimConfig;

fn main() -> fadecv::Result<()> {
    let d = free_space_link(1_000_000, 2015)?;
    for sigma_eta in [0.0, 0.01, 0.02, 0.04, 0.06, 0.08] {
        let cfg = SimConfig::new(100.0, d.clone(), 0.0, 20_000, 42)?.with_estimation_error(sigma_eta);
        let run = simulate_imperfect_estimation(&cfg)?;
        println!(
            "sigma_eta {sigma_eta:<5} eta_min {:.4}  kept {:>6}  weighted key {:.4}",
            run.config.eta_min,
            run.sample.retained,
            run.k_weighted()
        );
    }
    Ok(())
}
