//! Keeping only the best subchannels of a free-space link.
//!
//! Scans the post-selection threshold and prints the success probability and
//! the weighted key at each lower edge.

use fadecv::postselect::{optimize_ps, ps_sweep};
use fadecv::presets::free_space_link;
use fadecv::security::key_rate_collective;
use fadecv::ProtocolParams;

fn main() -> fadecv::Result<()> {
    let d = free_space_link(1_000_000, 2015)?;
    let p = ProtocolParams::from_state_variance(100.0, 0.02)?;
    println!("no selection: K = {:.4}", key_rate_collective(&d, &p)?.k);

    let rows = ps_sweep(&d, &p)?;
    for r in rows.iter().step_by(rows.len().div_ceil(15)) {
        println!(
            "eta_min {:.4}  P {:.4}  K {:+.4}  P*K {:.4}",
            r.eta_min, r.success_probability, r.k, r.k_weighted
        );
    }
    let best = optimize_ps(&d, &p)?;
    println!("best: eta_min = {:.4}, P = {:.4}, weighted key {:.4}", best.eta_min, best.success_probability, best.k_weighted);
    Ok(())
}
