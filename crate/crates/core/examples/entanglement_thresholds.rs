//! How much fading an entangled pair survives.
//!
//! Prints the largest `Var(√η)` that keeps the state inseparable, and the
//! log-negativity of a fading channel at a few fading strengths.

use fadecv::security::max_fading_variance_entanglement;
use fadecv::ChannelMoments;

fn main() -> fadecv::Result<()> {
    println!("<sqrt eta>^2   V=1.5        V=5          V=20         V=100");
    for s in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let row: Vec<String> = [1.5, 5.0, 20.0, 100.0]
            .iter()
            .map(|&v| max_fading_variance_entanglement(s, v, 0.0).map(|x| format!("{x:.6e}")))
            .collect::<fadecv::Result<_>>()?;
        println!("{s:<14} {}", row.join("  "));
    }

    println!("\nlog-negativity at <sqrt eta> = 0.7, V = 20, chi = 0.01");
    for var in [0.0, 0.005, 0.01, 0.02, 0.03] {
        let m = ChannelMoments::from_mean_sqrt_and_variance(0.7, var)?;
        let g = m.evolve_tmsv(20.0, 0.01)?;
        println!("  Var = {var:<6} E_N = {:.4}  purity = {:.4}", g.log_negativity()?, g.purity()?);
    }
    Ok(())
}
