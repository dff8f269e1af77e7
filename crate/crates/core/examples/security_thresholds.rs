//! Fading tolerance of the key rate under individual and collective attacks.

use fadecv::security::{max_fading_variance_collective, max_fading_variance_individual};

fn main() -> fadecv::Result<()> {
    let chi = 0.01;
    for sigma in [1.0, 10.0, 100.0] {
        println!("sigma = {sigma}");
        for s in [0.2, 0.4, 0.6, 0.8] {
            let ind = max_fading_variance_individual(s, sigma, chi)?;
            let col = max_fading_variance_collective(s, sigma, chi)?;
            let col = if col.insecure_at_zero_fading { "insecure".to_string() } else { format!("{:.4e}", col.var_max) };
            println!("  <sqrt eta>^2 = {s}: individual {ind:.4e}  collective {col}");
        }
    }
    Ok(())
}
