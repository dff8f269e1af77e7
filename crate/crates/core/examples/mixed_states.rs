//! Covariance-matrix toolkit: loss, spectra, negativity and the key rate of an
//! explicit state.

use fadecv::security::key_rate_from_covariance;
use fadecv::CovarianceMatrix;

fn main() -> fadecv::Result<()> {
    let pure = CovarianceMatrix::tmsv(10.0)?;
    let lossy = pure.apply_loss_channel(1, 0.5, 0.02)?;
    for (name, g) in [("tmsv", &pure), ("lossy", &lossy)] {
        let nu = g.symplectic_eigenvalues()?;
        println!(
            "{name:<6} nu = [{:.4}, {:.4}]  purity {:.4}  E_N {:.4}  S {:.4}",
            nu[0],
            nu[1],
            g.purity()?,
            g.log_negativity()?,
            g.von_neumann_entropy()?
        );
    }
    let r = key_rate_from_covariance(&lossy)?;
    println!("I_AB {:.4}  chi_BE {:.4}  K {:.4}", r.i_ab, r.chi_be, r.k);
    Ok(())
}
