//! Turn raw transmittance samples into a binned distribution and back.

use fadecv::channel::{format_samples, parse_samples};
use fadecv::{BeamGeometry, TransmittanceDistribution, TransmittanceScale};

fn main() -> fadecv::Result<()> {
    let samples = BeamGeometry::new(1.0, 1.5, 0.6)?.sample_transmittances(TransmittanceScale::Amplitude, 50_000, 3)?;
    let text = format_samples(&samples);
    let parsed = parse_samples(&text)?;
    let d = TransmittanceDistribution::from_samples(&parsed, 100)?;

    let json = d.to_json()?;
    let back = TransmittanceDistribution::from_json(&json)?;
    let m = back.moments();
    println!("{} samples -> {} occupied bins of width {}", parsed.len(), back.len(), back.delta_eta());
    println!("<sqrt eta> = {:.5}  <eta> = {:.5}  Var = {:.3e}", m.mean_sqrt, m.mean, m.var_sqrt);

    if let Err(e) = parse_samples("0.5\n0.7\nsomething\n") {
        println!("malformed input: {e}");
    }
    Ok(())
}
