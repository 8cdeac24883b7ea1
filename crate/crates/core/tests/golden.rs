//! Pinned end-to-end values guarding against silent numerical drift.

use eigenlearn::encoder::{forward, init_params};
use eigenlearn::protocols::SpectralProtocol;
use eigenlearn::spin_chain::LatentSpec;
use eigenlearn::training::generate_dataset;

#[test]
fn encoder_output_at_fixed_seed() {
    let spec = LatentSpec::j1_only(6).unwrap();
    let ds = generate_dataset(&[vec![0.4]], &spec, SpectralProtocol::Low { states: 5 }).unwrap();
    let p = init_params::<f32>(5, 16, 1, 7).unwrap();
    let (theta, _) = forward(&p, ds.samples[0].psi.view()).unwrap();
    assert!((ds.samples[0].energies[0] - (-5.820_937_675_310_774)).abs() < 1e-9);
    assert!((theta[0] - 0.202_223_96).abs() < 1e-5, "θ̃ = {}", theta[0]);
}
