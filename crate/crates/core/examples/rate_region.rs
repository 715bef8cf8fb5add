//! Boundary of the two-user rate region for RS and SDMA by weight sweep.

use rsma::analysis::weight_pairs;
use rsma::channels::{deterministic_two_user, theta_from_rho};
use rsma::model::{build_stream_layout, Scheme, SystemConfig};
use rsma::optimizer::{sweep_weights, OptimizeSpec};

fn main() -> rsma::Result<()> {
    let (h, _) = deterministic_two_user(-3.0, theta_from_rho(0.25));
    let cfg = SystemConfig::from_snr_db(2, 2, 20.0);
    let weights: Vec<Vec<f64>> = weight_pairs(8).iter().map(|w| w.to_vec()).collect();
    for scheme in [Scheme::OneLayerRs, Scheme::Sdma] {
        let layout = build_stream_layout(scheme, 2, None, None)?;
        println!("{}", scheme.name());
        for p in sweep_weights(&layout, &cfg, &h, &weights, &OptimizeSpec::wsr())? {
            println!("  w=({:.2}, {:.2})  R=({:.3}, {:.3})", p.weights[0], p.weights[1], p.rates[0], p.rates[1]);
        }
    }
    Ok(())
}
