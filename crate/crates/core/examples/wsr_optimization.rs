//! Weighted sum rate optimization of rate splitting and its baselines on a
//! two-user channel with a weak, strongly aligned second user.

use rsma::channels::{deterministic_two_user, theta_from_rho};
use rsma::model::{Scheme, SystemConfig};
use rsma::optimizer::{solve_scheme, OptimizeSpec};

fn main() -> rsma::Result<()> {
    let (h, rho) = deterministic_two_user(-10.0, theta_from_rho(0.3));
    let cfg = SystemConfig::from_snr_db(2, 2, 20.0).with_weights(vec![1.0, 10f64.sqrt()]);
    println!("rho = {rho:.2}, weights = {:?}", cfg.weights);
    for scheme in [Scheme::OneLayerRs, Scheme::Sdma, Scheme::Noma, Scheme::Oma] {
        let (layout, r) = solve_scheme(scheme, &cfg, &h, &OptimizeSpec::wsr())?;
        println!(
            "{:<5} wsr {:.4}  rates [{:.3}, {:.3}]  shared power {:.3}  iterations {}  {:?}",
            scheme.name(),
            r.objective,
            r.totals[0],
            r.totals[1],
            r.common_power_fraction(&layout, &cfg),
            r.trace.len(),
            r.status
        );
    }
    Ok(())
}
