//! Power split search for rate splitting with ZF private streams under
//! imperfect CSIT, compared with ZF-SDMA on the same ensemble.

use rsma::channels::{sample_scaled_error_pair, ChannelEnsembleSpec};
use rsma::model::{build_stream_layout, Scheme, SystemConfig};
use rsma::precoders::{
    closed_form_directions, optimize_tau, tau_objective, CommonRule, PrivatePolicy, PrivateRule, TauInstance,
    TauObjective,
};

fn main() -> rsma::Result<()> {
    let (m, k, alpha, trials) = (2, 2, 0.6, 200);
    let ens = ChannelEnsembleSpec::iid(k, trials, 1);
    let rs = build_stream_layout(Scheme::OneLayerRs, k, None, None)?;
    let sdma = build_stream_layout(Scheme::Sdma, k, None, None)?;
    println!("snr_db  tau*   esr_rs  esr_sdma");
    for snr_db in [10.0, 20.0, 30.0] {
        let cfg = SystemConfig::from_snr_db(m, k, snr_db);
        let build = |layout| -> rsma::Result<Vec<TauInstance>> {
            (0..trials as u64)
                .map(|t| {
                    let pair = sample_scaled_error_pair(&ens, m, alpha, cfg.power, t);
                    let directions = closed_form_directions(layout, &pair.h_hat, &cfg, PrivateRule::Zf, CommonRule::Svd)?;
                    Ok(TauInstance { directions, h_hat: pair.h_hat, h: pair.h })
                })
                .collect()
        };
        let best = optimize_tau(&rs, &build(&rs)?, &cfg, TauObjective::SumRate, PrivatePolicy::Equal)?;
        let base = tau_objective(&sdma, &build(&sdma)?, &cfg, TauObjective::SumRate, PrivatePolicy::Equal, 1.0)?;
        println!("{snr_db:>6}  {:.3}  {:>6.3}  {base:>8.3}", best.tau, best.value);
    }
    Ok(())
}
