//! Rates of every transmission scheme on one Rayleigh channel with
//! closed-form precoders (RZF private, SVD common, 70% private power).

use rsma::channels::{sample_rayleigh, ChannelEnsembleSpec};
use rsma::model::{build_stream_layout, Scheme, SystemConfig};
use rsma::precoders::{closed_form_solution, PowerSplit};
use rsma::rates::rate_downlink;

fn main() -> rsma::Result<()> {
    let (m, k) = (2, 4);
    let cfg = SystemConfig::from_snr_db(m, k, 20.0);
    let h = sample_rayleigh(&ChannelEnsembleSpec::iid(k, 1, 7), m, 0);
    let groups = vec![vec![0, 1], vec![2, 3]];

    println!("{:<10} {:>8} {:>8}  per-user", "scheme", "sum", "min");
    for scheme in Scheme::ALL {
        let grouping = (scheme == Scheme::TwoLayerHrs).then_some(groups.as_slice());
        let order: Vec<usize> = (0..k).collect();
        let order = (scheme == Scheme::Oma).then_some(&order[..1]).or((scheme == Scheme::Noma).then_some(&order[..]));
        let layout = build_stream_layout(scheme, k, grouping, order)?;
        let sol = closed_form_solution(&layout, &h, &cfg, PowerSplit::equal(0.7))?;
        let r = rate_downlink(&layout, &sol, &h, &cfg)?;
        let totals: Vec<String> = r.totals.iter().map(|t| format!("{t:.3}")).collect();
        println!("{:<10} {:>8.3} {:>8.3}  {}", scheme.name(), r.sum_rate, r.min_rate, totals.join(" "));
    }
    Ok(())
}
