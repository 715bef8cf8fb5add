//! Max-min fair rates of RS, SDMA and NOMA under imperfect CSIT.

use rsma::analysis::{mmf_trials, MmfVsSnrParams};

fn main() -> rsma::Result<()> {
    let p = MmfVsSnrParams { m: 2, k: 2, trials: 10, samples: 50, snrs_db: vec![10.0, 20.0, 30.0], ..Default::default() };
    let trials = mmf_trials(&p)?;
    println!("snr_db  rs      sdma    noma    Pc/P");
    for &snr in &p.snrs_db {
        let at: Vec<_> = trials.iter().filter(|t| t.snr_db == snr).collect();
        let mean = |f: fn(&rsma::analysis::MmfTrial) -> f64| at.iter().map(|t| f(t)).sum::<f64>() / at.len() as f64;
        println!(
            "{snr:>6}  {:.3}  {:.3}  {:.3}  {:.3}",
            mean(|t| t.rsma),
            mean(|t| t.sdma),
            mean(|t| t.noma),
            mean(|t| t.common_fraction)
        );
    }
    Ok(())
}
