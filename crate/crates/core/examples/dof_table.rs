//! Exact sum and max-min fair DoF of NOMA, SDMA and RSMA against the CSIT
//! quality exponent.

use rsma::analysis::{alpha_ratio, dof_closed_form, DofCsit, DofMetric, DofQuery, DofScheme};

fn main() -> rsma::Result<()> {
    let (m, k) = (4, 6);
    println!("M = {m}, K = {k}");
    for metric in [DofMetric::Sum, DofMetric::Mmf] {
        println!("\n{metric}-DoF\nalpha  noma    sdma    rsma");
        for a in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let csit = DofCsit::Imperfect(alpha_ratio(a)?);
            let row = [DofScheme::Noma, DofScheme::Sdma, DofScheme::Rsma]
                .map(|s| dof_closed_form(&DofQuery::new(s, metric, csit, m, k)).map(|d| format!("{d:<7}")));
            let [n, s, r] = row;
            println!("{a:<5}  {} {} {}", n?, s?, r?);
        }
    }
    Ok(())
}
