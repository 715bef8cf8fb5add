//! Coarse map of the preferred scheme over channel orthogonality and
//! channel strength disparity.

use rsma::analysis::{classify_operational_region, RegionSpec};

fn main() -> rsma::Result<()> {
    let n = 5;
    for weights in [[1.0, 1.0], [1.0, 10f64.sqrt()]] {
        let spec = RegionSpec::grid(n, weights);
        let cells = classify_operational_region(&spec)?;
        println!("\nweights {weights:?} (rows: rho, columns: gamma_db)");
        print!("{:>6}", "");
        for g in &spec.gammas_db {
            print!("{g:>6}");
        }
        println!();
        for row in cells.chunks(n) {
            print!("{:>6.2}", row[0].rho);
            for c in row {
                print!("{:>6}", c.label.to_string());
            }
            println!();
        }
    }
    Ok(())
}
