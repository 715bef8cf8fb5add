//! Two-user uplink: splitting one user's message into two parts reaches
//! every point of the MAC dominant face with a single decoding order.

use rsma::analysis::{uplink_face_points, UplinkRegionParams};
use rsma::rates::mac_pentagon;

fn main() -> rsma::Result<()> {
    let p = UplinkRegionParams { p1: 10.0, p2: 10.0, g1: 1.0, g2: 0.5, noise: 1.0, points: 6 };
    let [a, b] = mac_pentagon(p.p1, p.p2, p.g1, p.g2, p.noise);
    println!("corners ({:.3}, {:.3}) and ({:.3}, {:.3})", a.0, a.1, b.0, b.1);
    println!("   R1      R2      P11     P12");
    for fp in uplink_face_points(&p)? {
        println!("{:.4}  {:.4}  {:.4}  {:.4}", fp.achieved.0, fp.achieved.1, fp.split.0, fp.split.1);
    }
    Ok(())
}
