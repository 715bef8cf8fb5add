//! Uplink rate splitting over the multiple-access channel with SIC at the receiver.

use std::collections::BTreeMap;

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::model::{DecodeRate, RateReport};

/// Powers of a user's virtual streams (one entry when the message is not split).
#[derive(Debug, Clone, PartialEq)]
pub struct UplinkUser {
    pub powers: Vec<f64>,
}

impl UplinkUser {
    pub fn single(power: f64) -> Self {
        UplinkUser { powers: vec![power] }
    }

    pub fn split(p1: f64, p2: f64) -> Self {
        UplinkUser { powers: vec![p1, p2] }
    }
}

fn stream_label(user: usize, part: usize) -> String {
    format!("s{}{}", user + 1, part + 1)
}

/// Rates of every virtual stream when the receiver decodes them in `order`
/// (pairs of user and part index) with MMSE filtering and SIC. The scalar
/// path is used when the receiver has one antenna.
///
/// `h` is `M×K`; report streams are labelled `s{user}{part}` and each is
/// owned by its user.
pub fn rate_uplink(
    users: &[UplinkUser],
    order: &[(usize, usize)],
    h: &CMatrix,
    noise: f64,
) -> Result<RateReport> {
    let k = users.len();
    if h.ncols() != k {
        return Err(Error::Dimension(format!("channel has {} users, expected {k}", h.ncols())));
    }
    if users.iter().any(|u| u.powers.is_empty() || u.powers.len() > 2 || u.powers.iter().any(|&p| !(p >= 0.0))) {
        return Err(Error::InvalidConfig("each user needs one or two nonnegative stream powers".into()));
    }
    if !(noise > 0.0) {
        return Err(Error::InvalidConfig("noise variances >0 required".into()));
    }
    let total: usize = users.iter().map(|u| u.powers.len()).sum();
    let mut seen = BTreeMap::new();
    for &(u, part) in order {
        if u >= k || part >= users[u].powers.len() || seen.insert((u, part), ()).is_some() {
            return Err(Error::Layout("uplink order is not a permutation of the active streams".into()));
        }
    }
    if seen.len() != total {
        return Err(Error::Layout("uplink order is not a permutation of the active streams".into()));
    }

    let m = h.nrows();
    let cols: Vec<CVector> = (0..k).map(|j| h.column(j).into_owned()).collect();
    let mut rates = Vec::with_capacity(order.len());
    for (i, &(u, part)) in order.iter().enumerate() {
        let p = users[u].powers[part];
        let later = &order[i + 1..];
        let sinr = if m == 1 {
            let g = |v: usize| cols[v][0].norm_sqr();
            let interference: f64 = later.iter().map(|&(v, q)| users[v].powers[q] * g(v)).sum();
            p * g(u) / (noise + interference)
        } else {
            let mut cov = CMatrix::identity(m, m) * num_complex::Complex64::new(noise, 0.0);
            for &(v, q) in later {
                let pv = users[v].powers[q];
                cov += &cols[v] * cols[v].adjoint() * num_complex::Complex64::new(pv, 0.0);
            }
            let chol = Cholesky::new(cov)
                .ok_or_else(|| Error::Numerical("receive covariance not positive definite".into()))?;
            let x = chol.solve(&cols[u]);
            p * cols[u].dotc(&x).re
        };
        rates.push(((u, part), (1.0 + sinr).log2()));
    }

    let mut streams = Vec::new();
    let mut index = BTreeMap::new();
    for (u, user) in users.iter().enumerate() {
        for part in 0..user.powers.len() {
            index.insert((u, part), streams.len());
            streams.push(stream_label(u, part));
        }
    }
    let mut stream_rate = vec![0.0; streams.len()];
    let mut decode_rates = Vec::new();
    let mut shares = BTreeMap::new();
    for &((u, part), r) in &rates {
        let i = index[&(u, part)];
        stream_rate[i] = r;
        decode_rates.push(DecodeRate { stream: i, user: u, rate: r });
        shares.insert((i, u), r);
    }
    let mut report = RateReport {
        streams,
        stream_rate,
        decode_rates,
        shares,
        totals: vec![0.0; k],
        sum_rate: 0.0,
        min_rate: 0.0,
    };
    report.refresh_totals();
    Ok(report)
}

/// Corner points of the two-user Gaussian MAC capacity region with channel
/// gains `g1, g2`: `(C1, C12 − C1)` and `(C12 − C2, C2)`.
pub fn mac_pentagon(p1: f64, p2: f64, g1: f64, g2: f64, noise: f64) -> [(f64, f64); 2] {
    let c1 = (1.0 + p1 * g1 / noise).log2();
    let c2 = (1.0 + p2 * g2 / noise).log2();
    let c12 = (1.0 + (p1 * g1 + p2 * g2) / noise).log2();
    [(c1, c12 - c1), (c12 - c2, c2)]
}

/// Split of user 1's power that reaches the dominant-face point with user-2
/// rate `r2` under the order `s11 → s2 → s12`. Returns `(P11, P12)`.
pub fn dominant_face_split(p1: f64, p2: f64, g1: f64, g2: f64, noise: f64, r2: f64) -> Result<(f64, f64)> {
    let [(c1, _), (_, c2)] = mac_pentagon(p1, p2, g1, g2, noise);
    let c12 = (1.0 + (p1 * g1 + p2 * g2) / noise).log2();
    if r2 < c12 - c1 - 1e-12 || r2 > c2 + 1e-12 {
        return Err(Error::InvalidConfig("target rate is not on the dominant face".into()));
    }
    let denom = 2f64.powf(r2) - 1.0;
    let p12 = if denom <= 0.0 {
        p1
    } else {
        ((p2 * g2 / denom - noise) / g1).clamp(0.0, p1)
    };
    Ok((p1 - p12, p12))
}

/// Decoding order matching [`dominant_face_split`].
pub const DOMINANT_FACE_ORDER: [(usize, usize); 3] = [(0, 0), (1, 0), (0, 1)];
