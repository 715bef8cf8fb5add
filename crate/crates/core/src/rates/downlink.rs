use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{gain, CMatrix, CVector};
use crate::model::{DecodeRate, PrecoderSolution, RateReport, StreamLayout, SystemConfig};

/// Signal, interference and noise of one stream at one of its decoders.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrTerm {
    pub stream: usize,
    pub user: usize,
    pub signal: f64,
    pub interference: f64,
    pub noise: f64,
}

impl SinrTerm {
    pub fn sinr(&self) -> f64 {
        self.signal / (self.interference + self.noise)
    }

    pub fn rate(&self) -> f64 {
        (1.0 + self.sinr()).log2()
    }
}

/// How a shared stream's rate is divided among its owners.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationPolicy {
    Equal,
    /// Proportional to the user weights.
    Weighted,
    /// Water-filling that maximizes the minimum per-user total.
    MaxMin,
}

pub(crate) fn check_inputs(
    layout: &StreamLayout,
    sol: &PrecoderSolution,
    h: &CMatrix,
    cfg: &SystemConfig,
) -> Result<Vec<CVector>> {
    if h.ncols() != layout.users || h.ncols() != cfg.k {
        return Err(Error::Dimension(format!(
            "channel has {} users, layout {} and config {}",
            h.ncols(),
            layout.users,
            cfg.k
        )));
    }
    if h.nrows() != cfg.m {
        return Err(Error::Dimension(format!("channel has {} antennas, config {}", h.nrows(), cfg.m)));
    }
    if sol.precoders.len() != layout.streams.len() {
        return Err(Error::Layout("precoder set does not match the layout's streams".into()));
    }
    layout
        .streams
        .iter()
        .map(|s| {
            let p = sol
                .precoders
                .get(&s.label)
                .ok_or_else(|| Error::Layout(format!("missing precoder for stream {}", s.label)))?;
            if p.len() != cfg.m {
                return Err(Error::Dimension(format!("precoder {} has wrong length", s.label)));
            }
            Ok(p.clone())
        })
        .collect()
}

/// SINR terms of user `k` given the received powers `gains[t] = |h_kᴴ p_t|²`
/// of every layout stream. Interference for the j-th stream in the user's
/// order sums every other stream not decoded before it, in layout order.
pub(crate) fn user_terms(layout: &StreamLayout, k: usize, gains: &[f64], noise: f64) -> Vec<SinrTerm> {
    let order = &layout.decode_order[k];
    let mut removed = vec![false; layout.streams.len()];
    let mut out = Vec::with_capacity(order.len());
    for &s in order {
        removed[s] = true;
        let mut interference = 0.0;
        for (t, &g) in gains.iter().enumerate() {
            if !removed[t] {
                interference += g;
            }
        }
        out.push(SinrTerm { stream: s, user: k, signal: gains[s], interference, noise });
    }
    out
}

/// Every SINR term of the layout, user by user in decoding order.
pub fn sinr_terms(
    layout: &StreamLayout,
    sol: &PrecoderSolution,
    h: &CMatrix,
    cfg: &SystemConfig,
) -> Result<Vec<SinrTerm>> {
    let p = check_inputs(layout, sol, h, cfg)?;
    let mut terms = Vec::new();
    for k in 0..layout.users {
        let hk = h.column(k).into_owned();
        let gains: Vec<f64> = p.iter().map(|pt| gain(&hk, pt)).collect();
        terms.extend(user_terms(layout, k, &gains, cfg.noise_var[k]));
    }
    Ok(terms)
}

/// Builds a report from per-(stream, user) decode rates.
pub(crate) fn report_from_decode_rates(
    layout: &StreamLayout,
    decode_rates: Vec<DecodeRate>,
    alloc: &BTreeMap<(String, usize), f64>,
) -> RateReport {
    let n = layout.streams.len();
    let mut stream_rate = vec![f64::INFINITY; n];
    for d in &decode_rates {
        stream_rate[d.stream] = stream_rate[d.stream].min(d.rate);
    }
    for r in stream_rate.iter_mut() {
        if !r.is_finite() {
            *r = 0.0;
        }
    }
    let mut report = RateReport {
        streams: layout.streams.iter().map(|s| s.label.clone()).collect(),
        stream_rate,
        decode_rates,
        shares: BTreeMap::new(),
        totals: vec![0.0; layout.users],
        sum_rate: 0.0,
        min_rate: 0.0,
    };
    apply_allocation(&mut report, layout, alloc);
    report
}

/// Rewrites the shares of `report` from a relative allocation: the entries
/// of each shared stream are scaled to sum to its rate, and a stream without
/// positive entries is split equally.
pub fn apply_allocation(
    report: &mut RateReport,
    layout: &StreamLayout,
    alloc: &BTreeMap<(String, usize), f64>,
) {
    report.shares.clear();
    for (i, s) in layout.streams.iter().enumerate() {
        let rate = report.stream_rate[i];
        if s.owners.len() == 1 {
            report.shares.insert((i, s.owners[0]), rate);
            continue;
        }
        let weights: Vec<f64> = s
            .owners
            .iter()
            .map(|&u| alloc.get(&(s.label.clone(), u)).copied().unwrap_or(0.0).max(0.0))
            .collect();
        let total: f64 = weights.iter().sum();
        for (j, &u) in s.owners.iter().enumerate() {
            let share = if total > 0.0 {
                rate * weights[j] / total
            } else {
                rate / s.owners.len() as f64
            };
            report.shares.insert((i, u), share);
        }
    }
    report.refresh_totals();
}

/// Achievable rates of every stream and user for the given layout, precoders and channel.
pub fn rate_downlink(
    layout: &StreamLayout,
    sol: &PrecoderSolution,
    h: &CMatrix,
    cfg: &SystemConfig,
) -> Result<RateReport> {
    let terms = sinr_terms(layout, sol, h, cfg)?;
    let decode_rates = terms
        .iter()
        .map(|t| DecodeRate { stream: t.stream, user: t.user, rate: t.rate() })
        .collect();
    Ok(report_from_decode_rates(layout, decode_rates, &sol.common_alloc))
}

/// Levels `base` up with `amount` so the minimum is maximized; returns the additions.
pub fn water_fill_min(base: &[f64], amount: f64) -> Vec<f64> {
    let n = base.len();
    if n == 0 {
        return vec![];
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| base[a].total_cmp(&base[b]));
    let mut acc = 0.0;
    let mut level = base[idx[0]] + amount;
    for j in 0..n {
        acc += base[idx[j]];
        level = (amount + acc) / (j + 1) as f64;
        if j + 1 == n || level <= base[idx[j + 1]] {
            break;
        }
    }
    base.iter().map(|&b| (level - b).max(0.0)).collect()
}

/// Divides each shared stream's rate among its owners. Returned values are
/// rates in bit/s/Hz summing to the stream rate.
pub fn allocate_common_rate(
    report: &RateReport,
    layout: &StreamLayout,
    policy: AllocationPolicy,
    weights: &[f64],
) -> BTreeMap<(String, usize), f64> {
    let mut alloc = BTreeMap::new();
    let mut base = vec![0.0; layout.users];
    for (i, s) in layout.streams.iter().enumerate() {
        if s.owners.len() == 1 {
            base[s.owners[0]] += report.stream_rate[i];
        }
    }
    for (i, s) in layout.streams.iter().enumerate() {
        if s.owners.len() == 1 {
            continue;
        }
        let rate = report.stream_rate[i];
        let n = s.owners.len() as f64;
        let shares: Vec<f64> = match policy {
            AllocationPolicy::Equal => vec![rate / n; s.owners.len()],
            AllocationPolicy::Weighted => {
                let w: Vec<f64> = s.owners.iter().map(|&u| weights.get(u).copied().unwrap_or(0.0)).collect();
                let tw: f64 = w.iter().sum();
                if tw > 0.0 {
                    w.iter().map(|x| rate * x / tw).collect()
                } else {
                    vec![rate / n; s.owners.len()]
                }
            }
            AllocationPolicy::MaxMin => {
                let b: Vec<f64> = s.owners.iter().map(|&u| base[u]).collect();
                water_fill_min(&b, rate)
            }
        };
        for (j, &u) in s.owners.iter().enumerate() {
            base[u] += shares[j];
            alloc.insert((s.label.clone(), u), shares[j]);
        }
    }
    alloc
}

/// Report with the shares replaced by `policy`.
pub fn with_policy(
    mut report: RateReport,
    layout: &StreamLayout,
    policy: AllocationPolicy,
    weights: &[f64],
) -> RateReport {
    let alloc = allocate_common_rate(&report, layout, policy, weights);
    apply_allocation(&mut report, layout, &alloc);
    report
}
