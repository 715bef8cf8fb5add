//! System configuration, message-to-stream layouts, precoder solutions and
//! rate reports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, CVector};

/// Largest user count accepted for generalized rate splitting (2^K − 1 streams).
pub const GRS_MAX_USERS: usize = 6;

/// Antenna/user counts, power budget, noise, weights and QoS thresholds.
///
/// Users are indexed from 0 internally; stream labels and text output use
/// 1-based user numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub m: usize,
    pub k: usize,
    pub power: f64,
    pub noise_var: Vec<f64>,
    pub weights: Vec<f64>,
    /// Rate thresholds in bit/s/Hz.
    pub qos: Vec<f64>,
}

impl SystemConfig {
    /// Unit noise, unit weights, no QoS.
    pub fn new(m: usize, k: usize, power: f64) -> Self {
        SystemConfig {
            m,
            k,
            power,
            noise_var: vec![1.0; k],
            weights: vec![1.0; k],
            qos: vec![0.0; k],
        }
    }

    /// Unit noise with the power set from an SNR in dB.
    pub fn from_snr_db(m: usize, k: usize, snr_db: f64) -> Self {
        Self::new(m, k, 10f64.powf(snr_db / 10.0))
    }

    pub fn with_noise(mut self, noise_var: Vec<f64>) -> Self {
        self.noise_var = noise_var;
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_qos(mut self, qos: Vec<f64>) -> Self {
        self.qos = qos;
        self
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.power = power;
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_config(self).map(|_| ())
    }
}

/// Returns `cfg` unchanged when every invariant holds, else names the first violated one.
pub fn validate_config(cfg: &SystemConfig) -> Result<&SystemConfig> {
    let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
    if cfg.m < 1 {
        return bad("M≥1 required");
    }
    if cfg.k < 2 {
        return bad("K≥2 required");
    }
    if !(cfg.power > 0.0 && cfg.power.is_finite()) {
        return bad("P>0 required");
    }
    if cfg.noise_var.len() != cfg.k || cfg.weights.len() != cfg.k || cfg.qos.len() != cfg.k {
        return bad("noise, weight and QoS vectors must have length K");
    }
    if cfg.noise_var.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return bad("noise variances >0 required");
    }
    if cfg.weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
        return bad("weights ≥0 required");
    }
    if cfg.weights.iter().all(|&w| w == 0.0) {
        return bad("weights not all zero required");
    }
    if cfg.qos.iter().any(|&q| !(q >= 0.0 && q.is_finite())) {
        return bad("QoS thresholds ≥0 required");
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    OneLayerRs,
    TwoLayerHrs,
    GeneralizedRs,
    RsCmd,
    Sdma,
    Noma,
    Oma,
    Multicast,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::OneLayerRs,
        Scheme::TwoLayerHrs,
        Scheme::GeneralizedRs,
        Scheme::RsCmd,
        Scheme::Sdma,
        Scheme::Noma,
        Scheme::Oma,
        Scheme::Multicast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::OneLayerRs => "rs",
            Scheme::TwoLayerHrs => "hrs",
            Scheme::GeneralizedRs => "grs",
            Scheme::RsCmd => "rs-cmd",
            Scheme::Sdma => "sdma",
            Scheme::Noma => "noma",
            Scheme::Oma => "oma",
            Scheme::Multicast => "multicast",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let scheme = match s.as_str() {
            "rs" | "rsma" | "1-layer-rs" | "one-layer-rs" => Scheme::OneLayerRs,
            "hrs" | "2-layer-hrs" | "two-layer-hrs" => Scheme::TwoLayerHrs,
            "grs" | "generalized-rs" => Scheme::GeneralizedRs,
            "rs-cmd" | "rscmd" => Scheme::RsCmd,
            "sdma" => Scheme::Sdma,
            "noma" => Scheme::Noma,
            "oma" => Scheme::Oma,
            "multicast" => Scheme::Multicast,
            _ => return Err(Error::Parse(format!("unknown scheme '{s}'"))),
        };
        Ok(scheme)
    }
}

/// One transmitted stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    pub label: String,
    /// Users that decode the stream (sorted, 0-based).
    pub decoders: Vec<usize>,
    /// Users whose messages the stream carries (sorted, 0-based).
    pub owners: Vec<usize>,
}

impl Stream {
    fn new(label: impl Into<String>, decoders: Vec<usize>, owners: Vec<usize>) -> Self {
        Stream { label: label.into(), decoders, owners }
    }

    /// A stream carrying parts of more than one user's message needs a rate split.
    pub fn is_shared(&self) -> bool {
        self.owners.len() > 1
    }
}

/// Message-to-stream mapping of a scheme with per-user decoding orders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamLayout {
    pub scheme: Scheme,
    pub users: usize,
    pub streams: Vec<Stream>,
    /// `decode_order[k]` lists stream indices in the order user `k` decodes them.
    pub decode_order: Vec<Vec<usize>>,
    pub grouping: Option<Vec<Vec<usize>>>,
}

impl StreamLayout {
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.streams.iter().position(|s| s.label == label)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.streams.iter().map(|s| s.label.as_str()).collect()
    }

    /// Index of user `k`'s private stream, if the layout has one.
    pub fn private_of(&self, k: usize) -> Option<usize> {
        self.streams
            .iter()
            .position(|s| s.decoders == [k] && s.owners == [k])
    }

    /// Internal consistency: unique labels, decoders/owners in range and
    /// every decoding order listing only streams the user decodes.
    pub fn check(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.streams {
            if !seen.insert(s.label.as_str()) {
                return Err(Error::Layout(format!("duplicate stream label {}", s.label)));
            }
            if s.decoders.iter().chain(&s.owners).any(|&u| u >= self.users) {
                return Err(Error::Layout(format!("stream {} names a user out of range", s.label)));
            }
        }
        if self.decode_order.len() != self.users {
            return Err(Error::Layout("one decoding order per user required".into()));
        }
        for (k, order) in self.decode_order.iter().enumerate() {
            let mut used = std::collections::BTreeSet::new();
            for &i in order {
                let s = self
                    .streams
                    .get(i)
                    .ok_or_else(|| Error::Layout(format!("order of user {} out of range", k + 1)))?;
                if !s.decoders.contains(&k) || !used.insert(i) {
                    return Err(Error::Layout(format!(
                        "user {} order lists stream {} it does not decode",
                        k + 1,
                        s.label
                    )));
                }
            }
            for (i, s) in self.streams.iter().enumerate() {
                if s.decoders.contains(&k) && !used.contains(&i) {
                    return Err(Error::Layout(format!(
                        "user {} decodes {} but it is missing from its order",
                        k + 1,
                        s.label
                    )));
                }
            }
        }
        Ok(())
    }
}

fn join_users(users: &[usize]) -> String {
    users.iter().map(|u| (u + 1).to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for StreamLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "layout {} K={}", self.scheme, self.users)?;
        if let Some(groups) = &self.grouping {
            let g: Vec<String> = groups.iter().map(|g| format!("{{{}}}", join_users(g))).collect();
            writeln!(f, "groups {}", g.join(" "))?;
        }
        for s in &self.streams {
            writeln!(
                f,
                "stream {} decoders={} owners={}",
                s.label,
                join_users(&s.decoders),
                join_users(&s.owners)
            )?;
        }
        for (k, order) in self.decode_order.iter().enumerate() {
            let labels: Vec<&str> = order.iter().map(|&i| self.streams[i].label.as_str()).collect();
            writeln!(f, "order {}: {}", k + 1, labels.join(" "))?;
        }
        Ok(())
    }
}

fn check_partition(grouping: &[Vec<usize>], k: usize) -> Result<()> {
    let mut seen = vec![false; k];
    for g in grouping {
        if g.is_empty() {
            return Err(Error::Layout("grouping has an empty group".into()));
        }
        for &u in g {
            if u >= k || seen[u] {
                return Err(Error::Layout("grouping is not a partition of the users".into()));
            }
            seen[u] = true;
        }
    }
    if seen.iter().any(|&s| !s) {
        return Err(Error::Layout("grouping is not a partition of the users".into()));
    }
    Ok(())
}

fn check_permutation(order: &[usize], k: usize) -> Result<()> {
    let mut seen = vec![false; k];
    for &u in order {
        if u >= k || seen[u] {
            return Err(Error::Layout("decoding order is not a permutation of the users".into()));
        }
        seen[u] = true;
    }
    if order.len() != k {
        return Err(Error::Layout("decoding order is not a permutation of the users".into()));
    }
    Ok(())
}

/// Builds the layout of `scheme` for `k` users.
///
/// `grouping` is required for the two-layer scheme and optional for NOMA
/// (one SIC group when absent). `order` is scheme specific: for NOMA it is
/// the SIC order (first entry is decoded first, i.e. the weakest user); for
/// OMA its first entry is the served user. Other schemes ignore it.
pub fn build_stream_layout(
    scheme: Scheme,
    k: usize,
    grouping: Option<&[Vec<usize>]>,
    order: Option<&[usize]>,
) -> Result<StreamLayout> {
    if k < 2 {
        return Err(Error::InvalidConfig("K≥2 required".into()));
    }
    if let Some(g) = grouping {
        check_partition(g, k)?;
    }
    let all: Vec<usize> = (0..k).collect();
    let privates = |offset: usize| -> (Vec<Stream>, Vec<usize>) {
        let s = (0..k).map(|u| Stream::new(format!("p{}", u + 1), vec![u], vec![u])).collect();
        (s, (0..k).map(|u| offset + u).collect())
    };
    let mut grouping_out = None;
    let (streams, decode_order) = match scheme {
        Scheme::OneLayerRs => {
            let mut streams = vec![Stream::new("c", all.clone(), all.clone())];
            let (p, pi) = privates(1);
            streams.extend(p);
            (streams, (0..k).map(|u| vec![0, pi[u]]).collect())
        }
        Scheme::Sdma => {
            let (p, _) = privates(0);
            (p, (0..k).map(|u| vec![u]).collect())
        }
        Scheme::TwoLayerHrs => {
            let groups = grouping
                .ok_or_else(|| Error::Layout("two-layer HRS requires a grouping".into()))?
                .to_vec();
            let mut streams = vec![Stream::new("c", all.clone(), all.clone())];
            let mut group_of = vec![0; k];
            for (i, g) in groups.iter().enumerate() {
                let mut members = g.clone();
                members.sort_unstable();
                for &u in &members {
                    group_of[u] = i;
                }
                streams.push(Stream::new(format!("g{}", i + 1), members.clone(), members));
            }
            let (p, pi) = privates(1 + groups.len());
            streams.extend(p);
            let orders = (0..k).map(|u| vec![0, 1 + group_of[u], pi[u]]).collect();
            grouping_out = Some(groups);
            (streams, orders)
        }
        Scheme::GeneralizedRs => {
            if k > GRS_MAX_USERS {
                return Err(Error::Layout(format!(
                    "generalized RS supports at most {GRS_MAX_USERS} users"
                )));
            }
            let subsets = grs_subsets(k);
            grs_layout_parts(k, &subsets)
        }
        Scheme::RsCmd => {
            let mut streams: Vec<Stream> =
                (0..k).map(|u| Stream::new(format!("c{}", u + 1), all.clone(), vec![u])).collect();
            let (p, pi) = privates(k);
            streams.extend(p);
            (streams, (0..k).map(|u| (0..k).chain([pi[u]]).collect()).collect())
        }
        Scheme::Noma => {
            let sic: Vec<usize> = match order {
                Some(o) => {
                    check_permutation(o, k)?;
                    o.to_vec()
                }
                None => all.clone(),
            };
            let groups: Vec<Vec<usize>> = match grouping {
                Some(g) => g.to_vec(),
                None => vec![all.clone()],
            };
            let mut group_of = vec![0; k];
            for (i, g) in groups.iter().enumerate() {
                for &u in g {
                    group_of[u] = i;
                }
            }
            let mut pos = vec![0; k];
            for (j, &u) in sic.iter().enumerate() {
                pos[u] = j;
            }
            let streams: Vec<Stream> = (0..k)
                .map(|u| {
                    let decoders: Vec<usize> = (0..k)
                        .filter(|&v| group_of[v] == group_of[u] && pos[v] >= pos[u])
                        .collect();
                    Stream::new(format!("n{}", u + 1), decoders, vec![u])
                })
                .collect();
            let orders = (0..k)
                .map(|v| {
                    sic.iter()
                        .copied()
                        .filter(|&u| group_of[u] == group_of[v] && pos[u] <= pos[v])
                        .collect()
                })
                .collect();
            if grouping.is_some() {
                grouping_out = Some(groups);
            }
            (streams, orders)
        }
        Scheme::Oma => {
            let u = match order {
                Some(o) => *o.first().ok_or_else(|| Error::Layout("OMA needs a served user".into()))?,
                None => 0,
            };
            if u >= k {
                return Err(Error::Layout("OMA served user out of range".into()));
            }
            let streams = vec![Stream::new(format!("p{}", u + 1), vec![u], vec![u])];
            let orders = (0..k).map(|v| if v == u { vec![0] } else { vec![] }).collect();
            (streams, orders)
        }
        Scheme::Multicast => {
            let streams = vec![Stream::new("c", all.clone(), all.clone())];
            (streams, vec![vec![0]; k])
        }
    };
    let layout = StreamLayout { scheme, users: k, streams, decode_order, grouping: grouping_out };
    layout.check()?;
    Ok(layout)
}

/// Nonempty subsets of `0..k`, by size descending then lexicographically.
fn grs_subsets(k: usize) -> Vec<Vec<usize>> {
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << k))
        .map(|mask| (0..k).filter(|&u| mask & (1 << u) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    subsets
}

fn grs_layout_parts(k: usize, subsets: &[Vec<usize>]) -> (Vec<Stream>, Vec<Vec<usize>>) {
    let streams: Vec<Stream> = subsets
        .iter()
        .map(|s| {
            let label: String =
                std::iter::once('s').chain(s.iter().map(|u| char::from(b'1' + *u as u8))).collect();
            Stream::new(label, s.clone(), s.clone())
        })
        .collect();
    let orders = (0..k)
        .map(|u| (0..streams.len()).filter(|&i| streams[i].decoders.contains(&u)).collect())
        .collect();
    (streams, orders)
}

/// Every generalized-RS layout obtained by permuting streams within each
/// order level (one permutation per level shared by all users). Only K ≤ 3
/// is enumerated; the count grows as the product of C(K,l)! over levels.
pub fn generalized_rs_all_orders(k: usize) -> Result<Vec<StreamLayout>> {
    if !(2..=3).contains(&k) {
        return Err(Error::Layout("order enumeration supports K ∈ {2,3}".into()));
    }
    let base = grs_subsets(k);
    let mut levels: Vec<Vec<Vec<usize>>> = Vec::new();
    for l in (1..=k).rev() {
        levels.push(base.iter().filter(|s| s.len() == l).cloned().collect());
    }
    let mut combos: Vec<Vec<Vec<usize>>> = vec![vec![]];
    for level in &levels {
        let perms = if level.len() > 1 && level[0].len() > 1 {
            permutations(level)
        } else {
            vec![level.clone()]
        };
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                perms.iter().map(move |p| {
                    let mut v = prefix.clone();
                    v.extend(p.iter().cloned());
                    v
                })
            })
            .collect();
    }
    Ok(combos
        .into_iter()
        .map(|subsets| {
            let (streams, decode_order) = grs_layout_parts(k, &subsets);
            StreamLayout {
                scheme: Scheme::GeneralizedRs,
                users: k,
                streams,
                decode_order,
                grouping: None,
            }
        })
        .collect())
}

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

/// SIC order for NOMA from channel norms: weakest user first, strongest last.
pub fn noma_order_by_norm(norms: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..norms.len()).collect();
    idx.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(a.cmp(&b)));
    idx
}

/// Per-stream precoders plus the split of shared-stream rates among their owners.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecoderSolution {
    pub precoders: BTreeMap<String, CVector>,
    /// Relative split of each shared stream's rate among its owners. The rate
    /// engine scales the entries of one stream so they sum to its achievable
    /// rate; a stream without entries is split equally.
    pub common_alloc: BTreeMap<(String, usize), f64>,
}

impl PrecoderSolution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, label: &str, p: CVector) -> Self {
        self.precoders.insert(label.to_string(), p);
        self
    }

    pub fn total_power(&self) -> f64 {
        self.precoders.values().map(norm_sqr).sum()
    }

    pub fn get(&self, label: &str) -> Option<&CVector> {
        self.precoders.get(label)
    }

    /// Checks coverage of the layout, vector lengths, the power budget
    /// (relative slack 1e-9) and nonnegative shares.
    pub fn check(&self, layout: &StreamLayout, cfg: &SystemConfig) -> Result<()> {
        for s in &layout.streams {
            let p = self
                .precoders
                .get(&s.label)
                .ok_or_else(|| Error::Layout(format!("missing precoder for stream {}", s.label)))?;
            if p.len() != cfg.m {
                return Err(Error::Dimension(format!(
                    "precoder {} has length {}, expected {}",
                    s.label,
                    p.len(),
                    cfg.m
                )));
            }
        }
        if self.total_power() > cfg.power * (1.0 + 1e-9) {
            return Err(Error::InvalidConfig("total precoder power exceeds P".into()));
        }
        if self.common_alloc.values().any(|&c| !(c >= 0.0)) {
            return Err(Error::InvalidConfig("common-rate shares ≥0 required".into()));
        }
        Ok(())
    }
}

/// Rate of one stream as seen by one of its decoders.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeRate {
    pub stream: usize,
    pub user: usize,
    pub rate: f64,
}

/// Achievable rates for a layout, precoders and channel (bit/s/Hz, Gaussian signalling).
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub streams: Vec<String>,
    /// Minimum over each stream's decoders.
    pub stream_rate: Vec<f64>,
    pub decode_rates: Vec<DecodeRate>,
    /// `(stream index, user) → share` for every owner of every stream.
    pub shares: BTreeMap<(usize, usize), f64>,
    pub totals: Vec<f64>,
    pub sum_rate: f64,
    pub min_rate: f64,
}

impl RateReport {
    pub fn stream(&self, label: &str) -> Option<f64> {
        self.streams.iter().position(|s| s == label).map(|i| self.stream_rate[i])
    }

    pub fn decode_rate(&self, label: &str, user: usize) -> Option<f64> {
        let i = self.streams.iter().position(|s| s == label)?;
        self.decode_rates
            .iter()
            .find(|d| d.stream == i && d.user == user)
            .map(|d| d.rate)
    }

    pub fn share(&self, label: &str, user: usize) -> Option<f64> {
        let i = self.streams.iter().position(|s| s == label)?;
        self.shares.get(&(i, user)).copied()
    }

    pub fn weighted_sum(&self, weights: &[f64]) -> f64 {
        self.totals.iter().zip(weights).map(|(r, w)| r * w).sum()
    }

    /// Recomputes totals and aggregates from the stored shares.
    pub(crate) fn refresh_totals(&mut self) {
        for t in self.totals.iter_mut() {
            *t = 0.0;
        }
        for (&(_, u), &c) in &self.shares {
            self.totals[u] += c;
        }
        self.sum_rate = self.totals.iter().sum();
        self.min_rate = self.totals.iter().copied().fold(f64::INFINITY, f64::min);
    }

    /// CSV with one row per (stream, user) decode rate followed by summary rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,stream,user,value\n");
        for d in &self.decode_rates {
            out.push_str(&format!("decode,{},{},{}\n", self.streams[d.stream], d.user + 1, d.rate));
        }
        for (i, s) in self.streams.iter().enumerate() {
            out.push_str(&format!("stream,{},,{}\n", s, self.stream_rate[i]));
        }
        for (&(i, u), &c) in &self.shares {
            out.push_str(&format!("share,{},{},{}\n", self.streams[i], u + 1, c));
        }
        for (u, t) in self.totals.iter().enumerate() {
            out.push_str(&format!("total,,{},{}\n", u + 1, t));
        }
        out.push_str(&format!("sum,,,{}\n", self.sum_rate));
        out.push_str(&format!("min,,,{}\n", self.min_rate));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation_names_invariant() {
        assert!(validate_config(&SystemConfig::new(2, 2, 100.0)).is_ok());
        let err = validate_config(&SystemConfig::new(2, 1, 100.0)).unwrap_err();
        assert!(err.to_string().contains("K≥2 required"));
        let err = validate_config(&SystemConfig::new(2, 2, 0.0)).unwrap_err();
        assert!(err.to_string().contains("P>0 required"));
        let cfg = SystemConfig::new(2, 2, 1.0).with_weights(vec![0.0, 0.0]);
        assert!(validate_config(&cfg).unwrap_err().to_string().contains("weights"));
        let cfg = SystemConfig::new(2, 2, 1.0).with_noise(vec![1.0, 0.0]);
        assert!(validate_config(&cfg).unwrap_err().to_string().contains("noise"));
    }

    #[test]
    fn one_layer_two_users() {
        let l = build_stream_layout(Scheme::OneLayerRs, 2, None, None).unwrap();
        assert_eq!(l.labels(), vec!["c", "p1", "p2"]);
        assert_eq!(l.streams[0].decoders, vec![0, 1]);
        assert_eq!(l.streams[1].decoders, vec![0]);
        assert_eq!(l.streams[2].decoders, vec![1]);
        assert_eq!(l.decode_order, vec![vec![0, 1], vec![0, 2]]);
    }

    #[test]
    fn generalized_three_users() {
        let l = build_stream_layout(Scheme::GeneralizedRs, 3, None, None).unwrap();
        assert_eq!(l.labels(), vec!["s123", "s12", "s13", "s23", "s1", "s2", "s3"]);
        for order in &l.decode_order {
            assert_eq!(order.len(), 4);
            let sizes: Vec<usize> = order.iter().map(|&i| l.streams[i].decoders.len()).collect();
            assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
        }
        assert!(build_stream_layout(Scheme::GeneralizedRs, 7, None, None).is_err());
    }

    #[test]
    fn stream_counts() {
        for k in 2..=6 {
            let count = |s| build_stream_layout(s, k, None, None).unwrap().streams.len();
            assert_eq!(count(Scheme::OneLayerRs), k + 1);
            assert_eq!(count(Scheme::GeneralizedRs), (1 << k) - 1);
            assert_eq!(count(Scheme::RsCmd), 2 * k);
            assert_eq!(count(Scheme::Sdma), k);
            assert_eq!(count(Scheme::Noma), k);
            assert_eq!(count(Scheme::Oma), 1);
            assert_eq!(count(Scheme::Multicast), 1);
            let g: Vec<Vec<usize>> = (0..k).map(|u| vec![u]).collect();
            let hrs = build_stream_layout(Scheme::TwoLayerHrs, k, Some(&g), None).unwrap();
            assert_eq!(hrs.streams.len(), 2 * k + 1);
        }
    }

    #[test]
    fn hrs_requires_partition() {
        assert!(build_stream_layout(Scheme::TwoLayerHrs, 4, None, None).is_err());
        let bad = vec![vec![0, 1], vec![1, 2, 3]];
        assert!(build_stream_layout(Scheme::TwoLayerHrs, 4, Some(&bad), None).is_err());
        let missing = vec![vec![0, 1], vec![2]];
        assert!(build_stream_layout(Scheme::TwoLayerHrs, 4, Some(&missing), None).is_err());
        let ok = vec![vec![0, 1], vec![2, 3]];
        let l = build_stream_layout(Scheme::TwoLayerHrs, 4, Some(&ok), None).unwrap();
        assert_eq!(l.labels(), vec!["c", "g1", "g2", "p1", "p2", "p3", "p4"]);
        assert_eq!(l.decode_order[2], vec![0, 2, 5]);
    }

    #[test]
    fn noma_nested_decoders() {
        let l = build_stream_layout(Scheme::Noma, 3, None, Some(&[2, 0, 1])).unwrap();
        // user 3 decoded first by everyone, user 2 is the strongest
        assert_eq!(l.streams[2].decoders, vec![0, 1, 2]);
        assert_eq!(l.streams[0].decoders, vec![0, 1]);
        assert_eq!(l.streams[1].decoders, vec![1]);
        assert_eq!(l.decode_order[1], vec![2, 0, 1]);
        assert_eq!(l.decode_order[2], vec![2]);
    }

    #[test]
    fn noma_groups_keep_sic_inside_group() {
        let g = vec![vec![0, 1], vec![2, 3]];
        let l = build_stream_layout(Scheme::Noma, 4, Some(&g), None).unwrap();
        assert_eq!(l.streams[0].decoders, vec![0, 1]);
        assert_eq!(l.streams[2].decoders, vec![2, 3]);
        assert_eq!(l.decode_order[3], vec![2, 3]);
    }

    #[test]
    fn grs_order_enumeration() {
        assert_eq!(generalized_rs_all_orders(3).unwrap().len(), 6);
        assert_eq!(generalized_rs_all_orders(2).unwrap().len(), 1);
        assert!(generalized_rs_all_orders(4).is_err());
    }

    #[test]
    fn text_form() {
        let l = build_stream_layout(Scheme::OneLayerRs, 2, None, None).unwrap();
        let expected = "layout rs K=2\n\
            stream c decoders=1,2 owners=1,2\n\
            stream p1 decoders=1 owners=1\n\
            stream p2 decoders=2 owners=2\n\
            order 1: c p1\n\
            order 2: c p2\n";
        assert_eq!(l.to_string(), expected);
    }

    #[test]
    fn norm_order_puts_strongest_last() {
        assert_eq!(noma_order_by_norm(&[2.0, 0.5, 1.0]), vec![1, 2, 0]);
    }

    #[test]
    fn scheme_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
    }
}
