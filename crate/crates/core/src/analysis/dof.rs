//! Closed-form sum/MMF degrees of freedom and high-SNR slope estimation.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;

use crate::error::{Error, Result};

pub type Dof = Ratio<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DofScheme {
    Noma,
    Sdma,
    Rsma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DofMetric {
    Sum,
    Mmf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofCsit {
    Perfect,
    /// CSIT scaling factor `α ∈ [0, 1]`.
    Imperfect(Dof),
}

impl FromStr for DofScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "noma" => Ok(DofScheme::Noma),
            "sdma" => Ok(DofScheme::Sdma),
            "rsma" | "rs" => Ok(DofScheme::Rsma),
            _ => Err(Error::Parse(format!("unknown DoF scheme '{s}' (noma, sdma, rsma)"))),
        }
    }
}

impl FromStr for DofMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(DofMetric::Sum),
            "mmf" => Ok(DofMetric::Mmf),
            _ => Err(Error::Parse(format!("unknown DoF metric '{s}' (sum, mmf)"))),
        }
    }
}

impl fmt::Display for DofScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DofScheme::Noma => "noma",
            DofScheme::Sdma => "sdma",
            DofScheme::Rsma => "rsma",
        })
    }
}

impl fmt::Display for DofMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DofMetric::Sum => "sum",
            DofMetric::Mmf => "mmf",
        })
    }
}

/// Converts a decimal `α` to an exact ratio (denominators up to 10⁶).
pub fn alpha_ratio(alpha: f64) -> Result<Dof> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("alpha in [0,1] required, got {alpha}")));
    }
    let scaled = (alpha * 1e6).round() as i64;
    Ok(Ratio::new(scaled, 1_000_000))
}

/// One DoF lookup: scheme, metric and CSIT for an `M`-antenna, `K`-user
/// broadcast channel. NOMA users form `groups` groups of `group_size` users.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofQuery {
    pub scheme: DofScheme,
    pub metric: DofMetric,
    pub csit: DofCsit,
    pub m: i64,
    pub k: i64,
    pub groups: i64,
    pub group_size: i64,
}

impl DofQuery {
    /// Single-group query (`G = 1`, `g = K`).
    pub fn new(scheme: DofScheme, metric: DofMetric, csit: DofCsit, m: i64, k: i64) -> Self {
        DofQuery { scheme, metric, csit, m, k, groups: 1, group_size: k }
    }

    pub fn grouped(mut self, groups: i64, group_size: i64) -> Self {
        self.groups = groups;
        self.group_size = group_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.k < 1 {
            return Err(Error::InvalidConfig("M≥1 and K≥1 required".into()));
        }
        if self.group_size < 1 || self.group_size > self.k {
            return Err(Error::InvalidConfig("1≤g≤K required".into()));
        }
        if self.groups * self.group_size != self.k {
            return Err(Error::InvalidConfig(format!(
                "G·g=K required (G={}, g={}, K={})",
                self.groups, self.group_size, self.k
            )));
        }
        if let DofCsit::Imperfect(a) = self.csit {
            if a < Ratio::from_integer(0) || a > Ratio::from_integer(1) {
                return Err(Error::InvalidConfig("alpha in [0,1] required".into()));
            }
        }
        Ok(())
    }
}

/// Exact sum- or MMF-DoF of the queried scheme.
pub fn dof_closed_form(q: &DofQuery) -> Result<Dof> {
    q.validate()?;
    let int = Ratio::from_integer;
    let (m, k, big_g, g) = (q.m, q.k, q.groups, q.group_size);
    let one = int(1);
    let zero = int(0);
    let v = match (q.scheme, q.metric, q.csit) {
        (DofScheme::Noma, DofMetric::Sum, DofCsit::Perfect) => int(m.min(big_g)),
        (DofScheme::Noma, DofMetric::Sum, DofCsit::Imperfect(a)) => one.max(int(m.min(big_g)) * a),
        (DofScheme::Noma, DofMetric::Mmf, DofCsit::Perfect) => {
            if m >= k - g + 1 {
                Ratio::new(1, g)
            } else {
                zero
            }
        }
        (DofScheme::Noma, DofMetric::Mmf, DofCsit::Imperfect(a)) => {
            if big_g == 1 {
                Ratio::new(1, k)
            } else if m >= k - g + 1 {
                a / g
            } else {
                zero
            }
        }
        (DofScheme::Sdma, DofMetric::Sum, DofCsit::Perfect) => int(m.min(k)),
        (DofScheme::Sdma, DofMetric::Sum, DofCsit::Imperfect(a)) => one.max(int(m.min(k)) * a),
        (DofScheme::Sdma, DofMetric::Mmf, DofCsit::Perfect) => {
            if m >= k {
                one
            } else {
                zero
            }
        }
        (DofScheme::Sdma, DofMetric::Mmf, DofCsit::Imperfect(a)) => {
            if m >= k {
                a
            } else {
                zero
            }
        }
        (DofScheme::Rsma, DofMetric::Sum, DofCsit::Perfect) => int(m.min(k)),
        (DofScheme::Rsma, DofMetric::Sum, DofCsit::Imperfect(a)) => one + int(m.min(k) - 1) * a,
        (DofScheme::Rsma, DofMetric::Mmf, DofCsit::Perfect) => {
            if m >= k {
                one
            } else {
                Ratio::new(1, 1 + k - m)
            }
        }
        (DofScheme::Rsma, DofMetric::Mmf, DofCsit::Imperfect(a)) => {
            let knee = Ratio::new(1, 1 + k - m.min(k));
            if m >= k {
                (one + int(k - 1) * a) / k
            } else if a <= knee {
                (one + int(m - 1) * a) / k
            } else {
                knee
            }
        }
    };
    Ok(v)
}

/// Least-squares fit of rate against `log₂ P` over the highest SNR points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub points: usize,
}

/// Slope of `rates` against `log₂(10^{snr/10})` using the `top` highest SNRs.
/// Noise power is taken as 1, so SNR and `P` coincide.
pub fn empirical_dof(snr_db: &[f64], rates: &[f64], top: usize) -> Result<SlopeFit> {
    if snr_db.len() != rates.len() {
        return Err(Error::Dimension("one rate per SNR point required".into()));
    }
    if top < 3 || snr_db.len() < top {
        return Err(Error::InvalidConfig(format!("at least 3 SNR points required, got {}", snr_db.len().min(top))));
    }
    let mut idx: Vec<usize> = (0..snr_db.len()).collect();
    idx.sort_by(|&a, &b| snr_db[b].total_cmp(&snr_db[a]));
    idx.truncate(top);
    let span = snr_db[idx[0]] - snr_db[idx[top - 1]];
    if span < 10.0 {
        return Err(Error::InvalidConfig(format!("fitted points must span ≥10 dB, got {span} dB")));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| snr_db[i] / 10.0 * 10f64.log2()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| rates[i]).collect();
    let n = top as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Ok(SlopeFit { slope, intercept, residual, points: top })
}
