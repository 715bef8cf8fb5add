//! Preferred-scheme classification over two-user channel geometries.

use std::fmt;

use rayon::prelude::*;

use crate::channels::{deterministic_two_user, theta_from_rho};
use crate::error::{Error, Result};
use crate::linalg::{zeros, CMatrix};
use crate::model::{build_stream_layout, PrecoderSolution, Scheme, StreamLayout, SystemConfig};
use crate::optimizer::{solve, solve_scheme, InitRule, OptimizeSpec, SolveResult, SolveStatus};

/// Default selection tolerance ε' in bit/s/Hz.
pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionLabel {
    Rsma,
    Sdma,
    Noma,
    Oma,
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegionLabel::Rsma => "RSMA",
            RegionLabel::Sdma => "SDMA",
            RegionLabel::Noma => "NOMA",
            RegionLabel::Oma => "OMA",
        })
    }
}

/// Optimized weighted sum rates of the four candidate schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeWsr {
    pub rsma: f64,
    pub sdma: f64,
    pub noma: f64,
    pub oma: f64,
}

/// Applies the selection rules in order. When none fires, the best
/// baseline within `epsilon` of RSMA is chosen, otherwise RSMA.
pub fn apply_region_rules(w: &SchemeWsr, epsilon: f64) -> RegionLabel {
    if w.rsma - w.oma < epsilon {
        return RegionLabel::Oma;
    }
    if w.sdma - w.oma > epsilon && w.rsma - w.sdma < epsilon {
        return RegionLabel::Sdma;
    }
    if w.noma - w.sdma > epsilon && w.rsma - w.noma < epsilon {
        return RegionLabel::Noma;
    }
    if w.rsma - w.sdma > epsilon && w.rsma - w.noma > epsilon {
        return RegionLabel::Rsma;
    }
    let mut best = (RegionLabel::Sdma, w.sdma);
    for (l, v) in [(RegionLabel::Noma, w.noma), (RegionLabel::Oma, w.oma)] {
        if v > best.1 {
            best = (l, v);
        }
    }
    if w.rsma - best.1 < epsilon {
        best.0
    } else {
        RegionLabel::Rsma
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionCell {
    pub rho: f64,
    pub gamma_db: f64,
    pub label: RegionLabel,
    pub wsr: SchemeWsr,
    pub epsilon: f64,
}

/// Grid and solver settings for [`classify_operational_region`].
#[derive(Debug, Clone)]
pub struct RegionSpec {
    pub rhos: Vec<f64>,
    pub gammas_db: Vec<f64>,
    pub weights: [f64; 2],
    pub epsilon: f64,
    pub snr_db: f64,
    pub solver: OptimizeSpec,
}

impl RegionSpec {
    /// `n × n` grid with `ρ` at cell midpoints of `(0, 1)` and `γ_dB` evenly
    /// spaced over `[−20, 0]`.
    pub fn grid(n: usize, weights: [f64; 2]) -> Self {
        let rhos = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let gammas_db = (0..n).map(|i| if n == 1 { 0.0 } else { -20.0 + 20.0 * i as f64 / (n - 1) as f64 }).collect();
        RegionSpec { rhos, gammas_db, weights, epsilon: DEFAULT_EPSILON, snr_db: 20.0, solver: OptimizeSpec::wsr() }
    }
}

/// Maps a two-user baseline solution into the one-layer RS layout: streams
/// decoded by one user become that user's private stream, a stream decoded
/// by both becomes the common stream.
pub fn lift_to_rs(from: &StreamLayout, sol: &PrecoderSolution, m: usize) -> Result<PrecoderSolution> {
    let rs = build_stream_layout(Scheme::OneLayerRs, from.users, None, None)?;
    let mut out = PrecoderSolution::new();
    for s in &rs.streams {
        out.precoders.insert(s.label.clone(), zeros(m));
    }
    let mut common_used = false;
    for s in &from.streams {
        let p = sol.get(&s.label).ok_or_else(|| Error::Precoder(format!("missing precoder {}", s.label)))?.clone();
        let target = if s.decoders.len() == 1 {
            format!("p{}", s.decoders[0] + 1)
        } else if s.decoders.len() == from.users && !common_used {
            common_used = true;
            "c".to_string()
        } else {
            return Err(Error::Layout(format!("stream {} has no one-layer RS counterpart", s.label)));
        };
        out.precoders.insert(target, p);
    }
    Ok(out)
}

/// Optimized results of RSMA and its three baselines on `h`. RSMA is also
/// warm-started from each baseline optimum, which is a feasible RS point.
pub fn compare_schemes(
    cfg: &SystemConfig,
    h: &CMatrix,
    spec: &OptimizeSpec,
) -> Result<Vec<(Scheme, StreamLayout, SolveResult)>> {
    let mut out = Vec::new();
    for scheme in [Scheme::Sdma, Scheme::Noma, Scheme::Oma] {
        let (l, r) = solve_scheme(scheme, cfg, h, spec)?;
        out.push((scheme, l, r));
    }
    let (rs_layout, mut best) = solve_scheme(Scheme::OneLayerRs, cfg, h, spec)?;
    for (_, l, r) in &out {
        if r.status == SolveStatus::Infeasible {
            continue;
        }
        let init = lift_to_rs(l, &r.solution, cfg.m)?;
        let warm = OptimizeSpec { init: InitRule::Given(init), restarts: 1, ..spec.clone() };
        let cand = solve(&rs_layout, cfg, h, &warm)?;
        if cand.status != SolveStatus::Infeasible && cand.objective > best.objective {
            best = cand;
        }
    }
    out.insert(0, (Scheme::OneLayerRs, rs_layout, best));
    Ok(out)
}

fn wsr_of(results: &[(Scheme, StreamLayout, SolveResult)], scheme: Scheme) -> f64 {
    results.iter().find(|r| r.0 == scheme).map(|r| r.2.objective).unwrap_or(f64::NEG_INFINITY)
}

/// Classifies one geometry. Weights are rescaled so the smallest positive
/// one is 1 (pairs like `(1, 10^0.5)` are used as given); the stored sum
/// rates use the rescaled weights, which makes the label independent of a
/// joint weight scaling.
pub fn classify_cell(rho: f64, gamma_db: f64, spec: &RegionSpec) -> Result<RegionCell> {
    if spec.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || !spec.weights.iter().any(|w| *w > 0.0) {
        return Err(Error::InvalidConfig("weights ≥0 and not all zero required".into()));
    }
    let top = spec.weights.iter().copied().filter(|w| *w > 0.0).fold(f64::INFINITY, f64::min);
    let (h, _) = deterministic_two_user(gamma_db, theta_from_rho(rho));
    let cfg = SystemConfig::from_snr_db(2, 2, spec.snr_db).with_weights(spec.weights.iter().map(|w| w / top).collect());
    let results = compare_schemes(&cfg, &h, &spec.solver)?;
    let wsr = SchemeWsr {
        rsma: wsr_of(&results, Scheme::OneLayerRs),
        sdma: wsr_of(&results, Scheme::Sdma),
        noma: wsr_of(&results, Scheme::Noma),
        oma: wsr_of(&results, Scheme::Oma),
    };
    Ok(RegionCell { rho, gamma_db, label: apply_region_rules(&wsr, spec.epsilon), wsr, epsilon: spec.epsilon })
}

/// Cells in row-major order: `ρ` outer, `γ_dB` inner.
pub fn classify_operational_region(spec: &RegionSpec) -> Result<Vec<RegionCell>> {
    if !(spec.epsilon > 0.0) {
        return Err(Error::InvalidConfig("epsilon>0 required".into()));
    }
    let grid: Vec<(f64, f64)> =
        spec.rhos.iter().flat_map(|&r| spec.gammas_db.iter().map(move |&g| (r, g))).collect();
    grid.par_iter().map(|&(r, g)| classify_cell(r, g, spec)).collect()
}

pub const REGION_CSV_HEADER: &str = "rho,gamma_db,label,wsr_rsma,wsr_sdma,wsr_noma,wsr_oma,epsilon";

pub fn region_csv(cells: &[RegionCell]) -> String {
    let mut out = String::from(REGION_CSV_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.rho, c.gamma_db, c.label, c.wsr.rsma, c.wsr.sdma, c.wsr.noma, c.wsr.oma, c.epsilon
        ));
    }
    out
}
