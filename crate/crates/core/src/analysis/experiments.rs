//! Experiment recipes. Each produces one or more deterministic CSV artifacts.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::analysis::dof::{alpha_ratio, dof_closed_form, empirical_dof, DofCsit, DofMetric, DofQuery, DofScheme};
use crate::analysis::region::{classify_operational_region, region_csv, RegionSpec};
use crate::channels::{sample_rayleigh, sample_scaled_error_pair, ChannelEnsembleSpec};
use crate::error::{Error, Result};
use crate::linalg::{column, norm_sqr, CMatrix};
use crate::model::{build_stream_layout, noma_order_by_norm, Scheme, SystemConfig};
use crate::optimizer::{
    evaluate_objective, solve_on_samples, solve_scheme, CsitMode, Objective, OptimizeSpec, SampleSet, SolveStatus,
};
use crate::precoders::{
    closed_form_directions, noma_closed_form, optimize_tau, tau_objective, CommonRule, PrivatePolicy, PrivateRule,
    TauInstance, TauObjective,
};
use crate::rates::{dominant_face_split, mac_pentagon, rate_uplink, UplinkUser, DOMINANT_FACE_ORDER};

/// A named CSV file produced by a recipe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: &str, contents: String) -> Self {
        Artifact { name: name.to_string(), contents }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Recipe {
    RateRegion,
    EsrVsAlpha,
    MmfVsSnr,
    DofSlope,
    OverloadedQos,
    UplinkRegion,
    OperRegion,
}

impl Recipe {
    pub const ALL: [Recipe; 7] = [
        Recipe::RateRegion,
        Recipe::EsrVsAlpha,
        Recipe::MmfVsSnr,
        Recipe::DofSlope,
        Recipe::OverloadedQos,
        Recipe::UplinkRegion,
        Recipe::OperRegion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::RateRegion => "rate-region",
            Recipe::EsrVsAlpha => "esr-vs-alpha",
            Recipe::MmfVsSnr => "mmf-vs-snr",
            Recipe::DofSlope => "dof-slope",
            Recipe::OverloadedQos => "overloaded-qos",
            Recipe::UplinkRegion => "uplink-region",
            Recipe::OperRegion => "oper-region",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Recipe::RateRegion => "two-user ergodic rate region by weight sweep under imperfect CSIT",
            Recipe::EsrVsAlpha => "ergodic sum rate against the CSIT scaling factor",
            Recipe::MmfVsSnr => "max-min rate and common-power fraction against SNR",
            Recipe::DofSlope => "high-SNR sum-rate slope of closed-form RS and ZF-SDMA",
            Recipe::OverloadedQos => "overloaded WSR with the per-SNR QoS ladder",
            Recipe::UplinkRegion => "two-user MAC pentagon and split-achieved dominant-face points",
            Recipe::OperRegion => "preferred scheme over the (rho, gamma) grid of two-user channels",
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL
            .iter()
            .copied()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown recipe '{s}'")))
    }
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn power_of(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

fn check_positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::InvalidConfig(format!("{name}≥1 required")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidConfig(format!("alpha≥0 required, got {alpha}")));
    }
    Ok(())
}

// ---------------------------------------------------------------- rate region

#[derive(Debug, Clone)]
pub struct RateRegionParams {
    pub m: usize,
    pub snr_db: f64,
    pub alpha: f64,
    pub variances: Vec<f64>,
    pub trials: usize,
    /// Conditional channel draws per estimate in the sample-average objective.
    pub samples: usize,
    /// Number of weight pairs `(cos φ, sin φ)` over `φ ∈ [0, π/2]`.
    pub points: usize,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    pub solver: OptimizeSpec,
}

impl Default for RateRegionParams {
    fn default() -> Self {
        RateRegionParams {
            m: 2,
            snr_db: 20.0,
            alpha: 0.6,
            variances: vec![1.0, 1.0],
            trials: 10,
            samples: 50,
            points: 10,
            schemes: vec![Scheme::OneLayerRs, Scheme::Sdma, Scheme::Noma, Scheme::Oma],
            seed: 1,
            solver: OptimizeSpec::wsr().with_restarts(1),
        }
    }
}

/// Weight pairs on the quarter circle, endpoints `(1, 0)` and `(0, 1)` included.
pub fn weight_pairs(points: usize) -> Vec<[f64; 2]> {
    (0..points)
        .map(|i| {
            let phi = if points == 1 { std::f64::consts::FRAC_PI_4 } else { std::f64::consts::FRAC_PI_2 * i as f64 / (points - 1) as f64 };
            let (s, c) = phi.sin_cos();
            // snap the endpoints to exact zeros
            [if c.abs() < 1e-12 { 0.0 } else { c }, if s.abs() < 1e-12 { 0.0 } else { s }]
        })
        .collect()
}

pub const RATE_REGION_HEADER: &str = "weight1,weight2,scheme,R1,R2,converged";

/// Ergodic rate region: per weight pair and scheme, the sample-average WSR
/// problem is solved for each channel estimate and the user rates are
/// averaged over estimates.
pub fn rate_region(p: &RateRegionParams) -> Result<Vec<Artifact>> {
    check_positive("trials", p.trials)?;
    check_positive("samples", p.samples)?;
    check_alpha(p.alpha)?;
    if p.points < 2 {
        return Err(Error::InvalidConfig("points≥2 required".into()));
    }
    if p.variances.len() != 2 {
        return Err(Error::InvalidConfig("rate-region needs two user variances".into()));
    }
    let power = power_of(p.snr_db);
    let ens = ChannelEnsembleSpec { variances: p.variances.clone(), trials: p.trials, seed: p.seed };
    ens.validate()?;
    let csit = CsitMode::ErgodicSaa { alpha: p.alpha, samples: p.samples, variances: Some(p.variances.clone()) };
    let mut jobs = Vec::new();
    for w in weight_pairs(p.points) {
        for &s in &p.schemes {
            jobs.push((w, s));
        }
    }
    let rows: Vec<String> = jobs
        .par_iter()
        .map(|&(w, scheme)| {
            let cfg = SystemConfig::new(p.m, 2, power).with_weights(w.to_vec());
            let mut r = [0.0; 2];
            let mut converged = true;
            for t in 0..p.trials as u64 {
                let pair = sample_scaled_error_pair(&ens, p.m, p.alpha, power, t);
                let spec = p.solver.clone().with_csit(csit.clone()).with_seed(p.seed.wrapping_add(t));
                let (_, res) = solve_scheme(scheme, &cfg, &pair.h_hat, &spec)?;
                converged &= res.converged();
                r[0] += res.totals[0] / p.trials as f64;
                r[1] += res.totals[1] / p.trials as f64;
            }
            Ok(format!("{},{},{},{},{},{}\n", w[0], w[1], scheme, r[0], r[1], converged))
        })
        .collect::<Result<_>>()?;
    let mut out = format!("{RATE_REGION_HEADER}\n");
    out.extend(rows);
    Ok(vec![Artifact::new("rate-region.csv", out)])
}

// --------------------------------------------------------------- ESR vs alpha

#[derive(Debug, Clone)]
pub struct EsrVsAlphaParams {
    pub m: usize,
    pub k: usize,
    pub snr_db: f64,
    pub alphas: Vec<f64>,
    pub variances: Vec<f64>,
    pub trials: usize,
    pub samples: usize,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    pub solver: OptimizeSpec,
}

impl Default for EsrVsAlphaParams {
    fn default() -> Self {
        EsrVsAlphaParams {
            m: 2,
            k: 3,
            snr_db: 20.0,
            alphas: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            variances: vec![1.0; 3],
            trials: 10,
            samples: 50,
            schemes: vec![Scheme::OneLayerRs, Scheme::Sdma],
            seed: 1,
            solver: OptimizeSpec::wsr().with_restarts(1),
        }
    }
}

pub const ESR_VS_ALPHA_HEADER: &str = "alpha,scheme,esr,stderr";

/// Sample-average sum rate of each scheme at every `α`; trial `t` reuses the
/// same underlying Gaussian draws for every `α` and scheme.
pub fn esr_vs_alpha(p: &EsrVsAlphaParams) -> Result<Vec<Artifact>> {
    check_positive("trials", p.trials)?;
    check_positive("samples", p.samples)?;
    if p.variances.len() != p.k {
        return Err(Error::InvalidConfig("one variance per user required".into()));
    }
    let power = power_of(p.snr_db);
    let ens = ChannelEnsembleSpec { variances: p.variances.clone(), trials: p.trials, seed: p.seed };
    ens.validate()?;
    let cfg = SystemConfig::new(p.m, p.k, power);
    let mut jobs = Vec::new();
    for &a in &p.alphas {
        check_alpha(a)?;
        for &s in &p.schemes {
            jobs.push((a, s));
        }
    }
    let rows: Vec<String> = jobs
        .par_iter()
        .map(|&(alpha, scheme)| {
            let csit = CsitMode::ErgodicSaa { alpha, samples: p.samples, variances: Some(p.variances.clone()) };
            let vals = (0..p.trials as u64)
                .map(|t| {
                    let pair = sample_scaled_error_pair(&ens, p.m, alpha, power, t);
                    let spec = p.solver.clone().with_csit(csit.clone()).with_seed(p.seed.wrapping_add(t));
                    Ok(solve_scheme(scheme, &cfg, &pair.h_hat, &spec)?.1.objective)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (m, se) = mean_stderr(&vals);
            Ok(format!("{alpha},{scheme},{m},{se}\n"))
        })
        .collect::<Result<_>>()?;
    let mut out = format!("{ESR_VS_ALPHA_HEADER}\n");
    out.extend(rows);
    Ok(vec![Artifact::new("esr-vs-alpha.csv", out)])
}

// ---------------------------------------------------------------- MMF vs SNR

#[derive(Debug, Clone)]
pub struct MmfVsSnrParams {
    pub m: usize,
    pub k: usize,
    pub alpha: f64,
    pub snrs_db: Vec<f64>,
    pub trials: usize,
    pub samples: usize,
    /// Power ratios tried for the closed-form NOMA baseline.
    pub noma_betas: Vec<f64>,
    pub seed: u64,
    pub solver: OptimizeSpec,
}

impl Default for MmfVsSnrParams {
    fn default() -> Self {
        MmfVsSnrParams {
            m: 4,
            k: 4,
            alpha: 0.5,
            snrs_db: vec![10.0, 20.0, 30.0],
            trials: 50,
            samples: 100,
            noma_betas: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            seed: 1,
            solver: OptimizeSpec::mmf(),
        }
    }
}

/// One trial of the MMF study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmfTrial {
    pub snr_db: f64,
    pub trial: usize,
    pub rsma: f64,
    pub sdma: f64,
    pub noma: f64,
    /// `P_c / P` of the optimized RS solution.
    pub common_fraction: f64,
}

pub const MMF_TRIALS_HEADER: &str = "snr_db,trial,mmf_rsma,mmf_sdma,mmf_noma,common_fraction";
pub const MMF_SUMMARY_HEADER: &str = "snr_db,scheme,mean,stderr";

/// Every trial at every SNR, ordered by SNR then trial. RS and SDMA are
/// optimized on the sample-average MMF objective; NOMA uses closed-form
/// precoders with the SIC order by estimated norm and the best `β` from
/// `noma_betas`. All three are scored on the same conditional samples.
pub fn mmf_trials(p: &MmfVsSnrParams) -> Result<Vec<MmfTrial>> {
    check_positive("trials", p.trials)?;
    check_positive("samples", p.samples)?;
    check_alpha(p.alpha)?;
    if p.noma_betas.is_empty() || p.noma_betas.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::InvalidConfig("noma betas >0 required".into()));
    }
    let ens = ChannelEnsembleSpec::iid(p.k, p.trials, p.seed);
    let rs = build_stream_layout(Scheme::OneLayerRs, p.k, None, None)?;
    let sdma = build_stream_layout(Scheme::Sdma, p.k, None, None)?;
    let jobs: Vec<(f64, usize)> = p.snrs_db.iter().flat_map(|&s| (0..p.trials).map(move |t| (s, t))).collect();
    jobs.par_iter()
        .map(|&(snr_db, trial)| {
            let cfg = SystemConfig::from_snr_db(p.m, p.k, snr_db);
            let pair = sample_scaled_error_pair(&ens, p.m, p.alpha, cfg.power, trial as u64);
            let csit = CsitMode::ErgodicSaa { alpha: p.alpha, samples: p.samples, variances: None };
            let spec = OptimizeSpec { objective: Objective::Mmf, ..p.solver.clone() }
                .with_csit(csit.clone())
                .with_seed(p.seed.wrapping_add(trial as u64));
            let samples = SampleSet::for_mode(&csit, &pair.h_hat, &cfg, spec.seed);
            let r = solve_on_samples(&rs, &cfg, &pair.h_hat, &spec, &samples)?;
            let s = solve_on_samples(&sdma, &cfg, &pair.h_hat, &spec, &samples)?;
            let norms: Vec<f64> = (0..p.k).map(|u| norm_sqr(&column(&pair.h_hat, u))).collect();
            let noma = build_stream_layout(Scheme::Noma, p.k, None, Some(&noma_order_by_norm(&norms)))?;
            let mut best_noma = f64::NEG_INFINITY;
            for &beta in &p.noma_betas {
                let sol = noma_closed_form(&noma, &pair.h_hat, &cfg, beta)?;
                best_noma = best_noma.max(evaluate_objective(&noma, &cfg, &sol, &samples, Objective::Mmf)?);
            }
            Ok(MmfTrial {
                snr_db,
                trial,
                rsma: r.objective,
                sdma: s.objective,
                noma: best_noma,
                common_fraction: r.common_power_fraction(&rs, &cfg),
            })
        })
        .collect()
}

pub fn mmf_vs_snr(p: &MmfVsSnrParams) -> Result<Vec<Artifact>> {
    let trials = mmf_trials(p)?;
    let mut detail = format!("{MMF_TRIALS_HEADER}\n");
    for t in &trials {
        detail.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.snr_db, t.trial, t.rsma, t.sdma, t.noma, t.common_fraction
        ));
    }
    let mut summary = format!("{MMF_SUMMARY_HEADER}\n");
    for &snr in &p.snrs_db {
        let at: Vec<&MmfTrial> = trials.iter().filter(|t| t.snr_db == snr).collect();
        let cols: [(&str, fn(&MmfTrial) -> f64); 4] = [
            ("rsma", |t| t.rsma),
            ("sdma", |t| t.sdma),
            ("noma", |t| t.noma),
            ("common_fraction", |t| t.common_fraction),
        ];
        for (name, f) in cols {
            let (m, se) = mean_stderr(&at.iter().map(|t| f(t)).collect::<Vec<_>>());
            summary.push_str(&format!("{snr},{name},{m},{se}\n"));
        }
    }
    Ok(vec![Artifact::new("mmf-vs-snr.csv", detail), Artifact::new("mmf-vs-snr-summary.csv", summary)])
}

// ------------------------------------------------------------------ DoF slope

#[derive(Debug, Clone)]
pub struct DofSlopeParams {
    pub m: usize,
    pub k: usize,
    pub alpha: f64,
    pub snrs_db: Vec<f64>,
    /// Highest SNR points used in the slope fit.
    pub top: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for DofSlopeParams {
    fn default() -> Self {
        DofSlopeParams { m: 2, k: 2, alpha: 0.6, snrs_db: vec![0.0, 10.0, 20.0, 30.0, 40.0], top: 3, trials: 100, seed: 1 }
    }
}

/// Ergodic sum rate of one scheme along the SNR grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeCurve {
    pub scheme: &'static str,
    pub esr: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Private power fraction per SNR (1 for SDMA).
    pub tau: Vec<f64>,
    pub slope: f64,
    pub residual: f64,
    pub expected: f64,
}

/// RS with ZF private directions, a fixed common direction and an
/// ensemble-optimized `τ`, against ZF-SDMA with equal powers. Directions
/// come from the estimate; rates are evaluated on the true channel. RZF
/// replaces ZF when the estimate is rank deficient.
pub fn dof_slope_curves(p: &DofSlopeParams) -> Result<Vec<SlopeCurve>> {
    check_positive("trials", p.trials)?;
    check_alpha(p.alpha)?;
    let ens = ChannelEnsembleSpec::iid(p.k, p.trials, p.seed);
    let rs = build_stream_layout(Scheme::OneLayerRs, p.k, None, None)?;
    let sdma = build_stream_layout(Scheme::Sdma, p.k, None, None)?;
    let points: Vec<(f64, f64, f64, f64, f64)> = p
        .snrs_db
        .par_iter()
        .map(|&snr| {
            let cfg = SystemConfig::from_snr_db(p.m, p.k, snr);
            let instances = (0..p.trials as u64)
                .map(|t| {
                    let pair = sample_scaled_error_pair(&ens, p.m, p.alpha, cfg.power, t);
                    // at P ≤ 1 the estimate carries no power and ZF is undefined
                    let directions =
                        closed_form_directions(&rs, &pair.h_hat, &cfg, PrivateRule::Zf, CommonRule::Random).or_else(
                            |_| closed_form_directions(&rs, &pair.h_hat, &cfg, PrivateRule::Rzf(None), CommonRule::Random),
                        )?;
                    Ok(TauInstance { directions, h_hat: pair.h_hat, h: pair.h })
                })
                .collect::<Result<Vec<_>>>()?;
            let tau = optimize_tau(&rs, &instances, &cfg, TauObjective::SumRate, PrivatePolicy::Equal)?;
            let per = |layout, t| -> Result<Vec<f64>> {
                instances
                    .iter()
                    .map(|i| tau_objective(layout, std::slice::from_ref(i), &cfg, TauObjective::SumRate, PrivatePolicy::Equal, t))
                    .collect()
            };
            let (rs_mean, rs_se) = mean_stderr(&per(&rs, tau.tau)?);
            let (sd_mean, sd_se) = mean_stderr(&per(&sdma, 1.0)?);
            Ok((rs_mean, rs_se, tau.tau, sd_mean, sd_se))
        })
        .collect::<Result<_>>()?;
    let alpha = alpha_ratio(p.alpha.min(1.0))?;
    let expected = |scheme| -> Result<f64> {
        let q = DofQuery::new(scheme, DofMetric::Sum, DofCsit::Imperfect(alpha), p.m as i64, p.k as i64);
        let v = dof_closed_form(&q)?;
        Ok(*v.numer() as f64 / *v.denom() as f64)
    };
    let rs_esr: Vec<f64> = points.iter().map(|x| x.0).collect();
    let sd_esr: Vec<f64> = points.iter().map(|x| x.3).collect();
    let rs_fit = empirical_dof(&p.snrs_db, &rs_esr, p.top)?;
    let sd_fit = empirical_dof(&p.snrs_db, &sd_esr, p.top)?;
    Ok(vec![
        SlopeCurve {
            scheme: "rsma",
            esr: rs_esr,
            stderr: points.iter().map(|x| x.1).collect(),
            tau: points.iter().map(|x| x.2).collect(),
            slope: rs_fit.slope,
            residual: rs_fit.residual,
            expected: expected(DofScheme::Rsma)?,
        },
        SlopeCurve {
            scheme: "sdma",
            esr: sd_esr,
            stderr: points.iter().map(|x| x.4).collect(),
            tau: vec![1.0; p.snrs_db.len()],
            slope: sd_fit.slope,
            residual: sd_fit.residual,
            expected: expected(DofScheme::Sdma)?,
        },
    ])
}

pub fn dof_slope(p: &DofSlopeParams) -> Result<Vec<Artifact>> {
    let curves = dof_slope_curves(p)?;
    let mut rates = String::from("snr_db,scheme,esr,stderr,tau\n");
    let mut fit = String::from("scheme,slope,residual,expected\n");
    for c in &curves {
        for (i, snr) in p.snrs_db.iter().enumerate() {
            rates.push_str(&format!("{snr},{},{},{},{}\n", c.scheme, c.esr[i], c.stderr[i], c.tau[i]));
        }
        fit.push_str(&format!("{},{},{},{}\n", c.scheme, c.slope, c.residual, c.expected));
    }
    Ok(vec![Artifact::new("dof-slope.csv", rates), Artifact::new("dof-slope-fit.csv", fit)])
}

// ------------------------------------------------------------- overloaded QoS

#[derive(Debug, Clone)]
pub struct OverloadedQosParams {
    pub m: usize,
    pub variances: Vec<f64>,
    pub snrs_db: Vec<f64>,
    /// Rate threshold applied to every user at the matching SNR.
    pub qos_ladder: Vec<f64>,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    /// Highest SNR points used in the slope fit.
    pub top: usize,
    pub seed: u64,
    pub solver: OptimizeSpec,
}

impl Default for OverloadedQosParams {
    fn default() -> Self {
        OverloadedQosParams {
            m: 2,
            variances: vec![1.0, 0.9, 0.8, 0.7],
            snrs_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            qos_ladder: vec![0.0, 0.001, 0.004, 0.01, 0.03, 0.06, 0.1],
            trials: 10,
            schemes: vec![Scheme::OneLayerRs, Scheme::Sdma],
            top: 3,
            seed: 1,
            solver: OptimizeSpec::wsr(),
        }
    }
}

/// Mean WSR of one scheme at one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct QosPoint {
    pub snr_db: f64,
    pub qos: f64,
    pub scheme: Scheme,
    /// Mean over the feasible trials.
    pub wsr: f64,
    pub stderr: f64,
    pub infeasible: usize,
}

pub fn overloaded_points(p: &OverloadedQosParams) -> Result<Vec<QosPoint>> {
    check_positive("trials", p.trials)?;
    if p.snrs_db.len() != p.qos_ladder.len() {
        return Err(Error::InvalidConfig("one QoS threshold per SNR point required".into()));
    }
    let k = p.variances.len();
    let ens = ChannelEnsembleSpec { variances: p.variances.clone(), trials: p.trials, seed: p.seed };
    ens.validate()?;
    let mut jobs = Vec::new();
    for (i, &snr) in p.snrs_db.iter().enumerate() {
        for &s in &p.schemes {
            jobs.push((snr, p.qos_ladder[i], s));
        }
    }
    jobs.par_iter()
        .map(|&(snr_db, qos, scheme)| {
            let cfg = SystemConfig::from_snr_db(p.m, k, snr_db).with_qos(vec![qos; k]);
            let mut vals = Vec::new();
            let mut infeasible = 0;
            for t in 0..p.trials as u64 {
                let h = sample_rayleigh(&ens, p.m, t);
                let spec = p.solver.clone().with_seed(p.seed.wrapping_add(t));
                let (_, r) = solve_scheme(scheme, &cfg, &h, &spec)?;
                if r.status == SolveStatus::Infeasible {
                    infeasible += 1;
                } else {
                    vals.push(r.objective);
                }
            }
            let (wsr, stderr) = mean_stderr(&vals);
            Ok(QosPoint { snr_db, qos, scheme, wsr, stderr, infeasible })
        })
        .collect()
}

pub fn overloaded_qos(p: &OverloadedQosParams) -> Result<Vec<Artifact>> {
    let points = overloaded_points(p)?;
    let mut rows = String::from("snr_db,qos,scheme,wsr,stderr,infeasible\n");
    for q in &points {
        rows.push_str(&format!("{},{},{},{},{},{}\n", q.snr_db, q.qos, q.scheme, q.wsr, q.stderr, q.infeasible));
    }
    let mut fit = String::from("scheme,slope,residual\n");
    for &s in &p.schemes {
        let mine: Vec<&QosPoint> = points.iter().filter(|q| q.scheme == s).collect();
        let snr: Vec<f64> = mine.iter().map(|q| q.snr_db).collect();
        let wsr: Vec<f64> = mine.iter().map(|q| q.wsr).collect();
        let f = empirical_dof(&snr, &wsr, p.top)?;
        fit.push_str(&format!("{s},{},{}\n", f.slope, f.residual));
    }
    Ok(vec![Artifact::new("overloaded-qos.csv", rows), Artifact::new("overloaded-qos-fit.csv", fit)])
}

// -------------------------------------------------------------- uplink region

#[derive(Debug, Clone)]
pub struct UplinkRegionParams {
    pub p1: f64,
    pub p2: f64,
    /// Channel power gains `|h_k|²`.
    pub g1: f64,
    pub g2: f64,
    pub noise: f64,
    /// Evenly spaced points on the dominant face, both corners included.
    pub points: usize,
}

impl Default for UplinkRegionParams {
    fn default() -> Self {
        UplinkRegionParams { p1: 1.0, p2: 1.0, g1: 1.0, g2: 1.0, noise: 1.0, points: 20 }
    }
}

/// A dominant-face target and what one power split achieves for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacePoint {
    pub target: (f64, f64),
    pub achieved: (f64, f64),
    pub split: (f64, f64),
}

/// Splits user 1 for each target on the dominant face and evaluates the
/// resulting SIC chain `s11 → s2 → s12` with the rate engine.
pub fn uplink_face_points(p: &UplinkRegionParams) -> Result<Vec<FacePoint>> {
    if p.points < 2 {
        return Err(Error::InvalidConfig("points≥2 required".into()));
    }
    if !(p.p1 >= 0.0 && p.p2 >= 0.0 && p.g1 > 0.0 && p.g2 > 0.0 && p.noise > 0.0) {
        return Err(Error::InvalidConfig("powers ≥0, gains >0 and noise >0 required".into()));
    }
    let [(a1, a2), (b1, b2)] = mac_pentagon(p.p1, p.p2, p.g1, p.g2, p.noise);
    let h = CMatrix::from_row_slice(
        1,
        2,
        &[crate::linalg::c64(p.g1.sqrt(), 0.0), crate::linalg::c64(p.g2.sqrt(), 0.0)],
    );
    (0..p.points)
        .map(|i| {
            let f = i as f64 / (p.points - 1) as f64;
            let target = (a1 + (b1 - a1) * f, a2 + (b2 - a2) * f);
            let (p11, p12) = dominant_face_split(p.p1, p.p2, p.g1, p.g2, p.noise, target.1)?;
            let users = [UplinkUser::split(p11, p12), UplinkUser::single(p.p2)];
            let r = rate_uplink(&users, &DOMINANT_FACE_ORDER, &h, p.noise)?;
            Ok(FacePoint { target, achieved: (r.totals[0], r.totals[1]), split: (p11, p12) })
        })
        .collect()
}

pub const UPLINK_REGION_HEADER: &str = "kind,R1,R2,P11,P12";

pub fn uplink_region(p: &UplinkRegionParams) -> Result<Vec<Artifact>> {
    let face = uplink_face_points(p)?;
    let [(a1, a2), (b1, b2)] = mac_pentagon(p.p1, p.p2, p.g1, p.g2, p.noise);
    let c1 = (1.0 + p.p1 * p.g1 / p.noise).log2();
    let c2 = (1.0 + p.p2 * p.g2 / p.noise).log2();
    let mut out = format!("{UPLINK_REGION_HEADER}\n");
    for (r1, r2) in [(0.0, 0.0), (c1, 0.0), (a1, a2), (b1, b2), (0.0, c2)] {
        out.push_str(&format!("vertex,{r1},{r2},,\n"));
    }
    for fp in &face {
        out.push_str(&format!("face,{},{},{},{}\n", fp.achieved.0, fp.achieved.1, fp.split.0, fp.split.1));
    }
    Ok(vec![Artifact::new("uplink-region.csv", out)])
}

// ----------------------------------------------------------- operational region

#[derive(Debug, Clone)]
pub struct OperRegionParams {
    pub grid: usize,
    pub weights: [f64; 2],
    pub epsilon: f64,
    pub snr_db: f64,
    pub solver: OptimizeSpec,
}

impl Default for OperRegionParams {
    fn default() -> Self {
        OperRegionParams {
            grid: 10,
            weights: [1.0, 1.0],
            epsilon: crate::analysis::region::DEFAULT_EPSILON,
            snr_db: 20.0,
            solver: OptimizeSpec::wsr(),
        }
    }
}

impl OperRegionParams {
    pub fn region_spec(&self) -> RegionSpec {
        let mut spec = RegionSpec::grid(self.grid, self.weights);
        spec.epsilon = self.epsilon;
        spec.snr_db = self.snr_db;
        spec.solver = self.solver.clone();
        spec
    }
}

pub fn oper_region(p: &OperRegionParams) -> Result<Vec<Artifact>> {
    check_positive("grid", p.grid)?;
    let cells = classify_operational_region(&p.region_spec())?;
    Ok(vec![Artifact::new("oper-region.csv", region_csv(&cells))])
}
