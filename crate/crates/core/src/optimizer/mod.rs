//! Precoder and common-rate optimization for one-layer rate splitting and
//! its specializations (SDMA, two-user NOMA, OMA, multicast).
//!
//! Each outer iteration replaces every decoding rate by its rate–MSE lower
//! bound, which is tight at the current precoders and convex in them, and
//! solves the resulting convex problem over precoders and rate shares with
//! an interior-point method. The true objective is re-evaluated after every
//! step and only improving steps are kept, so the trace is monotone.

mod qcqp;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::channels::{apply_scaled_error, random_unit, trial_rng};
use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, CVector};
use crate::model::{build_stream_layout, validate_config, PrecoderSolution, Scheme, StreamLayout, SystemConfig};
use crate::precoders::{assemble_solution, closed_form_directions, CommonRule, PowerSplit, PrivateRule};

pub use qcqp::{BarrierOptions, BarrierOutcome, Constraint, Problem, Quad};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Weighted sum of per-user rates.
    Wsr,
    /// Minimum per-user rate.
    Mmf,
}

/// How channel uncertainty enters the objective.
#[derive(Debug, Clone, PartialEq)]
pub enum CsitMode {
    /// The given channel is exact.
    Perfect,
    /// Pessimistic surrogate: every decoding rate is the minimum over the
    /// estimate and `samples` points on the sphere of radius `delta[k]`.
    SampledWorstCase { delta: Vec<f64>, samples: usize },
    /// Sample-average approximation of the average rates over `samples`
    /// conditional draws `h = ĥ + h̃` of the scaled-error model.
    ErgodicSaa { alpha: f64, samples: usize, variances: Option<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitRule {
    /// RZF private and SVD common directions with an even power split.
    RzfSvd,
    Given(PrecoderSolution),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSpec {
    pub objective: Objective,
    pub csit: CsitMode,
    /// Stop when one outer iteration improves the objective by less than this (bit/s/Hz).
    pub tolerance: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub init: InitRule,
    /// Streams held at zero power.
    pub zero_streams: Vec<String>,
    pub seed: u64,
}

impl Default for OptimizeSpec {
    fn default() -> Self {
        OptimizeSpec {
            objective: Objective::Wsr,
            csit: CsitMode::Perfect,
            tolerance: 1e-4,
            max_iter: 200,
            restarts: 3,
            init: InitRule::RzfSvd,
            zero_streams: Vec::new(),
            seed: 0,
        }
    }
}

impl OptimizeSpec {
    pub fn wsr() -> Self {
        Self::default()
    }

    pub fn mmf() -> Self {
        OptimizeSpec { objective: Objective::Mmf, ..Self::default() }
    }

    pub fn with_csit(mut self, csit: CsitMode) -> Self {
        self.csit = csit;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("solver tolerance >0 required".into()));
        }
        match &self.csit {
            CsitMode::ErgodicSaa { samples, .. } if *samples < 1 => {
                Err(Error::InvalidConfig("SAA sample count ≥1 required".into()))
            }
            CsitMode::SampledWorstCase { delta, .. } if delta.iter().any(|&d| !(d >= 0.0)) => {
                Err(Error::InvalidConfig("uncertainty radii ≥0 required".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Infeasible,
}

/// Post-hoc check of the returned point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub power_used: f64,
    pub power_budget: f64,
    /// `R_tot[k] − R_th[k]` per user.
    pub qos_slack: Vec<f64>,
    /// Rate of each shared stream minus the sum of its shares.
    pub common_slack: Vec<f64>,
    pub min_share: f64,
}

impl ConstraintReport {
    /// Power within `1e-9·P`, QoS within `tol`, shares decodable and nonnegative.
    pub fn feasible(&self, tol: f64) -> bool {
        self.power_used <= self.power_budget * (1.0 + 1e-9)
            && self.qos_slack.iter().all(|&s| s >= -tol)
            && self.common_slack.iter().all(|&s| s >= -tol)
            && self.min_share >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Precoders and the rate shares (bit/s/Hz) of every shared stream.
    pub solution: PrecoderSolution,
    pub objective: f64,
    pub trace: Vec<f64>,
    pub status: SolveStatus,
    pub constraints: ConstraintReport,
    /// Per-user rates under the solver's channel view.
    pub totals: Vec<f64>,
    pub stream_rates: Vec<f64>,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Fraction of the budget on streams decoded by several users.
    pub fn common_power_fraction(&self, layout: &StreamLayout, cfg: &SystemConfig) -> f64 {
        layout
            .streams
            .iter()
            .filter(|s| s.decoders.len() > 1)
            .map(|s| self.solution.precoders.get(&s.label).map_or(0.0, crate::linalg::norm_sqr))
            .fold(0.0, |a, b| a + b)
            / cfg.power
    }

    /// Rows `kind,index,value` with the trace, rates, powers, shares and slacks.
    pub fn to_csv(&self, layout: &StreamLayout) -> String {
        let mut out = String::from("kind,key,value\n");
        for (i, v) in self.trace.iter().enumerate() {
            out.push_str(&format!("trace,{i},{v}\n"));
        }
        for (k, r) in self.totals.iter().enumerate() {
            out.push_str(&format!("rate,{},{r}\n", k + 1));
        }
        for s in &layout.streams {
            let p = self.solution.precoders.get(&s.label).map_or(0.0, crate::linalg::norm_sqr);
            out.push_str(&format!("power,{},{p}\n", s.label));
        }
        for ((label, u), c) in &self.solution.common_alloc {
            out.push_str(&format!("share,{label}:{},{c}\n", u + 1));
        }
        for (k, s) in self.constraints.qos_slack.iter().enumerate() {
            out.push_str(&format!("qos_slack,{},{s}\n", k + 1));
        }
        for (i, s) in self.constraints.common_slack.iter().enumerate() {
            out.push_str(&format!("common_slack,{i},{s}\n"));
        }
        out.push_str(&format!("objective,,{}\n", self.objective));
        out.push_str(&format!("status,,{:?}\n", self.status));
        out
    }
}

/// How per-sample decoding rates combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Mean,
    Min,
}

/// Channel realizations the objective is evaluated on.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub samples: Vec<CMatrix>,
    pub aggregate: Aggregate,
}

impl SampleSet {
    /// Samples for `mode` around `h_hat`, drawn deterministically from `seed`.
    pub fn for_mode(mode: &CsitMode, h_hat: &CMatrix, cfg: &SystemConfig, seed: u64) -> SampleSet {
        match mode {
            CsitMode::Perfect => SampleSet { samples: vec![h_hat.clone()], aggregate: Aggregate::Mean },
            CsitMode::SampledWorstCase { delta, samples } => {
                let mut rng = trial_rng(seed, u64::MAX);
                let mut out = vec![h_hat.clone()];
                for _ in 0..*samples {
                    let mut h = h_hat.clone();
                    for k in 0..h.ncols() {
                        let d = random_unit(&mut rng, h.nrows());
                        for i in 0..h.nrows() {
                            h[(i, k)] += d[i] * delta[k];
                        }
                    }
                    out.push(h);
                }
                SampleSet { samples: out, aggregate: Aggregate::Min }
            }
            CsitMode::ErgodicSaa { alpha, samples, variances } => {
                let mut rng = trial_rng(seed, u64::MAX - 1);
                let unit = vec![1.0; h_hat.ncols()];
                let var = variances.as_deref().unwrap_or(&unit);
                let out = (0..*samples)
                    .map(|_| apply_scaled_error(&mut rng, h_hat, var, *alpha, cfg.power).h)
                    .collect();
                SampleSet { samples: out, aggregate: Aggregate::Mean }
            }
        }
    }
}

/// One decoding event: `decoder` decodes `stream` with `interferers`
/// (including the stream itself) still present.
#[derive(Debug, Clone)]
struct Term {
    stream: usize,
    decoder: usize,
    present: Vec<usize>,
}

fn terms(layout: &StreamLayout) -> Vec<Term> {
    let mut out = Vec::new();
    for (d, order) in layout.decode_order.iter().enumerate() {
        for (i, &s) in order.iter().enumerate() {
            let present = (0..layout.streams.len()).filter(|t| !order[..i].contains(t)).collect();
            out.push(Term { stream: s, decoder: d, present });
        }
    }
    out
}

/// Rates, shares and objective of a precoder set under a sample set.
#[derive(Debug, Clone)]
struct Evaluation {
    stream_rates: Vec<f64>,
    /// `(stream, user) → share` in bits for shared streams.
    shares: BTreeMap<(usize, usize), f64>,
    totals: Vec<f64>,
    objective: f64,
    feasible: bool,
}

struct Context<'a> {
    layout: &'a StreamLayout,
    cfg: &'a SystemConfig,
    samples: &'a SampleSet,
    terms: Vec<Term>,
    active: Vec<bool>,
}

impl Context<'_> {
    /// Aggregated decoding rate (bits) of every term.
    fn term_rates(&self, p: &[CVector]) -> Vec<f64> {
        self.terms
            .iter()
            .map(|t| {
                let noise = self.cfg.noise_var[t.decoder];
                let rates = self.samples.samples.iter().map(|h| {
                    let hk = h.column(t.decoder);
                    let mut signal = 0.0;
                    let mut interference = 0.0;
                    for &j in &t.present {
                        let g = hk.dotc(&p[j]).norm_sqr();
                        if j == t.stream {
                            signal = g;
                        } else {
                            interference += g;
                        }
                    }
                    (1.0 + signal / (interference + noise)).log2()
                });
                match self.samples.aggregate {
                    Aggregate::Mean => rates.sum::<f64>() / self.samples.samples.len() as f64,
                    Aggregate::Min => rates.fold(f64::INFINITY, f64::min),
                }
            })
            .collect()
    }

    /// Exact optimal division of shared-stream rates for `objective`. With
    /// `offsets` the max-min objective is taken over `tot_k − offsets[k]` for
    /// the users in `users` only.
    fn evaluate(&self, p: &[CVector], objective: Objective, focus: Option<(&[usize], &[f64])>) -> Evaluation {
        let layout = self.layout;
        let k = layout.users;
        let rates = self.term_rates(p);
        let mut stream_rates = vec![f64::INFINITY; layout.streams.len()];
        for (t, r) in self.terms.iter().zip(&rates) {
            stream_rates[t.stream] = stream_rates[t.stream].min(*r);
        }
        for r in stream_rates.iter_mut() {
            if !r.is_finite() {
                *r = 0.0;
            }
        }
        let mut totals = vec![0.0; k];
        for (i, s) in layout.streams.iter().enumerate() {
            if s.owners.len() == 1 {
                totals[s.owners[0]] += stream_rates[i];
            }
        }
        let qos = &self.cfg.qos;
        let w = &self.cfg.weights;
        let mut shares = BTreeMap::new();
        let mut feasible = true;
        for (i, s) in layout.streams.iter().enumerate() {
            if s.owners.len() == 1 {
                continue;
            }
            let rate = stream_rates[i];
            let add: Vec<f64> = match (objective, focus) {
                (_, Some((users, offsets))) => {
                    let owners: Vec<usize> = s.owners.iter().copied().filter(|u| users.contains(u)).collect();
                    let base: Vec<f64> = owners.iter().map(|&u| totals[u] - offsets[u]).collect();
                    let fill = crate::rates::water_fill_min(&base, rate);
                    let mut add = vec![0.0; s.owners.len()];
                    for (j, &u) in owners.iter().enumerate() {
                        add[s.owners.iter().position(|&o| o == u).unwrap()] = fill[j];
                    }
                    if owners.is_empty() {
                        add[0] = rate;
                    }
                    add
                }
                (Objective::Mmf, None) => {
                    let base: Vec<f64> = s.owners.iter().map(|&u| totals[u]).collect();
                    crate::rates::water_fill_min(&base, rate)
                }
                (Objective::Wsr, None) => {
                    let deficits: Vec<f64> = s.owners.iter().map(|&u| (qos[u] - totals[u]).max(0.0)).collect();
                    let need: f64 = deficits.iter().sum();
                    let mut add = deficits.clone();
                    if need > rate {
                        let scale = if need > 0.0 { rate / need } else { 0.0 };
                        add.iter_mut().for_each(|a| *a *= scale);
                    } else {
                        let best = (0..s.owners.len())
                            .max_by(|&a, &b| w[s.owners[a]].total_cmp(&w[s.owners[b]]).then(b.cmp(&a)))
                            .unwrap();
                        add[best] += rate - need;
                    }
                    add
                }
            };
            for (j, &u) in s.owners.iter().enumerate() {
                totals[u] += add[j];
                shares.insert((i, u), add[j]);
            }
        }
        if focus.is_none() {
            feasible = totals.iter().zip(qos).all(|(t, q)| *t >= q - 1e-9);
        }
        let objective_value = match focus {
            Some((users, offsets)) => users.iter().map(|&u| totals[u] - offsets[u]).fold(f64::INFINITY, f64::min),
            None => match objective {
                Objective::Wsr => totals.iter().zip(w).map(|(r, w)| r * w).sum(),
                Objective::Mmf => totals.iter().copied().fold(f64::INFINITY, f64::min),
            },
        };
        Evaluation { stream_rates, shares, totals, objective: objective_value, feasible }
    }

    /// Builds the convex surrogate problem at precoders `p`.
    fn surrogate(&self, p: &[CVector], objective: Objective, focus: Option<(&[usize], &[f64])>, eval: &Evaluation) -> (Problem, DVector<f64>) {
        let layout = self.layout;
        let cfg = self.cfg;
        let m = cfg.m;
        let d = 2 * m;
        let sqrt_p = cfg.power.sqrt();
        let active: Vec<usize> = (0..layout.streams.len()).filter(|&i| self.active[i]).collect();
        let mut block = vec![usize::MAX; layout.streams.len()];
        for (j, &i) in active.iter().enumerate() {
            block[i] = j * d;
        }
        let mut n = active.len() * d;
        let mut yidx = BTreeMap::new();
        for &i in &active {
            for &u in &layout.streams[i].owners {
                yidx.insert((i, u), n);
                n += 1;
            }
        }
        let z = n;
        let use_z = objective == Objective::Mmf || focus.is_some();
        if use_z {
            n += 1;
        }

        let mut constraints = Vec::new();
        let ln2 = std::f64::consts::LN_2;
        for t in &self.terms {
            if !self.active[t.stream] {
                continue;
            }
            let owners_y: Vec<(usize, f64)> =
                layout.streams[t.stream].owners.iter().map(|&u| (yidx[&(t.stream, u)], 1.0)).collect();
            let present: Vec<usize> = t.present.iter().copied().filter(|&j| self.active[j]).collect();
            let blocks: Vec<usize> = present.iter().map(|&j| block[j]).collect();
            let noise = cfg.noise_var[t.decoder];
            let mut per_sample = Vec::new();
            for h in &self.samples.samples {
                let hk: CVector = h.column(t.decoder).map(|z| z * sqrt_p);
                let total: f64 = present.iter().map(|&j| hk.dotc(&p[j]).norm_sqr() / cfg.power).sum::<f64>() + noise;
                let hs = hk.dotc(&p[t.stream]) / sqrt_p;
                let g = hs.conj() / total;
                let e = (1.0 - hs.norm_sqr() / total).max(1e-15);
                let u = 1.0 / e;
                let a = &hk * hk.adjoint() * c64(u * g.norm_sqr(), 0.0);
                let beta = hk.map(|x| x * (hs / total) * u);
                let constant = u * (g.norm_sqr() * noise + 1.0) - u.ln();
                per_sample.push((a, beta, constant));
            }
            let mut emit = |a: CMatrix, beta: CVector, constant: f64| {
                let mut lin = owners_y.clone();
                let b = block[t.stream];
                for r in 0..m {
                    lin.push((b + r, -2.0 * beta[r].re));
                    lin.push((b + m + r, -2.0 * beta[r].im));
                }
                constraints.push(Constraint {
                    lin,
                    constant: constant - 1.0,
                    quad: Some(Quad { mat: Arc::new(embed(&a)), blocks: blocks.clone() }),
                });
            };
            match self.samples.aggregate {
                Aggregate::Mean => {
                    let count = per_sample.len() as f64;
                    let mut a = CMatrix::zeros(m, m);
                    let mut beta = CVector::zeros(m);
                    let mut c = 0.0;
                    for (ai, bi, ci) in &per_sample {
                        a += ai;
                        beta += bi;
                        c += ci;
                    }
                    emit(a / c64(count, 0.0), beta / c64(count, 0.0), c / count);
                }
                Aggregate::Min => {
                    for (a, beta, c) in per_sample {
                        emit(a, beta, c);
                    }
                }
            }
        }
        let all_blocks: Vec<usize> = active.iter().map(|&i| block[i]).collect();
        if !all_blocks.is_empty() {
            constraints.push(Constraint {
                lin: vec![],
                constant: -1.0,
                quad: Some(Quad { mat: Arc::new(DMatrix::identity(d, d)), blocks: all_blocks }),
            });
        }
        for (&(i, _), &idx) in &yidx {
            let bound = if layout.streams[i].owners.len() == 1 { 100.0 } else { 1e-8 };
            constraints.push(Constraint::linear(vec![(idx, -1.0)], -bound));
        }
        let user_y = |u: usize| -> Vec<(usize, f64)> {
            yidx.iter().filter(|(&(_, v), _)| v == u).map(|(_, &idx)| (idx, -1.0)).collect()
        };
        match focus {
            Some((users, offsets)) => {
                for &u in users {
                    let mut lin = user_y(u);
                    lin.push((z, 1.0));
                    constraints.push(Constraint::linear(lin, offsets[u] * ln2));
                }
            }
            None => {
                for u in 0..layout.users {
                    if cfg.qos[u] > 0.0 {
                        constraints.push(Constraint::linear(user_y(u), cfg.qos[u] * ln2));
                    }
                }
                if objective == Objective::Mmf {
                    for u in 0..layout.users {
                        let mut lin = user_y(u);
                        lin.push((z, 1.0));
                        constraints.push(Constraint::linear(lin, 0.0));
                    }
                }
            }
        }
        let objective_vec: Vec<(usize, f64)> = if use_z {
            vec![(z, -1.0)]
        } else {
            yidx.iter()
                .map(|(&(_, u), &idx)| (idx, -cfg.weights[u]))
                .filter(|&(_, c)| c != 0.0)
                .collect()
        };

        // start slightly inside the current point
        let mut x0 = DVector::zeros(n);
        let shrink = (1.0 - 1e-7f64).sqrt();
        for &i in &active {
            let b = block[i];
            for r in 0..m {
                x0[b + r] = p[i][r].re / sqrt_p * shrink;
                x0[b + m + r] = p[i][r].im / sqrt_p * shrink;
            }
        }
        let mut tot = vec![0.0; layout.users];
        for (&(i, u), &idx) in &yidx {
            let bits = if layout.streams[i].owners.len() == 1 {
                eval.stream_rates[i]
            } else {
                eval.shares.get(&(i, u)).copied().unwrap_or(0.0)
            };
            let owners = layout.streams[i].owners.len() as f64;
            let v = bits * ln2 * (1.0 - 1e-5) - 1e-9 / owners;
            x0[idx] = if owners > 1.0 { v.max(-0.5e-8) } else { v };
            tot[u] += x0[idx];
        }
        if use_z {
            let slack = match focus {
                Some((users, offsets)) => users.iter().map(|&u| tot[u] - offsets[u] * ln2).fold(f64::INFINITY, f64::min),
                None => tot.iter().copied().fold(f64::INFINITY, f64::min),
            };
            x0[z] = slack - 1e-6;
        }
        (Problem { n, objective: objective_vec, constraints }, x0)
    }

    fn precoders_from(&self, x: &DVector<f64>) -> Vec<CVector> {
        let m = self.cfg.m;
        let d = 2 * m;
        let sqrt_p = self.cfg.power.sqrt();
        let mut out = vec![CVector::zeros(m); self.layout.streams.len()];
        let mut j = 0;
        for (i, p) in out.iter_mut().enumerate() {
            if self.active[i] {
                let b = j * d;
                *p = CVector::from_fn(m, |r, _| c64(x[b + r], x[b + m + r]) * sqrt_p);
                j += 1;
            }
        }
        self.clip_power(out)
    }

    /// Rescales onto the budget when over it.
    fn clip_power(&self, mut p: Vec<CVector>) -> Vec<CVector> {
        let used: f64 = p.iter().map(crate::linalg::norm_sqr).sum();
        if used > self.cfg.power {
            let s = (self.cfg.power / used).sqrt();
            p.iter_mut().for_each(|v| *v *= c64(s, 0.0));
        }
        p
    }
}

/// Complex Hermitian `A` to the real matrix acting on `[Re p; Im p]`.
fn embed(a: &CMatrix) -> DMatrix<f64> {
    let m = a.nrows();
    let mut out = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + m)] = -z.im;
            out[(i + m, j)] = z.im;
            out[(i + m, j + m)] = z.re;
        }
    }
    // symmetrize against rounding
    (&out + out.transpose()) * 0.5
}

struct RunOutcome {
    p: Vec<CVector>,
    eval: Evaluation,
    trace: Vec<f64>,
    status: SolveStatus,
}

/// Feasible points beat infeasible ones, then the objective decides.
fn rank(e: &Evaluation) -> (bool, f64) {
    (e.feasible, e.objective)
}

fn iterate(
    ctx: &Context,
    mut p: Vec<CVector>,
    objective: Objective,
    focus: Option<(&[usize], &[f64])>,
    spec: &OptimizeSpec,
    stop_above: Option<f64>,
) -> RunOutcome {
    let mut eval = ctx.evaluate(&p, objective, focus);
    let mut trace = vec![eval.objective];
    let opts = BarrierOptions::default();
    let mut status = SolveStatus::MaxIterations;
    for _ in 0..spec.max_iter {
        if let Some(limit) = stop_above {
            if eval.objective > limit {
                status = SolveStatus::Converged;
                break;
            }
        }
        let (problem, x0) = ctx.surrogate(&p, objective, focus, &eval);
        let x = match problem.solve(&x0, &opts) {
            BarrierOutcome::Solved(x) => x,
            other => {
                log::debug!("surrogate step failed: {other:?}");
                status = SolveStatus::Converged;
                break;
            }
        };
        let mut candidate = ctx.precoders_from(&x);
        let mut next = ctx.evaluate(&candidate, objective, focus);
        // over-relaxed steps along the same direction, kept only if better
        for factor in [2.0, 4.0, 8.0, 16.0, 32.0] {
            let stretched: Vec<CVector> = p
                .iter()
                .zip(&ctx.precoders_from(&x))
                .map(|(old, new)| old + (new - old) * c64(factor, 0.0))
                .collect();
            let stretched = ctx.clip_power(stretched);
            let e = ctx.evaluate(&stretched, objective, focus);
            if rank(&e) > rank(&next) {
                candidate = stretched;
                next = e;
            } else {
                break;
            }
        }
        if !(rank(&next) >= rank(&eval)) {
            status = SolveStatus::Converged;
            break;
        }
        let gain = next.objective - eval.objective;
        p = candidate;
        eval = next;
        trace.push(eval.objective);
        if gain < spec.tolerance {
            status = SolveStatus::Converged;
            break;
        }
    }
    RunOutcome { p, eval, trace, status }
}

fn initial_precoders(
    layout: &StreamLayout,
    h: &CMatrix,
    cfg: &SystemConfig,
    spec: &OptimizeSpec,
    restart: usize,
    active: &[bool],
) -> Result<Vec<CVector>> {
    let sol = match &spec.init {
        InitRule::Given(sol) if restart == 0 => sol.clone(),
        _ if restart >= spec.restarts.max(1) => single_user_start(layout, h, cfg, restart - spec.restarts.max(1))?,
        _ => {
            let mut dirs = closed_form_directions(layout, h, cfg, PrivateRule::Rzf(None), CommonRule::Svd)?;
            if restart > 0 {
                let mut rng = trial_rng(spec.seed, restart as u64);
                let normal = Normal::new(0.0, 0.3 / std::f64::consts::SQRT_2).expect("valid std");
                for d in dirs.values_mut() {
                    let noise = CVector::from_fn(cfg.m, |_, _| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)));
                    *d = crate::linalg::normalized(&(&*d + noise)).unwrap_or_else(|| d.clone());
                }
            }
            let tau = [0.5, 0.8, 0.2][restart % 3];
            assemble_solution(layout, &dirs, PowerSplit::equal(tau), h, cfg)?
        }
    };
    let mut p: Vec<CVector> = layout
        .streams
        .iter()
        .map(|s| sol.precoders.get(&s.label).cloned().unwrap_or_else(|| CVector::zeros(cfg.m)))
        .collect();
    let mut used = 0.0;
    for (i, v) in p.iter_mut().enumerate() {
        if !active[i] {
            *v = CVector::zeros(cfg.m);
        }
        used += crate::linalg::norm_sqr(v);
    }
    // a pinned stream's power goes to the others
    if used > 0.0 && (used - cfg.power).abs() > 1e-12 * cfg.power {
        let s = (cfg.power / used).sqrt();
        p.iter_mut().for_each(|v| *v *= c64(s, 0.0));
    }
    Ok(p)
}

/// Share of the power left on the other streams by a single-user start.
const SINGLE_USER_LEAK: f64 = 1e-3;

/// Nearly all power on MRT towards `user`'s own stream, a trace on the rest
/// so they can grow back. Catches WSR optima that switch users off, which
/// the surrogate rarely reaches from a start that serves everyone.
fn single_user_start(layout: &StreamLayout, h: &CMatrix, cfg: &SystemConfig, user: usize) -> Result<PrecoderSolution> {
    let dirs = closed_form_directions(layout, h, cfg, PrivateRule::Rzf(None), CommonRule::Svd)?;
    let own = layout.streams.iter().position(|s| s.owners == [user]);
    let others = layout.streams.len() - usize::from(own.is_some());
    let mut sol = PrecoderSolution::new();
    for (i, s) in layout.streams.iter().enumerate() {
        let (dir, share) = if Some(i) == own {
            let mrt = crate::linalg::normalized(&h.column(user).into_owned()).unwrap_or_else(|| crate::linalg::e1(cfg.m));
            (mrt, if others == 0 { 1.0 } else { 1.0 - SINGLE_USER_LEAK })
        } else {
            (dirs[&s.label].clone(), SINGLE_USER_LEAK / others.max(1) as f64)
        };
        sol.precoders.insert(s.label.clone(), dir * c64((share * cfg.power).sqrt(), 0.0));
    }
    Ok(sol)
}

/// Extra restarts from single-user points, used for unconstrained WSR.
fn single_user_restarts(layout: &StreamLayout, cfg: &SystemConfig, spec: &OptimizeSpec) -> usize {
    let applies = spec.objective == Objective::Wsr
        && !matches!(spec.init, InitRule::Given(_))
        && cfg.qos.iter().all(|&q| q == 0.0)
        && layout.streams.len() > 1;
    if applies {
        layout.users
    } else {
        0
    }
}

fn check_layout(layout: &StreamLayout) -> Result<()> {
    match layout.scheme {
        Scheme::OneLayerRs | Scheme::Sdma | Scheme::Oma | Scheme::Multicast => Ok(()),
        Scheme::Noma if layout.users == 2 => Ok(()),
        Scheme::Noma => Err(Error::Layout("NOMA optimization supports two users; use closed-form precoders".into())),
        other => Err(Error::Layout(format!("optimization does not support the {other} layout"))),
    }
}

fn one_restart(
    layout: &StreamLayout,
    cfg: &SystemConfig,
    h: &CMatrix,
    spec: &OptimizeSpec,
    samples: &SampleSet,
    restart: usize,
) -> Result<RunOutcome> {
    let active: Vec<bool> = layout.streams.iter().map(|s| !spec.zero_streams.contains(&s.label)).collect();
    let ctx = Context { layout, cfg, samples, terms: terms(layout), active: active.clone() };
    let mut p = initial_precoders(layout, h, cfg, spec, restart, &active)?;
    let qos_users: Vec<usize> = (0..layout.users).filter(|&u| cfg.qos[u] > 0.0).collect();
    let mut pre_trace = Vec::new();
    if !qos_users.is_empty() {
        let start = ctx.evaluate(&p, spec.objective, Some((&qos_users, &cfg.qos)));
        if start.objective <= 1e-6 {
            let pre = iterate(&ctx, p, spec.objective, Some((&qos_users, &cfg.qos)), spec, Some(1e-6));
            if pre.eval.objective <= 1e-6 {
                let eval = ctx.evaluate(&pre.p, spec.objective, None);
                return Ok(RunOutcome { p: pre.p, eval, trace: pre.trace, status: SolveStatus::Infeasible });
            }
            p = pre.p;
            pre_trace = pre.trace;
        }
    }
    let mut run = iterate(&ctx, p, spec.objective, None, spec, None);
    if !pre_trace.is_empty() {
        pre_trace.append(&mut run.trace);
        run.trace = pre_trace;
    }
    Ok(run)
}

fn finish(layout: &StreamLayout, cfg: &SystemConfig, run: RunOutcome) -> SolveResult {
    let mut solution = PrecoderSolution::new();
    for (s, p) in layout.streams.iter().zip(&run.p) {
        solution.precoders.insert(s.label.clone(), p.clone());
    }
    let mut common_slack = Vec::new();
    let mut min_share = f64::INFINITY;
    for (i, s) in layout.streams.iter().enumerate() {
        if s.owners.len() > 1 {
            let mut used = 0.0;
            for &u in &s.owners {
                let c = run.eval.shares.get(&(i, u)).copied().unwrap_or(0.0);
                solution.common_alloc.insert((s.label.clone(), u), c);
                used += c;
                min_share = min_share.min(c);
            }
            common_slack.push(run.eval.stream_rates[i] - used);
        }
    }
    let constraints = ConstraintReport {
        power_used: solution.total_power(),
        power_budget: cfg.power,
        qos_slack: run.eval.totals.iter().zip(&cfg.qos).map(|(t, q)| t - q).collect(),
        common_slack,
        min_share: if min_share.is_finite() { min_share } else { 0.0 },
    };
    let status = if run.status != SolveStatus::Infeasible && !run.eval.feasible {
        SolveStatus::Infeasible
    } else {
        run.status
    };
    SolveResult {
        solution,
        objective: run.eval.objective,
        trace: run.trace,
        status,
        constraints,
        totals: run.eval.totals,
        stream_rates: run.eval.stream_rates,
    }
}

/// Optimizes precoders and rate shares of `layout` on channel `h` (the true
/// channel in perfect mode, the estimate otherwise). Returns the best of
/// `spec.restarts` runs; an infeasible QoS target yields a result with
/// [`SolveStatus::Infeasible`].
pub fn solve(layout: &StreamLayout, cfg: &SystemConfig, h: &CMatrix, spec: &OptimizeSpec) -> Result<SolveResult> {
    validate_config(cfg)?;
    spec.validate()?;
    check_layout(layout)?;
    if h.shape() != (cfg.m, cfg.k) || layout.users != cfg.k {
        return Err(Error::Dimension(format!("channel is {:?}, config expects ({}, {})", h.shape(), cfg.m, cfg.k)));
    }
    if let CsitMode::SampledWorstCase { delta, .. } = &spec.csit {
        if delta.len() != cfg.k {
            return Err(Error::Dimension("one uncertainty radius per user required".into()));
        }
    }
    let samples = SampleSet::for_mode(&spec.csit, h, cfg, spec.seed);
    solve_on_samples(layout, cfg, h, spec, &samples)
}

/// As [`solve`] with an explicit sample set.
pub fn solve_on_samples(
    layout: &StreamLayout,
    cfg: &SystemConfig,
    h: &CMatrix,
    spec: &OptimizeSpec,
    samples: &SampleSet,
) -> Result<SolveResult> {
    let runs: Vec<RunOutcome> = (0..spec.restarts.max(1) + single_user_restarts(layout, cfg, spec))
        .into_par_iter()
        .map(|r| one_restart(layout, cfg, h, spec, samples, r))
        .collect::<Result<Vec<_>>>()?;
    let rank = |r: &RunOutcome| if r.status == SolveStatus::Infeasible { f64::NEG_INFINITY } else { r.eval.objective };
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if rank(r) > rank(&runs[best]) {
            best = i;
        }
    }
    let run = runs.into_iter().nth(best).expect("at least one restart");
    Ok(finish(layout, cfg, run))
}

/// Max-min fair solve: `solve` with the MMF objective.
pub fn solve_mmf(layout: &StreamLayout, cfg: &SystemConfig, h: &CMatrix, spec: &OptimizeSpec) -> Result<SolveResult> {
    let spec = OptimizeSpec { objective: Objective::Mmf, ..spec.clone() };
    solve(layout, cfg, h, &spec)
}

/// Objective of a fixed precoder solution under the solver's channel view,
/// with the optimal division of shared-stream rates.
pub fn evaluate_objective(
    layout: &StreamLayout,
    cfg: &SystemConfig,
    sol: &PrecoderSolution,
    samples: &SampleSet,
    objective: Objective,
) -> Result<f64> {
    let p: Vec<CVector> = layout
        .streams
        .iter()
        .map(|s| {
            sol.precoders.get(&s.label).cloned().ok_or_else(|| Error::Layout(format!("missing precoder {}", s.label)))
        })
        .collect::<Result<_>>()?;
    let ctx = Context { layout, cfg, samples, terms: terms(layout), active: vec![true; layout.streams.len()] };
    Ok(ctx.evaluate(&p, objective, None).objective)
}

/// One boundary point of a weight sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub weights: Vec<f64>,
    pub rates: Vec<f64>,
    pub converged: bool,
}

/// Solves the WSR problem for each weight vector.
pub fn sweep_weights(
    layout: &StreamLayout,
    cfg: &SystemConfig,
    h: &CMatrix,
    weights: &[Vec<f64>],
    spec: &OptimizeSpec,
) -> Result<Vec<BoundaryPoint>> {
    if weights.len() < 2 {
        return Err(Error::InvalidConfig("at least two weight vectors required".into()));
    }
    weights
        .iter()
        .map(|w| {
            let cfg = cfg.clone().with_weights(w.clone());
            let spec = OptimizeSpec { objective: Objective::Wsr, ..spec.clone() };
            let r = solve(layout, &cfg, h, &spec)?;
            Ok(BoundaryPoint { weights: w.clone(), rates: r.totals.clone(), converged: r.converged() })
        })
        .collect()
}

/// Best result of a scheme over its layout variants: both SIC orders for
/// two-user NOMA and every served user for OMA.
pub fn solve_scheme(scheme: Scheme, cfg: &SystemConfig, h: &CMatrix, spec: &OptimizeSpec) -> Result<(StreamLayout, SolveResult)> {
    let k = cfg.k;
    let layouts: Vec<StreamLayout> = match scheme {
        Scheme::Noma => vec![
            build_stream_layout(Scheme::Noma, k, None, Some(&[0, 1]))?,
            build_stream_layout(Scheme::Noma, k, None, Some(&[1, 0]))?,
        ],
        Scheme::Oma => (0..k).map(|u| build_stream_layout(Scheme::Oma, k, None, Some(&[u]))).collect::<Result<_>>()?,
        other => vec![build_stream_layout(other, k, None, None)?],
    };
    let mut best: Option<(StreamLayout, SolveResult)> = None;
    for l in layouts {
        let r = solve(&l, cfg, h, spec)?;
        let better = match &best {
            None => true,
            Some((_, b)) => {
                (b.status == SolveStatus::Infeasible && r.status != SolveStatus::Infeasible)
                    || (r.status != SolveStatus::Infeasible && r.objective > b.objective)
            }
        };
        if better {
            best = Some((l, r));
        }
    }
    Ok(best.expect("at least one layout"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{sample_rayleigh, ChannelEnsembleSpec};
    use crate::rates::rate_downlink;

    fn rs(k: usize) -> StreamLayout {
        build_stream_layout(Scheme::OneLayerRs, k, None, None).unwrap()
    }

    #[test]
    fn embedding_preserves_quadratic_form() {
        let a = CMatrix::from_row_slice(2, 2, &[c64(2.0, 0.0), c64(0.5, -0.3), c64(0.5, 0.3), c64(1.0, 0.0)]);
        let p = CVector::from_vec(vec![c64(0.3, -1.2), c64(0.7, 0.4)]);
        let x = DVector::from_vec(vec![0.3, 0.7, -1.2, 0.4]);
        let lhs = (p.adjoint() * &a * &p)[(0, 0)].re;
        let rhs = x.dot(&(embed(&a) * &x));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn trace_is_monotone_and_solution_feasible() {
        let cfg = SystemConfig::from_snr_db(2, 2, 20.0);
        let h = sample_rayleigh(&ChannelEnsembleSpec::iid(2, 1, 3), 2, 0);
        let r = solve(&rs(2), &cfg, &h, &OptimizeSpec::wsr()).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert!(r.constraints.feasible(1e-9));
        let rep = rate_downlink(&rs(2), &r.solution, &h, &cfg).unwrap();
        assert!((rep.sum_rate - r.objective).abs() < 1e-9);
    }

    #[test]
    fn identical_channels_reach_single_user_bound() {
        let cfg = SystemConfig::from_snr_db(2, 2, 20.0);
        let h1 = sample_rayleigh(&ChannelEnsembleSpec::iid(1, 1, 5), 2, 0);
        let h = crate::linalg::from_columns(&[h1.column(0).into_owned(), h1.column(0).into_owned()]);
        let r = solve(&rs(2), &cfg, &h, &OptimizeSpec::wsr()).unwrap();
        let bound = (1.0 + cfg.power * h1.column(0).norm_squared()).log2();
        assert!((r.objective - bound).abs() < 1e-2, "{} vs {bound}", r.objective);
    }

    #[test]
    fn unsupported_layouts_rejected() {
        let cfg = SystemConfig::new(2, 3, 10.0);
        let h = sample_rayleigh(&ChannelEnsembleSpec::iid(3, 1, 1), 2, 0);
        let grs = build_stream_layout(Scheme::GeneralizedRs, 3, None, None).unwrap();
        assert!(solve(&grs, &cfg, &h, &OptimizeSpec::wsr()).is_err());
        let noma = build_stream_layout(Scheme::Noma, 3, None, None).unwrap();
        assert!(solve(&noma, &cfg, &h, &OptimizeSpec::wsr()).is_err());
    }

    #[test]
    fn infeasible_qos_is_reported() {
        let cfg = SystemConfig::new(2, 2, 1.0).with_qos(vec![20.0, 20.0]);
        let h = CMatrix::identity(2, 2);
        let r = solve(&rs(2), &cfg, &h, &OptimizeSpec::wsr().with_restarts(1)).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }
}
