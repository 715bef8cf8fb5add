//! Closed-form precoder directions and power allocation.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::channels::{MatrixDump, write_matrices};
use crate::error::{Error, Result};
use crate::linalg::{c64, column, e1, fix_phase, from_columns, gain, inner, norm_sqr, normalized, CMatrix, CVector};
use crate::model::{PrecoderSolution, StreamLayout, SystemConfig};
use crate::rates::{rate_downlink, with_policy, AllocationPolicy};

/// Unit-norm direction per stream label.
pub type Directions = BTreeMap<String, CVector>;

/// Orthonormal basis of the span of `cols` by twice-iterated Gram–Schmidt.
/// Returns `None` when the columns are linearly dependent.
fn orthonormal_basis(cols: &[CVector]) -> Option<Vec<CVector>> {
    let mut basis: Vec<CVector> = Vec::with_capacity(cols.len());
    for c in cols {
        let scale = norm_sqr(c).sqrt();
        let mut v = c.clone();
        for _ in 0..2 {
            for q in &basis {
                let a = inner(q, &v);
                v -= q.map(|z| z * a);
            }
        }
        let n = norm_sqr(&v).sqrt();
        if !(n > 1e-14 * scale) {
            return None;
        }
        basis.push(v / c64(n, 0.0));
    }
    Some(basis)
}

/// Zero-forcing directions: column `k` is the projection of `ĥ_k` onto the
/// null space of the other users' estimates, normalized.
pub fn zf_directions(h_hat: &CMatrix) -> Result<Vec<CVector>> {
    let (m, k) = h_hat.shape();
    if m < k {
        return Err(Error::Precoder("ZF requires underloaded system".into()));
    }
    let cols: Vec<CVector> = (0..k).map(|j| column(h_hat, j)).collect();
    (0..k)
        .map(|j| {
            let others: Vec<CVector> = cols.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, c)| c.clone()).collect();
            let basis = orthonormal_basis(&others)
                .ok_or_else(|| Error::Precoder("channel matrix is rank deficient".into()))?;
            let mut v = cols[j].clone();
            for _ in 0..2 {
                for q in &basis {
                    let a = inner(q, &v);
                    v -= q.map(|z| z * a);
                }
            }
            let scale = norm_sqr(&cols[j]).sqrt();
            if !(norm_sqr(&v).sqrt() > 1e-14 * scale) {
                return Err(Error::Precoder("channel matrix is rank deficient".into()));
            }
            Ok(normalized(&v).expect("nonzero projection"))
        })
        .collect()
}

/// Default regularizer `κ = K·σ̄²/P` with `σ̄²` the mean noise variance.
pub fn default_kappa(cfg: &SystemConfig) -> f64 {
    let noise = cfg.noise_var.iter().sum::<f64>() / cfg.k as f64;
    cfg.k as f64 * noise / cfg.power
}

/// Regularized zero-forcing directions, the normalized columns of
/// `(ĤĤᴴ + κI)^{-1}Ĥ` (evaluated as `Ĥ(ĤᴴĤ + κI)^{-1}` when `M ≥ K`).
/// A vanishing column falls back to the first axis.
pub fn rzf_directions(h_hat: &CMatrix, kappa: f64) -> Vec<CVector> {
    let (m, k) = h_hat.shape();
    let reg = c64(kappa.max(0.0), 0.0);
    let w = if m >= k {
        let gram = h_hat.adjoint() * h_hat + CMatrix::identity(k, k) * reg;
        gram.lu().try_inverse().map(|inv| h_hat * inv)
    } else {
        let gram = h_hat * h_hat.adjoint() + CMatrix::identity(m, m) * reg;
        gram.lu().solve(h_hat)
    };
    let w = w.unwrap_or_else(|| h_hat.clone());
    (0..k).map(|j| normalized(&column(&w, j)).unwrap_or_else(|| e1(m))).collect()
}

/// Dominant left singular vector of `Ĥ`, first significant entry real positive.
pub fn svd_common(h_hat: &CMatrix) -> Result<CVector> {
    if h_hat.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::Precoder("SVD direction of a zero matrix".into()));
    }
    let svd = h_hat.clone().svd(true, false);
    let u = svd.u.ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
    let best = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let v = normalized(&u.column(best).into_owned())
        .ok_or_else(|| Error::Numerical("degenerate singular vector".into()))?;
    Ok(fix_phase(&v))
}

/// Common direction from a weighted sum of the estimates, plus a flag set
/// when the sum cancels and the SVD direction is used instead. `None` weights
/// means the equal default `1/√(MK)`.
pub fn mbf_common(h_hat: &CMatrix, weights: Option<&[f64]>) -> Result<(CVector, bool)> {
    let (m, k) = h_hat.shape();
    let default = vec![1.0 / ((m * k) as f64).sqrt(); k];
    let w = weights.unwrap_or(&default);
    if w.len() != k {
        return Err(Error::Dimension("one MBF weight per user required".into()));
    }
    if w.iter().any(|&x| !(x >= 0.0)) || w.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidConfig("MBF weights must be ≥0 and not all zero".into()));
    }
    let mut sum = CVector::zeros(m);
    let mut scale = 0.0;
    for j in 0..k {
        let c = column(h_hat, j);
        scale += w[j] * norm_sqr(&c).sqrt();
        sum += c.map(|z| z * w[j]);
    }
    if norm_sqr(&sum).sqrt() > 1e-12 * scale {
        return Ok((normalized(&sum).expect("nonzero"), false));
    }
    log::warn!("weighted MBF sum cancels; using the SVD common direction");
    Ok((svd_common(h_hat)?, true))
}

/// Quadratic `c0 + c1 w + c2 w²` coefficients of `|a + w b|²`.
fn quad(a: Complex64, b: Complex64) -> [f64; 3] {
    [a.norm_sqr(), 2.0 * (a.conj() * b).re, b.norm_sqr()]
}

fn roots_in_unit(c: [f64; 3]) -> Vec<f64> {
    let [c0, c1, c2] = c;
    let mut out = Vec::new();
    if c2.abs() < 1e-300 {
        if c1.abs() > 1e-300 {
            out.push(-c0 / c1);
        }
    } else {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc >= 0.0 {
            let s = disc.sqrt();
            out.push((-c1 + s) / (2.0 * c2));
            out.push((-c1 - s) / (2.0 * c2));
        }
    }
    out.into_iter().filter(|w| (0.0..=1.0).contains(w)).collect()
}

/// Two-user MBF direction `∝ wĥ₁ + (1−w)ĥ₂` with `w ∈ [0,1]` maximizing
/// `min_k |ĥ_kᴴp̄|²`. Candidates are the endpoints, the crossing points of
/// the two gains and the stationary points of each gain.
pub fn mbf_max_min_two_user(h_hat: &CMatrix) -> Result<(CVector, f64)> {
    if h_hat.ncols() != 2 {
        return Err(Error::Dimension("two-user MBF needs exactly two columns".into()));
    }
    let h1 = column(h_hat, 0);
    let h2 = column(h_hat, 1);
    let x = |a: &CVector, b: &CVector| inner(a, b);
    // numerators |h_kᴴ(h2 + w(h1 − h2))|², denominator ‖h2 + w(h1 − h2)‖²
    let n1 = quad(x(&h1, &h2), x(&h1, &h1) - x(&h1, &h2));
    let n2 = quad(x(&h2, &h2), x(&h2, &h1) - x(&h2, &h2));
    let d = {
        let diff = &h1 - &h2;
        [norm_sqr(&h2), 2.0 * inner(&h2, &diff).re, norm_sqr(&diff)]
    };
    let stationary = |n: [f64; 3]| {
        roots_in_unit([n[1] * d[0] - n[0] * d[1], 2.0 * (n[2] * d[0] - n[0] * d[2]), n[2] * d[1] - n[1] * d[2]])
    };
    let mut candidates = vec![0.0, 1.0];
    candidates.extend(roots_in_unit([n1[0] - n2[0], n1[1] - n2[1], n1[2] - n2[2]]));
    candidates.extend(stationary(n1));
    candidates.extend(stationary(n2));
    let eval = |w: f64| -> Option<(CVector, f64)> {
        let v = normalized(&(h1.map(|z| z * w) + h2.map(|z| z * (1.0 - w))))?;
        let val = gain(&h1, &v).min(gain(&h2, &v));
        Some((v, val))
    };
    candidates
        .into_iter()
        .filter_map(eval)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Precoder("MBF directions vanish".into()))
}

/// Fixed common direction along the first antenna.
pub fn random_common(m: usize) -> CVector {
    e1(m)
}

/// How private power is shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrivatePolicy {
    Equal,
    WaterFilling,
}

/// Fraction `τ` of the budget given to private streams; the rest goes to
/// the shared streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    pub tau: f64,
    pub private: PrivatePolicy,
}

impl PowerSplit {
    pub fn equal(tau: f64) -> Self {
        PowerSplit { tau, private: PrivatePolicy::Equal }
    }

    pub fn water_filling(tau: f64) -> Self {
        PowerSplit { tau, private: PrivatePolicy::WaterFilling }
    }
}

/// Water-filling over `gains` (signal-to-noise per unit power) with total `budget`.
pub fn water_filling(gains: &[f64], budget: f64) -> Vec<f64> {
    let active: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    if active.is_empty() {
        let n = gains.len().max(1) as f64;
        return vec![budget / n; gains.len()];
    }
    let mut inv: Vec<f64> = active.iter().map(|&i| 1.0 / gains[i]).collect();
    inv.sort_by(f64::total_cmp);
    let mut level = 0.0;
    let mut acc = 0.0;
    for (j, &x) in inv.iter().enumerate() {
        acc += x;
        let candidate = (budget + acc) / (j + 1) as f64;
        if j + 1 == inv.len() || candidate <= inv[j + 1] {
            level = candidate;
            break;
        }
    }
    gains.iter().map(|&g| if g > 0.0 { (level - 1.0 / g).max(0.0) } else { 0.0 }).collect()
}

/// Scales `directions` into a full solution: single-decoder streams share
/// `τP` (equally or water-filled over `|ĥ_kᴴp̄_k|²/σ²_k`), streams decoded by
/// several users share `(1−τ)P` equally. A layout with only one kind of
/// stream gives it the whole budget.
pub fn assemble_solution(
    layout: &StreamLayout,
    directions: &Directions,
    split: PowerSplit,
    h_hat: &CMatrix,
    cfg: &SystemConfig,
) -> Result<PrecoderSolution> {
    if !(0.0..=1.0).contains(&split.tau) {
        return Err(Error::InvalidConfig("τ ∈ [0,1] required".into()));
    }
    let shared: Vec<usize> = (0..layout.streams.len()).filter(|&i| layout.streams[i].decoders.len() > 1).collect();
    let single: Vec<usize> = (0..layout.streams.len()).filter(|&i| layout.streams[i].decoders.len() == 1).collect();
    let (p_single, p_shared) = match (single.is_empty(), shared.is_empty()) {
        (true, _) => (0.0, cfg.power),
        (false, true) => (cfg.power, 0.0),
        _ => (split.tau * cfg.power, (1.0 - split.tau) * cfg.power),
    };
    let dir = |i: usize| -> Result<&CVector> {
        let label = &layout.streams[i].label;
        directions.get(label).ok_or_else(|| Error::Layout(format!("no direction for stream {label}")))
    };
    let mut sol = PrecoderSolution::new();
    for &i in &shared {
        let a = (p_shared / shared.len() as f64).sqrt();
        sol.precoders.insert(layout.streams[i].label.clone(), dir(i)?.map(|z| z * a));
    }
    let powers = match split.private {
        PrivatePolicy::Equal => vec![p_single / single.len().max(1) as f64; single.len()],
        PrivatePolicy::WaterFilling => {
            let gains = single
                .iter()
                .map(|&i| {
                    let u = layout.streams[i].decoders[0];
                    Ok(gain(&column(h_hat, u), dir(i)?) / cfg.noise_var[u])
                })
                .collect::<Result<Vec<_>>>()?;
            water_filling(&gains, p_single)
        }
    };
    for (j, &i) in single.iter().enumerate() {
        let a = powers[j].sqrt();
        sol.precoders.insert(layout.streams[i].label.clone(), dir(i)?.map(|z| z * a));
    }
    Ok(sol)
}

/// Rule for single-decoder stream directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrivateRule {
    Zf,
    /// Regularized ZF; `None` uses [`default_kappa`].
    Rzf(Option<f64>),
    /// Matched filter `ĥ_k/‖ĥ_k‖`.
    Mrt,
}

/// Rule for directions of streams decoded by several users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CommonRule {
    Svd,
    Mbf,
    Random,
}

/// Directions for every stream of `layout`. Single-decoder streams are
/// designed jointly over their users' estimates; a shared stream uses the
/// columns of its decoders.
pub fn closed_form_directions(
    layout: &StreamLayout,
    h_hat: &CMatrix,
    cfg: &SystemConfig,
    private: PrivateRule,
    common: CommonRule,
) -> Result<Directions> {
    let mut out = Directions::new();
    let single: Vec<usize> = (0..layout.streams.len()).filter(|&i| layout.streams[i].decoders.len() == 1).collect();
    if !single.is_empty() {
        let users: Vec<usize> = single.iter().map(|&i| layout.streams[i].decoders[0]).collect();
        let sub = from_columns(&users.iter().map(|&u| column(h_hat, u)).collect::<Vec<_>>());
        let dirs = match private {
            PrivateRule::Zf => zf_directions(&sub)?,
            PrivateRule::Rzf(kappa) => rzf_directions(&sub, kappa.unwrap_or_else(|| default_kappa(cfg))),
            PrivateRule::Mrt => (0..sub.ncols())
                .map(|j| normalized(&column(&sub, j)).unwrap_or_else(|| e1(cfg.m)))
                .collect(),
        };
        for (j, &i) in single.iter().enumerate() {
            out.insert(layout.streams[i].label.clone(), dirs[j].clone());
        }
    }
    for s in layout.streams.iter().filter(|s| s.decoders.len() > 1) {
        let sub = from_columns(&s.decoders.iter().map(|&u| column(h_hat, u)).collect::<Vec<_>>());
        let d = match common {
            CommonRule::Svd => svd_common(&sub).unwrap_or_else(|_| e1(cfg.m)),
            CommonRule::Mbf => mbf_common(&sub, None).map(|r| r.0).unwrap_or_else(|_| e1(cfg.m)),
            CommonRule::Random => random_common(cfg.m),
        };
        out.insert(s.label.clone(), d);
    }
    Ok(out)
}

/// RZF private directions, SVD common directions and the given split.
pub fn closed_form_solution(
    layout: &StreamLayout,
    h_hat: &CMatrix,
    cfg: &SystemConfig,
    split: PowerSplit,
) -> Result<PrecoderSolution> {
    let dirs = closed_form_directions(layout, h_hat, cfg, PrivateRule::Rzf(None), CommonRule::Svd)?;
    assemble_solution(layout, &dirs, split, h_hat, cfg)
}

/// Objective for the scalar power-split search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauObjective {
    SumRate,
    /// Minimum user rate with max-min division of the shared streams.
    MinRate,
}

/// One channel instance for the split search: directions designed from the
/// estimate, rates evaluated on the true channel.
#[derive(Debug, Clone)]
pub struct TauInstance {
    pub directions: Directions,
    pub h_hat: CMatrix,
    pub h: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauResult {
    pub tau: f64,
    pub value: f64,
}

/// Average objective over `instances` at a given `τ`.
pub fn tau_objective(
    layout: &StreamLayout,
    instances: &[TauInstance],
    cfg: &SystemConfig,
    objective: TauObjective,
    private: PrivatePolicy,
    tau: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for inst in instances {
        let sol = assemble_solution(layout, &inst.directions, PowerSplit { tau, private }, &inst.h_hat, cfg)?;
        let report = rate_downlink(layout, &sol, &inst.h, cfg)?;
        total += match objective {
            TauObjective::SumRate => report.sum_rate,
            TauObjective::MinRate => with_policy(report, layout, AllocationPolicy::MaxMin, &cfg.weights).min_rate,
        };
    }
    Ok(total / instances.len().max(1) as f64)
}

/// Searches `τ ∈ [0,1]`: a 0.01-step scan (endpoints included) followed by
/// golden-section refinement to 1e-4 around the best scan point.
pub fn optimize_tau(
    layout: &StreamLayout,
    instances: &[TauInstance],
    cfg: &SystemConfig,
    objective: TauObjective,
    private: PrivatePolicy,
) -> Result<TauResult> {
    let f = |t: f64| tau_objective(layout, instances, cfg, objective, private, t);
    let mut best = TauResult { tau: 0.0, value: f64::NEG_INFINITY };
    for i in 0..=100 {
        let t = i as f64 / 100.0;
        let v = f(t)?;
        if v > best.value {
            best = TauResult { tau: t, value: v };
        }
    }
    let (mut a, mut b) = ((best.tau - 0.01).max(0.0), (best.tau + 0.01).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > 1e-4 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    for (t, v) in [(x1, f1), (x2, f2)] {
        if v > best.value {
            best = TauResult { tau: t, value: v };
        }
    }
    Ok(best)
}

/// Closed-form NOMA precoders: shared streams steer along the dominant
/// direction of their decoders, single-decoder streams use RZF, and stream
/// powers follow `β^j` over SIC positions `j` (first decoded gets most).
pub fn noma_closed_form(layout: &StreamLayout, h_hat: &CMatrix, cfg: &SystemConfig, beta: f64) -> Result<PrecoderSolution> {
    let dirs = closed_form_directions(layout, h_hat, cfg, PrivateRule::Rzf(None), CommonRule::Svd)?;
    // a stream decoded by more users sits earlier in the SIC chain
    let weights: Vec<f64> = layout
        .streams
        .iter()
        .map(|s| beta.powi((layout.users - s.decoders.len()) as i32))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut sol = PrecoderSolution::new();
    for (s, w) in layout.streams.iter().zip(&weights) {
        let a = (cfg.power * w / total).sqrt();
        let d = dirs.get(&s.label).ok_or_else(|| Error::Layout(format!("no direction for {}", s.label)))?;
        sol.precoders.insert(s.label.clone(), d.map(|z| z * a));
    }
    Ok(sol)
}

/// Exports directions (columns in label order) in the matrix dump format.
pub fn write_directions(directions: &Directions) -> String {
    let labels: Vec<&str> = directions.keys().map(String::as_str).collect();
    let cols: Vec<CVector> = directions.values().cloned().collect();
    write_matrices(&[MatrixDump {
        name: format!("directions:{}", labels.join(",")),
        model: "unit-norm".into(),
        matrix: from_columns(&cols),
    }])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{sample_rayleigh, ChannelEnsembleSpec};
    use crate::model::{build_stream_layout, Scheme};

    fn rand_h(m: usize, k: usize, seed: u64) -> CMatrix {
        sample_rayleigh(&ChannelEnsembleSpec::iid(k, 1, seed), m, 0)
    }

    #[test]
    fn zf_nulls_other_users() {
        let h = CMatrix::identity(2, 2);
        let d = zf_directions(&h).unwrap();
        assert_eq!(d[0], column(&h, 0));
        for seed in 0..20 {
            let h = rand_h(4, 3, seed);
            let d = zf_directions(&h).unwrap();
            for k in 0..3 {
                assert!((norm_sqr(&d[k]) - 1.0).abs() < 1e-12);
                for j in (0..3).filter(|&j| j != k) {
                    assert!(inner(&column(&h, j), &d[k]).norm() < 1e-10 * norm_sqr(&column(&h, j)).sqrt());
                }
            }
        }
        assert!(zf_directions(&rand_h(2, 3, 1)).unwrap_err().to_string().contains("underloaded"));
        let dup = from_columns(&[column(&h, 0), column(&h, 0)]);
        assert!(zf_directions(&dup).is_err());
    }

    #[test]
    fn zf_nearly_aligned_gain_collapses() {
        let t = 1e-6f64;
        let h = CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(t.cos(), 0.0), c64(0.0, 0.0), c64(t.sin(), 0.0)]);
        let d = zf_directions(&h).unwrap();
        // 2x2 projection oracle: effective gain of user 1 is sin²(t)
        let g = gain(&column(&h, 0), &d[0]);
        assert!((g - t.sin().powi(2)).abs() < 1e-18);
        assert!(inner(&column(&h, 1), &d[0]).norm() < 1e-10);
    }

    #[test]
    fn rzf_limits() {
        for seed in 0..10 {
            let h = rand_h(3, 3, seed);
            let zf = zf_directions(&h).unwrap();
            let rzf = rzf_directions(&h, 0.0);
            for (a, b) in zf.iter().zip(&rzf) {
                let phase = inner(a, b);
                assert!((phase.norm() - 1.0).abs() < 1e-9);
                assert!(norm_sqr(&(a.map(|z| z * phase) - b)) < 1e-18);
            }
            let big = rzf_directions(&h, 1e12);
            for k in 0..3 {
                let mrt = normalized(&column(&h, k)).unwrap();
                assert!((inner(&mrt, &big[k]).norm() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rzf_overloaded_matches_small_inverse() {
        let h = rand_h(2, 3, 5);
        let kappa = 0.3;
        let d = rzf_directions(&h, kappa);
        // independent 2x2 inverse by the adjugate formula
        let a = h.clone() * h.adjoint();
        let (p, q, r, s) = (a[(0, 0)] + kappa, a[(0, 1)], a[(1, 0)], a[(1, 1)] + kappa);
        let det = p * s - q * r;
        for k in 0..3 {
            let x0 = (s * h[(0, k)] - q * h[(1, k)]) / det;
            let x1 = (-r * h[(0, k)] + p * h[(1, k)]) / det;
            let oracle = normalized(&CVector::from_vec(vec![x0, x1])).unwrap();
            assert!((inner(&oracle, &d[k]).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_matches_eigen_decomposition() {
        let u = normalized(&CVector::from_vec(vec![c64(1.0, 1.0), c64(-2.0, 0.5)])).unwrap();
        let v = CVector::from_vec(vec![c64(0.3, 0.0), c64(0.1, -0.7), c64(2.0, 0.0)]);
        let rank1 = &u * v.adjoint();
        let d = svd_common(&rank1).unwrap();
        assert!((inner(&u, &d).norm() - 1.0).abs() < 1e-12);
        assert!(d[0].im.abs() < 1e-15 && d[0].re > 0.0);

        let h = rand_h(4, 3, 7);
        let d = svd_common(&h).unwrap();
        let gram = &h * h.adjoint();
        let eig = gram.clone().symmetric_eigen();
        let top = eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let oracle = eig.eigenvectors.column(top).into_owned();
        assert!((inner(&oracle, &d).norm() - 1.0).abs() < 1e-10);

        let eye = CMatrix::identity(2, 2);
        let d = svd_common(&eye).unwrap();
        assert!((norm_sqr(&(eye.adjoint() * &d)) - 1.0).abs() < 1e-12);
        assert!(svd_common(&CMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn mbf_single_user_and_fallback() {
        let h = rand_h(3, 1, 2);
        let (d, fb) = mbf_common(&h, None).unwrap();
        assert!(!fb);
        assert!((inner(&normalized(&column(&h, 0)).unwrap(), &d).norm() - 1.0).abs() < 1e-12);
        let h1 = column(&rand_h(2, 1, 3), 0);
        let cancel = from_columns(&[h1.clone(), -h1]);
        let (_, fb) = mbf_common(&cancel, None).unwrap();
        assert!(fb);
    }

    #[test]
    fn two_user_mbf_matches_grid() {
        for seed in 0..10 {
            let h = rand_h(2, 2, 100 + seed);
            let (_, best) = mbf_max_min_two_user(&h).unwrap();
            let h1 = column(&h, 0);
            let h2 = column(&h, 1);
            let grid = (0..=20_000)
                .filter_map(|i| {
                    let w = i as f64 / 20_000.0;
                    let v = normalized(&(h1.map(|z| z * w) + h2.map(|z| z * (1.0 - w))))?;
                    Some(gain(&h1, &v).min(gain(&h2, &v)))
                })
                .fold(0.0, f64::max);
            assert!(best >= grid * 0.99 && best <= grid * 1.0001, "seed {seed}: {best} vs {grid}");
        }
    }

    #[test]
    fn water_filling_level() {
        let p = water_filling(&[4.0, 1.0], 2.0);
        // oracle: bisection on the water level
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid: f64 = 0.5 * (lo + hi);
            let used: f64 = [4.0f64, 1.0].iter().map(|g| (mid - 1.0 / g).max(0.0)).sum();
            if used > 2.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((p[0] - (lo - 0.25)).abs() < 1e-12);
        assert!((p[1] - (lo - 1.0)).abs() < 1e-12);
        assert_eq!(water_filling(&[10.0, 0.01], 0.5), vec![0.5, 0.0]);
    }

    #[test]
    fn assemble_power_and_extremes() {
        let h = rand_h(2, 2, 9);
        let cfg = SystemConfig::new(2, 2, 100.0);
        let l = build_stream_layout(Scheme::OneLayerRs, 2, None, None).unwrap();
        let dirs = closed_form_directions(&l, &h, &cfg, PrivateRule::Zf, CommonRule::Mbf).unwrap();
        for tau in [0.0, 0.3, 1.0] {
            for split in [PowerSplit::equal(tau), PowerSplit::water_filling(tau)] {
                let sol = assemble_solution(&l, &dirs, split, &h, &cfg).unwrap();
                assert!((sol.total_power() - 100.0).abs() < 1e-9 * 100.0);
            }
        }
        let sol = assemble_solution(&l, &dirs, PowerSplit::equal(1.0), &h, &cfg).unwrap();
        assert_eq!(norm_sqr(&sol.precoders["c"]), 0.0);
        let sol = assemble_solution(&l, &dirs, PowerSplit::equal(0.0), &h, &cfg).unwrap();
        assert_eq!(norm_sqr(&sol.precoders["p1"]) + norm_sqr(&sol.precoders["p2"]), 0.0);
        assert!(assemble_solution(&l, &dirs, PowerSplit::equal(1.5), &h, &cfg).is_err());
    }

    fn perfect_instance(l: &StreamLayout, h: &CMatrix, cfg: &SystemConfig) -> TauInstance {
        TauInstance {
            directions: closed_form_directions(l, h, cfg, PrivateRule::Rzf(None), CommonRule::Mbf).unwrap(),
            h_hat: h.clone(),
            h: h.clone(),
        }
    }

    #[test]
    fn tau_orthogonal_and_aligned() {
        let cfg = SystemConfig::new(2, 2, 100.0);
        let l = build_stream_layout(Scheme::OneLayerRs, 2, None, None).unwrap();
        let eye = CMatrix::identity(2, 2);
        let inst = [perfect_instance(&l, &eye, &cfg)];
        let r = optimize_tau(&l, &inst, &cfg, TauObjective::SumRate, PrivatePolicy::Equal).unwrap();
        assert!((r.tau - 1.0).abs() < 1e-4);

        let h1 = column(&rand_h(2, 1, 4), 0);
        let same = from_columns(&[h1.clone(), h1]);
        let inst = [perfect_instance(&l, &same, &cfg)];
        let at0 = tau_objective(&l, &inst, &cfg, TauObjective::SumRate, PrivatePolicy::Equal, 0.0).unwrap();
        let at1 = tau_objective(&l, &inst, &cfg, TauObjective::SumRate, PrivatePolicy::Equal, 1.0).unwrap();
        assert!(at0 >= at1);
    }

    #[test]
    fn noma_power_ladder_normalized() {
        let cfg = SystemConfig::new(2, 3, 10.0);
        let l = build_stream_layout(Scheme::Noma, 3, None, None).unwrap();
        let sol = noma_closed_form(&l, &rand_h(2, 3, 1), &cfg, 0.3).unwrap();
        assert!((sol.total_power() - 10.0).abs() < 1e-9);
        assert!(norm_sqr(&sol.precoders["n1"]) > norm_sqr(&sol.precoders["n3"]));
    }

    #[test]
    fn direction_dump_parses() {
        let cfg = SystemConfig::new(2, 2, 10.0);
        let l = build_stream_layout(Scheme::OneLayerRs, 2, None, None).unwrap();
        let dirs = closed_form_directions(&l, &rand_h(2, 2, 3), &cfg, PrivateRule::Zf, CommonRule::Svd).unwrap();
        let parsed = crate::channels::read_matrices(&write_directions(&dirs)).unwrap();
        assert_eq!(parsed[0].name, "directions:c,p1,p2");
        assert_eq!(column(&parsed[0].matrix, 1), dirs["p1"]);
    }
}
