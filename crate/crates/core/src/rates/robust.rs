//! Rates under imperfect CSIT: sampled worst case over bounded errors and
//! ergodic averages over channel draws.

use rayon::prelude::*;

use crate::channels::{random_unit, trial_rng, ChannelPair};
use crate::error::Result;
use crate::linalg::{gain, inner, norm_sqr, CMatrix, CVector};
use crate::model::{DecodeRate, PrecoderSolution, RateReport, StreamLayout, SystemConfig};

use super::downlink::{check_inputs, rate_downlink, report_from_decode_rates, user_terms};

/// Sampled lower-bound estimate of the worst-case rates when each true
/// channel lies within distance `delta[k]` of the estimate.
///
/// For every user the candidate channels are the estimate itself, one
/// adversarial point per decoded stream (the closest point of the sphere to
/// cancelling that stream's signal) and `n_samples` uniform points on the
/// sphere. Each decode-rate term takes its minimum over the candidates.
pub fn worst_case_rates(
    layout: &StreamLayout,
    sol: &PrecoderSolution,
    h_hat: &CMatrix,
    delta: &[f64],
    cfg: &SystemConfig,
    n_samples: usize,
    seed: u64,
) -> Result<RateReport> {
    let p = check_inputs(layout, sol, h_hat, cfg)?;
    let mut decode_rates = Vec::new();
    for k in 0..layout.users {
        let hk = h_hat.column(k).into_owned();
        let candidates = uncertainty_samples(&hk, &p, &layout.decode_order[k], delta[k], n_samples, seed, k);
        let mut minima: Vec<f64> = vec![f64::INFINITY; layout.decode_order[k].len()];
        for h in &candidates {
            let gains: Vec<f64> = p.iter().map(|pt| gain(h, pt)).collect();
            for (j, t) in user_terms(layout, k, &gains, cfg.noise_var[k]).iter().enumerate() {
                minima[j] = minima[j].min(t.rate());
            }
        }
        for (j, &s) in layout.decode_order[k].iter().enumerate() {
            decode_rates.push(DecodeRate { stream: s, user: k, rate: minima[j] });
        }
    }
    Ok(report_from_decode_rates(layout, decode_rates, &sol.common_alloc))
}

/// Candidate channels for one user: the estimate, adversarial points against
/// each decoded stream, then uniform points on the sphere of radius `delta`.
pub fn uncertainty_samples(
    h_hat: &CVector,
    precoders: &[CVector],
    decoded: &[usize],
    delta: f64,
    n_samples: usize,
    seed: u64,
    user: usize,
) -> Vec<CVector> {
    let mut out = vec![h_hat.clone()];
    if delta <= 0.0 {
        return out;
    }
    for &s in decoded {
        let ps = &precoders[s];
        let pn = norm_sqr(ps).sqrt();
        if pn == 0.0 {
            continue;
        }
        let ip = inner(h_hat, ps);
        let mag = ip.norm();
        if mag == 0.0 {
            continue;
        }
        let a = (mag / pn).min(delta);
        let phase = ip.conj() / mag;
        out.push(h_hat - ps.map(|z| z * phase * (a / pn)));
    }
    let mut rng = trial_rng(seed, user as u64);
    for _ in 0..n_samples {
        let d = random_unit(&mut rng, h_hat.len());
        out.push(h_hat + d.map(|z| z * delta));
    }
    out
}

/// Average of per-trial reports with standard errors of the per-user totals.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicReport {
    /// Stream rates are averaged after taking the per-trial minimum over
    /// decoders; `min_rate` is the minimum of the averaged totals.
    pub mean: RateReport,
    pub stderr_totals: Vec<f64>,
    pub stderr_sum: f64,
    pub trials: usize,
}

/// Averages `rate_downlink` over `trials` draws. Each trial draws a channel
/// pair with `sampler(trial)`, designs precoders from it with `rule` (which
/// should only look at the estimate) and evaluates on the true channel.
pub fn ergodic_rates<S, F>(
    layout: &StreamLayout,
    rule: F,
    sampler: S,
    cfg: &SystemConfig,
    trials: usize,
) -> Result<ErgodicReport>
where
    S: Fn(u64) -> ChannelPair + Sync,
    F: Fn(&ChannelPair) -> Result<PrecoderSolution> + Sync,
{
    let reports: Vec<RateReport> = (0..trials.max(1) as u64)
        .into_par_iter()
        .map(|t| {
            let pair = sampler(t);
            let sol = rule(&pair)?;
            rate_downlink(layout, &sol, &pair.h, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(average_reports(&reports))
}

/// Element-wise mean of reports sharing one layout.
pub fn average_reports(reports: &[RateReport]) -> ErgodicReport {
    let n = reports.len() as f64;
    let mut mean = reports[0].clone();
    let avg = |f: &dyn Fn(&RateReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    for i in 0..mean.stream_rate.len() {
        mean.stream_rate[i] = avg(&|r| r.stream_rate[i]);
    }
    for i in 0..mean.decode_rates.len() {
        mean.decode_rates[i].rate = avg(&|r| r.decode_rates[i].rate);
    }
    let keys: Vec<(usize, usize)> = mean.shares.keys().copied().collect();
    for key in keys {
        mean.shares.insert(key, avg(&|r| r.shares[&key]));
    }
    mean.refresh_totals();
    let stderr = |f: &dyn Fn(&RateReport) -> f64, m: f64| {
        if reports.len() < 2 {
            return 0.0;
        }
        let var = reports.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    let stderr_totals = (0..mean.totals.len()).map(|k| stderr(&|r| r.totals[k], mean.totals[k])).collect();
    let stderr_sum = stderr(&|r| r.sum_rate, mean.sum_rate);
    ErgodicReport { mean, stderr_totals, stderr_sum, trials: reports.len() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{sample_rayleigh, ChannelEnsembleSpec};
    use crate::linalg::{c64, zeros};
    use crate::model::{build_stream_layout, Scheme};

    fn rs_solution(h: &CMatrix) -> PrecoderSolution {
        let c = (h.column(0) + h.column(1)).normalize();
        PrecoderSolution::new()
            .with("c", c.map(|z| z * 2.0))
            .with("p1", h.column(0).normalize())
            .with("p2", h.column(1).normalize())
    }

    #[test]
    fn zero_radius_is_nominal() {
        let l = build_stream_layout(Scheme::OneLayerRs, 2, None, None).unwrap();
        let spec = ChannelEnsembleSpec::iid(2, 1, 3);
        let h = sample_rayleigh(&spec, 2, 0);
        let sol = rs_solution(&h);
        let cfg = SystemConfig::new(2, 2, 6.0);
        let nominal = rate_downlink(&l, &sol, &h, &cfg).unwrap();
        let wc = worst_case_rates(&l, &sol, &h, &[0.0, 0.0], &cfg, 64, 1).unwrap();
        assert_eq!(nominal, wc);
    }

    #[test]
    fn adversarial_point_kills_common_stream() {
        let l = build_stream_layout(Scheme::OneLayerRs, 2, None, None).unwrap();
        let h = CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        let sol = PrecoderSolution::new()
            .with("c", CVector::from_vec(vec![c64(1.0, 0.0), c64(1.0, 0.0)]))
            .with("p1", zeros(2))
            .with("p2", zeros(2));
        let cfg = SystemConfig::new(2, 2, 2.0);
        let wc = worst_case_rates(&l, &sol, &h, &[2.0, 2.0], &cfg, 8, 1).unwrap();
        assert!(wc.decode_rate("c", 0).unwrap() < 1e-12);
    }

    #[test]
    fn sample_refinement_is_consistent() {
        let l = build_stream_layout(Scheme::OneLayerRs, 2, None, None).unwrap();
        let spec = ChannelEnsembleSpec::iid(2, 1, 8);
        let h = sample_rayleigh(&spec, 2, 0);
        let sol = rs_solution(&h);
        let cfg = SystemConfig::new(2, 2, 6.0);
        let a = worst_case_rates(&l, &sol, &h, &[0.1, 0.1], &cfg, 512, 1).unwrap();
        let b = worst_case_rates(&l, &sol, &h, &[0.1, 0.1], &cfg, 4096, 2).unwrap();
        for (x, y) in a.decode_rates.iter().zip(&b.decode_rates) {
            assert!((x.rate - y.rate).abs() < 0.05);
        }
        let nominal = rate_downlink(&l, &sol, &h, &cfg).unwrap();
        assert!(a.sum_rate <= nominal.sum_rate);
    }

    #[test]
    fn ergodic_deterministic_channel_equals_single_shot() {
        let l = build_stream_layout(Scheme::OneLayerRs, 2, None, None).unwrap();
        let spec = ChannelEnsembleSpec::iid(2, 1, 4);
        let h = sample_rayleigh(&spec, 2, 0);
        let cfg = SystemConfig::new(2, 2, 6.0);
        let single = rate_downlink(&l, &rs_solution(&h), &h, &cfg).unwrap();
        let erg = ergodic_rates(&l, |p| Ok(rs_solution(&p.h_hat)), |_| ChannelPair::perfect(h.clone()), &cfg, 7)
            .unwrap();
        for (a, b) in erg.mean.totals.iter().zip(&single.totals) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(erg.stderr_sum < 1e-12);
    }

    #[test]
    fn ergodic_single_trial_matches_draw() {
        let l = build_stream_layout(Scheme::OneLayerRs, 2, None, None).unwrap();
        let spec = ChannelEnsembleSpec::iid(2, 1, 21);
        let cfg = SystemConfig::new(2, 2, 6.0);
        let erg = ergodic_rates(
            &l,
            |p| Ok(rs_solution(&p.h_hat)),
            |t| ChannelPair::perfect(sample_rayleigh(&spec, 2, t)),
            &cfg,
            1,
        )
        .unwrap();
        let h = sample_rayleigh(&spec, 2, 0);
        assert_eq!(erg.mean, rate_downlink(&l, &rs_solution(&h), &h, &cfg).unwrap());
    }
}
