//! Configuration-driven runner behind the `rsma` binary.
//!
//! A run resolves every key of its recipe from three layers: built-in
//! defaults, then a TOML file given with `--config` (dotted keys or
//! sections), then `--key value` flags. Flags take the full dotted key or,
//! when unambiguous within the recipe, its last segment (`--alpha`).
//! Unknown keys are rejected.
//!
//! Each run writes its CSV artifacts, `config.resolved.toml` and
//! `manifest.toml` into the output directory: `--out`, else
//! `$RSMA_OUTPUT_DIR/<recipe>`, else `rsma-out/<recipe>`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::analysis::{self, Artifact, Recipe};
use crate::channels::{
    deterministic_two_user, read_pair, sample_rayleigh, sample_scaled_error_pair, theta_from_rho, write_pair,
    ChannelEnsembleSpec, ChannelPair,
};
use crate::error::{Error, Result};
use crate::model::{build_stream_layout, noma_order_by_norm, Scheme, SystemConfig};
use crate::optimizer::{solve, CsitMode, Objective, OptimizeSpec, SolveStatus};
use crate::precoders::{
    assemble_solution, closed_form_directions, noma_closed_form, CommonRule, PowerSplit, PrivatePolicy, PrivateRule,
};
use crate::rates::{rate_downlink, with_policy, AllocationPolicy};

pub const OUTPUT_ENV: &str = "RSMA_OUTPUT_DIR";

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) | Error::Precoder(_) => EXIT_NUMERICAL,
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        _ => EXIT_CONFIG,
    }
}

/// Everything `run` can execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Rate,
    Solve,
    Dof,
    Experiment(Recipe),
}

impl Target {
    /// Recipes shown by `list`.
    pub fn recipes() -> Vec<Target> {
        let mut v = vec![Target::Rate, Target::Solve];
        v.extend(Recipe::ALL.iter().map(|&r| Target::Experiment(r)));
        v
    }

    fn all() -> Vec<Target> {
        let mut v = Self::recipes();
        v.push(Target::Dof);
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::Rate => "rate",
            Target::Solve => "solve",
            Target::Dof => "dof",
            Target::Experiment(r) => r.name(),
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Target::Rate => "single-shot rate report for closed-form precoders",
            Target::Solve => "single precoder optimization (WSR or MMF)",
            Target::Dof => "closed-form sum or MMF degrees of freedom",
            Target::Experiment(r) => r.description(),
        }
    }

    pub fn parse(name: &str) -> Result<Target> {
        let all = Self::all();
        if let Some(t) = all.iter().find(|t| t.name() == name) {
            return Ok(*t);
        }
        let names: Vec<&str> = all.iter().map(|t| t.name()).collect();
        Err(Error::InvalidConfig(format!("unknown recipe '{name}'{}", suggestion(name, &names))))
    }
}

fn suggestion(given: &str, candidates: &[&str]) -> String {
    candidates
        .iter()
        .map(|c| {
            let tail = c.rsplit('.').next().unwrap_or(c);
            (strsim::levenshtein(given, c).min(strsim::levenshtein(given, tail)), *c)
        })
        .min()
        .filter(|(d, _)| *d <= 3)
        .map(|(_, c)| format!("; did you mean '{c}'?"))
        .unwrap_or_default()
}

/// A configuration key with its default and one-line documentation.
#[derive(Debug, Clone, Copy)]
pub struct KeyDoc {
    pub key: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

const fn k(key: &'static str, default: &'static str, doc: &'static str) -> KeyDoc {
    KeyDoc { key, default, doc }
}

const SOLVER_KEYS: [KeyDoc; 4] = [
    k("solver.tolerance", "0.0001", "stop when the objective gains less than this"),
    k("solver.max_iter", "200", "outer iteration cap"),
    k("solver.restarts", "3", "independent starts, best kept"),
    k("solver.seed", "0", "seed for restart perturbations and samples"),
];

const CHANNEL_KEYS: [KeyDoc; 9] = [
    k("channel.model", "rayleigh", "rayleigh | two-user | file"),
    k("channel.csit", "perfect", "perfect | scaled-error (estimate known to the transmitter)"),
    k("channel.alpha", "0.6", "CSIT scaling factor for scaled-error"),
    k("channel.variances", "", "per-user channel variances, comma separated (default all 1)"),
    k("channel.seed", "1", "ensemble seed"),
    k("channel.trial", "0", "trial index within the ensemble"),
    k("channel.gamma_db", "0", "two-user: strength of user 2 relative to user 1"),
    k("channel.rho", "0.5", "two-user: orthogonality 1 - |h1'h2|^2/(|h1|^2|h2|^2)"),
    k("channel.file", "", "matrix dump with H and H_hat"),
];

const SYSTEM_KEYS: [KeyDoc; 5] = [
    k("system.m", "2", "transmit antennas"),
    k("system.k", "2", "users"),
    k("system.snr_db", "20", "transmit SNR in dB (unit noise)"),
    k("system.weights", "", "user weights, comma separated (default all 1)"),
    k("system.qos", "", "rate thresholds in bit/s/Hz, comma separated (default all 0)"),
];

/// Keys accepted by `target`, in documentation order.
pub fn keys_for(target: Target) -> Vec<KeyDoc> {
    let mut v = Vec::new();
    match target {
        Target::Rate => {
            v.extend(SYSTEM_KEYS);
            v.extend([
                k("layout.scheme", "rs", "rs | hrs | grs | rs-cmd | sdma | noma | oma | multicast"),
                k("layout.grouping", "", "user groups for hrs/noma, e.g. 1,2;3,4"),
                k("layout.order", "", "noma SIC order (default by estimated norm) or oma served user"),
            ]);
            v.extend(CHANNEL_KEYS);
            v.extend([
                k("precoder.private", "rzf", "zf | rzf | mrt"),
                k("precoder.common", "svd", "svd | mbf | random"),
                k("precoder.tau", "0.5", "fraction of power on single-decoder streams"),
                k("precoder.power", "equal", "equal | water-filling over private streams"),
                k("precoder.beta", "0.3", "noma power ratio between SIC positions"),
                k("rate.allocation", "maxmin", "common-rate division: equal | weighted | maxmin"),
            ]);
        }
        Target::Solve => {
            v.extend(SYSTEM_KEYS);
            v.push(k("layout.scheme", "rs", "rs | sdma | noma (K=2) | oma | multicast"));
            v.extend(CHANNEL_KEYS);
            v.extend([
                k("solver.objective", "wsr", "wsr | mmf"),
                k("solver.csit", "perfect", "perfect | worst-case | ergodic"),
                k("solver.delta", "0.1", "worst-case uncertainty radius"),
                k("solver.samples", "100", "channel samples for worst-case or ergodic mode"),
            ]);
            v.extend(SOLVER_KEYS);
        }
        Target::Dof => v.extend([
            k("dof.scheme", "rsma", "noma | sdma | rsma"),
            k("dof.metric", "sum", "sum | mmf"),
            k("dof.csit", "perfect", "perfect | imperfect"),
            k("dof.alpha", "1", "CSIT scaling factor in [0,1]"),
            k("dof.m", "2", "transmit antennas"),
            k("dof.k", "2", "users"),
            k("dof.groups", "1", "NOMA user groups G"),
            k("dof.group_size", "0", "users per group g (0: K/G)"),
        ]),
        Target::Experiment(Recipe::RateRegion) => v.extend([
            k("system.m", "2", "transmit antennas"),
            k("system.snr_db", "20", "transmit SNR in dB"),
            k("channel.alpha", "0.6", "CSIT scaling factor"),
            k("channel.variances", "1,1", "estimate variances of the two users"),
            k("run.trials", "10", "channel estimates averaged"),
            k("run.samples", "50", "conditional draws per estimate"),
            k("run.points", "10", "weight pairs on the quarter circle"),
            k("run.schemes", "rs,sdma,noma,oma", "schemes to sweep"),
            k("run.seed", "1", "ensemble seed"),
            k("solver.tolerance", "0.0001", "stop when the objective gains less than this"),
            k("solver.max_iter", "200", "outer iteration cap"),
            k("solver.restarts", "1", "independent starts, best kept"),
        ]),
        Target::Experiment(Recipe::EsrVsAlpha) => v.extend([
            k("system.m", "2", "transmit antennas"),
            k("system.k", "3", "users"),
            k("system.snr_db", "20", "transmit SNR in dB"),
            k("run.alphas", "0.2,0.4,0.6,0.8,1", "CSIT scaling factors"),
            k("channel.variances", "1,1,1", "per-user variances"),
            k("run.trials", "10", "channel estimates averaged"),
            k("run.samples", "50", "conditional draws per estimate"),
            k("run.schemes", "rs,sdma", "schemes to compare"),
            k("run.seed", "1", "ensemble seed"),
            k("solver.tolerance", "0.0001", "stop when the objective gains less than this"),
            k("solver.max_iter", "200", "outer iteration cap"),
            k("solver.restarts", "1", "independent starts, best kept"),
        ]),
        Target::Experiment(Recipe::MmfVsSnr) => v.extend([
            k("system.m", "4", "transmit antennas"),
            k("system.k", "4", "users"),
            k("channel.alpha", "0.5", "CSIT scaling factor"),
            k("run.snrs_db", "10,20,30", "SNR grid in dB"),
            k("run.trials", "50", "channel estimates per SNR"),
            k("run.samples", "100", "conditional draws per estimate"),
            k("run.noma_betas", "0.05,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", "closed-form NOMA power ratios tried"),
            k("run.seed", "1", "ensemble seed"),
            k("solver.tolerance", "0.0001", "stop when the objective gains less than this"),
            k("solver.max_iter", "200", "outer iteration cap"),
            k("solver.restarts", "3", "independent starts, best kept"),
        ]),
        Target::Experiment(Recipe::DofSlope) => v.extend([
            k("system.m", "2", "transmit antennas"),
            k("system.k", "2", "users"),
            k("channel.alpha", "0.6", "CSIT scaling factor"),
            k("run.snrs_db", "0,10,20,30,40", "SNR grid in dB"),
            k("run.top", "3", "highest SNR points in the slope fit"),
            k("run.trials", "100", "channel draws per SNR"),
            k("run.seed", "1", "ensemble seed"),
        ]),
        Target::Experiment(Recipe::OverloadedQos) => v.extend([
            k("system.m", "2", "transmit antennas"),
            k("channel.variances", "1,0.9,0.8,0.7", "per-user variances (sets K)"),
            k("run.snrs_db", "0,5,10,15,20,25,30", "SNR grid in dB"),
            k("run.qos_ladder", "0,0.001,0.004,0.01,0.03,0.06,0.1", "threshold for every user at each SNR"),
            k("run.trials", "10", "channel draws per SNR"),
            k("run.schemes", "rs,sdma", "schemes to compare"),
            k("run.top", "3", "highest SNR points in the slope fit"),
            k("run.seed", "1", "ensemble seed"),
            k("solver.tolerance", "0.0001", "stop when the objective gains less than this"),
            k("solver.max_iter", "200", "outer iteration cap"),
            k("solver.restarts", "3", "independent starts, best kept"),
        ]),
        Target::Experiment(Recipe::UplinkRegion) => v.extend([
            k("uplink.p1", "1", "user 1 power"),
            k("uplink.p2", "1", "user 2 power"),
            k("uplink.g1", "1", "user 1 channel gain |h1|^2"),
            k("uplink.g2", "1", "user 2 channel gain |h2|^2"),
            k("uplink.noise", "1", "receiver noise variance"),
            k("run.points", "20", "dominant-face points"),
        ]),
        Target::Experiment(Recipe::OperRegion) => v.extend([
            k("run.grid", "10", "cells per axis"),
            k("system.weights", "1,1", "user weights"),
            k("system.snr_db", "20", "transmit SNR in dB"),
            k("region.epsilon", "0.1", "selection tolerance in bit/s/Hz"),
            k("solver.tolerance", "0.0001", "stop when the objective gains less than this"),
            k("solver.max_iter", "200", "outer iteration cap"),
            k("solver.restarts", "3", "independent starts, best kept"),
        ]),
    }
    v
}

/// Fully resolved key-value configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub target: Target,
    pub values: BTreeMap<String, String>,
    pub out: Option<PathBuf>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) -> Result<()> {
    for (key, value) in table {
        let full = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match value {
            toml::Value::Table(t) => flatten(&full, t, out)?,
            toml::Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar_text).collect::<Result<_>>()?;
                out.push((full, parts.join(",")));
            }
            other => out.push((full, scalar_text(other)?)),
        }
    }
    Ok(())
}

fn scalar_text(v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        other => Err(Error::Parse(format!("unsupported value {other}"))),
    }
}

impl RunConfig {
    /// Defaults of `target` overlaid with `file` (TOML text) and `overrides`
    /// (`(key, value)` pairs, short keys allowed).
    pub fn resolve(target: Target, file: Option<&str>, overrides: &[(String, String)]) -> Result<RunConfig> {
        let docs = keys_for(target);
        let mut values: BTreeMap<String, String> =
            docs.iter().map(|d| (d.key.to_string(), d.default.to_string())).collect();
        let known: Vec<&str> = docs.iter().map(|d| d.key).collect();
        let mut out = None;
        if let Some(text) = file {
            let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.message().to_string()))?;
            let mut pairs = Vec::new();
            flatten("", &table, &mut pairs)?;
            for (key, value) in pairs {
                match key.as_str() {
                    "recipe" => {
                        if value != target.name() {
                            return Err(Error::InvalidConfig(format!(
                                "config is for recipe '{value}', not '{}'",
                                target.name()
                            )));
                        }
                    }
                    "output.dir" => out = Some(PathBuf::from(value)),
                    _ if values.contains_key(&key) => {
                        values.insert(key, value);
                    }
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "unknown key '{key}' for {}{}",
                            target.name(),
                            suggestion(&key, &known)
                        )))
                    }
                }
            }
        }
        for (key, value) in overrides {
            if key == "out" || key == "output.dir" {
                out = Some(PathBuf::from(value));
                continue;
            }
            let full = Self::expand(key, &known, target.name())?;
            values.insert(full, value.clone());
        }
        Ok(RunConfig { target, values, out })
    }

    fn expand(key: &str, known: &[&str], recipe: &str) -> Result<String> {
        if known.contains(&key) {
            return Ok(key.to_string());
        }
        let matches: Vec<&&str> = known.iter().filter(|k| k.rsplit('.').next() == Some(key)).collect();
        match matches.len() {
            1 => Ok(matches[0].to_string()),
            0 => Err(Error::InvalidConfig(format!("unknown key '{key}' for {recipe}{}", suggestion(key, known)))),
            _ => Err(Error::InvalidConfig(format!(
                "ambiguous key '{key}': {}",
                matches.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn bad(key: &str, value: &str, what: &str) -> Error {
        Error::InvalidConfig(format!("{key}: expected {what}, got '{value}'"))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.get(key);
        v.trim().parse().map_err(|_| Self::bad(key, v, "a nonnegative integer"))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let v = self.get(key);
        v.trim().parse().map_err(|_| Self::bad(key, v, "a nonnegative integer"))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v = self.get(key);
        v.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| Self::bad(key, v, "a number"))
    }

    /// Comma-separated numbers; `None` when the value is empty.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let v = self.get(key).trim();
        if v.is_empty() {
            return Ok(None);
        }
        v.split(',')
            .map(|x| x.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .map(Some)
            .ok_or_else(|| Self::bad(key, v, "comma-separated numbers"))
    }

    fn schemes(&self, key: &str) -> Result<Vec<Scheme>> {
        self.get(key).split(',').map(|s| s.trim().parse::<Scheme>()).collect()
    }

    /// `1,2;3,4` → `[[0,1],[2,3]]`.
    fn grouping(&self, key: &str) -> Result<Option<Vec<Vec<usize>>>> {
        let v = self.get(key).trim();
        if v.is_empty() {
            return Ok(None);
        }
        v.split(';')
            .map(|g| {
                g.split(',')
                    .map(|u| u.trim().parse::<usize>().ok().filter(|&u| u >= 1).map(|u| u - 1))
                    .collect::<Option<Vec<usize>>>()
            })
            .collect::<Option<Vec<_>>>()
            .map(Some)
            .ok_or_else(|| Self::bad(key, v, "1-based user lists separated by ';'"))
    }

    fn user_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        Ok(self.grouping(key)?.map(|g| g.concat()))
    }

    fn solver_spec(&self, objective: Objective) -> Result<OptimizeSpec> {
        let mut spec = match objective {
            Objective::Wsr => OptimizeSpec::wsr(),
            Objective::Mmf => OptimizeSpec::mmf(),
        };
        spec.tolerance = self.f64("solver.tolerance")?;
        spec.max_iter = self.usize("solver.max_iter")?;
        spec.restarts = self.usize("solver.restarts")?;
        if self.values.contains_key("solver.seed") {
            spec.seed = self.u64("solver.seed")?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// TOML text that reproduces this configuration through `--config`.
    pub fn to_toml(&self) -> String {
        let mut out = format!("recipe = \"{}\"\n", self.target.name());
        for (key, value) in &self.values {
            let bare = value.parse::<f64>().is_ok_and(|x| x.is_finite()) && !value.starts_with('.');
            if bare {
                out.push_str(&format!("{key} = {value}\n"));
            } else {
                out.push_str(&format!("{key} = \"{}\"\n", value.replace('\\', "\\\\").replace('"', "\\\"")));
            }
        }
        out
    }

    fn seed(&self) -> Option<u64> {
        ["run.seed", "channel.seed", "solver.seed"].iter().find_map(|k| self.values.get(*k)?.parse().ok())
    }
}

/// What a run produced besides its artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    /// Human-readable result printed to stdout.
    pub summary: String,
    pub infeasible: bool,
}

fn system_config(c: &RunConfig) -> Result<SystemConfig> {
    let (m, k) = (c.usize("system.m")?, c.usize("system.k")?);
    let mut cfg = SystemConfig::from_snr_db(m, k, c.f64("system.snr_db")?);
    if let Some(w) = c.f64_list("system.weights")? {
        cfg = cfg.with_weights(w);
    }
    if let Some(q) = c.f64_list("system.qos")? {
        cfg = cfg.with_qos(q);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn channel_pair(c: &RunConfig, cfg: &SystemConfig) -> Result<ChannelPair> {
    let pair = match c.get("channel.model") {
        "rayleigh" => {
            let variances = c.f64_list("channel.variances")?.unwrap_or_else(|| vec![1.0; cfg.k]);
            if variances.len() != cfg.k {
                return Err(Error::InvalidConfig("channel.variances: one value per user required".into()));
            }
            let spec = ChannelEnsembleSpec { variances, trials: 1, seed: c.u64("channel.seed")? };
            spec.validate()?;
            let trial = c.u64("channel.trial")?;
            match c.get("channel.csit") {
                "perfect" => ChannelPair::perfect(sample_rayleigh(&spec, cfg.m, trial)),
                "scaled-error" => sample_scaled_error_pair(&spec, cfg.m, c.f64("channel.alpha")?, cfg.power, trial),
                other => return Err(RunConfig::bad("channel.csit", other, "perfect or scaled-error")),
            }
        }
        "two-user" => {
            if (cfg.m, cfg.k) != (2, 2) {
                return Err(Error::InvalidConfig("channel.model two-user requires system.m=2 and system.k=2".into()));
            }
            let rho = c.f64("channel.rho")?;
            if !(0.0..=1.0).contains(&rho) {
                return Err(RunConfig::bad("channel.rho", c.get("channel.rho"), "a value in [0,1]"));
            }
            ChannelPair::perfect(deterministic_two_user(c.f64("channel.gamma_db")?, theta_from_rho(rho)).0)
        }
        "file" => {
            let path = c.get("channel.file");
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{path}: {e}")))?;
            read_pair(&text)?
        }
        other => return Err(RunConfig::bad("channel.model", other, "rayleigh, two-user or file")),
    };
    if pair.h.shape() != (cfg.m, cfg.k) {
        return Err(Error::Dimension(format!("channel is {:?}, config expects ({}, {})", pair.h.shape(), cfg.m, cfg.k)));
    }
    Ok(pair)
}

fn run_rate(c: &RunConfig) -> Result<RunOutput> {
    let cfg = system_config(c)?;
    let pair = channel_pair(c, &cfg)?;
    let scheme: Scheme = c.get("layout.scheme").parse()?;
    let grouping = c.grouping("layout.grouping")?;
    let order = match (scheme, c.user_list("layout.order")?) {
        (_, Some(o)) => Some(o),
        (Scheme::Noma, None) => {
            let norms: Vec<f64> = (0..cfg.k).map(|u| pair.h_hat.column(u).norm_squared()).collect();
            Some(noma_order_by_norm(&norms))
        }
        _ => None,
    };
    let layout = build_stream_layout(scheme, cfg.k, grouping.as_deref(), order.as_deref())?;
    let private = match c.get("precoder.private") {
        "zf" => PrivateRule::Zf,
        "rzf" => PrivateRule::Rzf(None),
        "mrt" => PrivateRule::Mrt,
        other => return Err(RunConfig::bad("precoder.private", other, "zf, rzf or mrt")),
    };
    let common = match c.get("precoder.common") {
        "svd" => CommonRule::Svd,
        "mbf" => CommonRule::Mbf,
        "random" => CommonRule::Random,
        other => return Err(RunConfig::bad("precoder.common", other, "svd, mbf or random")),
    };
    let policy = match c.get("precoder.power") {
        "equal" => PrivatePolicy::Equal,
        "water-filling" => PrivatePolicy::WaterFilling,
        other => return Err(RunConfig::bad("precoder.power", other, "equal or water-filling")),
    };
    let tau = c.f64("precoder.tau")?;
    if !(0.0..=1.0).contains(&tau) {
        return Err(RunConfig::bad("precoder.tau", c.get("precoder.tau"), "a value in [0,1]"));
    }
    let sol = if scheme == Scheme::Noma {
        noma_closed_form(&layout, &pair.h_hat, &cfg, c.f64("precoder.beta")?)?
    } else {
        let dirs = closed_form_directions(&layout, &pair.h_hat, &cfg, private, common)?;
        assemble_solution(&layout, &dirs, PowerSplit { tau, private: policy }, &pair.h_hat, &cfg)?
    };
    let allocation = match c.get("rate.allocation") {
        "equal" => AllocationPolicy::Equal,
        "weighted" => AllocationPolicy::Weighted,
        "maxmin" => AllocationPolicy::MaxMin,
        other => return Err(RunConfig::bad("rate.allocation", other, "equal, weighted or maxmin")),
    };
    let report = with_policy(rate_downlink(&layout, &sol, &pair.h, &cfg)?, &layout, allocation, &cfg.weights);
    let summary = format!(
        "sum_rate {}\nmin_rate {}\ntotals {}\n",
        report.sum_rate,
        report.min_rate,
        report.totals.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")
    );
    Ok(RunOutput {
        artifacts: vec![
            Artifact { name: "rate.csv".into(), contents: report.to_csv() },
            Artifact { name: "layout.txt".into(), contents: layout.to_string() },
            Artifact { name: "channel.txt".into(), contents: write_pair(&pair) },
        ],
        summary,
        infeasible: false,
    })
}

fn run_solve(c: &RunConfig) -> Result<RunOutput> {
    let cfg = system_config(c)?;
    let pair = channel_pair(c, &cfg)?;
    let scheme: Scheme = c.get("layout.scheme").parse()?;
    let objective = match c.get("solver.objective") {
        "wsr" => Objective::Wsr,
        "mmf" => Objective::Mmf,
        other => return Err(RunConfig::bad("solver.objective", other, "wsr or mmf")),
    };
    let samples = c.usize("solver.samples")?;
    let csit = match c.get("solver.csit") {
        "perfect" => CsitMode::Perfect,
        "worst-case" => CsitMode::SampledWorstCase { delta: vec![c.f64("solver.delta")?; cfg.k], samples },
        "ergodic" => CsitMode::ErgodicSaa {
            alpha: c.f64("channel.alpha")?,
            samples,
            variances: c.f64_list("channel.variances")?,
        },
        other => return Err(RunConfig::bad("solver.csit", other, "perfect, worst-case or ergodic")),
    };
    let spec = c.solver_spec(objective)?.with_csit(csit);
    spec.validate()?;
    let order = match (scheme, c.user_list("layout.order")?) {
        (_, Some(o)) => Some(o),
        (Scheme::Noma, None) => {
            let norms: Vec<f64> = (0..cfg.k).map(|u| pair.h_hat.column(u).norm_squared()).collect();
            Some(noma_order_by_norm(&norms))
        }
        _ => None,
    };
    let layout = build_stream_layout(scheme, cfg.k, None, order.as_deref())?;
    let result = solve(&layout, &cfg, &pair.h_hat, &spec)?;
    let report = rate_downlink(&layout, &result.solution, &pair.h, &cfg)?;
    let mut summary = format!(
        "objective {}\nstatus {:?}\niterations {}\ncommon_power_fraction {}\n",
        result.objective,
        result.status,
        result.trace.len().saturating_sub(1),
        result.common_power_fraction(&layout, &cfg)
    );
    if spec.csit != CsitMode::Perfect {
        summary.push_str("note: rates under imperfect CSIT are sample-based estimates\n");
    }
    Ok(RunOutput {
        artifacts: vec![
            Artifact { name: "solve.csv".into(), contents: result.to_csv(&layout) },
            Artifact { name: "rate.csv".into(), contents: report.to_csv() },
            Artifact { name: "channel.txt".into(), contents: write_pair(&pair) },
        ],
        summary,
        infeasible: result.status == SolveStatus::Infeasible,
    })
}

fn run_dof(c: &RunConfig) -> Result<RunOutput> {
    use crate::analysis::{alpha_ratio, dof_closed_form, DofCsit, DofQuery};
    let scheme = c.get("dof.scheme").parse()?;
    let metric = c.get("dof.metric").parse()?;
    let csit = match c.get("dof.csit") {
        "perfect" => DofCsit::Perfect,
        "imperfect" => DofCsit::Imperfect(alpha_ratio(c.f64("dof.alpha")?)?),
        other => return Err(RunConfig::bad("dof.csit", other, "perfect or imperfect")),
    };
    let m = c.usize("dof.m")? as i64;
    let kk = c.usize("dof.k")? as i64;
    let groups = c.usize("dof.groups")? as i64;
    let mut g = c.usize("dof.group_size")? as i64;
    if g == 0 {
        if groups < 1 || kk % groups != 0 {
            return Err(Error::InvalidConfig("G·g=K required".into()));
        }
        g = kk / groups;
    }
    let q = DofQuery::new(scheme, metric, csit, m, kk).grouped(groups, g);
    let v = dof_closed_form(&q)?;
    let decimal = *v.numer() as f64 / *v.denom() as f64;
    let csv = format!("scheme,metric,csit,m,k,groups,group_size,dof,dof_exact\n{scheme},{metric},{},{m},{kk},{groups},{g},{decimal},{v}\n", c.get("dof.csit"));
    Ok(RunOutput {
        artifacts: vec![Artifact { name: "dof.csv".into(), contents: csv }],
        summary: format!("{decimal}\n"),
        infeasible: false,
    })
}

fn run_experiment(recipe: Recipe, c: &RunConfig) -> Result<RunOutput> {
    let artifacts = match recipe {
        Recipe::RateRegion => analysis::rate_region(&analysis::RateRegionParams {
            m: c.usize("system.m")?,
            snr_db: c.f64("system.snr_db")?,
            alpha: c.f64("channel.alpha")?,
            variances: c.f64_list("channel.variances")?.unwrap_or_default(),
            trials: c.usize("run.trials")?,
            samples: c.usize("run.samples")?,
            points: c.usize("run.points")?,
            schemes: c.schemes("run.schemes")?,
            seed: c.u64("run.seed")?,
            solver: c.solver_spec(Objective::Wsr)?,
        })?,
        Recipe::EsrVsAlpha => analysis::esr_vs_alpha(&analysis::EsrVsAlphaParams {
            m: c.usize("system.m")?,
            k: c.usize("system.k")?,
            snr_db: c.f64("system.snr_db")?,
            alphas: c.f64_list("run.alphas")?.unwrap_or_default(),
            variances: c.f64_list("channel.variances")?.unwrap_or_default(),
            trials: c.usize("run.trials")?,
            samples: c.usize("run.samples")?,
            schemes: c.schemes("run.schemes")?,
            seed: c.u64("run.seed")?,
            solver: c.solver_spec(Objective::Wsr)?,
        })?,
        Recipe::MmfVsSnr => analysis::mmf_vs_snr(&analysis::MmfVsSnrParams {
            m: c.usize("system.m")?,
            k: c.usize("system.k")?,
            alpha: c.f64("channel.alpha")?,
            snrs_db: c.f64_list("run.snrs_db")?.unwrap_or_default(),
            trials: c.usize("run.trials")?,
            samples: c.usize("run.samples")?,
            noma_betas: c.f64_list("run.noma_betas")?.unwrap_or_default(),
            seed: c.u64("run.seed")?,
            solver: c.solver_spec(Objective::Mmf)?,
        })?,
        Recipe::DofSlope => analysis::dof_slope(&analysis::DofSlopeParams {
            m: c.usize("system.m")?,
            k: c.usize("system.k")?,
            alpha: c.f64("channel.alpha")?,
            snrs_db: c.f64_list("run.snrs_db")?.unwrap_or_default(),
            top: c.usize("run.top")?,
            trials: c.usize("run.trials")?,
            seed: c.u64("run.seed")?,
        })?,
        Recipe::OverloadedQos => analysis::overloaded_qos(&analysis::OverloadedQosParams {
            m: c.usize("system.m")?,
            variances: c.f64_list("channel.variances")?.unwrap_or_default(),
            snrs_db: c.f64_list("run.snrs_db")?.unwrap_or_default(),
            qos_ladder: c.f64_list("run.qos_ladder")?.unwrap_or_default(),
            trials: c.usize("run.trials")?,
            schemes: c.schemes("run.schemes")?,
            top: c.usize("run.top")?,
            seed: c.u64("run.seed")?,
            solver: c.solver_spec(Objective::Wsr)?,
        })?,
        Recipe::UplinkRegion => analysis::uplink_region(&analysis::UplinkRegionParams {
            p1: c.f64("uplink.p1")?,
            p2: c.f64("uplink.p2")?,
            g1: c.f64("uplink.g1")?,
            g2: c.f64("uplink.g2")?,
            noise: c.f64("uplink.noise")?,
            points: c.usize("run.points")?,
        })?,
        Recipe::OperRegion => {
            let w = c.f64_list("system.weights")?.unwrap_or_else(|| vec![1.0, 1.0]);
            if w.len() != 2 {
                return Err(Error::InvalidConfig("system.weights: two weights required".into()));
            }
            analysis::oper_region(&analysis::OperRegionParams {
                grid: c.usize("run.grid")?,
                weights: [w[0], w[1]],
                epsilon: c.f64("region.epsilon")?,
                snr_db: c.f64("system.snr_db")?,
                solver: c.solver_spec(Objective::Wsr)?,
            })?
        }
    };
    let summary = artifacts.iter().map(|a| format!("wrote {}\n", a.name)).collect();
    Ok(RunOutput { artifacts, summary, infeasible: false })
}

/// Executes a resolved configuration without touching the file system.
pub fn execute(c: &RunConfig) -> Result<RunOutput> {
    match c.target {
        Target::Rate => run_rate(c),
        Target::Solve => run_solve(c),
        Target::Dof => run_dof(c),
        Target::Experiment(r) => run_experiment(r, c),
    }
}

/// Output directory for a run.
pub fn output_dir(c: &RunConfig) -> PathBuf {
    if let Some(dir) = &c.out {
        return dir.clone();
    }
    let root = std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("rsma-out"));
    root.join(c.target.name())
}

/// Writes artifacts, the resolved config and the manifest into `dir`.
pub fn write_run(dir: &Path, c: &RunConfig, output: &RunOutput, seconds: f64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let write = |name: &str, text: &str| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    };
    for a in &output.artifacts {
        write(&a.name, &a.contents)?;
    }
    write("config.resolved.toml", &c.to_toml())?;
    let names: Vec<String> = output.artifacts.iter().map(|a| format!("\"{}\"", a.name)).collect();
    let manifest = format!(
        "toolkit = \"rsma {}\"\nrecipe = \"{}\"\nseed = {}\nwall_time_s = {seconds:.3}\nartifacts = [{}]\nrerun = \"rsma run {} --config config.resolved.toml\"\nrates = \"bit/s/Hz, Gaussian signaling\"\n",
        env!("CARGO_PKG_VERSION"),
        c.target.name(),
        c.seed().map_or("\"none\"".to_string(), |s| s.to_string()),
        names.join(", "),
        c.target.name(),
    );
    write("manifest.toml", &manifest)
}

fn recipe_keys(t: Target) -> String {
    let mut out = format!("{}: {}\n", t.name(), t.description());
    for d in keys_for(t) {
        out.push_str(&format!("  {:<20} [{}] {}\n", d.key, d.default, d.doc));
    }
    out
}

fn keys_help() -> String {
    let mut out = String::from("Configuration keys (defaults in brackets):\n");
    for t in Target::all() {
        out.push('\n');
        out.push_str(&recipe_keys(t));
    }
    out
}

#[derive(Parser, Debug)]
#[command(name = "rsma", version, about = "Rate-splitting multiple access experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List recipes with one-line descriptions
    List {
        /// Also print every recipe's configuration keys
        #[arg(long)]
        keys: bool,
    },
    /// Run a recipe: `run <recipe> [--config FILE] [--out DIR] [--KEY VALUE]...`
    Run {
        recipe: String,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<String>,
    },
    /// A recipe name used directly as the subcommand
    #[command(external_subcommand)]
    Direct(Vec<String>),
}

/// Splits `--key value` and `--key=value` flags into pairs.
fn parse_flags(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        let body = a
            .strip_prefix("--")
            .ok_or_else(|| Error::InvalidConfig(format!("expected --key value, got '{a}'")))?;
        if let Some((k, v)) = body.split_once('=') {
            out.push((k.to_string(), v.to_string()));
            i += 1;
        } else {
            let v = args.get(i + 1).ok_or_else(|| Error::InvalidConfig(format!("missing value for --{body}")))?;
            out.push((body.to_string(), v.clone()));
            i += 2;
        }
    }
    Ok(out)
}

fn run_command(recipe: &str, args: &[String], stdout: &mut dyn Write) -> Result<i32> {
    let target = Target::parse(recipe)?;
    if args.iter().any(|a| a == "--help" || a == "-h") {
        write!(stdout, "usage: rsma run {} [--config FILE] [--out DIR] [--KEY VALUE]...\n\n{}", target.name(), recipe_keys(target))
            .map_err(Error::from)?;
        return Ok(EXIT_OK);
    }
    let mut flags = parse_flags(args)?;
    let mut file = None;
    if let Some(pos) = flags.iter().position(|(k, _)| k == "config") {
        let (_, path) = flags.remove(pos);
        file = Some(std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{path}: {e}")))?);
    }
    let config = RunConfig::resolve(target, file.as_deref(), &flags)?;
    let start = Instant::now();
    let output = execute(&config)?;
    let dir = output_dir(&config);
    write_run(&dir, &config, &output, start.elapsed().as_secs_f64())?;
    write!(stdout, "{}", output.summary).map_err(Error::from)?;
    log::info!("artifacts in {}", dir.display());
    Ok(if output.infeasible { EXIT_INFEASIBLE } else { EXIT_OK })
}

/// Entry point shared by the binary and tests. `argv[0]` is the program name.
pub fn main_with(argv: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let command = Cli::command().mut_subcommand("run", |c| c.after_long_help(keys_help()));
    let cli = match command.try_get_matches_from(argv).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if code == EXIT_OK {
                write!(stdout, "{}", e.render())
            } else {
                write!(stderr, "{}", e.render())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::List { keys } => {
            let mut text = String::new();
            for t in Target::recipes() {
                text.push_str(&format!("{:<16} {}\n", t.name(), t.description()));
            }
            if keys {
                text.push('\n');
                text.push_str(&keys_help());
            }
            write!(stdout, "{text}").map(|_| EXIT_OK).map_err(Error::from)
        }
        Command::Run { recipe, args } => run_command(&recipe, &args, stdout),
        Command::Direct(mut args) => {
            let recipe = args.remove(0);
            run_command(&recipe, &args, stdout)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
