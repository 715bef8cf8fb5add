//! Channel ensembles, CSIT error models and deterministic test geometries.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, CVector};

/// Speed of light used for Doppler computations (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// How the transmitter-side estimate relates to the true channel.
#[derive(Debug, Clone, PartialEq)]
pub enum CsitModel {
    Perfect,
    /// Error variance scales as `P_ref^{-α}`.
    ScaledError { alpha: f64, p_ref: f64 },
    /// Per-user error norm bounded by `δ_k`.
    BoundedError { delta: Vec<f64> },
    /// Outdated estimate with time correlation `ε`.
    Jakes { eps: f64 },
}

impl fmt::Display for CsitModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CsitModel::Perfect => write!(f, "perfect"),
            CsitModel::ScaledError { alpha, p_ref } => {
                write!(f, "scaled-error alpha={alpha:?} p={p_ref:?}")
            }
            CsitModel::BoundedError { delta } => {
                let d: Vec<String> = delta.iter().map(|d| format!("{d:?}")).collect();
                write!(f, "bounded-error delta={}", d.join(","))
            }
            CsitModel::Jakes { eps } => write!(f, "jakes eps={eps:?}"),
        }
    }
}

impl FromStr for CsitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let kind = parts.next().unwrap_or("");
        let mut kv = std::collections::BTreeMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad model field '{p}'")))?;
            kv.insert(k, v);
        }
        let num = |key: &str| -> Result<f64> {
            kv.get(key)
                .ok_or_else(|| Error::Parse(format!("model field '{key}' missing")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("model field '{key}': {e}")))
        };
        match kind {
            "perfect" => Ok(CsitModel::Perfect),
            "scaled-error" => Ok(CsitModel::ScaledError { alpha: num("alpha")?, p_ref: num("p")? }),
            "bounded-error" => {
                let raw = kv.get("delta").ok_or_else(|| Error::Parse("delta missing".into()))?;
                let delta = raw
                    .split(',')
                    .map(|d| d.parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                Ok(CsitModel::BoundedError { delta })
            }
            "jakes" => Ok(CsitModel::Jakes { eps: num("eps")? }),
            _ => Err(Error::Parse(format!("unknown channel model '{kind}'"))),
        }
    }
}

/// True channel, transmitter estimate and the model that links them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    /// `M×K`, column `k` is `h_k`.
    pub h: CMatrix,
    pub h_hat: CMatrix,
    pub model: CsitModel,
    pub seed: u64,
}

impl ChannelPair {
    pub fn perfect(h: CMatrix) -> Self {
        ChannelPair { h_hat: h.clone(), h, model: CsitModel::Perfect, seed: 0 }
    }

    pub fn antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn users(&self) -> usize {
        self.h.ncols()
    }
}

/// Per-user variances, trial count and base seed of a Rayleigh ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEnsembleSpec {
    pub variances: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl ChannelEnsembleSpec {
    pub fn iid(k: usize, trials: usize, seed: u64) -> Self {
        ChannelEnsembleSpec { variances: vec![1.0; k], trials, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("channel variances >0 required".into()));
        }
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trial count ≥1 required".into()));
        }
        Ok(())
    }
}

/// Generator for trial `trial` of an ensemble seeded with `seed`. Each trial
/// gets its own ChaCha stream, so results do not depend on evaluation order.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Circular complex Gaussian with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(s * re, s * im)
}

/// `M×K` matrix whose column `k` has i.i.d. entries of variance `variances[k]`.
pub fn rayleigh_matrix<R: Rng + ?Sized>(rng: &mut R, m: usize, variances: &[f64]) -> CMatrix {
    let k = variances.len();
    let mut h = CMatrix::zeros(m, k);
    for j in 0..k {
        for i in 0..m {
            h[(i, j)] = complex_gaussian(rng, variances[j]);
        }
    }
    h
}

/// Trial `trial` of a Rayleigh ensemble.
pub fn sample_rayleigh(spec: &ChannelEnsembleSpec, m: usize, trial: u64) -> CMatrix {
    rayleigh_matrix(&mut trial_rng(spec.seed, trial), m, &spec.variances)
}

/// Fraction of channel variance carried by the estimation error, `min(1, P^{-α})`.
pub fn scaled_error_fraction(alpha: f64, power: f64) -> f64 {
    power.powf(-alpha).min(1.0)
}

/// Adds an error of variance `σ²_k·min(1, P^{-α})` to each column of `h_hat`.
pub fn apply_scaled_error<R: Rng + ?Sized>(
    rng: &mut R,
    h_hat: &CMatrix,
    variances: &[f64],
    alpha: f64,
    power: f64,
) -> ChannelPair {
    let e = scaled_error_fraction(alpha, power);
    let (m, k) = h_hat.shape();
    let err_var: Vec<f64> = (0..k).map(|j| variances[j] * e).collect();
    let h = h_hat + rayleigh_matrix(rng, m, &err_var);
    ChannelPair {
        h,
        h_hat: h_hat.clone(),
        model: CsitModel::ScaledError { alpha, p_ref: power },
        seed: 0,
    }
}

/// Trial `trial` of the scaled-error model: the estimate carries variance
/// `σ²_k(1 − e)` and the error `σ²_k e`, so the true channel keeps `σ²_k`.
pub fn sample_scaled_error_pair(
    spec: &ChannelEnsembleSpec,
    m: usize,
    alpha: f64,
    power: f64,
    trial: u64,
) -> ChannelPair {
    let mut rng = trial_rng(spec.seed, trial);
    let e = scaled_error_fraction(alpha, power);
    let est_var: Vec<f64> = spec.variances.iter().map(|v| v * (1.0 - e)).collect();
    let h_hat = rayleigh_matrix(&mut rng, m, &est_var);
    let mut pair = apply_scaled_error(&mut rng, &h_hat, &spec.variances, alpha, power);
    pair.seed = spec.seed;
    pair
}

/// True channels drawn uniformly from balls of radius `δ_k` around the estimate.
pub fn apply_bounded_error<R: Rng + ?Sized>(
    rng: &mut R,
    h_hat: &CMatrix,
    delta: &[f64],
) -> ChannelPair {
    let (m, k) = h_hat.shape();
    let mut h = h_hat.clone();
    for j in 0..k {
        let dir = random_unit(rng, m);
        let r = delta[j] * rng.random::<f64>().powf(1.0 / (2 * m) as f64);
        for i in 0..m {
            h[(i, j)] += dir[i] * r;
        }
    }
    ChannelPair { h, h_hat: h_hat.clone(), model: CsitModel::BoundedError { delta: delta.to_vec() }, seed: 0 }
}

/// Uniformly distributed unit vector in `C^m`.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, m: usize) -> CVector {
    loop {
        let v = CVector::from_fn(m, |_, _| complex_gaussian(rng, 1.0));
        if let Some(u) = crate::linalg::normalized(&v) {
            return u;
        }
    }
}

/// Doppler frequency in Hz for speed `v` (m/s) and carrier `f_c` (Hz).
pub fn doppler(v: f64, f_c: f64) -> f64 {
    v * f_c / SPEED_OF_LIGHT
}

/// Jakes time-correlation coefficient `J₀(2π f_D T)`.
pub fn jakes_correlation(v: f64, f_c: f64, t: f64) -> f64 {
    libm::j0(2.0 * std::f64::consts::PI * doppler(v, f_c) * t)
}

/// Outdated-CSIT pair: the transmitter holds `H_prev`, the channel has
/// evolved to `ε H_prev + √(1−ε²) E` with unit-variance `H_prev` and `E`.
pub fn sample_jakes_pair(
    v: f64,
    f_c: f64,
    t: f64,
    spec: &ChannelEnsembleSpec,
    m: usize,
    trial: u64,
) -> Result<ChannelPair> {
    if !(v >= 0.0) {
        return Err(Error::InvalidConfig("speed ≥0 required".into()));
    }
    let eps = jakes_correlation(v, f_c, t);
    let mut rng = trial_rng(spec.seed, trial);
    let k = spec.variances.len();
    let unit = vec![1.0; k];
    let h_prev = rayleigh_matrix(&mut rng, m, &unit);
    let e = rayleigh_matrix(&mut rng, m, &unit);
    let h = if eps == 1.0 {
        h_prev.clone()
    } else {
        h_prev.map(|z| z * eps) + e.map(|z| z * (1.0 - eps * eps).sqrt())
    };
    Ok(ChannelPair { h, h_hat: h_prev, model: CsitModel::Jakes { eps }, seed: spec.seed })
}

/// Two-user, two-antenna geometry with `h₁ = [1, 1]ᴴ/√2` and
/// `h₂ = γ[1, e^{jθ}]ᴴ/√2`, `γ = 10^{γ_dB/20}`. Returns the channel and `ρ`.
pub fn deterministic_two_user(gamma_db: f64, theta: f64) -> (CMatrix, f64) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let g = 10f64.powf(gamma_db / 20.0);
    let e = Complex64::from_polar(1.0, theta).conj();
    let h = CMatrix::from_row_slice(2, 2, &[c64(s, 0.0), c64(g * s, 0.0), c64(s, 0.0), e * (g * s)]);
    (h.clone(), orthogonality(&h))
}

/// `1 − |h₁ᴴh₂|²/(‖h₁‖²‖h₂‖²)` for the first two columns.
pub fn orthogonality(h: &CMatrix) -> f64 {
    let h1 = h.column(0);
    let h2 = h.column(1);
    let ip = h1.dotc(&h2).norm_sqr();
    1.0 - ip / (h1.norm_squared() * h2.norm_squared())
}

/// Inverts `ρ(θ)` on `[0, π]`: `θ = arccos(1 − 2ρ)`.
pub fn theta_from_rho(rho: f64) -> f64 {
    (1.0 - 2.0 * rho).clamp(-1.0, 1.0).acos()
}

/// One matrix in the plain-text dump format.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDump {
    pub name: String,
    pub model: String,
    pub matrix: CMatrix,
}

const DUMP_MAGIC: &str = "rsma-matrix v1";

/// Writes matrices row-major, one `re,im` token per entry. Floats use the
/// shortest round-trip representation so parsing restores them exactly.
pub fn write_matrices(dumps: &[MatrixDump]) -> String {
    let mut out = String::new();
    for d in dumps {
        let (rows, cols) = d.matrix.shape();
        out.push_str(DUMP_MAGIC);
        out.push('\n');
        out.push_str(&format!("name {}\nmodel {}\nrows {rows}\ncols {cols}\n", d.name, d.model));
        for i in 0..rows {
            let row: Vec<String> = (0..cols)
                .map(|j| {
                    let z = d.matrix[(i, j)];
                    format!("{:?},{:?}", z.re, z.im)
                })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn read_matrices(text: &str) -> Result<Vec<MatrixDump>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
    let mut out = Vec::new();
    let header = |line: Option<&str>, key: &str| -> Result<String> {
        let line = line.ok_or_else(|| Error::Parse(format!("missing '{key}' line")))?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(|r| r.to_string())
            .ok_or_else(|| Error::Parse(format!("expected '{key}', found '{line}'")))
    };
    while let Some(first) = lines.next() {
        if first.trim() != DUMP_MAGIC {
            return Err(Error::Parse(format!("expected '{DUMP_MAGIC}', found '{first}'")));
        }
        let name = header(lines.next(), "name")?;
        let model = header(lines.next(), "model")?;
        let parse_dim = |s: String| s.trim().parse::<usize>().map_err(|e| Error::Parse(e.to_string()));
        let rows = parse_dim(header(lines.next(), "rows")?)?;
        let cols = parse_dim(header(lines.next(), "cols")?)?;
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing row {i}")))?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != cols {
                return Err(Error::Parse(format!("row {i} has {} entries, expected {cols}", tokens.len())));
            }
            for t in tokens {
                let (re, im) = t.split_once(',').ok_or_else(|| Error::Parse(format!("bad entry '{t}'")))?;
                let p = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")));
                data.push(c64(p(re)?, p(im)?));
            }
        }
        out.push(MatrixDump { name, model, matrix: CMatrix::from_row_slice(rows, cols, &data) });
    }
    Ok(out)
}

/// Dumps both matrices of a pair.
pub fn write_pair(pair: &ChannelPair) -> String {
    let model = pair.model.to_string();
    write_matrices(&[
        MatrixDump { name: "H".into(), model: model.clone(), matrix: pair.h.clone() },
        MatrixDump { name: "H_hat".into(), model, matrix: pair.h_hat.clone() },
    ])
}

pub fn read_pair(text: &str) -> Result<ChannelPair> {
    let dumps = read_matrices(text)?;
    let find = |n: &str| {
        dumps
            .iter()
            .find(|d| d.name == n)
            .ok_or_else(|| Error::Parse(format!("matrix '{n}' missing")))
    };
    let h = find("H")?;
    let h_hat = find("H_hat")?;
    if h.matrix.shape() != h_hat.matrix.shape() {
        return Err(Error::Dimension("H and H_hat shapes differ".into()));
    }
    Ok(ChannelPair {
        h: h.matrix.clone(),
        h_hat: h_hat.matrix.clone(),
        model: h.model.parse()?,
        seed: 0,
    })
}
