//! Small complex linear-algebra helpers shared by the rate engine, the
//! precoder designs and the optimizer.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `hᴴ p`.
#[inline]
pub fn inner(h: &CVector, p: &CVector) -> Complex64 {
    h.iter()
        .zip(p.iter())
        .fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
}

/// `|hᴴ p|²`.
#[inline]
pub fn gain(h: &CVector, p: &CVector) -> f64 {
    inner(h, p).norm_sqr()
}

pub fn norm_sqr(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn column(h: &CMatrix, k: usize) -> CVector {
    h.column(k).into_owned()
}

pub fn zeros(m: usize) -> CVector {
    CVector::zeros(m)
}

/// Unit vector along the first axis.
pub fn e1(m: usize) -> CVector {
    let mut v = CVector::zeros(m);
    v[0] = Complex64::new(1.0, 0.0);
    v
}

/// Scales `v` to unit norm; `None` for a (numerically) zero vector.
pub fn normalized(v: &CVector) -> Option<CVector> {
    let n = norm_sqr(v).sqrt();
    if n > 0.0 && n.is_finite() {
        Some(v.map(|z| z / n))
    } else {
        None
    }
}

/// Rotates `v` so its first entry with non-negligible magnitude is real and positive.
pub fn fix_phase(v: &CVector) -> CVector {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    match v.iter().find(|z| z.norm() > 1e-12 * scale) {
        Some(z) => {
            let rot = z.conj() / z.norm();
            v.map(|x| x * rot)
        }
        None => v.clone(),
    }
}

/// Builds an `M×K` matrix from column vectors.
pub fn from_columns(cols: &[CVector]) -> CMatrix {
    let m = cols.first().map_or(0, |c| c.len());
    CMatrix::from_fn(m, cols.len(), |i, j| cols[j][i])
}
