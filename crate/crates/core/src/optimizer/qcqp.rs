//! Log-barrier interior-point solver for small convex problems with a linear
//! objective and convex quadratic constraints.
//!
//! Every quadratic term is `Σ_b x_bᵀ A x_b` over equally sized variable
//! blocks `x_b` sharing one PSD matrix `A`, which is how rate surrogates and
//! the power budget look after the real embedding of complex precoders.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

/// `f(x) = lin·x + constant + Σ_{b ∈ blocks} x_bᵀ A x_b ≤ 0`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub lin: Vec<(usize, f64)>,
    pub constant: f64,
    pub quad: Option<Quad>,
}

#[derive(Debug, Clone)]
pub struct Quad {
    pub mat: Arc<DMatrix<f64>>,
    /// Start offsets of the blocks the matrix applies to.
    pub blocks: Vec<usize>,
}

impl Constraint {
    pub fn linear(lin: Vec<(usize, f64)>, constant: f64) -> Self {
        Constraint { lin, constant, quad: None }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.constant;
        for &(i, a) in &self.lin {
            v += a * x[i];
        }
        if let Some(q) = &self.quad {
            let d = q.mat.nrows();
            for &b in &q.blocks {
                let xb = x.rows(b, d);
                v += xb.dot(&(&*q.mat * xb));
            }
        }
        v
    }

    fn gradient_into(&self, x: &DVector<f64>, g: &mut DVector<f64>) {
        g.fill(0.0);
        for &(i, a) in &self.lin {
            g[i] += a;
        }
        if let Some(q) = &self.quad {
            let d = q.mat.nrows();
            for &b in &q.blocks {
                let ax = &*q.mat * x.rows(b, d);
                for r in 0..d {
                    g[b + r] += 2.0 * ax[r];
                }
            }
        }
    }

    fn add_hessian(&self, scale: f64, h: &mut DMatrix<f64>) {
        if let Some(q) = &self.quad {
            let d = q.mat.nrows();
            for &b in &q.blocks {
                let mut view = h.view_mut((b, b), (d, d));
                view += &*q.mat * (2.0 * scale);
            }
        }
    }
}

/// Minimize `objective·x` subject to every constraint.
#[derive(Debug, Clone)]
pub struct Problem {
    pub n: usize,
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Stop when the duality-gap bound `m/t` drops below this.
    pub gap: f64,
    pub mu: f64,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions { gap: 1e-8, mu: 20.0, max_newton: 80 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BarrierOutcome {
    Solved(DVector<f64>),
    /// Phase I could not find a strictly feasible point.
    Infeasible,
    Failed(String),
}

impl Problem {
    fn objective_value(&self, x: &DVector<f64>) -> f64 {
        self.objective.iter().map(|&(i, c)| c * x[i]).sum()
    }

    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        self.constraints.iter().map(|c| c.value(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn barrier(&self, x: &DVector<f64>, t: f64) -> Option<f64> {
        let mut phi = t * self.objective_value(x);
        for c in &self.constraints {
            let f = c.value(x);
            if !(f < 0.0) {
                return None;
            }
            phi -= (-f).ln();
        }
        Some(phi)
    }

    /// Newton centering at barrier weight `t`; `stop` ends early when it returns true.
    fn center(
        &self,
        x: &mut DVector<f64>,
        t: f64,
        opts: &BarrierOptions,
        stop: &dyn Fn(&DVector<f64>) -> bool,
    ) -> Result<bool, String> {
        let n = self.n;
        let mut g = DVector::zeros(n);
        for _ in 0..opts.max_newton {
            let mut grad = DVector::zeros(n);
            for &(i, c) in &self.objective {
                grad[i] += t * c;
            }
            let mut hess = DMatrix::zeros(n, n);
            for c in &self.constraints {
                let f = c.value(x);
                if !(f < 0.0) {
                    return Err("iterate left the feasible region".into());
                }
                c.gradient_into(x, &mut g);
                let inv = -1.0 / f;
                grad.axpy(inv, &g, 1.0);
                hess.ger(inv * inv, &g, &g, 1.0);
                c.add_hessian(inv, &mut hess);
            }
            let step = solve_pd(&hess, &(-&grad)).ok_or("singular Newton system")?;
            let decrement = -grad.dot(&step);
            if decrement / 2.0 < 1e-11 {
                return Ok(false);
            }
            let phi0 = self.barrier(x, t).ok_or("infeasible start")?;
            let mut a = 1.0;
            loop {
                let trial = &*x + &step * a;
                if let Some(phi) = self.barrier(&trial, t) {
                    if phi <= phi0 - 0.25 * a * decrement {
                        *x = trial;
                        break;
                    }
                }
                a *= 0.5;
                if a < 1e-14 {
                    return Ok(false);
                }
            }
            if stop(x) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn run(
        &self,
        mut x: DVector<f64>,
        opts: &BarrierOptions,
        stop: &dyn Fn(&DVector<f64>) -> bool,
    ) -> Result<(DVector<f64>, bool), String> {
        let m = self.constraints.len().max(1) as f64;
        let mut t = 1.0;
        loop {
            if self.center(&mut x, t, opts, stop)? {
                return Ok((x, true));
            }
            if m / t < opts.gap {
                return Ok((x, false));
            }
            t *= opts.mu;
        }
    }

    /// Barrier method from `x0`, with a phase-I search when `x0` is not strictly feasible.
    pub fn solve(&self, x0: &DVector<f64>, opts: &BarrierOptions) -> BarrierOutcome {
        let mut x = x0.clone();
        let worst = self.max_violation(&x);
        if !(worst < 0.0) {
            match self.phase_one(&x, opts) {
                Some(feasible) => x = feasible,
                None => return BarrierOutcome::Infeasible,
            }
        }
        match self.run(x, opts, &|_| false) {
            Ok((x, _)) => BarrierOutcome::Solved(x),
            Err(e) => BarrierOutcome::Failed(e),
        }
    }

    /// Minimizes a slack `s` with `f_i(x) ≤ s`, stopping once every constraint is strictly satisfied.
    fn phase_one(&self, x0: &DVector<f64>, opts: &BarrierOptions) -> Option<DVector<f64>> {
        let n = self.n;
        let worst = self.max_violation(x0);
        if !worst.is_finite() {
            return None;
        }
        let mut constraints: Vec<Constraint> = self
            .constraints
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.lin.push((n, -1.0));
                c
            })
            .collect();
        constraints.push(Constraint::linear(vec![(n, -1.0)], -1.0 - worst.abs()));
        let aug = Problem { n: n + 1, objective: vec![(n, 1.0)], constraints };
        let mut start = x0.clone().resize_vertically(n + 1, 0.0);
        start[n] = worst + 1.0;
        let margin = 1e-10;
        let done = |x: &DVector<f64>| x[n] < -margin && self.max_violation(&x.rows(0, n).into_owned()) < 0.0;
        match aug.run(start, opts, &done) {
            Ok((x, _)) => {
                let xs = x.rows(0, n).into_owned();
                if self.max_violation(&xs) < 0.0 {
                    Some(xs)
                } else {
                    None
                }
            }
            Err(_) => None,
        }
    }
}

/// Solves `H d = r` for symmetric positive (semi)definite `H`, adding a
/// growing ridge when the plain Cholesky factorization fails.
fn solve_pd(h: &DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..12 {
        let mut m = h.clone();
        if ridge > 0.0 {
            for i in 0..n {
                m[(i, i)] += ridge;
            }
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(r);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 100.0 };
    }
    None
}
