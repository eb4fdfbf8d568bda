//! Deterministic-equivalent fixed points.
//!
//! Every problem here has the form
//!
//! ```text
//! T = ( Σ_{p ∉ excl} w_p / (1 + δ_p) I + S + ρ I )^-1,    δ_m = w_m Tr T
//! ```
//!
//! with scalar weights, so `T` commutes with `S` and is diagonal in its
//! eigenbasis. The shift is therefore carried as its spectrum and all traces
//! reduce to sums over eigenvalues. Traces are unnormalized (no 1/M).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::linalg::{hermitian_eigenvalues, MAX_CONDITION};
use crate::rng::complex_normal_matrix;
use crate::{CMat, Error, Result, C64};

/// Spectrum of a Hermitian nonnegative-definite M×M shift matrix. Only the
/// nonzero part is stored; the remaining `m - lambdas.len()` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Shift {
    pub m: usize,
    pub lambdas: Vec<f64>,
}

impl Shift {
    pub fn zero(m: usize) -> Self {
        Self {
            m,
            lambdas: Vec::new(),
        }
    }

    /// `S = scale · F F^H` for a tall M×r factor, via the r×r Gram matrix.
    pub fn from_gram_factor(f: &CMat, scale: f64) -> Self {
        let m = f.nrows();
        if f.ncols() == 0 || scale == 0.0 {
            return Self::zero(m);
        }
        let gram = f.adjoint() * f;
        let lambdas = hermitian_eigenvalues(&gram)
            .into_iter()
            .map(|l| (scale * l).max(0.0))
            .collect();
        Self { m, lambdas }
    }

    /// General Hermitian nonnegative-definite shift.
    pub fn from_hermitian(s: &CMat) -> Result<Self> {
        if s.nrows() != s.ncols() {
            return Err(Error::Dimension("shift must be square".into()));
        }
        let eig = hermitian_eigenvalues(s);
        let tol = 1e-10 * eig.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        if eig.iter().any(|&l| l < -tol) {
            return Err(Error::InvalidArgument(
                "shift is not nonnegative definite".into(),
            ));
        }
        Ok(Self {
            m: s.nrows(),
            lambdas: eig.into_iter().map(|l| l.max(0.0)).collect(),
        })
    }

    pub fn from_eigenvalues(m: usize, lambdas: Vec<f64>) -> Self {
        assert!(lambdas.len() <= m);
        Self { m, lambdas }
    }

    /// `Tr (a I + S)^-1` and `Tr (a I + S)^-2`.
    fn traces(&self, a: f64) -> (f64, f64) {
        let zeros = (self.m - self.lambdas.len()) as f64;
        let mut t1 = zeros / a;
        let mut t2 = zeros / (a * a);
        for &l in &self.lambdas {
            let r = 1.0 / (a + l);
            t1 += r;
            t2 += r * r;
        }
        (t1, t2)
    }

    fn condition(&self, a: f64) -> f64 {
        let max = self.lambdas.iter().fold(0.0f64, |x, &y| x.max(y));
        let min = if self.lambdas.len() < self.m {
            0.0
        } else {
            self.lambdas.iter().fold(f64::INFINITY, |x, &y| x.min(y))
        };
        (a + max) / (a + min)
    }
}

#[derive(Debug, Clone)]
pub struct DeProblem {
    /// Full weight list; entries in `exclusions` are dropped from the sum.
    pub weights: Vec<f64>,
    pub shift: Shift,
    pub rho: f64,
    pub exclusions: Vec<usize>,
}

impl DeProblem {
    pub fn new(weights: Vec<f64>, shift: Shift, rho: f64) -> Self {
        Self {
            weights,
            shift,
            rho,
            exclusions: Vec::new(),
        }
    }

    pub fn excluding(&self, idx: &[usize]) -> Self {
        let mut p = self.clone();
        p.exclusions.extend_from_slice(idx);
        p.exclusions.sort_unstable();
        p.exclusions.dedup();
        p
    }

    pub fn with_shift(&self, shift: Shift) -> Self {
        Self {
            shift,
            ..self.clone()
        }
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        Self {
            rho,
            ..self.clone()
        }
    }

    fn active(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|i| !self.exclusions.contains(i))
            .collect()
    }

    fn label(&self) -> String {
        if self.exclusions.is_empty() {
            "no leave-out".into()
        } else {
            format!("leave-out {:?}", self.exclusions)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if let Some(&e) = self.exclusions.iter().find(|&&e| e >= self.weights.len()) {
            return Err(Error::InvalidArgument(format!(
                "exclusion {e} out of range"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DeSolution {
    /// Indices of the weights that entered the sum.
    pub active: Vec<usize>,
    /// Active weights, aligned with `active`.
    pub weights: Vec<f64>,
    /// Converged δ for each active weight.
    pub delta: Vec<f64>,
    /// Scalar load `Σ w/(1+δ) + ρ`; `T = (load I + S)^-1`.
    pub load: f64,
    /// `Tr T`.
    pub mu: f64,
    /// `Tr T²`.
    pub trace_t2: f64,
    pub iterations: usize,
    pub residual: f64,
    pub shift: Shift,
}

impl DeSolution {
    /// Eigenvalues of `T`, zero-eigenvalue block of S last.
    pub fn resolvent_spectrum(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .shift
            .lambdas
            .iter()
            .map(|l| 1.0 / (self.load + l))
            .collect();
        v.resize(self.shift.m, 1.0 / self.load);
        v
    }

    /// δ of the original weight index `idx`, if it was active.
    pub fn delta_of(&self, idx: usize) -> Option<f64> {
        self.active
            .iter()
            .position(|&a| a == idx)
            .map(|p| self.delta[p])
    }
}

/// Solution of `(I - J) δ' = v` and the induced `μ' = Tr T'`.
#[derive(Debug, Clone)]
pub struct DePrime {
    pub delta_prime: Vec<f64>,
    pub mu_prime: f64,
    pub spectral_radius: f64,
}

/// Iterate `δ_m ← w_m Tr T(δ)` from `δ⁰ = 1/ρ`.
pub fn solve_delta(problem: &DeProblem, tol: f64, max_iter: usize) -> Result<DeSolution> {
    problem.validate()?;
    let active = problem.active();
    let w: Vec<f64> = active.iter().map(|&i| problem.weights[i]).collect();
    let load = |delta: &[f64]| -> f64 {
        w.iter().zip(delta).map(|(w, d)| w / (1.0 + d)).sum::<f64>() + problem.rho
    };

    let mut delta = vec![1.0 / problem.rho; w.len()];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    if w.is_empty() {
        residual = 0.0;
    }
    while residual > tol {
        if iterations >= max_iter {
            return Err(Error::NoConvergence {
                context: problem.label(),
                iterations,
                residual,
            });
        }
        let a = load(&delta);
        let (t1, _) = problem.shift.traces(a);
        residual = 0.0;
        for (d, wm) in delta.iter_mut().zip(&w) {
            let next = wm * t1;
            residual = residual.max((next - *d).abs() / (1.0 + next));
            *d = next;
        }
        iterations += 1;
    }

    let a = load(&delta);
    let condition = problem.shift.condition(a);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned {
            condition,
            limit: MAX_CONDITION,
        });
    }
    let (mu, trace_t2) = problem.shift.traces(a);
    Ok(DeSolution {
        active,
        weights: w,
        delta,
        load: a,
        mu,
        trace_t2,
        iterations,
        residual,
        shift: problem.shift.clone(),
    })
}

/// Derivative system. `δ'_p = -dδ_p/dρ`, so `μ' = -dμ/dρ = Tr T'` with
/// `T' = T² + T (Σ_q w_q δ'_q/(1+δ_q)²) T`.
pub fn solve_delta_prime(solution: &DeSolution) -> Result<DePrime> {
    let n = solution.weights.len();
    let t2 = solution.trace_t2;
    if n == 0 {
        return Ok(DePrime {
            delta_prime: Vec::new(),
            mu_prime: t2,
            spectral_radius: 0.0,
        });
    }
    let w = &solution.weights;
    let d = &solution.delta;
    let j = DMatrix::from_fn(n, n, |p, q| {
        w[p] * w[q] * t2 / ((1.0 + d[q]) * (1.0 + d[q]))
    });
    let v = DVector::from_fn(n, |p, _| w[p] * t2);

    // J = x y^T is rank one, so its spectral radius is y·x.
    let spectral_radius: f64 = (0..n)
        .map(|q| w[q] * w[q] * t2 / ((1.0 + d[q]) * (1.0 + d[q])))
        .sum();
    if spectral_radius >= 1.0 {
        return Err(Error::SingularDerivative {
            context: format!("{n} active weights"),
            spectral_radius,
        });
    }
    let system = DMatrix::identity(n, n) - j;
    let delta_prime = system
        .lu()
        .solve(&v)
        .ok_or_else(|| Error::SingularDerivative {
            context: format!("{n} active weights"),
            spectral_radius,
        })?;
    let inner: f64 = (0..n)
        .map(|q| w[q] * delta_prime[q] / ((1.0 + d[q]) * (1.0 + d[q])))
        .sum();
    Ok(DePrime {
        delta_prime: delta_prime.iter().copied().collect(),
        mu_prime: t2 * (1.0 + inner),
        spectral_radius,
    })
}

/// Solve both systems, tagging errors with `label`.
pub fn solve_full(
    problem: &DeProblem,
    tol: f64,
    max_iter: usize,
    label: &str,
) -> Result<(DeSolution, DePrime)> {
    let sol = solve_delta(problem, tol, max_iter).map_err(|e| e.with_context(label))?;
    let prime = solve_delta_prime(&sol).map_err(|e| e.with_context(label))?;
    Ok((sol, prime))
}

/// Empirical `Tr R^-1` and `Tr R^-2` averaged over draws of
/// `R = Σ_m x_m x_m^H + diag(λ) + ρ I`, `x_m ~ CN(0, w_m I)`.
pub fn resolvent_trace_mc_oracle<R: Rng + ?Sized>(
    problem: &DeProblem,
    num_draws: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    problem.validate()?;
    let m = problem.shift.m;
    let active = problem.active();
    let mut base = CMat::identity(m, m) * C64::new(problem.rho, 0.0);
    for (i, &l) in problem.shift.lambdas.iter().enumerate() {
        base[(i, i)] += C64::new(l, 0.0);
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..num_draws {
        let mut r = base.clone();
        for &idx in &active {
            let x = complex_normal_matrix(rng, m, 1, problem.weights[idx]);
            r += &x * x.adjoint();
        }
        let inv = crate::linalg::HpdFactor::new(r)?.inverse();
        s1 += inv.trace().re;
        s2 += crate::linalg::fro2(&inv);
    }
    let n = num_draws as f64;
    Ok((s1 / n, s2 / n))
}
