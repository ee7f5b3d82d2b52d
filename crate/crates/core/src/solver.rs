//! Newton centering on the primal-dual optimality system.
//!
//! For `mu > 0` the central path point `(x(mu), s(mu), y(mu))` is the unique
//! root of
//!
//! ```text
//!     F(x, s, y, mu) = ( A'y - c,  Ax + s - b,  Sy - mu e ) = 0,   s, y > 0.
//! ```
//!
//! From a feasible start (`Ax + s = b`) the Newton system reduces to the
//! positive definite normal equations `A' S^-1 Y A dx = c - mu A' S^-1 e`,
//! followed by `ds = -A dx` and `dy = mu S^-1 e - y - S^-1 Y ds`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::model::{CenteredPoint, PathProblem};
use crate::numeric;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("{0} must be strictly positive")]
    Domain(&'static str),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("normal matrix is not positive definite")]
    Singular,
    #[error("start point is not strictly feasible (min slack {0:e})")]
    InfeasibleStart(f64),
    #[error("no convergence at mu = {mu:e} after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        mu: f64,
        iterations: usize,
        residual: f64,
        last: Box<CenteredPoint>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Fraction of the distance to the boundary a step may cover, in (0, 1).
    pub omega: f64,
    /// Stopping tolerance on `max(||F||, alpha ||dx||)`.
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            omega: 0.9,
            epsilon: 1e-9,
            max_iters: 200,
        }
    }
}

impl SolverConfig {
    pub fn new(omega: f64, epsilon: f64, max_iters: usize) -> Result<Self, SolverError> {
        let cfg = SolverConfig {
            omega,
            epsilon,
            max_iters,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), SolverError> {
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(SolverError::Config(format!("omega {} not in (0, 1)", self.omega)));
        }
        if !(self.epsilon > 0.0) {
            return Err(SolverError::Config(format!("epsilon {} not positive", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(SolverError::Config("max_iters must be positive".into()));
        }
        Ok(())
    }

    /// Effective stopping tolerance at `mu` for duals `y`.
    ///
    /// Floored at the rounding granularity of the residual blocks, whose
    /// terms are of size `mu` (complementarity), `max|A_ij| ||y||_inf`
    /// (dual) and `||b||_inf` (primal); below that floor `||F||` cannot be
    /// driven down in f64.
    pub fn tolerance(&self, p: &PathProblem, y: &DVector<f64>, mu: f64) -> f64 {
        let ulps = 8.0 * (y.len().max(1) as f64).sqrt();
        let scale = mu.max(p.a().amax() * y.amax()).max(p.b().amax());
        self.epsilon.max(ulps * f64::EPSILON * scale)
    }
}

/// A primal-dual triple `(x, s, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: DVector<f64>,
    pub s: DVector<f64>,
    pub y: DVector<f64>,
}

/// Stacked residual `F = (A'y - c, Ax + s - b, Sy - mu e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktResidual {
    pub dual: DVector<f64>,
    pub primal: DVector<f64>,
    pub complementarity: DVector<f64>,
    pub norm: f64,
}

impl KktResidual {
    /// The residual as one vector of length `n + 2m`.
    pub fn stacked(&self) -> DVector<f64> {
        let parts = [&self.dual, &self.primal, &self.complementarity];
        let len = parts.iter().map(|p| p.len()).sum();
        DVector::from_iterator(len, parts.into_iter().flat_map(|p| p.iter().copied()))
    }
}

pub fn kkt_residual(
    p: &PathProblem,
    x: &DVector<f64>,
    s: &DVector<f64>,
    y: &DVector<f64>,
    mu: f64,
) -> Result<KktResidual, SolverError> {
    if s.iter().any(|&v| !(v > 0.0)) {
        return Err(SolverError::Domain("s"));
    }
    if y.iter().any(|&v| !(v > 0.0)) {
        return Err(SolverError::Domain("y"));
    }
    if !(mu > 0.0) {
        return Err(SolverError::Domain("mu"));
    }
    Ok(residual_unchecked(p, x, s, y, mu))
}

fn residual_unchecked(p: &PathProblem, x: &DVector<f64>, s: &DVector<f64>, y: &DVector<f64>, mu: f64) -> KktResidual {
    let dual = numeric::dual_residual(p.a(), y, p.c());
    let primal = numeric::primal_residual(p.a(), x, s, p.b());
    let complementarity = s.zip_map(y, |si, yi| si.mul_add(yi, -mu));
    let norm = (dual.norm_squared() + primal.norm_squared() + complementarity.norm_squared()).sqrt();
    KktResidual {
        dual,
        primal,
        complementarity,
        norm,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub dx: DVector<f64>,
    pub ds: DVector<f64>,
    pub dy: DVector<f64>,
    /// Primal stepsize for `x` and `s`.
    pub alpha: f64,
    /// Dual stepsize for `y`.
    pub beta: f64,
}

/// `A' D A` with `D = diag(d)`.
pub fn normal_matrix(a: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= d[i];
    }
    a.transpose() * scaled
}

fn factor(mut m: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, SolverError> {
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Ok(ch);
    }
    let shift = 1e-12 * m.trace();
    for i in 0..m.nrows() {
        m[(i, i)] += shift;
    }
    Cholesky::new(m).ok_or(SolverError::Singular)
}

/// Largest step in (0, 1] keeping `v + t dv` strictly positive, damped by `omega`.
fn step_to_boundary(v: &DVector<f64>, dv: &DVector<f64>, omega: f64) -> f64 {
    let ratio = v
        .iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&vi, &d)| vi / -d)
        .fold(f64::INFINITY, f64::min);
    (omega * ratio).min(1.0)
}

/// One Newton direction with its stepsizes.
///
/// The primal residual `b - Ax - s` enters the right-hand side, so the step
/// is also correct from an infeasible start; from a feasible start
/// `A dx + ds = 0`.
pub fn newton_step(p: &PathProblem, it: &Iterate, mu: f64, cfg: &SolverConfig) -> Result<NewtonStep, SolverError> {
    let Iterate { x, s, y } = it;
    if s.iter().any(|&v| !(v > 0.0)) {
        return Err(SolverError::Domain("s"));
    }
    if y.iter().any(|&v| !(v > 0.0)) {
        return Err(SolverError::Domain("y"));
    }
    if !(mu > 0.0) {
        return Err(SolverError::Domain("mu"));
    }
    let a = p.a();
    let d = y.component_div(s);
    let rp = -numeric::primal_residual(a, x, s, p.b());
    let inv_s = s.map(|v| 1.0 / v);
    let rhs = a.transpose() * (d.component_mul(&rp) - &inv_s * mu) + p.c();
    let ch = factor(normal_matrix(a, &d))?;
    let dx = ch.solve(&rhs);
    let ds = &rp - a * &dx;
    let dy = &inv_s * mu - y - d.component_mul(&ds);
    let alpha = step_to_boundary(s, &ds, cfg.omega);
    let beta = step_to_boundary(y, &dy, cfg.omega);
    Ok(NewtonStep {
        dx,
        ds,
        dy,
        alpha,
        beta,
    })
}

/// Per-call statistics of [`center_with_stats`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CenteringStats {
    pub iterations: usize,
    /// `||F||` after each accepted step.
    pub residuals: Vec<f64>,
}

/// Default start for `center`: a strictly feasible `x0`, `s0 = b - Ax0`,
/// `y0 = mu / s0`.
pub fn default_start(p: &PathProblem, mu: f64, x0: DVector<f64>) -> Iterate {
    let s = p.polytope().slacks(&x0);
    let y = s.map(|v| mu / v);
    Iterate { x: x0, s, y }
}

/// Computes the central path point at `mu`.
///
/// Without `start` the iteration begins at a strictly feasible point found
/// by [`crate::model::interior_point`]. A supplied start has its slacks
/// reset to `b - Ax` so every iterate stays primal feasible.
pub fn center(
    p: &PathProblem,
    mu: f64,
    start: Option<&Iterate>,
    cfg: &SolverConfig,
) -> Result<CenteredPoint, SolverError> {
    center_with_stats(p, mu, start, cfg).map(|(pt, _)| pt)
}

pub fn center_with_stats(
    p: &PathProblem,
    mu: f64,
    start: Option<&Iterate>,
    cfg: &SolverConfig,
) -> Result<(CenteredPoint, CenteringStats), SolverError> {
    cfg.check()?;
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(SolverError::Domain("mu"));
    }
    let mut it = match start {
        Some(st) => {
            let s = p.polytope().slacks(&st.x);
            let min = s.min();
            if !(min > 0.0) {
                return Err(SolverError::InfeasibleStart(min));
            }
            if st.y.len() != s.len() || st.y.iter().any(|&v| !(v > 0.0)) {
                return Err(SolverError::Domain("y"));
            }
            Iterate {
                x: st.x.clone(),
                s,
                y: st.y.clone(),
            }
        }
        None => {
            let x0 = crate::model::interior_point(p.polytope()).map_err(SolverError::InfeasibleStart)?;
            default_start(p, mu, x0)
        }
    };

    let mut stats = CenteringStats::default();
    let mut residual = residual_unchecked(p, &it.x, &it.s, &it.y, mu).norm;
    for _ in 0..cfg.max_iters {
        let step = newton_step(p, &it, mu, cfg)?;
        it.x += &step.dx * step.alpha;
        it.s += &step.ds * step.alpha;
        it.y += &step.dy * step.beta;
        // rounding can push a component onto the boundary when the ratio test is exact
        if it.s.iter().any(|&v| !(v > 0.0)) || it.y.iter().any(|&v| !(v > 0.0)) {
            return Err(SolverError::Domain("iterate"));
        }
        stats.iterations += 1;
        residual = residual_unchecked(p, &it.x, &it.s, &it.y, mu).norm;
        stats.residuals.push(residual);
        let tol = cfg.tolerance(p, &it.y, mu);
        if residual.max(step.alpha * step.dx.norm()) < tol {
            let pt = CenteredPoint {
                x: it.x,
                s: it.s,
                y: it.y,
                mu,
                residual,
            };
            return Ok((pt, stats));
        }
    }
    Err(SolverError::NonConvergence {
        mu,
        iterations: stats.iterations,
        residual,
        last: Box::new(CenteredPoint {
            x: it.x,
            s: it.s,
            y: it.y,
            mu,
            residual,
        }),
    })
}
