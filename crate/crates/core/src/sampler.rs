//! Adaptive sampling of one central path.
//!
//! A path is traced from `mu_max` (near the analytic center) down to
//! `mu_min` (near the optimal-face analytic center). Intervals of the `mu`
//! schedule are bisected until one of two rules is satisfied:
//!
//! - [`RefinementRule::MidpointBound`]: the interpolated proximity
//!   `||S(1/2) y(1/2) - mu e||` between neighbours stays below `delta`;
//! - [`RefinementRule::Curvature`]: finite-difference curvature estimates of
//!   the primal polyline stay below `delta`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, AssumptionFailure, CenteredPoint, ComplementarityPartition, PathProblem};
use crate::solver::{self, Iterate, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("problem violates modelling assumptions: {0:?}")]
    Invalid(Vec<AssumptionFailure>),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("refinement needs more than {max_points} points")]
    Overflow {
        max_points: usize,
        partial: Box<PathPolyline>,
    },
    #[error("coincident consecutive points")]
    DegenerateSegment,
    #[error("refinement needs at least {0} samples")]
    TooFewSamples(usize),
}

impl SamplerError {
    pub fn is_numeric(&self) -> bool {
        matches!(self, SamplerError::Solver(_) | SamplerError::Overflow { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementRule {
    #[serde(alias = "midpoint")]
    MidpointBound,
    Curvature,
}

/// Where a bisected `mu` interval is split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BisectionMean {
    /// `sqrt(mu_k mu_k+1)`; even in `log mu`.
    Geometric,
    /// `(mu_k + mu_k+1) / 2`.
    Arithmetic,
}

impl BisectionMean {
    fn split(self, hi: f64, lo: f64) -> f64 {
        match self {
            BisectionMean::Geometric => (hi * lo).sqrt(),
            BisectionMean::Arithmetic => 0.5 * (hi + lo),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub mu_max: f64,
    pub mu_min: f64,
    /// Bound for the active refinement rule.
    pub delta: f64,
    pub rule: RefinementRule,
    pub max_points: usize,
    pub mean: BisectionMean,
    /// Chords shorter than this are not bisected by the curvature rule; at
    /// that scale the estimates are dominated by the centering tolerance.
    pub min_segment: f64,
    pub solver: SolverConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            mu_max: 1e8,
            mu_min: 1e-8,
            delta: 0.5,
            rule: RefinementRule::Curvature,
            max_points: 20_000,
            mean: BisectionMean::Geometric,
            min_segment: 1e-4,
            solver: SolverConfig::default(),
        }
    }
}

impl SamplerConfig {
    pub fn check(&self) -> Result<(), SamplerError> {
        let bad = |m: String| Err(SamplerError::Config(m));
        if !(self.mu_min > 0.0 && self.mu_min < self.mu_max && self.mu_max.is_finite()) {
            return bad(format!(
                "need 0 < mu_min < mu_max < inf, got [{}, {}]",
                self.mu_min, self.mu_max
            ));
        }
        if !(self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if self.max_points < 2 {
            return bad("max_points must be at least 2".into());
        }
        if !(self.min_segment >= 0.0) {
            return bad("min_segment must be nonnegative".into());
        }
        self.solver.check()?;
        Ok(())
    }
}

/// Ordered samples of one central path, `mu` strictly decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPolyline {
    pub problem: PathProblem,
    pub samples: Vec<CenteredPoint>,
    /// The `mu -> inf` endpoint (analytic center).
    pub x_c: DVector<f64>,
    /// The `mu -> 0` endpoint (analytic center of the optimal face).
    pub x_star: DVector<f64>,
}

impl PathPolyline {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mus(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.mu).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.samples.iter().map(|s| &s.x)
    }

    /// Sum of chord lengths.
    pub fn length(&self) -> f64 {
        self.samples.windows(2).map(|w| (&w[1].x - &w[0].x).norm()).sum()
    }

    pub fn to_file(&self) -> PolylineFile {
        PolylineFile {
            mu: self.mus(),
            x: self.points().map(|x| x.iter().copied().collect()).collect(),
            x_c: self.x_c.iter().copied().collect(),
            x_star: self.x_star.iter().copied().collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("plain data serializes")
    }
}

/// Polyline file: `{"mu": [...], "x": [[...]], "x_c": [...], "x_star": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolylineFile {
    pub mu: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub x_c: Vec<f64>,
    pub x_star: Vec<f64>,
}

/// `|| (1/4)(S^a + S^b)(y^a + y^b) - mu e ||`: the standard proximity
/// `||Sy - mu e||` at the midpoint of the segment joining `a` and `b`.
pub fn proximity_measure(a: &CenteredPoint, b: &CenteredPoint, mu: f64) -> f64 {
    let s = &a.s + &b.s;
    let y = &a.y + &b.y;
    s.zip_map(&y, |si, yi| 0.25 * si * yi - mu).norm()
}

/// Unit tangents and curvature estimates from three consecutive points.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentEstimate {
    pub t_k: DVector<f64>,
    pub t_k1: DVector<f64>,
    /// Estimate over `[x_k, x_k+1]`.
    pub kappa_k: f64,
    /// Estimate over `[x_k+1, x_k+2]`.
    pub kappa_k1: f64,
}

pub fn tangent_estimates(
    x_k: &DVector<f64>,
    x_k1: &DVector<f64>,
    x_k2: &DVector<f64>,
) -> Result<TangentEstimate, SamplerError> {
    let d0 = x_k1 - x_k;
    let d1 = x_k2 - x_k1;
    let (h0, h1) = (d0.norm(), d1.norm());
    if !(h0 > 0.0 && h1 > 0.0) {
        return Err(SamplerError::DegenerateSegment);
    }
    let t_k = d0 / h0;
    let t_k1 = d1 / h1;
    let turn = (&t_k1 - &t_k).norm();
    Ok(TangentEstimate {
        kappa_k: turn / h0,
        kappa_k1: turn / h1,
        t_k,
        t_k1,
    })
}

/// Both path endpoints and the limiting complementarity partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Endpoints {
    /// Centered point at `mu_max`.
    pub center: CenteredPoint,
    /// Centered point at `mu_min`.
    pub optimum: CenteredPoint,
    pub partition: ComplementarityPartition,
}

impl Endpoints {
    pub fn x_c(&self) -> &DVector<f64> {
        &self.center.x
    }

    pub fn x_star(&self) -> &DVector<f64> {
        &self.optimum.x
    }
}

/// Centers at `mu_max` and `mu_min` and classifies every constraint.
///
/// Index `i` is put in `sigma_s` when `s_i > sqrt(mu_min)` at the `mu_min`
/// point, else in `sigma_y`. Since `s_i y_i = mu`, exactly one factor is
/// `O(sqrt(mu))` small under strict complementarity.
pub fn estimate_endpoints(p: &PathProblem, cfg: &SamplerConfig) -> Result<Endpoints, SamplerError> {
    cfg.check()?;
    let center = solver::center(p, cfg.mu_max, None, &cfg.solver)?;
    let optimum = solver::center(p, cfg.mu_min, None, &cfg.solver)?;
    let threshold = cfg.mu_min.sqrt();
    let (sigma_s, sigma_y) = (0..p.polytope().rows()).partition(|&i| optimum.s[i] > threshold);
    Ok(Endpoints {
        center,
        optimum,
        partition: ComplementarityPartition { sigma_s, sigma_y },
    })
}

/// Validates the problem, estimates the endpoints and refines with the
/// configured rule.
pub fn trace(p: &PathProblem, cfg: &SamplerConfig) -> Result<PathPolyline, SamplerError> {
    cfg.check()?;
    let report = model::validate_problem(p);
    if !report.ok() {
        return Err(SamplerError::Invalid(report.failures));
    }
    let ends = estimate_endpoints(p, cfg)?;
    let mut path = PathPolyline {
        problem: p.clone(),
        x_c: ends.center.x.clone(),
        x_star: ends.optimum.x.clone(),
        samples: vec![ends.center, ends.optimum],
    };
    match cfg.rule {
        RefinementRule::MidpointBound => refine_midpoint(path, cfg),
        RefinementRule::Curvature => {
            let mid = bisect(&path.problem, &path.samples[0], &path.samples[1], cfg)?;
            path.samples.insert(1, mid);
            refine_curvature(path, cfg)
        }
    }
}

/// Centers at the split point of the interval `[lo.mu, hi.mu]`, warm
/// started from `hi` with duals `mu / s`.
fn bisect(
    p: &PathProblem,
    hi: &CenteredPoint,
    lo: &CenteredPoint,
    cfg: &SamplerConfig,
) -> Result<CenteredPoint, SamplerError> {
    let mu = cfg.mean.split(hi.mu, lo.mu);
    let start = Iterate {
        x: hi.x.clone(),
        s: hi.s.clone(),
        y: hi.s.map(|v| mu / v),
    };
    Ok(solver::center(p, mu, Some(&start), &cfg.solver)?)
}

fn splittable(hi: &CenteredPoint, lo: &CenteredPoint, mean: BisectionMean) -> bool {
    let mid = mean.split(hi.mu, lo.mu);
    mid < hi.mu && mid > lo.mu
}

/// Bisects every flagged interval once per pass until no interval is
/// flagged.
fn refine_with<F>(mut path: PathPolyline, cfg: &SamplerConfig, mut flag: F) -> Result<PathPolyline, SamplerError>
where
    F: FnMut(&[CenteredPoint]) -> Vec<bool>,
{
    loop {
        let flags = flag(&path.samples);
        let marked: Vec<usize> = flags
            .iter()
            .enumerate()
            .filter(|&(k, &f)| f && splittable(&path.samples[k], &path.samples[k + 1], cfg.mean))
            .map(|(k, _)| k)
            .collect();
        if marked.is_empty() {
            return Ok(path);
        }
        if path.samples.len() + marked.len() > cfg.max_points {
            return Err(SamplerError::Overflow {
                max_points: cfg.max_points,
                partial: Box::new(path),
            });
        }
        let mut inserted = Vec::with_capacity(marked.len());
        for &k in &marked {
            inserted.push(bisect(&path.problem, &path.samples[k], &path.samples[k + 1], cfg)?);
        }
        let old = std::mem::take(&mut path.samples);
        let mut next = Vec::with_capacity(old.len() + inserted.len());
        let mut new_points = marked.iter().zip(inserted).peekable();
        for (k, sample) in old.into_iter().enumerate() {
            next.push(sample);
            if new_points.peek().is_some_and(|(&j, _)| j == k) {
                next.push(new_points.next().expect("peeked").1);
            }
        }
        path.samples = next;
    }
}

/// Bisects until every neighbour pair has `proximity_measure <= delta`,
/// measured at the larger `mu` of the pair.
pub fn refine_midpoint(path: PathPolyline, cfg: &SamplerConfig) -> Result<PathPolyline, SamplerError> {
    cfg.check()?;
    if path.samples.len() < 2 {
        return Err(SamplerError::TooFewSamples(2));
    }
    let delta = cfg.delta;
    refine_with(path, cfg, |samples| {
        samples
            .windows(2)
            .map(|w| proximity_measure(&w[0], &w[1], w[0].mu) > delta)
            .collect()
    })
}

/// Bisects every interval whose curvature estimate exceeds `delta`.
///
/// Triples containing a chord shorter than `min_segment` are skipped.
pub fn refine_curvature(path: PathPolyline, cfg: &SamplerConfig) -> Result<PathPolyline, SamplerError> {
    cfg.check()?;
    if path.samples.len() < 3 {
        return Err(SamplerError::TooFewSamples(3));
    }
    let delta = cfg.delta;
    let min_segment = cfg.min_segment;
    refine_with(path, cfg, |samples| {
        let mut flags = vec![false; samples.len() - 1];
        for k in 0..samples.len() - 2 {
            let (a, b, c) = (&samples[k].x, &samples[k + 1].x, &samples[k + 2].x);
            if (b - a).norm() < min_segment || (c - b).norm() < min_segment {
                continue;
            }
            if let Ok(est) = tangent_estimates(a, b, c) {
                flags[k] |= est.kappa_k > delta;
                flags[k + 1] |= est.kappa_k1 > delta;
            }
        }
        flags
    })
}

/// Curvature estimates at every interior sample, as `max(kappa_k, kappa_k+1)`
/// of the triple centred there. Degenerate triples give `0`.
pub fn curvature_profile(path: &PathPolyline) -> Vec<f64> {
    path.samples
        .windows(3)
        .map(|w| {
            tangent_estimates(&w[0].x, &w[1].x, &w[2].x)
                .map(|e| e.kappa_k.max(e.kappa_k1))
                .unwrap_or(0.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::kgon;

    fn point(s: &[f64], y: &[f64], mu: f64) -> CenteredPoint {
        CenteredPoint {
            x: DVector::zeros(1),
            s: DVector::from_column_slice(s),
            y: DVector::from_column_slice(y),
            mu,
            residual: 0.0,
        }
    }

    /// `||((1-t) S^a + t S^b)((1-t) y^a + t y^b) - mu e||`, evaluated directly.
    fn interpolated_metric(a: &CenteredPoint, b: &CenteredPoint, mu: f64, t: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..a.s.len() {
            let s = (1.0 - t) * a.s[i] + t * b.s[i];
            let y = (1.0 - t) * a.y[i] + t * b.y[i];
            acc += (s * y - mu).powi(2);
        }
        acc.sqrt()
    }

    #[test]
    fn proximity_examples() {
        let a = point(&[1.0, 2.0], &[3.0, 1.5], 3.0);
        assert_eq!(proximity_measure(&a, &a, 3.0), 0.0);
        // m = 1: s = y = 1 at mu = 1; s' = 2, y' = 0.5
        let a = point(&[1.0], &[1.0], 1.0);
        let b = point(&[2.0], &[0.5], 1.0);
        let oracle = interpolated_metric(&a, &b, 1.0, 0.5);
        assert!((oracle - 0.125).abs() < 1e-15);
        assert!((proximity_measure(&a, &b, 1.0) - oracle).abs() < 1e-15);
        // S y products are invariant under s -> t s, y -> y / t
        let t = 3.7;
        let a2 = point(&[t], &[1.0 / t], 1.0);
        let b2 = point(&[2.0 * t], &[0.5 / t], 1.0);
        assert!((proximity_measure(&a2, &b2, 1.0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn tangent_examples() {
        let p = |x: f64, y: f64| DVector::from_column_slice(&[x, y]);
        let e = tangent_estimates(&p(0.0, 0.0), &p(1.0, 0.0), &p(2.0, 0.0)).unwrap();
        assert_eq!((e.kappa_k, e.kappa_k1), (0.0, 0.0));
        let e = tangent_estimates(&p(0.0, 0.0), &p(1.0, 0.0), &p(1.0, 1.0)).unwrap();
        let r2 = 2f64.sqrt();
        assert!((e.kappa_k - r2).abs() < 1e-15 && (e.kappa_k1 - r2).abs() < 1e-15);
        let r = tangent_estimates(&p(1.0, 1.0), &p(1.0, 0.0), &p(0.0, 0.0)).unwrap();
        assert!((r.kappa_k - e.kappa_k1).abs() < 1e-15 && (r.kappa_k1 - e.kappa_k).abs() < 1e-15);
        assert!(matches!(
            tangent_estimates(&p(0.0, 0.0), &p(0.0, 0.0), &p(1.0, 0.0)),
            Err(SamplerError::DegenerateSegment)
        ));
    }

    fn problem(k: usize, c: [f64; 2]) -> PathProblem {
        PathProblem::new(kgon(k).unwrap(), DVector::from_column_slice(&c)).unwrap()
    }

    #[test]
    fn endpoints_of_square() {
        let cfg = SamplerConfig::default();
        let e = estimate_endpoints(&problem(4, [1.0, 0.0]), &cfg).unwrap();
        assert!(e.x_c().norm() < 1e-6);
        assert!((e.x_star() - DVector::from_column_slice(&[1.0, 0.0])).norm() < 1e-6);
        assert_eq!(e.partition.sigma_y, vec![0]);
        assert!(e.partition.is_partition_of(4));

        let e = estimate_endpoints(&problem(4, [1.0, 1.0]), &cfg).unwrap();
        assert!((e.x_star() - DVector::from_column_slice(&[1.0, 1.0])).norm() < 1e-6);
        assert_eq!(e.partition.sigma_y, vec![0, 1]);
    }

    #[test]
    fn idempotent_when_satisfied() {
        let cfg = SamplerConfig {
            rule: RefinementRule::MidpointBound,
            mu_max: 2.0,
            mu_min: 1e-4,
            delta: 0.08,
            ..SamplerConfig::default()
        };
        let path = trace(&problem(4, [1.0, 2.0]), &cfg).unwrap();
        let again = refine_midpoint(path.clone(), &cfg).unwrap();
        assert_eq!(path, again);
    }

    #[test]
    fn infinite_curvature_bound_inserts_nothing() {
        let cfg = SamplerConfig {
            delta: f64::INFINITY,
            ..SamplerConfig::default()
        };
        let path = trace(&problem(4, [1.0, 2.0]), &cfg).unwrap();
        assert_eq!(path.len(), 3);
    }

    #[test]
    fn overflow_returns_partial_schedule() {
        let cfg = SamplerConfig {
            rule: RefinementRule::MidpointBound,
            mu_max: 1e3,
            delta: 0.01,
            max_points: 50,
            ..SamplerConfig::default()
        };
        match trace(&problem(4, [1.0, 2.0]), &cfg) {
            Err(SamplerError::Overflow { partial, max_points }) => {
                assert_eq!(max_points, 50);
                assert!(partial.len() <= 50 && partial.len() >= 2);
                assert!(partial.samples.windows(2).all(|w| w[0].mu > w[1].mu));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_problem_is_rejected() {
        let poly = crate::model::Polytope::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]).unwrap();
        let p = PathProblem::new(poly, DVector::from_column_slice(&[1.0, 1.0])).unwrap();
        assert!(matches!(
            trace(&p, &SamplerConfig::default()),
            Err(SamplerError::Invalid(_))
        ));
    }

    #[test]
    fn halving_delta_never_removes_points() {
        let p = problem(4, [1.0, 2.0]);
        let mut last = 0;
        for delta in [0.32, 0.16, 0.08, 0.04] {
            let cfg = SamplerConfig {
                rule: RefinementRule::MidpointBound,
                mu_max: 1.0,
                delta,
                ..SamplerConfig::default()
            };
            let n = trace(&p, &cfg).unwrap().len();
            assert!(n >= last);
            last = n;
        }
    }

    #[test]
    fn curvature_bound_holds_above_resolution() {
        let cfg = SamplerConfig::default();
        let path = trace(&problem(4, [1.0, 2.0]), &cfg).unwrap();
        assert!(path.len() > 1000);
        for w in path.samples.windows(3) {
            let (a, b, c) = (&w[0].x, &w[1].x, &w[2].x);
            if (b - a).norm() < cfg.min_segment || (c - b).norm() < cfg.min_segment {
                continue;
            }
            let e = tangent_estimates(a, b, c).unwrap();
            assert!(e.kappa_k <= cfg.delta && e.kappa_k1 <= cfg.delta);
        }
        assert!(path.samples.windows(2).all(|w| w[0].mu > w[1].mu));
        assert!(path
            .samples
            .iter()
            .all(|s| s.residual < cfg.solver.tolerance(&path.problem, &s.y, s.mu)));
    }

    #[test]
    fn facet_normal_objective_gives_straight_path() {
        for k in [3, 5, 6, 8] {
            let poly = kgon(k).unwrap();
            let row = poly.a().row(1).transpose();
            let p = PathProblem::new(poly.clone(), row.clone()).unwrap();
            let path = trace(&p, &SamplerConfig::default()).unwrap();
            let mid = &row * poly.b()[1] / row.norm_squared();
            for x in path.points() {
                let cross = x[0] * mid[1] - x[1] * mid[0];
                assert!(cross.abs() < 1e-6, "k={k} cross={cross}");
            }
            assert!((&path.x_star - &mid).norm() < 1e-6);
        }
    }

    #[test]
    fn polyline_json_keys() {
        let cfg = SamplerConfig {
            delta: f64::INFINITY,
            ..SamplerConfig::default()
        };
        let path = trace(&problem(4, [1.0, 2.0]), &cfg).unwrap();
        let v: serde_json::Value = serde_json::from_str(&path.to_json()).unwrap();
        for key in ["mu", "x", "x_c", "x_star"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["x"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn config_checks() {
        let cfg = SamplerConfig {
            mu_min: 10.0,
            mu_max: 1.0,
            ..SamplerConfig::default()
        };
        assert!(cfg.check().is_err());
        let cfg = SamplerConfig {
            delta: 0.0,
            ..SamplerConfig::default()
        };
        assert!(cfg.check().is_err());
    }

    #[test]
    fn midpoint_value_is_within_the_theta_range() {
        // the theta = 1/2 value never exceeds the maximum over theta
        let cfg = SamplerConfig {
            rule: RefinementRule::MidpointBound,
            mu_max: 2.0,
            mu_min: 1e-4,
            delta: 0.08,
            ..SamplerConfig::default()
        };
        let path = trace(&problem(4, [1.0, 2.0]), &cfg).unwrap();
        for w in path.samples.windows(2) {
            let at_half = proximity_measure(&w[0], &w[1], w[0].mu);
            let max = (0..=100)
                .map(|i| interpolated_metric(&w[0], &w[1], w[0].mu, i as f64 / 100.0))
                .fold(0.0, f64::max);
            assert!(at_half <= max + 1e-12);
        }
    }
}
