//! Problem data, assumption checks and the barrier objective.
//!
//! A [`Polytope`] is the system `{x : Ax <= b}`; a [`PathProblem`] adds the
//! objective direction `c`. The central path is only defined when `A` has
//! full column rank and the feasible set is bounded with a nonempty strict
//! interior; [`validate_problem`] checks all three.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{self, binomial, Combinations};
use crate::solver::{self, Iterate, SolverConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("empty problem: need at least one row and one column")]
    Empty,
}

/// Constraint system `{x : Ax <= b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl Polytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, ModelError> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(ModelError::Empty);
        }
        if a.nrows() != b.len() {
            return Err(ModelError::Dimension(format!(
                "A has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("A"));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("b"));
        }
        Ok(Polytope { a, b })
    }

    /// Builds a polytope from row slices.
    pub fn from_rows(rows: &[Vec<f64>], b: &[f64]) -> Result<Self, ModelError> {
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(ModelError::Dimension(format!(
                "row {bad} has {} entries, expected {n}",
                rows[bad].len()
            )));
        }
        let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        Polytope::new(a, DVector::from_column_slice(b))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Number of constraints `m`.
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    /// Dimension `n` of the ambient space.
    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// `b - Ax`.
    pub fn slacks(&self, x: &DVector<f64>) -> DVector<f64> {
        numeric::slacks(&self.a, &self.b, x)
    }

    pub fn contains_strictly(&self, x: &DVector<f64>) -> bool {
        self.slacks(x).iter().all(|&s| s > 0.0)
    }
}

/// A polytope plus objective direction; identifies one central path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathProblem {
    polytope: Polytope,
    c: DVector<f64>,
}

impl PathProblem {
    pub fn new(polytope: Polytope, c: DVector<f64>) -> Result<Self, ModelError> {
        if c.len() != polytope.dim() {
            return Err(ModelError::Dimension(format!(
                "c has {} entries but A has {} columns",
                c.len(),
                polytope.dim()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("c"));
        }
        Ok(PathProblem { polytope, c })
    }

    pub fn polytope(&self) -> &Polytope {
        &self.polytope
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.polytope.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.polytope.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn with_objective(&self, c: DVector<f64>) -> Result<Self, ModelError> {
        PathProblem::new(self.polytope.clone(), c)
    }
}

/// One certified point near the central path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteredPoint {
    pub x: DVector<f64>,
    pub s: DVector<f64>,
    pub y: DVector<f64>,
    pub mu: f64,
    /// `||F(x, s, y, mu)||` at the returned point.
    pub residual: f64,
}

impl CenteredPoint {
    pub fn iterate(&self) -> Iterate {
        Iterate {
            x: self.x.clone(),
            s: self.s.clone(),
            y: self.y.clone(),
        }
    }
}

/// Supports of the limiting slacks and duals as `mu -> 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplementarityPartition {
    pub sigma_s: Vec<usize>,
    pub sigma_y: Vec<usize>,
}

impl ComplementarityPartition {
    /// True when the two sets are disjoint and cover `0..m`.
    pub fn is_partition_of(&self, m: usize) -> bool {
        let mut seen = vec![0u8; m];
        for &i in self.sigma_s.iter().chain(&self.sigma_y) {
            if i >= m {
                return false;
            }
            seen[i] += 1;
        }
        seen.iter().all(|&k| k == 1)
    }
}

/// A violated modelling assumption.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "assumption", rename_all = "snake_case")]
pub enum AssumptionFailure {
    /// `A` does not have full column rank.
    RankDeficient { rank: usize },
    /// A nonzero direction `d` with `Ad <= 0` exists.
    Unbounded { direction: Vec<f64> },
    /// No `x` with `Ax < b`; `max_min_slack` is the best achievable `min(b - Ax)`.
    EmptyInterior { max_min_slack: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub failures: Vec<AssumptionFailure>,
    /// A strictly feasible point, present whenever one was found.
    pub interior_point: Option<DVector<f64>>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Subset count above which boundedness falls back to barrier LPs.
const RAY_ENUMERATION_LIMIT: u64 = 200_000;

/// Checks full column rank, boundedness and a nonempty strict interior.
pub fn validate_problem(p: &PathProblem) -> ValidationReport {
    validate_polytope(p.polytope())
}

pub fn validate_polytope(poly: &Polytope) -> ValidationReport {
    let mut failures = Vec::new();

    let rank = column_rank(poly.a());
    let full_rank = rank == poly.dim();
    if !full_rank {
        failures.push(AssumptionFailure::RankDeficient { rank });
    }

    let interior = interior_point(poly);
    let interior_point = match interior {
        Ok(x) => Some(x),
        Err(max_min_slack) => {
            failures.push(AssumptionFailure::EmptyInterior { max_min_slack });
            None
        }
    };

    let direction = if !full_rank {
        Some(null_direction(poly.a()))
    } else if binomial(poly.rows(), poly.dim() - 1) <= RAY_ENUMERATION_LIMIT || interior_point.is_none() {
        recession_ray(poly.a())
    } else {
        unbounded_by_lp(poly, interior_point.as_ref().expect("checked above"))
    };
    if let Some(d) = direction {
        failures.push(AssumptionFailure::Unbounded {
            direction: d.iter().copied().collect(),
        });
    }

    ValidationReport {
        failures,
        interior_point,
    }
}

/// `c'x + mu * sum ln(b - Ax)`, or `-inf` outside the strict interior.
pub fn barrier_objective(p: &PathProblem, x: &DVector<f64>, mu: f64) -> f64 {
    let s = p.polytope().slacks(x);
    if s.iter().any(|&si| si <= 0.0) {
        return f64::NEG_INFINITY;
    }
    p.c().dot(x) + mu * s.iter().map(|si| si.ln()).sum::<f64>()
}

/// Numerical rank from a column-pivoted QR with tolerance `1e-10 * ||A||`.
pub fn column_rank(a: &DMatrix<f64>) -> usize {
    let scale = a.norm();
    if scale == 0.0 {
        return 0;
    }
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let tol = 1e-10 * scale;
    (0..r.nrows().min(r.ncols())).filter(|&i| r[(i, i)].abs() > tol).count()
}

fn null_direction(a: &DMatrix<f64>) -> DVector<f64> {
    let gram = a.transpose() * a;
    smallest_singular_vector(&gram).0
}

/// Right singular vector of the smallest singular value of a square matrix,
/// together with the second-smallest singular value.
fn smallest_singular_vector(m: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let d = v_t.row(order[0]).transpose();
    let second = if n > 1 {
        svd.singular_values[order[1]]
    } else {
        f64::INFINITY
    };
    (d, second)
}

/// Searches for an extreme ray of the recession cone `{d : Ad <= 0}`.
///
/// For full-rank `A` the cone is pointed, so it is nontrivial iff it has an
/// extreme ray, and every extreme ray is the null space of some set of
/// `n - 1` linearly independent rows.
fn recession_ray(a: &DMatrix<f64>) -> Option<DVector<f64>> {
    let (m, n) = a.shape();
    let tol = 1e-10 * a.norm().max(1.0);
    let check = |d: &DVector<f64>| -> Option<DVector<f64>> {
        for sign in [1.0, -1.0] {
            let dd = d * sign;
            if (a * &dd).iter().all(|&v| v <= tol) {
                return Some(dd);
            }
        }
        None
    };
    if n == 1 {
        return check(&DVector::from_element(1, 1.0));
    }
    for rows in Combinations::new(m, n - 1) {
        let sub = a.select_rows(&rows);
        let gram = sub.transpose() * &sub;
        let (d, second) = smallest_singular_vector(&gram);
        if second <= 1e-12 * gram.norm().max(1e-300) {
            // the chosen rows are dependent
            continue;
        }
        if let Some(ray) = check(&d) {
            return Some(ray);
        }
    }
    None
}

/// Side length of the artificial box used by the barrier LPs.
fn box_radius(poly: &Polytope) -> f64 {
    let min_row = poly
        .a()
        .row_iter()
        .map(|r| r.norm())
        .fold(f64::INFINITY, f64::min)
        .max(1e-300);
    1e4 * (1.0 + poly.b().amax()) / min_row
}

/// Appends the box rows `+-x_j <= radius` to `(A, b)`.
fn boxed(a: &DMatrix<f64>, b: &DVector<f64>, radius: f64) -> (DMatrix<f64>, DVector<f64>) {
    let (m, n) = a.shape();
    let mut ab = DMatrix::zeros(m + 2 * n, n);
    ab.view_mut((0, 0), (m, n)).copy_from(a);
    let mut bb = DVector::from_element(m + 2 * n, radius);
    bb.rows_mut(0, m).copy_from(b);
    for j in 0..n {
        ab[(m + 2 * j, j)] = 1.0;
        ab[(m + 2 * j + 1, j)] = -1.0;
    }
    (ab, bb)
}

/// Follows the central path of `problem` from `start` down to `mu_final`.
fn barrier_lp(problem: &PathProblem, start: Iterate, mu_final: f64) -> Option<Iterate> {
    let cfg = SolverConfig::default();
    let mut mu = 1.0;
    let mut it = start;
    loop {
        let pt = solver::center(problem, mu, Some(&it), &cfg).ok()?;
        it = pt.iterate();
        if mu <= mu_final {
            return Some(it);
        }
        mu = (mu * 0.1).max(mu_final);
    }
}

/// Finds an `x` with `Ax < b`, or returns the best `min(b - Ax)` found.
///
/// When `b > 0` the origin qualifies. Otherwise solves
/// `max t  s.t.  Ax + t e <= b` inside an artificial box by barrier
/// continuation.
pub fn interior_point(poly: &Polytope) -> Result<DVector<f64>, f64> {
    let (m, n) = poly.a().shape();
    if poly.b().iter().all(|&v| v > 0.0) {
        return Ok(DVector::zeros(n));
    }
    let radius = box_radius(poly);
    let (ab, bb) = boxed(poly.a(), poly.b(), radius);
    let rows = ab.nrows();
    let bmax = poly.b().amax();
    let t_hi = 1.0 + bmax;
    let t_lo = 2.0 + bmax + radius * poly.a().abs().column_sum().amax();
    // z = (x, t)
    let mut a1 = DMatrix::zeros(rows + 2, n + 1);
    a1.view_mut((0, 0), (rows, n)).copy_from(&ab);
    for i in 0..m {
        a1[(i, n)] = 1.0;
    }
    a1[(rows, n)] = 1.0;
    a1[(rows + 1, n)] = -1.0;
    let mut b1 = DVector::zeros(rows + 2);
    b1.rows_mut(0, rows).copy_from(&bb);
    b1[rows] = t_hi;
    b1[rows + 1] = t_lo;
    let mut c1 = DVector::zeros(n + 1);
    c1[n] = 1.0;
    let problem = PathProblem::new(Polytope { a: a1, b: b1 }, c1).expect("consistent by construction");

    let t0 = poly.b().min() - 1.0;
    let mut z0 = DVector::zeros(n + 1);
    z0[n] = t0;
    let s0 = problem.polytope().slacks(&z0);
    let y0 = s0.map(|v| 1.0 / v);
    let start = Iterate { x: z0, s: s0, y: y0 };
    let scale = 1.0 + poly.b().amax();
    let Some(end) = barrier_lp(&problem, start, 1e-10 * scale) else {
        return Err(f64::NAN);
    };
    let x = end.x.rows(0, n).into_owned();
    let min_slack = poly.slacks(&x).min();
    if min_slack > 1e-9 * scale {
        Ok(x)
    } else {
        Err(min_slack)
    }
}

/// Boundedness by `2n` barrier LPs `max +-x_j` over the box-augmented set.
///
/// Returns a coordinate direction along which the optimum runs into the
/// artificial box.
fn unbounded_by_lp(poly: &Polytope, x0: &DVector<f64>) -> Option<DVector<f64>> {
    let n = poly.dim();
    let radius = box_radius(poly) + x0.amax();
    let (ab, bb) = boxed(poly.a(), poly.b(), radius);
    let boxed_poly = Polytope { a: ab, b: bb };
    for j in 0..n {
        for sign in [1.0, -1.0] {
            let mut c = DVector::zeros(n);
            c[j] = sign;
            let problem = PathProblem::new(boxed_poly.clone(), c.clone()).expect("consistent");
            let s0 = boxed_poly.slacks(x0);
            let y0 = s0.map(|v| 1.0 / v);
            let start = Iterate {
                x: x0.clone(),
                s: s0,
                y: y0,
            };
            let end = barrier_lp(&problem, start, 1e-9)?;
            if sign * end.x[j] > 0.5 * radius {
                return Some(c);
            }
        }
    }
    None
}

/// Problem file: `{"A": [[...]], "b": [...], "c": [...]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl TryFrom<&ProblemFile> for PathProblem {
    type Error = ModelError;

    fn try_from(f: &ProblemFile) -> Result<Self, ModelError> {
        let poly = Polytope::from_rows(&f.a, &f.b)?;
        PathProblem::new(poly, DVector::from_column_slice(&f.c))
    }
}

impl From<&PathProblem> for ProblemFile {
    fn from(p: &PathProblem) -> Self {
        ProblemFile {
            a: p.a().row_iter().map(|r| r.iter().copied().collect()).collect(),
            b: p.b().iter().copied().collect(),
            c: p.c().iter().copied().collect(),
        }
    }
}

impl PathProblem {
    pub fn from_json(text: &str) -> Result<Self, crate::Error> {
        let f: ProblemFile = serde_json::from_str(text)?;
        Ok(PathProblem::try_from(&f)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ProblemFile::from(self)).expect("plain data serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(c: [f64; 2]) -> PathProblem {
        let poly = Polytope::from_rows(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            &[1.0; 4],
        )
        .unwrap();
        PathProblem::new(poly, DVector::from_column_slice(&c)).unwrap()
    }

    #[test]
    fn square_validates() {
        let report = validate_problem(&square([1.0, 2.0]));
        assert!(report.ok(), "{report:?}");
        let x0 = report.interior_point.unwrap();
        assert!(square([1.0, 2.0]).polytope().slacks(&x0).min() > 0.0);
    }

    #[test]
    fn strip_is_unbounded() {
        let poly = Polytope::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]], &[1.0, 1.0]).unwrap();
        let report = validate_polytope(&poly);
        assert!(!report.ok());
        // rank deficient as well, and the recession direction is (0, +-1)
        let dir = report
            .failures
            .iter()
            .find_map(|f| match f {
                AssumptionFailure::Unbounded { direction } => Some(direction.clone()),
                _ => None,
            })
            .expect("unbounded failure");
        assert!(dir[0].abs() < 1e-12 && (dir[1].abs() - 1.0).abs() < 1e-12);
        assert!(report
            .failures
            .iter()
            .any(|f| matches!(f, AssumptionFailure::RankDeficient { rank: 1 })));
    }

    #[test]
    fn halfplane_wedge_is_unbounded_with_full_rank() {
        // x1 <= 1, x2 <= 1, -x1 - x2 <= 1 ... bounded triangle; drop the last row
        let poly = Polytope::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]).unwrap();
        let report = validate_polytope(&poly);
        assert_eq!(report.failures.len(), 1);
        let AssumptionFailure::Unbounded { direction } = &report.failures[0] else {
            panic!("{report:?}")
        };
        let d = DVector::from_column_slice(direction);
        assert!((poly.a() * &d).iter().all(|&v| v <= 1e-12));
        assert!(d.norm() > 0.5);
    }

    #[test]
    fn pinched_strip_has_empty_interior() {
        let poly = Polytope::from_rows(
            &[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]],
            &[0.0, 0.0, 1.0, 1.0],
        )
        .unwrap();
        let report = validate_polytope(&poly);
        assert_eq!(report.failures.len(), 1, "{report:?}");
        let AssumptionFailure::EmptyInterior { max_min_slack } = report.failures[0] else {
            panic!("{report:?}")
        };
        assert!(max_min_slack.abs() < 1e-6);
        assert!(report.interior_point.is_none());
    }

    #[test]
    fn offset_polytope_finds_interior_without_origin() {
        // [2, 3] x [-1, 1]: origin is outside
        let poly = Polytope::from_rows(
            &[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]],
            &[3.0, -2.0, 1.0, 1.0],
        )
        .unwrap();
        let report = validate_polytope(&poly);
        assert!(report.ok(), "{report:?}");
        let x = report.interior_point.unwrap();
        assert!(poly.slacks(&x).min() > 0.4, "{x}");
    }

    #[test]
    fn lp_boundedness_route_agrees_with_enumeration() {
        // 4-cube: bounded
        let n = 4;
        let mut rows = Vec::new();
        for j in 0..n {
            for sign in [1.0, -1.0] {
                let mut r = vec![0.0; n];
                r[j] = sign;
                rows.push(r);
            }
        }
        let cube = Polytope::from_rows(&rows, &vec![1.0; 2 * n]).unwrap();
        let x0 = DVector::zeros(n);
        assert!(unbounded_by_lp(&cube, &x0).is_none());
        assert!(recession_ray(cube.a()).is_none());
        // drop the -x4 row: unbounded along -e4
        rows.pop();
        let open = Polytope::from_rows(&rows, &vec![1.0; 2 * n - 1]).unwrap();
        let d = unbounded_by_lp(&open, &x0).expect("unbounded");
        assert_eq!(d[3], -1.0);
        assert!(recession_ray(open.a()).is_some());
    }

    #[test]
    fn dimension_mismatch_is_structural() {
        let err = Polytope::from_rows(&[vec![1.0, 0.0]], &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, ModelError::Dimension(_)));
        let poly = Polytope::from_rows(&[vec![1.0, 0.0]], &[1.0]).unwrap();
        let err = PathProblem::new(poly, DVector::from_element(3, 1.0)).unwrap_err();
        assert!(matches!(err, ModelError::Dimension(_)));
        let err = Polytope::from_rows(&[vec![1.0, 0.0], vec![1.0]], &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, ModelError::Dimension(_)));
    }

    #[test]
    fn barrier_objective_values() {
        let p = square([0.0, 0.0]);
        assert_eq!(barrier_objective(&p, &DVector::zeros(2), 1.0), 0.0);
        let q = square([1.0, 0.0]);
        let at_facet = DVector::from_column_slice(&[1.0, 0.0]);
        assert_eq!(barrier_objective(&q, &at_facet, 1.0), f64::NEG_INFINITY);
        // direct evaluation: ln(0.5) + ln(1.5) + 2 ln(1)
        let x = DVector::from_column_slice(&[0.5, 0.0]);
        let expected = 0.5f64.ln() + 1.5f64.ln();
        assert!((barrier_objective(&p, &x, 1.0) - expected).abs() < 1e-15);
        assert!((expected - (-0.2876820724517809)).abs() < 1e-15);
    }

    #[test]
    fn problem_json_round_trip() {
        let p = square([1.0, 2.0]);
        let q = PathProblem::from_json(&p.to_json()).unwrap();
        assert_eq!(p, q);
        let bad = r#"{"A": [[1, 0], [0, 1]], "b": [1], "c": [1, 1]}"#;
        assert!(matches!(
            PathProblem::from_json(bad),
            Err(crate::Error::Model(ModelError::Dimension(_)))
        ));
    }

    proptest! {
        #[test]
        fn barrier_objective_is_midpoint_concave(
            x1 in -0.99f64..0.99, y1 in -0.99f64..0.99,
            x2 in -0.99f64..0.99, y2 in -0.99f64..0.99,
            c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, mu in 0.01f64..10.0,
        ) {
            let p = square([c1, c2]);
            let a = DVector::from_column_slice(&[x1, y1]);
            let b = DVector::from_column_slice(&[x2, y2]);
            let mid = (&a + &b) * 0.5;
            let fa = barrier_objective(&p, &a, mu);
            let fb = barrier_objective(&p, &b, mu);
            let fm = barrier_objective(&p, &mid, mu);
            prop_assert!(fm >= 0.5 * (fa + fb) - 1e-12);
        }
    }
}
