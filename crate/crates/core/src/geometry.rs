//! Constructors and transforms for the standard geometries.
//!
//! Regular k-gons, the rotation `R(theta)`, affine transport of problems,
//! stochastic "leaf" objectives and the two closed-form paths (the disc, and
//! the cube/cylinder pair).

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, PathProblem, Polytope};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("a k-gon needs k >= 3, got {0}")]
    TooFewSides(usize),
    #[error("row index {index} out of range 1..={rows}")]
    RowIndex { index: usize, rows: usize },
    #[error("affine map is singular or ill-conditioned (condition number {0:e})")]
    Conditioning(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("objective must be nonzero")]
    ZeroObjective,
    #[error("closed form needs c1 != 0 and (c2, c3) != 0")]
    CylinderPrecondition,
    #[error("invalid leaf spec: {0}")]
    LeafSpec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Regular k-gon `{x : A x <= e}` with row `i` equal to
/// `(cos(2 pi i / k), sin(2 pi i / k))` for `i = 0..k`.
pub fn kgon(k: usize) -> Result<Polytope, GeometryError> {
    if k < 3 {
        return Err(GeometryError::TooFewSides(k));
    }
    // entries that are zero in exact arithmetic (quarter turns) are snapped to 0
    let snap = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
    let a = DMatrix::from_fn(k, 2, |i, j| {
        let t = i as f64 * TAU / k as f64;
        snap(if j == 0 { t.cos() } else { t.sin() })
    });
    Ok(Polytope::new(a, DVector::from_element(k, 1.0))?)
}

/// `R(theta) = [[cos, sin], [-sin, cos]]`.
pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, s, -s, c)
}

/// Counter-clockwise rotation `R(-theta)`, the usual mathematical convention.
pub fn rotation_ccw(theta: f64) -> Matrix2<f64> {
    rotation(-theta)
}

/// `c = A_i R(theta)` for the 1-based row `i`, as a column vector.
pub fn facet_objective(p: &Polytope, i: usize, theta: f64) -> Result<DVector<f64>, GeometryError> {
    if p.dim() != 2 {
        return Err(GeometryError::Dimension(format!(
            "facet rotation needs a planar polytope, got dimension {}",
            p.dim()
        )));
    }
    if i == 0 || i > p.rows() {
        return Err(GeometryError::RowIndex {
            index: i,
            rows: p.rows(),
        });
    }
    let row = p.a().row(i - 1);
    let row = nalgebra::RowVector2::new(row[0], row[1]);
    let c = row * rotation(theta);
    Ok(DVector::from_column_slice(&[c[0], c[1]]))
}

/// Affine map `T(x) = B x + d` with invertible `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    b: DMatrix<f64>,
    d: DVector<f64>,
}

/// Largest admissible condition number of `B`.
const MAX_CONDITION: f64 = 1e12;

impl AffineMap {
    pub fn new(b: DMatrix<f64>, d: DVector<f64>) -> Result<Self, GeometryError> {
        if !b.is_square() || b.nrows() != d.len() || d.is_empty() {
            return Err(GeometryError::Dimension(format!(
                "B is {}x{}, d has {} entries",
                b.nrows(),
                b.ncols(),
                d.len()
            )));
        }
        if b.iter().chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::Dimension("non-finite entry".into()));
        }
        let cond = condition_number(&b);
        if !(cond < MAX_CONDITION) {
            return Err(GeometryError::Conditioning(cond));
        }
        Ok(AffineMap { b, d })
    }

    pub fn identity(n: usize) -> Self {
        AffineMap {
            b: DMatrix::identity(n, n),
            d: DVector::zeros(n),
        }
    }

    pub fn translation(d: DVector<f64>) -> Self {
        AffineMap {
            b: DMatrix::identity(d.len(), d.len()),
            d,
        }
    }

    /// Planar similarity `x -> scale * Rccw(angle) x + offset`.
    pub fn similarity2(scale: f64, angle: f64, offset: [f64; 2]) -> Result<Self, GeometryError> {
        let r = rotation_ccw(angle) * scale;
        AffineMap::new(
            DMatrix::from_fn(2, 2, |i, j| r[(i, j)]),
            DVector::from_column_slice(&offset),
        )
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.b * x + &self.d
    }

    /// `self` after `inner`: `x -> self(inner(x))`.
    pub fn after(&self, inner: &AffineMap) -> Result<AffineMap, GeometryError> {
        AffineMap::new(&self.b * &inner.b, &self.b * &inner.d + &self.d)
    }

    pub fn inverse(&self) -> AffineMap {
        let inv = self.b.clone().try_inverse().expect("invertible by construction");
        let d = -(&inv * &self.d);
        AffineMap { b: inv, d }
    }

    /// Ratio of largest to smallest singular value of `B`.
    pub fn condition(&self) -> f64 {
        condition_number(&self.b)
    }
}

fn condition_number(b: &DMatrix<f64>) -> f64 {
    let sv = b.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// The problem whose central path is the image of `p`'s path under `t`.
///
/// With `x = B^-1 (z - d)` the constraints become
/// `A B^-1 z <= b + A B^-1 d` and the objective `(B^-1)' c`.
pub fn transform_problem(p: &PathProblem, t: &AffineMap) -> Result<PathProblem, GeometryError> {
    if t.dim() != p.polytope().dim() {
        return Err(GeometryError::Dimension(format!(
            "map acts on dimension {}, problem has dimension {}",
            t.dim(),
            p.polytope().dim()
        )));
    }
    let inv = t.inverse();
    let a_hat = p.a() * &inv.b;
    let b_hat = p.b() + &a_hat * &t.d;
    let c_hat = inv.b.transpose() * p.c();
    Ok(PathProblem::new(Polytope::new(a_hat, b_hat)?, c_hat)?)
}

/// Parameters for stochastic leaf objectives in a k-gon.
///
/// In JSON only `k` is required; the rest default as in [`LeafSpec::new`]
/// with `eta = 0.0425` and `seed = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "LeafSpecFile")]
pub struct LeafSpec {
    pub k: usize,
    /// Mean of the bracket coefficient, in (0, 1/2).
    pub eta: f64,
    /// Standard deviation of the bracket coefficient.
    pub sigma: f64,
    pub inner_low: f64,
    pub inner_high: f64,
    /// Inclusive range for the number of interior paths per leaf.
    pub paths_per_leaf: [usize; 2],
    pub seed: u64,
}

impl LeafSpec {
    /// Defaults: `sigma = eta / 3`, interior support `[2 eta, 1 - 2 eta]`,
    /// three or four interior paths per leaf.
    pub fn new(k: usize, eta: f64, seed: u64) -> Self {
        LeafSpec {
            k,
            eta,
            sigma: eta / 3.0,
            inner_low: 2.0 * eta,
            inner_high: 1.0 - 2.0 * eta,
            paths_per_leaf: [3, 4],
            seed,
        }
    }

    pub const DEFAULT_ETA: f64 = 0.0425;

    pub fn check(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::LeafSpec(m.to_string()));
        if self.k < 3 {
            return bad("k must be at least 3");
        }
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return bad("eta must lie in (0, 1/2)");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        if !(self.inner_low < self.inner_high) || !self.inner_low.is_finite() || !self.inner_high.is_finite() {
            return bad("inner_low must be below inner_high");
        }
        if self.paths_per_leaf[0] > self.paths_per_leaf[1] {
            return bad("paths_per_leaf must be an ordered range");
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LeafSpecFile {
    k: usize,
    eta: Option<f64>,
    sigma: Option<f64>,
    inner_low: Option<f64>,
    inner_high: Option<f64>,
    paths_per_leaf: Option<[usize; 2]>,
    #[serde(default)]
    seed: u64,
}

impl From<LeafSpecFile> for LeafSpec {
    fn from(f: LeafSpecFile) -> Self {
        let base = LeafSpec::new(f.k, f.eta.unwrap_or(LeafSpec::DEFAULT_ETA), f.seed);
        LeafSpec {
            sigma: f.sigma.unwrap_or(base.sigma),
            inner_low: f.inner_low.unwrap_or(base.inner_low),
            inner_high: f.inner_high.unwrap_or(base.inner_high),
            paths_per_leaf: f.paths_per_leaf.unwrap_or(base.paths_per_leaf),
            ..base
        }
    }
}

/// Objectives of one leaf, between facet normals `i` and `j = i + 1 (mod k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    /// 0-based index of the first facet normal.
    pub facet: usize,
    /// Draws behind the two bracket paths.
    pub alphas: [f64; 2],
    pub bracket: [Vec<f64>; 2],
    pub betas: Vec<f64>,
    pub interior: Vec<Vec<f64>>,
}

impl Leaf {
    /// All objectives of the leaf, bracket first.
    pub fn objectives(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.bracket.iter().chain(self.interior.iter())
    }
}

/// `(1 - w) A_i + w A_j` for 0-based rows `i`, `j`.
pub fn blend_rows(p: &Polytope, i: usize, j: usize, w: f64) -> Vec<f64> {
    let v = p.a().row(i) * (1.0 - w) + p.a().row(j) * w;
    v.iter().copied().collect()
}

/// Draws the leaf objectives of a k-gon.
///
/// Leaf `i` is bracketed by `(1 - a1) A_i + a1 A_j` and
/// `(1 - a2) A_j + a2 A_i` with independent `a1, a2 ~ N(eta, sigma^2)`;
/// interior objectives are `(1 - b) A_i + b A_j` with
/// `b ~ U(inner_low, inner_high)`.
pub fn leaf_c_vectors(spec: &LeafSpec) -> Result<Vec<Leaf>, GeometryError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(spec.eta, spec.sigma).map_err(|e| GeometryError::LeafSpec(e.to_string()))?;
    let uniform = Uniform::new(spec.inner_low, spec.inner_high).map_err(|e| GeometryError::LeafSpec(e.to_string()))?;
    let poly = kgon(spec.k)?;
    let mix = |i: usize, j: usize, w: f64| blend_rows(&poly, i, j, w);
    let mut leaves = Vec::with_capacity(spec.k);
    for i in 0..spec.k {
        let j = (i + 1) % spec.k;
        let a1 = normal.sample(&mut rng);
        let a2 = normal.sample(&mut rng);
        let count = rng.random_range(spec.paths_per_leaf[0]..=spec.paths_per_leaf[1]);
        let betas: Vec<f64> = (0..count).map(|_| uniform.sample(&mut rng)).collect();
        leaves.push(Leaf {
            facet: i,
            alphas: [a1, a2],
            bracket: [mix(i, j, a1), mix(j, i, a2)],
            interior: betas.iter().map(|&b| mix(i, j, b)).collect(),
            betas,
        });
    }
    Ok(leaves)
}

/// Central path in the unit disc `{x : ||x||^2 <= 1}`:
/// `x(mu) = (sqrt(mu^2 + ||c||^2) - mu) / ||c||^2 * c`.
///
/// `mu = 0` gives the endpoint `c / ||c||` and `mu = inf` the center.
pub fn disc_path(c: &Vector2<f64>, mu: f64) -> Result<Vector2<f64>, GeometryError> {
    let cc = c.norm_squared();
    if cc == 0.0 || !cc.is_finite() {
        return Err(GeometryError::ZeroObjective);
    }
    if mu == f64::INFINITY {
        return Ok(Vector2::zeros());
    }
    if !(mu >= 0.0) {
        return Err(GeometryError::Dimension(format!("mu must be nonnegative, got {mu}")));
    }
    // (sqrt(mu^2 + cc) - mu) / cc rewritten as 1 / (sqrt(mu^2 + cc) + mu) to avoid cancellation
    let scale = 1.0 / (mu.hypot(cc.sqrt()) + mu);
    Ok(c * scale)
}

/// Box `[-b1, b1] x [-b2, b2] x [-b2, b2]` as six half-spaces.
pub fn cube(b1: f64, b2: f64) -> Result<Polytope, GeometryError> {
    let rows = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![-1.0, 0.0, 0.0],
        vec![0.0, -1.0, 0.0],
        vec![0.0, 0.0, -1.0],
    ];
    Ok(Polytope::from_rows(&rows, &[b1, b2, b2, b1, b2, b2])?)
}

/// Rotation in the `x2, x3` plane taking `c` to `(c1, ||(c2, c3)||, 0)`.
pub fn cylinder_rotation(c: &Vector3<f64>) -> Result<Matrix3<f64>, GeometryError> {
    let r = c[1].hypot(c[2]);
    if c[0] == 0.0 || r == 0.0 {
        return Err(GeometryError::CylinderPrecondition);
    }
    let (c2, c3) = (c[1] / r, c[2] / r);
    Ok(Matrix3::new(1.0, 0.0, 0.0, 0.0, c2, c3, 0.0, -c3, c2))
}

/// One coordinate of the cube path: the root of
/// `t x^2 + 2 mu x - b^2 t = 0` inside `(-b, b)`.
fn box_coordinate(t: f64, b: f64, mu: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    // -mu/t + sqrt(mu^2 + t^2 b^2)/|t|, written without cancellation
    b * b * t / (mu + mu.hypot(t * b))
}

/// Closed-form path point shared by the rotated cube and the cylinder
/// `{ |x1| <= b1, x2^2 + x3^2 <= b2^2 }`.
///
/// Returns `R^-1 x(mu)` where `x(mu)` is the cube path for `T(c) = R c`.
/// The radial part uses `b2^2` under the square root.
pub fn cube_cylinder_path(c: &Vector3<f64>, b: (f64, f64), mu: f64) -> Result<Vector3<f64>, GeometryError> {
    let rot = cylinder_rotation(c)?;
    if !(mu > 0.0) {
        return Err(GeometryError::Dimension(format!("mu must be positive, got {mu}")));
    }
    let tc = rot * c;
    let x = Vector3::new(
        box_coordinate(tc[0], b.0, mu),
        box_coordinate(tc[1], b.1, mu),
        box_coordinate(tc[2], b.1, mu),
    );
    Ok(rot.transpose() * x)
}

/// Draws one uniformly random unit vector in the plane.
pub fn random_unit2<R: Rng>(rng: &mut R) -> Vector2<f64> {
    let t: f64 = rng.random_range(0.0..TAU);
    Vector2::new(t.cos(), t.sin())
}
