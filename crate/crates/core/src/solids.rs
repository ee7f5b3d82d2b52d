//! Platonic solids and facet enumeration from vertex coordinates.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, Polytope};

/// Coplanarity slack relative to the circumradius.
pub const PLANE_TOL: f64 = 1e-9;
/// Rounding step of the normal key used to merge duplicate facets.
const NORMAL_KEY: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum SolidsError {
    #[error("unknown solid {0:?}")]
    UnknownSolid(String),
    #[error("need at least 4 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {0} is not finite")]
    NonFinite(usize),
    #[error("vertices span only {0} dimensions")]
    Dimension(usize),
    #[error("vertex {0} is not in convex position")]
    NotConvex(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolidName {
    Tetrahedron,
    Cube,
    Octahedron,
    Dodecahedron,
    Icosahedron,
}

impl SolidName {
    pub const ALL: [SolidName; 5] = [
        SolidName::Tetrahedron,
        SolidName::Cube,
        SolidName::Octahedron,
        SolidName::Dodecahedron,
        SolidName::Icosahedron,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolidName::Tetrahedron => "tetrahedron",
            SolidName::Cube => "cube",
            SolidName::Octahedron => "octahedron",
            SolidName::Dodecahedron => "dodecahedron",
            SolidName::Icosahedron => "icosahedron",
        }
    }
}

impl fmt::Display for SolidName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolidName {
    type Err = SolidsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SolidName::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| SolidsError::UnknownSolid(s.to_string()))
    }
}

/// A solid given by its vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSolid {
    vertices: Vec<Vector3<f64>>,
    name: Option<SolidName>,
}

impl VertexSolid {
    /// Checks count, finiteness and full dimension. Convex position is
    /// checked by [`enumerate_facets`].
    pub fn new(vertices: Vec<Vector3<f64>>, name: Option<SolidName>) -> Result<Self, SolidsError> {
        if vertices.len() < 4 {
            return Err(SolidsError::TooFewVertices(vertices.len()));
        }
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(SolidsError::NonFinite(i));
        }
        let solid = VertexSolid { vertices, name };
        let dim = solid.affine_dimension();
        if dim < 3 {
            return Err(SolidsError::Dimension(dim));
        }
        Ok(solid)
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn name(&self) -> Option<SolidName> {
        self.name
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.vertices.iter().sum::<Vector3<f64>>() / self.vertices.len() as f64
    }

    /// Largest distance from the centroid to a vertex.
    pub fn circumradius(&self) -> f64 {
        let c = self.centroid();
        self.vertices.iter().map(|v| (v - c).norm()).fold(0.0, f64::max)
    }

    /// Copy translated to centroid 0 and scaled to circumradius 1.
    pub fn normalized(&self) -> VertexSolid {
        let c = self.centroid();
        let r = self.circumradius();
        VertexSolid {
            vertices: self.vertices.iter().map(|v| (v - c) / r).collect(),
            name: self.name,
        }
    }

    fn affine_dimension(&self) -> usize {
        let c = self.centroid();
        let mut m = DMatrix::zeros(self.vertices.len(), 3);
        for (i, v) in self.vertices.iter().enumerate() {
            m.set_row(i, &(v - c).transpose());
        }
        let sv = m.singular_values();
        let tol = PLANE_TOL * sv.max().max(f64::MIN_POSITIVE);
        sv.iter().filter(|&&s| s > tol).count()
    }

    pub fn to_file(&self) -> SolidFile {
        SolidFile {
            vertices: self.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
            name: self.name,
        }
    }
}

/// Solid JSON: `{"vertices": [[x, y, z], ...]}` with an optional `name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolidFile {
    pub vertices: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<SolidName>,
}

impl TryFrom<SolidFile> for VertexSolid {
    type Error = SolidsError;

    fn try_from(f: SolidFile) -> Result<Self, Self::Error> {
        VertexSolid::new(f.vertices.into_iter().map(Vector3::from).collect(), f.name)
    }
}

/// The five Platonic solids, centred at the origin with circumradius 1.
///
/// Coordinates: tetrahedron on alternate cube corners, cube `(+-1,+-1,+-1)`,
/// octahedron `+-e_i`, dodecahedron and icosahedron from the usual
/// golden-ratio sets.
pub fn platonic(name: SolidName) -> VertexSolid {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let signs = [1.0, -1.0];
    let mut v: Vec<Vector3<f64>> = Vec::new();
    let cube_corners = || {
        let mut out = Vec::with_capacity(8);
        for &a in &signs {
            for &b in &signs {
                for &c in &signs {
                    out.push(Vector3::new(a, b, c));
                }
            }
        }
        out
    };
    match name {
        SolidName::Tetrahedron => {
            v.extend(cube_corners().into_iter().filter(|p| p.x * p.y * p.z > 0.0));
        }
        SolidName::Cube => v.extend(cube_corners()),
        SolidName::Octahedron => {
            for i in 0..3 {
                for &s in &signs {
                    let mut p = Vector3::zeros();
                    p[i] = s;
                    v.push(p);
                }
            }
        }
        SolidName::Dodecahedron => {
            v.extend(cube_corners());
            for &a in &signs {
                for &b in &signs {
                    v.push(Vector3::new(0.0, a / phi, b * phi));
                    v.push(Vector3::new(a / phi, b * phi, 0.0));
                    v.push(Vector3::new(a * phi, 0.0, b / phi));
                }
            }
        }
        SolidName::Icosahedron => {
            for &a in &signs {
                for &b in &signs {
                    v.push(Vector3::new(0.0, a, b * phi));
                    v.push(Vector3::new(a, b * phi, 0.0));
                    v.push(Vector3::new(a * phi, 0.0, b));
                }
            }
        }
    }
    let r = v[0].norm();
    VertexSolid {
        vertices: v.into_iter().map(|p| p / r).collect(),
        name: Some(name),
    }
}

/// Facet inequalities `n_f^T x <= offset_f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetSystem {
    /// Unit outward normals.
    pub normals: Vec<[f64; 3]>,
    pub offsets: Vec<f64>,
    /// Sorted vertex indices on each facet.
    pub incident_vertices: Vec<Vec<usize>>,
}

impl FacetSystem {
    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn to_polytope(&self) -> Result<Polytope, SolidsError> {
        let m = self.normals.len();
        let a = DMatrix::from_fn(m, 3, |i, j| self.normals[i][j]);
        Ok(Polytope::new(a, DVector::from_column_slice(&self.offsets))?)
    }

    /// Vertex pairs that share at least two facets.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.incident_vertices {
            for (a, &i) in f.iter().enumerate() {
                for &j in &f[a + 1..] {
                    *count.entry((i, j)).or_default() += 1;
                }
            }
        }
        let mut edges: Vec<_> = count.into_iter().filter(|&(_, c)| c >= 2).map(|(e, _)| e).collect();
        edges.sort_unstable();
        edges
    }

    /// `V - E + F` for a solid with `vertices` vertices.
    pub fn euler_characteristic(&self, vertices: usize) -> i64 {
        vertices as i64 - self.edges().len() as i64 + self.len() as i64
    }

    /// Mean of each facet's incident vertices.
    pub fn facet_centroids(&self, solid: &VertexSolid) -> Vec<Vector3<f64>> {
        self.incident_vertices
            .iter()
            .map(|f| f.iter().map(|&i| solid.vertices[i]).sum::<Vector3<f64>>() / f.len() as f64)
            .collect()
    }
}

/// Enumerates facets by testing the plane through every vertex triple for
/// support, merging planes with equal rounded normals.
pub fn enumerate_facets(solid: &VertexSolid) -> Result<FacetSystem, SolidsError> {
    let v = &solid.vertices;
    let n = v.len();
    let tol = PLANE_TOL * solid.circumradius().max(f64::MIN_POSITIVE);
    let mut keys: HashMap<[i64; 3], usize> = HashMap::new();
    let mut out = FacetSystem {
        normals: Vec::new(),
        offsets: Vec::new(),
        incident_vertices: Vec::new(),
    };
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let raw = (v[j] - v[i]).cross(&(v[k] - v[i]));
                let len = raw.norm();
                if len <= tol * tol.max(1.0) {
                    continue;
                }
                let mut normal = raw / len;
                let mut offset = normal.dot(&v[i]);
                let (mut below, mut above) = (false, false);
                for p in v {
                    let d = normal.dot(p) - offset;
                    below |= d < -tol;
                    above |= d > tol;
                }
                if below && above {
                    continue;
                }
                if above {
                    normal = -normal;
                    offset = -offset;
                }
                let key = normal.map(|x| (x / NORMAL_KEY).round() as i64);
                let key = [key.x, key.y, key.z];
                if keys.contains_key(&key) {
                    continue;
                }
                let incident: Vec<usize> = (0..n).filter(|&q| (normal.dot(&v[q]) - offset).abs() <= tol).collect();
                keys.insert(key, out.normals.len());
                out.normals.push([normal.x, normal.y, normal.z]);
                out.offsets.push(offset);
                out.incident_vertices.push(incident);
            }
        }
    }
    // a hull vertex lies on at least three facets
    let mut degree = vec![0usize; n];
    for f in &out.incident_vertices {
        for &q in f {
            degree[q] += 1;
        }
    }
    if let Some(q) = degree.iter().position(|&d| d < 3) {
        return Err(SolidsError::NotConvex(q));
    }
    Ok(out)
}

/// Facet system of a named Platonic solid as a polytope.
pub fn platonic_polytope(name: SolidName) -> Result<Polytope, SolidsError> {
    enumerate_facets(&platonic(name))?.to_polytope()
}

/// Rotation taking `e_3` to the unit vector `n`.
pub(crate) fn frame_towards(n: &Vector3<f64>) -> Matrix3<f64> {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = helper.cross(n).normalize();
    let w = n.cross(&u);
    Matrix3::from_columns(&[u, w, *n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_problem, PathProblem};
    use crate::sampler::{trace, SamplerConfig};
    use std::collections::BTreeSet;

    /// Independent oracle: supporting planes through vertex triples,
    /// deduplicated by their incident vertex set.
    fn brute_force_facets(v: &[Vector3<f64>]) -> usize {
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        for i in 0..v.len() {
            for j in 0..v.len() {
                for k in 0..v.len() {
                    if i == j || j == k || i == k {
                        continue;
                    }
                    let n = (v[j] - v[i]).cross(&(v[k] - v[i]));
                    if n.norm() < 1e-12 {
                        continue;
                    }
                    let side: Vec<f64> = v.iter().map(|p| n.dot(&(p - v[i])) / n.norm()).collect();
                    if side.iter().all(|&d| d <= 1e-9) || side.iter().all(|&d| d >= -1e-9) {
                        seen.insert((0..v.len()).filter(|&q| side[q].abs() <= 1e-9).collect());
                    }
                }
            }
        }
        seen.len()
    }

    #[test]
    fn facet_counts_match_oracle() {
        let expected = [4, 6, 8, 12, 20];
        for (name, want) in SolidName::ALL.into_iter().zip(expected) {
            let s = platonic(name);
            let f = enumerate_facets(&s).unwrap();
            assert_eq!(f.len(), want, "{name}");
            assert_eq!(brute_force_facets(s.vertices()), want, "{name}");
            assert_eq!(f.euler_characteristic(s.vertices().len()), 2, "{name}");
        }
    }

    #[test]
    fn unit_cube_normals_and_offsets() {
        let s = platonic(SolidName::Cube);
        let raw: Vec<_> = s.vertices().iter().map(|v| v * 3f64.sqrt()).collect();
        let f = enumerate_facets(&VertexSolid::new(raw, None).unwrap()).unwrap();
        assert_eq!(f.len(), 6);
        for (n, off) in f.normals.iter().zip(&f.offsets) {
            assert!((off - 1.0).abs() < 1e-12);
            let mut sorted = n.map(f64::abs);
            sorted.sort_by(f64::total_cmp);
            assert!(sorted[0].abs() < 1e-12 && sorted[1].abs() < 1e-12 && (sorted[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn platonic_vertex_sets() {
        let counts = [4, 8, 6, 20, 12];
        for (name, want) in SolidName::ALL.into_iter().zip(counts) {
            let s = platonic(name);
            assert_eq!(s.vertices().len(), want);
            assert!(s.centroid().norm() < 1e-12);
            for v in s.vertices() {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
        let oct = platonic(SolidName::Octahedron);
        assert!(oct.vertices().iter().all(|v| (v.amax() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn edges_have_equal_length() {
        let edge_counts = [6, 12, 12, 30, 30];
        for (name, want) in SolidName::ALL.into_iter().zip(edge_counts) {
            let s = platonic(name);
            let v = s.vertices();
            let mut d: Vec<f64> = Vec::new();
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    d.push((v[i] - v[j]).norm());
                }
            }
            let min = d.iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(d.iter().filter(|&&x| (x - min).abs() < 1e-9).count(), want, "{name}");
            let edges = enumerate_facets(&s).unwrap().edges();
            assert_eq!(edges.len(), want);
            for (i, j) in edges {
                assert!(((v[i] - v[j]).norm() - min).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normals_point_outward_and_vertices_are_inside() {
        for name in SolidName::ALL {
            let s = platonic(name);
            let f = enumerate_facets(&s).unwrap();
            for (n, &off) in f.normals.iter().zip(&f.offsets) {
                let n = Vector3::from(*n);
                assert!(n.dot(&s.centroid()) < off);
                assert!((n.norm() - 1.0).abs() < 1e-12);
                assert!(s.vertices().iter().all(|v| n.dot(v) <= off + 1e-9));
            }
        }
    }

    #[test]
    fn polytopes_validate() {
        for name in SolidName::ALL {
            let poly = platonic_polytope(name).unwrap();
            let p = PathProblem::new(poly, DVector::from_column_slice(&[0.3, 0.2, 1.0])).unwrap();
            assert!(validate_problem(&p).ok(), "{name}");
        }
    }

    #[test]
    fn facet_objective_ends_at_facet_centroid() {
        for name in [SolidName::Cube, SolidName::Octahedron] {
            let s = platonic(name);
            let f = enumerate_facets(&s).unwrap();
            let centroids = f.facet_centroids(&s);
            let p = PathProblem::new(f.to_polytope().unwrap(), DVector::from_column_slice(&f.normals[0])).unwrap();
            let path = trace(&p, &SamplerConfig::default()).unwrap();
            let x_star = Vector3::new(path.x_star[0], path.x_star[1], path.x_star[2]);
            assert!((x_star - centroids[0]).norm() < 1e-5, "{name}");
            for x in path.points() {
                assert!(p.polytope().contains_strictly(x));
            }
        }
    }

    #[test]
    fn rejects_bad_solids() {
        let mut v = platonic(SolidName::Cube).vertices().to_vec();
        v.push(Vector3::zeros());
        assert!(matches!(
            enumerate_facets(&VertexSolid::new(v, None).unwrap()),
            Err(SolidsError::NotConvex(8))
        ));
        let flat = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
        ];
        assert!(matches!(VertexSolid::new(flat, None), Err(SolidsError::Dimension(2))));
        assert!(matches!(
            VertexSolid::new(vec![Vector3::zeros(); 3], None),
            Err(SolidsError::TooFewVertices(3))
        ));
        assert!(matches!(
            "prism".parse::<SolidName>(),
            Err(SolidsError::UnknownSolid(_))
        ));
        assert_eq!("Cube".parse::<SolidName>().unwrap(), SolidName::Cube);
    }

    #[test]
    fn frame_maps_axis() {
        let n = Vector3::new(1.0, 2.0, -2.0) / 3.0;
        let r = frame_towards(&n);
        assert!((r * Vector3::z() - n).norm() < 1e-15);
        assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-14);
        assert!((r.determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn json_round_trip() {
        let s = platonic(SolidName::Tetrahedron);
        let text = serde_json::to_string(&s.to_file()).unwrap();
        let back: VertexSolid = serde_json::from_str::<SolidFile>(&text).unwrap().try_into().unwrap();
        assert_eq!(back, s);
        let f: FacetSystem =
            serde_json::from_str(&serde_json::to_string(&enumerate_facets(&s).unwrap()).unwrap()).unwrap();
        assert_eq!(f.len(), 4);
    }
}
