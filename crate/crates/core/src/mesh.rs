//! Triangle meshes: tubes swept along paths, flat extrusions of planar
//! scenes, and STL output.

use std::collections::HashMap;
use std::f64::consts::TAU;

use geo::algorithm::buffer::{BufferStyle, LineCap, LineJoin};
use geo::{Buffer, Coord, LineString, MultiLineString, Orient, Polygon, Simplify};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compose::Scene;

/// Defaults for flat extrusion, in mm.
pub const FLAT_HEIGHT: f64 = 1.5;
pub const FLAT_WIDTH: f64 = 1.2;

/// Angular step of the round joins and caps in flat extrusion.
const ROUND_STEP: f64 = 0.1;

/// Centerline deviation allowed when simplifying paths before meshing, as a
/// fraction of the tube radius or stroke width.
pub const SIMPLIFY_FRACTION: f64 = 0.01;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("segment {0} has coincident endpoints")]
    DegenerateSegment(usize),
    #[error("{name} must be positive and finite, got {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("need at least 3 segments, got {0}")]
    Segments(usize),
    #[error("triangle {0} has an index out of range")]
    Index(usize),
    #[error("triangle {0} has zero area")]
    ZeroArea(usize),
    #[error("nothing to mesh")]
    Empty,
    #[error("flat extrusion needs a planar scene, got dimension {0}")]
    Dimension(usize),
    #[error("{0} triangles exceed the STL count field")]
    TooManyTriangles(usize),
    #[error("malformed STL: {0}")]
    Parse(String),
}

fn positive(name: &'static str, value: f64) -> Result<(), MeshError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(MeshError::Parameter { name, value })
    }
}

/// Indexed triangle mesh with counter-clockwise (outward) triangles.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    /// Unit normal per triangle.
    pub normals: Vec<Vector3<f64>>,
}

impl TriMesh {
    /// Validates indices and areas and computes normals.
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        let mut normals = Vec::with_capacity(triangles.len());
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v as usize >= vertices.len()) {
                return Err(MeshError::Index(i));
            }
            let [a, b, c] = t.map(|v| vertices[v as usize]);
            let n = (b - a).cross(&(c - a));
            let len = n.norm();
            if !(len > 0.0) {
                return Err(MeshError::ZeroArea(i));
            }
            normals.push(n / len);
        }
        Ok(TriMesh {
            vertices,
            triangles,
            normals,
        })
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Appends `other`, shifting its indices.
    pub fn append(&mut self, other: &TriMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|v| v + base)));
        self.normals.extend_from_slice(&other.normals);
    }

    /// Every directed edge appears once and its reverse once, so every
    /// undirected edge borders exactly two consistently oriented triangles.
    pub fn is_watertight(&self) -> bool {
        let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// Volume by the divergence theorem; positive for outward orientation.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|v| self.vertices[v as usize]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }
}

/// Tangent, normal and binormal of one ring; `s = t x r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub t: Vector3<f64>,
    pub r: Vector3<f64>,
    pub s: Vector3<f64>,
}

fn check_polyline(points: &[Vector3<f64>]) -> Result<(), MeshError> {
    if points.len() < 2 {
        return Err(MeshError::TooFewPoints(points.len()));
    }
    for (i, w) in points.windows(2).enumerate() {
        if !((w[1] - w[0]).norm() > 0.0) {
            return Err(MeshError::DegenerateSegment(i));
        }
    }
    Ok(())
}

/// Tangent at each vertex: segment direction at the ends, bisector of the
/// adjacent unit directions inside.
fn vertex_tangents(points: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let dirs: Vec<Vector3<f64>> = points.windows(2).map(|w| (w[1] - w[0]).normalize()).collect();
    let n = points.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                dirs[0]
            } else if i == n - 1 {
                dirs[n - 2]
            } else {
                let b = dirs[i - 1] + dirs[i];
                if b.norm() > 1e-12 {
                    b.normalize()
                } else {
                    dirs[i]
                }
            }
        })
        .collect()
}

/// Rotation-minimizing frames by the double-reflection method.
pub fn rotation_minimizing_frames(points: &[Vector3<f64>]) -> Result<Vec<Frame>, MeshError> {
    check_polyline(points)?;
    let tangents = vertex_tangents(points);
    let first = crate::solids::frame_towards(&tangents[0]);
    let mut r = first.column(0).into_owned();
    let mut frames = Vec::with_capacity(points.len());
    frames.push(Frame {
        t: tangents[0],
        r,
        s: tangents[0].cross(&r),
    });
    for i in 0..points.len() - 1 {
        let v1 = points[i + 1] - points[i];
        let c1 = v1.dot(&v1);
        let t = tangents[i];
        let r_l = r - v1 * (2.0 / c1 * v1.dot(&r));
        let t_l = t - v1 * (2.0 / c1 * v1.dot(&t));
        let t_next = tangents[i + 1];
        let v2 = t_next - t_l;
        let c2 = v2.dot(&v2);
        r = if c2 > 1e-300 {
            r_l - v2 * (2.0 / c2 * v2.dot(&r_l))
        } else {
            r_l
        };
        // remove rounding drift out of the ring plane
        r = (r - t_next * t_next.dot(&r)).normalize();
        frames.push(Frame {
            t: t_next,
            r,
            s: t_next.cross(&r),
        });
    }
    Ok(frames)
}

/// Smallest local radius of curvature of the polyline, estimated as chord
/// length over turning angle; infinite for straight polylines.
pub fn min_curvature_radius(points: &[Vector3<f64>]) -> f64 {
    points
        .windows(3)
        .filter_map(|w| {
            let (a, b) = (w[1] - w[0], w[2] - w[1]);
            let angle = a.angle(&b);
            (angle > 0.0).then(|| 0.5 * (a.norm() + b.norm()) / angle)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Sweeps a circle of `radius` along `points`.
///
/// Rings of `segments` vertices sit in the plane normal to the vertex
/// tangent; consecutive rings are joined by `2 segments` triangles and
/// `caps` closes both ends with fans around apex points.
pub fn tube(points: &[Vector3<f64>], radius: f64, segments: usize, caps: bool) -> Result<TriMesh, MeshError> {
    positive("radius", radius)?;
    if segments < 3 {
        return Err(MeshError::Segments(segments));
    }
    let frames = rotation_minimizing_frames(points)?;
    let rho = min_curvature_radius(points);
    if radius > rho {
        log::warn!("tube radius {radius} exceeds the local radius of curvature {rho}; the surface may self-intersect");
    }
    let n = points.len();
    let seg = segments as u32;
    let mut vertices = Vec::with_capacity(n * segments + 2);
    for (p, f) in points.iter().zip(&frames) {
        for j in 0..segments {
            let phi = TAU * j as f64 / segments as f64;
            vertices.push(p + (f.r * phi.cos() + f.s * phi.sin()) * radius);
        }
    }
    let ring = |i: usize, j: u32| i as u32 * seg + j % seg;
    let mut triangles = Vec::with_capacity(2 * segments * n);
    for i in 0..n - 1 {
        for j in 0..seg {
            let (a, b) = (ring(i, j), ring(i, j + 1));
            let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
            triangles.push([a, b, c]);
            triangles.push([b, d, c]);
        }
    }
    if caps {
        let start = vertices.len() as u32;
        vertices.push(points[0]);
        let end = start + 1;
        vertices.push(points[n - 1]);
        for j in 0..seg {
            triangles.push([start, ring(0, j + 1), ring(0, j)]);
            triangles.push([end, ring(n - 1, j), ring(n - 1, j + 1)]);
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Mesh options for a whole scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TubeOptions {
    pub radius: f64,
    pub segments: usize,
    pub caps: bool,
}

impl Default for TubeOptions {
    fn default() -> Self {
        TubeOptions {
            radius: 0.5 * FLAT_WIDTH,
            segments: 16,
            caps: true,
        }
    }
}

/// Drops samples closer than `tol` to the last kept one (always keeping
/// the final sample).
fn thin(points: &[Vector3<f64>], tol: f64) -> Vec<Vector3<f64>> {
    let mut out: Vec<Vector3<f64>> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let last = i + 1 == points.len();
        match out.last() {
            Some(q) if (p - q).norm() <= tol => {
                if last && out.len() > 1 {
                    *out.last_mut().expect("nonempty") = *p;
                }
            }
            _ => out.push(*p),
        }
    }
    out
}

/// Ramer-Douglas-Peucker in 3D: keeps the endpoints and every sample that
/// deviates more than `tol` from the chord of its kept neighbours.
fn simplify3(points: &[Vector3<f64>], tol: f64) -> Vec<Vector3<f64>> {
    let n = points.len();
    if n < 3 {
        return points.to_vec();
    }
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0, n - 1)];
    while let Some((i, j)) = stack.pop() {
        let (a, b) = (points[i], points[j]);
        let ab = b - a;
        let len2 = ab.norm_squared();
        let dist = |p: &Vector3<f64>| {
            let ap = p - a;
            if len2 == 0.0 {
                ap.norm()
            } else {
                (ap - ab * (ap.dot(&ab) / len2).clamp(0.0, 1.0)).norm()
            }
        };
        let far = (i + 1..j)
            .map(|k| (k, dist(&points[k])))
            .max_by(|x, y| x.1.total_cmp(&y.1));
        if let Some((k, d)) = far {
            if d > tol {
                keep[k] = true;
                stack.push((i, k));
                stack.push((k, j));
            }
        }
    }
    points.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()
}

fn scene_polylines(scene: &Scene) -> Vec<Vec<Vector3<f64>>> {
    scene
        .placements
        .iter()
        .flat_map(|pl| &pl.paths)
        .map(|p| {
            p.points
                .iter()
                .map(|x| Vector3::new(x[0], x[1], x.get(2).copied().unwrap_or(0.0)))
                .collect()
        })
        .collect()
}

/// One tube per scene path, built in parallel and concatenated in order.
pub fn tube_scene(scene: &Scene, opts: &TubeOptions) -> Result<TriMesh, MeshError> {
    positive("radius", opts.radius)?;
    let tol = 1e-6 * opts.radius;
    let tubes: Vec<TriMesh> = scene_polylines(scene)
        .par_iter()
        .map(|pts| simplify3(&thin(pts, tol), SIMPLIFY_FRACTION * opts.radius))
        .filter(|pts| pts.len() >= 2)
        .map(|pts| tube(&pts, opts.radius, opts.segments, opts.caps))
        .collect::<Result<_, _>>()?;
    if tubes.is_empty() {
        return Err(MeshError::Empty);
    }
    let mut mesh = TriMesh::default();
    for t in &tubes {
        mesh.append(t);
    }
    Ok(mesh)
}

/// Removes repeated and collinear vertices from a closed ring (given
/// without its closing point).
fn clean_ring(ring: &[Coord<f64>], tol: f64) -> Vec<Coord<f64>> {
    let mut pts: Vec<Coord<f64>> = Vec::with_capacity(ring.len());
    for &p in ring {
        if pts
            .last()
            .is_none_or(|q: &Coord<f64>| (p.x - q.x).hypot(p.y - q.y) > tol)
        {
            pts.push(p);
        }
    }
    while pts.len() > 1 {
        let (a, b) = (pts[0], pts[pts.len() - 1]);
        if (a.x - b.x).hypot(a.y - b.y) > tol {
            break;
        }
        pts.pop();
    }
    let flat = |a: Coord<f64>, b: Coord<f64>, c: Coord<f64>| {
        ((b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x)).abs() <= tol * tol
    };
    // linear passes: drop a vertex when it is flat against the last kept
    // one and its successor, until a pass removes nothing
    loop {
        let n = pts.len();
        if n < 3 {
            return pts;
        }
        let mut kept: Vec<Coord<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let prev = kept.last().copied().unwrap_or(pts[n - 1]);
            if !flat(prev, pts[i], pts[(i + 1) % n]) {
                kept.push(pts[i]);
            }
        }
        if kept.len() == n {
            return pts;
        }
        pts = kept;
    }
}

/// Prism over one polygon with holes: top at `height`, bottom at 0.
fn extrude_polygon(poly: &Polygon<f64>, height: f64, tol: f64) -> Result<Option<TriMesh>, MeshError> {
    let strip = |ls: &LineString<f64>| {
        let c = &ls.0;
        let open = if c.len() > 1 && c[0] == c[c.len() - 1] {
            &c[..c.len() - 1]
        } else {
            &c[..]
        };
        clean_ring(open, tol)
    };
    let exterior = strip(poly.exterior());
    if exterior.len() < 3 {
        return Ok(None);
    }
    let mut rings = vec![exterior];
    rings.extend(poly.interiors().iter().map(strip).filter(|r| r.len() >= 3));
    let mut flat: Vec<f64> = Vec::new();
    let mut holes = Vec::new();
    for (k, r) in rings.iter().enumerate() {
        if k > 0 {
            holes.push(flat.len() / 2);
        }
        flat.extend(r.iter().flat_map(|c| [c.x, c.y]));
    }
    let tris =
        earcutr::earcut(&flat, &holes, 2).map_err(|e| MeshError::Parse(format!("triangulation failed: {e:?}")))?;
    let count = flat.len() / 2;
    let mut vertices = Vec::with_capacity(2 * count);
    for k in 0..count {
        vertices.push(Vector3::new(flat[2 * k], flat[2 * k + 1], 0.0));
    }
    for k in 0..count {
        vertices.push(Vector3::new(flat[2 * k], flat[2 * k + 1], height));
    }
    let top = count as u32;
    let mut triangles = Vec::with_capacity(2 * tris.len() / 3 + 2 * count);
    for t in tris.chunks(3) {
        let [a, b, c] = [t[0], t[1], t[2]];
        let area = (flat[2 * b] - flat[2 * a]) * (flat[2 * c + 1] - flat[2 * a + 1])
            - (flat[2 * b + 1] - flat[2 * a + 1]) * (flat[2 * c] - flat[2 * a]);
        if area == 0.0 {
            continue;
        }
        let (a, b, c) = if area > 0.0 { (a, b, c) } else { (a, c, b) };
        let (a, b, c) = (a as u32, b as u32, c as u32);
        triangles.push([top + a, top + b, top + c]);
        triangles.push([a, c, b]);
    }
    let mut start = 0u32;
    for r in &rings {
        let len = r.len() as u32;
        for k in 0..len {
            let (p, q) = (start + k, start + (k + 1) % len);
            triangles.push([p, q, top + q]);
            triangles.push([p, top + q, top + p]);
        }
        start += len;
    }
    TriMesh::new(vertices, triangles).map(Some)
}

/// Thickens every path of a planar scene to a stroke of `width` (round
/// joins and caps), unions the strokes and extrudes the result to
/// `height`.
pub fn extrude_flat(scene: &Scene, height: f64, width: f64) -> Result<TriMesh, MeshError> {
    positive("height", height)?;
    positive("width", width)?;
    match scene.dim() {
        None => return Err(MeshError::Empty),
        Some(2) => {}
        Some(d) => return Err(MeshError::Dimension(d)),
    }
    let lines: Vec<LineString<f64>> = scene
        .placements
        .iter()
        .flat_map(|pl| &pl.paths)
        .filter(|p| p.points.len() >= 2)
        .map(|p| {
            let ls: LineString<f64> = p.points.iter().map(|x| Coord { x: x[0], y: x[1] }).collect();
            ls.simplify(SIMPLIFY_FRACTION * width)
        })
        .collect();
    if lines.is_empty() {
        return Err(MeshError::Empty);
    }
    let style = BufferStyle::new(0.5 * width)
        .line_join(LineJoin::Round(ROUND_STEP))
        .line_cap(LineCap::Round(ROUND_STEP));
    let outline = MultiLineString::new(lines)
        .buffer_with_style(style)
        .orient(geo::orient::Direction::Default);
    let tol = 1e-9 * width;
    let mut mesh = TriMesh::default();
    for poly in &outline {
        if let Some(m) = extrude_polygon(poly, height, tol)? {
            mesh.append(&m);
        }
    }
    if mesh.is_empty() {
        return Err(MeshError::Empty);
    }
    Ok(mesh)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StlFormat {
    #[default]
    Binary,
    Ascii,
}

const STL_HEADER: &[u8] = b"binary STL written by centralpath";

fn f32s(v: &Vector3<f64>) -> [f32; 3] {
    // `as` rounds to nearest, ties to even
    [v.x as f32, v.y as f32, v.z as f32]
}

pub fn emit_stl(mesh: &TriMesh, format: StlFormat) -> Result<Vec<u8>, MeshError> {
    let count = u32::try_from(mesh.triangles.len()).map_err(|_| MeshError::TooManyTriangles(mesh.triangles.len()))?;
    match format {
        StlFormat::Binary => {
            let mut out = Vec::with_capacity(84 + 50 * mesh.triangles.len());
            let mut header = [0u8; 80];
            header[..STL_HEADER.len()].copy_from_slice(STL_HEADER);
            out.extend_from_slice(&header);
            out.extend_from_slice(&count.to_le_bytes());
            for (t, n) in mesh.triangles.iter().zip(&mesh.normals) {
                for v in std::iter::once(n).chain(t.iter().map(|&i| &mesh.vertices[i as usize])) {
                    for x in f32s(v) {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
                out.extend_from_slice(&[0, 0]);
            }
            Ok(out)
        }
        StlFormat::Ascii => {
            use std::fmt::Write as _;
            let mut s = String::from("solid centralpath\n");
            let e = |v: &Vector3<f64>| {
                let [x, y, z] = f32s(v);
                format!("{x:.5e} {y:.5e} {z:.5e}")
            };
            for (t, n) in mesh.triangles.iter().zip(&mesh.normals) {
                let _ = writeln!(s, "  facet normal {}", e(n));
                s.push_str("    outer loop\n");
                for &i in t {
                    let _ = writeln!(s, "      vertex {}", e(&mesh.vertices[i as usize]));
                }
                s.push_str("    endloop\n  endfacet\n");
            }
            s.push_str("endsolid centralpath\n");
            Ok(s.into_bytes())
        }
    }
}

/// Reads a binary STL, merging bitwise-equal vertices.
pub fn parse_binary_stl(bytes: &[u8]) -> Result<TriMesh, MeshError> {
    if bytes.len() < 84 {
        return Err(MeshError::Parse(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().expect("4 bytes")) as usize;
    if bytes.len() != 84 + 50 * count {
        return Err(MeshError::Parse(format!(
            "{count} triangles need {} bytes, got {}",
            84 + 50 * count,
            bytes.len()
        )));
    }
    let read = |off: usize| -> [f32; 3] {
        let f = |k: usize| f32::from_le_bytes(bytes[off + 4 * k..off + 4 * k + 4].try_into().expect("4 bytes"));
        [f(0), f(1), f(2)]
    };
    let mut index: HashMap<[u32; 3], u32> = HashMap::new();
    let mut mesh = TriMesh::default();
    for k in 0..count {
        let base = 84 + 50 * k;
        let n = read(base);
        mesh.normals.push(Vector3::new(n[0] as f64, n[1] as f64, n[2] as f64));
        let mut tri = [0u32; 3];
        for (slot, v) in tri.iter_mut().enumerate() {
            let p = read(base + 12 + 12 * slot);
            let key = p.map(f32::to_bits);
            *v = *index.entry(key).or_insert_with(|| {
                mesh.vertices.push(Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64));
                (mesh.vertices.len() - 1) as u32
            });
        }
        mesh.triangles.push(tri);
    }
    Ok(mesh)
}
