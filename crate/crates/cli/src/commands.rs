//! Artifact builders shared by the subcommands and the HTTP handlers, so
//! that both front ends produce byte-identical output for the same input.

use serde::{Deserialize, Serialize};

use centralpath::compose::{self, SamplerSpec, SceneSpec};
use centralpath::geometry::{self, Leaf, LeafSpec};
use centralpath::mesh::{self, StlFormat, TubeOptions, FLAT_HEIGHT, FLAT_WIDTH};
use centralpath::model::{PathProblem, ProblemFile};
use centralpath::sampler::{self, PolylineFile, SamplerConfig};
use centralpath::solids::{self, SolidFile, SolidName, VertexSolid};
use centralpath::svg::{self, SvgOptions};

use crate::error::CliError;

/// Traces one path with the library sampler defaults under `overrides`.
pub fn trace(problem: &ProblemFile, overrides: &SamplerSpec) -> Result<PolylineFile, CliError> {
    let p = PathProblem::try_from(problem)?;
    let cfg = overrides.apply(SamplerConfig::default());
    Ok(sampler::trace(&p, &cfg)?.to_file())
}

pub fn render_scene(spec: &SceneSpec, opts: &SvgOptions) -> Result<String, CliError> {
    let scene = compose::build_scene(spec)?;
    Ok(svg::emit_svg(&scene, opts)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MeshMode {
    Tube,
    #[default]
    Flat,
}

/// Mesh parameters in mm; also the query string of the mesh endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshParams {
    pub mode: MeshMode,
    pub radius: f64,
    pub segments: usize,
    pub height: f64,
    pub width: f64,
    pub format: StlFormat,
}

impl Default for MeshParams {
    fn default() -> Self {
        let tube = TubeOptions::default();
        MeshParams {
            mode: MeshMode::Flat,
            radius: tube.radius,
            segments: tube.segments,
            height: FLAT_HEIGHT,
            width: FLAT_WIDTH,
            format: StlFormat::Binary,
        }
    }
}

pub fn mesh_scene(spec: &SceneSpec, params: &MeshParams) -> Result<Vec<u8>, CliError> {
    let scene = compose::build_scene(spec)?;
    let m = match params.mode {
        MeshMode::Flat => mesh::extrude_flat(&scene, params.height, params.width)?,
        MeshMode::Tube => mesh::tube_scene(
            &scene,
            &TubeOptions {
                radius: params.radius,
                segments: params.segments,
                caps: true,
            },
        )?,
    };
    Ok(mesh::emit_stl(&m, params.format)?)
}

/// Leaf objectives together with the fully resolved parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeavesFile {
    pub spec: LeafSpec,
    pub leaves: Vec<Leaf>,
}

pub fn leaves(spec: &LeafSpec) -> Result<LeavesFile, CliError> {
    Ok(LeavesFile {
        spec: spec.clone(),
        leaves: geometry::leaf_c_vectors(spec)?,
    })
}

/// Vertices and facet inequalities `A x <= b` of a solid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolidReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<SolidName>,
    pub vertices: Vec<[f64; 3]>,
    #[serde(rename = "A")]
    pub a: Vec<[f64; 3]>,
    pub b: Vec<f64>,
    pub incident_vertices: Vec<Vec<usize>>,
    pub edges: usize,
    pub euler_characteristic: i64,
}

pub fn solid_report(solid: &VertexSolid) -> Result<SolidReport, CliError> {
    let f = solids::enumerate_facets(solid)?;
    let nv = solid.vertices().len();
    Ok(SolidReport {
        name: solid.name(),
        vertices: solid.to_file().vertices,
        edges: f.edges().len(),
        euler_characteristic: f.euler_characteristic(nv),
        a: f.normals,
        b: f.offsets,
        incident_vertices: f.incident_vertices,
    })
}

pub fn named_solid(name: &str) -> Result<VertexSolid, CliError> {
    Ok(solids::platonic(name.parse::<SolidName>()?))
}

pub fn solid_from_json(text: &str) -> Result<VertexSolid, CliError> {
    let f: SolidFile = serde_json::from_str(text)?;
    Ok(VertexSolid::try_from(f)?)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}
