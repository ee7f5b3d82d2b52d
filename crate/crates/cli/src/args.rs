use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use centralpath::compose::SamplerSpec;
use centralpath::sampler::{BisectionMean, RefinementRule};

pub use crate::commands::MeshMode;

/// Central paths of log-barrier problems: tracing, drawing and meshing.
#[derive(Debug, Parser)]
#[command(name = "cpath", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace one central path and write its polyline JSON.
    Trace(TraceArgs),
    /// Compose a scene and render it as SVG.
    Scene(SceneArgs),
    /// Compose a scene and write an STL mesh.
    Mesh(MeshArgs),
    /// Draw stochastic leaf objectives for a k-gon.
    Leaves(LeavesArgs),
    /// Enumerate the facets of a Platonic or user-given solid.
    Solids(SolidsArgs),
    /// Print the JSON of a named scene preset.
    Preset(PresetArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Curvature,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mean {
    Geometric,
    Arithmetic,
}

/// Sampler overrides shared by the path-producing commands.
#[derive(Debug, Clone, Default, Args)]
pub struct SamplerArgs {
    #[arg(long, value_enum, env = "CPATH_RULE")]
    pub rule: Option<Rule>,
    /// Bound for the refinement rule.
    #[arg(long, env = "CPATH_DELTA")]
    pub delta: Option<f64>,
    #[arg(long, env = "CPATH_MU_MIN")]
    pub mu_min: Option<f64>,
    #[arg(long, env = "CPATH_MU_MAX")]
    pub mu_max: Option<f64>,
    #[arg(long, value_enum, env = "CPATH_MEAN")]
    pub mean: Option<Mean>,
    #[arg(long, env = "CPATH_MAX_POINTS")]
    pub max_points: Option<usize>,
    /// Shortest chord the curvature rule still bisects.
    #[arg(long, env = "CPATH_MIN_SEGMENT")]
    pub min_segment: Option<f64>,
}

impl SamplerArgs {
    /// Flag values layered over `base`.
    pub fn over(&self, base: SamplerSpec) -> SamplerSpec {
        SamplerSpec {
            rule: self
                .rule
                .map(|r| match r {
                    Rule::Curvature => RefinementRule::Curvature,
                    Rule::Midpoint => RefinementRule::MidpointBound,
                })
                .or(base.rule),
            delta: self.delta.or(base.delta),
            mu_min: self.mu_min.or(base.mu_min),
            mu_max: self.mu_max.or(base.mu_max),
            mean: self
                .mean
                .map(|m| match m {
                    Mean::Geometric => BisectionMean::Geometric,
                    Mean::Arithmetic => BisectionMean::Arithmetic,
                })
                .or(base.mean),
            max_points: self.max_points.or(base.max_points),
            min_segment: self.min_segment.or(base.min_segment),
        }
    }
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Problem JSON: {"A": [[...]], "b": [...], "c": [...]}.
    #[arg(long)]
    pub problem: PathBuf,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Where the scene comes from.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SceneSource {
    /// Scene JSON file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Name of a built-in scene.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    #[command(flatten)]
    pub source: SceneSource,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Page width in mm (scene width when absent).
    #[arg(long, requires = "page_height")]
    pub page_width: Option<f64>,
    /// Page height in mm.
    #[arg(long, requires = "page_width")]
    pub page_height: Option<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[command(flatten)]
    pub source: SceneSource,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, value_enum, default_value = "flat", env = "CPATH_MESH_MODE")]
    pub mode: MeshMode,
    /// Tube radius in mm.
    #[arg(long, default_value_t = 0.6, env = "CPATH_RADIUS")]
    pub radius: f64,
    /// Tube ring resolution.
    #[arg(long, default_value_t = 16, env = "CPATH_SEGMENTS")]
    pub segments: usize,
    /// Ridge height in mm (flat mode).
    #[arg(long, default_value_t = 1.5, env = "CPATH_HEIGHT")]
    pub height: f64,
    /// Ridge width in mm (flat mode).
    #[arg(long, default_value_t = 1.2, env = "CPATH_WIDTH")]
    pub width: f64,
    /// Write ASCII instead of binary STL.
    #[arg(long)]
    pub ascii: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct LeavesArgs {
    #[arg(long)]
    pub k: usize,
    /// Mean bracket coefficient.
    #[arg(long, default_value_t = 0.0425)]
    pub eta: f64,
    /// Standard deviation of the bracket coefficient (eta/3 when absent).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Interior paths per leaf as MIN,MAX.
    #[arg(long, value_delimiter = ',')]
    pub paths: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0, env = "CPATH_SEED")]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "solid")]
pub struct SolidSource {
    /// tetrahedron, cube, octahedron, dodecahedron or icosahedron.
    #[arg(long)]
    pub name: Option<String>,
    /// Solid JSON: {"vertices": [[x, y, z], ...]}.
    #[arg(long)]
    pub vertices: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolidsArgs {
    #[command(flatten)]
    pub source: SolidSource,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PresetArgs {
    /// Preset name; lists all presets when absent.
    pub name: Option<String>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080, env = "CPATH_PORT")]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1", env = "CPATH_HOST")]
    pub host: String,
    /// Directory with the studio bundle, served at /.
    #[arg(long = "static", env = "CPATH_STATIC")]
    pub static_dir: Option<PathBuf>,
}
