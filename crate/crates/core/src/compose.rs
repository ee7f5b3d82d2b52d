//! Scenes: path bundles placed under affine maps.
//!
//! The image of a central path under `T(x) = Bx + d` is the central path of
//! the transported problem, so a placement stores the mapped samples
//! directly. Scene coordinates are
//! millimetres; presets carry a scale of [`PRESET_UNIT_MM`] per geometry unit.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, AffineMap, GeometryError, LeafSpec};
use crate::model::{ModelError, PathProblem, Polytope};
use crate::sampler::{self, BisectionMean, PathPolyline, RefinementRule, SamplerConfig, SamplerError};
use crate::solids::{self, SolidName, SolidsError};
use crate::solver;

/// Millimetres per geometry unit in the shipped presets.
pub const PRESET_UNIT_MM: f64 = 20.0;

/// Curvature-rule resolution used for scenes unless overridden; keeps
/// rendered files small without visible chord error at preset scale.
pub const SCENE_MIN_SEGMENT: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("scene has no placements")]
    Empty,
    #[error("invalid scene spec: {0}")]
    Spec(String),
    #[error("invalid style: {0}")]
    Style(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Solids(#[from] SolidsError),
}

impl ComposeError {
    pub fn is_numeric(&self) -> bool {
        matches!(self, ComposeError::Sampler(e) if e.is_numeric())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Join {
    #[default]
    Round,
    Miter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StyleRef {
    /// Millimetres.
    pub stroke_width: f64,
    pub color: [u8; 3],
    pub join: Join,
}

impl Default for StyleRef {
    fn default() -> Self {
        StyleRef {
            stroke_width: 1.0,
            color: [0, 0, 0],
            join: Join::Round,
        }
    }
}

impl StyleRef {
    pub fn check(&self) -> Result<(), ComposeError> {
        if !(self.stroke_width > 0.0 && self.stroke_width.is_finite()) {
            return Err(ComposeError::Style(format!(
                "stroke_width must be positive, got {}",
                self.stroke_width
            )));
        }
        Ok(())
    }

    pub fn hex(&self) -> String {
        let [r, g, b] = self.color;
        format!("#{r:02x}{g:02x}{b:02x}")
    }
}

/// One transformed path.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedPath {
    /// Objective of the source problem.
    pub c: DVector<f64>,
    pub mu: Vec<f64>,
    pub points: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub bundle: Vec<PathPolyline>,
    pub map: AffineMap,
    pub style: StyleRef,
    pub paths: Vec<PlacedPath>,
}

impl Placement {
    pub fn dim(&self) -> usize {
        self.map.dim()
    }
}

/// Maps every sample of `bundle` through `map`.
pub fn place(bundle: Vec<PathPolyline>, map: AffineMap, style: StyleRef) -> Result<Placement, ComposeError> {
    style.check()?;
    if let Some(p) = bundle.iter().find(|p| p.problem.polytope().dim() != map.dim()) {
        return Err(ComposeError::Dimension(format!(
            "map acts on dimension {}, path lives in dimension {}",
            map.dim(),
            p.problem.polytope().dim()
        )));
    }
    let paths = bundle
        .iter()
        .map(|p| PlacedPath {
            c: p.problem.c().clone(),
            mu: p.mus(),
            points: p.points().map(|x| map.apply(x)).collect(),
        })
        .collect();
    Ok(Placement {
        bundle,
        map,
        style,
        paths,
    })
}

/// Axis-aligned box in the first two scene coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds {
    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub placements: Vec<Placement>,
}

impl Scene {
    pub fn new(placements: Vec<Placement>) -> Self {
        Scene { placements }
    }

    pub fn path_count(&self) -> usize {
        self.placements.iter().map(|p| p.paths.len()).sum()
    }

    /// Common dimension of all placements, if any.
    pub fn dim(&self) -> Option<usize> {
        self.placements.first().map(Placement::dim)
    }
}

/// Tight bounds over all transformed samples, padded by half of each
/// placement's stroke width.
pub fn scene_bounds(scene: &Scene) -> Result<Bounds, ComposeError> {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for pl in &scene.placements {
        let pad = 0.5 * pl.style.stroke_width;
        for x in pl.paths.iter().flat_map(|p| &p.points) {
            for k in 0..2 {
                let v = x.get(k).copied().unwrap_or(0.0);
                min[k] = min[k].min(v - pad);
                max[k] = max[k].max(v + pad);
            }
        }
    }
    if !min[0].is_finite() {
        return Err(ComposeError::Empty);
    }
    Ok(Bounds { min, max })
}

/// Largest distance between a placed sample and the centered point of the
/// transported problem at the same `mu`, over at most `probes` samples per
/// path.
pub fn equivariance_audit(pl: &Placement, cfg: &SamplerConfig, probes: usize) -> Result<f64, ComposeError> {
    let mut worst: f64 = 0.0;
    for (src, placed) in pl.bundle.iter().zip(&pl.paths) {
        let moved = geometry::transform_problem(&src.problem, &pl.map)?;
        let n = placed.points.len();
        let stride = n.div_ceil(probes.max(1)).max(1);
        for k in (0..n).step_by(stride) {
            let mu = placed.mu[k];
            let z = solver::center(&moved, mu, None, &cfg.solver).map_err(SamplerError::from)?;
            worst = worst.max((&z.x - &placed.points[k]).norm());
        }
    }
    Ok(worst)
}

/// Scene JSON, the input of every artifact command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub placements: Vec<PlacementSpec>,
    #[serde(default)]
    pub sampler: SamplerSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    /// `kgon:K` or `solid:NAME`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_spec: Option<CSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSpec>,
    #[serde(default)]
    pub style: StyleRef,
}

/// Constraint data with an optional objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
}

/// How the objectives of a bundle are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CSpec {
    Vectors(Vec<Vec<f64>>),
    /// `c^i(theta) = A_i R(theta)` for 1-based facets `i` (all when absent).
    FacetRotations {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        facets: Option<Vec<usize>>,
        thetas: Vec<f64>,
    },
    Leaves(LeafSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub d: Vec<f64>,
}

impl MapSpec {
    pub fn to_map(&self) -> Result<AffineMap, ComposeError> {
        let n = self.d.len();
        if self.b.len() != n || self.b.iter().any(|r| r.len() != n) {
            return Err(ComposeError::Spec(format!("map B must be {n}x{n}")));
        }
        Ok(AffineMap::new(
            DMatrix::from_fn(n, n, |i, j| self.b[i][j]),
            DVector::from_column_slice(&self.d),
        )?)
    }
}

impl From<&AffineMap> for MapSpec {
    fn from(m: &AffineMap) -> Self {
        let b = m.linear();
        MapSpec {
            b: b.row_iter().map(|r| r.iter().copied().collect()).collect(),
            d: m.offset().iter().copied().collect(),
        }
    }
}

/// Optional overrides of the scene sampler.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RefinementRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<BisectionMean>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_segment: Option<f64>,
}

impl SamplerSpec {
    /// Overrides applied to `base`.
    pub fn apply(&self, base: SamplerConfig) -> SamplerConfig {
        SamplerConfig {
            rule: self.rule.unwrap_or(base.rule),
            delta: self.delta.unwrap_or(base.delta),
            mu_min: self.mu_min.unwrap_or(base.mu_min),
            mu_max: self.mu_max.unwrap_or(base.mu_max),
            mean: self.mean.unwrap_or(base.mean),
            max_points: self.max_points.unwrap_or(base.max_points),
            min_segment: self.min_segment.unwrap_or(base.min_segment),
            solver: base.solver,
        }
    }

    /// Sampler for scenes: library defaults with [`SCENE_MIN_SEGMENT`].
    pub fn to_config(&self) -> SamplerConfig {
        self.apply(SamplerConfig {
            min_segment: SCENE_MIN_SEGMENT,
            ..SamplerConfig::default()
        })
    }
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

fn parse_preset(name: &str) -> Result<Polytope, ComposeError> {
    let unknown = || ComposeError::UnknownPreset(name.to_string());
    match name.split_once(':') {
        Some(("kgon", k)) => Ok(geometry::kgon(k.trim().parse().map_err(|_| unknown())?)?),
        Some(("solid", s)) => Ok(solids::platonic_polytope(s.trim().parse::<SolidName>()?)?),
        _ => Err(unknown()),
    }
}

/// Polytope and objectives of one placement.
pub fn resolve_placement(spec: &PlacementSpec) -> Result<Vec<PathProblem>, ComposeError> {
    let poly = match (&spec.problem, &spec.preset, &spec.c_spec) {
        (Some(_), Some(_), _) => {
            return Err(ComposeError::Spec("give either problem or preset, not both".into()));
        }
        (Some(p), None, _) => Polytope::from_rows(&p.a, &p.b)?,
        (None, Some(name), _) => parse_preset(name)?,
        (None, None, Some(CSpec::Leaves(l))) => geometry::kgon(l.k)?,
        (None, None, _) => return Err(ComposeError::Spec("placement needs a problem or preset".into())),
    };
    let objectives: Vec<Vec<f64>> = match &spec.c_spec {
        None => match spec.problem.as_ref().and_then(|p| p.c.clone()) {
            Some(c) => vec![c],
            None => return Err(ComposeError::Spec("placement needs c_spec or problem.c".into())),
        },
        Some(CSpec::Vectors(v)) => v.clone(),
        Some(CSpec::FacetRotations { facets, thetas }) => {
            let all: Vec<usize> = (1..=poly.rows()).collect();
            let facets = facets.as_ref().unwrap_or(&all);
            let mut out = Vec::with_capacity(facets.len() * thetas.len());
            for &i in facets {
                for &t in thetas {
                    out.push(geometry::facet_objective(&poly, i, t)?.iter().copied().collect());
                }
            }
            out
        }
        Some(CSpec::Leaves(l)) => {
            if spec.preset.is_some() && poly.rows() != l.k {
                return Err(ComposeError::Spec(format!(
                    "leaf spec has k = {}, polytope has {} rows",
                    l.k,
                    poly.rows()
                )));
            }
            let kgon = geometry::kgon(l.k)?;
            if spec.problem.is_some() && poly != kgon {
                return Err(ComposeError::Spec("leaves need a regular k-gon".into()));
            }
            geometry::leaf_c_vectors(l)?
                .iter()
                .flat_map(|leaf| leaf.objectives().cloned().collect::<Vec<_>>())
                .collect()
        }
    };
    if objectives.is_empty() {
        return Err(ComposeError::Spec("placement has no objectives".into()));
    }
    objectives
        .into_iter()
        .map(|c| Ok(PathProblem::new(poly.clone(), DVector::from_vec(c))?))
        .collect()
}

/// Traces every path of every placement and places the bundles in spec
/// order. Paths are traced in parallel.
pub fn build_scene(spec: &SceneSpec) -> Result<Scene, ComposeError> {
    if spec.placements.is_empty() {
        return Err(ComposeError::Empty);
    }
    let cfg = spec.sampler.to_config();
    cfg.check()?;
    let mut jobs: Vec<(usize, PathProblem)> = Vec::new();
    let mut maps = Vec::with_capacity(spec.placements.len());
    for (i, pl) in spec.placements.iter().enumerate() {
        pl.style.check()?;
        let problems = resolve_placement(pl)?;
        let dim = problems[0].polytope().dim();
        let map = match &pl.map {
            Some(m) => m.to_map()?,
            None => AffineMap::identity(dim),
        };
        jobs.extend(problems.into_iter().map(|p| (i, p)));
        maps.push(map);
    }
    let traced: Vec<(usize, PathPolyline)> = jobs
        .into_par_iter()
        .map(|(i, p)| sampler::trace(&p, &cfg).map(|path| (i, path)))
        .collect::<Result<_, _>>()?;
    let mut bundles: Vec<Vec<PathPolyline>> = vec![Vec::new(); spec.placements.len()];
    for (i, path) in traced {
        bundles[i].push(path);
    }
    let placements = bundles
        .into_iter()
        .zip(maps)
        .zip(&spec.placements)
        .map(|((bundle, map), pl)| place(bundle, map, pl.style))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(d) = placements
        .iter()
        .map(Placement::dim)
        .find(|&d| d != placements[0].dim())
    {
        return Err(ComposeError::Dimension(format!(
            "placements mix dimensions {} and {d}",
            placements[0].dim()
        )));
    }
    Ok(Scene::new(placements))
}

/// Star map `x -> R(i pi/3)(x/3 + (-2, 0))`, scaled by `unit`.
pub fn star_map(i: usize, unit: f64) -> AffineMap {
    let r = geometry::rotation(i as f64 * PI / 3.0);
    let s = r * (unit / 3.0);
    let d = r * nalgebra::Vector2::new(-2.0 * unit, 0.0);
    AffineMap::new(
        DMatrix::from_fn(2, 2, |a, b| s[(a, b)]),
        DVector::from_column_slice(&[d[0], d[1]]),
    )
    .expect("similarity is well conditioned")
}

/// A named scene.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub title: &'static str,
    /// False for approximate layouts.
    pub canonical: bool,
    pub spec: SceneSpec,
}

fn scaled(scale: f64, offset: [f64; 2]) -> MapSpec {
    let u = PRESET_UNIT_MM;
    MapSpec {
        b: vec![vec![u * scale, 0.0], vec![0.0, u * scale]],
        d: vec![u * offset[0], u * offset[1]],
    }
}

fn leaves(k: usize, seed: u64) -> CSpec {
    CSpec::Leaves(LeafSpec::new(k, LeafSpec::DEFAULT_ETA, seed))
}

pub const PRESET_NAMES: [&str; 5] = ["star", "pythagorean", "clock12", "clover", "daisy"];

pub fn presets() -> Vec<Preset> {
    PRESET_NAMES.iter().map(|n| preset(n).expect("listed")).collect()
}

pub fn preset(name: &str) -> Result<Preset, ComposeError> {
    let style = StyleRef::default();
    let p = match name {
        "star" => Preset {
            name: "star",
            title: "3-gon paths translated around a 6-gon",
            canonical: true,
            spec: SceneSpec {
                placements: (0..6)
                    .map(|i| PlacementSpec {
                        preset: Some("kgon:3".into()),
                        c_spec: Some(CSpec::FacetRotations {
                            facets: None,
                            thetas: vec![0.009, -0.009, 0.18, -0.18],
                        }),
                        map: Some(MapSpec::from(&star_map(i, PRESET_UNIT_MM))),
                        style,
                        ..PlacementSpec::default()
                    })
                    .collect(),
                sampler: SamplerSpec::default(),
            },
        },
        "pythagorean" => {
            // big squares of side 2 on the lattice (2,1), (-1,2); each has a
            // side-1 square attached at (1.5, -0.5)
            let mut placements = Vec::new();
            for (n, (i, j)) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)].into_iter().enumerate() {
                let cx = 2.0 * i - j;
                let cy = i + 2.0 * j;
                placements.push(PlacementSpec {
                    preset: Some("kgon:4".into()),
                    c_spec: Some(leaves(4, 2 * n as u64)),
                    map: Some(scaled(1.0, [cx, cy])),
                    style,
                    ..PlacementSpec::default()
                });
                placements.push(PlacementSpec {
                    preset: Some("kgon:4".into()),
                    c_spec: Some(leaves(4, 2 * n as u64 + 1)),
                    map: Some(scaled(0.5, [cx + 1.5, cy - 0.5])),
                    style,
                    ..PlacementSpec::default()
                });
            }
            Preset {
                name: "pythagorean",
                title: "Pythagorean tiling of leaf patterns in 4-gons",
                canonical: false,
                spec: SceneSpec {
                    placements,
                    sampler: SamplerSpec::default(),
                },
            }
        }
        "clock12" => {
            let mut l = LeafSpec::new(12, LeafSpec::DEFAULT_ETA, 12);
            l.paths_per_leaf = [2, 2];
            Preset {
                name: "clock12",
                title: "clock face: four paths per leaf in a 12-gon",
                canonical: false,
                spec: SceneSpec {
                    placements: vec![PlacementSpec {
                        preset: Some("kgon:12".into()),
                        c_spec: Some(CSpec::Leaves(l)),
                        map: Some(scaled(2.0, [0.0, 0.0])),
                        style,
                        ..PlacementSpec::default()
                    }],
                    sampler: SamplerSpec::default(),
                },
            }
        }
        "clover" => Preset {
            name: "clover",
            title: "random leaves in a 4-gon",
            canonical: true,
            spec: SceneSpec {
                placements: vec![PlacementSpec {
                    preset: Some("kgon:4".into()),
                    c_spec: Some(leaves(4, 4)),
                    map: Some(scaled(2.0, [0.0, 0.0])),
                    style,
                    ..PlacementSpec::default()
                }],
                sampler: SamplerSpec::default(),
            },
        },
        "daisy" => Preset {
            name: "daisy",
            title: "daisy-like leaves in an 8-gon",
            canonical: false,
            spec: SceneSpec {
                placements: vec![PlacementSpec {
                    preset: Some("kgon:8".into()),
                    c_spec: Some(leaves(8, 8)),
                    map: Some(scaled(2.0, [0.0, 0.0])),
                    style,
                    ..PlacementSpec::default()
                }],
                sampler: SamplerSpec::default(),
            },
        },
        other => return Err(ComposeError::UnknownPreset(other.to_string())),
    };
    Ok(p)
}
