//! SVG output for planar scenes.
//!
//! One `<g>` per placement, one `<polyline>` per path. The y axis is flipped
//! so that scenes read with y pointing up; coordinates are millimetres with a
//! fixed number of decimals, so equal scenes give equal bytes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compose::{self, ComposeError, Join, Scene};

#[derive(Debug, Error)]
pub enum SvgError {
    #[error("scene has no paths")]
    Empty,
    #[error("scene bounds have zero area ({width} x {height})")]
    Degenerate { width: f64, height: f64 },
    #[error("only planar scenes render to SVG, got dimension {0}")]
    Dimension(usize),
    #[error("invalid page size {0:?}")]
    Page([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvgOptions {
    /// Page width and height in mm; the scene bounds when absent.
    pub page: Option<[f64; 2]>,
    pub background: Option<[u8; 3]>,
    pub decimals: usize,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            page: None,
            background: None,
            decimals: 6,
        }
    }
}

struct Num(usize);

impl Num {
    fn fmt(&self, v: f64) -> String {
        let s = format!("{:.*}", self.0, v);
        // never print a negative zero
        if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
            s[1..].to_string()
        } else {
            s
        }
    }
}

pub fn emit_svg(scene: &Scene, opts: &SvgOptions) -> Result<String, SvgError> {
    match scene.dim() {
        None => return Err(SvgError::Empty),
        Some(2) => {}
        Some(d) => return Err(SvgError::Dimension(d)),
    }
    if scene.path_count() == 0 {
        return Err(SvgError::Empty);
    }
    let bounds = compose::scene_bounds(scene).map_err(|e| match e {
        ComposeError::Empty => SvgError::Empty,
        _ => unreachable!("scene_bounds only fails on empty scenes"),
    })?;
    let (w, h) = (bounds.width(), bounds.height());
    if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
        return Err(SvgError::Degenerate { width: w, height: h });
    }
    let page = opts.page.unwrap_or([w, h]);
    if !(page[0] > 0.0 && page[1] > 0.0 && page[0].is_finite() && page[1].is_finite()) {
        return Err(SvgError::Page(page));
    }
    let n = Num(opts.decimals);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}mm\" height=\"{}mm\" viewBox=\"{} {} {} {}\">",
        n.fmt(page[0]),
        n.fmt(page[1]),
        n.fmt(bounds.min[0]),
        n.fmt(-bounds.max[1]),
        n.fmt(w),
        n.fmt(h)
    );
    if let Some([r, g, b]) = opts.background {
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#{r:02x}{g:02x}{b:02x}\"/>",
            n.fmt(bounds.min[0]),
            n.fmt(-bounds.max[1]),
            n.fmt(w),
            n.fmt(h)
        );
    }
    for (i, pl) in scene.placements.iter().enumerate() {
        let (join, cap) = match pl.style.join {
            Join::Round => ("round", "round"),
            Join::Miter => ("miter", "butt"),
        };
        let _ = writeln!(
            out,
            "<g id=\"placement-{i}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\" stroke-linejoin=\"{join}\" stroke-linecap=\"{cap}\">",
            pl.style.hex(),
            n.fmt(pl.style.stroke_width)
        );
        for path in &pl.paths {
            let c: Vec<String> = path.c.iter().map(|&v| n.fmt(v)).collect();
            let pts: Vec<String> = path
                .points
                .iter()
                .map(|x| format!("{},{}", n.fmt(x[0]), n.fmt(-x[1])))
                .collect();
            let _ = writeln!(
                out,
                "<polyline data-c=\"{}\" points=\"{}\"/>",
                c.join(" "),
                pts.join(" ")
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::{build_scene, place, Placement, SceneSpec, StyleRef};
    use crate::geometry::{kgon, AffineMap};
    use crate::model::PathProblem;
    use crate::sampler::{trace, SamplerConfig};
    use nalgebra::DVector;

    fn square_scene(cs: &[[f64; 2]], maps: &[AffineMap]) -> Scene {
        let cfg = SamplerConfig {
            min_segment: 1e-2,
            ..SamplerConfig::default()
        };
        let bundle: Vec<_> = cs
            .iter()
            .map(|c| {
                trace(
                    &PathProblem::new(kgon(4).unwrap(), DVector::from_column_slice(c)).unwrap(),
                    &cfg,
                )
                .unwrap()
            })
            .collect();
        let style = StyleRef {
            stroke_width: 0.05,
            ..StyleRef::default()
        };
        Scene::new(
            maps.iter()
                .map(|m| place(bundle.clone(), m.clone(), style).unwrap())
                .collect(),
        )
    }

    fn polylines(doc: &roxmltree::Document) -> Vec<Vec<(f64, f64)>> {
        doc.descendants()
            .filter(|n| n.has_tag_name("polyline"))
            .map(|n| {
                n.attribute("points")
                    .unwrap()
                    .split(' ')
                    .map(|p| {
                        let (x, y) = p.split_once(',').unwrap();
                        (x.parse().unwrap(), y.parse().unwrap())
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn straight_path_endpoints() {
        let scene = square_scene(&[[1.0, 0.0]], &[AffineMap::identity(2)]);
        let text = emit_svg(&scene, &SvgOptions::default()).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let lines = polylines(&doc);
        assert_eq!(lines.len(), 1);
        let first = lines[0][0];
        let last = *lines[0].last().unwrap();
        assert!(first.0.abs() < 1e-6 && first.1.abs() < 1e-6);
        assert!((last.0 - 1.0).abs() < 1e-6 && last.1.abs() < 1e-6);
        assert!(!text.contains("-0.000000,") && !text.contains(",-0.000000"));
    }

    #[test]
    fn groups_follow_placement_order() {
        let maps = [
            AffineMap::identity(2),
            AffineMap::translation(DVector::from_column_slice(&[3.0, 0.0])),
        ];
        let scene = square_scene(&[[1.0, 2.0], [-1.0, 0.5]], &maps);
        let text = emit_svg(&scene, &SvgOptions::default()).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let groups: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("g")).collect();
        assert_eq!(groups.len(), 2);
        for (i, g) in groups.iter().enumerate() {
            assert_eq!(g.attribute("id"), Some(format!("placement-{i}").as_str()));
            assert_eq!(g.children().filter(|n| n.has_tag_name("polyline")).count(), 2);
            assert_eq!(g.attribute("stroke-linejoin"), Some("round"));
            assert_eq!(g.attribute("stroke-linecap"), Some("round"));
        }
        // the second group is the first shifted by 3 mm
        let lines = polylines(&doc);
        assert!((lines[2][5].0 - lines[0][5].0 - 3.0).abs() < 2e-6);
    }

    #[test]
    fn coordinates_inside_view_box() {
        let spec = SceneSpec::from_json(
            r#"{"placements": [{"c_spec": {"leaves": {"k": 6, "seed": 2}}, "map": {"B": [[10, 3], [-2, 9]], "d": [5, -4]}}],
                "sampler": {"min_segment": 0.01}}"#,
        )
        .unwrap();
        let scene = build_scene(&spec).unwrap();
        let text = emit_svg(&scene, &SvgOptions::default()).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let vb: Vec<f64> = doc
            .root_element()
            .attribute("viewBox")
            .unwrap()
            .split(' ')
            .map(|v| v.parse().unwrap())
            .collect();
        let eps = 2e-6;
        for (x, y) in polylines(&doc).into_iter().flatten() {
            assert!(x >= vb[0] - eps && x <= vb[0] + vb[2] + eps);
            assert!(y >= vb[1] - eps && y <= vb[1] + vb[3] + eps);
        }
        assert_eq!(
            text,
            emit_svg(&build_scene(&spec).unwrap(), &SvgOptions::default()).unwrap()
        );
    }

    fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
        };
        ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
    }

    #[test]
    fn round_joins_cover_shared_endpoint() {
        // two paths ending at the same vertex (1, 1)
        let scene = square_scene(&[[1.0, 0.6], [0.6, 1.0]], &[AffineMap::identity(2)]);
        let text = emit_svg(&scene, &SvgOptions::default()).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let lines = polylines(&doc);
        let end = *lines[0].last().unwrap();
        let other = *lines[1].last().unwrap();
        assert!((end.0 - other.0).abs() < 1e-6 && (end.1 - other.1).abs() < 1e-6);
        let half = 0.5 * scene.placements[0].style.stroke_width;
        // supersample the disk around the shared endpoint; a round-capped
        // stroke covers every point within half a width of its centerline
        let n = 40;
        for i in 0..=n {
            for j in 0..=n {
                let p = (
                    end.0 - half + 2.0 * half * i as f64 / n as f64,
                    end.1 - half + 2.0 * half * j as f64 / n as f64,
                );
                if ((p.0 - end.0).powi(2) + (p.1 - end.1).powi(2)).sqrt() > half * (1.0 - 1e-9) {
                    continue;
                }
                let covered = lines
                    .iter()
                    .any(|l| l.windows(2).any(|w| segment_distance(p, w[0], w[1]) <= half));
                assert!(covered, "{p:?}");
            }
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            emit_svg(&Scene::default(), &SvgOptions::default()),
            Err(SvgError::Empty)
        ));
        let mut scene = square_scene(&[[1.0, 0.0]], &[AffineMap::identity(2)]);
        let pl: &mut Placement = &mut scene.placements[0];
        pl.style.stroke_width = 0.0;
        assert!(matches!(
            emit_svg(&scene, &SvgOptions::default()),
            Err(SvgError::Degenerate { .. })
        ));
        let scene = square_scene(&[[1.0, 0.3]], &[AffineMap::identity(2)]);
        let bad = SvgOptions {
            page: Some([0.0, 10.0]),
            ..SvgOptions::default()
        };
        assert!(matches!(emit_svg(&scene, &bad), Err(SvgError::Page(_))));
        let solid = build_scene(
            &SceneSpec::from_json(
                r#"{"placements": [{"preset": "solid:cube", "c_spec": {"vectors": [[1, 0.2, 0.1]]}}], "sampler": {"min_segment": 0.01}}"#,
            )
            .unwrap(),
        )
        .unwrap();
        assert!(matches!(
            emit_svg(&solid, &SvgOptions::default()),
            Err(SvgError::Dimension(3))
        ));
    }

    #[test]
    fn page_and_background() {
        let scene = square_scene(&[[1.0, 0.3]], &[AffineMap::identity(2)]);
        let opts = SvgOptions {
            page: Some([100.0, 80.0]),
            background: Some([255, 250, 240]),
            decimals: 3,
        };
        let text = emit_svg(&scene, &opts).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let root = doc.root_element();
        assert_eq!(root.attribute("width"), Some("100.000mm"));
        assert_eq!(root.attribute("height"), Some("80.000mm"));
        assert!(text.contains("fill=\"#fffaf0\""));
    }
}
