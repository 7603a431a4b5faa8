//! Built-in analytic shape lists.
//!
//! `desk` holds eight simple solids (spheres, boxes, a torus and a thin
//! capsule composite); `thin` holds four shapes made of thin plates and rods.

use anyhow::bail;
use csdf::dataset::Split;
use csdf::geometry::AnalyticShape;
use csdf::Point3;

use crate::config::ShapeSpec;

fn p(x: f64, y: f64, z: f64) -> Point3 {
    Point3::new(x, y, z)
}

fn spec(id: &str, shape: AnalyticShape) -> ShapeSpec {
    ShapeSpec {
        id: id.to_owned(),
        split: Split::Train,
        analytic: Some(shape),
        mesh: None,
    }
}

pub fn desk() -> Vec<ShapeSpec> {
    let jack = AnalyticShape::union(vec![
        AnalyticShape::capsule(p(-0.6, 0.0, 0.0), p(0.6, 0.0, 0.0), 0.05),
        AnalyticShape::capsule(p(0.0, -0.6, 0.0), p(0.0, 0.6, 0.0), 0.05),
        AnalyticShape::capsule(p(0.0, 0.0, -0.6), p(0.0, 0.0, 0.6), 0.05),
    ]);
    vec![
        spec("sphere_small", AnalyticShape::sphere(p(0.0, 0.0, 0.0), 0.4)),
        spec("sphere_offset", AnalyticShape::sphere(p(0.2, 0.1, 0.0), 0.55)),
        spec("sphere_large", AnalyticShape::sphere(p(0.0, 0.0, 0.0), 0.7)),
        spec("box_cube", AnalyticShape::cuboid(p(0.0, 0.0, 0.0), p(0.4, 0.4, 0.4))),
        spec("box_slab", AnalyticShape::cuboid(p(0.0, 0.0, 0.0), p(0.6, 0.3, 0.15))),
        spec("box_tall", AnalyticShape::cuboid(p(0.0, 0.0, 0.1), p(0.2, 0.2, 0.6))),
        spec("torus", AnalyticShape::torus(p(0.0, 0.0, 0.0), 0.5, 0.15)),
        spec("capsule_jack", jack),
    ]
}

pub fn thin() -> Vec<ShapeSpec> {
    let frame = AnalyticShape::union(vec![
        AnalyticShape::capsule(p(-0.5, -0.5, 0.0), p(0.5, -0.5, 0.0), 0.03),
        AnalyticShape::capsule(p(0.5, -0.5, 0.0), p(0.5, 0.5, 0.0), 0.03),
        AnalyticShape::capsule(p(0.5, 0.5, 0.0), p(-0.5, 0.5, 0.0), 0.03),
        AnalyticShape::capsule(p(-0.5, 0.5, 0.0), p(-0.5, -0.5, 0.0), 0.03),
    ]);
    vec![
        spec("thin_plate", AnalyticShape::cuboid(p(0.0, 0.0, 0.0), p(0.6, 0.5, 0.03))),
        spec("thin_ring", AnalyticShape::torus(p(0.0, 0.0, 0.0), 0.6, 0.04)),
        spec("thin_rod", AnalyticShape::capsule(p(-0.7, -0.2, 0.0), p(0.7, 0.3, 0.1), 0.03)),
        spec("thin_frame", frame),
    ]
}

/// `desk`, `thin` or `desk+thin`.
pub fn by_name(name: &str) -> anyhow::Result<Vec<ShapeSpec>> {
    Ok(match name {
        "desk" => desk(),
        "thin" => thin(),
        "desk+thin" => desk().into_iter().chain(thin()).collect(),
        other => bail!("unknown preset `{other}` (expected desk, thin or desk+thin)"),
    })
}
