use serde::{Deserialize, Serialize};

use super::Point3;
use crate::error::{Result, SdfError};

/// Closed-form solid with an exact (or, for unions, lower-bound) SDF.
///
/// The torus lies in the xy-plane around the z-axis through its center.
/// Unions take the minimum of their members: exact outside, but inside
/// overlapping members the value only bounds the true distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticShape {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
    },
    Torus {
        center: [f64; 3],
        major_radius: f64,
        minor_radius: f64,
    },
    Capsule {
        a: [f64; 3],
        b: [f64; 3],
        radius: f64,
    },
    Union {
        members: Vec<AnalyticShape>,
    },
}

fn v(a: &[f64; 3]) -> Point3 {
    Point3::new(a[0], a[1], a[2])
}

impl AnalyticShape {
    pub fn sphere(center: Point3, radius: f64) -> Self {
        AnalyticShape::Sphere {
            center: center.into(),
            radius,
        }
    }

    pub fn cuboid(center: Point3, half_extents: Point3) -> Self {
        AnalyticShape::Box {
            center: center.into(),
            half_extents: half_extents.into(),
        }
    }

    pub fn torus(center: Point3, major_radius: f64, minor_radius: f64) -> Self {
        AnalyticShape::Torus {
            center: center.into(),
            major_radius,
            minor_radius,
        }
    }

    pub fn capsule(a: Point3, b: Point3, radius: f64) -> Self {
        AnalyticShape::Capsule {
            a: a.into(),
            b: b.into(),
            radius,
        }
    }

    pub fn union(members: Vec<AnalyticShape>) -> Self {
        AnalyticShape::Union { members }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(SdfError::invalid(format!("{what} must be positive, got {x}")))
            }
        };
        match self {
            AnalyticShape::Sphere { radius, .. } => positive(*radius, "sphere radius"),
            AnalyticShape::Box { half_extents, .. } => half_extents
                .iter()
                .try_for_each(|&h| positive(h, "box half-extent")),
            AnalyticShape::Torus {
                major_radius,
                minor_radius,
                ..
            } => {
                positive(*major_radius, "torus major radius")?;
                positive(*minor_radius, "torus minor radius")
            }
            AnalyticShape::Capsule { radius, .. } => positive(*radius, "capsule radius"),
            AnalyticShape::Union { members } => {
                if members.is_empty() {
                    return Err(SdfError::invalid("union needs at least one member"));
                }
                members.iter().try_for_each(|m| m.validate())
            }
        }
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        match self {
            AnalyticShape::Sphere { center, radius } => (p - v(center)).norm() - radius,
            AnalyticShape::Box {
                center,
                half_extents,
            } => {
                let q = (p - v(center)).abs() - v(half_extents);
                let outside = q.sup(&Point3::zeros()).norm();
                let inside = q.max().min(0.0);
                outside + inside
            }
            AnalyticShape::Torus {
                center,
                major_radius,
                minor_radius,
            } => {
                let d = p - v(center);
                let ring = d.x.hypot(d.y) - major_radius;
                ring.hypot(d.z) - minor_radius
            }
            AnalyticShape::Capsule { a, b, radius } => {
                let (a, b) = (v(a), v(b));
                let ab = b - a;
                let len2 = ab.norm_squared();
                let t = if len2 > 0.0 {
                    ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (p - (a + ab * t)).norm() - radius
            }
            AnalyticShape::Union { members } => members
                .iter()
                .map(|m| m.signed_distance(p))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Radius of a ball around the origin that contains the solid.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            AnalyticShape::Sphere { center, radius } => v(center).norm() + radius,
            AnalyticShape::Box {
                center,
                half_extents,
            } => v(center).norm() + v(half_extents).norm(),
            AnalyticShape::Torus {
                center,
                major_radius,
                minor_radius,
            } => v(center).norm() + major_radius + minor_radius,
            AnalyticShape::Capsule { a, b, radius } => v(a).norm().max(v(b).norm()) + radius,
            AnalyticShape::Union { members } => members
                .iter()
                .map(|m| m.bounding_radius())
                .fold(0.0, f64::max),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sphere_example() {
        let s = AnalyticShape::sphere(Point3::zeros(), 0.5);
        assert_eq!(s.signed_distance(&Point3::new(0.75, 0.0, 0.0)), 0.25);
    }

    #[test]
    fn torus_example() {
        let t = AnalyticShape::torus(Point3::zeros(), 0.5, 0.1);
        assert!((t.signed_distance(&Point3::new(0.5, 0.0, 0.0)) + 0.1).abs() < 1e-15);
        // On the axis: distance to the ring minus tube radius.
        let on_axis = t.signed_distance(&Point3::new(0.0, 0.0, 0.3));
        assert!((on_axis - ((0.25f64 + 0.09).sqrt() - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn box_inside_and_outside() {
        let b = AnalyticShape::cuboid(Point3::zeros(), Point3::new(0.5, 0.3, 0.2));
        assert!((b.signed_distance(&Point3::zeros()) + 0.2).abs() < 1e-15);
        assert!((b.signed_distance(&Point3::new(0.8, 0.0, 0.0)) - 0.3).abs() < 1e-15);
        let corner = b.signed_distance(&Point3::new(0.8, 0.7, 0.2));
        assert!((corner - 0.5).abs() < 1e-15);
    }

    #[test]
    fn capsule_distance_to_segment() {
        let c = AnalyticShape::capsule(Point3::new(0.0, 0.0, -0.5), Point3::new(0.0, 0.0, 0.5), 0.05);
        assert!((c.signed_distance(&Point3::new(0.2, 0.0, 0.1)) - 0.15).abs() < 1e-15);
        assert!((c.signed_distance(&Point3::new(0.0, 0.0, 0.9)) - 0.35).abs() < 1e-15);
    }

    #[test]
    fn union_of_disjoint_spheres_takes_min() {
        let a = AnalyticShape::sphere(Point3::new(-0.5, 0.0, 0.0), 0.2);
        let b = AnalyticShape::sphere(Point3::new(0.5, 0.0, 0.0), 0.3);
        let u = AnalyticShape::union(vec![a.clone(), b.clone()]);
        let p = Point3::new(0.0, 0.4, 0.0);
        let (da, db) = (a.signed_distance(&p), b.signed_distance(&p));
        assert_eq!(u.signed_distance(&p), da.min(db));
    }

    #[test]
    fn validation_rejects_nonpositive_sizes() {
        assert!(AnalyticShape::sphere(Point3::zeros(), 0.0).validate().is_err());
        assert!(AnalyticShape::torus(Point3::zeros(), 0.5, -0.1).validate().is_err());
        assert!(AnalyticShape::union(vec![]).validate().is_err());
        assert!(AnalyticShape::capsule(Point3::zeros(), Point3::x(), 0.1).validate().is_ok());
    }

    #[test]
    fn serde_round_trip() {
        let u = AnalyticShape::union(vec![
            AnalyticShape::sphere(Point3::zeros(), 0.5),
            AnalyticShape::torus(Point3::zeros(), 0.5, 0.1),
        ]);
        let text = toml::to_string(&u).unwrap();
        let back: AnalyticShape = toml::from_str(&text).unwrap();
        assert_eq!(u, back);
    }

    fn shapes() -> Vec<AnalyticShape> {
        vec![
            AnalyticShape::sphere(Point3::new(0.1, 0.0, -0.2), 0.4),
            AnalyticShape::cuboid(Point3::zeros(), Point3::new(0.4, 0.2, 0.3)),
            AnalyticShape::torus(Point3::zeros(), 0.5, 0.15),
            AnalyticShape::capsule(Point3::new(-0.3, 0.1, 0.0), Point3::new(0.4, -0.2, 0.2), 0.1),
            AnalyticShape::union(vec![
                AnalyticShape::sphere(Point3::new(0.3, 0.0, 0.0), 0.3),
                AnalyticShape::cuboid(Point3::new(-0.2, 0.0, 0.0), Point3::repeat(0.25)),
            ]),
        ]
    }

    proptest! {
        #[test]
        fn sphere_formula_is_exact(x in -2.0..2.0f64, y in -2.0..2.0f64, z in -2.0..2.0f64) {
            let c = Point3::new(0.1, -0.2, 0.3);
            let s = AnalyticShape::sphere(c, 0.45);
            let p = Point3::new(x, y, z);
            prop_assert_eq!(s.signed_distance(&p), (p - c).norm() - 0.45);
        }

        #[test]
        fn one_lipschitz(ax in -1.2..1.2f64, ay in -1.2..1.2f64, az in -1.2..1.2f64,
                         bx in -1.2..1.2f64, by in -1.2..1.2f64, bz in -1.2..1.2f64) {
            let p = Point3::new(ax, ay, az);
            let q = Point3::new(bx, by, bz);
            for s in shapes() {
                let lhs = (s.signed_distance(&p) - s.signed_distance(&q)).abs();
                prop_assert!(lhs <= (p - q).norm() + 1e-12);
            }
        }
    }
}
