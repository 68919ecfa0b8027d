//! Narrow-phase queries for the scenario geometries.
//!
//! Every query reports the penetration `x0` (positive = overlap), the unit
//! normal pointing from the other geometry into the queried body, the
//! deepest point and a feature id that stays fixed while the contact
//! topology is unchanged.

use nalgebra::{Matrix3, Vector3};

use crate::error::{invalid, Result};

pub const DEFAULT_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Disk in planar worlds, sphere in spatial ones.
    Sphere { radius: f64 },
    /// Solid region `n·p ≤ offset` in the body frame; the body pose shifts it.
    HalfSpace { normal: Vector3<f64>, offset: f64 },
    /// Rectangle (planar, `z` extent ignored) or box.
    Box { half_extents: Vector3<f64> },
    /// Slender segment along the body `x` axis; only endpoints collide.
    Rod { length: f64 },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Shape::Sphere { radius } if !(radius > 0.0 && radius.is_finite()) => {
                Err(invalid("radius", format!("must be positive, got {radius}")))
            }
            Shape::HalfSpace { normal, offset } if (normal.norm() - 1.0).abs() > 1e-12 || !offset.is_finite() => {
                Err(invalid("normal", "half-space normal must be a unit vector"))
            }
            Shape::Box { half_extents } if half_extents.iter().any(|h| !(*h > 0.0 && h.is_finite())) => {
                Err(invalid("half_extents", "must be positive"))
            }
            Shape::Rod { length } if !(length > 0.0 && length.is_finite()) => {
                Err(invalid("length", format!("must be positive, got {length}")))
            }
            _ => Ok(()),
        }
    }

    /// Radius of a bounding sphere about the body origin; infinite for
    /// half-spaces.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Sphere { radius } => radius,
            Shape::HalfSpace { .. } => f64::INFINITY,
            Shape::Box { half_extents } => half_extents.norm(),
            Shape::Rod { length } => 0.5 * length,
        }
    }
}

/// World-frame plane of a half-space: solid where `normal·p ≤ offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn new(normal: Vector3<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    /// Positive outside the solid.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    pub x0: f64,
    pub normal: Vector3<f64>,
    pub point: Vector3<f64>,
    pub feature: u32,
}

fn point_halfspace(p: &Vector3<f64>, plane: &Plane, margin: f64, feature: u32) -> Option<ContactPoint> {
    let x0 = -plane.signed_distance(p);
    (x0 > -margin).then(|| ContactPoint { x0, normal: plane.normal, point: p - x0.max(0.0) * plane.normal, feature })
}

pub fn sphere_halfspace(center: &Vector3<f64>, radius: f64, plane: &Plane, margin: f64) -> Option<ContactPoint> {
    let x0 = radius - plane.signed_distance(center);
    (x0 > -margin).then(|| ContactPoint { x0, normal: plane.normal, point: center - radius * plane.normal, feature: 0 })
}

/// Normal along the center line from `b` to `a`. Coincident centers fall back
/// to `fallback` (the world up axis).
pub fn sphere_sphere(
    center_a: &Vector3<f64>,
    radius_a: f64,
    center_b: &Vector3<f64>,
    radius_b: f64,
    margin: f64,
    fallback: &Vector3<f64>,
) -> Option<ContactPoint> {
    let delta = center_a - center_b;
    let dist = delta.norm();
    let x0 = radius_a + radius_b - dist;
    if x0 <= -margin {
        return None;
    }
    let normal = if dist > 0.0 {
        delta / dist
    } else {
        log::warn!("coincident sphere centers, using fallback normal {fallback:?}");
        *fallback
    };
    // midway through the overlap region
    let point = center_b + (radius_b - 0.5 * x0) * normal;
    Some(ContactPoint { x0, normal, point, feature: 0 })
}

/// One contact per corner within the margin; `planar` boxes use their four
/// `z = 0` corners. Feature ids are corner indices.
pub fn box_halfspace_corners(
    center: &Vector3<f64>,
    rotation: &Matrix3<f64>,
    half_extents: &Vector3<f64>,
    planar: bool,
    plane: &Plane,
    margin: f64,
) -> Vec<ContactPoint> {
    let corners: &[(f64, f64, f64)] = if planar {
        &[(-1.0, -1.0, 0.0), (1.0, -1.0, 0.0), (1.0, 1.0, 0.0), (-1.0, 1.0, 0.0)]
    } else {
        &[
            (-1.0, -1.0, -1.0),
            (1.0, -1.0, -1.0),
            (1.0, 1.0, -1.0),
            (-1.0, 1.0, -1.0),
            (-1.0, -1.0, 1.0),
            (1.0, -1.0, 1.0),
            (1.0, 1.0, 1.0),
            (-1.0, 1.0, 1.0),
        ]
    };
    corners
        .iter()
        .enumerate()
        .filter_map(|(i, &(sx, sy, sz))| {
            let local = Vector3::new(sx * half_extents.x, sy * half_extents.y, sz * half_extents.z);
            point_halfspace(&(center + rotation * local), plane, margin, i as u32)
        })
        .collect()
}

/// Contact at the deeper rod endpoint only (slender rod, thickness ignored).
/// Feature 0 is the `−x` endpoint, 1 the `+x` endpoint.
pub fn rod_endpoint_halfspace(
    center: &Vector3<f64>,
    rotation: &Matrix3<f64>,
    length: f64,
    plane: &Plane,
    margin: f64,
) -> Option<ContactPoint> {
    let axis = rotation * Vector3::x() * (0.5 * length);
    let ends = [center - axis, center + axis];
    let (i, end) =
        ends.iter().enumerate().min_by(|a, b| plane.signed_distance(a.1).total_cmp(&plane.signed_distance(b.1))).expect("two endpoints");
    point_halfspace(end, plane, margin, i as u32)
}
