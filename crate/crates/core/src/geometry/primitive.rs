use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use super::polyhedra::{unit_dodecahedron, unit_icosahedron, unit_octahedron, unit_tetrahedron};
use super::Point3;
use crate::error::{Error, Result};

/// The nine primitive shape families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrimitiveKind {
    Sphere,
    Cuboid,
    Cone,
    Cylinder,
    Torus,
    Tetrahedron,
    Octahedron,
    Icosahedron,
    Dodecahedron,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 9] = [
        PrimitiveKind::Sphere,
        PrimitiveKind::Cuboid,
        PrimitiveKind::Cone,
        PrimitiveKind::Cylinder,
        PrimitiveKind::Torus,
        PrimitiveKind::Tetrahedron,
        PrimitiveKind::Octahedron,
        PrimitiveKind::Icosahedron,
        PrimitiveKind::Dodecahedron,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The canonical member of the family, inscribed in the unit sphere.
    pub fn canonical(self) -> Primitive {
        match self {
            PrimitiveKind::Sphere => Primitive::Sphere { radius: 1.0 },
            PrimitiveKind::Cuboid => Primitive::Cuboid {
                half_extents: Point3::repeat(1.0 / 3f64.sqrt()),
            },
            PrimitiveKind::Cone => Primitive::Cone {
                half_angle: PI / 6.0,
                height: 1.5,
            },
            PrimitiveKind::Cylinder => Primitive::Cylinder {
                radius: FRAC_1_SQRT_2,
                half_height: FRAC_1_SQRT_2,
            },
            PrimitiveKind::Torus => Primitive::Torus {
                major: 0.75,
                minor: 0.25,
            },
            PrimitiveKind::Tetrahedron => Primitive::Tetrahedron { circumradius: 1.0 },
            PrimitiveKind::Octahedron => Primitive::Octahedron { circumradius: 1.0 },
            PrimitiveKind::Icosahedron => Primitive::Icosahedron { circumradius: 1.0 },
            PrimitiveKind::Dodecahedron => Primitive::Dodecahedron { circumradius: 1.0 },
        }
    }

    /// Whether the canonical mesh comes from a vertex table rather than
    /// isosurface extraction.
    pub fn is_polyhedral(self) -> bool {
        !matches!(
            self,
            PrimitiveKind::Sphere | PrimitiveKind::Cone | PrimitiveKind::Cylinder | PrimitiveKind::Torus
        )
    }
}

/// A primitive shape with its size parameters. All shapes are centred so
/// that the origin lies inside them (on the axis for the torus).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Primitive {
    Sphere { radius: f64 },
    Cuboid { half_extents: Point3 },
    /// Capped cone along +z with its apex at `2h/3` and its base disc at `-h/3`.
    Cone { half_angle: f64, height: f64 },
    /// Axis along z.
    Cylinder { radius: f64, half_height: f64 },
    /// Lies in the xy plane.
    Torus { major: f64, minor: f64 },
    Tetrahedron { circumradius: f64 },
    Octahedron { circumradius: f64 },
    Icosahedron { circumradius: f64 },
    Dodecahedron { circumradius: f64 },
}

impl Primitive {
    pub fn kind(&self) -> PrimitiveKind {
        match self {
            Primitive::Sphere { .. } => PrimitiveKind::Sphere,
            Primitive::Cuboid { .. } => PrimitiveKind::Cuboid,
            Primitive::Cone { .. } => PrimitiveKind::Cone,
            Primitive::Cylinder { .. } => PrimitiveKind::Cylinder,
            Primitive::Torus { .. } => PrimitiveKind::Torus,
            Primitive::Tetrahedron { .. } => PrimitiveKind::Tetrahedron,
            Primitive::Octahedron { .. } => PrimitiveKind::Octahedron,
            Primitive::Icosahedron { .. } => PrimitiveKind::Icosahedron,
            Primitive::Dodecahedron { .. } => PrimitiveKind::Dodecahedron,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
            }
        };
        match *self {
            Primitive::Sphere { radius } => positive("radius", radius),
            Primitive::Cuboid { half_extents } => half_extents
                .iter()
                .try_for_each(|&h| positive("half extent", h)),
            Primitive::Cone { half_angle, height } => {
                positive("height", height)?;
                if half_angle > 0.0 && half_angle < PI / 2.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "cone half-angle must lie in (0, pi/2), got {half_angle}"
                    )))
                }
            }
            Primitive::Cylinder { radius, half_height } => {
                positive("radius", radius)?;
                positive("half height", half_height)
            }
            Primitive::Torus { major, minor } => {
                positive("major radius", major)?;
                positive("minor radius", minor)?;
                if minor < major {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "torus minor radius {minor} must be below major radius {major}"
                    )))
                }
            }
            Primitive::Tetrahedron { circumradius }
            | Primitive::Octahedron { circumradius }
            | Primitive::Icosahedron { circumradius }
            | Primitive::Dodecahedron { circumradius } => positive("circumradius", circumradius),
        }
    }

    /// Radius of the smallest origin-centred ball containing the shape.
    pub fn circumradius(&self) -> f64 {
        match *self {
            Primitive::Sphere { radius } => radius,
            Primitive::Cuboid { half_extents } => half_extents.norm(),
            Primitive::Cone { half_angle, height } => {
                let base = height * half_angle.tan();
                (2.0 * height / 3.0).max(base.hypot(height / 3.0))
            }
            Primitive::Cylinder { radius, half_height } => radius.hypot(half_height),
            Primitive::Torus { major, minor } => major + minor,
            Primitive::Tetrahedron { circumradius }
            | Primitive::Octahedron { circumradius }
            | Primitive::Icosahedron { circumradius }
            | Primitive::Dodecahedron { circumradius } => circumradius,
        }
    }

    /// Signed distance: negative inside, positive outside. Exact for the
    /// sphere, cuboid, cone, cylinder and torus; for the platonic solids the
    /// largest face-plane distance (exact inside, a lower bound outside).
    pub fn sdf(&self, p: &Point3) -> f64 {
        match *self {
            Primitive::Sphere { radius } => p.norm() - radius,
            Primitive::Cuboid { half_extents } => {
                let q = p.abs() - half_extents;
                q.sup(&Point3::zeros()).norm() + q.max().min(0.0)
            }
            Primitive::Cone { half_angle, height } => {
                capped_cone(p, height, height * half_angle.tan())
            }
            Primitive::Cylinder { radius, half_height } => {
                let dx = p.xy().norm() - radius;
                let dz = p.z.abs() - half_height;
                dx.max(dz).min(0.0) + dx.max(0.0).hypot(dz.max(0.0))
            }
            Primitive::Torus { major, minor } => {
                (p.xy().norm() - major).hypot(p.z) - minor
            }
            Primitive::Tetrahedron { circumradius } => {
                unit_tetrahedron().plane_distance(p, circumradius)
            }
            Primitive::Octahedron { circumradius } => {
                unit_octahedron().plane_distance(p, circumradius)
            }
            Primitive::Icosahedron { circumradius } => {
                unit_icosahedron().plane_distance(p, circumradius)
            }
            Primitive::Dodecahedron { circumradius } => {
                unit_dodecahedron().plane_distance(p, circumradius)
            }
        }
    }
}

/// Exact distance to a solid cone with apex at `z = 2h/3`, base disc of
/// radius `base` at `z = -h/3`.
fn capped_cone(p: &Point3, height: f64, base: f64) -> f64 {
    // 2D problem in (radial, axial) with the cone centred on its half height
    let hh = height / 2.0;
    let qx = p.xy().norm();
    let qy = p.z - height / 6.0;
    let (k1x, k1y) = (0.0, hh);
    let (k2x, k2y) = (-base, 2.0 * hh);
    let cap = if qy < 0.0 { base } else { 0.0 };
    let (cax, cay) = (qx - qx.min(cap), qy.abs() - hh);
    let t = (((k1x - qx) * k2x + (k1y - qy) * k2y) / (k2x * k2x + k2y * k2y)).clamp(0.0, 1.0);
    let (cbx, cby) = (qx - k1x + k2x * t, qy - k1y + k2y * t);
    let sign = if cbx < 0.0 && cay < 0.0 { -1.0 } else { 1.0 };
    sign * (cax * cax + cay * cay).min(cbx * cbx + cby * cby).sqrt()
}
