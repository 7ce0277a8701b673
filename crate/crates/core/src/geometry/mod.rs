//! Implicit shapes: primitive signed distance functions, affine query-point
//! transforms, plane truncation and union.

mod polyhedra;
mod primitive;
mod transform;

pub use polyhedra::{
    unit_dodecahedron, unit_icosahedron, unit_octahedron, unit_tetrahedron, Polyhedron,
};
pub use primitive::{Primitive, PrimitiveKind};
pub use transform::{transform_params, AffineTransform, TransformParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Oriented plane. Points with `sdf(p) <= 0` are on the kept side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    anchor: Point3,
    normal: Point3,
}

impl Plane {
    /// Builds a plane, normalizing `normal`.
    pub fn new(anchor: Point3, normal: Point3) -> Result<Self> {
        let len = normal.norm();
        if !(len.is_finite() && len > 1e-12) || !anchor.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "plane needs a finite anchor and non-zero normal, got {anchor:?} / {normal:?}"
            )));
        }
        Ok(Plane {
            anchor,
            normal: normal / len,
        })
    }

    pub fn anchor(&self) -> Point3 {
        self.anchor
    }

    pub fn normal(&self) -> Point3 {
        self.normal
    }

    pub fn sdf(&self, p: &Point3) -> f64 {
        self.normal.dot(&(p - self.anchor))
    }
}

/// Composition tree of implicit shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SdfNode {
    Primitive(Primitive),
    /// Child evaluated at `T(x)`.
    Transformed(Box<SdfNode>, AffineTransform),
    /// `max(child, plane)`: the child cut by a half-space.
    Truncated(Box<SdfNode>, Plane),
    /// `min` over the children. Must not be empty.
    Union(Vec<SdfNode>),
}

impl SdfNode {
    pub fn transformed(self, transform: AffineTransform) -> Self {
        SdfNode::Transformed(Box::new(self), transform)
    }

    pub fn truncated(self, plane: Plane) -> Self {
        SdfNode::Truncated(Box::new(self), plane)
    }

    pub fn union(children: Vec<SdfNode>) -> Result<Self> {
        if children.is_empty() {
            return Err(Error::InvalidParameter("union of zero shapes".into()));
        }
        Ok(SdfNode::Union(children))
    }

    pub fn eval(&self, p: &Point3) -> f64 {
        match self {
            SdfNode::Primitive(prim) => prim.sdf(p),
            SdfNode::Transformed(child, t) => child.eval(&t.apply(p)),
            SdfNode::Truncated(child, plane) => child.eval(p).max(plane.sdf(p)),
            SdfNode::Union(children) => children
                .iter()
                .map(|c| c.eval(p))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

impl From<Primitive> for SdfNode {
    fn from(p: Primitive) -> Self {
        SdfNode::Primitive(p)
    }
}
