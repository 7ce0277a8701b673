use serde::{Deserialize, Serialize};

use super::{Mat3, Point3};
use crate::error::{Error, Result};

/// Query-point transform `T(x) = alpha * R * S * A * x - t`.
///
/// `R` is a rotation, `S = S_x S_y S_z` a product of unit shears and
/// `A = A_x A_y A_z` a diagonal stretch. The shape `F(T(x))` is therefore the
/// image of `F`'s shape under `T^-1`: a larger `alpha` shrinks it, and with a
/// trivial linear part its centre moves to `t`.
///
/// Shear `S_x` adds `shear[0] * x` to `y`, `S_y` adds `shear[1] * y` to `z`
/// and `S_z` adds `shear[2] * z` to `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformParams", into = "TransformParams")]
pub struct AffineTransform {
    params: TransformParams,
    linear: Mat3,
    inverse: Mat3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub alpha: f64,
    pub rotation: Mat3,
    pub shear: [f64; 3],
    pub stretch: [f64; 3],
    pub translation: Point3,
}

impl Default for TransformParams {
    fn default() -> Self {
        TransformParams {
            alpha: 1.0,
            rotation: Mat3::identity(),
            shear: [0.0; 3],
            stretch: [1.0; 3],
            translation: Point3::zeros(),
        }
    }
}

const ROTATION_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-12;

impl TryFrom<TransformParams> for AffineTransform {
    type Error = Error;

    fn try_from(params: TransformParams) -> Result<Self> {
        let finite = params.alpha.is_finite()
            && params.rotation.iter().all(|v| v.is_finite())
            && params.shear.iter().all(|v| v.is_finite())
            && params.stretch.iter().all(|v| v.is_finite())
            && params.translation.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite transform parameter".into()));
        }
        if params.alpha <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "scale must be > 0, got {}",
                params.alpha
            )));
        }
        if let Some(s) = params.stretch.iter().find(|&&s| s <= 0.0) {
            return Err(Error::InvalidParameter(format!("stretch must be > 0, got {s}")));
        }
        let r = params.rotation;
        let orth = (r.transpose() * r - Mat3::identity()).abs().max();
        if orth > ROTATION_TOL || (r.determinant() - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidParameter(
                "rotation matrix must be orthogonal with determinant 1".into(),
            ));
        }
        let linear = linear_part(&params);
        let det = linear.determinant();
        if det.abs() < SINGULAR_TOL {
            return Err(Error::SingularTransform { det });
        }
        let inverse = linear
            .try_inverse()
            .ok_or(Error::SingularTransform { det })?;
        Ok(AffineTransform {
            params,
            linear,
            inverse,
        })
    }
}

impl From<AffineTransform> for TransformParams {
    fn from(t: AffineTransform) -> Self {
        t.params
    }
}

fn shear_matrix(shear: &[f64; 3]) -> Mat3 {
    let mut sx = Mat3::identity();
    sx[(1, 0)] = shear[0];
    let mut sy = Mat3::identity();
    sy[(2, 1)] = shear[1];
    let mut sz = Mat3::identity();
    sz[(0, 2)] = shear[2];
    sx * sy * sz
}

fn linear_part(p: &TransformParams) -> Mat3 {
    let stretch = Mat3::from_diagonal(&Point3::new(p.stretch[0], p.stretch[1], p.stretch[2]));
    p.rotation * shear_matrix(&p.shear) * stretch * p.alpha
}

impl AffineTransform {
    pub fn new(params: TransformParams) -> Result<Self> {
        Self::try_from(params)
    }

    pub fn identity() -> Self {
        Self::new(TransformParams::default()).expect("identity is valid")
    }

    pub fn translation(t: Point3) -> Self {
        Self::new(TransformParams {
            translation: t,
            ..Default::default()
        })
        .expect("finite translation")
    }

    pub fn scale(alpha: f64) -> Result<Self> {
        Self::new(TransformParams {
            alpha,
            ..Default::default()
        })
    }

    pub fn params(&self) -> &TransformParams {
        &self.params
    }

    /// `alpha * R * S * A`.
    pub fn linear(&self) -> &Mat3 {
        &self.linear
    }

    pub fn inverse_linear(&self) -> &Mat3 {
        &self.inverse
    }

    pub fn determinant(&self) -> f64 {
        self.linear.determinant()
    }

    /// `T(p)`.
    pub fn apply(&self, p: &Point3) -> Point3 {
        self.linear * p - self.params.translation
    }

    /// `T^-1(q)`: maps a point of the untransformed shape to the
    /// corresponding point of the transformed one.
    pub fn inverse_apply(&self, q: &Point3) -> Point3 {
        self.inverse * (q + self.params.translation)
    }
}

/// Parameters of a pure scale-and-translate transform.
pub fn transform_params(alpha: f64, translation: Point3) -> TransformParams {
    TransformParams {
        alpha,
        translation,
        ..Default::default()
    }
}
