//! Planar rigid transforms.
//!
//! A pose maps points from its source frame into its target frame as
//! `p' = R(theta) * p + t`. Angles are radians, wrapped to `(-pi, pi]`;
//! the negative boundary maps to the positive one, so `-pi` normalizes
//! to `pi`. Rotation matrices are never stored, only the angle.

use std::f64::consts::PI;

use thiserror::Error;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },
}

/// Normalizes an angle to `(-pi, pi]`.
///
/// Idempotent: values already in range are returned bit-for-bit unchanged.
pub fn wrap_angle(radians: f64) -> Result<f64, GeometryError> {
    if !radians.is_finite() {
        return Err(GeometryError::NonFinite {
            what: "angle",
            value: radians,
        });
    }
    Ok(wrap(radians))
}

/// Wrap for angles already known finite.
///
/// The in-range fast path returns the input unchanged, which makes the
/// function exactly idempotent; the fold via `rem_euclid` alone would
/// perturb small negative angles by one rounding step.
pub(crate) fn wrap(radians: f64) -> f64 {
    debug_assert!(radians.is_finite());
    if radians > -PI && radians <= PI {
        return radians;
    }
    // rem_euclid lands in [0, 2pi], the upper bound reachable through rounding.
    let r = radians.rem_euclid(TWO_PI);
    if r > PI {
        r - TWO_PI
    } else {
        r
    }
}

/// A point in some planar frame. Coordinates are always finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    x: f64,
    y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Result<Self, GeometryError> {
        for (what, value) in [("x coordinate", x), ("y coordinate", y)] {
            if !value.is_finite() {
                return Err(GeometryError::NonFinite { what, value });
            }
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn distance_to(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A proper rigid transform of the plane: rotation by `theta` followed by
/// translation. `theta` is wrapped to `(-pi, pi]` by every constructor and
/// every operation, so two equal poses compare equal componentwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se2Pose {
    theta: f64,
    tx: f64,
    ty: f64,
}

impl Se2Pose {
    pub fn new(theta: f64, tx: f64, ty: f64) -> Result<Self, GeometryError> {
        for (what, value) in [("angle", theta), ("tx", tx), ("ty", ty)] {
            if !value.is_finite() {
                return Err(GeometryError::NonFinite { what, value });
            }
        }
        Ok(Self {
            theta: wrap(theta),
            tx,
            ty,
        })
    }

    pub fn identity() -> Self {
        Self {
            theta: 0.0,
            tx: 0.0,
            ty: 0.0,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tx(&self) -> f64 {
        self.tx
    }

    pub fn ty(&self) -> f64 {
        self.ty
    }

    /// Row-major rotation matrix for `theta`, materialized on demand.
    pub fn rotation(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.theta.sin_cos();
        [[c, -s], [s, c]]
    }

    /// Maps a point from this pose's source frame into its target frame.
    pub fn apply(&self, p: Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        Point2 {
            x: c * p.x - s * p.y + self.tx,
            y: s * p.x + c * p.y + self.ty,
        }
    }

    /// Composition `self ∘ other`: applying the result equals applying
    /// `other` first, then `self`.
    pub fn compose(&self, other: &Se2Pose) -> Se2Pose {
        let (s, c) = self.theta.sin_cos();
        Se2Pose {
            theta: wrap(self.theta + other.theta),
            tx: c * other.tx - s * other.ty + self.tx,
            ty: s * other.tx + c * other.ty + self.ty,
        }
    }

    pub fn inverse(&self) -> Se2Pose {
        let (s, c) = self.theta.sin_cos();
        // R(-theta) * -t
        Se2Pose {
            theta: wrap(-self.theta),
            tx: -(c * self.tx + s * self.ty),
            ty: -(-s * self.tx + c * self.ty),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wrap_angle_fixed_points() {
        assert_eq!(wrap_angle(0.0).unwrap(), 0.0);
        assert_eq!(wrap_angle(PI).unwrap(), PI);
        assert_eq!(wrap_angle(-PI).unwrap(), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI).unwrap(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-2.5 * PI).unwrap(), -0.5 * PI, epsilon = 1e-12);
    }

    #[test]
    fn wrap_angle_rejects_non_finite() {
        assert!(wrap_angle(f64::NAN).is_err());
        assert!(wrap_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn wrap_is_exactly_idempotent() {
        for i in 0..10_000 {
            let a = (i as f64 - 5_000.0) * 0.003_7;
            let once = wrap(a);
            assert!(once > -PI && once <= PI, "out of range for {a}");
            assert_eq!(wrap(once), once, "not idempotent for {a}");
        }
    }

    #[test]
    fn apply_quarter_turn() {
        let pose = Se2Pose::new(PI / 2.0, 0.0, 0.0).unwrap();
        let p = pose.apply(Point2::new(1.0, 0.0).unwrap());
        assert_abs_diff_eq!(p.x(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn apply_identity_is_noop() {
        let p = Point2::new(3.5, -2.25).unwrap();
        assert_eq!(Se2Pose::identity().apply(p), p);
    }

    #[test]
    fn constructor_wraps_theta() {
        let pose = Se2Pose::new(3.0 * PI, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(pose.theta(), PI, epsilon = 1e-12);
    }

    #[test]
    fn compose_matches_sequential_application() {
        let a = Se2Pose::new(0.7, 1.0, -2.0).unwrap();
        let b = Se2Pose::new(-1.9, 0.5, 3.0).unwrap();
        let p = Point2::new(2.0, -1.0).unwrap();
        let via_compose = a.compose(&b).apply(p);
        let sequential = a.apply(b.apply(p));
        assert_abs_diff_eq!(via_compose.x(), sequential.x(), epsilon = 1e-12);
        assert_abs_diff_eq!(via_compose.y(), sequential.y(), epsilon = 1e-12);
    }

    #[test]
    fn inverse_round_trips_to_identity() {
        let a = Se2Pose::new(2.4, -3.0, 0.25).unwrap();
        let id = a.compose(&a.inverse());
        assert_abs_diff_eq!(id.theta(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(id.tx(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(id.ty(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn point_rejects_non_finite() {
        assert!(Point2::new(f64::NAN, 0.0).is_err());
        assert!(Point2::new(0.0, f64::NEG_INFINITY).is_err());
    }
}
