//! Planar and spatial pose algebra.
//!
//! `Pose2` is an SE(2) pose with yaw kept in (-pi, pi]. `Pose3` is a position plus a
//! unit quaternion; boxes in this benchmark are upright, so most code only touches
//! the yaw component.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Norm tolerance accepted when validating externally supplied quaternions.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("quaternion is not unit length (norm = {norm})")]
    NonUnitQuaternion { norm: f64 },
    #[error("box dimensions must be positive and finite, got {0:?}")]
    InvalidDims([f64; 3]),
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: wrap_angle(yaw),
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    /// `self` followed by `other`, with `other` expressed in `self`'s frame.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.yaw.sin_cos();
        Pose2::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.yaw + other.yaw,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.yaw.sin_cos();
        Pose2::new(
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
            -self.yaw,
        )
    }

    /// Express this world pose relative to `frame`.
    pub fn in_frame(&self, frame: &Pose2) -> Pose2 {
        frame.inverse().compose(self)
    }

    /// Inverse of [`Pose2::in_frame`].
    pub fn from_frame(&self, frame: &Pose2) -> Pose2 {
        frame.compose(self)
    }

    pub fn translation(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn distance(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Signed yaw difference `self - other` wrapped to (-pi, pi].
    pub fn yaw_error(&self, other: &Pose2) -> f64 {
        wrap_angle(self.yaw - other.yaw)
    }

    /// Rotate a planar vector by this pose's yaw.
    pub fn rotate(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite()
    }
}

impl Serialize for Pose2 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y, self.yaw].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose2 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x, y, yaw] = <[f64; 3]>::deserialize(deserializer)?;
        Ok(Pose2::new(x, y, yaw))
    }
}

/// Unit quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Serialize for Quat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.w, self.x, self.y, self.z].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Quat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [w, x, y, z] = <[f64; 4]>::deserialize(deserializer)?;
        Quat::try_unit(w, x, y, z).map_err(serde::de::Error::custom)
    }
}

impl Default for Quat {
    fn default() -> Self {
        Self::identity()
    }
}

impl Quat {
    pub fn identity() -> Self {
        Self {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    /// Build from raw components, normalizing.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }.normalized()
    }

    /// Build from raw components, rejecting inputs that are not unit length.
    pub fn try_unit(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let q = Self { w, x, y, z };
        q.check_unit()?;
        Ok(q.normalized())
    }

    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = (yaw / 2.0).sin_cos();
        Self {
            w: c,
            x: 0.0,
            y: 0.0,
            z: s,
        }
    }

    /// ZYX (yaw-pitch-roll) construction.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        let (sr, cr) = (roll / 2.0).sin_cos();
        let (sp, cp) = (pitch / 2.0).sin_cos();
        let (sy, cy) = (yaw / 2.0).sin_cos();
        Self {
            w: cr * cp * cy + sr * sp * sy,
            x: sr * cp * cy - cr * sp * sy,
            y: cr * sp * cy + sr * cp * sy,
            z: cr * cp * sy - sr * sp * cy,
        }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    pub fn check_unit(&self) -> Result<(), GeometryError> {
        let norm = self.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(GeometryError::NonUnitQuaternion { norm });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Quat) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn neg(&self) -> Quat {
        Quat {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn mul(&self, o: &Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn conjugate(&self) -> Quat {
        Quat {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let p = Quat {
            w: 0.0,
            x: v[0],
            y: v[1],
            z: v[2],
        };
        let r = self.mul(&p).mul(&self.conjugate());
        [r.x, r.y, r.z]
    }

    /// (roll, pitch, yaw) in the ZYX convention.
    pub fn to_euler(&self) -> (f64, f64, f64) {
        let Quat { w, x, y, z } = *self;
        let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
        let sinp = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0);
        let pitch = sinp.asin();
        let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
        (roll, pitch, yaw)
    }

    pub fn yaw(&self) -> f64 {
        self.to_euler().2
    }
}

/// Geodesic angle between two rotations, in [0, pi]. Sign of either argument is ignored.
pub fn quat_distance(q1: &Quat, q2: &Quat) -> Result<f64, GeometryError> {
    q1.check_unit()?;
    q2.check_unit()?;
    let d = q1.dot(q2).abs().min(1.0);
    Ok(2.0 * d.acos())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose3 {
    pub position: [f64; 3],
    pub orientation: Quat,
}

impl Pose3 {
    pub fn new(position: [f64; 3], orientation: Quat) -> Self {
        Self {
            position,
            orientation,
        }
    }

    /// Upright pose with yaw only.
    pub fn upright(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self::new([x, y, z], Quat::from_yaw(yaw))
    }

    pub fn yaw(&self) -> f64 {
        self.orientation.yaw()
    }

    /// Planar projection (x, y, yaw).
    pub fn planar(&self) -> Pose2 {
        Pose2::new(self.position[0], self.position[1], self.yaw())
    }

    /// Express this world pose relative to a planar `frame` (z and tilt untouched).
    pub fn in_frame(&self, frame: &Pose2) -> Pose3 {
        let inv = Quat::from_yaw(-frame.yaw);
        let d = [
            self.position[0] - frame.x,
            self.position[1] - frame.y,
            self.position[2],
        ];
        Pose3::new(inv.rotate(d), inv.mul(&self.orientation).normalized())
    }

    pub fn from_frame(&self, frame: &Pose2) -> Pose3 {
        let rot = Quat::from_yaw(frame.yaw);
        let p = rot.rotate(self.position);
        Pose3::new(
            [p[0] + frame.x, p[1] + frame.y, p[2]],
            rot.mul(&self.orientation).normalized(),
        )
    }
}

impl Serialize for Pose3 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let [px, py, pz] = self.position;
        let q = self.orientation;
        [px, py, pz, q.w, q.x, q.y, q.z].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose3 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [px, py, pz, w, x, y, z] = <[f64; 7]>::deserialize(deserializer)?;
        let q = Quat::try_unit(w, x, y, z).map_err(serde::de::Error::custom)?;
        Ok(Pose3::new([px, py, pz], q))
    }
}

/// Axis-aligned box extents in the box frame (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct BoxDims {
    lx: f64,
    ly: f64,
    lz: f64,
}

impl BoxDims {
    pub fn new(lx: f64, ly: f64, lz: f64) -> Result<Self, GeometryError> {
        if [lx, ly, lz].iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(Self { lx, ly, lz })
        } else {
            Err(GeometryError::InvalidDims([lx, ly, lz]))
        }
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn lz(&self) -> f64 {
        self.lz
    }

    /// Radius of the smallest disc covering the footprint along its larger side.
    pub fn footprint_radius(&self) -> f64 {
        self.lx.max(self.ly) / 2.0
    }
}

impl TryFrom<[f64; 3]> for BoxDims {
    type Error = GeometryError;
    fn try_from(v: [f64; 3]) -> Result<Self, Self::Error> {
        BoxDims::new(v[0], v[1], v[2])
    }
}

impl From<BoxDims> for [f64; 3] {
    fn from(d: BoxDims) -> Self {
        [d.lx, d.ly, d.lz]
    }
}

/// Distance from point `p` to the segment `a`-`b`.
pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn pose() -> impl Strategy<Value = Pose2> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    fn close(a: &Pose2, b: &Pose2, tol: f64) -> bool {
        (a.x - b.x).abs() < tol && (a.y - b.y).abs() < tol && wrap_angle(a.yaw - b.yaw).abs() < tol
    }

    #[test]
    fn identity_compose() {
        let p = Pose2::new(1.5, -2.0, 0.3);
        assert_eq!(Pose2::identity().compose(&p), p);
    }

    #[test]
    fn quarter_turn_compose() {
        let a = Pose2::new(1.0, 0.0, FRAC_PI_2);
        let r = a.compose(&Pose2::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(r.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.yaw, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn wrap_keeps_pi() {
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
    }

    #[test]
    fn translation_only_frame() {
        let robot = Pose2::new(1.0, 0.0, 0.0);
        let rel = Pose2::new(2.0, 0.0, 0.0).in_frame(&robot);
        assert_abs_diff_eq!(rel.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rel.y, 0.0, epsilon = 1e-12);
        let b = Pose3::upright(2.0, 0.0, 0.4, 0.0).in_frame(&robot);
        assert_abs_diff_eq!(b.position[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.position[2], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn identity_frame_is_noop() {
        let p = Pose3::upright(0.3, 0.2, 0.1, 1.0);
        let r = p.in_frame(&Pose2::identity());
        assert_abs_diff_eq!(r.position[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(r.yaw(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn quat_distance_cases() {
        let q = Quat::from_euler(0.1, -0.2, 0.7);
        assert_abs_diff_eq!(quat_distance(&q, &q).unwrap(), 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(quat_distance(&q, &q.neg()).unwrap(), 0.0, epsilon = 1e-7);
        // 90 deg about z: q = (cos 45, 0, 0, sin 45), |dot| with identity = 0.70710678,
        // 2 * acos(0.70710678) = 1.5707963.
        let z90 = Quat::from_yaw(FRAC_PI_2);
        assert_abs_diff_eq!(
            quat_distance(&Quat::identity(), &z90).unwrap(),
            FRAC_PI_2,
            epsilon = 1e-9
        );
    }

    #[test]
    fn quat_distance_rejects_non_unit() {
        let bad = Quat {
            w: 2.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        };
        assert!(matches!(
            quat_distance(&bad, &Quat::identity()),
            Err(GeometryError::NonUnitQuaternion { .. })
        ));
    }

    #[test]
    fn euler_roundtrip() {
        let q = Quat::from_euler(0.2, -0.3, 2.5);
        let (r, p, y) = q.to_euler();
        assert_abs_diff_eq!(r, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p, -0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(y, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn json_shapes() {
        let p = Pose2::new(1.0, 2.0, 0.5);
        assert_eq!(serde_json::to_string(&p).unwrap(), "[1.0,2.0,0.5]");
        let q = Pose3::upright(1.0, 2.0, 3.0, 0.0);
        assert_eq!(
            serde_json::to_string(&q).unwrap(),
            "[1.0,2.0,3.0,1.0,0.0,0.0,0.0]"
        );
        assert!(serde_json::from_str::<Pose3>("[0,0,0,2,0,0,0]").is_err());
        assert!(serde_json::from_str::<BoxDims>("[0.3,-0.1,0.3]").is_err());
    }

    #[test]
    fn tangent_segment_distance() {
        // Segment along y = 1 from x=-1 to x=1; point at origin is exactly 1 away.
        assert_abs_diff_eq!(
            point_segment_distance([0.0, 0.0], [-1.0, 1.0], [1.0, 1.0]),
            1.0,
            epsilon = 1e-15
        );
        // Endpoint is closest.
        assert_abs_diff_eq!(
            point_segment_distance([3.0, 4.0], [0.0, 0.0], [0.0, -5.0]),
            5.0,
            epsilon = 1e-15
        );
    }

    proptest! {
        #[test]
        fn compose_associative(a in pose(), b in pose(), c in pose()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!(close(&l, &r, 1e-9));
        }

        #[test]
        fn compose_inverse_is_identity(p in pose()) {
            prop_assert!(close(&p.compose(&p.inverse()), &Pose2::identity(), 1e-9));
        }

        #[test]
        fn yaw_always_wrapped(a in pose(), b in pose()) {
            let r = a.compose(&b);
            prop_assert!(r.yaw > -PI && r.yaw <= PI);
        }

        #[test]
        fn frame_roundtrip(p in pose(), f in pose(), z in 0.0..2.0f64) {
            let back = p.in_frame(&f).from_frame(&f);
            prop_assert!(close(&back, &p, 1e-9));
            let p3 = Pose3::upright(p.x, p.y, z, p.yaw);
            let back3 = p3.in_frame(&f).from_frame(&f);
            for i in 0..3 {
                prop_assert!((back3.position[i] - p3.position[i]).abs() < 1e-9);
            }
            prop_assert!(quat_distance(&back3.orientation, &p3.orientation).unwrap() < 1e-6);
        }

        #[test]
        fn quat_distance_metric(r1 in -3.0..3.0f64, p1 in -1.5..1.5f64, y1 in -3.0..3.0f64,
                                r2 in -3.0..3.0f64, p2 in -1.5..1.5f64, y2 in -3.0..3.0f64) {
            let a = Quat::from_euler(r1, p1, y1);
            let b = Quat::from_euler(r2, p2, y2);
            let d = quat_distance(&a, &b).unwrap();
            prop_assert!((0.0..=PI + 1e-12).contains(&d));
            prop_assert!((d - quat_distance(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!((d - quat_distance(&a, &b.neg()).unwrap()).abs() < 1e-12);
        }
    }
}
