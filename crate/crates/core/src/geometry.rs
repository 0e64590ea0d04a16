//! Court and rim geometry. Distances are feet, angles radians.
//!
//! X runs along the court length, Y across its width and Z is height above
//! the floor. After [`mirror_to_canonical`] every shot targets the left rim.

use crate::dataset::Trajectory;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CourtGeometry<T> {
    pub court_length: T,
    pub court_width: T,
    pub rim_height: T,
    pub rim_radius: T,
    /// Distance of the left rim center from the left baseline.
    pub rim_center_x_left: T,
    pub rim_center_y: T,
}

impl<T: Scalar> Default for CourtGeometry<T> {
    fn default() -> Self {
        Self {
            court_length: T::lit(94.0),
            court_width: T::lit(50.0),
            rim_height: T::lit(10.0),
            rim_radius: T::lit(0.75),
            rim_center_x_left: T::lit(5.25),
            rim_center_y: T::lit(25.0),
        }
    }
}

impl<T: Scalar> CourtGeometry<T> {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("court_length", self.court_length),
            ("court_width", self.court_width),
            ("rim_height", self.rim_height),
            ("rim_radius", self.rim_radius),
            ("rim_center_x_left", self.rim_center_x_left),
            ("rim_center_y", self.rim_center_y),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::Config(format!("geometry.{name} must be positive, got {v}")));
            }
        }
        if self.rim_center_x_left >= self.court_length / T::lit(2.0) {
            return Err(Error::Config("geometry.rim_center_x_left must be < court_length / 2".into()));
        }
        if self.rim_center_y > self.court_width {
            return Err(Error::Config("geometry.rim_center_y must be <= court_width".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

pub fn rim_center<T: Scalar>(geom: &CourtGeometry<T>, side: Side) -> Point3<T> {
    let x = match side {
        Side::Left => geom.rim_center_x_left,
        Side::Right => geom.court_length - geom.rim_center_x_left,
    };
    Point3::new(x, geom.rim_center_y, geom.rim_height)
}

/// Euclidean distance in the XY plane; height is ignored.
#[inline]
pub fn horizontal_distance<T: Scalar>(p: &Point3<T>, rim: &Point3<T>) -> T {
    (p.x - rim.x).hypot(p.y - rim.y)
}

/// Velocity-based approach angle `atan2(-Δz, Δd)` where `Δd` is the decrease
/// in horizontal rim distance between `prev` and `curr`. Positive while the
/// ball descends toward the rim.
pub fn approach_angle<T: Scalar>(prev: &Point3<T>, curr: &Point3<T>, rim: &Point3<T>) -> Result<T> {
    if prev == curr {
        return Err(Error::DegenerateMotion);
    }
    let dz = curr.z - prev.z;
    let closing = horizontal_distance(prev, rim) - horizontal_distance(curr, rim);
    Ok((-dz).atan2(closing))
}

/// Reflect a shot aimed at the right rim so it targets the left one.
pub fn mirror_to_canonical<T: Scalar>(traj: &Trajectory<T>, geom: &CourtGeometry<T>) -> Result<Trajectory<T>> {
    let last = traj.samples.last().ok_or(Error::EmptyTrajectory)?;
    let left = rim_center(geom, Side::Left);
    let right = rim_center(geom, Side::Right);
    let mut out = traj.clone();
    if horizontal_distance(&last.pos, &right) < horizontal_distance(&last.pos, &left) {
        for s in &mut out.samples {
            s.pos.x = geom.court_length - s.pos.x;
        }
    }
    Ok(out)
}
