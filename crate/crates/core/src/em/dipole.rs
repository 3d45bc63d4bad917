use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Distance between the projections onto the xy-plane.
    pub fn transverse_distance(&self, other: &Point3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Which part of the link a radiator belongs to. The declaration order is the
/// row/column order of the system impedance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Transmitter,
    RisElement,
    Object,
    Receiver,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Transmitter, Role::RisElement, Role::Object, Role::Receiver];

    pub fn letter(self) -> char {
        match self {
            Role::Transmitter => 'T',
            Role::RisElement => 'S',
            Role::Object => 'O',
            Role::Receiver => 'R',
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Largest radius-to-length ratio accepted as a thin wire.
pub const MAX_RADIUS_FRACTION: f64 = 1.0 / 50.0;

const AXIS_TOLERANCE: f64 = 1e-12;

/// A center-fed, perfectly conducting thin-wire dipole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dipole {
    pub center: Point3,
    pub length: f64,
    pub radius: f64,
    pub axis: Point3,
    pub role: Role,
}

impl Dipole {
    /// A z-directed dipole.
    pub fn new(center: Point3, length: f64, radius: f64, role: Role) -> Result<Self> {
        Self::with_axis(center, length, radius, Point3::new(0.0, 0.0, 1.0), role)
    }

    pub fn with_axis(center: Point3, length: f64, radius: f64, axis: Point3, role: Role) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Geometry(format!("dipole length must be positive, got {length}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Geometry(format!("wire radius must be positive, got {radius}")));
        }
        if radius > length * MAX_RADIUS_FRACTION * (1.0 + 1e-12) {
            return Err(Error::Geometry(format!(
                "radius {radius} m exceeds the thin-wire limit l/50 for length {length} m"
            )));
        }
        if (axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Geometry(format!("axis must have unit norm, got {}", axis.norm())));
        }
        if ![center.x, center.y, center.z].iter().all(|c| c.is_finite()) {
            return Err(Error::Geometry("dipole center must be finite".into()));
        }
        Ok(Self { center, length, radius, axis, role })
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.length
    }

    /// True when the axis is parallel to z (either sense).
    pub fn is_z_directed(&self) -> bool {
        self.axis.x.abs() < AXIS_TOLERANCE && self.axis.y.abs() < AXIS_TOLERANCE
    }

    /// Lower and upper z coordinates of the wire.
    pub fn z_extent(&self) -> (f64, f64) {
        (self.center.z - self.half_length(), self.center.z + self.half_length())
    }
}
