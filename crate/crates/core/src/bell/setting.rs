use std::ops::{Mul, Neg};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A vector in spin space, used for measurement directions and result labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const Z: Vec3 = Vec3([0.0, 0.0, 1.0]);
    pub const X: Vec3 = Vec3([1.0, 0.0, 0.0]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    /// Unit vector in the x-z plane at `theta` radians from the z axis.
    pub fn from_angle(theta: f64) -> Self {
        Vec3([theta.sin(), 0.0, theta.cos()])
    }

    pub fn from_degrees(deg: f64) -> Self {
        Self::from_angle(deg.to_radians())
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.0.iter().zip(other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Checks the vector is a unit vector to within `1e-9`.
    pub fn unit(self) -> Result<Self> {
        if self.0.iter().all(|c| c.is_finite()) && (self.norm() - 1.0).abs() <= 1e-9 {
            Ok(self)
        } else {
            Err(Error::Input(format!("{:?} is not a unit vector", self.0)))
        }
    }
}

impl Neg for Vec3 {
    type Output = Vec3;

    fn neg(self) -> Vec3 {
        Vec3(self.0.map(|c| -c))
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;

    fn mul(self, v: Vec3) -> Vec3 {
        Vec3(v.0.map(|c| self * c))
    }
}

/// Recorded measurement outcome on one wing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }

    pub fn from_char(c: char) -> Option<Sign> {
        match c {
            '+' => Some(Sign::Plus),
            '-' => Some(Sign::Minus),
            _ => None,
        }
    }
}
