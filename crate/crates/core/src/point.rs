use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the ambient space: actions, minimizers and gradients all live here.
///
/// Coordinates are finite by construction; the dimension is fixed when the
/// point is built and checked against by every consumer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point {
    v: DVector<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point must have dimension >= 1"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        Ok(Point {
            v: DVector::from_vec(coords),
        })
    }

    pub fn from_vector(v: DVector<f64>) -> Result<Self> {
        Self::new(v.iter().copied().collect())
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn coords(&self) -> &[f64] {
        self.v.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.v
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.v.dot(&other.v)
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (&self.v - &other.v).norm()
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point {
            v: &self.v - &other.v,
        }
    }

    pub fn add(&self, other: &Point) -> Point {
        Point {
            v: &self.v + &other.v,
        }
    }

    pub fn scale(&self, s: f64) -> Point {
        Point { v: &self.v * s }
    }

    /// `self + s * dir`
    pub fn offset_by(&self, dir: &Point, s: f64) -> Point {
        Point {
            v: &self.v + &dir.v * s,
        }
    }

    /// `self + alpha * (target - self)`
    pub fn mix_towards(&self, target: &Point, alpha: f64) -> Point {
        Point {
            v: &self.v + (&target.v - &self.v) * alpha,
        }
    }

    /// Bitwise equality of coordinates; this is the identity used when
    /// counting distinct gradient query points.
    pub fn bits_eq(&self, other: &Point) -> bool {
        self.dim() == other.dim()
            && self
                .coords()
                .iter()
                .zip(other.coords())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Point::new(coords)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.coords().to_vec()
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(Point::new(vec![]).is_err());
        assert!(Point::new(vec![1.0, f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn basic_arithmetic() {
        let a = Point::new(vec![1.0, 2.0]).unwrap();
        let b = Point::new(vec![4.0, 6.0]).unwrap();
        assert_eq!(a.dist(&b), 5.0);
        assert_eq!(a.mix_towards(&b, 0.5).coords(), &[2.5, 4.0]);
        assert_eq!(a.offset_by(&b, 2.0).coords(), &[9.0, 14.0]);
    }

    #[test]
    fn serde_round_trip() {
        let p = Point::new(vec![0.5, -1.25]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[0.5,-1.25]");
        let q: Point = serde_json::from_str(&s).unwrap();
        assert!(p.bits_eq(&q));
    }
}
