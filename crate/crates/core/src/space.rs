//! Euclidean space primitives.
//!
//! Everything downstream runs in finite-dimensional `R^d` with the standard
//! inner product, so the duality pairing degenerates to the dot product and
//! the retraction onto a closed convex set is the metric projection. Vectors
//! are validated once at the boundary (finite coordinates, `1 <= d <= 64`);
//! the arithmetic helpers assume matching dimensions and are used internally
//! after that validation.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 64;

/// A point of `R^d`.
///
/// Serializes as a plain JSON array of numbers in all config and trace
/// files.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    coords: Vec<f64>,
}

impl Vector {
    /// Validates and wraps raw coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidVector("dimension must be at least 1".into()));
        }
        if coords.len() > MAX_DIM {
            return Err(Error::InvalidVector(format!(
                "dimension {} exceeds the supported maximum {MAX_DIM}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidVector(
                "all coordinates must be finite".into(),
            ));
        }
        Ok(Self { coords })
    }

    /// The zero vector of `R^d`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM, "dimension out of range");
        Self {
            coords: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Checks that `other` lives in the same space.
    pub fn check_dim(&self, other: &Vector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector {
            coords: self.coords.iter().map(|a| a * s).collect(),
        }
    }

    /// `a * x + b * y` with a fixed evaluation order, so repeated runs are
    /// bit-reproducible.
    pub fn combine(a: f64, x: &Vector, b: f64, y: &Vector) -> Vector {
        debug_assert_eq!(x.dim(), y.dim());
        Vector {
            coords: x
                .coords
                .iter()
                .zip(&y.coords)
                .map(|(xi, yi)| a * xi + b * yi)
                .collect(),
        }
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        self.sub(other).norm()
    }

    pub fn norm(&self) -> f64 {
        norm(self)
    }
}

impl Serialize for Vector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(deserializer)?;
        Vector::new(coords).map_err(serde::de::Error::custom)
    }
}

/// Inner product `<x, y> = sum_i x_i y_i`.
pub fn inner(x: &Vector, y: &Vector) -> Result<f64> {
    x.check_dim(y)?;
    Ok(inner_unchecked(x, y))
}

pub(crate) fn inner_unchecked(x: &Vector, y: &Vector) -> f64 {
    x.coords
        .iter()
        .zip(&y.coords)
        .map(|(a, b)| a * b)
        .sum()
}

/// Euclidean norm `sqrt(<x, x>)`.
pub fn norm(x: &Vector) -> f64 {
    inner_unchecked(x, x).sqrt()
}

/// Slack in the subdifferential inequality
/// `||x + y||^2 <= ||x||^2 + 2 <y, x + y>`.
///
/// Returns `||x||^2 + 2 <y, x + y> - ||x + y||^2`, which is nonnegative for
/// every pair; in this inner-product setting it equals `||y||^2` exactly,
/// which the tests pin down.
pub fn norm_square_inequality_gap(x: &Vector, y: &Vector) -> Result<f64> {
    x.check_dim(y)?;
    let sum = x.add(y);
    Ok(inner_unchecked(x, x) + 2.0 * inner_unchecked(y, &sum) - inner_unchecked(&sum, &sum))
}
