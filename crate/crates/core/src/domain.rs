//! Input points and bounded box domains shared by every optimizer layer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid bounds at dimension {dim}: lower {lower} must be < upper {upper}")]
    InvalidBounds { dim: usize, lower: f64, upper: f64 },
    #[error("empty domain")]
    Empty,
}

/// A point in the optimization variable space. Coordinates are raw
/// per-problem units unless a caller explicitly works in normalized space.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPoint {
    coords: Vec<f64>,
}

impl InputPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, DomainError> {
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(DomainError::NonFinite(i));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl AsRef<[f64]> for InputPoint {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

/// Convenience constructor for literal points; panics on non-finite input.
pub fn point(coords: &[f64]) -> InputPoint {
    InputPoint::new(coords.to_vec()).expect("finite coordinates")
}

/// An axis-aligned box `[lower_d, upper_d]` per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, DomainError> {
        if lower.is_empty() {
            return Err(DomainError::Empty);
        }
        if lower.len() != upper.len() {
            return Err(DomainError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (d, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(DomainError::InvalidBounds {
                    dim: d,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit box `[0,1]^d`.
    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.len() == self.dim()
            && coords
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&lo, &hi))| x >= lo && x <= hi)
    }

    /// Map raw coordinates into the unit box.
    pub fn normalize(&self, coords: &[f64]) -> Vec<f64> {
        coords
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&x, (&lo, &hi))| (x - lo) / (hi - lo))
            .collect()
    }

    /// Map unit-box coordinates back to raw units.
    pub fn denormalize(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&u, (&lo, &hi))| lo + u * (hi - lo))
            .collect()
    }

    /// Per-dimension widths `upper_d - lower_d`.
    pub fn widths(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| hi - lo)
            .collect()
    }

    /// Euclidean length of the box diagonal in raw units.
    pub fn diagonal(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn clamp(&self, coords: &mut [f64]) {
        for (x, (&lo, &hi)) in coords.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(lo, hi);
        }
    }
}
