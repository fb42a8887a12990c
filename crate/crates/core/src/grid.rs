//! Frequency grids shared by every S-matrix and sweep.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("frequency grid is empty")]
    Empty,
    #[error("frequency point {index} ({value} Hz) is not positive and finite")]
    NonPositive { index: usize, value: f64 },
    #[error("frequency point {index} ({value} Hz) does not exceed its predecessor")]
    NotIncreasing { index: usize, value: f64 },
    #[error("grid needs at least 2 points to span {start}..{stop} Hz, got {points}")]
    BadSpan { start: f64, stop: f64, points: usize },
}

/// Strictly increasing list of positive frequencies in hertz.
///
/// Cloning is cheap; the points are shared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyGrid {
    points: Arc<[f64]>,
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>) -> Result<Self, GridError> {
        if points.is_empty() {
            return Err(GridError::Empty);
        }
        for (index, &value) in points.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(GridError::NonPositive { index, value });
            }
            if index > 0 && value <= points[index - 1] {
                return Err(GridError::NotIncreasing { index, value });
            }
        }
        Ok(Self { points: points.into() })
    }

    /// Single-frequency grid.
    pub fn single(frequency: f64) -> Result<Self, GridError> {
        Self::new(vec![frequency])
    }

    /// `points` evenly spaced values from `start` to `stop` inclusive.
    pub fn linspace(start: f64, stop: f64, points: usize) -> Result<Self, GridError> {
        if points < 2 || !(stop > start) {
            return Err(GridError::BadSpan { start, stop, points });
        }
        let step = (stop - start) / (points - 1) as f64;
        let values = (0..points).map(|i| if i + 1 == points { stop } else { start + step * i as f64 }).collect();
        Self::new(values)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().copied()
    }
}

impl TryFrom<Vec<f64>> for FrequencyGrid {
    type Error = GridError;

    fn try_from(points: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}

impl From<FrequencyGrid> for Vec<f64> {
    fn from(grid: FrequencyGrid) -> Self {
        grid.points.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unordered_and_nonpositive_points() {
        assert_eq!(FrequencyGrid::new(vec![]), Err(GridError::Empty));
        assert!(matches!(FrequencyGrid::new(vec![1.0, 1.0]), Err(GridError::NotIncreasing { index: 1, .. })));
        assert!(matches!(FrequencyGrid::new(vec![0.0, 1.0]), Err(GridError::NonPositive { index: 0, .. })));
        assert!(FrequencyGrid::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn linspace_hits_both_endpoints() {
        let grid = FrequencyGrid::linspace(50e9, 55e9, 11).unwrap();
        assert_eq!(grid.len(), 11);
        assert_eq!(grid.first(), 50e9);
        assert_eq!(grid.last(), 55e9);
        assert!((grid.points()[5] - 52.5e9).abs() < 1.0);
        assert!(FrequencyGrid::linspace(1.0, 2.0, 1).is_err());
    }
}
