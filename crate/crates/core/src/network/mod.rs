//! Frequency-gridded multiport scattering matrices.
//!
//! [`cascade_pair`] joins one port of each of two networks (the classic
//! single-connection reduction), [`cascade_chain`] folds an ordered chain
//! of networks, and [`brute_force_solve`] solves an arbitrary connection
//! graph directly as an independent check on both.

mod cascade;
mod oracle;
pub mod touchstone;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::grid::FrequencyGrid;

pub use cascade::{cascade_chain, cascade_chain_with, cascade_pair, ChainLink, FoldOrder};
pub use oracle::{brute_force_smatrix, brute_force_solve, ConnectionGraph, Joint, PortRef};

/// Default tolerance on `|1 - A_pp B_qq|` below which a connection is treated as resonant.
pub const SINGULAR_CONNECTION_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("expected one matrix per grid point ({expected}), got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("matrix at grid index {index} is {rows}x{cols}, expected {n}x{n}")]
    BadShape { index: usize, rows: usize, cols: usize, n: usize },
    #[error("non-finite S-parameter at {frequency} Hz")]
    NonFinite { frequency: f64 },
    #[error("{got} port labels for a {n}-port network")]
    LabelMismatch { n: usize, got: usize },
    #[error("networks are defined on different frequency grids")]
    GridMismatch,
    #[error("port {port} does not exist on a {n_ports}-port network")]
    NoSuchPort { port: usize, n_ports: usize },
    #[error("connection is resonant at {frequency} Hz (|1 - A_pp B_qq| = {magnitude:e})")]
    SingularConnection { frequency: f64, magnitude: f64 },
    #[error("network graph linear system is singular at {frequency} Hz")]
    SingularSystem { frequency: f64 },
    #[error("invalid connection graph: {0}")]
    BadGraph(String),
    #[error("invalid chain: {0}")]
    BadChain(String),
}

/// Scattering matrix of an N-port sampled on a frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SMatrix {
    grid: FrequencyGrid,
    n_ports: usize,
    data: Vec<DMatrix<Complex64>>,
    port_labels: Vec<String>,
}

impl SMatrix {
    pub fn new(
        grid: FrequencyGrid,
        data: Vec<DMatrix<Complex64>>,
        port_labels: Vec<String>,
    ) -> Result<Self, NetworkError> {
        if data.len() != grid.len() {
            return Err(NetworkError::LengthMismatch { expected: grid.len(), got: data.len() });
        }
        let n = data[0].nrows();
        for (index, m) in data.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n || n == 0 {
                return Err(NetworkError::BadShape { index, rows: m.nrows(), cols: m.ncols(), n });
            }
            if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(NetworkError::NonFinite { frequency: grid.points()[index] });
            }
        }
        if port_labels.len() != n {
            return Err(NetworkError::LabelMismatch { n, got: port_labels.len() });
        }
        Ok(Self { grid, n_ports: n, data, port_labels })
    }

    /// Build from a per-frequency closure; ports are labelled `p1..pN`.
    pub fn from_fn<F>(grid: &FrequencyGrid, n_ports: usize, mut f: F) -> Result<Self, NetworkError>
    where
        F: FnMut(usize, f64) -> DMatrix<Complex64>,
    {
        let data = grid.iter().enumerate().map(|(k, freq)| f(k, freq)).collect();
        Self::new(grid.clone(), data, default_labels(n_ports))
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn port_labels(&self) -> &[String] {
        &self.port_labels
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, NetworkError> {
        if labels.len() != self.n_ports {
            return Err(NetworkError::LabelMismatch { n: self.n_ports, got: labels.len() });
        }
        self.port_labels = labels;
        Ok(self)
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.data
    }

    /// Matrix at grid index `k`.
    pub fn at(&self, k: usize) -> &DMatrix<Complex64> {
        &self.data[k]
    }

    pub fn get(&self, k: usize, row: usize, col: usize) -> Complex64 {
        self.data[k][(row, col)]
    }

    /// `S[row, col]` across the grid.
    pub fn trace(&self, row: usize, col: usize) -> Vec<Complex64> {
        self.data.iter().map(|m| m[(row, col)]).collect()
    }

    /// `|S[row, col]|^2` across the grid.
    pub fn power(&self, row: usize, col: usize) -> Vec<f64> {
        self.data.iter().map(|m| m[(row, col)].norm_sqr()).collect()
    }

    /// Reorder ports so that new port `i` is old port `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self, NetworkError> {
        let n = self.n_ports;
        let mut seen = vec![false; n];
        if order.len() != n {
            return Err(NetworkError::BadChain(format!("permutation of length {} for {n} ports", order.len())));
        }
        for &p in order {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(NetworkError::BadChain(format!("{order:?} is not a permutation")));
            }
        }
        let data = self.data.iter().map(|m| DMatrix::from_fn(n, n, |i, j| m[(order[i], order[j])])).collect();
        let labels = order.iter().map(|&p| self.port_labels[p].clone()).collect();
        Ok(Self { grid: self.grid.clone(), n_ports: n, data, port_labels: labels })
    }

    /// Largest entrywise difference to another network on the same grid.
    pub fn max_abs_diff(&self, other: &SMatrix) -> Result<f64, NetworkError> {
        if self.grid != other.grid {
            return Err(NetworkError::GridMismatch);
        }
        if self.n_ports != other.n_ports {
            return Err(NetworkError::BadShape { index: 0, rows: other.n_ports, cols: other.n_ports, n: self.n_ports });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max))
    }
}

pub(crate) fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("p{i}")).collect()
}

/// Physical property checked by [`validate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Property {
    /// `S = S^T`
    Reciprocal,
    /// largest singular value at most one
    Passive,
    /// `S^H S = I`
    Lossless,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub property: Property,
    pub tolerance: f64,
    pub passed: bool,
    /// Deviation at every grid point. For [`Property::Passive`] this is
    /// `sigma_max - 1`, which is negative for strictly passive points.
    pub deviations: Vec<f64>,
    pub worst_index: usize,
    pub worst_frequency: f64,
    pub worst_deviation: f64,
}

/// Check a physical property at every grid point. Never fails; the report says how badly.
pub fn validate(s: &SMatrix, property: Property, tol: f64) -> ValidationReport {
    let deviations: Vec<f64> = s
        .matrices()
        .iter()
        .map(|m| match property {
            Property::Reciprocal => (m - m.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max),
            Property::Passive => max_singular_value(m) - 1.0,
            Property::Lossless => {
                let n = m.nrows();
                (m.adjoint() * m - DMatrix::<Complex64>::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max)
            }
        })
        .collect();
    let (worst_index, worst_deviation) = deviations
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, d)| if d > best.1 { (i, d) } else { best });
    ValidationReport {
        property,
        tolerance: tol,
        passed: worst_deviation <= tol,
        worst_frequency: s.grid().points()[worst_index],
        deviations,
        worst_index,
        worst_deviation,
    }
}

fn max_singular_value(m: &DMatrix<Complex64>) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}
