//! Direct solution of a connected network.
//!
//! Every element port carries an incident wave `a` and an outgoing wave `b`.
//! The unknowns are all of them; the equations are `b = S a` per element,
//! `a_p = b_q` and `a_q = b_p` per joint, and the prescribed incident wave
//! at each external port. One dense solve per frequency, no reduction
//! formulas, so it shares nothing with the cascade path.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{default_labels, NetworkError, SMatrix};

const PIVOT_RATIO: f64 = 1e-14;

/// `(element index, port index)`
pub type PortRef = (usize, usize);

/// Two element ports wired together.
pub type Joint = (PortRef, PortRef);

#[derive(Clone, Debug)]
pub struct ConnectionGraph {
    pub elements: Vec<SMatrix>,
    pub joints: Vec<Joint>,
    pub external_ports: Vec<PortRef>,
}

impl ConnectionGraph {
    pub fn new(elements: Vec<SMatrix>, joints: Vec<Joint>, external_ports: Vec<PortRef>) -> Result<Self, NetworkError> {
        let graph = Self { elements, joints, external_ports };
        graph.validate()?;
        Ok(graph)
    }

    /// Every element port must appear exactly once among joints and external ports.
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.elements.is_empty() {
            return Err(NetworkError::BadGraph("no elements".into()));
        }
        if self.external_ports.is_empty() {
            return Err(NetworkError::BadGraph("no external ports".into()));
        }
        let grid = self.elements[0].grid();
        if self.elements.iter().any(|e| e.grid() != grid) {
            return Err(NetworkError::GridMismatch);
        }
        let offsets = self.offsets();
        let mut uses = vec![0usize; offsets[self.elements.len()]];
        let endpoints = self.joints.iter().flat_map(|&(p, q)| [p, q]).chain(self.external_ports.iter().copied());
        for (element, port) in endpoints {
            let Some(e) = self.elements.get(element) else {
                return Err(NetworkError::BadGraph(format!("no element {element}")));
            };
            if port >= e.n_ports() {
                return Err(NetworkError::BadGraph(format!("element {element} has no port {port}")));
            }
            uses[offsets[element] + port] += 1;
        }
        for (element, e) in self.elements.iter().enumerate() {
            for port in 0..e.n_ports() {
                match uses[offsets[element] + port] {
                    1 => {}
                    0 => return Err(NetworkError::BadGraph(format!("port ({element}, {port}) is left unconnected"))),
                    _ => {
                        return Err(NetworkError::BadGraph(format!("port ({element}, {port}) is used more than once")))
                    }
                }
            }
        }
        Ok(())
    }

    fn offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.elements.len() + 1);
        let mut total = 0;
        offsets.push(0);
        for e in &self.elements {
            total += e.n_ports();
            offsets.push(total);
        }
        offsets
    }
}

/// Outgoing waves at every external port, per frequency, for a unit wave
/// incident on external port `excitation`.
pub fn brute_force_solve(graph: &ConnectionGraph, excitation: usize) -> Result<Vec<DVector<Complex64>>, NetworkError> {
    graph.validate()?;
    let n_ext = graph.external_ports.len();
    if excitation >= n_ext {
        return Err(NetworkError::NoSuchPort { port: excitation, n_ports: n_ext });
    }
    let offsets = graph.offsets();
    let total = offsets[graph.elements.len()];
    let grid = graph.elements[0].grid();
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let a_idx = |(e, p): PortRef| offsets[e] + p;
    let b_idx = |(e, p): PortRef| total + offsets[e] + p;

    let mut responses = Vec::with_capacity(grid.len());
    for (k, frequency) in grid.iter().enumerate() {
        let mut m = DMatrix::from_element(2 * total, 2 * total, zero);
        let mut rhs = DVector::from_element(2 * total, zero);
        let mut row = 0;
        for (e, element) in graph.elements.iter().enumerate() {
            let s = element.at(k);
            for i in 0..element.n_ports() {
                m[(row, b_idx((e, i)))] = one;
                for j in 0..element.n_ports() {
                    m[(row, a_idx((e, j)))] -= s[(i, j)];
                }
                row += 1;
            }
        }
        for &(p, q) in &graph.joints {
            m[(row, a_idx(p))] = one;
            m[(row, b_idx(q))] = -one;
            row += 1;
            m[(row, a_idx(q))] = one;
            m[(row, b_idx(p))] = -one;
            row += 1;
        }
        for (x, &port) in graph.external_ports.iter().enumerate() {
            m[(row, a_idx(port))] = one;
            if x == excitation {
                rhs[row] = one;
            }
            row += 1;
        }
        debug_assert_eq!(row, 2 * total);

        let lu = m.lu();
        let pivots = lu.u().diagonal().map(|z| z.norm());
        if pivots.min() <= PIVOT_RATIO * pivots.max() {
            return Err(NetworkError::SingularSystem { frequency });
        }
        let solution = lu
            .solve(&rhs)
            .filter(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
            .ok_or(NetworkError::SingularSystem { frequency })?;
        responses.push(DVector::from_iterator(n_ext, graph.external_ports.iter().map(|&port| solution[b_idx(port)])));
    }
    Ok(responses)
}

/// Full reduced S-matrix of a graph, one [`brute_force_solve`] per external port.
pub fn brute_force_smatrix(graph: &ConnectionGraph) -> Result<SMatrix, NetworkError> {
    let n_ext = graph.external_ports.len();
    let columns: Vec<Vec<DVector<Complex64>>> =
        (0..n_ext).map(|x| brute_force_solve(graph, x)).collect::<Result<_, _>>()?;
    let grid = graph.elements[0].grid();
    SMatrix::from_fn(grid, n_ext, |k, _| DMatrix::from_fn(n_ext, n_ext, |i, j| columns[j][k][i]))
        .and_then(|s| s.with_labels(default_labels(n_ext)))
}
