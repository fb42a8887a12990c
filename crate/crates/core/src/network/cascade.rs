use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{NetworkError, SMatrix, SINGULAR_CONNECTION_TOL};

/// Join port `port_a` of `a` to port `port_b` of `b`.
///
/// Both ports must share a reference impedance. The result has
/// `n_a + n_b - 2` ports: the remaining ports of `a` in order, then the
/// remaining ports of `b` in order.
pub fn cascade_pair(a: &SMatrix, b: &SMatrix, port_a: usize, port_b: usize) -> Result<SMatrix, NetworkError> {
    cascade_pair_tol(a, b, port_a, port_b, SINGULAR_CONNECTION_TOL)
}

pub(crate) fn cascade_pair_tol(
    a: &SMatrix,
    b: &SMatrix,
    p: usize,
    q: usize,
    singular_tol: f64,
) -> Result<SMatrix, NetworkError> {
    if a.grid() != b.grid() {
        return Err(NetworkError::GridMismatch);
    }
    let (na, nb) = (a.n_ports(), b.n_ports());
    if p >= na {
        return Err(NetworkError::NoSuchPort { port: p, n_ports: na });
    }
    if q >= nb {
        return Err(NetworkError::NoSuchPort { port: q, n_ports: nb });
    }
    let ea: Vec<usize> = (0..na).filter(|&i| i != p).collect();
    let eb: Vec<usize> = (0..nb).filter(|&i| i != q).collect();
    let n = ea.len() + eb.len();
    if n == 0 {
        return Err(NetworkError::BadChain("joining two one-port networks leaves no external ports".into()));
    }

    let one = Complex64::new(1.0, 0.0);
    let mut data = Vec::with_capacity(a.grid().len());
    for (k, frequency) in a.grid().iter().enumerate() {
        let am = a.at(k);
        let bm = b.at(k);
        let d = one - am[(p, p)] * bm[(q, q)];
        if d.norm() < singular_tol {
            return Err(NetworkError::SingularConnection { frequency, magnitude: d.norm() });
        }
        let inv_d = one / d;
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for (r, &i) in ea.iter().enumerate() {
            let a_ip = am[(i, p)] * inv_d;
            for (c, &j) in ea.iter().enumerate() {
                m[(r, c)] = am[(i, j)] + a_ip * bm[(q, q)] * am[(p, j)];
            }
            for (c, &j) in eb.iter().enumerate() {
                m[(r, ea.len() + c)] = a_ip * bm[(q, j)];
            }
        }
        for (r, &i) in eb.iter().enumerate() {
            let b_iq = bm[(i, q)] * inv_d;
            for (c, &j) in ea.iter().enumerate() {
                m[(ea.len() + r, c)] = b_iq * am[(p, j)];
            }
            for (c, &j) in eb.iter().enumerate() {
                m[(ea.len() + r, ea.len() + c)] = bm[(i, j)] + b_iq * am[(p, p)] * bm[(q, j)];
            }
        }
        data.push(m);
    }

    let labels =
        ea.iter().map(|&i| a.port_labels()[i].clone()).chain(eb.iter().map(|&j| b.port_labels()[j].clone())).collect();
    SMatrix::new(a.grid().clone(), data, labels)
}

/// One element of a chain: `input` joins the previous element's `output`.
#[derive(Clone, Debug)]
pub struct ChainLink {
    pub network: SMatrix,
    pub input: usize,
    pub output: usize,
}

impl ChainLink {
    pub fn new(network: SMatrix, input: usize, output: usize) -> Self {
        Self { network, input, output }
    }

    /// A two-port traversed from port 0 to port 1.
    pub fn through(network: SMatrix) -> Self {
        Self::new(network, 0, 1)
    }

    fn taps(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.network.n_ports()).filter(move |&p| p != self.input && p != self.output)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FoldOrder {
    #[default]
    LeftToRight,
    RightToLeft,
}

/// Reduce a chain left to right.
///
/// External port order of the result: the first element's input, then every
/// element's remaining (tap) ports in chain order, ascending within an
/// element, then the last element's output.
pub fn cascade_chain(links: &[ChainLink]) -> Result<SMatrix, NetworkError> {
    cascade_chain_with(links, FoldOrder::LeftToRight)
}

pub fn cascade_chain_with(links: &[ChainLink], order: FoldOrder) -> Result<SMatrix, NetworkError> {
    check_chain(links)?;
    let n = links.len();
    let ports_of = |i: usize| (0..links[i].network.n_ports()).map(move |p| (i, p));

    let (acc, ports) = match order {
        FoldOrder::LeftToRight => {
            let mut acc = links[0].network.clone();
            let mut ports: Vec<(usize, usize)> = ports_of(0).collect();
            for i in 1..n {
                let joined = (i - 1, links[i - 1].output);
                let pa = position(&ports, joined);
                acc = cascade_pair(&acc, &links[i].network, pa, links[i].input)?;
                ports.remove(pa);
                ports.extend(ports_of(i).filter(|&(_, p)| p != links[i].input));
            }
            (acc, ports)
        }
        FoldOrder::RightToLeft => {
            let mut acc = links[n - 1].network.clone();
            let mut ports: Vec<(usize, usize)> = ports_of(n - 1).collect();
            for i in (0..n - 1).rev() {
                let joined = (i + 1, links[i + 1].input);
                let pb = position(&ports, joined);
                acc = cascade_pair(&links[i].network, &acc, links[i].output, pb)?;
                ports.remove(pb);
                let mut merged: Vec<(usize, usize)> = ports_of(i).filter(|&(_, p)| p != links[i].output).collect();
                merged.extend(ports);
                ports = merged;
            }
            (acc, ports)
        }
    };

    let mut wanted = vec![(0, links[0].input)];
    for (i, link) in links.iter().enumerate() {
        wanted.extend(link.taps().map(|p| (i, p)));
    }
    wanted.push((n - 1, links[n - 1].output));
    let perm: Vec<usize> = wanted.iter().map(|&w| position(&ports, w)).collect();
    acc.permuted(&perm)
}

fn position(ports: &[(usize, usize)], wanted: (usize, usize)) -> usize {
    ports.iter().position(|&p| p == wanted).expect("chain port bookkeeping is consistent")
}

fn check_chain(links: &[ChainLink]) -> Result<(), NetworkError> {
    if links.is_empty() {
        return Err(NetworkError::BadChain("chain has no elements".into()));
    }
    for (i, link) in links.iter().enumerate() {
        let n = link.network.n_ports();
        if link.input >= n || link.output >= n {
            return Err(NetworkError::BadChain(format!(
                "element {i}: ports {}/{} out of range for a {n}-port",
                link.input, link.output
            )));
        }
        if link.input == link.output {
            return Err(NetworkError::BadChain(format!("element {i}: input and output are both port {}", link.input)));
        }
        if link.network.grid() != links[0].network.grid() {
            return Err(NetworkError::GridMismatch);
        }
    }
    Ok(())
}
