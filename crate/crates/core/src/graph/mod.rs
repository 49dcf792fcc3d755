//! Undirected simple graphs, Laplacians and their spectra.

mod generate;
mod io;

pub use generate::{
    erdos_renyi, erdos_renyi_connected, grid, pipeline, small_world, GeneratorParams, Topology,
};
pub use io::{read_edge_list, write_edge_list, parse_edge_list, format_edge_list};

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Undirected simple graph stored as a dense symmetric boolean adjacency.
///
/// Serializes as `{"nodes": n, "edges": [[i, j], ...]}` with `i < j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "EdgeList", into = "EdgeList")]
pub struct Graph {
    n: usize,
    adj: Vec<bool>,
}

impl Graph {
    /// Graph on `n` nodes with no edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            adj: vec![false; n * n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                g.set(i, j, true);
            }
        }
        g
    }

    /// Path graph `P_n`.
    pub fn path(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for i in 1..n {
            g.set(i - 1, i, true);
        }
        g
    }

    /// Star `K_{1,leaves}` with node 0 as the hub.
    pub fn star(leaves: usize) -> Self {
        let mut g = Graph::empty(leaves + 1);
        for i in 1..=leaves {
            g.set(0, i, true);
        }
        g
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(n);
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    /// Build from a 0/1 matrix; any non-zero off-diagonal entry is an edge.
    pub fn from_adjacency(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::param("adjacency matrix must be square"));
        }
        let n = m.nrows();
        let mut g = Graph::empty(n);
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(Error::param(format!("self-loop at node {i}")));
            }
            for j in (i + 1)..n {
                let (a, b) = (m[(i, j)] != 0.0, m[(j, i)] != 0.0);
                if a != b {
                    return Err(Error::param(format!("adjacency not symmetric at ({i}, {j})")));
                }
                g.set(i, j, a);
            }
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, on: bool) {
        debug_assert!(i != j);
        self.adj[i * self.n + j] = on;
        self.adj[j * self.n + i] = on;
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::param(format!(
                "edge ({i}, {j}) out of range for {} nodes",
                self.n
            )));
        }
        if i == j {
            return Err(Error::param(format!("self-loop at node {i}")));
        }
        self.set(i, j, true);
        Ok(())
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        if i != j && i < self.n && j < self.n {
            self.set(i, j, false);
        }
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&b| b).count() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i * self.n..(i + 1) * self.n].iter().filter(|&&b| b).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.has_edge(i, j))
    }

    /// Neighbour lists for every node, for sparse iteration in simulators.
    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        (0..self.n).map(|i| self.neighbors(i).collect()).collect()
    }

    /// Component label per node, labels assigned in order of first node.
    pub fn component_labels(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn component_count(&self) -> usize {
        self.component_labels().into_iter().max().map_or(0, |m| m + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.component_count() == 1
    }

    /// Adjacency as a dense 0/1 matrix.
    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| if self.has_edge(i, j) { 1.0 } else { 0.0 })
    }
}

#[derive(Serialize, Deserialize)]
struct EdgeList {
    nodes: usize,
    edges: Vec<[usize; 2]>,
}

impl From<Graph> for EdgeList {
    fn from(g: Graph) -> Self {
        EdgeList {
            nodes: g.node_count(),
            edges: g.edges().into_iter().map(|(i, j)| [i, j]).collect(),
        }
    }
}

impl TryFrom<EdgeList> for Graph {
    type Error = Error;

    fn try_from(e: EdgeList) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = e.edges.iter().map(|&[i, j]| (i, j)).collect();
        Graph::from_edges(e.nodes, &pairs)
    }
}

/// `L = D − A`. Entries are small integers, so row sums are exactly zero.
pub fn laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.node_count();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            g.degree(i) as f64
        } else if g.has_edge(i, j) {
            -1.0
        } else {
            0.0
        }
    })
}

/// Ascending Laplacian eigenvalues, repeated according to multiplicity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplacianSpectrum {
    pub eigenvalues: Vec<f64>,
}

impl LaplacianSpectrum {
    /// Tolerance below which an eigenvalue counts as zero.
    pub fn zero_tolerance(&self) -> f64 {
        let n = self.eigenvalues.len().max(1) as f64;
        1e-9 * n * self.lambda_max().max(1.0)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Second-smallest eigenvalue (algebraic connectivity).
    pub fn fiedler(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(0.0)
    }

    pub fn zero_count(&self) -> usize {
        linalg::null_count(&self.eigenvalues, self.zero_tolerance())
    }

    /// Distinct eigenvalues, merging values closer than `tol`.
    pub fn distinct(&self, tol: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &v in &self.eigenvalues {
            match out.last() {
                Some(&last) if (v - last).abs() <= tol => {}
                _ => out.push(v),
            }
        }
        out
    }
}

pub fn spectrum(g: &Graph) -> Result<LaplacianSpectrum> {
    let mut eigenvalues = linalg::symmetric_eigenvalues(&laplacian(g))?;
    // L is PSD; clamp round-off below zero so λ₁ reads as 0
    for v in &mut eigenvalues {
        if *v < 0.0 && *v > -1e-9 * (g.node_count().max(1) as f64) {
            *v = 0.0;
        }
    }
    Ok(LaplacianSpectrum { eigenvalues })
}

/// Largest Laplacian eigenvalue λ_N.
pub fn lambda_max(g: &Graph) -> Result<f64> {
    spectrum(g).map(|s| s.lambda_max())
}

/// Number of upper-triangular positions where the two adjacencies differ.
pub fn count_errors(estimated: &Graph, truth: &Graph) -> Result<usize> {
    if estimated.node_count() != truth.node_count() {
        return Err(Error::param(format!(
            "node count mismatch: {} vs {}",
            estimated.node_count(),
            truth.node_count()
        )));
    }
    let n = truth.node_count();
    let mut errors = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            if estimated.has_edge(i, j) != truth.has_edge(i, j) {
                errors += 1;
            }
        }
    }
    Ok(errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn laplacian_examples() {
        let k3 = laplacian(&Graph::complete(3));
        assert_eq!(
            k3,
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0])
        );
        assert_eq!(laplacian(&Graph::empty(3)), DMatrix::zeros(3, 3));
        let p3 = laplacian(&Graph::path(3));
        assert_eq!(
            p3,
            DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0])
        );
    }

    #[test]
    fn spectrum_examples() {
        let s = spectrum(&Graph::complete(3)).unwrap();
        assert_relative_eq!(s.eigenvalues[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.eigenvalues[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(s.eigenvalues[2], 3.0, epsilon = 1e-12);

        // star K_{1,3}: characteristic polynomial λ(λ−1)²(λ−4)
        let s = spectrum(&Graph::star(3)).unwrap();
        for (got, want) in s.eigenvalues.iter().zip([0.0, 1.0, 1.0, 4.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }

        let two = Graph::from_edges(5, &[(0, 1), (2, 3), (3, 4)]).unwrap();
        assert_eq!(spectrum(&two).unwrap().zero_count(), 2);

        assert_relative_eq!(lambda_max(&Graph::path(2)).unwrap(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(lambda_max(&Graph::complete(3)).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn count_errors_examples() {
        let k3 = Graph::complete(3);
        assert_eq!(count_errors(&k3, &k3).unwrap(), 0);
        assert_eq!(count_errors(&k3, &Graph::empty(3)).unwrap(), 3);
        let mut one = k3.clone();
        one.remove_edge(0, 2);
        assert_eq!(count_errors(&one, &k3).unwrap(), 1);
        assert!(count_errors(&k3, &Graph::empty(4)).is_err());
    }

    #[test]
    fn graph_basics() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.degrees(), vec![1, 2, 1, 0]);
        assert_eq!(g.component_count(), 2);
        assert!(!g.is_connected());
        assert!(Graph::from_edges(3, &[(1, 1)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 3)]).is_err());
        let rebuilt = Graph::from_adjacency(&g.adjacency_matrix()).unwrap();
        assert_eq!(rebuilt, g);
    }
}
