//! Seeded generators for the benchmark topologies.
//!
//! All generators draw from `ChaCha8Rng`, whose stream is fixed across
//! platforms and releases, so `(params, seed)` pins the graph bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

const MAX_CONNECT_ATTEMPTS: u64 = 100_000;

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("probability must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn check_nodes(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::param(format!("need at least 3 nodes, got {n}")));
    }
    Ok(())
}

/// `G(n, p)`: each unordered pair is an edge independently with probability `p`.
/// The result may be disconnected.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    check_nodes(n)?;
    check_probability(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                g.set(i, j, true);
            }
        }
    }
    Ok(g)
}

/// `G(n, p)` conditioned on connectivity: retries with `seed + 1, seed + 2, …`.
/// Returns the graph and the seed that produced it.
pub fn erdos_renyi_connected(n: usize, p: f64, seed: u64) -> Result<(Graph, u64)> {
    check_nodes(n)?;
    check_probability(p)?;
    for attempt in 0..MAX_CONNECT_ATTEMPTS {
        let s = seed.wrapping_add(attempt);
        let g = erdos_renyi(n, p, s)?;
        if g.is_connected() {
            return Ok((g, s));
        }
    }
    Err(Error::param(format!(
        "no connected G({n}, {p}) found in {MAX_CONNECT_ATTEMPTS} attempts"
    )))
}

/// Watts–Strogatz small world: a ring where every node links to `k/2`
/// neighbours per side, after which every lattice edge `(u, u+j)` is rewired
/// with probability `p` to a uniformly chosen node that is neither `u` nor a
/// current neighbour of `u`. The edge count stays `n·k/2`.
pub fn small_world(n: usize, k: usize, p: f64, seed: u64) -> Result<Graph> {
    check_nodes(n)?;
    check_probability(p)?;
    if k == 0 || !k.is_multiple_of(2) {
        return Err(Error::param(format!("ring degree k must be even and positive, got {k}")));
    }
    if k >= n {
        return Err(Error::param(format!("ring degree k = {k} must be below n = {n}")));
    }
    let mut g = Graph::empty(n);
    for u in 0..n {
        for j in 1..=k / 2 {
            g.set(u, (u + j) % n, true);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates = Vec::with_capacity(n);
    for j in 1..=k / 2 {
        for u in 0..n {
            if rng.random::<f64>() >= p {
                continue;
            }
            let v = (u + j) % n;
            candidates.clear();
            candidates.extend((0..n).filter(|&w| w != u && !g.has_edge(u, w)));
            if candidates.is_empty() {
                continue;
            }
            let w = candidates[rng.random_range(0..candidates.len())];
            g.set(u, v, false);
            g.set(u, w, true);
        }
    }
    Ok(g)
}

/// `rows × cols` lattice with 4-neighbourhood and no wraparound.
/// Node `(r, c)` has index `r·cols + c`.
pub fn grid(rows: usize, cols: usize) -> Result<Graph> {
    if rows < 2 || cols < 2 {
        return Err(Error::param(format!("grid needs at least 2x2, got {rows}x{cols}")));
    }
    let mut g = Graph::empty(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                g.set(i, i + 1, true);
            }
            if r + 1 < rows {
                g.set(i, i + cols, true);
            }
        }
    }
    Ok(g)
}

/// Banded "pipeline": node `i` links to `i+1 ..= i+k` (no wraparound).
///
/// With `target_edges`, the longest-range links are removed starting from the
/// tail of the pipeline (highest index first, then the next-shorter range)
/// until the count matches. Nearest-neighbour links are never removed, so the
/// pipeline stays connected. `pipeline(24, 2, Some(43))` drops `(21, 23)` and
/// `(20, 22)`.
pub fn pipeline(n: usize, k: usize, target_edges: Option<usize>) -> Result<Graph> {
    if k == 0 {
        return Err(Error::param("pipeline bandwidth k must be positive"));
    }
    if n < k + 1 || n < 2 {
        return Err(Error::param(format!("pipeline needs n >= k + 1, got n = {n}, k = {k}")));
    }
    let mut g = Graph::empty(n);
    for i in 0..n {
        for d in 1..=k {
            if i + d < n {
                g.set(i, i + d, true);
            }
        }
    }
    let Some(target) = target_edges else {
        return Ok(g);
    };
    let full = g.edge_count();
    if target > full || target < n - 1 {
        return Err(Error::param(format!(
            "pipeline target of {target} edges outside [{}, {full}]",
            n - 1
        )));
    }
    let mut excess = full - target;
    'trim: for d in (2..=k).rev() {
        for i in (0..n - d).rev() {
            if excess == 0 {
                break 'trim;
            }
            g.set(i, i + d, false);
            excess -= 1;
        }
    }
    debug_assert_eq!(g.edge_count(), target);
    Ok(g)
}

/// Topology family and its shape parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    ErdosRenyi {
        n: usize,
        p: f64,
        #[serde(default)]
        require_connected: bool,
    },
    SmallWorld {
        n: usize,
        k: usize,
        p: f64,
    },
    Pipeline {
        n: usize,
        k: usize,
        #[serde(default)]
        target_edges: Option<usize>,
    },
    Grid {
        rows: usize,
        cols: usize,
    },
}

impl Topology {
    pub fn node_count(&self) -> usize {
        match *self {
            Topology::ErdosRenyi { n, .. }
            | Topology::SmallWorld { n, .. }
            | Topology::Pipeline { n, .. } => n,
            Topology::Grid { rows, cols } => rows * cols,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Topology::ErdosRenyi { n, p, .. } => format!("ER({n}, {p})"),
            Topology::SmallWorld { n, k, p } => format!("SW({n}, {k}, {p})"),
            Topology::Pipeline { n, k, .. } => format!("pipeline({n}, {k})"),
            Topology::Grid { rows, cols } => format!("grid({rows}x{cols})"),
        }
    }
}

/// Topology plus seed; `generate` is deterministic in both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub topology: Topology,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorParams {
    pub fn new(topology: Topology, seed: u64) -> Self {
        GeneratorParams { topology, seed }
    }

    pub fn generate(&self) -> Result<Graph> {
        match self.topology {
            Topology::ErdosRenyi {
                n,
                p,
                require_connected,
            } => {
                if require_connected {
                    erdos_renyi_connected(n, p, self.seed).map(|(g, _)| g)
                } else {
                    erdos_renyi(n, p, self.seed)
                }
            }
            Topology::SmallWorld { n, k, p } => small_world(n, k, p, self.seed),
            Topology::Pipeline { n, k, target_edges } => pipeline(n, k, target_edges),
            Topology::Grid { rows, cols } => grid(rows, cols),
        }
    }
}
