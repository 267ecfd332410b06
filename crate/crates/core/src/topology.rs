//! Communication graphs and the mixing matrices agents average with.
//!
//! Intra-network weights are Metropolis–Hastings weights on undirected graphs,
//! which are symmetric and therefore doubly stochastic with a positive
//! diagonal. Periodic switching between edge subsets of a connected graph
//! gives schedules whose union over any `B` consecutive rounds is connected.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_EDGE_PROBABILITY: f64 = 0.7;
const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Cycle,
    Random,
    Complete,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Cycle => "cycle",
            GraphKind::Random => "random",
            GraphKind::Complete => "complete",
        }
    }
}

impl std::str::FromStr for GraphKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cycle" => Ok(GraphKind::Cycle),
            "random" => Ok(GraphKind::Random),
            "complete" => Ok(GraphKind::Complete),
            other => Err(invalid(format!("unknown graph kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub kind: GraphKind,
    pub node_count: usize,
    pub edge_probability: f64,
    pub seed: u64,
}

impl GraphSpec {
    pub fn new(kind: GraphKind, node_count: usize, seed: u64) -> Self {
        GraphSpec { kind, node_count, edge_probability: DEFAULT_EDGE_PROBABILITY, seed }
    }
}

/// Undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    /// Sorted, each pair stored once as `(i, j)` with `i < j`.
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(invalid("graph needs at least one node"));
        }
        let mut canonical = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(invalid(format!("edge ({a}, {b}) references a missing node")));
            }
            if a == b {
                return Err(invalid(format!("self-loop at node {a}")));
            }
            canonical.push((a.min(b), a.max(b)));
        }
        canonical.sort_unstable();
        canonical.dedup();
        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b) in &canonical {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Graph { node_count, edges: canonical, adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Hop distances from `src`; `None` for unreachable nodes.
    pub fn distances_from(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &w in &self.adjacency[u] {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.distances_from(0).iter().all(Option::is_some)
    }

    /// Eccentricity of every node; only meaningful on connected graphs.
    pub fn eccentricities(&self) -> Vec<usize> {
        (0..self.node_count)
            .map(|i| self.distances_from(i).into_iter().map(|d| d.unwrap_or(usize::MAX)).max().unwrap_or(0))
            .collect()
    }

    /// Splits the edge set round-robin into `parts` subgraphs on the same
    /// node set. Their union is `self`.
    pub fn split_edges(&self, parts: usize) -> Result<Vec<Graph>> {
        if parts == 0 {
            return Err(invalid("cannot split into zero parts"));
        }
        let mut buckets = vec![Vec::new(); parts];
        for (k, &e) in self.edges.iter().enumerate() {
            buckets[k % parts].push(e);
        }
        buckets.iter().map(|b| Graph::from_edges(self.node_count, b)).collect()
    }

    /// Structured text: node list followed by edge list.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {}", self.node_count);
        let ids: Vec<String> = (0..self.node_count).map(|i| i.to_string()).collect();
        let _ = writeln!(out, "{}", ids.join(" "));
        let _ = writeln!(out, "edges {}", self.edges.len());
        for (a, b) in &self.edges {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }
}

pub fn build_graph(spec: &GraphSpec) -> Result<Graph> {
    let n = spec.node_count;
    match spec.kind {
        GraphKind::Cycle => {
            if n < 2 {
                return Err(invalid("a cycle needs at least two nodes"));
            }
            let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
            Graph::from_edges(n, &edges)
        }
        GraphKind::Complete => {
            let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
            Graph::from_edges(n, &edges)
        }
        GraphKind::Random => {
            let p = spec.edge_probability;
            if !(p > 0.0 && p <= 1.0) {
                return Err(invalid(format!("edge probability {p} outside (0, 1]")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            for _ in 0..MAX_RESAMPLES {
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.gen::<f64>() < p {
                            edges.push((i, j));
                        }
                    }
                }
                let g = Graph::from_edges(n, &edges)?;
                if g.is_connected() {
                    return Ok(g);
                }
            }
            Err(Error::Construction(format!(
                "random graph with n={n}, p={p} stayed disconnected after {MAX_RESAMPLES} draws"
            )))
        }
    }
}

/// Doubly stochastic intra-network weights with a positive floor `eta`
/// on every nonzero entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingMatrix {
    entries: Matrix,
    eta_floor: f64,
}

impl MixingMatrix {
    /// Validates the invariants and sets the floor to the smallest positive
    /// entry, capped at ½ so that it lies in `(0, 1)` even for a single node.
    pub fn new(entries: Matrix) -> Result<Self> {
        let n = entries.rows();
        if n == 0 || entries.cols() != n {
            return Err(invalid("mixing matrix must be square and non-empty"));
        }
        if entries.as_slice().iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(invalid("mixing matrix has a negative or non-finite entry"));
        }
        for (r, c) in entries.row_sums().iter().zip(entries.col_sums()) {
            if (r - 1.0).abs() > 1e-12 || (c - 1.0).abs() > 1e-12 {
                return Err(invalid("mixing matrix is not doubly stochastic"));
            }
        }
        if (0..n).any(|i| entries[(i, i)] <= 0.0) {
            return Err(invalid("mixing matrix needs a positive diagonal"));
        }
        let eta_floor = entries.as_slice().iter().cloned().filter(|&w| w > 0.0).fold(0.5, f64::min);
        Ok(MixingMatrix { entries, eta_floor })
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn eta_floor(&self) -> f64 {
        self.eta_floor
    }

    pub fn size(&self) -> usize {
        self.entries.rows()
    }

    pub fn dump(&self) -> String {
        dump_matrix("mixing", &self.entries)
    }
}

/// `w_ij = 1 / (1 + max(deg_i, deg_j))` on edges, remaining mass on the diagonal.
pub fn metropolis_weights(graph: &Graph) -> MixingMatrix {
    let n = graph.node_count();
    let mut w = Matrix::zeros(n, n);
    for &(i, j) in graph.edges() {
        let v = 1.0 / (1 + graph.degree(i).max(graph.degree(j))) as f64;
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    for i in 0..n {
        let off: f64 = graph.neighbors(i).iter().map(|&j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    MixingMatrix::new(w).expect("Metropolis weights are doubly stochastic with positive diagonal")
}

/// Row-stochastic weights with which each agent of the receiving network
/// averages the sending network. Shape `n_to × n_from`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteWeights {
    entries: Matrix,
}

impl BipartiteWeights {
    pub fn new(entries: Matrix) -> Result<Self> {
        if entries.as_slice().iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(invalid("bipartite weights must be nonnegative and finite"));
        }
        if entries.row_sums().iter().any(|r| (r - 1.0).abs() > 1e-12) {
            return Err(invalid("bipartite weights must have unit row sums"));
        }
        Ok(BipartiteWeights { entries })
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn receivers(&self) -> usize {
        self.entries.rows()
    }

    pub fn senders(&self) -> usize {
        self.entries.cols()
    }

    pub fn dump(&self) -> String {
        dump_matrix("bipartite", &self.entries)
    }
}

pub fn uniform_bipartite(n_from: usize, n_to: usize) -> Result<BipartiteWeights> {
    if n_from == 0 || n_to == 0 {
        return Err(invalid("bipartite sizes must be positive"));
    }
    BipartiteWeights::new(Matrix::filled(n_to, n_from, 1.0 / n_from as f64))
}

/// Agent `i` of one network listens only to agent `i` of the other.
pub fn identity_bipartite(n: usize) -> Result<BipartiteWeights> {
    if n == 0 {
        return Err(invalid("bipartite sizes must be positive"));
    }
    BipartiteWeights::new(Matrix::identity(n))
}

/// Time-indexed intra-network weights, cycling through a fixed list:
/// `W(t) = matrices[t mod period]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingSchedule {
    matrices: Vec<MixingMatrix>,
}

impl MixingSchedule {
    pub fn fixed(w: MixingMatrix) -> Self {
        MixingSchedule { matrices: vec![w] }
    }

    pub fn periodic(matrices: Vec<MixingMatrix>) -> Result<Self> {
        let first = matrices.first().ok_or_else(|| invalid("empty mixing schedule"))?;
        if matrices.iter().any(|m| m.size() != first.size()) {
            return Err(invalid("all matrices of a schedule must have the same size"));
        }
        Ok(MixingSchedule { matrices })
    }

    /// Round-robin over Metropolis weights of the `period` edge subsets of
    /// `graph`. The union over any `period` consecutive rounds is `graph`.
    pub fn switching(graph: &Graph, period: usize) -> Result<Self> {
        let parts = graph.split_edges(period)?;
        MixingSchedule::periodic(parts.iter().map(metropolis_weights).collect())
    }

    pub fn at(&self, t: usize) -> &MixingMatrix {
        &self.matrices[t % self.matrices.len()]
    }

    pub fn period(&self) -> usize {
        self.matrices.len()
    }

    pub fn size(&self) -> usize {
        self.matrices[0].size()
    }

    /// Smallest floor over the whole schedule.
    pub fn eta_floor(&self) -> f64 {
        self.matrices.iter().map(MixingMatrix::eta_floor).fold(1.0, f64::min)
    }

    pub fn matrices(&self) -> &[MixingMatrix] {
        &self.matrices
    }
}

/// `Φ(t, s) = W(t) W(t−1) ⋯ W(s)`.
pub fn transition_matrix(schedule: &MixingSchedule, t: usize, s: usize) -> Result<Matrix> {
    if t < s {
        return Err(invalid(format!("transition matrix needs t >= s, got t={t}, s={s}")));
    }
    let mut phi = schedule.at(s).entries().clone();
    for r in s + 1..=t {
        phi = schedule.at(r).entries().matmul(&phi)?;
    }
    Ok(phi)
}

/// Geometric-decay constants of the transition matrices:
/// `|Φ(t,s)_ij − 1/n| ≤ gamma · theta^(t−s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayConstants {
    pub gamma: f64,
    pub theta: f64,
}

pub fn decay_constants(n: usize, eta: f64, period: usize) -> Result<DecayConstants> {
    if n == 0 || period == 0 {
        return Err(invalid("decay constants need n >= 1 and B >= 1"));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid(format!("weight floor {eta} outside (0, 1)")));
    }
    let base = 1.0 - eta / (4.0 * (n * n) as f64);
    Ok(DecayConstants { gamma: base.powi(-2), theta: base.powf(1.0 / period as f64) })
}

pub(crate) fn dump_matrix(label: &str, m: &Matrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{label} {} {}", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn named_graphs() {
        let k3 = build_graph(&GraphSpec::new(GraphKind::Complete, 3, 0)).unwrap();
        assert_eq!(k3.edges(), &[(0, 1), (0, 2), (1, 2)]);
        let c4 = build_graph(&GraphSpec::new(GraphKind::Cycle, 4, 0)).unwrap();
        assert_eq!(c4.edges(), &[(0, 1), (0, 3), (1, 2), (2, 3)]);
        assert!((0..4).all(|i| c4.degree(i) == 2));
        assert!(build_graph(&GraphSpec::new(GraphKind::Cycle, 1, 0)).is_err());
        let k1 = build_graph(&GraphSpec::new(GraphKind::Complete, 1, 0)).unwrap();
        assert!(k1.edges().is_empty() && k1.is_connected());
    }

    #[test]
    fn random_graph_is_seeded_and_connected() {
        let spec = GraphSpec::new(GraphKind::Random, 12, 42);
        let a = build_graph(&spec).unwrap();
        let b = build_graph(&spec).unwrap();
        assert_eq!(a, b);
        assert!(a.is_connected());
        let other = build_graph(&GraphSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a.edges(), other.edges());
    }

    #[test]
    fn random_graph_gives_up() {
        let spec = GraphSpec { kind: GraphKind::Random, node_count: 40, edge_probability: 1e-6, seed: 1 };
        assert!(matches!(build_graph(&spec), Err(Error::Construction(_))));
        let bad = GraphSpec { edge_probability: 0.0, ..spec };
        assert!(build_graph(&bad).is_err());
    }

    #[test]
    fn metropolis_examples() {
        let k3 = metropolis_weights(&build_graph(&GraphSpec::new(GraphKind::Complete, 3, 0)).unwrap());
        for v in k3.entries().as_slice() {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }
        let c4 = metropolis_weights(&build_graph(&GraphSpec::new(GraphKind::Cycle, 4, 0)).unwrap());
        let w = c4.entries();
        for i in 0..4 {
            assert_abs_diff_eq!(w[(i, i)], 1.0 / 3.0, epsilon = 1e-15);
            assert_abs_diff_eq!(w[(i, (i + 1) % 4)], 1.0 / 3.0, epsilon = 1e-15);
            assert_eq!(w[(i, (i + 2) % 4)], 0.0);
        }
        let edge = metropolis_weights(&Graph::from_edges(2, &[(0, 1)]).unwrap());
        assert_eq!(edge.entries().as_slice(), &[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(edge.eta_floor(), 0.5);
    }

    #[test]
    fn metropolis_invariants_on_random_graphs() {
        for seed in 0..50 {
            for n in [2, 5, 12] {
                let g = build_graph(&GraphSpec::new(GraphKind::Random, n, seed)).unwrap();
                let w = metropolis_weights(&g);
                for (r, c) in w.entries().row_sums().iter().zip(w.entries().col_sums()) {
                    assert!((r - 1.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12);
                }
                for &v in w.entries().as_slice() {
                    assert!(v == 0.0 || v >= w.eta_floor());
                }
                assert!(w.eta_floor() > 0.0 && w.eta_floor() < 1.0);
            }
        }
    }

    #[test]
    fn bipartite_examples() {
        let b = uniform_bipartite(2, 3).unwrap();
        assert_eq!((b.receivers(), b.senders()), (3, 2));
        assert!(b.entries().as_slice().iter().all(|&v| v == 0.5));
        let one = uniform_bipartite(1, 5).unwrap();
        assert!(one.entries().as_slice().iter().all(|&v| v == 1.0));
        let b12 = uniform_bipartite(12, 12).unwrap();
        assert!(b12.entries().as_slice().iter().all(|&v| v == 1.0 / 12.0));
        assert!(uniform_bipartite(0, 3).is_err());
        assert!(BipartiteWeights::new(Matrix::filled(2, 2, 0.4)).is_err());
    }

    #[test]
    fn transition_examples() {
        let c4 = metropolis_weights(&build_graph(&GraphSpec::new(GraphKind::Cycle, 4, 0)).unwrap());
        let sched = MixingSchedule::fixed(c4.clone());
        assert_eq!(transition_matrix(&sched, 3, 3).unwrap(), *c4.entries());
        // W² by direct summation.
        let w = c4.entries();
        let phi = transition_matrix(&sched, 4, 3).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let direct: f64 = (0..4).map(|k| w[(i, k)] * w[(k, j)]).sum();
                assert_abs_diff_eq!(phi[(i, j)], direct, epsilon = 1e-15);
            }
        }
        assert!(transition_matrix(&sched, 2, 3).is_err());

        let uniform = MixingMatrix::new(Matrix::filled(4, 4, 0.25)).unwrap();
        let phi = transition_matrix(&MixingSchedule::fixed(uniform), 9, 2).unwrap();
        assert!(phi.as_slice().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn decay_examples() {
        let d = decay_constants(1, 0.5, 1).unwrap();
        assert_abs_diff_eq!(d.gamma, 64.0 / 49.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.theta, 7.0 / 8.0, epsilon = 1e-15);
        let d = decay_constants(12, 1.0 / 3.0, 1).unwrap();
        let base = 1.0 - 1.0 / 1728.0;
        assert_abs_diff_eq!(d.gamma, 1.0 / (base * base), epsilon = 1e-13);
        assert_abs_diff_eq!(d.theta, base, epsilon = 1e-15);
        let d = decay_constants(2, 0.25, 1).unwrap();
        assert_abs_diff_eq!(d.gamma, (63.0f64 / 64.0).powi(-2), epsilon = 1e-15);
        assert_abs_diff_eq!(d.theta, 63.0 / 64.0, epsilon = 1e-15);
        assert!(decay_constants(2, 1.0, 1).is_err());
        assert!(decay_constants(2, 0.5, 0).is_err());
    }

    #[test]
    fn decay_monotonicity() {
        for n in 1..10 {
            for b in 1..5 {
                let d = decay_constants(n, 0.3, b).unwrap();
                assert!(decay_constants(n, 0.3, b + 1).unwrap().theta > d.theta);
                assert!(decay_constants(n + 1, 0.3, b).unwrap().theta > d.theta);
                let stronger = decay_constants(n, 0.4, b).unwrap();
                assert!(stronger.theta < d.theta && stronger.gamma > d.gamma);
            }
        }
    }

    #[test]
    fn switching_schedule_covers_graph() {
        let g = build_graph(&GraphSpec::new(GraphKind::Cycle, 6, 0)).unwrap();
        let sched = MixingSchedule::switching(&g, 2).unwrap();
        assert_eq!(sched.period(), 2);
        let mut union: Vec<(usize, usize)> =
            g.split_edges(2).unwrap().iter().flat_map(|p| p.edges().to_vec()).collect();
        union.sort_unstable();
        assert_eq!(union, g.edges());
        for t in 0..20 {
            let phi = transition_matrix(&sched, t + 3, t).unwrap();
            for (r, c) in phi.row_sums().iter().zip(phi.col_sums()) {
                assert!((r - 1.0).abs() < 1e-10 && (c - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn eccentricity_of_cycle() {
        let g = build_graph(&GraphSpec::new(GraphKind::Cycle, 6, 0)).unwrap();
        assert_eq!(g.eccentricities(), vec![3; 6]);
        assert!(g.dump().starts_with("nodes 6\n0 1 2 3 4 5\nedges 6\n"));
    }
}
