//! Exact node centralities on weighted undirected graphs.
//!
//! Conventions shared by every measure:
//!
//! - In [`Weighting::Weighted`] mode path lengths use `1 / weight` and the
//!   spectral and flow measures use the weight itself (as adjacency entry or
//!   conductance). [`Weighting::Unweighted`] sets every weight to 1.
//! - Disconnected graphs are handled per connected component.
//! - Isolated nodes get 0 everywhere except subgraph centrality (1) and
//!   PageRank (their teleport share).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::linalg;
use super::WeightedGraph;

pub const PAGERANK_DAMPING: f64 = 0.85;
pub const TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 10_000;
/// Relative tolerance for treating two path lengths as equal.
const PATH_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum CentralityError {
    #[error("{kind} did not converge within {iterations} iterations")]
    NonConvergence { kind: CentralityKind, iterations: usize },
    #[error("{0} is not supported")]
    Unsupported(String),
    #[error("singular reduced Laplacian while computing {0}")]
    Singular(CentralityKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CentralityKind {
    Degree,
    AvgNeighborDegree,
    Betweenness,
    Closeness,
    Load,
    Eigenvector,
    CurrentFlowBetweenness,
    CurrentFlowCloseness,
    Information,
    Subgraph,
    Laplacian,
    PageRank,
    CogsnetWeightSum,
    AvgNeighborCogsnetWeightSum,
}

impl CentralityKind {
    pub const ALL: [CentralityKind; 14] = [
        CentralityKind::Degree,
        CentralityKind::AvgNeighborDegree,
        CentralityKind::Betweenness,
        CentralityKind::Closeness,
        CentralityKind::Load,
        CentralityKind::Eigenvector,
        CentralityKind::CurrentFlowBetweenness,
        CentralityKind::CurrentFlowCloseness,
        CentralityKind::Information,
        CentralityKind::Subgraph,
        CentralityKind::Laplacian,
        CentralityKind::PageRank,
        CentralityKind::CogsnetWeightSum,
        CentralityKind::AvgNeighborCogsnetWeightSum,
    ];

    /// Feature column suffix.
    pub fn name(self) -> &'static str {
        match self {
            CentralityKind::Degree => "degree",
            CentralityKind::AvgNeighborDegree => "avg_neighbor_degree",
            CentralityKind::Betweenness => "betweenness",
            CentralityKind::Closeness => "closeness",
            CentralityKind::Load => "load",
            CentralityKind::Eigenvector => "eigenvector",
            CentralityKind::CurrentFlowBetweenness => "current_flow_betweenness",
            CentralityKind::CurrentFlowCloseness => "current_flow_closeness",
            CentralityKind::Information => "information",
            CentralityKind::Subgraph => "subgraph",
            CentralityKind::Laplacian => "laplacian",
            CentralityKind::PageRank => "pagerank",
            CentralityKind::CogsnetWeightSum => "cogsnet_weight_sum",
            CentralityKind::AvgNeighborCogsnetWeightSum => "avg_neighbor_cogsnet_weight_sum",
        }
    }

    pub fn parse(s: &str) -> Result<CentralityKind, CentralityError> {
        CentralityKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CentralityError::Unsupported(format!("centrality kind {s:?}")))
    }
}

impl fmt::Display for CentralityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Weighted,
    Unweighted,
}

/// One value per node, indexed by node id.
pub fn compute_centrality(
    graph: &WeightedGraph,
    kind: CentralityKind,
    weighting: Weighting,
) -> Result<Vec<f64>, CentralityError> {
    let unit = weighting == Weighting::Unweighted;
    let g = if unit { graph.unweighted() } else { graph.clone() };
    Ok(match kind {
        CentralityKind::Degree => (0..g.n()).map(|u| g.degree(u) as f64).collect(),
        CentralityKind::AvgNeighborDegree => neighbor_mean(&g, |v| g.degree(v) as f64),
        CentralityKind::Betweenness => betweenness(&g),
        CentralityKind::Load => load(&g),
        CentralityKind::Closeness => closeness(&g),
        CentralityKind::Eigenvector => eigenvector(&g)?,
        CentralityKind::PageRank => pagerank(&g)?,
        CentralityKind::CurrentFlowBetweenness => current_flow_betweenness(&g)?,
        CentralityKind::CurrentFlowCloseness => resistance_closeness(&g, false)?,
        CentralityKind::Information => resistance_closeness(&g, true)?,
        CentralityKind::Subgraph => subgraph(&g),
        CentralityKind::Laplacian => laplacian_drop(&g),
        // CogSNet aggregates always use the snapshot weights.
        CentralityKind::CogsnetWeightSum => (0..graph.n()).map(|u| graph.strength(u)).collect(),
        CentralityKind::AvgNeighborCogsnetWeightSum => neighbor_mean(graph, |v| graph.strength(v)),
    })
}

/// Every kind, keyed by kind.
pub fn compute_all(
    graph: &WeightedGraph,
    weighting: Weighting,
) -> Result<BTreeMap<CentralityKind, Vec<f64>>, CentralityError> {
    CentralityKind::ALL
        .into_iter()
        .map(|k| compute_centrality(graph, k, weighting).map(|v| (k, v)))
        .collect()
}

fn neighbor_mean(g: &WeightedGraph, value: impl Fn(usize) -> f64) -> Vec<f64> {
    (0..g.n())
        .map(|u| {
            let nb = g.neighbors(u);
            if nb.is_empty() {
                0.0
            } else {
                nb.iter().map(|&(v, _)| value(v)).sum::<f64>() / nb.len() as f64
            }
        })
        .collect()
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // min-heap on distance, then node id
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

struct ShortestPaths {
    /// Nodes in order of settlement (non-decreasing distance).
    order: Vec<usize>,
    dist: Vec<f64>,
    sigma: Vec<f64>,
    preds: Vec<Vec<usize>>,
}

fn same_length(a: f64, b: f64) -> bool {
    (a - b).abs() <= PATH_EPS * a.abs().max(b.abs()).max(1.0)
}

/// Dijkstra with path counting, lengths `1 / weight`.
fn shortest_paths(g: &WeightedGraph, s: usize) -> ShortestPaths {
    let n = g.n();
    let mut dist = vec![f64::INFINITY; n];
    let mut sigma = vec![0.0; n];
    let mut preds = vec![Vec::new(); n];
    let mut done = vec![false; n];
    let mut order = Vec::new();
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    sigma[s] = 1.0;
    heap.push(Entry(0.0, s));
    while let Some(Entry(d, u)) = heap.pop() {
        if done[u] || d > dist[u] {
            continue;
        }
        done[u] = true;
        order.push(u);
        for &(v, w) in g.neighbors(u) {
            if done[v] {
                continue;
            }
            let alt = d + 1.0 / w;
            if dist[v].is_finite() && same_length(alt, dist[v]) {
                sigma[v] += sigma[u];
                preds[v].push(u);
            } else if alt < dist[v] {
                dist[v] = alt;
                sigma[v] = sigma[u];
                preds[v] = vec![u];
                heap.push(Entry(alt, v));
            }
        }
    }
    ShortestPaths {
        order,
        dist,
        sigma,
        preds,
    }
}

fn pair_scale(n: usize) -> f64 {
    // Both sums below run over ordered pairs; halve and divide by C(n-1, 2).
    if n > 2 {
        1.0 / ((n - 1) * (n - 2)) as f64
    } else {
        0.0
    }
}

fn betweenness(g: &WeightedGraph) -> Vec<f64> {
    let n = g.n();
    let mut bc = vec![0.0; n];
    for s in 0..n {
        let sp = shortest_paths(g, s);
        let mut delta = vec![0.0; n];
        for &w in sp.order.iter().rev() {
            for &v in &sp.preds[w] {
                delta[v] += sp.sigma[v] / sp.sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }
    let scale = pair_scale(n);
    bc.iter_mut().for_each(|x| *x *= scale);
    bc
}

/// Newman's load: a unit packet per ordered pair, split equally among
/// shortest-path predecessors at every hop.
fn load(g: &WeightedGraph) -> Vec<f64> {
    let n = g.n();
    let mut total = vec![0.0; n];
    for s in 0..n {
        let sp = shortest_paths(g, s);
        let mut carried = vec![0.0; n];
        for &v in &sp.order {
            if v != s {
                carried[v] = 1.0;
            }
        }
        for &v in sp.order.iter().rev() {
            if v == s {
                continue;
            }
            let share = carried[v] / sp.preds[v].len() as f64;
            for &x in &sp.preds[v] {
                if x != s {
                    carried[x] += share;
                }
            }
        }
        for &v in &sp.order {
            if v != s {
                // remove the packet that terminates at v
                total[v] += carried[v] - 1.0;
            }
        }
    }
    let scale = pair_scale(n);
    total.iter_mut().for_each(|x| *x *= scale);
    total
}

/// `(r-1)/sum(d) * (r-1)/(n-1)` where `r` counts nodes reachable from `u`.
fn closeness(g: &WeightedGraph) -> Vec<f64> {
    let n = g.n();
    (0..n)
        .map(|u| {
            let sp = shortest_paths(g, u);
            let reach = sp.order.len();
            let total: f64 = sp.order.iter().map(|&v| sp.dist[v]).sum();
            if reach <= 1 || total <= 0.0 {
                0.0
            } else {
                let r = (reach - 1) as f64;
                (r / total) * (r / (n - 1) as f64)
            }
        })
        .collect()
}

/// Principal eigenvector of each component via power iteration on `A + I`,
/// L2-normalized per component.
fn eigenvector(g: &WeightedGraph) -> Result<Vec<f64>, CentralityError> {
    let n = g.n();
    let mut out = vec![0.0; n];
    for comp in g.components() {
        if comp.len() < 2 {
            continue;
        }
        let k = comp.len();
        let norm0 = (k as f64).sqrt();
        let mut x: Vec<f64> = vec![1.0 / norm0; n];
        let mut converged = false;
        for _ in 0..MAX_ITERATIONS {
            let mut next = vec![0.0; n];
            for &u in &comp {
                let mut acc = x[u];
                for &(v, w) in g.neighbors(u) {
                    acc += w * x[v];
                }
                next[u] = acc;
            }
            let norm = comp.iter().map(|&u| next[u] * next[u]).sum::<f64>().sqrt();
            let mut change: f64 = 0.0;
            for &u in &comp {
                next[u] /= norm;
                change = change.max((next[u] - x[u]).abs());
            }
            x = next;
            if change < TOLERANCE * 1e-2 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(CentralityError::NonConvergence {
                kind: CentralityKind::Eigenvector,
                iterations: MAX_ITERATIONS,
            });
        }
        for &u in &comp {
            out[u] = x[u];
        }
    }
    Ok(out)
}

/// Weighted PageRank, damping 0.85, dangling mass spread uniformly.
fn pagerank(g: &WeightedGraph) -> Result<Vec<f64>, CentralityError> {
    let n = g.n();
    if n == 0 {
        return Ok(Vec::new());
    }
    let strength: Vec<f64> = (0..n).map(|u| g.strength(u)).collect();
    let uniform = 1.0 / n as f64;
    let mut x = vec![uniform; n];
    for _ in 0..MAX_ITERATIONS {
        let dangling: f64 = (0..n).filter(|&u| strength[u] == 0.0).map(|u| x[u]).sum();
        let base = (1.0 - PAGERANK_DAMPING) * uniform + PAGERANK_DAMPING * dangling * uniform;
        let mut next = vec![base; n];
        for u in 0..n {
            if strength[u] == 0.0 {
                continue;
            }
            let out = PAGERANK_DAMPING * x[u] / strength[u];
            for &(v, w) in g.neighbors(u) {
                next[v] += out * w;
            }
        }
        let change: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if change < TOLERANCE * 1e-2 {
            let total: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= total);
            return Ok(x);
        }
    }
    Err(CentralityError::NonConvergence {
        kind: CentralityKind::PageRank,
        iterations: MAX_ITERATIONS,
    })
}

/// Random-walk (current-flow) betweenness: unit current between every pair,
/// node throughput is half the absolute current on its incident edges.
fn current_flow_betweenness(g: &WeightedGraph) -> Result<Vec<f64>, CentralityError> {
    let n = g.n();
    let mut out = vec![0.0; n];
    for comp in g.components() {
        let k = comp.len();
        if k < 3 {
            continue;
        }
        let a = linalg::adjacency(g, &comp, false);
        let c = linalg::grounded_inverse(&linalg::laplacian(&a))
            .ok_or(CentralityError::Singular(CentralityKind::CurrentFlowBetweenness))?;
        let edges: Vec<(usize, usize, f64)> = (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .filter(|&(i, j)| a[(i, j)] > 0.0)
            .map(|(i, j)| (i, j, a[(i, j)]))
            .collect();
        let mut through = vec![0.0; k];
        let mut flow = vec![0.0; k];
        for s in 0..k {
            for t in s + 1..k {
                flow.iter_mut().for_each(|f| *f = 0.0);
                for &(i, j, w) in &edges {
                    let pi = c[(i, s)] - c[(i, t)];
                    let pj = c[(j, s)] - c[(j, t)];
                    let current = (w * (pi - pj)).abs();
                    flow[i] += current;
                    flow[j] += current;
                }
                for v in 0..k {
                    if v != s && v != t {
                        through[v] += 0.5 * flow[v];
                    }
                }
            }
        }
        // unordered pairs here, so double before the shared ordered-pair scale
        let scale = 2.0 * pair_scale(n);
        for (i, &u) in comp.iter().enumerate() {
            out[u] = through[i] * scale;
        }
    }
    Ok(out)
}

/// Component-restricted closeness on effective resistance.
///
/// `information = c / sum_t R(s, t)` (Stephenson–Zelen);
/// current-flow closeness `= (c - 1) / sum_t R(s, t)`.
fn resistance_closeness(g: &WeightedGraph, information: bool) -> Result<Vec<f64>, CentralityError> {
    let kind = if information {
        CentralityKind::Information
    } else {
        CentralityKind::CurrentFlowCloseness
    };
    let mut out = vec![0.0; g.n()];
    for comp in g.components() {
        let k = comp.len();
        if k < 2 {
            continue;
        }
        let a = linalg::adjacency(g, &comp, false);
        let c = linalg::grounded_inverse(&linalg::laplacian(&a)).ok_or(CentralityError::Singular(kind))?;
        for (s, &u) in comp.iter().enumerate() {
            let total: f64 = (0..k).map(|t| c[(s, s)] + c[(t, t)] - 2.0 * c[(s, t)]).sum();
            let numer = if information { k as f64 } else { (k - 1) as f64 };
            out[u] = numer / total;
        }
    }
    Ok(out)
}

/// Diagonal of `exp(A)` from the symmetric eigendecomposition.
fn subgraph(g: &WeightedGraph) -> Vec<f64> {
    let n = g.n();
    if n == 0 {
        return Vec::new();
    }
    let nodes: Vec<usize> = (0..n).collect();
    let eig = linalg::symmetric_eigen(linalg::adjacency(g, &nodes, false));
    let exp: Vec<f64> = eig.eigenvalues.iter().map(|l| l.exp()).collect();
    (0..n)
        .map(|i| (0..n).map(|k| eig.eigenvectors[(i, k)].powi(2) * exp[k]).sum())
        .collect()
}

/// Relative drop in Laplacian energy `sum(d_i^2) + 2 * sum_{i<j} w_ij^2`
/// when a node and its edges are removed.
fn laplacian_drop(g: &WeightedGraph) -> Vec<f64> {
    let n = g.n();
    let strength: Vec<f64> = (0..n).map(|u| g.strength(u)).collect();
    let energy: f64 = strength.iter().map(|d| d * d).sum::<f64>() + 2.0 * g.edges().map(|(_, _, w)| w * w).sum::<f64>();
    (0..n)
        .map(|v| {
            if energy == 0.0 {
                return 0.0;
            }
            let mut drop = strength[v] * strength[v];
            for &(u, w) in g.neighbors(v) {
                let du = strength[u];
                drop += du * du - (du - w) * (du - w) + 2.0 * w * w;
            }
            drop / energy
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> WeightedGraph {
        WeightedGraph::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])
    }

    fn cycle(n: usize) -> WeightedGraph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        WeightedGraph::from_edges(n, &edges)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn star_betweenness() {
        let bc = compute_centrality(&star(), CentralityKind::Betweenness, Weighting::Weighted).unwrap();
        assert!(close(&bc, &[1.0, 0.0, 0.0, 0.0], 1e-12));
        let load = compute_centrality(&star(), CentralityKind::Load, Weighting::Weighted).unwrap();
        assert!(close(&load, &bc, 1e-12));
    }

    #[test]
    fn cycle_pagerank_is_uniform() {
        let pr = compute_centrality(&cycle(7), CentralityKind::PageRank, Weighting::Weighted).unwrap();
        assert!(close(&pr, &[1.0 / 7.0; 7], 1e-10));
    }

    #[test]
    fn complete_graph_eigenvector() {
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                edges.push((i, j, 1.0));
            }
        }
        let g = WeightedGraph::from_edges(4, &edges);
        let ev = compute_centrality(&g, CentralityKind::Eigenvector, Weighting::Weighted).unwrap();
        assert!(close(&ev, &[0.5; 4], 1e-9));
    }

    #[test]
    fn edgeless_conventions() {
        let g = WeightedGraph::new(5);
        let all = compute_all(&g, Weighting::Weighted).unwrap();
        for (kind, values) in &all {
            let expected = match kind {
                CentralityKind::Subgraph => 1.0,
                CentralityKind::PageRank => 0.2,
                _ => 0.0,
            };
            assert!(close(values, &[expected; 5], 1e-12), "{kind}: {values:?}");
        }
    }

    #[test]
    fn single_edge_weight_sum() {
        let g = WeightedGraph::from_edges(2, &[(0, 1, 0.5)]);
        let s = compute_centrality(&g, CentralityKind::CogsnetWeightSum, Weighting::Unweighted).unwrap();
        assert_eq!(s, vec![0.5, 0.5]);
        let avg = compute_centrality(&g, CentralityKind::AvgNeighborCogsnetWeightSum, Weighting::Weighted).unwrap();
        assert_eq!(avg, vec![0.5, 0.5]);
    }

    #[test]
    fn path_current_flow_matches_betweenness() {
        let g = WeightedGraph::from_edges(5, &[(0, 1, 0.3), (1, 2, 0.9), (2, 3, 0.5), (2, 4, 0.2)]);
        let cf = compute_centrality(&g, CentralityKind::CurrentFlowBetweenness, Weighting::Weighted).unwrap();
        let bc = compute_centrality(&g, CentralityKind::Betweenness, Weighting::Weighted).unwrap();
        assert!(close(&cf, &bc, 1e-9), "{cf:?} vs {bc:?}");
    }

    #[test]
    fn unweighted_laplacian_energy_identity() {
        // For unit weights the energy equals sum(d^2) + sum(d).
        let g = cycle(5);
        let lc = compute_centrality(&g, CentralityKind::Laplacian, Weighting::Unweighted).unwrap();
        let energy = 5.0 * 4.0 + 5.0 * 2.0;
        // removing one node of C5 leaves P4: degrees 1,2,2,1 → 10 + 6
        assert!(close(&lc, &[(energy - 16.0) / energy; 5], 1e-12));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in CentralityKind::ALL {
            assert_eq!(CentralityKind::parse(k.name()).unwrap(), k);
        }
        assert!(CentralityKind::parse("katz").is_err());
    }
}
