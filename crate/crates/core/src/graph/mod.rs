//! Weighted undirected graphs, the centrality battery and feature assembly.

mod centrality;
mod features;
mod linalg;

pub use centrality::{compute_all, compute_centrality, CentralityError, CentralityKind, Weighting};
pub use features::{
    assemble_hybrid, build_matrix, extract_survey_features, extract_topology_features, ColumnManifest, FeatureError,
    FeatureMatrix, FeatureVector, LabeledMatrix, Pipeline, SampleKey,
};

/// Simple undirected graph with positive edge weights and sorted adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        WeightedGraph {
            adj: vec![Vec::new(); n],
        }
    }

    /// Build from `(u, v, weight)` triples. Later duplicates overwrite earlier ones.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut g = WeightedGraph::new(n);
        for &(u, v, w) in edges {
            g.set_edge(u, v, w);
        }
        g
    }

    /// Insert or overwrite an edge. Panics on self-loops, out-of-range nodes or non-positive weights.
    pub fn set_edge(&mut self, u: usize, v: usize, w: f64) {
        assert!(u != v, "self-loop on {u}");
        assert!(u < self.n() && v < self.n(), "node out of range");
        assert!(w > 0.0 && w.is_finite(), "edge weight must be positive, got {w}");
        for (a, b) in [(u, v), (v, u)] {
            let list = &mut self.adj[a];
            match list.binary_search_by(|(x, _)| x.cmp(&b)) {
                Ok(i) => list[i].1 = w,
                Err(i) => list.insert(i, (b, w)),
            }
        }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adj[u]
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        self.adj[u]
            .binary_search_by(|(x, _)| x.cmp(&v))
            .ok()
            .map(|i| self.adj[u][i].1)
    }

    /// Edges with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, l)| l.iter().filter(move |(v, _)| *v > u).map(move |&(v, w)| (u, v, w)))
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    pub fn strength(&self, u: usize) -> f64 {
        self.adj[u].iter().map(|(_, w)| w).sum()
    }

    /// Same topology with every weight set to 1.
    pub fn unweighted(&self) -> WeightedGraph {
        WeightedGraph {
            adj: self
                .adj
                .iter()
                .map(|l| l.iter().map(|&(v, _)| (v, 1.0)).collect())
                .collect(),
        }
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Relabel nodes: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> WeightedGraph {
        let edges: Vec<_> = self.edges().map(|(u, v, w)| (perm[u], perm[v], w)).collect();
        WeightedGraph::from_edges(self.n(), &edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacency_stays_sorted_and_symmetric() {
        let g = WeightedGraph::from_edges(4, &[(2, 0, 0.5), (0, 1, 1.0), (3, 0, 0.25), (0, 1, 2.0)]);
        assert_eq!(g.neighbors(0), &[(1, 2.0), (2, 0.5), (3, 0.25)]);
        assert_eq!(g.weight(2, 0), Some(0.5));
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.components(), vec![vec![0, 1, 2, 3]]);
        let h = WeightedGraph::from_edges(5, &[(0, 1, 1.0), (3, 4, 1.0)]);
        assert_eq!(h.components(), vec![vec![0, 1], vec![2], vec![3, 4]]);
    }
}
