//! Page link-network generation and semantic node assignment.
//!
//! Wiki sites need a link network whose shape resembles a real one.
//! [`sample_graph`] draws expected degrees i.i.d. from a fitted degree
//! histogram and connects each pair `(u, v)` with probability
//! `min(1, d_u d_v / Σd)`, which reproduces the degree mix without ever
//! creating self-loops or duplicate edges. A repair pass then joins every
//! smaller component to the largest with one edge so the site is always
//! navigable.
//!
//! [`greedy_assign`] maps articles onto nodes so that semantically
//! similar articles tend to share an edge: nodes are visited in
//! descending degree (ties by id); the first node takes the article
//! nearest the embedding centroid; every later node takes the unassigned
//! article with the largest summed cosine to the articles already placed
//! on its neighbours (nodes with no assigned neighbour fall back to the
//! centroid of the remaining articles). Ties break by article index.
//!
//! Edge-list exchange format: one `u v` pair per line, 0-indexed,
//! endpoints ordered `u < v`, lines sorted.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::Rng;
use thiserror::Error;

use crate::dist::Empirical;
use crate::embed::cosine;
use crate::rng::seeded;

#[derive(Debug, Error)]
pub enum GraphgenError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("edge endpoint {0} out of range for n = {1}")]
    NodeOutOfRange(usize, usize),
    #[error("expected {expected} embeddings, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("embeddings have inconsistent dimensions")]
    MixedDimensions,
    #[error("edge list line {0} is malformed")]
    BadEdgeLine(usize),
}

/// Simple undirected graph over nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl LinkGraph {
    pub fn new(n: usize) -> Self {
        Self { n, edges: BTreeSet::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<(), GraphgenError> {
        if u == v {
            return Err(GraphgenError::SelfLoop(u));
        }
        for x in [u, v] {
            if x >= self.n {
                return Err(GraphgenError::NodeOutOfRange(x, self.n));
            }
        }
        self.edges.insert((u.min(v), u.max(v)));
        Ok(())
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degree(&self, u: usize) -> usize {
        self.edges.iter().filter(|(a, b)| *a == u || *b == u).count()
    }

    pub fn neighbors(&self, u: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &(a, b) in &self.edges {
            if a == u {
                out.push(b);
            } else if b == u {
                out.push(a);
            }
        }
        out
    }

    /// Connected components, each sorted, ordered by (size desc, min id).
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut comps = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (u, v) in &self.edges {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R, n: usize) -> Result<LinkGraph, GraphgenError> {
        let mut g = LinkGraph::new(n);
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|_| GraphgenError::BadEdgeLine(i + 1))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let u: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or(GraphgenError::BadEdgeLine(i + 1))?;
            let v: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or(GraphgenError::BadEdgeLine(i + 1))?;
            g.add_edge(u, v)?;
        }
        Ok(g)
    }
}

/// Degree histogram and density of a training graph.
#[derive(Debug, Clone)]
pub struct GraphStats {
    pub degree_hist: Empirical<usize>,
    pub density: f64,
    pub n: usize,
}

/// Collect the degree histogram and edge density of a graph.
pub fn fit_graph_stats(graph: &LinkGraph) -> Result<GraphStats, GraphgenError> {
    if graph.n == 0 {
        return Err(GraphgenError::EmptyGraph);
    }
    let mut degree_hist = Empirical::new();
    for u in 0..graph.n {
        degree_hist.add(graph.degree(u));
    }
    let pairs = graph.n * graph.n.saturating_sub(1) / 2;
    let density = if pairs == 0 { 0.0 } else { graph.edge_count() as f64 / pairs as f64 };
    Ok(GraphStats { degree_hist, density, n: graph.n })
}

/// Sample an `n`-node graph: expected degrees drawn i.i.d. from the
/// fitted histogram, pair `(u, v)` wired with probability
/// `min(1, d_u d_v / Σd)`, then smaller components attached to the
/// largest one with a single edge each.
pub fn sample_graph(stats: &GraphStats, n: usize, rng_seed: u64) -> LinkGraph {
    assert!(n >= 1, "n must be >= 1");
    let mut rng = seeded(rng_seed);
    let mut g = LinkGraph::new(n);
    if n == 1 {
        return g;
    }
    let degrees: Vec<f64> = (0..n)
        .map(|_| {
            if stats.degree_hist.is_empty() {
                1.0
            } else {
                stats.degree_hist.sample(&mut rng) as f64
            }
        })
        .collect();
    let total: f64 = degrees.iter().sum();
    if total > 0.0 {
        for u in 0..n {
            for v in (u + 1)..n {
                let p = (degrees[u] * degrees[v] / total).min(1.0);
                if rng.gen::<f64>() < p {
                    g.add_edge(u, v).expect("u < v < n");
                }
            }
        }
    }
    // Connectivity repair: one edge from each smaller component into the
    // largest, endpoints chosen uniformly.
    let comps = g.components();
    if comps.len() > 1 {
        let largest = comps[0].clone();
        for comp in &comps[1..] {
            let u = comp[rng.gen_range(0..comp.len())];
            let v = largest[rng.gen_range(0..largest.len())];
            g.add_edge(u, v).expect("distinct components share no node");
        }
    }
    g
}

/// Objective value of an assignment: summed cosine over edges, where
/// `assignment[node]` is the article index placed on that node.
pub fn assignment_objective(
    embeddings: &[Vec<f64>],
    graph: &LinkGraph,
    assignment: &[usize],
) -> f64 {
    graph
        .edges()
        .map(|(u, v)| cosine(&embeddings[assignment[u]], &embeddings[assignment[v]]))
        .sum()
}

/// Greedily place articles on nodes so linked nodes carry similar
/// articles. Returns `assignment[node] = article index`, always a
/// bijection.
pub fn greedy_assign(
    embeddings: &[Vec<f64>],
    graph: &LinkGraph,
) -> Result<Vec<usize>, GraphgenError> {
    let n = graph.n;
    if embeddings.len() != n {
        return Err(GraphgenError::SizeMismatch { expected: n, got: embeddings.len() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let dim = embeddings[0].len();
    if embeddings.iter().any(|e| e.len() != dim) {
        return Err(GraphgenError::MixedDimensions);
    }

    let centroid_of = |articles: &[usize]| -> Vec<f64> {
        let mut c = vec![0.0; dim];
        for &a in articles {
            for (ci, v) in c.iter_mut().zip(&embeddings[a]) {
                *ci += v / articles.len() as f64;
            }
        }
        c
    };
    let nearest_to = |target: &[f64], pool: &[usize]| -> usize {
        let mut best = pool[0];
        let mut best_cos = f64::NEG_INFINITY;
        for &a in pool {
            let c = cosine(&embeddings[a], target);
            if c > best_cos {
                best_cos = c;
                best = a;
            }
        }
        best
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| graph.degree(b).cmp(&graph.degree(a)).then(a.cmp(&b)));

    let mut assignment = vec![usize::MAX; n];
    let mut remaining: Vec<usize> = (0..n).collect();
    for (step, &node) in order.iter().enumerate() {
        let article = if step == 0 {
            let centroid = centroid_of(&(0..n).collect::<Vec<_>>());
            nearest_to(&centroid, &remaining)
        } else {
            let assigned_neighbors: Vec<usize> = graph
                .neighbors(node)
                .into_iter()
                .filter(|&v| assignment[v] != usize::MAX)
                .collect();
            if assigned_neighbors.is_empty() {
                let centroid = centroid_of(&remaining);
                nearest_to(&centroid, &remaining)
            } else {
                let mut best = remaining[0];
                let mut best_score = f64::NEG_INFINITY;
                for &a in &remaining {
                    let score: f64 = assigned_neighbors
                        .iter()
                        .map(|&v| cosine(&embeddings[a], &embeddings[assignment[v]]))
                        .sum();
                    if score > best_score {
                        best_score = score;
                        best = a;
                    }
                }
                best
            }
        };
        assignment[node] = article;
        remaining.retain(|&a| a != article);
    }
    debug_assert!(remaining.is_empty());
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn graph_from(n: usize, edges: &[(usize, usize)]) -> LinkGraph {
        let mut g = LinkGraph::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v).unwrap();
        }
        g
    }

    #[test]
    fn triangle_stats() {
        let g = graph_from(3, &[(0, 1), (1, 2), (0, 2)]);
        let s = fit_graph_stats(&g).unwrap();
        assert_eq!(s.degree_hist.prob(&2), 1.0);
        assert_abs_diff_eq!(s.density, 1.0);
    }

    #[test]
    fn path_stats() {
        let g = graph_from(3, &[(0, 1), (1, 2)]);
        let s = fit_graph_stats(&g).unwrap();
        assert_abs_diff_eq!(s.degree_hist.prob(&1), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.degree_hist.prob(&2), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn star_stats() {
        let g = graph_from(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let s = fit_graph_stats(&g).unwrap();
        assert_abs_diff_eq!(s.degree_hist.prob(&1), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(s.degree_hist.prob(&4), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn single_node_sample_is_trivially_connected() {
        let stats = fit_graph_stats(&graph_from(3, &[(0, 1), (1, 2)])).unwrap();
        let g = sample_graph(&stats, 1, 5);
        assert_eq!(g.edge_count(), 0);
        assert!(g.is_connected());
    }

    #[test]
    fn two_nodes_with_unit_degree_mass_end_up_linked() {
        let stats = fit_graph_stats(&graph_from(2, &[(0, 1)])).unwrap();
        for seed in 0..50 {
            let g = sample_graph(&stats, 2, seed);
            assert!(g.has_edge(0, 1), "seed {seed}");
        }
    }

    #[test]
    fn samples_are_simple_and_connected() {
        let stats = fit_graph_stats(&graph_from(4, &[(0, 1), (1, 2), (2, 3), (0, 3)])).unwrap();
        for seed in 0..300 {
            let n = 1 + (seed as usize % 40);
            let g = sample_graph(&stats, n, seed);
            assert!(g.is_connected(), "seed {seed} n {n}");
            for (u, v) in g.edges() {
                assert!(u < v && v < n);
            }
        }
    }

    #[test]
    fn mean_degree_tracks_powerlaw_source() {
        // Power-law-ish histogram over degrees 2..16: mean within 15%.
        let mut hist = Empirical::new();
        hist.add_n(2, 60);
        hist.add_n(4, 25);
        hist.add_n(8, 10);
        hist.add_n(16, 5);
        let source_mean = (120.0 + 100.0 + 80.0 + 80.0) / 100.0;
        let stats = GraphStats { degree_hist: hist, density: 0.01, n: 100 };
        let mut total = 0.0;
        let seeds = 20;
        for seed in 0..seeds {
            let g = sample_graph(&stats, 500, seed);
            total += 2.0 * g.edge_count() as f64 / 500.0;
        }
        let mean = total / seeds as f64;
        // Connectivity repair adds a few edges over the Chung-Lu expectation.
        assert!(
            (mean - source_mean).abs() / source_mean < 0.15,
            "sampled mean {mean} vs source {source_mean}"
        );
    }

    #[test]
    fn single_article_assignment() {
        let g = graph_from(1, &[]);
        let a = greedy_assign(&[vec![1.0, 0.0]], &g).unwrap();
        assert_eq!(a, vec![0]);
    }

    #[test]
    fn complete_graph_assignment_is_bijective() {
        let g = graph_from(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let emb: Vec<Vec<f64>> =
            vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0], vec![0.1, 0.9]];
        let a = greedy_assign(&emb, &g).unwrap();
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        // All assignments have an identical objective on a complete graph.
        let obj = assignment_objective(&emb, &g, &a);
        let identity: Vec<usize> = (0..4).collect();
        assert_abs_diff_eq!(obj, assignment_objective(&emb, &g, &identity), epsilon = 1e-9);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let g = graph_from(2, &[(0, 1)]);
        let emb = vec![vec![1.0, 0.0], vec![1.0]];
        assert!(matches!(greedy_assign(&emb, &g), Err(GraphgenError::MixedDimensions)));
        assert!(matches!(
            greedy_assign(&[vec![1.0]], &g),
            Err(GraphgenError::SizeMismatch { .. })
        ));
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 1 {
            return vec![vec![0]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn path_graph_beats_median_of_all_permutations() {
        // Two themes: articles 0..3 cluster, 3..5 cluster.
        let g = graph_from(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let emb: Vec<Vec<f64>> = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.95, 0.2, 0.0],
            vec![0.9, 0.35, 0.1],
            vec![0.1, 0.95, 0.2],
            vec![0.0, 1.0, 0.1],
        ];
        let greedy = greedy_assign(&emb, &g).unwrap();
        let greedy_obj = assignment_objective(&emb, &g, &greedy);
        let mut objs: Vec<f64> = permutations(5)
            .into_iter()
            .map(|p| assignment_objective(&emb, &g, &p))
            .collect();
        assert_eq!(objs.len(), 120);
        objs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = objs[objs.len() / 2];
        assert!(greedy_obj >= median, "greedy {greedy_obj} < median {median}");
        assert!(objs.iter().any(|o| (o - greedy_obj).abs() < 1e-9));
    }

    #[test]
    fn greedy_beats_random_baseline_on_most_instances() {
        use rand::seq::SliceRandom;
        let mut wins = 0;
        let instances = 100;
        for inst in 0..instances {
            let mut rng = seeded(1000 + inst);
            let n = 8;
            let mut g = LinkGraph::new(n);
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.gen::<f64>() < 0.3 {
                        g.add_edge(u, v).unwrap();
                    }
                }
            }
            let emb: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    v
                })
                .collect();
            let greedy = greedy_assign(&emb, &g).unwrap();
            let greedy_obj = assignment_objective(&emb, &g, &greedy);
            let mut total = 0.0;
            let trials = 100;
            let mut perm: Vec<usize> = (0..n).collect();
            for _ in 0..trials {
                perm.shuffle(&mut rng);
                total += assignment_objective(&emb, &g, &perm);
            }
            if greedy_obj >= total / trials as f64 {
                wins += 1;
            }
        }
        assert!(wins >= 95, "greedy beat the random mean on only {wins}/{instances}");
    }

    #[test]
    fn edge_list_round_trips() {
        let g = graph_from(4, &[(0, 1), (2, 3), (1, 3)]);
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = LinkGraph::read_edge_list(buf.as_slice(), 4).unwrap();
        assert_eq!(g, back);
    }
}
