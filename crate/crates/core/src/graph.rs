//! Weighted undirected graphs and the fixtures used by the max-cut runs.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    n_vertices: usize,
    edges: Vec<Edge>,
}

/// Resampling budget for the pairing model before giving up.
const PAIRING_ATTEMPTS: usize = 100_000;

impl Graph {
    /// Validates and builds a graph. Edge order is preserved.
    pub fn new(n_vertices: usize, edges: Vec<Edge>) -> Result<Graph> {
        if n_vertices == 0 {
            return Err(Error::InvalidGraph(
                "graph needs at least one vertex".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for e in &edges {
            if e.i >= n_vertices || e.j >= n_vertices {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) references a vertex outside 0..{n_vertices}",
                    e.i, e.j
                )));
            }
            if e.i == e.j {
                return Err(Error::InvalidGraph(format!("self-loop on vertex {}", e.i)));
            }
            if !e.weight.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has non-finite weight",
                    e.i, e.j
                )));
            }
            if !seen.insert((e.i.min(e.j), e.i.max(e.j))) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    e.i, e.j
                )));
            }
        }
        Ok(Graph { n_vertices, edges })
    }

    pub fn unweighted(n_vertices: usize, pairs: &[(usize, usize)]) -> Result<Graph> {
        Graph::new(
            n_vertices,
            pairs
                .iter()
                .map(|&(i, j)| Edge { i, j, weight: 1.0 })
                .collect(),
        )
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.i == v || e.j == v).count()
    }

    /// The Petersen graph: outer 5-cycle, spokes, inner pentagram.
    pub fn petersen() -> Graph {
        let mut pairs = Vec::with_capacity(15);
        for i in 0..5 {
            pairs.push((i, (i + 1) % 5));
        }
        for i in 0..5 {
            pairs.push((i, i + 5));
        }
        for i in 0..5 {
            pairs.push((5 + i, 5 + (i + 2) % 5));
        }
        Graph::unweighted(10, &pairs).expect("petersen fixture is valid")
    }

    /// Unit-weight complete graph `K_n`.
    pub fn complete(n: usize) -> Result<Graph> {
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((i, j));
            }
        }
        Graph::unweighted(n, &pairs)
    }

    /// Unit-weight cycle `C_n` (n ≥ 3).
    pub fn cycle(n: usize) -> Result<Graph> {
        if n < 3 {
            return Err(Error::InvalidGraph(format!("cycle needs n >= 3, got {n}")));
        }
        let pairs: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::unweighted(n, &pairs)
    }

    /// Complete graph with weights drawn uniformly from (0, 1).
    pub fn complete_weighted(n: usize, seed: u64) -> Result<Graph> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let mut w: f64 = rng.gen();
                while w == 0.0 {
                    w = rng.gen();
                }
                edges.push(Edge { i, j, weight: w });
            }
        }
        Graph::new(n, edges)
    }

    /// Uniform random 3-regular graph from the pairing (configuration) model,
    /// resampled until simple.
    pub fn random_regular3(n: usize, seed: u64) -> Result<Graph> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGraph(format!(
                "3-regular graph needs an even vertex count >= 4, got {n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points: Vec<usize> = (0..3 * n).map(|p| p / 3).collect();
        'attempt: for _ in 0..PAIRING_ATTEMPTS {
            points.shuffle(&mut rng);
            let mut seen = BTreeSet::new();
            let mut pairs = Vec::with_capacity(3 * n / 2);
            for pair in points.chunks_exact(2) {
                let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                if a == b || !seen.insert((a, b)) {
                    continue 'attempt;
                }
                pairs.push((a, b));
            }
            pairs.sort_unstable();
            return Graph::unweighted(n, &pairs);
        }
        Err(Error::InvalidGraph(format!(
            "no simple 3-regular pairing found for n = {n}"
        )))
    }

    /// Parses the text format: `n <count>` header, then `i j [weight]` per line.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Graph> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .enumerate()
            .filter(|(_, l)| !l.is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty graph file".into()))?;
        let mut head = header.split_whitespace();
        let n = match (head.next(), head.next(), head.next()) {
            (Some("n"), Some(v), None) => v
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad vertex count {v:?}")))?,
            _ => {
                return Err(Error::Parse(format!(
                    "expected header `n <vertices>`, got {header:?}"
                )))
            }
        };
        let mut edges = Vec::new();
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse(format!("line {}: cannot parse edge {line:?}", lineno + 1));
            let (i, j, weight) = match fields.as_slice() {
                [i, j] => (
                    i.parse().map_err(|_| bad())?,
                    j.parse().map_err(|_| bad())?,
                    1.0,
                ),
                [i, j, w] => (
                    i.parse().map_err(|_| bad())?,
                    j.parse().map_err(|_| bad())?,
                    w.parse().map_err(|_| bad())?,
                ),
                _ => return Err(bad()),
            };
            edges.push(Edge { i, j, weight });
        }
        Graph::new(n, edges)
    }

    pub fn load(path: &Path) -> Result<Graph> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Graph::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("n {}\n", self.n_vertices);
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {}", e.i, e.j, e.weight);
        }
        out
    }

    /// Cut weight of a vertex bipartition given as a bitmask.
    pub fn cut_value(&self, assignment: u64) -> f64 {
        self.edges
            .iter()
            .filter(|e| (assignment >> e.i ^ assignment >> e.j) & 1 == 1)
            .map(|e| e.weight)
            .sum()
    }
}

/// Which fixture family to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Petersen,
    Random3Regular,
    CompleteWeighted,
}

pub fn generate_graph(kind: GraphKind, n: usize, seed: u64) -> Result<Graph> {
    match kind {
        GraphKind::Petersen => {
            if n != 10 {
                return Err(Error::InvalidGraph(format!(
                    "the Petersen graph has 10 vertices, asked for {n}"
                )));
            }
            Ok(Graph::petersen())
        }
        GraphKind::Random3Regular => Graph::random_regular3(n, seed),
        GraphKind::CompleteWeighted => Graph::complete_weighted(n, seed),
    }
}

/// Resolves a `--graph` argument: a fixture name or a file path.
///
/// Names: `petersen`, `k<N>`, `c<N>`, `regular3` / `random3` (needs `n`),
/// `weighted` / `complete_weighted` (needs `n`).
pub fn resolve_graph(spec: &str, n: Option<usize>, seed: u64) -> Result<Graph> {
    let lower = spec.to_ascii_lowercase();
    let need_n =
        || n.ok_or_else(|| Error::InvalidArgument(format!("graph {spec:?} needs a vertex count")));
    match lower.as_str() {
        "petersen" => return Ok(Graph::petersen()),
        "regular3" | "random3" | "random_3_regular" => {
            return Graph::random_regular3(need_n()?, seed)
        }
        "weighted" | "complete_weighted" => return Graph::complete_weighted(need_n()?, seed),
        _ => {}
    }
    let sized = |prefix: char| -> Option<usize> {
        lower
            .strip_prefix(prefix)
            .and_then(|rest| rest.parse::<usize>().ok())
    };
    if let Some(k) = sized('k') {
        return Graph::complete(k);
    }
    if let Some(k) = sized('c') {
        return Graph::cycle(k);
    }
    let path = Path::new(spec);
    if path.exists() {
        return Graph::load(path);
    }
    Err(Error::InvalidArgument(format!(
        "unknown graph {spec:?} (not a fixture name or an existing file)"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn petersen_structure() {
        let g = Graph::petersen();
        assert_eq!(g.n_vertices(), 10);
        assert_eq!(g.edges().len(), 15);
        assert!((0..10).all(|v| g.degree(v) == 3));
    }

    #[test]
    fn complete_weighted_counts() {
        let g = Graph::complete_weighted(10, 7).unwrap();
        assert_eq!(g.edges().len(), 45);
        assert!(g.edges().iter().all(|e| e.weight > 0.0 && e.weight < 1.0));
        assert_eq!(g, Graph::complete_weighted(10, 7).unwrap());
        assert_ne!(g, Graph::complete_weighted(10, 8).unwrap());
    }

    #[test]
    fn random_regular_is_reproducible_and_simple() {
        let g = Graph::random_regular3(10, 42).unwrap();
        assert_eq!(g.edges().len(), 15);
        assert!((0..10).all(|v| g.degree(v) == 3));
        assert_eq!(g, Graph::random_regular3(10, 42).unwrap());
        let big = Graph::random_regular3(50, 1).unwrap();
        assert_eq!(big.edges().len(), 75);
    }

    #[test]
    fn random_regular_rejects_odd() {
        assert!(Graph::random_regular3(7, 0).is_err());
        assert!(Graph::random_regular3(2, 0).is_err());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::unweighted(3, &[(0, 0)]).is_err());
        assert!(Graph::unweighted(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::unweighted(3, &[(0, 3)]).is_err());
    }

    #[test]
    fn parse_text_format() {
        let g = Graph::parse("# demo\nn 3\n0 1\n1 2 0.5\n").unwrap();
        assert_eq!(g.n_vertices(), 3);
        assert_eq!(g.edges()[0].weight, 1.0);
        assert_eq!(g.edges()[1].weight, 0.5);
        assert_eq!(Graph::parse(&g.to_text()).unwrap(), g);
        assert!(Graph::parse("3\n0 1").is_err());
        assert!(Graph::parse("n 3\n0 x").is_err());
    }

    #[test]
    fn resolve_names() {
        assert_eq!(resolve_graph("k4", None, 0).unwrap().edges().len(), 6);
        assert_eq!(resolve_graph("C4", None, 0).unwrap().edges().len(), 4);
        assert_eq!(
            resolve_graph("petersen", None, 0).unwrap(),
            Graph::petersen()
        );
        assert!(resolve_graph("regular3", None, 0).is_err());
        assert!(resolve_graph("nope", None, 0).is_err());
    }
}
