//! Inter-sensor communication graph and synchronous average consensus with
//! Metropolis-Hastings weights.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};

/// Undirected, connected simple graph on vertices `0..M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Rejects self-loops, duplicate
    /// edges, out-of-range vertices and disconnected graphs.
    pub fn new(vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if vertices == 0 {
            return Err(Error::Topology("graph needs at least one vertex".into()));
        }
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); vertices];
        for &(u, v) in edges {
            if u >= vertices || v >= vertices {
                return Err(Error::Topology(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{vertices}"
                )));
            }
            if u == v {
                return Err(Error::Topology(format!("self-loop at vertex {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::Topology(format!("duplicate edge ({u}, {v})")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let g = Self { adjacency };
        if !g.is_connected() {
            return Err(Error::Topology("graph is not connected".into()));
        }
        Ok(g)
    }

    pub fn complete(vertices: usize) -> Self {
        let adjacency = (0..vertices)
            .map(|u| (0..vertices).filter(|&v| v != u).collect())
            .collect();
        Self { adjacency }
    }

    pub fn path(vertices: usize) -> Self {
        let edges: Vec<_> = (1..vertices).map(|v| (v - 1, v)).collect();
        Self::new(vertices, &edges).expect("a path is connected")
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
            .collect()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.vertex_count()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.vertex_count()
    }

    /// Edge-list text: a `# vertices M` header, then one `u v` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# vertices {}\n", self.vertex_count());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    /// Parses [`Graph::to_edge_list`] output. Without a header the vertex
    /// count is one more than the largest index seen.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut vertices = None;
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(n) = comment.trim().strip_prefix("vertices") {
                    let n = n.trim().parse::<usize>().map_err(|e| {
                        Error::Topology(format!("line {}: bad vertex count: {e}", lineno + 1))
                    })?;
                    vertices = Some(n);
                }
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(u)), Some(Ok(v)), None) => edges.push((u, v)),
                _ => {
                    return Err(Error::Topology(format!(
                        "line {}: expected `u v`, got `{line}`",
                        lineno + 1
                    )))
                }
            }
        }
        let vertices =
            vertices.unwrap_or_else(|| edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0));
        Self::new(vertices, &edges)
    }
}

const RGG_RETRIES: usize = 1000;

/// Random geometric graph: vertices uniform in the unit square, an edge
/// whenever two points are within `radius`. Redrawn until connected.
pub fn random_geometric_graph<R: Rng + ?Sized>(
    vertices: usize,
    radius: f64,
    rng: &mut R,
) -> Result<Graph> {
    if vertices == 0 {
        return Err(Error::Topology("graph needs at least one vertex".into()));
    }
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::invalid("radius", "must be > 0"));
    }
    let r2 = radius * radius;
    for _ in 0..RGG_RETRIES {
        let points: Vec<(f64, f64)> = (0..vertices)
            .map(|_| (rng.random(), rng.random()))
            .collect();
        let mut edges = Vec::new();
        for u in 0..vertices {
            for v in u + 1..vertices {
                let (dx, dy) = (points[u].0 - points[v].0, points[u].1 - points[v].1);
                if dx * dx + dy * dy <= r2 {
                    edges.push((u, v));
                }
            }
        }
        if let Ok(g) = Graph::new(vertices, &edges) {
            return Ok(g);
        }
    }
    Err(Error::Topology(format!(
        "no connected geometric graph with {vertices} vertices and radius {radius} in {RGG_RETRIES} draws"
    )))
}

/// When a consensus run is considered finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopRule {
    /// Stop once every state is within `tol` of the true initial average.
    /// Only a simulator knows that average.
    Oracle,
    /// Stop once every edge disagreement `|x_u - x_v|` is at most
    /// `tol / (M - 1)`. Each node checks only its own links, and since any
    /// two nodes are joined by a path of at most `M - 1` edges, the global
    /// spread, and with it every deviation from the average, is then
    /// at most `tol`.
    #[default]
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusResult {
    pub values: Vec<f64>,
    pub iterations: usize,
    /// `max_i |value_i - mean(x0)|`.
    pub max_deviation: f64,
}

/// Metropolis-Hastings weight matrix in sparse row form.
///
/// `W_ij = 1 / (1 + max(d_i, d_j))` on edges and `W_ii = 1 - sum_j W_ij`.
/// `W` is symmetric and doubly stochastic.
#[derive(Debug, Clone)]
pub struct Metropolis {
    self_weight: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    edges: Vec<(usize, usize)>,
}

impl Metropolis {
    pub fn new(graph: &Graph) -> Self {
        let m = graph.vertex_count();
        let mut rows = Vec::with_capacity(m);
        let mut self_weight = Vec::with_capacity(m);
        for i in 0..m {
            let di = graph.degree(i);
            let row: Vec<(usize, f64)> = graph
                .neighbors(i)
                .iter()
                .map(|&j| (j, 1.0 / (1.0 + di.max(graph.degree(j)) as f64)))
                .collect();
            self_weight.push(1.0 - row.iter().map(|(_, w)| w).sum::<f64>());
            rows.push(row);
        }
        Self {
            self_weight,
            rows,
            edges: graph.edges(),
        }
    }

    /// One synchronous round: every vertex reads only the previous round.
    pub fn step(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.self_weight[i] * x[i]
                + self.rows[i].iter().map(|&(j, w)| w * x[j]).sum::<f64>();
        }
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.self_weight[i];
        }
        self.rows[i]
            .iter()
            .find(|&&(k, _)| k == j)
            .map_or(0.0, |&(_, w)| w)
    }

    fn max_edge_disagreement(&self, x: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|&(u, v)| (x[u] - x[v]).abs())
            .fold(0.0, f64::max)
    }

    /// Runs rounds from `x0` until `stop` is satisfied at tolerance `tol`.
    ///
    /// `tol` is absolute while every initial state has magnitude at most 1,
    /// and is scaled by the largest initial magnitude beyond that, so that
    /// large states are not held to a tolerance finer than their rounding.
    pub fn run(
        &self,
        x0: &[f64],
        tol: f64,
        max_iter: usize,
        stop: StopRule,
    ) -> Result<ConsensusResult> {
        let m = self.rows.len();
        if x0.len() != m {
            return Err(Error::Usage(format!(
                "consensus over {} values on {m} vertices",
                x0.len()
            )));
        }
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::invalid("consensus_tol", "must be > 0"));
        }
        let mean = x0.iter().sum::<f64>() / m as f64;
        let deviation = |x: &[f64]| x.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        let tol = tol * x0.iter().fold(1.0, |a: f64, v| a.max(v.abs()));
        let edge_tol = if m > 1 { tol / (m - 1) as f64 } else { tol };
        let done = |x: &[f64]| match stop {
            StopRule::Oracle => deviation(x) <= tol,
            StopRule::Local => self.max_edge_disagreement(x) <= edge_tol,
        };

        let mut x = x0.to_vec();
        let mut next = vec![0.0; m];
        let mut iterations = 0;
        while !done(&x) {
            if iterations == max_iter {
                return Err(Error::ConsensusNonConvergence {
                    iterations,
                    max_deviation: deviation(&x),
                    last_state: x,
                });
            }
            self.step(&x, &mut next);
            std::mem::swap(&mut x, &mut next);
            iterations += 1;
        }
        Ok(ConsensusResult {
            max_deviation: deviation(&x),
            values: x,
            iterations,
        })
    }
}

/// Average consensus over `graph` from initial states `x0`.
pub fn consensus_average(
    graph: &Graph,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
    stop: StopRule,
) -> Result<ConsensusResult> {
    Metropolis::new(graph).run(x0, tol, max_iter, stop)
}
