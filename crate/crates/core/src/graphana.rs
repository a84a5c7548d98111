//! Weighted graphs: lazy random walk spectra, discrete heat-kernel bounds,
//! pants conductance networks and effective resistance.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, CsrMatrix};
use crate::pants::PantsGraph;

/// Largest graph handled by the dense eigensolver.
pub const DENSE_LIMIT: usize = 2048;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    pub n: usize,
    /// `(u, v, c)` with conductance `c > 0`.
    pub edges: Vec<(usize, usize, f64)>,
    /// Common degree when the graph is simple, unweighted and regular.
    pub regular_degree: Option<usize>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut simple = true;
        for (i, &(u, v, c)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge {i} refers to a missing vertex")));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("edge {i} is a self-loop")));
            }
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::InvalidGraph(format!("edge {i} has conductance {c}")));
            }
            simple &= c == 1.0 && seen.insert((u.min(v), u.max(v)));
        }
        let mut deg = vec![0usize; n];
        for &(u, v, _) in &edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        let regular_degree = (simple && deg.iter().all(|&d| d == deg[0]) && deg[0] > 0).then_some(deg[0]);
        let g = Self {
            n,
            edges,
            regular_degree,
        };
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    pub fn unweighted(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(n, edges.iter().map(|&(u, v)| (u, v, 1.0)).collect())
    }

    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v, c) in &self.edges {
            adj[u].push((v, c));
            adj[v].push((u, c));
        }
        adj
    }

    fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(w, _) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Weighted Laplacian `D − A` with conductances as weights.
    pub fn laplacian(&self) -> CsrMatrix {
        let mut t = Vec::with_capacity(4 * self.edges.len());
        for &(u, v, c) in &self.edges {
            t.push((u, u, c));
            t.push((v, v, c));
            t.push((u, v, -c));
            t.push((v, u, -c));
        }
        CsrMatrix::from_triplets(self.n, t)
    }

    /// Same graph without edge `i`.
    pub fn without_edge(&self, i: usize) -> Result<Self> {
        let mut e = self.edges.clone();
        e.remove(i);
        Self::new(self.n, e)
    }
}

pub fn cycle(n: usize) -> Result<WeightedGraph> {
    if n < 3 {
        return Err(Error::InvalidGraph(format!("cycle needs n >= 3, got {n}")));
    }
    WeightedGraph::unweighted(n, &(0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>())
}

pub fn complete(n: usize) -> Result<WeightedGraph> {
    let e: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    WeightedGraph::unweighted(n, &e)
}

/// `m` cliques of size `s` joined in a cycle by single edges. Inside each
/// clique the edge between its two connector vertices is removed, so the
/// graph stays `(s − 1)`-regular.
pub fn clique_cycle(m: usize, s: usize) -> Result<WeightedGraph> {
    if m < 3 || s < 4 {
        return Err(Error::InvalidGraph(format!("clique cycle needs m >= 3 and s >= 4, got ({m}, {s})")));
    }
    let mut e = Vec::new();
    for c in 0..m {
        let base = c * s;
        for i in 0..s {
            for j in i + 1..s {
                if (i, j) != (0, 1) {
                    e.push((base + i, base + j));
                }
            }
        }
        // vertex 1 of clique c joins vertex 0 of the next clique
        e.push((base + 1, ((c + 1) % m) * s));
    }
    WeightedGraph::unweighted(m * s, &e)
}

fn lazy_walk_matrix(g: &WeightedGraph) -> Result<DMatrix<f64>> {
    let d = g.regular_degree.ok_or_else(|| {
        Error::Setting("the lazy walk analysis needs a simple unweighted regular graph".into())
    })?;
    if g.n > DENSE_LIMIT {
        return Err(Error::TooLarge(g.n));
    }
    let mut p = DMatrix::from_diagonal_element(g.n, g.n, 0.5);
    let w = 0.5 / d as f64;
    for &(u, v, _) in &g.edges {
        p[(u, v)] += w;
        p[(v, u)] += w;
    }
    Ok(p)
}

/// Ascending eigenvalues of `I − P` for the lazy random walk `P`.
pub fn lazy_walk_spectrum(g: &WeightedGraph) -> Result<Vec<f64>> {
    let p = lazy_walk_matrix(g)?;
    let l = DMatrix::identity(g.n, g.n) - p;
    let mut ev: Vec<f64> = SymmetricEigen::new(l).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteBoundsReport {
    pub n: usize,
    /// Largest `|Σ_x P^t(x,x) − Σ_i (1 − λ_i)^t| / n` over the checked `t`.
    pub trace_residual: f64,
    /// `min_{1≤k<n} λ_k n² / k²` and its minimizer.
    pub min_ratio: f64,
    pub argmin_k: usize,
    /// `max_{1≤t≤t_max} √t · |Σ_i (1 − λ_i)^t − 1| / n` and its maximizer.
    pub heat_constant: f64,
    pub argmax_t: usize,
    pub eigenvalues: Vec<f64>,
}

/// Times at which the trace identity is checked against explicit powers of
/// `P`: every `t ≤ 16` and the powers of two up to `t_max`.
fn trace_times(t_max: usize) -> Vec<usize> {
    let mut ts: Vec<usize> = (1..=t_max.min(16)).collect();
    let mut t = 32;
    while t <= t_max {
        ts.push(t);
        t *= 2;
    }
    ts
}

pub fn heat_statistic(eigenvalues: &[f64], t: usize) -> f64 {
    let n = eigenvalues.len() as f64;
    let s: f64 = eigenvalues.iter().map(|l| (1.0 - l).powi(t as i32)).sum();
    (s - 1.0).abs() / n
}

pub fn check_discrete_bounds(g: &WeightedGraph, t_max: usize) -> Result<DiscreteBoundsReport> {
    if t_max == 0 {
        return Err(Error::Precondition("t_max must be at least 1".into()));
    }
    let p = lazy_walk_matrix(g)?;
    let ev = lazy_walk_spectrum(g)?;
    let n = g.n;

    let times = trace_times(t_max);
    let mut power = p.clone();
    let mut current = 1;
    let mut trace_residual: f64 = 0.0;
    for &t in &times {
        while current < t {
            if 2 * current <= t {
                power = &power * &power;
                current *= 2;
            } else {
                power = &power * &p;
                current += 1;
            }
        }
        let direct = power.trace();
        let spectral: f64 = ev.iter().map(|l| (1.0 - l).powi(t as i32)).sum();
        trace_residual = trace_residual.max((direct - spectral).abs() / n as f64);
    }

    let (argmin_k, min_ratio) = (1..n)
        .map(|k| (k, ev[k] * (n * n) as f64 / (k * k) as f64))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, f64::NAN));
    let (argmax_t, heat_constant) = (1..=t_max)
        .map(|t| (t, (t as f64).sqrt() * heat_statistic(&ev, t)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    Ok(DiscreteBoundsReport {
        n,
        trace_residual,
        min_ratio,
        argmin_k,
        heat_constant,
        argmax_t,
        eigenvalues: ev,
    })
}

impl DiscreteBoundsReport {
    /// CSV with columns `metric,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let rows = [
            ("n", self.n as f64),
            ("trace_residual", self.trace_residual),
            ("min_ratio", self.min_ratio),
            ("argmin_k", self.argmin_k as f64),
            ("heat_constant", self.heat_constant),
            ("argmax_t", self.argmax_t as f64),
        ];
        wr.write_record(["metric", "value"]).map_err(crate::spectral::csv_err)?;
        for (k, v) in rows {
            wr.write_record([k.to_string(), v.to_string()]).map_err(crate::spectral::csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Pants as vertices, one edge per gluing of two different pants with
/// conductance equal to the cuff length, before merging. Gluings of a pants
/// to itself are skipped.
pub fn pants_edges(graph: &PantsGraph) -> Vec<(usize, usize, f64)> {
    graph
        .gluings
        .iter()
        .filter(|g| g.a.pants != g.b.pants)
        .map(|g| (g.a.pants.min(g.b.pants), g.a.pants.max(g.b.pants), g.length))
        .collect()
}

/// Conductance network of a pants graph, parallel edges merged by adding
/// conductances.
pub fn pants_network(graph: &PantsGraph) -> Result<WeightedGraph> {
    let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (u, v, c) in pants_edges(graph) {
        *merged.entry((u, v)).or_insert(0.0) += c;
    }
    WeightedGraph::new(
        graph.pants_count(),
        merged.into_iter().map(|((u, v), c)| (u, v, c)).collect(),
    )
}

/// Effective resistance between `u` and `v`, from one factorization of the
/// Laplacian grounded at `v`.
pub fn effective_resistance(g: &WeightedGraph, u: usize, v: usize) -> Result<f64> {
    if u >= g.n || v >= g.n {
        return Err(Error::InvalidGraph(format!("vertex out of range ({u}, {v})")));
    }
    if u == v {
        return Ok(0.0);
    }
    let keep: Vec<usize> = (0..g.n).filter(|&i| i != v).collect();
    let l = g.laplacian().submatrix(&keep);
    let mut b = vec![0.0; keep.len()];
    let iu = if u < v { u } else { u - 1 };
    b[iu] = 1.0;
    let x = Cholesky::new(&l)?.solve(&b);
    Ok(x[iu])
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from several sources with given starting offsets. Unreached
/// vertices get `+∞`.
pub fn shortest_distances(adj: &[Vec<(usize, f64)>], sources: &[(usize, f64)]) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    for &(s, d0) in sources {
        if d0 < dist[s] {
            dist[s] = d0;
            heap.push(Entry(d0, s));
        }
    }
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, len) in &adj[v] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Entry(nd, w));
            }
        }
    }
    dist
}

/// Smallest sum of edge resistances `1/c` over `u`–`v` paths.
pub fn path_resistance(g: &WeightedGraph, u: usize, v: usize) -> Result<f64> {
    let adj: Vec<Vec<(usize, f64)>> = g
        .adjacency()
        .into_iter()
        .map(|a| a.into_iter().map(|(w, c)| (w, 1.0 / c)).collect())
        .collect();
    let d = shortest_distances(&adj, &[(u, 0.0)])[v];
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Unreachable(v))
    }
}

/// Parses the edge-list text format: one `u v c` triple per line, blank
/// lines and `#` comments ignored, vertex count inferred as `max id + 1`.
pub fn parse_edge_list(text: &str) -> Result<WeightedGraph> {
    let mut edges = Vec::new();
    let mut n = 0;
    for (ln, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let fields: Vec<(usize, &str)> = body
            .split_whitespace()
            .map(|f| (f.as_ptr() as usize - body.as_ptr() as usize + 1, f))
            .collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: ln + 1,
                column: 1,
                message: format!("expected `u v c`, found {} fields", fields.len()),
            });
        }
        let int = |(col, f): (usize, &str)| {
            f.parse::<usize>().map_err(|e| Error::Parse {
                line: ln + 1,
                column: col,
                message: format!("bad vertex id `{f}`: {e}"),
            })
        };
        let u = int(fields[0])?;
        let v = int(fields[1])?;
        let c = fields[2].1.parse::<f64>().map_err(|e| Error::Parse {
            line: ln + 1,
            column: fields[2].0,
            message: format!("bad conductance `{}`: {e}", fields[2].1),
        })?;
        n = n.max(u + 1).max(v + 1);
        edges.push((u, v, c));
    }
    WeightedGraph::new(n, edges)
}
