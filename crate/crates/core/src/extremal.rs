//! Weighted distance `d_w` and discrete extremal length between metric discs.

use std::io::Write;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::collar::trunc_inj;
use crate::error::{Error, Result};
use crate::graphana::shortest_distances;
use crate::linalg::{pcg, CsrMatrix};
use crate::mesh::TriMesh;
use crate::pants::SurfaceModel;
use crate::spectral::{csv_err, FemSystem};

/// Relative residual for the Dirichlet solves.
pub const SOLVE_TOL: f64 = 1e-10;

/// `ι̂` at every mesh vertex.
pub fn vertex_iota(mesh: &TriMesh, model: &SurfaceModel) -> Result<Vec<f64>> {
    mesh.vertices.iter().map(|v| trunc_inj(&v.region, model)).collect()
}

/// Edge weights `len · (1/ι̂(a) + 1/ι̂(b)) / 2`, as neighbour lists.
pub fn weighted_adjacency(mesh: &TriMesh, iota: &[f64]) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); mesh.vertex_count()];
    for (e, &l) in mesh.edges.iter().zip(&mesh.edge_lengths) {
        let w = l * 0.5 * (1.0 / iota[e[0]] + 1.0 / iota[e[1]]);
        adj[e[0]].push((e[1], w));
        adj[e[1]].push((e[0], w));
    }
    adj
}

/// Weight of an explicit vertex path under the same trapezoid rule.
pub fn path_weight(mesh: &TriMesh, iota: &[f64], path: &[usize]) -> Option<f64> {
    let adj = mesh.adjacency();
    let mut total = 0.0;
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let &(_, l) = adj[a].iter().find(|(v, _)| *v == b)?;
        total += l * 0.5 * (1.0 / iota[a] + 1.0 / iota[b]);
    }
    Some(total)
}

/// Holds the weighted graph so that repeated queries reuse it.
pub struct WeightedDistance {
    adj: Vec<Vec<(usize, f64)>>,
}

impl WeightedDistance {
    pub fn new(mesh: &TriMesh, model: &SurfaceModel) -> Result<Self> {
        if !mesh.is_connected() {
            return Err(Error::Unreachable(0));
        }
        let iota = vertex_iota(mesh, model)?;
        Ok(Self {
            adj: weighted_adjacency(mesh, &iota),
        })
    }

    pub fn from_source(&self, x: usize) -> Vec<f64> {
        shortest_distances(&self.adj, &[(x, 0.0)])
    }

    pub fn between(&self, x: usize, y: usize) -> Result<f64> {
        let d = self.from_source(x)[y];
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::Unreachable(y))
        }
    }
}

/// `d_w(x, y)`, the shortest mesh path under the `1/ι̂` weight.
pub fn weighted_distance(mesh: &TriMesh, model: &SurfaceModel, x: usize, y: usize) -> Result<f64> {
    WeightedDistance::new(mesh, model)?.between(x, y)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscPair {
    pub x: usize,
    pub y: usize,
    pub r_x: f64,
    pub r_y: f64,
    /// Graph-metric balls of radius `r_x`, `r_y`; these carry the Dirichlet
    /// data.
    pub ball_x: Vec<usize>,
    pub ball_y: Vec<usize>,
    /// Vertices of each ball with a neighbour outside it.
    pub boundary_x: Vec<usize>,
    pub boundary_y: Vec<usize>,
}

fn ball(adj: &[Vec<(usize, f64)>], dist: &[f64], r: f64) -> (Vec<usize>, Vec<usize>) {
    let inside: Vec<usize> = (0..dist.len()).filter(|&v| dist[v] <= r).collect();
    let boundary = inside
        .iter()
        .copied()
        .filter(|&v| adj[v].iter().any(|&(w, _)| dist[w] > r))
        .collect();
    (inside, boundary)
}

impl DiscPair {
    /// Builds and validates a pair. `iota` is `ι̂` per vertex and `adj` the
    /// mesh adjacency with hyperbolic edge lengths.
    pub fn new(adj: &[Vec<(usize, f64)>], iota: &[f64], x: usize, y: usize, r_x: f64, r_y: f64) -> Result<Self> {
        let n = adj.len();
        if x >= n || y >= n {
            return Err(Error::DegeneratePair(format!("vertex out of range ({x}, {y})")));
        }
        if !(r_x > 0.0 && r_y > 0.0) {
            return Err(Error::DegeneratePair("radii must be positive".into()));
        }
        let slack = 1.0 + 1e-12;
        if r_x > 0.5 * iota[x] * slack || r_y > 0.5 * iota[y] * slack {
            return Err(Error::DegeneratePair(format!(
                "radius exceeds half the truncated injectivity radius ({r_x} vs {}, {r_y} vs {})",
                0.5 * iota[x],
                0.5 * iota[y]
            )));
        }
        let dx = shortest_distances(adj, &[(x, 0.0)]);
        if dx[y] < r_x + r_y {
            return Err(Error::DegeneratePair(format!(
                "centres at distance {} < r_x + r_y = {}",
                dx[y],
                r_x + r_y
            )));
        }
        let dy = shortest_distances(adj, &[(y, 0.0)]);
        let (ball_x, boundary_x) = ball(adj, &dx, r_x);
        let (ball_y, boundary_y) = ball(adj, &dy, r_y);
        let mut mark = vec![0u8; n];
        for &v in &ball_x {
            mark[v] = 1;
        }
        for &v in &ball_y {
            if mark[v] == 1 || adj[v].iter().any(|&(w, _)| mark[w] == 1) {
                return Err(Error::DegeneratePair("the two discs touch".into()));
            }
        }
        Ok(Self {
            x,
            y,
            r_x,
            r_y,
            ball_x,
            ball_y,
            boundary_x,
            boundary_y,
        })
    }

    pub fn swapped(&self) -> Self {
        Self {
            x: self.y,
            y: self.x,
            r_x: self.r_y,
            r_y: self.r_x,
            ball_x: self.ball_y.clone(),
            ball_y: self.ball_x.clone(),
            boundary_x: self.boundary_y.clone(),
            boundary_y: self.boundary_x.clone(),
        }
    }
}

/// Dirichlet energy of the discrete harmonic function equal to 1 on `ones`
/// and 0 on `zeros`, solved by preconditioned CG on the free vertices.
pub fn dirichlet_energy(stiffness: &CsrMatrix, ones: &[usize], zeros: &[usize]) -> Result<f64> {
    let n = stiffness.n;
    let mut fixed = vec![None; n];
    for &v in zeros {
        fixed[v] = Some(0.0);
    }
    for &v in ones {
        if fixed[v].is_some() {
            return Err(Error::DegeneratePair("a vertex carries both boundary values".into()));
        }
        fixed[v] = Some(1.0);
    }
    if ones.is_empty() || zeros.is_empty() {
        return Err(Error::DegeneratePair("empty boundary set".into()));
    }
    let free: Vec<usize> = (0..n).filter(|&v| fixed[v].is_none()).collect();
    let mut u: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    if !free.is_empty() {
        let a = stiffness.submatrix(&free);
        // right-hand side −K_{FB} u_B, only the ones contribute
        let rhs: Vec<f64> = free
            .iter()
            .map(|&i| {
                -stiffness
                    .row(i)
                    .filter(|&(j, _)| fixed[j] == Some(1.0))
                    .map(|(_, v)| v)
                    .sum::<f64>()
            })
            .collect();
        let (x, _) = pcg(&a, &rhs, None, SOLVE_TOL, 20 * free.len() + 1000)?;
        for (&i, xi) in free.iter().zip(x) {
            u[i] = xi;
        }
    }
    Ok(stiffness.quad_form(&u))
}

/// `EL = 1 / E` for the Dirichlet problem with data 1 on the ball around `x`
/// and 0 on the ball around `y`.
pub fn discrete_extremal_length(system: &FemSystem, pair: &DiscPair) -> Result<f64> {
    let e = dirichlet_energy(&system.stiffness, &pair.ball_x, &pair.ball_y)?;
    if !(e > 0.0) {
        return Err(Error::DegeneratePair(format!("nonpositive energy {e}")));
    }
    Ok(1.0 / e)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thm14Row {
    pub x_id: usize,
    pub y_id: usize,
    pub r_x: f64,
    pub r_y: f64,
    pub d_w: f64,
    #[serde(rename = "EL")]
    pub el: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thm14Report {
    pub rows: Vec<Thm14Row>,
    pub max_ratio: f64,
    /// Pearson correlation between `EL` and `d_w` over the rows.
    pub correlation: f64,
    pub attempts: usize,
}

impl Thm14Report {
    /// CSV with the fixed columns `x_id,y_id,r_x,r_y,d_w,EL,bound,ratio`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        for r in &self.rows {
            wr.serialize(r).map_err(csv_err)?;
        }
        if self.rows.is_empty() {
            wr.write_record(["x_id", "y_id", "r_x", "r_y", "d_w", "EL", "bound", "ratio"])
                .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Samples disc pairs with `r = ι̂/2` at both centres and compares the
/// discrete extremal length with `d_w + log(ι̂(x)/r_x) + log(ι̂(y)/r_y)`.
///
/// A sampled pair is kept only if it is valid and each ball contains every
/// mesh neighbour of its centre, so the disc is resolved by the mesh.
pub fn verify_thm14(
    model: &SurfaceModel,
    mesh: &TriMesh,
    system: &FemSystem,
    samples: usize,
    seed: u64,
) -> Result<Thm14Report> {
    let iota = vertex_iota(mesh, model)?;
    let adj = mesh.adjacency();
    let wd = WeightedDistance {
        adj: weighted_adjacency(mesh, &iota),
    };
    let n = mesh.vertex_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let resolved = |v: usize, r: f64| adj[v].iter().all(|&(_, l)| l <= r);
    let mut pairs = Vec::new();
    let mut attempts = 0;
    let cap = 50 * samples.max(1);
    while pairs.len() < samples && attempts < cap {
        attempts += 1;
        let x = rng.random_range(0..n);
        let y = rng.random_range(0..n);
        let (r_x, r_y) = (0.5 * iota[x], 0.5 * iota[y]);
        if x == y || !resolved(x, r_x) || !resolved(y, r_y) {
            continue;
        }
        if let Ok(p) = DiscPair::new(&adj, &iota, x, y, r_x, r_y) {
            pairs.push(p);
        }
    }
    if pairs.is_empty() {
        return Err(Error::Sampling);
    }
    let rows = pairs
        .par_iter()
        .map(|p| {
            let el = discrete_extremal_length(system, p)?;
            let d_w = wd.between(p.x, p.y)?;
            let bound = d_w + (iota[p.x] / p.r_x).ln() + (iota[p.y] / p.r_y).ln();
            Ok(Thm14Row {
                x_id: p.x,
                y_id: p.y,
                r_x: p.r_x,
                r_y: p.r_y,
                d_w,
                el,
                bound,
                ratio: el / bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let correlation = pearson(
        &rows.iter().map(|r| r.el).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.d_w).collect::<Vec<_>>(),
    );
    Ok(Thm14Report {
        rows,
        max_ratio,
        correlation,
        attempts,
    })
}
