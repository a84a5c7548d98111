//! Intrinsic triangle meshes: connectivity, edge lengths and region tags,
//! plus flat test meshes (unit torus, annulus) and a plain-text export.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::hypgeom::HPoint;

/// Where a vertex lives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    /// Inside the collar with the given index, at cylinder coordinates
    /// `(rho, theta)`, with `theta ∈ [0, 1)`.
    Collar { collar: usize, rho: f64, theta: f64 },
    /// In the thick part, at chart point `z` of hexagon `hexagon` (0 or 1; the
    /// second hexagon is stored by the mirror image of its point) of a pants.
    Thick { pants: usize, hexagon: u8, z: HPoint },
    /// A point of a flat test mesh.
    Flat { x: f64, y: f64 },
}

/// Fermi coordinates of a vertex relative to the core geodesic of the cuff
/// region it was generated in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CuffCoord {
    pub cuff: usize,
    pub rho: f64,
    pub t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    pub region: Region,
    pub chart: Option<CuffCoord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    Hyperbolic,
    Flat,
}

#[derive(Clone, Debug)]
pub struct TriMesh {
    pub geometry: Geometry,
    pub vertices: Vec<Vertex>,
    pub triangles: Vec<[usize; 3]>,
    /// Sorted vertex pairs `(a, b)` with `a < b`.
    pub edges: Vec<[usize; 2]>,
    pub edge_lengths: Vec<f64>,
    /// `tri_edges[f][i]` is the edge opposite corner `i` of triangle `f`.
    pub tri_edges: Vec<[usize; 3]>,
}

/// Incremental construction with one length per undirected edge.
#[derive(Debug)]
pub struct MeshBuilder {
    geometry: Geometry,
    vertices: Vec<Vertex>,
    triangles: Vec<[usize; 3]>,
    lengths: BTreeMap<(usize, usize), f64>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl MeshBuilder {
    pub fn new(geometry: Geometry) -> Self {
        Self {
            geometry,
            vertices: Vec::new(),
            triangles: Vec::new(),
            lengths: BTreeMap::new(),
        }
    }

    pub fn add_vertex(&mut self, v: Vertex) -> usize {
        self.vertices.push(v);
        self.vertices.len() - 1
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.lengths.contains_key(&key(a, b))
    }

    /// Records the length of edge `ab` unless it is already known.
    pub fn set_length(&mut self, a: usize, b: usize, len: f64) {
        self.lengths.entry(key(a, b)).or_insert(len);
    }

    /// Adds a triangle; `len` supplies lengths for edges not seen before.
    pub fn add_triangle(&mut self, t: [usize; 3], mut len: impl FnMut(usize, usize) -> f64) {
        for i in 0..3 {
            let (a, b) = (t[i], t[(i + 1) % 3]);
            if !self.has_edge(a, b) {
                let l = len(a, b);
                self.lengths.insert(key(a, b), l);
            }
        }
        self.triangles.push(t);
    }

    pub fn finish(self) -> Result<TriMesh> {
        let mut index = BTreeMap::new();
        let mut edges = Vec::with_capacity(self.lengths.len());
        let mut edge_lengths = Vec::with_capacity(self.lengths.len());
        for (i, (&(a, b), &l)) in self.lengths.iter().enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::InvalidLength(l));
            }
            index.insert((a, b), i);
            edges.push([a, b]);
            edge_lengths.push(l);
        }
        let tri_edges = self
            .triangles
            .iter()
            .map(|t| {
                let e = |a: usize, b: usize| index[&key(a, b)];
                [e(t[1], t[2]), e(t[2], t[0]), e(t[0], t[1])]
            })
            .collect();
        Ok(TriMesh {
            geometry: self.geometry,
            vertices: self.vertices,
            triangles: self.triangles,
            edges,
            edge_lengths,
            tri_edges,
        })
    }
}

/// Hyperbolic triangle area from side lengths (L'Huilier form).
pub fn hyperbolic_triangle_area(a: f64, b: f64, c: f64) -> f64 {
    let s = 0.5 * (a + b + c);
    let p = (0.5 * s).tanh()
        * (0.5 * (s - a)).tanh()
        * (0.5 * (s - b)).tanh()
        * (0.5 * (s - c)).tanh();
    4.0 * p.max(0.0).sqrt().atan()
}

/// Euclidean triangle area from side lengths (Heron, stable ordering).
pub fn euclidean_triangle_area(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = s;
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.25 * p.max(0.0).sqrt()
}

impl TriMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn side_lengths(&self, f: usize) -> [f64; 3] {
        let e = self.tri_edges[f];
        [
            self.edge_lengths[e[0]],
            self.edge_lengths[e[1]],
            self.edge_lengths[e[2]],
        ]
    }

    /// Checks the strict triangle inequality on every face.
    pub fn check_triangles(&self) -> Result<()> {
        for f in 0..self.triangles.len() {
            let [a, b, c] = self.side_lengths(f);
            if !(a < b + c && b < a + c && c < a + b) {
                return Err(Error::DegenerateTriangle(f));
            }
        }
        Ok(())
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    /// Face areas under the mesh's own geometry.
    pub fn areas(&self) -> Result<Vec<f64>> {
        self.check_triangles()?;
        Ok((0..self.triangles.len())
            .map(|f| {
                let [a, b, c] = self.side_lengths(f);
                match self.geometry {
                    Geometry::Hyperbolic => hyperbolic_triangle_area(a, b, c),
                    Geometry::Flat => euclidean_triangle_area(a, b, c),
                }
            })
            .collect())
    }

    pub fn euclidean_areas(&self) -> Result<Vec<f64>> {
        self.check_triangles()?;
        Ok((0..self.triangles.len())
            .map(|f| {
                let [a, b, c] = self.side_lengths(f);
                euclidean_triangle_area(a, b, c)
            })
            .collect())
    }

    pub fn total_area(&self) -> Result<f64> {
        Ok(self.areas()?.iter().sum())
    }

    /// Smallest corner angle in degrees, from the Euclidean law of cosines.
    pub fn min_angle_deg(&self) -> f64 {
        let mut m = 180.0f64;
        for f in 0..self.triangles.len() {
            let [a, b, c] = self.side_lengths(f);
            for (x, y, z) in [(a, b, c), (b, c, a), (c, a, b)] {
                let cos = ((y * y + z * z - x * x) / (2.0 * y * z)).clamp(-1.0, 1.0);
                m = m.min(cos.acos().to_degrees());
            }
        }
        m
    }

    /// Number of faces on each edge.
    pub fn edge_face_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.edges.len()];
        for te in &self.tri_edges {
            for &e in te {
                c[e] += 1;
            }
        }
        c
    }

    /// True when every edge borders exactly two faces (closed surface).
    pub fn is_closed(&self) -> bool {
        self.edge_face_counts().iter().all(|&c| c == 2)
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut on = vec![false; self.vertices.len()];
        for (e, &c) in self.edges.iter().zip(&self.edge_face_counts()) {
            if c == 1 {
                on[e[0]] = true;
                on[e[1]] = true;
            }
        }
        (0..on.len()).filter(|&i| on[i]).collect()
    }

    /// Neighbour lists with edge lengths, in ascending neighbour order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (e, &l) in self.edges.iter().zip(&self.edge_lengths) {
            adj[e[0]].push((e[1], l));
            adj[e[1]].push((e[0], l));
        }
        for a in &mut adj {
            a.sort_by_key(|x| x.0);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; adj.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(w, _) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == adj.len()
    }

    /// Writes the plain-text export described in `docs/formats.md`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "hyplab-mesh 1")?;
        writeln!(w, "vertices {}", self.vertices.len())?;
        for (i, v) in self.vertices.iter().enumerate() {
            match v.region {
                Region::Collar { collar, rho, theta } => {
                    writeln!(w, "v {i} C {collar} {rho} {theta}")?
                }
                Region::Thick { pants, hexagon, z } => {
                    writeln!(w, "v {i} T {pants} {hexagon} {} {}", z.re, z.im)?
                }
                Region::Flat { x, y } => writeln!(w, "v {i} F {x} {y}")?,
            }
        }
        writeln!(w, "triangles {}", self.triangles.len())?;
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(w, "f {i} {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "edges {}", self.edges.len())?;
        for (i, (e, l)) in self.edges.iter().zip(&self.edge_lengths).enumerate() {
            writeln!(w, "e {i} {} {} {l}", e[0], e[1])?;
        }
        Ok(())
    }
}

fn flat_vertex(x: f64, y: f64) -> Vertex {
    Vertex {
        region: Region::Flat { x, y },
        chart: None,
    }
}

/// Unit-square flat torus on an `n × n` grid, each square split along the
/// same diagonal.
pub fn flat_torus(n: usize) -> Result<TriMesh> {
    if n < 3 {
        return Err(Error::Precondition("flat torus needs n >= 3".into()));
    }
    let h = 1.0 / n as f64;
    let mut b = MeshBuilder::new(Geometry::Flat);
    for j in 0..n {
        for i in 0..n {
            b.add_vertex(flat_vertex(i as f64 * h, j as f64 * h));
        }
    }
    let id = |i: usize, j: usize| (j % n) * n + (i % n);
    let diag = std::f64::consts::SQRT_2 * h;
    for j in 0..n {
        for i in 0..n {
            let (a, bb, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            // edge lengths from the lattice offsets
            let mut len = |x: usize, y: usize| {
                let near = |p: usize, q: usize| (p == x && q == y) || (p == y && q == x);
                if near(a, c) {
                    diag
                } else {
                    h
                }
            };
            b.add_triangle([a, bb, c], &mut len);
            b.add_triangle([a, c, d], &mut len);
        }
    }
    b.finish()
}

/// Flat annulus `r_in ≤ |z| ≤ r_out` on a conformal polar grid: radii in
/// geometric progression so that cells are nearly square.
pub fn flat_annulus(r_in: f64, r_out: f64, n_theta: usize) -> Result<(TriMesh, Vec<usize>, Vec<usize>)> {
    if !(r_in > 0.0 && r_out > r_in) || n_theta < 6 {
        return Err(Error::Precondition("invalid annulus parameters".into()));
    }
    let dtheta = 2.0 * std::f64::consts::PI / n_theta as f64;
    let n_r = ((r_out / r_in).ln() / dtheta).round().max(1.0) as usize;
    let q = (r_out / r_in).powf(1.0 / n_r as f64);
    let mut b = MeshBuilder::new(Geometry::Flat);
    let mut pos = Vec::new();
    for j in 0..=n_r {
        let r = if j == n_r { r_out } else { r_in * q.powi(j as i32) };
        for i in 0..n_theta {
            // stagger alternate rings by half a step
            let th = (i as f64 + 0.5 * (j % 2) as f64) * dtheta;
            let (x, y) = (r * th.cos(), r * th.sin());
            pos.push((x, y));
            b.add_vertex(flat_vertex(x, y));
        }
    }
    let id = |i: usize, j: usize| j * n_theta + (i % n_theta);
    let dist = |a: usize, c: usize| {
        let (p, q) = (pos[a], pos[c]);
        (p.0 - q.0).hypot(p.1 - q.1)
    };
    for j in 0..n_r {
        for i in 0..n_theta {
            // ring j is shifted by 0 or half a step relative to ring j + 1
            let (a, bb) = (id(i, j), id(i + 1, j));
            let (c, d) = if j % 2 == 0 {
                (id(i, j + 1), id(i + 1, j + 1))
            } else {
                (id(i + 1, j + 1), id(i + 2, j + 1))
            };
            b.add_triangle([a, bb, c], dist);
            b.add_triangle([bb, d, c], dist);
        }
    }
    let inner = (0..n_theta).map(|i| id(i, 0)).collect();
    let outer = (0..n_theta).map(|i| id(i, n_r)).collect();
    Ok((b.finish()?, inner, outer))
}
