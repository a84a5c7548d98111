//! Intrinsic meshing of a glued-pants surface.
//!
//! Each cuff owns the region of the surface closer to it than to the other
//! cuffs of the two pants it bounds. Within a pants, these regions are cut
//! apart by the perpendicular bisectors of the seams, which meet at the
//! incenter of each hexagon. Every cuff region is an annulus with Fermi
//! coordinates `(rho, t)` around its core geodesic, `t ∈ [0, ℓ)`, and is
//! filled with rings `rho = s · R(t)` joined by strips of triangles. The
//! bisector polylines are sampled once and shared by both neighbouring
//! regions, and every edge length is the exact hyperbolic distance between
//! its endpoints.

use crate::error::{Error, Result};
use crate::hypgeom::{dist_h, HPoint};
use crate::mesh::{CuffCoord, Geometry, MeshBuilder, Region, TriMesh, Vertex};
use crate::pants::{Side, SlotRef, SurfaceModel};

/// Largest mesh size accepted.
pub const MAX_H: f64 = 0.3;

/// Minimum number of vertices on any ring.
pub fn ring_minimum(h: f64) -> usize {
    ((0.8 / h).ceil() as usize).max(8)
}

/// Distance between points given in Fermi coordinates about a closed
/// geodesic of length `ell`.
pub fn fermi_dist(r1: f64, t1: f64, r2: f64, t2: f64, ell: f64) -> f64 {
    let mut dt = (t1 - t2).rem_euclid(ell);
    if dt > 0.5 * ell {
        dt -= ell;
    }
    let a = (0.5 * dt).sinh();
    let b = (0.5 * (r1 - r2)).sinh();
    2.0 * (r1.cosh() * r2.cosh() * a * a + b * b).sqrt().asinh()
}

fn wrap(t: f64, ell: f64) -> f64 {
    let w = t.rem_euclid(ell);
    if w >= ell {
        0.0
    } else {
        w
    }
}

#[derive(Clone, Copy, Debug)]
struct RingPt {
    id: usize,
    rho: f64,
    t: f64,
}

/// Points and vertex ids of the bisector skeleton of one pants.
struct Skeleton {
    mid: [(usize, HPoint); 3],
    center: [usize; 2],
    center_pt: HPoint,
    /// `seg[hex][k]`: interior points of the bisector from midpoint `k` to
    /// the incenter of hexagon `hex`, in order from the midpoint.
    seg: [[Vec<(usize, HPoint)>; 3]; 2],
}

struct Ctx<'a> {
    model: &'a SurfaceModel,
    h: f64,
    n_min: usize,
    builder: MeshBuilder,
}

impl Ctx<'_> {
    fn slot_info(&self, pants: usize, slot: usize) -> (usize, Side, f64) {
        let (g, side) = self.model.graph.gluing_of(SlotRef { pants, slot });
        (g, side, self.model.graph.gluings[g].length)
    }

    /// Local Fermi coordinates of a hexagon-chart point relative to cuff
    /// `slot`, with `t` negated on the mirror hexagon.
    fn local(&self, pants: usize, slot: usize, hex: u8, z: HPoint) -> (f64, f64) {
        let (rho, t) = self.model.blocks[pants].chart.alt_frames[slot].fermi_coords(z);
        (rho, if hex == 0 { t } else { -t })
    }

    /// Cuff-region coordinates from local ones.
    fn to_region(side: Side, rho_l: f64, t_l: f64, ell: f64) -> (f64, f64) {
        match side {
            Side::A => (rho_l, wrap(t_l, ell)),
            Side::B => (-rho_l, wrap(-t_l, ell)),
        }
    }

    fn collar_tag(&self, g: usize, rho: f64, t: f64, ell: f64) -> Option<Region> {
        let c = self.model.cuff_collar[g]?;
        self.model.collars[c].contains(rho).then_some(Region::Collar {
            collar: c,
            rho,
            theta: wrap(t / ell, 1.0),
        })
    }

    /// A vertex on the skeleton of `pants`, adjacent to the cuff cells in
    /// `slots`.
    fn skeleton_vertex(&mut self, pants: usize, hex: u8, z: HPoint, slots: &[usize]) -> usize {
        let mut region = None;
        let mut chart = None;
        for &slot in slots {
            let (g, side, ell) = self.slot_info(pants, slot);
            let (rl, tl) = self.local(pants, slot, hex, z);
            let (rho, t) = Self::to_region(side, rl, tl, ell);
            if chart.is_none() {
                chart = Some(CuffCoord { cuff: g, rho, t });
            }
            if region.is_none() {
                region = self.collar_tag(g, rho, t, ell);
            }
        }
        let region = region.unwrap_or(Region::Thick {
            pants,
            hexagon: hex,
            z,
        });
        self.builder.add_vertex(Vertex { region, chart })
    }

    fn skeleton(&mut self, pants: usize) -> Result<Skeleton> {
        let chart = self.model.blocks[pants].chart;
        let o = self.model.blocks[pants].incenter;
        let mut mid = [(0, HPoint::I); 3];
        for (k, m) in mid.iter_mut().enumerate() {
            let z = chart.seam_midpoint(k).point();
            *m = (self.skeleton_vertex(pants, 0, z, &[k, (k + 1) % 3]), z);
        }
        let center = [
            self.skeleton_vertex(pants, 0, o, &[0, 1, 2]),
            self.skeleton_vertex(pants, 1, o, &[0, 1, 2]),
        ];
        let mut seg: [[Vec<(usize, HPoint)>; 3]; 2] = Default::default();
        for k in 0..3 {
            let frame = chart.bisector_frame(k);
            let len = dist_h(mid[k].1, o)?;
            let pieces = (len / self.h).ceil().max(1.0) as usize;
            for hex in 0..2u8 {
                for i in 1..pieces {
                    let z = frame.advance(len * i as f64 / pieces as f64).point();
                    let id = self.skeleton_vertex(pants, hex, z, &[k, (k + 1) % 3]);
                    seg[hex as usize][k].push((id, z));
                }
            }
        }
        Ok(Skeleton {
            mid,
            center,
            center_pt: o,
            seg,
        })
    }

    /// Boundary loop of the cell of cuff `slot` in `pants`, in cuff-region
    /// coordinates sorted by `t`.
    fn cell_boundary(&self, sk: &Skeleton, pants: usize, slot: usize) -> Vec<RingPt> {
        let (_, side, ell) = self.slot_info(pants, slot);
        let prev = (slot + 2) % 3;
        let mut pts: Vec<(usize, u8, HPoint)> = Vec::new();
        pts.push((sk.mid[slot].0, 0, sk.mid[slot].1));
        pts.extend(sk.seg[1][slot].iter().map(|&(id, z)| (id, 1, z)));
        pts.push((sk.center[1], 1, sk.center_pt));
        pts.extend(sk.seg[1][prev].iter().rev().map(|&(id, z)| (id, 1, z)));
        pts.push((sk.mid[prev].0, 0, sk.mid[prev].1));
        pts.extend(sk.seg[0][prev].iter().map(|&(id, z)| (id, 0, z)));
        pts.push((sk.center[0], 0, sk.center_pt));
        pts.extend(sk.seg[0][slot].iter().rev().map(|&(id, z)| (id, 0, z)));
        let mut ring: Vec<RingPt> = pts
            .into_iter()
            .map(|(id, hex, z)| {
                let (rl, tl) = self.local(pants, slot, hex, z);
                let (rho, t) = Self::to_region(side, rl, tl, ell);
                RingPt { id, rho, t }
            })
            .collect();
        ring.sort_by(|a, b| a.t.total_cmp(&b.t));
        ring
    }

    /// Tag of an interior point of the cell of `slot` in `pants`.
    fn interior_vertex(&mut self, pants: usize, slot: usize, rho: f64, t: f64) -> usize {
        let (g, side, ell) = self.slot_info(pants, slot);
        let region = self.collar_tag(g, rho, t, ell).unwrap_or_else(|| {
            let (rl, mut tl) = match side {
                Side::A => (rho, t),
                Side::B => (-rho, -t),
            };
            tl = tl.rem_euclid(ell);
            if tl > 0.5 * ell {
                tl -= ell;
            }
            let hex = if tl >= 0.0 { 0 } else { 1 };
            let z = self.model.blocks[pants].chart.alt_frames[slot].fermi_point(rl, tl.abs());
            Region::Thick {
                pants,
                hexagon: hex,
                z,
            }
        });
        self.builder.add_vertex(Vertex {
            region,
            chart: Some(CuffCoord { cuff: g, rho, t }),
        })
    }

    fn zipper(&mut self, inner: &[RingPt], outer: &[RingPt], ell: f64) {
        let (np, nq) = (inner.len(), outer.len());
        let d = |a: &RingPt, b: &RingPt| fermi_dist(a.rho, a.t, b.rho, b.t, ell);
        let circ = |a: f64, b: f64| {
            let x = (a - b).rem_euclid(ell);
            x.min(ell - x)
        };
        let j0 = (0..nq)
            .min_by(|&x, &y| circ(outer[x].t, inner[0].t).total_cmp(&circ(outer[y].t, inner[0].t)))
            .unwrap_or(0);
        let (mut a, mut b) = (0, 0);
        let mut pos = std::collections::HashMap::new();
        for p in inner.iter().chain(outer) {
            pos.insert(p.id, *p);
        }
        let len = |x: usize, y: usize| d(&pos[&x], &pos[&y]);
        while a < np || b < nq {
            let p = &inner[a % np];
            let p1 = &inner[(a + 1) % np];
            let q = &outer[(j0 + b) % nq];
            let q1 = &outer[(j0 + b + 1) % nq];
            let advance_inner = if a == np {
                false
            } else if b == nq {
                true
            } else {
                d(p1, q) < d(p, q1)
            };
            if advance_inner {
                self.builder.add_triangle([p.id, p1.id, q.id], len);
                a += 1;
            } else {
                self.builder.add_triangle([p.id, q1.id, q.id], len);
                b += 1;
            }
        }
    }
}

/// Piecewise-linear periodic interpolation of the boundary radius.
fn boundary_radius(boundary: &[RingPt], t: f64, ell: f64) -> f64 {
    let n = boundary.len();
    let idx = boundary.partition_point(|p| p.t <= t);
    let (lo, hi) = if idx == 0 {
        (&boundary[n - 1], &boundary[0])
    } else if idx == n {
        (&boundary[n - 1], &boundary[0])
    } else {
        (&boundary[idx - 1], &boundary[idx])
    };
    let t0 = lo.t;
    let mut t1 = hi.t;
    let mut tt = t;
    if t1 <= t0 {
        t1 += ell;
        if tt < t0 {
            tt += ell;
        }
    }
    if t1 - t0 <= 0.0 {
        return lo.rho.abs();
    }
    let w = (tt - t0) / (t1 - t0);
    (1.0 - w) * lo.rho.abs() + w * hi.rho.abs()
}

/// Places `count` points on the curve `rho = sign · s · R(t)` uniformly in
/// arclength, offset by `offset` of a step.
fn ring_positions(
    boundary: &[RingPt],
    s: f64,
    sign: f64,
    ell: f64,
    mut count: impl FnMut(f64) -> usize,
    offset: f64,
) -> Vec<(f64, f64)> {
    let sub = 4;
    let mut ts: Vec<f64> = Vec::with_capacity(boundary.len() * sub + 1);
    for i in 0..boundary.len() {
        let t0 = boundary[i].t;
        let t1 = if i + 1 < boundary.len() {
            boundary[i + 1].t
        } else {
            boundary[0].t + ell
        };
        for k in 0..sub {
            ts.push(t0 + (t1 - t0) * k as f64 / sub as f64);
        }
    }
    ts.push(boundary[0].t + ell);
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| (sign * s * boundary_radius(boundary, wrap(t, ell), ell), t))
        .collect();
    let mut cum = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in pts.windows(2) {
        acc += fermi_dist(w[0].0, w[0].1, w[1].0, w[1].1, ell);
        cum.push(acc);
    }
    let n = count(acc);
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        let target = (i as f64 + offset) / n as f64 * acc;
        while seg + 1 < cum.len() - 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let w = if span > 0.0 { (target - cum[seg]) / span } else { 0.0 };
        let t = ts[seg] + w * (ts[seg + 1] - ts[seg]);
        let t = wrap(t, ell);
        out.push((sign * s * boundary_radius(boundary, t, ell), t));
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    out
}

/// Builds the intrinsic mesh of a surface with target edge length `h`.
pub fn mesh_surface(model: &SurfaceModel, h: f64) -> Result<TriMesh> {
    if !(h > 0.0) || h > MAX_H {
        return Err(Error::Domain {
            what: "mesh size h",
            value: h,
        });
    }
    let mut ctx = Ctx {
        model,
        h,
        n_min: ring_minimum(h),
        builder: MeshBuilder::new(Geometry::Hyperbolic),
    };
    let skeletons = (0..model.graph.pants_count())
        .map(|p| ctx.skeleton(p))
        .collect::<Result<Vec<_>>>()?;

    for (g, gl) in model.graph.gluings.iter().enumerate() {
        let ell = gl.length;
        let sides = [(gl.a, 1.0), (gl.b, -1.0)];
        let mut boundaries = Vec::with_capacity(2);
        for &(s, _) in &sides {
            let b = ctx.cell_boundary(&skeletons[s.pants], s.pants, s.slot);
            let r_min = b.iter().map(|p| p.rho.abs()).fold(f64::INFINITY, f64::min);
            if r_min < 0.5 * h {
                return Err(Error::Resolution {
                    cuff: format!(
                        "gluing {g} (pants {} slot {} <-> pants {} slot {})",
                        gl.a.pants, gl.a.slot, gl.b.pants, gl.b.slot
                    ),
                    detail: format!("cell reaches only {r_min:.4} from the core, below h/2 = {}", 0.5 * h),
                });
            }
            boundaries.push(b);
        }

        // core geodesic
        let n0 = ctx.n_min.max((ell / h).ceil() as usize);
        let core: Vec<RingPt> = (0..n0)
            .map(|i| {
                let t = ell * i as f64 / n0 as f64;
                let id = ctx.interior_vertex(gl.a.pants, gl.a.slot, 0.0, t);
                RingPt { id, rho: 0.0, t }
            })
            .collect();
        for (i, &(s, sign)) in sides.iter().enumerate() {
            let boundary = &boundaries[i];
            let r_max = boundary.iter().map(|p| p.rho.abs()).fold(0.0, f64::max);
            // radial grading: rho-spacing follows the ring spacing near the
            // core and is h further out
            let rho_star = {
                let x = h * ctx.n_min as f64 / ell;
                if x > 1.0 {
                    x.acosh()
                } else {
                    0.0
                }
            };
            let gd = |x: f64| x.tanh().asin();
            let n_min = ctx.n_min as f64;
            let phi_star = n_min / ell * gd(rho_star);
            let phi = |r: f64| {
                if r <= rho_star {
                    n_min / ell * gd(r)
                } else {
                    phi_star + (r - rho_star) / h
                }
            };
            let phi_inv = |v: f64| {
                if v <= phi_star {
                    (v * ell / n_min).tan().asinh()
                } else {
                    rho_star + (v - phi_star) * h
                }
            };
            let total = phi(r_max);
            let rings = total.ceil().max(1.0) as usize;
            let mut prev = core.clone();
            for j in 1..rings {
                let s_j = phi_inv(total * j as f64 / rings as f64) / r_max;
                let offset = if j % 2 == 1 { 0.5 } else { 0.0 };
                let ring_min = ctx.n_min;
                let positions = ring_positions(
                    boundary,
                    s_j,
                    sign,
                    ell,
                    |len| ring_min.max((len / h).ceil() as usize),
                    offset,
                );
                let ring: Vec<RingPt> = positions
                    .into_iter()
                    .map(|(rho, t)| RingPt {
                        id: ctx.interior_vertex(s.pants, s.slot, rho, t),
                        rho,
                        t,
                    })
                    .collect();
                ctx.zipper(&prev, &ring, ell);
                prev = ring;
            }
            ctx.zipper(&prev, boundary, ell);
        }
    }
    let mesh = ctx.builder.finish()?;
    mesh.check_triangles()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypgeom::Frame;
    use crate::pants::{assemble_surface, double_pants, sharpness_family};

    #[test]
    fn fermi_distance_matches_half_plane() {
        let f = Frame::STANDARD;
        for &(r1, t1, r2, t2) in &[(0.3, 0.1, -0.4, 0.5), (1.5, 0.0, 1.6, 0.05), (0.0, 0.2, 0.0, 0.3)] {
            let d = dist_h(f.fermi_point(r1, t1), f.fermi_point(r2, t2)).unwrap();
            assert!((fermi_dist(r1, t1, r2, t2, 100.0) - d).abs() < 1e-12);
        }
        // periodic reduction
        let a = fermi_dist(0.2, 0.05, 0.1, 0.95, 1.0);
        let b = fermi_dist(0.2, 0.05, 0.1, -0.05, 1.0);
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn genus_two_mesh_topology_and_area() {
        let m = assemble_surface(double_pants([1.0, 1.0, 1.0]).unwrap()).unwrap();
        let mesh = mesh_surface(&m, 0.15).unwrap();
        assert!(mesh.is_closed());
        assert_eq!(mesh.euler_characteristic(), -2);
        let area = mesh.total_area().unwrap();
        let exact = 4.0 * std::f64::consts::PI;
        assert!((area - exact).abs() / exact < 1e-6, "{area}");
        assert!(mesh.min_angle_deg() > 20.0, "{}", mesh.min_angle_deg());
    }

    #[test]
    fn chain_mesh_topology() {
        let m = assemble_surface(sharpness_family(2, 0.2).unwrap()).unwrap();
        let mesh = mesh_surface(&m, 0.2).unwrap();
        assert!(mesh.is_closed());
        assert_eq!(mesh.euler_characteristic(), 2 - 2 * 3);
        let exact = 8.0 * std::f64::consts::PI;
        assert!((mesh.total_area().unwrap() - exact).abs() / exact < 1e-6);
    }

    #[test]
    fn resolution_error_names_the_cuff() {
        let m = assemble_surface(double_pants([9.0, 9.0, 9.0]).unwrap()).unwrap();
        match mesh_surface(&m, 0.3) {
            Err(Error::Resolution { cuff, .. }) => assert!(cuff.contains("gluing")),
            other => panic!("expected resolution error, got {other:?}"),
        }
        assert!(mesh_surface(&m, 0.5).is_err());
    }
}
