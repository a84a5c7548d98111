//! Test functions on the chain family, minimax upper bounds, and the
//! eigenvalue and heat-trace sweeps.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{Region, TriMesh};
use crate::pants::{ChainLayout, SurfaceModel};
use crate::spectral::{csv_err, heat_trace_stat, lowest_eigenpairs, EigenOptions, FemSystem, Spectrum};

/// Width of the interpolation layer on each side of a short cuff.
pub const LAYER: f64 = 1.0;

/// Per-vertex placement of a test-function profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Placement {
    /// Support index `i`, or `None` outside every support.
    pub support: Option<usize>,
    /// Block of the chain the vertex lies in.
    pub block: usize,
    /// Within distance `LAYER` of a short cuff.
    pub layer: bool,
}

#[derive(Clone, Debug)]
pub struct TestFunctionProfile {
    pub k: usize,
    pub blocks: usize,
    /// Number of consecutive blocks per support.
    pub span: usize,
    pub placement: Vec<Placement>,
    /// `values[i]` is `f_i` at every vertex.
    pub values: Vec<Vec<f64>>,
}

/// Plateau value at position `p ∈ 1..=span` of a support: a symmetric tent
/// with peak 1, flat on the two middle blocks when `span` is even.
pub fn plateau(p: usize, span: usize) -> f64 {
    p.min(span + 1 - p) as f64 / span.div_ceil(2) as f64
}

fn chain(model: &SurfaceModel) -> Result<ChainLayout> {
    model
        .graph
        .layout
        .ok_or_else(|| Error::Precondition("test functions need a chain-family surface".into()))
}

/// Builds `k` disjointly supported piecewise-linear test functions. Each
/// support covers `⌊n/k⌋` consecutive blocks; between two blocks of one
/// support the function interpolates linearly in the signed distance to the
/// short cuff over `[−1, 1]`, and at the edge of a support it falls to zero
/// over the layer on its own side, so that supports stay disjoint.
pub fn build_test_functions(model: &SurfaceModel, mesh: &TriMesh, k: usize) -> Result<TestFunctionProfile> {
    let layout = chain(model)?;
    let n = layout.blocks;
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let span = n / k;
    let support_of = |j: usize| (j < k * span).then(|| j / span);
    let value_of = |j: usize| support_of(j).map_or(0.0, |_| plateau(j % span + 1, span));
    let gluings = &model.graph.gluings;

    let mut placement = Vec::with_capacity(mesh.vertex_count());
    let mut values = vec![vec![0.0; mesh.vertex_count()]; k];
    for (v, vert) in mesh.vertices.iter().enumerate() {
        let (block, layer_info) = match (vert.chart, vert.region) {
            (Some(c), _) => {
                let gl = &gluings[c.cuff];
                let pants = if c.rho >= 0.0 { gl.a.pants } else { gl.b.pants };
                let link = layout.link_of_gluing(c.cuff).filter(|_| c.rho.abs() < LAYER);
                (layout.block_of_pants(pants), link.map(|l| (l, c.rho)))
            }
            (None, Region::Thick { pants, .. }) => (layout.block_of_pants(pants), None),
            (None, _) => {
                return Err(Error::Location(format!("vertex {v} has no chart on the chain")));
            }
        };
        match layer_info {
            None => {
                let s = support_of(block);
                if let Some(i) = s {
                    values[i][v] = value_of(block);
                }
                placement.push(Placement {
                    support: s,
                    block,
                    layer: false,
                });
            }
            Some(((jl, jr), rho)) => {
                // rho > 0 lies in block jl, rho < 0 in block jr
                let (sl, sr) = (support_of(jl), support_of(jr));
                if sl.is_some() && sl == sr {
                    let w = 0.5 * (1.0 + rho / LAYER);
                    values[sl.unwrap()][v] = w * value_of(jl) + (1.0 - w) * value_of(jr);
                } else if rho > 0.0 {
                    if let Some(i) = sl {
                        values[i][v] = value_of(jl) * rho / LAYER;
                    }
                } else if let Some(i) = sr {
                    values[i][v] = value_of(jr) * (-rho) / LAYER;
                }
                let s = if rho >= 0.0 { sl } else { sr };
                placement.push(Placement {
                    support: s,
                    block,
                    layer: true,
                });
            }
        }
    }
    Ok(TestFunctionProfile {
        k,
        blocks: n,
        span,
        placement,
        values,
    })
}

impl TestFunctionProfile {
    /// `(⌊n/k⌋ − 1) / 2`.
    pub fn m(&self) -> f64 {
        (self.span as f64 - 1.0) / 2.0
    }

    /// Largest `|f_i f_j|` over vertices for `i ≠ j`; zero for disjoint
    /// supports.
    pub fn max_overlap(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for v in 0..self.placement.len() {
            for i in 0..self.k {
                for j in i + 1..self.k {
                    worst = worst.max((self.values[i][v] * self.values[j][v]).abs());
                }
            }
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimaxBounds {
    pub energies: Vec<f64>,
    /// Squared mass norms `‖f_i‖²`.
    pub norms: Vec<f64>,
    /// `energy_i / norm_i`, ascending.
    pub quotients: Vec<f64>,
    /// `bounds[j]` is the largest quotient among the `j + 1` functions with
    /// the smallest quotients. Their span has dimension `j + 1` and a diagonal
    /// Rayleigh matrix, so by the minimax principle `λ_j ≤ bounds[j]`.
    pub bounds: Vec<f64>,
    /// Largest `|f_iᵀ K f_j|` over `i ≠ j`.
    pub max_cross_energy: f64,
}

/// Rayleigh bounds from a profile of disjointly supported functions.
pub fn minimax_upper_bounds(profile: &TestFunctionProfile, system: &FemSystem) -> Result<MinimaxBounds> {
    let k = profile.k;
    if profile.placement.len() != system.dim() {
        return Err(Error::Dimension(format!(
            "profile on {} vertices, system of dimension {}",
            profile.placement.len(),
            system.dim()
        )));
    }
    let kf: Vec<Vec<f64>> = profile.values.iter().map(|f| system.stiffness.matvec(f)).collect();
    let energies: Vec<f64> = profile.values.iter().zip(&kf).map(|(f, g)| crate::linalg::dot(f, g)).collect();
    let norms: Vec<f64> = profile.values.iter().map(|f| system.mass_dot(f, f)).collect();
    for (i, &nm) in norms.iter().enumerate() {
        if !(nm > 0.0) {
            return Err(Error::DegenerateProfile(i));
        }
    }
    let mut max_cross_energy: f64 = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            max_cross_energy = max_cross_energy.max(crate::linalg::dot(&profile.values[i], &kf[j]).abs());
        }
    }
    let mut quotients: Vec<f64> = energies.iter().zip(&norms).map(|(e, n)| e / n).collect();
    quotients.sort_by(f64::total_cmp);
    Ok(MinimaxBounds {
        energies,
        norms,
        bounds: quotients.clone(),
        quotients,
        max_cross_energy,
    })
}

/// `R_k ≥ λ_k` from `k + 1` disjoint test functions, each supported on
/// `⌊n/(k+1)⌋` blocks. Needs `1 ≤ k < n`.
pub fn minimax_bound(model: &SurfaceModel, mesh: &TriMesh, system: &FemSystem, k: usize) -> Result<f64> {
    let n = chain(model)?.blocks;
    if k == 0 || k >= n {
        return Err(Error::InvalidK { k, n });
    }
    let p = build_test_functions(model, mesh, k + 1)?;
    Ok(*minimax_upper_bounds(&p, system)?.bounds.last().unwrap())
}

/// One solved surface of a sweep.
#[derive(Clone, Debug)]
pub struct SweepEntry {
    pub name: String,
    pub genus: usize,
    pub i_value: f64,
    pub volume: f64,
    pub layout: Option<ChainLayout>,
    pub spectrum: Spectrum,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thm11Row {
    pub surface: String,
    pub k: usize,
    pub lambda_k: f64,
    #[serde(rename = "I")]
    pub i_value: f64,
    pub g: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditRow {
    pub surface: String,
    pub g: usize,
    /// Discrete `λ_{2g−2}`.
    pub lambda: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thm11Report {
    pub rows: Vec<Thm11Row>,
    /// `(surface, min_k ratio)`.
    pub surface_min: Vec<(String, f64)>,
    pub min_ratio: f64,
    /// Largest over smallest per-surface minimum.
    pub spread: f64,
    pub audit: Vec<AuditRow>,
}

/// Threshold for the small-eigenvalue audit: `1/4` less a refinement slack.
pub const AUDIT_THRESHOLD: f64 = 0.20;

/// `λ_k · I · g² / k²` for every `k ≤ 2g − 3`, and the `λ_{2g−2}` audit.
pub fn verify_thm11(entries: &[SweepEntry]) -> Result<Thm11Report> {
    let mut rows = Vec::new();
    let mut surface_min = Vec::new();
    let mut audit = Vec::new();
    for e in entries {
        let kmax = 2 * e.genus - 3;
        let ev = &e.spectrum.eigenvalues;
        if ev.len() <= 2 * e.genus - 2 {
            return Err(Error::Coverage {
                requested: format!("lambda_{} on {}", 2 * e.genus - 2, e.name),
                available: format!("{} eigenpairs", ev.len()),
            });
        }
        let g2 = (e.genus * e.genus) as f64;
        let mut best = f64::INFINITY;
        for k in 1..=kmax {
            let ratio = ev[k] * e.i_value * g2 / (k * k) as f64;
            best = best.min(ratio);
            rows.push(Thm11Row {
                surface: e.name.clone(),
                k,
                lambda_k: ev[k],
                i_value: e.i_value,
                g: e.genus,
                ratio,
            });
        }
        surface_min.push((e.name.clone(), best));
        let lambda = ev[2 * e.genus - 2];
        audit.push(AuditRow {
            surface: e.name.clone(),
            g: e.genus,
            lambda,
            threshold: AUDIT_THRESHOLD,
            passed: lambda > AUDIT_THRESHOLD,
        });
    }
    let lo = surface_min.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let hi = surface_min.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(Thm11Report {
        rows,
        surface_min,
        min_ratio: lo,
        spread: hi / lo,
        audit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thm12Row {
    pub surface: String,
    pub t: f64,
    pub stat: f64,
    /// `stat · √(t / I)`.
    pub scaled: f64,
    /// `t ≤ g² / (ε n)` on a chain surface.
    pub window: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thm12Surface {
    pub surface: String,
    #[serde(rename = "I")]
    pub i_value: f64,
    pub upper: f64,
    /// Lower constant over the window; chain surfaces only.
    pub lower: Option<f64>,
    pub k_cut: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thm12Report {
    pub rows: Vec<Thm12Row>,
    pub surfaces: Vec<Thm12Surface>,
    /// Largest upper constant over all surfaces.
    pub c_upper: f64,
    /// Smallest lower constant over the chain surfaces.
    pub c_lower: Option<f64>,
}

/// End of the window before the chain's slow modes relax, `g² / (ε n)`.
pub fn relaxation_time(genus: usize, layout: &ChainLayout) -> f64 {
    (genus * genus) as f64 / (layout.epsilon * layout.blocks as f64)
}

/// Fitted constants for `stat(t) ≤ C √(I/t)` over `t_grid`, using every
/// computed eigenpair; the lower constant is fitted on chain surfaces over
/// the part of the grid before `relaxation_time`.
pub fn verify_thm12(entries: &[SweepEntry], t_grid: &[f64]) -> Result<Thm12Report> {
    if t_grid.is_empty() {
        return Err(Error::Precondition("empty t grid".into()));
    }
    let mut rows = Vec::new();
    let mut surfaces = Vec::new();
    for e in entries {
        let k_cut = e.spectrum.count() - 1;
        let t_rel = e.layout.as_ref().map(|l| relaxation_time(e.genus, l));
        let mut upper = f64::NEG_INFINITY;
        let mut lower: Option<f64> = None;
        for &t in t_grid {
            let h = heat_trace_stat(&e.spectrum, e.volume, t, k_cut)?;
            if h.remainder_unsafe {
                return Err(Error::Remainder(t));
            }
            let scaled = h.value * (t / e.i_value).sqrt();
            upper = upper.max(scaled);
            let window = t_rel.is_some_and(|tr| t <= tr);
            if window {
                lower = Some(lower.map_or(scaled, |c| c.min(scaled)));
            }
            rows.push(Thm12Row {
                surface: e.name.clone(),
                t,
                stat: h.value,
                scaled,
                window,
            });
        }
        surfaces.push(Thm12Surface {
            surface: e.name.clone(),
            i_value: e.i_value,
            upper,
            lower,
            k_cut,
        });
    }
    let c_upper = surfaces.iter().map(|s| s.upper).fold(f64::NEG_INFINITY, f64::max);
    let c_lower = surfaces.iter().filter_map(|s| s.lower).reduce(f64::min);
    Ok(Thm12Report {
        rows,
        surfaces,
        c_upper,
        c_lower,
    })
}

/// Number of eigenpairs needed so that `e^{−t_min λ_k}·dim` is below 1% of
/// the partial heat sum, estimated from Weyl's law `N(λ) ≈ Vol·λ/(4π)` with
/// a margin for the small eigenvalues.
pub fn heat_k_cut(volume: f64, dim: usize, genus: usize, t_min: f64) -> usize {
    // the partial sum is at least the 1/(4πt) bulk term times the volume
    let partial = volume / (4.0 * std::f64::consts::PI * t_min);
    let lambda = (100.0 * dim as f64 / partial).ln() / t_min;
    let weyl = volume * lambda / (4.0 * std::f64::consts::PI);
    (weyl.ceil() as usize + 2 * genus + 10).max(crate::spectral::default_k_cut(genus))
}

/// Lowest eigenpairs with enough of them that the heat trace at `t_min` is
/// not flagged as truncation-unsafe. Starts from `heat_k_cut` and grows the
/// count from the observed top eigenvalue until the flag clears.
pub fn heat_spectrum(system: &FemSystem, volume: f64, genus: usize, t_min: f64, opts: &EigenOptions) -> Result<Spectrum> {
    let dim = system.dim();
    let mut k = heat_k_cut(volume, dim, genus, t_min);
    loop {
        if k + 1 >= dim {
            return Err(Error::Remainder(t_min));
        }
        let spec = lowest_eigenpairs(system, k + 1, opts)?;
        let h = heat_trace_stat(&spec, volume, t_min, k)?;
        if !h.remainder_unsafe {
            return Ok(spec);
        }
        let partial = h.value * volume;
        let needed = (100.0 * dim as f64 / partial).ln() / t_min;
        let top = spec.eigenvalues[k].max(1e-3);
        let grown = (k as f64 * needed / top * 1.1).ceil() as usize;
        k = grown.max(k + 8);
    }
}

/// Writes any serializable rows as CSV with a header from the field names.
pub fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pants::{assemble_surface, sharpness_family};
    use crate::spectral::assemble_fem;
    use crate::surfmesh::mesh_surface;

    fn chain_setup(n: usize, eps: f64, h: f64) -> (SurfaceModel, TriMesh, FemSystem) {
        let model = assemble_surface(sharpness_family(n, eps).unwrap()).unwrap();
        let mesh = mesh_surface(&model, h).unwrap();
        let sys = assemble_fem(&mesh).unwrap();
        (model, mesh, sys)
    }

    #[test]
    fn plateau_shapes() {
        let odd: Vec<f64> = (1..=5).map(|p| plateau(p, 5)).collect();
        assert_eq!(odd, vec![1.0 / 3.0, 2.0 / 3.0, 1.0, 2.0 / 3.0, 1.0 / 3.0]);
        let even: Vec<f64> = (1..=4).map(|p| plateau(p, 4)).collect();
        assert_eq!(even, vec![0.5, 1.0, 1.0, 0.5]);
        assert_eq!(plateau(1, 1), 1.0);
    }

    #[test]
    fn profile_invariants() {
        let (model, mesh, sys) = chain_setup(4, 0.1, 0.25);
        for k in 1..=4 {
            let p = build_test_functions(&model, &mesh, k).unwrap();
            assert_eq!(p.max_overlap(), 0.0);
            for f in &p.values {
                assert!(f.iter().all(|x| (0.0..=1.0).contains(x)));
            }
            let b = minimax_upper_bounds(&p, &sys).unwrap();
            assert_eq!(b.max_cross_energy, 0.0);
            assert!(b.bounds.windows(2).all(|w| w[0] <= w[1]));
            assert!(b.quotients.windows(2).all(|w| w[0] <= w[1]));
        }
        assert!(matches!(
            build_test_functions(&model, &mesh, 5),
            Err(Error::InvalidK { k: 5, n: 4 })
        ));
    }

    #[test]
    fn bound_is_linear_in_epsilon() {
        let r = |eps: f64| {
            let (model, mesh, sys) = chain_setup(4, eps, 0.2);
            minimax_bound(&model, &mesh, &sys, 1).unwrap()
        };
        let factor = r(0.2) / r(0.1);
        assert!((1.5..=3.0).contains(&factor), "{factor}");
        let (model, mesh, sys) = chain_setup(4, 0.1, 0.2);
        assert!(matches!(minimax_bound(&model, &mesh, &sys, 4), Err(Error::InvalidK { k: 4, n: 4 })));
    }

    #[test]
    fn odd_chain_tent_peaks_in_the_middle() {
        let (model, mesh, sys) = chain_setup(3, 0.1, 0.25);
        let p = build_test_functions(&model, &mesh, 1).unwrap();
        for (v, pl) in p.placement.iter().enumerate() {
            if !pl.layer {
                let want = if pl.block == 1 { 1.0 } else { 0.5 };
                assert_eq!(p.values[0][v], want);
            }
        }
        let b = minimax_upper_bounds(&p, &sys).unwrap();
        assert!(b.bounds[0] > 0.0 && b.bounds[0] == b.quotients[0]);
    }

    #[test]
    fn minimax_dominates_discrete_eigenvalues() {
        let (model, mesh, sys) = chain_setup(4, 0.1, 0.2);
        let spec = lowest_eigenpairs(&sys, 8, &EigenOptions::default()).unwrap();
        for k in 1..=4 {
            let p = build_test_functions(&model, &mesh, k).unwrap();
            let b = minimax_upper_bounds(&p, &sys).unwrap();
            for (j, r) in b.bounds.iter().enumerate() {
                assert!(spec.eigenvalues[j] <= *r, "k={k} j={j} {} > {r}", spec.eigenvalues[j]);
            }
        }
        let mut last = 0.0;
        for k in 1..4 {
            let r = minimax_bound(&model, &mesh, &sys, k).unwrap();
            assert!(spec.eigenvalues[k] <= r && r >= last, "k={k} {r}");
            last = r;
        }
    }

    #[test]
    fn norm_and_energy_scaling() {
        // n = 9, k = 1: m = 4, and the plateau norm per block is 4π·F²
        let (model, mesh, sys) = chain_setup(9, 0.1, 0.3);
        let p = build_test_functions(&model, &mesh, 1).unwrap();
        let b = minimax_upper_bounds(&p, &sys).unwrap();
        let block_area = 4.0 * std::f64::consts::PI;
        let norm = b.norms[0] / block_area;
        assert!(norm / p.m() > 1.0 / 3.0 && norm / p.m() < 3.0, "{norm}");
        // hand estimate of the energy: across each link the function changes
        // by 1/(m+1) over a layer of width 2 and circumference about ε
        let energy_scale = 0.1 / p.m();
        assert!(b.energies[0] < 10.0 * energy_scale);
    }

    #[test]
    fn k_cut_estimate_grows_with_dimension() {
        let a = heat_k_cut(24.0 * std::f64::consts::PI, 10_000, 7, 1.0);
        let b = heat_k_cut(24.0 * std::f64::consts::PI, 100_000, 7, 1.0);
        assert!(b > a && a >= 40);
    }
}
