//! Finite elements on intrinsic meshes, low eigenpairs of the generalized
//! problem `K φ = λ M φ`, the spectral kernel and the heat trace.

use std::io::Write;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Cholesky, CsrMatrix};
use crate::mesh::TriMesh;

/// Stiffness (cotangent) and lumped mass matrices.
#[derive(Clone, Debug)]
pub struct FemSystem {
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
}

impl FemSystem {
    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `vᵀKv` for a vertex function.
    pub fn energy(&self, v: &[f64]) -> f64 {
        self.stiffness.quad_form(v)
    }

    pub fn mass_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.mass).map(|((x, y), m)| x * y * m).sum()
    }
}

/// Cotangents at the three corners of a Euclidean triangle with the given
/// opposite side lengths, and its area.
pub fn corner_cotangents(l: [f64; 3]) -> Option<([f64; 3], f64)> {
    let [a, b, c] = l;
    if !(a < b + c && b < a + c && c < a + b) {
        return None;
    }
    let area = crate::mesh::euclidean_triangle_area(a, b, c);
    if !(area > 0.0) {
        return None;
    }
    let sq = [a * a, b * b, c * c];
    let cot = |i: usize| (sq[(i + 1) % 3] + sq[(i + 2) % 3] - sq[i]) / (4.0 * area);
    Some(([cot(0), cot(1), cot(2)], area))
}

/// Assembles the cotangent stiffness and lumped mass matrices. Triangles are
/// processed in parallel, and their contributions are summed in triangle
/// order, so the result is independent of the thread count.
pub fn assemble_fem(mesh: &TriMesh) -> Result<FemSystem> {
    let local: Vec<Option<([f64; 3], f64)>> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|f| corner_cotangents(mesh.side_lengths(f)))
        .collect();
    let n = mesh.vertex_count();
    let mut mass = vec![0.0; n];
    let mut entries = Vec::with_capacity(mesh.triangles.len() * 9);
    for (f, (t, loc)) in mesh.triangles.iter().zip(&local).enumerate() {
        let (cot, area) = loc.ok_or(Error::DegenerateTriangle(f))?;
        for i in 0..3 {
            mass[t[i]] += area / 3.0;
            // edge opposite corner i joins the other two corners
            let (j, k) = (t[(i + 1) % 3], t[(i + 2) % 3]);
            let w = 0.5 * cot[i];
            entries.push((j, k, -w));
            entries.push((k, j, -w));
            entries.push((j, j, w));
            entries.push((k, k, w));
        }
    }
    Ok(FemSystem {
        stiffness: CsrMatrix::from_triplets(n, entries),
        mass,
    })
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Mass-orthonormal eigenvectors, one per eigenvalue.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `‖Kφ − λMφ‖ / ‖φ‖` per pair.
    pub residuals: Vec<f64>,
    pub dim: usize,
}

impl Spectrum {
    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// CSV with columns `index,eigenvalue,residual`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wr.write_record(["index", "eigenvalue", "residual"]).map_err(csv_err)?;
        for (i, (l, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            wr.write_record([i.to_string(), l.to_string(), r.to_string()]).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Binary eigenvector blob: `b"HYPLABEV"`, then `n` and `k` as
    /// little-endian `u64`, then `n·k` little-endian `f64` in column-major
    /// order (one eigenvector after another).
    pub fn write_eigenvectors<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"HYPLABEV")?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        w.write_all(&(self.count() as u64).to_le_bytes())?;
        for v in &self.eigenvectors {
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    /// Residual tolerance per pair.
    pub tol: f64,
    pub seed: u64,
    /// Spectral shift `σ` in `(K + σM)⁻¹`.
    pub shift: f64,
    pub block: usize,
    /// Largest Krylov dimension before giving up.
    pub max_dim: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            seed: 0,
            shift: 0.05,
            block: 8,
            max_dim: 0,
        }
    }
}

/// Lowest `k` eigenpairs by block shift-invert Lanczos with full
/// reorthogonalization. The operator is `M^{½}(K + σM)^{-1}M^{½}`, whose
/// largest eigenvalues `1/(λ + σ)` correspond to the smallest `λ`.
///
/// Ritz values are checked through the cheap Krylov residual estimate, and
/// reported pairs are accepted only once the true residual
/// `‖Kφ − λMφ‖ / ‖φ‖` is below `tol`. Dense kernels run sequentially, so the
/// output is reproducible bit for bit.
pub fn lowest_eigenpairs(system: &FemSystem, k: usize, opts: &EigenOptions) -> Result<Spectrum> {
    let n = system.dim();
    if k == 0 || k >= n {
        return Err(Error::Dimension(format!("k = {k} for dimension {n}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }
    let sqrt_m: Vec<f64> = system.mass.iter().map(|m| m.sqrt()).collect();
    let shifted = system.stiffness.add_diagonal(&system.mass, opts.shift);
    let chol = Cholesky::new(&shifted)?;

    let b = opts.block.max(1).min(n);
    let max_dim = if opts.max_dim > 0 {
        opts.max_dim
    } else {
        (6 * k + 120).max(k + 4 * b)
    }
    .min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q = Mat::<f64>::zeros(n, max_dim);
    let mut t = DMatrix::<f64>::zeros(max_dim, max_dim);
    let mut w = Mat::<f64>::from_fn(n, b, |_, _| rng.random_range(-1.0..1.0));
    let mut m = 0;
    let mut est_tol = 1e-10;
    let mut iterations = 0;
    let mut worst = f64::NAN;
    loop {
        // orthogonalize the candidate block against the basis, twice
        let width = b.min(max_dim - m);
        let mut w_blk = w.subcols(0, width).to_owned();
        project_out(q.subcols(0, m), w_blk.as_mut());
        project_out(q.subcols(0, m), w_blk.as_mut());
        orthonormalize_block(q.subcols(0, m), &mut w_blk, &mut rng)?;
        q.subcols_mut(m, width).copy_from(&w_blk);
        let start = m;
        m += width;

        // image of the new block: M^{½} (K + σM)^{-1} M^{½} q
        let mut img = Mat::<f64>::from_fn(n, width, |i, j| q[(i, start + j)] * sqrt_m[i]);
        chol.solve_mat(img.as_mut());
        for j in 0..width {
            for i in 0..n {
                img[(i, j)] *= sqrt_m[i];
            }
        }
        let mut coeff = Mat::<f64>::zeros(m, width);
        matmul(coeff.as_mut(), Accum::Replace, q.subcols(0, m).transpose(), img.as_ref(), 1.0, Par::Seq);
        for j in 0..width {
            for i in 0..start {
                t[(i, start + j)] = coeff[(i, j)];
                t[(start + j, i)] = coeff[(i, j)];
            }
            for i in 0..width {
                t[(start + i, start + j)] = 0.5 * (coeff[(start + i, j)] + coeff[(start + j, i)]);
            }
        }
        w = img;
        iterations += 1;
        if m < k + b && m < max_dim {
            continue;
        }

        // residual estimate: the part of B·Q_last outside the basis
        let mut resid = w.to_owned();
        project_out(q.subcols(0, m), resid.as_mut());
        project_out(q.subcols(0, m), resid.as_mut());
        let rg = resid.transpose() * &resid;
        let tm = t.view((0, 0), (m, m)).clone_owned();
        let eig = SymmetricEigen::new(tm);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let wanted = &order[..k];
        let est = wanted
            .iter()
            .map(|&c| {
                let s: Vec<f64> = (0..width).map(|j| eig.eigenvectors[(start + j, c)]).collect();
                let mut acc = 0.0;
                for a in 0..width {
                    for bb in 0..width {
                        acc += s[a] * rg[(a, bb)] * s[bb];
                    }
                }
                acc.max(0.0).sqrt() / eig.eigenvalues[c].abs()
            })
            .fold(0.0, f64::max);
        if est <= est_tol || m >= max_dim {
            let s = Mat::<f64>::from_fn(m, k, |i, j| eig.eigenvectors[(i, wanted[j])]);
            let mut y = Mat::<f64>::zeros(n, k);
            matmul(y.as_mut(), Accum::Replace, q.subcols(0, m), s.as_ref(), 1.0, Par::Seq);
            let pairs: Vec<(f64, Vec<f64>, f64)> = (0..k)
                .into_par_iter()
                .map(|j| {
                    let phi: Vec<f64> = (0..n).map(|i| y[(i, j)] / sqrt_m[i]).collect();
                    let kphi = system.stiffness.matvec(&phi);
                    let mnorm = system.mass_dot(&phi, &phi);
                    let lambda = dot(&phi, &kphi) / mnorm;
                    let r: Vec<f64> = kphi
                        .iter()
                        .zip(&phi)
                        .zip(&system.mass)
                        .map(|((kp, p), mm)| kp - lambda * mm * p)
                        .collect();
                    let res = norm(&r) / norm(&phi);
                    let scale = mnorm.sqrt();
                    (lambda, phi.iter().map(|x| x / scale).collect(), res)
                })
                .collect();
            worst = pairs.iter().map(|p| p.2).fold(0.0, f64::max);
            if worst <= opts.tol {
                return finish(pairs, n);
            }
            est_tol *= 0.01;
        }
        if m >= max_dim {
            return Err(Error::Convergence {
                iterations,
                residual: worst,
            });
        }
    }
}

fn finish(mut pairs: Vec<(f64, Vec<f64>, f64)>, n: usize) -> Result<Spectrum> {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let near_zero = pairs.iter().filter(|p| p.0 < 1e-8).count();
    if near_zero > 1 {
        return Err(Error::Connectivity(near_zero));
    }
    let mut eigenvalues = Vec::with_capacity(pairs.len());
    let mut eigenvectors = Vec::with_capacity(pairs.len());
    let mut residuals = Vec::with_capacity(pairs.len());
    for (l, v, r) in pairs {
        eigenvalues.push(l);
        eigenvectors.push(v);
        residuals.push(r);
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        residuals,
        dim: n,
    })
}

/// `w ← w − Q (Qᵀ w)`.
fn project_out(q: MatRef<'_, f64>, mut w: MatMut<'_, f64>) {
    if q.ncols() == 0 {
        return;
    }
    let mut c = Mat::<f64>::zeros(q.ncols(), w.ncols());
    matmul(c.as_mut(), Accum::Replace, q.transpose(), w.as_ref(), 1.0, Par::Seq);
    matmul(w.as_mut(), Accum::Add, q, c.as_ref(), -1.0, Par::Seq);
}

/// Modified Gram–Schmidt within a block that is already orthogonal to `q`;
/// columns that collapse are replaced by fresh random directions.
fn orthonormalize_block(q: MatRef<'_, f64>, w: &mut Mat<f64>, rng: &mut ChaCha8Rng) -> Result<()> {
    let (n, b) = (w.nrows(), w.ncols());
    let mut scale: Vec<f64> = (0..b).map(|j| w.col(j).norm_l2()).collect();
    for j in 0..b {
        let mut tries = 0;
        loop {
            for _ in 0..2 {
                for i in 0..j {
                    let c = w.col(i).transpose() * w.col(j);
                    for r in 0..n {
                        let v = w[(r, i)];
                        w[(r, j)] -= c * v;
                    }
                }
            }
            let nrm = w.col(j).norm_l2();
            if nrm > 1e-10 * scale[j] && nrm > 0.0 {
                for r in 0..n {
                    w[(r, j)] /= nrm;
                }
                break;
            }
            tries += 1;
            if tries > 10 {
                return Err(Error::Convergence {
                    iterations: 0,
                    residual: f64::NAN,
                });
            }
            for r in 0..n {
                w[(r, j)] = rng.random_range(-1.0..1.0);
            }
            let mut col = w.as_mut().subcols_mut(j, 1);
            project_out(q, col.as_mut());
            project_out(q, col.as_mut());
            scale[j] = col.col(0).norm_l2();
        }
    }
    Ok(())
}

/// Default number of eigenpairs for a genus-`g` surface.
pub fn default_k_cut(genus: usize) -> usize {
    (2 * genus + 3).max(40)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatTrace {
    pub value: f64,
    /// Set when the neglected tail may exceed 1% of the partial sum.
    pub remainder_unsafe: bool,
}

/// `(1/Vol) Σ_{k=1}^{k_cut} e^{−tλ_k}`.
pub fn heat_trace_stat(spectrum: &Spectrum, volume: f64, t: f64, k_cut: usize) -> Result<HeatTrace> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("heat time t = {t} must be positive")));
    }
    if k_cut >= spectrum.count() || k_cut == 0 {
        return Err(Error::Coverage {
            requested: format!("k_cut = {k_cut}"),
            available: format!("{} eigenpairs", spectrum.count()),
        });
    }
    let partial: f64 = spectrum.eigenvalues[1..=k_cut].iter().map(|l| (-t * l.max(0.0)).exp()).sum();
    let tail = (-t * spectrum.eigenvalues[k_cut]).exp() * spectrum.dim as f64;
    Ok(HeatTrace {
        value: partial / volume,
        remainder_unsafe: tail > 0.01 * partial,
    })
}

fn coverage(spectrum: &Spectrum, lambda: f64) -> Result<()> {
    match spectrum.eigenvalues.last() {
        Some(&top) if top > lambda => Ok(()),
        _ => Err(Error::Coverage {
            requested: format!("lambda = {lambda}"),
            available: format!("spectrum resolved to {:?}", spectrum.eigenvalues.last()),
        }),
    }
}

/// `μ_x(λ) = Σ_{0<λ_k≤λ} φ_k(x)²` at vertex `x`. Index 0 (the constant
/// eigenfunction) is always excluded.
pub fn spectral_kernel(spectrum: &Spectrum, lambda: f64, x: usize) -> Result<f64> {
    coverage(spectrum, lambda)?;
    if x >= spectrum.dim {
        return Err(Error::Dimension(format!("vertex {x} of {}", spectrum.dim)));
    }
    Ok(spectrum
        .eigenvalues
        .iter()
        .zip(&spectrum.eigenvectors)
        .skip(1)
        .filter(|(l, _)| **l <= lambda)
        .map(|(_, v)| v[x] * v[x])
        .sum())
}

/// `μ_x(λ)` at every vertex.
pub fn spectral_kernel_all(spectrum: &Spectrum, lambda: f64) -> Result<Vec<f64>> {
    coverage(spectrum, lambda)?;
    let mut mu = vec![0.0; spectrum.dim];
    for (l, v) in spectrum.eigenvalues.iter().zip(&spectrum.eigenvectors).skip(1) {
        if *l <= lambda {
            for (m, x) in mu.iter_mut().zip(v) {
                *m += x * x;
            }
        }
    }
    Ok(mu)
}

/// `N(λ)`, the number of eigenvalues in `(0, λ]`.
pub fn counting(spectrum: &Spectrum, lambda: f64) -> Result<usize> {
    coverage(spectrum, lambda)?;
    Ok(spectrum.eigenvalues.iter().skip(1).filter(|l| **l <= lambda).count())
}
