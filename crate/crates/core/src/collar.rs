//! Collar quantities: half-widths, injectivity radius inside collars, the
//! truncated injectivity weight, the conformal stretch factor and the
//! curvature it induces, and the functional `I(S)`.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Region, TriMesh};
use crate::pants::SurfaceModel;
use crate::quad;

/// Geodesics at most this long carry a collar.
pub fn short_length() -> f64 {
    2.0 * 1f64.asinh()
}

/// Lower bound for the injectivity radius in the thick part, used as its value.
pub fn thick_inj() -> f64 {
    1f64.asinh()
}

/// Default derivative step for the curvature of the stretched metric.
pub const CURVATURE_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Collar {
    pub cuff_length: f64,
    pub half_width: f64,
    /// Index of the core geodesic (the gluing it comes from).
    pub geodesic_id: usize,
}

impl Collar {
    pub fn new(cuff_length: f64, geodesic_id: usize) -> Result<Self> {
        Ok(Self {
            cuff_length,
            half_width: collar_half_width(cuff_length)?,
            geodesic_id,
        })
    }

    pub fn contains(&self, rho: f64) -> bool {
        rho.abs() <= self.half_width
    }
}

/// `W(ℓ) = asinh(1 / sinh(ℓ/2))`.
pub fn collar_half_width(ell: f64) -> Result<f64> {
    // small slack so that 2 asinh(1) itself is accepted after rounding
    if !(ell > 0.0) || ell > short_length() * (1.0 + 1e-14) {
        return Err(Error::Domain {
            what: "cuff length",
            value: ell,
        });
    }
    Ok(half_width_formula(ell))
}

/// `asinh(1 / sinh(ℓ/2))` without the short-geodesic domain check.
pub fn half_width_formula(ell: f64) -> f64 {
    (0.5 * ell).sinh().recip().asinh()
}

/// Injectivity radius at signed distance `rho` from the core of a collar of
/// length `ell`: `asinh(sinh(ℓ/2) cosh ρ)`, which equals
/// `½ acosh(1 + (cosh ℓ − 1) cosh² ρ)` without its cancellation for small ℓ.
pub fn inj_in_collar(rho: f64, ell: f64) -> f64 {
    if rho == 0.0 {
        return 0.5 * ell;
    }
    ((0.5 * ell).sinh() * rho.cosh()).asinh()
}

/// Injectivity radius at distance `d` inside the collar boundary, from the
/// boundary-distance form `sinh(inj) = cosh(ℓ/2) cosh d − sinh d`.
pub fn inj_from_boundary_distance(d: f64, ell: f64) -> f64 {
    ((0.5 * ell).cosh() * d.cosh() - d.sinh()).asinh()
}

/// `ι̂` at a located surface point.
pub fn trunc_inj(point: &Region, model: &SurfaceModel) -> Result<f64> {
    match *point {
        Region::Collar { collar, rho, .. } => {
            let c = model
                .collars
                .get(collar)
                .ok_or_else(|| Error::Location(format!("collar {collar} does not exist")))?;
            if !c.contains(rho) {
                return Err(Error::Location(format!(
                    "rho = {rho} is outside collar {collar} (half-width {})",
                    c.half_width
                )));
            }
            Ok(inj_in_collar(rho, c.cuff_length).min(1.0))
        }
        Region::Thick { pants, .. } => {
            if pants >= model.graph.pants_count() {
                return Err(Error::Location(format!("pants {pants} does not exist")));
            }
            Ok(thick_inj().min(1.0))
        }
        Region::Flat { .. } => Err(Error::Location(
            "flat test-mesh point is not on a hyperbolic surface".into(),
        )),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IMethod {
    /// `1 + (1/Vol) Σ 1/ℓ(γ)` over the short geodesics.
    Geodesic,
    /// `(1/Vol) ∫ ι̂⁻²` by mesh quadrature.
    Integral,
}

/// Chunk size for the parallel quadrature. Partial sums are formed per chunk
/// and then added in chunk order, so the result does not depend on the number
/// of worker threads.
pub const QUADRATURE_CHUNK: usize = 4096;

pub fn surface_i(model: &SurfaceModel, method: IMethod, mesh: Option<&TriMesh>) -> Result<f64> {
    match method {
        IMethod::Geodesic => {
            let s: f64 = model.collars.iter().map(|c| 1.0 / c.cuff_length).sum();
            Ok(1.0 + s / model.volume)
        }
        IMethod::Integral => {
            let mesh = mesh.ok_or_else(|| {
                Error::Precondition("the integral method needs a mesh".into())
            })?;
            let weight: Vec<f64> = mesh
                .vertices
                .iter()
                .map(|v| trunc_inj(&v.region, model).map(|x| x.powi(-2)))
                .collect::<Result<_>>()?;
            let areas = mesh.areas()?;
            let partials: Vec<f64> = mesh
                .triangles
                .par_chunks(QUADRATURE_CHUNK)
                .zip(areas.par_chunks(QUADRATURE_CHUNK))
                .map(|(tris, ar)| {
                    tris.iter()
                        .zip(ar)
                        .map(|(t, a)| a * (weight[t[0]] + weight[t[1]] + weight[t[2]]) / 3.0)
                        .sum::<f64>()
                })
                .collect();
            Ok(partials.iter().sum::<f64>() / model.volume)
        }
    }
}

fn psi_unnormalized(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// Normalizing constant `c` of the mollifier, `1 / ∫ exp(−1/(1−x²)) dx`.
pub fn mollifier_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 1.0 / quad::integrate(psi_unnormalized, -1.0, 1.0, 16))
}

pub fn mollifier(x: f64) -> f64 {
    mollifier_constant() * psi_unnormalized(x)
}

/// The unsmoothed profile `f_i`: `1/(ℓ cosh x)` for `|x| < W − 2`, else 1.
pub fn raw_stretch(x: f64, ell: f64, w: f64) -> f64 {
    if x.abs() < w - 2.0 {
        1.0 / (ell * x.cosh())
    } else {
        1.0
    }
}

/// Conformal stretch factor `f(ρ) = ∫ f_i(x) ψ(ρ − x) dx` inside a collar of
/// length `ell`. Outside `[−W, W]` the profile is continued by 1, so that
/// `f = 1` for `|ρ| ≥ W − 1`.
pub fn stretch_factor(rho: f64, ell: f64) -> f64 {
    let w = match collar_half_width(ell) {
        Ok(w) => w,
        Err(_) => return 1.0,
    };
    if w <= 2.0 || rho.abs() >= w - 1.0 {
        return 1.0;
    }
    let cut = w - 2.0;
    let (lo, hi) = (rho - 1.0, rho + 1.0);
    let mut breaks = vec![lo];
    for b in [-cut, cut] {
        if b > lo && b < hi {
            breaks.push(b);
        }
    }
    breaks.push(hi);
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let panels = ((b - a) * 8.0).ceil().max(1.0) as usize;
        total += quad::integrate(|x| raw_stretch(x, ell, w) * mollifier(rho - x), a, b, panels);
    }
    total
}

/// Bound on `|f'|` from `|f'| ≤ sup f_i · ∫|ψ'| = sup f_i · 2ψ(0)`.
pub fn stretch_lipschitz(ell: f64) -> f64 {
    let sup = (1.0 / ell).max(1.0);
    sup * 2.0 * mollifier(0.0)
}

/// Sampled stretch factor over a collar.
#[derive(Clone, Debug)]
pub struct StretchProfile {
    pub cuff_length: f64,
    pub samples: Vec<(f64, f64)>,
    pub mollifier_norm: f64,
}

impl StretchProfile {
    pub fn sample(ell: f64, count: usize) -> Result<Self> {
        let w = collar_half_width(ell)?;
        let n = count.max(2);
        let samples = (0..n)
            .map(|i| {
                let rho = -w + 2.0 * w * i as f64 / (n - 1) as f64;
                (rho, stretch_factor(rho, ell))
            })
            .collect();
        Ok(Self {
            cuff_length: ell,
            samples,
            mollifier_norm: mollifier_constant(),
        })
    }
}

/// Gaussian curvature of the stretched metric at distance `rho` from the
/// core, `K = −(1/f)((f² + f(tanh ρ f′ + f″) − f′²)/f²)`.
pub fn stretched_curvature(rho: f64, ell: f64) -> f64 {
    stretched_curvature_with_step(rho, ell, CURVATURE_STEP)
}

pub fn stretched_curvature_with_step(rho: f64, ell: f64, step: f64) -> f64 {
    let f0 = stretch_factor(rho, ell);
    let fp = stretch_factor(rho + step, ell);
    let fm = stretch_factor(rho - step, ell);
    let d1 = (fp - fm) / (2.0 * step);
    let d2 = (fp - 2.0 * f0 + fm) / (step * step);
    -(f0 * f0 + f0 * (rho.tanh() * d1 + d2) - d1 * d1) / (f0 * f0 * f0)
}
