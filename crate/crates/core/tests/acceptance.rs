//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 1 3 9`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hyplab::collar::{
    self, half_width_formula, inj_from_boundary_distance, inj_in_collar, stretch_factor,
    stretched_curvature_with_step, IMethod,
};
use hyplab::extremal::{dirichlet_energy, verify_thm14};
use hyplab::graphana::{check_discrete_bounds, clique_cycle, complete, cycle, lazy_walk_spectrum};
use hyplab::harness::{self, file_hash, parse_spec, RunOptions};
use hyplab::mesh::{flat_annulus, flat_torus};
use hyplab::pants::{assemble_surface, double_pants, sharpness_family, PantsGraph, SurfaceModel};
use hyplab::sharpness::{
    heat_spectrum, minimax_bound, verify_thm11, verify_thm12, SweepEntry,
};
use hyplab::spectral::{assemble_fem, counting, lowest_eigenpairs, spectral_kernel_all, EigenOptions};
use hyplab::surfmesh::mesh_surface;
use hyplab::Result;

const SWEEP_H: f64 = 0.1;
const T_GRID: [f64; 9] = [1.0, 2.0, 3.0, 5.0, 10.0, 20.0, 30.0, 50.0, 100.0];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within(a: f64, b: f64, rel: f64) -> bool {
    (a / b - 1.0).abs() <= rel
}

// ---------------------------------------------------------------------------
// 1

fn geometry() -> Result<Outcome> {
    let t0 = Instant::now();
    let (lo, hi) = (1e-4f64.ln(), 2f64.ln());
    let ells: Vec<f64> = (0..1000).map(|i| (lo + (hi - lo) * i as f64 / 999.0).exp()).collect();
    let mut bracket_fail = 0;
    let mut core_fail = 0;
    let mut ratio_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut cross = 0.0f64;
    for &ell in &ells {
        let w = half_width_formula(ell);
        let base = (1.0 / ell).ln();
        if !(w > base + 1.0 && w < base + 2.0) {
            bracket_fail += 1;
        }
        if inj_in_collar(0.0, ell) != ell / 2.0 {
            core_fail += 1;
        }
        if ell > collar::short_length() {
            continue;
        }
        for j in 0..=200 {
            let d = w * j as f64 / 200.0;
            let a = inj_in_collar(w - d, ell);
            let b = inj_from_boundary_distance(d, ell);
            cross = cross.max((a - b).abs());
            if ell <= 0.1 {
                let rho = w - d;
                let r = a / (ell * rho.cosh());
                ratio_range = (ratio_range.0.min(r), ratio_range.1.max(r));
            }
        }
    }
    let elapsed = t0.elapsed();
    let ok = bracket_fail == 0
        && core_fail == 0
        && ratio_range.0 >= 0.4
        && ratio_range.1 <= 0.6
        && cross <= 1e-9
        && elapsed < Duration::from_secs(5);
    Ok(outcome(
        ok,
        format!(
            "bracket misses {bracket_fail}/1000, core misses {core_fail}, r/(l cosh rho) in [{:.4}, {:.4}], boundary-form max diff {cross:.1e}, {elapsed:.2?}",
            ratio_range.0, ratio_range.1
        ),
    ))
}

// ---------------------------------------------------------------------------
// 2

fn discrete() -> Result<Outcome> {
    let t0 = Instant::now();
    let mut trace = 0.0f64;
    let mut closed = 0.0f64;
    let mut ratios = Vec::new();
    for n in [8usize, 16, 32, 64, 128, 256, 512] {
        let g = cycle(n)?;
        let ev = lazy_walk_spectrum(&g)?;
        let mut want: Vec<f64> = (0..n).map(|j| (1.0 - (2.0 * PI * j as f64 / n as f64).cos()) / 2.0).collect();
        want.sort_by(f64::total_cmp);
        closed = ev.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(closed, f64::max);
        let rep = check_discrete_bounds(&g, if n <= 64 { 10_000 } else { 100 })?;
        trace = trace.max(rep.trace_residual);
        ratios.push((n, rep.min_ratio, rep.argmin_k));
    }
    for n in [5usize, 64, 256] {
        let ev = lazy_walk_spectrum(&complete(n)?)?;
        closed = closed.max(ev[0].abs());
        let want = n as f64 / (2.0 * (n as f64 - 1.0));
        closed = ev[1..].iter().map(|l| (l - want).abs()).fold(closed, f64::max);
    }
    let c0 = ratios[0].1;
    let worst = ratios.iter().map(|r| (r.1 / c0 - 1.0).abs()).fold(0.0, f64::max);
    let stable = worst <= 0.10;

    // bottleneck family: C fitted over t <= 100, checked out to t = 10^4
    let mut consts = Vec::new();
    let mut c_fit = 0.0f64;
    for (m, s) in [(4usize, 5usize), (8, 5), (16, 5), (32, 6)] {
        let g = clique_cycle(m, s)?;
        c_fit = c_fit.max(check_discrete_bounds(&g, 100)?.heat_constant);
        let rep = check_discrete_bounds(&g, 10_000)?;
        trace = trace.max(rep.trace_residual);
        consts.push((m * s, rep.heat_constant, rep.argmax_t));
    }
    let heat_ok = consts.iter().all(|c| c.1.is_finite() && c.1 <= c_fit * (1.0 + 1e-9));
    let elapsed = t0.elapsed();
    let ok = trace <= 1e-10 && closed <= 1e-9 && stable && heat_ok && elapsed < Duration::from_secs(120);
    let table: Vec<String> = ratios.iter().map(|r| format!("n={}:{:.4}@k={}", r.0, r.1, r.2)).collect();
    let heat: Vec<String> = consts.iter().map(|c| format!("n={}:{:.4}@t={}", c.0, c.1, c.2)).collect();
    Ok(outcome(
        ok,
        format!(
            "trace residual {trace:.1e}, closed-form err {closed:.1e}, min_k ratio {} (max drift {:.1}% vs n=8), heat sqrt(t) stat {} (C fit {c_fit:.4}), {elapsed:.1?}",
            table.join(" "),
            100.0 * worst,
            heat.join(" ")
        ),
    ))
}

// ---------------------------------------------------------------------------
// 3

fn torus() -> Result<Outcome> {
    let t0 = Instant::now();
    let n = 20; // spacing 1/20 = 0.05
    let sys = assemble_fem(&flat_torus(n)?)?;
    let mut want: Vec<f64> = Vec::new();
    for p in -3i32..=3 {
        for q in -3i32..=3 {
            want.push(4.0 * PI * PI * (p * p + q * q) as f64);
        }
    }
    want.sort_by(f64::total_cmp);
    let k = 6;
    let sp = lowest_eigenpairs(&sys, k, &EigenOptions::default())?;
    let worst = sp.eigenvalues[1..]
        .iter()
        .zip(&want[1..])
        .map(|(l, w)| (l / w - 1.0).abs())
        .fold(0.0, f64::max);
    let mut ortho = 0.0f64;
    for i in 0..k {
        for j in 0..=i {
            let g = sys.mass_dot(&sp.eigenvectors[i], &sp.eigenvectors[j]);
            ortho = ortho.max((g - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let l0 = sp.eigenvalues[0].abs();
    let elapsed = t0.elapsed();
    let ok = worst <= 0.03 && l0 <= 1e-8 && ortho <= 1e-8 && elapsed < Duration::from_secs(120);
    Ok(outcome(
        ok,
        format!(
            "{} nonzero eigenvalues, max rel err {:.2}%, lambda_0 {l0:.1e}, mass-orthonormality {ortho:.1e}, {elapsed:.1?}",
            k - 1,
            100.0 * worst
        ),
    ))
}

// ---------------------------------------------------------------------------
// 4

fn kernel() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut checks = 0;
    for (graph, h) in [(double_pants([2.0, 2.5, 3.0])?, 0.2), (sharpness_family(2, 0.2)?, 0.1)] {
        let model = assemble_surface(graph)?;
        let mesh = mesh_surface(&model, h)?;
        let sys = assemble_fem(&mesh)?;
        let sp = lowest_eigenpairs(&sys, 16, &EigenOptions::default())?;
        let ev = &sp.eigenvalues;
        for lambda in [0.5 * (ev[1] + ev[2]), ev[6], 0.5 * (ev[12] + ev[13])] {
            let mu = spectral_kernel_all(&sp, lambda)?;
            let total: f64 = mu.iter().zip(&sys.mass).map(|(a, m)| a * m).sum();
            let n = counting(&sp, lambda)?;
            worst = worst.max((total - n as f64).abs());
            checks += 1;
        }
    }
    Ok(outcome(
        worst <= 1e-6 && checks >= 6,
        format!("{checks} (surface, lambda) checks, max |sum mu - N| = {worst:.1e}"),
    ))
}

// ---------------------------------------------------------------------------
// sweep shared by 5, 6, 7, 10

struct MinimaxInstance {
    surface: String,
    k: usize,
    r_k: f64,
    lambda_k: f64,
    scaled: f64,
}

struct Sweep {
    entries: Vec<SweepEntry>,
    minimax: BTreeMap<String, Vec<MinimaxInstance>>,
    elapsed: Duration,
}

fn chain_minimax(model: &SurfaceModel, h: f64, name: &str, eigen: Option<&[f64]>) -> Result<Vec<MinimaxInstance>> {
    let mesh = mesh_surface(model, h)?;
    let sys = assemble_fem(&mesh)?;
    let layout = model.graph.layout.expect("chain surface");
    let n = layout.blocks;
    let owned;
    let ev = match eigen {
        Some(ev) => ev,
        None => {
            owned = lowest_eigenpairs(&sys, n + 1, &EigenOptions::default())?.eigenvalues;
            &owned
        }
    };
    let g2 = (model.genus * model.genus) as f64;
    let mut out = Vec::new();
    for k in 1..n {
        let r_k = minimax_bound(model, &mesh, &sys, k)?;
        out.push(MinimaxInstance {
            surface: name.to_string(),
            k,
            r_k,
            lambda_k: ev[k],
            scaled: r_k * g2 / (layout.epsilon * (k * k) as f64),
        });
    }
    Ok(out)
}

fn sweep_graphs() -> Result<Vec<(String, PantsGraph)>> {
    let mut out = Vec::new();
    for n in [2usize, 4, 6] {
        for eps in [0.05, 0.1, 0.2] {
            out.push((format!("chain-n{n}-eps{eps}"), sharpness_family(n, eps)?));
        }
    }
    out.push(("thick-g2".to_string(), double_pants([2.0, 2.5, 3.0])?));
    Ok(out)
}

fn run_sweep() -> Result<Sweep> {
    let t0 = Instant::now();
    let mut entries = Vec::new();
    let mut minimax = BTreeMap::new();
    for (name, graph) in sweep_graphs()? {
        let model = assemble_surface(graph)?;
        let mesh = mesh_surface(&model, SWEEP_H)?;
        let i_value = collar::surface_i(&model, IMethod::Integral, Some(&mesh))?;
        let sys = assemble_fem(&mesh)?;
        let mut sp = heat_spectrum(&sys, model.volume, model.genus, T_GRID[0], &EigenOptions::default())?;
        sp.eigenvectors.clear();
        drop((mesh, sys));
        if model.graph.layout.is_some() {
            minimax.insert(name.clone(), chain_minimax(&model, SWEEP_H, &name, Some(&sp.eigenvalues))?);
        }
        eprintln!("  swept {name}: {} eigenpairs, {:.1?}", sp.count(), t0.elapsed());
        entries.push(SweepEntry {
            name,
            genus: model.genus,
            i_value,
            volume: model.volume,
            layout: model.graph.layout,
            spectrum: sp,
        });
    }
    Ok(Sweep {
        entries,
        minimax,
        elapsed: t0.elapsed(),
    })
}

// ---------------------------------------------------------------------------
// 5

fn thm11(s: &Sweep) -> Result<Outcome> {
    let rep = verify_thm11(&s.entries)?;
    let mins: Vec<String> = rep.surface_min.iter().map(|(n, v)| format!("{n}:{v:.3}")).collect();
    let chains: Vec<f64> = rep.surface_min.iter().filter(|(n, _)| n.starts_with("chain")).map(|p| p.1).collect();
    let chain_spread = chains.iter().copied().fold(0.0, f64::max) / chains.iter().copied().fold(f64::INFINITY, f64::min);
    let ok = rep.min_ratio > 0.0 && rep.spread <= 20.0 && s.elapsed < Duration::from_secs(1800);
    Ok(outcome(
        ok,
        format!(
            "min lambda_k I g^2/k^2 = {:.4}, spread {:.2} (<= 20), chains only {:.2}, per surface {}, sweep {:.0?}",
            rep.min_ratio,
            rep.spread,
            chain_spread,
            mins.join(" "),
            s.elapsed
        ),
    ))
}

// ---------------------------------------------------------------------------
// 6

fn minimax(s: &Sweep) -> Result<Outcome> {
    let coarse: Vec<&MinimaxInstance> = s.minimax.values().flatten().collect();
    let mut fine = Vec::new();
    for (name, graph) in sweep_graphs()? {
        if graph.layout.is_none() {
            continue;
        }
        let model = assemble_surface(graph)?;
        fine.extend(chain_minimax(&model, SWEEP_H / 2.0, &name, None)?);
        eprintln!("  refined minimax {name}");
    }
    let fit = |v: &[&MinimaxInstance]| v.iter().map(|m| m.scaled).fold(0.0, f64::max);
    let c_h = fit(&coarse);
    let c_h2 = fit(&fine.iter().collect::<Vec<_>>());
    let violations: Vec<String> = coarse
        .iter()
        .copied()
        .chain(fine.iter())
        .filter(|m| m.lambda_k > m.r_k)
        .map(|m| format!("{}/k={}", m.surface, m.k))
        .collect();
    let ok = violations.is_empty() && within(c_h2, c_h, 0.5) && c_h.is_finite();
    Ok(outcome(
        ok,
        format!(
            "C(h) = {c_h:.4}, C(h/2) = {c_h2:.4} ({:+.1}%), {} instances, R_k < lambda_k on {:?}",
            100.0 * (c_h2 / c_h - 1.0),
            coarse.len() + fine.len(),
            violations
        ),
    ))
}

// ---------------------------------------------------------------------------
// 7

fn thm12(s: &Sweep) -> Result<Outcome> {
    let rep = verify_thm12(&s.entries, &T_GRID)?;
    let c_up = rep.c_upper;
    let c_lo = rep.c_lower.unwrap_or(0.0);
    let ratio = c_up / c_lo;
    let ok = c_up.is_finite() && c_lo > 0.0 && ratio <= 100.0;
    Ok(outcome(
        ok,
        format!("C = {c_up:.4}, c' = {c_lo:.4}, C/c' = {ratio:.2} over t in [1, 100] on {} surfaces", rep.surfaces.len()),
    ))
}

// ---------------------------------------------------------------------------
// 8

fn thm14() -> Result<Outcome> {
    let t0 = Instant::now();
    let (m, inner, outer) = flat_annulus(1.0, 2.0, 128)?;
    let el = 1.0 / dirichlet_energy(&assemble_fem(&m)?.stiffness, &inner, &outer)?;
    let want = 2f64.ln() / (2.0 * PI);
    let oracle = within(el, want, 0.05);
    let mut parts = vec![format!("annulus EL {el:.5} vs {want:.5}")];
    let mut ok = oracle;
    let surfaces = [
        ("thick-g2", double_pants([2.0, 2.5, 3.0])?),
        ("chain-n2-eps0.2", sharpness_family(2, 0.2)?),
        ("chain-n2-eps0.1", sharpness_family(2, 0.1)?),
    ];
    for (name, graph) in surfaces {
        let model = assemble_surface(graph)?;
        let mut fits = Vec::new();
        for h in [SWEEP_H, SWEEP_H / 2.0] {
            let mesh = mesh_surface(&model, h)?;
            let sys = assemble_fem(&mesh)?;
            let rep = verify_thm14(&model, &mesh, &sys, 50, 0)?;
            ok &= rep.rows.len() >= 50;
            fits.push((rep.max_ratio, rep.rows.len()));
        }
        let stable = within(fits[1].0, fits[0].0, 0.5);
        ok &= stable;
        parts.push(format!(
            "{name}: C_fit {:.3} ({} pairs) -> {:.3} ({} pairs)",
            fits[0].0, fits[0].1, fits[1].0, fits[1].1
        ));
    }
    parts.push(format!("{:.0?}", t0.elapsed()));
    Ok(outcome(ok, parts.join(", ")))
}

// ---------------------------------------------------------------------------
// 9

fn curvature() -> Result<Outcome> {
    let (lo, hi) = (1e-3f64.ln(), 1.7f64.ln());
    let mut flat_err = 0.0f64;
    let mut flat_points = 0;
    let mut k1 = 0.0f64;
    let mut k2 = 0.0f64;
    for i in 0..40 {
        let ell = (lo + (hi - lo) * i as f64 / 39.0).exp();
        let w = collar::collar_half_width(ell)?;
        for j in 0..=300 {
            let rho = -w + 2.0 * w * j as f64 / 300.0;
            let a = stretched_curvature_with_step(rho, ell, 1e-4);
            let b = stretched_curvature_with_step(rho, ell, 5e-5);
            k1 = k1.max(a.abs());
            k2 = k2.max(b.abs());
            let flat = [rho - 1e-4, rho, rho + 1e-4].iter().all(|&r| stretch_factor(r, ell) == 1.0);
            if flat {
                flat_points += 1;
                flat_err = flat_err.max((a + 1.0).abs());
            }
        }
    }
    let ok = flat_err <= 1e-6 && k1.is_finite() && within(k2, k1, 0.01);
    Ok(outcome(
        ok,
        format!(
            "|K + 1| <= {flat_err:.1e} on {flat_points} unstretched points, K_fit = {k1:.4} (step 1e-4) vs {k2:.4} (step 5e-5)"
        ),
    ))
}

// ---------------------------------------------------------------------------
// 10

fn audit(s: &Sweep) -> Result<Outcome> {
    let rep = verify_thm11(&s.entries)?;
    let rows: Vec<String> = rep
        .audit
        .iter()
        .map(|a| format!("{}:{:.3}{}", a.surface, a.lambda, if a.passed { "" } else { "!" }))
        .collect();
    Ok(outcome(
        rep.audit.iter().all(|a| a.passed),
        format!("lambda_(2g-2) > 0.20: {}", rows.join(" ")),
    ))
}

// ---------------------------------------------------------------------------
// 11

fn determinism() -> Result<Outcome> {
    let spec = parse_spec(
        r#"{
            "name": "determinism",
            "generator": {"custom": {"double_pants": [2.0, 2.5, 3.0]}},
            "mesh_h": 0.2,
            "solver": {"seed": 7},
            "samples": 20
        }"#,
    )?;
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    let mut hashes = Vec::new();
    for d in &dirs {
        let out = harness::run(&spec, "verify", &RunOptions::new(d.path()))?;
        let mut h = BTreeMap::new();
        for p in &out.artifacts {
            h.insert(p.file_name().unwrap().to_string_lossy().into_owned(), file_hash(p)?);
        }
        hashes.push(h);
    }
    let same = hashes[0] == hashes[1];
    Ok(outcome(
        same && !hashes[0].is_empty(),
        format!("{} artifacts, identical hashes: {same}", hashes[0].len()),
    ))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |i: usize| wanted.is_empty() || wanted.contains(&i);
    let names = [
        "closed-form geometry",
        "discrete analogue",
        "FEM torus oracle",
        "spectral-kernel identity",
        "eigenvalue scaling lower bound",
        "minimax upper bound",
        "two-sided heat trace",
        "extremal length bound",
        "conformal stretch curvature",
        "small-eigenvalue audit",
        "determinism",
    ];
    let needs_sweep = [5, 6, 7, 10].iter().any(|&i| want(i));
    let sweep = if needs_sweep { Some(run_sweep()) } else { None };
    let mut failed = 0;
    for (idx, name) in names.iter().enumerate() {
        let i = idx + 1;
        if !want(i) {
            continue;
        }
        let t0 = Instant::now();
        let res = match i {
            1 => geometry(),
            2 => discrete(),
            3 => torus(),
            4 => kernel(),
            8 => thm14(),
            9 => curvature(),
            11 => determinism(),
            _ => match sweep.as_ref().unwrap() {
                Err(e) => Ok(outcome(false, format!("sweep failed [{}]: {e}", e.code()))),
                Ok(s) => match i {
                    5 => thm11(s),
                    6 => minimax(s),
                    7 => thm12(s),
                    _ => audit(s),
                },
            },
        };
        let (passed, detail) = match res {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error [{}]: {e}", e.code())),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "criterion {i:>2} {} {name}: {detail} [{:.1?}]",
            if passed { "PASS" } else { "FAIL" },
            t0.elapsed()
        );
    }
    if failed == 0 {
        println!("acceptance: all selected criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
