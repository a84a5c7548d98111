//! Surface specs, command orchestration and report emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::collar::{self, IMethod};
use crate::error::{Error, Result, Violation};
use crate::extremal::{verify_thm14, Thm14Report};
use crate::graphana::{self, check_discrete_bounds, effective_resistance, parse_edge_list, path_resistance};
use crate::mesh::TriMesh;
use crate::pants::{self, Gluing, PantsGraph, SlotRef, SurfaceModel};
use crate::sharpness::{
    heat_spectrum, minimax_bound, verify_thm11, verify_thm12, write_rows, SweepEntry,
    Thm11Report, Thm12Report,
};
use crate::spectral::{self, assemble_fem, EigenOptions, FemSystem, Spectrum};
use crate::surfmesh::{mesh_surface, MAX_H};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default heat-trace times.
pub const DEFAULT_T_GRID: [f64; 9] = [1.0, 2.0, 3.0, 5.0, 10.0, 20.0, 30.0, 50.0, 100.0];

pub const CLAMP_DISCLOSURE: &str =
    "thick-part injectivity radius is not computed; the collar-lemma lower bound asinh(1) is used as its value";

pub const INTERPRETATIONS: [&str; 4] = [
    "extremal length uses Dirichlet data on whole graph-metric balls, a surrogate for curves avoiding the open discs",
    "R_k is the largest Rayleigh quotient of k + 1 disjointly supported test functions, for 1 <= k < n",
    "even support lengths use a symmetric trapezoid profile with two middle plateaus",
    "heat statistic is computed through the spectral identity from the resolved eigenvalues",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GluingSpec {
    pub a: SlotRef,
    pub b: SlotRef,
    pub length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twist: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharpnessGen {
    pub n: usize,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomGen {
    pub double_pants: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Sharpness(SharpnessGen),
    Custom(CustomGen),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_cut: Option<usize>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_tol() -> f64 {
    1e-8
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            k_cut: None,
            tol: default_tol(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepItem {
    pub n: usize,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub surfaces: Vec<SweepItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pants: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gluings: Option<Vec<GluingSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
    pub mesh_h: f64,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.out.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn positive(&mut self, v: Option<&Value>, path: &str) {
        match v.and_then(Value::as_f64) {
            Some(x) if x > 0.0 && x.is_finite() => {}
            Some(x) => self.push(path, format!("must be positive, got {x}")),
            None => self.push(path, "must be a number"),
        }
    }

    fn mesh_h(&mut self, v: Option<&Value>, path: &str) {
        match v.and_then(Value::as_f64) {
            Some(x) if x > 0.0 && x <= MAX_H => {}
            Some(x) => self.push(path, format!("must lie in (0, {MAX_H}], got {x}")),
            None => self.push(path, "must be a number"),
        }
    }

    fn epsilon(&mut self, v: Option<&Value>, path: &str) {
        match v.and_then(Value::as_f64) {
            Some(x) if x > 0.0 && x < collar::short_length() => {}
            Some(x) => self.push(path, format!("must lie in (0, 2asinh(1)), got {x}")),
            None => self.push(path, "must be a number"),
        }
    }

    fn chain_n(&mut self, v: Option<&Value>, path: &str) {
        match v.and_then(Value::as_u64) {
            Some(n) if n >= 2 => {}
            _ => self.push(path, "must be an integer >= 2"),
        }
    }
}

/// Schema checks on the parsed JSON value. Twists are reported separately
/// as an unsupported feature.
fn validate(v: &Value) -> std::result::Result<Vec<Violation>, Error> {
    let mut c = Checker { out: Vec::new() };
    let Some(obj) = v.as_object() else {
        c.push("$", "spec must be a JSON object");
        return Ok(c.out);
    };
    if !obj.get("name").is_some_and(Value::is_string) {
        c.push("name", "must be a string");
    }
    c.mesh_h(obj.get("mesh_h"), "mesh_h");
    let explicit = obj.contains_key("pants") || obj.contains_key("gluings");
    let generated = obj.contains_key("generator");
    if explicit == generated {
        c.push("$", "exactly one of an explicit pants graph (pants, gluings) or a generator is required");
    }
    if explicit {
        match obj.get("pants").and_then(Value::as_array) {
            Some(p) if p.iter().all(Value::is_string) => {}
            _ => c.push("pants", "must be a list of labels"),
        }
        match obj.get("gluings").and_then(Value::as_array) {
            Some(gs) => {
                for (i, g) in gs.iter().enumerate() {
                    c.positive(g.get("length"), &format!("gluings[{i}].length"));
                    if let Some(t) = g.get("twist") {
                        match t.as_f64() {
                            Some(x) if x == 0.0 => {}
                            Some(x) => {
                                return Err(Error::Unsupported(format!(
                                    "gluings[{i}].twist = {x}: only zero twists are supported"
                                )))
                            }
                            None => c.push(format!("gluings[{i}].twist"), "must be a number"),
                        }
                    }
                }
            }
            None => c.push("gluings", "must be a list"),
        }
    }
    if let Some(g) = obj.get("generator") {
        match (g.get("sharpness"), g.get("custom")) {
            (Some(s), None) => {
                c.chain_n(s.get("n"), "generator.sharpness.n");
                c.epsilon(s.get("epsilon"), "generator.sharpness.epsilon");
            }
            (None, Some(cu)) => match cu.get("double_pants").and_then(Value::as_array) {
                Some(l) if l.len() == 3 => {
                    for (i, x) in l.iter().enumerate() {
                        c.positive(Some(x), &format!("generator.custom.double_pants[{i}]"));
                    }
                }
                _ => c.push("generator.custom.double_pants", "must be three cuff lengths"),
            },
            _ => c.push("generator", "must be {\"sharpness\": {...}} or {\"custom\": {...}}"),
        }
    }
    if let Some(s) = obj.get("solver") {
        if let Some(t) = s.get("tol") {
            c.positive(Some(t), "solver.tol");
        }
        if let Some(k) = s.get("k_cut") {
            if !k.as_u64().is_some_and(|k| k >= 1) {
                c.push("solver.k_cut", "must be an integer >= 1");
            }
        }
    }
    if let Some(ts) = obj.get("t_grid") {
        check_t_grid(&mut c, ts, "t_grid");
    }
    if let Some(sw) = obj.get("sweep") {
        match sw.get("surfaces").and_then(Value::as_array) {
            Some(items) => {
                for (i, it) in items.iter().enumerate() {
                    c.chain_n(it.get("n"), &format!("sweep.surfaces[{i}].n"));
                    c.epsilon(it.get("epsilon"), &format!("sweep.surfaces[{i}].epsilon"));
                    if let Some(h) = it.get("h") {
                        c.mesh_h(Some(h), &format!("sweep.surfaces[{i}].h"));
                    }
                }
            }
            None => c.push("sweep.surfaces", "must be a list"),
        }
        if let Some(ts) = sw.get("t_grid") {
            check_t_grid(&mut c, ts, "sweep.t_grid");
        }
    }
    Ok(c.out)
}

fn check_t_grid(c: &mut Checker, ts: &Value, path: &str) {
    match ts.as_array() {
        Some(a) if !a.is_empty() => {
            for (i, t) in a.iter().enumerate() {
                match t.as_f64() {
                    Some(x) if (1.0..=100.0).contains(&x) => {}
                    _ => c.push(format!("{path}[{i}]"), "heat times must lie in [1, 100]"),
                }
            }
        }
        _ => c.push(path, "must be a nonempty list"),
    }
}

/// Parses and validates a spec. Malformed JSON gives a parse error with
/// line and column; schema problems give the full list of violations.
pub fn parse_spec(text: &str) -> Result<SurfaceSpec> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let violations = validate(&value)?;
    if !violations.is_empty() {
        return Err(Error::Spec(violations));
    }
    let spec: SurfaceSpec = serde_json::from_value(value).map_err(|e| {
        Error::Spec(vec![Violation {
            path: "$".into(),
            message: e.to_string(),
        }])
    })?;
    if let Err(e) = spec.pants_graph() {
        return Err(Error::Spec(vec![Violation {
            path: "gluings".into(),
            message: e.to_string(),
        }]));
    }
    Ok(spec)
}

/// Canonical serialization (fixed field order, pretty-printed).
pub fn serialize_spec(spec: &SurfaceSpec) -> String {
    serde_json::to_string_pretty(spec).expect("spec serializes") + "\n"
}

pub fn spec_hash(spec: &SurfaceSpec) -> String {
    hex(&Sha256::digest(serialize_spec(spec).as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a file, as lowercase hex.
pub fn file_hash(path: &Path) -> Result<String> {
    Ok(hex(&Sha256::digest(fs::read(path)?)))
}

impl SurfaceSpec {
    pub fn pants_graph(&self) -> Result<PantsGraph> {
        match (&self.generator, &self.gluings) {
            (Some(Generator::Sharpness(s)), _) => pants::sharpness_family(s.n, s.epsilon),
            (Some(Generator::Custom(c)), _) => pants::double_pants(c.double_pants),
            (None, Some(gs)) => {
                let labels = self.pants.clone().unwrap_or_default();
                let gluings = gs
                    .iter()
                    .map(|g| Gluing {
                        a: g.a,
                        b: g.b,
                        length: g.length,
                    })
                    .collect();
                PantsGraph::new(labels, gluings)
            }
            (None, None) => Err(Error::Command("spec has no surface".into())),
        }
    }

    pub fn t_grid(&self) -> Vec<f64> {
        self.t_grid.clone().unwrap_or_else(|| DEFAULT_T_GRID.to_vec())
    }
}

pub const COMMANDS: [&str; 7] = ["build", "spectrum", "heat-trace", "extremal", "graph", "verify", "sweep"];

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub h: Option<f64>,
    pub graph: Option<PathBuf>,
    pub samples: Option<usize>,
}

impl RunOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self {
            out: out.into(),
            seed: None,
            h: None,
            graph: None,
            samples: None,
        }
    }
}

/// Result of a command: the artifacts written and the summary document.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub artifacts: Vec<PathBuf>,
    pub summary: Value,
}

struct Built {
    model: SurfaceModel,
    mesh: TriMesh,
    h: f64,
    i_value: f64,
}

struct Runner<'a> {
    spec: &'a SurfaceSpec,
    opts: &'a RunOptions,
    artifacts: Vec<PathBuf>,
}

impl Runner<'_> {
    fn seed(&self) -> u64 {
        self.opts.seed.unwrap_or(self.spec.solver.seed)
    }

    fn h(&self) -> f64 {
        self.opts.h.unwrap_or(self.spec.mesh_h)
    }

    fn eigen_opts(&self) -> EigenOptions {
        EigenOptions {
            tol: self.spec.solver.tol,
            seed: self.seed(),
            ..EigenOptions::default()
        }
    }

    fn metadata(&self, h: f64) -> Value {
        json!({
            "tool": "hyplab",
            "version": VERSION,
            "spec_hash": spec_hash(self.spec),
            "mesh_h": h,
            "solver": {
                "tol": self.spec.solver.tol,
                "seed": self.seed(),
                "k_cut": self.spec.solver.k_cut,
                "shift": EigenOptions::default().shift,
                "block": EigenOptions::default().block,
            },
            "iota_clamp": CLAMP_DISCLOSURE,
            "interpretations": INTERPRETATIONS,
        })
    }

    fn path(&mut self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.opts.out)?;
        let p = self.opts.out.join(name);
        self.artifacts.push(p.clone());
        Ok(p)
    }

    fn write_json(&mut self, name: &str, v: &Value) -> Result<()> {
        let p = self.path(name)?;
        let text = serde_json::to_string_pretty(v).map_err(|e| Error::Command(e.to_string()))?;
        fs::write(p, text + "\n")?;
        Ok(())
    }

    fn writer(&mut self, name: &str) -> Result<std::io::BufWriter<fs::File>> {
        let p = self.path(name)?;
        Ok(std::io::BufWriter::new(fs::File::create(p)?))
    }

    fn build_at(&self, graph: PantsGraph, h: f64) -> Result<Built> {
        let model = pants::assemble_surface(graph)?;
        let mesh = mesh_surface(&model, h)?;
        let i_value = collar::surface_i(&model, IMethod::Integral, Some(&mesh))?;
        Ok(Built {
            model,
            mesh,
            h,
            i_value,
        })
    }

    fn build(&self) -> Result<Built> {
        self.build_at(self.spec.pants_graph()?, self.h())
    }

    fn surface_doc(&self, b: &Built) -> Result<Value> {
        let audit = b.model.collar_audit()?;
        Ok(json!({
            "name": self.spec.name,
            "genus": b.model.genus,
            "pants": b.model.graph.pants_count(),
            "volume": b.model.volume,
            "collars": b.model.collars.len(),
            "I_geodesic": collar::surface_i(&b.model, IMethod::Geodesic, None)?,
            "I_integral": b.i_value,
            "collar_audit": {
                "seam_margin": audit.seam_margin,
                "altitude_margin": audit.altitude_margin,
                "passed": audit.passed(),
            },
            "mesh": {
                "vertices": b.mesh.vertex_count(),
                "triangles": b.mesh.triangles.len(),
                "euler_characteristic": b.mesh.euler_characteristic(),
                "area": b.mesh.total_area()?,
                "min_angle_deg": b.mesh.min_angle_deg(),
            },
        }))
    }

    fn spectrum(&self, b: &Built, sys: &FemSystem) -> Result<Spectrum> {
        let k = self
            .spec
            .solver
            .k_cut
            .unwrap_or_else(|| spectral::default_k_cut(b.model.genus));
        spectral::lowest_eigenpairs(sys, k + 1, &self.eigen_opts())
    }

    fn heat_spectrum(&self, b: &Built, sys: &FemSystem, t_min: f64) -> Result<Spectrum> {
        heat_spectrum(sys, b.model.volume, b.model.genus, t_min, &self.eigen_opts())
    }

    fn entry(&self, name: &str, b: &Built, spectrum: Spectrum) -> SweepEntry {
        SweepEntry {
            name: name.to_string(),
            genus: b.model.genus,
            i_value: b.i_value,
            volume: b.model.volume,
            layout: b.model.graph.layout,
            spectrum,
        }
    }

    fn cmd_build(&mut self) -> Result<Value> {
        let b = self.build()?;
        let mut w = self.writer("mesh.txt")?;
        b.mesh.write_text(&mut w)?;
        w.flush()?;
        let doc = json!({ "metadata": self.metadata(b.h), "surface": self.surface_doc(&b)? });
        self.write_json("surface.json", &doc)?;
        Ok(doc)
    }

    fn cmd_spectrum(&mut self) -> Result<Value> {
        let b = self.build()?;
        let sys = assemble_fem(&b.mesh)?;
        let sp = self.spectrum(&b, &sys)?;
        let w = self.writer("spectrum.csv")?;
        sp.write_csv(w)?;
        let mut w = self.writer("eigenvectors.bin")?;
        sp.write_eigenvectors(&mut w)?;
        w.flush()?;
        let doc = json!({
            "metadata": self.metadata(b.h),
            "surface": self.surface_doc(&b)?,
            "count": sp.count(),
            "max_residual": sp.residuals.iter().copied().fold(0.0, f64::max),
            "eigenvalues": sp.eigenvalues,
        });
        self.write_json("spectrum.json", &doc)?;
        Ok(doc)
    }

    fn thm12(&mut self, entries: &[SweepEntry], t_grid: &[f64]) -> Result<Thm12Report> {
        let rep = verify_thm12(entries, t_grid)?;
        let w = self.writer("thm12.csv")?;
        write_rows(w, &rep.rows)?;
        Ok(rep)
    }

    fn cmd_heat(&mut self) -> Result<Value> {
        let b = self.build()?;
        let sys = assemble_fem(&b.mesh)?;
        let t_grid = self.spec.t_grid();
        let t_min = t_grid.iter().copied().fold(f64::INFINITY, f64::min);
        let sp = self.heat_spectrum(&b, &sys, t_min)?;
        let entries = [self.entry(&self.spec.name, &b, sp)];
        let rep = self.thm12(&entries, &t_grid)?;
        let plot = emit_plot_data(&[PlotSource::Thm12(&rep)])?;
        self.write_plot(&plot)?;
        let doc = json!({ "metadata": self.metadata(b.h), "thm12": thm12_summary(&rep) });
        self.write_json("heat_trace.json", &doc)?;
        Ok(doc)
    }

    fn thm14(&mut self, b: &Built, sys: &FemSystem) -> Result<Thm14Report> {
        let samples = self.opts.samples.or(self.spec.samples).unwrap_or(50);
        let rep = verify_thm14(&b.model, &b.mesh, sys, samples, self.seed())?;
        let w = self.writer("thm14.csv")?;
        rep.write_csv(w)?;
        Ok(rep)
    }

    fn cmd_extremal(&mut self) -> Result<Value> {
        let b = self.build()?;
        let sys = assemble_fem(&b.mesh)?;
        let rep = self.thm14(&b, &sys)?;
        let doc = json!({ "metadata": self.metadata(b.h), "thm14": thm14_summary(&rep) });
        self.write_json("extremal.json", &doc)?;
        Ok(doc)
    }

    fn cmd_graph(&mut self) -> Result<Value> {
        let (g, source) = match &self.opts.graph {
            Some(p) => (parse_edge_list(&fs::read_to_string(p)?)?, p.display().to_string()),
            None => (graphana::pants_network(&self.spec.pants_graph()?)?, "pants network".to_string()),
        };
        let mut rows = Vec::new();
        for v in 1..g.n {
            rows.push(ResistanceRow {
                u: 0,
                v,
                r_eff: effective_resistance(&g, 0, v)?,
                path_bound: path_resistance(&g, 0, v)?,
            });
        }
        let w = self.writer("resistance.csv")?;
        write_rows(w, &rows)?;
        let bounds = if g.regular_degree.is_some() {
            let rep = check_discrete_bounds(&g, 10_000)?;
            let w = self.writer("graph_bounds.csv")?;
            rep.write_csv(w)?;
            json!({
                "trace_residual": rep.trace_residual,
                "min_ratio": rep.min_ratio,
                "argmin_k": rep.argmin_k,
                "heat_constant": rep.heat_constant,
                "argmax_t": rep.argmax_t,
            })
        } else {
            Value::Null
        };
        let doc = json!({
            "metadata": self.metadata(self.h()),
            "graph": { "source": source, "vertices": g.n, "edges": g.edges.len(), "regular_degree": g.regular_degree },
            "discrete_bounds": bounds,
            "max_resistance_over_path_bound": rows.iter().map(|r| r.r_eff / r.path_bound).fold(0.0, f64::max),
        });
        self.write_json("graph.json", &doc)?;
        Ok(doc)
    }

    fn minimax(&self, name: &str, b: &Built, sys: &FemSystem, sp: &Spectrum, ks: &[usize]) -> Result<Vec<MinimaxRow>> {
        let layout = b
            .model
            .graph
            .layout
            .ok_or_else(|| Error::Command("minimax bounds need a chain surface".into()))?;
        let g2 = (b.model.genus * b.model.genus) as f64;
        let mut rows = Vec::new();
        for &k in ks {
            let r_k = minimax_bound(&b.model, &b.mesh, sys, k)?;
            let lambda_k = sp.eigenvalues.get(k).copied().ok_or_else(|| Error::Coverage {
                requested: format!("lambda_{k}"),
                available: format!("{} eigenpairs", sp.count()),
            })?;
            rows.push(MinimaxRow {
                surface: name.to_string(),
                n: layout.blocks,
                epsilon: layout.epsilon,
                h: b.h,
                k,
                r_k,
                lambda_k,
                valid: lambda_k <= r_k,
                scaled: r_k * g2 / (layout.epsilon * (k * k) as f64),
            });
        }
        Ok(rows)
    }

    fn write_plot(&mut self, rows: &[PlotRow]) -> Result<()> {
        let w = self.writer("plot.csv")?;
        write_rows(w, rows)
    }

    fn cmd_verify(&mut self) -> Result<Value> {
        let b = self.build()?;
        let sys = assemble_fem(&b.mesh)?;
        let t_grid = self.spec.t_grid();
        let t_min = t_grid.iter().copied().fold(f64::INFINITY, f64::min);
        let sp = self.heat_spectrum(&b, &sys, t_min)?;
        let mm = match b.model.graph.layout {
            Some(l) => Some(self.minimax(&self.spec.name, &b, &sys, &sp, &(1..l.blocks).collect::<Vec<_>>())?),
            None => None,
        };
        let entries = [self.entry(&self.spec.name, &b, sp)];
        let t11 = verify_thm11(&entries)?;
        let w = self.writer("thm11.csv")?;
        write_rows(w, &t11.rows)?;
        let t12 = self.thm12(&entries, &t_grid)?;
        let t14 = self.thm14(&b, &sys)?;
        if let Some(rows) = &mm {
            let w = self.writer("minimax.csv")?;
            write_rows(w, rows)?;
        }
        let plot = emit_plot_data(&[
            PlotSource::Thm11(&t11),
            PlotSource::Thm12(&t12),
            PlotSource::Thm14(&self.spec.name, &t14),
        ])?;
        self.write_plot(&plot)?;
        let doc = json!({
            "metadata": self.metadata(b.h),
            "surface": self.surface_doc(&b)?,
            "thm11": thm11_summary(&t11),
            "thm12": thm12_summary(&t12),
            "thm14": thm14_summary(&t14),
            "minimax": mm.as_ref().map(|rows| minimax_summary(rows)),
        });
        self.write_json("summary.json", &doc)?;
        Ok(doc)
    }

    fn cmd_sweep(&mut self) -> Result<Value> {
        let sweep = self
            .spec
            .sweep
            .clone()
            .ok_or_else(|| Error::Command("the sweep command needs a `sweep` section".into()))?;
        let t_grid = sweep.t_grid.clone().unwrap_or_else(|| self.spec.t_grid());
        let t_min = t_grid.iter().copied().fold(f64::INFINITY, f64::min);
        let mut entries = Vec::new();
        let mut minimax = Vec::new();
        // the spec's own surface comes first
        let base = self.build()?;
        let sys = assemble_fem(&base.mesh)?;
        let sp = self.heat_spectrum(&base, &sys, t_min)?;
        entries.push(self.entry(&self.spec.name, &base, strip(sp)));
        drop(sys);
        for item in &sweep.surfaces {
            let name = format!("chain-n{}-eps{}", item.n, item.epsilon);
            let h = item.h.or(self.opts.h).unwrap_or(self.spec.mesh_h);
            let b = self.build_at(pants::sharpness_family(item.n, item.epsilon)?, h)?;
            let sys = assemble_fem(&b.mesh)?;
            let sp = self.heat_spectrum(&b, &sys, t_min)?;
            let ks = item.k.clone().unwrap_or_else(|| (1..item.n).collect());
            minimax.extend(self.minimax(&name, &b, &sys, &sp, &ks)?);
            entries.push(self.entry(&name, &b, strip(sp)));
        }
        let t11 = verify_thm11(&entries)?;
        let w = self.writer("thm11.csv")?;
        write_rows(w, &t11.rows)?;
        let t12 = self.thm12(&entries, &t_grid)?;
        let w = self.writer("minimax.csv")?;
        write_rows(w, &minimax)?;
        let plot = emit_plot_data(&[PlotSource::Thm11(&t11), PlotSource::Thm12(&t12)])?;
        self.write_plot(&plot)?;
        let doc = json!({
            "metadata": self.metadata(self.h()),
            "surfaces": entries.iter().map(|e| json!({"name": e.name, "genus": e.genus, "I": e.i_value, "eigenpairs": e.spectrum.count()})).collect::<Vec<_>>(),
            "thm11": thm11_summary(&t11),
            "thm12": thm12_summary(&t12),
            "minimax": minimax_summary(&minimax),
        });
        self.write_json("summary.json", &doc)?;
        Ok(doc)
    }
}

/// Drops eigenvectors that the sweep reports do not need.
fn strip(mut sp: Spectrum) -> Spectrum {
    sp.eigenvectors = Vec::new();
    sp
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResistanceRow {
    pub u: usize,
    pub v: usize,
    pub r_eff: f64,
    pub path_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimaxRow {
    pub surface: String,
    pub n: usize,
    pub epsilon: f64,
    pub h: f64,
    pub k: usize,
    #[serde(rename = "R_k")]
    pub r_k: f64,
    pub lambda_k: f64,
    /// `λ_k ≤ R_k`.
    pub valid: bool,
    /// `R_k g² / (ε k²)`.
    pub scaled: f64,
}

pub fn thm11_summary(r: &Thm11Report) -> Value {
    json!({
        "min_ratio": r.min_ratio,
        "spread": r.spread,
        "surface_min": r.surface_min,
        "audit": r.audit,
    })
}

pub fn thm12_summary(r: &Thm12Report) -> Value {
    json!({
        "c_upper": r.c_upper,
        "c_lower": r.c_lower,
        "surfaces": r.surfaces,
    })
}

pub fn thm14_summary(r: &Thm14Report) -> Value {
    json!({
        "pairs": r.rows.len(),
        "attempts": r.attempts,
        "max_ratio": r.max_ratio,
        "min_ratio": r.rows.iter().map(|x| x.ratio).fold(f64::INFINITY, f64::min),
        "correlation_el_dw": r.correlation,
    })
}

pub fn minimax_summary(rows: &[MinimaxRow]) -> Value {
    json!({
        "fitted_c": rows.iter().map(|r| r.scaled).fold(0.0, f64::max),
        "all_valid": rows.iter().all(|r| r.valid),
        "instances": rows.len(),
    })
}

/// Report sources for plot data.
pub enum PlotSource<'a> {
    Thm11(&'a Thm11Report),
    Thm12(&'a Thm12Report),
    Thm14(&'a str, &'a Thm14Report),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotRow {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

/// Long-format `(series, x, y)` rows: heat statistic and fitted envelope
/// against `t`, eigenvalue ratio against `k`, and `EL` against the bound.
pub fn emit_plot_data(reports: &[PlotSource]) -> Result<Vec<PlotRow>> {
    if reports.is_empty() {
        return Err(Error::Command("no reports to project".into()));
    }
    let mut rows = Vec::new();
    for r in reports {
        match r {
            PlotSource::Thm11(t) => {
                for row in &t.rows {
                    rows.push(PlotRow {
                        series: format!("thm11:{}", row.surface),
                        x: row.k as f64,
                        y: row.ratio,
                    });
                }
            }
            PlotSource::Thm12(t) => {
                for s in &t.surfaces {
                    for row in t.rows.iter().filter(|r| r.surface == s.surface) {
                        rows.push(PlotRow {
                            series: format!("heat:{}:stat", s.surface),
                            x: row.t,
                            y: row.stat,
                        });
                        rows.push(PlotRow {
                            series: format!("heat:{}:bound", s.surface),
                            x: row.t,
                            y: t.c_upper * (s.i_value / row.t).sqrt(),
                        });
                    }
                }
            }
            PlotSource::Thm14(name, t) => {
                for row in &t.rows {
                    rows.push(PlotRow {
                        series: format!("thm14:{name}"),
                        x: row.bound,
                        y: row.el,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Runs one command, writing artifacts under `opts.out`.
pub fn run(spec: &SurfaceSpec, command: &str, opts: &RunOptions) -> Result<RunOutput> {
    if let Some(h) = opts.h {
        if !(h > 0.0 && h <= MAX_H) {
            return Err(Error::Spec(vec![Violation {
                path: "--h".into(),
                message: format!("must lie in (0, {MAX_H}], got {h}"),
            }]));
        }
    }
    let mut r = Runner {
        spec,
        opts,
        artifacts: Vec::new(),
    };
    let summary = match command {
        "build" => r.cmd_build()?,
        "spectrum" => r.cmd_spectrum()?,
        "heat-trace" => r.cmd_heat()?,
        "extremal" => r.cmd_extremal()?,
        "graph" => r.cmd_graph()?,
        "verify" => r.cmd_verify()?,
        "sweep" => r.cmd_sweep()?,
        other => {
            return Err(Error::Command(format!(
                "unknown command `{other}`; expected one of {}",
                COMMANDS.join(", ")
            )))
        }
    };
    Ok(RunOutput {
        artifacts: r.artifacts,
        summary,
    })
}

/// Machine-readable error document.
pub fn error_json(e: &Error) -> Value {
    let mut v = json!({
        "status": "error",
        "code": e.code(),
        "message": e.to_string(),
    });
    if let Error::Spec(list) = e {
        v["violations"] = json!(list);
    }
    if let Error::Parse { line, column, .. } = e {
        v["line"] = json!(line);
        v["column"] = json!(column);
    }
    v
}
