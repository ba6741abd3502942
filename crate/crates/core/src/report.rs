//! Full analysis pipeline and the serialized report formats.
//!
//! Every number in a JSON report is written as `{"value": …, "units": …}`;
//! matrices are row-major nested arrays. Keys are sorted and floats are
//! rounded to 12 significant digits, so identical inputs give identical
//! bytes.

use std::io::Write;
use std::path::Path;

use nalgebra::Matrix3;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::audit::{self, AuditConfig, AuditInputs, BoundCheck, BoundReport};
use crate::bem::{self, AssemblyOptions, BemError, BemSystem, SpectralResult, SteklovOptions};
use crate::functionals::{functional_report, FunctionalReport};
use crate::imcf::FlowTrace;
use crate::mesh::{classify, compute_geometry, ClassifyTolerances, HypothesisFlags, MeshError, TriangleMesh};
use crate::tensors::{self, PotentialTensors, TensorError, TensorSlack};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Bem(#[from] BemError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineOptions {
    pub assembly: AssemblyOptions,
    pub steklov: SteklovOptions,
    /// Number of Steklov eigenvalues computed (at least 2 for the `ξ₂` checks).
    pub eigenvalue_count: usize,
    pub classify: ClassifyTolerances,
    pub audit: AuditConfig,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            assembly: AssemblyOptions::default(),
            steklov: SteklovOptions::default(),
            eigenvalue_count: 4,
            classify: ClassifyTolerances::default(),
            audit: AuditConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub name: String,
    pub vertex_count: usize,
    pub face_count: usize,
    pub flags: HypothesisFlags,
    pub functionals: FunctionalReport,
    pub capacity: f64,
    pub spectrum: SpectralResult,
    pub tensors: PotentialTensors,
    pub tensor_slack: TensorSlack,
    pub bounds: BoundReport,
}

pub fn assemble_system(mesh: &TriangleMesh, options: &PipelineOptions) -> Result<BemSystem, BemError> {
    bem::assemble_with(mesh, options.assembly)
}

/// Geometry, classification, capacity, spectrum, tensors and the audit.
pub fn analyze(mesh: &TriangleMesh, name: &str, options: &PipelineOptions) -> Result<Analysis, PipelineError> {
    let geometry = compute_geometry(mesh)?;
    let flags = classify(mesh, &geometry, options.classify);
    let functionals = functional_report(mesh, &geometry);
    let system = assemble_system(mesh, options)?;
    let (capacity, _) = bem::solve_capacity(&system)?;
    let spectrum = bem::solve_steklov(&system, options.eigenvalue_count.max(2), options.steklov)?;
    let tensors = tensors::potential_tensors(mesh, &system)?;
    let tensor_slack = tensors::tensor_bounds_check(&tensors)?;
    let bounds = audit::audit(
        AuditInputs {
            flags: &flags,
            functionals: &functionals,
            eigenvalues: Some(&spectrum.eigenvalues),
            capacity: Some(capacity),
            tensors: Some(&tensors),
            sample_points: mesh.vertices(),
        },
        options.audit,
    );
    Ok(Analysis {
        name: name.to_string(),
        vertex_count: mesh.vertex_count(),
        face_count: mesh.face_count(),
        flags,
        functionals,
        capacity,
        spectrum,
        tensors,
        tensor_slack,
        bounds,
    })
}

pub fn quantity(value: f64, units: &str) -> Value {
    json!({ "value": value, "units": units })
}

pub fn count(value: usize) -> Value {
    json!({ "value": value, "units": "count" })
}

fn optional(value: Option<f64>, units: &str) -> Value {
    value.map_or(Value::Null, |v| quantity(v, units))
}

pub fn list(values: &[f64], units: &str) -> Value {
    json!({ "value": values, "units": units })
}

pub fn matrix(m: &Matrix3<f64>, units: &str) -> Value {
    let rows: Vec<[f64; 3]> = (0..3).map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]]).collect();
    json!({ "value": rows, "units": units, "layout": "row-major" })
}

pub fn flags_json(f: &HypothesisFlags) -> Value {
    json!({
        "connected": f.connected,
        "convex": f.convex,
        "star_shaped": f.star_shaped,
        "mean_convex": f.mean_convex,
        "euler_characteristic": { "value": f.euler_characteristic, "units": "count" },
        "genus": { "value": f.genus, "units": "count" },
    })
}

pub fn functionals_json(f: &FunctionalReport) -> Value {
    json!({
        "area": quantity(f.area, "area"),
        "total_mean_curvature": quantity(f.total_mean_curvature, "length"),
        "willmore": quantity(f.willmore, "dimensionless"),
        "gauss_integral": quantity(f.gauss_integral, "dimensionless"),
        "inverse_support": optional(f.inverse_support, "length"),
        "min_support_ratio": optional(f.min_support_ratio, "1/length"),
        "max_mean_curvature": quantity(f.max_mean_curvature, "1/length"),
        "mean_curvature_three_halves": quantity(f.mean_curvature_three_halves, "1/length"),
        "volume": quantity(f.volume, "volume"),
        "quermass_integral": optional(f.quermass_rhs, "1/length"),
    })
}

pub fn spectrum_json(s: &SpectralResult) -> Value {
    json!({
        "eigenvalues": list(&s.eigenvalues, "1/length"),
        "rayleigh_quotients": list(&s.rayleigh_quotients, "1/length"),
        "skew_ratio": quantity(s.skew_ratio, "dimensionless"),
        "iterations": count(s.iterations),
    })
}

pub fn tensors_json(t: &PotentialTensors, slack: &TensorSlack) -> Value {
    json!({
        "volume": quantity(t.volume, "volume"),
        "virtual_mass": matrix(&t.virtual_mass, "volume"),
        "polarization": matrix(&t.polarization, "volume"),
        "psi_bar": matrix(&t.psi_bar, "dimensionless"),
        "virtual_mass_average": quantity(t.w_ave(), "volume"),
        "polarization_average": quantity(t.p_ave(), "volume"),
        "w_mean_integrals": list(&t.w_mean_integrals, "length^3"),
        "w_mean_defect": quantity(t.w_mean_defect, "dimensionless"),
        "slack": {
            "virtual_mass_min_eigenvalue": quantity(slack.virtual_mass_min_eigenvalue, "dimensionless"),
            "polarization_min_eigenvalue": quantity(slack.polarization_min_eigenvalue, "dimensionless"),
            "virtual_mass_scale": quantity(slack.virtual_mass_scale, "dimensionless"),
            "polarization_scale": quantity(slack.polarization_scale, "dimensionless"),
            "virtual_mass_psd": slack.virtual_mass_psd,
            "polarization_psd": slack.polarization_psd,
        },
    })
}

fn check_json(c: &BoundCheck) -> Value {
    json!({
        "id": c.id,
        "family": c.family,
        "description": c.description,
        "sense": c.sense,
        "hypothesis_gate": c.hypothesis_gate,
        "failed_hypotheses": c.failed_hypotheses,
        "sufficient_gate": c.sufficient_gate,
        "lhs": optional(c.lhs, c.units),
        "rhs": optional(c.rhs, c.units),
        "margin": optional(c.margin, "dimensionless"),
        "slack": quantity(c.slack, "dimensionless"),
        "status": c.status,
        "note": c.note,
    })
}

pub fn bounds_json(report: &BoundReport) -> Value {
    let c = &report.config;
    json!({
        "checks": report.checks.iter().map(check_json).collect::<Vec<_>>(),
        "violations": report.violations,
        "config": {
            "bem_slack": quantity(c.bem_slack, "dimensionless"),
            "geometric_slack": quantity(c.geometric_slack, "dimensionless"),
            "rigidity_tolerance": quantity(c.rigidity_tolerance, "dimensionless"),
            "w_mean_tolerance": quantity(c.w_mean_tolerance, "dimensionless"),
        },
    })
}

pub fn analysis_json(a: &Analysis) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": "analyze",
        "mesh": { "name": a.name, "vertices": count(a.vertex_count), "faces": count(a.face_count) },
        "hypotheses": flags_json(&a.flags),
        "functionals": functionals_json(&a.functionals),
        "capacity": quantity(a.capacity, "length"),
        "spectrum": spectrum_json(&a.spectrum),
        "tensors": tensors_json(&a.tensors, &a.tensor_slack),
        "bounds": bounds_json(&a.bounds),
        "violations": a.bounds.violations,
    })
}

/// Rounds `x` to 12 significant digits.
pub fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn round_all(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            serde_json::Number::from_f64(round_significant(n.as_f64().unwrap())).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_all).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_all(v))).collect::<Map<_, _>>()),
        other => other,
    }
}

/// Pretty-printed JSON with sorted keys and rounded floats, newline-terminated.
pub fn render_json(value: Value) -> String {
    // serde_json's map is ordered by key, so re-collecting sorts every object
    let mut text = serde_json::to_string_pretty(&round_all(value)).expect("JSON values serialize");
    text.push('\n');
    text
}

pub fn write_report(value: Value, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, render_json(value))
}

pub const FLOW_CSV_HEADER: &str = "t,area,willmore,m_H,m_tilde_H,min_H,dt";

fn csv_number(x: f64) -> String {
    format!("{:.11e}", x)
}

pub fn flow_csv(trace: &FlowTrace) -> String {
    let mut out = String::from(FLOW_CSV_HEADER);
    out.push('\n');
    for s in &trace.samples {
        let row = [s.t, s.area, s.willmore, s.hawking_mass, s.modified_hawking_mass, s.min_mean_curvature, s.dt];
        out.push_str(&row.map(csv_number).join(","));
        out.push('\n');
    }
    out
}

pub fn write_flow_csv(trace: &FlowTrace, mut out: impl Write) -> std::io::Result<()> {
    out.write_all(flow_csv(trace).as_bytes())
}

pub fn flow_json(trace: &FlowTrace, name: &str) -> Value {
    let first = trace.samples[0];
    let last = trace.samples[trace.samples.len() - 1];
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": "imcf",
        "mesh": { "name": name },
        "final_time": quantity(last.t, "dimensionless"),
        "steps": count(trace.samples.len() - 1),
        "area_initial": quantity(first.area, "area"),
        "area_final": quantity(last.area, "area"),
        "area_law_error": quantity(trace.area_law_error(), "dimensionless"),
        "hawking_mass_initial": quantity(first.hawking_mass, "length"),
        "hawking_mass_final": quantity(last.hawking_mass, "length"),
        "modified_hawking_mass_initial": quantity(first.modified_hawking_mass, "area"),
        "modified_hawking_mass_final": quantity(last.modified_hawking_mass, "area"),
        "hawking_mass_drop": quantity(trace.hawking_drop(), "dimensionless"),
        "modified_hawking_mass_drop": quantity(trace.modified_hawking_drop(), "dimensionless"),
        "radial_ratio_initial": quantity(first.radial_ratio, "dimensionless"),
        "radial_ratio_final": quantity(last.radial_ratio, "dimensionless"),
        "monotone": trace.is_monotone(),
        "violations": if trace.is_monotone() { Vec::<&str>::new() } else { vec!["mass_monotonicity"] },
    })
}
