//! Evaluates both sides of every inequality in the catalogue on one surface,
//! gates each by its hypotheses and classifies the outcome.
//!
//! Margins are dimensionless: `(rhs − lhs)/|rhs|` for upper bounds and
//! `(lhs − rhs)/|rhs|` for lower bounds, so a positive margin means the
//! inequality holds with room to spare.

use std::f64::consts::PI;

use serde::Serialize;

use crate::functionals::FunctionalReport;
use crate::imcf::{self, arsinh_ratio};
use crate::mesh::HypothesisFlags;
use crate::tensors::PotentialTensors;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    Connected,
    Convex,
    StarShaped,
    MeanConvex,
    /// Not decidable from a mesh; convexity stands in as a sufficient
    /// condition.
    OuterMinimizing,
    /// `∫ w[e] da = 0` for the virtual-mass potentials, up to the configured
    /// defect tolerance.
    ZeroMeanVirtualMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// `lhs ≤ rhs`.
    Upper,
    /// `lhs ≥ rhs`.
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Holds,
    NearEquality,
    Violated,
    Skipped,
}

/// Groups checks by the result they come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SteklovLower,
    SteklovUpper,
    Payne,
    Capacity,
    WillmoreCapacity,
    AlexandrovFenchel,
    SecondEigenvalue,
    VolumeBounds,
    TensorAverages,
    Willmore,
    VectorField,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub id: &'static str,
    pub family: Family,
    pub description: &'static str,
    pub sense: Sense,
    pub hypothesis_gate: Vec<Hypothesis>,
    /// Hypotheses of the gate that the surface fails (or that could not be
    /// established).
    pub failed_hypotheses: Vec<Hypothesis>,
    /// Set when a gate hypothesis was replaced by a sufficient condition.
    pub sufficient_gate: bool,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub units: &'static str,
    pub margin: Option<f64>,
    pub slack: f64,
    pub status: Status,
    /// Why the check was skipped, when it was.
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AuditConfig {
    /// Allowed negative margin for bounds involving boundary-element results.
    pub bem_slack: f64,
    /// Allowed negative margin for purely geometric comparisons.
    pub geometric_slack: f64,
    /// `|margin|` below this is reported as near equality.
    pub rigidity_tolerance: f64,
    /// Largest accepted `max_e |∫w[e]da| / (|∂U| energy)^{1/2}`.
    pub w_mean_tolerance: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { bem_slack: 0.02, geometric_slack: 0.005, rigidity_tolerance: 0.03, w_mean_tolerance: 1e-2 }
    }
}

/// Everything the catalogue consumes. Missing pieces skip the checks that
/// need them.
#[derive(Debug, Clone, Copy)]
pub struct AuditInputs<'a> {
    pub flags: &'a HypothesisFlags,
    pub functionals: &'a FunctionalReport,
    /// Ascending Steklov eigenvalues (at least two for the `ξ₂` checks).
    pub eigenvalues: Option<&'a [f64]>,
    pub capacity: Option<f64>,
    pub tensors: Option<&'a PotentialTensors>,
    /// Points at which the vector-field identity is sampled.
    pub sample_points: &'a [Vec3],
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
    pub violations: Vec<&'static str>,
    pub config: AuditConfig,
}

impl BoundReport {
    pub fn check(&self, id: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn has_violations(&self) -> bool {
        !self.violations.is_empty()
    }
}

/// Every identifier the catalogue produces, in report order.
pub const CATALOGUE: [&str; 24] = [
    "xi1_lower_support",
    "xi1_quermass",
    "xi1_inverse_support",
    "xi1_mean_curvature_outer_minimizing",
    "xi1_mean_curvature_star_shaped",
    "xi1_willmore",
    "xi1_curvature_power",
    "xi1_payne",
    "cap_quermass",
    "cap_inverse_support",
    "cap_mean_curvature_outer_minimizing",
    "cap_mean_curvature_star_shaped",
    "cap_bray_miao",
    "cap_curvature_power",
    "cap_max_mean_curvature",
    "cap_willmore_arsinh",
    "alexandrov_fenchel",
    "xi2_capacity_volume",
    "xi1_volume",
    "xi2_volume",
    "virtual_mass_average",
    "polarization_average",
    "willmore_energy",
    "vector_field_identity",
];

struct Spec {
    id: &'static str,
    family: Family,
    description: &'static str,
    sense: Sense,
    gate: &'static [Hypothesis],
    units: &'static str,
    geometric: bool,
}

struct Auditor<'a> {
    inputs: AuditInputs<'a>,
    config: AuditConfig,
    checks: Vec<BoundCheck>,
}

impl Auditor<'_> {
    fn holds(&self, h: Hypothesis) -> Option<bool> {
        let f = self.inputs.flags;
        Some(match h {
            Hypothesis::Connected => f.connected,
            Hypothesis::Convex | Hypothesis::OuterMinimizing => f.convex,
            Hypothesis::StarShaped => f.star_shaped,
            Hypothesis::MeanConvex => f.mean_convex,
            Hypothesis::ZeroMeanVirtualMass => {
                return self.inputs.tensors.map(|t| t.w_mean_defect < self.config.w_mean_tolerance)
            }
        })
    }

    /// Records one check. `sides` is evaluated only when the gate passes and
    /// returns `None` when an input is missing, with the reason.
    fn push(&mut self, spec: Spec, sides: impl FnOnce() -> Result<(f64, f64), String>) {
        let slack = if spec.geometric { self.config.geometric_slack } else { self.config.bem_slack };
        let mut check = BoundCheck {
            id: spec.id,
            family: spec.family,
            description: spec.description,
            sense: spec.sense,
            hypothesis_gate: spec.gate.to_vec(),
            failed_hypotheses: Vec::new(),
            sufficient_gate: spec.gate.contains(&Hypothesis::OuterMinimizing),
            lhs: None,
            rhs: None,
            units: spec.units,
            margin: None,
            slack,
            status: Status::Skipped,
            note: None,
        };
        let mut unknown = Vec::new();
        for &h in spec.gate {
            match self.holds(h) {
                Some(true) => {}
                Some(false) => check.failed_hypotheses.push(h),
                None => unknown.push(h),
            }
        }
        if !check.failed_hypotheses.is_empty() {
            check.note = Some("gate".into());
        } else if !unknown.is_empty() {
            check.failed_hypotheses = unknown;
            check.note = Some("gate input unavailable".into());
        } else {
            match sides() {
                Err(reason) => check.note = Some(reason),
                Ok((lhs, rhs)) => {
                    let margin = match spec.sense {
                        Sense::Upper => (rhs - lhs) / rhs.abs(),
                        Sense::Lower => (lhs - rhs) / rhs.abs(),
                    };
                    check.lhs = Some(lhs);
                    check.rhs = Some(rhs);
                    check.margin = Some(margin);
                    check.status = if !margin.is_finite() || margin < -slack {
                        Status::Violated
                    } else if margin.abs() < self.config.rigidity_tolerance {
                        Status::NearEquality
                    } else {
                        Status::Holds
                    };
                }
            }
        }
        self.checks.push(check);
    }
}

fn need<T>(value: Option<T>, what: &str) -> Result<T, String> {
    value.ok_or_else(|| format!("missing input: {what}"))
}

/// Largest relative residual of `div P − |P|²` for `P = x/|x|²`, with the
/// divergence taken by central differences.
pub fn vector_field_residual(points: &[Vec3]) -> f64 {
    let field = |x: &Vec3| x / x.norm_squared();
    points
        .iter()
        .filter(|x| x.norm() > 0.0)
        .map(|x| {
            let h = 1e-4 * x.norm();
            let div: f64 = (0..3)
                .map(|k| {
                    let mut e = Vec3::zeros();
                    e[k] = h;
                    (field(&(x + e))[k] - field(&(x - e))[k]) / (2.0 * h)
                })
                .sum();
            let p2 = field(x).norm_squared();
            (div - p2).abs() / p2
        })
        .fold(0.0, f64::max)
}

/// Tolerance on [`vector_field_residual`]; central differences at relative
/// step 10⁻⁴ are accurate to about 10⁻⁸.
pub const VECTOR_FIELD_TOLERANCE: f64 = 1e-6;

pub fn audit(inputs: AuditInputs<'_>, config: AuditConfig) -> BoundReport {
    use Family as F;
    use Hypothesis as H;
    use Sense::{Lower, Upper};

    let f = inputs.functionals;
    let area = f.area;
    let xi = |k: usize| need(inputs.eigenvalues.and_then(|e| e.get(k).copied()), "Steklov spectrum");
    let cap = || need(inputs.capacity, "capacity");
    let willmore_bounds = || {
        imcf::new_capacity_bound_rhs(area, f.willmore).map_err(|e| e.to_string())
    };
    let quermass_cap = || need(f.quermass_rhs, "quermass integral").map(|q| 1.0 / q);
    let inverse_support = || need(f.inverse_support, "support integral");
    let mean_curvature_cap = f.total_mean_curvature / 2.0;
    let power_mean = (f.mean_curvature_three_halves / area).powf(2.0 / 3.0);

    let mut a = Auditor { inputs, config, checks: Vec::new() };
    let spec = |id, family, description, sense, gate, units, geometric| Spec {
        id,
        family,
        description,
        sense,
        gate,
        units,
        geometric,
    };

    a.push(
        spec("xi1_lower_support", F::SteklovLower, "ξ₁ ≥ min ⟨x,ν⟩/|x|²", Lower, &[H::StarShaped], "1/length", false),
        || Ok((xi(0)?, need(f.min_support_ratio, "support ratio")?)),
    );
    a.push(
        spec("xi1_quermass", F::SteklovUpper, "ξ₁ ≤ 1/(|∂U| ∫₀^∞ (Σ ∫σᵢ tⁱ)⁻¹dt)", Upper, &[H::Convex], "1/length", false),
        || Ok((xi(0)?, quermass_cap()? / area)),
    );
    a.push(
        spec("xi1_inverse_support", F::SteklovUpper, "ξ₁ ≤ ∫⟨x,ν⟩⁻¹da/|∂U|", Upper, &[H::StarShaped], "1/length", false),
        || Ok((xi(0)?, inverse_support()? / area)),
    );
    a.push(
        spec(
            "xi1_mean_curvature_outer_minimizing",
            F::SteklovUpper,
            "ξ₁ ≤ ∫σ₁da/(2|∂U|), mean convex and outer-minimizing",
            Upper,
            &[H::MeanConvex, H::OuterMinimizing],
            "1/length",
            false,
        ),
        || Ok((xi(0)?, mean_curvature_cap / area)),
    );
    a.push(
        spec(
            "xi1_mean_curvature_star_shaped",
            F::SteklovUpper,
            "ξ₁ ≤ ∫σ₁da/(2|∂U|), mean convex and star-shaped",
            Upper,
            &[H::MeanConvex, H::StarShaped],
            "1/length",
            false,
        ),
        || Ok((xi(0)?, mean_curvature_cap / area)),
    );
    a.push(
        spec("xi1_willmore", F::SteklovUpper, "ξ₁ ≤ √(4π/|Σ|) √s/arsinh√s", Upper, &[H::Connected], "1/length", false),
        || {
            let s = willmore_bounds()?.willmore_excess;
            Ok((xi(0)?, (4.0 * PI / area).sqrt() * arsinh_ratio(s)))
        },
    );
    a.push(
        spec("xi1_curvature_power", F::SteklovUpper, "ξ₁ ≤ (∫|σ₁/2|^{3/2}da/|∂U|)^{2/3}", Upper, &[], "1/length", false),
        || Ok((xi(0)?, power_mean)),
    );
    a.push(spec("xi1_payne", F::Payne, "ξ₁ ≤ Cap/|∂U|", Upper, &[], "1/length", false), || {
        Ok((xi(0)?, cap()? / area))
    });

    a.push(
        spec("cap_quermass", F::Capacity, "Cap ≤ 1/∫₀^∞ (Σ ∫σᵢ tⁱ)⁻¹dt", Upper, &[H::Convex], "length", false),
        || Ok((cap()?, quermass_cap()?)),
    );
    a.push(
        spec("cap_inverse_support", F::Capacity, "Cap ≤ ∫⟨x,ν⟩⁻¹da", Upper, &[H::StarShaped], "length", false),
        || Ok((cap()?, inverse_support()?)),
    );
    a.push(
        spec(
            "cap_mean_curvature_outer_minimizing",
            F::Capacity,
            "Cap ≤ ½∫σ₁da, mean convex and outer-minimizing",
            Upper,
            &[H::MeanConvex, H::OuterMinimizing],
            "length",
            false,
        ),
        || Ok((cap()?, mean_curvature_cap)),
    );
    a.push(
        spec(
            "cap_mean_curvature_star_shaped",
            F::Capacity,
            "Cap ≤ ½∫σ₁da, mean convex and star-shaped",
            Upper,
            &[H::MeanConvex, H::StarShaped],
            "length",
            false,
        ),
        || Ok((cap()?, mean_curvature_cap)),
    );
    a.push(
        spec("cap_bray_miao", F::Capacity, "Cap ≤ √π √|∂U| (1 + √(∫H²/16π))", Upper, &[H::Connected], "length", false),
        || Ok((cap()?, willmore_bounds()?.bray_miao)),
    );
    a.push(
        spec("cap_curvature_power", F::Capacity, "Cap ≤ |∂U| (∫|σ₁/2|^{3/2}da/|∂U|)^{2/3}", Upper, &[], "length", false),
        || Ok((cap()?, area * power_mean)),
    );
    a.push(
        spec("cap_max_mean_curvature", F::Capacity, "Cap ≤ ½|∂U| max σ₁", Upper, &[], "length", false),
        || Ok((cap()?, 0.5 * area * f.max_mean_curvature)),
    );
    a.push(
        spec("cap_willmore_arsinh", F::WillmoreCapacity, "Cap ≤ 2√(π|Σ|) √s/arsinh√s", Upper, &[H::Connected], "length", false),
        || Ok((cap()?, willmore_bounds()?.arsinh_bound)),
    );

    a.push(
        spec("alexandrov_fenchel", F::AlexandrovFenchel, "(3/2)∫σ₁da ≤ |∂U|²/V", Upper, &[H::Convex], "length", true),
        || Ok((1.5 * f.total_mean_curvature, area * area / f.volume)),
    );
    a.push(
        spec(
            "xi2_capacity_volume",
            F::SecondEigenvalue,
            "ξ₂ ≤ max{Cap/|∂U|, 2|∂U|/(3V)}",
            Upper,
            &[H::ZeroMeanVirtualMass],
            "1/length",
            false,
        ),
        || Ok((xi(1)?, (cap()? / area).max(2.0 * area / (3.0 * f.volume)))),
    );
    a.push(
        spec("xi1_volume", F::VolumeBounds, "ξ₁ ≤ |∂U|/(3V)", Upper, &[H::Convex, H::ZeroMeanVirtualMass], "1/length", false),
        || Ok((xi(0)?, area / (3.0 * f.volume))),
    );
    a.push(
        spec("xi2_volume", F::VolumeBounds, "ξ₂ ≤ 2|∂U|/(3V)", Upper, &[H::Convex, H::ZeroMeanVirtualMass], "1/length", false),
        || Ok((xi(1)?, 2.0 * area / (3.0 * f.volume))),
    );

    let tensors = inputs.tensors;
    a.push(
        spec("virtual_mass_average", F::TensorAverages, "W_ave ≥ |Ω|/2", Lower, &[], "volume", false),
        || {
            let t = need(tensors, "potential tensors")?;
            Ok((t.w_ave(), t.volume / 2.0))
        },
    );
    a.push(
        spec("polarization_average", F::TensorAverages, "P_ave ≥ 2|Ω|", Lower, &[], "volume", false),
        || {
            let t = need(tensors, "potential tensors")?;
            Ok((t.p_ave(), 2.0 * t.volume))
        },
    );
    a.push(
        spec("willmore_energy", F::Willmore, "∫H²da ≥ 16π", Lower, &[], "dimensionless", true),
        || Ok((f.willmore, 16.0 * PI)),
    );
    let points = inputs.sample_points;
    a.push(
        spec(
            "vector_field_identity",
            F::VectorField,
            "|div P − |P|²| / |P|² ≤ tolerance for P = x/|x|²",
            Upper,
            &[],
            "dimensionless",
            true,
        ),
        || {
            if points.is_empty() {
                return Err("missing input: sample points".into());
            }
            Ok((vector_field_residual(points), VECTOR_FIELD_TOLERANCE))
        },
    );

    let violations = a.checks.iter().filter(|c| c.status == Status::Violated).map(|c| c.id).collect();
    BoundReport { checks: a.checks, violations, config }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElementaryCheck {
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `2√s/arsinh√s < 1 + √(s+1)` at every grid point.
pub fn check_elementary_inequality(s_grid: &[f64]) -> Vec<ElementaryCheck> {
    s_grid
        .iter()
        .map(|&s| {
            assert!(s > 0.0, "the elementary inequality is stated for s > 0");
            let (lhs, rhs) = imcf::elementary_sides(s);
            ElementaryCheck { s, lhs, rhs, holds: lhs < rhs }
        })
        .collect()
}

/// `count` points spaced evenly in `log s` over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}
