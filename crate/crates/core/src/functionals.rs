//! Scalar geometric functionals of a closed surface: curvature integrals,
//! support-function integrals, volume and the quermassintegral capacity
//! integral.

use serde::Serialize;
use thiserror::Error;

use crate::mesh::{SurfaceGeometry, TriangleMesh};
use crate::quad::{self, QuadratureError};

#[derive(Debug, Error, PartialEq)]
pub enum FunctionalError {
    #[error("surface is not star-shaped with respect to the origin (min ⟨x,ν⟩ = {0:e})")]
    StarShapeRequired(f64),
    #[error("curvature integral {index} is not positive ({value:e})")]
    NonPositiveCoefficient { index: usize, value: f64 },
    #[error("∫₀^∞ dt / p(t) diverges for a polynomial of degree {0}")]
    DivergentIntegral(usize),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Curvature integrals use `H = σ₁ = λ₁ + λ₂` and `σ₂ = λ₁λ₂`.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionalReport {
    pub area: f64,
    pub total_mean_curvature: f64,
    pub willmore: f64,
    pub gauss_integral: f64,
    /// `∫⟨x,ν⟩⁻¹ da`, present only on star-shaped surfaces.
    pub inverse_support: Option<f64>,
    /// `min ⟨x,ν⟩/|x|²`, present only on star-shaped surfaces.
    pub min_support_ratio: Option<f64>,
    /// `max σ₁` over the vertices.
    pub max_mean_curvature: f64,
    /// `∫|σ₁/2|^{3/2} da`.
    pub mean_curvature_three_halves: f64,
    pub volume: f64,
    /// `∫₀^∞ (|∂U| + ∫σ₁ t + ∫σ₂ t²)⁻¹ dt`, present when every coefficient
    /// is positive.
    pub quermass_rhs: Option<f64>,
}

pub fn functional_report(mesh: &TriangleMesh, geometry: &SurfaceGeometry) -> FunctionalReport {
    let area = geometry.total_area();
    let total_mean_curvature = geometry.integrate(|v| geometry.mean[v]);
    let gauss_integral = geometry.integrate(|v| geometry.gauss[v]);
    FunctionalReport {
        area,
        total_mean_curvature,
        willmore: geometry.integrate(|v| geometry.mean[v].powi(2)),
        gauss_integral,
        inverse_support: inverse_support(geometry).ok(),
        min_support_ratio: min_support_ratio(geometry).ok(),
        max_mean_curvature: geometry.mean.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_curvature_three_halves: geometry.integrate(|v| (geometry.mean[v] / 2.0).abs().powf(1.5)),
        volume: mesh.enclosed_volume(),
        quermass_rhs: quermass_rhs(&[area, total_mean_curvature, gauss_integral]).ok(),
    }
}

fn require_star_shaped(geometry: &SurfaceGeometry) -> Result<(), FunctionalError> {
    let min = geometry.support.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        Ok(())
    } else {
        Err(FunctionalError::StarShapeRequired(min))
    }
}

pub fn inverse_support(geometry: &SurfaceGeometry) -> Result<f64, FunctionalError> {
    require_star_shaped(geometry)?;
    Ok(geometry.integrate(|v| 1.0 / geometry.support[v]))
}

/// `min ⟨x,ν⟩/|x|²` over the vertices.
pub fn min_support_ratio(geometry: &SurfaceGeometry) -> Result<f64, FunctionalError> {
    require_star_shaped(geometry)?;
    Ok(geometry
        .support
        .iter()
        .zip(&geometry.radial)
        .map(|(s, r)| s / (r * r))
        .fold(f64::INFINITY, f64::min))
}

/// `∫₀^∞ (Σᵢ cᵢ tⁱ)⁻¹ dt` for the curvature integrals `cᵢ = ∫σᵢ da`
/// (`c₀ = |∂U|`).
///
/// The integral is split at `T = 10³·√(c₀/4π)`: G7–K15 on `[0, T]`, and on
/// `[T, ∞)` the asymptotic series of `1/p(t)` in powers of `1/t`, summed
/// term by term.
pub fn quermass_rhs(coefficients: &[f64]) -> Result<f64, FunctionalError> {
    for (index, &value) in coefficients.iter().enumerate() {
        if value < 0.0 || !value.is_finite() || (index == 0 && value == 0.0) {
            return Err(FunctionalError::NonPositiveCoefficient { index, value });
        }
    }
    let degree = coefficients.iter().rposition(|&c| c > 0.0).unwrap_or(0);
    if degree < 2 {
        return Err(FunctionalError::DivergentIntegral(degree));
    }
    let c = &coefficients[..=degree];
    let poly = |t: f64| c.iter().rev().fold(0.0, |acc, &ci| acc * t + ci);

    let cutoff = 1e3 * (c[0] / (4.0 * std::f64::consts::PI)).sqrt();
    let head = quad::integrate(|t| 1.0 / poly(t), 0.0, cutoff, 1e-12)?;

    // 1/p(t) = t^{-d}/c_d · Σ_k b_k t^{-k},  with Σ b_k x^k = 1 / Σ_j (c_{d-j}/c_d) x^j
    let lead = c[degree];
    let u: Vec<f64> = (1..=degree).map(|j| c[degree - j] / lead).collect();
    let mut b = vec![1.0];
    let mut tail = 0.0;
    for k in 0..40 {
        if k > 0 {
            let bk = -(1..=degree.min(k)).map(|j| u[j - 1] * b[k - j]).sum::<f64>();
            b.push(bk);
        }
        let power = (degree + k - 1) as i32;
        let term = b[k] / lead * cutoff.powi(-power) / power as f64;
        tail += term;
        if term.abs() < 1e-17 * head {
            break;
        }
    }
    Ok(head + tail)
}
