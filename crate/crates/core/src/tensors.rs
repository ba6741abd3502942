//! Virtual mass, polarization and the Newtonian potential of the enclosed
//! body.
//!
//! The gravitational potential `Ψ(x) = −(1/4π)∫_Ω |x−y|⁻¹ dy` satisfies
//! `ΔΨ = 1` in `Ω` and `ΔΨ = 0` outside. Because `div_y((y−x)/|y−x|) =
//! 2/|y−x|`, it reduces to the boundary integral
//!
//! ```text
//! Ψ(x) = −(1/8π) ∫_{∂Ω} ⟨y−x, ν⟩ / |y−x| da(y),
//! ```
//!
//! valid on both sides of the surface, and so are its first and second
//! derivatives obtained by differentiating under the integral. On a flat
//! face `⟨y−x, ν⟩` is constant (minus the height of `x` above the face), so
//! the value, gradient and Hessian are exact sums of closed-form triangle
//! integrals.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bem::kernels::FlatTriangle;
use crate::bem::{solve_dirichlet_with_constant, solve_neumann, BemError, BemSystem, HarmonicSolution};
use crate::mesh::{SurfaceGeometry, TriangleMesh};
use crate::quad::DUNAVANT_7;
use crate::Vec3;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("point is {distance:e} from the surface, closer than {limit:e}")]
    TooCloseToSurface { distance: f64, limit: f64 },
    #[error("point lies on the {actual:?} side, not the requested one")]
    SideMismatch { actual: Side },
    #[error("jump extrapolation is unstable (last correction {0:e})")]
    ExtrapolationUnstable(f64),
    #[error("eigenvalues of the mean Hessian {min} .. {max} are not inside (0, 1)")]
    PsiBarOutOfRange { min: f64, max: f64 },
    #[error("vertex {0} does not exist")]
    NoSuchVertex(usize),
    #[error(transparent)]
    Bem(#[from] BemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Interior,
    Exterior,
}

#[derive(Debug, Clone)]
pub struct PsiEvaluation {
    pub point: Vec3,
    pub side: Side,
    pub value: f64,
    pub gradient: Vec3,
    pub hessian: Matrix3<f64>,
}

/// The enclosed body's Newtonian potential, evaluated face by face.
pub struct GravitationalPotential {
    triangles: Vec<FlatTriangle>,
    face_vertices: Vec<[Vec3; 3]>,
    areas: Vec<f64>,
    centroids: Vec<Vec3>,
    normals: Vec<Vec3>,
    sizes: Vec<f64>,
    mean_edge: f64,
}

impl GravitationalPotential {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let n = mesh.face_count();
        let face_vertices: Vec<[Vec3; 3]> = (0..n).map(|f| mesh.face_vertices(f)).collect();
        Self {
            triangles: face_vertices.iter().map(|t| FlatTriangle::new(*t)).collect(),
            face_vertices,
            areas: (0..n).map(|f| mesh.face_area(f)).collect(),
            centroids: (0..n).map(|f| mesh.face_centroid(f)).collect(),
            normals: (0..n).map(|f| mesh.face_normal(f)).collect(),
            sizes: (0..n).map(|f| mesh.face_diameter(f)).collect(),
            mean_edge: mesh.mean_edge_length(),
        }
    }

    /// Which side of the surface `x` lies on, from the total solid angle.
    pub fn side_of(&self, x: &Vec3) -> Side {
        let winding: f64 = self.triangles.iter().map(|t| t.solid_angle(x)).sum();
        if winding > 2.0 * PI {
            Side::Interior
        } else {
            Side::Exterior
        }
    }

    fn distance(&self, x: &Vec3) -> f64 {
        self.face_vertices
            .iter()
            .map(|t| crate::bem::point_triangle_distance(x, t))
            .fold(f64::INFINITY, f64::min)
    }

    /// `(Ψ, ∇Ψ, ∇²Ψ)` at a point off the surface, without side checks.
    pub fn evaluate_unchecked(&self, x: &Vec3) -> (f64, Vec3, Matrix3<f64>) {
        let mut value = 0.0;
        let mut gradient = Vec3::zeros();
        let mut hessian = Matrix3::zeros();
        for t in &self.triangles {
            let n = t.normal();
            let w = t.height(x);
            let (phi, field) = t.potential_and_field(x);
            value += w * phi;
            gradient += n * phi - field * w;
            hessian -= n * field.transpose() + field * n.transpose() + t.field_gradient(x) * w;
        }
        let scale = 1.0 / (8.0 * PI);
        (value * scale, gradient * scale, hessian * scale)
    }

    /// `∇Ψ` only, with distant faces lumped at their centroids.
    fn gradient_lumped(&self, x: &Vec3) -> Vec3 {
        let mut gradient = Vec3::zeros();
        for f in 0..self.triangles.len() {
            let d = x - self.centroids[f];
            let r = d.norm();
            let n = self.normals[f];
            let w = d.dot(&n);
            if r > 10.0 * self.sizes[f] {
                let a = self.areas[f];
                gradient += n * (a / r) - d * (w * a / (r * r * r));
            } else {
                let (phi, field) = self.triangles[f].potential_and_field(x);
                gradient += n * phi - field * self.triangles[f].height(x);
            }
        }
        gradient / (8.0 * PI)
    }
}

/// `Ψ` and its first two derivatives at `x`, which must be at least one mean
/// edge length from the surface and on the stated side.
pub fn psi_evaluate(potential: &GravitationalPotential, x: &Vec3, side: Side) -> Result<PsiEvaluation, TensorError> {
    let distance = potential.distance(x);
    if distance < potential.mean_edge {
        return Err(TensorError::TooCloseToSurface {
            distance,
            limit: potential.mean_edge,
        });
    }
    let actual = potential.side_of(x);
    if actual != side {
        return Err(TensorError::SideMismatch { actual });
    }
    let (value, gradient, hessian) = potential.evaluate_unchecked(x);
    Ok(PsiEvaluation {
        point: *x,
        side,
        value,
        gradient,
        hessian,
    })
}

/// Offsets used by [`jump_probe`] when none are given, in mean edge lengths.
pub const DEFAULT_PROBE_OFFSETS: [f64; 5] = [3.0, 3.5, 4.0, 5.0, 6.0];

/// `lim_{h→0} Ψ_ij(x₀ − hν) − Ψ_ij(x₀ + hν)` at a vertex, by polynomial
/// extrapolation through the given offsets.
pub fn jump_probe(
    potential: &GravitationalPotential,
    mesh: &TriangleMesh,
    geometry: &SurfaceGeometry,
    vertex: usize,
    offsets: &[f64],
) -> Result<Matrix3<f64>, TensorError> {
    let x0 = *mesh.vertices().get(vertex).ok_or(TensorError::NoSuchVertex(vertex))?;
    let normal = geometry.normals[vertex];
    let jumps: Vec<Matrix3<f64>> = offsets
        .iter()
        .map(|&h| {
            let inner = psi_evaluate(potential, &(x0 - normal * h), Side::Interior)?;
            let outer = psi_evaluate(potential, &(x0 + normal * h), Side::Exterior)?;
            Ok(inner.hessian - outer.hessian)
        })
        .collect::<Result<_, TensorError>>()?;
    let estimates = neville_at_zero(offsets, &jumps);
    let last = *estimates.last().expect("at least one offset");
    if estimates.len() >= 3 {
        let k = estimates.len();
        let final_step = (estimates[k - 1] - estimates[k - 2]).norm();
        let previous_step = (estimates[k - 2] - estimates[k - 3]).norm();
        if !final_step.is_finite() || (final_step > previous_step && final_step > 1e-2) {
            return Err(TensorError::ExtrapolationUnstable(final_step));
        }
    }
    Ok(last)
}

/// Values at zero of the interpolating polynomials through the first
/// 1, 2, … points.
fn neville_at_zero(nodes: &[f64], values: &[Matrix3<f64>]) -> Vec<Matrix3<f64>> {
    let mut table = values.to_vec();
    let mut estimates = vec![table[0]];
    for level in 1..nodes.len() {
        for i in (level..nodes.len()).rev() {
            let (hi, hj) = (nodes[i], nodes[i - level]);
            table[i] = (table[i - 1] * hi - table[i] * hj) / (hi - hj);
        }
        estimates.push(table[level]);
    }
    estimates
}

/// `Ψ̄ = |Ω|⁻¹ ∫_Ω ∇²Ψ`, reduced to `|Ω|⁻¹ ∫_{∂Ω} ∂_iΨ ν_j da` (the gradient
/// is continuous across the surface) and symmetrised.
pub fn psi_bar(potential: &GravitationalPotential, volume: f64) -> Matrix3<f64> {
    let mut moment = Matrix3::zeros();
    for f in 0..potential.triangles.len() {
        let normal = potential.normals[f];
        for (x, w) in DUNAVANT_7.map(&potential.face_vertices[f], potential.areas[f]) {
            moment += potential.gradient_lumped(&x) * (normal.transpose() * w);
        }
    }
    (moment + moment.transpose()) / (2.0 * volume)
}

#[derive(Debug, Clone)]
pub struct DirectionalPotentials {
    /// Symmetrised energy matrix.
    pub matrix: Matrix3<f64>,
    /// One potential per coordinate axis.
    pub potentials: Vec<HarmonicSolution>,
}

fn symmetrise(m: Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) / 2.0
}

/// Virtual mass `W_ij = ∫_U ⟨∇w[e_i], ∇w[e_j]⟩` with `∂_ν w[e] = −⟨ν, e⟩`.
pub fn virtual_mass(system: &BemSystem) -> Result<DirectionalPotentials, BemError> {
    let data: Vec<Vec<f64>> = (0..3).map(|k| system.normals.iter().map(|n| -n[k]).collect()).collect();
    let potentials = solve_neumann(system, &data)?;
    // −∫ w_i ∂_ν w_j = ∫ w_i ν_j
    let matrix = Matrix3::from_fn(|i, j| {
        (0..system.dimension())
            .map(|f| potentials[i].trace[f] * system.normals[f][j] * system.areas[f])
            .sum()
    });
    Ok(DirectionalPotentials {
        matrix: symmetrise(matrix),
        potentials,
    })
}

/// Polarization `P_ij = ∫_U ⟨∇v[e_i], ∇v[e_j]⟩` with `v[e] = ⟨x,e⟩ + c[e]`
/// on the surface and zero total charge.
pub fn polarization(system: &BemSystem) -> Result<DirectionalPotentials, BemError> {
    let data: Vec<Vec<f64>> = (0..3).map(|k| system.centroids.iter().map(|c| c[k]).collect()).collect();
    let potentials = solve_dirichlet_with_constant(system, &data)?;
    let operator = system.steklov_operator();
    let a_q: Vec<Vec<f64>> = potentials
        .iter()
        .map(|p| {
            let aq = &operator * crate::bem::column(&p.density);
            (0..system.dimension()).map(|i| aq[(i, 0)]).collect()
        })
        .collect();
    let matrix = Matrix3::from_fn(|i, j| {
        let c = potentials[i].constant.unwrap_or(0.0);
        (0..system.dimension()).map(|f| (data[i][f] + c) * a_q[j][f]).sum()
    });
    Ok(DirectionalPotentials {
        matrix: symmetrise(matrix),
        potentials,
    })
}

/// `∫_{∂U} w[e] da` for one directional Neumann potential.
pub fn w_mean_integral(solution: &HarmonicSolution, system: &BemSystem) -> f64 {
    solution.trace_integral(system)
}

/// `max_e |∫ w[e] da| / (|∂U|·energy(w[e]))^{1/2}` over the coordinate axes.
pub fn w_mean_defect(virtual_mass: &DirectionalPotentials, system: &BemSystem) -> f64 {
    let area: f64 = system.areas.iter().sum();
    virtual_mass
        .potentials
        .iter()
        .map(|w| w_mean_integral(w, system).abs() / (area * w.energy.max(f64::MIN_POSITIVE)).sqrt())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct PotentialTensors {
    pub volume: f64,
    pub virtual_mass: Matrix3<f64>,
    pub polarization: Matrix3<f64>,
    pub psi_bar: Matrix3<f64>,
    /// `∫ w[e_k] da` for each axis.
    pub w_mean_integrals: Vec<f64>,
    pub w_mean_defect: f64,
}

impl PotentialTensors {
    pub fn w_ave(&self) -> f64 {
        self.virtual_mass.trace() / 3.0
    }

    pub fn p_ave(&self) -> f64 {
        self.polarization.trace() / 3.0
    }
}

pub fn potential_tensors(mesh: &TriangleMesh, system: &BemSystem) -> Result<PotentialTensors, TensorError> {
    let volume = mesh.enclosed_volume();
    let w = virtual_mass(system)?;
    let p = polarization(system)?;
    let psi = psi_bar(&GravitationalPotential::new(mesh), volume);
    Ok(PotentialTensors {
        volume,
        virtual_mass: w.matrix,
        polarization: p.matrix,
        psi_bar: psi,
        w_mean_integrals: w.potentials.iter().map(|s| w_mean_integral(s, system)).collect(),
        w_mean_defect: w_mean_defect(&w, system),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorSlack {
    /// Smallest eigenvalue of `W/|Ω| − ((I − Ψ̄)⁻¹ − I)`.
    pub virtual_mass_min_eigenvalue: f64,
    /// Smallest eigenvalue of `P/|Ω| − (Ψ̄⁻¹ − I)`.
    pub polarization_min_eigenvalue: f64,
    /// Frobenius norms of the two right-hand sides, the scale of the
    /// tolerance.
    pub virtual_mass_scale: f64,
    pub polarization_scale: f64,
    pub virtual_mass_psd: bool,
    pub polarization_psd: bool,
    /// `W_ave − |Ω|/2` and `P_ave − 2|Ω|`.
    pub w_ave_margin: f64,
    pub p_ave_margin: f64,
}

/// Relative PSD tolerance on the slack matrices.
pub const SLACK_TOLERANCE: f64 = 1e-2;

fn min_eigenvalue(m: Matrix3<f64>) -> f64 {
    SymmetricEigen::new(symmetrise(m)).eigenvalues.min()
}

pub fn tensor_bounds_check(tensors: &PotentialTensors) -> Result<TensorSlack, TensorError> {
    let eig = SymmetricEigen::new(tensors.psi_bar).eigenvalues;
    let (min, max) = (eig.min(), eig.max());
    let eps = 1e-9;
    if !(min > eps && max < 1.0 - eps) {
        return Err(TensorError::PsiBarOutOfRange { min, max });
    }
    let id = Matrix3::identity();
    let w_rhs = (id - tensors.psi_bar).try_inverse().expect("checked spectrum") - id;
    let p_rhs = tensors.psi_bar.try_inverse().expect("checked spectrum") - id;
    let w_min = min_eigenvalue(tensors.virtual_mass / tensors.volume - w_rhs);
    let p_min = min_eigenvalue(tensors.polarization / tensors.volume - p_rhs);
    Ok(TensorSlack {
        virtual_mass_min_eigenvalue: w_min,
        polarization_min_eigenvalue: p_min,
        virtual_mass_scale: w_rhs.norm(),
        polarization_scale: p_rhs.norm(),
        virtual_mass_psd: w_min >= -SLACK_TOLERANCE * w_rhs.norm(),
        polarization_psd: p_min >= -SLACK_TOLERANCE * p_rhs.norm(),
        w_ave_margin: tensors.w_ave() - tensors.volume / 2.0,
        p_ave_margin: tensors.p_ave() - 2.0 * tensors.volume,
    })
}

/// Monte Carlo estimate of the half-ball limit
/// `B₊ = lim_{ε→0} ∫_{B_r ∩ {y₃>ε}} (3y₃²/|y|⁵ − 1/|y|³) dy`.
///
/// In polar coordinates the radial integral is `ln(rc/ε)` with `c = cos θ`,
/// and the `ln(r/ε)` part integrates to zero over the hemisphere, leaving
/// `∫_{S²₊} (3c² − 1) ln c dω`. For uniform directions on the upper
/// hemisphere `c` is uniform on `(0, 1)`.
pub fn b_plus_monte_carlo(samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sum: f64 = (0..samples)
        .map(|_| {
            let c: f64 = 1.0 - rng.gen::<f64>();
            (3.0 * c * c - 1.0) * c.ln()
        })
        .sum();
    2.0 * PI * sum / samples as f64
}
