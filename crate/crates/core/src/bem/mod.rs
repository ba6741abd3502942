//! Galerkin boundary elements for exterior Laplace problems.
//!
//! Densities are piecewise constant on faces and every boundary field is
//! represented by its face averages. With `G(x,y) = 1/(4π|x−y|)` and `ν`
//! pointing out of `Ω`, the assembled matrices are
//!
//! ```text
//! V_ij  = ∫_{T_i} ∫_{T_j} G(x,y)            single layer
//! K'_ij = ∫_{T_i} ∫_{T_j} ∂_{ν_x} G(x,y)     adjoint double layer
//! M     = diag |T_i|
//! ```
//!
//! For `u = S q` the exterior Neumann trace is `(−½I + K')q`, so a Neumann
//! problem reads `(−½M + K') q = M g`, and the projected Dirichlet trace of
//! `S q` is `M⁻¹ V q`.
//!
//! Pairs closer than a few element diameters use an outer 7-point rule on a
//! subdivided test triangle and the closed-form inner integrals from
//! [`kernels`]; other pairs use tensor Gauss rules whose order drops with
//! distance, down to the centroid rule.

pub mod kernels;
mod solve;
mod steklov;

use std::f64::consts::PI;

use faer::linalg::solvers::Llt;
use faer::{Mat, Side};
use thiserror::Error;

use crate::mesh::TriangleMesh;
use crate::quad::{GradedDuffy, TriangleRule, DUNAVANT_7, STRANG_FIX_3};
use crate::Vec3;
use kernels::FlatTriangle;

pub use solve::{solve_capacity, evaluate_exterior, solve_dirichlet_with_constant, solve_neumann, HarmonicSolution};
pub(crate) use solve::point_triangle_distance;
pub use steklov::{solve_steklov, SpectralResult, SteklovOptions};

#[derive(Debug, Error)]
pub enum BemError {
    #[error("single-layer matrix is not positive definite")]
    SingleLayerNotSpd,
    #[error("linear solve failed: {0}")]
    SolveFailure(String),
    #[error("discrete Steklov energy is not positive definite (skew ratio {skew:e})")]
    IndefiniteEnergy { skew: f64 },
    #[error("energy matrix skew part {0:e} exceeds tolerance; operator signs are inconsistent")]
    SkewDefect(f64),
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("Rayleigh quotient {rayleigh} disagrees with eigenvalue {eigenvalue}")]
    RayleighMismatch { eigenvalue: f64, rayleigh: f64 },
    #[error("point is {distance:e} from the surface, closer than the local edge length {limit:e}")]
    TooCloseToSurface { distance: f64, limit: f64 },
    #[error("point lies inside the surface")]
    NotExterior,
    #[error("boundary field has {got} entries, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

/// Distances (in units of the larger element diameter) that select the
/// quadrature tier of a pair.
#[derive(Debug, Clone, Copy)]
pub struct AssemblyOptions {
    /// Below this: closed-form inner integral.
    pub near: f64,
    /// Below this: 7×7 Gauss points.
    pub medium: f64,
    /// Below this: 3×3 Gauss points; beyond it the centroid rule.
    pub far: f64,
    /// Gauss points per direction of the graded outer rule used for the
    /// self term and for faces that share a vertex or an edge.
    pub touching_order: usize,
    /// Subdivision level of the outer rule for other near pairs.
    pub near_level: u32,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            near: 2.5,
            medium: 5.0,
            far: 10.0,
            touching_order: 12,
            near_level: 1,
        }
    }
}

pub struct BemSystem {
    /// Single-layer Galerkin matrix `V`.
    pub single_layer: Mat<f64>,
    /// Adjoint double-layer Galerkin matrix `K'`.
    pub adjoint_double_layer: Mat<f64>,
    /// Face areas, the diagonal of `M`.
    pub areas: Vec<f64>,
    pub centroids: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub(crate) triangles: Vec<FlatTriangle>,
    pub(crate) face_vertices: Vec<[Vec3; 3]>,
    pub(crate) mean_edge: f64,
    pub(crate) single_layer_llt: Llt<f64>,
}

impl std::fmt::Debug for BemSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BemSystem")
            .field("faces", &self.areas.len())
            .finish_non_exhaustive()
    }
}

impl BemSystem {
    pub fn dimension(&self) -> usize {
        self.areas.len()
    }

    /// `M⁻¹ V q`: face averages of the trace of `S q`.
    pub fn trace(&self, density: &[f64]) -> Vec<f64> {
        let vq = &self.single_layer * column(density);
        (0..self.dimension()).map(|i| vq[(i, 0)] / self.areas[i]).collect()
    }

    /// `(½M − K') q`: Galerkin moments of minus the exterior Neumann trace.
    pub fn steklov_operator(&self) -> Mat<f64> {
        let n = self.dimension();
        Mat::from_fn(n, n, |i, j| {
            let diag = if i == j { 0.5 * self.areas[i] } else { 0.0 };
            diag - self.adjoint_double_layer[(i, j)]
        })
    }

    pub(crate) fn check_len(&self, field: &[f64]) -> Result<(), BemError> {
        if field.len() == self.dimension() {
            Ok(())
        } else {
            Err(BemError::DimensionMismatch {
                got: field.len(),
                expected: self.dimension(),
            })
        }
    }
}

pub(crate) fn column(values: &[f64]) -> Mat<f64> {
    Mat::from_fn(values.len(), 1, |i, _| values[i])
}

/// Tensor-product pair rule: `∫_{T_i}∫_{T_j} k(x,y)` for a smooth kernel.
fn pair_rule(
    rule: TriangleRule,
    ti: &[Vec3; 3],
    ai: f64,
    tj: &[Vec3; 3],
    aj: f64,
    ni: &Vec3,
) -> (f64, f64) {
    let pi = rule.map(ti, ai);
    let pj = rule.map(tj, aj);
    let (mut v, mut k) = (0.0, 0.0);
    for (x, wx) in &pi {
        for (y, wy) in &pj {
            let d = x - y;
            let r = d.norm();
            let w = wx * wy;
            v += w / r;
            k -= w * ni.dot(&d) / (r * r * r);
        }
    }
    (v / (4.0 * PI), k / (4.0 * PI))
}

/// Outer quadrature on `T_i`, closed-form inner integral over `T_j`.
fn near_pair(outer: &[(Vec3, f64)], tj: &FlatTriangle, ni: &Vec3) -> (f64, f64) {
    let (mut v, mut k) = (0.0, 0.0);
    for (x, w) in outer {
        let (phi, field) = tj.potential_and_field(x);
        v += w * phi;
        k -= w * ni.dot(&field);
    }
    (v / (4.0 * PI), k / (4.0 * PI))
}

/// Outer points for the self term: three pieces around the centroid, each
/// graded towards its own edge of the triangle.
fn self_outer(rule: &GradedDuffy, tri: &[Vec3; 3], area: f64) -> Vec<(Vec3, f64)> {
    let centroid = (tri[0] + tri[1] + tri[2]) / 3.0;
    (0..3)
        .flat_map(|k| rule.map(&[tri[k], tri[(k + 1) % 3], centroid], area / 3.0))
        .collect()
}

/// Outer points on face `fi` graded towards what it shares with face `fj`.
/// A shared edge `AB` is split at its midpoint so that each half collapses
/// onto one end point with the edge along the graded direction.
fn touching_outer(rule: &GradedDuffy, fi: [usize; 3], fj: [usize; 3], tri: &[Vec3; 3], area: f64) -> Vec<(Vec3, f64)> {
    let shared: Vec<usize> = (0..3).filter(|&k| fj.contains(&fi[k])).collect();
    match shared[..] {
        [k] => rule.map(&[tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]], area),
        [k, l] => {
            let apex = tri[3 - k - l];
            let mid = (tri[k] + tri[l]) / 2.0;
            let mut points = rule.map(&[tri[k], mid, apex], area / 2.0);
            points.extend(rule.map(&[tri[l], mid, apex], area / 2.0));
            points
        }
        _ => unreachable!("distinct faces share at most two vertices"),
    }
}

pub fn assemble(mesh: &TriangleMesh) -> Result<BemSystem, BemError> {
    assemble_with(mesh, AssemblyOptions::default())
}

pub fn assemble_with(mesh: &TriangleMesh, options: AssemblyOptions) -> Result<BemSystem, BemError> {
    let n = mesh.face_count();
    let face_vertices: Vec<[Vec3; 3]> = (0..n).map(|f| mesh.face_vertices(f)).collect();
    let areas: Vec<f64> = (0..n).map(|f| mesh.face_area(f)).collect();
    let centroids: Vec<Vec3> = (0..n).map(|f| mesh.face_centroid(f)).collect();
    let normals: Vec<Vec3> = (0..n).map(|f| mesh.face_normal(f)).collect();
    let sizes: Vec<f64> = (0..n).map(|f| mesh.face_diameter(f)).collect();
    let triangles: Vec<FlatTriangle> = face_vertices.iter().map(|t| FlatTriangle::new(*t)).collect();

    let mut single = Mat::<f64>::zeros(n, n);
    let mut adjoint = Mat::<f64>::zeros(n, n);
    let inv4pi = 1.0 / (4.0 * PI);

    let adjacency = mesh.adjacency();
    let graded = GradedDuffy::new(options.touching_order, 3);
    let mut touching = vec![false; n];
    for i in 0..n {
        let self_outer = self_outer(&graded, &face_vertices[i], areas[i]);
        let near_outer = DUNAVANT_7.map_subdivided(&face_vertices[i], areas[i], options.near_level);
        let neighbours: Vec<usize> = mesh.faces()[i]
            .iter()
            .flat_map(|&v| adjacency.vertex_faces[v].iter().copied())
            .collect();
        neighbours.iter().for_each(|&j| touching[j] = true);
        for j in 0..n {
            let h = sizes[i].max(sizes[j]);
            let d = (centroids[i] - centroids[j]).norm();
            let (v, k) = if i == j {
                near_pair(&self_outer, &triangles[i], &normals[i])
            } else if touching[j] {
                let outer = touching_outer(&graded, mesh.faces()[i], mesh.faces()[j], &face_vertices[i], areas[i]);
                near_pair(&outer, &triangles[j], &normals[i])
            } else if d < options.near * h {
                near_pair(&near_outer, &triangles[j], &normals[i])
            } else if d < options.medium * h {
                pair_rule(DUNAVANT_7, &face_vertices[i], areas[i], &face_vertices[j], areas[j], &normals[i])
            } else if d < options.far * h {
                pair_rule(STRANG_FIX_3, &face_vertices[i], areas[i], &face_vertices[j], areas[j], &normals[i])
            } else {
                let w = areas[i] * areas[j] * inv4pi;
                let r = centroids[i] - centroids[j];
                (w / d, -w * normals[i].dot(&r) / (d * d * d))
            };
            single[(i, j)] = v;
            adjoint[(i, j)] = k;
        }
        neighbours.iter().for_each(|&j| touching[j] = false);
    }
    // the closed-form rule treats the two faces of a near pair differently
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (single[(i, j)] + single[(j, i)]);
            single[(i, j)] = s;
            single[(j, i)] = s;
        }
    }
    let single_layer_llt = single
        .llt(Side::Lower)
        .map_err(|_| BemError::SingleLayerNotSpd)?;

    Ok(BemSystem {
        single_layer: single,
        adjoint_double_layer: adjoint,
        areas,
        centroids,
        normals,
        triangles,
        face_vertices,
        mean_edge: mesh.mean_edge_length(),
        single_layer_llt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_icosphere;

    #[test]
    fn uniform_density_on_sphere() {
        // a unit charge density on the unit sphere has potential 1 on it
        let errors: Vec<f64> = [2, 3]
            .iter()
            .map(|&s| {
                let sys = assemble(&make_icosphere(1.0, s)).unwrap();
                let trace = sys.trace(&vec![1.0; sys.dimension()]);
                trace.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max)
            })
            .collect();
        assert!(errors[0] < 1e-2, "{errors:?}");
        assert!(errors[0] / errors[1] > 1.8, "{errors:?}");
    }

    #[test]
    fn adjoint_double_layer_of_constant_on_sphere() {
        // K'1 = −1/2 on a sphere; Galerkin row sums approach −|T_i|/2
        let mesh = make_icosphere(1.0, 3);
        let sys = assemble(&mesh).unwrap();
        let n = sys.dimension();
        let worst = (0..n)
            .map(|i| {
                let row: f64 = (0..n).map(|j| sys.adjoint_double_layer[(i, j)]).sum();
                (row / sys.areas[i] + 0.5).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-2, "{worst}");
    }

    #[test]
    fn gauss_identity_for_double_layer_columns() {
        // ∫_{∂Ω} ∂_{ν_x} G(x,y) dx = −1/2 for y on the surface: column sums
        let mesh = crate::mesh::make_ellipsoid(1.5, 1.0, 0.7, 3);
        let sys = assemble(&mesh).unwrap();
        let n = sys.dimension();
        let worst = (0..n)
            .map(|j| {
                let col: f64 = (0..n).map(|i| sys.adjoint_double_layer[(i, j)]).sum();
                (col / sys.areas[j] + 0.5).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-2, "{worst}");
    }

    #[test]
    fn single_layer_is_symmetric_positive_definite() {
        let mesh = crate::mesh::make_ellipsoid(2.0, 1.0, 1.0, 2);
        let sys = assemble(&mesh).unwrap();
        let n = sys.dimension();
        for i in 0..n {
            assert_eq!(sys.single_layer[(i, i)].is_sign_positive(), true);
            for j in 0..n {
                assert_eq!(sys.single_layer[(i, j)], sys.single_layer[(j, i)]);
            }
        }
    }

    #[test]
    fn near_tiers_agree_with_brute_force() {
        // compare every tier against a heavily subdivided product rule on
        // a pair at moderate distance
        let mesh = make_icosphere(1.0, 2);
        let sys = assemble(&mesh).unwrap();
        let f = 0;
        let tf = mesh.face_vertices(f);
        for g in [1usize, 5, 40, 100, 250] {
            let tg = mesh.face_vertices(g);
            if (sys.centroids[f] - sys.centroids[g]).norm() < 0.2 {
                continue;
            }
            let pf = DUNAVANT_7.map_subdivided(&tf, sys.areas[f], 3);
            let pg = DUNAVANT_7.map_subdivided(&tg, sys.areas[g], 3);
            let mut v = 0.0;
            for (x, wx) in &pf {
                for (y, wy) in &pg {
                    v += wx * wy / (x - y).norm();
                }
            }
            v /= 4.0 * PI;
            assert!((sys.single_layer[(f, g)] / v - 1.0).abs() < 1e-3, "{g}");
        }
    }
}
