//! Hypothesis flags that gate the eigenvalue and capacity bounds.

use serde::Serialize;

use super::{SurfaceGeometry, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HypothesisFlags {
    pub connected: bool,
    pub convex: bool,
    /// With respect to the origin.
    pub star_shaped: bool,
    pub mean_convex: bool,
    pub euler_characteristic: i64,
    /// Total genus over all components.
    pub genus: i64,
}

/// Tolerances expressed for a mesh of unit diameter; [`classify`] rescales
/// them by the actual diameter.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyTolerances {
    /// Minimum support function `⟨x, ν⟩`.
    pub support: f64,
    /// Minimum mean / principal curvature.
    pub curvature: f64,
    /// Allowed height of any vertex above a face plane.
    pub hull: f64,
}

impl Default for ClassifyTolerances {
    fn default() -> Self {
        Self {
            support: 1e-9,
            curvature: 1e-9,
            hull: 1e-6,
        }
    }
}

pub fn classify(
    mesh: &TriangleMesh,
    geometry: &SurfaceGeometry,
    tol: ClassifyTolerances,
) -> HypothesisFlags {
    let diameter = mesh.diameter();
    let components = mesh.component_count() as i64;
    let chi = mesh.euler_characteristic();

    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let curvature_tol = tol.curvature / diameter;
    let star_shaped = min(&geometry.support) > tol.support * diameter;
    let mean_convex = min(&geometry.mean) > curvature_tol;
    let convex = components == 1
        && min(&geometry.k2) >= -curvature_tol
        && supporting_planes_hold(mesh, tol.hull * diameter);

    HypothesisFlags {
        connected: components == 1,
        convex,
        star_shaped,
        mean_convex,
        euler_characteristic: chi,
        genus: (2 * components - chi) / 2,
    }
}

/// A closed connected polyhedron equals its convex hull exactly when every
/// vertex lies on the inner side of every face plane.
fn supporting_planes_hold(mesh: &TriangleMesh, slack: f64) -> bool {
    (0..mesh.face_count()).all(|f| {
        let n = mesh.face_normal(f);
        let p = mesh.face_centroid(f);
        mesh.vertices().iter().all(|v| (v - p).dot(&n) <= slack)
    })
}
