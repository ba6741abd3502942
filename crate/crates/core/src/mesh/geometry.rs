//! Per-vertex differential geometry.
//!
//! Principal curvatures come from a least-squares quadric fitted to the
//! two-ring of each vertex. In a local frame `(x, y, z)` centred at the
//! vertex, with `z` along the averaged face normal, the fitted surface is
//!
//! ```text
//! z = a x² + b xy + c y² + d x + e y + g z² + h xz + k yz
//! ```
//!
//! i.e. an arbitrary quadric through the vertex. Spheres and ellipsoids
//! belong to this family, so their curvatures are recovered to rounding
//! error; for other surfaces the fit is second-order accurate. Curvatures
//! are positive on convex surfaces (the normal points out of the enclosed
//! region).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3};

use super::{MeshError, TriangleMesh};
use crate::Vec3;

#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    /// Unit normal pointing out of the enclosed region.
    pub normals: Vec<Vec3>,
    /// Mixed Voronoi area of each vertex; they sum to the polyhedral area.
    pub area_weights: Vec<f64>,
    /// Larger principal curvature.
    pub k1: Vec<f64>,
    /// Smaller principal curvature.
    pub k2: Vec<f64>,
    /// `σ₁ = k1 + k2`.
    pub mean: Vec<f64>,
    /// `σ₂ = k1 k2`.
    pub gauss: Vec<f64>,
    /// `⟨x, ν⟩`.
    pub support: Vec<f64>,
    /// `|x|`.
    pub radial: Vec<f64>,
}

impl SurfaceGeometry {
    pub fn total_area(&self) -> f64 {
        self.area_weights.iter().sum()
    }

    /// Vertex-lumped surface integral `Σ value(v) · area(v)`.
    pub fn integrate(&self, value: impl Fn(usize) -> f64) -> f64 {
        self.area_weights
            .iter()
            .enumerate()
            .map(|(v, w)| value(v) * w)
            .sum()
    }
}

/// Fits curvature at every vertex. Fails on faces whose area is below
/// `1e-12 · diameter²`.
pub fn compute_geometry(mesh: &TriangleMesh) -> Result<SurfaceGeometry, MeshError> {
    let diameter = mesh.diameter();
    for f in 0..mesh.face_count() {
        let area = mesh.face_area(f);
        if !(area >= 1e-12 * diameter * diameter) {
            return Err(MeshError::DegenerateFace { face: f, area });
        }
    }

    let n = mesh.vertex_count();
    let area_weights = mixed_areas(mesh);
    let mut geom = SurfaceGeometry {
        normals: Vec::with_capacity(n),
        area_weights,
        k1: Vec::with_capacity(n),
        k2: Vec::with_capacity(n),
        mean: Vec::with_capacity(n),
        gauss: Vec::with_capacity(n),
        support: Vec::with_capacity(n),
        radial: Vec::with_capacity(n),
    };
    for v in 0..n {
        let fit = fit_quadric(mesh, v).ok_or(MeshError::CurvatureFit { vertex: v })?;
        let x = mesh.vertices()[v];
        geom.normals.push(fit.normal);
        geom.k1.push(fit.k1);
        geom.k2.push(fit.k2);
        geom.mean.push(fit.k1 + fit.k2);
        geom.gauss.push(fit.k1 * fit.k2);
        geom.support.push(x.dot(&fit.normal));
        geom.radial.push(x.norm());
    }
    Ok(geom)
}

/// `2π − Σ corner angles` at each vertex; sums to `2πχ` exactly.
pub fn angle_defects(mesh: &TriangleMesh) -> Vec<f64> {
    let mut defect = vec![2.0 * PI; mesh.vertex_count()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let p = mesh.face_vertices(fi);
        for k in 0..3 {
            let a = p[(k + 1) % 3] - p[k];
            let b = p[(k + 2) % 3] - p[k];
            defect[f[k]] -= a.angle(&b);
        }
    }
    defect
}

fn mixed_areas(mesh: &TriangleMesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.vertex_count()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let p = mesh.face_vertices(fi);
        let area = mesh.face_area(fi);
        let angle = |k: usize| (p[(k + 1) % 3] - p[k]).angle(&(p[(k + 2) % 3] - p[k]));
        let angles = [angle(0), angle(1), angle(2)];
        if let Some(obtuse) = (0..3).find(|&k| angles[k] > PI / 2.0) {
            for k in 0..3 {
                w[f[k]] += if k == obtuse { area / 2.0 } else { area / 4.0 };
            }
        } else {
            for k in 0..3 {
                let (j, l) = ((k + 1) % 3, (k + 2) % 3);
                let cot = |t: f64| t.cos() / t.sin();
                w[f[k]] += ((p[k] - p[j]).norm_squared() * cot(angles[l])
                    + (p[k] - p[l]).norm_squared() * cot(angles[j]))
                    / 8.0;
            }
        }
    }
    w
}

/// Vertices within `rings` edges of `v`, excluding `v` itself.
pub(crate) fn k_ring(mesh: &TriangleMesh, v: usize, rings: usize) -> Vec<usize> {
    let nbrs = &mesh.adjacency().vertex_neighbors;
    let mut seen = vec![v];
    let mut frontier = vec![v];
    for _ in 0..rings {
        let mut next = Vec::new();
        for &u in &frontier {
            for &w in &nbrs[u] {
                if !seen.contains(&w) {
                    seen.push(w);
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    seen.remove(0);
    seen
}

struct QuadricFit {
    normal: Vec3,
    k1: f64,
    k2: f64,
}

fn fit_quadric(mesh: &TriangleMesh, v: usize) -> Option<QuadricFit> {
    let adjacency = mesh.adjacency();
    let seed: Vec3 = adjacency.vertex_faces[v]
        .iter()
        .map(|&f| mesh.area_vector(f))
        .sum::<Vec3>()
        .try_normalize(0.0)?;

    let mut ring = k_ring(mesh, v, 2);
    if ring.len() < 12 {
        ring = k_ring(mesh, v, 3);
    }
    let (t1, t2) = tangent_basis(&seed);
    let origin = mesh.vertices()[v];
    let local: Vec<Vec3> = ring
        .iter()
        .map(|&w| {
            let d = mesh.vertices()[w] - origin;
            Vec3::new(d.dot(&t1), d.dot(&t2), d.dot(&seed))
        })
        .collect();
    let scale = local.iter().map(|p| p.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }

    // unknowns: a b c d e g h k
    let m = local.len();
    let mut design = DMatrix::zeros(m, 8);
    let mut rhs = DVector::zeros(m);
    for (r, p) in local.iter().enumerate() {
        let (x, y, z) = (p.x / scale, p.y / scale, p.z / scale);
        let row = [x * x, x * y, y * y, x, y, z * z, x * z, y * z];
        for (c, val) in row.iter().enumerate() {
            design[(r, c)] = *val;
        }
        rhs[r] = z;
    }
    let norms: Vec<f64> = (0..8).map(|c| design.column(c).norm()).collect();
    for (c, &nc) in norms.iter().enumerate() {
        if nc > 0.0 {
            design.column_mut(c).scale_mut(1.0 / nc);
        }
    }
    let svd = design.svd(true, true);
    let sol = svd.solve(&rhs, 1e-12).ok()?;
    let coef: Vec<f64> = (0..8)
        .map(|c| if norms[c] > 0.0 { sol[c] / norms[c] } else { 0.0 })
        .collect();
    let [a, b, c, d, e, g, h, k] = [
        coef[0], coef[1], coef[2], coef[3], coef[4], coef[5], coef[6], coef[7],
    ];

    // F = z − (…) vanishes on the fit; ∇F and ∇²F at the vertex in scaled units
    let grad = Vec3::new(-d, -e, 1.0);
    let hess = -Matrix3::new(2.0 * a, b, h, b, 2.0 * c, k, h, k, 2.0 * g);
    let gnorm = grad.norm();
    let nl = grad / gnorm;
    let (u1, u2) = tangent_basis(&nl);
    let shape = Matrix2::new(
        u1.dot(&(hess * u1)),
        u1.dot(&(hess * u2)),
        u2.dot(&(hess * u1)),
        u2.dot(&(hess * u2)),
    ) / (gnorm * scale);
    let eig = shape.symmetric_eigen();
    let (l1, l2) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    let normal = (t1 * nl.x + t2 * nl.y + seed * nl.z).normalize();
    if !(l1.is_finite() && l2.is_finite()) {
        return None;
    }
    Some(QuadricFit {
        normal,
        k1: l1.max(l2),
        k2: l1.min(l2),
    })
}

/// Orthonormal pair spanning the plane orthogonal to the unit vector `n`.
pub(crate) fn tangent_basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.6 {
        Vec3::x()
    } else if n.y.abs() < 0.6 {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let t1 = (helper - n * n.dot(&helper)).normalize();
    (t1, n.cross(&t1))
}
