//! Closed-form integrals of the Laplace kernel over a flat triangle with
//! unit density.
//!
//! For a triangle `T` with unit normal `n` and a point `x`, let `w₀` be the
//! height of `x` above the plane of `T`, and for each edge `k` let `m_k` be
//! its outward in-plane normal, `t_k` the signed distance from the
//! projection of `x` to the edge line, `l±` the edge-aligned coordinates
//! of its end points and `R±` their distances from `x`. With
//! `f_k = ln((R⁺+l⁺)/(R⁻+l⁻))` and the signed solid angle `Ω` (positive
//! when `x` lies below the plane),
//!
//! ```text
//! ∫_T dy / |x−y|          = Σ_k t_k f_k + w₀ Ω
//! ∫_T (x−y) / |x−y|³ dy   = Σ_k m_k f_k − n Ω
//! ```
//!
//! The second is minus the gradient of the first. Both are continuous
//! across the triangle except for the jump of `Ω`; points in the plane of
//! the triangle take the principal value `Ω = 0`.

use nalgebra::Matrix3;

use crate::Vec3;

#[derive(Debug, Clone)]
pub struct FlatTriangle {
    vertices: [Vec3; 3],
    normal: Vec3,
    /// Unit edge directions `s_k` and outward normals `m_k = s_k × n`.
    edges: [(Vec3, Vec3); 3],
    scale: f64,
}

impl FlatTriangle {
    pub fn new(vertices: [Vec3; 3]) -> Self {
        let normal = (vertices[1] - vertices[0])
            .cross(&(vertices[2] - vertices[0]))
            .normalize();
        let edges = std::array::from_fn(|k| {
            let s = (vertices[(k + 1) % 3] - vertices[k]).normalize();
            (s, s.cross(&normal))
        });
        let scale = (0..3)
            .map(|k| (vertices[(k + 1) % 3] - vertices[k]).norm())
            .fold(0.0, f64::max);
        Self {
            vertices,
            normal,
            edges,
            scale,
        }
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    /// Van Oosterom–Strackee solid angle, zeroed for points in the plane.
    pub fn solid_angle(&self, x: &Vec3) -> f64 {
        let height = (x - self.vertices[0]).dot(&self.normal);
        if height.abs() <= 1e-13 * self.scale {
            return 0.0;
        }
        let [a, b, c] = self.vertices.map(|v| v - x);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let numerator = a.dot(&b.cross(&c));
        let denominator = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
        2.0 * numerator.atan2(denominator)
    }

    /// `(∫ 1/R, ∫ (x−y)/R³)` over the triangle.
    pub fn potential_and_field(&self, x: &Vec3) -> (f64, Vec3) {
        let height = (x - self.vertices[0]).dot(&self.normal);
        let omega = self.solid_angle(x);
        let mut potential = height * omega;
        let mut field = -self.normal * omega;
        for (k, (s, m)) in self.edges.iter().enumerate() {
            let a = self.vertices[k] - x;
            let b = self.vertices[(k + 1) % 3] - x;
            let t = a.dot(m);
            let (lm, lp) = (a.dot(s), b.dot(s));
            let (rm, rp) = (a.norm(), b.norm());
            // (R+l)(R−l) is the same for both end points; pick the form
            // without cancellation
            let f = if lp + lm >= 0.0 {
                ((rp + lp) / (rm + lm)).ln()
            } else {
                ((rm - lm) / (rp - lp)).ln()
            };
            if f.is_finite() {
                potential += t * f;
                field += m * f;
            }
        }
        (potential, field)
    }

    /// Signed height of `x` above the plane of the triangle.
    pub fn height(&self, x: &Vec3) -> f64 {
        (x - self.vertices[0]).dot(&self.normal)
    }

    /// Jacobian `∂F_i/∂x_j` of the field `F = ∫ (x−y)/|x−y|³ dy`, i.e. minus
    /// the Hessian of the potential. Valid off the triangle's edges.
    pub fn field_gradient(&self, x: &Vec3) -> Matrix3<f64> {
        let mut jac = -self.normal * self.solid_angle_gradient(x).transpose();
        for (k, (s, m)) in self.edges.iter().enumerate() {
            let grad = log_ratio_gradient(&(self.vertices[(k + 1) % 3] - x), s)
                - log_ratio_gradient(&(self.vertices[k] - x), s);
            jac += m * grad.transpose();
        }
        jac
    }

    /// Gradient of the signed solid angle with respect to `x`.
    pub fn solid_angle_gradient(&self, x: &Vec3) -> Vec3 {
        let [a, b, c] = self.vertices.map(|v| v - x);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let numerator = a.dot(&b.cross(&c));
        let denominator = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
        let d_num = -(b.cross(&c) + c.cross(&a) + a.cross(&b));
        let d_den = -(a * (lb * lc / la)
            + b * (la * lc / lb)
            + c * (la * lb / lc)
            + (a + b) * lc
            + c * (a.dot(&b) / lc)
            + (a + c) * lb
            + b * (a.dot(&c) / lb)
            + (b + c) * la
            + a * (b.dot(&c) / la));
        (d_num * denominator - d_den * numerator) * (2.0 / (numerator * numerator + denominator * denominator))
    }
}

/// `∇_x ln(R + l)` for an end point at `p = v − x` on an edge with unit
/// direction `s`, where `R = |p|` and `l = p·s`. When `l < 0` the sum
/// `R + l` is formed as `ρ²/(R − l)` to avoid cancellation.
fn log_ratio_gradient(p: &Vec3, s: &Vec3) -> Vec3 {
    let r = p.norm();
    let l = p.dot(s);
    let perp = p - s * l;
    let r_plus_l = if l >= 0.0 { r + l } else { perp.norm_squared() / (r - l) };
    -(s * r_plus_l + perp) / (r * r_plus_l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::DUNAVANT_7;

    /// Brute-force reference: 7-point rule on a 4^level subdivision.
    fn brute(tri: &[Vec3; 3], x: &Vec3, level: u32) -> (f64, Vec3, f64) {
        let area = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm() / 2.0;
        let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).normalize();
        let mut phi = 0.0;
        let mut field = Vec3::zeros();
        let mut omega = 0.0;
        for (y, w) in DUNAVANT_7.map_subdivided(tri, area, level) {
            let d = x - y;
            let r = d.norm();
            phi += w / r;
            field += d * (w / r.powi(3));
            // solid angle seen from x: ∫ ⟨y − x, n⟩ / r³
            omega += w * (y - x).dot(&n) / r.powi(3);
        }
        (phi, field, omega)
    }

    fn triangle() -> [Vec3; 3] {
        [
            Vec3::new(0.1, -0.2, 0.05),
            Vec3::new(1.0, 0.1, -0.1),
            Vec3::new(0.3, 0.9, 0.2),
        ]
    }

    #[test]
    fn matches_brute_force_off_the_plane() {
        let tri = triangle();
        let t = FlatTriangle::new(tri);
        let probes = [
            Vec3::new(0.4, 0.3, 0.8),
            Vec3::new(0.4, 0.3, -0.5),
            Vec3::new(2.0, -1.0, 0.3),
            Vec3::new(-0.7, 0.2, -0.4),
            t.normal() * 0.3 + (tri[0] + tri[1]) / 2.0,
        ];
        for x in probes {
            let (phi, field) = t.potential_and_field(&x);
            let (bphi, bfield, bomega) = brute(&tri, &x, 5);
            assert!((phi - bphi).abs() < 1e-9 * bphi.abs(), "{phi} {bphi}");
            assert!((field - bfield).norm() < 1e-8 * bfield.norm(), "{field} {bfield}");
            assert!((t.solid_angle(&x) - bomega).abs() < 1e-8 * bomega.abs().max(1e-3));
        }
    }

    #[test]
    fn in_plane_principal_value() {
        let tri = triangle();
        let t = FlatTriangle::new(tri);
        let inside = (tri[0] + tri[1] + tri[2]) / 3.0;
        let (phi, field) = t.potential_and_field(&inside);
        assert!(field.dot(&t.normal()).abs() < 1e-12);
        assert!(phi > 0.0);
        // the in-plane potential is the limit from either side
        let eps = 1e-7;
        let (above, _) = t.potential_and_field(&(inside + t.normal() * eps));
        let (below, _) = t.potential_and_field(&(inside - t.normal() * eps));
        assert!((above - phi).abs() < 1e-6 && (below - phi).abs() < 1e-6);
        // outside the triangle, still in its plane
        let outside = tri[1] * 1.5 - tri[0] * 0.5;
        let (phi_out, field_out) = t.potential_and_field(&outside);
        let (bphi, bfield, _) = brute(&tri, &outside, 5);
        assert!((phi_out - bphi).abs() < 1e-8 * bphi);
        assert!((field_out - bfield).norm() < 1e-7 * bfield.norm());
    }

    #[test]
    fn solid_angle_jumps_by_four_pi_over_a_closed_surface() {
        // tetrahedron with outward normals: Σ Ω = 4π inside, 0 outside
        let v = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let faces = [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
        let total = |x: Vec3| -> f64 {
            faces
                .iter()
                .map(|f| FlatTriangle::new([v[f[0]], v[f[1]], v[f[2]]]).solid_angle(&x))
                .sum()
        };
        let four_pi = 4.0 * std::f64::consts::PI;
        assert!((total(Vec3::new(0.2, 0.2, 0.2)) - four_pi).abs() < 1e-12);
        assert!(total(Vec3::new(1.0, 1.0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn field_gradient_matches_finite_differences() {
        let t = FlatTriangle::new(triangle());
        let probes = [
            Vec3::new(0.5, 0.2, 0.15),
            Vec3::new(0.4, 0.3, -0.5),
            Vec3::new(-1.5, 2.0, 0.3),
            // behind an edge extension, where R + l nearly cancels
            Vec3::new(-2.0, -0.5, 0.12),
        ];
        let h = 1e-5;
        for x in probes {
            let jac = t.field_gradient(&x);
            assert!((jac - jac.transpose()).norm() < 1e-9 * jac.norm(), "{x}");
            // Laplace: the potential's Hessian is trace free off the triangle
            assert!(jac.trace().abs() < 1e-9 * jac.norm());
            for axis in 0..3 {
                let mut e = Vec3::zeros();
                e[axis] = h;
                let fd = (t.potential_and_field(&(x + e)).1 - t.potential_and_field(&(x - e)).1) / (2.0 * h);
                assert!((jac.column(axis) - fd).norm() < 1e-6 * jac.norm(), "{x} {axis}");
                let omega_fd = (t.solid_angle(&(x + e)) - t.solid_angle(&(x - e))) / (2.0 * h);
                assert!((t.solid_angle_gradient(&x)[axis] - omega_fd).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn field_is_minus_gradient_of_potential() {
        let t = FlatTriangle::new(triangle());
        let x = Vec3::new(0.5, 0.2, 0.15);
        let (_, field) = t.potential_and_field(&x);
        let h = 1e-6;
        for axis in 0..3 {
            let mut e = Vec3::zeros();
            e[axis] = h;
            let d = (t.potential_and_field(&(x + e)).0 - t.potential_and_field(&(x - e)).0) / (2.0 * h);
            assert!((field[axis] + d).abs() < 1e-6, "{axis}");
        }
    }
}
