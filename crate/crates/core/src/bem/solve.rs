use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::Serialize;

use super::{column, BemError, BemSystem};
use crate::Vec3;

/// A single-layer potential `u = S q` together with its boundary data.
#[derive(Debug, Clone, Serialize)]
pub struct HarmonicSolution {
    /// Face densities `q`.
    pub density: Vec<f64>,
    /// Face averages of the boundary trace of `u`.
    pub trace: Vec<f64>,
    /// Additive constant of a Dirichlet solve with free constant.
    pub constant: Option<f64>,
    /// Exterior Dirichlet energy `∫_U |∇u|²`.
    pub energy: f64,
}

impl HarmonicSolution {
    /// Total charge `Σ q·area`.
    pub fn charge(&self, system: &BemSystem) -> f64 {
        self.density.iter().zip(&system.areas).map(|(q, a)| q * a).sum()
    }

    /// `∫_{∂U} u da`.
    pub fn trace_integral(&self, system: &BemSystem) -> f64 {
        self.trace.iter().zip(&system.areas).map(|(t, a)| t * a).sum()
    }
}

fn to_vec(m: &Mat<f64>, col: usize) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, col)]).collect()
}

fn check_finite(values: &[f64]) -> Result<(), BemError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(BemError::SolveFailure("non-finite density".into()))
    }
}

/// Capacitary potential: trace ≡ 1, so `V q = a` and `Cap = aᵀq`.
pub fn solve_capacity(system: &BemSystem) -> Result<(f64, HarmonicSolution), BemError> {
    let q = system.single_layer_llt.solve(column(&system.areas));
    let density = to_vec(&q, 0);
    check_finite(&density)?;
    let cap: f64 = density.iter().zip(&system.areas).map(|(q, a)| q * a).sum();
    let trace = system.trace(&density);
    Ok((
        cap,
        HarmonicSolution {
            density,
            trace,
            constant: None,
            energy: cap,
        },
    ))
}

/// Exterior Neumann problems `∂_ν u = g` for several face-constant data
/// `g` sharing one factorisation of `−½M + K'`.
pub fn solve_neumann(system: &BemSystem, data: &[Vec<f64>]) -> Result<Vec<HarmonicSolution>, BemError> {
    let n = system.dimension();
    for g in data {
        system.check_len(g)?;
    }
    if data.is_empty() {
        return Ok(Vec::new());
    }
    let operator = Mat::from_fn(n, n, |i, j| {
        let diag = if i == j { -0.5 * system.areas[i] } else { 0.0 };
        diag + system.adjoint_double_layer[(i, j)]
    });
    let lu = operator.partial_piv_lu();
    drop(operator);
    let rhs = Mat::from_fn(n, data.len(), |i, k| system.areas[i] * data[k][i]);
    let q = lu.solve(&rhs);
    let vq = &system.single_layer * &q;
    data.iter()
        .enumerate()
        .map(|(k, g)| {
            let density = to_vec(&q, k);
            check_finite(&density)?;
            let trace: Vec<f64> = (0..n).map(|i| vq[(i, k)] / system.areas[i]).collect();
            // ∫_U |∇u|² = −∫ u ∂_ν u, with ν pointing into U
            let energy = -(0..n).map(|i| g[i] * vq[(i, k)]).sum::<f64>();
            Ok(HarmonicSolution {
                density,
                trace,
                constant: None,
                energy,
            })
        })
        .collect()
}

/// Exterior Dirichlet problem with trace `f + c` and zero total charge,
/// which makes the solution decay one order faster than the capacitary
/// potential. Solved by eliminating `c` against the capacitary density.
pub fn solve_dirichlet_with_constant(system: &BemSystem, data: &[Vec<f64>]) -> Result<Vec<HarmonicSolution>, BemError> {
    let n = system.dimension();
    for f in data {
        system.check_len(f)?;
    }
    let (cap, capacitary) = solve_capacity(system)?;
    let rhs = Mat::from_fn(n, data.len(), |i, k| system.areas[i] * data[k][i]);
    let qf = system.single_layer_llt.solve(&rhs);
    let steklov = system.steklov_operator();
    data.iter()
        .enumerate()
        .map(|(k, f)| {
            let moment: f64 = (0..n).map(|i| capacitary.density[i] * rhs[(i, k)]).sum();
            let c = -moment / cap;
            let density: Vec<f64> = (0..n).map(|i| qf[(i, k)] + c * capacitary.density[i]).collect();
            check_finite(&density)?;
            let trace = system.trace(&density);
            let aq = &steklov * column(&density);
            let energy = (0..n).map(|i| (f[i] + c) * aq[(i, 0)]).sum();
            Ok(HarmonicSolution {
                density,
                trace,
                constant: Some(c),
                energy,
            })
        })
        .collect()
}

/// Distance from `x` to the triangle `[a, b, c]`.
pub(crate) fn point_triangle_distance(x: &Vec3, [a, b, c]: &[Vec3; 3]) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = x - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = x - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return (ap - ab * (d1 / (d1 - d3))).norm();
    }
    let cp = x - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return (ap - ac * (d2 / (d2 - d6))).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - (c - b) * w).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (ap - ab * v - ac * w).norm()
}

/// `S q (x)` at a point of `U` at least one mean edge length away from the
/// surface.
pub fn evaluate_exterior(system: &BemSystem, density: &[f64], x: &Vec3) -> Result<f64, BemError> {
    system.check_len(density)?;
    let distance = system
        .face_vertices
        .iter()
        .map(|t| point_triangle_distance(x, t))
        .fold(f64::INFINITY, f64::min);
    if distance < system.mean_edge {
        return Err(BemError::TooCloseToSurface {
            distance,
            limit: system.mean_edge,
        });
    }
    let mut value = 0.0;
    let mut winding = 0.0;
    for (t, q) in system.triangles.iter().zip(density) {
        value += q * t.potential_and_field(x).0;
        winding += t.solid_angle(x);
    }
    // seen from inside, every outward face has its back turned and the
    // solid angles sum to 4π; outside they cancel
    if winding > 2.0 * PI {
        return Err(BemError::NotExterior);
    }
    Ok(value / (4.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bem::assemble;
    use crate::mesh::make_icosphere;

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    #[test]
    fn capacity_of_spheres() {
        let mesh = make_icosphere(1.0, 3);
        let (cap1, sol) = solve_capacity(&assemble(&mesh).unwrap()).unwrap();
        assert!(rel(cap1, 4.0 * PI) < 0.01, "{cap1}");
        assert!(sol.density.iter().all(|&q| q > 0.0));
        assert!(sol.trace.iter().all(|t| (t - 1.0).abs() < 1e-10));
        let caps: Vec<f64> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&r| solve_capacity(&assemble(&make_icosphere(r, 2)).unwrap()).unwrap().0 / r)
            .collect();
        assert!(caps.iter().all(|c| rel(*c, caps[0]) < 5e-3), "{caps:?}");
        assert!(rel(caps[1] * 2.0, 8.0 * PI) < 0.02);
    }

    #[test]
    fn capacity_error_converges() {
        let errors: Vec<f64> = (1..=3)
            .map(|s| {
                let (cap, _) = solve_capacity(&assemble(&make_icosphere(1.0, s)).unwrap()).unwrap();
                (cap - 4.0 * PI).abs()
            })
            .collect();
        assert!(errors[0] / errors[1] > 1.8 && errors[1] / errors[2] > 1.8, "{errors:?}");
    }

    #[test]
    fn neumann_dipole_on_sphere() {
        let mesh = make_icosphere(1.0, 3);
        let sys = assemble(&mesh).unwrap();
        let g: Vec<f64> = sys.normals.iter().map(|n| -n.z).collect();
        let zero = vec![0.0; sys.dimension()];
        let sols = solve_neumann(&sys, &[g, zero]).unwrap();
        assert!(rel(sols[0].energy, 2.0 * PI / 3.0) < 0.02, "{}", sols[0].energy);
        // the exact trace is ½ z
        let err = sys
            .centroids
            .iter()
            .zip(&sols[0].trace)
            .map(|(c, t)| (t - 0.5 * c.z).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.02, "{err}");
        let area: f64 = sys.areas.iter().sum();
        assert!(sols[0].trace_integral(&sys).abs() < 1e-3 * (area * sols[0].energy).sqrt());
        assert!(sols[1].density.iter().all(|&q| q == 0.0) && sols[1].energy == 0.0);
    }

    #[test]
    fn capacitary_and_neumann_potentials_are_orthogonal() {
        // ∫ u ∂_ν w = −∫ ⟨ν,e⟩ vanishes exactly on a closed mesh
        let mesh = crate::mesh::make_ellipsoid(1.4, 1.0, 0.8, 3);
        let sys = assemble(&mesh).unwrap();
        let (cap, u) = solve_capacity(&sys).unwrap();
        let g: Vec<f64> = sys.normals.iter().map(|n| -(n.x + 0.3 * n.y)).collect();
        let w = &solve_neumann(&sys, std::slice::from_ref(&g)).unwrap()[0];
        let pairing: f64 = (0..sys.dimension()).map(|i| u.trace[i] * g[i] * sys.areas[i]).sum();
        assert!(pairing.abs() < 1e-3 * (w.energy * cap).sqrt(), "{pairing}");
    }

    #[test]
    fn dirichlet_dipole_and_constants() {
        let mesh = make_icosphere(1.0, 3);
        let sys = assemble(&mesh).unwrap();
        let f: Vec<f64> = sys.centroids.iter().map(|c| c.z).collect();
        let kappa = vec![2.5; sys.dimension()];
        let sols = solve_dirichlet_with_constant(&sys, &[f, kappa]).unwrap();
        assert!(rel(sols[0].energy, 8.0 * PI / 3.0) < 0.02, "{}", sols[0].energy);
        assert!(sols[0].constant.unwrap().abs() < 1e-8);
        assert!(sols[0].charge(&sys).abs() < 1e-10);
        assert!((sols[1].constant.unwrap() + 2.5).abs() < 1e-9);
        assert!(sols[1].density.iter().all(|q| q.abs() < 1e-9));
        assert!(sols[1].energy.abs() < 1e-9);
    }

    #[test]
    fn dirichlet_constant_follows_translation() {
        let z = Vec3::new(0.3, -0.2, 0.5);
        let mesh = make_icosphere(1.0, 2).translated(z);
        let sys = assemble(&mesh).unwrap();
        let data: Vec<Vec<f64>> = (0..3).map(|k| sys.centroids.iter().map(|c| c[k]).collect()).collect();
        let sols = solve_dirichlet_with_constant(&sys, &data).unwrap();
        for k in 0..3 {
            assert!((sols[k].constant.unwrap() + z[k]).abs() < 0.02 * z.norm(), "{k}");
        }
    }

    #[test]
    fn exterior_potential_decay() {
        let mesh = make_icosphere(1.0, 3);
        let sys = assemble(&mesh).unwrap();
        let (_, u) = solve_capacity(&sys).unwrap();
        let x = Vec3::new(0.0, 0.0, 2.0);
        let at2 = evaluate_exterior(&sys, &u.density, &x).unwrap();
        assert!(rel(at2, 0.5) < 0.01, "{at2}");
        let dir = Vec3::new(1.0, 2.0, -0.5).normalize();
        let u10 = evaluate_exterior(&sys, &u.density, &(dir * 10.0)).unwrap();
        let u20 = evaluate_exterior(&sys, &u.density, &(dir * 20.0)).unwrap();
        assert!(rel(u10 / u20, 2.0) < 0.01);

        let f: Vec<f64> = sys.centroids.iter().map(|c| c.dot(&dir)).collect();
        let v = &solve_dirichlet_with_constant(&sys, &[f]).unwrap()[0];
        let v10 = evaluate_exterior(&sys, &v.density, &(dir * 10.0)).unwrap();
        let v20 = evaluate_exterior(&sys, &v.density, &(dir * 20.0)).unwrap();
        assert!(rel(v10 / v20, 4.0) < 0.02, "{}", v10 / v20);
        // exact dipole potential ⟨x,e⟩/|x|³
        assert!(rel(v10, 0.01) < 0.02, "{v10}");
    }

    #[test]
    fn exterior_evaluation_rejects_bad_points() {
        let mesh = make_icosphere(1.0, 2);
        let sys = assemble(&mesh).unwrap();
        let q = vec![1.0; sys.dimension()];
        assert!(matches!(
            evaluate_exterior(&sys, &q, &Vec3::new(0.0, 0.0, 1.01)),
            Err(BemError::TooCloseToSurface { .. })
        ));
        assert!(matches!(evaluate_exterior(&sys, &q, &Vec3::zeros()), Err(BemError::NotExterior)));
        assert!(matches!(
            evaluate_exterior(&sys, &q[1..], &Vec3::new(0.0, 0.0, 3.0)),
            Err(BemError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn point_triangle_distance_regions() {
        let t = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let cases = [
            (Vec3::new(0.2, 0.2, 0.5), 0.5),
            (Vec3::new(-1.0, -1.0, 0.0), 2f64.sqrt()),
            (Vec3::new(0.5, -2.0, 0.0), 2.0),
            (Vec3::new(1.0, 1.0, 0.0), 0.5f64.sqrt()),
            (Vec3::new(3.0, 0.0, 4.0), 20f64.sqrt()),
        ];
        for (x, d) in cases {
            assert!((point_triangle_distance(&x, &t) - d).abs() < 1e-14, "{x}");
        }
    }
}
