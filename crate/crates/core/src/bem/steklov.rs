//! Exterior Steklov eigenpairs.
//!
//! With `u = S q`, the condition `−∂_ν u = ξ u` tested against face
//! indicators reads `A q = ξ V q` with `A = ½M − K'`. That pencil is not
//! symmetric. Testing instead against the projected trace `t = M⁻¹ V q`
//! gives
//!
//! ```text
//! X q = ξ B q,   X = V M⁻¹ A,   B = V M⁻¹ V,
//! ```
//!
//! where `qᵀXq = tᵀAq` is the exterior energy of `u` and `qᵀBq = tᵀMt` is
//! `∫ trace²`. `B` is symmetric positive definite. `X` is symmetric up to
//! discretisation error because the continuous operators satisfy
//! `S K' = K S`; the eigenproblem is solved for its symmetric part `E`,
//! and the relative size of the skew part is reported. A wrong sign in `K'`
//! leaves `X` nearly symmetric but makes `E` indefinite, which the Cholesky
//! factorisation of `E` detects.
//!
//! The lowest eigenpairs come from block subspace iteration on `E⁻¹B`
//! with Rayleigh–Ritz projection.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{column, BemError, BemSystem};

#[derive(Debug, Clone, Copy)]
pub struct SteklovOptions {
    /// Extra block vectors beyond the requested count.
    pub guard_vectors: usize,
    /// Relative change of the wanted Ritz values that counts as converged.
    pub value_tolerance: f64,
    /// Relative residual `‖Ey − θBy‖/‖Ey‖` that counts as converged.
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    /// Allowed disagreement between eigenvalue and Rayleigh quotient.
    pub rayleigh_tolerance: f64,
    pub seed: u64,
}

impl Default for SteklovOptions {
    fn default() -> Self {
        Self {
            guard_vectors: 8,
            value_tolerance: 1e-12,
            residual_tolerance: 1e-8,
            max_iterations: 500,
            rayleigh_tolerance: 1e-6,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Face densities, normalised to `∫ trace² = 1`.
    pub densities: Vec<Vec<f64>>,
    /// Face averages of the eigenfunction traces.
    pub traces: Vec<Vec<f64>>,
    /// Exterior energy over `∫ trace²`, recomputed from `A` directly.
    pub rayleigh_quotients: Vec<f64>,
    /// `‖X − Xᵀ‖_F / ‖X‖_F`.
    pub skew_ratio: f64,
    pub iterations: usize,
}

/// Row `i` of `A` divided by the area of face `i`: `M⁻¹ A`.
fn scaled_steklov_operator(system: &BemSystem) -> Mat<f64> {
    let n = system.dimension();
    Mat::from_fn(n, n, |i, j| {
        let diag = if i == j { 0.5 * system.areas[i] } else { 0.0 };
        (diag - system.adjoint_double_layer[(i, j)]) / system.areas[i]
    })
}

/// Symmetric part of `V M⁻¹ A` and the relative Frobenius norm of its skew
/// part.
pub(crate) fn energy_matrix(system: &BemSystem) -> (Mat<f64>, f64) {
    let n = system.dimension();
    let mut x = {
        let scaled = scaled_steklov_operator(system);
        &system.single_layer * &scaled
    };
    let (mut skew, mut total) = (0.0, 0.0);
    for j in 0..n {
        total += x[(j, j)] * x[(j, j)];
        for i in 0..j {
            let (a, b) = (x[(i, j)], x[(j, i)]);
            skew += 0.5 * (a - b) * (a - b);
            total += a * a + b * b;
            let s = 0.5 * (a + b);
            x[(i, j)] = s;
            x[(j, i)] = s;
        }
    }
    (x, (skew / total).sqrt())
}

/// `B Y = V M⁻¹ V Y`.
fn apply_b(system: &BemSystem, y: &Mat<f64>) -> Mat<f64> {
    let mut vy = &system.single_layer * y;
    for j in 0..vy.ncols() {
        for i in 0..vy.nrows() {
            vy[(i, j)] /= system.areas[i];
        }
    }
    &system.single_layer * &vy
}

fn gram(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let g = a.transpose() * b;
    Mat::from_fn(g.nrows(), g.ncols(), |i, j| 0.5 * (g[(i, j)] + g[(j, i)]))
}

fn column_norm(m: &Mat<f64>, j: usize) -> f64 {
    (0..m.nrows()).map(|i| m[(i, j)] * m[(i, j)]).sum::<f64>().sqrt()
}

/// Ritz pairs of `(E, B)` on `span Z`, given `EZ` and `BZ`. Returns the
/// Ritz values and the coefficient matrix mapping `Z` to Ritz vectors.
fn rayleigh_ritz(z: &Mat<f64>, ez: &Mat<f64>, bz: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>), BemError> {
    let e_hat = gram(z, ez);
    let b_hat = gram(z, bz);
    let llt = b_hat
        .llt(Side::Lower)
        .map_err(|_| BemError::SolveFailure("block lost rank".into()))?;
    let l = llt.L().to_owned();
    // C = L⁻¹ Ê L⁻ᵀ
    let mut c = e_hat.clone();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), faer::Par::Seq);
    let mut ct = c.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), ct.as_mut(), faer::Par::Seq);
    let c = Mat::from_fn(ct.nrows(), ct.ncols(), |i, j| 0.5 * (ct[(i, j)] + ct[(j, i)]));
    let eig = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| BemError::SolveFailure("projected eigenproblem".into()))?;
    let values: Vec<f64> = (0..c.nrows()).map(|i| eig.S().column_vector()[i]).collect();
    // coefficients L⁻ᵀ U
    let mut coeff = eig.U().to_owned();
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.transpose(), coeff.as_mut(), faer::Par::Seq);
    Ok((values, coeff))
}

pub fn solve_steklov(system: &BemSystem, count: usize, options: SteklovOptions) -> Result<SpectralResult, BemError> {
    let n = system.dimension();
    let count = count.clamp(1, n);
    let block = (count + options.guard_vectors).min(n);

    let (energy, skew_ratio) = energy_matrix(system);
    let energy_llt = energy
        .llt(Side::Lower)
        .map_err(|_| BemError::IndefiniteEnergy { skew: skew_ratio })?;
    drop(energy);

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut y = Mat::from_fn(n, block, |_, _| rng.gen_range(-1.0..1.0));
    let mut by = apply_b(system, &y);
    let mut previous: Option<Vec<f64>> = None;
    let mut residual = f64::INFINITY;

    for iteration in 1..=options.max_iterations {
        // Z = E⁻¹ B Y, so E Z = B Y is known without another product
        let z = energy_llt.solve(&by);
        let bz = apply_b(system, &z);
        let (values, coeff) = rayleigh_ritz(&z, &by, &bz)?;
        y = &z * &coeff;
        let ey = &by * &coeff;
        by = &bz * &coeff;

        residual = (0..count)
            .map(|j| {
                let r = Mat::from_fn(n, 1, |i, _| ey[(i, j)] - values[j] * by[(i, j)]);
                column_norm(&r, 0) / column_norm(&ey, j)
            })
            .fold(0.0, f64::max);
        let change = previous.as_ref().map_or(f64::INFINITY, |p| {
            (0..count)
                .map(|j| (values[j] - p[j]).abs() / values[j].abs())
                .fold(0.0, f64::max)
        });
        if change < options.value_tolerance && residual < options.residual_tolerance {
            return finish(system, &y, &values[..count], skew_ratio, iteration, options);
        }
        previous = Some(values);
    }
    Err(BemError::NotConverged {
        iterations: options.max_iterations,
        residual,
    })
}

fn finish(
    system: &BemSystem,
    y: &Mat<f64>,
    values: &[f64],
    skew_ratio: f64,
    iterations: usize,
    options: SteklovOptions,
) -> Result<SpectralResult, BemError> {
    let n = system.dimension();
    let mut densities = Vec::new();
    let mut traces = Vec::new();
    let mut rayleigh_quotients = Vec::new();
    for (j, &value) in values.iter().enumerate() {
        let mut q: Vec<f64> = (0..n).map(|i| y[(i, j)]).collect();
        let mut t = system.trace(&q);
        let norm = t.iter().zip(&system.areas).map(|(t, a)| t * t * a).sum::<f64>().sqrt();
        // fix the sign by the largest-magnitude trace entry
        let pivot = t.iter().copied().fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m });
        let scale = pivot.signum() / norm;
        q.iter_mut().for_each(|v| *v *= scale);
        t.iter_mut().for_each(|v| *v *= scale);

        let mut aq = &system.adjoint_double_layer * column(&q);
        for i in 0..n {
            aq[(i, 0)] = 0.5 * system.areas[i] * q[i] - aq[(i, 0)];
        }
        let energy: f64 = (0..n).map(|i| t[i] * aq[(i, 0)]).sum();
        let mass: f64 = (0..n).map(|i| t[i] * t[i] * system.areas[i]).sum();
        let rayleigh = energy / mass;
        if !(value > 0.0) || (rayleigh / value - 1.0).abs() > options.rayleigh_tolerance {
            return Err(BemError::RayleighMismatch {
                eigenvalue: value,
                rayleigh,
            });
        }
        densities.push(q);
        traces.push(t);
        rayleigh_quotients.push(rayleigh);
    }
    Ok(SpectralResult {
        eigenvalues: values.to_vec(),
        densities,
        traces,
        rayleigh_quotients,
        skew_ratio,
        iterations,
    })
}
