//! Closed-form exterior quantities of the ball `B_R ⊂ Rⁿ`, `n ≥ 3`.
//!
//! The exterior Steklov eigenfunctions are `r^{2−n−m} Y_m` with `Y_m` a
//! spherical harmonic of degree `m`, giving eigenvalues `(n−2+m)/R` with the
//! multiplicity of degree-`m` harmonics.

use nalgebra::DMatrix;
use serde::Serialize;
use std::f64::consts::PI;

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Dimension `μ_m` of degree-`m` spherical harmonics on `S^{n−1}` and the
/// corresponding Laplace–Beltrami eigenvalue `τ_m = m(n−2+m)`.
pub fn harmonic_dims(n: u32, m: u32) -> (u64, u64) {
    assert!(n >= 3, "dimension must be at least 3");
    let (n, m) = (u64::from(n), u64::from(m));
    let mu = binomial(n + m - 1, n - 1) - if m >= 2 { binomial(n + m - 3, n - 1) } else { 0 };
    (mu, m * (n - 2 + m))
}

/// `Γ(k/2)` for a positive integer `k`, from the factorial recurrences.
fn gamma_half_integer(k: u32) -> f64 {
    let mut value = if k.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if k.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < f64::from(k) / 2.0 {
        value *= x;
        x += 1.0;
    }
    value
}

/// `ω_{n−1} = |S^{n−1}| = 2π^{n/2}/Γ(n/2)`.
pub fn sphere_area(n: u32) -> f64 {
    2.0 * PI.powf(f64::from(n) / 2.0) / gamma_half_integer(n)
}

pub fn ball_volume(n: u32, radius: f64) -> f64 {
    sphere_area(n) * radius.powi(n as i32) / f64::from(n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallEigenvalue {
    pub value: f64,
    pub multiplicity: u64,
    pub degree: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct BallSpectrum {
    pub dimension: u32,
    pub radius: f64,
    pub eigenvalues: Vec<BallEigenvalue>,
}

impl BallSpectrum {
    /// Eigenvalues repeated according to multiplicity.
    pub fn values(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.value, e.multiplicity as usize))
            .collect()
    }
}

/// The first `count` exterior Steklov eigenvalues counted with multiplicity;
/// the last degree is truncated so the multiplicities sum to `count`.
pub fn ball_spectrum(n: u32, radius: f64, count: usize) -> BallSpectrum {
    assert!(n >= 3 && radius > 0.0 && count >= 1);
    let mut eigenvalues = Vec::new();
    let mut remaining = count as u64;
    let mut m = 0;
    while remaining > 0 {
        let (mu, _) = harmonic_dims(n, m);
        let take = mu.min(remaining);
        eigenvalues.push(BallEigenvalue {
            value: f64::from(n - 2 + m) / radius,
            multiplicity: take,
            degree: m,
        });
        remaining -= take;
        m += 1;
    }
    BallSpectrum {
        dimension: n,
        radius,
        eigenvalues,
    }
}

/// `(n−2) ω_{n−1} R^{n−2}`, the Dirichlet energy of `(R/|x|)^{n−2}` outside
/// the ball.
pub fn ball_capacity(n: u32, radius: f64) -> f64 {
    f64::from(n - 2) * sphere_area(n) * radius.powi(n as i32 - 2)
}

#[derive(Debug, Clone)]
pub struct BallTensors {
    pub volume: f64,
    pub psi_bar: DMatrix<f64>,
    pub virtual_mass: DMatrix<f64>,
    pub polarization: DMatrix<f64>,
}

/// `Ψ̄ = I/n`, `W = |Ω|/(n−1)·I`, `P = (n−1)|Ω|·I`.
pub fn ball_tensors(n: u32, radius: f64) -> BallTensors {
    let volume = ball_volume(n, radius);
    let dim = n as usize;
    let nf = f64::from(n);
    BallTensors {
        volume,
        psi_bar: DMatrix::identity(dim, dim) / nf,
        virtual_mass: DMatrix::identity(dim, dim) * (volume / (nf - 1.0)),
        polarization: DMatrix::identity(dim, dim) * ((nf - 1.0) * volume),
    }
}
