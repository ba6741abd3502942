//! Quadrature rules: symmetric triangle rules and adaptive Gauss–Kronrod on
//! an interval.

use thiserror::Error;

use crate::Vec3;

/// Symmetric rule on the reference triangle: barycentric points with weights
/// summing to one.
#[derive(Debug, Clone, Copy)]
pub struct TriangleRule {
    pub points: &'static [([f64; 3], f64)],
}

pub const CENTROID: TriangleRule = TriangleRule {
    points: &[([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 1.0)],
};

/// Exact for quadratics.
pub const STRANG_FIX_3: TriangleRule = TriangleRule {
    points: &[
        ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
        ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
        ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
    ],
};

const A1: f64 = 0.059_715_871_789_769_82;
const B1: f64 = 0.470_142_064_105_115_1;
const W1: f64 = 0.132_394_152_788_506_2;
const A2: f64 = 0.797_426_985_353_087_3;
const B2: f64 = 0.101_286_507_323_456_3;
const W2: f64 = 0.125_939_180_544_827_2;

/// Seven-point rule exact for polynomials of degree five.
pub const DUNAVANT_7: TriangleRule = TriangleRule {
    points: &[
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ],
};

impl TriangleRule {
    /// Physical points and weights (weights include the triangle area).
    pub fn map(&self, tri: &[Vec3; 3], area: f64) -> Vec<(Vec3, f64)> {
        self.points
            .iter()
            .map(|&([a, b, c], w)| (tri[0] * a + tri[1] * b + tri[2] * c, w * area))
            .collect()
    }

    /// The rule applied on each of the `4^level` congruent subtriangles.
    pub fn map_subdivided(&self, tri: &[Vec3; 3], area: f64, level: u32) -> Vec<(Vec3, f64)> {
        let mut pieces = vec![*tri];
        for _ in 0..level {
            pieces = pieces
                .iter()
                .flat_map(|&[a, b, c]| {
                    let (ab, bc, ca) = ((a + b) / 2.0, (b + c) / 2.0, (c + a) / 2.0);
                    [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
                })
                .collect();
        }
        let sub_area = area / pieces.len() as f64;
        pieces
            .iter()
            .flat_map(|p| self.map(p, sub_area))
            .collect()
    }
}

/// Product Gauss rule on a triangle collapsed onto its first vertex, with
/// both coordinates graded towards that vertex and towards the edge
/// `tri[0]–tri[1]`.
///
/// The map is `x = P + ρ(Q − P) + ρσ(R − Q)` with `ρ = a^g`, `σ = b^g`,
/// whose Jacobian `2|T|ρ` cancels a point singularity at `P`; the grading
/// makes logarithmic singularities along `σ = 0` smooth enough for Gauss
/// points.
#[derive(Debug, Clone)]
pub struct GradedDuffy {
    nodes: Vec<(f64, f64)>,
    grading: i32,
}

impl GradedDuffy {
    pub fn new(order: usize, grading: i32) -> Self {
        let order = std::num::NonZeroUsize::new(order.max(1)).expect("nonzero");
        let nodes = gauss_quad::legendre::GaussLegendre::new(order)
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| ((x + 1.0) / 2.0, w / 2.0))
            .collect();
        Self { nodes, grading }
    }

    pub fn map(&self, [p, q, r]: &[Vec3; 3], area: f64) -> Vec<(Vec3, f64)> {
        let g = self.grading;
        let gf = f64::from(g);
        let mut out = Vec::with_capacity(self.nodes.len() * self.nodes.len());
        for &(a, wa) in &self.nodes {
            let rho = a.powi(g);
            let drho = gf * a.powi(g - 1) * wa;
            for &(b, wb) in &self.nodes {
                let sigma = b.powi(g);
                let dsigma = gf * b.powi(g - 1) * wb;
                let x = p + (q - p) * rho + (r - q) * (rho * sigma);
                out.push((x, 2.0 * area * rho * drho * dsigma));
            }
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("adaptive quadrature did not converge (estimate {estimate:e}, error {error:e})")]
    NoConvergence { estimate: f64, error: f64 },
    #[error("integrand returned a non-finite value at {0}")]
    NonFinite(f64),
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Result<(f64, f64), QuadratureError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFinite(x))
        }
    };
    let fc = eval(c)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (k, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let pair = eval(c - h * x)? + eval(c + h * x)?;
        kronrod += w * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    Ok((kronrod * h, ((kronrod - gauss) * h).abs()))
}

/// Globally adaptive G7–K15 quadrature of `f` over `[a, b]` to the given
/// relative tolerance (with an absolute floor of `rel_tol · 1e-3 · |I|`).
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64, QuadratureError> {
    let mut intervals = vec![(a, b, kronrod15(&f, a, b)?)];
    for _ in 0..2000 {
        let total: f64 = intervals.iter().map(|iv| iv.2 .0).sum();
        let error: f64 = intervals.iter().map(|iv| iv.2 .1).sum();
        if error <= rel_tol * total.abs() || error < f64::MIN_POSITIVE {
            return Ok(total);
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, kronrod15(&f, lo, mid)?));
        intervals.push((mid, hi, kronrod15(&f, mid, hi)?));
    }
    let estimate = intervals.iter().map(|iv| iv.2 .0).sum();
    let error = intervals.iter().map(|iv| iv.2 .1).sum();
    Err(QuadratureError::NoConvergence { estimate, error })
}
