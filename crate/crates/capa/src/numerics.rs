//! Quadrature rules, the adaptive reference integrator, and discretised
//! fields on aperture grids.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::geometry::{PlanarAperture, Point3};

/// Relative tolerance used by the reference integrator unless told otherwise.
pub const ORACLE_REL_TOL: f64 = 1e-8;
/// Absolute error floor for near-zero integrals.
pub const ORACLE_ABS_FLOOR: f64 = 1e-14;
/// Upper bound on the number of subintervals per 1-D integral.
pub const ORACLE_MAX_INTERVALS: usize = 4000;

/// Chebyshev-Gauss rule of order `n`: nodes `cos((2j-1) pi / 2n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevRule {
    nodes: Vec<f64>,
    // sqrt(1 - psi_j^2), computed as a sine to keep full precision near +-1
    factors: Vec<f64>,
}

impl ChebyshevRule {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("Chebyshev-Gauss order must be at least 1");
        }
        let angle = |j: usize| (2 * j - 1) as f64 * PI / (2 * n) as f64;
        let mut nodes: Vec<f64> = (1..=n).map(|j| angle(j).cos()).collect();
        let mut factors: Vec<f64> = (1..=n).map(|j| angle(j).sin()).collect();
        // the rule is symmetric mathematically; force it numerically so that
        // odd integrands cancel exactly
        for j in 0..n / 2 {
            let v = 0.5 * (nodes[j] - nodes[n - 1 - j]);
            nodes[j] = v;
            nodes[n - 1 - j] = -v;
            factors[n - 1 - j] = factors[j];
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, factors })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `sqrt(1 - psi_j^2)` for each node.
    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    /// `sum_j sqrt(1 - psi_j^2) f(psi_j)`, adding mirrored nodes first so odd
    /// integrands cancel exactly.
    fn symmetric_sum<F>(&self, mut f: F) -> Result<Complex64>
    where
        F: FnMut(f64) -> Result<Complex64>,
    {
        let n = self.order();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n / 2 {
            acc += self.factors[j] * (f(self.nodes[j])? + f(self.nodes[n - 1 - j])?);
        }
        if n % 2 == 1 {
            acc += self.factors[n / 2] * f(self.nodes[n / 2])?;
        }
        Ok(acc)
    }
}

pub fn chebyshev_nodes(n: usize) -> Result<ChebyshevRule> {
    ChebyshevRule::new(n)
}

fn finite(v: Complex64, x: f64, z: f64) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { x, z })
    }
}

/// `(pi a / n) sum_j sqrt(1 - psi_j^2) f(a psi_j)`, approximating the integral
/// of `f` over `[-a, a]`.
pub fn cg_integrate_1d<F>(mut f: F, half_width: f64, rule: &ChebyshevRule) -> Result<Complex64>
where
    F: FnMut(f64) -> Complex64,
{
    let acc = rule.symmetric_sum(|p| {
        let x = half_width * p;
        finite(f(x), x, 0.0)
    })?;
    Ok(acc * (PI * half_width / rule.order() as f64))
}

/// Tensor-product version of [`cg_integrate_1d`] over `[-a_x, a_x] x [-a_z, a_z]`.
pub fn cg_integrate_2d<F>(mut f: F, half_x: f64, half_z: f64, rule: &ChebyshevRule) -> Result<Complex64>
where
    F: FnMut(f64, f64) -> Complex64,
{
    let n = rule.order() as f64;
    let acc = rule.symmetric_sum(|px| {
        let x = half_x * px;
        rule.symmetric_sum(|pz| {
            let z = half_z * pz;
            finite(f(x, z), x, z)
        })
    })?;
    Ok(acc * (PI * PI * half_x * half_z / (n * n)))
}

// 15-point Kronrod extension of the 7-point Gauss rule (abscissae on [0, 1)).
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

struct Segment {
    lo: f64,
    hi: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F>(f: &mut F, lo: f64, hi: f64) -> Result<Segment>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx)? + f(c + dx)?;
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    let value = k * h;
    let error = ((k - g) * h).norm();
    Ok(Segment { lo, hi, value, error })
}

fn adapt<F>(mut f: F, lo: f64, hi: f64, rel_tol: f64, abs_floor: f64) -> Result<Complex64>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    if lo == hi {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod(&mut f, lo, hi)?;
    let mut total = first.value;
    let mut error = first.error;
    heap.push(first);
    loop {
        if error <= (rel_tol * total.norm()).max(abs_floor) {
            return Ok(total);
        }
        if heap.len() >= ORACLE_MAX_INTERVALS {
            return Err(Error::NoConvergence { estimate: error, intervals: heap.len() });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        let left = kronrod(&mut f, worst.lo, mid)?;
        let right = kronrod(&mut f, mid, worst.hi)?;
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // refresh the running error so cancellation drift cannot stall the loop
        if heap.len() % 64 == 0 {
            error = heap.iter().map(|s| s.error).sum();
        }
    }
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `[lo, hi]`.
pub fn adaptive_integrate_1d<F>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<Complex64>
where
    F: FnMut(f64) -> Complex64,
{
    check_tol(rel_tol)?;
    adapt(|x| finite(f(x), x, 0.0), lo, hi, rel_tol, ORACLE_ABS_FLOOR)
}

/// Rectangle `[x0, x1] x [z0, z1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds2 {
    pub x: (f64, f64),
    pub z: (f64, f64),
}

impl Bounds2 {
    pub fn centered(half_x: f64, half_z: f64) -> Self {
        Self { x: (-half_x, half_x), z: (-half_z, half_z) }
    }
}

/// Nested adaptive integration: an adaptive z-integral inside an adaptive
/// x-integral. The inner tolerance is a tenth of the outer one.
pub fn adaptive_integrate_2d<F>(mut f: F, bounds: Bounds2, rel_tol: f64) -> Result<Complex64>
where
    F: FnMut(f64, f64) -> Complex64,
{
    check_tol(rel_tol)?;
    let (z0, z1) = bounds.z;
    let inner_tol = rel_tol / 10.0;
    let floor = ORACLE_ABS_FLOOR / (bounds.x.1 - bounds.x.0).abs().max(1.0);
    adapt(
        |x| adapt(|z| finite(f(x, z), x, z), z0, z1, inner_tol, floor),
        bounds.x.0,
        bounds.x.1,
        rel_tol,
        ORACLE_ABS_FLOOR,
    )
}

fn check_tol(rel_tol: f64) -> Result<()> {
    if rel_tol > 0.0 && rel_tol < 1.0 {
        Ok(())
    } else {
        invalid(format!("relative tolerance must lie in (0, 1), got {rel_tol}"))
    }
}

/// Quadrature points and weights on an aperture.
#[derive(Debug, Clone, PartialEq)]
pub struct ApertureGrid {
    points: Vec<Point3>,
    weights: Vec<f64>,
}

impl ApertureGrid {
    pub fn new(points: Vec<Point3>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Dimension { expected: points.len(), got: weights.len() });
        }
        if points.is_empty() {
            return invalid("grid has no points");
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return invalid("grid weights must be positive");
        }
        Ok(Self { points, weights })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Cell-centred `n_x x n_z` grid on a planar aperture.
pub fn uniform_grid(a: &PlanarAperture, n_x: usize, n_z: usize) -> Result<Arc<ApertureGrid>> {
    if n_x == 0 || n_z == 0 {
        return invalid("grid resolution must be at least 1x1");
    }
    let (dx, dz) = (a.length_x / n_x as f64, a.length_z / n_z as f64);
    let w = a.area() / (n_x * n_z) as f64;
    let mut points = Vec::with_capacity(n_x * n_z);
    for iz in 0..n_z {
        let z = -0.5 * a.length_z + (iz as f64 + 0.5) * dz;
        for ix in 0..n_x {
            let x = -0.5 * a.length_x + (ix as f64 + 0.5) * dx;
            points.push(Point3::new(x, 0.0, z));
        }
    }
    let weights = vec![w; points.len()];
    Ok(Arc::new(ApertureGrid::new(points, weights)?))
}

/// Complex samples of a function on an [`ApertureGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: Arc<ApertureGrid>,
    values: Vec<Complex64>,
}

impl SampledField {
    pub fn new(grid: Arc<ApertureGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F>(grid: Arc<ApertureGrid>, f: F) -> Self
    where
        F: Fn(&Point3) -> Complex64,
    {
        let values = grid.points().iter().map(f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<ApertureGrid>) -> Self {
        let values = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<ApertureGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sum_i w_i |v_i|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.grid.weights.iter().zip(&self.values).map(|(w, v)| w * v.norm_sqr()).sum()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let values = self.values.iter().map(|v| v * c).collect();
        Self { grid: Arc::clone(&self.grid), values }
    }

    pub fn conj(&self) -> Self {
        let values = self.values.iter().map(|v| v.conj()).collect();
        Self { grid: Arc::clone(&self.grid), values }
    }

    /// `a u + b v`.
    pub fn combine(a: Complex64, u: &SampledField, b: Complex64, v: &SampledField) -> Result<Self> {
        same_grid(u, v)?;
        let values = u.values.iter().zip(&v.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: Arc::clone(&u.grid), values })
    }

    /// Largest pointwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &SampledField) -> Result<f64> {
        same_grid(self, other)?;
        Ok(self.values.iter().zip(&other.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
    }
}

fn same_grid(u: &SampledField, v: &SampledField) -> Result<()> {
    if Arc::ptr_eq(&u.grid, &v.grid) || u.grid == v.grid {
        Ok(())
    } else {
        Err(Error::GridMismatch(u.grid.len(), v.grid.len()))
    }
}

/// `sum_i w_i conj(u_i) v_i`.
pub fn inner_product(u: &SampledField, v: &SampledField) -> Result<Complex64> {
    same_grid(u, v)?;
    Ok(u.grid.weights.iter().zip(u.values.iter().zip(&v.values)).map(|(w, (a, b))| *w * a.conj() * b).sum())
}

/// `sum_i w_i u_i v_i`, the unconjugated pairing.
pub fn bilinear(u: &SampledField, v: &SampledField) -> Result<Complex64> {
    same_grid(u, v)?;
    Ok(u.grid.weights.iter().zip(u.values.iter().zip(&v.values)).map(|(w, (a, b))| *w * a * b).sum())
}

/// Seeded generator of white noise fields. A point with weight `w_i` gets
/// variance `sigma2 / w_i`, the discrete form of a Dirac delta covariance.
pub struct NoiseSampler {
    grid: Arc<ApertureGrid>,
    std_per_axis: Vec<f64>,
    rng: ChaCha20Rng,
}

impl NoiseSampler {
    pub fn new(grid: Arc<ApertureGrid>, sigma2: f64, seed: u64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return invalid(format!("noise variance must be positive, got {sigma2}"));
        }
        let std_per_axis = grid.weights().iter().map(|w| (0.5 * sigma2 / w).sqrt()).collect();
        Ok(Self { grid, std_per_axis, rng: ChaCha20Rng::seed_from_u64(seed) })
    }

    pub fn draw(&mut self) -> SampledField {
        let values = self
            .std_per_axis
            .iter()
            .map(|s| {
                let re: f64 = StandardNormal.sample(&mut self.rng);
                let im: f64 = StandardNormal.sample(&mut self.rng);
                Complex64::new(s * re, s * im)
            })
            .collect();
        SampledField { grid: Arc::clone(&self.grid), values }
    }
}

pub fn sample_noise_field(grid: Arc<ApertureGrid>, sigma2: f64, seed: u64) -> Result<SampledField> {
    Ok(NoiseSampler::new(grid, sigma2, seed)?.draw())
}
