//! Two-user uplink: MRC, whitening and SIC, the sum-rate capacity, ZF
//! detection and the pentagon capacity region.
//!
//! Rates are in bits/s/Hz. `gamma` arguments are linear transmit SNRs.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::channel::ChannelPair;
use crate::error::{invalid, Error, Result};
use crate::numerics::{inner_product, NoiseSampler, SampledField};
use crate::region::{RatePoint, RegionPolygon};

/// Finite stand-in for an infinite SNR.
pub const SNR_CAP: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SicOrder {
    /// User 2 is decoded first, then user 1 interference-free.
    TwoThenOne,
    /// User 1 is decoded first, then user 2 interference-free.
    OneThenTwo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateScheme {
    TwoThenOne,
    OneThenTwo,
    ZeroForcing,
}

impl From<SicOrder> for RateScheme {
    fn from(o: SicOrder) -> Self {
        match o {
            SicOrder::TwoThenOne => RateScheme::TwoThenOne,
            SicOrder::OneThenTwo => RateScheme::OneThenTwo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UplinkRates {
    pub r1: f64,
    pub r2: f64,
    pub order: RateScheme,
}

impl UplinkRates {
    pub fn sum(&self) -> f64 {
        self.r1 + self.r2
    }
}

pub fn su_capacity_ul(gamma: f64, g: f64) -> f64 {
    (gamma * g).ln_1p() / std::f64::consts::LN_2
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// `h / ||h||`.
pub fn mrc_detector(h: &SampledField) -> Result<SampledField> {
    let n = h.norm_sqr();
    if !(n > 0.0) {
        return Err(Error::ZeroField);
    }
    Ok(h.scaled(Complex64::new(1.0 / n.sqrt(), 0.0)))
}

/// Post-detection SNRs `(gamma_1, gamma_2)` of SIC in the given order.
pub fn sic_snrs(gamma1: f64, gamma2: f64, ch: &ChannelPair, order: SicOrder) -> (f64, f64) {
    let (a, b) = (gamma1 * ch.g1, gamma2 * ch.g2);
    let rb = ch.rho_bar();
    // b (1 - a|rho|^2/(1+a)) written without the cancellation at |rho| ~ 1
    match order {
        SicOrder::TwoThenOne => (a, b * (1.0 + a * rb) / (1.0 + a)),
        SicOrder::OneThenTwo => (a * (1.0 + b * rb) / (1.0 + b), b),
    }
}

pub fn sic_rates(gamma1: f64, gamma2: f64, ch: &ChannelPair, order: SicOrder) -> UplinkRates {
    let (s1, s2) = sic_snrs(gamma1, gamma2, ch, order);
    UplinkRates { r1: log2_1p(s1), r2: log2_1p(s2), order: order.into() }
}

/// Sum-rate capacity, the same for both decoding orders.
pub fn sum_capacity_ul(gamma1: f64, gamma2: f64, ch: &ChannelPair) -> f64 {
    let (a, b) = (gamma1 * ch.g1, gamma2 * ch.g2);
    log2_1p(a * b * ch.rho_bar() + a + b)
}

pub fn zf_rates_ul(gamma1: f64, gamma2: f64, ch: &ChannelPair) -> UplinkRates {
    let rb = ch.rho_bar();
    UplinkRates { r1: log2_1p(gamma1 * ch.g1 * rb), r2: log2_1p(gamma2 * ch.g2 * rb), order: RateScheme::ZeroForcing }
}

pub fn zf_sum_rate_ul(gamma1: f64, gamma2: f64, ch: &ChannelPair) -> f64 {
    zf_rates_ul(gamma1, gamma2, ch).sum()
}

/// Unit-norm projection of `h` onto the orthogonal complement of `other`.
pub fn zf_detector(h: &SampledField, other: &SampledField) -> Result<SampledField> {
    let oo = other.norm_sqr();
    if !(oo > 0.0) {
        return Err(Error::ZeroField);
    }
    let mut v = h.clone();
    // two Gram-Schmidt passes; one is not enough when the channels are nearly parallel
    for _ in 0..2 {
        let c = inner_product(other, &v)? / oo;
        v = SampledField::combine(Complex64::new(1.0, 0.0), &v, -c, other)?;
    }
    mrc_detector(&v)
}

/// Pentagon `(0,0), (C1,0), (C1, Cs-C1), (Cs-C2, C2), (0, C2)` with
/// coincident corners merged.
pub fn region_ul(gamma1: f64, gamma2: f64, ch: &ChannelPair) -> RegionPolygon {
    let c1 = su_capacity_ul(gamma1, ch.g1);
    let c2 = su_capacity_ul(gamma2, ch.g2);
    let cs = sum_capacity_ul(gamma1, gamma2, ch);
    RegionPolygon::from_ordered(&[
        RatePoint::new(0.0, 0.0),
        RatePoint::new(c1, 0.0),
        RatePoint::new(c1, (cs - c1).max(0.0)),
        RatePoint::new((cs - c2).max(0.0), c2),
        RatePoint::new(0.0, c2),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhiteningRoot {
    /// `-1/g + 1/(g sqrt(1 + gamma g))`, which vanishes with the interference.
    Principal,
    /// `-1/g - 1/(g sqrt(1 + gamma g))`.
    Alternate,
}

/// Root `mu` of `2 mu + gamma + 2 mu gamma g + mu^2 g + gamma mu^2 g^2 = 0`.
pub fn whitening_mu(g1: f64, gamma1: f64, root: WhiteningRoot) -> f64 {
    let x = gamma1 * g1;
    let s = (1.0 + x).sqrt();
    match root {
        // 1 - 1/s rewritten as x / (s (1 + s)) to keep precision for small x
        WhiteningRoot::Principal if x.is_finite() => -x / (g1 * s * (1.0 + s)),
        WhiteningRoot::Principal => -1.0 / g1,
        WhiteningRoot::Alternate => -1.0 / g1 - 1.0 / (g1 * s),
    }
}

/// Left-hand side of the whitening quadratic at `mu`.
pub fn whitening_residual(mu: f64, g1: f64, gamma1: f64) -> f64 {
    2.0 * mu + gamma1 + 2.0 * mu * gamma1 * g1 + mu * mu * g1 + gamma1 * mu * mu * g1 * g1
}

/// `W f = f + mu G1 <G1, f>`, which whitens noise plus user-1 interference.
#[derive(Debug, Clone)]
pub struct WhiteningOperator {
    mu: f64,
    g1: f64,
    base: SampledField,
}

impl WhiteningOperator {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `<G1, G1>` on the grid.
    pub fn g1(&self) -> f64 {
        self.g1
    }

    pub fn base(&self) -> &SampledField {
        &self.base
    }

    pub fn apply(&self, f: &SampledField) -> Result<SampledField> {
        let c = inner_product(&self.base, f)? * self.mu;
        SampledField::combine(Complex64::new(1.0, 0.0), f, c, &self.base)
    }

    /// `f - (mu / (1 + mu g1)) G1 <G1, f>`.
    pub fn apply_inverse(&self, f: &SampledField) -> Result<SampledField> {
        let d = 1.0 + self.mu * self.g1;
        if d == 0.0 {
            return invalid("whitening operator is singular (noise-free limit)");
        }
        let c = inner_product(&self.base, f)? * (-self.mu / d);
        SampledField::combine(Complex64::new(1.0, 0.0), f, c, &self.base)
    }
}

pub fn whitening_build(g1_field: &SampledField, gamma1: f64) -> Result<WhiteningOperator> {
    whitening_build_with_root(g1_field, gamma1, WhiteningRoot::Principal)
}

pub fn whitening_build_with_root(g1_field: &SampledField, gamma1: f64, root: WhiteningRoot) -> Result<WhiteningOperator> {
    if !(gamma1 >= 0.0) {
        return invalid(format!("transmit SNR must be non-negative, got {gamma1}"));
    }
    let g1 = g1_field.norm_sqr();
    if !(g1 > 0.0) {
        return Err(Error::ZeroField);
    }
    Ok(WhiteningOperator { mu: whitening_mu(g1, gamma1, root), g1, base: g1_field.clone() })
}

/// Discretised two-user uplink: `Y = a1 G1 x1 + a2 G2 x2 + Z` with
/// `E{Z Z*} = sigma2 delta`.
#[derive(Debug, Clone)]
pub struct Table1Input {
    pub g1: SampledField,
    pub g2: SampledField,
    pub amplitude1: f64,
    pub amplitude2: f64,
    pub sigma2: f64,
}

impl Table1Input {
    /// Amplitudes chosen so that user `k` has transmit SNR `gamma_k`.
    pub fn from_snrs(g1: SampledField, g2: SampledField, gamma1: f64, gamma2: f64, sigma2: f64) -> Self {
        let a = |g: f64| (g * sigma2).sqrt();
        Self { amplitude1: a(gamma1), amplitude2: a(gamma2), g1, g2, sigma2 }
    }

    fn gamma1(&self) -> f64 {
        self.amplitude1 * self.amplitude1 / self.sigma2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloSnr {
    pub draws: usize,
    pub snr1: f64,
    pub snr2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Outcome {
    /// SNR of user 1 after cancelling user 2.
    pub snr1: f64,
    /// SINR of user 2 after whitening and MRC.
    pub snr2: f64,
    pub r1: f64,
    pub r2: f64,
    pub capped: [bool; 2],
    /// `|<G2, residual - a1 G1 x1 - Z>|` after subtracting user 2.
    pub cancellation_residual: f64,
    pub monte_carlo: Option<MonteCarloSnr>,
}

fn cap(snr: f64) -> (f64, bool) {
    if snr.is_finite() && snr <= SNR_CAP {
        (snr, false)
    } else {
        (SNR_CAP, true)
    }
}

fn cn01(rng: &mut ChaCha20Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// SIC pipeline with user 2 decoded first: whiten, MRC on the whitened
/// user-2 channel, subtract user 2, MRC on user 1.
///
/// SNRs come from the operators applied to the sampled fields. With
/// `draws > 0` a seeded Monte-Carlo run estimates them from noisy
/// realisations as well.
pub fn simulate_table1(input: &Table1Input, seed: u64, draws: usize) -> Result<Table1Outcome> {
    simulate_table1_with_root(input, seed, draws, WhiteningRoot::Principal)
}

/// [`simulate_table1`] with a chosen root of the whitening quadratic.
pub fn simulate_table1_with_root(input: &Table1Input, seed: u64, draws: usize, root: WhiteningRoot) -> Result<Table1Outcome> {
    let (a1, a2, s2) = (input.amplitude1, input.amplitude2, input.sigma2);
    if !(s2 >= 0.0 && a1 >= 0.0 && a2 >= 0.0) {
        return invalid("amplitudes and noise variance must be non-negative");
    }
    let gamma1 = if s2 > 0.0 { input.gamma1() } else { f64::INFINITY };
    let w = whitening_build_with_root(&input.g1, gamma1, root)?;

    // step 1-2: whiten and detect user 2
    let wg2 = w.apply(&input.g2)?;
    let wg1 = w.apply(&input.g1)?;
    let v2 = mrc_detector(&wg2)?;
    let wv2 = w.apply(&v2)?;
    let sig2 = a2 * inner_product(&v2, &wg2)?;
    let int2 = a1 * inner_product(&v2, &wg1)?;
    let snr2 = sig2.norm_sqr() / (s2 * wv2.norm_sqr() + int2.norm_sqr());

    // step 3-4: cancel user 2 and detect user 1
    let v1 = mrc_detector(&input.g1)?;
    let sig1 = a1 * inner_product(&v1, &input.g1)?;
    let snr1 = sig1.norm_sqr() / (s2 * v1.norm_sqr());

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let grid = Arc::clone(input.g1.grid());
    let mut noise = if s2 > 0.0 { Some(NoiseSampler::new(Arc::clone(&grid), s2, seed ^ 0x9e37_79b9_7f4a_7c15)?) } else { None };
    let zero = SampledField::zeros(Arc::clone(&grid));
    let mut realisation = |rng: &mut ChaCha20Rng| -> Result<(Complex64, Complex64, SampledField, SampledField)> {
        let (x1, x2) = (cn01(rng), cn01(rng));
        let z = noise.as_mut().map_or_else(|| zero.clone(), NoiseSampler::draw);
        let s = SampledField::combine(Complex64::new(a1, 0.0) * x1, &input.g1, Complex64::new(a2, 0.0) * x2, &input.g2)?;
        let y = SampledField::combine(Complex64::new(1.0, 0.0), &s, Complex64::new(1.0, 0.0), &z)?;
        Ok((x1, x2, z, y))
    };

    let (x1, x2, z, y) = realisation(&mut rng)?;
    let residual = SampledField::combine(Complex64::new(1.0, 0.0), &y, -Complex64::new(a2, 0.0) * x2, &input.g2)?;
    let expected = SampledField::combine(Complex64::new(a1, 0.0) * x1, &input.g1, Complex64::new(1.0, 0.0), &z)?;
    let leftover = SampledField::combine(Complex64::new(1.0, 0.0), &residual, Complex64::new(-1.0, 0.0), &expected)?;
    let cancellation_residual = inner_product(&input.g2, &leftover)?.norm();

    let monte_carlo = if draws > 0 && s2 > 0.0 {
        let (mut e1, mut e2) = (0.0, 0.0);
        for _ in 0..draws {
            let (x1, x2, _, y) = realisation(&mut rng)?;
            let y2 = inner_product(&v2, &w.apply(&y)?)?;
            e2 += (y2 - sig2 * x2).norm_sqr();
            let y1 = inner_product(&v1, &y)? - a2 * x2 * inner_product(&v1, &input.g2)?;
            e1 += (y1 - sig1 * x1).norm_sqr();
        }
        let n = draws as f64;
        Some(MonteCarloSnr { draws, snr1: sig1.norm_sqr() / (e1 / n), snr2: sig2.norm_sqr() / (e2 / n) })
    } else {
        None
    };

    let ((snr1, c1), (snr2, c2)) = (cap(snr1), cap(snr2));
    Ok(Table1Outcome {
        snr1,
        snr2,
        r1: log2_1p(snr1),
        r2: log2_1p(snr2),
        capped: [c1, c2],
        cancellation_residual,
        monte_carlo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PlanarAperture;
    use crate::numerics::uniform_grid;
    use proptest::prelude::*;

    fn pair(g1: f64, g2: f64, rho: f64) -> ChannelPair {
        ChannelPair::new(g1, g2, Complex64::new(rho, 0.0)).unwrap()
    }

    fn random_field(grid: &Arc<crate::numerics::ApertureGrid>, seed: u64) -> SampledField {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let values = (0..grid.len()).map(|_| cn01(&mut rng)).collect();
        SampledField::new(Arc::clone(grid), values).unwrap()
    }

    #[test]
    fn single_user_examples() {
        assert_eq!(su_capacity_ul(0.0, 0.3), 0.0);
        assert!((su_capacity_ul(2.0, 0.5) - 1.0).abs() < 1e-15);
        assert!((su_capacity_ul(1e3, 1.0 / 6.0) - (1.0f64 + 1e3 / 6.0).log2()).abs() < 1e-12);
        assert!((su_capacity_ul(1e3, 1.0 / 6.0) - 7.389).abs() < 1e-3);
    }

    #[test]
    fn mrc_is_unit_norm_and_optimal() {
        let grid = uniform_grid(&PlanarAperture::new(0.5, 0.5).unwrap(), 6, 6).unwrap();
        let h = random_field(&grid, 3);
        let v = mrc_detector(&h).unwrap();
        assert!((v.norm_sqr() - 1.0).abs() < 1e-12);
        let best = inner_product(&v, &h).unwrap().norm_sqr();
        assert!((best - h.norm_sqr()).abs() < 1e-12 * best);
        for s in 0..50 {
            let p = random_field(&grid, 100 + s);
            let t = SampledField::combine(Complex64::new(1.0, 0.0), &v, Complex64::new(0.3, 0.0), &p).unwrap();
            let t = mrc_detector(&t).unwrap();
            assert!(inner_product(&t, &h).unwrap().norm_sqr() <= best * (1.0 + 1e-12));
        }
        let c = SampledField::from_fn(Arc::clone(&grid), |_| Complex64::new(3.0, -4.0));
        let vc = mrc_detector(&c).unwrap();
        let expected = Complex64::new(3.0, -4.0) / (5.0 * 0.5);
        assert!(vc.values().iter().all(|x| (x - expected).norm() < 1e-14));
        assert!(matches!(mrc_detector(&SampledField::zeros(grid)), Err(Error::ZeroField)));
    }

    #[test]
    fn sic_limits() {
        let (s1, s2) = sic_snrs(10.0, 20.0, &pair(0.1, 0.2, 0.0), SicOrder::TwoThenOne);
        assert!((s1 - 1.0).abs() < 1e-15 && (s2 - 4.0).abs() < 1e-15);
        let (_, s2) = sic_snrs(1e12, 20.0, &pair(0.1, 0.2, 1.0), SicOrder::TwoThenOne);
        assert!((s2 - 4.0 / (1.0 + 1e11)).abs() < 1e-20);
    }

    #[test]
    fn sum_capacity_special_cases() {
        let ch = pair(0.1, 0.2, 0.6);
        assert!((sum_capacity_ul(30.0, 0.0, &ch) - su_capacity_ul(30.0, 0.1)).abs() < 1e-15);
        let aligned = pair(0.1, 0.2, 1.0);
        assert!((sum_capacity_ul(30.0, 40.0, &aligned) - (1.0f64 + 3.0 + 8.0).log2()).abs() < 1e-14);
    }

    #[test]
    fn zf_special_cases() {
        let ch = pair(0.1, 0.2, 0.0);
        let sum = su_capacity_ul(30.0, 0.1) + su_capacity_ul(40.0, 0.2);
        assert!((zf_sum_rate_ul(30.0, 40.0, &ch) - sum).abs() < 1e-14);
        assert_eq!(zf_sum_rate_ul(30.0, 40.0, &pair(0.1, 0.2, 1.0)), 0.0);
    }

    #[test]
    fn zf_detector_nulls_the_other_user() {
        let grid = uniform_grid(&PlanarAperture::new(0.5, 0.5).unwrap(), 8, 8).unwrap();
        let (h1, h2) = (random_field(&grid, 1), random_field(&grid, 2));
        let v = zf_detector(&h1, &h2).unwrap();
        assert!(inner_product(&v, &h2).unwrap().norm() < 1e-10);
        let ch = ChannelPair::from_fields(&h1, &h2).unwrap();
        let snr = inner_product(&v, &h1).unwrap().norm_sqr();
        assert!((snr - ch.g1 * ch.rho_bar()).abs() < 1e-10 * snr);
    }

    #[test]
    fn region_shapes() {
        let ch = pair(0.1, 0.2, 0.5);
        let r = region_ul(30.0, 40.0, &ch);
        assert_eq!(r.len(), 5);
        assert!(r.is_convex(1e-12));
        assert!(r.area() > 0.0);
        assert_eq!(region_ul(30.0, 40.0, &pair(0.1, 0.2, 0.0)).len(), 4);
        let seg = region_ul(30.0, 0.0, &ch);
        assert_eq!(seg.vertices, vec![RatePoint::new(0.0, 0.0), RatePoint::new(su_capacity_ul(30.0, 0.1), 0.0)]);

        let a = sic_rates(30.0, 40.0, &ch, SicOrder::TwoThenOne);
        let b = sic_rates(30.0, 40.0, &ch, SicOrder::OneThenTwo);
        assert!((r.vertices[2].r1 - a.r1).abs() < 1e-12 && (r.vertices[2].r2 - a.r2).abs() < 1e-12);
        assert!((r.vertices[3].r1 - b.r1).abs() < 1e-12 && (r.vertices[3].r2 - b.r2).abs() < 1e-12);
    }

    #[test]
    fn whitening_zero_interference_is_identity() {
        let grid = uniform_grid(&PlanarAperture::new(0.5, 0.5).unwrap(), 4, 4).unwrap();
        let w = whitening_build(&random_field(&grid, 9), 0.0).unwrap();
        assert_eq!(w.mu(), 0.0);
        let g = w.g1();
        assert!((whitening_mu(g, 0.0, WhiteningRoot::Alternate) + 2.0 / g).abs() < 1e-12 / g);
    }

    #[test]
    fn whitening_inverse_round_trip() {
        let grid = uniform_grid(&PlanarAperture::new(0.5, 0.5).unwrap(), 5, 5).unwrap();
        let g1 = random_field(&grid, 11);
        for root in [WhiteningRoot::Principal, WhiteningRoot::Alternate] {
            let w = whitening_build_with_root(&g1, 37.0, root).unwrap();
            for s in 0..20 {
                let f = random_field(&grid, 200 + s);
                let back = w.apply_inverse(&w.apply(&f).unwrap()).unwrap();
                assert!(back.max_abs_diff(&f).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn noise_free_pipeline_caps() {
        let a = PlanarAperture::new(0.5, 0.5).unwrap();
        let grid = uniform_grid(&a, 8, 8).unwrap();
        let (g1, g2) = (random_field(&grid, 1), random_field(&grid, 2));
        let input = Table1Input { g1, g2, amplitude1: 1.0, amplitude2: 1.0, sigma2: 0.0 };
        let out = simulate_table1(&input, 0, 0).unwrap();
        assert_eq!(out.capped, [true, true]);
        assert_eq!(out.snr1, SNR_CAP);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn order_invariance(g1 in 0.0f64..1e6, g2 in 0.0f64..1e6, c1 in 1e-6f64..0.5, c2 in 1e-6f64..0.5, rho in 0.0f64..=1.0) {
            let ch = pair(c1, c2, rho);
            let a = sic_rates(g1, g2, &ch, SicOrder::TwoThenOne).sum();
            let b = sic_rates(g1, g2, &ch, SicOrder::OneThenTwo).sum();
            let c = sum_capacity_ul(g1, g2, &ch);
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!((a - c).abs() <= 1e-12);
        }

        #[test]
        fn zf_dominated(g1 in 0.0f64..1e6, g2 in 0.0f64..1e6, c1 in 1e-6f64..0.5, c2 in 1e-6f64..0.5, rho in 0.0f64..=1.0) {
            let ch = pair(c1, c2, rho);
            prop_assert!(zf_sum_rate_ul(g1, g2, &ch) <= sum_capacity_ul(g1, g2, &ch) + 1e-12);
        }

        #[test]
        fn capacity_monotone(g1 in 0.0f64..1e4, g2 in 0.0f64..1e4, c1 in 1e-4f64..0.4, c2 in 1e-4f64..0.4,
                             rho in 0.0f64..0.99, step in 1.0f64..2.0) {
            let base = sum_capacity_ul(g1, g2, &pair(c1, c2, rho));
            prop_assert!(sum_capacity_ul(g1 * step, g2, &pair(c1, c2, rho)) >= base);
            prop_assert!(sum_capacity_ul(g1, g2 * step, &pair(c1, c2, rho)) >= base);
            prop_assert!(sum_capacity_ul(g1, g2, &pair(c1 * step, c2, rho)) >= base);
            prop_assert!(sum_capacity_ul(g1, g2, &pair(c1, c2 * step, rho)) >= base);
            prop_assert!(sum_capacity_ul(g1, g2, &pair(c1, c2, (rho + 0.01).min(1.0))) <= base);
        }

        #[test]
        fn whitening_roots_solve_quadratic(g in 1e-5f64..0.5, gamma in 0.0f64..1e5) {
            for root in [WhiteningRoot::Principal, WhiteningRoot::Alternate] {
                let mu = whitening_mu(g, gamma, root);
                // g times the quadratic is (1 + mu g)^2 (1 + gamma g) - 1, whose terms are O(1 + gamma g)
                let scaled = g * whitening_residual(mu, g, gamma) / (1.0 + gamma * g);
                prop_assert!(scaled.abs() <= 1e-10);
            }
            let (p, a) = (whitening_mu(g, gamma, WhiteningRoot::Principal), whitening_mu(g, gamma, WhiteningRoot::Alternate));
            prop_assert!(((1.0 + p * g).powi(2) - (1.0 + a * g).powi(2)).abs() < 1e-12);
        }

        #[test]
        fn region_is_convex_pentagon(g1 in 0.0f64..1e5, g2 in 0.0f64..1e5, c1 in 1e-5f64..0.5, c2 in 1e-5f64..0.5, rho in 0.0f64..=1.0) {
            let ch = pair(c1, c2, rho);
            let r = region_ul(g1, g2, &ch);
            prop_assert!(r.is_convex(1e-12));
            prop_assert!(r.len() <= 5);
            let (k1, k2, s) = (su_capacity_ul(g1, c1), su_capacity_ul(g2, c2), sum_capacity_ul(g1, g2, &ch));
            for v in &r.vertices {
                prop_assert!(v.r1 <= k1 + 1e-12 && v.r2 <= k2 + 1e-12 && v.sum() <= s + 1e-12);
            }
        }
    }
}
