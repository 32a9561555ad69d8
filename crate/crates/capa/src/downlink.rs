//! Two-user downlink through uplink-downlink duality: dual power allocation,
//! capacity-achieving source currents and their inverse transform, DPC rates,
//! the sum-rate capacity, ZF precoding and the capacity region.
//!
//! Per-user SNR scales are `scale_k = A_u,k k0^2 eta^2 / (4 pi sigma_k^2)`, so
//! user `k` served with power `x` sees SNR `scale_k x g_k`.

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::ChannelPair;
use crate::error::{invalid, Error, Result};
use crate::numerics::{bilinear, inner_product, SampledField};
use crate::region::{RatePoint, RegionPolygon};
use crate::uplink::{region_ul, su_capacity_ul};

/// Below this `1 - |rho|^2` the split threshold is treated as undefined.
pub const RHO_BAR_FLOOR: f64 = 1e-12;

/// Default number of power splits for the region hull.
pub const DEFAULT_SPLITS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DownlinkParams {
    /// SNR per unit power for each user.
    pub scale: [f64; 2],
    /// Total transmit power.
    pub power: f64,
}

impl DownlinkParams {
    pub fn new(scale: [f64; 2], power: f64) -> Result<Self> {
        if scale.iter().any(|s| !(s.is_finite() && *s >= 0.0)) || !(power.is_finite() && power >= 0.0) {
            return invalid("downlink scales and power must be non-negative");
        }
        Ok(Self { scale, power })
    }

    /// SNR of user `k` (0 or 1) at power `x`.
    pub fn gamma_tilde(&self, k: usize, x: f64) -> f64 {
        self.scale[k] * x
    }

    fn a(&self, ch: &ChannelPair) -> (f64, f64) {
        (self.scale[0] * ch.g1, self.scale[1] * ch.g2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SplitBranch {
    AllToUser1,
    AllToUser2,
    Interior,
    /// Channels are fully aligned; all power to the stronger user.
    Aligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualPowerSplit {
    pub p1: f64,
    pub p2: f64,
    pub budget: f64,
    pub xi: Option<f64>,
    pub branch: SplitBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DlScheme {
    /// User 2 encoded first; user 1 sees no interference.
    Dpc21,
    /// User 1 encoded first; user 2 sees no interference.
    Dpc12,
    ZeroForcing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DownlinkRates {
    pub r1: f64,
    pub r2: f64,
    pub p1: f64,
    pub p2: f64,
    pub scheme: DlScheme,
}

impl DownlinkRates {
    pub fn sum(&self) -> f64 {
        self.r1 + self.r2
    }
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

pub fn su_capacity_dl(gamma: f64, g: f64) -> f64 {
    su_capacity_ul(gamma, g)
}

/// Maximal-ratio current `sqrt(power) conj(h) / ||h||`.
pub fn mrt_current(h: &SampledField, power: f64) -> Result<SampledField> {
    let n = h.norm_sqr();
    if !(n > 0.0) {
        return Err(Error::ZeroField);
    }
    Ok(h.conj().scaled(Complex64::new((power / n).sqrt(), 0.0)))
}

/// Sum rate of the dual uplink when user 1 gets `p1` and user 2 the rest.
pub fn dual_objective(params: &DownlinkParams, ch: &ChannelPair, p1: f64) -> f64 {
    let (a1, a2) = params.a(ch);
    let p2 = params.power - p1;
    log2_1p(a1 * p1 + a2 * p2 + a1 * a2 * ch.rho_bar() * p1 * p2)
}

/// Sum-rate maximising split of the dual uplink.
///
/// The objective is concave in `p1` with stationary point `(P + xi) / 2`,
/// `xi = (a1 - a2) / (a1 a2 (1 - |rho|^2))`, `a_k = scale_k g_k`.
pub fn dual_power_allocation(params: &DownlinkParams, ch: &ChannelPair) -> DualPowerSplit {
    let (a1, a2) = params.a(ch);
    let p = params.power;
    let rb = ch.rho_bar();
    let all = |to_one: bool, xi, branch| DualPowerSplit {
        p1: if to_one { p } else { 0.0 },
        p2: if to_one { 0.0 } else { p },
        budget: p,
        xi,
        branch,
    };
    if rb < RHO_BAR_FLOOR {
        return all(a1 >= a2, None, SplitBranch::Aligned);
    }
    if a2 == 0.0 {
        return all(true, None, SplitBranch::AllToUser1);
    }
    if a1 == 0.0 {
        return all(false, None, SplitBranch::AllToUser2);
    }
    let xi = (a1 - a2) / (a1 * a2 * rb);
    if xi >= p {
        all(true, Some(xi), SplitBranch::AllToUser1)
    } else if xi <= -p {
        all(false, Some(xi), SplitBranch::AllToUser2)
    } else {
        DualPowerSplit { p1: 0.5 * (p + xi), p2: 0.5 * (p - xi), budget: p, xi: Some(xi), branch: SplitBranch::Interior }
    }
}

/// Downlink sum-rate capacity.
pub fn sum_capacity_dl(params: &DownlinkParams, ch: &ChannelPair) -> f64 {
    let s = dual_power_allocation(params, ch);
    let (a1, a2) = params.a(ch);
    match s.branch {
        SplitBranch::AllToUser1 => su_capacity_dl(params.gamma_tilde(0, params.power), ch.g1),
        SplitBranch::AllToUser2 => su_capacity_dl(params.gamma_tilde(1, params.power), ch.g2),
        SplitBranch::Aligned => log2_1p(a1.max(a2) * params.power),
        SplitBranch::Interior => {
            let (e1, e2) = (a1 * s.p1, a2 * s.p2);
            log2_1p(e1 + e2 + e1 * e2 * ch.rho_bar())
        }
    }
}

/// Closed-form DPC rates for dual powers `(p1, p2)`.
pub fn dpc_rates(p1: f64, p2: f64, ch: &ChannelPair, params: &DownlinkParams, scheme: DlScheme) -> Result<DownlinkRates> {
    let (a1, a2) = params.a(ch);
    let (e1, e2) = (a1 * p1, a2 * p2);
    let rb = ch.rho_bar();
    let (r1, r2) = match scheme {
        DlScheme::Dpc21 => (log2_1p(e1 * (1.0 + e2 * rb) / (1.0 + e2)), log2_1p(e2)),
        DlScheme::Dpc12 => (log2_1p(e1), log2_1p(e2 * (1.0 + e1 * rb) / (1.0 + e1))),
        DlScheme::ZeroForcing => return invalid("dpc_rates takes a DPC encoding order"),
    };
    Ok(DownlinkRates { r1, r2, p1, p2, scheme })
}

/// Sampled source currents of the two users.
#[derive(Debug, Clone)]
pub struct SourceCurrents {
    pub j1: SampledField,
    pub j2: SampledField,
    pub p1: f64,
    pub p2: f64,
    pub scheme: DlScheme,
}

impl SourceCurrents {
    pub fn total_power(&self) -> f64 {
        self.j1.norm_sqr() + self.j2.norm_sqr()
    }
}

/// Normalised channel `sqrt(scale) G` used by the duality transforms.
pub fn normalized_channel(g: &SampledField, scale: f64) -> SampledField {
    g.scaled(Complex64::new(scale.sqrt(), 0.0))
}

// Currents for "first" encoded after "second": the first user sees no
// interference, the second sees the first as noise.
fn currents_ordered(pf: f64, ps: f64, hf: &SampledField, hs: &SampledField) -> Result<(SampledField, SampledField)> {
    let a = hf.norm_sqr();
    let b = hs.norm_sqr();
    if !(a > 0.0) || (ps > 0.0 && !(b > 0.0)) {
        return Err(Error::ZeroField);
    }
    let c = inner_product(hf, hs)?;
    let beta = ps * c / (1.0 + ps * b);
    let d = a - ps * c.norm_sqr() / (1.0 + ps * b);
    if !(d > 0.0) {
        return Err(Error::ZeroField);
    }
    let f = SampledField::combine(Complex64::new(1.0, 0.0), &hf.conj(), -beta, &hs.conj())?;
    let jf = f.scaled(Complex64::new((pf / d).sqrt(), 0.0));
    let js = if ps > 0.0 {
        let x = bilinear(hs, &jf)?.norm_sqr();
        hs.conj().scaled(Complex64::new((ps * (1.0 + x) / b).sqrt(), 0.0))
    } else {
        SampledField::zeros(std::sync::Arc::clone(hf.grid()))
    };
    Ok((jf, js))
}

/// Capacity-achieving currents for dual powers `(p1, p2)`.
///
/// `h1`, `h2` are the normalised channels from [`normalized_channel`].
pub fn currents_from_dual(p1: f64, p2: f64, h1: &SampledField, h2: &SampledField, scheme: DlScheme) -> Result<SourceCurrents> {
    if !(p1 >= 0.0 && p2 >= 0.0) {
        return invalid("dual powers must be non-negative");
    }
    let (j1, j2) = match scheme {
        DlScheme::Dpc21 => currents_ordered(p1, p2, h1, h2)?,
        DlScheme::Dpc12 => {
            let (j2, j1) = currents_ordered(p2, p1, h2, h1)?;
            (j1, j2)
        }
        DlScheme::ZeroForcing => return invalid("currents_from_dual takes a DPC encoding order"),
    };
    Ok(SourceCurrents { j1, j2, p1, p2, scheme })
}

/// Rates delivered by arbitrary currents under DPC.
pub fn rates_from_currents(
    j1: &SampledField,
    j2: &SampledField,
    h1: &SampledField,
    h2: &SampledField,
    scheme: DlScheme,
) -> Result<DownlinkRates> {
    let (p1, p2) = (j1.norm_sqr(), j2.norm_sqr());
    let (r1, r2) = match scheme {
        DlScheme::Dpc21 => {
            let x = bilinear(h2, j1)?.norm_sqr();
            (log2_1p(bilinear(h1, j1)?.norm_sqr()), log2_1p(bilinear(h2, j2)?.norm_sqr() / (1.0 + x)))
        }
        DlScheme::Dpc12 => {
            let x = bilinear(h1, j2)?.norm_sqr();
            (log2_1p(bilinear(h1, j1)?.norm_sqr() / (1.0 + x)), log2_1p(bilinear(h2, j2)?.norm_sqr()))
        }
        DlScheme::ZeroForcing => return invalid("rates_from_currents takes a DPC encoding order"),
    };
    Ok(DownlinkRates { r1, r2, p1, p2, scheme })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualPowers {
    pub p1: f64,
    pub p2: f64,
}

fn dual_ordered(jf: &SampledField, js: &SampledField, hf: &SampledField, hs: &SampledField) -> Result<(f64, f64)> {
    let a = hf.norm_sqr();
    let b = hs.norm_sqr();
    if !(b > 0.0) {
        return Err(Error::ZeroField);
    }
    let x = bilinear(hs, jf)?.norm_sqr();
    let ps = bilinear(hs, js)?.norm_sqr() / (b * (1.0 + x));
    let c2 = inner_product(hf, hs)?.norm_sqr();
    let d = a - ps * c2 / (1.0 + ps * b);
    let pf = if d > 0.0 { bilinear(hf, jf)?.norm_sqr() / d } else { 0.0 };
    Ok((pf, ps))
}

/// Dual-uplink powers achieving the same rates as the given currents.
pub fn dual_from_currents(
    j1: &SampledField,
    j2: &SampledField,
    h1: &SampledField,
    h2: &SampledField,
    scheme: DlScheme,
) -> Result<DualPowers> {
    let (p1, p2) = match scheme {
        DlScheme::Dpc21 => dual_ordered(j1, j2, h1, h2)?,
        DlScheme::Dpc12 => {
            let (p2, p1) = dual_ordered(j2, j1, h2, h1)?;
            (p1, p2)
        }
        DlScheme::ZeroForcing => return invalid("dual_from_currents takes a DPC encoding order"),
    };
    Ok(DualPowers { p1, p2 })
}

/// Two-channel water-filling: maximises `sum log2(1 + c_k p_k)` subject to
/// `p1 + p2 = power`.
pub fn water_filling(c1: f64, c2: f64, power: f64) -> (f64, f64) {
    match (c1 > 0.0, c2 > 0.0) {
        (false, false) => (0.5 * power, 0.5 * power),
        (true, false) => (power, 0.0),
        (false, true) => (0.0, power),
        (true, true) => {
            let level = 0.5 * (power + 1.0 / c1 + 1.0 / c2);
            let (p1, p2) = (level - 1.0 / c1, level - 1.0 / c2);
            if p1 <= 0.0 {
                (0.0, power)
            } else if p2 <= 0.0 {
                (power, 0.0)
            } else {
                (p1, p2)
            }
        }
    }
}

/// ZF precoding with water-filled powers.
pub fn zf_precoding_dl(params: &DownlinkParams, ch: &ChannelPair) -> DownlinkRates {
    let rb = ch.rho_bar();
    let (c1, c2) = (params.scale[0] * ch.g1 * rb, params.scale[1] * ch.g2 * rb);
    let (p1, p2) = water_filling(c1, c2, params.power);
    DownlinkRates { r1: log2_1p(c1 * p1), r2: log2_1p(c2 * p2), p1, p2, scheme: DlScheme::ZeroForcing }
}

/// Convex hull of the dual-uplink pentagons over `n_splits` evenly spaced
/// power splits.
pub fn region_dl(params: &DownlinkParams, ch: &ChannelPair, n_splits: usize) -> Result<RegionPolygon> {
    if n_splits < 2 {
        return invalid("region_dl needs at least two power splits");
    }
    let p = params.power;
    let mut corners: Vec<RatePoint> = Vec::with_capacity(5 * n_splits);
    for i in 0..n_splits {
        let p1 = p * i as f64 / (n_splits - 1) as f64;
        let p2 = p - p1;
        let pent = region_ul(params.gamma_tilde(0, p1), params.gamma_tilde(1, p2), ch);
        corners.extend(pent.vertices);
    }
    Ok(RegionPolygon::convex_hull(&corners))
}
