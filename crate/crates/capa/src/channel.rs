//! Line-of-sight channel kernel and the sufficient statistics `(g1, g2, rho)`.
//!
//! The normalised spatial response of user `k` at aperture point `(x, 0, z)` is
//!
//! ```text
//! Q_k(x, z) = sqrt(r Psi) exp(-j k0 sqrt(D)) / (sqrt(4 pi) D^(3/4))
//! D = x^2 + z^2 - 2 r (Phi x + Theta z) + r^2
//! ```
//!
//! The physical field differs from `Q_k` by the constant `j k0 eta / sqrt(4 pi)`,
//! which every capacity formula folds into the transmit SNR.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{element_centers, DiscreteAperture, LinearAperture, PlanarAperture, UserPlacement, Wavelength};
use crate::numerics::{
    adaptive_integrate_1d, adaptive_integrate_2d, inner_product, ApertureGrid, Bounds2, ChebyshevRule, SampledField,
};

/// Quadrature slack tolerated on `|rho|` before it is treated as an error.
pub const RHO_SLACK: f64 = 1e-6;

/// `Q_k` for one user, with the direction cosines precomputed.
#[derive(Debug, Clone, Copy)]
pub struct ChannelKernel {
    k0: f64,
    r: f64,
    phi: f64,
    theta: f64,
    amplitude: f64,
    power: f64,
}

impl ChannelKernel {
    pub fn new(wavelength: &Wavelength, p: &UserPlacement) -> Result<Self> {
        p.check()?;
        let c = p.cosines();
        let power = p.range * c.psi / (4.0 * PI);
        Ok(Self { k0: wavelength.k0(), r: p.range, phi: c.phi, theta: c.theta, amplitude: power.sqrt(), power })
    }

    fn d(&self, x: f64, z: f64) -> f64 {
        x * x + z * z - 2.0 * self.r * (self.phi * x + self.theta * z) + self.r * self.r
    }

    pub fn q(&self, x: f64, z: f64) -> Result<Complex64> {
        let d = self.d(x, z);
        if d <= 0.0 {
            return Err(Error::CoincidentPoint);
        }
        Ok(self.q_unchecked(x, z))
    }

    /// `|Q|^2`, which does not depend on the wavelength.
    pub fn q_abs2(&self, x: f64, z: f64) -> f64 {
        let d = self.d(x, z);
        self.power / (d * d.sqrt())
    }

    // Users sit in front of the aperture, so D > 0 on the aperture plane.
    fn q_unchecked(&self, x: f64, z: f64) -> Complex64 {
        let d = self.d(x, z);
        let s = d.sqrt();
        Complex64::from_polar(self.amplitude / (s * s.sqrt()), -self.k0 * s)
    }
}

pub fn kernel_q(wavelength: &Wavelength, p: &UserPlacement, x: f64, z: f64) -> Result<Complex64> {
    ChannelKernel::new(wavelength, p)?.q(x, z)
}

/// Closed-form gain of a planar aperture.
pub fn gain_planar(a: &PlanarAperture, p: &UserPlacement) -> f64 {
    let c = p.cosines();
    let (r, psi) = (p.range, c.psi);
    let mut sum = 0.0;
    for x in [a.length_x / (2.0 * r) + c.phi, a.length_x / (2.0 * r) - c.phi] {
        for z in [a.length_z / (2.0 * r) + c.theta, a.length_z / (2.0 * r) - c.theta] {
            sum += (x * z / psi / (psi * psi + x * x + z * z).sqrt()).atan();
        }
    }
    sum / (4.0 * PI)
}

/// Closed-form gain of a thin linear aperture along z.
pub fn gain_linear(a: &LinearAperture, p: &UserPlacement) -> f64 {
    if !a.is_thin() {
        log::warn!("linear aperture is not thin (L_x = {}, L_z = {})", a.length_x, a.length_z);
    }
    let (r, lz) = (p.range, a.length_z);
    let t = p.elevation.cos();
    let varrho = (lz - 2.0 * r * t) / (lz * lz - 4.0 * r * t * lz + 4.0 * r * r).sqrt()
        + (lz + 2.0 * r * t) / (lz * lz + 4.0 * r * t * lz + 4.0 * r * r).sqrt();
    a.length_x * p.azimuth.sin() * varrho / (4.0 * PI * r * p.elevation.sin())
}

/// Exact element sum `A_s sum |Q(m_x d, m_z d)|^2` of a discrete array.
pub fn gain_spda(a: &DiscreteAperture, p: &UserPlacement) -> f64 {
    // |Q| ignores the wavelength; any valid one will do
    let k = ChannelKernel::new(&Wavelength::new(1.0).expect("unit wavelength"), p).expect("valid placement");
    a.element_area * element_centers(a).iter().map(|c| k.q_abs2(c.x, c.z)).sum::<f64>()
}

/// Normalised correlation `<u, v> / sqrt(<u, u> <v, v>)`, clamped when it
/// exceeds one by no more than [`RHO_SLACK`].
fn normalise(cross: Complex64, uu: f64, vv: f64) -> Result<Complex64> {
    if !(uu > 0.0 && vv > 0.0) {
        return Err(Error::ZeroField);
    }
    let rho = cross / (uu * vv).sqrt();
    clamp_rho(rho)
}

pub(crate) fn clamp_rho(rho: Complex64) -> Result<Complex64> {
    let m = rho.norm();
    if m <= 1.0 {
        Ok(rho)
    } else if m <= 1.0 + RHO_SLACK {
        if m > 1.0 + 1e-12 {
            log::warn!("|rho| = {m} exceeds 1 within quadrature slack; clamped");
        }
        Ok(rho / m)
    } else {
        Err(Error::CorrelationOverflow(m))
    }
}

/// Correlation factor of a planar aperture by Chebyshev-Gauss quadrature.
///
/// The cross integral is normalised by the gains evaluated on the same nodes,
/// which keeps `|rho| <= 1` at any order.
pub fn correlation_planar(
    wavelength: &Wavelength,
    a: &PlanarAperture,
    p1: &UserPlacement,
    p2: &UserPlacement,
    rule: &ChebyshevRule,
) -> Result<Complex64> {
    let (k1, k2) = (ChannelKernel::new(wavelength, p1)?, ChannelKernel::new(wavelength, p2)?);
    let (hx, hz) = (0.5 * a.length_x, 0.5 * a.length_z);
    let mut cross = Complex64::new(0.0, 0.0);
    let (mut s1, mut s2) = (0.0, 0.0);
    for (&px, &wx) in rule.nodes().iter().zip(rule.factors()) {
        let x = hx * px;
        for (&pz, &wz) in rule.nodes().iter().zip(rule.factors()) {
            let z = hz * pz;
            let (q1, q2) = (k1.q(x, z)?, k2.q(x, z)?);
            let w = wx * wz;
            cross += w * q1.conj() * q2;
            s1 += w * (q1.conj() * q1).re;
            s2 += w * (q2.conj() * q2).re;
        }
    }
    normalise(cross, s1, s2)
}

/// Correlation factor of a linear aperture: 1-D Chebyshev-Gauss quadrature
/// along the centre line `x = 0`, normalised like [`correlation_planar`].
pub fn correlation_linear(
    wavelength: &Wavelength,
    a: &LinearAperture,
    p1: &UserPlacement,
    p2: &UserPlacement,
    rule: &ChebyshevRule,
) -> Result<Complex64> {
    let (k1, k2) = (ChannelKernel::new(wavelength, p1)?, ChannelKernel::new(wavelength, p2)?);
    let hz = 0.5 * a.length_z;
    let mut cross = Complex64::new(0.0, 0.0);
    let (mut s1, mut s2) = (0.0, 0.0);
    for (&pz, &w) in rule.nodes().iter().zip(rule.factors()) {
        let (q1, q2) = (k1.q(0.0, hz * pz)?, k2.q(0.0, hz * pz)?);
        cross += w * q1.conj() * q2;
        s1 += w * (q1.conj() * q1).re;
        s2 += w * (q2.conj() * q2).re;
    }
    normalise(cross, s1, s2)
}

/// Correlation factor of a discrete array, normalised by the array gains.
pub fn correlation_spda(
    wavelength: &Wavelength,
    a: &DiscreteAperture,
    p1: &UserPlacement,
    p2: &UserPlacement,
) -> Result<Complex64> {
    let (k1, k2) = (ChannelKernel::new(wavelength, p1)?, ChannelKernel::new(wavelength, p2)?);
    let mut cross = Complex64::new(0.0, 0.0);
    let (mut s1, mut s2) = (0.0, 0.0);
    for c in element_centers(a) {
        let (q1, q2) = (k1.q(c.x, c.z)?, k2.q(c.x, c.z)?);
        cross += q1.conj() * q2;
        s1 += (q1.conj() * q1).re;
        s2 += (q2.conj() * q2).re;
    }
    normalise(cross, s1, s2)
}

/// Uplink transmit SNR `A_u^2 |J|^2 k0^2 eta^2 / (4 pi sigma^2)`.
pub fn transmit_snr(rx_area: f64, current_sq: f64, sigma2: f64, wavelength: &Wavelength) -> f64 {
    let k0 = wavelength.k0();
    rx_area * rx_area * current_sq * k0 * k0 * wavelength.eta().powi(2) / (4.0 * PI * sigma2)
}

/// Downlink SNR per unit power, `A_u k0^2 eta^2 / (4 pi sigma^2)`.
pub fn dl_snr_scale(rx_area: f64, sigma2: f64, wavelength: &Wavelength) -> f64 {
    let k0 = wavelength.k0();
    rx_area * k0 * k0 * wavelength.eta().powi(2) / (4.0 * PI * sigma2)
}

/// Downlink SNR at power `x`.
pub fn dl_snr(rx_area: f64, sigma2: f64, wavelength: &Wavelength, x: f64) -> f64 {
    dl_snr_scale(rx_area, sigma2, wavelength) * x
}

/// The two users' gains and their correlation factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelPair {
    pub g1: f64,
    pub g2: f64,
    #[serde(serialize_with = "ser_complex")]
    pub rho: Complex64,
}

fn ser_complex<S: serde::Serializer>(c: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("complex", 2)?;
    st.serialize_field("re", &c.re)?;
    st.serialize_field("im", &c.im)?;
    st.end()
}

impl ChannelPair {
    pub fn new(g1: f64, g2: f64, rho: Complex64) -> Result<Self> {
        for g in [g1, g2] {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::Invalid(format!("channel gain must be non-negative, got {g}")));
            }
        }
        Ok(Self { g1, g2, rho: clamp_rho(rho)? })
    }

    /// Statistics of two sampled fields.
    pub fn from_fields(h1: &SampledField, h2: &SampledField) -> Result<Self> {
        let (g1, g2) = (h1.norm_sqr(), h2.norm_sqr());
        let rho = normalise(inner_product(h1, h2)?, g1, g2)?;
        Self::new(g1, g2, rho)
    }

    /// Statistics of two plain channel vectors (unit weights).
    pub fn from_vectors(h1: &[Complex64], h2: &[Complex64]) -> Result<Self> {
        if h1.len() != h2.len() {
            return Err(Error::Dimension { expected: h1.len(), got: h2.len() });
        }
        let g1: f64 = h1.iter().map(|v| v.norm_sqr()).sum();
        let g2: f64 = h2.iter().map(|v| v.norm_sqr()).sum();
        let cross: Complex64 = h1.iter().zip(h2).map(|(a, b)| a.conj() * b).sum();
        Self::new(g1, g2, normalise(cross, g1, g2)?)
    }

    pub fn rho_abs2(&self) -> f64 {
        self.rho.norm_sqr().min(1.0)
    }

    /// `1 - |rho|^2`.
    pub fn rho_bar(&self) -> f64 {
        1.0 - self.rho_abs2()
    }
}

/// `Q_k` sampled on a grid.
pub fn channel_field(grid: &Arc<ApertureGrid>, wavelength: &Wavelength, p: &UserPlacement) -> Result<SampledField> {
    let k = ChannelKernel::new(wavelength, p)?;
    let values = grid.points().iter().map(|pt| k.q(pt.x, pt.z)).collect::<Result<Vec<_>>>()?;
    SampledField::new(Arc::clone(grid), values)
}

/// Reference gain of a planar aperture by adaptive integration of `|Q|^2`.
pub fn gain_planar_oracle(a: &PlanarAperture, p: &UserPlacement, rel_tol: f64) -> Result<f64> {
    let k = ChannelKernel::new(&Wavelength::new(1.0)?, p)?;
    let b = Bounds2::centered(0.5 * a.length_x, 0.5 * a.length_z);
    Ok(adaptive_integrate_2d(|x, z| Complex64::new(k.q_abs2(x, z), 0.0), b, rel_tol)?.re)
}

/// Reference gain of a linear aperture: `L_x` times the line integral of `|Q(0, z)|^2`.
pub fn gain_linear_oracle(a: &LinearAperture, p: &UserPlacement, rel_tol: f64) -> Result<f64> {
    let k = ChannelKernel::new(&Wavelength::new(1.0)?, p)?;
    let h = 0.5 * a.length_z;
    Ok(a.length_x * adaptive_integrate_1d(|z| Complex64::new(k.q_abs2(0.0, z), 0.0), -h, h, rel_tol)?.re)
}

/// Reference correlation of a planar aperture by adaptive integration,
/// normalised by the closed-form gains.
pub fn correlation_planar_oracle(
    wavelength: &Wavelength,
    a: &PlanarAperture,
    p1: &UserPlacement,
    p2: &UserPlacement,
    rel_tol: f64,
) -> Result<Complex64> {
    let (k1, k2) = (ChannelKernel::new(wavelength, p1)?, ChannelKernel::new(wavelength, p2)?);
    let b = Bounds2::centered(0.5 * a.length_x, 0.5 * a.length_z);
    let cross = adaptive_integrate_2d(|x, z| k1.q_unchecked(x, z).conj() * k2.q_unchecked(x, z), b, rel_tol)?;
    Ok(cross / (gain_planar(a, p1) * gain_planar(a, p2)).sqrt())
}
