//! Mutual coupling between the elements of a discrete array.
//!
//! The coupling matrix is `C = (z_a + z_t) (Z + z_t I)^-1` with mutual
//! impedances `Z_ij = s exp(-j k0 d_ij) / d_ij^2`. The diagonal of `Z` is set
//! to zero: self-impedance is carried by `z_a`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelKernel, ChannelPair};
use crate::error::{invalid, Error, Result};
use crate::geometry::{element_centers, DiscreteAperture, UserPlacement, Wavelength};

/// Condition numbers above this are reported with the result.
pub const CONDITION_WARN: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingModel {
    /// Antenna impedance, ohms.
    pub z_antenna: f64,
    /// Termination impedance, ohms.
    pub z_termination: f64,
    /// Prefactor of the mutual impedance.
    pub impedance_scale: f64,
}

impl Default for CouplingModel {
    fn default() -> Self {
        Self { z_antenna: 50.0, z_termination: 50.0, impedance_scale: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    pub matrix: DMatrix<Complex64>,
    /// 1-norm condition number of `Z + z_t I`.
    pub condition: f64,
}

impl CouplingMatrix {
    pub fn ill_conditioned(&self) -> bool {
        self.condition > CONDITION_WARN
    }
}

/// Mutual impedance matrix `Z` with a zero diagonal.
pub fn mutual_impedance(a: &DiscreteAperture, wavelength: &Wavelength, model: &CouplingModel) -> Result<DMatrix<Complex64>> {
    let centers = element_centers(a);
    let m = centers.len();
    let k0 = wavelength.k0();
    let mut z = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
    for i in 0..m {
        for j in 0..i {
            let d = centers[i].distance(&centers[j]);
            if d == 0.0 {
                return invalid("element centres must be distinct");
            }
            let v = Complex64::from_polar(model.impedance_scale / (d * d), -k0 * d);
            z[(i, j)] = v;
            z[(j, i)] = v;
        }
    }
    Ok(z)
}

fn norm1(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `C = (z_a + z_t)(Z + z_t I)^-1` by LU with partial pivoting.
pub fn coupling_matrix(a: &DiscreteAperture, wavelength: &Wavelength, model: &CouplingModel) -> Result<CouplingMatrix> {
    let z = mutual_impedance(a, wavelength, model)?;
    coupling_from_impedance(z, model)
}

/// Coupling matrix for an explicit impedance matrix `Z`.
pub fn coupling_from_impedance(z: DMatrix<Complex64>, model: &CouplingModel) -> Result<CouplingMatrix> {
    if z.nrows() != z.ncols() {
        return Err(Error::Dimension { expected: z.nrows(), got: z.ncols() });
    }
    let m = z.nrows();
    let a = z + DMatrix::from_diagonal_element(m, m, Complex64::new(model.z_termination, 0.0));
    let na = norm1(&a);
    let inv = a.lu().try_inverse().ok_or(Error::Singular(f64::INFINITY))?;
    let condition = na * norm1(&inv);
    if !condition.is_finite() {
        return Err(Error::Singular(condition));
    }
    if condition > CONDITION_WARN {
        log::warn!("coupling system is ill-conditioned (condition {condition:e})");
    }
    let matrix = inv * Complex64::new(model.z_antenna + model.z_termination, 0.0);
    Ok(CouplingMatrix { matrix, condition })
}

/// Uncoupled channel vector `sqrt(A_s) Q(element centres)`.
pub fn spda_channel(a: &DiscreteAperture, wavelength: &Wavelength, p: &UserPlacement) -> Result<Vec<Complex64>> {
    let k = ChannelKernel::new(wavelength, p)?;
    let s = a.element_area.sqrt();
    element_centers(a).iter().map(|c| Ok(k.q(c.x, c.z)? * s)).collect()
}

/// `C h` where `h` is the uncoupled channel of user `p`.
pub fn coupled_channel(
    a: &DiscreteAperture,
    wavelength: &Wavelength,
    p: &UserPlacement,
    c: &DMatrix<Complex64>,
) -> Result<Vec<Complex64>> {
    if c.nrows() != a.count() || c.ncols() != a.count() {
        return Err(Error::Dimension { expected: a.count(), got: c.ncols() });
    }
    let h = nalgebra::DVector::from_vec(spda_channel(a, wavelength, p)?);
    Ok((c * h).iter().copied().collect())
}

/// Gains and correlation of two users seen through the coupling matrix.
pub fn coupled_pair(
    a: &DiscreteAperture,
    wavelength: &Wavelength,
    p1: &UserPlacement,
    p2: &UserPlacement,
    c: &DMatrix<Complex64>,
) -> Result<ChannelPair> {
    ChannelPair::from_vectors(&coupled_channel(a, wavelength, p1, c)?, &coupled_channel(a, wavelength, p2, c)?)
}
