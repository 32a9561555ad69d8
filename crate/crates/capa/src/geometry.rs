//! Base-station apertures and user placement.
//!
//! The aperture always sits in the x-z plane, centred on the origin, with
//! normal `e = (0, 1, 0)`. Users are placed in spherical coordinates and every
//! channel formula works with their direction cosines `(Phi, Psi, Theta)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Free-space impedance in ohms.
pub const ETA: f64 = 120.0 * PI;

/// Aperture normal.
/// Smallest admissible `psi`; anything below is treated as in-plane.
pub const GRAZING_PSI: f64 = 1e-12;

pub const NORMAL: Point3 = Point3 { x: 0.0, y: 1.0, z: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Wavelength {
    lambda: f64,
}

impl Wavelength {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return invalid(format!("wavelength must be positive, got {lambda}"));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Wavenumber `2 pi / lambda`.
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.lambda
    }

    pub fn eta(&self) -> f64 {
        ETA
    }

    /// Effective area of an isotropic antenna, `lambda^2 / 4 pi`.
    pub fn isotropic_area(&self) -> f64 {
        self.lambda * self.lambda / (4.0 * PI)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        invalid(format!("{name} must be positive, got {v}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanarAperture {
    pub length_x: f64,
    pub length_z: f64,
}

impl PlanarAperture {
    pub fn new(length_x: f64, length_z: f64) -> Result<Self> {
        positive("length_x", length_x)?;
        positive("length_z", length_z)?;
        Ok(Self { length_x, length_z })
    }

    /// Square aperture of the given area.
    pub fn square(area: f64) -> Result<Self> {
        positive("area", area)?;
        Self::new(area.sqrt(), area.sqrt())
    }

    pub fn area(&self) -> f64 {
        self.length_x * self.length_z
    }
}

/// Thin strip along z. Formulas treat the x extent as negligible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearAperture {
    pub length_x: f64,
    pub length_z: f64,
}

impl LinearAperture {
    pub fn new(length_x: f64, length_z: f64) -> Result<Self> {
        positive("length_x", length_x)?;
        positive("length_z", length_z)?;
        Ok(Self { length_x, length_z })
    }

    pub fn area(&self) -> f64 {
        self.length_x * self.length_z
    }

    /// `L_x <= L_z / 10`, the regime the linear model is meant for.
    pub fn is_thin(&self) -> bool {
        self.length_x <= self.length_z / 10.0
    }
}

/// Planar array of `elements_x * elements_z` discrete elements with
/// centre spacing `spacing` and per-element area `element_area`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscreteAperture {
    pub elements_x: usize,
    pub elements_z: usize,
    pub spacing: f64,
    pub element_area: f64,
}

impl DiscreteAperture {
    pub fn new(elements_x: usize, elements_z: usize, spacing: f64, element_area: f64) -> Result<Self> {
        for (name, m) in [("elements_x", elements_x), ("elements_z", elements_z)] {
            if m == 0 || m % 2 == 0 {
                return invalid(format!("{name} must be odd and positive, got {m}"));
            }
        }
        positive("spacing", spacing)?;
        positive("element_area", element_area)?;
        // a relative slack of a few ulps lets occupation 1 round-trip through d^2
        if element_area.sqrt() > spacing * (1.0 + 1e-12) {
            return invalid(format!(
                "elements overlap: sqrt(element_area) = {} > spacing = {spacing}",
                element_area.sqrt()
            ));
        }
        Ok(Self { elements_x, elements_z, spacing, element_area })
    }

    /// Element area set from the occupation ratio `A_s / d^2`.
    pub fn with_occupation(elements_x: usize, elements_z: usize, spacing: f64, occupation: f64) -> Result<Self> {
        if !(occupation > 0.0 && occupation <= 1.0) {
            return invalid(format!("occupation ratio must lie in (0, 1], got {occupation}"));
        }
        let area = if occupation == 1.0 { spacing * spacing } else { occupation * spacing * spacing };
        Self::new(elements_x, elements_z, spacing, area)
    }

    pub fn occupation(&self) -> f64 {
        self.element_area / (self.spacing * self.spacing)
    }

    pub fn count(&self) -> usize {
        self.elements_x * self.elements_z
    }

    /// Physical extent `(M_x d, M_z d)`.
    pub fn extent(&self) -> (f64, f64) {
        (self.elements_x as f64 * self.spacing, self.elements_z as f64 * self.spacing)
    }

    /// Element indices `m` in `-M~..=M~` along each axis.
    pub fn indices_x(&self) -> std::ops::RangeInclusive<i64> {
        let h = (self.elements_x / 2) as i64;
        -h..=h
    }

    pub fn indices_z(&self) -> std::ops::RangeInclusive<i64> {
        let h = (self.elements_z / 2) as i64;
        -h..=h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Aperture {
    Planar(PlanarAperture),
    Linear(LinearAperture),
    Spda(DiscreteAperture),
}

impl Aperture {
    /// Physical area spanned by the aperture. For a discrete array this is
    /// the footprint `M d^2`, not the radiating area.
    pub fn area(&self) -> f64 {
        match self {
            Aperture::Planar(a) => a.area(),
            Aperture::Linear(a) => a.area(),
            Aperture::Spda(a) => a.count() as f64 * a.spacing * a.spacing,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Aperture::Planar(_) => "planar",
            Aperture::Linear(_) => "linear",
            Aperture::Spda(_) => "spda",
        }
    }
}

/// Direction cosines of a user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionCosines {
    pub phi: f64,
    pub psi: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UserPlacement {
    /// Distance to the aperture centre, m.
    pub range: f64,
    /// Elevation, radians.
    pub elevation: f64,
    /// Azimuth, radians.
    pub azimuth: f64,
    /// Receive aperture area, m^2.
    pub rx_area: f64,
    /// Noise intensity at the user.
    pub noise: f64,
}

impl UserPlacement {
    pub fn new(range: f64, elevation: f64, azimuth: f64, rx_area: f64, noise: f64) -> Result<Self> {
        let p = Self { range, elevation, azimuth, rx_area, noise };
        p.check()?;
        Ok(p)
    }

    /// Placement with an isotropic receive area and unit noise.
    pub fn isotropic(range: f64, elevation: f64, azimuth: f64, wavelength: &Wavelength) -> Result<Self> {
        Self::new(range, elevation, azimuth, wavelength.isotropic_area(), 1.0)
    }

    pub fn check(&self) -> Result<()> {
        positive("range", self.range)?;
        positive("rx_area", self.rx_area)?;
        positive("noise", self.noise)?;
        if !self.elevation.is_finite() || !self.azimuth.is_finite() {
            return invalid("angles must be finite");
        }
        let psi = self.cosines().psi;
        // grazing or rear users have no projected aperture
        if psi <= GRAZING_PSI {
            return Err(Error::BehindAperture(psi));
        }
        Ok(())
    }

    pub fn cosines(&self) -> DirectionCosines {
        let (st, ct) = self.elevation.sin_cos();
        let (sp, cp) = self.azimuth.sin_cos();
        DirectionCosines { phi: cp * st, psi: sp * st, theta: ct }
    }
}

/// Cartesian position `r (Phi, Psi, Theta)`.
pub fn user_position(p: &UserPlacement) -> Result<Point3> {
    p.check()?;
    let c = p.cosines();
    Ok(Point3::new(p.range * c.phi, p.range * c.psi, p.range * c.theta))
}

/// Element centres `(m_x d, 0, m_z d)`, ordered by `m_z` then `m_x`.
pub fn element_centers(a: &DiscreteAperture) -> Vec<Point3> {
    let mut out = Vec::with_capacity(a.count());
    for mz in a.indices_z() {
        for mx in a.indices_x() {
            out.push(Point3::new(mx as f64 * a.spacing, 0.0, mz as f64 * a.spacing));
        }
    }
    out
}
