//! Scene description: wavelength, aperture, users and power budgets.
//!
//! A [`Scene`] is what a config file deserialises into. Angles are stored in
//! degrees and SNRs in dB; everything handed to the numerical modules is
//! converted to radians and linear units here.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::channel::{
    correlation_linear, correlation_planar, correlation_spda, channel_field, dl_snr_scale, gain_linear, gain_planar,
    gain_spda, transmit_snr, ChannelPair,
};
use crate::coupling::{coupled_channel, coupled_pair, coupling_matrix, CouplingModel};
use crate::downlink::DownlinkParams;
use crate::error::{Error, Result};
use crate::geometry::{
    user_position, Aperture, DiscreteAperture, LinearAperture, PlanarAperture, Point3, UserPlacement, Wavelength,
};
use crate::numerics::{chebyshev_nodes, uniform_grid, ApertureGrid, ChebyshevRule};
use crate::uplink::{simulate_table1, Table1Input, Table1Outcome};

/// Users whose receive area exceeds this fraction of the BS aperture are
/// flagged as not sub-wavelength.
pub const RX_AREA_RATIO_WARN: f64 = 0.1;
/// `1 - |rho|^2` below this is flagged.
pub const RHO_BAR_WARN: f64 = 1e-6;
/// Orders below this are flagged as under-resolved.
pub const MIN_QUADRATURE_ORDER: usize = 20;
/// Grid cells wider than `lambda / GRID_CELLS_PER_WAVELENGTH` are flagged.
pub const GRID_CELLS_PER_WAVELENGTH: f64 = 4.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ApertureConfig {
    Planar {
        length_x: f64,
        length_z: f64,
    },
    Linear {
        length_x: f64,
        length_z: f64,
    },
    Spda {
        elements_x: usize,
        elements_z: usize,
        spacing: f64,
        occupation: f64,
    },
}

impl ApertureConfig {
    pub fn build(&self) -> Result<Aperture> {
        Ok(match *self {
            ApertureConfig::Planar { length_x, length_z } => Aperture::Planar(PlanarAperture::new(length_x, length_z)?),
            ApertureConfig::Linear { length_x, length_z } => Aperture::Linear(LinearAperture::new(length_x, length_z)?),
            ApertureConfig::Spda { elements_x, elements_z, spacing, occupation } => {
                Aperture::Spda(DiscreteAperture::with_occupation(elements_x, elements_z, spacing, occupation)?)
            }
        })
    }

    /// Physical footprint `(L_x, L_z)`.
    pub fn extent(&self) -> (f64, f64) {
        match *self {
            ApertureConfig::Planar { length_x, length_z } | ApertureConfig::Linear { length_x, length_z } => {
                (length_x, length_z)
            }
            ApertureConfig::Spda { elements_x, elements_z, spacing, .. } => {
                (elements_x as f64 * spacing, elements_z as f64 * spacing)
            }
        }
    }

    /// Discrete array with `elements_x * elements_z` elements covering the
    /// same footprint.
    pub fn to_spda(&self, elements_x: usize, elements_z: usize, occupation: f64) -> Self {
        let (lx, lz) = self.extent();
        if elements_x > 0 && lx / elements_x as f64 != lz / elements_z.max(1) as f64 {
            log::warn!("footprint is not square; spacing follows the x extent");
        }
        ApertureConfig::Spda { elements_x, elements_z, spacing: lx / elements_x.max(1) as f64, occupation }
    }
}

/// Uplink transmit budget of one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum UplinkBudget {
    /// Transmit SNR in dB.
    SnrDb(f64),
    /// Squared current magnitude `|J|^2`; the SNR follows from the receive
    /// area and noise intensity.
    CurrentPower(f64),
}

/// Downlink budget shared by both users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DownlinkBudget {
    /// Sum of the two users' downlink SNRs at full power, in dB.
    SumSnrDb(f64),
    /// Total source power.
    Power(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct User {
    pub range: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
    /// Receive area in m^2. Defaults to `lambda^2 / (4 pi)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx_area: Option<f64>,
    #[serde(default = "unit")]
    pub noise: f64,
    pub uplink: UplinkBudget,
}

fn unit() -> f64 {
    1.0
}

fn default_order() -> usize {
    20
}

fn default_grid() -> [usize; 2] {
    [200, 200]
}

fn default_downlink() -> DownlinkBudget {
    DownlinkBudget::SumSnrDb(50.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    /// Wavelength in m.
    pub wavelength: f64,
    pub aperture: ApertureConfig,
    pub users: Vec<User>,
    #[serde(default = "default_downlink")]
    pub downlink: DownlinkBudget,
    /// Chebyshev-Gauss order used for correlation factors.
    #[serde(default = "default_order")]
    pub quadrature_order: usize,
    /// Sampling grid `[n_x, n_z]` for field-level simulations.
    #[serde(default = "default_grid")]
    pub grid: [usize; 2],
    /// Mutual coupling between array elements (discrete arrays only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingModel>,
}

/// The reference scene: 0.5 m x 0.5 m planar aperture at 2.4 GHz, users at
/// 10 m and 20 m in the same direction.
pub fn scene_defaults() -> Scene {
    let user = |range, snr| User {
        range,
        theta_deg: 30.0,
        phi_deg: 60.0,
        rx_area: None,
        noise: 1.0,
        uplink: UplinkBudget::SnrDb(snr),
    };
    Scene {
        wavelength: 0.125,
        aperture: ApertureConfig::Planar { length_x: 0.5, length_z: 0.5 },
        users: vec![user(10.0, 30.0), user(20.0, 40.0)],
        downlink: default_downlink(),
        quadrature_order: default_order(),
        grid: default_grid(),
        coupling: None,
    }
}

impl Default for Scene {
    fn default() -> Self {
        scene_defaults()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
}

impl Finding {
    fn error(code: &'static str, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, code, message: message.into() }
    }

    fn warning(code: &'static str, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, code, message: message.into() }
    }
}

pub fn has_errors(findings: &[Finding]) -> bool {
    findings.iter().any(|f| f.severity == Severity::Error)
}

/// Checks a scene without failing. Errors make the scene unusable; warnings
/// flag parameters outside the model's assumptions.
pub fn validate(scene: &Scene) -> Vec<Finding> {
    let mut out = Vec::new();
    let wl = match Wavelength::new(scene.wavelength) {
        Ok(w) => Some(w),
        Err(e) => {
            out.push(Finding::error("wavelength", e.to_string()));
            None
        }
    };
    let aperture = match scene.aperture.build() {
        Ok(a) => Some(a),
        Err(e) => {
            out.push(Finding::error("aperture", e.to_string()));
            None
        }
    };
    if let Some(Aperture::Linear(a)) = aperture {
        if !a.is_thin() {
            out.push(Finding::warning("linear_not_thin", format!("L_x = {} is not small against L_z = {}", a.length_x, a.length_z)));
        }
    }
    if !(1..=2).contains(&scene.users.len()) {
        out.push(Finding::error("user_count", format!("expected 1 or 2 users, found {}", scene.users.len())));
    }
    if scene.quadrature_order == 0 {
        out.push(Finding::error("quadrature_order", "quadrature order must be at least 1"));
    } else if scene.quadrature_order < MIN_QUADRATURE_ORDER {
        out.push(Finding::warning(
            "quadrature_order",
            format!("order {} is below {MIN_QUADRATURE_ORDER}; correlation may be inaccurate", scene.quadrature_order),
        ));
    }
    match scene.downlink {
        DownlinkBudget::SumSnrDb(v) if !v.is_finite() => out.push(Finding::error("downlink", "sum SNR must be finite")),
        DownlinkBudget::Power(p) if !(p.is_finite() && p >= 0.0) => {
            out.push(Finding::error("downlink", "power must be finite and non-negative"))
        }
        _ => {}
    }
    if let Some(m) = scene.coupling {
        if !matches!(scene.aperture, ApertureConfig::Spda { .. }) {
            out.push(Finding::warning("coupling_ignored", "mutual coupling applies to discrete arrays only"));
        }
        if !(m.z_termination.is_finite() && m.z_antenna.is_finite() && m.impedance_scale.is_finite()) {
            out.push(Finding::error("coupling", "impedances must be finite"));
        }
    }

    let mut placements = Vec::new();
    for (i, u) in scene.users.iter().enumerate() {
        let k = i + 1;
        match scene.uplink_snr_of(u, wl.as_ref()) {
            Ok(g) if g.is_finite() && g >= 0.0 => {}
            Ok(_) => out.push(Finding::error("uplink", format!("user {k}: uplink SNR is not finite"))),
            Err(e) => out.push(Finding::error("uplink", format!("user {k}: {e}"))),
        }
        let Some(wl) = wl.as_ref() else { continue };
        match scene.placement_of(u, wl) {
            Ok(p) => {
                if let Some(a) = aperture {
                    if p.rx_area >= RX_AREA_RATIO_WARN * a.area() {
                        out.push(Finding::warning(
                            "rx_area",
                            format!("user {k}: receive area {} is not small against the aperture area {}", p.rx_area, a.area()),
                        ));
                    }
                }
                placements.push(p);
            }
            Err(Error::BehindAperture(psi)) => out.push(Finding::error(
                "behind_aperture",
                format!("user {k}: Psi = {psi:e}; the user must be in front of the aperture"),
            )),
            Err(e) => out.push(Finding::error("user", format!("user {k}: {e}"))),
        }
    }

    if let (Some(Aperture::Planar(a)), Some(wl)) = (aperture, wl.as_ref()) {
        let cell = (a.length_x / scene.grid[0].max(1) as f64).max(a.length_z / scene.grid[1].max(1) as f64);
        if scene.grid.contains(&0) {
            out.push(Finding::error("grid", "grid counts must be positive"));
        } else if cell > wl.lambda() / GRID_CELLS_PER_WAVELENGTH {
            out.push(Finding::warning("grid", format!("grid cell {cell} m is coarse against lambda = {}", wl.lambda())));
        }
    }

    if !has_errors(&out) && placements.len() == 2 {
        match scene.channel_pair() {
            Ok(ch) if ch.rho_bar() < RHO_BAR_WARN => out.push(Finding::warning(
                "rho_bar",
                format!("1 - |rho|^2 = {:e}; the users are nearly inseparable", ch.rho_bar()),
            )),
            Ok(_) => {}
            Err(e) => out.push(Finding::error("channel", e.to_string())),
        }
    }
    out
}

/// Derived quantities echoed by `scene print`.
#[derive(Debug, Clone, Serialize)]
pub struct SceneSummary {
    pub lambda: f64,
    pub k0: f64,
    pub eta: f64,
    pub aperture: Aperture,
    pub aperture_area: f64,
    pub users: Vec<UserSummary>,
    pub downlink_power: f64,
    pub downlink_sum_snr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UserSummary {
    pub placement: UserPlacement,
    pub position: Point3,
    pub uplink_snr: f64,
    pub downlink_scale: f64,
}

impl Scene {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a `.toml` or `.json` file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            Some("toml") => Self::from_toml_str(&text),
            _ => Err(Error::Config(format!("{}: expected a .toml or .json file", path.display()))),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn wavelength(&self) -> Result<Wavelength> {
        Wavelength::new(self.wavelength)
    }

    pub fn aperture(&self) -> Result<Aperture> {
        self.aperture.build()
    }

    pub fn rule(&self) -> Result<ChebyshevRule> {
        chebyshev_nodes(self.quadrature_order)
    }

    fn placement_of(&self, u: &User, wl: &Wavelength) -> Result<UserPlacement> {
        UserPlacement::new(
            u.range,
            u.theta_deg.to_radians(),
            u.phi_deg.to_radians(),
            u.rx_area.unwrap_or_else(|| wl.isotropic_area()),
            u.noise,
        )
    }

    fn uplink_snr_of(&self, u: &User, wl: Option<&Wavelength>) -> Result<f64> {
        match u.uplink {
            UplinkBudget::SnrDb(db) => Ok(db_to_linear(db)),
            UplinkBudget::CurrentPower(j2) => {
                let wl = wl.ok_or_else(|| Error::Invalid("wavelength is invalid".into()))?;
                if !(j2.is_finite() && j2 >= 0.0) {
                    return Err(Error::Invalid(format!("current power must be non-negative, got {j2}")));
                }
                let area = u.rx_area.unwrap_or_else(|| wl.isotropic_area());
                Ok(transmit_snr(area, j2, u.noise, wl))
            }
        }
    }

    pub fn placements(&self) -> Result<Vec<UserPlacement>> {
        let wl = self.wavelength()?;
        self.users.iter().map(|u| self.placement_of(u, &wl)).collect()
    }

    fn two_users(&self) -> Result<(UserPlacement, UserPlacement)> {
        let p = self.placements()?;
        match p.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(Error::UserCount { needed: 2, found: p.len() }),
        }
    }

    /// Linear uplink transmit SNRs, one per user.
    pub fn uplink_snrs(&self) -> Result<Vec<f64>> {
        let wl = self.wavelength()?;
        self.users.iter().map(|u| self.uplink_snr_of(u, Some(&wl))).collect()
    }

    /// Downlink SNR per unit power, one per user.
    pub fn downlink_scales(&self) -> Result<Vec<f64>> {
        let wl = self.wavelength()?;
        Ok(self.placements()?.iter().map(|p| dl_snr_scale(p.rx_area, p.noise, &wl)).collect())
    }

    /// Total downlink power. A sum-SNR budget `S` gives `P = S / mean(scale)`,
    /// which is exact when the users share receive area and noise.
    pub fn downlink_power(&self) -> Result<f64> {
        match self.downlink {
            DownlinkBudget::Power(p) => Ok(p),
            DownlinkBudget::SumSnrDb(db) => {
                let s = self.downlink_scales()?;
                if s.is_empty() {
                    return Err(Error::UserCount { needed: 1, found: 0 });
                }
                let mean = s.iter().sum::<f64>() / s.len() as f64;
                Ok(db_to_linear(db) / mean)
            }
        }
    }

    pub fn downlink_params(&self) -> Result<DownlinkParams> {
        let s = self.downlink_scales()?;
        if s.len() != 2 {
            return Err(Error::UserCount { needed: 2, found: s.len() });
        }
        DownlinkParams::new([s[0], s[1]], self.downlink_power()?)
    }

    /// Gain of every user.
    pub fn gains(&self) -> Result<Vec<f64>> {
        let wl = self.wavelength()?;
        let aperture = self.aperture()?;
        let placements = self.placements()?;
        if let (Aperture::Spda(a), Some(model)) = (aperture, self.coupling) {
            let c = coupling_matrix(&a, &wl, &model)?;
            return placements
                .iter()
                .map(|p| Ok(coupled_channel(&a, &wl, p, &c.matrix)?.iter().map(|h| h.norm_sqr()).sum()))
                .collect();
        }
        Ok(placements
            .iter()
            .map(|p| match aperture {
                Aperture::Planar(a) => gain_planar(&a, p),
                Aperture::Linear(a) => gain_linear(&a, p),
                Aperture::Spda(a) => gain_spda(&a, p),
            })
            .collect())
    }

    /// Gains and correlation of the two users for the configured aperture.
    pub fn channel_pair(&self) -> Result<ChannelPair> {
        let wl = self.wavelength()?;
        let (p1, p2) = self.two_users()?;
        match self.aperture()? {
            Aperture::Planar(a) => {
                let rho = correlation_planar(&wl, &a, &p1, &p2, &self.rule()?)?;
                ChannelPair::new(gain_planar(&a, &p1), gain_planar(&a, &p2), rho)
            }
            Aperture::Linear(a) => {
                let rho = correlation_linear(&wl, &a, &p1, &p2, &self.rule()?)?;
                ChannelPair::new(gain_linear(&a, &p1), gain_linear(&a, &p2), rho)
            }
            Aperture::Spda(a) => match self.coupling {
                Some(model) => coupled_pair(&a, &wl, &p1, &p2, &coupling_matrix(&a, &wl, &model)?.matrix),
                None => ChannelPair::new(gain_spda(&a, &p1), gain_spda(&a, &p2), correlation_spda(&wl, &a, &p1, &p2)?),
            },
        }
    }

    /// Cell-centred sampling grid over a planar aperture.
    pub fn sampling_grid(&self) -> Result<Arc<ApertureGrid>> {
        match self.aperture()? {
            Aperture::Planar(a) => {
                let wl = self.wavelength()?;
                let cell = (a.length_x / self.grid[0].max(1) as f64).max(a.length_z / self.grid[1].max(1) as f64);
                if cell > wl.lambda() / GRID_CELLS_PER_WAVELENGTH {
                    log::warn!("grid cell {cell} m is coarse against lambda = {}", wl.lambda());
                }
                uniform_grid(&a, self.grid[0], self.grid[1])
            }
            other => Err(Error::Invalid(format!("field simulations need a planar aperture, not {}", other.name()))),
        }
    }

    /// Field-level uplink simulation on the sampling grid with unit noise.
    pub fn simulate_table1(&self, seed: u64, draws: usize) -> Result<Table1Outcome> {
        let grid = self.sampling_grid()?;
        let wl = self.wavelength()?;
        let (p1, p2) = self.two_users()?;
        let snr = self.uplink_snrs()?;
        let input = Table1Input::from_snrs(channel_field(&grid, &wl, &p1)?, channel_field(&grid, &wl, &p2)?, snr[0], snr[1], 1.0);
        simulate_table1(&input, seed, draws)
    }

    pub fn summary(&self) -> Result<SceneSummary> {
        let wl = self.wavelength()?;
        let aperture = self.aperture()?;
        let placements = self.placements()?;
        let snrs = self.uplink_snrs()?;
        let scales = self.downlink_scales()?;
        let users = placements
            .iter()
            .zip(snrs.iter().zip(&scales))
            .map(|(p, (&s, &d))| Ok(UserSummary { placement: *p, position: user_position(p)?, uplink_snr: s, downlink_scale: d }))
            .collect::<Result<Vec<_>>>()?;
        let power = self.downlink_power()?;
        Ok(SceneSummary {
            lambda: wl.lambda(),
            k0: wl.k0(),
            eta: wl.eta(),
            aperture,
            aperture_area: aperture.area(),
            users,
            downlink_power: power,
            downlink_sum_snr: scales.iter().sum::<f64>() / scales.len().max(1) as f64 * power,
        })
    }
}
