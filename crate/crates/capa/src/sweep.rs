//! Parameter sweeps over a scene: aperture size, occupation ratio or SNR.

use std::str::FromStr;

use serde::Serialize;

use crate::downlink::{sum_capacity_dl, water_filling, zf_precoding_dl};
use crate::error::{invalid, Error, Result};
use crate::scenario::{ApertureConfig, DownlinkBudget, Scene, UplinkBudget};
use crate::uplink::{sum_capacity_ul, zf_sum_rate_ul};

/// Elements per side used when a continuous aperture is turned into a
/// discrete array for an occupation sweep.
pub const DEFAULT_SPDA_ELEMENTS: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Aperture area in m^2. Planar apertures stay square, linear ones keep
    /// `L_x`, discrete arrays keep their element counts.
    ApertureArea,
    /// Occupation ratio of a discrete array.
    Occupation,
    /// Offset in dB applied to every SNR budget of the scene.
    Snr,
}

impl SweepParam {
    pub fn column(&self) -> &'static str {
        match self {
            SweepParam::ApertureArea => "aperture_area",
            SweepParam::Occupation => "occupation",
            SweepParam::Snr => "snr_offset_db",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aperture_area" | "area" => Ok(SweepParam::ApertureArea),
            "occupation" => Ok(SweepParam::Occupation),
            "snr" => Ok(SweepParam::Snr),
            _ => invalid(format!("unknown sweep parameter {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    /// Geometric instead of arithmetic spacing.
    pub log: bool,
}

impl SweepRange {
    pub fn values(&self) -> Result<Vec<f64>> {
        let SweepRange { start, stop, steps, log } = *self;
        if steps == 0 || !start.is_finite() || !stop.is_finite() {
            return invalid("sweep needs at least one step and finite bounds");
        }
        if steps == 1 {
            return Ok(vec![start]);
        }
        if !(stop > start) {
            return invalid(format!("sweep range must increase, got {start} .. {stop}"));
        }
        if log && !(start > 0.0) {
            return invalid("logarithmic sweeps need a positive start");
        }
        let n = (steps - 1) as f64;
        Ok((0..steps)
            .map(|i| {
                let t = i as f64 / n;
                if i == steps - 1 {
                    stop
                } else if log {
                    start * (stop / start).powf(t)
                } else {
                    start + (stop - start) * t
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub c_ul: f64,
    pub r_ul_zf: f64,
    pub c_dl: f64,
    pub r_dl_zf: f64,
    pub g1: f64,
    pub g2: f64,
    pub rho_abs2: f64,
    /// Sum capacities for an unbounded aperture of the same kind.
    pub asymptote_ul: f64,
    pub asymptote_dl: f64,
}

impl SweepRow {
    pub const HEADER: [&'static str; 9] =
        ["c_ul", "r_ul_zf", "c_dl", "r_dl_zf", "g1", "g2", "rho_abs2", "asymptote_ul", "asymptote_dl"];

    pub fn fields(&self) -> [f64; 10] {
        [
            self.value,
            self.c_ul,
            self.r_ul_zf,
            self.c_dl,
            self.r_dl_zf,
            self.g1,
            self.g2,
            self.rho_abs2,
            self.asymptote_ul,
            self.asymptote_dl,
        ]
    }
}

/// Scene with the swept parameter set to `value`.
pub fn apply(scene: &Scene, param: SweepParam, value: f64) -> Result<Scene> {
    let mut s = scene.clone();
    match param {
        SweepParam::ApertureArea => {
            if !(value > 0.0) {
                return invalid(format!("aperture area must be positive, got {value}"));
            }
            s.aperture = match scene.aperture {
                ApertureConfig::Planar { .. } => {
                    ApertureConfig::Planar { length_x: value.sqrt(), length_z: value.sqrt() }
                }
                ApertureConfig::Linear { length_x, .. } => ApertureConfig::Linear { length_x, length_z: value / length_x },
                ApertureConfig::Spda { elements_x, elements_z, occupation, .. } => ApertureConfig::Spda {
                    elements_x,
                    elements_z,
                    spacing: (value / (elements_x * elements_z) as f64).sqrt(),
                    occupation,
                },
            };
        }
        SweepParam::Occupation => {
            s.aperture = match scene.aperture {
                ApertureConfig::Spda { elements_x, elements_z, spacing, .. } => {
                    ApertureConfig::Spda { elements_x, elements_z, spacing, occupation: value }
                }
                other => other.to_spda(DEFAULT_SPDA_ELEMENTS, DEFAULT_SPDA_ELEMENTS, value),
            };
        }
        SweepParam::Snr => {
            let f = 10f64.powf(value / 10.0);
            for u in &mut s.users {
                u.uplink = match u.uplink {
                    UplinkBudget::SnrDb(db) => UplinkBudget::SnrDb(db + value),
                    UplinkBudget::CurrentPower(p) => UplinkBudget::CurrentPower(p * f),
                };
            }
            s.downlink = match scene.downlink {
                DownlinkBudget::SumSnrDb(db) => DownlinkBudget::SumSnrDb(db + value),
                DownlinkBudget::Power(p) => DownlinkBudget::Power(p * f),
            };
        }
    }
    Ok(s)
}

/// Gains of each user for an unbounded aperture of the scene's kind.
pub fn limit_gains(scene: &Scene) -> Result<Vec<f64>> {
    let placements = scene.placements()?;
    Ok(placements
        .iter()
        .map(|p| match scene.aperture {
            ApertureConfig::Planar { .. } => 0.5,
            ApertureConfig::Linear { length_x, .. } => {
                length_x * p.azimuth.sin() / (2.0 * std::f64::consts::PI * p.range * p.elevation.sin())
            }
            ApertureConfig::Spda { occupation, .. } => 0.5 * occupation,
        })
        .collect())
}

/// Limiting uplink and downlink sum capacities with orthogonal users.
pub fn asymptotes(scene: &Scene) -> Result<(f64, f64)> {
    let g = limit_gains(scene)?;
    let snr = scene.uplink_snrs()?;
    let ul = g.iter().zip(&snr).map(|(g, s)| (1.0 + g * s).log2()).sum();
    let params = scene.downlink_params()?;
    let (c1, c2) = (params.scale[0] * g[0], params.scale[1] * g[1]);
    let (p1, p2) = water_filling(c1, c2, params.power);
    Ok((ul, (1.0 + c1 * p1).log2() + (1.0 + c2 * p2).log2()))
}

pub fn evaluate(scene: &Scene, value: f64) -> Result<SweepRow> {
    let ch = scene.channel_pair()?;
    let snr = scene.uplink_snrs()?;
    let params = scene.downlink_params()?;
    let (asymptote_ul, asymptote_dl) = asymptotes(scene)?;
    Ok(SweepRow {
        value,
        c_ul: sum_capacity_ul(snr[0], snr[1], &ch),
        r_ul_zf: zf_sum_rate_ul(snr[0], snr[1], &ch),
        c_dl: sum_capacity_dl(&params, &ch),
        r_dl_zf: zf_precoding_dl(&params, &ch).sum(),
        g1: ch.g1,
        g2: ch.g2,
        rho_abs2: ch.rho_abs2(),
        asymptote_ul,
        asymptote_dl,
    })
}

/// One row per value, in range order. Steps are spread over the available
/// threads.
pub fn sweep(scene: &Scene, param: SweepParam, range: &SweepRange) -> Result<Vec<SweepRow>> {
    let values = range.values()?;
    let scenes = values.iter().map(|&v| apply(scene, param, v)).collect::<Result<Vec<_>>>()?;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(values.len()).max(1);
    let chunk = values.len().div_ceil(threads);
    let results: Vec<Result<SweepRow>> = std::thread::scope(|s| {
        let handles: Vec<_> = scenes
            .chunks(chunk)
            .zip(values.chunks(chunk))
            .map(|(sc, vs)| s.spawn(move || sc.iter().zip(vs).map(|(sc, &v)| evaluate(sc, v)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    results.into_iter().collect()
}
