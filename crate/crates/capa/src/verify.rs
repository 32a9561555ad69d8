//! Self-checks of a scene: field-level whitening pipeline, duality round
//! trips and closed forms against the integration oracle.

use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{
    channel_field, correlation_planar, correlation_planar_oracle, gain_linear, gain_linear_oracle, gain_planar,
    gain_planar_oracle, gain_spda, ChannelPair,
};
use crate::downlink::{
    currents_from_dual, dpc_rates, dual_from_currents, dual_power_allocation, normalized_channel, rates_from_currents,
    sum_capacity_dl, DlScheme,
};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Aperture, PlanarAperture};
use crate::numerics::{inner_product, uniform_grid, NoiseSampler, ORACLE_REL_TOL};
use crate::scenario::Scene;
use crate::uplink::{
    mrc_detector, sic_snrs, simulate_table1_with_root, whitening_build_with_root, whitening_mu, whitening_residual,
    SicOrder, Table1Input, WhiteningRoot,
};

/// Closed form against oracle, relative.
pub const ORACLE_GAP_TOL: f64 = 1e-6;
/// `|rho|^2` by quadrature against the oracle, absolute.
pub const CORRELATION_GAP_TOL: f64 = 1e-3;
/// Field-level SIC SINR against the closed form, relative.
pub const PIPELINE_TOL: f64 = 1e-3;
/// Agreement of the two whitening roots, relative.
pub const ROOT_TOL: f64 = 1e-10;
/// Duality round trips, relative.
pub const DUALITY_TOL: f64 = 1e-6;
/// Monte-Carlo estimates must lie within this many standard errors.
pub const MC_SIGMAS: f64 = 5.0;
/// Grid side used for the noise-statistics Monte Carlo.
pub const NOISE_GRID: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Whitening,
    Duality,
    Oracle,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Suite::All),
            "whitening" => Ok(Suite::Whitening),
            "duality" => Ok(Suite::Duality),
            "oracle" => Ok(Suite::Oracle),
            _ => invalid(format!("unknown suite {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, suite: &'static str, name: impl Into<String>, measured: f64, tolerance: f64) {
        // NaN never passes
        let passed = measured <= tolerance;
        self.checks.push(Check { suite, name: name.into(), measured, tolerance, passed });
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn planar(scene: &Scene) -> Result<PlanarAperture> {
    match scene.aperture()? {
        Aperture::Planar(a) => Ok(a),
        other => invalid(format!("this suite needs a planar aperture, not {}", other.name())),
    }
}

pub fn run(scene: &Scene, suite: Suite, seed: u64) -> Result<Report> {
    let mut report = Report::default();
    if matches!(suite, Suite::All | Suite::Oracle) {
        oracle(scene, &mut report)?;
    }
    if matches!(suite, Suite::All | Suite::Whitening) {
        whitening(scene, seed, &mut report)?;
    }
    if matches!(suite, Suite::All | Suite::Duality) {
        duality(scene, &mut report)?;
    }
    Ok(report)
}

/// Closed-form gains against adaptive integration, and the quadrature
/// correlation against its oracle.
pub fn oracle(scene: &Scene, report: &mut Report) -> Result<()> {
    let wl = scene.wavelength()?;
    let placements = scene.placements()?;
    match scene.aperture()? {
        Aperture::Planar(a) => {
            for (k, p) in placements.iter().enumerate() {
                let o = gain_planar_oracle(&a, p, ORACLE_REL_TOL)?;
                report.push("oracle", format!("gain_planar_user{}", k + 1), rel(gain_planar(&a, p), o), ORACLE_GAP_TOL);
            }
            if let [p1, p2] = placements.as_slice() {
                let cg = correlation_planar(&wl, &a, p1, p2, &scene.rule()?)?.norm_sqr();
                let o = correlation_planar_oracle(&wl, &a, p1, p2, ORACLE_REL_TOL)?.norm_sqr();
                report.push("oracle", "rho_abs2_planar", (cg - o).abs(), CORRELATION_GAP_TOL);
            }
        }
        Aperture::Linear(a) => {
            for (k, p) in placements.iter().enumerate() {
                let o = gain_linear_oracle(&a, p, ORACLE_REL_TOL)?;
                report.push("oracle", format!("gain_linear_user{}", k + 1), rel(gain_linear(&a, p), o), ORACLE_GAP_TOL);
            }
        }
        Aperture::Spda(a) => {
            // element sum against the occupation-scaled continuous gain
            let (lx, lz) = a.extent();
            let footprint = PlanarAperture::new(lx, lz)?;
            for (k, p) in placements.iter().enumerate() {
                let cont = a.occupation() * gain_planar(&footprint, p);
                report.push("oracle", format!("gain_spda_user{}", k + 1), rel(gain_spda(&a, p), cont), 0.02);
            }
        }
    }
    Ok(())
}

/// Field-level SIC with whitening against the closed-form SINR, both
/// whitening roots, and the statistics of projected noise.
pub fn whitening(scene: &Scene, seed: u64, report: &mut Report) -> Result<()> {
    let a = planar(scene)?;
    let grid = scene.sampling_grid()?;
    let wl = scene.wavelength()?;
    let p = scene.placements()?;
    let (p1, p2) = match p.as_slice() {
        [p1, p2] => (*p1, *p2),
        _ => return Err(Error::UserCount { needed: 2, found: p.len() }),
    };
    let snr = scene.uplink_snrs()?;
    let (f1, f2) = (channel_field(&grid, &wl, &p1)?, channel_field(&grid, &wl, &p2)?);
    let input = Table1Input::from_snrs(f1.clone(), f2, snr[0], snr[1], 1.0);

    let principal = simulate_table1_with_root(&input, seed, 0, WhiteningRoot::Principal)?;
    let alternate = simulate_table1_with_root(&input, seed, 0, WhiteningRoot::Alternate)?;
    let ch = scene.channel_pair()?;
    let (_, theory) = sic_snrs(snr[0], snr[1], &ch, SicOrder::TwoThenOne);
    report.push("whitening", "sinr2_vs_closed_form", rel(principal.snr2, theory), PIPELINE_TOL);
    report.push("whitening", "sinr2_root_agreement", rel(principal.snr2, alternate.snr2), ROOT_TOL);
    report.push("whitening", "cancellation_residual", principal.cancellation_residual, 1e-9 * (snr[1] * ch.g2).sqrt());

    let g = f1.norm_sqr();
    let scale = 1.0 + snr[0] * g;
    for (name, root) in [("principal", WhiteningRoot::Principal), ("alternate", WhiteningRoot::Alternate)] {
        let mu = whitening_mu(g, snr[0], root);
        report.push("whitening", format!("quadratic_residual_{name}"), (g * whitening_residual(mu, g, snr[0]) / scale).abs(), 1e-10);
        let w = whitening_build_with_root(&f1, snr[0], root)?;
        let back = w.apply_inverse(&w.apply(&input.g2)?)?;
        let err = back.max_abs_diff(&input.g2)? / input.g2.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        report.push("whitening", format!("inverse_round_trip_{name}"), err, 1e-9);
    }

    // projected noise on a unit-norm detector has variance sigma^2
    let coarse = uniform_grid(&a, NOISE_GRID, NOISE_GRID)?;
    let v = mrc_detector(&channel_field(&coarse, &wl, &p1)?)?;
    let draws = 20_000;
    let mut sampler = NoiseSampler::new(Arc::clone(&coarse), 1.0, seed)?;
    let mut acc = 0.0;
    let mut mean = Complex64::new(0.0, 0.0);
    for _ in 0..draws {
        let y = inner_product(&v, &sampler.draw())?;
        acc += y.norm_sqr();
        mean += y;
    }
    let n = draws as f64;
    // |y|^2 is exponential with mean sigma^2, so its standard error is sigma^2/sqrt(n)
    report.push("whitening", "projected_noise_variance_se", (acc / n - 1.0).abs() * n.sqrt(), MC_SIGMAS);
    report.push("whitening", "projected_noise_mean_se", (mean / n).norm() * (2.0 * n).sqrt(), MC_SIGMAS);
    Ok(())
}

/// Currents from dual powers and back, power conservation, and rates.
pub fn duality(scene: &Scene, report: &mut Report) -> Result<()> {
    let grid = scene.sampling_grid()?;
    let wl = scene.wavelength()?;
    let params = scene.downlink_params()?;
    let p = scene.placements()?;
    let (f1, f2) = (channel_field(&grid, &wl, &p[0])?, channel_field(&grid, &wl, &p[1])?);
    let ch = ChannelPair::from_fields(&f1, &f2)?;
    let (h1, h2) = (normalized_channel(&f1, params.scale[0]), normalized_channel(&f2, params.scale[1]));

    let split = dual_power_allocation(&params, &ch);
    let total = params.power;
    let splits = [(split.p1, split.p2), (total / 3.0, 2.0 * total / 3.0), (0.9 * total, 0.1 * total)];
    let (mut round, mut power, mut rates) = (0.0f64, 0.0f64, 0.0f64);
    for &(q1, q2) in &splits {
        for scheme in [DlScheme::Dpc21, DlScheme::Dpc12] {
            let j = currents_from_dual(q1, q2, &h1, &h2, scheme)?;
            let back = dual_from_currents(&j.j1, &j.j2, &h1, &h2, scheme)?;
            round = round.max(rel(back.p1, q1)).max(rel(back.p2, q2));
            power = power.max(rel(j.total_power(), q1 + q2));
            let got = rates_from_currents(&j.j1, &j.j2, &h1, &h2, scheme)?;
            let want = dpc_rates(q1, q2, &ch, &params, scheme)?;
            rates = rates.max((got.r1 - want.r1).abs().max((got.r2 - want.r2).abs()) / want.sum().max(1.0));
        }
    }
    report.push("duality", "dual_power_round_trip", round, DUALITY_TOL);
    report.push("duality", "power_conservation", power, DUALITY_TOL);
    report.push("duality", "rates_from_currents", rates, DUALITY_TOL);
    let best = dpc_rates(split.p1, split.p2, &ch, &params, DlScheme::Dpc21)?;
    report.push("duality", "dpc_sum_equals_capacity", (best.sum() - sum_capacity_dl(&params, &ch)).abs(), 1e-12 * best.sum().max(1.0));
    Ok(())
}
