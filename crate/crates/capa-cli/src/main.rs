mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use capa::channel::{
    channel_field, correlation_planar_oracle, gain_linear_oracle, gain_planar_oracle, ChannelPair,
};
use capa::coupling::CouplingModel;
use capa::downlink::{
    currents_from_dual, dpc_rates, dual_power_allocation, normalized_channel, rates_from_currents, region_dl,
    su_capacity_dl, sum_capacity_dl, zf_precoding_dl, DlScheme, DEFAULT_SPLITS,
};
use capa::error::Error;
use capa::geometry::Aperture;
use capa::numerics::ORACLE_REL_TOL;
use capa::scenario::{has_errors, scene_defaults, validate, ApertureConfig, Scene, Severity};
use capa::sweep::{sweep, SweepParam, SweepRange, SweepRow};
use capa::uplink::{region_ul, sic_rates, su_capacity_ul, sum_capacity_ul, zf_rates_ul, SicOrder};
use capa::verify::{self, Suite};

const EXIT_VALIDATION: u8 = 1;
const EXIT_VERIFICATION: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Capacity limits of two-user continuous-aperture array links.
#[derive(Debug, Parser)]
#[command(name = "capa", version)]
struct Cli {
    #[command(flatten)]
    scene: SceneArgs,

    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output format. Reports default to JSON, tables to CSV.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write a run manifest (command, scene, version, seed, output digest).
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct SceneArgs {
    /// Scene file (.toml or .json). Defaults to the reference scene.
    #[arg(long, global = true, env = "CAPA_SCENE", value_name = "PATH")]
    config: Option<PathBuf>,

    /// Replace the aperture, keeping its footprint.
    #[arg(long, global = true, value_enum)]
    aperture: Option<ApertureKind>,

    /// Occupation ratio of a discrete array.
    #[arg(long, global = true)]
    occupation: Option<f64>,

    /// Elements per side of a discrete array (odd).
    #[arg(long, global = true)]
    elements: Option<usize>,

    /// Width L_x of a linear aperture, m.
    #[arg(long, global = true)]
    width: Option<f64>,

    /// Apply the mutual-coupling model to a discrete array.
    #[arg(long, global = true)]
    mutual_coupling: bool,

    /// Antenna impedance, ohms.
    #[arg(long, global = true, default_value_t = 50.0)]
    za: f64,

    /// Termination impedance, ohms.
    #[arg(long, global = true, default_value_t = 50.0)]
    zt: f64,

    /// Mutual-impedance prefactor.
    #[arg(long, global = true, default_value_t = 0.1)]
    z_scale: f64,

    /// Chebyshev-Gauss order for correlation factors.
    #[arg(long, global = true)]
    quadrature_order: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ApertureKind {
    Planar,
    Linear,
    Spda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Link {
    Ul,
    Dl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Scheme {
    Capacity,
    Zf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    ApertureArea,
    Occupation,
    Snr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteKind {
    All,
    Whitening,
    Duality,
    Oracle,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scene utilities.
    Scene {
        #[command(subcommand)]
        action: SceneAction,
    },
    /// Channel gains and correlation factor.
    Gain {
        /// Also evaluate the adaptive-integration oracle.
        #[arg(long)]
        oracle: bool,
    },
    /// Per-user and sum rates.
    Capacity {
        #[arg(long, value_enum, default_value = "ul")]
        link: Link,
        #[arg(long, value_enum, default_value = "capacity")]
        scheme: Scheme,
        /// Rebuild the downlink from source currents on the sampling grid.
        #[arg(long)]
        dual_trace: bool,
    },
    /// Capacity-region vertices.
    Region {
        #[arg(long, value_enum, default_value = "ul")]
        link: Link,
        /// Power splits for the downlink hull.
        #[arg(long, default_value_t = DEFAULT_SPLITS)]
        n_splits: usize,
    },
    /// Rates over a parameter range.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepKind,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        /// Geometric spacing.
        #[arg(long)]
        log: bool,
    },
    /// Self-checks of the scene.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteKind,
    },
}

#[derive(Debug, Subcommand)]
enum SceneAction {
    /// Echo the resolved scene with derived quantities.
    Print,
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Findings,
    Verification,
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Lib(Error::NoConvergence { .. })
            | Failure::Lib(Error::Singular(_))
            | Failure::Lib(Error::CorrelationOverflow(_))
            | Failure::Lib(Error::NonFinite { .. }) => EXIT_NUMERIC,
            Failure::Verification => EXIT_VERIFICATION,
            _ => EXIT_VALIDATION,
        }
    }
}

fn build_scene(args: &SceneArgs) -> Result<Scene, Error> {
    let mut scene = match &args.config {
        Some(path) => Scene::load(path)?,
        None => scene_defaults(),
    };
    let current = scene.aperture;
    let (spda_m, spda_occ) = match current {
        ApertureConfig::Spda { elements_x, occupation, .. } => (elements_x, occupation),
        _ => (41, 1.0),
    };
    let (lx, lz) = current.extent();
    let kind = args
        .aperture
        .or((args.occupation.is_some() || args.elements.is_some()).then_some(ApertureKind::Spda));
    scene.aperture = match kind {
        None => current,
        Some(ApertureKind::Planar) => ApertureConfig::Planar { length_x: lx, length_z: lz },
        Some(ApertureKind::Linear) => ApertureConfig::Linear { length_x: args.width.unwrap_or(0.01), length_z: lz },
        Some(ApertureKind::Spda) => {
            let m = args.elements.unwrap_or(spda_m);
            current.to_spda(m, m, args.occupation.unwrap_or(spda_occ))
        }
    };
    if args.mutual_coupling {
        scene.coupling = Some(CouplingModel { z_antenna: args.za, z_termination: args.zt, impedance_scale: args.z_scale });
    }
    if let Some(n) = args.quadrature_order {
        scene.quadrature_order = n;
    }
    Ok(scene)
}

fn report(v: &Value, format: Option<Format>) -> String {
    match format {
        Some(Format::Csv) => output::csv_report(v),
        _ => output::json(v),
    }
}

fn table(header: &[&str], rows: Vec<Vec<f64>>, format: Option<Format>) -> String {
    match format {
        Some(Format::Json) => {
            let rows: Vec<Value> = rows
                .into_iter()
                .map(|r| Value::Object(header.iter().map(|h| h.to_string()).zip(r.into_iter().map(Value::from)).collect()))
                .collect();
            output::json(&json!({ "version": env!("CARGO_PKG_VERSION"), "rows": rows }))
        }
        _ => output::csv_table(header, rows),
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn cmd_gain(scene: &Scene, oracle: bool) -> Result<Value, Error> {
    let aperture = scene.aperture()?;
    let placements = scene.placements()?;
    let gains = scene.gains()?;
    let mut users = Vec::new();
    for (p, &g) in placements.iter().zip(&gains) {
        let mut u = json!({ "g": g });
        if oracle && scene.coupling.is_none() {
            let o = match aperture {
                Aperture::Planar(a) => Some(gain_planar_oracle(&a, p, ORACLE_REL_TOL)?),
                Aperture::Linear(a) => Some(gain_linear_oracle(&a, p, ORACLE_REL_TOL)?),
                Aperture::Spda(_) => None,
            };
            if let Some(o) = o {
                u["oracle"] = json!(o);
                u["relative_gap"] = json!(rel_gap(g, o));
            }
        }
        users.push(u);
    }
    let mut out = json!({ "aperture": aperture.name(), "area": aperture.area(), "users": users });
    if placements.len() == 2 {
        let ch = scene.channel_pair()?;
        out["rho"] = json!({ "re": ch.rho.re, "im": ch.rho.im });
        out["rho_abs2"] = json!(ch.rho_abs2());
        out["rho_bar"] = json!(ch.rho_bar());
        if let (true, Aperture::Planar(a), None) = (oracle, aperture, scene.coupling) {
            let o = correlation_planar_oracle(&scene.wavelength()?, &a, &placements[0], &placements[1], ORACLE_REL_TOL)?;
            out["rho_abs2_oracle"] = json!(o.norm_sqr());
            out["rho_abs2_gap"] = json!((o.norm_sqr() - ch.rho_abs2()).abs());
        }
    }
    Ok(out)
}

fn rates(r1: f64, r2: f64) -> Value {
    json!({ "r1": r1, "r2": r2, "sum": r1 + r2 })
}

fn cmd_capacity(scene: &Scene, link: Link, scheme: Scheme, dual_trace: bool) -> Result<Value, Error> {
    let gains = scene.gains()?;
    let mut out = json!({ "link": link, "scheme": scheme });
    if gains.len() == 1 {
        let g = gains[0];
        let c = match link {
            Link::Ul => su_capacity_ul(scene.uplink_snrs()?[0], g),
            Link::Dl => su_capacity_dl(scene.downlink_scales()?[0] * scene.downlink_power()?, g),
        };
        out["g"] = json!(g);
        out["r1"] = json!(c);
        out["sum_rate"] = json!(c);
        return Ok(out);
    }
    let ch = scene.channel_pair()?;
    out["g"] = json!([ch.g1, ch.g2]);
    out["rho_abs2"] = json!(ch.rho_abs2());
    match (link, scheme) {
        (Link::Ul, Scheme::Capacity) => {
            let s = scene.uplink_snrs()?;
            let a = sic_rates(s[0], s[1], &ch, SicOrder::TwoThenOne);
            let b = sic_rates(s[0], s[1], &ch, SicOrder::OneThenTwo);
            out["snr"] = json!(s);
            out["two_then_one"] = rates(a.r1, a.r2);
            out["one_then_two"] = rates(b.r1, b.r2);
            out["sum_rate"] = json!(sum_capacity_ul(s[0], s[1], &ch));
        }
        (Link::Ul, Scheme::Zf) => {
            let s = scene.uplink_snrs()?;
            let z = zf_rates_ul(s[0], s[1], &ch);
            out["snr"] = json!(s);
            out["zf"] = rates(z.r1, z.r2);
            out["sum_rate"] = json!(z.sum());
        }
        (Link::Dl, Scheme::Capacity) => {
            let params = scene.downlink_params()?;
            let split = dual_power_allocation(&params, &ch);
            let r = dpc_rates(split.p1, split.p2, &ch, &params, DlScheme::Dpc21)?;
            out["power"] = json!(params.power);
            out["dual_split"] = serde_json::to_value(split).expect("serialisable");
            out["dpc_21"] = rates(r.r1, r.r2);
            out["sum_rate"] = json!(sum_capacity_dl(&params, &ch));
            if dual_trace {
                out["dual_trace"] = dual_trace_report(scene, split.p1, split.p2)?;
            }
        }
        (Link::Dl, Scheme::Zf) => {
            let params = scene.downlink_params()?;
            let z = zf_precoding_dl(&params, &ch);
            out["power"] = json!(params.power);
            out["zf"] = json!({ "r1": z.r1, "r2": z.r2, "p1": z.p1, "p2": z.p2, "sum": z.sum() });
            out["sum_rate"] = json!(z.sum());
        }
    }
    Ok(out)
}

fn dual_trace_report(scene: &Scene, p1: f64, p2: f64) -> Result<Value, Error> {
    let grid = scene.sampling_grid()?;
    let wl = scene.wavelength()?;
    let params = scene.downlink_params()?;
    let p = scene.placements()?;
    let (f1, f2) = (channel_field(&grid, &wl, &p[0])?, channel_field(&grid, &wl, &p[1])?);
    let (h1, h2) = (normalized_channel(&f1, params.scale[0]), normalized_channel(&f2, params.scale[1]));
    let j = currents_from_dual(p1, p2, &h1, &h2, DlScheme::Dpc21)?;
    let r = rates_from_currents(&j.j1, &j.j2, &h1, &h2, DlScheme::Dpc21)?;
    let grid_pair = ChannelPair::from_fields(&f1, &f2)?;
    Ok(json!({
        "grid": scene.grid,
        "current_power": [j.j1.norm_sqr(), j.j2.norm_sqr()],
        "total_power": j.total_power(),
        "rates_from_currents": rates(r.r1, r.r2),
        "grid_capacity": sum_capacity_dl(&params, &grid_pair),
    }))
}

fn cmd_region(scene: &Scene, link: Link, n_splits: usize, format: Option<Format>) -> Result<String, Error> {
    let ch = scene.channel_pair()?;
    let poly = match link {
        Link::Ul => {
            let s = scene.uplink_snrs()?;
            region_ul(s[0], s[1], &ch)
        }
        Link::Dl => region_dl(&scene.downlink_params()?, &ch, n_splits)?,
    };
    Ok(table(&["r1", "r2"], poly.vertices.iter().map(|v| vec![v.r1, v.r2]).collect(), format))
}

fn cmd_sweep(scene: &Scene, param: SweepKind, range: SweepRange, format: Option<Format>) -> Result<String, Error> {
    let param = match param {
        SweepKind::ApertureArea => SweepParam::ApertureArea,
        SweepKind::Occupation => SweepParam::Occupation,
        SweepKind::Snr => SweepParam::Snr,
    };
    let rows = sweep(scene, param, &range)?;
    let mut header = vec![param.column()];
    header.extend(SweepRow::HEADER);
    Ok(table(&header, rows.iter().map(|r| r.fields().to_vec()).collect(), format))
}

fn run(cli: &Cli) -> Result<String, Failure> {
    let scene = build_scene(&cli.scene)?;
    let findings = validate(&scene);
    for f in &findings {
        match f.severity {
            Severity::Error => eprintln!("error [{}]: {}", f.code, f.message),
            Severity::Warning => log::warn!("[{}] {}", f.code, f.message),
        }
    }
    if has_errors(&findings) {
        return Err(Failure::Findings);
    }
    let format = cli.format;
    let out = match &cli.command {
        Command::Scene { action: SceneAction::Print } => {
            let v = json!({
                "scene": serde_json::to_value(&scene).expect("serialisable"),
                "derived": serde_json::to_value(scene.summary()?).expect("serialisable"),
                "findings": serde_json::to_value(&findings).expect("serialisable"),
            });
            report(&v, format)
        }
        Command::Gain { oracle } => report(&cmd_gain(&scene, *oracle)?, format),
        Command::Capacity { link, scheme, dual_trace } => {
            report(&cmd_capacity(&scene, *link, *scheme, *dual_trace)?, format)
        }
        Command::Region { link, n_splits } => cmd_region(&scene, *link, *n_splits, format)?,
        Command::Sweep { param, start, stop, steps, log } => {
            cmd_sweep(&scene, *param, SweepRange { start: *start, stop: *stop, steps: *steps, log: *log }, format)?
        }
        Command::Verify { suite } => {
            let suite = match suite {
                SuiteKind::All => Suite::All,
                SuiteKind::Whitening => Suite::Whitening,
                SuiteKind::Duality => Suite::Duality,
                SuiteKind::Oracle => Suite::Oracle,
            };
            let r = verify::run(&scene, suite, cli.seed)?;
            let text = match format {
                Some(Format::Csv) => {
                    let mut s = format!("{}\nsuite,check,measured,tolerance,passed\n", output::VERSION_LINE);
                    for c in &r.checks {
                        s.push_str(&format!(
                            "{},{},{},{},{}\n",
                            c.suite,
                            c.name,
                            output::num(c.measured),
                            output::num(c.tolerance),
                            c.passed
                        ));
                    }
                    s
                }
                _ => output::json(&json!({ "passed": r.passed(), "checks": r.checks })),
            };
            if !r.passed() {
                print!("{text}");
                return Err(Failure::Verification);
            }
            text
        }
    };
    if let Some(path) = &cli.manifest {
        let manifest = json!({
            "command": std::env::args().collect::<Vec<_>>(),
            "scene": serde_json::to_value(&scene).expect("serialisable"),
            "version": env!("CARGO_PKG_VERSION"),
            "seed": cli.seed,
            "outputs": { "stdout": { "sha256": output::sha256_hex(out.as_bytes()), "bytes": out.len() } },
        });
        std::fs::write(path, output::json(&manifest)).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    match run(&cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).is_err() {
                return ExitCode::from(EXIT_VALIDATION);
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            match &f {
                Failure::Lib(e) => eprintln!("error: {e}"),
                Failure::Findings => eprintln!("error: scene is invalid"),
                Failure::Verification => eprintln!("error: verification failed"),
                Failure::Io(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
