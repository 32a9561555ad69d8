use capa::downlink::region_dl;
use capa::scenario::{ApertureConfig, Scene};
use capa::sweep::{sweep, SweepParam, SweepRange};
use capa::uplink::region_ul;
use capa::{scene_defaults, validate};

fn with_side(side: f64) -> Scene {
    let mut s = scene_defaults();
    s.aperture = ApertureConfig::Planar { length_x: side, length_z: side };
    s
}

#[test]
fn config_round_trips() {
    let s = scene_defaults();
    assert_eq!(Scene::from_toml_str(&s.to_toml().unwrap()).unwrap(), s);
    assert_eq!(Scene::from_json_str(&s.to_json().unwrap()).unwrap(), s);
}

#[test]
fn default_scene_is_clean() {
    let findings = validate(&scene_defaults());
    assert!(findings.is_empty(), "{findings:?}");
}

#[test]
fn regions_grow_with_aperture() {
    let mut last = (0.0, 0.0);
    for side in [0.25, 0.5, 1.0] {
        let s = with_side(side);
        let ch = s.channel_pair().unwrap();
        let snr = s.uplink_snrs().unwrap();
        let ul = region_ul(snr[0], snr[1], &ch).area();
        let dl = region_dl(&s.downlink_params().unwrap(), &ch, 101).unwrap().area();
        assert!(ul >= last.0 && dl >= last.1, "side {side}: {ul} {dl} after {last:?}");
        last = (ul, dl);
    }
}

#[test]
fn uplink_region_is_convex_and_bounded_by_sum_capacity() {
    let s = scene_defaults();
    let ch = s.channel_pair().unwrap();
    let snr = s.uplink_snrs().unwrap();
    let r = region_ul(snr[0], snr[1], &ch);
    assert!(r.is_convex(1e-12));
    let c = capa::uplink::sum_capacity_ul(snr[0], snr[1], &ch);
    assert!((r.max_sum_rate() - c).abs() < 1e-12);
}

#[test]
fn snr_sweep_rows_respect_bounds() {
    let range = SweepRange { start: -10.0, stop: 20.0, steps: 4, log: false };
    let rows = sweep(&scene_defaults(), SweepParam::Snr, &range).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].c_ul > w[0].c_ul && w[1].c_dl > w[0].c_dl);
    }
    for r in &rows {
        assert!(r.r_ul_zf <= r.c_ul && r.c_ul <= r.asymptote_ul);
        assert!(r.r_dl_zf <= r.c_dl + 1e-12 && r.c_dl <= r.asymptote_dl);
    }
}

#[test]
fn occupation_sweep_scales_gains() {
    let range = SweepRange { start: 0.25, stop: 1.0, steps: 2, log: false };
    let rows = sweep(&scene_defaults(), SweepParam::Occupation, &range).unwrap();
    assert!((rows[1].g1 / rows[0].g1 - 4.0).abs() < 1e-9);
    assert!((rows[1].rho_abs2 - rows[0].rho_abs2).abs() < 1e-12);
}
