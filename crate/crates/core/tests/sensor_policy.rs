mod common;

use common::fsm;
use ms3l_core::sensor_policy::{depth_reject, SensorPolicyConfig};
use ms3l_core::sensors::DepthMap;

#[test]
fn decide_matches_decision_table_on_threshold_lattice() {
    let n = fsm::summary_lattice(&SensorPolicyConfig::default()).unwrap_or_else(|e| panic!("{e}"));
    assert!(n >= 10_000, "{n}");
}

#[test]
fn sensor_action_matches_decision_table_on_rendered_maps() {
    let n = fsm::map_lattice(&SensorPolicyConfig::default()).unwrap_or_else(|e| panic!("{e}"));
    assert!(n >= 10_000, "{n}");
}

#[test]
fn lattice_holds_for_a_non_default_config() {
    let c = SensorPolicyConfig {
        reject_fraction: 0.5,
        avoid_depth: 1.0,
        decel_depth: 2.5,
        back_dist: 0.3,
        safe_side_dist: 0.9,
        v_fwd: 1.0,
        v_slow: 0.2,
        v_back: -1.0,
        w_turn: 0.7,
        back_latch_ticks: 0,
    };
    fsm::summary_lattice(&c).unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn depth_reject_matches_pixel_scan_on_random_maps() {
    assert_eq!(fsm::random_maps(100, 5).unwrap_or_else(|e| panic!("{e}")), 100);
}

#[test]
fn three_band_map_matches_pixel_scan() {
    let (w, h) = (48, 27);
    let mut m = DepthMap::filled(w, h, 1.0);
    for row in 0..h {
        for col in 16..32 {
            m.set(row, col, 3.0);
        }
    }
    let got = depth_reject(&m, 0.3);
    let (counts, means, frac) = fsm::brute_force_reject(&m);
    assert_eq!(got.counts, counts);
    assert_eq!(got.means, means);
    assert_eq!(got.rejected_fraction, frac);
    assert!(got.trusted);
}
