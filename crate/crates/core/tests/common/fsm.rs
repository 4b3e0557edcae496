//! Decision-table oracle for the sensor controller and a pixel-scan oracle
//! for the depth trust test.

use ms3l_core::sensor_policy::{decide, depth_reject, sensor_action, Branch, DepthSummary, SensorPolicyConfig};
use ms3l_core::sensors::{DepthMap, UltrasonicPair};
use ms3l_core::rng::rng_for;
use rand::Rng;

/// Expected branch and raw `(v, w)` for one set of summary statistics.
pub fn table(trusted: bool, l: f64, m: f64, r: f64, dl: f64, dr: f64, c: &SensorPolicyConfig) -> (Branch, f64, f64) {
    use Branch::*;
    let rows: [(bool, Branch, f64, f64); 8] = [
        (trusted && m < c.avoid_depth && l >= r, DepthAvoidLeft, c.v_slow, c.w_turn),
        (trusted && m < c.avoid_depth && l < r, DepthAvoidRight, c.v_slow, -c.w_turn),
        (trusted && m >= c.avoid_depth && m < c.decel_depth, DepthDecel, c.v_slow, 0.0),
        (trusted && m >= c.decel_depth, DepthForward, c.v_fwd, 0.0),
        (!trusted && (dl < c.back_dist || dr < c.back_dist), UsBack, c.v_back, if dl < dr { -c.w_turn } else { c.w_turn }),
        (!trusted && dl >= c.back_dist && dr >= c.back_dist && dl < c.safe_side_dist && dl != dr, UsTurnRight, c.v_slow, -c.w_turn),
        (
            !trusted
                && dl >= c.back_dist
                && dr >= c.back_dist
                && ((dl >= c.safe_side_dist && dr < c.safe_side_dist) || (dl == dr && dl < c.safe_side_dist)),
            UsTurnLeft,
            c.v_slow,
            c.w_turn,
        ),
        (!trusted && dl >= c.safe_side_dist && dr >= c.safe_side_dist, UsForward, c.v_fwd, 0.0),
    ];
    let hits: Vec<_> = rows.iter().filter(|r| r.0).collect();
    assert_eq!(hits.len(), 1, "decision table rows must be exclusive and exhaustive");
    (hits[0].1, hits[0].2, hits[0].3)
}

fn straddle(t: f64) -> [f64; 3] {
    [t - 0.01, t, t + 0.01]
}

fn depth_values(c: &SensorPolicyConfig) -> Vec<f64> {
    let mut v = vec![0.5];
    v.extend(straddle(c.avoid_depth));
    v.extend(straddle(c.decel_depth));
    v.push(5.0);
    v
}

fn us_values(c: &SensorPolicyConfig) -> Vec<f64> {
    let mut v = vec![0.05];
    v.extend(straddle(c.back_dist));
    v.extend(straddle(c.safe_side_dist));
    v.push(4.0);
    v
}

/// `decide` on summaries built directly from a lattice straddling every
/// threshold (exact boundary values included). Returns the point count.
pub fn summary_lattice(c: &SensorPolicyConfig) -> Result<usize, String> {
    let depth = depth_values(c);
    let sides = [0.6, 1.0, 1.0 + 1e-9, 3.0];
    let us = us_values(c);
    let fractions = [0.0, c.reject_fraction - 0.01, c.reject_fraction, c.reject_fraction + 0.01, 0.9];
    let mut n = 0;
    for &f in &fractions {
        for &m in &depth {
            for &l in &sides {
                for &r in &sides {
                    for &dl in &us {
                        for &dr in &us {
                            let s = DepthSummary {
                                counts: [0; 3],
                                means: [l, m, r],
                                rejected_fraction: f,
                                trusted: f <= c.reject_fraction,
                            };
                            let got = decide(&s, UltrasonicPair { left: dl, right: dr }, c);
                            compare(&got, table(s.trusted, l, m, r, dl, dr, c), &[f, l, m, r, dl, dr])?;
                            n += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(n)
}

fn compare(
    got: &ms3l_core::sensor_policy::SensorDecision,
    want: (Branch, f64, f64),
    at: &[f64],
) -> Result<(), String> {
    let (b, v, w) = want;
    let ok = got.branch == b
        && got.action.v == v
        && got.action.w == w
        && got.depth_trusted == !b.uses_ultrasonic()
        && (b != Branch::UsBack || got.action.v < 0.0);
    if ok {
        Ok(())
    } else {
        Err(format!("at {at:?}: got {:?} {:?}, oracle {b:?} ({v}, {w})", got.branch, got.action))
    }
}

/// A `3k × h` map whose thirds hold `l`, `m`, `r`, with `sentinels` pixels
/// set to the sentinel spread evenly over the thirds.
fn map(l: f64, m: f64, r: f64, sentinels: usize) -> DepthMap {
    let (w, h) = (30, 10);
    let mut d = DepthMap::filled(w, h, 0.0);
    for row in 0..h {
        for col in 0..w {
            d.set(row, col, [l, m, r][col / 10]);
        }
    }
    // round-robin over thirds so they keep equal pixel counts
    for k in 0..sentinels {
        let third = k % 3;
        let j = k / 3;
        d.set(j % h, third * 10 + j / h, ms3l_core::sensors::INVALID_DEPTH);
    }
    d
}

/// `sensor_action` end to end on rendered maps (values offset from the
/// thresholds so per-third means are unambiguous).
pub fn map_lattice(c: &SensorPolicyConfig) -> Result<usize, String> {
    let depth: Vec<f64> = depth_values(c).into_iter().filter(|d| *d != c.avoid_depth && *d != c.decel_depth).collect();
    let sides = [0.6, 1.0, 3.0];
    let us = us_values(c);
    let total = 300.0;
    let limit = (c.reject_fraction * total).floor() as usize;
    let sentinels = [0, limit, limit + 1, 270];
    let mut n = 0;
    for &s in &sentinels {
        for &m in &depth {
            for &l in &sides {
                for &r in &sides {
                    let dm = map(l, m, r, s);
                    let trusted = s as f64 / total <= c.reject_fraction;
                    for &dl in &us {
                        for &dr in &us {
                            let got = sensor_action(&dm, UltrasonicPair { left: dl, right: dr }, c);
                            compare(&got, table(trusted, l, m, r, dl, dr, c), &[s as f64, l, m, r, dl, dr])?;
                            n += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(n)
}

/// Pixel-scan recount: returns (rejected per third, kept means, fraction).
pub fn brute_force_reject(m: &DepthMap) -> ([usize; 3], [f64; 3], f64) {
    let mut valid = Vec::new();
    for row in 0..m.height {
        for col in 0..m.width {
            let v = m.get(row, col);
            if v != ms3l_core::sensors::INVALID_DEPTH {
                valid.push(v);
            }
        }
    }
    let n = valid.len() as f64;
    let mean = valid.iter().sum::<f64>() / n;
    let sd = (valid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let third = m.width / 3;
    let mut rejected = [0; 3];
    let mut kept: [Vec<f64>; 3] = Default::default();
    for col in 0..m.width {
        let k = if col < third { 0 } else if col < 2 * third { 1 } else { 2 };
        for row in 0..m.height {
            let v = m.get(row, col);
            if v == ms3l_core::sensors::INVALID_DEPTH || valid.is_empty() || v > mean + 2.0 * sd {
                rejected[k] += 1;
            } else {
                kept[k].push(v);
            }
        }
    }
    let means = [0, 1, 2].map(|k| {
        if kept[k].is_empty() {
            f64::INFINITY
        } else {
            kept[k].iter().sum::<f64>() / kept[k].len() as f64
        }
    });
    let frac = rejected.iter().sum::<usize>() as f64 / (m.width * m.height) as f64;
    (rejected, means, frac)
}

/// Random maps with sentinels and far outliers against [`brute_force_reject`].
pub fn random_maps(count: usize, seed: u64) -> Result<usize, String> {
    let mut rng = rng_for(seed, 0);
    for i in 0..count {
        let w = 3 * rng.random_range(2..20);
        let h = rng.random_range(1..16);
        let p_sentinel = rng.random_range(0.0..0.7);
        let mut m = DepthMap::filled(w, h, 0.0);
        for row in 0..h {
            for col in 0..w {
                let v = if rng.random_bool(p_sentinel) {
                    ms3l_core::sensors::INVALID_DEPTH
                } else if rng.random_bool(0.05) {
                    rng.random_range(15.0..20.0)
                } else {
                    rng.random_range(0.5..5.0)
                };
                m.set(row, col, v);
            }
        }
        let rho = rng.random_range(0.05..0.95);
        let got = depth_reject(&m, rho);
        let (counts, means, frac) = brute_force_reject(&m);
        let means_ok = (0..3).all(|k| {
            (means[k].is_infinite() && got.means[k].is_infinite()) || (means[k] - got.means[k]).abs() <= 1e-12
        });
        if got.counts != counts || !means_ok || (got.rejected_fraction - frac).abs() > 1e-15 || got.trusted != (frac <= rho)
        {
            return Err(format!("map {i} ({w}x{h}): got {got:?}, oracle {counts:?} {means:?} {frac}"));
        }
    }
    Ok(count)
}
