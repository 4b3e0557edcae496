//! Hand-engineered controller over depth statistics and ultrasonic ranges.

use crate::action::Action;
use crate::sensors::{DepthMap, UltrasonicPair, INVALID_DEPTH};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct SensorPolicyConfig {
    /// Depth is distrusted when more than this fraction of pixels is rejected.
    pub reject_fraction: f64,
    pub avoid_depth: f64,
    pub decel_depth: f64,
    pub back_dist: f64,
    pub safe_side_dist: f64,
    pub v_fwd: f64,
    pub v_slow: f64,
    /// Negative.
    pub v_back: f64,
    pub w_turn: f64,
    /// Ticks a US_BACK decision is held once taken; 0 disables the latch.
    pub back_latch_ticks: u32,
}

impl Default for SensorPolicyConfig {
    fn default() -> Self {
        Self {
            reject_fraction: 0.3,
            avoid_depth: 0.8,
            decel_depth: 1.6,
            back_dist: 0.2,
            safe_side_dist: 0.5,
            v_fwd: 0.6,
            v_slow: 0.3,
            v_back: -0.4,
            w_turn: 0.4,
            back_latch_ticks: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SensorConfigError {
    #[error("reject_fraction must lie in (0, 1)")]
    RejectFraction,
    #[error("require 0 < back_dist < safe_side_dist")]
    SideDistances,
    #[error("require 0.5 <= avoid_depth < decel_depth <= 20")]
    DepthThresholds,
    #[error("command magnitudes must lie in (0, 1]")]
    Magnitudes,
}

impl SensorPolicyConfig {
    pub fn validate(&self) -> Result<(), SensorConfigError> {
        if !(self.reject_fraction > 0.0 && self.reject_fraction < 1.0) {
            return Err(SensorConfigError::RejectFraction);
        }
        if !(0.0 < self.back_dist && self.back_dist < self.safe_side_dist) {
            return Err(SensorConfigError::SideDistances);
        }
        if !(0.5 <= self.avoid_depth && self.avoid_depth < self.decel_depth && self.decel_depth <= 20.0) {
            return Err(SensorConfigError::DepthThresholds);
        }
        let unit = |m: f64| m > 0.0 && m <= 1.0;
        if !(unit(self.v_fwd) && unit(self.v_slow) && unit(-self.v_back) && unit(self.w_turn)) {
            return Err(SensorConfigError::Magnitudes);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Branch {
    DepthForward = 0,
    DepthDecel = 1,
    DepthAvoidLeft = 2,
    DepthAvoidRight = 3,
    UsForward = 4,
    UsTurnLeft = 5,
    UsTurnRight = 6,
    UsBack = 7,
}

impl Branch {
    pub const ALL: [Branch; 8] = [
        Branch::DepthForward,
        Branch::DepthDecel,
        Branch::DepthAvoidLeft,
        Branch::DepthAvoidRight,
        Branch::UsForward,
        Branch::UsTurnLeft,
        Branch::UsTurnRight,
        Branch::UsBack,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        Self::ALL.get(t as usize).copied()
    }

    pub fn uses_ultrasonic(self) -> bool {
        self.tag() >= Branch::UsForward.tag()
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::DepthForward => "DEPTH_FORWARD",
            Branch::DepthDecel => "DEPTH_DECEL",
            Branch::DepthAvoidLeft => "DEPTH_AVOID_LEFT",
            Branch::DepthAvoidRight => "DEPTH_AVOID_RIGHT",
            Branch::UsForward => "US_FORWARD",
            Branch::UsTurnLeft => "US_TURN_LEFT",
            Branch::UsTurnRight => "US_TURN_RIGHT",
            Branch::UsBack => "US_BACK",
        }
    }
}

/// Outcome of the depth trust test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSummary {
    /// Rejected pixels per left/middle/right sub-image.
    pub counts: [usize; 3],
    /// Mean of the kept pixels per sub-image; `f64::INFINITY` when none kept.
    pub means: [f64; 3],
    pub rejected_fraction: f64,
    pub trusted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorDecision {
    pub action: Action,
    pub branch: Branch,
    pub depth_trusted: bool,
}

/// Splits `m` into three equal-width sub-images and rejects sentinel pixels
/// and pixels above `μ + 2σ` of the whole map's valid pixels.
pub fn depth_reject(m: &DepthMap, reject_fraction: f64) -> DepthSummary {
    let valid = || m.values.iter().copied().filter(|v| *v != INVALID_DEPTH);
    let n_valid = valid().count();
    let cutoff = if n_valid == 0 {
        f64::NEG_INFINITY
    } else {
        let mu = valid().sum::<f64>() / n_valid as f64;
        let var = valid().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n_valid as f64;
        mu + 2.0 * libm::sqrt(var)
    };

    let third = m.width / 3;
    let mut counts = [0usize; 3];
    let mut sums = [0.0f64; 3];
    let mut kept = [0usize; 3];
    for row in 0..m.height {
        for col in 0..m.width {
            let k = (col / third).min(2);
            let v = m.get(row, col);
            if v == INVALID_DEPTH || v > cutoff {
                counts[k] += 1;
            } else {
                sums[k] += v;
                kept[k] += 1;
            }
        }
    }
    let means = core::array::from_fn(|k| if kept[k] == 0 { f64::INFINITY } else { sums[k] / kept[k] as f64 });
    let total = m.values.len().max(1);
    let rejected_fraction = counts.iter().sum::<usize>() as f64 / total as f64;
    DepthSummary { counts, means, rejected_fraction, trusted: rejected_fraction <= reject_fraction }
}

/// Branch selection from a depth summary and ultrasonic ranges.
pub fn decide(summary: &DepthSummary, us: UltrasonicPair, cfg: &SensorPolicyConfig) -> SensorDecision {
    let [left, mid, right] = summary.means;
    let (branch, v, w) = if summary.trusted {
        if mid < cfg.avoid_depth {
            if left >= right {
                (Branch::DepthAvoidLeft, cfg.v_slow, cfg.w_turn)
            } else {
                (Branch::DepthAvoidRight, cfg.v_slow, -cfg.w_turn)
            }
        } else if mid < cfg.decel_depth {
            (Branch::DepthDecel, cfg.v_slow, 0.0)
        } else {
            (Branch::DepthForward, cfg.v_fwd, 0.0)
        }
    } else if us.left.min(us.right) < cfg.back_dist {
        let w = if us.left < us.right { -cfg.w_turn } else { cfg.w_turn };
        (Branch::UsBack, cfg.v_back, w)
    } else if us.left < cfg.safe_side_dist && us.left == us.right {
        (Branch::UsTurnLeft, cfg.v_slow, cfg.w_turn)
    } else if us.left < cfg.safe_side_dist {
        (Branch::UsTurnRight, cfg.v_slow, -cfg.w_turn)
    } else if us.right < cfg.safe_side_dist {
        (Branch::UsTurnLeft, cfg.v_slow, cfg.w_turn)
    } else {
        (Branch::UsForward, cfg.v_fwd, 0.0)
    };
    SensorDecision { action: Action::new(v, w), branch, depth_trusted: summary.trusted }
}

pub fn sensor_action(m: &DepthMap, us: UltrasonicPair, cfg: &SensorPolicyConfig) -> SensorDecision {
    decide(&depth_reject(m, cfg.reject_fraction), us, cfg)
}

/// Sensor policy with the optional back-up latch.
#[derive(Debug, Clone, Default)]
pub struct SensorPolicy {
    pub cfg: SensorPolicyConfig,
    latched: Option<(SensorDecision, u32)>,
}

impl SensorPolicy {
    pub fn new(cfg: SensorPolicyConfig) -> Self {
        Self { cfg, latched: None }
    }

    pub fn reset(&mut self) {
        self.latched = None;
    }

    pub fn act(&mut self, m: &DepthMap, us: UltrasonicPair) -> SensorDecision {
        if let Some((d, left)) = self.latched.as_mut() {
            if *left > 0 {
                *left -= 1;
                return *d;
            }
        }
        self.latched = None;
        let d = sensor_action(m, us, &self.cfg);
        if d.branch == Branch::UsBack && self.cfg.back_latch_ticks > 0 {
            self.latched = Some((d, self.cfg.back_latch_ticks - 1));
        }
        d
    }
}
