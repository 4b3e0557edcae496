//! Scripted full-state expert: pure pursuit along the map route with
//! obstacle-aware speed scaling.

use crate::action::Action;
use crate::world::raycast::{cast, cast_static};
use crate::world::{wrap_angle, RobotState, Vec2, WorldMap, ROBOT_RADIUS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "kebab-case"))]
pub enum RouteDirection {
    #[default]
    Forward,
    Reverse,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct OracleConfig {
    pub lookahead: f64,
    /// Defaults to the sensor policy's `v_fwd`.
    pub cruise: f64,
    /// Clearance (m) below which speed ramps down toward `0.2 · cruise`.
    pub slow_radius: f64,
    /// Clearance (m) below which forward motion stops and the robot only turns.
    pub guard_dist: f64,
    /// Normalized angular command per radian of heading error.
    pub steer_gain: f64,
    pub max_turn: f64,
    pub direction: RouteDirection,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            lookahead: 0.8,
            cruise: 0.6,
            slow_radius: 0.7,
            guard_dist: 0.12,
            steer_gain: 1.0,
            max_turn: 0.5,
            direction: RouteDirection::Forward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("map has no route")]
    NoRoute,
}

fn waypoint(world: &WorldMap, dir: RouteDirection, i: usize) -> Vec2 {
    let n = world.route.len();
    match dir {
        RouteDirection::Forward => world.route[i % n],
        RouteDirection::Reverse => world.route[(n - i % n) % n],
    }
}

/// Point `lookahead` meters further along the closed route from the
/// projection of `p` onto it.
pub fn lookahead_point(world: &WorldMap, p: Vec2, cfg: &OracleConfig) -> Result<Vec2, OracleError> {
    let n = world.route.len();
    if n == 0 {
        return Err(OracleError::NoRoute);
    }
    if n == 1 {
        return Ok(world.route[0]);
    }
    let dir = cfg.direction;
    let mut best = (f64::INFINITY, 0usize, 0.0f64);
    for i in 0..n {
        let (a, b) = (waypoint(world, dir, i), waypoint(world, dir, i + 1));
        let (ex, ey) = (b.x - a.x, b.y - a.y);
        let len2 = ex * ex + ey * ey;
        let t = if len2 == 0.0 { 0.0 } else { (((p.x - a.x) * ex + (p.y - a.y) * ey) / len2).clamp(0.0, 1.0) };
        let q = Vec2::new(a.x + t * ex, a.y + t * ey);
        let d = p.dist(q);
        if d < best.0 {
            best = (d, i, t);
        }
    }
    let (_, mut i, t) = best;
    let a = waypoint(world, dir, i);
    let b = waypoint(world, dir, i + 1);
    let mut pos = Vec2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
    let mut left = cfg.lookahead;
    for _ in 0..=n {
        let end = waypoint(world, dir, i + 1);
        let d = pos.dist(end);
        if d >= left {
            let f = left / d;
            return Ok(Vec2::new(pos.x + f * (end.x - pos.x), pos.y + f * (end.y - pos.y)));
        }
        left -= d;
        pos = end;
        i += 1;
    }
    Ok(pos)
}

/// Free distance ahead of the robot's edge, over a narrow fan of rays.
fn clearance_ahead(world: &WorldMap, s: &RobotState, include_peds: bool) -> f64 {
    let mut best = f64::INFINITY;
    for off in [-0.35, -0.17, 0.0, 0.17, 0.35] {
        let a = s.pose.heading + off;
        let hit = if include_peds {
            cast(world, s.pose.position(), a, 5.0)
        } else {
            cast_static(world, s.pose.position(), a, 5.0)
        };
        if let Some(h) = hit {
            best = best.min(h.distance - ROBOT_RADIUS);
        }
    }
    best
}

pub fn oracle_action(world: &WorldMap, s: &RobotState, cfg: &OracleConfig) -> Result<Action, OracleError> {
    let target = lookahead_point(world, s.pose.position(), cfg)?;
    let bearing = libm::atan2(target.y - s.pose.y, target.x - s.pose.x);
    let err = wrap_angle(bearing - s.pose.heading);
    let w = (cfg.steer_gain * err).clamp(-cfg.max_turn, cfg.max_turn);

    // Slow for sharp heading errors so corners are taken on a tight arc.
    let align = libm::cos(err).max(0.0);
    let mut v = cfg.cruise * (0.2 + 0.8 * align * align);

    let clear = clearance_ahead(world, s, true);
    if clear < cfg.slow_radius {
        let f = (clear / cfg.slow_radius).clamp(0.0, 1.0);
        v = v.min(cfg.cruise * (0.2 + 0.8 * f));
    }
    if clearance_ahead(world, s, false) < cfg.guard_dist {
        v = 0.0;
    }
    Ok(Action::new(v, w))
}
