//! Simulated depth camera, first-person RGB camera and ultrasonic pair.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::world::raycast::{cast, Face, Hit, Material};
use crate::world::{Pose, Vec2, WorldMap, ROBOT_RADIUS};

pub const DEPTH_MIN: f64 = 0.5;
pub const DEPTH_MAX: f64 = 20.0;
/// Marker for pixels with no valid depth.
pub const INVALID_DEPTH: f64 = -1.0;
pub const ULTRASONIC_MIN: f64 = 0.05;
pub const ULTRASONIC_MAX: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct SensorConfig {
    /// Horizontal field of view in radians, shared by depth and camera.
    pub fov: f64,
    pub depth_width: usize,
    pub depth_height: usize,
    /// Multiplicative depth noise scale.
    pub depth_noise: f64,
    /// Max angle between the view axis and a wall normal for the
    /// untextured failure to trigger.
    pub untextured_angle: f64,
    /// Untextured failure only triggers for walls closer than this.
    pub untextured_max_dist: f64,
    /// Per-pixel corruption probability in untextured mode.
    pub untextured_prob: f64,
    /// Share of corrupted pixels that become the sentinel; the rest are outliers.
    pub untextured_sentinel_share: f64,
    /// Additive ultrasonic noise scale (m); draws are truncated at 3σ.
    pub ultrasonic_noise: f64,
    /// Mount angle of each ultrasonic sensor off the heading.
    pub ultrasonic_mount: f64,
    pub ultrasonic_half_cone: f64,
    pub ultrasonic_rays: usize,
    /// Camera image edge length in pixels.
    pub image_size: usize,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            fov: 90f64.to_radians(),
            depth_width: 48,
            depth_height: 27,
            depth_noise: 0.05,
            untextured_angle: 15f64.to_radians(),
            untextured_max_dist: 2.0,
            untextured_prob: 0.5,
            untextured_sentinel_share: 0.7,
            ultrasonic_noise: 0.02,
            ultrasonic_mount: 30f64.to_radians(),
            ultrasonic_half_cone: 7.5f64.to_radians(),
            ultrasonic_rays: 5,
            image_size: 64,
        }
    }
}

impl SensorConfig {
    /// Same geometry with every noise source disabled.
    pub fn noiseless(&self) -> Self {
        Self { depth_noise: 0.0, untextured_prob: 0.0, ultrasonic_noise: 0.0, ..self.clone() }
    }

    /// Ray angle of column `c` out of `width`, leftmost column first.
    pub fn column_angle(&self, heading: f64, c: usize, width: usize) -> f64 {
        heading + self.fov / 2.0 - (c as f64 + 0.5) * self.fov / width as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    /// Row-major, `height × width`.
    pub values: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Option<Self> {
        (values.len() == width * height && width % 3 == 0 && width > 0).then_some(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        Self { width, height, values: vec![v; width * height] }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.width + col] = v;
    }

    pub fn is_valid(v: f64) -> bool {
        (DEPTH_MIN..=DEPTH_MAX).contains(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UltrasonicPair {
    pub left: f64,
    pub right: f64,
}

/// CHW image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl CameraImage {
    pub const CHANNELS: usize = 3;

    pub fn pixel(&self, ch: usize, row: usize, col: usize) -> f32 {
        self.data[(ch * self.height + row) * self.width + col]
    }
}

/// One step's bundle of sensor readings.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub image: CameraImage,
    pub depth: DepthMap,
    pub ultrasonic: UltrasonicPair,
}

pub fn observe<R: Rng + ?Sized>(world: &WorldMap, pose: &Pose, cfg: &SensorConfig, rng: &mut R) -> Observation {
    let depth = render_depth(world, pose, cfg, rng);
    let ultrasonic = read_ultrasonic(world, pose, cfg, rng);
    Observation { image: render_image(world, pose, cfg), depth, ultrasonic }
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn same_plane(a: &Hit, b: &Hit) -> bool {
    match (a.face, b.face) {
        (Face::X { sign: s1 }, Face::X { sign: s2 }) => s1 == s2 && a.cell.0 == b.cell.0,
        (Face::Y { sign: s1 }, Face::Y { sign: s2 }) => s1 == s2 && a.cell.1 == b.cell.1,
        _ => false,
    }
}

/// Planar depth render: one ray per column shared by every row, per-pixel
/// noise. When the view axis meets a nearby plain wall head-on, pixels on
/// that wall plane are randomly dropped or replaced by outliers.
pub fn render_depth<R: Rng + ?Sized>(world: &WorldMap, pose: &Pose, cfg: &SensorConfig, rng: &mut R) -> DepthMap {
    let (w, h) = (cfg.depth_width, cfg.depth_height);
    let origin = pose.position();
    let limit = DEPTH_MAX * 2.0;

    let center = cast(world, origin, pose.heading, limit);
    let plain = center.filter(|c| {
        c.material == Material::Wall
            && c.distance <= cfg.untextured_max_dist
            && c.incidence_cos >= libm::cos(cfg.untextured_angle)
            && cfg.untextured_prob > 0.0
    });

    let mut map = DepthMap::filled(w, h, INVALID_DEPTH);
    for col in 0..w {
        let hit = cast(world, origin, cfg.column_angle(pose.heading, col, w), limit);
        let untextured = matches!((plain, hit), (Some(p), Some(hh)) if hh.material == Material::Wall && same_plane(&p, &hh));
        for row in 0..h {
            let Some(hit) = hit else { continue };
            let mut d = hit.distance;
            if untextured && rng.random::<f64>() < cfg.untextured_prob {
                if rng.random::<f64>() < cfg.untextured_sentinel_share {
                    continue;
                }
                d = rng.random_range(d.max(DEPTH_MIN)..DEPTH_MAX);
            } else if cfg.depth_noise > 0.0 {
                d *= 1.0 + cfg.depth_noise * gauss(rng);
            }
            if DepthMap::is_valid(d) {
                map.set(row, col, d);
            }
        }
    }
    map
}

/// Minimum range over each side's cone, with additive noise, clamped to the
/// sensor envelope.
pub fn read_ultrasonic<R: Rng + ?Sized>(world: &WorldMap, pose: &Pose, cfg: &SensorConfig, rng: &mut R) -> UltrasonicPair {
    let left = cone_distance(world, pose, cfg, 1.0);
    let right = cone_distance(world, pose, cfg, -1.0);
    let mut noisy = |d: f64| {
        let n = if cfg.ultrasonic_noise > 0.0 {
            cfg.ultrasonic_noise * gauss(rng).clamp(-3.0, 3.0)
        } else {
            0.0
        };
        (d + n).clamp(ULTRASONIC_MIN, ULTRASONIC_MAX)
    };
    let l = noisy(left);
    let r = noisy(right);
    UltrasonicPair { left: l, right: r }
}

/// Noise-free minimum distance over one sensor's cone (`side` = +1 left,
/// -1 right), or `ULTRASONIC_MAX` when nothing is in range.
pub fn cone_distance(world: &WorldMap, pose: &Pose, cfg: &SensorConfig, side: f64) -> f64 {
    let mount = pose.heading + side * cfg.ultrasonic_mount;
    let origin = Vec2::new(
        pose.x + ROBOT_RADIUS * libm::cos(mount),
        pose.y + ROBOT_RADIUS * libm::sin(mount),
    );
    let n = cfg.ultrasonic_rays.max(1);
    let mut best = ULTRASONIC_MAX;
    for k in 0..n {
        let off = if n == 1 {
            0.0
        } else {
            -cfg.ultrasonic_half_cone + 2.0 * cfg.ultrasonic_half_cone * k as f64 / (n - 1) as f64
        };
        if let Some(hit) = cast(world, origin, mount + off, ULTRASONIC_MAX) {
            best = best.min(hit.distance);
        }
    }
    best
}

const CEILING: [f32; 3] = [0.20, 0.20, 0.24];
const FLOOR: [f32; 3] = [0.30, 0.27, 0.22];
/// Camera height above the floor (m).
const CAMERA_Z: f64 = 0.3;

fn material_look(m: Material) -> ([f32; 3], f64) {
    match m {
        Material::Wall => ([0.95, 0.92, 0.85], 1.2),
        Material::Furniture => ([0.85, 0.55, 0.25], 0.75),
        Material::Pedestrian => ([0.85, 0.25, 0.25], 1.7),
    }
}

/// Background-only image: ceiling above the horizon, floor below.
pub fn background(size: usize) -> CameraImage {
    let mut data = vec![0f32; 3 * size * size];
    for ch in 0..3 {
        for row in 0..size {
            let v = if row < size / 2 { CEILING[ch] } else { FLOOR[ch] };
            data[(ch * size + row) * size..(ch * size + row + 1) * size].fill(v);
        }
    }
    CameraImage { width: size, height: size, data }
}

/// Column-raycast first-person render. Deterministic.
pub fn render_image(world: &WorldMap, pose: &Pose, cfg: &SensorConfig) -> CameraImage {
    let n = cfg.image_size;
    let mut img = background(n);
    let focal = (n as f64 / 2.0) / libm::tan(cfg.fov / 2.0);
    let horizon = n as f64 / 2.0;
    for col in 0..n {
        let angle = cfg.column_angle(pose.heading, col, n);
        let Some(hit) = cast(world, pose.position(), angle, DEPTH_MAX) else { continue };
        let perp = (hit.distance * libm::cos(angle - pose.heading)).max(1e-3);
        let (color, top) = material_look(hit.material);
        let face = match hit.face {
            Face::X { .. } => 1.0,
            Face::Y { .. } => 0.8,
            Face::Other => 0.9,
        };
        let shade = face / (1.0 + hit.distance);
        let y_top = horizon - focal * (top - CAMERA_Z) / perp;
        let y_bot = horizon + focal * CAMERA_Z / perp;
        let r0 = libm::floor(y_top).max(0.0) as usize;
        let r1 = (libm::ceil(y_bot).max(0.0) as usize).min(n);
        for row in r0..r1 {
            for ch in 0..3 {
                img.data[(ch * n + row) * n + col] = (color[ch] as f64 * shade) as f32;
            }
        }
    }
    img
}
