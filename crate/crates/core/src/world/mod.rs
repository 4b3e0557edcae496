//! Occupancy-grid world, differential-drive kinematics, pedestrians and
//! collision detection.

mod map_format;
pub mod fixtures;
pub mod raycast;

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt::Write;

use crate::action::Action;

pub use map_format::{load_map, MapError, ParseError};

/// Robot footprint radius in meters.
pub const ROBOT_RADIUS: f64 = 0.17;
/// Collision substeps per integration tick.
pub const SUBSTEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Free,
    Wall,
    Furniture,
}

impl Cell {
    pub fn is_occupied(self) -> bool {
        self != Cell::Free
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
    pub fn dist(self, o: Vec2) -> f64 {
        libm::hypot(self.x - o.x, self.y - o.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Radians in `[-π, π)`, counter-clockwise from +x.
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading: wrap_angle(heading) }
    }
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let two_pi = 2.0 * PI;
    let mut w = a - two_pi * libm::floor((a + PI) / two_pi);
    if w >= PI {
        w -= two_pi;
    }
    if w < -PI {
        w += two_pi;
    }
    w
}

/// Occupancy grid. Row 0 is the top line of the map text; world `y` grows
/// upward, so row `r` spans `y ∈ [(rows-1-r)·cell, (rows-r)·cell)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, cells: Vec<Cell>) -> Option<Self> {
        (cells.len() == rows * cols).then_some(Self { rows, cols, cells })
    }

    pub fn filled(rows: usize, cols: usize, cell: Cell) -> Self {
        Self { rows, cols, cells: alloc::vec![cell; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Option<Cell> {
        (row < self.rows && col < self.cols).then(|| self.cells[row * self.cols + col])
    }

    pub fn set(&mut self, row: usize, col: usize, cell: Cell) {
        self.cells[row * self.cols + col] = cell;
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Lookup by bottom-up cell indices; anything outside the grid is wall.
    pub fn at_xy_index(&self, ix: i64, iy: i64) -> Cell {
        if ix < 0 || iy < 0 || ix >= self.cols as i64 || iy >= self.rows as i64 {
            return Cell::Wall;
        }
        let row = self.rows - 1 - iy as usize;
        self.cells[row * self.cols + ix as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PedestrianSpec {
    pub start: Vec2,
    /// Waypoints visited cyclically after `start`.
    pub path: Vec<Vec2>,
    pub speed: f64,
    pub radius: f64,
}

/// A pedestrian's spec plus its current position and next waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Pedestrian {
    pub spec: PedestrianSpec,
    pub position: Vec2,
    pub next: usize,
}

impl Pedestrian {
    pub fn new(spec: PedestrianSpec) -> Self {
        Self { position: spec.start, next: 0, spec }
    }

    /// Moves `speed·dt` along the cyclic path, carrying leftover distance
    /// past each reached waypoint.
    pub fn advance(&mut self, dt: f64) {
        let n = self.spec.path.len();
        if n == 0 || self.spec.speed <= 0.0 {
            return;
        }
        let mut remaining = self.spec.speed * dt;
        // A full lap with nowhere to go would otherwise spin forever.
        let mut zero_hops = 0;
        while remaining > 0.0 && zero_hops <= n {
            let target = self.spec.path[self.next];
            let d = self.position.dist(target);
            if d > remaining {
                let f = remaining / d;
                self.position.x += (target.x - self.position.x) * f;
                self.position.y += (target.y - self.position.y) * f;
                return;
            }
            self.position = target;
            remaining -= d;
            self.next = (self.next + 1) % n;
            zero_hops = if d == 0.0 { zero_hops + 1 } else { 0 };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    pub name: alloc::string::String,
    pub grid: Grid,
    /// Meters per cell edge.
    pub cell_size: f64,
    pub spawn: Pose,
    /// Route waypoints (world coordinates) in index order; a closed loop.
    pub route: Vec<Vec2>,
    pub pedestrians: Vec<Pedestrian>,
}

impl WorldMap {
    /// Builds and validates a map.
    pub fn new(
        name: &str,
        grid: Grid,
        cell_size: f64,
        spawn: Pose,
        route: Vec<Vec2>,
        pedestrians: Vec<PedestrianSpec>,
    ) -> Result<Self, MapError> {
        let map = Self {
            name: name.into(),
            grid,
            cell_size,
            spawn,
            route,
            pedestrians: pedestrians.into_iter().map(Pedestrian::new).collect(),
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), MapError> {
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(MapError::CellSize);
        }
        if self.grid.rows < 3 || self.grid.cols < 3 {
            return Err(MapError::TooSmall { rows: self.grid.rows, cols: self.grid.cols });
        }
        if self.cell_at(self.spawn.position()).is_occupied() {
            return Err(MapError::SpawnOccupied);
        }
        for (k, w) in self.route.iter().enumerate() {
            if self.cell_at(*w).is_occupied() {
                return Err(MapError::WaypointOccupied(k));
            }
        }
        for (k, p) in self.pedestrians.iter().enumerate() {
            if !(p.spec.speed >= 0.0) || !(p.spec.radius > 0.0) {
                return Err(MapError::Pedestrian(k));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.grid.cols as f64 * self.cell_size
    }

    pub fn height(&self) -> f64 {
        self.grid.rows as f64 * self.cell_size
    }

    /// Center of cell `(row, col)`.
    pub fn cell_center(&self, row: usize, col: usize) -> Vec2 {
        Vec2::new(
            (col as f64 + 0.5) * self.cell_size,
            (self.grid.rows as f64 - row as f64 - 0.5) * self.cell_size,
        )
    }

    pub fn cell_index(&self, p: Vec2) -> (i64, i64) {
        (
            libm::floor(p.x / self.cell_size) as i64,
            libm::floor(p.y / self.cell_size) as i64,
        )
    }

    pub fn cell_at(&self, p: Vec2) -> Cell {
        let (ix, iy) = self.cell_index(p);
        self.grid.at_xy_index(ix, iy)
    }

    /// True when a disc of `radius` at `p` overlaps an occupied cell (or
    /// leaves the grid).
    pub fn disc_hits_static(&self, p: Vec2, radius: f64) -> bool {
        let cs = self.cell_size;
        let x0 = libm::floor((p.x - radius) / cs) as i64;
        let x1 = libm::floor((p.x + radius) / cs) as i64;
        let y0 = libm::floor((p.y - radius) / cs) as i64;
        let y1 = libm::floor((p.y + radius) / cs) as i64;
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                if !self.grid.at_xy_index(ix, iy).is_occupied() {
                    continue;
                }
                let (lx, hx) = (ix as f64 * cs, (ix + 1) as f64 * cs);
                let (ly, hy) = (iy as f64 * cs, (iy + 1) as f64 * cs);
                let dx = p.x - p.x.clamp(lx, hx);
                let dy = p.y - p.y.clamp(ly, hy);
                if dx * dx + dy * dy < radius * radius {
                    return true;
                }
            }
        }
        false
    }

    pub fn disc_hits_pedestrian(&self, p: Vec2, radius: f64) -> bool {
        self.pedestrians.iter().any(|ped| {
            let r = radius + ped.spec.radius;
            let (dx, dy) = (p.x - ped.position.x, p.y - ped.position.y);
            dx * dx + dy * dy < r * r
        })
    }

    /// Robot-disc collision test against walls, furniture and pedestrians.
    pub fn robot_collides(&self, p: Vec2) -> bool {
        self.disc_hits_static(p, ROBOT_RADIUS) || self.disc_hits_pedestrian(p, ROBOT_RADIUS)
    }

    /// Same map with every pedestrian removed.
    pub fn without_pedestrians(&self) -> Self {
        Self { pedestrians: Vec::new(), ..self.clone() }
    }

    /// Length of the closed route polyline in meters.
    pub fn route_length(&self) -> f64 {
        let n = self.route.len();
        (0..n).map(|i| self.route[i].dist(self.route[(i + 1) % n])).sum()
    }

    /// Plain-text description of the parsed map, one `key: value` per line.
    pub fn summary(&self) -> String {
        let count = |c: Cell| self.grid.cells().iter().filter(|x| **x == c).count();
        let mut s = String::new();
        let _ = writeln!(s, "name: {}", self.name);
        let _ = writeln!(s, "grid: {} rows x {} cols", self.grid.rows(), self.grid.cols());
        let _ = writeln!(s, "cell_size: {} m", self.cell_size);
        let _ = writeln!(s, "extent: {:.2} x {:.2} m", self.width(), self.height());
        let _ = writeln!(s, "cells: free={} wall={} furniture={}", count(Cell::Free), count(Cell::Wall), count(Cell::Furniture));
        let _ = writeln!(s, "spawn: ({:.3}, {:.3}) heading {:.4}", self.spawn.x, self.spawn.y, self.spawn.heading);
        let _ = writeln!(s, "route: {} waypoints, closed, {:.2} m per loop", self.route.len(), self.route_length());
        for (i, w) in self.route.iter().enumerate() {
            let _ = writeln!(s, "  W{i}: ({:.3}, {:.3})", w.x, w.y);
        }
        let _ = writeln!(s, "pedestrians: {}", self.pedestrians.len());
        for p in &self.pedestrians {
            let _ = writeln!(
                s,
                "  speed {} radius {} path {} points",
                p.spec.speed,
                p.spec.radius,
                p.spec.path.len()
            );
        }
        s
    }
}

/// Advances every pedestrian by `dt` seconds.
pub fn step_pedestrians(world: &WorldMap, dt: f64) -> WorldMap {
    let mut next = world.clone();
    step_pedestrians_in_place(&mut next, dt);
    next
}

pub fn step_pedestrians_in_place(world: &mut WorldMap, dt: f64) {
    for p in &mut world.pedestrians {
        p.advance(dt);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub pose: Pose,
    pub last_action: Action,
    /// Latched once set.
    pub collided: bool,
    /// Elapsed seconds.
    pub t: f64,
}

impl RobotState {
    pub fn at(pose: Pose) -> Self {
        Self { pose, last_action: Action::STOP, collided: false, t: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("stepped a robot that has already collided")]
    AlreadyCollided,
    #[error("time step must be positive and finite")]
    BadTimeStep,
}

/// One explicit-Euler tick of unicycle kinematics with a swept-disc
/// collision check over [`SUBSTEPS`] substeps. On contact the pose and clock
/// stop at the first touching point (refined by bisection) and `collided` is
/// set.
pub fn step(world: &WorldMap, s: &RobotState, a: Action, dt: f64) -> Result<RobotState, StepError> {
    if s.collided {
        return Err(StepError::AlreadyCollided);
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(StepError::BadTimeStep);
    }
    let (v, w) = a.denormalize();
    let th0 = s.pose.heading;
    let (dx, dy) = (v * libm::cos(th0) * dt, v * libm::sin(th0) * dt);
    let at = |f: f64| Vec2::new(s.pose.x + dx * f, s.pose.y + dy * f);

    let mut prev = 0.0;
    for k in 1..=SUBSTEPS {
        let f = k as f64 / SUBSTEPS as f64;
        if world.robot_collides(at(f)) {
            let (mut lo, mut hi) = (prev, f);
            if world.robot_collides(at(lo)) {
                hi = lo;
            } else {
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    if world.robot_collides(at(mid)) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
            }
            let p = at(hi);
            return Ok(RobotState {
                pose: Pose::new(p.x, p.y, th0 + w * dt * hi),
                last_action: a,
                collided: true,
                t: s.t + dt * hi,
            });
        }
        prev = f;
    }
    let p = at(1.0);
    Ok(RobotState {
        pose: Pose::new(p.x, p.y, th0 + w * dt),
        last_action: a,
        collided: false,
        t: s.t + dt,
    })
}
