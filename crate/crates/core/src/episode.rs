//! Fixed-rate simulation loop state shared by data collection, evaluation
//! and the teleop bridge.

use rand::Rng;

use crate::action::Action;
use crate::sensors::{observe, Observation, SensorConfig};
use crate::world::{step, step_pedestrians_in_place, Pose, RobotState, StepError, WorldMap};

#[derive(Debug, Clone)]
pub struct Sim {
    initial: WorldMap,
    pub world: WorldMap,
    pub state: RobotState,
    pub fps: u32,
    /// Ticks since the last `reset`.
    pub tick: u64,
}

impl Sim {
    pub fn new(world: WorldMap, start: Pose, fps: u32) -> Self {
        Self { initial: world.clone(), world, state: RobotState::at(start), fps, tick: 0 }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fps as f64
    }

    /// Seconds since reset, from the tick count.
    pub fn time(&self) -> f64 {
        self.tick as f64 / self.fps as f64
    }

    pub fn observe<R: Rng + ?Sized>(&self, cfg: &SensorConfig, rng: &mut R) -> Observation {
        observe(&self.world, &self.state.pose, cfg, rng)
    }

    /// Moves pedestrians, then the robot, by one tick.
    pub fn step(&mut self, a: Action) -> Result<&RobotState, StepError> {
        if self.state.collided {
            return Err(StepError::AlreadyCollided);
        }
        let dt = self.dt();
        step_pedestrians_in_place(&mut self.world, dt);
        self.state = step(&self.world, &self.state, a, dt)?;
        self.tick += 1;
        Ok(&self.state)
    }

    /// Puts the robot back at `pose` without touching pedestrians or the clock.
    pub fn respawn(&mut self, pose: Pose) {
        self.state = RobotState { t: self.state.t, ..RobotState::at(pose) };
    }

    /// Restores the initial world and puts the robot at `pose` with a zero clock.
    pub fn reset(&mut self, pose: Pose) {
        self.world = self.initial.clone();
        self.state = RobotState::at(pose);
        self.tick = 0;
    }
}

/// Spawn pose perturbed by up to `pos` meters per axis and `heading` radians,
/// retried until the robot disc is clear (falls back to the exact spawn).
pub fn jittered_spawn<R: Rng + ?Sized>(world: &WorldMap, pos: f64, heading: f64, rng: &mut R) -> Pose {
    let s = world.spawn;
    if pos <= 0.0 && heading <= 0.0 {
        return s;
    }
    for _ in 0..16 {
        let dx = if pos > 0.0 { rng.random_range(-pos..pos) } else { 0.0 };
        let dy = if pos > 0.0 { rng.random_range(-pos..pos) } else { 0.0 };
        let dh = if heading > 0.0 { rng.random_range(-heading..heading) } else { 0.0 };
        let p = Pose::new(s.x + dx, s.y + dy, s.heading + dh);
        if !world.robot_collides(p.position()) {
            return p;
        }
    }
    s
}
