//! The simulation behind the bridge: one robot driven by the latest command,
//! optional demonstration recording, and a command log that replays headlessly.

use base64::Engine as _;
use ms3l_core::action::Action;
use ms3l_core::dataset::{Dataset, LabelSource};
use ms3l_core::episode::Sim;
use ms3l_core::nn::{NetworkParams, Workspace};
use ms3l_core::rng::{rng_for, stream, Rng};
use ms3l_core::sensor_policy::{depth_reject, SensorPolicy};
use ms3l_core::sensors::{CameraImage, Observation};
use ms3l_core::trainer::{make_sample, TrainConfig};
use ms3l_core::world::{Pose, StepError, WorldMap};
use serde::{Deserialize, Serialize};

use super::wire::{ControlOp, CountsMsg, DepthMsg, ErrorMsg, ImageMsg, PoseMsg, ServerMessage, StateMsg, UltrasonicMsg};

/// Every command applied, grouped into episodes (a `reset` or a restart
/// after a collision opens a new one). Each episode starts at the map spawn.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommandLog {
    pub fps: u32,
    pub episodes: Vec<Vec<[f64; 2]>>,
}

/// Poses after each logged command, per episode.
pub fn replay(world: &WorldMap, log: &CommandLog) -> Result<Vec<Vec<Pose>>, StepError> {
    log.episodes
        .iter()
        .map(|ep| {
            let mut sim = Sim::new(world.clone(), world.spawn, log.fps);
            ep.iter().map(|&[v, w]| sim.step(Action::new(v, w)).map(|s| s.pose)).collect()
        })
        .collect()
}

/// Box-averages (or subsamples) `img` to `side × side` and quantizes to
/// row-major 8-bit RGB.
pub fn wire_image(img: &CameraImage, side: usize) -> ImageMsg {
    let side = side.min(img.width).min(img.height).max(1);
    let (fy, fx) = (img.height / side, img.width / side);
    let mut bytes = Vec::with_capacity(side * side * 3);
    for row in 0..side {
        for col in 0..side {
            for ch in 0..CameraImage::CHANNELS {
                let mut sum = 0.0f32;
                for dy in 0..fy {
                    for dx in 0..fx {
                        sum += img.pixel(ch, row * fy + dy, col * fx + dx);
                    }
                }
                let v = sum / (fy * fx) as f32;
                bytes.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    ImageMsg { w: side, h: side, b64: base64::engine::general_purpose::STANDARD.encode(bytes) }
}

pub struct Session {
    cfg: TrainConfig,
    wire_side: usize,
    sim: Sim,
    rng: Rng,
    sensor: SensorPolicy,
    params: Option<NetworkParams<f32>>,
    ws: Workspace<f32>,
    running: bool,
    recording: bool,
    command: Action,
    obs: Observation,
    demos: Dataset,
    log: CommandLog,
    encountered: u64,
    /// Latest training iteration reported through the bridge.
    pub iteration: u32,
}

impl Session {
    pub fn new(world: WorldMap, cfg: TrainConfig, params: Option<NetworkParams<f32>>, wire_side: usize) -> Self {
        let mut rng = rng_for(cfg.seed, stream::BRIDGE);
        let sim = Sim::new(world.clone(), world.spawn, cfg.fps);
        let obs = sim.observe(&cfg.sensors, &mut rng);
        Self {
            sensor: SensorPolicy::new(cfg.sensor_policy.clone()),
            demos: Dataset::new(&cfg.provenance),
            log: CommandLog { fps: cfg.fps, episodes: vec![Vec::new()] },
            cfg,
            wire_side,
            sim,
            rng,
            params,
            ws: Workspace::new(),
            running: false,
            recording: false,
            command: Action::STOP,
            obs,
            encountered: 0,
            iteration: 0,
        }
    }

    pub fn running(&self) -> bool {
        self.running
    }

    pub fn recording(&self) -> bool {
        self.recording
    }

    pub fn demos(&self) -> &Dataset {
        &self.demos
    }

    pub fn log(&self) -> &CommandLog {
        &self.log
    }

    pub fn pose(&self) -> Pose {
        self.sim.state.pose
    }

    /// Latest-wins: replaces the command used by every following tick.
    pub fn set_command(&mut self, a: Action) {
        self.command = a;
    }

    fn new_episode(&mut self) {
        let spawn = self.sim.world.spawn;
        self.sim.reset(spawn);
        self.sensor.reset();
        self.obs = self.sim.observe(&self.cfg.sensors, &mut self.rng);
        if !self.log.episodes.last().is_some_and(Vec::is_empty) {
            self.log.episodes.push(Vec::new());
        }
    }

    /// Applies a control op; returns a state snapshot when the visible state changed.
    pub fn control(&mut self, op: ControlOp) -> Option<ServerMessage> {
        match op {
            ControlOp::Start => {
                if self.sim.state.collided {
                    self.new_episode();
                }
                self.running = true;
            }
            ControlOp::Stop => {
                self.running = false;
                self.command = Action::STOP;
            }
            ControlOp::RecordStart => self.recording = true,
            ControlOp::RecordStop => self.recording = false,
            ControlOp::Reset => {
                self.running = false;
                self.recording = false;
                self.command = Action::STOP;
                self.new_episode();
            }
        }
        Some(self.snapshot())
    }

    /// The driver went away: stop moving and pause any recording.
    pub fn driver_lost(&mut self) -> Option<ServerMessage> {
        self.command = Action::STOP;
        if self.recording {
            self.recording = false;
            return Some(ServerMessage::Error(ErrorMsg {
                ref_seq: None,
                message: "driver disconnected; recording paused".into(),
            }));
        }
        None
    }

    /// One simulation tick with the current command. Records the frame the
    /// driver saw together with the command when recording is on.
    pub fn tick(&mut self) -> Option<ServerMessage> {
        if !self.running {
            return None;
        }
        let a = self.command;
        if self.recording {
            let (s, _) = make_sample(&self.obs, &mut self.sensor, Some(a), LabelSource::Human, None, 0);
            self.demos.push(s).expect("iteration 0 throughout");
        }
        self.encountered += 1;
        let collided = self.sim.step(a).expect("stepping only while not collided").collided;
        self.log.episodes.last_mut().expect("open episode").push([a.v, a.w]);
        self.obs = self.sim.observe(&self.cfg.sensors, &mut self.rng);
        if collided {
            self.running = false;
            self.recording = false;
            self.command = Action::STOP;
        }
        Some(self.snapshot())
    }

    pub fn snapshot(&mut self) -> ServerMessage {
        let summary = depth_reject(&self.obs.depth, self.cfg.sensor_policy.reject_fraction);
        let mean = |m: f64| m.is_finite().then_some(m);
        let p_r = match &self.params {
            Some(p) => p.forward_ws(&self.obs.image.data, &mut self.ws).ok().map(|_| self.ws.p_r() as f64),
            None => None,
        };
        let pose = self.sim.state.pose;
        ServerMessage::State(StateMsg {
            t: self.sim.state.t,
            pose: PoseMsg { x: pose.x, y: pose.y, th: pose.heading },
            image: wire_image(&self.obs.image, self.wire_side),
            depth: DepthMsg {
                left: mean(summary.means[0]),
                mid: mean(summary.means[1]),
                right: mean(summary.means[2]),
                trusted: summary.trusted,
            },
            us: UltrasonicMsg { l: self.obs.ultrasonic.left, r: self.obs.ultrasonic.right },
            p_r,
            recording: self.recording,
            counts: CountsMsg { iter: self.iteration, kept: self.demos.len(), total: self.encountered },
            collided: self.sim.state.collided,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ms3l_core::world::fixtures;

    fn session() -> Session {
        Session::new(fixtures::hallway(), TrainConfig::default(), None, 32)
    }

    fn pose_of(m: &ServerMessage) -> PoseMsg {
        match m {
            ServerMessage::State(s) => s.pose.clone(),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ticks_only_while_running() {
        let mut s = session();
        s.set_command(Action::new(0.6, 0.0));
        assert!(s.tick().is_none());
        s.control(ControlOp::Start);
        let mut last = None;
        for _ in 0..10 {
            last = s.tick();
        }
        let p = pose_of(&last.unwrap());
        assert!((p.x - fixtures::hallway().spawn.x - 0.3).abs() < 1e-12);
        assert_eq!(s.log().episodes, vec![vec![[0.6, 0.0]; 10]]);
    }

    #[test]
    fn recording_captures_exactly_the_recorded_ticks() {
        let mut s = session();
        s.set_command(Action::new(0.2, 0.1));
        s.control(ControlOp::Start);
        s.tick();
        s.control(ControlOp::RecordStart);
        for _ in 0..7 {
            s.tick();
        }
        s.control(ControlOp::RecordStop);
        s.tick();
        assert_eq!(s.demos().len(), 7);
        assert!(s.demos().samples().iter().all(|x| x.human_label == Some(Action::new(0.2, 0.1))));
        assert!(s.demos().samples().iter().all(|x| x.source == LabelSource::Human));
    }

    #[test]
    fn reset_opens_a_new_episode_and_replay_matches() {
        let mut s = session();
        s.control(ControlOp::Start);
        let mut live = vec![Vec::new()];
        for k in 0..12 {
            s.set_command(Action::new(0.5, if k % 3 == 0 { 0.2 } else { -0.1 }));
            live[0].push(s.pose_after_tick());
        }
        s.control(ControlOp::Reset);
        s.control(ControlOp::Start);
        live.push(Vec::new());
        for _ in 0..5 {
            s.set_command(Action::new(-0.3, 0.4));
            live[1].push(s.pose_after_tick());
        }
        let replayed = replay(&fixtures::hallway(), s.log()).unwrap();
        assert_eq!(replayed, live);
    }

    #[test]
    fn driver_loss_pauses_recording() {
        let mut s = session();
        s.control(ControlOp::RecordStart);
        assert!(matches!(s.driver_lost(), Some(ServerMessage::Error(_))));
        assert!(!s.recording());
        assert!(s.driver_lost().is_none());
    }

    #[test]
    fn wire_image_is_quantized_rgb() {
        let img = CameraImage { width: 4, height: 4, data: vec![1.0; 48] };
        let m = wire_image(&img, 2);
        let bytes = base64::engine::general_purpose::STANDARD.decode(&m.b64).unwrap();
        assert_eq!((m.w, m.h), (2, 2));
        assert_eq!(bytes, vec![255u8; 12]);
    }

    impl Session {
        fn pose_after_tick(&mut self) -> Pose {
            self.tick().unwrap();
            self.pose()
        }
    }
}
