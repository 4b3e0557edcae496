//! Evaluation episodes, the β ablation, label histograms and report tables.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::action::Action;
use crate::dataset::{Dataset, LabeledSample};
use crate::episode::{jittered_spawn, Sim};
use crate::nn::{NetworkParams, Workspace};
use crate::oracle::{oracle_action, OracleConfig};
use crate::rng::{rng_for, stream};
use crate::sensor_policy::{SensorPolicy, SensorPolicyConfig};
use crate::sensors::{read_ultrasonic, render_depth, render_image, SensorConfig};
use crate::trainer::{continue_ms3l, NoHooks, Run, TrainConfig, TrainError, TrainHooks};
use crate::world::{Pose, WorldMap};

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    pub map: String,
    pub pedestrians: bool,
    /// Standard deviation of Gaussian noise added to each normalized command.
    pub control_noise_sigma: f64,
    pub episodes: usize,
    pub max_seconds: f64,
    /// Position (m) and heading (rad) jitter of each episode's spawn.
    pub spawn_jitter: (f64, f64),
}

impl TaskSpec {
    pub fn new(name: &str, map: &str) -> Self {
        Self {
            name: name.into(),
            map: map.into(),
            pedestrians: true,
            control_noise_sigma: 0.0,
            episodes: 5,
            max_seconds: 250.0,
            spawn_jitter: (0.1, 0.1),
        }
    }

    pub fn hallway() -> Self {
        Self::new("hallway", "hallway")
    }

    /// Heavy walking traffic.
    pub fn hallway_peds() -> Self {
        Self::new("hallway-peds", "hallway-peds")
    }

    pub fn classroom() -> Self {
        Self::new("classroom", "classroom")
    }

    /// Unit Gaussian noise on the controller, hallway map.
    pub fn noise() -> Self {
        Self { control_noise_sigma: 1.0, ..Self::new("noise", "hallway") }
    }

    /// The three comparison tasks.
    pub fn comparison() -> [TaskSpec; 3] {
        [Self::hallway_peds(), Self::classroom(), Self::noise()]
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.control_noise_sigma >= 0.0) {
            return Err("control_noise_sigma must be non-negative");
        }
        if self.episodes == 0 {
            return Err("episodes must be at least 1");
        }
        if !(self.max_seconds > 0.0) {
            return Err("max_seconds must be positive");
        }
        Ok(())
    }
}

/// A controller under evaluation.
#[derive(Debug, Clone)]
pub enum Policy<'a> {
    Network(&'a NetworkParams<f32>),
    Sensor(SensorPolicyConfig),
    Oracle(OracleConfig),
    Constant(Action),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub distance: f64,
    pub time_to_collision: f64,
    pub collided: bool,
    /// Pose at the start and after every tick.
    pub trajectory: Vec<Pose>,
    /// Commands actually executed (after noise and clamping).
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub episodes: Vec<EpisodeResult>,
    pub mean_distance: f64,
    pub mean_time: f64,
}

/// Arc length of a pose sequence.
pub fn path_length(trajectory: &[Pose]) -> f64 {
    trajectory.windows(2).map(|w| w[0].position().dist(w[1].position())).sum()
}

/// Runs `task.episodes` episodes of `policy` on `world` (pedestrians removed
/// when the task disables them).
pub fn evaluate(
    policy: &Policy<'_>,
    task: &TaskSpec,
    world: &WorldMap,
    sensors: &SensorConfig,
    fps: u32,
    seed: u64,
) -> Evaluation {
    let world = if task.pedestrians { world.clone() } else { world.without_pedestrians() };
    let episodes: Vec<_> = (0..task.episodes)
        .map(|e| run_episode(policy, task, &world, sensors, fps, seed, e as u64))
        .collect();
    let n = episodes.len() as f64;
    let mean_distance = episodes.iter().map(|e| e.distance).sum::<f64>() / n;
    let mean_time = episodes.iter().map(|e| e.time_to_collision).sum::<f64>() / n;
    Evaluation { episodes, mean_distance, mean_time }
}

fn run_episode(
    policy: &Policy<'_>,
    task: &TaskSpec,
    world: &WorldMap,
    sensors: &SensorConfig,
    fps: u32,
    seed: u64,
    episode: u64,
) -> EpisodeResult {
    let mut rng = rng_for(seed, stream::EVAL + episode);
    let (jp, jh) = task.spawn_jitter;
    let start = jittered_spawn(world, jp, jh, &mut rng);
    let mut sim = Sim::new(world.clone(), start, fps);
    let mut sensor = match policy {
        Policy::Sensor(cfg) => Some(SensorPolicy::new(cfg.clone())),
        _ => None,
    };
    let mut ws = Workspace::new();
    let max_ticks = libm::round(task.max_seconds * fps as f64) as u64;
    let mut trajectory = Vec::with_capacity(max_ticks as usize + 1);
    let mut actions = Vec::with_capacity(max_ticks as usize);
    trajectory.push(sim.state.pose);
    let mut ttc = task.max_seconds;
    let mut collided = false;

    while sim.tick < max_ticks {
        let a = match policy {
            Policy::Network(p) => {
                let img = render_image(&sim.world, &sim.state.pose, sensors);
                p.forward_ws(&img.data, &mut ws).expect("image matches network input");
                let [v, w] = ws.nav();
                Action::new(v as f64, w as f64)
            }
            Policy::Sensor(_) => {
                let depth = render_depth(&sim.world, &sim.state.pose, sensors, &mut rng);
                let us = read_ultrasonic(&sim.world, &sim.state.pose, sensors, &mut rng);
                sensor.as_mut().expect("sensor policy state").act(&depth, us).action
            }
            Policy::Oracle(cfg) => oracle_action(&sim.world, &sim.state, cfg).unwrap_or(Action::STOP),
            Policy::Constant(a) => *a,
        };
        let a = if task.control_noise_sigma > 0.0 {
            let s = task.control_noise_sigma;
            let nv: f64 = rng.sample(StandardNormal);
            let nw: f64 = rng.sample(StandardNormal);
            Action::new(a.v + s * nv, a.w + s * nw)
        } else {
            a
        };
        actions.push(a);
        let before = sim.state.t;
        let ticks_done = sim.tick;
        let state = *sim.step(a).expect("episode stops at the first collision");
        trajectory.push(state.pose);
        if state.collided {
            collided = true;
            ttc = (ticks_done as f64 / fps as f64 + (state.t - before)).min(task.max_seconds);
            break;
        }
    }
    EpisodeResult { distance: path_length(&trajectory), time_to_collision: ttc, collided, trajectory, actions }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub beta: f64,
    /// Samples recorded over iterations 1..=3.
    pub recorded: usize,
    pub mean_distance: f64,
    pub mean_time: f64,
}

/// The state of `run` right after pre-training.
pub fn at_iteration_zero(run: &Run) -> Result<Run, TrainError> {
    let mut d_nav = Dataset::new(&run.d_nav.provenance);
    d_nav.extend(run.d_nav.iteration(0).cloned())?;
    Ok(Run {
        params: run.checkpoints[0].clone(),
        d_nav,
        d_rec: run.d_rec.clone(),
        reports: run.reports[..1].to_vec(),
        checkpoints: run.checkpoints[..1].to_vec(),
    })
}

/// Continues MS3L from the pre-trained state of `pretrained` to iteration 3
/// once per β and evaluates the iteration-3 policy on `task`.
pub fn beta_ablation(
    world: &WorldMap,
    eval_world: &WorldMap,
    cfg: &TrainConfig,
    pretrained: &Run,
    betas: &[f64],
    task: &TaskSpec,
    eval_seed: u64,
) -> Result<Vec<AblationRow>, TrainError> {
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let mut c = cfg.clone();
        c.thresholds.beta = beta;
        let mut run = at_iteration_zero(pretrained)?;
        continue_ms3l(world, &mut run, &c, 3, &mut NoHooks as &mut dyn TrainHooks)?;
        let ev = evaluate(&Policy::Network(&run.checkpoints[3]), task, eval_world, &c.sensors, c.fps, eval_seed);
        rows.push(AblationRow {
            beta,
            recorded: run.reports[1..=3].iter().map(|r| r.recorded).sum(),
            mean_distance: ev.mean_distance,
            mean_time: ev.mean_time,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("histogram of an empty slice")]
pub struct EmptySlice;

/// Histogram of `w_norm` training labels over `[-1, 1]` and its Shannon
/// entropy in nats.
pub fn angular_histogram<'a>(
    samples: impl IntoIterator<Item = &'a LabeledSample>,
    bins: usize,
) -> Result<(Vec<u64>, f64), EmptySlice> {
    histogram(samples.into_iter().map(|s| s.training_label.w), bins)
}

pub fn histogram(values: impl IntoIterator<Item = f64>, bins: usize) -> Result<(Vec<u64>, f64), EmptySlice> {
    let mut h = alloc::vec![0u64; bins];
    let mut n = 0u64;
    for w in values {
        let b = libm::floor((w.clamp(-1.0, 1.0) + 1.0) / 2.0 * bins as f64) as usize;
        h[b.min(bins - 1)] += 1;
        n += 1;
    }
    if n == 0 {
        return Err(EmptySlice);
    }
    Ok((h.clone(), entropy(&h)))
}

pub fn entropy(h: &[u64]) -> f64 {
    let n: u64 = h.iter().sum();
    h.iter()
        .filter(|c| **c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * libm::log(p)
        })
        .fold(0.0, |a, x| a + x)
}

/// One evaluated (policy, task) cell of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub policy: String,
    pub task: String,
    pub mean_distance: f64,
    pub mean_time: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| String::from("-"), |x| format!("{x:.6}"))
}

/// Per-iteration losses, one row per iteration.
pub fn losses_table(reports: &[crate::trainer::IterationReport]) -> String {
    let mut s = String::from("iteration\tnav_train_loss\tnav_val_loss\trec_train_loss\trec_val_loss\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{}\t{}\t{:.6}\t{}\t{}",
            r.iteration,
            opt(r.nav_curve.last().copied()),
            r.nav_val_loss,
            opt(r.rec_curve.last().copied()),
            opt(r.rec_val_loss)
        );
    }
    s
}

/// Encountered and recorded frames per iteration, one column per iteration.
pub fn counts_table(runs: &[(&str, &[crate::trainer::IterationReport])]) -> String {
    let n = runs.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
    let mut s = String::from("run\tquantity");
    for i in 0..n {
        let _ = write!(s, "\t{i}");
    }
    s.push_str("\ttotal\n");
    for (name, reports) in runs {
        for (q, f) in [
            ("encountered", (|r: &crate::trainer::IterationReport| r.encountered) as fn(&_) -> usize),
            ("recorded", |r| r.recorded),
        ] {
            let _ = write!(s, "{name}\t{q}");
            for r in reports.iter() {
                let _ = write!(s, "\t{}", f(r));
            }
            let _ = writeln!(s, "\t{}", reports.iter().map(f).sum::<usize>());
        }
    }
    s
}

pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("policy\ttask\tmean_distance_m\tmean_time_to_collision_s\n");
    for r in rows {
        let _ = writeln!(s, "{}\t{}\t{:.6}\t{:.6}", r.policy, r.task, r.mean_distance, r.mean_time);
    }
    s
}

/// Histograms side by side, one column per named series.
pub fn histogram_table(series: &[(&str, &[u64])]) -> String {
    let bins = series.first().map_or(0, |(_, h)| h.len());
    let mut s = String::from("bin_lo\tbin_hi");
    for (name, _) in series {
        let _ = write!(s, "\t{name}");
    }
    s.push('\n');
    for b in 0..bins {
        let lo = -1.0 + 2.0 * b as f64 / bins as f64;
        let hi = -1.0 + 2.0 * (b + 1) as f64 / bins as f64;
        let _ = write!(s, "{lo:.2}\t{hi:.2}");
        for (_, h) in series {
            let _ = write!(s, "\t{}", h[b]);
        }
        s.push('\n');
    }
    s.push_str("entropy_nats\t");
    for (_, h) in series {
        let _ = write!(s, "\t{:.6}", entropy(h));
    }
    s.push('\n');
    s
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut s = String::from("beta\trecorded\tmean_distance_m\tmean_time_to_collision_s\n");
    for r in rows {
        let _ = writeln!(s, "{}\t{}\t{:.6}\t{:.6}", r.beta, r.recorded, r.mean_distance, r.mean_time);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{fixtures, Cell, Grid};

    #[test]
    fn constant_drive_into_wall() {
        // wall face at x = 3.0, robot center at x = 1.83 facing it
        let mut g = Grid::filled(8, 16, Cell::Free);
        for r in 0..8 {
            for c in 0..16 {
                if r == 0 || r == 7 || c == 0 || c >= 12 {
                    g.set(r, c, Cell::Wall);
                }
            }
        }
        let w = WorldMap::new("w", g, 0.25, Pose::new(3.0 - 1.17, 1.0, 0.0), Vec::new(), Vec::new()).unwrap();
        let task = TaskSpec { spawn_jitter: (0.0, 0.0), episodes: 1, max_seconds: 10.0, ..TaskSpec::hallway() };
        let ev = evaluate(&Policy::Constant(Action::new(1.0, 0.0)), &task, &w, &SensorConfig::default(), 10, 0);
        let ev = &ev.episodes[0];
        assert!(ev.collided);
        assert!((ev.time_to_collision - 2.0).abs() < 1e-9, "{}", ev.time_to_collision);
        assert!((ev.distance - 1.0).abs() < 1e-6);
    }

    #[test]
    fn histogram_examples() {
        let (h, e) = histogram([0.0; 10], 20).unwrap();
        assert_eq!(h.iter().filter(|c| **c > 0).count(), 1);
        assert_eq!(e, 0.0);
        let centers: Vec<f64> = (0..20).map(|b| -1.0 + 0.1 * b as f64 + 0.05).collect();
        let (h, e) = histogram(centers, 20).unwrap();
        assert!(h.iter().all(|c| *c == 1));
        assert!((e - libm::log(20.0)).abs() < 1e-12);
        assert_eq!(histogram(core::iter::empty(), 20), Err(EmptySlice));
    }

    #[test]
    fn noise_moves_the_zero_policy() {
        let w = fixtures::hallway();
        let task = TaskSpec { episodes: 2, max_seconds: 5.0, ..TaskSpec::noise() };
        let zero = NetworkParams::zeros(crate::nn::NetConfig::desk()).unwrap();
        let ev = evaluate(&Policy::Network(&zero), &task, &w, &SensorConfig::default(), 10, 3);
        for e in &ev.episodes {
            assert!(e.distance > 0.0);
            assert!(e.actions.iter().all(|a| a.v.abs() <= 1.0 && a.w.abs() <= 1.0));
            assert!((e.distance - path_length(&e.trajectory)).abs() < 1e-9);
            assert!(e.time_to_collision <= task.max_seconds);
        }
    }
}
