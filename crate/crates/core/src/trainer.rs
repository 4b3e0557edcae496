//! Pre-training, self-supervised aggregation iterations and the DAgger
//! baseline.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::action::Action;
use crate::dataset::{Dataset, DatasetError, DepthStats, LabelSource, LabeledSample};
use crate::episode::{jittered_spawn, Sim};
use crate::nn::{idx, AdamConfig, Gradients, NetConfig, NetworkParams, NnError, OptimState, Workspace};
use crate::oracle::{oracle_action, OracleConfig, OracleError, RouteDirection};
use crate::policies::{gate, label_recording_batch, RecordingExample, Thresholds};
use crate::rng::{rng_for, stream};
use crate::sensor_policy::{depth_reject, Branch, SensorPolicy, SensorPolicyConfig};
use crate::sensors::{CameraImage, Observation, SensorConfig};
use crate::world::{Pose, StepError, WorldMap};

/// Which aggregate the navigation policy is retrained on each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "kebab-case"))]
pub enum Aggregate {
    /// `D^i`, the previous aggregate plus this iteration's kept samples.
    #[default]
    Full,
    /// `D^{i-1}`, ignoring this iteration's samples until the next one.
    Previous,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub seed: u64,
    pub net: NetConfig,
    pub sensors: SensorConfig,
    pub sensor_policy: SensorPolicyConfig,
    pub oracle: OracleConfig,
    pub thresholds: Thresholds,
    pub lr_nav: f64,
    pub lr_rec: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub rec_epochs: usize,
    pub batch_size: usize,
    pub k: usize,
    pub episode_seconds: f64,
    pub fps: u32,
    /// Continue from the previous iteration's weights instead of re-initializing.
    pub warm_start: bool,
    pub aggregate: Aggregate,
    /// Let the recording loss backpropagate into the shared trunk.
    pub bce_into_trunk: bool,
    /// Position (m) and heading (rad) jitter of policy-run spawns.
    pub spawn_jitter: (f64, f64),
    /// Embedded into every dataset written by the run.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub provenance: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            net: NetConfig::desk(),
            sensors: SensorConfig::default(),
            sensor_policy: SensorPolicyConfig::default(),
            oracle: OracleConfig::default(),
            thresholds: Thresholds::default(),
            lr_nav: 1e-4,
            lr_rec: 1e-3,
            weight_decay: 1e-4,
            epochs: 50,
            rec_epochs: 50,
            batch_size: 32,
            k: 4,
            episode_seconds: 60.0,
            fps: 10,
            warm_start: true,
            aggregate: Aggregate::Full,
            bce_into_trunk: false,
            spawn_jitter: (0.1, 0.1),
            provenance: String::new(),
        }
    }
}

impl TrainConfig {
    pub fn frames(&self) -> usize {
        libm::round(self.episode_seconds * self.fps as f64) as usize
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m| Err(TrainError::Config(m));
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if self.batch_size == 0 || self.frames() < self.batch_size {
            return bad("episode_seconds * fps must be at least the batch size");
        }
        if self.fps == 0 {
            return bad("fps must be positive");
        }
        if self.sensors.image_size != self.net.input_size {
            return bad("camera image size must equal the network input size");
        }
        if self.sensors.depth_width % 3 != 0 {
            return bad("depth width must be divisible by 3");
        }
        let t = &self.thresholds;
        if !((0.0..=1.0).contains(&t.gamma) && t.tau > 0.0 && t.beta > 0.0 && t.beta < 1.0) {
            return bad("thresholds out of range");
        }
        if !(self.lr_nav > 0.0 && self.lr_rec > 0.0 && self.weight_decay >= 0.0) {
            return bad("learning rates must be positive");
        }
        self.sensor_policy.validate().map_err(|_| TrainError::Config("invalid sensor policy config"))?;
        self.net.validate().map_err(TrainError::Nn)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(&'static str),
    #[error("demonstration ({route}) collided at t = {t:.2} s; demonstrations must be clean")]
    DemonstrationCollision { route: &'static str, t: f64 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Step(#[from] StepError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Navigation,
    Recording,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: u32,
    pub encountered: usize,
    pub recorded: usize,
    /// Size of the navigation aggregate after this iteration.
    pub aggregate: usize,
    pub nav_val_loss: f64,
    pub rec_val_loss: Option<f64>,
    /// Mean training loss per epoch.
    pub nav_curve: Vec<f64>,
    pub rec_curve: Vec<f64>,
    pub collisions: u32,
    /// Seconds reported by [`TrainHooks::now`]; excluded from byte-stable outputs.
    pub wall_time: f64,
}

/// What happened on one collected frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub pose: Pose,
    pub nav: Action,
    pub p_r: f64,
    pub sensor: Action,
    pub branch: Branch,
    pub kept: bool,
}

/// Progress callbacks. Every method has a no-op default.
pub trait TrainHooks {
    /// Monotone clock in seconds.
    fn now(&mut self) -> f64 {
        0.0
    }
    fn epoch(&mut self, _iteration: u32, _head: Head, _epoch: usize, _loss: f64) {}
    fn frame(&mut self, _iteration: u32, _frame: &FrameRecord, _image: &CameraImage) {}
    fn iteration(&mut self, _report: &IterationReport) {}
}

pub struct NoHooks;
impl TrainHooks for NoHooks {}

/// State of a training run after any number of iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    /// Trunk, navigation head and recording head.
    pub params: NetworkParams<f32>,
    pub d_nav: Dataset,
    /// Recording-policy demonstrations (empty for DAgger).
    pub d_rec: Dataset,
    pub reports: Vec<IterationReport>,
    /// Parameters after each iteration, index = iteration.
    pub checkpoints: Vec<NetworkParams<f32>>,
}

impl Run {
    pub fn total_recorded(&self) -> usize {
        self.reports.iter().map(|r| r.recorded).sum()
    }
    pub fn total_encountered(&self) -> usize {
        self.reports.iter().map(|r| r.encountered).sum()
    }
}

fn to_target(a: Action) -> [f32; 2] {
    [a.v as f32, a.w as f32]
}

/// Builds a dataset sample from one observation: runs the sensor policy for
/// the sensor label and takes the training label from `human` unless the
/// source is the sensor policy. Returns the sensor branch as well.
pub fn make_sample(
    obs: &Observation,
    sensor: &mut SensorPolicy,
    human: Option<Action>,
    source: LabelSource,
    p_r: Option<f64>,
    iteration: u32,
) -> (LabeledSample, Branch) {
    let summary = depth_reject(&obs.depth, sensor.cfg.reject_fraction);
    let decision = sensor.act(&obs.depth, obs.ultrasonic);
    let training_label = match source {
        LabelSource::Sensor => decision.action,
        _ => human.expect("human label for a demonstration sample"),
    };
    let s = LabeledSample {
        image: obs.image.clone(),
        depth: DepthStats::from(&summary),
        ultrasonic: obs.ultrasonic,
        sensor_label: decision.action,
        branch: decision.branch,
        human_label: human,
        training_label,
        source,
        p_r,
        iteration,
    };
    (s, decision.branch)
}

/// Drives the oracle along the route from the spawn and records every frame.
pub fn collect_demonstration(
    world: &WorldMap,
    cfg: &TrainConfig,
    direction: RouteDirection,
) -> Result<Vec<LabeledSample>, TrainError> {
    let (route, start, stream_id) = match direction {
        RouteDirection::Forward => ("forward", world.spawn, stream::DEMO_NAV),
        RouteDirection::Reverse => (
            "reverse",
            Pose::new(world.spawn.x, world.spawn.y, world.spawn.heading + core::f64::consts::PI),
            stream::DEMO_REC,
        ),
    };
    let ocfg = OracleConfig { direction, ..cfg.oracle.clone() };
    let mut rng = rng_for(cfg.seed, stream_id);
    let mut sim = Sim::new(world.clone(), start, cfg.fps);
    let mut sensor = SensorPolicy::new(cfg.sensor_policy.clone());
    let mut out = Vec::with_capacity(cfg.frames());
    for _ in 0..cfg.frames() {
        let obs = sim.observe(&cfg.sensors, &mut rng);
        let a = oracle_action(&sim.world, &sim.state, &ocfg)?;
        out.push(make_sample(&obs, &mut sensor, Some(a), LabelSource::Oracle, None, 0).0);
        if sim.step(a)?.collided {
            return Err(TrainError::DemonstrationCollision { route, t: sim.time() });
        }
    }
    Ok(out)
}

/// Labeling rule for frames collected by the learned policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Labeler {
    /// Keep sensor-labeled frames whose recording probability exceeds β.
    Gated { beta: f64 },
    /// Keep every frame, labeled by the oracle.
    Oracle,
}

pub struct Collection {
    pub samples: Vec<LabeledSample>,
    pub encountered: usize,
    pub collisions: u32,
}

/// Runs the navigation policy for one episode budget, restarting at a
/// (jittered) spawn after each collision.
pub fn collect_with_policy(
    world: &WorldMap,
    params: &NetworkParams<f32>,
    cfg: &TrainConfig,
    iteration: u32,
    labeler: Labeler,
    hooks: &mut dyn TrainHooks,
) -> Result<Collection, TrainError> {
    let mut rng = rng_for(cfg.seed, stream::COLLECT + iteration as u64);
    let (jp, jh) = cfg.spawn_jitter;
    let start = jittered_spawn(world, jp, jh, &mut rng);
    let mut sim = Sim::new(world.clone(), start, cfg.fps);
    let mut sensor = SensorPolicy::new(cfg.sensor_policy.clone());
    let mut ws = Workspace::new();
    let mut samples = Vec::new();
    let mut collisions = 0;
    let ocfg = &cfg.oracle;
    for _ in 0..cfg.frames() {
        let obs = sim.observe(&cfg.sensors, &mut rng);
        params.forward_ws(&obs.image.data, &mut ws)?;
        let [v, w] = ws.nav();
        let nav = Action::new(v as f64, w as f64);
        let p_r = ws.p_r() as f64;
        let (sample, branch, kept) = match labeler {
            Labeler::Gated { beta } => {
                let keep = gate(p_r, beta);
                let (s, b) = make_sample(&obs, &mut sensor, None, LabelSource::Sensor, Some(p_r), iteration);
                (s, b, keep)
            }
            Labeler::Oracle => {
                let a = oracle_action(&sim.world, &sim.state, ocfg)?;
                let (s, b) = make_sample(&obs, &mut sensor, Some(a), LabelSource::Oracle, None, iteration);
                (s, b, true)
            }
        };
        let record = FrameRecord { pose: sim.state.pose, nav, p_r, sensor: sample.sensor_label, branch, kept };
        hooks.frame(iteration, &record, &obs.image);
        if kept {
            samples.push(sample);
        }
        if sim.step(nav)?.collided {
            collisions += 1;
            let p = jittered_spawn(world, jp, jh, &mut rng);
            sim.respawn(p);
            sensor.reset();
        }
    }
    Ok(Collection { samples, encountered: cfg.frames(), collisions })
}

/// Mini-batch Adam on the imitation loss over `data`, restricted to the
/// trunk and navigation head. Returns the mean batch loss per epoch.
pub fn train_navigation(
    params: &mut NetworkParams<f32>,
    data: &[(&[f32], [f32; 2])],
    cfg: &TrainConfig,
    iteration: u32,
    hooks: &mut dyn TrainHooks,
) -> Result<Vec<f64>, TrainError> {
    let mut curve = Vec::with_capacity(cfg.epochs);
    if data.is_empty() {
        return Ok(curve);
    }
    let mut opt = OptimState::new(AdamConfig::new(cfg.lr_nav, cfg.weight_decay), params, idx::NAVIGATION);
    let mut rng = rng_for(cfg.seed, stream::SHUFFLE + 2 * iteration as u64);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut ws = Workspace::new();
    let mut grads = Gradients::zeros_like(params);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut n) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i]));
            sum += params.backward_mse_into(&batch, &mut ws, &mut grads)?;
            n += 1;
            opt.step(params, &grads);
        }
        let loss = sum / n as f64;
        hooks.epoch(iteration, Head::Navigation, epoch, loss);
        curve.push(loss);
    }
    Ok(curve)
}

/// Mini-batch Adam on the recording BCE over cached `fc5` features.
pub fn train_recording(
    params: &mut NetworkParams<f32>,
    data: &[RecordingExample],
    cfg: &TrainConfig,
    iteration: u32,
    hooks: &mut dyn TrainHooks,
) -> Result<Vec<f64>, TrainError> {
    let mut curve = Vec::with_capacity(cfg.rec_epochs);
    if data.is_empty() {
        return Ok(curve);
    }
    let mut opt = OptimState::new(AdamConfig::new(cfg.lr_rec, cfg.weight_decay), params, idx::RECORDING);
    let mut rng = rng_for(cfg.seed, stream::SHUFFLE + 2 * iteration as u64 + 1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut ws = Workspace::new();
    let mut grads = Gradients::zeros_like(params);
    let mut batch: Vec<(&[f32], bool)> = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.rec_epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut n) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| (data[i].fc5.as_slice(), data[i].label)));
            sum += params.backward_bce_features_into(&batch, &mut ws, &mut grads)?;
            n += 1;
            opt.step(params, &grads);
        }
        let loss = sum / n as f64;
        hooks.epoch(iteration, Head::Recording, epoch, loss);
        curve.push(loss);
    }
    Ok(curve)
}

/// Recording BCE through the whole network (trunk included), image batches.
fn train_recording_through_trunk(
    params: &mut NetworkParams<f32>,
    data: &[(&[f32], bool)],
    cfg: &TrainConfig,
    iteration: u32,
    hooks: &mut dyn TrainHooks,
) -> Result<Vec<f64>, TrainError> {
    let mut curve = Vec::with_capacity(cfg.rec_epochs);
    if data.is_empty() {
        return Ok(curve);
    }
    let groups = [idx::TRUNK.start..idx::TRUNK.end, idx::RECORDING];
    let mut opts: Vec<_> = groups
        .iter()
        .map(|g| OptimState::new(AdamConfig::new(cfg.lr_rec, cfg.weight_decay), params, g.clone()))
        .collect();
    let mut rng = rng_for(cfg.seed, stream::SHUFFLE + 2 * iteration as u64 + 1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.rec_epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut n) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| data[i]).collect();
            let (loss, grads) = params.backward_bce_images(&batch, true)?;
            sum += loss;
            n += 1;
            for o in &mut opts {
                o.step(params, &grads);
            }
        }
        let loss = sum / n as f64;
        hooks.epoch(iteration, Head::Recording, epoch, loss);
        curve.push(loss);
    }
    Ok(curve)
}

fn nav_pairs<'a>(d: &'a Dataset, which: &[usize]) -> Vec<(&'a [f32], [f32; 2])> {
    which
        .iter()
        .map(|&i| {
            let s = &d.samples()[i];
            (s.image.data.as_slice(), to_target(s.training_label))
        })
        .collect()
}

fn nav_val_loss(params: &NetworkParams<f32>, d: &Dataset, val: &[usize]) -> Result<f64, TrainError> {
    if val.is_empty() {
        return Ok(f64::NAN);
    }
    Ok(params.mse_loss(&nav_pairs(d, val), &mut Workspace::new())?)
}

fn retrain_navigation(
    params: &mut NetworkParams<f32>,
    d: &Dataset,
    cfg: &TrainConfig,
    iteration: u32,
    hooks: &mut dyn TrainHooks,
) -> Result<(Vec<f64>, f64), TrainError> {
    if !cfg.warm_start && iteration > 0 {
        let mut rng = rng_for(cfg.seed ^ iteration as u64, stream::INIT);
        let fresh = NetworkParams::init(cfg.net.clone(), &mut rng)?;
        for i in idx::NAVIGATION {
            params.tensors_mut()[i] = fresh.tensors()[i].clone();
        }
    }
    let (train, val) = d.split();
    let curve = train_navigation(params, &nav_pairs(d, &train), cfg, iteration, hooks)?;
    Ok((curve, nav_val_loss(params, d, &val)?))
}

/// Relabels `D_rec ∪ D_nav` against the current navigation weights and
/// retrains the recording head.
fn retrain_recording(
    params: &mut NetworkParams<f32>,
    d_rec: &Dataset,
    d_nav: &Dataset,
    cfg: &TrainConfig,
    iteration: u32,
    hooks: &mut dyn TrainHooks,
) -> Result<(Vec<f64>, f64), TrainError> {
    let (rt, rv) = d_rec.split();
    let (nt, nv) = d_nav.split();
    let train: Vec<&LabeledSample> =
        rt.iter().map(|&i| &d_rec.samples()[i]).chain(nt.iter().map(|&i| &d_nav.samples()[i])).collect();
    let val: Vec<&LabeledSample> =
        rv.iter().map(|&i| &d_rec.samples()[i]).chain(nv.iter().map(|&i| &d_nav.samples()[i])).collect();
    let th = &cfg.thresholds;
    let train_ex = label_recording_batch(&train, params, th)?;
    let curve = if cfg.bce_into_trunk {
        let pairs: Vec<(&[f32], bool)> =
            train.iter().zip(&train_ex).map(|(s, e)| (s.image.data.as_slice(), e.label)).collect();
        train_recording_through_trunk(params, &pairs, cfg, iteration, hooks)?
    } else {
        train_recording(params, &train_ex, cfg, iteration, hooks)?
    };
    let val_ex = label_recording_batch(&val, params, th)?;
    let val_loss = if val_ex.is_empty() {
        f64::NAN
    } else {
        let batch: Vec<(&[f32], bool)> = val_ex.iter().map(|e| (e.fc5.as_slice(), e.label)).collect();
        params.bce_loss_features(&batch)?
    };
    Ok((curve, val_loss))
}

/// Pre-training from supplied demonstrations: fits the navigation head on
/// `d_nav`, then the recording head on `d_rec ∪ d_nav`.
pub fn pretrain_from_demonstrations(
    d_nav: Dataset,
    d_rec: Dataset,
    cfg: &TrainConfig,
    hooks: &mut dyn TrainHooks,
) -> Result<Run, TrainError> {
    cfg.validate()?;
    let t0 = hooks.now();
    let mut params = NetworkParams::init(cfg.net.clone(), &mut rng_for(cfg.seed, stream::INIT))?;
    let (nav_curve, nav_val) = retrain_navigation(&mut params, &d_nav, cfg, 0, hooks)?;
    let (rec_curve, rec_val) = retrain_recording(&mut params, &d_rec, &d_nav, cfg, 0, hooks)?;
    let report = IterationReport {
        iteration: 0,
        encountered: d_nav.len(),
        recorded: d_nav.len(),
        aggregate: d_nav.len(),
        nav_val_loss: nav_val,
        rec_val_loss: Some(rec_val),
        nav_curve,
        rec_curve,
        collisions: 0,
        wall_time: hooks.now() - t0,
    };
    hooks.iteration(&report);
    Ok(Run { checkpoints: alloc::vec![params.clone()], params, d_nav, d_rec, reports: alloc::vec![report] })
}

fn demo_datasets(world: &WorldMap, cfg: &TrainConfig) -> Result<(Dataset, Dataset), TrainError> {
    let mut d_nav = Dataset::new(&cfg.provenance);
    d_nav.extend(collect_demonstration(world, cfg, RouteDirection::Forward)?)?;
    let mut d_rec = Dataset::new(&cfg.provenance);
    d_rec.extend(collect_demonstration(world, cfg, RouteDirection::Reverse)?)?;
    Ok((d_nav, d_rec))
}

/// Oracle demonstrations along the forward (navigation data) and reverse
/// (recording data) routes, then pre-training.
pub fn pretrain(world: &WorldMap, cfg: &TrainConfig, hooks: &mut dyn TrainHooks) -> Result<Run, TrainError> {
    cfg.validate()?;
    let (d_nav, d_rec) = demo_datasets(world, cfg)?;
    pretrain_from_demonstrations(d_nav, d_rec, cfg, hooks)
}

/// One gated self-supervised iteration `i ≥ 1` on top of `run`.
pub fn self_supervised_iteration(
    i: u32,
    world: &WorldMap,
    run: &mut Run,
    cfg: &TrainConfig,
    hooks: &mut dyn TrainHooks,
) -> Result<(), TrainError> {
    let t0 = hooks.now();
    let beta = cfg.thresholds.beta;
    let col = collect_with_policy(world, &run.params, cfg, i, Labeler::Gated { beta }, hooks)?;
    let recorded = col.samples.len();
    let previous = run.d_nav.clone();
    run.d_nav.extend(col.samples)?;
    let train_on = match cfg.aggregate {
        Aggregate::Full => &run.d_nav,
        Aggregate::Previous => &previous,
    };
    let (nav_curve, nav_val) = retrain_navigation(&mut run.params, train_on, cfg, i, hooks)?;
    let (rec_curve, rec_val) = retrain_recording(&mut run.params, &run.d_rec, &run.d_nav, cfg, i, hooks)?;
    let report = IterationReport {
        iteration: i,
        encountered: col.encountered,
        recorded,
        aggregate: run.d_nav.len(),
        nav_val_loss: nav_val,
        rec_val_loss: Some(rec_val),
        nav_curve,
        rec_curve,
        collisions: col.collisions,
        wall_time: hooks.now() - t0,
    };
    hooks.iteration(&report);
    run.reports.push(report);
    run.checkpoints.push(run.params.clone());
    Ok(())
}

/// Pre-training followed by `k` self-supervised iterations.
pub fn run_ms3l(world: &WorldMap, cfg: &TrainConfig, hooks: &mut dyn TrainHooks) -> Result<Run, TrainError> {
    let mut run = pretrain(world, cfg, hooks)?;
    continue_ms3l(world, &mut run, cfg, cfg.k, hooks)?;
    Ok(run)
}

/// Runs self-supervised iterations until `run` has reached iteration `until`.
pub fn continue_ms3l(
    world: &WorldMap,
    run: &mut Run,
    cfg: &TrainConfig,
    until: usize,
    hooks: &mut dyn TrainHooks,
) -> Result<(), TrainError> {
    cfg.validate()?;
    while run.reports.len() <= until {
        let i = run.reports.len() as u32;
        self_supervised_iteration(i, world, run, cfg, hooks)?;
    }
    Ok(())
}

/// DAgger baseline: same schedule, but every frame the policy visits is
/// recorded and labeled by the oracle. No recording head is trained.
pub fn run_dagger(world: &WorldMap, cfg: &TrainConfig, hooks: &mut dyn TrainHooks) -> Result<Run, TrainError> {
    cfg.validate()?;
    let t0 = hooks.now();
    let mut d_nav = Dataset::new(&cfg.provenance);
    d_nav.extend(collect_demonstration(world, cfg, RouteDirection::Forward)?)?;
    let mut params = NetworkParams::init(cfg.net.clone(), &mut rng_for(cfg.seed, stream::INIT))?;
    let (nav_curve, nav_val) = retrain_navigation(&mut params, &d_nav, cfg, 0, hooks)?;
    let report = IterationReport {
        iteration: 0,
        encountered: d_nav.len(),
        recorded: d_nav.len(),
        aggregate: d_nav.len(),
        nav_val_loss: nav_val,
        rec_val_loss: None,
        nav_curve,
        rec_curve: Vec::new(),
        collisions: 0,
        wall_time: hooks.now() - t0,
    };
    hooks.iteration(&report);
    let mut run = Run {
        checkpoints: alloc::vec![params.clone()],
        params,
        d_nav,
        d_rec: Dataset::new(&cfg.provenance),
        reports: alloc::vec![report],
    };
    for i in 1..=cfg.k as u32 {
        let t0 = hooks.now();
        let col = collect_with_policy(world, &run.params, cfg, i, Labeler::Oracle, hooks)?;
        let recorded = col.samples.len();
        run.d_nav.extend(col.samples)?;
        let (nav_curve, nav_val) = retrain_navigation(&mut run.params, &run.d_nav, cfg, i, hooks)?;
        let report = IterationReport {
            iteration: i,
            encountered: col.encountered,
            recorded,
            aggregate: run.d_nav.len(),
            nav_val_loss: nav_val,
            rec_val_loss: None,
            nav_curve,
            rec_curve: Vec::new(),
            collisions: col.collisions,
            wall_time: hooks.now() - t0,
        };
        hooks.iteration(&report);
        run.reports.push(report);
        run.checkpoints.push(run.params.clone());
    }
    Ok(run)
}
