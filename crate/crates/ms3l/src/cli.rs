//! `ms3l` command line.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ms3l_core::eval::{
    angular_histogram, at_iteration_zero, beta_ablation, evaluate, ComparisonRow, Evaluation, Policy, TaskSpec,
};
use ms3l_core::nn::NetworkParams;
use ms3l_core::trainer::{
    continue_ms3l, pretrain, pretrain_from_demonstrations, run_dagger, run_ms3l, Head, IterationReport, Run,
    TrainHooks,
};
use ms3l_core::world::fixtures;

use crate::bridge::{self, ServeOptions, Session, StatusHooks};
use crate::config::ExperimentConfig;
use crate::report::{export_report, ReportInputs};
use crate::{io, Error};

#[derive(Debug, Parser)]
#[command(name = "ms3l", version, about = "Self-supervised multi-sensory imitation learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the training and evaluation seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Use the scripted oracle as the demonstrator instead of recorded teleop data.
    #[arg(long)]
    pub headless: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Collect demonstrations and pre-train both policies (iteration 0).
    Pretrain {
        #[command(flatten)]
        common: Common,
        /// Teleop demonstrations for the navigation policy (without --headless).
        #[arg(long)]
        nav_demos: Option<PathBuf>,
        /// Teleop demonstrations for the recording policy (without --headless).
        #[arg(long)]
        rec_demos: Option<PathBuf>,
    },
    /// Continue a pre-trained run in <out>/ms3l through iteration k.
    Selftrain {
        #[command(flatten)]
        common: Common,
    },
    /// Pre-training followed by k self-supervised iterations.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// DAgger baseline with the oracle labeling every frame.
    Dagger {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a policy on a task.
    Eval {
        #[command(flatten)]
        common: Common,
        /// `sensor`, `oracle`, `ms3l`, `dagger`, or a checkpoint path.
        #[arg(long)]
        policy: String,
        /// `hallway`, `hallway-peds`, `classroom` or `noise`.
        #[arg(long)]
        task: String,
    },
    /// Evaluate the saved runs and write the report tables.
    Report {
        #[command(flatten)]
        common: Common,
        /// Also run the β ablation (three extra training runs to iteration 3).
        #[arg(long)]
        ablation: bool,
    },
    /// Serve the teleop bridge.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Advance one tick per driver command instead of on the clock.
        #[arg(long)]
        lockstep: bool,
        /// Run MS3L training in the background and publish status messages.
        #[arg(long)]
        train: bool,
    },
}

/// Prints iteration summaries to stderr.
struct Progress {
    start: Instant,
    label: &'static str,
}

impl Progress {
    fn new(label: &'static str) -> Self {
        Self { start: Instant::now(), label }
    }
}

impl TrainHooks for Progress {
    fn now(&mut self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn epoch(&mut self, iteration: u32, head: Head, epoch: usize, loss: f64) {
        if head == Head::Navigation && (epoch + 1) % 10 == 0 {
            eprintln!("[{}] iteration {iteration} epoch {} loss {loss:.6}", self.label, epoch + 1);
        }
    }

    fn iteration(&mut self, r: &IterationReport) {
        eprintln!(
            "[{}] iteration {}: recorded {}/{} aggregate {} nav val {:.6} collisions {} ({:.1} s)",
            self.label,
            r.iteration,
            r.recorded,
            r.encountered,
            r.aggregate,
            r.nav_val_loss,
            r.collisions,
            r.wall_time
        );
    }
}

fn load_config(c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load_or_default(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.set_seed(s);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn ms3l_dir(out: &Path) -> PathBuf {
    out.join("ms3l")
}

pub fn dagger_dir(out: &Path) -> PathBuf {
    out.join("dagger")
}

fn require_headless(c: &Common, what: &str) -> Result<(), Error> {
    if c.headless {
        Ok(())
    } else {
        Err(Error::Usage(format!("{what} needs the oracle as labeler; pass --headless")))
    }
}

fn task_world(task: &TaskSpec) -> Result<ms3l_core::world::WorldMap, Error> {
    fixtures::by_name(&task.map).ok_or_else(|| Error::Map(format!("no bundled map `{}`", task.map)))
}

enum Loaded {
    Network(NetworkParams<f32>),
    Sensor,
    Oracle,
}

fn load_policy(spec: &str, out: &Path) -> Result<(String, Loaded), Error> {
    Ok(match spec {
        "sensor" => ("sensor".into(), Loaded::Sensor),
        "oracle" => ("oracle".into(), Loaded::Oracle),
        "ms3l" => ("MS3L".into(), Loaded::Network(io::final_checkpoint(&ms3l_dir(out))?)),
        "dagger" => ("DAgger".into(), Loaded::Network(io::final_checkpoint(&dagger_dir(out))?)),
        path => {
            let p = Path::new(path);
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.into());
            (name, Loaded::Network(io::load_checkpoint(p)?))
        }
    })
}

fn run_eval(cfg: &ExperimentConfig, policy: &Loaded, task: &TaskSpec) -> Result<Evaluation, Error> {
    let p = match policy {
        Loaded::Network(n) => Policy::Network(n),
        Loaded::Sensor => Policy::Sensor(cfg.train.sensor_policy.clone()),
        Loaded::Oracle => Policy::Oracle(cfg.train.oracle.clone()),
    };
    let world = task_world(task)?;
    Ok(evaluate(&p, task, &world, &cfg.train.sensors, cfg.train.fps, cfg.eval.seed))
}

fn episodes_table(digest: &str, e: &Evaluation) -> String {
    let mut s = format!("# config_sha256={digest}\nepisode\tdistance\ttime_to_collision\tcollided\n");
    for (i, ep) in e.episodes.iter().enumerate() {
        s += &format!("{i}\t{:.6}\t{:.6}\t{}\n", ep.distance, ep.time_to_collision, ep.collided);
    }
    s += &format!("mean\t{:.6}\t{:.6}\t\n", e.mean_distance, e.mean_time);
    s
}

fn write_file(path: &Path, body: &str) -> Result<(), Error> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Angular-label histograms of iteration 0 and of the pooled later iterations.
pub fn label_histograms(run: &Run) -> Vec<(&'static str, Vec<u64>)> {
    let mut out = Vec::new();
    let first: Vec<_> = run.d_nav.iteration(0).collect();
    if let Ok((h, _)) = angular_histogram(first.iter().copied(), 20) {
        out.push(("iteration_0", h));
    }
    let rest: Vec<_> = run.d_nav.samples().iter().filter(|s| s.iteration > 0).collect();
    let (h, _) = angular_histogram(rest.iter().copied(), 20).unwrap_or((vec![0; 20], 0.0));
    out.push(("iterations_1_to_k", h));
    out
}

pub fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Pretrain { common, nav_demos, rec_demos } => {
            let cfg = load_config(&common)?;
            let tc = cfg.train_config();
            let run = if common.headless {
                pretrain(&cfg.world()?, &tc, &mut Progress::new("pretrain"))?
            } else {
                let (Some(n), Some(r)) = (nav_demos, rec_demos) else {
                    return Err(Error::Usage(
                        "pretrain without --headless needs --nav-demos and --rec-demos (teleop recordings)".into(),
                    ));
                };
                let (dn, dr) = (io::load_dataset(&n)?, io::load_dataset(&r)?);
                pretrain_from_demonstrations(dn, dr, &tc, &mut Progress::new("pretrain"))?
            };
            io::save_run(&ms3l_dir(&common.out), &run, &cfg)
        }
        Command::Selftrain { common } => {
            let cfg = load_config(&common)?;
            let dir = ms3l_dir(&common.out);
            let mut run = io::load_run(&dir)?;
            continue_ms3l(&cfg.world()?, &mut run, &cfg.train_config(), cfg.train.k, &mut Progress::new("selftrain"))?;
            io::save_run(&dir, &run, &cfg)
        }
        Command::Run { common } => {
            require_headless(&common, "run")?;
            let cfg = load_config(&common)?;
            let run = run_ms3l(&cfg.world()?, &cfg.train_config(), &mut Progress::new("ms3l"))?;
            io::save_run(&ms3l_dir(&common.out), &run, &cfg)
        }
        Command::Dagger { common } => {
            require_headless(&common, "dagger")?;
            let cfg = load_config(&common)?;
            let run = run_dagger(&cfg.world()?, &cfg.train_config(), &mut Progress::new("dagger"))?;
            io::save_run(&dagger_dir(&common.out), &run, &cfg)
        }
        Command::Eval { common, policy, task } => {
            let cfg = load_config(&common)?;
            let t = cfg.task(&task)?;
            let (label, loaded) = load_policy(&policy, &common.out)?;
            let e = run_eval(&cfg, &loaded, &t)?;
            let table = episodes_table(&cfg.digest(), &e);
            print!("{table}");
            write_file(&common.out.join("eval").join(format!("{label}_{task}.tsv")), &table)
        }
        Command::Report { common, ablation } => {
            let cfg = load_config(&common)?;
            let ms3l = io::load_run(&ms3l_dir(&common.out))?;
            let dagger_reports = io::load_reports(&dagger_dir(&common.out))?;
            let policies = [
                ("MS3L", Loaded::Network(ms3l.params.clone())),
                ("sensor", Loaded::Sensor),
                ("oracle", Loaded::Oracle),
                ("DAgger", Loaded::Network(io::final_checkpoint(&dagger_dir(&common.out))?)),
            ];
            let mut comparison = Vec::new();
            for (name, p) in &policies {
                for task in ["hallway-peds", "classroom", "noise"] {
                    let e = run_eval(&cfg, p, &cfg.task(task)?)?;
                    eprintln!("{name} on {task}: {:.3} m, {:.3} s", e.mean_distance, e.mean_time);
                    comparison.push(ComparisonRow {
                        policy: (*name).into(),
                        task: task.into(),
                        mean_distance: e.mean_distance,
                        mean_time: e.mean_time,
                    });
                }
            }
            let rows = if ablation {
                let tc = cfg.train_config();
                let world = cfg.world()?;
                let task = cfg.task("hallway")?;
                let start = at_iteration_zero(&ms3l)?;
                Some(beta_ablation(&world, &task_world(&task)?, &tc, &start, &cfg.eval.betas, &task, cfg.eval.seed)?)
            } else {
                None
            };
            let histograms = label_histograms(&ms3l);
            let digest = cfg.digest();
            let files = export_report(
                &common.out.join("report"),
                &ReportInputs {
                    digest: &digest,
                    ms3l: &ms3l.reports,
                    dagger: Some(&dagger_reports),
                    comparison: &comparison,
                    histograms: &histograms,
                    ablation: rows.as_deref(),
                },
            )?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Serve { common, port, lockstep, train } => {
            let cfg = load_config(&common)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io(Path::new("tokio runtime"), e))?;
            rt.block_on(serve(cfg, common, port, lockstep, train))
        }
    }
}

async fn serve(cfg: ExperimentConfig, common: Common, port: u16, lockstep: bool, train: bool) -> Result<(), Error> {
    let world = cfg.world()?;
    let params = match &cfg.bridge.checkpoint {
        Some(p) => Some(io::load_checkpoint(Path::new(p))?),
        None => None,
    };
    let session = Session::new(world.clone(), cfg.train_config(), params, cfg.bridge.wire_image);
    let opts = ServeOptions {
        host: cfg.bridge.host.clone(),
        port,
        tick_hz: cfg.bridge.tick_hz,
        lockstep,
        backlog: cfg.bridge.backlog,
        ui_dir: PathBuf::from(&cfg.bridge.ui_dir),
    };
    let handle = bridge::serve(session, opts).await?;
    eprintln!("serving ws://{}/ws", handle.addr);
    let trainer = train.then(|| {
        let (hub, cfg, out) = (handle.hub.clone(), cfg.clone(), common.out.clone());
        std::thread::spawn(move || -> Result<(), Error> {
            let run = run_ms3l(&world, &cfg.train_config(), &mut StatusHooks(hub))?;
            io::save_run(&ms3l_dir(&out), &run, &cfg)
        })
    });
    tokio::signal::ctrl_c().await.map_err(|e| Error::io(Path::new("signal"), e))?;
    let (demos, log) = {
        let s = handle.session.lock().expect("session lock");
        (s.demos().clone(), s.log().clone())
    };
    handle.shutdown().await;
    let dir = common.out.join("teleop");
    io::save_dataset(&dir.join("demos.ms3l"), &demos)?;
    write_file(&dir.join("commands.json"), &serde_json::to_string_pretty(&log).expect("serializable"))?;
    eprintln!("saved {} demonstration samples to {}", demos.len(), dir.display());
    if let Some(t) = trainer {
        if t.is_finished() {
            t.join().expect("trainer thread")?;
        }
    }
    Ok(())
}
