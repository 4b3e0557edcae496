//! Dataset, checkpoint and run directories on disk.
//!
//! A run directory holds:
//!
//! ```text
//! config.toml            resolved experiment config
//! d_nav.ms3l, d_rec.ms3l datasets
//! reports.json           one record per iteration
//! checkpoints/iterN.json checkpoint manifest
//! checkpoints/iterN.bin  little-endian f32 blob
//! ```

use std::path::{Path, PathBuf};

use ms3l_core::dataset::Dataset;
use ms3l_core::nn::checkpoint::{self, Manifest};
use ms3l_core::nn::NetworkParams;
use ms3l_core::trainer::{IterationReport, Run};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::Error;

fn write(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>, Error> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(value).expect("serializable");
    s.push(b'\n');
    s
}

fn from_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    serde_json::from_slice(&read(path)?).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

pub fn save_dataset(path: &Path, d: &Dataset) -> Result<(), Error> {
    write(path, &d.encode())
}

pub fn load_dataset(path: &Path) -> Result<Dataset, Error> {
    Dataset::decode(&read(path)?).map_err(|source| Error::Dataset { path: path.to_path_buf(), source })
}

/// `stem.json` (manifest) and `stem.bin` (blob).
pub fn checkpoint_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

pub fn save_checkpoint(stem: &Path, params: &NetworkParams<f32>) -> Result<(), Error> {
    let (manifest, blob) = checkpoint::encode(params);
    let (m, b) = checkpoint_paths(stem);
    write(&b, &blob)?;
    write(&m, &to_json(&manifest))
}

/// Loads from a manifest path, a blob path or their common stem.
pub fn load_checkpoint(path: &Path) -> Result<NetworkParams<f32>, Error> {
    let (m, b) = checkpoint_paths(path);
    let manifest: Manifest = from_json(&m)?;
    checkpoint::decode(&manifest, &read(&b)?).map_err(|source| Error::Checkpoint { path: b, source })
}

/// JSON form of [`IterationReport`]; non-finite losses become `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub iteration: u32,
    pub encountered: usize,
    pub recorded: usize,
    pub aggregate: usize,
    pub nav_val_loss: Option<f64>,
    pub rec_val_loss: Option<f64>,
    pub nav_curve: Vec<Option<f64>>,
    pub rec_curve: Vec<Option<f64>>,
    pub collisions: u32,
    pub wall_time: f64,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&IterationReport> for ReportRecord {
    fn from(r: &IterationReport) -> Self {
        Self {
            iteration: r.iteration,
            encountered: r.encountered,
            recorded: r.recorded,
            aggregate: r.aggregate,
            nav_val_loss: finite(r.nav_val_loss),
            rec_val_loss: r.rec_val_loss.and_then(finite),
            nav_curve: r.nav_curve.iter().map(|&x| finite(x)).collect(),
            rec_curve: r.rec_curve.iter().map(|&x| finite(x)).collect(),
            collisions: r.collisions,
            wall_time: r.wall_time,
        }
    }
}

impl From<ReportRecord> for IterationReport {
    fn from(r: ReportRecord) -> Self {
        let nan = |x: Option<f64>| x.unwrap_or(f64::NAN);
        Self {
            iteration: r.iteration,
            encountered: r.encountered,
            recorded: r.recorded,
            aggregate: r.aggregate,
            nav_val_loss: nan(r.nav_val_loss),
            rec_val_loss: r.rec_val_loss,
            nav_curve: r.nav_curve.into_iter().map(nan).collect(),
            rec_curve: r.rec_curve.into_iter().map(nan).collect(),
            collisions: r.collisions,
            wall_time: r.wall_time,
        }
    }
}

pub fn checkpoint_stem(dir: &Path, iteration: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("iter{iteration}"))
}

pub fn save_run(dir: &Path, run: &Run, cfg: &ExperimentConfig) -> Result<(), Error> {
    write(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;
    save_dataset(&dir.join("d_nav.ms3l"), &run.d_nav)?;
    save_dataset(&dir.join("d_rec.ms3l"), &run.d_rec)?;
    let records: Vec<ReportRecord> = run.reports.iter().map(Into::into).collect();
    write(&dir.join("reports.json"), &to_json(&records))?;
    for (i, p) in run.checkpoints.iter().enumerate() {
        save_checkpoint(&checkpoint_stem(dir, i), p)?;
    }
    Ok(())
}

pub fn load_reports(dir: &Path) -> Result<Vec<IterationReport>, Error> {
    let records: Vec<ReportRecord> = from_json(&dir.join("reports.json"))?;
    Ok(records.into_iter().map(Into::into).collect())
}

pub fn load_run(dir: &Path) -> Result<Run, Error> {
    let reports = load_reports(dir)?;
    if reports.is_empty() {
        return Err(Error::Usage(format!("{}: run has no iterations", dir.display())));
    }
    let checkpoints =
        (0..reports.len()).map(|i| load_checkpoint(&checkpoint_stem(dir, i))).collect::<Result<Vec<_>, _>>()?;
    Ok(Run {
        params: checkpoints.last().expect("nonempty").clone(),
        d_nav: load_dataset(&dir.join("d_nav.ms3l"))?,
        d_rec: load_dataset(&dir.join("d_rec.ms3l"))?,
        reports,
        checkpoints,
    })
}

/// Final checkpoint of a run directory.
pub fn final_checkpoint(dir: &Path) -> Result<NetworkParams<f32>, Error> {
    let n = load_reports(dir)?.len();
    if n == 0 {
        return Err(Error::Usage(format!("{}: run has no iterations", dir.display())));
    }
    load_checkpoint(&checkpoint_stem(dir, n - 1))
}
