//! Imitation loss, deviation, record indicator and recording gate.

use alloc::vec::Vec;

use crate::action::Action;
use crate::dataset::LabeledSample;
use crate::nn::{NetworkParams, NnError, Workspace};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct Thresholds {
    /// Weight of the human term in the deviation.
    pub gamma: f64,
    /// Deviation above which a sample counts as hard.
    pub tau: f64,
    /// Recording probability a sample must exceed to be kept.
    pub beta: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { gamma: 0.8, tau: 0.00025, beta: 0.99 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("outputs and labels differ in length")]
    LengthMismatch,
}

/// `1/N Σ ||out_i − label_i||²`.
pub fn imitation_loss(outputs: &[Action], labels: &[Action]) -> Result<f64, PolicyError> {
    if outputs.len() != labels.len() {
        return Err(PolicyError::LengthMismatch);
    }
    if outputs.is_empty() {
        return Err(PolicyError::EmptyBatch);
    }
    let sum: f64 = outputs.iter().zip(labels).map(|(o, l)| o.squared_distance(*l)).sum();
    Ok(sum / outputs.len() as f64)
}

/// `γ·||nav − human||² + (1 − γ)·||nav − sensor||²`, falling back to the
/// single available term when one label is missing.
///
/// # Panics
/// When neither label is present.
pub fn deviation(nav: Action, human: Option<Action>, sensor: Option<Action>, gamma: f64) -> f64 {
    match (human, sensor) {
        (Some(h), Some(s)) => gamma * nav.squared_distance(h) + (1.0 - gamma) * nav.squared_distance(s),
        (Some(h), None) => nav.squared_distance(h),
        (None, Some(s)) => nav.squared_distance(s),
        (None, None) => panic!("deviation needs at least one reference label"),
    }
}

/// 1 iff `e > τ`.
pub fn record_indicator(e: f64, tau: f64) -> bool {
    e > tau
}

/// Keep iff `p_r > β`.
pub fn gate(p_r: f64, beta: f64) -> bool {
    p_r > beta
}

/// Recording-head training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingExample {
    pub fc5: Vec<f32>,
    pub label: bool,
    pub deviation: f64,
}

/// Re-runs the current navigation network on every sample and labels it as
/// hard (`ε = 1`) or easy.
pub fn label_recording_batch(
    samples: &[&LabeledSample],
    params: &NetworkParams<f32>,
    th: &Thresholds,
) -> Result<Vec<RecordingExample>, NnError> {
    let mut ws = Workspace::new();
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        params.forward_ws(&s.image.data, &mut ws)?;
        let [v, w] = ws.nav();
        let nav = Action::new(v as f64, w as f64);
        let e = deviation(nav, s.human_label, Some(s.sensor_label), th.gamma);
        out.push(RecordingExample { fc5: ws.fc5().to_vec(), label: record_indicator(e, th.tau), deviation: e });
    }
    Ok(out)
}
