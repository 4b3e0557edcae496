//! Checkpoints are a manifest (tensor names, shapes and element offsets) plus
//! one flat blob of little-endian `f32` values in manifest order.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{NetConfig, NetworkParams, NnError, Tensor};

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset in elements (not bytes) into the blob.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Manifest {
    pub net: NetConfig,
    pub entries: Vec<ManifestEntry>,
    /// Total element count of the blob.
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckpointError {
    #[error("blob holds {got} bytes but the manifest describes {expected}")]
    Length { expected: usize, got: usize },
    #[error("manifest entry `{name}` disagrees with the network layout")]
    Layout { name: String },
    #[error(transparent)]
    Network(#[from] NnError),
}

pub fn encode(params: &NetworkParams<f32>) -> (Manifest, Vec<u8>) {
    let mut entries = Vec::new();
    let mut blob = Vec::with_capacity(params.parameter_count() * 4);
    let mut offset = 0;
    for (name, t) in params.names().into_iter().zip(params.tensors()) {
        entries.push(ManifestEntry { name: name.to_string(), shape: t.shape().to_vec(), offset });
        offset += t.len();
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    (Manifest { net: params.config().clone(), entries, total: offset }, blob)
}

pub fn decode(manifest: &Manifest, blob: &[u8]) -> Result<NetworkParams<f32>, CheckpointError> {
    if blob.len() != manifest.total * 4 {
        return Err(CheckpointError::Length { expected: manifest.total * 4, got: blob.len() });
    }
    let layout = manifest.net.layout();
    if layout.len() != manifest.entries.len() {
        return Err(NnError::TensorCount { expected: layout.len(), got: manifest.entries.len() }.into());
    }
    let mut tensors = Vec::with_capacity(layout.len());
    let mut expected_offset = 0;
    for ((name, shape), e) in layout.iter().zip(&manifest.entries) {
        if e.name != *name || e.shape != *shape || e.offset != expected_offset {
            return Err(CheckpointError::Layout { name: e.name.clone() });
        }
        let n: usize = shape.iter().product();
        let bytes = &blob[e.offset * 4..(e.offset + n) * 4];
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push(Tensor::from_vec(shape, data).ok_or(CheckpointError::Layout { name: e.name.clone() })?);
        expected_offset += n;
    }
    if expected_offset != manifest.total {
        return Err(CheckpointError::Length { expected: expected_offset * 4, got: blob.len() });
    }
    Ok(NetworkParams::from_tensors(manifest.net.clone(), tensors)?)
}
