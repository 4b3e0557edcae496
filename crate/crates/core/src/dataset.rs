//! Labeled samples, append-only datasets and their binary encoding.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "MS3L" u16:version u32:len provenance-utf8
//! section*  where section = tag[4] u64:len payload
//!   "ITER"  u32:n, n × u64 per-iteration counts
//!   "SMPL"  u64:n, n × record
//!   "END!"  empty, must be last
//! record = u16:w u16:h u8:channels (w·h·c) × f32 image
//!          4 × f32 depth (left/mid/right mean, rejected fraction)
//!          2 × f64 ultrasonic (left, right)
//!          2 × f64 sensor label, u8:branch
//!          u8:has_human [2 × f64 human label]
//!          2 × f64 training label, u8:source
//!          u8:has_p_r [f64 p_r]
//!          u32:iteration
//! ```
//!
//! Depth means of `+inf` mark sub-images with no kept pixels.

use alloc::string::String;
use alloc::vec::Vec;

use crate::action::Action;
use crate::sensor_policy::{Branch, DepthSummary};
use crate::sensors::{CameraImage, UltrasonicPair};

pub const MAGIC: &[u8; 4] = b"MS3L";
pub const VERSION: u16 = 1;

/// Who produced a sample's training label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum LabelSource {
    /// A person driving through the bridge.
    Human = 0,
    /// The scripted expert.
    Oracle = 1,
    Sensor = 2,
}

impl LabelSource {
    pub fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(Self::Human),
            1 => Some(Self::Oracle),
            2 => Some(Self::Sensor),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Human => "human",
            Self::Oracle => "oracle",
            Self::Sensor => "sensor",
        }
    }
}

/// Depth trust statistics kept with a sample (single precision).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthStats {
    pub means: [f32; 3],
    pub rejected_fraction: f32,
}

impl From<&DepthSummary> for DepthStats {
    fn from(s: &DepthSummary) -> Self {
        Self { means: s.means.map(|m| m as f32), rejected_fraction: s.rejected_fraction as f32 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub image: CameraImage,
    pub depth: DepthStats,
    pub ultrasonic: UltrasonicPair,
    pub sensor_label: Action,
    pub branch: Branch,
    pub human_label: Option<Action>,
    pub training_label: Action,
    pub source: LabelSource,
    /// Recording probability at collection time, when the gate was consulted.
    pub p_r: Option<f64>,
    pub iteration: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("bad magic bytes")]
    Magic,
    #[error("unsupported dataset version {0}")]
    Version(u16),
    #[error("unexpected end of data")]
    UnexpectedEnd,
    #[error("unknown section tag `{}`", alloc::string::String::from_utf8_lossy(.0))]
    UnknownSection([u8; 4]),
    #[error("invalid field: {0}")]
    Invalid(&'static str),
    #[error("samples must be appended in non-decreasing iteration order")]
    IterationOrder,
}

/// Append-only list of labeled samples with a provenance document.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub provenance: String,
    samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(provenance: &str) -> Self {
        Self { provenance: provenance.into(), samples: Vec::new() }
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last_iteration(&self) -> Option<u32> {
        self.samples.last().map(|s| s.iteration)
    }

    pub fn push(&mut self, s: LabeledSample) -> Result<(), DatasetError> {
        if self.last_iteration().is_some_and(|it| s.iteration < it) {
            return Err(DatasetError::IterationOrder);
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = LabeledSample>) -> Result<(), DatasetError> {
        for s in other {
            self.push(s)?;
        }
        Ok(())
    }

    /// Sample count per iteration index `0..=last`.
    pub fn counts(&self) -> Vec<u64> {
        let n = self.last_iteration().map_or(0, |i| i as usize + 1);
        let mut c = alloc::vec![0u64; n];
        for s in &self.samples {
            c[s.iteration as usize] += 1;
        }
        c
    }

    pub fn iteration(&self, i: u32) -> impl Iterator<Item = &LabeledSample> {
        self.samples.iter().filter(move |s| s.iteration == i)
    }

    /// Training and validation indices: the last 10% (rounded down) of each
    /// iteration's samples, in collection order, are held out.
    pub fn split(&self) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut val = Vec::new();
        let mut start = 0;
        while start < self.samples.len() {
            let it = self.samples[start].iteration;
            let end = start + self.samples[start..].iter().take_while(|s| s.iteration == it).count();
            let n_val = (end - start) / 10;
            train.extend(start..end - n_val);
            val.extend(end - n_val..end);
            start = end;
        }
        (train, val)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u16(VERSION);
        w.u32(self.provenance.len() as u32);
        w.0.extend_from_slice(self.provenance.as_bytes());

        let counts = self.counts();
        let mut iter = Writer(Vec::new());
        iter.u32(counts.len() as u32);
        counts.iter().for_each(|c| iter.u64(*c));
        w.section(b"ITER", &iter.0);

        let mut smpl = Writer(Vec::new());
        smpl.u64(self.samples.len() as u64);
        for s in &self.samples {
            smpl.sample(s);
        }
        w.section(b"SMPL", &smpl.0);
        w.section(b"END!", &[]);
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DatasetError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(DatasetError::Magic);
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(DatasetError::Version(version));
        }
        let plen = r.u32()? as usize;
        let provenance = core::str::from_utf8(r.take(plen)?)
            .map_err(|_| DatasetError::Invalid("provenance is not UTF-8"))?
            .into();
        let mut ds = Dataset { provenance, samples: Vec::new() };
        let mut counts = None;
        loop {
            let tag: [u8; 4] = r.take(4)?.try_into().expect("length checked");
            let len = r.u64()? as usize;
            if len > r.remaining() {
                return Err(DatasetError::UnexpectedEnd);
            }
            let mut body = Reader { buf: r.take(len)?, pos: 0 };
            match &tag {
                b"ITER" => {
                    let n = body.u32()? as usize;
                    let mut c = Vec::with_capacity(n.min(1 << 16));
                    for _ in 0..n {
                        c.push(body.u64()?);
                    }
                    counts = Some(c);
                }
                b"SMPL" => {
                    let n = body.u64()?;
                    for _ in 0..n {
                        ds.push(body.sample()?)?;
                    }
                }
                b"END!" => break,
                _ => return Err(DatasetError::UnknownSection(tag)),
            }
            if body.remaining() != 0 {
                return Err(DatasetError::Invalid("section has trailing bytes"));
            }
        }
        if r.remaining() != 0 {
            return Err(DatasetError::Invalid("data after end marker"));
        }
        if counts.is_some_and(|c| c != ds.counts()) {
            return Err(DatasetError::Invalid("iteration counts disagree with samples"));
        }
        Ok(ds)
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn action(&mut self, a: Action) {
        self.f64(a.v);
        self.f64(a.w);
    }
    fn section(&mut self, tag: &[u8; 4], payload: &[u8]) {
        self.0.extend_from_slice(tag);
        self.u64(payload.len() as u64);
        self.0.extend_from_slice(payload);
    }
    fn sample(&mut self, s: &LabeledSample) {
        self.u16(s.image.width as u16);
        self.u16(s.image.height as u16);
        self.u8(CameraImage::CHANNELS as u8);
        s.image.data.iter().for_each(|v| self.f32(*v));
        s.depth.means.iter().for_each(|v| self.f32(*v));
        self.f32(s.depth.rejected_fraction);
        self.f64(s.ultrasonic.left);
        self.f64(s.ultrasonic.right);
        self.action(s.sensor_label);
        self.u8(s.branch.tag());
        match s.human_label {
            Some(h) => {
                self.u8(1);
                self.action(h);
            }
            None => self.u8(0),
        }
        self.action(s.training_label);
        self.u8(s.source as u8);
        match s.p_r {
            Some(p) => {
                self.u8(1);
                self.f64(p);
            }
            None => self.u8(0),
        }
        self.u32(s.iteration);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8], DatasetError> {
        if n > self.remaining() {
            return Err(DatasetError::UnexpectedEnd);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn arr<const N: usize>(&mut self) -> Result<[u8; N], DatasetError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8, DatasetError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, DatasetError> {
        Ok(u16::from_le_bytes(self.arr()?))
    }
    fn u32(&mut self) -> Result<u32, DatasetError> {
        Ok(u32::from_le_bytes(self.arr()?))
    }
    fn u64(&mut self) -> Result<u64, DatasetError> {
        Ok(u64::from_le_bytes(self.arr()?))
    }
    fn f32(&mut self) -> Result<f32, DatasetError> {
        Ok(f32::from_le_bytes(self.arr()?))
    }
    fn f64(&mut self) -> Result<f64, DatasetError> {
        Ok(f64::from_le_bytes(self.arr()?))
    }
    fn action(&mut self) -> Result<Action, DatasetError> {
        Ok(Action { v: self.f64()?, w: self.f64()? })
    }
    fn flag(&mut self) -> Result<bool, DatasetError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(DatasetError::Invalid("presence byte")),
        }
    }
    fn sample(&mut self) -> Result<LabeledSample, DatasetError> {
        let width = self.u16()? as usize;
        let height = self.u16()? as usize;
        if self.u8()? as usize != CameraImage::CHANNELS {
            return Err(DatasetError::Invalid("image channels"));
        }
        let n = width * height * CameraImage::CHANNELS;
        if n * 4 > self.remaining() {
            return Err(DatasetError::UnexpectedEnd);
        }
        let data = (0..n).map(|_| self.f32()).collect::<Result<Vec<_>, _>>()?;
        let means = [self.f32()?, self.f32()?, self.f32()?];
        let depth = DepthStats { means, rejected_fraction: self.f32()? };
        let ultrasonic = UltrasonicPair { left: self.f64()?, right: self.f64()? };
        let sensor_label = self.action()?;
        let branch = Branch::from_tag(self.u8()?).ok_or(DatasetError::Invalid("branch tag"))?;
        let human_label = if self.flag()? { Some(self.action()?) } else { None };
        let training_label = self.action()?;
        let source = LabelSource::from_tag(self.u8()?).ok_or(DatasetError::Invalid("label source"))?;
        let p_r = if self.flag()? { Some(self.f64()?) } else { None };
        let iteration = self.u32()?;
        Ok(LabeledSample {
            image: CameraImage { width, height, data },
            depth,
            ultrasonic,
            sensor_label,
            branch,
            human_label,
            training_label,
            source,
            p_r,
            iteration,
        })
    }
}
