//! The shared-trunk policy network: a VGG-style convolutional trunk ending in
//! the 256-wide `fc5` feature, a `tanh` navigation head producing the
//! normalized `(v, w)` action, and a two-layer sigmoid recording head.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use rand::Rng;

use super::layers::{self, ConvShape};
use super::{NnError, Real, Tensor};

/// Where the 2×2 max pools sit in the trunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "kebab-case"))]
pub enum PoolLayout {
    /// One pool after the first conv pair only (the literal topology).
    AfterFirstPair,
    /// A pool after each conv pair.
    AfterEachPair,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct NetConfig {
    /// Square input side in pixels (RGB).
    pub input_size: usize,
    /// Channels of the first and second conv pair.
    pub channels: [usize; 2],
    pub fc_width: usize,
    pub rec_hidden: usize,
    pub pools: PoolLayout,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl NetConfig {
    /// 128×128 input, 64/128 channels, single pool.
    pub fn full() -> Self {
        Self {
            input_size: 128,
            channels: [64, 128],
            fc_width: 256,
            rec_hidden: 64,
            pools: PoolLayout::AfterFirstPair,
        }
    }

    /// 64×64 input with a pool after each conv pair and narrow channels, sized
    /// for single-core CPU training.
    pub fn desk() -> Self {
        Self {
            input_size: 64,
            channels: [4, 8],
            fc_width: 256,
            rec_hidden: 64,
            pools: PoolLayout::AfterEachPair,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let divisor = match self.pools {
            PoolLayout::AfterFirstPair => 2,
            PoolLayout::AfterEachPair => 4,
        };
        if self.input_size == 0 || self.input_size % divisor != 0 {
            return Err(NnError::InvalidConfig("input size must be a positive multiple of the total pooling factor"));
        }
        if self.channels.contains(&0) || self.fc_width == 0 || self.rec_hidden == 0 {
            return Err(NnError::InvalidConfig("layer widths must be positive"));
        }
        Ok(())
    }

    fn trunk_side(&self) -> usize {
        match self.pools {
            PoolLayout::AfterFirstPair => self.input_size / 2,
            PoolLayout::AfterEachPair => self.input_size / 4,
        }
    }

    /// Length of the flattened conv output feeding `fc5`.
    pub fn flat_len(&self) -> usize {
        let side = self.trunk_side();
        self.channels[1] * side * side
    }

    pub fn input_len(&self) -> usize {
        3 * self.input_size * self.input_size
    }

    fn conv_shapes(&self) -> [ConvShape; 4] {
        let s = self.input_size;
        let h = s / 2;
        let [c1, c2] = self.channels;
        [
            ConvShape { c_in: 3, c_out: c1, height: s, width: s },
            ConvShape { c_in: c1, c_out: c1, height: s, width: s },
            ConvShape { c_in: c1, c_out: c2, height: h, width: h },
            ConvShape { c_in: c2, c_out: c2, height: h, width: h },
        ]
    }

    /// Names and shapes of every parameter tensor, in storage order.
    pub fn layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        let [c1, c2] = self.channels;
        vec![
            ("conv1.weight", vec![c1, 3, 3, 3]),
            ("conv1.bias", vec![c1]),
            ("conv2.weight", vec![c1, c1, 3, 3]),
            ("conv2.bias", vec![c1]),
            ("conv3.weight", vec![c2, c1, 3, 3]),
            ("conv3.bias", vec![c2]),
            ("conv4.weight", vec![c2, c2, 3, 3]),
            ("conv4.bias", vec![c2]),
            ("fc5.weight", vec![self.fc_width, self.flat_len()]),
            ("fc5.bias", vec![self.fc_width]),
            ("nav.weight", vec![2, self.fc_width]),
            ("nav.bias", vec![2]),
            ("rec1.weight", vec![self.rec_hidden, self.fc_width]),
            ("rec1.bias", vec![self.rec_hidden]),
            ("rec2.weight", vec![1, self.rec_hidden]),
            ("rec2.bias", vec![1]),
        ]
    }
}

/// Tensor indices into [`NetworkParams::tensors`].
pub mod idx {
    pub const CONV1_W: usize = 0;
    pub const CONV4_B: usize = 7;
    pub const FC5_W: usize = 8;
    pub const FC5_B: usize = 9;
    pub const NAV_W: usize = 10;
    pub const NAV_B: usize = 11;
    pub const REC1_W: usize = 12;
    pub const REC1_B: usize = 13;
    pub const REC2_W: usize = 14;
    pub const REC2_B: usize = 15;
    pub const COUNT: usize = 16;

    /// Trunk plus navigation head (the parameters the imitation loss trains).
    pub const NAVIGATION: core::ops::Range<usize> = 0..12;
    pub const RECORDING: core::ops::Range<usize> = 12..16;
    pub const TRUNK: core::ops::Range<usize> = 0..10;
}

/// Weights of the trunk, navigation head and recording head.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    config: NetConfig,
    tensors: Vec<Tensor<T>>,
}

/// Gradient (or any other per-parameter quantity) shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(params: &NetworkParams<T>) -> Self {
        Self {
            tensors: params.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn zero(&mut self) {
        self.tensors.iter_mut().for_each(|t| t.fill(T::zero()));
    }

    pub fn all_zero(&self, range: core::ops::Range<usize>) -> bool {
        self.tensors[range].iter().all(|t| t.data().iter().all(|&x| x == T::zero()))
    }
}

/// Result of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput<T> {
    /// Normalized `(v, w)`, strictly inside `(-1, 1)`.
    pub nav: [T; 2],
    /// Recording probability, strictly inside `(0, 1)`.
    pub p_r: T,
    pub fc5: Vec<T>,
}

/// Activation and scratch buffers for one sample. Reusing a workspace across
/// calls avoids reallocating the unfolded convolution inputs.
#[derive(Debug, Default, Clone)]
pub struct Workspace<T> {
    input: Vec<T>,
    cols: [Vec<T>; 4],
    acts: [Vec<T>; 4],
    pool1: Vec<T>,
    pool1_idx: Vec<usize>,
    pool2: Vec<T>,
    pool2_idx: Vec<usize>,
    fc5: Vec<T>,
    nav: [T; 2],
    rec_hidden: Vec<T>,
    p_r: T,
    d_col: Vec<T>,
    d_a: [Vec<T>; 4],
    d_pool: Vec<T>,
    d_fc5: Vec<T>,
    d_flat: Vec<T>,
    d_hidden: Vec<T>,
}

impl<T: Real> Workspace<T> {
    pub fn new() -> Self {
        Self {
            input: Vec::new(),
            cols: Default::default(),
            acts: Default::default(),
            pool1: Vec::new(),
            pool1_idx: Vec::new(),
            pool2: Vec::new(),
            pool2_idx: Vec::new(),
            fc5: Vec::new(),
            nav: [T::zero(); 2],
            rec_hidden: Vec::new(),
            p_r: T::zero(),
            d_col: Vec::new(),
            d_a: Default::default(),
            d_pool: Vec::new(),
            d_fc5: Vec::new(),
            d_flat: Vec::new(),
            d_hidden: Vec::new(),
        }
    }

    pub fn output(&self) -> ForwardOutput<T> {
        ForwardOutput { nav: self.nav, p_r: self.p_r, fc5: self.fc5.clone() }
    }

    pub fn fc5(&self) -> &[T] {
        &self.fc5
    }

    pub fn nav(&self) -> [T; 2] {
        self.nav
    }

    pub fn p_r(&self) -> T {
        self.p_r
    }
}

fn open_unit_interval<T: Real>(x: T, lo: T, hi: T) -> T {
    let eps = T::epsilon();
    x.max(lo + eps).min(hi - eps)
}

impl<T: Real> NetworkParams<T> {
    pub fn zeros(config: NetConfig) -> Result<Self, NnError> {
        config.validate()?;
        let tensors = config.layout().iter().map(|(_, s)| Tensor::zeros(s)).collect();
        Ok(Self { config, tensors })
    }

    /// He-uniform weights for ReLU layers (convs, `fc5`, `rec1`), Xavier-uniform
    /// for the two output layers, zero biases.
    pub fn init<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Result<Self, NnError> {
        let mut p = Self::zeros(config)?;
        for (i, t) in p.tensors.iter_mut().enumerate() {
            if i % 2 == 1 {
                continue;
            }
            let shape = t.shape();
            let fan_out = shape[0];
            let fan_in: usize = shape[1..].iter().product();
            let limit = match i {
                idx::NAV_W | idx::REC2_W => libm::sqrt(6.0 / (fan_in + fan_out) as f64),
                _ => libm::sqrt(6.0 / fan_in as f64),
            };
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            for w in t.data_mut() {
                *w = T::from_f64(dist.sample(rng));
            }
        }
        Ok(p)
    }

    /// Builds parameters from tensors, validating every shape against the
    /// configured layout.
    pub fn from_tensors(config: NetConfig, tensors: Vec<Tensor<T>>) -> Result<Self, NnError> {
        config.validate()?;
        let layout = config.layout();
        if tensors.len() != layout.len() {
            return Err(NnError::TensorCount { expected: layout.len(), got: tensors.len() });
        }
        for ((name, shape), t) in layout.iter().zip(&tensors) {
            if t.shape() != shape.as_slice() {
                return Err(NnError::ShapeMismatch {
                    layer: String::from(*name),
                    expected: shape.iter().product(),
                    got: t.len(),
                });
            }
        }
        Ok(Self { config, tensors })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.config.layout().into_iter().map(|(n, _)| n).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Real>(&self) -> NetworkParams<U> {
        NetworkParams {
            config: self.config.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }

    fn t(&self, i: usize) -> &[T] {
        self.tensors[i].data()
    }

    /// Forward pass for one CHW image.
    pub fn forward(&self, image: &[T]) -> Result<ForwardOutput<T>, NnError> {
        let mut ws = Workspace::new();
        self.forward_ws(image, &mut ws)?;
        Ok(ws.output())
    }

    /// Forward pass leaving every activation in `ws`.
    pub fn forward_ws(&self, image: &[T], ws: &mut Workspace<T>) -> Result<(), NnError> {
        if image.len() != self.config.input_len() {
            return Err(NnError::ShapeMismatch {
                layer: String::from("input"),
                expected: self.config.input_len(),
                got: image.len(),
            });
        }
        let shapes = self.config.conv_shapes();
        ws.input.clear();
        ws.input.extend_from_slice(image);
        let [c1, c2] = self.config.channels;
        let s = self.config.input_size;

        {
            let (cols, acts) = (&mut ws.cols, &mut ws.acts);
            layers::conv_relu_forward(&shapes[0], &ws.input, self.t(0), self.t(1), &mut cols[0], &mut acts[0]);
            let (a0, rest) = acts.split_at_mut(1);
            layers::conv_relu_forward(&shapes[1], &a0[0], self.t(2), self.t(3), &mut cols[1], &mut rest[0]);
        }
        layers::maxpool_forward(c1, s, s, &ws.acts[1], &mut ws.pool1, &mut ws.pool1_idx);
        {
            let (cols, acts) = (&mut ws.cols, &mut ws.acts);
            let (lo, hi) = acts.split_at_mut(3);
            layers::conv_relu_forward(&shapes[2], &ws.pool1, self.t(4), self.t(5), &mut cols[2], &mut lo[2]);
            layers::conv_relu_forward(&shapes[3], &lo[2], self.t(6), self.t(7), &mut cols[3], &mut hi[0]);
        }
        let flat: &[T] = match self.config.pools {
            PoolLayout::AfterEachPair => {
                layers::maxpool_forward(c2, s / 2, s / 2, &ws.acts[3], &mut ws.pool2, &mut ws.pool2_idx);
                &ws.pool2
            }
            PoolLayout::AfterFirstPair => &ws.acts[3],
        };
        layers::dense_forward(self.t(idx::FC5_W), self.t(idx::FC5_B), flat, &mut ws.fc5);
        layers::relu_inplace(&mut ws.fc5);

        let mut nav = Vec::with_capacity(2);
        layers::dense_forward(self.t(idx::NAV_W), self.t(idx::NAV_B), &ws.fc5, &mut nav);
        let one = T::one();
        ws.nav = [
            open_unit_interval(nav[0].tanh(), -one, one),
            open_unit_interval(nav[1].tanh(), -one, one),
        ];
        self.rec_head_forward_ws(ws);
        Ok(())
    }

    fn rec_head_forward_ws(&self, ws: &mut Workspace<T>) {
        layers::dense_forward(self.t(idx::REC1_W), self.t(idx::REC1_B), &ws.fc5, &mut ws.rec_hidden);
        layers::relu_inplace(&mut ws.rec_hidden);
        let mut z = Vec::with_capacity(1);
        layers::dense_forward(self.t(idx::REC2_W), self.t(idx::REC2_B), &ws.rec_hidden, &mut z);
        ws.p_r = open_unit_interval(layers::sigmoid(z[0]), T::zero(), T::one());
    }

    /// Recording probability from a precomputed `fc5` feature.
    pub fn recording_probability(&self, fc5: &[T]) -> Result<T, NnError> {
        let mut ws = Workspace::new();
        self.load_fc5(fc5, &mut ws)?;
        self.rec_head_forward_ws(&mut ws);
        Ok(ws.p_r)
    }

    fn load_fc5(&self, fc5: &[T], ws: &mut Workspace<T>) -> Result<(), NnError> {
        if fc5.len() != self.config.fc_width {
            return Err(NnError::ShapeMismatch {
                layer: String::from("fc5"),
                expected: self.config.fc_width,
                got: fc5.len(),
            });
        }
        ws.fc5.clear();
        ws.fc5.extend_from_slice(fc5);
        Ok(())
    }

    /// Backpropagates `ws.d_fc5` (gradient w.r.t. post-ReLU `fc5`) through
    /// the trunk, accumulating into `grads`.
    fn trunk_backward(&self, ws: &mut Workspace<T>, grads: &mut Gradients<T>) {
        let shapes = self.config.conv_shapes();
        let [c1, _] = self.config.channels;
        let s = self.config.input_size;

        layers::relu_backward(&ws.fc5, &mut ws.d_fc5);
        let flat: &[T] = match self.config.pools {
            PoolLayout::AfterEachPair => &ws.pool2,
            PoolLayout::AfterFirstPair => &ws.acts[3],
        };
        ws.d_flat.clear();
        ws.d_flat.resize(flat.len(), T::zero());
        {
            let (gw, rest) = grads.tensors[idx::FC5_W..=idx::FC5_B].split_at_mut(1);
            layers::dense_backward(
                self.t(idx::FC5_W),
                flat,
                &ws.d_fc5,
                gw[0].data_mut(),
                rest[0].data_mut(),
                Some(&mut ws.d_flat),
            );
        }

        // gradient w.r.t. conv4 output
        let mut d_a4 = core::mem::take(&mut ws.d_a[3]);
        d_a4.clear();
        match self.config.pools {
            PoolLayout::AfterEachPair => {
                d_a4.resize(ws.acts[3].len(), T::zero());
                layers::maxpool_backward(&ws.pool2_idx, &ws.d_flat, &mut d_a4);
            }
            PoolLayout::AfterFirstPair => d_a4.extend_from_slice(&ws.d_flat),
        }

        let mut d_a3 = core::mem::take(&mut ws.d_a[2]);
        d_a3.clear();
        d_a3.resize(ws.acts[2].len(), T::zero());
        self.conv_backward(3, &shapes[3], &ws.acts[3], &ws.cols[3], &mut d_a4, grads, &mut ws.d_col, Some(&mut d_a3));

        ws.d_pool.clear();
        ws.d_pool.resize(ws.pool1.len(), T::zero());
        self.conv_backward(2, &shapes[2], &ws.acts[2], &ws.cols[2], &mut d_a3, grads, &mut ws.d_col, Some(&mut ws.d_pool));

        let mut d_a2 = core::mem::take(&mut ws.d_a[1]);
        d_a2.clear();
        d_a2.resize(ws.acts[1].len(), T::zero());
        layers::maxpool_backward(&ws.pool1_idx, &ws.d_pool, &mut d_a2);

        let mut d_a1 = core::mem::take(&mut ws.d_a[0]);
        d_a1.clear();
        d_a1.resize(ws.acts[0].len(), T::zero());
        self.conv_backward(1, &shapes[1], &ws.acts[1], &ws.cols[1], &mut d_a2, grads, &mut ws.d_col, Some(&mut d_a1));
        self.conv_backward(0, &shapes[0], &ws.acts[0], &ws.cols[0], &mut d_a1, grads, &mut ws.d_col, None);
        debug_assert_eq!(c1 * s * s, ws.acts[0].len());

        ws.d_a = [d_a1, d_a2, d_a3, d_a4];
    }

    #[allow(clippy::too_many_arguments)]
    fn conv_backward(
        &self,
        layer: usize,
        shape: &ConvShape,
        out: &[T],
        col: &[T],
        d_out: &mut [T],
        grads: &mut Gradients<T>,
        d_col: &mut Vec<T>,
        d_input: Option<&mut [T]>,
    ) {
        let (gw, gb) = grads.tensors[2 * layer..2 * layer + 2].split_at_mut(1);
        layers::conv_relu_backward(
            shape,
            out,
            col,
            self.t(2 * layer),
            d_out,
            gw[0].data_mut(),
            gb[0].data_mut(),
            d_col,
            d_input,
        );
    }

    /// Accumulates the gradient of `scale * ||nav - target||²` for the sample
    /// currently held in `ws`. Returns the unscaled squared error.
    fn mse_backward_ws(&self, ws: &mut Workspace<T>, target: [T; 2], scale: T, grads: &mut Gradients<T>) -> f64 {
        let two = T::one() + T::one();
        let mut err = 0.0;
        let mut d_pre = [T::zero(); 2];
        for j in 0..2 {
            let diff = ws.nav[j] - target[j];
            err += diff.as_f64() * diff.as_f64();
            d_pre[j] = two * diff * scale * (T::one() - ws.nav[j] * ws.nav[j]);
        }
        ws.d_fc5.clear();
        ws.d_fc5.resize(self.config.fc_width, T::zero());
        {
            let (gw, gb) = grads.tensors[idx::NAV_W..=idx::NAV_B].split_at_mut(1);
            layers::dense_backward(
                self.t(idx::NAV_W),
                &ws.fc5,
                &d_pre,
                gw[0].data_mut(),
                gb[0].data_mut(),
                Some(&mut ws.d_fc5),
            );
        }
        self.trunk_backward(ws, grads);
        err
    }

    /// Accumulates the gradient of `scale * BCE(p_r, label)` into the
    /// recording head (and `ws.d_fc5`). Returns the unscaled loss.
    fn bce_backward_ws(&self, ws: &mut Workspace<T>, label: bool, scale: T, grads: &mut Gradients<T>) -> f64 {
        let (lo, hi) = bce_clamp::<T>();
        let p = ws.p_r.max(lo).min(hi);
        let y = if label { T::one() } else { T::zero() };
        let loss = -(y * p.ln() + (T::one() - y) * (T::one() - p).ln());
        // d/dz of the clamped loss; zero where the clamp is active.
        let dz = if ws.p_r > lo && ws.p_r < hi { (ws.p_r - y) * scale } else { T::zero() };
        let mut d_hidden = core::mem::take(&mut ws.d_hidden);
        d_hidden.clear();
        d_hidden.resize(self.config.rec_hidden, T::zero());
        {
            let (gw, gb) = grads.tensors[idx::REC2_W..=idx::REC2_B].split_at_mut(1);
            layers::dense_backward(
                self.t(idx::REC2_W),
                &ws.rec_hidden,
                &[dz],
                gw[0].data_mut(),
                gb[0].data_mut(),
                Some(&mut d_hidden),
            );
        }
        layers::relu_backward(&ws.rec_hidden, &mut d_hidden);
        ws.d_fc5.clear();
        ws.d_fc5.resize(self.config.fc_width, T::zero());
        {
            let (gw, gb) = grads.tensors[idx::REC1_W..=idx::REC1_B].split_at_mut(1);
            layers::dense_backward(
                self.t(idx::REC1_W),
                &ws.fc5,
                &d_hidden,
                gw[0].data_mut(),
                gb[0].data_mut(),
                Some(&mut ws.d_fc5),
            );
        }
        ws.d_hidden = d_hidden;
        loss.as_f64()
    }

    /// Gradient of the mean imitation loss `1/N Σ ||π(x_i) − y_i||²` over
    /// `batch`, written into `grads` (zeroed first). Recording-head gradients
    /// stay zero. Returns the batch loss.
    pub fn backward_mse_into(
        &self,
        batch: &[(&[T], [T; 2])],
        ws: &mut Workspace<T>,
        grads: &mut Gradients<T>,
    ) -> Result<f64, NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        grads.zero();
        let scale = T::one() / T::from_f64(batch.len() as f64);
        let mut total = 0.0;
        for (image, target) in batch {
            self.forward_ws(image, ws)?;
            total += self.mse_backward_ws(ws, *target, scale, grads);
        }
        Ok(total / batch.len() as f64)
    }

    pub fn backward_mse(&self, batch: &[(&[T], [T; 2])]) -> Result<(f64, Gradients<T>), NnError> {
        let mut grads = Gradients::zeros_like(self);
        let loss = self.backward_mse_into(batch, &mut Workspace::new(), &mut grads)?;
        Ok((loss, grads))
    }

    /// Gradient of the mean binary cross-entropy of the recording head over
    /// precomputed `fc5` features. Only recording-head gradients are written.
    pub fn backward_bce_features_into(
        &self,
        batch: &[(&[T], bool)],
        ws: &mut Workspace<T>,
        grads: &mut Gradients<T>,
    ) -> Result<f64, NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        grads.zero();
        let scale = T::one() / T::from_f64(batch.len() as f64);
        let mut total = 0.0;
        for (fc5, label) in batch {
            self.load_fc5(fc5, ws)?;
            self.rec_head_forward_ws(ws);
            total += self.bce_backward_ws(ws, *label, scale, grads);
        }
        Ok(total / batch.len() as f64)
    }

    pub fn backward_bce_features(&self, batch: &[(&[T], bool)]) -> Result<(f64, Gradients<T>), NnError> {
        let mut grads = Gradients::zeros_like(self);
        let loss = self.backward_bce_features_into(batch, &mut Workspace::new(), &mut grads)?;
        Ok((loss, grads))
    }

    /// BCE gradient from images. With `into_trunk` the loss also
    /// backpropagates through `fc5` into the shared trunk; otherwise only the
    /// recording head receives gradient.
    pub fn backward_bce_images(
        &self,
        batch: &[(&[T], bool)],
        into_trunk: bool,
    ) -> Result<(f64, Gradients<T>), NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        let mut grads = Gradients::zeros_like(self);
        let mut ws = Workspace::new();
        let scale = T::one() / T::from_f64(batch.len() as f64);
        let mut total = 0.0;
        for (image, label) in batch {
            self.forward_ws(image, &mut ws)?;
            total += self.bce_backward_ws(&mut ws, *label, scale, &mut grads);
            if into_trunk {
                self.trunk_backward(&mut ws, &mut grads);
            }
        }
        Ok((total / batch.len() as f64, grads))
    }

    /// Mean imitation loss without gradients.
    pub fn mse_loss(&self, batch: &[(&[T], [T; 2])], ws: &mut Workspace<T>) -> Result<f64, NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        let mut total = 0.0;
        for (image, target) in batch {
            self.forward_ws(image, ws)?;
            total += (0..2)
                .map(|j| {
                    let d = (ws.nav[j] - target[j]).as_f64();
                    d * d
                })
                .sum::<f64>();
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean recording-head BCE over precomputed features, without gradients.
    pub fn bce_loss_features(&self, batch: &[(&[T], bool)]) -> Result<f64, NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        let mut total = 0.0;
        for (fc5, label) in batch {
            total += bce(self.recording_probability(fc5)?.as_f64(), *label);
        }
        Ok(total / batch.len() as f64)
    }
}

fn bce_clamp<T: Real>() -> (T, T) {
    (T::from_f64(BCE_EPS), T::one() - T::from_f64(BCE_EPS))
}

/// Probability clamp applied inside the binary cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

/// Binary cross-entropy of one prediction, with `p` clamped to
/// `[1e-7, 1 − 1e-7]`.
pub fn bce(p: f64, label: bool) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if label {
        -libm::log(p)
    } else {
        -libm::log(1.0 - p)
    }
}
