//! Per-sample layer kernels. Activations are laid out channel-major
//! (`C×H×W`); convolution weights are `Cout×Cin×3×3`, dense weights `out×in`.

use alloc::vec::Vec;

use super::Real;

/// Geometry of one 3×3, stride-1, same-padded convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub c_in: usize,
    pub c_out: usize,
    pub height: usize,
    pub width: usize,
}

impl ConvShape {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
    pub fn patch(&self) -> usize {
        self.c_in * 9
    }
    pub fn weight_len(&self) -> usize {
        self.c_out * self.patch()
    }
}

/// Unfolds `input` into `col` with one row per (channel, ky, kx) and one
/// column per output pixel; out-of-image taps read zero.
pub fn im2col<T: Real>(s: &ConvShape, input: &[T], col: &mut Vec<T>) {
    let (h, w) = (s.height, s.width);
    let hw = h * w;
    col.clear();
    col.resize(s.patch() * hw, T::zero());
    for c in 0..s.c_in {
        let plane = &input[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = (c * 9 + ky * 3 + kx) * hw;
                let dst = &mut col[row..row + hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src_row = &plane[sy as usize * w..(sy as usize + 1) * w];
                    let dst_row = &mut dst[y * w..(y + 1) * w];
                    // dx in {-1, 0, 1}
                    match kx {
                        0 => dst_row[1..].copy_from_slice(&src_row[..w - 1]),
                        1 => dst_row.copy_from_slice(src_row),
                        _ => dst_row[..w - 1].copy_from_slice(&src_row[1..]),
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters `col` back onto `d_input` (accumulating).
pub fn col2im<T: Real>(s: &ConvShape, col: &[T], d_input: &mut [T]) {
    let (h, w) = (s.height, s.width);
    let hw = h * w;
    for c in 0..s.c_in {
        let plane = &mut d_input[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = (c * 9 + ky * 3 + kx) * hw;
                let src = &col[row..row + hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    let src_row = &src[y * w..(y + 1) * w];
                    match kx {
                        0 => add_into(&mut dst_row[..w - 1], &src_row[1..]),
                        1 => add_into(dst_row, src_row),
                        _ => add_into(&mut dst_row[1..], &src_row[..w - 1]),
                    }
                }
            }
        }
    }
}

#[inline]
fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = *d + *s;
    }
}

/// `out = relu(W * im2col(input) + b)`. Leaves the unfolded input in `col`
/// for the backward pass.
pub fn conv_relu_forward<T: Real>(
    s: &ConvShape,
    input: &[T],
    weight: &[T],
    bias: &[T],
    col: &mut Vec<T>,
    out: &mut Vec<T>,
) {
    im2col(s, input, col);
    let hw = s.pixels();
    out.clear();
    out.reserve(s.c_out * hw);
    for &b in bias.iter().take(s.c_out) {
        out.extend(core::iter::repeat_n(b, hw));
    }
    let k = s.patch();
    T::gemm(
        s.c_out, k, hw, T::one(), weight, k as isize, 1, col, hw as isize, 1, T::one(), out,
        hw as isize, 1,
    );
    relu_inplace(out);
}

/// Backward of [`conv_relu_forward`]. `d_out` is the gradient w.r.t. the
/// post-ReLU output and is masked in place. Weight and bias gradients are
/// accumulated; `d_input`, when given, is overwritten.
#[allow(clippy::too_many_arguments)]
pub fn conv_relu_backward<T: Real>(
    s: &ConvShape,
    out: &[T],
    col: &[T],
    weight: &[T],
    d_out: &mut [T],
    d_weight: &mut [T],
    d_bias: &mut [T],
    d_col: &mut Vec<T>,
    d_input: Option<&mut [T]>,
) {
    relu_backward(out, d_out);
    let hw = s.pixels();
    let k = s.patch();
    for (co, db) in d_bias.iter_mut().enumerate().take(s.c_out) {
        let row = &d_out[co * hw..(co + 1) * hw];
        *db = *db + row.iter().fold(T::zero(), |a, &x| a + x);
    }
    // dW (c_out × k) += dOut (c_out × hw) · colᵀ (hw × k)
    T::gemm(
        s.c_out, hw, k, T::one(), d_out, hw as isize, 1, col, 1, hw as isize, T::one(), d_weight,
        k as isize, 1,
    );
    if let Some(d_input) = d_input {
        d_col.clear();
        d_col.resize(k * hw, T::zero());
        // dCol (k × hw) = Wᵀ (k × c_out) · dOut (c_out × hw)
        T::gemm(
            k, s.c_out, hw, T::one(), weight, 1, k as isize, d_out, hw as isize, 1, T::zero(),
            d_col, hw as isize, 1,
        );
        d_input.iter_mut().for_each(|x| *x = T::zero());
        col2im(s, d_col, d_input);
    }
}

/// 2×2 stride-2 max pooling over `channels` planes of `height×width`
/// (both even). Records the flat source index of every maximum.
pub fn maxpool_forward<T: Real>(
    channels: usize,
    height: usize,
    width: usize,
    input: &[T],
    out: &mut Vec<T>,
    argmax: &mut Vec<usize>,
) {
    let (oh, ow) = (height / 2, width / 2);
    out.clear();
    argmax.clear();
    for c in 0..channels {
        let base = c * height * width;
        for y in 0..oh {
            for x in 0..ow {
                let i0 = base + 2 * y * width + 2 * x;
                let mut best = i0;
                for idx in [i0 + 1, i0 + width, i0 + width + 1] {
                    if input[idx] > input[best] {
                        best = idx;
                    }
                }
                out.push(input[best]);
                argmax.push(best);
            }
        }
    }
}

/// Routes pooled gradients back to the recorded maxima (`d_input` is overwritten).
pub fn maxpool_backward<T: Real>(argmax: &[usize], d_out: &[T], d_input: &mut [T]) {
    d_input.iter_mut().for_each(|x| *x = T::zero());
    for (&i, &g) in argmax.iter().zip(d_out) {
        d_input[i] = d_input[i] + g;
    }
}

/// `out = W x + b` with `W` stored `out×in`.
pub fn dense_forward<T: Real>(weight: &[T], bias: &[T], input: &[T], out: &mut Vec<T>) {
    let n_in = input.len();
    out.clear();
    out.extend(bias.iter().enumerate().map(|(o, &b)| b + dot(&weight[o * n_in..(o + 1) * n_in], input)));
}

/// Dot product with eight independent partial sums so the loop vectorizes.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for i in 0..chunks {
        let (ca, cb) = (&a[i * 8..i * 8 + 8], &b[i * 8..i * 8 + 8]);
        for k in 0..8 {
            acc[k] = acc[k] + ca[k] * cb[k];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..a.len() {
        tail = tail + a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Accumulates `dW += d_out ⊗ input`, `db += d_out`; overwrites `d_input`
/// with `Wᵀ d_out` when requested.
pub fn dense_backward<T: Real>(
    weight: &[T],
    input: &[T],
    d_out: &[T],
    d_weight: &mut [T],
    d_bias: &mut [T],
    d_input: Option<&mut [T]>,
) {
    let n_in = input.len();
    for (o, &g) in d_out.iter().enumerate() {
        d_bias[o] = d_bias[o] + g;
        if g == T::zero() {
            continue;
        }
        let row = &mut d_weight[o * n_in..(o + 1) * n_in];
        for (dw, &x) in row.iter_mut().zip(input) {
            *dw = *dw + g * x;
        }
    }
    if let Some(d_input) = d_input {
        d_input.iter_mut().for_each(|x| *x = T::zero());
        for (o, &g) in d_out.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            let row = &weight[o * n_in..(o + 1) * n_in];
            for (di, &w) in d_input.iter_mut().zip(row) {
                *di = *di + g * w;
            }
        }
    }
}

pub fn relu_inplace<T: Real>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Masks `grad` by `out > 0` where `out` is the post-ReLU activation.
pub fn relu_backward<T: Real>(out: &[T], grad: &mut [T]) {
    for (g, &o) in grad.iter_mut().zip(out) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}

pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}
