//! Layer primitives and their adjoints. Convolutions use zero "same" padding.

use super::FeatureMap;
use crate::scalar::Scalar;

/// Shape of a 2D convolution `cin -> cout` with a square odd kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
}

impl ConvShape {
    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * self.kernel * self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.weight_len() + self.cout
    }
}

/// Output row range for which `row + offset` lies inside `0..len`.
#[inline]
fn valid(len: usize, offset: isize) -> std::ops::Range<usize> {
    let lo = (-offset).max(0) as usize;
    let hi = (len as isize - offset).clamp(0, len as isize) as usize;
    lo..hi.max(lo)
}

pub fn conv2d<T: Scalar>(input: &FeatureMap<T>, shape: ConvShape, weight: &[T], bias: &[T]) -> FeatureMap<T> {
    let (cin, h, w) = input.shape();
    assert_eq!(cin, shape.cin, "conv input channels");
    let k = shape.kernel;
    let pad = (k / 2) as isize;
    let mut out = FeatureMap::zeros(shape.cout, h, w);
    for o in 0..shape.cout {
        let dst = out.plane_mut(o);
        dst.iter_mut().for_each(|v| *v = bias[o]);
        for i in 0..cin {
            let src = input.plane(i);
            for ky in 0..k {
                let dy = ky as isize - pad;
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let wv = weight[((o * cin + i) * k + ky) * k + kx];
                    let cols = valid(w, dx);
                    let sc = (cols.start as isize + dx) as usize;
                    let n = cols.len();
                    for r in valid(h, dy) {
                        let sr = (r as isize + dy) as usize;
                        let d = &mut dst[r * w + cols.start..r * w + cols.start + n];
                        let s = &src[sr * w + sc..sr * w + sc + n];
                        for (a, &b) in d.iter_mut().zip(s) {
                            *a += wv * b;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Returns `(grad_input, grad_weight, grad_bias)`.
pub fn conv2d_backward<T: Scalar>(
    input: &FeatureMap<T>,
    shape: ConvShape,
    weight: &[T],
    grad_out: &FeatureMap<T>,
) -> (FeatureMap<T>, Vec<T>, Vec<T>) {
    let (cin, h, w) = input.shape();
    let k = shape.kernel;
    let pad = (k / 2) as isize;
    let mut gin = FeatureMap::zeros(cin, h, w);
    let mut gw = vec![T::zero(); shape.weight_len()];
    let gb: Vec<T> = (0..shape.cout).map(|o| grad_out.plane(o).iter().copied().sum()).collect();
    for o in 0..shape.cout {
        let g = grad_out.plane(o);
        for i in 0..cin {
            let src = input.plane(i);
            for ky in 0..k {
                let dy = ky as isize - pad;
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let widx = ((o * cin + i) * k + ky) * k + kx;
                    let wv = weight[widx];
                    let cols = valid(w, dx);
                    let sc = (cols.start as isize + dx) as usize;
                    let n = cols.len();
                    let mut acc = T::zero();
                    let gi = gin.plane_mut(i);
                    for r in valid(h, dy) {
                        let sr = (r as isize + dy) as usize;
                        let gs = &g[r * w + cols.start..r * w + cols.start + n];
                        let s = &src[sr * w + sc..sr * w + sc + n];
                        acc += gs.iter().zip(s).map(|(&a, &b)| a * b).sum::<T>();
                        let d = &mut gi[sr * w + sc..sr * w + sc + n];
                        for (a, &b) in d.iter_mut().zip(gs) {
                            *a += wv * b;
                        }
                    }
                    gw[widx] += acc;
                }
            }
        }
    }
    (gin, gw, gb)
}

pub fn relu<T: Scalar>(input: &FeatureMap<T>) -> FeatureMap<T> {
    FeatureMap {
        data: input.data.iter().map(|&v| v.max(T::zero())).collect(),
        channels: input.channels,
        height: input.height,
        width: input.width,
    }
}

/// Gradient through ReLU given its output.
pub fn relu_backward<T: Scalar>(output: &FeatureMap<T>, grad_out: &FeatureMap<T>) -> FeatureMap<T> {
    FeatureMap {
        data: output
            .data
            .iter()
            .zip(&grad_out.data)
            .map(|(&y, &g)| if y > T::zero() { g } else { T::zero() })
            .collect(),
        channels: output.channels,
        height: output.height,
        width: output.width,
    }
}

/// 2×2 max pooling with stride 2 (dimensions must be even). Returns the
/// pooled map and, per output element, the flat input index of the maximum.
pub fn max_pool2<T: Scalar>(input: &FeatureMap<T>) -> (FeatureMap<T>, Vec<usize>) {
    let (c, h, w) = input.shape();
    assert!(h % 2 == 0 && w % 2 == 0, "max_pool2 needs even dimensions");
    let (oh, ow) = (h / 2, w / 2);
    let mut out = FeatureMap::zeros(c, oh, ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for k in 0..c {
        let base = k * h * w;
        for r in 0..oh {
            for col in 0..ow {
                let mut best = base + 2 * r * w + 2 * col;
                for (dr, dc) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * r + dr) * w + 2 * col + dc;
                    if input.data[idx] > input.data[best] {
                        best = idx;
                    }
                }
                out.data[(k * oh + r) * ow + col] = input.data[best];
                arg.push(best);
            }
        }
    }
    (out, arg)
}

pub fn max_pool2_backward<T: Scalar>(
    input_shape: (usize, usize, usize),
    argmax: &[usize],
    grad_out: &FeatureMap<T>,
) -> FeatureMap<T> {
    let (c, h, w) = input_shape;
    let mut g = FeatureMap::zeros(c, h, w);
    for (&idx, &v) in argmax.iter().zip(&grad_out.data) {
        g.data[idx] += v;
    }
    g
}

/// Nearest-neighbour 2× upsampling.
pub fn upsample2<T: Scalar>(input: &FeatureMap<T>) -> FeatureMap<T> {
    let (c, h, w) = input.shape();
    let mut out = FeatureMap::zeros(c, 2 * h, 2 * w);
    for k in 0..c {
        for r in 0..2 * h {
            for col in 0..2 * w {
                out.data[(k * 2 * h + r) * 2 * w + col] = input.data[(k * h + r / 2) * w + col / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward<T: Scalar>(grad_out: &FeatureMap<T>) -> FeatureMap<T> {
    let (c, h2, w2) = grad_out.shape();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut g = FeatureMap::zeros(c, h, w);
    for k in 0..c {
        for r in 0..h2 {
            for col in 0..w2 {
                g.data[(k * h + r / 2) * w + col / 2] += grad_out.data[(k * h2 + r) * w2 + col];
            }
        }
    }
    g
}

/// Channel concatenation `[a; b]`.
pub fn concat<T: Scalar>(a: &FeatureMap<T>, b: &FeatureMap<T>) -> FeatureMap<T> {
    assert_eq!((a.height, a.width), (b.height, b.width), "concat spatial mismatch");
    let mut data = a.data.clone();
    data.extend_from_slice(&b.data);
    FeatureMap { channels: a.channels + b.channels, height: a.height, width: a.width, data }
}

pub fn concat_backward<T: Scalar>(first_channels: usize, grad_out: &FeatureMap<T>) -> (FeatureMap<T>, FeatureMap<T>) {
    let n = grad_out.height * grad_out.width;
    let (ga, gb) = grad_out.data.split_at(first_channels * n);
    (
        FeatureMap { channels: first_channels, height: grad_out.height, width: grad_out.width, data: ga.to_vec() },
        FeatureMap {
            channels: grad_out.channels - first_channels,
            height: grad_out.height,
            width: grad_out.width,
            data: gb.to_vec(),
        },
    )
}

/// Reflection (without edge repetition) of an out-of-range coordinate.
fn reflect(mut p: usize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len - 1);
    p %= period;
    if p >= len {
        period - p
    } else {
        p
    }
}

/// Extends the bottom and right edges by reflection up to `height × width`.
pub fn reflect_pad<T: Scalar>(input: &FeatureMap<T>, height: usize, width: usize) -> FeatureMap<T> {
    let (c, h, w) = input.shape();
    let mut out = FeatureMap::zeros(c, height, width);
    for k in 0..c {
        for r in 0..height {
            let sr = reflect(r, h);
            for col in 0..width {
                out.data[(k * height + r) * width + col] = input.data[(k * h + sr) * w + reflect(col, w)];
            }
        }
    }
    out
}

pub fn reflect_pad_backward<T: Scalar>(input_shape: (usize, usize, usize), grad_out: &FeatureMap<T>) -> FeatureMap<T> {
    let (c, h, w) = input_shape;
    let (_, ph, pw) = grad_out.shape();
    let mut g = FeatureMap::zeros(c, h, w);
    for k in 0..c {
        for r in 0..ph {
            let sr = reflect(r, h);
            for col in 0..pw {
                g.data[(k * h + sr) * w + reflect(col, w)] += grad_out.data[(k * ph + r) * pw + col];
            }
        }
    }
    g
}

/// Top-left `height × width` window.
pub fn crop<T: Scalar>(input: &FeatureMap<T>, height: usize, width: usize) -> FeatureMap<T> {
    let (c, h, w) = input.shape();
    let mut out = FeatureMap::zeros(c, height, width);
    for k in 0..c {
        for r in 0..height {
            let s = (k * h + r) * w;
            out.data[(k * height + r) * width..(k * height + r + 1) * width].copy_from_slice(&input.data[s..s + width]);
        }
    }
    out
}

pub fn crop_backward<T: Scalar>(input_shape: (usize, usize, usize), grad_out: &FeatureMap<T>) -> FeatureMap<T> {
    let (c, h, w) = input_shape;
    let (_, oh, ow) = grad_out.shape();
    let mut g = FeatureMap::zeros(c, h, w);
    for k in 0..c {
        for r in 0..oh {
            let d = (k * h + r) * w;
            g.data[d..d + ow].copy_from_slice(&grad_out.data[(k * oh + r) * ow..(k * oh + r + 1) * ow]);
        }
    }
    g
}
