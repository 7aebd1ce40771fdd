//! U-Net: two 3×3 conv+ReLU per level, 2×2 max-pool down, nearest-neighbour
//! upsample followed by conv+ReLU, skip connections by channel concatenation,
//! and a linear 1×1 output layer. Inputs whose sides are not multiples of
//! `2^depth` are reflect-padded and the output cropped back.

use rand::Rng as _;

use super::layers::{self, ConvShape};
use super::FeatureMap;
use crate::error::{Error, Result};
use crate::rng::derived_rng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UNetConfig {
    pub depth: usize,
    pub base_channels: usize,
    pub kernel: usize,
    /// Only `false` is supported; kept for descriptor compatibility with deep configs.
    pub batch_norm: bool,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Default for UNetConfig {
    fn default() -> Self {
        Self { depth: 2, base_channels: 32, kernel: 3, batch_norm: false, in_channels: 1, out_channels: 1 }
    }
}

impl UNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("U-Net depth must be at least 1".into()));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel {} must be odd", self.kernel)));
        }
        if self.base_channels == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        if self.batch_norm {
            return Err(Error::Config("batch normalization is not supported".into()));
        }
        Ok(())
    }

    fn channels_at(&self, level: usize) -> usize {
        self.base_channels << level
    }

    /// Convolution layers in execution order.
    pub fn layers(&self) -> Vec<(String, ConvShape)> {
        let k = self.kernel;
        let mut out = Vec::new();
        for l in 0..=self.depth {
            let cin = if l == 0 { self.in_channels } else { self.channels_at(l - 1) };
            let c = self.channels_at(l);
            out.push((format!("enc{l}.conv0"), ConvShape { cin, cout: c, kernel: k }));
            out.push((format!("enc{l}.conv1"), ConvShape { cin: c, cout: c, kernel: k }));
        }
        for l in (0..self.depth).rev() {
            let c = self.channels_at(l);
            out.push((format!("dec{l}.up"), ConvShape { cin: 2 * c, cout: c, kernel: k }));
            out.push((format!("dec{l}.conv0"), ConvShape { cin: 2 * c, cout: c, kernel: k }));
            out.push((format!("dec{l}.conv1"), ConvShape { cin: c, cout: c, kernel: k }));
        }
        out.push(("out".to_string(), ConvShape { cin: self.base_channels, cout: self.out_channels, kernel: 1 }));
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(_, s)| s.param_count()).sum()
    }
}

/// Network weights. `params[2 i]` is the weight and `params[2 i + 1]` the
/// bias of layer `i` of [`UNetConfig::layers`].
#[derive(Clone, Debug, PartialEq)]
pub struct UNet<T> {
    config: UNetConfig,
    layers: Vec<(String, ConvShape)>,
    params: Vec<Vec<T>>,
}

/// Gradients in the same layout as [`UNet::params`].
pub type UNetGrads<T> = Vec<Vec<T>>;

#[derive(Clone, Debug)]
enum Node {
    Input,
    Conv { layer: usize, src: usize },
    Relu { src: usize },
    Pool { src: usize, argmax: Vec<usize> },
    Up { src: usize },
    Cat { a: usize, b: usize },
    Pad { src: usize },
    Crop { src: usize },
}

/// Recorded activations of one forward pass.
#[derive(Clone, Debug)]
pub struct Tape<T> {
    nodes: Vec<Node>,
    values: Vec<FeatureMap<T>>,
}

impl<T: Scalar> Tape<T> {
    fn push(&mut self, node: Node, value: FeatureMap<T>) -> usize {
        self.nodes.push(node);
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn output(&self) -> &FeatureMap<T> {
        self.values.last().expect("non-empty tape")
    }

    pub fn input(&self) -> &FeatureMap<T> {
        &self.values[0]
    }
}

impl<T: Scalar> UNet<T> {
    /// He-uniform weights (`U(-b, b)`, `b = sqrt(6 / fan_in)`), zero biases.
    pub fn new(config: UNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layers = config.layers();
        let mut rng = derived_rng(seed, "unet_init", &[]);
        let mut params = Vec::with_capacity(2 * layers.len());
        for (_, s) in &layers {
            let bound = (6.0 / (s.cin * s.kernel * s.kernel) as f64).sqrt();
            params.push((0..s.weight_len()).map(|_| T::of(rng.random_range(-bound..bound))).collect());
            params.push(vec![T::zero(); s.cout]);
        }
        Ok(Self { config, layers, params })
    }

    pub fn zeros(config: UNetConfig) -> Result<Self> {
        let mut net = Self::new(config, 0)?;
        net.params.iter_mut().for_each(|p| p.iter_mut().for_each(|v| *v = T::zero()));
        Ok(net)
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Vec<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<T>] {
        &mut self.params
    }

    /// `(name, shape)` of every tensor in parameter order; weights are
    /// `[cout, cin, k, k]`, biases `[cout]`.
    pub fn tensor_names(&self) -> Vec<(String, Vec<usize>)> {
        self.layers
            .iter()
            .flat_map(|(name, s)| {
                [
                    (format!("{name}.weight"), vec![s.cout, s.cin, s.kernel, s.kernel]),
                    (format!("{name}.bias"), vec![s.cout]),
                ]
            })
            .collect()
    }

    /// Replaces all tensors; lengths must match the architecture.
    pub fn set_params(&mut self, params: Vec<Vec<T>>) -> Result<()> {
        if params.len() != self.params.len() || params.iter().zip(&self.params).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Checkpoint("tensor shapes do not match the architecture".into()));
        }
        self.params = params;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    pub fn zero_grads(&self) -> UNetGrads<T> {
        self.params.iter().map(|p| vec![T::zero(); p.len()]).collect()
    }

    fn conv(&self, tape: &mut Tape<T>, src: usize, layer: usize, activate: bool) -> usize {
        let shape = self.layers[layer].1;
        let v = layers::conv2d(&tape.values[src], shape, &self.params[2 * layer], &self.params[2 * layer + 1]);
        let id = tape.push(Node::Conv { layer, src }, v);
        if activate {
            let r = layers::relu(&tape.values[id]);
            tape.push(Node::Relu { src: id }, r)
        } else {
            id
        }
    }

    pub fn forward(&self, x: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        Ok(self.forward_tape(x)?.values.pop().expect("output"))
    }

    pub fn forward_tape(&self, x: &FeatureMap<T>) -> Result<Tape<T>> {
        if x.channels != self.config.in_channels {
            return Err(Error::Dimension(format!(
                "network expects {} channels, got {}",
                self.config.in_channels, x.channels
            )));
        }
        let mut tape = Tape { nodes: vec![Node::Input], values: vec![x.clone()] };
        let m = 1usize << self.config.depth;
        let (h, w) = (x.height, x.width);
        let (ph, pw) = (h.div_ceil(m) * m, w.div_ceil(m) * m);
        let mut cur = 0;
        if (ph, pw) != (h, w) {
            let v = layers::reflect_pad(x, ph, pw);
            cur = tape.push(Node::Pad { src: 0 }, v);
        }
        let mut layer = 0;
        let mut skips = Vec::with_capacity(self.config.depth);
        for l in 0..=self.config.depth {
            if l > 0 {
                let (v, argmax) = layers::max_pool2(&tape.values[cur]);
                cur = tape.push(Node::Pool { src: cur, argmax }, v);
            }
            cur = self.conv(&mut tape, cur, layer, true);
            cur = self.conv(&mut tape, cur, layer + 1, true);
            layer += 2;
            if l < self.config.depth {
                skips.push(cur);
            }
        }
        for l in (0..self.config.depth).rev() {
            let v = layers::upsample2(&tape.values[cur]);
            cur = tape.push(Node::Up { src: cur }, v);
            cur = self.conv(&mut tape, cur, layer, true);
            let v = layers::concat(&tape.values[cur], &tape.values[skips[l]]);
            cur = tape.push(Node::Cat { a: cur, b: skips[l] }, v);
            cur = self.conv(&mut tape, cur, layer + 1, true);
            cur = self.conv(&mut tape, cur, layer + 2, true);
            layer += 3;
        }
        cur = self.conv(&mut tape, cur, layer, false);
        if (ph, pw) != (h, w) {
            let v = layers::crop(&tape.values[cur], h, w);
            tape.push(Node::Crop { src: cur }, v);
        }
        Ok(tape)
    }

    /// Reverse pass. Returns the gradient with respect to the input and adds
    /// parameter gradients into `grads`.
    pub fn backward(
        &self,
        tape: &Tape<T>,
        grad_out: &FeatureMap<T>,
        grads: &mut UNetGrads<T>,
    ) -> Result<FeatureMap<T>> {
        if grad_out.shape() != tape.output().shape() {
            return Err(Error::Dimension(format!(
                "upstream gradient {:?} vs output {:?}",
                grad_out.shape(),
                tape.output().shape()
            )));
        }
        let n = tape.values.len();
        let mut g: Vec<Option<FeatureMap<T>>> = vec![None; n];
        g[n - 1] = Some(grad_out.clone());
        let add = |g: &mut Vec<Option<FeatureMap<T>>>, id: usize, v: FeatureMap<T>| match &mut g[id] {
            Some(acc) => acc.add_assign(&v),
            slot => *slot = Some(v),
        };
        for id in (1..n).rev() {
            let Some(gy) = g[id].take() else { continue };
            match &tape.nodes[id] {
                Node::Input => unreachable!("input is node 0"),
                Node::Conv { layer, src } => {
                    let shape = self.layers[*layer].1;
                    let (gx, gw, gb) = layers::conv2d_backward(&tape.values[*src], shape, &self.params[2 * layer], &gy);
                    grads[2 * layer].iter_mut().zip(&gw).for_each(|(a, &b)| *a += b);
                    grads[2 * layer + 1].iter_mut().zip(&gb).for_each(|(a, &b)| *a += b);
                    add(&mut g, *src, gx);
                }
                Node::Relu { src } => add(&mut g, *src, layers::relu_backward(&tape.values[id], &gy)),
                Node::Pool { src, argmax } => {
                    add(&mut g, *src, layers::max_pool2_backward(tape.values[*src].shape(), argmax, &gy))
                }
                Node::Up { src } => add(&mut g, *src, layers::upsample2_backward(&gy)),
                Node::Cat { a, b } => {
                    let (ga, gb) = layers::concat_backward(tape.values[*a].channels, &gy);
                    add(&mut g, *a, ga);
                    add(&mut g, *b, gb);
                }
                Node::Pad { src } => add(&mut g, *src, layers::reflect_pad_backward(tape.values[*src].shape(), &gy)),
                Node::Crop { src } => add(&mut g, *src, layers::crop_backward(tape.values[*src].shape(), &gy)),
            }
        }
        Ok(g[0]
            .take()
            .unwrap_or_else(|| FeatureMap::zeros(tape.values[0].channels, tape.values[0].height, tape.values[0].width)))
    }
}
