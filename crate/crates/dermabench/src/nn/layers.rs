//! Layers with explicit forward/backward passes.
//!
//! Convolutions lower to im2col + matrix multiply per sample (grouped, so the
//! same path serves dense and depthwise convolutions). Batch norm keeps
//! per-channel running statistics for inference.

use ndarray::{s, Array1, Array2, Array4, ArrayD, ArrayView3, Axis, Ix2};

use crate::nn::graph::GraphOp;
use crate::nn::init::Initializer;
use crate::scalar::Real;

/// A trainable tensor with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param<S: Real> {
    pub value: ArrayD<S>,
    pub grad: ArrayD<S>,
    pub trainable: bool,
}

impl<S: Real> Param<S> {
    pub fn new(value: ArrayD<S>) -> Self {
        let grad = ArrayD::zeros(value.raw_dim());
        Param {
            value,
            grad,
            trainable: true,
        }
    }
}

fn out_dim(size: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (size + 2 * pad - kernel) / stride + 1
}

/// Gather a channel range of one sample into the (Cg·kh·kw, OH·OW) patch matrix.
#[allow(clippy::too_many_arguments)]
fn im2col<S: Real>(
    x: &ArrayView3<'_, S>,
    c0: usize,
    c1: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
) -> Array2<S> {
    let (h, w) = (x.shape()[1], x.shape()[2]);
    let mut col = Array2::zeros(((c1 - c0) * kh * kw, oh * ow));
    for c in c0..c1 {
        for i in 0..kh {
            for j in 0..kw {
                let row = ((c - c0) * kh + i) * kw + j;
                for oy in 0..oh {
                    let sy = (oy * stride + i) as isize - ph as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let sx = (ox * stride + j) as isize - pw as isize;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        col[[row, oy * ow + ox]] = x[[c, sy as usize, sx as usize]];
                    }
                }
            }
        }
    }
    col
}

/// Scatter-add the patch-matrix gradient back onto the input gradient.
#[allow(clippy::too_many_arguments)]
fn col2im_add<S: Real>(
    gcol: &Array2<S>,
    gx: &mut ndarray::ArrayViewMut3<'_, S>,
    c0: usize,
    c1: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
) {
    let (h, w) = (gx.shape()[1], gx.shape()[2]);
    for c in c0..c1 {
        for i in 0..kh {
            for j in 0..kw {
                let row = ((c - c0) * kh + i) * kw + j;
                for oy in 0..oh {
                    let sy = (oy * stride + i) as isize - ph as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let sx = (ox * stride + j) as isize - pw as isize;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        gx[[c, sy as usize, sx as usize]] += gcol[[row, oy * ow + ox]];
                    }
                }
            }
        }
    }
}

/// 2-D convolution, optionally grouped (groups == in_channels gives depthwise).
///
/// The weight is stored as (out_channels, in_channels/groups · kh · kw).
pub struct Conv2d<S: Real> {
    pub weight: Param<S>,
    pub bias: Option<Param<S>>,
    in_channels: usize,
    out_channels: usize,
    kernel: (usize, usize),
    stride: usize,
    padding: (usize, usize),
    groups: usize,
}

impl<S: Real> Conv2d<S> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: (usize, usize),
        groups: usize,
        bias: bool,
        init: &mut Initializer,
    ) -> Self {
        assert!(in_channels.is_multiple_of(groups) && out_channels.is_multiple_of(groups));
        let cg = in_channels / groups;
        let fan_in = cg * kernel.0 * kernel.1;
        let weight = Param::new(init.he_normal(&[out_channels, fan_in], fan_in));
        let bias = bias.then(|| Param::new(ArrayD::zeros(ndarray::IxDyn(&[out_channels]))));
        Conv2d {
            weight,
            bias,
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            groups,
        }
    }

    /// Same-padding 1×1 convolution (pointwise).
    pub fn pointwise(
        in_channels: usize,
        out_channels: usize,
        bias: bool,
        init: &mut Initializer,
    ) -> Self {
        Conv2d::new(in_channels, out_channels, (1, 1), 1, (0, 0), 1, bias, init)
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }
}

impl<S: Real> GraphOp<S> for Conv2d<S> {
    fn forward(&mut self, inputs: &[&Array4<S>], _train: bool) -> Array4<S> {
        let x = inputs[0];
        let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        assert_eq!(c, self.in_channels, "{} input channels", self.name());
        let (kh, kw) = self.kernel;
        let (ph, pw) = self.padding;
        let oh = out_dim(h, kh, self.stride, ph);
        let ow = out_dim(w, kw, self.stride, pw);
        let cg = self.in_channels / self.groups;
        let og = self.out_channels / self.groups;
        let w2 = self.weight.value.view().into_dimensionality::<Ix2>().unwrap();
        let mut y = Array4::zeros((b, self.out_channels, oh, ow));
        for bi in 0..b {
            let xb = x.index_axis(Axis(0), bi);
            for g in 0..self.groups {
                let col = im2col(&xb, g * cg, (g + 1) * cg, kh, kw, self.stride, ph, pw, oh, ow);
                let wg = w2.slice(s![g * og..(g + 1) * og, ..]);
                let yg = wg.dot(&col);
                let yg = yg.into_shape_with_order((og, oh, ow)).unwrap();
                y.slice_mut(s![bi, g * og..(g + 1) * og, .., ..]).assign(&yg);
            }
            if let Some(bias) = &self.bias {
                for oc in 0..self.out_channels {
                    let bv = bias.value[[oc]];
                    y.slice_mut(s![bi, oc, .., ..]).mapv_inplace(|v| v + bv);
                }
            }
        }
        y
    }

    fn backward(
        &mut self,
        inputs: &[&Array4<S>],
        _output: &Array4<S>,
        grad_out: &Array4<S>,
    ) -> Vec<Array4<S>> {
        let x = inputs[0];
        let (b, _, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let (kh, kw) = self.kernel;
        let (ph, pw) = self.padding;
        let oh = out_dim(h, kh, self.stride, ph);
        let ow = out_dim(w, kw, self.stride, pw);
        let cg = self.in_channels / self.groups;
        let og = self.out_channels / self.groups;
        let w2 = self.weight.value.view().into_dimensionality::<Ix2>().unwrap();
        let mut gw = Array2::<S>::zeros(w2.raw_dim());
        let mut gx = Array4::zeros(x.raw_dim());
        for bi in 0..b {
            let xb = x.index_axis(Axis(0), bi);
            for g in 0..self.groups {
                let col = im2col(&xb, g * cg, (g + 1) * cg, kh, kw, self.stride, ph, pw, oh, ow);
                let gy = grad_out
                    .slice(s![bi, g * og..(g + 1) * og, .., ..])
                    .to_shape((og, oh * ow))
                    .unwrap()
                    .into_owned();
                gw.slice_mut(s![g * og..(g + 1) * og, ..])
                    .scaled_add(S::one(), &gy.dot(&col.t()));
                let wg = w2.slice(s![g * og..(g + 1) * og, ..]);
                let gcol = wg.t().dot(&gy);
                let mut gxb = gx.index_axis_mut(Axis(0), bi);
                col2im_add(&gcol, &mut gxb, g * cg, (g + 1) * cg, kh, kw, self.stride, ph, pw, oh, ow);
            }
        }
        self.weight
            .grad
            .view_mut()
            .into_dimensionality::<Ix2>()
            .unwrap()
            .scaled_add(S::one(), &gw);
        if let Some(bias) = &mut self.bias {
            for oc in 0..self.out_channels {
                let gsum = grad_out.slice(s![.., oc, .., ..]).sum();
                bias.grad[[oc]] += gsum;
            }
        }
        vec![gx]
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        f(&mut self.weight);
        if let Some(bias) = &mut self.bias {
            f(bias);
        }
    }

    fn name(&self) -> &'static str {
        "conv2d"
    }
}

/// Batch normalization over (B, H, W) per channel.
pub struct BatchNorm2d<S: Real> {
    pub gamma: Param<S>,
    pub beta: Param<S>,
    pub running_mean: Array1<S>,
    pub running_var: Array1<S>,
    pub momentum: f64,
    pub eps: f64,
    channels: usize,
    saved_mean: Array1<S>,
    saved_inv_std: Array1<S>,
    saw_train: bool,
}

impl<S: Real> BatchNorm2d<S> {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Param::new(ArrayD::ones(ndarray::IxDyn(&[channels]))),
            beta: Param::new(ArrayD::zeros(ndarray::IxDyn(&[channels]))),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            momentum: 0.1,
            eps: 1e-5,
            channels,
            saved_mean: Array1::zeros(channels),
            saved_inv_std: Array1::zeros(channels),
            saw_train: false,
        }
    }
}

impl<S: Real> GraphOp<S> for BatchNorm2d<S> {
    fn forward(&mut self, inputs: &[&Array4<S>], train: bool) -> Array4<S> {
        let x = inputs[0];
        let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        assert_eq!(c, self.channels);
        let m = S::from_f64_c((b * h * w) as f64);
        let eps = S::from_f64_c(self.eps);
        let mut y = Array4::zeros(x.raw_dim());
        self.saw_train = train;
        for ci in 0..c {
            let xc = x.slice(s![.., ci, .., ..]);
            let (mean, inv_std) = if train {
                let mean = xc.sum() / m;
                let var = xc.mapv(|v| (v - mean) * (v - mean)).sum() / m;
                let mom = S::from_f64_c(self.momentum);
                self.running_mean[ci] =
                    self.running_mean[ci] * (S::one() - mom) + mean * mom;
                self.running_var[ci] = self.running_var[ci] * (S::one() - mom) + var * mom;
                (mean, S::one() / (var + eps).sqrt())
            } else {
                (
                    self.running_mean[ci],
                    S::one() / (self.running_var[ci] + eps).sqrt(),
                )
            };
            self.saved_mean[ci] = mean;
            self.saved_inv_std[ci] = inv_std;
            let gamma = self.gamma.value[[ci]];
            let beta = self.beta.value[[ci]];
            let mut yc = y.slice_mut(s![.., ci, .., ..]);
            yc.assign(&xc);
            yc.mapv_inplace(|v| (v - mean) * inv_std * gamma + beta);
        }
        y
    }

    fn backward(
        &mut self,
        inputs: &[&Array4<S>],
        _output: &Array4<S>,
        grad_out: &Array4<S>,
    ) -> Vec<Array4<S>> {
        let x = inputs[0];
        let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let m = S::from_f64_c((b * h * w) as f64);
        let mut gx = Array4::zeros(x.raw_dim());
        for ci in 0..c {
            let xc = x.slice(s![.., ci, .., ..]);
            let gc = grad_out.slice(s![.., ci, .., ..]);
            let mean = self.saved_mean[ci];
            let inv_std = self.saved_inv_std[ci];
            let gamma = self.gamma.value[[ci]];
            let sum_g = gc.sum();
            let mut sum_g_xhat = S::zero();
            ndarray::Zip::from(&xc).and(&gc).for_each(|&xv, &gv| {
                sum_g_xhat += gv * (xv - mean) * inv_std;
            });
            self.gamma.grad[[ci]] += sum_g_xhat;
            self.beta.grad[[ci]] += sum_g;
            let mut gxc = gx.slice_mut(s![.., ci, .., ..]);
            if self.saw_train {
                let mean_g = sum_g / m;
                let mean_g_xhat = sum_g_xhat / m;
                ndarray::Zip::from(&mut gxc).and(&xc).and(&gc).for_each(|o, &xv, &gv| {
                    let xhat = (xv - mean) * inv_std;
                    *o = gamma * inv_std * (gv - mean_g - xhat * mean_g_xhat);
                });
            } else {
                ndarray::Zip::from(&mut gxc).and(&gc).for_each(|o, &gv| {
                    *o = gamma * inv_std * gv;
                });
            }
        }
        vec![gx]
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }

    fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut [S])) {
        f(self.running_mean.as_slice_mut().expect("contiguous"));
        f(self.running_var.as_slice_mut().expect("contiguous"));
    }

    fn name(&self) -> &'static str {
        "batch_norm"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActKind {
    Relu,
    Silu,
    Sigmoid,
}

/// Elementwise activation.
pub struct Activation {
    pub kind: ActKind,
}

impl Activation {
    pub fn relu() -> Self {
        Activation { kind: ActKind::Relu }
    }

    pub fn silu() -> Self {
        Activation { kind: ActKind::Silu }
    }

    pub fn sigmoid() -> Self {
        Activation {
            kind: ActKind::Sigmoid,
        }
    }
}

fn sigmoid_scalar<S: Real>(v: S) -> S {
    S::one() / (S::one() + (-v).exp())
}

impl<S: Real> GraphOp<S> for Activation {
    fn forward(&mut self, inputs: &[&Array4<S>], _train: bool) -> Array4<S> {
        let x = inputs[0];
        match self.kind {
            ActKind::Relu => x.mapv(|v| if v > S::zero() { v } else { S::zero() }),
            ActKind::Silu => x.mapv(|v| v * sigmoid_scalar(v)),
            ActKind::Sigmoid => x.mapv(sigmoid_scalar),
        }
    }

    fn backward(
        &mut self,
        inputs: &[&Array4<S>],
        output: &Array4<S>,
        grad_out: &Array4<S>,
    ) -> Vec<Array4<S>> {
        let x = inputs[0];
        let gx = match self.kind {
            ActKind::Relu => {
                let mut g = grad_out.clone();
                ndarray::Zip::from(&mut g).and(x).for_each(|gv, &xv| {
                    if xv <= S::zero() {
                        *gv = S::zero();
                    }
                });
                g
            }
            ActKind::Silu => {
                let mut g = grad_out.clone();
                ndarray::Zip::from(&mut g).and(x).for_each(|gv, &xv| {
                    let sig = sigmoid_scalar(xv);
                    *gv *= sig * (S::one() + xv * (S::one() - sig));
                });
                g
            }
            ActKind::Sigmoid => {
                let mut g = grad_out.clone();
                ndarray::Zip::from(&mut g).and(output).for_each(|gv, &yv| {
                    *gv = *gv * yv * (S::one() - yv);
                });
                g
            }
        };
        vec![gx]
    }

    fn name(&self) -> &'static str {
        "activation"
    }
}

/// Max pooling; padded positions never win.
pub struct MaxPool2d {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    argmax: Vec<usize>,
    in_shape: [usize; 4],
}

impl MaxPool2d {
    pub fn new(kernel: usize, stride: usize, padding: usize) -> Self {
        MaxPool2d {
            kernel,
            stride,
            padding,
            argmax: Vec::new(),
            in_shape: [0; 4],
        }
    }
}

impl<S: Real> GraphOp<S> for MaxPool2d {
    fn forward(&mut self, inputs: &[&Array4<S>], _train: bool) -> Array4<S> {
        let x = inputs[0];
        let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let oh = out_dim(h, self.kernel, self.stride, self.padding);
        let ow = out_dim(w, self.kernel, self.stride, self.padding);
        self.in_shape = [b, c, h, w];
        self.argmax.clear();
        self.argmax.reserve(b * c * oh * ow);
        let mut y = Array4::zeros((b, c, oh, ow));
        for bi in 0..b {
            for ci in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = S::neg_infinity();
                        let mut best_idx = 0usize;
                        for i in 0..self.kernel {
                            let sy = (oy * self.stride + i) as isize - self.padding as isize;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            for j in 0..self.kernel {
                                let sx = (ox * self.stride + j) as isize - self.padding as isize;
                                if sx < 0 || sx >= w as isize {
                                    continue;
                                }
                                let v = x[[bi, ci, sy as usize, sx as usize]];
                                if v > best {
                                    best = v;
                                    best_idx = sy as usize * w + sx as usize;
                                }
                            }
                        }
                        y[[bi, ci, oy, ox]] = best;
                        self.argmax.push(best_idx);
                    }
                }
            }
        }
        y
    }

    fn backward(
        &mut self,
        _inputs: &[&Array4<S>],
        output: &Array4<S>,
        grad_out: &Array4<S>,
    ) -> Vec<Array4<S>> {
        let [b, c, h, w] = self.in_shape;
        let (oh, ow) = (output.shape()[2], output.shape()[3]);
        let mut gx = Array4::zeros((b, c, h, w));
        let mut k = 0usize;
        for bi in 0..b {
            for ci in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let idx = self.argmax[k];
                        k += 1;
                        let (sy, sx) = (idx / w, idx % w);
                        gx[[bi, ci, sy, sx]] += grad_out[[bi, ci, oy, ox]];
                    }
                }
            }
        }
        vec![gx]
    }

    fn name(&self) -> &'static str {
        "max_pool"
    }
}

/// Average pooling; the divisor is always kernel², padding included.
pub struct AvgPool2d {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl AvgPool2d {
    pub fn new(kernel: usize, stride: usize, padding: usize) -> Self {
        AvgPool2d {
            kernel,
            stride,
            padding,
        }
    }
}

impl<S: Real> GraphOp<S> for AvgPool2d {
    fn forward(&mut self, inputs: &[&Array4<S>], _train: bool) -> Array4<S> {
        let x = inputs[0];
        let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let oh = out_dim(h, self.kernel, self.stride, self.padding);
        let ow = out_dim(w, self.kernel, self.stride, self.padding);
        let scale = S::one() / S::from_f64_c((self.kernel * self.kernel) as f64);
        let mut y = Array4::zeros((b, c, oh, ow));
        for bi in 0..b {
            for ci in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = S::zero();
                        for i in 0..self.kernel {
                            let sy = (oy * self.stride + i) as isize - self.padding as isize;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            for j in 0..self.kernel {
                                let sx = (ox * self.stride + j) as isize - self.padding as isize;
                                if sx < 0 || sx >= w as isize {
                                    continue;
                                }
                                acc += x[[bi, ci, sy as usize, sx as usize]];
                            }
                        }
                        y[[bi, ci, oy, ox]] = acc * scale;
                    }
                }
            }
        }
        y
    }

    fn backward(
        &mut self,
        inputs: &[&Array4<S>],
        output: &Array4<S>,
        grad_out: &Array4<S>,
    ) -> Vec<Array4<S>> {
        let x = inputs[0];
        let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let (oh, ow) = (output.shape()[2], output.shape()[3]);
        let scale = S::one() / S::from_f64_c((self.kernel * self.kernel) as f64);
        let mut gx = Array4::zeros((b, c, h, w));
        for bi in 0..b {
            for ci in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let g = grad_out[[bi, ci, oy, ox]] * scale;
                        for i in 0..self.kernel {
                            let sy = (oy * self.stride + i) as isize - self.padding as isize;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            for j in 0..self.kernel {
                                let sx = (ox * self.stride + j) as isize - self.padding as isize;
                                if sx < 0 || sx >= w as isize {
                                    continue;
                                }
                                gx[[bi, ci, sy as usize, sx as usize]] += g;
                            }
                        }
                    }
                }
            }
        }
        vec![gx]
    }

    fn name(&self) -> &'static str {
        "avg_pool"
    }
}

/// Global average pooling to (B, C, 1, 1).
pub struct GlobalAvgPool;

impl<S: Real> GraphOp<S> for GlobalAvgPool {
    fn forward(&mut self, inputs: &[&Array4<S>], _train: bool) -> Array4<S> {
        let x = inputs[0];
        let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let scale = S::one() / S::from_f64_c((h * w) as f64);
        let mut y = Array4::zeros((b, c, 1, 1));
        for bi in 0..b {
            for ci in 0..c {
                y[[bi, ci, 0, 0]] = x.slice(s![bi, ci, .., ..]).sum() * scale;
            }
        }
        y
    }

    fn backward(
        &mut self,
        inputs: &[&Array4<S>],
        _output: &Array4<S>,
        grad_out: &Array4<S>,
    ) -> Vec<Array4<S>> {
        let x = inputs[0];
        let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let scale = S::one() / S::from_f64_c((h * w) as f64);
        let mut gx = Array4::zeros(x.raw_dim());
        for bi in 0..b {
            for ci in 0..c {
                let g = grad_out[[bi, ci, 0, 0]] * scale;
                gx.slice_mut(s![bi, ci, .., ..]).fill(g);
            }
        }
        vec![gx]
    }

    fn name(&self) -> &'static str {
        "global_avg_pool"
    }
}

/// Elementwise sum of two same-shaped inputs (residual connection).
pub struct ElementAdd;

impl<S: Real> GraphOp<S> for ElementAdd {
    fn forward(&mut self, inputs: &[&Array4<S>], _train: bool) -> Array4<S> {
        inputs[0] + inputs[1]
    }

    fn backward(
        &mut self,
        _inputs: &[&Array4<S>],
        _output: &Array4<S>,
        grad_out: &Array4<S>,
    ) -> Vec<Array4<S>> {
        vec![grad_out.clone(), grad_out.clone()]
    }

    fn name(&self) -> &'static str {
        "add"
    }
}

/// Channel-axis concatenation of any number of inputs.
pub struct ConcatChannels;

impl<S: Real> GraphOp<S> for ConcatChannels {
    fn forward(&mut self, inputs: &[&Array4<S>], _train: bool) -> Array4<S> {
        let views: Vec<_> = inputs.iter().map(|x| x.view()).collect();
        ndarray::concatenate(Axis(1), &views).expect("channel concat")
    }

    fn backward(
        &mut self,
        inputs: &[&Array4<S>],
        _output: &Array4<S>,
        grad_out: &Array4<S>,
    ) -> Vec<Array4<S>> {
        let mut grads = Vec::with_capacity(inputs.len());
        let mut c0 = 0;
        for x in inputs {
            let c = x.shape()[1];
            grads.push(grad_out.slice(s![.., c0..c0 + c, .., ..]).to_owned());
            c0 += c;
        }
        grads
    }

    fn name(&self) -> &'static str {
        "concat"
    }
}

/// Multiply a (B, C, H, W) map by per-channel gates (B, C, 1, 1)
/// (squeeze-excitation rescaling).
pub struct MulBroadcast;

impl<S: Real> GraphOp<S> for MulBroadcast {
    fn forward(&mut self, inputs: &[&Array4<S>], _train: bool) -> Array4<S> {
        let (x, a) = (inputs[0], inputs[1]);
        let mut y = x.clone();
        for bi in 0..x.shape()[0] {
            for ci in 0..x.shape()[1] {
                let gate = a[[bi, ci, 0, 0]];
                y.slice_mut(s![bi, ci, .., ..]).mapv_inplace(|v| v * gate);
            }
        }
        y
    }

    fn backward(
        &mut self,
        inputs: &[&Array4<S>],
        _output: &Array4<S>,
        grad_out: &Array4<S>,
    ) -> Vec<Array4<S>> {
        let (x, a) = (inputs[0], inputs[1]);
        let mut gx = grad_out.clone();
        let mut ga = Array4::zeros(a.raw_dim());
        for bi in 0..x.shape()[0] {
            for ci in 0..x.shape()[1] {
                let gate = a[[bi, ci, 0, 0]];
                let mut acc = S::zero();
                ndarray::Zip::from(&x.slice(s![bi, ci, .., ..]))
                    .and(&grad_out.slice(s![bi, ci, .., ..]))
                    .for_each(|&xv, &gv| acc += xv * gv);
                ga[[bi, ci, 0, 0]] = acc;
                gx.slice_mut(s![bi, ci, .., ..]).mapv_inplace(|v| v * gate);
            }
        }
        vec![gx, ga]
    }

    fn name(&self) -> &'static str {
        "mul_broadcast"
    }
}

/// Fully connected layer on (B, F) matrices; used by the classifier head.
pub struct Linear<S: Real> {
    pub weight: Param<S>, // (out, in)
    pub bias: Param<S>,   // (out)
    in_features: usize,
    out_features: usize,
}

impl<S: Real> Linear<S> {
    pub fn new(in_features: usize, out_features: usize, init: &mut Initializer) -> Self {
        Linear {
            weight: Param::new(init.glorot_uniform(
                &[out_features, in_features],
                in_features,
                out_features,
            )),
            bias: Param::new(ArrayD::zeros(ndarray::IxDyn(&[out_features]))),
            in_features,
            out_features,
        }
    }

    pub fn in_features(&self) -> usize {
        self.in_features
    }

    pub fn forward(&self, x: &Array2<S>) -> Array2<S> {
        let w = self.weight.value.view().into_dimensionality::<Ix2>().unwrap();
        let mut y = x.dot(&w.t());
        for o in 0..self.out_features {
            let b = self.bias.value[[o]];
            y.column_mut(o).mapv_inplace(|v| v + b);
        }
        y
    }

    /// Accumulates weight/bias gradients, returns the input gradient.
    pub fn backward(&mut self, x: &Array2<S>, grad_out: &Array2<S>) -> Array2<S> {
        let w = self.weight.value.view().into_dimensionality::<Ix2>().unwrap();
        let gx = grad_out.dot(&w);
        let gw = grad_out.t().dot(x);
        self.weight
            .grad
            .view_mut()
            .into_dimensionality::<Ix2>()
            .unwrap()
            .scaled_add(S::one(), &gw);
        for o in 0..self.out_features {
            let gsum = grad_out.column(o).sum();
            self.bias.grad[[o]] += gsum;
        }
        gx
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}
