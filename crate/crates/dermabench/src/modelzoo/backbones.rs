//! The four backbone families, built as compute graphs.
//!
//! Each family comes in two presets: `Full` follows the published layer
//! configuration of the reference architecture, `Desk` is a reduced-width,
//! reduced-depth rendition of the same block structure sized for single-core
//! CPU training. Both share identical block builders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    ActKind, Activation, AvgPool2d, BatchNorm2d, ConcatChannels, Conv2d, ElementAdd,
    GlobalAvgPool, Graph, Initializer, MaxPool2d, MulBroadcast, NodeId, INPUT,
};
use crate::scalar::Real;

/// The four supported backbones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BackboneId {
    ResNet101,
    DenseNet169,
    EfficientNet,
    InceptionV3,
}

impl BackboneId {
    pub const ALL: [BackboneId; 4] = [
        BackboneId::ResNet101,
        BackboneId::DenseNet169,
        BackboneId::EfficientNet,
        BackboneId::InceptionV3,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            BackboneId::ResNet101 => "ResNet101",
            BackboneId::DenseNet169 => "DenseNet169",
            BackboneId::EfficientNet => "EfficientNet",
            BackboneId::InceptionV3 => "InceptionV3",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            BackboneId::ResNet101 => "resnet101",
            BackboneId::DenseNet169 => "densenet169",
            BackboneId::EfficientNet => "efficientnet",
            BackboneId::InceptionV3 => "inceptionv3",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_lowercase().as_str() {
            "resnet101" | "resnet" => Ok(BackboneId::ResNet101),
            "densenet169" | "densenet" => Ok(BackboneId::DenseNet169),
            "efficientnet" | "efficientnetb0" | "efficientnet-b0" => Ok(BackboneId::EfficientNet),
            "inceptionv3" | "inception" | "inception-v3" => Ok(BackboneId::InceptionV3),
            _ => Err(Error::UnknownBackbone {
                name: name.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for BackboneId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.display_name())
    }
}

impl std::str::FromStr for BackboneId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BackboneId::parse(s)
    }
}

/// Model size preset. `Desk` (default) trains on a single CPU core; `Full`
/// is the published layer configuration of each architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScalePreset {
    #[default]
    Desk,
    Full,
}

impl ScalePreset {
    pub fn slug(self) -> &'static str {
        match self {
            ScalePreset::Desk => "desk",
            ScalePreset::Full => "full",
        }
    }
}

/// A built feature extractor: graph from (B, 3, 224, 224) to (B, C, 1, 1).
pub struct Backbone<S: Real> {
    pub graph: Graph<S>,
    pub feature_dim: usize,
}

pub fn build_backbone<S: Real>(
    id: BackboneId,
    preset: ScalePreset,
    init: &mut Initializer,
) -> Backbone<S> {
    match id {
        BackboneId::ResNet101 => resnet(preset, init),
        BackboneId::DenseNet169 => densenet(preset, init),
        BackboneId::EfficientNet => efficientnet(preset, init),
        BackboneId::InceptionV3 => inception(preset, init),
    }
}

/// Shared builder state: the graph plus the initializer stream.
struct B<'a, S: Real> {
    g: Graph<S>,
    init: &'a mut Initializer,
}

impl<'a, S: Real> B<'a, S> {
    fn new(init: &'a mut Initializer) -> Self {
        B {
            g: Graph::new(),
            init,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn conv(
        &mut self,
        input: NodeId,
        in_c: usize,
        out_c: usize,
        kernel: (usize, usize),
        stride: usize,
        pad: (usize, usize),
        groups: usize,
    ) -> NodeId {
        let conv = Conv2d::new(in_c, out_c, kernel, stride, pad, groups, false, self.init);
        self.g.add(conv, vec![input])
    }

    fn bn(&mut self, input: NodeId, channels: usize) -> NodeId {
        self.g.add(BatchNorm2d::new(channels), vec![input])
    }

    fn act(&mut self, input: NodeId, kind: ActKind) -> NodeId {
        self.g.add(Activation { kind }, vec![input])
    }

    /// conv → batch norm → activation.
    #[allow(clippy::too_many_arguments)]
    fn cba(
        &mut self,
        input: NodeId,
        in_c: usize,
        out_c: usize,
        kernel: (usize, usize),
        stride: usize,
        pad: (usize, usize),
        kind: ActKind,
    ) -> NodeId {
        let c = self.conv(input, in_c, out_c, kernel, stride, pad, 1);
        let b = self.bn(c, out_c);
        self.act(b, kind)
    }

    fn finish(mut self, last: NodeId, feature_dim: usize) -> Backbone<S> {
        self.g.add(GlobalAvgPool, vec![last]);
        Backbone {
            graph: self.g,
            feature_dim,
        }
    }
}

// ---------------------------------------------------------------------------
// ResNet: bottleneck residual stacks
// ---------------------------------------------------------------------------

struct ResNetSpec {
    stem: StemSpec,
    /// (block count, mid width, first-block stride) per stage.
    stages: Vec<(usize, usize, usize)>,
}

enum StemSpec {
    /// 7×7 stride-2 conv then 3×3/2 max pool (published stems).
    Classic { width: usize },
    /// Two 3×3 stride-2 convs then a 3×3/2 max pool (desk stem, reaches 28×28 fast).
    Desk { widths: (usize, usize) },
}

fn resnet<S: Real>(preset: ScalePreset, init: &mut Initializer) -> Backbone<S> {
    let spec = match preset {
        ScalePreset::Full => ResNetSpec {
            stem: StemSpec::Classic { width: 64 },
            stages: vec![(3, 64, 1), (4, 128, 2), (23, 256, 2), (3, 512, 2)],
        },
        ScalePreset::Desk => ResNetSpec {
            stem: StemSpec::Desk { widths: (24, 48) },
            stages: vec![(2, 48, 1), (2, 96, 2), (2, 192, 2)],
        },
    };
    const EXPANSION: usize = 4;
    let mut b = B::new(init);
    let (mut node, mut channels) = build_stem(&mut b, &spec.stem, ActKind::Relu);

    for &(blocks, mid, first_stride) in &spec.stages {
        for block in 0..blocks {
            let stride = if block == 0 { first_stride } else { 1 };
            let out_c = mid * EXPANSION;
            let c1 = b.cba(node, channels, mid, (1, 1), 1, (0, 0), ActKind::Relu);
            let c2 = b.cba(c1, mid, mid, (3, 3), stride, (1, 1), ActKind::Relu);
            let c3 = b.conv(c2, mid, out_c, (1, 1), 1, (0, 0), 1);
            let c3 = b.bn(c3, out_c);
            let shortcut = if stride != 1 || channels != out_c {
                let sc = b.conv(node, channels, out_c, (1, 1), stride, (0, 0), 1);
                b.bn(sc, out_c)
            } else {
                node
            };
            let sum = b.g.add(ElementAdd, vec![c3, shortcut]);
            node = b.act(sum, ActKind::Relu);
            channels = out_c;
        }
    }
    b.finish(node, channels)
}

fn build_stem<S: Real>(b: &mut B<'_, S>, stem: &StemSpec, kind: ActKind) -> (NodeId, usize) {
    match *stem {
        StemSpec::Classic { width } => {
            let c = b.cba(INPUT, 3, width, (7, 7), 2, (3, 3), kind);
            let p = b.g.add(MaxPool2d::new(3, 2, 1), vec![c]);
            (p, width)
        }
        StemSpec::Desk { widths } => {
            let c1 = b.cba(INPUT, 3, widths.0, (3, 3), 2, (1, 1), kind);
            let c2 = b.cba(c1, widths.0, widths.1, (3, 3), 2, (1, 1), kind);
            let p = b.g.add(MaxPool2d::new(3, 2, 1), vec![c2]);
            (p, widths.1)
        }
    }
}

// ---------------------------------------------------------------------------
// DenseNet: densely connected blocks with compressing transitions
// ---------------------------------------------------------------------------

fn densenet<S: Real>(preset: ScalePreset, init: &mut Initializer) -> Backbone<S> {
    let (stem, blocks, growth): (StemSpec, Vec<usize>, usize) = match preset {
        ScalePreset::Full => (
            StemSpec::Classic { width: 64 },
            vec![6, 12, 32, 32],
            32,
        ),
        ScalePreset::Desk => (
            StemSpec::Desk { widths: (32, 64) },
            vec![4, 8, 12],
            32,
        ),
    };
    let bottleneck_width = 4 * growth;
    let mut b = B::new(init);
    let (mut node, mut channels) = build_stem(&mut b, &stem, ActKind::Relu);

    for (stage, &layers) in blocks.iter().enumerate() {
        for _ in 0..layers {
            // bn-relu-conv1x1 -> bn-relu-conv3x3, concatenated onto the stack
            let n1 = b.bn(node, channels);
            let a1 = b.act(n1, ActKind::Relu);
            let c1 = b.conv(a1, channels, bottleneck_width, (1, 1), 1, (0, 0), 1);
            let n2 = b.bn(c1, bottleneck_width);
            let a2 = b.act(n2, ActKind::Relu);
            let c2 = b.conv(a2, bottleneck_width, growth, (3, 3), 1, (1, 1), 1);
            node = b.g.add(ConcatChannels, vec![node, c2]);
            channels += growth;
        }
        if stage + 1 < blocks.len() {
            // transition: halve channels, halve resolution
            let n = b.bn(node, channels);
            let a = b.act(n, ActKind::Relu);
            let half = channels / 2;
            let c = b.conv(a, channels, half, (1, 1), 1, (0, 0), 1);
            node = b.g.add(AvgPool2d::new(2, 2, 0), vec![c]);
            channels = half;
        }
    }
    let n = b.bn(node, channels);
    let node = b.act(n, ActKind::Relu);
    b.finish(node, channels)
}

// ---------------------------------------------------------------------------
// EfficientNet: MBConv (inverted residual + squeeze-excitation, SiLU)
// ---------------------------------------------------------------------------

struct MbConv {
    expansion: usize,
    kernel: usize,
    stride: usize,
    out: usize,
    repeats: usize,
}

const fn mb(expansion: usize, kernel: usize, stride: usize, out: usize, repeats: usize) -> MbConv {
    MbConv {
        expansion,
        kernel,
        stride,
        out,
        repeats,
    }
}

fn efficientnet<S: Real>(preset: ScalePreset, init: &mut Initializer) -> Backbone<S> {
    let (stem_width, blocks, head_width): (usize, Vec<MbConv>, usize) = match preset {
        ScalePreset::Full => (
            32,
            vec![
                mb(1, 3, 1, 16, 1),
                mb(6, 3, 2, 24, 2),
                mb(6, 5, 2, 40, 2),
                mb(6, 3, 2, 80, 3),
                mb(6, 5, 1, 112, 3),
                mb(6, 5, 2, 192, 4),
                mb(6, 3, 1, 320, 1),
            ],
            1280,
        ),
        ScalePreset::Desk => (
            24,
            vec![
                mb(1, 3, 2, 16, 1),
                mb(4, 3, 2, 32, 1),
                mb(4, 5, 2, 64, 1),
                mb(4, 3, 1, 64, 1),
                mb(4, 5, 2, 224, 1),
                mb(4, 3, 1, 224, 1),
            ],
            2048,
        ),
    };
    let mut b = B::new(init);
    let mut node = b.cba(INPUT, 3, stem_width, (3, 3), 2, (1, 1), ActKind::Silu);
    let mut channels = stem_width;

    for cfg in &blocks {
        for rep in 0..cfg.repeats {
            let stride = if rep == 0 { cfg.stride } else { 1 };
            let block_in = channels;
            let expanded = block_in * cfg.expansion;
            let mut x = node;
            if cfg.expansion > 1 {
                x = b.cba(x, block_in, expanded, (1, 1), 1, (0, 0), ActKind::Silu);
            }
            // depthwise
            let pad = cfg.kernel / 2;
            let dw = b.conv(x, expanded, expanded, (cfg.kernel, cfg.kernel), stride, (pad, pad), expanded);
            let dw = b.bn(dw, expanded);
            let dw = b.act(dw, ActKind::Silu);
            // squeeze-excitation on the expanded representation
            let squeezed = (block_in / 4).max(1);
            let z = b.g.add(GlobalAvgPool, vec![dw]);
            let r = b.g.add(Conv2d::new(expanded, squeezed, (1, 1), 1, (0, 0), 1, true, b.init), vec![z]);
            let r = b.act(r, ActKind::Silu);
            let e = b.g.add(Conv2d::new(squeezed, expanded, (1, 1), 1, (0, 0), 1, true, b.init), vec![r]);
            let gate = b.act(e, ActKind::Sigmoid);
            let scaled = b.g.add(MulBroadcast, vec![dw, gate]);
            // linear projection
            let proj = b.conv(scaled, expanded, cfg.out, (1, 1), 1, (0, 0), 1);
            let proj = b.bn(proj, cfg.out);
            node = if stride == 1 && block_in == cfg.out {
                b.g.add(ElementAdd, vec![proj, node])
            } else {
                proj
            };
            channels = cfg.out;
        }
    }
    let node = b.cba(node, channels, head_width, (1, 1), 1, (0, 0), ActKind::Silu);
    b.finish(node, head_width)
}

// ---------------------------------------------------------------------------
// Inception: multi-branch modules with factorized convolutions
// ---------------------------------------------------------------------------

struct InceptionSpec {
    stem: StemSpec,
    a_blocks: usize,
    b_blocks: usize,
    c_blocks: usize,
    /// Global width multiplier ×16 (16 = reference widths).
    scale16: usize,
}

fn inception<S: Real>(preset: ScalePreset, init: &mut Initializer) -> Backbone<S> {
    let spec = match preset {
        ScalePreset::Full => InceptionSpec {
            stem: StemSpec::Classic { width: 64 },
            a_blocks: 3,
            b_blocks: 4,
            c_blocks: 2,
            scale16: 16,
        },
        ScalePreset::Desk => InceptionSpec {
            stem: StemSpec::Desk { widths: (32, 64) },
            a_blocks: 2,
            b_blocks: 2,
            c_blocks: 1,
            scale16: 8,
        },
    };
    let w = |reference: usize| (reference * spec.scale16 / 16).max(8);
    let mut b = B::new(init);
    let (mut node, mut channels) = build_stem(&mut b, &spec.stem, ActKind::Relu);

    // module A: 1x1 / 5x5-as-two-3x3 / double-3x3 / pooled projection
    for _ in 0..spec.a_blocks {
        let b1 = b.cba(node, channels, w(96), (1, 1), 1, (0, 0), ActKind::Relu);
        let b2 = b.cba(node, channels, w(64), (1, 1), 1, (0, 0), ActKind::Relu);
        let b2 = b.cba(b2, w(64), w(96), (3, 3), 1, (1, 1), ActKind::Relu);
        let b3 = b.cba(node, channels, w(64), (1, 1), 1, (0, 0), ActKind::Relu);
        let b3 = b.cba(b3, w(64), w(96), (3, 3), 1, (1, 1), ActKind::Relu);
        let b3 = b.cba(b3, w(96), w(96), (3, 3), 1, (1, 1), ActKind::Relu);
        let pool = b.g.add(AvgPool2d::new(3, 1, 1), vec![node]);
        let b4 = b.cba(pool, channels, w(64), (1, 1), 1, (0, 0), ActKind::Relu);
        node = b.g.add(ConcatChannels, vec![b1, b2, b3, b4]);
        channels = w(96) * 3 + w(64);
    }
    // reduction to 14×14
    {
        let r1 = b.cba(node, channels, w(192), (3, 3), 2, (1, 1), ActKind::Relu);
        let r2 = b.cba(node, channels, w(96), (1, 1), 1, (0, 0), ActKind::Relu);
        let r2 = b.cba(r2, w(96), w(128), (3, 3), 1, (1, 1), ActKind::Relu);
        let r2 = b.cba(r2, w(128), w(128), (3, 3), 2, (1, 1), ActKind::Relu);
        let pool = b.g.add(MaxPool2d::new(3, 2, 1), vec![node]);
        node = b.g.add(ConcatChannels, vec![r1, r2, pool]);
        channels += w(192) + w(128);
    }
    // module B: factorized 7×7 (1×7 then 7×1) branches
    for _ in 0..spec.b_blocks {
        let c7 = w(128);
        let b1 = b.cba(node, channels, w(192), (1, 1), 1, (0, 0), ActKind::Relu);
        let b2 = b.cba(node, channels, c7, (1, 1), 1, (0, 0), ActKind::Relu);
        let b2 = b.cba(b2, c7, c7, (1, 7), 1, (0, 3), ActKind::Relu);
        let b2 = b.cba(b2, c7, w(192), (7, 1), 1, (3, 0), ActKind::Relu);
        let b3 = b.cba(node, channels, c7, (1, 1), 1, (0, 0), ActKind::Relu);
        let b3 = b.cba(b3, c7, c7, (7, 1), 1, (3, 0), ActKind::Relu);
        let b3 = b.cba(b3, c7, w(192), (1, 7), 1, (0, 3), ActKind::Relu);
        let pool = b.g.add(AvgPool2d::new(3, 1, 1), vec![node]);
        let b4 = b.cba(pool, channels, w(192), (1, 1), 1, (0, 0), ActKind::Relu);
        node = b.g.add(ConcatChannels, vec![b1, b2, b3, b4]);
        channels = w(192) * 4;
    }
    // reduction to 7×7
    {
        let r1 = b.cba(node, channels, w(192), (1, 1), 1, (0, 0), ActKind::Relu);
        let r1 = b.cba(r1, w(192), w(320), (3, 3), 2, (1, 1), ActKind::Relu);
        let r2 = b.cba(node, channels, w(192), (1, 1), 1, (0, 0), ActKind::Relu);
        let r2 = b.cba(r2, w(192), w(192), (1, 7), 1, (0, 3), ActKind::Relu);
        let r2 = b.cba(r2, w(192), w(192), (7, 1), 1, (3, 0), ActKind::Relu);
        let r2 = b.cba(r2, w(192), w(192), (3, 3), 2, (1, 1), ActKind::Relu);
        let pool = b.g.add(MaxPool2d::new(3, 2, 1), vec![node]);
        node = b.g.add(ConcatChannels, vec![r1, r2, pool]);
        channels += w(320) + w(192);
    }
    // module C: expanded 3×3 split into parallel 1×3 and 3×1
    for _ in 0..spec.c_blocks {
        let b1 = b.cba(node, channels, w(320), (1, 1), 1, (0, 0), ActKind::Relu);
        let b2 = b.cba(node, channels, w(384), (1, 1), 1, (0, 0), ActKind::Relu);
        let b2a = b.cba(b2, w(384), w(384), (1, 3), 1, (0, 1), ActKind::Relu);
        let b2b = b.cba(b2, w(384), w(384), (3, 1), 1, (1, 0), ActKind::Relu);
        let b3 = b.cba(node, channels, w(448), (1, 1), 1, (0, 0), ActKind::Relu);
        let b3 = b.cba(b3, w(448), w(384), (3, 3), 1, (1, 1), ActKind::Relu);
        let b3a = b.cba(b3, w(384), w(384), (1, 3), 1, (0, 1), ActKind::Relu);
        let b3b = b.cba(b3, w(384), w(384), (3, 1), 1, (1, 0), ActKind::Relu);
        let pool = b.g.add(AvgPool2d::new(3, 1, 1), vec![node]);
        let b4 = b.cba(pool, channels, w(192), (1, 1), 1, (0, 0), ActKind::Relu);
        node = b.g.add(ConcatChannels, vec![b1, b2a, b2b, b3a, b3b, b4]);
        channels = w(320) + w(384) * 4 + w(192);
    }
    b.finish(node, channels)
}
