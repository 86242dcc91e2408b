//! Attention generator: a stack of dual-attention units (channel attention
//! followed by multi-scale pixel attention) and a 7x7 sigmoid head.

use scanet_autograd::{Conv2dSpec, Float, ParamBuilder, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::metrics::MacCounter;
use crate::nn::Conv2d;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgnConfig {
    pub n_daus: usize,
    pub channels: usize,
    pub dilations: Vec<usize>,
    /// Bottleneck divisor for the 1x1 gate convolutions, clamped so the
    /// bottleneck keeps at least one channel.
    pub reduction: usize,
    /// Use a per-channel pixel-attention gate instead of a single map.
    pub per_channel_pixel_gate: bool,
}

impl Default for AgnConfig {
    fn default() -> Self {
        Self {
            n_daus: 4,
            channels: 20,
            dilations: vec![3, 5, 7],
            reduction: 4,
            per_channel_pixel_gate: false,
        }
    }
}

impl AgnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_daus == 0 || self.channels == 0 || self.reduction == 0 {
            return Err(invalid("agn: n_daus, channels and reduction must be at least 1"));
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return Err(invalid("agn: dilations must be a non-empty list of positive values"));
        }
        Ok(())
    }

    pub fn bottleneck(&self) -> usize {
        (self.channels / self.reduction).max(1)
    }
}

fn check_channels<T: Float>(x: &Tensor<T>, c: usize, op: &str) -> Result<()> {
    let (_, xc, _, _) = x.dims4()?;
    if xc != c {
        return Err(invalid(format!("{op}: expected {c} channels, got {xc}")));
    }
    Ok(())
}

pub struct ChannelAttention<T: Float> {
    conv1: Conv2d<T>,
    conv2: Conv2d<T>,
    squeeze: Conv2d<T>,
    excite: Conv2d<T>,
    channels: usize,
}

impl<T: Float> ChannelAttention<T> {
    pub fn new(pb: &mut ParamBuilder<T>, cfg: &AgnConfig) -> Self {
        let (c, r) = (cfg.channels, cfg.bottleneck());
        Self {
            conv1: Conv2d::new(pb, "conv1", c, c, 3, Conv2dSpec::same(3)),
            conv2: Conv2d::new(pb, "conv2", c, c, 3, Conv2dSpec::same(3)),
            squeeze: Conv2d::new(pb, "squeeze", c, r, 1, Conv2dSpec::default()),
            excite: Conv2d::new(pb, "excite", r, c, 1, Conv2dSpec::default()),
            channels: c,
        }
    }

    fn body(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        check_channels(x, self.channels, "channel_attention")?;
        self.conv2.forward(&self.conv1.forward(x)?.relu())
    }

    fn weights(&self, body: &Tensor<T>) -> Result<Tensor<T>> {
        let pooled = body.global_avg_pool()?;
        Ok(self.excite.forward(&self.squeeze.forward(&pooled)?.relu())?.sigmoid())
    }

    /// Per-channel gate `w` in `(0, 1)^{B x C x 1 x 1}`.
    pub fn gate(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.weights(&self.body(x)?)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let body = self.body(x)?;
        let w = self.weights(&body)?;
        Ok(body.mul(&w)?)
    }

    fn account(&self, name: &str, h: usize, w: usize, c: &mut MacCounter) {
        self.conv1.account(&format!("{name}.conv1"), h, w, c);
        self.conv2.account(&format!("{name}.conv2"), h, w, c);
        self.squeeze.account(&format!("{name}.squeeze"), 1, 1, c);
        self.excite.account(&format!("{name}.excite"), 1, 1, c);
        c.add(format!("{name}.gate"), (self.channels * h * w) as u64);
        c.skip("global average pool");
    }
}

pub struct PixelAttention<T: Float> {
    conv1: Conv2d<T>,
    conv2: Conv2d<T>,
    branches: Vec<Conv2d<T>>,
    merge: Conv2d<T>,
    project: Conv2d<T>,
    channels: usize,
}

impl<T: Float> PixelAttention<T> {
    pub fn new(pb: &mut ParamBuilder<T>, cfg: &AgnConfig) -> Self {
        let (c, r) = (cfg.channels, cfg.bottleneck());
        let gate_channels = if cfg.per_channel_pixel_gate { c } else { 1 };
        let branches = cfg
            .dilations
            .iter()
            .map(|&d| Conv2d::new(pb, &format!("dilated{d}"), c, c, 3, Conv2dSpec::dilated(3, d)))
            .collect::<Vec<_>>();
        Self {
            conv1: Conv2d::new(pb, "conv1", c, c, 3, Conv2dSpec::same(3)),
            conv2: Conv2d::new(pb, "conv2", c, c, 3, Conv2dSpec::same(3)),
            merge: Conv2d::new(pb, "merge", c * branches.len(), r, 1, Conv2dSpec::default()),
            project: Conv2d::new(pb, "project", r, gate_channels, 1, Conv2dSpec::default()),
            branches,
            channels: c,
        }
    }

    fn body(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        check_channels(x, self.channels, "pixel_attention")?;
        self.conv2.forward(&self.conv1.forward(x)?.relu())
    }

    fn map(&self, body: &Tensor<T>) -> Result<Tensor<T>> {
        let scales = self
            .branches
            .iter()
            .map(|b| b.forward(body))
            .collect::<Result<Vec<_>>>()?;
        let merged = self.merge.forward(&Tensor::cat(&scales, 1)?)?.relu();
        Ok(self.project.forward(&merged)?.sigmoid())
    }

    /// Spatial gate `P` in `(0, 1)`, `[B, 1, H, W]` (or `[B, C, H, W]`).
    pub fn gate(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.map(&self.body(x)?)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let body = self.body(x)?;
        let p = self.map(&body)?;
        Ok(body.mul(&p)?)
    }

    fn account(&self, name: &str, h: usize, w: usize, c: &mut MacCounter) {
        self.conv1.account(&format!("{name}.conv1"), h, w, c);
        self.conv2.account(&format!("{name}.conv2"), h, w, c);
        for (i, b) in self.branches.iter().enumerate() {
            b.account(&format!("{name}.dilated{i}"), h, w, c);
        }
        self.merge.account(&format!("{name}.merge"), h, w, c);
        self.project.account(&format!("{name}.project"), h, w, c);
        c.add(format!("{name}.gate"), (self.channels * h * w) as u64);
    }
}

/// `F + PA(CA(F))`.
pub struct DualAttentionUnit<T: Float> {
    pub ca: ChannelAttention<T>,
    pub pa: PixelAttention<T>,
}

impl<T: Float> DualAttentionUnit<T> {
    pub fn new(pb: &mut ParamBuilder<T>, cfg: &AgnConfig) -> Self {
        Self {
            ca: pb.scope("ca", |pb| ChannelAttention::new(pb, cfg)),
            pa: pb.scope("pa", |pb| PixelAttention::new(pb, cfg)),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.add(&self.pa.forward(&self.ca.forward(x)?)?)?)
    }

    fn account(&self, name: &str, h: usize, w: usize, c: &mut MacCounter) {
        self.ca.account(&format!("{name}.ca"), h, w, c);
        self.pa.account(&format!("{name}.pa"), h, w, c);
        c.skip("residual add");
    }
}

pub struct Agn<T: Float> {
    pub config: AgnConfig,
    stem: Conv2d<T>,
    pub daus: Vec<DualAttentionUnit<T>>,
    head: Conv2d<T>,
}

/// Smallest spatial size the generator accepts.
pub const MIN_SIZE: usize = 16;

impl<T: Float> Agn<T> {
    pub fn new(pb: &mut ParamBuilder<T>, cfg: &AgnConfig) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.channels;
        Ok(Self {
            config: cfg.clone(),
            stem: Conv2d::new(pb, "stem", 3, c, 3, Conv2dSpec::same(3)),
            daus: (0..cfg.n_daus)
                .map(|i| pb.scope(&format!("dau{i}"), |pb| DualAttentionUnit::new(pb, cfg)))
                .collect(),
            head: Conv2d::new(pb, "head", c, 1, 7, Conv2dSpec::default()),
        })
    }

    /// Returns the attention map `M_g` (`[B, 1, H, W]`, values in `(0, 1)`)
    /// and the last unit's features.
    pub fn forward(&self, hazy: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let (_, c, h, w) = hazy.dims4()?;
        if c != 3 {
            return Err(invalid(format!("agn expects 3 input channels, got {c}")));
        }
        if h < MIN_SIZE || w < MIN_SIZE {
            return Err(invalid(format!("agn input {h}x{w} is smaller than {MIN_SIZE}x{MIN_SIZE}")));
        }
        let mut f = self.stem.forward(hazy)?.relu();
        for dau in &self.daus {
            f = dau.forward(&f)?;
        }
        let m = self.head.forward(&f.reflect_pad2d(3, 3, 3, 3)?)?.sigmoid();
        Ok((m, f))
    }

    pub fn account(&self, h: usize, w: usize, c: &mut MacCounter) {
        self.stem.account("agn.stem", h, w, c);
        for (i, d) in self.daus.iter().enumerate() {
            d.account(&format!("agn.dau{i}"), h, w, c);
        }
        self.head.account("agn.head", h + 6, w + 6, c);
        c.skip("activation");
        c.skip("reflection padding");
    }
}
