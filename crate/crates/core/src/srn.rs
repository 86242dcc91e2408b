//! Scene reconstruction network: a x4 encoder-decoder with residual and
//! deformable blocks at the bottleneck, modulated by an attention map.

use scanet_autograd::{Conv2dSpec, ConvTranspose2dSpec, Float, Init, Param, ParamBuilder, Tensor};
use serde::{Deserialize, Serialize};

use crate::curriculum::apply_attention;
use crate::error::{invalid, Result};
use crate::metrics::MacCounter;
use crate::nn::{Conv2d, ConvTranspose2d, DeformConv2d};

/// Total spatial reduction of the encoder (two stride-2 stages).
pub const DOWNSAMPLE: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SrnConfig {
    /// Channel width at the H/4 bottleneck; the H/2 stages use half of it
    /// and the full-resolution decoder stage a quarter.
    pub base_channels: usize,
    pub n_res_blocks: usize,
    pub n_deform_layers: usize,
    /// Blend the attention map into the H/2 features after the first conv.
    pub inject_early: bool,
    /// Blend the attention map into the H/4 features before the residual stack.
    pub inject_bottleneck: bool,
    pub alpha_init: f64,
}

impl Default for SrnConfig {
    fn default() -> Self {
        Self {
            base_channels: 128,
            n_res_blocks: 6,
            n_deform_layers: 2,
            inject_early: true,
            inject_bottleneck: true,
            alpha_init: 0.5,
        }
    }
}

impl SrnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_channels < 4 || self.base_channels % 4 != 0 {
            return Err(invalid("srn: base_channels must be a positive multiple of 4"));
        }
        if self.n_res_blocks == 0 {
            return Err(invalid("srn: n_res_blocks must be at least 1"));
        }
        Ok(())
    }
}

struct ResBlock<T: Float> {
    conv1: Conv2d<T>,
    conv2: Conv2d<T>,
}

impl<T: Float> ResBlock<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.add(&self.conv2.forward(&self.conv1.forward(x)?.relu())?)?)
    }
}

/// Where an attention map is blended into the feature stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Injection {
    Early,
    Bottleneck,
}

pub struct Srn<T: Float> {
    pub config: SrnConfig,
    down1: Conv2d<T>,
    down2: Conv2d<T>,
    res: Vec<ResBlock<T>>,
    pub deform: Vec<DeformConv2d<T>>,
    up1: ConvTranspose2d<T>,
    up2: ConvTranspose2d<T>,
    tail: Conv2d<T>,
    /// One learnable mixing weight per enabled injection point.
    pub alphas: Vec<(Injection, Param<T>)>,
}

impl<T: Float> Srn<T> {
    /// Registers `srn.*` parameters and the `alpha.*` gates.
    pub fn new(pb: &mut ParamBuilder<T>, cfg: &SrnConfig) -> Result<Self> {
        cfg.validate()?;
        let b = cfg.base_channels;
        let up = ConvTranspose2dSpec {
            stride: 2,
            padding: 1,
            output_padding: 1,
        };
        let srn = pb.scope("srn", |pb| Self {
            config: cfg.clone(),
            down1: Conv2d::new(pb, "down1", 3, b / 2, 3, Conv2dSpec::strided(2, 1)),
            down2: Conv2d::new(pb, "down2", b / 2, b, 3, Conv2dSpec::strided(2, 1)),
            res: (0..cfg.n_res_blocks)
                .map(|i| {
                    pb.scope(&format!("res{i}"), |pb| ResBlock {
                        conv1: Conv2d::new(pb, "conv1", b, b, 3, Conv2dSpec::same(3)),
                        conv2: Conv2d::new(pb, "conv2", b, b, 3, Conv2dSpec::same(3)),
                    })
                })
                .collect(),
            deform: (0..cfg.n_deform_layers)
                .map(|i| DeformConv2d::new(pb, &format!("deform{i}"), b, b))
                .collect(),
            up1: ConvTranspose2d::new(pb, "up1", b, b / 2, 3, up),
            up2: ConvTranspose2d::new(pb, "up2", b / 2, b / 4, 3, up),
            tail: Conv2d::new(pb, "tail", b / 4, 3, 7, Conv2dSpec::default()),
            alphas: Vec::new(),
        });
        let mut srn = srn;
        pb.scope("alpha", |pb| {
            if cfg.inject_early {
                srn.alphas
                    .push((Injection::Early, pb.param("early", &[1], Init::Constant(cfg.alpha_init))));
            }
            if cfg.inject_bottleneck {
                srn.alphas.push((
                    Injection::Bottleneck,
                    pb.param("bottleneck", &[1], Init::Constant(cfg.alpha_init)),
                ));
            }
        });
        Ok(srn)
    }

    fn alpha(&self, at: Injection) -> Option<Tensor<T>> {
        self.alphas.iter().find(|(i, _)| *i == at).map(|(_, p)| p.tensor())
    }

    /// Padding (bottom, right) that makes `h x w` divisible by [`DOWNSAMPLE`].
    pub fn padding_for(h: usize, w: usize) -> (usize, usize) {
        ((DOWNSAMPLE - h % DOWNSAMPLE) % DOWNSAMPLE, (DOWNSAMPLE - w % DOWNSAMPLE) % DOWNSAMPLE)
    }

    fn pad(x: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, _, h, w) = x.dims4()?;
        let (pb, pr) = Self::padding_for(h, w);
        if pb == 0 && pr == 0 {
            Ok(x.clone())
        } else {
            Ok(x.reflect_pad2d(0, pb, 0, pr)?)
        }
    }

    /// Encoder to the H/4 bottleneck (residual and deformable blocks
    /// included). `x` must already be padded to a multiple of 4; `m` is the
    /// matching padded attention map.
    pub fn encode(&self, x: &Tensor<T>, m: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        let (_, c, h, w) = x.dims4()?;
        if c != 3 || h % DOWNSAMPLE != 0 || w % DOWNSAMPLE != 0 {
            return Err(invalid(format!("encode expects [B,3,4k,4l], got [_,{c},{h},{w}]")));
        }
        let mut f = self.down1.forward(x)?.relu();
        if let (Some(m), Some(a)) = (m, self.alpha(Injection::Early)) {
            f = apply_attention(&f, &m.avg_pool2d(2, 2)?, &a)?;
        }
        f = self.down2.forward(&f)?.relu();
        if let (Some(m), Some(a)) = (m, self.alpha(Injection::Bottleneck)) {
            f = apply_attention(&f, &m.avg_pool2d(4, 4)?, &a)?;
        }
        for r in &self.res {
            f = r.forward(&f)?;
        }
        for d in &self.deform {
            f = d.forward(&f)?.relu();
        }
        Ok(f)
    }

    /// Two transposed convolutions back to full resolution, then the
    /// reflection-padded 7x7 tail with `tanh` mapped onto `[0, 1]`.
    pub fn decode(&self, f: &Tensor<T>) -> Result<Tensor<T>> {
        let d = self.up1.forward(f)?.relu();
        let d = self.up2.forward(&d)?.relu();
        self.tail_forward(&d)
    }

    pub fn tail_forward(&self, d: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.tail.forward(&d.reflect_pad2d(3, 3, 3, 3)?)?.tanh().affine(0.5, 0.5))
    }

    /// Dehazes `hazy` (`[B, 3, H, W]`), blending `m` (`[B, 1, H, W]`) into
    /// the features at each injection point. Without `m` no blending occurs.
    pub fn forward(&self, hazy: &Tensor<T>, m: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        let (b, _, h, w) = hazy.dims4()?;
        if let Some(m) = m {
            if m.shape() != [b, 1, h, w] {
                return Err(invalid(format!(
                    "attention map {:?} does not match input [{b},1,{h},{w}]",
                    m.shape()
                )));
            }
        }
        let x = Self::pad(hazy)?;
        let m = m.map(Self::pad).transpose()?;
        let out = self.decode(&self.encode(&x, m.as_ref())?)?;
        let (_, _, oh, ow) = out.dims4()?;
        if (oh, ow) == (h, w) {
            return Ok(out);
        }
        Ok(out.narrow(2, 0, h)?.narrow(3, 0, w)?)
    }

    pub fn account(&self, h: usize, w: usize, c: &mut MacCounter) {
        let (pb, pr) = Self::padding_for(h, w);
        let (h, w) = (h + pb, w + pr);
        let b = self.config.base_channels as u64;
        let (h2, w2) = self.down1.account("srn.down1", h, w, c);
        if self.alpha(Injection::Early).is_some() {
            c.add("srn.inject_early", 2 * (b / 2) * (h2 * w2) as u64);
        }
        let (h4, w4) = self.down2.account("srn.down2", h2, w2, c);
        if self.alpha(Injection::Bottleneck).is_some() {
            c.add("srn.inject_bottleneck", 2 * b * (h4 * w4) as u64);
        }
        for (i, r) in self.res.iter().enumerate() {
            r.conv1.account(&format!("srn.res{i}.conv1"), h4, w4, c);
            r.conv2.account(&format!("srn.res{i}.conv2"), h4, w4, c);
        }
        for (i, d) in self.deform.iter().enumerate() {
            d.account(&format!("srn.deform{i}"), h4, w4, c);
        }
        let (h2, w2) = self.up1.account("srn.up1", h4, w4, c);
        let (h1, w1) = self.up2.account("srn.up2", h2, w2, c);
        self.tail.account("srn.tail", h1 + 6, w1 + 6, c);
        c.skip("activation");
        c.skip("residual add");
        c.skip("reflection padding");
        c.skip("attention map area resize");
    }
}
