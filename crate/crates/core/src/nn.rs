//! Parameterised layers shared by the generator, discriminator and
//! feature extractor.

use scanet_autograd::{Conv2dSpec, ConvTranspose2dSpec, Float, Init, Param, ParamBuilder, Tensor};

use crate::error::Result;
use crate::metrics::MacCounter;

pub struct Conv2d<T: Float> {
    pub weight: Param<T>,
    pub bias: Option<Param<T>>,
    pub spec: Conv2dSpec,
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
}

impl<T: Float> Conv2d<T> {
    /// Uniform fan-in initialisation of weight and bias.
    pub fn new(pb: &mut ParamBuilder<T>, name: &str, cin: usize, cout: usize, k: usize, spec: Conv2dSpec) -> Self {
        let fan_in = cin * k * k;
        Self::with_init(pb, name, cin, cout, k, spec, Init::FanIn(fan_in), Init::FanIn(fan_in))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_init(
        pb: &mut ParamBuilder<T>,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        spec: Conv2dSpec,
        weight: Init,
        bias: Init,
    ) -> Self {
        pb.scope(name, |pb| Self {
            weight: pb.param("weight", &[cout, cin, k, k], weight),
            bias: Some(pb.param("bias", &[cout], bias)),
            spec,
            cin,
            cout,
            k,
        })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let b = self.bias.as_ref().map(Param::tensor);
        Ok(x.conv2d(&self.weight.tensor(), b.as_ref(), self.spec)?)
    }

    pub fn output_size(&self, h: usize, w: usize) -> (usize, usize) {
        (
            self.spec.output_size(h, self.k).unwrap_or(0),
            self.spec.output_size(w, self.k).unwrap_or(0),
        )
    }

    /// Adds this layer's MACs for an `h x w` input; returns the output size.
    pub fn account(&self, name: &str, h: usize, w: usize, c: &mut MacCounter) -> (usize, usize) {
        let (oh, ow) = self.output_size(h, w);
        c.add(name, (self.cin * self.cout * self.k * self.k * oh * ow) as u64);
        (oh, ow)
    }
}

pub struct ConvTranspose2d<T: Float> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub spec: ConvTranspose2dSpec,
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
}

impl<T: Float> ConvTranspose2d<T> {
    pub fn new(pb: &mut ParamBuilder<T>, name: &str, cin: usize, cout: usize, k: usize, spec: ConvTranspose2dSpec) -> Self {
        let fan_in = cout * k * k;
        pb.scope(name, |pb| Self {
            weight: pb.param("weight", &[cin, cout, k, k], Init::FanIn(fan_in)),
            bias: pb.param("bias", &[cout], Init::FanIn(fan_in)),
            spec,
            cin,
            cout,
            k,
        })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.conv_transpose2d(&self.weight.tensor(), Some(&self.bias.tensor()), self.spec)?)
    }

    pub fn account(&self, name: &str, h: usize, w: usize, c: &mut MacCounter) -> (usize, usize) {
        c.add(name, (self.cin * self.cout * self.k * self.k * h * w) as u64);
        (
            self.spec.output_size(h, self.k).unwrap_or(0),
            self.spec.output_size(w, self.k).unwrap_or(0),
        )
    }
}

/// Bilinear sampling cost per kernel tap and input channel, in MACs
/// (four weighted corner reads).
pub const BILINEAR_MACS_PER_TAP: u64 = 4;

/// 3x3 deformable convolution whose offsets come from a plain convolution
/// over the same input. The offset predictor starts at zero, so a fresh
/// layer behaves exactly like a regular convolution.
pub struct DeformConv2d<T: Float> {
    pub offsets: Conv2d<T>,
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub cin: usize,
    pub cout: usize,
}

impl<T: Float> DeformConv2d<T> {
    pub const K: usize = 3;

    pub fn new(pb: &mut ParamBuilder<T>, name: &str, cin: usize, cout: usize) -> Self {
        let k = Self::K;
        pb.scope(name, |pb| {
            let offsets = Conv2d::with_init(
                pb,
                "offset",
                cin,
                2 * k * k,
                k,
                Conv2dSpec::same(k),
                Init::Zeros,
                Init::Zeros,
            );
            let fan_in = cin * k * k;
            Self {
                offsets,
                weight: pb.param("weight", &[cout, cin, k, k], Init::FanIn(fan_in)),
                bias: pb.param("bias", &[cout], Init::FanIn(fan_in)),
                cin,
                cout,
            }
        })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let off = self.offsets.forward(x)?;
        Ok(x.deform_conv2d(&off, &self.weight.tensor(), Some(&self.bias.tensor()), Conv2dSpec::same(Self::K))?)
    }

    pub fn account(&self, name: &str, h: usize, w: usize, c: &mut MacCounter) -> (usize, usize) {
        self.offsets.account(&format!("{name}.offset"), h, w, c);
        let taps = (Self::K * Self::K) as u64;
        let px = (h * w) as u64;
        c.add(name, taps * (self.cin * self.cout) as u64 * px);
        c.add(format!("{name}.sampling"), BILINEAR_MACS_PER_TAP * taps * self.cin as u64 * px);
        (h, w)
    }
}
