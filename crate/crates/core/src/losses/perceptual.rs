use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scanet_autograd::{Conv2dSpec, Float, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, io_err, Error, Result};
use crate::metrics::MacCounter;

const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

/// Stage widths of the feature pyramid: `relu1_2`, `relu2_2`, `relu3_3`.
const STAGE_WIDTHS: [usize; 3] = [64, 128, 256];
/// Convolutions per stage in the full VGG16 prefix.
const VGG16_DEPTHS: [usize; 3] = [2, 2, 3];
/// Indices of those convolutions in torchvision's `features` sequence.
const VGG16_INDICES: [usize; 7] = [0, 2, 5, 7, 10, 12, 14];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum ExtractorKind {
    /// Fixed random weights, one 3x3 convolution per stage.
    Random { seed: u64 },
    /// VGG16 through `relu3_3`, loaded from a safetensors file with
    /// torchvision parameter names (`features.0.weight`, ...).
    Vgg16 { weights: std::path::PathBuf },
}

impl Default for ExtractorKind {
    fn default() -> Self {
        ExtractorKind::Random { seed: 0x5ca1ab1e }
    }
}

struct FrozenConv<T: Float> {
    weight: Tensor<T>,
    bias: Tensor<T>,
}

/// A frozen three-stage feature pyramid; gradients flow to its input only.
pub struct FeatureExtractor<T: Float> {
    stages: Vec<Vec<FrozenConv<T>>>,
}

impl<T: Float> FeatureExtractor<T> {
    pub fn new(kind: &ExtractorKind) -> Result<Self> {
        match kind {
            ExtractorKind::Random { seed } => Ok(Self::random(*seed)),
            ExtractorKind::Vgg16 { weights } => Self::vgg16(weights),
        }
    }

    /// He-uniform random weights, zero biases.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cin = 3;
        let stages = STAGE_WIDTHS
            .iter()
            .map(|&cout| {
                let fan_in = (cin * 9) as f64;
                let bound = (6.0 / fan_in).sqrt();
                let w = (0..cout * cin * 9).map(|_| T::lit(rng.gen_range(-bound..bound))).collect();
                let conv = FrozenConv {
                    weight: Tensor::from_vec(w, &[cout, cin, 3, 3]).expect("sized"),
                    bias: Tensor::zeros(&[cout]),
                };
                cin = cout;
                vec![conv]
            })
            .collect();
        Self { stages }
    }

    pub fn vgg16(path: &Path) -> Result<Self> {
        let tensors = read_safetensors(path)?;
        let mut idx = VGG16_INDICES.iter();
        let mut cin = 3;
        let mut stages = Vec::new();
        for (&width, &depth) in STAGE_WIDTHS.iter().zip(&VGG16_DEPTHS) {
            let mut convs = Vec::new();
            for _ in 0..depth {
                let i = idx.next().expect("index per conv");
                let fetch = |suffix: &str, shape: &[usize]| -> Result<Tensor<T>> {
                    let name = format!("features.{i}.{suffix}");
                    let (s, data) = tensors
                        .get(&name)
                        .ok_or_else(|| Error::Config(format!("{}: missing tensor {name}", path.display())))?;
                    if s != shape {
                        return Err(Error::Config(format!("{name}: shape {s:?}, expected {shape:?}")));
                    }
                    Ok(Tensor::from_vec(data.iter().map(|&v| T::lit(f64::from(v))).collect(), shape)?)
                };
                convs.push(FrozenConv {
                    weight: fetch("weight", &[width, cin, 3, 3])?,
                    bias: fetch("bias", &[width])?,
                });
                cin = width;
            }
            stages.push(convs);
        }
        Ok(Self { stages })
    }

    /// Features after the last ReLU of each stage, on ImageNet-normalised input.
    pub fn features(&self, x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let (b, c, h, w) = x.dims4()?;
        if c != 3 {
            return Err(invalid(format!("feature extractor expects RGB, got {c} channels")));
        }
        if h < 4 || w < 4 {
            return Err(invalid(format!("feature extractor needs at least 4x4 input, got {h}x{w}")));
        }
        let mean = Tensor::from_vec(IMAGENET_MEAN.iter().map(|&v| T::lit(v)).collect(), &[1, 3, 1, 1])?;
        let inv_std = Tensor::from_vec(IMAGENET_STD.iter().map(|&v| T::lit(1.0 / v)).collect(), &[1, 3, 1, 1])?;
        let mut f = x.sub(&mean)?.mul(&inv_std)?;
        debug_assert_eq!(f.shape()[0], b);
        let mut out = Vec::with_capacity(self.stages.len());
        for (s, convs) in self.stages.iter().enumerate() {
            if s > 0 {
                f = f.max_pool2d(2, 2)?;
            }
            for conv in convs {
                f = f.conv2d(&conv.weight, Some(&conv.bias), Conv2dSpec::same(3))?.relu();
            }
            out.push(f.clone());
        }
        Ok(out)
    }

    pub fn account(&self, h: usize, w: usize, c: &mut MacCounter) {
        let (mut h, mut w) = (h, w);
        for (s, convs) in self.stages.iter().enumerate() {
            if s > 0 {
                h /= 2;
                w /= 2;
            }
            for (i, conv) in convs.iter().enumerate() {
                let n: usize = conv.weight.shape().iter().product();
                c.add(format!("perceptual.stage{s}.conv{i}"), (n * h * w) as u64);
            }
        }
    }
}

/// Mean over stages of `||φ(pred) - φ(target)||² / (C H W)`, averaged over
/// the batch.
pub fn perceptual_from_features<T: Float>(pred: &[Tensor<T>], target: &[Tensor<T>]) -> Result<Tensor<T>> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(invalid("perceptual loss needs matching, non-empty feature lists"));
    }
    let mut total: Option<Tensor<T>> = None;
    for (p, t) in pred.iter().zip(target) {
        let d = p.sub(t)?.sqr().mean_all();
        total = Some(match total {
            Some(acc) => acc.add(&d)?,
            None => d,
        });
    }
    Ok(total.expect("non-empty").scale(1.0 / pred.len() as f64))
}

/// Perceptual loss; target features are computed without a graph.
pub fn perceptual_loss<T: Float>(pred: &Tensor<T>, target: &Tensor<T>, fx: &FeatureExtractor<T>) -> Result<Tensor<T>> {
    if pred.shape() != target.shape() {
        return Err(invalid(format!("perceptual: {:?} vs {:?}", pred.shape(), target.shape())));
    }
    let fp = fx.features(pred)?;
    let ft = fx.features(&target.detach())?;
    perceptual_from_features(&fp, &ft)
}

type RawTensors = HashMap<String, (Vec<usize>, Vec<f32>)>;

#[derive(Deserialize)]
struct SafeEntry {
    dtype: String,
    shape: Vec<usize>,
    data_offsets: (usize, usize),
}

/// Minimal safetensors reader (F32 only).
fn read_safetensors(path: &Path) -> Result<RawTensors> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let bad = |msg: &str| Error::Config(format!("{}: {msg}", path.display()));
    let len = bytes
        .get(..8)
        .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")) as usize)
        .ok_or_else(|| bad("truncated header"))?;
    let header = bytes.get(8..8 + len).ok_or_else(|| bad("truncated header"))?;
    let raw: HashMap<String, serde_json::Value> = serde_json::from_slice(header).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    let body = &bytes[8 + len..];
    let mut out = HashMap::new();
    for (name, v) in raw {
        if name == "__metadata__" {
            continue;
        }
        let e: SafeEntry = serde_json::from_value(v).map_err(|source| Error::Json {
            context: format!("{}: {name}", path.display()),
            source,
        })?;
        if e.dtype != "F32" {
            return Err(bad(&format!("{name}: unsupported dtype {}", e.dtype)));
        }
        let (a, b) = e.data_offsets;
        let chunk = body.get(a..b).ok_or_else(|| bad(&format!("{name}: data out of range")))?;
        let data = chunk
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect::<Vec<_>>();
        if data.len() != e.shape.iter().product::<usize>() {
            return Err(bad(&format!("{name}: {} values for shape {:?}", data.len(), e.shape)));
        }
        out.insert(name, (e.shape, data));
    }
    Ok(out)
}
