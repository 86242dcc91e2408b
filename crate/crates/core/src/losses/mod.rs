//! Training objectives and the patch discriminator.

mod discriminator;
mod msssim;
mod perceptual;

pub use discriminator::{discriminator_loss, Discriminator};
pub use msssim::{gaussian_window, max_scales, ms_ssim, ms_ssim_loss, MsSsimConfig, MS_SSIM_WEIGHTS};
pub use perceptual::{perceptual_from_features, perceptual_loss, ExtractorKind, FeatureExtractor};

use scanet_autograd::{Float, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Clamp applied to discriminator probabilities before taking logs.
pub const PROB_EPS: f64 = 1e-7;

/// Mean of `0.5 q^2` for `|q| < 1` and `|q| - 0.5` otherwise, `q = pred - target`.
pub fn smooth_l1<T: Float>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    if pred.shape() != target.shape() {
        return Err(invalid(format!(
            "smooth_l1: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    Ok(pred.sub(target)?.smooth_l1_elementwise().mean_all())
}

/// `-mean(log D(residual))`, with `D`'s probabilities clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn adversarial_from_probs<T: Float>(probs: &Tensor<T>) -> Tensor<T> {
    probs.clamp(PROB_EPS, 1.0 - PROB_EPS).ln().mean_all().neg()
}

/// Generator-side adversarial loss on the residual `J - Ĵ`.
pub fn adversarial_loss<T: Float>(residual: &Tensor<T>, disc: &Discriminator<T>) -> Result<Tensor<T>> {
    Ok(adversarial_from_probs(&disc.forward(residual)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub sl1: f64,
    pub sl1_a: f64,
    pub perceptual: f64,
    pub msssim: f64,
    pub adversarial: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            sl1: 1.0,
            sl1_a: 0.3,
            perceptual: 0.01,
            msssim: 0.5,
            adversarial: 0.0005,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.sl1, self.sl1_a, self.perceptual, self.msssim, self.adversarial];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("loss weights must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Scalar values of each term; inactive terms are 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub sl1: f64,
    pub sl1_a: f64,
    pub perceptual: f64,
    pub msssim: f64,
    pub adversarial: f64,
    pub joint: f64,
}

/// Loss terms of one step; `None` marks a disabled term.
pub struct LossTerms<T: Float> {
    pub sl1: Tensor<T>,
    pub sl1_a: Option<Tensor<T>>,
    pub perceptual: Option<Tensor<T>>,
    pub msssim: Option<Tensor<T>>,
    pub adversarial: Option<Tensor<T>>,
}

fn value<T: Float>(name: &'static str, t: &Tensor<T>) -> Result<f64> {
    let v = t.item()?.to_f64().unwrap_or(f64::NAN);
    if !v.is_finite() {
        return Err(Error::NonFinite { component: name, value: v });
    }
    Ok(v)
}

/// Weighted sum of the active terms, plus the per-term report.
pub fn joint_loss<T: Float>(terms: &LossTerms<T>, w: &LossWeights) -> Result<(Tensor<T>, LossReport)> {
    let mut report = LossReport {
        sl1: value("sl1", &terms.sl1)?,
        ..Default::default()
    };
    let mut joint = terms.sl1.scale(w.sl1);
    let optional = [
        ("sl1_a", &terms.sl1_a, w.sl1_a),
        ("perceptual", &terms.perceptual, w.perceptual),
        ("msssim", &terms.msssim, w.msssim),
        ("adversarial", &terms.adversarial, w.adversarial),
    ];
    for (name, term, weight) in optional {
        let Some(t) = term else { continue };
        let v = value(name, t)?;
        match name {
            "sl1_a" => report.sl1_a = v,
            "perceptual" => report.perceptual = v,
            "msssim" => report.msssim = v,
            _ => report.adversarial = v,
        }
        joint = joint.add(&t.scale(weight))?;
    }
    report.joint = value("joint", &joint)?;
    Ok((joint, report))
}

/// The joint value for plain numbers, in the same order as [`LossReport`].
pub fn joint_value(components: [f64; 5], w: &LossWeights) -> Result<f64> {
    let names = ["sl1", "sl1_a", "perceptual", "msssim", "adversarial"];
    for (n, v) in names.iter().zip(components) {
        if !v.is_finite() {
            return Err(Error::NonFinite { component: n, value: v });
        }
    }
    let ws = [w.sl1, w.sl1_a, w.perceptual, w.msssim, w.adversarial];
    Ok(ws.iter().zip(components).map(|(w, c)| w * c).sum())
}
