//! Image-quality metrics and model budget accounting.

mod budget;

pub use budget::{FlopConvention, MacCounter, ModelBudget};

use scanet_autograd::{Float, ParamStore};
use serde::{Deserialize, Serialize};

use crate::attention::rgb_to_y;
use crate::error::{invalid, Result};
use crate::image::Image;
use crate::losses::gaussian_window;

pub const PSNR_CAP: f64 = 100.0;

/// `10 log10(1 / MSE)` over all channels, at most `cap` (reached when the
/// images are identical).
pub fn psnr(pred: &Image, target: &Image, cap: f64) -> Result<f64> {
    pred.check_same_shape(target, "psnr")?;
    if pred.data.is_empty() {
        return Err(invalid("psnr of empty images"));
    }
    let mse = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2))
        .sum::<f64>()
        / pred.data.len() as f64;
    if mse == 0.0 {
        return Ok(cap);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(cap))
}

fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; oh * w];
    for y in 0..oh {
        for x in 0..w {
            rows[y * w + x] = (0..n).map(|t| k[t] * plane[(y + t) * w + x]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|t| k[t] * rows[y * w + x + t]).sum();
        }
    }
    (out, oh, ow)
}

/// Mean SSIM over 11x11 Gaussian (σ = 1.5) windows, "valid" positions only,
/// on a single plane with values in `[0, 1]`.
pub fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize) -> Result<f64> {
    const WINDOW: usize = 11;
    if h < WINDOW || w < WINDOW {
        return Err(invalid(format!("ssim needs at least {WINDOW}x{WINDOW}, got {h}x{w}")));
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let k = gaussian_window(WINDOW, 1.5);
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let (ma, oh, ow) = filter_valid(a, h, w, &k);
    let (mb, ..) = filter_valid(b, h, w, &k);
    let (saa, ..) = filter_valid(&prod(a, a), h, w, &k);
    let (sbb, ..) = filter_valid(&prod(b, b), h, w, &k);
    let (sab, ..) = filter_valid(&prod(a, b), h, w, &k);
    let mut total = 0.0;
    for i in 0..oh * ow {
        let (mx, my) = (ma[i], mb[i]);
        let vx = saa[i] - mx * mx;
        let vy = sbb[i] - my * my;
        let cov = sab[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / (oh * ow) as f64)
}

/// SSIM on the BT.601 luma of two RGB images.
pub fn ssim(pred: &Image, target: &Image) -> Result<f64> {
    pred.check_same_shape(target, "ssim")?;
    let to64 = |img: &Image| -> Result<Vec<f64>> { Ok(rgb_to_y(img)?.data.iter().map(|&v| f64::from(v)).collect()) };
    ssim_plane(&to64(pred)?, &to64(target)?, pred.height, pred.width)
}

/// Number of learnable scalars in a parameter store.
pub fn count_parameters<T: Float>(store: &ParamStore<T>) -> usize {
    store.num_scalars()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub per_image: Vec<ImageScore>,
    pub psnr: f64,
    pub ssim: f64,
}

impl EvalResult {
    pub fn from_scores(per_image: Vec<ImageScore>) -> Self {
        let n = per_image.len().max(1) as f64;
        let psnr = per_image.iter().map(|s| s.psnr).sum::<f64>() / n;
        let ssim = per_image.iter().map(|s| s.ssim).sum::<f64>() / n;
        Self { per_image, psnr, ssim }
    }
}

/// Scores every `(name, pred, target)` triple.
pub fn evaluate<'a>(pairs: impl IntoIterator<Item = (String, &'a Image, &'a Image)>) -> Result<EvalResult> {
    let scores = pairs
        .into_iter()
        .map(|(name, p, t)| {
            Ok(ImageScore {
                psnr: psnr(p, t, PSNR_CAP)?,
                ssim: ssim(p, t)?,
                name,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalResult::from_scores(scores))
}
