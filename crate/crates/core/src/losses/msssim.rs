use scanet_autograd::{Float, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Per-scale exponents, finest first.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// Lower bound applied to per-scale terms before exponentiation.
const TERM_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MsSsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub scales: usize,
    pub c1: f64,
    pub c2: f64,
}

impl Default for MsSsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            scales: 5,
            c1: 0.01 * 0.01,
            c2: 0.03 * 0.03,
        }
    }
}

impl MsSsimConfig {
    pub fn min_size(&self) -> usize {
        (1usize << (self.scales.max(1) - 1)) * self.window
    }

    /// Exponents for `scales` levels: the first `scales` standard weights,
    /// renormalised to sum to one.
    pub fn exponents(&self) -> Result<Vec<f64>> {
        if self.scales == 0 || self.scales > MS_SSIM_WEIGHTS.len() {
            return Err(invalid(format!("ms_ssim supports 1..=5 scales, got {}", self.scales)));
        }
        let w = &MS_SSIM_WEIGHTS[..self.scales];
        let total: f64 = w.iter().sum();
        Ok(w.iter().map(|v| v / total).collect())
    }
}

/// Largest scale count (at most 5) whose pyramid fits an `h x w` image.
pub fn max_scales(h: usize, w: usize, window: usize) -> usize {
    (1..=MS_SSIM_WEIGHTS.len())
        .rev()
        .find(|&p| (1usize << (p - 1)) * window <= h.min(w))
        .unwrap_or(0)
}

/// Normalised 1-D Gaussian taps.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Local luminance and contrast-structure maps.
fn ssim_terms<T: Float>(x: &Tensor<T>, y: &Tensor<T>, kernel: &[T], c1: f64, c2: f64) -> Result<(Tensor<T>, Tensor<T>)> {
    let blur = |t: &Tensor<T>| t.separable_filter_valid(kernel);
    let (mx, my) = (blur(x)?, blur(y)?);
    let (mx2, my2, mxy) = (mx.sqr(), my.sqr(), mx.mul(&my)?);
    let sx = blur(&x.sqr())?.sub(&mx2)?;
    let sy = blur(&y.sqr())?.sub(&my2)?;
    let sxy = blur(&x.mul(y)?)?.sub(&mxy)?;
    let l = mxy.scale(2.0).add_scalar(c1).div(&mx2.add(&my2)?.add_scalar(c1))?;
    let cs = sxy.scale(2.0).add_scalar(c2).div(&sx.add(&sy)?.add_scalar(c2))?;
    Ok((l, cs))
}

/// Multi-scale SSIM of two `[B, C, H, W]` batches in `[0, 1]`.
///
/// Each channel of each image is scored separately as
/// `mean(l cs)_P^{b_P} * prod_{j<P} mean(cs_j)^{b_j}` (scale `P` coarsest)
/// and the scores are averaged. With one scale this is plain SSIM.
pub fn ms_ssim<T: Float>(x: &Tensor<T>, y: &Tensor<T>, cfg: &MsSsimConfig) -> Result<Tensor<T>> {
    if x.shape() != y.shape() {
        return Err(invalid(format!("ms_ssim: {:?} vs {:?}", x.shape(), y.shape())));
    }
    let (_, _, h, w) = x.dims4()?;
    let betas = cfg.exponents()?;
    if h.min(w) < cfg.min_size() {
        return Err(invalid(format!(
            "ms_ssim with {} scales and window {} needs at least {}px, got {h}x{w}",
            cfg.scales,
            cfg.window,
            cfg.min_size()
        )));
    }
    let kernel: Vec<T> = gaussian_window(cfg.window, cfg.sigma).into_iter().map(T::lit).collect();
    let (mut x, mut y) = (x.clone(), y.clone());
    let mut score: Option<Tensor<T>> = None;
    for (j, &beta) in betas.iter().enumerate() {
        let (l, cs) = ssim_terms(&x, &y, &kernel, cfg.c1, cfg.c2)?;
        let last = j + 1 == betas.len();
        let term = if last { l.mul(&cs)? } else { cs };
        let factor = term.mean_axes(&[2, 3])?.clamp(TERM_FLOOR, 1e30).powf(beta);
        score = Some(match score {
            Some(s) => s.mul(&factor)?,
            None => factor,
        });
        if !last {
            x = x.avg_pool2d(2, 2)?;
            y = y.avg_pool2d(2, 2)?;
        }
    }
    Ok(score.expect("at least one scale").mean_all())
}

pub fn ms_ssim_loss<T: Float>(x: &Tensor<T>, y: &Tensor<T>, cfg: &MsSsimConfig) -> Result<Tensor<T>> {
    Ok(ms_ssim(x, y, cfg)?.neg().add_scalar(1.0))
}
