//! Self-paced semi-curricular attention: early in training the attention
//! map fed to the reconstruction network leans on the luminance target and
//! shifts to the predicted map as the attention loss falls.

use scanet_autograd::{Float, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::Image;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumConfig {
    /// Fraction of epochs during which the schedule is active.
    pub warmup_fraction: f64,
    /// Above this attention loss the target map is used alone.
    pub hi: f64,
    /// At or below this attention loss the predicted map is used alone.
    pub lo: f64,
    /// Smooth the attention loss with an exponential moving average of
    /// this decay before scheduling. `None` uses the raw batch loss.
    pub ema_decay: Option<f64>,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            warmup_fraction: 0.25,
            hi: 0.1,
            lo: 0.05,
            ema_decay: None,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || self.lo < 0.0 {
            return Err(invalid(format!("curriculum thresholds need 0 <= lo < hi, got lo={} hi={}", self.lo, self.hi)));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction <= 1.0) {
            return Err(invalid(format!("warmup_fraction {} outside (0, 1]", self.warmup_fraction)));
        }
        if let Some(d) = self.ema_decay {
            if !(0.0..1.0).contains(&d) {
                return Err(invalid(format!("ema_decay {d} outside [0, 1)")));
            }
        }
        Ok(())
    }

    /// Whether the schedule applies at `epoch_fraction` (completed epochs
    /// over total epochs). With 40 epochs, epochs 0-9 are inside.
    pub fn in_warmup(&self, epoch_fraction: f64) -> bool {
        epoch_fraction < self.warmup_fraction
    }
}

/// Blend weight for the predicted attention map.
///
/// Inside the warmup window: 0 above `hi`, 1 at or below `lo`, and a linear
/// ramp `(hi - L) / (hi - lo)` in between. Outside it: 1.
pub fn lambda_schedule(attention_loss: f64, epoch_fraction: f64, cfg: &CurriculumConfig) -> Result<f64> {
    if !(attention_loss >= 0.0) {
        return Err(invalid(format!("attention loss {attention_loss} must be non-negative")));
    }
    if !cfg.in_warmup(epoch_fraction) {
        return Ok(1.0);
    }
    Ok(if attention_loss > cfg.hi {
        0.0
    } else if attention_loss <= cfg.lo {
        1.0
    } else {
        ((cfg.hi - attention_loss) / (cfg.hi - cfg.lo)).clamp(0.0, 1.0)
    })
}

/// Training-loop view of the schedule.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CurriculumState {
    pub config: CurriculumConfig,
    pub epoch_fraction: f64,
    pub attention_loss: f64,
    pub lambda: f64,
    smoothed: Option<f64>,
}

impl CurriculumState {
    pub fn new(config: CurriculumConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            lambda: 1.0,
            ..Default::default()
        })
    }

    /// Records the current batch's attention loss and returns the new λ.
    pub fn update(&mut self, attention_loss: f64, epoch_fraction: f64) -> Result<f64> {
        let l = match (self.config.ema_decay, self.smoothed) {
            (Some(d), Some(prev)) => d * prev + (1.0 - d) * attention_loss,
            _ => attention_loss,
        };
        self.lambda = lambda_schedule(l, epoch_fraction, &self.config)?;
        self.smoothed = Some(l);
        self.attention_loss = attention_loss;
        self.epoch_fraction = epoch_fraction;
        Ok(self.lambda)
    }
}

/// `lambda * m_g + (1 - lambda) * m_gt` on images.
pub fn blend_attention(m_g: &Image, m_gt: &Image, lambda: f64) -> Result<Image> {
    m_g.check_same_shape(m_gt, "blend_attention")?;
    check_lambda(lambda)?;
    let l = lambda as f32;
    let data = m_g
        .data
        .iter()
        .zip(&m_gt.data)
        .map(|(&g, &t)| l * g + (1.0 - l) * t)
        .collect();
    Image::new(m_g.width, m_g.height, m_g.channels, data)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(())
}

/// Tensor form of [`blend_attention`]. `lambda` is a plain number, so no
/// gradient reaches the schedule, and `m_gt` should be a constant.
/// At the endpoints the result is exactly one of the inputs.
pub fn blend_attention_tensor<T: Float>(m_g: &Tensor<T>, m_gt: &Tensor<T>, lambda: f64) -> Result<Tensor<T>> {
    check_lambda(lambda)?;
    if m_g.shape() != m_gt.shape() {
        return Err(invalid(format!(
            "blend_attention: {:?} vs {:?}",
            m_g.shape(),
            m_gt.shape()
        )));
    }
    let m_gt = m_gt.detach();
    Ok(if lambda == 1.0 {
        m_g.clone()
    } else if lambda == 0.0 {
        m_gt
    } else {
        m_g.scale(lambda).add(&m_gt.scale(1.0 - lambda))?
    })
}

/// `F_out = (1 - alpha) F_in + alpha (M ⊗ F_in)`, written as
/// `F_in + alpha (M ⊗ F_in - F_in)` so that `alpha = 0` and `M = 1` both
/// return `F_in` exactly. `m` is `[B, 1, H, W]` (or per-channel), `alpha`
/// a one-element tensor.
pub fn apply_attention<T: Float>(f_in: &Tensor<T>, m: &Tensor<T>, alpha: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, c, h, w) = f_in.dims4()?;
    let (mb, mc, mh, mw) = m.dims4()?;
    if mb != b || (mc != 1 && mc != c) || mh != h || mw != w {
        return Err(invalid(format!(
            "attention map {:?} cannot gate features {:?}",
            m.shape(),
            f_in.shape()
        )));
    }
    if alpha.numel() != 1 {
        return Err(invalid(format!("alpha must be a scalar, got {:?}", alpha.shape())));
    }
    let gated = m.mul(f_in)?;
    Ok(f_in.add(&alpha.mul(&gated.sub(f_in)?)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ema_smooths_the_loss() {
        let mut s = CurriculumState::new(CurriculumConfig {
            ema_decay: Some(0.9),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(s.update(0.2, 0.0).unwrap(), 0.0);
        // 0.9 * 0.2 + 0.1 * 0.0 = 0.18 > hi
        assert_eq!(s.update(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn warmup_boundary_is_exclusive() {
        let cfg = CurriculumConfig::default();
        assert!(cfg.in_warmup(9.0 / 40.0));
        assert!(!cfg.in_warmup(10.0 / 40.0));
    }

    #[test]
    fn negative_loss_rejected() {
        assert!(lambda_schedule(-0.1, 0.0, &CurriculumConfig::default()).is_err());
        assert!(lambda_schedule(f64::NAN, 0.0, &CurriculumConfig::default()).is_err());
    }
}
