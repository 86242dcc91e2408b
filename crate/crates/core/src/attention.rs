//! Ground-truth attention maps from luminance deviation.

use crate::error::{invalid, Result};
use crate::image::Image;

pub const BT601: [f32; 3] = [0.299, 0.587, 0.114];

/// BT.601 luma of an RGB image, as a one-channel image.
pub fn rgb_to_y(image: &Image) -> Result<Image> {
    if image.channels != 3 {
        return Err(invalid(format!("rgb_to_y needs 3 channels, got {}", image.channels)));
    }
    let (r, g, b) = (image.plane(0), image.plane(1), image.plane(2));
    let data = (0..r.len())
        .map(|i| BT601[0] * r[i] + BT601[1] * g[i] + BT601[2] * b[i])
        .collect();
    Image::new(image.width, image.height, 1, data)
}

/// `|Y(hazy) - Y(clear)|`, clipped to `[0, 1]`.
pub fn attention_target(hazy: &Image, clear: &Image) -> Result<Image> {
    attention_target_with(hazy, clear, false)
}

/// With `signed`, returns `Y(hazy) - Y(clear)` clipped to `[0, 1]`, which
/// keeps only brightening.
pub fn attention_target_with(hazy: &Image, clear: &Image, signed: bool) -> Result<Image> {
    hazy.check_same_shape(clear, "attention_target")?;
    let (yh, yc) = (rgb_to_y(hazy)?, rgb_to_y(clear)?);
    let data = yh
        .data
        .iter()
        .zip(&yc.data)
        .map(|(a, b)| {
            let d = a - b;
            (if signed { d } else { d.abs() }).clamp(0.0, 1.0)
        })
        .collect();
    Image::new(hazy.width, hazy.height, 1, data)
}
