//! Planar floating-point rasters and their PNG / tensor conversions.

use std::path::Path;

use image::{imageops::FilterType, ImageBuffer, Luma, Rgb};
use scanet_autograd::{Float, Tensor};

use crate::error::{invalid, Error, Result};

/// A `channels x height x width` raster stored plane by plane. RGB images
/// have three channels; attention and transmission maps have one.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(invalid(format!(
                "{} values for a {channels}x{height}x{width} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn rgb(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let plane = width * height;
        let mut data = Vec::with_capacity(3 * plane);
        for v in rgb {
            data.extend(std::iter::repeat(v).take(plane));
        }
        Self {
            width,
            height,
            channels: 3,
            data,
        }
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &Image, op: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(invalid(format!(
                "{op}: {}x{}x{} vs {}x{}x{}",
                self.channels, self.height, self.width, other.channels, other.height, other.width
            )))
        }
    }

    pub fn clamp01(mut self) -> Self {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(invalid(format!(
                "crop {height}x{width} at ({top},{left}) outside {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(self.channels * height * width);
        for c in 0..self.channels {
            for y in top..top + height {
                let row = (c * self.height + y) * self.width;
                data.extend_from_slice(&self.data[row + left..row + left + width]);
            }
        }
        Image::new(width, height, self.channels, data)
    }

    /// Bilinear resize of every channel.
    pub fn resize(&self, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("resize to an empty image"));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let mut data = Vec::with_capacity(self.channels * width * height);
        for c in 0..self.channels {
            let buf: ImageBuffer<Luma<f32>, Vec<f32>> =
                ImageBuffer::from_raw(self.width as u32, self.height as u32, self.plane(c).to_vec())
                    .expect("plane length matches dimensions");
            let out = image::imageops::resize(&buf, width as u32, height as u32, FilterType::Triangle);
            data.extend(out.into_raw());
        }
        Image::new(width, height, self.channels, data)
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let mut data = vec![0.0; 3 * w * h];
        for (i, px) in rgb.pixels().enumerate() {
            for c in 0..3 {
                data[c * w * h + i] = f32::from(px[c]) / 255.0;
            }
        }
        Image::new(w, h, 3, data)
    }

    /// Writes an 8-bit PNG: RGB for three channels, grayscale for one.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let to_u8 = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let n = self.width * self.height;
        let (w, h) = (self.width as u32, self.height as u32);
        let res = match self.channels {
            1 => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, self.data.iter().map(|&v| to_u8(v)).collect::<Vec<u8>>())
                .expect("sized buffer")
                .save(path),
            3 => {
                let mut raw = Vec::with_capacity(3 * n);
                for i in 0..n {
                    for c in 0..3 {
                        raw.push(to_u8(self.data[c * n + i]));
                    }
                }
                ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw).expect("sized buffer").save(path)
            }
            c => return Err(invalid(format!("cannot save a {c}-channel image as PNG"))),
        };
        res.map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Rotates counter-clockwise by `quarter_turns * 90` degrees.
    pub fn rotate90(&self, quarter_turns: usize) -> Self {
        let mut out = self.clone();
        for _ in 0..quarter_turns % 4 {
            out = out.rotate_once();
        }
        out
    }

    fn rotate_once(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut data = vec![0.0; self.data.len()];
        // new[y'][x'] = old[x'][w - 1 - y'], new dims h' = w, w' = h
        for c in 0..self.channels {
            let src = self.plane(c);
            let dst = &mut data[c * w * h..(c + 1) * w * h];
            for ny in 0..w {
                for nx in 0..h {
                    dst[ny * h + nx] = src[nx * w + (w - 1 - ny)];
                }
            }
        }
        Self {
            width: h,
            height: w,
            channels: self.channels,
            data,
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut out = self.clone();
        for c in 0..self.channels {
            for row in out.plane_mut(c).chunks_mut(self.width) {
                row.reverse();
            }
        }
        out
    }

    pub fn flip_vertical(&self) -> Self {
        let mut out = self.clone();
        let w = self.width;
        for c in 0..self.channels {
            let plane = out.plane_mut(c);
            for y in 0..self.height / 2 {
                let (a, b) = plane.split_at_mut((self.height - 1 - y) * w);
                a[y * w..(y + 1) * w].swap_with_slice(&mut b[..w]);
            }
        }
        out
    }
}

/// Stacks equally sized images into a `[B, C, H, W]` tensor.
pub fn to_tensor<T: Float>(images: &[&Image]) -> Result<Tensor<T>> {
    let first = images.first().ok_or_else(|| invalid("empty image batch"))?;
    let mut data = Vec::with_capacity(images.len() * first.data.len());
    for img in images {
        first.check_same_shape(img, "to_tensor")?;
        data.extend(img.data.iter().map(|&v| T::lit(f64::from(v))));
    }
    Ok(Tensor::from_vec(
        data,
        &[images.len(), first.channels, first.height, first.width],
    )?)
}

/// Splits a `[B, C, H, W]` tensor back into images.
pub fn from_tensor<T: Float>(t: &Tensor<T>) -> Result<Vec<Image>> {
    let (b, c, h, w) = t.dims4()?;
    let per = c * h * w;
    (0..b)
        .map(|i| {
            let data = t.data()[i * per..(i + 1) * per]
                .iter()
                .map(|v| v.to_f32().unwrap_or(f32::NAN))
                .collect();
            Image::new(w, h, c, data)
        })
        .collect()
}
