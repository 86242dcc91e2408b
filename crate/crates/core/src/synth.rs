//! Synthetic non-homogeneous haze: smooth random transmission fields pushed
//! through the atmospheric scattering model `I = J t + A (1 - t)`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, io_err, Error, Result};
use crate::image::Image;

/// Atmospheric light, either global or varying per pixel.
#[derive(Clone, Debug, PartialEq)]
pub enum Airlight {
    Scalar(f32),
    Map(Image),
}

impl Airlight {
    fn at(&self, i: usize) -> f32 {
        match self {
            Airlight::Scalar(a) => *a,
            Airlight::Map(m) => m.data[i],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionField {
    /// Single-channel map with values in `(0, 1]`.
    pub t: Image,
    pub airlight: Airlight,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthPair {
    pub clear: Image,
    pub hazy: Image,
    pub field: TransmissionField,
    pub seed: u64,
}

/// Knobs for [`make_pair`] and [`generate_dataset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HazeOptions {
    pub bumps: usize,
    /// Inclusive range the per-pair smoothness is drawn from.
    pub smoothness: (f64, f64),
    /// Inclusive range the per-pair minimum transmission is drawn from.
    pub t_min: (f64, f64),
    pub airlight: f32,
    pub per_pixel_airlight: bool,
}

impl Default for HazeOptions {
    fn default() -> Self {
        Self {
            bumps: 4,
            smoothness: (0.6, 1.4),
            t_min: (0.2, 0.5),
            airlight: 0.9,
            per_pixel_airlight: false,
        }
    }
}

/// Sum of `bumps` random anisotropic Gaussians, min-max normalised to `[0, 1]`.
/// A flat field (e.g. huge `smoothness`) normalises to 0.5 everywhere.
fn smooth_field(height: usize, width: usize, smoothness: f64, bumps: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let scale = smoothness * height.min(width) as f64;
    let params: Vec<_> = (0..bumps.max(1))
        .map(|_| {
            let cy = rng.gen_range(0.0..height as f64);
            let cx = rng.gen_range(0.0..width as f64);
            let sa = scale * rng.gen_range(0.15..0.45);
            let sb = scale * rng.gen_range(0.15..0.45);
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let amp = rng.gen_range(0.5..1.0);
            (cy, cx, sa, sb, theta.sin(), theta.cos(), amp)
        })
        .collect();
    let mut field = vec![0.0; height * width];
    for y in 0..height {
        for x in 0..width {
            let mut v = 0.0;
            for &(cy, cx, sa, sb, s, c, amp) in &params {
                let (dy, dx) = (y as f64 - cy, x as f64 - cx);
                let u = c * dx + s * dy;
                let w = -s * dx + c * dy;
                v += amp * (-0.5 * ((u / sa).powi(2) + (w / sb).powi(2))).exp();
            }
            field[y * width + x] = v;
        }
    }
    let (lo, hi) = field
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo < 1e-12 {
        field.fill(0.5);
    } else {
        for v in &mut field {
            *v = (*v - lo) / (hi - lo);
        }
    }
    field
}

/// A smooth random transmission map rescaled into `[t_min, 1]`; dense haze
/// (low `t`) sits where the underlying field peaks.
pub fn make_transmission(
    height: usize,
    width: usize,
    smoothness: f64,
    t_min: f64,
    seed: u64,
) -> Result<TransmissionField> {
    make_transmission_with(height, width, smoothness, t_min, seed, &HazeOptions::default())
}

fn make_transmission_with(
    height: usize,
    width: usize,
    smoothness: f64,
    t_min: f64,
    seed: u64,
    opts: &HazeOptions,
) -> Result<TransmissionField> {
    if height == 0 || width == 0 {
        return Err(invalid(format!("transmission of size {height}x{width}")));
    }
    if !(t_min > 0.0 && t_min < 1.0) {
        return Err(invalid(format!("t_min {t_min} outside (0, 1)")));
    }
    if !(smoothness > 0.0) {
        return Err(invalid(format!("smoothness {smoothness} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = smooth_field(height, width, smoothness, opts.bumps, &mut rng);
    let t = f
        .iter()
        .map(|&v| (t_min + (1.0 - t_min) * (1.0 - v)).clamp(t_min, 1.0) as f32)
        .collect();
    let airlight = if opts.per_pixel_airlight {
        let g = smooth_field(height, width, smoothness, opts.bumps, &mut rng);
        let base = f64::from(opts.airlight);
        let lo = (base - 0.1).max(0.0);
        let hi = (base + 0.1).min(1.0);
        let data = g.iter().map(|&v| (lo + (hi - lo) * v) as f32).collect();
        Airlight::Map(Image::new(width, height, 1, data)?)
    } else {
        Airlight::Scalar(opts.airlight.clamp(0.0, 1.0))
    };
    Ok(TransmissionField {
        t: Image::new(width, height, 1, t)?,
        airlight,
    })
}

fn check_haze_inputs(clear: &Image, t: &Image, a: &Airlight) -> Result<()> {
    if t.channels != 1 || t.width != clear.width || t.height != clear.height {
        return Err(invalid(format!(
            "transmission {}x{}x{} does not match image {}x{}",
            t.channels, t.height, t.width, clear.height, clear.width
        )));
    }
    if let Airlight::Map(m) = a {
        t.check_same_shape(m, "apply_haze airlight")?;
    }
    Ok(())
}

/// `J t + A (1 - t)` without clipping.
pub fn apply_haze_unclipped(clear: &Image, t: &Image, a: &Airlight) -> Result<Image> {
    check_haze_inputs(clear, t, a)?;
    let n = clear.width * clear.height;
    let mut out = clear.clone();
    for c in 0..clear.channels {
        for (i, v) in out.plane_mut(c).iter_mut().enumerate() {
            let ti = t.data[i];
            *v = *v * ti + a.at(i) * (1.0 - ti);
        }
    }
    debug_assert_eq!(out.data.len(), n * clear.channels);
    Ok(out)
}

/// Renders a hazy image, clipped to `[0, 1]`.
pub fn apply_haze(clear: &Image, t: &Image, a: &Airlight) -> Result<Image> {
    Ok(apply_haze_unclipped(clear, t, a)?.clamp01())
}

/// A procedural clear scene: a colour gradient, an optional checkerboard
/// overlay and a handful of flat-coloured discs and rectangles.
pub fn procedural_clear(size: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let color = |rng: &mut ChaCha8Rng| -> [f32; 3] { [rng.gen(), rng.gen(), rng.gen()] };
    let (c0, c1) = (color(&mut rng), color(&mut rng));
    let angle: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
    let (dir_x, dir_y) = (angle.cos(), angle.sin());
    let checker = rng.gen_bool(0.5).then(|| {
        let period = rng.gen_range(4..=(size / 4).max(5));
        (period, color(&mut rng), rng.gen_range(0.2f32..0.6))
    });
    let shapes: Vec<_> = (0..rng.gen_range(3..=6))
        .map(|_| {
            let disc = rng.gen_bool(0.5);
            let cy = rng.gen_range(0.0..size as f32);
            let cx = rng.gen_range(0.0..size as f32);
            let r1 = rng.gen_range(0.05..0.25) * size as f32;
            let r2 = rng.gen_range(0.05..0.25) * size as f32;
            (disc, cy, cx, r1, r2, color(&mut rng))
        })
        .collect();

    let n = size * size;
    let mut data = vec![0.0f32; 3 * n];
    let half = size as f32 / 2.0;
    for y in 0..size {
        for x in 0..size {
            let (fy, fx) = (y as f32, x as f32);
            let s = (((fx - half) * dir_x + (fy - half) * dir_y) / size as f32 + 0.5).clamp(0.0, 1.0);
            let mut px = [0.0f32; 3];
            for c in 0..3 {
                px[c] = c0[c] * (1.0 - s) + c1[c] * s;
            }
            if let Some((period, col, opacity)) = checker {
                if ((x / period) + (y / period)) % 2 == 0 {
                    for c in 0..3 {
                        px[c] = px[c] * (1.0 - opacity) + col[c] * opacity;
                    }
                }
            }
            for &(disc, cy, cx, r1, r2, col) in &shapes {
                let inside = if disc {
                    ((fy - cy) / r1).powi(2) + ((fx - cx) / r2).powi(2) <= 1.0
                } else {
                    (fy - cy).abs() <= r1 && (fx - cx).abs() <= r2
                };
                if inside {
                    px = col;
                }
            }
            for c in 0..3 {
                data[c * n + y * size + x] = px[c];
            }
        }
    }
    Image {
        width: size,
        height: size,
        channels: 3,
        data,
    }
}

/// Haze parameters drawn for one pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    pub seed: u64,
    pub smoothness: f64,
    pub t_min: f64,
    pub airlight: f32,
    pub per_pixel_airlight: bool,
}

fn pair_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 step, so neighbouring indices get unrelated streams
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn draw_params(seed: u64, opts: &HazeOptions) -> PairParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    PairParams {
        seed,
        smoothness: draw(&mut rng, opts.smoothness),
        t_min: draw(&mut rng, opts.t_min),
        airlight: opts.airlight,
        per_pixel_airlight: opts.per_pixel_airlight,
    }
}

/// Hazes `clear` with a field drawn from `seed`.
pub fn haze_image(clear: &Image, seed: u64, opts: &HazeOptions) -> Result<(SynthPair, PairParams)> {
    let params = draw_params(seed, opts);
    let field = make_transmission_with(clear.height, clear.width, params.smoothness, params.t_min, seed, opts)?;
    let hazy = apply_haze(clear, &field.t, &field.airlight)?;
    Ok((
        SynthPair {
            clear: clear.clone(),
            hazy,
            field,
            seed,
        },
        params,
    ))
}

/// One procedural pair of side `size`.
pub fn make_pair(size: usize, seed: u64, opts: &HazeOptions) -> Result<(SynthPair, PairParams)> {
    if size == 0 {
        return Err(invalid("pair size must be positive"));
    }
    haze_image(&procedural_clear(size, seed), seed, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    #[serde(flatten)]
    pub params: PairParams,
    pub clear_sha256: String,
    pub hazy_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub size: usize,
    pub haze: HazeOptions,
    pub pairs: Vec<ManifestEntry>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes `clear/NNNN.png`, `hazy/NNNN.png` and `manifest.json` under `out_dir`.
pub fn generate_dataset(n_pairs: usize, size: usize, out_dir: &Path, seed: u64) -> Result<Manifest> {
    generate_dataset_with(n_pairs, size, out_dir, seed, &HazeOptions::default(), None)
}

/// Like [`generate_dataset`], optionally taking clear scenes from the PNGs
/// in `clear_source` (sorted by name, centre-cropped and resized to `size`).
pub fn generate_dataset_with(
    n_pairs: usize,
    size: usize,
    out_dir: &Path,
    seed: u64,
    opts: &HazeOptions,
    clear_source: Option<&Path>,
) -> Result<Manifest> {
    if size == 0 {
        return Err(invalid("dataset image size must be positive"));
    }
    let sources = match clear_source {
        Some(dir) => {
            let files = crate::data::list_pngs(dir)?;
            if files.is_empty() && n_pairs > 0 {
                return Err(invalid(format!("no PNG files in {}", dir.display())));
            }
            files
        }
        None => Vec::new(),
    };
    let clear_dir = out_dir.join("clear");
    let hazy_dir = out_dir.join("hazy");
    for d in [&clear_dir, &hazy_dir] {
        fs::create_dir_all(d).map_err(io_err(d.as_path()))?;
    }
    let mut pairs = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        let s = pair_seed(seed, i as u64);
        let clear = if sources.is_empty() {
            procedural_clear(size, s)
        } else {
            square_resize(&Image::load_png(&sources[i % sources.len()])?, size)?
        };
        let (pair, params) = haze_image(&clear, s, opts)?;
        let name = format!("{i:04}.png");
        let cp: PathBuf = clear_dir.join(&name);
        let hp: PathBuf = hazy_dir.join(&name);
        pair.clear.save_png(&cp)?;
        pair.hazy.save_png(&hp)?;
        pairs.push(ManifestEntry {
            name,
            params,
            clear_sha256: sha256_file(&cp)?,
            hazy_sha256: sha256_file(&hp)?,
        });
    }
    let manifest = Manifest {
        seed,
        size,
        haze: opts.clone(),
        pairs,
    };
    let path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    fs::write(&path, json).map_err(io_err(path.as_path()))?;
    Ok(manifest)
}

fn square_resize(img: &Image, size: usize) -> Result<Image> {
    let side = img.width.min(img.height);
    img.crop((img.height - side) / 2, (img.width - side) / 2, side, side)?
        .resize(size, size)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_when_smoothness_is_huge() {
        let f = make_transmission(16, 16, 1e12, 0.3, 1).unwrap();
        let first = f.t.data[0];
        assert!(f.t.data.iter().all(|&v| v == first));
        assert!((0.3..=1.0).contains(&first));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(make_transmission(0, 4, 1.0, 0.3, 0).is_err());
        assert!(make_transmission(4, 4, 0.0, 0.3, 0).is_err());
        assert!(make_transmission(4, 4, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn field_spans_its_range() {
        let f = make_transmission(32, 48, 1.0, 0.25, 3).unwrap();
        let min = f.t.data.iter().copied().fold(f32::INFINITY, f32::min);
        let max = f.t.data.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        assert!((min - 0.25).abs() < 1e-6 && (max - 1.0).abs() < 1e-6);
    }

    #[test]
    fn per_pixel_airlight_stays_in_unit_range() {
        let opts = HazeOptions {
            per_pixel_airlight: true,
            airlight: 0.95,
            ..HazeOptions::default()
        };
        let (pair, _) = make_pair(24, 5, &opts).unwrap();
        match &pair.field.airlight {
            Airlight::Map(m) => assert!(m.data.iter().all(|v| (0.0..=1.0).contains(v))),
            Airlight::Scalar(_) => panic!("expected a map"),
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let clear = Image::rgb(8, 8, [0.5; 3]);
        let t = Image::filled(4, 8, 1, 0.5);
        assert!(apply_haze(&clear, &t, &Airlight::Scalar(0.9)).is_err());
    }
}
