//! Paired dataset loading, patch extraction and augmentation.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{invalid, io_err, Result};
use crate::image::Image;

/// PNG files directly inside `dir`, sorted by file name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct Pair {
    pub name: String,
    pub hazy: Image,
    pub clear: Image,
}

/// Loads `<root>/hazy/*.png` with their same-named `<root>/clear/*.png`.
pub fn load_pairs(root: &Path) -> Result<Vec<Pair>> {
    let hazy_dir = root.join("hazy");
    let clear_dir = root.join("clear");
    let mut pairs = Vec::new();
    for hp in list_pngs(&hazy_dir)? {
        let name = hp.file_name().expect("listed file").to_string_lossy().into_owned();
        let cp = clear_dir.join(&name);
        if !cp.exists() {
            return Err(invalid(format!("{} has no clear counterpart {}", hp.display(), cp.display())));
        }
        let hazy = Image::load_png(&hp)?;
        let clear = Image::load_png(&cp)?;
        if !hazy.same_shape(&clear) {
            return Err(invalid(format!("{name}: hazy and clear sizes differ")));
        }
        pairs.push(Pair { name, hazy, clear });
    }
    if pairs.is_empty() {
        return Err(invalid(format!("no image pairs under {}", root.display())));
    }
    Ok(pairs)
}

/// Top-left offsets `0, stride, 2 stride, ...` plus a final offset flush
/// with the far edge when the grid stops short of it.
pub fn patch_positions(len: usize, patch: usize, stride: usize) -> Result<Vec<usize>> {
    if stride == 0 {
        return Err(invalid("patch stride must be at least 1"));
    }
    if patch == 0 || patch > len {
        return Err(invalid(format!("patch {patch} does not fit extent {len}")));
    }
    let last = len - patch;
    let mut pos: Vec<usize> = (0..=last).step_by(stride).collect();
    if *pos.last().expect("0 is always present") != last {
        pos.push(last);
    }
    Ok(pos)
}

/// Pixel-aligned hazy/clear crops covering the image.
pub fn extract_patches(hazy: &Image, clear: &Image, patch: usize, stride: usize) -> Result<Vec<(Image, Image)>> {
    hazy.check_same_shape(clear, "extract_patches")?;
    let ys = patch_positions(hazy.height, patch, stride)?;
    let xs = patch_positions(hazy.width, patch, stride)?;
    let mut out = Vec::with_capacity(ys.len() * xs.len());
    for &y in &ys {
        for &x in &xs {
            out.push((hazy.crop(y, x, patch, patch)?, clear.crop(y, x, patch, patch)?));
        }
    }
    Ok(out)
}

/// Rotates both images by `degrees` (a multiple of 90) and optionally
/// mirrors them horizontally afterwards.
pub fn augment(hazy: &Image, clear: &Image, degrees: u32, hflip: bool) -> Result<(Image, Image)> {
    if degrees % 90 != 0 || degrees >= 360 {
        return Err(invalid(format!("rotation must be one of 0/90/180/270, got {degrees}")));
    }
    let turns = (degrees / 90) as usize;
    let (mut h, mut c) = (hazy.rotate90(turns), clear.rotate90(turns));
    if hflip {
        h = h.flip_horizontal();
        c = c.flip_horizontal();
    }
    Ok((h, c))
}
