//! Deformable convolution (single offset group, no modulation mask).
//!
//! Offsets are laid out as `[B, 2 * kH * kW, H_out, W_out]` with the pair
//! `(dy, dx)` for kernel tap `t` at channels `2t` and `2t + 1`. Samples are
//! read with bilinear interpolation; corners outside the input read zero.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::ops::conv::{bias_grad, for_batch, Conv2dSpec, Geom};
use crate::tensor::{Backward, Tensor};
use crate::Float;

pub type DeformConv2dSpec = Conv2dSpec;

/// Bilinear taps for one (kernel tap, output pixel) pair.
#[derive(Clone, Copy)]
struct Taps<T> {
    idx: [usize; 4],
    valid: [bool; 4],
    w: [T; 4],
    dwy: [T; 4],
    dwx: [T; 4],
}

fn bilinear_taps<T: Float>(py: T, px: T, h: usize, w: usize) -> Taps<T> {
    let y0f = py.floor();
    let x0f = px.floor();
    let ly = py - y0f;
    let lx = px - x0f;
    let hy = T::one() - ly;
    let hx = T::one() - lx;
    let y0 = y0f.to_isize().unwrap_or(isize::MIN / 2);
    let x0 = x0f.to_isize().unwrap_or(isize::MIN / 2);
    let corners = [(y0, x0), (y0, x0 + 1), (y0 + 1, x0), (y0 + 1, x0 + 1)];
    let mut t = Taps {
        idx: [0; 4],
        valid: [false; 4],
        w: [hy * hx, hy * lx, ly * hx, ly * lx],
        dwy: [-hx, -lx, hx, lx],
        dwx: [-hy, hy, -ly, ly],
    };
    for (i, &(y, x)) in corners.iter().enumerate() {
        if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
            t.valid[i] = true;
            t.idx[i] = y as usize * w + x as usize;
        }
    }
    t
}

/// Sampling taps for output rows `rows`, ordered `[tap][pixel]`.
fn band_taps<T: Float>(g: &Geom, offsets: &[T], rows: Range<usize>) -> Vec<Taps<T>> {
    let ohw = g.oh * g.ow;
    let n = rows.len() * g.ow;
    let mut taps = Vec::with_capacity(g.taps() * n);
    for ki in 0..g.kh {
        for kj in 0..g.kw {
            let t = ki * g.kw + kj;
            let oy_ch = &offsets[(2 * t) * ohw..(2 * t + 1) * ohw];
            let ox_ch = &offsets[(2 * t + 1) * ohw..(2 * t + 2) * ohw];
            for oy in rows.clone() {
                for ox in 0..g.ow {
                    let p = oy * g.ow + ox;
                    let base_y = (oy * g.stride + ki * g.dil) as f64 - g.pad as f64;
                    let base_x = (ox * g.stride + kj * g.dil) as f64 - g.pad as f64;
                    let py = T::lit(base_y) + oy_ch[p];
                    let px = T::lit(base_x) + ox_ch[p];
                    taps.push(bilinear_taps(py, px, g.h, g.w));
                }
            }
        }
    }
    taps
}

fn deform_im2col<T: Float>(g: &Geom, x: &[T], taps: &[Taps<T>], n: usize, cols: &mut [T]) {
    let hw = g.h * g.w;
    let nt = g.taps();
    for ci in 0..g.c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for t in 0..nt {
            let row = &mut cols[(ci * nt + t) * n..(ci * nt + t + 1) * n];
            for (v, tp) in row.iter_mut().zip(&taps[t * n..(t + 1) * n]) {
                let mut acc = T::zero();
                for c in 0..4 {
                    if tp.valid[c] {
                        acc += tp.w[c] * plane[tp.idx[c]];
                    }
                }
                *v = acc;
            }
        }
    }
}

struct DeformBackward<T: Float> {
    x: Tensor<T>,
    offsets: Tensor<T>,
    w: Tensor<T>,
    b: Option<Tensor<T>>,
    geom: Geom,
}

impl<T: Float> Backward<T> for DeformBackward<T> {
    fn name(&self) -> &'static str {
        "deform_conv2d"
    }

    fn inputs(&self) -> Vec<&Tensor<T>> {
        let mut v = vec![&self.x, &self.offsets, &self.w];
        if let Some(b) = &self.b {
            v.push(b);
        }
        v
    }

    fn backward(&self, _out: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let g = self.geom;
        let batch = self.x.shape()[0];
        let cout = self.w.shape()[0];
        let k = g.col_rows();
        let nt = g.taps();
        let hw = g.h * g.w;
        let ohw = g.oh * g.ow;
        let in_len = g.c * hw;
        let off_len = 2 * nt * ohw;
        let (xd, od, wd) = (self.x.data(), self.offsets.data(), self.w.data());
        let need_x = self.x.requires_grad();
        let need_off = self.offsets.requires_grad();
        let need_w = self.w.requires_grad();

        let per_item = for_batch(batch, |bi| {
            let x = &xd[bi * in_len..(bi + 1) * in_len];
            let off = &od[bi * off_len..(bi + 1) * off_len];
            let dy = &grad[bi * cout * ohw..(bi + 1) * cout * ohw];
            let mut dx = need_x.then(|| vec![T::zero(); in_len]);
            let mut doff = need_off.then(|| vec![T::zero(); off_len]);
            let mut dw = need_w.then(|| vec![T::zero(); cout * k]);
            let mut cols = Vec::new();
            let mut dcols = Vec::new();
            for rows in g.bands() {
                let n = rows.len() * g.ow;
                let start = rows.start * g.ow;
                let taps = band_taps(&g, off, rows);
                let dy_band = &dy[start..];
                if let Some(dw) = dw.as_mut() {
                    cols.resize(k * n, T::zero());
                    deform_im2col(&g, x, &taps, n, &mut cols);
                    T::gemm(cout, n, k, T::one(), dy_band, (ohw as isize, 1), &cols, (1, n as isize), T::one(), dw, (k as isize, 1));
                }
                if dx.is_none() && doff.is_none() {
                    continue;
                }
                dcols.resize(k * n, T::zero());
                T::gemm(k, cout, n, T::one(), wd, (1, k as isize), dy_band, (ohw as isize, 1), T::zero(), &mut dcols, (n as isize, 1));
                for ci in 0..g.c {
                    let plane = &x[ci * hw..(ci + 1) * hw];
                    for t in 0..nt {
                        let drow = &dcols[(ci * nt + t) * n..(ci * nt + t + 1) * n];
                        for (p, (&gv, tp)) in drow.iter().zip(&taps[t * n..(t + 1) * n]).enumerate() {
                            if gv == T::zero() {
                                continue;
                            }
                            let mut gy = T::zero();
                            let mut gx = T::zero();
                            for c in 0..4 {
                                if !tp.valid[c] {
                                    continue;
                                }
                                if let Some(dx) = dx.as_mut() {
                                    dx[ci * hw + tp.idx[c]] += tp.w[c] * gv;
                                }
                                let v = plane[tp.idx[c]];
                                gy += v * tp.dwy[c];
                                gx += v * tp.dwx[c];
                            }
                            if let Some(doff) = doff.as_mut() {
                                let pix = start + p;
                                doff[(2 * t) * ohw + pix] += gy * gv;
                                doff[(2 * t + 1) * ohw + pix] += gx * gv;
                            }
                        }
                    }
                }
            }
            (dx, doff, dw)
        });

        let mut dx_all = need_x.then(|| Vec::with_capacity(batch * in_len));
        let mut doff_all = need_off.then(|| Vec::with_capacity(batch * off_len));
        let mut dw_all = need_w.then(|| vec![T::zero(); cout * k]);
        for (dx, doff, dw) in per_item {
            if let (Some(all), Some(v)) = (dx_all.as_mut(), dx) {
                all.extend_from_slice(&v);
            }
            if let (Some(all), Some(v)) = (doff_all.as_mut(), doff) {
                all.extend_from_slice(&v);
            }
            if let (Some(acc), Some(v)) = (dw_all.as_mut(), dw) {
                for (a, b) in acc.iter_mut().zip(v) {
                    *a += b;
                }
            }
        }
        let mut out = vec![dx_all, doff_all, dw_all];
        if let Some(b) = &self.b {
            out.push(b.requires_grad().then(|| bias_grad(grad, batch, cout, ohw)));
        }
        out
    }
}

impl<T: Float> Tensor<T> {
    /// Deformable 2-D convolution: each kernel tap samples the input at its
    /// regular grid position plus a learned, per-location offset.
    pub fn deform_conv2d(
        &self,
        offsets: &Tensor<T>,
        weight: &Tensor<T>,
        bias: Option<&Tensor<T>>,
        spec: DeformConv2dSpec,
    ) -> Result<Tensor<T>> {
        let (batch, c, h, w) = self.dims4()?;
        let (cout, wc, kh, kw) = weight.dims4()?;
        if wc != c {
            return Err(Error::mismatch("deform_conv2d", self.shape(), weight.shape()));
        }
        if let Some(b) = bias {
            if b.shape() != [cout] {
                return Err(Error::mismatch("deform_conv2d", b.shape(), &[cout]));
            }
        }
        let (oh, ow) = match (spec.output_size(h, kh), spec.output_size(w, kw)) {
            (Some(oh), Some(ow)) => (oh, ow),
            _ => return Err(Error::invalid("deform_conv2d", format!("{h}x{w} input too small"))),
        };
        let expect = [batch, 2 * kh * kw, oh, ow];
        if offsets.shape() != expect {
            return Err(Error::mismatch("deform_conv2d", offsets.shape(), &expect));
        }
        if !offsets.all_finite() {
            return Err(Error::invalid("deform_conv2d", "offsets must be finite"));
        }
        let geom = Geom {
            c,
            h,
            w,
            kh,
            kw,
            stride: spec.stride,
            pad: spec.padding,
            dil: spec.dilation,
            oh,
            ow,
        };
        let k = geom.col_rows();
        let in_len = c * h * w;
        let ohw = oh * ow;
        let off_len = 2 * kh * kw * ohw;
        let (xd, od, wd) = (self.data(), offsets.data(), weight.data());
        let bd = bias.map(|b| b.data());
        let items = for_batch(batch, |bi| {
            let x = &xd[bi * in_len..(bi + 1) * in_len];
            let off = &od[bi * off_len..(bi + 1) * off_len];
            let mut out = vec![T::zero(); cout * ohw];
            let mut cols = Vec::new();
            for rows in geom.bands() {
                let n = rows.len() * ow;
                let start = rows.start * ow;
                let taps = band_taps(&geom, off, rows);
                cols.resize(k * n, T::zero());
                deform_im2col(&geom, x, &taps, n, &mut cols);
                T::gemm(cout, k, n, T::one(), wd, (k as isize, 1), &cols, (n as isize, 1), T::zero(), &mut out[start..], (ohw as isize, 1));
            }
            if let Some(bias) = bd {
                for (co, &bv) in bias.iter().enumerate() {
                    out[co * ohw..(co + 1) * ohw].iter_mut().for_each(|v| *v += bv);
                }
            }
            out
        });
        Ok(Tensor::from_op(
            items.concat(),
            vec![batch, cout, oh, ow],
            DeformBackward {
                x: self.clone(),
                offsets: offsets.clone(),
                w: weight.clone(),
                b: bias.cloned(),
                geom,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_weights_sum_to_one() {
        let t = bilinear_taps(1.25f64, 2.5, 8, 8);
        let s: f64 = t.w.iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!(t.valid.iter().all(|&v| v));
    }

    #[test]
    fn samples_outside_read_zero() {
        let t = bilinear_taps(-1.5f64, 0.0, 4, 4);
        assert!(t.valid.iter().all(|&v| !v));
    }

    #[test]
    fn offset_shape_is_checked() {
        let x = Tensor::<f32>::zeros(&[1, 2, 5, 5]);
        let w = Tensor::<f32>::zeros(&[2, 2, 3, 3]);
        let off = Tensor::<f32>::zeros(&[1, 9, 5, 5]);
        assert!(x.deform_conv2d(&off, &w, None, Conv2dSpec::same(3)).is_err());
    }
}
