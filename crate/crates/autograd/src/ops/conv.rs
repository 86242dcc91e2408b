use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Backward, Tensor};
use crate::{parallel_enabled, Float};

/// Upper bound on the number of elements in one im2col buffer.
const BAND_ELEMS: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl Default for Conv2dSpec {
    fn default() -> Self {
        Self {
            stride: 1,
            padding: 0,
            dilation: 1,
        }
    }
}

impl Conv2dSpec {
    /// Stride 1 with "same" zero padding for an odd kernel.
    pub fn same(kernel: usize) -> Self {
        Self {
            stride: 1,
            padding: kernel / 2,
            dilation: 1,
        }
    }

    pub fn dilated(kernel: usize, dilation: usize) -> Self {
        Self {
            stride: 1,
            padding: dilation * (kernel / 2),
            dilation,
        }
    }

    pub fn strided(stride: usize, padding: usize) -> Self {
        Self {
            stride,
            padding,
            dilation: 1,
        }
    }

    pub fn output_size(&self, input: usize, kernel: usize) -> Option<usize> {
        let span = self.dilation * (kernel - 1) + 1;
        let padded = input + 2 * self.padding;
        if self.stride == 0 || padded < span {
            return None;
        }
        Some((padded - span) / self.stride + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvTranspose2dSpec {
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
}

impl ConvTranspose2dSpec {
    pub fn output_size(&self, input: usize, kernel: usize) -> Option<usize> {
        if input == 0 || self.output_padding >= self.stride.max(1) {
            return None;
        }
        ((input - 1) * self.stride + kernel + self.output_padding).checked_sub(2 * self.padding)
    }
}

/// Geometry of a (forward) convolution from a `c x h x w` plane to `oh x ow`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Geom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub dil: usize,
    pub oh: usize,
    pub ow: usize,
}

impl Geom {
    pub fn taps(&self) -> usize {
        self.kh * self.kw
    }

    pub fn col_rows(&self) -> usize {
        self.c * self.taps()
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    /// Output rows per band so one im2col buffer stays bounded.
    pub fn band_rows(&self) -> usize {
        (BAND_ELEMS / (self.col_rows() * self.ow).max(1)).clamp(1, self.oh.max(1))
    }

    pub fn bands(&self) -> impl Iterator<Item = Range<usize>> {
        let step = self.band_rows();
        let oh = self.oh;
        (0..oh).step_by(step).map(move |s| s..(s + step).min(oh))
    }

    /// Valid output-column range for kernel column `kj`.
    #[inline]
    fn col_range(&self, kj: usize) -> (usize, usize) {
        let off = (kj * self.dil) as isize - self.pad as isize;
        let s = self.stride as isize;
        // need 0 <= ox*s + off < w
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        let hi = (self.w as isize - off + s - 1) / s;
        let hi = hi.clamp(0, self.ow as isize);
        (lo.min(hi) as usize, hi as usize)
    }
}

/// Unfold output rows `rows` of one input plane stack into `cols`
/// (`c*kh*kw` x `rows.len()*ow`).
pub(crate) fn im2col<T: Float>(g: &Geom, x: &[T], rows: Range<usize>, cols: &mut [T]) {
    let n = rows.len() * g.ow;
    debug_assert_eq!(cols.len(), g.col_rows() * n);
    for ci in 0..g.c {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let r = (ci * g.kh + ki) * g.kw + kj;
                let dst_row = &mut cols[r * n..(r + 1) * n];
                let (lo, hi) = g.col_range(kj);
                for (band_y, oy) in rows.clone().enumerate() {
                    let dst = &mut dst_row[band_y * g.ow..(band_y + 1) * g.ow];
                    let iy = (oy * g.stride + ki * g.dil) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize || lo >= hi {
                        dst.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    dst[..lo].iter_mut().for_each(|v| *v = T::zero());
                    dst[hi..].iter_mut().for_each(|v| *v = T::zero());
                    let x0 = (lo * g.stride + kj * g.dil) as isize - g.pad as isize;
                    let x0 = x0 as usize;
                    if g.stride == 1 {
                        dst[lo..hi].copy_from_slice(&src[x0..x0 + (hi - lo)]);
                    } else {
                        for (t, v) in dst[lo..hi].iter_mut().enumerate() {
                            *v = src[x0 + t * g.stride];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add `cols` back into the input planes.
pub(crate) fn col2im<T: Float>(g: &Geom, cols: &[T], rows: Range<usize>, x: &mut [T]) {
    let n = rows.len() * g.ow;
    for ci in 0..g.c {
        let plane = &mut x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let r = (ci * g.kh + ki) * g.kw + kj;
                let src_row = &cols[r * n..(r + 1) * n];
                let (lo, hi) = g.col_range(kj);
                if lo >= hi {
                    continue;
                }
                for (band_y, oy) in rows.clone().enumerate() {
                    let iy = (oy * g.stride + ki * g.dil) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let src = &src_row[band_y * g.ow..(band_y + 1) * g.ow];
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let x0 = ((lo * g.stride + kj * g.dil) as isize - g.pad as isize) as usize;
                    for t in 0..hi - lo {
                        dst[x0 + t * g.stride] += src[lo + t];
                    }
                }
            }
        }
    }
}

/// Runs `f` for every batch index, in parallel when enabled. The closure
/// must only touch state owned by its own batch item.
pub(crate) fn for_batch<R: Send>(b: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    if parallel_enabled() && b > 1 {
        (0..b).into_par_iter().map(f).collect()
    } else {
        (0..b).map(f).collect()
    }
}

fn sum_in_order<T: Float>(parts: Vec<Vec<T>>, len: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); len];
    for p in parts {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    acc
}

pub(crate) fn bias_grad<T: Float>(grad: &[T], b: usize, c: usize, hw: usize) -> Vec<T> {
    let mut g = vec![T::zero(); c];
    for bi in 0..b {
        for (ci, gc) in g.iter_mut().enumerate() {
            let s: T = grad[(bi * c + ci) * hw..(bi * c + ci + 1) * hw].iter().copied().sum();
            *gc += s;
        }
    }
    g
}

fn conv_forward_item<T: Float>(g: &Geom, cout: usize, x: &[T], w: &[T], bias: Option<&[T]>, out: &mut [T]) {
    let ohw = g.oh * g.ow;
    let k = g.col_rows();
    if g.is_pointwise() {
        T::gemm(cout, k, ohw, T::one(), w, (k as isize, 1), x, (ohw as isize, 1), T::zero(), out, (ohw as isize, 1));
    } else {
        let mut cols = Vec::new();
        for rows in g.bands() {
            let n = rows.len() * g.ow;
            cols.resize(k * n, T::zero());
            im2col(g, x, rows.clone(), &mut cols);
            let off = rows.start * g.ow;
            T::gemm(
                cout,
                k,
                n,
                T::one(),
                w,
                (k as isize, 1),
                &cols,
                (n as isize, 1),
                T::zero(),
                &mut out[off..],
                (ohw as isize, 1),
            );
        }
    }
    if let Some(bias) = bias {
        for (co, &bv) in bias.iter().enumerate() {
            out[co * ohw..(co + 1) * ohw].iter_mut().for_each(|v| *v += bv);
        }
    }
}

struct Conv2dBackward<T: Float> {
    x: Tensor<T>,
    w: Tensor<T>,
    b: Option<Tensor<T>>,
    geom: Geom,
}

impl<T: Float> Backward<T> for Conv2dBackward<T> {
    fn name(&self) -> &'static str {
        "conv2d"
    }

    fn inputs(&self) -> Vec<&Tensor<T>> {
        let mut v = vec![&self.x, &self.w];
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
        let ohw = g.oh * g.ow;
        let in_len = g.c * g.h * g.w;
        let (xd, wd) = (self.x.data(), self.w.data());
        let need_x = self.x.requires_grad();
        let need_w = self.w.requires_grad();

        let per_item = for_batch(batch, |bi| {
            let x = &xd[bi * in_len..(bi + 1) * in_len];
            let dy = &grad[bi * cout * ohw..(bi + 1) * cout * ohw];
            let mut dx = need_x.then(|| vec![T::zero(); in_len]);
            let mut dw = need_w.then(|| vec![T::zero(); cout * k]);
            if g.is_pointwise() {
                if let Some(dx) = dx.as_mut() {
                    // dx[k, ohw] = w^T[k, cout] @ dy[cout, ohw]
                    T::gemm(k, cout, ohw, T::one(), wd, (1, k as isize), dy, (ohw as isize, 1), T::zero(), dx, (ohw as isize, 1));
                }
                if let Some(dw) = dw.as_mut() {
                    T::gemm(cout, ohw, k, T::one(), dy, (ohw as isize, 1), x, (1, ohw as isize), T::zero(), dw, (k as isize, 1));
                }
            } else {
                let mut cols = Vec::new();
                let mut dcols = Vec::new();
                for rows in g.bands() {
                    let n = rows.len() * g.ow;
                    let off = rows.start * g.ow;
                    let dy_band = &dy[off..];
                    if let Some(dw) = dw.as_mut() {
                        cols.resize(k * n, T::zero());
                        im2col(&g, x, rows.clone(), &mut cols);
                        T::gemm(cout, n, k, T::one(), dy_band, (ohw as isize, 1), &cols, (1, n as isize), T::one(), dw, (k as isize, 1));
                    }
                    if let Some(dx) = dx.as_mut() {
                        dcols.resize(k * n, T::zero());
                        T::gemm(k, cout, n, T::one(), wd, (1, k as isize), dy_band, (ohw as isize, 1), T::zero(), &mut dcols, (n as isize, 1));
                        col2im(&g, &dcols, rows.clone(), dx);
                    }
                }
            }
            (dx, dw)
        });

        let mut dx_all = need_x.then(|| Vec::with_capacity(batch * in_len));
        let mut dw_parts = Vec::new();
        for (dx, dw) in per_item {
            if let (Some(all), Some(dx)) = (dx_all.as_mut(), dx) {
                all.extend_from_slice(&dx);
            }
            if let Some(dw) = dw {
                dw_parts.push(dw);
            }
        }
        let dw = need_w.then(|| sum_in_order(dw_parts, cout * k));
        let mut out = vec![dx_all, dw];
        if let Some(b) = &self.b {
            out.push(b.requires_grad().then(|| bias_grad(grad, batch, cout, ohw)));
        }
        out
    }
}

struct ConvTranspose2dBackward<T: Float> {
    x: Tensor<T>,
    w: Tensor<T>,
    b: Option<Tensor<T>>,
    /// Geometry of the adjoint forward convolution (output -> input).
    geom: Geom,
}

impl<T: Float> Backward<T> for ConvTranspose2dBackward<T> {
    fn name(&self) -> &'static str {
        "conv_transpose2d"
    }

    fn inputs(&self) -> Vec<&Tensor<T>> {
        let mut v = vec![&self.x, &self.w];
        if let Some(b) = &self.b {
            v.push(b);
        }
        v
    }

    fn backward(&self, _out: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let g = self.geom;
        let (batch, cin, h, w) = self.x.dims4().expect("rank 4");
        let cout = g.c;
        let k = g.col_rows();
        let hw = h * w;
        let out_len = cout * g.h * g.w;
        let (xd, wd) = (self.x.data(), self.w.data());
        let need_x = self.x.requires_grad();
        let need_w = self.w.requires_grad();

        let per_item = for_batch(batch, |bi| {
            let x = &xd[bi * cin * hw..(bi + 1) * cin * hw];
            let dy = &grad[bi * out_len..(bi + 1) * out_len];
            let mut dx = need_x.then(|| vec![T::zero(); cin * hw]);
            let mut dw = need_w.then(|| vec![T::zero(); cin * k]);
            let mut dcols = Vec::new();
            for rows in g.bands() {
                let n = rows.len() * g.ow;
                let off = rows.start * g.ow;
                dcols.resize(k * n, T::zero());
                im2col(&g, dy, rows.clone(), &mut dcols);
                if let Some(dx) = dx.as_mut() {
                    // dx[cin, n] = w[cin, k] @ dcols[k, n]
                    T::gemm(cin, k, n, T::one(), wd, (k as isize, 1), &dcols, (n as isize, 1), T::zero(), &mut dx[off..], (hw as isize, 1));
                }
                if let Some(dw) = dw.as_mut() {
                    // dw[cin, k] += x[cin, n] @ dcols^T[n, k]
                    T::gemm(cin, n, k, T::one(), &x[off..], (hw as isize, 1), &dcols, (1, n as isize), T::one(), dw, (k as isize, 1));
                }
            }
            (dx, dw)
        });

        let mut dx_all = need_x.then(|| Vec::with_capacity(batch * cin * hw));
        let mut dw_parts = Vec::new();
        for (dx, dw) in per_item {
            if let (Some(all), Some(dx)) = (dx_all.as_mut(), dx) {
                all.extend_from_slice(&dx);
            }
            if let Some(dw) = dw {
                dw_parts.push(dw);
            }
        }
        let dw = need_w.then(|| sum_in_order(dw_parts, cin * k));
        let mut out = vec![dx_all, dw];
        if let Some(b) = &self.b {
            out.push(b.requires_grad().then(|| bias_grad(grad, batch, cout, g.h * g.w)));
        }
        out
    }
}

fn check_bias<T: Float>(op: &'static str, bias: Option<&Tensor<T>>, cout: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(Error::mismatch(op, b.shape(), &[cout]));
        }
    }
    Ok(())
}

impl<T: Float> Tensor<T> {
    /// 2-D cross-correlation with zero padding. `weight` is
    /// `[C_out, C_in, kH, kW]`, `bias` is `[C_out]`.
    pub fn conv2d(&self, weight: &Tensor<T>, bias: Option<&Tensor<T>>, spec: Conv2dSpec) -> Result<Tensor<T>> {
        let (batch, c, h, w) = self.dims4()?;
        let (cout, wc, kh, kw) = weight.dims4()?;
        if wc != c {
            return Err(Error::mismatch("conv2d", self.shape(), weight.shape()));
        }
        check_bias("conv2d", bias, cout)?;
        let (oh, ow) = match (spec.output_size(h, kh), spec.output_size(w, kw)) {
            (Some(oh), Some(ow)) if spec.dilation > 0 => (oh, ow),
            _ => {
                return Err(Error::invalid(
                    "conv2d",
                    format!("{h}x{w} input too small for {kh}x{kw} kernel with {spec:?}"),
                ))
            }
        };
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
        let in_len = c * h * w;
        let out_len = cout * oh * ow;
        let (xd, wd) = (self.data(), weight.data());
        let bd = bias.map(|b| b.data());
        let items = for_batch(batch, |bi| {
            let mut out = vec![T::zero(); out_len];
            conv_forward_item(&geom, cout, &xd[bi * in_len..(bi + 1) * in_len], wd, bd, &mut out);
            out
        });
        let data = items.concat();
        Ok(Tensor::from_op(
            data,
            vec![batch, cout, oh, ow],
            Conv2dBackward {
                x: self.clone(),
                w: weight.clone(),
                b: bias.cloned(),
                geom,
            },
        ))
    }

    /// Transposed convolution. `weight` is `[C_in, C_out, kH, kW]`.
    pub fn conv_transpose2d(
        &self,
        weight: &Tensor<T>,
        bias: Option<&Tensor<T>>,
        spec: ConvTranspose2dSpec,
    ) -> Result<Tensor<T>> {
        let (batch, cin, h, w) = self.dims4()?;
        let (wcin, cout, kh, kw) = weight.dims4()?;
        if wcin != cin {
            return Err(Error::mismatch("conv_transpose2d", self.shape(), weight.shape()));
        }
        check_bias("conv_transpose2d", bias, cout)?;
        let (oh, ow) = match (spec.output_size(h, kh), spec.output_size(w, kw)) {
            (Some(oh), Some(ow)) if spec.stride > 0 => (oh, ow),
            _ => {
                return Err(Error::invalid(
                    "conv_transpose2d",
                    format!("{h}x{w} input with {kh}x{kw} kernel and {spec:?}"),
                ))
            }
        };
        // The adjoint forward conv maps the (oh, ow) output back to (h, w).
        let geom = Geom {
            c: cout,
            h: oh,
            w: ow,
            kh,
            kw,
            stride: spec.stride,
            pad: spec.padding,
            dil: 1,
            oh: h,
            ow: w,
        };
        debug_assert_eq!(Conv2dSpec::strided(spec.stride, spec.padding).output_size(oh, kh), Some(h));
        let k = geom.col_rows();
        let hw = h * w;
        let out_len = cout * oh * ow;
        let (xd, wd) = (self.data(), weight.data());
        let bd = bias.map(|b| b.data());
        let items = for_batch(batch, |bi| {
            let x = &xd[bi * cin * hw..(bi + 1) * cin * hw];
            let mut out = vec![T::zero(); out_len];
            let mut cols = Vec::new();
            for rows in geom.bands() {
                let n = rows.len() * w;
                let off = rows.start * w;
                cols.resize(k * n, T::zero());
                // cols[k, n] = w^T[k, cin] @ x[cin, n]
                T::gemm(k, cin, n, T::one(), wd, (1, k as isize), &x[off..], (hw as isize, 1), T::zero(), &mut cols, (n as isize, 1));
                col2im(&geom, &cols, rows, &mut out);
            }
            if let Some(bias) = bd {
                let plane = oh * ow;
                for (co, &bv) in bias.iter().enumerate() {
                    out[co * plane..(co + 1) * plane].iter_mut().for_each(|v| *v += bv);
                }
            }
            out
        });
        Ok(Tensor::from_op(
            items.concat(),
            vec![batch, cout, oh, ow],
            ConvTranspose2dBackward {
                x: self.clone(),
                w: weight.clone(),
                b: bias.cloned(),
                geom,
            },
        ))
    }
}
