use crate::error::{Error, Result};
use crate::tensor::{numel, Backward, Tensor};
use crate::Float;

struct ReshapeBackward<T: Float> {
    input: Tensor<T>,
}

impl<T: Float> Backward<T> for ReshapeBackward<T> {
    fn name(&self) -> &'static str {
        "reshape"
    }

    fn inputs(&self) -> Vec<&Tensor<T>> {
        vec![&self.input]
    }

    fn backward(&self, _out: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        vec![Some(grad.to_vec())]
    }
}

struct NarrowBackward<T: Float> {
    input: Tensor<T>,
    dim: usize,
    start: usize,
    len: usize,
}

impl<T: Float> Backward<T> for NarrowBackward<T> {
    fn name(&self) -> &'static str {
        "narrow"
    }

    fn inputs(&self) -> Vec<&Tensor<T>> {
        vec![&self.input]
    }

    fn backward(&self, _out: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let shape = self.input.shape();
        let outer = numel(&shape[..self.dim]);
        let inner = numel(&shape[self.dim + 1..]);
        let full = shape[self.dim];
        let mut g = vec![T::zero(); self.input.numel()];
        for o in 0..outer {
            let src = o * self.len * inner;
            let dst = (o * full + self.start) * inner;
            g[dst..dst + self.len * inner].copy_from_slice(&grad[src..src + self.len * inner]);
        }
        vec![Some(g)]
    }
}

struct CatBackward<T: Float> {
    inputs: Vec<Tensor<T>>,
    dim: usize,
}

impl<T: Float> Backward<T> for CatBackward<T> {
    fn name(&self) -> &'static str {
        "cat"
    }

    fn inputs(&self) -> Vec<&Tensor<T>> {
        self.inputs.iter().collect()
    }

    fn backward(&self, out: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let shape = out.shape();
        let outer = numel(&shape[..self.dim]);
        let inner = numel(&shape[self.dim + 1..]);
        let total = shape[self.dim];
        let mut offset = 0;
        let mut grads = Vec::with_capacity(self.inputs.len());
        for t in &self.inputs {
            let d = t.shape()[self.dim];
            if t.requires_grad() {
                let mut g = Vec::with_capacity(t.numel());
                for o in 0..outer {
                    let src = (o * total + offset) * inner;
                    g.extend_from_slice(&grad[src..src + d * inner]);
                }
                grads.push(Some(g));
            } else {
                grads.push(None);
            }
            offset += d;
        }
        grads
    }
}

/// Mirror index without repeating the edge sample (`ReflectionPad2d`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

struct ReflectPadBackward<T: Float> {
    input: Tensor<T>,
    pads: [usize; 4],
}

impl<T: Float> Backward<T> for ReflectPadBackward<T> {
    fn name(&self) -> &'static str {
        "reflect_pad2d"
    }

    fn inputs(&self) -> Vec<&Tensor<T>> {
        vec![&self.input]
    }

    fn backward(&self, out: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let (b, c, h, w) = self.input.dims4().expect("rank 4");
        let (_, _, oh, ow) = out.dims4().expect("rank 4");
        let [top, _, left, _] = self.pads;
        let mut g = vec![T::zero(); self.input.numel()];
        for plane in 0..b * c {
            let src = &grad[plane * oh * ow..(plane + 1) * oh * ow];
            let dst = &mut g[plane * h * w..(plane + 1) * h * w];
            for y in 0..oh {
                let sy = reflect(y as isize - top as isize, h);
                for x in 0..ow {
                    let sx = reflect(x as isize - left as isize, w);
                    dst[sy * w + sx] += src[y * ow + x];
                }
            }
        }
        vec![Some(g)]
    }
}

impl<T: Float> Tensor<T> {
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<T>> {
        if numel(shape) != self.numel() {
            return Err(Error::mismatch("reshape", self.shape(), shape));
        }
        Ok(self.share_with_op(shape.to_vec(), ReshapeBackward { input: self.clone() }))
    }

    /// Slice `len` entries of axis `dim` starting at `start`.
    pub fn narrow(&self, dim: usize, start: usize, len: usize) -> Result<Tensor<T>> {
        let shape = self.shape();
        if dim >= shape.len() || start + len > shape[dim] {
            return Err(Error::invalid(
                "narrow",
                format!("range {start}..{} of dim {dim} in {shape:?}", start + len),
            ));
        }
        let outer = numel(&shape[..dim]);
        let inner = numel(&shape[dim + 1..]);
        let full = shape[dim];
        let x = self.data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let src = (o * full + start) * inner;
            data.extend_from_slice(&x[src..src + len * inner]);
        }
        let mut out_shape = shape.to_vec();
        out_shape[dim] = len;
        Ok(Tensor::from_op(
            data,
            out_shape,
            NarrowBackward {
                input: self.clone(),
                dim,
                start,
                len,
            },
        ))
    }

    /// Concatenate along `dim`; all other dims must agree.
    pub fn cat(tensors: &[Tensor<T>], dim: usize) -> Result<Tensor<T>> {
        let first = tensors.first().ok_or_else(|| Error::invalid("cat", "no tensors"))?;
        let rank = first.rank();
        if dim >= rank {
            return Err(Error::invalid("cat", format!("dim {dim} out of range for rank {rank}")));
        }
        for t in &tensors[1..] {
            let ok = t.rank() == rank && (0..rank).all(|d| d == dim || t.shape()[d] == first.shape()[d]);
            if !ok {
                return Err(Error::mismatch("cat", first.shape(), t.shape()));
            }
        }
        let mut out_shape = first.shape().to_vec();
        out_shape[dim] = tensors.iter().map(|t| t.shape()[dim]).sum();
        let outer = numel(&out_shape[..dim]);
        let inner = numel(&out_shape[dim + 1..]);
        let mut data = Vec::with_capacity(numel(&out_shape));
        for o in 0..outer {
            for t in tensors {
                let chunk = t.shape()[dim] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        Ok(Tensor::from_op(
            data,
            out_shape,
            CatBackward {
                inputs: tensors.to_vec(),
                dim,
            },
        ))
    }

    /// Reflection padding of the two spatial axes: `(top, bottom, left, right)`.
    pub fn reflect_pad2d(&self, top: usize, bottom: usize, left: usize, right: usize) -> Result<Tensor<T>> {
        let (b, c, h, w) = self.dims4()?;
        if top >= h || bottom >= h || left >= w || right >= w {
            return Err(Error::invalid(
                "reflect_pad2d",
                format!("padding ({top},{bottom},{left},{right}) too large for {h}x{w}"),
            ));
        }
        let (oh, ow) = (h + top + bottom, w + left + right);
        let x = self.data();
        let mut data = vec![T::zero(); b * c * oh * ow];
        for plane in 0..b * c {
            let src = &x[plane * h * w..(plane + 1) * h * w];
            let dst = &mut data[plane * oh * ow..(plane + 1) * oh * ow];
            for y in 0..oh {
                let sy = reflect(y as isize - top as isize, h);
                for xx in 0..ow {
                    let sx = reflect(xx as isize - left as isize, w);
                    dst[y * ow + xx] = src[sy * w + sx];
                }
            }
        }
        Ok(Tensor::from_op(
            data,
            vec![b, c, oh, ow],
            ReflectPadBackward {
                input: self.clone(),
                pads: [top, bottom, left, right],
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_index_matches_torch_convention() {
        // [a b c d] padded by 2 -> [c b | a b c d | c b]
        let idx: Vec<usize> = (-2..6).map(|i| reflect(i, 4)).collect();
        assert_eq!(idx, vec![2, 1, 0, 1, 2, 3, 2, 1]);
    }

    #[test]
    fn narrow_then_cat_roundtrip() {
        let x = Tensor::<f32>::from_vec((0..24).map(|v| v as f32).collect(), &[1, 2, 3, 4]).unwrap();
        let a = x.narrow(3, 0, 1).unwrap();
        let b = x.narrow(3, 1, 3).unwrap();
        let y = Tensor::cat(&[a, b], 3).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn reflect_pad_shape() {
        let x = Tensor::<f32>::zeros(&[1, 1, 5, 6]);
        let y = x.reflect_pad2d(3, 3, 3, 3).unwrap();
        assert_eq!(y.shape(), &[1, 1, 11, 12]);
        assert!(x.reflect_pad2d(5, 0, 0, 0).is_err());
    }
}
