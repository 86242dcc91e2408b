use crate::error::{Error, Result};
use crate::tensor::{Backward, Tensor};
use crate::Float;

fn pooled_dims(op: &'static str, h: usize, w: usize, k: usize, s: usize) -> Result<(usize, usize)> {
    if k == 0 || s == 0 || h < k || w < k {
        return Err(Error::invalid(op, format!("kernel {k} stride {s} on {h}x{w}")));
    }
    Ok(((h - k) / s + 1, (w - k) / s + 1))
}

struct AvgPoolBackward<T: Float> {
    input: Tensor<T>,
    k: usize,
    s: usize,
}

impl<T: Float> Backward<T> for AvgPoolBackward<T> {
    fn name(&self) -> &'static str {
        "avg_pool2d"
    }

    fn inputs(&self) -> Vec<&Tensor<T>> {
        vec![&self.input]
    }

    fn backward(&self, out: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let (b, c, h, w) = self.input.dims4().expect("rank 4");
        let (_, _, oh, ow) = out.dims4().expect("rank 4");
        let (k, s) = (self.k, self.s);
        let inv = T::one() / T::lit((k * k) as f64);
        let mut g = vec![T::zero(); self.input.numel()];
        for plane in 0..b * c {
            let gi = &mut g[plane * h * w..(plane + 1) * h * w];
            let go = &grad[plane * oh * ow..(plane + 1) * oh * ow];
            for oy in 0..oh {
                for ox in 0..ow {
                    let v = go[oy * ow + ox] * inv;
                    for ky in 0..k {
                        let row = (oy * s + ky) * w + ox * s;
                        for kx in 0..k {
                            gi[row + kx] += v;
                        }
                    }
                }
            }
        }
        vec![Some(g)]
    }
}

struct MaxPoolBackward<T: Float> {
    input: Tensor<T>,
    argmax: Vec<usize>,
}

impl<T: Float> Backward<T> for MaxPoolBackward<T> {
    fn name(&self) -> &'static str {
        "max_pool2d"
    }

    fn inputs(&self) -> Vec<&Tensor<T>> {
        vec![&self.input]
    }

    fn backward(&self, _out: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let mut g = vec![T::zero(); self.input.numel()];
        for (&src, &v) in self.argmax.iter().zip(grad) {
            g[src] += v;
        }
        vec![Some(g)]
    }
}

impl<T: Float> Tensor<T> {
    /// Average pooling without padding; trailing rows/cols that do not fill a
    /// window are dropped.
    pub fn avg_pool2d(&self, k: usize, s: usize) -> Result<Tensor<T>> {
        let (b, c, h, w) = self.dims4()?;
        let (oh, ow) = pooled_dims("avg_pool2d", h, w, k, s)?;
        let inv = T::one() / T::lit((k * k) as f64);
        let x = self.data();
        let mut data = vec![T::zero(); b * c * oh * ow];
        for plane in 0..b * c {
            let xi = &x[plane * h * w..(plane + 1) * h * w];
            let yo = &mut data[plane * oh * ow..(plane + 1) * oh * ow];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = T::zero();
                    for ky in 0..k {
                        let row = (oy * s + ky) * w + ox * s;
                        for kx in 0..k {
                            acc += xi[row + kx];
                        }
                    }
                    yo[oy * ow + ox] = acc * inv;
                }
            }
        }
        Ok(Tensor::from_op(
            data,
            vec![b, c, oh, ow],
            AvgPoolBackward {
                input: self.clone(),
                k,
                s,
            },
        ))
    }

    pub fn max_pool2d(&self, k: usize, s: usize) -> Result<Tensor<T>> {
        let (b, c, h, w) = self.dims4()?;
        let (oh, ow) = pooled_dims("max_pool2d", h, w, k, s)?;
        let x = self.data();
        let mut data = vec![T::zero(); b * c * oh * ow];
        let mut argmax = vec![0usize; b * c * oh * ow];
        for plane in 0..b * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + oy * s * w + ox * s;
                    for ky in 0..k {
                        for kx in 0..k {
                            let i = base + (oy * s + ky) * w + ox * s + kx;
                            if x[i] > x[best] {
                                best = i;
                            }
                        }
                    }
                    let o = (plane * oh + oy) * ow + ox;
                    data[o] = x[best];
                    argmax[o] = best;
                }
            }
        }
        Ok(Tensor::from_op(
            data,
            vec![b, c, oh, ow],
            MaxPoolBackward {
                input: self.clone(),
                argmax,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn avg_pool_floors_odd_sizes() {
        let x = Tensor::<f64>::from_vec((0..25).map(f64::from).collect(), &[1, 1, 5, 5]).unwrap();
        let y = x.avg_pool2d(2, 2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[3.0, 5.0, 13.0, 15.0]);
    }

    #[test]
    fn max_pool_routes_gradient_to_argmax() {
        let x = Tensor::<f64>::var(vec![1.0, 4.0, 2.0, 3.0], &[1, 1, 2, 2]).unwrap();
        let y = x.max_pool2d(2, 2).unwrap().sum_all();
        let g = y.backward().unwrap();
        assert_eq!(g.get(&x).unwrap().data(), &[0.0, 1.0, 0.0, 0.0]);
    }
}
