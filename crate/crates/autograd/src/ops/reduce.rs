use crate::error::{Error, Result};
use crate::tensor::{numel, Backward, Tensor};
use crate::Float;

struct SumAllBackward<T: Float> {
    input: Tensor<T>,
    scale: T,
}

impl<T: Float> Backward<T> for SumAllBackward<T> {
    fn name(&self) -> &'static str {
        "sum_all"
    }

    fn inputs(&self) -> Vec<&Tensor<T>> {
        vec![&self.input]
    }

    fn backward(&self, _out: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        vec![Some(vec![grad[0] * self.scale; self.input.numel()])]
    }
}

/// Splits `shape` around a set of reduced axes into (outer, reduced, inner)
/// iteration extents. Only contiguous runs of axes are supported, which is
/// all the networks here need (spatial pooling, per-channel sums).
fn contiguous_split(shape: &[usize], axes: &[usize]) -> Option<(usize, usize, usize)> {
    let mut axes = axes.to_vec();
    axes.sort_unstable();
    axes.dedup();
    let first = *axes.first()?;
    let last = *axes.last()?;
    if last >= shape.len() || last - first + 1 != axes.len() {
        return None;
    }
    let outer = numel(&shape[..first]);
    let reduced = numel(&shape[first..=last]);
    let inner = numel(&shape[last + 1..]);
    Some((outer, reduced, inner))
}

struct SumAxesBackward<T: Float> {
    input: Tensor<T>,
    split: (usize, usize, usize),
    scale: T,
}

impl<T: Float> Backward<T> for SumAxesBackward<T> {
    fn name(&self) -> &'static str {
        "sum_axes"
    }

    fn inputs(&self) -> Vec<&Tensor<T>> {
        vec![&self.input]
    }

    fn backward(&self, _out: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let (outer, reduced, inner) = self.split;
        let mut g = vec![T::zero(); self.input.numel()];
        for o in 0..outer {
            for r in 0..reduced {
                let base = (o * reduced + r) * inner;
                for i in 0..inner {
                    g[base + i] = grad[o * inner + i] * self.scale;
                }
            }
        }
        vec![Some(g)]
    }
}

impl<T: Float> Tensor<T> {
    pub fn sum_all(&self) -> Tensor<T> {
        let s: T = self.data().iter().copied().sum();
        Tensor::from_op(
            vec![s],
            vec![1],
            SumAllBackward {
                input: self.clone(),
                scale: T::one(),
            },
        )
    }

    pub fn mean_all(&self) -> Tensor<T> {
        let n = T::lit(self.numel().max(1) as f64);
        let s: T = self.data().iter().copied().sum();
        Tensor::from_op(
            vec![s / n],
            vec![1],
            SumAllBackward {
                input: self.clone(),
                scale: T::one() / n,
            },
        )
    }

    fn reduce_axes(&self, axes: &[usize], mean: bool) -> Result<Tensor<T>> {
        let (outer, reduced, inner) = contiguous_split(self.shape(), axes).ok_or_else(|| {
            Error::invalid("sum_axes", format!("axes {axes:?} must be a contiguous run within {:?}", self.shape()))
        })?;
        let scale = if mean {
            T::one() / T::lit(reduced.max(1) as f64)
        } else {
            T::one()
        };
        let x = self.data();
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for r in 0..reduced {
                let base = (o * reduced + r) * inner;
                for i in 0..inner {
                    out[o * inner + i] += x[base + i];
                }
            }
        }
        if mean {
            out.iter_mut().for_each(|v| *v *= scale);
        }
        let mut shape = self.shape().to_vec();
        for &a in axes {
            shape[a] = 1;
        }
        Ok(Tensor::from_op(
            out,
            shape,
            SumAxesBackward {
                input: self.clone(),
                split: (outer, reduced, inner),
                scale,
            },
        ))
    }

    /// Sums over a contiguous run of axes, keeping them as size-1 dims.
    pub fn sum_axes(&self, axes: &[usize]) -> Result<Tensor<T>> {
        self.reduce_axes(axes, false)
    }

    pub fn mean_axes(&self, axes: &[usize]) -> Result<Tensor<T>> {
        self.reduce_axes(axes, true)
    }

    /// `[B, C, H, W] -> [B, C, 1, 1]`
    pub fn global_avg_pool(&self) -> Result<Tensor<T>> {
        self.dims4()?;
        self.mean_axes(&[2, 3])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_axes_keeps_dims() {
        let x = Tensor::<f64>::from_vec((0..12).map(f64::from).collect(), &[1, 3, 2, 2]).unwrap();
        let m = x.global_avg_pool().unwrap();
        assert_eq!(m.shape(), &[1, 3, 1, 1]);
        assert_eq!(m.data(), &[1.5, 5.5, 9.5]);
    }

    #[test]
    fn non_contiguous_axes_rejected() {
        let x = Tensor::<f64>::zeros(&[2, 3, 4]);
        assert!(x.sum_axes(&[0, 2]).is_err());
    }
}
