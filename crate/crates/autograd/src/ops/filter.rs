use crate::error::{Error, Result};
use crate::tensor::{Backward, Tensor};
use crate::Float;

/// Which spatial axis a 1-D filter runs along.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    Rows,
    Cols,
}

struct Filter1dBackward<T: Float> {
    input: Tensor<T>,
    kernel: Vec<T>,
    axis: Axis,
}

impl<T: Float> Backward<T> for Filter1dBackward<T> {
    fn name(&self) -> &'static str {
        "filter1d_valid"
    }

    fn inputs(&self) -> Vec<&Tensor<T>> {
        vec![&self.input]
    }

    fn backward(&self, out: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let (b, c, h, w) = self.input.dims4().expect("rank 4");
        let (_, _, oh, ow) = out.dims4().expect("rank 4");
        let k = &self.kernel;
        let mut g = vec![T::zero(); self.input.numel()];
        for plane in 0..b * c {
            let gi = &mut g[plane * h * w..(plane + 1) * h * w];
            let go = &grad[plane * oh * ow..(plane + 1) * oh * ow];
            for y in 0..oh {
                for x in 0..ow {
                    let v = go[y * ow + x];
                    match self.axis {
                        Axis::Rows => {
                            for (t, &kv) in k.iter().enumerate() {
                                gi[(y + t) * w + x] += kv * v;
                            }
                        }
                        Axis::Cols => {
                            let row = y * w + x;
                            for (t, &kv) in k.iter().enumerate() {
                                gi[row + t] += kv * v;
                            }
                        }
                    }
                }
            }
        }
        vec![Some(g)]
    }
}

fn filter1d<T: Float>(x: &Tensor<T>, kernel: &[T], axis: Axis) -> Result<Tensor<T>> {
    let (b, c, h, w) = x.dims4()?;
    let k = kernel.len();
    let extent = match axis {
        Axis::Rows => h,
        Axis::Cols => w,
    };
    if k == 0 || extent < k {
        return Err(Error::invalid(
            "filter1d_valid",
            format!("kernel of {k} taps on extent {extent}"),
        ));
    }
    let (oh, ow) = match axis {
        Axis::Rows => (h - k + 1, w),
        Axis::Cols => (h, w - k + 1),
    };
    let xd = x.data();
    let mut data = vec![T::zero(); b * c * oh * ow];
    for plane in 0..b * c {
        let xi = &xd[plane * h * w..(plane + 1) * h * w];
        let yo = &mut data[plane * oh * ow..(plane + 1) * oh * ow];
        for y in 0..oh {
            for xx in 0..ow {
                let mut acc = T::zero();
                match axis {
                    Axis::Rows => {
                        for (t, &kv) in kernel.iter().enumerate() {
                            acc += kv * xi[(y + t) * w + xx];
                        }
                    }
                    Axis::Cols => {
                        let row = y * w + xx;
                        for (t, &kv) in kernel.iter().enumerate() {
                            acc += kv * xi[row + t];
                        }
                    }
                }
                yo[y * ow + xx] = acc;
            }
        }
    }
    Ok(Tensor::from_op(
        data,
        vec![b, c, oh, ow],
        Filter1dBackward {
            input: x.clone(),
            kernel: kernel.to_vec(),
            axis,
        },
    ))
}

impl<T: Float> Tensor<T> {
    /// Depthwise separable filtering with a fixed 1-D kernel applied along
    /// rows then columns, "valid" mode (no padding).
    pub fn separable_filter_valid(&self, kernel: &[T]) -> Result<Tensor<T>> {
        filter1d(&filter1d(self, kernel, Axis::Rows)?, kernel, Axis::Cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_filter_valid() {
        let x = Tensor::<f64>::from_vec((0..16).map(f64::from).collect(), &[1, 1, 4, 4]).unwrap();
        let k = [1.0 / 3.0; 3];
        let y = x.separable_filter_valid(&k).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        // 3x3 window means around (1,1), (1,2), (2,1), (2,2)
        let expect = [5.0, 6.0, 9.0, 10.0];
        for (a, b) in y.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
