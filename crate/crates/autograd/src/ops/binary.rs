use crate::error::{Error, Result};
use crate::tensor::{numel, Backward, Tensor};
use crate::Float;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryKind {
    fn name(self) -> &'static str {
        match self {
            BinaryKind::Add => "add",
            BinaryKind::Sub => "sub",
            BinaryKind::Mul => "mul",
            BinaryKind::Div => "div",
        }
    }

    #[inline]
    fn apply<T: Float>(self, a: T, b: T) -> T {
        match self {
            BinaryKind::Add => a + b,
            BinaryKind::Sub => a - b,
            BinaryKind::Mul => a * b,
            BinaryKind::Div => a / b,
        }
    }
}

/// Numpy-style right-aligned broadcast of two shapes.
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `shape` expressed in the coordinates of `out`, with zero
/// strides on broadcast dimensions.
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let offset = rank - shape.len();
    let mut strides = vec![0; rank];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        if shape[i] != 1 {
            strides[i + offset] = acc;
        }
        acc *= shape[i];
    }
    strides
}

/// Visits every output element with the matching input offsets.
fn for_each_broadcast(out: &[usize], sa: &[usize], sb: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let total = numel(out);
    if total == 0 {
        return;
    }
    let rank = out.len();
    if rank == 0 {
        f(0, 0, 0);
        return;
    }
    let inner = out[rank - 1];
    let (ia_step, ib_step) = (sa[rank - 1], sb[rank - 1]);
    let mut idx = vec![0usize; rank - 1];
    let mut o = 0;
    loop {
        let mut ia = 0;
        let mut ib = 0;
        for d in 0..rank - 1 {
            ia += idx[d] * sa[d];
            ib += idx[d] * sb[d];
        }
        for j in 0..inner {
            f(o + j, ia + j * ia_step, ib + j * ib_step);
        }
        o += inner;
        if o >= total {
            break;
        }
        let mut d = rank - 1;
        loop {
            d -= 1;
            idx[d] += 1;
            if idx[d] < out[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

struct BinaryBackward<T: Float> {
    kind: BinaryKind,
    a: Tensor<T>,
    b: Tensor<T>,
}

impl<T: Float> Backward<T> for BinaryBackward<T> {
    fn name(&self) -> &'static str {
        self.kind.name()
    }

    fn inputs(&self) -> Vec<&Tensor<T>> {
        vec![&self.a, &self.b]
    }

    fn backward(&self, out: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let (a, b) = (self.a.data(), self.b.data());
        let mut ga = self.a.requires_grad().then(|| vec![T::zero(); a.len()]);
        let mut gb = self.b.requires_grad().then(|| vec![T::zero(); b.len()]);
        let sa = broadcast_strides(self.a.shape(), out.shape());
        let sb = broadcast_strides(self.b.shape(), out.shape());
        let kind = self.kind;
        for_each_broadcast(out.shape(), &sa, &sb, |o, ia, ib| {
            let g = grad[o];
            let (da, db) = match kind {
                BinaryKind::Add => (g, g),
                BinaryKind::Sub => (g, -g),
                BinaryKind::Mul => (g * b[ib], g * a[ia]),
                BinaryKind::Div => (g / b[ib], -g * a[ia] / (b[ib] * b[ib])),
            };
            if let Some(ga) = ga.as_mut() {
                ga[ia] += da;
            }
            if let Some(gb) = gb.as_mut() {
                gb[ib] += db;
            }
        });
        vec![ga, gb]
    }
}

fn binary<T: Float>(kind: BinaryKind, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let out_shape = broadcast_shape(a.shape(), b.shape())
        .ok_or_else(|| Error::mismatch(kind.name(), a.shape(), b.shape()))?;
    let (ad, bd) = (a.data(), b.data());
    let data = if a.shape() == b.shape() {
        ad.iter().zip(bd).map(|(&x, &y)| kind.apply(x, y)).collect()
    } else {
        let mut data = vec![T::zero(); numel(&out_shape)];
        let sa = broadcast_strides(a.shape(), &out_shape);
        let sb = broadcast_strides(b.shape(), &out_shape);
        for_each_broadcast(&out_shape, &sa, &sb, |o, ia, ib| {
            data[o] = kind.apply(ad[ia], bd[ib]);
        });
        data
    };
    Ok(Tensor::from_op(
        data,
        out_shape,
        BinaryBackward {
            kind,
            a: a.clone(),
            b: b.clone(),
        },
    ))
}

impl<T: Float> Tensor<T> {
    pub fn add(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        binary(BinaryKind::Add, self, rhs)
    }

    pub fn sub(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        binary(BinaryKind::Sub, self, rhs)
    }

    pub fn mul(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        binary(BinaryKind::Mul, self, rhs)
    }

    pub fn div(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        binary(BinaryKind::Div, self, rhs)
    }
}
