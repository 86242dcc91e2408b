use crate::tensor::{Backward, Tensor};
use crate::Float;

/// Pointwise operations. Parameters are stored as `f64` and converted on use.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UnaryOp {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
    Exp,
    Log,
    Sqr,
    Sqrt,
    Abs,
    Neg,
    Powf(f64),
    /// Gradient passes where `lo <= x <= hi`.
    Clamp(f64, f64),
    /// `0.5 x^2` for `|x| < 1`, else `|x| - 0.5`.
    SmoothL1,
    /// `scale * x + shift`
    Affine { scale: f64, shift: f64 },
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Relu => "relu",
            UnaryOp::LeakyRelu(_) => "leaky_relu",
            UnaryOp::Sigmoid => "sigmoid",
            UnaryOp::Tanh => "tanh",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqr => "sqr",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
            UnaryOp::Neg => "neg",
            UnaryOp::Powf(_) => "powf",
            UnaryOp::Clamp(..) => "clamp",
            UnaryOp::SmoothL1 => "smooth_l1",
            UnaryOp::Affine { .. } => "affine",
        }
    }

    #[inline]
    fn forward<T: Float>(self, x: T) -> T {
        match self {
            UnaryOp::Relu => x.max(T::zero()),
            UnaryOp::LeakyRelu(s) => {
                if x > T::zero() {
                    x
                } else {
                    x * T::lit(s)
                }
            }
            UnaryOp::Sigmoid => {
                // Split by sign so exp never overflows.
                if x >= T::zero() {
                    T::one() / (T::one() + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (T::one() + e)
                }
            }
            UnaryOp::Tanh => x.tanh(),
            UnaryOp::Exp => x.exp(),
            UnaryOp::Log => x.ln(),
            UnaryOp::Sqr => x * x,
            UnaryOp::Sqrt => x.sqrt(),
            UnaryOp::Abs => x.abs(),
            UnaryOp::Neg => -x,
            UnaryOp::Powf(p) => x.powf(T::lit(p)),
            UnaryOp::Clamp(lo, hi) => x.max(T::lit(lo)).min(T::lit(hi)),
            UnaryOp::SmoothL1 => {
                let a = x.abs();
                if a < T::one() {
                    T::lit(0.5) * x * x
                } else {
                    a - T::lit(0.5)
                }
            }
            UnaryOp::Affine { scale, shift } => x * T::lit(scale) + T::lit(shift),
        }
    }

    /// dy/dx given input `x` and output `y`.
    #[inline]
    fn derivative<T: Float>(self, x: T, y: T) -> T {
        let zero = T::zero();
        let one = T::one();
        match self {
            UnaryOp::Relu => {
                if x > zero {
                    one
                } else {
                    zero
                }
            }
            UnaryOp::LeakyRelu(s) => {
                if x > zero {
                    one
                } else {
                    T::lit(s)
                }
            }
            UnaryOp::Sigmoid => y * (one - y),
            UnaryOp::Tanh => one - y * y,
            UnaryOp::Exp => y,
            UnaryOp::Log => one / x,
            UnaryOp::Sqr => x + x,
            UnaryOp::Sqrt => T::lit(0.5) / y,
            UnaryOp::Abs => {
                if x > zero {
                    one
                } else if x < zero {
                    -one
                } else {
                    zero
                }
            }
            UnaryOp::Neg => -one,
            UnaryOp::Powf(p) => T::lit(p) * x.powf(T::lit(p - 1.0)),
            UnaryOp::Clamp(lo, hi) => {
                if x >= T::lit(lo) && x <= T::lit(hi) {
                    one
                } else {
                    zero
                }
            }
            UnaryOp::SmoothL1 => {
                if x.abs() < one {
                    x
                } else {
                    x.signum()
                }
            }
            UnaryOp::Affine { scale, .. } => T::lit(scale),
        }
    }
}

struct UnaryBackward<T: Float> {
    op: UnaryOp,
    input: Tensor<T>,
}

impl<T: Float> Backward<T> for UnaryBackward<T> {
    fn name(&self) -> &'static str {
        self.op.name()
    }

    fn inputs(&self) -> Vec<&Tensor<T>> {
        vec![&self.input]
    }

    fn backward(&self, out: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let g = self
            .input
            .data()
            .iter()
            .zip(out.data())
            .zip(grad)
            .map(|((&x, &y), &g)| g * self.op.derivative(x, y))
            .collect();
        vec![Some(g)]
    }
}

impl<T: Float> Tensor<T> {
    pub fn unary(&self, op: UnaryOp) -> Tensor<T> {
        let data = self.data().iter().map(|&x| op.forward(x)).collect();
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            UnaryBackward {
                op,
                input: self.clone(),
            },
        )
    }

    pub fn relu(&self) -> Tensor<T> {
        self.unary(UnaryOp::Relu)
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor<T> {
        self.unary(UnaryOp::LeakyRelu(slope))
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        self.unary(UnaryOp::Sigmoid)
    }

    pub fn tanh(&self) -> Tensor<T> {
        self.unary(UnaryOp::Tanh)
    }

    pub fn exp(&self) -> Tensor<T> {
        self.unary(UnaryOp::Exp)
    }

    pub fn ln(&self) -> Tensor<T> {
        self.unary(UnaryOp::Log)
    }

    pub fn sqr(&self) -> Tensor<T> {
        self.unary(UnaryOp::Sqr)
    }

    pub fn sqrt(&self) -> Tensor<T> {
        self.unary(UnaryOp::Sqrt)
    }

    pub fn abs(&self) -> Tensor<T> {
        self.unary(UnaryOp::Abs)
    }

    pub fn neg(&self) -> Tensor<T> {
        self.unary(UnaryOp::Neg)
    }

    pub fn powf(&self, p: f64) -> Tensor<T> {
        self.unary(UnaryOp::Powf(p))
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor<T> {
        self.unary(UnaryOp::Clamp(lo, hi))
    }

    pub fn smooth_l1_elementwise(&self) -> Tensor<T> {
        self.unary(UnaryOp::SmoothL1)
    }

    pub fn affine(&self, scale: f64, shift: f64) -> Tensor<T> {
        self.unary(UnaryOp::Affine { scale, shift })
    }

    pub fn scale(&self, s: f64) -> Tensor<T> {
        self.affine(s, 0.0)
    }

    pub fn add_scalar(&self, s: f64) -> Tensor<T> {
        self.affine(1.0, s)
    }
}
