//! Weight initialisation schemes.

use rand::Rng;

/// How a freshly created parameter is filled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f64),
    /// `U(-bound, bound)`
    Uniform(f64),
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, the default used by common
    /// deep-learning frameworks for convolution weights and biases.
    FanIn(usize),
}

impl Init {
    pub fn sample(self, rng: &mut impl Rng, n: usize) -> Vec<f64> {
        match self {
            Init::Zeros => vec![0.0; n],
            Init::Constant(v) => vec![v; n],
            Init::Uniform(b) => (0..n).map(|_| rng.gen_range(-b..=b)).collect(),
            Init::FanIn(fan_in) => {
                let b = 1.0 / (fan_in.max(1) as f64).sqrt();
                (0..n).map(|_| rng.gen_range(-b..=b)).collect()
            }
        }
    }
}
