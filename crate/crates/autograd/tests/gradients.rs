//! Analytic gradients of every differentiable op against central
//! differences, in f64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scanet_autograd::gradcheck::{central_difference, relative_error};
use scanet_autograd::{Conv2dSpec, ConvTranspose2dSpec, Tensor};

type Input = (Vec<f64>, Vec<usize>);

fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Input {
    let n = shape.iter().product();
    ((0..n).map(|_| rng.gen_range(lo..hi)).collect(), shape.to_vec())
}

/// Compares d/dx_i of `sum(f(x) * r)` for a fixed random `r`.
fn check(inputs: &[Input], tol: f64, f: impl Fn(&[Tensor<f64>]) -> Tensor<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let vars: Vec<_> = inputs.iter().map(|(d, s)| Tensor::var(d.clone(), s).unwrap()).collect();
    let out = f(&vars);
    let r: Vec<f64> = (0..out.numel()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let r = Tensor::from_vec(r, out.shape()).unwrap();
    let grads = out.mul(&r).unwrap().sum_all().backward().unwrap();

    for (i, (data, shape)) in inputs.iter().enumerate() {
        let analytic = grads.get(&vars[i]).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; data.len()]);
        let numeric = central_difference(
            |x| {
                let probe: Vec<_> = inputs
                    .iter()
                    .enumerate()
                    .map(|(j, (d, s))| {
                        let d = if j == i { x.to_vec() } else { d.clone() };
                        Tensor::from_vec(d, s).unwrap()
                    })
                    .collect();
                f(&probe).mul(&r).unwrap().sum_all().item().unwrap()
            },
            data,
            1e-6,
        );
        let err = relative_error(&analytic, &numeric);
        assert!(err < tol, "input {i} {shape:?}: relative error {err:.3e}");
    }
}

#[test]
fn elementwise_binary_with_broadcast() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random(&mut rng, &[2, 3, 4, 4], -1.0, 1.0);
    let b = random(&mut rng, &[1, 3, 1, 1], 0.5, 1.5);
    check(&[a.clone(), b.clone()], 1e-7, |v| v[0].add(&v[1]).unwrap());
    check(&[a.clone(), b.clone()], 1e-7, |v| v[0].sub(&v[1]).unwrap());
    check(&[a.clone(), b.clone()], 1e-7, |v| v[0].mul(&v[1]).unwrap());
    check(&[a, b], 1e-7, |v| v[0].div(&v[1]).unwrap());
}

#[test]
fn unary_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random(&mut rng, &[2, 2, 3, 3], -2.0, 2.0);
    let pos = random(&mut rng, &[2, 2, 3, 3], 0.2, 2.0);
    check(&[x.clone()], 1e-7, |v| v[0].relu());
    check(&[x.clone()], 1e-7, |v| v[0].leaky_relu(0.2));
    check(&[x.clone()], 1e-7, |v| v[0].sigmoid());
    check(&[x.clone()], 1e-7, |v| v[0].tanh());
    check(&[x.clone()], 1e-7, |v| v[0].exp());
    check(&[x.clone()], 1e-7, |v| v[0].sqr());
    check(&[x.clone()], 1e-7, |v| v[0].abs());
    check(&[x.clone()], 1e-7, |v| v[0].neg());
    check(&[x.clone()], 1e-7, |v| v[0].clamp(-1.0, 1.0));
    check(&[x.clone()], 1e-7, |v| v[0].smooth_l1_elementwise());
    check(&[x], 1e-7, |v| v[0].affine(0.5, 0.5));
    check(&[pos.clone()], 1e-7, |v| v[0].ln());
    check(&[pos.clone()], 1e-7, |v| v[0].sqrt());
    check(&[pos], 1e-7, |v| v[0].powf(0.3));
}

#[test]
fn reductions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random(&mut rng, &[2, 3, 4, 5], -1.0, 1.0);
    check(&[x.clone()], 1e-7, |v| v[0].mean_all());
    check(&[x.clone()], 1e-7, |v| v[0].mean_axes(&[2, 3]).unwrap());
    check(&[x.clone()], 1e-7, |v| v[0].sum_axes(&[1, 2, 3]).unwrap());
    check(&[x], 1e-7, |v| v[0].global_avg_pool().unwrap());
}

#[test]
fn shape_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random(&mut rng, &[2, 3, 5, 6], -1.0, 1.0);
    let y = random(&mut rng, &[2, 2, 5, 6], -1.0, 1.0);
    check(&[x.clone()], 1e-7, |v| v[0].reshape(&[6, 30]).unwrap());
    check(&[x.clone()], 1e-7, |v| v[0].narrow(1, 1, 2).unwrap());
    check(&[x.clone(), y], 1e-7, |v| Tensor::cat(&[v[0].clone(), v[1].clone()], 1).unwrap());
    check(&[x], 1e-7, |v| v[0].reflect_pad2d(3, 1, 2, 4).unwrap());
}

#[test]
fn pooling_and_filtering() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(&mut rng, &[1, 2, 9, 8], -1.0, 1.0);
    check(&[x.clone()], 1e-7, |v| v[0].avg_pool2d(2, 2).unwrap());
    check(&[x.clone()], 1e-7, |v| v[0].avg_pool2d(4, 4).unwrap());
    check(&[x.clone()], 1e-7, |v| v[0].max_pool2d(2, 2).unwrap());
    check(&[x], 1e-7, |v| v[0].separable_filter_valid(&[0.25, 0.5, 0.25]).unwrap());
}

#[test]
fn convolutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random(&mut rng, &[2, 3, 7, 6], -1.0, 1.0);
    let w = random(&mut rng, &[4, 3, 3, 3], -0.5, 0.5);
    let w1 = random(&mut rng, &[4, 3, 1, 1], -0.5, 0.5);
    let b = random(&mut rng, &[4], -0.5, 0.5);
    for spec in [Conv2dSpec::same(3), Conv2dSpec::dilated(3, 2), Conv2dSpec::strided(2, 1)] {
        check(&[x.clone(), w.clone(), b.clone()], 1e-6, |v| {
            v[0].conv2d(&v[1], Some(&v[2]), spec).unwrap()
        });
    }
    check(&[x.clone(), w1, b.clone()], 1e-6, |v| {
        v[0].conv2d(&v[1], Some(&v[2]), Conv2dSpec::default()).unwrap()
    });

    let wt = random(&mut rng, &[3, 4, 3, 3], -0.5, 0.5);
    let spec = ConvTranspose2dSpec {
        stride: 2,
        padding: 1,
        output_padding: 1,
    };
    check(&[x, wt, b], 1e-6, |v| v[0].conv_transpose2d(&v[1], Some(&v[2]), spec).unwrap());
}

#[test]
fn deformable_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random(&mut rng, &[2, 2, 6, 5], -1.0, 1.0);
    let w = random(&mut rng, &[3, 2, 3, 3], -0.5, 0.5);
    let b = random(&mut rng, &[3], -0.5, 0.5);
    // Fractional offsets keep every sample away from the bilinear kinks at
    // integer coordinates; some taps land outside the image.
    let (mut off, shape) = random(&mut rng, &[2, 18, 6, 5], 0.1, 0.9);
    for (i, o) in off.iter_mut().enumerate() {
        if i % 3 == 0 {
            *o = -*o - 1.0;
        }
    }
    check(&[x, (off, shape), w, b], 1e-5, |v| {
        v[0].deform_conv2d(&v[1], &v[2], Some(&v[3]), Conv2dSpec::same(3)).unwrap()
    });
}
