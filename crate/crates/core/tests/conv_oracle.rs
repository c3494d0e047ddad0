//! conv2d against a direct-summation reference with the same reduction order.

use lcs_core::ops::{conv2d, conv2d_with_border, force_kernel_path, ConvWeights, KernelPath};
use lcs_core::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Quadruple loop over the explicitly padded input: bias first, then
/// (input channel, kernel row, kernel column) ascending.
fn oracle(input: &Tensor<f32>, w: &ConvWeights<f32>, border: Option<&[f32]>) -> Tensor<f32> {
    let [n, c, h, wd] = input.dims();
    let [c_out, c_in_g, kh, kw] = w.dims();
    let (p, s) = (w.padding() as isize, w.stride());
    let oh = (h + 2 * w.padding() - kh) / s + 1;
    let ow = (wd + 2 * w.padding() - kw) / s + 1;
    let c_out_g = c_out / w.groups();
    let mut out = Tensor::zeros([n, c_out, oh, ow]);
    for b in 0..n {
        for o in 0..c_out {
            let g = o / c_out_g;
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = w.bias()[o];
                    for i in 0..c_in_g {
                        let ch = g * c_in_g + i;
                        for dy in 0..kh {
                            for dx in 0..kw {
                                let sy = (y * s + dy) as isize - p;
                                let sx = (x * s + dx) as isize - p;
                                let v = if sy < 0 || sx < 0 || sy >= h as isize || sx >= wd as isize
                                {
                                    border.map_or(0.0, |b| b[ch])
                                } else {
                                    input.get([b, ch, sy as usize, sx as usize])
                                };
                                acc += w.at(o, i, dy, dx) * v;
                            }
                        }
                    }
                    out.set([b, o, y, x], acc);
                }
            }
        }
    }
    assert_eq!(c, w.c_in());
    out
}

fn random_tensor(rng: &mut ChaCha8Rng, dims: [usize; 4]) -> Tensor<f32> {
    Tensor::from_fn(dims, |_| rng.gen_range(-1.0..1.0))
}

fn random_conv(
    rng: &mut ChaCha8Rng,
    c_in: usize,
    c_out: usize,
    k: usize,
    stride: usize,
    padding: usize,
    groups: usize,
) -> ConvWeights<f32> {
    let dims = [c_out, c_in / groups, k, k];
    let kernel = (0..dims.iter().product::<usize>())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let bias = (0..c_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ConvWeights::new(dims, kernel, bias, stride, padding, groups).unwrap()
}

fn assert_bitwise(a: &Tensor<f32>, b: &Tensor<f32>) {
    assert_eq!(a.dims(), b.dims());
    for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
        assert_eq!(x.to_bits(), y.to_bits(), "element {i}: {x} vs {y}");
    }
}

#[test]
fn random_4_to_5_matches_oracle_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random_tensor(&mut rng, [1, 4, 8, 8]);
    let w = random_conv(&mut rng, 4, 5, 3, 1, 1, 1);
    assert_bitwise(&conv2d(&x, &w).unwrap(), &oracle(&x, &w, None));
}

#[test]
fn border_fill_matches_oracle_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_tensor(&mut rng, [2, 6, 9, 21]);
    let w = random_conv(&mut rng, 6, 7, 3, 1, 1, 1);
    let border: Vec<f32> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    assert_bitwise(
        &conv2d_with_border(&x, &w, &border).unwrap(),
        &oracle(&x, &w, Some(&border)),
    );
}

#[test]
fn dirac_kernel_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in [1usize, 3, 5] {
        let c = 5;
        let mut w = ConvWeights::<f32>::zeros(c, c, k);
        for o in 0..c {
            let idx = w.kernel_index(o, o, k / 2, k / 2);
            w.kernel_mut()[idx] = 1.0;
        }
        let x = random_tensor(&mut rng, [1, c, 7, 19]);
        assert_bitwise(&conv2d(&x, &w).unwrap(), &x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn matches_oracle_on_random_geometry(
        seed in any::<u64>(),
        groups in 1usize..4,
        cin_g in 1usize..4,
        cout_g in 1usize..6,
        k in prop::sample::select(vec![1usize, 3, 5]),
        stride in 1usize..4,
        padding in 0usize..3,
        h in 5usize..14,
        w in 5usize..70,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wts = random_conv(&mut rng, cin_g * groups, cout_g * groups, k, stride, padding, groups);
        let x = random_tensor(&mut rng, [2, cin_g * groups, h, w]);
        assert_bitwise(&conv2d(&x, &wts).unwrap(), &oracle(&x, &wts, None));
    }

    #[test]
    fn linear_without_bias(seed in any::<u64>(), alpha in -2.0f32..2.0, beta in -2.0f32..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = random_conv(&mut rng, 3, 4, 3, 1, 1, 1);
        w.bias_mut().iter_mut().for_each(|b| *b = 0.0);
        let x = Tensor::from_fn([1, 3, 9, 9], |_| rng.gen_range(-10.0..10.0));
        let y = Tensor::from_fn([1, 3, 9, 9], |_| rng.gen_range(-10.0..10.0));
        let mix = Tensor::from_vec(x.dims(), x.data().iter().zip(y.data()).map(|(a, b)| alpha * a + beta * b).collect()).unwrap();
        let lhs = conv2d(&mix, &w).unwrap();
        let (cx, cy) = (conv2d(&x, &w).unwrap(), conv2d(&y, &w).unwrap());
        let scale = cx.data().iter().chain(cy.data()).fold(1.0f32, |m, v| m.max(v.abs())) * (alpha.abs() + beta.abs()).max(1.0);
        for ((l, a), b) in lhs.data().iter().zip(cx.data()).zip(cy.data()) {
            prop_assert!((l - (alpha * a + beta * b)).abs() <= 1e-5 * scale);
        }
    }
}

#[test]
fn every_kernel_path_matches_oracle_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cases: Vec<(Tensor<f32>, ConvWeights<f32>)> = [
        (3, 5, 1, 1, 70),
        (4, 6, 3, 1, 97),
        (2, 3, 5, 2, 41),
        (6, 4, 3, 1, 9),
    ]
    .into_iter()
    .map(|(c_in, c_out, k, pad, w)| {
        let x = random_tensor(&mut rng, [1, c_in, 11, w]);
        let wt = random_conv(&mut rng, c_in, c_out, k, 1, pad, 1);
        (x, wt)
    })
    .collect();
    let expected: Vec<Tensor<f32>> = cases.iter().map(|(x, w)| oracle(x, w, None)).collect();
    // Other tests in this binary may run concurrently; every path is
    // bit-identical, so the global switch cannot change their results.
    for path in [KernelPath::Portable, KernelPath::Avx2, KernelPath::Auto] {
        force_kernel_path(path);
        for ((x, w), want) in cases.iter().zip(&expected) {
            assert_bitwise(&conv2d(x, w).unwrap(), want);
        }
    }
    force_kernel_path(KernelPath::Auto);
}
