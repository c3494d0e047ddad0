use lcs_core::metrics::{
    aggregate_ci, fit_aggd, fit_niqe_model, niqe, niqe_distance, patch_features, psnr, ssim,
    MetricReport, NIQE_FEATURES,
};
use lcs_core::{synth, LcsError, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_image(seed: u64, h: usize, w: usize) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn([1, 3, h, w], |_| rng.gen_range(0.0..1.0))
}

/// Grey binary image: every channel carries the same 0/1 pattern.
fn binary_image(seed: u64, size: usize) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<f64> = (0..size * size)
        .map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
        .collect();
    Tensor::from_fn([1, 3, size, size], |[_, _, y, x]| bits[y * size + x])
}

#[test]
fn psnr_matches_direct_mse() {
    let a = random_image(1, 19, 23);
    let b = random_image(2, 19, 23);
    let mut sse = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        sse += (x - y) * (x - y);
    }
    let expected = 10.0 * (1.0 / (sse / a.data().len() as f64)).log10();
    assert!((psnr(&a, &b, 1.0).unwrap() - expected).abs() < 1e-9);
    let expected_255 = 10.0 * (255.0f64 * 255.0 / (sse / a.data().len() as f64)).log10();
    assert!((psnr(&a, &b, 255.0).unwrap() - expected_255).abs() < 1e-9);
}

#[test]
fn psnr_decreases_with_noise_amplitude() {
    let clean = synth::scene(32, 32, 3);
    let mut last = f64::INFINITY;
    for (i, amp) in [0.01f32, 0.02, 0.05, 0.1, 0.2].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(40 + i as u64);
        let noisy = clean.map(|v| v + amp * if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        let db = psnr(&clean, &noisy, 1.0).unwrap();
        assert!(db < last, "{amp}: {db} !< {last}");
        last = db;
    }
}

#[test]
fn ssim_of_binary_image_against_its_complement() {
    let a = binary_image(7, 32);
    let b = a.map(|v| 1.0 - v);
    let s = ssim(&a, &b).unwrap();
    assert!(s < 0.1);
    // Frozen regression value for this seed.
    assert!((s - -0.924_444_399_727_848_8).abs() < 1e-12, "{s:.17e}");
}

#[test]
fn ssim_is_one_only_for_equal_luminance() {
    let a = random_image(5, 24, 24);
    assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    let mut b = a.clone();
    let v = b.get([0, 1, 12, 12]);
    b.set([0, 1, 12, 12], v * 0.5);
    assert!(ssim(&a, &b).unwrap() < 1.0);
    // A single-channel image is its own luminance plane.
    let g = Tensor::from_fn([1, 1, 16, 16], |[_, _, y, x]| {
        ((y * 3 + x) % 7) as f64 / 7.0
    });
    assert_eq!(ssim(&g, &g).unwrap(), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(32) })]

    #[test]
    fn psnr_and_ssim_are_symmetric(sa in any::<u64>(), sb in any::<u64>(), h in 11usize..30, w in 11usize..30) {
        let a = random_image(sa, h, w);
        let b = random_image(sb, h, w);
        prop_assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
        let s = ssim(&a, &b).unwrap();
        prop_assert_eq!(s, ssim(&b, &a).unwrap());
        prop_assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn aggregate_ci_is_permutation_invariant_and_ordered(
        mut scores in prop::collection::vec(-1e3f64..1e3, 1..60),
        level in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let base = aggregate_ci(&scores, level).unwrap();
        prop_assert!(base.lo <= base.mean && base.mean <= base.hi);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..scores.len()).rev() {
            scores.swap(i, rng.gen_range(0..=i));
        }
        prop_assert_eq!(aggregate_ci(&scores, level).unwrap(), base);
    }
}

#[test]
fn metric_report_carries_the_aggregate() {
    let per_image: Vec<(String, f64)> = (1..=100)
        .map(|i| (format!("img{i:03}"), f64::from(i)))
        .collect();
    let r = MetricReport::new("psnr", per_image, 0.68).unwrap();
    assert_eq!(r.mean, 50.5);
    assert!((r.lo - 16.84).abs() < 1e-9 && (r.hi - 84.16).abs() < 1e-9);
    assert_eq!(r.per_image.len(), 100);
    assert!(MetricReport::new("psnr", vec![], 0.68).is_err());
}

#[test]
fn aggd_fits_standard_normal() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let s: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
    let fit = fit_aggd(&s).unwrap();
    assert!((fit.alpha - 2.0).abs() <= 0.1, "{fit:?}");
    assert!((fit.sigma_l / fit.sigma_r - 1.0).abs() <= 0.05, "{fit:?}");
    assert!((fit.sigma_l - 1.0).abs() < 0.05);
}

#[test]
fn aggd_fits_laplacian() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let s: Vec<f64> = (0..100_000)
        .map(|_| {
            let u: f64 = rng.gen_range(-0.5..0.5);
            -u.signum() * (1.0 - 2.0 * u.abs()).ln()
        })
        .collect();
    let fit = fit_aggd(&s).unwrap();
    assert!((fit.alpha - 1.0).abs() <= 0.1, "{fit:?}");
}

#[test]
fn aggd_mirrored_samples_are_exactly_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let half: Vec<f64> = (0..500).map(|_| rng.gen_range(-3.0..5.0)).collect();
    let mut s = half.clone();
    s.extend(half.iter().map(|v| -v));
    let fit = fit_aggd(&s).unwrap();
    assert_eq!(fit.sigma_l, fit.sigma_r);
}

#[test]
fn aggd_skewed_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let s: Vec<f64> = (0..50_000)
        .map(|_| {
            let v: f64 = normal.sample(&mut rng);
            if v < 0.0 {
                v * 0.5
            } else {
                v * 2.0
            }
        })
        .collect();
    let fit = fit_aggd(&s).unwrap();
    assert!((fit.sigma_r / fit.sigma_l - 4.0).abs() < 0.2, "{fit:?}");
    assert!(fit.mean() > 0.0);
}

fn corpus(seed: u64, n: usize, size: usize) -> Vec<Tensor<f32>> {
    (0..n as u64)
        .map(|i| synth::scene(size, size, seed + i))
        .collect()
}

#[test]
fn niqe_model_shape_determinism_and_self_distance() {
    let images = corpus(500, 10, 192);
    let m = fit_niqe_model(&images, 96).unwrap();
    assert_eq!(m.mean.len(), NIQE_FEATURES);
    assert_eq!(m.covariance.len(), NIQE_FEATURES * NIQE_FEATURES);
    for r in 0..NIQE_FEATURES {
        for c in 0..NIQE_FEATURES {
            assert_eq!(
                m.covariance[r * NIQE_FEATURES + c],
                m.covariance[c * NIQE_FEATURES + r]
            );
        }
    }
    assert_eq!(m, fit_niqe_model(&images, 96).unwrap());
    assert_eq!(niqe_distance(&m.mean, &m.covariance, &m).unwrap(), 0.0);
    assert!(m.fitted_on >= 10);
}

#[test]
fn niqe_model_on_one_repeated_image_is_usable() {
    let images = vec![synth::scene(192, 192, 600); 10];
    let m = fit_niqe_model(&images, 96).unwrap();
    let score = niqe(&synth::scene(192, 192, 601), &m).unwrap();
    assert!(score.is_finite() && score >= 0.0);
    let same = niqe(&images[0], &m).unwrap();
    assert!(same.is_finite() && same >= 0.0);
}

#[test]
fn niqe_fit_preconditions() {
    assert!(matches!(
        fit_niqe_model::<f32>(&[], 96),
        Err(LcsError::Data(_))
    ));
    assert!(matches!(
        fit_niqe_model(&corpus(1, 9, 192), 96),
        Err(LcsError::Data(_))
    ));
    let mut small = corpus(1, 10, 192);
    small[4] = synth::scene(150, 192, 9);
    assert!(matches!(fit_niqe_model(&small, 96), Err(LcsError::Data(_))));
}

#[test]
fn niqe_patch_selection_keeps_three_quarters() {
    let img = synth::scene(384, 288, 700);
    // 4 x 3 grid of 96px blocks; the sharpest ceil(0.75 * 12) = 9 survive.
    assert_eq!(patch_features(&img, 96).unwrap().len(), 9);
}

#[test]
fn niqe_is_non_negative_and_orders_noise() {
    let m = fit_niqe_model(&corpus(800, 10, 288), 96).unwrap();
    for i in 0..3 {
        let clean = synth::scene(288, 288, 900 + i);
        let noisy = synth::add_gaussian_noise(&clean, 0.1, 950 + i);
        let (a, b) = (niqe(&clean, &m).unwrap(), niqe(&noisy, &m).unwrap());
        assert!(a >= 0.0 && b >= 0.0);
        assert!(a < b, "clean {a} vs noisy {b}");
    }
}

#[test]
fn niqe_rejects_flat_images() {
    let m = fit_niqe_model(&corpus(800, 10, 192), 96).unwrap();
    let flat = Tensor::full([1, 3, 192, 192], 0.5f32);
    assert!(matches!(niqe(&flat, &m), Err(LcsError::Data(_))));
}
