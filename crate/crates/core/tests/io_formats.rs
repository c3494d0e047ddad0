use lcs_core::io::{
    decode_png, encode_png, read_container, read_niqe_model, write_container, write_niqe_model,
    StoredWeights, CONTAINER_MAGIC,
};
use lcs_core::metrics::{NiqeModel, NIQE_FEATURES};
use lcs_core::model::{canonical_layers, Mode};
use lcs_core::quantize::quantize_model;
use lcs_core::reparam::reparameterize_model;
use lcs_core::{synth, LcsError, ModelConfig, ModelWeights, Tensor};

#[test]
fn fp32_round_trip_is_bitwise_for_random_models() {
    for seed in 0..4 {
        let cfg = ModelConfig::default();
        let w = StoredWeights::Fp32(ModelWeights::random(&cfg, seed));
        let bytes = write_container(&cfg, &w).unwrap();
        assert_eq!(bytes, write_container(&cfg, &w).unwrap());
        assert_eq!(read_container(&bytes).unwrap(), (cfg, w));
    }
}

#[test]
fn reparam_and_int8_round_trip() {
    let cfg = ModelConfig::default();
    let (rcfg, rw) = reparameterize_model(&ModelWeights::random(&cfg, 3), &cfg).unwrap();
    assert_eq!(rcfg.mode, Mode::Reparam);
    let q = StoredWeights::Int8(quantize_model(&rw).unwrap());
    let bytes = write_container(&rcfg, &q).unwrap();
    assert_eq!(read_container(&bytes).unwrap(), (rcfg, q));
}

#[test]
fn records_follow_canonical_order() {
    let cfg = ModelConfig::default();
    let bytes = write_container(&cfg, &StoredWeights::Fp32(ModelWeights::random(&cfg, 1))).unwrap();
    let (_, stored) = read_container(&bytes).unwrap();
    let StoredWeights::Fp32(w) = stored else {
        panic!("expected fp32")
    };
    let names: Vec<&str> = w.iter().map(|(n, _)| n).collect();
    let expected: Vec<String> = canonical_layers(&cfg).into_iter().map(|l| l.name).collect();
    assert_eq!(names, expected);
    assert_eq!(names.first(), Some(&"head"));
    assert_eq!(names.last(), Some(&"tail"));
}

#[test]
fn every_single_byte_flip_is_detected() {
    let cfg = ModelConfig {
        num_blocks: 1,
        channels: 4,
        esa_channels: 2,
        rrrb_per_block: 1,
        ..ModelConfig::default()
    };
    let bytes = write_container(&cfg, &StoredWeights::Fp32(ModelWeights::random(&cfg, 2))).unwrap();
    for i in 0..bytes.len() {
        let mut bad = bytes.clone();
        bad[i] ^= 0x10;
        let err = read_container(&bad).unwrap_err();
        if i < CONTAINER_MAGIC.len() {
            assert!(matches!(err, LcsError::Format(_)), "byte {i}: {err}");
        } else {
            assert!(matches!(err, LcsError::Corruption(_)), "byte {i}: {err}");
        }
    }
}

#[test]
fn truncated_container_is_an_error() {
    let cfg = ModelConfig::default();
    let bytes = write_container(&cfg, &StoredWeights::Fp32(ModelWeights::zeros(&cfg))).unwrap();
    for len in [0, 3, 10, 40, bytes.len() - 1] {
        assert!(read_container(&bytes[..len]).is_err(), "len {len}");
    }
}

#[test]
fn mismatched_weights_are_a_config_error() {
    let cfg = ModelConfig::default();
    let other = ModelConfig {
        channels: 16,
        ..cfg
    };
    let w = StoredWeights::Fp32(ModelWeights::random(&other, 0));
    assert!(matches!(
        write_container(&cfg, &w),
        Err(LcsError::Config(_))
    ));
}

#[test]
fn png_decode_is_idempotent() {
    let img = synth::scene(37, 53, 12);
    let once = decode_png(&encode_png(&img).unwrap()).unwrap();
    let twice = decode_png(&encode_png(&once).unwrap()).unwrap();
    assert_eq!(once, twice);
    assert!(once.max_abs_diff(&img).unwrap() <= 0.5 / 255.0 + 1e-7);
}

#[test]
fn png_encode_clamps() {
    let t = Tensor::from_vec([1, 3, 1, 2], vec![-0.5, 1.5, 0.0, 1.0, 0.5, 2.0]).unwrap();
    let back = decode_png(&encode_png(&t).unwrap()).unwrap();
    assert_eq!(back.data(), &[0.0, 1.0, 0.0, 1.0, 128.0 / 255.0, 1.0]);
}

#[test]
fn png_rejects_batches_and_garbage() {
    assert!(encode_png(&Tensor::<f32>::zeros([2, 3, 4, 4])).is_err());
    assert!(encode_png(&Tensor::<f32>::zeros([1, 1, 4, 4])).is_err());
    assert!(matches!(decode_png(b"not a png"), Err(LcsError::Format(_))));
}

fn sample_niqe_model() -> NiqeModel {
    let n = NIQE_FEATURES;
    let mean = (0..n).map(|i| i as f64 * 0.25 - 3.0).collect();
    let cov = (0..n * n)
        .map(|k| {
            let (r, c) = (k / n, k % n);
            if r == c {
                2.0 + r as f64
            } else {
                1.0 / (1.0 + (r + c) as f64)
            }
        })
        .collect();
    NiqeModel::new(mean, cov, 96, 4321).unwrap()
}

#[test]
fn niqe_model_file_round_trip_and_layout() {
    let m = sample_niqe_model();
    let bytes = write_niqe_model(&m);
    assert_eq!(bytes.len(), 4 + 4 + 4 + 8 + 8 * 36 + 8 * 666);
    assert_eq!(&bytes[..4], b"NIQM");
    assert_eq!(read_niqe_model(&bytes).unwrap(), m);
}

#[test]
fn niqe_model_file_errors() {
    let bytes = write_niqe_model(&sample_niqe_model());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(read_niqe_model(&bad), Err(LcsError::Format(_))));
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(matches!(
        read_niqe_model(&bad),
        Err(LcsError::Version { found: 9, .. })
    ));
    assert!(read_niqe_model(&bytes[..bytes.len() - 1]).is_err());
    let mut long = bytes.clone();
    long.push(0);
    assert!(read_niqe_model(&long).is_err());
}
