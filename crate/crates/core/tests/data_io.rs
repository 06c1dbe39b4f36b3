use std::fs;
use std::io::Write;

use flate2::write::GzEncoder;
use flate2::Compression;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use spyking_core::data::{
    encode_idx_images, encode_idx_labels, fixture_weights, load_split, parse_idx_images, parse_idx_labels, read_idx,
    read_weights, synthetic_dataset, write_weights, DataError, Split, WeightContainer,
};
use spyking_core::nn::{build_architecture, Network, NnError, ARCHITECTURES};

/// Two 2×3 images, written out byte by byte.
const TWO_IMAGES: [u8; 28] = [
    0x00, 0x00, 0x08, 0x03, // magic
    0x00, 0x00, 0x00, 0x02, // count
    0x00, 0x00, 0x00, 0x02, // rows
    0x00, 0x00, 0x00, 0x03, // cols
    0, 1, 2, 3, 4, 5, //
    255, 128, 0, 7, 9, 200,
];
const TWO_LABELS: [u8; 10] = [0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 9, 4];

#[test]
fn hand_authored_idx_parses() {
    let (rows, cols, images) = parse_idx_images(&TWO_IMAGES).unwrap();
    assert_eq!((rows, cols), (2, 3));
    assert_eq!(images, vec![vec![0, 1, 2, 3, 4, 5], vec![255, 128, 0, 7, 9, 200]]);
    assert_eq!(parse_idx_labels(&TWO_LABELS).unwrap(), vec![9, 4]);
    assert_eq!(encode_idx_images(2, 3, &images), TWO_IMAGES.to_vec());
    assert_eq!(encode_idx_labels(&[9, 4]), TWO_LABELS.to_vec());
}

#[test]
fn truncated_payload_is_rejected() {
    for cut in [3, 15, 16, 27] {
        let err = parse_idx_images(&TWO_IMAGES[..cut]).unwrap_err();
        assert!(matches!(err, DataError::Truncated { .. }), "cut {cut}: {err}");
    }
    assert!(matches!(
        parse_idx_labels(&TWO_LABELS[..9]),
        Err(DataError::Truncated {
            needed: 10,
            available: 9
        })
    ));
}

#[test]
fn trailing_bytes_are_rejected() {
    let mut long = TWO_IMAGES.to_vec();
    long.push(0);
    assert!(matches!(
        parse_idx_images(&long),
        Err(DataError::TrailingData { extra: 1 })
    ));
}

#[test]
fn bad_magic_is_rejected() {
    let mut bad = TWO_IMAGES;
    bad[3] = 0x01;
    assert!(matches!(parse_idx_images(&bad), Err(DataError::BadMagic { .. })));
    assert!(matches!(parse_idx_labels(&TWO_IMAGES), Err(DataError::BadMagic { .. })));
}

#[test]
fn invalid_label_is_rejected() {
    let mut bad = TWO_LABELS;
    bad[9] = 10;
    assert!(matches!(
        parse_idx_labels(&bad),
        Err(DataError::InvalidLabel { index: 1, value: 10 })
    ));
}

#[test]
fn count_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("i");
    let labels = dir.path().join("l");
    fs::write(&images, TWO_IMAGES).unwrap();
    fs::write(&labels, encode_idx_labels(&[1, 2, 3])).unwrap();
    assert!(matches!(
        read_idx(&images, &labels),
        Err(DataError::CountMismatch { images: 2, labels: 3 })
    ));
}

#[test]
fn missing_file_reports_path() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_split(dir.path(), Split::Test).unwrap_err();
    match err {
        DataError::Io { path, .. } => assert!(path.ends_with("t10k-images-idx3-ubyte")),
        other => panic!("unexpected {other}"),
    }
}

fn gzip(bytes: &[u8]) -> Vec<u8> {
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(bytes).unwrap();
    enc.finish().unwrap()
}

#[test]
fn gzip_and_plain_splits_agree() {
    let set = synthetic_dataset(12, 5);
    let images = encode_idx_images(set.rows, set.cols, &set.images);
    let labels = encode_idx_labels(&set.labels);

    let plain = tempfile::tempdir().unwrap();
    fs::write(plain.path().join("train-images-idx3-ubyte"), &images).unwrap();
    fs::write(plain.path().join("train-labels-idx1-ubyte"), &labels).unwrap();
    let gz = tempfile::tempdir().unwrap();
    fs::write(gz.path().join("t10k-images-idx3-ubyte.gz"), gzip(&images)).unwrap();
    fs::write(gz.path().join("t10k-labels-idx1-ubyte.gz"), gzip(&labels)).unwrap();

    let a = load_split(plain.path(), Split::Train).unwrap();
    let b = load_split(gz.path(), Split::Test).unwrap();
    assert_eq!(a, set);
    assert_eq!(b, set);
    assert_eq!(a.image_f64(0)[0], set.images[0][0] as f64 / 255.0);
}

#[test]
fn fuzzed_headers_never_panic() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..2000 {
        let mut bytes = TWO_IMAGES.to_vec();
        let len = rng.random_range(0..bytes.len() + 8);
        bytes.resize(len, 0);
        for _ in 0..rng.random_range(1..4) {
            if !bytes.is_empty() {
                let i = rng.random_range(0..bytes.len().min(16));
                bytes[i] = rng.random();
            }
        }
        if let Ok((rows, cols, images)) = parse_idx_images(&bytes) {
            assert!(images.iter().all(|im| im.len() == rows * cols));
        }
        let _ = parse_idx_labels(&bytes);
    }
    // Declared sizes whose product overflows usize.
    let huge = [
        0, 0, 8, 3, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff,
    ];
    assert!(parse_idx_images(&huge).is_err());
}

fn random_container(rng: &mut ChaCha20Rng) -> WeightContainer {
    let mut c = WeightContainer::new();
    for i in 0..rng.random_range(0..6) {
        let rank = rng.random_range(0..4);
        let dims: Vec<usize> = (0..rank).map(|_| rng.random_range(0..5)).collect();
        let len = dims.iter().product();
        let values = (0..len).map(|_| rng.random_range(-1e3f32..1e3)).collect();
        let name = format!("layer{i}.{}", if rng.random_bool(0.5) { "weight" } else { "bias" });
        c.push(name, dims, values).unwrap();
    }
    c
}

#[test]
fn container_round_trips() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let dir = tempfile::tempdir().unwrap();
    for i in 0..100 {
        let c = random_container(&mut rng);
        let bytes = c.to_bytes();
        assert_eq!(WeightContainer::from_bytes(&bytes).unwrap(), c);
        if i % 10 == 0 {
            let path = dir.path().join(format!("w{i}.spykw"));
            write_weights(&path, &c).unwrap();
            assert_eq!(read_weights(&path).unwrap(), c);
        }
    }
}

#[test]
fn any_flipped_bit_is_detected() {
    let c = fixture_weights("micronet", 3).unwrap();
    let bytes = c.to_bytes();
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    for _ in 0..200 {
        let mut bad = bytes.clone();
        let i = rng.random_range(0..bad.len());
        bad[i] ^= 1 << rng.random_range(0..8);
        assert!(WeightContainer::from_bytes(&bad).is_err());
    }
    assert!(matches!(
        WeightContainer::from_bytes(&bytes[..bytes.len() - 1]),
        Err(DataError::Checksum { .. })
    ));
}

#[test]
fn duplicate_and_mismatched_tensors_are_rejected() {
    let mut c = WeightContainer::new();
    c.push("a", vec![2], vec![1.0, 2.0]).unwrap();
    assert!(matches!(
        c.push("a", vec![1], vec![0.0]),
        Err(DataError::DuplicateTensor(_))
    ));
    assert!(c.push("b", vec![3], vec![0.0]).is_err());
}

#[test]
fn binding_reports_missing_and_misshapen_tensors() {
    let full = fixture_weights("micronet", 1).unwrap();
    let mut missing = WeightContainer::new();
    for t in full.tensors().iter().filter(|t| t.name != "fc1.bias") {
        missing.push(t.name.clone(), t.dims.clone(), t.values.clone()).unwrap();
    }
    let err = Network::bind(build_architecture("micronet").unwrap(), &missing).unwrap_err();
    assert!(matches!(err, NnError::MissingTensor(ref n) if n == "fc1.bias"), "{err}");

    let mut wrong = WeightContainer::new();
    for t in full.tensors() {
        let dims = if t.name == "conv1.bias" {
            vec![2, 2]
        } else {
            t.dims.clone()
        };
        wrong.push(t.name.clone(), dims, t.values.clone()).unwrap();
    }
    let err = Network::bind(build_architecture("micronet").unwrap(), &wrong).unwrap_err();
    assert!(matches!(err, NnError::TensorDims { .. }), "{err}");
}

#[test]
fn fixture_weights_match_manifest() {
    for name in ARCHITECTURES {
        let spec = build_architecture(name).unwrap();
        let c = fixture_weights(name, 9).unwrap();
        let manifest = spec.parameter_manifest().unwrap();
        assert_eq!(c.tensors().len(), manifest.len());
        for (t, (n, dims)) in c.tensors().iter().zip(&manifest) {
            assert_eq!(&t.name, n);
            assert_eq!(&t.dims, dims);
            assert!(t.values.iter().all(|v| (-0.5..=0.5).contains(v)));
        }
        assert_eq!(fixture_weights(name, 9).unwrap(), c);
        assert_ne!(fixture_weights(name, 10).unwrap(), c);
    }
    assert!(fixture_weights("vgg16", 0).is_err());
}

proptest! {
    #[test]
    fn idx_round_trip(rows in 0usize..6, cols in 0usize..6, labels in proptest::collection::vec(0u8..10, 0..8), seed: u64) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let images: Vec<Vec<u8>> = labels.iter().map(|_| (0..rows * cols).map(|_| rng.random()).collect()).collect();
        let (r, c, back) = parse_idx_images(&encode_idx_images(rows, cols, &images)).unwrap();
        prop_assert_eq!((r, c), (rows, cols));
        prop_assert_eq!(back, images);
        prop_assert_eq!(parse_idx_labels(&encode_idx_labels(&labels)).unwrap(), labels);
    }
}
