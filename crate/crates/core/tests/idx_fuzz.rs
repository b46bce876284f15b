mod common;

use std::fs;
use std::path::Path;

use censor_core::data::{load_mnist_idx, IdxImages, IdxLabels};
use common::idx::{mutated_headers, names_file, round_trip, sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn round_trip_is_bit_exact() {
    round_trip().unwrap();
}

#[test]
fn valid_files_load() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = sample();
    let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
    fs::write(&ip, images.to_bytes()).unwrap();
    fs::write(&lp, labels.to_bytes()).unwrap();
    let d = load_mnist_idx(&ip, &lp, 8).unwrap();
    assert_eq!((d.len(), d.dim()), (6, 12));
    assert_eq!(d.protected().to_vec(), vec![1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    assert!(d.features().iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn mutated_headers_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mutated_headers(dir.path(), 80, 60).unwrap(), 140);
}

#[test]
fn truncation_padding_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = sample();
    let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
    let good = images.to_bytes();
    fs::write(&lp, labels.to_bytes()).unwrap();
    for len in [0, 3, 15, 16, good.len() - 1] {
        fs::write(&ip, &good[..len]).unwrap();
        let err = load_mnist_idx(&ip, &lp, 8).unwrap_err();
        assert!(names_file(&err, &ip), "{err}");
    }
    let mut padded = good.clone();
    padded.push(0);
    fs::write(&ip, &padded).unwrap();
    assert!(load_mnist_idx(&ip, &lp, 8).is_err());

    fs::write(&ip, &good).unwrap();
    let short = IdxLabels {
        labels: labels.labels[..5].to_vec(),
    };
    fs::write(&lp, short.to_bytes()).unwrap();
    let err = load_mnist_idx(&ip, &lp, 8).unwrap_err();
    assert!(names_file(&err, &lp), "{err}");

    let bad_digit = IdxLabels {
        labels: vec![8, 1, 8, 0, 10, 3],
    };
    fs::write(&lp, bad_digit.to_bytes()).unwrap();
    assert!(load_mnist_idx(&ip, &lp, 8).is_err());
}

#[test]
fn random_byte_soup_never_panics() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..500 {
        let len = rng.random_range(0..64);
        let mut bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        if len >= 4 && rng.random_bool(0.5) {
            bytes[..4].copy_from_slice(&2051u32.to_be_bytes());
        }
        let _ = IdxImages::parse(&bytes, Path::new("soup"));
        let _ = IdxLabels::parse(&bytes, Path::new("soup"));
    }
}
