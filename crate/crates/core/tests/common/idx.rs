//! Malformed IDX inputs must fail with an error naming the file.

use std::fs;
use std::path::Path;

use censor_core::data::{load_mnist_idx, IdxImages, IdxLabels};
use censor_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sample() -> (IdxImages, IdxLabels) {
    let images = IdxImages {
        count: 6,
        rows: 4,
        cols: 3,
        pixels: (0..72).map(|i| (i * 37 % 256) as u8).collect(),
    };
    let labels = IdxLabels {
        labels: vec![8, 1, 8, 0, 9, 3],
    };
    (images, labels)
}

pub fn names_file(err: &Error, path: &Path) -> bool {
    err.to_string().contains(&path.display().to_string())
}

/// Parses and re-serializes both sample files, requiring identical bytes.
pub fn round_trip() -> Result<(), String> {
    let (images, labels) = sample();
    let bytes = images.to_bytes();
    let back = IdxImages::parse(&bytes, Path::new("x")).map_err(|e| e.to_string())?;
    if back != images || back.to_bytes() != bytes {
        return Err("image file changed on round trip".into());
    }
    let lb = labels.to_bytes();
    let back = IdxLabels::parse(&lb, Path::new("y")).map_err(|e| e.to_string())?;
    if back.to_bytes() != lb {
        return Err("label file changed on round trip".into());
    }
    Ok(())
}

/// Flips bytes in one header field per case (images) or anywhere in the
/// header (labels). Returns how many mutants were rejected with an error
/// naming the mutated file.
pub fn mutated_headers(
    dir: &Path,
    image_cases: usize,
    label_cases: usize,
) -> Result<usize, String> {
    let (images, labels) = sample();
    let (ip, lp) = (dir.join("img"), dir.join("lbl"));
    fs::write(&ip, images.to_bytes()).unwrap();
    fs::write(&lp, labels.to_bytes()).unwrap();
    let mut rejected = 0;

    let good = images.to_bytes();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..image_cases {
        let mut bytes = good.clone();
        // One header field per case, so the dimension product always moves.
        let field = case % 4;
        let byte = 4 * field + rng.random_range(0..4);
        bytes[byte] ^= rng.random_range(1..=255u8);
        let path = dir.join(format!("img{case}"));
        fs::write(&path, &bytes).unwrap();
        match load_mnist_idx(&path, &lp, 8) {
            Ok(_) => return Err(format!("mutated image header {case} accepted")),
            Err(e) if !names_file(&e, &path) => {
                return Err(format!("error does not name the file: {e}"))
            }
            Err(_) => rejected += 1,
        }
    }

    let good = labels.to_bytes();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..label_cases {
        let mut bytes = good.clone();
        bytes[rng.random_range(0..8)] ^= rng.random_range(1..=255u8);
        let path = dir.join(format!("lbl{case}"));
        fs::write(&path, &bytes).unwrap();
        match load_mnist_idx(&ip, &path, 8) {
            Ok(_) => return Err(format!("mutated label header {case} accepted")),
            Err(e) if !names_file(&e, &path) => {
                return Err(format!("error does not name the file: {e}"))
            }
            Err(_) => rejected += 1,
        }
    }
    Ok(rejected)
}
