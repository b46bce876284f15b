//! Datasets: construction, loading, splitting and mini-batching.

mod idx;
mod synthetic;
mod table;

pub use idx::{load_mnist_idx, IdxImages, IdxLabels, IMAGES_MAGIC, LABELS_MAGIC};
pub use synthetic::{make_synthetic, SyntheticKind};
pub use table::{load_embedding_table, sidecar_path, write_embedding_table, TableFormat};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{check_binary, Batch};
use crate::rng::rng_from;

/// Real-valued rows `X` with one binary protected label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    name: String,
    features: Array2<f64>,
    protected: Array1<f64>,
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        protected: Array1<f64>,
    ) -> Result<Self> {
        if features.nrows() != protected.len() {
            return Err(Error::shape(
                "dataset labels",
                features.nrows(),
                protected.len(),
            ));
        }
        check_binary(protected.iter().copied())?;
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite feature at row {}",
                pos / features.ncols().max(1)
            )));
        }
        Ok(Self {
            name: name.into(),
            features,
            protected,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn protected(&self) -> ArrayView1<'_, f64> {
        self.protected.view()
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            name: self.name.clone(),
            features: self.features.select(Axis(0), indices),
            protected: self.protected.select(Axis(0), indices),
        }
    }

    /// Same labels, new feature matrix (for instance an encoded representation).
    pub fn with_features(&self, features: Array2<f64>) -> Result<LabeledDataset> {
        LabeledDataset::new(self.name.clone(), features, self.protected.clone())
    }

    /// A seeded random subset of `n` rows (or all rows if `n >= len`).
    pub fn subsample(&self, n: usize, seed: u64) -> LabeledDataset {
        if n >= self.len() {
            return self.clone();
        }
        let mut order = permutation(self.len(), seed);
        order.truncate(n);
        self.select(&order)
    }
}

/// Seeded shuffle of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed));
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Seeded shuffled partition into `(train, eval)`; the train side gets
/// `round(n · train_fraction)` rows.
pub fn split(
    dataset: &LabeledDataset,
    spec: SplitSpec,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::Config(format!("cannot split {n} rows")));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let n_train = (n as f64 * spec.train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Config(format!(
            "train fraction {} leaves an empty side on {n} rows",
            spec.train_fraction
        )));
    }
    let order = permutation(n, spec.seed);
    Ok((
        dataset.select(&order[..n_train]),
        dataset.select(&order[n_train..]),
    ))
}

/// One epoch of mini-batches in seed-shuffled order; the last batch may be short.
pub fn batches(
    dataset: &LabeledDataset,
    batch_size: usize,
    epoch_seed: u64,
) -> impl Iterator<Item = Batch> + '_ {
    let batch_size = batch_size.max(1);
    let order = permutation(dataset.len(), epoch_seed);
    let chunks: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    chunks.into_iter().map(move |idx| Batch {
        inputs: dataset.features.select(Axis(0), &idx),
        labels: Some(dataset.protected.select(Axis(0), &idx)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy(n: usize) -> LabeledDataset {
        let x = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        let s = Array1::from_shape_fn(n, |i| (i % 2) as f64);
        LabeledDataset::new("toy", x, s).unwrap()
    }

    #[test]
    fn dataset_invariants() {
        assert!(LabeledDataset::new("x", array![[1.0], [2.0]], array![0.0]).is_err());
        assert!(LabeledDataset::new("x", array![[1.0]], array![2.0]).is_err());
        assert!(LabeledDataset::new("x", array![[f64::NAN]], array![1.0]).is_err());
    }

    #[test]
    fn split_sizes_and_partition() {
        let d = toy(10);
        let spec = SplitSpec {
            train_fraction: 0.8,
            seed: 3,
        };
        let (a, b) = split(&d, spec).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let mut ids: Vec<usize> = a
            .features()
            .column(0)
            .iter()
            .chain(b.features().column(0).iter())
            .map(|&v| v as usize / 2)
            .collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
        let (a2, b2) = split(&d, spec).unwrap();
        assert_eq!((a, b), (a2, b2));
    }

    #[test]
    fn split_rejects_empty_side() {
        let d = toy(3);
        assert!(split(
            &d,
            SplitSpec {
                train_fraction: 0.1,
                seed: 0
            }
        )
        .is_err());
        assert!(split(
            &toy(1),
            SplitSpec {
                train_fraction: 0.5,
                seed: 0
            }
        )
        .is_err());
    }

    #[test]
    fn batch_sizes_and_coverage() {
        let d = toy(10);
        let bs: Vec<Batch> = batches(&d, 4, 9).collect();
        assert_eq!(bs.iter().map(Batch::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        let mut seen: Vec<usize> = bs
            .iter()
            .flat_map(|b| b.inputs.column(0).to_vec())
            .map(|v| v as usize / 2)
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn epoch_seed_changes_order_not_multiset() {
        let d = toy(50);
        let order = |seed| -> Vec<f64> {
            batches(&d, 7, seed)
                .flat_map(|b| b.inputs.column(0).to_vec())
                .collect()
        };
        let (a, b) = (order(1), order(2));
        assert_ne!(a, b);
        let (mut sa, mut sb) = (a.clone(), b.clone());
        sa.sort_by(f64::total_cmp);
        sb.sort_by(f64::total_cmp);
        assert_eq!(sa, sb);
        assert_eq!(order(1), a);
    }
}
