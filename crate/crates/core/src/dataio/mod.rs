//! Datasets: MNIST IDX loading, label binarization, shared/personal feature
//! split, client partitioning and synthetic quadratic instances.

mod idx;
mod synth;

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use idx::{parse_idx_images, parse_idx_labels, read_maybe_gzip, IMAGES_MAGIC, LABELS_MAGIC};
pub use synth::{synth_quadratic, SynthQuadratic};

use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamKey};
use crate::vector::Vec64;

/// One client's rows `(a, b, c)` stored as flat row-major blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientShard {
    client_id: usize,
    dim_u: usize,
    dim_v: usize,
    shared: Vec<f64>,
    personal: Vec<f64>,
    labels: Vec<f64>,
}

impl ClientShard {
    /// `client_id` is 1-based.
    pub fn new(client_id: usize, dim_u: usize, dim_v: usize) -> Self {
        ClientShard {
            client_id,
            dim_u,
            dim_v,
            shared: Vec::new(),
            personal: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, a: &[f64], b: &[f64], c: f64) -> Result<()> {
        if a.len() != self.dim_u {
            return Err(Error::DimMismatch {
                expected: self.dim_u,
                got: a.len(),
            });
        }
        if b.len() != self.dim_v {
            return Err(Error::DimMismatch {
                expected: self.dim_v,
                got: b.len(),
            });
        }
        if c != 1.0 && c != -1.0 {
            return Err(Error::InvalidArgument(format!("label must be ±1, got {c}")));
        }
        self.shared.extend_from_slice(a);
        self.personal.extend_from_slice(b);
        self.labels.push(c);
        Ok(())
    }

    pub fn client_id(&self) -> usize {
        self.client_id
    }

    pub fn dim_u(&self) -> usize {
        self.dim_u
    }

    pub fn dim_v(&self) -> usize {
        self.dim_v
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn row(&self, l: usize) -> (&[f64], &[f64], f64) {
        (
            &self.shared[l * self.dim_u..(l + 1) * self.dim_u],
            &self.personal[l * self.dim_v..(l + 1) * self.dim_v],
            self.labels[l],
        )
    }

    /// Keeps only the first `cap` rows.
    pub fn truncate(&mut self, cap: usize) {
        if cap < self.len() {
            self.shared.truncate(cap * self.dim_u);
            self.personal.truncate(cap * self.dim_v);
            self.labels.truncate(cap);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub images: Vec<Vec64>,
    pub labels: Vec<u8>,
}

impl RawDataset {
    pub fn new(images: Vec<Vec64>, labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        Ok(RawDataset { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Loads an image/label IDX pair; either file may be gzip-compressed.
    pub fn load_idx(images: &Path, labels: &Path) -> Result<Self> {
        let imgs = parse_idx_images(&read_maybe_gzip(images)?)?;
        let labs = parse_idx_labels(&read_maybe_gzip(labels)?)?;
        RawDataset::new(imgs, labs)
    }
}

/// Even digits map to `+1`, odd digits to `−1`.
pub fn binarize_labels(digits: &[u8]) -> Vec<f64> {
    digits
        .iter()
        .map(|d| if d % 2 == 0 { 1.0 } else { -1.0 })
        .collect()
}

/// Splits `x` into its first `dim_u` and last `dim_v` coordinates.
pub fn split_features(x: &Vec64, dim_u: usize, dim_v: usize) -> Result<(Vec64, Vec64)> {
    if dim_u == 0 || dim_v == 0 {
        return Err(Error::InvalidArgument(
            "both feature blocks need at least one coordinate".into(),
        ));
    }
    if dim_u + dim_v != x.len() {
        return Err(Error::DimMismatch {
            expected: x.len(),
            got: dim_u + dim_v,
        });
    }
    let (a, b) = x.as_slice().split_at(dim_u);
    Ok((a.into(), b.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionScheme {
    /// Seeded shuffle, then contiguous blocks.
    Iid,
    /// Stable sort by digit, then contiguous blocks.
    ByLabel,
}

/// Assigns example indices to `n` clients.
///
/// Blocks are contiguous with sizes differing by at most one; the remainder
/// goes to the lowest-index clients.
pub fn partition_indices(
    labels: &[u8],
    n: usize,
    scheme: PartitionScheme,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let count = labels.len();
    if n == 0 || count < n {
        return Err(Error::TooFewExamples { count, n });
    }
    let mut order: Vec<usize> = (0..count).collect();
    match scheme {
        PartitionScheme::Iid => {
            let mut rng = StreamKey::new(seed, Purpose::Partition).rng();
            order.shuffle(&mut rng);
        }
        PartitionScheme::ByLabel => order.sort_by_key(|&i| labels[i]),
    }
    let (base, extra) = (count / n, count % n);
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let size = base + usize::from(i < extra);
        out.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(out)
}

/// Partitions a dataset into `n` shards of split, binarized rows.
pub fn partition_clients(
    dataset: &RawDataset,
    n: usize,
    scheme: PartitionScheme,
    seed: u64,
    dim_u: usize,
    dim_v: usize,
) -> Result<Vec<ClientShard>> {
    let parts = partition_indices(&dataset.labels, n, scheme, seed)?;
    let signs = binarize_labels(&dataset.labels);
    parts
        .iter()
        .enumerate()
        .map(|(i, rows)| {
            let mut shard = ClientShard::new(i + 1, dim_u, dim_v);
            for &r in rows {
                let (a, b) = split_features(&dataset.images[r], dim_u, dim_v)?;
                shard.push(a.as_slice(), b.as_slice(), signs[r])?;
            }
            Ok(shard)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_binarization() {
        assert_eq!(binarize_labels(&[0, 1, 2]), vec![1.0, -1.0, 1.0]);
        assert!(binarize_labels(&[]).is_empty());
        assert!(binarize_labels(&[1, 3, 5, 7, 9]).iter().all(|&c| c == -1.0));
    }

    #[test]
    fn split_prefix_suffix() {
        let x = Vec64::from([1.0, 2.0, 3.0, 4.0]);
        let (a, b) = split_features(&x, 3, 1).unwrap();
        assert_eq!(a, Vec64::from([1.0, 2.0, 3.0]));
        assert_eq!(b, Vec64::from([4.0]));
        assert!(matches!(split_features(&x, 2, 1), Err(Error::DimMismatch { .. })));
        assert!(split_features(&x, 4, 0).is_err());
    }

    #[test]
    fn single_client_gets_everything() {
        let labels = [4u8, 1, 7, 0];
        let parts = partition_indices(&labels, 1, PartitionScheme::Iid, 9).unwrap();
        let mut all = parts[0].clone();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn one_row_per_client() {
        let labels: Vec<u8> = (0..10).collect();
        let parts = partition_indices(&labels, 10, PartitionScheme::Iid, 3).unwrap();
        assert!(parts.iter().all(|p| p.len() == 1));
        let mut all: Vec<usize> = parts.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn by_label_first_shard_has_smallest_digits() {
        let labels: Vec<u8> = (0..20).map(|i| (i / 2) as u8).collect();
        let parts = partition_indices(&labels, 2, PartitionScheme::ByLabel, 0).unwrap();
        assert_eq!(parts[0], (0..10).collect::<Vec<_>>());
        assert!(parts[0].iter().all(|&r| labels[r] <= 4));
        assert!(parts[1].iter().all(|&r| labels[r] >= 5));
    }

    #[test]
    fn remainder_goes_to_low_clients() {
        let labels = [0u8; 7];
        let parts = partition_indices(&labels, 3, PartitionScheme::ByLabel, 0).unwrap();
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
    }

    #[test]
    fn too_few_examples() {
        assert!(matches!(
            partition_indices(&[1, 2], 3, PartitionScheme::Iid, 0),
            Err(Error::TooFewExamples { count: 2, n: 3 })
        ));
    }

    #[test]
    fn shards_carry_split_rows() {
        let images = vec![Vec64::from([0.1, 0.2, 0.3]), Vec64::from([0.4, 0.5, 0.6])];
        let data = RawDataset::new(images, vec![3, 8]).unwrap();
        let shards = partition_clients(&data, 2, PartitionScheme::ByLabel, 0, 2, 1).unwrap();
        assert_eq!(shards[0].client_id(), 1);
        assert_eq!(shards[0].row(0), (&[0.1, 0.2][..], &[0.3][..], -1.0));
        assert_eq!(shards[1].row(0), (&[0.4, 0.5][..], &[0.6][..], 1.0));
    }
}
