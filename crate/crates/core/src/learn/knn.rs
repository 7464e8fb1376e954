use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Classifier, FeatureVector};
use crate::error::{domain, format, Result};
use crate::format::{read_file, u32_len, write_file, ByteReader, ByteWriter, VERSION};
use crate::num::Real;

pub const KNN_MAGIC: &[u8; 4] = b"MWKN";

/// Exhaustive-search k-nearest-neighbour classifier with majority vote.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnModel<T: Real = f64> {
    pub train_features: Vec<FeatureVector<T>>,
    pub train_labels: Vec<usize>,
    pub k: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 5 }
    }
}

impl<T: Real> KnnModel<T> {
    pub fn fit(train_features: Vec<FeatureVector<T>>, train_labels: Vec<usize>, k: usize) -> Result<Self> {
        if train_features.len() != train_labels.len() {
            return Err(domain("feature and label counts differ"));
        }
        if k == 0 || k > train_features.len() {
            return Err(domain(format!("k = {k} must lie in [1, {}]", train_features.len())));
        }
        let dim = train_features[0].dim();
        if train_features.iter().any(|f| f.dim() != dim || !f.is_finite()) {
            return Err(domain("training features must be finite and share one dimension"));
        }
        Ok(Self { train_features, train_labels, k })
    }

    pub fn dim(&self) -> usize {
        self.train_features.first().map_or(0, FeatureVector::dim)
    }

    fn distance(a: &[T], b: &[T]) -> T {
        a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + (*x - *y) * (*x - *y)).sqrt()
    }

    /// Indices of the `k` nearest training points, ordered by (distance, index).
    pub fn neighbours(&self, query: &FeatureVector<T>) -> Result<Vec<usize>> {
        if query.dim() != self.dim() {
            return Err(domain(format!("query has dimension {}, model expects {}", query.dim(), self.dim())));
        }
        let mut scored: Vec<(T, usize)> = self
            .train_features
            .iter()
            .enumerate()
            .map(|(i, f)| (Self::distance(&query.values, &f.values), i))
            .collect();
        let order = |a: &(T, usize), b: &(T, usize)| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1));
        if self.k < scored.len() {
            scored.select_nth_unstable_by(self.k - 1, order);
            scored.truncate(self.k);
        }
        scored.sort_by(order);
        Ok(scored.into_iter().map(|(_, i)| i).collect())
    }

    pub fn predict(&self, query: &FeatureVector<T>) -> Result<usize> {
        let nearest = self.neighbours(query)?;
        let n_labels = nearest.iter().map(|&i| self.train_labels[i]).max().unwrap_or(0) + 1;
        let mut votes = vec![0usize; n_labels];
        // Rank of each label's closest member among the neighbours.
        let mut first_seen = vec![usize::MAX; n_labels];
        for (rank, &i) in nearest.iter().enumerate() {
            let label = self.train_labels[i];
            votes[label] += 1;
            first_seen[label] = first_seen[label].min(rank);
        }
        let best = (0..n_labels)
            .filter(|&l| votes[l] > 0)
            .max_by(|&a, &b| votes[a].cmp(&votes[b]).then(first_seen[b].cmp(&first_seen[a])))
            .expect("k >= 1");
        Ok(best)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::new();
        w.magic(KNN_MAGIC)
            .u16(VERSION)
            .u32(u32_len(self.train_features.len(), "n")?)
            .u32(u32_len(self.dim(), "dim")?)
            .u32(u32_len(self.k, "k")?);
        for f in &self.train_features {
            for v in &f.values {
                w.f64(v.as_f64());
            }
        }
        for &l in &self.train_labels {
            w.u32(u32_len(l, "label")?);
        }
        Ok(w.finish())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.expect_magic(KNN_MAGIC)?;
        r.expect_version()?;
        let n = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let k = r.u32()? as usize;
        let raw = r.f64s(n.checked_mul(dim).ok_or_else(|| format("size overflow"))?)?;
        let labels = (0..n).map(|_| r.u32().map(|l| l as usize)).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        let features = if dim == 0 {
            vec![FeatureVector { values: Vec::new() }; n]
        } else {
            raw.chunks_exact(dim).map(|c| FeatureVector { values: c.iter().map(|&v| T::of(v)).collect() }).collect()
        };
        Self::fit(features, labels, k).map_err(|e| format(format!("invalid KNN model: {e}")))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path, &self.to_bytes()?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

impl<T: Real> Classifier<T> for KnnModel<T> {
    fn classify(&self, input: &FeatureVector<T>) -> Result<usize> {
        self.predict(input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[f64]) -> FeatureVector<f64> {
        FeatureVector { values: v.to_vec() }
    }

    #[test]
    fn k1_exact_match_returns_its_label() {
        let m = KnnModel::fit(vec![fv(&[0.0, 0.0]), fv(&[1.0, 1.0]), fv(&[0.0, 1.0])], vec![3, 1, 2], 1).unwrap();
        assert_eq!(m.predict(&fv(&[0.0, 1.0])).unwrap(), 2);
    }

    #[test]
    fn majority_of_five_wins() {
        // Three "purple" (label 0) and two others near the query.
        let pts = vec![fv(&[0.1, 0.0]), fv(&[0.0, 0.2]), fv(&[-0.3, 0.0]), fv(&[0.0, -0.05]), fv(&[0.15, 0.15]), fv(&[5.0, 5.0])];
        let labels = vec![0, 0, 0, 1, 1, 1];
        let m = KnnModel::fit(pts, labels, 5).unwrap();
        assert_eq!(m.predict(&fv(&[0.0, 0.0])).unwrap(), 0);
    }

    #[test]
    fn count_ties_go_to_nearest_label() {
        let pts = vec![fv(&[1.0]), fv(&[2.0]), fv(&[-1.5]), fv(&[-2.5])];
        let m = KnnModel::fit(pts, vec![4, 4, 7, 7], 4).unwrap();
        assert_eq!(m.predict(&fv(&[0.0])).unwrap(), 4);
        assert_eq!(m.predict(&fv(&[-0.4])).unwrap(), 7);
    }

    #[test]
    fn distance_ties_prefer_lower_index() {
        let pts = vec![fv(&[1.0]), fv(&[-1.0])];
        let m = KnnModel::fit(pts, vec![5, 6], 1).unwrap();
        assert_eq!(m.predict(&fv(&[0.0])).unwrap(), 5);
    }

    #[test]
    fn dimension_mismatch_and_bad_k() {
        let m = KnnModel::fit(vec![fv(&[0.0, 0.0])], vec![0], 1).unwrap();
        assert!(matches!(m.predict(&fv(&[0.0])), Err(crate::Error::Domain(_))));
        assert!(KnnModel::fit(vec![fv(&[0.0])], vec![0], 2).is_err());
        assert!(KnnModel::fit(vec![fv(&[0.0])], vec![0], 0).is_err());
    }

    #[test]
    fn bytes_roundtrip() {
        let m = KnnModel::fit(vec![fv(&[0.25, 1.0]), fv(&[0.5, 0.125])], vec![1, 0], 1).unwrap();
        let bytes = m.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"MWKN");
        let back = KnnModel::<f64>::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }
}
