use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Rows are actual classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self { counts: vec![vec![0; n_classes]; n_classes] }
    }

    pub fn from_pairs(preds: &[usize], labels: &[usize], n_classes: usize) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(domain(format!("{} predictions for {} labels", preds.len(), labels.len())));
        }
        let mut m = Self::new(n_classes);
        for (&p, &l) in preds.iter().zip(labels) {
            if p >= n_classes || l >= n_classes {
                return Err(domain(format!("class index {} out of range for {n_classes} classes", p.max(l))));
            }
            m.counts[l][p] += 1;
        }
        Ok(m)
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    /// Fraction on the diagonal; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }

    /// Each row divided by its sum; empty rows stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                row.iter().map(|&c| if s == 0 { 0.0 } else { c as f64 / s as f64 }).collect()
            })
            .collect()
    }

    /// Row-normalized matrix with a header row of predicted-class indices.
    pub fn to_csv(&self) -> String {
        let n = self.n_classes();
        let mut out = String::from("actual\\predicted");
        for j in 0..n {
            out.push_str(&format!(",{j}"));
        }
        out.push('\n');
        for (i, row) in self.row_normalized().iter().enumerate() {
            out.push_str(&i.to_string());
            for v in row {
                out.push_str(&format!(",{v:.4}"));
            }
            out.push('\n');
        }
        out
    }

    /// Binary PGM heatmap of the row-normalized matrix, `cell` pixels per entry; 1.0 is white.
    pub fn to_pgm(&self, cell: usize) -> Vec<u8> {
        let n = self.n_classes();
        let side = n * cell.max(1);
        let norm = self.row_normalized();
        let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
        for y in 0..side {
            for x in 0..side {
                out.push((norm[y / cell.max(1)][x / cell.max(1)] * 255.0).round() as u8);
            }
        }
        out
    }
}

/// Confusion matrix and accuracy over paired predictions and labels.
pub fn confusion_and_accuracy(preds: &[usize], labels: &[usize], n_classes: usize) -> Result<(ConfusionMatrix, f64)> {
    if preds.is_empty() {
        return Err(domain("no predictions to score"));
    }
    let m = ConfusionMatrix::from_pairs(preds, labels, n_classes)?;
    let acc = m.accuracy();
    Ok((m, acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_give_identity() {
        let labels: Vec<usize> = (0..8).flat_map(|c| [c, c]).collect();
        let (m, acc) = confusion_and_accuracy(&labels, &labels, 8).unwrap();
        assert_eq!(acc, 1.0);
        for (i, row) in m.row_normalized().iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn split_row_quarters() {
        // Four samples of class 2: one predicted as 1, three as 2.
        let labels = [2, 2, 2, 2];
        let preds = [1, 2, 2, 2];
        let (m, _) = confusion_and_accuracy(&preds, &labels, 9).unwrap();
        let row = &m.row_normalized()[2];
        assert_eq!(&row[..4], &[0.0, 0.25, 0.75, 0.0]);
        assert!(m.row_normalized()[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_predictor_is_chance() {
        let labels: Vec<usize> = (0..8).flat_map(|c| [c; 3]).collect();
        let preds = vec![4; labels.len()];
        let (_, acc) = confusion_and_accuracy(&preds, &labels, 8).unwrap();
        assert!((acc - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_and_length_errors() {
        assert!(confusion_and_accuracy(&[8], &[0], 8).is_err());
        assert!(confusion_and_accuracy(&[0, 1], &[0], 8).is_err());
        assert!(confusion_and_accuracy(&[], &[], 8).is_err());
    }

    #[test]
    fn exports() {
        let (m, _) = confusion_and_accuracy(&[0, 1, 1], &[0, 1, 0], 2).unwrap();
        assert_eq!(m.to_csv(), "actual\\predicted,0,1\n0,0.5000,0.5000\n1,0.0000,1.0000\n");
        let pgm = m.to_pgm(2);
        assert!(pgm.starts_with(b"P5\n4 4\n255\n"));
        assert_eq!(pgm.len(), 11 + 16);
    }
}
