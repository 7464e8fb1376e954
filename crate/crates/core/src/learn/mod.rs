//! Classifiers: exhaustive KNN and a small CNN trained by backpropagation.

mod cnn;
mod features;
mod knn;
mod train;

pub use cnn::{softmax_cross_entropy, CnnArchitecture, CnnModel, CnnParams, Conv2d, Dense, BLOCK_NAMES};
pub use features::{Example, FeatureVector};
pub use knn::{KnnConfig, KnnModel};
pub use train::{cnn_train, Adam, AdamConfig, EpochStats, TrainConfig, TrainHistory};

use crate::dataset::MoistureClassSet;
use crate::error::{domain, Result};
use crate::imaging::Image;
use crate::num::Real;

/// Anything that maps a feature vector to a class index.
pub trait Classifier<T: Real> {
    fn classify(&self, input: &FeatureVector<T>) -> Result<usize>;

    fn classify_image(&self, image: &Image<T>) -> Result<usize> {
        self.classify(&FeatureVector::from_image(image))
    }
}

/// A trained model of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel<T: Real = f64> {
    Knn(KnnModel<T>),
    Cnn(CnnModel<T>),
}

impl<T: Real> Classifier<T> for TrainedModel<T> {
    fn classify(&self, input: &FeatureVector<T>) -> Result<usize> {
        match self {
            TrainedModel::Knn(m) => m.classify(input),
            TrainedModel::Cnn(m) => m.classify(input),
        }
    }
}

/// Mean moisture level over one image per band.
pub fn predict_sm<T: Real, C: Classifier<T> + ?Sized>(
    model: &C,
    images: &[Image<T>],
    classes: &MoistureClassSet,
    expected_bands: usize,
) -> Result<f64> {
    if images.len() != expected_bands || images.is_empty() {
        return Err(domain(format!("expected {expected_bands} band images, got {}", images.len())));
    }
    let mut total = 0.0;
    for image in images {
        let label = model.classify_image(image)?;
        total += classes.level(label)?;
    }
    Ok(total / images.len() as f64)
}

/// Mean of the class levels for already-classified bands.
pub fn mean_level(labels: &[usize], classes: &MoistureClassSet) -> Result<f64> {
    if labels.is_empty() {
        return Err(domain("no band predictions"));
    }
    let mut total = 0.0;
    for &l in labels {
        total += classes.level(l)?;
    }
    Ok(total / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<usize>, std::cell::Cell<usize>);

    impl Classifier<f64> for Fixed {
        fn classify(&self, _: &FeatureVector<f64>) -> Result<usize> {
            let i = self.1.get();
            self.1.set(i + 1);
            Ok(self.0[i])
        }
    }

    fn images(n: usize) -> Vec<Image<f64>> {
        let g = crate::grid::ImagingGrid::new(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap();
        vec![Image::zeros(g); n]
    }

    #[test]
    fn mean_over_bands() {
        let classes = MoistureClassSet::default();
        let all_quarter = Fixed(vec![1; 16], Default::default());
        assert_eq!(predict_sm(&all_quarter, &images(16), &classes, 16).unwrap(), 0.25);
        let split = Fixed([vec![0; 8], vec![2; 8]].concat(), Default::default());
        assert_eq!(predict_sm(&split, &images(16), &classes, 16).unwrap(), 0.25);
        assert!(predict_sm(&split, &images(15), &classes, 16).is_err());
    }

    #[test]
    fn plotted_first_scan_average() {
        // 43/128 = 0.3359375, e.g. eleven bands voting 0.375 and five voting 0.25.
        let classes = MoistureClassSet::default();
        let labels = [vec![2; 11], vec![1; 5]].concat();
        let sm = mean_level(&labels, &classes).unwrap();
        assert!((sm * 100.0 - 33.59375).abs() < 1e-12);
    }
}
