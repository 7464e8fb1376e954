use crate::imaging::Image;
use crate::num::Real;

/// Flattened image scaled so its largest magnitude is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector<T: Real = f64> {
    pub values: Vec<T>,
}

impl<T: Real> FeatureVector<T> {
    /// Max-abs normalizes `values`; an all-zero vector stays zero.
    pub fn normalized(mut values: Vec<T>) -> Self {
        let m = values.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        if m > T::zero() {
            for v in &mut values {
                *v /= m;
            }
        }
        Self { values }
    }

    pub fn from_image(image: &Image<T>) -> Self {
        Self::normalized(image.values.clone())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// One labelled training example.
#[derive(Clone, Debug, PartialEq)]
pub struct Example<T: Real = f64> {
    pub input: FeatureVector<T>,
    pub label: usize,
}

impl<T: Real> Example<T> {
    pub fn new(input: FeatureVector<T>, label: usize) -> Self {
        Self { input, label }
    }
}
