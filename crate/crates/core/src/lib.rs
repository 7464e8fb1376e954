//! Synthetic subsurface microwave imaging of leaky irrigation pipes and
//! soil-moisture classification from the resulting images.
//!
//! The pipeline runs scene → B-scan → SVD clutter reduction → per-band image
//! formation (back-projection or Born inversion) → KNN / CNN classification.
//! Numeric kernels are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the file formats store.

// `!(x < y)` checks are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::large_enum_variant)]

pub mod acquisition;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod format;
pub mod forward;
pub mod grid;
pub mod imaging;
pub mod learn;
pub mod num;
pub mod preproc;
pub mod scene;

pub use error::{Error, Result};
pub use num::{Complex, Real};

pub type BScan64 = forward::BScan<f64>;
pub type BScan32 = forward::BScan<f32>;
pub type Image64 = imaging::Image<f64>;
pub type Image32 = imaging::Image<f32>;
pub type ContrastMap64 = scene::ContrastMap<f64>;
pub type ContrastMap32 = scene::ContrastMap<f32>;
pub type CnnModel64 = learn::CnnModel<f64>;
pub type CnnModel32 = learn::CnnModel<f32>;
pub type KnnModel64 = learn::KnnModel<f64>;
pub type KnnModel32 = learn::KnnModel<f32>;
