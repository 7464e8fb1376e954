//! Scalar abstraction shared by the numeric kernels.
//!
//! Everything that touches field data, images or network weights is generic
//! over [`Real`], implemented for `f32` and `f64`. File formats always store
//! `f64`; narrower scalars are widened on write.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub use num_complex::Complex;

/// Floating-point scalar usable by the imaging and learning kernels.
pub trait Real:
    RealField + Copy + Default + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("every supported scalar accepts f64 input")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::of(n as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `exp(j theta)`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    let (s, c) = theta.sin_cos();
    Complex::new(c, s)
}

/// Complex exponential.
#[inline]
pub fn cexp<T: Real>(z: Complex<T>) -> Complex<T> {
    cis(z.im) * z.re.exp()
}

/// Modulus `|z|`.
#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Principal square root (nonnegative real part; branch cut on the negative real axis).
pub fn csqrt<T: Real>(z: Complex<T>) -> Complex<T> {
    let two = T::of(2.0);
    let r = cabs(z);
    if r == T::zero() {
        return Complex::new(T::zero(), T::zero());
    }
    if z.re >= T::zero() {
        let t = ((r + z.re) / two).sqrt();
        Complex::new(t, z.im / (two * t))
    } else {
        let t = ((r - z.re) / two).sqrt();
        let re = z.im.abs() / (two * t);
        Complex::new(re, if z.im < T::zero() { -t } else { t })
    }
}

pub(crate) fn complex_cast<T: Real>(z: Complex<f64>) -> Complex<T> {
    Complex::new(T::of(z.re), T::of(z.im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_root_matches_num_complex() {
        for &(re, im) in &[(4.0, 0.0), (3.0, -0.2), (-1.0, 0.0), (-2.0, -1e-3), (0.5, 7.0)] {
            let z = Complex::new(re, im);
            let ours = csqrt(z);
            let theirs = z.sqrt();
            assert!((ours - theirs).norm() < 1e-14, "{z}: {ours} vs {theirs}");
            assert!(ours.re >= 0.0);
        }
    }

    #[test]
    fn exp_helpers_agree() {
        let z = Complex::new(-0.3, 1.7);
        assert!((cexp(z) - z.exp()).norm() < 1e-15);
        assert!(f64::abs(cabs(z) - z.norm()) < 1e-15);
        let z32 = Complex::new(0.25f32, -2.0);
        assert!((cexp(z32) - z32.exp()).norm() < 1e-6);
    }
}
