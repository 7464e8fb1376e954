//! SVD clutter reduction: deflate the leading singular components of the B-scan.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::forward::BScan;
use crate::num::{Complex, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClutterReductionSpec {
    pub n_remove: usize,
}

impl Default for ClutterReductionSpec {
    fn default() -> Self {
        Self { n_remove: 1 }
    }
}

/// Singular values of a complex matrix, descending.
pub fn singular_values<T: Real>(m: &DMatrix<Complex<T>>) -> Vec<T> {
    if m.is_empty() {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Leading `n` rank-one components `sigma_n u_n v_n^H`, largest first.
pub fn leading_components<T: Real>(m: &DMatrix<Complex<T>>, n: usize) -> Vec<DMatrix<Complex<T>>> {
    if n == 0 || m.is_empty() {
        return Vec::new();
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    (0..n)
        .map(|k| {
            let sigma = Complex::new(svd.singular_values[k], T::zero());
            u.column(k) * v_t.row(k) * sigma
        })
        .collect()
}

/// Returns `S - sum_{n <= n_remove} sigma_n u_n v_n^H` with unchanged axes.
///
/// Equal leading singular values are deflated in the order the decomposition
/// returns them.
pub fn svd_clutter_reduce<T: Real>(bscan: &BScan<T>, spec: &ClutterReductionSpec) -> Result<BScan<T>> {
    bscan.validate()?;
    let max = bscan.n_freq().min(bscan.n_pos());
    if spec.n_remove > max {
        return Err(domain(format!("n_remove = {} exceeds min(N_f, N_s) = {max}", spec.n_remove)));
    }
    let mut out = bscan.clone();
    if spec.n_remove == 0 {
        return Ok(out);
    }
    if spec.n_remove == max {
        out.data.fill(Complex::new(T::zero(), T::zero()));
        return Ok(out);
    }
    for component in leading_components(&bscan.data, spec.n_remove) {
        out.data -= component;
    }
    Ok(out)
}

/// Removes the position-space subspace of the `n_remove` leading right singular
/// vectors of `reference` from `bscan`: `S (I - V V^H)`.
///
/// Used to estimate the clutter once on a wideband scan and apply it to every band.
pub fn project_out_positions<T: Real>(bscan: &BScan<T>, reference: &BScan<T>, n_remove: usize) -> Result<BScan<T>> {
    if reference.n_pos() != bscan.n_pos() {
        return Err(domain("reference and target B-scans have different position axes"));
    }
    let max = reference.n_freq().min(reference.n_pos());
    if n_remove > max {
        return Err(domain(format!("n_remove = {n_remove} exceeds min(N_f, N_s) = {max}")));
    }
    let mut out = bscan.clone();
    if n_remove == 0 {
        return Ok(out);
    }
    let v_t = reference.data.clone().svd(false, true).v_t.expect("v_t requested");
    for k in 0..n_remove {
        let row = v_t.row(k);
        // S v (v^H) with v = row^H.
        let coeffs = &out.data * row.adjoint();
        out.data -= coeffs * row;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn random_bscan(n_f: usize, n_s: usize, seed: u64) -> BScan<f64> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let data = DMatrix::from_fn(n_f, n_s, |_, _| Complex::new(next(), next()));
        BScan::new(data, (0..n_f).map(|i| 1e9 + i as f64).collect(), (0..n_s).map(|a| a as f64 * 0.01).collect(), "test").unwrap()
    }

    #[test]
    fn zero_removal_is_identity() {
        let b = random_bscan(12, 7, 1);
        let out = svd_clutter_reduce(&b, &ClutterReductionSpec { n_remove: 0 }).unwrap();
        assert_eq!(out, b);
    }

    #[test]
    fn full_removal_is_zero() {
        let b = random_bscan(12, 7, 2);
        let out = svd_clutter_reduce(&b, &ClutterReductionSpec { n_remove: 7 }).unwrap();
        assert!(out.data.iter().all(|z| z.norm() == 0.0));
        assert_eq!(out.freq_hz, b.freq_hz);
    }

    #[test]
    fn too_many_components_is_domain_error() {
        let b = random_bscan(5, 4, 3);
        assert!(matches!(svd_clutter_reduce(&b, &ClutterReductionSpec { n_remove: 5 }), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn energy_identity_and_orthogonality() {
        let b = random_bscan(20, 9, 4);
        let sv = singular_values(&b.data);
        for k in 1..4 {
            let out = svd_clutter_reduce(&b, &ClutterReductionSpec { n_remove: k }).unwrap();
            let removed: f64 = sv[..k].iter().map(|s| s * s).sum();
            let total = b.data.norm_squared();
            assert!((total - out.data.norm_squared() - removed).abs() <= 1e-10 * total);
            for comp in leading_components(&b.data, k) {
                let inner = out.data.dotc(&comp).norm();
                assert!(inner < 1e-10 * total);
            }
            let again = svd_clutter_reduce(&out, &ClutterReductionSpec { n_remove: 0 }).unwrap();
            assert_eq!(again, out);
        }
    }

    #[test]
    fn strong_rank_one_clutter_leaves_the_doubly_projected_signal() {
        // To first order in signal/clutter, deflating g c 1^T + S leaves (I - c c^H) S (I - e e^H), e = 1/sqrt(N_s).
        let (n_f, n_s) = (30, 20);
        let signal = random_bscan(n_f, n_s, 6);
        let c = DVector::from_fn(n_f, |i, _| Complex::new(1.0 + (i as f64 * 0.3).sin(), 0.5));
        let c = &c / Complex::new(c.norm(), 0.0);
        let e = DVector::from_element(n_s, Complex::new(1.0 / (n_s as f64).sqrt(), 0.0));
        let g = 1e4 * signal.data.norm();
        let mut cluttered = signal.clone();
        cluttered.data += &c * e.adjoint() * Complex::new(g, 0.0);
        let out = svd_clutter_reduce(&cluttered, &ClutterReductionSpec { n_remove: 1 }).unwrap();
        let p_c = DMatrix::identity(n_f, n_f) - &c * c.adjoint();
        let p_e = DMatrix::identity(n_s, n_s) - &e * e.adjoint();
        let expected = p_c * &signal.data * p_e;
        assert!((&out.data - &expected).norm() < 1e-3 * signal.data.norm());
    }

    #[test]
    fn wideband_projection_removes_constant_rows() {
        let mut b = random_bscan(10, 8, 5);
        for i in 0..10 {
            for a in 0..8 {
                b.data[(i, a)] += Complex::new(50.0 * (1.0 + i as f64), 0.0);
            }
        }
        let out = project_out_positions(&b, &b, 1).unwrap();
        let reduced = svd_clutter_reduce(&b, &ClutterReductionSpec { n_remove: 1 }).unwrap();
        assert!((&out.data - &reduced.data).norm() < 1e-9 * b.data.norm());
    }
}
