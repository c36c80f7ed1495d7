//! Gaussian response kernel and its polynomial approximation.
//!
//! The estimator weights neighbours by `W = e^(-d²/2σ²)`. Inside an
//! arithmetic circuit the exponential is unavailable, so the engine also
//! carries the truncated Taylor form `Σ_k (-x²/2)^k / k!` with `x = d/σ`,
//! valid on the working range `|x| ≤ 3`. [`required_terms`] picks the
//! truncation from the exact term recurrence; Stirling's bound is only a
//! sanity check on it.

use super::PodError;

/// Working range of the polynomial kernel, in units of σ.
pub const KERNEL_RANGE_SIGMAS: f64 = 3.0;

/// Exact kernel weight `e^(-d²/2σ²)`, unnormalized, in (0, 1].
pub fn gaussian_kernel_exact(distance: f64, sigma: f64) -> Result<f64, PodError> {
    if !(sigma > 0.0) {
        return Err(PodError::Domain("sigma must be > 0".into()));
    }
    let x = distance / sigma;
    Ok((-0.5 * x * x).exp())
}

/// Truncated Taylor kernel with `n_terms` retained terms (k = 0 .. n_terms-1).
///
/// The alternating tail bounds the error by the first omitted term
/// `x^(2k)/(2^k·k!)` at `k = n_terms`; 20 terms keep the error below 1e-5
/// everywhere on the working range. Callers must clamp or reject distances
/// beyond `3σ`.
pub fn gaussian_kernel_poly(distance: f64, sigma: f64, n_terms: usize) -> Result<f64, PodError> {
    if !(sigma > 0.0) {
        return Err(PodError::Domain("sigma must be > 0".into()));
    }
    if n_terms == 0 {
        return Err(PodError::Domain("n_terms must be >= 1".into()));
    }
    let x = (distance / sigma).abs();
    if x > KERNEL_RANGE_SIGMAS {
        return Err(PodError::KernelRange { x });
    }
    let neg_half_x2 = -0.5 * x * x;
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 0..n_terms {
        sum += term;
        term *= neg_half_x2 / (k + 1) as f64;
    }
    Ok(sum)
}

/// Magnitude of the k-th Taylor term, `x^(2k)/(2^k·k!)`, via the stable
/// recurrence `u_(k+1) = u_k · x²/(2(k+1))`.
pub fn taylor_term_magnitude(x: f64, k: usize) -> f64 {
    let mut u = 1.0;
    for j in 0..k {
        u *= x * x / (2.0 * (j + 1) as f64);
    }
    u
}

/// Smallest `k` whose term magnitude at `x_max` drops below `epsilon`.
///
/// Retaining terms 0..k (i.e. `k` terms) then keeps the truncation error of
/// the alternating series below `epsilon` on `[0, x_max]`.
pub fn required_terms(epsilon: f64, x_max: f64) -> usize {
    debug_assert!(epsilon > 0.0 && epsilon < 1.0);
    debug_assert!(x_max >= 0.0);
    let mut u = 1.0;
    let mut k = 0usize;
    while u >= epsilon && k < 10_000 {
        u *= x_max * x_max / (2.0 * (k + 1) as f64);
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_kernel_values() {
        assert_eq!(gaussian_kernel_exact(0.0, 2.0).unwrap(), 1.0);
        let v = gaussian_kernel_exact(2.0, 2.0).unwrap();
        assert!((v - 0.6065306597126334).abs() < 1e-12);
        let v = gaussian_kernel_exact(6.0, 2.0).unwrap();
        assert!((v - 0.011108996538242306).abs() < 1e-12);
        assert!(gaussian_kernel_exact(1.0, 0.0).is_err());
    }

    #[test]
    fn poly_kernel_at_zero_is_one() {
        for n in [1, 5, 20] {
            assert_eq!(gaussian_kernel_poly(0.0, 1.0, n).unwrap(), 1.0);
        }
    }

    #[test]
    fn poly_kernel_range_error() {
        assert!(matches!(
            gaussian_kernel_poly(3.1, 1.0, 20),
            Err(PodError::KernelRange { .. })
        ));
    }

    #[test]
    fn twenty_terms_reach_1e5_at_three_sigma() {
        let exact = gaussian_kernel_exact(3.0, 1.0).unwrap();
        let poly = gaussian_kernel_poly(3.0, 1.0, 20).unwrap();
        assert!((poly - exact).abs() < 1e-5);
    }

    #[test]
    fn nineteenth_term_still_exceeds_1e5() {
        // Term-magnitude oracle 3^(2k)/(2^k·k!): with the k = 19 term still
        // retained, the last retained term exceeds the tolerance.
        let t19 = taylor_term_magnitude(3.0, 19);
        assert!(t19 > 1e-5);
        assert!((t19 - 2.1180838095217927e-5).abs() < 1e-12, "{t19}");
    }

    #[test]
    fn required_terms_paper_point() {
        assert_eq!(required_terms(1e-5, 3.0), 20);
    }

    #[test]
    fn required_terms_degenerate_x() {
        // k = 0 term is 1, k = 1 term is 0.
        assert_eq!(required_terms(0.5, 0.0), 1);
    }

    #[test]
    fn required_terms_monotone_in_epsilon() {
        assert!(required_terms(1e-8, 3.0) >= required_terms(1e-5, 3.0));
        assert_eq!(required_terms(1e-8, 3.0), 24);
    }

    #[test]
    fn alternating_tail_bound_on_grid() {
        // |poly_through_k(x) - e^(-x²/2)| ≤ x^(2k+2)/(2^(k+1)·(k+1)!)
        // where poly_through_k retains indices 0..=k, i.e. k+1 terms.
        for k in [4usize, 8, 12, 20, 24] {
            for i in 0..10_000 {
                let x = 3.0 * i as f64 / 9_999.0;
                let poly = gaussian_kernel_poly(x, 1.0, k + 1).unwrap();
                let exact = gaussian_kernel_exact(x, 1.0).unwrap();
                let bound = taylor_term_magnitude(x, k + 1);
                assert!(
                    (poly - exact).abs() <= bound + 1e-15,
                    "k={k} x={x} err={} bound={bound}",
                    (poly - exact).abs()
                );
            }
        }
    }
}
