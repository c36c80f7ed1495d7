//! Robust M-estimation: soft trimming.
//!
//! Hard metric trimming (`ρ(x) = x` below the radius, else 0) is
//! discontinuous at the boundary; the soft form `ρ(x) = x·[1 - (x/θ_r)²]²`
//! decays to exactly zero at `±θ_r` and stays continuous everywhere.

/// Soft-trimmed value of `x` with trimming radius `theta_r` (> 0).
pub fn soft_trim(x: f64, theta_r: f64) -> f64 {
    debug_assert!(theta_r > 0.0, "theta_r must be > 0");
    if x.abs() > theta_r {
        return 0.0;
    }
    let r = x / theta_r;
    let w = 1.0 - r * r;
    x * w * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_and_boundary() {
        assert_eq!(soft_trim(0.0, 1.0), 0.0);
        assert_eq!(soft_trim(1.0, 1.0), 0.0);
        assert_eq!(soft_trim(-1.0, 1.0), 0.0);
        assert_eq!(soft_trim(5.0, 1.0), 0.0);
    }

    #[test]
    fn symbolic_midpoint() {
        // 0.5 · (1 - 0.25)² = 0.28125
        assert_eq!(soft_trim(0.5, 1.0), 0.28125);
    }

    #[test]
    fn continuity_under_grid_refinement() {
        // Max successive difference shrinks with the grid step.
        let theta = 1.0;
        let mut last = f64::INFINITY;
        for steps in [1_000usize, 10_000, 100_000] {
            let mut max_jump: f64 = 0.0;
            let mut prev = soft_trim(-2.0, theta);
            for i in 1..=steps {
                let x = -2.0 + 4.0 * i as f64 / steps as f64;
                let v = soft_trim(x, theta);
                max_jump = max_jump.max((v - prev).abs());
                prev = v;
            }
            assert!(max_jump < last);
            last = max_jump;
        }
        assert!(last < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn odd_function(x in -1e3f64..1e3, theta in 1e-6f64..1e3) {
            let a = soft_trim(x, theta);
            let b = soft_trim(-x, theta);
            prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn magnitude_bounded_by_input(x in -1e6f64..1e6, theta in 1e-6f64..1e6) {
            prop_assert!(soft_trim(x, theta).abs() <= x.abs() + f64::EPSILON);
        }

        #[test]
        fn zero_outside_radius(x in 1f64..1e6, theta in 1e-6f64..0.99) {
            prop_assert_eq!(soft_trim(x, theta), 0.0);
        }
    }
}
