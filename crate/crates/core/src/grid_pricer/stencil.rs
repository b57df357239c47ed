/// Probabilities of the four quaternary branches.
pub const BRANCH_WEIGHTS: [f64; 4] = [0.125, 0.375, 0.375, 0.125];

/// Offsets `σ·Δw` and weights of the four-branch tree over one step.
///
/// The branches match the mean and variance of `σ·ΔW` exactly.
pub fn quaternary_branches(dt: f64, vol: f64) -> ([f64; 4], [f64; 4]) {
    let outer = vol * (3.0 * dt).sqrt();
    let inner = vol * (dt / 3.0).sqrt();
    ([-outer, -inner, inner, outer], BRANCH_WEIGHTS)
}

/// Three-point quadratic interpolation weights on nodes `j-1, j, j+1` for a
/// point at offset `ξ` (in node spacings) from node `j`.
#[inline]
pub fn interp_weights(xi: f64) -> [f64; 3] {
    let xi2 = xi * xi;
    [0.5 * (xi2 - xi), 1.0 - xi2, 0.5 * (xi2 + xi)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn branch_moments() {
        let (dt, vol) = (3.0 / 365.0, 0.047);
        let (off, w) = quaternary_branches(dt, vol);
        assert_eq!(w.iter().sum::<f64>(), 1.0);
        let mean: f64 = off.iter().zip(&w).map(|(o, p)| o * p).sum();
        assert!(mean.abs() < 1e-18);
        let second: f64 = off.iter().zip(&w).map(|(o, p)| o * o * p).sum();
        // 2·(1/8)·3σ²Δt + 2·(3/8)·σ²Δt/3 = σ²Δt
        assert!((second - vol * vol * dt).abs() < 1e-17);
    }

    #[test]
    fn weights_at_nodes() {
        assert_eq!(interp_weights(0.0), [0.0, 1.0, 0.0]);
        assert_eq!(interp_weights(1.0), [0.0, 0.0, 1.0]);
        assert_eq!(interp_weights(-1.0), [1.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn reproduces_quadratics(xi in -2.0f64..2.0, a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
            let w = interp_weights(xi);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let f = |u: f64| a + b * u + c * u * u;
            let interp = w[0] * f(-1.0) + w[1] * f(0.0) + w[2] * f(1.0);
            prop_assert!((interp - f(xi)).abs() < 1e-12);
        }
    }
}
