//! Extremes of a Brownian bridge.
//!
//! For a Brownian bridge from `x` to `y` with total variance `var`,
//! `P(min <= a) = exp(-2 (x - a)(y - a) / var)` for `a <= min(x, y)`.
//! Inverting this with one uniform gives the exact minimum, which decides every
//! level crossing on the interval at once.

/// Minimum of the Brownian bridge from `x` to `y` with variance `var`, driven by `u` in (0, 1).
#[inline]
pub fn bridge_minimum(x: f64, y: f64, var: f64, u: f64) -> f64 {
    let d = x - y;
    0.5 * (x + y - (d * d - 2.0 * var * u.ln()).sqrt())
}

/// Maximum of the Brownian bridge from `x` to `y` with variance `var`, driven by `u` in (0, 1).
#[inline]
pub fn bridge_maximum(x: f64, y: f64, var: f64, u: f64) -> f64 {
    let d = x - y;
    0.5 * (x + y + (d * d - 2.0 * var * u.ln()).sqrt())
}

/// Probability that a Brownian bridge between two points at distances `d0`, `d1`
/// from a flat boundary touches it. One if either endpoint is already across.
#[inline]
pub fn crossing_probability(d0: f64, d1: f64, var: f64) -> f64 {
    if d0 <= 0.0 || d1 <= 0.0 {
        1.0
    } else {
        (-2.0 * d0 * d1 / var).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimum_is_below_both_endpoints() {
        for &(x, y) in &[(1.0, 2.0), (0.3, -0.1), (5.0, 5.0)] {
            for &u in &[1e-9, 0.1, 0.5, 0.999_999] {
                let m = bridge_minimum(x, y, 0.7, u);
                assert!(m <= x.min(y) + 1e-15);
                assert!(bridge_maximum(x, y, 0.7, u) >= x.max(y) - 1e-15);
            }
        }
    }

    #[test]
    fn minimum_inverts_crossing_law() {
        let (x, y, var) = (1.0, 0.6, 0.25);
        for &a in &[0.5, 0.2, -0.3] {
            let p = crossing_probability(x - a, y - a, var);
            // u = p sits exactly on level a.
            assert!((bridge_minimum(x, y, var, p) - a).abs() < 1e-12);
        }
    }
}
