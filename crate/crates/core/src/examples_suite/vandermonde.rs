use num_traits::Num;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::mc::{MCEstimate, McPlan};
use crate::sde::{simulate_free_bm, simulate_hermitian_spectrum, MAX_DYSON_DIM};

use super::anchored;

/// Off-diagonal variance under which the matrix spectrum is Brownian motion
/// conditioned by the Vandermonde determinant.
pub const VANDERMONDE_TRANSFORM_VARIANCE: f64 = 0.5;

const IDENTITY_TOL: f64 = 1e-10;

/// `∏_{i<j} (x_j − x_i)`; the empty product is 1.
pub fn vandermonde<T: Num + Copy>(x: &[T]) -> T {
    let mut p = T::one();
    for (i, &a) in x.iter().enumerate() {
        for &b in &x[i + 1..] {
            p = p * (b - a);
        }
    }
    p
}

fn require_distinct<T: Num + Copy>(x: &[T]) -> Result<()> {
    for (i, a) in x.iter().enumerate() {
        if x[i + 1..].iter().any(|b| b == a) {
            return Err(Error::arg("Vandermonde nodes must be distinct"));
        }
    }
    Ok(())
}

/// Inverse of `A = (x_i^j)`, indexed `[power][node]`: column `i` holds the
/// coefficients of the Lagrange basis polynomial of node `i`.
pub fn vandermonde_inverse<T: Num + Copy>(x: &[T]) -> Result<Vec<Vec<T>>> {
    require_distinct(x)?;
    let n = x.len();
    let mut inv = vec![vec![T::zero(); n]; n];
    for (i, &xi) in x.iter().enumerate() {
        let mut poly = vec![T::one()];
        let mut denom = T::one();
        for (j, &xj) in x.iter().enumerate() {
            if j == i {
                continue;
            }
            let mut next = vec![T::zero(); poly.len() + 1];
            for (k, &c) in poly.iter().enumerate() {
                next[k + 1] = next[k + 1] + c;
                next[k] = next[k] - xj * c;
            }
            poly = next;
            denom = denom * (xi - xj);
        }
        for (k, c) in poly.into_iter().enumerate() {
            inv[k][i] = c / denom;
        }
    }
    Ok(inv)
}

/// Last row of `A^{-1}` from cofactors: `(−1)^{i+n} Δ_{n−1}(x without x_i) / Δ_n(x)`
/// with 1-based `i`.
pub fn vandermonde_inverse_last_row<T: Num + Copy>(x: &[T]) -> Result<Vec<T>> {
    require_distinct(x)?;
    let n = x.len();
    let full = vandermonde(x);
    Ok((0..n)
        .map(|i| {
            let minor: Vec<T> = x
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| v)
                .collect();
            let cof = vandermonde(&minor) / full;
            if (i + 1 + n).is_multiple_of(2) {
                cof
            } else {
                T::zero() - cof
            }
        })
        .collect())
}

fn identity_residual(x: &[f64], inv: &[Vec<f64>]) -> f64 {
    let n = x.len();
    let mut worst = 0.0f64;
    for (r, &xr) in x.iter().enumerate() {
        for c in 0..n {
            let mut acc = 0.0;
            let mut pow = 1.0;
            for row in inv.iter() {
                acc += pow * row[c];
                pow *= xr;
            }
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((acc - target).abs());
        }
    }
    worst
}

fn check_dims(m: usize, start: &[f64]) -> Result<()> {
    let n = start.len();
    if !(1 <= m && m < n && n <= MAX_DYSON_DIM) {
        return Err(Error::arg(format!(
            "need 1 <= m < n <= {MAX_DYSON_DIM}, got m = {m}, n = {n}"
        )));
    }
    if start.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::arg("start must be strictly increasing"));
    }
    Ok(())
}

fn strictly_ordered(state: &[f64]) -> bool {
    state.windows(2).all(|w| w[1] > w[0])
}

/// `E[Δ_m(λ_t) / Δ_n(λ_t)]` along the conditioned spectrum, where `Δ_m` uses
/// the `m` smallest eigenvalues.
pub fn dyson_ratio_expectation(
    m: usize,
    start: &[f64],
    t_grid: &TimeGrid<f64>,
    plan: &McPlan,
) -> Result<Vec<(f64, MCEstimate)>> {
    check_dims(m, start)?;
    let (grid, idx) = anchored(t_grid)?;
    let est = plan.estimate(idx.len(), |src, row| {
        let p = simulate_hermitian_spectrum(start, VANDERMONDE_TRANSFORM_VARIANCE, &grid, src)?;
        for (slot, &k) in row.iter_mut().zip(&idx) {
            let lam = p.state(k);
            if !strictly_ordered(lam) {
                return Err(Error::Diagnostics(format!("eigenvalues collided at t = {}", grid.times()[k])));
            }
            *slot = vandermonde(&lam[..m]) / vandermonde(lam);
        }
        Ok(())
    })?;
    Ok(t_grid.times().iter().copied().zip(est).collect())
}

/// `E[Δ_n(W_t)]` for independent Brownian coordinates started at `start`.
pub fn vandermonde_control(start: &[f64], t_grid: &TimeGrid<f64>, plan: &McPlan) -> Result<Vec<(f64, MCEstimate)>> {
    check_dims(1, start)?;
    let (grid, idx) = anchored(t_grid)?;
    let est = plan.estimate(idx.len(), |src, row| {
        let coords = start
            .iter()
            .map(|&x| simulate_free_bm(x, &grid, src))
            .collect::<Result<Vec<_>>>()?;
        let mut w = vec![0.0; start.len()];
        for (slot, &k) in row.iter_mut().zip(&idx) {
            for (wi, c) in w.iter_mut().zip(&coords) {
                *wi = c.scalar(k);
            }
            *slot = vandermonde(&w);
        }
        Ok(())
    })?;
    Ok(t_grid.times().iter().copied().zip(est).collect())
}

/// `E|A_t^{-1}(n, i)|` for the Vandermonde matrix of the conditioned spectrum,
/// from the cofactor formula.
///
/// Every path and grid time is also checked against the Lagrange inverse:
/// `A A^{-1}` must be the identity and the last rows must agree, both to
/// `1e-10`, or a diagnostics error is returned.
pub fn inverse_entry_expectation(
    i: usize,
    start: &[f64],
    t_grid: &TimeGrid<f64>,
    plan: &McPlan,
) -> Result<Vec<(f64, MCEstimate)>> {
    check_dims(1, start)?;
    let n = start.len();
    if !(1..=n).contains(&i) {
        return Err(Error::arg(format!("column index {i} outside 1..={n}")));
    }
    let (grid, idx) = anchored(t_grid)?;
    let est = plan.estimate(idx.len(), |src, row| {
        let p = simulate_hermitian_spectrum(start, VANDERMONDE_TRANSFORM_VARIANCE, &grid, src)?;
        for (slot, &k) in row.iter_mut().zip(&idx) {
            let lam = p.state(k);
            let last = vandermonde_inverse_last_row(lam)?;
            let inv = vandermonde_inverse(lam)?;
            let residual = identity_residual(lam, &inv);
            let mismatch = last
                .iter()
                .zip(&inv[n - 1])
                .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
                .fold(0.0, f64::max);
            if residual > IDENTITY_TOL || mismatch > IDENTITY_TOL {
                return Err(Error::Diagnostics(format!(
                    "adjugate check failed: residual {residual:e}, cofactor mismatch {mismatch:e}"
                )));
            }
            *slot = last[i - 1].abs();
        }
        Ok(())
    })?;
    Ok(t_grid.times().iter().copied().zip(est).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    #[test]
    fn vandermonde_small_cases() {
        assert_eq!(vandermonde(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(vandermonde(&[5.0]), 1.0);
        assert_eq!(vandermonde::<f64>(&[]), 1.0);
        assert_eq!(vandermonde(&[1.0, 4.0, 1.0]), 0.0);
        assert_eq!(vandermonde(&[2i64, 5, 11]), 3 * 9 * 6);
    }

    #[test]
    fn swapping_two_nodes_flips_sign() {
        let x = [0.3, -1.2, 2.5, 0.9];
        let mut y = x;
        y.swap(1, 3);
        assert_eq!(vandermonde(&x), -vandermonde(&y));
    }

    #[test]
    fn exact_inverse_over_rationals() {
        let x: Vec<Ratio<i64>> = [-2, 1, 3, 7].iter().map(|&v| Ratio::from_integer(v)).collect();
        let inv = vandermonde_inverse(&x).unwrap();
        for (r, &xr) in x.iter().enumerate() {
            for c in 0..x.len() {
                let mut acc = Ratio::from_integer(0);
                let mut pow = Ratio::from_integer(1);
                for row in &inv {
                    acc += pow * row[c];
                    pow *= xr;
                }
                let want = if r == c { 1 } else { 0 };
                assert_eq!(acc, Ratio::from_integer(want));
            }
        }
        assert_eq!(vandermonde_inverse_last_row(&x).unwrap(), inv[3]);
    }

    #[test]
    fn last_row_is_reciprocal_node_products() {
        let x = [-1.0, 0.5, 2.0];
        let last = vandermonde_inverse_last_row(&x).unwrap();
        for (i, &xi) in x.iter().enumerate() {
            let p: f64 = x
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| xi - xj)
                .product();
            assert!((last[i] - 1.0 / p).abs() < 1e-14);
        }
    }

    #[test]
    fn repeated_nodes_rejected() {
        assert!(vandermonde_inverse(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn dimension_checks() {
        let g = TimeGrid::from_times(vec![0.0, 0.1]).unwrap();
        let plan = McPlan::new(4, 1);
        assert!(dyson_ratio_expectation(3, &[-1.0, 0.0, 1.0], &g, &plan).is_err());
        assert!(dyson_ratio_expectation(0, &[-1.0, 0.0, 1.0], &g, &plan).is_err());
        assert!(dyson_ratio_expectation(2, &[-1.0, 1.0, 0.0], &g, &plan).is_err());
        assert!(inverse_entry_expectation(4, &[-1.0, 0.0, 1.0], &g, &plan).is_err());
    }

    #[test]
    fn ratio_starts_at_its_initial_value() {
        let g = TimeGrid::from_times(vec![0.0, 0.1]).unwrap();
        let r = dyson_ratio_expectation(2, &[-1.0, 0.0, 1.0], &g, &McPlan::new(8, 1)).unwrap();
        assert_eq!(r[0].1.mean, 0.5);
    }
}
