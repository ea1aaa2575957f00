//! Closed forms for Brownian motion absorbed at zero and for the call term
//! structure of the inverse Bessel process started at one.
//!
//! With `B` a Brownian motion from 1 killed at 0 and `X` a BES(3) from 1,
//! `h(t) = E(1/X_t - K)^+ = ∫_0^{1/K} (1 - K y) p_t(1, y) dy`, where
//! `p_t(x, y) = φ_t(y - x) - φ_t(y + x)` is the killed transition density.

use std::sync::Arc;


use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::mc::{MCEstimate, McPlan};
use crate::quad::integrate;
use crate::scalar::Scalar;
use crate::sde::{simulate_absorbed_bm, simulate_bes3};

/// Standard normal distribution function.
pub fn normal_cdf<T: Scalar>(x: T) -> T {
    T::lit(0.5 * libm::erfc(-x.as_f64() / std::f64::consts::SQRT_2))
}

/// Standard normal density.
pub fn normal_pdf<T: Scalar>(x: T) -> T {
    (-(x * x) / T::lit(2.0)).exp() / (T::lit(2.0) * T::PI()).sqrt()
}

/// `Φ(b) - Φ(a)` for `a <= b`, evaluated on whichever tail keeps precision.
fn normal_mass<T: Scalar>(a: T, b: T) -> T {
    if a > T::zero() {
        normal_cdf(-a) - normal_cdf(-b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

fn gaussian_kernel<T: Scalar>(t: T, x: T) -> T {
    (-(x * x) / (T::lit(2.0) * t)).exp() / (T::lit(2.0) * T::PI() * t).sqrt()
}

fn require_positive<T: Scalar>(x: T, what: &str) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!("{what} must be positive, got {x}")))
    }
}

/// `P(τ_0 <= t)` for Brownian motion from `x0 > 0`: `2 Φ(-x0 / √t)`.
pub fn absorption_probability<T: Scalar>(t: T, x0: T) -> Result<T> {
    require_positive(t, "t")?;
    require_positive(x0, "x0")?;
    Ok(T::lit(2.0) * normal_cdf(-x0 / t.sqrt()))
}

/// Sub-probability density of Brownian motion from `x0` killed at zero, by the
/// method of images.
pub fn absorbed_bm_density<T: Scalar>(t: T, x0: T, y: T) -> Result<T> {
    require_positive(t, "t")?;
    require_positive(x0, "x0")?;
    require_positive(y, "y")?;
    // φ_t(y - x0) - φ_t(y + x0) = φ_t(y - x0) (1 - exp(-2 x0 y / t))
    let lead = gaussian_kernel(t, y - x0);
    Ok(-lead * (-(T::lit(2.0) * x0 * y) / t).exp_m1())
}

/// Density of the first hitting time of zero for Brownian motion from `x0`.
pub fn hitting_density<T: Scalar>(t: T, x0: T) -> Result<T> {
    require_positive(t, "t")?;
    require_positive(x0, "x0")?;
    let two_pi = T::lit(2.0) * T::PI();
    Ok(x0 / (two_pi * t * t * t).sqrt() * (-(x0 * x0) / (T::lit(2.0) * t)).exp())
}

/// `∫_0^c (1 - K y) φ_t(y - a) dy` in terms of Φ and φ.
fn linear_image_integral<T: Scalar>(t: T, k: T, c: T, a: T) -> T {
    let s = t.sqrt();
    let lo = -a / s;
    let hi = (c - a) / s;
    (T::one() - k * a) * normal_mass(lo, hi) - k * s * (normal_pdf(lo) - normal_pdf(hi))
}

/// `h(t) = E(1/X_t - K)^+` for BES(3) `X` from 1.
pub fn inv_bessel_call<T: Scalar>(t: T, k: T) -> Result<T> {
    require_positive(t, "t")?;
    if !(k >= T::zero()) || !k.is_finite() {
        return Err(Error::arg(format!("strike must be nonnegative, got {k}")));
    }
    if k == T::zero() {
        return Ok(T::lit(2.0) * normal_cdf(T::one() / t.sqrt()) - T::one());
    }
    let c = T::one() / k;
    let value = linear_image_integral(t, k, c, T::one()) - linear_image_integral(t, k, c, -T::one());
    Ok(value.max(T::zero()))
}

/// Same quantity as [`inv_bessel_call`] by adaptive quadrature of the killed density.
pub fn inv_bessel_call_quadrature(t: f64, k: f64, tol: f64) -> Result<f64> {
    require_positive(t, "t")?;
    let upper = if k > 0.0 {
        1.0 / k
    } else {
        1.0 + 40.0 * t.sqrt()
    };
    // The integrand is negligible beyond 40 standard deviations from the start.
    let upper = upper.min(1.0 + 40.0 * t.sqrt());
    integrate(
        |y: f64| {
            if y <= 0.0 {
                0.0
            } else {
                (1.0 - k * y) * absorbed_bm_density(t, 1.0, y).unwrap_or(0.0)
            }
        },
        0.0,
        upper,
        tol,
    )
}

/// `d/dt E L_{t∧τ0}^a` for Brownian motion from 1, which equals the killed
/// density at the level: `p_t(1, a)`.
pub fn local_time_rate<T: Scalar>(t: T, level: T) -> Result<T> {
    absorbed_bm_density(t, T::one(), level)
}

/// `h'(t)` for the inverse Bessel call with strike `K > 0`.
pub fn inv_bessel_call_deriv<T: Scalar>(t: T, k: T) -> Result<T> {
    require_positive(t, "t")?;
    require_positive(k, "strike")?;
    let two = T::lit(2.0);
    let two_pi = two * T::PI();
    let inv_k = T::one() / k;
    let near = (T::one() - inv_k) * (T::one() - inv_k) / (two * t);
    let far = (T::one() + inv_k) * (T::one() + inv_k) / (two * t);
    // e^{-near} - e^{-far} = e^{-near} (1 - e^{near - far})
    let bracket = -(-near).exp() * (near - far).exp_m1();
    let local_time_term = k / (two * (two_pi * t).sqrt()) * bracket;
    let hitting_term = (-(T::one() / (two * t))).exp() / (two_pi * t * t * t).sqrt();
    Ok(local_time_term - hitting_term)
}

/// Time after which the inverse Bessel call price is strictly decreasing, for
/// strikes `K > 1/2`: `(K ln((2K+1)/(2K-1)))^{-1}`.
pub fn decrease_threshold<T: Scalar>(k: T) -> Result<T> {
    let half = T::lit(0.5);
    if !(k > half) || !k.is_finite() {
        return Err(Error::Domain(format!(
            "threshold defined for strikes above 1/2 (got {k}); smaller strikes decrease for all t"
        )));
    }
    let two = T::lit(2.0);
    // ln((2K+1)/(2K-1)) = ln1p(2 / (2K - 1))
    let log = (two / (two * k - T::one())).ln_1p();
    Ok(T::one() / (k * log))
}

/// European option type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

/// `E(S_t - K)^+` or `E(K - S_t)^+` for the inverse Bessel process `S` from `x0`.
///
/// Brownian scaling gives `S_t = x0 S'_{t x0²}` with `S'` started at 1, so the
/// call is `x0 h(t x0², K / x0)`; the put follows from parity with
/// `E S_t = x0 (2Φ(1/(x0 √t)) - 1)`.
pub fn inverse_bessel_price(kind: OptionKind, x0: f64, t: f64, k: f64) -> Result<f64> {
    require_positive(x0, "start")?;
    let call = x0 * inv_bessel_call(t * x0 * x0, k / x0)?;
    Ok(match kind {
        OptionKind::Call => call,
        OptionKind::Put => {
            let mean = x0 * (2.0 * normal_cdf(1.0 / (x0 * t.sqrt())) - 1.0);
            (k - mean + call).max(0.0)
        }
    })
}

/// Zero-rate Black–Scholes price for geometric Brownian motion from `s0`.
pub fn black_scholes_price(kind: OptionKind, s0: f64, sigma: f64, t: f64, k: f64) -> Result<f64> {
    require_positive(s0, "start")?;
    require_positive(t, "t")?;
    require_positive(k, "strike")?;
    if !(sigma >= 0.0) {
        return Err(Error::arg("volatility must be nonnegative"));
    }
    let sd = sigma * t.sqrt();
    if sd == 0.0 {
        return Ok(match kind {
            OptionKind::Call => (s0 - k).max(0.0),
            OptionKind::Put => (k - s0).max(0.0),
        });
    }
    let d1 = ((s0 / k).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    Ok(match kind {
        OptionKind::Call => s0 * normal_cdf(d1) - k * normal_cdf(d2),
        OptionKind::Put => k * normal_cdf(-d2) - s0 * normal_cdf(-d1),
    })
}

/// `h(t)` and `h'(t)` of the inverse Bessel call on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CallTermStructure<T: Scalar> {
    pub strike: T,
    pub t_grid: TimeGrid<T>,
    pub values: Vec<T>,
    pub derivative: Vec<T>,
}

impl<T: Scalar> CallTermStructure<T> {
    /// Requires `strike > 0` and a grid of strictly positive times.
    pub fn new(strike: T, t_grid: TimeGrid<T>) -> Result<Self> {
        if !(t_grid.start() > T::zero()) {
            return Err(Error::arg("term structure times must be positive"));
        }
        let values = t_grid
            .times()
            .iter()
            .map(|&t| inv_bessel_call(t, strike))
            .collect::<Result<Vec<_>>>()?;
        let derivative = t_grid
            .times()
            .iter()
            .map(|&t| inv_bessel_call_deriv(t, strike))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            strike,
            t_grid,
            values,
            derivative,
        })
    }

    /// Threshold time for this strike, if the strike exceeds 1/2.
    pub fn threshold(&self) -> Option<T> {
        decrease_threshold(self.strike).ok()
    }
}

/// Monte-Carlo check of the BES(3)-from-zero scaling identity
/// `E(1/X_u - K)^+ = c^{-1/2} E(1/X_t - √c K)^+`, `c = u/t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingCheck {
    /// `E(1/X_u - K)^+` estimated at time `u`.
    pub lhs: MCEstimate,
    /// `c^{-1/2} E(1/X_t - √c K)^+` estimated at time `t` on independent paths.
    pub rhs: MCEstimate,
    /// `E(1/X_t - K)^+` on the same paths as `rhs`, for the monotonicity comparison.
    pub at_t: MCEstimate,
}

pub fn bes3_from_zero_scaling_check(t: f64, u: f64, k: f64, plan: &McPlan) -> Result<ScalingCheck> {
    require_positive(t, "t")?;
    if !(u > t) {
        return Err(Error::arg("scaling check needs u > t"));
    }
    if !(k >= 0.0) {
        return Err(Error::arg("strike must be nonnegative"));
    }
    let c = u / t;
    let grid_u = Arc::new(TimeGrid::uniform(u, 1)?);
    let grid_t = Arc::new(TimeGrid::uniform(t, 1)?);
    let lhs = plan.estimate(1, |src, row| {
        let p = simulate_bes3(0.0, &grid_u, src)?;
        row[0] = (1.0 / p.scalar(1) - k).max(0.0);
        Ok(())
    })?[0];
    let scaled_k = c.sqrt() * k;
    let right = plan.side(1).estimate(2, |src, row| {
        let p = simulate_bes3(0.0, &grid_t, src)?;
        let inv = 1.0 / p.scalar(1);
        row[0] = (inv - scaled_k).max(0.0) / c.sqrt();
        row[1] = (inv - k).max(0.0);
        Ok(())
    })?;
    Ok(ScalingCheck {
        lhs,
        rhs: right[0],
        at_t: right[1],
    })
}

/// Tanaka-formula estimate of `(K/2) d/dt E L^{1/K}_{t∧τ0}` for Brownian motion
/// from 1, by a centred difference of `E|B_{s∧τ0} - 1/K|` over `[t - δ, t + δ]`
/// on common paths.
pub fn local_time_slope_mc(t: f64, k: f64, delta: f64, plan: &McPlan) -> Result<MCEstimate> {
    require_positive(k, "strike")?;
    if !(delta > 0.0 && delta < t) {
        return Err(Error::arg("difference step must lie in (0, t)"));
    }
    let level = 1.0 / k;
    let grid = Arc::new(TimeGrid::from_times(vec![0.0, t - delta, t + delta])?);
    let scale = 0.5 * k / (2.0 * delta);
    Ok(plan.estimate(1, |src, row| {
        let p = simulate_absorbed_bm(1.0, &grid, src)?;
        row[0] = scale * ((p.scalar(2) - level).abs() - (p.scalar(1) - level).abs());
        Ok(())
    })?[0])
}

/// Centred finite difference of `E(1/X_s - K)^+` over `[t - δ, t + δ]`,
/// `δ = rel_step · t`, with BES(3) from 1 and both times on common paths.
pub fn inv_bessel_call_slope_mc(t: f64, k: f64, rel_step: f64, plan: &McPlan) -> Result<MCEstimate> {
    require_positive(t, "t")?;
    if !(k >= 0.0) {
        return Err(Error::arg("strike must be nonnegative"));
    }
    if !(rel_step > 0.0 && rel_step < 1.0) {
        return Err(Error::arg("relative step must lie in (0, 1)"));
    }
    let delta = rel_step * t;
    let grid = Arc::new(TimeGrid::from_times(vec![0.0, t - delta, t + delta])?);
    Ok(plan.estimate(1, |src, row| {
        let p = simulate_bes3(1.0, &grid, src)?;
        let call = |x: f64| (1.0 / x - k).max(0.0);
        row[0] = (call(p.scalar(2)) - call(p.scalar(1))) / (2.0 * delta);
        Ok(())
    })?[0])
}
