//! Exact-in-law simulators for the diffusion families used throughout the crate.
//!
//! Every simulator is a pure function of `(parameters, grid, random source)`
//! and samples the process exactly at the grid times:
//!
//! * absorbed Brownian motion uses Gaussian increments plus the exact bridge
//!   minimum on each step, so absorption between grid points is not missed;
//! * BES(3) is the Euclidean norm of a three-dimensional Brownian motion;
//! * BESQ uses the Poisson–Gamma representation of its noncentral chi-square
//!   transition;
//! * Dyson Brownian motion is read off as the ordered spectrum of a Hermitian
//!   Brownian matrix.

pub mod bridge;
pub mod hermitian;

use std::sync::Arc;

use num_complex::Complex;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::mc::{MCEstimate, McPlan};
use crate::path::AbsorbedPath;
use crate::rng::RandomSource;
use bridge::bridge_minimum;
use hermitian::HermitianMatrix;

/// Largest Dyson system handled.
pub const MAX_DYSON_DIM: usize = 8;

/// Dimension of a squared Bessel process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesqDimension {
    /// Feller's branching diffusion, absorbed at zero.
    Zero,
    Four,
}

impl BesqDimension {
    pub fn from_delta(delta: u32) -> Result<Self> {
        match delta {
            0 => Ok(Self::Zero),
            4 => Ok(Self::Four),
            d => Err(Error::arg(format!("unsupported BESQ dimension {d}; use 0 or 4"))),
        }
    }

    pub fn delta(self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Four => 4.0,
        }
    }
}

/// A simulable diffusion family with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessModel {
    /// Brownian motion started at `x0 > 0`, killed at 0.
    AbsorbedBm { x0: f64 },
    FreeBm { x0: f64 },
    /// Three-dimensional Bessel process from `x0 >= 0`.
    Bes3 { x0: f64 },
    /// Reciprocal of BES(3); the process itself starts at `x0 > 0`.
    InverseBes3 { x0: f64 },
    Besq { delta: BesqDimension, z: f64 },
    /// `s0 * exp(sigma W_t - sigma^2 t / 2)`.
    Gbm { s0: f64, sigma: f64 },
    /// Ordered eigenvalues of `diag(start) + ` Hermitian Brownian motion.
    Dyson { start: Vec<f64> },
    /// Alternating exponential-Brownian and inverse-Bessel unit segments.
    SplicedBubble { s0: f64 },
}

impl ProcessModel {
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::arg(format!("{what} must be positive, got {x}")))
            }
        };
        match self {
            Self::AbsorbedBm { x0 } => finite_pos(*x0, "absorbed BM start"),
            Self::FreeBm { x0 } => {
                if x0.is_finite() {
                    Ok(())
                } else {
                    Err(Error::arg("BM start must be finite"))
                }
            }
            Self::Bes3 { x0 } => {
                if *x0 >= 0.0 && x0.is_finite() {
                    Ok(())
                } else {
                    Err(Error::arg(format!("BES(3) start must be nonnegative, got {x0}")))
                }
            }
            Self::InverseBes3 { x0 } => finite_pos(*x0, "inverse Bessel start"),
            Self::Besq { z, .. } => {
                if *z >= 0.0 && z.is_finite() {
                    Ok(())
                } else {
                    Err(Error::arg(format!("BESQ start must be nonnegative, got {z}")))
                }
            }
            Self::Gbm { s0, sigma } => {
                finite_pos(*s0, "GBM start")?;
                if *sigma >= 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::arg("GBM volatility must be nonnegative"))
                }
            }
            Self::Dyson { start } => validate_dyson_start(start),
            Self::SplicedBubble { s0 } => finite_pos(*s0, "bubble start"),
        }
    }

    /// State dimension of simulated paths.
    pub fn dim(&self) -> usize {
        match self {
            Self::Dyson { start } => start.len(),
            _ => 1,
        }
    }

    /// Value at time zero (first coordinate for Dyson).
    pub fn start_value(&self) -> f64 {
        match self {
            Self::AbsorbedBm { x0 }
            | Self::FreeBm { x0 }
            | Self::Bes3 { x0 }
            | Self::InverseBes3 { x0 } => *x0,
            Self::Besq { z, .. } => *z,
            Self::Gbm { s0, .. } | Self::SplicedBubble { s0 } => *s0,
            Self::Dyson { start } => start[0],
        }
    }

    /// Draws one path on `grid`.
    pub fn simulate(&self, grid: &Arc<TimeGrid<f64>>, src: &mut RandomSource) -> Result<AbsorbedPath> {
        match self {
            Self::AbsorbedBm { x0 } => simulate_absorbed_bm(*x0, grid, src),
            Self::FreeBm { x0 } => simulate_free_bm(*x0, grid, src),
            Self::Bes3 { x0 } => simulate_bes3(*x0, grid, src),
            Self::InverseBes3 { x0 } => simulate_inverse_bes3(*x0, grid, src),
            Self::Besq { delta, z } => simulate_besq(*delta, *z, grid, src),
            Self::Gbm { s0, sigma } => simulate_gbm(*s0, *sigma, grid, src),
            Self::Dyson { start } => simulate_dyson(start, grid, src),
            Self::SplicedBubble { s0 } => simulate_spliced_bubble(grid, src, *s0),
        }
    }
}

/// Grid from 0 through every time in `ts`, extended to cover any span the model needs.
pub fn observation_grid(model: &ProcessModel, ts: &[f64]) -> Result<(Arc<TimeGrid<f64>>, Vec<usize>)> {
    if ts.is_empty() || ts.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::arg("times must be positive and finite"));
    }
    let mut marks = ts.to_vec();
    if matches!(model, ProcessModel::SplicedBubble { .. }) {
        marks.push(2.0);
    }
    let grid = TimeGrid::covering(&marks, f64::MAX)?;
    let idx = ts
        .iter()
        .map(|&t| grid.index_of(t).expect("covering grid contains marks"))
        .collect();
    Ok((Arc::new(grid), idx))
}

/// Mean of every state coordinate at each time in `ts`, on common paths.
pub fn mean_profile(model: &ProcessModel, ts: &[f64], plan: &McPlan) -> Result<Vec<(f64, Vec<MCEstimate>)>> {
    model.validate()?;
    let (grid, idx) = observation_grid(model, ts)?;
    let d = model.dim();
    let est = plan.estimate(d * ts.len(), |src, row| {
        let p = model.simulate(&grid, src)?;
        for (slot, &k) in row.chunks_exact_mut(d).zip(&idx) {
            slot.copy_from_slice(p.state(k));
        }
        Ok(())
    })?;
    Ok(ts.iter().copied().zip(est.chunks_exact(d).map(|c| c.to_vec())).collect())
}

fn validate_dyson_start(start: &[f64]) -> Result<()> {
    if !(2..=MAX_DYSON_DIM).contains(&start.len()) {
        return Err(Error::arg(format!(
            "Dyson dimension must be in 2..={MAX_DYSON_DIM}, got {}",
            start.len()
        )));
    }
    if start.iter().any(|x| !x.is_finite()) || start.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::arg("Dyson start must be strictly increasing"));
    }
    Ok(())
}

/// Brownian motion from `x0 > 0` absorbed at 0, with exact bridge detection of
/// absorption between grid points. After absorption the value is exactly 0.
pub fn simulate_absorbed_bm(
    x0: f64,
    grid: &Arc<TimeGrid<f64>>,
    src: &mut RandomSource,
) -> Result<AbsorbedPath> {
    if !(x0 > 0.0) {
        return Err(Error::arg(format!("absorbed BM needs x0 > 0, got {x0}")));
    }
    let n = grid.len();
    let mut values = vec![0.0; n];
    values[0] = x0;
    let mut absorbed = None;
    for k in 0..n - 1 {
        let dt = grid.dt(k);
        let x = values[k];
        let y = x + dt.sqrt() * src.gaussian();
        let m = bridge_minimum(x, y, dt, src.uniform());
        if m <= 0.0 {
            values[k + 1] = 0.0;
            absorbed = Some(k + 1);
            break;
        }
        values[k + 1] = y;
    }
    AbsorbedPath::from_parts(grid.clone(), 1, values, absorbed)
}

pub fn simulate_free_bm(x0: f64, grid: &Arc<TimeGrid<f64>>, src: &mut RandomSource) -> Result<AbsorbedPath> {
    let n = grid.len();
    let mut values = vec![x0; n];
    for k in 0..n - 1 {
        values[k + 1] = values[k] + grid.dt(k).sqrt() * src.gaussian();
    }
    AbsorbedPath::from_parts(grid.clone(), 1, values, None)
}

/// Norms of a three-dimensional Brownian path started at `(x0, 0, 0)`.
fn bes3_norms(x0: f64, grid: &TimeGrid<f64>, src: &mut RandomSource, out: &mut [f64]) {
    let mut w = [x0, 0.0, 0.0];
    out[0] = x0;
    for k in 0..grid.len() - 1 {
        let s = grid.dt(k).sqrt();
        for c in w.iter_mut() {
            *c += s * src.gaussian();
        }
        out[k + 1] = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    }
}

/// BES(3) from `x0 >= 0`, exact in law as the norm of a 3-d Brownian motion.
pub fn simulate_bes3(x0: f64, grid: &Arc<TimeGrid<f64>>, src: &mut RandomSource) -> Result<AbsorbedPath> {
    if !(x0 >= 0.0) {
        return Err(Error::arg(format!("BES(3) needs x0 >= 0, got {x0}")));
    }
    let mut values = vec![0.0; grid.len()];
    bes3_norms(x0, grid, src, &mut values);
    AbsorbedPath::from_parts(grid.clone(), 1, values, None)
}

/// Inverse Bessel process `1 / BES(3)` started at `x0 > 0`.
pub fn simulate_inverse_bes3(
    x0: f64,
    grid: &Arc<TimeGrid<f64>>,
    src: &mut RandomSource,
) -> Result<AbsorbedPath> {
    if !(x0 > 0.0) {
        return Err(Error::arg(format!("inverse Bessel needs x0 > 0, got {x0}")));
    }
    let mut values = vec![0.0; grid.len()];
    bes3_norms(1.0 / x0, grid, src, &mut values);
    for v in values.iter_mut() {
        *v = 1.0 / *v;
    }
    AbsorbedPath::from_parts(grid.clone(), 1, values, None)
}

/// One exact BESQ transition over a step of length `dt`.
///
/// `Z = 2 dt Gamma(delta/2 + N)` with `N ~ Poisson(z / (2 dt))`; for `delta = 0`
/// a zero Poisson count lands on the absorbing atom at 0.
pub fn besq_step(delta: BesqDimension, z: f64, dt: f64, src: &mut RandomSource) -> Result<f64> {
    let count = if z > 0.0 {
        let pois = Poisson::new(z / (2.0 * dt))
            .map_err(|e| Error::Diagnostics(format!("poisson rate: {e}")))?;
        pois.sample(src)
    } else {
        0.0
    };
    let shape = 0.5 * delta.delta() + count;
    if shape == 0.0 {
        return Ok(0.0);
    }
    let gamma = Gamma::new(shape, 1.0).map_err(|e| Error::Diagnostics(format!("gamma shape: {e}")))?;
    Ok(2.0 * dt * gamma.sample(src))
}

/// Squared Bessel process of dimension 0 or 4 from `z >= 0`, exact transitions.
pub fn simulate_besq(
    delta: BesqDimension,
    z: f64,
    grid: &Arc<TimeGrid<f64>>,
    src: &mut RandomSource,
) -> Result<AbsorbedPath> {
    if !(z >= 0.0) {
        return Err(Error::arg(format!("BESQ needs z >= 0, got {z}")));
    }
    let n = grid.len();
    let mut values = vec![0.0; n];
    values[0] = z;
    let mut absorbed = (delta == BesqDimension::Zero && z == 0.0).then_some(0);
    if absorbed.is_none() {
        for k in 0..n - 1 {
            let next = besq_step(delta, values[k], grid.dt(k), src)?;
            values[k + 1] = next;
            if delta == BesqDimension::Zero && next == 0.0 {
                absorbed = Some(k + 1);
                break;
            }
        }
    }
    AbsorbedPath::from_parts(grid.clone(), 1, values, absorbed)
}

/// Integer-dimension entry point: `delta` must be 0 or 4.
pub fn simulate_besq_delta(
    delta: u32,
    z: f64,
    grid: &Arc<TimeGrid<f64>>,
    src: &mut RandomSource,
) -> Result<AbsorbedPath> {
    simulate_besq(BesqDimension::from_delta(delta)?, z, grid, src)
}

pub fn simulate_gbm(
    s0: f64,
    sigma: f64,
    grid: &Arc<TimeGrid<f64>>,
    src: &mut RandomSource,
) -> Result<AbsorbedPath> {
    let n = grid.len();
    let mut values = vec![s0; n];
    let mut log = 0.0;
    for k in 0..n - 1 {
        let dt = grid.dt(k);
        log += sigma * dt.sqrt() * src.gaussian() - 0.5 * sigma * sigma * dt;
        values[k + 1] = s0 * log.exp();
    }
    AbsorbedPath::from_parts(grid.clone(), 1, values, None)
}

/// Adds a Hermitian Brownian increment of variance `dt` per real component:
/// real N(0, dt) on the diagonal, N(0, dt) + i N(0, dt) above it.
pub fn add_hermitian_increment(h: &mut HermitianMatrix<f64>, dt: f64, src: &mut RandomSource) {
    add_scaled_hermitian_increment(h, dt, 1.0, src);
}

/// As [`add_hermitian_increment`], with real and imaginary parts above the
/// diagonal each of variance `off_diagonal_variance * dt`.
pub fn add_scaled_hermitian_increment(
    h: &mut HermitianMatrix<f64>,
    dt: f64,
    off_diagonal_variance: f64,
    src: &mut RandomSource,
) {
    let n = h.dim();
    let s = dt.sqrt();
    let so = (off_diagonal_variance * dt).sqrt();
    for i in 0..n {
        h.add_diagonal(i, s * src.gaussian());
        for j in (i + 1)..n {
            let re = so * src.gaussian();
            let im = so * src.gaussian();
            h.add_off_diagonal(i, j, Complex::new(re, im));
        }
    }
}

/// Dyson Brownian motion from a strictly increasing start, exact in law at grid
/// times: the ordered spectrum of `diag(start) + M_t` for a Hermitian Brownian
/// matrix `M`.
pub fn simulate_dyson(start: &[f64], grid: &Arc<TimeGrid<f64>>, src: &mut RandomSource) -> Result<AbsorbedPath> {
    simulate_hermitian_spectrum(start, 1.0, grid, src)
}

/// Ordered spectrum of `diag(start)` plus a Hermitian Brownian matrix whose
/// off-diagonal real and imaginary parts have variance `off_diagonal_variance`
/// per unit time. With `1/2` the spectrum is Brownian motion conditioned by the
/// Vandermonde determinant, with drift `Σ 1/(λ_i − λ_j)`; with `1` the drift
/// doubles.
pub fn simulate_hermitian_spectrum(
    start: &[f64],
    off_diagonal_variance: f64,
    grid: &Arc<TimeGrid<f64>>,
    src: &mut RandomSource,
) -> Result<AbsorbedPath> {
    validate_dyson_start(start)?;
    if !(off_diagonal_variance > 0.0) {
        return Err(Error::arg("off-diagonal variance must be positive"));
    }
    let n = start.len();
    let mut h = HermitianMatrix::from_diagonal(start);
    let mut values = Vec::with_capacity(grid.len() * n);
    values.extend_from_slice(start);
    for k in 0..grid.len() - 1 {
        add_scaled_hermitian_increment(&mut h, grid.dt(k), off_diagonal_variance, src);
        values.extend(h.eigenvalues()?);
    }
    AbsorbedPath::from_parts(grid.clone(), n, values, None)
}

/// Euler scheme for the Dyson SDE `dλ_i = Σ_{j≠i} 2/(λ_i − λ_j) dt + dB_i`.
///
/// Only meant as a fine-step cross-check of [`simulate_dyson`]. Returns `None`
/// if the discretised particles cross.
pub fn dyson_euler(start: &[f64], t: f64, n_steps: usize, src: &mut RandomSource) -> Option<Vec<f64>> {
    let n = start.len();
    let dt = t / n_steps as f64;
    let s = dt.sqrt();
    let mut x = start.to_vec();
    let mut drift = vec![0.0; n];
    for _ in 0..n_steps {
        for i in 0..n {
            drift[i] = (0..n)
                .filter(|&j| j != i)
                .map(|j| 2.0 / (x[i] - x[j]))
                .sum();
        }
        for i in 0..n {
            x[i] += drift[i] * dt + s * src.gaussian();
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return None;
        }
    }
    Some(x)
}

#[derive(Clone, Copy)]
enum Segment {
    /// exp(W - t/2) with W the segment's Brownian motion.
    Exponential { w: f64 },
    /// 1 / |3-d BM started at (1, 0, 0)|.
    InverseBessel { w: [f64; 3] },
}

impl Segment {
    fn fresh(index: u64) -> Self {
        if index.is_multiple_of(2) {
            Segment::Exponential { w: 0.0 }
        } else {
            Segment::InverseBessel { w: [1.0, 0.0, 0.0] }
        }
    }

    fn advance(&mut self, dt: f64, src: &mut RandomSource) {
        let s = dt.sqrt();
        match self {
            Segment::Exponential { w } => *w += s * src.gaussian(),
            Segment::InverseBessel { w } => {
                for c in w.iter_mut() {
                    *c += s * src.gaussian();
                }
            }
        }
    }

    fn factor(&self, elapsed: f64) -> f64 {
        match self {
            Segment::Exponential { w } => (w - 0.5 * elapsed).exp(),
            Segment::InverseBessel { w } => 1.0 / (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt(),
        }
    }
}

/// Spliced bubble: on `[2i, 2i+1)` an exponential Brownian motion restarted at
/// the current level, on `[2i+1, 2i+2)` the current level times an inverse
/// Bessel process from 1. Each segment uses fresh increments.
pub fn simulate_spliced_bubble(
    grid: &Arc<TimeGrid<f64>>,
    src: &mut RandomSource,
    s0: f64,
) -> Result<AbsorbedPath> {
    if !(s0 > 0.0) {
        return Err(Error::arg(format!("bubble start must be positive, got {s0}")));
    }
    if grid.start() != 0.0 || grid.end() < 2.0 {
        return Err(Error::arg("spliced bubble grid must cover [0, 2]"));
    }
    let n = grid.len();
    let mut values = vec![s0; n];
    let mut index = 0u64;
    let mut anchor = s0;
    let mut seg = Segment::fresh(0);
    let mut now = 0.0;
    for k in 0..n - 1 {
        let target = grid.times()[k + 1];
        while now < target {
            let boundary = (index + 1) as f64;
            let stop = target.min(boundary);
            seg.advance(stop - now, src);
            now = stop;
            if now == boundary {
                anchor *= seg.factor(1.0);
                index += 1;
                seg = Segment::fresh(index);
            }
        }
        values[k + 1] = anchor * seg.factor(now - index as f64);
    }
    AbsorbedPath::from_parts(grid.clone(), 1, values, None)
}
