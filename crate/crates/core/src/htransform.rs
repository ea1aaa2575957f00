//! Change of measure between a nonnegative martingale law `Q` and the
//! locally dominated law `P` defined by the density process `h`.
//!
//! For a `Q`-martingale `f`, the ratio `N = f / h` is a `P`-local martingale and
//! `E^P N_t = E^Q[f_t 1{τ0 > t}]`, where `τ0` is the first zero of `h`. All
//! `P`-side expectations here are computed from `Q`-paths through that
//! identity, or compared against direct simulation of the `P`-law when one is
//! available.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::mc::{MCEstimate, McPlan};
use crate::path::AbsorbedPath;
use crate::sde::bridge::{bridge_maximum, bridge_minimum};
use crate::sde::{observation_grid, ProcessModel};

/// Function of the current state.
pub type StateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// First grid index at which `h` vanishes, if any.
pub type AbsorptionFn = Arc<dyn Fn(&AbsorbedPath) -> Option<usize> + Send + Sync>;
/// Payoff on `(0, ∞)`.
pub type Payoff = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Significance multiplier used for every strictness verdict.
pub const VERDICT_SIGMAS: f64 = 3.0;

/// A `Q`-model with density martingale `h` (`h_0 = 1`) and numerator martingale `f`.
#[derive(Clone)]
pub struct TransformPair {
    pub q_model: ProcessModel,
    f: StateFn,
    h: StateFn,
    tau0: AbsorptionFn,
    /// Law of `N` under `P`, when it can be simulated directly.
    r_model: Option<ProcessModel>,
    horizon: f64,
    steps: usize,
}

impl fmt::Debug for TransformPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransformPair")
            .field("q_model", &self.q_model)
            .field("r_model", &self.r_model)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl TransformPair {
    /// Pair with `τ0` read from the path's own absorption index.
    pub fn new(q_model: ProcessModel, f: StateFn, h: StateFn) -> Self {
        Self {
            q_model,
            f,
            h,
            tau0: Arc::new(|p: &AbsorbedPath| p.absorption_index()),
            r_model: None,
            horizon: f64::INFINITY,
            steps: 1,
        }
    }

    /// `Q` = Brownian motion from 1 killed at 0, `h = B`, `f ≡ 1`. Under `P`,
    /// `N = 1/B` is the inverse Bessel process from 1.
    pub fn inverse_bessel() -> Self {
        Self::inverse_bessel_from(1.0)
    }

    /// Inverse Bessel process from `x0`: `Q` is Brownian motion from `1/x0`
    /// killed at 0, `h = x0 B` and `f ≡ x0`, so that `N = 1/B`.
    pub fn inverse_bessel_from(x0: f64) -> Self {
        Self::new(
            ProcessModel::AbsorbedBm { x0: 1.0 / x0 },
            Arc::new(move |_| x0),
            Arc::new(move |s| x0 * s[0]),
        )
        .with_coordinate_law(ProcessModel::InverseBes3 { x0 })
    }

    /// Same measure change with `f = h`, so `N ≡ 1`.
    pub fn stopped_density(x0: f64) -> Self {
        Self::new(
            ProcessModel::AbsorbedBm { x0 },
            Arc::new(move |s| s[0] / x0),
            Arc::new(move |s| s[0] / x0),
        )
    }

    /// Absorbed BM from `x0` with `h = B/x0` and constant numerator `f ≡ 1`.
    pub fn absorbed_bm(x0: f64) -> Self {
        Self::new(
            ProcessModel::AbsorbedBm { x0 },
            Arc::new(|_| 1.0),
            Arc::new(move |s| s[0] / x0),
        )
    }

    /// GBM with `h = S / s0`, which never vanishes.
    pub fn gbm(sigma: f64) -> Self {
        Self::new(
            ProcessModel::Gbm { s0: 1.0, sigma },
            Arc::new(|_| 1.0),
            Arc::new(|s| s[0]),
        )
        .with_coordinate_law(ProcessModel::Gbm { s0: 1.0, sigma })
    }

    pub fn with_coordinate_law(mut self, model: ProcessModel) -> Self {
        self.r_model = Some(model);
        self
    }

    pub fn with_tau0(mut self, tau0: AbsorptionFn) -> Self {
        self.tau0 = tau0;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    /// Number of simulation steps per requested time interval.
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps.max(1);
        self
    }

    pub fn r_model(&self) -> Option<&ProcessModel> {
        self.r_model.as_ref()
    }

    pub fn tau0(&self, path: &AbsorbedPath) -> Option<usize> {
        (self.tau0)(path)
    }

    /// `h` along the path, forced to zero from `τ0` on.
    pub fn h_at(&self, path: &AbsorbedPath, k: usize) -> f64 {
        match self.tau0(path) {
            Some(a) if a <= k => 0.0,
            _ => (self.h)(path.state(k)),
        }
    }

    pub fn f_at(&self, path: &AbsorbedPath, k: usize) -> f64 {
        (self.f)(path.state(k))
    }

    fn check_times(&self, ts: &[f64]) -> Result<()> {
        if ts.is_empty() {
            return Err(Error::arg("need at least one time"));
        }
        for &t in ts {
            if !(t > 0.0) {
                return Err(Error::arg(format!("times must be positive, got {t}")));
            }
            if t > self.horizon {
                return Err(Error::arg(format!(
                    "time {t} exceeds the simulated horizon {}",
                    self.horizon
                )));
            }
        }
        Ok(())
    }

    /// Grid starting at 0 that contains every requested time, plus the index of each.
    fn grid_for(&self, ts: &[f64]) -> Result<(Arc<TimeGrid<f64>>, Vec<usize>)> {
        let t_max = ts.iter().cloned().fold(0.0, f64::max);
        let min_gap = {
            let mut s: Vec<f64> = ts.to_vec();
            s.push(0.0);
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            s.windows(2)
                .map(|w| w[1] - w[0])
                .filter(|d| *d > 0.0)
                .fold(t_max, f64::min)
        };
        let grid = TimeGrid::covering(ts, min_gap / self.steps as f64)?;
        let idx = ts
            .iter()
            .map(|&t| grid.index_of(t).expect("covering grid contains marks"))
            .collect();
        Ok((Arc::new(grid), idx))
    }
}

fn time_list(ts: &[f64]) -> Vec<f64> {
    ts.to_vec()
}

/// `E^P N_t` at several times, estimated as `E^Q[f_t 1{τ0 > t}]` on common `Q`-paths.
pub fn p_expectation_profile(pair: &TransformPair, ts: &[f64], plan: &McPlan) -> Result<Vec<(f64, MCEstimate)>> {
    pair.check_times(ts)?;
    let (grid, idx) = pair.grid_for(ts)?;
    let est = plan.estimate(ts.len(), |src, row| {
        let path = pair.q_model.simulate(&grid, src)?;
        let tau = pair.tau0(&path);
        for (slot, &k) in row.iter_mut().zip(&idx) {
            let alive = tau.is_none_or(|a| a > k);
            *slot = if alive { pair.f_at(&path, k) } else { 0.0 };
        }
        Ok(())
    })?;
    Ok(time_list(ts).into_iter().zip(est).collect())
}

/// `E^P N_t = E^Q[f_t 1{τ0 > t}]`, simulated under `Q` only.
pub fn p_expectation_of_n(pair: &TransformPair, t: f64, plan: &McPlan) -> Result<MCEstimate> {
    Ok(p_expectation_profile(pair, &[t], plan)?[0].1)
}

/// Limit of `g(x) = x h(1/x)` at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eta {
    Finite(f64),
    Infinite,
}

/// Decreasing positive points at which `g` is probed when estimating `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGrid {
    points: Vec<f64>,
}

impl ProbeGrid {
    /// Geometric points `2^-first, 2^-(first+1), ..., 2^-last`.
    pub fn dyadic(first: i32, last: i32) -> Result<Self> {
        if last < first + 3 {
            return Err(Error::arg("probe grid needs at least four points"));
        }
        Ok(Self {
            points: (first..=last).map(|j| 2f64.powi(-j)).collect(),
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self::dyadic(8, 64).expect("static probe grid")
    }
}

const ETA_TOL: f64 = 1e-6;
const ETA_DIVERGENCE: f64 = 1e8;

/// A payoff `h` with its inverted companion `g(x) = x h(1/x)` and `eta = lim_{x→0+} g(x)`.
#[derive(Clone)]
pub struct PayoffTransform {
    h_payoff: Payoff,
    eta: Eta,
}

impl fmt::Debug for PayoffTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PayoffTransform").field("eta", &self.eta).finish_non_exhaustive()
    }
}

impl PayoffTransform {
    pub fn eta(&self) -> Eta {
        self.eta
    }

    pub fn h(&self, x: f64) -> f64 {
        (self.h_payoff)(x)
    }

    pub fn g(&self, x: f64) -> f64 {
        x * (self.h_payoff)(1.0 / x)
    }

    /// `g` extended continuously to `[0, ∞)`. Panics if `eta` is infinite.
    pub fn g_bar(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.g(x)
        } else {
            match self.eta {
                Eta::Finite(e) => e,
                Eta::Infinite => panic!("g has no finite extension at zero"),
            }
        }
    }
}

/// Builds `g` and estimates `eta` from the smallest probe points.
///
/// Successive differences of `g` along the geometric probe are fitted to
/// `eta + c x^p` (Aitken extrapolation); the last three extrapolants must agree.
/// Growth without bound is flagged as `Eta::Infinite`.
pub fn payoff_transform(h_payoff: Payoff, probe: &ProbeGrid) -> Result<PayoffTransform> {
    let xs = probe.points();
    let gs: Vec<f64> = xs.iter().map(|&x| x * h_payoff(1.0 / x)).collect();
    if gs.iter().any(|g| g.is_nan()) {
        return Err(Error::EtaUndetermined("payoff is undefined on the probe grid".into()));
    }
    let tail = &gs[gs.len() - 6.min(gs.len())..];
    let last = *tail.last().unwrap();
    let growing = tail.windows(2).all(|w| w[1].abs() > w[0].abs());
    if last.is_infinite() || (growing && last.abs() > ETA_DIVERGENCE) {
        return Ok(PayoffTransform {
            h_payoff,
            eta: Eta::Infinite,
        });
    }
    let aitken: Vec<f64> = tail
        .windows(3)
        .map(|w| {
            let d1 = w[1] - w[0];
            let d2 = w[2] - w[1];
            let scale = w[2].abs().max(1.0);
            if d2.abs() <= 1e-15 * scale || (d1 - d2).abs() <= 1e-15 * scale {
                w[2]
            } else {
                w[2] - d2 * d2 / (d2 - d1)
            }
        })
        .collect();
    let a = &aitken[aitken.len() - 3..];
    let est = a[2];
    let spread = a.iter().fold(0.0f64, |m, v| m.max((v - est).abs()));
    if !est.is_finite() || spread > ETA_TOL * est.abs().max(1.0) {
        return Err(Error::EtaUndetermined(format!(
            "extrapolants {a:?} do not agree"
        )));
    }
    let eta = if est.abs() <= ETA_TOL { 0.0 } else { est };
    Ok(PayoffTransform {
        h_payoff,
        eta: Eta::Finite(eta),
    })
}

/// Both sides of `E^R h(X_t) = E^Q ḡ(X_t) - η Q(τ0 <= t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualEstimate {
    /// Direct simulation of the strict local martingale.
    pub lhs: MCEstimate,
    /// From `Q`-paths of the density coordinate.
    pub rhs: MCEstimate,
}

impl DualEstimate {
    pub fn z(&self) -> f64 {
        crate::mc::joint_z(&self.lhs, &self.rhs)
    }
}

/// Estimates both sides of the payoff duality at time `t` on independent samples.
pub fn dual_expectation(
    pair: &TransformPair,
    transform: &PayoffTransform,
    t: f64,
    plan: &McPlan,
) -> Result<DualEstimate> {
    let eta = match transform.eta() {
        Eta::Finite(e) => e,
        Eta::Infinite => {
            return Err(Error::UnsupportedPayoff(
                "x h(1/x) diverges at zero, so the duality has no finite correction".into(),
            ))
        }
    };
    let r_model = pair
        .r_model()
        .ok_or_else(|| Error::arg("pair has no directly simulable coordinate law"))?;
    pair.check_times(&[t])?;
    let (grid, idx) = pair.grid_for(&[t])?;
    let k = idx[0];
    let lhs = plan.estimate(1, |src, row| {
        let p = r_model.simulate(&grid, src)?;
        row[0] = transform.h(p.scalar(k));
        Ok(())
    })?[0];
    let rhs = plan.side(1).estimate(1, |src, row| {
        let p = pair.q_model.simulate(&grid, src)?;
        let x = pair.h_at(&p, k);
        let dead = pair.tau0(&p).is_some_and(|a| a <= k);
        row[0] = transform.g_bar(x) - if dead { eta } else { 0.0 };
        Ok(())
    })?[0];
    Ok(DualEstimate { lhs, rhs })
}

/// `E^R h(X_t)` at several times on common paths of the coordinate law.
pub fn r_expectation_profile(
    pair: &TransformPair,
    payoff: &Payoff,
    ts: &[f64],
    plan: &McPlan,
) -> Result<Vec<(f64, MCEstimate)>> {
    let r_model = pair
        .r_model()
        .ok_or_else(|| Error::arg("pair has no directly simulable coordinate law"))?;
    pair.check_times(ts)?;
    let (grid, idx) = pair.grid_for(ts)?;
    let est = plan.estimate(ts.len(), |src, row| {
        let p = r_model.simulate(&grid, src)?;
        for (slot, &k) in row.iter_mut().zip(&idx) {
            *slot = payoff(p.scalar(k));
        }
        Ok(())
    })?;
    Ok(time_list(ts).into_iter().zip(est).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Defect at the horizon exceeds three standard errors.
    StrictOnHorizon,
    ConsistentWithMartingale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectReport {
    /// `(t, N_0 - E^P N_t)` pairs in the order requested.
    pub points: Vec<(f64, MCEstimate)>,
    /// Classification at the largest requested time.
    pub verdict: Verdict,
}

/// Martingale defect `N_0 - E^P N_t = E^Q[f_t 1{τ0 <= t}]` on common `Q`-paths.
/// For the inverse Bessel process from 1 this is `Q(τ0 <= t)`.
pub fn martingale_defect(pair: &TransformPair, ts: &[f64], plan: &McPlan) -> Result<DefectReport> {
    pair.check_times(ts)?;
    let (grid, idx) = pair.grid_for(ts)?;
    let est = plan.estimate(ts.len(), |src, row| {
        let p = pair.q_model.simulate(&grid, src)?;
        let tau = pair.tau0(&p);
        for (slot, &k) in row.iter_mut().zip(&idx) {
            *slot = if tau.is_some_and(|a| a <= k) { pair.f_at(&p, k) } else { 0.0 };
        }
        Ok(())
    })?;
    let points: Vec<(f64, MCEstimate)> = time_list(ts).into_iter().zip(est).collect();
    let (_, at_horizon) = points
        .iter()
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .copied()
        .unwrap();
    let verdict = if at_horizon.mean > VERDICT_SIGMAS * at_horizon.stderr {
        Verdict::StrictOnHorizon
    } else {
        Verdict::ConsistentWithMartingale
    };
    Ok(DefectReport { points, verdict })
}

/// Barrier-stopped call prices `E[(S_{T∧T_n} - K)^+]`, `T_n = inf{t : S_t >= n}`.
///
/// Barrier hitting is decided by the exact Brownian-bridge extreme over
/// `[0, T]`. For the inverse Bessel process the expectation is taken under the
/// killed Brownian law through the density `h`, where `S >= n` becomes `B <= 1/n`.
pub fn madan_yor_price(
    model: &ProcessModel,
    strike: f64,
    maturity: f64,
    barriers: &[f64],
    plan: &McPlan,
) -> Result<Vec<(f64, MCEstimate)>> {
    model.validate()?;
    if !(strike > 0.0) || !(maturity > 0.0) {
        return Err(Error::arg("strike and maturity must be positive"));
    }
    if barriers.is_empty() || barriers.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::arg("barriers must be a nonempty increasing list"));
    }
    let s0 = model.start_value();
    if barriers[0] <= s0 || barriers[0] <= strike {
        return Err(Error::arg(format!(
            "barriers must exceed the start {s0} and the strike {strike}"
        )));
    }
    let est = match *model {
        ProcessModel::InverseBes3 { x0 } => {
            let y0 = 1.0 / x0;
            plan.estimate(barriers.len(), |src, row| {
                let end = y0 + maturity.sqrt() * src.gaussian();
                let low = bridge_minimum(y0, end, maturity, src.uniform());
                for (slot, &n) in row.iter_mut().zip(barriers) {
                    let level = 1.0 / n;
                    let b = if low <= level { level } else { end };
                    *slot = x0 * (1.0 - strike * b).max(0.0);
                }
                Ok(())
            })?
        }
        ProcessModel::Gbm { s0, sigma } => plan.estimate(barriers.len(), |src, row| {
            let var = sigma * sigma * maturity;
            let end = var.sqrt() * src.gaussian() - 0.5 * var;
            let high = bridge_maximum(0.0, end, var, src.uniform());
            for (slot, &n) in row.iter_mut().zip(barriers) {
                let s = if high >= (n / s0).ln() { n } else { s0 * end.exp() };
                *slot = (s - strike).max(0.0);
            }
            Ok(())
        })?,
        _ => {
            return Err(Error::arg(
                "barrier pricing supports the inverse Bessel and GBM models",
            ))
        }
    };
    Ok(barriers.iter().copied().zip(est).collect())
}

/// `E[payoff(S_t)]` at each time in `ts`, simulating `model` directly on common paths.
pub fn price_profile(
    model: &ProcessModel,
    payoff: &Payoff,
    ts: &[f64],
    plan: &McPlan,
) -> Result<Vec<(f64, MCEstimate)>> {
    model.validate()?;
    let (grid, idx) = observation_grid(model, ts)?;
    let est = plan.estimate(ts.len(), |src, row| {
        let p = model.simulate(&grid, src)?;
        for (slot, &k) in row.iter_mut().zip(&idx) {
            *slot = payoff(p.scalar(k));
        }
        Ok(())
    })?;
    Ok(time_list(ts).into_iter().zip(est).collect())
}

/// Call payoff `(x - K)^+`.
pub fn call(strike: f64) -> Payoff {
    Arc::new(move |x| (x - strike).max(0.0))
}

/// Put payoff `(K - x)^+`.
pub fn put(strike: f64) -> Payoff {
    Arc::new(move |x| (strike - x).max(0.0))
}
