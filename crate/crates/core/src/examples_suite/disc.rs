use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::mc::{mc_reduce, MCEstimate, McPlan};
use crate::quad::integrate;
use crate::rng::RandomSource;
use crate::sde::bridge::crossing_probability;

/// Largest time step of the planar walk inside the disc.
pub const DISC_MAX_STEP: f64 = 1e-3;
const HARMONIC_TOL: f64 = 1e-10;
/// Paths still inside the disc at this time are reported as a failure.
const MAX_EXIT_TIME: f64 = 200.0;

/// Boundary arc `{(cos θ, sin θ) : lo < θ < hi}` of the unit disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscArc {
    lo: f64,
    hi: f64,
}

impl DiscArc {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= TAU) {
            return Err(Error::arg(format!(
                "arc needs 0 <= lo < hi <= 2π, got ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn upper_half() -> Self {
        Self { lo: 0.0, hi: PI }
    }

    pub fn lower_half() -> Self {
        Self { lo: PI, hi: TAU }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Whether the boundary point at angle `theta` (any real) lies on the arc.
    pub fn contains(&self, theta: f64) -> bool {
        let a = theta.rem_euclid(TAU);
        self.lo < a && a < self.hi
    }

    /// Disjoint up to shared endpoints.
    pub fn is_disjoint(&self, other: &DiscArc) -> bool {
        self.hi <= other.lo || other.hi <= self.lo
    }
}

fn check_inside(x0: [f64; 2]) -> Result<f64> {
    let r = x0[0].hypot(x0[1]);
    if !(r < 1.0) {
        return Err(Error::arg(format!("start must lie inside the unit disc, |x0| = {r}")));
    }
    Ok(r)
}

/// Probability that planar Brownian motion from `x0` leaves the unit disc
/// through `arc`: the Poisson-kernel integral over the arc.
pub fn disc_harmonic_measure(x0: [f64; 2], arc: &DiscArc) -> Result<f64> {
    let r = check_inside(x0)?;
    if r == 0.0 {
        return Ok(arc.length() / TAU);
    }
    let phi = x0[1].atan2(x0[0]);
    let num = (1.0 - r) * (1.0 + r);
    let gap = (1.0 - r) * (1.0 - r);
    let kernel = |theta: f64| {
        let s = ((theta - phi) / 2.0).sin();
        num / (TAU * (gap + 4.0 * r * s * s))
    };
    // Split at the kernel peak so the adaptive rule sees it at a node boundary.
    let peak = phi.rem_euclid(TAU);
    let mut cuts = vec![arc.lo];
    for p in [peak - TAU, peak, peak + TAU] {
        if arc.lo < p && p < arc.hi {
            cuts.push(p);
        }
    }
    cuts.push(arc.hi);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate(kernel, w[0], w[1], HARMONIC_TOL / 2.0)?;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Walk of planar Brownian motion killed on the unit circle.
struct DiscWalk {
    pos: [f64; 2],
    now: f64,
    exit_angle: Option<f64>,
}

impl DiscWalk {
    fn new(x0: [f64; 2]) -> Self {
        Self {
            pos: x0,
            now: 0.0,
            exit_angle: None,
        }
    }

    /// Advances by `dt`, deciding exit by the half-plane bridge crossing
    /// probability against the tangent line nearest to the path.
    fn step(&mut self, dt: f64, src: &mut RandomSource) {
        let s = dt.sqrt();
        let x = self.pos;
        let y = [x[0] + s * src.gaussian(), x[1] + s * src.gaussian()];
        self.now += dt;
        let ry = (y[0] * y[0] + y[1] * y[1]).sqrt();
        if ry >= 1.0 {
            // First intersection of the segment x -> y with the circle.
            let d = [y[0] - x[0], y[1] - x[1]];
            let a = d[0] * d[0] + d[1] * d[1];
            let b = x[0] * d[0] + x[1] * d[1];
            let c = x[0] * x[0] + x[1] * x[1] - 1.0;
            let t = (-b + (b * b - a * c).sqrt()) / a;
            self.pos = [x[0] + t * d[0], x[1] + t * d[1]];
            self.exit_angle = Some(self.pos[1].atan2(self.pos[0]));
            return;
        }
        let rx = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let p = crossing_probability(1.0 - rx, 1.0 - ry, dt);
        if p > 1e-300 && src.uniform() < p {
            self.pos = [y[0] / ry, y[1] / ry];
            self.exit_angle = Some(y[1].atan2(y[0]));
            return;
        }
        self.pos = y;
    }

    /// Runs until `t` or exit, whichever comes first; lands exactly on `t`.
    fn run_until(&mut self, t: f64, src: &mut RandomSource) {
        while self.exit_angle.is_none() && self.now < t {
            let left = t - self.now;
            if left <= DISC_MAX_STEP * (1.0 + 1e-9) {
                self.step(left, src);
                self.now = t;
            } else {
                self.step(DISC_MAX_STEP, src);
            }
        }
    }

    fn run_to_exit(&mut self, src: &mut RandomSource) -> Result<f64> {
        self.run_until(MAX_EXIT_TIME, src);
        self.exit_angle
            .ok_or_else(|| Error::Diagnostics(format!("path still inside the disc at t = {MAX_EXIT_TIME}")))
    }
}

/// Exit frequencies of the discretised walk through each arc, on common paths.
pub fn disc_exit_frequency(x0: [f64; 2], arcs: &[DiscArc], plan: &McPlan) -> Result<Vec<MCEstimate>> {
    check_inside(x0)?;
    if arcs.is_empty() {
        return Err(Error::arg("need at least one arc"));
    }
    plan.estimate(arcs.len(), |src, row| {
        let angle = DiscWalk::new(x0).run_to_exit(src)?;
        for (slot, arc) in row.iter_mut().zip(arcs) {
            *slot = if arc.contains(angle) { 1.0 } else { 0.0 };
        }
        Ok(())
    })
}

fn check_arcs(x0: [f64; 2], exit_arc: &DiscArc, payoff_arc: &DiscArc) -> Result<()> {
    check_inside(x0)?;
    if !exit_arc.is_disjoint(payoff_arc) {
        return Err(Error::arg("payoff arc must be disjoint from the exit arc"));
    }
    Ok(())
}

/// `E^P[f(X_t) / v(X_t)]` for Brownian motion conditioned to exit through
/// `exit_arc`, where `f` and `v` are the harmonic measures of `payoff_arc` and
/// `exit_arc`. Computed from unconditioned paths as `E[f(X_t); τ > t] / v(x0)`.
pub fn conditioned_exit_profile(
    x0: [f64; 2],
    exit_arc: &DiscArc,
    payoff_arc: &DiscArc,
    ts: &[f64],
    plan: &McPlan,
) -> Result<Vec<(f64, MCEstimate)>> {
    check_arcs(x0, exit_arc, payoff_arc)?;
    if ts.is_empty() || ts.windows(2).any(|w| !(w[1] > w[0])) || !(ts[0] > 0.0) {
        return Err(Error::arg("times must be positive and increasing"));
    }
    let v0 = disc_harmonic_measure(x0, exit_arc)?;
    if !(v0 > 0.0) {
        return Err(Error::Diagnostics("exit arc has zero harmonic measure".into()));
    }
    let est = plan.estimate(ts.len(), |src, row| {
        let mut walk = DiscWalk::new(x0);
        for (slot, &t) in row.iter_mut().zip(ts) {
            walk.run_until(t, src);
            *slot = if walk.exit_angle.is_none() {
                disc_harmonic_measure(walk.pos, payoff_arc)? / v0
            } else {
                0.0
            };
        }
        Ok(())
    })?;
    Ok(ts.iter().copied().zip(est).collect())
}

/// Two independent estimates of `E^P[N_t]` for the conditioned exit experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionedExit {
    /// Mean of `N_t` over unconditioned paths that leave through the exit arc.
    pub via_rejection: MCEstimate,
    /// `E[f(X_t); τ > t] / v(x0)` on unconditioned paths.
    pub via_ptoq: MCEstimate,
    /// Fraction of trials accepted by the rejection sampler.
    pub acceptance: f64,
    /// `N_0 = f(x0) / v(x0)`.
    pub start_value: f64,
}

/// Both estimators of `E^P[N_t]`, on disjoint random streams. The rejection
/// sampler spends `plan.n_paths` trials.
pub fn conditioned_exit_expectation(
    x0: [f64; 2],
    exit_arc: &DiscArc,
    payoff_arc: &DiscArc,
    t: f64,
    plan: &McPlan,
) -> Result<ConditionedExit> {
    check_arcs(x0, exit_arc, payoff_arc)?;
    if !(t > 0.0) {
        return Err(Error::arg("time must be positive"));
    }
    let v0 = disc_harmonic_measure(x0, exit_arc)?;
    let start_value = disc_harmonic_measure(x0, payoff_arc)? / v0;
    let buf = plan.run(2, |src, row| {
        let mut walk = DiscWalk::new(x0);
        walk.run_until(t, src);
        // Exit before t happened on the boundary, where f vanishes on the exit arc.
        let at_t = match walk.exit_angle {
            None => {
                let v = disc_harmonic_measure(walk.pos, exit_arc)?;
                let f = disc_harmonic_measure(walk.pos, payoff_arc)?;
                if v > 0.0 { f / v } else { 0.0 }
            }
            Some(_) => 0.0,
        };
        let angle = walk.run_to_exit(src)?;
        if exit_arc.contains(angle) {
            row[0] = 1.0;
            row[1] = at_t;
        }
        Ok(())
    })?;
    let accepted: Vec<f64> = buf
        .chunks_exact(2)
        .filter(|r| r[0] == 1.0)
        .map(|r| r[1])
        .collect();
    if accepted.is_empty() {
        return Err(Error::Diagnostics(format!(
            "no path left through the exit arc in {} trials",
            plan.n_paths
        )));
    }
    let acceptance = accepted.len() as f64 / plan.n_paths as f64;
    let via_rejection = mc_reduce(&accepted, plan.seed)?;
    let via_ptoq = conditioned_exit_profile(x0, exit_arc, payoff_arc, &[t], &plan.side(1))?[0].1;
    Ok(ConditionedExit {
        via_rejection,
        via_ptoq,
        acceptance,
        start_value,
    })
}
