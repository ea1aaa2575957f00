//! Inversion in the unit sphere, the Kelvin transform of scalar fields, and a
//! Monte-Carlo check of the change of measure it induces on Brownian motion
//! killed at a ball around the origin.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::htransform::StateFn;
use crate::mc::{MCEstimate, McPlan};
use crate::path::AbsorbedPath;
use crate::rng::RandomSource;
use crate::scalar::Scalar;
use crate::sde::bridge::crossing_probability;

/// Largest time step of the killed walk in three dimensions.
pub const BALL_MAX_STEP: f64 = 1e-3;

fn norm<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
}

/// `x / |x|^2`.
pub fn invert_point<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    let r2 = x.iter().fold(T::zero(), |acc, &v| acc + v * v);
    if !(r2 > T::zero()) || !r2.is_finite() {
        return Err(Error::arg("cannot invert the origin"));
    }
    Ok(x.iter().map(|&v| v / r2).collect())
}

pub type FieldFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type DomainGuard<T> = Arc<dyn Fn(&[T]) -> bool + Send + Sync>;

/// Real function on an open subset of `R^d \ {0}`, `d >= 3`.
#[derive(Clone)]
pub struct ScalarField<T: Scalar> {
    dim: usize,
    evaluator: FieldFn<T>,
    guard: DomainGuard<T>,
}

impl<T: Scalar> fmt::Debug for ScalarField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl<T: Scalar> ScalarField<T> {
    /// Field defined everywhere except the origin.
    pub fn new(dim: usize, evaluator: FieldFn<T>) -> Result<Self> {
        if dim < 3 {
            return Err(Error::arg(format!("dimension must be at least 3, got {dim}")));
        }
        Ok(Self {
            dim,
            evaluator,
            guard: Arc::new(|x: &[T]| x.iter().any(|v| *v != T::zero())),
        })
    }

    /// Restricts the domain further; the origin stays excluded.
    pub fn with_guard(mut self, guard: DomainGuard<T>) -> Self {
        let base = self.guard.clone();
        self.guard = Arc::new(move |x: &[T]| base(x) && guard(x));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim && (self.guard)(x)
    }

    pub fn eval(&self, x: &[T]) -> Result<T> {
        if !self.contains(x) {
            return Err(Error::arg("point outside the field's domain"));
        }
        Ok((self.evaluator)(x))
    }
}

/// `K[u](y) = |y|^{2-d} u(y / |y|^2)` on the inverted domain.
pub fn kelvin_transform<T: Scalar>(u: &ScalarField<T>) -> ScalarField<T> {
    let d = u.dim;
    let power = T::lit(2.0 - d as f64);
    let inner = u.evaluator.clone();
    let guard = u.guard.clone();
    ScalarField {
        dim: d,
        evaluator: Arc::new(move |y: &[T]| {
            let star = invert_point(y).expect("guarded point is nonzero");
            norm(y).powf(power) * inner(&star)
        }),
        guard: Arc::new(move |y: &[T]| match invert_point(y) {
            Ok(star) => guard(&star),
            Err(_) => false,
        }),
    }
}

/// Centred `2d + 1`-point finite-difference Laplacian.
pub fn laplacian_fd<T: Scalar>(u: &ScalarField<T>, y: &[T], h: T) -> Result<T> {
    if y.len() != u.dim {
        return Err(Error::arg("point dimension does not match the field"));
    }
    if !(h > T::zero()) {
        return Err(Error::arg("step must be positive"));
    }
    let centre = u.eval(y)?;
    let mut p = y.to_vec();
    let mut acc = T::zero();
    for i in 0..y.len() {
        p[i] = y[i] + h;
        let up = u.eval(&p)?;
        p[i] = y[i] - h;
        let down = u.eval(&p)?;
        p[i] = y[i];
        acc = acc + (up - centre) + (down - centre);
    }
    Ok(acc / (h * h))
}

/// `|Δ K[u](y) − K[v](y)|` with `v = |x|^4 Δu`, every Laplacian by finite
/// differences of step `h`. Vanishes up to `O(h^2)` truncation.
pub fn laplacian_commutation_residual<T: Scalar>(u: &ScalarField<T>, y: &[T], h: T) -> Result<T> {
    let ku = kelvin_transform(u);
    let lhs = laplacian_fd(&ku, y, h)?;
    let star = invert_point(y)?;
    let r_star = norm(&star);
    let v_at_star = r_star.powi(4) * laplacian_fd(u, &star, h)?;
    let rhs = norm(y).powf(T::lit(2.0 - u.dim as f64)) * v_at_star;
    Ok((lhs - rhs).abs())
}

/// Least-squares slope of `log residual` against `log h`.
pub fn observed_order<T: Scalar>(steps: &[T], residuals: &[T]) -> Result<T> {
    if steps.len() != residuals.len() || steps.len() < 2 {
        return Err(Error::arg("need matching step and residual lists of length >= 2"));
    }
    if residuals.iter().any(|r| !(*r > T::zero())) {
        return Err(Error::Diagnostics("residual vanished; order undefined".into()));
    }
    let n = T::lit(steps.len() as f64);
    let xs: Vec<T> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<T> = residuals.iter().map(|r| r.ln()).collect();
    let mx = xs.iter().fold(T::zero(), |a, &b| a + b) / n;
    let my = ys.iter().fold(T::zero(), |a, &b| a + b) / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(&ys) {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
    }
    Ok(sxy / sxx)
}

/// Polynomial test fields `1, x₁, x₁x₂, |x|², |x|⁴` in dimension `dim`.
pub fn reference_fields<T: Scalar>(dim: usize) -> Result<Vec<(&'static str, ScalarField<T>)>> {
    fn sq<T: Scalar>(x: &[T]) -> T {
        x.iter().fold(T::zero(), |a, &v| a + v * v)
    }
    Ok(vec![
        ("1", ScalarField::new(dim, Arc::new(|_: &[T]| T::one()))?),
        ("x1", ScalarField::new(dim, Arc::new(|x: &[T]| x[0]))?),
        ("x1*x2", ScalarField::new(dim, Arc::new(|x: &[T]| x[0] * x[1]))?),
        ("|x|^2", ScalarField::new(dim, Arc::new(|x: &[T]| sq(x)))?),
        ("|x|^4", ScalarField::new(dim, Arc::new(|x: &[T]| sq(x) * sq(x)))?),
    ])
}

/// Commutation residuals at `y` for each step, and their observed order.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutationOrder<T: Scalar> {
    pub residuals: Vec<T>,
    pub order: T,
}

pub fn commutation_order<T: Scalar>(u: &ScalarField<T>, y: &[T], steps: &[T]) -> Result<CommutationOrder<T>> {
    let residuals = steps
        .iter()
        .map(|&h| laplacian_commutation_residual(u, y, h))
        .collect::<Result<Vec<_>>>()?;
    let order = observed_order(steps, &residuals)?;
    Ok(CommutationOrder { residuals, order })
}

/// Bounded test function on the complement of the ball.
#[derive(Clone)]
pub struct BoundedField {
    f: StateFn,
    bound: f64,
}

impl fmt::Debug for BoundedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundedField").field("bound", &self.bound).finish_non_exhaustive()
    }
}

impl BoundedField {
    /// `f` with `|f| <= bound`; an infinite bound marks the field as unbounded.
    pub fn new(bound: f64, f: StateFn) -> Self {
        Self { f, bound }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(c.abs(), Arc::new(move |_| c))
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = (self.f)(x);
        if !(v.abs() <= self.bound) {
            return Err(Error::Diagnostics(format!(
                "field value {v} exceeds its declared bound {}",
                self.bound
            )));
        }
        Ok(v)
    }
}

/// Three-dimensional Brownian motion from `x0` killed on the sphere of radius
/// `radius`, on a grid covering `marks` with steps of at most [`BALL_MAX_STEP`].
///
/// Killing between grid points is decided with the bridge crossing
/// probability against the tangent plane; the killed state is the point where
/// the step meets the sphere.
pub fn simulate_ball_absorbed(
    x0: [f64; 3],
    radius: f64,
    grid: &Arc<TimeGrid<f64>>,
    src: &mut RandomSource,
) -> Result<AbsorbedPath> {
    let n = grid.len();
    let mut values = Vec::with_capacity(3 * n);
    values.extend_from_slice(&x0);
    let mut x = x0;
    let mut absorbed = None;
    for k in 0..n - 1 {
        let dt = grid.dt(k);
        let s = dt.sqrt();
        let y = [x[0] + s * src.gaussian(), x[1] + s * src.gaussian(), x[2] + s * src.gaussian()];
        let ry = norm(&y);
        let hit = if ry <= radius {
            let d = [y[0] - x[0], y[1] - x[1], y[2] - x[2]];
            let a = d.iter().map(|v| v * v).sum::<f64>();
            let b = (0..3).map(|i| x[i] * d[i]).sum::<f64>();
            let c = x.iter().map(|v| v * v).sum::<f64>() - radius * radius;
            let t = (-b - (b * b - a * c).max(0.0).sqrt()) / a;
            Some([x[0] + t * d[0], x[1] + t * d[1], x[2] + t * d[2]])
        } else {
            let p = crossing_probability(norm(&x) - radius, ry - radius, dt);
            (p > 1e-300 && src.uniform() < p).then(|| [radius * y[0] / ry, radius * y[1] / ry, radius * y[2] / ry])
        };
        match hit {
            Some(z) => {
                values.extend_from_slice(&z);
                absorbed = Some(k + 1);
                break;
            }
            None => {
                values.extend_from_slice(&y);
                x = y;
            }
        }
    }
    values.resize(3 * n, 0.0);
    AbsorbedPath::from_parts(grid.clone(), 3, values, absorbed)
}

/// Estimates at one time of the inversion experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionPoint {
    pub t: f64,
    /// `|x0|^{2-d} E^P[U(X_t)]`.
    pub lhs: MCEstimate,
    /// `E^P[φ_t |Y_t|^{2-d} U(Y_t / |Y_t|^2)]` with `Y = X / |X|^2`.
    pub rhs: MCEstimate,
    /// `E^P[φ_t]`, which must be 1.
    pub weight_mean: MCEstimate,
    /// `E^P[φ_t Y_t(i)]`, constant in `t` since each `Y(i)` is a martingale after reweighting.
    pub inverted_mean: [MCEstimate; 3],
}

fn check_inversion_args(radius: f64, x0: [f64; 3], u: &BoundedField) -> Result<()> {
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::arg(format!("ball radius must lie in (0, 1), got {radius}")));
    }
    if (norm(&x0) - 1.0).abs() > 1e-12 {
        return Err(Error::arg("start must lie on the unit sphere"));
    }
    if !u.bound.is_finite() {
        return Err(Error::arg("test field must be bounded"));
    }
    Ok(())
}

fn marks_grid(ts: &[f64]) -> Result<(Arc<TimeGrid<f64>>, Vec<usize>)> {
    if ts.is_empty() || ts.windows(2).any(|w| !(w[1] > w[0])) || !(ts[0] > 0.0) {
        return Err(Error::arg("times must be positive and increasing"));
    }
    let grid = TimeGrid::covering(ts, BALL_MAX_STEP)?;
    let idx = ts.iter().map(|&t| grid.index_of(t).expect("mark on grid")).collect();
    Ok((Arc::new(grid), idx))
}

/// Both sides of the inversion identity, the weight mean and the reweighted
/// inverted coordinates, at each time in `ts`, on common paths.
pub fn conformal_inversion_profile(
    radius: f64,
    x0: [f64; 3],
    u: &BoundedField,
    ts: &[f64],
    plan: &McPlan,
) -> Result<Vec<InversionPoint>> {
    check_inversion_args(radius, x0, u)?;
    let (grid, idx) = marks_grid(ts)?;
    const D: f64 = 3.0;
    let start_factor = norm(&x0).powf(2.0 - D);
    let est = plan.estimate(6 * ts.len(), |src, row| {
        let p = simulate_ball_absorbed(x0, radius, &grid, src)?;
        for (slot, &k) in row.chunks_exact_mut(6).zip(&idx) {
            let x = p.state(k);
            let weight = norm(x).powf(2.0 - D) / start_factor;
            let y = invert_point(x)?;
            let back = invert_point(&y)?;
            slot[0] = start_factor * u.eval(x)?;
            slot[1] = weight * norm(&y).powf(2.0 - D) * u.eval(&back)?;
            slot[2] = weight;
            for i in 0..3 {
                slot[3 + i] = weight * y[i];
            }
        }
        Ok(())
    })?;
    Ok(ts
        .iter()
        .zip(est.chunks_exact(6))
        .map(|(&t, e)| InversionPoint {
            t,
            lhs: e[0],
            rhs: e[1],
            weight_mean: e[2],
            inverted_mean: [e[3], e[4], e[5]],
        })
        .collect())
}

/// [`conformal_inversion_profile`] at a single time.
pub fn conformal_inversion_check(
    radius: f64,
    x0: [f64; 3],
    u: &BoundedField,
    t: f64,
    plan: &McPlan,
) -> Result<InversionPoint> {
    Ok(conformal_inversion_profile(radius, x0, u, &[t], plan)?[0])
}

/// Reweighted realised covariations `E^P[φ_t Σ_k ΔY(i) ΔY(j)]` over `[0, t]`,
/// row-major `[i][j]`.
pub fn inverted_covariation(radius: f64, x0: [f64; 3], t: f64, plan: &McPlan) -> Result<[[MCEstimate; 3]; 3]> {
    check_inversion_args(radius, x0, &BoundedField::constant(1.0))?;
    let (grid, _) = marks_grid(&[t])?;
    let est = plan.estimate(9, |src, row| {
        let p = simulate_ball_absorbed(x0, radius, &grid, src)?;
        let mut prev = invert_point(p.state(0))?;
        let stop = p.absorption_index().unwrap_or(p.len() - 1);
        for k in 1..=stop {
            let y = invert_point(p.state(k))?;
            for i in 0..3 {
                for j in 0..3 {
                    row[3 * i + j] += (y[i] - prev[i]) * (y[j] - prev[j]);
                }
            }
            prev = y;
        }
        let weight = norm(p.state(stop)).recip() * norm(&x0);
        for v in row.iter_mut() {
            *v *= weight;
        }
        Ok(())
    })?;
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| est[3 * i + j])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(f: fn(&[f64]) -> f64) -> ScalarField<f64> {
        ScalarField::new(3, Arc::new(f)).unwrap()
    }

    #[test]
    fn inversion_basics() {
        assert_eq!(invert_point(&[2.0, 0.0, 0.0]).unwrap(), vec![0.5, 0.0, 0.0]);
        assert_eq!(invert_point(&[0.0, 1.0, 0.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(invert_point(&[0.0f64, 0.0, 0.0]).is_err());
        let x = [0.3f32, -2.0, 1.5];
        let back = invert_point(&invert_point(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn low_dimension_rejected() {
        assert!(ScalarField::<f64>::new(2, Arc::new(|_| 1.0)).is_err());
    }

    #[test]
    fn transform_of_constant_and_coordinate() {
        let k1 = kelvin_transform(&field(|_| 1.0));
        let k2 = kelvin_transform(&field(|x| x[0]));
        let y = [0.5, -1.0, 2.0];
        let r = norm(&y);
        assert!((k1.eval(&y).unwrap() - 1.0 / r).abs() < 1e-15);
        assert!((k2.eval(&y).unwrap() - y[0] / r.powi(3)).abs() < 1e-15);
        assert!(k1.eval(&[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn guard_maps_through_inversion() {
        let outside = field(|x| x[0]).with_guard(Arc::new(|x: &[f64]| norm(x) > 2.0));
        let k = kelvin_transform(&outside);
        assert!(k.contains(&[0.1, 0.0, 0.0]));
        assert!(!k.contains(&[1.0, 0.0, 0.0]));
    }

    #[test]
    fn stencil_outside_domain_is_an_error() {
        let u = field(|x| x[0]).with_guard(Arc::new(|x: &[f64]| norm(x) > 1.0));
        assert!(laplacian_fd(&u, &[1.0005, 0.0, 0.0], 1e-3).is_err());
        assert!(laplacian_commutation_residual(&u, &[0.5, 0.0, 0.0], 1e-2).is_ok());
    }

    #[test]
    fn order_of_exact_power_law() {
        let hs = [1e-2, 5e-3, 2.5e-3];
        let rs: Vec<f64> = hs.iter().map(|h| 3.0 * h * h).collect();
        assert!((observed_order(&hs, &rs).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inversion_arguments() {
        let plan = McPlan::new(4, 1);
        let u = BoundedField::constant(1.0);
        assert!(conformal_inversion_check(1.0, [1.0, 0.0, 0.0], &u, 0.1, &plan).is_err());
        assert!(conformal_inversion_check(0.5, [2.0, 0.0, 0.0], &u, 0.1, &plan).is_err());
        let unbounded = BoundedField::new(f64::INFINITY, Arc::new(|x: &[f64]| x[0]));
        assert!(matches!(
            conformal_inversion_check(0.5, [1.0, 0.0, 0.0], &unbounded, 0.1, &plan),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn killed_walk_stays_outside_and_freezes_on_sphere() {
        let grid = Arc::new(TimeGrid::covering(&[2.0], BALL_MAX_STEP).unwrap());
        let mut hits = 0;
        for s in 0..40 {
            let mut src = RandomSource::new(5, s);
            let p = simulate_ball_absorbed([1.0, 0.0, 0.0], 0.5, &grid, &mut src).unwrap();
            for k in 0..p.len() {
                assert!(norm(p.state(k)) >= 0.5 - 1e-12);
            }
            if let Some(a) = p.absorption_index() {
                hits += 1;
                assert!((norm(p.state(a)) - 0.5).abs() < 1e-12);
                assert_eq!(p.last_state(), p.state(a));
            }
        }
        assert!(hits > 0);
    }
}
