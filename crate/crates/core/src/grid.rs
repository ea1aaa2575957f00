use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Strictly increasing sampling times, with the common step when uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T: Scalar> {
    times: Vec<T>,
    step: Option<T>,
}

const UNIFORM_TOL: f64 = 1e-12;

impl<T: Scalar> TimeGrid<T> {
    /// Uniform grid `0 = t_0 < ... < t_n = t_end`. The last point equals `t_end` exactly.
    pub fn uniform(t_end: T, n_steps: usize) -> Result<Self> {
        if !(t_end > T::zero()) || !t_end.is_finite() {
            return Err(Error::arg(format!("t_end must be positive, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(Error::arg("n_steps must be at least 1"));
        }
        let n = T::from_usize(n_steps).unwrap();
        let mut times: Vec<T> = (0..=n_steps)
            .map(|k| t_end * T::from_usize(k).unwrap() / n)
            .collect();
        times[n_steps] = t_end;
        Ok(Self {
            times,
            step: Some(t_end / n),
        })
    }

    /// Arbitrary grid from explicit times. The step is recorded when the spacing is uniform.
    pub fn from_times(times: Vec<T>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::arg("time grid needs at least one point"));
        }
        if times[0] < T::zero() || !times[0].is_finite() {
            return Err(Error::arg("time grid must start at a nonnegative time"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::arg("time grid must be strictly increasing"));
        }
        let step = if times.len() >= 2 {
            let h = times[1] - times[0];
            let tol = T::lit(UNIFORM_TOL) * (T::one() + times[times.len() - 1].abs());
            times
                .windows(2)
                .all(|w| (w[1] - w[0] - h).abs() <= tol)
                .then_some(h)
        } else {
            None
        };
        Ok(Self { times, step })
    }

    /// `n` points evenly spaced on `[a, b]`.
    pub fn linspace(a: T, b: T, n: usize) -> Result<Self> {
        if n < 2 || !(b > a) {
            return Err(Error::arg("linspace needs n >= 2 and a < b"));
        }
        let m = T::from_usize(n - 1).unwrap();
        let mut times: Vec<T> = (0..n)
            .map(|k| a + (b - a) * T::from_usize(k).unwrap() / m)
            .collect();
        times[n - 1] = b;
        Self::from_times(times)
    }

    /// `n` points geometrically spaced on `[a, b]`, `a > 0`.
    pub fn logspace(a: T, b: T, n: usize) -> Result<Self> {
        if n < 2 || !(a > T::zero()) || !(b > a) {
            return Err(Error::arg("logspace needs n >= 2 and 0 < a < b"));
        }
        let (la, lb) = (a.ln(), b.ln());
        let m = T::from_usize(n - 1).unwrap();
        let mut times: Vec<T> = (0..n)
            .map(|k| (la + (lb - la) * T::from_usize(k).unwrap() / m).exp())
            .collect();
        times[0] = a;
        times[n - 1] = b;
        Self::from_times(times)
    }

    /// Grid starting at zero that contains every requested time, each interval
    /// refined so that no step exceeds `max_step`.
    pub fn covering(marks: &[T], max_step: T) -> Result<Self> {
        if !(max_step > T::zero()) {
            return Err(Error::arg("max_step must be positive"));
        }
        let mut sorted: Vec<T> = marks.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        sorted.dedup();
        if sorted.first().is_some_and(|&t| t < T::zero()) {
            return Err(Error::arg("times must be nonnegative"));
        }
        let mut times = vec![T::zero()];
        for &m in &sorted {
            let last = *times.last().unwrap();
            if m <= last {
                continue;
            }
            let pieces = ((m - last) / max_step).ceil().to_usize().unwrap().max(1);
            let p = T::from_usize(pieces).unwrap();
            for k in 1..pieces {
                times.push(last + (m - last) * T::from_usize(k).unwrap() / p);
            }
            times.push(m);
        }
        Self::from_times(times)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn step(&self) -> Option<T> {
        self.step
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> T {
        self.times[0]
    }

    pub fn end(&self) -> T {
        self.times[self.times.len() - 1]
    }

    /// Index of the grid point equal to `t`, if any.
    pub fn index_of(&self, t: T) -> Option<usize> {
        let tol = T::lit(UNIFORM_TOL) * (T::one() + t.abs());
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    pub fn dt(&self, k: usize) -> T {
        self.times[k + 1] - self.times[k]
    }
}

/// Uniform grid on `[0, t_end]` with `n_steps` steps.
pub fn make_grid(t_end: f64, n_steps: usize) -> Result<TimeGrid<f64>> {
    TimeGrid::uniform(t_end, n_steps)
}
