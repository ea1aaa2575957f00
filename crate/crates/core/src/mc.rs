//! Deterministic Monte-Carlo driver and reduction.
//!
//! Paths are generated in parallel, written into a buffer indexed by path
//! number, and reduced with a fixed-shape pairwise tree. The worker count only
//! changes who fills which slot, never the arithmetic, so estimates are
//! bit-identical for any degree of parallelism.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Leaf size of the pairwise summation tree.
pub const SUM_BLOCK: usize = 1024;

/// Mean and standard error of one Monte-Carlo quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl MCEstimate {
    /// Exact value carried as an estimate with zero error.
    pub fn exact(value: f64, seed: u64) -> Self {
        Self {
            mean: value,
            stderr: 0.0,
            n_paths: 1,
            seed,
        }
    }

    /// `|mean - value| / stderr`, infinite if the stderr is zero and the values differ.
    pub fn z_against(&self, value: f64) -> f64 {
        z_score(self.mean - value, self.stderr)
    }

    /// True when `value` lies within `k` standard errors of the mean.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

/// Standard error of a difference of two independent estimates.
pub fn joint_stderr(a: &MCEstimate, b: &MCEstimate) -> f64 {
    a.stderr.hypot(b.stderr)
}

/// `|a - b|` in units of the joint standard error.
pub fn joint_z(a: &MCEstimate, b: &MCEstimate) -> f64 {
    z_score(a.mean - b.mean, joint_stderr(a, b))
}

fn z_score(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se == 0.0 {
        f64::INFINITY
    } else {
        diff.abs() / se
    }
}

/// `a.mean - b.mean` exceeds `k` joint standard errors.
pub fn separated_above(a: &MCEstimate, b: &MCEstimate, k: f64) -> bool {
    a.mean - b.mean > k * joint_stderr(a, b)
}

/// Shape of a sequence of estimates under a `k`-standard-error rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    /// Every step falls by more than `k` joint standard errors.
    StrictlyDecreasing,
    /// Every step rises by more than `k` joint standard errors.
    StrictlyIncreasing,
    /// No step moves by more than `k` joint standard errors.
    Flat,
    Mixed,
}

impl Trend {
    pub fn label(self) -> &'static str {
        match self {
            Trend::StrictlyDecreasing => "strictly-decreasing",
            Trend::StrictlyIncreasing => "strictly-increasing",
            Trend::Flat => "flat",
            Trend::Mixed => "mixed",
        }
    }
}

/// Classifies consecutive differences of `ests`.
pub fn trend(ests: &[MCEstimate], k: f64) -> Trend {
    let steps = || ests.windows(2);
    if steps().all(|w| separated_above(&w[0], &w[1], k)) {
        Trend::StrictlyDecreasing
    } else if steps().all(|w| separated_above(&w[1], &w[0], k)) {
        Trend::StrictlyIncreasing
    } else if steps().all(|w| joint_z(&w[0], &w[1]) <= k) {
        Trend::Flat
    } else {
        Trend::Mixed
    }
}

/// No step falls by more than `k` joint standard errors.
pub fn nondecreasing_within(ests: &[MCEstimate], k: f64) -> bool {
    ests.windows(2).all(|w| !separated_above(&w[0], &w[1], k))
}

/// Pairwise-tree sum with leaves of [`SUM_BLOCK`] values.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= SUM_BLOCK {
        let mut s = 0.0;
        for &v in values {
            s += v;
        }
        s
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Mean and standard error (sample sd / sqrt(n)) of `values`.
pub fn mc_reduce(values: &[f64], seed: u64) -> Result<MCEstimate> {
    if values.is_empty() {
        return Err(Error::arg("cannot reduce an empty sample"));
    }
    let n = values.len();
    let mean = pairwise_sum(values) / n as f64;
    let stderr = if n > 1 {
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(MCEstimate {
        mean,
        stderr,
        n_paths: n,
        seed,
    })
}

/// Path count, stream addressing and parallelism for one Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McPlan {
    pub n_paths: usize,
    pub seed: u64,
    pub base_stream: u64,
    /// Worker threads; `0` means use the global rayon pool.
    pub workers: usize,
}

impl McPlan {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            base_stream: 0,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_paths(mut self, n_paths: usize) -> Self {
        self.n_paths = n_paths;
        self
    }

    /// Plan reading a disjoint block of streams, for an independent second sample.
    pub fn side(mut self, index: u64) -> Self {
        self.base_stream = self.base_stream.wrapping_add(index << 40);
        self
    }

    pub fn source_for(&self, path: usize) -> RandomSource {
        RandomSource::new(self.seed, self.base_stream.wrapping_add(path as u64))
    }

    /// Runs `sample` once per path, each writing `width` values into its row.
    ///
    /// Returns the row-major `n_paths x width` buffer.
    pub fn run<F>(&self, width: usize, sample: F) -> Result<Vec<f64>>
    where
        F: Fn(&mut RandomSource, &mut [f64]) -> Result<()> + Sync,
    {
        if self.n_paths == 0 {
            return Err(Error::arg("n_paths must be positive"));
        }
        if width == 0 {
            return Err(Error::arg("row width must be positive"));
        }
        let mut out = vec![0.0; self.n_paths * width];
        let fill = |out: &mut [f64]| {
            out.par_chunks_mut(width)
                .enumerate()
                .try_for_each(|(k, row)| {
                    let mut src = self.source_for(k);
                    sample(&mut src, row)
                })
        };
        if self.workers == 0 {
            fill(&mut out)?;
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build()
                .map_err(|e| Error::Diagnostics(format!("thread pool: {e}")))?;
            pool.install(|| fill(&mut out))?;
        }
        Ok(out)
    }

    /// Runs `sample` and reduces each of the `width` columns separately.
    pub fn estimate<F>(&self, width: usize, sample: F) -> Result<Vec<MCEstimate>>
    where
        F: Fn(&mut RandomSource, &mut [f64]) -> Result<()> + Sync,
    {
        let buf = self.run(width, sample)?;
        reduce_columns(&buf, width, self.seed)
    }
}

/// Column `j` of a row-major buffer.
pub fn column(buf: &[f64], width: usize, j: usize) -> Vec<f64> {
    buf.chunks_exact(width).map(|r| r[j]).collect()
}

pub fn reduce_columns(buf: &[f64], width: usize, seed: u64) -> Result<Vec<MCEstimate>> {
    (0..width)
        .map(|j| mc_reduce(&column(buf, width, j), seed))
        .collect()
}
