//! Helpers shared by the CLI integration suites: running the binary entry
//! point in-process, reading back its CSV, and independent numerical oracles.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

/// Outcome of one in-process invocation.
pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn slm(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("slm").chain(args.iter().copied());
    let code = slm_cli::run_with(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

/// Parsed CSV table with the header kept for column lookup.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub bytes: Vec<u8>,
}

impl Table {
    pub fn read(path: &Path) -> Table {
        let bytes = std::fs::read(path).unwrap();
        let mut rdr = csv::Reader::from_reader(bytes.as_slice());
        let header = rdr.headers().unwrap().iter().map(str::to_owned).collect();
        let rows = rdr
            .records()
            .map(|r| r.unwrap().iter().map(str::to_owned).collect())
            .collect();
        Table { header, rows, bytes }
    }

    fn index(&self, name: &str) -> usize {
        self.header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("no column {name} in {:?}", self.header))
    }

    pub fn col(&self, name: &str) -> Vec<f64> {
        let j = self.index(name);
        self.rows.iter().map(|r| r[j].parse().unwrap()).collect()
    }

    pub fn text(&self, name: &str) -> Vec<String> {
        let j = self.index(name);
        self.rows.iter().map(|r| r[j].clone()).collect()
    }
}

/// Mean with its standard error, as read back from a CSV row.
#[derive(Debug, Clone, Copy)]
pub struct Est {
    pub mean: f64,
    pub se: f64,
}

impl Est {
    pub fn z_to(&self, value: f64) -> f64 {
        (self.mean - value).abs() / self.se
    }
}

pub fn ests(t: &Table, mean: &str, se: &str) -> Vec<Est> {
    t.col(mean)
        .into_iter()
        .zip(t.col(se))
        .map(|(mean, se)| Est { mean, se })
        .collect()
}

pub fn joint_z(a: Est, b: Est) -> f64 {
    (a.mean - b.mean).abs() / a.se.hypot(b.se)
}

/// `a` exceeds `b` by more than three joint standard errors.
pub fn above(a: Est, b: Est) -> bool {
    a.mean - b.mean > 3.0 * a.se.hypot(b.se)
}

pub fn strictly_decreasing(xs: &[Est]) -> bool {
    xs.windows(2).all(|w| above(w[0], w[1]))
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

pub fn normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function by quadrature of the density.
pub fn phi(x: f64) -> f64 {
    let half = simpson(normal_density, 0.0, x.abs(), 4000);
    if x >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Expectation of `g(1/Y)` for the three-dimensional Bessel process `Y` started at `y0`,
/// from its transition density `(y/y0)(n_t(y-y0) - n_t(y+y0))`, integrated over `y` in `[lo, hi]`.
pub fn inverse_bessel_expectation(g: impl Fn(f64) -> f64, y0: f64, t: f64, lo: f64, hi: f64) -> f64 {
    let s = t.sqrt();
    let density = |y: f64| {
        (y / y0) * (normal_density((y - y0) / s) - normal_density((y + y0) / s)) / s
    };
    simpson(|y| if y > 0.0 { g(1.0 / y) * density(y) } else { 0.0 }, lo, hi, 20_000)
}

/// Harmonic measure of the arc `[lo, hi]` seen from `x0` in the unit disc, by
/// quadrature of the Poisson kernel.
pub fn poisson_arc(x0: [f64; 2], lo: f64, hi: f64) -> f64 {
    let r2 = x0[0] * x0[0] + x0[1] * x0[1];
    let kernel = |th: f64| {
        let dx = th.cos() - x0[0];
        let dy = th.sin() - x0[1];
        (1.0 - r2) / (2.0 * PI * (dx * dx + dy * dy))
    };
    simpson(kernel, lo, hi, 20_000)
}

/// Value following `key=` in a summary line.
pub fn summary_field<'a>(summary: &'a str, key: &str) -> &'a str {
    let start = summary
        .find(&format!("{key}="))
        .unwrap_or_else(|| panic!("no {key}= in {summary}"))
        + key.len()
        + 1;
    let rest = &summary[start..];
    let end = rest.find([' ', ';', ':']).unwrap_or(rest.len());
    &rest[..end]
}
