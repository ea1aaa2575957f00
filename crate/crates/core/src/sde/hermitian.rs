//! Cyclic Jacobi eigenvalue iteration for small Hermitian matrices.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 100;

/// Dense square Hermitian matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix<T: Scalar> {
    n: usize,
    a: Vec<Complex<T>>,
}

impl<T: Scalar> HermitianMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            a: vec![Complex::new(T::zero(), T::zero()); n * n],
        }
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.a[i * d.len() + i] = Complex::new(x, T::zero());
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.a[i * self.n + j]
    }

    /// Adds `x` to the real diagonal entry `(i, i)`.
    pub fn add_diagonal(&mut self, i: usize, x: T) {
        self.a[i * self.n + i].re = self.a[i * self.n + i].re + x;
    }

    /// Adds `z` at `(i, j)` and its conjugate at `(j, i)`, `i < j`.
    pub fn add_off_diagonal(&mut self, i: usize, j: usize, z: Complex<T>) {
        let n = self.n;
        self.a[i * n + j] = self.a[i * n + j] + z;
        self.a[j * n + i] = self.a[j * n + i] + z.conj();
    }

    fn off_norm2(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                s = s + self.get(i, j).norm_sqr();
            }
        }
        s
    }

    fn frobenius2(&self) -> T {
        self.a.iter().fold(T::zero(), |s, z| s + z.norm_sqr())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<T>> {
        let n = self.n;
        let mut a = self.a.clone();
        let scale = self.frobenius2();
        let tol = T::epsilon() * T::epsilon() * scale;
        let zero = Complex::new(T::zero(), T::zero());
        let mut converged = n < 2 || scale == T::zero();
        let mut sweeps = 0;
        while !converged {
            if sweeps == MAX_SWEEPS {
                return Err(Error::Diagnostics(
                    "Hermitian Jacobi iteration did not converge".into(),
                ));
            }
            sweeps += 1;
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    let r = apq.norm();
                    if r == T::zero() {
                        continue;
                    }
                    // Phase that makes the pivot real, then a real plane rotation.
                    let phase = apq / r;
                    let app = a[p * n + p].re;
                    let aqq = a[q * n + q].re;
                    let theta = (aqq - app) / (T::lit(2.0) * r);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    // U = diag(1, conj(phase)) * [[c, s], [-s, c]]
                    let u_pp = Complex::new(c, T::zero());
                    let u_pq = Complex::new(s, T::zero());
                    let u_qp = phase.conj() * (-s);
                    let u_qq = phase.conj() * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = akp * u_pp + akq * u_qp;
                        a[k * n + q] = akp * u_pq + akq * u_qq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = u_pp.conj() * apk + u_qp.conj() * aqk;
                        a[q * n + k] = u_pq.conj() * apk + u_qq.conj() * aqk;
                    }
                    a[p * n + q] = zero;
                    a[q * n + p] = zero;
                    a[p * n + p].im = T::zero();
                    a[q * n + q].im = T::zero();
                }
            }
            let off = HermitianMatrix { n, a: a.clone() }.off_norm2();
            converged = off <= tol;
        }
        let mut ev: Vec<T> = (0..n).map(|i| a[i * n + i].re).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
        Ok(ev)
    }
}
