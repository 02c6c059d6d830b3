//! Complex tridiagonal solves (Thomas algorithm), plain and cyclic.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Reusable scratch space for repeated solves of the same size.
#[derive(Debug, Clone, Default)]
pub struct Tridiagonal {
    scratch: Vec<Complex64>,
    aux: Vec<Complex64>,
    diag: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn new(n: usize) -> Self {
        Self {
            scratch: vec![Complex64::new(0.0, 0.0); n],
            aux: Vec::new(),
            diag: Vec::new(),
        }
    }

    /// Solves `A x = rhs` in place. Row `i` reads
    /// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`;
    /// `lower[0]` and `upper[n-1]` are ignored.
    pub fn solve(
        &mut self,
        lower: &[Complex64],
        diag: &[Complex64],
        upper: &[Complex64],
        rhs: &mut [Complex64],
    ) -> Result<()> {
        let n = diag.len();
        debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
        if self.scratch.len() != n {
            self.scratch.resize(n, Complex64::new(0.0, 0.0));
        }
        let c = &mut self.scratch;
        let mut beta = diag[0];
        if beta.norm_sqr() == 0.0 {
            return Err(Error::Singular { row: 0 });
        }
        c[0] = upper[0] / beta;
        rhs[0] /= beta;
        for i in 1..n {
            beta = diag[i] - lower[i] * c[i - 1];
            if beta.norm_sqr() == 0.0 || !beta.is_finite() {
                return Err(Error::Singular { row: i });
            }
            c[i] = upper[i] / beta;
            rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
        }
        for i in (0..n - 1).rev() {
            let next = rhs[i + 1];
            rhs[i] -= c[i] * next;
        }
        Ok(())
    }

    /// Cyclic variant: additionally `lower[0]` couples row 0 to `x[n-1]` and
    /// `upper[n-1]` couples row `n-1` to `x[0]` (Sherman–Morrison).
    pub fn solve_cyclic(
        &mut self,
        lower: &[Complex64],
        diag: &[Complex64],
        upper: &[Complex64],
        rhs: &mut [Complex64],
    ) -> Result<()> {
        let n = diag.len();
        if n < 3 {
            return Err(Error::Config("cyclic solve needs at least three rows"));
        }
        let alpha = upper[n - 1];
        let beta = lower[0];
        let gamma = -diag[0];
        let mut d = core::mem::take(&mut self.diag);
        d.clear();
        d.extend_from_slice(diag);
        d[0] -= gamma;
        d[n - 1] -= alpha * beta / gamma;

        let mut u = core::mem::take(&mut self.aux);
        u.clear();
        u.resize(n, Complex64::new(0.0, 0.0));
        u[0] = gamma;
        u[n - 1] = alpha;

        let res = self
            .solve(lower, &d, upper, rhs)
            .and_then(|_| self.solve(lower, &d, upper, &mut u));
        if res.is_ok() {
            let fact =
                (rhs[0] + beta * rhs[n - 1] / gamma) / (Complex64::new(1.0, 0.0) + u[0] + beta * u[n - 1] / gamma);
            for (x, z) in rhs.iter_mut().zip(&u) {
                *x -= fact * z;
            }
        }
        self.diag = d;
        self.aux = u;
        res
    }
}
