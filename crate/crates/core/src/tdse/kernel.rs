//! Discrete transparent boundary conditions for Crank–Nicolson on the
//! three-point lattice.
//!
//! In a field-free exterior with zero initial data, the Z-transform of the CN
//! recursion gives `ψ̂_{J+1}(z) = ν(z) ψ̂_J(z)` where `ν` is the root of
//! `ν + 1/ν = 2w(z)`, `w = 1 - iR(z-1)/(z+1)`, `R = ħ/(t'Δt)`, with `|ν| < 1`.
//! In time this is the convolution `ψ_{J+1}^n = Σ_k ℓ_k ψ_J^{n-k}`. The
//! coefficients `ℓ_k` are obtained by sampling `ν` on a circle `|z| = r > 1`
//! and inverting with an FFT; the radius trades aliasing (`r^{-M}`) against
//! roundoff growth (`ε r^K`).

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::Result;
use crate::fft::Fft;

/// Convolution coefficients plus the boundary-value history at both ends.
#[derive(Debug, Clone)]
pub struct BoundaryKernel {
    ratio: f64,
    coeffs: Vec<Complex64>,
    left: Vec<Complex64>,
    right: Vec<Complex64>,
    /// `ψ_{-1}` and `ψ_N` at the current time level.
    pub(crate) ghost_left: Complex64,
    pub(crate) ghost_right: Complex64,
    /// Memory terms handed out by `pending`, reused by the following `push`.
    cached: Option<(Complex64, Complex64)>,
}

impl BoundaryKernel {
    /// Kernel for hopping `t_prime`, step `dt` and `ħ`, with coefficients
    /// precomputed for `capacity` steps (extended on demand).
    pub fn new(t_prime: f64, dt: f64, hbar: f64, capacity: usize) -> Result<Self> {
        let ratio = hbar / (t_prime * dt);
        Ok(Self {
            ratio,
            coeffs: coefficients(ratio, capacity.max(16) + 1)?,
            left: Vec::new(),
            right: Vec::new(),
            ghost_left: Complex64::new(0.0, 0.0),
            ghost_right: Complex64::new(0.0, 0.0),
            cached: None,
        })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Number of stored time levels.
    pub fn history_len(&self) -> usize {
        self.right.len()
    }

    pub(crate) fn reset(&mut self, left: Complex64, right: Complex64) -> Result<()> {
        self.left.clear();
        self.right.clear();
        self.cached = None;
        self.push(left, right)
    }

    /// Records boundary values of a new time level and updates the ghosts.
    pub(crate) fn push(&mut self, left: Complex64, right: Complex64) -> Result<()> {
        self.left.push(left);
        self.right.push(right);
        if self.right.len() > self.coeffs.len() {
            self.coeffs = coefficients(self.ratio, 2 * self.coeffs.len())?;
        }
        let (lh, rh) = match self.cached.take() {
            Some(m) => m,
            None => (self.history(&self.left), self.history(&self.right)),
        };
        self.ghost_left = self.coeffs[0] * left + lh;
        self.ghost_right = self.coeffs[0] * right + rh;
        Ok(())
    }

    /// `ℓ_0` and the memory terms `Σ_{k≥1} ℓ_k ψ^{n+1-k}` for the next level.
    pub(crate) fn pending(&mut self) -> Result<(Complex64, Complex64, Complex64)> {
        if self.right.len() + 1 > self.coeffs.len() {
            self.coeffs = coefficients(self.ratio, 2 * self.coeffs.len())?;
        }
        let lh = self.memory(&self.left);
        let rh = self.memory(&self.right);
        self.cached = Some((lh, rh));
        Ok((self.coeffs[0], lh, rh))
    }

    /// `Σ_{k=1}^{n} ℓ_k h[n-k]` with `n = h.len()`, i.e. the memory term for
    /// the level after the last stored one.
    fn memory(&self, h: &[Complex64]) -> Complex64 {
        let n = h.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, v) in self.coeffs[1..=n].iter().zip(h.iter().rev()) {
            acc += c * v;
        }
        acc
    }

    /// Memory term of the last stored level (excluding its own `ℓ_0` part).
    fn history(&self, h: &[Complex64]) -> Complex64 {
        let n = h.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, v) in self.coeffs[1..n].iter().zip(h[..n - 1].iter().rev()) {
            acc += c * v;
        }
        acc
    }
}

/// Exterior decay factor `ν(z)` with `|ν| < 1` for `|z| > 1`.
pub fn decay_factor(ratio: f64, z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let w = one - Complex64::new(0.0, ratio) * (z - one) / (z + one);
    let s = (w * w - one).sqrt();
    let a = w + s;
    let b = w - s;
    // ν ν' = 1; take the reciprocal of the larger root
    if a.norm_sqr() >= b.norm_sqr() {
        one / a
    } else {
        one / b
    }
}

fn coefficients(ratio: f64, count: usize) -> Result<Vec<Complex64>> {
    let m = (8 * count).next_power_of_two();
    // r^M = 1e13: aliasing below 1e-13, roundoff growth r^count ≤ 1e13^(1/8)
    let log_r = 13.0 * libm::log(10.0) / m as f64;
    let r = libm::exp(log_r);
    let mut samples: Vec<Complex64> = (0..m)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / m as f64;
            decay_factor(ratio, Complex64::new(r * libm::cos(theta), r * libm::sin(theta)))
        })
        .collect();
    Fft::new(m)?.inverse(&mut samples);
    Ok(samples
        .into_iter()
        .take(count)
        .enumerate()
        .map(|(k, v)| v * libm::exp(log_r * k as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leading_coefficient_is_limit_at_infinity() {
        let ratio = 3.7;
        let k = BoundaryKernel::new(1.0, 1.0 / ratio, 1.0, 64).unwrap();
        let w = Complex64::new(1.0, -ratio);
        let one = Complex64::new(1.0, 0.0);
        let nu = w - (w * w - one).sqrt();
        let nu = if nu.norm() < 1.0 { nu } else { one / nu };
        assert!((k.coefficients()[0] - nu).norm() < 1e-12);
    }

    #[test]
    fn coefficients_resum_to_decay_factor() {
        // Σ ℓ_k z^{-k} at |z| = 1.3 reproduces ν(z)
        let ratio = 0.8;
        let k = BoundaryKernel::new(1.0, 1.0 / ratio, 1.0, 4000).unwrap();
        for theta in [0.1, 1.0, 2.5] {
            let z = Complex64::from_polar(1.3, theta);
            let mut zk = Complex64::new(1.0, 0.0);
            let mut s = Complex64::new(0.0, 0.0);
            for c in k.coefficients() {
                s += c * zk;
                zk /= z;
            }
            assert!((s - decay_factor(ratio, z)).norm() < 1e-11);
        }
    }

    #[test]
    fn decay_factor_is_inside_unit_disk() {
        for ratio in [0.01, 1.0, 100.0] {
            for j in 0..32 {
                let z = Complex64::from_polar(1.0001, j as f64 * 0.2);
                assert!(decay_factor(ratio, z).norm() < 1.0);
            }
        }
    }

    #[test]
    fn coefficients_decay() {
        let k = BoundaryKernel::new(15.0, 0.02, 0.658, 20000).unwrap();
        let c = k.coefficients();
        assert!(c[10000].norm() < c[100].norm());
        assert!(c.iter().all(|v| v.is_finite()));
    }
}
