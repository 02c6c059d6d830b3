//! Iterative radix-2 FFT for power-of-two lengths.
//!
//! Forward transform is `X_m = Σ x_n e^{-2πi mn/N}`; `inverse` includes the
//! `1/N` factor.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Fft {
    len: usize,
    /// `e^{-2πi j/N}` for `j < N/2`.
    twiddles: Vec<Complex64>,
}

impl Fft {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::Config("FFT length must be a power of two"));
        }
        let twiddles = (0..len / 2)
            .map(|j| {
                let phi = -2.0 * PI * j as f64 / len as f64;
                Complex64::new(libm::cos(phi), libm::sin(phi))
            })
            .collect();
        Ok(Self { len, twiddles })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / self.len as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.len;
        assert_eq!(data.len(), n, "FFT length mismatch");
        if n == 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                data.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for j in 0..half {
                    let mut w = self.twiddles[j * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let u = data[start + j];
                    let v = data[start + j + half] * w;
                    data[start + j] = u + v;
                    data[start + j + half] = u - v;
                }
            }
            half *= 2;
        }
    }
}

/// Signed wavenumber of FFT bin `m` on a periodic box of `len` sites.
pub fn bin_wavenumber(m: usize, len: usize, spacing: f64) -> f64 {
    let signed = if m <= len / 2 { m as f64 } else { m as f64 - len as f64 };
    2.0 * PI * signed / (len as f64 * spacing)
}
