//! Exact free flight of `δψ` on an enlarged periodic box.
//!
//! Once the excitation is over, `δψ` evolves under `H0` only. The box is
//! zero-padded to `factor × N` sites (rounded up to a power of two), the
//! lattice Fourier coefficients are stored, and each is advanced by
//! `e^{-iE(q)Δ/ħ}` with the lattice band `E(q) = 4t' sin²(qa/2)`, so that the
//! result matches the field-free lattice dynamics with no time-step error.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::{cis, IncidentWave, WaveField};
use crate::error::{Error, Result};
use crate::fft::{bin_wavenumber, Fft};
use crate::physics::{Grid, PhysicalContext};

/// Fraction of the box at each end that must be (numerically) empty.
pub const EDGE_FRACTION: f64 = 0.05;
/// Largest admissible edge norm relative to the norm of `δψ`.
pub const EDGE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct FreeFlight {
    grid: Grid,
    offset: usize,
    start: f64,
    hbar: f64,
    incident: Option<IncidentWave>,
    gauge: crate::fields::Gauge,
    fft: Fft,
    coeffs: Vec<Complex64>,
    /// Mode energies `E(q_m)`.
    energies: Vec<f64>,
}

/// Norm of `δψ` in the outer `EDGE_FRACTION` of the box, relative to its total.
pub fn edge_norm(delta: &[Complex64]) -> f64 {
    let n = delta.len();
    let w = (libm::ceil(EDGE_FRACTION * n as f64) as usize).max(1).min(n);
    let total: f64 = delta.iter().map(|d| d.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let left: f64 = delta[..w].iter().map(|d| d.norm_sqr()).sum();
    let right: f64 = delta[n - w..].iter().map(|d| d.norm_sqr()).sum();
    libm::sqrt(left.max(right) / total)
}

impl FreeFlight {
    /// Pads `state` (living on `grid`) to at least `factor × N` sites.
    pub fn extend(state: &WaveField, grid: &Grid, ctx: &PhysicalContext, factor: usize) -> Result<Self> {
        if factor < 2 {
            return Err(Error::Config("extension factor must be at least 2"));
        }
        let n = grid.count;
        if state.delta.len() != n {
            return Err(Error::GridMismatch("state length differs from grid"));
        }
        let edge = edge_norm(&state.delta);
        if edge >= EDGE_TOLERANCE {
            return Err(Error::EdgeSupport { edge_norm: edge });
        }
        let m = (factor * n).next_power_of_two();
        let offset = (m - n) / 2;
        let ext = Grid::new(
            grid.x0 - offset as f64 * grid.spacing,
            grid.spacing,
            m,
            (grid.region.0 + offset, grid.region.1 + offset),
            grid.probes.clone(),
        )?;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
        coeffs[offset..offset + n].copy_from_slice(&state.delta);
        let fft = Fft::new(m)?;
        fft.forward(&mut coeffs);
        let energies = (0..m)
            .map(|j| ctx.lattice_energy(bin_wavenumber(j, m, grid.spacing), grid.spacing))
            .collect();
        let incident = state
            .incident
            .map(|inc| inc.rebased(state.time, ctx.lattice_energy(inc.k, grid.spacing) / ctx.hbar));
        Ok(Self {
            grid: ext,
            offset,
            start: state.time,
            hbar: ctx.hbar,
            incident,
            gauge: state.gauge,
            fft,
            coeffs,
            energies,
        })
    }

    /// The enlarged grid.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Index of the original site 0 on the enlarged grid.
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn start_time(&self) -> f64 {
        self.start
    }

    pub fn incident(&self) -> Option<IncidentWave> {
        self.incident
    }

    /// `δψ` and the incident wave at time `t`, on the enlarged grid.
    pub fn state_at(&self, t: f64) -> WaveField {
        let dt = t - self.start;
        let mut data: Vec<Complex64> = self
            .coeffs
            .iter()
            .zip(&self.energies)
            .map(|(c, e)| c * cis(-e * dt / self.hbar))
            .collect();
        self.fft.inverse(&mut data);
        WaveField {
            delta: data,
            incident: self.incident,
            time: t,
            gauge: self.gauge,
        }
    }

    /// Samples `δψ` and its centered difference `(δ_{j+1} - δ_{j-1})/2a` at
    /// site `site` of the enlarged grid at the uniform times
    /// `start + interval · s`, `s = first, …, first + count - 1`.
    /// Modes below `prune × max|c|` are dropped.
    pub fn sample_site(
        &self,
        site: usize,
        interval: f64,
        first: usize,
        count: usize,
        prune: f64,
    ) -> Vec<(Complex64, Complex64)> {
        let m = self.coeffs.len();
        let a = self.grid.spacing;
        let cmax = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let keep: Vec<usize> = (0..m).filter(|&j| self.coeffs[j].norm() > prune * cmax).collect();
        let scale = 1.0 / m as f64;
        let steps: Vec<Complex64> = keep
            .iter()
            .map(|&j| cis(-self.energies[j] * interval / self.hbar))
            .collect();
        let slopes: Vec<f64> = keep
            .iter()
            .map(|&j| libm::sin(bin_wavenumber(j, m, a) * a) / a)
            .collect();
        let mut out = Vec::with_capacity(count);
        let mut phasor: Vec<Complex64> = Vec::with_capacity(keep.len());
        const RESYNC: usize = 512;
        for s in 0..count {
            if s % RESYNC == 0 {
                let t = interval * (first + s) as f64;
                phasor.clear();
                phasor.extend(keep.iter().map(|&j| {
                    let spatial = 2.0 * PI * ((j * site) % m) as f64 / m as f64;
                    self.coeffs[j] * scale * cis(spatial - self.energies[j] * t / self.hbar)
                }));
            } else {
                for (p, st) in phasor.iter_mut().zip(&steps) {
                    *p *= st;
                }
            }
            let mut value = Complex64::new(0.0, 0.0);
            let mut slope = Complex64::new(0.0, 0.0);
            for (p, q) in phasor.iter().zip(&slopes) {
                value += p;
                slope += p * q;
            }
            out.push((value, Complex64::new(0.0, 1.0) * slope));
        }
        out
    }
}
