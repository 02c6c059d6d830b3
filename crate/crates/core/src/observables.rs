//! Densities, currents, transmission, distance to the steady state, spectra.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft;
use crate::fields::Excitation;
use crate::physics::{Grid, PhysicalContext, PlaneWave};
use crate::tdse::{cis, WaveField};

/// Current density at one probe position over uniformly spaced times.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentTrace {
    pub probe_x: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl CurrentTrace {
    pub fn new(probe_x: f64, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::GridMismatch("times and values differ in length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("trace times must be strictly increasing"));
        }
        Ok(Self { probe_x, times, values })
    }

    /// Sampling interval, if the samples are uniform to 1e-9 relative.
    pub fn interval(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let n = self.times.len() - 1;
        let dt = (self.times[n] - self.times[0]) / n as f64;
        let uniform = self.times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt);
        uniform.then_some(dt)
    }
}

/// Density raster `rho[t][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    None,
    Hann,
}

/// One-sided power spectrum `|∫ (j(t) - j_b) w(t) e^{iωt} dt|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub omegas: Vec<f64>,
    pub power: Vec<f64>,
    /// Value subtracted from the trace before transforming.
    pub baseline: f64,
    pub window: Window,
    pub sample_interval: f64,
    /// Number of samples in the trace and after zero padding.
    pub samples: usize,
    pub padded_len: usize,
}

impl Spectrum {
    /// Frequency spacing of the padded transform.
    pub fn resolution(&self) -> f64 {
        2.0 * PI / (self.padded_len as f64 * self.sample_interval)
    }

    /// Power at the bin nearest to `omega`.
    pub fn power_at(&self, omega: f64) -> f64 {
        let m = libm::round(omega / self.resolution()) as usize;
        self.power[m.min(self.power.len() - 1)]
    }

    /// `(1/2π) ∫ |J(ω)|² dω` over positive and negative frequencies.
    pub fn energy(&self) -> f64 {
        let last = self.power.len() - 1;
        let inner: f64 = self.power[1..last].iter().sum();
        let total = self.power[0] + 2.0 * inner + self.power[last];
        total / (self.padded_len as f64 * self.sample_interval)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub omega: f64,
    pub power: f64,
    /// Height above the higher of the two flanking minima, in decades.
    pub prominence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    /// `Σ (ρ_s - ρ) a`.
    Signed,
    /// `Σ |ρ_s - ρ| a`.
    Absolute,
}

/// `|ψ0 + δψ|²` on the grid.
pub fn density(state: &WaveField, grid: &Grid) -> Vec<f64> {
    state.total(grid).iter().map(|p| p.norm_sqr()).collect()
}

/// `ψ` and `∂xψ` at an interior site; the incident part is differentiated
/// analytically, `δψ` by centered differences.
fn value_and_slope(state: &WaveField, grid: &Grid, site: usize) -> (Complex64, Complex64) {
    let d = &state.delta;
    let slope = (d[site + 1] - d[site - 1]) / (2.0 * grid.spacing);
    match &state.incident {
        None => (d[site], slope),
        Some(inc) => {
            let p0 = cis(inc.k * grid.x(site)) * inc.time_phase(state.time);
            (p0 + d[site], Complex64::new(0.0, inc.k) * p0 + slope)
        }
    }
}

/// `(ħ/m) Im[ψ* ∂xψ]` at interior site `site`.
pub fn local_current(ctx: &PhysicalContext, state: &WaveField, grid: &Grid, site: usize) -> f64 {
    let (psi, slope) = value_and_slope(state, grid, site);
    ctx.hbar / ctx.mass * (psi.conj() * slope).im
}

/// Canonical current at the interior site nearest to `probe_x`.
pub fn current_canonical(ctx: &PhysicalContext, state: &WaveField, grid: &Grid, probe_x: f64) -> f64 {
    local_current(ctx, state, grid, grid.interior_nearest(probe_x))
}

/// `j - (e/m) A ρ` at the interior site nearest to `probe_x`.
pub fn current_gauge_invariant(
    ctx: &PhysicalContext,
    state: &WaveField,
    grid: &Grid,
    excitation: &Excitation,
    probe_x: f64,
) -> f64 {
    let site = grid.interior_nearest(probe_x);
    let j = local_current(ctx, state, grid, site);
    let a = excitation.vector_potential(grid.x(site), state.time);
    if a == 0.0 {
        return j;
    }
    let (psi, _) = value_and_slope(state, grid, site);
    j - ctx.charge / ctx.mass * a * psi.norm_sqr()
}

/// Gauge-invariant current at every interior site of `lo..=hi`.
pub fn current_profile(
    ctx: &PhysicalContext,
    state: &WaveField,
    grid: &Grid,
    excitation: &Excitation,
    lo: usize,
    hi: usize,
) -> Vec<f64> {
    (lo.max(1)..=hi.min(grid.count - 2))
        .map(|i| current_gauge_invariant(ctx, state, grid, excitation, grid.x(i)))
        .collect()
}

/// `T(x, t) = j m / (ħk)`.
pub fn transmission_td(trace: &CurrentTrace, incident: &PlaneWave) -> Vec<f64> {
    let j0 = incident.current();
    trace.values.iter().map(|j| j / j0).collect()
}

/// Distance between a density and the steady state over `domain` (inclusive).
pub fn distance(rho: &[f64], rho_s: &[f64], spacing: f64, domain: (usize, usize), kind: DistanceKind) -> Result<f64> {
    if rho.len() != rho_s.len() {
        return Err(Error::GridMismatch("density and steady state differ in length"));
    }
    let (lo, hi) = domain;
    if lo > hi || hi >= rho.len() {
        return Err(Error::GridMismatch("distance domain outside the grid"));
    }
    let s: f64 = rho_s[lo..=hi]
        .iter()
        .zip(&rho[lo..=hi])
        .map(|(s, r)| match kind {
            DistanceKind::Signed => s - r,
            DistanceKind::Absolute => (s - r).abs(),
        })
        .sum();
    Ok(s * spacing)
}

/// Power spectrum of a uniformly sampled trace, zero padded to a power of two
/// of at least `pad_factor` times its length.
pub fn power_spectrum(
    trace: &CurrentTrace,
    baseline: Option<f64>,
    window: Window,
    pad_factor: usize,
) -> Result<Spectrum> {
    let dt = trace
        .interval()
        .ok_or(Error::Domain("spectrum needs uniformly sampled times"))?;
    let n = trace.values.len();
    let p = (pad_factor.max(1) * n).next_power_of_two();
    let b = baseline.unwrap_or(0.0);
    let mut data = vec![Complex64::new(0.0, 0.0); p];
    for (i, v) in trace.values.iter().enumerate() {
        let w = match window {
            Window::None => 1.0,
            Window::Hann => {
                let s = libm::sin(PI * i as f64 / (n - 1).max(1) as f64);
                s * s
            }
        };
        data[i] = Complex64::new((v - b) * w * dt, 0.0);
    }
    Fft::new(p)?.forward(&mut data);
    let half = p / 2;
    let resolution = 2.0 * PI / (p as f64 * dt);
    Ok(Spectrum {
        omegas: (0..=half).map(|m| m as f64 * resolution).collect(),
        power: data[..=half].iter().map(|c| c.norm_sqr()).collect(),
        baseline: b,
        window,
        sample_interval: dt,
        samples: n,
        padded_len: p,
    })
}

/// `∫ (j - j_b)² w² dt`, the time-domain side of Parseval's identity.
pub fn signal_energy(trace: &CurrentTrace, spectrum: &Spectrum) -> f64 {
    let n = trace.values.len();
    let dt = spectrum.sample_interval;
    trace
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = match spectrum.window {
                Window::None => 1.0,
                Window::Hann => {
                    let s = libm::sin(PI * i as f64 / (n - 1).max(1) as f64);
                    s * s
                }
            };
            let x = (v - spectrum.baseline) * w;
            x * x * dt
        })
        .sum()
}

/// Local maxima of the power spectrum whose prominence (in decades of power)
/// is at least `min_prominence`, strongest first. Bins below `floor` (relative
/// to the largest power) are ignored.
pub fn find_peaks(spectrum: &Spectrum, min_prominence: f64, floor: f64) -> Vec<Peak> {
    let p = &spectrum.power;
    let pmax = p.iter().cloned().fold(0.0, f64::max);
    if pmax <= 0.0 {
        return Vec::new();
    }
    let tiny = pmax * 1e-300_f64.max(floor * 1e-6);
    let log: Vec<f64> = p.iter().map(|v| libm::log10(v.max(tiny))).collect();
    let n = log.len();
    let mut peaks = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || log[i] > log[i - 1];
        let right_ok = i + 1 == n || log[i] >= log[i + 1];
        if !(left_ok && right_ok) || p[i] < floor * pmax {
            continue;
        }
        // walk outwards until a higher point; track the lowest value seen
        let mut lmin = log[i];
        let mut j = i;
        while j > 0 {
            j -= 1;
            if log[j] > log[i] {
                break;
            }
            lmin = lmin.min(log[j]);
        }
        let mut rmin = log[i];
        let mut j = i;
        while j + 1 < n {
            j += 1;
            if log[j] > log[i] {
                break;
            }
            rmin = rmin.min(log[j]);
        }
        let base = if i == 0 {
            rmin
        } else if i + 1 == n {
            lmin
        } else {
            lmin.max(rmin)
        };
        let prominence = log[i] - base;
        if prominence >= min_prominence {
            peaks.push(Peak {
                index: i,
                omega: spectrum.omegas[i],
                power: p[i],
                prominence,
            });
        }
    }
    peaks.sort_by(|a, b| b.power.total_cmp(&a.power));
    peaks
}

/// Peaks of the upper envelope of the spectrum, a running maximum over
/// `±half_width` that bridges the interference fringes of a finite pulse.
/// The `ω = 0` bin (net transferred charge) is kept as is. Each peak is
/// reported at the largest raw bin under its envelope plateau.
pub fn dominant_peaks(spectrum: &Spectrum, half_width: f64, min_prominence: f64) -> Vec<Peak> {
    let p = &spectrum.power;
    let n = p.len();
    let h = libm::round(half_width / spectrum.resolution()) as usize;
    let mut env = p.clone();
    for i in 1..n {
        let lo = i.saturating_sub(h).max(1);
        let hi = (i + h).min(n - 1);
        env[i] = p[lo..=hi].iter().cloned().fold(0.0, f64::max);
    }
    let enveloped = Spectrum {
        power: env,
        ..spectrum.clone()
    };
    let mut peaks = find_peaks(&enveloped, min_prominence, 0.0);
    for pk in peaks.iter_mut() {
        let hi = (pk.index + 2 * h).min(n - 1);
        let best = (pk.index..=hi)
            .max_by(|&a, &b| p[a].total_cmp(&p[b]))
            .unwrap_or(pk.index);
        pk.index = best;
        pk.omega = spectrum.omegas[best];
        pk.power = p[best];
    }
    peaks.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    peaks
}

/// Pointwise weighted sum of traces sharing probe and time grid.
pub fn superpose_currents(traces: &[CurrentTrace], weights: &[f64]) -> Result<CurrentTrace> {
    let first = traces.first().ok_or(Error::Domain("no traces to superpose"))?;
    if traces.len() != weights.len() {
        return Err(Error::GridMismatch("one weight per trace is required"));
    }
    let mut values = vec![0.0; first.values.len()];
    for (tr, w) in traces.iter().zip(weights) {
        if tr.times != first.times || tr.probe_x != first.probe_x {
            return Err(Error::GridMismatch("traces differ in probe or time grid"));
        }
        for (acc, v) in values.iter_mut().zip(&tr.values) {
            *acc += w * v;
        }
    }
    CurrentTrace::new(first.probe_x, first.times.clone(), values)
}

/// `max_i |(ρ⁺ - ρ⁻)/(2Δt) + (j_{i+1} - j_{i-1})/(2a)|` with the current
/// profile `j` given at the sites of `rho_mid`.
pub fn continuity_residual(rho_prev: &[f64], rho_next: &[f64], current: &[f64], dt: f64, spacing: f64) -> f64 {
    let n = current.len();
    (1..n.saturating_sub(1))
        .map(|i| ((rho_next[i] - rho_prev[i]) / (2.0 * dt) + (current[i + 1] - current[i - 1]) / (2.0 * spacing)).abs())
        .fold(0.0, f64::max)
}

/// First sample time after which `|values| < fraction·|reference|` holds for
/// the rest of the series; `None` if the last sample is still above.
pub fn settling_time(times: &[f64], values: &[f64], reference: f64, fraction: f64) -> Option<f64> {
    let thr = fraction * reference.abs();
    match values.iter().rposition(|v| v.abs() >= thr) {
        None => times.first().copied(),
        Some(i) if i + 1 < times.len() => Some(times[i + 1]),
        Some(_) => None,
    }
}

/// Linearly interpolated time of the last downward crossing of `level`.
pub fn last_downward_crossing(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    (1..values.len().min(times.len()))
        .rev()
        .find(|&n| values[n - 1] >= level && values[n] < level)
        .map(|n| {
            let f = (values[n - 1] - level) / (values[n - 1] - values[n]);
            times[n - 1] + f * (times[n] - times[n - 1])
        })
}

/// Least-squares speed `dx/dt` of the points `(x, t)`.
pub fn front_speed(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mt = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxt: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - mt)).sum();
    let stt: f64 = points.iter().map(|p| (p.1 - mt) * (p.1 - mt)).sum();
    (stt > 0.0).then(|| sxt / stt)
}
