//! Excitation builders: the switched scalar barrier, the localized laser
//! vector potential, its electric field and the ponderomotive potential.
//!
//! Every builder returns exactly `0.0` outside its declared support.

use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::physics::{Grid, PhysicalContext, SPEED_OF_LIGHT};
use alloc::vec::Vec;

#[inline]
fn sin2(x: f64) -> f64 {
    let s = libm::sin(x);
    s * s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BarrierShape {
    /// sin² ramps over the outer tenths of the support, flat in between.
    #[default]
    Smooth,
    /// Flat top with hard edges; sampled by cell averaging on a lattice.
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSpec {
    /// Plateau height in V.
    pub phi_max: f64,
    /// Support length in nm.
    pub length: f64,
    /// Left edge of the support in nm.
    pub x_start: f64,
    pub shape: BarrierShape,
}

impl BarrierSpec {
    pub fn new(phi_max: f64, length: f64, x_start: f64) -> Result<Self> {
        if !(length > 0.0) || !phi_max.is_finite() || !x_start.is_finite() {
            return Err(Error::Config("barrier needs a finite height and positive length"));
        }
        Ok(Self {
            phi_max,
            length,
            x_start,
            shape: BarrierShape::Smooth,
        })
    }

    pub fn rectangular(phi_max: f64, length: f64, x_start: f64) -> Result<Self> {
        Ok(Self {
            shape: BarrierShape::Rectangular,
            ..Self::new(phi_max, length, x_start)?
        })
    }

    pub fn with_height(self, phi_max: f64) -> Self {
        Self { phi_max, ..self }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.x_start, self.x_start + self.length)
    }

    /// Scalar potential φ(x) in V.
    pub fn profile(&self, x: f64) -> f64 {
        let l = self.length;
        let s = x - self.x_start;
        if !(s > 0.0 && s < l) {
            return 0.0;
        }
        match self.shape {
            BarrierShape::Rectangular => self.phi_max,
            BarrierShape::Smooth => {
                if s <= 0.1 * l {
                    self.phi_max * sin2(5.0 * PI * s / l)
                } else if s <= 0.9 * l {
                    self.phi_max
                } else {
                    self.phi_max * (1.0 - sin2(5.0 * PI * s / l - 4.5 * PI))
                }
            }
        }
    }

    /// Potential energy `e·φ` on every site of the grid (eV).
    ///
    /// The smooth profile is point sampled; the rectangular one is averaged
    /// over each site's cell so that its edges need not sit on the lattice.
    pub fn sample(&self, ctx: &PhysicalContext, grid: &Grid) -> Vec<f64> {
        let (lo, hi) = self.support();
        let a = grid.spacing;
        (0..grid.count)
            .map(|i| {
                let x = grid.x(i);
                let phi = match self.shape {
                    BarrierShape::Smooth => self.profile(x),
                    BarrierShape::Rectangular => {
                        let overlap = (x + 0.5 * a).min(hi) - (x - 0.5 * a).max(lo);
                        if overlap > 0.0 {
                            self.phi_max * overlap / a
                        } else {
                            0.0
                        }
                    }
                };
                ctx.charge * phi
            })
            .collect()
    }
}

/// Switching envelope χ(t): sin² ramp up, plateau, optional sin² ramp down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchSpec {
    pub ramp_on: f64,
    /// `None` keeps the potential on forever.
    pub plateau: Option<f64>,
    pub ramp_off: f64,
}

impl SwitchSpec {
    pub fn switch_on(ramp_on: f64) -> Result<Self> {
        if !(ramp_on > 0.0) {
            return Err(Error::Config("switch-on ramp must be positive"));
        }
        Ok(Self {
            ramp_on,
            plateau: None,
            ramp_off: 0.0,
        })
    }

    pub fn on_off(ramp_on: f64, plateau: f64, ramp_off: f64) -> Result<Self> {
        if !(ramp_on > 0.0 && ramp_off > 0.0 && plateau >= 0.0) {
            return Err(Error::Config("switch ramps must be positive and plateau non-negative"));
        }
        Ok(Self {
            ramp_on,
            plateau: Some(plateau),
            ramp_off,
        })
    }

    /// Time at which χ returns to zero for good.
    pub fn end_time(&self) -> Option<f64> {
        self.plateau.map(|p| self.ramp_on + p + self.ramp_off)
    }

    pub fn envelope(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t < self.ramp_on {
            return sin2(0.5 * PI * t / self.ramp_on);
        }
        let plateau = match self.plateau {
            None => return 1.0,
            Some(p) => p,
        };
        let off = self.ramp_on + plateau;
        if t <= off {
            1.0
        } else if t < off + self.ramp_off {
            sin2(0.5 * PI * (1.0 - (t - off) / self.ramp_off))
        } else {
            0.0
        }
    }
}

/// Localized few-cycle pulse in the velocity gauge,
/// `A(x,t) = a0 sin²(πx/L) sin²(πt/τ) sin(ω0 t)` on `[0,L]×[0,τ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    /// Peak field in V/nm.
    pub f0: f64,
    /// Central wavelength in nm.
    pub lambda0: f64,
    /// Total duration in fs.
    pub tau: f64,
    /// Support length in nm.
    pub length: f64,
    pub x_start: f64,
}

impl PulseSpec {
    pub fn new(f0: f64, lambda0: f64, tau: f64, length: f64, x_start: f64) -> Result<Self> {
        if !(lambda0 > 0.0 && tau > 0.0 && length > 0.0) || !f0.is_finite() || !x_start.is_finite() {
            return Err(Error::Config("pulse needs positive wavelength, duration and length"));
        }
        Ok(Self {
            f0,
            lambda0,
            tau,
            length,
            x_start,
        })
    }

    /// Pulse lasting exactly `cycles` carrier periods.
    pub fn with_cycles(f0: f64, lambda0: f64, cycles: f64, length: f64, x_start: f64) -> Result<Self> {
        if !(cycles > 0.0) {
            return Err(Error::Config("cycle count must be positive"));
        }
        let tau = cycles * lambda0 / SPEED_OF_LIGHT;
        Self::new(f0, lambda0, tau, length, x_start)
    }

    /// Carrier angular frequency in fs⁻¹.
    pub fn omega0(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.lambda0
    }

    /// Vector-potential amplitude `f0/ω0` in V·fs/nm.
    pub fn a0(&self) -> f64 {
        self.f0 / self.omega0()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.x_start, self.x_start + self.length)
    }

    /// Spatial envelope sin²(πx/L), zero outside the support.
    pub fn spatial_envelope(&self, x: f64) -> f64 {
        let s = x - self.x_start;
        if s > 0.0 && s < self.length {
            sin2(PI * s / self.length)
        } else {
            0.0
        }
    }

    /// Temporal envelope sin²(πt/τ), zero outside `[0, τ]`.
    pub fn temporal_envelope(&self, t: f64) -> f64 {
        if t > 0.0 && t < self.tau {
            sin2(PI * t / self.tau)
        } else {
            0.0
        }
    }

    /// Spatially uniform factor `a0 sin²(πt/τ) sin(ω0 t)`.
    pub fn time_factor(&self, t: f64) -> f64 {
        let env = self.temporal_envelope(t);
        if env == 0.0 {
            return 0.0;
        }
        self.a0() * env * libm::sin(self.omega0() * t)
    }

    pub fn vector_potential(&self, x: f64, t: f64) -> f64 {
        let sx = self.spatial_envelope(x);
        if sx == 0.0 {
            return 0.0;
        }
        sx * self.time_factor(t)
    }

    /// Uniform-profile field `−dA/dt` in V/nm with the spatial factor dropped.
    pub fn time_field(&self, t: f64) -> f64 {
        if !(t > 0.0 && t < self.tau) {
            return 0.0;
        }
        let w = self.omega0();
        let p = PI / self.tau;
        let env = sin2(p * t);
        let denv = p * libm::sin(2.0 * p * t);
        -self.a0() * (denv * libm::sin(w * t) + env * w * libm::cos(w * t))
    }

    /// Electric field `F = −∂A/∂t` in V/nm, analytic product rule.
    pub fn electric_field(&self, x: f64, t: f64) -> f64 {
        let sx = self.spatial_envelope(x);
        if sx == 0.0 {
            return 0.0;
        }
        sx * self.time_field(t)
    }

    /// Slowly varying field amplitude `f0 sin²(πx/L) sin²(πt/τ)`.
    pub fn field_amplitude(&self, x: f64, t: f64) -> f64 {
        self.f0 * self.spatial_envelope(x) * self.temporal_envelope(t)
    }

    /// Ponderomotive energy `e²ℰ0²/(4mω0²)` in eV.
    pub fn ponderomotive(&self, ctx: &PhysicalContext, x: f64, t: f64) -> f64 {
        let e0 = self.field_amplitude(x, t);
        if e0 == 0.0 {
            return 0.0;
        }
        let w = self.omega0();
        ctx.charge * ctx.charge * e0 * e0 / (4.0 * ctx.mass * w * w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    Scalar,
    Velocity,
}

/// One of the excitations driving the wire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Excitation {
    None,
    /// `Φ(x,t) = φ(x) χ(t)`, no vector potential.
    Scalar {
        barrier: BarrierSpec,
        switch: SwitchSpec,
    },
    /// Localized vector potential pulse, no scalar potential.
    Pulse(PulseSpec),
    /// The same pulse in the dipole approximation: `A` depends on time only.
    /// Its support is the whole line, so it only makes sense on periodic boxes.
    UniformPulse(PulseSpec),
}

impl Excitation {
    pub fn gauge(&self) -> Gauge {
        match self {
            Excitation::None | Excitation::Scalar { .. } => Gauge::Scalar,
            Excitation::Pulse(_) | Excitation::UniformPulse(_) => Gauge::Velocity,
        }
    }

    /// Spatial support, `None` for no excitation and for the uniform pulse.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            Excitation::None | Excitation::UniformPulse(_) => None,
            Excitation::Scalar { barrier, .. } => Some(barrier.support()),
            Excitation::Pulse(p) => Some(p.support()),
        }
    }

    /// Time after which the excitation is identically zero, if any.
    pub fn end_time(&self) -> Option<f64> {
        match self {
            Excitation::None => Some(0.0),
            Excitation::Scalar { switch, .. } => switch.end_time(),
            Excitation::Pulse(p) | Excitation::UniformPulse(p) => Some(p.tau),
        }
    }

    /// Scalar potential Φ(x,t) in V.
    pub fn scalar_potential(&self, x: f64, t: f64) -> f64 {
        match self {
            Excitation::Scalar { barrier, switch } => {
                let chi = switch.envelope(t);
                if chi == 0.0 {
                    0.0
                } else {
                    barrier.profile(x) * chi
                }
            }
            _ => 0.0,
        }
    }

    /// Vector potential A(x,t) in V·fs/nm.
    pub fn vector_potential(&self, x: f64, t: f64) -> f64 {
        match self {
            Excitation::Pulse(p) => p.vector_potential(x, t),
            Excitation::UniformPulse(p) => p.time_factor(t),
            _ => 0.0,
        }
    }
}
