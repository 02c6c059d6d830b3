//! Time-dependent propagation of the scattered wave `δψ = ψ - ψ0`.
//!
//! The incident plane wave `ψ0` is carried analytically; only `δψ`, which is
//! localized and outgoing, lives on the lattice. Two engines are available:
//! a Crank–Nicolson stepper with discrete transparent boundaries ([`cn`]) and
//! exact free flight on a zero-padded periodic box ([`spectral`]) for times
//! after the excitation has ended.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{Excitation, Gauge, SwitchSpec};
use crate::physics::{Grid, PhysicalContext};

pub mod cn;
pub mod kernel;
pub mod propagate;
pub mod spectral;

pub use cn::{BoundaryCondition, CrankNicolson};
pub use kernel::BoundaryKernel;
pub use propagate::{propagate, EnginePolicy, Propagation, RasterSpec, Sampling, Setup};
pub use spectral::FreeFlight;

#[inline]
pub(crate) fn cis(phi: f64) -> Complex64 {
    Complex64::new(libm::cos(phi), libm::sin(phi))
}

/// The analytically carried incident wave `e^{ikx} · phase · e^{-iω(t - t_ref)}`.
///
/// `omega` is chosen to match whichever engine evolves `δψ`, so that `ψ0` is an
/// exact solution of that engine's field-free dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentWave {
    pub k: f64,
    pub omega: f64,
    pub t_ref: f64,
    pub phase: Complex64,
}

impl IncidentWave {
    /// Incident wave evolving exactly under the lattice Hamiltonian.
    pub fn lattice(ctx: &PhysicalContext, k: f64, spacing: f64) -> Self {
        Self {
            k,
            omega: ctx.lattice_energy(k, spacing) / ctx.hbar,
            t_ref: 0.0,
            phase: Complex64::new(1.0, 0.0),
        }
    }

    /// Incident wave evolving exactly under Crank–Nicolson steps of size `dt`
    /// on the lattice (the Cayley-transform phase per step).
    pub fn crank_nicolson(ctx: &PhysicalContext, k: f64, spacing: f64, dt: f64) -> Self {
        let e = ctx.lattice_energy(k, spacing);
        Self {
            omega: 2.0 * libm::atan(0.5 * e * dt / ctx.hbar) / dt,
            ..Self::lattice(ctx, k, spacing)
        }
    }

    /// Time factor `phase · e^{-iω(t - t_ref)}`.
    pub fn time_phase(&self, t: f64) -> Complex64 {
        self.phase * cis(-self.omega * (t - self.t_ref))
    }

    pub fn value(&self, x: f64, t: f64) -> Complex64 {
        cis(self.k * x) * self.time_phase(t)
    }

    /// Same wave, continuing from time `t` with a new frequency.
    pub fn rebased(&self, t: f64, omega: f64) -> Self {
        Self {
            omega,
            t_ref: t,
            phase: self.time_phase(t),
            k: self.k,
        }
    }
}

/// Lattice state: scattered wave plus the analytic incident wave.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub delta: Vec<Complex64>,
    pub incident: Option<IncidentWave>,
    pub time: f64,
    pub gauge: Gauge,
}

impl WaveField {
    /// `δψ = 0` at `t = 0`: the unperturbed incident wave.
    pub fn initial(count: usize, incident: Option<IncidentWave>, gauge: Gauge) -> Self {
        Self {
            delta: alloc::vec![Complex64::new(0.0, 0.0); count],
            incident,
            time: 0.0,
            gauge,
        }
    }

    /// Total wavefunction `ψ0 + δψ` on the grid.
    pub fn total(&self, grid: &Grid) -> Vec<Complex64> {
        match &self.incident {
            None => self.delta.clone(),
            Some(inc) => {
                let tp = inc.time_phase(self.time);
                self.delta
                    .iter()
                    .enumerate()
                    .map(|(i, d)| cis(inc.k * grid.x(i)) * tp + d)
                    .collect()
            }
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.delta.iter().map(|d| d.norm_sqr()).sum()
    }
}

/// An excitation discretized on a grid: separable into a per-site profile and
/// a time factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    kind: CouplingKind,
    /// Sites where the profile may be nonzero (inclusive bounds).
    active: (usize, usize),
    /// Whether the profile reaches the grid ends (dipole approximation).
    uniform: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum CouplingKind {
    None,
    Scalar {
        /// `e·φ(x_j)` in eV.
        potential: Vec<f64>,
        switch: SwitchSpec,
    },
    Vector {
        /// Dimensionless spatial profile of `A`.
        profile: Vec<f64>,
        pulse: crate::fields::PulseSpec,
        /// `e/m`, `e²/2m` and `eħ/(4ma)`
        e_over_m: f64,
        e_sq_over_2m: f64,
        hop_scale: f64,
    },
}

impl Coupling {
    pub fn new(ctx: &PhysicalContext, grid: &Grid, excitation: &Excitation) -> Result<Self> {
        if let Some((lo, hi)) = excitation.support() {
            grid.check_support(lo, hi)?;
        }
        let n = grid.count;
        let (kind, uniform) = match *excitation {
            Excitation::None => (CouplingKind::None, false),
            Excitation::Scalar { barrier, switch } => (
                CouplingKind::Scalar {
                    potential: barrier.sample(ctx, grid),
                    switch,
                },
                false,
            ),
            Excitation::Pulse(pulse) | Excitation::UniformPulse(pulse) => {
                let uniform = matches!(excitation, Excitation::UniformPulse(_));
                let profile = if uniform {
                    alloc::vec![1.0; n]
                } else {
                    (0..n).map(|i| pulse.spatial_envelope(grid.x(i))).collect()
                };
                (
                    CouplingKind::Vector {
                        profile,
                        pulse,
                        e_over_m: ctx.charge / ctx.mass,
                        e_sq_over_2m: ctx.charge * ctx.charge / (2.0 * ctx.mass),
                        hop_scale: ctx.charge * ctx.hbar / (4.0 * ctx.mass * grid.spacing),
                    },
                    uniform,
                )
            }
        };
        let active = match &kind {
            CouplingKind::None => (0, 0),
            CouplingKind::Scalar { potential: p, .. } | CouplingKind::Vector { profile: p, .. } => {
                let first = p.iter().position(|v| *v != 0.0);
                let last = p.iter().rposition(|v| *v != 0.0);
                match (first, last) {
                    (Some(a), Some(b)) => (a, b),
                    _ => (0, 0),
                }
            }
        };
        Ok(Self { kind, active, uniform })
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, CouplingKind::None)
    }

    /// Inclusive range of sites carrying a nonzero profile.
    pub fn active_sites(&self) -> (usize, usize) {
        self.active
    }

    /// Vector potential at site `j` and time `t`.
    pub fn vector_potential(&self, j: usize, t: f64) -> f64 {
        match &self.kind {
            CouplingKind::Vector { profile, pulse, .. } => profile[j] * pulse.time_factor(t),
            _ => 0.0,
        }
    }

    /// `e/m`, or zero when there is no vector potential.
    pub fn charge_over_mass(&self) -> f64 {
        match &self.kind {
            CouplingKind::Vector { e_over_m, .. } => *e_over_m,
            _ => 0.0,
        }
    }

    /// Field-induced change of the Hamiltonian averaged over `[t0, t1]`:
    /// diagonal shifts and the (complex) shift of the upper off-diagonal
    /// `H_{j,j+1}`; the lower one is its conjugate. Index `j` of `upper`
    /// couples `j` and `j+1` (cyclically for the last entry).
    pub(crate) fn mean_perturbation(&self, t0: f64, t1: f64, diag: &mut [f64], upper: &mut [Complex64]) {
        let n = diag.len();
        diag.iter_mut().for_each(|d| *d = 0.0);
        upper.iter_mut().for_each(|u| *u = Complex64::new(0.0, 0.0));
        match &self.kind {
            CouplingKind::None => {}
            CouplingKind::Scalar { potential, switch } => {
                let chi = 0.5 * (switch.envelope(t0) + switch.envelope(t1));
                if chi != 0.0 {
                    let (a, b) = self.active;
                    for j in a..=b {
                        diag[j] = potential[j] * chi;
                    }
                }
            }
            CouplingKind::Vector {
                profile,
                pulse,
                e_sq_over_2m,
                hop_scale,
                ..
            } => {
                let f0 = pulse.time_factor(t0);
                let f1 = pulse.time_factor(t1);
                let mean = 0.5 * (f0 + f1);
                let mean_sq = 0.5 * (f0 * f0 + f1 * f1);
                if mean == 0.0 && mean_sq == 0.0 {
                    return;
                }
                let (a, b) = if self.uniform { (0, n - 1) } else { self.active };
                let lo = a.saturating_sub(1);
                for j in lo..=b {
                    let s = profile[j];
                    diag[j] = e_sq_over_2m * mean_sq * s * s;
                    let next = if j + 1 < n { profile[j + 1] } else { profile[0] };
                    upper[j] = Complex64::new(0.0, hop_scale * mean * (s + next));
                }
            }
        }
    }
}

/// `(H(t) - H0) ψ0(t)` on the lattice: the inhomogeneity driving `δψ`.
pub fn source_term(coupling: &Coupling, grid: &Grid, incident: &IncidentWave, t: f64) -> Vec<Complex64> {
    let n = grid.count;
    let mut diag = alloc::vec![0.0; n];
    let mut upper = alloc::vec![Complex64::new(0.0, 0.0); n];
    coupling.mean_perturbation(t, t, &mut diag, &mut upper);
    let psi0: Vec<Complex64> = (0..n).map(|i| incident.value(grid.x(i), t)).collect();
    apply_perturbation(&diag, &upper, &psi0, coupling.is_uniform())
}

pub(crate) fn apply_perturbation(
    diag: &[f64],
    upper: &[Complex64],
    psi: &[Complex64],
    periodic: bool,
) -> Vec<Complex64> {
    let n = psi.len();
    (0..n)
        .map(|j| {
            let mut s = psi[j] * diag[j];
            if j + 1 < n {
                s += upper[j] * psi[j + 1];
            } else if periodic {
                s += upper[j] * psi[0];
            }
            if j > 0 {
                s += upper[j - 1].conj() * psi[j - 1];
            } else if periodic {
                s += upper[n - 1].conj() * psi[n - 1];
            }
            s
        })
        .collect()
}

/// Time step giving a phase advance of 0.05 rad per step at the largest
/// energy the excitation is expected to populate.
pub fn suggested_time_step(ctx: &PhysicalContext, incident_energy: f64, excitation: &Excitation) -> f64 {
    let scale = match excitation {
        Excitation::None => incident_energy,
        Excitation::Scalar { barrier, .. } => incident_energy + (ctx.charge * barrier.phi_max).abs(),
        Excitation::Pulse(p) | Excitation::UniformPulse(p) => {
            incident_energy + ctx.hbar * p.omega0() + p.ponderomotive(ctx, p.x_start + 0.5 * p.length, 0.5 * p.tau)
        }
    };
    if scale > 0.0 {
        0.05 * ctx.hbar / scale
    } else {
        0.1
    }
}

pub(crate) fn check_periodic_incident(grid: &Grid, incident: &IncidentWave) -> Result<()> {
    let turns = incident.k * grid.spacing * grid.count as f64 / (2.0 * core::f64::consts::PI);
    if (turns - libm::round(turns)).abs() > 1e-9 * turns.max(1.0) {
        return Err(Error::Config("incident wave is not periodic on the box"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{BarrierSpec, PulseSpec};
    use approx::assert_relative_eq;

    #[test]
    fn no_excitation_no_source() {
        let ctx = PhysicalContext::default();
        let grid = Grid::spanning(0.0, 20.0, 0.05).unwrap();
        let c = Coupling::new(&ctx, &grid, &Excitation::None).unwrap();
        let inc = IncidentWave::lattice(&ctx, 1.19, 0.05);
        assert!(source_term(&c, &grid, &inc, 3.0).iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn scalar_source_on_plateau() {
        let ctx = PhysicalContext::default();
        let grid = Grid::spanning(0.0, 20.0, 0.05).unwrap();
        let barrier = BarrierSpec::new(0.08, 10.0, 5.0).unwrap();
        let switch = SwitchSpec::switch_on(5.0).unwrap();
        let c = Coupling::new(&ctx, &grid, &Excitation::Scalar { barrier, switch }).unwrap();
        let inc = IncidentWave::lattice(&ctx, 1.19, 0.05);
        let s = source_term(&c, &grid, &inc, 10.0);
        assert_relative_eq!(s[grid.nearest(10.0)].norm(), 0.08, max_relative = 1e-12);
        assert_eq!(s[grid.nearest(2.0)].norm(), 0.0);
        assert_eq!(source_term(&c, &grid, &inc, 0.0)[grid.nearest(10.0)].norm(), 0.0);
    }

    #[test]
    fn uniform_vector_source_is_multiple_of_incident() {
        let ctx = PhysicalContext::default();
        let a = 0.05;
        let grid = Grid::spanning(0.0, 99.95, a).unwrap();
        let pulse = PulseSpec::with_cycles(1.0, 800.0, 10.0, 1.0, 0.0).unwrap();
        let c = Coupling::new(&ctx, &grid, &Excitation::UniformPulse(pulse)).unwrap();
        let k = 2.0 * core::f64::consts::PI * 19.0 / (grid.count as f64 * a);
        let inc = IncidentWave::lattice(&ctx, k, a);
        let t = 7.0;
        let s = source_term(&c, &grid, &inc, t);
        let big_a = pulse.time_factor(t);
        // lattice form of [-(e/m) A ħk + e² A²/2m]
        let expect = -ctx.charge * ctx.hbar * (k * a).sin() / (ctx.mass * a) * big_a
            + ctx.charge * ctx.charge * big_a * big_a / (2.0 * ctx.mass);
        for j in 0..grid.count {
            let ratio = s[j] / inc.value(grid.x(j), t);
            assert!((ratio - Complex64::new(expect, 0.0)).norm() < 1e-12);
        }
        // continuum limit agrees to O((ka)²)
        let cont =
            -ctx.charge * ctx.hbar * k / ctx.mass * big_a + ctx.charge * ctx.charge * big_a * big_a / (2.0 * ctx.mass);
        assert_relative_eq!(expect, cont, max_relative = 1e-3);
    }

    #[test]
    fn support_must_stay_inside_region() {
        let ctx = PhysicalContext::default();
        let grid = Grid::spanning(0.0, 20.0, 0.05)
            .unwrap()
            .with_region((100, 300))
            .unwrap();
        let barrier = BarrierSpec::new(0.08, 10.0, 4.0).unwrap();
        let switch = SwitchSpec::switch_on(5.0).unwrap();
        assert!(Coupling::new(&ctx, &grid, &Excitation::Scalar { barrier, switch }).is_err());
    }

    #[test]
    fn incident_rebase_is_continuous() {
        let ctx = PhysicalContext::default();
        let inc = IncidentWave::crank_nicolson(&ctx, 1.2, 0.05, 0.02);
        let lat = IncidentWave::lattice(&ctx, 1.2, 0.05);
        assert!(inc.omega < lat.omega && (inc.omega - lat.omega).abs() < 1e-6);
        let r = inc.rebased(30.0, lat.omega);
        assert!((r.value(3.0, 30.0) - inc.value(3.0, 30.0)).norm() < 1e-14);
    }
}
