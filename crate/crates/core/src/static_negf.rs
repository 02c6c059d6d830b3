//! Steady-state scattering on the tight-binding lattice: semi-infinite lead
//! self-energies, the retarded Green's function and Landauer transmission.
//!
//! The device is the finite chain `0..N` with onsite `2t' + V_i` and hopping
//! `-t'`; identical field-free leads are attached to sites `0` and `N-1`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::BarrierSpec;
use crate::physics::{Grid, PhysicalContext};
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHamiltonian {
    /// `2t' + V_i` in eV.
    pub onsite: Vec<f64>,
    /// `t' = ħ²/(2ma²)` in eV.
    pub hopping: f64,
    pub x0: f64,
    pub spacing: f64,
}

impl DiscreteHamiltonian {
    pub fn len(&self) -> usize {
        self.onsite.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onsite.is_empty()
    }

    /// Upper edge `4t'` of the lead band.
    pub fn band_top(&self) -> f64 {
        4.0 * self.hopping
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.spacing
    }
}

pub fn build_hamiltonian(ctx: &PhysicalContext, grid: &Grid, potential: &[f64]) -> Result<DiscreteHamiltonian> {
    if potential.len() != grid.count {
        return Err(Error::Config("potential length differs from the grid"));
    }
    if potential[0] != 0.0 || potential[grid.count - 1] != 0.0 {
        return Err(Error::Config("potential must vanish at the lead attachment sites"));
    }
    let t = ctx.hopping(grid.spacing);
    Ok(DiscreteHamiltonian {
        onsite: potential.iter().map(|v| 2.0 * t + v).collect(),
        hopping: t,
        x0: grid.x0,
        spacing: grid.spacing,
    })
}

/// Lead wavenumber times spacing, `ka ∈ (0, π)`, for an in-band energy.
pub fn lead_phase(t_prime: f64, energy: f64) -> Result<f64> {
    let top = 4.0 * t_prime;
    if !(energy > 0.0 && energy < top) {
        return Err(Error::OutOfBand { energy, band_top: top });
    }
    // E = 4t' sin²(ka/2)
    Ok(2.0 * libm::asin(libm::sqrt(energy / top)))
}

/// Retarded self-energy `Σ = -t' e^{ika}` of a semi-infinite lead.
pub fn lead_self_energy(t_prime: f64, energy: f64) -> Result<Complex64> {
    let ka = lead_phase(t_prime, energy)?;
    Ok(-t_prime * Complex64::new(libm::cos(ka), libm::sin(ka)))
}

/// Broadening `Γ = i(Σ - Σ*) = 2t' sin(ka)`.
pub fn broadening(t_prime: f64, energy: f64) -> Result<f64> {
    let ka = lead_phase(t_prime, energy)?;
    Ok(2.0 * t_prime * libm::sin(ka))
}

/// `(E - H - Σ_L - Σ_R) x = rhs`, solved in place.
fn solve_open(h: &DiscreteHamiltonian, energy: f64, rhs: &mut [Complex64]) -> Result<()> {
    let n = h.len();
    let sigma = lead_self_energy(h.hopping, energy)?;
    let off = vec![Complex64::new(h.hopping, 0.0); n];
    let mut diag: Vec<Complex64> = h.onsite.iter().map(|&d| Complex64::new(energy - d, 0.0)).collect();
    diag[0] -= sigma;
    diag[n - 1] -= sigma;
    Tridiagonal::new(n).solve(&off, &diag, &off, rhs)
}

/// Landauer transmission `Γ_L |G^R_{1N}|² Γ_R`.
pub fn transmission(h: &DiscreteHamiltonian, energy: f64) -> Result<f64> {
    let n = h.len();
    let gamma = broadening(h.hopping, energy)?;
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    col[n - 1] = Complex64::new(1.0, 0.0);
    solve_open(h, energy, &mut col)?;
    Ok(gamma * gamma * col[0].norm_sqr())
}

/// Scattering state for a unit-amplitude wave `e^{ikx}` incident from the left.
pub fn scattering_state(h: &DiscreteHamiltonian, energy: f64) -> Result<Vec<Complex64>> {
    let n = h.len();
    let ka = lead_phase(h.hopping, energy)?;
    let k = ka / h.spacing;
    let gamma = 2.0 * h.hopping * libm::sin(ka);
    let mut psi = vec![Complex64::new(0.0, 0.0); n];
    let phase = k * h.x0;
    psi[0] = Complex64::new(0.0, gamma) * Complex64::new(libm::cos(phase), libm::sin(phase));
    solve_open(h, energy, &mut psi)?;
    Ok(psi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionCurve {
    pub energies: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn transmission_curve(h: &DiscreteHamiltonian, energies: &[f64]) -> Result<TransmissionCurve> {
    let values = energies
        .iter()
        .map(|&e| transmission(h, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(TransmissionCurve {
        energies: energies.to_vec(),
        values,
    })
}

/// Barrier height that yields a prescribed transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// V
    pub phi_max: f64,
    /// Transmission at `phi_max`.
    pub transmission: f64,
    /// Whether T(φ) was non-increasing on the bracketing scan.
    pub monotone: bool,
}

const CALIBRATION_SCAN: usize = 64;
const CALIBRATION_TOL: f64 = 1e-10;

/// Root-finds the barrier height (the shape's own `phi_max` is ignored) such
/// that the transmission at `energy` equals `target`.
pub fn calibrate_barrier(
    ctx: &PhysicalContext,
    grid: &Grid,
    shape: &BarrierSpec,
    energy: f64,
    target: f64,
) -> Result<Calibration> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::Domain("target transmission must lie in (0, 1]"));
    }
    let eval = |phi: f64| -> Result<f64> {
        let v = shape.with_height(phi).sample(ctx, grid);
        transmission(&build_hamiltonian(ctx, grid, &v)?, energy)
    };
    if target == 1.0 {
        return Ok(Calibration {
            phi_max: 0.0,
            transmission: eval(0.0)?,
            monotone: true,
        });
    }
    let upper = 20.0 * energy / ctx.charge;
    let mut prev = (0.0, eval(0.0)?);
    let mut monotone = true;
    let mut bracket = None;
    for j in 1..=CALIBRATION_SCAN {
        let phi = upper * j as f64 / CALIBRATION_SCAN as f64;
        let t = eval(phi)?;
        if t > prev.1 + 1e-9 {
            monotone = false;
        }
        if bracket.is_none() && t <= target {
            bracket = Some((prev, (phi, t)));
        }
        prev = (phi, t);
    }
    let ((mut lo, mut t_lo), (mut hi, mut t_hi)) = bracket.ok_or(Error::Calibration { upper })?;
    for _ in 0..200 {
        if (t_lo - target).abs() < CALIBRATION_TOL || (hi - lo) <= 1e-15 * upper {
            break;
        }
        if (t_hi - target).abs() < CALIBRATION_TOL {
            lo = hi;
            t_lo = t_hi;
            break;
        }
        let mid = 0.5 * (lo + hi);
        let t = eval(mid)?;
        if t > target {
            lo = mid;
            t_lo = t;
        } else {
            hi = mid;
            t_hi = t;
        }
    }
    let (phi, t) = if (t_lo - target).abs() <= (t_hi - target).abs() {
        (lo, t_lo)
    } else {
        (hi, t_hi)
    };
    Ok(Calibration {
        phi_max: phi,
        transmission: t,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn free_wire(n: usize, a: f64) -> DiscreteHamiltonian {
        let ctx = PhysicalContext::default();
        let grid = Grid::spanning(0.0, (n - 1) as f64 * a, a).unwrap();
        build_hamiltonian(&ctx, &grid, &vec![0.0; grid.count]).unwrap()
    }

    #[test]
    fn hopping_at_default_spacing() {
        let h = free_wire(10, 0.05);
        assert_relative_eq!(h.hopping, 15.239, max_relative = 1e-4);
    }

    #[test]
    fn closed_chain_spectrum_inside_band() {
        // Sturm counts of eigenvalues below 0 and below 4t'
        let h = free_wire(200, 0.05);
        let t = h.hopping;
        let count_below = |x: f64| {
            let mut q = h.onsite[0] - x;
            let mut c = usize::from(q < 0.0);
            for d in &h.onsite[1..] {
                q = d - x - t * t / q;
                c += usize::from(q < 0.0);
            }
            c
        };
        assert_eq!(count_below(0.0), 0);
        assert_eq!(count_below(4.0 * t), h.len());
    }

    #[test]
    fn constant_shift() {
        let ctx = PhysicalContext::default();
        let grid = Grid::spanning(0.0, 1.0, 0.1).unwrap();
        let mut v = vec![0.25; grid.count];
        v[0] = 0.0;
        v[grid.count - 1] = 0.0;
        let h0 = build_hamiltonian(&ctx, &grid, &vec![0.0; grid.count]).unwrap();
        let h1 = build_hamiltonian(&ctx, &grid, &v).unwrap();
        for i in 1..grid.count - 1 {
            assert_relative_eq!(h1.onsite[i] - h0.onsite[i], 0.25, max_relative = 1e-12);
        }
    }

    #[test]
    fn boundary_potential_rejected() {
        let ctx = PhysicalContext::default();
        let grid = Grid::spanning(0.0, 1.0, 0.1).unwrap();
        let mut v = vec![0.0; grid.count];
        v[0] = 0.1;
        assert!(matches!(build_hamiltonian(&ctx, &grid, &v), Err(Error::Config(_))));
    }

    #[test]
    fn self_energy_limits() {
        let t = 2.0;
        let s = lead_self_energy(t, 1e-12).unwrap();
        assert!((s - Complex64::new(-t, 0.0)).norm() < 1e-5);
        let s = lead_self_energy(t, 2.0 * t).unwrap();
        assert!((s - Complex64::new(0.0, -t)).norm() < 1e-14);
        for e in [0.1, 1.0, 5.0, 7.9] {
            assert!(lead_self_energy(t, e).unwrap().im < 0.0);
        }
        assert!(matches!(lead_self_energy(t, 0.0), Err(Error::OutOfBand { .. })));
        assert!(matches!(lead_self_energy(t, 8.0), Err(Error::OutOfBand { .. })));
    }

    #[test]
    fn broadening_matches_lattice_velocity() {
        let ctx = PhysicalContext::default();
        let a = 0.05;
        let t = ctx.hopping(a);
        for e in [0.01, 0.054, 1.0, 20.0] {
            let ka = lead_phase(t, e).unwrap();
            let v = 2.0 * t * a / ctx.hbar * ka.sin();
            let sigma = lead_self_energy(t, e).unwrap();
            let gamma = (Complex64::i() * (sigma - sigma.conj())).re;
            assert_relative_eq!(gamma, ctx.hbar * v / a, max_relative = 1e-12);
            assert_relative_eq!(gamma, broadening(t, e).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn perfect_wire() {
        let h = free_wire(300, 0.05);
        let t = h.hopping;
        for j in 0..50 {
            let ka = 0.05 + (PI - 0.1) * j as f64 / 49.0;
            let e = 2.0 * t * (1.0 - ka.cos());
            assert!((transmission(&h, e).unwrap() - 1.0).abs() < 1e-10);
        }
        let psi = scattering_state(&h, 0.054).unwrap();
        for p in &psi {
            assert!((p.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn scattering_state_phase_follows_incident_wave() {
        let h = free_wire(100, 0.05);
        let e = 0.2;
        let k = lead_phase(h.hopping, e).unwrap() / h.spacing;
        let psi = scattering_state(&h, e).unwrap();
        for (i, p) in psi.iter().enumerate() {
            let x = h.x(i);
            assert!((p - Complex64::new((k * x).cos(), (k * x).sin())).norm() < 1e-10);
        }
    }

    #[test]
    fn scattering_state_agrees_with_transmission() {
        let ctx = PhysicalContext::default();
        let grid = Grid::spanning(0.0, 30.0, 0.05).unwrap();
        let b = BarrierSpec::new(0.06, 3.0, 13.0).unwrap();
        let h = build_hamiltonian(&ctx, &grid, &b.sample(&ctx, &grid)).unwrap();
        let tr = transmission(&h, 0.054).unwrap();
        let psi = scattering_state(&h, 0.054).unwrap();
        assert!(tr > 0.05 && tr < 0.95);
        for p in &psi[grid.nearest(17.0)..] {
            assert!((p.norm_sqr() - tr).abs() < 1e-8);
        }
        // reflection side standing wave between (1 ∓ √R)²
        let r = 1.0 - tr;
        let left = &psi[..grid.nearest(12.0)];
        let hi = left.iter().map(|p| p.norm_sqr()).fold(0.0, f64::max);
        let lo = left.iter().map(|p| p.norm_sqr()).fold(f64::MAX, f64::min);
        assert!((hi - (1.0 + r.sqrt()).powi(2)).abs() < 1e-3);
        assert!((lo - (1.0 - r.sqrt()).powi(2)).abs() < 1e-3);
    }

    #[test]
    fn calibration_hits_target() {
        let ctx = PhysicalContext::default();
        let grid = Grid::spanning(0.0, 12.0, 0.05).unwrap();
        let b = BarrierSpec::new(0.0, 4.0, 4.0).unwrap();
        let cal = calibrate_barrier(&ctx, &grid, &b, 0.054, 0.5).unwrap();
        assert!(cal.phi_max > 0.0);
        assert!((cal.transmission - 0.5).abs() < 1e-6);
        let v = b.with_height(cal.phi_max).sample(&ctx, &grid);
        let t = transmission(&build_hamiltonian(&ctx, &grid, &v).unwrap(), 0.054).unwrap();
        assert!((t - 0.5).abs() < 1e-6);
        let again = calibrate_barrier(&ctx, &grid, &b, 0.054, 0.5).unwrap();
        assert_eq!(again, cal);

        let one = calibrate_barrier(&ctx, &grid, &b, 0.054, 1.0).unwrap();
        assert_eq!(one.phi_max, 0.0);
        assert!(calibrate_barrier(&ctx, &grid, &b, 0.054, 0.0).is_err());
    }

    #[test]
    fn calibration_without_bracket_fails() {
        // barrier far too narrow to block anything within 20 E
        let ctx = PhysicalContext::default();
        let grid = Grid::spanning(0.0, 12.0, 0.05).unwrap();
        let b = BarrierSpec::new(0.0, 0.1, 6.0).unwrap();
        assert!(matches!(
            calibrate_barrier(&ctx, &grid, &b, 0.054, 1e-6),
            Err(Error::Calibration { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn transmission_is_a_probability(
            heights in proptest::collection::vec(-0.5f64..0.5, 40),
            e in 0.001f64..2.0,
        ) {
            let ctx = PhysicalContext::default();
            let grid = Grid::spanning(0.0, 4.1, 0.1).unwrap();
            let mut v = vec![0.0; grid.count];
            v[1..41].copy_from_slice(&heights);
            let h = build_hamiltonian(&ctx, &grid, &v).unwrap();
            let t = transmission(&h, e).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&t));
        }
    }
}
