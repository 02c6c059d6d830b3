//! Unit system, lattice and the plane-wave reference state.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Speed of light in nm/fs.
pub const SPEED_OF_LIGHT: f64 = 299.792458;

/// Reduced Planck constant in eV·fs.
pub const HBAR: f64 = 0.6582119569;

/// Free-electron mass in eV·fs²/nm².
pub const ELECTRON_MASS: f64 = 5.685630;

/// Constants defining the parabolic band and every derived scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalContext {
    /// eV·fs
    pub hbar: f64,
    /// eV·fs²/nm²
    pub mass: f64,
    /// Elementary charge; `charge * V` is an energy in eV.
    pub charge: f64,
}

impl Default for PhysicalContext {
    fn default() -> Self {
        Self {
            hbar: HBAR,
            mass: ELECTRON_MASS,
            charge: 1.0,
        }
    }
}

impl PhysicalContext {
    pub fn new(hbar: f64, mass: f64, charge: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::Domain("hbar must be positive"));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Domain("mass must be positive"));
        }
        if !charge.is_finite() {
            return Err(Error::Domain("charge must be finite"));
        }
        Ok(Self { hbar, mass, charge })
    }

    /// Context with the default constants and an effective mass `ratio * m_e`.
    pub fn with_mass_ratio(ratio: f64) -> Result<Self> {
        Self::new(HBAR, ratio * ELECTRON_MASS, 1.0)
    }

    /// Nearest-neighbour hopping `ħ²/(2ma²)` of the three-point kinetic stencil.
    pub fn hopping(&self, spacing: f64) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass * spacing * spacing)
    }

    /// Band energy of wavenumber `k` on a lattice with the given spacing.
    pub fn lattice_energy(&self, k: f64, spacing: f64) -> f64 {
        let ka = k * spacing;
        // 2t'(1 - cos ka) = 4t' sin²(ka/2), cancellation-free near the band bottom
        let s = libm::sin(0.5 * ka);
        4.0 * self.hopping(spacing) * s * s
    }
}

/// Reference plane wave `exp(i(kx - ωt))` of the parabolic band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    /// nm⁻¹
    pub k: f64,
    /// eV
    pub energy: f64,
    /// fs⁻¹
    pub omega: f64,
    /// nm/fs
    pub velocity: f64,
}

impl PlaneWave {
    /// Probability current `ħk/m` carried by the unit-amplitude wave.
    pub fn current(&self) -> f64 {
        self.velocity
    }
}

pub fn dispersion(ctx: &PhysicalContext, k: f64) -> Result<PlaneWave> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain("wavenumber must be positive"));
    }
    let energy = ctx.hbar * ctx.hbar * k * k / (2.0 * ctx.mass);
    Ok(PlaneWave {
        k,
        energy,
        omega: energy / ctx.hbar,
        velocity: ctx.hbar * k / ctx.mass,
    })
}

pub fn wavenumber_from_energy(ctx: &PhysicalContext, energy: f64) -> Result<f64> {
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::Domain("energy must be positive"));
    }
    Ok(libm::sqrt(2.0 * ctx.mass * energy) / ctx.hbar)
}

/// Uniform lattice `x_i = x0 + i·a`, `i = 0..count`.
///
/// `region` is the closed index interval in which an excitation may be
/// nonzero; the excitation itself must vanish at both of its end sites.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub x0: f64,
    pub spacing: f64,
    pub count: usize,
    pub region: (usize, usize),
    pub probes: Vec<f64>,
}

impl Grid {
    pub fn new(x0: f64, spacing: f64, count: usize, region: (usize, usize), probes: Vec<f64>) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) || !x0.is_finite() {
            return Err(Error::Config("grid spacing must be positive"));
        }
        if count < 3 {
            return Err(Error::Config("grid needs at least three sites"));
        }
        let (i1, i2) = region;
        if !(i1 < i2 && i2 < count) {
            return Err(Error::Config("region bounds must satisfy i1 < i2 < count"));
        }
        let grid = Self {
            x0,
            spacing,
            count,
            region,
            probes,
        };
        if grid.probes.iter().any(|&p| !grid.contains(p)) {
            return Err(Error::Config("probe outside the grid"));
        }
        Ok(grid)
    }

    /// Grid covering `[x_lo, x_hi]` (rounded outward to whole sites) with the
    /// region spanning the whole grid except the two end sites.
    pub fn spanning(x_lo: f64, x_hi: f64, spacing: f64) -> Result<Self> {
        if !(x_hi > x_lo) {
            return Err(Error::Config("empty grid interval"));
        }
        let count = libm::ceil((x_hi - x_lo) / spacing - 1e-9) as usize + 1;
        Self::new(x_lo, spacing, count, (0, count.saturating_sub(1)), Vec::new())
    }

    pub fn with_region(mut self, region: (usize, usize)) -> Result<Self> {
        self.region = region;
        Self::new(self.x0, self.spacing, self.count, region, self.probes)
    }

    pub fn with_probes(self, probes: Vec<f64>) -> Result<Self> {
        Self::new(self.x0, self.spacing, self.count, self.region, probes)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.spacing
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.count - 1)
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.x(i)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x0 - 0.5 * self.spacing && x <= self.x_end() + 0.5 * self.spacing
    }

    /// Index of the site nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let i = libm::round((x - self.x0) / self.spacing);
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.count - 1)
        }
    }

    /// Index of the site nearest to `x` that has two neighbours.
    pub fn interior_nearest(&self, x: f64) -> usize {
        self.nearest(x).clamp(1, self.count - 2)
    }

    /// Region bounds as positions.
    pub fn region_bounds(&self) -> (f64, f64) {
        (self.x(self.region.0), self.x(self.region.1))
    }

    /// Checks that an excitation supported on `[lo, hi]` stays strictly inside
    /// the region, so the region's end sites are field free.
    pub fn check_support(&self, lo: f64, hi: f64) -> Result<()> {
        let (x1, x2) = self.region_bounds();
        let tol = 1e-9 * self.spacing;
        if lo > x1 + tol && hi < x2 - tol {
            Ok(())
        } else {
            Err(Error::Config("excitation support touches the region bounds"))
        }
    }
}
