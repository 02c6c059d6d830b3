//! Crank–Nicolson stepping of `δψ` with a time-averaged Hamiltonian.
//!
//! Each step solves
//! `(iħ/Δt - H̄/2) δ^{n+1} = (iħ/Δt + H̄/2) δ^n + ½(H̄ - H0)(ψ0^n + ψ0^{n+1})`
//! with `H̄ = (H(t_n) + H(t_{n+1}))/2`. With `ψ0` advancing by the Cayley phase
//! of `H0`, this is identical to Crank–Nicolson on the total wavefunction.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::{apply_perturbation, check_periodic_incident, Coupling, IncidentWave, WaveField};
use crate::error::{Error, Result};
use crate::fields::Excitation;
use crate::physics::{Grid, PhysicalContext};
use crate::tdse::kernel::BoundaryKernel;
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// Exact discrete transparent boundaries (field-free exterior).
    Transparent,
    /// `δψ` vanishes just outside the grid.
    Reflecting,
    /// Site `N` is site `0`.
    Periodic,
}

#[derive(Debug, Clone)]
pub struct CrankNicolson {
    ctx: PhysicalContext,
    grid: Grid,
    coupling: Coupling,
    excitation: Excitation,
    dt: f64,
    t_prime: f64,
    boundary: BoundaryCondition,
    kernel: Option<BoundaryKernel>,
    solver: Tridiagonal,
    started: bool,
    t0: f64,
    steps: u64,
    pert_diag: Vec<f64>,
    pert_upper: Vec<Complex64>,
    lower: Vec<Complex64>,
    diag: Vec<Complex64>,
    upper: Vec<Complex64>,
    rhs: Vec<Complex64>,
    psi0: Vec<Complex64>,
}

impl CrankNicolson {
    pub fn new(
        ctx: &PhysicalContext,
        grid: &Grid,
        excitation: &Excitation,
        dt: f64,
        boundary: BoundaryCondition,
        expected_steps: usize,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config("time step must be positive"));
        }
        if grid.count < 3 {
            return Err(Error::Config("grid needs at least three sites"));
        }
        let coupling = Coupling::new(ctx, grid, excitation)?;
        if coupling.is_uniform() && boundary != BoundaryCondition::Periodic {
            return Err(Error::Config("a spatially uniform field requires periodic boundaries"));
        }
        let t_prime = ctx.hopping(grid.spacing);
        let kernel = match boundary {
            BoundaryCondition::Transparent => Some(BoundaryKernel::new(t_prime, dt, ctx.hbar, expected_steps)?),
            _ => None,
        };
        let n = grid.count;
        let zero = Complex64::new(0.0, 0.0);
        Ok(Self {
            ctx: *ctx,
            grid: grid.clone(),
            coupling,
            excitation: *excitation,
            dt,
            t_prime,
            boundary,
            kernel,
            solver: Tridiagonal::new(n),
            started: false,
            t0: 0.0,
            steps: 0,
            pert_diag: vec![0.0; n],
            pert_upper: vec![zero; n],
            lower: vec![zero; n],
            diag: vec![zero; n],
            upper: vec![zero; n],
            rhs: vec![zero; n],
            psi0: vec![zero; n],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    /// Incident wave of wavenumber `k` consistent with this stepper.
    pub fn incident_for(&self, k: f64) -> IncidentWave {
        IncidentWave::crank_nicolson(&self.ctx, k, self.grid.spacing, self.dt)
    }

    /// Forgets the boundary history; the next step starts from the given state.
    pub fn restart(&mut self) {
        self.started = false;
    }

    fn start(&mut self, state: &WaveField) -> Result<()> {
        if state.delta.len() != self.grid.count {
            return Err(Error::GridMismatch("state length differs from grid"));
        }
        if !self.coupling.is_none() && state.gauge != self.excitation.gauge() {
            return Err(Error::Config("state gauge differs from excitation gauge"));
        }
        if let Some(inc) = &state.incident {
            let expect = self.incident_for(inc.k).omega;
            if (inc.omega - expect).abs() > 1e-12 * expect.abs().max(1e-300) {
                return Err(Error::Config("incident frequency is not consistent with the time step"));
            }
            if self.boundary == BoundaryCondition::Periodic {
                check_periodic_incident(&self.grid, inc)?;
            }
        }
        let n = self.grid.count;
        if let Some(k) = self.kernel.as_mut() {
            k.reset(state.delta[0], state.delta[n - 1])?;
        }
        self.t0 = state.time;
        self.steps = 0;
        self.started = true;
        Ok(())
    }

    /// Advances `state` by one step.
    pub fn step(&mut self, state: &mut WaveField) -> Result<()> {
        if !self.started {
            self.start(state)?;
        }
        let n = self.grid.count;
        let t_n = self.t0 + self.steps as f64 * self.dt;
        let t_next = self.t0 + (self.steps + 1) as f64 * self.dt;
        let periodic = self.boundary == BoundaryCondition::Periodic;

        self.coupling
            .mean_perturbation(t_n, t_next, &mut self.pert_diag, &mut self.pert_upper);

        let tp = self.t_prime;
        let ih = Complex64::new(0.0, self.ctx.hbar / self.dt);
        let half = 0.5;
        for j in 0..n {
            let d = 2.0 * tp + self.pert_diag[j];
            self.diag[j] = ih - half * d;
            let u = Complex64::new(-tp, 0.0) + self.pert_upper[j];
            // row j couples to j+1 through u, row j+1 to j through conj(u)
            self.upper[j] = -half * u;
            let prev = if j > 0 { j - 1 } else { n - 1 };
            let l = Complex64::new(-tp, 0.0) + self.pert_upper[prev].conj();
            self.lower[j] = -half * l;
        }

        // explicit half
        let delta = &state.delta;
        for j in 0..n {
            let mut s = (ih + half * (2.0 * tp + self.pert_diag[j])) * delta[j];
            if j + 1 < n {
                s -= self.upper[j] * delta[j + 1];
            } else if periodic {
                s -= self.upper[j] * delta[0];
            }
            if j > 0 {
                s -= self.lower[j] * delta[j - 1];
            } else if periodic {
                s -= self.lower[0] * delta[n - 1];
            }
            self.rhs[j] = s;
        }

        // source ½ P̄ (ψ0^n + ψ0^{n+1})
        if let Some(inc) = &state.incident {
            if !self.coupling.is_none() {
                let (lo, hi) = if self.coupling.is_uniform() {
                    (0, n - 1)
                } else {
                    let (a, b) = self.coupling.active_sites();
                    (a.saturating_sub(1), (b + 1).min(n - 1))
                };
                let phase = inc.time_phase(t_n) + inc.time_phase(t_next);
                for v in self.psi0.iter_mut() {
                    *v = Complex64::new(0.0, 0.0);
                }
                for j in lo..=hi {
                    self.psi0[j] = super::cis(inc.k * self.grid.x(j)) * phase;
                }
                let src = apply_perturbation(&self.pert_diag, &self.pert_upper, &self.psi0, periodic);
                for j in lo..=hi {
                    self.rhs[j] += half * src[j];
                }
            }
        }

        match self.boundary {
            BoundaryCondition::Reflecting => {
                self.solver.solve(&self.lower, &self.diag, &self.upper, &mut self.rhs)?;
            }
            BoundaryCondition::Periodic => {
                self.solver
                    .solve_cyclic(&self.lower, &self.diag, &self.upper, &mut self.rhs)?;
            }
            BoundaryCondition::Transparent => {
                let kernel = self.kernel.as_mut().expect("transparent kernel");
                let (l0, lh, rh) = kernel.pending()?;
                // ghosts: δ_{-1} = ℓ0 δ_0 + lh, δ_N = ℓ0 δ_{N-1} + rh
                let c = half * tp;
                self.rhs[0] -= c * (kernel.ghost_left + lh);
                self.rhs[n - 1] -= c * (kernel.ghost_right + rh);
                self.diag[0] += c * l0;
                self.diag[n - 1] += c * l0;
                self.solver.solve(&self.lower, &self.diag, &self.upper, &mut self.rhs)?;
                kernel.push(self.rhs[0], self.rhs[n - 1])?;
            }
        }

        if !(self.rhs[0].is_finite() && self.rhs[n - 1].is_finite() && self.rhs[n / 2].is_finite()) {
            return Err(Error::Breakdown {
                step: self.steps as usize + 1,
                reason: "non-finite amplitude",
            });
        }
        core::mem::swap(&mut state.delta, &mut self.rhs);
        self.steps += 1;
        state.time = t_next;
        Ok(())
    }

    /// Steps until `state.time` reaches `t_end` (to within half a step).
    pub fn run_until(&mut self, state: &mut WaveField, t_end: f64) -> Result<()> {
        while state.time + 0.5 * self.dt < t_end {
            self.step(state)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Gauge;
    use crate::tdse::cis;

    fn packet(grid: &Grid, x0: f64, sigma: f64, k: f64) -> Vec<Complex64> {
        (0..grid.count)
            .map(|i| {
                let x = grid.x(i) - x0;
                cis(k * x) * libm::exp(-x * x / (4.0 * sigma * sigma))
            })
            .collect()
    }

    fn free_state(delta: Vec<Complex64>) -> WaveField {
        WaveField {
            delta,
            incident: None,
            time: 0.0,
            gauge: Gauge::Scalar,
        }
    }

    #[test]
    fn reflecting_preserves_norm() {
        let ctx = PhysicalContext::default();
        let grid = Grid::spanning(0.0, 40.0, 0.05).unwrap();
        let mut cn =
            CrankNicolson::new(&ctx, &grid, &Excitation::None, 0.05, BoundaryCondition::Reflecting, 0).unwrap();
        let mut st = free_state(packet(&grid, 20.0, 2.0, 3.0));
        let n0 = st.norm_sqr();
        for _ in 0..400 {
            cn.step(&mut st).unwrap();
        }
        assert!((st.norm_sqr() / n0 - 1.0).abs() < 1e-11);
    }

    #[test]
    fn transparent_boundary_absorbs_packet() {
        let ctx = PhysicalContext::default();
        let grid = Grid::spanning(0.0, 30.0, 0.05).unwrap();
        let dt = 0.1;
        let steps = 1500;
        let mut cn = CrankNicolson::new(
            &ctx,
            &grid,
            &Excitation::None,
            dt,
            BoundaryCondition::Transparent,
            steps,
        )
        .unwrap();
        let mut st = free_state(packet(&grid, 15.0, 1.5, 4.0));
        let n0 = st.norm_sqr();
        let mut last = n0;
        for _ in 0..steps {
            cn.step(&mut st).unwrap();
            let now = st.norm_sqr();
            assert!(now <= last * (1.0 + 1e-12));
            last = now;
        }
        assert!(last / n0 < 1e-6, "remaining fraction {}", last / n0);
    }

    #[test]
    fn transparent_matches_large_box() {
        let ctx = PhysicalContext::default();
        let a = 0.05;
        let small = Grid::spanning(0.0, 20.0, a).unwrap();
        let big = Grid::new(-100.0, a, small.count + 4000, (0, 1), Vec::new()).unwrap();
        let dt = 0.08;
        let steps = 300;
        let mut cs = CrankNicolson::new(
            &ctx,
            &small,
            &Excitation::None,
            dt,
            BoundaryCondition::Transparent,
            steps,
        )
        .unwrap();
        let mut cb = CrankNicolson::new(&ctx, &big, &Excitation::None, dt, BoundaryCondition::Reflecting, 0).unwrap();
        let mut ss = free_state(packet(&small, 10.0, 1.0, -2.5));
        let mut sb = free_state(packet(&big, 10.0, 1.0, -2.5));
        for _ in 0..steps {
            cs.step(&mut ss).unwrap();
            cb.step(&mut sb).unwrap();
        }
        let off = 2000;
        let err: f64 = (0..small.count)
            .map(|i| (ss.delta[i] - sb.delta[i + off]).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "max deviation {err}");
    }

    #[test]
    fn rejects_inconsistent_incident() {
        let ctx = PhysicalContext::default();
        let grid = Grid::spanning(0.0, 10.0, 0.05).unwrap();
        let mut cn =
            CrankNicolson::new(&ctx, &grid, &Excitation::None, 0.05, BoundaryCondition::Transparent, 10).unwrap();
        let inc = IncidentWave::lattice(&ctx, 1.0, 0.05);
        let mut st = WaveField::initial(grid.count, Some(inc), Gauge::Scalar);
        assert!(cn.step(&mut st).is_err());
        let inc = cn.incident_for(1.0);
        let mut st = WaveField::initial(grid.count, Some(inc), Gauge::Scalar);
        cn.step(&mut st).unwrap();
        // no excitation: δψ stays zero
        assert!(st.norm_sqr() == 0.0);
    }
}
