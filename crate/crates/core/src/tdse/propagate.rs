//! Run orchestration: stepping, engine handoff and sampling.

use alloc::vec::Vec;

use num_complex::Complex64;

use super::cn::{BoundaryCondition, CrankNicolson};
use super::spectral::FreeFlight;
use super::{cis, IncidentWave, WaveField};
use crate::error::{Error, Result};
use crate::fields::Excitation;
use crate::observables::{current_gauge_invariant, CurrentTrace, DensityMap};
use crate::physics::{Grid, PhysicalContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnginePolicy {
    CnOnly,
    /// Crank–Nicolson while the excitation is on, exact free flight on a box
    /// enlarged `factor` times afterwards.
    CnThenSpectral {
        factor: usize,
    },
}

/// Snapshots of the total wavefunction on original-grid sites
/// `sites.0..=sites.1` (every `stride`-th), every `interval` fs (rounded to
/// a multiple of the trace interval), up to `until` if given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterSpec {
    pub interval: f64,
    pub sites: (usize, usize),
    pub stride: usize,
    pub until: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sampling {
    /// Spacing of the current traces at the grid probes; also the time
    /// step is adjusted to divide it.
    pub trace_interval: f64,
    pub rasters: Vec<RasterSpec>,
    /// Relative amplitude below which Fourier modes are skipped when
    /// sampling traces during free flight.
    pub prune: f64,
}

impl Sampling {
    pub fn traces_only(trace_interval: f64) -> Self {
        Self {
            trace_interval,
            rasters: Vec::new(),
            prune: 1e-14,
        }
    }

    pub fn with_raster(mut self, raster: RasterSpec) -> Self {
        self.rasters.push(raster);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub ctx: PhysicalContext,
    pub grid: Grid,
    pub excitation: Excitation,
    /// Wavenumber of the incident plane wave; `None` propagates `δψ` alone.
    pub incident_k: Option<f64>,
    /// Upper bound for the time step; reduced to divide the trace interval.
    pub dt: f64,
    pub boundary: BoundaryCondition,
    pub policy: EnginePolicy,
}

/// Complex snapshots `values[t][x]` of the total wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub values: Vec<Vec<Complex64>>,
}

impl Raster {
    pub fn density(&self) -> DensityMap {
        DensityMap {
            times: self.times.clone(),
            positions: self.positions.clone(),
            rho: self
                .values
                .iter()
                .map(|row| row.iter().map(|v| v.norm_sqr()).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Propagation {
    /// One trace per grid probe (gauge-invariant current).
    pub traces: Vec<CurrentTrace>,
    pub rasters: Vec<Raster>,
    /// Final state on `final_grid` (the enlarged grid after a handoff).
    pub final_state: WaveField,
    pub final_grid: Grid,
    /// Time at which free flight took over.
    pub handoff: Option<f64>,
    /// Time step actually used.
    pub dt: f64,
    pub cn_steps: u64,
}

struct RasterPlan {
    every: usize,
    last: usize,
    sites: Vec<usize>,
    out: Raster,
}

impl RasterPlan {
    fn wants(&self, tick: usize) -> bool {
        tick.is_multiple_of(self.every) && tick <= self.last
    }
}

fn raster_sites(spec: &RasterSpec, grid: &Grid) -> Result<Vec<usize>> {
    let (lo, hi) = spec.sites;
    if lo > hi || hi >= grid.count || spec.stride == 0 {
        return Err(Error::Config("raster sites outside the grid"));
    }
    Ok((lo..=hi).step_by(spec.stride).collect())
}

/// Runs `setup` from `t = 0` (with `δψ = 0`) to `t_end`.
pub fn propagate(setup: &Setup, t_end: f64, sampling: &Sampling) -> Result<Propagation> {
    let initial = |cn: &CrankNicolson| {
        let inc = setup.incident_k.map(|k| cn.incident_for(k));
        WaveField::initial(setup.grid.count, inc, setup.excitation.gauge())
    };
    propagate_from(setup, t_end, sampling, initial)
}

/// As [`propagate`], starting from a caller-built state (at `t = 0`).
pub fn propagate_from<F>(setup: &Setup, t_end: f64, sampling: &Sampling, initial: F) -> Result<Propagation>
where
    F: FnOnce(&CrankNicolson) -> WaveField,
{
    let tick = sampling.trace_interval;
    if !(tick > 0.0 && t_end > 0.0) {
        return Err(Error::Config("trace interval and end time must be positive"));
    }
    if !(setup.dt > 0.0) {
        return Err(Error::Config("time step must be positive"));
    }
    let sub = libm::ceil(tick / setup.dt - 1e-9).max(1.0) as usize;
    let dt = tick / sub as f64;
    let ticks = libm::floor(t_end / tick + 1e-9) as usize;
    let grid = &setup.grid;
    let ctx = &setup.ctx;

    let handoff_tick = match (setup.policy, setup.excitation.end_time()) {
        (EnginePolicy::CnThenSpectral { .. }, Some(te)) => Some((libm::ceil(te / tick - 1e-9) as usize).min(ticks)),
        (EnginePolicy::CnThenSpectral { .. }, None) => {
            return Err(Error::Config("free flight needs an excitation that ends"))
        }
        _ => None,
    };
    let cn_ticks = handoff_tick.unwrap_or(ticks);

    let mut cn = CrankNicolson::new(ctx, grid, &setup.excitation, dt, setup.boundary, cn_ticks * sub + 1)?;
    let mut state = initial(&cn);

    let probes: Vec<usize> = grid.probes.iter().map(|&x| grid.interior_nearest(x)).collect();
    let mut trace_values: Vec<Vec<f64>> = probes.iter().map(|_| Vec::with_capacity(ticks + 1)).collect();
    let mut plans = Vec::with_capacity(sampling.rasters.len());
    for spec in &sampling.rasters {
        let sites = raster_sites(spec, grid)?;
        plans.push(RasterPlan {
            every: (libm::round(spec.interval / tick) as usize).max(1),
            last: spec.until.map_or(usize::MAX, |u| libm::floor(u / tick + 1e-9) as usize),
            out: Raster {
                times: Vec::new(),
                positions: sites.iter().map(|&i| grid.x(i)).collect(),
                values: Vec::new(),
            },
            sites,
        });
    }

    let record_cn = |state: &WaveField, s: usize, trace_values: &mut Vec<Vec<f64>>, plans: &mut Vec<RasterPlan>| {
        for (vals, &p) in trace_values.iter_mut().zip(&probes) {
            vals.push(current_gauge_invariant(ctx, state, grid, &setup.excitation, grid.x(p)));
        }
        let mut total: Option<Vec<Complex64>> = None;
        for plan in plans.iter_mut() {
            if plan.wants(s) {
                let psi = total.get_or_insert_with(|| state.total(grid));
                plan.out.times.push(s as f64 * tick);
                plan.out.values.push(plan.sites.iter().map(|&i| psi[i]).collect());
            }
        }
    };

    let mut s = 0usize;
    loop {
        record_cn(&state, s, &mut trace_values, &mut plans);
        if s == cn_ticks {
            break;
        }
        for _ in 0..sub {
            cn.step(&mut state)?;
        }
        s += 1;
        state.time = s as f64 * tick;
    }

    let mut handoff = None;
    let mut final_grid = grid.clone();
    if let (Some(h), EnginePolicy::CnThenSpectral { factor }) = (handoff_tick, setup.policy) {
        if h < ticks {
            let ff = FreeFlight::extend(&state, grid, ctx, factor)?;
            handoff = Some(h as f64 * tick);
            let off = ff.offset();
            let remaining = ticks - h;
            // traces
            let inc = ff.incident();
            for (pi, &p) in probes.iter().enumerate() {
                let samples = ff.sample_site(p + off, tick, 1, remaining, sampling.prune);
                for (r, &(d, slope)) in samples.iter().enumerate() {
                    let t = (h + 1 + r) as f64 * tick;
                    trace_values[pi].push(free_current(ctx, grid, inc.as_ref(), p, d, slope, t));
                }
            }
            // rasters
            for s in h + 1..=ticks {
                if !plans.iter().any(|p| p.wants(s)) {
                    continue;
                }
                let t = s as f64 * tick;
                let st = ff.state_at(t);
                let psi = st.total(ff.grid());
                for plan in plans.iter_mut().filter(|p| p.wants(s)) {
                    plan.out.times.push(t);
                    plan.out.values.push(plan.sites.iter().map(|&i| psi[i + off]).collect());
                }
            }
            state = ff.state_at(ticks as f64 * tick);
            final_grid = ff.grid().clone();
        }
    }

    let times: Vec<f64> = (0..=ticks).map(|s| s as f64 * tick).collect();
    let traces = grid
        .probes
        .iter()
        .zip(trace_values)
        .map(|(&x, v)| CurrentTrace::new(x, times.clone(), v))
        .collect::<Result<Vec<_>>>()?;
    Ok(Propagation {
        traces,
        rasters: plans.into_iter().map(|p| p.out).collect(),
        final_state: state,
        final_grid,
        handoff,
        dt,
        cn_steps: cn_ticks as u64 * sub as u64,
    })
}

/// Field-free current from `δψ` and its centered difference at site `p` of
/// the original grid.
fn free_current(
    ctx: &PhysicalContext,
    grid: &Grid,
    incident: Option<&IncidentWave>,
    p: usize,
    d: Complex64,
    slope: Complex64,
    t: f64,
) -> f64 {
    let (psi, dpsi) = match incident {
        None => (d, slope),
        Some(inc) => {
            let p0 = cis(inc.k * grid.x(p)) * inc.time_phase(t);
            (p0 + d, Complex64::new(0.0, inc.k) * p0 + slope)
        }
    };
    ctx.hbar / ctx.mass * (psi.conj() * dpsi).im
}
