//! Scenario runners behind the command-line verbs.
//!
//! Each runner takes a resolved [`Config`], runs every scan entry (in
//! parallel), writes its CSV files into `output.dir` and returns the results
//! for further inspection.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;

use nanopulse_core::fields::{BarrierSpec, Excitation, PulseSpec, SwitchSpec};
use nanopulse_core::observables::{
    distance, dominant_peaks, front_speed, last_downward_crossing, power_spectrum, settling_time, superpose_currents,
    transmission_td, CurrentTrace, DensityMap, DistanceKind, Peak, Spectrum, Window,
};
use nanopulse_core::static_negf::{
    build_hamiltonian, calibrate_barrier, scattering_state, transmission, transmission_curve,
};
use nanopulse_core::tdse::cn::BoundaryCondition;
use nanopulse_core::tdse::propagate::{propagate, EnginePolicy, Propagation, RasterSpec, Sampling, Setup};
use nanopulse_core::tdse::suggested_time_step;
use nanopulse_core::{dispersion, wavenumber_from_energy, Grid, PhysicalContext, PlaneWave};

use crate::checkpoint;
use crate::config::{Boundary, Config, Distance, Policy, Shape, Verb, WindowKind};
use crate::error::AppError;
use crate::output::{fmt_float, label, series, write_atomic, Table};
use crate::plot;

/// One entry of the incident scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incoming {
    /// Continuum energy `ħ²k²/2m` in meV.
    pub energy_mev: f64,
    pub wave: PlaneWave,
    /// Band energy of `k` on the lattice (eV), the energy of the static solve.
    pub lattice_energy: f64,
}

impl Incoming {
    pub fn tag(&self) -> String {
        format!("E{}meV", label(self.energy_mev))
    }
}

pub fn context(cfg: &Config) -> Result<PhysicalContext, AppError> {
    Ok(PhysicalContext::with_mass_ratio(cfg.physics.mass_ratio)?)
}

fn spacing(cfg: &Config) -> f64 {
    cfg.grid.spacing_nm.unwrap_or(0.05)
}

pub fn incoming(cfg: &Config, ctx: &PhysicalContext) -> Result<Vec<Incoming>, AppError> {
    let a = spacing(cfg);
    let make = |k: f64, energy_mev: f64| -> Result<Incoming, AppError> {
        Ok(Incoming {
            energy_mev,
            wave: dispersion(ctx, k)?,
            lattice_energy: ctx.lattice_energy(k, a),
        })
    };
    match (&cfg.incident.energy_meV, &cfg.incident.k_per_nm) {
        (Some(e), _) => e
            .values()
            .into_iter()
            .map(|e| make(wavenumber_from_energy(ctx, 1e-3 * e)?, e))
            .collect(),
        (None, Some(k)) => k
            .values()
            .into_iter()
            .map(|k| make(k, 1e3 * dispersion(ctx, k)?.energy))
            .collect(),
        (None, None) => Err(AppError::Config("no incident energy".into())),
    }
}

fn boundary(cfg: &Config) -> BoundaryCondition {
    match cfg.engine.boundary.unwrap_or(Boundary::Transparent) {
        Boundary::Transparent => BoundaryCondition::Transparent,
        Boundary::Reflecting => BoundaryCondition::Reflecting,
        Boundary::Periodic => BoundaryCondition::Periodic,
    }
}

fn policy(cfg: &Config) -> EnginePolicy {
    match cfg.engine.policy.unwrap_or(Policy::CnOnly) {
        Policy::CnOnly => EnginePolicy::CnOnly,
        Policy::CnThenSpectral => EnginePolicy::CnThenSpectral {
            factor: cfg.engine.extension_factor.unwrap_or(10),
        },
    }
}

fn out_dir(cfg: &Config) -> &Path {
    &cfg.output.dir
}

/// Writes the resolved configuration next to the outputs.
pub fn write_manifest(cfg: &Config) -> Result<PathBuf, AppError> {
    let path = out_dir(cfg).join("manifest.toml");
    let text = format!("# nanopulse {}\n{}", env!("CARGO_PKG_VERSION"), cfg.to_toml()?);
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

fn emit(cfg: &Config, name: &str, table: &Table) -> Result<PathBuf, AppError> {
    let path = out_dir(cfg).join(name);
    table.write(&path)?;
    if cfg.output.plots {
        plot::render_csv(&path)?;
    }
    Ok(path)
}

fn raster_table(map: &DensityMap) -> Table {
    let mut t = Table::new(&["t_fs", "x_nm", "rho"]);
    for (time, row) in map.times.iter().zip(&map.rho) {
        for (x, r) in map.positions.iter().zip(row) {
            t.push_floats(&[*time, *x, *r]);
        }
    }
    t
}

// ---------------------------------------------------------------- barrier

/// Lattice and barrier shared by the static and switch scenarios.
#[derive(Debug, Clone)]
pub struct BarrierGeometry {
    pub grid: Grid,
    pub shape: BarrierSpec,
}

pub fn barrier_geometry(cfg: &Config) -> Result<BarrierGeometry, AppError> {
    let b = cfg
        .barrier
        .as_ref()
        .ok_or_else(|| AppError::Config("missing [barrier] block".into()))?;
    let a = spacing(cfg);
    let margin = cfg.grid.margin_nm.unwrap_or(50.0);
    let (lo, hi) = (b.x_start_nm - margin, b.x_start_nm + b.length_nm + margin);
    let x_lo = lo - cfg.grid.pad_left_nm.unwrap_or(0.0);
    let x_hi = hi + cfg.grid.pad_right_nm.unwrap_or(0.0);
    let g = Grid::spanning(x_lo, x_hi, a)?;
    let region = (g.nearest(lo), g.nearest(hi));
    let probes = cfg
        .sampling
        .probes_nm
        .clone()
        .unwrap_or_else(|| vec![(hi + 20.0).min(g.x_end() - a)]);
    let grid = g.with_region(region)?.with_probes(probes)?;
    let shape = match b.shape {
        Shape::Smooth => BarrierSpec::new(0.0, b.length_nm, b.x_start_nm)?,
        Shape::Rectangular => BarrierSpec::rectangular(0.0, b.length_nm, b.x_start_nm)?,
    };
    grid.check_support(b.x_start_nm, b.x_start_nm + b.length_nm)?;
    Ok(BarrierGeometry { grid, shape })
}

/// Barrier height for `inc`: the configured one, or calibrated to the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierHeight {
    pub phi_max: f64,
    pub transmission: f64,
    pub calibrated: bool,
    pub monotone: bool,
}

pub fn barrier_height(
    cfg: &Config,
    ctx: &PhysicalContext,
    geo: &BarrierGeometry,
    inc: &Incoming,
) -> Result<BarrierHeight, AppError> {
    let b = cfg
        .barrier
        .as_ref()
        .ok_or_else(|| AppError::Config("missing [barrier] block".into()))?;
    match b.phi_max_V {
        Some(phi) => {
            let v = geo.shape.with_height(phi).sample(ctx, &geo.grid);
            let t = transmission(&build_hamiltonian(ctx, &geo.grid, &v)?, inc.lattice_energy)?;
            Ok(BarrierHeight {
                phi_max: phi,
                transmission: t,
                calibrated: false,
                monotone: true,
            })
        }
        None => {
            let c = calibrate_barrier(ctx, &geo.grid, &geo.shape, inc.lattice_energy, b.transmission_target)?;
            Ok(BarrierHeight {
                phi_max: c.phi_max,
                transmission: c.transmission,
                calibrated: true,
                monotone: c.monotone,
            })
        }
    }
}

fn steady_density(
    ctx: &PhysicalContext,
    geo: &BarrierGeometry,
    phi: f64,
    inc: &Incoming,
) -> Result<Vec<f64>, AppError> {
    let v = geo.shape.with_height(phi).sample(ctx, &geo.grid);
    let h = build_hamiltonian(ctx, &geo.grid, &v)?;
    Ok(scattering_state(&h, inc.lattice_energy)?
        .iter()
        .map(|p| p.norm_sqr())
        .collect())
}

#[derive(Debug, Clone)]
pub struct CalibrationRow {
    pub incoming: Incoming,
    pub height: BarrierHeight,
}

fn calibration_table(rows: &[CalibrationRow]) -> Table {
    let mut t = Table::new(&[
        "energy_meV",
        "lattice_energy_eV",
        "phi_max_V",
        "transmission",
        "monotone",
    ]);
    for r in rows {
        t.push(vec![
            fmt_float(r.incoming.energy_mev),
            fmt_float(r.incoming.lattice_energy),
            fmt_float(r.height.phi_max),
            fmt_float(r.height.transmission),
            u8::from(r.height.monotone).to_string(),
        ]);
    }
    t
}

pub fn run_calibrate(cfg: &Config) -> Result<Vec<CalibrationRow>, AppError> {
    let ctx = context(cfg)?;
    let geo = barrier_geometry(cfg)?;
    write_manifest(cfg)?;
    let rows = incoming(cfg, &ctx)?
        .par_iter()
        .map(|inc| {
            let height = barrier_height(cfg, &ctx, &geo, inc)?;
            info!(
                "{}: phi_max = {:.9} V, T = {:.9}",
                inc.tag(),
                height.phi_max,
                height.transmission
            );
            Ok(CalibrationRow { incoming: *inc, height })
        })
        .collect::<Result<Vec<_>, AppError>>()?;
    emit(cfg, "calibration.csv", &calibration_table(&rows))?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct StaticScan {
    pub phi_max: f64,
    pub energies: Vec<f64>,
    pub transmission: Vec<f64>,
    pub calibration: Option<CalibrationRow>,
}

pub fn run_static_scan(cfg: &Config) -> Result<StaticScan, AppError> {
    let ctx = context(cfg)?;
    let geo = barrier_geometry(cfg)?;
    let sc = cfg.static_scan.clone().unwrap_or_default();
    write_manifest(cfg)?;
    let incs = incoming(cfg, &ctx)?;
    let first = incs[0];
    let height = barrier_height(cfg, &ctx, &geo, &first)?;
    let calibration = height.calibrated.then_some(CalibrationRow {
        incoming: first,
        height,
    });
    if let Some(c) = &calibration {
        emit(cfg, "calibration.csv", &calibration_table(std::slice::from_ref(c)))?;
    }
    let pot = geo.shape.with_height(height.phi_max).sample(&ctx, &geo.grid);
    let h = build_hamiltonian(&ctx, &geo.grid, &pot)?;
    let n = sc.points;
    let energies: Vec<f64> = (0..n)
        .map(|i| 1e-3 * (sc.energy_min_meV + (sc.energy_max_meV - sc.energy_min_meV) * i as f64 / (n - 1) as f64))
        .collect();
    let curve = transmission_curve(&h, &energies)?;
    let phi: Vec<f64> = pot.iter().map(|v| v / ctx.charge).collect();
    emit(
        cfg,
        "barrier.csv",
        &series(["x_nm", "phi_V"], &geo.grid.positions(), &phi),
    )?;
    emit(
        cfg,
        "transmission.csv",
        &series(["energy_eV", "T"], &curve.energies, &curve.values),
    )?;
    for inc in &incs {
        let rho = steady_density(&ctx, &geo, height.phi_max, inc)?;
        emit(
            cfg,
            &format!("steady_density_{}.csv", inc.tag()),
            &series(["x_nm", "rho"], &geo.grid.positions(), &rho),
        )?;
    }
    Ok(StaticScan {
        phi_max: height.phi_max,
        energies: curve.energies,
        transmission: curve.values,
        calibration,
    })
}

// ---------------------------------------------------------------- switch

#[derive(Debug, Clone)]
pub struct SwitchRun {
    pub incoming: Incoming,
    pub height: BarrierHeight,
    pub grid: Grid,
    pub rho_static: Vec<f64>,
    /// D(t) on region II.
    pub d_times: Vec<f64>,
    pub d_values: Vec<f64>,
    pub d0: f64,
    /// Time after which |D| stays below the configured fraction of |D(0)|.
    pub settling: Option<f64>,
    /// Time for the incident wave to cross the region-II margin, `margin/v`.
    pub exit_time: f64,
    pub traces: Vec<CurrentTrace>,
    /// `T(x,t)` at each probe.
    pub transmission: Vec<Vec<f64>>,
    /// `(x, t)` of the last downward density crossing behind the barrier.
    pub front: Vec<(f64, f64)>,
    pub front_speed: Option<f64>,
    pub density: DensityMap,
    pub excitation: Excitation,
    pub propagation_time: f64,
}

fn switch_excitation(cfg: &Config, barrier: BarrierSpec) -> Result<Excitation, AppError> {
    let s = cfg.switch.clone().unwrap_or_default();
    let switch = match s.plateau_fs {
        None => SwitchSpec::switch_on(s.ramp_on_fs)?,
        Some(p) => SwitchSpec::on_off(s.ramp_on_fs, p, s.ramp_off_fs.unwrap_or(s.ramp_on_fs))?,
    };
    Ok(Excitation::Scalar { barrier, switch })
}

pub fn switch_one(
    cfg: &Config,
    ctx: &PhysicalContext,
    geo: &BarrierGeometry,
    inc: &Incoming,
) -> Result<SwitchRun, AppError> {
    let b = cfg
        .barrier
        .as_ref()
        .ok_or_else(|| AppError::Config("missing [barrier] block".into()))?;
    let grid = &geo.grid;
    let a = grid.spacing;
    let height = barrier_height(cfg, ctx, geo, inc)?;
    let rho_static = steady_density(ctx, geo, height.phi_max, inc)?;
    let excitation = switch_excitation(cfg, geo.shape.with_height(height.phi_max))?;
    let s = &cfg.sampling;
    let tick = s.trace_interval_fs.unwrap_or(1.0);
    let t_end = s.t_end_fs.unwrap_or(3000.0);
    let stride = ((s.raster_stride_nm.unwrap_or(1.0) / a).round() as usize).max(1);

    let an = &cfg.analysis;
    let barrier_end = b.x_start_nm + b.length_nm;
    let front_step = an.front_spacing_nm.unwrap_or(25.0);
    let front_span = an.front_span_nm.unwrap_or(350.0);
    let front_sites: Vec<usize> = (1..)
        .map(|j| barrier_end + front_step * j as f64)
        .take_while(|&x| x <= barrier_end + front_span + 1e-9 && x < grid.x_end() - front_step)
        .map(|x| grid.nearest(x))
        .collect();

    let mut sampling = Sampling::traces_only(tick)
        .with_raster(RasterSpec {
            interval: tick,
            sites: grid.region,
            stride: 1,
            until: None,
        })
        .with_raster(RasterSpec {
            interval: s.raster_interval_fs.unwrap_or(5.0),
            sites: (0, grid.count - 1),
            stride,
            until: s.raster_until_fs,
        });
    if let (Some(&lo), Some(&hi)) = (front_sites.first(), front_sites.last()) {
        let step = if front_sites.len() > 1 { front_sites[1] - lo } else { 1 };
        sampling = sampling.with_raster(RasterSpec {
            interval: tick,
            sites: (lo, hi),
            stride: step.max(1),
            until: None,
        });
    }
    sampling.prune = s.prune.unwrap_or(1e-14);

    let setup = Setup {
        ctx: *ctx,
        grid: grid.clone(),
        excitation,
        incident_k: Some(inc.wave.k),
        dt: cfg
            .engine
            .dt_fs
            .unwrap_or_else(|| suggested_time_step(ctx, inc.wave.energy, &excitation)),
        boundary: boundary(cfg),
        policy: policy(cfg),
    };
    let started = Instant::now();
    let run = propagate(&setup, t_end, &sampling)?;
    let propagation_time = started.elapsed().as_secs_f64();
    info!(
        "switch {}: {} CN steps in {:.1} s",
        inc.tag(),
        run.cn_steps,
        propagation_time
    );
    maybe_checkpoint(cfg, &format!("switch_{}", inc.tag()), &run)?;

    let kind = match an.distance.unwrap_or(Distance::Signed) {
        Distance::Signed => DistanceKind::Signed,
        Distance::Absolute => DistanceKind::Absolute,
    };
    let (i1, i2) = grid.region;
    let region_static = &rho_static[i1..=i2];
    let span = (0, i2 - i1);
    let ones = vec![1.0; region_static.len()];
    let d0 = distance(&ones, region_static, a, span, kind)?;
    let region_map = run.rasters[0].density();
    let d_values = region_map
        .rho
        .iter()
        .map(|row| distance(row, region_static, a, span, kind))
        .collect::<Result<Vec<_>, _>>()?;
    let d_times = region_map.times.clone();
    let settling = settling_time(&d_times, &d_values, d0, an.settle_fraction.unwrap_or(0.05));

    let level = an.front_level.unwrap_or(0.9);
    let mut front = Vec::new();
    if let Some(r) = run.rasters.get(2) {
        let map = r.density();
        for (c, &x) in map.positions.iter().enumerate() {
            let col: Vec<f64> = map.rho.iter().map(|row| row[c]).collect();
            if let Some(t) = last_downward_crossing(&map.times, &col, level) {
                if t < 0.95 * t_end {
                    front.push((x, t));
                }
            }
        }
    }
    // only a switch-on leaves a depletion front behind the barrier
    let speed = if front.len() >= 3 && excitation.end_time().is_none() {
        front_speed(&front)
    } else {
        None
    };
    let transmission: Vec<Vec<f64>> = run.traces.iter().map(|tr| transmission_td(tr, &inc.wave)).collect();
    let margin = cfg.grid.margin_nm.unwrap_or(50.0);
    Ok(SwitchRun {
        incoming: *inc,
        height,
        grid: grid.clone(),
        rho_static,
        d_times,
        d_values,
        d0,
        settling,
        exit_time: margin / inc.wave.velocity,
        traces: run.traces.clone(),
        transmission,
        front,
        front_speed: speed,
        density: run.rasters[1].density(),
        excitation,
        propagation_time,
    })
}

fn maybe_checkpoint(cfg: &Config, prefix: &str, run: &Propagation) -> Result<(), AppError> {
    if cfg.output.checkpoint {
        let st = &run.final_state;
        checkpoint::write(&out_dir(cfg).join(format!("{prefix}_state.bin")), st.time, &st.delta)?;
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), fmt_float)
}

pub fn run_switch(cfg: &Config) -> Result<Vec<SwitchRun>, AppError> {
    let ctx = context(cfg)?;
    let geo = barrier_geometry(cfg)?;
    write_manifest(cfg)?;
    let runs = incoming(cfg, &ctx)?
        .par_iter()
        .map(|inc| {
            let r = switch_one(cfg, &ctx, &geo, inc)?;
            write_switch(cfg, &r)?;
            Ok(r)
        })
        .collect::<Result<Vec<_>, AppError>>()?;
    let mut summary = Table::new(&[
        "energy_meV",
        "k_per_nm",
        "phi_max_V",
        "static_T",
        "D0",
        "settling_fs",
        "exit_fs",
        "front_speed_nm_per_fs",
        "band_velocity_nm_per_fs",
        "final_T",
    ]);
    for r in &runs {
        summary.push(vec![
            fmt_float(r.incoming.energy_mev),
            fmt_float(r.incoming.wave.k),
            fmt_float(r.height.phi_max),
            fmt_float(r.height.transmission),
            fmt_float(r.d0),
            opt(r.settling),
            fmt_float(r.exit_time),
            opt(r.front_speed),
            fmt_float(r.incoming.wave.velocity),
            opt(r.transmission.first().and_then(|t| t.last().copied())),
        ]);
    }
    summary.write(&out_dir(cfg).join("switch_summary.csv"))?;
    Ok(runs)
}

fn write_switch(cfg: &Config, r: &SwitchRun) -> Result<(), AppError> {
    let p = format!("switch_{}", r.incoming.tag());
    emit(cfg, &format!("{p}_density.csv"), &raster_table(&r.density))?;
    emit(
        cfg,
        &format!("{p}_distance.csv"),
        &series(["t_fs", "D"], &r.d_times, &r.d_values),
    )?;
    emit(
        cfg,
        &format!("{p}_steady_density.csv"),
        &series(["x_nm", "rho"], &r.grid.positions(), &r.rho_static),
    )?;
    for (tr, t) in r.traces.iter().zip(&r.transmission) {
        let x = label(tr.probe_x);
        emit(
            cfg,
            &format!("{p}_trace_x{x}nm.csv"),
            &series(["t_fs", "j_nm_per_fs"], &tr.times, &tr.values),
        )?;
        emit(
            cfg,
            &format!("{p}_transmission_x{x}nm.csv"),
            &series(["t_fs", "T"], &tr.times, t),
        )?;
    }
    let (xs, ts): (Vec<f64>, Vec<f64>) = r.front.iter().copied().unzip();
    emit(cfg, &format!("{p}_front.csv"), &series(["x_nm", "t_fs"], &xs, &ts))?;
    if let Excitation::Scalar { barrier, switch } = &r.excitation {
        let (i1, i2) = r.grid.region;
        let xs: Vec<f64> = (i1..=i2).map(|i| r.grid.x(i)).collect();
        let phi: Vec<f64> = xs.iter().map(|x| barrier.profile(*x)).collect();
        emit(cfg, &format!("{p}_barrier.csv"), &series(["x_nm", "phi_V"], &xs, &phi))?;
        // envelope until 20 fs past its last change
        let last = switch.end_time().unwrap_or(switch.ramp_on) + 20.0;
        let ts: Vec<f64> = (0..=(last * 10.0).round() as usize).map(|i| 0.1 * i as f64).collect();
        let chi: Vec<f64> = ts.iter().map(|t| switch.envelope(*t)).collect();
        emit(cfg, &format!("{p}_envelope.csv"), &series(["t_fs", "chi"], &ts, &chi))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- pulse

#[derive(Debug, Clone)]
pub struct PulseRun {
    pub incoming: Incoming,
    pub pulse: PulseSpec,
    pub grid: Grid,
    pub traces: Vec<CurrentTrace>,
    /// Spectrum of the first probe's trace.
    pub spectrum: Option<Spectrum>,
    /// Dominant peaks of `spectrum`, by frequency.
    pub peaks: Vec<Peak>,
    pub density: Option<DensityMap>,
    pub handoff: Option<f64>,
    pub t_end: f64,
    pub propagation_time: f64,
}

impl PulseRun {
    pub fn tag(&self) -> String {
        format!("L{}nm_{}", label(self.pulse.length), self.incoming.tag())
    }

    /// Lowest-frequency dominant peak.
    pub fn low_peak(&self) -> Option<&Peak> {
        self.peaks.first()
    }

    /// Dominant peak within ±20% of the carrier frequency.
    pub fn carrier_peak(&self) -> Option<&Peak> {
        let w0 = self.pulse.omega0();
        self.peaks
            .iter()
            .filter(|p| (p.omega - w0).abs() <= 0.2 * w0)
            .max_by(|a, b| a.power.total_cmp(&b.power))
    }

    /// Power at the incident frequency `E(k)/ħ`.
    pub fn power_at_incident(&self) -> Option<f64> {
        self.spectrum.as_ref().map(|s| s.power_at(self.incoming.wave.omega))
    }
}

fn pulse_spec(cfg: &Config, length: f64) -> Result<PulseSpec, AppError> {
    let p = cfg
        .pulse
        .as_ref()
        .ok_or_else(|| AppError::Config("missing [pulse] block".into()))?;
    Ok(match p.tau_fs {
        Some(tau) => PulseSpec::new(p.f0_V_per_nm, p.lambda0_nm, tau, length, p.x_start_nm)?,
        None => PulseSpec::with_cycles(
            p.f0_V_per_nm,
            p.lambda0_nm,
            p.cycles.unwrap_or(10.0),
            length,
            p.x_start_nm,
        )?,
    })
}

/// Box `[x_start − pad, x_start + L + pad]` with `pad = 4L` by default.
pub fn pulse_grid(cfg: &Config, pulse: &PulseSpec) -> Result<Grid, AppError> {
    let a = spacing(cfg);
    let (lo, hi) = pulse.support();
    let margin = cfg.grid.margin_nm.unwrap_or(0.5);
    let x_lo = lo - margin - cfg.grid.pad_left_nm.unwrap_or(4.0 * pulse.length);
    let x_hi = hi + margin + cfg.grid.pad_right_nm.unwrap_or(4.0 * pulse.length);
    let g = Grid::spanning(x_lo, x_hi, a)?;
    let region = (g.nearest(lo - margin), g.nearest(hi + margin));
    let probes = cfg
        .sampling
        .probes_nm
        .clone()
        .unwrap_or_else(|| vec![pulse.x_start + 2.0 * pulse.length]);
    let grid = g.with_region(region)?.with_probes(probes)?;
    if !cfg.pulse.as_ref().is_some_and(|p| p.uniform) {
        grid.check_support(lo, hi)?;
    }
    Ok(grid)
}

/// Closest wavenumber with a whole number of periods on the box.
fn periodic_k(grid: &Grid, k: f64) -> f64 {
    let len = grid.spacing * grid.count as f64;
    let turns = (k * len / (2.0 * std::f64::consts::PI)).round().max(1.0);
    2.0 * std::f64::consts::PI * turns / len
}

pub fn pulse_default_end(pulse: &PulseSpec, inc: &Incoming) -> f64 {
    pulse.tau + 2.5 * pulse.length / inc.wave.velocity
}

pub fn pulse_one(
    cfg: &Config,
    ctx: &PhysicalContext,
    length: f64,
    inc: &Incoming,
    t_end: Option<f64>,
    with_raster: bool,
) -> Result<PulseRun, AppError> {
    let pulse = pulse_spec(cfg, length)?;
    let grid = pulse_grid(cfg, &pulse)?;
    let uniform = cfg.pulse.as_ref().is_some_and(|p| p.uniform);
    let excitation = if uniform {
        Excitation::UniformPulse(pulse)
    } else {
        Excitation::Pulse(pulse)
    };
    let mut inc = *inc;
    let bc = boundary(cfg);
    if bc == BoundaryCondition::Periodic {
        let k = periodic_k(&grid, inc.wave.k);
        if k != inc.wave.k {
            info!("periodic box: k {:.9} -> {:.9} nm^-1", inc.wave.k, k);
            inc.wave = dispersion(ctx, k)?;
            inc.lattice_energy = ctx.lattice_energy(k, grid.spacing);
        }
    }
    let s = &cfg.sampling;
    let t_end = t_end.or(s.t_end_fs).unwrap_or_else(|| pulse_default_end(&pulse, &inc));
    let mut sampling = Sampling::traces_only(s.trace_interval_fs.unwrap_or(0.2));
    sampling.prune = s.prune.unwrap_or(1e-14);
    if with_raster {
        let stride = ((s.raster_stride_nm.unwrap_or(1.0) / grid.spacing).round() as usize).max(1);
        sampling = sampling.with_raster(RasterSpec {
            interval: s.raster_interval_fs.unwrap_or(10.0),
            sites: (0, grid.count - 1),
            stride,
            until: s.raster_until_fs,
        });
    }
    let setup = Setup {
        ctx: *ctx,
        grid: grid.clone(),
        excitation,
        incident_k: Some(inc.wave.k),
        dt: cfg
            .engine
            .dt_fs
            .unwrap_or_else(|| suggested_time_step(ctx, inc.wave.energy, &excitation)),
        boundary: bc,
        policy: policy(cfg),
    };
    let started = Instant::now();
    let run = propagate(&setup, t_end, &sampling)?;
    let propagation_time = started.elapsed().as_secs_f64();
    info!(
        "pulse L={} nm {}: {} CN steps, handoff {:?}, {:.1} s",
        label(length),
        inc.tag(),
        run.cn_steps,
        run.handoff,
        propagation_time
    );
    let prefix = format!("pulse_L{}nm_{}", label(length), inc.tag());
    maybe_checkpoint(cfg, &prefix, &run)?;

    let sp = &cfg.spectrum;
    let window = match sp.window.unwrap_or(WindowKind::None) {
        WindowKind::None => Window::None,
        WindowKind::Hann => Window::Hann,
    };
    let baseline = sp.baseline.unwrap_or(true).then_some(inc.wave.current());
    let spectrum = match run.traces.first() {
        Some(tr) => Some(power_spectrum(tr, baseline, window, sp.pad_factor.unwrap_or(4))?),
        None => None,
    };
    let an = &cfg.analysis;
    let peaks = spectrum
        .as_ref()
        .map(|s| {
            dominant_peaks(
                s,
                an.envelope_per_fs.unwrap_or(0.06),
                an.peak_prominence_decades.unwrap_or(0.5),
            )
        })
        .unwrap_or_default();
    Ok(PulseRun {
        incoming: inc,
        pulse,
        grid,
        density: run.rasters.first().map(|r| r.density()),
        traces: run.traces,
        spectrum,
        peaks,
        handoff: run.handoff,
        t_end,
        propagation_time,
    })
}

pub fn run_pulse(cfg: &Config) -> Result<Vec<PulseRun>, AppError> {
    let ctx = context(cfg)?;
    let p = cfg
        .pulse
        .as_ref()
        .ok_or_else(|| AppError::Config("missing [pulse] block".into()))?;
    write_manifest(cfg)?;
    let incs = incoming(cfg, &ctx)?;
    let jobs: Vec<(f64, Incoming)> = p
        .length_nm
        .values()
        .into_iter()
        .flat_map(|l| incs.iter().map(move |inc| (l, *inc)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|(l, inc)| {
            let r = pulse_one(cfg, &ctx, *l, inc, None, true)?;
            write_pulse(cfg, &r)?;
            Ok(r)
        })
        .collect::<Result<Vec<_>, AppError>>()?;
    for l in p.length_nm.values() {
        write_pulse_fields(cfg, &ctx, &pulse_spec(cfg, l)?)?;
    }
    let mut summary = Table::new(&[
        "length_nm",
        "energy_meV",
        "omega0_per_fs",
        "omega_k_per_fs",
        "dominant_peaks",
        "low_peak_omega_per_fs",
        "low_peak_power",
        "carrier_peak_omega_per_fs",
        "carrier_peak_power",
        "power_at_omega_k",
    ]);
    for r in &runs {
        summary.push(vec![
            fmt_float(r.pulse.length),
            fmt_float(r.incoming.energy_mev),
            fmt_float(r.pulse.omega0()),
            fmt_float(r.incoming.wave.omega),
            r.peaks.len().to_string(),
            opt(r.low_peak().map(|p| p.omega)),
            opt(r.low_peak().map(|p| p.power)),
            opt(r.carrier_peak().map(|p| p.omega)),
            opt(r.carrier_peak().map(|p| p.power)),
            opt(r.power_at_incident()),
        ]);
    }
    summary.write(&out_dir(cfg).join("pulse_summary.csv"))?;
    Ok(runs)
}

/// `A` and `F` at the pulse center over `[0, τ]`, and `U_p` along the pulse
/// at `τ/2`.
fn write_pulse_fields(cfg: &Config, ctx: &PhysicalContext, pulse: &PulseSpec) -> Result<(), AppError> {
    let p = format!("pulse_L{}nm", label(pulse.length));
    let xc = pulse.x_start + 0.5 * pulse.length;
    let nt = (pulse.tau / 0.02).ceil() as usize;
    let ts: Vec<f64> = (0..=nt).map(|i| pulse.tau * i as f64 / nt as f64).collect();
    let a: Vec<f64> = ts.iter().map(|t| pulse.vector_potential(xc, *t)).collect();
    let f: Vec<f64> = ts.iter().map(|t| pulse.electric_field(xc, *t)).collect();
    emit(
        cfg,
        &format!("{p}_vector_potential.csv"),
        &series(["t_fs", "A_V_fs_per_nm"], &ts, &a),
    )?;
    emit(
        cfg,
        &format!("{p}_electric_field.csv"),
        &series(["t_fs", "F_V_per_nm"], &ts, &f),
    )?;
    let nx = (pulse.length / 0.5).ceil() as usize;
    let xs: Vec<f64> = (0..=nx)
        .map(|i| pulse.x_start + pulse.length * i as f64 / nx as f64)
        .collect();
    let up: Vec<f64> = xs
        .iter()
        .map(|x| pulse.ponderomotive(ctx, *x, 0.5 * pulse.tau))
        .collect();
    emit(
        cfg,
        &format!("{p}_ponderomotive.csv"),
        &series(["x_nm", "U_p_eV"], &xs, &up),
    )?;
    Ok(())
}

fn write_pulse(cfg: &Config, r: &PulseRun) -> Result<(), AppError> {
    let p = format!("pulse_{}", r.tag());
    for tr in &r.traces {
        emit(
            cfg,
            &format!("{p}_trace_x{}nm.csv", label(tr.probe_x)),
            &series(["t_fs", "j_nm_per_fs"], &tr.times, &tr.values),
        )?;
    }
    if let Some(s) = &r.spectrum {
        emit(
            cfg,
            &format!("{p}_spectrum.csv"),
            &series(["omega_per_fs", "power"], &s.omegas, &s.power),
        )?;
    }
    if let Some(m) = &r.density {
        emit(cfg, &format!("{p}_density.csv"), &raster_table(m))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- superpose

#[derive(Debug, Clone)]
pub struct Superposition {
    pub runs: Vec<PulseRun>,
    pub weights: Vec<f64>,
    pub combined: CurrentTrace,
}

pub fn run_superpose(cfg: &Config) -> Result<Superposition, AppError> {
    let ctx = context(cfg)?;
    let p = cfg
        .pulse
        .as_ref()
        .ok_or_else(|| AppError::Config("missing [pulse] block".into()))?;
    let length = p.length_nm.values()[0];
    let weights = cfg.superpose.as_ref().map(|s| s.weights.clone()).unwrap_or_default();
    write_manifest(cfg)?;
    let incs = incoming(cfg, &ctx)?;
    // one time grid for all: long enough for the slowest entry
    let pulse = pulse_spec(cfg, length)?;
    let t_end = cfg
        .sampling
        .t_end_fs
        .unwrap_or_else(|| incs.iter().map(|i| pulse_default_end(&pulse, i)).fold(0.0, f64::max));
    let runs = incs
        .par_iter()
        .map(|inc| pulse_one(cfg, &ctx, length, inc, Some(t_end), false))
        .collect::<Result<Vec<_>, AppError>>()?;
    let first: Vec<CurrentTrace> = runs.iter().map(|r| r.traces[0].clone()).collect();
    let combined = superpose_currents(&first, &weights)?;
    for r in &runs {
        let tr = &r.traces[0];
        emit(
            cfg,
            &format!("superpose_{}_trace.csv", r.incoming.tag()),
            &series(["t_fs", "j_nm_per_fs"], &tr.times, &tr.values),
        )?;
    }
    emit(
        cfg,
        "superpose_trace.csv",
        &series(["t_fs", "j_nm_per_fs"], &combined.times, &combined.values),
    )?;
    Ok(Superposition {
        runs,
        weights,
        combined,
    })
}

/// Runs `verb` on a resolved configuration.
pub fn run(verb: Verb, cfg: &Config) -> Result<(), AppError> {
    match verb {
        Verb::StaticScan => run_static_scan(cfg).map(|_| ()),
        Verb::Calibrate => run_calibrate(cfg).map(|_| ()),
        Verb::Switch => run_switch(cfg).map(|_| ()),
        Verb::Pulse => run_pulse(cfg).map(|_| ()),
        Verb::Superpose => run_superpose(cfg).map(|_| ()),
    }
}
